use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use otpool_core::transport::SinkhornDomain;

use crate::config::AggregatorName;

#[derive(Debug, Parser)]
#[command(name = "otpool", version, about = "Optimal-transport feature aggregation toolkit")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a mixed-Gamma classification dataset.
    GenData(GenDataArgs),
    /// Solve one entropic transport problem from CSV inputs.
    Solve(SolveArgs),
    /// Train and evaluate a set classifier on a generated dataset.
    ToyTrain(ToyTrainArgs),
    /// Compare solver and embedding against exact oracles.
    OracleCheck(OracleCheckArgs),
    /// Time grouped transport aggregation against statistics pooling.
    Bench(BenchArgs),
}

#[derive(Debug, Clone, Args)]
pub struct RunFlags {
    /// Worker threads; 0 uses every logical CPU.
    #[arg(long, default_value_t = 0)]
    pub threads: usize,
    /// Manifest path; defaults to the primary output with `.manifest.json` appended.
    #[arg(long)]
    pub manifest: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct GenDataArgs {
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub seed: Option<u64>,
    #[command(flatten)]
    pub run: RunFlags,
}

#[derive(Debug, Args)]
pub struct SolveArgs {
    /// Cost matrix CSV, `N_x` rows by `N_z` columns.
    #[arg(long)]
    pub cost: PathBuf,
    /// Source intensities CSV (one row or one column).
    #[arg(long)]
    pub a: PathBuf,
    /// Reference intensities CSV (one row or one column).
    #[arg(long)]
    pub b: PathBuf,
    /// Output plan CSV.
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub epsilon: Option<f64>,
    #[arg(long)]
    pub max_iters: Option<usize>,
    #[arg(long)]
    pub tolerance: Option<f64>,
    #[arg(long, value_parser = parse_domain)]
    pub domain: Option<SinkhornDomain>,
    #[command(flatten)]
    pub run: RunFlags,
}

#[derive(Debug, Args)]
pub struct ToyTrainArgs {
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Dataset written by `gen-data`.
    #[arg(long)]
    pub data: PathBuf,
    /// Output model checkpoint (JSON).
    #[arg(long)]
    pub out: PathBuf,
    /// Metrics CSV; defaults to the checkpoint path with `.metrics.csv` appended.
    #[arg(long)]
    pub metrics: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub epsilon: Option<f64>,
    #[arg(long)]
    pub max_iters: Option<usize>,
    #[arg(long)]
    pub ref_size: Option<usize>,
    #[arg(long, value_enum)]
    pub aggregator: Option<AggregatorName>,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub learning_rate: Option<f64>,
    #[command(flatten)]
    pub run: RunFlags,
}

#[derive(Debug, Args)]
pub struct OracleCheckArgs {
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub trials: Option<usize>,
    #[arg(long)]
    pub epsilon: Option<f64>,
    #[arg(long)]
    pub ref_size: Option<usize>,
    #[arg(long)]
    pub max_iters: Option<usize>,
    /// Also write the report to this file.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[command(flatten)]
    pub run: RunFlags,
}

#[derive(Debug, Args)]
pub struct BenchArgs {
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Output timing CSV.
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub epsilon: Option<f64>,
    /// Replaces the iteration grid with a single value.
    #[arg(long)]
    pub max_iters: Option<usize>,
    /// Replaces the reference-size grid with a single value.
    #[arg(long)]
    pub ref_size: Option<usize>,
    #[arg(long)]
    pub repetitions: Option<usize>,
    #[command(flatten)]
    pub run: RunFlags,
}

fn parse_domain(s: &str) -> Result<SinkhornDomain, String> {
    match s {
        "scaling" => Ok(SinkhornDomain::Scaling),
        "log" => Ok(SinkhornDomain::Log),
        _ => Err(format!("unknown domain {s:?}, expected scaling or log")),
    }
}
