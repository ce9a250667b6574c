use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

use otpool_core::datagen::{build_dataset_for_classes, build_toy_dataset_with};
use otpool_core::toytrain::{evaluate_with, train_with, ToyModel};
use otpool_core::transport::{sinkhorn, transport_cost, CostMatrix};
use serde::Serialize;

use crate::cli::{BenchArgs, Command, GenDataArgs, OracleCheckArgs, RunFlags, SolveArgs, ToyTrainArgs};
use crate::config::{self, BenchConfig, DataConfig, OracleConfig, SolveConfig, TrainFileConfig};
use crate::error::{CliError, Result};
use crate::manifest::{default_manifest_path, RunManifest};
use crate::parallel::RayonExecutor;
use crate::{bench, checks, csvio, dataset_file};

pub fn run(command: Command) -> Result<()> {
    match command {
        Command::GenData(args) => gen_data(args),
        Command::Solve(args) => solve(args),
        Command::ToyTrain(args) => toy_train(args),
        Command::OracleCheck(args) => oracle_check(args),
        Command::Bench(args) => bench(args),
    }
}

fn override_with<T>(slot: &mut T, flag: Option<T>) {
    if let Some(v) = flag {
        *slot = v;
    }
}

struct Run {
    start: Instant,
    manifest: RunManifest,
    path: PathBuf,
}

impl Run {
    fn begin(command: &str, seed: Option<u64>, threads: usize, config: &impl Serialize, flags: &RunFlags, primary: &Path) -> Result<Self> {
        Ok(Self {
            start: Instant::now(),
            manifest: RunManifest::new(command, seed, threads, config)?,
            path: flags.manifest.clone().unwrap_or_else(|| default_manifest_path(primary)),
        })
    }

    fn finish(mut self) -> Result<()> {
        self.manifest.finish(self.start.elapsed());
        self.manifest.write(&self.path)
    }
}

fn gen_data(args: GenDataArgs) -> Result<()> {
    let mut cfg: DataConfig = config::load(args.config.as_deref())?;
    override_with(&mut cfg.seed, args.seed);
    let shape = cfg.shape();
    shape.validate()?;
    let executor = RayonExecutor::new(args.run.threads)?;
    let mut run = Run::begin("gen-data", Some(cfg.seed), executor.threads(), &cfg, &args.run, &args.out)?;
    let ds = match &cfg.classes {
        Some(classes) => build_dataset_for_classes(&executor, &shape, classes.clone(), cfg.seed)?,
        None => build_toy_dataset_with(&executor, &shape, cfg.seed)?,
    };
    dataset_file::write_dataset(&args.out, &ds)?;
    run.manifest.record_file(&args.out)?;
    println!(
        "wrote {}: {} classes, {} train and {} test samples",
        args.out.display(),
        shape.n_classes,
        ds.train_len(),
        ds.test_len()
    );
    run.finish()
}

fn solve(args: SolveArgs) -> Result<()> {
    let mut cfg: SolveConfig = config::load(args.config.as_deref())?;
    override_with(&mut cfg.epsilon, args.epsilon);
    override_with(&mut cfg.max_iters, args.max_iters);
    override_with(&mut cfg.tolerance, args.tolerance);
    override_with(&mut cfg.domain, args.domain);
    let sinkhorn_config = cfg.sinkhorn();
    sinkhorn_config.validate()?;
    let mut run = Run::begin("solve", None, 1, &cfg, &args.run, &args.out)?;
    let cost = CostMatrix::new(csvio::read_matrix(&args.cost)?)?;
    let a = csvio::read_vector(&args.a)?;
    let b = csvio::read_vector(&args.b)?;
    let (nx, nz) = cost.shape();
    if a.len() != nx || b.len() != nz {
        return Err(CliError::input(format!(
            "intensity length mismatch: cost is {nx}x{nz}, a has {} entries, b has {}",
            a.len(),
            b.len()
        )));
    }
    let plan = sinkhorn(&cost, &a, &b, &sinkhorn_config)?;
    csvio::write_matrix(&args.out, &plan.entries)?;
    run.manifest.record_file(&args.out)?;
    let value = transport_cost(&plan, &cost)?;
    let mut report = String::new();
    writeln!(report, "transport_cost {value}").unwrap();
    writeln!(report, "marginal_residual {:e}", plan.marginal_residual).unwrap();
    writeln!(report, "iterations {}", plan.iterations_used).unwrap();
    writeln!(report, "converged {}", plan.converged).unwrap();
    print!("{report}");
    run.manifest.record_bytes("-", report.as_bytes());
    run.finish()
}

/// Flags applied on top of the file configuration.
fn train_config(args: &ToyTrainArgs) -> Result<TrainFileConfig> {
    let mut cfg: TrainFileConfig = config::load(args.config.as_deref())?;
    override_with(&mut cfg.seed, args.seed);
    override_with(&mut cfg.epsilon, args.epsilon);
    override_with(&mut cfg.max_iters, args.max_iters);
    override_with(&mut cfg.ref_size, args.ref_size);
    override_with(&mut cfg.aggregator, args.aggregator);
    override_with(&mut cfg.epochs, args.epochs);
    override_with(&mut cfg.learning_rate, args.learning_rate);
    Ok(cfg)
}

fn toy_train(args: ToyTrainArgs) -> Result<()> {
    let cfg = train_config(&args)?;
    let ds = dataset_file::read_dataset(&args.data)?;
    let model_config = cfg.model_config(ds.n_classes());
    let train_config = cfg.train_config();
    train_config.validate()?;
    let model = ToyModel::new(model_config, cfg.seed)?;
    let executor = RayonExecutor::new(args.run.threads)?;
    let mut run = Run::begin("toy-train", Some(cfg.seed), executor.threads(), &cfg, &args.run, &args.out)?;
    run.manifest.record_file(&args.data)?;

    let (model, losses) = train_with(&executor, &ds, model, &train_config, |epoch, loss| {
        println!("epoch {:>3} train_loss {loss:.6}", epoch + 1);
    })?;
    let accuracy = evaluate_with(&executor, &model, &ds)?;
    println!("test_accuracy {accuracy:.6}");

    let checkpoint = serde_json::to_string(&model).map_err(|e| CliError::input(e.to_string()))?;
    std::fs::write(&args.out, checkpoint).map_err(|e| CliError::io(&args.out, e))?;
    let metrics_path = args.metrics.clone().unwrap_or_else(|| {
        let mut name = args.out.as_os_str().to_owned();
        name.push(".metrics.csv");
        PathBuf::from(name)
    });
    let mut metrics = String::from("metric,epoch,value\r\n");
    for (e, loss) in losses.iter().enumerate() {
        write!(metrics, "train_loss,{},{loss}\r\n", e + 1).unwrap();
    }
    write!(metrics, "test_accuracy,{},{accuracy}\r\n", losses.len()).unwrap();
    std::fs::write(&metrics_path, metrics).map_err(|e| CliError::io(&metrics_path, e))?;
    run.manifest.record_file(&args.out)?;
    run.manifest.record_file(&metrics_path)?;
    run.finish()
}

pub fn read_checkpoint(path: &Path) -> Result<ToyModel> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    let model: ToyModel =
        serde_json::from_str(&text).map_err(|e| CliError::input(format!("{}: {e}", path.display())))?;
    model.validate()?;
    Ok(model)
}

fn oracle_check(args: OracleCheckArgs) -> Result<()> {
    let mut cfg: OracleConfig = config::load(args.config.as_deref())?;
    override_with(&mut cfg.seed, args.seed);
    override_with(&mut cfg.trials, args.trials);
    override_with(&mut cfg.epsilon, args.epsilon);
    override_with(&mut cfg.ref_size, args.ref_size);
    override_with(&mut cfg.max_iters, args.max_iters);
    if cfg.trials == 0 || cfg.ref_size == 0 || cfg.max_iters == 0 || !(cfg.epsilon > 0.0) {
        return Err(CliError::input("trials, ref_size, max_iters and epsilon must be positive"));
    }
    let manifest_anchor = args.out.clone().unwrap_or_else(|| PathBuf::from("oracle-check"));
    let mut run = Run::begin("oracle-check", Some(cfg.seed), 1, &cfg, &args.run, &manifest_anchor)?;

    let assignment = checks::assignment_suite(cfg.seed, cfg.trials)?;
    let distance = checks::distance_suite(cfg.seed, cfg.trials, cfg.ref_size, cfg.epsilon, cfg.max_iters)?;
    let verdict = |ok: bool| if ok { "pass" } else { "FAIL" };
    let mut report = String::new();
    writeln!(report, "suite,trials,failures,metric,value,threshold,result").unwrap();
    writeln!(
        report,
        "sinkhorn-vs-assignment,{},{},worst_relative_error,{:.6e},{},{}",
        assignment.trials,
        assignment.failures,
        assignment.worst_relative_error,
        checks::ASSIGNMENT_TOLERANCE,
        verdict(assignment.passed())
    )
    .unwrap();
    writeln!(
        report,
        "embedding-vs-exact-1d,{},{},spearman,{:.6},{},{}",
        distance.pairs,
        u8::from(!distance.passed()),
        distance.spearman,
        checks::SPEARMAN_THRESHOLD,
        verdict(distance.passed())
    )
    .unwrap();
    print!("{report}");
    if let Some(out) = &args.out {
        std::fs::write(out, &report).map_err(|e| CliError::io(out, e))?;
    }
    run.manifest.record_bytes("-", report.as_bytes());
    run.finish()?;
    if assignment.passed() && distance.passed() {
        Ok(())
    } else {
        Err(CliError::Validation("oracle suite failed".into()))
    }
}

fn bench(args: BenchArgs) -> Result<()> {
    let mut cfg: BenchConfig = config::load(args.config.as_deref())?;
    override_with(&mut cfg.seed, args.seed);
    override_with(&mut cfg.epsilon, args.epsilon);
    override_with(&mut cfg.repetitions, args.repetitions);
    if let Some(n) = args.max_iters {
        cfg.iterations = vec![n];
    }
    if let Some(n) = args.ref_size {
        cfg.ref_sizes = vec![n];
    }
    cfg.validate()?;
    let mut run = Run::begin("bench", Some(cfg.seed), 1, &cfg, &args.run, &args.out)?;
    let rows = bench::run(&cfg)?;
    let mut table = format!("{}\r\n", bench::CSV_HEADER);
    for row in &rows {
        table.push_str(&row.csv_line());
        table.push_str("\r\n");
    }
    print!("{}", table.replace("\r\n", "\n"));
    std::fs::write(&args.out, &table).map_err(|e| CliError::io(&args.out, e))?;
    run.manifest.record_file(&args.out)?;
    run.finish()
}
