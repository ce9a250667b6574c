//! Versioned JSON configuration files. Unknown keys are rejected and every
//! omitted key takes its documented default.

use std::path::Path;

use otpool_core::datagen::{DatasetShape, MixedGammaParams};
use otpool_core::embedding::BarycenterScale;
use otpool_core::toytrain::{AggregatorKind, OptimizerKind, ToyModelConfig, TrainConfig};
use otpool_core::transport::{SinkhornConfig, SinkhornDomain};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::{CliError, Result};

pub const CONFIG_VERSION: u32 = 1;

/// Implemented by every configuration file type.
pub trait Versioned {
    fn version(&self) -> u32;
}

pub fn load<T: DeserializeOwned + Default + Versioned>(path: Option<&Path>) -> Result<T> {
    let Some(path) = path else {
        return Ok(T::default());
    };
    let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    let bad = |e: serde_json::Error| CliError::input(format!("{}: {e}", path.display()));
    let value: serde_json::Value = serde_json::from_str(&text).map_err(bad)?;
    if value.get("version").is_none() {
        return Err(CliError::input(format!("{}: missing \"version\" key", path.display())));
    }
    let config: T = serde_json::from_value(value).map_err(bad)?;
    if config.version() != CONFIG_VERSION {
        return Err(CliError::input(format!(
            "{}: unsupported config version {}, expected {CONFIG_VERSION}",
            path.display(),
            config.version()
        )));
    }
    Ok(config)
}

macro_rules! versioned {
    ($($t:ty),*) => {$(
        impl Versioned for $t {
            fn version(&self) -> u32 {
                self.version
            }
        }
    )*};
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum AggregatorName {
    Stats,
    Ot,
    OtAtt,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DataConfig {
    pub version: u32,
    pub seed: u64,
    pub n_classes: usize,
    pub train_per_class: usize,
    pub test_per_class: usize,
    pub train_set_size: usize,
    pub test_set_size: usize,
    /// Fixed class parameters; drawn from the seed when absent.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub classes: Option<Vec<MixedGammaParams>>,
}

impl Default for DataConfig {
    fn default() -> Self {
        let shape = DatasetShape::default();
        Self {
            version: CONFIG_VERSION,
            seed: 0,
            n_classes: shape.n_classes,
            train_per_class: shape.train_per_class,
            test_per_class: shape.test_per_class,
            train_set_size: shape.train_set_size,
            test_set_size: shape.test_set_size,
            classes: None,
        }
    }
}

impl DataConfig {
    pub fn shape(&self) -> DatasetShape {
        DatasetShape {
            n_classes: self.n_classes,
            train_per_class: self.train_per_class,
            test_per_class: self.test_per_class,
            train_set_size: self.train_set_size,
            test_set_size: self.test_set_size,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SolveConfig {
    pub version: u32,
    pub epsilon: f64,
    pub max_iters: usize,
    pub tolerance: f64,
    pub domain: SinkhornDomain,
}

impl Default for SolveConfig {
    fn default() -> Self {
        let s = SinkhornConfig::default();
        Self {
            version: CONFIG_VERSION,
            epsilon: s.epsilon,
            max_iters: s.max_iterations,
            tolerance: s.convergence_tolerance,
            domain: s.domain,
        }
    }
}

impl SolveConfig {
    pub fn sinkhorn(&self) -> SinkhornConfig {
        SinkhornConfig::default()
            .with_epsilon(self.epsilon)
            .with_max_iterations(self.max_iters)
            .with_tolerance(self.tolerance)
            .with_domain(self.domain)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainFileConfig {
    pub version: u32,
    /// Seeds parameter initialization and batch shuffling.
    pub seed: u64,
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub optimizer: OptimizerKind,
    pub aggregator: AggregatorName,
    pub ref_size: usize,
    pub hidden_width: usize,
    pub feature_dim: usize,
    pub l2_normalize: bool,
    pub barycenter: BarycenterScale,
    pub reference_init_std: f64,
    pub epsilon: f64,
    pub max_iters: usize,
    pub domain: SinkhornDomain,
}

impl Default for TrainFileConfig {
    fn default() -> Self {
        let model = ToyModelConfig::default();
        let train = TrainConfig::default();
        Self {
            version: CONFIG_VERSION,
            seed: train.seed,
            epochs: train.epochs,
            batch_size: train.batch_size,
            learning_rate: train.learning_rate,
            optimizer: train.optimizer,
            aggregator: AggregatorName::Stats,
            ref_size: 16,
            hidden_width: model.hidden_width,
            feature_dim: model.feature_dim,
            l2_normalize: model.l2_normalize,
            barycenter: model.barycenter,
            reference_init_std: model.reference_init_std,
            epsilon: model.sinkhorn.epsilon,
            max_iters: model.sinkhorn.max_iterations,
            domain: model.sinkhorn.domain,
        }
    }
}

impl TrainFileConfig {
    pub fn aggregator_kind(&self) -> AggregatorKind {
        match self.aggregator {
            AggregatorName::Stats => AggregatorKind::Stats,
            AggregatorName::Ot => AggregatorKind::Ot { ref_size: self.ref_size },
            AggregatorName::OtAtt => AggregatorKind::OtAttention { ref_size: self.ref_size },
        }
    }

    pub fn model_config(&self, n_classes: usize) -> ToyModelConfig {
        ToyModelConfig {
            hidden_width: self.hidden_width,
            feature_dim: self.feature_dim,
            n_classes,
            aggregator: self.aggregator_kind(),
            l2_normalize: self.l2_normalize,
            barycenter: self.barycenter,
            reference_init_std: self.reference_init_std,
            sinkhorn: SinkhornConfig::default()
                .with_epsilon(self.epsilon)
                .with_domain(self.domain)
                .unrolled(self.max_iters),
        }
    }

    pub fn train_config(&self) -> TrainConfig {
        TrainConfig {
            epochs: self.epochs,
            batch_size: self.batch_size,
            learning_rate: self.learning_rate,
            seed: self.seed,
            optimizer: self.optimizer,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OracleConfig {
    pub version: u32,
    pub seed: u64,
    /// Number of comparisons in each suite.
    pub trials: usize,
    /// Entropy weight of the embedding suite.
    pub epsilon: f64,
    pub ref_size: usize,
    pub max_iters: usize,
}

impl Default for OracleConfig {
    fn default() -> Self {
        Self { version: CONFIG_VERSION, seed: 0, trials: 200, epsilon: 1.0, ref_size: 16, max_iters: 20 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BenchConfig {
    pub version: u32,
    pub seed: u64,
    pub channels: usize,
    pub freqs: usize,
    pub frames: Vec<usize>,
    pub ref_sizes: Vec<usize>,
    pub iterations: Vec<usize>,
    pub repetitions: usize,
    pub epsilon: f64,
    pub domain: SinkhornDomain,
}

impl Default for BenchConfig {
    fn default() -> Self {
        Self {
            version: CONFIG_VERSION,
            seed: 0,
            channels: 32,
            freqs: 4,
            frames: vec![100, 200],
            ref_sizes: vec![8, 16],
            iterations: vec![10, 20],
            repetitions: 30,
            epsilon: 1.0,
            domain: SinkhornDomain::Scaling,
        }
    }
}

impl BenchConfig {
    pub fn validate(&self) -> Result<()> {
        if self.channels == 0 || self.freqs == 0 {
            return Err(CliError::input("channels and freqs must be at least 1"));
        }
        if self.frames.is_empty() || self.ref_sizes.is_empty() || self.iterations.is_empty() {
            return Err(CliError::input("frames, ref_sizes and iterations must be non-empty"));
        }
        if self.frames.contains(&0) || self.ref_sizes.contains(&0) || self.iterations.contains(&0) {
            return Err(CliError::input("grid values must be at least 1"));
        }
        if self.repetitions < 30 {
            return Err(CliError::input("repetitions must be at least 30"));
        }
        Ok(())
    }
}

versioned!(DataConfig, SolveConfig, TrainFileConfig, OracleConfig, BenchConfig);
