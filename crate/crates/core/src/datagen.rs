//! Mixed-Gamma sampling and the toy set-classification dataset.
//!
//! A mixed-Gamma variable is `0` with probability `p` and `Gamma(k, θ)`
//! otherwise. Each class of the toy task is one such distribution; a sample
//! is a set of i.i.d. observations from it.
//!
//! Randomness comes from ChaCha8 streams: the class parameters use stream 0
//! of the master seed and class `c` draws its samples from stream `c + 1`,
//! so classes can be generated in any order or in parallel with identical
//! results.

use alloc::format;
use alloc::vec::Vec;

use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};

use crate::exec::{Executor, Sequential};
use crate::{Error, Result};

/// Parameter boxes for class generation: `p`, `k`, `θ`.
pub const P_RANGE: (f64, f64) = (0.2, 0.8);
pub const SHAPE_RANGE: (f64, f64) = (0.5, 2.5);
pub const SCALE_RANGE: (f64, f64) = (0.2, 1.0);

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct MixedGammaParams {
    /// Point mass at zero.
    pub p: f64,
    /// Gamma shape.
    pub k: f64,
    /// Gamma scale.
    pub theta: f64,
}

impl MixedGammaParams {
    pub fn new(p: f64, k: f64, theta: f64) -> Result<Self> {
        let params = Self { p, k, theta };
        params.validate()?;
        Ok(params)
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.p) {
            return Err(Error::invalid(format!("p = {} outside [0, 1]", self.p)));
        }
        if !(self.k > 0.0 && self.k.is_finite()) {
            return Err(Error::invalid(format!("shape k = {} must be positive", self.k)));
        }
        if !(self.theta > 0.0 && self.theta.is_finite()) {
            return Err(Error::invalid(format!("scale theta = {} must be positive", self.theta)));
        }
        Ok(())
    }
}

/// Uniform on `[0, 1)` with 53 random bits.
pub fn uniform01<R: RngCore + ?Sized>(rng: &mut R) -> f64 {
    (rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

/// Uniform on the open interval `(0, 1)`.
fn uniform_open<R: RngCore + ?Sized>(rng: &mut R) -> f64 {
    ((rng.next_u64() >> 11) as f64 + 0.5) * (1.0 / (1u64 << 53) as f64)
}

pub fn uniform_range<R: RngCore + ?Sized>(rng: &mut R, lo: f64, hi: f64) -> f64 {
    lo + (hi - lo) * uniform01(rng)
}

/// Standard normal via the Marsaglia polar method (one value per call).
pub fn standard_normal<R: RngCore + ?Sized>(rng: &mut R) -> f64 {
    loop {
        let x = 2.0 * uniform01(rng) - 1.0;
        let y = 2.0 * uniform01(rng) - 1.0;
        let s = x * x + y * y;
        if s > 0.0 && s < 1.0 {
            return x * libm::sqrt(-2.0 * libm::log(s) / s);
        }
    }
}

/// `Gamma(shape, scale)` by Marsaglia-Tsang; shapes below 1 are boosted
/// through `Gamma(shape + 1) · U^(1/shape)`.
pub fn sample_gamma<R: RngCore + ?Sized>(rng: &mut R, shape: f64, scale: f64) -> f64 {
    if shape < 1.0 {
        let boost = libm::pow(uniform_open(rng), 1.0 / shape);
        return sample_gamma(rng, shape + 1.0, scale) * boost;
    }
    let d = shape - 1.0 / 3.0;
    let c = 1.0 / libm::sqrt(9.0 * d);
    loop {
        let x = standard_normal(rng);
        let t = 1.0 + c * x;
        if t <= 0.0 {
            continue;
        }
        let v = t * t * t;
        let u = uniform_open(rng);
        let x2 = x * x;
        if u < 1.0 - 0.0331 * x2 * x2 || libm::log(u) < 0.5 * x2 + d * (1.0 - v + libm::log(v)) {
            return d * v * scale;
        }
    }
}

/// `count` draws from the mixed-Gamma distribution.
pub fn sample_mixed_gamma<R: RngCore + ?Sized>(
    params: &MixedGammaParams,
    count: usize,
    rng: &mut R,
) -> Result<Vec<f64>> {
    params.validate()?;
    if count == 0 {
        return Err(Error::invalid("count must be at least 1"));
    }
    Ok((0..count)
        .map(|_| {
            if uniform01(rng) < params.p {
                0.0
            } else {
                sample_gamma(rng, params.k, params.theta)
            }
        })
        .collect())
}

/// Draws `n_classes` parameter triples uniformly from the class boxes.
pub fn make_class_set<R: RngCore + ?Sized>(n_classes: usize, rng: &mut R) -> Vec<MixedGammaParams> {
    (0..n_classes)
        .map(|_| {
            let p = uniform_range(rng, P_RANGE.0, P_RANGE.1);
            let k = uniform_range(rng, SHAPE_RANGE.0, SHAPE_RANGE.1);
            let theta = uniform_range(rng, SCALE_RANGE.0, SCALE_RANGE.1);
            MixedGammaParams { p, k, theta }
        })
        .collect()
}

/// Stream `stream` of the ChaCha8 generator keyed by `seed`.
pub fn seeded_stream(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Sizes of a toy dataset.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct DatasetShape {
    pub n_classes: usize,
    pub train_per_class: usize,
    pub test_per_class: usize,
    pub train_set_size: usize,
    pub test_set_size: usize,
}

impl Default for DatasetShape {
    /// 100 classes, 10 000 training and 1 000 test samples per class, sets of
    /// 25 observations for training and 50 for testing.
    fn default() -> Self {
        Self { n_classes: 100, train_per_class: 10_000, test_per_class: 1_000, train_set_size: 25, test_set_size: 50 }
    }
}

impl DatasetShape {
    pub fn validate(&self) -> Result<()> {
        let counts = [
            ("n_classes", self.n_classes),
            ("train_per_class", self.train_per_class),
            ("test_per_class", self.test_per_class),
            ("train_set_size", self.train_set_size),
            ("test_set_size", self.test_set_size),
        ];
        for (name, value) in counts {
            if value == 0 {
                return Err(Error::invalid(format!("{name} must be at least 1")));
            }
        }
        Ok(())
    }
}

/// Observations stored as `f32`, class-major then sample-major.
#[derive(Debug, Clone, PartialEq)]
pub struct ToyDataset {
    pub seed: u64,
    pub shape: DatasetShape,
    pub classes: Vec<MixedGammaParams>,
    /// One buffer per class, `train_per_class × train_set_size` values.
    pub train: Vec<Vec<f32>>,
    /// One buffer per class, `test_per_class × test_set_size` values.
    pub test: Vec<Vec<f32>>,
}

impl ToyDataset {
    pub fn n_classes(&self) -> usize {
        self.classes.len()
    }

    pub fn train_sample(&self, class: usize, index: usize) -> &[f32] {
        let n = self.shape.train_set_size;
        &self.train[class][index * n..(index + 1) * n]
    }

    pub fn test_sample(&self, class: usize, index: usize) -> &[f32] {
        let n = self.shape.test_set_size;
        &self.test[class][index * n..(index + 1) * n]
    }

    pub fn train_len(&self) -> usize {
        self.shape.n_classes * self.shape.train_per_class
    }

    pub fn test_len(&self) -> usize {
        self.shape.n_classes * self.shape.test_per_class
    }

    /// Checks buffer sizes and the nonnegative support.
    pub fn validate(&self) -> Result<()> {
        self.shape.validate()?;
        if self.classes.len() != self.shape.n_classes
            || self.train.len() != self.shape.n_classes
            || self.test.len() != self.shape.n_classes
        {
            return Err(Error::invalid("class count does not match the dataset shape"));
        }
        for c in &self.classes {
            c.validate()?;
        }
        let train_len = self.shape.train_per_class * self.shape.train_set_size;
        let test_len = self.shape.test_per_class * self.shape.test_set_size;
        for (train, test) in self.train.iter().zip(&self.test) {
            if train.len() != train_len || test.len() != test_len {
                return Err(Error::invalid("sample buffer has the wrong length"));
            }
            if train.iter().chain(test).any(|x| !(*x >= 0.0) || !x.is_finite()) {
                return Err(Error::invalid("observations must be finite and nonnegative"));
            }
        }
        Ok(())
    }
}

pub fn build_toy_dataset(shape: &DatasetShape, seed: u64) -> Result<ToyDataset> {
    build_toy_dataset_with(&Sequential, shape, seed)
}

pub fn build_toy_dataset_with<E: Executor>(executor: &E, shape: &DatasetShape, seed: u64) -> Result<ToyDataset> {
    shape.validate()?;
    let classes = make_class_set(shape.n_classes, &mut seeded_stream(seed, 0));
    build_dataset_for_classes(executor, shape, classes, seed)
}

/// Draws samples for caller-chosen class parameters; class `c` uses the
/// same stream as in [`build_toy_dataset`].
pub fn build_dataset_for_classes<E: Executor>(
    executor: &E,
    shape: &DatasetShape,
    classes: Vec<MixedGammaParams>,
    seed: u64,
) -> Result<ToyDataset> {
    shape.validate()?;
    if classes.len() != shape.n_classes {
        return Err(Error::invalid(format!(
            "{} class parameter sets given for {} classes",
            classes.len(),
            shape.n_classes
        )));
    }
    for c in &classes {
        c.validate()?;
    }
    let per_class = executor.map(shape.n_classes, |c| {
        let mut rng = seeded_stream(seed, c as u64 + 1);
        let draw = |rng: &mut ChaCha8Rng, count: usize| -> Result<Vec<f32>> {
            Ok(sample_mixed_gamma(&classes[c], count, rng)?.into_iter().map(|x| x as f32).collect())
        };
        let train = draw(&mut rng, shape.train_per_class * shape.train_set_size)?;
        let test = draw(&mut rng, shape.test_per_class * shape.test_set_size)?;
        Ok((train, test))
    });
    let mut train = Vec::with_capacity(shape.n_classes);
    let mut test = Vec::with_capacity(shape.n_classes);
    for result in per_class {
        let (tr, te) = result?;
        train.push(tr);
        test.push(te);
    }
    Ok(ToyDataset { seed, shape: *shape, classes, train, test })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pure_point_mass() {
        let params = MixedGammaParams::new(1.0, 1.3, 0.4).unwrap();
        let x = sample_mixed_gamma(&params, 10, &mut seeded_stream(3, 0)).unwrap();
        assert_eq!(x, alloc::vec![0.0; 10]);
    }

    #[test]
    fn invalid_params_rejected() {
        assert!(MixedGammaParams::new(1.5, 1.0, 1.0).is_err());
        assert!(MixedGammaParams::new(0.5, 0.0, 1.0).is_err());
        assert!(MixedGammaParams::new(0.5, 1.0, -1.0).is_err());
        let bad = MixedGammaParams { p: 0.5, k: -1.0, theta: 1.0 };
        assert!(sample_mixed_gamma(&bad, 3, &mut seeded_stream(0, 0)).is_err());
        let ok = MixedGammaParams::new(0.5, 1.0, 1.0).unwrap();
        assert!(sample_mixed_gamma(&ok, 0, &mut seeded_stream(0, 0)).is_err());
    }

    #[test]
    fn class_set_is_reproducible() {
        let a = make_class_set(1, &mut seeded_stream(42, 0));
        let b = make_class_set(1, &mut seeded_stream(42, 0));
        assert_eq!(a, b);
    }

    #[test]
    fn minimal_dataset() {
        let shape = DatasetShape { n_classes: 2, train_per_class: 1, test_per_class: 1, train_set_size: 3, test_set_size: 3 };
        let ds = build_toy_dataset(&shape, 1).unwrap();
        assert_eq!(ds.train_len(), 2);
        assert_eq!(ds.test_len(), 2);
        assert_eq!(ds.train_sample(1, 0).len(), 3);
        assert_eq!(ds.test_sample(0, 0).len(), 3);
        ds.validate().unwrap();
    }

    #[test]
    fn zero_counts_rejected() {
        let shape = DatasetShape { train_set_size: 0, ..DatasetShape::default() };
        assert!(build_toy_dataset(&shape, 1).is_err());
    }
}
