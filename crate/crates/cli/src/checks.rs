//! Oracle suites: entropic transport against exact assignment, and
//! embedding distances against exact 1D `W₂`.

use otpool_core::datagen::{make_class_set, sample_mixed_gamma, seeded_stream, standard_normal};
use otpool_core::embedding::{embed, embedding_distance, ReferenceSet};
use otpool_core::oracle::{exact_assignment, exact_w2_1d, spearman, SampleSet1D};
use otpool_core::transport::{sinkhorn, squared_distances, transport_cost, uniform_weights, SinkhornConfig, SinkhornDomain};
use otpool_core::{Matrix, Result};
use rand_core::RngCore;

pub const ASSIGNMENT_EPSILON: f64 = 0.01;
pub const ASSIGNMENT_TOLERANCE: f64 = 0.02;
pub const SPEARMAN_THRESHOLD: f64 = 0.9;
pub const SET_SIZES: (usize, usize) = (25, 50);
/// Span of the evenly spaced 1D reference grid.
pub const GRID_SPAN: (f64, f64) = (0.0, 4.0);

#[derive(Debug, Clone, PartialEq)]
pub struct AssignmentReport {
    pub trials: usize,
    pub worst_relative_error: f64,
    pub failures: usize,
}

impl AssignmentReport {
    pub fn passed(&self) -> bool {
        self.failures == 0
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DistanceReport {
    pub pairs: usize,
    pub spearman: f64,
}

impl DistanceReport {
    pub fn passed(&self) -> bool {
        self.spearman >= SPEARMAN_THRESHOLD
    }
}

fn below(rng: &mut impl RngCore, n: usize) -> usize {
    (rng.next_u64() % n as u64) as usize
}

pub fn normal_matrix(rng: &mut impl RngCore, rows: usize, cols: usize) -> Matrix {
    let data = (0..rows * cols).map(|_| standard_normal(rng)).collect();
    Matrix::from_vec(rows, cols, data).expect("shape matches data")
}

/// Relative error of the log-domain solution at small `ε` on random square
/// uniform instances with `N ≤ 8`.
pub fn assignment_suite(seed: u64, trials: usize) -> Result<AssignmentReport> {
    let mut rng = seeded_stream(seed, 1);
    let config = SinkhornConfig::default()
        .with_epsilon(ASSIGNMENT_EPSILON)
        .with_domain(SinkhornDomain::Log)
        .with_max_iterations(20_000)
        .with_tolerance(1e-8);
    let mut worst = 0.0f64;
    let mut failures = 0;
    for _ in 0..trials {
        let n = 2 + below(&mut rng, 7);
        let d = 1 + below(&mut rng, 4);
        let x = normal_matrix(&mut rng, d, n);
        let z = normal_matrix(&mut rng, d, n);
        let cost = squared_distances(&x, &z)?;
        let w = uniform_weights(n);
        let plan = sinkhorn(&cost, &w, &w, &config)?;
        let approx = transport_cost(&plan, &cost)?;
        let (_, exact) = exact_assignment(&cost)?;
        let err = (approx - exact).abs() / exact.max(f64::MIN_POSITIVE);
        worst = worst.max(err);
        if (approx - exact).abs() > ASSIGNMENT_TOLERANCE * exact + 1e-12 {
            failures += 1;
        }
    }
    Ok(AssignmentReport { trials, worst_relative_error: worst, failures })
}

/// `n` evenly spaced cell midpoints of `[lo, hi]` as a `1×n` reference.
pub fn reference_grid(n: usize, lo: f64, hi: f64) -> Result<ReferenceSet> {
    let step = (hi - lo) / n as f64;
    let points: Vec<f64> = (0..n).map(|j| lo + (j as f64 + 0.5) * step).collect();
    ReferenceSet::new(Matrix::row_vector(&points))
}

/// One set of mixed-Gamma draws with freshly drawn class parameters.
pub fn random_sample_set(rng: &mut impl RngCore) -> Result<Vec<f64>> {
    let params = make_class_set(1, rng)[0];
    let size = SET_SIZES.0 + below(rng, SET_SIZES.1 - SET_SIZES.0 + 1);
    sample_mixed_gamma(&params, size, rng)
}

/// Spearman correlation between embedding distances and exact `W₂²` over
/// random pairs of 1D sets.
pub fn distance_suite(seed: u64, pairs: usize, ref_size: usize, epsilon: f64, max_iters: usize) -> Result<DistanceReport> {
    let mut rng = seeded_stream(seed, 2);
    let reference = reference_grid(ref_size, GRID_SPAN.0, GRID_SPAN.1)?;
    let config = SinkhornConfig::default()
        .with_epsilon(epsilon)
        .with_domain(SinkhornDomain::Log)
        .with_max_iterations(max_iters);
    let mut approx = Vec::with_capacity(pairs);
    let mut exact = Vec::with_capacity(pairs);
    for _ in 0..pairs {
        let x = random_sample_set(&mut rng)?;
        let y = random_sample_set(&mut rng)?;
        let ex = embed(&Matrix::row_vector(&x), &uniform_weights(x.len()), &reference, &config)?;
        let ey = embed(&Matrix::row_vector(&y), &uniform_weights(y.len()), &reference, &config)?;
        approx.push(embedding_distance(&ex, &ey)?);
        exact.push(exact_w2_1d(&SampleSet1D::new(x)?, &SampleSet1D::new(y)?));
    }
    let rho = if pairs < 2 { f64::NAN } else { spearman(&approx, &exact)? };
    Ok(DistanceReport { pairs, spearman: rho })
}
