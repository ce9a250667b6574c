//! Exact and baseline references for the entropic solver and the embedding.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::transport::{check_intensities, CostMatrix};
use crate::{Error, Matrix, Result};

/// Variance floor of [`stats_pool`]: below it the standard deviation is 0.
pub const VARIANCE_FLOOR: f64 = 1e-12;

/// Largest size accepted by [`exact_assignment`].
pub const MAX_ASSIGNMENT_SIZE: usize = 16;

/// An unordered set of scalar observations.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleSet1D(Vec<f64>);

impl SampleSet1D {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::invalid("sample set must be non-empty"));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("sample values must be finite"));
        }
        Ok(Self(values))
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    fn sorted(&self) -> Vec<f64> {
        let mut v = self.0.clone();
        v.sort_by(f64::total_cmp);
        v
    }
}

/// Exact `W₂²` between the uniform empirical measures of two 1D sets.
///
/// Sorted (monotone) coupling: integrates `(Qx(t) − Qy(t))²` over the merged
/// breakpoints `i/n` and `j/m` of the two quantile functions.
pub fn exact_w2_1d(x: &SampleSet1D, y: &SampleSet1D) -> f64 {
    let xs = x.sorted();
    let ys = y.sorted();
    let (n, m) = (xs.len(), ys.len());
    if n == m {
        return xs.iter().zip(&ys).map(|(a, b)| (a - b) * (a - b)).sum::<f64>() / n as f64;
    }
    // walk the common refinement with integer arithmetic on the grid 1/(n·m)
    let (mut i, mut j) = (0usize, 0usize);
    let mut t = 0usize;
    let total = n * m;
    let mut acc = 0.0;
    while t < total {
        let next_x = (i + 1) * m;
        let next_y = (j + 1) * n;
        let next = next_x.min(next_y);
        let diff = xs[i] - ys[j];
        acc += (next - t) as f64 * diff * diff;
        t = next;
        if next == next_x {
            i += 1;
        }
        if next == next_y {
            j += 1;
        }
    }
    acc / total as f64
}

/// Exact OT between two uniform measures of equal size `N ≤ 16`: the
/// minimum-cost perfect matching with mass `1/N` per matched pair.
/// Returns the coupling and its transport cost.
pub fn exact_assignment(cost: &CostMatrix) -> Result<(Matrix, f64)> {
    let c = cost.entries();
    let (n, m) = c.shape();
    if n != m {
        return Err(Error::invalid(format!("assignment needs a square cost, got {n}x{m}")));
    }
    if n > MAX_ASSIGNMENT_SIZE {
        return Err(Error::invalid(format!("assignment oracle limited to N <= {MAX_ASSIGNMENT_SIZE}")));
    }
    let assignment = hungarian(c);
    let mass = 1.0 / n as f64;
    let mut plan = Matrix::zeros(n, n);
    let mut value = 0.0;
    for (i, &j) in assignment.iter().enumerate() {
        plan[(i, j)] = mass;
        value += mass * c[(i, j)];
    }
    Ok((plan, value))
}

/// Kuhn-Munkres with row/column potentials, O(n³). Returns the column
/// assigned to each row.
fn hungarian(c: &Matrix) -> Vec<usize> {
    let n = c.rows();
    // 1-based arrays with a virtual column 0
    let mut row_pot = vec![0.0; n + 1];
    let mut col_pot = vec![0.0; n + 1];
    let mut owner = vec![0usize; n + 1];
    let mut way = vec![0usize; n + 1];
    for row in 1..=n {
        owner[0] = row;
        let mut j0 = 0;
        let mut min_slack = vec![f64::INFINITY; n + 1];
        let mut used = vec![false; n + 1];
        loop {
            used[j0] = true;
            let i0 = owner[j0];
            let mut delta = f64::INFINITY;
            let mut j1 = 0;
            for j in 1..=n {
                if used[j] {
                    continue;
                }
                let slack = c[(i0 - 1, j - 1)] - row_pot[i0] - col_pot[j];
                if slack < min_slack[j] {
                    min_slack[j] = slack;
                    way[j] = j0;
                }
                if min_slack[j] < delta {
                    delta = min_slack[j];
                    j1 = j;
                }
            }
            for j in 0..=n {
                if used[j] {
                    row_pot[owner[j]] += delta;
                    col_pot[j] -= delta;
                } else {
                    min_slack[j] -= delta;
                }
            }
            j0 = j1;
            if owner[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            owner[j0] = owner[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }
    let mut assignment = vec![0; n];
    for j in 1..=n {
        assignment[owner[j] - 1] = j - 1;
    }
    assignment
}

/// Mean and standard deviation per coordinate, concatenated (`2d` values).
///
/// `features` is `d×N`. Uses the weighted population variance
/// `Σ wᵢ (xᵢ − m)²`; variances below [`VARIANCE_FLOOR`] give a zero deviation.
pub fn stats_pool(features: &Matrix, weights: Option<&[f64]>) -> Result<Vec<f64>> {
    let (d, n) = features.shape();
    if n == 0 {
        return Err(Error::invalid("statistics pooling needs at least one column"));
    }
    let uniform;
    let w = match weights {
        Some(w) => {
            if w.len() != n {
                return Err(Error::invalid("weight length mismatch"));
            }
            check_intensities(w, "pooling weights")?;
            w
        }
        None => {
            uniform = vec![1.0 / n as f64; n];
            &uniform
        }
    };
    let mut out = vec![0.0; 2 * d];
    for k in 0..d {
        let row = features.row(k);
        let mean: f64 = row.iter().zip(w).map(|(x, wi)| wi * x).sum();
        let var: f64 = row.iter().zip(w).map(|(x, wi)| wi * (x - mean) * (x - mean)).sum();
        out[k] = mean;
        out[d + k] = floored_sqrt(var);
    }
    Ok(out)
}

pub(crate) fn floored_sqrt(var: f64) -> f64 {
    if var > VARIANCE_FLOOR {
        libm::sqrt(var)
    } else {
        0.0
    }
}

/// Spearman rank correlation, with average ranks for ties.
pub fn spearman(x: &[f64], y: &[f64]) -> Result<f64> {
    if x.len() != y.len() || x.len() < 2 {
        return Err(Error::invalid("spearman needs two equal-length series of length >= 2"));
    }
    let rx = ranks(x);
    let ry = ranks(y);
    Ok(pearson(&rx, &ry))
}

fn ranks(x: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..x.len()).collect();
    order.sort_by(|&a, &b| x[a].total_cmp(&x[b]));
    let mut r = vec![0.0; x.len()];
    let mut start = 0;
    while start < order.len() {
        let mut end = start + 1;
        while end < order.len() && x[order[end]] == x[order[start]] {
            end += 1;
        }
        let avg = (start + end - 1) as f64 / 2.0 + 1.0;
        for &idx in &order[start..end] {
            r[idx] = avg;
        }
        start = end;
    }
    r
}

fn pearson(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let mut sxy = 0.0;
    let mut sxx = 0.0;
    let mut syy = 0.0;
    for (a, b) in x.iter().zip(y) {
        sxy += (a - mx) * (b - my);
        sxx += (a - mx) * (a - mx);
        syy += (b - my) * (b - my);
    }
    if sxx == 0.0 || syy == 0.0 {
        return 0.0;
    }
    sxy / libm::sqrt(sxx * syy)
}
