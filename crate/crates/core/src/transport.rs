//! Entropic-regularized optimal transport between discrete measures.
//!
//! The solver follows the plain Sinkhorn-Knopp matrix scaling: with
//! `K = exp(-C / ε)` and `u = 1/N_x`, `v = 1/N_z`, it alternates
//! `v ← b ⊘ Kᵀu` and `u ← a ⊘ Kv`, and returns `P = diag(u) K diag(v)`.
//! A log-domain variant of the same iteration is available through
//! [`SinkhornDomain::Log`] for small `ε`, where `K` underflows.
//!
//! [`sinkhorn_traced`] records the iterates and [`sinkhorn_backward`]
//! differentiates through every unrolled update.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::{Error, Matrix, Result};

/// Tolerance on `Σ intensities = 1`.
pub const MASS_TOLERANCE: f64 = 1e-9;

/// Weighted point cloud. `points` is `d×N`: one column per point.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteMeasure {
    points: Matrix,
    intensities: Vec<f64>,
}

impl DiscreteMeasure {
    pub fn new(points: Matrix, intensities: Vec<f64>) -> Result<Self> {
        if points.rows() == 0 || points.cols() == 0 {
            return Err(Error::invalid("a measure needs at least one point of dimension >= 1"));
        }
        if intensities.len() != points.cols() {
            return Err(Error::invalid("intensity length mismatch"));
        }
        if !points.is_finite() {
            return Err(Error::invalid("measure points must be finite"));
        }
        check_intensities(&intensities, "intensities")?;
        Ok(Self { points, intensities })
    }

    /// Equal mass `1/N` on every column of `points`.
    pub fn uniform(points: Matrix) -> Result<Self> {
        let n = points.cols();
        Self::new(points, uniform_weights(n))
    }

    pub fn points(&self) -> &Matrix {
        &self.points
    }

    pub fn intensities(&self) -> &[f64] {
        &self.intensities
    }

    pub fn dim(&self) -> usize {
        self.points.rows()
    }

    pub fn len(&self) -> usize {
        self.points.cols()
    }

    pub fn is_empty(&self) -> bool {
        self.points.cols() == 0
    }
}

/// `n` copies of `1/n`.
pub fn uniform_weights(n: usize) -> Vec<f64> {
    vec![1.0 / n as f64; n]
}

pub(crate) fn check_intensities(w: &[f64], what: &str) -> Result<()> {
    if w.iter().any(|x| !x.is_finite() || *x < 0.0) {
        return Err(Error::invalid(format!("{what} must be finite and nonnegative")));
    }
    let total: f64 = w.iter().sum();
    if libm::fabs(total - 1.0) > MASS_TOLERANCE {
        return Err(Error::invalid(format!("{what} sum to {total}, expected 1")));
    }
    Ok(())
}

/// Pairwise squared Euclidean distances, `N_x×N_z`.
#[derive(Debug, Clone, PartialEq)]
pub struct CostMatrix(Matrix);

impl CostMatrix {
    /// Wraps an arbitrary nonnegative finite matrix as a cost.
    pub fn new(entries: Matrix) -> Result<Self> {
        if entries.rows() == 0 || entries.cols() == 0 {
            return Err(Error::invalid("cost matrix must be non-empty"));
        }
        if entries.as_slice().iter().any(|c| !c.is_finite() || *c < 0.0) {
            return Err(Error::invalid("cost entries must be finite and nonnegative"));
        }
        Ok(Self(entries))
    }

    pub fn entries(&self) -> &Matrix {
        &self.0
    }

    pub fn shape(&self) -> (usize, usize) {
        self.0.shape()
    }

    pub fn transpose(&self) -> Self {
        Self(self.0.transpose())
    }

    /// Adds `c` to every entry (used to check shift invariance of plans).
    pub fn shifted(&self, c: f64) -> Result<Self> {
        let mut m = self.0.clone();
        m.as_mut_slice().iter_mut().for_each(|x| *x += c);
        Self::new(m)
    }
}

impl AsRef<Matrix> for CostMatrix {
    fn as_ref(&self) -> &Matrix {
        &self.0
    }
}

/// Cost between the supports of two measures.
pub fn cost_matrix(source: &DiscreteMeasure, reference: &DiscreteMeasure) -> Result<CostMatrix> {
    squared_distances(source.points(), reference.points())
}

/// `C[i][j] = ‖x_i − z_j‖²` for point columns of `x` (`d×N_x`) and `z` (`d×N_z`).
pub fn squared_distances(x: &Matrix, z: &Matrix) -> Result<CostMatrix> {
    if x.rows() != z.rows() {
        return Err(Error::invalid(format!(
            "dimension mismatch: source has d = {}, reference has d = {}",
            x.rows(),
            z.rows()
        )));
    }
    let (d, nx, nz) = (x.rows(), x.cols(), z.cols());
    let mut c = Matrix::zeros(nx, nz);
    for k in 0..d {
        let xs = x.row(k);
        let zs = z.row(k);
        for (i, xi) in xs.iter().enumerate() {
            let row = c.row_mut(i);
            for (cij, zj) in row.iter_mut().zip(zs) {
                let diff = xi - zj;
                *cij += diff * diff;
            }
        }
    }
    CostMatrix::new(c)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "kebab-case"))]
pub enum SinkhornDomain {
    /// Multiplicative scaling of `K = exp(-C/ε)`.
    #[default]
    Scaling,
    /// Dual potentials updated with log-sum-exp; use for `ε < 0.1`.
    Log,
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct SinkhornConfig {
    /// Entropy weight `ε`.
    pub epsilon: f64,
    pub max_iterations: usize,
    /// Threshold on the ∞-norm of the marginal residual.
    pub convergence_tolerance: f64,
    /// Denominators below this raise [`Error::Underflow`].
    pub underflow_floor: f64,
    pub domain: SinkhornDomain,
    /// Stop as soon as the residual drops below the tolerance. When false the
    /// iteration always runs `max_iterations` times (fixed-depth graph).
    pub early_stop: bool,
}

impl Default for SinkhornConfig {
    fn default() -> Self {
        Self {
            epsilon: 1.0,
            max_iterations: 20,
            convergence_tolerance: 1e-6,
            underflow_floor: 1e-300,
            domain: SinkhornDomain::Scaling,
            early_stop: true,
        }
    }
}

impl SinkhornConfig {
    pub fn with_epsilon(mut self, epsilon: f64) -> Self {
        self.epsilon = epsilon;
        self
    }

    pub fn with_max_iterations(mut self, n: usize) -> Self {
        self.max_iterations = n;
        self
    }

    pub fn with_tolerance(mut self, tol: f64) -> Self {
        self.convergence_tolerance = tol;
        self
    }

    pub fn with_domain(mut self, domain: SinkhornDomain) -> Self {
        self.domain = domain;
        self
    }

    /// Fixed iteration count, no early stopping.
    pub fn unrolled(mut self, iterations: usize) -> Self {
        self.max_iterations = iterations;
        self.early_stop = false;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.epsilon > 0.0 && self.epsilon.is_finite()) {
            return Err(Error::invalid("epsilon must be positive and finite"));
        }
        if self.max_iterations == 0 {
            return Err(Error::invalid("max_iterations must be at least 1"));
        }
        if !(self.convergence_tolerance > 0.0) {
            return Err(Error::invalid("convergence_tolerance must be positive"));
        }
        if !(self.underflow_floor >= 0.0) {
            return Err(Error::invalid("underflow_floor must be nonnegative"));
        }
        Ok(())
    }
}

/// Coupling returned by [`sinkhorn`].
#[derive(Debug, Clone, PartialEq)]
pub struct TransportPlan {
    pub entries: Matrix,
    /// Residual fell below the tolerance.
    pub converged: bool,
    pub iterations_used: usize,
    /// ∞-norm of `(row sums − a, column sums − b)` after the last iteration.
    pub marginal_residual: f64,
}

impl AsRef<Matrix> for TransportPlan {
    fn as_ref(&self) -> &Matrix {
        &self.entries
    }
}

/// Intermediates of the scaling iteration. Index `t` of `u`/`v` is the
/// value after iteration `t` (`t = 0` is the initialization).
#[derive(Debug, Clone, PartialEq)]
pub struct ScalingTrace {
    pub kernel: Matrix,
    pub u: Vec<Vec<f64>>,
    pub v: Vec<Vec<f64>>,
    /// `Kᵀ u⁽ᵗ⁻¹⁾`, the denominator of the `v` update of iteration `t` (index `t - 1`).
    pub col_denominators: Vec<Vec<f64>>,
    /// `K v⁽ᵗ⁾`, the denominator of the `u` update of iteration `t` (index `t - 1`).
    pub row_denominators: Vec<Vec<f64>>,
}

/// Intermediates of the log-domain iteration, with potentials
/// `f = ε log u` and `g = ε log v`.
#[derive(Debug, Clone, PartialEq)]
pub struct LogTrace {
    pub f: Vec<Vec<f64>>,
    pub g: Vec<Vec<f64>>,
    /// Softmax over `i` of `(f⁽ᵗ⁻¹⁾ᵢ − Cᵢⱼ)/ε`, one matrix per iteration.
    pub col_softmax: Vec<Matrix>,
    /// Softmax over `j` of `(g⁽ᵗ⁾ⱼ − Cᵢⱼ)/ε`, one matrix per iteration.
    pub row_softmax: Vec<Matrix>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum IterationTrace {
    Scaling(ScalingTrace),
    Log(LogTrace),
}

/// A plan together with everything needed to differentiate it.
#[derive(Debug, Clone, PartialEq)]
pub struct SinkhornTrace {
    pub epsilon: f64,
    pub iterations: IterationTrace,
    pub plan: TransportPlan,
}

/// Solves the entropic transport problem between intensities `a` and `b`.
pub fn sinkhorn(cost: &CostMatrix, a: &[f64], b: &[f64], config: &SinkhornConfig) -> Result<TransportPlan> {
    check_problem(cost, a, b, config)?;
    match config.domain {
        SinkhornDomain::Scaling => scaling_iterations(cost, a, b, config, false).map(|(p, _)| p),
        SinkhornDomain::Log => log_iterations(cost, a, b, config, false).map(|(p, _)| p),
    }
}

/// [`sinkhorn`], recording every intermediate vector for [`sinkhorn_backward`].
pub fn sinkhorn_traced(
    cost: &CostMatrix,
    a: &[f64],
    b: &[f64],
    config: &SinkhornConfig,
) -> Result<SinkhornTrace> {
    check_problem(cost, a, b, config)?;
    let (plan, iterations) = match config.domain {
        SinkhornDomain::Scaling => {
            let (p, t) = scaling_iterations(cost, a, b, config, true)?;
            (p, IterationTrace::Scaling(t))
        }
        SinkhornDomain::Log => {
            let (p, t) = log_iterations(cost, a, b, config, true)?;
            (p, IterationTrace::Log(t))
        }
    };
    Ok(SinkhornTrace { epsilon: config.epsilon, iterations, plan })
}

/// Reverse pass through the recorded iterations: given `∂L/∂P`, returns
/// `∂L/∂C` and `∂L/∂(log a)`. `b` and the initialization are constants.
pub fn sinkhorn_backward(trace: &SinkhornTrace, grad_plan: &Matrix) -> Result<(Matrix, Vec<f64>)> {
    let plan = &trace.plan.entries;
    if grad_plan.shape() != plan.shape() {
        return Err(Error::invalid("plan gradient shape mismatch"));
    }
    let (n, m) = plan.shape();
    let eps = trace.epsilon;
    let mut grad_log_a = vec![0.0; n];
    match &trace.iterations {
        IterationTrace::Scaling(t) => {
            let kernel = &t.kernel;
            let iters = t.u.len() - 1;
            let (u_last, v_last) = (&t.u[iters], &t.v[iters]);
            // P = diag(u) K diag(v)
            let mut grad_kernel = Matrix::zeros(n, m);
            let mut grad_u = vec![0.0; n];
            let mut grad_v = vec![0.0; m];
            for i in 0..n {
                let (krow, grow) = (kernel.row(i), grad_plan.row(i));
                let gk = grad_kernel.row_mut(i);
                for j in 0..m {
                    grad_u[i] += grow[j] * krow[j] * v_last[j];
                    grad_v[j] += grow[j] * u_last[i] * krow[j];
                    gk[j] = grow[j] * u_last[i] * v_last[j];
                }
            }
            let mut grad_s = vec![0.0; n];
            let mut grad_r = vec![0.0; m];
            for step in (1..=iters).rev() {
                let (u_t, u_prev, v_t) = (&t.u[step], &t.u[step - 1], &t.v[step]);
                let s = &t.row_denominators[step - 1];
                let r = &t.col_denominators[step - 1];
                // u = a ⊘ s with s = K v
                for i in 0..n {
                    grad_log_a[i] += grad_u[i] * u_t[i];
                    grad_s[i] = -grad_u[i] * u_t[i] / s[i];
                }
                for i in 0..n {
                    let krow = kernel.row(i);
                    let gk = grad_kernel.row_mut(i);
                    for j in 0..m {
                        grad_v[j] += krow[j] * grad_s[i];
                        gk[j] += grad_s[i] * v_t[j];
                    }
                }
                // v = b ⊘ r with r = Kᵀ u_prev
                for j in 0..m {
                    grad_r[j] = -grad_v[j] * v_t[j] / r[j];
                }
                for i in 0..n {
                    let krow = kernel.row(i);
                    let gk = grad_kernel.row_mut(i);
                    let mut acc = 0.0;
                    for j in 0..m {
                        acc += krow[j] * grad_r[j];
                        gk[j] += u_prev[i] * grad_r[j];
                    }
                    grad_u[i] = acc;
                }
                grad_v.iter_mut().for_each(|g| *g = 0.0);
            }
            // K = exp(−C/ε)
            let mut grad_cost = grad_kernel;
            for (gc, k) in grad_cost.as_mut_slice().iter_mut().zip(kernel.as_slice()) {
                *gc *= -k / eps;
            }
            Ok((grad_cost, grad_log_a))
        }
        IterationTrace::Log(t) => {
            let iters = t.f.len() - 1;
            // P = exp((f + g − C)/ε)
            let mut grad_cost = Matrix::zeros(n, m);
            let mut grad_f = vec![0.0; n];
            let mut grad_g = vec![0.0; m];
            for i in 0..n {
                let (prow, grow) = (plan.row(i), grad_plan.row(i));
                let gc = grad_cost.row_mut(i);
                for j in 0..m {
                    let w = grow[j] * prow[j] / eps;
                    grad_f[i] += w;
                    grad_g[j] += w;
                    gc[j] = -w;
                }
            }
            for step in (1..=iters).rev() {
                // f_i = ε log a_i − ε LSE_j((g_j − C_ij)/ε)
                let beta = &t.row_softmax[step - 1];
                for i in 0..n {
                    let gf = grad_f[i];
                    grad_log_a[i] += eps * gf;
                    let brow = beta.row(i);
                    let gc = grad_cost.row_mut(i);
                    for j in 0..m {
                        grad_g[j] -= gf * brow[j];
                        gc[j] += gf * brow[j];
                    }
                }
                // g_j = ε log b_j − ε LSE_i((f_prev_i − C_ij)/ε)
                let alpha = &t.col_softmax[step - 1];
                for i in 0..n {
                    let arow = alpha.row(i);
                    let gc = grad_cost.row_mut(i);
                    let mut acc = 0.0;
                    for j in 0..m {
                        acc -= grad_g[j] * arow[j];
                        gc[j] += grad_g[j] * arow[j];
                    }
                    grad_f[i] = acc;
                }
                grad_g.iter_mut().for_each(|g| *g = 0.0);
            }
            Ok((grad_cost, grad_log_a))
        }
    }
}

fn check_problem(cost: &CostMatrix, a: &[f64], b: &[f64], config: &SinkhornConfig) -> Result<()> {
    config.validate()?;
    let (nx, nz) = cost.shape();
    if a.len() != nx || b.len() != nz {
        return Err(Error::invalid(format!(
            "intensity length mismatch: cost is {nx}x{nz}, a has {}, b has {}",
            a.len(),
            b.len()
        )));
    }
    check_intensities(a, "source intensities")?;
    check_intensities(b, "reference intensities")
}

fn ensure_above_floor(values: &[f64], floor: f64, iteration: usize) -> Result<()> {
    for &x in values {
        // negated comparison also catches NaN
        if !(x >= floor) || x == 0.0 {
            return Err(Error::Underflow { iteration, value: x });
        }
    }
    Ok(())
}

fn mat_vec(k: &Matrix, v: &[f64], out: &mut [f64]) {
    for (i, o) in out.iter_mut().enumerate() {
        *o = k.row(i).iter().zip(v).map(|(kij, vj)| kij * vj).sum();
    }
}

fn mat_t_vec(k: &Matrix, u: &[f64], out: &mut [f64]) {
    out.iter_mut().for_each(|o| *o = 0.0);
    for (i, ui) in u.iter().enumerate() {
        for (o, kij) in out.iter_mut().zip(k.row(i)) {
            *o += kij * ui;
        }
    }
}

fn marginal_gap(scale: &[f64], denom: &[f64], target: &[f64]) -> f64 {
    scale
        .iter()
        .zip(denom)
        .zip(target)
        .map(|((s, d), t)| libm::fabs(s * d - t))
        .fold(0.0, f64::max)
}

fn scaling_iterations(
    cost: &CostMatrix,
    a: &[f64],
    b: &[f64],
    config: &SinkhornConfig,
    record: bool,
) -> Result<(TransportPlan, ScalingTrace)> {
    let (nx, nz) = cost.shape();
    let eps = config.epsilon;
    let mut kernel = cost.entries().clone();
    kernel.as_mut_slice().iter_mut().for_each(|c| *c = libm::exp(-*c / eps));

    let mut u = uniform_weights(nx);
    let mut v = uniform_weights(nz);
    let mut ktu = vec![0.0; nz];
    let mut kv = vec![0.0; nx];
    mat_t_vec(&kernel, &u, &mut ktu);

    let mut trace = ScalingTrace {
        kernel: Matrix::zeros(0, 0),
        u: Vec::new(),
        v: Vec::new(),
        col_denominators: Vec::new(),
        row_denominators: Vec::new(),
    };
    if record {
        trace.u.push(u.clone());
        trace.v.push(v.clone());
    }

    let mut residual = f64::INFINITY;
    let mut used = 0;
    for t in 1..=config.max_iterations {
        ensure_above_floor(&ktu, config.underflow_floor, t)?;
        for ((vj, bj), d) in v.iter_mut().zip(b).zip(&ktu) {
            *vj = bj / d;
        }
        mat_vec(&kernel, &v, &mut kv);
        ensure_above_floor(&kv, config.underflow_floor, t)?;
        for ((ui, ai), d) in u.iter_mut().zip(a).zip(&kv) {
            *ui = ai / d;
        }
        if record {
            trace.col_denominators.push(ktu.clone());
            trace.row_denominators.push(kv.clone());
            trace.u.push(u.clone());
            trace.v.push(v.clone());
        }
        mat_t_vec(&kernel, &u, &mut ktu);
        residual = marginal_gap(&u, &kv, a).max(marginal_gap(&v, &ktu, b));
        used = t;
        if config.early_stop && residual < config.convergence_tolerance {
            break;
        }
    }

    let mut plan = kernel.clone();
    for i in 0..nx {
        let ui = u[i];
        for (pij, vj) in plan.row_mut(i).iter_mut().zip(&v) {
            *pij *= ui * vj;
        }
    }
    if record {
        trace.kernel = kernel;
    }
    let plan = TransportPlan {
        entries: plan,
        converged: residual < config.convergence_tolerance,
        iterations_used: used,
        marginal_residual: residual,
    };
    Ok((plan, trace))
}

/// Writes `softmax(values)` into `out` and returns `log Σ exp(values)`.
fn softmax_lse(values: &[f64], out: &mut [f64]) -> f64 {
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        out.iter_mut().for_each(|o| *o = 0.0);
        return max;
    }
    let mut total = 0.0;
    for (o, x) in out.iter_mut().zip(values) {
        *o = libm::exp(x - max);
        total += *o;
    }
    out.iter_mut().for_each(|o| *o /= total);
    max + libm::log(total)
}

fn log_iterations(
    cost: &CostMatrix,
    a: &[f64],
    b: &[f64],
    config: &SinkhornConfig,
    record: bool,
) -> Result<(TransportPlan, LogTrace)> {
    let c = cost.entries();
    let (nx, nz) = c.shape();
    let eps = config.epsilon;
    let log_a: Vec<f64> = a.iter().map(|x| libm::log(*x)).collect();
    let log_b: Vec<f64> = b.iter().map(|x| libm::log(*x)).collect();
    // potentials f = ε log u, g = ε log v
    let mut f = vec![eps * libm::log(1.0 / nx as f64); nx];
    let mut g = vec![eps * libm::log(1.0 / nz as f64); nz];
    let mut trace = LogTrace { f: Vec::new(), g: Vec::new(), col_softmax: Vec::new(), row_softmax: Vec::new() };
    if record {
        trace.f.push(f.clone());
        trace.g.push(g.clone());
    }

    let mut residual = f64::INFINITY;
    let mut used = 0;
    let mut column = vec![0.0; nx];
    let mut column_soft = vec![0.0; nx];
    let mut row = vec![0.0; nz];
    let mut alpha = Matrix::zeros(nx, nz);
    let mut beta = Matrix::zeros(nx, nz);
    for t in 1..=config.max_iterations {
        for j in 0..nz {
            for i in 0..nx {
                column[i] = (f[i] - c[(i, j)]) / eps;
            }
            let lse = softmax_lse(&column, &mut column_soft);
            g[j] = eps * (log_b[j] - lse);
            for i in 0..nx {
                alpha[(i, j)] = column_soft[i];
            }
        }
        for i in 0..nx {
            for j in 0..nz {
                row[j] = (g[j] - c[(i, j)]) / eps;
            }
            let lse = softmax_lse(&row, beta.row_mut(i));
            f[i] = eps * (log_a[i] - lse);
        }
        if record {
            trace.f.push(f.clone());
            trace.g.push(g.clone());
            trace.col_softmax.push(alpha.clone());
            trace.row_softmax.push(beta.clone());
        }
        used = t;
        if config.early_stop || t == config.max_iterations {
            residual = log_residual(c, &f, &g, a, b, eps);
            if !residual.is_finite() {
                return Err(Error::Underflow { iteration: t, value: residual });
            }
            if config.early_stop && residual < config.convergence_tolerance {
                break;
            }
        }
    }

    let mut plan = Matrix::zeros(nx, nz);
    for i in 0..nx {
        for j in 0..nz {
            plan[(i, j)] = libm::exp((f[i] + g[j] - c[(i, j)]) / eps);
        }
    }
    let plan = TransportPlan {
        entries: plan,
        converged: residual < config.convergence_tolerance,
        iterations_used: used,
        marginal_residual: residual,
    };
    Ok((plan, trace))
}

fn log_residual(c: &Matrix, f: &[f64], g: &[f64], a: &[f64], b: &[f64], eps: f64) -> f64 {
    let (nx, nz) = c.shape();
    let mut rows = vec![0.0; nx];
    let mut cols = vec![0.0; nz];
    for i in 0..nx {
        for j in 0..nz {
            let p = libm::exp((f[i] + g[j] - c[(i, j)]) / eps);
            rows[i] += p;
            cols[j] += p;
        }
    }
    max_gap(&rows, a).max(max_gap(&cols, b))
}

fn max_gap(x: &[f64], y: &[f64]) -> f64 {
    x.iter().zip(y).map(|(p, q)| libm::fabs(p - q)).fold(0.0, f64::max)
}

fn check_same_shape(plan: &Matrix, cost: &CostMatrix) -> Result<()> {
    if plan.shape() != cost.shape() {
        return Err(Error::invalid(format!(
            "shape mismatch: plan is {:?}, cost is {:?}",
            plan.shape(),
            cost.shape()
        )));
    }
    Ok(())
}

/// `Σᵢⱼ Pᵢⱼ Cᵢⱼ`.
pub fn transport_cost(plan: impl AsRef<Matrix>, cost: &CostMatrix) -> Result<f64> {
    let plan = plan.as_ref();
    check_same_shape(plan, cost)?;
    Ok(plan.as_slice().iter().zip(cost.entries().as_slice()).map(|(p, c)| p * c).sum())
}

/// Entropy `H(P) = −Σ Pᵢⱼ log Pᵢⱼ`, with `0 log 0 = 0`.
pub fn plan_entropy(plan: impl AsRef<Matrix>) -> Result<f64> {
    let mut h = 0.0;
    for &p in plan.as_ref().as_slice() {
        if !(p >= 0.0) {
            return Err(Error::invalid("plan entries must be nonnegative"));
        }
        if p > 0.0 {
            h -= p * libm::log(p);
        }
    }
    Ok(h)
}

/// `Σᵢⱼ PᵢⱼCᵢⱼ − ε H(P)`.
pub fn entropic_cost(plan: impl AsRef<Matrix>, cost: &CostMatrix, epsilon: f64) -> Result<f64> {
    let plan = plan.as_ref();
    if !(epsilon > 0.0) {
        return Err(Error::invalid("epsilon must be positive"));
    }
    let h = plan_entropy(plan)?;
    Ok(transport_cost(plan, cost)? - epsilon * h)
}
