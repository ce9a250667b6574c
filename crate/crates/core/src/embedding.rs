//! Linear Wasserstein embedding of a point set against a reference set.
//!
//! For input columns `x⁽ⁱ⁾` with intensities `a` and reference columns `z⁽ʲ⁾`
//! with uniform intensities, the embedding is
//! `φ(x)⁽ʲ⁾ = Σᵢ P*ᵢⱼ x⁽ⁱ⁾ − z⁽ʲ⁾`, a `d×N_z` matrix whatever the input size.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::exec::{Executor, Sequential};
use crate::transport::{check_intensities, sinkhorn, squared_distances, uniform_weights, SinkhornConfig};
use crate::{Error, Matrix, Result};

/// Norm floor used by [`l2_normalize_embedding`].
pub const NORM_FLOOR: f64 = 1e-12;

/// Reference points `Z` (`d×N_z`) with uniform mass and an optional
/// attention element `u ∈ ℝᵈ`.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ReferenceSet {
    points: Matrix,
    intensities: Vec<f64>,
    attention_element: Option<Vec<f64>>,
}

impl ReferenceSet {
    pub fn new(points: Matrix) -> Result<Self> {
        if points.rows() == 0 || points.cols() == 0 {
            return Err(Error::invalid("reference set needs at least one point of dimension >= 1"));
        }
        if !points.is_finite() {
            return Err(Error::invalid("reference points must be finite"));
        }
        let intensities = uniform_weights(points.cols());
        Ok(Self { points, intensities, attention_element: None })
    }

    pub fn with_attention(mut self, u: Vec<f64>) -> Result<Self> {
        if u.len() != self.dim() {
            return Err(Error::invalid(format!(
                "attention element has length {}, reference dimension is {}",
                u.len(),
                self.dim()
            )));
        }
        if u.iter().any(|x| !x.is_finite()) {
            return Err(Error::invalid("attention element must be finite"));
        }
        self.attention_element = Some(u);
        Ok(self)
    }

    pub fn points(&self) -> &Matrix {
        &self.points
    }

    pub fn points_mut(&mut self) -> &mut Matrix {
        &mut self.points
    }

    pub fn intensities(&self) -> &[f64] {
        &self.intensities
    }

    pub fn attention_element(&self) -> Option<&[f64]> {
        self.attention_element.as_deref()
    }

    pub fn attention_element_mut(&mut self) -> Option<&mut Vec<f64>> {
        self.attention_element.as_mut()
    }

    /// Mutable access to both trainable parts at once.
    pub fn trainable_mut(&mut self) -> (&mut Matrix, Option<&mut Vec<f64>>) {
        (&mut self.points, self.attention_element.as_mut())
    }

    pub fn dim(&self) -> usize {
        self.points.rows()
    }

    pub fn size(&self) -> usize {
        self.points.cols()
    }
}

/// The `d×N_z` aggregate `φ(x)`.
#[derive(Debug, Clone, PartialEq)]
pub struct WassersteinEmbedding {
    pub entries: Matrix,
}

impl WassersteinEmbedding {
    /// Row-major flattening (`d` outer, `N_z` inner).
    pub fn flatten(&self) -> Vec<f64> {
        self.entries.as_slice().to_vec()
    }

    pub fn shape(&self) -> (usize, usize) {
        self.entries.shape()
    }
}

/// How the plan-weighted barycentric term is scaled before subtracting `z⁽ʲ⁾`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "kebab-case"))]
pub enum BarycenterScale {
    /// `Σᵢ P*ᵢⱼ x⁽ⁱ⁾ − z⁽ʲ⁾` as is; column `j` of `P*` carries mass `1/N_z`.
    #[default]
    Verbatim,
    /// Divide column `j` of `P*` by its mass `b_j` first.
    ColumnMass,
}

impl BarycenterScale {
    pub(crate) fn column_factors(self, b: &[f64]) -> Vec<f64> {
        match self {
            BarycenterScale::Verbatim => vec![1.0; b.len()],
            BarycenterScale::ColumnMass => b.iter().map(|bj| 1.0 / bj).collect(),
        }
    }
}

/// Softmax of `uᵀx⁽ⁱ⁾` over the columns of `features` (`d×N_x`).
pub fn attention_weights(u: &[f64], features: &Matrix) -> Result<Vec<f64>> {
    if u.len() != features.rows() {
        return Err(Error::invalid(format!(
            "attention element has length {}, features have d = {}",
            u.len(),
            features.rows()
        )));
    }
    if !features.is_finite() || u.iter().any(|x| !x.is_finite()) {
        return Err(Error::invalid("attention inputs must be finite"));
    }
    let mut scores = vec![0.0; features.cols()];
    for (k, uk) in u.iter().enumerate() {
        for (s, x) in scores.iter_mut().zip(features.row(k)) {
            *s += uk * x;
        }
    }
    Ok(softmax(&scores))
}

pub(crate) fn softmax(scores: &[f64]) -> Vec<f64> {
    let max = scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut w: Vec<f64> = scores.iter().map(|s| libm::exp(s - max)).collect();
    let total: f64 = w.iter().sum();
    w.iter_mut().for_each(|x| *x /= total);
    w
}

/// Embeds `features` (`d×N_x`, intensities `a`) against `reference`.
pub fn embed(
    features: &Matrix,
    a: &[f64],
    reference: &ReferenceSet,
    config: &SinkhornConfig,
) -> Result<WassersteinEmbedding> {
    embed_with_scale(features, a, reference, config, BarycenterScale::Verbatim)
}

pub fn embed_with_scale(
    features: &Matrix,
    a: &[f64],
    reference: &ReferenceSet,
    config: &SinkhornConfig,
    scale: BarycenterScale,
) -> Result<WassersteinEmbedding> {
    if a.len() != features.cols() {
        return Err(Error::invalid("intensity length mismatch"));
    }
    check_intensities(a, "source intensities")?;
    let cost = squared_distances(features, reference.points())?;
    let plan = sinkhorn(&cost, a, reference.intensities(), config)?;
    Ok(barycentric_embedding(features, &plan.entries, reference, scale))
}

/// `X·P·diag(scale) − Z`.
pub(crate) fn barycentric_embedding(
    features: &Matrix,
    plan: &Matrix,
    reference: &ReferenceSet,
    scale: BarycenterScale,
) -> WassersteinEmbedding {
    let factors = scale.column_factors(reference.intensities());
    let (d, nz) = reference.points().shape();
    let mut out = Matrix::zeros(d, nz);
    for k in 0..d {
        let xk = features.row(k);
        let row = out.row_mut(k);
        for (i, xki) in xk.iter().enumerate() {
            for (o, pij) in row.iter_mut().zip(plan.row(i)) {
                *o += pij * xki;
            }
        }
        for ((o, zkj), f) in row.iter_mut().zip(reference.points().row(k)).zip(&factors) {
            *o = *o * f - zkj;
        }
    }
    WassersteinEmbedding { entries: out }
}

/// `‖e1 − e2‖²` (squared Frobenius norm).
pub fn embedding_distance(e1: &WassersteinEmbedding, e2: &WassersteinEmbedding) -> Result<f64> {
    if e1.shape() != e2.shape() {
        return Err(Error::invalid("embedding shape mismatch"));
    }
    Ok(e1
        .entries
        .as_slice()
        .iter()
        .zip(e2.entries.as_slice())
        .map(|(x, y)| (x - y) * (x - y))
        .sum())
}

/// `e / max(‖e‖, 1e-12)`.
pub fn l2_normalize_embedding(e: &WassersteinEmbedding) -> WassersteinEmbedding {
    let mut entries = e.entries.clone();
    l2_normalize_in_place(entries.as_mut_slice());
    WassersteinEmbedding { entries }
}

pub(crate) fn l2_normalize_in_place(x: &mut [f64]) -> f64 {
    let norm = libm::sqrt(x.iter().map(|v| v * v).sum());
    let denom = norm.max(NORM_FLOOR);
    x.iter_mut().for_each(|v| *v /= denom);
    norm
}

/// A `C×F×T` activation tensor (channels × frequency bins × time frames).
#[derive(Debug, Clone, PartialEq)]
pub struct GroupedActivation {
    channels: usize,
    freqs: usize,
    frames: usize,
    data: Vec<f64>,
}

impl GroupedActivation {
    /// `data` is laid out channel-major, then frequency, then time.
    pub fn new(channels: usize, freqs: usize, frames: usize, data: Vec<f64>) -> Result<Self> {
        if channels == 0 || freqs == 0 || frames == 0 {
            return Err(Error::invalid("C, F and T must all be at least 1"));
        }
        if data.len() != channels * freqs * frames {
            return Err(Error::invalid(format!(
                "activation buffer has {} values, expected {channels}x{freqs}x{frames}",
                data.len()
            )));
        }
        Ok(Self { channels, freqs, frames, data })
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn freqs(&self) -> usize {
        self.freqs
    }

    pub fn frames(&self) -> usize {
        self.frames
    }

    pub fn get(&self, c: usize, f: usize, t: usize) -> f64 {
        self.data[(c * self.freqs + f) * self.frames + t]
    }

    /// The `C×T` slice at frequency `f`: `T` channel-vectors.
    pub fn frequency_slice(&self, f: usize) -> Matrix {
        let mut m = Matrix::zeros(self.channels, self.frames);
        for c in 0..self.channels {
            let start = (c * self.freqs + f) * self.frames;
            m.row_mut(c).copy_from_slice(&self.data[start..start + self.frames]);
        }
        m
    }

    /// Reorders the time axis: frame `t` of the result is frame `order[t]`.
    pub fn permute_frames(&self, order: &[usize]) -> Self {
        let mut data = Vec::with_capacity(self.data.len());
        for chunk in self.data.chunks(self.frames) {
            data.extend(order.iter().map(|&t| chunk[t]));
        }
        Self { data, ..*self }
    }
}

/// Per-frequency aggregation: embed each `C×T` slice against its own
/// reference, l2-normalize each group, concatenate in frequency order.
pub fn grouped_aggregate(
    activations: &GroupedActivation,
    references: &[ReferenceSet],
    config: &SinkhornConfig,
    use_attention: bool,
) -> Result<Vec<f64>> {
    grouped_aggregate_with(&Sequential, activations, references, config, use_attention)
}

pub fn grouped_aggregate_with<E: Executor>(
    executor: &E,
    activations: &GroupedActivation,
    references: &[ReferenceSet],
    config: &SinkhornConfig,
    use_attention: bool,
) -> Result<Vec<f64>> {
    if references.len() != activations.freqs() {
        return Err(Error::invalid(format!(
            "expected {} reference sets (one per frequency), got {}",
            activations.freqs(),
            references.len()
        )));
    }
    for (f, r) in references.iter().enumerate() {
        if r.dim() != activations.channels() {
            return Err(Error::invalid(format!(
                "reference {f} has dimension {}, activations have {} channels",
                r.dim(),
                activations.channels()
            )));
        }
        if use_attention && r.attention_element().is_none() {
            return Err(Error::invalid(format!("reference {f} has no attention element")));
        }
    }
    let groups = executor.map(activations.freqs(), |f| {
        let slice = activations.frequency_slice(f);
        let reference = &references[f];
        let a = match reference.attention_element() {
            Some(u) if use_attention => attention_weights(u, &slice)?,
            _ => uniform_weights(activations.frames()),
        };
        let e = embed(&slice, &a, reference, config)?;
        Ok(l2_normalize_embedding(&e).flatten())
    });
    let mut out = Vec::new();
    for g in groups {
        out.extend(g?);
    }
    Ok(out)
}
