use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::datagen::{seeded_stream, standard_normal, uniform_range};
use crate::embedding::{BarycenterScale, ReferenceSet};
use crate::transport::{SinkhornConfig, SinkhornDomain};
use crate::{Error, Matrix, Result};

/// Pooling layer of the toy model.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(tag = "kind", rename_all = "kebab-case"))]
pub enum AggregatorKind {
    /// Mean and standard deviation, `2d` values.
    Stats,
    /// Transport embedding against `ref_size` reference points, `d·ref_size` values.
    Ot { ref_size: usize },
    /// As `Ot`, with softmax attention intensities on the input set.
    OtAttention { ref_size: usize },
}

impl AggregatorKind {
    pub fn ref_size(&self) -> Option<usize> {
        match *self {
            AggregatorKind::Stats => None,
            AggregatorKind::Ot { ref_size } | AggregatorKind::OtAttention { ref_size } => Some(ref_size),
        }
    }

    pub fn aggregate_len(&self, feature_dim: usize) -> usize {
        match self.ref_size() {
            None => 2 * feature_dim,
            Some(r) => feature_dim * r,
        }
    }

    pub fn uses_attention(&self) -> bool {
        matches!(self, AggregatorKind::OtAttention { .. })
    }
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ToyModelConfig {
    pub hidden_width: usize,
    /// `d`, the lifted feature dimension.
    pub feature_dim: usize,
    pub n_classes: usize,
    pub aggregator: AggregatorKind,
    /// l2-normalize the aggregate before the classifier.
    pub l2_normalize: bool,
    pub barycenter: BarycenterScale,
    /// Standard deviation of the Gaussian used to initialize reference points.
    pub reference_init_std: f64,
    /// Entropy weight, domain and (fixed) iteration depth of the transport
    /// layer. Defaults to the log domain: lifted features are unbounded
    /// during training and `exp(−C/ε)` underflows in the scaling domain.
    pub sinkhorn: SinkhornConfig,
}

impl Default for ToyModelConfig {
    fn default() -> Self {
        Self {
            hidden_width: 64,
            feature_dim: 16,
            n_classes: 100,
            aggregator: AggregatorKind::Stats,
            l2_normalize: false,
            barycenter: BarycenterScale::Verbatim,
            reference_init_std: 0.1,
            sinkhorn: SinkhornConfig::default().with_domain(SinkhornDomain::Log).unrolled(20),
        }
    }
}

impl ToyModelConfig {
    pub fn validate(&self) -> Result<()> {
        if self.hidden_width == 0 || self.feature_dim == 0 || self.n_classes == 0 {
            return Err(Error::invalid("hidden_width, feature_dim and n_classes must be at least 1"));
        }
        if self.aggregator.ref_size() == Some(0) {
            return Err(Error::invalid("reference size must be at least 1"));
        }
        if !(self.reference_init_std >= 0.0) {
            return Err(Error::invalid("reference_init_std must be nonnegative"));
        }
        self.sinkhorn.validate()
    }
}

/// `1 → hidden → d` perceptron with a rectifier between the layers.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Lifter {
    pub w1: Vec<f64>,
    pub b1: Vec<f64>,
    /// `d×hidden`.
    pub w2: Matrix,
    pub b2: Vec<f64>,
}

impl Lifter {
    fn zeros(hidden: usize, d: usize) -> Self {
        Self { w1: vec![0.0; hidden], b1: vec![0.0; hidden], w2: Matrix::zeros(d, hidden), b2: vec![0.0; d] }
    }
}

/// `y = W x + b` with `W` of shape `out×in`.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Affine {
    pub weight: Matrix,
    pub bias: Vec<f64>,
}

impl Affine {
    fn zeros(out: usize, inp: usize) -> Self {
        Self { weight: Matrix::zeros(out, inp), bias: vec![0.0; out] }
    }
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ToyModel {
    pub config: ToyModelConfig,
    pub lifter: Lifter,
    /// Present iff the aggregator is a transport variant.
    pub reference: Option<ReferenceSet>,
    pub classifier: Affine,
}

// U(-1/√fan_in, 1/√fan_in), the usual default for dense layers
fn fill_uniform(values: &mut [f64], fan_in: usize, rng: &mut rand_chacha::ChaCha8Rng) {
    let bound = 1.0 / libm::sqrt(fan_in as f64);
    values.iter_mut().for_each(|x| *x = uniform_range(rng, -bound, bound));
}

impl ToyModel {
    /// Randomly initialized model; the attention element starts at zero so
    /// the attention variant begins as the unweighted one.
    pub fn new(config: ToyModelConfig, seed: u64) -> Result<Self> {
        config.validate()?;
        let (h, d) = (config.hidden_width, config.feature_dim);
        let mut rng = seeded_stream(seed, 0);
        let mut lifter = Lifter::zeros(h, d);
        fill_uniform(&mut lifter.w1, 1, &mut rng);
        fill_uniform(&mut lifter.b1, 1, &mut rng);
        fill_uniform(lifter.w2.as_mut_slice(), h, &mut rng);
        fill_uniform(&mut lifter.b2, h, &mut rng);

        let reference = match config.aggregator.ref_size() {
            None => None,
            Some(r) => {
                let mut points = Matrix::zeros(d, r);
                points
                    .as_mut_slice()
                    .iter_mut()
                    .for_each(|z| *z = config.reference_init_std * standard_normal(&mut rng));
                let set = ReferenceSet::new(points)?;
                Some(if config.aggregator.uses_attention() { set.with_attention(vec![0.0; d])? } else { set })
            }
        };

        let agg = config.aggregator.aggregate_len(d);
        let mut classifier = Affine::zeros(config.n_classes, agg);
        fill_uniform(classifier.weight.as_mut_slice(), agg, &mut rng);
        fill_uniform(&mut classifier.bias, agg, &mut rng);
        Ok(Self { config, lifter, reference, classifier })
    }

    pub fn aggregate_len(&self) -> usize {
        self.config.aggregator.aggregate_len(self.config.feature_dim)
    }

    /// Checks that every tensor has the shape implied by the configuration.
    pub fn validate(&self) -> Result<()> {
        self.config.validate()?;
        let zeros = ToyGradients::zeros_like(self);
        let have: Vec<(&str, usize)> = self.tensors().iter().map(|(n, t)| (*n, t.len())).collect();
        let want: Vec<(&str, usize)> = zeros.tensors().iter().map(|(n, t)| (*n, t.len())).collect();
        if have != want {
            return Err(Error::invalid(format!("model tensors {have:?} do not match configuration {want:?}")));
        }
        if self.lifter.w2.shape() != (self.config.feature_dim, self.config.hidden_width)
            || self.classifier.weight.shape() != (self.config.n_classes, self.aggregate_len())
        {
            return Err(Error::invalid("model matrix shapes do not match configuration"));
        }
        if let Some(r) = &self.reference {
            if r.points().shape() != (self.config.feature_dim, self.config.aggregator.ref_size().unwrap_or(0)) {
                return Err(Error::invalid("reference shape does not match configuration"));
            }
        }
        Ok(())
    }

    /// Trainable tensors in a fixed order shared with [`ToyGradients`].
    pub fn tensors(&self) -> Vec<(&'static str, &[f64])> {
        let mut out: Vec<(&'static str, &[f64])> = vec![
            ("lifter.w1", &self.lifter.w1),
            ("lifter.b1", &self.lifter.b1),
            ("lifter.w2", self.lifter.w2.as_slice()),
            ("lifter.b2", &self.lifter.b2),
        ];
        if let Some(r) = &self.reference {
            out.push(("reference.points", r.points().as_slice()));
            if let Some(u) = r.attention_element() {
                out.push(("reference.attention", u));
            }
        }
        out.push(("classifier.weight", self.classifier.weight.as_slice()));
        out.push(("classifier.bias", &self.classifier.bias));
        out
    }

    pub fn tensors_mut(&mut self) -> Vec<(&'static str, &mut [f64])> {
        let mut out: Vec<(&'static str, &mut [f64])> = vec![
            ("lifter.w1", &mut self.lifter.w1),
            ("lifter.b1", &mut self.lifter.b1),
            ("lifter.w2", self.lifter.w2.as_mut_slice()),
            ("lifter.b2", &mut self.lifter.b2),
        ];
        if let Some(r) = &mut self.reference {
            let (points, attention) = r.trainable_mut();
            out.push(("reference.points", points.as_mut_slice()));
            if let Some(u) = attention {
                out.push(("reference.attention", u.as_mut_slice()));
            }
        }
        out.push(("classifier.weight", self.classifier.weight.as_mut_slice()));
        out.push(("classifier.bias", &mut self.classifier.bias));
        out
    }

    pub fn parameter_count(&self) -> usize {
        self.tensors().iter().map(|(_, t)| t.len()).sum()
    }
}

/// Gradients with the same layout as the trainable tensors of a [`ToyModel`].
#[derive(Debug, Clone, PartialEq)]
pub struct ToyGradients {
    pub lifter: Lifter,
    /// Absent for statistics pooling.
    pub reference_points: Option<Matrix>,
    pub attention_element: Option<Vec<f64>>,
    pub classifier: Affine,
}

impl ToyGradients {
    pub fn zeros_like(model: &ToyModel) -> Self {
        let c = &model.config;
        let reference_points = model.reference.as_ref().map(|r| Matrix::zeros(r.dim(), r.size()));
        let attention_element =
            model.reference.as_ref().and_then(|r| r.attention_element()).map(|u| vec![0.0; u.len()]);
        Self {
            lifter: Lifter::zeros(c.hidden_width, c.feature_dim),
            reference_points,
            attention_element,
            classifier: Affine::zeros(c.n_classes, model.aggregate_len()),
        }
    }

    pub fn tensors(&self) -> Vec<(&'static str, &[f64])> {
        let mut out: Vec<(&'static str, &[f64])> = vec![
            ("lifter.w1", &self.lifter.w1),
            ("lifter.b1", &self.lifter.b1),
            ("lifter.w2", self.lifter.w2.as_slice()),
            ("lifter.b2", &self.lifter.b2),
        ];
        if let Some(z) = &self.reference_points {
            out.push(("reference.points", z.as_slice()));
        }
        if let Some(u) = &self.attention_element {
            out.push(("reference.attention", u));
        }
        out.push(("classifier.weight", self.classifier.weight.as_slice()));
        out.push(("classifier.bias", &self.classifier.bias));
        out
    }

    pub fn tensors_mut(&mut self) -> Vec<(&'static str, &mut [f64])> {
        let mut out: Vec<(&'static str, &mut [f64])> = vec![
            ("lifter.w1", &mut self.lifter.w1),
            ("lifter.b1", &mut self.lifter.b1),
            ("lifter.w2", self.lifter.w2.as_mut_slice()),
            ("lifter.b2", &mut self.lifter.b2),
        ];
        if let Some(z) = &mut self.reference_points {
            out.push(("reference.points", z.as_mut_slice()));
        }
        if let Some(u) = &mut self.attention_element {
            out.push(("reference.attention", u.as_mut_slice()));
        }
        out.push(("classifier.weight", self.classifier.weight.as_mut_slice()));
        out.push(("classifier.bias", &mut self.classifier.bias));
        out
    }

    pub fn add_assign(&mut self, other: &ToyGradients) {
        for ((_, dst), (_, src)) in self.tensors_mut().into_iter().zip(other.tensors()) {
            dst.iter_mut().zip(src).for_each(|(d, s)| *d += s);
        }
    }

    pub fn scale(&mut self, factor: f64) {
        for (_, t) in self.tensors_mut() {
            t.iter_mut().for_each(|x| *x *= factor);
        }
    }

    pub fn is_zero(&self) -> bool {
        self.tensors().iter().all(|(_, t)| t.iter().all(|x| *x == 0.0))
    }

    pub fn is_finite(&self) -> bool {
        self.tensors().iter().all(|(_, t)| t.iter().all(|x| x.is_finite()))
    }
}
