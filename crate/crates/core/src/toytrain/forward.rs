use alloc::vec;
use alloc::vec::Vec;

use super::model::{AggregatorKind, ToyModel};
use crate::embedding::{attention_weights, barycentric_embedding, NORM_FLOOR};
use crate::oracle::floored_sqrt;
use crate::transport::{sinkhorn_traced, squared_distances, uniform_weights, CostMatrix, SinkhornTrace};
use crate::{Error, Matrix, Result};

/// Intermediate values of the pooling layer.
#[derive(Debug, Clone, PartialEq)]
pub enum AggregationTape {
    Stats {
        weights: Vec<f64>,
        mean: Vec<f64>,
        variance: Vec<f64>,
        std: Vec<f64>,
    },
    Transport {
        /// Source intensities (uniform or attention).
        weights: Vec<f64>,
        cost: CostMatrix,
        sinkhorn: SinkhornTrace,
    },
}

/// Everything one forward pass computed, in evaluation order.
#[derive(Debug, Clone, PartialEq)]
pub struct GradientTape {
    pub input: Vec<f64>,
    /// `hidden×N` pre-activations of the first layer.
    pub pre_activation: Matrix,
    pub hidden: Matrix,
    /// `d×N` lifted features.
    pub features: Matrix,
    pub aggregation: AggregationTape,
    /// Aggregate before the optional l2-normalization.
    pub raw_aggregate: Vec<f64>,
    pub aggregate: Vec<f64>,
    pub logits: Vec<f64>,
}

/// Runs the model on one set of observations.
///
/// The transport layer always runs exactly `sinkhorn.max_iterations`
/// iterations so the computation graph has a fixed depth.
pub fn forward(model: &ToyModel, sample: &[f64]) -> Result<(Vec<f64>, GradientTape)> {
    if sample.is_empty() {
        return Err(Error::invalid("sample must contain at least one observation"));
    }
    if sample.iter().any(|x| !x.is_finite()) {
        return Err(Error::invalid("observations must be finite"));
    }
    let cfg = &model.config;
    let (h, d, n) = (cfg.hidden_width, cfg.feature_dim, sample.len());
    let lifter = &model.lifter;

    let mut pre = Matrix::zeros(h, n);
    let mut hidden = Matrix::zeros(h, n);
    for j in 0..h {
        let (w, b) = (lifter.w1[j], lifter.b1[j]);
        for (i, x) in sample.iter().enumerate() {
            let z = w * x + b;
            pre[(j, i)] = z;
            hidden[(j, i)] = z.max(0.0);
        }
    }
    let mut features = Matrix::zeros(d, n);
    for k in 0..d {
        let wk = lifter.w2.row(k);
        let out = features.row_mut(k);
        out.iter_mut().for_each(|o| *o = lifter.b2[k]);
        for (j, wkj) in wk.iter().enumerate() {
            for (o, hj) in out.iter_mut().zip(hidden.row(j)) {
                *o += wkj * hj;
            }
        }
    }

    let (aggregation, raw_aggregate) = match cfg.aggregator {
        AggregatorKind::Stats => {
            let weights = uniform_weights(n);
            let mut mean = vec![0.0; d];
            let mut variance = vec![0.0; d];
            let mut std = vec![0.0; d];
            for k in 0..d {
                let row = features.row(k);
                let m: f64 = row.iter().zip(&weights).map(|(x, w)| w * x).sum();
                let v: f64 = row.iter().zip(&weights).map(|(x, w)| w * (x - m) * (x - m)).sum();
                mean[k] = m;
                variance[k] = v;
                std[k] = floored_sqrt(v);
            }
            let mut agg = mean.clone();
            agg.extend_from_slice(&std);
            (AggregationTape::Stats { weights, mean, variance, std }, agg)
        }
        AggregatorKind::Ot { .. } | AggregatorKind::OtAttention { .. } => {
            let reference = model.reference.as_ref().ok_or_else(|| Error::invalid("transport model without reference"))?;
            let weights = match (cfg.aggregator.uses_attention(), reference.attention_element()) {
                (true, Some(u)) => attention_weights(u, &features)?,
                (true, None) => return Err(Error::invalid("attention model without attention element")),
                (false, _) => uniform_weights(n),
            };
            let cost = squared_distances(&features, reference.points())?;
            let sk_cfg = cfg.sinkhorn.unrolled(cfg.sinkhorn.max_iterations);
            let trace = sinkhorn_traced(&cost, &weights, reference.intensities(), &sk_cfg)?;
            let emb = barycentric_embedding(&features, &trace.plan.entries, reference, cfg.barycenter);
            (AggregationTape::Transport { weights, cost, sinkhorn: trace }, emb.flatten())
        }
    };

    let mut aggregate = raw_aggregate.clone();
    if cfg.l2_normalize {
        let norm = libm::sqrt(aggregate.iter().map(|v| v * v).sum());
        let denom = norm.max(NORM_FLOOR);
        aggregate.iter_mut().for_each(|v| *v /= denom);
    }

    let cls = &model.classifier;
    let logits: Vec<f64> = (0..cfg.n_classes)
        .map(|c| cls.bias[c] + cls.weight.row(c).iter().zip(&aggregate).map(|(w, x)| w * x).sum::<f64>())
        .collect();

    let tape = GradientTape {
        input: sample.to_vec(),
        pre_activation: pre,
        hidden,
        features,
        aggregation,
        raw_aggregate,
        aggregate,
        logits: logits.clone(),
    };
    Ok((logits, tape))
}

/// Softmax cross-entropy `−log softmax(logits)[label]`.
pub fn loss(logits: &[f64], label: usize) -> Result<f64> {
    if label >= logits.len() {
        return Err(Error::invalid("label out of range"));
    }
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let lse = max + libm::log(logits.iter().map(|l| libm::exp(l - max)).sum::<f64>());
    Ok(lse - logits[label])
}

/// Loss and its gradient with respect to the logits.
pub fn cross_entropy(logits: &[f64], label: usize) -> Result<(f64, Vec<f64>)> {
    let value = loss(logits, label)?;
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut grad: Vec<f64> = logits.iter().map(|l| libm::exp(l - max)).collect();
    let total: f64 = grad.iter().sum();
    grad.iter_mut().for_each(|g| *g /= total);
    grad[label] -= 1.0;
    Ok((value, grad))
}

/// Index of the largest logit; ties go to the lowest index.
pub fn predict(logits: &[f64]) -> usize {
    let mut best = 0;
    for (i, l) in logits.iter().enumerate() {
        if *l > logits[best] {
            best = i;
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::toytrain::ToyModelConfig;

    fn small(aggregator: AggregatorKind) -> ToyModel {
        let cfg = ToyModelConfig { hidden_width: 8, feature_dim: 4, n_classes: 5, aggregator, ..Default::default() };
        ToyModel::new(cfg, 11).unwrap()
    }

    #[test]
    fn loss_examples() {
        let flat = vec![0.3; 100];
        assert!((loss(&flat, 17).unwrap() - libm::log(100.0)).abs() < 1e-12);
        let mut peaked = vec![0.0; 10];
        peaked[3] = 1000.0;
        assert!(loss(&peaked, 3).unwrap().abs() < 1e-12);
        let l = [0.2, -1.3, 2.5, 0.0];
        let direct = -libm::log(libm::exp(l[1]) / l.iter().map(|x| libm::exp(*x)).sum::<f64>());
        assert!((loss(&l, 1).unwrap() - direct).abs() < 1e-9);
        assert!(loss(&l, 4).is_err());
    }

    #[test]
    fn predict_breaks_ties_low() {
        assert_eq!(predict(&[1.0, 3.0, 3.0]), 1);
        assert_eq!(predict(&[0.0, 0.0]), 0);
    }

    #[test]
    fn stats_constant_input_has_zero_spread() {
        let model = small(AggregatorKind::Stats);
        let (_, tape) = forward(&model, &[0.7; 6]).unwrap();
        assert!(tape.raw_aggregate[4..].iter().all(|s| *s == 0.0));
    }

    #[test]
    fn logits_have_class_count() {
        for agg in [AggregatorKind::Stats, AggregatorKind::Ot { ref_size: 3 }, AggregatorKind::OtAttention { ref_size: 2 }] {
            let (logits, _) = forward(&small(agg), &[0.0, 1.5, 0.2]).unwrap();
            assert_eq!(logits.len(), 5);
            assert!(logits.iter().all(|l| l.is_finite()));
        }
    }

    #[test]
    fn empty_sample_rejected() {
        assert!(forward(&small(AggregatorKind::Stats), &[]).is_err());
    }

    #[test]
    fn replay_is_bitwise_identical() {
        let model = small(AggregatorKind::OtAttention { ref_size: 3 });
        let a = forward(&model, &[0.0, 2.0, 0.4, 1.1]).unwrap();
        let b = forward(&model, &[0.0, 2.0, 0.4, 1.1]).unwrap();
        assert_eq!(a, b);
    }
}
