use alloc::vec;

use super::forward::{cross_entropy, AggregationTape, GradientTape};
use super::model::{ToyGradients, ToyModel};
use crate::embedding::NORM_FLOOR;
use crate::oracle::VARIANCE_FLOOR;
use crate::transport::sinkhorn_backward;
use crate::{Error, Matrix, Result};

/// Gradients of the cross-entropy loss for `label` with respect to every
/// trainable tensor.
pub fn backward(model: &ToyModel, tape: &GradientTape, label: usize) -> Result<ToyGradients> {
    let (_, grad_logits) = cross_entropy(&tape.logits, label)?;
    backward_from_logits(model, tape, &grad_logits)
}

fn check(values: &[f64], node: &'static str) -> Result<()> {
    if values.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(Error::NonFinite { node })
    }
}

/// Reverse pass for an arbitrary upstream gradient on the logits.
pub fn backward_from_logits(model: &ToyModel, tape: &GradientTape, grad_logits: &[f64]) -> Result<ToyGradients> {
    let cfg = &model.config;
    if grad_logits.len() != cfg.n_classes || tape.logits.len() != cfg.n_classes {
        return Err(Error::invalid("upstream gradient does not match the class count"));
    }
    check(grad_logits, "logits")?;
    let mut grads = ToyGradients::zeros_like(model);
    let (h, d, n) = (cfg.hidden_width, cfg.feature_dim, tape.input.len());

    // classifier
    let agg_len = tape.aggregate.len();
    let mut grad_agg = vec![0.0; agg_len];
    for (c, gl) in grad_logits.iter().enumerate() {
        grads.classifier.bias[c] = *gl;
        if *gl == 0.0 {
            continue;
        }
        let gw = grads.classifier.weight.row_mut(c);
        for (g, x) in gw.iter_mut().zip(&tape.aggregate) {
            *g = gl * x;
        }
        for (ga, w) in grad_agg.iter_mut().zip(model.classifier.weight.row(c)) {
            *ga += gl * w;
        }
    }
    check(&grad_agg, "aggregate")?;

    // optional l2-normalization: y = e / max(‖e‖, floor)
    let grad_raw = if cfg.l2_normalize {
        let norm = libm::sqrt(tape.raw_aggregate.iter().map(|v| v * v).sum());
        if norm > NORM_FLOOR {
            let dot: f64 = tape.aggregate.iter().zip(&grad_agg).map(|(y, g)| y * g).sum();
            grad_agg.iter().zip(&tape.aggregate).map(|(g, y)| (g - y * dot) / norm).collect()
        } else {
            grad_agg.iter().map(|g| g / NORM_FLOOR).collect()
        }
    } else {
        grad_agg
    };
    check(&grad_raw, "raw_aggregate")?;

    let mut grad_features = Matrix::zeros(d, n);
    match &tape.aggregation {
        AggregationTape::Stats { weights, mean, variance, std } => {
            for k in 0..d {
                let g_mean = grad_raw[k];
                let g_var = if variance[k] > VARIANCE_FLOOR { grad_raw[d + k] / (2.0 * std[k]) } else { 0.0 };
                let row = tape.features.row(k);
                let out = grad_features.row_mut(k);
                for ((o, x), w) in out.iter_mut().zip(row).zip(weights) {
                    *o = w * g_mean + g_var * 2.0 * w * (x - mean[k]);
                }
            }
        }
        AggregationTape::Transport { weights, sinkhorn, .. } => {
            let reference = model.reference.as_ref().ok_or_else(|| Error::invalid("transport model without reference"))?;
            let nz = reference.size();
            let z = reference.points();
            let x = &tape.features;
            let plan = &sinkhorn.plan.entries;
            let factors = cfg.barycenter.column_factors(reference.intensities());
            let mut grad_z = Matrix::zeros(d, nz);

            // φ = X·P·diag(f) − Z
            let mut grad_plan = Matrix::zeros(n, nz);
            for k in 0..d {
                let gphi = &grad_raw[k * nz..(k + 1) * nz];
                for (gz, g) in grad_z.row_mut(k).iter_mut().zip(gphi) {
                    *gz -= g;
                }
                let xk = x.row(k);
                for i in 0..n {
                    let xki = xk[i];
                    let prow = plan.row(i);
                    let mut acc = 0.0;
                    for j in 0..nz {
                        let gf = gphi[j] * factors[j];
                        grad_plan[(i, j)] += gf * xki;
                        acc += gf * prow[j];
                    }
                    grad_features[(k, i)] += acc;
                }
            }
            check(grad_plan.as_slice(), "plan")?;

            let (grad_cost, grad_log_a) = sinkhorn_backward(sinkhorn, &grad_plan)?;
            check(grad_cost.as_slice(), "sinkhorn")?;

            // C_ij = ‖x_i − z_j‖²
            for i in 0..n {
                for j in 0..nz {
                    let gc = grad_cost[(i, j)];
                    if gc == 0.0 {
                        continue;
                    }
                    for k in 0..d {
                        let diff = 2.0 * gc * (x[(k, i)] - z[(k, j)]);
                        grad_features[(k, i)] += diff;
                        grad_z[(k, j)] -= diff;
                    }
                }
            }
            check(grad_z.as_slice(), "cost")?;

            if let (Some(u), Some(grad_att)) = (reference.attention_element(), grads.attention_element.as_mut()) {
                if cfg.aggregator.uses_attention() {
                    // log a = Xᵀu − LSE(Xᵀu)
                    let total: f64 = grad_log_a.iter().sum();
                    for i in 0..n {
                        let gs = grad_log_a[i] - weights[i] * total;
                        for k in 0..d {
                            grad_att[k] += gs * x[(k, i)];
                            grad_features[(k, i)] += gs * u[k];
                        }
                    }
                    check(grad_att, "attention")?;
                }
            }
            grads.reference_points = Some(grad_z);
        }
    }
    check(grad_features.as_slice(), "features")?;

    // lifter: f = W2·relu(w1 x + b1) + b2
    let lifter = &model.lifter;
    let gl = &mut grads.lifter;
    for k in 0..d {
        let gf = grad_features.row(k);
        gl.b2[k] = gf.iter().sum();
        let gw2 = gl.w2.row_mut(k);
        for j in 0..h {
            gw2[j] = gf.iter().zip(tape.hidden.row(j)).map(|(g, hj)| g * hj).sum();
        }
    }
    for j in 0..h {
        let pre = tape.pre_activation.row(j);
        let (mut gw1, mut gb1) = (0.0, 0.0);
        for i in 0..n {
            if pre[i] <= 0.0 {
                continue;
            }
            let gh: f64 = (0..d).map(|k| lifter.w2[(k, j)] * grad_features[(k, i)]).sum();
            gw1 += gh * tape.input[i];
            gb1 += gh;
        }
        gl.w1[j] = gw1;
        gl.b1[j] = gb1;
    }
    if !grads.is_finite() {
        return Err(Error::NonFinite { node: "lifter" });
    }
    Ok(grads)
}
