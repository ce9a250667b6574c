use alloc::vec;
use alloc::vec::Vec;

use super::model::{ToyGradients, ToyModel};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "kebab-case"))]
pub enum OptimizerKind {
    /// Adaptive moments with β = (0.9, 0.999) and ε = 1e-8.
    #[default]
    Adam,
    Sgd,
}

/// First-order optimizer state for one model.
#[derive(Debug, Clone)]
pub struct Optimizer {
    kind: OptimizerKind,
    learning_rate: f64,
    step: u64,
    first: Vec<Vec<f64>>,
    second: Vec<Vec<f64>>,
}

const BETA1: f64 = 0.9;
const BETA2: f64 = 0.999;
const ADAM_EPS: f64 = 1e-8;

impl Optimizer {
    pub fn new(kind: OptimizerKind, learning_rate: f64, model: &ToyModel) -> Self {
        let shapes: Vec<Vec<f64>> = model.tensors().iter().map(|(_, t)| vec![0.0; t.len()]).collect();
        Self { kind, learning_rate, step: 0, first: shapes.clone(), second: shapes }
    }

    /// Applies one update with (already batch-averaged) gradients.
    pub fn step(&mut self, model: &mut ToyModel, grads: &ToyGradients) {
        self.step += 1;
        let lr = self.learning_rate;
        let t = self.step as i32;
        let bias1 = 1.0 - libm::pow(BETA1, f64::from(t));
        let bias2 = 1.0 - libm::pow(BETA2, f64::from(t));
        let params = model.tensors_mut();
        let grads = grads.tensors();
        for (idx, ((_, p), (_, g))) in params.into_iter().zip(grads).enumerate() {
            match self.kind {
                OptimizerKind::Sgd => p.iter_mut().zip(g).for_each(|(p, g)| *p -= lr * g),
                OptimizerKind::Adam => {
                    let m = &mut self.first[idx];
                    let v = &mut self.second[idx];
                    for i in 0..p.len() {
                        m[i] = BETA1 * m[i] + (1.0 - BETA1) * g[i];
                        v[i] = BETA2 * v[i] + (1.0 - BETA2) * g[i] * g[i];
                        let m_hat = m[i] / bias1;
                        let v_hat = v[i] / bias2;
                        p[i] -= lr * m_hat / (libm::sqrt(v_hat) + ADAM_EPS);
                    }
                }
            }
        }
    }
}
