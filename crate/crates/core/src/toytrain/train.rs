use alloc::format;
use alloc::vec::Vec;

use super::backward::backward;
use super::forward::{cross_entropy, forward, predict};
use super::model::{ToyGradients, ToyModel};
use super::optim::{Optimizer, OptimizerKind};
use crate::datagen::{seeded_stream, ToyDataset};
use crate::exec::{Executor, Sequential};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    /// Seeds the per-epoch shuffling.
    pub seed: u64,
    pub optimizer: OptimizerKind,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self { epochs: 20, batch_size: 32, learning_rate: 1e-3, seed: 0, optimizer: OptimizerKind::Adam }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 || self.batch_size == 0 {
            return Err(Error::invalid("epochs and batch_size must be at least 1"));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::invalid("learning_rate must be positive"));
        }
        Ok(())
    }
}

fn to_f64(sample: &[f32]) -> Vec<f64> {
    sample.iter().map(|&x| f64::from(x)).collect()
}

/// Mini-batch training; returns the trained model and the mean training
/// loss of every epoch.
pub fn train(dataset: &ToyDataset, model: ToyModel, config: &TrainConfig) -> Result<(ToyModel, Vec<f64>)> {
    train_with(&Sequential, dataset, model, config, |_, _| {})
}

/// As [`train`], computing per-sample gradients through `executor` and
/// calling `on_epoch(epoch, mean_loss)` after each epoch. Per-sample
/// gradients are summed in sample order, so the result does not depend on
/// the executor.
pub fn train_with<E: Executor>(
    executor: &E,
    dataset: &ToyDataset,
    mut model: ToyModel,
    config: &TrainConfig,
    mut on_epoch: impl FnMut(usize, f64),
) -> Result<(ToyModel, Vec<f64>)> {
    config.validate()?;
    model.validate()?;
    if dataset.n_classes() != model.config.n_classes {
        return Err(Error::invalid(format!(
            "dataset has {} classes, model predicts {}",
            dataset.n_classes(),
            model.config.n_classes
        )));
    }
    let per_class = dataset.shape.train_per_class;
    let total = dataset.train_len();
    let mut order: Vec<usize> = (0..total).collect();
    let mut rng = seeded_stream(config.seed, 0);
    let mut optimizer = Optimizer::new(config.optimizer, config.learning_rate, &model);
    let mut trace = Vec::with_capacity(config.epochs);

    for epoch in 0..config.epochs {
        // Fisher-Yates
        for i in (1..total).rev() {
            let j = (rand_core::RngCore::next_u64(&mut rng) % (i as u64 + 1)) as usize;
            order.swap(i, j);
        }
        let mut epoch_loss = 0.0;
        for batch in order.chunks(config.batch_size) {
            let current = &model;
            let results = executor.map(batch.len(), |b| -> Result<(f64, ToyGradients)> {
                let idx = batch[b];
                let (class, sample) = (idx / per_class, idx % per_class);
                let x = to_f64(dataset.train_sample(class, sample));
                let (logits, tape) = forward(current, &x)?;
                let (value, _) = cross_entropy(&logits, class)?;
                Ok((value, backward(current, &tape, class)?))
            });
            let mut sum = ToyGradients::zeros_like(&model);
            for r in results {
                let (value, grads) = r?;
                epoch_loss += value;
                sum.add_assign(&grads);
            }
            sum.scale(1.0 / batch.len() as f64);
            optimizer.step(&mut model, &sum);
        }
        let mean = epoch_loss / total as f64;
        on_epoch(epoch, mean);
        trace.push(mean);
    }
    Ok((model, trace))
}

/// Fraction of test samples classified correctly.
pub fn evaluate(model: &ToyModel, dataset: &ToyDataset) -> Result<f64> {
    evaluate_with(&Sequential, model, dataset)
}

pub fn evaluate_with<E: Executor>(executor: &E, model: &ToyModel, dataset: &ToyDataset) -> Result<f64> {
    if dataset.n_classes() != model.config.n_classes {
        return Err(Error::invalid("dataset and model disagree on the class count"));
    }
    evaluate_by(executor, dataset, |sample| forward(model, &to_f64(sample)).map(|(logits, _)| logits))
}

/// Accuracy of an arbitrary logit function over the test split.
pub fn evaluate_by<E, F>(executor: &E, dataset: &ToyDataset, logits_of: F) -> Result<f64>
where
    E: Executor,
    F: Fn(&[f32]) -> Result<Vec<f64>> + Sync + Send,
{
    let per_class = dataset.shape.test_per_class;
    let total = dataset.test_len();
    let hits = executor.map(total, |idx| -> Result<bool> {
        let class = idx / per_class;
        let logits = logits_of(dataset.test_sample(class, idx % per_class))?;
        Ok(predict(&logits) == class)
    });
    let mut correct = 0usize;
    for h in hits {
        correct += usize::from(h?);
    }
    Ok(correct as f64 / total as f64)
}
