//! Trainable toy classifier for sets of scalar observations.
//!
//! Every observation is lifted to a `d`-vector by a two-layer perceptron, the
//! set of lifted vectors is pooled by statistics pooling or by the
//! transport-oriented embedding, and an affine map produces class logits.
//! Gradients are computed in reverse mode by hand, including through every
//! step of the unrolled Sinkhorn iteration.

mod backward;
mod forward;
mod model;
mod optim;
mod train;

pub use backward::{backward, backward_from_logits};
pub use forward::{cross_entropy, forward, loss, predict, AggregationTape, GradientTape};
pub use model::{Affine, AggregatorKind, Lifter, ToyGradients, ToyModel, ToyModelConfig};
pub use optim::{Optimizer, OptimizerKind};
pub use train::{evaluate, evaluate_by, evaluate_with, train, train_with, TrainConfig};
