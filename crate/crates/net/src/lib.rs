//! A minimal from-scratch feed-forward network with multiplicative-noise
//! layers (Gaussian dropout and information dropout), manual
//! backpropagation, SGD with momentum, cross-entropy loss, and
//! MC-dropout inference — enough to generate hidden representations for
//! information-plane analysis at desk scale.
//!
//! The first noise layer of a network is its probe layer: every forward
//! pass exposes that layer's pre-noise activations f(x), its noisy output
//! z = f(x) ∘ D, and (for information dropout) the learned α(x).
//! Everything random is drawn from seed-derived streams, so training and
//! probing are exactly reproducible.

pub mod checkpoint;
pub mod diagnostics;
pub mod layer;
pub mod loss;
pub mod network;
pub mod train;

pub use checkpoint::{load_checkpoint, save_checkpoint, CheckpointError, CHECKPOINT_VERSION};
pub use diagnostics::{finite_difference_check, FdFailure, FdReport};
pub use layer::{Activation, DenseParams, LayerSpec};
pub use loss::{accuracy, cross_entropy_loss, softmax_cross_entropy};
pub use network::{ForwardMode, ForwardOutput, Gradients, LossBreakdown, Network};
pub use train::{evaluate, train, EpochStats, ProbeEvent, SampleBatch, TrainConfig, TrainRecord};

pub use infoplane_core::{Error, Result};

/// `f32` network for the throughput-sensitive training path.
pub type Network32 = Network<f32>;
/// `f64` network for precision-sensitive checks.
pub type Network64 = Network<f64>;

#[cfg(test)]
mod gradcheck;
