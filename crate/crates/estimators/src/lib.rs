//! Mutual-information and entropy estimators for representations with
//! multiplicative noise, all in nats.
//!
//! The centerpiece estimates I(X;Z) for Z = f(X) ∘ D with Gaussian
//! dropout D ~ N(1, σ²): the marginal density of Z is approximated by a
//! uniform mixture of diagonal Gaussians centered at pre-noise
//! representations, h(Z) by Monte Carlo over noisy samples, and h(Z|X)
//! by its closed form. Around it sit the Gaussian upper bound on h(Z),
//! a histogram (binning) baseline, the variational lower bound on
//! I(Y;Z), and closed-form information-dropout KL terms.
//!
//! Estimators are pure functions of their inputs plus an explicit
//! [`StreamRng`](infoplane_core::StreamRng); every reduction runs in a
//! caller-fixed order with compensated summation, so repeated runs are
//! reproducible bit-for-bit.

pub mod baseline;
pub mod binning;
pub mod conditional;
pub mod info_dropout;
pub mod mi;
pub mod mixture;
pub mod variational;

pub use baseline::MiBaseline;
pub use binning::{mi_binning, mi_labels_binning, BinningConfig, BinningMode};
pub use conditional::{conditional_entropy_gaussian_dropout, ConditionalEntropy};
pub use info_dropout::{info_dropout_kl_relu, info_dropout_kl_softplus, InfoDropoutKl, Prior};
pub use mi::{
    draw_noisy_samples, marginal_entropy_mc, mi_gaussian_dropout,
    mi_gaussian_dropout_with_samples, EstimatorMetadata, MarginalEntropy, MiEstimate,
};
pub use mixture::{build_mixture, mixture_log_density, GaussianMixture};
pub use variational::{label_entropy, mi_labels_variational};

// The numerical crates share one error type.
pub use infoplane_core::{Error, Result};

/// Default noise masks drawn per input when assembling noisy samples.
pub const DEFAULT_MASKS_PER_INPUT: usize = 10;

/// Default cap on mixture components; the mixture uses
/// `min(sample_count, cap)` components chosen by a seeded shuffle.
pub const DEFAULT_MAX_COMPONENTS: usize = 2000;

/// `f64` aliases for estimator-precision work.
pub type GaussianMixture64 = GaussianMixture<f64>;
pub type MiEstimate64 = MiEstimate<f64>;
pub type InfoDropoutKl64 = InfoDropoutKl<f64>;
/// `f32` aliases for use directly on training-path activations.
pub type GaussianMixture32 = GaussianMixture<f32>;
pub type MiEstimate32 = MiEstimate<f32>;
pub type InfoDropoutKl32 = InfoDropoutKl<f32>;
