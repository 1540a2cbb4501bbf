//! Deterministic numerical primitives shared by the estimator, network,
//! and harness crates: seedable random streams, numerically stable
//! reductions, sampling for the supported multiplicative-noise families,
//! sample covariance, and closed-form Gaussian entropies.
//!
//! Everything is generic over the scalar type through [`Real`] (`f32` or
//! `f64`). Estimation work that is compared against quadrature oracles
//! runs in `f64`; the training loops prefer `f32` for memory-bandwidth
//! reasons. All entropies are in nats.

pub mod error;
pub mod matrix;
pub mod rng;
pub mod sampling;
pub mod scalar;
pub mod stats;

pub use error::{Error, Result};
pub use matrix::Matrix;
pub use rng::StreamRng;
pub use sampling::{sample_bernoulli, sample_gaussian, sample_lognormal, uniform_unit, NoiseSpec};
pub use scalar::Real;
pub use stats::{
    gaussian_entropy, kahan_sum, log_sum_exp, mean_and_standard_error, sample_covariance,
    CovarianceMatrix, DiagGaussian, GaussianEntropy, KahanSum,
};

/// `f64` matrix alias for estimator-precision work.
pub type Matrix64 = Matrix<f64>;
/// `f32` matrix alias for the training path.
pub type Matrix32 = Matrix<f32>;
/// `f64` diagonal Gaussian.
pub type DiagGaussian64 = DiagGaussian<f64>;
/// `f32` diagonal Gaussian.
pub type DiagGaussian32 = DiagGaussian<f32>;
/// `f64` covariance matrix.
pub type CovarianceMatrix64 = CovarianceMatrix<f64>;
/// `f32` covariance matrix.
pub type CovarianceMatrix32 = CovarianceMatrix<f32>;

/// Pre-noise activation magnitudes below this absolute value are treated
/// as exact zeros: the corresponding (sample, dimension) pairs are
/// excluded from conditional entropies and floored in mixture widths,
/// mirroring the non-zero sub-vector decomposition used to keep the
/// mutual information finite.
pub const ZERO_FLOOR: f64 = 1e-8;

/// A Cholesky pivot below this value times the largest pivot marks the
/// covariance as numerically singular, switching the Gaussian entropy to
/// its Hadamard (diagonal-product) relaxation.
pub const SINGULARITY_RATIO: f64 = 1e-12;
