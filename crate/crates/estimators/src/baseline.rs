//! Plug-in point for external MI estimators (kNN, neural, ...).
//!
//! No implementation ships here; the comparison harness renders a
//! baseline's column only when one is supplied.

use infoplane_core::{Matrix, Real, Result};

/// An external estimator of I(X;Z) from a batch of pre-noise
/// representations and their noisy realizations (same row layout as
/// [`mi_binning`]: masks for input j occupy rows `j·masks ..
/// (j+1)·masks` of `noisy_samples`).
///
/// [`mi_binning`]: crate::binning::mi_binning
pub trait MiBaseline<S: Real> {
    /// Name used for table columns and manifests.
    fn name(&self) -> &str;

    /// Estimate of I(X;Z) in nats.
    fn estimate(&self, pre_noise: &Matrix<S>, noisy_samples: &Matrix<S>) -> Result<S>;
}
