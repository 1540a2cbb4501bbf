//! Sampling for the supported multiplicative-noise families.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::StreamRng;
use crate::scalar::Real;

/// One uniform draw in [0, 1) with 53 random mantissa bits — the
/// standard double-precision mapping.
#[inline]
pub fn uniform_unit(rng: &mut StreamRng) -> f64 {
    (rand::RngCore::next_u64(rng) >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

/// `count` i.i.d. draws from N(mean, std²).
pub fn sample_gaussian<S: Real>(
    rng: &mut StreamRng,
    mean: S,
    std: S,
    count: usize,
) -> Result<Vec<S>> {
    if !(std > S::zero()) || !std.is_finite() {
        return Err(Error::Domain {
            what: "gaussian std",
            requirement: "strictly positive and finite",
            got: std.as_f64(),
        });
    }
    if count == 0 {
        return Err(Error::Domain {
            what: "sample count",
            requirement: "at least 1",
            got: 0.0,
        });
    }
    Ok((0..count)
        .map(|_| mean + std * S::standard_normal(rng))
        .collect())
}

/// `count` i.i.d. draws of exp(log_std · N(0,1)): log-normal with log-mean
/// zero. All outputs are strictly positive.
pub fn sample_lognormal<S: Real>(rng: &mut StreamRng, log_std: S, count: usize) -> Result<Vec<S>> {
    if !(log_std > S::zero()) || !log_std.is_finite() {
        return Err(Error::Domain {
            what: "lognormal log_std",
            requirement: "strictly positive and finite",
            got: log_std.as_f64(),
        });
    }
    if count == 0 {
        return Err(Error::Domain {
            what: "sample count",
            requirement: "at least 1",
            got: 0.0,
        });
    }
    Ok((0..count)
        .map(|_| (log_std * S::standard_normal(rng)).exp())
        .collect())
}

/// `count` i.i.d. {0, 1} draws with P(1) = keep_prob. Diagnostic noise
/// only: multiplicative binary masks make the representation's mutual
/// information degenerate, so nothing downstream estimates under them.
pub fn sample_bernoulli<S: Real>(rng: &mut StreamRng, keep_prob: S, count: usize) -> Result<Vec<S>> {
    if !(keep_prob >= S::zero() && keep_prob <= S::one()) {
        return Err(Error::Domain {
            what: "bernoulli keep probability",
            requirement: "within [0, 1]",
            got: keep_prob.as_f64(),
        });
    }
    if count == 0 {
        return Err(Error::Domain {
            what: "sample count",
            requirement: "at least 1",
            got: 0.0,
        });
    }
    Ok((0..count)
        .map(|_| {
            let u = uniform_unit(rng);
            if S::of(u) < keep_prob {
                S::one()
            } else {
                S::zero()
            }
        })
        .collect())
}

/// Multiplicative-noise description for a dropout layer.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum NoiseSpec<S> {
    /// D ~ N(1, σ²), elementwise.
    Gaussian { sigma_sq: S },
    /// D = exp(α·N(0,1)) with fixed α² (the learnable, input-dependent α
    /// of information dropout lives in the network layer, not here).
    LogNormal { alpha_sq: S },
    /// D ∈ {0,1}, P(1) = keep_prob. Diagnostics only.
    Bernoulli { keep_prob: S },
}

impl<S: Real> NoiseSpec<S> {
    /// Validates the family parameter.
    pub fn validate(&self) -> Result<()> {
        match *self {
            NoiseSpec::Gaussian { sigma_sq } => {
                if !(sigma_sq > S::zero()) || !sigma_sq.is_finite() {
                    return Err(Error::Domain {
                        what: "gaussian noise sigma_sq",
                        requirement: "strictly positive and finite",
                        got: sigma_sq.as_f64(),
                    });
                }
            }
            NoiseSpec::LogNormal { alpha_sq } => {
                if !(alpha_sq > S::zero()) || !alpha_sq.is_finite() {
                    return Err(Error::Domain {
                        what: "lognormal noise alpha_sq",
                        requirement: "strictly positive and finite",
                        got: alpha_sq.as_f64(),
                    });
                }
            }
            NoiseSpec::Bernoulli { keep_prob } => {
                if !(keep_prob >= S::zero() && keep_prob <= S::one()) {
                    return Err(Error::Domain {
                        what: "bernoulli keep probability",
                        requirement: "within [0, 1]",
                        got: keep_prob.as_f64(),
                    });
                }
            }
        }
        Ok(())
    }

    /// Fills `out` with fresh multiplicative factors.
    pub fn fill_factors(&self, rng: &mut StreamRng, out: &mut [S]) -> Result<()> {
        self.validate()?;
        match *self {
            NoiseSpec::Gaussian { sigma_sq } => {
                let sigma = sigma_sq.sqrt();
                for v in out.iter_mut() {
                    *v = S::one() + sigma * S::standard_normal(rng);
                }
            }
            NoiseSpec::LogNormal { alpha_sq } => {
                let alpha = alpha_sq.sqrt();
                for v in out.iter_mut() {
                    *v = (alpha * S::standard_normal(rng)).exp();
                }
            }
            NoiseSpec::Bernoulli { keep_prob } => {
                let drawn = sample_bernoulli(rng, keep_prob, out.len().max(1))?;
                for (v, d) in out.iter_mut().zip(drawn) {
                    *v = d;
                }
            }
        }
        Ok(())
    }
}
