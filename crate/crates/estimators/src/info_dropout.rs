//! Closed-form per-sample KL terms for information dropout, whose batch
//! mean estimates I(X;Z) for log-normal multiplicative noise.

use serde::{Deserialize, Serialize};

use infoplane_core::{kahan_sum, Error, Real, Result};

/// Marginal prior the per-sample posteriors are measured against.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Prior {
    /// Log-normal prior on softplus activations: ln z ~ N(mu, sigma²).
    SoftplusLognormal { mu: f64, sigma: f64 },
    /// Scaled log-uniform prior on ReLU activations with an atom of
    /// mass 1−q at zero; `log_c` is the log normalizing constant.
    ReluLoguniform { log_c: f64, q: f64 },
}

/// Per-sample KL(p(z|x⁽ʲ⁾) ‖ p(z)) values for one layer and batch.
///
/// With the softplus/log-normal prior at its defaults (mu = 0,
/// sigma = 1) every value is ≥ 0 with equality at α = 1; the ReLU
/// log-uniform prior is improper, so those values may be negative.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InfoDropoutKl<S> {
    pub values: Vec<S>,
    pub prior: Prior,
}

impl<S: Real> InfoDropoutKl<S> {
    /// Batch-mean KL — the I(X;Z) estimate this layer contributes.
    pub fn mean(&self) -> S {
        kahan_sum(self.values.iter().copied()) / S::of(self.values.len() as f64)
    }
}

/// KL for a softplus activation under a log-normal prior N(mu, sigma²)
/// on ln z, for noise ln D ~ N(0, α²(x)):
///
///   KL = (α² + mu²)/(2 sigma²) − ln(α)/sigma − ½
///
/// At the default prior (mu = 0, sigma = 1) this is α²/2 − ln α − ½,
/// minimized to 0 at α = 1.
pub fn info_dropout_kl_softplus<S: Real>(
    alpha: &[S],
    prior_mu: S,
    prior_sigma: S,
) -> Result<InfoDropoutKl<S>> {
    if alpha.is_empty() {
        return Err(Error::EmptyInput("alpha"));
    }
    if !(prior_sigma.is_finite() && prior_sigma > S::zero()) {
        return Err(Error::Domain {
            what: "prior sigma",
            requirement: "positive and finite",
            got: prior_sigma.as_f64(),
        });
    }
    if !prior_mu.is_finite() {
        return Err(Error::NonFinite("prior mu"));
    }
    let half = S::of(0.5);
    let inv_two_sigma_sq = (S::of(2.0) * prior_sigma * prior_sigma).recip();
    let mu_sq = prior_mu * prior_mu;
    let mut values = Vec::with_capacity(alpha.len());
    for &a in alpha {
        if !(a.is_finite() && a > S::zero()) {
            return Err(Error::Domain {
                what: "alpha",
                requirement: "positive and finite",
                got: a.as_f64(),
            });
        }
        values.push((a * a + mu_sq) * inv_two_sigma_sq - a.ln() / prior_sigma - half);
    }
    Ok(InfoDropoutKl {
        values,
        prior: Prior::SoftplusLognormal {
            mu: prior_mu.as_f64(),
            sigma: prior_sigma.as_f64(),
        },
    })
}

/// KL for a ReLU activation under the scaled log-uniform prior with an
/// atom of mass 1−q at zero. Where the activation is exactly zero
/// (`zero_mask` true) the posterior collapses onto the atom and the KL
/// is −ln q; elsewhere it is −(ln α + ½ ln(2πe)) − log_c.
pub fn info_dropout_kl_relu<S: Real>(
    alpha: &[S],
    log_c: S,
    q: S,
    zero_mask: &[bool],
) -> Result<InfoDropoutKl<S>> {
    if alpha.is_empty() {
        return Err(Error::EmptyInput("alpha"));
    }
    if zero_mask.len() != alpha.len() {
        return Err(Error::LengthMismatch {
            what: "zero mask",
            expected: alpha.len(),
            got: zero_mask.len(),
        });
    }
    if !(q > S::zero() && q < S::one()) {
        return Err(Error::Domain {
            what: "q",
            requirement: "strictly inside (0, 1)",
            got: q.as_f64(),
        });
    }
    if !log_c.is_finite() {
        return Err(Error::NonFinite("log_c"));
    }
    let half_ln_2pi_e = S::of(1.4189385332046727);
    let neg_ln_q = -q.ln();
    let mut values = Vec::with_capacity(alpha.len());
    for (&a, &zero) in alpha.iter().zip(zero_mask) {
        if zero {
            values.push(neg_ln_q);
            continue;
        }
        if !(a.is_finite() && a > S::zero()) {
            return Err(Error::Domain {
                what: "alpha",
                requirement: "positive and finite where the activation is non-zero",
                got: a.as_f64(),
            });
        }
        values.push(-(a.ln() + half_ln_2pi_e) - log_c);
    }
    Ok(InfoDropoutKl {
        values,
        prior: Prior::ReluLoguniform {
            log_c: log_c.as_f64(),
            q: q.as_f64(),
        },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn unit_alpha_is_the_softplus_minimizer() {
        let kl = info_dropout_kl_softplus(&[1.0f64], 0.0, 1.0).unwrap();
        assert_abs_diff_eq!(kl.values[0], 0.0, epsilon = 1e-12);
        assert_eq!(
            kl.prior,
            Prior::SoftplusLognormal { mu: 0.0, sigma: 1.0 }
        );
    }

    #[test]
    fn half_alpha_softplus_value_is_frozen() {
        // 0.5²/2 − ln 0.5 − ½ = 0.125 + ln 2 − 0.5
        let kl = info_dropout_kl_softplus(&[0.5f64], 0.0, 1.0).unwrap();
        assert_abs_diff_eq!(kl.values[0], 0.3181471805599453, epsilon = 1e-15);
    }

    #[test]
    fn vanishing_alpha_blows_up_monotonically() {
        let alphas = [1e-1f64, 1e-3, 1e-6, 1e-9];
        let kl = info_dropout_kl_softplus(&alphas, 0.0, 1.0).unwrap();
        for w in kl.values.windows(2) {
            assert!(w[1] > w[0]);
        }
        assert!(kl.values[3] > 20.0);
    }

    #[test]
    fn softplus_values_stay_non_negative_under_the_default_prior() {
        let alphas: Vec<f64> = (1..200).map(|i| i as f64 * 0.05).collect();
        let kl = info_dropout_kl_softplus(&alphas, 0.0, 1.0).unwrap();
        assert!(kl.values.iter().all(|&v| v >= 0.0));
        // ... and are convex in ln α around the α = 1 minimum.
        let probe = info_dropout_kl_softplus(&[0.9f64, 1.0, 1.1], 0.0, 1.0).unwrap();
        assert!(probe.values[0] > 0.0 && probe.values[2] > 0.0);
    }

    #[test]
    fn mean_aggregates_the_batch() {
        let kl = info_dropout_kl_softplus(&[0.5f64, 1.0], 0.0, 1.0).unwrap();
        assert_abs_diff_eq!(kl.mean(), 0.3181471805599453 / 2.0, epsilon = 1e-15);
    }

    #[test]
    fn masked_relu_units_pay_the_atom_cost() {
        let kl = info_dropout_kl_relu(&[1.0f64, 1.0], 0.0, 0.5, &[true, true]).unwrap();
        for &v in &kl.values {
            assert_abs_diff_eq!(v, 2f64.ln(), epsilon = 1e-15);
        }
    }

    #[test]
    fn relu_values_are_frozen_at_reference_alphas() {
        let kl = info_dropout_kl_relu(
            &[1.0f64, (-1.0f64).exp()],
            0.0,
            0.9,
            &[false, false],
        )
        .unwrap();
        assert_abs_diff_eq!(kl.values[0], -1.4189385332046727, epsilon = 1e-12);
        assert_abs_diff_eq!(kl.values[1], -0.41893853320467267, epsilon = 1e-12);
        assert_eq!(kl.prior, Prior::ReluLoguniform { log_c: 0.0, q: 0.9 });
    }

    #[test]
    fn masked_entries_may_carry_arbitrary_alpha() {
        let kl = info_dropout_kl_relu(&[-5.0f64, 1.0], 0.1, 0.5, &[true, false]).unwrap();
        assert_abs_diff_eq!(kl.values[0], 2f64.ln(), epsilon = 1e-15);
        assert_abs_diff_eq!(kl.values[1], -1.4189385332046727 - 0.1, epsilon = 1e-12);
    }

    #[test]
    fn rejects_bad_arguments() {
        assert!(matches!(
            info_dropout_kl_softplus(&[0.0f64], 0.0, 1.0),
            Err(Error::Domain { .. })
        ));
        assert!(matches!(
            info_dropout_kl_softplus(&[1.0f64], 0.0, 0.0),
            Err(Error::Domain { .. })
        ));
        assert!(matches!(
            info_dropout_kl_softplus(&[][..], 0.0f64, 1.0),
            Err(Error::EmptyInput(_))
        ));
        assert!(matches!(
            info_dropout_kl_relu(&[1.0f64], 0.0, 1.0, &[false]),
            Err(Error::Domain { .. })
        ));
        assert!(matches!(
            info_dropout_kl_relu(&[1.0f64], 0.0, 0.0, &[false]),
            Err(Error::Domain { .. })
        ));
        assert!(matches!(
            info_dropout_kl_relu(&[-1.0f64], 0.0, 0.5, &[false]),
            Err(Error::Domain { .. })
        ));
        assert!(matches!(
            info_dropout_kl_relu(&[1.0f64], 0.0, 0.5, &[false, true]),
            Err(Error::LengthMismatch { .. })
        ));
    }
}
