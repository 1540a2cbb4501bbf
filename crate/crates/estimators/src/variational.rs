//! Variational lower bound on the label information I(Y;Z).

use infoplane_core::{kahan_sum, Error, Real, Result};

/// Plug-in label entropy H(Y) = −Σ p ln p in nats, with 0·ln 0 = 0.
pub fn label_entropy<S: Real>(label_distribution: &[S]) -> Result<S> {
    if label_distribution.is_empty() {
        return Err(Error::EmptyInput("label distribution"));
    }
    for &p in label_distribution {
        if !(p.is_finite() && p >= S::zero()) {
            return Err(Error::Domain {
                what: "label probability",
                requirement: "finite and non-negative",
                got: p.as_f64(),
            });
        }
    }
    let total = kahan_sum(label_distribution.iter().copied());
    if (total - S::one()).abs() > S::of(1e-9) {
        return Err(Error::Domain {
            what: "label distribution sum",
            requirement: "1 within 1e-9",
            got: total.as_f64(),
        });
    }
    Ok(-kahan_sum(label_distribution.iter().map(|&p| {
        if p == S::zero() {
            S::zero()
        } else {
            p * p.ln()
        }
    })))
}

/// Lower bound on I(Y;Z) in nats from a classifier's cross-entropy
/// loss: max(0, H(Y) − ℓ_ce). A chance-level model (ℓ_ce = H(Y)) bounds
/// nothing; a perfect model recovers the full label entropy.
pub fn mi_labels_variational<S: Real>(
    cross_entropy_loss: S,
    label_distribution: &[S],
) -> Result<S> {
    if !(cross_entropy_loss.is_finite() && cross_entropy_loss >= S::zero()) {
        return Err(Error::Domain {
            what: "cross-entropy loss",
            requirement: "finite and non-negative",
            got: cross_entropy_loss.as_f64(),
        });
    }
    let h_y = label_entropy(label_distribution)?;
    Ok((h_y - cross_entropy_loss).max(S::zero()))
}
