//! Closed-form conditional entropy under Gaussian dropout.

use infoplane_core::{Error, KahanSum, Matrix, Real, Result, ZERO_FLOOR};

/// Result of [`conditional_entropy_gaussian_dropout`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConditionalEntropy<S> {
    /// h(Z|X) in nats, averaged over the sample batch.
    pub nats: S,
    /// (sample, dimension) pairs excluded by the zero floor.
    pub excluded_pairs: usize,
    /// Number of input samples |S|.
    pub sample_count: usize,
    /// Representation dimensionality N.
    pub dim: usize,
}

impl<S: Real> ConditionalEntropy<S> {
    /// Average number of dimensions per sample that survived the zero
    /// floor; the slope of `nats` with respect to ln σ.
    pub fn effective_dim(&self) -> f64 {
        let included = self.sample_count * self.dim - self.excluded_pairs;
        included as f64 / self.sample_count as f64
    }
}

/// h(Z|X) for Z = f(X) ∘ D, D ~ N(1, σ²), from the closed form
/// Σᵢ (1/|S|) Σⱼ ln(|f(x⁽ʲ⁾)ᵢ|·σ·√(2πe)).
///
/// Conditioned on X = x, each coordinate Zᵢ is Gaussian with standard
/// deviation |f(x)ᵢ|·σ, so its entropy is available exactly. Components
/// with |f(x)ᵢ| below [`ZERO_FLOOR`] carry no noise scale and are
/// excluded from the sum (the average still divides by |S|), mirroring
/// the decomposition into the non-zero sub-vector that keeps the mutual
/// information finite.
pub fn conditional_entropy_gaussian_dropout<S: Real>(
    pre_noise: &Matrix<S>,
    sigma: S,
) -> Result<ConditionalEntropy<S>> {
    if !(sigma > S::zero()) || !sigma.is_finite() {
        return Err(Error::Domain {
            what: "dropout sigma",
            requirement: "strictly positive and finite",
            got: sigma.as_f64(),
        });
    }
    if pre_noise.rows() == 0 || pre_noise.cols() == 0 {
        return Err(Error::EmptyInput("pre-noise representations"));
    }
    if !pre_noise.is_finite() {
        return Err(Error::NonFinite("pre-noise representations"));
    }

    let floor = S::of(ZERO_FLOOR);
    // ln(|f|·σ·√(2πe)) = ln|f| + ln σ + ½ln(2πe)
    let per_term = sigma.ln()
        + S::of(0.5 * (2.0 * std::f64::consts::PI * std::f64::consts::E).ln());
    let mut acc = KahanSum::new();
    let mut excluded = 0usize;
    for row in pre_noise.iter_rows() {
        for &v in row {
            let a = v.abs();
            if a < floor {
                excluded += 1;
            } else {
                acc.add(a.ln() + per_term);
            }
        }
    }
    let total = pre_noise.rows() * pre_noise.cols();
    if excluded == total {
        return Err(Error::Degenerate(format!(
            "all {total} (sample, dimension) pairs fell below the zero floor {ZERO_FLOOR:e}"
        )));
    }
    Ok(ConditionalEntropy {
        nats: acc.value() / S::of(pre_noise.rows() as f64),
        excluded_pairs: excluded,
        sample_count: pre_noise.rows(),
        dim: pre_noise.cols(),
    })
}
