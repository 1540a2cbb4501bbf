//! Assembled mutual-information estimate I(X;Z) = h(Z) − h(Z|X).

use serde::{Deserialize, Serialize};

use infoplane_core::rng::RNG_ALGORITHM;
use infoplane_core::{
    gaussian_entropy, mean_and_standard_error, sample_covariance, Error, Matrix, Real, Result,
    StreamRng, ZERO_FLOOR,
};

use crate::conditional::conditional_entropy_gaussian_dropout;
use crate::mixture::{build_mixture, GaussianMixture};

/// Derivation tags for the sub-streams consumed by
/// [`mi_gaussian_dropout`]; fixed constants so an estimate depends only
/// on the `(seed, stream)` handed in, never on draw position.
const TAG_COMPONENT_SHUFFLE: u64 = 1;
const TAG_NOISE_MASKS: u64 = 2;

/// Monte-Carlo estimate of the marginal entropy h(Z).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MarginalEntropy<S> {
    /// −(1/M) Σ log q(z⁽ʲᵐ⁾) over the noisy samples, in nats.
    pub nats: S,
    /// Standard error of that Monte-Carlo mean.
    pub std_error: S,
}

/// h(Z) ≈ −(1/M) Σ log q(z) with q the mixture density, evaluated over
/// `noisy_samples` (one row per noisy realization).
pub fn marginal_entropy_mc<S: Real>(
    gmm: &GaussianMixture<S>,
    noisy_samples: &Matrix<S>,
) -> Result<MarginalEntropy<S>> {
    if noisy_samples.rows() == 0 {
        return Err(Error::EmptyInput("noisy samples"));
    }
    if noisy_samples.cols() != gmm.dim() {
        return Err(Error::ShapeMismatch {
            what: "noisy samples",
            expected_rows: noisy_samples.rows(),
            expected_cols: gmm.dim(),
            got_rows: noisy_samples.rows(),
            got_cols: noisy_samples.cols(),
        });
    }
    let mut scratch = vec![S::zero(); gmm.components()];
    let mut neg_log_q = Vec::with_capacity(noisy_samples.rows());
    for z in noisy_samples.iter_rows() {
        neg_log_q.push(-gmm.log_density_with_scratch(z, &mut scratch)?);
    }
    let (nats, std_error) = mean_and_standard_error(&neg_log_q)?;
    Ok(MarginalEntropy { nats, std_error })
}

/// Estimator provenance recorded with every estimate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimatorMetadata {
    /// Estimator family name.
    pub estimator: String,
    /// Scalar precision the estimate ran in ("f32"/"f64").
    pub scalar: String,
    /// RNG algorithm backing the streams.
    pub rng_algorithm: String,
    /// Seed and stream of the RNG handed to the estimator.
    pub seed: u64,
    pub stream: u64,
    /// Dropout noise scale σ.
    pub sigma: f64,
    /// Noise masks drawn per input.
    pub masks_per_input: usize,
    /// Requested component cap and the count actually used.
    pub max_components: usize,
    pub components_used: usize,
    /// Zero floor applied to pre-noise magnitudes.
    pub zero_floor: f64,
    /// (sample, dimension) pairs excluded from h(Z|X) by the floor.
    pub excluded_pairs: usize,
    /// True when the upper bound fell back to the Hadamard relaxation.
    pub upper_bound_hadamard: bool,
}

/// A mutual-information estimate with its entropy decomposition.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MiEstimate<S> {
    /// I(X;Z) = h(Z) − h(Z|X), in nats.
    pub value: S,
    /// Monte-Carlo h(Z).
    pub h_z: S,
    /// Closed-form h(Z|X).
    pub h_z_given_x: S,
    /// Entropy of a Gaussian with the noisy samples' covariance; an
    /// upper bound on h(Z). Absent when fewer than two noisy samples.
    pub upper_bound: Option<S>,
    /// Monte-Carlo standard error of `h_z` (and hence of `value`, since
    /// h(Z|X) is deterministic given the batch).
    pub mc_standard_error: S,
    /// Number of noisy samples M = |S|·masks.
    pub sample_count: usize,
    pub noise_masks_per_input: usize,
    pub metadata: EstimatorMetadata,
}

/// Draws `masks_per_input` Gaussian-dropout realizations per input row:
/// row `j·masks + m` of the result is f(x⁽ʲ⁾) ∘ (1 + σ·ε), ε ~ N(0,I).
pub fn draw_noisy_samples<S: Real>(
    pre_noise: &Matrix<S>,
    sigma: S,
    masks_per_input: usize,
    rng: &mut StreamRng,
) -> Result<Matrix<S>> {
    if masks_per_input == 0 {
        return Err(Error::Domain {
            what: "masks_per_input",
            requirement: "at least 1",
            got: 0.0,
        });
    }
    let n = pre_noise.cols();
    let mut noisy: Matrix<S> = Matrix::zeros(pre_noise.rows() * masks_per_input, n);
    for (j, f_row) in pre_noise.iter_rows().enumerate() {
        for m in 0..masks_per_input {
            let dst = noisy.row_mut(j * masks_per_input + m);
            for (d, &f) in dst.iter_mut().zip(f_row) {
                *d = f * (S::one() + sigma * S::standard_normal(rng));
            }
        }
    }
    Ok(noisy)
}

/// Full Gaussian-dropout MI estimate; also returns the noisy samples it
/// generated so callers (binning baseline, diagnostics) can reuse the
/// exact same realizations.
pub fn mi_gaussian_dropout_with_samples<S: Real>(
    pre_noise: &Matrix<S>,
    sigma: S,
    masks_per_input: usize,
    max_components: usize,
    rng: &StreamRng,
) -> Result<(MiEstimate<S>, Matrix<S>)> {
    if pre_noise.rows() == 0 || pre_noise.cols() == 0 {
        return Err(Error::EmptyInput("pre-noise representations"));
    }
    let mut shuffle_rng = rng.derive(TAG_COMPONENT_SHUFFLE);
    let mut noise_rng = rng.derive(TAG_NOISE_MASKS);

    let gmm = build_mixture(pre_noise, sigma, max_components, &mut shuffle_rng)?;
    let noisy = draw_noisy_samples(pre_noise, sigma, masks_per_input, &mut noise_rng)?;
    let marginal = marginal_entropy_mc(&gmm, &noisy)?;
    let conditional = conditional_entropy_gaussian_dropout(pre_noise, sigma)?;

    let (upper_bound, hadamard) = if noisy.rows() >= 2 {
        let cov = sample_covariance(&noisy)?;
        let ge = gaussian_entropy(&cov);
        (Some(ge.nats), ge.hadamard_relaxed)
    } else {
        (None, false)
    };

    let estimate = MiEstimate {
        value: marginal.nats - conditional.nats,
        h_z: marginal.nats,
        h_z_given_x: conditional.nats,
        upper_bound,
        mc_standard_error: marginal.std_error,
        sample_count: noisy.rows(),
        noise_masks_per_input: masks_per_input,
        metadata: EstimatorMetadata {
            estimator: "gmm-mc".to_string(),
            scalar: S::NAME.to_string(),
            rng_algorithm: RNG_ALGORITHM.to_string(),
            seed: rng.seed(),
            stream: rng.stream(),
            sigma: sigma.as_f64(),
            masks_per_input,
            max_components,
            components_used: gmm.components(),
            zero_floor: ZERO_FLOOR,
            excluded_pairs: conditional.excluded_pairs,
            upper_bound_hadamard: hadamard,
        },
    };
    Ok((estimate, noisy))
}

/// I(X;Z) for Z = f(X) ∘ D, D ~ N(1, σ²): mixture + Monte-Carlo h(Z),
/// closed-form h(Z|X), Gaussian upper bound from the sample covariance.
///
/// Consumes only streams derived from `rng`'s identity, so the estimate
/// is a pure function of (inputs, seed, stream).
pub fn mi_gaussian_dropout<S: Real>(
    pre_noise: &Matrix<S>,
    sigma: S,
    masks_per_input: usize,
    max_components: usize,
    rng: &StreamRng,
) -> Result<MiEstimate<S>> {
    mi_gaussian_dropout_with_samples(pre_noise, sigma, masks_per_input, max_components, rng)
        .map(|(estimate, _)| estimate)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn toy_batch(n_samples: usize, seed: u64) -> Matrix<f64> {
        let mut rng = StreamRng::new(seed, 0);
        let rows: Vec<Vec<f64>> = (0..n_samples)
            .map(|_| vec![2.0 * f64::standard_normal(&mut rng) + 0.5])
            .collect();
        Matrix::from_rows(&rows).unwrap()
    }

    #[test]
    fn single_sample_at_single_unit_mean_recovers_the_gaussian_peak() {
        // One noisy sample sitting exactly on a single component's mean
        // with unit std: −log φ(0;0,1) = ½ ln(2π).
        let gmm = build_mixture(
            &Matrix::from_rows(&[vec![1.0]]).unwrap(),
            1.0,
            1,
            &mut StreamRng::new(0, 0),
        )
        .unwrap();
        let noisy = Matrix::from_rows(&[vec![1.0]]).unwrap();
        let me = marginal_entropy_mc(&gmm, &noisy).unwrap();
        assert_abs_diff_eq!(me.nats, 0.9189385332046727, epsilon = 1e-12);
        assert_eq!(me.std_error, 0.0);
    }

    #[test]
    fn marginal_entropy_is_invariant_under_sample_order() {
        let pre = toy_batch(50, 3);
        let gmm = build_mixture(&pre, 0.1, 50, &mut StreamRng::new(0, 0)).unwrap();
        let noisy = draw_noisy_samples(&pre, 0.1, 4, &mut StreamRng::new(0, 1)).unwrap();
        let a = marginal_entropy_mc(&gmm, &noisy).unwrap();
        let mut reversed: Vec<Vec<f64>> = noisy.iter_rows().map(|r| r.to_vec()).collect();
        reversed.reverse();
        let b = marginal_entropy_mc(&gmm, &Matrix::from_rows(&reversed).unwrap()).unwrap();
        assert_abs_diff_eq!(a.nats, b.nats, epsilon = 1e-12);
    }

    #[test]
    fn estimate_decomposition_identity_holds_exactly() {
        let pre = toy_batch(200, 1);
        let est = mi_gaussian_dropout(&pre, 0.1, 4, 100, &StreamRng::new(5, 0)).unwrap();
        assert_eq!(est.value, est.h_z - est.h_z_given_x);
        assert_eq!(est.sample_count, 800);
        assert_eq!(est.noise_masks_per_input, 4);
        assert_eq!(est.metadata.components_used, 100);
        assert!(est.upper_bound.is_some());
    }

    #[test]
    fn constant_representation_carries_no_information() {
        // f(x) = c for every x: Z is independent of X, so the estimate
        // must vanish within Monte-Carlo tolerance.
        let pre = Matrix::from_vec(500, 1, vec![1.5f64; 500]).unwrap();
        let est = mi_gaussian_dropout(&pre, 0.2, 10, 200, &StreamRng::new(7, 0)).unwrap();
        let tol = 3.0 * est.mc_standard_error + 1e-9;
        assert!(
            est.value.abs() <= tol,
            "constant-representation MI {} exceeded {}",
            est.value,
            tol
        );
    }

    #[test]
    fn mc_entropy_respects_the_gaussian_upper_bound_on_the_toy_problem() {
        let pre = toy_batch(2000, 2);
        let est = mi_gaussian_dropout(&pre, 0.1, 10, 2000, &StreamRng::new(2, 0)).unwrap();
        let ub = est.upper_bound.unwrap();
        assert!(
            est.h_z <= ub + 3.0 * est.mc_standard_error,
            "h(Z) {} above upper bound {}",
            est.h_z,
            ub
        );
        // MI is non-negative within MC tolerance.
        assert!(est.value >= -3.0 * est.mc_standard_error);
    }

    #[test]
    fn identical_seed_and_stream_reproduce_the_estimate_bitwise() {
        let pre = toy_batch(300, 4);
        let a = mi_gaussian_dropout(&pre, 0.4, 3, 128, &StreamRng::new(9, 17)).unwrap();
        let b = mi_gaussian_dropout(&pre, 0.4, 3, 128, &StreamRng::new(9, 17)).unwrap();
        assert_eq!(a, b);
        // ... and the estimate ignores the parent stream's draw position.
        let mut drained = StreamRng::new(9, 17);
        for _ in 0..999 {
            rand::RngCore::next_u64(&mut drained);
        }
        let c = mi_gaussian_dropout(&pre, 0.4, 3, 128, &drained).unwrap();
        assert_eq!(a, c);
    }

    #[test]
    fn rejects_zero_masks_and_empty_input() {
        let pre = toy_batch(10, 0);
        assert!(matches!(
            mi_gaussian_dropout(&pre, 0.1, 0, 10, &StreamRng::new(0, 0)),
            Err(Error::Domain { .. })
        ));
        let empty = Matrix::<f64>::zeros(0, 0);
        assert!(matches!(
            mi_gaussian_dropout(&empty, 0.1, 1, 10, &StreamRng::new(0, 0)),
            Err(Error::EmptyInput(_))
        ));
    }

    #[test]
    fn marginal_entropy_rejects_dimension_mismatch() {
        let gmm = build_mixture(
            &Matrix::from_rows(&[vec![1.0, 2.0]]).unwrap(),
            1.0,
            1,
            &mut StreamRng::new(0, 0),
        )
        .unwrap();
        let bad = Matrix::from_rows(&[vec![1.0]]).unwrap();
        assert!(matches!(
            marginal_entropy_mc(&gmm, &bad),
            Err(Error::ShapeMismatch { .. })
        ));
    }
}
