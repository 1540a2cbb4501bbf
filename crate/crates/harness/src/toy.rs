//! The affine-Gaussian toy study: estimator convergence over a grid of
//! sample counts with repeated seeded runs.

use serde::{Deserialize, Serialize};

use infoplane_core::{Error, Matrix, Real, Result, StreamRng};
use infoplane_estimators::{
    mi_binning, mi_gaussian_dropout_with_samples, BinningConfig, MiEstimate,
    DEFAULT_MASKS_PER_INPUT,
};

/// Default sample-count grid for convergence studies.
pub const DEFAULT_SAMPLE_GRID: [usize; 4] = [100, 1_000, 10_000, 100_000];

/// Default bins-per-dimension sweep for the binning baseline.
pub const DEFAULT_BIN_SWEEP: [usize; 4] = [3, 8, 15, 30];

/// Default repetition count per grid point.
pub const DEFAULT_REPS: usize = 5;

/// The toy generative model: X ~ N(0, Iₙ) entrywise, pre-noise
/// representation f(X) = scale·X + shift, noisy Z = f(X) ∘ (1 + σ·ε).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ToySpec {
    /// Representation dimension n.
    pub input_dim: usize,
    pub scale: f64,
    pub shift: f64,
    /// Multiplicative-noise variance σ².
    pub sigma_sq: f64,
    /// Sample count |S| for single runs (convergence studies replace it
    /// with each grid value).
    pub sample_count: usize,
    pub masks_per_input: usize,
    /// Cap on mixture components handed to the estimator.
    pub max_components: usize,
    /// Bins-per-dimension sweep for the binning baseline.
    pub bin_sweep: Vec<usize>,
    pub seed: u64,
}

impl ToySpec {
    /// Spec with the standard transform f(x) = 2x + 0.5, ten noise
    /// masks per input, an uncapped mixture, and the default bin sweep.
    pub fn new(input_dim: usize, sigma_sq: f64, sample_count: usize, seed: u64) -> Self {
        Self {
            input_dim,
            scale: 2.0,
            shift: 0.5,
            sigma_sq,
            sample_count,
            masks_per_input: DEFAULT_MASKS_PER_INPUT,
            max_components: sample_count.max(1),
            bin_sweep: DEFAULT_BIN_SWEEP.to_vec(),
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.input_dim == 0 {
            return Err(Error::Domain {
                what: "input dimension",
                requirement: "at least 1",
                got: 0.0,
            });
        }
        if !(self.scale.is_finite() && self.scale != 0.0) {
            return Err(Error::Domain {
                what: "affine scale",
                requirement: "finite and nonzero",
                got: self.scale,
            });
        }
        if !self.shift.is_finite() {
            return Err(Error::NonFinite("affine shift"));
        }
        if !(self.sigma_sq.is_finite() && self.sigma_sq > 0.0) {
            return Err(Error::Domain {
                what: "noise variance",
                requirement: "positive and finite",
                got: self.sigma_sq,
            });
        }
        if self.sample_count == 0 {
            return Err(Error::Domain {
                what: "sample count",
                requirement: "at least 1",
                got: 0.0,
            });
        }
        if self.masks_per_input == 0 {
            return Err(Error::Domain {
                what: "masks per input",
                requirement: "at least 1",
                got: 0.0,
            });
        }
        if self.max_components == 0 {
            return Err(Error::Domain {
                what: "mixture component cap",
                requirement: "at least 1",
                got: 0.0,
            });
        }
        if self.bin_sweep.is_empty() {
            return Err(Error::EmptyInput("bin sweep"));
        }
        Ok(())
    }
}

/// Draws `rows` pre-noise representations scale·x + shift, x ~ N(0,1).
pub fn generate_pre_noise(spec: &ToySpec, rows: usize, rng: &mut StreamRng) -> Matrix<f64> {
    let mut pre = Matrix::zeros(rows, spec.input_dim);
    for v in pre.data_mut() {
        *v = spec.scale * f64::standard_normal(rng) + spec.shift;
    }
    pre
}

/// Binning-baseline value at one bin count.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BinnedMi {
    pub bins_per_dimension: usize,
    pub mi: f64,
}

/// One repetition at one grid point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RepResult {
    pub rep: usize,
    pub estimate: MiEstimate<f64>,
    pub binning: Vec<BinnedMi>,
}

/// All repetitions at one sample count, with max−min spreads.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridPoint {
    pub sample_count: usize,
    pub reps: Vec<RepResult>,
    pub h_z_given_x_spread: f64,
    pub h_z_spread: f64,
    pub mi_spread: f64,
}

/// Output of [`run_toy_convergence`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceStudy {
    pub spec: ToySpec,
    pub reps: usize,
    pub points: Vec<GridPoint>,
}

/// Stream tag for repetition `rep` at grid index `gi`; every (grid
/// point, repetition) cell owns an independent derived stream, so cells
/// can be computed in any order (or in parallel) with identical results.
fn cell_tag(grid_index: usize, rep: usize) -> u64 {
    ((grid_index as u64) << 32) | rep as u64
}

fn spread(values: impl Iterator<Item = f64>) -> f64 {
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for v in values {
        lo = lo.min(v);
        hi = hi.max(v);
    }
    hi - lo
}

/// Runs one (grid index, repetition) cell of the study.
fn run_cell(spec: &ToySpec, grid_index: usize, rep: usize, count: usize) -> Result<RepResult> {
    let cell = StreamRng::new(spec.seed, 0).derive(cell_tag(grid_index, rep));
    let mut data_rng = cell.derive(1);
    let estimator_rng = cell.derive(2);

    let pre = generate_pre_noise(spec, count, &mut data_rng);
    let (estimate, noisy) = mi_gaussian_dropout_with_samples(
        &pre,
        spec.sigma_sq.sqrt(),
        spec.masks_per_input,
        spec.max_components,
        &estimator_rng,
    )?;
    let binning = spec
        .bin_sweep
        .iter()
        .map(|&bins| {
            mi_binning(&pre, &noisy, &BinningConfig::fixed_count(bins)).map(|mi| BinnedMi {
                bins_per_dimension: bins,
                mi,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(RepResult {
        rep,
        estimate,
        binning,
    })
}

/// Estimator convergence study: for every sample count in the
/// (ascending) grid, runs `reps` independent repetitions of the full
/// pipeline — fresh data, mixture estimate with its entropy
/// decomposition and Gaussian upper bound, and the binning baseline
/// across the spec's bin sweep — and reports per-point spreads.
/// `spec.sample_count` is ignored here; the grid supplies every count.
pub fn run_toy_convergence(
    spec: &ToySpec,
    sample_grid: &[usize],
    reps: usize,
) -> Result<ConvergenceStudy> {
    spec.validate()?;
    if sample_grid.is_empty() {
        return Err(Error::EmptyInput("sample grid"));
    }
    if sample_grid[0] == 0 {
        return Err(Error::Domain {
            what: "sample grid entry",
            requirement: "at least 1",
            got: 0.0,
        });
    }
    if sample_grid.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::Domain {
            what: "sample grid",
            requirement: "strictly ascending",
            got: sample_grid.len() as f64,
        });
    }
    if reps < 3 {
        return Err(Error::Domain {
            what: "repetitions per grid point",
            requirement: "at least 3",
            got: reps as f64,
        });
    }

    let mut points = Vec::with_capacity(sample_grid.len());
    for (gi, &count) in sample_grid.iter().enumerate() {
        let mut rep_results = Vec::with_capacity(reps);
        for rep in 0..reps {
            rep_results.push(run_cell(spec, gi, rep, count)?);
        }
        let h_z_given_x_spread = spread(rep_results.iter().map(|r| r.estimate.h_z_given_x));
        let h_z_spread = spread(rep_results.iter().map(|r| r.estimate.h_z));
        let mi_spread = spread(rep_results.iter().map(|r| r.estimate.value));
        points.push(GridPoint {
            sample_count: count,
            reps: rep_results,
            h_z_given_x_spread,
            h_z_spread,
            mi_spread,
        });
    }
    Ok(ConvergenceStudy {
        spec: spec.clone(),
        reps,
        points,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small_spec(sigma_sq: f64) -> ToySpec {
        let mut spec = ToySpec::new(1, sigma_sq, 400, 7);
        spec.masks_per_input = 4;
        spec.bin_sweep = vec![3, 8];
        spec
    }

    #[test]
    fn study_carries_every_field_the_contract_promises() {
        let spec = small_spec(0.01);
        let study = run_toy_convergence(&spec, &[100, 400], 3).unwrap();
        assert_eq!(study.points.len(), 2);
        for (point, &count) in study.points.iter().zip(&[100usize, 400]) {
            assert_eq!(point.sample_count, count);
            assert_eq!(point.reps.len(), 3);
            for rep in &point.reps {
                assert!(rep.estimate.value.is_finite());
                assert!(rep.estimate.h_z.is_finite());
                assert!(rep.estimate.h_z_given_x.is_finite());
                assert!(rep.estimate.upper_bound.unwrap().is_finite());
                assert_eq!(rep.binning.len(), 2);
                assert_eq!(rep.binning[0].bins_per_dimension, 3);
                assert_eq!(rep.binning[1].bins_per_dimension, 8);
            }
            assert!(point.h_z_given_x_spread >= 0.0);
            assert!(point.h_z_spread >= 0.0);
            assert!(point.mi_spread >= 0.0);
        }
    }

    #[test]
    fn rerunning_the_study_reproduces_it_exactly() {
        let spec = small_spec(0.01);
        let a = run_toy_convergence(&spec, &[100, 300], 3).unwrap();
        let b = run_toy_convergence(&spec, &[100, 300], 3).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn each_cell_is_reproducible_in_isolation() {
        // The per-cell stream derivation is the concurrency contract:
        // a cell recomputed alone matches the cell inside the full
        // study, so execution order cannot matter.
        let spec = small_spec(0.01);
        let study = run_toy_convergence(&spec, &[100, 300], 3).unwrap();
        let lone = run_cell(&spec, 1, 2, 300).unwrap();
        assert_eq!(study.points[1].reps[2], lone);
    }

    #[test]
    fn larger_noise_strictly_lowers_the_estimate() {
        let quiet = run_toy_convergence(&small_spec(0.01), &[2000], 3).unwrap();
        let loud = run_toy_convergence(&small_spec(0.16), &[2000], 3).unwrap();
        let q = &quiet.points[0].reps[0].estimate;
        let l = &loud.points[0].reps[0].estimate;
        assert!(
            q.value - l.value > 3.0 * (q.mc_standard_error + l.mc_standard_error),
            "σ²=0.01 gave {} vs σ²=0.16 gave {}",
            q.value,
            l.value
        );
    }

    #[test]
    fn fine_binning_on_many_dimensions_saturates_at_ln_sample_count() {
        let mut spec = ToySpec::new(50, 0.01, 200, 3);
        spec.masks_per_input = 5;
        spec.bin_sweep = vec![30];
        let study = run_toy_convergence(&spec, &[200], 3).unwrap();
        for rep in &study.points[0].reps {
            let got = rep.binning[0].mi;
            assert!(
                (got - (200f64).ln()).abs() < 1e-9,
                "expected ln(200), got {got}"
            );
        }
    }

    #[test]
    fn rejects_bad_grids_and_rep_counts() {
        let spec = small_spec(0.01);
        assert!(matches!(
            run_toy_convergence(&spec, &[], 3),
            Err(Error::EmptyInput(_))
        ));
        assert!(matches!(
            run_toy_convergence(&spec, &[100, 100], 3),
            Err(Error::Domain { .. })
        ));
        assert!(matches!(
            run_toy_convergence(&spec, &[300, 100], 3),
            Err(Error::Domain { .. })
        ));
        assert!(matches!(
            run_toy_convergence(&spec, &[0, 100], 3),
            Err(Error::Domain { .. })
        ));
        assert!(matches!(
            run_toy_convergence(&spec, &[100], 2),
            Err(Error::Domain { .. })
        ));
        let mut bad = small_spec(0.01);
        bad.sigma_sq = 0.0;
        assert!(run_toy_convergence(&bad, &[100], 3).is_err());
    }
}
