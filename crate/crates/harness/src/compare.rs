//! Side-by-side estimator table built from a convergence study.

use std::path::Path;

use serde::{Deserialize, Serialize};

use infoplane_core::{kahan_sum, mean_and_standard_error, Error, Result};

use crate::quadrature::{toy_oracle_1d, ToyOracle};
use crate::toy::{BinnedMi, ConvergenceStudy};

/// A table slot for an estimator that may not be implemented here.
///
/// Kernel- and neighbor-graph-based estimators keep a labelled column so
/// downstream tables stay comparable across toolchains, but this
/// workspace does not compute them.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Availability {
    Available(f64),
    Unavailable,
}

/// Per-sample-count summary row: repetition means for the mixture
/// estimator and the binning sweep, plus the quadrature reference when
/// one exists for the spec.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonRow {
    pub sample_count: usize,
    pub mi_gmm_mean: f64,
    /// Mean across repetitions of the per-run Monte-Carlo standard error.
    pub mi_gmm_se_mean: f64,
    pub h_z_mean: f64,
    pub h_z_given_x_mean: f64,
    pub upper_bound_mean: Option<f64>,
    pub binning_mean: Vec<BinnedMi>,
    pub oracle_mi: Option<f64>,
    pub edge: Availability,
    pub doe: Availability,
}

/// Output of [`compare_estimators`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonTable {
    pub input_dim: usize,
    /// Quadrature reference; present only in one dimension, where the
    /// noisy-representation density is tractable.
    pub oracle: Option<ToyOracle>,
    pub rows: Vec<ComparisonRow>,
}

/// Collapses a convergence study into one row per sample count,
/// averaging across repetitions. For one-dimensional specs the
/// quadrature oracle is computed (using `oracle_cache` when given) and
/// its value attached to every row; in higher dimensions the oracle
/// column is empty. Kernel/neighbor estimator slots are always marked
/// unavailable.
pub fn compare_estimators(
    study: &ConvergenceStudy,
    oracle_cache: Option<&Path>,
) -> Result<ComparisonTable> {
    if study.points.is_empty() {
        return Err(Error::EmptyInput("convergence study points"));
    }
    if study.reps < 3 {
        return Err(Error::Domain {
            what: "study repetitions",
            requirement: "at least 3",
            got: study.reps as f64,
        });
    }
    let sweep = &study.spec.bin_sweep;
    for point in &study.points {
        if point.reps.len() != study.reps {
            return Err(Error::Degenerate(format!(
                "grid point {} holds {} repetitions, study declares {}",
                point.sample_count,
                point.reps.len(),
                study.reps
            )));
        }
        for rep in &point.reps {
            let bins: Vec<usize> = rep.binning.iter().map(|b| b.bins_per_dimension).collect();
            if &bins != sweep {
                return Err(Error::Degenerate(format!(
                    "repetition {} at {} samples ran bin sweep {:?}, spec says {:?}",
                    rep.rep, point.sample_count, bins, sweep
                )));
            }
        }
    }

    let oracle = if study.spec.input_dim == 1 {
        Some(toy_oracle_1d(
            study.spec.scale,
            study.spec.shift,
            study.spec.sigma_sq,
            oracle_cache,
        )?)
    } else {
        None
    };

    let mut rows = Vec::with_capacity(study.points.len());
    for point in &study.points {
        let mean_of = |f: &dyn Fn(&crate::toy::RepResult) -> f64| -> Result<f64> {
            let values: Vec<f64> = point.reps.iter().map(f).collect();
            Ok(mean_and_standard_error(&values)?.0)
        };
        let upper_bound_mean = if point.reps.iter().all(|r| r.estimate.upper_bound.is_some()) {
            Some(
                kahan_sum(point.reps.iter().map(|r| r.estimate.upper_bound.unwrap()))
                    / point.reps.len() as f64,
            )
        } else {
            None
        };
        let binning_mean = sweep
            .iter()
            .enumerate()
            .map(|(bi, &bins)| {
                let mi = kahan_sum(point.reps.iter().map(|r| r.binning[bi].mi))
                    / point.reps.len() as f64;
                BinnedMi {
                    bins_per_dimension: bins,
                    mi,
                }
            })
            .collect();
        rows.push(ComparisonRow {
            sample_count: point.sample_count,
            mi_gmm_mean: mean_of(&|r| r.estimate.value)?,
            mi_gmm_se_mean: mean_of(&|r| r.estimate.mc_standard_error)?,
            h_z_mean: mean_of(&|r| r.estimate.h_z)?,
            h_z_given_x_mean: mean_of(&|r| r.estimate.h_z_given_x)?,
            upper_bound_mean,
            binning_mean,
            oracle_mi: oracle.as_ref().map(|o| o.mi),
            edge: Availability::Unavailable,
            doe: Availability::Unavailable,
        });
    }
    Ok(ComparisonTable {
        input_dim: study.spec.input_dim,
        oracle,
        rows,
    })
}
