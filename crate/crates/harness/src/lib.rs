//! Experiment drivers: a toy convergence study with a quadrature
//! reference, estimator comparison tables, and information-plane traces
//! of dropout networks under training.
//!
//! Everything is seeded and replayable: studies derive one random
//! stream per (grid point, repetition) cell and traces one per probe
//! epoch, so results are independent of execution order.

pub mod compare;
pub mod ip;
pub mod quadrature;
pub mod toy;

pub use compare::{compare_estimators, Availability, ComparisonRow, ComparisonTable};
pub use ip::{
    draw_lognormal_noisy, run_ip_experiment, IpEstimatorConfig, IpOutcome, IpRow, IpTrace,
    ProbeDump, ProbeSource,
};
pub use quadrature::{adaptive_simpson, expected_ln_abs_affine_normal, toy_oracle_1d, ToyOracle};
pub use toy::{
    generate_pre_noise, run_toy_convergence, BinnedMi, ConvergenceStudy, GridPoint, RepResult,
    ToySpec, DEFAULT_BIN_SWEEP, DEFAULT_REPS, DEFAULT_SAMPLE_GRID,
};

pub use infoplane_core::{Error, Result};
