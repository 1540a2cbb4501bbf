//! Run configuration: one human-editable TOML file covering every
//! command, with every command-line flag overriding its field. The
//! effective (post-override) config is echoed into the run manifest so
//! a run can be reproduced from its outputs alone.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use infoplane_harness::ProbeSource;

use crate::error::{CliError, CliResult};

/// Which multiplicative noise the trained network carries on its
/// penultimate layer.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NetworkKind {
    /// Fixed-variance Gaussian dropout.
    Gaussian,
    /// Learned log-normal noise with a KL penalty weighted by beta.
    Info,
}

/// Probe-subset source, lowercase in config files.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ProbeSourceConfig {
    Train,
    Test,
}

impl From<ProbeSourceConfig> for ProbeSource {
    fn from(v: ProbeSourceConfig) -> Self {
        match v {
            ProbeSourceConfig::Train => ProbeSource::Train,
            ProbeSourceConfig::Test => ProbeSource::Test,
        }
    }
}

/// Settings for `toy-convergence`: the affine-map toy problem and its
/// sample-count grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ToySection {
    pub input_dim: usize,
    pub scale: f64,
    pub shift: f64,
    /// Noise standard deviation (the layer applies variance sigma²).
    pub sigma: f64,
    pub sample_grid: Vec<usize>,
    pub reps: usize,
    pub masks_per_input: usize,
    /// Mixture-component cap; 0 means "use every sample".
    pub max_components: usize,
    pub bin_sweep: Vec<usize>,
}

impl Default for ToySection {
    fn default() -> Self {
        Self {
            input_dim: 1,
            scale: 2.0,
            shift: 0.5,
            sigma: 0.1,
            sample_grid: infoplane_harness::DEFAULT_SAMPLE_GRID.to_vec(),
            reps: infoplane_harness::DEFAULT_REPS,
            masks_per_input: infoplane_estimators::DEFAULT_MASKS_PER_INPUT,
            max_components: 0,
            bin_sweep: infoplane_harness::DEFAULT_BIN_SWEEP.to_vec(),
        }
    }
}

/// Settings for `ip-train`: architecture, optimizer, and dataset limits.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainSection {
    pub network: NetworkKind,
    /// Hidden widths; the noise layer sits after the last one.
    pub hidden: Vec<usize>,
    pub classes: usize,
    /// Gaussian-dropout noise variance sigma².
    pub sigma_sq: f64,
    /// Clamp on the learned noise scale: alpha² never exceeds this.
    pub alpha_max_sq: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub momentum: f64,
    /// Weight of the noise KL penalty (information dropout only).
    pub beta: f64,
    /// Epochs to probe (0 = the untrained network). Empty means every
    /// epoch from 0 through `epochs`.
    pub probe_epochs: Vec<usize>,
    /// Training samples kept from the dataset (0 keeps none).
    pub limit: usize,
    pub test_limit: usize,
    /// Write one replayable representation dump per probe epoch.
    pub keep_dumps: bool,
}

impl Default for TrainSection {
    fn default() -> Self {
        Self {
            network: NetworkKind::Gaussian,
            hidden: vec![512, 128, 32],
            classes: 10,
            sigma_sq: 0.2,
            alpha_max_sq: 0.81,
            epochs: 30,
            batch_size: 128,
            learning_rate: 0.05,
            momentum: 0.9,
            beta: 0.0,
            probe_epochs: Vec::new(),
            limit: 10_000,
            test_limit: 10_000,
            keep_dumps: false,
        }
    }
}

/// Settings for the information-plane estimators used at probe epochs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EstimatorSection {
    pub probe_samples: usize,
    pub probe_source: ProbeSourceConfig,
    pub masks_per_input: usize,
    pub max_components: usize,
    pub bins_per_dimension: usize,
}

impl Default for EstimatorSection {
    fn default() -> Self {
        Self {
            probe_samples: 4000,
            probe_source: ProbeSourceConfig::Train,
            masks_per_input: infoplane_estimators::DEFAULT_MASKS_PER_INPUT,
            max_components: infoplane_estimators::DEFAULT_MAX_COMPONENTS,
            bins_per_dimension: 30,
        }
    }
}

/// Settings for `plot`: which trace columns form the axes. "auto"
/// prefers the mixture estimate for x (falling back to the binned one
/// when absent) and the variational label bound for y.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PlotSection {
    pub x: String,
    pub y: String,
}

impl Default for PlotSection {
    fn default() -> Self {
        Self {
            x: "auto".into(),
            y: "auto".into(),
        }
    }
}

/// The whole run configuration. Field defaults make the empty file (and
/// a missing `--config`) valid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    /// Root seed; training and estimation derive disjoint stream
    /// families from it.
    pub seed: u64,
    pub out_dir: PathBuf,
    /// Directory holding the IDX files; falls back to $MNIST_DIR, then
    /// `data/mnist`.
    pub dataset_dir: Option<PathBuf>,
    pub toy: ToySection,
    pub train: TrainSection,
    pub estimator: EstimatorSection,
    pub plot: PlotSection,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            seed: 7,
            out_dir: PathBuf::from("out"),
            dataset_dir: None,
            toy: ToySection::default(),
            train: TrainSection::default(),
            estimator: EstimatorSection::default(),
            plot: PlotSection::default(),
        }
    }
}

impl RunConfig {
    /// Reads the TOML file, or the defaults when no path is given.
    pub fn load(path: Option<&Path>) -> CliResult<Self> {
        match path {
            None => Ok(Self::default()),
            Some(p) => {
                let text = std::fs::read_to_string(p).map_err(|e| {
                    CliError::Config(format!("cannot read config {}: {e}", p.display()))
                })?;
                toml::from_str(&text)
                    .map_err(|e| CliError::Config(format!("{}: {e}", p.display())))
            }
        }
    }

    /// Dataset directory resolution: explicit config, then the
    /// MNIST_DIR environment variable, then `data/mnist`.
    pub fn resolve_dataset_dir(&self) -> PathBuf {
        if let Some(dir) = &self.dataset_dir {
            return dir.clone();
        }
        if let Ok(dir) = std::env::var("MNIST_DIR") {
            if !dir.is_empty() {
                return PathBuf::from(dir);
            }
        }
        PathBuf::from("data/mnist")
    }

    /// Probe epochs with the "empty means every epoch" default applied.
    pub fn effective_probe_epochs(&self) -> Vec<usize> {
        if self.train.probe_epochs.is_empty() {
            (0..=self.train.epochs).collect()
        } else {
            self.train.probe_epochs.clone()
        }
    }
}
