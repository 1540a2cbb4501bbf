//! Information-plane traces: train a network and estimate the
//! representation/label information of its probe layer at chosen epochs.

use serde::{Deserialize, Serialize};

use infoplane_core::{kahan_sum, Error, Matrix, Real, Result, StreamRng};
use infoplane_estimators::{
    info_dropout_kl_softplus, mi_binning, mi_gaussian_dropout_with_samples, mi_labels_binning,
    mi_labels_variational, BinningConfig, MiEstimate, DEFAULT_MASKS_PER_INPUT,
    DEFAULT_MAX_COMPONENTS,
};
use infoplane_net::{
    evaluate, train, ForwardMode, LayerSpec, Network, ProbeEvent, SampleBatch, TrainConfig,
    TrainRecord,
};

/// Probe activations beyond this magnitude mean optimization has
/// numerically exploded even if the loss is still representable; the
/// estimators square activations, so staying far below √f64::MAX keeps
/// every downstream reduction finite.
const PROBE_MAGNITUDE_LIMIT: f64 = 1e100;

/// Which dataset the probe subset is cut from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ProbeSource {
    Train,
    Test,
}

/// Estimation settings for the probe hook. The probe subset is the
/// first `probe_samples` rows of the chosen source (fixed across
/// epochs, so traces compare like against like).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IpEstimatorConfig {
    pub probe_samples: usize,
    pub probe_source: ProbeSource,
    pub masks_per_input: usize,
    pub max_components: usize,
    pub bins_per_dimension: usize,
    /// Seed of the estimation stream family; independent from the
    /// training stream so probing never perturbs optimization draws.
    pub seed: u64,
    /// Also return the probe layer's raw representations per probe
    /// epoch (see [`ProbeDump`]), so callers can persist them and
    /// re-run estimation offline.
    pub keep_probe_dumps: bool,
}

impl IpEstimatorConfig {
    pub fn new(seed: u64) -> Self {
        Self {
            probe_samples: 4000,
            probe_source: ProbeSource::Train,
            masks_per_input: DEFAULT_MASKS_PER_INPUT,
            max_components: DEFAULT_MAX_COMPONENTS,
            bins_per_dimension: 30,
            seed,
            keep_probe_dumps: false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.probe_samples == 0 {
            return Err(Error::Domain {
                what: "probe sample count",
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
        if self.bins_per_dimension == 0 {
            return Err(Error::Domain {
                what: "bins per dimension",
                requirement: "at least 1",
                got: 0.0,
            });
        }
        Ok(())
    }
}

/// One probe epoch in the information plane.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IpRow {
    pub epoch: usize,
    /// Mixture estimate of I(X;Z); present for a Gaussian-dropout probe
    /// layer, absent for information dropout (whose noise is log-normal,
    /// outside that estimator's model).
    pub mi_xz: Option<MiEstimate<f64>>,
    /// Mean per-sample KL of the learned noise against the log-normal
    /// prior, summed over probe units; present for an information-dropout
    /// probe layer.
    pub kl_mean: Option<f64>,
    pub mi_xz_binning: f64,
    pub mi_yz_binning: f64,
    pub mi_yz_variational: f64,
    pub train_loss: f64,
    pub train_accuracy: f64,
    pub test_accuracy: f64,
}

/// The probe rows of one training run, in epoch order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IpTrace {
    /// Number of classes, fixing the ln(classes) ceiling on label
    /// information.
    pub class_count: usize,
    pub rows: Vec<IpRow>,
}

impl IpTrace {
    /// Structural invariants: strictly increasing epochs, finite
    /// estimates, and label information at or below ln(class_count).
    pub fn validate(&self) -> Result<()> {
        if self.class_count < 2 {
            return Err(Error::Domain {
                what: "class count",
                requirement: "at least 2",
                got: self.class_count as f64,
            });
        }
        let ceiling = (self.class_count as f64).ln() + 1e-9;
        for (i, row) in self.rows.iter().enumerate() {
            if i > 0 && row.epoch <= self.rows[i - 1].epoch {
                return Err(Error::Degenerate(format!(
                    "probe epochs not strictly increasing: {} then {}",
                    self.rows[i - 1].epoch,
                    row.epoch
                )));
            }
            let mut finite = vec![
                ("binned representation information", row.mi_xz_binning),
                ("binned label information", row.mi_yz_binning),
                ("variational label information", row.mi_yz_variational),
            ];
            if let Some(est) = &row.mi_xz {
                finite.push(("mixture representation information", est.value));
            }
            if let Some(kl) = row.kl_mean {
                finite.push(("mean noise KL", kl));
            }
            for (what, v) in finite {
                if !v.is_finite() {
                    return Err(Error::Degenerate(format!(
                        "{} is non-finite at epoch {}",
                        what, row.epoch
                    )));
                }
            }
            for (what, v) in [
                ("binned", row.mi_yz_binning),
                ("variational", row.mi_yz_variational),
            ] {
                if v > ceiling {
                    return Err(Error::Degenerate(format!(
                        "{} label information {} exceeds ln({}) at epoch {}",
                        what, v, self.class_count, row.epoch
                    )));
                }
            }
        }
        Ok(())
    }
}

/// The probe layer's view at one probe epoch, in estimator precision:
/// everything needed to reproduce that epoch's estimates offline (the
/// estimation stream is recreated from the estimator seed and the
/// epoch, never stored).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbeDump {
    pub epoch: usize,
    /// Deterministic pre-noise activations of the probe subset.
    pub pre_noise: Matrix<f64>,
    /// Learned noise scales; present for an information-dropout probe.
    pub alpha: Option<Matrix<f64>>,
}

/// A finished (or aborted) information-plane run.
#[derive(Debug)]
pub struct IpOutcome<S> {
    pub trace: IpTrace,
    pub record: TrainRecord,
    pub net: Network<S>,
    /// Probe-epoch representations, aligned with `trace.rows`; empty
    /// unless the estimator config asked to keep them.
    pub dumps: Vec<ProbeDump>,
    /// `Some` when training aborted (divergence); the trace then holds
    /// every probe row completed before the failing epoch.
    pub failure: Option<Error>,
}

/// Draws `masks` log-normal noisy rows per input: z = f(x) ∘ exp(α ∘ ε),
/// ε ~ N(0,1), matching the network's information-dropout noise. Public
/// so offline re-estimation from a dump replays the identical draw.
pub fn draw_lognormal_noisy(
    pre: &Matrix<f64>,
    alpha: &Matrix<f64>,
    masks: usize,
    rng: &mut StreamRng,
) -> Matrix<f64> {
    let (rows, cols) = (pre.rows(), pre.cols());
    let mut noisy = Matrix::zeros(rows * masks, cols);
    for j in 0..rows {
        for m in 0..masks {
            let dst = noisy.row_mut(j * masks + m);
            for ((d, &f), &a) in dst.iter_mut().zip(pre.row(j)).zip(alpha.row(j)) {
                *d = f * (a * f64::standard_normal(rng)).exp();
            }
        }
    }
    noisy
}

/// Builds one probe row (and, when asked, the matching dump) from a
/// training snapshot.
fn probe_row<S: Real>(
    event: &ProbeEvent<'_, S>,
    probe_batch: &SampleBatch<S>,
    label_distribution: &[f64],
    test_data: &SampleBatch<S>,
    batch_size: usize,
    est: &IpEstimatorConfig,
    est_rng: &StreamRng,
) -> Result<(IpRow, Option<ProbeDump>)> {
    let mut det_rng = est_rng.derive(0);
    let view = event
        .net
        .forward(&probe_batch.inputs, ForwardMode::Deterministic, &mut det_rng)?;
    let pre: Matrix<f64> = view
        .probe_pre_noise
        .as_ref()
        .ok_or(Error::EmptyInput("probe layer activations"))?
        .convert();
    if !pre
        .data()
        .iter()
        .all(|v| v.is_finite() && v.abs() <= PROBE_MAGNITUDE_LIMIT)
    {
        return Err(Error::Training {
            epoch: event.epoch,
            what: "probe activations exploded (training diverged)".to_string(),
        });
    }

    let (mi_xz, kl_mean, noisy, alpha) = match event.net.probe_spec() {
        Some(LayerSpec::GaussianDropout { sigma_sq }) => {
            let (estimate, noisy) = mi_gaussian_dropout_with_samples(
                &pre,
                sigma_sq.sqrt(),
                est.masks_per_input,
                est.max_components,
                est_rng,
            )?;
            (Some(estimate), None, noisy, None)
        }
        Some(LayerSpec::InfoDropout { .. }) => {
            let alpha: Matrix<f64> = view
                .probe_alpha
                .as_ref()
                .ok_or(Error::EmptyInput("probe layer noise scales"))?
                .convert();
            let kl = info_dropout_kl_softplus(alpha.data(), 0.0, 1.0)?;
            let kl_mean = kahan_sum(kl.values.iter().copied()) / pre.rows() as f64;
            let mut noise_rng = est_rng.derive(2);
            let noisy = draw_lognormal_noisy(&pre, &alpha, est.masks_per_input, &mut noise_rng);
            (None, Some(kl_mean), noisy, Some(alpha))
        }
        _ => return Err(Error::EmptyInput("probe layer")),
    };

    let bins = BinningConfig::fixed_count(est.bins_per_dimension);
    let mi_xz_binning = mi_binning(&pre, &noisy, &bins)?;

    let labels = probe_batch
        .labels
        .as_ref()
        .ok_or(Error::EmptyInput("probe labels"))?;
    let mut expanded = Vec::with_capacity(labels.len() * est.masks_per_input);
    for &l in labels {
        expanded.extend(std::iter::repeat(l).take(est.masks_per_input));
    }
    let mi_yz_binning = mi_labels_binning(&noisy, &expanded, &bins)?;

    let (probe_loss, _) = evaluate(event.net, probe_batch, 0.0, batch_size)?;
    let mi_yz_variational =
        mi_labels_variational(probe_loss.cross_entropy, label_distribution)?;
    let (_, test_accuracy) = evaluate(event.net, test_data, 0.0, batch_size)?;

    let dump = est.keep_probe_dumps.then(|| ProbeDump {
        epoch: event.epoch,
        pre_noise: pre,
        alpha,
    });
    Ok((
        IpRow {
            epoch: event.epoch,
            mi_xz,
            kl_mean,
            mi_xz_binning,
            mi_yz_binning,
            mi_yz_variational,
            train_loss: event.stats.loss,
            train_accuracy: event.stats.accuracy,
            test_accuracy,
        },
        dump,
    ))
}

/// Trains a freshly initialized network and records the information
/// plane at `config.probe_epochs`.
///
/// Estimation draws from stream family `(est.seed, 1)` with one derived
/// stream per probe epoch; training draws from `(config.seed, 0)`. The
/// two never interleave, so adding or removing probe epochs cannot
/// change the trained network.
///
/// Training divergence is reported, not propagated: the outcome carries
/// the partial trace together with the failure. Estimation errors (and
/// anything else) propagate as `Err`.
pub fn run_ip_experiment<S: Real>(
    net_spec: &[LayerSpec],
    init_seed: u64,
    train_data: &SampleBatch<S>,
    test_data: &SampleBatch<S>,
    config: &TrainConfig,
    est: &IpEstimatorConfig,
) -> Result<IpOutcome<S>> {
    est.validate()?;
    config.validate()?;
    let mut net: Network<S> = Network::new(net_spec, init_seed)?;
    let probing = !config.probe_epochs.is_empty();
    if probing && net.probe_layer().is_none() {
        return Err(Error::Domain {
            what: "probe epochs",
            requirement: "a network with a noise layer to probe",
            got: config.probe_epochs.len() as f64,
        });
    }

    let source = match est.probe_source {
        ProbeSource::Train => train_data,
        ProbeSource::Test => test_data,
    };
    let keep = est.probe_samples.min(source.len());
    let idx: Vec<usize> = (0..keep).collect();
    let probe_batch = source.gather(&idx);

    let class_count = net.output_dim();
    let label_distribution: Vec<f64> = if probing {
        let labels = probe_batch
            .labels
            .as_ref()
            .ok_or(Error::EmptyInput("probe labels"))?;
        let mut counts = vec![0usize; class_count];
        for &l in labels {
            if l as usize >= class_count {
                return Err(Error::Domain {
                    what: "probe label",
                    requirement: "below the class count",
                    got: l as f64,
                });
            }
            counts[l as usize] += 1;
        }
        counts
            .iter()
            .map(|&c| c as f64 / labels.len() as f64)
            .collect()
    } else {
        Vec::new()
    };

    let est_root = StreamRng::new(est.seed, 1);
    let mut rows: Vec<IpRow> = Vec::new();
    let mut dumps: Vec<ProbeDump> = Vec::new();
    let result = train(&mut net, train_data, config, |event| {
        let est_rng = est_root.derive(event.epoch as u64);
        let (row, dump) = probe_row(
            &event,
            &probe_batch,
            &label_distribution,
            test_data,
            config.batch_size,
            est,
            &est_rng,
        )?;
        rows.push(row);
        dumps.extend(dump);
        Ok(())
    });

    let (record, failure) = match result {
        Ok(record) => (record, None),
        Err(err @ Error::Training { .. }) => (TrainRecord::default(), Some(err)),
        Err(other) => return Err(other),
    };
    let trace = IpTrace { class_count, rows };
    if !trace.rows.is_empty() {
        trace.validate()?;
    }
    Ok(IpOutcome {
        trace,
        record,
        net,
        dumps,
        failure,
    })
}
