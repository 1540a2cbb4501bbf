//! Command drivers: each one reads the effective configuration, runs
//! the corresponding study, and writes its output files plus a JSON
//! manifest into the output directory. Nothing here mutates an input
//! file, and a clean return means every output was written.

use std::path::Path;

use infoplane_core::{kahan_sum, StreamRng};
use infoplane_estimators::{
    info_dropout_kl_softplus, mi_binning, mi_gaussian_dropout_with_samples, mi_labels_binning,
    BinningConfig,
};
use infoplane_harness::{
    compare_estimators, draw_lognormal_noisy, run_ip_experiment, run_toy_convergence,
    IpEstimatorConfig, ProbeSource, ToySpec,
};
use infoplane_net::{Activation, LayerSpec, SampleBatch, TrainConfig};

use crate::config::{NetworkKind, RunConfig, TrainSection};
use crate::emit::{
    dump_file_name, write_comparison_csv, write_convergence_csv, write_dump, write_estimate_csv,
    write_manifest, write_trace_csv, write_train_log_csv, EstimateRow, Manifest, ProbeNoise,
    RepDumpFile,
};
use crate::error::{CliError, CliResult};
use crate::idx::load_idx;
use crate::svg::{read_trace_points, write_plot};

/// Recomputed values must land this close to what training recorded.
pub const ESTIMATE_TOLERANCE: f64 = 1e-9;

fn ensure_out_dir(dir: &Path) -> CliResult<()> {
    std::fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))
}

/// Runs the toy convergence study and the estimator comparison table.
/// Writes `convergence.csv`, `comparison.csv`, and `manifest.json`.
pub fn toy_convergence(cfg: &RunConfig) -> CliResult<()> {
    let toy = &cfg.toy;
    if toy.sample_grid.is_empty() {
        return Err(CliError::Config(
            "toy.sample_grid must list at least one sample count".into(),
        ));
    }
    // Output paths are validated before any computation starts.
    ensure_out_dir(&cfg.out_dir)?;
    let largest = *toy.sample_grid.iter().max().expect("nonempty grid");
    let mut spec = ToySpec::new(toy.input_dim, toy.sigma * toy.sigma, largest, cfg.seed);
    spec.scale = toy.scale;
    spec.shift = toy.shift;
    spec.masks_per_input = toy.masks_per_input;
    spec.max_components = if toy.max_components == 0 {
        largest
    } else {
        toy.max_components
    };
    spec.bin_sweep = toy.bin_sweep.clone();

    let study = run_toy_convergence(&spec, &toy.sample_grid, toy.reps)?;
    let table = compare_estimators(&study, None)?;

    write_convergence_csv(&study, &cfg.out_dir.join("convergence.csv"))?;
    write_comparison_csv(&table, &cfg.out_dir.join("comparison.csv"))?;
    let manifest = Manifest::new(
        "toy-convergence",
        cfg,
        vec!["convergence.csv".into(), "comparison.csv".into()],
    );
    write_manifest(&manifest, &cfg.out_dir.join("manifest.json"))
}

/// Builds the classifier: Dense+Softplus per hidden width, the noise
/// layer after the last hidden activation (the penultimate layer), and
/// a Dense readout.
pub fn network_spec(input_dim: usize, train: &TrainSection) -> CliResult<Vec<LayerSpec>> {
    if train.hidden.is_empty() {
        return Err(CliError::Config(
            "train.hidden must list at least one width (the noise layer sits on the last one)"
                .into(),
        ));
    }
    if train.classes < 2 {
        return Err(CliError::Config(format!(
            "train.classes must be at least 2, got {}",
            train.classes
        )));
    }
    let mut spec = Vec::with_capacity(2 * train.hidden.len() + 2);
    let mut fan_in = input_dim;
    for &width in &train.hidden {
        spec.push(LayerSpec::Dense {
            fan_in,
            fan_out: width,
        });
        spec.push(LayerSpec::Activation(Activation::Softplus));
        fan_in = width;
    }
    spec.push(match train.network {
        NetworkKind::Gaussian => LayerSpec::GaussianDropout {
            sigma_sq: train.sigma_sq,
        },
        NetworkKind::Info => LayerSpec::InfoDropout {
            alpha_max_sq: train.alpha_max_sq,
        },
    });
    spec.push(LayerSpec::Dense {
        fan_in,
        fan_out: train.classes,
    });
    Ok(spec)
}

/// Trains on the IDX dataset and traces the information plane. Writes
/// `ip_trace.csv`, `train_log.csv`, optional per-epoch dumps, and
/// `manifest.json`. Training divergence still writes the partial trace,
/// then exits with the training category.
pub fn ip_train(cfg: &RunConfig) -> CliResult<()> {
    // Dataset files and the output directory are both validated before
    // any computation starts.
    ensure_out_dir(&cfg.out_dir)?;
    let dataset_dir = cfg.resolve_dataset_dir();
    let train_set = load_idx(
        &dataset_dir.join("train-images-idx3-ubyte"),
        &dataset_dir.join("train-labels-idx1-ubyte"),
        Some(cfg.train.limit),
    )?;
    let test_set = load_idx(
        &dataset_dir.join("t10k-images-idx3-ubyte"),
        &dataset_dir.join("t10k-labels-idx1-ubyte"),
        Some(cfg.train.test_limit),
    )?;
    let input_dim = train_set.images.cols();
    let spec = network_spec(input_dim, &cfg.train)?;

    let train_cfg = TrainConfig {
        epochs: cfg.train.epochs,
        batch_size: cfg.train.batch_size,
        learning_rate: cfg.train.learning_rate,
        momentum: cfg.train.momentum,
        lr_schedule: Vec::new(),
        seed: cfg.seed,
        beta: cfg.train.beta,
        probe_epochs: cfg.effective_probe_epochs(),
    };
    let est = IpEstimatorConfig {
        probe_samples: cfg.estimator.probe_samples,
        probe_source: cfg.estimator.probe_source.into(),
        masks_per_input: cfg.estimator.masks_per_input,
        max_components: cfg.estimator.max_components,
        bins_per_dimension: cfg.estimator.bins_per_dimension,
        seed: cfg.seed,
        keep_probe_dumps: cfg.train.keep_dumps,
    };

    let train_batch: SampleBatch<f32> = train_set.into_batch();
    let test_batch: SampleBatch<f32> = test_set.into_batch();
    let outcome = run_ip_experiment(
        &spec,
        cfg.seed,
        &train_batch,
        &test_batch,
        &train_cfg,
        &est,
    )?;

    write_trace_csv(&outcome.trace, &cfg.out_dir.join("ip_trace.csv"))?;
    write_train_log_csv(&outcome.record, &cfg.out_dir.join("train_log.csv"))?;
    let mut outputs = vec!["ip_trace.csv".to_string(), "train_log.csv".to_string()];

    if cfg.train.keep_dumps {
        let source = match est.probe_source {
            ProbeSource::Train => &train_batch,
            ProbeSource::Test => &test_batch,
        };
        let keep = est.probe_samples.min(source.len());
        // Same first-`keep` subset rule the trace runner applies.
        let labels = source.labels.as_ref().expect("idx batches are labeled")[..keep].to_vec();
        let noise = match cfg.train.network {
            NetworkKind::Gaussian => ProbeNoise::Gaussian {
                sigma_sq: cfg.train.sigma_sq,
            },
            NetworkKind::Info => ProbeNoise::Info,
        };
        for (dump, row) in outcome.dumps.iter().zip(&outcome.trace.rows) {
            let file = RepDumpFile {
                epoch: dump.epoch,
                noise,
                estimator: est.clone(),
                labels: labels.clone(),
                recorded: row.clone(),
                pre_noise: dump.pre_noise.clone(),
                alpha: dump.alpha.clone(),
            };
            let name = dump_file_name(dump.epoch);
            write_dump(&file, &cfg.out_dir.join(&name))?;
            outputs.push(name);
        }
    }

    let manifest = Manifest::new("ip-train", cfg, outputs);
    write_manifest(&manifest, &cfg.out_dir.join("manifest.json"))?;

    match outcome.failure {
        Some(failure) => Err(CliError::Training(failure.to_string())),
        None => Ok(()),
    }
}

/// Pushes a recorded-vs-recomputed pair, treating a quantity recorded
/// as absent as a malformed dump.
fn push_row(
    rows: &mut Vec<EstimateRow>,
    quantity: &'static str,
    recorded: Option<f64>,
    recomputed: f64,
) -> CliResult<()> {
    let recorded = recorded.ok_or_else(|| {
        CliError::Format(format!("dump records no {quantity} value to compare against"))
    })?;
    rows.push(EstimateRow {
        quantity,
        recorded,
        recomputed,
    });
    Ok(())
}

/// Re-runs estimation from a saved dump: re-derives the per-epoch
/// estimation stream from the embedded seed, recomputes every quantity
/// the dump supports, writes `estimate.csv` and
/// `estimate_manifest.json`, and fails (category `compute`) if anything
/// moved by more than 1e-9.
pub fn estimate(cfg: &RunConfig, dump_path: &Path) -> CliResult<()> {
    ensure_out_dir(&cfg.out_dir)?;
    let dump = crate::emit::read_dump(dump_path)?;
    let est = &dump.estimator;
    if dump.labels.len() != dump.pre_noise.rows() {
        return Err(CliError::Format(format!(
            "{}: {} labels for {} representation rows",
            dump_path.display(),
            dump.labels.len(),
            dump.pre_noise.rows()
        )));
    }
    let est_rng = StreamRng::new(est.seed, 1).derive(dump.epoch as u64);
    let recorded = &dump.recorded;
    let mut rows: Vec<EstimateRow> = Vec::new();

    let noisy = match dump.noise {
        ProbeNoise::Gaussian { sigma_sq } => {
            let (fresh, noisy) = mi_gaussian_dropout_with_samples(
                &dump.pre_noise,
                sigma_sq.sqrt(),
                est.masks_per_input,
                est.max_components,
                &est_rng,
            )?;
            let rec = recorded.mi_xz.as_ref().ok_or_else(|| {
                CliError::Format(format!(
                    "{}: a gaussian dump must record a mixture estimate",
                    dump_path.display()
                ))
            })?;
            rows.push(EstimateRow {
                quantity: "mi_xz",
                recorded: rec.value,
                recomputed: fresh.value,
            });
            rows.push(EstimateRow {
                quantity: "h_z",
                recorded: rec.h_z,
                recomputed: fresh.h_z,
            });
            rows.push(EstimateRow {
                quantity: "h_z_given_x",
                recorded: rec.h_z_given_x,
                recomputed: fresh.h_z_given_x,
            });
            rows.push(EstimateRow {
                quantity: "mc_standard_error",
                recorded: rec.mc_standard_error,
                recomputed: fresh.mc_standard_error,
            });
            if let Some(fresh_ub) = fresh.upper_bound {
                push_row(&mut rows, "gaussian_upper_bound", rec.upper_bound, fresh_ub)?;
            }
            noisy
        }
        ProbeNoise::Info => {
            let alpha = dump.alpha.as_ref().ok_or_else(|| {
                CliError::Format(format!(
                    "{}: an info dump must carry the learned noise scales",
                    dump_path.display()
                ))
            })?;
            let kl = info_dropout_kl_softplus(alpha.data(), 0.0, 1.0)?;
            let kl_mean = kahan_sum(kl.values.iter().copied()) / dump.pre_noise.rows() as f64;
            push_row(&mut rows, "kl_mean", recorded.kl_mean, kl_mean)?;
            let mut noise_rng = est_rng.derive(2);
            draw_lognormal_noisy(&dump.pre_noise, alpha, est.masks_per_input, &mut noise_rng)
        }
    };

    let bins = BinningConfig::fixed_count(est.bins_per_dimension);
    let mi_xz_binning = mi_binning(&dump.pre_noise, &noisy, &bins)?;
    rows.push(EstimateRow {
        quantity: "mi_xz_binning",
        recorded: recorded.mi_xz_binning,
        recomputed: mi_xz_binning,
    });
    let mut expanded = Vec::with_capacity(dump.labels.len() * est.masks_per_input);
    for &label in &dump.labels {
        expanded.extend(std::iter::repeat(label).take(est.masks_per_input));
    }
    let mi_yz_binning = mi_labels_binning(&noisy, &expanded, &bins)?;
    rows.push(EstimateRow {
        quantity: "mi_yz_binning",
        recorded: recorded.mi_yz_binning,
        recomputed: mi_yz_binning,
    });

    write_estimate_csv(&rows, &cfg.out_dir.join("estimate.csv"))?;
    let manifest = Manifest::new("estimate", cfg, vec!["estimate.csv".into()]);
    write_manifest(&manifest, &cfg.out_dir.join("estimate_manifest.json"))?;

    let worst = rows
        .iter()
        .max_by(|a, b| a.difference().total_cmp(&b.difference()))
        .expect("at least the binning rows exist");
    if worst.difference() > ESTIMATE_TOLERANCE {
        return Err(CliError::Compute(format!(
            "recomputed {} differs from the recorded value by {:e} (tolerance {:e})",
            worst.quantity,
            worst.difference(),
            ESTIMATE_TOLERANCE
        )));
    }
    Ok(())
}

/// Renders the information-plane SVG from a trace CSV. Writes
/// `ip_plot.svg` and `plot_manifest.json`.
pub fn plot(cfg: &RunConfig, csv_path: &Path) -> CliResult<()> {
    ensure_out_dir(&cfg.out_dir)?;
    let trace_plot = read_trace_points(csv_path, &cfg.plot.x, &cfg.plot.y)?;
    write_plot(&trace_plot, &cfg.out_dir.join("ip_plot.svg"))?;
    let manifest = Manifest::new("plot", cfg, vec!["ip_plot.svg".into()]);
    write_manifest(&manifest, &cfg.out_dir.join("plot_manifest.json"))
}
