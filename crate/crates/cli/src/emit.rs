//! Result emission: deterministic CSV files with documented headers, a
//! JSON run manifest that echoes the effective configuration, and
//! replayable per-epoch representation dumps.
//!
//! Floats are written with Rust's shortest round-trip formatting and
//! dumps are parsed with bit-exact float round-tripping, so re-running
//! a command with the same config and seed reproduces every output
//! byte for byte.

use std::path::Path;

use serde::{Deserialize, Serialize};

use infoplane_core::Matrix;
use infoplane_harness::{
    Availability, ComparisonTable, ConvergenceStudy, IpEstimatorConfig, IpRow, IpTrace,
};
use infoplane_net::TrainRecord;

use crate::config::RunConfig;
use crate::error::{CliError, CliResult};

fn fmt(v: f64) -> String {
    format!("{v}")
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(fmt).unwrap_or_default()
}

fn fmt_availability(v: &Availability) -> String {
    match v {
        Availability::Available(x) => fmt(*x),
        Availability::Unavailable => "unavailable".into(),
    }
}

fn write_bytes(path: &Path, bytes: &[u8]) -> CliResult<()> {
    std::fs::write(path, bytes).map_err(|e| CliError::io(path, e))
}

fn finish_csv(writer: csv::Writer<Vec<u8>>, path: &Path) -> CliResult<()> {
    let bytes = writer
        .into_inner()
        .map_err(|e| CliError::Format(format!("{}: {e}", path.display())))?;
    write_bytes(path, &bytes)
}

/// `convergence.csv`: one row per (sample count, repetition) cell.
/// Columns: sample_count, rep, mi, h_z, h_z_given_x, mc_standard_error,
/// gaussian_upper_bound, then one `binning_mi_{b}bins` column per sweep
/// entry.
pub fn write_convergence_csv(study: &ConvergenceStudy, path: &Path) -> CliResult<()> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let mut header = vec![
        "sample_count".to_string(),
        "rep".to_string(),
        "mi".to_string(),
        "h_z".to_string(),
        "h_z_given_x".to_string(),
        "mc_standard_error".to_string(),
        "gaussian_upper_bound".to_string(),
    ];
    for &b in &study.spec.bin_sweep {
        header.push(format!("binning_mi_{b}bins"));
    }
    w.write_record(&header).map_err(csv_io(path))?;
    for point in &study.points {
        for rep in &point.reps {
            let mut record = vec![
                point.sample_count.to_string(),
                rep.rep.to_string(),
                fmt(rep.estimate.value),
                fmt(rep.estimate.h_z),
                fmt(rep.estimate.h_z_given_x),
                fmt(rep.estimate.mc_standard_error),
                fmt_opt(rep.estimate.upper_bound),
            ];
            for binned in &rep.binning {
                record.push(fmt(binned.mi));
            }
            w.write_record(&record).map_err(csv_io(path))?;
        }
    }
    finish_csv(w, path)
}

/// `comparison.csv`: one row per sample count with repetition means,
/// the quadrature oracle when available, and explicit "unavailable"
/// markers for estimator families that are out of scope.
pub fn write_comparison_csv(table: &ComparisonTable, path: &Path) -> CliResult<()> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let sweep: Vec<usize> = table
        .rows
        .first()
        .map(|r| r.binning_mean.iter().map(|b| b.bins_per_dimension).collect())
        .unwrap_or_default();
    let mut header = vec![
        "sample_count".to_string(),
        "mi_gmm_mean".to_string(),
        "mi_gmm_se_mean".to_string(),
        "h_z_mean".to_string(),
        "h_z_given_x_mean".to_string(),
        "gaussian_upper_bound_mean".to_string(),
    ];
    for b in &sweep {
        header.push(format!("binning_mi_{b}bins_mean"));
    }
    header.extend(["oracle_mi".to_string(), "edge_mi".to_string(), "doe_mi".to_string()]);
    w.write_record(&header).map_err(csv_io(path))?;
    for row in &table.rows {
        let mut record = vec![
            row.sample_count.to_string(),
            fmt(row.mi_gmm_mean),
            fmt(row.mi_gmm_se_mean),
            fmt(row.h_z_mean),
            fmt(row.h_z_given_x_mean),
            fmt_opt(row.upper_bound_mean),
        ];
        for binned in &row.binning_mean {
            record.push(fmt(binned.mi));
        }
        record.push(fmt_opt(row.oracle_mi));
        record.push(fmt_availability(&row.edge));
        record.push(fmt_availability(&row.doe));
        w.write_record(&record).map_err(csv_io(path))?;
    }
    finish_csv(w, path)
}

pub const TRACE_HEADER: [&str; 13] = [
    "epoch",
    "mi_xz",
    "mi_xz_standard_error",
    "h_z",
    "h_z_given_x",
    "gaussian_upper_bound",
    "kl_mean",
    "mi_xz_binning",
    "mi_yz_binning",
    "mi_yz_variational",
    "train_loss",
    "train_accuracy",
    "test_accuracy",
];

/// `ip_trace.csv`: one row per probe epoch. Estimator columns that do
/// not apply to the probed noise kind are left empty.
pub fn write_trace_csv(trace: &IpTrace, path: &Path) -> CliResult<()> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(TRACE_HEADER).map_err(csv_io(path))?;
    for row in &trace.rows {
        let est = row.mi_xz.as_ref();
        let record = vec![
            row.epoch.to_string(),
            fmt_opt(est.map(|e| e.value)),
            fmt_opt(est.map(|e| e.mc_standard_error)),
            fmt_opt(est.map(|e| e.h_z)),
            fmt_opt(est.map(|e| e.h_z_given_x)),
            fmt_opt(est.and_then(|e| e.upper_bound)),
            fmt_opt(row.kl_mean),
            fmt(row.mi_xz_binning),
            fmt(row.mi_yz_binning),
            fmt(row.mi_yz_variational),
            fmt(row.train_loss),
            fmt(row.train_accuracy),
            fmt(row.test_accuracy),
        ];
        w.write_record(&record).map_err(csv_io(path))?;
    }
    finish_csv(w, path)
}

/// `train_log.csv`: the optimizer's own per-epoch record.
pub fn write_train_log_csv(record: &TrainRecord, path: &Path) -> CliResult<()> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["epoch", "loss", "cross_entropy", "kl", "accuracy", "learning_rate"])
        .map_err(csv_io(path))?;
    for stats in &record.epochs {
        w.write_record(&[
            stats.epoch.to_string(),
            fmt(stats.loss),
            fmt(stats.cross_entropy),
            fmt(stats.kl),
            fmt(stats.accuracy),
            fmt(stats.learning_rate),
        ])
        .map_err(csv_io(path))?;
    }
    finish_csv(w, path)
}

/// One recomputed quantity in `estimate.csv`.
#[derive(Debug, Clone, PartialEq)]
pub struct EstimateRow {
    pub quantity: &'static str,
    pub recorded: f64,
    pub recomputed: f64,
}

impl EstimateRow {
    pub fn difference(&self) -> f64 {
        (self.recomputed - self.recorded).abs()
    }
}

/// `estimate.csv`: recorded vs recomputed values with absolute
/// differences, one row per reproducible quantity.
pub fn write_estimate_csv(rows: &[EstimateRow], path: &Path) -> CliResult<()> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["quantity", "recorded", "recomputed", "absolute_difference"])
        .map_err(csv_io(path))?;
    for row in rows {
        w.write_record(&[
            row.quantity.to_string(),
            fmt(row.recorded),
            fmt(row.recomputed),
            fmt(row.difference()),
        ])
        .map_err(csv_io(path))?;
    }
    finish_csv(w, path)
}

fn csv_io(path: &Path) -> impl Fn(csv::Error) -> CliError + '_ {
    move |e| CliError::Format(format!("{}: {e}", path.display()))
}

/// The run manifest: everything needed to reproduce the run. Contains
/// no timestamps or host details, so identical runs write identical
/// manifests.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub command: String,
    pub seed: u64,
    /// The effective configuration, flag overrides already applied.
    pub config: RunConfig,
    /// Files the command wrote, relative to the output directory.
    pub outputs: Vec<String>,
    pub rng_algorithm: String,
    pub training_scalar: String,
    pub estimation_scalar: String,
    /// Pre-noise magnitudes below this carry no noise scale and are
    /// excluded from conditional-entropy sums.
    pub zero_floor: f64,
    pub version: String,
}

impl Manifest {
    pub fn new(command: &str, config: &RunConfig, outputs: Vec<String>) -> Self {
        Self {
            command: command.to_string(),
            seed: config.seed,
            config: config.clone(),
            outputs,
            rng_algorithm: "chacha12 independent streams".to_string(),
            training_scalar: "f32".to_string(),
            estimation_scalar: "f64".to_string(),
            zero_floor: infoplane_core::ZERO_FLOOR,
            version: env!("CARGO_PKG_VERSION").to_string(),
        }
    }
}

pub fn write_manifest(manifest: &Manifest, path: &Path) -> CliResult<()> {
    let mut text = serde_json::to_string_pretty(manifest)
        .map_err(|e| CliError::Format(format!("{}: {e}", path.display())))?;
    text.push('\n');
    write_bytes(path, text.as_bytes())
}

pub fn read_manifest(path: &Path) -> CliResult<Manifest> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    serde_json::from_str(&text)
        .map_err(|e| CliError::Format(format!("{}: {e}", path.display())))
}

/// Noise family of the probed layer, as recorded in a dump.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ProbeNoise {
    Gaussian { sigma_sq: f64 },
    Info,
}

/// A replayable probe-epoch dump: the representation, the estimator
/// settings, and the values recorded during training. `estimate` reads
/// one of these, re-derives the per-epoch estimation stream from the
/// embedded seed, and must land within 1e-9 of every recorded value.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RepDumpFile {
    pub epoch: usize,
    pub noise: ProbeNoise,
    pub estimator: IpEstimatorConfig,
    /// Labels of the probe subset, in row order.
    pub labels: Vec<u8>,
    pub recorded: IpRow,
    /// Deterministic pre-noise activations of the probe subset.
    pub pre_noise: Matrix<f64>,
    /// Learned noise scales (information dropout only).
    pub alpha: Option<Matrix<f64>>,
}

pub fn dump_file_name(epoch: usize) -> String {
    format!("rep_epoch_{epoch:04}.json")
}

pub fn write_dump(dump: &RepDumpFile, path: &Path) -> CliResult<()> {
    let mut text = serde_json::to_string(dump)
        .map_err(|e| CliError::Format(format!("{}: {e}", path.display())))?;
    text.push('\n');
    write_bytes(path, text.as_bytes())
}

pub fn read_dump(path: &Path) -> CliResult<RepDumpFile> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    serde_json::from_str(&text)
        .map_err(|e| CliError::Format(format!("{}: {e}", path.display())))
}

#[cfg(test)]
mod tests {
    use super::*;
    use infoplane_harness::{compare_estimators, run_toy_convergence, ToySpec};

    #[test]
    fn convergence_and_comparison_files_carry_the_documented_columns() {
        let dir = tempfile::tempdir().unwrap();
        let mut spec = ToySpec::new(1, 0.01, 40, 3);
        spec.masks_per_input = 3;
        spec.bin_sweep = vec![4, 8];
        let study = run_toy_convergence(&spec, &[20, 40], 3).unwrap();
        let table = compare_estimators(&study, None).unwrap();

        let conv = dir.path().join("convergence.csv");
        write_convergence_csv(&study, &conv).unwrap();
        let text = std::fs::read_to_string(&conv).unwrap();
        let mut lines = text.lines();
        assert_eq!(
            lines.next().unwrap(),
            "sample_count,rep,mi,h_z,h_z_given_x,mc_standard_error,gaussian_upper_bound,binning_mi_4bins,binning_mi_8bins"
        );
        assert_eq!(text.lines().count(), 1 + 2 * 3);

        let comp = dir.path().join("comparison.csv");
        write_comparison_csv(&table, &comp).unwrap();
        let text = std::fs::read_to_string(&comp).unwrap();
        let header = text.lines().next().unwrap();
        assert!(header.starts_with("sample_count,mi_gmm_mean,"));
        assert!(header.ends_with("oracle_mi,edge_mi,doe_mi"));
        // Out-of-scope estimator families are explicit markers.
        for line in text.lines().skip(1) {
            assert!(line.ends_with(",unavailable,unavailable"), "{line}");
        }
    }

    #[test]
    fn an_empty_trace_writes_the_header_only() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("ip_trace.csv");
        let trace = IpTrace {
            class_count: 10,
            rows: vec![],
        };
        write_trace_csv(&trace, &path).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert_eq!(text, format!("{}\n", TRACE_HEADER.join(",")));
    }

    #[test]
    fn floats_use_shortest_round_trip_formatting() {
        assert_eq!(fmt(0.1), "0.1");
        assert_eq!(fmt(-0.7947536281849963), "-0.7947536281849963");
        assert_eq!(fmt(2.0), "2");
        assert_eq!(fmt_opt(None), "");
        for &v in &[0.1_f64, 1.0 / 3.0, 2.911844855760707, f64::MIN_POSITIVE] {
            let parsed: f64 = fmt(v).parse().unwrap();
            assert_eq!(parsed.to_bits(), v.to_bits());
        }
    }

    #[test]
    fn manifests_round_trip_to_an_equal_config() {
        let dir = tempfile::tempdir().unwrap();
        let mut config = RunConfig::default();
        config.seed = 123;
        config.train.beta = 3.5;
        let manifest = Manifest::new(
            "ip-train",
            &config,
            vec!["ip_trace.csv".into(), "train_log.csv".into()],
        );
        let path = dir.path().join("manifest.json");
        write_manifest(&manifest, &path).unwrap();
        let back = read_manifest(&path).unwrap();
        assert_eq!(back, manifest);
        assert_eq!(back.config, config);
        assert_eq!(back.seed, 123);
        // No wall-clock in the manifest: writing twice is byte-identical.
        let first = std::fs::read(&path).unwrap();
        write_manifest(&manifest, &path).unwrap();
        assert_eq!(first, std::fs::read(&path).unwrap());
    }

    #[test]
    fn dumps_round_trip_bit_exactly() {
        let dir = tempfile::tempdir().unwrap();
        let pre = Matrix::from_vec(2, 2, vec![0.1 + 0.2, 1.0 / 3.0, -0.0, 5e-324]).unwrap();
        let dump = RepDumpFile {
            epoch: 7,
            noise: ProbeNoise::Gaussian { sigma_sq: 0.2 },
            estimator: IpEstimatorConfig::new(11),
            labels: vec![0, 3, 9],
            recorded: IpRow {
                epoch: 7,
                mi_xz: None,
                kl_mean: Some(0.16576825052522182),
                mi_xz_binning: 1.25,
                mi_yz_binning: 0.5,
                mi_yz_variational: 0.75,
                train_loss: 0.9,
                train_accuracy: 0.5,
                test_accuracy: 0.5,
            },
            pre_noise: pre,
            alpha: None,
        };
        let path = dir.path().join(dump_file_name(7));
        assert_eq!(path.file_name().unwrap(), "rep_epoch_0007.json");
        write_dump(&dump, &path).unwrap();
        let back = read_dump(&path).unwrap();
        assert_eq!(back, dump);
        for (a, b) in back.pre_noise.data().iter().zip(dump.pre_noise.data()) {
            assert_eq!(a.to_bits(), b.to_bits());
        }
    }
}
