//! `infoplane`: information-plane analysis of dropout networks.
//!
//! Exit code 0 means the run completed and every output was written;
//! otherwise stderr carries one `error[category]: message` line and the
//! exit code identifies the category (config=2, format=3, io=4,
//! compute=5, training=6).

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

use infoplane_cli::config::RunConfig;
use infoplane_cli::error::CliResult;
use infoplane_cli::run;

#[derive(Parser)]
#[command(
    name = "infoplane",
    version,
    about = "Information-plane analysis of dropout networks",
    propagate_version = true
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct CommonArgs {
    /// Run configuration file (TOML); built-in defaults apply when omitted
    #[arg(long, value_name = "FILE")]
    config: Option<PathBuf>,

    /// Root seed; training and estimation derive their streams from it
    #[arg(long)]
    seed: Option<u64>,

    /// Output directory (created if missing)
    #[arg(long, value_name = "DIR")]
    out: Option<PathBuf>,
}

impl CommonArgs {
    fn load(&self) -> CliResult<RunConfig> {
        let mut cfg = RunConfig::load(self.config.as_deref())?;
        if let Some(seed) = self.seed {
            cfg.seed = seed;
        }
        if let Some(out) = &self.out {
            cfg.out_dir = out.clone();
        }
        Ok(cfg)
    }
}

#[derive(Subcommand)]
enum Command {
    /// Convergence study of the estimators on the affine toy problem
    ToyConvergence {
        #[command(flatten)]
        common: CommonArgs,

        /// Noise standard deviation
        #[arg(long)]
        sigma: Option<f64>,

        /// Replace the bin sweep with this single bins-per-dimension value
        #[arg(long)]
        bins: Option<usize>,

        /// Noise masks drawn per input
        #[arg(long)]
        masks: Option<usize>,

        /// Cap on mixture components (0 = use every sample)
        #[arg(long)]
        max_components: Option<usize>,
    },

    /// Train a dropout classifier on IDX data and trace its information plane
    IpTrain {
        #[command(flatten)]
        common: CommonArgs,

        /// Training samples kept from the dataset
        #[arg(long)]
        limit: Option<usize>,

        /// Noise standard deviation (the layer applies variance sigma²)
        #[arg(long)]
        sigma: Option<f64>,

        /// Weight of the noise KL penalty (information dropout)
        #[arg(long)]
        beta: Option<f64>,

        /// Noise masks drawn per probe input
        #[arg(long)]
        masks: Option<usize>,

        /// Cap on mixture components at probe epochs
        #[arg(long)]
        max_components: Option<usize>,

        /// Bins per dimension for the binning baselines
        #[arg(long)]
        bins: Option<usize>,
    },

    /// Re-run estimation from a saved representation dump and verify it
    Estimate {
        /// A rep_epoch_*.json dump written by ip-train
        dump: PathBuf,

        #[command(flatten)]
        common: CommonArgs,
    },

    /// Render an information-plane SVG from a trace CSV
    Plot {
        /// An ip_trace.csv written by ip-train
        csv: PathBuf,

        #[command(flatten)]
        common: CommonArgs,
    },
}

fn dispatch(cli: Cli) -> CliResult<()> {
    match cli.command {
        Command::ToyConvergence {
            common,
            sigma,
            bins,
            masks,
            max_components,
        } => {
            let mut cfg = common.load()?;
            if let Some(v) = sigma {
                cfg.toy.sigma = v;
            }
            if let Some(b) = bins {
                cfg.toy.bin_sweep = vec![b];
            }
            if let Some(m) = masks {
                cfg.toy.masks_per_input = m;
            }
            if let Some(k) = max_components {
                cfg.toy.max_components = k;
            }
            run::toy_convergence(&cfg)
        }
        Command::IpTrain {
            common,
            limit,
            sigma,
            beta,
            masks,
            max_components,
            bins,
        } => {
            let mut cfg = common.load()?;
            if let Some(n) = limit {
                cfg.train.limit = n;
            }
            if let Some(v) = sigma {
                cfg.train.sigma_sq = v * v;
            }
            if let Some(b) = beta {
                cfg.train.beta = b;
            }
            if let Some(m) = masks {
                cfg.estimator.masks_per_input = m;
            }
            if let Some(k) = max_components {
                cfg.estimator.max_components = k;
            }
            if let Some(b) = bins {
                cfg.estimator.bins_per_dimension = b;
            }
            run::ip_train(&cfg)
        }
        Command::Estimate { dump, common } => {
            let cfg = common.load()?;
            run::estimate(&cfg, &dump)
        }
        Command::Plot { csv, common } => {
            let cfg = common.load()?;
            run::plot(&cfg, &csv)
        }
    }
}

fn main() {
    let cli = Cli::parse();
    if let Err(err) = dispatch(cli) {
        eprintln!("error[{}]: {}", err.category(), err);
        std::process::exit(err.exit_code());
    }
}
