//! Command-line surface for the information-plane toolkit: run
//! configuration, IDX dataset ingestion, deterministic CSV/JSON
//! emission, and static SVG plots. The binary (`infoplane`) is a thin
//! dispatcher over [`run`]; everything else is a library so tests can
//! reach the internals.

pub mod config;
pub mod emit;
pub mod error;
pub mod idx;
pub mod run;
pub mod svg;

pub use config::{NetworkKind, ProbeSourceConfig, RunConfig};
pub use emit::{read_dump, read_manifest, write_dump, Manifest, ProbeNoise, RepDumpFile};
pub use error::{CliError, CliResult};
pub use idx::{load_idx, IdxDataset};
