//! Self-describing network checkpoints (versioned JSON).

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use infoplane_core::Real;

use crate::network::Network;

/// Checkpoint layout revision written by this build.
pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Debug, thiserror::Error)]
pub enum CheckpointError {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("malformed checkpoint {path}: {source}")]
    Malformed {
        path: String,
        #[source]
        source: serde_json::Error,
    },
    #[error("unsupported checkpoint version {got} in {path} (this build reads {supported})")]
    Version {
        path: String,
        got: u32,
        supported: u32,
    },
}

#[derive(Serialize, Deserialize)]
#[serde(bound(serialize = "S: Serialize", deserialize = "S: serde::de::DeserializeOwned"))]
struct Envelope<S> {
    format_version: u32,
    /// Scalar the parameters were trained in ("f32"/"f64").
    scalar: String,
    network: Network<S>,
}

/// Writes `net` (layer specs, parameters, seed metadata) to `path`.
pub fn save_checkpoint<S: Real + Serialize>(
    net: &Network<S>,
    path: &Path,
) -> Result<(), CheckpointError> {
    let envelope = Envelope {
        format_version: CHECKPOINT_VERSION,
        scalar: S::NAME.to_string(),
        network: net.clone(),
    };
    let body = serde_json::to_string(&envelope).map_err(|source| CheckpointError::Malformed {
        path: path.display().to_string(),
        source,
    })?;
    fs::write(path, body).map_err(|source| CheckpointError::Io {
        path: path.display().to_string(),
        source,
    })
}

/// Reads a checkpoint written by [`save_checkpoint`] with the same
/// scalar type.
pub fn load_checkpoint<S: Real + serde::de::DeserializeOwned>(
    path: &Path,
) -> Result<Network<S>, CheckpointError> {
    let body = fs::read_to_string(path).map_err(|source| CheckpointError::Io {
        path: path.display().to_string(),
        source,
    })?;
    // Version gate first, so a future layout change fails cleanly.
    #[derive(Deserialize)]
    struct Head {
        format_version: u32,
    }
    let head: Head =
        serde_json::from_str(&body).map_err(|source| CheckpointError::Malformed {
            path: path.display().to_string(),
            source,
        })?;
    if head.format_version != CHECKPOINT_VERSION {
        return Err(CheckpointError::Version {
            path: path.display().to_string(),
            got: head.format_version,
            supported: CHECKPOINT_VERSION,
        });
    }
    let envelope: Envelope<S> =
        serde_json::from_str(&body).map_err(|source| CheckpointError::Malformed {
            path: path.display().to_string(),
            source,
        })?;
    Ok(envelope.network)
}
