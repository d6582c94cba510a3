use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::flow::{FlowModel, TrainConfig};
use crate::numeric::matrix::DataMatrix;

use super::scaler::ScalerState;

pub const FORMAT_VERSION: u32 = 1;

/// A trained flow together with the scaler fitted on its training rows.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelBundle {
    pub format_version: u32,
    pub config: TrainConfig,
    pub scaler: ScalerState,
    pub model: FlowModel,
    /// Mean training NLL, used by the typicality test.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub train_entropy: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub provenance: Option<serde_json::Value>,
}

impl ModelBundle {
    pub fn new(model: FlowModel, scaler: ScalerState, config: TrainConfig) -> Self {
        Self {
            format_version: FORMAT_VERSION,
            config,
            scaler,
            model,
            train_entropy: None,
            provenance: None,
        }
    }

    /// Log-likelihood of raw (unscaled) rows.
    pub fn log_likelihood(&self, x: &DataMatrix) -> Result<Vec<f64>> {
        self.model.log_likelihood(&self.scaler.apply(x)?)
    }
}

/// Writes to a sibling temp file, then renames over `path`.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let file_name = path
        .file_name()
        .ok_or_else(|| Error::InvalidArgument(format!("{} is not a file path", path.display())))?;
    let mut tmp_name = std::ffi::OsString::from(".");
    tmp_name.push(file_name);
    tmp_name.push(format!(".tmp{}", std::process::id()));
    let tmp = path.with_file_name(tmp_name);
    std::fs::write(&tmp, bytes).map_err(|e| Error::io(&tmp, e))?;
    std::fs::rename(&tmp, path).map_err(|e| {
        let _ = std::fs::remove_file(&tmp);
        Error::io(path, e)
    })
}

pub fn save_model(path: &Path, bundle: &ModelBundle) -> Result<()> {
    let json = serde_json::to_vec(bundle)?;
    write_atomic(path, &json)
}

pub fn load_model(path: &Path) -> Result<ModelBundle> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    let value: serde_json::Value =
        serde_json::from_slice(&bytes).map_err(|e| Error::CorruptFile(format!("{}: {e}", path.display())))?;
    let found = value
        .get("format_version")
        .and_then(serde_json::Value::as_u64)
        .ok_or_else(|| Error::CorruptFile(format!("{}: no format_version", path.display())))?;
    if found != u64::from(FORMAT_VERSION) {
        return Err(Error::SchemaVersionMismatch {
            found: found.min(u64::from(u32::MAX)) as u32,
            expected: FORMAT_VERSION,
        });
    }
    // parse from the bytes again: going through Value would lose float exactness
    let bundle: ModelBundle =
        serde_json::from_slice(&bytes).map_err(|e| Error::CorruptFile(format!("{}: {e}", path.display())))?;
    if bundle.scaler.dim() != bundle.model.input_dim {
        return Err(Error::CorruptFile(format!(
            "{}: scaler has {} features, model expects {}",
            path.display(),
            bundle.scaler.dim(),
            bundle.model.input_dim
        )));
    }
    Ok(bundle)
}
