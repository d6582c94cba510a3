//! CSV ingestion, feature scaling, the half-normals train/test split and
//! model persistence.

pub mod bundle;
pub mod dataset;
pub mod scaler;
pub mod split;

pub use bundle::{load_model, save_model, write_atomic, ModelBundle, FORMAT_VERSION};
pub use dataset::{load_csv, read_csv, write_csv, LabeledDataset};
pub use scaler::{apply_scaler, fit_scaler, quantile_sorted, ScalerKind, ScalerState};
pub use split::{split_zong, split_zong_indices, SplitIndices, SplitSpec};
