//! NICE and RealNVP coupling flows with maximum-likelihood training.

pub mod config;
pub mod model;
pub mod optim;
pub mod train;

pub use config::TrainConfig;
pub use model::{build_flow, CouplingLayer, FlowGrads, FlowKind, FlowModel, FlowOutput, Parity};
pub use optim::{cosine_warm_restart_lr, AdamW};
pub use train::{fit, train_flow, train_flow_with_partial, Diverged, LossHistory};
