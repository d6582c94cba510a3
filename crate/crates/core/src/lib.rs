//! Likelihood-based tabular anomaly detection with coupling-layer
//! normalizing flows.
//!
//! The crate is organised bottom-up:
//!
//! - [`numeric`]: seeded RNG, dense linear algebra, MLPs with reverse mode.
//! - [`flow`]: NICE and RealNVP flows, exact log-likelihood, AdamW training.
//! - [`data`]: CSV ingestion, scalers, the 50/50 normal split, model bundles.
//! - [`scoring`]: likelihood, typicality and PCA scorers; AUROC, AUPRC, ranks.
//! - [`counterintuitive`]: the relative-failure test over a competitor cohort.
//! - [`intrinsic_dim`]: TwoNN and MLE intrinsic-dimension estimators.
//! - [`synth`]: AR Gaussians, mean-shifted pairs, GMM-based anomaly suites.
//! - [`theory`]: closed-form Gaussian checks and dimension sweeps.
//! - [`cli`]: the `flowbench` command line.

pub mod cli;
pub mod counterintuitive;
pub mod data;
pub mod error;
pub mod flow;
pub mod intrinsic_dim;
pub mod numeric;
pub mod scoring;
pub mod synth;
pub mod theory;

pub use error::{Error, Result};
pub use numeric::{DataMatrix, Rng};
