//! Deterministic numerical substrate shared by every other module.

pub mod linalg;
pub mod matrix;
pub mod mlp;
pub mod oracle;
pub mod rng;

pub use linalg::{cholesky, mvn_sample, pairwise_sq_dists, sym_eigen};
pub use matrix::DataMatrix;
pub use mlp::{Activation, Linear, Mlp, MlpGrads};
pub use oracle::{finite_difference_gradient, relative_error};
pub use rng::{derive_seed, standard_normal_sample, Rng};
