//! Synthetic data: AR-covariance and isotropic Gaussians, the
//! dimension-sweep pairs, and GMM/KDE-based anomaly suites.

pub mod anomaly;
pub mod gaussian;
pub mod gmm;

pub use anomaly::{gen_anomaly_suite, independent_kde_sample, silverman_bandwidth, AnomalySuiteSpec, AnomalyType};
pub use gaussian::{
    ar_covariance, dimension_sweep_dataset, gen_gaussian_pair, Covariance, GaussianSpec, IsotropicPair, SweepCell,
    DEFAULT_SWEEP_DIMS,
};
pub use gmm::{fit_gmm_diag, GmmDiag, GmmFit, GmmOptions, VARIANCE_FLOOR};
