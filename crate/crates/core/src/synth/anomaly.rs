use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::data::{quantile_sorted, LabeledDataset};
use crate::error::{Error, Result};
use crate::numeric::matrix::DataMatrix;
use crate::numeric::rng::{derive_seed, Rng};

use super::gmm::{fit_gmm_diag, GmmDiag, GmmOptions};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AnomalyType {
    Local,
    Global,
    Dependency,
    Clustered,
}

impl AnomalyType {
    pub const ALL: [AnomalyType; 4] = [Self::Local, Self::Global, Self::Dependency, Self::Clustered];

    pub fn default_alpha(self) -> f64 {
        match self {
            Self::Local | Self::Clustered => 5.0,
            Self::Global => 1.1,
            Self::Dependency => 1.0,
        }
    }
}

impl fmt::Display for AnomalyType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Local => "local",
            Self::Global => "global",
            Self::Dependency => "dependency",
            Self::Clustered => "clustered",
        })
    }
}

impl FromStr for AnomalyType {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "local" => Ok(Self::Local),
            "global" => Ok(Self::Global),
            "dependency" => Ok(Self::Dependency),
            "clustered" => Ok(Self::Clustered),
            _ => Err(Error::InvalidArgument(format!("unknown anomaly type `{s}`"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AnomalySuiteSpec {
    pub kind: AnomalyType,
    /// Defaults to [`AnomalyType::default_alpha`].
    pub alpha: Option<f64>,
    pub n_normal: usize,
    pub n_anomaly: usize,
    pub n_components: usize,
    pub seed: u64,
}

impl AnomalySuiteSpec {
    pub fn new(kind: AnomalyType, n_normal: usize, n_anomaly: usize, seed: u64) -> Self {
        Self {
            kind,
            alpha: None,
            n_normal,
            n_anomaly,
            n_components: 5,
            seed,
        }
    }

    pub fn alpha(&self) -> f64 {
        self.alpha.unwrap_or(self.kind.default_alpha())
    }
}

/// Silverman's rule of thumb, `0.9 · min(σ, IQR/1.34) · n^(-1/5)`.
pub fn silverman_bandwidth(values: &[f64]) -> f64 {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let sd = (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0).max(1.0)).sqrt();
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let iqr = quantile_sorted(&sorted, 0.75) - quantile_sorted(&sorted, 0.25);
    let spread = if iqr > 0.0 { sd.min(iqr / 1.34) } else { sd };
    0.9 * spread * n.powf(-0.2)
}

/// Each feature drawn independently from its own Gaussian KDE over `x`,
/// which keeps the marginals and breaks the dependence between features.
pub fn independent_kde_sample(x: &DataMatrix, n: usize, rng: &mut Rng) -> DataMatrix {
    let d = x.cols();
    let bandwidths: Vec<f64> = (0..d).map(|j| silverman_bandwidth(&x.column(j))).collect();
    let mut out = DataMatrix::zeros(n, d);
    for r in 0..n {
        let row = out.row_mut(r);
        for j in 0..d {
            let src = rng.below(x.rows());
            row[j] = x[(src, j)] + bandwidths[j] * rng.normal();
        }
    }
    out
}

/// Normal rows plus `n_anomaly` anomalies of the requested type.
///
/// Normals are drawn from a diagonal GMM fitted to `x_seed`, except for
/// dependency anomalies, where the normals are `n_normal` seed rows.
pub fn gen_anomaly_suite(x_seed: &DataMatrix, spec: &AnomalySuiteSpec) -> Result<LabeledDataset> {
    let alpha = spec.alpha();
    if !(alpha > 0.0 && alpha.is_finite()) {
        return Err(Error::InvalidArgument(format!("alpha {alpha} must be positive")));
    }
    if x_seed.rows() < 10 * spec.n_components {
        return Err(Error::NotEnoughRows(x_seed.rows()));
    }
    if spec.n_normal == 0 {
        return Err(Error::TooFewNormals(0));
    }
    let mut rng = Rng::new(derive_seed(spec.seed, 1));
    let (normals, anomalies) = if spec.kind == AnomalyType::Dependency {
        if spec.n_normal > x_seed.rows() {
            return Err(Error::InvalidArgument(format!(
                "{} normals requested from {} seed rows",
                spec.n_normal,
                x_seed.rows()
            )));
        }
        let mut idx = rng.sample_indices(x_seed.rows(), spec.n_normal);
        idx.sort_unstable();
        let normals = x_seed.select_rows(&idx);
        let anomalies = independent_kde_sample(x_seed, spec.n_anomaly, &mut rng);
        (normals, anomalies)
    } else {
        let gmm = fit_gmm_diag(x_seed, spec.n_components, spec.seed, &GmmOptions::default())?.gmm;
        let (normals, _) = gmm.sample(&mut rng, spec.n_normal);
        let anomalies = match spec.kind {
            AnomalyType::Local => {
                let wide = GmmDiag {
                    variances: gmm.variances.iter().map(|v| v.iter().map(|s| s * alpha).collect()).collect(),
                    ..gmm.clone()
                };
                wide.sample(&mut rng, spec.n_anomaly).0
            }
            AnomalyType::Clustered => {
                let moved = GmmDiag {
                    means: gmm.means.iter().map(|m| m.iter().map(|s| s * alpha).collect()).collect(),
                    ..gmm.clone()
                };
                moved.sample(&mut rng, spec.n_anomaly).0
            }
            AnomalyType::Global => {
                let d = normals.cols();
                let mut out = DataMatrix::zeros(spec.n_anomaly, d);
                let bounds: Vec<(f64, f64)> = (0..d)
                    .map(|j| {
                        let col = normals.column(j);
                        let lo = col.iter().copied().fold(f64::INFINITY, f64::min);
                        let hi = col.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                        (alpha * lo, alpha * hi)
                    })
                    .collect();
                for r in 0..spec.n_anomaly {
                    for (v, &(lo, hi)) in out.row_mut(r).iter_mut().zip(&bounds) {
                        *v = rng.uniform_range(lo, hi);
                    }
                }
                out
            }
            AnomalyType::Dependency => unreachable!(),
        };
        (normals, anomalies)
    };
    let labels = (0..spec.n_normal + spec.n_anomaly)
        .map(|i| u8::from(i >= spec.n_normal))
        .collect();
    let mut features = normals.vstack(&anomalies)?;
    if let Some(names) = x_seed.col_names() {
        features = features.with_col_names(names.to_vec())?;
    }
    LabeledDataset::new(features, labels, format!("synthetic_{}", spec.kind))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numeric::linalg::{cholesky, mvn_sample};
    use crate::synth::gaussian::ar_covariance;

    fn seed_rows(n: usize) -> DataMatrix {
        let mut rng = Rng::new(31);
        let rows: Vec<[f64; 3]> = (0..n)
            .map(|i| {
                let c = [[0.0, 0.0, 0.0], [6.0, -2.0, 1.0], [-4.0, 5.0, 3.0]][i % 3];
                [c[0] + rng.normal(), c[1] + 0.7 * rng.normal(), c[2] + 1.3 * rng.normal()]
            })
            .collect();
        DataMatrix::from_rows(&rows).unwrap()
    }

    fn split(ds: &LabeledDataset) -> (DataMatrix, DataMatrix) {
        (
            ds.features.select_rows(&ds.normal_indices()),
            ds.features.select_rows(&ds.anomaly_indices()),
        )
    }

    fn ks_distance(a: &[f64], b: &[f64]) -> f64 {
        let mut a = a.to_vec();
        let mut b = b.to_vec();
        a.sort_by(f64::total_cmp);
        b.sort_by(f64::total_cmp);
        let (mut i, mut j, mut best) = (0, 0, 0.0f64);
        while i < a.len() && j < b.len() {
            if a[i] <= b[j] {
                i += 1;
            } else {
                j += 1;
            }
            best = best.max((i as f64 / a.len() as f64 - j as f64 / b.len() as f64).abs());
        }
        best
    }

    fn corr(x: &DataMatrix, a: usize, b: usize) -> f64 {
        let c = x.covariance();
        c[(a, b)] / (c[(a, a)] * c[(b, b)]).sqrt()
    }

    #[test]
    fn exact_counts_for_every_type() {
        let x = seed_rows(300);
        for kind in AnomalyType::ALL {
            let ds = gen_anomaly_suite(&x, &AnomalySuiteSpec::new(kind, 120, 30, 2)).unwrap();
            assert_eq!((ds.n_normal(), ds.n_anomaly()), (120, 30), "{kind}");
            assert_eq!(ds.features.cols(), 3);
        }
    }

    #[test]
    fn global_within_scaled_range() {
        let x = seed_rows(300);
        let ds = gen_anomaly_suite(&x, &AnomalySuiteSpec::new(AnomalyType::Global, 500, 2000, 3)).unwrap();
        let (normals, anomalies) = split(&ds);
        for j in 0..3 {
            let col = normals.column(j);
            let lo = col.iter().copied().fold(f64::INFINITY, f64::min);
            let hi = col.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            assert!(anomalies.column(j).iter().all(|&v| v >= 1.1 * lo && v <= 1.1 * hi));
        }
    }

    #[test]
    fn local_variance_scaled_by_alpha() {
        // one component: anomaly variance should be α times the normal variance
        let x = seed_rows(300);
        let mut spec = AnomalySuiteSpec::new(AnomalyType::Local, 20_000, 20_000, 4);
        spec.n_components = 1;
        let ds = gen_anomaly_suite(&x, &spec).unwrap();
        let (normals, anomalies) = split(&ds);
        let (cn, ca) = (normals.covariance(), anomalies.covariance());
        for j in 0..3 {
            let r = ca[(j, j)] / cn[(j, j)];
            assert!((4.0..=6.0).contains(&r), "feature {j}: {r}");
        }
    }

    #[test]
    fn clustered_means_scaled() {
        let x = seed_rows(300);
        let mut spec = AnomalySuiteSpec::new(AnomalyType::Clustered, 5000, 5000, 5);
        spec.n_components = 1;
        let ds = gen_anomaly_suite(&x, &spec).unwrap();
        let (_, anomalies) = split(&ds);
        // a single component's mean is the seed-row mean
        let (mn, ma) = (x.column_means(), anomalies.column_means());
        for j in 0..3 {
            assert!((ma[j] - 5.0 * mn[j]).abs() < 0.2, "{} vs {}", ma[j], mn[j]);
        }
    }

    #[test]
    fn dependency_keeps_marginals_breaks_correlation() {
        let cov = ar_covariance(3, 0.9).unwrap();
        let x = mvn_sample(&mut Rng::new(6), &[0.0, 1.0, -2.0], &cholesky(&cov).unwrap(), 10_000).unwrap();
        let ds = gen_anomaly_suite(&x, &AnomalySuiteSpec::new(AnomalyType::Dependency, 10_000, 10_000, 7)).unwrap();
        let (normals, anomalies) = split(&ds);
        let (cn, ca) = (normals.covariance(), anomalies.covariance());
        let (mn, ma) = (normals.column_means(), anomalies.column_means());
        for j in 0..3 {
            assert!(ks_distance(&normals.column(j), &anomalies.column(j)) < 0.05);
            assert!((ca[(j, j)] / cn[(j, j)] - 1.0).abs() < 0.05);
            assert!((ma[j] - mn[j]).abs() < 0.05 * cn[(j, j)].sqrt());
        }
        assert!(corr(&normals, 0, 1) > 0.85);
        assert!(corr(&anomalies, 0, 1).abs() < 0.05);
    }

    #[test]
    fn same_seed_same_suite() {
        let x = seed_rows(120);
        let spec = AnomalySuiteSpec::new(AnomalyType::Local, 50, 10, 9);
        assert_eq!(gen_anomaly_suite(&x, &spec).unwrap(), gen_anomaly_suite(&x, &spec).unwrap());
    }

    #[test]
    fn seed_rows_required() {
        let x = seed_rows(40);
        let spec = AnomalySuiteSpec::new(AnomalyType::Local, 50, 10, 9);
        assert!(matches!(gen_anomaly_suite(&x, &spec), Err(Error::NotEnoughRows(40))));
    }

    #[test]
    fn silverman_on_standard_normal() {
        let x: Vec<f64> = {
            let mut rng = Rng::new(1);
            (0..10_000).map(|_| rng.normal()).collect()
        };
        let h = silverman_bandwidth(&x);
        // 0.9 · 1 · 10000^(-1/5) ≈ 0.142
        assert!((h - 0.142).abs() < 0.01, "{h}");
    }
}
