use serde::{Deserialize, Serialize};

use crate::data::LabeledDataset;
use crate::error::{Error, Result};
use crate::numeric::linalg::{cholesky, mvn_sample};
use crate::numeric::matrix::DataMatrix;
use crate::numeric::rng::{derive_seed, Rng};

/// Dimensions of the dimension sweep, smallest first.
pub const DEFAULT_SWEEP_DIMS: [usize; 8] = [10, 50, 100, 500, 1000, 5000, 10000, 15000];

/// `Σ[i][j] = ρ^|i-j|`.
pub fn ar_covariance(d: usize, rho: f64) -> Result<DataMatrix> {
    if !(0.0..1.0).contains(&rho) {
        return Err(Error::RhoOutOfRange(rho));
    }
    if d == 0 {
        return Err(Error::InvalidArgument("dimension 0".into()));
    }
    let mut m = DataMatrix::zeros(d, d);
    for i in 0..d {
        for j in 0..d {
            m[(i, j)] = rho.powi(i.abs_diff(j) as i32);
        }
    }
    Ok(m)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Covariance {
    /// `σ² I`.
    Isotropic(f64),
    /// Lower Cholesky factor of `Σ`.
    Full(DataMatrix),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GaussianSpec {
    pub mean: Vec<f64>,
    pub cov: Covariance,
}

impl GaussianSpec {
    /// `N(μ·1, σ² I)` in `d` dimensions.
    pub fn isotropic(d: usize, mu: f64, sigma: f64) -> Result<Self> {
        if !(sigma > 0.0 && sigma.is_finite()) {
            return Err(Error::InvalidArgument(format!("sigma {sigma} must be positive")));
        }
        Ok(Self {
            mean: vec![mu; d],
            cov: Covariance::Isotropic(sigma),
        })
    }

    pub fn full(mean: Vec<f64>, cov: &DataMatrix) -> Result<Self> {
        if cov.rows() != mean.len() {
            return Err(Error::dim(mean.len(), cov.rows()));
        }
        Ok(Self {
            mean,
            cov: Covariance::Full(cholesky(cov)?),
        })
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn sample(&self, rng: &mut Rng, n: usize) -> Result<DataMatrix> {
        match &self.cov {
            Covariance::Isotropic(sigma) => {
                let d = self.dim();
                let mut values = Vec::with_capacity(n * d);
                for _ in 0..n {
                    values.extend(self.mean.iter().map(|m| m + sigma * rng.normal()));
                }
                DataMatrix::from_vec(n, d, values)
            }
            Covariance::Full(chol) => mvn_sample(rng, &self.mean, chol, n),
        }
    }
}

/// Training rows from `p`; a test set of `n_test_each` rows from `p`
/// (label 0) followed by `n_test_each` rows from `q` (label 1).
pub fn gen_gaussian_pair(
    p: &GaussianSpec,
    q: &GaussianSpec,
    n_train: usize,
    n_test_each: usize,
    seed: u64,
) -> Result<(DataMatrix, LabeledDataset)> {
    if p.dim() != q.dim() {
        return Err(Error::dim(p.dim(), q.dim()));
    }
    let mut rng = Rng::new(seed);
    let train = p.sample(&mut rng, n_train)?;
    let test = p.sample(&mut rng, n_test_each)?.vstack(&q.sample(&mut rng, n_test_each)?)?;
    let labels = (0..2 * n_test_each).map(|i| u8::from(i >= n_test_each)).collect();
    Ok((train, LabeledDataset::new(test, labels, "gaussian_pair")?))
}

/// Scalar description of an isotropic pair, broadcast to any dimension.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct IsotropicPair {
    pub mu_p: f64,
    pub sigma_p: f64,
    pub mu_q: f64,
    pub sigma_q: f64,
}

impl Default for IsotropicPair {
    fn default() -> Self {
        Self {
            mu_p: 5.0,
            sigma_p: 1.0,
            mu_q: 2.5,
            sigma_q: 1.0,
        }
    }
}

/// One dimension of a sweep; generates its data on demand.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepCell {
    pub dim: usize,
    pub seed: u64,
    pub p: GaussianSpec,
    pub q: GaussianSpec,
}

impl SweepCell {
    pub fn generate(&self, n_train: usize, n_test_each: usize) -> Result<(DataMatrix, LabeledDataset)> {
        gen_gaussian_pair(&self.p, &self.q, n_train, n_test_each, self.seed)
    }
}

/// Per-dimension specs with seeds derived from `seed` and the dimension.
pub fn dimension_sweep_dataset(base: &IsotropicPair, dims: &[usize], seed: u64) -> Result<Vec<SweepCell>> {
    if dims.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::InvalidArgument("dimensions must be strictly ascending".into()));
    }
    dims.iter()
        .map(|&d| {
            Ok(SweepCell {
                dim: d,
                seed: derive_seed(seed, d as u64),
                p: GaussianSpec::isotropic(d, base.mu_p, base.sigma_p)?,
                q: GaussianSpec::isotropic(d, base.mu_q, base.sigma_q)?,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numeric::rng::Rng;
    use proptest::prelude::*;

    #[test]
    fn ar_examples() {
        assert_eq!(ar_covariance(4, 0.0).unwrap(), DataMatrix::identity(4));
        let m = ar_covariance(3, 0.5).unwrap();
        assert_eq!(m.as_slice(), &[1.0, 0.5, 0.25, 0.5, 1.0, 0.5, 0.25, 0.5, 1.0]);
        assert!(matches!(ar_covariance(3, 1.0), Err(Error::RhoOutOfRange(_))));
        assert!(matches!(ar_covariance(3, -0.1), Err(Error::RhoOutOfRange(_))));
    }

    #[test]
    fn pair_layout() {
        let p = GaussianSpec::isotropic(3, 0.0, 1.0).unwrap();
        let q = GaussianSpec::isotropic(3, 10.0, 1.0).unwrap();
        let (train, test) = gen_gaussian_pair(&p, &q, 20, 5, 1).unwrap();
        assert_eq!(train.shape(), (20, 3));
        assert_eq!(test.labels, vec![0, 0, 0, 0, 0, 1, 1, 1, 1, 1]);
        assert!(test.features.row(7).iter().all(|&v| v > 4.0));
        let r = GaussianSpec::isotropic(2, 0.0, 1.0).unwrap();
        assert!(matches!(gen_gaussian_pair(&p, &r, 1, 1, 0), Err(Error::DimMismatch { .. })));
    }

    #[test]
    fn full_covariance_sampling() {
        let spec = GaussianSpec::full(vec![1.0, -1.0], &ar_covariance(2, 0.8).unwrap()).unwrap();
        let x = spec.sample(&mut Rng::new(2), 20_000).unwrap();
        let c = x.covariance();
        assert!((c[(0, 1)] - 0.8).abs() < 0.03);
        assert!((x.column_means()[1] + 1.0).abs() < 0.03);
    }

    #[test]
    fn sweep_cells() {
        let cells = dimension_sweep_dataset(&IsotropicPair::default(), &[10], 3).unwrap();
        assert_eq!(cells.len(), 1);
        assert_eq!(cells[0].p.dim(), 10);
        let all = dimension_sweep_dataset(&IsotropicPair::default(), &DEFAULT_SWEEP_DIMS, 3).unwrap();
        let mut seeds: Vec<u64> = all.iter().map(|c| c.seed).collect();
        assert_eq!(all, dimension_sweep_dataset(&IsotropicPair::default(), &DEFAULT_SWEEP_DIMS, 3).unwrap());
        seeds.sort_unstable();
        seeds.dedup();
        assert_eq!(seeds.len(), 8);
        assert!(dimension_sweep_dataset(&IsotropicPair::default(), &[50, 10], 3).is_err());
    }

    proptest! {
        #[test]
        fn ar_is_symmetric_unit_diagonal_and_factorizes(d in 1usize..40, rho in 0.0f64..0.999) {
            let m = ar_covariance(d, rho).unwrap();
            for i in 0..d {
                prop_assert_eq!(m[(i, i)], 1.0);
                for j in 0..d {
                    prop_assert_eq!(m[(i, j)], m[(j, i)]);
                }
            }
            prop_assert!(cholesky(&m).is_ok());
        }
    }
}
