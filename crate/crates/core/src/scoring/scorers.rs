use serde::{Deserialize, Serialize};

use crate::data::ScalerState;
use crate::error::{Error, Result};
use crate::flow::FlowModel;
use crate::numeric::linalg::sym_eigen;
use crate::numeric::matrix::DataMatrix;

/// Per-row anomaly scores; higher means more anomalous.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScoreVector {
    pub scorer: String,
    pub values: Vec<f64>,
}

impl ScoreVector {
    pub fn new(scorer: impl Into<String>, values: Vec<f64>) -> Self {
        Self {
            scorer: scorer.into(),
            values,
        }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// Negative log-likelihood of the scaled rows.
pub fn slt_score(model: &FlowModel, scaler: &ScalerState, x: &DataMatrix) -> Result<ScoreVector> {
    let ll = model.log_likelihood(&scaler.apply(x)?)?;
    Ok(ScoreVector::new("slt", ll.into_iter().map(|v| -v).collect()))
}

/// Mean NLL over the training rows, the entropy estimate the typicality test
/// compares against.
pub fn entropy_estimate(model: &FlowModel, scaler: &ScalerState, x_train: &DataMatrix) -> Result<f64> {
    if x_train.rows() == 0 {
        return Err(Error::EmptyDataset);
    }
    Ok(slt_score(model, scaler, x_train)?.values.iter().sum::<f64>() / x_train.rows() as f64)
}

/// Distance of each row's NLL from the training entropy estimate.
pub fn typicality_score(
    model: &FlowModel,
    scaler: &ScalerState,
    x_train: &DataMatrix,
    x: &DataMatrix,
) -> Result<ScoreVector> {
    let h = entropy_estimate(model, scaler, x_train)?;
    let nll = slt_score(model, scaler, x)?.values;
    Ok(ScoreVector::new("typicality", typicality_from_nll(&nll, h)))
}

pub fn typicality_from_nll(nll: &[f64], entropy: f64) -> Vec<f64> {
    nll.iter().map(|v| (v - entropy).abs()).collect()
}

/// Principal subspace fitted on training rows.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PcaModel {
    pub mean: Vec<f64>,
    /// Retained eigenvectors as columns, `d × k`.
    pub components: DataMatrix,
}

impl PcaModel {
    pub fn fit(x_train: &DataMatrix, component_ratio: f64) -> Result<Self> {
        if !(component_ratio > 0.0 && component_ratio <= 1.0) {
            return Err(Error::InvalidArgument(format!("component ratio {component_ratio} outside (0, 1]")));
        }
        if x_train.rows() < 2 {
            return Err(Error::NotEnoughRows(x_train.rows()));
        }
        let d = x_train.cols();
        let k = ((component_ratio * d as f64).ceil() as usize).clamp(1, d);
        let (_, vecs) = sym_eigen(&x_train.covariance())?;
        let keep: Vec<f64> = (0..d).flat_map(|i| vecs.row(i)[..k].to_vec()).collect();
        Ok(Self {
            mean: x_train.column_means(),
            components: DataMatrix::from_vec(d, k, keep)?,
        })
    }

    pub fn n_components(&self) -> usize {
        self.components.cols()
    }

    /// Squared distance from each row to the fitted affine subspace.
    pub fn reconstruction_error(&self, x: &DataMatrix) -> Result<Vec<f64>> {
        let d = self.mean.len();
        if x.cols() != d {
            return Err(Error::dim(d, x.cols()));
        }
        if self.n_components() == d {
            // the full basis reconstructs exactly
            return Ok(vec![0.0; x.rows()]);
        }
        let mut centered = x.clone();
        for r in 0..centered.rows() {
            for (v, m) in centered.row_mut(r).iter_mut().zip(&self.mean) {
                *v -= m;
            }
        }
        let coeffs = centered.matmul(&self.components)?;
        let recon = coeffs.matmul(&self.components.transpose())?;
        Ok((0..x.rows())
            .map(|r| {
                centered
                    .row(r)
                    .iter()
                    .zip(recon.row(r))
                    .map(|(a, b)| (a - b).powi(2))
                    .sum()
            })
            .collect())
    }
}

pub fn pca_baseline_score(x_train: &DataMatrix, x: &DataMatrix, component_ratio: f64) -> Result<ScoreVector> {
    let pca = PcaModel::fit(x_train, component_ratio)?;
    Ok(ScoreVector::new("pca", pca.reconstruction_error(x)?))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{fit_scaler, ScalerKind};
    use crate::flow::{build_flow, train_flow, FlowKind, TrainConfig};
    use crate::numeric::rng::{standard_normal_sample, Rng};

    fn plane_data() -> DataMatrix {
        let mut rng = Rng::new(3);
        let rows: Vec<[f64; 3]> = (0..50)
            .map(|_| {
                let (a, b) = (rng.normal(), rng.normal());
                [a + b, a - b, 0.0]
            })
            .collect();
        DataMatrix::from_rows(&rows).unwrap()
    }

    #[test]
    fn slt_orders_by_likelihood() {
        let cfg = TrainConfig::default();
        let m = build_flow(FlowKind::Nice, 1, &cfg, &mut Rng::new(0)).unwrap();
        // identity flow: log p(x) = -ln(2π)/2 - x²/2
        let x = DataMatrix::from_vec(2, 1, vec![0.5, 2.9]).unwrap();
        let s = slt_score(&m, &ScalerState::identity(1), &x).unwrap();
        assert!(s.values[0] < s.values[1]);
        let ll = m.log_likelihood(&x).unwrap();
        assert_eq!(s.values, ll.iter().map(|v| -v).collect::<Vec<_>>());
    }

    #[test]
    fn slt_flags_far_outlier() {
        let mut x = standard_normal_sample(&mut Rng::new(1), 500, 2);
        let cfg = TrainConfig {
            epochs: 20,
            batch_size: 100,
            n_coupling: 4,
            hidden_dim: 16,
            n_hidden_layers: 1,
            ..TrainConfig::default()
        };
        let (m, _) = train_flow(FlowKind::RealNvp, &x, &cfg).unwrap();
        let sc = fit_scaler(&x, ScalerKind::None).unwrap();
        let mut train_scores = slt_score(&m, &sc, &x).unwrap().values;
        train_scores.sort_by(f64::total_cmp);
        let median = train_scores[train_scores.len() / 2];
        let far = DataMatrix::from_vec(1, 2, vec![20.0, 0.0]).unwrap();
        assert!(slt_score(&m, &sc, &far).unwrap().values[0] > median);
        // row order does not change any row's score
        let perm = Rng::new(7).permutation(x.rows());
        x = x.select_rows(&perm);
        let permuted = slt_score(&m, &sc, &x).unwrap().values;
        let mut sorted = permuted.clone();
        sorted.sort_by(f64::total_cmp);
        assert_eq!(sorted, train_scores);
    }

    #[test]
    fn typicality_is_distance_from_entropy() {
        let h = 3.0;
        assert_eq!(typicality_from_nll(&[3.0], h), vec![0.0]);
        let s = typicality_from_nll(&[3.0 - 1.25, 3.0 + 1.25], h);
        assert_eq!(s[0], s[1]);
        // a high-density point (NLL far below the entropy) looks more atypical
        // than a point sitting at the typical NLL
        let s = typicality_from_nll(&[0.5, 3.1], h);
        assert!(s[0] > s[1]);
    }

    #[test]
    fn typicality_is_nll_gap_per_row() {
        let x = standard_normal_sample(&mut Rng::new(4), 20, 2);
        let cfg = TrainConfig::default();
        let m = build_flow(FlowKind::Nice, 2, &cfg, &mut Rng::new(0)).unwrap();
        let sc = ScalerState::identity(2);
        let h = entropy_estimate(&m, &sc, &x).unwrap();
        let t = typicality_score(&m, &sc, &x, &x).unwrap();
        let nll = slt_score(&m, &sc, &x).unwrap().values;
        for (ti, ni) in t.values.iter().zip(nll) {
            assert_eq!(*ti, (ni - h).abs());
        }
    }

    #[test]
    fn pca_in_plane_scores_zero() {
        let x = plane_data();
        let s = pca_baseline_score(&x, &x, 0.6).unwrap();
        assert!(s.values.iter().all(|&v| v < 1e-20));
        let off = DataMatrix::from_rows(&[[1.0, 2.0, 3.0]]).unwrap();
        let mean = x.column_means();
        let s = pca_baseline_score(&x, &off, 0.6).unwrap();
        // residual is the third coordinate relative to the mean
        assert!((s.values[0] - (3.0 - mean[2]).powi(2)).abs() < 1e-10);
        assert!((s.values[0] - 9.0).abs() < 1e-10);
    }

    #[test]
    fn pca_full_basis_scores_zero() {
        let x = standard_normal_sample(&mut Rng::new(5), 30, 4);
        let s = pca_baseline_score(&x, &x, 1.0).unwrap();
        assert!(s.values.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn pca_component_count() {
        let x = standard_normal_sample(&mut Rng::new(5), 30, 10);
        assert_eq!(PcaModel::fit(&x, 0.8).unwrap().n_components(), 8);
        assert_eq!(PcaModel::fit(&x, 0.01).unwrap().n_components(), 1);
        assert_eq!(PcaModel::fit(&x, 0.75).unwrap().n_components(), 8);
    }

    #[test]
    fn pca_needs_two_rows() {
        let x = DataMatrix::zeros(1, 3);
        assert!(matches!(pca_baseline_score(&x, &x, 0.8), Err(Error::NotEnoughRows(1))));
    }
}
