//! Intrinsic-dimension estimators (TwoNN and Levina–Bickel MLE) and the
//! ratio of estimated to ambient dimension.

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::{fit_scaler, ScalerKind};
use crate::error::{Error, Result};
use crate::numeric::matrix::DataMatrix;
use crate::numeric::rng::{derive_seed, Rng};

/// Fewest usable points an estimate is computed from.
pub const MIN_USABLE_POINTS: usize = 10;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum IdMethod {
    TwoNn,
    Mle,
}

impl fmt::Display for IdMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::TwoNn => "twonn",
            Self::Mle => "mle",
        })
    }
}

impl FromStr for IdMethod {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "twonn" => Ok(Self::TwoNn),
            "mle" => Ok(Self::Mle),
            _ => Err(Error::InvalidArgument(format!("unknown estimator `{s}`"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IdEstimate {
    pub method: IdMethod,
    pub value: f64,
    /// `k` for MLE, the discarded top fraction for TwoNN.
    pub param: f64,
    pub n_points: usize,
    pub seed: u64,
}

/// Euclidean distances from each row to its `k` nearest other rows,
/// ascending. Brute force.
pub fn knn_distances(x: &DataMatrix, k: usize) -> Result<Vec<Vec<f64>>> {
    let n = x.rows();
    if k == 0 || k >= n {
        return Err(Error::KTooLarge { k, rows: n });
    }
    Ok((0..n)
        .into_par_iter()
        .map(|i| {
            let xi = x.row(i);
            let mut d2: Vec<f64> = (0..n)
                .filter(|&j| j != i)
                .map(|j| xi.iter().zip(x.row(j)).map(|(a, b)| (a - b) * (a - b)).sum())
                .collect();
            d2.select_nth_unstable_by(k - 1, f64::total_cmp);
            d2.truncate(k);
            d2.sort_by(f64::total_cmp);
            d2.into_iter().map(f64::sqrt).collect()
        })
        .collect())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TwoNnFit {
    /// Least-squares line through the origin of `-ln(1 - F(μ))` against
    /// `ln μ` over the kept points.
    Regression,
    /// `N_kept / Σ ln μ` over the kept points.
    ClosedForm,
}

/// TwoNN with the default regression fit.
pub fn twonn_estimate(x: &DataMatrix, discard_top: f64, seed: u64) -> Result<IdEstimate> {
    twonn_estimate_with(x, discard_top, TwoNnFit::Regression, seed)
}

pub fn twonn_estimate_with(x: &DataMatrix, discard_top: f64, fit: TwoNnFit, seed: u64) -> Result<IdEstimate> {
    if !(0.0..1.0).contains(&discard_top) {
        return Err(Error::InvalidArgument(format!("discard fraction {discard_top} outside [0, 1)")));
    }
    if x.rows() < 3 {
        return Err(Error::DegenerateData(format!("{} rows", x.rows())));
    }
    let nn = knn_distances(x, 2)?;
    let mut mu: Vec<f64> = nn
        .iter()
        .filter(|r| r[0] > 0.0)
        .map(|r| r[1] / r[0])
        .filter(|&m| m != 1.0)
        .collect();
    let value = twonn_from_ratios(&mut mu, discard_top, fit)?;
    Ok(IdEstimate {
        method: IdMethod::TwoNn,
        value,
        param: discard_top,
        n_points: mu.len(),
        seed,
    })
}

/// TwoNN estimate from second-to-first neighbour distance ratios.
pub fn twonn_from_ratios(mu: &mut [f64], discard_top: f64, fit: TwoNnFit) -> Result<f64> {
    let n = mu.len();
    if n < MIN_USABLE_POINTS {
        return Err(Error::DegenerateData(format!("only {n} usable points")));
    }
    mu.sort_by(f64::total_cmp);
    let kept = ((1.0 - discard_top) * n as f64).floor() as usize;
    if kept < MIN_USABLE_POINTS {
        return Err(Error::DegenerateData(format!("only {kept} points after trimming")));
    }
    let value = match fit {
        TwoNnFit::ClosedForm => kept as f64 / mu[..kept].iter().map(|m| m.ln()).sum::<f64>(),
        TwoNnFit::Regression => {
            let (mut sxy, mut sxx) = (0.0, 0.0);
            for (i, m) in mu[..kept].iter().enumerate() {
                let x = m.ln();
                let y = -(1.0 - i as f64 / n as f64).ln();
                sxy += x * y;
                sxx += x * x;
            }
            sxy / sxx
        }
    };
    if !(value.is_finite() && value > 0.0) {
        return Err(Error::DegenerateData(format!("estimate {value}")));
    }
    Ok(value)
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Aggregation {
    /// Inverse of the mean inverse local estimate.
    #[default]
    MacKay,
    Mean,
}

impl FromStr for Aggregation {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "mackay" => Ok(Self::MacKay),
            "mean" => Ok(Self::Mean),
            _ => Err(Error::InvalidArgument(format!("unknown aggregation `{s}`"))),
        }
    }
}

/// Levina–Bickel estimate with `k` neighbours.
///
/// Points with a zero neighbour distance are skipped; if more than half the
/// points are skipped the data is reported as degenerate.
pub fn mle_estimate(x: &DataMatrix, k: usize, aggregation: Aggregation, seed: u64) -> Result<IdEstimate> {
    if k < 2 {
        return Err(Error::InvalidArgument(format!("k = {k}, need at least 2")));
    }
    let nn = knn_distances(x, k)?;
    // inverse local estimates: mean over j < k of ln(T_k / T_j)
    let inv: Vec<f64> = nn
        .iter()
        .filter(|t| t[0] > 0.0)
        .map(|t| t[..k - 1].iter().map(|tj| (t[k - 1] / tj).ln()).sum::<f64>() / (k - 1) as f64)
        .filter(|&v| v > 0.0)
        .collect();
    if inv.len() < MIN_USABLE_POINTS || 2 * inv.len() < x.rows() {
        return Err(Error::DegenerateData(format!(
            "{} of {} points have distinct neighbours",
            inv.len(),
            x.rows()
        )));
    }
    let n = inv.len() as f64;
    let value = match aggregation {
        Aggregation::MacKay => n / inv.iter().sum::<f64>(),
        Aggregation::Mean => inv.iter().map(|v| 1.0 / v).sum::<f64>() / n,
    };
    Ok(IdEstimate {
        method: IdMethod::Mle,
        value,
        param: k as f64,
        n_points: inv.len(),
        seed,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DRatio {
    pub estimate: f64,
    pub ambient: usize,
    pub ratio: f64,
}

pub fn d_ratio(estimate: f64, ambient: usize) -> Result<DRatio> {
    if ambient == 0 {
        return Err(Error::InvalidArgument("ambient dimension 0".into()));
    }
    Ok(DRatio {
        estimate,
        ambient,
        ratio: estimate / ambient as f64,
    })
}

/// Estimator selection shared by the robustness protocol and the CLI.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum Estimator {
    TwoNn { discard_top: f64 },
    Mle { k: usize, aggregation: Aggregation },
}

impl Estimator {
    pub fn estimate(&self, x: &DataMatrix, seed: u64) -> Result<IdEstimate> {
        match *self {
            Self::TwoNn { discard_top } => twonn_estimate(x, discard_top, seed),
            Self::Mle { k, aggregation } => mle_estimate(x, k, aggregation, seed),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RobustnessSpec {
    pub ratios: Vec<f64>,
    pub scalers: Vec<ScalerKind>,
    pub estimator: Estimator,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RobustnessCell {
    pub ratio: f64,
    pub scaler: ScalerKind,
    pub estimate: IdEstimate,
}

/// One estimate per (sub-sampling ratio, scaler). Every scaler sees the same
/// subsample for a given ratio.
pub fn robustness_suite(x: &DataMatrix, spec: &RobustnessSpec, seed: u64) -> Result<Vec<RobustnessCell>> {
    let mut out = Vec::with_capacity(spec.ratios.len() * spec.scalers.len());
    for (ri, &ratio) in spec.ratios.iter().enumerate() {
        if !(ratio > 0.0 && ratio <= 1.0) {
            return Err(Error::InvalidArgument(format!("subsample ratio {ratio} outside (0, 1]")));
        }
        let m = ((ratio * x.rows() as f64).round() as usize).max(1);
        let sub = if m == x.rows() {
            x.clone()
        } else {
            let mut idx = Rng::new(derive_seed(seed, ri as u64)).sample_indices(x.rows(), m);
            idx.sort_unstable();
            x.select_rows(&idx)
        };
        for &scaler in &spec.scalers {
            let scaled = fit_scaler(&sub, scaler)?.apply(&sub)?;
            out.push(RobustnessCell {
                ratio,
                scaler,
                estimate: spec.estimator.estimate(&scaled, seed)?,
            });
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numeric::linalg::{cholesky, mvn_sample};
    use crate::numeric::rng::{standard_normal_sample, Rng};
    use proptest::prelude::*;

    fn brute_knn(x: &DataMatrix, k: usize) -> Vec<Vec<f64>> {
        (0..x.rows())
            .map(|i| {
                let mut d: Vec<f64> = (0..x.rows())
                    .filter(|&j| j != i)
                    .map(|j| {
                        x.row(i)
                            .iter()
                            .zip(x.row(j))
                            .map(|(a, b)| (a - b) * (a - b))
                            .sum::<f64>()
                            .sqrt()
                    })
                    .collect();
                d.sort_by(f64::total_cmp);
                d.truncate(k);
                d
            })
            .collect()
    }

    fn ar(d: usize, rho: f64, n: usize, seed: u64) -> DataMatrix {
        let cov = DataMatrix::from_vec(
            d,
            d,
            (0..d * d).map(|i| rho.powi((i / d).abs_diff(i % d) as i32)).collect(),
        )
        .unwrap();
        mvn_sample(&mut Rng::new(seed), &vec![0.0; d], &cholesky(&cov).unwrap(), n).unwrap()
    }

    #[test]
    fn knn_on_a_line() {
        let x = DataMatrix::from_vec(3, 1, vec![0.0, 1.0, 3.0]).unwrap();
        let nn = knn_distances(&x, 2).unwrap();
        assert_eq!(nn[0], vec![1.0, 3.0]);
        assert_eq!(nn[2], vec![2.0, 3.0]);
    }

    #[test]
    fn knn_duplicate_gives_zero() {
        let x = DataMatrix::from_vec(3, 1, vec![2.0, 2.0, 5.0]).unwrap();
        assert_eq!(knn_distances(&x, 1).unwrap()[0], vec![0.0]);
    }

    #[test]
    fn knn_matches_brute_force() {
        let x = standard_normal_sample(&mut Rng::new(1), 50, 4);
        assert_eq!(knn_distances(&x, 7).unwrap(), brute_knn(&x, 7));
    }

    #[test]
    fn knn_k_too_large() {
        let x = DataMatrix::zeros(5, 2);
        assert!(matches!(knn_distances(&x, 5), Err(Error::KTooLarge { k: 5, rows: 5 })));
    }

    #[test]
    fn twonn_recovers_plane() {
        let mut sum = 0.0;
        for seed in 0..10 {
            let x = standard_normal_sample(&mut Rng::new(seed), 10_000, 2);
            sum += twonn_estimate(&x, 0.1, seed).unwrap().value;
        }
        let mean = sum / 10.0;
        assert!((1.8..=2.2).contains(&mean), "{mean}");
    }

    #[test]
    fn twonn_closed_form_on_untrimmed_pareto() {
        // μ ~ Pareto(d = 3) by inverse CDF; no trimming makes the closed form the MLE
        let mut rng = Rng::new(3);
        let mut mu: Vec<f64> = (0..50_000).map(|_| (1.0 - rng.uniform()).powf(-1.0 / 3.0)).collect();
        let d = twonn_from_ratios(&mut mu, 0.0, TwoNnFit::ClosedForm).unwrap();
        assert!((d - 3.0).abs() < 0.05, "{d}");
        let d = twonn_from_ratios(&mut mu, 0.1, TwoNnFit::Regression).unwrap();
        assert!((d - 3.0).abs() < 0.05, "{d}");
    }

    #[test]
    fn twonn_far_below_ambient_for_strong_correlation() {
        let x = ar(50, 0.99, 5000, 4);
        let e = twonn_estimate(&x, 0.1, 0).unwrap();
        assert!(e.value < 25.0, "{}", e.value);
    }

    #[test]
    fn twonn_needs_usable_points() {
        let x = DataMatrix::from_vec(30, 1, vec![1.0; 30]).unwrap();
        assert!(matches!(twonn_estimate(&x, 0.1, 0), Err(Error::DegenerateData(_))));
    }

    #[test]
    fn mle_on_segment() {
        let mut rng = Rng::new(6);
        let rows: Vec<[f64; 3]> = (0..2000)
            .map(|_| {
                let t = rng.uniform();
                [t, 2.0 * t - 1.0, 0.5 * t]
            })
            .collect();
        let x = DataMatrix::from_rows(&rows).unwrap();
        let e = mle_estimate(&x, 10, Aggregation::MacKay, 0).unwrap();
        assert!((0.9..=1.2).contains(&e.value), "{}", e.value);
    }

    #[test]
    fn mle_on_gaussian_five() {
        let x = standard_normal_sample(&mut Rng::new(7), 5000, 5);
        let e = mle_estimate(&x, 10, Aggregation::MacKay, 0).unwrap();
        assert!((4.0..=6.0).contains(&e.value), "{}", e.value);
        let m = mle_estimate(&x, 10, Aggregation::Mean, 0).unwrap();
        // mean of local estimates exceeds the harmonic-style aggregate
        assert!(m.value >= e.value);
    }

    #[test]
    fn mle_k_checks() {
        let x = standard_normal_sample(&mut Rng::new(7), 20, 2);
        assert!(matches!(mle_estimate(&x, 20, Aggregation::MacKay, 0), Err(Error::KTooLarge { .. })));
        assert!(mle_estimate(&x, 1, Aggregation::MacKay, 0).is_err());
    }

    #[test]
    fn mle_decreases_with_correlation() {
        let mut last = f64::INFINITY;
        for rho in [0.0, 0.5, 0.9, 0.99] {
            let x = ar(10, rho, 3000, 11);
            let v = mle_estimate(&x, 10, Aggregation::MacKay, 0).unwrap().value;
            assert!(v <= last, "rho {rho}: {v} > {last}");
            last = v;
        }
    }

    #[test]
    fn ratio_examples() {
        assert!((d_ratio(15.0, 784).unwrap().ratio - 0.019).abs() < 5e-4);
        // 0.00358, printed as 0.003 (truncated to three places)
        let r = d_ratio(11.0, 3072).unwrap().ratio;
        assert!((0.003..0.004).contains(&r));
        assert_eq!(d_ratio(7.0, 10).unwrap().ratio, 0.7);
        assert_eq!(d_ratio(4.0, 4).unwrap().ratio, 1.0);
    }

    #[test]
    fn robustness_on_gaussian_five() {
        let x = standard_normal_sample(&mut Rng::new(8), 4000, 5);
        let spec = RobustnessSpec {
            ratios: vec![1.0, 0.9, 0.8, 0.5],
            scalers: vec![ScalerKind::None, ScalerKind::Standard, ScalerKind::MinMax],
            estimator: Estimator::TwoNn { discard_top: 0.1 },
        };
        let cells = robustness_suite(&x, &spec, 1).unwrap();
        assert_eq!(cells.len(), 12);
        let v: Vec<f64> = cells.iter().map(|c| c.estimate.value).collect();
        let spread = v.iter().cloned().fold(f64::NEG_INFINITY, f64::max) - v.iter().cloned().fold(f64::INFINITY, f64::min);
        assert!(spread <= 1.0, "{v:?}");
        let again = robustness_suite(&x, &spec, 1).unwrap();
        assert_eq!(again[0].estimate.value, cells[0].estimate.value);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]
        #[test]
        fn isometry_and_scale_invariance(seed in 0u64..1000, angle in 0.0f64..6.28, shift in -5.0f64..5.0, scale in 0.1f64..10.0) {
            let x = standard_normal_sample(&mut Rng::new(seed), 300, 2);
            let (c, s) = (angle.cos(), angle.sin());
            let mut moved = x.clone();
            for r in 0..moved.rows() {
                let row = moved.row_mut(r);
                let (a, b) = (row[0], row[1]);
                row[0] = scale * (c * a - s * b) + shift;
                row[1] = scale * (s * a + c * b) - shift;
            }
            let t0 = twonn_estimate(&x, 0.1, 0).unwrap().value;
            let t1 = twonn_estimate(&moved, 0.1, 0).unwrap().value;
            prop_assert!((t0 - t1).abs() < 1e-9, "{t0} {t1}");
            let m0 = mle_estimate(&x, 10, Aggregation::MacKay, 0).unwrap().value;
            let m1 = mle_estimate(&moved, 10, Aggregation::MacKay, 0).unwrap().value;
            prop_assert!((m0 - m1).abs() < 1e-9, "{m0} {m1}");
        }
    }
}
