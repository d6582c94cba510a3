//! Closed-form Gaussian quantities, the entropy/KL gap condition,
//! Monte-Carlo likelihood gaps, norm concentration, and dimension sweeps
//! of flow AUROC with latent histograms.
//!
//! All logarithms are natural.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::ModelBundle;
use crate::error::{Error, Result};
use crate::flow::{train_flow, FlowKind, FlowModel, TrainConfig};
use crate::numeric::matrix::DataMatrix;
use crate::numeric::mlp::Activation;
use crate::numeric::rng::{derive_seed, Rng};
use crate::scoring::{auprc, auroc};
use crate::synth::{dimension_sweep_dataset, Covariance, GaussianSpec, IsotropicPair};

const LN_2PI_E: f64 = 2.837_877_066_409_345_5;

fn check_sigma(sigma: f64) -> Result<()> {
    if sigma > 0.0 && sigma.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!("sigma {sigma} must be positive")))
    }
}

/// Differential entropy of `N(μ, σ² I_d)`.
pub fn gaussian_entropy(d: usize, sigma: f64) -> f64 {
    0.5 * d as f64 * (LN_2PI_E + 2.0 * sigma.ln())
}

/// `KL(Q ‖ P)` for `P = N(μ_P, σ_P² I)` and `Q = N(μ_Q, σ_Q² I)`.
pub fn gaussian_kl_isotropic(mu_p: &[f64], sigma_p: f64, mu_q: &[f64], sigma_q: f64) -> Result<f64> {
    check_sigma(sigma_p)?;
    check_sigma(sigma_q)?;
    if mu_p.len() != mu_q.len() {
        return Err(Error::dim(mu_p.len(), mu_q.len()));
    }
    let d = mu_p.len() as f64;
    let delta = sq_dist(mu_p, mu_q);
    let r2 = (sigma_q / sigma_p).powi(2);
    Ok(0.5 * (delta / (sigma_p * sigma_p) + 2.0 * d * (sigma_p / sigma_q).ln() + d * r2 - d))
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Entropy of a Gaussian spec with either covariance form.
pub fn spec_entropy(spec: &GaussianSpec) -> f64 {
    let d = spec.dim();
    match &spec.cov {
        Covariance::Isotropic(sigma) => gaussian_entropy(d, *sigma),
        Covariance::Full(l) => 0.5 * d as f64 * LN_2PI_E + (0..d).map(|i| l[(i, i)].ln()).sum::<f64>(),
    }
}

/// `KL(Q ‖ P)` for arbitrary Gaussian specs.
pub fn spec_kl(q: &GaussianSpec, p: &GaussianSpec) -> Result<f64> {
    if p.dim() != q.dim() {
        return Err(Error::dim(p.dim(), q.dim()));
    }
    if let (Covariance::Isotropic(sp), Covariance::Isotropic(sq)) = (&p.cov, &q.cov) {
        return gaussian_kl_isotropic(&p.mean, *sp, &q.mean, *sq);
    }
    let d = p.dim();
    let lp = chol_of(p)?;
    let lq = chol_of(q)?;
    // tr(Σp⁻¹ Σq) = ‖Lp⁻¹ Lq‖_F², Mahalanobis term = ‖Lp⁻¹ Δ‖².
    let mut trace = 0.0;
    for j in 0..d {
        let col: Vec<f64> = (0..d).map(|i| lq[(i, j)]).collect();
        trace += forward_solve(&lp, &col).iter().map(|v| v * v).sum::<f64>();
    }
    let delta: Vec<f64> = p.mean.iter().zip(&q.mean).map(|(a, b)| a - b).collect();
    let maha: f64 = forward_solve(&lp, &delta).iter().map(|v| v * v).sum();
    let logdet = |l: &DataMatrix| 2.0 * (0..d).map(|i| l[(i, i)].ln()).sum::<f64>();
    Ok(0.5 * (trace + maha - d as f64 + logdet(&lp) - logdet(&lq)))
}

fn chol_of(spec: &GaussianSpec) -> Result<DataMatrix> {
    match &spec.cov {
        Covariance::Full(l) => Ok(l.clone()),
        Covariance::Isotropic(s) => {
            let mut m = DataMatrix::identity(spec.dim());
            for i in 0..spec.dim() {
                m[(i, i)] = *s;
            }
            Ok(m)
        }
    }
}

fn forward_solve(l: &DataMatrix, b: &[f64]) -> Vec<f64> {
    let mut y = vec![0.0; b.len()];
    for i in 0..b.len() {
        let s: f64 = (0..i).map(|k| l[(i, k)] * y[k]).sum();
        y[i] = (b[i] - s) / l[(i, i)];
    }
    y
}

/// Log-density of `spec` per row.
pub fn spec_log_density(spec: &GaussianSpec, x: &DataMatrix) -> Result<Vec<f64>> {
    let d = spec.dim();
    if x.cols() != d {
        return Err(Error::dim(d, x.cols()));
    }
    let norm = -0.5 * d as f64 * (LN_2PI_E - 1.0);
    match &spec.cov {
        Covariance::Isotropic(s) => {
            let c = norm - d as f64 * s.ln();
            Ok(x.row_iter().map(|r| c - 0.5 * sq_dist(r, &spec.mean) / (s * s)).collect())
        }
        Covariance::Full(l) => {
            let c = norm - (0..d).map(|i| l[(i, i)].ln()).sum::<f64>();
            Ok(x.row_iter()
                .map(|r| {
                    let diff: Vec<f64> = r.iter().zip(&spec.mean).map(|(a, b)| a - b).collect();
                    c - 0.5 * forward_solve(l, &diff).iter().map(|v| v * v).sum::<f64>()
                })
                .collect())
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GapCondition {
    /// `‖Δμ‖² < d(σ_P² − σ_Q²)`.
    pub holds: bool,
    /// `d(σ_P² − σ_Q²) − ‖Δμ‖²`.
    pub margin: f64,
    /// `H(P) − H(Q) − KL(Q‖P)` evaluated from the closed forms.
    pub direct_margin: f64,
    pub holds_direct: bool,
}

impl GapCondition {
    pub fn routes_agree(&self) -> bool {
        self.holds == self.holds_direct
    }
}

/// Whether `H(P) − H(Q) > KL(Q‖P)` for two isotropic Gaussians.
pub fn gap_condition(mu_p: &[f64], sigma_p: f64, mu_q: &[f64], sigma_q: f64) -> Result<GapCondition> {
    let kl = gaussian_kl_isotropic(mu_p, sigma_p, mu_q, sigma_q)?;
    let d = mu_p.len();
    let delta = sq_dist(mu_p, mu_q);
    let rhs = d as f64 * (sigma_p * sigma_p - sigma_q * sigma_q);
    let margin = rhs - delta;
    let (hp, hq) = (gaussian_entropy(d, sigma_p), gaussian_entropy(d, sigma_q));
    let direct_margin = hp - hq - kl;
    // The direct route carries rounding from the logs; anything within a
    // few ulps of the magnitudes involved counts as the boundary.
    let noise = 64.0 * f64::EPSILON * (hp.abs() + hq.abs() + kl.abs() + 1.0);
    Ok(GapCondition {
        holds: margin > 0.0,
        margin,
        direct_margin,
        holds_direct: if direct_margin.abs() <= noise { margin > 0.0 } else { direct_margin > 0.0 },
    })
}

/// Broadcast form of [`gap_condition`] with scalar means in `d` dimensions.
pub fn gap_condition_scalar(d: usize, mu_p: f64, sigma_p: f64, mu_q: f64, sigma_q: f64) -> Result<GapCondition> {
    gap_condition(&vec![mu_p; d], sigma_p, &vec![mu_q; d], sigma_q)
}

/// A density to be evaluated on Monte-Carlo samples.
pub enum Density<'a> {
    Flow(&'a FlowModel),
    /// A flow behind its fitted scaler; the scaler's Jacobian is included.
    Bundle(&'a ModelBundle),
    Gaussian(&'a GaussianSpec),
}

impl Density<'_> {
    pub fn log_density(&self, x: &DataMatrix) -> Result<Vec<f64>> {
        match self {
            Density::Flow(m) => m.log_likelihood(x),
            Density::Bundle(b) => {
                let jac: f64 = b.scaler.scale.iter().map(|s| s.ln()).sum();
                Ok(b.log_likelihood(x)?.into_iter().map(|v| v - jac).collect())
            }
            Density::Gaussian(g) => spec_log_density(g, x),
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            Density::Flow(m) => m.input_dim,
            Density::Bundle(b) => b.model.input_dim,
            Density::Gaussian(g) => g.dim(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GapReport {
    pub d: usize,
    pub n: usize,
    pub seed: u64,
    pub entropy_p: f64,
    pub entropy_q: f64,
    pub kl_qp: f64,
    /// `E_P[log p_θ]`.
    pub mean_ll_p: f64,
    /// `E_Q[log p_θ]`.
    pub mean_ll_q: f64,
    /// `E_P[log p_θ] − E_Q[log p_θ]`.
    pub gap: f64,
    /// Monte-Carlo standard error of `gap`.
    pub gap_se: f64,
    /// `KL(Q‖P) + H(Q) − H(P)`: the gap a perfect model would show.
    pub perfect_model_gap: f64,
}

fn mean_and_var(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    let m = v.iter().sum::<f64>() / n;
    let var = if v.len() > 1 {
        v.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (n - 1.0)
    } else {
        0.0
    };
    (m, var)
}

/// Monte-Carlo estimate of the likelihood gap between samples of `p`
/// and `q` under `density`, next to the closed-form terms.
pub fn empirical_likelihood_gap(
    density: &Density<'_>,
    p: &GaussianSpec,
    q: &GaussianSpec,
    n: usize,
    seed: u64,
) -> Result<GapReport> {
    if p.dim() != q.dim() {
        return Err(Error::dim(p.dim(), q.dim()));
    }
    if density.dim() != p.dim() {
        return Err(Error::dim(p.dim(), density.dim()));
    }
    if n < 2 {
        return Err(Error::NotEnoughRows(n));
    }
    let mut rng = Rng::new(seed);
    let xp = p.sample(&mut rng, n)?;
    let xq = q.sample(&mut rng, n)?;
    let (mp, vp) = mean_and_var(&density.log_density(&xp)?);
    let (mq, vq) = mean_and_var(&density.log_density(&xq)?);
    let (hp, hq, kl) = (spec_entropy(p), spec_entropy(q), spec_kl(q, p)?);
    let report = GapReport {
        d: p.dim(),
        n,
        seed,
        entropy_p: hp,
        entropy_q: hq,
        kl_qp: kl,
        mean_ll_p: mp,
        mean_ll_q: mq,
        gap: mp - mq,
        gap_se: ((vp + vq) / n as f64).sqrt(),
        perfect_model_gap: kl + hq - hp,
    };
    if ![mp, mq, hp, hq, kl].iter().all(|v| v.is_finite()) {
        return Err(Error::DegenerateData("non-finite likelihood gap term".into()));
    }
    Ok(report)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConcentrationReport {
    pub d: usize,
    pub t: f64,
    pub n: usize,
    /// Fraction of draws with `|‖Z‖² − d| ≥ t`.
    pub empirical: f64,
    /// `2 exp(−t² / 8d)`.
    pub bound: f64,
    /// Binomial standard error of `empirical`.
    pub se: f64,
    /// `empirical ≤ bound + 3 se`.
    pub within_bound: bool,
}

/// Tail of `‖Z‖²` around `d` for `Z ~ N(0, I_d)` against the
/// sub-exponential bound.
pub fn concentration_check(d: usize, t: f64, n: usize, seed: u64) -> Result<ConcentrationReport> {
    if !(t > 0.0 && t < d as f64) {
        return Err(Error::TOutOfRange { t, d });
    }
    if n == 0 {
        return Err(Error::NotEnoughRows(0));
    }
    let mut rng = Rng::new(seed);
    let df = d as f64;
    let mut hits = 0usize;
    for _ in 0..n {
        let s: f64 = (0..d).map(|_| rng.normal().powi(2)).sum();
        if (s - df).abs() >= t {
            hits += 1;
        }
    }
    let empirical = hits as f64 / n as f64;
    let bound = 2.0 * (-t * t / (8.0 * df)).exp();
    let se = (empirical * (1.0 - empirical) / n as f64).sqrt();
    Ok(ConcentrationReport {
        d,
        t,
        n,
        empirical,
        bound,
        se,
        within_bound: empirical <= bound + 3.0 * se,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct NormVariance {
    pub d: usize,
    /// `Var(‖Z‖) / d`.
    pub ratio: f64,
    /// Standard error of `ratio`.
    pub se: f64,
}

/// Sample variance of `‖Z‖₂` over `n` standard-normal draws, divided by
/// `d`, for each dimension. Each dimension uses its own derived stream.
pub fn norm_variance_ratio(dims: &[usize], n: usize, seed: u64) -> Result<Vec<NormVariance>> {
    if n < 2 {
        return Err(Error::NotEnoughRows(n));
    }
    dims.iter()
        .map(|&d| {
            if d == 0 {
                return Err(Error::InvalidArgument("dimension 0".into()));
            }
            let mut rng = Rng::new(derive_seed(seed, d as u64));
            let norms: Vec<f64> = (0..n)
                .map(|_| (0..d).map(|_| rng.normal().powi(2)).sum::<f64>().sqrt())
                .collect();
            let (m, var) = mean_and_var(&norms);
            let m4 = norms.iter().map(|x| (x - m).powi(4)).sum::<f64>() / n as f64;
            let var_se = ((m4 - var * var).max(0.0) / n as f64).sqrt();
            Ok(NormVariance {
                d,
                ratio: var / d as f64,
                se: var_se / d as f64,
            })
        })
        .collect()
}

/// Shared-edge histogram of one per-sample quantity for the normal and
/// anomalous halves of a test set.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Histogram {
    pub quantity: String,
    /// `bins + 1` ascending edges.
    pub edges: Vec<f64>,
    pub count_normal: Vec<usize>,
    pub count_anomaly: Vec<usize>,
}

impl Histogram {
    pub fn build(quantity: &str, normal: &[f64], anomaly: &[f64], bins: usize) -> Result<Self> {
        if bins == 0 {
            return Err(Error::InvalidArgument("bins must be positive".into()));
        }
        let all = normal.iter().chain(anomaly);
        let (mut lo, mut hi) = all.fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| (a.min(v), b.max(v)));
        if !(lo.is_finite() && hi.is_finite()) {
            return Err(Error::DegenerateData(format!("no finite values for `{quantity}`")));
        }
        if hi - lo <= 1e-12 * (1.0 + lo.abs()) {
            lo -= 0.5;
            hi += 0.5;
        }
        let width = (hi - lo) / bins as f64;
        let edges = (0..=bins).map(|i| if i == bins { hi } else { lo + i as f64 * width }).collect();
        let count = |vals: &[f64]| {
            let mut c = vec![0usize; bins];
            for &v in vals {
                let b = (((v - lo) / width) as usize).min(bins - 1);
                c[b] += 1;
            }
            c
        };
        Ok(Self {
            quantity: quantity.to_string(),
            edges,
            count_normal: count(normal),
            count_anomaly: count(anomaly),
        })
    }

    pub fn bins(&self) -> usize {
        self.count_normal.len()
    }

    /// Wasserstein-1 distance between the two binned distributions, in
    /// the histogram's own units.
    pub fn wasserstein1(&self) -> f64 {
        let nn = self.count_normal.iter().sum::<usize>().max(1) as f64;
        let na = self.count_anomaly.iter().sum::<usize>().max(1) as f64;
        let (mut cn, mut ca, mut w) = (0.0, 0.0, 0.0);
        for b in 0..self.bins() {
            cn += self.count_normal[b] as f64 / nn;
            ca += self.count_anomaly[b] as f64 / na;
            w += (cn - ca).abs() * (self.edges[b + 1] - self.edges[b]);
        }
        w
    }
}

/// Histograms of per-sample NLL, latent squared norm and (RealNVP only)
/// log-determinant.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HistogramSet {
    pub histograms: Vec<Histogram>,
}

impl HistogramSet {
    pub fn get(&self, quantity: &str) -> Option<&Histogram> {
        self.histograms.iter().find(|h| h.quantity == quantity)
    }

    /// CSV rows `quantity,bin_left,bin_right,count_normal,count_anomaly`.
    pub fn write_csv(&self, writer: impl std::io::Write, dim: Option<usize>) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        let mut header = vec!["quantity", "bin_left", "bin_right", "count_normal", "count_anomaly"];
        if dim.is_some() {
            header.insert(0, "d");
        }
        w.write_record(&header)?;
        for h in &self.histograms {
            for b in 0..h.bins() {
                let mut rec = vec![
                    h.quantity.clone(),
                    format!("{:?}", h.edges[b]),
                    format!("{:?}", h.edges[b + 1]),
                    h.count_normal[b].to_string(),
                    h.count_anomaly[b].to_string(),
                ];
                if let Some(d) = dim {
                    rec.insert(0, d.to_string());
                }
                w.write_record(&rec)?;
            }
        }
        w.flush().map_err(|e| Error::io("<histogram csv>", e))?;
        Ok(())
    }
}

/// Scale-free separation of two samples: the Wasserstein-1 distance of a
/// shared histogram after dividing by the pooled standard deviation.
pub fn standardized_wasserstein(normal: &[f64], anomaly: &[f64], bins: usize) -> Result<f64> {
    let pooled: Vec<f64> = normal.iter().chain(anomaly).copied().collect();
    let (_, var) = mean_and_var(&pooled);
    let sd = if var > 0.0 { var.sqrt() } else { 1.0 };
    let scale = |v: &[f64]| v.iter().map(|x| x / sd).collect::<Vec<_>>();
    Ok(Histogram::build("standardized", &scale(normal), &scale(anomaly), bins)?.wasserstein1())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepSpec {
    pub kind: FlowKind,
    pub pair: IsotropicPair,
    pub dims: Vec<usize>,
    pub n_train: usize,
    pub n_test_each: usize,
    pub bins: usize,
    /// Worker threads for independent dimensions; 0 uses the global pool.
    pub jobs: usize,
}

impl SweepSpec {
    /// Desk-scale NICE sweep: `N(5, I)` against `N(3.25, I)` over
    /// `{10, 50, 100, 500, 2000}` with 1000 training rows.
    pub fn desk() -> Self {
        Self {
            kind: FlowKind::Nice,
            pair: IsotropicPair {
                mu_p: 5.0,
                sigma_p: 1.0,
                mu_q: 3.25,
                sigma_q: 1.0,
            },
            dims: vec![10, 50, 100, 500, 2000],
            n_train: 1000,
            n_test_each: 500,
            bins: 50,
            jobs: 0,
        }
    }
}

/// Training settings paired with [`SweepSpec::desk`].
pub fn desk_sweep_config() -> TrainConfig {
    TrainConfig {
        epochs: 100,
        batch_size: 64,
        learning_rate: 3e-3,
        n_coupling: 4,
        hidden_dim: 64,
        activation: Activation::LeakyRelu,
        ..TrainConfig::default()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub dim: usize,
    pub seed: u64,
    pub auroc: f64,
    pub auprc: f64,
    pub final_train_nll: f64,
    /// [`standardized_wasserstein`] between normal and anomaly latent squared norms.
    pub norm_w1: f64,
    pub histograms: HistogramSet,
}

/// Trains one flow per dimension on `P` samples and scores a balanced
/// `P`/`Q` test set by negative log-likelihood.
pub fn dimension_sweep_auroc(spec: &SweepSpec, config: &TrainConfig, seed: u64) -> Result<Vec<SweepPoint>> {
    config.validate()?;
    let cells = dimension_sweep_dataset(&spec.pair, &spec.dims, seed)?;
    let run = || cells.par_iter().map(|cell| sweep_point(spec, config, cell)).collect::<Result<Vec<_>>>();
    if spec.jobs == 0 {
        run()
    } else {
        rayon::ThreadPoolBuilder::new()
            .num_threads(spec.jobs)
            .build()
            .map_err(|e| Error::InvalidArgument(format!("thread pool: {e}")))?
            .install(run)
    }
}

fn sweep_point(spec: &SweepSpec, config: &TrainConfig, cell: &crate::synth::SweepCell) -> Result<SweepPoint> {
    let (train, test) = cell.generate(spec.n_train, spec.n_test_each)?;
    let cfg = TrainConfig {
        seed: derive_seed(cell.seed, 1),
        ..config.clone()
    };
    let (model, history) = train_flow(spec.kind, &train, &cfg)?;
    let out = model.forward(&test.features)?;
    let ll = model.log_likelihood(&test.features)?;
    let nll: Vec<f64> = ll.iter().map(|v| -v).collect();
    let norms: Vec<f64> = out.z.row_iter().map(|z| z.iter().map(|v| v * v).sum()).collect();
    let split = |v: &[f64]| -> (Vec<f64>, Vec<f64>) {
        let (mut a, mut b) = (Vec::new(), Vec::new());
        for (x, &l) in v.iter().zip(&test.labels) {
            if l == 0 { a.push(*x) } else { b.push(*x) }
        }
        (a, b)
    };
    let mut histograms = Vec::new();
    let (nn, na) = split(&nll);
    histograms.push(Histogram::build("nll", &nn, &na, spec.bins)?);
    let (zn, za) = split(&norms);
    histograms.push(Histogram::build("norm", &zn, &za, spec.bins)?);
    if spec.kind == FlowKind::RealNvp {
        let (ln, la) = split(&out.logdet);
        histograms.push(Histogram::build("logdet", &ln, &la, spec.bins)?);
    }
    Ok(SweepPoint {
        dim: cell.dim,
        seed: cell.seed,
        auroc: auroc(&nll, &test.labels)?,
        auprc: auprc(&nll, &test.labels)?,
        final_train_nll: history.nll.last().copied().unwrap_or(f64::NAN),
        norm_w1: standardized_wasserstein(&zn, &za, spec.bins)?,
        histograms: HistogramSet { histograms },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numeric::rng::Rng;
    use crate::synth::ar_covariance;
    use proptest::prelude::*;

    #[test]
    fn entropy_values() {
        assert!((gaussian_entropy(1, 1.0) - 1.418_938_533_204_672_7).abs() < 1e-14);
        assert!((gaussian_entropy(2, 1.0) - 2.837_877_066_409_345_5).abs() < 1e-14);
        let gain = gaussian_entropy(7, 2.0) - gaussian_entropy(7, 1.0);
        assert!((gain - 7.0 * std::f64::consts::LN_2).abs() < 1e-12);
    }

    #[test]
    fn kl_values() {
        assert_eq!(gaussian_kl_isotropic(&[1.0, 2.0], 1.5, &[1.0, 2.0], 1.5).unwrap(), 0.0);
        assert!((gaussian_kl_isotropic(&[0.0], 1.0, &[1.0], 1.0).unwrap() - 0.5).abs() < 1e-15);
        assert!(gaussian_kl_isotropic(&[0.0], 0.0, &[1.0], 1.0).is_err());
        assert!(gaussian_kl_isotropic(&[0.0], 1.0, &[1.0, 0.0], 1.0).is_err());
    }

    #[test]
    fn full_kl_matches_isotropic_and_mc() {
        let p = GaussianSpec::isotropic(3, 0.5, 1.3).unwrap();
        let q = GaussianSpec::isotropic(3, -0.2, 0.7).unwrap();
        let pf = GaussianSpec::full(p.mean.clone(), &scaled_identity(3, 1.69)).unwrap();
        let qf = GaussianSpec::full(q.mean.clone(), &scaled_identity(3, 0.49)).unwrap();
        assert!((spec_kl(&q, &p).unwrap() - spec_kl(&qf, &pf).unwrap()).abs() < 1e-12);
        assert!((spec_entropy(&p) - spec_entropy(&pf)).abs() < 1e-12);

        let pa = GaussianSpec::full(vec![0.0, 1.0, 0.0], &ar_covariance(3, 0.6).unwrap()).unwrap();
        let qa = GaussianSpec::full(vec![0.5, 0.0, 0.0], &ar_covariance(3, 0.2).unwrap()).unwrap();
        let x = qa.sample(&mut Rng::new(5), 200_000).unwrap();
        let lq = spec_log_density(&qa, &x).unwrap();
        let lp = spec_log_density(&pa, &x).unwrap();
        let diffs: Vec<f64> = lq.iter().zip(&lp).map(|(a, b)| a - b).collect();
        let (m, v) = mean_and_var(&diffs);
        let kl = spec_kl(&qa, &pa).unwrap();
        assert!((m - kl).abs() < 4.0 * (v / diffs.len() as f64).sqrt(), "{m} vs {kl}");
    }

    fn scaled_identity(d: usize, v: f64) -> DataMatrix {
        let mut m = DataMatrix::identity(d);
        for i in 0..d {
            m[(i, i)] = v;
        }
        m
    }

    #[test]
    fn gap_condition_examples() {
        let mu_q = [5f64.sqrt() / 10f64.sqrt(); 10];
        let g = gap_condition(&[0.0; 10], 2.0, &mu_q, 1.0).unwrap();
        assert!(g.holds && g.routes_agree());
        assert!((g.margin - 25.0).abs() < 1e-12);
        let g = gap_condition_scalar(4, 0.0, 1.0, 0.1, 1.0).unwrap();
        assert!(!g.holds && g.routes_agree());
        let g = gap_condition_scalar(4, 0.0, 1.25, 1.0, 0.75).unwrap();
        assert_eq!(g.margin, 0.0);
        assert!(!g.holds && g.routes_agree());
    }

    #[test]
    fn perfect_model_gap() {
        let p = GaussianSpec::isotropic(8, 0.0, 1.5).unwrap();
        let q = GaussianSpec::isotropic(8, 0.3, 1.0).unwrap();
        let r = empirical_likelihood_gap(&Density::Gaussian(&p), &p, &q, 50_000, 3).unwrap();
        assert!(gap_condition_scalar(8, 0.0, 1.5, 0.3, 1.0).unwrap().holds);
        assert!(r.perfect_model_gap < 0.0 && r.gap < 0.0);
        assert!((r.gap - r.perfect_model_gap).abs() < 3.0 * r.gap_se);
        let same = empirical_likelihood_gap(&Density::Gaussian(&p), &p, &p, 20_000, 4).unwrap();
        assert!(same.perfect_model_gap == 0.0 && same.gap.abs() < 4.0 * same.gap_se);
        let bad = GaussianSpec::isotropic(3, 0.0, 1.0).unwrap();
        assert!(matches!(
            empirical_likelihood_gap(&Density::Gaussian(&p), &p, &bad, 10, 0),
            Err(Error::DimMismatch { .. })
        ));
    }

    #[test]
    fn concentration_examples() {
        let r = concentration_check(100, 50.0, 20_000, 1).unwrap();
        assert!((r.bound - 2.0 * (-3.125f64).exp()).abs() < 1e-15);
        assert!(r.within_bound && r.empirical < r.bound);
        let r = concentration_check(10, 5.0, 10_000, 2).unwrap();
        assert!(r.bound > 1.0 && r.within_bound);
        let r = concentration_check(50, 49.0, 10_000, 3).unwrap();
        assert!(r.empirical < 0.01);
        assert!(matches!(concentration_check(10, 10.0, 10, 0), Err(Error::TOutOfRange { .. })));
        assert!(matches!(concentration_check(10, 0.0, 10, 0), Err(Error::TOutOfRange { .. })));
    }

    #[test]
    fn half_normal_variance() {
        let r = norm_variance_ratio(&[1], 200_000, 9).unwrap();
        let exact = 1.0 - 2.0 / std::f64::consts::PI;
        assert!((r[0].ratio - exact).abs() < 4.0 * r[0].se);
    }

    #[test]
    fn histogram_counts_and_w1() {
        let h = Histogram::build("x", &[0.0, 1.0, 2.0], &[2.0, 3.0], 4).unwrap();
        assert_eq!(h.count_normal.iter().sum::<usize>(), 3);
        assert_eq!(h.count_anomaly.iter().sum::<usize>(), 2);
        assert_eq!(*h.edges.last().unwrap(), 3.0);
        let same = Histogram::build("x", &[1.0, 2.0], &[1.0, 2.0], 5).unwrap();
        assert_eq!(same.wasserstein1(), 0.0);
        let constant = Histogram::build("logdet", &[4.0; 3], &[4.0; 2], 3).unwrap();
        assert_eq!(constant.count_normal.iter().sum::<usize>(), 3);
        let shift = Histogram::build("x", &[0.0; 10], &[1.0; 10], 100).unwrap();
        assert!((shift.wasserstein1() - 1.0).abs() < 0.02);
    }

    #[test]
    fn tiny_sweep_runs() {
        let spec = SweepSpec {
            kind: FlowKind::RealNvp,
            pair: IsotropicPair::default(),
            dims: vec![4, 6],
            n_train: 200,
            n_test_each: 50,
            bins: 10,
            jobs: 1,
        };
        let cfg = TrainConfig {
            epochs: 3,
            n_coupling: 2,
            hidden_dim: 8,
            batch_size: 64,
            ..TrainConfig::default()
        };
        let pts = dimension_sweep_auroc(&spec, &cfg, 7).unwrap();
        assert_eq!(pts.len(), 2);
        assert_eq!(pts[0].histograms.histograms.len(), 3);
        for p in &pts {
            for h in &p.histograms.histograms {
                assert_eq!(h.count_normal.iter().sum::<usize>(), 50);
                assert_eq!(h.count_anomaly.iter().sum::<usize>(), 50);
            }
        }
        assert_eq!(pts, dimension_sweep_auroc(&spec, &cfg, 7).unwrap());
    }

    proptest! {
        #[test]
        fn gap_routes_agree(
            mu_p in prop::collection::vec(-3.0f64..3.0, 1..12),
            shift in -2.0f64..2.0,
            sp in 0.2f64..3.0,
            sq in 0.2f64..3.0,
        ) {
            let mu_q: Vec<f64> = mu_p.iter().map(|m| m + shift).collect();
            let g = gap_condition(&mu_p, sp, &mu_q, sq).unwrap();
            prop_assert!(g.routes_agree());
            // H(P) − H(Q) − KL = margin / (2σ_P²).
            prop_assert!((g.direct_margin - g.margin / (2.0 * sp * sp)).abs() < 1e-9 * (1.0 + g.margin.abs()));
        }

        #[test]
        fn analytic_gap_is_linear_in_d(mp in -3.0f64..3.0, mq in -3.0f64..3.0, sp in 0.2f64..3.0, sq in 0.2f64..3.0, d in 1usize..200) {
            let gap = |d: usize| {
                gaussian_kl_isotropic(&vec![mp; d], sp, &vec![mq; d], sq).unwrap()
                    + gaussian_entropy(d, sq) - gaussian_entropy(d, sp)
            };
            let (g1, gd) = (gap(1), gap(d));
            prop_assert!((gd - d as f64 * g1).abs() <= 1e-12 * (1.0 + gd.abs()) * d as f64);
        }
    }
}
