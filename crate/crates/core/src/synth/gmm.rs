use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numeric::matrix::DataMatrix;
use crate::numeric::rng::{derive_seed, Rng};

pub const VARIANCE_FLOOR: f64 = 1e-6;

/// Mixture of axis-aligned Gaussians.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GmmDiag {
    pub weights: Vec<f64>,
    pub means: Vec<Vec<f64>>,
    pub variances: Vec<Vec<f64>>,
}

impl GmmDiag {
    pub fn n_components(&self) -> usize {
        self.weights.len()
    }

    pub fn dim(&self) -> usize {
        self.means.first().map_or(0, Vec::len)
    }

    /// Equal weights, means uniform in `[-spread, spread]^d`, variances
    /// uniform in `[0.5, 1.5]`.
    pub fn random(k: usize, d: usize, spread: f64, rng: &mut Rng) -> Self {
        Self {
            weights: vec![1.0 / k as f64; k],
            means: (0..k).map(|_| (0..d).map(|_| rng.uniform_range(-spread, spread)).collect()).collect(),
            variances: (0..k).map(|_| (0..d).map(|_| rng.uniform_range(0.5, 1.5)).collect()).collect(),
        }
    }

    fn component_log_density(&self, c: usize, x: &[f64]) -> f64 {
        let mut s = -0.5 * x.len() as f64 * (2.0 * std::f64::consts::PI).ln();
        for ((xi, m), v) in x.iter().zip(&self.means[c]).zip(&self.variances[c]) {
            s -= 0.5 * (v.ln() + (xi - m) * (xi - m) / v);
        }
        s
    }

    /// Per-row `ln w_c + ln N(x | c)`.
    fn joint_log(&self, x: &[f64], out: &mut [f64]) {
        for (c, o) in out.iter_mut().enumerate() {
            *o = self.weights[c].ln() + self.component_log_density(c, x);
        }
    }

    pub fn log_likelihood(&self, x: &DataMatrix) -> Result<Vec<f64>> {
        if x.cols() != self.dim() {
            return Err(Error::dim(self.dim(), x.cols()));
        }
        let mut buf = vec![0.0; self.n_components()];
        Ok(x.row_iter()
            .map(|r| {
                self.joint_log(r, &mut buf);
                log_sum_exp(&buf)
            })
            .collect())
    }

    /// Draws `n` rows; also returns each row's component.
    pub fn sample(&self, rng: &mut Rng, n: usize) -> (DataMatrix, Vec<usize>) {
        let d = self.dim();
        let mut values = Vec::with_capacity(n * d);
        let mut comps = Vec::with_capacity(n);
        for _ in 0..n {
            let u = rng.uniform();
            let mut acc = 0.0;
            let mut c = self.n_components() - 1;
            for (i, w) in self.weights.iter().enumerate() {
                acc += w;
                if u < acc {
                    c = i;
                    break;
                }
            }
            comps.push(c);
            for j in 0..d {
                values.push(self.means[c][j] + self.variances[c][j].sqrt() * rng.normal());
            }
        }
        (DataMatrix::from_vec_unchecked(n, d, values), comps)
    }
}

fn log_sum_exp(v: &[f64]) -> f64 {
    let m = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return m;
    }
    m + v.iter().map(|x| (x - m).exp()).sum::<f64>().ln()
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GmmOptions {
    pub max_iter: usize,
    /// Stop once the mean log-likelihood improves by less than this.
    pub tol: f64,
}

impl Default for GmmOptions {
    fn default() -> Self {
        Self { max_iter: 200, tol: 1e-6 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GmmFit {
    pub gmm: GmmDiag,
    /// Mean log-likelihood before each M-step of the final run.
    pub trace: Vec<f64>,
    pub converged: bool,
    pub reseeded: bool,
}

/// k-means++ centres: the first uniformly, the rest with probability
/// proportional to the squared distance to the nearest chosen centre.
fn kmeans_pp(x: &DataMatrix, k: usize, rng: &mut Rng) -> Vec<Vec<f64>> {
    let n = x.rows();
    let mut centres = vec![x.row(rng.below(n)).to_vec()];
    let mut d2: Vec<f64> = x.row_iter().map(|r| sq_dist(r, &centres[0])).collect();
    while centres.len() < k {
        let total: f64 = d2.iter().sum();
        let pick = if total > 0.0 {
            let u = rng.uniform() * total;
            let mut acc = 0.0;
            let mut idx = n - 1;
            for (i, v) in d2.iter().enumerate() {
                acc += v;
                if u < acc {
                    idx = i;
                    break;
                }
            }
            idx
        } else {
            rng.below(n)
        };
        let c = x.row(pick).to_vec();
        for (i, r) in x.row_iter().enumerate() {
            d2[i] = d2[i].min(sq_dist(r, &c));
        }
        centres.push(c);
    }
    centres
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

fn population_variance(x: &DataMatrix) -> Vec<f64> {
    let means = x.column_means();
    let n = x.rows() as f64;
    let mut var = vec![0.0; x.cols()];
    for r in x.row_iter() {
        for ((v, xi), m) in var.iter_mut().zip(r).zip(&means) {
            *v += (xi - m) * (xi - m);
        }
    }
    var.iter().map(|v| (v / n).max(VARIANCE_FLOOR)).collect()
}

enum EmOutcome {
    Done(GmmFit),
    Empty(usize),
}

fn run_em(x: &DataMatrix, k: usize, rng: &mut Rng, opts: &GmmOptions) -> EmOutcome {
    let n = x.rows();
    let d = x.cols();
    let global_var = population_variance(x);
    let mut gmm = GmmDiag {
        weights: vec![1.0 / k as f64; k],
        means: kmeans_pp(x, k, rng),
        variances: vec![global_var; k],
    };
    let mut resp = vec![0.0; n * k];
    let mut trace = Vec::new();
    let mut converged = false;
    for _ in 0..opts.max_iter {
        // E-step
        let mut ll = 0.0;
        for (i, row) in x.row_iter().enumerate() {
            let r = &mut resp[i * k..(i + 1) * k];
            gmm.joint_log(row, r);
            let lse = log_sum_exp(r);
            ll += lse;
            r.iter_mut().for_each(|v| *v = (*v - lse).exp());
        }
        let ll = ll / n as f64;
        if let Some(&prev) = trace.last() {
            debug_assert!(ll >= prev - 1e-9, "EM log-likelihood fell: {prev} -> {ll}");
            if ll - prev < opts.tol {
                trace.push(ll);
                converged = true;
                break;
            }
        }
        trace.push(ll);
        // M-step
        for c in 0..k {
            let nk: f64 = (0..n).map(|i| resp[i * k + c]).sum();
            if nk < 1e-10 {
                return EmOutcome::Empty(c);
            }
            let mut mean = vec![0.0; d];
            for (i, row) in x.row_iter().enumerate() {
                let w = resp[i * k + c];
                for (m, v) in mean.iter_mut().zip(row) {
                    *m += w * v;
                }
            }
            mean.iter_mut().for_each(|m| *m /= nk);
            let mut var = vec![0.0; d];
            for (i, row) in x.row_iter().enumerate() {
                let w = resp[i * k + c];
                for ((s, v), m) in var.iter_mut().zip(row).zip(&mean) {
                    *s += w * (v - m) * (v - m);
                }
            }
            var.iter_mut().for_each(|s| *s = (*s / nk).max(VARIANCE_FLOOR));
            gmm.weights[c] = nk / n as f64;
            gmm.means[c] = mean;
            gmm.variances[c] = var;
        }
    }
    EmOutcome::Done(GmmFit {
        gmm,
        trace,
        converged,
        reseeded: false,
    })
}

/// EM for a `k`-component diagonal mixture. A component that loses all its
/// mass triggers one restart from fresh k-means++ centres.
pub fn fit_gmm_diag(x: &DataMatrix, k: usize, seed: u64, opts: &GmmOptions) -> Result<GmmFit> {
    if k == 0 {
        return Err(Error::InvalidArgument("k = 0 components".into()));
    }
    if x.rows() < k {
        return Err(Error::NotEnoughRows(x.rows()));
    }
    let mut rng = Rng::new(seed);
    match run_em(x, k, &mut rng, opts) {
        EmOutcome::Done(fit) => Ok(fit),
        EmOutcome::Empty(_) => {
            let mut rng = Rng::new(derive_seed(seed, 1));
            match run_em(x, k, &mut rng, opts) {
                EmOutcome::Done(mut fit) => {
                    fit.reseeded = true;
                    Ok(fit)
                }
                EmOutcome::Empty(c) => Err(Error::DegenerateComponent(c)),
            }
        }
    }
}
