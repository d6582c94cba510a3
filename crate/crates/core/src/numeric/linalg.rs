use crate::error::{Error, Result};

use super::matrix::DataMatrix;
use super::rng::Rng;

const PIVOT_FLOOR: f64 = 1e-12;
const MAX_SWEEPS: usize = 100;
const MAX_EIGEN_DIM: usize = 4096;

fn check_square(m: &DataMatrix) -> Result<usize> {
    if m.rows() != m.cols() {
        return Err(Error::dim(m.rows(), m.cols()));
    }
    Ok(m.rows())
}

/// Lower-triangular `L` with `L·Lᵀ = cov`.
pub fn cholesky(cov: &DataMatrix) -> Result<DataMatrix> {
    let n = check_square(cov)?;
    let mut l = DataMatrix::zeros(n, n);
    for j in 0..n {
        let mut diag = cov[(j, j)];
        for k in 0..j {
            diag -= l[(j, k)] * l[(j, k)];
        }
        if !(diag > PIVOT_FLOOR) {
            return Err(Error::NotPositiveDefinite {
                pivot: j,
                value: diag,
            });
        }
        let ljj = diag.sqrt();
        l[(j, j)] = ljj;
        for i in j + 1..n {
            let mut s = cov[(i, j)];
            for k in 0..j {
                s -= l[(i, k)] * l[(j, k)];
            }
            l[(i, j)] = s / ljj;
        }
    }
    Ok(l)
}

/// Rows `mean + chol · z` with `z` standard normal.
pub fn mvn_sample(rng: &mut Rng, mean: &[f64], chol: &DataMatrix, n: usize) -> Result<DataMatrix> {
    let d = check_square(chol)?;
    if mean.len() != d {
        return Err(Error::dim(d, mean.len()));
    }
    let mut out = DataMatrix::zeros(n, d);
    let mut z = vec![0.0; d];
    for r in 0..n {
        z.iter_mut().for_each(|v| *v = rng.normal());
        let row = out.row_mut(r);
        for i in 0..d {
            let mut acc = mean[i];
            for (k, zk) in z.iter().enumerate().take(i + 1) {
                acc += chol[(i, k)] * zk;
            }
            row[i] = acc;
        }
    }
    Ok(out)
}

/// Symmetric eigendecomposition by cyclic Jacobi rotations.
///
/// Eigenvalues come back in descending order; column `j` of the returned
/// matrix is the eigenvector for eigenvalue `j`.
pub fn sym_eigen(a: &DataMatrix) -> Result<(Vec<f64>, DataMatrix)> {
    let n = check_square(a)?;
    if n > MAX_EIGEN_DIM {
        return Err(Error::InvalidArgument(format!(
            "eigensolver supports at most {MAX_EIGEN_DIM} dimensions, got {n}"
        )));
    }
    let mut m = a.clone();
    let mut v = DataMatrix::identity(n);
    let scale = a.as_slice().iter().map(|x| x * x).sum::<f64>().sqrt();
    let mut converged = n <= 1;
    for _ in 0..MAX_SWEEPS {
        let mut off = 0.0;
        for p in 0..n {
            for q in p + 1..n {
                off += m[(p, q)] * m[(p, q)];
            }
        }
        if off.sqrt() <= 1e-15 * scale.max(f64::MIN_POSITIVE) || off == 0.0 {
            converged = true;
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                let apq = m[(p, q)];
                if apq == 0.0 {
                    continue;
                }
                let theta = (m[(q, q)] - m[(p, p)]) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                rotate(&mut m, &mut v, p, q, c, s);
            }
        }
    }
    if !converged {
        return Err(Error::NoConvergence { sweeps: MAX_SWEEPS });
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| m[(j, j)].total_cmp(&m[(i, i)]));
    let values = order.iter().map(|&i| m[(i, i)]).collect();
    let mut vectors = DataMatrix::zeros(n, n);
    for (new_j, &old_j) in order.iter().enumerate() {
        for i in 0..n {
            vectors[(i, new_j)] = v[(i, old_j)];
        }
    }
    Ok((values, vectors))
}

/// Applies the Jacobi rotation `Jᵀ·M·J` zeroing `M[p][q]`, and `V ← V·J`.
fn rotate(m: &mut DataMatrix, v: &mut DataMatrix, p: usize, q: usize, c: f64, s: f64) {
    let n = m.rows();
    for k in 0..n {
        let mkp = m[(k, p)];
        let mkq = m[(k, q)];
        m[(k, p)] = c * mkp - s * mkq;
        m[(k, q)] = s * mkp + c * mkq;
    }
    for k in 0..n {
        let mpk = m[(p, k)];
        let mqk = m[(q, k)];
        m[(p, k)] = c * mpk - s * mqk;
        m[(q, k)] = s * mpk + c * mqk;
    }
    for k in 0..n {
        let vkp = v[(k, p)];
        let vkq = v[(k, q)];
        v[(k, p)] = c * vkp - s * vkq;
        v[(k, q)] = s * vkp + c * vkq;
    }
}

/// All pairwise squared Euclidean distances between rows.
pub fn pairwise_sq_dists(x: &DataMatrix) -> DataMatrix {
    let n = x.rows();
    let mut d = DataMatrix::zeros(n, n);
    for i in 0..n {
        let xi = x.row(i);
        for j in i + 1..n {
            let s: f64 = xi.iter().zip(x.row(j)).map(|(a, b)| (a - b) * (a - b)).sum();
            d[(i, j)] = s;
            d[(j, i)] = s;
        }
    }
    d
}
