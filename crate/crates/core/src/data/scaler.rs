use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numeric::matrix::DataMatrix;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ScalerKind {
    /// Median and interquartile range.
    Robust,
    /// Mean and population standard deviation.
    Standard,
    MinMax,
    None,
}

impl FromStr for ScalerKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "robust" => Ok(Self::Robust),
            "standard" => Ok(Self::Standard),
            "minmax" => Ok(Self::MinMax),
            "none" => Ok(Self::None),
            _ => Err(Error::InvalidArgument(format!("unknown scaler `{s}`"))),
        }
    }
}

impl fmt::Display for ScalerKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Robust => "robust",
            Self::Standard => "standard",
            Self::MinMax => "minmax",
            Self::None => "none",
        })
    }
}

/// Per-feature affine map `x' = (x - center) / scale`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScalerState {
    pub kind: ScalerKind,
    pub center: Vec<f64>,
    pub scale: Vec<f64>,
}

/// Quantile with linear interpolation between order statistics of sorted data.
pub fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (pos - lo as f64) * (sorted[hi] - sorted[lo])
}

pub fn fit_scaler(x: &DataMatrix, kind: ScalerKind) -> Result<ScalerState> {
    if x.rows() == 0 {
        return Err(Error::EmptyDataset);
    }
    let d = x.cols();
    let mut center = vec![0.0; d];
    let mut scale = vec![1.0; d];
    for j in 0..d {
        let mut col = x.column(j);
        let (c, s) = match kind {
            ScalerKind::None => (0.0, 1.0),
            ScalerKind::Robust => {
                col.sort_by(f64::total_cmp);
                (
                    quantile_sorted(&col, 0.5),
                    quantile_sorted(&col, 0.75) - quantile_sorted(&col, 0.25),
                )
            }
            ScalerKind::Standard => {
                let n = col.len() as f64;
                let mean = col.iter().sum::<f64>() / n;
                let var = col.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
                (mean, var.sqrt())
            }
            ScalerKind::MinMax => {
                let lo = col.iter().copied().fold(f64::INFINITY, f64::min);
                let hi = col.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                (lo, hi - lo)
            }
        };
        center[j] = c;
        scale[j] = if s > 0.0 && s.is_finite() { s } else { 1.0 };
    }
    Ok(ScalerState { kind, center, scale })
}

impl ScalerState {
    pub fn identity(dim: usize) -> Self {
        Self {
            kind: ScalerKind::None,
            center: vec![0.0; dim],
            scale: vec![1.0; dim],
        }
    }

    pub fn dim(&self) -> usize {
        self.center.len()
    }

    pub fn apply(&self, x: &DataMatrix) -> Result<DataMatrix> {
        if x.cols() != self.dim() {
            return Err(Error::dim(self.dim(), x.cols()));
        }
        let mut out = x.clone();
        for r in 0..out.rows() {
            for ((v, c), s) in out.row_mut(r).iter_mut().zip(&self.center).zip(&self.scale) {
                *v = (*v - c) / s;
            }
        }
        Ok(out)
    }

    pub fn invert(&self, x: &DataMatrix) -> Result<DataMatrix> {
        if x.cols() != self.dim() {
            return Err(Error::dim(self.dim(), x.cols()));
        }
        let mut out = x.clone();
        for r in 0..out.rows() {
            for ((v, c), s) in out.row_mut(r).iter_mut().zip(&self.center).zip(&self.scale) {
                *v = *v * s + c;
            }
        }
        Ok(out)
    }
}

pub fn apply_scaler(state: &ScalerState, x: &DataMatrix) -> Result<DataMatrix> {
    state.apply(x)
}
