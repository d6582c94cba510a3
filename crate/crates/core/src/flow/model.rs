//! Coupling-layer flows and their exact log-likelihood.
//!
//! Coordinates are split by index parity. A layer with [`Parity::Even`]
//! conditions on the even coordinates and transforms the odd ones; the next
//! layer swaps roles. NICE layers add a shift, RealNVP layers apply
//! `x ⊙ exp(s̃) + t` with `s̃ = scale ⊙ tanh(s(·))`. NICE ends with a learned
//! diagonal scaling, so its log-determinant is the same for every input.
//!
//! Odd input dimensions get one zero column appended so both halves have the
//! same width. That column is only ever a conditioner: it is never shifted or
//! scaled, so its latent value stays 0 and the flow is a bijection on the
//! original coordinates. The Gaussian normalizer therefore uses the original
//! dimension.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numeric::matrix::DataMatrix;
use crate::numeric::mlp::{Activation, Mlp, MlpGrads, MlpTape};
use crate::numeric::rng::Rng;

use super::config::TrainConfig;

const LN_2PI: f64 = 1.837_877_066_409_345_5;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FlowKind {
    Nice,
    #[serde(rename = "realnvp")]
    RealNvp,
}

impl std::str::FromStr for FlowKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "nice" => Ok(FlowKind::Nice),
            "realnvp" => Ok(FlowKind::RealNvp),
            other => Err(Error::InvalidArgument(format!("unknown flow kind `{other}`"))),
        }
    }
}

impl std::fmt::Display for FlowKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            FlowKind::Nice => "nice",
            FlowKind::RealNvp => "realnvp",
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Parity {
    Even,
    Odd,
}

impl Parity {
    fn flip(self) -> Self {
        match self {
            Parity::Even => Parity::Odd,
            Parity::Odd => Parity::Even,
        }
    }

    /// (conditioning indices, transformed indices) for an internal width.
    fn split(self, dim: usize) -> (Vec<usize>, Vec<usize>) {
        let even: Vec<usize> = (0..dim).step_by(2).collect();
        let odd: Vec<usize> = (1..dim).step_by(2).collect();
        match self {
            Parity::Even => (even, odd),
            Parity::Odd => (odd, even),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CouplingLayer {
    pub parity: Parity,
    /// Additive shift network (`t` for RealNVP).
    pub shift: Mlp,
    /// RealNVP log-scale network.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub log_scale: Option<Mlp>,
    /// RealNVP per-coordinate bound on the log-scale.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scale: Option<Vec<f64>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FlowModel {
    pub kind: FlowKind,
    pub input_dim: usize,
    pub padded: bool,
    pub layers: Vec<CouplingLayer>,
    /// Final diagonal log-scales (NICE only; empty for RealNVP).
    pub scaling_logs: Vec<f64>,
}

/// Result of a forward pass.
#[derive(Clone, Debug, PartialEq)]
pub struct FlowOutput {
    /// Latents, `rows × internal_dim`.
    pub z: DataMatrix,
    /// `log |det ∂z/∂x|` per row.
    pub logdet: Vec<f64>,
}

/// Gradients laid out like [`FlowModel`]'s parameters.
#[derive(Clone, Debug, PartialEq)]
pub struct FlowGrads {
    pub layers: Vec<CouplingGrads>,
    pub scaling_logs: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct CouplingGrads {
    pub shift: MlpGrads,
    pub log_scale: Option<MlpGrads>,
    pub scale: Option<Vec<f64>>,
}

struct LayerTape {
    x_t: DataMatrix,
    shift: MlpTape,
    log_scale: Option<(MlpTape, DataMatrix)>,
    /// `s̃` for RealNVP (mask applied).
    s_tilde: Option<DataMatrix>,
}

pub fn build_flow(kind: FlowKind, dim: usize, config: &TrainConfig, rng: &mut Rng) -> Result<FlowModel> {
    if dim == 0 {
        return Err(Error::InvalidArgument("flow dimension must be at least 1".into()));
    }
    config.validate()?;
    let padded = dim % 2 == 1;
    let internal = dim + usize::from(padded);
    let half = internal / 2;
    let mut parity = Parity::Even;
    let mut layers = Vec::with_capacity(config.n_coupling);
    for _ in 0..config.n_coupling {
        let shift = Mlp::new(
            half,
            config.hidden_dim,
            config.n_hidden_layers,
            half,
            config.activation,
            true,
            rng,
        );
        let (log_scale, scale) = match kind {
            FlowKind::Nice => (None, None),
            FlowKind::RealNvp => (
                Some(Mlp::new(
                    half,
                    config.hidden_dim,
                    config.n_hidden_layers,
                    half,
                    config.activation,
                    false,
                    rng,
                )),
                Some(vec![0.0; half]),
            ),
        };
        layers.push(CouplingLayer {
            parity,
            shift,
            log_scale,
            scale,
        });
        parity = parity.flip();
    }
    let scaling_logs = match kind {
        FlowKind::Nice => vec![0.0; internal],
        FlowKind::RealNvp => Vec::new(),
    };
    Ok(FlowModel {
        kind,
        input_dim: dim,
        padded,
        layers,
        scaling_logs,
    })
}

fn gather(x: &DataMatrix, idx: &[usize]) -> DataMatrix {
    let mut out = DataMatrix::zeros(x.rows(), idx.len());
    for r in 0..x.rows() {
        let src = x.row(r);
        for (dst, &j) in out.row_mut(r).iter_mut().zip(idx) {
            *dst = src[j];
        }
    }
    out
}

fn scatter(dst: &mut DataMatrix, idx: &[usize], src: &DataMatrix) {
    for r in 0..dst.rows() {
        let s = src.row(r);
        let d = dst.row_mut(r);
        for (&j, v) in idx.iter().zip(s) {
            d[j] = *v;
        }
    }
}

fn check_finite(m: &DataMatrix, layer: usize) -> Result<()> {
    if m.is_finite() {
        Ok(())
    } else {
        Err(Error::NonFiniteActivation { layer })
    }
}

impl FlowModel {
    pub fn internal_dim(&self) -> usize {
        self.input_dim + usize::from(self.padded)
    }

    pub fn n_coupling(&self) -> usize {
        self.layers.len()
    }

    pub fn activation(&self) -> Option<Activation> {
        self.layers.first().map(|l| l.shift.activation)
    }

    /// Index of the zero pad column, if any.
    fn pad_index(&self) -> Option<usize> {
        self.padded.then(|| self.input_dim)
    }

    /// 1.0 for transformed coordinates that are real, 0.0 for the pad.
    fn transform_mask(&self, transformed: &[usize]) -> Vec<f64> {
        let pad = self.pad_index();
        transformed
            .iter()
            .map(|&j| if Some(j) == pad { 0.0 } else { 1.0 })
            .collect()
    }

    /// Appends the zero pad column when needed.
    pub fn pad_input(&self, x: &DataMatrix) -> Result<DataMatrix> {
        if x.cols() != self.input_dim {
            return Err(Error::dim(self.input_dim, x.cols()));
        }
        if !self.padded {
            return Ok(x.clone());
        }
        let d = self.internal_dim();
        let mut out = DataMatrix::zeros(x.rows(), d);
        for r in 0..x.rows() {
            out.row_mut(r)[..self.input_dim].copy_from_slice(x.row(r));
        }
        Ok(out)
    }

    fn scaling_mask(&self) -> Vec<f64> {
        let pad = self.pad_index();
        (0..self.internal_dim())
            .map(|j| if Some(j) == pad { 0.0 } else { 1.0 })
            .collect()
    }

    /// Maps data to latents. `x` has `input_dim` columns.
    pub fn forward(&self, x: &DataMatrix) -> Result<FlowOutput> {
        let h = self.pad_input(x)?;
        self.forward_padded(h, None)
    }

    fn forward_padded(&self, mut h: DataMatrix, mut tapes: Option<&mut Vec<LayerTape>>) -> Result<FlowOutput> {
        let n = h.rows();
        let dim = self.internal_dim();
        let mut logdet = vec![0.0; n];
        for (li, layer) in self.layers.iter().enumerate() {
            let (cond, trans) = layer.parity.split(dim);
            let mask = self.transform_mask(&trans);
            let x_c = gather(&h, &cond);
            let x_t = gather(&h, &trans);
            let (shift_out, shift_tape) = layer.shift.forward_cached(&x_c)?;
            check_finite(&shift_out, li)?;
            let mut y_t = x_t.clone();
            let mut s_tilde_keep = None;
            let mut ls_keep = None;
            match (&layer.log_scale, &layer.scale) {
                (Some(ls_net), Some(scale)) => {
                    let (u, ls_tape) = ls_net.forward_cached(&x_c)?;
                    check_finite(&u, li)?;
                    let mut s_tilde = u.clone();
                    let mut tanh_u = u;
                    for r in 0..n {
                        let st = s_tilde.row_mut(r);
                        let th = tanh_u.row_mut(r);
                        for j in 0..st.len() {
                            th[j] = th[j].tanh();
                            st[j] = mask[j] * scale[j] * th[j];
                        }
                    }
                    for r in 0..n {
                        let st = s_tilde.row(r);
                        let sh = shift_out.row(r);
                        let yr = y_t.row_mut(r);
                        let mut ld = 0.0;
                        for j in 0..yr.len() {
                            yr[j] = yr[j] * st[j].exp() + mask[j] * sh[j];
                            ld += st[j];
                        }
                        logdet[r] += ld;
                    }
                    s_tilde_keep = Some(s_tilde);
                    ls_keep = Some((ls_tape, tanh_u));
                }
                _ => {
                    for r in 0..n {
                        let sh = shift_out.row(r);
                        for (j, y) in y_t.row_mut(r).iter_mut().enumerate() {
                            *y += mask[j] * sh[j];
                        }
                    }
                }
            }
            check_finite(&y_t, li)?;
            scatter(&mut h, &trans, &y_t);
            if let Some(t) = tapes.as_deref_mut() {
                t.push(LayerTape {
                    x_t,
                    shift: shift_tape,
                    log_scale: ls_keep,
                    s_tilde: s_tilde_keep,
                });
            }
        }
        if self.kind == FlowKind::Nice {
            let mask = self.scaling_mask();
            let ld: f64 = self
                .scaling_logs
                .iter()
                .zip(&mask)
                .map(|(s, m)| s * m)
                .sum();
            let factors: Vec<f64> = self
                .scaling_logs
                .iter()
                .zip(&mask)
                .map(|(s, m)| (s * m).exp())
                .collect();
            for r in 0..n {
                for (v, f) in h.row_mut(r).iter_mut().zip(&factors) {
                    *v *= f;
                }
            }
            logdet.iter_mut().for_each(|l| *l += ld);
            check_finite(&h, self.layers.len())?;
        }
        Ok(FlowOutput { z: h, logdet })
    }

    /// Maps latents (`internal_dim` columns) back to data (`input_dim` columns).
    pub fn inverse(&self, z: &DataMatrix) -> Result<DataMatrix> {
        let dim = self.internal_dim();
        if z.cols() != dim {
            return Err(Error::dim(dim, z.cols()));
        }
        let n = z.rows();
        let mut h = z.clone();
        if self.kind == FlowKind::Nice {
            let mask = self.scaling_mask();
            let factors: Vec<f64> = self
                .scaling_logs
                .iter()
                .zip(&mask)
                .map(|(s, m)| (-s * m).exp())
                .collect();
            for r in 0..n {
                for (v, f) in h.row_mut(r).iter_mut().zip(&factors) {
                    *v *= f;
                }
            }
        }
        for (li, layer) in self.layers.iter().enumerate().rev() {
            let (cond, trans) = layer.parity.split(dim);
            let mask = self.transform_mask(&trans);
            let y_c = gather(&h, &cond);
            let mut y_t = gather(&h, &trans);
            let shift_out = layer.shift.apply(&y_c)?;
            let s_tilde = match (&layer.log_scale, &layer.scale) {
                (Some(ls_net), Some(scale)) => {
                    let mut u = ls_net.apply(&y_c)?;
                    for r in 0..n {
                        for (j, v) in u.row_mut(r).iter_mut().enumerate() {
                            *v = mask[j] * scale[j] * v.tanh();
                        }
                    }
                    Some(u)
                }
                _ => None,
            };
            for r in 0..n {
                let sh = shift_out.row(r);
                let st = s_tilde.as_ref().map(|s| s.row(r));
                for (j, y) in y_t.row_mut(r).iter_mut().enumerate() {
                    *y -= mask[j] * sh[j];
                    if let Some(st) = st {
                        *y *= (-st[j]).exp();
                    }
                }
            }
            check_finite(&y_t, li)?;
            scatter(&mut h, &trans, &y_t);
        }
        if !self.padded {
            return Ok(h);
        }
        let mut out = DataMatrix::zeros(n, self.input_dim);
        for r in 0..n {
            out.row_mut(r).copy_from_slice(&h.row(r)[..self.input_dim]);
        }
        Ok(out)
    }

    /// Exact `log p(x)` under a standard-normal prior, per row.
    pub fn log_likelihood(&self, x: &DataMatrix) -> Result<Vec<f64>> {
        let out = self.forward(x)?;
        Ok(self.log_likelihood_from(&out))
    }

    fn log_likelihood_from(&self, out: &FlowOutput) -> Vec<f64> {
        let norm = -0.5 * self.input_dim as f64 * LN_2PI;
        out.z
            .row_iter()
            .zip(&out.logdet)
            .map(|(z, ld)| norm - 0.5 * z.iter().map(|v| v * v).sum::<f64>() + ld)
            .collect()
    }

    /// Mean negative log-likelihood over the rows of `x`.
    pub fn mean_nll(&self, x: &DataMatrix) -> Result<f64> {
        let ll = self.log_likelihood(x)?;
        Ok(-ll.iter().sum::<f64>() / ll.len().max(1) as f64)
    }

    /// Mean NLL of a batch together with its gradient w.r.t. all parameters.
    pub fn nll_and_grad(&self, x: &DataMatrix) -> Result<(f64, FlowGrads)> {
        let h = self.pad_input(x)?;
        let n = h.rows();
        if n == 0 {
            return Err(Error::EmptyDataset);
        }
        let dim = self.internal_dim();
        let mut tapes = Vec::with_capacity(self.layers.len());
        let out = self.forward_padded(h, Some(&mut tapes))?;
        let ll = self.log_likelihood_from(&out);
        let loss = -ll.iter().sum::<f64>() / n as f64;

        let inv_n = 1.0 / n as f64;
        // dL/dz = z / n; dL/dlogdet = -1/n for every row
        let mut g = out.z.clone();
        g.as_mut_slice().iter_mut().for_each(|v| *v *= inv_n);
        let g_logdet = -inv_n;

        let mut scaling_grads = Vec::new();
        if self.kind == FlowKind::Nice {
            let mask = self.scaling_mask();
            scaling_grads = vec![0.0; dim];
            for r in 0..n {
                let zr = out.z.row(r);
                let gr = g.row(r);
                for j in 0..dim {
                    scaling_grads[j] += gr[j] * zr[j];
                }
            }
            for j in 0..dim {
                scaling_grads[j] = mask[j] * (scaling_grads[j] + g_logdet * n as f64);
            }
            let factors: Vec<f64> = self
                .scaling_logs
                .iter()
                .zip(&mask)
                .map(|(s, m)| (s * m).exp())
                .collect();
            for r in 0..n {
                for (v, f) in g.row_mut(r).iter_mut().zip(&factors) {
                    *v *= f;
                }
            }
        }

        let mut layer_grads = Vec::with_capacity(self.layers.len());
        for (layer, tape) in self.layers.iter().zip(&tapes).rev() {
            let (cond, trans) = layer.parity.split(dim);
            let mask = self.transform_mask(&trans);
            let g_t = gather(&g, &trans);
            let mut g_c = gather(&g, &cond);

            let mut up_shift = g_t.clone();
            for r in 0..n {
                for (j, v) in up_shift.row_mut(r).iter_mut().enumerate() {
                    *v *= mask[j];
                }
            }
            let (shift_grads, dc_shift) = layer.shift.backward(&tape.shift, &up_shift)?;
            add_assign(&mut g_c, &dc_shift);

            let mut g_x_t = g_t.clone();
            let mut ls_grads = None;
            let mut scale_grads = None;
            if let (Some(ls_net), Some(scale), Some((ls_tape, tanh_u)), Some(s_tilde)) =
                (&layer.log_scale, &layer.scale, &tape.log_scale, &tape.s_tilde)
            {
                let half = scale.len();
                let mut d_scale = vec![0.0; half];
                let mut d_u = DataMatrix::zeros(n, half);
                for r in 0..n {
                    let gt = g_t.row(r);
                    let xt = tape.x_t.row(r);
                    let st = s_tilde.row(r);
                    let th = tanh_u.row(r);
                    let gx = g_x_t.row_mut(r);
                    let du = d_u.row_mut(r);
                    for j in 0..half {
                        let e = st[j].exp();
                        let d_st = gt[j] * xt[j] * e + g_logdet;
                        gx[j] = gt[j] * e;
                        d_scale[j] += d_st * mask[j] * th[j];
                        du[j] = d_st * mask[j] * scale[j] * (1.0 - th[j] * th[j]);
                    }
                }
                let (lg, dc_ls) = ls_net.backward(ls_tape, &d_u)?;
                add_assign(&mut g_c, &dc_ls);
                ls_grads = Some(lg);
                scale_grads = Some(d_scale);
            }
            scatter(&mut g, &cond, &g_c);
            scatter(&mut g, &trans, &g_x_t);
            layer_grads.push(CouplingGrads {
                shift: shift_grads,
                log_scale: ls_grads,
                scale: scale_grads,
            });
        }
        layer_grads.reverse();
        Ok((
            loss,
            FlowGrads {
                layers: layer_grads,
                scaling_logs: scaling_grads,
            },
        ))
    }

    /// Visits parameter buffers in a fixed order. The flag marks buffers
    /// that receive weight decay (coupling-network weight matrices).
    pub fn visit_params<'a>(&'a self, f: &mut impl FnMut(&'a [f64], bool)) {
        for l in &self.layers {
            l.shift.visit_params(f);
            if let Some(ls) = &l.log_scale {
                ls.visit_params(f);
            }
            if let Some(s) = &l.scale {
                f(s, false);
            }
        }
        if !self.scaling_logs.is_empty() {
            f(&self.scaling_logs, false);
        }
    }

    pub fn visit_params_mut(&mut self, f: &mut impl FnMut(&mut [f64], bool)) {
        for l in &mut self.layers {
            l.shift.visit_params_mut(f);
            if let Some(ls) = &mut l.log_scale {
                ls.visit_params_mut(f);
            }
            if let Some(s) = &mut l.scale {
                f(s, false);
            }
        }
        if !self.scaling_logs.is_empty() {
            f(&mut self.scaling_logs, false);
        }
    }

    /// Mutable parameter buffers in `visit_params` order.
    pub fn params_mut(&mut self) -> Vec<(&mut [f64], bool)> {
        let mut out = Vec::new();
        for l in &mut self.layers {
            out.extend(l.shift.params_mut());
            if let Some(ls) = &mut l.log_scale {
                out.extend(ls.params_mut());
            }
            if let Some(s) = &mut l.scale {
                out.push((&mut s[..], false));
            }
        }
        if !self.scaling_logs.is_empty() {
            out.push((&mut self.scaling_logs[..], false));
        }
        out
    }

    pub fn params_flat(&self) -> Vec<f64> {
        let mut v = Vec::new();
        self.visit_params(&mut |s, _| v.extend_from_slice(s));
        v
    }

    pub fn set_params_flat(&mut self, flat: &[f64]) -> Result<()> {
        let total: usize = {
            let mut t = 0;
            self.visit_params(&mut |s, _| t += s.len());
            t
        };
        if flat.len() != total {
            return Err(Error::dim(total, flat.len()));
        }
        let mut off = 0;
        self.visit_params_mut(&mut |s, _| {
            s.copy_from_slice(&flat[off..off + s.len()]);
            off += s.len();
        });
        Ok(())
    }

    pub fn n_params(&self) -> usize {
        let mut t = 0;
        self.visit_params(&mut |s, _| t += s.len());
        t
    }
}

fn add_assign(a: &mut DataMatrix, b: &DataMatrix) {
    for (x, y) in a.as_mut_slice().iter_mut().zip(b.as_slice()) {
        *x += y;
    }
}

impl FlowGrads {
    /// Visits gradient buffers in the same order as [`FlowModel::visit_params`].
    pub fn visit<'a>(&'a self, f: &mut impl FnMut(&'a [f64])) {
        for l in &self.layers {
            l.shift.visit(f);
            if let Some(ls) = &l.log_scale {
                ls.visit(f);
            }
            if let Some(s) = &l.scale {
                f(s);
            }
        }
        if !self.scaling_logs.is_empty() {
            f(&self.scaling_logs);
        }
    }

    pub fn flatten(&self) -> Vec<f64> {
        let mut v = Vec::new();
        self.visit(&mut |s| v.extend_from_slice(s));
        v
    }

    pub fn buffers(&self) -> Vec<&[f64]> {
        let mut v = Vec::new();
        self.visit(&mut |s| v.push(s));
        v
    }
}
