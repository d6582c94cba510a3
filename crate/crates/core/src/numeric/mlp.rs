//! Fully connected networks with hand-written reverse mode.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

use super::matrix::{gemm, DataMatrix};
use super::rng::Rng;

pub const LEAKY_SLOPE: f64 = 0.01;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    Relu,
    LeakyRelu,
    Tanh,
    Identity,
}

impl Activation {
    fn apply(self, x: f64) -> f64 {
        match self {
            Activation::Relu => x.max(0.0),
            Activation::LeakyRelu => {
                if x > 0.0 {
                    x
                } else {
                    LEAKY_SLOPE * x
                }
            }
            Activation::Tanh => x.tanh(),
            Activation::Identity => x,
        }
    }

    /// Derivative given the pre-activation `x` and the output `y`.
    fn derivative(self, x: f64, y: f64) -> f64 {
        match self {
            Activation::Relu => {
                if x > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::LeakyRelu => {
                if x > 0.0 {
                    1.0
                } else {
                    LEAKY_SLOPE
                }
            }
            Activation::Tanh => 1.0 - y * y,
            Activation::Identity => 1.0,
        }
    }
}

impl std::str::FromStr for Activation {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "relu" => Ok(Activation::Relu),
            "leaky_relu" => Ok(Activation::LeakyRelu),
            "tanh" => Ok(Activation::Tanh),
            "identity" => Ok(Activation::Identity),
            other => Err(Error::InvalidArgument(format!("unknown activation `{other}`"))),
        }
    }
}

/// Affine layer `y = x · W + b` with `W` stored as `in × out`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Linear {
    pub weight: DataMatrix,
    pub bias: Vec<f64>,
}

impl Linear {
    pub fn zeros(fan_in: usize, fan_out: usize) -> Self {
        Self {
            weight: DataMatrix::zeros(fan_in, fan_out),
            bias: vec![0.0; fan_out],
        }
    }

    /// He-uniform weights, zero bias.
    pub fn he_uniform(fan_in: usize, fan_out: usize, rng: &mut Rng) -> Self {
        let bound = (6.0 / fan_in.max(1) as f64).sqrt();
        let values = (0..fan_in * fan_out)
            .map(|_| rng.uniform_range(-bound, bound))
            .collect();
        Self {
            weight: DataMatrix::from_vec_unchecked(fan_in, fan_out, values),
            bias: vec![0.0; fan_out],
        }
    }

    pub fn fan_in(&self) -> usize {
        self.weight.rows()
    }

    pub fn fan_out(&self) -> usize {
        self.weight.cols()
    }

    fn forward(&self, x: &DataMatrix) -> DataMatrix {
        let n = x.rows();
        let out_dim = self.fan_out();
        let mut values = Vec::with_capacity(n * out_dim);
        for _ in 0..n {
            values.extend_from_slice(&self.bias);
        }
        gemm(
            false,
            false,
            n,
            self.fan_in(),
            out_dim,
            1.0,
            x.as_slice(),
            self.weight.as_slice(),
            1.0,
            &mut values,
        );
        DataMatrix::from_vec_unchecked(n, out_dim, values)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Mlp {
    pub layers: Vec<Linear>,
    pub activation: Activation,
}

/// Gradients laid out like the network's parameters.
#[derive(Clone, Debug, PartialEq)]
pub struct MlpGrads {
    pub layers: Vec<Linear>,
}

/// Intermediate values kept by [`Mlp::forward_cached`] for the backward pass.
#[derive(Clone, Debug)]
pub struct MlpTape {
    /// Input to each layer.
    inputs: Vec<DataMatrix>,
    /// Pre-activations of each hidden layer.
    preacts: Vec<DataMatrix>,
}

impl Mlp {
    /// `input → hidden × n_hidden → output`; hidden layers He-uniform.
    ///
    /// With `zero_output` the last layer starts at zero so the network
    /// outputs 0 for every input.
    pub fn new(
        input: usize,
        hidden: usize,
        n_hidden: usize,
        output: usize,
        activation: Activation,
        zero_output: bool,
        rng: &mut Rng,
    ) -> Self {
        let mut layers = Vec::with_capacity(n_hidden + 1);
        let mut fan_in = input;
        for _ in 0..n_hidden {
            layers.push(Linear::he_uniform(fan_in, hidden, rng));
            fan_in = hidden;
        }
        layers.push(if zero_output {
            Linear::zeros(fan_in, output)
        } else {
            Linear::he_uniform(fan_in, output, rng)
        });
        Self { layers, activation }
    }

    /// Single layer with the given weight (`in × out`) and bias.
    pub fn linear(weight: DataMatrix, bias: Vec<f64>) -> Result<Self> {
        if bias.len() != weight.cols() {
            return Err(Error::dim(weight.cols(), bias.len()));
        }
        Ok(Self {
            layers: vec![Linear { weight, bias }],
            activation: Activation::Identity,
        })
    }

    pub fn input_dim(&self) -> usize {
        self.layers.first().map_or(0, Linear::fan_in)
    }

    pub fn output_dim(&self) -> usize {
        self.layers.last().map_or(0, Linear::fan_out)
    }

    pub fn n_params(&self) -> usize {
        self.layers
            .iter()
            .map(|l| l.weight.as_slice().len() + l.bias.len())
            .sum()
    }

    fn check_input(&self, x: &DataMatrix) -> Result<()> {
        if x.cols() != self.input_dim() {
            return Err(Error::dim(self.input_dim(), x.cols()));
        }
        for w in self.layers.windows(2) {
            if w[0].fan_out() != w[1].fan_in() {
                return Err(Error::dim(w[0].fan_out(), w[1].fan_in()));
            }
        }
        Ok(())
    }

    /// Batched forward pass. The final layer has no activation.
    pub fn apply(&self, x: &DataMatrix) -> Result<DataMatrix> {
        self.check_input(x)?;
        let last = self.layers.len() - 1;
        let mut h = x.clone();
        for (i, layer) in self.layers.iter().enumerate() {
            h = layer.forward(&h);
            if i < last {
                let act = self.activation;
                h.as_mut_slice().iter_mut().for_each(|v| *v = act.apply(*v));
            }
        }
        Ok(h)
    }

    pub fn forward_cached(&self, x: &DataMatrix) -> Result<(DataMatrix, MlpTape)> {
        self.check_input(x)?;
        let last = self.layers.len() - 1;
        let mut inputs = Vec::with_capacity(self.layers.len());
        let mut preacts = Vec::with_capacity(last);
        let mut h = x.clone();
        for (i, layer) in self.layers.iter().enumerate() {
            let z = layer.forward(&h);
            inputs.push(h);
            if i < last {
                let act = self.activation;
                let mut a = z.clone();
                a.as_mut_slice().iter_mut().for_each(|v| *v = act.apply(*v));
                preacts.push(z);
                h = a;
            } else {
                h = z;
            }
        }
        Ok((h, MlpTape { inputs, preacts }))
    }

    /// Gradients of `⟨upstream, output⟩` w.r.t. every parameter and the input.
    pub fn backward(&self, tape: &MlpTape, upstream: &DataMatrix) -> Result<(MlpGrads, DataMatrix)> {
        let n = tape.inputs[0].rows();
        if upstream.shape() != (n, self.output_dim()) {
            return Err(Error::dim(n * self.output_dim(), upstream.rows() * upstream.cols()));
        }
        let mut grads: Vec<Linear> = Vec::with_capacity(self.layers.len());
        let mut delta = upstream.clone();
        for (i, layer) in self.layers.iter().enumerate().rev() {
            let input = &tape.inputs[i];
            let (fan_in, fan_out) = (layer.fan_in(), layer.fan_out());
            let mut gw = DataMatrix::zeros(fan_in, fan_out);
            gemm(
                true,
                false,
                fan_in,
                n,
                fan_out,
                1.0,
                input.as_slice(),
                delta.as_slice(),
                0.0,
                gw.as_mut_slice(),
            );
            let mut gb = vec![0.0; fan_out];
            for r in delta.row_iter() {
                for (g, d) in gb.iter_mut().zip(r) {
                    *g += d;
                }
            }
            grads.push(Linear { weight: gw, bias: gb });

            let mut dx = DataMatrix::zeros(n, fan_in);
            gemm(
                false,
                true,
                n,
                fan_out,
                fan_in,
                1.0,
                delta.as_slice(),
                layer.weight.as_slice(),
                0.0,
                dx.as_mut_slice(),
            );
            if i > 0 {
                let pre = &tape.preacts[i - 1];
                let post = input;
                let act = self.activation;
                for ((d, &x), &y) in dx
                    .as_mut_slice()
                    .iter_mut()
                    .zip(pre.as_slice())
                    .zip(post.as_slice())
                {
                    *d *= act.derivative(x, y);
                }
            }
            delta = dx;
        }
        grads.reverse();
        Ok((MlpGrads { layers: grads }, delta))
    }

    /// Convenience wrapper: forward with tape, then backward.
    pub fn backprop(&self, x: &DataMatrix, upstream: &DataMatrix) -> Result<(MlpGrads, DataMatrix)> {
        let (_, tape) = self.forward_cached(x)?;
        self.backward(&tape, upstream)
    }

    /// Visits parameter buffers in a fixed order: per layer, weight then bias.
    pub fn visit_params<'a>(&'a self, f: &mut impl FnMut(&'a [f64], bool)) {
        for l in &self.layers {
            f(l.weight.as_slice(), true);
            f(&l.bias, false);
        }
    }

    pub fn visit_params_mut(&mut self, f: &mut impl FnMut(&mut [f64], bool)) {
        for l in &mut self.layers {
            f(l.weight.as_mut_slice(), true);
            f(&mut l.bias, false);
        }
    }

    /// Mutable parameter buffers in visiting order, flagged like `visit_params`.
    pub fn params_mut(&mut self) -> Vec<(&mut [f64], bool)> {
        let mut out = Vec::with_capacity(2 * self.layers.len());
        for l in &mut self.layers {
            out.push((l.weight.as_mut_slice(), true));
            out.push((&mut l.bias[..], false));
        }
        out
    }
}

impl MlpGrads {
    pub fn zeros_like(net: &Mlp) -> Self {
        Self {
            layers: net
                .layers
                .iter()
                .map(|l| Linear::zeros(l.fan_in(), l.fan_out()))
                .collect(),
        }
    }

    pub fn visit<'a>(&'a self, f: &mut impl FnMut(&'a [f64])) {
        for l in &self.layers {
            f(l.weight.as_slice());
            f(&l.bias);
        }
    }

    pub fn flatten(&self) -> Vec<f64> {
        let mut out = Vec::new();
        self.visit(&mut |s| out.extend_from_slice(s));
        out
    }
}
