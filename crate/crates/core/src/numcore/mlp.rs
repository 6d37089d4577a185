use ndarray::{Array1, Array2, ArrayView2, Axis, Zip};
use rand::Rng;
use std::sync::atomic::{AtomicU64, Ordering};

use crate::error::{Error, Result};
use crate::rng;

/// Sigmoid outputs are clamped to `[PROB_CLAMP, 1 - PROB_CLAMP]` before any log.
pub const PROB_CLAMP: f64 = 1e-7;

static NEXT_VERSION: AtomicU64 = AtomicU64::new(1);

fn fresh_version() -> u64 {
    NEXT_VERSION.fetch_add(1, Ordering::Relaxed)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    Identity,
    Relu,
    Sigmoid,
    Tanh,
}

impl Activation {
    fn apply(self, z: &mut Array2<f64>) {
        match self {
            Activation::Identity => {}
            Activation::Relu => z.mapv_inplace(|v| v.max(0.0)),
            Activation::Sigmoid => z.mapv_inplace(sigmoid),
            Activation::Tanh => z.mapv_inplace(f64::tanh),
        }
    }

    /// Multiplies `grad` in place by the derivative, given the pre-activation
    /// `z` and the activation output `a`.
    fn backprop(self, grad: &mut Array2<f64>, z: &Array2<f64>, a: &Array2<f64>) {
        match self {
            Activation::Identity => {}
            Activation::Relu => Zip::from(grad).and(z).for_each(|g, &z| {
                if z <= 0.0 {
                    *g = 0.0;
                }
            }),
            Activation::Sigmoid => Zip::from(grad).and(a).for_each(|g, &y| *g *= y * (1.0 - y)),
            Activation::Tanh => Zip::from(grad).and(a).for_each(|g, &y| *g *= 1.0 - y * y),
        }
    }

    pub(crate) fn code(self) -> u8 {
        match self {
            Activation::Identity => 0,
            Activation::Relu => 1,
            Activation::Sigmoid => 2,
            Activation::Tanh => 3,
        }
    }

    pub(crate) fn from_code(code: u8) -> Option<Self> {
        Some(match code {
            0 => Activation::Identity,
            1 => Activation::Relu,
            2 => Activation::Sigmoid,
            3 => Activation::Tanh,
            _ => return None,
        })
    }
}

#[inline]
pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// One fully-connected layer; `weight` is `out × in`.
#[derive(Debug, Clone, PartialEq)]
pub struct Dense {
    pub weight: Array2<f64>,
    pub bias: Array1<f64>,
}

impl Dense {
    pub fn zeros(fan_in: usize, fan_out: usize) -> Self {
        Dense { weight: Array2::zeros((fan_out, fan_in)), bias: Array1::zeros(fan_out) }
    }

    pub fn fan_in(&self) -> usize {
        self.weight.ncols()
    }

    pub fn fan_out(&self) -> usize {
        self.weight.nrows()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DenseGrad {
    pub weight: Array2<f64>,
    pub bias: Array1<f64>,
}

/// Parameter gradients, one block per layer, shaped like the network.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub layers: Vec<DenseGrad>,
}

impl Gradients {
    pub fn zeros_like(net: &Mlp) -> Self {
        Gradients {
            layers: net
                .layers
                .iter()
                .map(|l| DenseGrad { weight: Array2::zeros(l.weight.raw_dim()), bias: Array1::zeros(l.bias.raw_dim()) })
                .collect(),
        }
    }

    pub fn add_assign(&mut self, other: &Gradients) {
        for (a, b) in self.layers.iter_mut().zip(&other.layers) {
            a.weight += &b.weight;
            a.bias += &b.bias;
        }
    }

    pub fn scale(&mut self, factor: f64) {
        for l in &mut self.layers {
            l.weight *= factor;
            l.bias *= factor;
        }
    }

    pub fn all_finite(&self) -> bool {
        self.layers.iter().all(|l| l.weight.iter().chain(l.bias.iter()).all(|v| v.is_finite()))
    }

    /// Flattened view in the same order as [`Mlp::flat_params`].
    pub fn flatten(&self) -> Vec<f64> {
        let mut out = Vec::new();
        for l in &self.layers {
            out.extend(l.weight.iter());
            out.extend(l.bias.iter());
        }
        out
    }
}

/// Intermediate values recorded by [`Mlp::forward_tape`].
#[derive(Debug, Clone)]
pub struct Tape {
    version: u64,
    /// Layer inputs; `inputs[0]` is the batch itself.
    inputs: Vec<Array2<f64>>,
    /// Pre-activations of every layer.
    pre: Vec<Array2<f64>>,
    output: Array2<f64>,
}

impl Tape {
    pub fn output(&self) -> &Array2<f64> {
        &self.output
    }

    /// Pre-activation of the final layer (the logit for a sigmoid network).
    pub fn logits(&self) -> &Array2<f64> {
        self.pre.last().expect("tape of a network with at least one layer")
    }

    /// Input of the final layer, i.e. the last hidden representation.
    pub fn penultimate(&self) -> &Array2<f64> {
        self.inputs.last().expect("tape of a network with at least one layer")
    }
}

/// Multi-layer perceptron with a shared hidden activation.
#[derive(Debug, Clone)]
pub struct Mlp {
    layers: Vec<Dense>,
    hidden: Activation,
    output: Activation,
    version: u64,
}

impl PartialEq for Mlp {
    fn eq(&self, other: &Self) -> bool {
        self.layers == other.layers && self.hidden == other.hidden && self.output == other.output
    }
}

impl Mlp {
    /// Kaiming-style Gaussian initialization (std = sqrt(2 / fan_in)), zero biases.
    pub fn new<R: Rng + ?Sized>(dims: &[usize], hidden: Activation, output: Activation, rng: &mut R) -> Result<Self> {
        let mut net = Self::zeros(dims, hidden, output)?;
        for layer in &mut net.layers {
            let std = (2.0 / layer.fan_in() as f64).sqrt();
            let buf = layer.weight.as_slice_mut().expect("standard layout");
            rng::fill_normal(rng, buf);
            buf.iter_mut().for_each(|w| *w *= std);
        }
        Ok(net)
    }

    pub fn zeros(dims: &[usize], hidden: Activation, output: Activation) -> Result<Self> {
        if dims.len() < 2 {
            return Err(Error::Shape(format!("need at least two layer dims, got {dims:?}")));
        }
        if dims.contains(&0) {
            return Err(Error::Shape(format!("zero-width layer in {dims:?}")));
        }
        let layers = dims.windows(2).map(|w| Dense::zeros(w[0], w[1])).collect();
        Ok(Mlp { layers, hidden, output, version: fresh_version() })
    }

    pub fn from_layers(layers: Vec<Dense>, hidden: Activation, output: Activation) -> Result<Self> {
        if layers.is_empty() {
            return Err(Error::Shape("network has no layers".into()));
        }
        for (i, l) in layers.iter().enumerate() {
            if l.bias.len() != l.fan_out() {
                return Err(Error::Shape(format!(
                    "layer {i}: bias has {} entries for {} outputs",
                    l.bias.len(),
                    l.fan_out()
                )));
            }
            if i > 0 && layers[i - 1].fan_out() != l.fan_in() {
                return Err(Error::Shape(format!(
                    "layer {i} expects {} inputs but layer {} produces {}",
                    l.fan_in(),
                    i - 1,
                    layers[i - 1].fan_out()
                )));
            }
        }
        Ok(Mlp { layers, hidden, output, version: fresh_version() })
    }

    pub fn layers(&self) -> &[Dense] {
        &self.layers
    }

    /// Mutable access to the parameters. Invalidates outstanding tapes.
    pub fn layers_mut(&mut self) -> &mut [Dense] {
        self.version = fresh_version();
        &mut self.layers
    }

    pub fn dims(&self) -> Vec<usize> {
        let mut dims = vec![self.layers[0].fan_in()];
        dims.extend(self.layers.iter().map(Dense::fan_out));
        dims
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].fan_in()
    }

    pub fn output_dim(&self) -> usize {
        self.layers.last().map(Dense::fan_out).unwrap_or(0)
    }

    pub fn hidden_activation(&self) -> Activation {
        self.hidden
    }

    pub fn output_activation(&self) -> Activation {
        self.output
    }

    pub fn param_count(&self) -> usize {
        self.layers.iter().map(|l| l.weight.len() + l.bias.len()).sum()
    }

    pub fn flat_params(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.param_count());
        for l in &self.layers {
            out.extend(l.weight.iter());
            out.extend(l.bias.iter());
        }
        out
    }

    pub fn set_flat_params(&mut self, flat: &[f64]) -> Result<()> {
        if flat.len() != self.param_count() {
            return Err(Error::Shape(format!("expected {} parameters, got {}", self.param_count(), flat.len())));
        }
        let mut it = flat.iter().copied();
        for l in self.layers_mut() {
            l.weight.iter_mut().chain(l.bias.iter_mut()).for_each(|p| *p = it.next().unwrap());
        }
        Ok(())
    }

    fn check_input(&self, batch: &ArrayView2<f64>) -> Result<()> {
        if batch.ncols() != self.input_dim() {
            return Err(Error::Shape(format!(
                "batch has {} columns, network expects {}",
                batch.ncols(),
                self.input_dim()
            )));
        }
        Ok(())
    }

    fn affine(layer: &Dense, x: &ArrayView2<f64>) -> Array2<f64> {
        let mut z = x.dot(&layer.weight.t());
        z += &layer.bias;
        z
    }

    pub fn forward(&self, batch: ArrayView2<f64>) -> Result<Array2<f64>> {
        self.check_input(&batch)?;
        let last = self.layers.len() - 1;
        let mut a = Self::affine(&self.layers[0], &batch);
        for (i, layer) in self.layers.iter().enumerate() {
            if i > 0 {
                a = Self::affine(layer, &a.view());
            }
            if i < last {
                self.hidden.apply(&mut a);
            } else {
                self.output.apply(&mut a);
            }
        }
        Ok(a)
    }

    /// Forward pass that also returns the last hidden representation.
    pub fn forward_features(&self, batch: ArrayView2<f64>) -> Result<(Array2<f64>, Array2<f64>)> {
        let Tape { output, mut inputs, .. } = self.forward_tape(batch)?;
        let features = inputs.pop().expect("at least one layer");
        Ok((output, features))
    }

    pub fn forward_tape(&self, batch: ArrayView2<f64>) -> Result<Tape> {
        self.check_input(&batch)?;
        let last = self.layers.len() - 1;
        let mut inputs = Vec::with_capacity(self.layers.len());
        let mut pre = Vec::with_capacity(self.layers.len());
        let mut x = batch.to_owned();
        for (i, layer) in self.layers.iter().enumerate() {
            let z = Self::affine(layer, &x.view());
            let mut a = z.clone();
            if i < last {
                self.hidden.apply(&mut a);
            } else {
                self.output.apply(&mut a);
            }
            inputs.push(x);
            pre.push(z);
            x = a;
        }
        Ok(Tape { version: self.version, inputs, pre, output: x })
    }

    fn check_tape(&self, tape: &Tape, grad_rows: usize, grad_cols: usize) -> Result<()> {
        if tape.version != self.version {
            return Err(Error::StaleTape);
        }
        if tape.output.dim() != (grad_rows, grad_cols) {
            return Err(Error::Shape(format!(
                "output gradient is {grad_rows}x{grad_cols}, output is {:?}",
                tape.output.dim()
            )));
        }
        Ok(())
    }

    /// Gradients of a scalar loss given `dL/d(output)`.
    ///
    /// Returns the parameter gradients and `dL/d(input)`.
    pub fn backward(&self, tape: &Tape, output_grad: &Array2<f64>) -> Result<(Gradients, Array2<f64>)> {
        self.check_tape(tape, output_grad.nrows(), output_grad.ncols())?;
        let mut delta = output_grad.clone();
        let last = self.layers.len() - 1;
        self.output.backprop(&mut delta, &tape.pre[last], &tape.output);
        self.backprop_from(tape, delta, true).map(|(g, x)| (g.expect("requested"), x))
    }

    /// Like [`Mlp::backward`] but starting from `dL/d(pre-activation of the last layer)`.
    pub fn backward_from_logits(&self, tape: &Tape, logit_grad: &Array2<f64>) -> Result<(Gradients, Array2<f64>)> {
        self.check_tape(tape, logit_grad.nrows(), logit_grad.ncols())?;
        self.backprop_from(tape, logit_grad.clone(), true).map(|(g, x)| (g.expect("requested"), x))
    }

    /// Only `dL/d(input)` from `dL/d(pre-activation of the last layer)`; skips
    /// the weight-gradient GEMMs.
    pub fn input_grad_from_logits(&self, tape: &Tape, logit_grad: &Array2<f64>) -> Result<Array2<f64>> {
        self.check_tape(tape, logit_grad.nrows(), logit_grad.ncols())?;
        self.backprop_from(tape, logit_grad.clone(), false).map(|(_, x)| x)
    }

    fn backprop_from(
        &self,
        tape: &Tape,
        mut delta: Array2<f64>,
        want_params: bool,
    ) -> Result<(Option<Gradients>, Array2<f64>)> {
        let mut grads = Vec::with_capacity(self.layers.len());
        for i in (0..self.layers.len()).rev() {
            let layer = &self.layers[i];
            if want_params {
                grads.push(DenseGrad { weight: delta.t().dot(&tape.inputs[i]), bias: delta.sum_axis(Axis(0)) });
            }
            let mut prev = delta.dot(&layer.weight);
            if i > 0 {
                // tape.inputs[i] is the activation output of layer i - 1
                self.hidden.backprop(&mut prev, &tape.pre[i - 1], &tape.inputs[i]);
            }
            delta = prev;
        }
        grads.reverse();
        Ok((want_params.then_some(Gradients { layers: grads }), delta))
    }
}
