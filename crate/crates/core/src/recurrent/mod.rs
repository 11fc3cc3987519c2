//! LSTM and GRU cells, stacked sequence networks, and backpropagation
//! through time.
//!
//! A network is a stack of recurrent layers of one kind. Layer 0 reads the
//! input sequence; every higher layer reads the full output sequence of the
//! layer below. The last layer's final output feeds a single sigmoid
//! neuron that yields the accident probability.

mod gru;
mod lstm;

pub use gru::{gru_step, GruCellParams};
pub use lstm::{lstm_step, LstmCellParams, LstmState};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::{sigmoid, ActivationKind, Matrix, Vector};
use crate::training::binary_crossentropy;

/// Weights and bias of one gate.
///
/// `input_weights` always multiplies the step input and
/// `recurrent_weights` always multiplies the carried recurrent signal
/// (previous output for LSTM, previous or reset-masked state for GRU).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GateParams {
    pub input_weights: Matrix,
    pub recurrent_weights: Matrix,
    pub bias: Vector,
}

impl GateParams {
    pub fn zeros(width: usize, input_dim: usize, recurrent_dim: usize) -> Self {
        GateParams {
            input_weights: Matrix::zeros(width, input_dim),
            recurrent_weights: Matrix::zeros(width, recurrent_dim),
            bias: vec![0.0; width],
        }
    }

    pub fn width(&self) -> usize {
        self.bias.len()
    }

    pub fn input_dim(&self) -> usize {
        self.input_weights.cols()
    }

    pub fn validate(&self, width: usize, input_dim: usize, recurrent_dim: usize) -> Result<()> {
        let ok = self.input_weights.rows() == width
            && self.recurrent_weights.rows() == width
            && self.bias.len() == width
            && self.input_weights.cols() == input_dim
            && self.recurrent_weights.cols() == recurrent_dim
            && self.input_weights.values().len() == width * input_dim
            && self.recurrent_weights.values().len() == width * recurrent_dim;
        if !ok {
            return Err(Error::shape(
                "gate",
                format!("width {width}, input {input_dim}, recurrent {recurrent_dim}"),
                format!(
                    "W {}, R {}, b {}",
                    self.input_weights.shape_str(),
                    self.recurrent_weights.shape_str(),
                    self.bias.len()
                ),
            ));
        }
        Ok(())
    }

    #[inline]
    pub(crate) fn preactivation_into(&self, x: &[f64], recurrent: &[f64], out: &mut [f64]) {
        out.copy_from_slice(&self.bias);
        self.input_weights.gemv_acc(x, out);
        self.recurrent_weights.gemv_acc(recurrent, out);
    }

    /// Add the gradient contribution of one timestep, given dL/d(preactivation).
    #[inline]
    pub(crate) fn accumulate(&mut self, d_pre: &[f64], x: &[f64], recurrent: &[f64]) {
        self.input_weights.add_outer(d_pre, x);
        self.recurrent_weights.add_outer(d_pre, recurrent);
        for (b, d) in self.bias.iter_mut().zip(d_pre) {
            *b += d;
        }
    }

    fn slices(&self) -> [&[f64]; 3] {
        [
            self.input_weights.values(),
            self.recurrent_weights.values(),
            &self.bias,
        ]
    }

    fn slices_mut(&mut self) -> [&mut [f64]; 3] {
        [
            self.input_weights.values_mut(),
            self.recurrent_weights.values_mut(),
            &mut self.bias,
        ]
    }

    fn init_uniform(&mut self, rng: &mut ChaCha8Rng) {
        for m in [&mut self.input_weights, &mut self.recurrent_weights] {
            let bound = 1.0 / (m.cols() as f64).sqrt();
            for v in m.values_mut() {
                *v = rng.random_range(-bound..=bound);
            }
        }
        self.bias.iter_mut().for_each(|b| *b = 0.0);
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CellKind {
    Lstm,
    Gru,
}

impl std::str::FromStr for CellKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "lstm" => Ok(CellKind::Lstm),
            "gru" => Ok(CellKind::Gru),
            other => Err(Error::invalid(format!("unknown cell kind '{other}'"))),
        }
    }
}

impl std::fmt::Display for CellKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            CellKind::Lstm => "lstm",
            CellKind::Gru => "gru",
        })
    }
}

/// Architecture of a stacked recurrent classifier with a width-1 sigmoid head.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NetworkSpec {
    pub cell_kind: CellKind,
    pub layer_widths: Vec<usize>,
    pub input_dim: usize,
    /// Used for every candidate / output squashing function in the stack.
    pub activation: ActivationKind,
}

impl NetworkSpec {
    pub fn new(cell_kind: CellKind, layer_widths: Vec<usize>, input_dim: usize) -> Result<Self> {
        let spec = NetworkSpec {
            cell_kind,
            layer_widths,
            input_dim,
            activation: ActivationKind::Tanh,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn with_activation(mut self, activation: ActivationKind) -> Self {
        self.activation = activation;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.layer_widths.is_empty() {
            return Err(Error::invalid("network needs at least one recurrent layer"));
        }
        if self.layer_widths.contains(&0) || self.input_dim == 0 {
            return Err(Error::invalid(format!(
                "layer widths and input dim must be positive: {:?}, {}",
                self.layer_widths, self.input_dim
            )));
        }
        Ok(())
    }

    pub fn last_width(&self) -> usize {
        *self.layer_widths.last().expect("validated non-empty")
    }

    fn layer_input_dims(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        let inputs = std::iter::once(self.input_dim).chain(self.layer_widths.iter().copied());
        self.layer_widths.iter().copied().zip(inputs)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum LayerParams {
    Lstm(LstmCellParams),
    Gru(GruCellParams),
}

impl LayerParams {
    pub fn width(&self) -> usize {
        match self {
            LayerParams::Lstm(p) => p.width(),
            LayerParams::Gru(p) => p.width(),
        }
    }

    fn for_each_slice<'a>(&'a self, f: &mut impl FnMut(&'a [f64])) {
        match self {
            LayerParams::Lstm(p) => p.gates().into_iter().flat_map(|g| g.slices()).for_each(f),
            LayerParams::Gru(p) => p.gates().into_iter().flat_map(|g| g.slices()).for_each(f),
        }
    }

    fn for_each_slice_mut(&mut self, f: &mut impl FnMut(&mut [f64])) {
        match self {
            LayerParams::Lstm(p) => p
                .gates_mut()
                .into_iter()
                .flat_map(|g| g.slices_mut())
                .for_each(f),
            LayerParams::Gru(p) => p
                .gates_mut()
                .into_iter()
                .flat_map(|g| g.slices_mut())
                .for_each(f),
        }
    }
}

/// Learned parameters of a [`NetworkSpec`].
///
/// The flattened layout used by the optimizer is: layers in order; within a
/// layer, gates in declaration order (LSTM: forget, input, candidate,
/// output; GRU: reset, update, candidate); within a gate, input weights,
/// recurrent weights, bias; then head weights and head bias.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetworkParams {
    pub layers: Vec<LayerParams>,
    pub head_weights: Matrix,
    pub head_bias: f64,
}

impl NetworkParams {
    pub fn zeros(spec: &NetworkSpec) -> Self {
        let layers = spec
            .layer_input_dims()
            .map(|(w, n)| match spec.cell_kind {
                CellKind::Lstm => LayerParams::Lstm(LstmCellParams::zeros(w, n, spec.activation)),
                CellKind::Gru => LayerParams::Gru(GruCellParams::zeros(w, n, spec.activation)),
            })
            .collect();
        NetworkParams {
            layers,
            head_weights: Matrix::zeros(1, spec.last_width()),
            head_bias: 0.0,
        }
    }

    /// Uniform weights in ±1/√fan_in per matrix, zero biases.
    pub fn init(spec: &NetworkSpec, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut p = Self::zeros(spec);
        for layer in &mut p.layers {
            match layer {
                LayerParams::Lstm(c) => c
                    .gates_mut()
                    .into_iter()
                    .for_each(|g| g.init_uniform(&mut rng)),
                LayerParams::Gru(c) => c
                    .gates_mut()
                    .into_iter()
                    .for_each(|g| g.init_uniform(&mut rng)),
            }
        }
        let bound = 1.0 / (spec.last_width() as f64).sqrt();
        for v in p.head_weights.values_mut() {
            *v = rng.random_range(-bound..=bound);
        }
        p
    }

    /// Check that every matrix matches `spec`.
    pub fn validate(&self, spec: &NetworkSpec) -> Result<()> {
        spec.validate()?;
        if self.layers.len() != spec.layer_widths.len() {
            return Err(Error::shape(
                "network",
                format!("{} layers in spec", spec.layer_widths.len()),
                format!("{} layers in params", self.layers.len()),
            ));
        }
        for (layer, (w, n)) in self.layers.iter().zip(spec.layer_input_dims()) {
            match (layer, spec.cell_kind) {
                (LayerParams::Lstm(c), CellKind::Lstm) => {
                    c.validate()?;
                    if c.width() != w || c.input_dim() != n {
                        return Err(layer_mismatch(w, n, c.width(), c.input_dim()));
                    }
                }
                (LayerParams::Gru(c), CellKind::Gru) => {
                    c.validate()?;
                    if c.width() != w || c.input_dim() != n {
                        return Err(layer_mismatch(w, n, c.width(), c.input_dim()));
                    }
                }
                _ => {
                    return Err(Error::invalid(format!(
                        "layer cell kind does not match spec ({})",
                        spec.cell_kind
                    )))
                }
            }
        }
        if self.head_weights.rows() != 1
            || self.head_weights.cols() != spec.last_width()
            || self.head_weights.values().len() != spec.last_width()
        {
            return Err(Error::shape(
                "head",
                format!("1x{}", spec.last_width()),
                self.head_weights.shape_str(),
            ));
        }
        Ok(())
    }

    pub fn param_count(&self) -> usize {
        let mut n = 0;
        self.for_each_slice(|s| n += s.len());
        n
    }

    fn for_each_slice<'a>(&'a self, mut f: impl FnMut(&'a [f64])) {
        for layer in &self.layers {
            layer.for_each_slice(&mut f);
        }
        f(self.head_weights.values());
        f(std::slice::from_ref(&self.head_bias));
    }

    fn for_each_slice_mut(&mut self, mut f: impl FnMut(&mut [f64])) {
        for layer in &mut self.layers {
            layer.for_each_slice_mut(&mut f);
        }
        f(self.head_weights.values_mut());
        f(std::slice::from_mut(&mut self.head_bias));
    }

    pub fn flatten(&self) -> Vector {
        let mut out = Vec::with_capacity(self.param_count());
        self.for_each_slice(|s| out.extend_from_slice(s));
        out
    }

    /// Overwrite all parameters from a flat vector in [`flatten`](Self::flatten) layout.
    pub fn assign_flat(&mut self, flat: &[f64]) -> Result<()> {
        let n = self.param_count();
        if flat.len() != n {
            return Err(Error::shape(
                "unflatten",
                format!("{n} parameters"),
                format!("vector of length {}", flat.len()),
            ));
        }
        let mut offset = 0;
        self.for_each_slice_mut(|s| {
            s.copy_from_slice(&flat[offset..offset + s.len()]);
            offset += s.len();
        });
        Ok(())
    }

    pub fn unflatten(spec: &NetworkSpec, flat: &[f64]) -> Result<Self> {
        spec.validate()?;
        let mut p = Self::zeros(spec);
        p.assign_flat(flat)?;
        Ok(p)
    }

    fn scale(&mut self, k: f64) {
        self.for_each_slice_mut(|s| s.iter_mut().for_each(|v| *v *= k));
    }
}

fn layer_mismatch(w: usize, n: usize, got_w: usize, got_n: usize) -> Error {
    Error::shape(
        "layer",
        format!("width {w}, input {n}"),
        format!("width {got_w}, input {got_n}"),
    )
}

/// Pack a sequence of per-timestep vectors into a `steps × dim` buffer.
fn pack_sequence(spec: &NetworkSpec, seq: &[Vector]) -> Result<Vec<f64>> {
    if seq.is_empty() {
        return Err(Error::invalid("input sequence is empty"));
    }
    let mut flat = Vec::with_capacity(seq.len() * spec.input_dim);
    for (t, x) in seq.iter().enumerate() {
        if x.len() != spec.input_dim {
            return Err(Error::shape(
                "forward_sequence",
                format!("input dim {}", spec.input_dim),
                format!("timestep {t} of length {}", x.len()),
            ));
        }
        flat.extend_from_slice(x);
    }
    Ok(flat)
}

enum Trace {
    Lstm(lstm::LstmTrace),
    Gru(gru::GruTrace),
}

impl Trace {
    fn output(&self) -> &[f64] {
        match self {
            Trace::Lstm(t) => &t.output,
            Trace::Gru(t) => t.output(),
        }
    }
}

struct ForwardPass {
    traces: Vec<Trace>,
    probability: f64,
}

fn run_forward(params: &NetworkParams, inputs: &[f64], steps: usize, keep: bool) -> ForwardPass {
    let mut traces = Vec::with_capacity(params.layers.len());
    let mut current: Option<Trace> = None;
    for layer in &params.layers {
        let layer_in = current.as_ref().map_or(inputs, Trace::output);
        let next = match layer {
            LayerParams::Lstm(c) => Trace::Lstm(lstm::forward_layer(c, layer_in, steps)),
            LayerParams::Gru(c) => Trace::Gru(gru::forward_layer(c, layer_in, steps)),
        };
        if let Some(prev) = current.replace(next) {
            if keep {
                traces.push(prev);
            }
        }
    }
    let top = current.expect("at least one layer");
    let w = params.head_weights.cols();
    let last = &top.output()[(steps - 1) * w..steps * w];
    let logit = params.head_bias
        + params
            .head_weights
            .values()
            .iter()
            .zip(last)
            .map(|(a, b)| a * b)
            .sum::<f64>();
    traces.push(top);
    ForwardPass {
        traces,
        probability: sigmoid(logit),
    }
}

/// Forward pass on pre-packed `steps × input_dim` input; shapes are trusted.
pub(crate) fn forward_packed(params: &NetworkParams, inputs: &[f64], steps: usize) -> f64 {
    run_forward(params, inputs, steps, false).probability
}

/// Accumulate dL/dθ for one sample into `grads`; returns (probability, loss).
pub(crate) fn accumulate_gradients(
    params: &NetworkParams,
    inputs: &[f64],
    steps: usize,
    label: u8,
    grads: &mut NetworkParams,
) -> (f64, f64) {
    let fwd = run_forward(params, inputs, steps, true);
    let p = fwd.probability;
    let loss = binary_crossentropy(p, label);
    let d_logit = p - f64::from(label);

    let top_w = params.head_weights.cols();
    let top_out = fwd.traces.last().expect("non-empty").output();
    let last = &top_out[(steps - 1) * top_w..];
    for (g, y) in grads.head_weights.values_mut().iter_mut().zip(last) {
        *g += d_logit * y;
    }
    grads.head_bias += d_logit;

    let mut d_out = vec![0.0; steps * top_w];
    for (d, w) in d_out[(steps - 1) * top_w..]
        .iter_mut()
        .zip(params.head_weights.values())
    {
        *d = d_logit * w;
    }
    for l in (0..params.layers.len()).rev() {
        let layer_in = if l == 0 {
            inputs
        } else {
            fwd.traces[l - 1].output()
        };
        d_out = match (&params.layers[l], &fwd.traces[l], &mut grads.layers[l]) {
            (LayerParams::Lstm(c), Trace::Lstm(tr), LayerParams::Lstm(g)) => {
                lstm::backward_layer(c, layer_in, tr, &d_out, steps, g)
            }
            (LayerParams::Gru(c), Trace::Gru(tr), LayerParams::Gru(g)) => {
                gru::backward_layer(c, layer_in, tr, &d_out, steps, g)
            }
            _ => unreachable!("gradient buffer built from the same spec"),
        };
    }
    (p, loss)
}

/// Probability that `seq` is an accident window.
pub fn forward_sequence(spec: &NetworkSpec, params: &NetworkParams, seq: &[Vector]) -> Result<f64> {
    params.validate(spec)?;
    let inputs = pack_sequence(spec, seq)?;
    Ok(forward_packed(params, &inputs, seq.len()))
}

/// Exact gradient of the binary cross-entropy loss with respect to every
/// parameter, in [`NetworkParams::flatten`] layout.
pub fn bptt_gradients(
    spec: &NetworkSpec,
    params: &NetworkParams,
    seq: &[Vector],
    label: u8,
) -> Result<Vector> {
    params.validate(spec)?;
    if label > 1 {
        return Err(Error::invalid(format!("label must be 0 or 1, got {label}")));
    }
    let inputs = pack_sequence(spec, seq)?;
    let mut grads = NetworkParams::zeros(spec);
    accumulate_gradients(params, &inputs, seq.len(), label, &mut grads);
    Ok(grads.flatten())
}

/// Reusable gradient accumulator for mini-batches.
pub(crate) struct GradientBuffer {
    grads: NetworkParams,
    count: usize,
}

impl GradientBuffer {
    pub fn new(spec: &NetworkSpec) -> Self {
        GradientBuffer {
            grads: NetworkParams::zeros(spec),
            count: 0,
        }
    }

    pub fn add(&mut self, params: &NetworkParams, inputs: &[f64], steps: usize, label: u8) -> f64 {
        self.count += 1;
        accumulate_gradients(params, inputs, steps, label, &mut self.grads).1
    }

    /// Batch-mean gradient as a flat vector; resets the buffer.
    pub fn take_mean(&mut self) -> Vector {
        if self.count > 0 {
            self.grads.scale(1.0 / self.count as f64);
        }
        let flat = self.grads.flatten();
        self.grads.for_each_slice_mut(|s| s.fill(0.0));
        self.count = 0;
        flat
    }
}
