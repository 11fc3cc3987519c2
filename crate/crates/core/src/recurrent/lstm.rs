use serde::{Deserialize, Serialize};

use super::GateParams;
use crate::error::{Error, Result};
use crate::numerics::{sigmoid, ActivationKind, Vector};

/// Parameters of one LSTM cell.
///
/// Every gate reads the step input `x[t]` through `input_weights` and the
/// previous *output* `y[t-1]` through `recurrent_weights`. The cell state
/// `h[t]` is carried separately and only enters through the forget gate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LstmCellParams {
    pub forget: GateParams,
    pub input_gate: GateParams,
    pub candidate: GateParams,
    pub output_gate: GateParams,
    /// Candidate-state activation.
    pub g1: ActivationKind,
    /// Activation applied to the cell state before the output gate.
    pub g2: ActivationKind,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LstmState {
    pub cell: Vector,
    pub output: Vector,
}

impl LstmState {
    pub fn zeros(width: usize) -> Self {
        LstmState {
            cell: vec![0.0; width],
            output: vec![0.0; width],
        }
    }
}

impl LstmCellParams {
    pub fn zeros(width: usize, input_dim: usize, activation: ActivationKind) -> Self {
        let gate = || GateParams::zeros(width, input_dim, width);
        LstmCellParams {
            forget: gate(),
            input_gate: gate(),
            candidate: gate(),
            output_gate: gate(),
            g1: activation,
            g2: activation,
        }
    }

    pub fn width(&self) -> usize {
        self.forget.width()
    }

    pub fn input_dim(&self) -> usize {
        self.forget.input_dim()
    }

    pub(crate) fn gates(&self) -> [&GateParams; 4] {
        [
            &self.forget,
            &self.input_gate,
            &self.candidate,
            &self.output_gate,
        ]
    }

    pub(crate) fn gates_mut(&mut self) -> [&mut GateParams; 4] {
        [
            &mut self.forget,
            &mut self.input_gate,
            &mut self.candidate,
            &mut self.output_gate,
        ]
    }

    pub fn validate(&self) -> Result<()> {
        let (w, n) = (self.width(), self.input_dim());
        for g in self.gates() {
            g.validate(w, n, w)?;
        }
        Ok(())
    }
}

/// Per-timestep intermediates kept for the backward pass.
pub(crate) struct StepBuffers<'a> {
    pub forget: &'a mut [f64],
    pub candidate: &'a mut [f64],
    pub input_gate: &'a mut [f64],
    pub output_gate: &'a mut [f64],
    pub cell: &'a mut [f64],
    pub squashed_cell: &'a mut [f64],
    pub output: &'a mut [f64],
}

#[allow(clippy::needless_range_loop)]
pub(crate) fn step_into(
    p: &LstmCellParams,
    x: &[f64],
    prev_output: &[f64],
    prev_cell: &[f64],
    buf: StepBuffers<'_>,
) {
    p.forget.preactivation_into(x, prev_output, buf.forget);
    p.candidate
        .preactivation_into(x, prev_output, buf.candidate);
    p.input_gate
        .preactivation_into(x, prev_output, buf.input_gate);
    p.output_gate
        .preactivation_into(x, prev_output, buf.output_gate);
    for i in 0..p.width() {
        let f = sigmoid(buf.forget[i]);
        let c = p.g1.apply(buf.candidate[i]);
        let u = sigmoid(buf.input_gate[i]);
        let o = sigmoid(buf.output_gate[i]);
        let h = u * c + f * prev_cell[i];
        let gh = p.g2.apply(h);
        buf.forget[i] = f;
        buf.candidate[i] = c;
        buf.input_gate[i] = u;
        buf.output_gate[i] = o;
        buf.cell[i] = h;
        buf.squashed_cell[i] = gh;
        buf.output[i] = o * gh;
    }
}

/// One forward step of the LSTM cell.
pub fn lstm_step(p: &LstmCellParams, x: &[f64], prev: &LstmState) -> Result<LstmState> {
    p.validate()?;
    let w = p.width();
    if x.len() != p.input_dim() {
        return Err(Error::shape(
            "lstm_step",
            format!("input dim {}", p.input_dim()),
            format!("x of length {}", x.len()),
        ));
    }
    if prev.cell.len() != w || prev.output.len() != w {
        return Err(Error::shape(
            "lstm_step",
            format!("width {w}"),
            format!("state lengths {}/{}", prev.cell.len(), prev.output.len()),
        ));
    }
    let mut scratch = vec![0.0; 5 * w];
    let mut next = LstmState::zeros(w);
    let (forget, rest) = scratch.split_at_mut(w);
    let (candidate, rest) = rest.split_at_mut(w);
    let (input_gate, rest) = rest.split_at_mut(w);
    let (output_gate, squashed_cell) = rest.split_at_mut(w);
    step_into(
        p,
        x,
        &prev.output,
        &prev.cell,
        StepBuffers {
            forget,
            candidate,
            input_gate,
            output_gate,
            cell: &mut next.cell,
            squashed_cell,
            output: &mut next.output,
        },
    );
    Ok(next)
}

/// Forward activations of one LSTM layer over a whole sequence, stored
/// as `steps × width` row-major buffers.
pub(crate) struct LstmTrace {
    pub forget: Vec<f64>,
    pub candidate: Vec<f64>,
    pub input_gate: Vec<f64>,
    pub output_gate: Vec<f64>,
    pub cell: Vec<f64>,
    pub squashed_cell: Vec<f64>,
    pub output: Vec<f64>,
}

pub(crate) fn forward_layer(p: &LstmCellParams, inputs: &[f64], steps: usize) -> LstmTrace {
    let w = p.width();
    let n = p.input_dim();
    let buf = || vec![0.0; steps * w];
    let mut tr = LstmTrace {
        forget: buf(),
        candidate: buf(),
        input_gate: buf(),
        output_gate: buf(),
        cell: buf(),
        squashed_cell: buf(),
        output: buf(),
    };
    let zeros = vec![0.0; w];
    for t in 0..steps {
        let r = t * w..(t + 1) * w;
        let (prev_out, cur_out) = tr.output.split_at_mut(t * w);
        let (prev_cell, cur_cell) = tr.cell.split_at_mut(t * w);
        let (prev_out, prev_cell) = if t == 0 {
            (&zeros[..], &zeros[..])
        } else {
            (&prev_out[(t - 1) * w..], &prev_cell[(t - 1) * w..])
        };
        step_into(
            p,
            &inputs[t * n..(t + 1) * n],
            prev_out,
            prev_cell,
            StepBuffers {
                forget: &mut tr.forget[r.clone()],
                candidate: &mut tr.candidate[r.clone()],
                input_gate: &mut tr.input_gate[r.clone()],
                output_gate: &mut tr.output_gate[r.clone()],
                cell: &mut cur_cell[..w],
                squashed_cell: &mut tr.squashed_cell[r],
                output: &mut cur_out[..w],
            },
        );
    }
    tr
}

/// Reverse pass through one LSTM layer.
///
/// `d_output` holds dL/dy[t] arriving from outside the layer (next layer
/// up, or the head). Parameter gradients are accumulated into `grads`;
/// the returned buffer is dL/dx[t] for the layer below.
pub(crate) fn backward_layer(
    p: &LstmCellParams,
    inputs: &[f64],
    tr: &LstmTrace,
    d_output: &[f64],
    steps: usize,
    grads: &mut LstmCellParams,
) -> Vec<f64> {
    let w = p.width();
    let n = p.input_dim();
    let mut d_inputs = vec![0.0; steps * n];
    let mut dy_rec = vec![0.0; w];
    let mut dh_rec = vec![0.0; w];
    let mut da_f = vec![0.0; w];
    let mut da_c = vec![0.0; w];
    let mut da_u = vec![0.0; w];
    let mut da_o = vec![0.0; w];
    let zeros = vec![0.0; w];

    for t in (0..steps).rev() {
        let s = t * w;
        let (prev_out, prev_cell) = if t == 0 {
            (&zeros[..], &zeros[..])
        } else {
            (&tr.output[s - w..s], &tr.cell[s - w..s])
        };
        for i in 0..w {
            let f = tr.forget[s + i];
            let c = tr.candidate[s + i];
            let u = tr.input_gate[s + i];
            let o = tr.output_gate[s + i];
            let gh = tr.squashed_cell[s + i];
            let dy = d_output[s + i] + dy_rec[i];
            da_o[i] = dy * gh * o * (1.0 - o);
            let dh = dh_rec[i] + dy * o * p.g2.derivative_from_output(gh);
            da_u[i] = dh * c * u * (1.0 - u);
            da_c[i] = dh * u * p.g1.derivative_from_output(c);
            da_f[i] = dh * prev_cell[i] * f * (1.0 - f);
            dh_rec[i] = dh * f;
        }
        let x = &inputs[t * n..(t + 1) * n];
        let d_x = &mut d_inputs[t * n..(t + 1) * n];
        dy_rec.iter_mut().for_each(|v| *v = 0.0);
        let das = [&da_f, &da_u, &da_c, &da_o];
        let gates = [&p.forget, &p.input_gate, &p.candidate, &p.output_gate];
        let [gf, gu, gc, go] = grads.gates_mut();
        for ((gate, g), da) in gates.into_iter().zip([gf, gu, gc, go]).zip(das) {
            g.accumulate(da, x, prev_out);
            gate.input_weights.gemv_t_acc(da, d_x);
            gate.recurrent_weights.gemv_t_acc(da, &mut dy_rec);
        }
    }
    d_inputs
}
