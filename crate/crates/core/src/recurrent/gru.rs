use serde::{Deserialize, Serialize};

use super::GateParams;
use crate::error::{Error, Result};
use crate::numerics::{sigmoid, ActivationKind, Vector};

/// Parameters of one GRU cell.
///
/// Gate pre-activations are `recurrent_weights · state + input_weights · x + bias`.
/// For the candidate gate the state operand is the reset-masked state
/// `h[t-1] ⊙ r[t]` of the current step.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GruCellParams {
    pub reset: GateParams,
    pub update: GateParams,
    pub candidate: GateParams,
    /// Candidate-state activation.
    pub g: ActivationKind,
}

impl GruCellParams {
    pub fn zeros(width: usize, input_dim: usize, activation: ActivationKind) -> Self {
        let gate = || GateParams::zeros(width, input_dim, width);
        GruCellParams {
            reset: gate(),
            update: gate(),
            candidate: gate(),
            g: activation,
        }
    }

    pub fn width(&self) -> usize {
        self.reset.width()
    }

    pub fn input_dim(&self) -> usize {
        self.reset.input_dim()
    }

    pub(crate) fn gates(&self) -> [&GateParams; 3] {
        [&self.reset, &self.update, &self.candidate]
    }

    pub(crate) fn gates_mut(&mut self) -> [&mut GateParams; 3] {
        [&mut self.reset, &mut self.update, &mut self.candidate]
    }

    pub fn validate(&self) -> Result<()> {
        let (w, n) = (self.width(), self.input_dim());
        for g in self.gates() {
            g.validate(w, n, w)?;
        }
        Ok(())
    }
}

pub(crate) struct StepBuffers<'a> {
    pub reset: &'a mut [f64],
    pub masked: &'a mut [f64],
    pub candidate: &'a mut [f64],
    pub update: &'a mut [f64],
    pub state: &'a mut [f64],
}

// gate vectors are indexed in lockstep
#[allow(clippy::needless_range_loop)]
pub(crate) fn step_into(p: &GruCellParams, x: &[f64], prev: &[f64], buf: StepBuffers<'_>) {
    let w = p.width();
    p.reset.preactivation_into(x, prev, buf.reset);
    for i in 0..w {
        buf.reset[i] = sigmoid(buf.reset[i]);
        buf.masked[i] = prev[i] * buf.reset[i];
    }
    p.candidate.preactivation_into(x, buf.masked, buf.candidate);
    p.update.preactivation_into(x, prev, buf.update);
    for i in 0..w {
        let z = p.g.apply(buf.candidate[i]);
        let u = sigmoid(buf.update[i]);
        buf.candidate[i] = z;
        buf.update[i] = u;
        buf.state[i] = (1.0 - u) * prev[i] + u * z;
    }
}

/// One forward step of the GRU cell; returns the new state.
pub fn gru_step(p: &GruCellParams, x: &[f64], prev: &[f64]) -> Result<Vector> {
    p.validate()?;
    let w = p.width();
    if x.len() != p.input_dim() {
        return Err(Error::shape(
            "gru_step",
            format!("input dim {}", p.input_dim()),
            format!("x of length {}", x.len()),
        ));
    }
    if prev.len() != w {
        return Err(Error::shape(
            "gru_step",
            format!("width {w}"),
            format!("state of length {}", prev.len()),
        ));
    }
    let mut scratch = vec![0.0; 4 * w];
    let mut next = vec![0.0; w];
    let (reset, rest) = scratch.split_at_mut(w);
    let (masked, rest) = rest.split_at_mut(w);
    let (candidate, update) = rest.split_at_mut(w);
    step_into(
        p,
        x,
        prev,
        StepBuffers {
            reset,
            masked,
            candidate,
            update,
            state: &mut next,
        },
    );
    Ok(next)
}

pub(crate) struct GruTrace {
    pub reset: Vec<f64>,
    pub masked: Vec<f64>,
    pub candidate: Vec<f64>,
    pub update: Vec<f64>,
    pub state: Vec<f64>,
}

impl GruTrace {
    pub fn output(&self) -> &[f64] {
        &self.state
    }
}

pub(crate) fn forward_layer(p: &GruCellParams, inputs: &[f64], steps: usize) -> GruTrace {
    let w = p.width();
    let n = p.input_dim();
    let buf = || vec![0.0; steps * w];
    let mut tr = GruTrace {
        reset: buf(),
        masked: buf(),
        candidate: buf(),
        update: buf(),
        state: buf(),
    };
    let zeros = vec![0.0; w];
    for t in 0..steps {
        let r = t * w..(t + 1) * w;
        let (before, current) = tr.state.split_at_mut(t * w);
        let prev = if t == 0 {
            &zeros[..]
        } else {
            &before[(t - 1) * w..]
        };
        step_into(
            p,
            &inputs[t * n..(t + 1) * n],
            prev,
            StepBuffers {
                reset: &mut tr.reset[r.clone()],
                masked: &mut tr.masked[r.clone()],
                candidate: &mut tr.candidate[r.clone()],
                update: &mut tr.update[r],
                state: &mut current[..w],
            },
        );
    }
    tr
}

/// Reverse pass through one GRU layer; see the LSTM counterpart.
pub(crate) fn backward_layer(
    p: &GruCellParams,
    inputs: &[f64],
    tr: &GruTrace,
    d_output: &[f64],
    steps: usize,
    grads: &mut GruCellParams,
) -> Vec<f64> {
    let w = p.width();
    let n = p.input_dim();
    let mut d_inputs = vec![0.0; steps * n];
    let mut dh_rec = vec![0.0; w];
    let mut dh_prev = vec![0.0; w];
    let mut d_masked = vec![0.0; w];
    let mut da_r = vec![0.0; w];
    let mut da_z = vec![0.0; w];
    let mut da_u = vec![0.0; w];
    let zeros = vec![0.0; w];

    for t in (0..steps).rev() {
        let s = t * w;
        let prev = if t == 0 {
            &zeros[..]
        } else {
            &tr.state[s - w..s]
        };
        for i in 0..w {
            let z = tr.candidate[s + i];
            let u = tr.update[s + i];
            let dh = d_output[s + i] + dh_rec[i];
            da_z[i] = dh * u * p.g.derivative_from_output(z);
            da_u[i] = dh * (z - prev[i]) * u * (1.0 - u);
            dh_prev[i] = dh * (1.0 - u);
        }
        p.update.recurrent_weights.gemv_t_acc(&da_u, &mut dh_prev);
        d_masked.iter_mut().for_each(|v| *v = 0.0);
        p.candidate
            .recurrent_weights
            .gemv_t_acc(&da_z, &mut d_masked);
        for i in 0..w {
            let r = tr.reset[s + i];
            dh_prev[i] += d_masked[i] * r;
            da_r[i] = d_masked[i] * prev[i] * r * (1.0 - r);
        }
        p.reset.recurrent_weights.gemv_t_acc(&da_r, &mut dh_prev);

        let x = &inputs[t * n..(t + 1) * n];
        let masked = &tr.masked[s..s + w];
        grads.reset.accumulate(&da_r, x, prev);
        grads.update.accumulate(&da_u, x, prev);
        grads.candidate.accumulate(&da_z, x, masked);
        let d_x = &mut d_inputs[t * n..(t + 1) * n];
        p.reset.input_weights.gemv_t_acc(&da_r, d_x);
        p.update.input_weights.gemv_t_acc(&da_u, d_x);
        p.candidate.input_weights.gemv_t_acc(&da_z, d_x);
        std::mem::swap(&mut dh_rec, &mut dh_prev);
    }
    d_inputs
}
