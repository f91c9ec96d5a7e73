//! Parameter containers for the layers the model uses.
//!
//! Each layer owns its tensors and can `bind` them onto a tape as leaves; the
//! returned handles are what the tape operations consume and what gradients
//! are read back from.

use rand::Rng as _;

use super::tape::{BatchStats, Tape, Var};
use super::tensor::Tensor;
use crate::rng::Rng;

pub const BATCH_NORM_EPS: f64 = 1e-5;
pub const BATCH_NORM_MOMENTUM: f64 = 0.99;
pub const COSINE_EPS: f64 = 1e-12;

fn uniform(rng: &mut Rng, shape: &[usize], limit: f64) -> Tensor {
    let n = shape.iter().product();
    let data = (0..n).map(|_| rng.random_range(-limit..limit)).collect();
    Tensor::from_parts(shape.to_vec(), data)
}

/// Fully connected layer, `weight: in×out`, `bias: out`.
#[derive(Clone, Debug, PartialEq)]
pub struct Dense {
    pub weight: Tensor,
    pub bias: Tensor,
}

#[derive(Clone, Copy, Debug)]
pub struct DenseVars {
    pub weight: Var,
    pub bias: Var,
}

impl Dense {
    /// LeCun-uniform weights, zero bias.
    pub fn init(inputs: usize, outputs: usize, rng: &mut Rng) -> Self {
        let limit = (3.0 / inputs as f64).sqrt();
        Dense {
            weight: uniform(rng, &[inputs, outputs], limit),
            bias: Tensor::zeros(&[outputs]),
        }
    }

    pub fn bind(&self, tape: &mut Tape) -> DenseVars {
        DenseVars {
            weight: tape.leaf(self.weight.clone()),
            bias: tape.leaf(self.bias.clone()),
        }
    }

    pub fn param_count(&self) -> usize {
        self.weight.numel() + self.bias.numel()
    }
}

/// Batch normalization with learned scale/shift and running statistics.
#[derive(Clone, Debug, PartialEq)]
pub struct BatchNorm {
    pub gamma: Tensor,
    pub beta: Tensor,
    pub running_mean: Tensor,
    pub running_var: Tensor,
}

#[derive(Clone, Copy, Debug)]
pub struct BatchNormVars {
    pub gamma: Var,
    pub beta: Var,
}

impl BatchNorm {
    pub fn new(features: usize) -> Self {
        BatchNorm {
            gamma: Tensor::full(&[features], 1.0),
            beta: Tensor::zeros(&[features]),
            running_mean: Tensor::zeros(&[features]),
            running_var: Tensor::full(&[features], 1.0),
        }
    }

    pub fn bind(&self, tape: &mut Tape) -> BatchNormVars {
        BatchNormVars {
            gamma: tape.leaf(self.gamma.clone()),
            beta: tape.leaf(self.beta.clone()),
        }
    }

    /// `running ← momentum·running + (1 − momentum)·batch`.
    pub fn update_running(&mut self, stats: &BatchStats) {
        let m = BATCH_NORM_MOMENTUM;
        for (r, b) in self.running_mean.data_mut().iter_mut().zip(&stats.mean) {
            *r = m * *r + (1.0 - m) * b;
        }
        for (r, b) in self.running_var.data_mut().iter_mut().zip(&stats.var) {
            *r = m * *r + (1.0 - m) * b;
        }
    }

    /// Trainable parameters only (scale and shift).
    pub fn param_count(&self) -> usize {
        self.gamma.numel() + self.beta.numel()
    }
}

/// LSTM weights with gate blocks ordered input, forget, cell, output.
#[derive(Clone, Debug, PartialEq)]
pub struct Lstm {
    /// `input_dim × 4h`
    pub w_input: Tensor,
    /// `h × 4h`
    pub w_recurrent: Tensor,
    /// `4h`
    pub bias: Tensor,
}

#[derive(Clone, Copy, Debug)]
pub struct LstmVars {
    pub w_input: Var,
    pub w_recurrent: Var,
    pub bias: Var,
}

impl Lstm {
    /// Weights uniform in `±1/√h`; forget-gate bias 1, other biases 0.
    pub fn init(inputs: usize, hidden: usize, rng: &mut Rng) -> Self {
        let limit = 1.0 / (hidden as f64).sqrt();
        let w_input = uniform(rng, &[inputs, 4 * hidden], limit);
        let w_recurrent = uniform(rng, &[hidden, 4 * hidden], limit);
        let mut bias = Tensor::zeros(&[4 * hidden]);
        bias.data_mut()[hidden..2 * hidden].fill(1.0);
        Lstm {
            w_input,
            w_recurrent,
            bias,
        }
    }

    pub fn hidden(&self) -> usize {
        self.w_recurrent.shape()[0]
    }

    pub fn bind(&self, tape: &mut Tape) -> LstmVars {
        LstmVars {
            w_input: tape.leaf(self.w_input.clone()),
            w_recurrent: tape.leaf(self.w_recurrent.clone()),
            bias: tape.leaf(self.bias.clone()),
        }
    }

    pub fn param_count(&self) -> usize {
        self.w_input.numel() + self.w_recurrent.numel() + self.bias.numel()
    }
}
