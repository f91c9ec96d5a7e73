//! Per-parameter adaptive gradient-descent rules: AdaGrad, RMSProp and Adam.
//!
//! All updates are elementwise. When an update's numerator is exactly zero
//! the parameter is left untouched, so a zero epsilon never yields `0/0`.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nn::Tensor;

/// Decay of the RMSProp mean square. Fixed, not configurable.
pub const RMSPROP_DECAY: f64 = 0.9;
pub const DEFAULT_EPSILON: f64 = 1e-8;
pub const DEFAULT_BETA1: f64 = 0.9;
pub const DEFAULT_BETA2: f64 = 0.999;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OptimKind {
    Adagrad,
    Rmsprop,
    Adam,
}

impl OptimKind {
    pub const ALL: [OptimKind; 3] = [OptimKind::Adagrad, OptimKind::Rmsprop, OptimKind::Adam];

    pub fn name(self) -> &'static str {
        match self {
            OptimKind::Adagrad => "adagrad",
            OptimKind::Rmsprop => "rmsprop",
            OptimKind::Adam => "adam",
        }
    }
}

impl fmt::Display for OptimKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for OptimKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        OptimKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown optimizer {s:?}")))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct OptimConfig {
    pub kind: OptimKind,
    pub learning_rate: f64,
    pub epsilon: f64,
    /// Adam only.
    pub beta1: f64,
    /// Adam only.
    pub beta2: f64,
}

impl OptimConfig {
    pub fn new(kind: OptimKind, learning_rate: f64) -> Self {
        OptimConfig {
            kind,
            learning_rate,
            epsilon: DEFAULT_EPSILON,
            beta1: DEFAULT_BETA1,
            beta2: DEFAULT_BETA2,
        }
    }

    /// Learning rate must be non-negative (zero freezes training), epsilon
    /// non-negative and both betas strictly inside (0, 1).
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate >= 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::Config(format!(
                "learning rate {} must be >= 0",
                self.learning_rate
            )));
        }
        if !(self.epsilon >= 0.0 && self.epsilon.is_finite()) {
            return Err(Error::Config(format!(
                "epsilon {} must be >= 0",
                self.epsilon
            )));
        }
        for (name, b) in [("beta1", self.beta1), ("beta2", self.beta2)] {
            if !(b > 0.0 && b < 1.0) {
                return Err(Error::Config(format!("{name} {b} must lie in (0, 1)")));
            }
        }
        Ok(())
    }
}

/// Accumulators for one parameter tensor.
#[derive(Clone, Debug, PartialEq)]
pub enum OptimState {
    /// Running sum of squared gradients (the diagonal of `Σ g gᵀ`).
    Adagrad { sum_sq: Vec<f64> },
    /// Exponential mean of squared gradients.
    Rmsprop { mean_sq: Vec<f64> },
    /// First and second moments plus the step counter.
    Adam { m: Vec<f64>, v: Vec<f64>, t: u64 },
}

impl OptimState {
    pub fn new(kind: OptimKind, len: usize) -> Self {
        match kind {
            OptimKind::Adagrad => OptimState::Adagrad {
                sum_sq: vec![0.0; len],
            },
            OptimKind::Rmsprop => OptimState::Rmsprop {
                mean_sq: vec![0.0; len],
            },
            OptimKind::Adam => OptimState::Adam {
                m: vec![0.0; len],
                v: vec![0.0; len],
                t: 0,
            },
        }
    }
}

fn check(param: &Tensor, grad: &Tensor, acc: usize) -> Result<()> {
    if param.shape() != grad.shape() || acc != param.numel() {
        return Err(Error::Shape {
            op: "optimizer step",
            lhs: param.shape().to_vec(),
            rhs: grad.shape().to_vec(),
        });
    }
    Ok(())
}

fn ratio(num: f64, den: f64) -> f64 {
    if num == 0.0 {
        0.0
    } else {
        num / den
    }
}

/// `G += g²;  θ ← θ − η·g / √(G + ε)`
pub fn adagrad_step(
    param: &mut Tensor,
    grad: &Tensor,
    sum_sq: &mut [f64],
    cfg: &OptimConfig,
) -> Result<()> {
    check(param, grad, sum_sq.len())?;
    for ((p, &g), s) in param
        .data_mut()
        .iter_mut()
        .zip(grad.data())
        .zip(sum_sq.iter_mut())
    {
        *s += g * g;
        *p -= ratio(cfg.learning_rate * g, (*s + cfg.epsilon).sqrt());
    }
    Ok(())
}

/// `MS ← 0.9·MS + 0.1·g²;  w ← w − ν·g / √(MS + ε)`
pub fn rmsprop_step(
    param: &mut Tensor,
    grad: &Tensor,
    mean_sq: &mut [f64],
    cfg: &OptimConfig,
) -> Result<()> {
    check(param, grad, mean_sq.len())?;
    for ((p, &g), ms) in param
        .data_mut()
        .iter_mut()
        .zip(grad.data())
        .zip(mean_sq.iter_mut())
    {
        *ms = RMSPROP_DECAY * *ms + (1.0 - RMSPROP_DECAY) * g * g;
        *p -= ratio(cfg.learning_rate * g, (*ms + cfg.epsilon).sqrt());
    }
    Ok(())
}

/// Increments `t`, then
/// `m ← β₁m + (1−β₁)g;  v ← β₂v + (1−β₂)g²;  w ← w − ν·m̂ / (√v̂ + ε)`
/// with `m̂ = m/(1−β₁ᵗ)` and `v̂ = v/(1−β₂ᵗ)`.
pub fn adam_step(
    param: &mut Tensor,
    grad: &Tensor,
    m: &mut [f64],
    v: &mut [f64],
    t: &mut u64,
    cfg: &OptimConfig,
) -> Result<()> {
    check(param, grad, m.len())?;
    check(param, grad, v.len())?;
    *t += 1;
    let (b1, b2) = (cfg.beta1, cfg.beta2);
    let c1 = 1.0 - b1.powi(*t as i32);
    let c2 = 1.0 - b2.powi(*t as i32);
    for (((p, &g), mi), vi) in param
        .data_mut()
        .iter_mut()
        .zip(grad.data())
        .zip(m.iter_mut())
        .zip(v.iter_mut())
    {
        *mi = b1 * *mi + (1.0 - b1) * g;
        *vi = b2 * *vi + (1.0 - b2) * g * g;
        let m_hat = *mi / c1;
        let v_hat = *vi / c2;
        *p -= ratio(cfg.learning_rate * m_hat, v_hat.sqrt() + cfg.epsilon);
    }
    Ok(())
}

/// Applies one update with whichever rule `state` belongs to.
pub fn step(
    param: &mut Tensor,
    grad: &Tensor,
    state: &mut OptimState,
    cfg: &OptimConfig,
) -> Result<()> {
    match state {
        OptimState::Adagrad { sum_sq } => adagrad_step(param, grad, sum_sq, cfg),
        OptimState::Rmsprop { mean_sq } => rmsprop_step(param, grad, mean_sq, cfg),
        OptimState::Adam { m, v, t } => adam_step(param, grad, m, v, t, cfg),
    }
}

/// Optimizer over an ordered list of parameter tensors.
#[derive(Clone, Debug)]
pub struct Optimizer {
    config: OptimConfig,
    states: Vec<OptimState>,
}

impl Optimizer {
    pub fn new<'a>(
        config: OptimConfig,
        params: impl IntoIterator<Item = &'a Tensor>,
    ) -> Result<Self> {
        config.validate()?;
        let states = params
            .into_iter()
            .map(|p| OptimState::new(config.kind, p.numel()))
            .collect();
        Ok(Optimizer { config, states })
    }

    pub fn config(&self) -> &OptimConfig {
        &self.config
    }

    pub fn states(&self) -> &[OptimState] {
        &self.states
    }

    /// Updates every parameter from gradients that were all computed before
    /// this call.
    pub fn step(&mut self, params: Vec<&mut Tensor>, grads: &[Tensor]) -> Result<()> {
        if params.len() != self.states.len() || grads.len() != self.states.len() {
            return Err(Error::Config(format!(
                "optimizer tracks {} tensors, got {} parameters and {} gradients",
                self.states.len(),
                params.len(),
                grads.len()
            )));
        }
        for ((p, g), s) in params.into_iter().zip(grads).zip(&mut self.states) {
            step(p, g, s, &self.config)?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn cfg(kind: OptimKind, lr: f64, eps: f64) -> OptimConfig {
        OptimConfig {
            epsilon: eps,
            ..OptimConfig::new(kind, lr)
        }
    }

    #[test]
    fn adagrad_examples() {
        let c = cfg(OptimKind::Adagrad, 0.1, 0.0);
        let mut p = Tensor::scalar(0.0);
        let mut s = vec![0.0];
        adagrad_step(&mut p, &Tensor::scalar(1.0), &mut s, &c).unwrap();
        assert!((p.item() + 0.1).abs() < 1e-12);
        let before = p.item();
        adagrad_step(&mut p, &Tensor::scalar(1.0), &mut s, &c).unwrap();
        assert!((p.item() - before + 0.1 / 2f64.sqrt()).abs() < 1e-12);
        assert!((p.item() - before + 0.070711).abs() < 1e-6);

        let mut q = Tensor::scalar(0.4);
        let mut s0 = vec![0.0];
        adagrad_step(&mut q, &Tensor::scalar(0.0), &mut s0, &c).unwrap();
        assert_eq!((q.item(), s0[0]), (0.4, 0.0));
    }

    #[test]
    fn rmsprop_examples() {
        let c = cfg(OptimKind::Rmsprop, 0.001, 0.0);
        let mut p = Tensor::scalar(0.0);
        let mut ms = vec![0.0];
        rmsprop_step(&mut p, &Tensor::scalar(1.0), &mut ms, &c).unwrap();
        assert!((ms[0] - 0.1).abs() < 1e-15);
        assert!((p.item() + 0.001 / 0.1f64.sqrt()).abs() < 1e-12);
        assert!((p.item() + 0.0031623).abs() < 1e-7);

        let mut q = Tensor::scalar(1.0);
        let mut ms0 = vec![0.0];
        rmsprop_step(
            &mut q,
            &Tensor::scalar(0.0),
            &mut ms0,
            &cfg(OptimKind::Rmsprop, 0.001, 1e-8),
        )
        .unwrap();
        assert_eq!(q.item(), 1.0);

        // constant gradient: MS → g², |Δw| → ν
        let g = 0.37;
        let c = cfg(OptimKind::Rmsprop, 0.01, 0.0);
        let mut w = Tensor::scalar(0.0);
        let mut ms = vec![0.0];
        let mut last = 0.0;
        for _ in 0..400 {
            let before = w.item();
            rmsprop_step(&mut w, &Tensor::scalar(g), &mut ms, &c).unwrap();
            last = before - w.item();
        }
        assert!((ms[0] - g * g).abs() < 1e-12);
        assert!((last - 0.01).abs() < 1e-12);
    }

    #[test]
    fn adam_examples() {
        let c = OptimConfig::new(OptimKind::Adam, 0.001);
        let (mut m, mut v, mut t) = (vec![0.0], vec![0.0], 0);
        let mut w = Tensor::scalar(0.0);
        adam_step(&mut w, &Tensor::scalar(0.5), &mut m, &mut v, &mut t, &c).unwrap();
        assert_eq!(t, 1);
        assert!((m[0] / (1.0 - 0.9) - 0.5).abs() < 1e-12);
        assert!((v[0] / (1.0 - 0.999) - 0.25).abs() < 1e-12);
        assert!((w.item() + 0.001).abs() < 1e-10);

        let (mut m, mut v, mut t) = (vec![0.0], vec![0.0], 0);
        let mut w = Tensor::scalar(2.0);
        adam_step(&mut w, &Tensor::scalar(0.0), &mut m, &mut v, &mut t, &c).unwrap();
        assert_eq!(w.item(), 2.0);
    }

    #[test]
    fn shape_mismatch() {
        let c = OptimConfig::new(OptimKind::Adagrad, 0.1);
        let mut p = Tensor::zeros(&[2]);
        let mut s = vec![0.0; 2];
        assert!(adagrad_step(&mut p, &Tensor::zeros(&[3]), &mut s, &c).is_err());
        let mut ms = vec![0.0; 2];
        assert!(rmsprop_step(&mut p, &Tensor::zeros(&[1, 2]), &mut ms, &c).is_err());
        let (mut m, mut v, mut t) = (vec![0.0; 3], vec![0.0; 3], 0);
        assert!(adam_step(&mut p, &Tensor::zeros(&[2]), &mut m, &mut v, &mut t, &c).is_err());
    }

    #[test]
    fn config_validation() {
        assert!(OptimConfig::new(OptimKind::Adam, 0.001).validate().is_ok());
        assert!(OptimConfig::new(OptimKind::Adam, -1.0).validate().is_err());
        let bad = OptimConfig {
            beta1: 1.0,
            ..OptimConfig::new(OptimKind::Adam, 0.001)
        };
        assert!(bad.validate().is_err());
        assert_eq!("rmsprop".parse::<OptimKind>().unwrap(), OptimKind::Rmsprop);
        assert!("sgd".parse::<OptimKind>().is_err());
    }

    proptest! {
        #[test]
        fn adagrad_accumulator_monotone(grads in proptest::collection::vec(-5.0f64..5.0, 1..40)) {
            let c = OptimConfig::new(OptimKind::Adagrad, 0.1);
            let mut p = Tensor::scalar(0.0);
            let mut s = vec![0.0];
            let mut prev = 0.0;
            for g in grads {
                adagrad_step(&mut p, &Tensor::scalar(g), &mut s, &c).unwrap();
                prop_assert!(s[0] >= prev);
                prev = s[0];
            }
        }

        #[test]
        fn adagrad_constant_gradient_shrinks_steps(g in 0.01f64..10.0) {
            let c = OptimConfig::new(OptimKind::Adagrad, 0.1);
            let mut p = Tensor::scalar(0.0);
            let mut s = vec![0.0];
            let mut last = f64::INFINITY;
            for _ in 0..20 {
                let before = p.item();
                adagrad_step(&mut p, &Tensor::scalar(g), &mut s, &c).unwrap();
                let delta = (p.item() - before).abs();
                prop_assert!(delta < last);
                last = delta;
            }
        }

        #[test]
        fn rmsprop_mean_square_bounded(grads in proptest::collection::vec(-5.0f64..5.0, 1..40)) {
            let c = OptimConfig::new(OptimKind::Rmsprop, 0.001);
            let mut p = Tensor::scalar(0.0);
            let mut ms = vec![0.0];
            let mut peak: f64 = 0.0;
            for g in grads {
                peak = peak.max(g * g);
                rmsprop_step(&mut p, &Tensor::scalar(g), &mut ms, &c).unwrap();
                prop_assert!(ms[0] >= 0.0 && ms[0] <= peak * (1.0 + 1e-12));
            }
        }

        #[test]
        fn adam_first_step_magnitude_is_lr(g in prop_oneof![-1e3f64..-1e-3, 1e-3f64..1e3]) {
            let c = OptimConfig { epsilon: 0.0, ..OptimConfig::new(OptimKind::Adam, 0.01) };
            let (mut m, mut v, mut t) = (vec![0.0], vec![0.0], 0);
            let mut w = Tensor::scalar(0.0);
            adam_step(&mut w, &Tensor::scalar(g), &mut m, &mut v, &mut t, &c).unwrap();
            prop_assert!((w.item().abs() - 0.01).abs() < 1e-15);
        }

        #[test]
        fn zero_gradient_leaves_parameters(values in proptest::collection::vec(-3.0f64..3.0, 1..10)) {
            for kind in OptimKind::ALL {
                let c = OptimConfig::new(kind, 0.1);
                let mut p = Tensor::vector(values.clone()).unwrap();
                let mut state = OptimState::new(kind, values.len());
                step(&mut p, &Tensor::zeros(&[values.len()]), &mut state, &c).unwrap();
                prop_assert_eq!(p.data(), &values[..]);
            }
        }

        #[test]
        fn steps_are_bit_deterministic(values in proptest::collection::vec(-3.0f64..3.0, 1..10), lr in 1e-4f64..1.0) {
            for kind in OptimKind::ALL {
                let c = OptimConfig::new(kind, lr);
                let grad = Tensor::vector(values.iter().map(|v| v * 0.5 - 0.1).collect()).unwrap();
                let run = || {
                    let mut p = Tensor::vector(values.clone()).unwrap();
                    let mut state = OptimState::new(kind, values.len());
                    for _ in 0..3 {
                        step(&mut p, &grad, &mut state, &c).unwrap();
                    }
                    (p, state)
                };
                prop_assert_eq!(run(), run());
            }
        }
    }
}
