//! Classical first-order update rules behind one stepping interface.
//!
//! Every rule takes a gradient estimate and updates the iterate held in an
//! [`OptimizerState`]. The step size for update `k` (0-based) is
//! `schedule_lr(&hyper.schedule, hyper.alpha, k)`. Buffers start at zero and
//! only the ones a rule needs are allocated. Denominators use `√r + ε`,
//! except Adadelta which uses `√(r + ε)`.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::linalg;
use crate::schedule::{schedule_lr, ScheduleSpec};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum OptimizerKind {
    Sgd,
    Momentum,
    Nesterov,
    Asgd,
    Rmsprop,
    RmspropMom,
    Rprop,
    Adadelta,
    Adagrad,
    Adam,
    Amsgrad,
    Adamax,
    CustomAdam,
    AdamInverseSqrt,
    AdamCosine,
}

impl OptimizerKind {
    pub const ALL: [OptimizerKind; 15] = [
        OptimizerKind::Sgd,
        OptimizerKind::Momentum,
        OptimizerKind::Nesterov,
        OptimizerKind::Asgd,
        OptimizerKind::Rmsprop,
        OptimizerKind::RmspropMom,
        OptimizerKind::Rprop,
        OptimizerKind::Adadelta,
        OptimizerKind::Adagrad,
        OptimizerKind::Adam,
        OptimizerKind::Amsgrad,
        OptimizerKind::Adamax,
        OptimizerKind::CustomAdam,
        OptimizerKind::AdamInverseSqrt,
        OptimizerKind::AdamCosine,
    ];

    pub fn name(self) -> &'static str {
        match self {
            OptimizerKind::Sgd => "sgd",
            OptimizerKind::Momentum => "momentum",
            OptimizerKind::Nesterov => "nesterov",
            OptimizerKind::Asgd => "asgd",
            OptimizerKind::Rmsprop => "rmsprop",
            OptimizerKind::RmspropMom => "rmsprop_mom",
            OptimizerKind::Rprop => "rprop",
            OptimizerKind::Adadelta => "adadelta",
            OptimizerKind::Adagrad => "adagrad",
            OptimizerKind::Adam => "adam",
            OptimizerKind::Amsgrad => "amsgrad",
            OptimizerKind::Adamax => "adamax",
            OptimizerKind::CustomAdam => "custom_adam",
            OptimizerKind::AdamInverseSqrt => "adam_inverse_sqrt",
            OptimizerKind::AdamCosine => "adam_cosine",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|k| k.name() == name)
    }
}

/// Which of the Adam-style updates to apply.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AdamMode {
    /// Moving averages without bias correction.
    Adam,
    /// Adam using the running elementwise maximum of the first moment.
    Amsgrad,
    /// Infinity-norm scaling `u = max(β₂u, |g| + ε)`.
    Adamax,
}

/// Hyperparameters shared by the whole family. Fields a rule does not use
/// are ignored by it.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct HyperParams {
    /// Base step size.
    pub alpha: f64,
    /// Momentum / first-moment decay, in `[0, 1)`.
    pub beta1: f64,
    /// Second-moment decay, in `[0, 1]`.
    pub beta2: f64,
    pub epsilon: f64,
    pub rprop_eta_plus: f64,
    pub rprop_eta_minus: f64,
    pub rprop_step_min: f64,
    pub rprop_step_max: f64,
    /// Number of updates after which ASGD starts averaging.
    pub asgd_t0: u64,
    pub schedule: ScheduleSpec,
}

impl Default for HyperParams {
    fn default() -> Self {
        Self {
            alpha: 0.01,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            rprop_eta_plus: 1.2,
            rprop_eta_minus: 0.5,
            rprop_step_min: 1e-6,
            rprop_step_max: 50.0,
            asgd_t0: 0,
            schedule: ScheduleSpec::Constant,
        }
    }
}

impl HyperParams {
    /// Defaults for a given rule:
    ///
    /// | rule | alpha | beta1 | beta2 | epsilon |
    /// |---|---|---|---|---|
    /// | sgd, momentum, nesterov, asgd | 0.01 | 0.9 | - | - |
    /// | rmsprop, rmsprop_mom | 0.01 | 0.9 | 0.99 | 1e-8 |
    /// | rprop | 0.01 (initial step) | - | - | - |
    /// | adadelta | 1.0 | - | 0.9 | 1e-6 |
    /// | adagrad | 0.01 | - | - | 1e-10 |
    /// | adam, amsgrad, custom_adam | 0.001 | 0.9 | 0.999 | 1e-8 |
    /// | adamax | 0.002 | 0.9 | 0.999 | 1e-8 |
    ///
    /// `adam_inverse_sqrt` uses a 1000-update warmup from 0; `adam_cosine`
    /// uses the same warmup followed by 1000-update cosine periods down to
    /// 0 with `t_mul = 1`. Rprop uses `η₊ = 1.2`, `η₋ = 0.5` and steps in
    /// `[1e-6, 50]`; ASGD averages from the first update.
    pub fn for_kind(kind: OptimizerKind) -> Self {
        let base = Self::default();
        match kind {
            OptimizerKind::Sgd | OptimizerKind::Momentum | OptimizerKind::Nesterov | OptimizerKind::Asgd => base,
            OptimizerKind::Rmsprop | OptimizerKind::RmspropMom => Self { beta2: 0.99, ..base },
            OptimizerKind::Rprop => base,
            OptimizerKind::Adadelta => Self { alpha: 1.0, beta2: 0.9, epsilon: 1e-6, ..base },
            OptimizerKind::Adagrad => Self { epsilon: 1e-10, ..base },
            OptimizerKind::Adam | OptimizerKind::Amsgrad | OptimizerKind::CustomAdam => {
                Self { alpha: 1e-3, ..base }
            }
            OptimizerKind::Adamax => Self { alpha: 2e-3, ..base },
            OptimizerKind::AdamInverseSqrt => Self {
                alpha: 1e-3,
                schedule: ScheduleSpec::InverseSqrtWarmup { warmup_init_lr: 0.0, warmup_updates: 1000 },
                ..base
            },
            OptimizerKind::AdamCosine => Self {
                alpha: 1e-3,
                schedule: ScheduleSpec::CosineWarmup {
                    warmup_init_lr: 0.0,
                    warmup_updates: 1000,
                    lr_min: 0.0,
                    lr_max: None,
                    period: 1000,
                    t_mul: 1.0,
                },
                ..base
            },
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0) {
            return Err(Error::Config("alpha must be positive".into()));
        }
        if !(0.0..1.0).contains(&self.beta1) {
            return Err(Error::Config("beta1 must lie in [0, 1)".into()));
        }
        if !(0.0..=1.0).contains(&self.beta2) {
            return Err(Error::Config("beta2 must lie in [0, 1]".into()));
        }
        if !(self.epsilon > 0.0) {
            return Err(Error::Config("epsilon must be positive".into()));
        }
        if !(self.rprop_eta_minus > 0.0 && self.rprop_eta_minus < 1.0 && self.rprop_eta_plus > 1.0) {
            return Err(Error::Config("rprop needs 0 < eta_minus < 1 < eta_plus".into()));
        }
        if !(self.rprop_step_min > 0.0 && self.rprop_step_min <= self.rprop_step_max) {
            return Err(Error::Config("rprop needs 0 < step_min <= step_max".into()));
        }
        self.schedule.validate(self.alpha)
    }
}

/// Iterate plus every buffer used by the classical rules.
#[derive(Debug, Clone)]
pub struct OptimizerState {
    kind: OptimizerKind,
    hyper: HyperParams,
    k: u64,
    x: Vec<f64>,
    /// Velocity (momentum family).
    v: Vec<f64>,
    /// First moment.
    m: Vec<f64>,
    /// Second moment or squared-gradient accumulator.
    r: Vec<f64>,
    /// Adadelta update accumulator or Adamax infinity norm.
    u: Vec<f64>,
    /// AMSGrad running maximum of `m`.
    m_max: Vec<f64>,
    /// Rprop per-coordinate step sizes and previous effective gradient.
    step_sizes: Vec<f64>,
    prev_grad: Vec<f64>,
    /// ASGD running average and the number of iterates in it.
    x_avg: Vec<f64>,
    avg_count: u64,
}

fn zeros_if_empty(buf: &mut Vec<f64>, p: usize) -> &mut Vec<f64> {
    if buf.is_empty() {
        buf.resize(p, 0.0);
    }
    buf
}

fn sign(v: f64) -> f64 {
    if v > 0.0 {
        1.0
    } else if v < 0.0 {
        -1.0
    } else {
        0.0
    }
}

#[allow(clippy::needless_range_loop)]
impl OptimizerState {
    pub fn new(kind: OptimizerKind, hyper: HyperParams, x0: Vec<f64>) -> Result<Self> {
        hyper.validate()?;
        if x0.is_empty() {
            return Err(Error::Config("empty parameter vector".into()));
        }
        if kind == OptimizerKind::CustomAdam && hyper.beta2 == 1.0 {
            return Err(Error::Config("custom_adam needs beta2 < 1".into()));
        }
        let mut state = Self {
            kind,
            hyper,
            k: 0,
            x: x0,
            v: Vec::new(),
            m: Vec::new(),
            r: Vec::new(),
            u: Vec::new(),
            m_max: Vec::new(),
            step_sizes: Vec::new(),
            prev_grad: Vec::new(),
            x_avg: Vec::new(),
            avg_count: 0,
        };
        if kind == OptimizerKind::Rprop {
            state.step_sizes = vec![hyper.alpha; state.x.len()];
            state.prev_grad = vec![0.0; state.x.len()];
        }
        Ok(state)
    }

    pub fn kind(&self) -> OptimizerKind {
        self.kind
    }

    pub fn hyper(&self) -> &HyperParams {
        &self.hyper
    }

    /// Number of completed updates.
    pub fn iteration(&self) -> u64 {
        self.k
    }

    /// The raw iterate `x`.
    pub fn x(&self) -> &[f64] {
        &self.x
    }

    /// The iterate a run should report: the running average for ASGD once
    /// averaging has started, `x` otherwise.
    pub fn iterate(&self) -> &[f64] {
        if self.avg_count > 0 {
            &self.x_avg
        } else {
            &self.x
        }
    }

    pub fn velocity(&self) -> &[f64] {
        &self.v
    }

    pub fn first_moment(&self) -> &[f64] {
        &self.m
    }

    pub fn second_moment(&self) -> &[f64] {
        &self.r
    }

    pub fn amsgrad_max(&self) -> &[f64] {
        &self.m_max
    }

    pub fn rprop_steps(&self) -> &[f64] {
        &self.step_sizes
    }

    /// Step size the next update will use.
    pub fn current_lr(&self) -> f64 {
        schedule_lr(&self.hyper.schedule, self.hyper.alpha, self.k)
    }

    /// Point where the caller must evaluate the next gradient:
    /// `x + β₁v` for Nesterov, `x` for every other rule.
    pub fn lookahead(&self) -> Vec<f64> {
        let mut p = self.x.clone();
        if self.kind == OptimizerKind::Nesterov && !self.v.is_empty() {
            linalg::axpy(self.hyper.beta1, &self.v, &mut p);
        }
        p
    }

    /// Applies this state's own rule.
    pub fn step(&mut self, grad: &[f64]) -> Result<()> {
        match self.kind {
            OptimizerKind::Sgd => self.sgd_step(grad),
            OptimizerKind::Momentum => self.momentum_step(grad, false),
            OptimizerKind::Nesterov => self.momentum_step(grad, true),
            OptimizerKind::Asgd => self.asgd_step(grad),
            OptimizerKind::Rmsprop => self.rmsprop_step(grad, false),
            OptimizerKind::RmspropMom => self.rmsprop_step(grad, true),
            OptimizerKind::Rprop => self.rprop_step(grad),
            OptimizerKind::Adadelta => self.adadelta_step(grad),
            OptimizerKind::Adagrad => self.adagrad_step(grad),
            OptimizerKind::Adam | OptimizerKind::AdamInverseSqrt | OptimizerKind::AdamCosine => {
                self.adam_family_step(grad, AdamMode::Adam)
            }
            OptimizerKind::Amsgrad => self.adam_family_step(grad, AdamMode::Amsgrad),
            OptimizerKind::Adamax => self.adam_family_step(grad, AdamMode::Adamax),
            OptimizerKind::CustomAdam => self.custom_adam_step(grad),
        }
    }

    fn begin(&self, grad: &[f64]) -> Result<f64> {
        linalg::check_dim(self.x.len(), grad.len())?;
        if !linalg::all_finite(grad) {
            return Err(Error::Diverged { iteration: self.k });
        }
        Ok(self.current_lr())
    }

    fn finish(&mut self) -> Result<()> {
        self.k += 1;
        let finite = [&self.x, &self.v, &self.m, &self.r, &self.u, &self.m_max, &self.x_avg]
            .iter()
            .all(|b| linalg::all_finite(b));
        if finite {
            Ok(())
        } else {
            Err(Error::Diverged { iteration: self.k })
        }
    }

    /// `x ← x − α_k g`
    pub fn sgd_step(&mut self, grad: &[f64]) -> Result<()> {
        let lr = self.begin(grad)?;
        linalg::axpy(-lr, grad, &mut self.x);
        self.finish()
    }

    /// `v ← β₁v − α_k g; x ← x + v`. For Nesterov the caller evaluates `g`
    /// at [`OptimizerState::lookahead`]; the update itself is identical.
    pub fn momentum_step(&mut self, grad: &[f64], _nesterov: bool) -> Result<()> {
        let lr = self.begin(grad)?;
        let b1 = self.hyper.beta1;
        let v = zeros_if_empty(&mut self.v, grad.len());
        for ((vi, xi), gi) in v.iter_mut().zip(self.x.iter_mut()).zip(grad) {
            *vi = b1 * *vi - lr * gi;
            *xi += *vi;
        }
        self.finish()
    }

    /// `r ← r + g⊙g; x ← x − α_k/(√r + ε) ⊙ g`
    pub fn adagrad_step(&mut self, grad: &[f64]) -> Result<()> {
        let lr = self.begin(grad)?;
        let eps = self.hyper.epsilon;
        let r = zeros_if_empty(&mut self.r, grad.len());
        for ((ri, xi), gi) in r.iter_mut().zip(self.x.iter_mut()).zip(grad) {
            *ri += gi * gi;
            *xi -= lr / (libm::sqrt(*ri) + eps) * gi;
        }
        self.finish()
    }

    /// `r ← β₂r + (1−β₂)g⊙g`, then either `x ← x − α_k/(√r+ε) ⊙ g` or, with
    /// momentum, `v ← β₁v − α_k/(√r+ε) ⊙ g; x ← x + v`.
    pub fn rmsprop_step(&mut self, grad: &[f64], with_momentum: bool) -> Result<()> {
        let lr = self.begin(grad)?;
        let HyperParams { beta1, beta2, epsilon, .. } = self.hyper;
        let p = grad.len();
        zeros_if_empty(&mut self.r, p);
        if with_momentum {
            zeros_if_empty(&mut self.v, p);
        }
        for j in 0..p {
            let g = grad[j];
            self.r[j] = beta2 * self.r[j] + (1.0 - beta2) * g * g;
            let scaled = lr / (libm::sqrt(self.r[j]) + epsilon) * g;
            if with_momentum {
                self.v[j] = beta1 * self.v[j] - scaled;
                self.x[j] += self.v[j];
            } else {
                self.x[j] -= scaled;
            }
        }
        self.finish()
    }

    /// `r ← β₂r + (1−β₂)g⊙g; Δ ← √(u+ε)/√(r+ε) ⊙ g; u ← β₂u + (1−β₂)Δ⊙Δ;
    /// x ← x − α_k Δ`
    pub fn adadelta_step(&mut self, grad: &[f64]) -> Result<()> {
        let lr = self.begin(grad)?;
        let HyperParams { beta2, epsilon, .. } = self.hyper;
        let p = grad.len();
        zeros_if_empty(&mut self.r, p);
        zeros_if_empty(&mut self.u, p);
        for j in 0..p {
            let g = grad[j];
            self.r[j] = beta2 * self.r[j] + (1.0 - beta2) * g * g;
            let delta = libm::sqrt(self.u[j] + epsilon) / libm::sqrt(self.r[j] + epsilon) * g;
            self.u[j] = beta2 * self.u[j] + (1.0 - beta2) * delta * delta;
            self.x[j] -= lr * delta;
        }
        self.finish()
    }

    /// Adam-style updates with `m ← β₁m + (1−β₁)g`:
    ///
    /// * `Adam`: `r ← β₂r + (1−β₂)g⊙g; x ← x − α_k/(√r+ε) ⊙ m`
    /// * `Amsgrad`: as Adam, stepping along `m̃ ← max(m̃, m)`
    /// * `Adamax`: `u ← max(β₂u, |g|+ε); x ← x − α_k/((1−β₁ᵏ)u) ⊙ m`
    pub fn adam_family_step(&mut self, grad: &[f64], mode: AdamMode) -> Result<()> {
        let lr = self.begin(grad)?;
        let HyperParams { beta1, beta2, epsilon, .. } = self.hyper;
        let p = grad.len();
        zeros_if_empty(&mut self.m, p);
        match mode {
            AdamMode::Adam | AdamMode::Amsgrad => {
                zeros_if_empty(&mut self.r, p);
                if mode == AdamMode::Amsgrad {
                    zeros_if_empty(&mut self.m_max, p);
                }
                for j in 0..p {
                    let g = grad[j];
                    self.m[j] = beta1 * self.m[j] + (1.0 - beta1) * g;
                    self.r[j] = beta2 * self.r[j] + (1.0 - beta2) * g * g;
                    let direction = if mode == AdamMode::Amsgrad {
                        self.m_max[j] = self.m_max[j].max(self.m[j]);
                        self.m_max[j]
                    } else {
                        self.m[j]
                    };
                    self.x[j] -= lr / (libm::sqrt(self.r[j]) + epsilon) * direction;
                }
            }
            AdamMode::Adamax => {
                zeros_if_empty(&mut self.u, p);
                let correction = 1.0 - libm::pow(beta1, (self.k + 1) as f64);
                for j in 0..p {
                    let g = grad[j];
                    self.m[j] = beta1 * self.m[j] + (1.0 - beta1) * g;
                    self.u[j] = (beta2 * self.u[j]).max(g.abs() + epsilon);
                    self.x[j] -= lr / (correction * self.u[j]) * self.m[j];
                }
            }
        }
        self.finish()
    }

    /// Sum-form moments `m ← β₁m + g`, `r ← β₂r + g⊙g` with the step size
    /// and offset rescaled so the iterates coincide with bias-corrected
    /// averaged-form Adam:
    ///
    /// `α_t = α_k · (1−β₁)/√(1−β₂) · √(1−β₂ᵗ)/(1−β₁ᵗ)`,
    /// `ε_t = ε · √((1−β₂ᵗ)/(1−β₂))`, `x ← x − α_t m/(√r + ε_t)`.
    pub fn custom_adam_step(&mut self, grad: &[f64]) -> Result<()> {
        let lr = self.begin(grad)?;
        let HyperParams { beta1, beta2, epsilon, .. } = self.hyper;
        if beta2 >= 1.0 {
            return Err(Error::Config("custom_adam needs beta2 < 1".into()));
        }
        let t = (self.k + 1) as f64;
        let r_correction = 1.0 - libm::pow(beta2, t);
        let m_correction = 1.0 - libm::pow(beta1, t);
        let step = lr * (1.0 - beta1) / libm::sqrt(1.0 - beta2) * libm::sqrt(r_correction) / m_correction;
        let offset = epsilon * libm::sqrt(r_correction / (1.0 - beta2));
        let p = grad.len();
        zeros_if_empty(&mut self.m, p);
        zeros_if_empty(&mut self.r, p);
        for j in 0..p {
            let g = grad[j];
            self.m[j] = beta1 * self.m[j] + g;
            self.r[j] = beta2 * self.r[j] + g * g;
            self.x[j] -= step * self.m[j] / (libm::sqrt(self.r[j]) + offset);
        }
        self.finish()
    }

    /// Rprop without weight backtracking: per coordinate the step grows by
    /// `η₊` while the gradient keeps its sign, shrinks by `η₋` on a sign
    /// change (that coordinate's gradient then counts as zero), and
    /// `x ← x − step ⊙ sign(g)`.
    pub fn rprop_step(&mut self, grad: &[f64]) -> Result<()> {
        self.begin(grad)?;
        let h = self.hyper;
        let p = grad.len();
        if self.step_sizes.is_empty() {
            self.step_sizes = vec![h.alpha; p];
        }
        zeros_if_empty(&mut self.prev_grad, p);
        for j in 0..p {
            let mut g = grad[j];
            let agreement = g * self.prev_grad[j];
            if agreement > 0.0 {
                self.step_sizes[j] = (self.step_sizes[j] * h.rprop_eta_plus).min(h.rprop_step_max);
            } else if agreement < 0.0 {
                self.step_sizes[j] = (self.step_sizes[j] * h.rprop_eta_minus).max(h.rprop_step_min);
                g = 0.0;
            }
            self.x[j] -= self.step_sizes[j] * sign(g);
            self.prev_grad[j] = g;
        }
        self.finish()
    }

    /// SGD step plus a running mean of the iterates produced after update
    /// `asgd_t0`.
    pub fn asgd_step(&mut self, grad: &[f64]) -> Result<()> {
        let lr = self.begin(grad)?;
        linalg::axpy(-lr, grad, &mut self.x);
        if self.k + 1 > self.hyper.asgd_t0 {
            self.avg_count += 1;
            if self.avg_count == 1 {
                self.x_avg = self.x.clone();
            } else {
                let w = 1.0 / self.avg_count as f64;
                for (a, xi) in self.x_avg.iter_mut().zip(&self.x) {
                    *a += (xi - *a) * w;
                }
            }
        }
        self.finish()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn state(kind: OptimizerKind, hyper: HyperParams, x0: &[f64]) -> OptimizerState {
        OptimizerState::new(kind, hyper, x0.to_vec()).unwrap()
    }

    fn with_alpha(kind: OptimizerKind, alpha: f64) -> HyperParams {
        HyperParams { alpha, ..HyperParams::for_kind(kind) }
    }

    #[test]
    fn kind_names_round_trip() {
        for k in OptimizerKind::ALL {
            assert_eq!(OptimizerKind::from_name(k.name()), Some(k));
        }
        assert_eq!(OptimizerKind::from_name("sag"), None);
    }

    #[test]
    fn sgd_single_step() {
        let mut s = state(OptimizerKind::Sgd, with_alpha(OptimizerKind::Sgd, 0.1), &[0.0, 0.0]);
        s.step(&[1.0, 1.0]).unwrap();
        assert_eq!(s.x(), &[-0.1, -0.1]);
        assert_eq!(s.iteration(), 1);
    }

    #[test]
    fn sgd_geometric_recursion() {
        let mut s = state(OptimizerKind::Sgd, with_alpha(OptimizerKind::Sgd, 0.1), &[1.0]);
        for _ in 0..1000 {
            let g = [s.x()[0]];
            s.step(&g).unwrap();
        }
        let expected = libm::pow(0.9, 1000.0);
        assert!(((s.x()[0] - expected) / expected).abs() < 1e-12);
    }

    #[test]
    fn non_finite_gradient_is_reported() {
        let mut s = state(OptimizerKind::Adam, HyperParams::for_kind(OptimizerKind::Adam), &[0.0]);
        s.step(&[1.0]).unwrap();
        assert_eq!(s.step(&[f64::NAN]), Err(Error::Diverged { iteration: 1 }));
        assert!(matches!(s.step(&[1.0, 2.0]), Err(Error::DimensionMismatch { .. })));
    }

    #[test]
    fn overflowing_iterate_is_reported() {
        let mut s = state(OptimizerKind::Sgd, with_alpha(OptimizerKind::Sgd, 1e300), &[0.0]);
        assert_eq!(s.step(&[1e300]), Err(Error::Diverged { iteration: 1 }));
    }

    #[test]
    fn momentum_velocity_converges_for_constant_gradient() {
        let h = HyperParams { alpha: 0.05, beta1: 0.9, ..HyperParams::default() };
        let mut s = state(OptimizerKind::Momentum, h, &[0.0, 0.0]);
        let g = [1.0, -2.0];
        for _ in 0..200 {
            s.step(&g).unwrap();
        }
        for (v, gi) in s.velocity().iter().zip(g) {
            let limit = -0.05 * gi / (1.0 - 0.9);
            assert!((v - limit).abs() < 1e-9, "{v} vs {limit}");
        }
    }

    #[test]
    fn momentum_two_step_unrolled() {
        let (alpha, b1) = (0.3, 0.7);
        let h = HyperParams { alpha, beta1: b1, ..HyperParams::default() };
        let mut s = state(OptimizerKind::Momentum, h, &[2.0]);
        let (g0, g1) = (0.5, -1.25);
        s.step(&[g0]).unwrap();
        s.step(&[g1]).unwrap();
        let expected = 2.0 - alpha * (g0 + g1) - alpha * b1 * g0;
        assert!((s.x()[0] - expected).abs() < 1e-15);
    }

    #[test]
    fn nesterov_lookahead_uses_velocity() {
        let h = HyperParams { alpha: 0.1, beta1: 0.5, ..HyperParams::default() };
        let mut s = state(OptimizerKind::Nesterov, h, &[1.0]);
        assert_eq!(s.lookahead(), vec![1.0]);
        s.step(&[2.0]).unwrap();
        // v = -0.2, x = 0.8, lookahead = 0.8 + 0.5 * -0.2
        assert!((s.lookahead()[0] - 0.7).abs() < 1e-15);
    }

    #[test]
    fn adagrad_first_step_and_constant_gradient() {
        let h = with_alpha(OptimizerKind::Adagrad, 0.1);
        let mut s = state(OptimizerKind::Adagrad, h, &[0.0, 0.0]);
        s.step(&[3.0, -0.5]).unwrap();
        assert!((s.x()[0] + 0.1 * 3.0 / (3.0 + 1e-10)).abs() < 1e-16);
        assert!((s.x()[1] - 0.1 * 0.5 / (0.5 + 1e-10)).abs() < 1e-16);

        let mut s = state(OptimizerKind::Adagrad, h, &[0.0]);
        let mut prev = 0.0;
        for k in 1..=50 {
            s.step(&[1.0]).unwrap();
            let moved = prev - s.x()[0];
            let expected = 0.1 / (libm::sqrt(k as f64) + 1e-10);
            assert!((moved - expected).abs() < 1e-14, "step {k}");
            prev = s.x()[0];
        }
    }

    #[test]
    fn rmsprop_beta2_one_is_degenerate() {
        let h = HyperParams { alpha: 0.01, beta2: 1.0, epsilon: 1e-3, ..HyperParams::default() };
        let mut s = state(OptimizerKind::Rmsprop, h, &[0.0]);
        s.step(&[2.0]).unwrap();
        s.step(&[2.0]).unwrap();
        assert_eq!(s.second_moment(), &[0.0]);
        assert!((s.x()[0] + 2.0 * 0.01 * 2.0 / 1e-3).abs() < 1e-12);
    }

    #[test]
    fn rmsprop_step_tends_to_alpha_sign() {
        let h = HyperParams { alpha: 0.01, beta2: 0.9, ..HyperParams::for_kind(OptimizerKind::Rmsprop) };
        let mut s = state(OptimizerKind::Rmsprop, h, &[0.0]);
        let g = 3.0;
        let mut prev = 0.0;
        for _ in 0..500 {
            s.step(&[g]).unwrap();
            let moved = prev - s.x()[0];
            prev = s.x()[0];
            if s.iteration() == 500 {
                assert!((moved - 0.01 * g / (g + 1e-8)).abs() < 1e-6);
            }
        }
    }

    #[test]
    fn adadelta_first_step_formula() {
        let h = HyperParams::for_kind(OptimizerKind::Adadelta);
        let mut s = state(OptimizerKind::Adadelta, h, &[0.0]);
        let g = 0.7;
        s.step(&[g]).unwrap();
        let eps = h.epsilon;
        let delta = libm::sqrt(eps) * g / libm::sqrt((1.0 - h.beta2) * g * g + eps);
        assert!((s.x()[0] + h.alpha * delta).abs() < 1e-18);
    }

    #[test]
    fn adadelta_first_step_is_nearly_scale_free() {
        let h = HyperParams::for_kind(OptimizerKind::Adadelta);
        let first = |g: f64| {
            let mut s = state(OptimizerKind::Adadelta, h, &[0.0]);
            s.step(&[g]).unwrap();
            -s.x()[0]
        };
        let (small, large) = (first(1.0), first(1e3));
        assert!(((large - small) / small).abs() < 0.1);
    }

    #[test]
    fn adam_first_step() {
        let h = HyperParams::for_kind(OptimizerKind::Adam);
        let mut s = state(OptimizerKind::Adam, h, &[0.0]);
        let g = -0.4;
        s.step(&[g]).unwrap();
        let expected = -h.alpha * (1.0 - h.beta1) * g / (libm::sqrt((1.0 - h.beta2) * g * g) + h.epsilon);
        assert!((s.x()[0] - expected).abs() < 1e-18);
    }

    #[test]
    fn adamax_with_zero_beta2() {
        let h = HyperParams { beta2: 0.0, ..HyperParams::for_kind(OptimizerKind::Adamax) };
        let mut s = state(OptimizerKind::Adamax, h, &[0.0]);
        let grads = [0.5, -1.5, 2.0];
        let mut m = 0.0;
        let mut x = 0.0;
        for (k, &g) in grads.iter().enumerate() {
            s.step(&[g]).unwrap();
            m = h.beta1 * m + (1.0 - h.beta1) * g;
            let corr = 1.0 - libm::pow(h.beta1, (k + 1) as f64);
            x -= h.alpha * m / (corr * (g.abs() + h.epsilon));
            assert!((s.x()[0] - x).abs() < 1e-15);
        }
    }

    #[test]
    fn amsgrad_maximum_is_monotone() {
        let h = HyperParams::for_kind(OptimizerKind::Amsgrad);
        let mut s = state(OptimizerKind::Amsgrad, h, &[0.0, 0.0]);
        let mut prev = vec![0.0, 0.0];
        for k in 0..100 {
            let t = k as f64;
            s.step(&[libm::sin(t), libm::cos(0.3 * t) - 0.2]).unwrap();
            for (a, b) in s.amsgrad_max().iter().zip(&prev) {
                assert!(a >= b);
            }
            prev = s.amsgrad_max().to_vec();
        }
    }

    #[test]
    fn custom_adam_rejects_beta2_one() {
        let h = HyperParams { beta2: 1.0, ..HyperParams::for_kind(OptimizerKind::CustomAdam) };
        assert!(matches!(
            OptimizerState::new(OptimizerKind::CustomAdam, h, vec![0.0]),
            Err(Error::Config(_))
        ));
    }

    #[test]
    fn custom_adam_near_adagrad_limit() {
        let g = [0.3, -2.0, 1e-3];
        let h = HyperParams { beta1: 0.0, beta2: 1.0 - 1e-9, alpha: 0.1, ..HyperParams::default() };
        let mut c = state(OptimizerKind::CustomAdam, h, &[0.0; 3]);
        let mut a = state(OptimizerKind::Adagrad, h, &[0.0; 3]);
        c.step(&g).unwrap();
        a.step(&g).unwrap();
        let cos = linalg::dot(c.x(), a.x()) / (linalg::norm(c.x()) * linalg::norm(a.x()));
        assert!(cos > 1.0 - 1e-6);
    }

    #[test]
    fn rprop_grows_on_constant_sign() {
        let h = with_alpha(OptimizerKind::Rprop, 0.1);
        let mut s = state(OptimizerKind::Rprop, h, &[0.0]);
        let mut expected_step = 0.1;
        let mut x = 0.0;
        for k in 0..40 {
            s.step(&[2.0]).unwrap();
            if k > 0 {
                expected_step = (expected_step * 1.2f64).min(50.0);
            }
            x -= expected_step;
            assert!((s.rprop_steps()[0] - expected_step).abs() < 1e-12);
            assert!((s.x()[0] - x).abs() < 1e-9);
        }
        assert_eq!(s.rprop_steps()[0], 50.0);
    }

    #[test]
    fn rprop_shrinks_on_sign_flip() {
        let h = with_alpha(OptimizerKind::Rprop, 0.1);
        let mut s = state(OptimizerKind::Rprop, h, &[0.0]);
        s.step(&[1.0]).unwrap();
        assert_eq!(s.x(), &[-0.1]);
        // flip: shrink, no move, gradient forgotten
        s.step(&[-1.0]).unwrap();
        assert_eq!(s.rprop_steps(), &[0.05]);
        assert_eq!(s.x(), &[-0.1]);
        // after a forgotten gradient the next step keeps its size
        s.step(&[1.0]).unwrap();
        assert_eq!(s.rprop_steps(), &[0.05]);
        assert!((s.x()[0] + 0.15).abs() < 1e-15);
        s.step(&[-1.0]).unwrap();
        assert_eq!(s.rprop_steps(), &[0.025]);
    }

    #[test]
    fn asgd_running_mean() {
        let h = with_alpha(OptimizerKind::Asgd, 1.0);
        let mut s = state(OptimizerKind::Asgd, h, &[0.0]);
        s.step(&[-1.0]).unwrap();
        assert_eq!(s.iterate(), &[1.0]);
        s.step(&[-1.0]).unwrap();
        s.step(&[-1.0]).unwrap();
        assert_eq!(s.x(), &[3.0]);
        assert_eq!(s.iterate(), &[2.0]);
    }

    #[test]
    fn asgd_constant_iterates() {
        let mut s = state(OptimizerKind::Asgd, HyperParams::for_kind(OptimizerKind::Asgd), &[4.0, -1.0]);
        for _ in 0..10 {
            s.step(&[0.0, 0.0]).unwrap();
        }
        assert_eq!(s.iterate(), &[4.0, -1.0]);
    }

    #[test]
    fn asgd_delayed_start() {
        let h = HyperParams { alpha: 1.0, asgd_t0: 2, ..HyperParams::default() };
        let mut s = state(OptimizerKind::Asgd, h, &[0.0]);
        s.step(&[-1.0]).unwrap();
        s.step(&[-1.0]).unwrap();
        assert_eq!(s.iterate(), &[2.0]);
        s.step(&[-1.0]).unwrap();
        assert_eq!(s.iterate(), &[3.0]);
        s.step(&[-1.0]).unwrap();
        assert_eq!(s.iterate(), &[3.5]);
    }

    #[test]
    fn invalid_hyperparameters() {
        for h in [
            HyperParams { alpha: 0.0, ..HyperParams::default() },
            HyperParams { beta1: 1.0, ..HyperParams::default() },
            HyperParams { beta2: 1.5, ..HyperParams::default() },
            HyperParams { epsilon: 0.0, ..HyperParams::default() },
        ] {
            assert!(OptimizerState::new(OptimizerKind::Sgd, h, vec![0.0]).is_err());
        }
    }
}
