//! Learning-rate schedules: constant, `α₀/k` decay, and the two warmup
//! schedules used by `adam_inverse_sqrt` and `adam_cosine`.

use core::f64::consts::PI;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(tag = "kind", rename_all = "snake_case"))]
#[derive(Default)]
pub enum ScheduleSpec {
    #[default]
    Constant,
    /// `lr / (step + 1)`, i.e. `α₀/k` with a 1-based update number.
    InverseTime,
    /// Linear warmup, then `lr·√warmup_updates / √step`.
    InverseSqrtWarmup { warmup_init_lr: f64, warmup_updates: u64 },
    /// Linear warmup, then cosine cycles from `lr_max` down to `lr_min`.
    /// The first cycle lasts `period` updates and each following one is
    /// `t_mul` times longer. `lr_max` defaults to the base rate.
    CosineWarmup {
        warmup_init_lr: f64,
        warmup_updates: u64,
        lr_min: f64,
        lr_max: Option<f64>,
        period: u64,
        t_mul: f64,
    },
}


impl ScheduleSpec {
    pub fn validate(&self, lr: f64) -> Result<()> {
        match *self {
            ScheduleSpec::CosineWarmup { lr_min, lr_max, period, t_mul, .. } => {
                if lr_min > lr_max.unwrap_or(lr) {
                    return Err(Error::Config("cosine schedule needs lr_min <= lr_max".into()));
                }
                if period == 0 || !(t_mul > 0.0) {
                    return Err(Error::Config("cosine schedule needs period >= 1 and t_mul > 0".into()));
                }
                Ok(())
            }
            _ => Ok(()),
        }
    }
}

/// Learning rate to use for update number `step` (0-based) given the base
/// rate `lr`.
pub fn schedule_lr(spec: &ScheduleSpec, lr: f64, step: u64) -> f64 {
    match *spec {
        ScheduleSpec::Constant => lr,
        ScheduleSpec::InverseTime => lr / (step as f64 + 1.0),
        ScheduleSpec::InverseSqrtWarmup { warmup_init_lr, warmup_updates } => {
            if step < warmup_updates {
                warmup(warmup_init_lr, lr, warmup_updates, step)
            } else {
                let decay_factor = lr * libm::sqrt(warmup_updates.max(1) as f64);
                decay_factor / libm::sqrt(step.max(1) as f64)
            }
        }
        ScheduleSpec::CosineWarmup { warmup_init_lr, warmup_updates, lr_min, lr_max, period, t_mul } => {
            if step < warmup_updates {
                return warmup(warmup_init_lr, lr, warmup_updates, step);
            }
            let lr_max = lr_max.unwrap_or(lr);
            let t = (step - warmup_updates) as f64;
            let Some((t_curr, t_i)) = cosine_position(t, period as f64, t_mul) else {
                return lr_min;
            };
            lr_min + 0.5 * (lr_max - lr_min) * (1.0 + libm::cos(PI * t_curr / t_i))
        }
    }
}

fn warmup(from: f64, to: f64, updates: u64, step: u64) -> f64 {
    from + (to - from) * (step as f64 / updates as f64)
}

/// Offset within the current cosine period and that period's length, or
/// `None` once a shrinking (`t_mul < 1`) sequence of periods is exhausted.
fn cosine_position(t: f64, period: f64, t_mul: f64) -> Option<(f64, f64)> {
    if t_mul == 1.0 {
        let i = libm::floor(t / period);
        return Some((t - i * period, period));
    }
    let mut start = 0.0;
    let mut len = period;
    while t >= start + len {
        start += len;
        len *= t_mul;
        if len < 1e-9 {
            return None;
        }
    }
    Some((t - start, len))
}
