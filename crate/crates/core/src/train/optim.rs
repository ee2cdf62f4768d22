//! Adam with bias correction, and the learning-rate schedules.

use std::f64::consts::PI;

use thiserror::Error;

use crate::config::{Scheduler, TrainConfig};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum OptimError {
    #[error("non-finite gradient in `{param}` at index {index}")]
    NonFiniteGradient { param: String, index: usize },
    #[error("optimizer state has {state} slots but {given} parameters were given")]
    StateMismatch { state: usize, given: usize },
    #[error("parameter `{param}` has {param_len} values but gradient has {grad_len}")]
    GradientLength {
        param: String,
        param_len: usize,
        grad_len: usize,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub step: u64,
    m: Vec<Vec<f64>>,
    v: Vec<Vec<f64>>,
}

impl AdamState {
    pub fn new(sizes: &[usize], beta1: f64, beta2: f64, eps: f64) -> Self {
        Self {
            beta1,
            beta2,
            eps,
            step: 0,
            m: sizes.iter().map(|&n| vec![0.0; n]).collect(),
            v: sizes.iter().map(|&n| vec![0.0; n]).collect(),
        }
    }
}

/// One Adam update. Every gradient is checked before any parameter moves.
pub fn adam_step(
    params: &mut [&mut [f64]],
    grads: &[&[f64]],
    names: &[String],
    state: &mut AdamState,
    lr: f64,
) -> Result<(), OptimError> {
    if params.len() != state.m.len() || grads.len() != params.len() {
        return Err(OptimError::StateMismatch {
            state: state.m.len(),
            given: params.len().max(grads.len()),
        });
    }
    for (i, (p, g)) in params.iter().zip(grads).enumerate() {
        let name = || names.get(i).cloned().unwrap_or_else(|| format!("#{i}"));
        if p.len() != g.len() || p.len() != state.m[i].len() {
            return Err(OptimError::GradientLength {
                param: name(),
                param_len: p.len(),
                grad_len: g.len(),
            });
        }
        if let Some(index) = g.iter().position(|x| !x.is_finite()) {
            return Err(OptimError::NonFiniteGradient { param: name(), index });
        }
    }
    state.step += 1;
    let t = state.step as i32;
    let c1 = 1.0 - state.beta1.powi(t);
    let c2 = 1.0 - state.beta2.powi(t);
    for (i, p) in params.iter_mut().enumerate() {
        let (m, v) = (&mut state.m[i], &mut state.v[i]);
        for j in 0..p.len() {
            let g = grads[i][j];
            m[j] = state.beta1 * m[j] + (1.0 - state.beta1) * g;
            v[j] = state.beta2 * v[j] + (1.0 - state.beta2) * g * g;
            let mhat = m[j] / c1;
            let vhat = v[j] / c2;
            p[j] -= lr * mhat / (vhat.sqrt() + state.eps);
        }
    }
    Ok(())
}

/// Learning rate for optimizer step `step` (0-based) of `total_steps`.
pub fn lr_schedule(cfg: &TrainConfig, step: usize, total_steps: usize, steps_per_epoch: usize) -> f64 {
    match cfg.scheduler {
        Scheduler::Cosine => {
            let frac = if total_steps == 0 {
                0.0
            } else {
                step.min(total_steps) as f64 / total_steps as f64
            };
            cfg.lr * 0.5 * (1.0 + (PI * frac).cos())
        }
        Scheduler::StepHalfEvery5 => {
            let epoch = step / steps_per_epoch.max(1);
            cfg.lr * 0.5f64.powi((epoch / 5) as i32)
        }
    }
}
