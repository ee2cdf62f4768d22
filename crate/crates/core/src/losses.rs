//! Classification, local-information and global-information objectives.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::autodiff::{AutodiffError, Tape, Tensor, Var};

/// Cap on the KL sum before `exp(-sum)`.
pub const DEFAULT_KL_CLAMP: f64 = 20.0;
/// Lower bound of a learnable balance variable `c = softplus(raw) + floor`.
pub const BALANCE_FLOOR: f64 = 1e-4;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LossError {
    #[error("local information loss needs at least 2 masked predictions, got {0}")]
    TooFewMasked(usize),
    #[error("loss weight `{name}` must be finite and >= 0, got {value}")]
    InvalidWeight { name: &'static str, value: f64 },
    #[error("KL clamp must be positive, got {0}")]
    InvalidClamp(f64),
    #[error(transparent)]
    Autodiff(#[from] AutodiffError),
}

pub type Result<T> = std::result::Result<T, LossError>;

/// Handles for the local information loss and the KL sum inside it.
#[derive(Debug, Clone, Copy)]
pub struct LocalInformation {
    pub loss: Var,
    pub kl_sum: Var,
}

/// `exp(-min(kappa, sum_i KL[p(y|Z) || p(y|Z\z_i)]))`, in `(0, 1]`.
pub fn local_information_loss(
    tape: &mut Tape,
    joint_logits: Var,
    masked_logits: &[Var],
    kappa: f64,
) -> Result<LocalInformation> {
    if masked_logits.len() < 2 {
        return Err(LossError::TooFewMasked(masked_logits.len()));
    }
    if !(kappa > 0.0 && kappa.is_finite()) {
        return Err(LossError::InvalidClamp(kappa));
    }
    let mut kl_sum = tape.kl_from_logits(joint_logits, masked_logits[0])?;
    for &m in &masked_logits[1..] {
        let kl = tape.kl_from_logits(joint_logits, m)?;
        kl_sum = tape.add(kl_sum, kl)?;
    }
    let clamped = tape.clamp_max(kl_sum, kappa)?;
    let neg = tape.neg(clamped)?;
    let loss = tape.exp(neg)?;
    Ok(LocalInformation { loss, kl_sum })
}

/// `KL[p(y|Z) || p(y|G)]` averaged over the batch.
pub fn global_information_loss(tape: &mut Tape, joint_logits: Var, global_logits: Var) -> Result<Var> {
    Ok(tape.kl_from_logits(joint_logits, global_logits)?)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WeightMode {
    Fixed,
    Auto,
}

/// Loss weights, either fixed or learned through balance variables.
#[derive(Debug, Clone, PartialEq)]
pub enum LossWeights {
    Fixed { alpha: f64, beta: f64 },
    /// Raw (pre-softplus) balance variables for the local and global terms.
    Auto { raw_lil: f64, raw_gil: f64 },
}

impl LossWeights {
    pub fn fixed(alpha: f64, beta: f64) -> Result<Self> {
        for (name, value) in [("alpha", alpha), ("beta", beta)] {
            if !(value >= 0.0 && value.is_finite()) {
                return Err(LossError::InvalidWeight { name, value });
            }
        }
        Ok(Self::Fixed { alpha, beta })
    }

    /// Auto mode with both balance variables starting at `c = 1`.
    pub fn auto() -> Self {
        let raw = raw_for_balance(1.0);
        Self::Auto {
            raw_lil: raw,
            raw_gil: raw,
        }
    }

    pub fn bind(&self, tape: &mut Tape) -> BoundWeights {
        match *self {
            Self::Fixed { alpha, beta } => BoundWeights::Fixed { alpha, beta },
            Self::Auto { raw_lil, raw_gil } => BoundWeights::Auto {
                raw_lil: tape.param(Tensor::scalar(raw_lil)),
                raw_gil: tape.param(Tensor::scalar(raw_gil)),
            },
        }
    }
}

/// Inverse of `c = softplus(raw) + BALANCE_FLOOR`.
pub fn raw_for_balance(c: f64) -> f64 {
    let s = c - BALANCE_FLOOR;
    s.exp_m1().ln()
}

/// `c = softplus(raw) + BALANCE_FLOOR`.
pub fn balance_from_raw(raw: f64) -> f64 {
    let sp = if raw > 30.0 { raw } else { raw.exp().ln_1p() };
    sp + BALANCE_FLOOR
}

#[derive(Debug, Clone, Copy)]
pub enum BoundWeights {
    Fixed { alpha: f64, beta: f64 },
    Auto { raw_lil: Var, raw_gil: Var },
}

#[derive(Debug, Clone, Copy)]
pub struct TotalLoss {
    pub total: Var,
    /// Weight multiplying the local term (alpha, or `1/(2c^2)` in auto mode).
    pub effective_alpha: Option<f64>,
    pub effective_beta: Option<f64>,
}

/// `L_k / (2 c^2) + ln(1 + c^2)` with `c = softplus(raw) + floor`.
fn balanced_term(tape: &mut Tape, loss: Var, raw: Var) -> Result<(Var, f64)> {
    let sp = tape.softplus(raw)?;
    let c = tape.add_scalar(sp, BALANCE_FLOOR)?;
    let c2 = tape.mul(c, c)?;
    let inv = tape.recip(c2)?;
    let half_inv = tape.scale(inv, 0.5)?;
    let weighted = tape.mul(loss, half_inv)?;
    let one_plus = tape.add_scalar(c2, 1.0)?;
    let reg = tape.ln(one_plus)?;
    let term = tape.add(weighted, reg)?;
    let eff = tape.value(half_inv).item();
    Ok((term, eff))
}

/// Combines the enabled terms into the training objective.
pub fn total_loss(
    tape: &mut Tape,
    ce: Var,
    lil: Option<Var>,
    gil: Option<Var>,
    weights: &BoundWeights,
) -> Result<TotalLoss> {
    let mut total = ce;
    let mut effective_alpha = None;
    let mut effective_beta = None;
    match *weights {
        BoundWeights::Fixed { alpha, beta } => {
            for (name, value) in [("alpha", alpha), ("beta", beta)] {
                if !(value >= 0.0 && value.is_finite()) {
                    return Err(LossError::InvalidWeight { name, value });
                }
            }
            if let Some(l) = lil {
                let w = tape.scale(l, alpha)?;
                total = tape.add(total, w)?;
                effective_alpha = Some(alpha);
            }
            if let Some(g) = gil {
                let w = tape.scale(g, beta)?;
                total = tape.add(total, w)?;
                effective_beta = Some(beta);
            }
        }
        BoundWeights::Auto { raw_lil, raw_gil } => {
            if let Some(l) = lil {
                let (term, eff) = balanced_term(tape, l, raw_lil)?;
                total = tape.add(total, term)?;
                effective_alpha = Some(eff);
            }
            if let Some(g) = gil {
                let (term, eff) = balanced_term(tape, g, raw_gil)?;
                total = tape.add(total, term)?;
                effective_beta = Some(eff);
            }
        }
    }
    Ok(TotalLoss {
        total,
        effective_alpha,
        effective_beta,
    })
}

/// Scalar values of one forward pass's objective.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossBreakdown {
    pub ce: f64,
    pub lil: Option<f64>,
    pub gil: Option<f64>,
    pub total: f64,
    pub kl_sum_lil: Option<f64>,
    pub effective_alpha: Option<f64>,
    pub effective_beta: Option<f64>,
}

impl LossBreakdown {
    pub fn read(tape: &Tape, ce: Var, lil: Option<LocalInformation>, gil: Option<Var>, total: &TotalLoss) -> Self {
        Self {
            ce: tape.value(ce).item(),
            lil: lil.map(|l| tape.value(l.loss).item()),
            gil: gil.map(|g| tape.value(g).item()),
            total: tape.value(total.total).item(),
            kl_sum_lil: lil.map(|l| tape.value(l.kl_sum).item()),
            effective_alpha: total.effective_alpha,
            effective_beta: total.effective_beta,
        }
    }
}
