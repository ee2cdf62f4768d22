//! Local information blocks, joint representation, fusion and heads.
//!
//! Each block `f_i` is a small relu encoder from the input to a local feature
//! `z_i`. The joint representation is the concatenation of the locals in
//! block order. Predictions conditioned on the joint with one block removed
//! come either from the shared joint head applied to a zero-masked joint, or
//! from one dedicated head per removed block.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::autodiff::{AutodiffError, Tape, Tensor, Var};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error("invalid model config: {0}")]
    InvalidConfig(String),
    #[error("input width {actual} does not match model input_dim {expected}")]
    InputWidth { expected: usize, actual: usize },
    #[error(transparent)]
    Autodiff(#[from] AutodiffError),
}

pub type Result<T> = std::result::Result<T, ModelError>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MaskMode {
    /// Joint head applied to the joint with block `i`'s slots zeroed.
    SharedHeadZeroMask,
    /// One extra head per block over the joint with block `i` removed.
    PerMaskHeads,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    pub input_dim: usize,
    pub n_blocks: usize,
    /// Hidden widths of every local block.
    pub block_hidden_dims: Vec<usize>,
    pub local_dim: usize,
    pub fusion_hidden_dims: Vec<usize>,
    pub global_dim: usize,
    pub n_classes: usize,
    pub mask_mode: MaskMode,
    pub detach_full_target: bool,
}

impl ModelConfig {
    /// Desk-scale defaults for a given input width.
    pub fn with_input_dim(input_dim: usize) -> Self {
        Self {
            input_dim,
            n_blocks: 4,
            block_hidden_dims: vec![32],
            local_dim: 8,
            fusion_hidden_dims: vec![32],
            global_dim: 16,
            n_classes: 2,
            mask_mode: MaskMode::SharedHeadZeroMask,
            detach_full_target: false,
        }
    }

    pub fn joint_dim(&self) -> usize {
        self.n_blocks * self.local_dim
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(ModelError::InvalidConfig(m));
        if self.input_dim == 0 {
            return bad("input_dim must be >= 1".into());
        }
        if self.n_blocks < 2 {
            return bad(format!("n_blocks must be >= 2, got {}", self.n_blocks));
        }
        if self.local_dim == 0 {
            return bad("local_dim must be >= 1".into());
        }
        if self.global_dim == 0 || self.global_dim > self.joint_dim() {
            return bad(format!(
                "global_dim must be in 1..={} (n_blocks * local_dim), got {}",
                self.joint_dim(),
                self.global_dim
            ));
        }
        if self.n_classes < 2 {
            return bad(format!("n_classes must be >= 2, got {}", self.n_classes));
        }
        if self.block_hidden_dims.contains(&0) || self.fusion_hidden_dims.contains(&0) {
            return bad("hidden widths must be >= 1".into());
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Linear {
    /// `[in, out]`
    pub weight: Tensor,
    /// `[out]`
    pub bias: Tensor,
}

impl Linear {
    fn init(rng: &mut ChaCha8Rng, fan_in: usize, fan_out: usize, gain: f64) -> Self {
        let bound = (gain / fan_in as f64).sqrt();
        let data = (0..fan_in * fan_out).map(|_| rng.random_range(-bound..bound)).collect();
        Self {
            weight: Tensor::new(vec![fan_in, fan_out], data).expect("shape matches"),
            bias: Tensor::zeros(vec![fan_out]),
        }
    }

    fn zeros(fan_in: usize, fan_out: usize) -> Self {
        Self {
            weight: Tensor::zeros(vec![fan_in, fan_out]),
            bias: Tensor::zeros(vec![fan_out]),
        }
    }
}

/// Relu after every layer, including the last.
#[derive(Debug, Clone, PartialEq)]
pub struct Encoder {
    pub layers: Vec<Linear>,
}

impl Encoder {
    fn widths(input: usize, hidden: &[usize], output: usize) -> Vec<(usize, usize)> {
        let mut dims = vec![input];
        dims.extend_from_slice(hidden);
        dims.push(output);
        dims.windows(2).map(|w| (w[0], w[1])).collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams {
    pub config: ModelConfig,
    pub blocks: Vec<Encoder>,
    pub fusion: Encoder,
    pub joint_head: Linear,
    pub global_head: Linear,
    pub mask_heads: Option<Vec<Linear>>,
}

const RELU_GAIN: f64 = 6.0;
const HEAD_GAIN: f64 = 3.0;

/// Scaled-uniform fan-in initialization with zero biases.
pub fn init_model(config: &ModelConfig, seed: u64) -> Result<ModelParams> {
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let build = |rng: &mut ChaCha8Rng, dims: Vec<(usize, usize)>| Encoder {
        layers: dims.into_iter().map(|(i, o)| Linear::init(rng, i, o, RELU_GAIN)).collect(),
    };
    let blocks = (0..config.n_blocks)
        .map(|_| {
            build(
                &mut rng,
                Encoder::widths(config.input_dim, &config.block_hidden_dims, config.local_dim),
            )
        })
        .collect();
    let fusion = build(
        &mut rng,
        Encoder::widths(config.joint_dim(), &config.fusion_hidden_dims, config.global_dim),
    );
    let joint_head = Linear::init(&mut rng, config.joint_dim(), config.n_classes, HEAD_GAIN);
    let global_head = Linear::init(&mut rng, config.global_dim, config.n_classes, HEAD_GAIN);
    let mask_heads = match config.mask_mode {
        MaskMode::SharedHeadZeroMask => None,
        MaskMode::PerMaskHeads => Some(
            (0..config.n_blocks)
                .map(|_| {
                    Linear::init(
                        &mut rng,
                        config.joint_dim() - config.local_dim,
                        config.n_classes,
                        HEAD_GAIN,
                    )
                })
                .collect(),
        ),
    };
    Ok(ModelParams {
        config: config.clone(),
        blocks,
        fusion,
        joint_head,
        global_head,
        mask_heads,
    })
}

impl ModelParams {
    /// All-zero parameters with the right shapes; used when loading.
    pub fn zeros(config: &ModelConfig) -> Result<Self> {
        config.validate()?;
        let zeros = |dims: Vec<(usize, usize)>| Encoder {
            layers: dims.into_iter().map(|(i, o)| Linear::zeros(i, o)).collect(),
        };
        Ok(Self {
            config: config.clone(),
            blocks: (0..config.n_blocks)
                .map(|_| zeros(Encoder::widths(config.input_dim, &config.block_hidden_dims, config.local_dim)))
                .collect(),
            fusion: zeros(Encoder::widths(
                config.joint_dim(),
                &config.fusion_hidden_dims,
                config.global_dim,
            )),
            joint_head: Linear::zeros(config.joint_dim(), config.n_classes),
            global_head: Linear::zeros(config.global_dim, config.n_classes),
            mask_heads: match config.mask_mode {
                MaskMode::SharedHeadZeroMask => None,
                MaskMode::PerMaskHeads => Some(
                    (0..config.n_blocks)
                        .map(|_| Linear::zeros(config.joint_dim() - config.local_dim, config.n_classes))
                        .collect(),
                ),
            },
        })
    }

    fn linears(&self) -> Vec<(String, &Linear)> {
        let mut out = Vec::new();
        for (i, b) in self.blocks.iter().enumerate() {
            for (l, lin) in b.layers.iter().enumerate() {
                out.push((format!("block{i}.layer{l}"), lin));
            }
        }
        for (l, lin) in self.fusion.layers.iter().enumerate() {
            out.push((format!("fusion.layer{l}"), lin));
        }
        out.push(("joint_head".into(), &self.joint_head));
        out.push(("global_head".into(), &self.global_head));
        if let Some(heads) = &self.mask_heads {
            for (i, lin) in heads.iter().enumerate() {
                out.push((format!("mask_head{i}"), lin));
            }
        }
        out
    }

    fn linears_mut(&mut self) -> Vec<&mut Linear> {
        let mut out: Vec<&mut Linear> = Vec::new();
        for b in &mut self.blocks {
            out.extend(b.layers.iter_mut());
        }
        out.extend(self.fusion.layers.iter_mut());
        out.push(&mut self.joint_head);
        out.push(&mut self.global_head);
        if let Some(heads) = &mut self.mask_heads {
            out.extend(heads.iter_mut());
        }
        out
    }

    /// Every parameter tensor with a stable name, in a fixed order.
    pub fn tensors(&self) -> Vec<(String, &Tensor)> {
        self.linears()
            .into_iter()
            .flat_map(|(name, lin)| [(format!("{name}.weight"), &lin.weight), (format!("{name}.bias"), &lin.bias)])
            .collect()
    }

    /// Mutable view in the same order as [`ModelParams::tensors`].
    pub fn tensors_mut(&mut self) -> Vec<&mut Tensor> {
        self.linears_mut()
            .into_iter()
            .flat_map(|lin| [&mut lin.weight, &mut lin.bias])
            .collect()
    }

    pub fn parameter_count(&self) -> usize {
        self.tensors().iter().map(|(_, t)| t.len()).sum()
    }

    /// Rounds every value to the nearest 32-bit float.
    pub fn round_to_f32(&mut self) {
        for t in self.tensors_mut() {
            t.data_mut().iter_mut().for_each(|v| *v = *v as f32 as f64);
        }
    }

    /// Places every tensor on `tape`, as trainable leaves or as constants.
    pub fn bind(&self, tape: &mut Tape, trainable: bool) -> BoundModel {
        let mut put = |lin: &Linear| {
            let (w, b) = (lin.weight.clone(), lin.bias.clone());
            if trainable {
                BoundLinear {
                    w: tape.param(w),
                    b: tape.param(b),
                }
            } else {
                BoundLinear {
                    w: tape.constant(w),
                    b: tape.constant(b),
                }
            }
        };
        let blocks: Vec<Vec<BoundLinear>> = self.blocks.iter().map(|b| b.layers.iter().map(&mut put).collect()).collect();
        let fusion = self.fusion.layers.iter().map(&mut put).collect();
        let joint_head = put(&self.joint_head);
        let global_head = put(&self.global_head);
        let mask_heads = self.mask_heads.as_ref().map(|h| h.iter().map(&mut put).collect());
        BoundModel {
            blocks,
            fusion,
            joint_head,
            global_head,
            mask_heads,
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct BoundLinear {
    pub w: Var,
    pub b: Var,
}

/// Tape handles for one [`ModelParams`].
#[derive(Debug, Clone)]
pub struct BoundModel {
    pub blocks: Vec<Vec<BoundLinear>>,
    pub fusion: Vec<BoundLinear>,
    pub joint_head: BoundLinear,
    pub global_head: BoundLinear,
    pub mask_heads: Option<Vec<BoundLinear>>,
}

impl BoundModel {
    /// Vars in the same order as [`ModelParams::tensors`].
    pub fn vars(&self) -> Vec<Var> {
        let mut lins: Vec<&BoundLinear> = Vec::new();
        for b in &self.blocks {
            lins.extend(b.iter());
        }
        lins.extend(self.fusion.iter());
        lins.push(&self.joint_head);
        lins.push(&self.global_head);
        if let Some(h) = &self.mask_heads {
            lins.extend(h.iter());
        }
        lins.into_iter().flat_map(|l| [l.w, l.b]).collect()
    }
}

fn linear(tape: &mut Tape, lin: &BoundLinear, x: Var) -> Result<Var> {
    let h = tape.matmul(x, lin.w)?;
    Ok(tape.add_row(h, lin.b)?)
}

fn encode(tape: &mut Tape, layers: &[BoundLinear], x: Var) -> Result<Var> {
    let mut h = x;
    for lin in layers {
        let pre = linear(tape, lin, h)?;
        h = tape.relu(pre)?;
    }
    Ok(h)
}

/// Tape handles produced by one forward pass.
#[derive(Debug, Clone)]
pub struct ForwardOutputs {
    /// `z_1..z_n`, each `[batch, local_dim]`.
    pub locals: Vec<Var>,
    /// Concatenated locals, `[batch, n * local_dim]`.
    pub joint: Var,
    pub joint_logits: Var,
    /// `joint_logits`, detached when the config asks for it.
    pub kl_target: Var,
    /// One per block; empty when masking was skipped.
    pub masked_logits: Vec<Var>,
    pub global: Var,
    pub global_logits: Var,
}

fn check_input(params: &ModelParams, tape: &Tape, x: Var) -> Result<()> {
    let t = tape.value(x);
    if t.shape().len() != 2 || t.shape()[1] != params.config.input_dim {
        return Err(ModelError::InputWidth {
            expected: params.config.input_dim,
            actual: t.last_dim(),
        });
    }
    Ok(())
}

/// `z_i = f_i(x)` for every block.
pub fn forward_local(params: &ModelParams, bound: &BoundModel, tape: &mut Tape, x: Var) -> Result<Vec<Var>> {
    check_input(params, tape, x)?;
    bound.blocks.iter().map(|layers| encode(tape, layers, x)).collect()
}

/// Logits predicted from the joint with block `i` removed.
pub fn masked_logits(params: &ModelParams, bound: &BoundModel, tape: &mut Tape, joint: Var, i: usize) -> Result<Var> {
    let dz = params.config.local_dim;
    let (start, end) = (i * dz, (i + 1) * dz);
    match &bound.mask_heads {
        None => {
            let masked = tape.zero_mask_slice(joint, start, end)?;
            linear(tape, &bound.joint_head, masked)
        }
        Some(heads) => {
            let total = params.config.joint_dim();
            let mut parts = Vec::with_capacity(2);
            if start > 0 {
                parts.push(tape.slice_last_dim(joint, 0, start)?);
            }
            if end < total {
                parts.push(tape.slice_last_dim(joint, end, total)?);
            }
            let rest = if parts.len() == 1 {
                parts[0]
            } else {
                tape.concat_last_dim(&parts)?
            };
            linear(tape, &heads[i], rest)
        }
    }
}

/// Full pipeline; `with_masked = false` skips the per-block masked heads.
pub fn forward(
    params: &ModelParams,
    bound: &BoundModel,
    tape: &mut Tape,
    x: Var,
    with_masked: bool,
) -> Result<ForwardOutputs> {
    let locals = forward_local(params, bound, tape, x)?;
    let joint = tape.concat_last_dim(&locals)?;
    let joint_logits = linear(tape, &bound.joint_head, joint)?;
    let kl_target = if params.config.detach_full_target {
        tape.detach(joint_logits)
    } else {
        joint_logits
    };
    let masked_logits = if with_masked {
        (0..params.config.n_blocks)
            .map(|i| masked_logits(params, bound, tape, joint, i))
            .collect::<Result<Vec<_>>>()?
    } else {
        Vec::new()
    };
    let global = encode(tape, &bound.fusion, joint)?;
    let global_logits = linear(tape, &bound.global_head, global)?;
    Ok(ForwardOutputs {
        locals,
        joint,
        joint_logits,
        kl_target,
        masked_logits,
        global,
        global_logits,
    })
}

pub fn full_forward(params: &ModelParams, bound: &BoundModel, tape: &mut Tape, x: Var) -> Result<ForwardOutputs> {
    forward(params, bound, tape, x, true)
}

/// `softmax(global_logits)[:, 1]` for each row of `x`.
pub fn predict_proba(params: &ModelParams, x: &Tensor) -> Result<Vec<f64>> {
    let mut tape = Tape::new();
    let bound = params.bind(&mut tape, false);
    let xv = tape.constant(x.clone());
    let out = forward(params, &bound, &mut tape, xv, false)?;
    let lsm = tape.log_softmax(out.global_logits)?;
    let t = tape.value(lsm);
    let c = t.last_dim();
    Ok((0..t.rows()).map(|r| t.data()[r * c + 1].exp()).collect())
}

/// Local features `z_i` as plain tensors.
pub fn local_features(params: &ModelParams, x: &Tensor) -> Result<Vec<Tensor>> {
    let mut tape = Tape::new();
    let bound = params.bind(&mut tape, false);
    let xv = tape.constant(x.clone());
    let locals = forward_local(params, &bound, &mut tape, xv)?;
    Ok(locals.into_iter().map(|v| tape.value(v).clone()).collect())
}
