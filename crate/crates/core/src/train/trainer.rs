//! The optimisation loop and split evaluation.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::disentangle::{disentanglement_report, DisentangleError, DisentanglementReport};
use super::metrics::{accuracy, auc, group_level_auc, logloss, MetricsError};
use super::optim::{adam_step, lr_schedule, AdamState};
use super::{derive_seed, streams};
use crate::autodiff::{AutodiffError, Tape};
use crate::config::{DataConfig, RunConfig};
use crate::losses::{
    balance_from_raw, global_information_loss, local_information_loss, total_loss, BoundWeights, LossBreakdown,
    LossError, LossWeights, WeightMode,
};
use crate::model::{forward, init_model, predict_proba, ModelError, ModelParams};
use crate::synth::{distribution_shift_variant, generate_dataset, oversample_balance, Split, SynthDataset, SynthError};

#[derive(Debug, Error)]
pub enum TrainError {
    #[error("training diverged in epoch {epoch}: {reason}")]
    Diverged {
        epoch: usize,
        reason: String,
        /// Rows of every epoch that completed.
        history: Vec<HistoryRow>,
    },
    #[error("training split is empty")]
    NoTrainingRows,
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Loss(#[from] LossError),
    #[error(transparent)]
    Metrics(#[from] MetricsError),
    #[error(transparent)]
    Data(#[from] SynthError),
    #[error(transparent)]
    Disentangle(#[from] DisentangleError),
}

/// One line of `history.csv`. Absent terms stay `None`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HistoryRow {
    pub epoch: usize,
    pub lr: f64,
    pub ce: f64,
    pub lil: Option<f64>,
    pub gil: Option<f64>,
    pub total: f64,
    pub effective_alpha: Option<f64>,
    pub effective_beta: Option<f64>,
    pub train_acc: f64,
    pub val_acc: f64,
    pub val_auc: f64,
    pub val_logloss: f64,
}

/// Training data (train and validation rows) and the shifted test set.
#[derive(Debug, Clone)]
pub struct PreparedData {
    pub train: SynthDataset,
    pub test: SynthDataset,
}

pub fn prepare_data(cfg: &DataConfig) -> Result<PreparedData, SynthError> {
    let mut train = generate_dataset(&cfg.spec, cfg.n_train + cfg.n_val, cfg.seed)?;
    train.tag_validation(cfg.n_val);
    if cfg.oversample {
        train = oversample_balance(&train, derive_seed(cfg.seed, streams::OVERSAMPLE))?;
    }
    let shifted = distribution_shift_variant(&cfg.spec, &cfg.shift)?;
    let mut test = generate_dataset(&shifted, cfg.n_test, derive_seed(cfg.seed, streams::SHIFTED_TEST))?;
    test.tag_all(Split::Test);
    Ok(PreparedData { train, test })
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    /// Final parameters, rounded to 32-bit precision.
    pub params: ModelParams,
    pub weights: LossWeights,
    pub history: Vec<HistoryRow>,
}

fn initial_weights(cfg: &RunConfig) -> Result<LossWeights, LossError> {
    match cfg.loss.mode {
        WeightMode::Fixed => LossWeights::fixed(cfg.loss.alpha, cfg.loss.beta),
        WeightMode::Auto => Ok(LossWeights::auto()),
    }
}

fn diverged(epoch: usize, history: &[HistoryRow], reason: impl ToString) -> TrainError {
    TrainError::Diverged {
        epoch,
        reason: reason.to_string(),
        history: history.to_vec(),
    }
}

/// Routes non-finite failures to [`TrainError::Diverged`].
fn check_step<T, E>(r: Result<T, E>, epoch: usize, history: &[HistoryRow]) -> Result<T, TrainError>
where
    E: Into<TrainError>,
{
    r.map_err(|e| match e.into() {
        TrainError::Model(ModelError::Autodiff(a @ AutodiffError::NonFinite { .. }))
        | TrainError::Loss(LossError::Autodiff(a @ AutodiffError::NonFinite { .. })) => diverged(epoch, history, a),
        other => other,
    })
}

impl From<AutodiffError> for TrainError {
    fn from(e: AutodiffError) -> Self {
        TrainError::Loss(LossError::Autodiff(e))
    }
}

struct EpochSums {
    rows: usize,
    hits: usize,
    ce: f64,
    lil: f64,
    gil: f64,
    total: f64,
}

/// Trains on the `Train` rows of `data`, validating on its `Val` rows.
pub fn train(cfg: &RunConfig, data: &SynthDataset) -> Result<TrainOutcome, TrainError> {
    let mut params = init_model(&cfg.model_config(), derive_seed(cfg.train.seed, streams::INIT))?;
    let mut weights = initial_weights(cfg)?;
    let train_rows = data.rows_in(Split::Train);
    if train_rows.is_empty() {
        return Err(TrainError::NoTrainingRows);
    }
    let val_rows = data.rows_in(Split::Val);
    let val_x = data.inputs_for(&val_rows);
    let val_y = data.labels_for(&val_rows);

    let names: Vec<String> = params.tensors().into_iter().map(|(n, _)| n).collect();
    let sizes: Vec<usize> = params.tensors().iter().map(|(_, t)| t.len()).collect();
    let mut all_names = names;
    let mut balance: Vec<[f64; 1]> = match weights {
        LossWeights::Auto { raw_lil, raw_gil } => {
            all_names.extend(["balance.lil".to_string(), "balance.gil".to_string()]);
            vec![[raw_lil], [raw_gil]]
        }
        LossWeights::Fixed { .. } => Vec::new(),
    };
    let t = &cfg.train;
    let slot_sizes: Vec<usize> = sizes.iter().copied().chain(balance.iter().map(|_| 1)).collect();
    let mut adam = AdamState::new(&slot_sizes, t.beta1, t.beta2, t.eps);
    let steps_per_epoch = train_rows.len().div_ceil(t.batch_size);
    let total_steps = steps_per_epoch * t.epochs;
    let (use_lil, use_gil) = (cfg.loss.enable_lil, cfg.loss.enable_gil);

    let mut history: Vec<HistoryRow> = Vec::with_capacity(t.epochs);
    let mut order = train_rows.clone();
    let mut step = 0;
    for epoch in 0..t.epochs {
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(t.seed, streams::SHUFFLE + epoch as u64));
        order.shuffle(&mut rng);
        let epoch_lr = lr_schedule(t, step, total_steps, steps_per_epoch);
        let mut sums = EpochSums {
            rows: 0,
            hits: 0,
            ce: 0.0,
            lil: 0.0,
            gil: 0.0,
            total: 0.0,
        };
        let mut last = None;

        for batch in order.chunks(t.batch_size) {
            let lr = lr_schedule(t, step, total_steps, steps_per_epoch);
            let x = data.inputs_for(batch);
            let y: Vec<usize> = batch.iter().map(|&r| data.labels[r] as usize).collect();

            let mut tape = Tape::new();
            let bound = params.bind(&mut tape, true);
            let bw = weights.bind(&mut tape);
            let xv = tape.constant(x);
            let out = check_step(forward(&params, &bound, &mut tape, xv, use_lil), epoch, &history)?;
            let ce_global = check_step(tape.cross_entropy_from_logits(out.global_logits, &y), epoch, &history)?;
            let ce_joint = check_step(tape.cross_entropy_from_logits(out.joint_logits, &y), epoch, &history)?;
            let ce = check_step(tape.add(ce_global, ce_joint), epoch, &history)?;
            let lil = if use_lil {
                Some(check_step(
                    local_information_loss(&mut tape, out.kl_target, &out.masked_logits, cfg.loss.kl_clamp),
                    epoch,
                    &history,
                )?)
            } else {
                None
            };
            let gil = if use_gil {
                Some(check_step(
                    global_information_loss(&mut tape, out.kl_target, out.global_logits),
                    epoch,
                    &history,
                )?)
            } else {
                None
            };
            let total = check_step(total_loss(&mut tape, ce, lil.map(|l| l.loss), gil, &bw), epoch, &history)?;
            let breakdown = LossBreakdown::read(&tape, ce, lil, gil, &total);
            check_step(tape.backward(total.total), epoch, &history)?;

            let logits = tape.value(out.global_logits);
            let c = logits.last_dim();
            sums.hits += y
                .iter()
                .enumerate()
                .filter(|(r, &l)| {
                    let row = &logits.data()[r * c..(r + 1) * c];
                    usize::from(row[1] > row[0]) == l
                })
                .count();
            let b = batch.len() as f64;
            sums.rows += batch.len();
            sums.ce += breakdown.ce * b;
            sums.lil += breakdown.lil.unwrap_or(0.0) * b;
            sums.gil += breakdown.gil.unwrap_or(0.0) * b;
            sums.total += breakdown.total * b;
            last = Some(breakdown);

            let mut grads: Vec<Vec<f64>> = bound
                .vars()
                .iter()
                .zip(&sizes)
                .map(|(&v, &n)| tape.grad(v).map_or_else(|| vec![0.0; n], <[f64]>::to_vec))
                .collect();
            if let BoundWeights::Auto { raw_lil, raw_gil } = bw {
                for v in [raw_lil, raw_gil] {
                    grads.push(tape.grad(v).map_or_else(|| vec![0.0], <[f64]>::to_vec));
                }
            }
            let mut slices: Vec<&mut [f64]> = params.tensors_mut().into_iter().map(|t| t.data_mut()).collect();
            slices.extend(balance.iter_mut().map(|b| &mut b[..]));
            let grad_refs: Vec<&[f64]> = grads.iter().map(Vec::as_slice).collect();
            adam_step(&mut slices, &grad_refs, &all_names, &mut adam, lr).map_err(|e| diverged(epoch, &history, e))?;
            if let LossWeights::Auto { raw_lil, raw_gil } = &mut weights {
                (*raw_lil, *raw_gil) = (balance[0][0], balance[1][0]);
            }
            step += 1;
        }

        let scores = check_step(predict_proba(&params, &val_x), epoch, &history)?;
        let n = sums.rows as f64;
        let last = last.expect("at least one batch");
        let mean = |s: f64| s / n;
        let row = HistoryRow {
            epoch: epoch + 1,
            lr: epoch_lr,
            ce: mean(sums.ce),
            lil: last.lil.map(|_| mean(sums.lil)),
            gil: last.gil.map(|_| mean(sums.gil)),
            total: mean(sums.total),
            effective_alpha: last.effective_alpha,
            effective_beta: last.effective_beta,
            train_acc: sums.hits as f64 / n,
            val_acc: accuracy(&scores, &val_y, 0.5)?,
            val_auc: auc(&scores, &val_y)?,
            val_logloss: logloss(&scores, &val_y)?,
        };
        if !row.total.is_finite() {
            return Err(diverged(epoch, &history, "total loss is not finite"));
        }
        history.push(row);
    }
    params.round_to_f32();
    Ok(TrainOutcome {
        params,
        weights,
        history,
    })
}

/// Current learned balance values `(c_lil, c_gil)`, if in auto mode.
pub fn balance_values(weights: &LossWeights) -> Option<(f64, f64)> {
    match *weights {
        LossWeights::Auto { raw_lil, raw_gil } => Some((balance_from_raw(raw_lil), balance_from_raw(raw_gil))),
        LossWeights::Fixed { .. } => None,
    }
}

/// Metrics of one evaluated split.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsRecord {
    pub rows: usize,
    pub accuracy: f64,
    pub auc: f64,
    pub logloss: f64,
    pub group_auc: Option<f64>,
    pub mi_matrix: Vec<Vec<f64>>,
    pub label_mi: Vec<f64>,
    pub degenerate_blocks: Vec<bool>,
    pub mean_off_diagonal_mi: f64,
    pub mean_label_mi: f64,
    /// File holding the per-epoch loss history of the run.
    pub history: Option<String>,
}

impl MetricsRecord {
    pub fn disentanglement(&self) -> DisentanglementReport {
        DisentanglementReport {
            mi_matrix: self.mi_matrix.clone(),
            label_mi: self.label_mi.clone(),
            degenerate: self.degenerate_blocks.clone(),
        }
    }
}

/// Evaluates `params` on `rows` of `data`. Group AUC is computed when
/// `with_groups` is set.
pub fn evaluate(
    params: &ModelParams,
    data: &SynthDataset,
    rows: &[usize],
    with_groups: bool,
) -> Result<MetricsRecord, TrainError> {
    let x = data.inputs_for(rows);
    let y = data.labels_for(rows);
    let scores = predict_proba(params, &x)?;
    let group_auc = if with_groups {
        let groups: Vec<u64> = rows.iter().map(|&r| data.group_ids[r]).collect();
        Some(group_level_auc(&scores, &y, &groups)?)
    } else {
        None
    };
    let report = disentanglement_report(params, &x, &y)?;
    Ok(MetricsRecord {
        rows: rows.len(),
        accuracy: accuracy(&scores, &y, 0.5)?,
        auc: auc(&scores, &y)?,
        logloss: logloss(&scores, &y)?,
        group_auc,
        mean_off_diagonal_mi: report.mean_off_diagonal(),
        mean_label_mi: report.mean_label_mi(),
        mi_matrix: report.mi_matrix,
        label_mi: report.label_mi,
        degenerate_blocks: report.degenerate,
        history: None,
    })
}
