//! Run directories: history, metrics, MI matrix, checkpoint and manifest.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::checkpoint::{save_checkpoint, CheckpointError};
use super::trainer::{evaluate, prepare_data, train, HistoryRow, MetricsRecord, PreparedData, TrainError};
use crate::config::RunConfig;
use crate::model::ModelParams;
use crate::synth::{Split, SynthError};

pub const RUN_MANIFEST_VERSION: u32 = 1;
pub const RUN_MANIFEST_FILE: &str = "run.json";
pub const HISTORY_FILE: &str = "history.csv";
pub const METRICS_FILE: &str = "metrics.json";
pub const MI_MATRIX_FILE: &str = "mi_matrix.csv";
pub const CHECKPOINT_DIR: &str = "checkpoint";

pub const HISTORY_HEADER: &str =
    "epoch,lr,ce,lil,gil,total,effective_alpha,effective_beta,train_acc,val_acc,val_auc,val_logloss";

#[derive(Debug, Error)]
pub enum RunError {
    #[error(transparent)]
    Train(#[from] TrainError),
    #[error(transparent)]
    Data(#[from] SynthError),
    #[error(transparent)]
    Checkpoint(#[from] CheckpointError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

pub fn history_csv(rows: &[HistoryRow]) -> String {
    let mut out = String::from(HISTORY_HEADER);
    out.push('\n');
    for r in rows {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{},{},{}",
            r.epoch,
            r.lr,
            r.ce,
            opt(r.lil),
            opt(r.gil),
            r.total,
            opt(r.effective_alpha),
            opt(r.effective_beta),
            r.train_acc,
            r.val_acc,
            r.val_auc,
            r.val_logloss
        );
    }
    out
}

/// `n x n` matrix with an extra `MI_with_label` column; one header row.
pub fn mi_matrix_csv(record: &MetricsRecord) -> String {
    let n = record.mi_matrix.len();
    let mut out = String::new();
    let header: Vec<String> = (0..n).map(|i| format!("z{}", i + 1)).collect();
    let _ = writeln!(out, "block,{},MI_with_label", header.join(","));
    for (i, row) in record.mi_matrix.iter().enumerate() {
        let cells: Vec<String> = row.iter().map(f64::to_string).collect();
        let _ = writeln!(out, "z{},{},{}", i + 1, cells.join(","), record.label_mi[i]);
    }
    out
}

/// Metrics of the in-distribution validation split and the shifted test set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunMetrics {
    pub validation: MetricsRecord,
    pub shifted: MetricsRecord,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub format_version: u32,
    pub config: RunConfig,
    pub seed: u64,
    pub train_fingerprint: String,
    pub test_fingerprint: String,
    pub started_unix_secs: u64,
    pub wall_seconds: f64,
    pub epochs_completed: usize,
    pub status: RunStatus,
    pub metrics: Option<RunMetrics>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "state", content = "detail")]
pub enum RunStatus {
    Complete,
    Diverged(String),
}

#[derive(Debug, Clone)]
pub struct RunResult {
    pub params: Option<ModelParams>,
    pub history: Vec<HistoryRow>,
    pub manifest: RunManifest,
}

impl RunResult {
    pub fn metrics(&self) -> Option<&RunMetrics> {
        self.manifest.metrics.as_ref()
    }
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), RunError> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text)?;
    Ok(())
}

/// Evaluates a trained model on both held-out sets.
pub fn evaluate_run(params: &ModelParams, data: &PreparedData, with_groups: bool) -> Result<RunMetrics, TrainError> {
    let mut validation = evaluate(params, &data.train, &data.train.rows_in(Split::Val), with_groups)?;
    let mut shifted = evaluate(params, &data.test, &data.test.rows_in(Split::Test), with_groups)?;
    validation.history = Some(HISTORY_FILE.into());
    shifted.history = Some(HISTORY_FILE.into());
    Ok(RunMetrics { validation, shifted })
}

/// Prepares data, trains and evaluates. With `out`, writes every artifact
/// there. A diverged run still writes its partial history and manifest.
pub fn run_experiment(cfg: &RunConfig, out: Option<&Path>) -> Result<RunResult, RunError> {
    let data = prepare_data(&cfg.data)?;
    run_with_data(cfg, &data, out)
}

pub fn run_with_data(cfg: &RunConfig, data: &PreparedData, out: Option<&Path>) -> Result<RunResult, RunError> {
    let started = Instant::now();
    let started_unix_secs = SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map_or(0, |d| d.as_secs());
    let mut manifest = RunManifest {
        format_version: RUN_MANIFEST_VERSION,
        config: cfg.clone(),
        seed: cfg.train.seed,
        train_fingerprint: data.train.fingerprint(),
        test_fingerprint: data.test.fingerprint(),
        started_unix_secs,
        wall_seconds: 0.0,
        epochs_completed: 0,
        status: RunStatus::Complete,
        metrics: None,
    };
    if let Some(dir) = out {
        fs::create_dir_all(dir)?;
    }
    let with_groups = cfg.data.spec.frames_per_group > 1;
    let trained = train(cfg, &data.train);
    let (params, history) = match trained {
        Ok(o) => (Some(o.params), o.history),
        Err(TrainError::Diverged { reason, history, .. }) => {
            manifest.status = RunStatus::Diverged(reason);
            (None, history)
        }
        Err(e) => return Err(e.into()),
    };
    manifest.epochs_completed = history.len();
    if let Some(p) = &params {
        manifest.metrics = Some(evaluate_run(p, data, with_groups)?);
    }
    manifest.wall_seconds = started.elapsed().as_secs_f64();

    if let Some(dir) = out {
        fs::write(dir.join(HISTORY_FILE), history_csv(&history))?;
        if let (Some(p), Some(m)) = (&params, &manifest.metrics) {
            save_checkpoint(&dir.join(CHECKPOINT_DIR), p, cfg, cfg.train.seed)?;
            write_json(&dir.join(METRICS_FILE), m)?;
            fs::write(dir.join(MI_MATRIX_FILE), mi_matrix_csv(&m.shifted))?;
        }
        write_json(&dir.join(RUN_MANIFEST_FILE), &manifest)?;
    }
    Ok(RunResult {
        params,
        history,
        manifest,
    })
}
