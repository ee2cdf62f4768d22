//! Sweeps over block counts or loss toggles, one full run per setting and seed.

use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::artifacts::{run_with_data, RunError, RunStatus};
use super::trainer::{prepare_data, PreparedData};
use crate::config::RunConfig;
use crate::synth::SynthError;

pub const ABLATION_FILE: &str = "ablation.csv";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Sweep {
    /// One setting per block count.
    Blocks(Vec<usize>),
    /// The four combinations of the local and global terms.
    Toggles,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Setting {
    pub name: String,
    pub n_blocks: usize,
    pub enable_lil: bool,
    pub enable_gil: bool,
}

impl Sweep {
    pub fn settings(&self, base: &RunConfig) -> Vec<Setting> {
        match self {
            Sweep::Blocks(ns) => ns
                .iter()
                .map(|&n| Setting {
                    name: format!("n{n}"),
                    n_blocks: n,
                    enable_lil: base.loss.enable_lil,
                    enable_gil: base.loss.enable_gil,
                })
                .collect(),
            Sweep::Toggles => [(false, false), (true, false), (false, true), (true, true)]
                .into_iter()
                .map(|(lil, gil)| Setting {
                    name: format!("{}lil{}gil", sign(lil), sign(gil)),
                    n_blocks: base.model.n_blocks,
                    enable_lil: lil,
                    enable_gil: gil,
                })
                .collect(),
        }
    }
}

fn sign(on: bool) -> &'static str {
    if on {
        "+"
    } else {
        "-"
    }
}

/// Metrics of one split as flattened into the sweep table.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SplitSummary {
    pub accuracy: f64,
    pub auc: f64,
    pub logloss: f64,
    pub mean_off_diagonal_mi: f64,
    pub mean_label_mi: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AblationRow {
    pub setting: String,
    pub n_blocks: usize,
    pub enable_lil: bool,
    pub enable_gil: bool,
    pub seed: u64,
    /// `None` on success, otherwise why the run failed.
    pub error: Option<String>,
    pub validation: Option<SplitSummary>,
    pub shifted: Option<SplitSummary>,
}

impl AblationRow {
    pub fn succeeded(&self) -> bool {
        self.error.is_none()
    }
}

/// Config for one setting and training seed.
pub fn setting_config(base: &RunConfig, setting: &Setting, seed: u64) -> RunConfig {
    let mut cfg = base.clone();
    cfg.model.n_blocks = setting.n_blocks;
    cfg.loss.enable_lil = setting.enable_lil;
    cfg.loss.enable_gil = setting.enable_gil;
    cfg.train.seed = seed;
    cfg
}

fn summarize(m: &crate::train::trainer::MetricsRecord) -> SplitSummary {
    SplitSummary {
        accuracy: m.accuracy,
        auc: m.auc,
        logloss: m.logloss,
        mean_off_diagonal_mi: m.mean_off_diagonal_mi,
        mean_label_mi: m.mean_label_mi,
    }
}

fn run_one(base: &RunConfig, data: &PreparedData, setting: &Setting, seed: u64, out: Option<&Path>) -> AblationRow {
    let cfg = setting_config(base, setting, seed);
    let mut row = AblationRow {
        setting: setting.name.clone(),
        n_blocks: setting.n_blocks,
        enable_lil: setting.enable_lil,
        enable_gil: setting.enable_gil,
        seed,
        error: None,
        validation: None,
        shifted: None,
    };
    let dir = out.map(|d| d.join(format!("{}_seed{seed}", setting.name)));
    let result = cfg
        .validate()
        .map_err(|e| e.to_string())
        .and_then(|_| run_with_data(&cfg, data, dir.as_deref()).map_err(|e: RunError| e.to_string()));
    match result {
        Ok(r) => match (&r.manifest.status, r.metrics()) {
            (RunStatus::Complete, Some(m)) => {
                row.validation = Some(summarize(&m.validation));
                row.shifted = Some(summarize(&m.shifted));
            }
            (RunStatus::Diverged(why), _) => row.error = Some(format!("diverged: {why}")),
            (RunStatus::Complete, None) => row.error = Some("no metrics".into()),
        },
        Err(e) => row.error = Some(e),
    }
    row
}

/// Runs every setting for every training seed. The data seed stays fixed, so
/// all runs see the same data. Failed runs are recorded, not fatal.
pub fn ablation_sweep(
    base: &RunConfig,
    sweep: &Sweep,
    seeds: &[u64],
    out: Option<&Path>,
) -> Result<Vec<AblationRow>, SynthError> {
    let data = prepare_data(&base.data)?;
    let mut rows = Vec::new();
    for setting in sweep.settings(base) {
        for &seed in seeds {
            rows.push(run_one(base, &data, &setting, seed, out));
        }
    }
    Ok(rows)
}

pub const ABLATION_HEADER: &str = "setting,n_blocks,enable_lil,enable_gil,seed,status,\
val_acc,val_auc,val_logloss,val_mean_offdiag_mi,val_mean_label_mi,\
shifted_acc,shifted_auc,shifted_logloss,shifted_mean_offdiag_mi,shifted_mean_label_mi";

pub fn ablation_csv(rows: &[AblationRow]) -> String {
    let mut out = String::from(ABLATION_HEADER);
    out.push('\n');
    let cells = |s: &Option<SplitSummary>| match s {
        Some(s) => format!(
            "{},{},{},{},{}",
            s.accuracy, s.auc, s.logloss, s.mean_off_diagonal_mi, s.mean_label_mi
        ),
        None => ",,,,".to_string(),
    };
    for r in rows {
        let status = match &r.error {
            None => "ok".to_string(),
            Some(e) => format!("\"failed: {}\"", e.replace('"', "'")),
        };
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{}",
            r.setting,
            r.n_blocks,
            r.enable_lil,
            r.enable_gil,
            r.seed,
            status,
            cells(&r.validation),
            cells(&r.shifted)
        );
    }
    out
}
