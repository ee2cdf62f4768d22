//! Consolidated summary of finished run directories.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use ibdd_core::train::artifacts::{RunManifest, RunMetrics, RunStatus, HISTORY_FILE, METRICS_FILE, RUN_MANIFEST_FILE};

use crate::commands::CliError;

pub const REPORT_MD: &str = "report.md";
pub const SUMMARY_CSV: &str = "summary.csv";
pub const CURVES_CSV: &str = "curves.csv";
pub const MI_CSV: &str = "mi_heatmap.csv";

struct Complete {
    dir: PathBuf,
    manifest: RunManifest,
    metrics: RunMetrics,
    history: Option<String>,
}

fn load(dir: &Path) -> Result<Complete, String> {
    let manifest_text =
        fs::read_to_string(dir.join(RUN_MANIFEST_FILE)).map_err(|_| format!("missing {RUN_MANIFEST_FILE}"))?;
    let manifest: RunManifest =
        serde_json::from_str(&manifest_text).map_err(|e| format!("unreadable {RUN_MANIFEST_FILE}: {e}"))?;
    if let RunStatus::Diverged(why) = &manifest.status {
        return Err(format!("diverged: {why}"));
    }
    let metrics_text = fs::read_to_string(dir.join(METRICS_FILE)).map_err(|_| format!("missing {METRICS_FILE}"))?;
    let metrics: RunMetrics =
        serde_json::from_str(&metrics_text).map_err(|e| format!("unreadable {METRICS_FILE}: {e}"))?;
    let history = fs::read_to_string(dir.join(HISTORY_FILE)).ok();
    Ok(Complete {
        dir: dir.to_path_buf(),
        manifest,
        metrics,
        history,
    })
}

pub fn run(dirs: &[PathBuf], out: &Path) -> Result<(), CliError> {
    let mut complete = Vec::new();
    let mut incomplete = Vec::new();
    for d in dirs {
        match load(d) {
            Ok(c) => complete.push(c),
            Err(why) => incomplete.push((d.clone(), why)),
        }
    }

    let mut md = String::from("# Run report\n\n");
    let mut summary = String::from(
        "run,n_blocks,enable_lil,enable_gil,mode,seed,epochs,val_acc,val_auc,val_logloss,shifted_acc,shifted_auc,shifted_logloss,shifted_mean_offdiag_mi,shifted_mean_label_mi\n",
    );
    let mut curves = String::new();
    let mut mi = String::from("run,row,col,mi\n");
    for c in &complete {
        let cfg = &c.manifest.config;
        let (v, s) = (&c.metrics.validation, &c.metrics.shifted);
        let name = c.dir.display();
        let _ = writeln!(md, "## {name}\n");
        let _ = writeln!(
            md,
            "- blocks: {}, lil: {}, gil: {}, weights: {:?}, seed: {}",
            cfg.model.n_blocks, cfg.loss.enable_lil, cfg.loss.enable_gil, cfg.loss.mode, c.manifest.seed
        );
        let _ = writeln!(md, "- epochs completed: {}\n", c.manifest.epochs_completed);
        let _ = writeln!(md, "| split | accuracy | AUC | log loss | mean off-diagonal MI | mean label MI |");
        let _ = writeln!(md, "|---|---|---|---|---|---|");
        for (label, m) in [("validation", v), ("shifted", s)] {
            let _ = writeln!(
                md,
                "| {label} | {:.4} | {:.4} | {:.4} | {:.4} | {:.4} |",
                m.accuracy, m.auc, m.logloss, m.mean_off_diagonal_mi, m.mean_label_mi
            );
        }
        md.push('\n');
        let _ = writeln!(
            summary,
            "{name},{},{},{},{:?},{},{},{},{},{},{},{},{},{},{}",
            cfg.model.n_blocks,
            cfg.loss.enable_lil,
            cfg.loss.enable_gil,
            cfg.loss.mode,
            c.manifest.seed,
            c.manifest.epochs_completed,
            v.accuracy,
            v.auc,
            v.logloss,
            s.accuracy,
            s.auc,
            s.logloss,
            s.mean_off_diagonal_mi,
            s.mean_label_mi
        );
        if let Some(h) = &c.history {
            let mut lines = h.lines();
            if let Some(header) = lines.next() {
                if curves.is_empty() {
                    let _ = writeln!(curves, "run,{header}");
                }
                for l in lines {
                    let _ = writeln!(curves, "{name},{l}");
                }
            }
        }
        for (i, row) in s.mi_matrix.iter().enumerate() {
            for (j, v) in row.iter().enumerate() {
                let _ = writeln!(mi, "{name},{i},{j},{v}");
            }
        }
    }
    if !incomplete.is_empty() {
        md.push_str("## Incomplete runs\n\n");
        for (d, why) in &incomplete {
            let _ = writeln!(md, "- {}: {why}", d.display());
        }
    }

    fs::create_dir_all(out).map_err(|e| CliError::Usage(format!("cannot create {}: {e}", out.display())))?;
    let write = |name: &str, text: &str| {
        fs::write(out.join(name), text).map_err(|e| CliError::Artifact(format!("{name}: {e}")))
    };
    write(REPORT_MD, &md)?;
    write(SUMMARY_CSV, &summary)?;
    write(CURVES_CSV, &curves)?;
    write(MI_CSV, &mi)?;
    for (d, why) in &incomplete {
        eprintln!("incomplete: {}: {why}", d.display());
    }
    println!(
        "{} complete, {} incomplete; report at {}",
        complete.len(),
        incomplete.len(),
        out.join(REPORT_MD).display()
    );
    if complete.is_empty() {
        Err(CliError::Artifact("no complete runs".into()))
    } else {
        Ok(())
    }
}
