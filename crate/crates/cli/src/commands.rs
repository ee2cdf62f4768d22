use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

use ibdd_core::config::RunConfig;
use ibdd_core::prob::nats_to_bits;
use ibdd_core::synth::Split;
use ibdd_core::train::ablation::{ablation_csv, ablation_sweep, Sweep, ABLATION_FILE};
use ibdd_core::train::artifacts::{
    mi_matrix_csv, run_experiment, write_json, RunError, RunStatus, METRICS_FILE, MI_MATRIX_FILE, RUN_MANIFEST_FILE,
};
use ibdd_core::train::checkpoint::load_checkpoint;
use ibdd_core::train::trainer::{evaluate, prepare_data, TrainError};
use ibdd_core::verify::{run_suite, SuiteReport, SuiteSettings};
use serde::Serialize;

use crate::cli::{AblateArgs, Cli, Command, EvalArgs, EvalSplit, SweepKind, VerifyArgs};
use crate::report;

pub const DEFAULT_CONFIG: &str = include_str!("../configs/default.toml");
pub const DEFAULT_OUT: &str = "runs";
pub const VERIFY_REPORT_FILE: &str = "verify_report.json";
pub const CONFIG_SNAPSHOT_FILE: &str = "config.toml";

/// Failure classes, one per exit code.
#[derive(Debug)]
pub enum CliError {
    Verification(String),
    Usage(String),
    Diverged(String),
    Artifact(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Verification(_) => 1,
            CliError::Usage(_) => 2,
            CliError::Diverged(_) => 3,
            CliError::Artifact(_) => 4,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Verification(m) | CliError::Usage(m) | CliError::Diverged(m) | CliError::Artifact(m) => {
                f.write_str(m)
            }
        }
    }
}

type Result<T> = std::result::Result<T, CliError>;

fn artifact(e: impl fmt::Display) -> CliError {
    CliError::Artifact(e.to_string())
}

fn usage(e: impl fmt::Display) -> CliError {
    CliError::Usage(e.to_string())
}

fn run_error(e: RunError) -> CliError {
    match e {
        RunError::Train(TrainError::Diverged { reason, .. }) => CliError::Diverged(reason),
        RunError::Data(e) => usage(e),
        RunError::Train(TrainError::Data(e)) => usage(e),
        other => artifact(other),
    }
}

pub fn run(cli: Cli) -> Result<()> {
    let out = cli.out.clone().unwrap_or_else(|| PathBuf::from(DEFAULT_OUT));
    match &cli.command {
        Command::Verify(args) => verify(&cli, args, &out),
        Command::Train => train(&cli, &out),
        Command::Eval(args) => eval(&cli, args, &out),
        Command::Ablate(args) => ablate(&cli, args, &out),
        Command::Report(args) => report::run(&args.runs, &out),
        Command::DefaultConfig => {
            print!("{DEFAULT_CONFIG}");
            Ok(())
        }
    }
}

fn read_config(path: Option<&Path>) -> Result<RunConfig> {
    match path {
        Some(p) => {
            let text = fs::read_to_string(p).map_err(|e| usage(format!("cannot read {}: {e}", p.display())))?;
            RunConfig::from_toml_str(&text).map_err(|e| usage(format!("{}: {e}", p.display())))
        }
        None => RunConfig::from_toml_str(DEFAULT_CONFIG).map_err(|e| usage(format!("built-in config: {e}"))),
    }
}

fn load_config(cli: &Cli) -> Result<RunConfig> {
    let mut cfg = read_config(cli.config.as_deref())?;
    if let Some(seed) = cli.seed {
        cfg.train.seed = seed;
    }
    Ok(cfg)
}

fn prepare_out(out: &Path, guarded: &str, force: bool) -> Result<()> {
    let target = out.join(guarded);
    if target.exists() && !force {
        return Err(usage(format!(
            "{} already exists; pass --force to overwrite",
            target.display()
        )));
    }
    fs::create_dir_all(out).map_err(|e| usage(format!("cannot create {}: {e}", out.display())))
}

#[derive(Serialize)]
struct BitsSummary {
    max_gap: f64,
    min_residual: f64,
    max_chain_rule_residual: f64,
    max_decomposition_residual: f64,
}

#[derive(Serialize)]
struct VerifyOutput<'a> {
    #[serde(flatten)]
    report: &'a SuiteReport,
    #[serde(skip_serializing_if = "Option::is_none")]
    bits: Option<BitsSummary>,
}

fn verify(cli: &Cli, args: &VerifyArgs, out: &Path) -> Result<()> {
    let mut settings = SuiteSettings::new(args.trials as usize, cli.seed.unwrap_or(0));
    settings.n_locals = args.n.map(|n| n as usize);
    if let Some(cards) = &args.cards {
        if cards.contains(&0) {
            return Err(usage("--cards: cardinalities must be >= 1"));
        }
        let mut cards = cards.clone();
        match settings.n_locals {
            Some(n) if cards.len() == n => cards.push(2),
            Some(n) if cards.len() == n + 1 => {}
            Some(n) => {
                return Err(usage(format!(
                    "--cards: expected {n} or {} values for --n {n}, got {}",
                    n + 1,
                    cards.len()
                )))
            }
            None if cards.len() >= 3 => {}
            None => return Err(usage("--cards needs at least two locals and the label")),
        }
        settings.cardinalities = Some(cards);
    }
    if args.concentrations.iter().any(|c| !(*c > 0.0 && c.is_finite())) {
        return Err(usage("--concentrations must be positive"));
    }
    settings.concentrations = args.concentrations.clone();

    let report = run_suite(&settings).map_err(usage)?;
    fs::create_dir_all(out).map_err(|e| usage(format!("cannot create {}: {e}", out.display())))?;
    let bits = args.bits.then(|| BitsSummary {
        max_gap: nats_to_bits(report.max_gap),
        min_residual: nats_to_bits(report.min_residual),
        max_chain_rule_residual: nats_to_bits(report.max_chain_rule_residual),
        max_decomposition_residual: nats_to_bits(report.max_decomposition_residual),
    });
    let path = out.join(VERIFY_REPORT_FILE);
    write_json(&path, &VerifyOutput { report: &report, bits }).map_err(artifact)?;
    println!(
        "verify: {}/{} joints passed; bound held in {}; max |lhs - rhs| = {:.3e}; max chain-rule residual = {:.3e}; max decomposition residual = {:.3e}",
        report.passed,
        args.trials,
        report.bound_holds,
        report.max_gap,
        report.max_chain_rule_residual,
        report.max_decomposition_residual
    );
    println!("report: {}", path.display());
    if report.all_passed() {
        Ok(())
    } else {
        Err(CliError::Verification(format!(
            "{} joint(s) violated an identity; see {} for replayable tables",
            report.failed,
            path.display()
        )))
    }
}

fn train(cli: &Cli, out: &Path) -> Result<()> {
    let cfg = load_config(cli)?;
    prepare_out(out, RUN_MANIFEST_FILE, cli.force)?;
    fs::write(out.join(CONFIG_SNAPSHOT_FILE), cfg.to_toml_string()).map_err(artifact)?;
    let result = run_experiment(&cfg, Some(out)).map_err(run_error)?;
    for h in &result.history {
        println!(
            "epoch {:>3}  lr {:.2e}  total {:.4}  ce {:.4}  val_acc {:.4}  val_auc {:.4}",
            h.epoch, h.lr, h.total, h.ce, h.val_acc, h.val_auc
        );
    }
    match (&result.manifest.status, result.metrics()) {
        (RunStatus::Diverged(why), _) => Err(CliError::Diverged(format!(
            "training diverged after {} epoch(s): {why}",
            result.history.len()
        ))),
        (RunStatus::Complete, Some(m)) => {
            println!(
                "validation: acc {:.4} auc {:.4} logloss {:.4}",
                m.validation.accuracy, m.validation.auc, m.validation.logloss
            );
            println!(
                "shifted:    acc {:.4} auc {:.4} logloss {:.4}",
                m.shifted.accuracy, m.shifted.auc, m.shifted.logloss
            );
            println!("run written to {} in {:.1}s", out.display(), result.manifest.wall_seconds);
            Ok(())
        }
        (RunStatus::Complete, None) => Err(artifact("run finished without metrics")),
    }
}

fn eval(cli: &Cli, args: &EvalArgs, out: &Path) -> Result<()> {
    let (params, manifest) = load_checkpoint(&args.checkpoint)
        .map_err(|e| artifact(format!("{}: {e}", args.checkpoint.display())))?;
    let cfg = match &cli.config {
        Some(p) => {
            let cfg = read_config(Some(p))?;
            if cfg.model_config() != manifest.model {
                return Err(artifact(format!(
                    "checkpoint model {:?} does not match config model {:?}",
                    manifest.model,
                    cfg.model_config()
                )));
            }
            cfg
        }
        None => manifest.config.clone(),
    };
    prepare_out(out, METRICS_FILE, cli.force)?;
    let data = prepare_data(&cfg.data).map_err(usage)?;
    let (ds, rows) = match args.split {
        EvalSplit::Train => (&data.train, data.train.rows_in(Split::Train)),
        EvalSplit::Validation => (&data.train, data.train.rows_in(Split::Val)),
        EvalSplit::Shifted => (&data.test, data.test.rows_in(Split::Test)),
    };
    let record = evaluate(&params, ds, &rows, args.group).map_err(|e| match e {
        TrainError::Model(m) => artifact(m),
        other => usage(other),
    })?;
    write_json(&out.join(METRICS_FILE), &record).map_err(artifact)?;
    fs::write(out.join(MI_MATRIX_FILE), mi_matrix_csv(&record)).map_err(artifact)?;
    print!(
        "{:?}: rows {} acc {:.4} auc {:.4} logloss {:.4}",
        args.split, record.rows, record.accuracy, record.auc, record.logloss
    );
    if let Some(g) = record.group_auc {
        print!(" group_auc {g:.4}");
    }
    println!();
    Ok(())
}

fn ablate(cli: &Cli, args: &AblateArgs, out: &Path) -> Result<()> {
    let cfg = load_config(cli)?;
    prepare_out(out, ABLATION_FILE, cli.force)?;
    let sweep = match args.sweep {
        SweepKind::Toggles => Sweep::Toggles,
        SweepKind::Blocks => Sweep::Blocks(args.blocks.clone()),
    };
    let seeds = args.seeds.clone().unwrap_or_else(|| vec![cfg.train.seed]);
    let rows = ablation_sweep(&cfg, &sweep, &seeds, Some(&out.join("runs"))).map_err(usage)?;
    fs::write(out.join(ABLATION_FILE), ablation_csv(&rows)).map_err(artifact)?;
    let failed: Vec<_> = rows.iter().filter(|r| !r.succeeded()).collect();
    for r in &rows {
        match (&r.error, &r.shifted) {
            (None, Some(s)) => println!("{} seed {}: shifted auc {:.4}", r.setting, r.seed, s.auc),
            (Some(e), _) => println!("{} seed {}: FAILED {e}", r.setting, r.seed),
            _ => {}
        }
    }
    println!("{} of {} runs succeeded; table at {}", rows.len() - failed.len(), rows.len(), out.join(ABLATION_FILE).display());
    if failed.len() < rows.len() {
        Ok(())
    } else if failed.iter().any(|r| r.error.as_deref().is_some_and(|e| e.starts_with("diverged"))) {
        Err(CliError::Diverged("every run diverged".into()))
    } else {
        Err(usage("every run failed"))
    }
}
