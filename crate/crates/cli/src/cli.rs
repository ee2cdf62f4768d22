use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

/// Train and evaluate local/global information-bottleneck classifiers on
/// synthetic factor data, and check the underlying information bound.
#[derive(Debug, Parser)]
#[command(name = "ibdd", version)]
pub struct Cli {
    /// Run configuration (TOML). The built-in default is used when omitted.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,

    /// Output directory. Defaults to `$IBDD_OUT`, then `./runs`.
    #[arg(long, global = true, env = "IBDD_OUT")]
    pub out: Option<PathBuf>,

    /// Seed override (training seed, or the verify seed).
    #[arg(long, global = true)]
    pub seed: Option<u64>,

    /// Overwrite existing run artifacts.
    #[arg(long, global = true)]
    pub force: bool,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Check the bound and identities on random discrete joints.
    Verify(VerifyArgs),
    /// Train one model and write its run directory.
    Train,
    /// Evaluate a checkpoint on one split.
    Eval(EvalArgs),
    /// Sweep block counts or loss toggles.
    Ablate(AblateArgs),
    /// Summarise run directories into markdown and CSV.
    Report(ReportArgs),
    /// Print the built-in default configuration.
    DefaultConfig,
}

#[derive(Debug, Args)]
pub struct VerifyArgs {
    /// Number of random joints (at least 1).
    #[arg(long, default_value_t = 1000, value_parser = clap::value_parser!(u64).range(1..))]
    pub trials: u64,
    /// Number of local variables (random in {2, 3} when omitted).
    #[arg(long, value_parser = clap::value_parser!(u64).range(2..))]
    pub n: Option<u64>,
    /// Cardinalities: one per local, optionally followed by the label's.
    #[arg(long, value_delimiter = ',')]
    pub cards: Option<Vec<usize>>,
    /// Dirichlet concentrations, cycled over trials.
    #[arg(long, value_delimiter = ',', default_values_t = vec![0.2, 1.0, 5.0])]
    pub concentrations: Vec<f64>,
    /// Also report information quantities in bits.
    #[arg(long)]
    pub bits: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum EvalSplit {
    Train,
    Validation,
    Shifted,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    /// Checkpoint directory (holding checkpoint.json and checkpoint.bin).
    #[arg(long)]
    pub checkpoint: PathBuf,
    #[arg(long, value_enum, default_value_t = EvalSplit::Shifted)]
    pub split: EvalSplit,
    /// Also compute group-level AUC.
    #[arg(long)]
    pub group: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SweepKind {
    /// The four combinations of the local and global terms.
    Toggles,
    /// The block counts given by `--blocks`.
    Blocks,
}

#[derive(Debug, Args)]
pub struct AblateArgs {
    #[arg(long, value_enum)]
    pub sweep: SweepKind,
    /// Block counts for `--sweep blocks`.
    #[arg(long, value_delimiter = ',', default_values_t = vec![3, 4, 5, 6, 7])]
    pub blocks: Vec<usize>,
    /// Training seeds; every setting runs once per seed.
    #[arg(long, value_delimiter = ',')]
    pub seeds: Option<Vec<u64>>,
}

#[derive(Debug, Args)]
pub struct ReportArgs {
    /// Run directories to summarise.
    #[arg(required = true)]
    pub runs: Vec<PathBuf>,
}
