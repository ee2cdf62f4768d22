//! Randomized identity suite over Dirichlet-random joints.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::prob::{
    chain_rule_residual, decomposition_residual, random_joint, verify_theorem, BoundReport, ProbError, BOUND_TOL,
};

pub const CHAIN_RULE_TOL: f64 = 1e-9;
pub const DECOMPOSITION_TOL: f64 = 1e-12;
pub const DEFAULT_CONCENTRATIONS: [f64; 3] = [0.2, 1.0, 5.0];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuiteSettings {
    pub trials: usize,
    pub seed: u64,
    /// Number of local variables; drawn from {2, 3} per trial when unset.
    pub n_locals: Option<usize>,
    /// Cardinalities of the locals followed by `y`; drawn per trial when
    /// unset (locals in 2..=4, binary `y`).
    pub cardinalities: Option<Vec<usize>>,
    pub concentrations: Vec<f64>,
}

impl SuiteSettings {
    pub fn new(trials: usize, seed: u64) -> Self {
        Self {
            trials,
            seed,
            n_locals: None,
            cardinalities: None,
            concentrations: DEFAULT_CONCENTRATIONS.to_vec(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub trial: usize,
    pub joint_seed: u64,
    pub concentration: f64,
    pub cardinalities: Vec<usize>,
    pub bound: BoundReport,
    /// `|lhs - rhs|`; zero up to rounding since both sides use exact conditionals.
    pub gap: f64,
    pub chain_rule_residual: f64,
    pub decomposition_residual: f64,
    pub passed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FailedTrial {
    pub record: TrialRecord,
    /// The joint in the text format, for replay.
    pub joint: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuiteReport {
    pub settings: SuiteSettings,
    pub passed: usize,
    pub failed: usize,
    pub bound_holds: usize,
    pub max_gap: f64,
    pub min_residual: f64,
    pub max_chain_rule_residual: f64,
    pub max_decomposition_residual: f64,
    pub failures: Vec<FailedTrial>,
}

impl SuiteReport {
    pub fn all_passed(&self) -> bool {
        self.failed == 0
    }
}

fn trial_shape(settings: &SuiteSettings, rng: &mut ChaCha8Rng) -> Vec<usize> {
    if let Some(c) = &settings.cardinalities {
        return c.clone();
    }
    let n = settings.n_locals.unwrap_or_else(|| rng.random_range(2..=3));
    let mut cards: Vec<usize> = (0..n).map(|_| rng.random_range(2..=4)).collect();
    cards.push(2);
    cards
}

pub fn run_suite(settings: &SuiteSettings) -> Result<SuiteReport, ProbError> {
    if settings.concentrations.is_empty() {
        return Err(ProbError::InvalidConcentration(f64::NAN));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(settings.seed);
    let mut report = SuiteReport {
        settings: settings.clone(),
        passed: 0,
        failed: 0,
        bound_holds: 0,
        max_gap: 0.0,
        min_residual: f64::INFINITY,
        max_chain_rule_residual: 0.0,
        max_decomposition_residual: 0.0,
        failures: Vec::new(),
    };
    for trial in 0..settings.trials {
        let cards = trial_shape(settings, &mut rng);
        let concentration = settings.concentrations[trial % settings.concentrations.len()];
        let joint_seed: u64 = rng.random();
        let joint = random_joint(joint_seed, &cards, concentration)?;
        let bound = verify_theorem(&joint)?;
        let gap = bound.residual.abs();
        let chain = chain_rule_residual(&joint)?;
        let decomposition = decomposition_residual(&joint)?;
        let passed = bound.holds && gap <= BOUND_TOL && chain <= CHAIN_RULE_TOL && decomposition <= DECOMPOSITION_TOL;

        report.bound_holds += usize::from(bound.holds);
        report.max_gap = report.max_gap.max(gap);
        report.min_residual = report.min_residual.min(bound.residual);
        report.max_chain_rule_residual = report.max_chain_rule_residual.max(chain);
        report.max_decomposition_residual = report.max_decomposition_residual.max(decomposition);
        let record = TrialRecord {
            trial,
            joint_seed,
            concentration,
            cardinalities: cards,
            bound,
            gap,
            chain_rule_residual: chain,
            decomposition_residual: decomposition,
            passed,
        };
        if passed {
            report.passed += 1;
        } else {
            report.failed += 1;
            report.failures.push(FailedTrial {
                record,
                joint: joint.to_text(),
            });
        }
    }
    if settings.trials == 0 {
        report.min_residual = 0.0;
    }
    Ok(report)
}
