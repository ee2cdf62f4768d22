//! Exact information measures on small dense discrete joint distributions.
//!
//! Everything here is computed by direct marginalization of a dense
//! probability table, in nats. The module doubles as the brute-force oracle
//! for the local objective: [`local_objective_lhs`] sums conditional mutual
//! informations through entropies, while [`local_objective_rhs`] walks every
//! cell and accumulates expected KL divergences between exact conditionals.
//! The two routes share nothing but the table.

use std::f64::consts::LN_2;
use std::fmt::Write as _;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Gamma};
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Largest table accepted unless a caller raises the cap explicitly.
pub const DEFAULT_CELL_CAP: usize = 10_000_000;
/// Floor applied to the second KL argument before taking its log.
pub const KL_EPS: f64 = 1e-12;
/// Tolerance on the table sum.
pub const JOINT_SUM_TOL: f64 = 1e-12;
/// Tolerance on a categorical probability vector sum.
pub const CATEGORICAL_SUM_TOL: f64 = 1e-9;
/// A bound holds when `lhs - rhs >= -BOUND_TOL`.
pub const BOUND_TOL: f64 = 1e-9;
/// Name of the label variable in joints used for the local objective.
pub const LABEL_VAR: &str = "y";

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ProbError {
    #[error("unknown variable `{0}`")]
    UnknownVariable(String),
    #[error("variable subset is empty")]
    EmptySubset,
    #[error("variable `{0}` appears in more than one argument")]
    Overlap(String),
    #[error("variable `{0}` declared twice")]
    DuplicateVariable(String),
    #[error("variable `{0}` has cardinality 0")]
    ZeroCardinality(String),
    #[error("joint needs {cells} cells, cap is {cap}")]
    CellCap { cells: usize, cap: usize },
    #[error("table has {actual} entries, variables imply {expected}")]
    TableSize { expected: usize, actual: usize },
    #[error("entry {index} is {value}, probabilities must be finite and non-negative")]
    InvalidEntry { index: usize, value: f64 },
    #[error("probabilities sum to {sum}, expected 1")]
    NotNormalized { sum: f64 },
    #[error("support sizes differ: {p} vs {q}")]
    SupportMismatch { p: usize, q: usize },
    #[error("categorical needs at least one outcome")]
    EmptyCategorical,
    #[error("joint has no `{LABEL_VAR}` variable")]
    MissingLabel,
    #[error("local objective needs at least 2 local variables, found {0}")]
    TooFewLocals(usize),
    #[error("concentration must be positive and finite, got {0}")]
    InvalidConcentration(f64),
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
}

pub type Result<T> = std::result::Result<T, ProbError>;

/// Converts nats to bits for presentation.
pub fn nats_to_bits(nats: f64) -> f64 {
    nats / LN_2
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Variable {
    pub name: String,
    pub cardinality: usize,
}

/// Dense joint probability table, row-major over `variables`.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteJoint {
    variables: Vec<Variable>,
    table: Vec<f64>,
}

impl DiscreteJoint {
    pub fn new(variables: Vec<(String, usize)>, table: Vec<f64>) -> Result<Self> {
        Self::with_cap(variables, table, DEFAULT_CELL_CAP)
    }

    pub fn with_cap(variables: Vec<(String, usize)>, table: Vec<f64>, cap: usize) -> Result<Self> {
        let variables = check_variables(variables, cap)?;
        let cells: usize = variables.iter().map(|v| v.cardinality).product();
        if table.len() != cells {
            return Err(ProbError::TableSize {
                expected: cells,
                actual: table.len(),
            });
        }
        let mut sum = 0.0;
        for (index, &value) in table.iter().enumerate() {
            if !value.is_finite() || value < 0.0 {
                return Err(ProbError::InvalidEntry { index, value });
            }
            sum += value;
        }
        if (sum - 1.0).abs() > JOINT_SUM_TOL {
            return Err(ProbError::NotNormalized { sum });
        }
        Ok(Self { variables, table })
    }

    pub fn variables(&self) -> &[Variable] {
        &self.variables
    }

    pub fn table(&self) -> &[f64] {
        &self.table
    }

    pub fn index_of(&self, name: &str) -> Result<usize> {
        self.variables
            .iter()
            .position(|v| v.name == name)
            .ok_or_else(|| ProbError::UnknownVariable(name.to_string()))
    }

    pub fn cardinality(&self, name: &str) -> Result<usize> {
        Ok(self.variables[self.index_of(name)?].cardinality)
    }

    /// Marginal table over `vars` (in the given order, row-major).
    pub fn marginal(&self, vars: &[&str]) -> Result<Vec<f64>> {
        let idx = self.resolve(vars)?;
        Ok(self.marginal_by_index(&idx))
    }

    /// `H(vars)`.
    pub fn entropy(&self, vars: &[&str]) -> Result<f64> {
        let idx = self.resolve(vars)?;
        Ok(self.h(&idx))
    }

    /// `H(target | given) = H(target, given) - H(given)`.
    pub fn conditional_entropy(&self, target: &[&str], given: &[&str]) -> Result<f64> {
        let t = self.resolve(target)?;
        let g = self.resolve_allow_empty(given)?;
        disjoint(self, &[&t, &g])?;
        let joint = union(&[&t, &g]);
        Ok((self.h(&joint) - self.h(&g)).max(0.0))
    }

    /// `I(A; B)`, clamped at zero.
    pub fn mutual_information(&self, a: &[&str], b: &[&str]) -> Result<f64> {
        let a = self.resolve(a)?;
        let b = self.resolve(b)?;
        disjoint(self, &[&a, &b])?;
        Ok(self.mi(&a, &b))
    }

    /// `I(A; B | C)`, clamped at zero. An empty `C` reduces to `I(A; B)`.
    pub fn conditional_mutual_information(&self, a: &[&str], b: &[&str], c: &[&str]) -> Result<f64> {
        let a = self.resolve(a)?;
        let b = self.resolve(b)?;
        let c = self.resolve_allow_empty(c)?;
        disjoint(self, &[&a, &b, &c])?;
        Ok(self.cmi(&a, &b, &c))
    }

    /// McGill interaction information `I(A;B) - I(A;B|C)`. Negative values
    /// indicate synergy.
    pub fn interaction_information(&self, a: &[&str], b: &[&str], c: &[&str]) -> Result<f64> {
        let a = self.resolve(a)?;
        let b = self.resolve(b)?;
        let c = self.resolve(c)?;
        disjoint(self, &[&a, &b, &c])?;
        Ok(self.mi(&a, &b) - self.cmi(&a, &b, &c))
    }

    /// Parses the text format:
    ///
    /// ```text
    /// # comment
    /// vars: z1:2,z2:2,y:2
    /// 0.125
    /// ...
    /// ```
    pub fn from_text(text: &str) -> Result<Self> {
        let mut header: Option<Vec<(String, usize)>> = None;
        let mut values = Vec::new();
        for (i, raw) in text.lines().enumerate() {
            let line_no = i + 1;
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            if header.is_none() {
                let rest = line.strip_prefix("vars:").ok_or_else(|| ProbError::Parse {
                    line: line_no,
                    msg: "expected header `vars: name:card,...`".into(),
                })?;
                header = Some(parse_header(rest, line_no)?);
                continue;
            }
            let v: f64 = line.parse().map_err(|_| ProbError::Parse {
                line: line_no,
                msg: format!("not a probability: `{line}`"),
            })?;
            values.push(v);
        }
        let header = header.ok_or(ProbError::Parse {
            line: 0,
            msg: "missing `vars:` header".into(),
        })?;
        Self::new(header, values)
    }

    /// Serializes to the text format. Values use shortest round-trip notation,
    /// so `from_text(to_text())` reproduces the table exactly.
    pub fn to_text(&self) -> String {
        let mut out = String::from("vars: ");
        let header: Vec<String> = self
            .variables
            .iter()
            .map(|v| format!("{}:{}", v.name, v.cardinality))
            .collect();
        out.push_str(&header.join(","));
        out.push('\n');
        for p in &self.table {
            let _ = writeln!(out, "{p:?}");
        }
        out
    }

    fn resolve(&self, names: &[&str]) -> Result<Vec<usize>> {
        if names.is_empty() {
            return Err(ProbError::EmptySubset);
        }
        self.resolve_allow_empty(names)
    }

    fn resolve_allow_empty(&self, names: &[&str]) -> Result<Vec<usize>> {
        let mut out = Vec::with_capacity(names.len());
        for name in names {
            let i = self.index_of(name)?;
            if out.contains(&i) {
                return Err(ProbError::Overlap(name.to_string()));
            }
            out.push(i);
        }
        Ok(out)
    }

    fn marginal_by_index(&self, idx: &[usize]) -> Vec<f64> {
        let size: usize = idx.iter().map(|&i| self.variables[i].cardinality).product();
        let mut out = vec![0.0; size];
        if idx.is_empty() {
            out[0] = self.table.iter().sum();
            return out;
        }
        let mut coords = vec![0usize; self.variables.len()];
        for &p in &self.table {
            let mut m = 0;
            for &i in idx {
                m = m * self.variables[i].cardinality + coords[i];
            }
            out[m] += p;
            increment(&mut coords, &self.variables);
        }
        out
    }

    /// Entropy of a (possibly empty) index set. Indices are sorted first so
    /// the result does not depend on argument order.
    fn h(&self, idx: &[usize]) -> f64 {
        if idx.is_empty() {
            return 0.0;
        }
        let mut sorted = idx.to_vec();
        sorted.sort_unstable();
        entropy_of(&self.marginal_by_index(&sorted))
    }

    fn mi(&self, a: &[usize], b: &[usize]) -> f64 {
        (self.h(a) + self.h(b) - self.h(&union(&[a, b]))).max(0.0)
    }

    fn cmi(&self, a: &[usize], b: &[usize], c: &[usize]) -> f64 {
        let ac = union(&[a, c]);
        let bc = union(&[b, c]);
        let abc = union(&[a, b, c]);
        (self.h(&ac) + self.h(&bc) - self.h(&abc) - self.h(c)).max(0.0)
    }

    fn split_label(&self) -> Result<(Vec<usize>, usize)> {
        let y = self
            .variables
            .iter()
            .position(|v| v.name == LABEL_VAR)
            .ok_or(ProbError::MissingLabel)?;
        let locals: Vec<usize> = (0..self.variables.len()).filter(|&i| i != y).collect();
        if locals.len() < 2 {
            return Err(ProbError::TooFewLocals(locals.len()));
        }
        Ok((locals, y))
    }
}

fn check_variables(variables: Vec<(String, usize)>, cap: usize) -> Result<Vec<Variable>> {
    let mut out: Vec<Variable> = Vec::with_capacity(variables.len());
    let mut cells: usize = 1;
    for (name, cardinality) in variables {
        if cardinality == 0 {
            return Err(ProbError::ZeroCardinality(name));
        }
        if out.iter().any(|v| v.name == name) {
            return Err(ProbError::DuplicateVariable(name));
        }
        cells = cells.saturating_mul(cardinality);
        if cells > cap {
            return Err(ProbError::CellCap { cells, cap });
        }
        out.push(Variable { name, cardinality });
    }
    Ok(out)
}

fn parse_header(rest: &str, line: usize) -> Result<Vec<(String, usize)>> {
    rest.split(',')
        .map(|item| {
            let (name, card) = item.trim().split_once(':').ok_or_else(|| ProbError::Parse {
                line,
                msg: format!("expected `name:card`, got `{}`", item.trim()),
            })?;
            let card: usize = card.trim().parse().map_err(|_| ProbError::Parse {
                line,
                msg: format!("bad cardinality `{}`", card.trim()),
            })?;
            Ok((name.trim().to_string(), card))
        })
        .collect()
}

fn increment(coords: &mut [usize], vars: &[Variable]) {
    for i in (0..coords.len()).rev() {
        coords[i] += 1;
        if coords[i] < vars[i].cardinality {
            return;
        }
        coords[i] = 0;
    }
}

fn union(sets: &[&[usize]]) -> Vec<usize> {
    sets.iter().flat_map(|s| s.iter().copied()).collect()
}

fn disjoint(joint: &DiscreteJoint, sets: &[&Vec<usize>]) -> Result<()> {
    for (i, a) in sets.iter().enumerate() {
        for b in &sets[i + 1..] {
            if let Some(&shared) = a.iter().find(|x| b.contains(x)) {
                return Err(ProbError::Overlap(joint.variables[shared].name.clone()));
            }
        }
    }
    Ok(())
}

fn entropy_of(probs: &[f64]) -> f64 {
    let h: f64 = probs.iter().filter(|&&p| p > 0.0).map(|&p| -p * p.ln()).sum();
    h.max(0.0)
}

/// Probability vector over a finite support.
#[derive(Debug, Clone, PartialEq)]
pub struct Categorical {
    probs: Vec<f64>,
}

impl Categorical {
    pub fn new(probs: Vec<f64>) -> Result<Self> {
        if probs.is_empty() {
            return Err(ProbError::EmptyCategorical);
        }
        let mut sum = 0.0;
        for (index, &value) in probs.iter().enumerate() {
            if !value.is_finite() || value < 0.0 {
                return Err(ProbError::InvalidEntry { index, value });
            }
            sum += value;
        }
        if (sum - 1.0).abs() > CATEGORICAL_SUM_TOL {
            return Err(ProbError::NotNormalized { sum });
        }
        Ok(Self { probs })
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn support_size(&self) -> usize {
        self.probs.len()
    }
}

/// `KL(p || q)` in nats with `q` floored at [`KL_EPS`].
pub fn kl_divergence(p: &Categorical, q: &Categorical) -> Result<f64> {
    if p.support_size() != q.support_size() {
        return Err(ProbError::SupportMismatch {
            p: p.support_size(),
            q: q.support_size(),
        });
    }
    Ok(kl_slices(&p.probs, &q.probs))
}

fn kl_slices(p: &[f64], q: &[f64]) -> f64 {
    let kl: f64 = p
        .iter()
        .zip(q)
        .filter(|(&pi, _)| pi > 0.0)
        .map(|(&pi, &qi)| pi * (pi / qi.max(KL_EPS)).ln())
        .sum();
    kl.max(0.0)
}

/// Outcome of checking `sum_i I(z_i; y | Z\z_i) >= sum_i E KL[p(y|Z) || p(y|Z\z_i)]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundReport {
    #[serde(rename = "lhs")]
    pub lhs_nats: f64,
    #[serde(rename = "rhs")]
    pub rhs_nats: f64,
    pub residual: f64,
    pub holds: bool,
}

/// `sum_i I(z_i; y | Z \ z_i)` where every non-`y` variable is a local `z_i`.
pub fn local_objective_lhs(joint: &DiscreteJoint) -> Result<f64> {
    let (locals, y) = joint.split_label()?;
    Ok(locals
        .iter()
        .map(|&zi| {
            let rest: Vec<usize> = locals.iter().copied().filter(|&z| z != zi).collect();
            joint.cmi(&[zi], &[y], &rest)
        })
        .sum())
}

/// `sum_i E_{p(Z)} KL[p(y|Z) || p(y|Z\z_i)]` from exact conditionals.
pub fn local_objective_rhs(joint: &DiscreteJoint) -> Result<f64> {
    let (locals, y) = joint.split_label()?;
    let vars = &joint.variables;
    let y_card = vars[y].cardinality;

    // p(Z, y) with y as the fastest axis.
    let mut order = locals.clone();
    order.push(y);
    let full = joint.marginal_by_index(&order);
    let z_cards: Vec<usize> = locals.iter().map(|&i| vars[i].cardinality).collect();
    let z_cells = full.len() / y_card;

    let mut total = 0.0;
    for skip in 0..locals.len() {
        let mut rest = locals.clone();
        rest.remove(skip);
        rest.push(y);
        let reduced = joint.marginal_by_index(&rest);

        let mut coords = vec![0usize; locals.len()];
        let mut q_cond = vec![0.0; y_card];
        let mut p_cond = vec![0.0; y_card];
        for cell in 0..z_cells {
            let row = &full[cell * y_card..(cell + 1) * y_card];
            let p_z: f64 = row.iter().sum();
            if p_z > 0.0 {
                let mut r = 0;
                for (k, &c) in coords.iter().enumerate() {
                    if k != skip {
                        r = r * z_cards[k] + c;
                    }
                }
                let qrow = &reduced[r * y_card..(r + 1) * y_card];
                let q_z: f64 = qrow.iter().sum();
                for j in 0..y_card {
                    p_cond[j] = row[j] / p_z;
                    q_cond[j] = qrow[j] / q_z;
                }
                total += p_z * kl_slices(&p_cond, &q_cond);
            }
            for k in (0..coords.len()).rev() {
                coords[k] += 1;
                if coords[k] < z_cards[k] {
                    break;
                }
                coords[k] = 0;
            }
        }
    }
    Ok(total)
}

pub fn verify_theorem(joint: &DiscreteJoint) -> Result<BoundReport> {
    let lhs = local_objective_lhs(joint)?;
    let rhs = local_objective_rhs(joint)?;
    let residual = lhs - rhs;
    Ok(BoundReport {
        lhs_nats: lhs,
        rhs_nats: rhs,
        residual,
        holds: residual >= -BOUND_TOL,
    })
}

/// `| I(y; Z) - sum_i I(z_i; y | z_1..z_{i-1}) |`.
pub fn chain_rule_residual(joint: &DiscreteJoint) -> Result<f64> {
    let (locals, y) = joint.split_label()?;
    let whole = joint.mi(&[y], &locals);
    let chained: f64 = (0..locals.len())
        .map(|i| joint.cmi(&[locals[i]], &[y], &locals[..i]))
        .sum();
    Ok((whole - chained).abs())
}

/// Largest `| I(z_i;z_j) - [I(z_i;z_j;y) + I(z_i;z_j|y)] |` over local pairs,
/// with the interaction term expanded through entropies.
pub fn decomposition_residual(joint: &DiscreteJoint) -> Result<f64> {
    let (locals, y) = joint.split_label()?;
    let mut worst: f64 = 0.0;
    for (k, &a) in locals.iter().enumerate() {
        for &b in &locals[k + 1..] {
            let h = |idx: &[usize]| joint.h(idx);
            let interaction = h(&[a]) + h(&[b]) + h(&[y]) - h(&[a, b]) - h(&[a, y]) - h(&[b, y]) + h(&[a, b, y]);
            let r = joint.mi(&[a], &[b]) - (interaction + joint.cmi(&[a], &[b], &[y]));
            worst = worst.max(r.abs());
        }
    }
    Ok(worst)
}

/// Names used by [`random_joint`]: `z1..z{k-1}` then `y`.
pub fn local_names(cardinalities: &[usize]) -> Vec<String> {
    let k = cardinalities.len();
    (0..k)
        .map(|i| if i + 1 == k { LABEL_VAR.to_string() } else { format!("z{}", i + 1) })
        .collect()
}

/// Dirichlet-distributed joint over `cardinalities`; the last variable is `y`.
pub fn random_joint(seed: u64, cardinalities: &[usize], concentration: f64) -> Result<DiscreteJoint> {
    if !(concentration > 0.0 && concentration.is_finite()) {
        return Err(ProbError::InvalidConcentration(concentration));
    }
    let vars: Vec<(String, usize)> = local_names(cardinalities)
        .into_iter()
        .zip(cardinalities.iter().copied())
        .collect();
    let vars = check_variables(vars, DEFAULT_CELL_CAP)?;
    let cells: usize = vars.iter().map(|v| v.cardinality).product();

    let gamma = Gamma::new(concentration, 1.0).map_err(|_| ProbError::InvalidConcentration(concentration))?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut table: Vec<f64> = loop {
        let draw: Vec<f64> = (0..cells).map(|_| gamma.sample(&mut rng)).collect();
        if draw.iter().sum::<f64>() > 0.0 {
            break draw;
        }
    };
    let sum: f64 = table.iter().sum();
    table.iter_mut().for_each(|p| *p /= sum);
    DiscreteJoint::new(vars.into_iter().map(|v| (v.name, v.cardinality)).collect(), table)
}
