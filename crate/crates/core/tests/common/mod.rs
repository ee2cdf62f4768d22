//! Independent reference implementations used by the integration tests.
//! Nothing here calls the library code it is used to check.
#![allow(dead_code)]

use std::collections::HashMap;

use ibdd_core::autodiff::{Tape, Tensor, Var};
use ibdd_core::DiscreteJoint;

/// Central-difference step.
pub const FD_STEP: f64 = 1e-6;
/// Denominator floor for relative errors, so near-zero gradients compare
/// on an absolute scale of this size.
pub const REL_FLOOR: f64 = 1e-3;

/// Largest relative error between tape gradients and central differences.
/// `build` receives the leaf values and returns the scalar root and the
/// leaf handles (in the order of `leaves`).
pub fn gradcheck<F>(leaves: &[Tensor], build: F) -> f64
where
    F: Fn(&mut Tape, &[Tensor]) -> (Var, Vec<Var>),
{
    gradcheck_against(leaves, &build, &build)
}

/// Tape gradients of `analytic` against central differences of `numeric`.
/// The two differ when the graph holds a stop-gradient: `numeric` then
/// rebuilds the objective with the detached value frozen as a constant.
pub fn gradcheck_against<F, G>(leaves: &[Tensor], analytic_build: F, numeric: G) -> f64
where
    F: Fn(&mut Tape, &[Tensor]) -> (Var, Vec<Var>),
    G: Fn(&mut Tape, &[Tensor]) -> (Var, Vec<Var>),
{
    let mut tape = Tape::new();
    let (root, vars) = analytic_build(&mut tape, leaves);
    tape.backward(root).expect("backward");
    let analytic: Vec<Vec<f64>> = vars
        .iter()
        .zip(leaves)
        .map(|(&v, t)| tape.grad(v).map_or_else(|| vec![0.0; t.len()], <[f64]>::to_vec))
        .collect();

    let eval = |vals: &[Tensor]| {
        let mut t = Tape::new();
        let (r, _) = numeric(&mut t, vals);
        t.value(r).item()
    };
    let mut worst: f64 = 0.0;
    let mut work = leaves.to_vec();
    for li in 0..leaves.len() {
        for k in 0..leaves[li].len() {
            let orig = leaves[li].data()[k];
            work[li].data_mut()[k] = orig + FD_STEP;
            let up = eval(&work);
            work[li].data_mut()[k] = orig - FD_STEP;
            let down = eval(&work);
            work[li].data_mut()[k] = orig;
            let numeric = (up - down) / (2.0 * FD_STEP);
            let a = analytic[li][k];
            let rel = (a - numeric).abs() / a.abs().max(numeric.abs()).max(REL_FLOOR);
            worst = worst.max(rel);
        }
    }
    worst
}

/// AUC as the fraction of (positive, negative) pairs ordered correctly,
/// ties counting one half, evaluated pair by pair in integer units.
pub fn pairwise_auc(scores: &[f64], labels: &[u8]) -> f64 {
    let mut twice_concordant: u64 = 0;
    let mut pairs: u64 = 0;
    for (i, &si) in scores.iter().enumerate() {
        if labels[i] != 1 {
            continue;
        }
        for (j, &sj) in scores.iter().enumerate() {
            if labels[j] != 0 {
                continue;
            }
            pairs += 1;
            if si > sj {
                twice_concordant += 2;
            } else if si == sj {
                twice_concordant += 1;
            }
        }
    }
    twice_concordant as f64 / (2 * pairs) as f64
}

pub fn direct_logloss(scores: &[f64], labels: &[u8]) -> f64 {
    let n = scores.len() as f64;
    scores
        .iter()
        .zip(labels)
        .map(|(&s, &y)| {
            let s = s.clamp(1e-7, 1.0 - 1e-7);
            let y = f64::from(y);
            -(y * s.ln() + (1.0 - y) * (1.0 - s).ln())
        })
        .sum::<f64>()
        / n
}

pub fn softmax(row: &[f64]) -> Vec<f64> {
    let m = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let e: Vec<f64> = row.iter().map(|v| (v - m).exp()).collect();
    let s: f64 = e.iter().sum();
    e.into_iter().map(|v| v / s).collect()
}

pub fn kl(p: &[f64], q: &[f64]) -> f64 {
    p.iter()
        .zip(q)
        .filter(|(&a, _)| a > 0.0)
        .map(|(&a, &b)| a * (a / b).ln())
        .sum()
}

/// Joint as a map from full assignments to probability.
fn cells(joint: &DiscreteJoint) -> Vec<(Vec<usize>, f64)> {
    let cards: Vec<usize> = joint.variables().iter().map(|v| v.cardinality).collect();
    let mut out = Vec::with_capacity(joint.table().len());
    let mut idx = vec![0usize; cards.len()];
    for &p in joint.table() {
        out.push((idx.clone(), p));
        for k in (0..cards.len()).rev() {
            idx[k] += 1;
            if idx[k] < cards[k] {
                break;
            }
            idx[k] = 0;
        }
    }
    out
}

fn project(assign: &[usize], keep: &[usize]) -> Vec<usize> {
    keep.iter().map(|&k| assign[k]).collect()
}

fn marginal_map(cells: &[(Vec<usize>, f64)], keep: &[usize]) -> HashMap<Vec<usize>, f64> {
    let mut m = HashMap::new();
    for (a, p) in cells {
        *m.entry(project(a, keep)).or_insert(0.0) += p;
    }
    m
}

/// `I(A;B|C) = sum p(a,b,c) ln[p(a,b,c) p(c) / (p(a,c) p(b,c))]`, cell by cell.
pub fn cmi_by_cells(joint: &DiscreteJoint, a: &[usize], b: &[usize], c: &[usize]) -> f64 {
    let cells = cells(joint);
    let abc: Vec<usize> = a.iter().chain(b).chain(c).copied().collect();
    let ac: Vec<usize> = a.iter().chain(c).copied().collect();
    let bc: Vec<usize> = b.iter().chain(c).copied().collect();
    let (m_abc, m_ac, m_bc, m_c) = (
        marginal_map(&cells, &abc),
        marginal_map(&cells, &ac),
        marginal_map(&cells, &bc),
        marginal_map(&cells, c),
    );
    let mut total = 0.0;
    for (key, &p) in &m_abc {
        if p <= 0.0 {
            continue;
        }
        let ka = &key[..a.len()];
        let kb = &key[a.len()..a.len() + b.len()];
        let kc = &key[a.len() + b.len()..];
        let pac = m_ac[&[ka, kc].concat()];
        let pbc = m_bc[&[kb, kc].concat()];
        let pc = m_c[kc];
        total += p * (p * pc / (pac * pbc)).ln();
    }
    total
}

/// Index of the label (last variable) and the locals.
fn split(joint: &DiscreteJoint) -> (Vec<usize>, usize) {
    let n = joint.variables().len();
    ((0..n - 1).collect(), n - 1)
}

/// `sum_i I(z_i; y | Z\z_i)` through [`cmi_by_cells`].
pub fn bound_lhs(joint: &DiscreteJoint) -> f64 {
    let (locals, y) = split(joint);
    locals
        .iter()
        .map(|&i| {
            let rest: Vec<usize> = locals.iter().copied().filter(|&k| k != i).collect();
            cmi_by_cells(joint, &[i], &[y], &rest)
        })
        .sum()
}

/// `sum_i E_{p(Z)} KL[p(y|Z) || p(y|Z\z_i)]` through explicit conditionals.
pub fn bound_rhs(joint: &DiscreteJoint) -> f64 {
    let (locals, y) = split(joint);
    let cells = cells(joint);
    let y_card = joint.variables()[y].cardinality;
    let p_z = marginal_map(&cells, &locals);
    let p_zy = marginal_map(&cells, &[locals.clone(), vec![y]].concat());
    let mut total = 0.0;
    for &i in &locals {
        let rest: Vec<usize> = locals.iter().copied().filter(|&k| k != i).collect();
        let p_r = marginal_map(&cells, &rest);
        let p_ry = marginal_map(&cells, &[rest.clone(), vec![y]].concat());
        for (z, &pz) in &p_z {
            if pz <= 0.0 {
                continue;
            }
            let r: Vec<usize> = rest.iter().map(|&k| z[locals.iter().position(|&l| l == k).unwrap()]).collect();
            let pr = p_r[&r];
            let p: Vec<f64> = (0..y_card).map(|v| p_zy[&[z.clone(), vec![v]].concat()] / pz).collect();
            let q: Vec<f64> = (0..y_card).map(|v| p_ry[&[r.clone(), vec![v]].concat()] / pr).collect();
            total += pz * kl(&p, &q);
        }
    }
    total
}

pub fn tensor(shape: &[usize], data: Vec<f64>) -> Tensor {
    Tensor::new(shape.to_vec(), data).expect("shape")
}
