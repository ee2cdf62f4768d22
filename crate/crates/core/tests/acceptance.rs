//! Acceptance checks. Each test prints one `criterion N: PASS|FAIL` line to
//! stderr (bypassing output capture) and then asserts the same condition.

mod common;

use std::io::Write;
use std::rc::Rc;
use std::sync::OnceLock;
use std::time::{Duration, Instant};

use ibdd_core::autodiff::{Tape, Tensor, Var};
use ibdd_core::losses::{global_information_loss, local_information_loss, total_loss, BoundWeights, DEFAULT_KL_CLAMP};
use ibdd_core::model::{full_forward, init_model};
use ibdd_core::prob::{chain_rule_residual, decomposition_residual, kl_divergence, random_joint, verify_theorem};
use ibdd_core::train::ablation::{setting_config, Setting};
use ibdd_core::train::artifacts::{run_experiment, run_with_data, RunResult, RunStatus};
use ibdd_core::train::trainer::prepare_data;
use ibdd_core::verify::{run_suite, SuiteSettings, DEFAULT_CONCENTRATIONS};
use ibdd_core::{auc, logloss, Categorical, DiscreteJoint, LossWeights, MaskMode, ModelConfig, RunConfig};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use common::*;

fn report(n: u32, pass: bool, detail: String) {
    let line = format!("criterion {n}: {} {detail}\n", if pass { "PASS" } else { "FAIL" });
    let _ = std::io::stderr().write_all(line.as_bytes());
    assert!(pass, "criterion {n} failed: {detail}");
}

const N_JOINTS: usize = 1000;
const SUITE_SEED: u64 = 7;

/// 1000 joints with 2 or 3 locals of cardinality 2..=4, binary label, and
/// the three concentrations in rotation.
fn joints() -> &'static [DiscreteJoint] {
    static JOINTS: OnceLock<Vec<DiscreteJoint>> = OnceLock::new();
    JOINTS.get_or_init(|| {
        let mut rng = ChaCha8Rng::seed_from_u64(SUITE_SEED);
        (0..N_JOINTS)
            .map(|i| {
                let n = rng.random_range(2..=3);
                let mut cards: Vec<usize> = (0..n).map(|_| rng.random_range(2..=4)).collect();
                cards.push(2);
                let conc = DEFAULT_CONCENTRATIONS[i % DEFAULT_CONCENTRATIONS.len()];
                random_joint(rng.random(), &cards, conc).unwrap()
            })
            .collect()
    })
}

#[test]
fn criterion_1_bound_holds_and_is_tight() {
    let start = Instant::now();
    let suite = run_suite(&SuiteSettings::new(N_JOINTS, SUITE_SEED)).unwrap();
    let suite_time = start.elapsed();

    let mut holds = 0;
    let mut max_gap: f64 = 0.0;
    let mut max_oracle_diff: f64 = 0.0;
    let start = Instant::now();
    for joint in joints() {
        let r = verify_theorem(joint).unwrap();
        holds += usize::from(r.lhs_nats - r.rhs_nats >= -1e-9);
        max_gap = max_gap.max((r.lhs_nats - r.rhs_nats).abs());
        max_oracle_diff = max_oracle_diff
            .max((r.lhs_nats - bound_lhs(joint)).abs())
            .max((r.rhs_nats - bound_rhs(joint)).abs());
    }
    let own_time = start.elapsed();
    let limit = Duration::from_secs(60);
    let pass = suite.all_passed()
        && suite.bound_holds == N_JOINTS
        && suite.max_gap <= 1e-9
        && holds == N_JOINTS
        && max_gap <= 1e-9
        && max_oracle_diff <= 1e-9
        && suite_time <= limit
        && own_time <= limit;
    report(
        1,
        pass,
        format!(
            "holds {holds}/{N_JOINTS} (suite {}/{N_JOINTS}), max |lhs-rhs| {max_gap:.2e} (suite {:.2e}), \
             max diff vs oracle {max_oracle_diff:.2e}, suite {:.2}s",
            suite.bound_holds,
            suite.max_gap,
            suite_time.as_secs_f64()
        ),
    );
}

#[test]
fn criterion_2_identities() {
    let mut max_decomp: f64 = 0.0;
    let mut max_chain: f64 = 0.0;
    for joint in joints() {
        max_decomp = max_decomp.max(decomposition_residual(joint).unwrap());
        max_chain = max_chain.max(chain_rule_residual(joint).unwrap());
    }
    let xor = DiscreteJoint::new(
        vec![("a".into(), 2), ("b".into(), 2), ("c".into(), 2)],
        vec![0.25, 0.0, 0.0, 0.25, 0.0, 0.25, 0.25, 0.0],
    )
    .unwrap();
    let ii = xor.interaction_information(&["a"], &["b"], &["c"]).unwrap();
    let xor_err = (ii + std::f64::consts::LN_2).abs();
    let pass = max_decomp <= 1e-12 && max_chain <= 1e-9 && xor_err <= 1e-9;
    report(
        2,
        pass,
        format!("max decomposition residual {max_decomp:.2e}, max chain-rule residual {max_chain:.2e}, XOR II {ii:.12}"),
    );
}

fn uniform(rng: &mut ChaCha8Rng, shape: &[usize], lo: f64, hi: f64) -> Tensor {
    let n = shape.iter().product();
    tensor(shape, (0..n).map(|_| rng.random_range(lo..hi)).collect())
}

/// Values at least 0.05 away from zero, so no kink sits inside a difference step.
fn off_zero(rng: &mut ChaCha8Rng, shape: &[usize]) -> Tensor {
    let n = shape.iter().product();
    tensor(
        shape,
        (0..n)
            .map(|_| {
                let m = rng.random_range(0.05..1.5);
                if rng.random_bool(0.5) {
                    m
                } else {
                    -m
                }
            })
            .collect(),
    )
}

/// `sum(out * w)` for a fixed random `w`, giving every output a distinct weight.
fn project(tape: &mut Tape, out: Var, w: &Tensor) -> Var {
    let wv = tape.constant(w.clone());
    let p = tape.mul(out, wv).unwrap();
    tape.sum(p).unwrap()
}

fn params(tape: &mut Tape, leaves: &[Tensor]) -> Vec<Var> {
    leaves.iter().map(|t| tape.param(t.clone())).collect()
}

type Build = Box<dyn Fn(&mut Tape, &[Tensor]) -> (Var, Vec<Var>)>;

/// Full CE + LIL + GIL objective on a small model. With a detached target
/// the second builder freezes the target logits at the starting leaves, so
/// its finite differences measure the stop-gradient the tape should produce.
fn composite(rng: &mut ChaCha8Rng, mask_mode: MaskMode, detach: bool, auto: bool) -> (Vec<Tensor>, Build, Build) {
    let cfg = ModelConfig {
        input_dim: 5,
        n_blocks: rng.random_range(2..=3),
        block_hidden_dims: vec![4],
        local_dim: 2,
        fusion_hidden_dims: vec![4],
        global_dim: 3,
        n_classes: 2,
        mask_mode,
        detach_full_target: detach,
    };
    let model = init_model(&cfg, rng.random()).unwrap();
    let batch = 4;
    let x = uniform(rng, &[batch, cfg.input_dim], -1.5, 1.5);
    let labels: Vec<usize> = (0..batch).map(|_| rng.random_range(0..2)).collect();
    // Init leaves biases at exactly zero, which can put a relu input right
    // on its kink when a whole hidden row is dead. Random biases avoid that.
    let mut leaves: Vec<Tensor> = model
        .tensors()
        .into_iter()
        .map(|(name, t)| {
            if name.ends_with(".bias") {
                off_zero(rng, t.shape())
            } else {
                t.clone()
            }
        })
        .collect();
    let n_model = leaves.len();
    if auto {
        leaves.push(Tensor::scalar(rng.random_range(-1.0..1.5)));
        leaves.push(Tensor::scalar(rng.random_range(-1.0..1.5)));
    }
    let (alpha, beta) = (rng.random_range(0.1..2.0), rng.random_range(0.1..2.0));
    let objective = move |tape: &mut Tape, leaves: &[Tensor], frozen: Option<&Tensor>| {
        let mut p = model.clone();
        for (dst, src) in p.tensors_mut().into_iter().zip(leaves) {
            *dst = src.clone();
        }
        let bound = p.bind(tape, true);
        let mut vars = bound.vars();
        let weights = if auto {
            LossWeights::Auto {
                raw_lil: leaves[n_model].item(),
                raw_gil: leaves[n_model + 1].item(),
            }
        } else {
            LossWeights::fixed(alpha, beta).unwrap()
        };
        let bw = weights.bind(tape);
        if let BoundWeights::Auto { raw_lil, raw_gil } = bw {
            vars.push(raw_lil);
            vars.push(raw_gil);
        }
        let xv = tape.constant(x.clone());
        let out = full_forward(&p, &bound, tape, xv).unwrap();
        let ce_g = tape.cross_entropy_from_logits(out.global_logits, &labels).unwrap();
        let ce_j = tape.cross_entropy_from_logits(out.joint_logits, &labels).unwrap();
        let ce = tape.add(ce_g, ce_j).unwrap();
        let target = match frozen {
            Some(t) => tape.constant(t.clone()),
            None => out.kl_target,
        };
        let lil = local_information_loss(tape, target, &out.masked_logits, DEFAULT_KL_CLAMP).unwrap();
        let gil = global_information_loss(tape, target, out.global_logits).unwrap();
        let total = total_loss(tape, ce, Some(lil.loss), Some(gil), &bw).unwrap();
        (total.total, vars, out.joint_logits)
    };
    let objective = Rc::new(objective);
    let frozen = detach.then(|| {
        let mut t = Tape::new();
        let (_, _, logits) = objective(&mut t, &leaves, None);
        t.value(logits).clone()
    });
    let analytic = {
        let f = Rc::clone(&objective);
        move |t: &mut Tape, l: &[Tensor]| {
            let (root, vars, _) = f(t, l, None);
            (root, vars)
        }
    };
    let numeric = move |t: &mut Tape, l: &[Tensor]| {
        let (root, vars, _) = objective(t, l, frozen.as_ref());
        (root, vars)
    };
    (leaves, Box::new(analytic), Box::new(numeric))
}

const GRAPH_KINDS: usize = 12;

/// One randomized graph of kind `kind % GRAPH_KINDS`.
fn random_graph(kind: usize, rng: &mut ChaCha8Rng) -> (Vec<Tensor>, Build, Option<Build>) {
    let r = rng.random_range(1..=4);
    let c = rng.random_range(2..=5);
    let w = uniform(rng, &[r, c], -1.0, 1.0);
    let (leaves, build): (Vec<Tensor>, Build) = match kind % GRAPH_KINDS {
        0 => {
            // add, sub, mul, neg, scale, add_scalar, exp, softplus
            let leaves = vec![uniform(rng, &[r, c], -1.0, 1.0), uniform(rng, &[r, c], -1.0, 1.0)];
            let k = rng.random_range(-2.0..2.0);
            (leaves, Box::new(move |t: &mut Tape, l: &[Tensor]| {
                let v = params(t, l);
                let s = t.add(v[0], v[1]).unwrap();
                let d = t.sub(v[0], v[1]).unwrap();
                let m = t.mul(s, d).unwrap();
                let n = t.neg(m).unwrap();
                let sc = t.scale(n, k).unwrap();
                let sh = t.add_scalar(sc, 0.3).unwrap();
                let e = t.exp(sh).unwrap();
                let sp = t.softplus(v[1]).unwrap();
                let out = t.mul(e, sp).unwrap();
                (project(t, out, &w), v)
            }))
        }
        1 => {
            // ln and recip on positive inputs
            let leaves = vec![uniform(rng, &[r, c], 0.5, 2.0), uniform(rng, &[r, c], 0.5, 2.0)];
            (leaves, Box::new(move |t: &mut Tape, l: &[Tensor]| {
                let v = params(t, l);
                let a = t.ln(v[0]).unwrap();
                let b = t.recip(v[1]).unwrap();
                let out = t.mul(a, b).unwrap();
                (project(t, out, &w), v)
            }))
        }
        2 => {
            // relu and clamp_max away from their kinks
            let leaves = vec![off_zero(rng, &[r, c])];
            (leaves, Box::new(move |t: &mut Tape, l: &[Tensor]| {
                let v = params(t, l);
                let a = t.relu(v[0]).unwrap();
                let b = t.add_scalar(v[0], 0.0).unwrap();
                let cl = t.clamp_max(b, 0.0).unwrap();
                let out = t.add(a, cl).unwrap();
                let sq = t.mul(out, out).unwrap();
                (project(t, sq, &w), v)
            }))
        }
        3 => {
            // matmul, add_row, softplus, mean
            let inner = rng.random_range(1..=4);
            let leaves = vec![
                uniform(rng, &[r, inner], -1.0, 1.0),
                uniform(rng, &[inner, c], -1.0, 1.0),
                off_zero(rng, &[c]),
            ];
            (leaves, Box::new(move |t: &mut Tape, l: &[Tensor]| {
                let v = params(t, l);
                let h = t.matmul(v[0], v[1]).unwrap();
                let hb = t.add_row(h, v[2]).unwrap();
                let sp = t.softplus(hb).unwrap();
                let proj = project(t, sp, &w);
                let m = t.mean(hb).unwrap();
                let out = t.add(proj, m).unwrap();
                (out, v)
            }))
        }
        4 => {
            // concat_last_dim, slice_last_dim, zero_mask_slice
            let c2 = rng.random_range(1..=3);
            let leaves = vec![uniform(rng, &[r, c], -1.0, 1.0), uniform(rng, &[r, c2], -1.0, 1.0)];
            let total = c + c2;
            let w2 = uniform(rng, &[r, total], -1.0, 1.0);
            let start = rng.random_range(0..total - 1);
            let end = rng.random_range(start + 1..=total);
            let w3 = uniform(rng, &[r, end - start], -1.0, 1.0);
            (leaves, Box::new(move |t: &mut Tape, l: &[Tensor]| {
                let v = params(t, l);
                let cat = t.concat_last_dim(&[v[0], v[1]]).unwrap();
                let sq = t.mul(cat, cat).unwrap();
                let masked = t.zero_mask_slice(sq, start, end).unwrap();
                let sl = t.slice_last_dim(cat, start, end).unwrap();
                let e = t.exp(sl).unwrap();
                let a = project(t, masked, &w2);
                let b = project(t, e, &w3);
                (t.add(a, b).unwrap(), v)
            }))
        }
        5 => {
            let leaves = vec![uniform(rng, &[r, c], -3.0, 3.0)];
            (leaves, Box::new(move |t: &mut Tape, l: &[Tensor]| {
                let v = params(t, l);
                let out = t.log_softmax(v[0]).unwrap();
                (project(t, out, &w), v)
            }))
        }
        6 => {
            let leaves = vec![uniform(rng, &[r, c], -3.0, 3.0)];
            let labels: Vec<usize> = (0..r).map(|_| rng.random_range(0..c)).collect();
            (leaves, Box::new(move |t: &mut Tape, l: &[Tensor]| {
                let v = params(t, l);
                (t.cross_entropy_from_logits(v[0], &labels).unwrap(), v)
            }))
        }
        7 => {
            let leaves = vec![uniform(rng, &[r, c], -3.0, 3.0), uniform(rng, &[r, c], -3.0, 3.0)];
            (leaves, Box::new(move |t: &mut Tape, l: &[Tensor]| {
                let v = params(t, l);
                (t.kl_from_logits(v[0], v[1]).unwrap(), v)
            }))
        }
        _ => {
            let (mask, detach, auto) = match kind % GRAPH_KINDS {
                8 => (MaskMode::SharedHeadZeroMask, false, true),
                9 => (MaskMode::SharedHeadZeroMask, true, false),
                10 => (MaskMode::PerMaskHeads, false, false),
                _ => (MaskMode::PerMaskHeads, true, true),
            };
            let (leaves, analytic, numeric) = composite(rng, mask, detach, auto);
            return (leaves, analytic, Some(numeric));
        }
    };
    (leaves, build, None)
}

#[test]
fn criterion_3_gradients_match_finite_differences() {
    let mut worst: f64 = 0.0;
    let mut worst_kind = 0;
    for g in 0..100 {
        let mut rng = ChaCha8Rng::seed_from_u64(1000 + g as u64);
        let (leaves, build, numeric) = random_graph(g, &mut rng);
        let err = match numeric {
            Some(n) => gradcheck_against(&leaves, build, n),
            None => gradcheck(&leaves, build),
        };
        if err > worst {
            worst = err;
            worst_kind = g % GRAPH_KINDS;
        }
    }
    report(
        3,
        worst <= 1e-4,
        format!("100 graphs over {GRAPH_KINDS} kinds, max relative error {worst:.2e} (graph kind {worst_kind})"),
    );
}

fn lil_value(joint: &Tensor, masked: &[Tensor]) -> f64 {
    let mut t = Tape::new();
    let j = t.constant(joint.clone());
    let m: Vec<Var> = masked.iter().map(|x| t.constant(x.clone())).collect();
    let l = local_information_loss(&mut t, j, &m, DEFAULT_KL_CLAMP).unwrap();
    t.value(l.loss).item()
}

fn gil_value(p: &Tensor, q: &Tensor) -> f64 {
    let mut t = Tape::new();
    let (a, b) = (t.constant(p.clone()), t.constant(q.clone()));
    let g = global_information_loss(&mut t, a, b).unwrap();
    t.value(g).item()
}

#[test]
fn criterion_4_loss_contracts() {
    let mut rng = ChaCha8Rng::seed_from_u64(44);
    let mut lil_min = f64::INFINITY;
    let mut lil_max = f64::NEG_INFINITY;
    let mut self_lil_err: f64 = 0.0;
    let mut gil_row_err: f64 = 0.0;
    let mut gil_mean_err: f64 = 0.0;
    for _ in 0..1000 {
        let b = rng.random_range(1..=8);
        let c = rng.random_range(2..=4);
        let n = rng.random_range(2..=5);
        let scale = rng.random_range(0.1..12.0);
        let joint = uniform(&mut rng, &[b, c], -scale, scale);
        let masked: Vec<Tensor> = (0..n).map(|_| uniform(&mut rng, &[b, c], -scale, scale)).collect();
        let v = lil_value(&joint, &masked);
        lil_min = lil_min.min(v);
        lil_max = lil_max.max(v);
        let same: Vec<Tensor> = (0..n).map(|_| joint.clone()).collect();
        self_lil_err = self_lil_err.max((lil_value(&joint, &same) - 1.0).abs());

        let global = &masked[0];
        let mut oracle_sum = 0.0;
        for row in 0..b {
            let p = joint.slice_rows(row, row + 1);
            let q = global.slice_rows(row, row + 1);
            let oracle = kl_divergence(
                &Categorical::new(softmax(p.data())).unwrap(),
                &Categorical::new(softmax(q.data())).unwrap(),
            )
            .unwrap();
            gil_row_err = gil_row_err.max((gil_value(&p, &q) - oracle).abs());
            gil_row_err = gil_row_err.max((kl(&softmax(p.data()), &softmax(q.data())) - oracle).abs());
            oracle_sum += oracle;
        }
        gil_mean_err = gil_mean_err.max((gil_value(&joint, global) - oracle_sum / b as f64).abs());
    }
    let pass = lil_min > 0.0 && lil_max <= 1.0 && self_lil_err == 0.0 && gil_row_err <= 1e-9 && gil_mean_err <= 1e-9;
    report(
        4,
        pass,
        format!(
            "LIL range [{lil_min:.3e}, {lil_max}], |LIL(self)-1| {self_lil_err:.1e}, \
             GIL max row error {gil_row_err:.2e}, batch-mean error {gil_mean_err:.2e}"
        ),
    );
}

#[test]
fn criterion_5_metric_oracles() {
    let mut rng = ChaCha8Rng::seed_from_u64(55);
    let mut auc_mismatches = 0;
    let mut ll_err: f64 = 0.0;
    for _ in 0..200 {
        let n = rng.random_range(2..=60);
        let levels = rng.random_range(2..=8);
        let mut labels: Vec<u8> = (0..n).map(|_| u8::from(rng.random_bool(0.5))).collect();
        labels[0] = 0;
        labels[1] = 1;
        let scores: Vec<f64> = (0..n).map(|_| rng.random_range(0..levels) as f64 / levels as f64).collect();
        if auc(&scores, &labels).unwrap() != pairwise_auc(&scores, &labels) {
            auc_mismatches += 1;
        }
        let probs: Vec<f64> = (0..n).map(|_| rng.random_range(0.0..=1.0)).collect();
        ll_err = ll_err.max((logloss(&probs, &labels).unwrap() - direct_logloss(&probs, &labels)).abs());
    }
    let hand = auc(&[0.1, 0.4, 0.35, 0.8], &[0, 0, 1, 1]).unwrap();
    let uniform_ll = logloss(&[0.5; 6], &[0, 1, 1, 0, 1, 0]).unwrap();
    let uniform_err = (uniform_ll - std::f64::consts::LN_2).abs();
    let pass = auc_mismatches == 0 && hand == 0.75 && ll_err <= 1e-12 && uniform_err <= 1e-12;
    report(
        5,
        pass,
        format!(
            "AUC mismatches {auc_mismatches}/200, hand case {hand}, logloss max error {ll_err:.2e}, \
             uniform logloss - ln2 = {uniform_err:.1e}"
        ),
    );
}

const SEEDS: [u64; 5] = [0, 1, 2, 3, 4];
/// Floor on validation accuracy, set from baseline runs of the default task
/// (0.79 to 0.82 across seeds) with some margin.
const VAL_ACC_FLOOR: f64 = 0.75;
const RUN_TIME_LIMIT_SECS: f64 = 300.0;

struct SeedRuns {
    seed: u64,
    plain: RunResult,
    gil_only: RunResult,
    both: RunResult,
}

/// The (-lil,-gil), (-lil,+gil) and (+lil,+gil) runs for every seed,
/// trained once and shared by the criteria that need them.
fn ablation_runs() -> &'static [SeedRuns] {
    static RUNS: OnceLock<Vec<SeedRuns>> = OnceLock::new();
    RUNS.get_or_init(|| {
        let base = RunConfig::default();
        let data = prepare_data(&base.data).unwrap();
        let setting = |lil, gil| Setting {
            name: String::new(),
            n_blocks: base.model.n_blocks,
            enable_lil: lil,
            enable_gil: gil,
        };
        let run = |lil, gil, seed| run_with_data(&setting_config(&base, &setting(lil, gil), seed), &data, None).unwrap();
        SEEDS
            .iter()
            .map(|&seed| SeedRuns {
                seed,
                plain: run(false, false, seed),
                gil_only: run(false, true, seed),
                both: run(true, true, seed),
            })
            .collect()
    })
}

fn all_runs(s: &SeedRuns) -> [&RunResult; 3] {
    [&s.plain, &s.gil_only, &s.both]
}

#[test]
fn criterion_6_training_and_ablation_direction() {
    let runs = ablation_runs();
    let mut wins = 0;
    let mut smoke_ok = true;
    let mut lines = Vec::new();
    for s in runs {
        for r in all_runs(s) {
            let complete = r.manifest.status == RunStatus::Complete;
            let val_acc = r.metrics().map_or(0.0, |m| m.validation.accuracy);
            smoke_ok &= complete && val_acc >= VAL_ACC_FLOOR && r.manifest.wall_seconds <= RUN_TIME_LIMIT_SECS;
        }
        let plain = s.plain.metrics().map_or(f64::NAN, |m| m.shifted.auc);
        let both = s.both.metrics().map_or(f64::NAN, |m| m.shifted.auc);
        wins += usize::from(both >= plain);
        lines.push(format!("seed {}: {both:.4} vs {plain:.4}", s.seed));
    }
    let min_acc = runs
        .iter()
        .flat_map(all_runs)
        .filter_map(|r| r.metrics().map(|m| m.validation.accuracy))
        .fold(f64::INFINITY, f64::min);
    let max_wall = runs.iter().flat_map(all_runs).map(|r| r.manifest.wall_seconds).fold(0.0, f64::max);
    report(
        6,
        smoke_ok && wins >= 4,
        format!(
            "shifted AUC (+lil+gil) >= (-lil-gil) in {wins}/5 seeds [{}]; min val acc {min_acc:.4} (floor {VAL_ACC_FLOOR}), \
             max run {max_wall:.1}s",
            lines.join(", ")
        ),
    );
}

#[test]
fn criterion_7_disentanglement_direction() {
    let runs = ablation_runs();
    let mut good = 0;
    let mut lines = Vec::new();
    for s in runs {
        let (Some(with), Some(without)) = (s.both.metrics(), s.gil_only.metrics()) else {
            lines.push(format!("seed {}: run incomplete", s.seed));
            continue;
        };
        let (w, wo) = (&with.validation, &without.validation);
        let lower = w.mean_off_diagonal_mi < wo.mean_off_diagonal_mi;
        let ratio = w.mean_label_mi / wo.mean_label_mi;
        good += usize::from(lower && ratio >= 0.8);
        lines.push(format!(
            "seed {}: off-diag {:.4} vs {:.4}, label MI ratio {ratio:.3}",
            s.seed, w.mean_off_diagonal_mi, wo.mean_off_diagonal_mi
        ));
    }
    report(
        7,
        good >= 4,
        format!("{good}/5 seeds lower off-diagonal MI with label MI kept >= 80% [{}]", lines.join(", ")),
    );
}

#[test]
fn criterion_8_reproducible_runs() {
    let cfg = RunConfig::default();
    let dirs = [tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap()];
    for d in &dirs {
        run_experiment(&cfg, Some(d.path())).unwrap();
    }
    let files = ["history.csv", "checkpoint/checkpoint.json", "checkpoint/checkpoint.bin"];
    let mut differing = Vec::new();
    for f in files {
        let a = std::fs::read(dirs[0].path().join(f)).unwrap();
        let b = std::fs::read(dirs[1].path().join(f)).unwrap();
        if a != b {
            differing.push(f);
        }
    }
    report(
        8,
        differing.is_empty(),
        format!("{} of {} artifacts byte-identical {:?}", files.len() - differing.len(), files.len(), differing),
    );
}

