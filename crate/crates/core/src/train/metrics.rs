//! Binary classification metrics.

use std::collections::BTreeMap;

use thiserror::Error;

/// Scores are clipped to `[LOGLOSS_CLIP, 1 - LOGLOSS_CLIP]` before the log.
pub const LOGLOSS_CLIP: f64 = 1e-7;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MetricsError {
    #[error("no samples")]
    Empty,
    #[error("{scores} scores but {labels} labels")]
    LengthMismatch { scores: usize, labels: usize },
    #[error("only one class present; AUC is undefined")]
    SingleClass,
    #[error("score at index {0} is not finite")]
    NonFiniteScore(usize),
    #[error("label at index {index} is {label}, expected 0 or 1")]
    BadLabel { index: usize, label: u8 },
    #[error("group {0} mixes labels")]
    MixedGroup(u64),
}

fn check(scores: &[f64], labels: &[u8]) -> Result<(), MetricsError> {
    if scores.len() != labels.len() {
        return Err(MetricsError::LengthMismatch {
            scores: scores.len(),
            labels: labels.len(),
        });
    }
    if scores.is_empty() {
        return Err(MetricsError::Empty);
    }
    if let Some(i) = scores.iter().position(|s| !s.is_finite()) {
        return Err(MetricsError::NonFiniteScore(i));
    }
    if let Some(i) = labels.iter().position(|&l| l > 1) {
        return Err(MetricsError::BadLabel { index: i, label: labels[i] });
    }
    Ok(())
}

/// Fraction of rows where `(score >= threshold) == label`.
pub fn accuracy(scores: &[f64], labels: &[u8], threshold: f64) -> Result<f64, MetricsError> {
    check(scores, labels)?;
    let hits = scores
        .iter()
        .zip(labels)
        .filter(|(&s, &l)| u8::from(s >= threshold) == l)
        .count();
    Ok(hits as f64 / scores.len() as f64)
}

/// Probability that a random positive outranks a random negative, ties
/// counting one half. Computed from tie-grouped ranks as twice the
/// Mann-Whitney statistic in integer arithmetic.
pub fn auc(scores: &[f64], labels: &[u8]) -> Result<f64, MetricsError> {
    check(scores, labels)?;
    let pos = labels.iter().filter(|&&l| l == 1).count() as u64;
    let neg = labels.len() as u64 - pos;
    if pos == 0 || neg == 0 {
        return Err(MetricsError::SingleClass);
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));

    let mut twice_u: u64 = 0;
    let mut neg_below: u64 = 0;
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j < order.len() && scores[order[j]] == scores[order[i]] {
            j += 1;
        }
        let group = &order[i..j];
        let p = group.iter().filter(|&&r| labels[r] == 1).count() as u64;
        let n = group.len() as u64 - p;
        twice_u += p * (2 * neg_below + n);
        neg_below += n;
        i = j;
    }
    Ok(twice_u as f64 / (2 * pos * neg) as f64)
}

/// Mean binary cross-entropy of clipped scores, in nats.
pub fn logloss(scores: &[f64], labels: &[u8]) -> Result<f64, MetricsError> {
    check(scores, labels)?;
    let total: f64 = scores
        .iter()
        .zip(labels)
        .map(|(&s, &y)| {
            let s = s.clamp(LOGLOSS_CLIP, 1.0 - LOGLOSS_CLIP);
            if y == 1 {
                -s.ln()
            } else {
                -(1.0 - s).ln()
            }
        })
        .sum();
    Ok(total / scores.len() as f64)
}

/// AUC over per-group mean scores.
pub fn group_level_auc(scores: &[f64], labels: &[u8], group_ids: &[u64]) -> Result<f64, MetricsError> {
    check(scores, labels)?;
    if group_ids.len() != scores.len() {
        return Err(MetricsError::LengthMismatch {
            scores: scores.len(),
            labels: group_ids.len(),
        });
    }
    let mut groups: BTreeMap<u64, (f64, usize, u8)> = BTreeMap::new();
    for ((&s, &y), &g) in scores.iter().zip(labels).zip(group_ids) {
        let e = groups.entry(g).or_insert((0.0, 0, y));
        if e.2 != y {
            return Err(MetricsError::MixedGroup(g));
        }
        e.0 += s;
        e.1 += 1;
    }
    let means: Vec<f64> = groups.values().map(|(s, n, _)| s / *n as f64).collect();
    let glabels: Vec<u8> = groups.values().map(|g| g.2).collect();
    auc(&means, &glabels)
}
