//! Pairwise mutual information between discretized local features.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::autodiff::Tensor;
use crate::discretize::{empirical_joint, principal_codes};
use crate::model::{local_features, ModelError, ModelParams};
use crate::prob::ProbError;

/// Fewer rows make the binned estimates too noisy to compare.
pub const MIN_ROWS: usize = 1000;
/// Code bits per block; codes take at most `2^CODE_BITS` states.
pub const CODE_BITS: usize = 2;

#[derive(Debug, Error)]
pub enum DisentangleError {
    #[error("need at least {MIN_ROWS} rows, got {0}")]
    TooFewRows(usize),
    #[error("{features} feature rows but {labels} labels")]
    LengthMismatch { features: usize, labels: usize },
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Prob(#[from] ProbError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DisentanglementReport {
    /// `mi_matrix[i][j]` = MI of codes `i` and `j` in nats; diagonal holds
    /// each code's entropy.
    pub mi_matrix: Vec<Vec<f64>>,
    /// MI between each block's code and the label.
    pub label_mi: Vec<f64>,
    /// Blocks whose features are constant; their rows are all zero.
    pub degenerate: Vec<bool>,
}

impl DisentanglementReport {
    pub fn mean_off_diagonal(&self) -> f64 {
        let n = self.mi_matrix.len();
        if n < 2 {
            return 0.0;
        }
        let mut s = 0.0;
        for i in 0..n {
            for j in 0..n {
                if i != j {
                    s += self.mi_matrix[i][j];
                }
            }
        }
        s / (n * (n - 1)) as f64
    }

    pub fn mean_label_mi(&self) -> f64 {
        self.label_mi.iter().sum::<f64>() / self.label_mi.len().max(1) as f64
    }
}

/// Report for the local features `params` produces on `x`.
pub fn disentanglement_report(
    params: &ModelParams,
    x: &Tensor,
    labels: &[u8],
) -> Result<DisentanglementReport, DisentangleError> {
    let feats = local_features(params, x)?;
    report_from_features(&feats, labels)
}

/// Same as [`disentanglement_report`] for precomputed `[rows, width]` features.
pub fn report_from_features(features: &[Tensor], labels: &[u8]) -> Result<DisentanglementReport, DisentangleError> {
    let rows = labels.len();
    if rows < MIN_ROWS {
        return Err(DisentangleError::TooFewRows(rows));
    }
    let mut codes = Vec::with_capacity(features.len());
    let mut degenerate = Vec::with_capacity(features.len());
    for f in features {
        if f.rows() != rows {
            return Err(DisentangleError::LengthMismatch {
                features: f.rows(),
                labels: rows,
            });
        }
        let (c, used) = principal_codes(f.data(), f.last_dim(), CODE_BITS);
        codes.push(c);
        degenerate.push(used == 0);
    }
    let card = 1 << CODE_BITS;
    let y: Vec<usize> = labels.iter().map(|&l| l as usize).collect();
    let n = features.len();
    let mut mi_matrix = vec![vec![0.0; n]; n];
    let mut label_mi = vec![0.0; n];
    for i in 0..n {
        if degenerate[i] {
            continue;
        }
        let joint = empirical_joint(&[("a", &codes[i], card), ("y", &y, 2)])?;
        mi_matrix[i][i] = joint.entropy(&["a"])?;
        label_mi[i] = joint.mutual_information(&["a"], &["y"])?;
        for j in i + 1..n {
            if degenerate[j] {
                continue;
            }
            let joint = empirical_joint(&[("a", &codes[i], card), ("b", &codes[j], card)])?;
            let mi = joint.mutual_information(&["a"], &["b"])?;
            mi_matrix[i][j] = mi;
            mi_matrix[j][i] = mi;
        }
    }
    Ok(DisentanglementReport {
        mi_matrix,
        label_mi,
        degenerate,
    })
}
