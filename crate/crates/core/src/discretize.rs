//! Median binning of continuous features and empirical joint tables.

use crate::prob::{DiscreteJoint, ProbError};

/// Median of `values` (mean of the two middle elements for even lengths).
pub fn median(values: &[f64]) -> f64 {
    if values.is_empty() {
        return 0.0;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// Column `col` of a row-major `[rows, width]` matrix.
pub fn column(data: &[f64], width: usize, col: usize) -> Vec<f64> {
    data.iter().skip(col).step_by(width).copied().collect()
}

/// One bit per row per column of `cols`: value above the column median.
fn median_bits(data: &[f64], width: usize, cols: std::ops::Range<usize>) -> (Vec<Vec<bool>>, Vec<Vec<f64>>) {
    let mut bits = Vec::new();
    let mut centered = Vec::new();
    for c in cols {
        let col = column(data, width, c);
        let m = median(&col);
        bits.push(col.iter().map(|&v| v > m).collect());
        centered.push(col.iter().map(|&v| v - m).collect());
    }
    (bits, centered)
}

/// Binary code per row for a segment of columns: per-dimension median bits,
/// aggregated by majority vote. Ties go to the sign of the summed centered
/// values.
pub fn segment_sign_codes(data: &[f64], width: usize, cols: std::ops::Range<usize>) -> Vec<usize> {
    let rows = data.len().checked_div(width).unwrap_or(0);
    let d = cols.len();
    let (bits, centered) = median_bits(data, width, cols);
    (0..rows)
        .map(|r| {
            let ones = bits.iter().filter(|b| b[r]).count();
            match (2 * ones).cmp(&d) {
                std::cmp::Ordering::Greater => 1,
                std::cmp::Ordering::Less => 0,
                std::cmp::Ordering::Equal => usize::from(centered.iter().map(|c| c[r]).sum::<f64>() > 0.0),
            }
        })
        .collect()
}

/// Leading principal directions of a `[rows, width]` matrix by power
/// iteration with deflation. Directions with negligible variance are dropped.
fn principal_directions(data: &[f64], width: usize, k: usize) -> Vec<Vec<f64>> {
    let rows = data.len() / width;
    let mean: Vec<f64> = (0..width)
        .map(|c| column(data, width, c).iter().sum::<f64>() / rows as f64)
        .collect();
    let mut cov = vec![0.0; width * width];
    for r in 0..rows {
        let x = &data[r * width..(r + 1) * width];
        for i in 0..width {
            let di = x[i] - mean[i];
            for j in 0..width {
                cov[i * width + j] += di * (x[j] - mean[j]);
            }
        }
    }
    cov.iter_mut().for_each(|v| *v /= rows as f64);
    let trace: f64 = (0..width).map(|i| cov[i * width + i]).sum();

    let mut dirs = Vec::new();
    for comp in 0..k.min(width) {
        // deterministic start vector
        let mut v: Vec<f64> = (0..width).map(|i| 1.0 + 0.1 * ((i + comp) % 7) as f64).collect();
        let mut lambda = 0.0;
        for _ in 0..200 {
            let mut w = vec![0.0; width];
            for i in 0..width {
                w[i] = (0..width).map(|j| cov[i * width + j] * v[j]).sum();
            }
            let norm = w.iter().map(|x| x * x).sum::<f64>().sqrt();
            if norm <= 0.0 {
                lambda = 0.0;
                break;
            }
            w.iter_mut().for_each(|x| *x /= norm);
            lambda = norm;
            v = w;
        }
        if lambda <= 1e-12 * trace.max(1e-300) || lambda <= 0.0 {
            break;
        }
        for i in 0..width {
            for j in 0..width {
                cov[i * width + j] -= lambda * v[i] * v[j];
            }
        }
        dirs.push(v);
    }
    dirs
}

/// Small code per row (at most `2^bits` states): the median split of the
/// projection onto each of the leading `bits` principal directions.
/// Returns the codes and the number of informative bits found.
pub fn principal_codes(data: &[f64], width: usize, bits: usize) -> (Vec<usize>, usize) {
    let rows = data.len().checked_div(width).unwrap_or(0);
    let dirs = principal_directions(data, width, bits);
    let mut codes = vec![0usize; rows];
    let mut used = 0;
    for dir in &dirs {
        let proj: Vec<f64> = (0..rows)
            .map(|r| data[r * width..(r + 1) * width].iter().zip(dir).map(|(a, b)| a * b).sum())
            .collect();
        let m = median(&proj);
        let bit: Vec<bool> = proj.iter().map(|&p| p > m).collect();
        if bit.iter().all(|&b| b) || bit.iter().all(|&b| !b) {
            continue;
        }
        for (c, b) in codes.iter_mut().zip(&bit) {
            *c = *c * 2 + usize::from(*b);
        }
        used += 1;
    }
    (codes, used)
}

/// Empirical joint distribution of discrete columns.
pub fn empirical_joint(columns: &[(&str, &[usize], usize)]) -> Result<DiscreteJoint, ProbError> {
    let rows = columns.first().map_or(0, |c| c.1.len());
    let cells: usize = columns.iter().map(|c| c.2).product();
    let mut counts = vec![0u64; cells];
    for r in 0..rows {
        let mut idx = 0;
        for (_, vals, card) in columns {
            idx = idx * card + vals[r];
        }
        counts[idx] += 1;
    }
    let table = counts.iter().map(|&c| c as f64 / rows as f64).collect();
    DiscreteJoint::new(columns.iter().map(|c| (c.0.to_string(), c.2)).collect(), table)
}
