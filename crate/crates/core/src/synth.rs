//! Synthetic binary tasks with known, disjoint ground-truth factors.
//!
//! Every row carries `k` latent factor signs. Factor `j` is rendered into its
//! own input segment as `sign * signal * pattern + noise + offset`; the label
//! is a rule over all `k` signs, flipped with probability `label_noise`.
//! Nuisance columns are pure noise. Rows come in groups ("videos") that share
//! latents and label but have independent rendering noise.

use std::fs;
use std::io::Write as _;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::autodiff::Tensor;

pub const DATASET_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum SynthError {
    #[error("invalid factor spec: {0}")]
    InvalidSpec(String),
    #[error("shift would remove the label dependence: {0}")]
    RemovesLabelDependence(String),
    #[error("dataset needs at least one row")]
    Empty,
    #[error("both classes must be present in the training split")]
    SingleClass,
    #[error("dataset file: {0}")]
    Format(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, SynthError>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LabelRule {
    /// Majority of positive signs; ties go to the first factor.
    NoisyMajority,
    /// Odd number of positive signs.
    Parity,
    /// Sign of `sum_j (k - j) * s_j`; ties go to the first factor.
    WeightedVote,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FactorSpec {
    pub k_factors: usize,
    pub dims_per_factor: usize,
    pub label_rule: LabelRule,
    pub label_noise: f64,
    pub nuisance_dims: usize,
    /// Fraction of class-1 rows before label noise.
    pub class_imbalance: f64,
    pub signal: f64,
    pub noise_std: f64,
    /// Blend in `[0, 1)` from the all-ones factor pattern towards an
    /// alternating `+1/-1` pattern.
    pub pattern_rotation: f64,
    pub offset: f64,
    pub frames_per_group: usize,
}

impl Default for FactorSpec {
    fn default() -> Self {
        Self {
            k_factors: 4,
            dims_per_factor: 8,
            label_rule: LabelRule::NoisyMajority,
            label_noise: 0.05,
            nuisance_dims: 16,
            class_imbalance: 0.5,
            signal: 0.5,
            noise_std: 1.0,
            pattern_rotation: 0.0,
            offset: 0.0,
            frames_per_group: 1,
        }
    }
}

impl FactorSpec {
    pub fn input_dim(&self) -> usize {
        self.k_factors * self.dims_per_factor + self.nuisance_dims
    }

    pub fn segment(&self, factor: usize) -> std::ops::Range<usize> {
        factor * self.dims_per_factor..(factor + 1) * self.dims_per_factor
    }

    pub fn nuisance_range(&self) -> std::ops::Range<usize> {
        self.k_factors * self.dims_per_factor..self.input_dim()
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(SynthError::InvalidSpec(m.to_string()));
        if self.k_factors < 2 {
            return bad("k_factors must be >= 2");
        }
        if self.dims_per_factor == 0 {
            return bad("dims_per_factor must be >= 1");
        }
        if !(0.0..0.5).contains(&self.label_noise) {
            return bad("label_noise must be in [0, 0.5)");
        }
        if !(self.class_imbalance > 0.0 && self.class_imbalance < 1.0) {
            return bad("class_imbalance must be in (0, 1)");
        }
        if !(self.signal > 0.0 && self.signal.is_finite()) {
            return bad("signal must be positive and finite");
        }
        if !(self.noise_std > 0.0 && self.noise_std.is_finite()) {
            return bad("noise_std must be positive and finite");
        }
        if !(0.0..1.0).contains(&self.pattern_rotation) {
            return bad("pattern_rotation must be in [0, 1)");
        }
        if !self.offset.is_finite() {
            return bad("offset must be finite");
        }
        if self.frames_per_group == 0 {
            return bad("frames_per_group must be >= 1");
        }
        Ok(())
    }

    /// Per-dimension pattern shared by every factor segment.
    pub fn pattern(&self) -> Vec<f64> {
        let r = self.pattern_rotation;
        (0..self.dims_per_factor)
            .map(|d| {
                let alt = if d % 2 == 0 { 1.0 } else { -1.0 };
                (1.0 - r) + r * alt
            })
            .collect()
    }

    /// Clean label for a vector of `+1/-1` signs.
    pub fn label_from_signs(&self, signs: &[i8]) -> u8 {
        let first = u8::from(signs[0] > 0);
        match self.label_rule {
            LabelRule::NoisyMajority => {
                let pos = signs.iter().filter(|&&s| s > 0).count();
                match (2 * pos).cmp(&signs.len()) {
                    std::cmp::Ordering::Greater => 1,
                    std::cmp::Ordering::Less => 0,
                    std::cmp::Ordering::Equal => first,
                }
            }
            LabelRule::Parity => (signs.iter().filter(|&&s| s > 0).count() % 2) as u8,
            LabelRule::WeightedVote => {
                let k = signs.len() as i64;
                let score: i64 = signs.iter().enumerate().map(|(j, &s)| (k - j as i64) * s as i64).sum();
                match score.cmp(&0) {
                    std::cmp::Ordering::Greater => 1,
                    std::cmp::Ordering::Less => 0,
                    std::cmp::Ordering::Equal => first,
                }
            }
        }
    }
}

/// Perturbation of the rendering that keeps the label rule.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Shift {
    /// Multiplies `noise_std`.
    pub noise_scale: f64,
    /// Multiplies `signal`.
    pub signal_scale: f64,
    /// Added to `pattern_rotation`.
    pub pattern_rotation: f64,
    /// Added to `offset`.
    pub offset: f64,
}

impl Default for Shift {
    fn default() -> Self {
        Self::none()
    }
}

impl Shift {
    pub fn none() -> Self {
        Self {
            noise_scale: 1.0,
            signal_scale: 1.0,
            pattern_rotation: 0.0,
            offset: 0.0,
        }
    }
}

/// Spec with the same label semantics but a different input distribution.
pub fn distribution_shift_variant(spec: &FactorSpec, shift: &Shift) -> Result<FactorSpec> {
    spec.validate()?;
    if !(shift.signal_scale > 0.0 && shift.signal_scale.is_finite()) {
        return Err(SynthError::RemovesLabelDependence(format!(
            "signal_scale must be positive and finite, got {}",
            shift.signal_scale
        )));
    }
    if !(shift.noise_scale > 0.0 && shift.noise_scale.is_finite()) {
        return Err(SynthError::RemovesLabelDependence(format!(
            "noise_scale must be positive and finite, got {}",
            shift.noise_scale
        )));
    }
    let out = FactorSpec {
        noise_std: spec.noise_std * shift.noise_scale,
        signal: spec.signal * shift.signal_scale,
        pattern_rotation: spec.pattern_rotation + shift.pattern_rotation,
        offset: spec.offset + shift.offset,
        ..spec.clone()
    };
    out.validate().map_err(|e| SynthError::RemovesLabelDependence(e.to_string()))?;
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Split {
    Train,
    Val,
    Test,
}

impl Split {
    pub fn as_str(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Val => "val",
            Split::Test => "test",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "train" => Some(Split::Train),
            "val" => Some(Split::Val),
            "test" => Some(Split::Test),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthDataset {
    pub spec: FactorSpec,
    pub seed: u64,
    pub input_dim: usize,
    /// Row-major `[rows, input_dim]`, every value exactly representable as f32.
    pub inputs: Vec<f64>,
    pub labels: Vec<u8>,
    /// Row-major `[rows, k]` of `+1/-1`.
    pub factor_values: Vec<i8>,
    /// Rows whose label was flipped by label noise.
    pub flipped: Vec<bool>,
    pub group_ids: Vec<u64>,
    pub splits: Vec<Split>,
}

pub fn generate_dataset(spec: &FactorSpec, n: usize, seed: u64) -> Result<SynthDataset> {
    spec.validate()?;
    if n == 0 {
        return Err(SynthError::Empty);
    }
    let k = spec.k_factors;
    let width = spec.input_dim();
    let pattern = spec.pattern();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    let mut ds = SynthDataset {
        spec: spec.clone(),
        seed,
        input_dim: width,
        inputs: Vec::with_capacity(n * width),
        labels: Vec::with_capacity(n),
        factor_values: Vec::with_capacity(n * k),
        flipped: Vec::with_capacity(n),
        group_ids: Vec::with_capacity(n),
        splits: vec![Split::Train; n],
    };
    let mut signs = vec![0i8; k];
    let mut group = 0u64;
    while ds.labels.len() < n {
        // Draw the clean label first, then latents consistent with it. For
        // the symmetric rules at class_imbalance = 0.5 this reproduces
        // independent fair signs exactly.
        let target = u8::from(rng.random::<f64>() < spec.class_imbalance);
        loop {
            for s in signs.iter_mut() {
                *s = if rng.random::<bool>() { 1 } else { -1 };
            }
            if spec.label_from_signs(&signs) == target {
                break;
            }
        }
        let flip = rng.random::<f64>() < spec.label_noise;
        let label = target ^ u8::from(flip);
        for _ in 0..spec.frames_per_group {
            if ds.labels.len() == n {
                break;
            }
            for &s in &signs {
                for &p in &pattern {
                    let noise: f64 = rng.sample(StandardNormal);
                    let v = f64::from(s) * spec.signal * p + spec.noise_std * noise + spec.offset;
                    ds.inputs.push(v as f32 as f64);
                }
            }
            for _ in 0..spec.nuisance_dims {
                let noise: f64 = rng.sample(StandardNormal);
                ds.inputs.push((spec.noise_std * noise + spec.offset) as f32 as f64);
            }
            ds.labels.push(label);
            ds.factor_values.extend_from_slice(&signs);
            ds.flipped.push(flip);
            ds.group_ids.push(group);
        }
        group += 1;
    }
    Ok(ds)
}

impl SynthDataset {
    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn row(&self, r: usize) -> &[f64] {
        &self.inputs[r * self.input_dim..(r + 1) * self.input_dim]
    }

    pub fn signs(&self, r: usize) -> &[i8] {
        let k = self.spec.k_factors;
        &self.factor_values[r * k..(r + 1) * k]
    }

    /// Labels recomputed from the stored factor signs, before noise.
    pub fn clean_labels(&self) -> Vec<u8> {
        (0..self.len()).map(|r| self.spec.label_from_signs(self.signs(r))).collect()
    }

    pub fn rows_in(&self, split: Split) -> Vec<usize> {
        (0..self.len()).filter(|&r| self.splits[r] == split).collect()
    }

    pub fn split_counts(&self) -> SplitCounts {
        let count = |s| self.splits.iter().filter(|&&x| x == s).count();
        SplitCounts {
            train: count(Split::Train),
            val: count(Split::Val),
            test: count(Split::Test),
        }
    }

    /// Marks every row with `split`.
    pub fn tag_all(&mut self, split: Split) {
        self.splits.iter_mut().for_each(|s| *s = split);
    }

    /// Tags trailing whole groups as validation until at least `n_val` rows
    /// are covered; the rest stays in training. Groups never straddle splits.
    pub fn tag_validation(&mut self, n_val: usize) {
        let n = self.len();
        let mut covered = 0;
        let mut r = n;
        while r > 0 && covered < n_val {
            let g = self.group_ids[r - 1];
            while r > 0 && self.group_ids[r - 1] == g {
                self.splits[r - 1] = Split::Val;
                r -= 1;
                covered += 1;
            }
        }
    }

    pub fn inputs_for(&self, rows: &[usize]) -> Tensor {
        let mut data = Vec::with_capacity(rows.len() * self.input_dim);
        for &r in rows {
            data.extend_from_slice(self.row(r));
        }
        Tensor::new(vec![rows.len(), self.input_dim], data).expect("shape matches")
    }

    pub fn labels_for(&self, rows: &[usize]) -> Vec<u8> {
        rows.iter().map(|&r| self.labels[r]).collect()
    }

    /// SHA-256 over the content (inputs as f32 bits, labels, groups, splits).
    pub fn fingerprint(&self) -> String {
        let mut h = Sha256::new();
        h.update((self.input_dim as u64).to_le_bytes());
        for &v in &self.inputs {
            h.update((v as f32).to_le_bytes());
        }
        h.update(&self.labels);
        for g in &self.group_ids {
            h.update(g.to_le_bytes());
        }
        for s in &self.splits {
            h.update([*s as u8]);
        }
        hex::encode(h.finalize())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitCounts {
    pub train: usize,
    pub val: usize,
    pub test: usize,
}

/// Duplicates minority-class training rows (with replacement) until both
/// classes have equal training counts. Other splits are untouched.
pub fn oversample_balance(dataset: &SynthDataset, seed: u64) -> Result<SynthDataset> {
    let train = dataset.rows_in(Split::Train);
    let (neg, pos): (Vec<usize>, Vec<usize>) = train.iter().partition(|&&r| dataset.labels[r] == 0);
    if neg.is_empty() || pos.is_empty() {
        return Err(SynthError::SingleClass);
    }
    let (minority, deficit) = if neg.len() < pos.len() {
        let d = pos.len() - neg.len();
        (neg, d)
    } else {
        let d = neg.len() - pos.len();
        (pos, d)
    };
    let mut out = dataset.clone();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let k = dataset.spec.k_factors;
    for _ in 0..deficit {
        let r = minority[rng.random_range(0..minority.len())];
        out.inputs.extend_from_slice(dataset.row(r));
        out.labels.push(dataset.labels[r]);
        out.factor_values.extend_from_slice(&dataset.factor_values[r * k..(r + 1) * k]);
        out.flipped.push(dataset.flipped[r]);
        out.group_ids.push(dataset.group_ids[r]);
        out.splits.push(Split::Train);
    }
    Ok(out)
}

#[derive(Debug, Serialize, Deserialize)]
struct DatasetSidecar {
    format_version: u32,
    spec: FactorSpec,
    seed: u64,
    n_rows: usize,
    input_dim: usize,
    splits: SplitCounts,
}

/// Writes `dataset.json`, `inputs.bin` (little-endian f32) and `labels.csv`.
pub fn save_dataset(dataset: &SynthDataset, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir)?;
    let sidecar = DatasetSidecar {
        format_version: DATASET_FORMAT_VERSION,
        spec: dataset.spec.clone(),
        seed: dataset.seed,
        n_rows: dataset.len(),
        input_dim: dataset.input_dim,
        splits: dataset.split_counts(),
    };
    fs::write(dir.join("dataset.json"), serde_json::to_string_pretty(&sidecar)? + "\n")?;
    let mut blob = Vec::with_capacity(dataset.inputs.len() * 4);
    for &v in &dataset.inputs {
        blob.extend_from_slice(&(v as f32).to_le_bytes());
    }
    fs::write(dir.join("inputs.bin"), blob)?;

    let mut csv = Vec::new();
    write!(csv, "row,split,group,label,flipped")?;
    for j in 0..dataset.spec.k_factors {
        write!(csv, ",f{}", j + 1)?;
    }
    writeln!(csv)?;
    for r in 0..dataset.len() {
        write!(
            csv,
            "{r},{},{},{},{}",
            dataset.splits[r].as_str(),
            dataset.group_ids[r],
            dataset.labels[r],
            u8::from(dataset.flipped[r])
        )?;
        for s in dataset.signs(r) {
            write!(csv, ",{s}")?;
        }
        writeln!(csv)?;
    }
    fs::write(dir.join("labels.csv"), csv)?;
    Ok(())
}

pub fn load_dataset(dir: &Path) -> Result<SynthDataset> {
    let sidecar: DatasetSidecar = serde_json::from_str(&fs::read_to_string(dir.join("dataset.json"))?)?;
    if sidecar.format_version != DATASET_FORMAT_VERSION {
        return Err(SynthError::Format(format!(
            "format_version {} not supported (expected {DATASET_FORMAT_VERSION})",
            sidecar.format_version
        )));
    }
    let blob = fs::read(dir.join("inputs.bin"))?;
    let expected = sidecar.n_rows * sidecar.input_dim * 4;
    if blob.len() != expected {
        return Err(SynthError::Format(format!(
            "inputs.bin has {} bytes, expected {expected}",
            blob.len()
        )));
    }
    let inputs = blob
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]) as f64)
        .collect();

    let k = sidecar.spec.k_factors;
    let text = fs::read_to_string(dir.join("labels.csv"))?;
    let mut labels = Vec::new();
    let mut flipped = Vec::new();
    let mut group_ids = Vec::new();
    let mut splits = Vec::new();
    let mut factor_values = Vec::new();
    let bad = |line: usize, what: &str| SynthError::Format(format!("labels.csv line {line}: {what}"));
    for (i, line) in text.lines().enumerate().skip(1) {
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 5 + k {
            return Err(bad(i + 1, "wrong number of fields"));
        }
        splits.push(Split::parse(fields[1]).ok_or_else(|| bad(i + 1, "unknown split"))?);
        group_ids.push(fields[2].parse().map_err(|_| bad(i + 1, "bad group"))?);
        labels.push(fields[3].parse().map_err(|_| bad(i + 1, "bad label"))?);
        flipped.push(fields[4] == "1");
        for f in &fields[5..] {
            factor_values.push(f.parse().map_err(|_| bad(i + 1, "bad factor sign"))?);
        }
    }
    if labels.len() != sidecar.n_rows {
        return Err(SynthError::Format(format!(
            "labels.csv has {} rows, expected {}",
            labels.len(),
            sidecar.n_rows
        )));
    }
    Ok(SynthDataset {
        spec: sidecar.spec,
        seed: sidecar.seed,
        input_dim: sidecar.input_dim,
        inputs,
        labels,
        factor_values,
        flipped,
        group_ids,
        splits,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parity_labels_without_noise() {
        let spec = FactorSpec {
            k_factors: 2,
            label_rule: LabelRule::Parity,
            label_noise: 0.0,
            ..FactorSpec::default()
        };
        let ds = generate_dataset(&spec, 500, 3).unwrap();
        for r in 0..ds.len() {
            let s = ds.signs(r);
            assert_eq!(ds.labels[r], u8::from((s[0] > 0) ^ (s[1] > 0)));
        }
    }

    #[test]
    fn label_rules_recomputable() {
        for rule in [LabelRule::NoisyMajority, LabelRule::Parity, LabelRule::WeightedVote] {
            let spec = FactorSpec {
                label_rule: rule,
                label_noise: 0.0,
                ..FactorSpec::default()
            };
            let ds = generate_dataset(&spec, 400, 9).unwrap();
            assert_eq!(ds.clean_labels(), ds.labels);
        }
    }

    #[test]
    fn label_depends_on_every_factor() {
        for rule in [LabelRule::NoisyMajority, LabelRule::Parity, LabelRule::WeightedVote] {
            let spec = FactorSpec {
                label_rule: rule,
                ..FactorSpec::default()
            };
            for j in 0..spec.k_factors {
                let mut found = false;
                for code in 0..(1u32 << spec.k_factors) {
                    let mut s: Vec<i8> = (0..spec.k_factors).map(|b| if code >> b & 1 == 1 { 1 } else { -1 }).collect();
                    let a = spec.label_from_signs(&s);
                    s[j] = -s[j];
                    if spec.label_from_signs(&s) != a {
                        found = true;
                    }
                }
                assert!(found, "{rule:?} ignores factor {j}");
            }
        }
    }

    #[test]
    fn seed_determinism() {
        let spec = FactorSpec::default();
        let a = generate_dataset(&spec, 300, 1).unwrap();
        assert_eq!(a, generate_dataset(&spec, 300, 1).unwrap());
        assert_ne!(a.inputs, generate_dataset(&spec, 300, 2).unwrap().inputs);
        assert_eq!(a.input_dim, 48);
    }

    #[test]
    fn invalid_specs() {
        let mut s = FactorSpec::default();
        s.k_factors = 1;
        assert!(generate_dataset(&s, 10, 0).is_err());
        let mut s = FactorSpec::default();
        s.label_noise = 0.5;
        assert!(s.validate().is_err());
        assert!(matches!(generate_dataset(&FactorSpec::default(), 0, 0), Err(SynthError::Empty)));
    }

    #[test]
    fn groups_share_label_and_latents() {
        let spec = FactorSpec {
            frames_per_group: 5,
            ..FactorSpec::default()
        };
        let ds = generate_dataset(&spec, 52, 4).unwrap();
        assert_eq!(ds.len(), 52);
        for r in 1..ds.len() {
            if ds.group_ids[r] == ds.group_ids[r - 1] {
                assert_eq!(ds.labels[r], ds.labels[r - 1]);
                assert_eq!(ds.signs(r), ds.signs(r - 1));
                assert_ne!(ds.row(r), ds.row(r - 1));
            }
        }
        assert_eq!(*ds.group_ids.last().unwrap(), 10);
    }

    #[test]
    fn validation_tagging_respects_groups() {
        let spec = FactorSpec {
            frames_per_group: 3,
            ..FactorSpec::default()
        };
        let mut ds = generate_dataset(&spec, 30, 4).unwrap();
        ds.tag_validation(7);
        let c = ds.split_counts();
        assert_eq!((c.train, c.val), (21, 9));
    }

    #[test]
    fn oversampling() {
        let spec = FactorSpec {
            class_imbalance: 0.1,
            label_noise: 0.0,
            ..FactorSpec::default()
        };
        let ds = generate_dataset(&spec, 1000, 5).unwrap();
        let ones = ds.labels.iter().filter(|&&l| l == 1).count();
        let bal = oversample_balance(&ds, 1).unwrap();
        let ones_after = bal.labels.iter().filter(|&&l| l == 1).count();
        assert_eq!(ones_after, 1000 - ones);
        assert_eq!(bal.len(), 2 * (1000 - ones));
        for r in ds.len()..bal.len() {
            assert!((0..ds.len()).any(|o| ds.row(o) == bal.row(r) && ds.labels[o] == bal.labels[r]));
        }
        let again = oversample_balance(&bal, 2).unwrap();
        assert_eq!(again.len(), bal.len());
        let mut one_class = ds.clone();
        one_class.labels.iter_mut().for_each(|l| *l = 0);
        assert!(matches!(oversample_balance(&one_class, 0), Err(SynthError::SingleClass)));
    }

    #[test]
    fn shift_variants() {
        let spec = FactorSpec::default();
        assert_eq!(distribution_shift_variant(&spec, &Shift::none()).unwrap(), spec);
        let gone = Shift {
            signal_scale: 0.0,
            ..Shift::none()
        };
        assert!(matches!(
            distribution_shift_variant(&spec, &gone),
            Err(SynthError::RemovesLabelDependence(_))
        ));
        let too_far = Shift {
            pattern_rotation: 1.0,
            ..Shift::none()
        };
        assert!(distribution_shift_variant(&spec, &too_far).is_err());
    }

    #[test]
    fn persistence_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let mut ds = generate_dataset(&FactorSpec::default(), 64, 8).unwrap();
        ds.tag_validation(10);
        save_dataset(&ds, dir.path()).unwrap();
        let back = load_dataset(dir.path()).unwrap();
        assert_eq!(ds, back);
        assert_eq!(ds.fingerprint(), back.fingerprint());
        fs::write(dir.path().join("inputs.bin"), [0u8; 12]).unwrap();
        assert!(matches!(load_dataset(dir.path()), Err(SynthError::Format(_))));
    }
}
