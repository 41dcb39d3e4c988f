//! Labeled dense datasets: libsvm text parsing, min-max scaling and
//! seeded train/test and k-fold partitioning.
//!
//! Every random partition draws from a ChaCha8 stream seeded with
//! `ChaCha8Rng::seed_from_u64(seed)` and shuffles with Fisher-Yates, so
//! partitions are identical across platforms for a given seed.

use std::fmt::Write as _;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{PrismError, Result};

/// Class label, always `+1` or `-1`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, PartialOrd, Ord)]
pub enum Label {
    #[serde(rename = "-1")]
    Negative,
    #[serde(rename = "+1")]
    Positive,
}

impl Label {
    pub fn from_sign(v: f64) -> Label {
        if v > 0.0 {
            Label::Positive
        } else {
            Label::Negative
        }
    }

    pub fn value(self) -> f64 {
        match self {
            Label::Positive => 1.0,
            Label::Negative => -1.0,
        }
    }

    pub fn opposite(self) -> Label {
        match self {
            Label::Positive => Label::Negative,
            Label::Negative => Label::Positive,
        }
    }
}

impl std::fmt::Display for Label {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Label::Positive => write!(f, "+1"),
            Label::Negative => write!(f, "-1"),
        }
    }
}

impl std::str::FromStr for Label {
    type Err = PrismError;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "+1" | "1" | "+" | "pos" | "positive" => Ok(Label::Positive),
            "-1" | "-" | "neg" | "negative" => Ok(Label::Negative),
            other => Err(PrismError::InvalidConfig(format!("unknown class '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub features: Vec<f64>,
    pub label: Label,
}

/// How raw file labels were mapped onto `+1` / `-1`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "rule", rename_all = "snake_case")]
pub enum LabelMapping {
    /// Exactly two distinct raw values: the larger one became `+1`.
    TwoValues { positive: f64, negative: f64 },
    /// More than two raw values: positive numbers became `+1`.
    Sign,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    samples: Vec<Sample>,
    n_features: usize,
    n_pos: usize,
    n_neg: usize,
    mapping: LabelMapping,
}

impl Dataset {
    /// Builds a dataset from already-labeled samples. Every sample must
    /// have `n_features` entries.
    pub fn new(samples: Vec<Sample>, n_features: usize) -> Result<Dataset> {
        Self::with_mapping(
            samples,
            n_features,
            LabelMapping::TwoValues { positive: 1.0, negative: -1.0 },
        )
    }

    fn with_mapping(samples: Vec<Sample>, n_features: usize, mapping: LabelMapping) -> Result<Dataset> {
        if samples.is_empty() {
            return Err(PrismError::EmptyDataset);
        }
        for s in &samples {
            if s.features.len() != n_features {
                return Err(PrismError::DimensionMismatch { expected: n_features, got: s.features.len() });
            }
        }
        let n_pos = samples.iter().filter(|s| s.label == Label::Positive).count();
        let n_neg = samples.len() - n_pos;
        Ok(Dataset { samples, n_features, n_pos, n_neg, mapping })
    }

    /// Convenience constructor from parallel arrays of rows and `±1` labels.
    pub fn from_rows(rows: Vec<Vec<f64>>, labels: &[f64]) -> Result<Dataset> {
        if rows.len() != labels.len() {
            return Err(PrismError::LengthMismatch(rows.len(), labels.len()));
        }
        let n = rows.first().map_or(0, Vec::len);
        let samples = rows
            .into_iter()
            .zip(labels)
            .map(|(features, &l)| Sample { features, label: Label::from_sign(l) })
            .collect();
        Dataset::new(samples, n)
    }

    pub fn samples(&self) -> &[Sample] {
        &self.samples
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn n_features(&self) -> usize {
        self.n_features
    }

    pub fn n_pos(&self) -> usize {
        self.n_pos
    }

    pub fn n_neg(&self) -> usize {
        self.n_neg
    }

    pub fn class_count(&self, label: Label) -> usize {
        match label {
            Label::Positive => self.n_pos,
            Label::Negative => self.n_neg,
        }
    }

    pub fn mapping(&self) -> LabelMapping {
        self.mapping
    }

    pub fn has_both_classes(&self) -> bool {
        self.n_pos > 0 && self.n_neg > 0
    }

    /// Labels as `±1.0`.
    pub fn label_values(&self) -> Vec<f64> {
        self.samples.iter().map(|s| s.label.value()).collect()
    }

    pub fn rows(&self) -> Vec<&[f64]> {
        self.samples.iter().map(|s| s.features.as_slice()).collect()
    }

    /// Samples at `indices`, in the given order.
    pub fn subset(&self, indices: &[usize]) -> Result<Dataset> {
        let samples = indices.iter().map(|&i| self.samples[i].clone()).collect();
        Self::with_mapping(samples, self.n_features, self.mapping)
    }

    /// Applies `apply_minmax` to every sample.
    pub fn scaled(&self, params: &ScalingParams) -> Result<Dataset> {
        let samples = self
            .samples
            .iter()
            .map(|s| Ok(Sample { features: apply_minmax(&s.features, params)?, label: s.label }))
            .collect::<Result<Vec<_>>>()?;
        Self::with_mapping(samples, self.n_features, self.mapping)
    }

    /// Canonical libsvm text: labels `+1`/`-1`, ascending indices, shortest
    /// round-trip decimals. Zero entries are omitted except the last
    /// feature, which is always written so the dimension survives a
    /// round trip.
    pub fn to_libsvm(&self) -> String {
        let mut out = String::new();
        for s in &self.samples {
            out.push_str(&s.label.to_string());
            for (j, v) in s.features.iter().enumerate() {
                if v.to_bits() != 0 || j + 1 == self.n_features {
                    let _ = write!(out, " {}:{}", j + 1, v);
                }
            }
            out.push('\n');
        }
        out
    }
}

/// One parsed line of a libsvm file before class mapping.
#[derive(Debug, Clone, PartialEq)]
pub struct RawRecord {
    pub label: f64,
    pub entries: Vec<(usize, f64)>,
}

/// Parses libsvm lines without interpreting labels. Returns the records
/// and the largest feature index seen.
pub fn parse_records(text: &str) -> Result<(Vec<RawRecord>, usize)> {
    let mut records = Vec::new();
    let mut n = 0usize;
    for (line_idx, line) in text.lines().enumerate() {
        let line_no = line_idx + 1;
        let line = line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let bad = |reason: String| PrismError::MalformedLine { line_no, reason };
        let mut tokens = line.split_whitespace();
        let label_tok = tokens.next().ok_or_else(|| bad("missing label".into()))?;
        let label: f64 = label_tok.parse().map_err(|_| bad(format!("bad label '{label_tok}'")))?;
        if !label.is_finite() {
            return Err(bad(format!("non-finite label '{label_tok}'")));
        }
        let mut entries = Vec::new();
        let mut last = 0usize;
        for tok in tokens {
            let (idx, val) = tok.split_once(':').ok_or_else(|| bad(format!("expected idx:value, got '{tok}'")))?;
            let idx: usize = idx.parse().map_err(|_| bad(format!("bad index '{idx}'")))?;
            let val: f64 = val.parse().map_err(|_| bad(format!("bad value '{val}'")))?;
            if idx == 0 || idx <= last {
                return Err(bad(format!("indices must be 1-based and strictly increasing (got {idx} after {last})")));
            }
            if !val.is_finite() {
                return Err(bad(format!("non-finite value at index {idx}")));
            }
            last = idx;
            entries.push((idx, val));
        }
        n = n.max(last);
        records.push(RawRecord { label, entries });
    }
    Ok((records, n))
}

/// Expands sparse entries into a dense vector of length `n`.
pub fn densify(entries: &[(usize, f64)], n: usize) -> Result<Vec<f64>> {
    let mut x = vec![0.0; n];
    for &(idx, v) in entries {
        if idx > n {
            return Err(PrismError::DimensionMismatch { expected: n, got: idx });
        }
        x[idx - 1] = v;
    }
    Ok(x)
}

/// Parses a labeled libsvm file into a two-class [`Dataset`].
pub fn parse_libsvm(text: &str) -> Result<Dataset> {
    let (records, n) = parse_records(text)?;
    if records.is_empty() {
        return Err(PrismError::EmptyDataset);
    }
    let mut distinct: Vec<f64> = records.iter().map(|r| r.label).collect();
    distinct.sort_by(f64::total_cmp);
    distinct.dedup();
    let mapping = match distinct.len() {
        1 => return Err(PrismError::SingleClass(distinct[0])),
        2 => LabelMapping::TwoValues { positive: distinct[1], negative: distinct[0] },
        _ => LabelMapping::Sign,
    };
    let to_label = |raw: f64| match mapping {
        LabelMapping::TwoValues { positive, .. } => {
            if raw == positive {
                Label::Positive
            } else {
                Label::Negative
            }
        }
        LabelMapping::Sign => Label::from_sign(raw),
    };
    let samples = records
        .iter()
        .map(|r| Ok(Sample { features: densify(&r.entries, n)?, label: to_label(r.label) }))
        .collect::<Result<Vec<_>>>()?;
    let d = Dataset::with_mapping(samples, n, mapping)?;
    if !d.has_both_classes() {
        return Err(PrismError::SingleClass(records[0].label));
    }
    Ok(d)
}

/// Per-feature extrema of a fitting set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalingParams {
    pub min: Vec<f64>,
    pub max: Vec<f64>,
}

pub fn fit_minmax(train: &Dataset) -> ScalingParams {
    let n = train.n_features();
    let mut min = vec![f64::INFINITY; n];
    let mut max = vec![f64::NEG_INFINITY; n];
    for s in train.samples() {
        for (j, &v) in s.features.iter().enumerate() {
            min[j] = min[j].min(v);
            max[j] = max[j].max(v);
        }
    }
    ScalingParams { min, max }
}

/// Maps `x` into the fitted range. Constant features map to 0 and
/// out-of-range values are not clipped.
pub fn apply_minmax(x: &[f64], p: &ScalingParams) -> Result<Vec<f64>> {
    if x.len() != p.min.len() {
        return Err(PrismError::DimensionMismatch { expected: p.min.len(), got: x.len() });
    }
    Ok(x
        .iter()
        .zip(p.min.iter().zip(&p.max))
        .map(|(&v, (&lo, &hi))| if hi > lo { (v - lo) / (hi - lo) } else { 0.0 })
        .collect())
}

fn round_half_up(v: f64) -> usize {
    // 0.7·345 evaluates to 241.49999999999997; absorb that representation error.
    (v + 0.5 + 1e-9).floor() as usize
}

fn shuffled(n: usize, seed: u64) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..n).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    idx.shuffle(&mut rng);
    idx
}

/// Train/test index sets for a dataset of `n` samples, both sorted
/// ascending. With `labels`, the split is stratified per class.
pub fn split_indices(
    n: usize,
    train_fraction: f64,
    seed: u64,
    stratify_by: Option<&[Label]>,
) -> Result<(Vec<usize>, Vec<usize>)> {
    if !(train_fraction > 0.0 && train_fraction < 1.0) {
        return Err(PrismError::DegenerateSplit(format!("train fraction {train_fraction} not in (0,1)")));
    }
    let perm = shuffled(n, seed);
    let mut train = Vec::new();
    let mut test = Vec::new();
    match stratify_by {
        None => {
            let n_train = round_half_up(train_fraction * n as f64);
            train.extend_from_slice(&perm[..n_train.min(n)]);
            test.extend_from_slice(&perm[n_train.min(n)..]);
        }
        Some(labels) => {
            for class in [Label::Positive, Label::Negative] {
                let members: Vec<usize> = perm.iter().copied().filter(|&i| labels[i] == class).collect();
                let k = round_half_up(train_fraction * members.len() as f64).min(members.len());
                train.extend_from_slice(&members[..k]);
                test.extend_from_slice(&members[k..]);
            }
        }
    }
    train.sort_unstable();
    test.sort_unstable();
    if train.is_empty() || test.is_empty() {
        return Err(PrismError::DegenerateSplit(format!("train={} test={}", train.len(), test.len())));
    }
    Ok((train, test))
}

/// Seeded random train/test split; train size is `round(f·N)` rounding
/// halves up.
pub fn split(d: &Dataset, train_fraction: f64, seed: u64) -> Result<(Dataset, Dataset)> {
    split_with(d, train_fraction, seed, false)
}

pub fn split_with(d: &Dataset, train_fraction: f64, seed: u64, stratified: bool) -> Result<(Dataset, Dataset)> {
    let labels: Vec<Label> = d.samples().iter().map(|s| s.label).collect();
    let (tr, te) = split_indices(d.len(), train_fraction, seed, stratified.then_some(labels.as_slice()))?;
    let train = d.subset(&tr)?;
    if !train.has_both_classes() {
        return Err(PrismError::DegenerateSplit("training split has a single class".into()));
    }
    Ok((train, d.subset(&te)?))
}

/// One cross-validation fold, as indices into the partitioned dataset.
#[derive(Debug, Clone, PartialEq)]
pub struct Fold {
    pub train: Vec<usize>,
    pub validation: Vec<usize>,
}

/// Partitions `0..n` into `k` folds whose sizes differ by at most one.
/// With `stratify_by`, each class is dealt round-robin across folds.
pub fn kfold_indices(n: usize, k: usize, seed: u64, stratify_by: Option<&[Label]>) -> Result<Vec<Fold>> {
    if k < 2 || k > n {
        return Err(PrismError::BadK { k, n });
    }
    let perm = shuffled(n, seed);
    let mut buckets: Vec<Vec<usize>> = vec![Vec::new(); k];
    match stratify_by {
        None => {
            let base = n / k;
            let extra = n % k;
            let mut pos = 0;
            for (f, bucket) in buckets.iter_mut().enumerate() {
                let size = base + usize::from(f < extra);
                bucket.extend_from_slice(&perm[pos..pos + size]);
                pos += size;
            }
        }
        Some(labels) => {
            let ordered = perm
                .iter()
                .filter(|&&i| labels[i] == Label::Positive)
                .chain(perm.iter().filter(|&&i| labels[i] == Label::Negative));
            for (t, &i) in ordered.enumerate() {
                buckets[t % k].push(i);
            }
        }
    }
    Ok((0..k)
        .map(|f| {
            let mut validation = buckets[f].clone();
            validation.sort_unstable();
            let mut train: Vec<usize> = buckets
                .iter()
                .enumerate()
                .filter(|&(g, _)| g != f)
                .flat_map(|(_, b)| b.iter().copied())
                .collect();
            train.sort_unstable();
            Fold { train, validation }
        })
        .collect())
}

/// k seeded (train, validation) pairs over `d`.
pub fn kfold(d: &Dataset, k: usize, seed: u64) -> Result<Vec<(Dataset, Dataset)>> {
    kfold_indices(d.len(), k, seed, None)?
        .into_iter()
        .map(|f| Ok((d.subset(&f.train)?, d.subset(&f.validation)?)))
        .collect()
}
