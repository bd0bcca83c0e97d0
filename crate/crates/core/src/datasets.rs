//! LIBSVM loading, synthetic problem generators and mini-batch partitioning.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use log::warn;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};

/// Probability that a synthetic logistic label is flipped.
pub const LABEL_NOISE: f64 = 0.05;

/// Binary classification data with labels in `{+1, -1}`.
///
/// Rows are stored densely; external LIBSVM indices are 1-based and map to
/// column `index - 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledDataset {
    rows: Vec<Vec<f64>>,
    labels: Vec<f64>,
    dim: usize,
}

impl LabeledDataset {
    pub fn new(rows: Vec<Vec<f64>>, labels: Vec<f64>) -> Result<Self> {
        if rows.is_empty() {
            return Err(Error::NoSamples);
        }
        if rows.len() != labels.len() {
            return Err(Error::DimensionMismatch { expected: rows.len(), got: labels.len() });
        }
        let dim = rows[0].len();
        for row in &rows {
            if row.len() != dim {
                return Err(Error::DimensionMismatch { expected: dim, got: row.len() });
            }
        }
        if let Some(bad) = labels.iter().find(|&&b| b != 1.0 && b != -1.0) {
            return Err(Error::InvalidParameter(format!("label {bad} is not +1/-1")));
        }
        Ok(Self { rows, labels, dim })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn sample_count(&self) -> usize {
        self.rows.len()
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.rows[i]
    }

    pub fn label(&self, i: usize) -> f64 {
        self.labels[i]
    }

    pub fn labels(&self) -> &[f64] {
        &self.labels
    }

    /// Fraction of `+1` labels.
    pub fn positive_fraction(&self) -> f64 {
        self.labels.iter().filter(|&&b| b > 0.0).count() as f64 / self.labels.len() as f64
    }

    /// Reinterprets the labels as classes `{-1 → 0, +1 → 1}`.
    pub fn to_multiclass(&self) -> MulticlassDataset {
        let classes = self.labels.iter().map(|&b| usize::from(b > 0.0)).collect();
        MulticlassDataset { rows: self.rows.clone(), classes, num_classes: 2, dim: self.dim }
    }
}

/// Multi-class data for the MLP objective.
#[derive(Debug, Clone, PartialEq)]
pub struct MulticlassDataset {
    rows: Vec<Vec<f64>>,
    classes: Vec<usize>,
    num_classes: usize,
    dim: usize,
}

impl MulticlassDataset {
    pub fn new(rows: Vec<Vec<f64>>, classes: Vec<usize>, num_classes: usize) -> Result<Self> {
        if rows.is_empty() {
            return Err(Error::NoSamples);
        }
        if rows.len() != classes.len() {
            return Err(Error::DimensionMismatch { expected: rows.len(), got: classes.len() });
        }
        let dim = rows[0].len();
        if rows.iter().any(|r| r.len() != dim) {
            return Err(Error::InvalidParameter("ragged rows".into()));
        }
        if let Some(&c) = classes.iter().find(|&&c| c >= num_classes) {
            return Err(Error::InvalidParameter(format!("class {c} >= {num_classes}")));
        }
        Ok(Self { rows, classes, num_classes, dim })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn num_classes(&self) -> usize {
        self.num_classes
    }

    pub fn sample_count(&self) -> usize {
        self.rows.len()
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.rows[i]
    }

    pub fn class(&self, i: usize) -> usize {
        self.classes[i]
    }
}

/// Translation from raw numeric LIBSVM labels to `±1`.
#[derive(Debug, Clone, PartialEq)]
pub struct LabelMap {
    entries: Vec<(f64, f64)>,
}

impl LabelMap {
    /// `+1 → +1`, `-1 → -1`.
    pub fn signed() -> Self {
        Self { entries: vec![(1.0, 1.0), (-1.0, -1.0)] }
    }

    /// Explicit pairs, e.g. covertype's `{1 → +1, 2 → -1}`.
    pub fn from_pairs(pairs: &[(f64, f64)]) -> Result<Self> {
        if let Some(&(_, to)) = pairs.iter().find(|(_, to)| *to != 1.0 && *to != -1.0) {
            return Err(Error::InvalidParameter(format!("label map target {to} is not +1/-1")));
        }
        Ok(Self { entries: pairs.to_vec() })
    }

    /// Parses `"1:+1,2:-1"`.
    pub fn parse(spec: &str) -> Result<Self> {
        let mut pairs = Vec::new();
        for item in spec.split(',').map(str::trim).filter(|s| !s.is_empty()) {
            let (from, to) = item
                .split_once(':')
                .ok_or_else(|| Error::InvalidParameter(format!("label map entry `{item}`")))?;
            let parse = |s: &str| {
                s.trim()
                    .parse::<f64>()
                    .map_err(|_| Error::InvalidParameter(format!("label map entry `{item}`")))
            };
            pairs.push((parse(from)?, parse(to)?));
        }
        Self::from_pairs(&pairs)
    }

    pub fn translate(&self, raw: f64) -> Option<f64> {
        self.entries.iter().find(|(from, _)| *from == raw).map(|&(_, to)| to)
    }
}

impl Default for LabelMap {
    fn default() -> Self {
        Self::signed()
    }
}

/// Reads a LIBSVM text file.
pub fn load_libsvm(path: impl AsRef<Path>, label_map: &LabelMap) -> Result<LabeledDataset> {
    let file = File::open(path)?;
    parse_libsvm(BufReader::new(file), label_map)
}

/// Parses LIBSVM text: `<label> <idx>:<val> ...` per line, 1-based indices,
/// blank lines skipped. The dimension is the largest index seen. A repeated
/// index within a row keeps the last value.
pub fn parse_libsvm<R: BufRead>(reader: R, label_map: &LabelMap) -> Result<LabeledDataset> {
    let mut sparse_rows: Vec<BTreeMap<usize, f64>> = Vec::new();
    let mut labels = Vec::new();
    let mut dim = 0usize;

    for (lineno, line) in reader.lines().enumerate() {
        let line = line?;
        let lineno = lineno + 1;
        let mut tokens = line.split_whitespace();
        let Some(label_tok) = tokens.next() else {
            continue;
        };
        let raw: f64 = label_tok.parse().map_err(|_| Error::Parse {
            line: lineno,
            message: format!("malformed label `{label_tok}`"),
        })?;
        let label = label_map
            .translate(raw)
            .ok_or_else(|| Error::UnknownLabel { line: lineno, label: label_tok.to_string() })?;

        let mut row = BTreeMap::new();
        for tok in tokens {
            let bad = || Error::Parse { line: lineno, message: format!("malformed feature `{tok}`") };
            let (idx, val) = tok.split_once(':').ok_or_else(bad)?;
            let idx: i64 = idx.parse().map_err(|_| bad())?;
            let val: f64 = val.parse().map_err(|_| bad())?;
            if idx <= 0 {
                return Err(Error::Parse {
                    line: lineno,
                    message: format!("feature index {idx} must be >= 1"),
                });
            }
            if !val.is_finite() {
                return Err(Error::Parse { line: lineno, message: format!("non-finite value `{tok}`") });
            }
            let idx = idx as usize;
            if row.insert(idx - 1, val).is_some() {
                warn!("line {lineno}: duplicate feature index {idx}, keeping the last value");
            }
            dim = dim.max(idx);
        }
        sparse_rows.push(row);
        labels.push(label);
    }

    if sparse_rows.is_empty() {
        return Err(Error::NoSamples);
    }
    let rows = sparse_rows
        .into_iter()
        .map(|sparse| {
            let mut dense = vec![0.0; dim];
            for (j, v) in sparse {
                dense[j] = v;
            }
            dense
        })
        .collect();
    LabeledDataset::new(rows, labels)
}

/// Writes a dataset in LIBSVM format, omitting zero features. Values use the
/// shortest representation that round-trips exactly.
pub fn write_libsvm<W: Write>(dataset: &LabeledDataset, mut out: W) -> Result<()> {
    for i in 0..dataset.sample_count() {
        let label = if dataset.label(i) > 0.0 { "+1" } else { "-1" };
        write!(out, "{label}")?;
        for (j, &v) in dataset.row(i).iter().enumerate() {
            if v != 0.0 {
                write!(out, " {}:{:?}", j + 1, v)?;
            }
        }
        writeln!(out)?;
    }
    Ok(())
}

/// Synthetic sparse logistic-regression problem.
///
/// A ground-truth weight vector gets `⌈sparsity·p⌉` standard-normal nonzeros
/// at random positions; features are standard normal; each label is the sign
/// of the noiseless logit, flipped with probability [`LABEL_NOISE`].
pub fn synth_logistic(p: usize, m: usize, sparsity: f64, seed: u64) -> Result<LabeledDataset> {
    if p == 0 || m == 0 {
        return Err(Error::InvalidParameter("p and m must be >= 1".into()));
    }
    if !(sparsity > 0.0 && sparsity <= 1.0) {
        return Err(Error::InvalidParameter(format!("sparsity must be in (0, 1], got {sparsity}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let informative = ((sparsity * p as f64).ceil() as usize).clamp(1, p);
    let mut positions: Vec<usize> = (0..p).collect();
    positions.shuffle(&mut rng);
    let mut truth = vec![0.0; p];
    for &j in &positions[..informative] {
        truth[j] = rng.sample(StandardNormal);
    }

    let mut rows = Vec::with_capacity(m);
    let mut labels = Vec::with_capacity(m);
    for _ in 0..m {
        let row: Vec<f64> = (0..p).map(|_| rng.sample(StandardNormal)).collect();
        let logit: f64 = row.iter().zip(&truth).map(|(a, w)| a * w).sum();
        let mut label = if logit >= 0.0 { 1.0 } else { -1.0 };
        if rng.random::<f64>() < LABEL_NOISE {
            label = -label;
        }
        rows.push(row);
        labels.push(label);
    }
    LabeledDataset::new(rows, labels)
}

/// Synthetic "digit" classification data for the MLP.
///
/// Each class gets a random prototype image over `dim` pixels in `[0, 1]`,
/// with roughly a third of the pixels lit. A sample is its class prototype
/// plus Gaussian pixel noise of standard deviation `noise`.
pub fn synth_digits(
    dim: usize,
    num_classes: usize,
    m: usize,
    noise: f64,
    seed: u64,
) -> Result<MulticlassDataset> {
    if dim == 0 || m == 0 || num_classes < 2 {
        return Err(Error::InvalidParameter("need dim >= 1, m >= 1 and at least 2 classes".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let prototypes: Vec<Vec<f64>> = (0..num_classes)
        .map(|_| {
            (0..dim)
                .map(|_| if rng.random::<f64>() < 1.0 / 3.0 { rng.random_range(0.5..1.0) } else { 0.0 })
                .collect()
        })
        .collect();
    let mut rows = Vec::with_capacity(m);
    let mut classes = Vec::with_capacity(m);
    for i in 0..m {
        let class = i % num_classes;
        let row = prototypes[class]
            .iter()
            .map(|&v| v + noise * rng.sample::<f64, _>(StandardNormal))
            .collect();
        rows.push(row);
        classes.push(class);
    }
    MulticlassDataset::new(rows, classes, num_classes)
}

/// Disjoint cover of the sample indices by `n` mini-batches.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MiniBatchPartition {
    batches: Vec<Vec<usize>>,
}

impl MiniBatchPartition {
    pub fn batch_count(&self) -> usize {
        self.batches.len()
    }

    pub fn batch(&self, i: usize) -> &[usize] {
        &self.batches[i]
    }

    pub fn batches(&self) -> &[Vec<usize>] {
        &self.batches
    }
}

/// Shuffles `0..sample_count` with `seed` and deals the result round-robin
/// into `n` batches, so batch sizes differ by at most one.
pub fn partition(sample_count: usize, n: usize, seed: u64) -> Result<MiniBatchPartition> {
    if n == 0 || n > sample_count {
        return Err(Error::InvalidParameter(format!(
            "batch count {n} must be in 1..={sample_count}"
        )));
    }
    let mut order: Vec<usize> = (0..sample_count).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let mut batches = vec![Vec::with_capacity(sample_count / n + 1); n];
    for (k, idx) in order.into_iter().enumerate() {
        batches[k % n].push(idx);
    }
    Ok(MiniBatchPartition { batches })
}
