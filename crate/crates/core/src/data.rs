//! Labeled datasets, file loaders, stratified splitting, stream batching and
//! synthetic stream generators.

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::io::{self, Write};
use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};
use crate::scalar::Real;

/// One training pair: a dense feature row and its class id (≥ 1).
#[derive(Clone, Debug, PartialEq)]
pub struct LabeledPoint<T> {
    pub features: Vec<T>,
    pub label: u32,
}

impl<T> LabeledPoint<T> {
    pub fn new(features: Vec<T>, label: u32) -> Self {
        LabeledPoint { features, label }
    }
}

/// Ordered collection of points sharing one feature dimension.
#[derive(Clone, Debug, PartialEq)]
pub struct Dataset<T> {
    points: Vec<LabeledPoint<T>>,
    n: usize,
    classes: Vec<u32>,
}

impl<T: Real> Dataset<T> {
    /// Validates dimensions, finiteness and labels.
    pub fn new(n: usize, points: Vec<LabeledPoint<T>>) -> Result<Self> {
        let mut classes = BTreeSet::new();
        for (i, p) in points.iter().enumerate() {
            if p.features.len() != n {
                return Err(Error::Dimension {
                    expected: n,
                    got: p.features.len(),
                });
            }
            if p.features.iter().any(|v| !v.is_finite()) {
                return Err(Error::Parse {
                    line: i + 1,
                    msg: "non-finite feature value".into(),
                });
            }
            if p.label == 0 {
                return Err(Error::Parse {
                    line: i + 1,
                    msg: "class labels must be >= 1".into(),
                });
            }
            classes.insert(p.label);
        }
        Ok(Dataset {
            points,
            n,
            classes: classes.into_iter().collect(),
        })
    }

    pub fn empty(n: usize) -> Self {
        Dataset {
            points: Vec::new(),
            n,
            classes: Vec::new(),
        }
    }

    pub fn points(&self) -> &[LabeledPoint<T>] {
        &self.points
    }

    pub fn into_points(self) -> Vec<LabeledPoint<T>> {
        self.points
    }

    /// Feature dimension.
    pub fn dim(&self) -> usize {
        self.n
    }

    /// Sorted distinct labels present.
    pub fn classes(&self) -> &[u32] {
        &self.classes
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn class_counts(&self) -> BTreeMap<u32, usize> {
        let mut counts = BTreeMap::new();
        for p in &self.points {
            *counts.entry(p.label).or_insert(0) += 1;
        }
        counts
    }

    /// Subset by index, preserving the given order.
    pub fn select(&self, idx: &[usize]) -> Self {
        let points = idx.iter().map(|&i| self.points[i].clone()).collect();
        Self::from_valid(self.n, points)
    }

    fn from_valid(n: usize, points: Vec<LabeledPoint<T>>) -> Self {
        let classes: BTreeSet<u32> = points.iter().map(|p| p.label).collect();
        Dataset {
            points,
            n,
            classes: classes.into_iter().collect(),
        }
    }

    /// Writes LIBSVM text. The last feature index is always emitted so the
    /// dimension survives a reload; other zero entries are skipped.
    pub fn write_libsvm<W: Write>(&self, mut w: W) -> io::Result<()> {
        for p in &self.points {
            write!(w, "{}", p.label)?;
            for (j, v) in p.features.iter().enumerate() {
                if *v != T::zero() || j + 1 == self.n {
                    write!(w, " {}:{}", j + 1, v)?;
                }
            }
            writeln!(w)?;
        }
        Ok(())
    }

    /// Writes headerless CSV with the label in the last column.
    pub fn write_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        for p in &self.points {
            for v in &p.features {
                write!(w, "{},", v)?;
            }
            writeln!(w, "{}", p.label)?;
        }
        Ok(())
    }
}

fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn parse_label(tok: &str, line: usize) -> Result<u32> {
    let v: f64 = tok.trim().parse().map_err(|_| Error::Parse {
        line,
        msg: format!("bad label {tok:?}"),
    })?;
    if v.fract() != 0.0 || v < 1.0 || v > u32::MAX as f64 {
        return Err(Error::Parse {
            line,
            msg: format!("label {tok:?} is not a positive integer"),
        });
    }
    Ok(v as u32)
}

pub fn load_libsvm<T: Real>(path: impl AsRef<Path>) -> Result<Dataset<T>> {
    parse_libsvm(&read_text(path.as_ref())?)
}

/// Parses LIBSVM sparse text (`label idx:val ...`, 1-based ascending
/// indices) into a dense dataset. Blank lines and `#` comments are skipped.
pub fn parse_libsvm<T: Real>(text: &str) -> Result<Dataset<T>> {
    let mut rows: Vec<(u32, Vec<(usize, f64)>)> = Vec::new();
    let mut n = 0usize;
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let body = raw.split('#').next().unwrap_or("").trim();
        if body.is_empty() {
            continue;
        }
        let mut toks = body.split_whitespace();
        let label = parse_label(toks.next().unwrap_or(""), line)?;
        let mut entries = Vec::new();
        let mut last = 0usize;
        for tok in toks {
            let (idx, val) = tok.split_once(':').ok_or_else(|| Error::Parse {
                line,
                msg: format!("expected idx:val, found {tok:?}"),
            })?;
            let idx: usize = idx.parse().map_err(|_| Error::Parse {
                line,
                msg: format!("bad index {idx:?}"),
            })?;
            if idx == 0 || idx <= last {
                return Err(Error::Parse {
                    line,
                    msg: format!("indices must be 1-based and ascending, found {idx}"),
                });
            }
            let val: f64 = val.parse().map_err(|_| Error::Parse {
                line,
                msg: format!("bad value {val:?}"),
            })?;
            if !val.is_finite() {
                return Err(Error::Parse {
                    line,
                    msg: "non-finite value".into(),
                });
            }
            last = idx;
            entries.push((idx, val));
        }
        n = n.max(last);
        rows.push((label, entries));
    }
    if rows.is_empty() {
        return Err(Error::Empty);
    }
    let points = rows
        .into_iter()
        .map(|(label, entries)| {
            let mut f = vec![T::zero(); n];
            for (idx, v) in entries {
                f[idx - 1] = T::lit(v);
            }
            LabeledPoint::new(f, label)
        })
        .collect();
    Dataset::new(n, points)
}

pub fn load_csv<T: Real>(path: impl AsRef<Path>, label_column: usize) -> Result<Dataset<T>> {
    parse_csv(&read_text(path.as_ref())?, label_column)
}

/// Parses rectangular numeric CSV. A first row containing any non-numeric
/// token is treated as a header.
pub fn parse_csv<T: Real>(text: &str, label_column: usize) -> Result<Dataset<T>> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let mut width: Option<usize> = None;
    let mut points = Vec::new();
    for (i, rec) in reader.records().enumerate() {
        let line = i + 1;
        let rec = rec.map_err(|e| Error::Parse {
            line,
            msg: e.to_string(),
        })?;
        if rec.len() == 1 && rec.get(0) == Some("") {
            continue;
        }
        if i == 0 && rec.iter().any(|t| t.parse::<f64>().is_err()) {
            width = Some(rec.len());
            continue;
        }
        let w = *width.get_or_insert(rec.len());
        if rec.len() != w {
            return Err(Error::Ragged {
                line,
                expected: w,
                found: rec.len(),
            });
        }
        if label_column >= w {
            return Err(Error::InvalidParam(format!(
                "label column {label_column} out of range for {w} columns"
            )));
        }
        let mut features = Vec::with_capacity(w - 1);
        let mut label = 0;
        for (j, tok) in rec.iter().enumerate() {
            if j == label_column {
                label = parse_label(tok, line)?;
            } else {
                let v: f64 = tok.parse().map_err(|_| Error::Parse {
                    line,
                    msg: format!("non-numeric cell {tok:?} in column {j}"),
                })?;
                features.push(T::lit(v));
            }
        }
        points.push(LabeledPoint::new(features, label));
    }
    let n = match width {
        Some(w) if !points.is_empty() => w - 1,
        _ => return Err(Error::Empty),
    };
    Dataset::new(n, points)
}

/// Per-class seeded split into `(train, test)`; each class contributes
/// `round(count · test_fraction)` test points, kept within `[1, count − 1]`.
pub fn stratified_split<T: Real>(
    d: &Dataset<T>,
    test_fraction: f64,
    seed: u64,
) -> Result<(Dataset<T>, Dataset<T>)> {
    if !(test_fraction > 0.0 && test_fraction < 1.0) {
        return Err(Error::InvalidParam(format!(
            "test fraction {test_fraction} outside (0, 1)"
        )));
    }
    let mut by_class: BTreeMap<u32, Vec<usize>> = BTreeMap::new();
    for (i, p) in d.points().iter().enumerate() {
        by_class.entry(p.label).or_default().push(i);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut train = Vec::new();
    let mut test = Vec::new();
    for (&label, idx) in by_class.iter_mut() {
        if idx.len() < 2 {
            return Err(Error::TooFewPoints {
                label,
                count: idx.len(),
                needed: 2,
            });
        }
        idx.shuffle(&mut rng);
        let k = ((idx.len() as f64) * test_fraction).round() as usize;
        let k = k.clamp(1, idx.len() - 1);
        test.extend_from_slice(&idx[..k]);
        train.extend_from_slice(&idx[k..]);
    }
    train.sort_unstable();
    test.sort_unstable();
    Ok((d.select(&train), d.select(&test)))
}

/// How a stream is cut into training batches.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct BatchPlan {
    pub batch_size: usize,
    pub seed: u64,
}

/// Seeded shuffle of `d` cut into batches of `plan.batch_size` (the last may
/// be smaller). The first batch is guaranteed to hold every class: for each
/// missing class, in ascending label order, its earliest occurrence is
/// swapped into the last first-batch slot whose class is duplicated there.
pub fn batches<T: Real>(d: &Dataset<T>, plan: BatchPlan) -> Result<Vec<Dataset<T>>> {
    let bs = plan.batch_size;
    if bs == 0 {
        return Err(Error::InvalidParam("batch size must be >= 1".into()));
    }
    if bs > d.len() {
        return Err(Error::InvalidParam(format!(
            "batch size {bs} exceeds dataset size {}",
            d.len()
        )));
    }
    if bs < d.classes().len() {
        return Err(Error::InvalidParam(format!(
            "batch size {bs} cannot cover {} classes",
            d.classes().len()
        )));
    }
    let mut order: Vec<usize> = (0..d.len()).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(plan.seed));

    let label = |i: usize| d.points()[i].label;
    let mut in_first: BTreeMap<u32, usize> = BTreeMap::new();
    for &i in &order[..bs] {
        *in_first.entry(label(i)).or_insert(0) += 1;
    }
    for &c in d.classes() {
        if in_first.contains_key(&c) {
            continue;
        }
        let from = (bs..order.len())
            .find(|&p| label(order[p]) == c)
            .expect("class present in dataset");
        let to = (0..bs)
            .rev()
            .find(|&p| in_first[&label(order[p])] > 1)
            .expect("batch larger than class count has a duplicate");
        *in_first.get_mut(&label(order[to])).unwrap() -= 1;
        in_first.insert(c, 1);
        order.swap(from, to);
    }
    Ok(order.chunks(bs).map(|chunk| d.select(chunk)).collect())
}

/// Labeling hyperplane of the HYPER stream: class 1 iff `w·x ≥ threshold`.
#[derive(Clone, Debug, PartialEq)]
pub struct Hyperplane {
    pub weights: Vec<f64>,
    pub threshold: f64,
}

impl Hyperplane {
    pub fn label(&self, x: &[f64]) -> u32 {
        let s: f64 = self.weights.iter().zip(x).map(|(w, v)| w * v).sum();
        if s >= self.threshold {
            1
        } else {
            2
        }
    }
}

fn flip(label: u32) -> u32 {
    if label == 1 {
        2
    } else {
        1
    }
}

/// Rotating-hyperplane style stream without drift: points uniform in
/// `[0,1]^dim`, weights uniform in `[0,1]`, threshold at half the weight sum
/// so both classes are populated. Each label is flipped with probability
/// `noise_fraction`.
pub fn gen_hyper<T: Real>(
    count: usize,
    dim: usize,
    noise_fraction: f64,
    seed: u64,
) -> Result<(Dataset<T>, Hyperplane)> {
    if dim < 2 {
        return Err(Error::InvalidParam(
            "hyperplane dimension must be >= 2".into(),
        ));
    }
    if !(0.0..1.0).contains(&noise_fraction) {
        return Err(Error::InvalidParam(format!(
            "noise fraction {noise_fraction} outside [0, 1)"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let weights: Vec<f64> = (0..dim).map(|_| rng.random::<f64>()).collect();
    let plane = Hyperplane {
        threshold: 0.5 * weights.iter().sum::<f64>(),
        weights,
    };
    let mut points = Vec::with_capacity(count);
    for _ in 0..count {
        let x: Vec<f64> = (0..dim).map(|_| rng.random::<f64>()).collect();
        let mut label = plane.label(&x);
        if rng.random::<f64>() < noise_fraction {
            label = flip(label);
        }
        points.push(LabeledPoint::new(
            x.into_iter().map(T::lit).collect(),
            label,
        ));
    }
    Ok((Dataset::new(dim, points)?, plane))
}

/// SEA concept: class 1 iff `f1 + f2 ≤ threshold`; `f3` is irrelevant.
pub fn sea_label(f1: f64, f2: f64, threshold: f64) -> u32 {
    if f1 + f2 <= threshold {
        1
    } else {
        2
    }
}

/// SEA stream: three attributes uniform in `[0,10]`, labeled by
/// [`sea_label`], each label flipped with probability `noise_fraction`.
pub fn gen_sea<T: Real>(
    count: usize,
    noise_fraction: f64,
    threshold: f64,
    seed: u64,
) -> Result<Dataset<T>> {
    if !(threshold > 0.0 && threshold < 20.0) {
        return Err(Error::InvalidParam(format!(
            "SEA threshold {threshold} outside (0, 20)"
        )));
    }
    if !(0.0..1.0).contains(&noise_fraction) {
        return Err(Error::InvalidParam(format!(
            "noise fraction {noise_fraction} outside [0, 1)"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut points = Vec::with_capacity(count);
    for _ in 0..count {
        let f: [f64; 3] = std::array::from_fn(|_| rng.random::<f64>() * 10.0);
        let mut label = sea_label(f[0], f[1], threshold);
        if rng.random::<f64>() < noise_fraction {
            label = flip(label);
        }
        points.push(LabeledPoint::new(
            f.iter().map(|&v| T::lit(v)).collect(),
            label,
        ));
    }
    Dataset::new(3, points)
}

/// Isotropic Gaussian blobs, `per_class` points around each center; the
/// class of `centers[k]` is `k + 1`. Points are interleaved by class.
pub fn gen_blobs<T: Real>(
    centers: &[Vec<f64>],
    std_dev: f64,
    per_class: usize,
    seed: u64,
) -> Result<Dataset<T>> {
    let dim = centers.first().map(Vec::len).unwrap_or(0);
    if centers.iter().any(|c| c.len() != dim) {
        return Err(Error::InvalidParam(
            "blob centers differ in dimension".into(),
        ));
    }
    let normal =
        Normal::new(0.0, std_dev).map_err(|e| Error::InvalidParam(format!("blob std dev: {e}")))?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut points = Vec::with_capacity(centers.len() * per_class);
    for _ in 0..per_class {
        for (k, c) in centers.iter().enumerate() {
            let x = c
                .iter()
                .map(|&m| T::lit(m + normal.sample(&mut rng)))
                .collect();
            points.push(LabeledPoint::new(x, k as u32 + 1));
        }
    }
    Dataset::new(dim, points)
}
