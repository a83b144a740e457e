//! Multiclass classification through a decision DAG of pairwise twin SVMs.
//!
//! One binary node is trained for every unordered pair of classes, with the
//! smaller label as the positive class. Prediction keeps the candidate
//! labels in ascending order and asks the node of the first and last
//! candidate which one to drop, until one label survives.

use std::collections::BTreeMap;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::binary::{train_binary, BinaryModel, Hyperparams, Side};
use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::incremental::{update, ScreenPolicy};
use crate::linalg::Matrix;
use crate::rff::FeatureMap;
use crate::scalar::Real;

#[derive(Clone, Debug, PartialEq)]
pub struct DagModel<T> {
    /// Sorted, distinct.
    pub classes: Vec<u32>,
    /// Pairs `(i, j)`, `i < j` as class indices, in lexicographic order.
    pub nodes: Vec<BinaryModel<T>>,
    pub feature_map: FeatureMap<T>,
    pub hp: Hyperparams<T>,
    pub policy: ScreenPolicy,
}

/// Index of the node for class indices `i < j` among `u` classes.
pub fn pair_index(u: usize, i: usize, j: usize) -> usize {
    debug_assert!(i < j && j < u);
    i * (2 * u - i - 1) / 2 + (j - i - 1)
}

/// Number of nodes for `u` classes.
pub fn node_count(u: usize) -> usize {
    u * u.saturating_sub(1) / 2
}

/// Path of one prediction.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Trace {
    pub label: u32,
    /// `(positive, negative, eliminated)` labels per evaluated node.
    pub steps: Vec<(u32, u32, u32)>,
}

impl Trace {
    pub fn evaluations(&self) -> usize {
        self.steps.len()
    }
}

/// Mapped rows grouped per class index.
fn group<T: Real>(classes: &[u32], map: &FeatureMap<T>, d: &Dataset<T>) -> Result<Vec<Matrix<T>>> {
    if d.dim() != map.input_dim() && !d.is_empty() {
        return Err(Error::Dimension {
            expected: map.input_dim(),
            got: d.dim(),
        });
    }
    let mapped = d
        .points()
        .par_iter()
        .map(|p| map.transform(&p.features))
        .collect::<Result<Vec<_>>>()?;
    let mut groups = vec![Matrix::with_cols(map.output_dim()); classes.len()];
    for (p, z) in d.points().iter().zip(mapped) {
        let k = classes
            .binary_search(&p.label)
            .map_err(|_| Error::UnknownClass(p.label))?;
        groups[k].push_row(&z)?;
    }
    Ok(groups)
}

/// Trains every pairwise node; nodes run in parallel.
pub fn train_dag<T: Real>(
    d: &Dataset<T>,
    hp: &Hyperparams<T>,
    feature_map: FeatureMap<T>,
    policy: ScreenPolicy,
) -> Result<DagModel<T>> {
    hp.validate()?;
    let classes = d.classes().to_vec();
    if classes.len() < 2 {
        return Err(Error::InvalidParam(format!(
            "need at least 2 classes, found {}",
            classes.len()
        )));
    }
    let groups = group(&classes, &feature_map, d)?;
    if let Some(k) = groups.iter().position(|g| g.rows() == 0) {
        return Err(Error::EmptyClass(classes[k]));
    }
    let u = classes.len();
    let pairs: Vec<(usize, usize)> = (0..u)
        .flat_map(|i| (i + 1..u).map(move |j| (i, j)))
        .collect();
    let nodes = pairs
        .par_iter()
        .map(|&(i, j)| train_binary(&groups[i], &groups[j], hp))
        .collect::<Result<Vec<_>>>()?;
    Ok(DagModel {
        classes,
        nodes,
        feature_map,
        hp: *hp,
        policy,
    })
}

impl<T: Real> DagModel<T> {
    pub fn node(&self, a: u32, b: u32) -> Option<&BinaryModel<T>> {
        let i = self.classes.binary_search(&a.min(b)).ok()?;
        let j = self.classes.binary_search(&a.max(b)).ok()?;
        (i != j).then(|| &self.nodes[pair_index(self.classes.len(), i, j)])
    }

    pub fn input_dim(&self) -> usize {
        self.feature_map.input_dim()
    }

    /// Retained points summed over all nodes.
    pub fn n_sv(&self) -> usize {
        self.nodes.iter().map(BinaryModel::n_retained).sum()
    }

    pub fn converged(&self) -> bool {
        self.nodes.iter().all(|n| n.converged)
    }

    pub fn predict(&self, x: &[T]) -> Result<u32> {
        Ok(self.predict_traced(x)?.label)
    }

    pub fn predict_traced(&self, x: &[T]) -> Result<Trace> {
        let z = self.feature_map.transform(x)?;
        self.predict_mapped(&z)
    }

    fn predict_mapped(&self, z: &[T]) -> Result<Trace> {
        let u = self.classes.len();
        let (mut lo, mut hi) = (0, u - 1);
        let mut steps = Vec::with_capacity(u - 1);
        while lo < hi {
            let node = &self.nodes[pair_index(u, lo, hi)];
            let (a, b) = (self.classes[lo], self.classes[hi]);
            match node.classify(z)? {
                Side::Plus => {
                    steps.push((a, b, b));
                    hi -= 1;
                }
                Side::Minus => {
                    steps.push((a, b, a));
                    lo += 1;
                }
            }
        }
        Ok(Trace {
            label: self.classes[lo],
            steps,
        })
    }

    pub fn predict_batch(&self, d: &Dataset<T>) -> Result<Vec<u32>> {
        if !d.is_empty() && d.dim() != self.input_dim() {
            return Err(Error::Dimension {
                expected: self.input_dim(),
                got: d.dim(),
            });
        }
        d.points()
            .par_iter()
            .map(|p| self.predict(&p.features))
            .collect()
    }

    /// Routes each point to every node involving its class and updates the
    /// touched nodes. Untouched nodes are left as they are; on error the
    /// model is unchanged.
    pub fn update(&mut self, batch: &Dataset<T>) -> Result<DagUpdate> {
        self.update_with(batch, self.policy)
    }

    pub fn update_with(&mut self, batch: &Dataset<T>, policy: ScreenPolicy) -> Result<DagUpdate> {
        if let Some(&c) = batch
            .classes()
            .iter()
            .find(|c| self.classes.binary_search(c).is_err())
        {
            return Err(Error::UnknownClass(c));
        }
        let groups = group(&self.classes, &self.feature_map, batch)?;
        let u = self.classes.len();
        let hp = self.hp;
        let results = (0..u)
            .flat_map(|i| (i + 1..u).map(move |j| (i, j)))
            .collect::<Vec<_>>()
            .into_par_iter()
            .map(|(i, j)| {
                if groups[i].rows() == 0 && groups[j].rows() == 0 {
                    return Ok(None);
                }
                let mut node = self.nodes[pair_index(u, i, j)].clone();
                let rep = update(&mut node, &groups[i], &groups[j], &hp, policy)?;
                Ok(Some((pair_index(u, i, j), node, rep)))
            })
            .collect::<Result<Vec<_>>>()?;
        let mut out = DagUpdate::default();
        for (k, node, rep) in results.into_iter().flatten() {
            self.nodes[k] = node;
            out.nodes += 1;
            out.admitted += rep.admitted;
            out.removed += rep.removed;
        }
        Ok(out)
    }

    pub fn evaluate(&self, test: &Dataset<T>) -> Result<MetricsReport> {
        let start = Instant::now();
        let pred = self.predict_batch(test)?;
        let predict_seconds = start.elapsed().as_secs_f64();
        let mut per: BTreeMap<u32, (usize, usize)> = BTreeMap::new();
        for (p, &y) in test.points().iter().zip(&pred) {
            let e = per.entry(p.label).or_default();
            e.1 += 1;
            if y == p.label {
                e.0 += 1;
            }
        }
        let correct: usize = per.values().map(|v| v.0).sum();
        let ratio = |c: usize, n: usize| if n == 0 { 0.0 } else { c as f64 / n as f64 };
        Ok(MetricsReport {
            accuracy: ratio(correct, test.len()),
            per_class: per
                .into_iter()
                .map(|(k, (c, n))| (k.to_string(), ratio(c, n)))
                .collect(),
            n_sv: self.n_sv(),
            train_seconds: 0.0,
            predict_seconds,
            converged: self.converged(),
        })
    }
}

/// Totals of one [`DagModel::update`].
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct DagUpdate {
    /// Nodes that received points.
    pub nodes: usize,
    /// Point admissions summed over nodes.
    pub admitted: usize,
    /// Forgotten points summed over nodes.
    pub removed: usize,
}

/// Evaluation summary, serialized as JSON by the command-line tool.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub accuracy: f64,
    /// Accuracy per true label (keys are labels).
    pub per_class: BTreeMap<String, f64>,
    pub n_sv: usize,
    pub train_seconds: f64,
    pub predict_seconds: f64,
    pub converged: bool,
}
