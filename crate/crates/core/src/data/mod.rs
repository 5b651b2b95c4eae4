//! Datasets of per-node feature vectors, planted synthetic tasks and CSV
//! ingestion.

mod planted;
mod tabular;

pub use planted::{
    load_task, make_planted_task, preset, save_task, LayoutSpec, Placement, PlantedSpec, SyntheticTask,
    TaskMetadata, PRESETS,
};
pub use tabular::{feature_column, load_tabular, save_csv, TabularSchema, LABEL_COLUMN};

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::concrete::seeded_rng;
use crate::error::{Error, Result};

/// `samples x N x L` features with one class label per sample.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    n_nodes: usize,
    feature_dim: usize,
    n_classes: usize,
    features: Vec<f64>,
    labels: Vec<usize>,
}

impl Dataset {
    pub fn new(
        n_nodes: usize,
        feature_dim: usize,
        n_classes: usize,
        features: Vec<f64>,
        labels: Vec<usize>,
    ) -> Result<Self> {
        if n_nodes == 0 || feature_dim == 0 || n_classes < 2 {
            return Err(Error::Parameter(format!(
                "need N, L >= 1 and at least 2 classes, got N = {n_nodes}, L = {feature_dim}, classes = {n_classes}"
            )));
        }
        if features.len() != labels.len() * n_nodes * feature_dim {
            return Err(Error::Dimension {
                op: "dataset",
                shapes: vec![vec![features.len()], vec![labels.len(), n_nodes, feature_dim]],
            });
        }
        if let Some(&bad) = labels.iter().find(|&&y| y >= n_classes) {
            return Err(Error::Parameter(format!("label {bad} outside {n_classes} classes")));
        }
        Ok(Self {
            n_nodes,
            feature_dim,
            n_classes,
            features,
            labels,
        })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn n_nodes(&self) -> usize {
        self.n_nodes
    }

    pub fn feature_dim(&self) -> usize {
        self.feature_dim
    }

    pub fn n_classes(&self) -> usize {
        self.n_classes
    }

    /// Row-major `[samples, N * L]`.
    pub fn features(&self) -> &[f64] {
        &self.features
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    /// Sample `i` as `N * L` values, node-major.
    pub fn sample(&self, i: usize) -> &[f64] {
        let w = self.n_nodes * self.feature_dim;
        &self.features[i * w..(i + 1) * w]
    }

    pub fn node_features(&self, i: usize, node: usize) -> &[f64] {
        let l = self.feature_dim;
        &self.sample(i)[node * l..(node + 1) * l]
    }

    pub fn subset(&self, indices: &[usize]) -> Self {
        let mut features = Vec::with_capacity(indices.len() * self.n_nodes * self.feature_dim);
        for &i in indices {
            features.extend_from_slice(self.sample(i));
        }
        Self {
            features,
            labels: indices.iter().map(|&i| self.labels[i]).collect(),
            ..*self
        }
    }

    /// Features of `nodes` only, concatenated per sample: `[samples, |nodes| * L]`.
    pub fn gather(&self, nodes: &[usize]) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.len() * nodes.len() * self.feature_dim);
        for i in 0..self.len() {
            for &n in nodes {
                out.extend_from_slice(self.node_features(i, n));
            }
        }
        out
    }

    pub fn class_counts(&self) -> Vec<usize> {
        let mut counts = vec![0; self.n_classes];
        self.labels.iter().for_each(|&y| counts[y] += 1);
        counts
    }

    /// Shuffled train / validation / test partition. `test_frac` of the data
    /// is held out first; `val_frac` of the remainder is used for validation.
    pub fn split(&self, test_frac: f64, val_frac: f64, seed: u64) -> Result<Splits> {
        for f in [test_frac, val_frac] {
            if !(0.0..1.0).contains(&f) {
                return Err(Error::Parameter(format!("split fraction {f} outside [0, 1)")));
            }
        }
        let mut idx: Vec<usize> = (0..self.len()).collect();
        idx.shuffle(&mut seeded_rng(seed));
        let n_test = (self.len() as f64 * test_frac).round() as usize;
        let rest = self.len() - n_test;
        let n_val = (rest as f64 * val_frac).round() as usize;
        let n_train = rest - n_val;
        if n_train == 0 || (test_frac > 0.0 && n_test == 0) || (val_frac > 0.0 && n_val == 0) {
            return Err(Error::Parameter(format!("{} samples are too few to split", self.len())));
        }
        let (test, rest) = idx.split_at(n_test);
        let (val, train) = rest.split_at(n_val);
        let sorted = |s: &[usize]| {
            let mut v = s.to_vec();
            v.sort_unstable();
            v
        };
        Ok(Splits {
            train: self.subset(&sorted(train)),
            val: self.subset(&sorted(val)),
            test: self.subset(&sorted(test)),
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Splits {
    pub train: Dataset,
    pub val: Dataset,
    pub test: Dataset,
}

pub const DEFAULT_TEST_FRACTION: f64 = 0.25;
pub const DEFAULT_VAL_FRACTION: f64 = 0.2;
