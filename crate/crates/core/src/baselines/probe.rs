use nalgebra::{DMatrix, DVector};

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::topology::HardSelection;

/// Relative shrinkage added to the pooled covariance diagonal.
pub const DEFAULT_RIDGE: f64 = 1e-3;

/// Scores a fixed node selection. Implementations must be deterministic.
pub trait Evaluator: Sync {
    fn score(&self, sel: &HardSelection) -> Result<f64>;
}

/// Adapts a closure into an [`Evaluator`].
pub struct FnEvaluator<F>(pub F);

impl<F> Evaluator for FnEvaluator<F>
where
    F: Fn(&HardSelection) -> Result<f64> + Sync,
{
    fn score(&self, sel: &HardSelection) -> Result<f64> {
        (self.0)(sel)
    }
}

/// Linear discriminant analysis with a shared, shrunk covariance.
#[derive(Debug, Clone)]
pub struct Lda {
    weights: DMatrix<f64>,
    bias: Vec<f64>,
}

impl Lda {
    /// Fits on row-major `x` (`labels.len()` rows of `dim` values).
    pub fn fit(x: &[f64], dim: usize, labels: &[usize], n_classes: usize, ridge: f64) -> Result<Self> {
        let n = labels.len();
        if dim == 0 || x.len() != n * dim || n == 0 {
            return Err(Error::Dimension {
                op: "lda fit",
                shapes: vec![vec![x.len()], vec![n, dim]],
            });
        }
        let mut means = DMatrix::<f64>::zeros(dim, n_classes);
        let mut counts = vec![0usize; n_classes];
        for (row, &y) in x.chunks(dim).zip(labels) {
            counts[y] += 1;
            for (k, v) in row.iter().enumerate() {
                means[(k, y)] += v;
            }
        }
        for (c, &count) in counts.iter().enumerate() {
            if count > 0 {
                means.column_mut(c).scale_mut(1.0 / count as f64);
            }
        }
        let mut cov = DMatrix::<f64>::zeros(dim, dim);
        let mut centered = DVector::<f64>::zeros(dim);
        for (row, &y) in x.chunks(dim).zip(labels) {
            for k in 0..dim {
                centered[k] = row[k] - means[(k, y)];
            }
            cov.syger(1.0, &centered, &centered, 1.0);
        }
        let dof = (n as f64 - counts.iter().filter(|&&c| c > 0).count() as f64).max(1.0);
        cov.scale_mut(1.0 / dof);
        let scale = (cov.trace() / dim as f64).max(1e-12);
        for k in 0..dim {
            cov[(k, k)] += ridge * scale;
        }
        let chol = cov
            .cholesky()
            .ok_or_else(|| Error::LinAlg("pooled covariance is not positive definite".into()))?;
        let weights = chol.solve(&means);
        let bias = (0..n_classes)
            .map(|c| {
                if counts[c] == 0 {
                    f64::NEG_INFINITY
                } else {
                    -0.5 * means.column(c).dot(&weights.column(c)) + (counts[c] as f64 / n as f64).ln()
                }
            })
            .collect();
        Ok(Self { weights, bias })
    }

    pub fn predict(&self, row: &[f64]) -> usize {
        let x = DVector::from_column_slice(row);
        let scores = self.weights.tr_mul(&x);
        let mut best = 0;
        for c in 0..self.bias.len() {
            if scores[c] + self.bias[c] > scores[best] + self.bias[best] {
                best = c;
            }
        }
        best
    }

    pub fn accuracy(&self, x: &[f64], labels: &[usize]) -> f64 {
        if labels.is_empty() {
            return 0.0;
        }
        let dim = self.weights.nrows();
        let hits = x
            .chunks(dim)
            .zip(labels)
            .filter(|(row, &y)| self.predict(row) == y)
            .count();
        hits as f64 / labels.len() as f64
    }
}

/// Fits an LDA probe on `nodes` of `train` and returns its accuracy on `test`.
pub fn lda_accuracy(train: &Dataset, test: &Dataset, nodes: &[usize], ridge: f64) -> Result<f64> {
    if nodes.is_empty() {
        return Err(Error::Parameter("probe needs at least one node".into()));
    }
    if let Some(&bad) = nodes.iter().find(|&&n| n >= train.n_nodes()) {
        return Err(Error::Parameter(format!("node {bad} out of range")));
    }
    let dim = nodes.len() * train.feature_dim();
    let lda = Lda::fit(&train.gather(nodes), dim, train.labels(), train.n_classes(), ridge)?;
    Ok(lda.accuracy(&test.gather(nodes), test.labels()))
}

/// Linear-probe accuracy of a selection: fit on `train`, scored on `test`.
pub struct LinearProbe<'a> {
    pub train: &'a Dataset,
    pub test: &'a Dataset,
    pub ridge: f64,
}

impl<'a> LinearProbe<'a> {
    pub fn new(train: &'a Dataset, test: &'a Dataset) -> Self {
        Self {
            train,
            test,
            ridge: DEFAULT_RIDGE,
        }
    }
}

impl Evaluator for LinearProbe<'_> {
    fn score(&self, sel: &HardSelection) -> Result<f64> {
        lda_accuracy(self.train, self.test, &sel.assignment, self.ridge)
    }
}
