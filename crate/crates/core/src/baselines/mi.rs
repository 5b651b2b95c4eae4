use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{Error, Result};

pub const DEFAULT_BINS: usize = 8;

/// Per-node mutual information with the label, in nats.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MIRanking {
    pub scores: Vec<f64>,
    /// Node indices by descending score, ties by index.
    pub order: Vec<usize>,
}

impl MIRanking {
    pub fn from_scores(scores: Vec<f64>) -> Self {
        let mut order: Vec<usize> = (0..scores.len()).collect();
        order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]).then(a.cmp(&b)));
        Self { scores, order }
    }
}

/// Scalar summary of one node in one sample: the log of the sample
/// variance over its features, or the raw value when there is only one.
pub fn summary(values: &[f64]) -> f64 {
    if values.len() == 1 {
        return values[0];
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0);
    (var + 1e-12).ln()
}

/// Equal-frequency bin of every value; tied values share the bin of the
/// first of them in sorted order.
pub fn equal_frequency_bins(values: &[f64], bins: usize) -> Vec<usize> {
    let n = values.len();
    let mut idx: Vec<usize> = (0..n).collect();
    idx.sort_by(|&a, &b| values[a].total_cmp(&values[b]).then(a.cmp(&b)));
    let mut out = vec![0; n];
    let mut rank = 0;
    while rank < n {
        let mut end = rank;
        while end + 1 < n && values[idx[end + 1]] == values[idx[rank]] {
            end += 1;
        }
        let bin = rank * bins / n;
        idx[rank..=end].iter().for_each(|&i| out[i] = bin);
        rank = end + 1;
    }
    out
}

/// Plug-in mutual information (nats) of two discrete variables.
pub fn discrete_mi(a: &[usize], b: &[usize]) -> f64 {
    let n = a.len();
    if n == 0 {
        return 0.0;
    }
    let na = a.iter().max().map_or(0, |m| m + 1);
    let nb = b.iter().max().map_or(0, |m| m + 1);
    let mut joint = vec![0usize; na * nb];
    let (mut pa, mut pb) = (vec![0usize; na], vec![0usize; nb]);
    for (&x, &y) in a.iter().zip(b) {
        joint[x * nb + y] += 1;
        pa[x] += 1;
        pb[y] += 1;
    }
    let nf = n as f64;
    let mut mi = 0.0;
    for x in 0..na {
        for y in 0..nb {
            let c = joint[x * nb + y];
            if c > 0 {
                let p = c as f64 / nf;
                mi += p * (p * nf * nf / (pa[x] as f64 * pb[y] as f64)).ln();
            }
        }
    }
    mi.max(0.0)
}

/// MI between binned scalar summaries and labels.
pub fn mi_from_summaries(summaries: &[f64], labels: &[usize], bins: usize) -> Result<f64> {
    if bins < 2 {
        return Err(Error::Parameter(format!("need at least 2 bins, got {bins}")));
    }
    if summaries.len() != labels.len() || summaries.is_empty() {
        return Err(Error::Dimension {
            op: "mutual information",
            shapes: vec![vec![summaries.len()], vec![labels.len()]],
        });
    }
    Ok(discrete_mi(&equal_frequency_bins(summaries, bins), labels))
}

pub fn mi_rank(data: &Dataset, bins: usize) -> Result<MIRanking> {
    if data.is_empty() {
        return Err(Error::Parameter("dataset is empty".into()));
    }
    let scores = (0..data.n_nodes())
        .map(|node| {
            let s: Vec<f64> = (0..data.len()).map(|i| summary(data.node_features(i, node))).collect();
            mi_from_summaries(&s, data.labels(), bins)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(MIRanking::from_scores(scores))
}
