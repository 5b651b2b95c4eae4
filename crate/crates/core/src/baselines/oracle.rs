use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::baselines::Evaluator;
use crate::error::{Error, Result};
use crate::topology::{enumerate_feasible, CommGraph, DistanceMatrix, HardSelection};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleResult {
    pub selection: HardSelection,
    pub score: f64,
    pub evaluated: usize,
}

/// Scores every feasible configuration and returns the best, breaking ties
/// toward the lexicographically smallest assignment. Evaluations run on the
/// current rayon pool; the reduction is order-independent.
pub fn oracle_search(
    d: &DistanceMatrix,
    graph: &CommGraph,
    thresholds: &[f64],
    evaluator: &dyn Evaluator,
) -> Result<OracleResult> {
    let feasible = enumerate_feasible(d, graph, thresholds)?;
    if feasible.is_empty() {
        return Err(Error::InfeasibleConstraints { vertex: graph.root() });
    }
    let scores = feasible
        .par_iter()
        .map(|sel| evaluator.score(sel))
        .collect::<Result<Vec<f64>>>()?;
    let mut best = 0;
    for (i, &s) in scores.iter().enumerate() {
        if s > scores[best] {
            best = i;
        }
    }
    Ok(OracleResult {
        selection: feasible[best].clone(),
        score: scores[best],
        evaluated: feasible.len(),
    })
}
