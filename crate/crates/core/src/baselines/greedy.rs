use crate::baselines::MIRanking;
use crate::error::{Error, Result};
use crate::topology::{transpose_to_bayesnet, BayesNet, CommGraph, DistanceMatrix, HardSelection};

struct Problem<'a> {
    d: &'a DistanceMatrix,
    net: BayesNet,
    thresholds: Vec<f64>,
}

impl Problem<'_> {
    fn admissible(&self, v: usize, node: usize, assignment: &[Option<usize>]) -> bool {
        if assignment.contains(&Some(node)) {
            return false;
        }
        match self.net.parent(v) {
            None => true,
            Some(p) => {
                let pn = assignment[p].expect("parents are filled first");
                self.d.get(pn, node) <= self.thresholds[v]
            }
        }
    }

    /// Whether the vertices from `pos` on (topological order) can still be
    /// filled with unused nodes.
    fn completable(&self, pos: usize, assignment: &mut Vec<Option<usize>>) -> bool {
        let order = self.net.order();
        if pos == order.len() {
            return true;
        }
        let v = order[pos];
        for node in 0..self.d.len() {
            if self.admissible(v, node, assignment) {
                assignment[v] = Some(node);
                let ok = self.completable(pos + 1, assignment);
                assignment[v] = None;
                if ok {
                    return true;
                }
            }
        }
        false
    }
}

/// Fills the vertices in topological order. For each vertex the ranking is
/// scanned from the top; the first unused node that satisfies the edge to
/// the parent and still admits a feasible completion is bound. Returns
/// `None` when some vertex exhausts the ranking.
pub fn greedy_constrained_select(
    ranking: &MIRanking,
    d: &DistanceMatrix,
    graph: &CommGraph,
    thresholds: &[f64],
) -> Result<Option<HardSelection>> {
    if ranking.order.len() != d.len() {
        return Err(Error::Parameter(format!(
            "ranking covers {} nodes, layout has {}",
            ranking.order.len(),
            d.len()
        )));
    }
    let m = graph.len();
    if m > d.len() {
        return Err(Error::Parameter(format!("cannot place {m} vertices on {} nodes", d.len())));
    }
    let thresholds = match thresholds.len() {
        1 => vec![thresholds[0]; m],
        k if k == m => thresholds.to_vec(),
        k => return Err(Error::Parameter(format!("expected 1 or {m} thresholds, got {k}"))),
    };
    let problem = Problem {
        d,
        net: transpose_to_bayesnet(graph)?,
        thresholds,
    };
    let mut assignment: Vec<Option<usize>> = vec![None; m];
    for pos in 0..m {
        let v = problem.net.order()[pos];
        let mut bound = false;
        for &node in &ranking.order {
            if !problem.admissible(v, node, &assignment) {
                continue;
            }
            assignment[v] = Some(node);
            if problem.completable(pos + 1, &mut assignment) {
                bound = true;
                break;
            }
            assignment[v] = None;
        }
        if !bound {
            return Ok(None);
        }
    }
    Ok(Some(HardSelection::new(
        assignment.into_iter().map(|a| a.expect("all bound")).collect(),
    )))
}
