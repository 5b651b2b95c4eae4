use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::topology::{CommGraph, DistanceMatrix};

pub const ENUMERATION_MAX_NODES: usize = 12;
pub const ENUMERATION_MAX_VERTICES: usize = 4;

/// One node index per communication-graph vertex, indexed by vertex id.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct HardSelection {
    pub assignment: Vec<usize>,
}

impl HardSelection {
    pub fn new(assignment: Vec<usize>) -> Self {
        Self { assignment }
    }

    pub fn len(&self) -> usize {
        self.assignment.len()
    }

    pub fn is_empty(&self) -> bool {
        self.assignment.is_empty()
    }

    pub fn node(&self, vertex: usize) -> usize {
        self.assignment[vertex]
    }

    pub fn is_distinct(&self) -> bool {
        let mut seen = self.assignment.clone();
        seen.sort_unstable();
        seen.windows(2).all(|w| w[0] != w[1])
    }
}

impl std::fmt::Display for HardSelection {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let parts: Vec<String> = self.assignment.iter().map(usize::to_string).collect();
        write!(f, "{}", parts.join(";"))
    }
}

fn edge_threshold(thresholds: &[f64], child: usize) -> f64 {
    if thresholds.len() == 1 {
        thresholds[0]
    } else {
        thresholds[child]
    }
}

/// Every communicating pair uses two different nodes at most `T` apart.
/// `thresholds` holds either one global value or one value per vertex.
pub fn check_edges(sel: &HardSelection, d: &DistanceMatrix, graph: &CommGraph, thresholds: &[f64]) -> bool {
    if sel.len() != graph.len() || sel.assignment.iter().any(|&n| n >= d.len()) {
        return false;
    }
    graph.edges().into_iter().all(|(child, parent)| {
        let (a, b) = (sel.node(child), sel.node(parent));
        a != b && d.get(a, b) <= edge_threshold(thresholds, child)
    })
}

/// Edge constraints plus pairwise-distinct node indices.
pub fn check_selection(sel: &HardSelection, d: &DistanceMatrix, graph: &CommGraph, thresholds: &[f64]) -> bool {
    sel.is_distinct() && check_edges(sel, d, graph, thresholds)
}

/// All assignments passing [`check_selection`], in lexicographic order of
/// the assignment vector.
pub fn enumerate_feasible(d: &DistanceMatrix, graph: &CommGraph, thresholds: &[f64]) -> Result<Vec<HardSelection>> {
    let (n, m) = (d.len(), graph.len());
    if n > ENUMERATION_MAX_NODES || m > ENUMERATION_MAX_VERTICES {
        return Err(Error::Size(format!(
            "enumeration limited to N <= {ENUMERATION_MAX_NODES}, M <= {ENUMERATION_MAX_VERTICES}; got N = {n}, M = {m}"
        )));
    }
    let mut out = Vec::new();
    let mut assignment = vec![0usize; m];
    let total = n.pow(m as u32);
    for code in 0..total {
        let mut rest = code;
        for slot in assignment.iter_mut().rev() {
            *slot = rest % n;
            rest /= n;
        }
        let sel = HardSelection::new(assignment.clone());
        if check_selection(&sel, d, graph, thresholds) {
            out.push(sel);
        }
    }
    Ok(out)
}
