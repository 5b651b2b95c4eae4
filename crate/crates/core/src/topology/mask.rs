use crate::error::{Error, Result};
use crate::topology::{BayesNet, DistanceMatrix};

/// Which node pairs each conditional distribution may place mass on.
///
/// `cond_mask(v)[i * n + j]` is true when vertex `v` may select node `j`
/// given its parent selected node `i`: `D[i][j] <= T_v` and `i != j`.
///
/// On top of these raw masks, `alive(v)` records which nodes vertex `v` can
/// take while the rest of its subtree still has an admissible assignment.
/// Samplers use the effective masks (raw masks restricted to alive nodes),
/// which removes dead ends without changing the set of reachable edge-feasible
/// configurations.
#[derive(Debug, Clone, PartialEq)]
pub struct FeasibilityMask {
    n: usize,
    thresholds: Vec<f64>,
    root: usize,
    root_mask: Vec<bool>,
    cond: Vec<Option<Vec<bool>>>,
    alive: Vec<Vec<bool>>,
}

impl FeasibilityMask {
    /// Allows every pair, including `i == j`. The conditional layer then
    /// reduces to independent per-vertex distributions when its rows agree.
    pub fn unrestricted(n: usize, net: &BayesNet) -> Self {
        let m = net.len();
        Self {
            n,
            thresholds: vec![f64::INFINITY; m],
            root: net.root(),
            root_mask: vec![true; n],
            cond: (0..m).map(|v| net.parent(v).map(|_| vec![true; n * n])).collect(),
            alive: vec![vec![true; n]; m],
        }
    }

    pub fn n_nodes(&self) -> usize {
        self.n
    }

    pub fn n_vertices(&self) -> usize {
        self.cond.len()
    }

    pub fn root(&self) -> usize {
        self.root
    }

    /// The global threshold (the root's slot when thresholds are per edge).
    pub fn threshold(&self) -> f64 {
        self.thresholds[self.root]
    }

    pub fn thresholds(&self) -> &[f64] {
        &self.thresholds
    }

    pub fn root_mask(&self) -> &[bool] {
        &self.root_mask
    }

    pub fn cond_mask(&self, v: usize) -> Option<&[bool]> {
        self.cond[v].as_deref()
    }

    pub fn alive(&self, v: usize) -> &[bool] {
        &self.alive[v]
    }

    /// Raw mask entry for vertex `v`, parent node `i`, own node `j`.
    pub fn allowed(&self, v: usize, i: usize, j: usize) -> bool {
        self.cond[v].as_ref().is_some_and(|m| m[i * self.n + j])
    }

    pub fn effective_root(&self) -> Vec<bool> {
        self.alive[self.root].clone()
    }

    /// Raw mask of a non-root vertex restricted to its alive columns.
    pub fn effective_cond(&self, v: usize) -> Option<Vec<bool>> {
        let raw = self.cond[v].as_ref()?;
        let n = self.n;
        Some(
            raw.iter()
                .enumerate()
                .map(|(idx, &ok)| ok && self.alive[v][idx % n])
                .collect(),
        )
    }

    /// Number of admissible `(parent node, node)` pairs in the raw mask.
    pub fn feasible_pairs(&self, v: usize) -> usize {
        self.cond[v].as_ref().map_or(0, |m| m.iter().filter(|&&b| b).count())
    }
}

pub fn build_masks(d: &DistanceMatrix, net: &BayesNet, threshold: f64) -> Result<FeasibilityMask> {
    build_masks_per_edge(d, net, &vec![threshold; net.len()])
}

/// Masks with one threshold per vertex, applied to the edge between that
/// vertex and its parent. The root's entry is kept as the global value.
pub fn build_masks_per_edge(
    d: &DistanceMatrix,
    net: &BayesNet,
    thresholds: &[f64],
) -> Result<FeasibilityMask> {
    if thresholds.len() != net.len() {
        return Err(Error::Parameter(format!(
            "expected {} thresholds, got {}",
            net.len(),
            thresholds.len()
        )));
    }
    if let Some(t) = thresholds.iter().find(|t| t.is_nan() || **t < 0.0) {
        return Err(Error::Parameter(format!("threshold must be nonnegative, got {t}")));
    }
    let n = d.len();
    let m = net.len();
    let cond: Vec<Option<Vec<bool>>> = (0..m)
        .map(|v| {
            net.parent(v).map(|_| {
                (0..n * n)
                    .map(|idx| {
                        let (i, j) = (idx / n, idx % n);
                        i != j && d.get(i, j) <= thresholds[v]
                    })
                    .collect()
            })
        })
        .collect();

    let mut alive = vec![vec![true; n]; m];
    for &v in net.order().iter().rev() {
        for &c in net.children(v) {
            let mask = cond[c].as_ref().expect("child has a mask");
            for i in 0..n {
                if alive[v][i] {
                    alive[v][i] = (0..n).any(|j| mask[i * n + j] && alive[c][j]);
                }
            }
        }
        if !alive[v].iter().any(|&a| a) {
            return Err(Error::InfeasibleConstraints { vertex: v });
        }
    }

    Ok(FeasibilityMask {
        n,
        thresholds: thresholds.to_vec(),
        root: net.root(),
        root_mask: vec![true; n],
        cond,
        alive,
    })
}
