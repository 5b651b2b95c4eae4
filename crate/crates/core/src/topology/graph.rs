use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Communication tree: every non-root vertex transmits to exactly one
/// parent; the root aggregates.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "GraphRecord", into = "GraphRecord")]
pub struct CommGraph {
    /// `targets[v]` is the vertex `v` transmits to, `None` for the root.
    targets: Vec<Option<usize>>,
}

impl CommGraph {
    pub fn from_targets(targets: Vec<Option<usize>>) -> Result<Self> {
        validate_tree(&targets)?;
        Ok(Self { targets })
    }

    /// Builds from directed `(child, parent)` edges over `m` vertices.
    pub fn from_edges(m: usize, edges: &[(usize, usize)]) -> Result<Self> {
        let mut targets = vec![None; m];
        for &(child, parent) in edges {
            if child >= m || parent >= m {
                return Err(Error::InvalidTopology(format!(
                    "edge ({child}, {parent}) out of range for {m} vertices"
                )));
            }
            if targets[child].replace(parent).is_some() {
                return Err(Error::InvalidTopology(format!(
                    "vertex {child} has more than one transmission target"
                )));
            }
        }
        Self::from_targets(targets)
    }

    /// All leaves transmit directly to `root`.
    pub fn star(m: usize, root: usize) -> Result<Self> {
        if root >= m {
            return Err(Error::InvalidTopology(format!("root {root} out of range for {m} vertices")));
        }
        let targets = (0..m).map(|v| (v != root).then_some(root)).collect();
        Self::from_targets(targets)
    }

    /// Chain `0 -> 1 -> ... -> m-1`, rooted at the last vertex.
    pub fn line(m: usize) -> Result<Self> {
        if m == 0 {
            return Err(Error::InvalidTopology("graph needs at least one vertex".into()));
        }
        Self::line_rooted(m, m - 1)
    }

    /// Path graph whose edges all point toward `root`.
    pub fn line_rooted(m: usize, root: usize) -> Result<Self> {
        if root >= m {
            return Err(Error::InvalidTopology(format!("root {root} out of range for {m} vertices")));
        }
        let targets = (0..m)
            .map(|v| match v.cmp(&root) {
                std::cmp::Ordering::Less => Some(v + 1),
                std::cmp::Ordering::Greater => Some(v - 1),
                std::cmp::Ordering::Equal => None,
            })
            .collect();
        Self::from_targets(targets)
    }

    pub fn len(&self) -> usize {
        self.targets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.targets.is_empty()
    }

    pub fn root(&self) -> usize {
        self.targets.iter().position(Option::is_none).expect("validated tree has a root")
    }

    pub fn target(&self, v: usize) -> Option<usize> {
        self.targets[v]
    }

    pub fn targets(&self) -> &[Option<usize>] {
        &self.targets
    }

    /// Directed `(child, parent)` transmission edges, ordered by child.
    pub fn edges(&self) -> Vec<(usize, usize)> {
        self.targets
            .iter()
            .enumerate()
            .filter_map(|(v, t)| t.map(|p| (v, p)))
            .collect()
    }
}

#[derive(Serialize, Deserialize)]
struct GraphRecord {
    targets: Vec<Option<usize>>,
}

impl From<CommGraph> for GraphRecord {
    fn from(g: CommGraph) -> Self {
        Self { targets: g.targets }
    }
}

impl TryFrom<GraphRecord> for CommGraph {
    type Error = Error;

    fn try_from(r: GraphRecord) -> Result<Self> {
        CommGraph::from_targets(r.targets)
    }
}

fn validate_tree(targets: &[Option<usize>]) -> Result<()> {
    let m = targets.len();
    if m == 0 {
        return Err(Error::InvalidTopology("graph needs at least one vertex".into()));
    }
    let roots = targets.iter().filter(|t| t.is_none()).count();
    if roots != 1 {
        return Err(Error::InvalidTopology(format!("expected exactly one root, found {roots}")));
    }
    for (v, t) in targets.iter().enumerate() {
        if let Some(p) = t {
            if *p >= m {
                return Err(Error::InvalidTopology(format!("vertex {v} targets missing vertex {p}")));
            }
            if *p == v {
                return Err(Error::InvalidTopology(format!("vertex {v} transmits to itself")));
            }
        }
    }
    // every walk toward the root must terminate within m steps
    for start in 0..m {
        let mut v = start;
        let mut steps = 0;
        while let Some(p) = targets[v] {
            v = p;
            steps += 1;
            if steps > m {
                return Err(Error::InvalidTopology(format!("cycle through vertex {start}")));
            }
        }
    }
    Ok(())
}

/// Factorization structure: each vertex conditioned on at most one parent.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct BayesNet {
    parents: Vec<Option<usize>>,
    children: Vec<Vec<usize>>,
    order: Vec<usize>,
}

impl BayesNet {
    pub fn len(&self) -> usize {
        self.parents.len()
    }

    pub fn is_empty(&self) -> bool {
        self.parents.is_empty()
    }

    pub fn root(&self) -> usize {
        self.order[0]
    }

    pub fn parent(&self, v: usize) -> Option<usize> {
        self.parents[v]
    }

    pub fn children(&self, v: usize) -> &[usize] {
        &self.children[v]
    }

    /// Root-first topological order (breadth-first, children ascending).
    pub fn order(&self) -> &[usize] {
        &self.order
    }

    /// Directed `(parent, child)` conditioning edges, ordered by child.
    pub fn edges(&self) -> Vec<(usize, usize)> {
        self.parents
            .iter()
            .enumerate()
            .filter_map(|(v, p)| p.map(|p| (p, v)))
            .collect()
    }

    /// Reverses every edge back into a communication graph.
    pub fn to_comm_graph(&self) -> CommGraph {
        CommGraph {
            targets: self.parents.clone(),
        }
    }
}

/// Reverses the transmission edges: each vertex is conditioned on the vertex
/// it transmits to.
pub fn transpose_to_bayesnet(graph: &CommGraph) -> Result<BayesNet> {
    validate_tree(&graph.targets)?;
    let m = graph.len();
    let mut children = vec![Vec::new(); m];
    for (child, parent) in graph.edges() {
        children[parent].push(child);
    }
    let mut order = Vec::with_capacity(m);
    order.push(graph.root());
    let mut head = 0;
    while head < order.len() {
        let v = order[head];
        order.extend(children[v].iter().copied());
        head += 1;
    }
    Ok(BayesNet {
        parents: graph.targets.clone(),
        children,
        order,
    })
}
