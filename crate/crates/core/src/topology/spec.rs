use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::topology::{
    build_distance_matrix, build_masks_per_edge, check_edges, check_selection, transpose_to_bayesnet,
    BayesNet, CommGraph, DistanceMatrix, FeasibilityMask, HardSelection, NodeLayout,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TopologyKind {
    Star,
    Line,
    Tree,
}

impl std::str::FromStr for TopologyKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "star" => Ok(Self::Star),
            "line" => Ok(Self::Line),
            "tree" => Ok(Self::Tree),
            other => Err(Error::Parameter(format!("unknown topology kind `{other}`"))),
        }
    }
}

fn default_normalize() -> bool {
    true
}

/// Topology file contents (JSON or TOML).
///
/// ```toml
/// kind = "line"
/// vertices = 3
/// threshold = 0.5
/// normalize = true
/// coords = [[0.0, 0.0], [1.0, 0.0], [2.0, 0.0]]
/// ```
///
/// `edges` lists `[child, parent]` pairs and is required for `tree`. When
/// neither `coords` nor `distances` is given, the node layout comes from the
/// task the topology is paired with.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TopologySpec {
    pub kind: TopologyKind,
    pub vertices: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub root: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub edges: Option<Vec<[usize; 2]>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub threshold: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub thresholds: Option<Vec<f64>>,
    #[serde(default = "default_normalize")]
    pub normalize: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub coords: Option<Vec<Vec<f64>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub distances: Option<Vec<Vec<f64>>>,
}

impl TopologySpec {
    pub fn new(kind: TopologyKind, vertices: usize) -> Self {
        Self {
            kind,
            vertices,
            root: None,
            edges: None,
            threshold: None,
            thresholds: None,
            normalize: true,
            coords: None,
            distances: None,
        }
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        match path.extension().and_then(|e| e.to_str()) {
            Some("toml") => Ok(toml::from_str(&text)?),
            _ => Ok(serde_json::from_str(&text)?),
        }
    }

    pub fn graph(&self) -> Result<CommGraph> {
        match self.kind {
            TopologyKind::Star => CommGraph::star(self.vertices, self.root.unwrap_or(0)),
            TopologyKind::Line => match self.root {
                Some(r) => CommGraph::line_rooted(self.vertices, r),
                None => CommGraph::line(self.vertices),
            },
            TopologyKind::Tree => {
                let edges = self
                    .edges
                    .as_ref()
                    .ok_or_else(|| Error::InvalidTopology("tree topology needs `edges`".into()))?;
                let pairs: Vec<(usize, usize)> = edges.iter().map(|e| (e[0], e[1])).collect();
                CommGraph::from_edges(self.vertices, &pairs)
            }
        }
    }

    pub fn layout(&self) -> Result<Option<NodeLayout>> {
        match (&self.coords, &self.distances) {
            (Some(_), Some(_)) => Err(Error::Parameter(
                "topology gives both `coords` and `distances`".into(),
            )),
            (Some(c), None) => Ok(Some(NodeLayout::Coords(c.clone()))),
            (None, Some(d)) => Ok(Some(NodeLayout::Distances(d.clone()))),
            (None, None) => Ok(None),
        }
    }

    /// Resolves the description into a topology. `fallback` supplies the layout when
    /// the file carries none; `threshold` overrides the file's value.
    pub fn build(&self, fallback: Option<&NodeLayout>, threshold: Option<f64>) -> Result<CommTopology> {
        let layout = match self.layout()? {
            Some(l) => l,
            None => fallback
                .cloned()
                .ok_or_else(|| Error::Parameter("topology has no node layout".into()))?,
        };
        let d = build_distance_matrix(&layout, self.normalize)?;
        let graph = self.graph()?;
        let thresholds = match (threshold, &self.thresholds, self.threshold) {
            (Some(t), _, _) => vec![t; graph.len()],
            (None, Some(ts), _) => ts.clone(),
            (None, None, Some(t)) => vec![t; graph.len()],
            (None, None, None) => {
                return Err(Error::Parameter("topology has no threshold".into()));
            }
        };
        CommTopology::with_thresholds(d, graph, thresholds)
    }
}

/// Geometry, communication graph and distance threshold(s) of one
/// constrained selection problem.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "TopologyRecord", into = "TopologyRecord")]
pub struct CommTopology {
    distances: DistanceMatrix,
    graph: CommGraph,
    net: BayesNet,
    thresholds: Vec<f64>,
}

impl CommTopology {
    pub fn new(distances: DistanceMatrix, graph: CommGraph, threshold: f64) -> Result<Self> {
        let m = graph.len();
        Self::with_thresholds(distances, graph, vec![threshold; m])
    }

    pub fn with_thresholds(distances: DistanceMatrix, graph: CommGraph, thresholds: Vec<f64>) -> Result<Self> {
        if thresholds.len() != graph.len() {
            return Err(Error::Parameter(format!(
                "expected {} thresholds, got {}",
                graph.len(),
                thresholds.len()
            )));
        }
        if graph.len() > distances.len() {
            return Err(Error::Parameter(format!(
                "cannot place {} vertices on {} nodes",
                graph.len(),
                distances.len()
            )));
        }
        let net = transpose_to_bayesnet(&graph)?;
        Ok(Self {
            distances,
            graph,
            net,
            thresholds,
        })
    }

    /// Same geometry and graph under a new global threshold.
    pub fn at_threshold(&self, threshold: f64) -> Self {
        Self {
            thresholds: vec![threshold; self.graph.len()],
            ..self.clone()
        }
    }

    pub fn distances(&self) -> &DistanceMatrix {
        &self.distances
    }

    pub fn graph(&self) -> &CommGraph {
        &self.graph
    }

    pub fn net(&self) -> &BayesNet {
        &self.net
    }

    pub fn thresholds(&self) -> &[f64] {
        &self.thresholds
    }

    pub fn threshold(&self) -> f64 {
        self.thresholds[self.graph.root()]
    }

    pub fn n_nodes(&self) -> usize {
        self.distances.len()
    }

    pub fn n_vertices(&self) -> usize {
        self.graph.len()
    }

    pub fn masks(&self) -> Result<FeasibilityMask> {
        build_masks_per_edge(&self.distances, &self.net, &self.thresholds)
    }

    pub fn check(&self, sel: &HardSelection) -> bool {
        check_selection(sel, &self.distances, &self.graph, &self.thresholds)
    }

    pub fn check_edges(&self, sel: &HardSelection) -> bool {
        check_edges(sel, &self.distances, &self.graph, &self.thresholds)
    }
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct TopologyRecord {
    distances: DistanceMatrix,
    graph: CommGraph,
    thresholds: Vec<f64>,
}

impl From<CommTopology> for TopologyRecord {
    fn from(t: CommTopology) -> Self {
        Self {
            distances: t.distances,
            graph: t.graph,
            thresholds: t.thresholds,
        }
    }
}

impl TryFrom<TopologyRecord> for CommTopology {
    type Error = Error;

    fn try_from(r: TopologyRecord) -> Result<Self> {
        CommTopology::with_thresholds(r.distances, r.graph, r.thresholds)
    }
}
