//! Node geometry, communication graphs and distance-threshold constraints.

mod feasible;
mod graph;
mod layout;
mod mask;
mod spec;

pub use feasible::{
    check_edges, check_selection, enumerate_feasible, HardSelection, ENUMERATION_MAX_NODES,
    ENUMERATION_MAX_VERTICES,
};
pub use graph::{transpose_to_bayesnet, BayesNet, CommGraph};
pub use layout::{build_distance_matrix, DistanceMatrix, NodeLayout};
pub use mask::{build_masks, build_masks_per_edge, FeasibilityMask};
pub use spec::{CommTopology, TopologyKind, TopologySpec};
