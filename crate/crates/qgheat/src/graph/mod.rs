//! Quantum-graph model: metric graph, vertex conditions, edge potentials.

pub mod condition;
pub mod io;
pub mod model;
pub mod potential;
pub mod quantum;

pub use condition::{
    check_non_robin, check_self_adjoint, compute_sigma, C64, CMatrix, VertexCondition,
};
pub use io::{load_graph, parse_graph, LoadError};
pub use model::{Edge, EdgeEnd, MetricGraph, Point, Vertex};
pub use potential::EdgePotential;
pub use quantum::{ConditionKind, QuantumGraph};
