//! Graph description files (JSON, UTF-8).
//!
//! ```json
//! {
//!   "vertices": [
//!     {"id": "v0", "bc": {"type": "kirchhoff"}},
//!     {"id": "v1", "bc": {"type": "matrix", "A": [[[1.0, 0.0]]], "B": [[[0.0, 0.0]]]}}
//!   ],
//!   "edges": [
//!     {"id": "e0", "from": "v0", "to": "v1", "length": 3.141592653589793,
//!      "potential": {"cosine": [0.0, 0.0, 1.0]}}
//!   ]
//! }
//! ```
//!
//! Matrix entries are `[re, im]` pairs; rows are ordered by the ids of the
//! edges adjacent to the vertex, ascending (a loop contributes its two ends
//! in coordinate order). Edges in the file are parametrized from `"from"` to
//! `"to"`; on load every edge is re-oriented to run from its lexicographically
//! smaller endpoint id, reflecting the potential accordingly.

use super::condition::{C64, CMatrix};
use super::model::{Edge, MetricGraph, Vertex};
use super::potential::EdgePotential;
use super::quantum::{ConditionKind, QuantumGraph};
use crate::error::QgError;
use serde::Deserialize;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum LoadError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    /// serde_json errors carry line/column positions in their message.
    #[error("parse error: {0}")]
    Parse(#[from] serde_json::Error),
    #[error(transparent)]
    Graph(#[from] QgError),
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct GraphFile {
    vertices: Vec<VertexSpec>,
    edges: Vec<EdgeSpec>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct VertexSpec {
    id: String,
    bc: BcSpec,
}

#[derive(Debug, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase", deny_unknown_fields)]
enum BcSpec {
    Kirchhoff,
    Dirichlet,
    Neumann,
    Matrix {
        #[serde(rename = "A")]
        a: Vec<Vec<[f64; 2]>>,
        #[serde(rename = "B")]
        b: Vec<Vec<[f64; 2]>>,
    },
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct EdgeSpec {
    id: String,
    from: String,
    to: String,
    length: f64,
    #[serde(default)]
    potential: Option<PotentialSpec>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct PotentialSpec {
    cosine: Vec<f64>,
}

fn matrix_from_rows(vertex: &str, rows: &[Vec<[f64; 2]>]) -> Result<CMatrix, QgError> {
    let n = rows.len();
    if n == 0 || rows.iter().any(|r| r.len() != n) {
        return Err(QgError::InvalidGraph {
            entity: format!("vertex {vertex}"),
            invariant: "condition matrices must be square and non-empty".into(),
        });
    }
    Ok(CMatrix::from_fn(n, n, |r, c| {
        C64::new(rows[r][c][0], rows[r][c][1])
    }))
}

/// Parse a graph description from a JSON string.
pub fn parse_graph(text: &str) -> Result<QuantumGraph, LoadError> {
    let file: GraphFile = serde_json::from_str(text)?;

    let vertices: Vec<Vertex> = file
        .vertices
        .iter()
        .map(|v| Vertex { id: v.id.clone() })
        .collect();

    let mut edges = Vec::with_capacity(file.edges.len());
    let mut potentials = Vec::with_capacity(file.edges.len());
    for spec in &file.edges {
        let from = vertices.iter().position(|v| v.id == spec.from).ok_or_else(|| {
            QgError::InvalidGraph {
                entity: format!("edge {}", spec.id),
                invariant: format!("unknown vertex id {:?} in \"from\"", spec.from),
            }
        })?;
        let to = vertices.iter().position(|v| v.id == spec.to).ok_or_else(|| {
            QgError::InvalidGraph {
                entity: format!("edge {}", spec.id),
                invariant: format!("unknown vertex id {:?} in \"to\"", spec.to),
            }
        })?;
        if !(spec.length.is_finite() && spec.length > 0.0) {
            return Err(QgError::InvalidGraph {
                entity: format!("edge {}", spec.id),
                invariant: "edge length must be finite and strictly positive".into(),
            }
            .into());
        }
        let coeffs = spec
            .potential
            .as_ref()
            .map(|p| p.cosine.clone())
            .unwrap_or_default();
        let mut potential = EdgePotential::new(coeffs, spec.length);
        let (from, to) = if spec.to < spec.from {
            // Re-orient to the lower-id endpoint.
            potential = potential.reversed();
            (to, from)
        } else {
            (from, to)
        };
        edges.push(Edge {
            id: spec.id.clone(),
            from,
            to,
            length: spec.length,
        });
        potentials.push(potential);
    }

    let graph = MetricGraph::new(vertices, edges)?;
    let mut kinds = Vec::with_capacity(file.vertices.len());
    for v in &file.vertices {
        kinds.push(match &v.bc {
            BcSpec::Kirchhoff => ConditionKind::Kirchhoff,
            BcSpec::Dirichlet => ConditionKind::Dirichlet,
            BcSpec::Neumann => ConditionKind::Neumann,
            BcSpec::Matrix { a, b } => ConditionKind::Matrix {
                a: matrix_from_rows(&v.id, a)?,
                b: matrix_from_rows(&v.id, b)?,
            },
        });
    }
    Ok(QuantumGraph::from_kinds(graph, &kinds, potentials)?)
}

/// Load a graph description from a file.
pub fn load_graph(path: &str) -> Result<QuantumGraph, LoadError> {
    let text = std::fs::read_to_string(path).map_err(|source| LoadError::Io {
        path: path.to_string(),
        source,
    })?;
    parse_graph(&text)
}

#[cfg(test)]
mod tests {
    use super::*;

    const INTERVAL: &str = r#"{
        "vertices": [
            {"id": "v0", "bc": {"type": "neumann"}},
            {"id": "v1", "bc": {"type": "neumann"}}
        ],
        "edges": [
            {"id": "e0", "from": "v0", "to": "v1", "length": 3.141592653589793,
             "potential": {"cosine": [0.0, 0.0, 1.0]}}
        ]
    }"#;

    #[test]
    fn parses_interval() {
        let q = parse_graph(INTERVAL).unwrap();
        assert_eq!(q.edge_count(), 1);
        assert_eq!(q.vertex_count(), 2);
        assert!((q.eval_potential(0, 0.0, 0).unwrap() - 1.0).abs() < 1e-14);
    }

    #[test]
    fn missing_length_names_position() {
        let text = r#"{
            "vertices": [
                {"id": "v0", "bc": {"type": "neumann"}},
                {"id": "v1", "bc": {"type": "neumann"}}
            ],
            "edges": [{"id": "e0", "from": "v0", "to": "v1"}]
        }"#;
        let err = parse_graph(text).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("length"), "message should name the field: {msg}");
        assert!(matches!(err, LoadError::Parse(_)));
    }

    #[test]
    fn robin_condition_rejected_with_vertex_name() {
        let text = r#"{
            "vertices": [
                {"id": "v0", "bc": {"type": "matrix",
                    "A": [[[1.0, 0.0]]], "B": [[[1.0, 0.0]]]}},
                {"id": "v1", "bc": {"type": "neumann"}}
            ],
            "edges": [{"id": "e0", "from": "v0", "to": "v1", "length": 1.0}]
        }"#;
        let err = parse_graph(text).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("v0") && msg.contains("non-Robin"), "{msg}");
    }

    #[test]
    fn orientation_normalization_reverses_potential() {
        // "from" has the larger id, so the edge is flipped on load.
        let text = r#"{
            "vertices": [
                {"id": "b", "bc": {"type": "neumann"}},
                {"id": "a", "bc": {"type": "neumann"}}
            ],
            "edges": [{"id": "e0", "from": "b", "to": "a", "length": 1.0,
                       "potential": {"cosine": [0.0, 1.0]}}]
        }"#;
        let q = parse_graph(text).unwrap();
        let edge = &q.graph().edges()[0];
        assert_eq!(q.graph().vertices()[edge.from].id, "a");
        // cos(pi x) reversed is cos(pi (1-x)) = -cos(pi x).
        assert!((q.eval_potential(0, 0.0, 0).unwrap() + 1.0).abs() < 1e-14);
    }
}
