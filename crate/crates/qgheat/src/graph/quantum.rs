//! The quantum graph: metric graph + vertex conditions + edge potentials,
//! with validation of every structural assumption the downstream machinery
//! relies on.

use super::condition::{CMatrix, VertexCondition};
use super::model::{EdgeEnd, MetricGraph, Point};
use super::potential::EdgePotential;
use crate::error::{QgError, Result};

/// Relative tolerance for even-derivative matching across a vertex.
pub const SMOOTHNESS_TOL: f64 = 1e-9;

/// How a vertex condition is specified before the degree is known.
#[derive(Debug, Clone)]
pub enum ConditionKind {
    Kirchhoff,
    Dirichlet,
    Neumann,
    Matrix { a: CMatrix, b: CMatrix },
}

impl ConditionKind {
    pub fn build(&self, vertex_id: &str, degree: usize) -> Result<VertexCondition> {
        match self {
            ConditionKind::Kirchhoff => Ok(VertexCondition::kirchhoff(degree)),
            ConditionKind::Dirichlet => Ok(VertexCondition::dirichlet(degree)),
            ConditionKind::Neumann => Ok(VertexCondition::neumann(degree)),
            ConditionKind::Matrix { a, b } => {
                if a.nrows() != degree || a.ncols() != degree || b.nrows() != degree
                    || b.ncols() != degree
                {
                    return Err(QgError::InvalidGraph {
                        entity: format!("vertex {vertex_id}"),
                        invariant: format!(
                            "condition matrices must be {degree}x{degree} (vertex degree)"
                        ),
                    });
                }
                VertexCondition::from_matrices(vertex_id, a.clone(), b.clone())
            }
        }
    }
}

#[derive(Debug, Clone)]
pub struct QuantumGraph {
    graph: MetricGraph,
    conditions: Vec<VertexCondition>,
    potentials: Vec<EdgePotential>,
}

impl QuantumGraph {
    /// Assemble and validate. Conditions are per vertex (same order as the
    /// metric graph's vertex list), potentials per edge.
    pub fn new(
        graph: MetricGraph,
        conditions: Vec<VertexCondition>,
        potentials: Vec<EdgePotential>,
    ) -> Result<Self> {
        if conditions.len() != graph.vertices().len() {
            return Err(QgError::InvalidGraph {
                entity: "graph".into(),
                invariant: "one boundary condition per vertex required".into(),
            });
        }
        if potentials.len() != graph.edges().len() {
            return Err(QgError::InvalidGraph {
                entity: "graph".into(),
                invariant: "one potential per edge required".into(),
            });
        }
        for (v, cond) in conditions.iter().enumerate() {
            let deg = graph.degree(v);
            if cond.degree() != deg {
                return Err(QgError::InvalidGraph {
                    entity: format!("vertex {}", graph.vertices()[v].id),
                    invariant: format!(
                        "condition dimension {} does not match vertex degree {deg}",
                        cond.degree()
                    ),
                });
            }
        }
        for (e, pot) in potentials.iter().enumerate() {
            let edge = &graph.edges()[e];
            if (pot.length() - edge.length).abs() > 1e-12 * edge.length.max(1.0) {
                return Err(QgError::InvalidGraph {
                    entity: format!("edge {}", edge.id),
                    invariant: "potential length does not match edge length".into(),
                });
            }
            for order in [1, 3] {
                for x in [0.0, edge.length] {
                    if pot.eval_unchecked(x, order).abs() > 1e-12 * (1.0 + pot.sup_bound()) {
                        return Err(QgError::InvalidPotential(format!(
                            "edge {}: odd derivative of order {order} does not vanish at x = {x}",
                            edge.id
                        )));
                    }
                }
            }
        }
        Ok(QuantumGraph {
            graph,
            conditions,
            potentials,
        })
    }

    /// Convenience constructor from condition kinds (degrees filled in).
    pub fn from_kinds(
        graph: MetricGraph,
        kinds: &[ConditionKind],
        potentials: Vec<EdgePotential>,
    ) -> Result<Self> {
        let mut conditions = Vec::with_capacity(kinds.len());
        for (v, kind) in kinds.iter().enumerate() {
            let id = graph.vertices()[v].id.clone();
            conditions.push(kind.build(&id, graph.degree(v))?);
        }
        QuantumGraph::new(graph, conditions, potentials)
    }

    /// An interval [0, length] with the two given endpoint conditions.
    pub fn interval(
        length: f64,
        left: ConditionKind,
        right: ConditionKind,
        potential: EdgePotential,
    ) -> Result<Self> {
        let graph = MetricGraph::new(
            vec![
                super::model::Vertex { id: "v0".into() },
                super::model::Vertex { id: "v1".into() },
            ],
            vec![super::model::Edge {
                id: "e0".into(),
                from: 0,
                to: 1,
                length,
            }],
        )?;
        QuantumGraph::from_kinds(graph, &[left, right], vec![potential])
    }

    /// A star with the given edge lengths; vertex 0 is the center.
    pub fn star(
        lengths: &[f64],
        center: ConditionKind,
        leaf: ConditionKind,
        potentials: Vec<EdgePotential>,
    ) -> Result<Self> {
        let mut vertices = vec![super::model::Vertex { id: "c".into() }];
        let mut edges = Vec::new();
        for (i, &len) in lengths.iter().enumerate() {
            vertices.push(super::model::Vertex {
                id: format!("l{i}"),
            });
            edges.push(super::model::Edge {
                id: format!("e{i}"),
                from: 0,
                to: i + 1,
                length: len,
            });
        }
        let graph = MetricGraph::new(vertices, edges)?;
        let mut kinds = vec![center];
        kinds.extend(std::iter::repeat_with(|| leaf.clone()).take(lengths.len()));
        QuantumGraph::from_kinds(graph, &kinds, potentials)
    }

    pub fn graph(&self) -> &MetricGraph {
        &self.graph
    }

    pub fn condition(&self, v: usize) -> &VertexCondition {
        &self.conditions[v]
    }

    pub fn potential(&self, e: usize) -> &EdgePotential {
        &self.potentials[e]
    }

    pub fn edge_count(&self) -> usize {
        self.graph.edges().len()
    }

    pub fn vertex_count(&self) -> usize {
        self.graph.vertices().len()
    }

    pub fn total_length(&self) -> f64 {
        self.graph.total_length()
    }

    pub fn shortest_edge(&self) -> f64 {
        self.graph.shortest_edge()
    }

    pub fn metric(&self, p: Point, q: Point) -> Result<f64> {
        self.graph.metric(p, q)
    }

    pub fn eval_potential(&self, edge: usize, x: f64, order: usize) -> Result<f64> {
        let pot = self.potentials.get(edge).ok_or_else(|| {
            QgError::Domain(format!("edge index {edge} out of range"))
        })?;
        pot.eval(x, order)
    }

    /// Upper bound on sup |U| over the whole graph.
    pub fn potential_sup_bound(&self) -> f64 {
        self.potentials
            .iter()
            .map(|p| p.sup_bound())
            .fold(0.0, f64::max)
    }

    pub fn all_conditions_real(&self) -> bool {
        self.conditions.iter().all(|c| c.is_real())
    }

    /// U^(order)(x) at an edge end, in the coordinate pointing away from the
    /// vertex. Odd orders flip sign at the far end, even orders do not.
    pub fn potential_at_end(&self, edge: usize, end: EdgeEnd, order: usize) -> f64 {
        let pot = &self.potentials[edge];
        match end {
            EdgeEnd::Start => pot.eval_unchecked(0.0, order),
            EdgeEnd::End => {
                let v = pot.eval_unchecked(pot.length(), order);
                if order % 2 == 1 {
                    -v
                } else {
                    v
                }
            }
        }
    }

    /// Check that even derivatives of the potential through `2 * max_l`
    /// agree across all edges meeting each vertex.
    pub fn validate_smoothness(&self, max_l: usize) -> Result<()> {
        for v in 0..self.vertex_count() {
            let ends = self.graph.vertex_ends(v);
            if ends.len() < 2 {
                continue;
            }
            for l in 0..=max_l {
                let order = 2 * l;
                let vals: Vec<f64> = ends
                    .iter()
                    .map(|&(e, end)| self.potential_at_end(e, end, order))
                    .collect();
                let lo = vals.iter().cloned().fold(f64::INFINITY, f64::min);
                let hi = vals.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                let scale = 1.0f64.max(lo.abs()).max(hi.abs());
                if (hi - lo).abs() > SMOOTHNESS_TOL * scale {
                    return Err(QgError::InvalidPotential(format!(
                        "vertex {}: U^({order}) differs across adjacent edges \
                         ({lo:.6e} vs {hi:.6e})",
                        self.graph.vertices()[v].id
                    )));
                }
            }
        }
        Ok(())
    }

    /// U^(order)(v), defined when the smoothness validation passes; taken
    /// from the first adjacent edge-end.
    pub fn vertex_potential(&self, v: usize, order: usize) -> f64 {
        let ends = self.graph.vertex_ends(v);
        let &(e, end) = ends.first().expect("vertex has at least one edge");
        self.potential_at_end(e, end, order)
    }

    /// Insert a Kirchhoff-Neumann degree-2 vertex at the midpoint of an edge.
    pub fn insert_kn_vertex(&self, e: usize) -> Result<QuantumGraph> {
        let (half_a, half_b) = self.potentials[e].split_at_midpoint()?;
        let (graph, _w) = self.graph.split_edge(e)?;
        let mut conditions = self.conditions.clone();
        conditions.push(VertexCondition::kirchhoff(2));
        let mut potentials = self.potentials.clone();
        potentials[e] = half_a;
        potentials.push(half_b);
        QuantumGraph::new(graph, conditions, potentials)
    }

    /// Remove loops and multiple edges by inserting KN midpoints.
    pub fn subdivide(&self) -> Result<QuantumGraph> {
        let mut q = self.clone();
        for _ in 0..4 * (self.edge_count() + 1) {
            match q.first_offending_edge() {
                Some(e) => q = q.insert_kn_vertex(e)?,
                None => return Ok(q),
            }
        }
        Err(QgError::InvalidGraph {
            entity: "graph".into(),
            invariant: "normalization did not terminate".into(),
        })
    }

    fn first_offending_edge(&self) -> Option<usize> {
        let edges = self.graph.edges();
        for (i, e) in edges.iter().enumerate() {
            if e.from == e.to {
                return Some(i);
            }
        }
        for (i, e) in edges.iter().enumerate() {
            for d in &edges[..i] {
                if (d.from, d.to) == (e.from, e.to) || (d.to, d.from) == (e.from, e.to) {
                    return Some(i);
                }
            }
        }
        None
    }

    /// Reverse the parametrization of one edge; the potential is reflected so
    /// the operator is unchanged.
    pub fn flip_edge(&self, e: usize) -> Result<QuantumGraph> {
        let graph = self.graph.flip_edge(e)?;
        let mut potentials = self.potentials.clone();
        potentials[e] = potentials[e].reversed();
        QuantumGraph::new(graph, self.conditions.clone(), potentials)
    }
}
