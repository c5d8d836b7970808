//! The metric graph: combinatorics, edge lengths, the path metric, and
//! normalization (removal of loops and multiple edges by subdivision).

use crate::error::{QgError, Result};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Vertex {
    pub id: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Edge {
    pub id: String,
    pub from: usize,
    pub to: usize,
    pub length: f64,
}

/// Which end of an edge meets a vertex. `Start` is coordinate 0.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum EdgeEnd {
    Start,
    End,
}

/// A point of the graph: an edge index and a coordinate in [0, length].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Point {
    pub edge: usize,
    pub x: f64,
}

#[derive(Debug, Clone)]
pub struct MetricGraph {
    vertices: Vec<Vertex>,
    edges: Vec<Edge>,
    /// All-pairs vertex distances (Floyd-Warshall; graphs are small).
    vdist: Vec<Vec<f64>>,
}

impl MetricGraph {
    pub fn new(vertices: Vec<Vertex>, edges: Vec<Edge>) -> Result<Self> {
        for (i, v) in vertices.iter().enumerate() {
            if vertices[..i].iter().any(|u| u.id == v.id) {
                return Err(QgError::InvalidGraph {
                    entity: format!("vertex {}", v.id),
                    invariant: "vertex ids must be unique".into(),
                });
            }
        }
        for (i, e) in edges.iter().enumerate() {
            if edges[..i].iter().any(|d| d.id == e.id) {
                return Err(QgError::InvalidGraph {
                    entity: format!("edge {}", e.id),
                    invariant: "edge ids must be unique".into(),
                });
            }
            if !(e.length.is_finite() && e.length > 0.0) {
                return Err(QgError::InvalidGraph {
                    entity: format!("edge {}", e.id),
                    invariant: "edge length must be finite and strictly positive".into(),
                });
            }
            if e.from >= vertices.len() || e.to >= vertices.len() {
                return Err(QgError::InvalidGraph {
                    entity: format!("edge {}", e.id),
                    invariant: "edge endpoints must reference existing vertices".into(),
                });
            }
        }
        let vdist = Self::all_pairs(&vertices, &edges);
        Ok(MetricGraph {
            vertices,
            edges,
            vdist,
        })
    }

    fn all_pairs(vertices: &[Vertex], edges: &[Edge]) -> Vec<Vec<f64>> {
        let n = vertices.len();
        let mut d = vec![vec![f64::INFINITY; n]; n];
        for (i, row) in d.iter_mut().enumerate() {
            row[i] = 0.0;
        }
        for e in edges {
            if e.from != e.to {
                d[e.from][e.to] = d[e.from][e.to].min(e.length);
                d[e.to][e.from] = d[e.to][e.from].min(e.length);
            }
        }
        for k in 0..n {
            for i in 0..n {
                for j in 0..n {
                    let via = d[i][k] + d[k][j];
                    if via < d[i][j] {
                        d[i][j] = via;
                    }
                }
            }
        }
        d
    }

    pub fn vertices(&self) -> &[Vertex] {
        &self.vertices
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn vertex_index(&self, id: &str) -> Option<usize> {
        self.vertices.iter().position(|v| v.id == id)
    }

    pub fn edge_index(&self, id: &str) -> Option<usize> {
        self.edges.iter().position(|e| e.id == id)
    }

    pub fn total_length(&self) -> f64 {
        self.edges.iter().map(|e| e.length).sum()
    }

    /// Length of the shortest edge (l0).
    pub fn shortest_edge(&self) -> f64 {
        self.edges
            .iter()
            .map(|e| e.length)
            .fold(f64::INFINITY, f64::min)
    }

    /// Incident edge-ends of a vertex, sorted by (edge id, end). A loop
    /// contributes both of its ends, so degrees count edge-ends.
    pub fn vertex_ends(&self, v: usize) -> Vec<(usize, EdgeEnd)> {
        let mut ends = Vec::new();
        for (i, e) in self.edges.iter().enumerate() {
            if e.from == v {
                ends.push((i, EdgeEnd::Start));
            }
            if e.to == v {
                ends.push((i, EdgeEnd::End));
            }
        }
        ends.sort_by(|a, b| {
            (self.edges[a.0].id.as_str(), a.1).cmp(&(self.edges[b.0].id.as_str(), b.1))
        });
        ends
    }

    pub fn degree(&self, v: usize) -> usize {
        self.vertex_ends(v).len()
    }

    /// No loops and no multiple edges.
    pub fn is_normalized(&self) -> bool {
        for (i, e) in self.edges.iter().enumerate() {
            if e.from == e.to {
                return false;
            }
            for d in &self.edges[..i] {
                if (d.from, d.to) == (e.from, e.to) || (d.to, d.from) == (e.from, e.to) {
                    return false;
                }
            }
        }
        true
    }

    pub fn check_point(&self, p: Point) -> Result<()> {
        let e = self.edges.get(p.edge).ok_or_else(|| {
            QgError::Domain(format!("edge index {} out of range", p.edge))
        })?;
        if !(0.0..=e.length).contains(&p.x) || !p.x.is_finite() {
            return Err(QgError::Domain(format!(
                "coordinate {} outside [0, {}] on edge {}",
                p.x, e.length, e.id
            )));
        }
        Ok(())
    }

    /// Distance from a point to a vertex.
    pub fn distance_to_vertex(&self, p: Point, v: usize) -> f64 {
        let e = &self.edges[p.edge];
        let via_from = p.x + self.vdist[e.from][v];
        let via_to = (e.length - p.x) + self.vdist[e.to][v];
        via_from.min(via_to)
    }

    /// Shortest-path metric between two points.
    pub fn metric(&self, p: Point, q: Point) -> Result<f64> {
        self.check_point(p)?;
        self.check_point(q)?;
        let ep = &self.edges[p.edge];
        let eq = &self.edges[q.edge];
        let mut best = if p.edge == q.edge {
            (p.x - q.x).abs()
        } else {
            f64::INFINITY
        };
        for (dp, vp) in [(p.x, ep.from), (ep.length - p.x, ep.to)] {
            for (dq, vq) in [(q.x, eq.from), (eq.length - q.x, eq.to)] {
                let d = dp + self.vdist[vp][vq] + dq;
                if d < best {
                    best = d;
                }
            }
        }
        Ok(best)
    }

    fn unique_vertex_id(&self, base: &str) -> String {
        let mut id = base.to_string();
        let mut n = 0;
        while self.vertices.iter().any(|v| v.id == id) {
            n += 1;
            id = format!("{base}{n}");
        }
        id
    }

    fn unique_edge_id(&self, base: &str) -> String {
        let mut id = base.to_string();
        let mut n = 0;
        while self.edges.iter().any(|e| e.id == id) {
            n += 1;
            id = format!("{base}{n}");
        }
        id
    }

    /// Split edge `e` at its midpoint, inserting a new degree-2 vertex.
    /// Returns the new graph and the index of the inserted vertex; the two
    /// halves replace the edge in place (first half keeps the slot, second
    /// half is appended) and run from the original `from` through the new
    /// vertex to the original `to`.
    pub fn split_edge(&self, e: usize) -> Result<(MetricGraph, usize)> {
        let edge = self.edges.get(e).cloned().ok_or_else(|| {
            QgError::Domain(format!("edge index {e} out of range"))
        })?;
        let vid = self.unique_vertex_id(&format!("{}.mid", edge.id));
        let mut vertices = self.vertices.clone();
        vertices.push(Vertex { id: vid });
        let w = vertices.len() - 1;
        let mut edges = self.edges.clone();
        let half = edge.length / 2.0;
        let id_a = self.unique_edge_id(&format!("{}.a", edge.id));
        let id_b = self.unique_edge_id(&format!("{}.b", edge.id));
        edges[e] = Edge {
            id: id_a,
            from: edge.from,
            to: w,
            length: half,
        };
        edges.push(Edge {
            id: id_b,
            from: w,
            to: edge.to,
            length: half,
        });
        Ok((MetricGraph::new(vertices, edges)?, w))
    }

    /// Normalize: repeatedly split loops and one member of each multi-edge
    /// pair until no loops or multiple edges remain. Total length and (once
    /// the inserted vertices get Kirchhoff-Neumann conditions) the spectrum
    /// are unchanged. Returns the graph and the inserted vertex indices.
    pub fn subdivide(&self) -> Result<(MetricGraph, Vec<usize>)> {
        let mut g = self.clone();
        let mut inserted = Vec::new();
        for _ in 0..4 * (self.edges.len() + 1) {
            if let Some(e) = g.first_offending_edge() {
                let (next, w) = g.split_edge(e)?;
                g = next;
                inserted.push(w);
            } else {
                return Ok((g, inserted));
            }
        }
        Err(QgError::InvalidGraph {
            entity: "graph".into(),
            invariant: "normalization did not terminate".into(),
        })
    }

    /// Reverse the parametrization of one edge (swap its endpoints).
    pub fn flip_edge(&self, e: usize) -> Result<MetricGraph> {
        let mut edges = self.edges.clone();
        let edge = edges.get_mut(e).ok_or_else(|| {
            QgError::Domain(format!("edge index {e} out of range"))
        })?;
        std::mem::swap(&mut edge.from, &mut edge.to);
        MetricGraph::new(self.vertices.clone(), edges)
    }

    fn first_offending_edge(&self) -> Option<usize> {
        for (i, e) in self.edges.iter().enumerate() {
            if e.from == e.to {
                return Some(i);
            }
        }
        for (i, e) in self.edges.iter().enumerate() {
            for d in &self.edges[..i] {
                if (d.from, d.to) == (e.from, e.to) || (d.to, d.from) == (e.from, e.to) {
                    return Some(i);
                }
            }
        }
        None
    }
}
