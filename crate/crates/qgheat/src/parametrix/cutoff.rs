//! Smooth cut-off eta and the vertex partition of unity chi_v.
//!
//! eta is 1 on (-inf, 1/3], 0 on [2/3, inf) and satisfies the symmetry
//! eta(1 - s) = 1 - eta(s); the partition of unity is exact because the two
//! chi values on an edge are eta(s) and eta(1 - s).

use crate::graph::{Point, QuantumGraph};

/// exp(-1/u) bump with first and second derivatives; zero for u <= 0.
fn bump(u: f64) -> (f64, f64, f64) {
    if u < 1e-3 {
        return (0.0, 0.0, 0.0);
    }
    let a = (-1.0 / u).exp();
    let a1 = a / (u * u);
    let a2 = a * (1.0 / u.powi(4) - 2.0 / u.powi(3));
    (a, a1, a2)
}

/// Smooth step: 0 for u <= 0, 1 for u >= 1. Returns (s, s', s'').
fn smooth_step(u: f64) -> (f64, f64, f64) {
    if u <= 1e-3 {
        return (0.0, 0.0, 0.0);
    }
    if u >= 1.0 - 1e-3 {
        return (1.0, 0.0, 0.0);
    }
    let (a, a1, a2) = bump(u);
    let (b, b1n, b2) = bump(1.0 - u);
    let b1 = -b1n; // d/du of bump(1-u)
    let denom = a + b;
    let s = a / denom;
    let num1 = a1 * b - a * b1;
    let s1 = num1 / (denom * denom);
    let s2 = (a2 * b - a * b2) / (denom * denom)
        - 2.0 * num1 * (a1 + b1) / (denom * denom * denom);
    (s, s1, s2)
}

/// eta(s) = step(2 - 3s), with derivatives in s.
pub fn eta(s: f64) -> f64 {
    smooth_step(2.0 - 3.0 * s).0
}

pub fn eta_d1(s: f64) -> f64 {
    -3.0 * smooth_step(2.0 - 3.0 * s).1
}

pub fn eta_d2(s: f64) -> f64 {
    9.0 * smooth_step(2.0 - 3.0 * s).2
}

/// Cut-off data for a graph: l0 and the partition of unity.
#[derive(Debug, Clone, Copy)]
pub struct CutoffSystem {
    pub l0: f64,
}

impl CutoffSystem {
    pub fn new(q: &QuantumGraph) -> Self {
        CutoffSystem {
            l0: q.shortest_edge(),
        }
    }

    /// The distance cut-off factor eta(2 d(x,y) / l0).
    pub fn distance_factor(&self, d: f64) -> f64 {
        eta(2.0 * d / self.l0)
    }

    /// chi_v(x): eta of the along-edge distance to v over the edge length;
    /// zero when x's edge is not adjacent to v.
    pub fn chi(&self, q: &QuantumGraph, v: usize, x: Point) -> f64 {
        let edge = &q.graph().edges()[x.edge];
        if edge.from == v {
            eta(x.x / edge.length)
        } else if edge.to == v {
            eta((edge.length - x.x) / edge.length)
        } else {
            0.0
        }
    }
}
