//! The Gaussian-weighted parametrix: real line, star patches, and the
//! assembled graph parametrix with its heat-operator residual.

use super::cutoff::{eta, eta_d1, eta_d2, CutoffSystem};
use super::uline::{JoinedLine, UFunctionTable, MAX_U_ORDER};
use crate::error::{QgError, Result};
use crate::graph::{EdgeEnd, EdgePotential, Point, QuantumGraph};
use nalgebra::DMatrix;

/// Default step for the fourth-order differences in the residual. Chosen
/// near the f64 noise optimum for second derivatives of smooth O(1) data;
/// a t-dependent step would drown the k = 2 signal in rounding noise at the
/// small-t end.
pub const RESIDUAL_FD_STEP: f64 = 3e-3;

/// Heat kernel of -d²/dx² on the line.
pub fn gauss_kernel(t: f64, d: f64) -> f64 {
    (-d * d / (4.0 * t)).exp() / (4.0 * std::f64::consts::PI * t).sqrt()
}

/// Truncated ansatz f(t, x-y) (1 + sum_{l=1..k} u_l(x, y) t^l) on the line.
pub fn eval_real_line_parametrix(
    table: &UFunctionTable,
    k: usize,
    t: f64,
    x: f64,
    y: f64,
) -> Result<f64> {
    assert!(t > 0.0 && k >= 1);
    if k > MAX_U_ORDER {
        return Err(QgError::UnsupportedOrder(k));
    }
    let mut s = 1.0;
    let mut tl = 1.0;
    for l in 1..=k {
        tl *= t;
        s += table.u(l, x, y)? * tl;
    }
    Ok(gauss_kernel(t, x - y) * s)
}

/// Parametrix on a star: edges indexed 0..degree, coordinates measured away
/// from the central vertex, and a real symmetric scattering matrix.
pub struct StarParametrix {
    pub sigma: DMatrix<f64>,
    /// Potentials in center-outward coordinates.
    locals: Vec<EdgePotential>,
    /// tables[alpha][beta]: line U_alpha(z) for z > 0, U_beta(-z) for z < 0.
    tables: Vec<Vec<UFunctionTable>>,
}

impl StarParametrix {
    pub fn new(sigma: DMatrix<f64>, locals: Vec<EdgePotential>) -> Self {
        let d = locals.len();
        assert_eq!(sigma.nrows(), d);
        let tables = (0..d)
            .map(|a| {
                (0..d)
                    .map(|b| {
                        UFunctionTable::new(Box::new(JoinedLine {
                            plus: locals[a].clone(),
                            minus: locals[b].clone(),
                        }))
                    })
                    .collect()
            })
            .collect();
        StarParametrix {
            sigma,
            locals,
            tables,
        }
    }

    /// Build the star patch around a graph vertex; edge order and sigma rows
    /// follow the vertex-ends ordering.
    pub fn from_graph_vertex(q: &QuantumGraph, v: usize) -> Result<Self> {
        let cond = q.condition(v);
        if !cond.is_real() {
            return Err(QgError::UnsupportedConditions {
                vertex: q.graph().vertices()[v].id.clone(),
                reason: "parametrix assembly supports real sigma only".into(),
            });
        }
        let locals: Vec<EdgePotential> = q
            .graph()
            .vertex_ends(v)
            .iter()
            .map(|&(e, end)| match end {
                EdgeEnd::Start => q.potential(e).clone(),
                EdgeEnd::End => q.potential(e).reversed(),
            })
            .collect();
        Ok(StarParametrix::new(cond.sigma_real(), locals))
    }

    pub fn degree(&self) -> usize {
        self.locals.len()
    }

    pub fn local_potential(&self, alpha: usize) -> &EdgePotential {
        &self.locals[alpha]
    }

    fn ansatz(table: &UFunctionTable, k: usize, t: f64, x: f64, y: f64) -> Result<f64> {
        let mut s = 1.0;
        let mut tl = 1.0;
        for l in 1..=k {
            tl *= t;
            s += table.u(l, x, y)? * tl;
        }
        Ok(gauss_kernel(t, x - y) * s)
    }

    /// h_k^v(t, x_alpha, y_beta): direct term when alpha = beta plus the
    /// sigma-weighted reflected term.
    pub fn value(&self, k: usize, t: f64, alpha: usize, x: f64, beta: usize, y: f64) -> Result<f64> {
        assert!(t > 0.0);
        if k > MAX_U_ORDER {
            return Err(QgError::UnsupportedOrder(k));
        }
        let mut out = 0.0;
        if alpha == beta {
            out += Self::ansatz(&self.tables[alpha][alpha], k, t, x, y)?;
        }
        let sig = self.sigma[(alpha, beta)];
        if sig != 0.0 {
            out += sig * Self::ansatz(&self.tables[alpha][beta], k, t, x, -y)?;
        }
        Ok(out)
    }

    /// Outward derivative in y_beta at the vertex (y = 0), by central
    /// differences; used by the boundary-condition checks.
    pub fn d_dy_at_vertex(
        &self,
        k: usize,
        t: f64,
        alpha: usize,
        x: f64,
        beta: usize,
    ) -> Result<f64> {
        let h = 1e-5;
        let plus = self.value(k, t, alpha, x, beta, h)?;
        // Evaluate the analytic continuation to y < 0 piecewise: direct and
        // reflected terms are both smooth functions of y.
        let mut minus = 0.0;
        if alpha == beta {
            minus += Self::ansatz(&self.tables[alpha][alpha], k, t, x, -h)?;
        }
        let sig = self.sigma[(alpha, beta)];
        if sig != 0.0 {
            minus += sig * Self::ansatz(&self.tables[alpha][beta], k, t, x, h)?;
        }
        Ok((plus - minus) / (2.0 * h))
    }
}

/// One additive piece of the parametrix at a fixed evaluation point: a
/// constant weight, a Gaussian in the local coordinate, and the u-series.
struct Piece<'a> {
    /// chi_v(x) times (1 for direct | sigma entry for reflected).
    weight: f64,
    table: &'a UFunctionTable,
    /// x in vertex-local coordinates.
    x_local: f64,
    /// The u-series second argument is `arg_sign * y_local`.
    arg_sign: f64,
    /// d(y_local)/d(y_global): +1 when the vertex sits at the edge start.
    orientation: f64,
    /// y offset: y_local = offset + orientation * y_global.
    offset: f64,
    /// Local potential on y's edge (vertex-outward coordinates).
    potential: &'a EdgePotential,
}

impl<'a> Piece<'a> {
    /// Gaussian argument Delta(y_local) and its y_local-derivative.
    fn delta(&self, y_local: f64) -> (f64, f64) {
        if self.arg_sign > 0.0 {
            (self.x_local - y_local, -1.0)
        } else {
            (self.x_local + y_local, 1.0)
        }
    }

    fn u_sum(&self, k: usize, t: f64, y_local: f64) -> Result<(f64, f64)> {
        // Returns (S, dS/dt).
        let mut s = 1.0;
        let mut ds = 0.0;
        let mut tl = 1.0;
        for l in 1..=k {
            let u = self.table.u(l, self.x_local, self.arg_sign * y_local)?;
            ds += l as f64 * u * tl;
            tl *= t;
            s += u * tl;
        }
        Ok((s, ds))
    }
}

/// The assembled parametrix on a quantum graph.
pub struct GraphParametrix<'a> {
    q: &'a QuantumGraph,
    pub order: usize,
    pub cutoff: CutoffSystem,
    stars: Vec<StarParametrix>,
}

impl<'a> GraphParametrix<'a> {
    pub fn new(q: &'a QuantumGraph, order: usize) -> Result<Self> {
        assert!(order >= 1);
        if order > MAX_U_ORDER {
            return Err(QgError::UnsupportedOrder(order));
        }
        if !q.graph().is_normalized() {
            return Err(QgError::InvalidGraph {
                entity: "graph".into(),
                invariant: "parametrix requires a graph without loops or multiple edges \
                            (subdivide first)"
                    .into(),
            });
        }
        q.validate_smoothness(2)?;
        let stars: Result<Vec<StarParametrix>> = (0..q.vertex_count())
            .map(|v| StarParametrix::from_graph_vertex(q, v))
            .collect();
        Ok(GraphParametrix {
            q,
            order,
            cutoff: CutoffSystem::new(q),
            stars: stars?,
        })
    }

    pub fn star(&self, v: usize) -> &StarParametrix {
        &self.stars[v]
    }

    /// Local index of the point's edge among the vertex ends, plus the
    /// vertex-outward coordinate.
    fn local_coord(&self, v: usize, p: Point) -> Option<(usize, f64)> {
        let ends = self.q.graph().vertex_ends(v);
        let edge = &self.q.graph().edges()[p.edge];
        for (i, &(e, end)) in ends.iter().enumerate() {
            if e != p.edge {
                continue;
            }
            return Some(match end {
                EdgeEnd::Start if edge.from == v => (i, p.x),
                EdgeEnd::End if edge.to == v => (i, edge.length - p.x),
                _ => continue,
            });
        }
        None
    }

    /// The pieces contributing at (x, y): for every vertex with chi_v(x) > 0,
    /// the direct term (same edge) and the reflected terms.
    fn pieces(&self, x: Point, y: Point) -> Result<Vec<Piece<'_>>> {
        let mut pieces = Vec::new();
        for v in 0..self.q.vertex_count() {
            let chi = self.cutoff.chi(self.q, v, x);
            if chi == 0.0 {
                continue;
            }
            let (i, xl) = self
                .local_coord(v, x)
                .expect("chi > 0 implies adjacency");
            let Some((j, _yl)) = self.local_coord(v, y) else {
                return Err(QgError::Inconsistency(
                    "cut-off did not vanish although y's edge is not adjacent \
                     to a contributing vertex"
                        .into(),
                ));
            };
            let y_edge = &self.q.graph().edges()[y.edge];
            let (orientation, offset) = if y_edge.from == v {
                (1.0, 0.0)
            } else {
                (-1.0, y_edge.length)
            };
            let star = &self.stars[v];
            if i == j {
                pieces.push(Piece {
                    weight: chi,
                    table: &star.tables[i][i],
                    x_local: xl,
                    arg_sign: 1.0,
                    orientation,
                    offset,
                    potential: star.local_potential(j),
                });
            }
            let sig = star.sigma[(i, j)];
            if sig != 0.0 {
                pieces.push(Piece {
                    weight: chi * sig,
                    table: &star.tables[i][j],
                    x_local: xl,
                    arg_sign: -1.0,
                    orientation,
                    offset,
                    potential: star.local_potential(j),
                });
            }
        }
        Ok(pieces)
    }

    /// h~_k(t, x, y) = eta(2 d(x,y)/l0) sum_v chi_v(x) h_k^v(t, x, y).
    pub fn value(&self, t: f64, x: Point, y: Point) -> Result<f64> {
        assert!(t > 0.0);
        let d = self.q.metric(x, y)?;
        let eta_f = self.cutoff.distance_factor(d);
        if eta_f == 0.0 {
            return Ok(0.0);
        }
        let mut sum = 0.0;
        for p in self.pieces(x, y)? {
            let yl = p.offset + p.orientation * y.x;
            let (delta, _) = p.delta(yl);
            let (s, _) = p.u_sum(self.order, t, yl)?;
            sum += p.weight * gauss_kernel(t, delta) * s;
        }
        Ok(eta_f * sum)
    }

    /// (d_t + D_y) h~_k at (t, x, y) with fourth-order central differences
    /// of the u-series in y (step `h`), the Gaussian factor differentiated
    /// analytically, and the cut-off derivatives in closed form. Probe
    /// points must keep the five-point stencil inside y's edge.
    pub fn residual(&self, t: f64, x: Point, y: Point, h: f64) -> Result<f64> {
        assert!(t > 0.0 && h > 0.0);
        let y_len = self.q.graph().edges()[y.edge].length;
        if y.x - 2.0 * h <= 0.0 || y.x + 2.0 * h >= y_len {
            return Err(QgError::UnsupportedProbe(format!(
                "stencil of half-width {} leaves the edge at y = {}",
                2.0 * h,
                y.x
            )));
        }
        let d = self.q.metric(x, y)?;
        let g = 2.0 * d / self.cutoff.l0;
        let eta_f = eta(g);
        let eta1 = eta_d1(g);
        let eta2 = eta_d2(g);
        if eta_f == 0.0 && eta1 == 0.0 && eta2 == 0.0 {
            return Ok(0.0);
        }

        // d/d(y_global) of the distance (piecewise linear in y).
        let dd = 1e-6 * y_len;
        let d_plus = self.q.metric(x, Point { edge: y.edge, x: y.x + dd })?;
        let d_minus = self.q.metric(x, Point { edge: y.edge, x: y.x - dd })?;
        let g1 = (2.0 / self.cutoff.l0) * (d_plus - d_minus) / (2.0 * dd);

        let k = self.order;
        let mut transport_sum = 0.0; // sum chi c (d_t + D)(f S)
        let mut w_value = 0.0; // sum chi c f S
        let mut w_d1_global = 0.0; // d/d(y_global) of the same

        for p in self.pieces(x, y)? {
            let yl = p.offset + p.orientation * y.x;
            let u_local = p.potential.eval_unchecked(yl, 0);
            // Five-point stencil of S in the local coordinate.
            let mut s_sten = [0.0f64; 5];
            let mut dst = 0.0;
            for (m, slot) in s_sten.iter_mut().enumerate() {
                let ym = yl + (m as f64 - 2.0) * h;
                let (s, ds) = p.u_sum(k, t, ym)?;
                *slot = s;
                if m == 2 {
                    dst = ds;
                }
            }
            let s0 = s_sten[2];
            let s1 = (-s_sten[4] + 8.0 * s_sten[3] - 8.0 * s_sten[1] + s_sten[0]) / (12.0 * h);
            let s2 = (-s_sten[4] + 16.0 * s_sten[3] - 30.0 * s_sten[2] + 16.0 * s_sten[1]
                - s_sten[0])
                / (12.0 * h * h);
            let (delta, dprime) = p.delta(yl);
            let f = gauss_kernel(t, delta);
            // (d_t + D)(f S) = f [dS/dt + (Delta/t) Delta' S' - S'' - U S]
            let transport = f * (dst + (delta / t) * dprime * s1 - s2 - u_local * s0);
            transport_sum += p.weight * transport;
            w_value += p.weight * f * s0;
            // d/d(y_local)(f S) = f (-Delta/(2t)) Delta' S + f S'
            let d1_local = f * (-delta / (2.0 * t)) * dprime * s0 + f * s1;
            w_d1_global += p.weight * p.orientation * d1_local;
        }

        Ok(eta_f * transport_sum - eta2 * g1 * g1 * w_value - 2.0 * eta1 * g1 * w_d1_global)
    }
}
