//! Heat-trace coefficients: closed diagonal u-values, vertex Taylor data,
//! bulk integrals, and the sigma-weighted vertex terms, plus the numeric
//! Gaussian-moment pipeline that cross-checks the boundary coefficients.

use crate::error::{QgError, Result};
use crate::graph::QuantumGraph;
use crate::lsq::least_squares;
use crate::quad::integrate_panels;

/// u_l(x, x) from the derivatives of U at x, l <= 3.
pub fn diagonal_u_from_values(u: f64, u1: f64, u2: f64, u4: f64, l: usize) -> Result<f64> {
    Ok(match l {
        0 => 1.0,
        1 => u,
        2 => u2 / 6.0 + u * u / 2.0,
        3 => u4 / 60.0 + u2 * u / 6.0 + u1 * u1 / 12.0 + u * u * u / 6.0,
        _ => return Err(QgError::UnsupportedOrder(l)),
    })
}

/// Closed diagonal value u_l(x, x) on an edge of the graph.
pub fn u_diagonal_closed(q: &QuantumGraph, edge: usize, x: f64, l: usize) -> Result<f64> {
    let u = q.eval_potential(edge, x, 0)?;
    let u1 = q.eval_potential(edge, x, 1)?;
    let u2 = q.eval_potential(edge, x, 2)?;
    let u4 = q.eval_potential(edge, x, 4)?;
    diagonal_u_from_values(u, u1, u2, u4, l)
}

/// Taylor coefficients (in powers of x) of u_l^v(x, -x) around the vertex,
/// for l in {1, 2}. Requires the vertex-smoothness validation.
pub fn u_vertex_taylor(q: &QuantumGraph, v: usize, l: usize) -> Result<Vec<f64>> {
    q.validate_smoothness(2)?;
    let u = q.vertex_potential(v, 0);
    let u2 = q.vertex_potential(v, 2);
    let u4 = q.vertex_potential(v, 4);
    match l {
        1 => Ok(vec![u, 0.0, u2 / 6.0, 0.0, u4 / 120.0]),
        2 => Ok(vec![u2 / 6.0 + u * u / 2.0, 0.0, u4 / 60.0 + u * u2 / 6.0]),
        _ => Err(QgError::UnsupportedOrder(l)),
    }
}

/// a_n^b(v) closed forms, n <= 3.
pub fn boundary_coefficient(q: &QuantumGraph, v: usize, n: usize) -> Result<f64> {
    let u = q.vertex_potential(v, 0);
    let u2 = q.vertex_potential(v, 2);
    let u4 = q.vertex_potential(v, 4);
    Ok(match n {
        0 => 1.0,
        1 => u,
        2 => u2 / 4.0 + u * u / 2.0,
        3 => u4 / 32.0 + u * u2 / 4.0 + u * u * u / 6.0,
        _ => return Err(QgError::UnsupportedOrder(n)),
    })
}

#[derive(Debug, Clone)]
pub struct VertexTerm {
    pub vertex: usize,
    /// sum_alpha sigma_v^{alpha alpha} (real for Hermitian sigma).
    pub sigma_trace: f64,
    /// a_0^b .. a_{n_max}^b at this vertex.
    pub a_b: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct HeatCoefficients {
    pub n_max: usize,
    /// int_G a_n(x) dx for n = 0 .. n_max.
    pub bulk: Vec<f64>,
    pub vertex: Vec<VertexTerm>,
    /// sum_v sigma_trace(v) * a_n^b(v).
    pub vertex_sum: Vec<f64>,
}

/// Bulk integrals by per-edge Gauss-Legendre and vertex terms from the
/// closed forms. Requires smoothness through order 4 at the vertices.
pub fn heat_coefficients(q: &QuantumGraph, n_max: usize) -> Result<HeatCoefficients> {
    if n_max > 3 {
        return Err(QgError::UnsupportedOrder(n_max));
    }
    q.validate_smoothness(2)?;
    let mut bulk = vec![0.0; n_max + 1];
    for e in 0..q.edge_count() {
        let pot = q.potential(e);
        let len = pot.length();
        let panels = ((len * (pot.max_frequency() + 1.0)).ceil() as usize).max(4);
        for (n, b) in bulk.iter_mut().enumerate() {
            *b += integrate_panels(0.0, len, panels, 20, |x| {
                diagonal_u_from_values(
                    pot.eval_unchecked(x, 0),
                    pot.eval_unchecked(x, 1),
                    pot.eval_unchecked(x, 2),
                    pot.eval_unchecked(x, 4),
                    n,
                )
                .expect("n <= 3")
            });
        }
    }
    let mut vertex = Vec::with_capacity(q.vertex_count());
    let mut vertex_sum = vec![0.0; n_max + 1];
    for v in 0..q.vertex_count() {
        let sigma = &q.condition(v).sigma;
        let mut sigma_trace = 0.0;
        for i in 0..sigma.nrows() {
            let d = sigma[(i, i)];
            if d.im.abs() > 1e-10 {
                return Err(QgError::UnsupportedConditions {
                    vertex: q.graph().vertices()[v].id.clone(),
                    reason: "sigma diagonal is not real".into(),
                });
            }
            sigma_trace += d.re;
        }
        let a_b: Result<Vec<f64>> = (0..=n_max).map(|n| boundary_coefficient(q, v, n)).collect();
        let a_b = a_b?;
        for (n, s) in vertex_sum.iter_mut().enumerate() {
            *s += sigma_trace * a_b[n];
        }
        vertex.push(VertexTerm {
            vertex: v,
            sigma_trace,
            a_b,
        });
    }
    Ok(HeatCoefficients {
        n_max,
        bulk,
        vertex,
        vertex_sum,
    })
}

/// CSV: n, bulk_integral, vertex_sum, total_weight. The total weight is
/// bulk/sqrt(4 pi) + vertex_sum/4, i.e. what multiplies t^n once the bulk
/// part's extra t^{-1/2} is factored out.
pub fn coeffs_csv(c: &HeatCoefficients) -> String {
    use crate::fmt::g17;
    let mut out = String::from("n,bulk_integral,vertex_sum,total_weight\n");
    let sqrt4pi = (4.0 * std::f64::consts::PI).sqrt();
    for n in 0..=c.n_max {
        let total = c.bulk[n] / sqrt4pi + c.vertex_sum[n] / 4.0;
        out.push_str(&format!(
            "{},{},{},{}\n",
            n,
            g17(c.bulk[n]),
            g17(c.vertex_sum[n]),
            g17(total)
        ));
    }
    out
}

/// int_0^upper exp(-x^2) x^(2j) dx by quadrature.
pub fn gaussian_moment(j: usize, upper: f64) -> f64 {
    let panels = (2.0 * upper).ceil() as usize + 2;
    integrate_panels(0.0, upper, panels, 20, |x| {
        (-x * x).exp() * x.powi(2 * j as i32)
    })
}

/// The boundary coefficients assembled from the vertex Taylor data and
/// numerically evaluated Gaussian moments (the closing integrals of the
/// vertex part of the expansion):
///
///   sum_l a_l^b t^l = (2/sqrt(pi)) sum_l t^l int_0^inf e^{-x^2}
///                     u_l^v(sqrt(t) x, -sqrt(t) x) dx + O(t^4).
pub fn boundary_via_moments(q: &QuantumGraph, v: usize) -> Result<[f64; 4]> {
    let two_over_sqrt_pi = 2.0 / std::f64::consts::PI.sqrt();
    let m0 = gaussian_moment(0, 8.0);
    let m1 = gaussian_moment(1, 8.0);
    let m2 = gaussian_moment(2, 8.0);
    let t1 = u_vertex_taylor(q, v, 1)?;
    let t2 = u_vertex_taylor(q, v, 2)?;
    // u_3 enters only through its constant term u_3(v, v).
    let u3c = diagonal_u_from_values(
        q.vertex_potential(v, 0),
        q.vertex_potential(v, 1),
        q.vertex_potential(v, 2),
        q.vertex_potential(v, 4),
        3,
    )?;
    let a0 = two_over_sqrt_pi * m0;
    let a1 = two_over_sqrt_pi * m0 * t1[0];
    let a2 = two_over_sqrt_pi * (m1 * t1[2] + m0 * t2[0]);
    let a3 = two_over_sqrt_pi * (m2 * t1[4] + m1 * t2[2] + m0 * u3c);
    Ok([a0, a1, a2, a3])
}

#[derive(Debug, Clone)]
pub struct VertexSeriesFit {
    /// Coefficients at t^0, t^1, t^2, t^3.
    pub integer: [f64; 4],
    /// Coefficients at t^{1/2}, t^{3/2}, t^{5/2}.
    pub half: [f64; 3],
    pub cond: f64,
}

/// Evaluate the vertex series
///   B(t) = (2/sqrt(pi)) sum_l t^l int_0^{cap} e^{-x^2} P_l(sqrt(t) x) dx
/// on a t-grid (P_l the vertex Taylor polynomials) and fit integer and
/// half-integer powers of t. The half-power coefficients must vanish.
///
/// The finite upper limit (l0/3)/sqrt(t) of the vertex integral differs from
/// infinity by O(t^inf); it is closed at cap = 8 so that graphs with short
/// edges do not shrink the fit window below what the t^3 coefficient needs.
pub fn vertex_series_fit(q: &QuantumGraph, v: usize) -> Result<VertexSeriesFit> {
    let t1 = u_vertex_taylor(q, v, 1)?;
    let t2 = u_vertex_taylor(q, v, 2)?;
    let u3c = diagonal_u_from_values(
        q.vertex_potential(v, 0),
        q.vertex_potential(v, 1),
        q.vertex_potential(v, 2),
        q.vertex_potential(v, 4),
        3,
    )?;
    let two_over_sqrt_pi = 2.0 / std::f64::consts::PI.sqrt();
    let b_of_t = |t: f64| -> f64 {
        let cap = 8.0f64;
        let panels = (2.0 * cap).ceil() as usize + 2;
        let poly = |l: usize, s: f64| -> f64 {
            match l {
                0 => 1.0,
                1 => t1[0] + t1[2] * s * s + t1[4] * s.powi(4),
                2 => t2[0] + t2[2] * s * s,
                _ => u3c,
            }
        };
        let mut sum = 0.0;
        for l in 0..=3usize {
            let integral = integrate_panels(0.0, cap, panels, 20, |x| {
                (-x * x).exp() * poly(l, t.sqrt() * x)
            });
            sum += two_over_sqrt_pi * t.powi(l as i32) * integral;
        }
        sum
    };
    // In s = sqrt(t) the series is a degree-6 polynomial, so fit a
    // polynomial on a linear s-grid (normalized to [0, 1] for conditioning).
    let t_hi = 0.03f64;
    let s_hi = t_hi.sqrt();
    let n = 72;
    let ss: Vec<f64> = (1..=n).map(|i| s_hi * i as f64 / n as f64).collect();
    let b: Vec<f64> = ss.iter().map(|&s| b_of_t(s * s)).collect();
    let cols: Vec<Vec<f64>> = (0..=6)
        .map(|m| ss.iter().map(|&s| (s / s_hi).powi(m)).collect())
        .collect();
    let fit = least_squares(&cols, &b, 1e12)?;
    // Undo the s/s_hi normalization: coefficient of t^{m/2} = c_m / s_hi^m.
    let c = |m: usize| fit.coeffs[m] / s_hi.powi(m as i32);
    Ok(VertexSeriesFit {
        integer: [c(0), c(2), c(4), c(6)],
        half: [c(1), c(3), c(5)],
        cond: fit.cond,
    })
}
