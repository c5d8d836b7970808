//! Kernel convolution, the truncated correction series that upgrades the
//! parametrix toward the heat kernel, evaluation of the asymptotic trace
//! expansion, and recovery of spectral invariants from trace samples.

use crate::error::{QgError, Result};
use crate::fmt::g17;
use crate::graph::{Point, QuantumGraph};
use crate::lsq::{least_squares, LsqFit};
use crate::parametrix::{GraphParametrix, HeatCoefficients, RESIDUAL_FD_STEP};
use crate::quad::gauss_rule;

/// A time-space kernel on the graph with a claimed small-time order
/// (value = O(t^order)).
pub trait HeatKernelFn: Sync {
    fn eval(&self, t: f64, x: Point, y: Point) -> Result<f64>;
    fn order(&self) -> f64;
}

/// Closure-backed kernel.
pub struct FnKernel<F: Fn(f64, Point, Point) -> Result<f64> + Sync> {
    pub f: F,
    pub order: f64,
}

impl<F: Fn(f64, Point, Point) -> Result<f64> + Sync> HeatKernelFn for FnKernel<F> {
    fn eval(&self, t: f64, x: Point, y: Point) -> Result<f64> {
        (self.f)(t, x, y)
    }
    fn order(&self) -> f64 {
        self.order
    }
}

/// The parametrix as a kernel (order -1/2 from the Gaussian prefactor).
pub struct ParametrixKernel<'a> {
    pub par: &'a GraphParametrix<'a>,
}

impl HeatKernelFn for ParametrixKernel<'_> {
    fn eval(&self, t: f64, x: Point, y: Point) -> Result<f64> {
        self.par.value(t, x, y)
    }
    fn order(&self) -> f64 {
        -0.5
    }
}

/// The heat-operator residual of the parametrix as a kernel of order
/// k - 1/2. Finite-difference probes shrink their step near vertices so the
/// kernel stays evaluable at arbitrary quadrature nodes.
pub struct ResidualKernel<'a> {
    pub par: &'a GraphParametrix<'a>,
    pub q: &'a QuantumGraph,
}

impl HeatKernelFn for ResidualKernel<'_> {
    fn eval(&self, t: f64, x: Point, y: Point) -> Result<f64> {
        let len = self.q.graph().edges()[y.edge].length;
        let margin = y.x.min(len - y.x);
        if margin <= 0.0 {
            // Residual probes cannot straddle a vertex; the integrand is
            // bounded, so the measure-zero endpoint contributes nothing.
            return Ok(0.0);
        }
        let h = RESIDUAL_FD_STEP.min(0.4 * margin);
        self.par.residual(t, x, y, h)
    }
    fn order(&self) -> f64 {
        self.par.order as f64 - 0.5
    }
}

#[derive(Debug, Clone, Copy)]
pub struct ConvolveOptions {
    /// Refinement stops when successive levels agree to this (abs + rel).
    pub tol: f64,
    pub max_level: usize,
    /// Base number of Gauss nodes for the regularized time integral.
    pub base_time_nodes: usize,
    /// Base spatial panels per unit length.
    pub base_ppu: f64,
}

impl Default for ConvolveOptions {
    fn default() -> Self {
        ConvolveOptions {
            tol: 1e-6,
            max_level: 4,
            base_time_nodes: 12,
            base_ppu: 4.0,
        }
    }
}

/// Spatial quadrature breakpoints clustered where a Gaussian of width `w`
/// centered at `c` lives on this edge.
fn cluster_breaks(q: &QuantumGraph, edge: usize, c: Point, w: f64, out: &mut Vec<f64>) {
    let e = &q.graph().edges()[edge];
    let mut centers: Vec<f64> = Vec::new();
    if c.edge == edge {
        centers.push(c.x);
    } else {
        // Reachable through a shared vertex.
        let ce = &q.graph().edges()[c.edge];
        for (v, end_coord) in [(e.from, 0.0), (e.to, e.length)] {
            let d_to_v = if ce.from == v {
                c.x
            } else if ce.to == v {
                ce.length - c.x
            } else {
                continue;
            };
            if d_to_v < 5.0 * w {
                centers.push(if end_coord == 0.0 { -d_to_v } else { e.length + d_to_v });
            }
        }
    }
    for center in centers {
        for m in [-5.0, -3.5, -2.0, -1.0, 1.0, 2.0, 3.5, 5.0] {
            let b = center + m * w;
            if b > 0.0 && b < e.length {
                out.push(b);
            }
        }
    }
}

fn convolve_level(
    q: &QuantumGraph,
    p: &dyn HeatKernelFn,
    r: &dyn HeatKernelFn,
    t: f64,
    x: Point,
    y: Point,
    level: usize,
    opts: &ConvolveOptions,
) -> Result<f64> {
    let n_u = opts.base_time_nodes << level;
    let ppu = opts.base_ppu * (1 << level) as f64;
    let rule_u = gauss_rule(n_u);
    let rule_z = gauss_rule(10);
    let mut total = 0.0;
    for (un, uw) in rule_u.nodes.iter().zip(&rule_u.weights) {
        // s = t sin^2(u), u in (0, pi/2); absorbs both endpoint square roots.
        let u = std::f64::consts::FRAC_PI_4 * (un + 1.0);
        let s = t * u.sin().powi(2);
        let jac = std::f64::consts::FRAC_PI_4 * t * (2.0 * u).sin();
        if s <= 0.0 || s >= t {
            continue;
        }
        let w_p = (4.0 * s).sqrt();
        let w_r = (4.0 * (t - s)).sqrt();
        let mut inner = 0.0;
        for e in 0..q.edge_count() {
            let len = q.graph().edges()[e].length;
            let mut breaks = Vec::new();
            cluster_breaks(q, e, x, w_p, &mut breaks);
            cluster_breaks(q, e, y, w_r, &mut breaks);
            breaks.sort_by(|a, b| a.partial_cmp(b).unwrap());
            breaks.dedup_by(|a, b| (*a - *b).abs() < 1e-12);
            let mut cuts = vec![0.0];
            cuts.extend(breaks);
            cuts.push(len);
            for pair in cuts.windows(2) {
                let (a, b) = (pair[0], pair[1]);
                if b - a < 1e-14 {
                    continue;
                }
                let panels = ((b - a) * ppu).ceil().max(1.0) as usize;
                let h = (b - a) / panels as f64;
                for pidx in 0..panels {
                    let a0 = a + pidx as f64 * h;
                    for (zn, zw) in rule_z.nodes.iter().zip(&rule_z.weights) {
                        let z = a0 + 0.5 * h * (zn + 1.0);
                        let zp = Point { edge: e, x: z };
                        let pv = p.eval(s, x, zp)?;
                        if pv != 0.0 {
                            let rv = r.eval(t - s, zp, y)?;
                            inner += 0.5 * h * zw * pv * rv;
                        }
                    }
                }
            }
        }
        total += uw * jac * inner;
    }
    Ok(total)
}

/// (P * Q)(t, x, y) = int_0^t int_G P(s, x, z) Q(t-s, z, y) dz ds, with the
/// endpoint-regularizing substitution s = t sin²(u) and cluster-refined
/// spatial panels; levels are refined until the change drops below `tol`.
pub fn convolve_at(
    q: &QuantumGraph,
    p: &dyn HeatKernelFn,
    r: &dyn HeatKernelFn,
    t: f64,
    x: Point,
    y: Point,
    opts: &ConvolveOptions,
) -> Result<f64> {
    let mut prev = convolve_level(q, p, r, t, x, y, 0, opts)?;
    for level in 1..=opts.max_level {
        let next = convolve_level(q, p, r, t, x, y, level, opts)?;
        let change = (next - prev).abs();
        if change <= opts.tol * (1.0 + next.abs()) {
            return Ok(next);
        }
        prev = next;
    }
    Err(QgError::QuadratureAccuracy {
        achieved: prev.abs() * opts.tol * 10.0,
        requested: opts.tol,
    })
}

/// A kernel materialized on (time grid) x (spatial grid)^2, interpolated
/// linearly in space and by the claimed power law below the first time node.
#[derive(Debug, Clone)]
pub struct SampledKernel {
    pub times: Vec<f64>,
    pub points: Vec<Point>,
    /// values[ti][xi][yi]
    pub values: Vec<Vec<Vec<f64>>>,
    pub order: f64,
}

impl SampledKernel {
    pub fn materialize(
        k: &dyn HeatKernelFn,
        times: Vec<f64>,
        points: Vec<Point>,
    ) -> Result<Self> {
        let mut values = Vec::with_capacity(times.len());
        for &t in &times {
            let mut slab = Vec::with_capacity(points.len());
            for &x in &points {
                let mut row = Vec::with_capacity(points.len());
                for &y in &points {
                    let v = k.eval(t, x, y)?;
                    if !v.is_finite() {
                        return Err(QgError::Inconsistency(format!(
                            "non-finite kernel value at t = {t}"
                        )));
                    }
                    row.push(v);
                }
                slab.push(row);
            }
            values.push(slab);
        }
        let sk = SampledKernel {
            times,
            points,
            values,
            order: k.order(),
        };
        sk.validate()?;
        Ok(sk)
    }

    pub fn validate(&self) -> Result<()> {
        if !self.times.windows(2).all(|w| w[0] < w[1]) {
            return Err(QgError::Inconsistency(
                "kernel time grid must be strictly increasing".into(),
            ));
        }
        Ok(())
    }

    fn nearest_index(&self, p: Point) -> usize {
        let mut best = 0;
        let mut best_d = f64::INFINITY;
        for (i, &c) in self.points.iter().enumerate() {
            if c.edge == p.edge {
                let d = (c.x - p.x).abs();
                if d < best_d {
                    best_d = d;
                    best = i;
                }
            }
        }
        best
    }

    /// Piecewise-constant-in-space (nearest grid point), power-law in t
    /// below the grid, linear in t inside it.
    pub fn interp(&self, t: f64, x: Point, y: Point) -> f64 {
        let xi = self.nearest_index(x);
        let yi = self.nearest_index(y);
        let t0 = self.times[0];
        if t <= t0 {
            let scale = if self.order != 0.0 {
                (t / t0).powf(self.order)
            } else {
                1.0
            };
            return self.values[0][xi][yi] * scale;
        }
        let last = self.times.len() - 1;
        if t >= self.times[last] {
            return self.values[last][xi][yi];
        }
        let hi = self.times.partition_point(|&s| s < t).max(1);
        let (ta, tb) = (self.times[hi - 1], self.times[hi]);
        let w = (t - ta) / (tb - ta);
        (1.0 - w) * self.values[hi - 1][xi][yi] + w * self.values[hi][xi][yi]
    }
}

impl HeatKernelFn for SampledKernel {
    fn eval(&self, t: f64, x: Point, y: Point) -> Result<f64> {
        Ok(self.interp(t, x, y))
    }
    fn order(&self) -> f64 {
        self.order
    }
}

/// Per-term data of the truncated correction series.
#[derive(Debug, Clone)]
pub struct LeviReport {
    /// Parametrix value h~_k(t, x, y).
    pub parametrix: f64,
    /// Signed terms (-1)^l (h~ * g~^{*l}) for l = 1 ..= l_max.
    pub terms: Vec<f64>,
    /// Factorial envelope bound for each term magnitude, from the fitted
    /// first-term constant.
    pub envelopes: Vec<f64>,
    pub value: f64,
}

/// Truncated correction series e ≈ h~ + sum_{l>=1} (-1)^l h~ * g~^{*l} at
/// one evaluation point, on deliberately coarse grids.
pub fn levi_correction(
    q: &QuantumGraph,
    par: &GraphParametrix<'_>,
    l_max: usize,
    t: f64,
    x: Point,
    y: Point,
) -> Result<LeviReport> {
    assert!(l_max >= 1 && l_max <= 3);
    let h_kernel = ParametrixKernel { par };
    let g_kernel = ResidualKernel { par, q };
    // Tolerance scaled to the expected size of the first correction term,
    // so small-t evaluations are not drowned by an absolute cutoff.
    let coarse = ConvolveOptions {
        tol: (1e-3 * t.powf(par.order as f64 + 0.5)).max(1e-9),
        max_level: 4,
        base_time_nodes: 12,
        base_ppu: 4.0,
    };
    let parametrix = par.value(t, x, y)?;
    let mut terms = Vec::new();
    // l = 1 exactly: h~ * g~ with both factors evaluated directly.
    let t1 = convolve_at(q, &h_kernel, &g_kernel, t, x, y, &coarse)?;
    terms.push(-t1);
    if l_max >= 2 {
        // Materialize g~ once, then build its convolution powers on the grid.
        let mut times = Vec::new();
        let n_t = 10;
        for i in 0..n_t {
            times.push(t * ((i + 1) as f64 / n_t as f64).powi(2));
        }
        let mut points = Vec::new();
        for (e, edge) in q.graph().edges().iter().enumerate() {
            let n = ((edge.length * 6.0).ceil() as usize).max(4);
            for i in 0..n {
                points.push(Point {
                    edge: e,
                    x: edge.length * (i as f64 + 0.5) / n as f64,
                });
            }
        }
        let mut power = SampledKernel::materialize(&g_kernel, times.clone(), points.clone())?;
        for l in 2..=l_max {
            let next_order = power.order + g_kernel.order() + 1.0;
            let mut values = Vec::with_capacity(times.len());
            for &ti in &times {
                let mut slab = Vec::with_capacity(points.len());
                for &xi in &points {
                    let mut row = Vec::with_capacity(points.len());
                    for &yi in &points {
                        row.push(convolve_at(q, &power, &g_kernel, ti, xi, yi, &coarse)?);
                    }
                    slab.push(row);
                }
                values.push(slab);
            }
            power = SampledKernel {
                times: times.clone(),
                points: points.clone(),
                values,
                order: next_order,
            };
            let tl = convolve_at(q, &h_kernel, &power, t, x, y, &coarse)?;
            terms.push(if l % 2 == 0 { tl } else { -tl });
        }
    }
    // Envelope |g~^{*l}| <= C Cbar^{l-1} L^{l-1} t^{k-1/2+l-1} / prod, so the
    // convolved term picks up one more order; fit C from the first term.
    let k = par.order as f64;
    let total_len = q.total_length();
    let c_fit = terms[0].abs() / t.powf(k + 0.5).max(1e-300);
    let mut envelopes = Vec::new();
    for (i, _) in terms.iter().enumerate() {
        let l = (i + 1) as f64;
        let mut denom = 1.0;
        for j in 1..(i + 1) {
            denom *= k - 0.5 + j as f64;
        }
        envelopes.push(
            c_fit * total_len.powf(l - 1.0) * t.powf(k + 0.5 + l - 1.0) / denom,
        );
    }
    let value = parametrix + terms.iter().sum::<f64>();
    Ok(LeviReport {
        parametrix,
        terms,
        envelopes,
        value,
    })
}

/// The truncated small-time expansion of the heat trace.
pub fn asymptotic_trace(coeffs: &HeatCoefficients, t: f64, n_max: usize) -> f64 {
    assert!(t > 0.0);
    let n_max = n_max.min(coeffs.n_max);
    let pre = 1.0 / (4.0 * std::f64::consts::PI * t).sqrt();
    let mut sum = 0.0;
    let mut tn = 1.0;
    for n in 0..=n_max {
        sum += pre * coeffs.bulk[n] * tn + 0.25 * coeffs.vertex_sum[n] * tn;
        tn *= t;
    }
    sum
}

#[derive(Debug, Clone)]
pub struct TraceRow {
    pub t: f64,
    pub spectral: f64,
    pub asymptotic: f64,
    pub residual: f64,
    pub tail_bound: f64,
}

#[derive(Debug, Clone)]
pub struct TraceComparison {
    pub rows: Vec<TraceRow>,
    /// Fitted log-log slope of |residual| vs t (None when everything is at
    /// the noise floor).
    pub slope: Option<f64>,
}

/// Residual spectral - asymptotic(n_max) over a t-grid, with the fitted
/// log-log slope of |residual|; points within 100x of the spectral tail
/// bound are excluded from the slope fit.
pub fn compare_trace(
    res: &crate::spectrum::SpectralResolution,
    coeffs: &HeatCoefficients,
    ts: &[f64],
    n_max: usize,
) -> Result<TraceComparison> {
    let mut rows = Vec::with_capacity(ts.len());
    for &t in ts {
        let sp = crate::spectrum::spectral_heat_trace(res, t, f64::INFINITY)?;
        let asym = asymptotic_trace(coeffs, t, n_max);
        rows.push(TraceRow {
            t,
            spectral: sp.value,
            asymptotic: asym,
            residual: sp.value - asym,
            tail_bound: sp.tail_bound,
        });
    }
    let usable: Vec<&TraceRow> = rows
        .iter()
        .filter(|r| r.residual.abs() > 1e2 * r.tail_bound && r.residual.abs() > 0.0)
        .collect();
    let slope = if usable.len() >= 3 {
        let ones = vec![1.0; usable.len()];
        let logt: Vec<f64> = usable.iter().map(|r| r.t.ln()).collect();
        let logr: Vec<f64> = usable.iter().map(|r| r.residual.abs().ln()).collect();
        let fit = least_squares(&[ones, logt], &logr, 1e12)?;
        Some(fit.coeffs[1])
    } else {
        None
    };
    Ok(TraceComparison { rows, slope })
}

pub fn trace_csv(rows: &[TraceRow]) -> String {
    let mut out = String::from("t,spectral_trace,asymptotic_trace,residual,tail_bound\n");
    for r in rows {
        out.push_str(&format!(
            "{},{},{},{},{}\n",
            g17(r.t),
            g17(r.spectral),
            g17(r.asymptotic),
            g17(r.residual),
            g17(r.tail_bound)
        ));
    }
    out
}

/// Inverse problem: fit sum_{n=0..3} (b_n t^{n-1/2} + v_n t^n) to trace
/// samples and read off the geometric invariants.
#[derive(Debug, Clone)]
pub struct InvariantFit {
    /// sqrt(4 pi) b_0.
    pub total_length: f64,
    /// sqrt(4 pi) b_1.
    pub potential_integral: f64,
    /// 4 v_0 = sum_v sum_alpha sigma^{aa}.
    pub sigma_weight: f64,
    /// 4 v_1 = sum_v sigma-trace U(v).
    pub sigma_u_weight: f64,
    pub fit: LsqFit,
}

pub fn fit_invariants(samples: &[(f64, f64)]) -> Result<InvariantFit> {
    if samples.len() < 8 {
        return Err(QgError::Domain(
            "at least 8 trace samples are required".into(),
        ));
    }
    for &(t, _) in samples {
        if t <= 0.0 {
            return Err(QgError::Domain("sample times must be positive".into()));
        }
    }
    let ts: Vec<f64> = samples.iter().map(|s| s.0).collect();
    let ys: Vec<f64> = samples.iter().map(|s| s.1).collect();
    // Columns: t^{-1/2}, t^{1/2}, t^{3/2}, t^{5/2}, 1, t, t^2, t^3.
    let powers = [-0.5, 0.5, 1.5, 2.5, 0.0, 1.0, 2.0, 3.0];
    let cols: Vec<Vec<f64>> = powers
        .iter()
        .map(|&p| ts.iter().map(|&t| t.powf(p)).collect())
        .collect();
    let fit = least_squares(&cols, &ys, 1e10).map_err(|e| match e {
        QgError::IllConditioned { cond, .. } => QgError::IllConditioned {
            cond,
            hint: format!(
                "widen the sample range [{:.3e}, {:.3e}] toward smaller t",
                ts.iter().cloned().fold(f64::INFINITY, f64::min),
                ts.iter().cloned().fold(0.0, f64::max)
            ),
        },
        other => other,
    })?;
    let sqrt4pi = (4.0 * std::f64::consts::PI).sqrt();
    Ok(InvariantFit {
        total_length: sqrt4pi * fit.coeffs[0],
        potential_integral: sqrt4pi * fit.coeffs[1],
        sigma_weight: 4.0 * fit.coeffs[4],
        sigma_u_weight: 4.0 * fit.coeffs[5],
        fit,
    })
}

pub fn fit_csv(fit: &InvariantFit) -> String {
    let sqrt4pi = (4.0 * std::f64::consts::PI).sqrt();
    let mut out = String::from("parameter,estimate,stderr\n");
    let rows = [
        ("total_length", fit.total_length, sqrt4pi * fit.fit.stderr[0]),
        (
            "potential_integral",
            fit.potential_integral,
            sqrt4pi * fit.fit.stderr[1],
        ),
        ("sigma_weight", fit.sigma_weight, 4.0 * fit.fit.stderr[4]),
        (
            "sigma_u_weight",
            fit.sigma_u_weight,
            4.0 * fit.fit.stderr[5],
        ),
    ];
    for (name, est, err) in rows {
        out.push_str(&format!("{},{},{}\n", name, g17(est), g17(err)));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{ConditionKind, EdgePotential};
    use approx::assert_abs_diff_eq;
    use std::f64::consts::PI;

    fn unit_interval() -> QuantumGraph {
        QuantumGraph::interval(
            1.0,
            ConditionKind::Neumann,
            ConditionKind::Neumann,
            EdgePotential::zero(1.0),
        )
        .unwrap()
    }

    fn constant_kernel(c: f64) -> FnKernel<impl Fn(f64, Point, Point) -> Result<f64> + Sync> {
        FnKernel {
            f: move |_t, _x, _y| Ok(c),
            order: 0.0,
        }
    }

    fn power_kernel(a: f64) -> FnKernel<impl Fn(f64, Point, Point) -> Result<f64> + Sync> {
        FnKernel {
            f: move |t: f64, _x, _y| Ok(t.powf(a)),
            order: a,
        }
    }

    #[test]
    fn convolve_constants_gives_length_times_t() {
        let q = unit_interval();
        let p = constant_kernel(1.0);
        let r = constant_kernel(1.0);
        let t = 0.3;
        let v = convolve_at(
            &q,
            &p,
            &r,
            t,
            Point { edge: 0, x: 0.5 },
            Point { edge: 0, x: 0.5 },
            &ConvolveOptions::default(),
        )
        .unwrap();
        assert_abs_diff_eq!(v, q.total_length() * t, epsilon = 1e-8);
    }

    #[test]
    fn convolve_power_kernels_beta_law() {
        // P = s^a, Q = s^b: (P*Q)(t) = L t^{a+b+1} B(a+1, b+1).
        let q = unit_interval();
        let x = Point { edge: 0, x: 0.3 };
        let cases = [
            (0.0, 0.0, 1.0),               // B(1,1) = 1
            (1.0, 1.0, 1.0 / 6.0),         // B(2,2) = 1/6
            (0.5, 1.0, 4.0 / 15.0),        // B(1.5, 2) = 4/15
        ];
        for (a, b, beta) in cases {
            let p = power_kernel(a);
            let r = power_kernel(b);
            for t in [0.2, 0.4] {
                let v = convolve_at(&q, &p, &r, t, x, x, &ConvolveOptions::default()).unwrap();
                let expect = q.total_length() * t.powf(a + b + 1.0) * beta;
                assert_abs_diff_eq!(v, expect, epsilon = 1e-6 * expect.abs());
            }
        }
    }

    #[test]
    fn convolve_order_composition_slopes() {
        let q = unit_interval();
        let x = Point { edge: 0, x: 0.3 };
        for (a, b) in [(0.0, 0.5), (0.5, 1.0), (1.0, 2.0)] {
            let p = power_kernel(a);
            let r = power_kernel(b);
            let (t1, t2) = (0.05, 0.4);
            let v1 = convolve_at(&q, &p, &r, t1, x, x, &ConvolveOptions::default()).unwrap();
            let v2 = convolve_at(&q, &p, &r, t2, x, x, &ConvolveOptions::default()).unwrap();
            let slope = (v2 / v1).ln() / (t2 / t1).ln();
            assert_abs_diff_eq!(slope, a + b + 1.0, epsilon = 0.05);
        }
    }

    #[test]
    fn convolve_bilinearity() {
        let q = unit_interval();
        let x = Point { edge: 0, x: 0.4 };
        let y = Point { edge: 0, x: 0.7 };
        let p1 = power_kernel(0.5);
        let p2 = constant_kernel(0.8);
        let r = power_kernel(1.0);
        let t = 0.25;
        let opts = ConvolveOptions::default();
        let lhs_kernel = FnKernel {
            f: |t: f64, a: Point, b: Point| {
                Ok(2.0 * t.powf(0.5) + 3.0 * 0.8 + 0.0 * (a.x + b.x))
            },
            order: 0.0,
        };
        let lhs = convolve_at(&q, &lhs_kernel, &r, t, x, y, &opts).unwrap();
        let v1 = convolve_at(&q, &p1, &r, t, x, y, &opts).unwrap();
        let v2 = convolve_at(&q, &p2, &r, t, x, y, &opts).unwrap();
        assert_abs_diff_eq!(lhs, 2.0 * v1 + 3.0 * v2, epsilon = 1e-10 + 1e-8 * lhs.abs());
    }

    #[test]
    fn asymptotic_trace_neumann_interval() {
        let q = QuantumGraph::interval(
            PI,
            ConditionKind::Neumann,
            ConditionKind::Neumann,
            EdgePotential::zero(PI),
        )
        .unwrap();
        let coeffs = crate::parametrix::heat_coefficients(&q, 3).unwrap();
        let t = 0.1;
        let expect = PI / (4.0 * PI * t).sqrt() + 0.5;
        assert_abs_diff_eq!(asymptotic_trace(&coeffs, t, 3), expect, epsilon = 1e-12);
        assert_abs_diff_eq!(asymptotic_trace(&coeffs, t, 0), expect, epsilon = 1e-12);
    }

    #[test]
    fn asymptotic_trace_is_linear_in_coefficients() {
        let q = QuantumGraph::interval(
            PI,
            ConditionKind::Neumann,
            ConditionKind::Neumann,
            EdgePotential::new(vec![0.0, 0.0, 1.0], PI),
        )
        .unwrap();
        let coeffs = crate::parametrix::heat_coefficients(&q, 3).unwrap();
        let mut doubled = coeffs.clone();
        for b in doubled.bulk.iter_mut() {
            *b *= 2.0;
        }
        for s in doubled.vertex_sum.iter_mut() {
            *s *= 2.0;
        }
        let t = 0.07;
        assert_abs_diff_eq!(
            asymptotic_trace(&doubled, t, 3),
            2.0 * asymptotic_trace(&coeffs, t, 3),
            epsilon = 1e-13
        );
    }

    #[test]
    fn fit_invariants_round_trip() {
        // Noiseless samples generated from the fit model itself.
        let b = [2.0, -0.7, 0.3, 0.05];
        let v = [0.5, 0.9, -0.2, 0.01];
        let ts: Vec<f64> = (0..24)
            .map(|i| 1e-3 * (100.0f64).powf(i as f64 / 23.0))
            .collect();
        let samples: Vec<(f64, f64)> = ts
            .iter()
            .map(|&t| {
                let mut y = 0.0;
                for n in 0..4 {
                    y += b[n] * t.powf(n as f64 - 0.5) + v[n] * t.powi(n as i32);
                }
                (t, y)
            })
            .collect();
        let fit = fit_invariants(&samples).unwrap();
        let sqrt4pi = (4.0 * PI).sqrt();
        assert_abs_diff_eq!(fit.total_length / sqrt4pi, b[0], epsilon = 1e-8 * b[0].abs());
        assert_abs_diff_eq!(
            fit.potential_integral / sqrt4pi,
            b[1],
            epsilon = 1e-8 * b[1].abs()
        );
        assert_abs_diff_eq!(fit.sigma_weight / 4.0, v[0], epsilon = 1e-8);
        assert_abs_diff_eq!(fit.sigma_u_weight / 4.0, v[1], epsilon = 1e-7);

        // Permuting and duplicating samples leaves the estimates unchanged.
        let mut shuffled = samples.clone();
        shuffled.reverse();
        shuffled.extend_from_slice(&samples[..4]);
        let fit2 = fit_invariants(&shuffled).unwrap();
        assert_abs_diff_eq!(fit2.total_length, fit.total_length, epsilon = 1e-9);
        assert_abs_diff_eq!(
            fit2.potential_integral,
            fit.potential_integral,
            epsilon = 1e-8
        );
    }

    #[test]
    fn fit_requires_enough_samples() {
        let samples: Vec<(f64, f64)> = (0..5).map(|i| (0.01 * (i + 1) as f64, 1.0)).collect();
        assert!(fit_invariants(&samples).is_err());
    }

    #[test]
    fn trace_csv_header() {
        let rows = vec![TraceRow {
            t: 0.1,
            spectral: 3.3,
            asymptotic: 3.3,
            residual: 0.0,
            tail_bound: 1e-12,
        }];
        let csv = trace_csv(&rows);
        assert!(csv.starts_with("t,spectral_trace,asymptotic_trace,residual,tail_bound\n"));
        assert_eq!(csv.lines().count(), 2);
    }
}
