//! Gauss-Legendre quadrature.
//!
//! All integrands in this crate are piecewise analytic (trigonometric
//! polynomials, Gaussians, and smooth combinations thereof), so composite
//! fixed-order Gauss-Legendre panels reach machine precision with a panel
//! count chosen from the integrand's frequency scale. Fixed panels also keep
//! the quadrature value a smooth function of the interval endpoints, which
//! matters wherever results are finite-differenced downstream.

use once_cell::sync::Lazy;
use std::collections::HashMap;
use std::sync::Mutex;

/// Nodes and weights on [-1, 1].
#[derive(Debug, Clone)]
pub struct GaussRule {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl GaussRule {
    /// Compute an n-point rule by Newton iteration on the Legendre polynomial.
    fn compute(n: usize) -> Self {
        assert!(n >= 1);
        let mut nodes = vec![0.0; n];
        let mut weights = vec![0.0; n];
        for i in 0..n {
            // Tricomi initial guess.
            let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
            let mut dp = 0.0;
            for _ in 0..100 {
                // Evaluate P_n and P_n' by the Bonnet recurrence.
                let mut p0 = 1.0;
                let mut p1 = x;
                for j in 2..=n {
                    let jf = j as f64;
                    let p2 = ((2.0 * jf - 1.0) * x * p1 - (jf - 1.0) * p0) / jf;
                    p0 = p1;
                    p1 = p2;
                }
                dp = (n as f64) * (x * p1 - p0) / (x * x - 1.0);
                let dx = p1 / dp;
                x -= dx;
                if dx.abs() < 1e-15 {
                    break;
                }
            }
            nodes[n - 1 - i] = x;
            weights[n - 1 - i] = 2.0 / ((1.0 - x * x) * dp * dp);
        }
        GaussRule { nodes, weights }
    }

    /// Integrate f over [a, b] with a single panel.
    pub fn integrate<F: FnMut(f64) -> f64>(&self, a: f64, b: f64, mut f: F) -> f64 {
        let c = 0.5 * (a + b);
        let h = 0.5 * (b - a);
        let mut sum = 0.0;
        for (x, w) in self.nodes.iter().zip(&self.weights) {
            sum += w * f(c + h * x);
        }
        sum * h
    }
}

static RULES: Lazy<Mutex<HashMap<usize, &'static GaussRule>>> =
    Lazy::new(|| Mutex::new(HashMap::new()));

/// Shared n-point rule; computed once and leaked.
pub fn gauss_rule(n: usize) -> &'static GaussRule {
    let mut map = RULES.lock().unwrap();
    map.entry(n)
        .or_insert_with(|| Box::leak(Box::new(GaussRule::compute(n))))
}

/// Composite Gauss-Legendre over [a, b] with `panels` equal panels.
pub fn integrate_panels<F: FnMut(f64) -> f64>(
    a: f64,
    b: f64,
    panels: usize,
    order: usize,
    mut f: F,
) -> f64 {
    let rule = gauss_rule(order);
    let n = panels.max(1);
    let h = (b - a) / n as f64;
    let mut sum = 0.0;
    for i in 0..n {
        let x0 = a + i as f64 * h;
        sum += rule.integrate(x0, x0 + h, &mut f);
    }
    sum
}

/// Composite rule that additionally splits panels at the given breakpoints
/// (points of reduced smoothness of the integrand).
pub fn integrate_with_breaks<F: FnMut(f64) -> f64>(
    a: f64,
    b: f64,
    breaks: &[f64],
    panels_per_unit: f64,
    order: usize,
    mut f: F,
) -> f64 {
    if a == b {
        return 0.0;
    }
    let (lo, hi, sign) = if a < b { (a, b, 1.0) } else { (b, a, -1.0) };
    let mut cuts: Vec<f64> = vec![lo];
    for &c in breaks {
        if c > lo && c < hi {
            cuts.push(c);
        }
    }
    cuts.push(hi);
    cuts.sort_by(|p, q| p.partial_cmp(q).unwrap());
    let mut sum = 0.0;
    for w in cuts.windows(2) {
        let (x0, x1) = (w[0], w[1]);
        let panels = ((x1 - x0) * panels_per_unit).ceil().max(1.0) as usize;
        sum += integrate_panels(x0, x1, panels, order, &mut f);
    }
    sign * sum
}

/// Keep doubling the panel count until two successive values agree to `tol`
/// (absolute + relative). Returns the value and the last observed change.
pub fn integrate_refining<F: FnMut(f64) -> f64>(
    a: f64,
    b: f64,
    order: usize,
    tol: f64,
    max_panels: usize,
    mut f: F,
) -> (f64, f64) {
    let mut panels = 1;
    let mut prev = integrate_panels(a, b, panels, order, &mut f);
    loop {
        panels *= 2;
        let next = integrate_panels(a, b, panels, order, &mut f);
        let change = (next - prev).abs();
        if change <= tol * (1.0 + next.abs()) || panels >= max_panels {
            return (next, change);
        }
        prev = next;
    }
}
