//! Basis solutions of -y'' - U y = lambda y on a single edge.
//!
//! Normalization: y1(0) = 1, y1'(0) = 0, y2(0) = 0, y2'(0) = 1. The second
//! solution uses a unit derivative (not the plane-wave k) so that the pair
//! stays regular at lambda = 0 and extends to negative lambda; comparisons
//! against the plane-wave normalization rescale explicitly.

use crate::error::{QgError, Result};
use crate::graph::EdgePotential;
use crate::ode::{integrate, OdeOptions};

/// Both basis solutions and their derivatives, packed as
/// [y1, y1', y2, y2'].
pub type State = [f64; 4];

#[derive(Debug, Clone)]
pub struct BasisSolutionPair {
    pub lambda: f64,
    /// State at x = L.
    pub at_end: State,
    /// States at the requested sample points (same order).
    pub samples: Vec<(f64, State)>,
}

impl BasisSolutionPair {
    /// Transfer matrix [[y1(L), y2(L)], [y1'(L), y2'(L)]].
    pub fn transfer(&self) -> [[f64; 2]; 2] {
        [
            [self.at_end[0], self.at_end[2]],
            [self.at_end[1], self.at_end[3]],
        ]
    }
}

/// Wronskian y1 y2' - y1' y2 of a packed state (1 by Abel's identity).
pub fn wronskian(s: &State) -> f64 {
    s[0] * s[3] - s[1] * s[2]
}

#[derive(Debug, Clone, Copy)]
pub struct SolveOptions {
    pub ode: OdeOptions,
    /// Reject |lambda| beyond this.
    pub lambda_bound: f64,
    /// Reject lambda below -(sup|U| + this).
    pub negative_margin: f64,
}

impl Default for SolveOptions {
    fn default() -> Self {
        SolveOptions {
            ode: OdeOptions::default(),
            lambda_bound: 1e6,
            negative_margin: 100.0,
        }
    }
}

/// Solve for both basis solutions, sampling at `points` (sorted ascending,
/// within (0, L]) and always at the endpoint.
pub fn solve_basis(
    potential: &EdgePotential,
    lambda: f64,
    points: &[f64],
    opts: &SolveOptions,
) -> Result<BasisSolutionPair> {
    let length = potential.length();
    let sup = potential.sup_bound();
    if lambda.abs() > opts.lambda_bound {
        return Err(QgError::Domain(format!(
            "|lambda| = {} exceeds the configured bound {}",
            lambda.abs(),
            opts.lambda_bound
        )));
    }
    if lambda < -(sup + opts.negative_margin) {
        return Err(QgError::Domain(format!(
            "lambda = {lambda} below the negative search window"
        )));
    }
    // Oscillation / growth-rate step cap.
    let omega = (lambda.abs() + sup + 1.0).sqrt();
    let ode = OdeOptions {
        max_step: (std::f64::consts::PI / (8.0 * omega)).min(length),
        ..opts.ode
    };
    let mut samples = Vec::with_capacity(points.len());
    let rhs = |x: f64, y: &State| -> State {
        let w = lambda + potential.eval_unchecked(x, 0);
        [y[1], -w * y[0], y[3], -w * y[2]]
    };
    let at_end = integrate(
        rhs,
        0.0,
        length,
        [1.0, 0.0, 0.0, 1.0],
        points,
        &ode,
        |x, y| {
            if x < length || points.last() == Some(&length) {
                if samples.len() < points.len() {
                    samples.push((x, *y));
                }
            }
        },
    )?;
    Ok(BasisSolutionPair {
        lambda,
        at_end,
        samples,
    })
}

/// Endpoint states only.
pub fn endpoint_state(
    potential: &EdgePotential,
    lambda: f64,
    opts: &SolveOptions,
) -> Result<State> {
    Ok(solve_basis(potential, lambda, &[], opts)?.at_end)
}

/// Report for the plane-wave remainder bound
/// |y_{1,2} - plane wave| <= (1/k) exp(||U|| L).
#[derive(Debug, Clone)]
pub struct RemainderReport {
    pub k: f64,
    /// max_x |y1(x) - cos(kx)|
    pub max_e1: f64,
    /// max_x |k y2(x) - sin(kx)| (converted to the y2'(0) = k normalization)
    pub max_e2: f64,
    /// (1/k) exp(||U||_{L2} L)
    pub bound: f64,
    pub u_norm_l2: f64,
    pub u_norm_l1: f64,
    pub passes: bool,
}

/// Compare both solutions against the zero-potential plane waves on a grid
/// and check the remainder bound. The bound uses the L2 norm of U; the L1
/// norm is reported alongside.
pub fn remainder_bound_check(
    potential: &EdgePotential,
    k: f64,
    opts: &SolveOptions,
) -> Result<RemainderReport> {
    assert!(k > 0.0);
    let length = potential.length();
    let n = 256;
    let points: Vec<f64> = (1..=n).map(|i| length * i as f64 / n as f64).collect();
    let pair = solve_basis(potential, k * k, &points, opts)?;
    let mut max_e1 = 0.0f64;
    let mut max_e2 = 0.0f64;
    for (x, s) in &pair.samples {
        max_e1 = max_e1.max((s[0] - (k * x).cos()).abs());
        max_e2 = max_e2.max((k * s[2] - (k * x).sin()).abs());
    }
    let u_norm_l2 = potential.l2_norm();
    let u_norm_l1 = potential.l1_norm();
    let bound = (u_norm_l2 * length).exp() / k;
    Ok(RemainderReport {
        k,
        max_e1,
        max_e2,
        bound,
        u_norm_l2,
        u_norm_l1,
        passes: max_e1 <= bound && max_e2 <= bound,
    })
}
