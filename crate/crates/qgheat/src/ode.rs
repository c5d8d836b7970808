//! Adaptive Dormand-Prince 5(4) integration for small ODE systems.
//!
//! Plain embedded error control with a step cap is enough here: the systems
//! are low-dimensional and linear, and downstream eigenvalue accuracy is
//! limited by the tolerances configured in [`OdeOptions`].

use crate::error::{QgError, Result};

/// Tolerances and step limits for the integrator.
#[derive(Debug, Clone, Copy)]
pub struct OdeOptions {
    pub rtol: f64,
    pub atol: f64,
    /// Hard cap on the step size (oscillation control).
    pub max_step: f64,
}

impl Default for OdeOptions {
    fn default() -> Self {
        OdeOptions {
            rtol: 1e-12,
            atol: 1e-13,
            max_step: f64::INFINITY,
        }
    }
}

const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const B1: f64 = 35.0 / 384.0;
const B3: f64 = 500.0 / 1113.0;
const B4: f64 = 125.0 / 192.0;
const B5: f64 = -2187.0 / 6784.0;
const B6: f64 = 11.0 / 84.0;
// 4th-order embedded weights.
const E1: f64 = 5179.0 / 57600.0;
const E3: f64 = 7571.0 / 16695.0;
const E4: f64 = 393.0 / 640.0;
const E5: f64 = -92097.0 / 339200.0;
const E6: f64 = 187.0 / 2100.0;
const E7: f64 = 1.0 / 40.0;

const C2: f64 = 1.0 / 5.0;
const C3: f64 = 3.0 / 10.0;
const C4: f64 = 4.0 / 5.0;
const C5: f64 = 8.0 / 9.0;

/// Integrate y' = f(x, y) from `x0` to `x1` (x1 > x0), invoking `on_sample`
/// at every requested sample point and at `x1`. Sample points must be sorted
/// ascending and lie in (x0, x1]; steps are clipped so each is hit exactly.
pub fn integrate<const N: usize, F, S>(
    mut f: F,
    x0: f64,
    x1: f64,
    y0: [f64; N],
    samples: &[f64],
    opts: &OdeOptions,
    mut on_sample: S,
) -> Result<[f64; N]>
where
    F: FnMut(f64, &[f64; N]) -> [f64; N],
    S: FnMut(f64, &[f64; N]),
{
    assert!(x1 > x0);
    let span = x1 - x0;
    let mut x = x0;
    let mut y = y0;
    let mut k1 = f(x, &y);
    let mut h = (span / 16.0).min(opts.max_step);
    let mut next_sample = 0usize;
    let min_step = 16.0 * f64::EPSILON * span.max(x1.abs());

    while x < x1 {
        // Clip to the next sample point / endpoint.
        let mut target = x1;
        if next_sample < samples.len() {
            target = samples[next_sample].min(x1);
        }
        if h > target - x {
            h = target - x;
        }
        if h < min_step {
            h = min_step;
        }

        let mut y2 = y;
        for i in 0..N {
            y2[i] = y[i] + h * A21 * k1[i];
        }
        let k2 = f(x + C2 * h, &y2);
        let mut y3 = y;
        for i in 0..N {
            y3[i] = y[i] + h * (A31 * k1[i] + A32 * k2[i]);
        }
        let k3 = f(x + C3 * h, &y3);
        let mut y4 = y;
        for i in 0..N {
            y4[i] = y[i] + h * (A41 * k1[i] + A42 * k2[i] + A43 * k3[i]);
        }
        let k4 = f(x + C4 * h, &y4);
        let mut y5 = y;
        for i in 0..N {
            y5[i] = y[i] + h * (A51 * k1[i] + A52 * k2[i] + A53 * k3[i] + A54 * k4[i]);
        }
        let k5 = f(x + C5 * h, &y5);
        let mut y6 = y;
        for i in 0..N {
            y6[i] =
                y[i] + h * (A61 * k1[i] + A62 * k2[i] + A63 * k3[i] + A64 * k4[i] + A65 * k5[i]);
        }
        let k6 = f(x + h, &y6);
        let mut ynew = y;
        for i in 0..N {
            ynew[i] =
                y[i] + h * (B1 * k1[i] + B3 * k3[i] + B4 * k4[i] + B5 * k5[i] + B6 * k6[i]);
        }
        let k7 = f(x + h, &ynew);

        // Embedded 4th-order error estimate.
        let mut err = 0.0f64;
        for i in 0..N {
            let y4th = y[i]
                + h * (E1 * k1[i] + E3 * k3[i] + E4 * k4[i] + E5 * k5[i] + E6 * k6[i]
                    + E7 * k7[i]);
            let sc = opts.atol + opts.rtol * ynew[i].abs().max(y[i].abs());
            let e = (ynew[i] - y4th) / sc;
            err += e * e;
        }
        err = (err / N as f64).sqrt();

        if err <= 1.0 || h <= min_step * 1.0001 {
            if err > 1.0 {
                // Step floor reached without meeting the tolerance.
                return Err(QgError::IntegrationFailure {
                    achieved: err * opts.atol,
                });
            }
            x += h;
            y = ynew;
            k1 = k7; // FSAL
            if next_sample < samples.len() && (x - samples[next_sample]).abs() <= min_step {
                on_sample(samples[next_sample], &y);
                next_sample += 1;
            }
        }

        let factor = if err > 0.0 {
            (0.9 * err.powf(-0.2)).clamp(0.2, 5.0)
        } else {
            5.0
        };
        h = (h * factor).min(opts.max_step).min(span);
    }
    // Flush any samples that coincide with the endpoint.
    while next_sample < samples.len() {
        on_sample(samples[next_sample], &y);
        next_sample += 1;
    }
    on_sample(x1, &y);
    Ok(y)
}
