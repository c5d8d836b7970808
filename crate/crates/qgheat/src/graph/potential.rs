//! Edge potentials as finite cosine series.
//!
//! U(x) = sum_m c_m cos(m pi x / L) on [0, L]. Every odd derivative of this
//! basis vanishes at both endpoints, so the vertex-smoothness requirement on
//! odd derivatives holds identically rather than approximately.

use crate::error::{QgError, Result};

/// sin(pi s), exactly zero at integer s.
pub fn sin_pi(s: f64) -> f64 {
    let k = s.round();
    let r = s - k;
    let v = (std::f64::consts::PI * r).sin();
    if (k as i64) % 2 == 0 {
        v
    } else {
        -v
    }
}

/// cos(pi s), exactly zero at half-integer s.
pub fn cos_pi(s: f64) -> f64 {
    sin_pi(s + 0.5)
}

/// Potential on a single edge, stored as cosine-series coefficients.
#[derive(Debug, Clone, PartialEq)]
pub struct EdgePotential {
    coeffs: Vec<f64>,
    length: f64,
}

impl EdgePotential {
    pub fn new(coeffs: Vec<f64>, length: f64) -> Self {
        assert!(length > 0.0 && length.is_finite());
        EdgePotential { coeffs, length }
    }

    pub fn zero(length: f64) -> Self {
        EdgePotential::new(Vec::new(), length)
    }

    pub fn constant(c: f64, length: f64) -> Self {
        EdgePotential::new(vec![c], length)
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn length(&self) -> f64 {
        self.length
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.iter().all(|&c| c == 0.0)
    }

    /// U^(order)(x), valid for any real x and any order (the series extends
    /// to the whole line as the even periodic continuation).
    ///
    /// Evaluated through sin(pi s)/cos(pi s) with exact integer reduction, so
    /// odd derivatives are exact floating-point zeros at x = 0 and x = L.
    pub fn eval_unchecked(&self, x: f64, order: usize) -> f64 {
        let mut sum = 0.0;
        for (m, &c) in self.coeffs.iter().enumerate() {
            if c == 0.0 {
                continue;
            }
            if m == 0 {
                if order == 0 {
                    sum += c;
                }
                continue;
            }
            let omega = m as f64 * std::f64::consts::PI / self.length;
            let s = m as f64 * (x / self.length);
            // d^n/dx^n cos(wx): cycle cos, -sin, -cos, sin.
            let trig = match order % 4 {
                0 => cos_pi(s),
                1 => -sin_pi(s),
                2 => -cos_pi(s),
                _ => sin_pi(s),
            };
            sum += c * omega.powi(order as i32) * trig;
        }
        sum
    }

    /// U^(order)(x) for x in [0, L], order <= 4.
    pub fn eval(&self, x: f64, order: usize) -> Result<f64> {
        if !(0.0..=self.length).contains(&x) {
            return Err(QgError::Domain(format!(
                "coordinate {x} outside [0, {}]",
                self.length
            )));
        }
        if order > 4 {
            return Err(QgError::Domain(format!(
                "derivative order {order} > 4 not supported"
            )));
        }
        Ok(self.eval_unchecked(x, order))
    }

    /// Upper bound for sup |U| (triangle inequality on the series).
    pub fn sup_bound(&self) -> f64 {
        self.coeffs.iter().map(|c| c.abs()).sum()
    }

    /// Largest angular frequency present in the series.
    pub fn max_frequency(&self) -> f64 {
        let m = self
            .coeffs
            .iter()
            .rposition(|&c| c != 0.0)
            .unwrap_or(0);
        m as f64 * std::f64::consts::PI / self.length
    }

    /// L2 norm sqrt(int_0^L U^2 dx), exact from orthogonality of the basis.
    pub fn l2_norm(&self) -> f64 {
        let mut s = 0.0;
        for (m, &c) in self.coeffs.iter().enumerate() {
            s += c * c * if m == 0 { self.length } else { self.length / 2.0 };
        }
        s.sqrt()
    }

    /// L1 norm int_0^L |U| dx by quadrature.
    pub fn l1_norm(&self) -> f64 {
        let panels = (self.length * (self.max_frequency() + 1.0)).ceil() as usize + 1;
        crate::quad::integrate_panels(0.0, self.length, panels, 20, |x| {
            self.eval_unchecked(x, 0).abs()
        })
    }

    /// Potential of the same edge traversed in the opposite direction:
    /// U_rev(x) = U(L - x), which maps c_m -> (-1)^m c_m.
    pub fn reversed(&self) -> Self {
        let coeffs = self
            .coeffs
            .iter()
            .enumerate()
            .map(|(m, &c)| if m % 2 == 0 { c } else { -c })
            .collect();
        EdgePotential::new(coeffs, self.length)
    }

    /// Split at the midpoint into two edge potentials of length L/2.
    ///
    /// Only series with even indices alone can be split this way: an odd-m
    /// mode has a non-vanishing odd derivative at L/2, so the cut point would
    /// violate the vertex-smoothness requirements.
    pub fn split_at_midpoint(&self) -> Result<(Self, Self)> {
        let has_odd = self
            .coeffs
            .iter()
            .enumerate()
            .any(|(m, &c)| m % 2 == 1 && c != 0.0);
        if has_odd {
            return Err(QgError::InvalidPotential(
                "potential has odd cosine modes; its odd derivatives do not vanish at the \
                 midpoint, so a vertex cannot be inserted there"
                    .into(),
            ));
        }
        let half = self.length / 2.0;
        let n_half = self.coeffs.len().div_ceil(2);
        let mut first = vec![0.0; n_half];
        let mut second = vec![0.0; n_half];
        for (m, &c) in self.coeffs.iter().enumerate() {
            if c == 0.0 {
                continue;
            }
            let j = m / 2; // cos(m pi x / L) = cos(j pi x / (L/2))
            first[j] += c;
            // cos(m pi (x + L/2) / L) = cos(j pi x/(L/2) + j pi) = (-1)^j ...
            second[j] += if j % 2 == 0 { c } else { -c };
        }
        Ok((
            EdgePotential::new(first, half),
            EdgePotential::new(second, half),
        ))
    }
}
