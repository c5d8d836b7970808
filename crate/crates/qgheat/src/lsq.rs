//! Small dense least-squares solver with conditioning diagnostics.

use crate::error::{QgError, Result};
use nalgebra::{DMatrix, DVector};

#[derive(Debug, Clone)]
pub struct LsqFit {
    pub coeffs: Vec<f64>,
    pub stderr: Vec<f64>,
    /// Condition number of the column-normalized design matrix.
    pub cond: f64,
    pub residual_norm: f64,
}

/// Solve min ||X b - y||_2 by SVD on the column-normalized design matrix.
pub fn least_squares(columns: &[Vec<f64>], rhs: &[f64], cond_limit: f64) -> Result<LsqFit> {
    let p = columns.len();
    let n = rhs.len();
    assert!(p > 0 && columns.iter().all(|c| c.len() == n) && n >= p);
    let mut scales = vec![0.0f64; p];
    for (j, col) in columns.iter().enumerate() {
        let norm = col.iter().map(|v| v * v).sum::<f64>().sqrt();
        scales[j] = if norm > 0.0 { norm } else { 1.0 };
    }
    let x = DMatrix::from_fn(n, p, |i, j| columns[j][i] / scales[j]);
    let y = DVector::from_column_slice(rhs);
    let svd = x.clone().svd(true, true);
    let smax = svd.singular_values.iter().cloned().fold(0.0, f64::max);
    let smin = svd
        .singular_values
        .iter()
        .cloned()
        .fold(f64::INFINITY, f64::min);
    let cond = if smin > 0.0 { smax / smin } else { f64::INFINITY };
    if cond > cond_limit {
        return Err(QgError::IllConditioned {
            cond,
            hint: "widen the t-range or reduce the number of fitted powers".into(),
        });
    }
    let b_scaled = svd.solve(&y, 0.0).map_err(|e| QgError::Inconsistency(e.to_string()))?;
    let resid = &x * &b_scaled - &y;
    let rss = resid.iter().map(|v| v * v).sum::<f64>();
    let dof = (n - p).max(1) as f64;
    let sigma2 = rss / dof;
    // var(b_j) = sigma^2 sum_k V[j,k]^2 / s_k^2 (scaled coordinates).
    let v_t = svd.v_t.as_ref().expect("V^T requested");
    let mut stderr = vec![0.0f64; p];
    for j in 0..p {
        let mut var = 0.0;
        for (k, &s) in svd.singular_values.iter().enumerate() {
            if s > 0.0 {
                let vjk = v_t[(k, j)];
                var += vjk * vjk / (s * s);
            }
        }
        stderr[j] = (sigma2 * var).sqrt() / scales[j];
    }
    let coeffs = (0..p).map(|j| b_scaled[j] / scales[j]).collect();
    Ok(LsqFit {
        coeffs,
        stderr,
        cond,
        residual_norm: rss.sqrt(),
    })
}
