//! Vertex boundary conditions A f + B f' = 0 and the scattering matrix
//! sigma = -(A + ikB)^{-1} (A - ikB).

use crate::error::{QgError, Result};
use nalgebra::{Complex, DMatrix};

pub type C64 = Complex<f64>;
pub type CMatrix = DMatrix<C64>;

/// Entrywise tolerance for the k-independence (non-Robin) test.
pub const NON_ROBIN_TOL: f64 = 1e-10;
/// Tolerance for the Hermiticity of A B*.
pub const SELF_ADJOINT_TOL: f64 = 1e-12;
/// Tolerance for unitarity / involutivity of sigma.
pub const SIGMA_TOL: f64 = 1e-10;

pub fn max_abs(m: &CMatrix) -> f64 {
    m.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

/// sigma = -(A + ikB)^{-1} (A - ikB) at spectral parameter k > 0.
pub fn compute_sigma(a: &CMatrix, b: &CMatrix, k: f64) -> Result<CMatrix> {
    let ik = C64::new(0.0, k);
    let lhs = a + b * ik;
    let rhs = a - b * ik;
    let inv = lhs.clone().try_inverse().ok_or(QgError::NonInvertible {
        vertex: String::new(),
        k,
    })?;
    Ok(-(inv * rhs))
}

/// Self-adjointness criterion: A B* Hermitian and (A, B) of full row rank.
pub fn check_self_adjoint(a: &CMatrix, b: &CMatrix) -> bool {
    if a.nrows() != a.ncols() || b.nrows() != b.ncols() || a.nrows() != b.nrows() {
        return false;
    }
    let n = a.nrows();
    let ab = a * b.adjoint();
    if max_abs(&(ab.clone() - ab.adjoint())) > SELF_ADJOINT_TOL {
        return false;
    }
    let mut stacked = CMatrix::zeros(n, 2 * n);
    stacked.view_mut((0, 0), (n, n)).copy_from(a);
    stacked.view_mut((0, n), (n, n)).copy_from(b);
    let sv = stacked.singular_values();
    let smax = sv.iter().cloned().fold(0.0, f64::max);
    if smax == 0.0 {
        return false;
    }
    sv.iter().filter(|&&s| s > 1e-10 * smax).count() == n
}

/// True iff sigma agrees entrywise at the two probe values (k-independence).
pub fn check_non_robin(a: &CMatrix, b: &CMatrix, k1: f64, k2: f64) -> Result<bool> {
    assert!(k1 > 0.0 && k2 > 0.0 && k1 != k2);
    let s1 = compute_sigma(a, b, k1)?;
    let s2 = compute_sigma(a, b, k2)?;
    Ok(max_abs(&(s1 - s2)) < NON_ROBIN_TOL)
}

/// Boundary condition at one vertex, with the derived scattering matrix.
#[derive(Debug, Clone)]
pub struct VertexCondition {
    pub a: CMatrix,
    pub b: CMatrix,
    /// sigma evaluated at k = 1 (k-independent for non-Robin conditions).
    pub sigma: CMatrix,
}

impl VertexCondition {
    /// Build from raw matrices and run the full invariant set.
    pub fn from_matrices(vertex: &str, a: CMatrix, b: CMatrix) -> Result<Self> {
        if !check_self_adjoint(&a, &b) {
            return Err(QgError::InvalidGraph {
                entity: format!("vertex {vertex}"),
                invariant: "A B* must be Hermitian and (A, B) of full row rank".into(),
            });
        }
        let non_robin = check_non_robin(&a, &b, 1.0, 2.0).map_err(|e| match e {
            QgError::NonInvertible { k, .. } => QgError::NonInvertible {
                vertex: vertex.to_string(),
                k,
            },
            other => other,
        })?;
        if !non_robin {
            return Err(QgError::UnsupportedConditions {
                vertex: vertex.to_string(),
                reason: "non-Robin check failed (sigma depends on k)".into(),
            });
        }
        let sigma = compute_sigma(&a, &b, 1.0)?;
        let n = sigma.nrows();
        let eye = CMatrix::identity(n, n);
        if max_abs(&(&sigma * sigma.adjoint() - &eye)) > SIGMA_TOL {
            return Err(QgError::InvalidGraph {
                entity: format!("vertex {vertex}"),
                invariant: "sigma must be unitary".into(),
            });
        }
        if max_abs(&(&sigma * &sigma - &eye)) > SIGMA_TOL {
            return Err(QgError::InvalidGraph {
                entity: format!("vertex {vertex}"),
                invariant: "sigma squared must be the identity".into(),
            });
        }
        Ok(VertexCondition { a, b, sigma })
    }

    /// Kirchhoff-Neumann: continuity of the function and vanishing sum of
    /// outward derivatives. For degree 1 this degenerates to Neumann.
    pub fn kirchhoff(degree: usize) -> Self {
        assert!(degree >= 1);
        let mut a = CMatrix::zeros(degree, degree);
        let mut b = CMatrix::zeros(degree, degree);
        for r in 0..degree.saturating_sub(1) {
            a[(r, r)] = C64::new(1.0, 0.0);
            a[(r, r + 1)] = C64::new(-1.0, 0.0);
        }
        for c in 0..degree {
            b[(degree - 1, c)] = C64::new(1.0, 0.0);
        }
        VertexCondition::from_matrices("kirchhoff", a, b).expect("KN conditions are valid")
    }

    pub fn dirichlet(degree: usize) -> Self {
        let a = CMatrix::identity(degree, degree);
        let b = CMatrix::zeros(degree, degree);
        VertexCondition::from_matrices("dirichlet", a, b).expect("Dirichlet conditions are valid")
    }

    pub fn neumann(degree: usize) -> Self {
        let a = CMatrix::zeros(degree, degree);
        let b = CMatrix::identity(degree, degree);
        VertexCondition::from_matrices("neumann", a, b).expect("Neumann conditions are valid")
    }

    pub fn degree(&self) -> usize {
        self.a.nrows()
    }

    /// True when both matrices (hence sigma) are real.
    pub fn is_real(&self) -> bool {
        self.a.iter().chain(self.b.iter()).all(|z| z.im == 0.0)
    }

    /// Real part of sigma, for the (real, symmetric) condition families the
    /// parametrix machinery supports.
    pub fn sigma_real(&self) -> DMatrix<f64> {
        self.sigma.map(|z| z.re)
    }
}
