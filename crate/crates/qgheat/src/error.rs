//! Error types shared across the crate.

use thiserror::Error;

/// Crate-wide error type.
#[derive(Debug, Clone, Error)]
pub enum QgError {
    /// A structural invariant of the graph description is violated.
    /// Carries the offending vertex/edge id and the invariant name.
    #[error("invalid graph: {entity}: {invariant}")]
    InvalidGraph { entity: String, invariant: String },

    /// A + ikB is singular, so the vertex scattering matrix does not exist.
    #[error("vertex {vertex}: A + ikB is singular at k = {k}")]
    NonInvertible { vertex: String, k: f64 },

    /// Vertex conditions are Robin-type (k-dependent sigma) or otherwise
    /// outside what the downstream machinery supports.
    #[error("vertex {vertex}: unsupported boundary conditions: {reason}")]
    UnsupportedConditions { vertex: String, reason: String },

    /// A potential fails the smoothness requirements of the asymptotic
    /// machinery (odd derivatives / even-derivative matching at vertices).
    #[error("invalid potential: {0}")]
    InvalidPotential(String),

    /// A coordinate or point lies outside its domain.
    #[error("domain error: {0}")]
    Domain(String),

    /// The ODE integrator could not meet its tolerance.
    #[error("integration failure: achieved error estimate {achieved:.3e}")]
    IntegrationFailure { achieved: f64 },

    /// A quadrature did not converge to the requested accuracy.
    #[error("quadrature accuracy failure: achieved {achieved:.3e}, requested {requested:.3e}")]
    QuadratureAccuracy { achieved: f64, requested: f64 },

    /// The Weyl count indicates at least one eigenvalue was missed.
    #[error("incomplete spectrum: suspected missed eigenvalue in k-interval ({0}, {1})")]
    IncompleteSpectrum(f64, f64),

    /// The computed part of the spectrum cannot bound the requested quantity.
    #[error("insufficient spectrum: need eigenvalues up to lambda ≈ {required_lambda_max:.3e}")]
    InsufficientSpectrum { required_lambda_max: f64 },

    /// Kernel dimension at an eigenvalue disagrees with the recorded multiplicity.
    #[error("inconsistent spectral data: {0}")]
    Inconsistency(String),

    /// u-functions above the supported order were requested.
    #[error("unsupported u-function order {0}")]
    UnsupportedOrder(usize),

    /// A finite-difference probe would cross a vertex.
    #[error("unsupported probe: {0}")]
    UnsupportedProbe(String),

    /// Least-squares design matrix is too ill-conditioned to trust.
    #[error("ill-conditioned fit (cond = {cond:.3e}): {hint}")]
    IllConditioned { cond: f64, hint: String },
}

pub type Result<T> = std::result::Result<T, QgError>;
