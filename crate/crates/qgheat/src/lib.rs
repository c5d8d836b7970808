//! Spectra and heat-trace asymptotics of Schrödinger operators on compact
//! metric graphs.
//!
//! The operator is D = -(d²/dx² + U(x)) on every edge, with self-adjoint
//! non-Robin conditions at the vertices. The crate computes its heat trace
//! two independent ways and cross-validates them:
//!
//! * exact spectral summation: assemble the secular system from per-edge
//!   basis solutions, locate eigenvalues, and sum exp(-lambda t);
//! * small-time asymptotics: a Gaussian-weighted parametrix whose transport
//!   coefficients yield the heat-trace coefficients (total length, potential
//!   integrals, and sigma-weighted vertex terms) as spectral invariants.

pub mod error;
pub mod fmt;
pub mod graph;
pub mod heat;
pub mod lsq;
pub mod ode;
pub mod parametrix;
pub mod quad;
pub mod solutions;
pub mod spectrum;

pub use error::{QgError, Result};
pub use graph::{EdgePotential, MetricGraph, Point, QuantumGraph, VertexCondition};
