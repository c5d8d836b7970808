//! Parametrix machinery: transport-recursion u-functions, cut-offs and the
//! partition of unity, star and graph parametrices, the heat-operator
//! residual, and the heat-trace coefficients.

pub mod coeffs;
pub mod cutoff;
pub mod star;
pub mod uline;

pub use coeffs::{
    boundary_coefficient, boundary_via_moments, coeffs_csv, gaussian_moment, heat_coefficients,
    u_diagonal_closed, u_vertex_taylor, vertex_series_fit, HeatCoefficients, VertexSeriesFit,
    VertexTerm,
};
pub use cutoff::{eta, eta_d1, eta_d2, CutoffSystem};
pub use star::{
    eval_real_line_parametrix, gauss_kernel, GraphParametrix, StarParametrix, RESIDUAL_FD_STEP,
};
pub use uline::{u_recursive, JoinedLine, LinePotential, UFunctionTable, MAX_U_ORDER};
