//! Fully implicit and linearly implicit BDF time discretizations (orders
//! 1–6) of quasilinear parabolic equations ∂ₜu = ∇·(a(u)∇u) + f, together
//! with the supporting multistep machinery — exact coefficient tables and
//! order conditions, A(α) stability angles, Nevanlinna–Odeh multipliers,
//! Dahlquist G-matrix certificates, consistency defects — and a
//! manufactured-solution convergence harness.

pub mod bdf;
pub mod coeff;
pub mod consistency;
pub mod dd;
pub mod error;
pub mod gmatrix;
pub mod grid;
pub mod linsolve;
pub mod mms;
pub mod norms;
pub mod operator;
pub mod stepper;
pub mod study;

pub use bdf::{
    a_alpha_angle, check_order_conditions, delta_coeffs, gamma_coeffs, multiplier_theta,
    smallest_theta, verify_multiplier_positivity, BdfScheme,
};
pub use num_rational::Rational64;
pub use coeff::CoefficientFn;
pub use error::{Error, Result};
pub use gmatrix::{dahlquist_g_matrix, scheme_certificate, GMatrixCert};
pub use grid::Grid;
pub use mms::{builtin_problem, builtin_problems, ManufacturedProblem};
pub use norms::{error_report, spatial_norm, time_composite, ErrorReport, SpatialNorm};
pub use operator::{
    assemble_jacobian_correction, assemble_operator, CsrMatrix, SpatialOperator,
};
pub use stepper::{
    run, starting_values, step_fully_implicit, step_linearly_implicit, RunOptions, RunResult,
    Variant,
};
