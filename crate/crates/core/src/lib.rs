//! Numerical tools for the capillary L_p dual Minkowski problem on a
//! spherical cap.
//!
//! The crate discretizes the cap `C_theta` on a cell-centered polar grid,
//! solves the Monge-Ampere equation
//! `det(hess h + h I) = f h^(p-1) (h^2 + |grad h|^2)^((3-q)/2)` with the
//! capillary Robin condition by Newton continuation, and provides the
//! capillary ellipsoid caps, the John-type sandwich and the a-priori
//! estimate monitors used to check solutions.

pub mod analytic;
pub mod cap;
pub mod cli;
pub mod ellipsoid;
pub mod error;
pub mod forcing;
pub mod grid;
pub mod john;
pub mod monitors;
pub mod solver;
pub mod stencil;

pub use cap::{
    curvature_tensor, ell_field, embed_body, field_norms, grad_field, robin_residual,
    symmetrize_even, BodyEmbedding, BodyExtents, CurvatureData, FieldNorms,
};
pub use error::{CapError, Result};
pub use grid::{build_grid, CapGeometry, GridShape, ScalarField};
pub use ellipsoid::{cap_from_rh, cap_support, cone_cylinder_factor, make_cap, EllipsoidCap};
pub use john::{height_ratio_check, john_construct, verify_sandwich, SandwichReport};
pub use solver::{
    continuation_solve, manufactured_f, newton_solve, pq_limit_solve, residual_h, residual_u,
    uniqueness_probe, ProblemSpec, SolveResult, SolverConfig,
};
