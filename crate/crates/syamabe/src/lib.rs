//! Numerical toolkit for singular Yamabe and singular σ₂-Yamabe metrics on
//! four-manifolds with boundary.
//!
//! The pipeline runs in five stages: build a compactified metric in collar
//! normal form ([`collar_geometry`]), evaluate the boundary coefficient
//! formulas ([`expansion_engine`]), solve for the global defining function
//! on radial geometries ([`radial_solver`]), extract divergent and finite
//! parts of volume integrals ([`renormalizer`]) and assemble Gauss-Bonnet
//! budgets ([`verifier`]).

pub mod collar_geometry;
pub mod expansion_engine;
pub mod numeric;
pub mod radial_solver;
pub mod renormalizer;
pub mod report;
pub mod verifier;

pub use collar_geometry::{
    boundary_jet, build_geometry, curvature_slice, BoundaryJet, CollarMetric, GeometrySpec,
};
pub use expansion_engine::Problem;

/// Boundary dimension. The formulas past first order are specialised to it.
pub const N_BOUNDARY: usize = 3;
