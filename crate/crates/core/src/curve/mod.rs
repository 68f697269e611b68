//! Support curves: parametric maps, their arclength reparameterization,
//! nearest-point projection, and quadratic Bezier estimation.

mod arclength;
mod bezier;
mod parametric;
pub mod quadrature;

pub use arclength::{ArclengthCurve, Projection, TubeConfig, PROJECTION_GRID, PULLBACK_TOL};
pub use bezier::{bezier_residual, fit_quadratic_bezier, BezierFit, QuadraticBezier, BEZIER_MAX_ITER, BEZIER_TOL};
pub use parametric::{
    hardy_weinberg, minimal_subspace_dimension, CurveMap, CurveSpec, ParametricCurve, TabulatedCurve,
};

/// Default tolerance for arclength quadrature.
pub const ARCLENGTH_TOL: f64 = 1e-10;

/// `p` for the Hardy-Weinberg curve.
pub fn hardy_weinberg_arclength() -> ArclengthCurve {
    ArclengthCurve::new(hardy_weinberg(), ARCLENGTH_TOL).expect("Hardy-Weinberg curve is regular")
}

/// Arclength curve of a fitted or loaded Bezier.
pub fn bezier_arclength(b: &QuadraticBezier) -> crate::error::Result<ArclengthCurve> {
    ArclengthCurve::new(ParametricCurve::Bezier(b.clone()), ARCLENGTH_TOL)
}

/// Reverses an arclength curve (`p'(s) = p(1 - s)`).
pub fn reverse_orientation(p: &ArclengthCurve) -> ArclengthCurve {
    p.reversed()
}
