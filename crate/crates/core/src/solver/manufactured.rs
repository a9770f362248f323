use crate::analytic::SmoothField;
use crate::cap::{curvature_tensor, frame_jets, robin_residual};
use crate::error::{CapError, Result};
use crate::grid::{CapGeometry, ScalarField};
use crate::stencil::Closure;

/// Admissible Robin defect of a manufactured solution, in units of
/// `max h * (dphi^2 + dpsi^2)`.
pub const MANUFACTURED_ROBIN_TOL: f64 = 10.0;

fn rhs_factor(h: f64, grad_sq: f64, p: f64, q: f64) -> f64 {
    h.powf(p - 1.0) * (h * h + grad_sq).powf(0.5 * (3.0 - q))
}

/// The `f` for which `h_star` solves the discrete equation in Robin form.
pub fn manufactured_f(
    geom: &CapGeometry,
    h_star: &ScalarField,
    p: f64,
    q: f64,
) -> Result<ScalarField> {
    let curv = curvature_tensor(geom, h_star)?;
    if curv.lambda_min <= 0.0 {
        return Err(CapError::Applicability(format!(
            "h* is not strictly convex (lambda_min = {:e})",
            curv.lambda_min
        )));
    }
    let tol = MANUFACTURED_ROBIN_TOL * h_star.max() * geom.step_sq();
    let robin = robin_residual(geom, h_star)?
        .iter()
        .fold(0.0, |m: f64, v| m.max(v.abs()));
    if robin > tol {
        return Err(CapError::Applicability(format!(
            "h* violates the Robin condition by {robin:e} (tolerance {tol:e})"
        )));
    }
    let fj = frame_jets(geom, &h_star.values, Closure::Robin);
    let values = fj
        .iter()
        .zip(&curv.det_b)
        .map(|(j, det)| det / rhs_factor(j.v, j.grad_sq(), p, q))
        .collect();
    ScalarField::new(geom, values)
}

/// The `f` for which the smooth field `h_star` solves the continuous equation,
/// from its exact derivatives.
pub fn manufactured_f_exact(
    geom: &CapGeometry,
    h_star: &dyn SmoothField,
    p: f64,
    q: f64,
) -> Result<ScalarField> {
    let mut values = Vec::with_capacity(geom.n_cells());
    for i in 0..geom.n_phi {
        for j in 0..geom.n_psi {
            let fr = h_star
                .jet(geom.phi[i], geom.psi[j])
                .frame(geom.sin_phi[i], geom.cos_phi[i]);
            let (b11, b12, b22) = (fr.h11 + fr.v, fr.h12, fr.h22 + fr.v);
            let det = b11 * b22 - b12 * b12;
            if !(fr.v > 0.0) || !(b11 > 0.0 && det > 0.0) {
                return Err(CapError::Applicability(format!(
                    "h* not positive and strictly convex at cell ({i}, {j})"
                )));
            }
            values.push(det / rhs_factor(fr.v, fr.grad_sq(), p, q));
        }
    }
    ScalarField::new(geom, values)
}
