//! Quantities from the a-priori estimates, evaluated on discrete solutions.

use serde::{Deserialize, Serialize};

use crate::cap::{boundary_jet, curvature_tensor, even_defect, frame_jets, grad_field};
use crate::error::{CapError, Result};
use crate::grid::{CapGeometry, ScalarField};
use crate::solver::{ProblemSpec, EVEN_TOL};
use crate::stencil::Closure;

/// Default `C''` for rotationally symmetric bodies (the John factor of a
/// body with `R_out = R_in`).
pub const DEFAULT_C_DD: f64 = 4.5;

/// Neumann defect admitted by [`phi_monitor`], in units of
/// `max u * (dphi^2 + dpsi^2)`.
pub const PHI_NEUMANN_TOL: f64 = 10.0;

/// Boundary nodes whose `|grad u|^2` is below this fraction of its maximum
/// over the cap are excluded from the identity check, where `log Phi` is singular.
pub const PHI_GRADIENT_FLOOR: f64 = 0.25;

/// Relative tolerance of the C0 inequalities.
pub const C0_REL_TOL: f64 = 1e-6;

/// Extra C0 slack in units of `(dphi^2 + dpsi^2)`, for the discretization
/// error at discrete extremum points.
pub const C0_GRID_TOL: f64 = 10.0;

/// Values of `h`, `|grad h|^2` and their locations on cells and boundary nodes.
struct Samples {
    h: Vec<f64>,
    grad_sq: Vec<f64>,
    phi: Vec<f64>,
    psi: Vec<f64>,
}

fn samples(geom: &CapGeometry, h: &ScalarField) -> Result<Samples> {
    let (g1, g2) = grad_field(geom, h)?;
    let mut s = Samples {
        h: h.values.clone(),
        grad_sq: g1
            .values
            .iter()
            .zip(&g2.values)
            .map(|(a, b)| a * a + b * b)
            .collect(),
        phi: Vec::with_capacity(h.values.len() + geom.n_psi),
        psi: Vec::with_capacity(h.values.len() + geom.n_psi),
    };
    for i in 0..geom.n_phi {
        for j in 0..geom.n_psi {
            s.phi.push(geom.phi[i]);
            s.psi.push(geom.psi[j]);
        }
    }
    for (j, (v, dp, ds)) in boundary_jet(geom, &h.values).into_iter().enumerate() {
        s.h.push(v);
        s.grad_sq.push(dp * dp + (ds / geom.sin_theta).powi(2));
        s.phi.push(geom.theta);
        s.psi.push(geom.psi[j]);
    }
    Ok(s)
}

fn require_positive(h: &ScalarField) -> Result<()> {
    if let Some(k) = h.values.iter().position(|v| !(*v > 0.0)) {
        return Err(CapError::Domain(format!("field nonpositive at cell {k}")));
    }
    Ok(())
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GradientQuotientReport {
    pub gamma: f64,
    /// `sup (|grad h|^2 / h^gamma) / (max h)^(2 - gamma)`.
    pub n_observed: f64,
    pub argmax_phi: f64,
    pub argmax_psi: f64,
}

/// Gradient quotient over cells and boundary nodes.
pub fn gradient_quotient(
    geom: &CapGeometry,
    h: &ScalarField,
    gamma: f64,
) -> Result<GradientQuotientReport> {
    if !(gamma > 0.0 && gamma < 2.0) {
        return Err(CapError::Config(format!("gamma = {gamma} outside (0, 2)")));
    }
    geom.check_shape(h)?;
    require_positive(h)?;
    let s = samples(geom, h)?;
    let max_h = s.h.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut best = (0.0, 0);
    for k in 0..s.h.len() {
        let v = s.grad_sq[k] / s.h[k].powf(gamma);
        if v > best.0 {
            best = (v, k);
        }
    }
    Ok(GradientQuotientReport {
        gamma,
        n_observed: best.0 / max_h.powf(2.0 - gamma),
        argmax_phi: s.phi[best.1],
        argmax_psi: s.psi[best.1],
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct NonCollapseReport {
    /// `max h / min h`.
    pub ratio: f64,
    pub gamma: f64,
    pub n: f64,
    pub c_dd: f64,
    pub bound_case1: f64,
    pub bound_case2: f64,
    pub pass: bool,
}

/// `C'' max(tan, 1) sqrt((2 cot + 1)^2 + 1)`.
pub fn noncollapse_bound_case2(theta: f64, c_dd: f64) -> f64 {
    let (s, c) = theta.sin_cos();
    let (tan, cot) = (s / c, c / s);
    c_dd * tan.max(1.0) * ((2.0 * cot + 1.0).powi(2) + 1.0).sqrt()
}

/// `C^(2/g) N^(1/g) (1 + C'' 2^(2/(2-g)))^(2/g) C'' / (cos (1 - cos))` with
/// `C = |2 - g| / (2 cos)`.
pub fn noncollapse_bound_case1(theta: f64, gamma: f64, n: f64, c_dd: f64) -> f64 {
    let c = theta.cos();
    let ctg = (2.0 - gamma).abs() / (2.0 * c);
    ctg.powf(2.0 / gamma)
        * n.powf(1.0 / gamma)
        * (1.0 + c_dd * 2f64.powf(2.0 / (2.0 - gamma))).powf(2.0 / gamma)
        * c_dd
        / (c * (1.0 - c))
}

pub fn noncollapse_check(
    geom: &CapGeometry,
    h: &ScalarField,
    gamma: f64,
    n: f64,
    c_dd: f64,
) -> Result<NonCollapseReport> {
    let gq = gradient_quotient(geom, h, gamma)?;
    let defect = even_defect(geom, h)?;
    if defect > EVEN_TOL {
        return Err(CapError::Applicability(format!(
            "h is not even (symmetrization defect {defect:e})"
        )));
    }
    if n < gq.n_observed {
        return Err(CapError::Applicability(format!(
            "N = {n} is below the observed gradient quotient {}",
            gq.n_observed
        )));
    }
    let s = samples(geom, h)?;
    let max_h = s.h.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let min_h = s.h.iter().copied().fold(f64::INFINITY, f64::min);
    let ratio = max_h / min_h;
    let bound_case1 = noncollapse_bound_case1(geom.theta, gamma, n, c_dd);
    let bound_case2 = noncollapse_bound_case2(geom.theta, c_dd);
    Ok(NonCollapseReport {
        ratio,
        gamma,
        n,
        c_dd,
        bound_case1,
        bound_case2,
        pass: ratio <= bound_case1.max(bound_case2),
    })
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct PhiMonitorReport {
    #[serde(skip)]
    pub phi: Option<ScalarField>,
    pub gamma: f64,
    /// The maximum of `Phi` is attained away from the outermost ring.
    pub interior_max: bool,
    /// `Phi` vanishes identically (constant `u`).
    pub degenerate: bool,
    /// `d_phi log Phi` at every boundary node.
    pub boundary_derivative: Vec<f64>,
    /// Nodes where `|grad u|` is large enough for the identity to be checked.
    pub checked: Vec<bool>,
    /// `max |d_phi log Phi + gamma cot(theta)|` over checked nodes.
    pub max_identity_error: f64,
    pub neumann_defect: f64,
}

/// `Phi = ell^(2-gamma) |grad u|^2 / u^gamma` and its normal log-derivative
/// on the boundary.
pub fn phi_monitor(geom: &CapGeometry, u: &ScalarField, gamma: f64) -> Result<PhiMonitorReport> {
    geom.check_shape(u)?;
    require_positive(u)?;
    let bj = boundary_jet(geom, &u.values);
    let neumann_defect = bj.iter().fold(0.0, |m: f64, t| m.max(t.1.abs()));
    let tol = PHI_NEUMANN_TOL * u.max() * geom.step_sq();
    if neumann_defect > tol {
        return Err(CapError::Applicability(format!(
            "u violates the Neumann condition by {neumann_defect:e} (tolerance {tol:e})"
        )));
    }
    let fj = frame_jets(geom, &u.values, Closure::Neumann);
    let values: Vec<f64> = fj
        .iter()
        .enumerate()
        .map(|(k, j)| {
            let l = 1.0 - geom.cos_theta * geom.cos_phi[k / geom.n_psi];
            l.powf(2.0 - gamma) * j.grad_sq() / j.v.powf(gamma)
        })
        .collect();
    let (mut imax, mut vmax) = (0, f64::NEG_INFINITY);
    for (k, v) in values.iter().enumerate() {
        if *v > vmax {
            vmax = *v;
            imax = k;
        }
    }
    let degenerate = !(vmax > 1e-28);
    let interior_max = imax / geom.n_psi != geom.n_phi - 1;

    let trace = geom.boundary_trace(&values);
    let boundary_derivative: Vec<f64> = trace.iter().map(|(v, d)| d / v).collect();
    let grad_b: Vec<f64> = bj
        .iter()
        .map(|(_, dp, ds)| dp * dp + (ds / geom.sin_theta).powi(2))
        .collect();
    let gmax = fj.iter().map(|j| j.grad_sq()).fold(0.0, f64::max);
    let checked: Vec<bool> = grad_b
        .iter()
        .map(|g| !degenerate && *g >= PHI_GRADIENT_FLOOR * gmax)
        .collect();
    let target = -gamma * geom.cot_theta;
    let max_identity_error = boundary_derivative
        .iter()
        .zip(&checked)
        .filter(|(_, c)| **c)
        .fold(0.0, |m: f64, (d, _)| m.max((d - target).abs()));
    Ok(PhiMonitorReport {
        phi: Some(ScalarField {
            shape: u.shape,
            values,
        }),
        gamma,
        interior_max,
        degenerate,
        boundary_derivative,
        checked,
        max_identity_error,
        neumann_defect,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct QMonitorConfig {
    #[serde(rename = "A")]
    pub a: f64,
    #[serde(rename = "B")]
    pub b: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct QMonitorReport {
    pub config: QMonitorConfig,
    #[serde(skip)]
    pub q_field: Option<ScalarField>,
    pub max_value: f64,
    pub argmax_phi: f64,
    pub argmax_psi: f64,
}

/// `Q = log sigma_1 + A h + B |grad h|^2` with the coefficients of the C2
/// estimate.
pub fn q_monitor(geom: &CapGeometry, h: &ScalarField, q: f64) -> Result<QMonitorReport> {
    let curv = curvature_tensor(geom, h)?;
    if let Some(k) = curv.sigma1.iter().position(|s| !(*s > 0.0)) {
        return Err(CapError::Convexity(format!(
            "sigma_1 = {} at cell {k}",
            curv.sigma1[k]
        )));
    }
    let fj = frame_jets(geom, &h.values, Closure::Robin);
    let grad_sq: Vec<f64> = fj.iter().map(|j| j.grad_sq()).collect();
    let max_h = h.max();
    let min_h = h.min();
    let max_g = grad_sq.iter().copied().fold(0.0, f64::max);
    let b = (3.0 - q).abs() * (max_h * max_h + 3.0 * max_g) / min_h.powi(4) + 1.0;
    let a = -(2.0 * b * max_g + 1.0) / min_h;
    let values: Vec<f64> = (0..grad_sq.len())
        .map(|k| curv.sigma1[k].ln() + a * h.values[k] + b * grad_sq[k])
        .collect();
    let (mut imax, mut vmax) = (0, f64::NEG_INFINITY);
    for (k, v) in values.iter().enumerate() {
        if *v > vmax {
            vmax = *v;
            imax = k;
        }
    }
    Ok(QMonitorReport {
        config: QMonitorConfig { a, b },
        q_field: Some(ScalarField {
            shape: h.shape,
            values,
        }),
        max_value: vmax,
        argmax_phi: geom.phi[imax / geom.n_psi],
        argmax_psi: geom.psi[imax % geom.n_psi],
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct C0Report {
    pub lower_pass: bool,
    pub upper_pass: bool,
    /// `(max u)^(q-p)`, compared against `min G`.
    pub max_u_term: f64,
    /// `(min u)^(q-p)`, compared against `max G`.
    pub min_u_term: f64,
    pub g_min: f64,
    pub g_max: f64,
    pub tol: f64,
}

/// Extremum-point inequalities `(max u)^(q-p) >= min G` and
/// `(min u)^(q-p) <= max G` with `G = f ell^(p-1) (ell^2 + |grad ell|^2)^((3-q)/2)`.
///
/// Both hold for either sign of `q - p`; only their translation into bounds
/// on `h` reverses direction.
pub fn c0_bound_check(geom: &CapGeometry, h: &ScalarField, spec: &ProblemSpec) -> Result<C0Report> {
    if spec.p == spec.q {
        return Err(CapError::NotApplicable(
            "C0 bounds need p != q; use the p = q limit scheme".into(),
        ));
    }
    geom.check_shape(h)?;
    geom.check_shape(&spec.f)?;
    require_positive(h)?;
    let mut g = Vec::with_capacity(geom.n_cells());
    let mut u = Vec::with_capacity(geom.n_cells());
    for k in 0..geom.n_cells() {
        let i = k / geom.n_psi;
        let l = 1.0 - geom.cos_theta * geom.cos_phi[i];
        let lp = geom.cos_theta * geom.sin_phi[i];
        g.push(spec.f.values[k] * l.powf(spec.p - 1.0) * (l * l + lp * lp).powf(0.5 * (3.0 - spec.q)));
        u.push(h.values[k] / l);
    }
    let e = spec.q - spec.p;
    let max_u = u.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let min_u = u.iter().copied().fold(f64::INFINITY, f64::min);
    let g_min = g.iter().copied().fold(f64::INFINITY, f64::min);
    let g_max = g.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let (max_u_term, min_u_term) = (max_u.powf(e), min_u.powf(e));
    let tol = (C0_REL_TOL + C0_GRID_TOL * geom.step_sq()) * g_max;
    Ok(C0Report {
        lower_pass: max_u_term >= g_min - tol,
        upper_pass: min_u_term <= g_max + tol,
        max_u_term,
        min_u_term,
        g_min,
        g_max,
        tol,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cap::ell_field;
    use crate::grid::build_grid;
    use std::f64::consts::PI;

    #[test]
    fn ell_gradient_quotient() {
        let g = build_grid(PI / 3.0, 32, 64).unwrap();
        let r = gradient_quotient(&g, &ell_field(&g), 1.0).unwrap();
        assert!((r.n_observed - 1.0 / 3.0).abs() < 1e-3);
        assert!((r.argmax_phi - g.theta).abs() < 1e-15);
        let c = gradient_quotient(&g, &ScalarField::constant(&g, 2.0), 1.0).unwrap();
        assert!(c.n_observed < 1e-26);
        assert!(gradient_quotient(&g, &ell_field(&g), 2.0).is_err());
    }

    #[test]
    fn case2_constant() {
        let b = noncollapse_bound_case2(PI / 4.0, 4.5);
        assert!((b - 4.5 * 10f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn q_monitor_on_hemisphere_constant() {
        let g = build_grid(PI / 2.0, 8, 16).unwrap();
        let r = q_monitor(&g, &ScalarField::constant(&g, 1.0), 1.0).unwrap();
        assert!((r.config.b - 3.0).abs() < 1e-15 && (r.config.a + 1.0).abs() < 1e-15);
        assert!((r.max_value - (2f64.ln() - 1.0)).abs() < 1e-12);
    }
}
