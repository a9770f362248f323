//! Newton continuation solver for the capillary L_p dual Minkowski equation.

mod continuation;
mod limit;
mod manufactured;
mod newton;
mod problem;

pub use continuation::{
    continuation_solve, homotopy_rhs, newton_solve, uniqueness_probe, HomotopyPath, SolveResult,
    UniquenessReport,
};
pub use limit::{pq_limit_solve, EpsStep, PqLimitResult, DEFAULT_EPS_SCHEDULE, PQ_DIFF_TOL};
pub use manufactured::{manufactured_f, manufactured_f_exact, MANUFACTURED_ROBIN_TOL};
pub use newton::NewtonTrace;
pub use problem::{Branch, ProblemSpec, SolverConfig, EVEN_TOL};

use crate::cap::frame_jets;
use crate::error::{CapError, Result};
use crate::grid::{CapGeometry, ScalarField};
use crate::stencil::Closure;

use newton::{Operator, Rhs, State};

fn require_positive(s: &ScalarField, what: &str) -> Result<()> {
    if let Some(k) = s.values.iter().position(|v| !(*v > 0.0)) {
        return Err(CapError::Domain(format!(
            "{what} is nonpositive at cell {k} ({})",
            s.values[k]
        )));
    }
    Ok(())
}

fn check_spec_grid(spec: &ProblemSpec, geom: &CapGeometry) -> Result<()> {
    if (spec.theta - geom.theta).abs() > 1e-12 {
        return Err(CapError::Usage("problem and grid angles differ".into()));
    }
    geom.check_shape(&spec.f)
}

/// `det b - f h^(p-1) (h^2 + |grad h|^2)^((3-q)/2)` per cell, with the Robin
/// ghost ring.
pub fn residual_h(spec: &ProblemSpec, geom: &CapGeometry, h: &ScalarField) -> Result<ScalarField> {
    check_spec_grid(spec, geom)?;
    geom.check_shape(h)?;
    require_positive(h, "h")?;
    let fj = frame_jets(geom, &h.values, Closure::Robin);
    let values = fj
        .iter()
        .enumerate()
        .map(|(k, j)| {
            let (b11, b12, b22) = (j.h11 + j.v, j.h12, j.h22 + j.v);
            let w = j.v * j.v + j.grad_sq();
            b11 * b22 - b12 * b12
                - spec.f.values[k] * j.v.powf(spec.p - 1.0) * w.powf(0.5 * (3.0 - spec.q))
        })
        .collect();
    Ok(ScalarField {
        shape: h.shape,
        values,
    })
}

/// The same residual written in `u = h / ell`, with the Neumann ghost ring.
pub fn residual_u(spec: &ProblemSpec, geom: &CapGeometry, u: &ScalarField) -> Result<ScalarField> {
    check_spec_grid(spec, geom)?;
    geom.check_shape(u)?;
    require_positive(u, "u")?;
    let op = Operator::new(
        geom,
        Rhs {
            f: spec.f.values.clone(),
            h_pow: spec.p - 1.0,
            w_pow: 0.5 * (3.0 - spec.q),
        },
        false,
        false,
    );
    let st = State {
        mean: vec![0.0; geom.n_phi],
        dev: u.values.clone(),
        log_c: 0.0,
    };
    let ev = op.eval(&st);
    Ok(ScalarField {
        shape: u.shape,
        values: ev.cells.iter().map(|c| c.det - c.rhs).collect(),
    })
}
