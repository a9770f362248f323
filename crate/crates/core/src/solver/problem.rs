use serde::{Deserialize, Serialize};

use crate::cap::even_defect;
use crate::error::{CapError, Result};
use crate::grid::{CapGeometry, ScalarField};

/// Relative symmetrization defect below which a field counts as even.
pub const EVEN_TOL: f64 = 1e-10;

/// `det(hess h + h I) = f h^(p-1) (h^2 + |grad h|^2)^((3-q)/2)` with the
/// capillary Robin condition, on the cap of angle `theta`.
#[derive(Clone, Debug)]
pub struct ProblemSpec {
    pub p: f64,
    pub q: f64,
    pub theta: f64,
    pub f: ScalarField,
    pub even: bool,
    /// Permits `p < q` with non-even `f`; convergence is reported but the
    /// regime is not covered by the existence theory.
    pub unsupported_regime: bool,
}

/// Exponent regimes of the equation.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Branch {
    /// `1 < p < q <= 3`.
    Subcritical,
    /// `p > q`.
    Supercritical,
    /// `1 < p = q <= 3`.
    Critical,
}

impl ProblemSpec {
    pub fn new(p: f64, q: f64, theta: f64, f: ScalarField, even: bool) -> Self {
        ProblemSpec {
            p,
            q,
            theta,
            f,
            even,
            unsupported_regime: false,
        }
    }

    pub fn branch(&self) -> Result<Branch> {
        let (p, q) = (self.p, self.q);
        if !(p.is_finite() && q.is_finite()) {
            return Err(CapError::Config("non-finite exponent".into()));
        }
        if q > 3.0 {
            return Err(CapError::Config(format!("q = {q} exceeds 3")));
        }
        if p > q {
            return Ok(Branch::Supercritical);
        }
        if p <= 1.0 {
            return Err(CapError::Config(format!("p = {p} must exceed 1 when p <= q")));
        }
        Ok(if p == q {
            Branch::Critical
        } else {
            Branch::Subcritical
        })
    }

    /// Checks the spec against the grid and returns its branch.
    pub fn validate(&self, geom: &CapGeometry) -> Result<Branch> {
        if (self.theta - geom.theta).abs() > 1e-12 {
            return Err(CapError::Usage(format!(
                "problem angle {} differs from grid angle {}",
                self.theta, geom.theta
            )));
        }
        geom.check_shape(&self.f)?;
        if let Some(k) = self.f.values.iter().position(|v| !(*v > 0.0)) {
            return Err(CapError::Config(format!(
                "f must be positive; f = {} at cell {k}",
                self.f.values[k]
            )));
        }
        let branch = self.branch()?;
        let defect = even_defect(geom, &self.f)?;
        if self.even && defect > EVEN_TOL {
            return Err(CapError::Config(format!(
                "f flagged even but its symmetrization defect is {defect:e}"
            )));
        }
        if branch == Branch::Subcritical && !self.even && !self.unsupported_regime {
            return Err(CapError::Config(
                "p < q requires even f; set unsupported_regime to run anyway".into(),
            ));
        }
        Ok(branch)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SolverConfig {
    /// Target for `sup |det b - rhs|`.
    pub newton_tol: f64,
    pub max_newton: usize,
    /// Smallest damping factor tried by the line search.
    pub min_step: f64,
    /// Converged iterates satisfy `b >= convexity_floor * I`.
    pub convexity_floor: f64,
    pub ds_initial: f64,
    pub ds_min: f64,
    pub ds_max: f64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            newton_tol: 1e-10,
            max_newton: 50,
            min_step: 2f64.powi(-20),
            convexity_floor: 1e-8,
            ds_initial: 0.1,
            ds_min: 1e-4,
            ds_max: 0.5,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        let pos = [
            self.newton_tol,
            self.min_step,
            self.convexity_floor,
            self.ds_initial,
            self.ds_min,
            self.ds_max,
        ];
        if pos.iter().any(|x| !(*x > 0.0)) || self.max_newton == 0 {
            return Err(CapError::Config("solver settings must be positive".into()));
        }
        if self.min_step > 1.0 || self.ds_min > self.ds_initial || self.ds_initial > 1.0 {
            return Err(CapError::Config(
                "need min_step <= 1 and ds_min <= ds_initial <= 1".into(),
            ));
        }
        Ok(())
    }
}
