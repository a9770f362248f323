//! Translated capillary ellipsoid caps.
//!
//! `E(a, b) = { a^2 |x'|^2 + b^2 x3^2 <= 1 }` is shifted down by `tau*` so
//! that the part above `x3 = 0` meets the plane at the contact angle `theta`.

use serde::{Deserialize, Serialize};

use crate::error::{CapError, Result};
use crate::grid::{CapGeometry, ScalarField};

/// Relative margin of the strict wedge test `R/H > 2 cot(theta)`.
pub const WEDGE_MARGIN: f64 = 1e-12;

const ANGLE_MATCH: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EllipsoidCap {
    pub a: f64,
    pub b: f64,
    pub theta: f64,
    pub eta: f64,
    pub tau_star: f64,
    pub lambda: f64,
    #[serde(rename = "R")]
    pub r: f64,
    #[serde(rename = "H")]
    pub h: f64,
}

fn trig(theta: f64) -> Result<(f64, f64)> {
    let half_pi = std::f64::consts::FRAC_PI_2;
    if !theta.is_finite() || theta <= 0.0 || theta > half_pi + 1e-14 {
        return Err(CapError::Domain(format!(
            "contact angle {theta} outside (0, pi/2]"
        )));
    }
    Ok(if (theta - half_pi).abs() < 1e-14 {
        (1.0, 0.0)
    } else {
        theta.sin_cos()
    })
}

fn positive(x: f64, name: &str) -> Result<()> {
    if !(x.is_finite() && x > 0.0) {
        return Err(CapError::Domain(format!("{name} = {x} must be positive")));
    }
    Ok(())
}

/// `lambda = eta cos(theta) / sqrt(sin^2(theta) + eta^2 cos^2(theta))`.
pub fn lambda_of_eta(eta: f64, theta: f64) -> f64 {
    let (s, c) = theta.sin_cos();
    eta * c / (s * s + eta * eta * c * c).sqrt()
}

/// Closed-form derivative of [`lambda_of_eta`] in `eta`.
pub fn lambda_prime(eta: f64, theta: f64) -> f64 {
    let (s, c) = theta.sin_cos();
    c * s * s / (eta * eta * c * c + s * s).powf(1.5)
}

pub fn make_cap(a: f64, b: f64, theta: f64) -> Result<EllipsoidCap> {
    positive(a, "a")?;
    positive(b, "b")?;
    let (s, c) = trig(theta)?;
    let eta = a / b;
    let ec = eta * c;
    let d = (s * s + ec * ec).sqrt();
    let lambda = ec / d;
    let one_minus = s * s / (d * (d + ec));
    Ok(EllipsoidCap {
        a,
        b,
        theta,
        eta,
        tau_star: lambda / b,
        lambda,
        r: s / (a * d),
        h: one_minus / b,
    })
}

/// Inverts `(a, b) -> (R, H)` on the open wedge `R/H > 2 cot(theta)`.
pub fn cap_from_rh(r: f64, h: f64, theta: f64) -> Result<EllipsoidCap> {
    positive(r, "R")?;
    positive(h, "H")?;
    let (s, c) = trig(theta)?;
    let cot = c / s;
    let bound = 2.0 * cot;
    // t cot(theta) = (H/R) cot(theta) must stay below 1/2
    let x = h / r * cot;
    if !(r / h > bound * (1.0 + WEDGE_MARGIN)) || x >= 0.5 {
        return Err(CapError::Wedge { r, h, bound });
    }
    let lambda = x / (1.0 - x);
    let one_minus = (1.0 - 2.0 * x) / (1.0 - x);
    let a = (one_minus * (1.0 + lambda)).sqrt() / r;
    let b = one_minus / h;
    let eta = a / b;
    Ok(EllipsoidCap {
        a,
        b,
        theta,
        eta,
        tau_star: lambda / b,
        lambda,
        r,
        h,
    })
}

impl EllipsoidCap {
    /// Capillary support function `sqrt(sin^2/a^2 + cos^2/b^2) - tau* cos` at `phi`.
    ///
    /// Evaluated as `(A - tau*^2 cos^2) / (sqrt(A) + tau* cos)` with
    /// `1 - lambda^2` in closed form, which stays accurate as `lambda -> 1`.
    pub fn support_at(&self, phi: f64) -> f64 {
        let (s, c) = phi.sin_cos();
        let (st, ct) = trig(self.theta).unwrap_or_else(|_| self.theta.sin_cos());
        let ec = self.eta * ct;
        let one_minus_l2 = st * st / (st * st + ec * ec);
        let (x, y) = (s / self.a, c / self.b);
        (x * x + y * y * one_minus_l2) / ((x * x + y * y).sqrt() + self.tau_star * c)
    }

    /// Whether `x` lies in `factor * L(a, b)`, up to `tol` on the quadratic form.
    pub fn contains_scaled(&self, x: [f64; 3], factor: f64, tol: f64) -> bool {
        let (y0, y1, y2) = (x[0] / factor, x[1] / factor, x[2] / factor + self.tau_star);
        self.a * self.a * (y0 * y0 + y1 * y1) + self.b * self.b * y2 * y2 <= 1.0 + tol
    }

    pub fn scaled(&self, r: f64) -> Result<EllipsoidCap> {
        make_cap(self.a / r, self.b / r, self.theta)
    }
}

/// Samples the capillary support function of `cap` on the grid.
pub fn cap_support(geom: &CapGeometry, cap: &EllipsoidCap) -> Result<ScalarField> {
    if (cap.theta - geom.theta).abs() > ANGLE_MATCH {
        return Err(CapError::Usage(format!(
            "cap angle {} differs from grid angle {}",
            cap.theta, geom.theta
        )));
    }
    Ok(ScalarField::from_fn(geom, |phi, _| cap.support_at(phi)))
}

/// `R2/R1 + H2/H1`: the cylinder `Z(R2, H2)` fits in that multiple of the
/// cone `C(R1, H1)`.
pub fn cone_cylinder_factor(r1: f64, h1: f64, r2: f64, h2: f64) -> Result<f64> {
    for (x, n) in [(r1, "R1"), (h1, "H1"), (r2, "R2"), (h2, "H2")] {
        positive(x, n)?;
    }
    Ok(r2 / r1 + h2 / h1)
}
