//! Closed-form smooth fields on the cap with exact coordinate jets.
//!
//! These are used as manufactured solutions and as test fields whose
//! derivatives are known without finite differences.

use crate::grid::{CapGeometry, ScalarField};
use crate::stencil::Jet;

/// A smooth function of `(phi, psi)` with exact derivatives up to order two.
pub trait SmoothField: Send + Sync {
    fn jet(&self, phi: f64, psi: f64) -> Jet;

    fn value(&self, phi: f64, psi: f64) -> f64 {
        self.jet(phi, psi).v
    }

    fn sample(&self, geom: &CapGeometry) -> ScalarField {
        ScalarField::from_fn(geom, |p, s| self.value(p, s))
    }
}

/// `1 - cos(theta) cos(phi)`.
#[derive(Clone, Copy, Debug)]
pub struct Ell {
    pub cos_theta: f64,
}

impl Ell {
    pub fn new(geom: &CapGeometry) -> Self {
        Ell {
            cos_theta: geom.cos_theta,
        }
    }
}

impl SmoothField for Ell {
    fn jet(&self, phi: f64, _psi: f64) -> Jet {
        let (s, c) = phi.sin_cos();
        Jet {
            v: 1.0 - self.cos_theta * c,
            d_phi: self.cos_theta * s,
            d_phiphi: self.cos_theta * c,
            ..Jet::default()
        }
    }
}

/// Radial profile `rho_m(phi) = sin^m(phi) ((m+2) - m sin^2(phi)/sin^2(theta)) / 2`.
///
/// It vanishes to order `m` at the pole and has zero `phi`-derivative at
/// `phi = theta`; `m = 2` gives `sin^2(phi) (2 - sin^2(phi)/sin^2(theta))`.
#[derive(Clone, Copy, Debug)]
pub struct Rho {
    pub m: i32,
    pub sin2_theta: f64,
}

impl Rho {
    pub fn new(m: i32, sin_theta: f64) -> Self {
        Rho {
            m,
            sin2_theta: sin_theta * sin_theta,
        }
    }

    /// `(rho, rho', rho'')`.
    pub fn eval(&self, phi: f64) -> (f64, f64, f64) {
        let (s, c) = phi.sin_cos();
        let m = self.m as f64;
        let k = m * (m + 2.0) / 2.0;
        let sp = |e: i32| if e < 0 { 0.0 } else { s.powi(e) };
        let g = ((m + 2.0) * sp(self.m) - m * sp(self.m + 2) / self.sin2_theta) / 2.0;
        let g1 = k * (sp(self.m - 1) - sp(self.m + 1) / self.sin2_theta);
        let g2 = k * ((m - 1.0) * sp(self.m - 2) - (m + 1.0) * sp(self.m) / self.sin2_theta);
        (g, g1 * c, g2 * c * c - g1 * s)
    }
}

/// One azimuthal mode `amp cos(k psi + phase) rho_m(phi)`.
#[derive(Clone, Copy, Debug)]
pub struct Mode {
    pub amp: f64,
    pub k: i32,
    pub phase: f64,
    pub m: i32,
}

/// `1 + sum of modes`; every such field satisfies `d_phi u = 0` at `phi = theta`.
#[derive(Clone, Debug)]
pub struct NeumannField {
    pub sin_theta: f64,
    pub modes: Vec<Mode>,
}

impl NeumannField {
    pub fn new(geom: &CapGeometry, modes: Vec<Mode>) -> Self {
        NeumannField {
            sin_theta: geom.sin_theta,
            modes,
        }
    }

    /// `1 + amp cos(2 psi) rho_2(phi)`.
    pub fn cos2(geom: &CapGeometry, amp: f64) -> Self {
        Self::new(
            geom,
            vec![Mode {
                amp,
                k: 2,
                phase: 0.0,
                m: 2,
            }],
        )
    }

    pub fn is_even(&self) -> bool {
        self.modes.iter().all(|m| m.k % 2 == 0)
    }
}

impl SmoothField for NeumannField {
    fn jet(&self, phi: f64, psi: f64) -> Jet {
        let mut j = Jet::constant(1.0);
        for mode in &self.modes {
            let (r, r1, r2) = Rho::new(mode.m, self.sin_theta).eval(phi);
            let k = mode.k as f64;
            let (sn, cs) = (k * psi + mode.phase).sin_cos();
            let a = mode.amp;
            j.v += a * cs * r;
            j.d_phi += a * cs * r1;
            j.d_phiphi += a * cs * r2;
            j.d_psi -= a * k * sn * r;
            j.d_phipsi -= a * k * sn * r1;
            j.d_psipsi -= a * k * k * cs * r;
        }
        j
    }
}

/// Pointwise product of two smooth fields.
pub struct Product<A, B>(pub A, pub B);

impl<A: SmoothField, B: SmoothField> SmoothField for Product<A, B> {
    fn jet(&self, phi: f64, psi: f64) -> Jet {
        self.0.jet(phi, psi).mul(&self.1.jet(phi, psi))
    }
}

/// `h = ell * u` for a Neumann field `u`; satisfies the Robin condition exactly.
pub fn robin_field(geom: &CapGeometry, u: NeumannField) -> Product<Ell, NeumannField> {
    Product(Ell::new(geom), u)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fd_check(f: &dyn SmoothField, phi: f64, psi: f64) {
        let e = 1e-5;
        let j = f.jet(phi, psi);
        let dp = (f.value(phi + e, psi) - f.value(phi - e, psi)) / (2.0 * e);
        let ds = (f.value(phi, psi + e) - f.value(phi, psi - e)) / (2.0 * e);
        let dpp = (f.jet(phi + e, psi).d_phi - f.jet(phi - e, psi).d_phi) / (2.0 * e);
        let dps = (f.jet(phi, psi + e).d_phi - f.jet(phi, psi - e).d_phi) / (2.0 * e);
        let dss = (f.jet(phi, psi + e).d_psi - f.jet(phi, psi - e).d_psi) / (2.0 * e);
        for (a, b) in [
            (j.d_phi, dp),
            (j.d_psi, ds),
            (j.d_phiphi, dpp),
            (j.d_phipsi, dps),
            (j.d_psipsi, dss),
        ] {
            assert!((a - b).abs() < 1e-7, "{a} vs {b}");
        }
    }

    #[test]
    fn jets_match_finite_differences() {
        let g = CapGeometry::new(1.0, 8, 16).unwrap();
        let u = NeumannField::new(
            &g,
            vec![
                Mode { amp: 0.1, k: 2, phase: 0.3, m: 2 },
                Mode { amp: 0.05, k: 3, phase: 0.0, m: 3 },
                Mode { amp: 0.02, k: 0, phase: 0.0, m: 4 },
            ],
        );
        fd_check(&u, 0.4, 1.1);
        fd_check(&robin_field(&g, u), 0.7, 2.5);
    }

    #[test]
    fn rho_profile_has_flat_boundary() {
        for m in 1..6 {
            let r = Rho::new(m, 0.8f64.sin());
            assert!(r.eval(0.8).1.abs() < 1e-14);
        }
    }
}
