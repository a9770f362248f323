//! Capillary John sandwich `L(a, b) <= body <= factor * L(a, b)`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::cap::{boundary_jet, BodyEmbedding, BodyExtents};
use crate::ellipsoid::{cap_from_rh, cap_support, EllipsoidCap};
use crate::error::{CapError, Result};
use crate::grid::{CapGeometry, ScalarField};

/// Sandwich tolerance in units of the squared grid step.
pub const SANDWICH_TOL_FACTOR: f64 = 5.0;

/// Inner cap with `R = (2/3) R_in`, `H = H/3`, and the outer dilation factor
/// `(3/2) R_out / R_in + 3`.
pub fn john_construct(extents: &BodyExtents, theta: f64) -> Result<(EllipsoidCap, f64)> {
    let check = height_ratio_check(extents, theta);
    if !check.pass {
        return Err(CapError::NotCapillaryConvex {
            ratio: check.ratio,
            bound: check.bound,
        });
    }
    let cap = cap_from_rh(2.0 / 3.0 * extents.r_in, extents.height / 3.0, theta)?;
    Ok((cap, 1.5 * extents.r_out / extents.r_in + 3.0))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct HeightRatio {
    pub ratio: f64,
    pub bound: f64,
    pub pass: bool,
}

/// `H / R_in` against `tan(theta)`.
pub fn height_ratio_check(extents: &BodyExtents, theta: f64) -> HeightRatio {
    let ratio = extents.height / extents.r_in;
    let bound = if (theta - std::f64::consts::FRAC_PI_2).abs() < 1e-14 {
        f64::INFINITY
    } else {
        theta.tan()
    };
    HeightRatio {
        ratio,
        bound,
        pass: ratio < bound,
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SandwichReport {
    pub cap: EllipsoidCap,
    pub factor: f64,
    pub min_ratio: f64,
    pub max_ratio: f64,
    /// Ratios of the boundary traces of `h` and the cap support function.
    pub boundary_min_ratio: f64,
    pub boundary_max_ratio: f64,
    pub tol: f64,
    pub pass: bool,
    #[serde(skip)]
    pub ratio: Option<ScalarField>,
}

/// Compares `h` with the cap support function pointwise.
pub fn verify_sandwich(
    geom: &CapGeometry,
    h: &ScalarField,
    cap: &EllipsoidCap,
    factor: f64,
) -> Result<SandwichReport> {
    geom.check_shape(h)?;
    let w = cap_support(geom, cap)?;
    let ratio = h.zip_with(&w, |a, b| a / b)?;
    let wb = cap.support_at(geom.theta);
    let bratios: Vec<f64> = boundary_jet(geom, &h.values)
        .iter()
        .map(|(v, _, _)| v / wb)
        .collect();
    let tol = SANDWICH_TOL_FACTOR * geom.step() * geom.step();
    let (min_ratio, max_ratio) = (ratio.min(), ratio.max());
    Ok(SandwichReport {
        cap: *cap,
        factor,
        min_ratio,
        max_ratio,
        boundary_min_ratio: bratios.iter().copied().fold(f64::INFINITY, f64::min),
        boundary_max_ratio: bratios.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        tol,
        pass: min_ratio >= 1.0 - tol && max_ratio <= factor + tol,
        ratio: Some(ratio),
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ContainmentReport {
    pub samples: usize,
    pub inside: usize,
}

impl ContainmentReport {
    pub fn rate(&self) -> f64 {
        self.inside as f64 / self.samples as f64
    }
}

/// Samples points `t X` of the body, `X` a reconstructed surface or boundary
/// point and `t` in `[0, 1]`, and counts those inside `factor * L`.
pub fn monte_carlo_containment(
    body: &BodyEmbedding,
    cap: &EllipsoidCap,
    factor: f64,
    samples: usize,
    seed: u64,
    tol: f64,
) -> ContainmentReport {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n_surf = body.points.len();
    let n_all = n_surf + body.boundary_points.len();
    let mut inside = 0;
    for _ in 0..samples {
        let k = rng.random_range(0..n_all);
        let x = if k < n_surf {
            body.points[k]
        } else {
            body.boundary_points[k - n_surf]
        };
        let t: f64 = rng.random::<f64>().cbrt();
        if cap.contains_scaled([t * x[0], t * x[1], t * x[2]], factor, tol) {
            inside += 1;
        }
    }
    ContainmentReport { samples, inside }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cap::{ell_field, embed_body};
    use crate::ellipsoid::make_cap;
    use crate::grid::build_grid;
    use std::f64::consts::PI;

    fn unit_extents(theta: f64) -> BodyExtents {
        BodyExtents {
            r_out: theta.sin(),
            r_in: theta.sin(),
            height: 1.0 - theta.cos(),
            boundary_plane_defect: 0.0,
        }
    }

    #[test]
    fn unit_cap_factor() {
        let (_, f) = john_construct(&unit_extents(1.0), 1.0).unwrap();
        assert_eq!(f, 4.5);
        let mut e = unit_extents(1.0);
        e.r_out = 2.0 * e.r_in;
        assert_eq!(john_construct(&e, 1.0).unwrap().1, 6.0);
    }

    #[test]
    fn tall_bodies_rejected() {
        let theta = PI / 3.0;
        let mut e = unit_extents(theta);
        e.height = 2.0 * e.r_in * theta.tan();
        assert!(!height_ratio_check(&e, theta).pass);
        assert!(matches!(
            john_construct(&e, theta),
            Err(CapError::NotCapillaryConvex { .. })
        ));
        let r = height_ratio_check(&unit_extents(theta), theta);
        assert!((r.ratio - (theta / 2.0).tan()).abs() < 1e-15 && r.pass);
    }

    #[test]
    fn self_sandwich_is_exact() {
        let g = build_grid(PI / 3.0, 16, 32).unwrap();
        let cap = make_cap(1.0, 1.0, g.theta).unwrap();
        let r = verify_sandwich(&g, &ell_field(&g), &cap, 1.0).unwrap();
        assert!((r.min_ratio - 1.0).abs() < 1e-14 && (r.max_ratio - 1.0).abs() < 1e-14);
        assert!(r.pass);
    }

    #[test]
    fn ell_sandwich_and_sampling_agree() {
        let g = build_grid(PI / 4.0, 32, 64).unwrap();
        let h = ell_field(&g);
        let body = embed_body(&g, &h).unwrap();
        let (cap, factor) = john_construct(&body.extents, g.theta).unwrap();
        let r = verify_sandwich(&g, &h, &cap, factor).unwrap();
        assert!(r.pass && r.min_ratio >= 1.0 && r.max_ratio <= 4.5);
        let mc = monte_carlo_containment(&body, &cap, factor, 10_000, 7, 1e-9);
        assert_eq!(mc.inside, mc.samples);
    }
}
