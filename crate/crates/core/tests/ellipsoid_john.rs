use std::f64::consts::PI;

use capillary::analytic::{Mode, NeumannField, SmoothField};
use capillary::ellipsoid::{lambda_of_eta, lambda_prime, WEDGE_MARGIN};
use capillary::john::{monte_carlo_containment, SANDWICH_TOL_FACTOR};
use capillary::*;
use proptest::prelude::*;

/// `R/H` of an ellipsoid cap in closed form, written out independently of
/// the library: `(sqrt(sin^2 + eta^2 cos^2) + eta cos) / (eta sin)`.
fn rh_closed_form(eta: f64, theta: f64) -> f64 {
    let (s, c) = theta.sin_cos();
    ((s * s + eta * eta * c * c).sqrt() + eta * c) / (eta * s)
}

fn log_uniform(lo: f64, hi: f64) -> impl Strategy<Value = f64> {
    (lo.log10()..hi.log10()).prop_map(|e| 10f64.powf(e))
}

#[test]
fn unit_cap_support_is_ell() {
    for theta in [0.4, PI / 3.0, 1.5] {
        let g = build_grid(theta, 16, 32).unwrap();
        let cap = make_cap(1.0, 1.0, theta).unwrap();
        let w = cap_support(&g, &cap).unwrap();
        let l = ell_field(&g);
        for k in 0..g.n_cells() {
            assert!((w.values[k] - l.values[k]).abs() < 1e-15);
        }
        // pole value (1 - lambda) / b
        assert!((cap.support_at(0.0) - (1.0 - cap.lambda) / cap.b).abs() < 1e-15);
    }
}

#[test]
fn cap_support_rejects_other_angle() {
    let g = build_grid(PI / 3.0, 8, 16).unwrap();
    let cap = make_cap(1.0, 2.0, PI / 4.0).unwrap();
    assert!(matches!(cap_support(&g, &cap), Err(CapError::Usage(_))));
}

#[test]
fn inclusion_factors() {
    let (r, h) = (1.3, 0.7);
    assert!((cone_cylinder_factor(r, h, 2.0 / 3.0 * r, h / 3.0).unwrap() - 1.0).abs() < 1e-15);
    let (r_in, r_out) = (0.8, 1.1);
    let f = cone_cylinder_factor(2.0 / 3.0 * r_in, h / 3.0, r_out, h).unwrap();
    assert!((f - (1.5 * r_out / r_in + 3.0)).abs() < 1e-14);
}

#[test]
fn wedge_edge_is_rejected() {
    for theta in [0.2, PI / 4.0, 1.3] {
        let cot = theta.cos() / theta.sin();
        for scale in [1.0, 1.0 + 0.1 * WEDGE_MARGIN, 0.9] {
            let r = scale * 2.0 * cot;
            assert!(matches!(cap_from_rh(r, 1.0, theta), Err(CapError::Wedge { .. })));
        }
        assert!(cap_from_rh(2.0 * cot * (1.0 + 1e-6), 1.0, theta).is_ok());
    }
}

fn extents(r_out: f64, r_in: f64, height: f64) -> BodyExtents {
    BodyExtents {
        r_out,
        r_in,
        height,
        boundary_plane_defect: 0.0,
    }
}

#[test]
fn john_factor_values() {
    let theta = PI / 3.0;
    let unit = extents(theta.sin(), theta.sin(), 1.0 - theta.cos());
    let (_, f) = john_construct(&unit, theta).unwrap();
    assert_eq!(f, 4.5);
    let (_, f) = john_construct(&extents(2.0, 1.0, 0.5), theta).unwrap();
    assert_eq!(f, 6.0);
    let hr = height_ratio_check(&unit, theta);
    assert!((hr.ratio - (theta / 2.0).tan()).abs() < 1e-15 && hr.pass);
    assert!(matches!(
        john_construct(&extents(1.0, 1.0, 2.0), theta),
        Err(CapError::NotCapillaryConvex { .. })
    ));
}

#[test]
fn ell_sandwich() {
    for theta in [PI / 6.0, PI / 4.0, PI / 3.0, PI / 2.0] {
        let g = build_grid(theta, 32, 64).unwrap();
        let l = ell_field(&g);
        let body = embed_body(&g, &l).unwrap();
        let (cap, factor) = john_construct(&body.extents, theta).unwrap();
        assert!((factor - 4.5).abs() < 1e-3);
        let rep = verify_sandwich(&g, &l, &cap, factor).unwrap();
        assert!(rep.pass, "{rep:?}");
        assert!(rep.min_ratio >= 1.0 - rep.tol && rep.max_ratio <= 4.5 + rep.tol);
        let mc = monte_carlo_containment(&body, &cap, factor, 10_000, 7, rep.tol);
        assert_eq!(mc.inside, mc.samples);
    }
}

#[test]
fn perturbed_even_bodies_sandwich() {
    let theta = PI / 3.0;
    let g = build_grid(theta, 32, 64).unwrap();
    for eps in [0.02, 0.05, 0.1] {
        let u = NeumannField::new(
            &g,
            vec![
                Mode { amp: eps, k: 2, phase: 0.0, m: 2 },
                Mode { amp: 0.5 * eps, k: 4, phase: 0.3, m: 4 },
            ],
        );
        let h = symmetrize_even(&g, &ell_field(&g).zip_with(&u.sample(&g), |a, b| a * b).unwrap())
            .unwrap();
        assert!(curvature_tensor(&g, &h).unwrap().lambda_min > 0.0);
        let body = embed_body(&g, &h).unwrap();
        let (cap, factor) = john_construct(&body.extents, theta).unwrap();
        let rep = verify_sandwich(&g, &h, &cap, factor).unwrap();
        assert!(rep.pass, "eps {eps}: {rep:?}");
        assert!(rep.tol == SANDWICH_TOL_FACTOR * g.step() * g.step());
        let mc = monte_carlo_containment(&body, &cap, factor, 10_000, 11, rep.tol);
        assert_eq!(mc.rate(), 1.0);
    }
}

proptest! {
    #[test]
    fn round_trip_in_conditioned_range(
        a in log_uniform(1e-3, 1e3),
        b in log_uniform(1e-3, 1e3),
        theta in 0.05f64..(PI / 2.0),
    ) {
        let cap = make_cap(a, b, theta).unwrap();
        let kappa = (1.0 + cap.lambda) / (1.0 - cap.lambda);
        prop_assume!(kappa < 1e3);
        let back = cap_from_rh(cap.r, cap.h, theta).unwrap();
        prop_assert!(((back.a - a) / a).abs() < 1e-12);
        prop_assert!(((back.b - b) / b).abs() < 1e-12);
    }

    #[test]
    fn lambda_increases_with_eta(eta in log_uniform(1e-2, 1e2), theta in 0.05f64..1.5) {
        let d = 1e-6 * eta;
        let fd = (lambda_of_eta(eta + d, theta) - lambda_of_eta(eta - d, theta)) / (2.0 * d);
        let lp = lambda_prime(eta, theta);
        prop_assert!(lp > 0.0);
        prop_assert!((fd - lp).abs() <= 1e-6 * lp.max(1e-3));
    }

    #[test]
    fn height_ratio_identity(a in log_uniform(1e-2, 1e2), b in log_uniform(1e-2, 1e2), theta in 0.05f64..1.5) {
        let cap = make_cap(a, b, theta).unwrap();
        let eta = a / b;
        let rh = cap.r / cap.h;
        let cot = theta.cos() / theta.sin();
        prop_assert!((rh - rh_closed_form(eta, theta)).abs() <= 1e-12 * rh);
        prop_assert!(rh > 2.0 * cot);
        prop_assert!(rh <= (2.0 * cot + 1.0 / eta) * (1.0 + 1e-12));
        if eta >= 1.0 {
            prop_assert!(rh <= (2.0 * cot + 1.0) * (1.0 + 1e-12));
        }
    }

    #[test]
    fn support_lower_bound_for_flat_caps(b in log_uniform(1e-2, 1e2), eta in 0.01f64..1.0, theta in 0.05f64..1.5, t in 0.0f64..1.0) {
        let cap = make_cap(eta * b, b, theta).unwrap();
        let bound = theta.cos() * (1.0 - theta.cos()) / b;
        prop_assert!(cap.support_at(t * theta) >= bound * (1.0 - 1e-12));
    }

    #[test]
    fn support_scales_with_dilation(a in log_uniform(1e-2, 1e2), b in log_uniform(1e-2, 1e2), r in log_uniform(1e-2, 1e2), theta in 0.05f64..1.5, t in 0.0f64..1.0) {
        let cap = make_cap(a, b, theta).unwrap();
        let big = cap.scaled(r).unwrap();
        let phi = t * theta;
        prop_assert!((big.support_at(phi) - r * cap.support_at(phi)).abs() <= 1e-13 * r * cap.support_at(phi));
        prop_assert!((big.r - r * cap.r).abs() <= 1e-14 * big.r);
        prop_assert!((big.h - r * cap.h).abs() <= 1e-14 * big.h);
    }

    #[test]
    fn john_factor_at_least_nine_halves(r_in in 0.1f64..2.0, extra in 0.0f64..2.0, height in 0.01f64..0.5) {
        let theta = PI / 3.0;
        let e = extents(r_in + extra, r_in, height * r_in);
        let (_, f) = john_construct(&e, theta).unwrap();
        prop_assert!(f >= 4.5);
        prop_assert_eq!(f == 4.5, extra == 0.0);
    }
}
