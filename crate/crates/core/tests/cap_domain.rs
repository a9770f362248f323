use std::f64::consts::PI;

use capillary::analytic::{Mode, NeumannField, SmoothField};
use capillary::*;

fn cos_mode(g: &CapGeometry, k: i32, m: i32, amp: f64) -> ScalarField {
    NeumannField::new(
        g,
        vec![Mode {
            amp,
            k,
            phase: 0.0,
            m,
        }],
    )
    .sample(g)
    .map(|v| v - 1.0)
}

#[test]
fn area_quadrature_matches_cap_area() {
    let g = build_grid(PI / 3.0, 64, 128).unwrap();
    let exact = 2.0 * PI * (1.0 - 0.5);
    assert!((g.total_area() - exact).abs() / exact < 1e-3);

    let mut prev = f64::NAN;
    for n in [8usize, 16, 32, 64] {
        let g = build_grid(PI / 4.0, n, 2 * n).unwrap();
        let err = (g.total_area() - 2.0 * PI * (1.0 - g.cos_theta)).abs();
        if prev.is_finite() {
            let ratio = prev / err;
            assert!((3.8..4.2).contains(&ratio), "ratio {ratio}");
        }
        prev = err;
    }
}

#[test]
fn ell_boundary_and_pole_values() {
    let g = build_grid(PI / 3.0, 64, 128).unwrap();
    let l = ell_field(&g);
    let trace = g.boundary_trace(&l.values);
    // 1 - cos(theta) cos(theta) = sin^2(theta)
    assert!(trace.iter().all(|(v, _)| (v - 0.75).abs() < 1e-6));
    let n = field_norms(&g, &l).unwrap();
    assert!((n.min - 0.5).abs() < 1e-3);
    assert!(n.max < 0.75 && 0.75 - n.max < 1e-2);
}

#[test]
fn ell_gradient() {
    let g = build_grid(PI / 3.0, 32, 64).unwrap();
    let (g1, g2) = grad_field(&g, &ell_field(&g)).unwrap();
    for i in 0..g.n_phi {
        let exact = g.cos_theta * g.sin_phi[i];
        for j in 0..g.n_psi {
            let k = g.idx(i, j);
            assert!((g1.values[k] - exact).abs() < 1e-3, "{} vs {exact}", g1.values[k]);
            assert!(g2.values[k].abs() < 1e-12);
        }
    }
}

/// `sup` over azimuths of the one-sided boundary derivative error.
fn boundary_derivative_error(n: usize, field: impl Fn(&CapGeometry) -> ScalarField, exact: f64) -> (f64, f64) {
    let g = build_grid(PI / 3.0, n, 2 * n).unwrap();
    let d = g.boundary_trace(&field(&g).values);
    let e = d.iter().map(|(_, dp)| (dp - exact).abs()).fold(0.0, f64::max);
    (e, g.dphi * g.dphi)
}

#[test]
fn ell_boundary_derivative_is_second_order() {
    // d_phi ell at phi = theta is cos(theta) sin(theta) = 0.5 sin(pi/3)
    let exact = 0.5 * (PI / 3.0).sin();
    let (e32, h32) = boundary_derivative_error(32, ell_field, exact);
    let (e64, h64) = boundary_derivative_error(64, ell_field, exact);
    assert!(e32 <= h32 && e64 <= h64);
    assert!((3.5..4.5).contains(&(e32 / e64)));
}

#[test]
fn neumann_mode_has_flat_boundary_derivative() {
    let mode = |g: &CapGeometry| cos_mode(g, 2, 2, 1.0);
    let (e32, h32) = boundary_derivative_error(32, mode, 0.0);
    let (e64, h64) = boundary_derivative_error(64, mode, 0.0);
    assert!(e32 <= 10.0 * h32 && e64 <= 10.0 * h64);
    assert!(e32 / e64 > 3.5);
}

#[test]
fn ell_curvature_is_identity() {
    for theta in [PI / 6.0, PI / 4.0, PI / 3.0] {
        let g = build_grid(theta, 32, 64).unwrap();
        let c = curvature_tensor(&g, &ell_field(&g)).unwrap();
        assert!(c.max_deviation_from_identity() < 1e-3);
        assert!(c.det_b.iter().all(|d| (d - 1.0).abs() < 2e-3));
        assert!(c.sigma1.iter().all(|s| (s - 2.0).abs() < 2e-3));
    }
}

#[test]
fn unit_cap_embedding() {
    for theta in [PI / 6.0, PI / 3.0] {
        let mut prev_defect = f64::INFINITY;
        for n in [16usize, 32] {
            let g = build_grid(theta, n, 2 * n).unwrap();
            let body = embed_body(&g, &ell_field(&g)).unwrap();
            let e = body.extents;
            let tol = 2.0 * g.step() * g.step();
            assert!((e.r_out - theta.sin()).abs() < tol);
            assert!((e.r_in - theta.sin()).abs() < tol);
            assert!((e.height - (1.0 - theta.cos())).abs() < tol);
            assert!(e.boundary_plane_defect < prev_defect);
            assert!(body.convex);
            prev_defect = e.boundary_plane_defect;
        }
    }
}

#[test]
fn broken_robin_condition_lifts_boundary() {
    // h = 1 has h_phi = 0 on the boundary, so X_3 = h cos(theta)
    let theta = PI / 3.0;
    let g = build_grid(theta, 32, 64).unwrap();
    let body = embed_body(&g, &ScalarField::constant(&g, 1.0)).unwrap();
    assert!((body.extents.boundary_plane_defect - theta.cos()).abs() < 1e-12);
}

#[test]
fn robin_residual_values() {
    let g = build_grid(PI / 3.0, 32, 64).unwrap();
    let r = robin_residual(&g, &ell_field(&g)).unwrap();
    assert!(r.iter().all(|v| v.abs() < g.dphi * g.dphi));
    let g = build_grid(PI / 4.0, 16, 32).unwrap();
    let r = robin_residual(&g, &ScalarField::constant(&g, 1.0)).unwrap();
    assert!(r.iter().all(|v| (v + 1.0).abs() < 1e-12));
}

#[test]
fn symmetrization() {
    let g = build_grid(PI / 4.0, 16, 32).unwrap();
    let odd = cos_mode(&g, 1, 3, 1.0);
    let s = symmetrize_even(&g, &odd).unwrap();
    assert!(s.values.iter().all(|v| v.abs() < 1e-15));
    let even = symmetrize_even(&g, &cos_mode(&g, 2, 2, 1.0)).unwrap();
    assert_eq!(symmetrize_even(&g, &even).unwrap(), even);
}

#[test]
fn unit_field_l2_norm_is_area() {
    let g = build_grid(PI / 3.0, 64, 128).unwrap();
    let n = field_norms(&g, &ScalarField::constant(&g, 1.0)).unwrap();
    assert!((n.l2 * n.l2 - PI).abs() / PI < 1e-3);
}

#[test]
fn field_files_round_trip() {
    let g = build_grid(PI / 5.0, 8, 16).unwrap();
    let f = ScalarField::from_fn(&g, |phi, psi| 1.0 + phi.sin() * (3.0 * psi).cos() / 3.0);
    let back = ScalarField::from_json(&f.to_json().unwrap()).unwrap();
    assert_eq!(back, f);
    let mut buf = Vec::new();
    f.write_csv(&g, &mut buf).unwrap();
    assert_eq!(ScalarField::read_csv(&g, buf.as_slice()).unwrap(), f);
}

#[test]
fn grid_validation() {
    assert!(build_grid(0.0, 8, 16).is_err());
    assert!(build_grid(PI / 2.0 + 1e-6, 8, 16).is_err());
    assert!(build_grid(1.0, 8, 15).is_err());
    let g = build_grid(PI / 2.0, 8, 16).unwrap();
    assert_eq!(g.cos_theta, 0.0);
    let other = build_grid(1.0, 8, 16).unwrap();
    assert!(curvature_tensor(&g, &ScalarField::constant(&other, 1.0)).is_err());
}
