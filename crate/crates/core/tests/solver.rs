use std::f64::consts::PI;

use capillary::analytic::{robin_field, Mode, NeumannField, SmoothField};
use capillary::cap::even_defect;
use capillary::monitors::gradient_quotient;
use capillary::solver::*;
use capillary::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// `ell^(1-p) (ell^2 + |grad ell|^2)^((q-3)/2)`, for which `h = ell` is exact.
fn ell_data(g: &CapGeometry, p: f64, q: f64) -> ScalarField {
    ScalarField::from_fn(g, |phi, _| {
        let l = 1.0 - g.cos_theta * phi.cos();
        let lp = g.cos_theta * phi.sin();
        l.powf(1.0 - p) * (l * l + lp * lp).powf(0.5 * (q - 3.0))
    })
}

fn sup(f: &ScalarField) -> f64 {
    f.values.iter().fold(0.0, |m, v| m.max(v.abs()))
}

fn modulated(g: &CapGeometry, p: f64) -> ScalarField {
    let f = ScalarField::from_fn(g, |phi, psi| {
        let l = 1.0 - g.cos_theta * phi.cos();
        let rho = phi.sin().powi(2) * (2.0 - phi.sin().powi(2) / g.sin_theta.powi(2));
        l.powf(1.0 - p) * (1.0 + 0.2 * (2.0 * psi).cos() * rho)
    });
    symmetrize_even(g, &f).unwrap()
}

#[test]
fn ell_is_exact_for_ell_data() {
    for q in [1.0, 2.0, 3.0] {
        let mut prev = f64::INFINITY;
        for n in [16usize, 32] {
            let g = build_grid(PI / 3.0, n, 2 * n).unwrap();
            let spec = ProblemSpec::new(2.0, q, g.theta, ell_data(&g, 2.0, q), true);
            let r = sup(&residual_h(&spec, &g, &ell_field(&g)).unwrap());
            assert!(r < 5.0 * g.step_sq(), "q {q} n {n}: {r}");
            assert!(r < prev / 3.0);
            prev = r;
        }
    }
    let g = build_grid(PI / 3.0, 32, 64).unwrap();
    let spec = ProblemSpec::new(2.0, 3.0, g.theta, ell_data(&g, 2.0, 3.0), true);
    let r = sup(&residual_u(&spec, &g, &ScalarField::constant(&g, 1.0)).unwrap());
    assert!(r < g.step_sq());
}

#[test]
fn constant_residual_on_hemisphere() {
    let g = build_grid(PI / 2.0, 8, 16).unwrap();
    let (p, q, c) = (2.5, 1.5, 1.3f64);
    let spec = ProblemSpec::new(p, q, g.theta, ScalarField::constant(&g, 1.0), true);
    let expected = c * c - c.powf(p - 1.0) * c.powf(3.0 - q);
    for r in residual_u(&spec, &g, &ScalarField::constant(&g, c)).unwrap().values {
        assert!((r - expected).abs() < 1e-12);
    }
    let one = ProblemSpec::new(3.0, 1.0, g.theta, ScalarField::constant(&g, 1.0), true);
    assert!(sup(&residual_u(&one, &g, &ScalarField::constant(&g, 1.0)).unwrap()) < 1e-13);
}

#[test]
fn residual_forms_agree() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for _ in 0..4 {
        let modes: Vec<Mode> = (0..3)
            .map(|_| {
                let k = rng.random_range(0..4);
                Mode {
                    amp: rng.random_range(-0.05..0.05),
                    k,
                    phase: rng.random_range(0.0..PI),
                    m: if k == 0 { 2 } else { k + (k % 2) },
                }
            })
            .collect();
        let mut prev = f64::INFINITY;
        for n in [16usize, 32, 64] {
            let g = build_grid(PI / 4.0, n, 2 * n).unwrap();
            let u = NeumannField::new(&g, modes.clone()).sample(&g);
            let spec = ProblemSpec::new(2.0, 2.5, g.theta, ScalarField::constant(&g, 1.0), false);
            let h = u.zip_with(&ell_field(&g), |a, b| a * b).unwrap();
            let a = residual_u(&spec, &g, &u).unwrap();
            let b = residual_h(&spec, &g, &h).unwrap();
            let d = sup(&a.zip_with(&b, |x, y| x - y).unwrap());
            assert!(d < 10.0 * g.step_sq(), "n {n}: {d}");
            assert!(d < prev);
            prev = d;
        }
    }
}

#[test]
fn manufactured_data_for_ell() {
    let g = build_grid(PI / 3.0, 32, 64).unwrap();
    let f = manufactured_f(&g, &ell_field(&g), 1.5, 2.0).unwrap();
    let exact = ell_data(&g, 1.5, 2.0);
    let rel = f
        .values
        .iter()
        .zip(&exact.values)
        .map(|(a, b)| (a / b - 1.0).abs())
        .fold(0.0, f64::max);
    assert!(rel < 5.0 * g.step_sq(), "{rel}");
    // an h violating the Robin condition is refused
    assert!(manufactured_f(&g, &ScalarField::constant(&g, 1.0), 1.5, 2.0).is_err());
}

#[test]
fn manufactured_recovery() {
    let theta = PI / 3.0;
    let mut errors = Vec::new();
    for n in [16usize, 32] {
        let g = build_grid(theta, n, 2 * n).unwrap();
        let hs = robin_field(&g, NeumannField::cos2(&g, 0.05));
        let h_star = symmetrize_even(&g, &hs.sample(&g)).unwrap();
        let f = symmetrize_even(&g, &manufactured_f(&g, &h_star, 2.0, 3.0).unwrap()).unwrap();
        let spec = ProblemSpec::new(2.0, 3.0, theta, f, true);
        let r = continuation_solve(&spec, &g, &SolverConfig::default()).unwrap();
        assert!(r.converged);
        errors.push(sup(&r.h().zip_with(&h_star, |a, b| a - b).unwrap()));
    }
    assert!(errors[1] < 1e-3);
    let ratio = errors[0] / errors[1];
    assert!((3.2..4.9).contains(&ratio), "{errors:?}");
}

#[test]
fn base_point_and_hemisphere() {
    let g = build_grid(PI / 3.0, 16, 32).unwrap();
    let spec = ProblemSpec::new(2.0, 3.0, g.theta, modulated(&g, 2.0), true);
    let u0 = symmetrize_even(&g, &NeumannField::cos2(&g, 0.1).sample(&g)).unwrap();
    let r = newton_solve(&spec, &g, 0.0, &u0, &SolverConfig::default()).unwrap();
    assert!(r.converged && r.residual_sup <= 1e-10);
    assert!(r.u().values.iter().all(|u| (u - 1.0).abs() < 1e-9));

    let g = build_grid(PI / 2.0, 16, 32).unwrap();
    let spec = ProblemSpec::new(3.0, 1.0, g.theta, ScalarField::constant(&g, 1.0), true);
    let r = newton_solve(&spec, &g, 1.0, &ScalarField::constant(&g, 2.0), &SolverConfig::default())
        .unwrap();
    assert!(r.converged);
    assert!(r.h().values.iter().all(|h| (h - 1.0).abs() < 1e-8));
}

#[test]
fn subcritical_solution_properties() {
    let cfg = SolverConfig::default();
    let g = build_grid(PI / 3.0, 24, 48).unwrap();
    let spec = ProblemSpec::new(2.0, 3.0, g.theta, modulated(&g, 2.0), true);
    let r = continuation_solve(&spec, &g, &cfg).unwrap();
    assert!(r.converged);
    assert!(r.residual_sup <= cfg.newton_tol);
    assert!(r.h().min() > 0.0);
    assert!(r.b_eigen_range.0 >= cfg.convexity_floor);
    assert!(even_defect(&g, r.h()).unwrap() <= EVEN_TOL);
    // the h-form discretization agrees up to truncation error
    let res = sup(&residual_h(&spec, &g, r.h()).unwrap());
    assert!(res < 0.1 * g.step_sq(), "{res}");
    let ext = embed_body(&g, r.h()).unwrap().extents;
    assert!(ext.boundary_plane_defect < 10.0 * g.step_sq());
}

#[test]
fn supercritical_branch() {
    let g = build_grid(PI / 4.0, 16, 32).unwrap();
    let spec = ProblemSpec::new(4.0, 1.0, g.theta, ScalarField::constant(&g, 1.0), true);
    let r = continuation_solve(&spec, &g, &SolverConfig::default()).unwrap();
    assert!(r.converged, "{}", r.message);

    let l = ell_field(&g);
    let starts: Vec<ScalarField> = [1.0, 2.0, 0.5].iter().map(|c| l.map(|v| v * c)).collect();
    let u = uniqueness_probe(&spec, &g, &SolverConfig::default(), &starts).unwrap();
    assert!(u.pass && u.max_log_ratio <= 1e-8, "{}", u.max_log_ratio);
}

#[test]
fn critical_branch_with_ell_data() {
    let g = build_grid(PI / 3.0, 16, 32).unwrap();
    let spec = ProblemSpec::new(2.0, 2.0, g.theta, ell_data(&g, 2.0, 2.0), true);
    let r = pq_limit_solve(&spec, &g, &SolverConfig::default(), &DEFAULT_EPS_SCHEDULE).unwrap();
    assert!(r.polish.as_ref().is_some_and(|p| p.converged));
    assert!(r.residual_sup <= 1e-6);
    assert!((r.c_star - 1.0).abs() < 1e-8, "{}", r.c_star);
    let l = ell_field(&g);
    let lmin = l.min();
    for (h, e) in r.h_bar().values.iter().zip(&l.values) {
        assert!((h - e / lmin).abs() < 1e-8);
    }
    assert!(r.monotone);
}

#[test]
fn gradient_quotient_stays_bounded() {
    for theta in [PI / 6.0, PI / 4.0, PI / 3.0] {
        let mut n_obs = Vec::new();
        for n in [12usize, 24] {
            let g = build_grid(theta, n, 2 * n).unwrap();
            let (p, q) = (1.5, 2.5);
            let spec = ProblemSpec::new(p, q, theta, modulated(&g, p), true);
            let r = continuation_solve(&spec, &g, &SolverConfig::default()).unwrap();
            assert!(r.converged);
            let gamma = (2.0f64 * (p - 1.0) / 2.0).min(2.0) * 0.9;
            n_obs.push(gradient_quotient(&g, r.h(), gamma).unwrap().n_observed);
        }
        assert!((n_obs[1] / n_obs[0] - 1.0).abs() < 0.1, "{n_obs:?}");
    }
}

#[test]
fn invalid_problems() {
    let g = build_grid(PI / 3.0, 8, 16).unwrap();
    let one = ScalarField::constant(&g, 1.0);
    let cfg = SolverConfig::default();
    let solve = |p: f64, q: f64, f: &ScalarField, even: bool| {
        continuation_solve(&ProblemSpec::new(p, q, g.theta, f.clone(), even), &g, &cfg)
    };
    assert!(matches!(solve(2.0, 3.5, &one, true), Err(CapError::Config(_))));
    assert!(matches!(solve(1.0, 2.0, &one, true), Err(CapError::Config(_))));
    assert!(solve(2.0, 2.0, &one, true).is_err());
    assert!(solve(2.0, 3.0, &one.map(|v| -v), true).is_err());
    let odd = ScalarField::from_fn(&g, |phi, psi| 1.0 + 0.1 * psi.cos() * phi.sin());
    assert!(solve(2.0, 3.0, &odd, true).is_err());
    assert!(solve(2.0, 3.0, &odd, false).is_err());
    let mut flagged = ProblemSpec::new(2.0, 3.0, g.theta, odd, false);
    flagged.unsupported_regime = true;
    assert!(continuation_solve(&flagged, &g, &cfg).is_ok());
    let spec = ProblemSpec::new(2.0, 3.0, g.theta, one.clone(), true);
    let starts = [one.clone(), one.clone()];
    assert!(matches!(
        uniqueness_probe(&spec, &g, &cfg, &starts),
        Err(CapError::Applicability(_))
    ));
    let bad = SolverConfig {
        newton_tol: -1.0,
        ..SolverConfig::default()
    };
    assert!(continuation_solve(&spec, &g, &bad).is_err());
}
