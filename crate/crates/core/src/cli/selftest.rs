//! Identity suites run by `capillary selftest`.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::analytic::{Mode, NeumannField, SmoothField};
use crate::cap::{curvature_tensor, ell_field};
use crate::ellipsoid::{cap_from_rh, make_cap, WEDGE_MARGIN};
use crate::error::{CapError, Result};
use crate::grid::build_grid;
use crate::monitors::phi_monitor;

/// `max |b(ell) - I| <= ELL_IDENTITY_C step^2`.
pub const ELL_IDENTITY_C: f64 = 1.0;
/// Lowest accepted error ratio under one grid doubling.
pub const ELL_MIN_RATIO: f64 = 3.0;
/// Round trips must be accurate to `ROUND_TRIP_C eps kappa`, where
/// `kappa = (1 + lambda) / (1 - lambda)` is the condition number of the
/// inverse map.
pub const ROUND_TRIP_C: f64 = 16.0;
pub const ROUND_TRIP_SAMPLES: usize = 1000;
/// `max |d_mu log Phi + gamma cot(theta)| <= BOUNDARY_IDENTITY_C step`.
pub const BOUNDARY_IDENTITY_C: f64 = 30.0;

#[derive(Clone, Debug, Serialize)]
pub struct SuiteReport {
    pub name: &'static str,
    pub pass: bool,
    pub summary: String,
    pub details: serde_json::Value,
}

#[derive(Serialize)]
struct EllCase {
    theta: f64,
    coarse_error: f64,
    fine_error: f64,
    ratio: f64,
    bound: f64,
}

pub fn ell_identity(n_phi: usize, n_psi: usize) -> Result<SuiteReport> {
    let mut cases = Vec::new();
    for theta in [PI / 6.0, PI / 4.0, PI / 3.0] {
        let err = |a: usize, b: usize| -> Result<(f64, f64)> {
            let g = build_grid(theta, a, b)?;
            let e = curvature_tensor(&g, &ell_field(&g))?.max_deviation_from_identity();
            Ok((e, g.step()))
        };
        let (coarse, _) = err(n_phi / 2, n_psi / 2)?;
        let (fine, step) = err(n_phi, n_psi)?;
        cases.push(EllCase {
            theta,
            coarse_error: coarse,
            fine_error: fine,
            ratio: coarse / fine,
            bound: ELL_IDENTITY_C * step * step,
        });
    }
    let pass = cases
        .iter()
        .all(|c| c.fine_error <= c.bound && c.ratio >= ELL_MIN_RATIO);
    let worst = cases.iter().map(|c| c.fine_error).fold(0.0, f64::max);
    let min_ratio = cases.iter().map(|c| c.ratio).fold(f64::INFINITY, f64::min);
    Ok(SuiteReport {
        name: "ell-identity",
        pass,
        summary: format!("max |b(ell) - I| = {worst:.3e}, min refinement ratio {min_ratio:.3}"),
        details: serde_json::to_value(cases)?,
    })
}

#[derive(Serialize)]
struct RoundTripDetails {
    samples: usize,
    seed: u64,
    max_rel_error: f64,
    max_error_over_conditioning: f64,
    above_1e12: usize,
    rejected_in_wedge: usize,
    boundary_rejected: usize,
    boundary_cases: usize,
}

pub fn round_trip(seed: u64) -> Result<SuiteReport> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut d = RoundTripDetails {
        samples: ROUND_TRIP_SAMPLES,
        seed,
        max_rel_error: 0.0,
        max_error_over_conditioning: 0.0,
        above_1e12: 0,
        rejected_in_wedge: 0,
        boundary_rejected: 0,
        boundary_cases: 0,
    };
    for _ in 0..ROUND_TRIP_SAMPLES {
        let a = 10f64.powf(rng.random_range(-3.0..3.0));
        let b = 10f64.powf(rng.random_range(-3.0..3.0));
        let theta = rng.random_range(1e-3..PI / 2.0);
        let cap = make_cap(a, b, theta)?;
        let kappa = (1.0 + cap.lambda) / (1.0 - cap.lambda);
        match cap_from_rh(cap.r, cap.h, theta) {
            Ok(back) => {
                let e = ((back.a - a) / a).abs().max(((back.b - b) / b).abs());
                d.max_rel_error = d.max_rel_error.max(e);
                d.max_error_over_conditioning =
                    d.max_error_over_conditioning.max(e / (f64::EPSILON * kappa));
                d.above_1e12 += usize::from(e > 1e-12);
            }
            // admissible only when the image sits within the margin of the edge
            Err(CapError::Wedge { .. }) if 1.0 / kappa <= WEDGE_MARGIN + 16.0 * f64::EPSILON => {}
            Err(_) => d.rejected_in_wedge += 1,
        }
    }
    for _ in 0..100 {
        let theta = rng.random_range(1e-2..PI / 2.0 - 1e-2);
        let h = 10f64.powf(rng.random_range(-2.0..2.0));
        let cot = theta.cos() / theta.sin();
        for scale in [1.0, 0.5] {
            d.boundary_cases += 1;
            let r = scale * 2.0 * cot * h;
            d.boundary_rejected += usize::from(matches!(
                cap_from_rh(r, h, theta),
                Err(CapError::Wedge { .. })
            ));
        }
    }
    let pass = d.max_error_over_conditioning <= ROUND_TRIP_C
        && d.rejected_in_wedge == 0
        && d.boundary_rejected == d.boundary_cases;
    Ok(SuiteReport {
        name: "round-trip",
        pass,
        summary: format!(
            "max rel error {:.3e} ({:.2} eps kappa), {} of {} above 1e-12, {}/{} edge inputs rejected",
            d.max_rel_error,
            d.max_error_over_conditioning,
            d.above_1e12,
            d.samples,
            d.boundary_rejected,
            d.boundary_cases
        ),
        details: serde_json::to_value(d)?,
    })
}

/// Neumann test fields `1 + 0.1 cos(k psi) rho_m(phi)`.
pub const NEUMANN_TEST_MODES: [(i32, i32); 6] = [(2, 2), (1, 3), (3, 3), (4, 4), (1, 1), (2, 4)];

#[derive(Serialize)]
struct BoundaryCase {
    theta: f64,
    gamma: f64,
    k: i32,
    m: i32,
    n_phi: usize,
    error: f64,
    bound: f64,
    checked_nodes: usize,
}

pub fn boundary_identity(n_phi: usize, n_psi: usize) -> Result<SuiteReport> {
    let mut cases = Vec::new();
    for theta in [PI / 4.0, PI / 3.0] {
        for (np, ns) in [(n_phi / 2, n_psi / 2), (n_phi, n_psi)] {
            let g = build_grid(theta, np, ns)?;
            for gamma in [0.5, 1.0] {
                for (k, m) in NEUMANN_TEST_MODES {
                    let u = NeumannField::new(
                        &g,
                        vec![Mode {
                            amp: 0.1,
                            k,
                            phase: 0.0,
                            m,
                        }],
                    )
                    .sample(&g);
                    let r = phi_monitor(&g, &u, gamma)?;
                    cases.push(BoundaryCase {
                        theta,
                        gamma,
                        k,
                        m,
                        n_phi: np,
                        error: r.max_identity_error,
                        bound: BOUNDARY_IDENTITY_C * g.step(),
                        checked_nodes: r.checked.iter().filter(|c| **c).count(),
                    });
                }
            }
        }
    }
    let pass = cases
        .iter()
        .all(|c| c.error <= c.bound && c.checked_nodes > 0);
    let worst = cases
        .iter()
        .map(|c| c.error / c.bound)
        .fold(0.0, f64::max);
    Ok(SuiteReport {
        name: "boundary-identity",
        pass,
        summary: format!(
            "{} cases, worst error at {:.3} of the {BOUNDARY_IDENTITY_C} step bound",
            cases.len(),
            worst
        ),
        details: serde_json::to_value(cases)?,
    })
}

pub fn run_all(n_phi: usize, n_psi: usize, seed: u64) -> Result<Vec<SuiteReport>> {
    if n_phi < 8 || n_psi < 8 || !n_psi.is_multiple_of(4) {
        return Err(CapError::Config(format!(
            "selftest needs Nphi >= 8 and Npsi a multiple of 4 (got {n_phi}x{n_psi})"
        )));
    }
    Ok(vec![
        ell_identity(n_phi, n_psi)?,
        round_trip(seed)?,
        boundary_identity(n_phi, n_psi)?,
    ])
}
