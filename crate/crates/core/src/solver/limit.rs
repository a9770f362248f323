//! The scale-invariant case `p = q` as a limit of `p + eps > q`.
//!
//! For `h = mu h_hat` the `eps`-equation reads
//! `det b(h_hat) = mu^eps f h_hat^(p-1+eps) W_hat^((3-p)/2)`, so the solver
//! carries `c = mu^eps` as an extra unknown and fixes the scale of `h_hat`
//! by requiring `h_hat / ell` to average 1 over the innermost ring. Normalizing by the minimum,
//! `h_bar = h_hat / min h_hat`, gives `C*_eps = c (min h_hat)^eps`.

use serde::{Deserialize, Serialize};

use crate::error::{CapError, Result};
use crate::grid::{CapGeometry, ScalarField};

use super::continuation::{follow_path, homotopy_parts, HomotopyPath};
use super::newton::{NewtonTrace, Operator, Rhs, State};
use super::problem::{Branch, ProblemSpec, SolverConfig};

pub const DEFAULT_EPS_SCHEDULE: [f64; 4] = [0.1, 0.05, 0.025, 0.0125];

/// Target for successive differences of `C*_eps`.
pub const PQ_DIFF_TOL: f64 = 1e-3;

/// Slack allowed against monotonicity of the `C*_eps` sequence.
const MONOTONE_SLACK: f64 = 1e-8;

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct EpsStep {
    pub eps: f64,
    pub c_star: f64,
    pub min_h_hat: f64,
    pub converged: bool,
    pub newton_trace: Vec<NewtonTrace>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct PqLimitResult {
    #[serde(skip)]
    pub h_bar: Option<ScalarField>,
    pub c_star: f64,
    pub steps: Vec<EpsStep>,
    /// `|C*_{eps_k} - C*_{eps_(k-1)}|` along the schedule.
    pub successive_diffs: Vec<f64>,
    pub monotone: bool,
    /// Final solve of the limit equation itself (`eps = 0`), warm-started
    /// from the last schedule entry.
    pub polish: Option<EpsStep>,
    /// `sup |det b(h_bar) - C* f h_bar^(p-1) W^((3-p)/2)|`.
    pub residual_sup: f64,
    pub converged: bool,
    pub message: String,
}

impl PqLimitResult {
    pub fn h_bar(&self) -> &ScalarField {
        self.h_bar.as_ref().expect("normalized solution")
    }
}

fn scaled_operator<'a>(
    spec: &ProblemSpec,
    geom: &'a CapGeometry,
    eps: f64,
    s: f64,
) -> Operator<'a> {
    let pe = spec.p + eps;
    let (f, _) = homotopy_parts(geom, &spec.f, pe, spec.p, HomotopyPath::FixedExponent, s);
    Operator::new(
        geom,
        Rhs {
            f,
            h_pow: pe - 1.0,
            w_pow: 0.5 * (3.0 - spec.p),
        },
        spec.even,
        true,
    )
}

fn min_h(geom: &CapGeometry, st: &State) -> f64 {
    st.values(geom.n_psi)
        .iter()
        .enumerate()
        .map(|(k, u)| u * (1.0 - geom.cos_theta * geom.cos_phi[k / geom.n_psi]))
        .fold(f64::INFINITY, f64::min)
}

/// Solves the `eps`-approximations along `eps_schedule`, then the limit
/// equation, and returns `(h_bar, C*)` with the `C*_eps` history.
pub fn pq_limit_solve(
    spec: &ProblemSpec,
    geom: &CapGeometry,
    cfg: &SolverConfig,
    eps_schedule: &[f64],
) -> Result<PqLimitResult> {
    cfg.validate()?;
    if spec.branch()? != Branch::Critical {
        return Err(CapError::NotApplicable(format!(
            "limit scheme needs p = q; got p = {}, q = {}",
            spec.p, spec.q
        )));
    }
    spec.validate(geom)?;
    if !spec.even {
        return Err(CapError::Applicability("the p = q scheme assumes even f".into()));
    }
    if eps_schedule.is_empty()
        || eps_schedule.iter().any(|e| !(*e > 0.0))
        || eps_schedule.windows(2).any(|w| !(w[1] < w[0]))
    {
        return Err(CapError::Config(
            "eps schedule must be positive and strictly decreasing".into(),
        ));
    }

    let mut steps: Vec<EpsStep> = Vec::new();
    let eps0 = eps_schedule[0];
    let start = State::from_values(geom, &vec![1.0; geom.n_cells()]);
    let run = follow_path(|s| scaled_operator(spec, geom, eps0, s), start, cfg)?;
    let mut st = run.state;
    let m = min_h(geom, &st);
    steps.push(EpsStep {
        eps: eps0,
        c_star: st.log_c.exp() * m.powf(eps0),
        min_h_hat: m,
        converged: run.ok,
        newton_trace: run.traces,
    });
    let mut message = String::new();
    if !run.ok {
        message = format!("eps = {eps0}: {}", run.message);
    }

    for &eps in &eps_schedule[1..] {
        if !message.is_empty() {
            break;
        }
        let prev = steps.last().unwrap();
        let mut guess = st.clone();
        guess.log_c = prev.c_star.ln() - eps * prev.min_h_hat.ln();
        let (st2, _, tr) = scaled_operator(spec, geom, eps, 1.0).solve(guess, cfg, 1.0)?;
        let m = min_h(geom, &st2);
        let ok = tr.converged;
        if !ok {
            message = format!("eps = {eps}: {}", tr.message);
        }
        steps.push(EpsStep {
            eps,
            c_star: st2.log_c.exp() * m.powf(eps),
            min_h_hat: m,
            converged: ok,
            newton_trace: vec![tr],
        });
        if ok {
            st = st2;
        }
    }

    let successive_diffs: Vec<f64> = steps
        .windows(2)
        .map(|w| (w[1].c_star - w[0].c_star).abs())
        .collect();
    let signs: Vec<f64> = steps.windows(2).map(|w| w[1].c_star - w[0].c_star).collect();
    let monotone = signs.iter().all(|d| *d >= -MONOTONE_SLACK)
        || signs.iter().all(|d| *d <= MONOTONE_SLACK);

    let mut polish = None;
    if message.is_empty() {
        let last = steps.last().unwrap();
        let mut guess = st.clone();
        guess.log_c = last.c_star.ln();
        let (st0, _, tr) = scaled_operator(spec, geom, 0.0, 1.0).solve(guess, cfg, 1.0)?;
        let ok = tr.converged;
        if ok {
            st = st0;
        } else {
            message = format!("limit equation: {}", tr.message);
        }
        polish = Some(EpsStep {
            eps: 0.0,
            c_star: st.log_c.exp(),
            min_h_hat: min_h(geom, &st),
            converged: ok,
            newton_trace: vec![tr],
        });
    }

    // rescale the last good state to min h = 1 and evaluate the limit equation
    let m = min_h(geom, &st);
    let c_star = match &polish {
        Some(p) if p.converged => p.c_star,
        _ => steps
            .iter()
            .rev()
            .find(|s| s.converged)
            .map_or(f64::NAN, |s| s.c_star),
    };
    let mut bar = st.clone();
    for v in bar.mean.iter_mut() {
        *v /= m;
    }
    for v in bar.dev.iter_mut() {
        *v /= m;
    }
    bar.log_c = c_star.ln();
    let ev = scaled_operator(spec, geom, 0.0, 1.0).eval(&bar);
    let h_bar = ScalarField {
        shape: geom.shape(),
        values: bar
            .values(geom.n_psi)
            .iter()
            .enumerate()
            .map(|(k, u)| u * (1.0 - geom.cos_theta * geom.cos_phi[k / geom.n_psi]))
            .collect(),
    };
    let converged = message.is_empty() && monotone;
    if message.is_empty() && !monotone {
        message = "C*_eps sequence is not monotone".into();
    }
    if message.is_empty() {
        message = "converged".into();
    }
    Ok(PqLimitResult {
        h_bar: Some(h_bar),
        c_star,
        steps,
        successive_diffs,
        monotone,
        polish,
        residual_sup: ev.residual_sup,
        converged,
        message,
    })
}
