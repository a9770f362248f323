use serde::{Deserialize, Serialize};

use crate::cap::{ell_field, even_defect, robin_residual};
use crate::error::{CapError, Result};
use crate::grid::{CapGeometry, ScalarField};

use super::newton::{Eval, NewtonTrace, Operator, Rhs, State};
use super::problem::{Branch, ProblemSpec, SolverConfig};

/// Homotopy from the exactly solvable problem at `s = 0` (solution `h = ell`)
/// to the target at `s = 1`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HomotopyPath {
    /// `f_s = (1-s) ell^(1-p) + s f`, `q_s = 3 + s (q - 3)`.
    DualExponent,
    /// `f_s = (1-s) ell^(1-p) (ell^2 + |grad ell|^2)^((q-3)/2) + s f` with
    /// `q` held fixed; used when `q_s` would pass through `p`.
    FixedExponent,
}

impl HomotopyPath {
    pub fn for_spec(spec: &ProblemSpec) -> Self {
        if spec.p > spec.q && spec.p <= 3.0 {
            HomotopyPath::FixedExponent
        } else {
            HomotopyPath::DualExponent
        }
    }
}

/// `(f_s, q_s)` sampled on the grid.
pub fn homotopy_rhs(
    spec: &ProblemSpec,
    geom: &CapGeometry,
    path: HomotopyPath,
    s: f64,
) -> (ScalarField, f64) {
    let (f, q) = homotopy_parts(geom, &spec.f, spec.p, spec.q, path, s);
    (
        ScalarField {
            shape: geom.shape(),
            values: f,
        },
        q,
    )
}

pub(crate) fn homotopy_parts(
    geom: &CapGeometry,
    f: &ScalarField,
    p: f64,
    q: f64,
    path: HomotopyPath,
    s: f64,
) -> (Vec<f64>, f64) {
    let q_s = match path {
        HomotopyPath::DualExponent => 3.0 + s * (q - 3.0),
        HomotopyPath::FixedExponent => q,
    };
    let mut out = Vec::with_capacity(geom.n_cells());
    for i in 0..geom.n_phi {
        let l = 1.0 - geom.cos_theta * geom.cos_phi[i];
        let lp = geom.cos_theta * geom.sin_phi[i];
        let base = match path {
            HomotopyPath::DualExponent => l.powf(1.0 - p),
            HomotopyPath::FixedExponent => {
                l.powf(1.0 - p) * (l * l + lp * lp).powf(0.5 * (q - 3.0))
            }
        };
        for j in 0..geom.n_psi {
            let k = geom.idx(i, j);
            out.push(if s == 1.0 {
                f.values[k]
            } else {
                (1.0 - s) * base + s * f.values[k]
            });
        }
    }
    (out, q_s)
}

/// Converged (or last) iterate of a solve together with its diagnostics.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SolveResult {
    #[serde(skip)]
    pub h: Option<ScalarField>,
    #[serde(skip)]
    pub u: Option<ScalarField>,
    pub residual_sup: f64,
    pub robin_defect_sup: f64,
    pub b_eigen_range: (f64, f64),
    pub even_defect: f64,
    pub newton_trace: Vec<NewtonTrace>,
    /// Homotopy parameters accepted along the way.
    pub s_accepted: Vec<f64>,
    pub s_reached: f64,
    pub path: HomotopyPath,
    pub converged: bool,
    pub message: String,
}

impl SolveResult {
    pub fn h(&self) -> &ScalarField {
        self.h.as_ref().expect("solution field")
    }

    pub fn u(&self) -> &ScalarField {
        self.u.as_ref().expect("solution field")
    }

    pub fn total_newton_iterations(&self) -> usize {
        self.newton_trace.iter().map(|t| t.iterations()).sum()
    }
}

fn operator_at<'a>(
    spec: &ProblemSpec,
    geom: &'a CapGeometry,
    path: HomotopyPath,
    s: f64,
) -> Operator<'a> {
    let (f, q_s) = homotopy_parts(geom, &spec.f, spec.p, spec.q, path, s);
    Operator::new(
        geom,
        Rhs {
            f,
            h_pow: spec.p - 1.0,
            w_pow: 0.5 * (3.0 - q_s),
        },
        spec.even,
        false,
    )
}

fn finish(
    geom: &CapGeometry,
    st: &State,
    ev: &Eval,
    traces: Vec<NewtonTrace>,
    s_accepted: Vec<f64>,
    path: HomotopyPath,
    converged: bool,
    message: String,
) -> Result<SolveResult> {
    let u = ScalarField {
        shape: geom.shape(),
        values: st.values(geom.n_psi),
    };
    let ell = ell_field(geom);
    let h = u.zip_with(&ell, |a, b| a * b)?;
    let robin_defect_sup = robin_residual(geom, &h)?
        .iter()
        .fold(0.0, |m: f64, v| m.max(v.abs()));
    Ok(SolveResult {
        residual_sup: ev.residual_sup,
        robin_defect_sup,
        b_eigen_range: (ev.lambda_min, ev.lambda_max),
        even_defect: even_defect(geom, &h)?,
        newton_trace: traces,
        s_reached: s_accepted.last().copied().unwrap_or(f64::NAN),
        s_accepted,
        path,
        converged,
        message,
        h: Some(h),
        u: Some(u),
    })
}

fn solvable(spec: &ProblemSpec, geom: &CapGeometry, cfg: &SolverConfig) -> Result<Branch> {
    cfg.validate()?;
    let branch = spec.validate(geom)?;
    if branch == Branch::Critical {
        return Err(CapError::NotApplicable(
            "p = q is scale invariant; use pq_limit_solve".into(),
        ));
    }
    Ok(branch)
}

/// Damped Newton at a fixed homotopy parameter `s`, starting from `u0`.
pub fn newton_solve(
    spec: &ProblemSpec,
    geom: &CapGeometry,
    s: f64,
    u0: &ScalarField,
    cfg: &SolverConfig,
) -> Result<SolveResult> {
    solvable(spec, geom, cfg)?;
    if !(0.0..=1.0).contains(&s) {
        return Err(CapError::Config(format!("homotopy parameter {s} outside [0, 1]")));
    }
    geom.check_shape(u0)?;
    if let Some(k) = u0.values.iter().position(|v| !(*v > 0.0)) {
        return Err(CapError::Domain(format!("initial u nonpositive at cell {k}")));
    }
    let path = HomotopyPath::for_spec(spec);
    let op = operator_at(spec, geom, path, s);
    let (st, ev, trace) = op.solve(State::from_values(geom, &u0.values), cfg, s)?;
    let converged = trace.converged;
    let message = trace.message.clone();
    let accepted = if converged { vec![s] } else { vec![] };
    finish(geom, &st, &ev, vec![trace], accepted, path, converged, message)
}

/// Warm-started Newton along the homotopy with adaptive steps in `s`.
pub fn continuation_solve(
    spec: &ProblemSpec,
    geom: &CapGeometry,
    cfg: &SolverConfig,
) -> Result<SolveResult> {
    solvable(spec, geom, cfg)?;
    let path = HomotopyPath::for_spec(spec);
    let start = State::from_values(geom, &vec![1.0; geom.n_cells()]);
    let run = follow_path(|s| operator_at(spec, geom, path, s), start, cfg)?;
    finish(geom, &run.state, &run.eval, run.traces, run.accepted, path, run.ok, run.message)
}

pub(crate) struct PathRun {
    pub state: State,
    pub eval: Eval,
    pub traces: Vec<NewtonTrace>,
    pub accepted: Vec<f64>,
    pub ok: bool,
    pub message: String,
}

/// Solves at `s = 0` from `start`, then advances to `s = 1`, halving the
/// step on failure and doubling it after two consecutive successes.
pub(crate) fn follow_path<'a>(
    make_op: impl Fn(f64) -> Operator<'a>,
    start: State,
    cfg: &SolverConfig,
) -> Result<PathRun> {
    let (mut st, mut ev, trace) = make_op(0.0).solve(start, cfg, 0.0)?;
    let mut traces = vec![trace];
    if !traces[0].converged {
        let message = format!("base problem at s = 0 failed: {}", traces[0].message);
        return Ok(PathRun { state: st, eval: ev, traces, accepted: vec![], ok: false, message });
    }
    let mut accepted = vec![0.0];
    let (mut s, mut ds, mut streak) = (0.0f64, cfg.ds_initial, 0);
    while s < 1.0 {
        let s_try = if s + ds >= 1.0 - 1e-12 { 1.0 } else { s + ds };
        let ok = match make_op(s_try).solve(st.clone(), cfg, s_try) {
            Ok((st2, ev2, tr)) => {
                let ok = tr.converged;
                traces.push(tr);
                if ok {
                    st = st2;
                    ev = ev2;
                }
                ok
            }
            Err(CapError::LinearSolve(msg)) => {
                traces.push(NewtonTrace {
                    s: s_try,
                    message: msg,
                    ..Default::default()
                });
                false
            }
            Err(e) => return Err(e),
        };
        if ok {
            s = s_try;
            accepted.push(s);
            streak += 1;
            if streak >= 2 {
                ds = (2.0 * ds).min(cfg.ds_max);
                streak = 0;
            }
        } else {
            ds *= 0.5;
            streak = 0;
            if ds < cfg.ds_min {
                let message = format!("continuation stalled after s = {s}");
                return Ok(PathRun { state: st, eval: ev, traces, accepted, ok: false, message });
            }
        }
    }
    Ok(PathRun { state: st, eval: ev, traces, accepted, ok: true, message: "converged".into() })
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct UniquenessReport {
    pub max_log_ratio: f64,
    pub pass: bool,
    /// Some start failed to converge, so nothing is concluded.
    pub inconclusive: bool,
    pub runs: Vec<SolveResult>,
}

/// Solution spread under different initial guesses `h0`, for `p > q`.
pub fn uniqueness_probe(
    spec: &ProblemSpec,
    geom: &CapGeometry,
    cfg: &SolverConfig,
    starts: &[ScalarField],
) -> Result<UniquenessReport> {
    if !(spec.p > spec.q) {
        return Err(CapError::Applicability(format!(
            "uniqueness holds for p > q; got p = {}, q = {}",
            spec.p, spec.q
        )));
    }
    if starts.len() < 2 {
        return Err(CapError::Config("need at least two starts".into()));
    }
    let ell = ell_field(geom);
    let mut runs = Vec::with_capacity(starts.len());
    for h0 in starts {
        let u0 = h0.zip_with(&ell, |a, b| a / b)?;
        runs.push(newton_solve(spec, geom, 1.0, &u0, cfg)?);
    }
    let inconclusive = runs.iter().any(|r| !r.converged);
    let mut max_log_ratio: f64 = 0.0;
    for a in 0..runs.len() {
        for b in a + 1..runs.len() {
            let (ha, hb) = (runs[a].h(), runs[b].h());
            for k in 0..ha.values.len() {
                max_log_ratio = max_log_ratio.max((ha.values[k] / hb.values[k]).ln().abs());
            }
        }
    }
    Ok(UniquenessReport {
        max_log_ratio,
        pass: !inconclusive && max_log_ratio <= 1e-8,
        inconclusive,
        runs,
    })
}
