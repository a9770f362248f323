//! Damped Newton iteration for the Neumann form of the equation.
//!
//! With `h = u ell`, the tensor `b = hess h + h I` becomes
//! `ell hess u + grad u (x) grad ell + grad ell (x) grad u + u I`, and the
//! Robin condition on `h` becomes `d_phi u = 0`. Newton is applied to the
//! logarithmic residual `log det b - log rhs`, which keeps iterates away from
//! the trivial solution `h = 0` that attracts the plain residual for `p > q`.

use faer::prelude::*;
use faer::sparse::{SparseColMat, Triplet};
use faer::Mat;
use serde::{Deserialize, Serialize};

use crate::cap::{eig2, symmetrize_in_place};
use crate::error::{CapError, Result};
use crate::grid::CapGeometry;
use crate::stencil::{Closure, Jet, JetStencil};

use super::problem::SolverConfig;

/// Below this ratio `det b / rhs` the logarithm is continued linearly, so
/// cells where `b` is degenerate still contribute a finite residual.
const LOG_KNEE: f64 = 1e-2;

/// Sufficient-decrease constant of the Armijo line search.
const ARMIJO: f64 = 1e-4;

/// Right-hand side `c f h^h_pow W^w_pow` with `W = h^2 + |grad h|^2`.
#[derive(Clone, Debug)]
pub(crate) struct Rhs {
    pub f: Vec<f64>,
    pub h_pow: f64,
    pub w_pow: f64,
}

/// The discrete operator `u -> (b(u ell), rhs(u ell))` on a fixed grid.
pub(crate) struct Operator<'a> {
    pub geom: &'a CapGeometry,
    stencil: &'a JetStencil,
    ell: Vec<f64>,
    ell_phi: Vec<f64>,
    pub rhs: Rhs,
    pub even: bool,
    /// Adds `log c` as an unknown together with the normalization
    /// `mean of u over the innermost ring = 1`.
    pub scaled: bool,
}

/// Solver state: ring means and deviations from them, plus `log c`.
#[derive(Clone, Debug)]
pub(crate) struct State {
    pub mean: Vec<f64>,
    pub dev: Vec<f64>,
    pub log_c: f64,
}

impl State {
    pub fn from_values(geom: &CapGeometry, u: &[f64]) -> Self {
        let np = geom.n_psi;
        let mut mean = vec![0.0; geom.n_phi];
        let mut dev = vec![0.0; u.len()];
        for i in 0..geom.n_phi {
            let row = &u[i * np..(i + 1) * np];
            let m = row.iter().sum::<f64>() / np as f64;
            mean[i] = m;
            for j in 0..np {
                dev[i * np + j] = row[j] - m;
            }
        }
        State {
            mean,
            dev,
            log_c: 0.0,
        }
    }

    pub fn values(&self, n_psi: usize) -> Vec<f64> {
        self.dev
            .iter()
            .enumerate()
            .map(|(k, d)| self.mean[k / n_psi] + d)
            .collect()
    }

    fn step(&self, n_psi: usize, delta: &[f64], alpha: f64) -> State {
        let n_phi = self.mean.len();
        let mut mean = self.mean.clone();
        let mut dev = self.dev.clone();
        for i in 0..n_phi {
            let row = &delta[i * n_psi..(i + 1) * n_psi];
            let m = row.iter().sum::<f64>() / n_psi as f64;
            mean[i] += alpha * m;
            for j in 0..n_psi {
                dev[i * n_psi + j] += alpha * (row[j] - m);
            }
        }
        let log_c = if delta.len() > n_phi * n_psi {
            self.log_c + alpha * delta[n_phi * n_psi]
        } else {
            self.log_c
        };
        State { mean, dev, log_c }
    }
}

/// Per-cell quantities of one evaluation.
#[derive(Clone, Copy, Debug, Default)]
pub(crate) struct CellEval {
    pub jet: Jet,
    pub b: [f64; 3],
    pub det: f64,
    pub h: f64,
    pub gh: [f64; 2],
    pub w: f64,
    /// `c f h^h_pow W^w_pow`.
    pub rhs: f64,
    pub lambda_min: f64,
}

#[derive(Clone, Debug)]
pub(crate) struct Eval {
    pub cells: Vec<CellEval>,
    pub g: Vec<f64>,
    pub residual_sup: f64,
    pub norm_defect: f64,
    pub lambda_min: f64,
    pub lambda_max: f64,
    pub merit: f64,
}

/// Iteration history of one Newton solve.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct NewtonTrace {
    pub s: f64,
    /// `sup |det b - rhs|` at every iterate, starting with the initial guess.
    pub residuals: Vec<f64>,
    /// Damping factor accepted at each step.
    pub steps: Vec<f64>,
    /// Step halvings forced by the convexity or positivity guard.
    pub guard_halvings: usize,
    /// Step halvings forced by insufficient decrease.
    pub armijo_halvings: usize,
    pub converged: bool,
    pub message: String,
}

impl NewtonTrace {
    pub fn iterations(&self) -> usize {
        self.steps.len()
    }
}

impl<'a> Operator<'a> {
    pub fn new(geom: &'a CapGeometry, rhs: Rhs, even: bool, scaled: bool) -> Self {
        let ell = (0..geom.n_phi)
            .map(|i| 1.0 - geom.cos_theta * geom.cos_phi[i])
            .collect();
        let ell_phi = (0..geom.n_phi)
            .map(|i| geom.cos_theta * geom.sin_phi[i])
            .collect();
        Operator {
            geom,
            stencil: geom.stencil(Closure::Neumann),
            ell,
            ell_phi,
            rhs,
            even,
            scaled,
        }
    }

    fn n(&self) -> usize {
        self.geom.n_cells()
    }

    fn cell(&self, k: usize, jet: Jet, c: f64) -> CellEval {
        let g = self.geom;
        let i = k / g.n_psi;
        let (s, co) = (g.sin_phi[i], g.cos_phi[i]);
        let (l, lp) = (self.ell[i], self.ell_phi[i]);
        let u = jet.v;
        let fr = jet.frame(s, co);
        let b11 = l * fr.h11 + 2.0 * fr.g1 * lp + u;
        let b12 = l * fr.h12 + fr.g2 * lp;
        let b22 = l * fr.h22 + u;
        let det = b11 * b22 - b12 * b12;
        let h = u * l;
        let gh = [l * fr.g1 + u * lp, l * fr.g2];
        let w = h * h + gh[0] * gh[0] + gh[1] * gh[1];
        let rhs = c * self.rhs.f[k] * h.powf(self.rhs.h_pow) * w.powf(self.rhs.w_pow);
        CellEval {
            jet,
            b: [b11, b12, b22],
            det,
            h,
            gh,
            w,
            rhs,
            lambda_min: eig2(b11, b12, b22).0,
        }
    }

    /// Only the innermost ring enters the normalization, which keeps the
    /// bordered Newton matrix sparse.
    fn norm_weight(&self) -> f64 {
        1.0 / self.geom.n_psi as f64
    }

    pub fn eval(&self, st: &State) -> Eval {
        let g = self.geom;
        let full = st.values(g.n_psi);
        let c = st.log_c.exp();
        let mut cells = Vec::with_capacity(self.n());
        let mut gv = Vec::with_capacity(self.n() + 1);
        let mut residual_sup: f64 = 0.0;
        let mut lmin = f64::INFINITY;
        let mut lmax = f64::NEG_INFINITY;
        for k in 0..self.n() {
            let ce = self.cell(k, self.stencil.jet(k, &full, &st.dev), c);
            let x = ce.det / ce.rhs;
            gv.push(if x >= LOG_KNEE {
                x.ln()
            } else {
                LOG_KNEE.ln() + (x - LOG_KNEE) / LOG_KNEE
            });
            residual_sup = residual_sup.max((ce.det - ce.rhs).abs());
            lmin = lmin.min(ce.lambda_min);
            lmax = lmax.max(eig2(ce.b[0], ce.b[1], ce.b[2]).1);
            cells.push(ce);
        }
        let mut norm_defect = 0.0;
        if self.scaled {
            let mean: f64 = full[..g.n_psi].iter().sum::<f64>() * self.norm_weight();
            norm_defect = mean - 1.0;
            gv.push(norm_defect);
        }
        let merit = gv.iter().map(|x| x * x).sum::<f64>();
        Eval {
            cells,
            g: gv,
            residual_sup,
            norm_defect,
            lambda_min: lmin,
            lambda_max: lmax,
            merit,
        }
    }

    /// Derivatives of `G` in the six jet components of `u` at one cell,
    /// and in `log c`.
    fn row_derivatives(&self, k: usize, ce: &CellEval) -> ([f64; 6], f64) {
        let g = self.geom;
        let i = k / g.n_psi;
        let (s, co) = (g.sin_phi[i], g.cos_phi[i]);
        let (l, lp) = (self.ell[i], self.ell_phi[i]);
        let u = ce.jet.v;
        let db11 = [1.0, 2.0 * lp, 0.0, l, 0.0, 0.0];
        let db12 = [0.0, 0.0, -l * co / (s * s) + lp / s, 0.0, l / s, 0.0];
        let db22 = [1.0, l * co / s, 0.0, 0.0, 0.0, l / (s * s)];
        let dw = [
            2.0 * ce.h * l + 2.0 * ce.gh[0] * lp,
            2.0 * ce.gh[0] * l,
            2.0 * ce.gh[1] * l / s,
            0.0,
            0.0,
            0.0,
        ];
        let [b11, b12, b22] = ce.b;
        let x = ce.det / ce.rhs;
        let mut out = [0.0; 6];
        for m in 0..6 {
            let ddet = b22 * db11[m] + b11 * db22[m] - 2.0 * b12 * db12[m];
            let mut dlog_rhs = self.rhs.w_pow * dw[m] / ce.w;
            if m == 0 {
                dlog_rhs += self.rhs.h_pow / u;
            }
            out[m] = if x >= LOG_KNEE {
                ddet / ce.det - dlog_rhs
            } else {
                (ddet - ce.det * dlog_rhs) / (LOG_KNEE * ce.rhs)
            };
        }
        let dc = if x >= LOG_KNEE { -1.0 } else { -x / LOG_KNEE };
        (out, dc)
    }

    fn newton_direction(&self, ev: &Eval) -> Result<Vec<f64>> {
        let n = self.n();
        let dim = if self.scaled { n + 1 } else { n };
        let mut trip: Vec<Triplet<usize, usize, f64>> = Vec::with_capacity(n * 14 + 2 * n);
        for k in 0..n {
            let (d, dc) = self.row_derivatives(k, &ev.cells[k]);
            for (col, w) in self.stencil.row(k) {
                let v: f64 = (0..6).map(|m| d[m] * w[m]).sum();
                if v != 0.0 {
                    trip.push(Triplet::new(k, col, v));
                }
            }
            if self.scaled {
                trip.push(Triplet::new(k, n, dc));
            }
        }
        if self.scaled {
            for k in 0..self.geom.n_psi {
                trip.push(Triplet::new(n, k, self.norm_weight()));
            }
        }
        let rhs: Vec<f64> = ev.g.iter().map(|x| -x).collect();
        sparse_solve(dim, &trip, &rhs)
    }

    /// Damped Newton from `st`; returns the final state and its trace.
    pub fn solve(&self, mut st: State, cfg: &SolverConfig, s: f64) -> Result<(State, Eval, NewtonTrace)> {
        let np = self.geom.n_psi;
        if self.even {
            symmetrize_in_place(self.geom, &mut st.dev);
        }
        let mut trace = NewtonTrace {
            s,
            ..Default::default()
        };
        let mut ev = self.eval(&st);
        for _ in 0..=cfg.max_newton {
            trace.residuals.push(ev.residual_sup);
            if ev.residual_sup <= cfg.newton_tol
                && ev.norm_defect.abs() <= cfg.newton_tol
                && ev.lambda_min >= cfg.convexity_floor
            {
                trace.converged = true;
                trace.message = "converged".into();
                return Ok((st, ev, trace));
            }
            if trace.steps.len() == cfg.max_newton {
                break;
            }
            let delta = self.newton_direction(&ev)?;
            let floor = cfg.convexity_floor.min(ev.lambda_min);
            let mut alpha = 1.0;
            let accepted = loop {
                if alpha < cfg.min_step {
                    break None;
                }
                let mut trial = st.step(np, &delta, alpha);
                if self.even {
                    symmetrize_in_place(self.geom, &mut trial.dev);
                }
                let positive = (0..trial.dev.len()).all(|k| trial.mean[k / np] + trial.dev[k] > 0.0);
                if !positive {
                    trace.guard_halvings += 1;
                    alpha *= 0.5;
                    continue;
                }
                let tev = self.eval(&trial);
                if !(tev.lambda_min >= floor) {
                    trace.guard_halvings += 1;
                    alpha *= 0.5;
                    continue;
                }
                if !(tev.merit <= (1.0 - ARMIJO * alpha) * ev.merit) {
                    trace.armijo_halvings += 1;
                    alpha *= 0.5;
                    continue;
                }
                break Some((trial, tev));
            };
            match accepted {
                Some((trial, tev)) => {
                    trace.steps.push(alpha);
                    st = trial;
                    ev = tev;
                }
                None => {
                    trace.message = format!("damping floor reached at residual {:e}", ev.residual_sup);
                    return Ok((st, ev, trace));
                }
            }
        }
        trace.message = format!(
            "no convergence in {} iterations (residual {:e}, lambda_min {:e})",
            cfg.max_newton, ev.residual_sup, ev.lambda_min
        );
        Ok((st, ev, trace))
    }
}

/// Sparse LU solve with one step of iterative refinement.
pub(crate) fn sparse_solve(
    n: usize,
    trip: &[Triplet<usize, usize, f64>],
    rhs: &[f64],
) -> Result<Vec<f64>> {
    let a = SparseColMat::<usize, f64>::try_new_from_triplets(n, n, trip)
        .map_err(|e| CapError::LinearSolve(format!("{e:?}")))?;
    let lu = a
        .sp_lu()
        .map_err(|e| CapError::LinearSolve(format!("{e:?}")))?;
    let b = Mat::<f64>::from_fn(n, 1, |i, _| rhs[i]);
    let mut x: Vec<f64> = {
        let sol = lu.solve(&b);
        (0..n).map(|i| sol[(i, 0)]).collect()
    };
    let mut r = rhs.to_vec();
    for t in trip {
        r[t.row] -= t.val * x[t.col];
    }
    let corr = lu.solve(&Mat::<f64>::from_fn(n, 1, |i, _| r[i]));
    for (i, xi) in x.iter_mut().enumerate() {
        *xi += corr[(i, 0)];
    }
    if x.iter().any(|v| !v.is_finite()) {
        return Err(CapError::LinearSolve("singular Newton system".into()));
    }
    Ok(x)
}
