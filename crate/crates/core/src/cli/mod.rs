//! The `capillary` command-line front end.
//!
//! Exit codes: 0 success, 1 runtime failure, 2 nonconvergence, 3 invalid
//! configuration or missing input, 4 a verification check failed.

pub mod config;
pub mod report;
pub mod selftest;

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Parser, Subcommand};
use rayon::prelude::*;
use serde::Serialize;

use crate::cap::{curvature_tensor, ell_field, embed_body, BodyExtents};
use crate::error::{CapError, Result};
use crate::grid::{CapGeometry, ScalarField};
use crate::john::{
    height_ratio_check, john_construct, monte_carlo_containment, verify_sandwich, HeightRatio,
    SandwichReport, ContainmentReport,
};
use crate::monitors::{
    c0_bound_check, gradient_quotient, noncollapse_check, phi_monitor, q_monitor,
};
use crate::solver::{continuation_solve, pq_limit_solve, Branch, NewtonTrace};

pub use config::{GridConfig, RunConfig, SweepAxes};
pub use report::{emit_plotdata, Artifacts, PlotKind, Provenance};

pub const EXIT_OK: i32 = 0;
pub const EXIT_RUNTIME: i32 = 1;
pub const EXIT_NONCONVERGED: i32 = 2;
pub const EXIT_CONFIG: i32 = 3;
pub const EXIT_CHECK_FAILED: i32 = 4;

/// Points of the body sampled for the containment estimate.
const CONTAINMENT_SAMPLES: usize = 10_000;

#[derive(Debug, Parser)]
#[command(name = "capillary", version, about = "Capillary L_p dual Minkowski solver and estimate monitors")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    /// Problem file (JSON).
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, global = true, default_value = "out")]
    pub out: PathBuf,
    /// Grid size `NphixNpsi`, overriding the problem file.
    #[arg(long, global = true)]
    pub grid: Option<GridConfig>,
    /// Seed of the randomized suites.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Worker threads for sweeps (all cores when absent).
    #[arg(long, global = true)]
    pub jobs: Option<usize>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Solve the configured problem.
    Solve,
    /// Check the John sandwich for a solved or supplied `h`.
    Sandwich,
    /// Run every estimate monitor on a solved or supplied `h`.
    Monitors,
    /// Solve over the `sweep` axes of the problem file.
    Sweep,
    /// Run the built-in identity suites.
    Selftest,
    /// Derive plot tables from the artifacts in the output directory.
    Plotdata {
        /// Tables to produce; all of them when omitted.
        #[arg(long, value_enum)]
        kind: Vec<PlotKind>,
    },
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Solve => "solve",
            Command::Sandwich => "sandwich",
            Command::Monitors => "monitors",
            Command::Sweep => "sweep",
            Command::Selftest => "selftest",
            Command::Plotdata { .. } => "plotdata",
        }
    }
}

pub fn exit_code(e: &CapError) -> i32 {
    match e {
        CapError::Config(_)
        | CapError::Domain(_)
        | CapError::Usage(_)
        | CapError::Json(_)
        | CapError::Wedge { .. }
        | CapError::NotCapillaryConvex { .. }
        | CapError::Applicability(_)
        | CapError::NotApplicable(_) => EXIT_CONFIG,
        CapError::Convexity(_) | CapError::LinearSolve(_) | CapError::Io(_) | CapError::Csv(_) => {
            EXIT_RUNTIME
        }
    }
}

/// Parses `args` and runs the command, printing a one-line status.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_CONFIG } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    match run(&cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

/// Settings of a selftest run, embedded in its artifacts.
#[derive(Clone, Debug, Serialize)]
struct SelftestConfig {
    grid: GridConfig,
    seed: u64,
}

fn load(cli: &Cli) -> Result<RunConfig> {
    let path = cli
        .config
        .as_ref()
        .ok_or_else(|| CapError::Config("--config <path> is required".into()))?;
    let mut cfg = RunConfig::load(path)?;
    if let Some(g) = cli.grid {
        cfg.grid = g;
    }
    if let Some(s) = cli.seed {
        cfg.seed = s;
    }
    Ok(cfg)
}

pub fn run(cli: &Cli) -> Result<i32> {
    // sequential factorizations keep results independent of thread scheduling
    faer::set_global_parallelism(faer::Par::Seq);
    let name = cli.command.name();
    match &cli.command {
        Command::Selftest => {
            let grid = cli.grid.unwrap_or_default();
            let seed = cli.seed.unwrap_or(0);
            let prov = Provenance::new(name, &SelftestConfig { grid, seed })?;
            let out = Artifacts::create(&cli.out, prov)?;
            let suites = selftest::run_all(grid.n_phi, grid.n_psi, seed)?;
            for s in &suites {
                println!("{} {}: {}", if s.pass { "PASS" } else { "FAIL" }, s.name, s.summary);
            }
            out.json("selftest.json", &serde_json::json!({ "suites": suites }))?;
            Ok(if suites.iter().all(|s| s.pass) {
                EXIT_OK
            } else {
                EXIT_CHECK_FAILED
            })
        }
        Command::Plotdata { kind } => {
            let kinds = if kind.is_empty() {
                vec![PlotKind::Profile, PlotKind::Trace, PlotKind::Sandwich]
            } else {
                kind.clone()
            };
            for path in emit_plotdata(&cli.out, &kinds)? {
                println!("wrote {}", path.display());
            }
            Ok(EXIT_OK)
        }
        _ => {
            let cfg = load(cli)?;
            let prov = Provenance::new(name, &cfg)?;
            let out = Artifacts::create(&cli.out, prov)?;
            match cli.command {
                Command::Solve => cmd_solve(&cfg, &out),
                Command::Sandwich => cmd_sandwich(&cfg, &out),
                Command::Monitors => cmd_monitors(&cfg, &out),
                Command::Sweep => cmd_sweep(&cfg, &out, cli.jobs),
                _ => unreachable!(),
            }
        }
    }
}

/// A solved (or supplied) support function and the solver record behind it.
struct Solution {
    h: ScalarField,
    converged: bool,
    message: String,
    traces: Vec<NewtonTrace>,
    record: serde_json::Value,
    residual_sup: f64,
}

fn solve(cfg: &RunConfig, geom: &CapGeometry, p: f64, q: f64) -> Result<Solution> {
    let spec = cfg.problem_at(geom, p, q)?;
    if spec.branch()? == Branch::Critical {
        let r = pq_limit_solve(&spec, geom, &cfg.solver, &cfg.eps_schedule)?;
        let traces = r
            .steps
            .iter()
            .chain(r.polish.iter())
            .flat_map(|s| s.newton_trace.iter().cloned())
            .collect();
        Ok(Solution {
            h: r.h_bar().clone(),
            converged: r.converged,
            message: r.message.clone(),
            traces,
            residual_sup: r.residual_sup,
            record: serde_json::json!({ "pq_limit": r }),
        })
    } else {
        let r = continuation_solve(&spec, geom, &cfg.solver)?;
        Ok(Solution {
            h: r.h().clone(),
            converged: r.converged,
            message: r.message.clone(),
            traces: r.newton_trace.clone(),
            residual_sup: r.residual_sup,
            record: serde_json::json!({ "solve": r }),
        })
    }
}

/// Uses the supplied `h` when the problem file names one, else solves.
fn obtain_h(cfg: &RunConfig, geom: &CapGeometry, out: &Artifacts) -> Result<Solution> {
    if let Some(h) = cfg.supplied_h(geom)? {
        return Ok(Solution {
            h,
            converged: true,
            message: "supplied".into(),
            traces: vec![],
            residual_sup: f64::NAN,
            record: serde_json::json!({ "supplied": cfg.h }),
        });
    }
    let sol = solve(cfg, geom, cfg.p, cfg.q)?;
    write_solution(geom, &sol, out)?;
    Ok(sol)
}

fn write_solution(geom: &CapGeometry, sol: &Solution, out: &Artifacts) -> Result<()> {
    out.json("solve.json", &sol.record)?;
    out.field("solution.csv", geom, &sol.h)?;
    out.trace("newton_trace.csv", &sol.traces)
}

fn status(converged: bool) -> &'static str {
    if converged {
        "converged"
    } else {
        "not converged"
    }
}

fn cmd_solve(cfg: &RunConfig, out: &Artifacts) -> Result<i32> {
    let geom = cfg.geometry()?;
    let sol = solve(cfg, &geom, cfg.p, cfg.q)?;
    write_solution(&geom, &sol, out)?;
    println!(
        "{}: sup residual {:.3e}, {} Newton iterations ({})",
        status(sol.converged),
        sol.residual_sup,
        sol.traces.iter().map(|t| t.iterations()).sum::<usize>(),
        sol.message
    );
    Ok(if sol.converged {
        EXIT_OK
    } else {
        EXIT_NONCONVERGED
    })
}

#[derive(Serialize)]
struct SandwichArtifact {
    extents: BodyExtents,
    height_ratio: HeightRatio,
    sandwich: SandwichReport,
    containment: ContainmentReport,
}

fn cmd_sandwich(cfg: &RunConfig, out: &Artifacts) -> Result<i32> {
    let geom = cfg.geometry()?;
    let sol = obtain_h(cfg, &geom, out)?;
    if !sol.converged {
        eprintln!("solver did not converge: {}", sol.message);
        return Ok(EXIT_NONCONVERGED);
    }
    let body = embed_body(&geom, &sol.h)?;
    let (cap, factor) = john_construct(&body.extents, geom.theta)?;
    let report = verify_sandwich(&geom, &sol.h, &cap, factor)?;
    let containment =
        monte_carlo_containment(&body, &cap, factor, CONTAINMENT_SAMPLES, cfg.seed, report.tol);
    if let Some(ratio) = &report.ratio {
        out.field("sandwich_ratio.csv", &geom, ratio)?;
    }
    let pass = report.pass;
    println!(
        "{} sandwich: h/w in [{:.4}, {:.4}], factor {:.4}, containment {:.4}",
        if pass { "PASS" } else { "FAIL" },
        report.min_ratio,
        report.max_ratio,
        factor,
        containment.rate()
    );
    out.json(
        "sandwich.json",
        &SandwichArtifact {
            extents: body.extents,
            height_ratio: height_ratio_check(&body.extents, geom.theta),
            sandwich: report,
            containment,
        },
    )?;
    Ok(if pass { EXIT_OK } else { EXIT_CHECK_FAILED })
}

/// A monitor's report or the reason it does not apply.
fn entry<T: Serialize>(r: Result<T>) -> Result<serde_json::Value> {
    Ok(match r {
        Ok(v) => serde_json::json!({ "report": v }),
        Err(e) => serde_json::json!({ "skipped": e.to_string() }),
    })
}

#[derive(Serialize)]
struct MonitorRow {
    monitor: &'static str,
    quantity: &'static str,
    value: f64,
}

fn cmd_monitors(cfg: &RunConfig, out: &Artifacts) -> Result<i32> {
    let geom = cfg.geometry()?;
    let sol = obtain_h(cfg, &geom, out)?;
    if !sol.converged {
        eprintln!("solver did not converge: {}", sol.message);
        return Ok(EXIT_NONCONVERGED);
    }
    let spec = cfg.problem(&geom)?;
    let h = &sol.h;
    let mut rows = Vec::new();
    let body = embed_body(&geom, h)?;
    let john = john_construct(&body.extents, geom.theta);
    let curv = curvature_tensor(&geom, h)?;
    let sigma1_max = curv.sigma1.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    rows.push(MonitorRow { monitor: "curvature", quantity: "lambda_min", value: curv.lambda_min });
    rows.push(MonitorRow { monitor: "curvature", quantity: "sigma1_max", value: sigma1_max });
    rows.push(MonitorRow {
        monitor: "embedding",
        quantity: "boundary_plane_defect",
        value: body.extents.boundary_plane_defect,
    });

    let gq = gradient_quotient(&geom, h, cfg.gamma);
    if let Ok(g) = &gq {
        rows.push(MonitorRow { monitor: "gradient_quotient", quantity: "n_observed", value: g.n_observed });
    }
    let nc = match (&gq, &john) {
        (Ok(g), Ok((_, factor))) => noncollapse_check(
            &geom,
            h,
            cfg.gamma,
            cfg.n.unwrap_or(g.n_observed),
            cfg.c_dd.unwrap_or(*factor),
        ),
        (Err(e), _) | (_, Err(e)) => Err(CapError::Applicability(e.to_string())),
    };
    if let Ok(n) = &nc {
        rows.push(MonitorRow { monitor: "noncollapse", quantity: "ratio", value: n.ratio });
        rows.push(MonitorRow { monitor: "noncollapse", quantity: "bound_case2", value: n.bound_case2 });
    }
    let u = h.zip_with(&ell_field(&geom), |a, b| a / b)?;
    let phi = phi_monitor(&geom, &u, cfg.gamma);
    if let Ok(p) = &phi {
        rows.push(MonitorRow { monitor: "phi", quantity: "max_identity_error", value: p.max_identity_error });
    }
    let qm = q_monitor(&geom, h, spec.q);
    if let Ok(q) = &qm {
        rows.push(MonitorRow { monitor: "q", quantity: "max_value", value: q.max_value });
    }
    let c0 = c0_bound_check(&geom, h, &spec);
    if let Ok(c) = &c0 {
        rows.push(MonitorRow { monitor: "c0", quantity: "max_u_term", value: c.max_u_term });
        rows.push(MonitorRow { monitor: "c0", quantity: "min_u_term", value: c.min_u_term });
    }
    let height = height_ratio_check(&body.extents, geom.theta);
    rows.push(MonitorRow { monitor: "height_ratio", quantity: "ratio", value: height.ratio });

    out.csv("monitors.csv", &rows)?;
    out.json(
        "monitors.json",
        &serde_json::json!({
            "extents": body.extents,
            "lambda_min": curv.lambda_min,
            "sigma1_max": sigma1_max,
            "john": entry(john.map(|(cap, factor)| serde_json::json!({ "cap": cap, "factor": factor })))?,
            "gradient_quotient": entry(gq)?,
            "noncollapse": entry(nc)?,
            "phi": entry(phi)?,
            "q": entry(qm)?,
            "c0": entry(c0)?,
            "height_ratio": height,
        }),
    )?;
    for r in &rows {
        println!("{:<18} {:<22} {:.6e}", r.monitor, r.quantity, r.value);
    }
    Ok(EXIT_OK)
}

#[derive(Clone, Debug, Serialize)]
pub struct SweepRow {
    pub p: f64,
    pub q: f64,
    pub theta: f64,
    pub converged: bool,
    pub residual_sup: f64,
    /// `max h / min h`.
    pub max_min_ratio: f64,
    pub lambda_min: f64,
    pub sigma1_max: f64,
    pub newton_iterations: usize,
    pub message: String,
}

fn sweep_entry(cfg: &RunConfig, p: f64, q: f64, theta: f64) -> SweepRow {
    let mut row = SweepRow {
        p,
        q,
        theta,
        converged: false,
        residual_sup: f64::NAN,
        max_min_ratio: f64::NAN,
        lambda_min: f64::NAN,
        sigma1_max: f64::NAN,
        newton_iterations: 0,
        message: String::new(),
    };
    let mut run = || -> Result<()> {
        let geom = crate::grid::build_grid(theta, cfg.grid.n_phi, cfg.grid.n_psi)?;
        let sol = solve(cfg, &geom, p, q)?;
        row.converged = sol.converged;
        row.residual_sup = sol.residual_sup;
        row.message = sol.message.clone();
        row.newton_iterations = sol.traces.iter().map(|t| t.iterations()).sum();
        row.max_min_ratio = sol.h.max() / sol.h.min();
        let curv = curvature_tensor(&geom, &sol.h)?;
        row.lambda_min = curv.lambda_min;
        row.sigma1_max = curv.sigma1.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        Ok(())
    };
    if let Err(e) = run() {
        row.converged = false;
        row.message = e.to_string();
    }
    row
}

fn cmd_sweep(cfg: &RunConfig, out: &Artifacts, jobs: Option<usize>) -> Result<i32> {
    let axes = cfg
        .sweep
        .as_ref()
        .ok_or_else(|| CapError::Config("problem file has no `sweep` axes".into()))?;
    let mut points = Vec::new();
    for &p in &axes.p {
        for &q in &axes.q {
            for &theta in &axes.theta {
                points.push((p, q, theta));
            }
        }
    }
    if points.is_empty() {
        return Err(CapError::Config("empty sweep".into()));
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.unwrap_or(0))
        .build()
        .map_err(|e| CapError::Config(format!("thread pool: {e}")))?;
    let rows: Vec<SweepRow> = pool.install(|| {
        points
            .par_iter()
            .map(|&(p, q, theta)| sweep_entry(cfg, p, q, theta))
            .collect()
    });
    out.csv("sweep.csv", &rows)?;
    let ok = rows.iter().filter(|r| r.converged).count();
    println!("{ok} of {} sweep entries converged", rows.len());
    Ok(if ok == rows.len() {
        EXIT_OK
    } else {
        EXIT_NONCONVERGED
    })
}
