//! Artifact writers and plot tables.
//!
//! JSON artifacts carry a `provenance` object and CSV artifacts a first
//! comment line `# capillary <version> <provenance json>`; both embed the
//! resolved configuration of the run that produced them.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{CapError, Result};
use crate::grid::{CapGeometry, ScalarField};
use crate::solver::NewtonTrace;

pub const TOOL: &str = "capillary";
pub const VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Provenance {
    pub tool: String,
    pub version: String,
    pub command: String,
    pub config: serde_json::Value,
}

impl Provenance {
    pub fn new(command: &str, config: &impl Serialize) -> Result<Self> {
        Ok(Provenance {
            tool: TOOL.into(),
            version: VERSION.into(),
            command: command.into(),
            config: serde_json::to_value(config)?,
        })
    }

    pub fn csv_header(&self) -> Result<String> {
        Ok(format!("# {TOOL} {VERSION} {}\n", serde_json::to_string(self)?))
    }
}

#[derive(Serialize)]
struct Artifact<'a, T: Serialize> {
    provenance: &'a Provenance,
    #[serde(flatten)]
    body: &'a T,
}

/// Output directory of a run.
pub struct Artifacts {
    pub dir: PathBuf,
    pub provenance: Provenance,
}

impl Artifacts {
    pub fn create(dir: &Path, provenance: Provenance) -> Result<Self> {
        std::fs::create_dir_all(dir)
            .map_err(|e| CapError::Config(format!("output directory {}: {e}", dir.display())))?;
        let probe = dir.join(".write-test");
        File::create(&probe)
            .and_then(|_| std::fs::remove_file(&probe))
            .map_err(|e| CapError::Config(format!("output directory {} not writable: {e}", dir.display())))?;
        Ok(Artifacts {
            dir: dir.to_path_buf(),
            provenance,
        })
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.dir.join(name)
    }

    pub fn json(&self, name: &str, body: &impl Serialize) -> Result<()> {
        let mut w = BufWriter::new(File::create(self.path(name))?);
        serde_json::to_writer_pretty(
            &mut w,
            &Artifact {
                provenance: &self.provenance,
                body,
            },
        )?;
        writeln!(w)?;
        w.flush()?;
        Ok(())
    }

    fn csv_file(&self, name: &str) -> Result<BufWriter<File>> {
        let mut w = BufWriter::new(File::create(self.path(name))?);
        w.write_all(self.provenance.csv_header()?.as_bytes())?;
        Ok(w)
    }

    /// Writes serializable rows under the provenance line.
    pub fn csv<R: Serialize>(&self, name: &str, rows: &[R]) -> Result<()> {
        let mut w = csv::Writer::from_writer(self.csv_file(name)?);
        for r in rows {
            w.serialize(r)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn field(&self, name: &str, geom: &CapGeometry, field: &ScalarField) -> Result<()> {
        let mut w = self.csv_file(name)?;
        field.write_csv(geom, &mut w)?;
        w.flush()?;
        Ok(())
    }

    pub fn trace(&self, name: &str, traces: &[NewtonTrace]) -> Result<()> {
        self.csv(name, &trace_rows(traces))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TraceRow {
    pub s: f64,
    pub iter: usize,
    pub residual: f64,
    /// Damping factor of the step that produced this iterate.
    pub step: Option<f64>,
    pub converged: bool,
}

pub fn trace_rows(traces: &[NewtonTrace]) -> Vec<TraceRow> {
    let mut rows = Vec::new();
    for t in traces {
        for (k, r) in t.residuals.iter().enumerate() {
            rows.push(TraceRow {
                s: t.s,
                iter: k,
                residual: *r,
                step: k.checked_sub(1).and_then(|i| t.steps.get(i).copied()),
                converged: t.converged,
            });
        }
    }
    rows
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FieldRow {
    pub i: usize,
    pub j: usize,
    pub phi: f64,
    pub psi: f64,
    pub value: f64,
}

/// Rows of a CSV artifact together with its provenance line.
fn read_artifact<R: for<'de> Deserialize<'de>>(path: &Path) -> Result<(String, Vec<R>)> {
    let file = File::open(path)
        .map_err(|e| CapError::Config(format!("missing artifact {}: {e}", path.display())))?;
    let mut reader = BufReader::new(file);
    let mut first = String::new();
    reader.read_line(&mut first)?;
    let header = if first.starts_with('#') {
        first
    } else {
        String::new()
    };
    let file = File::open(path)?;
    let mut r = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .from_reader(file);
    let rows = r
        .deserialize()
        .collect::<std::result::Result<Vec<R>, _>>()
        .map_err(|e| CapError::Config(format!("{}: {e}", path.display())))?;
    Ok((header, rows))
}

fn write_plot<R: Serialize>(path: &Path, header: &str, rows: &[R]) -> Result<()> {
    let mut f = BufWriter::new(File::create(path)?);
    f.write_all(header.as_bytes())?;
    let mut w = csv::Writer::from_writer(f);
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Serialize)]
struct ProfileRow {
    phi: f64,
    h: f64,
}

#[derive(Serialize)]
struct SliceRow {
    psi: f64,
    h: f64,
}

#[derive(Serialize)]
struct ConvergenceRow {
    s: f64,
    iter: usize,
    residual: f64,
}

#[derive(Serialize)]
struct RatioRow {
    phi: f64,
    psi: f64,
    ratio: f64,
}

/// Which plot tables to derive from a result directory.
#[derive(Clone, Copy, Debug, PartialEq, Eq, clap::ValueEnum)]
pub enum PlotKind {
    /// `h(phi, psi = 0)` and `h(theta, psi)` from `solution.csv`.
    Profile,
    /// `(s, iter, residual)` from `newton_trace.csv`.
    Trace,
    /// `(phi, psi, h / w)` from `sandwich_ratio.csv`.
    Sandwich,
}

/// Writes long-format plot tables next to the artifacts in `dir` and returns
/// the files written.
pub fn emit_plotdata(dir: &Path, kinds: &[PlotKind]) -> Result<Vec<PathBuf>> {
    let mut written = Vec::new();
    for kind in kinds {
        match kind {
            PlotKind::Profile => {
                let (header, rows): (_, Vec<FieldRow>) = read_artifact(&dir.join("solution.csv"))?;
                let i_last = rows.iter().map(|r| r.i).max().ok_or_else(|| {
                    CapError::Config("solution.csv has no rows".into())
                })?;
                let profile: Vec<ProfileRow> = rows
                    .iter()
                    .filter(|r| r.j == 0)
                    .map(|r| ProfileRow { phi: r.phi, h: r.value })
                    .collect();
                let slice: Vec<SliceRow> = rows
                    .iter()
                    .filter(|r| r.i == i_last)
                    .map(|r| SliceRow { psi: r.psi, h: r.value })
                    .collect();
                let (a, b) = (dir.join("profile_phi.csv"), dir.join("slice_psi.csv"));
                write_plot(&a, &header, &profile)?;
                write_plot(&b, &header, &slice)?;
                written.extend([a, b]);
            }
            PlotKind::Trace => {
                let (header, rows): (_, Vec<TraceRow>) =
                    read_artifact(&dir.join("newton_trace.csv"))?;
                let out: Vec<ConvergenceRow> = rows
                    .iter()
                    .map(|r| ConvergenceRow {
                        s: r.s,
                        iter: r.iter,
                        residual: r.residual,
                    })
                    .collect();
                let a = dir.join("convergence.csv");
                write_plot(&a, &header, &out)?;
                written.push(a);
            }
            PlotKind::Sandwich => {
                let (header, rows): (_, Vec<FieldRow>) =
                    read_artifact(&dir.join("sandwich_ratio.csv"))?;
                let out: Vec<RatioRow> = rows
                    .iter()
                    .map(|r| RatioRow {
                        phi: r.phi,
                        psi: r.psi,
                        ratio: r.value,
                    })
                    .collect();
                let a = dir.join("sandwich_field.csv");
                write_plot(&a, &header, &out)?;
                written.push(a);
            }
        }
    }
    Ok(written)
}
