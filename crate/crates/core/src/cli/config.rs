//! Problem files and their resolution against the command line.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Deserializer, Serialize};

use crate::cap::{even_defect, symmetrize_even};
use crate::error::{CapError, Result};
use crate::forcing::{read_field, FSpec};
use crate::grid::{build_grid, CapGeometry, ScalarField};
use crate::solver::{ProblemSpec, SolverConfig, DEFAULT_EPS_SCHEDULE, EVEN_TOL};
use std::sync::Arc;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridConfig {
    #[serde(rename = "Nphi")]
    pub n_phi: usize,
    #[serde(rename = "Npsi")]
    pub n_psi: usize,
}

impl Default for GridConfig {
    fn default() -> Self {
        GridConfig {
            n_phi: 32,
            n_psi: 64,
        }
    }
}

impl std::str::FromStr for GridConfig {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        let (a, b) = s
            .split_once(['x', 'X'])
            .ok_or_else(|| format!("expected NxM, got `{s}`"))?;
        let parse = |t: &str| {
            t.trim()
                .parse::<usize>()
                .map_err(|e| format!("bad grid size `{t}`: {e}"))
        };
        Ok(GridConfig {
            n_phi: parse(a)?,
            n_psi: parse(b)?,
        })
    }
}

/// Parameter axes of a sweep; the rows are their cartesian product.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepAxes {
    pub p: Vec<f64>,
    pub q: Vec<f64>,
    #[serde(deserialize_with = "angles")]
    pub theta: Vec<f64>,
}

/// Contents of a problem file, with paths resolved and defaults filled in.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    /// Contact angle in radians, or a string such as `"pi/3"`.
    #[serde(deserialize_with = "angle")]
    pub theta: f64,
    pub p: f64,
    pub q: f64,
    pub f: FSpec,
    /// Declared evenness of `f`; inferred when absent.
    #[serde(default)]
    pub even: Option<bool>,
    #[serde(default)]
    pub unsupported_regime: bool,
    #[serde(default)]
    pub grid: GridConfig,
    #[serde(default)]
    pub solver: SolverConfig,
    #[serde(default = "default_eps")]
    pub eps_schedule: Vec<f64>,
    /// Support function to analyze instead of solving.
    #[serde(default)]
    pub h: Option<PathBuf>,
    #[serde(default = "default_gamma")]
    pub gamma: f64,
    /// Gradient-quotient constant `N`; the observed value when absent.
    #[serde(default)]
    pub n: Option<f64>,
    /// Constant `C''` of the non-collapsing bound; the John factor when absent.
    #[serde(default)]
    pub c_dd: Option<f64>,
    #[serde(default)]
    pub sweep: Option<SweepAxes>,
    #[serde(default)]
    pub seed: u64,
}

fn default_eps() -> Vec<f64> {
    DEFAULT_EPS_SCHEDULE.to_vec()
}

fn default_gamma() -> f64 {
    1.0
}

/// Parses `1.047`, `"pi/3"`, `"2pi/5"`, `"pi"` and similar.
pub fn parse_angle(s: &str) -> std::result::Result<f64, String> {
    let t: String = s.chars().filter(|c| !c.is_whitespace()).collect();
    let (num, den) = match t.split_once('/') {
        Some((n, d)) => (
            n.to_string(),
            d.parse::<f64>().map_err(|e| format!("bad angle `{s}`: {e}"))?,
        ),
        None => (t.clone(), 1.0),
    };
    let value = match num.strip_suffix("pi") {
        Some(k) => {
            let k = k.trim_end_matches('*');
            let k = if k.is_empty() {
                1.0
            } else {
                k.parse::<f64>().map_err(|e| format!("bad angle `{s}`: {e}"))?
            };
            k * std::f64::consts::PI
        }
        None => num.parse::<f64>().map_err(|e| format!("bad angle `{s}`: {e}"))?,
    };
    Ok(value / den)
}

#[derive(Deserialize)]
#[serde(untagged)]
enum AngleRepr {
    Number(f64),
    Text(String),
}

impl AngleRepr {
    fn value<E: serde::de::Error>(self) -> std::result::Result<f64, E> {
        match self {
            AngleRepr::Number(v) => Ok(v),
            AngleRepr::Text(s) => parse_angle(&s).map_err(E::custom),
        }
    }
}

fn angle<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<f64, D::Error> {
    AngleRepr::deserialize(d)?.value()
}

fn angles<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<Vec<f64>, D::Error> {
    Vec::<AngleRepr>::deserialize(d)?
        .into_iter()
        .map(AngleRepr::value)
        .collect()
}

fn resolve(base: &Path, p: &mut PathBuf) -> Result<()> {
    if p.is_relative() {
        *p = base.join(&*p);
    }
    if !p.is_file() {
        return Err(CapError::Config(format!("{} does not exist", p.display())));
    }
    Ok(())
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| CapError::Config(format!("problem file: {e}")))
    }

    /// Reads a problem file and resolves the paths it mentions relative to it.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CapError::Config(format!("{}: {e}", path.display())))?;
        let mut cfg = Self::from_json(&text)?;
        let base = path.parent().unwrap_or(Path::new("."));
        if let Some(h) = cfg.h.as_mut() {
            resolve(base, h)?;
        }
        match &mut cfg.f {
            FSpec::Grid { path: Some(p), .. } | FSpec::Manufactured { path: Some(p), .. } => {
                resolve(base, p)?
            }
            _ => {}
        }
        cfg.solver.validate()?;
        Ok(cfg)
    }

    pub fn geometry(&self) -> Result<Arc<CapGeometry>> {
        build_grid(self.theta, self.grid.n_phi, self.grid.n_psi)
    }

    /// Samples `f` and settles its evenness; even data are symmetrized so
    /// that rounding in the sampling does not break the symmetry.
    pub fn problem(&self, geom: &CapGeometry) -> Result<ProblemSpec> {
        self.problem_at(geom, self.p, self.q)
    }

    pub fn problem_at(&self, geom: &CapGeometry, p: f64, q: f64) -> Result<ProblemSpec> {
        let f = self.f.sample(geom, p, q)?;
        let even = match self.even {
            Some(e) => e,
            None => match self.f.even_by_construction() {
                Some(e) => e,
                None => even_defect(geom, &f)? <= EVEN_TOL,
            },
        };
        let f = if even { symmetrize_even(geom, &f)? } else { f };
        let mut spec = ProblemSpec::new(p, q, geom.theta, f, even);
        spec.unsupported_regime = self.unsupported_regime;
        Ok(spec)
    }

    pub fn supplied_h(&self, geom: &CapGeometry) -> Result<Option<ScalarField>> {
        self.h.as_deref().map(|p| read_field(geom, p)).transpose()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn angles_parse() {
        assert_eq!(parse_angle("pi/3").unwrap(), PI / 3.0);
        assert_eq!(parse_angle("2pi/5").unwrap(), 2.0 * PI / 5.0);
        assert_eq!(parse_angle("2*pi/5").unwrap(), 2.0 * PI / 5.0);
        assert_eq!(parse_angle("0.5").unwrap(), 0.5);
        assert!(parse_angle("pi/x").is_err());
    }

    #[test]
    fn grid_flag() {
        let g: GridConfig = "16x32".parse().unwrap();
        assert_eq!((g.n_phi, g.n_psi), (16, 32));
        assert!("16".parse::<GridConfig>().is_err());
    }

    #[test]
    fn minimal_problem_file() {
        let c = RunConfig::from_json(
            r#"{"theta": "pi/4", "p": 2, "q": 3, "f": {"kind": "constant", "value": 1}}"#,
        )
        .unwrap();
        assert_eq!(c.theta, PI / 4.0);
        assert_eq!(c.grid, GridConfig::default());
        assert_eq!(c.eps_schedule, DEFAULT_EPS_SCHEDULE.to_vec());
        assert!(RunConfig::from_json(r#"{"theta": 1, "p": 2, "q": 3, "f": {"kind": "constant", "value": 1}, "typo": 1}"#).is_err());
    }
}
