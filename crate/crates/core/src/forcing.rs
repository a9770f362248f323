//! Descriptions of the data `f` and their sampling on a grid.

use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use crate::analytic::{robin_field, Mode, NeumannField, Rho, SmoothField};
use crate::error::{CapError, Result};
use crate::grid::{CapGeometry, ScalarField};
use crate::solver::{manufactured_f, manufactured_f_exact};

/// Azimuthal factor `1 + amplitude cos(mode psi) rho(phi)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Modulation {
    pub amplitude: f64,
    pub mode: u32,
}

impl Modulation {
    /// Pole order of the radial profile, chosen so the factor is smooth.
    fn pole_order(&self) -> i32 {
        let m = self.mode as i32;
        if m >= 2 {
            m
        } else {
            m + 2
        }
    }

    pub fn factor(&self, sin_theta: f64, phi: f64, psi: f64) -> f64 {
        let rho = Rho::new(self.pole_order(), sin_theta).eval(phi).0;
        1.0 + self.amplitude * (self.mode as f64 * psi).cos() * rho
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum FSpec {
    Constant {
        value: f64,
    },
    /// `c ell^a (ell^2 + |grad ell|^2)^b`, optionally modulated, with
    /// `a = alpha + alpha_p p` and `b = beta + beta_q q`.
    EllPower {
        #[serde(default = "one")]
        c: f64,
        #[serde(default)]
        alpha: f64,
        #[serde(default)]
        alpha_p: f64,
        #[serde(default)]
        beta: f64,
        #[serde(default)]
        beta_q: f64,
        #[serde(default)]
        modulation: Option<Modulation>,
    },
    /// Cell values, row-major, or a field file (`.json` or `.csv`).
    Grid {
        #[serde(default)]
        values: Option<Vec<f64>>,
        #[serde(default)]
        path: Option<PathBuf>,
    },
    /// The `f` that makes a supplied `h*` an exact discrete solution.
    Manufactured {
        #[serde(default)]
        path: Option<PathBuf>,
        /// Built-in `h* = ell (1 + amplitude cos(mode psi) rho(phi))` when
        /// no table is given.
        #[serde(default)]
        modulation: Option<Modulation>,
        #[serde(default)]
        exact: bool,
    },
}

fn one() -> f64 {
    1.0
}

/// Reads a field from JSON (`{theta, Nphi, Npsi, values}`) or CSV.
pub fn read_field(geom: &CapGeometry, path: &std::path::Path) -> Result<ScalarField> {
    let is_json = path.extension().is_some_and(|e| e == "json");
    let field = if is_json {
        ScalarField::from_json(&std::fs::read_to_string(path)?)?
    } else {
        ScalarField::read_csv(geom, std::fs::File::open(path)?)?
    };
    geom.check_shape(&field)?;
    Ok(field)
}

impl FSpec {
    /// `ell^(1-p) (1 + amplitude cos(mode psi) rho(phi))`, the reference data
    /// whose `s = 0` homotopy end is `f` itself up to the modulation.
    pub fn ell_dual(modulation: Option<Modulation>) -> Self {
        FSpec::EllPower {
            c: 1.0,
            alpha: 1.0,
            alpha_p: -1.0,
            beta: 0.0,
            beta_q: 0.0,
            modulation,
        }
    }

    /// Whether the sampled field is invariant under `psi -> psi + pi` by
    /// construction (tables are checked numerically instead).
    pub fn even_by_construction(&self) -> Option<bool> {
        match self {
            FSpec::Constant { .. } => Some(true),
            FSpec::EllPower { modulation, .. } | FSpec::Manufactured { modulation, path: None, .. } => {
                Some(modulation.is_none_or(|m| m.mode % 2 == 0))
            }
            _ => None,
        }
    }

    /// Manufactured solution `h*` of the built-in manufactured kind.
    pub fn manufactured_solution(&self, geom: &CapGeometry) -> Option<impl SmoothField> {
        match self {
            FSpec::Manufactured {
                path: None,
                modulation,
                ..
            } => {
                let modes = modulation
                    .map(|m| {
                        vec![Mode {
                            amp: m.amplitude,
                            k: m.mode as i32,
                            phase: 0.0,
                            m: m.pole_order(),
                        }]
                    })
                    .unwrap_or_default();
                Some(robin_field(geom, NeumannField::new(geom, modes)))
            }
            _ => None,
        }
    }

    pub fn sample(&self, geom: &CapGeometry, p: f64, q: f64) -> Result<ScalarField> {
        let f = match self {
            FSpec::Constant { value } => ScalarField::constant(geom, *value),
            FSpec::EllPower {
                c,
                alpha,
                alpha_p,
                beta,
                beta_q,
                modulation,
            } => ScalarField::from_fn(geom, |phi, psi| {
                let (a, b) = (alpha + alpha_p * p, beta + beta_q * q);
                let l = 1.0 - geom.cos_theta * phi.cos();
                let lp = geom.cos_theta * phi.sin();
                let base = c * l.powf(a) * (l * l + lp * lp).powf(b);
                base * modulation.map_or(1.0, |m| m.factor(geom.sin_theta, phi, psi))
            }),
            FSpec::Grid { values, path } => match (values, path) {
                (Some(v), None) => ScalarField::new(geom, v.clone())?,
                (None, Some(path)) => read_field(geom, path)?,
                _ => {
                    return Err(CapError::Config(
                        "grid f needs exactly one of `values` or `path`".into(),
                    ))
                }
            },
            FSpec::Manufactured { path: Some(path), .. } => {
                manufactured_f(geom, &read_field(geom, path)?, p, q)?
            }
            FSpec::Manufactured { exact, .. } => {
                let h = self.manufactured_solution(geom).expect("built-in h*");
                if *exact {
                    manufactured_f_exact(geom, &h, p, q)?
                } else {
                    manufactured_f(geom, &h.sample(geom), p, q)?
                }
            }
        };
        if let Some(k) = f.values.iter().position(|v| !(*v > 0.0 && v.is_finite())) {
            return Err(CapError::Config(format!(
                "f must be positive and finite; f = {} at cell {k}",
                f.values[k]
            )));
        }
        Ok(f)
    }
}
