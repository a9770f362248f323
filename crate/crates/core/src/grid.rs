//! Cell-centered polar grid on the spherical cap and sampled fields on it.

use std::f64::consts::PI;
use std::io::{Read, Write};
use std::sync::{Arc, OnceLock};

use serde::{Deserialize, Serialize};

use crate::error::{CapError, Result};
use crate::stencil::{boundary_trace_weights, ghost_weights, Closure, JetStencil};

/// Discretized spherical cap of contact angle `theta`.
///
/// Cells are centered at `phi_i = (i + 1/2) dphi` for `i = 0..n_phi` and
/// `psi_j = j dpsi` for `j = 0..n_psi`; the flat index is `i * n_psi + j`.
#[derive(Debug)]
pub struct CapGeometry {
    pub theta: f64,
    pub cos_theta: f64,
    pub sin_theta: f64,
    pub cot_theta: f64,
    pub n_phi: usize,
    pub n_psi: usize,
    pub dphi: f64,
    pub dpsi: f64,
    pub phi: Vec<f64>,
    pub psi: Vec<f64>,
    pub sin_phi: Vec<f64>,
    pub cos_phi: Vec<f64>,
    /// `sin(phi_i) dphi dpsi`, shared by every cell of ring `i`.
    pub ring_area: Vec<f64>,
    stencils: [OnceLock<JetStencil>; 3],
}

/// Dimensions that identify a grid; two fields are compatible iff their
/// shapes agree.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridShape {
    pub theta: f64,
    pub n_phi: usize,
    pub n_psi: usize,
}

/// Contact angles within this distance of `pi/2` are treated as exactly
/// `pi/2`, so that `cos(theta)` vanishes identically on the hemisphere.
const HEMISPHERE_SNAP: f64 = 1e-14;

pub fn build_grid(theta: f64, n_phi: usize, n_psi: usize) -> Result<Arc<CapGeometry>> {
    CapGeometry::new(theta, n_phi, n_psi).map(Arc::new)
}

impl CapGeometry {
    pub fn new(theta: f64, n_phi: usize, n_psi: usize) -> Result<Self> {
        if !theta.is_finite() || theta <= 0.0 || theta > PI / 2.0 + HEMISPHERE_SNAP {
            return Err(CapError::Domain(format!(
                "contact angle {theta} outside (0, pi/2]"
            )));
        }
        if n_phi < 4 {
            return Err(CapError::Config(format!("Nphi = {n_phi} < 4")));
        }
        if n_psi < 4 || !n_psi.is_multiple_of(2) {
            return Err(CapError::Config(format!(
                "Npsi = {n_psi} must be even and at least 4"
            )));
        }
        let (sin_theta, cos_theta) = if (theta - PI / 2.0).abs() < HEMISPHERE_SNAP {
            (1.0, 0.0)
        } else {
            theta.sin_cos()
        };
        let dphi = theta / n_phi as f64;
        let dpsi = 2.0 * PI / n_psi as f64;
        let phi: Vec<f64> = (0..n_phi).map(|i| (i as f64 + 0.5) * dphi).collect();
        let psi: Vec<f64> = (0..n_psi).map(|j| j as f64 * dpsi).collect();
        let sin_phi: Vec<f64> = phi.iter().map(|p| p.sin()).collect();
        let cos_phi: Vec<f64> = phi.iter().map(|p| p.cos()).collect();
        let ring_area = sin_phi.iter().map(|s| s * dphi * dpsi).collect();
        Ok(CapGeometry {
            theta,
            cos_theta,
            sin_theta,
            cot_theta: cos_theta / sin_theta,
            n_phi,
            n_psi,
            dphi,
            dpsi,
            phi,
            psi,
            sin_phi,
            cos_phi,
            ring_area,
            stencils: Default::default(),
        })
    }

    pub fn shape(&self) -> GridShape {
        GridShape {
            theta: self.theta,
            n_phi: self.n_phi,
            n_psi: self.n_psi,
        }
    }

    pub fn n_cells(&self) -> usize {
        self.n_phi * self.n_psi
    }

    pub fn idx(&self, i: usize, j: usize) -> usize {
        i * self.n_psi + j
    }

    /// Index of the cell reached by `psi -> psi + pi` on the same ring.
    pub fn antipode(&self, cell: usize) -> usize {
        let (i, j) = (cell / self.n_psi, cell % self.n_psi);
        self.idx(i, (j + self.n_psi / 2) % self.n_psi)
    }

    pub fn area_weight(&self, cell: usize) -> f64 {
        self.ring_area[cell / self.n_psi]
    }

    pub fn total_area(&self) -> f64 {
        self.ring_area.iter().sum::<f64>() * self.n_psi as f64
    }

    /// `max(dphi, dpsi)`, the step used in tolerance scalings.
    pub fn step(&self) -> f64 {
        self.dphi.max(self.dpsi)
    }

    /// `dphi^2 + dpsi^2`.
    pub fn step_sq(&self) -> f64 {
        self.dphi * self.dphi + self.dpsi * self.dpsi
    }

    pub fn stencil(&self, closure: Closure) -> &JetStencil {
        let slot = match closure {
            Closure::Neumann => 0,
            Closure::Robin => 1,
            Closure::Extrapolate => 2,
        };
        self.stencils[slot].get_or_init(|| {
            JetStencil::build(
                self.n_phi,
                self.n_psi,
                self.dphi,
                self.dpsi,
                ghost_weights(closure, self.dphi, self.cot_theta),
            )
        })
    }

    /// One-sided second-order value and `phi`-derivative at `phi = theta`
    /// for each azimuth.
    pub fn boundary_trace(&self, values: &[f64]) -> Vec<(f64, f64)> {
        let (wv, wd) = boundary_trace_weights(self.dphi);
        let n = self.n_phi;
        (0..self.n_psi)
            .map(|j| {
                let x = [
                    values[self.idx(n - 1, j)],
                    values[self.idx(n - 2, j)],
                    values[self.idx(n - 3, j)],
                ];
                (
                    wv[0] * x[0] + wv[1] * x[1] + wv[2] * x[2],
                    wd[0] * x[0] + wd[1] * x[1] + wd[2] * x[2],
                )
            })
            .collect()
    }

    /// Centered `psi`-derivative of periodic boundary data.
    pub fn boundary_d_psi(&self, values: &[f64]) -> Vec<f64> {
        let n = self.n_psi;
        (0..n)
            .map(|j| (values[(j + 1) % n] - values[(j + n - 1) % n]) / (2.0 * self.dpsi))
            .collect()
    }

    pub fn check_shape(&self, f: &ScalarField) -> Result<()> {
        if f.shape != self.shape() {
            return Err(CapError::Usage(format!(
                "field on grid {:?} used with grid {:?}",
                f.shape,
                self.shape()
            )));
        }
        Ok(())
    }
}

/// Real values sampled at the cells of a cap grid, row-major in `(i, j)`.
#[derive(Clone, Debug, PartialEq)]
pub struct ScalarField {
    pub shape: GridShape,
    pub values: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct FieldJson {
    theta: f64,
    #[serde(rename = "Nphi")]
    n_phi: usize,
    #[serde(rename = "Npsi")]
    n_psi: usize,
    values: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct FieldRow {
    i: usize,
    j: usize,
    phi: f64,
    psi: f64,
    value: f64,
}

impl ScalarField {
    pub fn new(geom: &CapGeometry, values: Vec<f64>) -> Result<Self> {
        if values.len() != geom.n_cells() {
            return Err(CapError::Usage(format!(
                "{} values for a grid of {} cells",
                values.len(),
                geom.n_cells()
            )));
        }
        if let Some(k) = values.iter().position(|v| !v.is_finite()) {
            return Err(CapError::Domain(format!("non-finite value at cell {k}")));
        }
        Ok(ScalarField {
            shape: geom.shape(),
            values,
        })
    }

    pub fn constant(geom: &CapGeometry, c: f64) -> Self {
        ScalarField {
            shape: geom.shape(),
            values: vec![c; geom.n_cells()],
        }
    }

    /// Samples `f(phi, psi)` at every cell center.
    pub fn from_fn(geom: &CapGeometry, f: impl Fn(f64, f64) -> f64) -> Self {
        let mut values = Vec::with_capacity(geom.n_cells());
        for &p in &geom.phi {
            for &s in &geom.psi {
                values.push(f(p, s));
            }
        }
        ScalarField {
            shape: geom.shape(),
            values,
        }
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        ScalarField {
            shape: self.shape,
            values: self.values.iter().map(|v| f(*v)).collect(),
        }
    }

    pub fn zip_with(&self, other: &ScalarField, f: impl Fn(f64, f64) -> f64) -> Result<Self> {
        if self.shape != other.shape {
            return Err(CapError::Usage("fields on different grids".into()));
        }
        Ok(ScalarField {
            shape: self.shape,
            values: self
                .values
                .iter()
                .zip(&other.values)
                .map(|(a, b)| f(*a, *b))
                .collect(),
        })
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.shape.n_psi + j]
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(&FieldJson {
            theta: self.shape.theta,
            n_phi: self.shape.n_phi,
            n_psi: self.shape.n_psi,
            values: self.values.clone(),
        })?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let raw: FieldJson = serde_json::from_str(text)?;
        let geom = CapGeometry::new(raw.theta, raw.n_phi, raw.n_psi)?;
        ScalarField::new(&geom, raw.values)
    }

    pub fn write_csv<W: Write>(&self, geom: &CapGeometry, out: W) -> Result<()> {
        geom.check_shape(self)?;
        let mut w = csv::Writer::from_writer(out);
        for i in 0..geom.n_phi {
            for j in 0..geom.n_psi {
                w.serialize(FieldRow {
                    i,
                    j,
                    phi: geom.phi[i],
                    psi: geom.psi[j],
                    value: self.get(i, j),
                })?;
            }
        }
        w.flush()?;
        Ok(())
    }

    /// Reads the `i, j, phi, psi, value` table written by [`Self::write_csv`];
    /// lines starting with `#` are skipped.
    pub fn read_csv<R: Read>(geom: &CapGeometry, input: R) -> Result<Self> {
        let mut values = vec![f64::NAN; geom.n_cells()];
        let mut r = csv::ReaderBuilder::new()
            .comment(Some(b'#'))
            .from_reader(input);
        for row in r.deserialize() {
            let row: FieldRow = row?;
            if row.i >= geom.n_phi || row.j >= geom.n_psi {
                return Err(CapError::Config(format!(
                    "cell ({}, {}) outside the grid",
                    row.i, row.j
                )));
            }
            values[geom.idx(row.i, row.j)] = row.value;
        }
        ScalarField::new(geom, values)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cell_centers() {
        let g = build_grid(PI / 4.0, 8, 16).unwrap();
        assert!((g.phi[0] - PI / 64.0).abs() < 1e-15);
        assert!((g.phi[7] - 15.0 * PI / 64.0).abs() < 1e-15);
    }

    #[test]
    fn rejects_bad_input() {
        assert!(matches!(build_grid(PI, 8, 16), Err(CapError::Domain(_))));
        assert!(matches!(build_grid(0.0, 8, 16), Err(CapError::Domain(_))));
        assert!(matches!(build_grid(1.0, 8, 15), Err(CapError::Config(_))));
        assert!(matches!(build_grid(1.0, 3, 16), Err(CapError::Config(_))));
    }

    #[test]
    fn area_converges() {
        let g = build_grid(PI / 3.0, 64, 128).unwrap();
        assert!((g.total_area() / PI - 1.0).abs() < 1e-3);
    }

    #[test]
    fn field_round_trips() {
        let g = build_grid(0.9, 4, 8).unwrap();
        let f = ScalarField::from_fn(&g, |p, s| p + 0.25 * s.cos());
        let back = ScalarField::from_json(&f.to_json().unwrap()).unwrap();
        assert_eq!(back, f);
        let mut buf = Vec::new();
        f.write_csv(&g, &mut buf).unwrap();
        let back = ScalarField::read_csv(&g, buf.as_slice()).unwrap();
        assert_eq!(back, f);
    }
}
