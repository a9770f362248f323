//! Operations on the spherical cap: the reference function `ell`, covariant
//! derivatives, the `b` tensor, reconstruction of the body from its support
//! function, and evenness utilities.

use serde::{Deserialize, Serialize};

use crate::error::{CapError, Result};
use crate::grid::{CapGeometry, ScalarField};
use crate::stencil::{Closure, FrameJet};

/// `ell(phi) = 1 - cos(theta) cos(phi)`, the support function of the unit cap.
pub fn ell_field(geom: &CapGeometry) -> ScalarField {
    let mut values = Vec::with_capacity(geom.n_cells());
    for i in 0..geom.n_phi {
        let v = 1.0 - geom.cos_theta * geom.cos_phi[i];
        values.extend(std::iter::repeat_n(v, geom.n_psi));
    }
    ScalarField {
        shape: geom.shape(),
        values,
    }
}

/// Frame jets of a field with the given boundary closure.
pub fn frame_jets(geom: &CapGeometry, values: &[f64], closure: Closure) -> Vec<FrameJet> {
    let st = geom.stencil(closure);
    st.jets(values)
        .iter()
        .enumerate()
        .map(|(c, j)| {
            let i = c / geom.n_psi;
            j.frame(geom.sin_phi[i], geom.cos_phi[i])
        })
        .collect()
}

/// Gradient components `(g1, g2)` in the orthonormal frame
/// `e1 = d/dphi`, `e2 = (1/sin phi) d/dpsi`.
///
/// The ghost ring is filled by cubic extrapolation, so no boundary condition
/// is imposed on the field.
pub fn grad_field(geom: &CapGeometry, s: &ScalarField) -> Result<(ScalarField, ScalarField)> {
    geom.check_shape(s)?;
    let fj = frame_jets(geom, &s.values, Closure::Extrapolate);
    let g1 = fj.iter().map(|f| f.g1).collect();
    let g2 = fj.iter().map(|f| f.g2).collect();
    Ok((
        ScalarField {
            shape: s.shape,
            values: g1,
        },
        ScalarField {
            shape: s.shape,
            values: g2,
        },
    ))
}

/// Frame components of `b = hess h + h I` and derived scalars, per cell.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CurvatureData {
    pub b11: Vec<f64>,
    pub b12: Vec<f64>,
    pub b22: Vec<f64>,
    pub det_b: Vec<f64>,
    pub sigma1: Vec<f64>,
    pub lambda_min: f64,
    pub lambda_max: f64,
}

/// Eigenvalues of the symmetric 2x2 matrix `[[b11, b12], [b12, b22]]`.
pub fn eig2(b11: f64, b12: f64, b22: f64) -> (f64, f64) {
    let m = 0.5 * (b11 + b22);
    let r = (0.25 * (b11 - b22) * (b11 - b22) + b12 * b12).sqrt();
    (m - r, m + r)
}

impl CurvatureData {
    pub fn from_frame(fj: &[FrameJet]) -> Self {
        let n = fj.len();
        let mut d = CurvatureData {
            b11: Vec::with_capacity(n),
            b12: Vec::with_capacity(n),
            b22: Vec::with_capacity(n),
            det_b: Vec::with_capacity(n),
            sigma1: Vec::with_capacity(n),
            lambda_min: f64::INFINITY,
            lambda_max: f64::NEG_INFINITY,
        };
        for f in fj {
            let (b11, b12, b22) = (f.h11 + f.v, f.h12, f.h22 + f.v);
            let (lo, hi) = eig2(b11, b12, b22);
            d.lambda_min = d.lambda_min.min(lo);
            d.lambda_max = d.lambda_max.max(hi);
            d.b11.push(b11);
            d.b12.push(b12);
            d.b22.push(b22);
            d.det_b.push(b11 * b22 - b12 * b12);
            d.sigma1.push(b11 + b22);
        }
        d
    }

    /// `max |b - I|` over cells and components.
    pub fn max_deviation_from_identity(&self) -> f64 {
        let mut e: f64 = 0.0;
        for k in 0..self.b11.len() {
            e = e
                .max((self.b11[k] - 1.0).abs())
                .max(self.b12[k].abs())
                .max((self.b22[k] - 1.0).abs());
        }
        e
    }
}

fn require_positive(s: &ScalarField, what: &str) -> Result<()> {
    if let Some(k) = s.values.iter().position(|v| *v <= 0.0) {
        return Err(CapError::Domain(format!(
            "{what} is nonpositive at cell {k} ({})",
            s.values[k]
        )));
    }
    Ok(())
}

/// `b = hess h + h I` with the Robin ghost ring at `phi = theta`.
pub fn curvature_tensor(geom: &CapGeometry, h: &ScalarField) -> Result<CurvatureData> {
    geom.check_shape(h)?;
    require_positive(h, "support function")?;
    Ok(CurvatureData::from_frame(&frame_jets(
        geom,
        &h.values,
        Closure::Robin,
    )))
}

/// Extents of a reconstructed capillary body.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BodyExtents {
    #[serde(rename = "R_out")]
    pub r_out: f64,
    #[serde(rename = "R_in")]
    pub r_in: f64,
    #[serde(rename = "H")]
    pub height: f64,
    pub boundary_plane_defect: f64,
}

/// Points of the hypersurface recovered from `h` through the inverse Gauss map.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct BodyEmbedding {
    /// One point per cell, row-major.
    pub points: Vec<[f64; 3]>,
    /// One point per azimuth on `phi = theta`.
    pub boundary_points: Vec<[f64; 3]>,
    pub extents: BodyExtents,
    /// False when `b` fails to be positive definite somewhere.
    pub convex: bool,
    pub lambda_min: f64,
}

/// `X = h n + h_phi e_phi + (h_psi / sin phi) e_psi`.
pub fn inverse_gauss_point(phi: f64, psi: f64, h: f64, g1: f64, g2: f64) -> [f64; 3] {
    let (sp, cp) = phi.sin_cos();
    let (ss, cs) = psi.sin_cos();
    let n = [sp * cs, sp * ss, cp];
    let ep = [cp * cs, cp * ss, -sp];
    let es = [-ss, cs, 0.0];
    [
        h * n[0] + g1 * ep[0] + g2 * es[0],
        h * n[1] + g1 * ep[1] + g2 * es[1],
        h * n[2] + g1 * ep[2] + g2 * es[2],
    ]
}

/// Boundary traces `(h, h_phi, h_psi)` at `phi = theta`, one-sided in `phi`.
pub fn boundary_jet(geom: &CapGeometry, values: &[f64]) -> Vec<(f64, f64, f64)> {
    let tr = geom.boundary_trace(values);
    let hv: Vec<f64> = tr.iter().map(|t| t.0).collect();
    let hs = geom.boundary_d_psi(&hv);
    tr.iter().zip(hs).map(|(t, s)| (t.0, t.1, s)).collect()
}

pub fn embed_body(geom: &CapGeometry, h: &ScalarField) -> Result<BodyEmbedding> {
    geom.check_shape(h)?;
    require_positive(h, "support function")?;
    let fj = frame_jets(geom, &h.values, Closure::Robin);
    let curv = CurvatureData::from_frame(&fj);
    let mut points = Vec::with_capacity(geom.n_cells());
    for i in 0..geom.n_phi {
        for j in 0..geom.n_psi {
            let f = &fj[geom.idx(i, j)];
            points.push(inverse_gauss_point(geom.phi[i], geom.psi[j], f.v, f.g1, f.g2));
        }
    }
    let boundary_points: Vec<[f64; 3]> = boundary_jet(geom, &h.values)
        .iter()
        .zip(&geom.psi)
        .map(|((v, dp, ds), psi)| {
            inverse_gauss_point(geom.theta, *psi, *v, *dp, ds / geom.sin_theta)
        })
        .collect();

    let radial = |x: &[f64; 3]| x[0].hypot(x[1]);
    let r_out = points
        .iter()
        .chain(&boundary_points)
        .map(radial)
        .fold(0.0, f64::max);
    let r_in = boundary_points.iter().map(radial).fold(f64::INFINITY, f64::min);
    let height = points
        .iter()
        .chain(&boundary_points)
        .map(|x| x[2])
        .fold(f64::NEG_INFINITY, f64::max);
    let boundary_plane_defect = boundary_points.iter().map(|x| x[2].abs()).fold(0.0, f64::max);
    Ok(BodyEmbedding {
        points,
        boundary_points,
        extents: BodyExtents {
            r_out,
            r_in,
            height,
            boundary_plane_defect,
        },
        convex: curv.lambda_min > 0.0,
        lambda_min: curv.lambda_min,
    })
}

/// `h_phi - cot(theta) h` at `phi = theta`, one value per azimuth.
pub fn robin_residual(geom: &CapGeometry, h: &ScalarField) -> Result<Vec<f64>> {
    geom.check_shape(h)?;
    Ok(geom
        .boundary_trace(&h.values)
        .iter()
        .map(|(v, d)| d - geom.cot_theta * v)
        .collect())
}

/// Average of a field and its image under `psi -> psi + pi`.
pub fn symmetrize_even(geom: &CapGeometry, s: &ScalarField) -> Result<ScalarField> {
    geom.check_shape(s)?;
    let mut out = s.clone();
    symmetrize_in_place(geom, &mut out.values);
    Ok(out)
}

pub(crate) fn symmetrize_in_place(geom: &CapGeometry, v: &mut [f64]) {
    let half = geom.n_psi / 2;
    for i in 0..geom.n_phi {
        for j in 0..half {
            let a = geom.idx(i, j);
            let b = geom.idx(i, j + half);
            let m = 0.5 * (v[a] + v[b]);
            v[a] = m;
            v[b] = m;
        }
    }
}

/// `sup |s - sym(s)| / sup |s|`; zero for even fields.
pub fn even_defect(geom: &CapGeometry, s: &ScalarField) -> Result<f64> {
    geom.check_shape(s)?;
    let mut num: f64 = 0.0;
    let mut den: f64 = 0.0;
    for k in 0..s.values.len() {
        let a = s.values[k];
        let b = s.values[geom.antipode(k)];
        num = num.max(0.5 * (a - b).abs());
        den = den.max(a.abs());
    }
    Ok(if den > 0.0 { num / den } else { 0.0 })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FieldNorms {
    pub sup: f64,
    pub l2: f64,
    pub min: f64,
    pub max: f64,
}

/// Sup norm, area-weighted L2 norm and range.
pub fn field_norms(geom: &CapGeometry, s: &ScalarField) -> Result<FieldNorms> {
    geom.check_shape(s)?;
    let l2sq: f64 = s
        .values
        .iter()
        .enumerate()
        .map(|(k, v)| geom.area_weight(k) * v * v)
        .sum();
    Ok(FieldNorms {
        sup: s.values.iter().fold(0.0, |m, v| m.max(v.abs())),
        l2: l2sq.sqrt(),
        min: s.min(),
        max: s.max(),
    })
}
