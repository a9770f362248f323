//! Second-order finite-difference stencils on the polar cap grid.
//!
//! Every cell carries a 3x3 stencil in `(phi, psi)`. Neighbours across the
//! pole are identified with the cell at `psi + pi` on the first ring. Ghost
//! values beyond `phi = theta` are eliminated in favour of interior rings
//! through a [`Closure`], so a stencil row only ever references real cells.

/// Value and coordinate partial derivatives of a field at one point.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct Jet {
    pub v: f64,
    pub d_phi: f64,
    pub d_psi: f64,
    pub d_phiphi: f64,
    pub d_phipsi: f64,
    pub d_psipsi: f64,
}

impl Jet {
    pub const fn constant(v: f64) -> Self {
        Jet {
            v,
            d_phi: 0.0,
            d_psi: 0.0,
            d_phiphi: 0.0,
            d_phipsi: 0.0,
            d_psipsi: 0.0,
        }
    }

    /// Product rule up to second order.
    pub fn mul(&self, o: &Jet) -> Jet {
        Jet {
            v: self.v * o.v,
            d_phi: self.d_phi * o.v + self.v * o.d_phi,
            d_psi: self.d_psi * o.v + self.v * o.d_psi,
            d_phiphi: self.d_phiphi * o.v + 2.0 * self.d_phi * o.d_phi + self.v * o.d_phiphi,
            d_phipsi: self.d_phipsi * o.v
                + self.d_phi * o.d_psi
                + self.d_psi * o.d_phi
                + self.v * o.d_phipsi,
            d_psipsi: self.d_psipsi * o.v + 2.0 * self.d_psi * o.d_psi + self.v * o.d_psipsi,
        }
    }

    pub fn scale(&self, c: f64) -> Jet {
        Jet {
            v: c * self.v,
            d_phi: c * self.d_phi,
            d_psi: c * self.d_psi,
            d_phiphi: c * self.d_phiphi,
            d_phipsi: c * self.d_phipsi,
            d_psipsi: c * self.d_psipsi,
        }
    }

    pub fn add(&self, o: &Jet) -> Jet {
        Jet {
            v: self.v + o.v,
            d_phi: self.d_phi + o.d_phi,
            d_psi: self.d_psi + o.d_psi,
            d_phiphi: self.d_phiphi + o.d_phiphi,
            d_phipsi: self.d_phipsi + o.d_phipsi,
            d_psipsi: self.d_psipsi + o.d_psipsi,
        }
    }

    /// Gradient and covariant Hessian in the orthonormal frame
    /// `e1 = d/dphi`, `e2 = (1/sin phi) d/dpsi` of the round metric.
    pub fn frame(&self, sin_phi: f64, cos_phi: f64) -> FrameJet {
        let inv_s = 1.0 / sin_phi;
        let cot = cos_phi * inv_s;
        FrameJet {
            v: self.v,
            g1: self.d_phi,
            g2: self.d_psi * inv_s,
            h11: self.d_phiphi,
            h12: inv_s * (self.d_phipsi - cot * self.d_psi),
            h22: inv_s * inv_s * self.d_psipsi + cot * self.d_phi,
        }
    }
}

/// Frame components of value, gradient and Hessian.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct FrameJet {
    pub v: f64,
    pub g1: f64,
    pub g2: f64,
    pub h11: f64,
    pub h12: f64,
    pub h22: f64,
}

impl FrameJet {
    pub fn grad_sq(&self) -> f64 {
        self.g1 * self.g1 + self.g2 * self.g2
    }
}

/// How the ghost ring at `phi = theta + dphi/2` is eliminated.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Closure {
    /// `d_phi v = 0` at `phi = theta`.
    Neumann,
    /// `d_phi v = cot(theta) v` at `phi = theta`.
    Robin,
    /// Cubic extrapolation from the last four rings; imposes nothing.
    Extrapolate,
}

/// Lagrange basis values and first derivatives at `x`.
pub fn lagrange(nodes: &[f64], x: f64) -> (Vec<f64>, Vec<f64>) {
    let n = nodes.len();
    let mut val = vec![0.0; n];
    let mut der = vec![0.0; n];
    for k in 0..n {
        let mut prod = 1.0;
        for m in 0..n {
            if m != k {
                prod *= (x - nodes[m]) / (nodes[k] - nodes[m]);
            }
        }
        val[k] = prod;
        let mut sum = 0.0;
        for l in 0..n {
            if l == k {
                continue;
            }
            let mut p = 1.0 / (nodes[k] - nodes[l]);
            for m in 0..n {
                if m != k && m != l {
                    p *= (x - nodes[m]) / (nodes[k] - nodes[m]);
                }
            }
            sum += p;
        }
        der[k] = sum;
    }
    (val, der)
}

/// Weights expressing the ghost value through the last four rings
/// (index 0 is the outermost interior ring).
///
/// Neumann and Robin collocate the condition at `phi = theta` with cubic
/// interpolation through the ghost and three interior rings, so the ghost
/// is fourth-order accurate and the boundary-row Hessian stays second order.
pub fn ghost_weights(closure: Closure, dphi: f64, cot_theta: f64) -> [f64; 4] {
    match closure {
        Closure::Extrapolate => {
            let (val, _) = lagrange(&[-0.5, -1.5, -2.5, -3.5], 0.5);
            [val[0], val[1], val[2], val[3]]
        }
        Closure::Neumann | Closure::Robin => {
            let kappa = if closure == Closure::Robin { cot_theta } else { 0.0 };
            let (val, der) = lagrange(&[0.5, -0.5, -1.5, -2.5], 0.0);
            let a: Vec<f64> = (0..4).map(|k| der[k] / dphi - kappa * val[k]).collect();
            [-a[1] / a[0], -a[2] / a[0], -a[3] / a[0], 0.0]
        }
    }
}

/// One-sided second-order weights on the last three rings for the value and
/// the `phi`-derivative at `phi = theta`.
pub fn boundary_trace_weights(dphi: f64) -> ([f64; 3], [f64; 3]) {
    let (val, der) = lagrange(&[-0.5, -1.5, -2.5], 0.0);
    (
        [val[0], val[1], val[2]],
        [der[0] / dphi, der[1] / dphi, der[2] / dphi],
    )
}

/// Compressed rows of jet weights, one row per cell.
#[derive(Clone, Debug)]
pub struct JetStencil {
    row_start: Vec<usize>,
    cols: Vec<usize>,
    weights: Vec<[f64; 6]>,
}

// weight slots
const V: usize = 0;
const P: usize = 1;
const S: usize = 2;
const PP: usize = 3;
const PS: usize = 4;
const SS: usize = 5;

impl JetStencil {
    pub(crate) fn build(n_phi: usize, n_psi: usize, dphi: f64, dpsi: f64, ghost: [f64; 4]) -> Self {
        let n = n_phi * n_psi;
        let mut row_start = Vec::with_capacity(n + 1);
        let mut cols = Vec::with_capacity(n * 12);
        let mut weights = Vec::with_capacity(n * 12);
        row_start.push(0);

        let half = n_psi / 2;
        let wrap = |j: isize| -> usize { j.rem_euclid(n_psi as isize) as usize };

        let mut row: Vec<(usize, [f64; 6])> = Vec::with_capacity(16);
        for i in 0..n_phi {
            for j in 0..n_psi {
                row.clear();
                let mut push = |col: usize, w: [f64; 6], scale: f64| {
                    if let Some(slot) = row.iter_mut().find(|(c, _)| *c == col) {
                        for k in 0..6 {
                            slot.1[k] += scale * w[k];
                        }
                    } else {
                        let mut ws = w;
                        for x in ws.iter_mut() {
                            *x *= scale;
                        }
                        row.push((col, ws));
                    }
                };
                for di in -1isize..=1 {
                    for dj in -1isize..=1 {
                        let w = offset_weights(di, dj, dphi, dpsi);
                        if w.iter().all(|x| *x == 0.0) {
                            continue;
                        }
                        let ii = i as isize + di;
                        let jj = j as isize + dj;
                        if ii < 0 {
                            push(wrap(jj + half as isize), w, 1.0);
                        } else if ii as usize >= n_phi {
                            for (k, g) in ghost.iter().enumerate() {
                                if *g != 0.0 && k < n_phi {
                                    push((n_phi - 1 - k) * n_psi + wrap(jj), w, *g);
                                }
                            }
                        } else {
                            push(ii as usize * n_psi + wrap(jj), w, 1.0);
                        }
                    }
                }
                for (c, w) in &row {
                    cols.push(*c);
                    weights.push(*w);
                }
                row_start.push(cols.len());
            }
        }
        JetStencil {
            row_start,
            cols,
            weights,
        }
    }

    pub fn row(&self, cell: usize) -> impl Iterator<Item = (usize, &[f64; 6])> {
        let r = self.row_start[cell]..self.row_start[cell + 1];
        self.cols[r.clone()].iter().copied().zip(self.weights[r].iter())
    }

    pub fn n_cells(&self) -> usize {
        self.row_start.len() - 1
    }

    /// Jet at one cell. `psi_source` supplies the values used for the
    /// `psi`-type derivatives; passing ring deviations there keeps the
    /// strongly weighted near-pole azimuthal differences free of the
    /// quantization of the full values.
    pub fn jet(&self, cell: usize, values: &[f64], psi_source: &[f64]) -> Jet {
        let mut j = Jet::default();
        for (c, w) in self.row(cell) {
            let x = values[c];
            let y = psi_source[c];
            j.v += w[V] * x;
            j.d_phi += w[P] * x;
            j.d_phiphi += w[PP] * x;
            j.d_psi += w[S] * y;
            j.d_phipsi += w[PS] * y;
            j.d_psipsi += w[SS] * y;
        }
        j
    }

    pub fn jets(&self, values: &[f64]) -> Vec<Jet> {
        (0..self.n_cells()).map(|c| self.jet(c, values, values)).collect()
    }

    pub fn jets_split(&self, values: &[f64], deviations: &[f64]) -> Vec<Jet> {
        (0..self.n_cells())
            .map(|c| self.jet(c, values, deviations))
            .collect()
    }
}

fn offset_weights(di: isize, dj: isize, dphi: f64, dpsi: f64) -> [f64; 6] {
    let mut w = [0.0; 6];
    let (a, b) = (1.0 / dphi, 1.0 / dpsi);
    match (di, dj) {
        (0, 0) => {
            w[V] = 1.0;
            w[PP] = -2.0 * a * a;
            w[SS] = -2.0 * b * b;
        }
        (1, 0) | (-1, 0) => {
            w[P] = di as f64 * 0.5 * a;
            w[PP] = a * a;
        }
        (0, 1) | (0, -1) => {
            w[S] = dj as f64 * 0.5 * b;
            w[SS] = b * b;
        }
        _ => {
            w[PS] = (di * dj) as f64 * 0.25 * a * b;
        }
    }
    w
}
