//! Element-wise evaluation of bases and geometry at Gauss points.
//!
//! Every space involved in an integral is tabulated on the finest element
//! mesh ("integration mesh"); coarser spaces are nested in it.

use crate::error::{Error, Result};
use crate::geometry::{GeometryMap, Jacobian};
use crate::linalg::{self, Mat};
use crate::spline::{ders_basis_into, LocalBasis, TensorSpace, Weights, MAX_DIM};

use super::quadrature::GaussRule;

/// 1-d basis tables of one space on the integration mesh.
#[derive(Clone, Debug)]
pub(crate) struct SpaceTab {
    pub p: usize,
    pub nd: usize,
    pub counts: [usize; MAX_DIM],
    ratio: [usize; MAX_DIM],
    tables: Vec<Vec<f64>>,
    weights: Option<Vec<f64>>,
    g: usize,
}

impl SpaceTab {
    pub fn new(space: &TensorSpace, weights: &Weights, e_int: &[usize; MAX_DIM], rule: &GaussRule, nd: usize) -> Result<Self> {
        let n = space.dim();
        let p = space.degree();
        let w = (nd + 1) * (p + 1);
        let g = rule.len();
        let mut ratio = [1; MAX_DIM];
        let mut tables = Vec::with_capacity(n);
        for d in 0..n {
            let kv = space.dir(d);
            if !e_int[d].is_multiple_of(kv.spans()) {
                return Err(Error::Invalid(format!(
                    "space with {} spans is not nested in the integration mesh of {} spans",
                    kv.spans(),
                    e_int[d]
                )));
            }
            ratio[d] = e_int[d] / kv.spans();
            let mut t = vec![0.0; e_int[d] * g * w];
            for e in 0..e_int[d] {
                let se = e / ratio[d];
                for (q, &tq) in rule.points.iter().enumerate() {
                    let x = (e as f64 + tq) / e_int[d] as f64;
                    let off = (e * g + q) * w;
                    ders_basis_into(kv.knots(), p, se + p, x, nd, &mut t[off..off + w]);
                }
            }
            tables.push(t);
        }
        let weights = weights.is_rational().then(|| weights.values().to_vec());
        Ok(Self { p, nd, counts: space.counts(), ratio, tables, weights, g })
    }

    /// First basis index per direction on integration element `e`.
    pub fn first(&self, e: &[usize; MAX_DIM], n: usize) -> [usize; MAX_DIM] {
        let mut f = [0; MAX_DIM];
        for d in 0..n {
            f[d] = e[d] / self.ratio[d];
        }
        f
    }

    pub fn local_len(&self, n: usize) -> usize {
        (self.p + 1).pow(n as u32)
    }

    /// Fill `lb` at quadrature point `q` of element `e`.
    pub fn eval(&self, n: usize, e: &[usize; MAX_DIM], q: &[usize; MAX_DIM], lb: &mut LocalBasis, wbuf: &mut Vec<f64>) {
        let w = (self.nd + 1) * (self.p + 1);
        let mut slices: [&[f64]; MAX_DIM] = [&[]; MAX_DIM];
        for d in 0..n {
            let off = (e[d] * self.g + q[d]) * w;
            slices[d] = &self.tables[d][off..off + w];
        }
        lb.tensorize(&slices[..n]);
        let first = self.first(e, n);
        lb.set_indices(&first[..n], &self.counts[..n]);
        if let Some(wv) = &self.weights {
            wbuf.clear();
            wbuf.extend(lb.indices.iter().map(|&i| wv[i]));
            lb.rationalize(wbuf);
        }
    }
}

/// Geometry data at one quadrature point.
#[derive(Clone, Debug)]
pub struct GeoPoint {
    pub xhat: [f64; MAX_DIM],
    pub x: [f64; MAX_DIM],
    pub jac: Jacobian,
    /// `J^-1`, so that physical gradients are `ginv^T grad_hat`.
    pub ginv: Mat,
    /// `J^-1 J^-T`.
    pub ggt: Mat,
    /// Second parametric derivatives of each physical coordinate.
    pub phi_hess: [Mat; MAX_DIM],
    /// Quadrature weight times `det J` (element size included).
    pub wdet: f64,
}

/// Basis data mapped to physical coordinates.
#[derive(Clone, Debug, Default)]
pub struct Phys {
    pub values: Vec<f64>,
    pub grads: Vec<[f64; MAX_DIM]>,
    pub lap: Vec<f64>,
    pub hess: Vec<Mat>,
}

pub(crate) fn to_physical(lb: &LocalBasis, geo: &GeoPoint, n: usize, nd: usize, full_hess: bool, out: &mut Phys) {
    let len = lb.len();
    out.values.clear();
    out.values.extend_from_slice(&lb.values);
    if nd >= 1 {
        out.grads.resize(len, [0.0; MAX_DIM]);
        for a in 0..len {
            let mut g = [0.0; MAX_DIM];
            for (c, gc) in g.iter_mut().enumerate().take(n) {
                *gc = (0..n).map(|k| geo.ginv[k][c] * lb.grads[a][k]).sum();
            }
            out.grads[a] = g;
        }
    }
    if nd >= 2 {
        out.lap.resize(len, 0.0);
        if full_hess {
            out.hess.resize(len, [[0.0; MAX_DIM]; MAX_DIM]);
        }
        for a in 0..len {
            // parametric Hessian minus the curvature of the map
            let mut m = lb.hess[a];
            for c in 0..n {
                let gc = out.grads[a][c];
                for k in 0..n {
                    for l in 0..n {
                        m[k][l] -= gc * geo.phi_hess[c][k][l];
                    }
                }
            }
            let mut lap = 0.0;
            for k in 0..n {
                for l in 0..n {
                    lap += m[k][l] * geo.ggt[l][k];
                }
            }
            out.lap[a] = lap;
            if full_hess {
                let t = linalg::mul(&linalg::transpose(&geo.ginv), &m, n);
                out.hess[a] = linalg::mul(&t, &geo.ginv, n);
            }
        }
    }
}

/// Tabulated geometry plus any number of tabulated spaces.
pub(crate) struct Integrator {
    pub n: usize,
    pub e_int: [usize; MAX_DIM],
    pub rule: GaussRule,
    pub geo_nd: usize,
    geo_tab: SpaceTab,
    geo_points: Vec<f64>,
    pub spaces: Vec<SpaceTab>,
}

/// Reusable buffers for one thread.
pub(crate) struct Scratch {
    pub geo_lb: LocalBasis,
    pub lbs: Vec<LocalBasis>,
    pub phys: Vec<Phys>,
    pub wbuf: Vec<f64>,
}

impl Integrator {
    /// `spaces` are `(space, weights, derivative order)`.
    pub fn new(geometry: &GeometryMap, spaces: &[(&TensorSpace, &Weights, usize)], g: usize, geo_nd: usize) -> Result<Self> {
        let n = geometry.dim();
        let mut e_int = [1; MAX_DIM];
        for (s, _, _) in spaces {
            if s.dim() != n {
                return Err(Error::Dimension("space and geometry dimensions differ".into()));
            }
            let sp = s.spans();
            for d in 0..n {
                e_int[d] = e_int[d].max(sp[d]);
            }
        }
        let rule = GaussRule::new(g);
        let geo_nd = geo_nd.max(1);
        let geo_tab = SpaceTab::new(geometry.space(), geometry.weights(), &e_int, &rule, geo_nd)?;
        let spaces = spaces
            .iter()
            .map(|(s, w, nd)| SpaceTab::new(s, w, &e_int, &rule, *nd))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { n, e_int, rule, geo_nd, geo_tab, geo_points: geometry.control_points().to_vec(), spaces })
    }

    pub fn element_count(&self) -> usize {
        self.e_int[..self.n].iter().product()
    }

    pub fn element_multi(&self, flat: usize) -> [usize; MAX_DIM] {
        crate::spline::multi_index(flat, &self.e_int[..self.n])
    }

    pub fn qp_count(&self) -> usize {
        self.rule.len().pow(self.n as u32)
    }

    pub fn scratch(&self) -> Scratch {
        Scratch {
            geo_lb: LocalBasis::new(self.n, self.geo_tab.p, self.geo_nd),
            lbs: self.spaces.iter().map(|s| LocalBasis::new(self.n, s.p, s.nd)).collect(),
            phys: self.spaces.iter().map(|_| Phys::default()).collect(),
            wbuf: Vec::new(),
        }
    }

    /// Evaluate geometry and all spaces at quadrature point `qf` of element `e`.
    pub fn eval_qp(&self, e: &[usize; MAX_DIM], qf: usize, sc: &mut Scratch, full_hess: bool) -> Result<GeoPoint> {
        let n = self.n;
        let g = self.rule.len();
        let mut q = [0; MAX_DIM];
        let mut r = qf;
        let mut xhat = [0.0; MAX_DIM];
        let mut weight = 1.0;
        for d in 0..n {
            q[d] = r % g;
            r /= g;
            let h = 1.0 / self.e_int[d] as f64;
            xhat[d] = (e[d] as f64 + self.rule.points[q[d]]) * h;
            weight *= self.rule.weights[q[d]] * h;
        }
        self.geo_tab.eval(n, e, &q, &mut sc.geo_lb, &mut sc.wbuf);
        let lb = &sc.geo_lb;
        let mut mat = [[0.0; MAX_DIM]; MAX_DIM];
        let mut x = [0.0; MAX_DIM];
        let mut phi_hess = [[[0.0; MAX_DIM]; MAX_DIM]; MAX_DIM];
        for (a, &i) in lb.indices.iter().enumerate() {
            for c in 0..n {
                let cp = self.geo_points[i * n + c];
                x[c] += cp * lb.values[a];
                for k in 0..n {
                    mat[c][k] += cp * lb.grads[a][k];
                }
                if self.geo_nd >= 2 {
                    for k in 0..n {
                        for l in 0..n {
                            phi_hess[c][k][l] += cp * lb.hess[a][k][l];
                        }
                    }
                }
            }
        }
        let (ginv, det) = linalg::inverse(&mat, n);
        if !(det > 0.0) {
            return Err(Error::SingularJacobian { point: xhat[..n].to_vec(), det });
        }
        let ggt = linalg::mul(&ginv, &linalg::transpose(&ginv), n);
        let geo = GeoPoint { xhat, x, jac: Jacobian { n, mat, det }, ginv, ggt, phi_hess, wdet: weight * det };
        for (s, tab) in self.spaces.iter().enumerate() {
            tab.eval(n, e, &q, &mut sc.lbs[s], &mut sc.wbuf);
            to_physical(&sc.lbs[s], &geo, n, tab.nd, full_hess, &mut sc.phys[s]);
        }
        Ok(geo)
    }
}
