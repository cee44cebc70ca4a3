//! Quadrature-based Galerkin assembly on tensor-product spline spaces.
//!
//! Matrices are accumulated element by element in increasing colex element
//! order. Local matrices may be computed in parallel, but they are always
//! scattered sequentially, so every entry is summed in the same order no
//! matter how many threads run or which rows are requested.

pub(crate) mod integrator;
pub mod quadrature;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::geometry::GeometryMap;
use crate::sparse::CsrMatrix;
use crate::spline::interp::{map_lines, Interpolant1d};
use crate::spline::{KnotVector, TensorSpace, Weights, MAX_DIM};

use integrator::{Integrator, Phys};
pub use integrator::GeoPoint;

/// Bilinear forms that can be assembled.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Form {
    /// `int grad u . grad v`
    PoissonStiffness,
    /// `int u v`
    Mass,
    /// `int lap u lap v`
    Biharmonic,
    /// `mu int grad u : grad v`, one scalar block of the vector Laplacian.
    StokesVelocity { viscosity: f64 },
    /// `int q d_c u_c`: pressure test functions against component `c` of
    /// the velocity trial functions.
    StokesDivergence { component: usize },
}

impl Form {
    pub fn is_symmetric(&self) -> bool {
        !matches!(self, Form::StokesDivergence { .. })
    }

    /// Derivative orders needed for (test, trial, geometry).
    fn orders(&self) -> (usize, usize, usize) {
        match self {
            Form::PoissonStiffness | Form::StokesVelocity { .. } => (1, 1, 1),
            Form::Mass => (0, 0, 1),
            Form::Biharmonic => (2, 2, 2),
            Form::StokesDivergence { .. } => (0, 1, 1),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Form::PoissonStiffness => "poisson",
            Form::Mass => "mass",
            Form::Biharmonic => "biharmonic",
            Form::StokesVelocity { .. } => "stokes_velocity",
            Form::StokesDivergence { .. } => "stokes_divergence",
        }
    }
}

/// A spline or NURBS space on a uniform mesh, with the geometry refined onto it
/// when the space can carry it.
#[derive(Clone, Debug)]
pub struct DiscreteSpace {
    space: TensorSpace,
    weights: Weights,
    geometry: Option<GeometryMap>,
}

impl DiscreteSpace {
    /// Isoparametric space of the given degree and number of spans per direction.
    ///
    /// For polynomial geometries a space too coarse to carry the map is still
    /// allowed (it only needs unit weights); rational maps must be representable.
    pub fn new(geometry: &GeometryMap, degree: usize, spans: usize) -> Result<Self> {
        match geometry.refine(degree, spans) {
            Ok(g) => Ok(Self { space: g.space().clone(), weights: g.weights().clone(), geometry: Some(g) }),
            Err(e) => {
                if geometry.is_polynomial() {
                    let kv = KnotVector::with_spans(degree, spans)?;
                    let space = TensorSpace::new(vec![kv; geometry.dim()])?;
                    let weights = Weights::uniform(space.len());
                    Ok(Self { space, weights, geometry: None })
                } else {
                    Err(e)
                }
            }
        }
    }

    /// Plain B-spline space without geometry.
    pub fn bspline(n: usize, degree: usize, spans: usize) -> Result<Self> {
        let kv = KnotVector::with_spans(degree, spans)?;
        let space = TensorSpace::new(vec![kv; n])?;
        let weights = Weights::uniform(space.len());
        Ok(Self { space, weights, geometry: None })
    }

    pub fn space(&self) -> &TensorSpace {
        &self.space
    }

    pub fn weights(&self) -> &Weights {
        &self.weights
    }

    /// The geometry map on this space, if it fits.
    pub fn geometry(&self) -> Option<&GeometryMap> {
        self.geometry.as_ref()
    }

    pub fn len(&self) -> usize {
        self.space.len()
    }

    pub fn is_empty(&self) -> bool {
        self.space.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.space.dim()
    }

    pub fn degree(&self) -> usize {
        self.space.degree()
    }

    pub fn spans(&self) -> usize {
        self.space.dir(0).spans()
    }

    pub fn mesh_size(&self) -> f64 {
        self.space.dir(0).mesh_size()
    }

    /// Evaluate `sum_i c_i N_i` at `xhat`.
    pub fn eval_field(&self, coeffs: &[f64], xhat: &[f64]) -> Result<f64> {
        let b = self.space.eval_nurbs(&self.weights, xhat, 0)?;
        Ok(b.indices.iter().zip(&b.values).map(|(&i, v)| coeffs[i] * v).sum())
    }
}

/// Velocity and pressure spaces of the subgrid Stokes element: the velocity
/// has degree `p + 1` on a mesh refined once, the pressure degree `p`.
pub fn stokes_spaces(geometry: &GeometryMap, p: usize, spans: usize) -> Result<(DiscreteSpace, DiscreteSpace)> {
    let velocity = DiscreteSpace::new(geometry, p + 1, 2 * spans)?;
    let pressure = DiscreteSpace::new(geometry, p, spans)?;
    Ok((velocity, pressure))
}

/// Sparsity pattern of a (test, trial) pair: in direction `d`, test function
/// `c` couples to trial functions `lo[d][c]..=hi[d][c]`.
#[derive(Clone, Debug)]
pub struct Layout {
    pub n: usize,
    pub test_counts: [usize; MAX_DIM],
    pub trial_counts: [usize; MAX_DIM],
    pub lo: Vec<Vec<usize>>,
    pub hi: Vec<Vec<usize>>,
}

impl Layout {
    pub fn new(test: &TensorSpace, trial: &TensorSpace) -> Result<Self> {
        let n = test.dim();
        if trial.dim() != n {
            return Err(Error::Dimension("test and trial dimensions differ".into()));
        }
        let mut lo = Vec::new();
        let mut hi = Vec::new();
        for d in 0..n {
            let (t, r) = (test.dir(d), trial.dir(d));
            let e_int = t.spans().max(r.spans());
            if e_int % t.spans() != 0 || e_int % r.spans() != 0 {
                return Err(Error::Invalid("test and trial meshes are not nested".into()));
            }
            let (rt, rr) = (e_int / t.spans(), e_int / r.spans());
            let mut l = Vec::with_capacity(t.basis_count());
            let mut h = Vec::with_capacity(t.basis_count());
            for c in 0..t.basis_count() {
                let sup = t.support_elements(c);
                let first = sup.start * rt;
                let last = sup.end * rt - 1;
                l.push(first / rr);
                h.push(last / rr + r.degree());
            }
            lo.push(l);
            hi.push(h);
        }
        Ok(Self { n, test_counts: test.counts(), trial_counts: trial.counts(), lo, hi })
    }

    pub fn nrows(&self) -> usize {
        self.test_counts[..self.n].iter().product()
    }

    pub fn ncols(&self) -> usize {
        self.trial_counts[..self.n].iter().product()
    }

    pub fn row_len(&self, i: &[usize; MAX_DIM]) -> usize {
        (0..self.n).map(|d| self.hi[d][i[d]] - self.lo[d][i[d]] + 1).product()
    }

    /// Position of column `j` inside the stored row `i`.
    pub fn offset(&self, i: &[usize; MAX_DIM], j: &[usize; MAX_DIM]) -> usize {
        let mut off = 0;
        let mut stride = 1;
        for d in 0..self.n {
            let lo = self.lo[d][i[d]];
            off += (j[d] - lo) * stride;
            stride *= self.hi[d][i[d]] - lo + 1;
        }
        off
    }

    /// Zero matrix with the full pattern in the rows selected by `rows`
    /// (all rows when `None`) and empty rows elsewhere.
    pub fn empty_matrix(&self, rows: Option<&[bool]>) -> CsrMatrix {
        let nr = self.nrows();
        let mut row_ptr = Vec::with_capacity(nr + 1);
        row_ptr.push(0);
        let mut col_idx = Vec::new();
        for i in 0..nr {
            if rows.is_none_or(|m| m[i]) {
                let im = crate::spline::multi_index(i, &self.test_counts[..self.n]);
                self.push_columns(&im, &mut col_idx);
            }
            row_ptr.push(col_idx.len());
        }
        let nnz = col_idx.len();
        CsrMatrix::from_parts(nr, self.ncols(), row_ptr, col_idx, vec![0.0; nnz]).expect("layout pattern is valid")
    }

    fn push_columns(&self, i: &[usize; MAX_DIM], out: &mut Vec<usize>) {
        let n = self.n;
        let mut lo = [0; MAX_DIM];
        let mut w = [1; MAX_DIM];
        for d in 0..n {
            lo[d] = self.lo[d][i[d]];
            w[d] = self.hi[d][i[d]] - lo[d] + 1;
        }
        let total: usize = w[..n].iter().product();
        for k in 0..total {
            let mut r = k;
            let mut idx = 0;
            let mut stride = 1;
            for d in 0..n {
                idx += (lo[d] + r % w[d]) * stride;
                r /= w[d];
                stride *= self.trial_counts[d];
            }
            out.push(idx);
        }
    }
}

/// Assembly of one bilinear form on a (test, trial) pair over a geometry.
pub struct Assembler {
    form: Form,
    integ: Integrator,
    layout: Layout,
    same_space: bool,
    n: usize,
}

/// Bookkeeping returned by row-restricted assembly.
#[derive(Clone, Copy, Debug, Default)]
pub struct RowAssembly {
    pub active_elements: usize,
    pub total_elements: usize,
}

const CHUNK: usize = 64;

impl Assembler {
    /// Gauss rule with `max(p_test, p_trial) + 1` points per direction.
    pub fn new(form: Form, test: &DiscreteSpace, trial: &DiscreteSpace, geometry: &GeometryMap) -> Result<Self> {
        let g = test.degree().max(trial.degree()) + 1;
        Self::with_quadrature(form, test, trial, geometry, g)
    }

    pub fn with_quadrature(form: Form, test: &DiscreteSpace, trial: &DiscreteSpace, geometry: &GeometryMap, g: usize) -> Result<Self> {
        let (nt, nr, ng) = form.orders();
        let same_space = test.space == trial.space && test.weights == trial.weights;
        if let Form::StokesDivergence { component } = form {
            if component >= test.dim() {
                return Err(Error::Invalid(format!("velocity component {component} in {}-d", test.dim())));
            }
        } else if !same_space {
            return Err(Error::Invalid(format!("form `{}` needs equal test and trial spaces", form.name())));
        }
        if let Form::StokesVelocity { viscosity } = form {
            if !(viscosity > 0.0) {
                return Err(Error::Invalid("viscosity must be positive".into()));
            }
        }
        let spaces: Vec<(&TensorSpace, &Weights, usize)> = if same_space {
            vec![(&test.space, &test.weights, nt.max(nr))]
        } else {
            vec![(&test.space, &test.weights, nt), (&trial.space, &trial.weights, nr)]
        };
        let integ = Integrator::new(geometry, &spaces, g, ng)?;
        let layout = Layout::new(&test.space, &trial.space)?;
        Ok(Self { form, integ, layout, same_space, n: test.dim() })
    }

    pub fn form(&self) -> Form {
        self.form
    }

    pub fn layout(&self) -> &Layout {
        &self.layout
    }

    pub fn element_count(&self) -> usize {
        self.integ.element_count()
    }

    fn local_sizes(&self) -> (usize, usize) {
        let nt = self.integ.spaces[0].local_len(self.n);
        let nr = self.integ.spaces[if self.same_space { 0 } else { 1 }].local_len(self.n);
        (nt, nr)
    }

    /// Local matrix of element `e`, row-major `(test local, trial local)`.
    fn local_matrix(&self, e: &[usize; MAX_DIM], sc: &mut integrator::Scratch, out: &mut [f64]) -> Result<()> {
        let (nt, nr) = self.local_sizes();
        out[..nt * nr].iter_mut().for_each(|v| *v = 0.0);
        let sym = self.same_space && self.form.is_symmetric();
        let n = self.n;
        for qf in 0..self.integ.qp_count() {
            let geo = self.integ.eval_qp(e, qf, sc, false)?;
            let w = geo.wdet;
            let (pt, pr): (&Phys, &Phys) = if self.same_space { (&sc.phys[0], &sc.phys[0]) } else { (&sc.phys[0], &sc.phys[1]) };
            match self.form {
                Form::PoissonStiffness | Form::StokesVelocity { .. } => {
                    let mu = if let Form::StokesVelocity { viscosity } = self.form { viscosity } else { 1.0 };
                    let f = w * mu;
                    for a in 0..nt {
                        let ga = pt.grads[a];
                        let start = if sym { a } else { 0 };
                        for b in start..nr {
                            let gb = pr.grads[b];
                            let mut s = 0.0;
                            for k in 0..n {
                                s += ga[k] * gb[k];
                            }
                            out[a * nr + b] += f * s;
                        }
                    }
                }
                Form::Mass => {
                    for a in 0..nt {
                        let va = w * pt.values[a];
                        for b in a..nr {
                            out[a * nr + b] += va * pr.values[b];
                        }
                    }
                }
                Form::Biharmonic => {
                    for a in 0..nt {
                        let la = w * pt.lap[a];
                        for b in a..nr {
                            out[a * nr + b] += la * pr.lap[b];
                        }
                    }
                }
                Form::StokesDivergence { component } => {
                    for a in 0..nt {
                        let va = w * pt.values[a];
                        for b in 0..nr {
                            out[a * nr + b] += va * pr.grads[b][component];
                        }
                    }
                }
            }
        }
        if sym {
            for a in 0..nt {
                for b in 0..a {
                    out[a * nr + b] = out[b * nr + a];
                }
            }
        }
        Ok(())
    }

    /// Full matrix by element-wise quadrature.
    pub fn assemble_full(&self) -> Result<CsrMatrix> {
        let elements: Vec<usize> = (0..self.element_count()).collect();
        self.assemble_on(&elements, None)
    }

    /// Only the rows flagged in `rows`; other rows are left empty. Each
    /// populated row is bit-identical to the same row of [`Self::assemble_full`].
    pub fn assemble_rows(&self, rows: &[bool]) -> Result<(CsrMatrix, RowAssembly)> {
        if rows.len() != self.layout.nrows() {
            return Err(Error::Dimension(format!("row mask of length {} for {} rows", rows.len(), self.layout.nrows())));
        }
        let active = self.active_elements(rows);
        let m = self.assemble_on(&active, Some(rows))?;
        Ok((m, RowAssembly { active_elements: active.len(), total_elements: self.element_count() }))
    }

    /// Elements in the support of at least one selected row, increasing.
    pub fn active_elements(&self, rows: &[bool]) -> Vec<usize> {
        let n = self.n;
        let tab = &self.integ.spaces[0];
        let e_int = self.integ.e_int;
        let mut mark = vec![false; self.element_count()];
        let counts = tab.counts;
        let ratio: Vec<usize> = (0..n).map(|d| e_int[d] / (counts[d] - tab.p)).collect();
        for (i, _) in rows.iter().enumerate().filter(|(_, &r)| r) {
            let im = crate::spline::multi_index(i, &counts[..n]);
            let mut lo = [0; MAX_DIM];
            let mut w = [1; MAX_DIM];
            for d in 0..n {
                let s_lo = im[d].saturating_sub(tab.p);
                let s_hi = (im[d] + 1).min(counts[d] - tab.p);
                lo[d] = s_lo * ratio[d];
                w[d] = (s_hi - s_lo) * ratio[d];
            }
            let total: usize = w[..n].iter().product();
            for k in 0..total {
                let mut r = k;
                let mut idx = 0;
                let mut stride = 1;
                for d in 0..n {
                    idx += (lo[d] + r % w[d]) * stride;
                    r /= w[d];
                    stride *= e_int[d];
                }
                mark[idx] = true;
            }
        }
        mark.iter().enumerate().filter(|(_, &m)| m).map(|(e, _)| e).collect()
    }

    fn assemble_on(&self, elements: &[usize], rows: Option<&[bool]>) -> Result<CsrMatrix> {
        let mut mat = self.layout.empty_matrix(rows);
        let (nt, nr) = self.local_sizes();
        let block = nt * nr;
        let wave = CHUNK * rayon::current_num_threads().max(1) * 4;
        let test_tab = &self.integ.spaces[0];
        let trial_tab = &self.integ.spaces[if self.same_space { 0 } else { 1 }];
        let n = self.n;
        let row_ptr = mat.row_ptr().to_vec();
        for wave_elems in elements.chunks(wave) {
            let locals: Vec<Result<Vec<f64>>> = wave_elems
                .par_chunks(CHUNK)
                .map(|chunk| {
                    let mut sc = self.integ.scratch();
                    let mut buf = vec![0.0; chunk.len() * block];
                    for (k, &ef) in chunk.iter().enumerate() {
                        let e = self.integ.element_multi(ef);
                        self.local_matrix(&e, &mut sc, &mut buf[k * block..(k + 1) * block])?;
                    }
                    Ok(buf)
                })
                .collect();
            let vals = mat.values_mut();
            for (chunk, local) in wave_elems.chunks(CHUNK).zip(locals) {
                let local = local?;
                for (k, &ef) in chunk.iter().enumerate() {
                    let e = self.integ.element_multi(ef);
                    let ft = test_tab.first(&e, n);
                    let fr = trial_tab.first(&e, n);
                    let lm = &local[k * block..(k + 1) * block];
                    for a in 0..nt {
                        let mut im = [0; MAX_DIM];
                        let mut r = a;
                        for d in 0..n {
                            im[d] = ft[d] + r % (test_tab.p + 1);
                            r /= test_tab.p + 1;
                        }
                        let i = crate::spline::flat_index(&im[..n], &self.layout.test_counts[..n]);
                        if rows.is_some_and(|m| !m[i]) {
                            continue;
                        }
                        let base = row_ptr[i];
                        for b in 0..nr {
                            let mut jm = [0; MAX_DIM];
                            let mut r = b;
                            for d in 0..n {
                                jm[d] = fr[d] + r % (trial_tab.p + 1);
                                r /= trial_tab.p + 1;
                            }
                            vals[base + self.layout.offset(&im, &jm)] += lm[a * nr + b];
                        }
                    }
                }
            }
        }
        Ok(mat)
    }
}

/// Convenience wrapper: full assembly of `form` on one space.
pub fn assemble_full(form: Form, space: &DiscreteSpace, geometry: &GeometryMap) -> Result<CsrMatrix> {
    Assembler::new(form, space, space, geometry)?.assemble_full()
}

/// Load vector `F_i = int f(x) N_i(x) dx`, with `g` Gauss points per
/// direction (default `p + 1`).
pub fn assemble_rhs(
    space: &DiscreteSpace,
    geometry: &GeometryMap,
    f: &(dyn Fn(&[f64]) -> f64 + Sync),
    g: Option<usize>,
) -> Result<Vec<f64>> {
    let g = g.unwrap_or(space.degree() + 1);
    let integ = Integrator::new(geometry, &[(&space.space, &space.weights, 0)], g, 1)?;
    let n = space.dim();
    let ne = integ.element_count();
    let elements: Vec<usize> = (0..ne).collect();
    let locals: Vec<Result<Vec<(usize, f64)>>> = elements
        .par_chunks(CHUNK)
        .map(|chunk| {
            let mut sc = integ.scratch();
            let mut out = Vec::new();
            for &ef in chunk {
                let e = integ.element_multi(ef);
                let len = integ.spaces[0].local_len(n);
                let mut loc = vec![0.0; len];
                let mut idx = Vec::new();
                for qf in 0..integ.qp_count() {
                    let geo = integ.eval_qp(&e, qf, &mut sc, false)?;
                    let fv = f(&geo.x[..n]) * geo.wdet;
                    for a in 0..len {
                        loc[a] += fv * sc.phys[0].values[a];
                    }
                    if idx.is_empty() {
                        idx = sc.lbs[0].indices.clone();
                    }
                }
                out.extend(idx.into_iter().zip(loc));
            }
            Ok(out)
        })
        .collect();
    let mut rhs = vec![0.0; space.len()];
    for l in locals {
        for (i, v) in l? {
            rhs[i] += v;
        }
    }
    Ok(rhs)
}

/// Reduced system after eliminating prescribed degrees of freedom.
#[derive(Clone, Debug)]
pub struct DirichletSystem {
    pub matrix: CsrMatrix,
    pub rhs: Vec<f64>,
    pub free: Vec<usize>,
    pub fixed: Vec<usize>,
    pub fixed_values: Vec<f64>,
    size: usize,
}

impl DirichletSystem {
    /// Scatter free and fixed values back into a full coefficient vector.
    pub fn expand(&self, free_values: &[f64]) -> Vec<f64> {
        let mut u = vec![0.0; self.size];
        for (&i, &v) in self.free.iter().zip(free_values) {
            u[i] = v;
        }
        for (&i, &v) in self.fixed.iter().zip(&self.fixed_values) {
            u[i] = v;
        }
        u
    }
}

/// Eliminate `fixed` dofs with values `values`: returns `A_II` and
/// `b_I - A_ID u_D`.
pub fn apply_dirichlet(a: &CsrMatrix, rhs: &[f64], fixed: &[usize], values: &[f64]) -> Result<DirichletSystem> {
    let n = a.nrows();
    if fixed.len() != values.len() || rhs.len() != n || a.ncols() != n {
        return Err(Error::Dimension("Dirichlet data does not match the system".into()));
    }
    let mut is_fixed = vec![false; n];
    let mut uval = vec![0.0; n];
    for (&i, &v) in fixed.iter().zip(values) {
        if i >= n {
            return Err(Error::Index(format!("dof {i} outside 0..{n}")));
        }
        is_fixed[i] = true;
        uval[i] = v;
    }
    let free: Vec<usize> = (0..n).filter(|&i| !is_fixed[i]).collect();
    let mut fixed_sorted: Vec<(usize, f64)> = fixed.iter().copied().zip(values.iter().copied()).collect();
    fixed_sorted.sort_by_key(|e| e.0);
    fixed_sorted.dedup_by_key(|e| e.0);
    let matrix = a.submatrix(&free, &free);
    let reduced: Vec<f64> = free
        .iter()
        .map(|&i| {
            let (c, v) = a.row(i);
            let mut s = rhs[i];
            for (&j, &aij) in c.iter().zip(v) {
                if is_fixed[j] {
                    s -= aij * uval[j];
                }
            }
            s
        })
        .collect();
    Ok(DirichletSystem {
        matrix,
        rhs: reduced,
        free,
        fixed: fixed_sorted.iter().map(|e| e.0).collect(),
        fixed_values: fixed_sorted.iter().map(|e| e.1).collect(),
        size: n,
    })
}

/// Boundary dofs of `space` and coefficients interpolating `g` on every face.
///
/// On each face the trace basis is the tensor basis of the remaining
/// directions; `g W` is interpolated at its Greville points with B-splines and
/// divided by the weights, which is exact interpolation in the NURBS trace.
pub fn boundary_values(
    space: &DiscreteSpace,
    geometry: &GeometryMap,
    g: &dyn Fn(&[f64]) -> f64,
) -> Result<(Vec<usize>, Vec<f64>)> {
    let n = space.dim();
    let sp = &space.space;
    let counts = sp.counts();
    let mut values = vec![f64::NAN; sp.len()];
    let w = space.weights.values();
    for d in 0..n {
        for side in [0usize, 1] {
            let other: Vec<usize> = (0..n).filter(|&k| k != d).collect();
            let fixed_idx = if side == 0 { 0 } else { counts[d] - 1 };
            let grev: Vec<Vec<f64>> = other
                .iter()
                .map(|&k| (0..counts[k]).map(|c| sp.dir(k).greville(c)).collect())
                .collect();
            let shape: Vec<usize> = other.iter().map(|&k| counts[k]).collect();
            let total: usize = shape.iter().product();
            let mut data = vec![0.0; total];
            let mut gidx = vec![0usize; total];
            for (s, slot) in data.iter_mut().enumerate() {
                let mut r = s;
                let mut xhat = vec![0.0; n];
                let mut multi = [0; MAX_DIM];
                xhat[d] = side as f64;
                multi[d] = fixed_idx;
                for (o, &k) in other.iter().enumerate() {
                    let c = r % shape[o];
                    r /= shape[o];
                    xhat[k] = grev[o][c];
                    multi[k] = c;
                }
                let gi = sp.flat(&multi[..n]);
                gidx[s] = gi;
                let x = geometry.eval(&xhat)?;
                let big_w = if space.weights.is_rational() {
                    let b = sp.eval(&xhat, 0)?;
                    b.indices.iter().zip(&b.values).map(|(&i, v)| w[i] * v).sum()
                } else {
                    1.0
                };
                *slot = g(&x) * big_w;
            }
            let mut shape_m = shape.clone();
            for (o, &k) in other.iter().enumerate() {
                let kv = sp.dir(k);
                let ip = Interpolant1d::with_knots(kv.knots().to_vec(), kv.degree(), &grev[o])?;
                let len = shape_m[o];
                data = map_lines(&data, &mut shape_m, o, len, |line, out| {
                    out.copy_from_slice(line);
                    ip.solve_in_place(out);
                });
            }
            for (s, &gi) in gidx.iter().enumerate() {
                let scale = if space.weights.is_rational() { w[gi] } else { 1.0 };
                values[gi] = data[s] / scale;
            }
        }
    }
    let fixed: Vec<usize> = (0..sp.len()).filter(|&i| !values[i].is_nan()).collect();
    let vals = fixed.iter().map(|&i| values[i]).collect();
    Ok((fixed, vals))
}

#[cfg(test)]
mod tests;
