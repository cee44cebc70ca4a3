//! Sparse SPD solves, generalized symmetric eigenproblems and the bordered
//! Stokes system.

use faer::linalg::solvers::Solve;
use faer::sparse::{SparseColMat, Triplet};
use faer::{Mat, MatMut, Par, Side};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::sparse::CsrMatrix;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Method {
    Direct,
    ConjugateGradient,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Preconditioner {
    None,
    Diagonal,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SolveOptions {
    pub method: Method,
    pub tolerance: f64,
    pub max_iterations: usize,
    pub preconditioner: Preconditioner,
}

impl Default for SolveOptions {
    fn default() -> Self {
        Self { method: Method::Direct, tolerance: 1e-10, max_iterations: 20_000, preconditioner: Preconditioner::Diagonal }
    }
}

impl SolveOptions {
    pub fn cg() -> Self {
        Self { method: Method::ConjugateGradient, ..Self::default() }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.tolerance > 0.0 && self.tolerance < 1.0) {
            return Err(Error::Invalid(format!("solver tolerance {} outside (0, 1)", self.tolerance)));
        }
        if self.max_iterations == 0 {
            return Err(Error::Invalid("max_iterations must be at least 1".into()));
        }
        Ok(())
    }
}

/// Iteration count and final relative residual of a solve.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct SolveStats {
    pub iterations: usize,
    pub residual: f64,
}

fn to_faer(a: &CsrMatrix) -> Result<SparseColMat<usize, f64>> {
    let mut t = Vec::with_capacity(a.nnz());
    for i in 0..a.nrows() {
        let (cols, vals) = a.row(i);
        for (&j, &v) in cols.iter().zip(vals) {
            t.push(Triplet::new(i, j, v));
        }
    }
    SparseColMat::try_new_from_triplets(a.nrows(), a.ncols(), &t).map_err(|e| Error::Numerical(format!("sparse matrix conversion: {e:?}")))
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn relative_residual(a: &CsrMatrix, x: &[f64], b: &[f64]) -> f64 {
    let r: Vec<f64> = a.mul_vec(x).iter().zip(b).map(|(ax, bi)| bi - ax).collect();
    let nb = norm(b);
    if nb == 0.0 {
        norm(&r)
    } else {
        norm(&r) / nb
    }
}

/// Sparse Cholesky factor of an SPD matrix.
pub struct SpdFactor {
    n: usize,
    llt: faer::sparse::linalg::solvers::Llt<usize, f64>,
}

impl SpdFactor {
    pub fn new(a: &CsrMatrix) -> Result<Self> {
        if a.nrows() != a.ncols() {
            return Err(Error::Dimension(format!("{}x{} matrix is not square", a.nrows(), a.ncols())));
        }
        let m = to_faer(a)?;
        let llt = m.sp_cholesky(Side::Lower).map_err(|_| Error::NotPositiveDefinite)?;
        Ok(Self { n: a.nrows(), llt })
    }

    pub fn solve_in_place(&self, x: &mut [f64]) {
        assert_eq!(x.len(), self.n);
        self.llt.solve_in_place(MatMut::from_column_major_slice_mut(x, self.n, 1));
    }
}

/// Solve `A x = b` for symmetric positive definite `A`.
pub fn solve_spd(a: &CsrMatrix, b: &[f64], opts: &SolveOptions) -> Result<Vec<f64>> {
    solve_spd_with_stats(a, b, opts).map(|(x, _)| x)
}

pub fn solve_spd_with_stats(a: &CsrMatrix, b: &[f64], opts: &SolveOptions) -> Result<(Vec<f64>, SolveStats)> {
    opts.validate()?;
    if a.nrows() != a.ncols() || b.len() != a.nrows() {
        return Err(Error::Dimension(format!("{}x{} system with right-hand side of length {}", a.nrows(), a.ncols(), b.len())));
    }
    match opts.method {
        Method::Direct => {
            let f = SpdFactor::new(a)?;
            let mut x = b.to_vec();
            f.solve_in_place(&mut x);
            if x.iter().any(|v| !v.is_finite()) {
                return Err(Error::NotPositiveDefinite);
            }
            let residual = relative_residual(a, &x, b);
            Ok((x, SolveStats { iterations: 1, residual }))
        }
        Method::ConjugateGradient => conjugate_gradient(a, b, opts),
    }
}

fn conjugate_gradient(a: &CsrMatrix, b: &[f64], opts: &SolveOptions) -> Result<(Vec<f64>, SolveStats)> {
    let n = b.len();
    let mut x = vec![0.0; n];
    let nb = norm(b);
    if nb == 0.0 {
        return Ok((x, SolveStats::default()));
    }
    let inv_diag: Vec<f64> = match opts.preconditioner {
        Preconditioner::None => vec![1.0; n],
        Preconditioner::Diagonal => (0..n)
            .map(|i| {
                let d = a.get(i, i);
                if d > 0.0 {
                    Ok(1.0 / d)
                } else {
                    Err(Error::NotPositiveDefinite)
                }
            })
            .collect::<Result<_>>()?,
    };
    let mut r = b.to_vec();
    let mut z: Vec<f64> = r.iter().zip(&inv_diag).map(|(r, d)| r * d).collect();
    let mut p = z.clone();
    let mut rz = dot(&r, &z);
    let mut ap = vec![0.0; n];
    for it in 1..=opts.max_iterations {
        a.mul_vec_into(&p, &mut ap);
        let pap = dot(&p, &ap);
        if !(pap > 0.0) {
            return Err(Error::NotPositiveDefinite);
        }
        let alpha = rz / pap;
        for i in 0..n {
            x[i] += alpha * p[i];
            r[i] -= alpha * ap[i];
        }
        let res = norm(&r) / nb;
        if res <= opts.tolerance {
            return Ok((x, SolveStats { iterations: it, residual: res }));
        }
        for i in 0..n {
            z[i] = r[i] * inv_diag[i];
        }
        let rz_new = dot(&r, &z);
        let beta = rz_new / rz;
        rz = rz_new;
        for i in 0..n {
            p[i] = z[i] + beta * p[i];
        }
    }
    Err(Error::NoConvergence { iterations: opts.max_iterations, residual: norm(&r) / nb })
}

/// Eigenpairs in ascending order; `vectors[k]` is `M`-normalized.
#[derive(Clone, Debug, Default)]
pub struct EigenPairs {
    pub values: Vec<f64>,
    pub vectors: Vec<Vec<f64>>,
}

/// Dimension below which the generalized eigenproblem is solved densely.
pub const DENSE_EIGEN_LIMIT: usize = 2000;

/// The `k` smallest eigenpairs of `A v = lambda M v`.
///
/// Small problems are reduced with a Cholesky factor of `M` and solved
/// densely; larger ones use shift-invert Lanczos in the `M` inner product.
pub fn solve_generalized_eig(a: &CsrMatrix, m: &CsrMatrix, k: usize) -> Result<EigenPairs> {
    let n = a.nrows();
    if a.ncols() != n || m.nrows() != n || m.ncols() != n {
        return Err(Error::Dimension("eigenproblem matrices must be square and of equal size".into()));
    }
    if k == 0 || k > n {
        return Err(Error::Invalid(format!("requested {k} eigenpairs of a {n}-dimensional problem")));
    }
    if n < DENSE_EIGEN_LIMIT {
        dense_generalized_eig(a, m, k)
    } else {
        lanczos_generalized_eig(a, m, k, 0x5eed)
    }
}

fn dense(a: &CsrMatrix) -> Mat<f64> {
    let mut d = Mat::zeros(a.nrows(), a.ncols());
    for i in 0..a.nrows() {
        let (cols, vals) = a.row(i);
        for (&j, &v) in cols.iter().zip(vals) {
            d[(i, j)] = v;
        }
    }
    d
}

/// Dense reference solver: all `k` smallest pairs via `L^-1 A L^-T`.
pub fn dense_generalized_eig(a: &CsrMatrix, m: &CsrMatrix, k: usize) -> Result<EigenPairs> {
    let n = a.nrows();
    let md = dense(m);
    let llt = md.llt(Side::Lower).map_err(|_| Error::NotPositiveDefinite)?;
    let l = llt.L();
    let mut x = dense(a);
    faer::linalg::triangular_solve::solve_lower_triangular_in_place(l, x.as_mut(), Par::Seq);
    let mut c = x.transpose().to_owned();
    faer::linalg::triangular_solve::solve_lower_triangular_in_place(l, c.as_mut(), Par::Seq);
    // symmetrize against round-off
    let cs = Mat::from_fn(n, n, |i, j| 0.5 * (c[(i, j)] + c[(j, i)]));
    let evd = cs.self_adjoint_eigen(Side::Lower).map_err(|e| Error::Numerical(format!("dense eigensolver: {e:?}")))?;
    let mut u = evd.U().subcols(0, k).to_owned();
    faer::linalg::triangular_solve::solve_upper_triangular_in_place(l.transpose(), u.as_mut(), Par::Seq);
    let s = evd.S();
    let values: Vec<f64> = (0..k).map(|i| s[i]).collect();
    let vectors: Vec<Vec<f64>> = (0..k).map(|j| (0..n).map(|i| u[(i, j)]).collect()).collect();
    Ok(EigenPairs { values, vectors })
}

/// Shift-invert Lanczos (shift 0) in the `M` inner product with full
/// reorthogonalization. The start vector comes from a seeded generator.
pub fn lanczos_generalized_eig(a: &CsrMatrix, m: &CsrMatrix, k: usize, seed: u64) -> Result<EigenPairs> {
    let n = a.nrows();
    let fac = SpdFactor::new(a)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut v0: Vec<f64> = (0..n).map(|_| rng.random::<f64>() - 0.5).collect();
    let mut mv = m.mul_vec(&v0);
    let nrm = dot(&v0, &mv).sqrt();
    if !(nrm > 0.0) {
        return Err(Error::NotPositiveDefinite);
    }
    v0.iter_mut().for_each(|x| *x /= nrm);
    mv.iter_mut().for_each(|x| *x /= nrm);
    let max_dim = n.min((4 * k + 40).max(80)).min(1500);
    let mut basis: Vec<Vec<f64>> = vec![v0];
    let mut mbasis: Vec<Vec<f64>> = vec![mv];
    let mut alpha: Vec<f64> = Vec::new();
    let mut beta: Vec<f64> = Vec::new();
    let check_every = 10;
    loop {
        let j = basis.len() - 1;
        let mut w = mbasis[j].clone();
        fac.solve_in_place(&mut w);
        let aj = dot(&w, &mbasis[j]);
        alpha.push(aj);
        // full reorthogonalization, twice
        for _ in 0..2 {
            for (v, mvv) in basis.iter().zip(&mbasis) {
                let c = dot(&w, mvv);
                for (wi, vi) in w.iter_mut().zip(v) {
                    *wi -= c * vi;
                }
            }
        }
        let mw = m.mul_vec(&w);
        let bj = dot(&w, &mw).max(0.0).sqrt();
        let dim = alpha.len();
        let exhausted = bj <= 1e-14 * aj.abs().max(1e-300) || dim >= max_dim;
        if dim >= k && (dim.is_multiple_of(check_every) || exhausted) {
            if let Some(pairs) = ritz_pairs(a, m, &basis, &alpha, &beta, bj, k, exhausted)? {
                return Ok(pairs);
            }
            if exhausted {
                return Err(Error::NoConvergence { iterations: dim, residual: f64::NAN });
            }
        }
        if exhausted {
            return Err(Error::NoConvergence { iterations: dim, residual: f64::NAN });
        }
        beta.push(bj);
        basis.push(w.iter().map(|x| x / bj).collect());
        mbasis.push(mw.iter().map(|x| x / bj).collect());
    }
}

#[allow(clippy::too_many_arguments)]
fn ritz_pairs(
    a: &CsrMatrix,
    m: &CsrMatrix,
    basis: &[Vec<f64>],
    alpha: &[f64],
    beta: &[f64],
    b_last: f64,
    k: usize,
    force: bool,
) -> Result<Option<EigenPairs>> {
    let d = alpha.len();
    let t = Mat::from_fn(d, d, |i, j| {
        if i == j {
            alpha[i]
        } else if i == j + 1 {
            beta[j]
        } else if j == i + 1 {
            beta[i]
        } else {
            0.0
        }
    });
    let evd = t.self_adjoint_eigen(Side::Lower).map_err(|e| Error::Numerical(format!("tridiagonal eigensolver: {e:?}")))?;
    let (s, u) = (evd.S(), evd.U());
    // largest theta first -> smallest lambda
    for r in 0..k {
        let c = d - 1 - r;
        let theta = s[c];
        if !(theta > 0.0) {
            return Err(Error::NotPositiveDefinite);
        }
        if !force && (b_last * u[(d - 1, c)]).abs() > 1e-11 * theta {
            return Ok(None);
        }
    }
    let n = basis[0].len();
    let mut pairs = EigenPairs::default();
    for r in 0..k {
        let c = d - 1 - r;
        let lambda = 1.0 / s[c];
        let mut x = vec![0.0; n];
        for (j, v) in basis.iter().enumerate() {
            let cj = u[(j, c)];
            for (xi, vi) in x.iter_mut().zip(v) {
                *xi += cj * vi;
            }
        }
        let mx = m.mul_vec(&x);
        let nm = dot(&x, &mx).sqrt();
        x.iter_mut().for_each(|v| *v /= nm);
        let ax = a.mul_vec(&x);
        let res: Vec<f64> = ax.iter().zip(&mx).map(|(av, mv)| av - lambda * mv / nm).collect();
        if norm(&res) > 1e-8 * norm(&ax) {
            if force {
                return Err(Error::NoConvergence { iterations: d, residual: norm(&res) / norm(&ax) });
            }
            return Ok(None);
        }
        pairs.values.push(lambda);
        pairs.vectors.push(x);
    }
    Ok(Some(pairs))
}

/// Velocity-pressure saddle point system with Dirichlet velocity data.
///
/// `a` is the full velocity block, `b` the divergence block
/// (pressure rows, velocity columns) and `mean` the pressure mean functional
/// `c_i = int N_i`.
pub struct StokesSystem<'a> {
    pub a: &'a CsrMatrix,
    pub b: &'a CsrMatrix,
    pub mean: &'a [f64],
    pub rhs: &'a [f64],
    pub fixed: &'a [usize],
    pub fixed_values: &'a [f64],
}

#[derive(Clone, Debug)]
pub struct StokesSolution {
    pub velocity: Vec<f64>,
    pub pressure: Vec<f64>,
    pub momentum_residual: f64,
    pub continuity_residual: f64,
}

/// Discrete boundary flux `1^T B u_g` and its scale `sum |(1^T B)_j u_j|`.
pub fn boundary_flux(b: &CsrMatrix, fixed: &[usize], values: &[f64]) -> (f64, f64) {
    let colsum = column_sums(b);
    let mut flux = 0.0;
    let mut scale = 0.0;
    for (&j, &v) in fixed.iter().zip(values) {
        flux += colsum[j] * v;
        scale += (colsum[j] * v).abs();
    }
    (flux, scale)
}

fn column_sums(b: &CsrMatrix) -> Vec<f64> {
    let mut s = vec![0.0; b.ncols()];
    for i in 0..b.nrows() {
        let (cols, vals) = b.row(i);
        for (&j, &v) in cols.iter().zip(vals) {
            s[j] += v;
        }
    }
    s
}

/// Remove the discrete flux of interpolated boundary data by the smallest
/// correction along the flux functional.
pub fn make_flux_free(b: &CsrMatrix, fixed: &[usize], values: &mut [f64]) {
    let colsum = column_sums(b);
    let d: Vec<f64> = fixed.iter().map(|&j| colsum[j]).collect();
    let dd = dot(&d, &d);
    if dd == 0.0 {
        return;
    }
    let flux = dot(&d, values);
    for (v, di) in values.iter_mut().zip(&d) {
        *v -= flux / dd * di;
    }
}

/// Solve the Stokes system with zero-mean pressure.
///
/// The mean is enforced through one Lagrange multiplier row; the bordered
/// matrix is factored with sparse LU.
pub fn solve_stokes(sys: &StokesSystem) -> Result<StokesSolution> {
    let nv = sys.a.nrows();
    let np = sys.b.nrows();
    if sys.a.ncols() != nv || sys.b.ncols() != nv || sys.mean.len() != np || sys.rhs.len() != nv || sys.fixed.len() != sys.fixed_values.len() {
        return Err(Error::Dimension("inconsistent Stokes block sizes".into()));
    }
    let (flux, scale) = boundary_flux(sys.b, sys.fixed, sys.fixed_values);
    if flux.abs() > 1e-8 * scale.max(f64::MIN_POSITIVE) {
        return Err(Error::Invalid(format!("boundary data carries a net flux of {flux:e}")));
    }
    let mut is_fixed = vec![false; nv];
    for &j in sys.fixed {
        if j >= nv {
            return Err(Error::Index(format!("fixed velocity dof {j} of {nv}")));
        }
        is_fixed[j] = true;
    }
    let mut ug = vec![0.0; nv];
    for (&j, &v) in sys.fixed.iter().zip(sys.fixed_values) {
        ug[j] = v;
    }
    // fixed rows become identity rows; their columns move to the right-hand side
    let n = nv + np + 1;
    let mut t = Vec::with_capacity(sys.a.nnz() + 2 * sys.b.nnz() + 2 * np + nv);
    let mut rhs = vec![0.0; n];
    for i in 0..nv {
        if is_fixed[i] {
            t.push(Triplet::new(i, i, 1.0));
            rhs[i] = ug[i];
            continue;
        }
        rhs[i] = sys.rhs[i];
        let (cols, vals) = sys.a.row(i);
        for (&j, &v) in cols.iter().zip(vals) {
            if is_fixed[j] {
                rhs[i] -= v * ug[j];
            } else {
                t.push(Triplet::new(i, j, v));
            }
        }
    }
    for q in 0..np {
        let (cols, vals) = sys.b.row(q);
        for (&j, &v) in cols.iter().zip(vals) {
            if is_fixed[j] {
                rhs[nv + q] -= v * ug[j];
            } else {
                t.push(Triplet::new(nv + q, j, v));
                t.push(Triplet::new(j, nv + q, v));
            }
        }
        t.push(Triplet::new(nv + q, n - 1, sys.mean[q]));
        t.push(Triplet::new(n - 1, nv + q, sys.mean[q]));
    }
    let k = SparseColMat::<usize, f64>::try_new_from_triplets(n, n, &t).map_err(|e| Error::Numerical(format!("{e:?}")))?;
    let lu = k.sp_lu().map_err(|e| Error::Numerical(format!("saddle point factorization: {e:?}")))?;
    let mut x = rhs.clone();
    lu.solve_in_place(MatMut::from_column_major_slice_mut(&mut x, n, 1));
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::Numerical("singular saddle point system".into()));
    }
    let velocity = x[..nv].to_vec();
    let pressure = x[nv..nv + np].to_vec();
    // residuals of the original equations on free rows
    let au = sys.a.mul_vec(&velocity);
    let btp = sys.b.transpose().mul_vec(&pressure);
    let mut rm = 0.0;
    let mut fm = 0.0;
    for i in 0..nv {
        if !is_fixed[i] {
            rm += (sys.rhs[i] - au[i] - btp[i]).powi(2);
            fm += sys.rhs[i].powi(2) + au[i].powi(2);
        }
    }
    let bu = sys.b.mul_vec(&velocity);
    let lambda = x[n - 1];
    let rc = bu.iter().zip(sys.mean).map(|(r, c)| (r + lambda * c).powi(2)).sum::<f64>().sqrt();
    let bscale = sys.b.max_abs() * norm(&velocity).max(f64::MIN_POSITIVE);
    Ok(StokesSolution {
        velocity,
        pressure,
        momentum_residual: rm.sqrt() / fm.sqrt().max(f64::MIN_POSITIVE),
        continuity_residual: rc / bscale,
    })
}
