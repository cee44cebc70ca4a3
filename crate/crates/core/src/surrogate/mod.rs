//! Interpolated stencil surrogates for the interior of Galerkin matrices.
//!
//! In the interior of the parameter domain, the entries `A_ij` of a row are
//! values of smooth stencil functions `Phi_delta` at the support midpoint of
//! basis function `i`, one function per offset `delta = j - i`. Only a sparse
//! lattice of rows is assembled by quadrature; the remaining interior rows are
//! filled by tensor-product spline interpolation of the sampled stencils.

mod stencil;

use std::time::Instant;

use rayon::prelude::*;

use crate::assembly::{Assembler, DiscreteSpace, Form, Layout};
use crate::error::{Error, Result};
use crate::sparse::CsrMatrix;
use crate::spline::interp::{tensor_eval, tensor_solve, EvalPlan, Interpolant1d};
use crate::spline::{multi_index, KnotVector, TensorSpace, MAX_DIM};

pub use stencil::stencil_function;

/// How the interpolated part of the matrix is made consistent.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SymmetryMode {
    /// Interpolate every entry of the interior rows.
    General,
    /// Interpolate `i <= j` and mirror, giving an exactly symmetric matrix.
    Symmetric,
    /// Symmetric, and the diagonal of interpolated rows is minus the sum of
    /// the off-diagonal entries, so constants stay in the kernel.
    KernelPreserving,
}

impl SymmetryMode {
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "general" => Ok(Self::General),
            "symmetric" => Ok(Self::Symmetric),
            "kernel" | "kernel_preserving" => Ok(Self::KernelPreserving),
            _ => Err(Error::Invalid(format!("unknown symmetry mode `{s}`"))),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Self::General => "general",
            Self::Symmetric => "symmetric",
            Self::KernelPreserving => "kernel",
        }
    }
}

/// Choice of the sampling distance `M` (in elements).
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum SamplingStrategy {
    Fixed(usize),
    /// `M(h) = max(1, floor(c h^((p - q + beta) / (q + 1))))`.
    MeshDependent { c: f64, beta: f64 },
}

impl SamplingStrategy {
    pub fn sampling_distance(&self, p: usize, q: usize, h: f64) -> Result<usize> {
        match *self {
            Self::Fixed(0) => Err(Error::Invalid("sampling distance M must be at least 1".into())),
            Self::Fixed(m) => Ok(m),
            Self::MeshDependent { c, beta } => mesh_dependent_m(c, beta, p, q, h),
        }
    }
}

/// Mesh-dependent sampling distance; requires `q > p` and `c >= 0`.
pub fn mesh_dependent_m(c: f64, beta: f64, p: usize, q: usize, h: f64) -> Result<usize> {
    if q <= p {
        return Err(Error::Invalid(format!("mesh-dependent sampling needs q > p (q = {q}, p = {p})")));
    }
    if !(c >= 0.0) || !(h > 0.0) || !(beta >= 0.0) || !beta.is_finite() {
        return Err(Error::Invalid("mesh-dependent sampling needs c >= 0, beta >= 0 and h > 0".into()));
    }
    let e = (p as f64 - q as f64 + beta) / (q as f64 + 1.0);
    let m = (c * h.powf(e)).floor();
    Ok(if m < 1.0 { 1 } else { m as usize })
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SurrogateConfig {
    /// Interpolation degree.
    pub q: usize,
    pub strategy: SamplingStrategy,
    pub mode: SymmetryMode,
}

/// Summary of one surrogate (or standard) assembly.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct AssemblyReport {
    pub n_dofs: usize,
    pub p: usize,
    pub q: usize,
    /// Interpolation degree actually used per direction.
    pub q_used: Vec<usize>,
    pub m_sampling: usize,
    /// Sampling distance in parameter units, `M h`.
    pub big_h: f64,
    pub quad_entries: usize,
    pub interp_entries: usize,
    pub quad_fraction: f64,
    pub quadrature_rows: usize,
    pub active_elements: usize,
    pub total_elements: usize,
    pub assembly_seconds: f64,
    /// True when no interior rows exist and the matrix is a full assembly.
    pub fallback_full: bool,
    pub flags: Vec<String>,
}

impl AssemblyReport {
    pub const CSV_HEADER: &'static str = "N,p,q,M,H,quad_entries,interp_entries,quad_fraction,active_elements,assembly_seconds";

    pub fn csv_row(&self) -> String {
        format!(
            "{},{},{},{},{:e},{},{},{:e},{},{:e}",
            self.n_dofs,
            self.p,
            self.q,
            self.m_sampling,
            self.big_h,
            self.quad_entries,
            self.interp_entries,
            self.quad_fraction,
            self.active_elements,
            self.assembly_seconds
        )
    }
}

/// Per-direction stencil structure of a (test, trial) pair.
///
/// For a cardinal test function `c`, the coupled trial functions are
/// `ratio * c + k` for keys `k` in `k_lo..=k_hi`. A test index is interior
/// when it is cardinal and all coupled trial functions are cardinal; these are
/// exactly the rows whose midpoint lies in the common domain of all stencil
/// functions.
#[derive(Clone, Debug)]
pub struct StencilLayout {
    pub n: usize,
    pub equal_spaces: bool,
    pub ratio: [usize; MAX_DIM],
    pub k_lo: [i64; MAX_DIM],
    pub k_hi: [i64; MAX_DIM],
    /// Interior test indices `lo..=hi` per direction (`None` if empty).
    pub interior: Vec<Option<(usize, usize)>>,
    test_dirs: Vec<KnotVector>,
}

impl StencilLayout {
    pub fn new(test: &TensorSpace, trial: &TensorSpace) -> Result<Self> {
        let layout = Layout::new(test, trial)?;
        let n = test.dim();
        let mut ratio = [1; MAX_DIM];
        let mut k_lo = [0; MAX_DIM];
        let mut k_hi = [0; MAX_DIM];
        let mut interior = Vec::with_capacity(n);
        for d in 0..n {
            let (t, r) = (test.dir(d), trial.dir(d));
            if r.spans() % t.spans() != 0 {
                return Err(Error::Invalid("trial mesh must refine the test mesh".into()));
            }
            ratio[d] = r.spans() / t.spans();
            let card = t.cardinal_range();
            if card.is_empty() {
                interior.push(None);
                continue;
            }
            // keys are the same for every cardinal row; read them off the middle one
            let c = card.start + card.len() / 2;
            k_lo[d] = layout.lo[d][c] as i64 - (ratio[d] * c) as i64;
            k_hi[d] = layout.hi[d][c] as i64 - (ratio[d] * c) as i64;
            let rows: Vec<usize> = card
                .filter(|&c| {
                    (k_lo[d]..=k_hi[d]).all(|k| {
                        let j = (ratio[d] * c) as i64 + k;
                        j >= 0 && r.is_cardinal(j as usize)
                    })
                })
                .collect();
            interior.push(rows.first().map(|&lo| (lo, *rows.last().unwrap())));
        }
        let equal_spaces = test == trial;
        Ok(Self { n, equal_spaces, ratio, k_lo, k_hi, interior, test_dirs: test.dirs().to_vec() })
    }

    pub fn is_empty(&self) -> bool {
        self.interior.iter().any(|r| r.is_none())
    }

    /// Interior box as parameter interval per direction (midpoints of the end rows).
    pub fn tilde_domain(&self) -> Option<Vec<(f64, f64)>> {
        self.interior
            .iter()
            .zip(&self.test_dirs)
            .map(|(r, kv)| r.map(|(lo, hi)| (kv.midpoint(lo), kv.midpoint(hi))))
            .collect()
    }

    /// All offsets, colex over the key ranges.
    pub fn offsets(&self) -> Vec<[i64; MAX_DIM]> {
        let w: Vec<usize> = (0..self.n).map(|d| (self.k_hi[d] - self.k_lo[d] + 1) as usize).collect();
        let total: usize = w.iter().product();
        (0..total)
            .map(|s| {
                let m = multi_index(s, &w);
                let mut k = [0i64; MAX_DIM];
                for d in 0..self.n {
                    k[d] = self.k_lo[d] + m[d] as i64;
                }
                k
            })
            .collect()
    }

    /// Offsets of the upper half `i <= j` (last nonzero component positive).
    pub fn half_offsets(&self) -> Vec<[i64; MAX_DIM]> {
        self.offsets().into_iter().filter(|k| is_upper(k, self.n)).collect()
    }

    /// Sampling lattice per direction: from the first interior index in
    /// steps of `m`, plus the last interior index if it was not hit.
    pub fn lattice(&self, m: usize) -> Result<Vec<Vec<usize>>> {
        if m == 0 {
            return Err(Error::Invalid("sampling distance M must be at least 1".into()));
        }
        self.interior
            .iter()
            .map(|r| {
                let (lo, hi) = r.ok_or_else(|| Error::Invalid("empty interior".into()))?;
                let mut v: Vec<usize> = (lo..=hi).step_by(m).collect();
                if *v.last().unwrap() != hi {
                    v.push(hi);
                }
                Ok(v)
            })
            .collect()
    }
}

/// Offsets `[-p, p]^n` of equal-space stencils, colex order.
pub fn build_offsets(p: usize, n: usize) -> Vec<[i64; MAX_DIM]> {
    let w = vec![2 * p + 1; n];
    let total: usize = w.iter().product();
    (0..total)
        .map(|s| {
            let m = multi_index(s, &w);
            let mut k = [0i64; MAX_DIM];
            for d in 0..n {
                k[d] = m[d] as i64 - p as i64;
            }
            k
        })
        .collect()
}

/// The half of `offsets` used by the symmetric modes.
pub fn half_offsets(offsets: &[[i64; MAX_DIM]], n: usize) -> Vec<[i64; MAX_DIM]> {
    offsets.iter().copied().filter(|k| is_upper(k, n)).collect()
}

/// Default mode for a form.
pub fn default_mode(form: Form) -> SymmetryMode {
    match form {
        Form::PoissonStiffness | Form::Biharmonic | Form::StokesVelocity { .. } => SymmetryMode::KernelPreserving,
        Form::Mass => SymmetryMode::Symmetric,
        Form::StokesDivergence { .. } => SymmetryMode::General,
    }
}

fn is_upper(k: &[i64; MAX_DIM], n: usize) -> bool {
    for d in (0..n).rev() {
        if k[d] != 0 {
            return k[d] > 0;
        }
    }
    true
}

/// Classification of matrix entries into quadrature and interpolated ones.
#[derive(Clone, Debug)]
pub struct Ownership {
    n: usize,
    mode: SymmetryMode,
    test_counts: [usize; MAX_DIM],
    /// Interior box per direction.
    lo: [usize; MAX_DIM],
    hi: [usize; MAX_DIM],
    /// Box whose rows have all neighbours interior. In general mode with
    /// equal spaces, interior rows outside it mix interpolated entries with
    /// quadrature entries of non-interior columns, so they are assembled too.
    inner_lo: [usize; MAX_DIM],
    inner_hi: [usize; MAX_DIM],
    equal_spaces: bool,
    sampled: Vec<Vec<bool>>,
}

impl Ownership {
    pub fn new(sl: &StencilLayout, test: &TensorSpace, lattice: &[Vec<usize>], mode: SymmetryMode) -> Self {
        let n = sl.n;
        let counts = test.counts();
        let mut lo = [0; MAX_DIM];
        let mut hi = [0; MAX_DIM];
        let mut inner_lo = [0; MAX_DIM];
        let mut inner_hi = [0; MAX_DIM];
        let mut sampled = Vec::with_capacity(n);
        for d in 0..n {
            let (a, b) = sl.interior[d].expect("non-empty interior");
            lo[d] = a;
            hi[d] = b;
            inner_lo[d] = (a as i64 - sl.k_lo[d]) as usize;
            inner_hi[d] = (b as i64 - sl.k_hi[d]).max(0) as usize;
            let mut s = vec![false; counts[d]];
            for &c in &lattice[d] {
                s[c] = true;
            }
            sampled.push(s);
        }
        Self { n, mode, test_counts: counts, lo, hi, inner_lo, inner_hi, equal_spaces: sl.equal_spaces, sampled }
    }

    fn in_box(&self, m: &[usize; MAX_DIM], lo: &[usize; MAX_DIM], hi: &[usize; MAX_DIM]) -> bool {
        (0..self.n).all(|d| m[d] >= lo[d] && m[d] <= hi[d])
    }

    /// Is every entry of row `i` (multi-index) computed by quadrature?
    pub fn is_quadrature_row(&self, m: &[usize; MAX_DIM]) -> bool {
        !self.in_box(m, &self.lo, &self.hi) || (0..self.n).all(|d| self.sampled[d][m[d]])
    }

    /// Is row `i` assembled by quadrature, at least in part?
    pub fn is_assembled_row(&self, m: &[usize; MAX_DIM]) -> bool {
        self.is_quadrature_row(m) || (self.mode == SymmetryMode::General && self.equal_spaces && !self.in_box(m, &self.inner_lo, &self.inner_hi))
    }

    /// Flags of the rows computed entirely by quadrature.
    pub fn row_mask(&self) -> Vec<bool> {
        self.mask(|m| self.is_quadrature_row(m))
    }

    /// Flags of the rows that need row-restricted assembly.
    pub fn assembled_row_mask(&self) -> Vec<bool> {
        self.mask(|m| self.is_assembled_row(m))
    }

    fn mask(&self, f: impl Fn(&[usize; MAX_DIM]) -> bool) -> Vec<bool> {
        let len: usize = self.test_counts[..self.n].iter().product();
        (0..len).map(|i| f(&multi_index(i, &self.test_counts[..self.n]))).collect()
    }

    /// Is entry `(i, j)` interpolated? Both indices are multi-indices; `jm`
    /// refers to the trial space.
    ///
    /// In general mode an entry of a non-quadrature row is interpolated when
    /// its column is interior as well. In the symmetric modes it is
    /// interpolated when neither row is a quadrature row; otherwise it is
    /// copied from the transposed quadrature entry.
    pub fn is_interpolated(&self, im: &[usize; MAX_DIM], jm: &[usize; MAX_DIM]) -> bool {
        if self.is_quadrature_row(im) {
            return false;
        }
        if !self.equal_spaces {
            return true;
        }
        match self.mode {
            SymmetryMode::General => self.in_box(jm, &self.lo, &self.hi),
            _ => !self.is_quadrature_row(jm),
        }
    }
}

/// Counts of quadrature and interpolated entries without assembling anything.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct EntryCounts {
    pub quad_entries: usize,
    pub interp_entries: usize,
    pub quadrature_rows: usize,
    pub rows: usize,
}

impl EntryCounts {
    pub fn quad_fraction(&self) -> f64 {
        self.quad_entries as f64 / (self.quad_entries + self.interp_entries) as f64
    }
}

/// Everything the builder needs to know before touching the matrix.
struct Plan {
    sl: StencilLayout,
    layout: Layout,
    own: Ownership,
    lattice: Vec<Vec<usize>>,
    m: usize,
    q_used: Vec<usize>,
    flags: Vec<String>,
}

fn plan(test: &TensorSpace, trial: &TensorSpace, form: Form, cfg: &SurrogateConfig) -> Result<Option<Plan>> {
    let sl = StencilLayout::new(test, trial)?;
    if cfg.mode != SymmetryMode::General && !(sl.equal_spaces && form.is_symmetric()) {
        return Err(Error::Invalid(format!("{} mode needs a symmetric form on equal spaces", cfg.mode.name())));
    }
    if cfg.mode == SymmetryMode::KernelPreserving && matches!(form, Form::Mass) {
        return Err(Error::Invalid("kernel-preserving mode needs constants in the kernel of the form".into()));
    }
    if cfg.q == 0 {
        return Err(Error::Invalid("interpolation degree q must be at least 1".into()));
    }
    let p = test.degree().max(trial.degree());
    let m = cfg.strategy.sampling_distance(p, cfg.q, test.dir(0).mesh_size())?;
    if sl.is_empty() {
        return Ok(None);
    }
    let lattice = sl.lattice(m)?;
    let mut flags = Vec::new();
    let q_used: Vec<usize> = lattice.iter().map(|l| cfg.q.min(l.len() - 1)).collect();
    if q_used.iter().any(|&q| q < cfg.q) {
        flags.push(format!("q lowered to {}: too few samples", q_used.iter().map(|q| q.to_string()).collect::<Vec<_>>().join("x")));
    }
    let own = Ownership::new(&sl, test, &lattice, cfg.mode);
    let layout = Layout::new(test, trial)?;
    Ok(Some(Plan { sl, layout, own, lattice, m, q_used, flags }))
}

/// Count quadrature and interpolated entries of the surrogate with the same
/// ownership rules as [`build_surrogate`], without any assembly.
pub fn count_entries(test: &TensorSpace, trial: &TensorSpace, form: Form, cfg: &SurrogateConfig) -> Result<EntryCounts> {
    let Some(pl) = plan(test, trial, form, cfg)? else {
        let layout = Layout::new(test, trial)?;
        let m = layout.empty_matrix(None);
        return Ok(EntryCounts { quad_entries: m.nnz(), interp_entries: 0, quadrature_rows: m.nrows(), rows: m.nrows() });
    };
    let n = pl.sl.n;
    let counts = pl.layout.test_counts;
    let rows = pl.layout.nrows();
    let mask = pl.own.row_mask();
    let mut c = EntryCounts { rows, ..Default::default() };
    c.quadrature_rows = mask.iter().filter(|&&q| q).count();
    for i in 0..rows {
        let im = multi_index(i, &counts[..n]);
        let mut lo = [0; MAX_DIM];
        let mut w = [1; MAX_DIM];
        for d in 0..n {
            lo[d] = pl.layout.lo[d][im[d]];
            w[d] = pl.layout.hi[d][im[d]] - lo[d] + 1;
        }
        let total: usize = w[..n].iter().product();
        if mask[i] {
            c.quad_entries += total;
            continue;
        }
        for k in 0..total {
            let mut jm = multi_index(k, &w[..n]);
            for d in 0..n {
                jm[d] += lo[d];
            }
            if pl.own.is_interpolated(&im, &jm) {
                c.interp_entries += 1;
            } else {
                c.quad_entries += 1;
            }
        }
    }
    Ok(c)
}

/// Assemble the surrogate matrix of `form` on (`test`, `trial`).
///
/// Rows that are sampled or lie outside the interior are assembled by
/// quadrature, as are entries whose column lies outside the interior. The
/// remaining entries are interpolated from the sampled stencils. When the interior is empty the full
/// matrix is assembled and `fallback_full` is set.
pub fn build_surrogate(
    form: Form,
    test: &DiscreteSpace,
    trial: &DiscreteSpace,
    geometry: &crate::geometry::GeometryMap,
    cfg: &SurrogateConfig,
) -> Result<(CsrMatrix, AssemblyReport)> {
    let t0 = Instant::now();
    let asm = Assembler::new(form, test, trial, geometry)?;
    build_with(&asm, test.space(), trial.space(), cfg, t0)
}

/// Like [`build_surrogate`] with a prepared assembler.
pub fn build_with_assembler(
    asm: &Assembler,
    test: &TensorSpace,
    trial: &TensorSpace,
    cfg: &SurrogateConfig,
) -> Result<(CsrMatrix, AssemblyReport)> {
    build_with(asm, test, trial, cfg, Instant::now())
}

fn build_with(asm: &Assembler, test: &TensorSpace, trial: &TensorSpace, cfg: &SurrogateConfig, t0: Instant) -> Result<(CsrMatrix, AssemblyReport)> {
    let form = asm.form();
    let p = test.degree().max(trial.degree());
    let h = test.dir(0).mesh_size();
    let mut report = AssemblyReport { n_dofs: test.len(), p, q: cfg.q, total_elements: asm.element_count(), ..Default::default() };
    let Some(pl) = plan(test, trial, form, cfg)? else {
        let m = asm.assemble_full()?;
        report.m_sampling = cfg.strategy.sampling_distance(p, cfg.q, h)?;
        report.big_h = report.m_sampling as f64 * h;
        report.quad_entries = m.nnz();
        report.quadrature_rows = m.nrows();
        report.quad_fraction = 1.0;
        report.active_elements = asm.element_count();
        report.fallback_full = true;
        report.flags.push("empty interior: full quadrature assembly".into());
        report.assembly_seconds = t0.elapsed().as_secs_f64();
        return Ok((m, report));
    };
    let n = pl.sl.n;
    let mask = pl.own.row_mask();
    let (partial, info) = asm.assemble_rows(&pl.own.assembled_row_mask())?;

    // sampled stencil values and their interpolants
    let offsets = if cfg.mode == SymmetryMode::General { pl.sl.offsets() } else { pl.sl.half_offsets() };
    let lat_shape: Vec<usize> = pl.lattice.iter().map(|l| l.len()).collect();
    let interps: Vec<Interpolant1d> = (0..n)
        .map(|d| {
            let pts: Vec<f64> = pl.lattice[d].iter().map(|&c| c as f64).collect();
            Interpolant1d::new(&pts, pl.q_used[d])
        })
        .collect::<Result<_>>()?;
    let boxes: Vec<(usize, usize)> = pl.sl.interior.iter().map(|r| r.unwrap()).collect();
    let plans: Vec<EvalPlan> = (0..n)
        .map(|d| {
            let t: Vec<f64> = (boxes[d].0..=boxes[d].1).map(|c| c as f64).collect();
            EvalPlan::new(&interps[d], &t)
        })
        .collect();
    let box_shape: Vec<usize> = boxes.iter().map(|b| b.1 - b.0 + 1).collect();
    let test_counts = pl.layout.test_counts;
    let trial_counts = pl.layout.trial_counts;
    let n_lat: usize = lat_shape.iter().product();
    let interp_refs: Vec<&Interpolant1d> = interps.iter().collect();
    let plan_refs: Vec<&EvalPlan> = plans.iter().collect();
    let evaluated: Vec<Result<Vec<f64>>> = offsets
        .par_iter()
        .map(|k| {
            let mut vals = vec![0.0; n_lat];
            for (s, v) in vals.iter_mut().enumerate() {
                let lm = multi_index(s, &lat_shape);
                let mut im = [0; MAX_DIM];
                let mut jm = [0; MAX_DIM];
                for d in 0..n {
                    im[d] = pl.lattice[d][lm[d]];
                    jm[d] = ((pl.sl.ratio[d] * im[d]) as i64 + k[d]) as usize;
                }
                let i = crate::spline::flat_index(&im[..n], &test_counts[..n]);
                let j = crate::spline::flat_index(&jm[..n], &trial_counts[..n]);
                *v = partial
                    .position(i, j)
                    .map(|pos| partial.values()[pos])
                    .ok_or_else(|| Error::Numerical(format!("stencil entry ({i}, {j}) missing from sampled row")))?;
            }
            let coef = tensor_solve(&interp_refs, &vals);
            Ok(tensor_eval(&plan_refs, &coef, &lat_shape))
        })
        .collect();
    let evaluated: Vec<Vec<f64>> = evaluated.into_iter().collect::<Result<_>>()?;
    let key_index = |k: &[i64; MAX_DIM]| -> Option<usize> { offsets.iter().position(|o| o[..n] == k[..n]) };
    // dense lookup from key to evaluated array
    let kw: Vec<usize> = (0..n).map(|d| (pl.sl.k_hi[d] - pl.sl.k_lo[d] + 1) as usize).collect();
    let ktotal: usize = kw.iter().product();
    let mut key_table = vec![usize::MAX; ktotal];
    for (s, slot) in key_table.iter_mut().enumerate() {
        let km = multi_index(s, &kw);
        let mut k = [0i64; MAX_DIM];
        for d in 0..n {
            k[d] = pl.sl.k_lo[d] + km[d] as i64;
        }
        if let Some(e) = key_index(&k) {
            *slot = e;
        }
    }
    let key_slot = |k: &[i64; MAX_DIM]| -> usize {
        let mut s = 0;
        let mut stride = 1;
        for d in 0..n {
            s += (k[d] - pl.sl.k_lo[d]) as usize * stride;
            stride *= kw[d];
        }
        key_table[s]
    };
    let box_pos = |m: &[usize; MAX_DIM]| -> usize {
        let mut s = 0;
        let mut stride = 1;
        for d in 0..n {
            s += (m[d] - boxes[d].0) * stride;
            stride *= box_shape[d];
        }
        s
    };

    let mut out = pl.layout.empty_matrix(None);
    let row_ptr = out.row_ptr().to_vec();
    let cols = out.col_idx().to_vec();
    let mut quad = 0usize;
    let mut interp = 0usize;
    {
        let vals = out.values_mut();
        for i in 0..pl.layout.nrows() {
            let im = multi_index(i, &test_counts[..n]);
            let range = row_ptr[i]..row_ptr[i + 1];
            if mask[i] {
                let (_, pv) = partial.row(i);
                vals[range.clone()].copy_from_slice(pv);
                quad += range.len();
                continue;
            }
            let mut any_interp = false;
            let mut diag_pos = None;
            for pos in range.clone() {
                let j = cols[pos];
                let jm = multi_index(j, &trial_counts[..n]);
                if !pl.own.is_interpolated(&im, &jm) {
                    // general mode assembles row i; the symmetric modes copy from row j
                    vals[pos] = if cfg.mode == SymmetryMode::General { partial.get(i, j) } else { partial.get(j, i) };
                    quad += 1;
                    continue;
                }
                interp += 1;
                let mut k = [0i64; MAX_DIM];
                for d in 0..n {
                    k[d] = jm[d] as i64 - (pl.sl.ratio[d] * im[d]) as i64;
                }
                if i == j {
                    diag_pos = Some(pos);
                } else {
                    any_interp = true;
                }
                let slot = key_slot(&k);
                vals[pos] = if slot != usize::MAX {
                    evaluated[slot][box_pos(&im)]
                } else {
                    // mirrored offset: value of the upper entry (j, i)
                    let mut nk = [0i64; MAX_DIM];
                    for d in 0..n {
                        nk[d] = -k[d];
                    }
                    evaluated[key_slot(&nk)][box_pos(&jm)]
                };
            }
            if cfg.mode == SymmetryMode::KernelPreserving && any_interp {
                let dp = diag_pos.or_else(|| range.clone().find(|&pos| cols[pos] == i)).expect("diagonal entry");
                let mut s = 0.0;
                for pos in range.clone() {
                    if pos != dp {
                        s += vals[pos];
                    }
                }
                vals[dp] = -s;
            }
        }
    }
    report.q_used = pl.q_used.clone();
    report.m_sampling = pl.m;
    report.big_h = pl.m as f64 * h;
    report.quad_entries = quad;
    report.interp_entries = interp;
    report.quad_fraction = quad as f64 / (quad + interp) as f64;
    report.quadrature_rows = mask.iter().filter(|&&q| q).count();
    report.active_elements = info.active_elements;
    report.flags = pl.flags;
    report.assembly_seconds = t0.elapsed().as_secs_f64();
    Ok((out, report))
}

/// Standard assembly with a report in the same format.
pub fn build_standard(
    form: Form,
    test: &DiscreteSpace,
    trial: &DiscreteSpace,
    geometry: &crate::geometry::GeometryMap,
) -> Result<(CsrMatrix, AssemblyReport)> {
    let t0 = Instant::now();
    let asm = Assembler::new(form, test, trial, geometry)?;
    let m = asm.assemble_full()?;
    let report = AssemblyReport {
        n_dofs: test.len(),
        p: test.degree().max(trial.degree()),
        quad_entries: m.nnz(),
        quad_fraction: 1.0,
        quadrature_rows: m.nrows(),
        active_elements: asm.element_count(),
        total_elements: asm.element_count(),
        m_sampling: 1,
        big_h: test.mesh_size(),
        assembly_seconds: t0.elapsed().as_secs_f64(),
        ..Default::default()
    };
    Ok((m, report))
}
