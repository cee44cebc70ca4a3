use super::norms::{error_integrals, integrate, ErrorIntegrals, FnField};
use super::{load_geometry, StudyConfig, StudyRow, Table};
use crate::assembly::{assemble_rhs, boundary_values, stokes_spaces, DiscreteSpace, Form};
use crate::error::{Error, Result};
use crate::geometry::GeometryMap;
use crate::linalg;
use crate::solvers::{make_flux_free, solve_stokes, StokesSolution, StokesSystem};
use crate::sparse::CsrMatrix;
use crate::spline::MAX_DIM;
use crate::surrogate::{build_standard, build_surrogate, AssemblyReport};

use super::exact::StokesCase;

/// Velocity and pressure sampled on a uniform physical grid.
#[derive(Clone, Debug, PartialEq)]
pub struct CavityField {
    pub name: String,
    /// `(x, y, ux, uy, p)` for grid points inside the domain.
    pub samples: Vec<[f64; 5]>,
}

impl CavityField {
    pub fn table(&self) -> Table {
        let mut t = Table::new(&self.name, "x,y,ux,uy,p");
        for s in &self.samples {
            t.lines.push(format!("{:e},{:e},{:e},{:e},{:e}", s[0], s[1], s[2], s[3], s[4]));
        }
        t
    }

    /// Largest pointwise difference of velocity and pressure, for fields on
    /// the same grid.
    pub fn max_diff(&self, other: &Self) -> f64 {
        self.samples
            .iter()
            .zip(&other.samples)
            .map(|(a, b)| (2..5).map(|k| (a[k] - b[k]).abs()).fold(0.0, f64::max))
            .fold(0.0, f64::max)
    }
}

#[derive(Clone, Debug, Default)]
pub struct StokesStudy {
    /// `std`/`surr` hold the velocity errors, `std2`/`surr2` the pressure errors.
    pub rows: Vec<StudyRow>,
    pub fields: Vec<CavityField>,
}

impl StokesStudy {
    pub fn table(&self) -> Table {
        let mut t = Table::new(
            "errors.csv",
            "N,h,p,q,M,H,err_l2_std,err_l2_surr,err_p_l2_std,err_p_l2_surr,quad_fraction,flags",
        );
        for r in &self.rows {
            let (ps, pr) = (r.std2.unwrap_or_default(), r.surr2.unwrap_or_default());
            t.lines.push(format!(
                "{},{:e},{},{},{},{:e},{:e},{:e},{:e},{:e},{:e},{}",
                r.n_dofs,
                r.h,
                r.p,
                r.q,
                r.m,
                r.big_h,
                r.std.l2,
                r.surr.l2,
                ps.l2,
                pr.l2,
                r.quad_fraction,
                super::flags_field(&r.flags)
            ));
        }
        t
    }
}

/// Assembled blocks of one Stokes discretization.
pub(crate) struct StokesBlocks {
    pub a: CsrMatrix,
    pub b: CsrMatrix,
    pub report_a: AssemblyReport,
    pub report_b: [AssemblyReport; 2],
}

/// Velocity block `diag(A, A)` and divergence block `[B0 B1]`, standard or
/// surrogate.
pub(crate) fn stokes_blocks(vel: &DiscreteSpace, pres: &DiscreteSpace, geo: &GeometryMap, cfg: Option<&StudyConfig>) -> Result<StokesBlocks> {
    if geo.dim() != 2 {
        return Err(Error::Dimension("the Stokes study is two-dimensional".into()));
    }
    let build = |form: Form, test: &DiscreteSpace, trial: &DiscreteSpace| match cfg {
        Some(c) => build_surrogate(form, test, trial, geo, &c.surrogate(form)),
        None => build_standard(form, test, trial, geo),
    };
    let (a1, report_a) = build(Form::StokesVelocity { viscosity: 1.0 }, vel, vel)?;
    let (b0, rb0) = build(Form::StokesDivergence { component: 0 }, pres, vel)?;
    let (b1, rb1) = build(Form::StokesDivergence { component: 1 }, pres, vel)?;
    let nv = vel.len();
    let mut t = Vec::with_capacity(2 * a1.nnz());
    for c in 0..2 {
        for i in 0..nv {
            let (cols, vals) = a1.row(i);
            t.extend(cols.iter().zip(vals).map(|(&j, &v)| (c * nv + i, c * nv + j, v)));
        }
    }
    let a = CsrMatrix::from_triplets(2 * nv, 2 * nv, &t)?;
    let mut t = Vec::with_capacity(b0.nnz() + b1.nnz());
    for (c, bc) in [&b0, &b1].into_iter().enumerate() {
        for q in 0..bc.nrows() {
            let (cols, vals) = bc.row(q);
            t.extend(cols.iter().zip(vals).map(|(&j, &v)| (q, c * nv + j, v)));
        }
    }
    let b = CsrMatrix::from_triplets(pres.len(), 2 * nv, &t)?;
    Ok(StokesBlocks { a, b, report_a, report_b: [rb0, rb1] })
}

/// Solve with the given blocks, load and Dirichlet data; the data are made
/// discretely flux-free first.
pub(crate) fn solve_blocks(blocks: &StokesBlocks, mean: &[f64], rhs: &[f64], fixed: &[usize], values: &[f64]) -> Result<StokesSolution> {
    let mut vals = values.to_vec();
    make_flux_free(&blocks.b, fixed, &mut vals);
    solve_stokes(&StokesSystem { a: &blocks.a, b: &blocks.b, mean, rhs, fixed, fixed_values: &vals })
}

/// Manufactured-solution convergence study, and optionally the lid-driven
/// cavity on the finest level.
pub fn run_stokes_study(cfg: &StudyConfig) -> Result<StokesStudy> {
    cfg.validate()?;
    let geo = load_geometry(&cfg.geometry)?;
    let area = integrate(&geo, &|_| 1.0, 24)?;
    let pmean = integrate(&geo, &|x| StokesCase { pressure_shift: 0.0 }.pressure(x), 24)? / area;
    let case = StokesCase { pressure_shift: -pmean };
    let mut rows = Vec::with_capacity(cfg.ladder.len());
    for &spans in &cfg.ladder {
        let (vel, pres) = stokes_spaces(&geo, cfg.p, spans)?;
        let nv = vel.len();
        let std = stokes_blocks(&vel, &pres, &geo, None)?;
        let surr = stokes_blocks(&vel, &pres, &geo, Some(cfg))?;
        let mean = assemble_rhs(&pres, &geo, &|_| 1.0, Some(cfg.p + 2))?;
        let mut rhs = Vec::with_capacity(2 * nv);
        let mut fixed = Vec::new();
        let mut values = Vec::new();
        for c in 0..2 {
            rhs.extend(assemble_rhs(&vel, &geo, &|x| case.load(x)[c], Some(cfg.p + 3))?);
            let (f, v) = boundary_values(&vel, &geo, &|x| case.velocity(x)[c])?;
            fixed.extend(f.iter().map(|&i| c * nv + i));
            values.extend(v);
        }
        let s_std = solve_blocks(&std, &mean, &rhs, &fixed, &values)?;
        let s_surr = solve_blocks(&surr, &mean, &rhs, &fixed, &values)?;
        let mut row = StudyRow::from_reports(&std.report_a, &surr.report_a, pres.mesh_size());
        row.n_dofs = 2 * nv + pres.len();
        row.p = cfg.p;
        for (rs, rr) in std.report_b.iter().zip(&surr.report_b) {
            row.t_std += rs.assembly_seconds;
            row.t_surr += rr.assembly_seconds;
            for f in &rr.flags {
                let f = format!("div:{f}");
                if !row.flags.contains(&f) {
                    row.flags.push(f);
                }
            }
        }
        let quad: usize = surr.report_b.iter().map(|r| r.quad_entries).sum::<usize>() + 2 * surr.report_a.quad_entries;
        let interp: usize = surr.report_b.iter().map(|r| r.interp_entries).sum::<usize>() + 2 * surr.report_a.interp_entries;
        row.quad_fraction = quad as f64 / (quad + interp).max(1) as f64;
        let (ve, pe) = stokes_errors(&s_std, &vel, &pres, &geo, &case)?;
        row.std = ve;
        row.std2 = Some(pe);
        let (ve, pe) = stokes_errors(&s_surr, &vel, &pres, &geo, &case)?;
        row.surr = ve;
        row.surr2 = Some(pe);
        rows.push(row);
    }
    let mut fields = Vec::new();
    if cfg.cavity {
        let spans = *cfg.ladder.iter().max().expect("validated ladder");
        fields = cavity_fields(&geo, cfg, spans, 101)?;
    }
    Ok(StokesStudy { rows, fields })
}

fn stokes_errors(
    s: &StokesSolution,
    vel: &DiscreteSpace,
    pres: &DiscreteSpace,
    geo: &GeometryMap,
    case: &StokesCase,
) -> Result<(super::ErrorNorms, super::ErrorNorms)> {
    let nv = vel.len();
    let zero_g = |_: &[f64]| [0.0; MAX_DIM];
    let zero_h = |_: &[f64]| [[0.0; MAX_DIM]; MAX_DIM];
    let mut acc = ErrorIntegrals::default();
    for c in 0..2 {
        let f = FnField { value: move |x: &[f64]| case.velocity(x)[c], grad: zero_g, hess: zero_h };
        acc = acc.add(&error_integrals(&s.velocity[c * nv..(c + 1) * nv], vel, geo, &f, 0)?);
    }
    let f = FnField { value: |x: &[f64]| case.pressure(x), grad: zero_g, hess: zero_h };
    let pe = error_integrals(&s.pressure, pres, geo, &f, 0)?;
    Ok((acc.norms(0), pe.norms(0)))
}

/// Lid-driven cavity: `u = (1, 0)` on the edge `xhat_2 = 1` (corner
/// coefficients zero), `u = 0` elsewhere, no load. Returns the standard and
/// surrogate fields sampled on a `grid x grid` physical grid.
pub fn cavity_fields(geo: &GeometryMap, cfg: &StudyConfig, spans: usize, grid: usize) -> Result<Vec<CavityField>> {
    let (vel, pres) = stokes_spaces(geo, cfg.p, spans)?;
    let nv = vel.len();
    let counts = vel.space().counts();
    let mean = assemble_rhs(&pres, geo, &|_| 1.0, Some(cfg.p + 2))?;
    let rhs = vec![0.0; 2 * nv];
    let boundary = vel.space().boundary_functions();
    let mut fixed = Vec::with_capacity(2 * boundary.len());
    let mut values = Vec::with_capacity(2 * boundary.len());
    for c in 0..2 {
        for &i in &boundary {
            let m = vel.space().multi(i);
            let lid = c == 0 && m[1] == counts[1] - 1 && m[0] > 0 && m[0] < counts[0] - 1;
            fixed.push(c * nv + i);
            values.push(if lid { 1.0 } else { 0.0 });
        }
    }
    let points = grid_points(geo, grid)?;
    let mut out = Vec::new();
    for (name, blocks) in [
        ("cavity_standard.csv", stokes_blocks(&vel, &pres, geo, None)?),
        ("cavity_surrogate.csv", stokes_blocks(&vel, &pres, geo, Some(cfg))?),
    ] {
        let s = solve_blocks(&blocks, &mean, &rhs, &fixed, &values)?;
        let mut samples = Vec::with_capacity(points.len());
        for (x, xhat) in &points {
            let ux = vel.eval_field(&s.velocity[..nv], xhat)?;
            let uy = vel.eval_field(&s.velocity[nv..], xhat)?;
            let p = pres.eval_field(&s.pressure, xhat)?;
            samples.push([x[0], x[1], ux, uy, p]);
        }
        out.push(CavityField { name: name.into(), samples });
    }
    Ok(out)
}

/// Uniform grid over the bounding box of the control points, keeping the
/// points inside the domain with their parameter preimages.
fn grid_points(geo: &GeometryMap, grid: usize) -> Result<Vec<([f64; 2], [f64; 2])>> {
    let cps = geo.control_points();
    let (mut lo, mut hi) = ([f64::INFINITY; 2], [f64::NEG_INFINITY; 2]);
    for c in cps.chunks(2) {
        for d in 0..2 {
            lo[d] = lo[d].min(c[d]);
            hi[d] = hi[d].max(c[d]);
        }
    }
    let n = grid.max(2);
    let mut out = Vec::new();
    for j in 0..n {
        for i in 0..n {
            let x = [
                lo[0] + (hi[0] - lo[0]) * i as f64 / (n - 1) as f64,
                lo[1] + (hi[1] - lo[1]) * j as f64 / (n - 1) as f64,
            ];
            if let Some(xhat) = inverse_map(geo, &x)? {
                out.push((x, xhat));
            }
        }
    }
    Ok(out)
}

/// Newton iteration for `phi(xhat) = x`, clamped to the unit square.
pub(crate) fn inverse_map(geo: &GeometryMap, x: &[f64; 2]) -> Result<Option<[f64; 2]>> {
    let scale = 1.0 + x[0].abs() + x[1].abs();
    let mut xh = [0.5, 0.5];
    for _ in 0..60 {
        let y = geo.eval(&xh)?;
        let r = [y[0] - x[0], y[1] - x[1]];
        if r[0].abs() + r[1].abs() <= 1e-12 * scale {
            return Ok(Some(xh));
        }
        let jac = geo.jacobian(&xh)?;
        let inv = linalg::inverse(&jac.mat, 2).0;
        for d in 0..2 {
            xh[d] = (xh[d] - inv[d][0] * r[0] - inv[d][1] * r[1]).clamp(0.0, 1.0);
        }
    }
    Ok(None)
}
