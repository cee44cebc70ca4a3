use super::{load_geometry, matrix_pair, norms::error_norms, StudyConfig, StudyRow};
use crate::assembly::{apply_dirichlet, assemble_rhs, boundary_values, DiscreteSpace, Form};
use crate::error::Result;
use crate::solvers::{solve_spd, SolveOptions};
use crate::sparse::CsrMatrix;

/// `-Laplace u = f` with `u = g` on the boundary, for the manufactured
/// solution `cfg.case`, at every ladder level.
pub fn run_poisson_study(cfg: &StudyConfig) -> Result<Vec<StudyRow>> {
    cfg.validate()?;
    let geo = load_geometry(&cfg.geometry)?;
    let case = cfg.case;
    let mut rows = Vec::with_capacity(cfg.ladder.len());
    for &spans in &cfg.ladder {
        let sp = DiscreteSpace::new(&geo, cfg.p, spans)?;
        let ((a_std, r_std), (a_surr, r_surr)) = matrix_pair(Form::PoissonStiffness, &sp, &sp, &geo, cfg)?;
        let f = assemble_rhs(&sp, &geo, &|x| case.poisson_load(x), Some(cfg.p + 2))?;
        let (fixed, vals) = boundary_values(&sp, &geo, &|x| case.value(x))?;
        let u_std = solve_dirichlet(&a_std, &f, &fixed, &vals)?;
        let u_surr = solve_dirichlet(&a_surr, &f, &fixed, &vals)?;
        let mut row = StudyRow::from_reports(&r_std, &r_surr, sp.mesh_size());
        row.std = error_norms(&u_std, &sp, &geo, &case, 1)?;
        row.surr = error_norms(&u_surr, &sp, &geo, &case, 1)?;
        rows.push(row);
    }
    Ok(rows)
}

pub(crate) fn solve_dirichlet(a: &CsrMatrix, f: &[f64], fixed: &[usize], vals: &[f64]) -> Result<Vec<f64>> {
    let sys = apply_dirichlet(a, f, fixed, vals)?;
    let x = solve_spd(&sys.matrix, &sys.rhs, &SolveOptions::default())?;
    Ok(sys.expand(&x))
}
