use super::poisson::solve_dirichlet;
use super::{load_geometry, matrix_pair, norms::error_norms, StudyConfig, StudyRow};
use crate::assembly::{assemble_rhs, boundary_values, DiscreteSpace, Form};
use crate::error::{Error, Result};

/// `Laplace^2 u = f` with only `u = g` imposed on the boundary; the
/// natural condition is `Laplace u = 0`, which the harmonic default solution
/// satisfies.
pub fn run_biharmonic_study(cfg: &StudyConfig) -> Result<Vec<StudyRow>> {
    cfg.validate()?;
    if cfg.p < 2 {
        return Err(Error::Invalid("the biharmonic form needs C1 splines, p >= 2".into()));
    }
    let geo = load_geometry(&cfg.geometry)?;
    let case = cfg.case;
    let mut rows = Vec::with_capacity(cfg.ladder.len());
    for &spans in &cfg.ladder {
        let sp = DiscreteSpace::new(&geo, cfg.p, spans)?;
        let ((a_std, r_std), (a_surr, r_surr)) = matrix_pair(Form::Biharmonic, &sp, &sp, &geo, cfg)?;
        let f = assemble_rhs(&sp, &geo, &|x| case.biharmonic_load(x), Some(cfg.p + 2))?;
        let (fixed, vals) = boundary_values(&sp, &geo, &|x| case.value(x))?;
        let u_std = solve_dirichlet(&a_std, &f, &fixed, &vals)?;
        let u_surr = solve_dirichlet(&a_surr, &f, &fixed, &vals)?;
        let mut row = StudyRow::from_reports(&r_std, &r_surr, sp.mesh_size());
        row.std = error_norms(&u_std, &sp, &geo, &case, 2)?;
        row.surr = error_norms(&u_surr, &sp, &geo, &case, 2)?;
        rows.push(row);
    }
    Ok(rows)
}
