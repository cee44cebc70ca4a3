use super::{load_geometry, StudyConfig};
use crate::assembly::{DiscreteSpace, Form};
use crate::error::{Error, Result};
use crate::surrogate::{build_standard, build_surrogate, count_entries, AssemblyReport};

/// Entry counts of the surrogate stiffness matrix without assembling it.
#[derive(Clone, Debug, PartialEq)]
pub struct CountRow {
    pub n_dofs: usize,
    pub spans: usize,
    pub m: usize,
    pub quad_entries: usize,
    pub interp_entries: usize,
    pub quad_fraction: f64,
    /// Fraction of non-cardinal rows, `1 - ((m - 2p) / m)^n` with `m` basis
    /// functions per direction.
    pub lower_bound: f64,
}

/// Wall-clock time of standard and surrogate stiffness assembly at every
/// ladder level, after one warm-up pair on the coarsest level. Runs on
/// `cfg.threads` workers (all available when unset).
///
/// Returns the surrogate reports and the standard assembly times.
pub fn timing_harness(cfg: &StudyConfig) -> Result<(Vec<AssemblyReport>, Vec<f64>)> {
    cfg.validate()?;
    let run = || -> Result<(Vec<AssemblyReport>, Vec<f64>)> {
        let geo = load_geometry(&cfg.geometry)?;
        let form = Form::PoissonStiffness;
        let scfg = cfg.surrogate(form);
        let coarsest = *cfg.ladder.iter().min().expect("validated ladder");
        let warm = DiscreteSpace::new(&geo, cfg.p, coarsest)?;
        build_standard(form, &warm, &warm, &geo)?;
        build_surrogate(form, &warm, &warm, &geo, &scfg)?;
        let mut reports = Vec::with_capacity(cfg.ladder.len());
        let mut t_std = Vec::with_capacity(cfg.ladder.len());
        for &spans in &cfg.ladder {
            let sp = DiscreteSpace::new(&geo, cfg.p, spans)?;
            let (_, rs) = build_standard(form, &sp, &sp, &geo)?;
            let (_, rr) = build_surrogate(form, &sp, &sp, &geo, &scfg)?;
            t_std.push(rs.assembly_seconds);
            reports.push(rr);
        }
        Ok((reports, t_std))
    };
    match cfg.threads {
        Some(k) => rayon::ThreadPoolBuilder::new()
            .num_threads(k)
            .build()
            .map_err(|e| Error::Invalid(format!("thread pool: {e}")))?
            .install(run),
        None => run(),
    }
}

/// Quadrature-entry fractions of the surrogate stiffness matrix for the
/// spans in `cfg.count_ladder`.
pub fn count_study(cfg: &StudyConfig) -> Result<Vec<CountRow>> {
    cfg.validate()?;
    let n = load_geometry(&cfg.geometry)?.dim();
    let form = Form::PoissonStiffness;
    let scfg = cfg.surrogate(form);
    cfg.count_ladder
        .iter()
        .map(|&spans| {
            let sp = DiscreteSpace::bspline(n, cfg.p, spans)?;
            let c = count_entries(sp.space(), sp.space(), form, &scfg)?;
            let m = (spans + cfg.p) as f64;
            let card = (m - 2.0 * cfg.p as f64).max(0.0) / m;
            Ok(CountRow {
                n_dofs: sp.len(),
                spans,
                m: scfg.strategy.sampling_distance(cfg.p, cfg.q, sp.mesh_size())?,
                quad_entries: c.quad_entries,
                interp_entries: c.interp_entries,
                quad_fraction: c.quad_fraction(),
                lower_bound: 1.0 - card.powi(n as i32),
            })
        })
        .collect()
}
