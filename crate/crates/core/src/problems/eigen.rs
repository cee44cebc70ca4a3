use std::path::PathBuf;

use super::{load_geometry, matrix_pair, StudyConfig, StudyRow, Table};
use crate::assembly::{Assembler, DiscreteSpace, Form};
use crate::error::{Error, Result};
use crate::geometry::GeometryMap;
use crate::solvers::{dense_generalized_eig, lanczos_generalized_eig, DENSE_EIGEN_LIMIT};
use crate::sparse::CsrMatrix;

/// Natural frequencies `sqrt(lambda)` of the whole discrete spectrum, standard
/// and surrogate, on one mesh.
#[derive(Clone, Debug, PartialEq)]
pub struct FrequencyComparison {
    pub n_dofs: usize,
    pub omega_std: Vec<f64>,
    pub omega_surr: Vec<f64>,
}

impl FrequencyComparison {
    pub fn rel_diff(&self) -> Vec<f64> {
        self.omega_std.iter().zip(&self.omega_surr).map(|(a, b)| (a - b).abs() / a).collect()
    }

    pub fn max_rel_diff(&self) -> f64 {
        self.rel_diff().into_iter().fold(0.0, f64::max)
    }

    pub fn table(&self) -> Table {
        let mut t = Table::new("frequencies.csv", "N,k,omega_std,omega_surr,rel_diff_freq");
        for (k, ((a, b), d)) in self.omega_std.iter().zip(&self.omega_surr).zip(self.rel_diff()).enumerate() {
            t.lines.push(format!("{},{},{:e},{:e},{:e}", self.n_dofs, k + 1, a, b, d));
        }
        t
    }
}

#[derive(Clone, Debug, Default)]
pub struct EigenStudy {
    /// One row per level; `std.l2`/`surr.l2` hold the relative error of the
    /// first eigenvalue.
    pub rows: Vec<StudyRow>,
    pub reference: Vec<f64>,
    pub spectrum: Option<FrequencyComparison>,
}

impl EigenStudy {
    pub fn table(&self) -> Table {
        let mut t = Table::new("eigen.csv", "N,k,lambda_ref,lambda_std,lambda_surr,rel_diff_freq");
        for r in &self.rows {
            for (k, (a, b)) in r.lambda_std.iter().zip(&r.lambda_surr).enumerate() {
                let d = (a.sqrt() - b.sqrt()).abs() / a.sqrt();
                t.lines.push(format!("{},{},{:e},{:e},{:e},{:e}", r.n_dofs, k + 1, self.reference[k], a, b, d));
            }
        }
        t
    }

    /// Absolute errors `|lambda_ref - lambda|` of eigenvalue `k` per level.
    pub fn errors(&self, k: usize, surrogate: bool) -> Vec<f64> {
        self.rows
            .iter()
            .map(|r| {
                let l = if surrogate { r.lambda_surr[k] } else { r.lambda_std[k] };
                (l - self.reference[k]).abs()
            })
            .collect()
    }
}

/// Homogeneous Dirichlet membrane eigenvalues `-Laplace u = lambda u`.
pub fn run_eigen_study(cfg: &StudyConfig) -> Result<EigenStudy> {
    cfg.validate()?;
    let geo = load_geometry(&cfg.geometry)?;
    let k = cfg.eigen_count;
    let finest = *cfg.ladder.iter().max().expect("validated ladder");
    let reference = reference_eigenvalues(&geo, cfg, finest * cfg.reference_factor, k)?;
    let mut rows = Vec::with_capacity(cfg.ladder.len());
    for &spans in &cfg.ladder {
        let sp = DiscreteSpace::new(&geo, cfg.p, spans)?;
        let (std, surr) = level_eigenvalues(&sp, &geo, cfg, Some(k))?;
        let mut row = std.1;
        row.std.l2 = (std.0[0] - reference[0]).abs() / reference[0];
        row.surr.l2 = (surr[0] - reference[0]).abs() / reference[0];
        row.lambda_std = std.0;
        row.lambda_surr = surr;
        rows.push(row);
    }
    let spectrum = if cfg.spectrum_points > 0 {
        let spans = cfg.spectrum_points - cfg.p;
        let sp = DiscreteSpace::new(&geo, cfg.p, spans)?;
        let ((ls, row), lsurr) = level_eigenvalues(&sp, &geo, cfg, None)?;
        Some(FrequencyComparison {
            n_dofs: row.n_dofs,
            omega_std: ls.iter().map(|l| l.sqrt()).collect(),
            omega_surr: lsurr.iter().map(|l| l.sqrt()).collect(),
        })
    } else {
        None
    };
    Ok(EigenStudy { rows, reference, spectrum })
}

type LevelResult = ((Vec<f64>, StudyRow), Vec<f64>);

/// `k` smallest (or all, for `None`) eigenvalues with standard and surrogate
/// matrices. The stiffness follows the configured mode; the mass matrix uses
/// the symmetric mode.
fn level_eigenvalues(sp: &DiscreteSpace, geo: &GeometryMap, cfg: &StudyConfig, k: Option<usize>) -> Result<LevelResult> {
    let ((a_std, ra_std), (a_surr, ra_surr)) = matrix_pair(Form::PoissonStiffness, sp, sp, geo, cfg)?;
    let ((m_std, rm_std), (m_surr, rm_surr)) = matrix_pair(Form::Mass, sp, sp, geo, cfg)?;
    let free = interior_dofs(sp);
    let k = k.unwrap_or(free.len()).min(free.len());
    let ls = eigenvalues(&a_std.submatrix(&free, &free), &m_std.submatrix(&free, &free), k, cfg.seed)?;
    let lsurr = eigenvalues(&a_surr.submatrix(&free, &free), &m_surr.submatrix(&free, &free), k, cfg.seed)?;
    let mut row = StudyRow::from_reports(&ra_std, &ra_surr, sp.mesh_size());
    row.t_std += rm_std.assembly_seconds;
    row.t_surr += rm_surr.assembly_seconds;
    for f in &rm_surr.flags {
        if !row.flags.contains(f) {
            row.flags.push(format!("mass:{f}"));
        }
    }
    Ok(((ls, row), lsurr))
}

fn interior_dofs(sp: &DiscreteSpace) -> Vec<usize> {
    let mut boundary = vec![false; sp.len()];
    for i in sp.space().boundary_functions() {
        boundary[i] = true;
    }
    (0..sp.len()).filter(|&i| !boundary[i]).collect()
}

fn eigenvalues(a: &CsrMatrix, m: &CsrMatrix, k: usize, seed: u64) -> Result<Vec<f64>> {
    if k == 0 {
        return Err(Error::Invalid("no interior degrees of freedom".into()));
    }
    let pairs = if a.nrows() <= DENSE_EIGEN_LIMIT || k == a.nrows() {
        dense_generalized_eig(a, m, k)?
    } else {
        lanczos_generalized_eig(a, m, k, seed)?
    };
    Ok(pairs.values)
}

/// Reference eigenvalues with degree `cfg.reference_degree` on `spans` spans,
/// read from or stored in `cfg.cache_dir` when set.
fn reference_eigenvalues(geo: &GeometryMap, cfg: &StudyConfig, spans: usize, k: usize) -> Result<Vec<f64>> {
    let path = cfg.cache_dir.as_ref().map(|d| -> PathBuf {
        let tag: String = cfg.geometry.chars().map(|c| if c.is_ascii_alphanumeric() { c } else { '_' }).collect();
        d.join(format!("eigen_reference_{tag}_p{}_s{spans}_k{k}.txt", cfg.reference_degree))
    });
    if let Some(p) = &path {
        if let Ok(text) = std::fs::read_to_string(p) {
            let vals: std::result::Result<Vec<f64>, _> = text.split_whitespace().map(str::parse).collect();
            if let Ok(v) = vals {
                if v.len() == k {
                    return Ok(v);
                }
            }
        }
    }
    let sp = DiscreteSpace::new(geo, cfg.reference_degree, spans)?;
    let asm = |form| Assembler::new(form, &sp, &sp, geo)?.assemble_full();
    let free = interior_dofs(&sp);
    let a = asm(Form::PoissonStiffness)?.submatrix(&free, &free);
    let m = asm(Form::Mass)?.submatrix(&free, &free);
    let vals = eigenvalues(&a, &m, k, cfg.seed)?;
    if let Some(p) = &path {
        std::fs::create_dir_all(p.parent().expect("cache file has a parent"))?;
        let text: Vec<String> = vals.iter().map(|v| format!("{v:e}")).collect();
        std::fs::write(p, text.join("\n") + "\n")?;
    }
    Ok(vals)
}
