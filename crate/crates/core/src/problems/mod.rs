//! Manufactured solutions, error norms and the study drivers.
//!
//! Each study walks a ladder of uniform refinements and records, per level,
//! the result with the standard matrices next to the result with the
//! surrogate matrices.

pub mod exact;
pub mod norms;

mod biharmonic;
mod eigen;
mod poisson;
mod stokes;
mod timing;

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

pub use biharmonic::run_biharmonic_study;
pub use eigen::{run_eigen_study, EigenStudy, FrequencyComparison};
pub use exact::{ScalarCase, StokesCase};
pub use norms::{error_integrals, error_norms, integrate, observed_rate, ErrorIntegrals, ErrorNorms, ExactField, FnField};
pub use poisson::run_poisson_study;
pub use stokes::{cavity_fields, run_stokes_study, CavityField, StokesStudy};
pub use timing::{count_study, timing_harness, CountRow};

use crate::assembly::{DiscreteSpace, Form};
use crate::error::{Error, Result};
use crate::geometry::{builtin_domain, GeometryMap};
use crate::sparse::CsrMatrix;
use crate::surrogate::{build_standard, build_surrogate, default_mode, AssemblyReport, SamplingStrategy, SurrogateConfig, SymmetryMode};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Problem {
    Poisson,
    Eigen,
    Biharmonic,
    Stokes,
    Bench,
}

impl Problem {
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "poisson" => Ok(Self::Poisson),
            "eigen" => Ok(Self::Eigen),
            "biharmonic" => Ok(Self::Biharmonic),
            "stokes" => Ok(Self::Stokes),
            "bench" => Ok(Self::Bench),
            _ => Err(Error::Invalid(format!("unknown problem `{s}`"))),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Self::Poisson => "poisson",
            Self::Eigen => "eigen",
            Self::Biharmonic => "biharmonic",
            Self::Stokes => "stokes",
            Self::Bench => "bench",
        }
    }
}

/// Everything a study needs. `StudyConfig::new` fills in the defaults of
/// each problem.
#[derive(Clone, Debug, PartialEq)]
pub struct StudyConfig {
    pub problem: Problem,
    /// Built-in domain name or path of a geometry file.
    pub geometry: String,
    /// Spline degree; the pressure degree for Stokes.
    pub p: usize,
    pub q: usize,
    /// `None` selects the default mode of each form.
    pub mode: Option<SymmetryMode>,
    pub strategy: SamplingStrategy,
    /// Spans per direction at each level.
    pub ladder: Vec<usize>,
    pub case: ScalarCase,
    /// Number of eigenvalues tracked by the eigen study.
    pub eigen_count: usize,
    /// Reference mesh of the eigen study is `reference_factor` times the
    /// finest level, with degree `reference_degree`.
    pub reference_factor: usize,
    pub reference_degree: usize,
    /// Control points per direction for the full-spectrum comparison; 0 skips it.
    pub spectrum_points: usize,
    /// Export the lid-driven cavity fields in the Stokes study.
    pub cavity: bool,
    /// Spans per direction counted (not assembled) by the bench study.
    pub count_ladder: Vec<usize>,
    pub seed: u64,
    pub threads: Option<usize>,
    /// Directory for cached reference data.
    pub cache_dir: Option<PathBuf>,
}

impl StudyConfig {
    pub fn new(problem: Problem) -> Self {
        let mut c = Self {
            problem,
            geometry: "coons_2d".into(),
            p: 2,
            q: 3,
            mode: None,
            strategy: SamplingStrategy::Fixed(5),
            ladder: vec![16, 32, 64, 128],
            case: ScalarCase::low_frequency(),
            eigen_count: 9,
            reference_factor: 4,
            reference_degree: 4,
            spectrum_points: 0,
            cavity: false,
            count_ladder: Vec::new(),
            seed: 0x5eed,
            threads: None,
            cache_dir: None,
        };
        match problem {
            Problem::Poisson => {}
            Problem::Eigen => {
                c.geometry = "quarter_annulus".into();
                c.q = 5;
                c.spectrum_points = 50;
            }
            Problem::Biharmonic => {
                c.geometry = "quarter_annulus".into();
                c.p = 3;
                c.case = ScalarCase::SinSinh;
            }
            Problem::Stokes => {
                c.geometry = "coons_cubic".into();
                c.ladder = vec![8, 16, 32, 64];
                c.cavity = true;
            }
            Problem::Bench => {
                c.q = 5;
                c.strategy = SamplingStrategy::MeshDependent { c: 3.0, beta: 0.5 };
                c.ladder = vec![64, 128, 256, 512];
                c.count_ladder = vec![64, 128, 256, 512, 998];
                c.threads = Some(1);
            }
        }
        c
    }

    /// Check every field before any computation.
    pub fn validate(&self) -> Result<()> {
        let p = self.p;
        let min_p = if self.problem == Problem::Biharmonic { 2 } else { 1 };
        if p < min_p || p > 8 {
            return Err(Error::Invalid(format!("p = {p} outside {min_p}..=8 for the {} problem", self.problem.name())));
        }
        if self.q == 0 || self.q > 8 {
            return Err(Error::Invalid(format!("q = {} outside 1..=8", self.q)));
        }
        match self.strategy {
            SamplingStrategy::Fixed(0) => return Err(Error::Invalid("M >= 1 required".into())),
            SamplingStrategy::MeshDependent { c, beta } => {
                // the surrogate uses the trial degree, which is p + 1 for the Stokes velocity
                let pe = if self.problem == Problem::Stokes { p + 1 } else { p };
                if self.q <= pe {
                    return Err(Error::Invalid(format!("mesh-dependent sampling needs q > p (q = {}, p = {pe})", self.q)));
                }
                if !(c >= 0.0) || !(beta >= 0.0) || !c.is_finite() || !beta.is_finite() {
                    return Err(Error::Invalid("mesh-dependent sampling needs finite c >= 0 and beta >= 0".into()));
                }
            }
            _ => {}
        }
        if self.ladder.is_empty() {
            return Err(Error::Invalid("empty mesh ladder".into()));
        }
        if self.ladder.contains(&0) || self.count_ladder.contains(&0) {
            return Err(Error::Invalid("mesh ladder entries must be positive".into()));
        }
        if self.problem == Problem::Eigen {
            if self.eigen_count == 0 {
                return Err(Error::Invalid("eigen_count must be positive".into()));
            }
            if self.reference_factor == 0 || self.reference_degree == 0 {
                return Err(Error::Invalid("reference mesh factor and degree must be positive".into()));
            }
            if self.spectrum_points != 0 && self.spectrum_points < p + 3 {
                return Err(Error::Invalid(format!("spectrum_points must be 0 or at least {}", p + 3)));
            }
        }
        if self.threads == Some(0) {
            return Err(Error::Invalid("threads must be positive".into()));
        }
        Ok(())
    }

    /// The configuration as `key = value` lines.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let join = |v: &[usize]| v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(",");
        let _ = writeln!(s, "problem = {}", self.problem.name());
        let _ = writeln!(s, "geometry = {}", self.geometry);
        let _ = writeln!(s, "p = {}", self.p);
        let _ = writeln!(s, "q = {}", self.q);
        let _ = writeln!(s, "mode = {}", self.mode.map_or("default", |m| m.name()));
        match self.strategy {
            SamplingStrategy::Fixed(m) => {
                let _ = writeln!(s, "M = {m}");
            }
            SamplingStrategy::MeshDependent { c, beta } => {
                let _ = writeln!(s, "c = {c}\nbeta = {beta}");
            }
        }
        let _ = writeln!(s, "ladder = {}", join(&self.ladder));
        let _ = writeln!(s, "case = {}", self.case.label());
        let _ = writeln!(s, "eigen_count = {}", self.eigen_count);
        let _ = writeln!(s, "reference_factor = {}", self.reference_factor);
        let _ = writeln!(s, "reference_degree = {}", self.reference_degree);
        let _ = writeln!(s, "spectrum_points = {}", self.spectrum_points);
        let _ = writeln!(s, "cavity = {}", self.cavity);
        let _ = writeln!(s, "count_ladder = {}", join(&self.count_ladder));
        let _ = writeln!(s, "seed = {}", self.seed);
        if let Some(t) = self.threads {
            let _ = writeln!(s, "threads = {t}");
        }
        s
    }

    /// Surrogate settings used for `form`.
    pub fn surrogate(&self, form: Form) -> SurrogateConfig {
        let mut mode = self.mode.unwrap_or_else(|| default_mode(form));
        match form {
            Form::Mass if mode == SymmetryMode::KernelPreserving => mode = SymmetryMode::Symmetric,
            Form::StokesDivergence { .. } => mode = SymmetryMode::General,
            _ => {}
        }
        SurrogateConfig { q: self.q, strategy: self.strategy, mode }
    }
}

/// Geometry by built-in name or from a file.
pub fn load_geometry(name: &str) -> Result<GeometryMap> {
    match builtin_domain(name) {
        Err(Error::UnknownGeometry(_)) if Path::new(name).exists() => GeometryMap::load(Path::new(name)),
        r => r,
    }
}

/// One refinement level of a study.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct StudyRow {
    pub n_dofs: usize,
    pub h: f64,
    pub p: usize,
    pub q: usize,
    pub m: usize,
    pub big_h: f64,
    pub std: ErrorNorms,
    pub surr: ErrorNorms,
    /// Second error pair (pressure in the Stokes study).
    pub std2: Option<ErrorNorms>,
    pub surr2: Option<ErrorNorms>,
    /// Eigenvalues of the eigen study.
    pub lambda_std: Vec<f64>,
    pub lambda_surr: Vec<f64>,
    pub quad_fraction: f64,
    pub t_std: f64,
    pub t_surr: f64,
    pub flags: Vec<String>,
}

impl StudyRow {
    pub fn speed_up(&self) -> f64 {
        speed_up(self.t_std, self.t_surr)
    }

    pub(crate) fn from_reports(std: &AssemblyReport, surr: &AssemblyReport, h: f64) -> Self {
        let mut flags = surr.flags.clone();
        if surr.fallback_full && !flags.iter().any(|f| f == "surrogate=disabled") {
            flags.push("surrogate=disabled".into());
        }
        Self {
            n_dofs: surr.n_dofs,
            h,
            p: surr.p,
            q: surr.q,
            m: surr.m_sampling,
            big_h: surr.big_h,
            quad_fraction: surr.quad_fraction,
            t_std: std.assembly_seconds,
            t_surr: surr.assembly_seconds,
            flags,
            ..Default::default()
        }
    }
}

/// `t_std / t_surr - 1`.
pub fn speed_up(t_std: f64, t_surr: f64) -> f64 {
    t_std / t_surr - 1.0
}

/// A CSV table: file name, header and data lines.
#[derive(Clone, Debug, PartialEq)]
pub struct Table {
    pub name: String,
    pub header: String,
    pub lines: Vec<String>,
}

impl Table {
    pub fn new(name: &str, header: &str) -> Self {
        Self { name: name.into(), header: header.into(), lines: Vec::new() }
    }

    pub fn to_csv(&self) -> String {
        let mut s = self.header.clone();
        s.push('\n');
        for l in &self.lines {
            s.push_str(l);
            s.push('\n');
        }
        s
    }

    pub fn write_to(&self, dir: &Path) -> Result<PathBuf> {
        let path = dir.join(&self.name);
        std::fs::write(&path, self.to_csv())?;
        Ok(path)
    }
}

/// Flags as one CSV field.
pub fn flags_field(flags: &[String]) -> String {
    flags.join(";").replace(',', " ")
}

/// Errors table, optionally with the H2 pair.
pub fn errors_table(name: &str, rows: &[StudyRow], with_h2: bool) -> Table {
    let mut header = String::from("N,h,p,q,M,H,err_l2_std,err_l2_surr,err_h1_std,err_h1_surr");
    if with_h2 {
        header.push_str(",err_h2_std,err_h2_surr");
    }
    header.push_str(",quad_fraction,flags");
    let mut t = Table::new(name, &header);
    for r in rows {
        let mut l = format!(
            "{},{:e},{},{},{},{:e},{:e},{:e},{:e},{:e}",
            r.n_dofs, r.h, r.p, r.q, r.m, r.big_h, r.std.l2, r.surr.l2, r.std.h1, r.surr.h1
        );
        if with_h2 {
            let _ = write!(l, ",{:e},{:e}", r.std.h2, r.surr.h2);
        }
        let _ = write!(l, ",{:e},{}", r.quad_fraction, flags_field(&r.flags));
        t.lines.push(l);
    }
    t
}

/// Observed rates over the last refinement of a column selected by `f`.
pub fn last_rate(rows: &[StudyRow], f: impl Fn(&StudyRow) -> f64) -> f64 {
    let h: Vec<f64> = rows.iter().map(|r| r.h).collect();
    let e: Vec<f64> = rows.iter().map(f).collect();
    observed_rate(&h, &e)
}

/// All tables produced by one study run.
#[derive(Clone, Debug, Default)]
pub struct StudyOutput {
    pub rows: Vec<StudyRow>,
    pub tables: Vec<Table>,
}

/// Run the study selected by `cfg.problem`.
pub fn run_study(cfg: &StudyConfig) -> Result<StudyOutput> {
    cfg.validate()?;
    match cfg.problem {
        Problem::Poisson => {
            let rows = run_poisson_study(cfg)?;
            let tables = vec![errors_table("errors.csv", &rows, false)];
            Ok(StudyOutput { rows, tables })
        }
        Problem::Biharmonic => {
            let rows = run_biharmonic_study(cfg)?;
            let tables = vec![errors_table("errors.csv", &rows, true)];
            Ok(StudyOutput { rows, tables })
        }
        Problem::Eigen => {
            let study = run_eigen_study(cfg)?;
            let mut tables = vec![study.table()];
            if let Some(f) = &study.spectrum {
                tables.push(f.table());
            }
            Ok(StudyOutput { rows: study.rows, tables })
        }
        Problem::Stokes => {
            let study = run_stokes_study(cfg)?;
            let mut tables = vec![study.table()];
            tables.extend(study.fields.iter().map(|f| f.table()));
            Ok(StudyOutput { rows: study.rows, tables })
        }
        Problem::Bench => {
            let (reports, t_std) = timing_harness(cfg)?;
            let mut t = Table::new("timing.csv", &format!("{},t_std_seconds,speed_up,flags", AssemblyReport::CSV_HEADER));
            for (r, ts) in reports.iter().zip(&t_std) {
                t.lines.push(format!("{},{:e},{:e},{}", r.csv_row(), ts, speed_up(*ts, r.assembly_seconds), flags_field(&r.flags)));
            }
            let counts = count_study(cfg)?;
            let mut c = Table::new("counts.csv", "N,spans,M,quad_entries,interp_entries,quad_fraction,lower_bound");
            for r in &counts {
                c.lines.push(format!("{},{},{},{},{},{:e},{:e}", r.n_dofs, r.spans, r.m, r.quad_entries, r.interp_entries, r.quad_fraction, r.lower_bound));
            }
            Ok(StudyOutput { rows: Vec::new(), tables: vec![t, c] })
        }
    }
}

/// Standard and surrogate matrices of `form` on one space, with reports.
pub(crate) fn matrix_pair(
    form: Form,
    test: &DiscreteSpace,
    trial: &DiscreteSpace,
    geometry: &GeometryMap,
    cfg: &StudyConfig,
) -> Result<((CsrMatrix, AssemblyReport), (CsrMatrix, AssemblyReport))> {
    let std = build_standard(form, test, trial, geometry)?;
    let surr = build_surrogate(form, test, trial, geometry, &cfg.surrogate(form))?;
    Ok((std, surr))
}

/// A named matrix of one ladder level, standard or surrogate.
#[derive(Clone, Debug)]
pub struct LevelMatrix {
    pub name: String,
    pub matrix: CsrMatrix,
    pub report: AssemblyReport,
}

/// Standard and surrogate matrices of the study selected by `cfg.problem` at
/// `spans`, without solving anything. Names are `{form}_{std|surr}`.
pub fn study_matrices(cfg: &StudyConfig, spans: usize) -> Result<Vec<LevelMatrix>> {
    cfg.validate()?;
    let geo = load_geometry(&cfg.geometry)?;
    let mut jobs: Vec<(&str, Form, DiscreteSpace, DiscreteSpace)> = Vec::new();
    match cfg.problem {
        Problem::Poisson | Problem::Bench => {
            let sp = DiscreteSpace::new(&geo, cfg.p, spans)?;
            jobs.push(("stiffness", Form::PoissonStiffness, sp.clone(), sp));
        }
        Problem::Eigen => {
            let sp = DiscreteSpace::new(&geo, cfg.p, spans)?;
            jobs.push(("stiffness", Form::PoissonStiffness, sp.clone(), sp.clone()));
            jobs.push(("mass", Form::Mass, sp.clone(), sp));
        }
        Problem::Biharmonic => {
            let sp = DiscreteSpace::new(&geo, cfg.p, spans)?;
            jobs.push(("biharmonic", Form::Biharmonic, sp.clone(), sp));
        }
        Problem::Stokes => {
            let (vel, pres) = crate::assembly::stokes_spaces(&geo, cfg.p, spans)?;
            jobs.push(("velocity", Form::StokesVelocity { viscosity: 1.0 }, vel.clone(), vel.clone()));
            jobs.push(("divergence0", Form::StokesDivergence { component: 0 }, pres.clone(), vel.clone()));
            jobs.push(("divergence1", Form::StokesDivergence { component: 1 }, pres, vel));
        }
    }
    let mut out = Vec::with_capacity(2 * jobs.len());
    for (name, form, test, trial) in jobs {
        let ((a, ra), (b, rb)) = matrix_pair(form, &test, &trial, &geo, cfg)?;
        out.push(LevelMatrix { name: format!("{name}_std"), matrix: a, report: ra });
        out.push(LevelMatrix { name: format!("{name}_surr"), matrix: b, report: rb });
    }
    Ok(out)
}
