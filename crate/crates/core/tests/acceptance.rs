//! Acceptance checks. Prints one PASS/FAIL line per criterion and exits with
//! a failure status if any criterion fails.

use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use surriga::assembly::{assemble_full, stokes_spaces, Assembler, DiscreteSpace, Form};
use surriga::geometry::builtin_domain;
use surriga::problems::{
    count_study, last_rate, observed_rate, run_biharmonic_study, run_eigen_study, run_poisson_study, timing_harness, Problem, ScalarCase,
    StudyConfig, StudyRow,
};
use surriga::sparse::CsrMatrix;
use surriga::spline::{marsden_residual, KnotVector};
use surriga::surrogate::{build_standard, build_surrogate, SamplingStrategy, StencilLayout, SurrogateConfig, SymmetryMode, Ownership};

// pinned tolerances
const REPRODUCTION_TOL: f64 = 1e-12;
const RATE_WINDOW: f64 = 0.3;
const SURROGATE_RATE_WINDOW: f64 = 0.4;
const STALL_RATIO: f64 = 3.0;
const HIGH_FREQUENCY_RATIO: f64 = 1.2;
const CONSISTENCY_SLACK: f64 = 0.3;
const EIGEN_RATE: f64 = 3.5;
const FREQUENCY_DIFF: f64 = 1e-3;
const QUAD_FRACTION_AT_1E6: f64 = 0.10;
const MARSDEN_TOL: f64 = 1e-12;

type Outcome = Result<String, String>;

fn check(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn rel_diff(a: &CsrMatrix, b: &CsrMatrix) -> f64 {
    a.max_abs_diff(b) / b.max_abs()
}

fn cfg(q: usize, m: usize, mode: SymmetryMode) -> SurrogateConfig {
    SurrogateConfig { q, strategy: SamplingStrategy::Fixed(m), mode }
}

fn c01_identity_reproduction() -> Outcome {
    let t0 = Instant::now();
    let geo = builtin_domain("unit_square").unwrap();
    let mut worst = 0.0f64;
    for p in 1..=3 {
        let sp = DiscreteSpace::new(&geo, p, 48).unwrap();
        let a = assemble_full(Form::PoissonStiffness, &sp, &geo).unwrap();
        for m in [2, 5, 10] {
            for q in 1..=5 {
                let (s, _) = build_surrogate(Form::PoissonStiffness, &sp, &sp, &geo, &cfg(q, m, SymmetryMode::KernelPreserving)).unwrap();
                worst = worst.max(rel_diff(&s, &a));
            }
        }
    }
    let secs = t0.elapsed().as_secs_f64();
    check(worst <= REPRODUCTION_TOL && secs < 5.0, format!("max rel diff {worst:.2e}, {secs:.2} s"))
}

fn c02_mass_reproduction() -> Outcome {
    let geo = builtin_domain("coons_quadratic").unwrap();
    let sp = DiscreteSpace::new(&geo, 2, 48).unwrap();
    let m = assemble_full(Form::Mass, &sp, &geo).unwrap();
    let d3 = rel_diff(&build_surrogate(Form::Mass, &sp, &sp, &geo, &cfg(3, 10, SymmetryMode::Symmetric)).unwrap().0, &m);
    let d2 = rel_diff(&build_surrogate(Form::Mass, &sp, &sp, &geo, &cfg(2, 10, SymmetryMode::Symmetric)).unwrap().0, &m);
    check(d3 <= REPRODUCTION_TOL && d2 > REPRODUCTION_TOL, format!("q=3: {d3:.2e}, q=2 (must fail): {d2:.2e}"))
}

fn c03_divergence_reproduction() -> Outcome {
    let geo = builtin_domain("coons_cubic").unwrap();
    let (vel, pres) = stokes_spaces(&geo, 2, 24).unwrap();
    let mut d = [0.0f64; 2];
    for (k, q) in [3, 2].into_iter().enumerate() {
        for c in 0..2 {
            let form = Form::StokesDivergence { component: c };
            let b = Assembler::new(form, &pres, &vel, &geo).unwrap().assemble_full().unwrap();
            let (s, _) = build_surrogate(form, &pres, &vel, &geo, &cfg(q, 5, SymmetryMode::General)).unwrap();
            d[k] = d[k].max(rel_diff(&s, &b));
        }
    }
    check(d[0] <= REPRODUCTION_TOL && d[1] > REPRODUCTION_TOL, format!("q=3: {:.2e}, q=2 (must fail): {:.2e}", d[0], d[1]))
}

fn poisson(q: usize, case: ScalarCase) -> Vec<StudyRow> {
    let mut c = StudyConfig::new(Problem::Poisson);
    c.geometry = "coons_2d".into();
    c.q = q;
    c.case = case;
    run_poisson_study(&c).unwrap()
}

fn c04_poisson_convergence() -> Outcome {
    let t0 = Instant::now();
    let r3 = poisson(3, ScalarCase::low_frequency());
    let r1 = poisson(1, ScalarCase::low_frequency());
    let h1_std = last_rate(&r3, |r| r.std.h1);
    let l2_std = last_rate(&r3, |r| r.std.l2);
    let h1_surr = last_rate(&r3, |r| r.surr.h1);
    let l2_surr = last_rate(&r3, |r| r.surr.l2);
    let last = r1.last().unwrap();
    let stall = last.surr.l2 / last.std.l2;
    let secs = t0.elapsed().as_secs_f64();
    let ok = (h1_std - 2.0).abs() <= RATE_WINDOW
        && (l2_std - 3.0).abs() <= RATE_WINDOW
        && (h1_surr - h1_std).abs() <= SURROGATE_RATE_WINDOW
        && (l2_surr - l2_std).abs() <= SURROGATE_RATE_WINDOW
        && stall >= STALL_RATIO
        && secs < 180.0;
    check(
        ok,
        format!("std H1 {h1_std:.2} L2 {l2_std:.2}; surrogate H1 {h1_surr:.2} L2 {l2_surr:.2}; q=1 stall ratio {stall:.1}; {secs:.1} s"),
    )
}

fn c05_high_frequency() -> Outcome {
    let mut worst = 0.0f64;
    for q in [2, 3] {
        for r in poisson(q, ScalarCase::high_frequency()) {
            worst = worst.max(r.surr.l2 / r.std.l2);
        }
    }
    check(worst <= HIGH_FREQUENCY_RATIO, format!("max surrogate/standard L2 ratio {worst:.3} (q = 2, 3)"))
}

/// Largest interpolation error of the stencil functions over the
/// interpolated entries, relative to the largest matrix entry.
fn consistency_error(sp: &DiscreteSpace, geo: &surriga::geometry::GeometryMap, a: &CsrMatrix, q: usize, m: usize) -> f64 {
    let c = cfg(q, m, SymmetryMode::General);
    let (s, _) = build_surrogate(Form::PoissonStiffness, sp, sp, geo, &c).unwrap();
    let sl = StencilLayout::new(sp.space(), sp.space()).unwrap();
    let own = Ownership::new(&sl, sp.space(), &sl.lattice(m).unwrap(), SymmetryMode::General);
    let mask = own.row_mask();
    let mut e = 0.0f64;
    for i in 0..a.nrows() {
        if mask[i] {
            continue;
        }
        let (cols, vals) = a.row(i);
        for (&j, &v) in cols.iter().zip(vals) {
            e = e.max((s.get(i, j) - v).abs());
        }
    }
    e / a.max_abs()
}

fn c06_consistency_rate() -> Outcome {
    let geo = builtin_domain("coons_quadratic").unwrap();
    let sp = DiscreteSpace::new(&geo, 2, 192).unwrap();
    let a = assemble_full(Form::PoissonStiffness, &sp, &geo).unwrap();
    let ms = [2usize, 4, 8];
    let mut ok = true;
    let mut parts = Vec::new();
    for q in 1..=3 {
        let e: Vec<f64> = ms.iter().map(|&m| consistency_error(&sp, &geo, &a, q, m)).collect();
        let h: Vec<f64> = ms.iter().map(|&m| m as f64).collect();
        let rate = observed_rate(&h, &e);
        let target = if q % 2 == 0 { q as f64 + 2.0 } else { q as f64 + 1.0 } - CONSISTENCY_SLACK;
        ok &= rate >= target;
        parts.push(format!("q={q}: {rate:.2} (need {target:.1})"));
    }
    check(ok, parts.join(", "))
}

fn c07_kernel_and_symmetry() -> Outcome {
    let geo = builtin_domain("coons_2d").unwrap();
    let sp = DiscreteSpace::new(&geo, 2, 32).unwrap();
    let (kp, _) = build_surrogate(Form::PoissonStiffness, &sp, &sp, &geo, &cfg(3, 5, SymmetryMode::KernelPreserving)).unwrap();
    let (ge, _) = build_surrogate(Form::PoissonStiffness, &sp, &sp, &geo, &cfg(3, 5, SymmetryMode::General)).unwrap();
    let ones = vec![1.0; sp.len()];
    let scale = kp.max_abs();
    let r_kp = kp.mul_vec(&ones).iter().fold(0.0f64, |m, v| m.max(v.abs())) / scale;
    let r_ge = ge.mul_vec(&ones).iter().fold(0.0f64, |m, v| m.max(v.abs())) / scale;
    let sym = kp.is_symmetric_exact();
    check(
        r_kp <= REPRODUCTION_TOL && sym && r_ge > REPRODUCTION_TOL,
        format!("kernel mode |A1| {r_kp:.2e}, symmetric {sym}; general mode |A1| {r_ge:.2e} (must be > tol)"),
    )
}

fn c08_eigen() -> Outcome {
    let t0 = Instant::now();
    let mut c = StudyConfig::new(Problem::Eigen);
    c.spectrum_points = 50;
    let s = run_eigen_study(&c).unwrap();
    let h: Vec<f64> = s.rows.iter().map(|r| r.h).collect();
    let mut min_rate = f64::INFINITY;
    for k in 0..c.eigen_count {
        min_rate = min_rate.min(observed_rate(&h, &s.errors(k, true)));
    }
    let first = observed_rate(&h, &s.errors(0, true));
    let diff = s.spectrum.as_ref().map(|f| f.max_rel_diff()).unwrap_or(f64::NAN);
    let secs = t0.elapsed().as_secs_f64();
    check(
        min_rate >= EIGEN_RATE && diff <= FREQUENCY_DIFF && secs < 300.0,
        format!("rate first {first:.2}, min over 9 {min_rate:.2}; max freq diff at 50^2 {diff:.2e}; {secs:.1} s"),
    )
}

fn c09_biharmonic() -> Outcome {
    let rows = run_biharmonic_study(&StudyConfig::new(Problem::Biharmonic)).unwrap();
    let h2 = last_rate(&rows, |r| r.surr.h2);
    let h1 = last_rate(&rows, |r| r.surr.h1);
    let l2 = last_rate(&rows, |r| r.surr.l2);
    check(h2 >= 1.7 && h1 >= 2.7 && l2 >= 3.6, format!("surrogate H2 {h2:.2}, H1 {h1:.2}, L2 {l2:.2}"))
}

fn c10_cost_structure() -> Outcome {
    let mut c = StudyConfig::new(Problem::Bench);
    c.count_ladder = vec![32, 64, 128, 256, 512, 998];
    let counts = count_study(&c).unwrap();
    let monotone = counts.windows(2).all(|w| w[1].quad_fraction < w[0].quad_fraction);
    let above = counts.iter().all(|r| r.quad_fraction >= r.lower_bound);
    let big = counts.last().unwrap();
    c.ladder = vec![320];
    let (reports, t_std) = timing_harness(&c).unwrap();
    let speed_up = t_std[0] / reports[0].assembly_seconds - 1.0;
    check(
        monotone && above && big.quad_fraction <= QUAD_FRACTION_AT_1E6 && speed_up > 1.0,
        format!(
            "monotone {monotone}, above bound {above}, fraction {:.3} at N={}; speed-up {speed_up:.2} at N={}",
            big.quad_fraction, big.n_dofs, reports[0].n_dofs
        ),
    )
}

fn c11_bit_consistency() -> Outcome {
    let geo = builtin_domain("coons_2d").unwrap();
    let sp = DiscreteSpace::new(&geo, 2, 40).unwrap();
    let asm = Assembler::new(Form::PoissonStiffness, &sp, &sp, &geo).unwrap();
    let full = asm.assemble_full().unwrap();
    let sl = StencilLayout::new(sp.space(), sp.space()).unwrap();
    let mask = Ownership::new(&sl, sp.space(), &sl.lattice(5).unwrap(), SymmetryMode::KernelPreserving).row_mask();
    let (rows, _) = asm.assemble_rows(&mask).unwrap();
    let rows_ok = (0..full.nrows()).filter(|&i| mask[i]).all(|i| rows.row(i) == full.row(i));
    let (m1, _) = build_surrogate(Form::PoissonStiffness, &sp, &sp, &geo, &cfg(3, 1, SymmetryMode::KernelPreserving)).unwrap();
    let m1_ok = m1 == full;
    let export = || {
        let (s, _) = build_surrogate(Form::PoissonStiffness, &sp, &sp, &geo, &cfg(3, 5, SymmetryMode::KernelPreserving)).unwrap();
        let mut buf = Vec::new();
        s.write_matrix_market(&mut buf, false).unwrap();
        buf
    };
    let det_ok = export() == export();
    let (_, r) = build_standard(Form::PoissonStiffness, &sp, &sp, &geo).unwrap();
    check(rows_ok && m1_ok && det_ok && r.quad_fraction == 1.0, format!("rows {rows_ok}, M=1 {m1_ok}, re-run {det_ok}"))
}

fn c12_marsden() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let mut worst = 0.0f64;
    for p in 1..=5 {
        let kv = KnotVector::open_uniform(p, p + 9).unwrap();
        for _ in 0..100 {
            let (x, y) = (rng.random::<f64>(), rng.random::<f64>());
            worst = worst.max(marsden_residual(&kv, x, y).unwrap());
        }
    }
    check(worst <= MARSDEN_TOL, format!("max residual {worst:.2e}"))
}

fn main() {
    let only: Option<usize> = std::env::args().skip(1).find_map(|a| a.parse().ok());
    let criteria: [(&str, fn() -> Outcome); 12] = [
        ("reproduction on identity geometry", c01_identity_reproduction),
        ("mass matrix reproduction", c02_mass_reproduction),
        ("divergence matrix reproduction", c03_divergence_reproduction),
        ("Poisson convergence", c04_poisson_convergence),
        ("high-frequency insensitivity", c05_high_frequency),
        ("surrogate consistency rate", c06_consistency_rate),
        ("kernel and symmetry structure", c07_kernel_and_symmetry),
        ("eigenvalue study", c08_eigen),
        ("biharmonic rates", c09_biharmonic),
        ("cost structure", c10_cost_structure),
        ("bit consistency", c11_bit_consistency),
        ("Marsden identity", c12_marsden),
    ];
    let mut failed = 0;
    for (k, (name, f)) in criteria.iter().enumerate() {
        if only.is_some_and(|o| o != k + 1) {
            continue;
        }
        let t0 = Instant::now();
        let (tag, detail) = match f() {
            Ok(d) => ("PASS", d),
            Err(d) => {
                failed += 1;
                ("FAIL", d)
            }
        };
        println!("criterion {:>2} {tag} {name}: {detail} [{:.1} s]", k + 1, t0.elapsed().as_secs_f64());
    }
    if failed > 0 {
        println!("{failed} criterion(s) failed");
        std::process::exit(1);
    }
}
