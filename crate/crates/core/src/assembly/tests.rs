use super::*;
use crate::geometry::{builtin_domain, coons_nurbs, quarter_annulus, unit_cube};
use crate::linalg;
use proptest::prelude::*;

fn dense_oracle(form: Form, space: &DiscreteSpace, geo: &GeometryMap) -> Vec<Vec<f64>> {
    // global quadrature through point-wise evaluation of the original map
    let sp = space.space();
    let n = sp.dim();
    let g = space.degree() + 2;
    let rule = quadrature::GaussRule::new(g);
    let e = space.spans();
    let mut a = vec![vec![0.0; sp.len()]; sp.len()];
    let ne = e.pow(n as u32);
    for ef in 0..ne {
        let em = crate::spline::multi_index(ef, &[e, e, e][..n]);
        for qf in 0..g.pow(n as u32) {
            let qm = crate::spline::multi_index(qf, &[g, g, g][..n]);
            let x: Vec<f64> = (0..n).map(|d| (em[d] as f64 + rule.points[qm[d]]) / e as f64).collect();
            let w: f64 = (0..n).map(|d| rule.weights[qm[d]] / e as f64).product();
            let b = sp.eval_nurbs(space.weights(), &x, 1).unwrap();
            let j = geo.jacobian(&x).unwrap();
            let ginv = j.inverse();
            let phys: Vec<[f64; 3]> = b
                .grads
                .iter()
                .map(|gh| {
                    let mut out = [0.0; 3];
                    for c in 0..n {
                        out[c] = (0..n).map(|k| ginv[k][c] * gh[k]).sum();
                    }
                    out
                })
                .collect();
            for (ia, &i) in b.indices.iter().enumerate() {
                for (ib, &jj) in b.indices.iter().enumerate() {
                    let v = match form {
                        Form::Mass => b.values[ia] * b.values[ib],
                        _ => (0..n).map(|c| phys[ia][c] * phys[ib][c]).sum(),
                    };
                    a[i][jj] += w * j.det * v;
                }
            }
        }
    }
    a
}

#[test]
fn one_dimensional_hat_matrices() {
    let geo = unit_cube(1).unwrap();
    let sp = DiscreteSpace::new(&geo, 1, 4).unwrap();
    let k = assemble_full(Form::PoissonStiffness, &sp, &geo).unwrap();
    assert!((k.get(2, 2) - 8.0).abs() < 1e-13);
    assert!((k.get(2, 1) + 4.0).abs() < 1e-13);
    let m = assemble_full(Form::Mass, &sp, &geo).unwrap();
    assert!((m.get(2, 2) - 1.0 / 6.0).abs() < 1e-15);
    let f = assemble_rhs(&sp, &geo, &|_| 1.0, None).unwrap();
    assert!((f[2] - 0.25).abs() < 1e-15);
    assert!((f.iter().sum::<f64>() - 1.0).abs() < 1e-15);
}

#[test]
fn matches_pointwise_oracle_on_nurbs_domain() {
    let geo = coons_nurbs().unwrap();
    let sp = DiscreteSpace::new(&geo, 2, 5).unwrap();
    for form in [Form::PoissonStiffness, Form::Mass] {
        let a = Assembler::with_quadrature(form, &sp, &sp, &geo, 4).unwrap().assemble_full().unwrap();
        let o = dense_oracle(form, &sp, &geo);
        let scale = a.max_abs();
        for (i, row) in o.iter().enumerate() {
            for (j, v) in row.iter().enumerate() {
                assert!((a.get(i, j) - v).abs() <= 1e-12 * scale, "{form:?} ({i},{j}) {} vs {v}", a.get(i, j));
            }
        }
    }
}

#[test]
fn stiffness_kernel_and_exact_symmetry() {
    let geo = coons_nurbs().unwrap();
    let sp = DiscreteSpace::new(&geo, 3, 7).unwrap();
    let a = assemble_full(Form::PoissonStiffness, &sp, &geo).unwrap();
    assert!(a.is_symmetric_exact());
    let r = a.mul_vec(&vec![1.0; sp.len()]);
    let m = r.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    assert!(m <= 1e-12 * a.max_abs(), "row sum {m}");
}

#[test]
fn biharmonic_annihilates_linear_functions() {
    let geo = quarter_annulus(1.0, 2.0).unwrap();
    let sp = DiscreteSpace::new(&geo, 3, 6).unwrap();
    let a = assemble_full(Form::Biharmonic, &sp, &geo).unwrap();
    assert!(a.is_symmetric_exact());
    let g = sp.geometry().unwrap();
    for c in 0..2 {
        let x: Vec<f64> = (0..sp.len()).map(|i| g.control_point(i)[c]).collect();
        let r = a.mul_vec(&x);
        let m = r.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        assert!(m <= 1e-9 * a.max_abs(), "component {c}: {m}");
    }
}

#[test]
fn affine_maps_are_integrated_exactly() {
    let kv = KnotVector::bezier(1).unwrap();
    let space = TensorSpace::new(vec![kv.clone(), kv]).unwrap();
    let geo = GeometryMap::new(space, Weights::uniform(4), vec![0.0, 0.0, 2.0, 0.5, 0.0, 1.5, 2.0, 2.0]).unwrap();
    let sp = DiscreteSpace::new(&geo, 2, 6).unwrap();
    for form in [Form::PoissonStiffness, Form::Mass, Form::Biharmonic] {
        let a = Assembler::with_quadrature(form, &sp, &sp, &geo, 3).unwrap().assemble_full().unwrap();
        let b = Assembler::with_quadrature(form, &sp, &sp, &geo, 5).unwrap().assemble_full().unwrap();
        assert!(a.max_abs_diff(&b) <= 1e-13 * a.max_abs(), "{form:?}");
    }
}

#[test]
fn poisson_coefficient_of_scaled_square_gives_laplacian() {
    let geo = builtin_domain("unit_square").unwrap();
    let kv = KnotVector::bezier(1).unwrap();
    let space = TensorSpace::new(vec![kv.clone(), kv]).unwrap();
    let big = GeometryMap::new(space, Weights::uniform(4), vec![0.0, 0.0, 2.0, 0.0, 0.0, 2.0, 2.0, 2.0]).unwrap();
    let sp = DiscreteSpace::new(&geo, 2, 5).unwrap();
    let a = assemble_full(Form::PoissonStiffness, &sp, &geo).unwrap();
    let b = assemble_full(Form::PoissonStiffness, &sp, &big).unwrap();
    assert!(a.max_abs_diff(&b) < 1e-14);
}

#[test]
fn thread_count_does_not_change_bits() {
    let geo = coons_nurbs().unwrap();
    let sp = DiscreteSpace::new(&geo, 2, 20).unwrap();
    let run = |t: usize| {
        let pool = rayon::ThreadPoolBuilder::new().num_threads(t).build().unwrap();
        pool.install(|| assemble_full(Form::PoissonStiffness, &sp, &geo).unwrap())
    };
    assert_eq!(run(1), run(3));
}

#[test]
fn divergence_of_interior_functions_integrates_to_zero() {
    let geo = builtin_domain("coons_cubic").unwrap();
    let (vel, pre) = stokes_spaces(&geo, 2, 4).unwrap();
    let gv = vel.geometry().unwrap().clone();
    for c in 0..2 {
        let b = Assembler::new(Form::StokesDivergence { component: c }, &pre, &vel, &gv).unwrap().assemble_full().unwrap();
        assert_eq!(b.nrows(), pre.len());
        assert_eq!(b.ncols(), vel.len());
        let ones = vec![1.0; pre.len()];
        let col = b.transpose().mul_vec(&ones);
        let boundary: std::collections::HashSet<usize> = vel.space().boundary_functions().into_iter().collect();
        for (j, v) in col.iter().enumerate() {
            if !boundary.contains(&j) {
                assert!(v.abs() < 1e-13, "column {j}: {v}");
            }
        }
    }
}

#[test]
fn dirichlet_elimination_matches_pinned_rows() {
    let geo = unit_cube(1).unwrap();
    let sp = DiscreteSpace::new(&geo, 1, 4).unwrap();
    let a = assemble_full(Form::PoissonStiffness, &sp, &geo).unwrap();
    let rhs = assemble_rhs(&sp, &geo, &|x| x[0], None).unwrap();
    let sys = apply_dirichlet(&a, &rhs, &[0, 4], &[1.0, 2.0]).unwrap();
    assert_eq!(sys.matrix.nrows(), 3);
    assert!((sys.matrix.get(0, 1) + 4.0).abs() < 1e-13);
    let u_red = dense_solve(sys.matrix.to_dense(), sys.rhs.clone());
    let full = sys.expand(&u_red);
    // pinned-row system
    let mut d = a.to_dense();
    let mut b = rhs.clone();
    for (&i, &v) in [0usize, 4].iter().zip(&[1.0, 2.0]) {
        d[i].iter_mut().for_each(|x| *x = 0.0);
        d[i][i] = 1.0;
        b[i] = v;
    }
    let pinned = dense_solve(d, b);
    for (x, y) in full.iter().zip(&pinned) {
        assert!((x - y).abs() < 1e-12);
    }
}

#[test]
fn boundary_interpolation_is_exact_for_linear_data() {
    let geo = quarter_annulus(1.0, 2.0).unwrap();
    let sp = DiscreteSpace::new(&geo, 2, 4).unwrap();
    let (fixed, vals) = boundary_values(&sp, &geo, &|x| 2.0 * x[0] - x[1]).unwrap();
    assert_eq!(fixed, sp.space().boundary_functions());
    let g = sp.geometry().unwrap();
    for (&i, &v) in fixed.iter().zip(&vals) {
        let c = g.control_point(i);
        assert!((v - (2.0 * c[0] - c[1])).abs() < 1e-13);
    }
}

fn dense_solve(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Vec<f64> {
    let n = b.len();
    for k in 0..n {
        let p = (k..n).max_by(|&i, &j| a[i][k].abs().total_cmp(&a[j][k].abs())).unwrap();
        a.swap(k, p);
        b.swap(k, p);
        for i in k + 1..n {
            let l = a[i][k] / a[k][k];
            for j in k..n {
                a[i][j] -= l * a[k][j];
            }
            b[i] -= l * b[k];
        }
    }
    let mut x = vec![0.0; n];
    for i in (0..n).rev() {
        let s: f64 = (i + 1..n).map(|j| a[i][j] * x[j]).sum();
        x[i] = (b[i] - s) / a[i][i];
    }
    x
}

#[test]
fn jacobian_inverse_consistency() {
    let geo = coons_nurbs().unwrap();
    let j = geo.jacobian(&[0.3, 0.4]).unwrap();
    let prod = linalg::mul(&j.mat, &j.inverse(), 2);
    assert!((prod[0][0] - 1.0).abs() < 1e-14 && prod[0][1].abs() < 1e-14);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]
    #[test]
    fn row_assembly_is_bit_identical(mask_seed in proptest::collection::vec(any::<bool>(), 64), p in 1usize..4, form_pick in 0usize..3) {
        let geo = coons_nurbs().unwrap();
        let sp = DiscreteSpace::new(&geo, p.max(2), 8).unwrap();
        let form = [Form::PoissonStiffness, Form::Mass, Form::Biharmonic][form_pick];
        let asm = Assembler::new(form, &sp, &sp, &geo).unwrap();
        let full = asm.assemble_full().unwrap();
        let rows: Vec<bool> = (0..sp.len()).map(|i| mask_seed[i % 64] && (i * 7) % 3 != 0).collect();
        let (part, info) = asm.assemble_rows(&rows).unwrap();
        prop_assert!(info.active_elements <= info.total_elements);
        for i in 0..sp.len() {
            if rows[i] {
                let (c1, v1) = full.row(i);
                let (c2, v2) = part.row(i);
                prop_assert_eq!(c1, c2);
                for (a, b) in v1.iter().zip(v2) {
                    prop_assert_eq!(a.to_bits(), b.to_bits());
                }
            } else {
                prop_assert_eq!(part.row_len(i), 0);
            }
        }
    }

    #[test]
    fn translation_of_cardinal_stencils_on_identity(i in 4usize..8, j in 4usize..8) {
        let geo = unit_cube(2).unwrap();
        let sp = DiscreteSpace::new(&geo, 2, 10).unwrap();
        let a = assemble_full(Form::PoissonStiffness, &sp, &geo).unwrap();
        let s = sp.space();
        let r0 = s.flat(&[4, 4]);
        let r1 = s.flat(&[i, j]);
        for dy in -2i64..=2 {
            for dx in -2i64..=2 {
                let c0 = s.flat(&[(4 + dx) as usize, (4 + dy) as usize]);
                let c1 = s.flat(&[(i as i64 + dx) as usize, (j as i64 + dy) as usize]);
                prop_assert!((a.get(r0, c0) - a.get(r1, c1)).abs() < 1e-13);
            }
        }
    }
}
