//! Discrete fields and their errors against exact solutions.

use rayon::prelude::*;

use crate::assembly::integrator::Integrator;
use crate::assembly::DiscreteSpace;
use crate::error::{Error, Result};
use crate::geometry::GeometryMap;
use crate::linalg::Mat;
use crate::spline::MAX_DIM;

/// Relative errors in the L2, H1 and H2 norms (full norms, not seminorms).
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct ErrorNorms {
    pub l2: f64,
    pub h1: f64,
    pub h2: f64,
    /// Set when the exact solution has zero norm; the errors are absolute.
    pub absolute: bool,
}

/// Value, physical gradient and physical Hessian of an exact solution.
pub trait ExactField: Sync {
    fn value(&self, x: &[f64]) -> f64;
    fn grad(&self, x: &[f64]) -> [f64; MAX_DIM];
    fn hess(&self, x: &[f64]) -> Mat;
}

impl ExactField for super::exact::ScalarCase {
    fn value(&self, x: &[f64]) -> f64 {
        super::exact::ScalarCase::value(self, x)
    }
    fn grad(&self, x: &[f64]) -> [f64; MAX_DIM] {
        super::exact::ScalarCase::grad(self, x)
    }
    fn hess(&self, x: &[f64]) -> Mat {
        super::exact::ScalarCase::hess(self, x)
    }
}

/// Exact field given by closures; unused derivatives may return zeros.
pub struct FnField<V, G, H> {
    pub value: V,
    pub grad: G,
    pub hess: H,
}

impl<V, G, H> ExactField for FnField<V, G, H>
where
    V: Fn(&[f64]) -> f64 + Sync,
    G: Fn(&[f64]) -> [f64; MAX_DIM] + Sync,
    H: Fn(&[f64]) -> Mat + Sync,
{
    fn value(&self, x: &[f64]) -> f64 {
        (self.value)(x)
    }
    fn grad(&self, x: &[f64]) -> [f64; MAX_DIM] {
        (self.grad)(x)
    }
    fn hess(&self, x: &[f64]) -> Mat {
        (self.hess)(x)
    }
}

/// Squared error seminorms `|u - u_h|_k^2` and exact seminorms `|u|_k^2` for
/// `k = 0, 1, 2`.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct ErrorIntegrals {
    pub err: [f64; 3],
    pub exact: [f64; 3],
}

impl ErrorIntegrals {
    pub fn add(&self, other: &Self) -> Self {
        let mut r = *self;
        for k in 0..3 {
            r.err[k] += other.err[k];
            r.exact[k] += other.exact[k];
        }
        r
    }

    /// Relative full norms up to `order`.
    pub fn norms(&self, order: usize) -> ErrorNorms {
        let (s, r) = (self.err, self.exact);
        let (e0, e1, e2) = (s[0], s[0] + s[1], s[0] + s[1] + s[2]);
        let (r0, r1, r2) = (r[0], r[0] + r[1], r[0] + r[1] + r[2]);
        let rel = |e: f64, r: f64| if r > 0.0 { (e / r).sqrt() } else { e.sqrt() };
        ErrorNorms {
            l2: rel(e0, r0),
            h1: if order >= 1 { rel(e1, r1) } else { 0.0 },
            h2: if order >= 2 { rel(e2, r2) } else { 0.0 },
            absolute: r0 == 0.0 && (order == 0 || r1 == 0.0),
        }
    }
}

/// Errors of the field with coefficients `coeffs` in `space`, by Gauss
/// quadrature with `p + 2` points per direction. `order` selects the highest
/// derivative included (0, 1 or 2); norms above it are reported as zero.
pub fn error_norms(coeffs: &[f64], space: &DiscreteSpace, geometry: &GeometryMap, exact: &dyn ExactField, order: usize) -> Result<ErrorNorms> {
    Ok(error_integrals(coeffs, space, geometry, exact, order)?.norms(order))
}

pub fn error_integrals(coeffs: &[f64], space: &DiscreteSpace, geometry: &GeometryMap, exact: &dyn ExactField, order: usize) -> Result<ErrorIntegrals> {
    if coeffs.len() != space.len() {
        return Err(Error::Dimension(format!("{} coefficients for {} basis functions", coeffs.len(), space.len())));
    }
    if order > 2 {
        return Err(Error::Invalid("error norms up to second derivatives only".into()));
    }
    let g = space.degree() + 2;
    let integ = Integrator::new(geometry, &[(space.space(), space.weights(), order)], g, order)?;
    let n = space.dim();
    let ne = integ.element_count();
    let elements: Vec<usize> = (0..ne).collect();
    // [err0, err1, err2, ref0, ref1, ref2] per chunk, summed in chunk order
    let parts: Vec<Result<[f64; 6]>> = elements
        .par_chunks(64)
        .map(|chunk| {
            let mut sc = integ.scratch();
            let mut acc = [0.0; 6];
            for &ef in chunk {
                let e = integ.element_multi(ef);
                for qf in 0..integ.qp_count() {
                    let geo = integ.eval_qp(&e, qf, &mut sc, order >= 2)?;
                    let x = &geo.x[..n];
                    let ph = &sc.phys[0];
                    let idx = &sc.lbs[0].indices;
                    let w = geo.wdet;
                    let mut uh = 0.0;
                    let mut gh = [0.0; MAX_DIM];
                    let mut hh = [[0.0; MAX_DIM]; MAX_DIM];
                    for (a, &i) in idx.iter().enumerate() {
                        let c = coeffs[i];
                        uh += c * ph.values[a];
                        if order >= 1 {
                            for k in 0..n {
                                gh[k] += c * ph.grads[a][k];
                            }
                        }
                        if order >= 2 {
                            for k in 0..n {
                                for l in 0..n {
                                    hh[k][l] += c * ph.hess[a][k][l];
                                }
                            }
                        }
                    }
                    let u = exact.value(x);
                    acc[0] += w * (u - uh).powi(2);
                    acc[3] += w * u * u;
                    if order >= 1 {
                        let gu = exact.grad(x);
                        for k in 0..n {
                            acc[1] += w * (gu[k] - gh[k]).powi(2);
                            acc[4] += w * gu[k] * gu[k];
                        }
                    }
                    if order >= 2 {
                        let hu = exact.hess(x);
                        for k in 0..n {
                            for l in 0..n {
                                acc[2] += w * (hu[k][l] - hh[k][l]).powi(2);
                                acc[5] += w * hu[k][l] * hu[k][l];
                            }
                        }
                    }
                }
            }
            Ok(acc)
        })
        .collect();
    let mut s = [0.0; 6];
    for p in parts {
        let p = p?;
        for k in 0..6 {
            s[k] += p[k];
        }
    }
    Ok(ErrorIntegrals { err: [s[0], s[1], s[2]], exact: [s[3], s[4], s[5]] })
}

/// `int f dx` over the mapped domain.
pub fn integrate(geometry: &GeometryMap, f: &(dyn Fn(&[f64]) -> f64 + Sync), g: usize) -> Result<f64> {
    let sp = geometry.space();
    let integ = Integrator::new(geometry, &[(sp, geometry.weights(), 0)], g, 1)?;
    let n = geometry.dim();
    let mut sc = integ.scratch();
    let mut s = 0.0;
    for ef in 0..integ.element_count() {
        let e = integ.element_multi(ef);
        for qf in 0..integ.qp_count() {
            let geo = integ.eval_qp(&e, qf, &mut sc, false)?;
            s += geo.wdet * f(&geo.x[..n]);
        }
    }
    Ok(s)
}

/// Least-squares slope of `log e` against `log h` over the last two points.
pub fn observed_rate(h: &[f64], e: &[f64]) -> f64 {
    let k = h.len();
    if k < 2 || e.len() != k {
        return f64::NAN;
    }
    (e[k - 2] / e[k - 1]).ln() / (h[k - 2] / h[k - 1]).ln()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::assembly::{apply_dirichlet, assemble_full, assemble_rhs, boundary_values, Form};
    use crate::geometry::builtin_domain;
    use crate::problems::exact::ScalarCase;
    use crate::solvers::{solve_spd, SolveOptions};

    #[test]
    fn constants_are_reproduced() {
        let geo = builtin_domain("coons_2d").unwrap();
        let sp = DiscreteSpace::new(&geo, 2, 6).unwrap();
        let c = vec![1.0; sp.len()];
        let e = error_norms(&c, &sp, &geo, &ScalarCase::Constant(1.0), 2).unwrap();
        assert!(e.l2 < 1e-12 && e.h1 < 1e-12 && e.h2 < 1e-12);
        assert!(!e.absolute);
    }

    #[test]
    fn zero_field_has_unit_relative_error() {
        let geo = builtin_domain("unit_square").unwrap();
        let sp = DiscreteSpace::new(&geo, 2, 4).unwrap();
        let e = error_norms(&vec![0.0; sp.len()], &sp, &geo, &ScalarCase::low_frequency(), 2).unwrap();
        assert!((e.l2 - 1.0).abs() < 1e-10 && (e.h1 - 1.0).abs() < 1e-10 && (e.h2 - 1.0).abs() < 1e-10);
    }

    #[test]
    fn quadratic_poisson_converges_at_third_order() {
        let geo = builtin_domain("unit_square").unwrap();
        let case = ScalarCase::low_frequency();
        let mut errs = Vec::new();
        for spans in [8, 16] {
            let sp = DiscreteSpace::new(&geo, 2, spans).unwrap();
            let a = assemble_full(Form::PoissonStiffness, &sp, &geo).unwrap();
            let f = assemble_rhs(&sp, &geo, &|x| case.poisson_load(x), Some(4)).unwrap();
            let (fixed, vals) = boundary_values(&sp, &geo, &|x| case.value(x)).unwrap();
            let sys = apply_dirichlet(&a, &f, &fixed, &vals).unwrap();
            let x = solve_spd(&sys.matrix, &sys.rhs, &SolveOptions::default()).unwrap();
            errs.push(error_norms(&sys.expand(&x), &sp, &geo, &case, 1).unwrap().l2);
        }
        let ratio = errs[0] / errs[1];
        assert!((6.5..=9.5).contains(&ratio), "{ratio}");
    }

    #[test]
    fn area_of_quarter_annulus() {
        let geo = builtin_domain("quarter_annulus").unwrap();
        let a = integrate(&geo, &|_| 1.0, 20).unwrap();
        assert!((a - 0.75 * std::f64::consts::PI).abs() < 1e-12, "{a}");
    }
}
