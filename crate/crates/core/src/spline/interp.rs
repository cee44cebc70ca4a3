//! Exact spline interpolation on scattered 1-d abscissae and its tensor
//! product, applied one direction at a time.

use super::{ders_basis_into, find_span};
use crate::error::{Error, Result};

/// Degree-`q` spline through `L` points.
///
/// Knots are clamped at the first and last point. Odd degrees use interior
/// data points as knots (not-a-knot), even degrees use midpoints between data
/// points, so the collocation matrix satisfies Schoenberg-Whitney.
#[derive(Clone, Debug)]
pub struct Interpolant1d {
    degree: usize,
    knots: Vec<f64>,
    points: Vec<f64>,
    lu: BandLu,
}

impl Interpolant1d {
    pub fn new(points: &[f64], degree: usize) -> Result<Self> {
        let l = points.len();
        if l == 0 {
            return Err(Error::Invalid("no interpolation points".into()));
        }
        if points.windows(2).any(|w| !(w[0] < w[1])) {
            return Err(Error::Invalid("interpolation points must increase strictly".into()));
        }
        if l < degree + 1 {
            return Err(Error::Invalid(format!("{l} points cannot carry degree {degree}")));
        }
        if l == 1 || degree == 0 {
            if degree != 0 {
                return Err(Error::Invalid("degree 0 needed for a single point".into()));
            }
            // piecewise constant with breaks halfway between points
            let mut knots = vec![points[0]];
            knots.extend(points.windows(2).map(|w| 0.5 * (w[0] + w[1])));
            knots.push(points[l - 1] + 1.0);
            let lu = BandLu::identity(l);
            return Ok(Self { degree, knots, points: points.to_vec(), lu });
        }
        let q = degree;
        let mut knots = vec![points[0]; q + 1];
        if q % 2 == 1 {
            let half = q.div_ceil(2);
            knots.extend_from_slice(&points[half..l - half]);
        } else {
            let half = q / 2;
            for j in half + 1..l - half {
                knots.push(0.5 * (points[j - 1] + points[j]));
            }
        }
        knots.extend(std::iter::repeat_n(points[l - 1], q + 1));
        Self::with_knots(knots, q, points)
    }

    /// Interpolation with caller-chosen knots.
    pub fn with_knots(knots: Vec<f64>, degree: usize, points: &[f64]) -> Result<Self> {
        let l = points.len();
        if knots.len() != l + degree + 1 {
            return Err(Error::Dimension(format!(
                "{} knots for {} points of degree {}",
                knots.len(),
                l,
                degree
            )));
        }
        let mut buf = vec![0.0; degree + 1];
        let mut rows = Vec::with_capacity(l);
        for &x in points {
            let s = find_span(&knots, degree, x);
            ders_basis_into(&knots, degree, s, x, 0, &mut buf);
            rows.push((s - degree, buf.clone()));
        }
        let lu = BandLu::factor(l, &rows)?;
        Ok(Self { degree, knots, points: points.to_vec(), lu })
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn points(&self) -> &[f64] {
        &self.points
    }

    pub fn knots(&self) -> &[f64] {
        &self.knots
    }

    /// Overwrite values at the points with spline coefficients.
    pub fn solve_in_place(&self, rhs: &mut [f64]) {
        self.lu.solve(rhs);
    }

    /// Nonzero basis values at `x` (extrapolating outside the point range).
    pub fn basis_at(&self, x: f64) -> (usize, Vec<f64>) {
        if self.degree == 0 {
            let s = find_span(&self.knots, 0, x).min(self.points.len() - 1);
            return (s, vec![1.0]);
        }
        let s = find_span(&self.knots, self.degree, x);
        let mut buf = vec![0.0; self.degree + 1];
        ders_basis_into(&self.knots, self.degree, s, x, 0, &mut buf);
        (s - self.degree, buf)
    }

    /// Evaluate a spline with coefficients `c` at `x`.
    pub fn eval(&self, c: &[f64], x: f64) -> f64 {
        let (first, b) = self.basis_at(x);
        b.iter().enumerate().map(|(j, v)| v * c[first + j]).sum()
    }
}

/// LU factors of a banded matrix, without pivoting. Collocation matrices of
/// B-splines are totally positive, so elimination without pivoting is stable.
#[derive(Clone, Debug)]
struct BandLu {
    n: usize,
    kl: usize,
    ku: usize,
    band: Vec<f64>,
}

impl BandLu {
    fn identity(n: usize) -> Self {
        Self { n, kl: 0, ku: 0, band: vec![1.0; n] }
    }

    fn width(&self) -> usize {
        self.kl + self.ku + 1
    }

    fn at(&self, i: usize, j: usize) -> f64 {
        self.band[i * self.width() + j + self.kl - i]
    }

    fn at_mut(&mut self, i: usize, j: usize) -> &mut f64 {
        let w = self.width();
        &mut self.band[i * w + j + self.kl - i]
    }

    /// Rows given as (first column, values).
    fn factor(n: usize, rows: &[(usize, Vec<f64>)]) -> Result<Self> {
        let mut kl = 0;
        let mut ku = 0;
        for (i, (first, vals)) in rows.iter().enumerate() {
            kl = kl.max(i.saturating_sub(*first));
            ku = ku.max((first + vals.len() - 1).saturating_sub(i));
        }
        let mut lu = Self { n, kl, ku, band: vec![0.0; n * (kl + ku + 1)] };
        for (i, (first, vals)) in rows.iter().enumerate() {
            for (j, &v) in vals.iter().enumerate() {
                if v != 0.0 {
                    *lu.at_mut(i, first + j) = v;
                }
            }
        }
        for k in 0..n {
            let piv = lu.at(k, k);
            if piv.abs() < 1e-300 {
                return Err(Error::Numerical("singular collocation matrix".into()));
            }
            for i in k + 1..(k + kl + 1).min(n) {
                let l = lu.at(i, k) / piv;
                *lu.at_mut(i, k) = l;
                if l != 0.0 {
                    for j in k + 1..(k + ku + 1).min(n) {
                        let u = lu.at(k, j);
                        *lu.at_mut(i, j) -= l * u;
                    }
                }
            }
        }
        Ok(lu)
    }

    fn solve(&self, x: &mut [f64]) {
        let n = self.n;
        for i in 0..n {
            let mut s = x[i];
            for k in i.saturating_sub(self.kl)..i {
                s -= self.at(i, k) * x[k];
            }
            x[i] = s;
        }
        for i in (0..n).rev() {
            let mut s = x[i];
            for j in i + 1..(i + self.ku + 1).min(n) {
                s -= self.at(i, j) * x[j];
            }
            x[i] = s / self.at(i, i);
        }
    }
}

/// Apply `f` to every line of a colex array along direction `d`, producing
/// lines of length `new_len`. Returns the new array and updates `shape`.
pub fn map_lines(
    data: &[f64],
    shape: &mut [usize],
    d: usize,
    new_len: usize,
    mut f: impl FnMut(&[f64], &mut [f64]),
) -> Vec<f64> {
    let inner: usize = shape[..d].iter().product();
    let outer: usize = shape[d + 1..].iter().product();
    let old = shape[d];
    let mut out = vec![0.0; inner * new_len * outer];
    let mut line = vec![0.0; old];
    let mut res = vec![0.0; new_len];
    for o in 0..outer {
        for i in 0..inner {
            for (k, v) in line.iter_mut().enumerate() {
                *v = data[i + inner * (k + old * o)];
            }
            f(&line, &mut res);
            for (k, &v) in res.iter().enumerate() {
                out[i + inner * (k + new_len * o)] = v;
            }
        }
    }
    shape[d] = new_len;
    out
}

/// Tensor-product interpolation: values on the point grid become coefficients.
pub fn tensor_solve(dirs: &[&Interpolant1d], values: &[f64]) -> Vec<f64> {
    let mut shape: Vec<usize> = dirs.iter().map(|i| i.len()).collect();
    let mut data = values.to_vec();
    for (d, ip) in dirs.iter().enumerate() {
        let len = shape[d];
        data = map_lines(&data, &mut shape, d, len, |line, out| {
            out.copy_from_slice(line);
            ip.solve_in_place(out);
        });
    }
    data
}

/// Per-direction evaluation plan for a fixed list of target coordinates.
#[derive(Clone, Debug)]
pub struct EvalPlan {
    rows: Vec<(usize, Vec<f64>)>,
}

impl EvalPlan {
    pub fn new(ip: &Interpolant1d, targets: &[f64]) -> Self {
        Self { rows: targets.iter().map(|&x| ip.basis_at(x)).collect() }
    }

    /// Plan for a B-spline basis with arbitrary knots.
    pub fn from_knots(knots: &[f64], degree: usize, targets: &[f64]) -> Self {
        let rows = targets
            .iter()
            .map(|&x| {
                let s = find_span(knots, degree, x);
                let mut buf = vec![0.0; degree + 1];
                ders_basis_into(knots, degree, s, x, 0, &mut buf);
                (s - degree, buf)
            })
            .collect();
        Self { rows }
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    fn apply(&self, line: &[f64], out: &mut [f64]) {
        for (o, (first, b)) in out.iter_mut().zip(&self.rows) {
            *o = b.iter().enumerate().map(|(j, v)| v * line[first + j]).sum();
        }
    }
}

/// Evaluate a tensor spline with colex coefficients `coef` on the target grid.
pub fn tensor_eval(plans: &[&EvalPlan], coef: &[f64], coef_shape: &[usize]) -> Vec<f64> {
    let mut shape = coef_shape.to_vec();
    let mut data = coef.to_vec();
    for (d, plan) in plans.iter().enumerate() {
        data = map_lines(&data, &mut shape, d, plan.len(), |line, out| plan.apply(line, out));
    }
    data
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn poly(c: &[f64], x: f64) -> f64 {
        c.iter().rev().fold(0.0, |acc, &a| acc * x + a)
    }

    #[test]
    fn reproduces_polynomials_of_its_degree() {
        let pts: Vec<f64> = vec![0.1, 0.25, 0.3, 0.55, 0.61, 0.8, 0.97];
        for q in 1..=5 {
            let ip = Interpolant1d::new(&pts, q).unwrap();
            let coefs: Vec<f64> = (0..=q).map(|k| 1.0 / (k + 1) as f64).collect();
            let mut v: Vec<f64> = pts.iter().map(|&x| poly(&coefs, x)).collect();
            ip.solve_in_place(&mut v);
            for &x in &[0.1, 0.2, 0.33, 0.7, 0.97, 0.5] {
                assert!((ip.eval(&v, x) - poly(&coefs, x)).abs() < 1e-12, "q={q}");
            }
        }
    }

    #[test]
    fn quadratic_knots_sit_between_points() {
        let pts = [0.0, 1.0, 2.0, 3.0, 4.0];
        let ip = Interpolant1d::new(&pts, 2).unwrap();
        assert_eq!(ip.knots(), &[0.0, 0.0, 0.0, 1.5, 2.5, 4.0, 4.0, 4.0]);
        let ip = Interpolant1d::new(&pts, 3).unwrap();
        assert_eq!(ip.knots(), &[0.0, 0.0, 0.0, 0.0, 2.0, 4.0, 4.0, 4.0, 4.0]);
    }

    #[test]
    fn single_point_is_constant() {
        let ip = Interpolant1d::new(&[0.4], 0).unwrap();
        let mut v = vec![3.0];
        ip.solve_in_place(&mut v);
        assert_eq!(ip.eval(&v, 0.9), 3.0);
        assert!(Interpolant1d::new(&[0.4], 1).is_err());
    }

    #[test]
    fn tensor_interpolation_reproduces_bicubic() {
        let px = [0.0, 0.2, 0.5, 0.6, 0.9, 1.0];
        let py = [0.1, 0.3, 0.4, 0.7, 0.8];
        let ix = Interpolant1d::new(&px, 3).unwrap();
        let iy = Interpolant1d::new(&py, 3).unwrap();
        let f = |x: f64, y: f64| x * x * x * y - 2.0 * y * y * y + x * y + 1.0;
        let mut vals = Vec::new();
        for &y in &py {
            for &x in &px {
                vals.push(f(x, y));
            }
        }
        let c = tensor_solve(&[&ix, &iy], &vals);
        let tx = [0.05, 0.33, 0.77];
        let ty = [0.15, 0.5];
        let ex = EvalPlan::new(&ix, &tx);
        let ey = EvalPlan::new(&iy, &ty);
        let out = tensor_eval(&[&ex, &ey], &c, &[px.len(), py.len()]);
        for (b, &y) in ty.iter().enumerate() {
            for (a, &x) in tx.iter().enumerate() {
                assert!((out[a + 3 * b] - f(x, y)).abs() < 1e-12);
            }
        }
    }

    proptest! {
        #[test]
        fn interpolates_data_exactly(vals in proptest::collection::vec(-10.0f64..10.0, 8), q in 1usize..=5) {
            let pts: Vec<f64> = (0..8).map(|k| (k as f64 + 0.3 * (k % 3) as f64) / 10.0).collect();
            let ip = Interpolant1d::new(&pts, q).unwrap();
            let mut c = vals.clone();
            ip.solve_in_place(&mut c);
            for (x, v) in pts.iter().zip(&vals) {
                prop_assert!((ip.eval(&c, *x) - v).abs() < 1e-10);
            }
        }
    }
}
