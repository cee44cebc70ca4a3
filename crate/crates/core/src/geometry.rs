//! NURBS geometry maps from the unit cube onto physical domains.
//!
//! A map is stored as a tensor space, weights and control points. Built-in
//! domains live on a single polynomial patch and are refined exactly onto
//! analysis spaces, so the weight function stays a global polynomial.

use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};
use crate::linalg::{self, Mat};
use crate::spline::interp::{map_lines, tensor_eval, EvalPlan, Interpolant1d};
use crate::spline::{KnotVector, LocalBasis, TensorSpace, Weights, MAX_DIM};

/// Jacobian `J[a][k] = d phi_a / d xhat_k` at a point.
#[derive(Clone, Copy, Debug)]
pub struct Jacobian {
    pub n: usize,
    pub mat: Mat,
    pub det: f64,
}

impl Jacobian {
    pub fn inverse(&self) -> Mat {
        linalg::inverse(&self.mat, self.n).0
    }

    pub fn adjugate(&self) -> Mat {
        linalg::adjugate(&self.mat, self.n)
    }

    /// Diffusion coefficient of the pulled-back Laplacian, `|det J| J^-1 J^-T`.
    pub fn poisson_coefficient(&self) -> Mat {
        let inv = self.inverse();
        let mut k = linalg::mul(&inv, &linalg::transpose(&inv), self.n);
        for row in k.iter_mut().take(self.n) {
            for v in row.iter_mut().take(self.n) {
                *v *= self.det.abs();
            }
        }
        k
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct GeometryMap {
    space: TensorSpace,
    weights: Weights,
    /// Control points, `dim` coordinates per basis function.
    points: Vec<f64>,
}

impl GeometryMap {
    /// Build and validate a map; rejects non-positive Jacobians on a `21^n` grid.
    pub fn new(space: TensorSpace, weights: Weights, points: Vec<f64>) -> Result<Self> {
        let g = Self::new_unchecked(space, weights, points)?;
        g.check_jacobian(21)?;
        Ok(g)
    }

    fn new_unchecked(space: TensorSpace, weights: Weights, points: Vec<f64>) -> Result<Self> {
        let n = space.dim();
        if weights.len() != space.len() {
            return Err(Error::Dimension(format!("{} weights for {} basis functions", weights.len(), space.len())));
        }
        if points.len() != space.len() * n {
            return Err(Error::Dimension(format!(
                "{} coordinates for {} control points in {n}-d",
                points.len(),
                space.len()
            )));
        }
        if points.iter().any(|v| !v.is_finite()) {
            return Err(Error::Invalid("non-finite control point".into()));
        }
        Ok(Self { space, weights, points })
    }

    pub fn dim(&self) -> usize {
        self.space.dim()
    }

    pub fn space(&self) -> &TensorSpace {
        &self.space
    }

    pub fn weights(&self) -> &Weights {
        &self.weights
    }

    pub fn control_point(&self, i: usize) -> &[f64] {
        let n = self.dim();
        &self.points[i * n..(i + 1) * n]
    }

    pub fn control_points(&self) -> &[f64] {
        &self.points
    }

    /// True when all weights are equal, i.e. the map is piecewise polynomial.
    pub fn is_polynomial(&self) -> bool {
        !self.weights.is_rational()
    }

    fn basis(&self, x: &[f64], nd: usize) -> Result<LocalBasis> {
        self.space.eval_nurbs(&self.weights, x, nd)
    }

    pub fn eval(&self, x: &[f64]) -> Result<Vec<f64>> {
        let b = self.basis(x, 0)?;
        let n = self.dim();
        let mut out = vec![0.0; n];
        for (a, &i) in b.indices.iter().enumerate() {
            for (c, o) in out.iter_mut().enumerate() {
                *o += b.values[a] * self.points[i * n + c];
            }
        }
        Ok(out)
    }

    pub fn jacobian(&self, x: &[f64]) -> Result<Jacobian> {
        let b = self.basis(x, 1)?;
        Ok(self.jacobian_from(&b))
    }

    /// Jacobian from precomputed basis data of this map's own space.
    pub fn jacobian_from(&self, b: &LocalBasis) -> Jacobian {
        let n = self.dim();
        let mut mat = [[0.0; MAX_DIM]; MAX_DIM];
        for (a, &i) in b.indices.iter().enumerate() {
            for (c, row) in mat.iter_mut().enumerate().take(n) {
                let cp = self.points[i * n + c];
                for (k, v) in row.iter_mut().enumerate().take(n) {
                    *v += cp * b.grads[a][k];
                }
            }
        }
        Jacobian { n, mat, det: linalg::det(&mat, n) }
    }

    /// `K = |det J| J^-1 J^-T` at `x`.
    pub fn poisson_coefficient(&self, x: &[f64]) -> Result<Mat> {
        let j = self.jacobian(x)?;
        if j.det == 0.0 {
            return Err(Error::SingularJacobian { point: x.to_vec(), det: 0.0 });
        }
        Ok(j.poisson_coefficient())
    }

    /// Weight function `W = sum w_i B_i` at `x`.
    pub fn weight_function(&self, x: &[f64]) -> Result<f64> {
        let b = self.space.eval(x, 0)?;
        Ok(b.indices.iter().zip(&b.values).map(|(&i, v)| self.weights.values()[i] * v).sum())
    }

    /// Reject maps whose Jacobian determinant is not positive on a `k^n` grid.
    pub fn check_jacobian(&self, k: usize) -> Result<()> {
        let n = self.dim();
        let total = k.pow(n as u32);
        for s in 0..total {
            let mut r = s;
            let x: Vec<f64> = (0..n)
                .map(|_| {
                    let c = r % k;
                    r /= k;
                    c as f64 / (k - 1) as f64
                })
                .collect();
            let j = self.jacobian(&x)?;
            if !(j.det > 0.0) || !j.det.is_finite() {
                return Err(Error::SingularJacobian { point: x, det: j.det });
            }
        }
        Ok(())
    }

    /// Represent the same map on the open uniform space of degree `degree`
    /// with `spans` elements per direction.
    ///
    /// The target space must contain the source space: equal or higher degree,
    /// a multiple of the source spans, and degree elevation only from a single
    /// span. The homogeneous form is interpolated at the target Greville points,
    /// which reproduces it exactly.
    pub fn refine(&self, degree: usize, spans: usize) -> Result<Self> {
        let n = self.dim();
        let mut dirs = Vec::with_capacity(n);
        for kv in self.space.dirs() {
            let (p0, e0) = (kv.degree(), kv.spans());
            let nested = degree >= p0 && spans.is_multiple_of(e0) && (degree == p0 || e0 == 1);
            if !nested {
                return Err(Error::Invalid(format!(
                    "degree {degree} with {spans} spans does not contain degree {p0} with {e0} spans"
                )));
            }
            dirs.push(KnotVector::with_spans(degree, spans)?);
        }
        let target = TensorSpace::new(dirs)?;
        if target == self.space {
            return Ok(self.clone());
        }
        let src_shape: Vec<usize> = self.space.dirs().iter().map(|k| k.basis_count()).collect();
        let plans: Vec<EvalPlan> = self
            .space
            .dirs()
            .iter()
            .zip(target.dirs())
            .map(|(s, t)| {
                let g: Vec<f64> = (0..t.basis_count()).map(|k| t.greville(k)).collect();
                EvalPlan::from_knots(s.knots(), s.degree(), &g)
            })
            .collect();
        let interps: Vec<Interpolant1d> = target
            .dirs()
            .iter()
            .map(|t| {
                let g: Vec<f64> = (0..t.basis_count()).map(|k| t.greville(k)).collect();
                Interpolant1d::with_knots(t.knots().to_vec(), t.degree(), &g)
            })
            .collect::<Result<_>>()?;
        let plan_refs: Vec<&EvalPlan> = plans.iter().collect();
        let convert = |coef: Vec<f64>| -> Vec<f64> {
            let vals = tensor_eval(&plan_refs, &coef, &src_shape);
            let mut shape: Vec<usize> = interps.iter().map(|i| i.len()).collect();
            let mut data = vals;
            for (d, ip) in interps.iter().enumerate() {
                let len = shape[d];
                data = map_lines(&data, &mut shape, d, len, |line, out| {
                    out.copy_from_slice(line);
                    ip.solve_in_place(out);
                });
            }
            data
        };
        let src_w = self.weights.values();
        let len = target.len();
        let (weights, scale): (Weights, Vec<f64>) = if self.weights.is_rational() {
            let w = convert(src_w.to_vec());
            let ws = Weights::new(w.clone())?;
            (ws, w)
        } else {
            (Weights::uniform(len), vec![1.0; len])
        };
        let mut points = vec![0.0; len * n];
        for c in 0..n {
            let coef: Vec<f64> = (0..self.space.len())
                .map(|i| {
                    let w = if self.weights.is_rational() { src_w[i] } else { 1.0 };
                    w * self.points[i * n + c]
                })
                .collect();
            let hom = convert(coef);
            for i in 0..len {
                points[i * n + c] = hom[i] / scale[i];
            }
        }
        let weights = if self.weights.is_rational() {
            weights
        } else {
            Weights::new(vec![src_w[0]; len])?
        };
        Self::new_unchecked(target, weights, points)
    }

    /// Serialise in the `iga-geo v1` text format.
    pub fn to_text(&self) -> String {
        let n = self.dim();
        let ms: Vec<String> = self.space.dirs().iter().map(|k| k.basis_count().to_string()).collect();
        let mut s = format!("iga-geo v1 n={} p={} m={}\n", n, self.space.degree(), ms.join(","));
        for i in 0..self.space.len() {
            let _ = write!(s, "{} {:e}", i + 1, self.weights.values()[i]);
            for c in 0..n {
                let _ = write!(s, " {:e}", self.points[i * n + c]);
            }
            s.push('\n');
        }
        s
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
        let (hl, header) = lines.next().ok_or(Error::Format { line: 1, msg: "empty file".into() })?;
        let fmt = |line: usize, msg: &str| Error::Format { line: line + 1, msg: msg.to_string() };
        let toks: Vec<&str> = header.split_whitespace().collect();
        if toks.len() != 5 || toks[0] != "iga-geo" || toks[1] != "v1" {
            return Err(fmt(hl, "expected `iga-geo v1 n=<n> p=<p> m=<m,...>`"));
        }
        let field = |t: &str, key: &str| -> Result<String> {
            t.strip_prefix(key).map(str::to_string).ok_or_else(|| fmt(hl, &format!("missing `{key}`")))
        };
        let n: usize = field(toks[2], "n=")?.parse().map_err(|_| fmt(hl, "bad n"))?;
        let p: usize = field(toks[3], "p=")?.parse().map_err(|_| fmt(hl, "bad p"))?;
        let ms: Vec<usize> = field(toks[4], "m=")?
            .split(',')
            .map(|v| v.parse::<usize>().map_err(|_| fmt(hl, "bad m")))
            .collect::<Result<_>>()?;
        if n == 0 || n > MAX_DIM || ms.len() != n {
            return Err(fmt(hl, "dimension and m list disagree"));
        }
        let dirs = ms
            .iter()
            .map(|&m| {
                if m <= p {
                    Err(fmt(hl, "m must exceed p"))
                } else {
                    KnotVector::with_spans(p, m - p)
                }
            })
            .collect::<Result<Vec<_>>>()?;
        let space = TensorSpace::new(dirs)?;
        let count = space.len();
        let mut weights = Vec::with_capacity(count);
        let mut points = Vec::with_capacity(count * n);
        let mut last = hl;
        for k in 0..count {
            let (ln, line) = lines.next().ok_or_else(|| fmt(last + 1, "file ends before all control points"))?;
            last = ln;
            let vals: Vec<&str> = line.split_whitespace().collect();
            if vals.len() != n + 2 {
                return Err(fmt(ln, &format!("expected {} fields", n + 2)));
            }
            let idx: usize = vals[0].parse().map_err(|_| fmt(ln, "bad index"))?;
            if idx != k + 1 {
                return Err(fmt(ln, "control points must be listed in colex order"));
            }
            let nums: Vec<f64> = vals[1..]
                .iter()
                .map(|v| v.parse::<f64>().map_err(|_| fmt(ln, "bad number")))
                .collect::<Result<_>>()?;
            weights.push(nums[0]);
            points.extend_from_slice(&nums[1..]);
        }
        if let Some((ln, _)) = lines.next() {
            return Err(fmt(ln, "trailing data"));
        }
        Self::new(space, Weights::new(weights)?, points)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_text())?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_text(&std::fs::read_to_string(path)?)
    }
}

/// Rational Bezier curve in the plane.
#[derive(Clone, Debug)]
pub struct BezierCurve {
    pub weights: Vec<f64>,
    pub points: Vec<[f64; 2]>,
}

impl BezierCurve {
    pub fn polynomial(points: Vec<[f64; 2]>) -> Self {
        Self { weights: vec![1.0; points.len()], points }
    }

    fn homogeneous(&self) -> Vec<[f64; 3]> {
        self.weights
            .iter()
            .zip(&self.points)
            .map(|(&w, p)| [w, w * p[0], w * p[1]])
            .collect()
    }
}

fn elevate(h: &[[f64; 3]], to: usize) -> Vec<[f64; 3]> {
    let mut cur = h.to_vec();
    while cur.len() - 1 < to {
        let g = cur.len();
        let mut next = vec![[0.0; 3]; g + 1];
        for (i, slot) in next.iter_mut().enumerate() {
            let a = i as f64 / g as f64;
            for c in 0..3 {
                let lo = if i > 0 { cur[i - 1][c] } else { 0.0 };
                let hi = if i < g { cur[i][c] } else { 0.0 };
                slot[c] = a * lo + (1.0 - a) * hi;
            }
        }
        cur = next;
    }
    cur
}

/// Bilinearly blended Coons patch of four boundary curves, built on the
/// homogeneous coordinates. `bottom`/`top` run along the first parameter,
/// `left`/`right` along the second.
pub fn coons_patch(bottom: &BezierCurve, top: &BezierCurve, left: &BezierCurve, right: &BezierCurve) -> Result<GeometryMap> {
    let curves = [bottom, top, left, right];
    for c in curves {
        if c.points.len() < 2 || c.points.len() != c.weights.len() {
            return Err(Error::Invalid("boundary curve needs matching weights and at least two points".into()));
        }
    }
    let g = curves.iter().map(|c| c.points.len() - 1).max().unwrap_or(1);
    let [c0, c1, d0, d1] = curves.map(|c| elevate(&c.homogeneous(), g));
    let same = |a: &[f64; 3], b: &[f64; 3]| a.iter().zip(b).all(|(x, y)| (x - y).abs() <= 1e-12 * (1.0 + x.abs()));
    if !(same(&c0[0], &d0[0]) && same(&c0[g], &d1[0]) && same(&c1[0], &d0[g]) && same(&c1[g], &d1[g])) {
        return Err(Error::Invalid("boundary curves do not meet at the corners".into()));
    }
    let (h00, h10, h01, h11) = (c0[0], c0[g], c1[0], c1[g]);
    let gf = g as f64;
    let mut weights = Vec::new();
    let mut points = Vec::new();
    for j in 0..=g {
        for i in 0..=g {
            let r = i as f64 / gf;
            let s = j as f64 / gf;
            let mut h = [0.0; 3];
            for c in 0..3 {
                h[c] = (1.0 - s) * c0[i][c] + s * c1[i][c] + (1.0 - r) * d0[j][c] + r * d1[j][c]
                    - ((1.0 - r) * (1.0 - s) * h00[c] + r * (1.0 - s) * h10[c] + (1.0 - r) * s * h01[c] + r * s * h11[c]);
            }
            if !(h[0] > 0.0) {
                return Err(Error::NonPositiveWeight { index: weights.len(), value: h[0] });
            }
            weights.push(h[0]);
            points.push(h[1] / h[0]);
            points.push(h[2] / h[0]);
        }
    }
    let kv = KnotVector::bezier(g)?;
    GeometryMap::new(TensorSpace::new(vec![kv.clone(), kv])?, Weights::new(weights)?, points)
}

/// Identity map of the unit cube in `n` dimensions.
pub fn unit_cube(n: usize) -> Result<GeometryMap> {
    let kv = KnotVector::bezier(1)?;
    let space = TensorSpace::new(vec![kv; n])?;
    let mut points = Vec::new();
    for i in 0..space.len() {
        let m = space.multi(i);
        points.extend(m.iter().take(n).map(|&c| c as f64));
    }
    GeometryMap::new(space, Weights::uniform(1usize << n), points)
}

/// Quarter annulus with exact circular arcs. The first parameter runs along the
/// arcs from the positive y-axis to the positive x-axis, the second radially
/// outward, which keeps the Jacobian determinant positive.
pub fn quarter_annulus(r_inner: f64, r_outer: f64) -> Result<GeometryMap> {
    if !(r_inner > 0.0 && r_outer > r_inner) {
        return Err(Error::Invalid(format!("radii ({r_inner}, {r_outer})")));
    }
    let w = std::f64::consts::FRAC_1_SQRT_2;
    let arc = [([0.0, 1.0], 1.0), ([1.0, 1.0], w), ([1.0, 0.0], 1.0)];
    let mut weights = Vec::new();
    let mut points = Vec::new();
    for j in 0..3 {
        let r = r_inner + 0.5 * j as f64 * (r_outer - r_inner);
        for (p, wi) in arc {
            weights.push(wi);
            points.push(r * p[0]);
            points.push(r * p[1]);
        }
    }
    let kv = KnotVector::bezier(2)?;
    GeometryMap::new(TensorSpace::new(vec![kv.clone(), kv])?, Weights::new(weights)?, points)
}

/// Default NURBS test domain: a Coons patch with one circular-arc edge and
/// one rational edge, without symmetries.
pub fn coons_nurbs() -> Result<GeometryMap> {
    let bottom = BezierCurve { weights: vec![1.0, 0.8, 1.0], points: vec![[0.0, 0.0], [0.5, -0.3], [1.0, 0.0]] };
    let top = BezierCurve::polynomial(vec![[0.0, 1.0], [0.6, 1.05], [1.2, 1.1]]);
    let left = BezierCurve::polynomial(vec![[0.0, 0.0], [0.15, 0.5], [0.0, 1.0]]);
    let right = BezierCurve { weights: vec![1.0, 1.2, 1.0], points: vec![[1.0, 0.0], [1.3, 0.5], [1.2, 1.1]] };
    coons_patch(&bottom, &top, &left, &right)
}

/// Polynomial Coons patch of degree two.
pub fn coons_quadratic() -> Result<GeometryMap> {
    let bottom = BezierCurve::polynomial(vec![[0.0, 0.0], [0.55, -0.2], [1.0, 0.1]]);
    let top = BezierCurve::polynomial(vec![[-0.1, 1.0], [0.4, 1.25], [1.1, 1.05]]);
    let left = BezierCurve::polynomial(vec![[0.0, 0.0], [0.1, 0.45], [-0.1, 1.0]]);
    let right = BezierCurve::polynomial(vec![[1.0, 0.1], [1.2, 0.6], [1.1, 1.05]]);
    coons_patch(&bottom, &top, &left, &right)
}

/// Polynomial Coons patch of degree three with a straight top edge at `y = 1`.
pub fn coons_cubic() -> Result<GeometryMap> {
    let bottom = BezierCurve::polynomial(vec![[0.0, 0.0], [0.3, -0.1], [0.7, 0.1], [1.0, 0.0]]);
    let top = BezierCurve::polynomial(vec![[0.0, 1.0], [0.25, 1.0], [0.6, 1.0], [1.0, 1.0]]);
    let left = BezierCurve::polynomial(vec![[0.0, 0.0], [-0.1, 0.3], [0.1, 0.7], [0.0, 1.0]]);
    let right = BezierCurve::polynomial(vec![[1.0, 0.0], [1.1, 0.35], [0.95, 0.7], [1.0, 1.0]]);
    coons_patch(&bottom, &top, &left, &right)
}

/// Trivariate quadratic patch: the unit cube with mildly displaced
/// mid-edge and interior control points.
pub fn trivariate_polynomial() -> Result<GeometryMap> {
    let kv = KnotVector::bezier(2)?;
    let space = TensorSpace::new(vec![kv; 3])?;
    let mut points = Vec::new();
    for i in 0..space.len() {
        let m = space.multi(i);
        let g = [m[0] as f64 / 2.0, m[1] as f64 / 2.0, m[2] as f64 / 2.0];
        let bump = |a: usize, b: usize| if m[a] == 1 && m[b] != 1 { 0.08 } else if m[a] == 1 { -0.05 } else { 0.0 };
        points.push(g[0] + bump(1, 2));
        points.push(g[1] + 0.6 * bump(2, 0));
        points.push(g[2] - 0.7 * bump(0, 1));
    }
    GeometryMap::new(space, Weights::uniform(27), points)
}

/// Look up a built-in domain by name, e.g. `quarter_annulus` or
/// `quarter_annulus(1,2)`.
pub fn builtin_domain(name: &str) -> Result<GeometryMap> {
    let name = name.trim();
    let (base, args) = match name.find('(') {
        Some(k) if name.ends_with(')') => {
            let args: Vec<f64> = name[k + 1..name.len() - 1]
                .split(',')
                .map(|a| a.trim().parse::<f64>().map_err(|_| Error::UnknownGeometry(name.to_string())))
                .collect::<Result<_>>()?;
            (&name[..k], args)
        }
        _ => (name, Vec::new()),
    };
    let no_args = |g: Result<GeometryMap>| {
        if args.is_empty() {
            g
        } else {
            Err(Error::UnknownGeometry(name.to_string()))
        }
    };
    match base {
        "unit_interval" => no_args(unit_cube(1)),
        "unit_square" => no_args(unit_cube(2)),
        "unit_cube" => no_args(unit_cube(3)),
        "quarter_annulus" => match args.as_slice() {
            [] => quarter_annulus(1.0, 2.0),
            [a, b] => quarter_annulus(*a, *b),
            _ => Err(Error::UnknownGeometry(name.to_string())),
        },
        "coons_2d" | "coons_nurbs" => no_args(coons_nurbs()),
        "coons_quadratic" => no_args(coons_quadratic()),
        "coons_cubic" => no_args(coons_cubic()),
        "trivariate_polynomial_3d" => no_args(trivariate_polynomial()),
        _ => Err(Error::UnknownGeometry(name.to_string())),
    }
}

/// Names accepted by [`builtin_domain`].
pub const BUILTIN_NAMES: &[&str] = &[
    "unit_interval",
    "unit_square",
    "unit_cube",
    "quarter_annulus",
    "coons_2d",
    "coons_quadratic",
    "coons_cubic",
    "trivariate_polynomial_3d",
];

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn fd_jacobian(g: &GeometryMap, x: &[f64]) -> Mat {
        let n = g.dim();
        let e = 1e-6;
        let mut m = [[0.0; MAX_DIM]; MAX_DIM];
        for k in 0..n {
            let mut xp = x.to_vec();
            let mut xm = x.to_vec();
            xp[k] = (xp[k] + e).min(1.0);
            xm[k] = (xm[k] - e).max(0.0);
            let fp = g.eval(&xp).unwrap();
            let fm = g.eval(&xm).unwrap();
            for a in 0..n {
                m[a][k] = (fp[a] - fm[a]) / (xp[k] - xm[k]);
            }
        }
        m
    }

    #[test]
    fn annulus_corners_on_circles() {
        let g = quarter_annulus(1.0, 2.0).unwrap();
        let r = |x: &[f64]| {
            let p = g.eval(x).unwrap();
            (p[0] * p[0] + p[1] * p[1]).sqrt()
        };
        assert!((r(&[0.0, 0.0]) - 1.0).abs() < 1e-15);
        assert!((r(&[1.0, 0.0]) - 1.0).abs() < 1e-15);
        assert!((r(&[0.0, 1.0]) - 2.0).abs() < 1e-15);
        for t in [0.1, 0.37, 0.5, 0.81] {
            assert!((r(&[t, 0.0]) - 1.0).abs() < 1e-14);
            assert!((r(&[t, 0.5]) - 1.5).abs() < 1e-14);
        }
    }

    #[test]
    fn annulus_jacobian_at_origin() {
        let g = quarter_annulus(1.0, 2.0).unwrap();
        let j = g.jacobian(&[0.0, 0.0]).unwrap();
        // tangent speed 2 w (P1 - P0) with w = 1/sqrt 2, radial speed r_o - r_i
        assert!((j.det - std::f64::consts::SQRT_2).abs() < 1e-14);
        let fd = fd_jacobian(&g, &[0.0, 0.0]);
        assert!((linalg::det(&fd, 2) - j.det).abs() < 1e-5);
    }

    #[test]
    fn scaled_square_coefficient_is_identity() {
        let kv = KnotVector::bezier(1).unwrap();
        let space = TensorSpace::new(vec![kv.clone(), kv]).unwrap();
        let g = GeometryMap::new(space, Weights::uniform(4), vec![0.0, 0.0, 2.0, 0.0, 0.0, 2.0, 2.0, 2.0]).unwrap();
        let k = g.poisson_coefficient(&[0.3, 0.6]).unwrap();
        assert!((k[0][0] - 1.0).abs() < 1e-15 && (k[1][1] - 1.0).abs() < 1e-15);
        assert!(k[0][1].abs() < 1e-15);
    }

    #[test]
    fn folded_map_is_rejected() {
        let kv = KnotVector::bezier(1).unwrap();
        let space = TensorSpace::new(vec![kv.clone(), kv]).unwrap();
        let err = GeometryMap::new(space, Weights::uniform(4), vec![0.0, 0.0, 1.0, 0.0, 1.0, 1.0, 0.0, 1.0]).unwrap_err();
        assert!(matches!(err, Error::SingularJacobian { .. }));
    }

    #[test]
    fn builtins_are_valid() {
        for name in BUILTIN_NAMES {
            let g = builtin_domain(name).unwrap();
            g.check_jacobian(31).unwrap();
        }
        assert!(builtin_domain("quarter_annulus(1,3)").is_ok());
        assert!(matches!(builtin_domain("disk"), Err(Error::UnknownGeometry(_))));
        assert!(!coons_nurbs().unwrap().is_polynomial());
        assert!(coons_cubic().unwrap().is_polynomial());
    }

    #[test]
    fn coons_reproduces_edges() {
        let g = coons_cubic().unwrap();
        for t in [0.0, 0.3, 0.77, 1.0] {
            assert!((g.eval(&[t, 1.0]).unwrap()[1] - 1.0).abs() < 1e-15);
        }
        let g = coons_nurbs().unwrap();
        assert_eq!(g.eval(&[1.0, 1.0]).unwrap(), vec![1.2, 1.1]);
    }

    #[test]
    fn text_round_trip_is_bit_exact() {
        let g = coons_nurbs().unwrap().refine(3, 5).unwrap();
        let back = GeometryMap::from_text(&g.to_text()).unwrap();
        assert_eq!(g, back);
    }

    #[test]
    fn truncated_file_is_rejected() {
        let text = coons_nurbs().unwrap().to_text();
        let cut: String = text.lines().take(5).collect::<Vec<_>>().join("\n");
        match GeometryMap::from_text(&cut) {
            Err(Error::Format { line, .. }) => assert_eq!(line, 6),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn refine_keeps_polynomial_flag() {
        let g = coons_cubic().unwrap().refine(3, 8).unwrap();
        assert!(g.is_polynomial());
        assert!(coons_cubic().unwrap().refine(2, 8).is_err());
    }

    proptest! {
        #[test]
        fn refinement_preserves_the_map(x in 0.0f64..=1.0, y in 0.0f64..=1.0, p in 2usize..5, e in 1usize..7) {
            let g = coons_nurbs().unwrap();
            let r = g.refine(p, e).unwrap();
            let a = g.eval(&[x, y]).unwrap();
            let b = r.eval(&[x, y]).unwrap();
            prop_assert!((a[0] - b[0]).abs() < 1e-13 && (a[1] - b[1]).abs() < 1e-13);
            let ja = g.jacobian(&[x, y]).unwrap();
            let jb = r.jacobian(&[x, y]).unwrap();
            prop_assert!((ja.det - jb.det).abs() < 1e-12);
            prop_assert!((g.weight_function(&[x, y]).unwrap() - r.weight_function(&[x, y]).unwrap()).abs() < 1e-13);
        }

        #[test]
        fn jacobian_matches_finite_differences(x in 0.05f64..0.95, y in 0.05f64..0.95, z in 0.05f64..0.95) {
            let g = trivariate_polynomial().unwrap();
            let j = g.jacobian(&[x, y, z]).unwrap();
            let fd = fd_jacobian(&g, &[x, y, z]);
            for a in 0..3 {
                for k in 0..3 {
                    prop_assert!((j.mat[a][k] - fd[a][k]).abs() < 1e-6);
                }
            }
        }
    }
}
