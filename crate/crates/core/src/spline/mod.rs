//! B-spline and NURBS bases on open uniform knot vectors.
//!
//! Indices are 0-based throughout the library. The 1-based colex helpers
//! [`colex_index`] and [`colex_multi`] exist for file formats and reports.

pub mod interp;

use crate::error::{Error, Result};

/// Largest parametric dimension supported.
pub const MAX_DIM: usize = 3;

/// Index of the knot span `s` with `knots[s] <= x < knots[s + 1]`, clamped to
/// `p <= s < n` where `n` is the number of basis functions.
pub fn find_span(knots: &[f64], p: usize, x: f64) -> usize {
    let n = knots.len() - p - 1;
    if x >= knots[n] {
        // right end belongs to the last non-empty span
        let mut s = n - 1;
        while s > p && knots[s] == knots[n] {
            s -= 1;
        }
        return s;
    }
    if x <= knots[p] {
        return p;
    }
    let (mut lo, mut hi) = (p, n);
    while hi - lo > 1 {
        let mid = (lo + hi) / 2;
        if x < knots[mid] {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    lo
}

/// Values and derivatives of the `p + 1` basis functions that are nonzero on
/// span `s`. Output layout is `out[k * (p + 1) + j]` for derivative order `k`
/// and local function `j`; `out` must hold `(nd + 1) * (p + 1)` entries.
pub fn ders_basis_into(knots: &[f64], p: usize, s: usize, x: f64, nd: usize, out: &mut [f64]) {
    let w = p + 1;
    debug_assert!(out.len() >= (nd + 1) * w);
    let mut ndu = vec![0.0; w * w];
    let mut left = vec![0.0; w];
    let mut right = vec![0.0; w];
    ndu[0] = 1.0;
    for j in 1..=p {
        left[j] = x - knots[s + 1 - j];
        right[j] = knots[s + j] - x;
        let mut saved = 0.0;
        for r in 0..j {
            // lower triangle holds knot differences
            ndu[j * w + r] = right[r + 1] + left[j - r];
            let temp = ndu[r * w + j - 1] / ndu[j * w + r];
            ndu[r * w + j] = saved + right[r + 1] * temp;
            saved = left[j - r] * temp;
        }
        ndu[j * w + j] = saved;
    }
    for o in out.iter_mut().take((nd + 1) * w) {
        *o = 0.0;
    }
    for j in 0..=p {
        out[j] = ndu[j * w + p];
    }
    let top = nd.min(p);
    let mut a = vec![0.0; 2 * w];
    for r in 0..=p {
        let (mut s1, mut s2) = (0usize, 1usize);
        a.iter_mut().for_each(|v| *v = 0.0);
        a[0] = 1.0;
        for k in 1..=top {
            let mut d = 0.0;
            let rk = r as isize - k as isize;
            let pk = p - k;
            if r >= k {
                let rk = rk as usize;
                a[s2 * w] = a[s1 * w] / ndu[(pk + 1) * w + rk];
                d = a[s2 * w] * ndu[rk * w + pk];
            }
            let j1: usize = if rk >= -1 { 1 } else { (-rk) as usize };
            let j2: usize = if r as isize - 1 <= pk as isize { k - 1 } else { p - r };
            for j in j1..=j2 {
                if j == 0 {
                    continue;
                }
                let idx = (rk + j as isize) as usize;
                a[s2 * w + j] = (a[s1 * w + j] - a[s1 * w + j - 1]) / ndu[(pk + 1) * w + idx];
                d += a[s2 * w + j] * ndu[idx * w + pk];
            }
            if r <= pk {
                a[s2 * w + k] = -a[s1 * w + k - 1] / ndu[(pk + 1) * w + r];
                d += a[s2 * w + k] * ndu[r * w + pk];
            }
            out[k * w + r] = d;
            std::mem::swap(&mut s1, &mut s2);
        }
    }
    let mut fac = p as f64;
    for k in 1..=top {
        for j in 0..=p {
            out[k * w + j] *= fac;
        }
        fac *= (p - k) as f64;
    }
}

/// Values and derivatives on an arbitrary knot vector, as `ders[k][j]`.
pub fn ders_basis(knots: &[f64], p: usize, x: f64, nd: usize) -> (usize, Vec<Vec<f64>>) {
    let s = find_span(knots, p, x);
    let mut buf = vec![0.0; (nd + 1) * (p + 1)];
    ders_basis_into(knots, p, s, x, nd, &mut buf);
    let ders = buf.chunks(p + 1).map(|c| c.to_vec()).collect();
    (s - p, ders)
}

/// Open uniform knot vector on `[0, 1]`.
///
/// Knots are `p + 1` zeros, the interior values `k / (m - p)` and `p + 1`
/// ones. They are kept as integer numerators over the common denominator
/// `m - p` and converted to `f64` once.
#[derive(Clone, Debug, PartialEq)]
pub struct KnotVector {
    degree: usize,
    basis_count: usize,
    knots: Vec<f64>,
}

impl KnotVector {
    /// Analysis knot vector; requires `m >= 2p + 1`.
    pub fn open_uniform(degree: usize, basis_count: usize) -> Result<Self> {
        if degree == 0 || basis_count < 2 * degree + 1 {
            return Err(Error::KnotVector { degree, basis_count });
        }
        Ok(Self::build(degree, basis_count))
    }

    /// Single polynomial piece (`m = p + 1`), as used for coarse geometry patches.
    pub fn bezier(degree: usize) -> Result<Self> {
        if degree == 0 {
            return Err(Error::KnotVector { degree, basis_count: 1 });
        }
        Ok(Self::build(degree, degree + 1))
    }

    /// Any open uniform vector with at least one span.
    pub fn with_spans(degree: usize, spans: usize) -> Result<Self> {
        if degree == 0 || spans == 0 {
            return Err(Error::KnotVector { degree, basis_count: spans + degree });
        }
        Ok(Self::build(degree, spans + degree))
    }

    fn build(degree: usize, basis_count: usize) -> Self {
        let den = (basis_count - degree) as f64;
        let knots = (0..basis_count + degree + 1)
            .map(|k| Self::numerator_of(degree, basis_count, k) as f64 / den)
            .collect();
        Self { degree, basis_count, knots }
    }

    fn numerator_of(degree: usize, basis_count: usize, k: usize) -> usize {
        k.saturating_sub(degree).min(basis_count - degree)
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn basis_count(&self) -> usize {
        self.basis_count
    }

    /// Number of non-empty knot spans, `m - p`.
    pub fn spans(&self) -> usize {
        self.basis_count - self.degree
    }

    /// Uniform element size `h = 1 / (m - p)`.
    pub fn mesh_size(&self) -> f64 {
        1.0 / self.spans() as f64
    }

    pub fn knots(&self) -> &[f64] {
        &self.knots
    }

    /// Exact knot value `k`-th as `(numerator, denominator)`.
    pub fn knot_rational(&self, k: usize) -> (usize, usize) {
        (Self::numerator_of(self.degree, self.basis_count, k), self.spans())
    }

    fn check(x: f64) -> Result<()> {
        if !(0.0..=1.0).contains(&x) {
            return Err(Error::OutOfDomain { value: x });
        }
        Ok(())
    }

    /// Element (span) containing `x`; the right end belongs to the last element.
    pub fn element_of(&self, x: f64) -> usize {
        find_span(&self.knots, self.degree, x) - self.degree
    }

    /// Nonzero basis functions and derivatives up to order `nd` at `x`.
    pub fn eval(&self, x: f64, nd: usize) -> Result<BasisValues> {
        Self::check(x)?;
        let p = self.degree;
        let s = find_span(&self.knots, p, x);
        let mut buf = vec![0.0; (nd + 1) * (p + 1)];
        ders_basis_into(&self.knots, p, s, x, nd, &mut buf);
        Ok(BasisValues { first: s - p, degree: p, data: buf })
    }

    /// Values of all `m` basis functions at `x` (dense; for tests and small problems).
    pub fn eval_all(&self, x: f64) -> Result<Vec<f64>> {
        let b = self.eval(x, 0)?;
        let mut out = vec![0.0; self.basis_count];
        for j in 0..=self.degree {
            out[b.first + j] = b.get(0, j);
        }
        Ok(out)
    }

    /// Range of cardinal basis functions, i.e. translates of one B-spline.
    pub fn cardinal_range(&self) -> std::ops::Range<usize> {
        let p = self.degree;
        if self.basis_count < 2 * p {
            return p..p;
        }
        p..self.basis_count - p
    }

    pub fn is_cardinal(&self, k: usize) -> bool {
        self.cardinal_range().contains(&k)
    }

    /// Support midpoint of basis function `k`, `(k - (p - 1) / 2) h`.
    /// Only meaningful for cardinal functions.
    pub fn midpoint(&self, k: usize) -> f64 {
        (2 * k + 1 - self.degree) as f64 / (2 * self.spans()) as f64
    }

    /// Greville abscissa of basis function `k`.
    pub fn greville(&self, k: usize) -> f64 {
        let p = self.degree;
        let sum: usize = (1..=p).map(|j| Self::numerator_of(p, self.basis_count, k + j)).sum();
        sum as f64 / (p * self.spans()) as f64
    }

    /// Support of basis function `k` as a range of elements.
    pub fn support_elements(&self, k: usize) -> std::ops::Range<usize> {
        let lo = k.saturating_sub(self.degree);
        let hi = (k + 1).min(self.spans());
        lo..hi
    }
}

/// Nonzero basis data at one point.
#[derive(Clone, Debug)]
pub struct BasisValues {
    /// Index of the first nonzero function (equal to the element index).
    pub first: usize,
    degree: usize,
    data: Vec<f64>,
}

impl BasisValues {
    /// Derivative of order `k` of local function `j` (global index `first + j`).
    pub fn get(&self, k: usize, j: usize) -> f64 {
        self.data[k * (self.degree + 1) + j]
    }

    pub fn raw(&self) -> &[f64] {
        &self.data
    }
}

/// Midpoints of the cardinal basis functions, in index order.
pub fn cardinal_midpoints(kv: &KnotVector) -> Vec<f64> {
    kv.cardinal_range().map(|k| kv.midpoint(k)).collect()
}

/// 1-based colex index of a 1-based multi-index with `m` functions per direction.
pub fn colex_index(multi: &[usize], m: usize) -> Result<usize> {
    let mut idx = 0usize;
    let mut stride = 1usize;
    for &c in multi {
        if c == 0 || c > m {
            return Err(Error::Index(format!("component {c} not in 1..={m}")));
        }
        idx += (c - 1) * stride;
        stride *= m;
    }
    Ok(idx + 1)
}

/// Inverse of [`colex_index`].
pub fn colex_multi(index: usize, n: usize, m: usize) -> Result<Vec<usize>> {
    if index == 0 || index > m.pow(n as u32) {
        return Err(Error::Index(format!("colex index {index} out of range")));
    }
    let mut rest = index - 1;
    Ok((0..n)
        .map(|_| {
            let c = rest % m + 1;
            rest /= m;
            c
        })
        .collect())
}

/// Tensor product of `n` open uniform knot vectors of a common degree.
#[derive(Clone, Debug, PartialEq)]
pub struct TensorSpace {
    dirs: Vec<KnotVector>,
}

impl TensorSpace {
    pub fn new(dirs: Vec<KnotVector>) -> Result<Self> {
        if dirs.is_empty() || dirs.len() > MAX_DIM {
            return Err(Error::Dimension(format!("{} directions", dirs.len())));
        }
        let p = dirs[0].degree();
        if dirs.iter().any(|d| d.degree() != p) {
            return Err(Error::Invalid("all directions must share one degree".into()));
        }
        Ok(Self { dirs })
    }

    /// Same knot vector in all `n` directions.
    pub fn uniform(n: usize, degree: usize, basis_count: usize) -> Result<Self> {
        let kv = KnotVector::open_uniform(degree, basis_count)?;
        Self::new(vec![kv; n])
    }

    pub fn dim(&self) -> usize {
        self.dirs.len()
    }

    pub fn degree(&self) -> usize {
        self.dirs[0].degree()
    }

    pub fn dir(&self, d: usize) -> &KnotVector {
        &self.dirs[d]
    }

    pub fn dirs(&self) -> &[KnotVector] {
        &self.dirs
    }

    /// Basis functions per direction (1 for unused directions).
    pub fn counts(&self) -> [usize; MAX_DIM] {
        let mut c = [1; MAX_DIM];
        for (d, kv) in self.dirs.iter().enumerate() {
            c[d] = kv.basis_count();
        }
        c
    }

    /// Elements per direction (1 for unused directions).
    pub fn spans(&self) -> [usize; MAX_DIM] {
        let mut c = [1; MAX_DIM];
        for (d, kv) in self.dirs.iter().enumerate() {
            c[d] = kv.spans();
        }
        c
    }

    pub fn len(&self) -> usize {
        self.dirs.iter().map(|k| k.basis_count()).product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn element_count(&self) -> usize {
        self.dirs.iter().map(|k| k.spans()).product()
    }

    /// Flat 0-based colex index.
    pub fn flat(&self, multi: &[usize]) -> usize {
        flat_index(multi, &self.counts())
    }

    /// 0-based multi-index of a flat index.
    pub fn multi(&self, flat: usize) -> [usize; MAX_DIM] {
        multi_index(flat, &self.counts())
    }

    /// Is every component of basis function `flat` cardinal?
    pub fn is_cardinal(&self, flat: usize) -> bool {
        let m = self.multi(flat);
        self.dirs.iter().enumerate().all(|(d, kv)| kv.is_cardinal(m[d]))
    }

    /// Support midpoint of basis function `flat`.
    pub fn midpoint(&self, flat: usize) -> Vec<f64> {
        let m = self.multi(flat);
        self.dirs.iter().enumerate().map(|(d, kv)| kv.midpoint(m[d])).collect()
    }

    /// Functions that do not vanish on the boundary of the unit cube.
    pub fn boundary_functions(&self) -> Vec<usize> {
        (0..self.len())
            .filter(|&i| {
                let m = self.multi(i);
                self.dirs
                    .iter()
                    .enumerate()
                    .any(|(d, kv)| m[d] == 0 || m[d] + 1 == kv.basis_count())
            })
            .collect()
    }

    /// Tensor-product B-spline (non-rational) values at `x`.
    pub fn eval(&self, x: &[f64], nd: usize) -> Result<LocalBasis> {
        let mut per_dir = Vec::with_capacity(self.dim());
        for (d, kv) in self.dirs.iter().enumerate() {
            per_dir.push(kv.eval(x[d], nd)?);
        }
        let mut lb = LocalBasis::new(self.dim(), self.degree(), nd);
        let slices: Vec<&[f64]> = per_dir.iter().map(|b| b.raw()).collect();
        lb.tensorize(&slices);
        let counts = self.counts();
        let mut first = [0; MAX_DIM];
        for (d, b) in per_dir.iter().enumerate() {
            first[d] = b.first;
        }
        lb.set_indices(&first, &counts);
        Ok(lb)
    }

    /// Rational basis values at `x`.
    pub fn eval_nurbs(&self, weights: &Weights, x: &[f64], nd: usize) -> Result<LocalBasis> {
        if x.len() != self.dim() {
            return Err(Error::Dimension(format!("point of length {} in {}-d space", x.len(), self.dim())));
        }
        let mut lb = self.eval(x, nd)?;
        if weights.is_rational() {
            let w: Vec<f64> = lb.indices.iter().map(|&i| weights.values()[i]).collect();
            lb.rationalize(&w);
        }
        Ok(lb)
    }
}

pub fn flat_index(multi: &[usize], counts: &[usize]) -> usize {
    let mut idx = 0;
    let mut stride = 1;
    for (d, &c) in multi.iter().enumerate() {
        idx += c * stride;
        stride *= counts[d];
    }
    idx
}

pub fn multi_index(mut flat: usize, counts: &[usize]) -> [usize; MAX_DIM] {
    let mut m = [0; MAX_DIM];
    for (d, slot) in m.iter_mut().enumerate().take(counts.len().min(MAX_DIM)) {
        *slot = flat % counts[d];
        flat /= counts[d];
    }
    m
}

/// NURBS weights, one per basis function.
#[derive(Clone, Debug, PartialEq)]
pub struct Weights {
    values: Vec<f64>,
    rational: bool,
}

impl Weights {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        for (index, &value) in values.iter().enumerate() {
            if !(value > 0.0) || !value.is_finite() {
                return Err(Error::NonPositiveWeight { index, value });
            }
        }
        let rational = values.iter().any(|&w| w != values[0]);
        Ok(Self { values, rational })
    }

    pub fn uniform(len: usize) -> Self {
        Self { values: vec![1.0; len], rational: false }
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// False when all weights are equal and the basis reduces to B-splines.
    pub fn is_rational(&self) -> bool {
        self.rational
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// Basis values of the `(p + 1)^n` functions that are nonzero at a point,
/// with gradients and Hessians in parametric coordinates.
#[derive(Clone, Debug)]
pub struct LocalBasis {
    pub n: usize,
    pub nd: usize,
    /// Flat global indices in local colex order.
    pub indices: Vec<usize>,
    pub values: Vec<f64>,
    pub grads: Vec<[f64; MAX_DIM]>,
    pub hess: Vec<[[f64; MAX_DIM]; MAX_DIM]>,
    p: usize,
}

impl LocalBasis {
    pub fn new(n: usize, p: usize, nd: usize) -> Self {
        let len = (p + 1).pow(n as u32);
        Self {
            n,
            nd,
            indices: vec![0; len],
            values: vec![0.0; len],
            grads: vec![[0.0; MAX_DIM]; len],
            hess: vec![[[0.0; MAX_DIM]; MAX_DIM]; len],
            p,
        }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Fill from per-direction data laid out as in [`ders_basis_into`].
    pub fn tensorize(&mut self, d1: &[&[f64]]) {
        let w = self.p + 1;
        let n = self.n;
        for a in 0..self.values.len() {
            let mut loc = [0usize; MAX_DIM];
            let mut r = a;
            for l in loc.iter_mut().take(n) {
                *l = r % w;
                r /= w;
            }
            let f = |d: usize, k: usize| d1[d][k * w + loc[d]];
            let mut v = 1.0;
            for d in 0..n {
                v *= f(d, 0);
            }
            self.values[a] = v;
            if self.nd >= 1 {
                for k in 0..n {
                    let mut g = 1.0;
                    for d in 0..n {
                        g *= f(d, usize::from(d == k));
                    }
                    self.grads[a][k] = g;
                }
            }
            if self.nd >= 2 {
                for k in 0..n {
                    for l in k..n {
                        let mut h = 1.0;
                        for d in 0..n {
                            h *= f(d, usize::from(d == k) + usize::from(d == l));
                        }
                        self.hess[a][k][l] = h;
                        self.hess[a][l][k] = h;
                    }
                }
            }
        }
    }

    /// Global indices for the block starting at `first` in a space with `counts`.
    pub fn set_indices(&mut self, first: &[usize], counts: &[usize]) {
        let w = self.p + 1;
        for a in 0..self.indices.len() {
            let mut r = a;
            let mut idx = 0;
            let mut stride = 1;
            for d in 0..self.n {
                idx += (first[d] + r % w) * stride;
                r /= w;
                stride *= counts[d];
            }
            self.indices[a] = idx;
        }
    }

    /// Turn B-spline data into NURBS data for local weights `w`.
    pub fn rationalize(&mut self, w: &[f64]) {
        let n = self.n;
        let mut big_w = 0.0;
        let mut dw = [0.0; MAX_DIM];
        let mut hw = [[0.0; MAX_DIM]; MAX_DIM];
        for a in 0..self.values.len() {
            big_w += w[a] * self.values[a];
            if self.nd >= 1 {
                for k in 0..n {
                    dw[k] += w[a] * self.grads[a][k];
                }
            }
            if self.nd >= 2 {
                for k in 0..n {
                    for l in 0..n {
                        hw[k][l] += w[a] * self.hess[a][k][l];
                    }
                }
            }
        }
        for a in 0..self.values.len() {
            let r = w[a] * self.values[a] / big_w;
            let mut g = [0.0; MAX_DIM];
            if self.nd >= 1 {
                for k in 0..n {
                    g[k] = (w[a] * self.grads[a][k] - r * dw[k]) / big_w;
                }
            }
            if self.nd >= 2 {
                let mut h = [[0.0; MAX_DIM]; MAX_DIM];
                for k in 0..n {
                    for l in 0..n {
                        h[k][l] = (w[a] * self.hess[a][k][l] - g[k] * dw[l] - g[l] * dw[k] - r * hw[k][l]) / big_w;
                    }
                }
                self.hess[a] = h;
            }
            self.values[a] = r;
            self.grads[a] = g;
        }
    }
}

/// Coefficient `psi_k(y) = prod_{j=1..p} (xi_{k+j} - y)` of basis function `k`
/// in the Marsden expansion of `(x - y)^p`.
pub fn marsden_coefficient(kv: &KnotVector, k: usize, y: f64) -> f64 {
    let t = kv.knots();
    (1..=kv.degree()).map(|j| t[k + j] - y).product()
}

/// `|(x - y)^p - sum_k b_k(x) psi_k(y)|`.
pub fn marsden_residual(kv: &KnotVector, x: f64, y: f64) -> Result<f64> {
    let b = kv.eval(x, 0)?;
    let p = kv.degree();
    let sum: f64 = (0..=p).map(|j| b.get(0, j) * marsden_coefficient(kv, b.first + j, y)).sum();
    Ok(((x - y).powi(p as i32) - sum).abs())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn knot_layout_and_spacing() {
        let kv = KnotVector::open_uniform(2, 21).unwrap();
        assert_eq!(kv.knots().len(), 24);
        assert_eq!(kv.spans(), 19);
        assert_eq!(kv.knot_rational(3), (1, 19));
        assert_eq!(kv.knots()[3], 1.0 / 19.0);
        assert!(kv.knots()[..3].iter().all(|&k| k == 0.0));
        assert!(kv.knots()[21..].iter().all(|&k| k == 1.0));
    }

    #[test]
    fn rejects_too_few_functions() {
        assert!(matches!(KnotVector::open_uniform(2, 4), Err(Error::KnotVector { .. })));
        assert!(KnotVector::open_uniform(2, 5).is_ok());
    }

    #[test]
    fn hat_functions() {
        let kv = KnotVector::open_uniform(1, 3).unwrap();
        let b = kv.eval(0.25, 1).unwrap();
        assert_eq!(b.first, 0);
        assert!((b.get(0, 0) - 0.5).abs() < 1e-15);
        assert!((b.get(0, 1) - 0.5).abs() < 1e-15);
        assert!((b.get(1, 0) + 2.0).abs() < 1e-14);
        assert!(kv.eval(1.5, 0).is_err());
    }

    #[test]
    fn right_endpoint_is_last_function() {
        let kv = KnotVector::open_uniform(3, 9).unwrap();
        let all = kv.eval_all(1.0).unwrap();
        assert_eq!(all[8], 1.0);
        assert!(all[..8].iter().all(|&v| v == 0.0));
    }

    #[test]
    fn cardinal_midpoints_match_formula() {
        let kv = KnotVector::open_uniform(2, 21).unwrap();
        let mids = cardinal_midpoints(&kv);
        assert_eq!(mids.len(), 21 - 4);
        assert!((mids[0] - 1.5 / 19.0).abs() < 1e-15);
        // midpoint of the support [(k-p)h, (k+1)h]
        for k in kv.cardinal_range() {
            let lo = kv.knots()[k];
            let hi = kv.knots()[k + 3];
            assert!((kv.midpoint(k) - 0.5 * (lo + hi)).abs() < 1e-15);
        }
    }

    #[test]
    fn colex_round_trip() {
        assert_eq!(colex_index(&[3, 2], 21).unwrap(), 24);
        assert_eq!(colex_multi(24, 2, 21).unwrap(), vec![3, 2]);
        assert!(colex_index(&[0, 1], 5).is_err());
    }

    #[test]
    fn derivatives_against_finite_differences() {
        let kv = KnotVector::open_uniform(4, 12).unwrap();
        let x = 0.3712;
        let e = 1e-6;
        let b = kv.eval(x, 2).unwrap();
        let fp = kv.eval_all(x + e).unwrap();
        let fm = kv.eval_all(x - e).unwrap();
        let f0 = kv.eval_all(x).unwrap();
        for j in 0..5 {
            let i = b.first + j;
            let d1 = (fp[i] - fm[i]) / (2.0 * e);
            let d2 = (fp[i] - 2.0 * f0[i] + fm[i]) / (e * e);
            assert!((b.get(1, j) - d1).abs() < 1e-6, "d1 {} {}", b.get(1, j), d1);
            assert!((b.get(2, j) - d2).abs() < 1e-2, "d2 {} {}", b.get(2, j), d2);
        }
    }

    #[test]
    fn greville_points() {
        let kv = KnotVector::open_uniform(2, 5).unwrap();
        let g: Vec<f64> = (0..5).map(|k| kv.greville(k)).collect();
        assert_eq!(g, vec![0.0, 1.0 / 6.0, 0.5, 5.0 / 6.0, 1.0]);
    }

    #[test]
    fn nurbs_with_equal_weights_is_bspline() {
        let sp = TensorSpace::uniform(2, 2, 6).unwrap();
        let w = Weights::new(vec![2.5; sp.len()]).unwrap();
        assert!(!w.is_rational());
        let a = sp.eval_nurbs(&w, &[0.3, 0.8], 1).unwrap();
        let b = sp.eval(&[0.3, 0.8], 1).unwrap();
        assert_eq!(a.values, b.values);
    }

    #[test]
    fn nurbs_derivatives_against_finite_differences() {
        let sp = TensorSpace::uniform(2, 2, 5).unwrap();
        let w: Vec<f64> = (0..sp.len()).map(|i| 1.0 + 0.3 * ((i * 7) % 5) as f64 / 5.0).collect();
        let w = Weights::new(w).unwrap();
        let x = [0.41, 0.67];
        let e = 1e-5;
        let b = sp.eval_nurbs(&w, &x, 2).unwrap();
        let s: f64 = b.values.iter().sum();
        assert!((s - 1.0).abs() < 1e-14);
        for k in 0..2 {
            let mut xp = x;
            let mut xm = x;
            xp[k] += e;
            xm[k] -= e;
            let bp = sp.eval_nurbs(&w, &xp, 1).unwrap();
            let bm = sp.eval_nurbs(&w, &xm, 1).unwrap();
            for a in 0..b.len() {
                let fd = (bp.values[a] - bm.values[a]) / (2.0 * e);
                assert!((fd - b.grads[a][k]).abs() < 1e-7);
                for l in 0..2 {
                    let fd2 = (bp.grads[a][l] - bm.grads[a][l]) / (2.0 * e);
                    assert!((fd2 - b.hess[a][k][l]).abs() < 1e-6);
                }
            }
        }
    }

    #[test]
    fn weights_must_be_positive() {
        assert!(matches!(Weights::new(vec![1.0, 0.0]), Err(Error::NonPositiveWeight { index: 1, .. })));
    }

    proptest! {
        #[test]
        fn partition_of_unity(p in 1usize..6, extra in 1usize..20, x in 0.0f64..=1.0) {
            let kv = KnotVector::open_uniform(p, 2 * p + extra).unwrap();
            let s: f64 = kv.eval_all(x).unwrap().iter().sum();
            prop_assert!((s - 1.0).abs() <= 1e-14);
            prop_assert!(kv.eval_all(x).unwrap().iter().all(|&v| v >= 0.0));
        }

        #[test]
        fn cardinal_translation(p in 1usize..5, extra in 2usize..15, t in 0.0f64..1.0, pick in 0usize..100) {
            let kv = KnotVector::open_uniform(p, 2 * p + extra).unwrap();
            let card = kv.cardinal_range();
            let i = card.start + pick % card.len();
            let j = card.start;
            let h = kv.mesh_size();
            // point inside the support of function j
            let y = kv.knots()[j] + t * (p + 1) as f64 * h;
            let shift = kv.midpoint(i) - kv.midpoint(j);
            let bi = kv.eval_all((y + shift).min(1.0)).unwrap()[i];
            let bj = kv.eval_all(y).unwrap()[j];
            prop_assert!((bi - bj).abs() <= 1e-13);
        }

        #[test]
        fn marsden_identity(p in 1usize..=5, x in 0.0f64..=1.0, y in -1.0f64..2.0) {
            let kv = KnotVector::open_uniform(p, 2 * p + 7).unwrap();
            prop_assert!(marsden_residual(&kv, x, y).unwrap() <= 1e-12);
        }

        #[test]
        fn colex_bijection(n in 1usize..=3, m in 2usize..9, seed in 0usize..10_000) {
            let i = seed % m.pow(n as u32) + 1;
            let multi = colex_multi(i, n, m).unwrap();
            prop_assert_eq!(colex_index(&multi, m).unwrap(), i);
        }
    }
}
