//! Fixed-size helpers for Jacobians of dimension at most three.

use crate::spline::MAX_DIM;

pub type Mat = [[f64; MAX_DIM]; MAX_DIM];

pub fn det(a: &Mat, n: usize) -> f64 {
    match n {
        1 => a[0][0],
        2 => a[0][0] * a[1][1] - a[0][1] * a[1][0],
        _ => {
            a[0][0] * (a[1][1] * a[2][2] - a[1][2] * a[2][1]) - a[0][1] * (a[1][0] * a[2][2] - a[1][2] * a[2][0])
                + a[0][2] * (a[1][0] * a[2][1] - a[1][1] * a[2][0])
        }
    }
}

/// Adjugate, so that `a * adj(a) = det(a) I`.
pub fn adjugate(a: &Mat, n: usize) -> Mat {
    let mut r = [[0.0; MAX_DIM]; MAX_DIM];
    match n {
        1 => r[0][0] = 1.0,
        2 => {
            r[0][0] = a[1][1];
            r[0][1] = -a[0][1];
            r[1][0] = -a[1][0];
            r[1][1] = a[0][0];
        }
        _ => {
            r[0][0] = a[1][1] * a[2][2] - a[1][2] * a[2][1];
            r[0][1] = a[0][2] * a[2][1] - a[0][1] * a[2][2];
            r[0][2] = a[0][1] * a[1][2] - a[0][2] * a[1][1];
            r[1][0] = a[1][2] * a[2][0] - a[1][0] * a[2][2];
            r[1][1] = a[0][0] * a[2][2] - a[0][2] * a[2][0];
            r[1][2] = a[0][2] * a[1][0] - a[0][0] * a[1][2];
            r[2][0] = a[1][0] * a[2][1] - a[1][1] * a[2][0];
            r[2][1] = a[0][1] * a[2][0] - a[0][0] * a[2][1];
            r[2][2] = a[0][0] * a[1][1] - a[0][1] * a[1][0];
        }
    }
    r
}

pub fn inverse(a: &Mat, n: usize) -> (Mat, f64) {
    let d = det(a, n);
    let mut r = adjugate(a, n);
    for row in r.iter_mut().take(n) {
        for v in row.iter_mut().take(n) {
            *v /= d;
        }
    }
    (r, d)
}

pub fn mul(a: &Mat, b: &Mat, n: usize) -> Mat {
    let mut r = [[0.0; MAX_DIM]; MAX_DIM];
    for i in 0..n {
        for j in 0..n {
            r[i][j] = (0..n).map(|k| a[i][k] * b[k][j]).sum();
        }
    }
    r
}

pub fn transpose(a: &Mat) -> Mat {
    let mut r = [[0.0; MAX_DIM]; MAX_DIM];
    for (i, row) in a.iter().enumerate() {
        for (j, v) in row.iter().enumerate() {
            r[j][i] = *v;
        }
    }
    r
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn inverse_of_3x3() {
        let a = [[2.0, 1.0, 0.0], [0.5, 3.0, 1.0], [0.0, -1.0, 1.5]];
        let (inv, d) = inverse(&a, 3);
        assert!((d - det(&a, 3)).abs() < 1e-15);
        let id = mul(&a, &inv, 3);
        for i in 0..3 {
            for j in 0..3 {
                let e = if i == j { 1.0 } else { 0.0 };
                assert!((id[i][j] - e).abs() < 1e-14);
            }
        }
    }
}
