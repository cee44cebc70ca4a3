//! Closed-form solutions used to verify the discretizations.

use std::f64::consts::PI;

use crate::linalg::Mat;
use crate::spline::MAX_DIM;

/// Scalar exact solutions with derivatives up to second order.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum ScalarCase {
    /// `prod_d sin(k pi x_d)`.
    SinProduct { k: f64 },
    /// `sin(pi x) sinh(pi y)`, harmonic in 2-d.
    SinSinh,
    Constant(f64),
}

impl ScalarCase {
    pub fn low_frequency() -> Self {
        Self::SinProduct { k: 1.0 }
    }

    pub fn high_frequency() -> Self {
        Self::SinProduct { k: 20.0 }
    }

    pub fn label(&self) -> &'static str {
        match self {
            Self::SinProduct { k } if *k == 1.0 => "low_frequency",
            Self::SinProduct { k } if *k == 20.0 => "high_frequency",
            Self::SinProduct { .. } => "sin_product",
            Self::SinSinh => "sin_sinh",
            Self::Constant(_) => "constant",
        }
    }

    pub fn value(&self, x: &[f64]) -> f64 {
        match *self {
            Self::SinProduct { k } => x.iter().map(|&t| (k * PI * t).sin()).product(),
            Self::SinSinh => (PI * x[0]).sin() * (PI * x[1]).sinh(),
            Self::Constant(c) => c,
        }
    }

    pub fn grad(&self, x: &[f64]) -> [f64; MAX_DIM] {
        let n = x.len();
        let mut g = [0.0; MAX_DIM];
        match *self {
            Self::SinProduct { k } => {
                let w = k * PI;
                for (d, gd) in g.iter_mut().enumerate().take(n) {
                    *gd = (0..n).map(|e| if e == d { w * (w * x[e]).cos() } else { (w * x[e]).sin() }).product();
                }
            }
            Self::SinSinh => {
                g[0] = PI * (PI * x[0]).cos() * (PI * x[1]).sinh();
                g[1] = PI * (PI * x[0]).sin() * (PI * x[1]).cosh();
            }
            Self::Constant(_) => {}
        }
        g
    }

    pub fn hess(&self, x: &[f64]) -> Mat {
        let n = x.len();
        let mut h = [[0.0; MAX_DIM]; MAX_DIM];
        match *self {
            Self::SinProduct { k } => {
                let w = k * PI;
                let s: Vec<f64> = x.iter().map(|&t| (w * t).sin()).collect();
                let c: Vec<f64> = x.iter().map(|&t| w * (w * t).cos()).collect();
                for a in 0..n {
                    for b in 0..n {
                        h[a][b] = (0..n)
                            .map(|e| {
                                if a == b && e == a {
                                    -w * w * s[e]
                                } else if e == a || e == b {
                                    c[e]
                                } else {
                                    s[e]
                                }
                            })
                            .product();
                    }
                }
            }
            Self::SinSinh => {
                let (sx, cx) = ((PI * x[0]).sin(), (PI * x[0]).cos());
                let (sy, cy) = ((PI * x[1]).sinh(), (PI * x[1]).cosh());
                h[0][0] = -PI * PI * sx * sy;
                h[1][1] = PI * PI * sx * sy;
                h[0][1] = PI * PI * cx * cy;
                h[1][0] = h[0][1];
            }
            Self::Constant(_) => {}
        }
        h
    }

    /// `-Laplace u`.
    pub fn poisson_load(&self, x: &[f64]) -> f64 {
        match *self {
            Self::SinProduct { k } => x.len() as f64 * (k * PI).powi(2) * self.value(x),
            _ => 0.0,
        }
    }

    /// `Laplace^2 u`.
    pub fn biharmonic_load(&self, x: &[f64]) -> f64 {
        match *self {
            Self::SinProduct { k } => (x.len() as f64 * (k * PI).powi(2)).powi(2) * self.value(x),
            _ => 0.0,
        }
    }
}

/// Smooth divergence-free Stokes flow in 2-d with `mu = 1`:
/// `u = (s(x) cos y, -s'(x) sin y)` with `s = sin x / (x + 1)` and
/// `p = y sinh x + c`, where `c` makes the mean zero on the chosen domain.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StokesCase {
    pub pressure_shift: f64,
}

fn s_derivs(x: f64) -> [f64; 4] {
    // s, s', s'', s''' of sin x / (x + 1)
    let a = 1.0 / (x + 1.0);
    let (sn, cs) = (x.sin(), x.cos());
    let s0 = sn * a;
    let s1 = cs * a - sn * a * a;
    let s2 = -sn * a - 2.0 * cs * a * a + 2.0 * sn * a.powi(3);
    let s3 = -cs * a + 3.0 * sn * a * a + 6.0 * cs * a.powi(3) - 6.0 * sn * a.powi(4);
    [s0, s1, s2, s3]
}

impl StokesCase {
    pub fn velocity(&self, x: &[f64]) -> [f64; 2] {
        let s = s_derivs(x[0]);
        [s[0] * x[1].cos(), -s[1] * x[1].sin()]
    }

    /// `grad[c][k] = d u_c / d x_k`.
    pub fn velocity_grad(&self, x: &[f64]) -> [[f64; 2]; 2] {
        let s = s_derivs(x[0]);
        let (sy, cy) = (x[1].sin(), x[1].cos());
        [[s[1] * cy, -s[0] * sy], [-s[2] * sy, -s[1] * cy]]
    }

    pub fn pressure(&self, x: &[f64]) -> f64 {
        x[1] * x[0].sinh() + self.pressure_shift
    }

    /// Load `f = -Laplace u - grad p`, matching `a(u, v) + int p div v = F(v)`.
    pub fn load(&self, x: &[f64]) -> [f64; 2] {
        let s = s_derivs(x[0]);
        let (sy, cy) = (x[1].sin(), x[1].cos());
        let lap0 = s[2] * cy - s[0] * cy;
        let lap1 = -s[3] * sy + s[1] * sy;
        let gp = [x[1] * x[0].cosh(), x[0].sinh()];
        [-lap0 - gp[0], -lap1 - gp[1]]
    }

    pub fn divergence(&self, x: &[f64]) -> f64 {
        let g = self.velocity_grad(x);
        g[0][0] + g[1][1]
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fd_grad(f: &dyn Fn(&[f64]) -> f64, x: &[f64], d: usize) -> f64 {
        let e = 1e-6;
        let mut a = x.to_vec();
        let mut b = x.to_vec();
        a[d] += e;
        b[d] -= e;
        (f(&a) - f(&b)) / (2.0 * e)
    }

    #[test]
    fn scalar_derivatives_match_differences() {
        let x = [0.31, 0.57];
        for c in [ScalarCase::low_frequency(), ScalarCase::SinProduct { k: 3.0 }, ScalarCase::SinSinh] {
            let g = c.grad(&x);
            let h = c.hess(&x);
            for d in 0..2 {
                assert!((g[d] - fd_grad(&|y| c.value(y), &x, d)).abs() < 1e-6 * (1.0 + g[d].abs()));
                for e in 0..2 {
                    let fd = fd_grad(&|y| c.grad(y)[e], &x, d);
                    assert!((h[e][d] - fd).abs() < 1e-5 * (1.0 + fd.abs()));
                }
            }
            let lap = h[0][0] + h[1][1];
            assert!((c.poisson_load(&x) + lap).abs() < 1e-9 * (1.0 + lap.abs()));
        }
        assert!(ScalarCase::SinSinh.hess(&x)[0][0] + ScalarCase::SinSinh.hess(&x)[1][1] == 0.0);
    }

    #[test]
    fn stokes_velocity_is_solenoidal_and_load_consistent() {
        let c = StokesCase { pressure_shift: 0.0 };
        for &x in &[[0.1, 0.2], [0.7, 0.9], [1.1, 0.4]] {
            assert!(c.divergence(&x).abs() < 1e-15);
            let g = c.velocity_grad(&x);
            for comp in 0..2 {
                for k in 0..2 {
                    let fd = fd_grad(&|y| c.velocity(y)[comp], &x, k);
                    assert!((g[comp][k] - fd).abs() < 1e-8);
                }
                // -Laplace u_c - d_c p by nested differences
                let lap: f64 = (0..2).map(|k| fd_grad(&|y| c.velocity_grad(y)[comp][k], &x, k)).sum();
                let dp = fd_grad(&|y| c.pressure(y), &x, comp);
                assert!((c.load(&x)[comp] - (-lap - dp)).abs() < 1e-6);
            }
        }
    }
}
