//! Stencil functions at arbitrary parameter points.

use crate::assembly::quadrature::GaussRule;
use crate::assembly::Form;
use crate::error::{Error, Result};
use crate::geometry::GeometryMap;
use crate::linalg;
use crate::spline::{ders_basis_into, MAX_DIM};

/// Value and derivatives (in units of the mesh size) of the centred cardinal
/// B-spline of degree `p` at `u`, measured from the left end of its support.
fn cardinal(p: usize, u: f64, out: &mut [f64; 3]) {
    *out = [0.0; 3];
    if !(0.0..=(p + 1) as f64).contains(&u) {
        return;
    }
    // knots -p..=2p+1; the function with index p has support [0, p+1]
    let knots: Vec<f64> = (0..3 * p + 2).map(|j| j as f64 - p as f64).collect();
    let s = (u.floor() as usize + p).min(2 * p);
    let nd = 2.min(p);
    let mut buf = vec![0.0; (nd + 1) * (p + 1)];
    ders_basis_into(&knots, p, s, u, nd, &mut buf);
    let j = 2 * p - s;
    for k in 0..=nd {
        out[k] = buf[k * (p + 1) + j];
    }
}

/// `Phi_delta(x)`: the form evaluated on the cardinal trial function centred at
/// `x + delta h` against the test function centred at `x`, for the uniform
/// B-spline space of the given degree and number of spans on a polynomial
/// geometry.
///
/// The integral is split into the mesh cells of the translated test function,
/// each with `g` Gauss points per direction (default `degree + 1`), so at the
/// support midpoint of a cardinal function the value agrees with the assembled
/// matrix entry.
pub fn stencil_function(form: Form, geometry: &GeometryMap, degree: usize, spans: usize, delta: &[i64], x: &[f64], g: Option<usize>) -> Result<f64> {
    let n = geometry.dim();
    if delta.len() != n || x.len() != n {
        return Err(Error::Dimension(format!("offset and point must have {n} components")));
    }
    if !geometry.is_polynomial() {
        return Err(Error::Invalid("stencil functions are evaluated on polynomial geometries only".into()));
    }
    let nd = match form {
        Form::Mass => 0,
        Form::PoissonStiffness | Form::StokesVelocity { .. } => 1,
        Form::Biharmonic => 2,
        Form::StokesDivergence { .. } => return Err(Error::Invalid("stencil function of a mixed form".into())),
    };
    if degree < nd || spans == 0 {
        return Err(Error::Invalid(format!("degree {degree} too low for form `{}`", form.name())));
    }
    let mu = if let Form::StokesVelocity { viscosity } = form { viscosity } else { 1.0 };
    let p = degree;
    let h = 1.0 / spans as f64;
    let half = (p + 1) as f64 / 2.0;
    let rule = GaussRule::new(g.unwrap_or(p + 1));
    let gq = rule.len();

    // overlapping cells per direction, in cell units of the test support
    let mut cells: [(usize, usize); MAX_DIM] = [(0, 0); MAX_DIM];
    for d in 0..n {
        let lo = delta[d].max(0);
        let hi = (p as i64 + 1).min(p as i64 + 1 + delta[d]);
        if lo >= hi {
            return Ok(0.0);
        }
        cells[d] = (lo as usize, hi as usize);
        let a = x[d] - half * h;
        let b = x[d] + half * h;
        let ta = a + delta[d] as f64 * h;
        if a < -1e-12 || b > 1.0 + 1e-12 || ta < -1e-12 || ta + 2.0 * half * h > 1.0 + 1e-12 {
            return Err(Error::OutOfDomain { value: x[d] });
        }
    }
    let ncell: Vec<usize> = (0..n).map(|d| cells[d].1 - cells[d].0).collect();
    let total_cells: usize = ncell.iter().product();
    let per_cell = gq.pow(n as u32);
    let gspace = geometry.space();
    let ngeo = if nd >= 2 { 2 } else { 1 };
    let mut sum = 0.0;
    for cf in 0..total_cells {
        let cm = crate::spline::multi_index(cf, &ncell);
        for qf in 0..per_cell {
            let qm = crate::spline::multi_index(qf, &vec![gq; n]);
            let mut y = [0.0; MAX_DIM];
            let mut wq = 1.0;
            let mut tv = [[0.0; 3]; MAX_DIM];
            let mut rv = [[0.0; 3]; MAX_DIM];
            for d in 0..n {
                let u = (cells[d].0 + cm[d]) as f64 + rule.points[qm[d]];
                y[d] = (x[d] - half * h + u * h).clamp(0.0, 1.0);
                wq *= rule.weights[qm[d]] * h;
                cardinal(p, u, &mut tv[d]);
                cardinal(p, u - delta[d] as f64, &mut rv[d]);
            }
            let lb = gspace.eval(&y[..n], ngeo)?;
            let mut jac = [[0.0; MAX_DIM]; MAX_DIM];
            let mut phi_hess = [[[0.0; MAX_DIM]; MAX_DIM]; MAX_DIM];
            for (a, &i) in lb.indices.iter().enumerate() {
                let cp = geometry.control_point(i);
                for c in 0..n {
                    for k in 0..n {
                        jac[c][k] += cp[c] * lb.grads[a][k];
                        if ngeo >= 2 {
                            for l in 0..n {
                                phi_hess[c][k][l] += cp[c] * lb.hess[a][k][l];
                            }
                        }
                    }
                }
            }
            let (ginv, det) = linalg::inverse(&jac, n);
            if !(det > 0.0) {
                return Err(Error::SingularJacobian { point: y[..n].to_vec(), det });
            }
            let test = Derivs::tensor(&tv, n, h);
            let trial = Derivs::tensor(&rv, n, h);
            let f = match form {
                Form::Mass => test.value * trial.value,
                Form::PoissonStiffness | Form::StokesVelocity { .. } => {
                    let gt = test.physical_grad(&ginv, n);
                    let gr = trial.physical_grad(&ginv, n);
                    mu * (0..n).map(|k| gt[k] * gr[k]).sum::<f64>()
                }
                _ => test.laplacian(&ginv, &phi_hess, n) * trial.laplacian(&ginv, &phi_hess, n),
            };
            sum += wq * det * f;
        }
    }
    Ok(sum)
}

struct Derivs {
    value: f64,
    grad: [f64; MAX_DIM],
    hess: [[f64; MAX_DIM]; MAX_DIM],
}

impl Derivs {
    fn tensor(t: &[[f64; 3]; MAX_DIM], n: usize, h: f64) -> Self {
        let mut value = 1.0;
        let mut grad = [1.0; MAX_DIM];
        let mut hess = [[1.0; MAX_DIM]; MAX_DIM];
        for d in 0..n {
            value *= t[d][0];
            for k in 0..n {
                grad[k] *= if k == d { t[d][1] / h } else { t[d][0] };
                for l in 0..n {
                    let o = (k == d) as usize + (l == d) as usize;
                    hess[k][l] *= t[d][o] / h.powi(o as i32);
                }
            }
        }
        Self { value, grad, hess }
    }

    fn physical_grad(&self, ginv: &linalg::Mat, n: usize) -> [f64; MAX_DIM] {
        let mut g = [0.0; MAX_DIM];
        for c in 0..n {
            g[c] = (0..n).map(|k| ginv[k][c] * self.grad[k]).sum();
        }
        g
    }

    fn laplacian(&self, ginv: &linalg::Mat, phi_hess: &[linalg::Mat; MAX_DIM], n: usize) -> f64 {
        let g = self.physical_grad(ginv, n);
        let mut m = self.hess;
        for c in 0..n {
            for k in 0..n {
                for l in 0..n {
                    m[k][l] -= g[c] * phi_hess[c][k][l];
                }
            }
        }
        let ggt = linalg::mul(ginv, &linalg::transpose(ginv), n);
        let mut lap = 0.0;
        for k in 0..n {
            for l in 0..n {
                lap += m[k][l] * ggt[l][k];
            }
        }
        lap
    }
}
