//! Gauss-Legendre rules on the unit interval.

/// Nodes in increasing order and weights on `[0, 1]`.
#[derive(Clone, Debug)]
pub struct GaussRule {
    pub points: Vec<f64>,
    pub weights: Vec<f64>,
}

impl GaussRule {
    pub fn new(g: usize) -> Self {
        assert!(g >= 1, "a Gauss rule needs at least one point");
        let mut points = vec![0.0; g];
        let mut weights = vec![0.0; g];
        let nf = g as f64;
        for i in 0..g.div_ceil(2) {
            let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (nf + 0.5)).cos();
            let mut dp = 0.0;
            for _ in 0..100 {
                // Legendre recurrence for P_g and its derivative
                let (mut p0, mut p1) = (1.0, x);
                for k in 2..=g {
                    let kf = k as f64;
                    let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
                    p0 = p1;
                    p1 = p2;
                }
                dp = nf * (x * p1 - p0) / (x * x - 1.0);
                let dx = p1 / dp;
                x -= dx;
                if dx.abs() < 1e-16 {
                    break;
                }
            }
            let w = 2.0 / ((1.0 - x * x) * dp * dp);
            // x is the i-th largest root
            points[g - 1 - i] = 0.5 * (1.0 + x);
            points[i] = 0.5 * (1.0 - x);
            weights[g - 1 - i] = 0.5 * w;
            weights[i] = 0.5 * w;
        }
        if g % 2 == 1 {
            points[g / 2] = 0.5;
        }
        Self { points, weights }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn integrates_monomials_exactly() {
        for g in 1..=8 {
            let r = GaussRule::new(g);
            for k in 0..2 * g {
                let s: f64 = r.points.iter().zip(&r.weights).map(|(x, w)| w * x.powi(k as i32)).sum();
                assert!((s - 1.0 / (k + 1) as f64).abs() < 1e-14, "g={g} k={k}");
            }
            assert!(r.points.windows(2).all(|w| w[0] < w[1]));
        }
    }

    #[test]
    fn two_point_nodes() {
        let r = GaussRule::new(2);
        let a = 0.5 - 0.5 / 3f64.sqrt();
        assert!((r.points[0] - a).abs() < 1e-16);
        assert!(r.weights.iter().all(|w| (w - 0.5).abs() < 1e-15));
    }
}
