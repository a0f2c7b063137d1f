//! Gauss–Legendre rules and Chebyshev–Lobatto spectral integration.

use std::f64::consts::PI;

/// Gauss–Legendre nodes and weights on [-1, 1].
#[derive(Debug, Clone)]
pub struct GaussLegendre {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl GaussLegendre {
    pub fn new(n: usize) -> Self {
        assert!(n >= 1, "Gauss-Legendre order must be positive");
        let mut nodes = vec![0.0; n];
        let mut weights = vec![0.0; n];
        let m = n.div_ceil(2);
        for i in 0..m {
            let mut x = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
            let mut dp = 0.0;
            for _ in 0..100 {
                let (p, d) = legendre_with_derivative(n, x);
                dp = d;
                let dx = p / d;
                x -= dx;
                if dx.abs() < 1e-16 {
                    break;
                }
            }
            let (_, d) = legendre_with_derivative(n, x);
            if d != 0.0 {
                dp = d;
            }
            let w = 2.0 / ((1.0 - x * x) * dp * dp);
            nodes[i] = -x;
            nodes[n - 1 - i] = x;
            weights[i] = w;
            weights[n - 1 - i] = w;
        }
        Self { nodes, weights }
    }

    /// Integral of `f` over [a, b].
    pub fn integrate(&self, a: f64, b: f64, mut f: impl FnMut(f64) -> f64) -> f64 {
        let half = 0.5 * (b - a);
        let mid = 0.5 * (b + a);
        let mut acc = 0.0;
        for (x, w) in self.nodes.iter().zip(&self.weights) {
            acc += w * f(mid + half * x);
        }
        acc * half
    }
}

fn legendre_with_derivative(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    if n == 0 {
        return (1.0, 0.0);
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

/// Chebyshev–Lobatto grid on [0, len] with the cumulative integration matrix
/// `S[i][j]` such that `sum_j S[i][j] f(x_j)` is the integral of the polynomial
/// interpolant of `f` from 0 to `x_i`.
#[derive(Debug, Clone)]
pub struct ChebyshevGrid {
    pub points: Vec<f64>,
    pub cumulative: Vec<Vec<f64>>,
}

impl ChebyshevGrid {
    pub fn new(n: usize, len: f64) -> Self {
        assert!(n >= 2);
        // Points ordered from 0 to len; x = cos(j pi / n) maps 1 -> 0.
        let xs: Vec<f64> = (0..=n).map(|j| (PI * j as f64 / n as f64).cos()).collect();
        let points: Vec<f64> = xs.iter().map(|x| 0.5 * len * (1.0 - x)).collect();
        let mut cumulative = vec![vec![0.0; n + 1]; n + 1];
        for j in 0..=n {
            // Chebyshev coefficients of the j-th cardinal function.
            let mut coef = vec![0.0; n + 1];
            for (k, c) in coef.iter_mut().enumerate() {
                let mut s = (PI * (k * j) as f64 / n as f64).cos();
                if j == 0 || j == n {
                    s *= 0.5;
                }
                *c = 2.0 * s / n as f64;
            }
            coef[0] *= 0.5;
            coef[n] *= 0.5;
            // Antiderivative in x of sum c_k T_k.
            let mut anti = vec![0.0; n + 2];
            for (k, &c) in coef.iter().enumerate() {
                match k {
                    0 => anti[1] += c,
                    1 => {
                        anti[2] += 0.25 * c;
                        anti[0] += 0.25 * c;
                    }
                    _ => {
                        let kf = k as f64;
                        anti[k + 1] += c / (2.0 * (kf + 1.0));
                        anti[k - 1] -= c / (2.0 * (kf - 1.0));
                    }
                }
            }
            let at = |x: f64| chebyshev_eval(&anti, x);
            // Integration from x = 1 down to x_i; dtau = -len/2 dx.
            let top = at(1.0);
            for (i, x) in xs.iter().enumerate() {
                cumulative[i][j] = 0.5 * len * (top - at(*x));
            }
        }
        Self { points, cumulative }
    }

    pub fn integrate_cumulative(&self, values: &[f64]) -> Vec<f64> {
        self.cumulative
            .iter()
            .map(|row| row.iter().zip(values).map(|(s, v)| s * v).sum())
            .collect()
    }
}

fn chebyshev_eval(coef: &[f64], x: f64) -> f64 {
    let mut b1 = 0.0;
    let mut b2 = 0.0;
    for &c in coef.iter().skip(1).rev() {
        let b0 = 2.0 * x * b1 - b2 + c;
        b2 = b1;
        b1 = b0;
    }
    x * b1 - b2 + coef[0]
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn gauss_legendre_integrates_polynomials_exactly() {
        for n in [1usize, 2, 5, 8, 16, 64] {
            let gl = GaussLegendre::new(n);
            let deg = 2 * n - 1;
            let exact = (2.0f64.powi(deg as i32 + 1) - 0.0) / (deg as f64 + 1.0);
            let got = gl.integrate(0.0, 2.0, |x| x.powi(deg as i32));
            assert_relative_eq!(got, exact, max_relative = 1e-13);
            assert_relative_eq!(gl.weights.iter().sum::<f64>(), 2.0, max_relative = 1e-14);
        }
    }

    #[test]
    fn chebyshev_cumulative_integral_of_exponential() {
        let grid = ChebyshevGrid::new(20, 0.7);
        let vals: Vec<f64> = grid.points.iter().map(|t| t.exp()).collect();
        let cum = grid.integrate_cumulative(&vals);
        for (t, c) in grid.points.iter().zip(&cum) {
            assert!((c - (t.exp() - 1.0)).abs() < 1e-14, "{t} {c}");
        }
        assert_eq!(grid.points[0], 0.0);
        assert_relative_eq!(grid.points[20], 0.7, max_relative = 1e-15);
    }
}
