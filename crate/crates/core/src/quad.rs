//! Gauss–Legendre quadrature on composite panels.

use std::f64::consts::PI;

/// Nodes and weights of the n-point Gauss–Legendre rule on [-1, 1].
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n > 0);
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    for i in 0..n.div_ceil(2) {
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
        dp = if d != 0.0 { d } else { dp };
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    (nodes, weights)
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
    let p = if n == 0 { 1.0 } else { p1 };
    let d = n as f64 * (x * p - p0) / (x * x - 1.0);
    (p, d)
}

/// A reusable composite rule: `panels` equal panels of an `order`-point rule.
#[derive(Debug, Clone)]
pub struct CompositeRule {
    pub points: Vec<f64>,
    pub weights: Vec<f64>,
}

impl CompositeRule {
    pub fn new(a: f64, b: f64, panels: usize, order: usize) -> Self {
        let (xs, ws) = gauss_legendre(order);
        let h = (b - a) / panels as f64;
        let mut points = Vec::with_capacity(panels * order);
        let mut weights = Vec::with_capacity(panels * order);
        for p in 0..panels {
            let lo = a + p as f64 * h;
            for (x, w) in xs.iter().zip(&ws) {
                points.push(lo + 0.5 * h * (x + 1.0));
                weights.push(0.5 * h * w);
            }
        }
        CompositeRule { points, weights }
    }

    pub fn integrate(&self, f: impl Fn(f64) -> f64) -> f64 {
        self.points.iter().zip(&self.weights).map(|(&x, &w)| w * f(x)).sum()
    }
}

/// ∫_a^b f with `panels` panels of a 20-point rule.
pub fn integrate(f: impl Fn(f64) -> f64, a: f64, b: f64, panels: usize) -> f64 {
    CompositeRule::new(a, b, panels, 20).integrate(f)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn weights_sum_to_two() {
        for n in [1, 2, 5, 20, 41] {
            let (_, w) = gauss_legendre(n);
            assert!((w.iter().sum::<f64>() - 2.0).abs() < 1e-14, "n = {n}");
        }
    }

    #[test]
    fn exact_for_polynomials() {
        let (x, w) = gauss_legendre(6);
        // degree 10 integrates exactly: ∫ x^10 = 2/11
        let s: f64 = x.iter().zip(&w).map(|(x, w)| w * x.powi(10)).sum();
        assert!((s - 2.0 / 11.0).abs() < 1e-15);
    }

    #[test]
    fn composite_gaussian_integral() {
        let s = integrate(|r| (-r * r).exp(), 0.0, 12.0, 12);
        assert!((s - PI.sqrt() / 2.0).abs() < 1e-14);
    }
}
