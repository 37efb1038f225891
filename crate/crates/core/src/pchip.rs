//! Monotone piecewise-cubic Hermite interpolation (Fritsch–Carlson slopes
//! with the weighted harmonic mean at interior nodes).

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct Pchip {
    x: Vec<f64>,
    y: Vec<f64>,
    slope: Vec<f64>,
}

fn end_slope(h0: f64, h1: f64, m0: f64, m1: f64) -> f64 {
    let d = ((2.0 * h0 + h1) * m0 - h0 * m1) / (h0 + h1);
    if d.signum() != m0.signum() {
        0.0
    } else if m0.signum() != m1.signum() && d.abs() > 3.0 * m0.abs() {
        3.0 * m0
    } else {
        d
    }
}

impl Pchip {
    pub fn new(x: Vec<f64>, y: Vec<f64>) -> Result<Self> {
        let n = x.len();
        if n < 2 || y.len() != n {
            return Err(Error::domain(format!("pchip needs ≥ 2 matching nodes, got {} and {}", n, y.len())));
        }
        if x.iter().chain(&y).any(|v| !v.is_finite()) {
            return Err(Error::domain("pchip nodes must be finite"));
        }
        if x.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::domain("pchip abscissae must be strictly increasing"));
        }
        let h: Vec<f64> = x.windows(2).map(|w| w[1] - w[0]).collect();
        let m: Vec<f64> = (0..n - 1).map(|i| (y[i + 1] - y[i]) / h[i]).collect();
        let mut slope = vec![0.0; n];
        if n == 2 {
            slope = vec![m[0], m[0]];
        } else {
            for i in 1..n - 1 {
                if m[i - 1] * m[i] > 0.0 {
                    let w1 = 2.0 * h[i] + h[i - 1];
                    let w2 = h[i] + 2.0 * h[i - 1];
                    slope[i] = (w1 + w2) / (w1 / m[i - 1] + w2 / m[i]);
                }
            }
            slope[0] = end_slope(h[0], h[1], m[0], m[1]);
            slope[n - 1] = end_slope(h[n - 2], h[n - 3], m[n - 2], m[n - 3]);
        }
        Ok(Pchip { x, y, slope })
    }

    pub fn domain(&self) -> (f64, f64) {
        (self.x[0], *self.x.last().unwrap())
    }

    pub fn nodes(&self) -> (&[f64], &[f64]) {
        (&self.x, &self.y)
    }

    /// Interpolated value; outside the node range is a range error.
    pub fn eval(&self, t: f64) -> Result<f64> {
        let (lo, hi) = self.domain();
        if !(t >= lo && t <= hi) {
            return Err(Error::Range(format!("{t} outside interpolation range [{lo}, {hi}]")));
        }
        let i = match self.x.partition_point(|&v| v <= t) {
            0 => 0,
            p => (p - 1).min(self.x.len() - 2),
        };
        let h = self.x[i + 1] - self.x[i];
        let s = (t - self.x[i]) / h;
        let (y0, y1) = (self.y[i], self.y[i + 1]);
        let (d0, d1) = (self.slope[i] * h, self.slope[i + 1] * h);
        let s2 = s * s;
        let s3 = s2 * s;
        Ok((2.0 * s3 - 3.0 * s2 + 1.0) * y0 + (s3 - 2.0 * s2 + s) * d0 + (-2.0 * s3 + 3.0 * s2) * y1 + (s3 - s2) * d1)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn exact_at_nodes_and_for_lines() {
        let x = vec![0.0, 0.5, 2.0, 3.0];
        let p = Pchip::new(x.clone(), x.iter().map(|v| 3.0 * v - 1.0).collect()).unwrap();
        for &t in &[0.0, 0.25, 0.5, 1.3, 2.0, 2.9, 3.0] {
            assert!((p.eval(t).unwrap() - (3.0 * t - 1.0)).abs() < 1e-14);
        }
    }

    #[test]
    fn flat_data_stays_flat() {
        let p = Pchip::new(vec![0.0, 1.0, 2.0, 3.0], vec![1.0, 1.0, 1.0, 1.0]).unwrap();
        assert_eq!(p.eval(1.7).unwrap(), 1.0);
    }

    #[test]
    fn smooth_function_converges() {
        let err = |n: usize| {
            let x: Vec<f64> = (0..=n).map(|i| i as f64 / n as f64).collect();
            let p = Pchip::new(x.clone(), x.iter().map(|v| v.exp()).collect()).unwrap();
            (0..1000)
                .map(|i| {
                    let t = (i as f64 + 0.5) / 1000.0;
                    (p.eval(t).unwrap() - t.exp()).abs()
                })
                .fold(0.0, f64::max)
        };
        let (e1, e2) = (err(20), err(40));
        assert!(e2 < e1 / 4.0, "{e1} {e2}");
    }

    #[test]
    fn rejects_bad_input_and_extrapolation() {
        assert!(Pchip::new(vec![0.0, 0.0], vec![1.0, 2.0]).is_err());
        assert!(Pchip::new(vec![0.0], vec![1.0]).is_err());
        assert!(Pchip::new(vec![0.0, 1.0], vec![1.0]).is_err());
        let p = Pchip::new(vec![0.0, 1.0], vec![1.0, 2.0]).unwrap();
        assert!(matches!(p.eval(1.0 + 1e-12), Err(Error::Range(_))));
        assert!(p.eval(f64::NAN).is_err());
    }

    proptest! {
        #[test]
        fn monotone_data_gives_monotone_interpolant(steps in proptest::collection::vec((0.01f64..2.0, 0.0f64..3.0), 2..12)) {
            let mut x = vec![0.0];
            let mut y = vec![0.0];
            for (dx, dy) in &steps {
                x.push(x.last().unwrap() + dx);
                y.push(y.last().unwrap() + dy);
            }
            let p = Pchip::new(x.clone(), y.clone()).unwrap();
            let (lo, hi) = p.domain();
            let mut prev = f64::NEG_INFINITY;
            for i in 0..=400 {
                let t = (lo + (hi - lo) * i as f64 / 400.0).min(hi);
                let v = p.eval(t).unwrap();
                prop_assert!(v >= prev - 1e-12);
                prev = v;
            }
            for (xi, yi) in x.iter().zip(&y) {
                prop_assert!((p.eval(*xi).unwrap() - yi).abs() <= 1e-12 * yi.abs().max(1.0));
            }
        }
    }
}
