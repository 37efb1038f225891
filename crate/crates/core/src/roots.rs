//! Bracketed scalar root finding.

use crate::error::{Error, Result};

/// Brent's method on a sign-changing bracket [a, b].
///
/// Stops when the bracket is narrower than `xtol` (absolute) plus 4ε|x|.
pub fn brent(f: impl Fn(f64) -> f64, a: f64, b: f64, xtol: f64) -> Result<f64> {
    let (mut a, mut b) = (a, b);
    let (mut fa, mut fb) = (f(a), f(b));
    if fa == 0.0 {
        return Ok(a);
    }
    if fb == 0.0 {
        return Ok(b);
    }
    if fa.signum() == fb.signum() || fa.is_nan() || fb.is_nan() {
        return Err(Error::domain(format!(
            "brent: no sign change on [{a}, {b}] (f = {fa}, {fb})"
        )));
    }
    let (mut c, mut fc) = (a, fa);
    let mut d = b - a;
    let mut e = d;
    for _ in 0..300 {
        if fb.signum() == fc.signum() {
            c = a;
            fc = fa;
            d = b - a;
            e = d;
        }
        if fc.abs() < fb.abs() {
            a = b;
            b = c;
            c = a;
            fa = fb;
            fb = fc;
            fc = fa;
        }
        let tol = 2.0 * f64::EPSILON * b.abs() + 0.5 * xtol;
        let m = 0.5 * (c - b);
        if m.abs() <= tol || fb == 0.0 {
            return Ok(b);
        }
        if e.abs() >= tol && fa.abs() > fb.abs() {
            let s = fb / fa;
            let (mut p, mut q);
            if a == c {
                p = 2.0 * m * s;
                q = 1.0 - s;
            } else {
                let qa = fa / fc;
                let r = fb / fc;
                p = s * (2.0 * m * qa * (qa - r) - (b - a) * (r - 1.0));
                q = (qa - 1.0) * (r - 1.0) * (s - 1.0);
            }
            if p > 0.0 {
                q = -q;
            } else {
                p = -p;
            }
            if 2.0 * p < (3.0 * m * q - (tol * q).abs()).min((e * q).abs()) {
                e = d;
                d = p / q;
            } else {
                d = m;
                e = m;
            }
        } else {
            d = m;
            e = m;
        }
        a = b;
        fa = fb;
        b += if d.abs() > tol { d } else { tol.copysign(m) };
        fb = f(b);
        if fb.is_nan() {
            return Err(Error::Numeric {
                what: format!("brent: NaN at x = {b}"),
                residual: f64::NAN,
            });
        }
    }
    Err(Error::Numeric {
        what: "brent: iteration limit".into(),
        residual: fb.abs(),
    })
}

/// Plain bisection; returns the midpoint of the final bracket.
pub fn bisect(f: impl Fn(f64) -> f64, a: f64, b: f64, xtol: f64) -> Result<f64> {
    let (mut lo, mut hi) = (a, b);
    let flo = f(lo);
    let fhi = f(hi);
    if flo.signum() == fhi.signum() {
        return Err(Error::domain(format!("bisect: no sign change on [{a}, {b}]")));
    }
    let neg_lo = flo < 0.0;
    while (hi - lo).abs() > xtol {
        let mid = 0.5 * (lo + hi);
        if mid == lo || mid == hi {
            break;
        }
        if (f(mid) < 0.0) == neg_lo {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn brent_finds_cubic_root() {
        let r = brent(|x| x * x * x - 2.0, 0.0, 2.0, 1e-15).unwrap();
        assert!((r - 2f64.cbrt()).abs() < 1e-14);
    }

    #[test]
    fn brent_handles_steep_functions() {
        let r = brent(|x: f64| (50.0 * (x - 0.3)).tanh(), -1.0, 1.0, 1e-14).unwrap();
        assert!((r - 0.3).abs() < 1e-13);
    }

    #[test]
    fn brent_rejects_bad_bracket() {
        assert!(brent(|x| x * x + 1.0, -1.0, 1.0, 1e-12).is_err());
    }

    #[test]
    fn bisect_matches_brent() {
        let f = |x: f64| x.cos() - x;
        let a = bisect(f, 0.0, 1.0, 1e-14).unwrap();
        let b = brent(f, 0.0, 1.0, 1e-14).unwrap();
        assert!((a - b).abs() < 1e-13);
    }
}
