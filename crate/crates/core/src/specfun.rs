//! Real special functions: log-gamma, gamma ratios, digamma, Kummer U with
//! b = 3/2, Laguerre and Legendre polynomials.
//!
//! All kernels are table-free and deterministic. Negative non-pole arguments
//! are handled by reflection.

use std::f64::consts::PI;

use crate::error::{Error, Result};

const LN_SQRT_2PI: f64 = 0.918_938_533_204_672_8;

/// Stirling-series cutoff; below it arguments are shifted upward.
const STIRLING_MIN: f64 = 10.0;

/// Bernoulli numbers B_2 .. B_16.
const BERNOULLI: [f64; 8] = [
    1.0 / 6.0,
    -1.0 / 30.0,
    1.0 / 42.0,
    -1.0 / 30.0,
    5.0 / 66.0,
    -691.0 / 2730.0,
    7.0 / 6.0,
    -3617.0 / 510.0,
];

fn is_nonpositive_integer(x: f64) -> bool {
    x <= 0.0 && x == x.round()
}

/// sin(πx) with exact zeros at the integers.
pub fn sin_pi(x: f64) -> f64 {
    let r = x - 2.0 * (x / 2.0).round(); // r in [-1, 1]
    if r == 0.0 || r.abs() == 1.0 {
        return 0.0;
    }
    if r > 0.5 {
        (PI * (1.0 - r)).sin()
    } else if r < -0.5 {
        -(PI * (1.0 + r)).sin()
    } else {
        (PI * r).sin()
    }
}

/// cos(πx) with exact zeros at the half-integers.
pub fn cos_pi(x: f64) -> f64 {
    sin_pi(x + 0.5)
}

/// tan(πx), reduced to (-1/2, 1/2] before evaluation.
pub fn tan_pi(x: f64) -> f64 {
    let r = x - x.round();
    if r == 0.0 {
        return 0.0;
    }
    (PI * r).tan()
}

/// Stirling correction lnΓ(x) - [(x - 1/2) ln x - x + ln√(2π)] for x ≥ 10.
fn stirling_tail(x: f64) -> f64 {
    let inv = 1.0 / x;
    let inv2 = inv * inv;
    let mut pow = inv;
    let mut sum = 0.0;
    for (k, b) in BERNOULLI.iter().enumerate() {
        let k2 = 2.0 * (k as f64 + 1.0);
        sum += b / (k2 * (k2 - 1.0)) * pow;
        pow *= inv2;
    }
    sum
}

fn log_gamma_positive(x: f64) -> f64 {
    debug_assert!(x > 0.0);
    let mut shift = 0.0;
    let mut y = x;
    let mut prod = 1.0;
    while y < STIRLING_MIN {
        prod *= y;
        y += 1.0;
        // keep the running product representable for tiny x
        if prod > 1e280 || prod < 1e-280 {
            shift += prod.ln();
            prod = 1.0;
        }
    }
    shift += prod.ln();
    (y - 0.5) * y.ln() - y + LN_SQRT_2PI + stirling_tail(y) - shift
}

/// ln|Γ(x)|. Errors at the poles x = 0, -1, -2, ...
pub fn log_gamma(x: f64) -> Result<f64> {
    if x.is_nan() {
        return Err(Error::domain("log_gamma of NaN"));
    }
    if is_nonpositive_integer(x) {
        return Err(Error::domain(format!("log_gamma pole at x = {x}")));
    }
    if x > 0.0 {
        Ok(log_gamma_positive(x))
    } else {
        let s = sin_pi(x).abs();
        Ok(PI.ln() - s.ln() - log_gamma_positive(1.0 - x))
    }
}

/// Sign of Γ(x) for non-pole x.
pub fn gamma_sign(x: f64) -> f64 {
    if x > 0.0 {
        1.0
    } else {
        // Γ alternates sign between consecutive negative integers
        let k = (-x).floor() as i64;
        if k % 2 == 0 {
            -1.0
        } else {
            1.0
        }
    }
}

/// Γ(x) for moderate arguments.
pub fn gamma(x: f64) -> Result<f64> {
    let lg = log_gamma(x)?;
    if lg > 709.0 {
        return Err(Error::Range(format!("gamma({x}) overflows")));
    }
    Ok(gamma_sign(x) * lg.exp())
}

/// ln[Γ(p)/Γ(q)] for p, q > 0, accurate even when p and q are large and close.
fn log_gamma_ratio_positive(p: f64, q: f64) -> f64 {
    debug_assert!(p > 0.0 && q > 0.0);
    let (mut pp, mut qq) = (p, q);
    // Γ(p)/Γ(q) = Γ(p+m)/Γ(q+m) · ∏ (q+j)/(p+j)
    let mut log_corr = 0.0;
    let mut prod = 1.0;
    while pp < STIRLING_MIN || qq < STIRLING_MIN {
        prod *= qq / pp;
        pp += 1.0;
        qq += 1.0;
        if !(1e-280..=1e280).contains(&prod.abs()) {
            log_corr += prod.ln();
            prod = 1.0;
        }
    }
    log_corr += prod.ln();
    let diff = pp - qq;
    let main = (pp - 0.5) * (diff / qq).ln_1p() + diff * qq.ln() - diff;
    main + stirling_tail(pp) - stirling_tail(qq) + log_corr
}

/// ln[Γ(p)/Γ(q)] for p, q > 0.
pub fn log_gamma_ratio(p: f64, q: f64) -> Result<f64> {
    if !(p > 0.0 && q > 0.0) {
        return Err(Error::domain(format!("log_gamma_ratio needs positive arguments ({p}, {q})")));
    }
    Ok(log_gamma_ratio_positive(p, q))
}

/// ln[Γ(s+½)/Γ(s)] for s > 0, without forming s + ½ in the large-s terms.
pub fn log_gamma_half_step(s: f64) -> Result<f64> {
    if !(s > 0.0) {
        return Err(Error::domain(format!("log_gamma_half_step needs s > 0, got {s}")));
    }
    if s < STIRLING_MIN {
        return Ok(log_gamma_ratio_positive(s + 0.5, s));
    }
    Ok(s * (0.5 / s).ln_1p() + 0.5 * s.ln() - 0.5 + stirling_tail(s + 0.5) - stirling_tail(s))
}

/// Ψ(s+½) − Ψ(s) for s > 0, free of cancellation at large s.
pub fn digamma_half_step(s: f64) -> Result<f64> {
    if !(s > 0.0) {
        return Err(Error::domain(format!("digamma_half_step needs s > 0, got {s}")));
    }
    if s < STIRLING_MIN {
        return Ok(digamma_positive(s + 0.5) - digamma_positive(s));
    }
    let tail_prime = |x: f64| -> f64 {
        let inv2 = 1.0 / (x * x);
        let mut pow = inv2;
        let mut sum = 0.0;
        for (k, b) in BERNOULLI.iter().enumerate() {
            sum -= b / (2.0 * (k as f64 + 1.0)) * pow;
            pow *= inv2;
        }
        sum
    };
    Ok((0.5 / s).ln_1p() - 0.5 / (s + 0.5) + 0.5 / s + tail_prime(s + 0.5) - tail_prime(s))
}

/// Γ(p)/Γ(q) for real arguments, finite between poles.
///
/// Returns 0 when q is a pole and p is not; errors when p is a pole.
pub fn gamma_ratio(p: f64, q: f64) -> Result<f64> {
    if p.is_nan() || q.is_nan() {
        return Err(Error::domain("gamma_ratio of NaN"));
    }
    if is_nonpositive_integer(p) {
        return Err(Error::domain(format!("gamma_ratio: numerator pole at p = {p}")));
    }
    if is_nonpositive_integer(q) {
        return Ok(0.0);
    }
    let (sign, log_mag) = match (p > 0.0, q > 0.0) {
        (true, true) => (1.0, log_gamma_ratio_positive(p, q)),
        (false, true) => {
            // Γ(p) = π / (sin(πp) Γ(1-p))
            let s = sin_pi(p);
            (
                s.signum(),
                PI.ln() - s.abs().ln() - log_gamma_positive(1.0 - p) - log_gamma_positive(q),
            )
        }
        (true, false) => {
            let s = sin_pi(q);
            (
                s.signum(),
                log_gamma_positive(p) + log_gamma_positive(1.0 - q) + s.abs().ln() - PI.ln(),
            )
        }
        (false, false) => {
            let (sp, sq) = (sin_pi(p), sin_pi(q));
            (
                (sq / sp).signum(),
                (sq / sp).abs().ln() + log_gamma_ratio_positive(1.0 - q, 1.0 - p),
            )
        }
    };
    if log_mag > 709.0 {
        return Err(Error::Range(format!("gamma_ratio({p}, {q}) overflows")));
    }
    Ok(sign * log_mag.exp())
}

/// Digamma Ψ(x) = d ln Γ(x)/dx, valid for all non-pole real x.
pub fn digamma(x: f64) -> Result<f64> {
    if x.is_nan() {
        return Err(Error::domain("digamma of NaN"));
    }
    if is_nonpositive_integer(x) {
        return Err(Error::domain(format!("digamma pole at x = {x}")));
    }
    if x < 0.5 {
        // Ψ(x) = Ψ(1-x) - π cot(πx)
        return Ok(digamma_positive(1.0 - x) - PI / tan_pi(x));
    }
    Ok(digamma_positive(x))
}

fn digamma_positive(x: f64) -> f64 {
    let mut y = x;
    let mut acc = 0.0;
    while y < STIRLING_MIN {
        acc -= 1.0 / y;
        y += 1.0;
    }
    let inv2 = 1.0 / (y * y);
    let mut pow = inv2;
    let mut series = 0.0;
    for (k, b) in BERNOULLI.iter().enumerate() {
        series += b / (2.0 * (k as f64 + 1.0)) * pow;
        pow *= inv2;
    }
    acc + y.ln() - 0.5 / y - series
}

/// Generalized Laguerre polynomial L_n^{(α)}(x) by three-term recurrence.
pub fn laguerre(n: usize, alpha: f64, x: f64) -> f64 {
    let mut prev = 1.0;
    if n == 0 {
        return prev;
    }
    let mut cur = 1.0 + alpha - x;
    for k in 1..n {
        let kf = k as f64;
        let next = ((2.0 * kf + 1.0 + alpha - x) * cur - (kf + alpha) * prev) / (kf + 1.0);
        prev = cur;
        cur = next;
    }
    cur
}

/// Legendre polynomial P_l(u).
pub fn legendre_p(l: usize, u: f64) -> f64 {
    let mut prev = 1.0;
    if l == 0 {
        return prev;
    }
    let mut cur = u;
    for k in 1..l {
        let kf = k as f64;
        let next = ((2.0 * kf + 1.0) * u * cur - kf * prev) / (kf + 1.0);
        prev = cur;
        cur = next;
    }
    cur
}

/// Spherical harmonic Y_l0(θ, φ) = √((2l+1)/4π) P_l(cos θ).
pub fn y_l0(l: usize, theta: f64) -> f64 {
    ((2 * l + 1) as f64 / (4.0 * PI)).sqrt() * legendre_p(l, theta.cos())
}

/// A value stored as `mantissa · exp(log_scale)` to survive over/underflow.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Scaled {
    pub mantissa: f64,
    pub log_scale: f64,
}

impl Scaled {
    pub fn value(&self) -> f64 {
        if self.mantissa == 0.0 {
            return 0.0;
        }
        self.mantissa * self.log_scale.exp()
    }
}

/// Exp-sinh (double exponential) quadrature of the pair
/// ∫₀^∞ exp(g(s)) ds and ∫₀^∞ exp(g(s) + h(s)) ds on shared nodes.
///
/// `g` must return -inf where the integrand vanishes.
fn exp_sinh_pair(g: impl Fn(f64) -> f64, h: impl Fn(f64) -> f64, rel_tol: f64) -> (f64, f64) {
    const T_MAX: f64 = 4.5;
    let node = |t: f64| -> (f64, f64) {
        let u = 0.5 * PI * t.sinh();
        if !(-700.0..=700.0).contains(&u) {
            return (0.0, 0.0);
        }
        let s = u.exp();
        let lw = (0.5 * PI * t.cosh()).ln() + u;
        let gs = g(s);
        if gs == f64::NEG_INFINITY {
            return (0.0, 0.0);
        }
        ((lw + gs).exp(), (lw + gs + h(s)).exp())
    };
    let mut step = 0.5;
    let n0 = (T_MAX / step) as i64;
    let level0: Vec<(f64, (f64, f64))> = (-n0..=n0)
        .map(|j| {
            let t = j as f64 * step;
            (t, node(t))
        })
        .collect();
    // drop the tails that cannot contribute at double precision
    let peak = level0
        .iter()
        .fold(0.0f64, |m, (_, (f0, f1))| m.max(f0.abs()).max(f1.abs()));
    let live: Vec<f64> = level0
        .iter()
        .filter(|(_, (f0, f1))| f0.abs().max(f1.abs()) > 1e-20 * peak)
        .map(|(t, _)| *t)
        .collect();
    let (t_lo, t_hi) = match (live.first(), live.last()) {
        (Some(&lo), Some(&hi)) => (lo - step, hi + step),
        _ => return (0.0, 0.0),
    };
    let mut sum = level0
        .iter()
        .fold((0.0, 0.0), |acc, (_, (f0, f1))| (acc.0 + f0, acc.1 + f1));
    let mut est = (sum.0 * step, sum.1 * step);
    for _ in 0..12 {
        let j_lo = (t_lo / step - 0.5).floor() as i64;
        let j_hi = (t_hi / step - 0.5).ceil() as i64;
        for j in j_lo..=j_hi {
            let (f0, f1) = node((j as f64 + 0.5) * step);
            sum.0 += f0;
            sum.1 += f1;
        }
        step *= 0.5;
        let next = (sum.0 * step, sum.1 * step);
        // the error after a halving is roughly the square of the last change
        let tol = rel_tol.sqrt();
        let done = (next.0 - est.0).abs() <= tol * next.0.abs() && (next.1 - est.1).abs() <= tol * next.1.abs();
        est = next;
        if done {
            break;
        }
    }
    est
}

/// Γ(a - 1/2)·U(a, 3/2, x)·e^{-x/2} at a and a + 1 (a ≥ 1, x > 0), from
/// Γ(a)U(a,b,x) = x^{-a} ∫₀^∞ e^{-s} s^{a-1} (1 + s/x)^{b-a-1} ds.
fn weighted_u_integral_pair(a: f64, x: f64) -> (Scaled, Scaled) {
    debug_assert!(a >= 1.0 && x > 0.0);
    let (i0, i1) = exp_sinh_pair(
        |s| {
            if s > 1e300 {
                return f64::NEG_INFINITY;
            }
            -s + (a - 1.0) * s.ln() + (0.5 - a) * (s / x).ln_1p()
        },
        |s| s.ln() - (s / x).ln_1p(),
        1e-15,
    );
    let ls0 = log_gamma_positive(a - 0.5) - log_gamma_positive(a) - a * x.ln() - 0.5 * x;
    // Γ(a+½)/Γ(a+1) = Γ(a−½)/Γ(a) · (a−½)/a, and x^{-(a+1)}
    let ls1 = ls0 + ((a - 0.5) / a).ln() - x.ln();
    (
        Scaled {
            mantissa: i0,
            log_scale: ls0,
        },
        Scaled {
            mantissa: i1,
            log_scale: ls1,
        },
    )
}

/// Γ(a - 1/2)·U(a, 3/2, x)·e^{-x/2} for any real a (a ≠ 1/2, -1/2, ...) and x > 0.
///
/// For a < 1 the value is carried down from a₀ ∈ [1, 2) with the contiguous
/// relation in a, which is forward-stable for U in the direction of decreasing a.
/// The Γ(a - 1/2) weight removes the factorial growth of U and is finite at
/// non-positive integer a.
pub fn weighted_kummer_u(a: f64, x: f64) -> Scaled {
    if a >= 1.0 {
        return weighted_u_integral_pair(a, x).0;
    }
    let steps = (1.0 - a).ceil() as usize;
    let a0 = a + steps as f64;
    let (start, upper) = weighted_u_integral_pair(a0, x);
    // common log scale for the two seeds
    let mut log_scale = start.log_scale;
    let mut v0 = start.mantissa;
    let mut v1 = upper.mantissa * (upper.log_scale - log_scale).exp();
    let mut aa = a0;
    for _ in 0..steps {
        // V(a-1) = [(2a + x - 3/2) V(a) - a V(a+1)] / (a - 3/2)
        let vm = ((2.0 * aa + x - 1.5) * v0 - aa * v1) / (aa - 1.5);
        v1 = v0;
        v0 = vm;
        aa -= 1.0;
        let big = v0.abs().max(v1.abs());
        if big > 1e150 || (big < 1e-150 && big > 0.0) {
            let s = big.ln();
            v0 /= big;
            v1 /= big;
            log_scale += s;
        }
    }
    Scaled {
        mantissa: v0,
        log_scale,
    }
}

/// Kummer's confluent hypergeometric function U(a, b, x) for b = 3/2.
///
/// Non-positive integer `a` uses the polynomial form (-1)ⁿ n! Lₙ^{(1/2)}(x),
/// which is also finite at x = 0. Other `a` need x > 0 (U diverges like
/// x^{-1/2} at the origin).
pub fn kummer_u(a: f64, b: f64, x: f64) -> Result<f64> {
    if b != 1.5 {
        return Err(Error::domain(format!("kummer_u only supports b = 3/2, got {b}")));
    }
    if !(x >= 0.0) || !a.is_finite() {
        return Err(Error::domain(format!("kummer_u needs finite a and x >= 0 (a = {a}, x = {x})")));
    }
    if is_nonpositive_integer(a) {
        let n = (-a) as usize;
        let log_fact = log_gamma_positive(n as f64 + 1.0);
        if log_fact > 700.0 {
            return Err(Error::Range(format!("kummer_u({a}, 3/2, {x}) overflows")));
        }
        let sign = if n % 2 == 0 { 1.0 } else { -1.0 };
        return Ok(sign * log_fact.exp() * laguerre(n, 0.5, x));
    }
    if x == 0.0 {
        return Err(Error::Range(format!("kummer_u({a}, 3/2, 0) diverges")));
    }
    let w = weighted_kummer_u(a, x);
    // U = w · e^{x/2} / Γ(a - 1/2)
    let lg = log_gamma(a - 0.5)?;
    let log_mag = w.log_scale + 0.5 * x - lg;
    let mag = w.mantissa.abs().ln() + log_mag;
    if mag > 709.0 {
        return Err(Error::Range(format!("kummer_u({a}, 3/2, {x}) overflows")));
    }
    Ok(gamma_sign(a - 0.5) * w.mantissa * log_mag.exp())
}
