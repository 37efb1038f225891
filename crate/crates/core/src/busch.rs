//! s-wave solutions of the pseudopotential in an isotropic trap.
//!
//! For a scattering length a (in units of d) the s-wave energies are 2ν + 3/2
//! where ν solves a = ½ tan(πν) Γ(ν+1)/Γ(ν+3/2). Trap branch n has
//! ν ∈ (n − ½, n + ½); for a > 0 there is one more root below −½, the
//! trap-modified molecular bound state.

use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::roots::brent;
use crate::specfun::{
    cos_pi, digamma, digamma_half_step, gamma_ratio, log_gamma, log_gamma_half_step, sin_pi,
    weighted_kummer_u,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Branch {
    /// The a > 0 root with ν < −½.
    Bound,
    /// Trap branch n, continuously connected to ν = n at a = 0.
    Trap(usize),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SWaveBranch {
    pub branch: Branch,
    pub nu: f64,
    pub a_over_d: f64,
    /// dν/da in units of 1/d; positive on every branch.
    pub dnu_da: f64,
}

/// ½ tan(πν) Γ(ν+1)/Γ(ν+3/2), evaluated as ½ Γ(−ν−½)/Γ(−ν), which is the
/// same function without the 0·∞ products at negative integers.
pub fn intercept(nu: f64) -> Result<f64> {
    if !nu.is_finite() {
        return Err(Error::domain(format!("intercept of non-finite nu = {nu}")));
    }
    if nu >= -0.5 && (nu + 0.5).fract() == 0.0 {
        return Err(Error::domain(format!("intercept pole at nu = {nu}")));
    }
    Ok(0.5 * gamma_ratio(-nu - 0.5, -nu)?)
}

/// Γ(ν+1)/Γ(ν+3/2) for ν > −1.
fn ratio(nu: f64) -> f64 {
    gamma_ratio(nu + 1.0, nu + 1.5).expect("nu > -1 keeps both arguments positive")
}

/// Smooth root function for trap branch roots: sin(πν) r(ν) − 2a cos(πν).
fn trap_residual(nu: f64, a: f64) -> f64 {
    (sin_pi(nu) * ratio(nu) - 2.0 * a * cos_pi(nu)) / a.abs().max(1.0)
}

/// da/dν on the branch through ν.
fn da_dnu(nu: f64, a: f64) -> Result<f64> {
    if nu > -1.0 {
        let c = cos_pi(nu);
        let d = a * (digamma(nu + 1.0)? - digamma(nu + 1.5)?) + 0.5 * PI * ratio(nu) / (c * c);
        Ok(d)
    } else {
        // a = ½ Γ(s)/Γ(s+½) with s = −ν − ½
        let s = -nu - 0.5;
        Ok(a * digamma_half_step(s)?)
    }
}

/// Solves the branch root at scattering length `a_over_d`.
pub fn nu_branch(a_over_d: f64, branch: Branch) -> Result<SWaveBranch> {
    let a = a_over_d;
    if !a.is_finite() {
        return Err(Error::domain(format!("a/d must be finite, got {a}")));
    }
    let nu = match branch {
        Branch::Trap(n) => {
            let n = n as f64;
            if a == 0.0 {
                n
            } else {
                let (lo, hi) = if a > 0.0 { (n, n + 0.5) } else { (n - 0.5, n) };
                brent(|nu| trap_residual(nu, a), lo, hi, 1e-15)?
            }
        }
        Branch::Bound => {
            if a <= 0.0 {
                return Err(Error::domain(format!(
                    "the bound branch exists only for a/d > 0, got {a}"
                )));
            }
            // a = ½ Γ(s)/Γ(s+½) is decreasing in s; solve in t = ln s
            let target = (2.0 * a).ln();
            let f = |t: f64| -log_gamma_half_step(t.exp()).unwrap() - target;
            let t = brent(f, -40.0, 40.0, 1e-15)?;
            -t.exp() - 0.5
        }
    };
    let slope = da_dnu(nu, a)?;
    // allow for the few-ulp uncertainty of ν itself, which matters near the pole
    let allowed = 1e-10 * a.abs().max(1.0) + 4.0 * f64::EPSILON * nu.abs().max(1.0) * slope.abs();
    let residual = (intercept(nu)? - a).abs();
    if residual > allowed {
        return Err(Error::Numeric {
            what: format!("s-wave root for {branch:?} at a/d = {a}"),
            residual,
        });
    }
    let dnu_da = 1.0 / slope;
    Ok(SWaveBranch {
        branch,
        nu,
        a_over_d: a,
        dnu_da,
    })
}

/// The s-wave branches used by a basis with trap branches 0..=n_max: the
/// bound branch first when a > 0, then the trap branches in order.
pub fn branches(a_over_d: f64, n_max: usize) -> Result<Vec<SWaveBranch>> {
    let mut out = Vec::with_capacity(n_max + 2);
    if a_over_d > 0.0 {
        out.push(nu_branch(a_over_d, Branch::Bound)?);
    }
    for n in 0..=n_max {
        out.push(nu_branch(a_over_d, Branch::Trap(n))?);
    }
    Ok(out)
}

impl SWaveBranch {
    /// Isotropic-trap energy 2ν + 3/2 in ħω.
    pub fn energy(&self) -> f64 {
        2.0 * self.nu + 1.5
    }

    /// Normalized radial s-wave function Q(r) in d^{-3/2}.
    ///
    /// Q = −√(dν/da / π) · Γ(−ν−½) U(−ν, 3/2, r²) e^{−r²/2}; the overall sign
    /// makes Q reduce to +R_{n0} at a = 0. Q diverges like 1/r at the origin
    /// unless a = 0, so r = 0 is only accepted in that case.
    pub fn eval_q(&self, r: f64) -> Result<f64> {
        if !(r >= 0.0) {
            return Err(Error::domain(format!("radius must be non-negative, got {r}")));
        }
        if self.a_over_d == 0.0 {
            if let Branch::Trap(n) = self.branch {
                return Ok(eval_r(n, 0, r));
            }
        }
        if r == 0.0 {
            return Err(Error::Range("Q diverges at r = 0 for a != 0".into()));
        }
        let v = weighted_kummer_u(-self.nu, r * r).value();
        Ok(-(self.dnu_da / PI).sqrt() * v)
    }

    /// lim_{r→0} r·Q(r) = −2a √(dν/da).
    pub fn r_q_at_origin(&self) -> f64 {
        -2.0 * self.a_over_d * self.dnu_da.sqrt()
    }
}

/// Q for a branch solved at `a_over_d`; errors if the branch belongs to another a.
pub fn eval_q(branch: &SWaveBranch, a_over_d: f64, r: f64) -> Result<f64> {
    if branch.a_over_d != a_over_d {
        return Err(Error::State(format!(
            "branch solved at a/d = {} used at a/d = {a_over_d}",
            branch.a_over_d
        )));
    }
    branch.eval_q(r)
}

/// Normalized oscillator radial functions R_{n l}(r), n = 0..=n_max, in d^{-3/2}.
///
/// Uses the three-term recurrence for the normalized functions with a running
/// log scale, so large n and r neither overflow nor underflow prematurely.
pub fn radial_functions(n_max: usize, l: usize, r: f64) -> Vec<f64> {
    let mut out = vec![0.0; n_max + 1];
    if r == 0.0 && l > 0 {
        return out;
    }
    let alpha = l as f64 + 0.5;
    let x = r * r;
    let ln_r = if l > 0 { l as f64 * r.ln() } else { 0.0 };
    let mut log_scale = 0.5 * 2f64.ln() - 0.5 * log_gamma(alpha + 1.0).unwrap() + ln_r - 0.5 * x;
    let mut prev = 0.0;
    let mut cur = 1.0;
    out[0] = log_scale.exp();
    for n in 0..n_max {
        let nf = n as f64;
        let next = ((2.0 * nf + alpha + 1.0 - x) * cur - (nf * (nf + alpha)).sqrt() * prev)
            / ((nf + 1.0) * (nf + alpha + 1.0)).sqrt();
        prev = cur;
        cur = next;
        let big = cur.abs().max(prev.abs());
        if big > 1e100 || (big < 1e-100 && big > 0.0) {
            prev /= big;
            cur /= big;
            log_scale += big.ln();
        }
        out[n + 1] = if cur == 0.0 { 0.0 } else { cur.signum() * (cur.abs().ln() + log_scale).exp() };
    }
    out
}

/// Single normalized oscillator radial function R_{n l}(r).
pub fn eval_r(n: usize, l: usize, r: f64) -> f64 {
    radial_functions(n, l, r)[n]
}
