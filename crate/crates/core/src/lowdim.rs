//! One- and two-dimensional reference models with renormalized couplings.
//!
//! 1D: E = (ω⊥/ω)[1 + A(2ν + ½)] with tan(πν) Γ(ν+1)/Γ(ν+½) = g¹ᴰ.
//! 2D: E = (ω⊥/ω)[A/2 + 2ν + 1] with Ψ(−ν) = 1/g²ᴰ.

use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::roots::brent;
use crate::specfun::{cos_pi, digamma, gamma_ratio, log_gamma_half_step, sin_pi};
use crate::trapgeom;

/// Constant of the one-dimensional coupling renormalization.
pub const C_1D: f64 = 1.4603;
/// Constant inside the logarithm of the two-dimensional renormalization.
pub const C_2D: f64 = 0.915;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Dimension {
    One,
    Two,
}

impl Dimension {
    pub fn tag(self) -> &'static str {
        match self {
            Dimension::One => "1d",
            Dimension::Two => "2d",
        }
    }
}

impl std::str::FromStr for Dimension {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "1d" | "1" => Ok(Dimension::One),
            "2d" | "2" => Ok(Dimension::Two),
            _ => Err(Error::Parse(format!("unknown dimension tag {s:?} (expected 1d or 2d)"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LowDimLevels {
    pub dimension: Dimension,
    pub coupling: f64,
    pub nu: Vec<f64>,
    /// Energies in ħω.
    pub energies: Vec<f64>,
    pub anisotropy: f64,
}

fn check_anisotropy(aniso: f64) -> Result<()> {
    if !(aniso > 0.0 && aniso.is_finite()) {
        return Err(Error::domain(format!("anisotropy must be positive, got {aniso}")));
    }
    Ok(())
}

fn shape(aniso: f64) -> f64 {
    (1.0 + 0.5 * aniso * aniso).powf(-0.25)
}

/// g¹ᴰ without the renormalizing denominator.
pub fn g1d_bare(a_over_d: f64, aniso: f64) -> Result<f64> {
    check_anisotropy(aniso)?;
    Ok(1.5f64.powf(0.25) * aniso.powf(-0.5) * shape(aniso) * a_over_d)
}

/// The a/d at which the renormalized g¹ᴰ has its pole.
pub fn resonance_1d(aniso: f64) -> Result<f64> {
    check_anisotropy(aniso)?;
    Ok(1.0 / (C_1D * 1.5f64.powf(0.25) * shape(aniso)))
}

/// Renormalized one-dimensional coupling.
pub fn g1d(a_over_d: f64, aniso: f64) -> Result<f64> {
    let bare = g1d_bare(a_over_d, aniso)?;
    let den = 1.0 - C_1D * 1.5f64.powf(0.25) * shape(aniso) * a_over_d;
    if den.abs() < 1e-12 {
        return Err(Error::Resonance {
            critical_a_over_d: resonance_1d(aniso)?,
        });
    }
    Ok(bare / den)
}

fn prefactor_2d(aniso: f64) -> f64 {
    (1.5 / (PI * PI)).powf(0.25) * aniso.sqrt() * shape(aniso)
}

/// g²ᴰ without the renormalizing denominator.
pub fn g2d_bare(a_over_d: f64, aniso: f64) -> Result<f64> {
    check_anisotropy(aniso)?;
    Ok(prefactor_2d(aniso) * a_over_d)
}

/// The a/d at which the renormalized g²ᴰ has its pole; `None` when the
/// logarithm vanishes and there is no pole.
pub fn resonance_2d(aniso: f64) -> Result<Option<f64>> {
    check_anisotropy(aniso)?;
    let log = (C_2D * aniso / (4.0 * PI)).ln();
    if log == 0.0 {
        return Ok(None);
    }
    Ok(Some(-1.0 / (prefactor_2d(aniso) * log)))
}

/// Renormalized two-dimensional coupling.
pub fn g2d(a_over_d: f64, aniso: f64) -> Result<f64> {
    let bare = g2d_bare(a_over_d, aniso)?;
    let den = 1.0 + (C_2D * aniso / (4.0 * PI)).ln() * bare;
    if den.abs() < 1e-12 {
        return Err(Error::Resonance {
            critical_a_over_d: resonance_2d(aniso)?.unwrap_or(f64::NAN),
        });
    }
    Ok(bare / den)
}

/// tan(πν) Γ(ν+1)/Γ(ν+½), written as −Γ(½−ν)/Γ(−ν) so that it is finite
/// through ν = −½, −1, ...
pub fn transcendental_1d(nu: f64) -> Result<f64> {
    Ok(-gamma_ratio(0.5 - nu, -nu)?)
}

fn rgamma(x: f64) -> f64 {
    gamma_ratio(1.0, x).unwrap()
}

fn half_ratio(nu: f64) -> f64 {
    // Γ(ν+1)/Γ(ν+½) for ν > −½
    gamma_ratio(nu + 1.0, nu + 0.5).unwrap()
}

/// ν on branch `i` of the 1D model: branch 0 covers ν < ½, branch i ≥ 1
/// covers (i − ½, i + ½).
pub fn nu_1d(g: f64, branch: usize) -> Result<f64> {
    if !g.is_finite() {
        return Err(Error::domain(format!("g1d must be finite, got {g}")));
    }
    if g == 0.0 {
        return Ok(branch as f64);
    }
    let scale = g.abs().max(1.0);
    let smooth = |nu: f64| (sin_pi(nu) * half_ratio(nu) - g * cos_pi(nu)) / scale;
    // −1/Γ(−ν) − g/Γ(½−ν) is entire and vanishes only where f = g on (−½, ½)
    let entire = |nu: f64| (-rgamma(-nu) - g * rgamma(0.5 - nu)) / scale;
    let (nu, residual) = if branch > 0 {
        let i = branch as f64;
        let nu = brent(smooth, i - 0.5, i + 0.5, 1e-15)?;
        (nu, smooth(nu).abs())
    } else if g > transcendental_1d(-0.5)? {
        let nu = brent(entire, -0.5, 0.5, 1e-15)?;
        (nu, entire(nu).abs())
    } else {
        // −Γ(s+½)/Γ(s) = g with s = −ν ≥ ½, increasing in s
        let target = (-g).ln();
        let f = |t: f64| log_gamma_half_step(t.exp()).unwrap() - target;
        let nu = -brent(f, 0.5f64.ln(), 80.0, 1e-15)?.exp();
        (nu, (transcendental_1d(nu)? - g).abs() / scale)
    };
    if residual > 1e-10 {
        return Err(Error::Numeric {
            what: format!("1D root on branch {branch} for g = {g}"),
            residual,
        });
    }
    Ok(nu)
}

/// ν on branch `i` of the 2D model: branch 0 covers ν < 0, branch i ≥ 1
/// covers (i − 1, i). At g = 0 branch i is ν = i − 1 and branch 0 is absent.
pub fn nu_2d(g: f64, branch: usize) -> Result<f64> {
    if !g.is_finite() {
        return Err(Error::domain(format!("g2d must be finite, got {g}")));
    }
    if g == 0.0 {
        return match branch {
            0 => Err(Error::Range("the 2D branch below ν = 0 is absent at g = 0".into())),
            i => Ok((i - 1) as f64),
        };
    }
    let inv = 1.0 / g;
    let nu = if branch == 0 {
        // Ψ(x) = 1/g with x = −ν > 0, increasing in x; solve in t = ln x
        let f = |t: f64| digamma(t.exp()).unwrap() - inv;
        let t = brent(f, -300.0, 700.0, 1e-15).map_err(|_| {
            Error::Range(format!("2D bound level out of range for g = {g}"))
        })?;
        -t.exp()
    } else {
        // g[Ψ(1+ν) sin πν + π cos πν] − sin πν, which is Ψ(−ν) − 1/g times g sin πν
        let scale = g.abs().max(1.0);
        let smooth =
            |nu: f64| (g * (digamma(1.0 + nu).unwrap() * sin_pi(nu) + PI * cos_pi(nu)) - sin_pi(nu)) / scale;
        let k = (branch - 1) as f64;
        brent(smooth, k, k + 1.0, 1e-15)?
    };
    let residual = (digamma(-nu)? - inv).abs() / inv.abs().max(1.0);
    let slack = 4.0 * f64::EPSILON * nu.abs().max(1.0) * trigamma_estimate(-nu);
    if residual > 1e-10 + slack {
        return Err(Error::Numeric {
            what: format!("2D root on branch {branch} for g = {g}"),
            residual,
        });
    }
    Ok(nu)
}

// |Ψ'(x)| bound used only to size the rounding allowance near poles
fn trigamma_estimate(x: f64) -> f64 {
    let near = x - x.round();
    let pole = if x <= 0.0 { 1.0 / (near * near).max(1e-300) } else { 0.0 };
    pole + 1.0 / x.abs().max(1e-3) + 1.0
}

/// Lowest `count` levels of the chosen model for a given coupling.
pub fn levels_for_coupling(dimension: Dimension, g: f64, aniso: f64, count: usize) -> Result<LowDimLevels> {
    check_anisotropy(aniso)?;
    let wp = trapgeom::omega_perp_ratio(aniso);
    let mut nu = Vec::with_capacity(count);
    match dimension {
        Dimension::One => {
            for i in 0..count {
                nu.push(nu_1d(g, i)?);
            }
        }
        Dimension::Two => {
            let first = if g == 0.0 { 1 } else { 0 };
            for i in first..first + count {
                nu.push(nu_2d(g, i)?);
            }
        }
    }
    let energies = nu
        .iter()
        .map(|&v| match dimension {
            Dimension::One => wp * (1.0 + aniso * (2.0 * v + 0.5)),
            Dimension::Two => wp * (0.5 * aniso + 2.0 * v + 1.0),
        })
        .collect();
    Ok(LowDimLevels {
        dimension,
        coupling: g,
        nu,
        energies,
        anisotropy: aniso,
    })
}

pub fn energies_1d(a_over_d: f64, aniso: f64, count: usize) -> Result<LowDimLevels> {
    levels_for_coupling(Dimension::One, g1d(a_over_d, aniso)?, aniso, count)
}

pub fn energies_2d(a_over_d: f64, aniso: f64, count: usize) -> Result<LowDimLevels> {
    levels_for_coupling(Dimension::Two, g2d(a_over_d, aniso)?, aniso, count)
}

pub fn energies(dimension: Dimension, a_over_d: f64, aniso: f64, count: usize) -> Result<LowDimLevels> {
    match dimension {
        Dimension::One => energies_1d(a_over_d, aniso, count),
        Dimension::Two => energies_2d(a_over_d, aniso, count),
    }
}

/// For each full-solver level above `e_min`, the distance to the nearest model
/// level; `None` for levels at or below `e_min`.
pub fn deviations(full: &[f64], model: &[f64], e_min: f64) -> Vec<Option<f64>> {
    full.iter()
        .map(|&e| {
            (e > e_min)
                .then(|| model.iter().map(|m| (m - e).abs()).fold(f64::INFINITY, f64::min))
        })
        .collect()
}
