//! Trap geometry, trap units and derived length scales.

use crate::error::{Error, Result};

/// Reduced Planck constant in J·s.
pub const HBAR: f64 = 1.054_571_817e-34;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrapGeometry {
    /// Radial angular frequency ω⊥ (rad/s).
    pub omega_perp: f64,
    /// Axial angular frequency ωz (rad/s).
    pub omega_z: f64,
    /// Reduced mass μ = m/2 (kg).
    pub reduced_mass: f64,
    /// Anisotropy A = ωz/ω⊥.
    pub anisotropy: f64,
    /// Mean-square frequency ω = √((2ω⊥² + ωz²)/3).
    pub omega: f64,
    /// Λ = (A² − 1)/(A² + 2).
    pub lambda: f64,
    /// d = √(ħ/μω) (m).
    pub d: f64,
    pub d_perp: f64,
    pub d_z: f64,
}

impl TrapGeometry {
    /// Builds the geometry of two identical atoms of mass `atom_mass` (kg).
    pub fn from_frequencies(omega_perp: f64, omega_z: f64, atom_mass: f64) -> Result<Self> {
        for (name, v) in [("omega_perp", omega_perp), ("omega_z", omega_z), ("atom_mass", atom_mass)] {
            if !(v > 0.0) || !v.is_finite() {
                return Err(Error::domain(format!("{name} must be positive and finite, got {v}")));
            }
        }
        let mu = 0.5 * atom_mass;
        let omega = ((2.0 * omega_perp * omega_perp + omega_z * omega_z) / 3.0).sqrt();
        let a = omega_z / omega_perp;
        let len = |w: f64| (HBAR / (mu * w)).sqrt();
        Ok(TrapGeometry {
            omega_perp,
            omega_z,
            reduced_mass: mu,
            anisotropy: a,
            omega,
            lambda: lambda(a),
            d: len(omega),
            d_perp: len(omega_perp),
            d_z: len(omega_z),
        })
    }

    /// Same as [`from_frequencies`](Self::from_frequencies) with frequencies in Hz.
    pub fn from_hz(nu_perp: f64, nu_z: f64, atom_mass: f64) -> Result<Self> {
        let two_pi = 2.0 * std::f64::consts::PI;
        Self::from_frequencies(two_pi * nu_perp, two_pi * nu_z, atom_mass)
    }

    /// Energy unit ħω in joules.
    pub fn energy_unit(&self) -> f64 {
        HBAR * self.omega
    }

    pub fn to_trap_energy(&self, joules: f64) -> f64 {
        joules / self.energy_unit()
    }

    pub fn from_trap_energy(&self, e: f64) -> f64 {
        e * self.energy_unit()
    }

    pub fn to_trap_length(&self, meters: f64) -> f64 {
        meters / self.d
    }

    pub fn from_trap_length(&self, x: f64) -> f64 {
        x * self.d
    }

    /// Energies in ħω converted to Hz (E/h).
    pub fn trap_energy_to_hz(&self, e: f64) -> f64 {
        e * self.omega / (2.0 * std::f64::consts::PI)
    }
}

/// Λ(A) = (A² − 1)/(A² + 2).
pub fn lambda(anisotropy: f64) -> f64 {
    let a2 = anisotropy * anisotropy;
    (a2 - 1.0) / (a2 + 2.0)
}

/// ω⊥/ω as a function of A alone.
pub fn omega_perp_ratio(anisotropy: f64) -> f64 {
    (1.5 / (1.0 + 0.5 * anisotropy * anisotropy)).sqrt()
}

/// ωz/ω as a function of A alone.
pub fn omega_z_ratio(anisotropy: f64) -> f64 {
    anisotropy * omega_perp_ratio(anisotropy)
}

/// Lowest non-interacting relative-motion energy in ħω: ω⊥/ω + ωz/2ω.
pub fn noninteracting_ground_energy(anisotropy: f64) -> Result<f64> {
    if !(anisotropy > 0.0) || !anisotropy.is_finite() {
        return Err(Error::domain(format!("anisotropy must be positive, got {anisotropy}")));
    }
    let a = anisotropy;
    Ok((1.0 + 0.5 * a) / (2.0 / 3.0 + a * a / 3.0).sqrt())
}

#[derive(Debug, Clone, PartialEq)]
pub struct ValidityWarning {
    pub van_der_waals_length: f64,
    pub smallest_width: f64,
}

impl std::fmt::Display for ValidityWarning {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "van der Waals length {:.3e} m is not small compared with the narrowest oscillator width {:.3e} m; the pseudopotential description may be inaccurate",
            self.van_der_waals_length, self.smallest_width
        )
    }
}

/// Fraction of min(d⊥, dz) above which the range x₀ triggers a warning.
pub const VALIDITY_FRACTION: f64 = 0.1;

/// Warns when x₀ ≥ 0.1·min(d⊥, dz). An x₀ of 0 disables the check.
pub fn validity_check(geometry: &TrapGeometry, van_der_waals_length: f64) -> Vec<ValidityWarning> {
    let smallest = geometry.d_perp.min(geometry.d_z);
    if van_der_waals_length > 0.0 && van_der_waals_length >= VALIDITY_FRACTION * smallest {
        vec![ValidityWarning {
            van_der_waals_length,
            smallest_width: smallest,
        }]
    } else {
        Vec::new()
    }
}
