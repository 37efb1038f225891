//! Energy-dependent scattering lengths and self-consistent trap energies.
//!
//! A level E* is self-consistent when E* = E_i(a_eff(E*)/d). Branches are
//! stored against the scattering angle ψ = θ(a) + iπ, θ = atan(a/d) mapped to
//! (0, π], so that a/d → ±∞ is an ordinary point and consecutive sorted
//! levels join into one increasing curve: level i at a → 0⁺ continues level
//! i − 1 at a → 0⁻.

use std::f64::consts::{FRAC_PI_2, PI};
use std::io::Write;

use rayon::prelude::*;

use crate::eigensolve::{self, SolveOptions};
use crate::error::{Error, Result};
use crate::hamiltonian::BasisSpec;
use crate::pchip::Pchip;
use crate::trapgeom;

/// Parametric resonance. Energies in ħω, B in mT.
///
/// tan δ₀ = −k a_bg − (Γ(E)/2)/(E − δμ(B − B₀)) with the threshold-law width
/// Γ(E) = Γ₀ k d, so a_eff = a_bg + (Γ₀/2) d/(E − δμ(B − B₀)).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ResonanceParams {
    pub a_bg_m: f64,
    pub gamma0: f64,
    pub dmu_per_mt: f64,
    pub b0_mt: f64,
}

impl ResonanceParams {
    /// Bare resonance energy δμ(B − B₀) in ħω.
    pub fn resonance_energy(&self, b_mt: f64) -> f64 {
        self.dmu_per_mt * (b_mt - self.b0_mt)
    }

    /// δ₀(E) for E > 0, with d the trap length in m.
    pub fn phase_shift(&self, energy: f64, b_mt: f64, d: f64) -> Result<f64> {
        let kd = wavenumber(energy)?;
        let k = kd / d;
        let tan = -k * self.a_bg_m - 0.5 * self.gamma0 * kd / (energy - self.resonance_energy(b_mt));
        Ok(tan.atan())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum ModelKind {
    Constant { a_m: f64 },
    /// a_eff(E) tabulated against E in ħω.
    Table(Pchip),
    /// One table per magnetic field; fields must be hit exactly.
    TablesByField { fields: Vec<f64>, tables: Vec<Pchip> },
    Resonance(ResonanceParams),
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScatteringModel {
    pub kind: ModelKind,
    pub van_der_waals_length: Option<f64>,
}

/// k d = √(2E/ħω) for a relative-motion energy E > 0 in ħω.
pub fn wavenumber(energy: f64) -> Result<f64> {
    if !(energy > 0.0) {
        return Err(Error::domain(format!("wavenumber needs E > 0, got {energy}")));
    }
    Ok((2.0 * energy).sqrt())
}

/// a_eff = −tan δ₀ / k.
pub fn a_eff_from_phase_shift(delta0: f64, k: f64) -> Result<f64> {
    if !(k > 0.0) {
        return Err(Error::domain(format!("a_eff needs k > 0, got {k}")));
    }
    Ok(-delta0.tan() / k)
}

impl ScatteringModel {
    pub fn constant(a_m: f64) -> Self {
        ScatteringModel {
            kind: ModelKind::Constant { a_m },
            van_der_waals_length: None,
        }
    }

    /// Table of (E in ħω, a_eff in m) with strictly increasing E.
    pub fn table(energy: Vec<f64>, a_m: Vec<f64>) -> Result<Self> {
        Ok(ScatteringModel {
            kind: ModelKind::Table(Pchip::new(energy, a_m)?),
            van_der_waals_length: None,
        })
    }

    pub fn resonance(params: ResonanceParams) -> Self {
        ScatteringModel {
            kind: ModelKind::Resonance(params),
            van_der_waals_length: None,
        }
    }

    pub fn is_energy_independent(&self) -> bool {
        matches!(self.kind, ModelKind::Constant { .. })
    }

    pub fn needs_field(&self) -> bool {
        matches!(self.kind, ModelKind::TablesByField { .. } | ModelKind::Resonance(_))
    }

    /// a_eff in m at energy E (ħω), field B (mT, where relevant) and trap
    /// length d (m).
    pub fn a_eff(&self, energy: f64, b_mt: Option<f64>, d: f64) -> Result<f64> {
        let field = || b_mt.ok_or_else(|| Error::domain("this scattering model needs a magnetic field"));
        match &self.kind {
            ModelKind::Constant { a_m } => Ok(*a_m),
            ModelKind::Table(t) => t.eval(energy),
            ModelKind::TablesByField { fields, tables } => {
                let b = field()?;
                let idx = fields
                    .iter()
                    .position(|&f| (f - b).abs() <= 1e-12 * f.abs().max(1.0))
                    .ok_or_else(|| Error::Range(format!("no a_eff table for B = {b} mT")))?;
                tables[idx].eval(energy)
            }
            ModelKind::Resonance(p) => {
                let b = field()?;
                Ok(p.a_bg_m + 0.5 * p.gamma0 * d / (energy - p.resonance_energy(b)))
            }
        }
    }

    /// Energy interval (ħω) over which the model is defined.
    pub fn energy_domain(&self, b_mt: Option<f64>) -> (f64, f64) {
        match &self.kind {
            ModelKind::Table(t) => t.domain(),
            ModelKind::TablesByField { fields, tables } => b_mt
                .and_then(|b| fields.iter().position(|&f| (f - b).abs() <= 1e-12 * f.abs().max(1.0)))
                .map(|i| tables[i].domain())
                .unwrap_or((f64::NAN, f64::NAN)),
            _ => (f64::NEG_INFINITY, f64::INFINITY),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EnergyUnit {
    Joule,
    HbarOmega,
}

/// Parses an a_eff table: whitespace- or comma-separated columns `E a` or
/// `E B a`, `#` comments, lengths in m, B in mT. Energies are in J unless a
/// comment line reads `energy_unit = hbar_omega`; `hbar_omega_j` converts J.
pub fn parse_table(text: &str, hbar_omega_j: f64) -> Result<ScatteringModel> {
    let mut unit = EnergyUnit::Joule;
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if let Some(comment) = line.strip_prefix('#') {
            let c = comment.replace(' ', "").to_ascii_lowercase();
            if let Some(v) = c.strip_prefix("energy_unit=") {
                unit = match v {
                    "j" | "joule" => EnergyUnit::Joule,
                    "hbar_omega" => EnergyUnit::HbarOmega,
                    _ => return Err(Error::Parse(format!("line {}: unknown energy unit {v:?}", lineno + 1))),
                };
            }
            continue;
        }
        if line.is_empty() {
            continue;
        }
        let vals: std::result::Result<Vec<f64>, _> = line
            .split(|c: char| c == ',' || c.is_whitespace())
            .filter(|s| !s.is_empty())
            .map(str::parse::<f64>)
            .collect();
        let vals = vals.map_err(|e| Error::Parse(format!("line {}: {e}", lineno + 1)))?;
        if !(vals.len() == 2 || vals.len() == 3) {
            return Err(Error::Parse(format!("line {}: expected 2 or 3 columns, got {}", lineno + 1, vals.len())));
        }
        if rows.first().is_some_and(|r| r.len() != vals.len()) {
            return Err(Error::Parse(format!("line {}: inconsistent column count", lineno + 1)));
        }
        rows.push(vals);
    }
    if rows.is_empty() {
        return Err(Error::Parse("empty a_eff table".into()));
    }
    let to_hw = |e: f64| match unit {
        EnergyUnit::Joule => e / hbar_omega_j,
        EnergyUnit::HbarOmega => e,
    };
    let build = |pairs: Vec<(f64, f64)>| -> Result<Pchip> {
        let (e, a): (Vec<f64>, Vec<f64>) = pairs.into_iter().unzip();
        Pchip::new(e, a).map_err(|e| Error::Parse(format!("a_eff table: {e}")))
    };
    let kind = if rows[0].len() == 2 {
        ModelKind::Table(build(rows.iter().map(|r| (to_hw(r[0]), r[1])).collect())?)
    } else {
        let mut fields: Vec<f64> = Vec::new();
        let mut groups: Vec<Vec<(f64, f64)>> = Vec::new();
        for r in &rows {
            match fields.iter().position(|&f| f == r[1]) {
                Some(i) => groups[i].push((to_hw(r[0]), r[2])),
                None => {
                    fields.push(r[1]);
                    groups.push(vec![(to_hw(r[0]), r[2])]);
                }
            }
        }
        let tables = groups.into_iter().map(build).collect::<Result<Vec<_>>>()?;
        ModelKind::TablesByField { fields, tables }
    };
    Ok(ScatteringModel {
        kind,
        van_der_waals_length: None,
    })
}

/// Largest |a/d| used when sampling; beyond it the levels equal their
/// unitarity values to well below the interpolation tolerance.
const A_CAP: f64 = 1e6;

/// Maps a/d to θ ∈ (0, π]: a > 0 → (0, π/2), ±∞ → π/2, a < 0 → (π/2, π), 0 → π.
pub fn scattering_angle(a_over_d: f64) -> f64 {
    if a_over_d > 0.0 {
        a_over_d.atan()
    } else if a_over_d < 0.0 {
        PI + a_over_d.atan()
    } else if a_over_d.is_nan() {
        f64::NAN
    } else {
        PI
    }
}

fn angle_to_a(theta: f64) -> f64 {
    if theta >= PI {
        0.0
    } else {
        theta.tan().clamp(-A_CAP, A_CAP)
    }
}

// E ≈ −1/(2a²) for the deep level; removed before interpolation
fn singular_part(psi: f64) -> f64 {
    if psi < FRAC_PI_2 {
        let t = psi.tan();
        -0.5 / (t * t)
    } else {
        0.0
    }
}

#[derive(Debug, Clone, Copy)]
pub struct FamilyOptions {
    pub n_max: usize,
    pub l_max: usize,
    /// Sample angles in (0, π).
    pub samples: usize,
    /// Smallest angle kept for the lowest level (a/d = tan of it).
    pub phi_min: f64,
    /// Held-out midpoints checked against direct solves.
    pub holdout: usize,
    pub interp_tol: f64,
    pub solve: SolveOptions,
}

impl Default for FamilyOptions {
    fn default() -> Self {
        FamilyOptions {
            n_max: 32,
            l_max: 32,
            samples: 96,
            phi_min: 0.25f64.atan(),
            holdout: 4,
            interp_tol: 1e-4,
            solve: SolveOptions::default(),
        }
    }
}

/// The k lowest levels E_i(a/d) at fixed A, as one interpolated curve in ψ.
#[derive(Debug, Clone)]
pub struct BranchFamily {
    pub anisotropy: f64,
    pub k: usize,
    pub opts: FamilyOptions,
    curve: Pchip,
    /// Largest held-out interpolation error found at build time.
    pub holdout_error: f64,
}

impl BranchFamily {
    pub fn build(anisotropy: f64, k: usize, opts: FamilyOptions) -> Result<Self> {
        if k == 0 || opts.samples < 4 {
            return Err(Error::domain("a branch family needs k ≥ 1 and at least 4 samples"));
        }
        if !(opts.phi_min > 0.0 && opts.phi_min < FRAC_PI_2) {
            return Err(Error::domain(format!("phi_min must lie in (0, π/2), got {}", opts.phi_min)));
        }
        let mut angles: Vec<f64> = (1..opts.samples).map(|j| PI * j as f64 / opts.samples as f64).collect();
        angles.push(opts.phi_min);
        angles.push(PI);
        angles.sort_by(f64::total_cmp);
        angles.dedup();
        let solve = |theta: f64| -> Result<Vec<f64>> {
            let spec = BasisSpec::new(opts.n_max, opts.l_max, angle_to_a(theta), anisotropy)?;
            Ok(eigensolve::solve_spec(&spec, k, &opts.solve)?.values)
        };
        let levels: Vec<Vec<f64>> = angles.par_iter().map(|&t| solve(t)).collect::<Result<_>>()?;

        let mut nodes: Vec<(f64, f64)> = Vec::new();
        for (&theta, e) in angles.iter().zip(&levels) {
            if theta == PI {
                // a = 0 closes level j at ψ = (j+1)π and opens level j+1 at ψ = (j+1)π
                for (j, &v) in e.iter().enumerate() {
                    nodes.push((PI * (j + 1) as f64, v));
                }
                continue;
            }
            for (i, &v) in e.iter().enumerate() {
                let psi = theta + PI * i as f64;
                if psi >= opts.phi_min {
                    nodes.push((psi, v - singular_part(psi)));
                }
            }
        }
        nodes.sort_by(|a, b| a.0.total_cmp(&b.0));
        nodes.dedup_by(|a, b| a.0 == b.0);
        let (x, y): (Vec<f64>, Vec<f64>) = nodes.into_iter().unzip();
        let curve = Pchip::new(x, y)?;
        let mut family = BranchFamily {
            anisotropy,
            k,
            opts,
            curve,
            holdout_error: 0.0,
        };

        // held-out midpoints spread over (0, π)
        let checks: Vec<f64> = (0..opts.holdout)
            .map(|c| {
                let j = (2 * c + 1) * (angles.len() - 1) / (2 * opts.holdout.max(1));
                0.5 * (angles[j] + angles[j + 1])
            })
            .collect();
        let direct: Vec<Vec<f64>> = checks.par_iter().map(|&t| solve(t)).collect::<Result<_>>()?;
        let mut worst = 0.0f64;
        for (&theta, e) in checks.iter().zip(&direct) {
            for (i, &v) in e.iter().enumerate() {
                let psi = theta + PI * i as f64;
                if psi >= opts.phi_min {
                    worst = worst.max((family.level_at_angle(psi)? - v).abs());
                }
            }
        }
        family.holdout_error = worst;
        if worst > opts.interp_tol {
            return Err(Error::Numeric {
                what: format!(
                    "branch interpolation misses held-out solves by more than {}; increase samples beyond {}",
                    opts.interp_tol, opts.samples
                ),
                residual: worst,
            });
        }
        Ok(family)
    }

    /// ψ range covered by the curve.
    pub fn angle_range(&self) -> (f64, f64) {
        self.curve.domain()
    }

    pub fn level_at_angle(&self, psi: f64) -> Result<f64> {
        Ok(self.curve.eval(psi)? + singular_part(psi))
    }

    /// Interpolated E_i(a/d) in ħω.
    pub fn level(&self, i: usize, a_over_d: f64) -> Result<f64> {
        if i >= self.k {
            return Err(Error::domain(format!("level {i} not in a family of {}", self.k)));
        }
        self.level_at_angle(scattering_angle(a_over_d) + PI * i as f64)
    }

    /// Energy interval spanned by level i.
    pub fn level_range(&self, i: usize) -> Result<(f64, f64)> {
        let lo = self.level_at_angle((PI * i as f64).max(self.opts.phi_min))?;
        let hi = self.level_at_angle(PI * (i + 1) as f64)?;
        Ok((lo, hi))
    }

    fn direct(&self, a_over_d: f64) -> Result<Vec<f64>> {
        let spec = BasisSpec::new(self.opts.n_max, self.opts.l_max, a_over_d, self.anisotropy)?;
        Ok(eigensolve::solve_spec(&spec, self.k, &self.opts.solve)?.values)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SelfConsistentSolution {
    pub level: usize,
    pub energy: f64,
    pub a_over_d: f64,
    pub residual: f64,
    /// Level i has more than one intersection at this field.
    pub multiple: bool,
}

#[derive(Debug, Clone, Copy)]
pub struct ScOptions {
    pub mesh: usize,
    pub energy_tol: f64,
    pub residual_tol: f64,
    /// Optional energy window (ħω) intersected with each level's range.
    pub window: Option<(f64, f64)>,
}

impl Default for ScOptions {
    fn default() -> Self {
        ScOptions {
            mesh: 2000,
            energy_tol: 1e-10,
            residual_tol: 1e-6,
            window: None,
        }
    }
}

/// All intersections E = E_i(a_eff(E)/d) for every level of `family`.
/// `d` is the trap length in m.
pub fn solve_selfconsistent(
    family: &BranchFamily,
    model: &ScatteringModel,
    b_mt: Option<f64>,
    d: f64,
    opts: &ScOptions,
) -> Result<Vec<SelfConsistentSolution>> {
    if let ModelKind::Constant { a_m } = model.kind {
        let a = a_m / d;
        let e = family.direct(a)?;
        return Ok(e
            .into_iter()
            .enumerate()
            .map(|(level, energy)| SelfConsistentSolution {
                level,
                energy,
                a_over_d: a,
                residual: 0.0,
                multiple: false,
            })
            .collect());
    }
    let (dom_lo, dom_hi) = model.energy_domain(b_mt);
    let mut out = Vec::new();
    for i in 0..family.k {
        let (mut lo, mut hi) = family.level_range(i)?;
        lo = lo.max(dom_lo);
        hi = hi.min(dom_hi);
        if let Some((wl, wh)) = opts.window {
            lo = lo.max(wl);
            hi = hi.min(wh);
        }
        if !(hi > lo) {
            continue;
        }
        let f = |e: f64| -> Option<(f64, f64)> {
            let a = model.a_eff(e, b_mt, d).ok()? / d;
            let v = family.level(i, a).ok()?;
            Some((v - e, a))
        };
        let m = opts.mesh.max(2);
        let mesh: Vec<f64> = (0..=m).map(|j| lo + (hi - lo) * j as f64 / m as f64).collect();
        let vals: Vec<Option<(f64, f64)>> = mesh.iter().map(|&e| f(e)).collect();
        if vals.iter().all(Option::is_none) {
            return Err(Error::Range(format!(
                "level {i}: a_eff/d leaves the interpolated range for every E in [{lo}, {hi}]"
            )));
        }
        let mut roots = Vec::new();
        for j in 0..m {
            let (Some((f0, _)), Some((f1, _))) = (vals[j], vals[j + 1]) else {
                continue;
            };
            let mut root = None;
            if f0 == 0.0 {
                root = Some(mesh[j]);
            } else if f0 * f1 < 0.0 {
                let (mut a, mut b, mut fa) = (mesh[j], mesh[j + 1], f0);
                let mut ok = true;
                while b - a > opts.energy_tol * a.abs().max(1.0) {
                    let mid = 0.5 * (a + b);
                    match f(mid) {
                        Some((fm, _)) if fm * fa > 0.0 => {
                            a = mid;
                            fa = fm;
                        }
                        Some(_) => b = mid,
                        None => {
                            ok = false;
                            break;
                        }
                    }
                }
                if ok {
                    root = Some(0.5 * (a + b));
                }
            }
            if let Some(e) = root {
                // discard sign changes at the jump where a_eff passes through 0
                if let Some((r, a)) = f(e) {
                    if r.abs() <= opts.residual_tol {
                        roots.push((e, a, r.abs()));
                    }
                }
            }
        }
        let multiple = roots.len() > 1;
        out.extend(roots.into_iter().map(|(energy, a_over_d, residual)| SelfConsistentSolution {
            level: i,
            energy,
            a_over_d,
            residual,
            multiple,
        }));
    }
    Ok(out)
}

#[derive(Debug, Clone)]
pub struct FeshbachRow {
    pub b_mt: f64,
    pub solutions: Vec<SelfConsistentSolution>,
}

impl FeshbachRow {
    /// The k lowest self-consistent energies at this field, NaN-padded.
    pub fn lowest(&self, k: usize) -> Vec<f64> {
        let mut e: Vec<f64> = self.solutions.iter().map(|s| s.energy).collect();
        e.sort_by(f64::total_cmp);
        e.resize(k.max(e.len()), f64::NAN);
        e.truncate(k);
        e
    }

    pub fn level(&self, i: usize) -> Vec<f64> {
        self.solutions.iter().filter(|s| s.level == i).map(|s| s.energy).collect()
    }
}

#[derive(Debug, Clone)]
pub struct FeshbachSweep {
    pub k: usize,
    pub n_max: usize,
    pub l_max: usize,
    /// Non-interacting lowest level in ħω.
    pub reference: f64,
    pub rows: Vec<FeshbachRow>,
}

/// Self-consistent levels over a magnetic-field grid (mT).
pub fn feshbach_sweep(
    family: &BranchFamily,
    model: &ScatteringModel,
    b_grid: &[f64],
    d: f64,
    opts: &ScOptions,
) -> Result<FeshbachSweep> {
    let rows = b_grid
        .par_iter()
        .map(|&b| {
            Ok(FeshbachRow {
                b_mt: b,
                solutions: solve_selfconsistent(family, model, Some(b), d, opts)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(FeshbachSweep {
        k: family.k,
        n_max: family.opts.n_max,
        l_max: family.opts.l_max,
        reference: trapgeom::noninteracting_ground_energy(family.anisotropy)?,
        rows,
    })
}

impl FeshbachSweep {
    /// CSV: B_mT, E_1..E_k (lowest solutions, NaN when absent),
    /// E_noninteracting, n_max, l_max.
    pub fn write_csv(&self, mut out: impl Write) -> Result<()> {
        let mut header = String::from("B_mT");
        for i in 1..=self.k {
            header.push_str(&format!(",E_{i}"));
        }
        header.push_str(",E_noninteracting,n_max,l_max");
        writeln!(out, "{header}")?;
        for row in &self.rows {
            let mut line = format!("{:.11e}", row.b_mt);
            for e in row.lowest(self.k) {
                line.push_str(&format!(",{e:.11e}"));
            }
            line.push_str(&format!(",{:.11e},{},{}", self.reference, self.n_max, self.l_max));
            writeln!(out, "{line}")?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::eigensolve::TruncationPolicy;
    use proptest::prelude::*;
    use std::sync::OnceLock;

    const ANISO: f64 = 0.5;

    fn family() -> &'static BranchFamily {
        static F: OnceLock<BranchFamily> = OnceLock::new();
        F.get_or_init(|| {
            let opts = FamilyOptions {
                n_max: 16,
                l_max: 16,
                ..Default::default()
            };
            BranchFamily::build(ANISO, 4, opts).unwrap()
        })
    }

    fn res(dmu: f64) -> ResonanceParams {
        ResonanceParams {
            a_bg_m: 0.01,
            gamma0: 2.0,
            dmu_per_mt: dmu,
            b0_mt: 0.0,
        }
    }

    #[test]
    fn constant_model_is_energy_independent() {
        let m = ScatteringModel::constant(-3e-9);
        for e in [-5.0, 0.1, 40.0] {
            assert_eq!(m.a_eff(e, None, 1e-6).unwrap(), -3e-9);
        }
        assert!(m.is_energy_independent());
    }

    #[test]
    fn linear_phase_gives_back_a() {
        for (k, a) in [(0.3, 1.7), (2.0, -0.2)] {
            let delta: f64 = (-k * a as f64).atan();
            assert!((a_eff_from_phase_shift(delta, k).unwrap() - a).abs() < 1e-14);
        }
        assert!(a_eff_from_phase_shift(0.1, 0.0).is_err());
        assert!(wavenumber(-1.0).is_err());
    }

    #[test]
    fn resonance_phase_shift_matches_a_eff() {
        let d = 2.5e-6;
        let p = ResonanceParams {
            a_bg_m: 3e-9,
            gamma0: 0.7,
            dmu_per_mt: 300.0,
            b0_mt: 90.0,
        };
        let m = ScatteringModel::resonance(p);
        for (e, b) in [(0.4, 89.99), (2.0, 90.01), (7.5, 90.0)] {
            let k = wavenumber(e).unwrap() / d;
            let from_phase = a_eff_from_phase_shift(p.phase_shift(e, b, d).unwrap(), k).unwrap();
            let direct = m.a_eff(e, Some(b), d).unwrap();
            assert!((from_phase - direct).abs() <= 1e-12 * direct.abs());
        }
        assert!(m.a_eff(1.0, None, d).is_err());
    }

    #[test]
    fn resonance_changes_sign_across_pole() {
        for dmu in [-1000.0, 1000.0] {
            let m = ScatteringModel::resonance(res(dmu));
            let e = 0.7;
            let b_pole = e / dmu;
            let below = m.a_eff(e, Some(b_pole - 1e-6), 1.0).unwrap();
            let above = m.a_eff(e, Some(b_pole + 1e-6), 1.0).unwrap();
            assert!(below.abs() > 100.0 && above.abs() > 100.0);
            assert!(below.signum() != above.signum());
            if dmu < 0.0 {
                assert!(below < 0.0 && above > 0.0);
            }
        }
    }

    #[test]
    fn table_model_interpolates_and_refuses_extrapolation() {
        let m = ScatteringModel::table(vec![0.0, 1.0, 2.0, 4.0], vec![1e-9, 2e-9, 2.5e-9, 2.6e-9]).unwrap();
        assert_eq!(m.a_eff(1.0, None, 1.0).unwrap(), 2e-9);
        assert!(matches!(m.a_eff(4.5, None, 1.0), Err(Error::Range(_))));
        assert!(ScatteringModel::table(vec![0.0, 0.0], vec![1.0, 1.0]).is_err());
    }

    #[test]
    fn parse_two_and_three_column_tables() {
        let hw = 2.0e-30;
        let two = "# a_eff table\n0 1e-9\n2e-30, 2e-9\n\n4e-30 3e-9\n";
        let m = parse_table(two, hw).unwrap();
        assert_eq!(m.energy_domain(None), (0.0, 2.0));
        assert!((m.a_eff(1.0, None, 1.0).unwrap() - 2e-9).abs() < 1e-24);
        let three = "# energy_unit = hbar_omega\n0 90 1e-9\n1 90 2e-9\n0 91 5e-9\n1 91 6e-9\n";
        let m = parse_table(three, hw).unwrap();
        assert_eq!(m.a_eff(1.0, Some(91.0), 1.0).unwrap(), 6e-9);
        assert!(matches!(m.a_eff(1.0, Some(90.5), 1.0), Err(Error::Range(_))));
        assert!(matches!(parse_table("0 1 2 3\n", hw), Err(Error::Parse(_))));
        assert!(matches!(parse_table("0 x\n", hw), Err(Error::Parse(_))));
        assert!(matches!(parse_table("# nothing\n", hw), Err(Error::Parse(_))));
        assert!(matches!(parse_table("0 1\n0 2 3\n", hw), Err(Error::Parse(_))));
        assert!(matches!(parse_table("# energy_unit = eV\n0 1\n", hw), Err(Error::Parse(_))));
    }

    #[test]
    fn angle_mapping() {
        assert_eq!(scattering_angle(0.0), PI);
        assert!((scattering_angle(1.0) - PI / 4.0).abs() < 1e-15);
        assert!((scattering_angle(-1.0) - 3.0 * PI / 4.0).abs() < 1e-15);
        assert!((scattering_angle(1e300) - FRAC_PI_2).abs() < 1e-15);
        assert!((scattering_angle(-1e300) - FRAC_PI_2).abs() < 1e-15);
    }

    #[test]
    fn family_matches_direct_solves() {
        let f = family();
        assert!(f.holdout_error <= 1e-4);
        for a in [-7.3, -0.9, -0.11, 0.37, 2.2, 55.0] {
            let direct = f.direct(a).unwrap();
            for (i, &v) in direct.iter().enumerate() {
                if i == 0 && a > 0.0 && a < 0.25 {
                    continue;
                }
                assert!((f.level(i, a).unwrap() - v).abs() < 1e-4, "a={a} level {i}");
            }
        }
    }

    #[test]
    fn levels_join_through_zero_scattering_length() {
        let f = family();
        for i in 1..4 {
            let left = f.level(i - 1, -1e-9).unwrap();
            let right = f.level(i, 1e-9).unwrap();
            assert!((left - right).abs() < 1e-6);
        }
        // the deep level is outside the sampled range for small a > 0
        assert!(f.level(0, 0.1).is_err());
        assert!(f.level(4, 1.0).is_err());
    }

    #[test]
    fn constant_model_reproduces_spectrum_table_exactly() {
        let f = family();
        let d = 1.3e-6;
        let a = -0.8;
        let sol = solve_selfconsistent(f, &ScatteringModel::constant(a * d), None, d, &ScOptions::default()).unwrap();
        let policy = TruncationPolicy::Fixed { n_max: 16, l_max: 16 };
        let a_used = sol[0].a_over_d;
        let table = eigensolve::spectrum_vs_a(ANISO, &[a_used], 4, &policy, &SolveOptions::default(), false).unwrap();
        let e: Vec<f64> = sol.iter().map(|s| s.energy).collect();
        assert_eq!(e, table.rows[0].energies);
        assert!((a_used - a).abs() < 1e-15);
    }

    #[test]
    fn decreasing_a_eff_gives_one_root_per_level() {
        let f = family();
        // a_eff falls from +5 d to −5 d over the energy window
        let e: Vec<f64> = (0..=40).map(|j| -10.0 + 0.5 * j as f64).collect();
        let a: Vec<f64> = e.iter().map(|&x| -0.5 * x).collect();
        let m = ScatteringModel::table(e, a).unwrap();
        let sol = solve_selfconsistent(f, &m, None, 1.0, &ScOptions::default()).unwrap();
        for i in 1..4 {
            let roots: Vec<_> = sol.iter().filter(|s| s.level == i).collect();
            assert_eq!(roots.len(), 1, "level {i}");
            let s = roots[0];
            assert!(s.residual <= 1e-6 && !s.multiple);
            assert!((s.a_over_d + 0.5 * s.energy).abs() < 1e-9);
            assert!((f.level(i, s.a_over_d).unwrap() - s.energy).abs() <= 1e-6);
        }
    }

    #[test]
    fn table_outside_level_range_is_reported() {
        let f = family();
        let m = ScatteringModel::table(vec![-30.0, -20.0], vec![0.01, 0.01]).unwrap();
        let sol = solve_selfconsistent(f, &m, None, 1.0, &ScOptions::default()).unwrap();
        assert!(sol.is_empty());
        let m = ScatteringModel::table(vec![-10.0, 20.0], vec![0.01, 0.01]).unwrap();
        assert!(matches!(
            solve_selfconsistent(f, &m, None, 1.0, &ScOptions::default()),
            Err(Error::Range(_))
        ));
    }

    #[test]
    fn sweep_topology() {
        let f = family();
        let m = ScatteringModel::resonance(res(1000.0));
        let grid: Vec<f64> = (0..=220).map(|j| -0.004 + 0.0002 * j as f64).collect();
        let sweep = feshbach_sweep(f, &m, &grid, 1.0, &ScOptions::default()).unwrap();
        let e0 = trapgeom::noninteracting_ground_energy(ANISO).unwrap();
        assert_eq!(sweep.reference, e0);
        let first = sweep.rows.first().unwrap().lowest(2);
        let last = sweep.rows.last().unwrap().lowest(2);
        assert!(first[0] < 0.0, "starts molecular: {first:?}");
        // a_eff > 0 before the resonance pushes the first trap level up
        assert!(first[1] > e0 && first[1] < e0 + 0.5);
        assert!((last[0] - e0).abs() < 0.05, "ends at the trap ground level: {last:?}");
        let passes_half = sweep.rows.iter().any(|r| (r.lowest(1)[0] - 0.5).abs() < 0.1);
        assert!(passes_half);
        for row in &sweep.rows {
            for s in &row.solutions {
                assert!(s.residual <= 1e-6);
            }
        }
    }

    #[test]
    fn sweep_csv_layout() {
        let sweep = FeshbachSweep {
            k: 2,
            n_max: 4,
            l_max: 8,
            reference: 1.5,
            rows: vec![FeshbachRow {
                b_mt: 0.25,
                solutions: vec![SelfConsistentSolution {
                    level: 0,
                    energy: -1.0,
                    a_over_d: 1.0,
                    residual: 0.0,
                    multiple: false,
                }],
            }],
        };
        let mut buf = Vec::new();
        sweep.write_csv(&mut buf).unwrap();
        assert_eq!(
            String::from_utf8(buf).unwrap(),
            "B_mT,E_1,E_2,E_noninteracting,n_max,l_max\n2.50000000000e-1,-1.00000000000e0,NaN,1.50000000000e0,4,8\n"
        );
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]
        #[test]
        fn levels_rise_with_scattering_angle(p1 in 0.3f64..3.9, dp in 0.001f64..0.5) {
            let f = family();
            let p2 = (p1 + dp).min(4.0 * PI - 1e-9);
            prop_assert!(f.level_at_angle(p2).unwrap() >= f.level_at_angle(p1).unwrap() - 1e-9);
        }
    }
}
