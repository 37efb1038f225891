//! Relative-motion wavefunction rψ(r, θ) rebuilt from eigenvector
//! coefficients, its grid export in the y = 0 plane and its moments.

use std::f64::consts::PI;
use std::io::Write;

use rayon::prelude::*;

use crate::busch::{self, SWaveBranch};
use crate::eigensolve::Eigen;
use crate::error::{Error, Result};
use crate::hamiltonian::{angular_i, BasisSpec};
use crate::quad::CompositeRule;

#[derive(Debug, Clone)]
pub struct Wavefunction {
    pub spec: BasisSpec,
    pub coeffs: Vec<f64>,
    /// s-wave branches in basis order (bound first when present).
    pub branches: Vec<SWaveBranch>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Moments {
    pub norm: f64,
    pub r2: f64,
    pub z2: f64,
    pub x2: f64,
}

impl Moments {
    /// ⟨z²⟩/⟨x²⟩.
    pub fn anisotropy_ratio(&self) -> f64 {
        self.z2 / self.x2
    }
}

/// Σ_l b_l P_l(u) by Clenshaw's recurrence.
fn legendre_series(b: &[f64], u: f64) -> f64 {
    let n = b.len();
    if n == 0 {
        return 0.0;
    }
    // P_{k+1} = α_k P_k + β_k P_{k−1}, α_k = (2k+1)u/(k+1), β_k = −k/(k+1)
    let (mut y1, mut y2) = (0.0, 0.0);
    for k in (1..n).rev() {
        let kf = k as f64;
        let alpha = (2.0 * kf + 1.0) * u / (kf + 1.0);
        let beta = -(kf + 1.0) / (kf + 2.0);
        let y = b[k] + alpha * y1 + beta * y2;
        y2 = y1;
        y1 = y;
    }
    b[0] + u * y1 - 0.5 * y2
}

impl Wavefunction {
    pub fn new(spec: BasisSpec, coeffs: Vec<f64>, branches: Vec<SWaveBranch>) -> Result<Self> {
        if coeffs.len() != spec.dimension() {
            return Err(Error::State(format!(
                "{} coefficients for a basis of dimension {}",
                coeffs.len(),
                spec.dimension()
            )));
        }
        if branches.len() != spec.swave_size() {
            return Err(Error::State(format!(
                "{} s-wave branches for {} s-wave basis states",
                branches.len(),
                spec.swave_size()
            )));
        }
        for b in &branches {
            if b.a_over_d != spec.a_over_d {
                return Err(Error::State(format!(
                    "branch built for a/d = {} but coefficients for a/d = {}",
                    b.a_over_d, spec.a_over_d
                )));
            }
        }
        let expected = busch::branches(spec.a_over_d, spec.n_max)?;
        if expected.iter().zip(&branches).any(|(e, b)| e.branch != b.branch) {
            return Err(Error::State("s-wave branches are not in basis order".into()));
        }
        Ok(Wavefunction { spec, coeffs, branches })
    }

    /// Level `level` of an eigensolution of `spec`.
    pub fn from_eigen(spec: &BasisSpec, eigen: &Eigen, level: usize) -> Result<Self> {
        let v = eigen
            .vectors
            .get(level)
            .ok_or_else(|| Error::domain(format!("level {level} not among the {} computed", eigen.vectors.len())))?;
        Wavefunction::new(*spec, v.clone(), busch::branches(spec.a_over_d, spec.n_max)?)
    }

    /// r·u_l(r) for l = 0, 2, ..., l_max, where ψ = Σ_l u_l(r) Y_l0(θ).
    /// Finite at r = 0.
    pub fn partial_waves(&self, r: f64) -> Result<Vec<f64>> {
        if !(r >= 0.0 && r.is_finite()) {
            return Err(Error::domain(format!("radius must be finite and non-negative, got {r}")));
        }
        let spec = &self.spec;
        let mut out = Vec::with_capacity(spec.block_count());
        let s_range = spec.block_range(0);
        let mut s = 0.0;
        for (c, b) in self.coeffs[s_range].iter().zip(&self.branches) {
            if *c == 0.0 {
                continue;
            }
            let rq = if r == 0.0 {
                b.r_q_at_origin()
            } else {
                r * b.eval_q(r)?
            };
            s += c * rq;
        }
        out.push(s);
        for j in 1..spec.block_count() {
            let l = 2 * j;
            let rad = busch::radial_functions(spec.n_max, l, r);
            let c = &self.coeffs[spec.block_range(j)];
            out.push(r * c.iter().zip(&rad).map(|(a, b)| a * b).sum::<f64>());
        }
        Ok(out)
    }

    /// r·ψ at radius r (d) and polar angle θ from the z axis.
    pub fn r_psi(&self, r: f64, theta: f64) -> Result<f64> {
        let waves = self.partial_waves(r)?;
        Ok(self.combine(&waves, theta.cos()))
    }

    fn combine(&self, waves: &[f64], u: f64) -> f64 {
        // Y_l0 = √((2l+1)/4π) P_l; only even l are present
        let mut b = vec![0.0; 2 * waves.len() - 1];
        for (j, w) in waves.iter().enumerate() {
            let l = 2 * j;
            b[l] = w * ((2 * l + 1) as f64 / (4.0 * PI)).sqrt();
        }
        legendre_series(&b, u)
    }

    /// Radius beyond which every basis function is negligible.
    pub fn radial_extent(&self) -> f64 {
        (4.0 * self.spec.n_max as f64 + 2.0 * self.spec.l_max as f64 + 3.0).sqrt() + 7.0
    }

    /// ‖ψ‖², ⟨r²⟩, ⟨z²⟩ and ⟨x²⟩ by radial quadrature of the partial waves.
    pub fn moments(&self) -> Result<Moments> {
        let extent = self.radial_extent();
        let rule = CompositeRule::new(0.0, extent, (4.0 * extent).ceil() as usize, 20);
        let waves: Vec<Vec<f64>> = rule
            .points
            .par_iter()
            .map(|&r| self.partial_waves(r))
            .collect::<Result<_>>()?;
        let nb = self.spec.block_count();
        let (mut norm, mut r2) = (0.0, 0.0);
        let mut p2 = 0.0;
        for ((&r, &w), u) in rule.points.iter().zip(&rule.weights).zip(&waves) {
            // ∫ |u_l|² r² dr = ∫ (r u_l)² dr
            let sq: f64 = u.iter().map(|v| v * v).sum();
            norm += w * sq;
            r2 += w * r * r * sq;
            let mut cross = 0.0;
            for j in 0..nb {
                cross += angular_i(2 * j, 2 * j) * u[j] * u[j];
                if j + 1 < nb {
                    cross += 2.0 * angular_i(2 * j, 2 * j + 2) * u[j] * u[j + 1];
                }
            }
            p2 += w * r * r * cross;
        }
        // z² = r²(1 + 2P₂)/3, and x² averaged over the azimuth is r²(1 − P₂)/3
        Ok(Moments {
            norm,
            r2,
            z2: (r2 + 2.0 * p2) / 3.0,
            x2: (r2 - p2) / 3.0,
        })
    }
}

#[derive(Debug, Clone)]
pub struct WavefunctionGrid {
    pub x: Vec<f64>,
    pub z: Vec<f64>,
    /// r·ψ, row-major with z as the slow index.
    pub values: Vec<f64>,
    pub anisotropy: f64,
    pub a_over_d: f64,
    pub level: usize,
    pub n_max: usize,
    pub l_max: usize,
}

fn symmetric_axis(extent: f64, count: usize) -> Vec<f64> {
    let m = (count - 1) as f64;
    (0..count).map(|j| extent * (2.0 * j as f64 - m) / m).collect()
}

/// Samples rψ(x, 0, z) on x ∈ [−x_extent, x_extent], z ∈ [−z_extent, z_extent].
/// Only the x ≥ 0, z ≥ 0 quadrant is evaluated; the rest follows by symmetry.
pub fn export_grid(
    wf: &Wavefunction,
    level: usize,
    x_extent: f64,
    z_extent: f64,
    resolution: (usize, usize),
) -> Result<WavefunctionGrid> {
    let (nx, nz) = resolution;
    if !(x_extent > 0.0 && z_extent > 0.0) || nx < 2 || nz < 2 {
        return Err(Error::domain("grid extents must be positive with at least 2 points per axis"));
    }
    let x = symmetric_axis(x_extent, nx);
    let z = symmetric_axis(z_extent, nz);
    // mirrored axes are exact negatives, so |x| indexes the quadrant
    let xq: Vec<usize> = (0..nx).filter(|&i| x[i] >= 0.0).collect();
    let zq: Vec<usize> = (0..nz).filter(|&i| z[i] >= 0.0).collect();
    let quadrant: Vec<f64> = zq
        .par_iter()
        .flat_map_iter(|&iz| xq.iter().map(move |&ix| (ix, iz)))
        .map(|(ix, iz)| {
            let (xv, zv) = (x[ix], z[iz]);
            let r = xv.hypot(zv);
            let theta = if r == 0.0 { 0.0 } else { xv.atan2(zv) };
            wf.r_psi(r, theta)
        })
        .collect::<Result<_>>()?;
    let lookup = |ix: usize, iz: usize| -> f64 {
        let qx = if x[ix] >= 0.0 { ix } else { nx - 1 - ix };
        let qz = if z[iz] >= 0.0 { iz } else { nz - 1 - iz };
        let px = xq.iter().position(|&i| i == qx).unwrap();
        let pz = zq.iter().position(|&i| i == qz).unwrap();
        quadrant[pz * xq.len() + px]
    };
    let mut values = Vec::with_capacity(nx * nz);
    for iz in 0..nz {
        for ix in 0..nx {
            values.push(lookup(ix, iz));
        }
    }
    Ok(WavefunctionGrid {
        x,
        z,
        values,
        anisotropy: wf.spec.anisotropy,
        a_over_d: wf.spec.a_over_d,
        level,
        n_max: wf.spec.n_max,
        l_max: wf.spec.l_max,
    })
}

impl WavefunctionGrid {
    pub fn value(&self, ix: usize, iz: usize) -> f64 {
        self.values[iz * self.x.len() + ix]
    }

    /// ∫∫ |ψ(x,0,z)|² π|x| dx dz over the sampled plane, i.e. ‖ψ‖² restricted
    /// to the sampled cylinder. With g = (rψ)² the weight π|x|/r² is singular
    /// at the origin. When the grid contains the origin, g(0) and a
    /// Gaussian-localized linear term g₁·r are integrated exactly and only the
    /// remainder goes through the trapezoid rule.
    pub fn norm(&self) -> f64 {
        let weights = |v: &[f64]| -> Vec<f64> {
            let n = v.len();
            (0..n)
                .map(|i| {
                    let left = if i > 0 { v[i] - v[i - 1] } else { 0.0 };
                    let right = if i + 1 < n { v[i + 1] - v[i] } else { 0.0 };
                    0.5 * (left + right)
                })
                .collect()
        };
        let origin = self
            .x
            .iter()
            .position(|&v| v == 0.0)
            .zip(self.z.iter().position(|&v| v == 0.0));
        let (xe, ze) = (*self.x.last().unwrap(), *self.z.last().unwrap());
        let g = |ix: usize, iz: usize| self.value(ix, iz).powi(2);
        let (g0, g1) = match origin {
            Some((ix, iz)) => {
                let g0 = g(ix, iz);
                // one-sided second-order slope along each axis
                let slope = |p1: f64, p2: f64, h: f64| (4.0 * (p1 - g0) - (p2 - g0)) / (2.0 * h);
                let mut s = Vec::new();
                if ix + 2 < self.x.len() {
                    s.push(slope(g(ix + 1, iz), g(ix + 2, iz), self.x[ix + 1]));
                }
                if iz + 2 < self.z.len() {
                    s.push(slope(g(ix, iz + 1), g(ix, iz + 2), self.z[iz + 1]));
                }
                let g1 = if s.is_empty() { 0.0 } else { s.iter().sum::<f64>() / s.len() as f64 };
                (g0, g1)
            }
            None => (0.0, 0.0),
        };
        let width2 = (xe.min(ze) / 6.0).powi(2);
        let (wx, wz) = (weights(&self.x), weights(&self.z));
        let mut sum = 0.0;
        for (iz, &zv) in self.z.iter().enumerate() {
            for (ix, &xv) in self.x.iter().enumerate() {
                let r2 = xv * xv + zv * zv;
                if xv == 0.0 || r2 == 0.0 {
                    continue;
                }
                let rest = g(ix, iz) - g0 - g1 * r2.sqrt() * (-r2 / width2).exp();
                sum += wx[ix] * wz[iz] * PI * xv.abs() * rest / r2;
            }
        }
        if origin.is_some() {
            let flat = 4.0 * PI * (xe * (ze / xe).atan() + 0.5 * ze * ((xe * xe + ze * ze) / (ze * ze)).ln());
            sum += g0 * flat + g1 * 2.0 * PI * width2;
        }
        sum
    }

    /// Columns x, z, r_psi; z is the slow index.
    pub fn write_csv(&self, mut out: impl Write) -> Result<()> {
        writeln!(out, "x,z,r_psi")?;
        for (iz, zv) in self.z.iter().enumerate() {
            for (ix, xv) in self.x.iter().enumerate() {
                writeln!(out, "{xv:.11e},{zv:.11e},{:.11e}", self.value(ix, iz))?;
            }
        }
        Ok(())
    }

    /// gnuplot matrix layout: one line per z, values across x.
    pub fn write_matrix(&self, mut out: impl Write) -> Result<()> {
        for iz in 0..self.z.len() {
            let line: Vec<String> = (0..self.x.len()).map(|ix| format!("{:.11e}", self.value(ix, iz))).collect();
            writeln!(out, "{}", line.join(" "))?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::eigensolve::{solve_spec, SolveOptions};
    use crate::specfun::legendre_p;
    use std::sync::OnceLock;

    fn solved(a: f64, aniso: f64, n: usize, l: usize, level: usize) -> Wavefunction {
        let spec = BasisSpec::new(n, l, a, aniso).unwrap();
        let e = solve_spec(&spec, level + 1, &SolveOptions::default()).unwrap();
        Wavefunction::from_eigen(&spec, &e, level).unwrap()
    }

    fn attractive() -> &'static Wavefunction {
        static W: OnceLock<Wavefunction> = OnceLock::new();
        W.get_or_init(|| solved(-1.0, 0.5, 16, 16, 1))
    }

    #[test]
    fn clenshaw_matches_direct_sum() {
        let b: Vec<f64> = (0..41).map(|l| ((l * 7 % 11) as f64 - 5.0) / (l + 1) as f64).collect();
        for u in [-1.0, -0.3, 0.0, 0.71, 1.0] {
            let direct: f64 = b.iter().enumerate().map(|(l, c)| c * legendre_p(l, u)).sum();
            assert!((legendre_series(&b, u) - direct).abs() < 1e-13);
        }
    }

    #[test]
    fn isotropic_noninteracting_ground_state() {
        let wf = solved(0.0, 1.0, 4, 4, 0);
        for (r, th) in [(0.0, 0.3), (0.4, 1.0), (1.3, 2.5), (2.2, 0.0)] {
            let exact = r * 2.0 / PI.powf(0.25) * (-0.5 * r * r as f64).exp() / (4.0 * PI).sqrt();
            assert!((wf.r_psi(r, th).unwrap() - exact).abs() < 1e-13);
        }
        let m = wf.moments().unwrap();
        assert!((m.norm - 1.0).abs() < 1e-12);
        assert!((m.r2 - 1.5).abs() < 1e-12);
        assert!((m.z2 - 0.5).abs() < 1e-12 && (m.x2 - 0.5).abs() < 1e-12);
    }

    #[test]
    fn parity_in_theta() {
        let wf = attractive();
        for (r, th) in [(0.3, 0.2), (1.1, 1.0), (2.5, 1.4)] {
            let a = wf.r_psi(r, th).unwrap();
            let b = wf.r_psi(r, PI - th).unwrap();
            assert!((a - b).abs() <= 1e-13 * a.abs().max(1e-3));
        }
    }

    #[test]
    fn finite_at_origin() {
        let wf = attractive();
        let at0 = wf.r_psi(0.0, 0.0).unwrap();
        let near = wf.r_psi(1e-7, 0.7).unwrap();
        assert!(at0.is_finite() && at0 != 0.0);
        assert!((at0 - near).abs() < 1e-5 * at0.abs());
    }

    #[test]
    fn moments_are_normalized() {
        let m = attractive().moments().unwrap();
        assert!((m.norm - 1.0).abs() < 1e-8, "{}", m.norm);
        assert!(m.z2 > 0.0 && m.x2 > 0.0);
        assert!((m.z2 + 2.0 * m.x2 - m.r2).abs() < 1e-10);
        // A < 1 is a cigar along z
        assert!(m.anisotropy_ratio() > 1.0);
    }

    #[test]
    fn rejects_mismatched_inputs() {
        let spec = BasisSpec::new(4, 4, -1.0, 0.5).unwrap();
        let other = busch::branches(-0.5, 4).unwrap();
        let c = vec![0.0; spec.dimension()];
        assert!(matches!(Wavefunction::new(spec, c.clone(), other), Err(Error::State(_))));
        let right = busch::branches(-1.0, 4).unwrap();
        assert!(matches!(Wavefunction::new(spec, c[1..].to_vec(), right), Err(Error::State(_))));
        let spec_pos = BasisSpec::new(4, 4, 1.0, 0.5).unwrap();
        let mut bs = busch::branches(1.0, 4).unwrap();
        bs.swap(0, 1);
        assert!(Wavefunction::new(spec_pos, vec![0.0; spec_pos.dimension()], bs).is_err());
    }

    #[test]
    fn grid_symmetry_norm_and_decay() {
        let wf = attractive();
        let g = export_grid(wf, 1, 7.0, 8.0, (141, 161)).unwrap();
        let (nx, nz) = (g.x.len(), g.z.len());
        for iz in (0..nz).step_by(7) {
            for ix in (0..nx).step_by(5) {
                let v = g.value(ix, iz);
                assert!(v.is_finite());
                assert_eq!(v, g.value(nx - 1 - ix, iz));
                assert_eq!(v, g.value(ix, nz - 1 - iz));
            }
        }
        assert!((g.norm() - 1.0).abs() < 1e-3, "grid norm {}", g.norm());
        let inner = g.values.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        for iz in 0..nz {
            for ix in 0..nx {
                let r2 = g.x[ix].powi(2) + g.z[iz].powi(2);
                // the floor covers the truncated-basis tail beyond r ≈ 7
                assert!(g.value(ix, iz).abs() <= inner * (20.0 * (-r2 / 4.0).exp() + 1e-3));
            }
        }
    }

    #[test]
    fn csv_and_matrix_output() {
        let wf = solved(0.0, 1.0, 2, 2, 0);
        let g = export_grid(&wf, 0, 1.0, 1.0, (3, 2)).unwrap();
        let mut csv = Vec::new();
        g.write_csv(&mut csv).unwrap();
        let text = String::from_utf8(csv).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "x,z,r_psi");
        assert_eq!(lines.len(), 7);
        assert!(lines[1].starts_with("-1.00000000000e0,-1.00000000000e0,"));
        let mut m = Vec::new();
        g.write_matrix(&mut m).unwrap();
        assert_eq!(String::from_utf8(m).unwrap().lines().count(), 2);
        assert!(export_grid(&wf, 0, 0.0, 1.0, (3, 3)).is_err());
    }
}
