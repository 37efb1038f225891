//! Hamiltonian of the relative motion in the truncated basis of isotropic
//! s-wave solutions (l = 0) and oscillator functions (even l > 0), m = 0.
//!
//! In trap units the anisotropic part of the trap is Λ r² P₂(cos θ), giving
//! H⁽¹⁾[nl; n'l'] = Λ · I_{ll'} · ⟨nl|r²|n'l'⟩ with l' ∈ {l, l ± 2}.

use std::io::Write;

use crate::busch::{self, Branch, SWaveBranch};
use crate::error::{Error, Result};
use crate::specfun::{gamma_ratio, tan_pi};
use crate::trapgeom;

/// Upper limit on the basis dimension unless the caller sets another budget.
pub const DEFAULT_MAX_DIMENSION: usize = 4_000_000;

/// Truncated basis: trap branches / radial quanta n = 0..=n_max for every
/// even l = 0..=l_max, with the s-wave bound branch added when a > 0.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BasisSpec {
    pub n_max: usize,
    pub l_max: usize,
    pub a_over_d: f64,
    pub anisotropy: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct BasisState {
    pub l: usize,
    /// For l > 0 always `Trap(n)`, meaning the oscillator function R_{nl}.
    pub branch: Branch,
}

impl BasisSpec {
    pub fn new(n_max: usize, l_max: usize, a_over_d: f64, anisotropy: f64) -> Result<Self> {
        if l_max % 2 != 0 {
            return Err(Error::domain(format!("l_max must be even, got {l_max}")));
        }
        if !(anisotropy > 0.0) || !anisotropy.is_finite() {
            return Err(Error::domain(format!("anisotropy must be positive, got {anisotropy}")));
        }
        if !a_over_d.is_finite() {
            return Err(Error::domain(format!("a/d must be finite, got {a_over_d}")));
        }
        Ok(BasisSpec {
            n_max,
            l_max,
            a_over_d,
            anisotropy,
        })
    }

    pub fn lambda(&self) -> f64 {
        trapgeom::lambda(self.anisotropy)
    }

    pub fn has_bound_state(&self) -> bool {
        self.a_over_d > 0.0
    }

    pub fn swave_size(&self) -> usize {
        self.n_max + 1 + usize::from(self.has_bound_state())
    }

    pub fn block_count(&self) -> usize {
        self.l_max / 2 + 1
    }

    /// Index range of the block with angular momentum l = 2j.
    pub fn block_range(&self, j: usize) -> std::ops::Range<usize> {
        let s = self.swave_size();
        let w = self.n_max + 1;
        if j == 0 {
            0..s
        } else {
            let start = s + (j - 1) * w;
            start..start + w
        }
    }

    pub fn dimension(&self) -> usize {
        self.swave_size() + (self.block_count() - 1) * (self.n_max + 1)
    }

    /// Flat index of a state (l-major, then bound branch, then n ascending).
    pub fn index_of(&self, state: BasisState) -> Option<usize> {
        if state.l % 2 != 0 || state.l > self.l_max {
            return None;
        }
        let range = self.block_range(state.l / 2);
        match state.branch {
            Branch::Bound if state.l == 0 && self.has_bound_state() => Some(0),
            Branch::Bound => None,
            Branch::Trap(n) if n <= self.n_max => {
                let offset = usize::from(state.l == 0 && self.has_bound_state());
                Some(range.start + offset + n)
            }
            Branch::Trap(_) => None,
        }
    }

    pub fn state_at(&self, index: usize) -> Option<BasisState> {
        if index >= self.dimension() {
            return None;
        }
        let s = self.swave_size();
        if index < s {
            let branch = if self.has_bound_state() {
                if index == 0 {
                    Branch::Bound
                } else {
                    Branch::Trap(index - 1)
                }
            } else {
                Branch::Trap(index)
            };
            return Some(BasisState { l: 0, branch });
        }
        let w = self.n_max + 1;
        let j = (index - s) / w + 1;
        Some(BasisState {
            l: 2 * j,
            branch: Branch::Trap((index - s) % w),
        })
    }

    pub fn states(&self) -> Vec<BasisState> {
        (0..self.dimension()).map(|i| self.state_at(i).unwrap()).collect()
    }
}

/// Angular integral I_{ll'} = √(4π/5) ∫ Y_{l0} Y_{20} Y_{l'0} dΩ for even l, l'.
///
/// I_ll = l(l+1)/((2l−1)(2l+3)), I_{l,l+2} = 3(l+1)(l+2)/(2(2l+3)√((2l+1)(2l+5))).
pub fn angular_i(l: usize, l_prime: usize) -> f64 {
    let (lo, hi) = if l <= l_prime { (l, l_prime) } else { (l_prime, l) };
    let x = lo as f64;
    if lo == hi {
        if lo == 0 {
            0.0
        } else {
            x * (x + 1.0) / ((2.0 * x - 1.0) * (2.0 * x + 3.0))
        }
    } else if hi == lo + 2 {
        3.0 * (x + 1.0) * (x + 2.0) / (2.0 * (2.0 * x + 3.0) * ((2.0 * x + 1.0) * (2.0 * x + 5.0)).sqrt())
    } else {
        0.0
    }
}

/// ⟨n l|r²|n' l'⟩ between oscillator functions, any even l, l' (l = 0 allowed).
pub(crate) fn regular_r2(n: usize, l: usize, np: usize, lp: usize) -> f64 {
    if lp + 2 == l {
        return regular_r2(np, lp, n, l);
    }
    let (nf, lf) = (n as f64, l as f64);
    if lp == l {
        if np == n {
            2.0 * nf + lf + 1.5
        } else if np + 1 == n || n + 1 == np {
            let m = n.min(np) as f64;
            -0.5 * (2.0 * (m + 1.0) * (2.0 * m + 2.0 * lf + 3.0)).sqrt()
        } else {
            0.0
        }
    } else if lp == l + 2 {
        if n == np {
            0.5 * ((2.0 * nf + 2.0 * lf + 3.0) * (2.0 * nf + 2.0 * lf + 5.0)).sqrt()
        } else if n == np + 1 {
            let m = np as f64;
            -(2.0 * (m + 1.0) * (2.0 * m + 2.0 * lf + 5.0)).sqrt()
        } else if n == np + 2 {
            let m = np as f64;
            ((m + 1.0) * (m + 2.0)).sqrt()
        } else {
            0.0
        }
    } else {
        0.0
    }
}

/// ⟨n l|r²|n' l'⟩ for oscillator functions with l, l' > 0.
pub fn radial_r2(n: usize, l: usize, n_prime: usize, l_prime: usize) -> Result<f64> {
    if l == 0 || l_prime == 0 {
        return Err(Error::domain(
            "radial_r2 covers l, l' > 0; s-wave rows use swave_coupling",
        ));
    }
    if l % 2 != 0 || l_prime % 2 != 0 {
        return Err(Error::domain(format!("odd l in radial_r2 ({l}, {l_prime})")));
    }
    Ok(regular_r2(n, l, n_prime, l_prime))
}

/// tan(πδ)/δ, continuous through δ = 0.
fn tan_over(delta: f64) -> f64 {
    if delta.abs() < 1e-8 {
        let p = std::f64::consts::PI * delta;
        std::f64::consts::PI * (1.0 + p * p / 3.0)
    } else {
        tan_pi(delta) / delta
    }
}

/// ⟨Q_b|r²|n', 2⟩ between an s-wave branch function and R_{n'2}.
///
/// Closed form: −√(2Γ(n'+7/2)/(πΓ(n'+1))) · a√(dν/da) · 2/(x(x+1)(x+2)),
/// x = n' − ν. The factor a/(x+m) closest to 0/0 is rewritten as
/// −½ Γ(ν+1)/Γ(ν+3/2) · tan(π(ν−n'−m))/(ν−n'−m), finite at a = 0.
pub fn swave_coupling(branch: &SWaveBranch, n_prime: usize) -> f64 {
    let nu = branch.nu;
    let a = branch.a_over_d;
    let np = n_prime as f64;
    let x = np - nu;
    let pref = (2.0 * gamma_ratio(np + 3.5, np + 1.0).unwrap() / std::f64::consts::PI).sqrt();
    let core = if nu > -0.5 {
        let m = (0..3).min_by(|&i, &j| {
            (x + i as f64).abs().total_cmp(&(x + j as f64).abs())
        }).unwrap();
        let r = gamma_ratio(nu + 1.0, nu + 1.5).unwrap();
        let a_over = -0.5 * r * tan_over(nu - np - m as f64);
        let rest: f64 = (0..3).filter(|&j| j != m).map(|j| x + j as f64).product();
        a_over * 2.0 / rest
    } else {
        a * 2.0 / (x * (x + 1.0) * (x + 2.0))
    };
    -pref * branch.dnu_da.sqrt() * core
}

/// Real symmetric sparse matrix in ħω, stored as the upper triangle plus a
/// full CSR copy for products.
#[derive(Debug, Clone)]
pub struct SparseHamiltonian {
    pub spec: BasisSpec,
    pub dim: usize,
    /// Upper-triangle entries (row ≤ col), sorted by (row, col).
    pub upper: Vec<(usize, usize, f64)>,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    values: Vec<f64>,
}

impl SparseHamiltonian {
    fn from_upper(spec: BasisSpec, dim: usize, mut upper: Vec<(usize, usize, f64)>) -> Self {
        upper.sort_by(|a, b| (a.0, a.1).cmp(&(b.0, b.1)));
        let mut rows: Vec<Vec<(usize, f64)>> = vec![Vec::new(); dim];
        for &(i, j, v) in &upper {
            rows[i].push((j, v));
            if i != j {
                rows[j].push((i, v));
            }
        }
        let mut row_ptr = Vec::with_capacity(dim + 1);
        let mut col_idx = Vec::new();
        let mut values = Vec::new();
        row_ptr.push(0);
        for mut row in rows {
            row.sort_by_key(|e| e.0);
            for (j, v) in row {
                col_idx.push(j);
                values.push(v);
            }
            row_ptr.push(col_idx.len());
        }
        SparseHamiltonian {
            spec,
            dim,
            upper,
            row_ptr,
            col_idx,
            values,
        }
    }

    /// Builds a matrix directly from upper-triangle triplets (used for tests and
    /// generic solver input). Duplicate entries are summed.
    pub fn from_triplets(dim: usize, entries: &[(usize, usize, f64)]) -> Self {
        let mut map = std::collections::BTreeMap::new();
        for &(i, j, v) in entries {
            let key = if i <= j { (i, j) } else { (j, i) };
            *map.entry(key).or_insert(0.0) += v;
        }
        let upper = map.into_iter().map(|((i, j), v)| (i, j, v)).collect();
        let spec = BasisSpec {
            n_max: 0,
            l_max: 0,
            a_over_d: 0.0,
            anisotropy: 1.0,
        };
        Self::from_upper(spec, dim, upper)
    }

    /// y = H x
    pub fn matvec(&self, x: &[f64], y: &mut [f64]) {
        for i in 0..self.dim {
            let mut s = 0.0;
            for k in self.row_ptr[i]..self.row_ptr[i + 1] {
                s += self.values[k] * x[self.col_idx[k]];
            }
            y[i] = s;
        }
    }

    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        (self.row_ptr[i]..self.row_ptr[i + 1]).map(move |k| (self.col_idx[k], self.values[k]))
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let cols = &self.col_idx[self.row_ptr[i]..self.row_ptr[i + 1]];
        match cols.binary_search(&j) {
            Ok(k) => self.values[self.row_ptr[i] + k],
            Err(_) => 0.0,
        }
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.dim).map(|i| self.get(i, i)).collect()
    }

    /// Index ranges of the l blocks (a single block for matrices built from triplets).
    pub fn block_ranges(&self) -> Vec<std::ops::Range<usize>> {
        if self.spec.dimension() == self.dim && self.spec.n_max > 0 {
            (0..self.spec.block_count()).map(|j| self.spec.block_range(j)).collect()
        } else {
            vec![0..self.dim]
        }
    }

    pub fn is_diagonal(&self) -> bool {
        self.upper.iter().all(|&(i, j, v)| i == j || v == 0.0)
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn to_dense(&self) -> nalgebra::DMatrix<f64> {
        let mut m = nalgebra::DMatrix::zeros(self.dim, self.dim);
        for &(i, j, v) in &self.upper {
            m[(i, j)] = v;
            m[(j, i)] = v;
        }
        m
    }

    /// Writes the upper triangle as `row col value` lines, 17 significant digits.
    pub fn dump(&self, mut out: impl Write) -> Result<()> {
        writeln!(out, "# dim {}", self.dim)?;
        for &(i, j, v) in &self.upper {
            writeln!(out, "{i} {j} {v:.16e}")?;
        }
        Ok(())
    }
}

/// Assembles H for `spec` from pre-solved s-wave branches.
pub fn assemble(spec: &BasisSpec, branches: &[SWaveBranch]) -> Result<SparseHamiltonian> {
    assemble_with_budget(spec, branches, DEFAULT_MAX_DIMENSION)
}

pub fn assemble_with_budget(
    spec: &BasisSpec,
    branches: &[SWaveBranch],
    max_dimension: usize,
) -> Result<SparseHamiltonian> {
    let dim = spec.dimension();
    if dim > max_dimension {
        return Err(Error::Resource {
            what: format!("basis dimension {dim} exceeds budget {max_dimension}"),
            best: f64::NAN,
        });
    }
    if branches.len() != spec.swave_size() {
        return Err(Error::State(format!(
            "expected {} s-wave branches, got {}",
            spec.swave_size(),
            branches.len()
        )));
    }
    for (i, b) in branches.iter().enumerate() {
        let want = spec.state_at(i).unwrap().branch;
        if b.a_over_d != spec.a_over_d || b.branch != want {
            return Err(Error::State(format!(
                "branch {i} is {:?} at a/d = {}, basis expects {want:?} at a/d = {}",
                b.branch, b.a_over_d, spec.a_over_d
            )));
        }
    }
    let lam = spec.lambda();
    let w = spec.n_max + 1;
    let mut upper = Vec::new();
    // s-wave block: diagonal only since I₀₀ = 0
    for (i, b) in branches.iter().enumerate() {
        upper.push((i, i, b.energy()));
    }
    if lam != 0.0 && spec.l_max >= 2 {
        let i02 = angular_i(0, 2);
        let d = spec.block_range(1).start;
        for (i, b) in branches.iter().enumerate() {
            for np in 0..w {
                upper.push((i, d + np, lam * i02 * swave_coupling(b, np)));
            }
        }
    }
    for j in 1..spec.block_count() {
        let l = 2 * j;
        let start = spec.block_range(j).start;
        let ill = angular_i(l, l);
        for n in 0..w {
            let h0 = (2 * n + l) as f64 + 1.5;
            upper.push((start + n, start + n, h0 + lam * ill * regular_r2(n, l, n, l)));
            if lam != 0.0 && n + 1 < w {
                upper.push((start + n, start + n + 1, lam * ill * regular_r2(n, l, n + 1, l)));
            }
        }
        if lam != 0.0 && j + 1 < spec.block_count() {
            let next = spec.block_range(j + 1).start;
            let ilu = angular_i(l, l + 2);
            for n in 0..w {
                for np in n.saturating_sub(2)..=n {
                    upper.push((start + n, next + np, lam * ilu * regular_r2(n, l, np, l + 2)));
                }
            }
        }
    }
    Ok(SparseHamiltonian::from_upper(*spec, dim, upper))
}

/// Solves the s-wave branches and assembles H in one step.
pub fn build(spec: &BasisSpec) -> Result<SparseHamiltonian> {
    let bs = busch::branches(spec.a_over_d, spec.n_max)?;
    assemble(spec, &bs)
}
