//! Lowest eigenpairs of the assembled Hamiltonian, truncation control,
//! spectrum tables and the Λ² fit of the trap-induced bound state.

use std::io::Write;

use nalgebra::SymmetricEigen;
use rayon::prelude::*;

use crate::blocktri::BlockLdl;
use crate::error::{Error, Result};
use crate::hamiltonian::{self, BasisSpec, SparseHamiltonian};
use crate::lanczos::{self, LanczosOptions};
use crate::trapgeom;

#[derive(Debug, Clone, Copy)]
pub struct SolveOptions {
    /// Residual bound ‖Hv − λv‖ in ħω.
    pub tol: f64,
    /// Dimensions up to this size are diagonalized densely.
    pub dense_max: usize,
    pub lanczos: LanczosOptions,
}

impl Default for SolveOptions {
    fn default() -> Self {
        SolveOptions {
            tol: 1e-9,
            dense_max: 600,
            lanczos: LanczosOptions::default(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct Eigen {
    pub values: Vec<f64>,
    pub vectors: Vec<Vec<f64>>,
    pub residuals: Vec<f64>,
}

/// Flips the sign so the largest-magnitude component (first on ties) is positive.
fn fix_sign(v: &mut [f64]) {
    let mut best = 0usize;
    for (i, x) in v.iter().enumerate() {
        if x.abs() > v[best].abs() {
            best = i;
        }
    }
    if v.get(best).is_some_and(|&x| x < 0.0) {
        v.iter_mut().for_each(|x| *x = -*x);
    }
}

fn residual(h: &SparseHamiltonian, lambda: f64, v: &[f64]) -> f64 {
    let mut hv = vec![0.0; v.len()];
    h.matvec(v, &mut hv);
    hv.iter()
        .zip(v)
        .map(|(a, b)| (a - lambda * b).powi(2))
        .sum::<f64>()
        .sqrt()
}

fn finish(h: &SparseHamiltonian, mut pairs: Vec<(f64, Vec<f64>)>) -> Eigen {
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut out = Eigen {
        values: Vec::with_capacity(pairs.len()),
        vectors: Vec::with_capacity(pairs.len()),
        residuals: Vec::with_capacity(pairs.len()),
    };
    for (val, mut vec) in pairs {
        fix_sign(&mut vec);
        out.residuals.push(residual(h, val, &vec));
        out.values.push(val);
        out.vectors.push(vec);
    }
    out
}

fn lowest_diagonal(h: &SparseHamiltonian, k: usize) -> Eigen {
    let diag = h.diagonal();
    let mut idx: Vec<usize> = (0..h.dim).collect();
    idx.sort_by(|&a, &b| diag[a].total_cmp(&diag[b]).then(a.cmp(&b)));
    let pairs = idx
        .into_iter()
        .take(k)
        .map(|i| {
            let mut v = vec![0.0; h.dim];
            v[i] = 1.0;
            (diag[i], v)
        })
        .collect();
    finish(h, pairs)
}

fn lowest_dense(h: &SparseHamiltonian, k: usize) -> Eigen {
    let eig = SymmetricEigen::new(h.to_dense());
    let mut idx: Vec<usize> = (0..h.dim).collect();
    idx.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let pairs = idx
        .into_iter()
        .take(k)
        .map(|i| (eig.eigenvalues[i], eig.eigenvectors.column(i).iter().copied().collect()))
        .collect();
    finish(h, pairs)
}

/// Factors H − σ, nudging σ downward if a pivot breaks down.
fn factor_near(h: &SparseHamiltonian, sigma: f64, scale: f64) -> Result<BlockLdl> {
    let mut s = sigma;
    let mut last = None;
    for attempt in 0..8 {
        match BlockLdl::factor(h, s) {
            Ok(f) => return Ok(f),
            Err(e @ Error::Numeric { .. }) => {
                last = Some(e);
                s -= 1e-7 * scale * (1 << attempt) as f64;
            }
            Err(e) => return Err(e),
        }
    }
    Err(last.unwrap())
}

/// Finds a shift with no eigenvalue below it.
fn lower_shift(h: &SparseHamiltonian, scale: f64) -> Result<BlockLdl> {
    let dmin = h.diagonal().into_iter().fold(f64::INFINITY, f64::min);
    let mut step = 0.5;
    let mut sigma = dmin - step;
    for _ in 0..60 {
        let f = factor_near(h, sigma, scale)?;
        if f.count_below() == 0 {
            return Ok(f);
        }
        step *= 2.0;
        sigma = dmin - step;
    }
    Err(Error::Numeric {
        what: "no lower bound for the spectrum found".into(),
        residual: f64::NAN,
    })
}

fn lowest_iterative(h: &SparseHamiltonian, k: usize, opts: &SolveOptions) -> Result<Eigen> {
    let scale = h.upper.iter().fold(1.0f64, |m, e| m.max(e.2.abs()));
    let mut lopts = opts.lanczos;
    lopts.tol = opts.tol;
    let matvec = |x: &[f64], y: &mut [f64]| h.matvec(x, y);
    let want = (k + 1).min(h.dim);

    // first pass with a shift below the spectrum, then move the shift up to
    // just below the lowest Ritz value for faster convergence
    let f0 = lower_shift(h, scale)?;
    let solve0 = |b: &[f64]| f0.solve(b);
    let start = lanczos::filler_vector(h.dim, 0);
    let probe = lanczos::lowest_shift_invert(
        h.dim,
        1,
        f0.sigma,
        &solve0,
        &matvec,
        &[],
        &start,
        &LanczosOptions {
            tol: 1e-6 * scale,
            ..lopts
        },
    )?;
    let lambda1 = probe[0].value;
    let mut f = f0;
    let gap = lambda1 - f.sigma;
    let candidate = lambda1 - 0.05 * gap.max(1e-3);
    if candidate > f.sigma {
        if let Ok(g) = factor_near(h, candidate, scale) {
            if g.count_below() == 0 {
                f = g;
            }
        }
    }
    let solve = |b: &[f64]| f.solve(b);
    let mut pairs: Vec<lanczos::EigenPair> =
        lanczos::lowest_shift_invert(h.dim, want, f.sigma, &solve, &matvec, &[], &probe[0].vector, &lopts)?;

    // inertia check: exactly k eigenvalues must lie below the midpoint between
    // the k-th and (k+1)-th values; otherwise some were skipped (degeneracy)
    for round in 0..10 {
        pairs.sort_by(|a, b| a.value.total_cmp(&b.value));
        if pairs.len() <= k {
            break;
        }
        let top = 0.5 * (pairs[k - 1].value + pairs[k].value);
        let count = factor_near(h, top, scale)?.count_below();
        if count == k {
            break;
        }
        if count < k {
            return Err(Error::Numeric {
                what: format!("inertia count {count} below {top} is smaller than the {k} values found"),
                residual: f64::NAN,
            });
        }
        let missing = count - k;
        let locked: Vec<Vec<f64>> = pairs.iter().map(|p| p.vector.clone()).collect();
        let extra = lanczos::lowest_shift_invert(
            h.dim,
            missing,
            f.sigma,
            &solve,
            &matvec,
            &locked,
            &lanczos::filler_vector(h.dim, round + 1),
            &lopts,
        )?;
        pairs.extend(extra);
        if round == 9 {
            return Err(Error::Numeric {
                what: "inertia check kept finding missing eigenvalues".into(),
                residual: f64::NAN,
            });
        }
    }
    pairs.sort_by(|a, b| a.value.total_cmp(&b.value));
    pairs.truncate(k);
    Ok(finish(h, pairs.into_iter().map(|p| (p.value, p.vector)).collect()))
}

/// The k lowest eigenpairs, ascending, with fixed sign convention.
pub fn lowest_k(h: &SparseHamiltonian, k: usize, opts: &SolveOptions) -> Result<Eigen> {
    if k == 0 || k > h.dim {
        return Err(Error::domain(format!("cannot extract {k} eigenpairs of a {}-dimensional matrix", h.dim)));
    }
    let eig = if h.is_diagonal() {
        lowest_diagonal(h, k)
    } else if h.dim <= opts.dense_max || 2 * k >= h.dim {
        lowest_dense(h, k)
    } else {
        lowest_iterative(h, k, opts)?
    };
    let worst = eig.residuals.iter().fold(0.0f64, |m, &r| m.max(r));
    let scale = h.upper.iter().fold(1.0f64, |m, e| m.max(e.2.abs()));
    // dense results are exact up to rounding of the largest entries
    let bound = opts.tol.max(1e-12 * scale * (h.dim as f64).sqrt());
    if worst > bound {
        return Err(Error::Numeric {
            what: format!("eigenpair residual above tolerance {}", opts.tol),
            residual: worst,
        });
    }
    Ok(eig)
}

/// Builds H at (A, a/d) for the given truncation and solves it.
pub fn solve_spec(spec: &BasisSpec, k: usize, opts: &SolveOptions) -> Result<Eigen> {
    let h = hamiltonian::build(spec)?;
    lowest_k(&h, k, opts)
}

#[derive(Debug, Clone, Copy)]
pub struct ConvergeOptions {
    pub tol_e: f64,
    pub start: (usize, usize),
    pub max_dimension: usize,
    pub solve: SolveOptions,
}

impl Default for ConvergeOptions {
    fn default() -> Self {
        ConvergeOptions {
            tol_e: 1e-4,
            start: (8, 16),
            max_dimension: 200_000,
            solve: SolveOptions::default(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct Converged {
    pub spec: BasisSpec,
    pub eigen: Eigen,
    /// Largest eigenvalue change seen when doubling n_max or l_max once more.
    pub last_change: f64,
}

fn max_change(a: &Eigen, b: &Eigen) -> f64 {
    a.values.iter().zip(&b.values).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

/// Refines the truncation until doubling n_max and doubling l_max each change
/// none of the k lowest eigenvalues by more than `tol_e`. While not converged
/// the direction with the larger change is doubled.
pub fn converge(anisotropy: f64, a_over_d: f64, k: usize, opts: &ConvergeOptions) -> Result<Converged> {
    let (n_max, mut l_max) = opts.start;
    l_max += l_max % 2;
    let mut spec = BasisSpec::new(n_max, l_max, a_over_d, anisotropy)?;
    let over_budget = |best: f64| Error::Resource {
        what: format!(
            "truncation did not converge to {} within dimension {} (A = {anisotropy}, a/d = {a_over_d})",
            opts.tol_e, opts.max_dimension
        ),
        best,
    };
    if spec.dimension() > opts.max_dimension {
        return Err(over_budget(f64::INFINITY));
    }
    let mut eigen = solve_spec(&spec, k, &opts.solve)?;
    let mut best = f64::INFINITY;
    loop {
        let more_n = BasisSpec::new((2 * spec.n_max).max(1), spec.l_max, a_over_d, anisotropy)?;
        let more_l = BasisSpec::new(spec.n_max, (2 * spec.l_max).max(2), a_over_d, anisotropy)?;
        if more_n.dimension() > opts.max_dimension || more_l.dimension() > opts.max_dimension {
            return Err(over_budget(best));
        }
        let en = solve_spec(&more_n, k, &opts.solve)?;
        let el = solve_spec(&more_l, k, &opts.solve)?;
        let (dn, dl) = (max_change(&en, &eigen), max_change(&el, &eigen));
        let change = dn.max(dl);
        best = best.min(change);
        if change < opts.tol_e {
            return Ok(Converged {
                spec,
                eigen,
                last_change: change,
            });
        }
        if dn >= dl {
            spec = more_n;
            eigen = en;
        } else {
            spec = more_l;
            eigen = el;
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub enum TruncationPolicy {
    Fixed { n_max: usize, l_max: usize },
    Auto(ConvergeOptions),
}

#[derive(Debug, Clone)]
pub struct SpectrumRow {
    pub param: f64,
    pub energies: Vec<f64>,
    pub n_max: usize,
    pub l_max: usize,
    pub max_residual: f64,
    /// Eigenvector coefficients when requested, in basis order.
    pub vectors: Option<Vec<Vec<f64>>>,
}

#[derive(Debug, Clone)]
pub struct SpectrumTable {
    /// Column name of the scanned parameter: a_over_d, A or B_mT.
    pub param_name: String,
    pub k: usize,
    pub rows: Vec<SpectrumRow>,
}

impl SpectrumTable {
    /// CSV with header `param,E_1..E_k,n_max,l_max`, 12 significant digits.
    pub fn write_csv(&self, mut out: impl Write) -> Result<()> {
        let mut header = vec![self.param_name.clone()];
        header.extend((1..=self.k).map(|i| format!("E_{i}")));
        header.push("n_max".into());
        header.push("l_max".into());
        writeln!(out, "{}", header.join(","))?;
        for row in &self.rows {
            let mut fields = vec![format!("{:.11e}", row.param)];
            fields.extend(row.energies.iter().map(|e| format!("{e:.11e}")));
            fields.push(row.n_max.to_string());
            fields.push(row.l_max.to_string());
            writeln!(out, "{}", fields.join(","))?;
        }
        Ok(())
    }

    pub fn column(&self, i: usize) -> Vec<f64> {
        self.rows.iter().map(|r| r.energies[i]).collect()
    }
}

/// Solves one (A, a/d) point under the truncation policy.
pub fn solve_point(
    anisotropy: f64,
    a_over_d: f64,
    k: usize,
    policy: &TruncationPolicy,
    solve: &SolveOptions,
) -> Result<(BasisSpec, Eigen)> {
    match policy {
        TruncationPolicy::Fixed { n_max, l_max } => {
            let spec = BasisSpec::new(*n_max, *l_max, a_over_d, anisotropy)?;
            Ok((spec, solve_spec(&spec, k, solve)?))
        }
        TruncationPolicy::Auto(c) => {
            let r = converge(anisotropy, a_over_d, k, c)?;
            Ok((r.spec, r.eigen))
        }
    }
}

fn to_row(param: f64, spec: &BasisSpec, e: Eigen, keep_vectors: bool) -> SpectrumRow {
    SpectrumRow {
        param,
        n_max: spec.n_max,
        l_max: spec.l_max,
        max_residual: e.residuals.iter().fold(0.0, |m: f64, &r| m.max(r)),
        energies: e.values,
        vectors: keep_vectors.then_some(e.vectors),
    }
}

/// Lowest k levels over a grid of a/d at fixed A; grid points run in parallel
/// and rows come back in grid order.
pub fn spectrum_vs_a(
    anisotropy: f64,
    a_grid: &[f64],
    k: usize,
    policy: &TruncationPolicy,
    solve: &SolveOptions,
    keep_vectors: bool,
) -> Result<SpectrumTable> {
    let rows: Result<Vec<SpectrumRow>> = a_grid
        .par_iter()
        .map(|&a| {
            let (spec, e) = solve_point(anisotropy, a, k, policy, solve)?;
            Ok(to_row(a, &spec, e, keep_vectors))
        })
        .collect();
    Ok(SpectrumTable {
        param_name: "a_over_d".into(),
        k,
        rows: rows?,
    })
}

/// Lowest k levels over a grid of A at fixed a/d.
pub fn spectrum_vs_anisotropy(
    a_over_d: f64,
    aniso_grid: &[f64],
    k: usize,
    policy: &TruncationPolicy,
    solve: &SolveOptions,
) -> Result<SpectrumTable> {
    let rows: Result<Vec<SpectrumRow>> = aniso_grid
        .par_iter()
        .map(|&an| {
            let (spec, e) = solve_point(an, a_over_d, k, policy, solve)?;
            Ok(to_row(an, &spec, e, false))
        })
        .collect();
    Ok(SpectrumTable {
        param_name: "A".into(),
        k,
        rows: rows?,
    })
}

#[derive(Debug, Clone)]
pub struct BoundStateFit {
    pub c0: f64,
    pub c2: f64,
    pub max_residual: f64,
    /// (A, Λ, lowest energy) per grid point.
    pub points: Vec<(f64, f64, f64)>,
}

/// Least-squares fit E₀ = c0 + c2·Λ² of the lowest level over an A grid.
pub fn bound_state_fit(
    a_over_d: f64,
    aniso_grid: &[f64],
    policy: &TruncationPolicy,
    solve: &SolveOptions,
) -> Result<BoundStateFit> {
    let lam2: Vec<f64> = aniso_grid.iter().map(|&a| trapgeom::lambda(a).powi(2)).collect();
    let first = lam2.first().copied().unwrap_or(0.0);
    if lam2.len() < 2 || lam2.iter().all(|&x| (x - first).abs() < 1e-14) {
        return Err(Error::domain("bound_state_fit needs at least two distinct Λ² values"));
    }
    let table = spectrum_vs_anisotropy(a_over_d, aniso_grid, 1, policy, solve)?;
    let e: Vec<f64> = table.column(0);
    fit_quadratic_in_lambda(aniso_grid, &lam2, &e)
}

fn fit_quadratic_in_lambda(aniso: &[f64], lam2: &[f64], e: &[f64]) -> Result<BoundStateFit> {
    let n = lam2.len() as f64;
    let mx = lam2.iter().sum::<f64>() / n;
    let my = e.iter().sum::<f64>() / n;
    let sxx: f64 = lam2.iter().map(|x| (x - mx).powi(2)).sum();
    let sxy: f64 = lam2.iter().zip(e).map(|(x, y)| (x - mx) * (y - my)).sum();
    let c2 = sxy / sxx;
    let c0 = my - c2 * mx;
    let max_residual = lam2
        .iter()
        .zip(e)
        .map(|(x, y)| (y - c0 - c2 * x).abs())
        .fold(0.0, f64::max);
    let points = aniso
        .iter()
        .zip(e)
        .map(|(&a, &y)| (a, trapgeom::lambda(a), y))
        .collect();
    Ok(BoundStateFit {
        c0,
        c2,
        max_residual,
        points,
    })
}
