//! Thick-restart Lanczos for the largest eigenvalues of a symmetric operator,
//! used in shift-invert mode: the largest θ of (H − σ)⁻¹ give λ = σ + 1/θ.
//!
//! The basis is fully reorthogonalized (two Gram–Schmidt passes), against
//! itself and against any locked vectors supplied by the caller.

use nalgebra::{DMatrix, SymmetricEigen};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy)]
pub struct LanczosOptions {
    /// Maximum basis size before a restart.
    pub max_basis: usize,
    pub max_restarts: usize,
    /// Residual bound ‖Hv − λv‖ for acceptance.
    pub tol: f64,
}

impl Default for LanczosOptions {
    fn default() -> Self {
        LanczosOptions {
            max_basis: 40,
            max_restarts: 200,
            tol: 1e-9,
        }
    }
}

#[derive(Debug, Clone)]
pub struct EigenPair {
    pub value: f64,
    pub vector: Vec<f64>,
    pub residual: f64,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// Deterministic filler vector, used for the start and after breakdowns.
pub fn filler_vector(dim: usize, seed: usize) -> Vec<f64> {
    (0..dim)
        .map(|i| {
            let t = ((i + 1) as f64 * 12.9898 + (seed + 1) as f64 * 78.233).sin() * 43_758.545_3;
            t - t.floor() - 0.5 + 0.25 * ((i as f64 + 1.0) * 0.37).sin()
        })
        .collect()
}

/// Removes components along `basis` and `locked` twice; returns the
/// coefficients against `basis` accumulated over both passes.
fn orthogonalize(w: &mut [f64], basis: &[Vec<f64>], locked: &[Vec<f64>]) -> Vec<f64> {
    let mut coef = vec![0.0; basis.len()];
    for _ in 0..2 {
        for v in locked {
            let c = dot(v, w);
            axpy(-c, v, w);
        }
        for (i, v) in basis.iter().enumerate() {
            let c = dot(v, w);
            coef[i] += c;
            axpy(-c, v, w);
        }
    }
    coef
}

/// Lowest `k` eigenpairs of H by shift-invert thick-restart Lanczos.
///
/// `solve` applies (H − σ)⁻¹, `matvec` applies H. σ should lie below the
/// wanted eigenvalues so that they are the largest of the inverted operator.
/// Vectors in `locked` (orthonormal) are projected out of the search space.
pub fn lowest_shift_invert(
    dim: usize,
    k: usize,
    sigma: f64,
    solve: &dyn Fn(&[f64]) -> Vec<f64>,
    matvec: &dyn Fn(&[f64], &mut [f64]),
    locked: &[Vec<f64>],
    start: &[f64],
    opts: &LanczosOptions,
) -> Result<Vec<EigenPair>> {
    let free = dim.saturating_sub(locked.len());
    if k == 0 {
        return Ok(Vec::new());
    }
    if k > free {
        return Err(Error::domain(format!("asked for {k} eigenpairs in a space of dimension {free}")));
    }
    let m = opts.max_basis.max(2 * k + 10).min(free);
    let mut basis: Vec<Vec<f64>> = Vec::with_capacity(m + 1);
    let mut t = DMatrix::<f64>::zeros(m + 1, m + 1);
    let mut filler_seed = 0;

    let fresh = |basis: &[Vec<f64>], seed: &mut usize, first: Option<&[f64]>| -> Result<Vec<f64>> {
        for attempt in 0..10 {
            let mut v = match (first, attempt) {
                (Some(s), 0) => s.to_vec(),
                _ => {
                    *seed += 1;
                    filler_vector(dim, *seed)
                }
            };
            let before = norm(&v);
            orthogonalize(&mut v, basis, locked);
            let nv = norm(&v);
            if nv > 1e-8 * before {
                v.iter_mut().for_each(|x| *x /= nv);
                return Ok(v);
            }
        }
        Err(Error::Numeric {
            what: "could not extend the Krylov basis".into(),
            residual: f64::NAN,
        })
    };

    basis.push(fresh(&basis, &mut filler_seed, Some(start))?);
    let mut kept = 0; // columns whose T entries are already final
    let mut worst = f64::INFINITY;
    let mut hv = vec![0.0; dim];

    for _restart in 0..=opts.max_restarts {
        // expand columns kept..m
        let mut j = kept;
        while j < m {
            let mut w = solve(&basis[j]);
            let coef = orthogonalize(&mut w, &basis, locked);
            for (i, c) in coef.iter().enumerate() {
                if i <= j {
                    t[(i, j)] = *c;
                    t[(j, i)] = *c;
                }
            }
            let beta = norm(&w);
            let scale = t[(j, j)].abs().max(1e-300);
            if beta <= 1e-13 * scale {
                // invariant subspace: continue with a fresh direction
                if basis.len() >= free {
                    j += 1;
                    break;
                }
                let v = fresh(&basis, &mut filler_seed, None)?;
                basis.push(v);
            } else {
                w.iter_mut().for_each(|x| *x /= beta);
                basis.push(w);
            }
            j += 1;
        }
        let msize = j.min(m);
        let tm = t.view((0, 0), (msize, msize)).into_owned();
        let eig = SymmetricEigen::new(tm);
        let mut order: Vec<usize> = (0..msize).collect();
        order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));

        let ritz = |idx: usize| -> Vec<f64> {
            let mut y = vec![0.0; dim];
            for (c, v) in basis.iter().take(msize).enumerate() {
                axpy(eig.eigenvectors[(c, idx)], v, &mut y);
            }
            let ny = norm(&y);
            y.iter_mut().for_each(|x| *x /= ny);
            y
        };

        let mut pairs = Vec::with_capacity(k);
        worst = 0.0f64;
        for &idx in order.iter().take(k) {
            let theta = eig.eigenvalues[idx];
            let y = ritz(idx);
            matvec(&y, &mut hv);
            let lambda = dot(&y, &hv);
            let res = hv
                .iter()
                .zip(&y)
                .map(|(h, y)| (h - lambda * y).powi(2))
                .sum::<f64>()
                .sqrt();
            worst = worst.max(res);
            if theta <= 0.0 {
                worst = f64::INFINITY;
            }
            pairs.push(EigenPair {
                value: lambda,
                vector: y,
                residual: res,
            });
        }
        if worst <= opts.tol {
            pairs.sort_by(|a, b| a.value.total_cmp(&b.value));
            return Ok(pairs);
        }
        if msize < m {
            // the whole free space is spanned; nothing more to gain
            break;
        }
        // thick restart with the best p Ritz vectors plus the residual direction
        let p = (k + (m - k) / 2).min(m - 1);
        let mut new_basis: Vec<Vec<f64>> = order.iter().take(p).map(|&idx| ritz(idx)).collect();
        let next = basis.pop().unwrap();
        t.fill(0.0);
        for (i, &idx) in order.iter().take(p).enumerate() {
            t[(i, i)] = eig.eigenvalues[idx];
        }
        // re-orthonormalize the kept vectors against rounding drift
        for i in 0..new_basis.len() {
            let (done, rest) = new_basis.split_at_mut(i);
            orthogonalize(&mut rest[0], done, locked);
            let n = norm(&rest[0]);
            rest[0].iter_mut().for_each(|x| *x /= n);
        }
        let mut f = next;
        orthogonalize(&mut f, &new_basis, locked);
        let nf = norm(&f);
        if nf > 1e-10 {
            f.iter_mut().for_each(|x| *x /= nf);
        } else {
            f = fresh(&new_basis, &mut filler_seed, None)?;
        }
        new_basis.push(f);
        basis = new_basis;
        kept = p;
    }
    Err(Error::Numeric {
        what: format!("Lanczos did not converge {k} eigenpairs (shift {sigma})"),
        residual: worst,
    })
}
