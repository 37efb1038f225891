//! Block LDLᵀ factorization of H − σI for block-tridiagonal symmetric H.
//!
//! The Schur complements S_j = D_j − σI − B_j S_{j−1}⁻¹ B_jᵀ are factored
//! densely without pivoting. Sylvester's law of inertia turns the signs of
//! the pivots into the number of eigenvalues below σ.

use std::ops::Range;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::hamiltonian::SparseHamiltonian;

/// Relative size under which a pivot counts as a breakdown.
const PIVOT_TOL: f64 = 1e-12;

#[derive(Debug, Clone)]
struct BlockFactor {
    range: Range<usize>,
    /// Unit lower triangular factor of the Schur complement.
    l: DMatrix<f64>,
    d: DVector<f64>,
    /// Coupling to the previous block, B_j[i, k] with local indices.
    coupling: Vec<(usize, usize, f64)>,
}

#[derive(Debug, Clone)]
pub struct BlockLdl {
    pub sigma: f64,
    blocks: Vec<BlockFactor>,
    negative_pivots: usize,
}

/// Panel width of the blocked kernels.
const PANEL: usize = 64;

/// In-place unpivoted LDLᵀ of a symmetric matrix (lower triangle used);
/// returns (L, d). Right-looking with panel updates done as matrix products.
fn ldl_dense(mut a: DMatrix<f64>, scale: f64) -> Result<(DMatrix<f64>, DVector<f64>)> {
    let n = a.nrows();
    let mut d = DVector::zeros(n);
    let mut k0 = 0;
    while k0 < n {
        let k1 = (k0 + PANEL).min(n);
        for k in k0..k1 {
            let dk = a[(k, k)];
            if !dk.is_finite() || dk.abs() <= PIVOT_TOL * scale {
                return Err(Error::Numeric {
                    what: format!("LDLᵀ pivot breakdown at local index {k}"),
                    residual: dk.abs(),
                });
            }
            d[k] = dk;
            for i in k + 1..n {
                a[(i, k)] /= dk;
            }
            for j in k + 1..k1 {
                let ljk = a[(j, k)] * dk;
                if ljk == 0.0 {
                    continue;
                }
                for i in j..n {
                    let lik = a[(i, k)];
                    a[(i, j)] -= lik * ljk;
                }
            }
        }
        if k1 < n {
            let m = n - k1;
            let w = k1 - k0;
            let l21 = a.view((k1, k0), (m, w)).into_owned();
            let mut ld = l21.clone();
            for c in 0..w {
                ld.column_mut(c).scale_mut(d[k0 + c]);
            }
            // lower trapezoid of A22 −= L21 D L21ᵀ, one column panel at a time
            let mut j0 = 0;
            while j0 < m {
                let j1 = (j0 + PANEL).min(m);
                let rows = m - j0;
                let lhs = l21.view((j0, 0), (rows, w));
                let rhs = ld.view((j0, 0), (j1 - j0, w));
                a.view_mut((k1 + j0, k1 + j0), (rows, j1 - j0))
                    .gemm(-1.0, &lhs, &rhs.transpose(), 1.0);
                j0 = j1;
            }
        }
        k0 = k1;
    }
    for j in 0..n {
        a[(j, j)] = 1.0;
        for i in 0..j {
            a[(i, j)] = 0.0;
        }
    }
    Ok((a, d))
}

/// Y ← L⁻¹ Y for unit lower triangular L, blocked by panels.
fn forward_unit_lower(l: &DMatrix<f64>, y: &mut DMatrix<f64>) {
    let m = l.nrows();
    let ncols = y.ncols();
    let mut k0 = 0;
    while k0 < m {
        let k1 = (k0 + PANEL).min(m);
        for col in 0..ncols {
            for k in k0..k1 {
                let yk = y[(k, col)];
                if yk != 0.0 {
                    for i in k + 1..k1 {
                        y[(i, col)] -= l[(i, k)] * yk;
                    }
                }
            }
        }
        if k1 < m {
            let top = y.view((k0, 0), (k1 - k0, ncols)).into_owned();
            y.view_mut((k1, 0), (m - k1, ncols))
                .gemm(-1.0, &l.view((k1, k0), (m - k1, k1 - k0)), &top, 1.0);
        }
        k0 = k1;
    }
}

impl BlockFactor {
    /// x ← S⁻¹ x
    fn solve_in_place(&self, x: &mut DVector<f64>) {
        let n = x.len();
        for j in 0..n {
            let xj = x[j];
            if xj != 0.0 {
                for i in j + 1..n {
                    x[i] -= self.l[(i, j)] * xj;
                }
            }
        }
        for i in 0..n {
            x[i] /= self.d[i];
        }
        for j in (0..n).rev() {
            let mut s = x[j];
            for i in j + 1..n {
                s -= self.l[(i, j)] * x[i];
            }
            x[j] = s;
        }
    }
}

impl BlockLdl {
    /// Factors H − σI using the l-block structure of `h`.
    pub fn factor(h: &SparseHamiltonian, sigma: f64) -> Result<Self> {
        Self::factor_with_blocks(h, &h.block_ranges(), sigma)
    }

    pub fn factor_with_blocks(h: &SparseHamiltonian, ranges: &[Range<usize>], sigma: f64) -> Result<Self> {
        let scale = h
            .upper
            .iter()
            .fold(sigma.abs(), |m, &(_, _, v)| m.max(v.abs()))
            .max(1.0);
        let mut blocks: Vec<BlockFactor> = Vec::with_capacity(ranges.len());
        let mut negative = 0;
        for (j, range) in ranges.iter().enumerate() {
            let n = range.len();
            let mut s = DMatrix::zeros(n, n);
            let mut coupling = Vec::new();
            for i in range.clone() {
                for (c, v) in h.row(i) {
                    if range.contains(&c) {
                        s[(i - range.start, c - range.start)] = v;
                    } else if j > 0 && ranges[j - 1].contains(&c) {
                        coupling.push((i - range.start, c - ranges[j - 1].start, v));
                    } else if !(j + 1 < ranges.len() && ranges[j + 1].contains(&c)) {
                        return Err(Error::State(format!(
                            "entry ({i}, {c}) lies outside the block-tridiagonal pattern"
                        )));
                    }
                }
            }
            for i in 0..n {
                s[(i, i)] -= sigma;
            }
            if j > 0 && !coupling.is_empty() {
                let prev = &blocks[j - 1];
                let m = prev.range.len();
                // Y = L⁻¹ Bᵀ (m × n), then S -= Yᵀ D⁻¹ Y
                let mut bt = DMatrix::zeros(m, n);
                for &(r, c, v) in &coupling {
                    bt[(c, r)] = v;
                }
                forward_unit_lower(&prev.l, &mut bt);
                let mut z = bt.clone();
                for k in 0..m {
                    let inv = 1.0 / prev.d[k];
                    for col in 0..n {
                        z[(k, col)] *= inv;
                    }
                }
                s.gemm_tr(-1.0, &bt, &z, 1.0);
                // restore exact symmetry lost to rounding in the product
                for c in 0..n {
                    for r in c + 1..n {
                        let avg = 0.5 * (s[(r, c)] + s[(c, r)]);
                        s[(r, c)] = avg;
                        s[(c, r)] = avg;
                    }
                }
            }
            let (l, d) = ldl_dense(s, scale)?;
            negative += d.iter().filter(|&&v| v < 0.0).count();
            blocks.push(BlockFactor {
                range: range.clone(),
                l,
                d,
                coupling,
            });
        }
        Ok(BlockLdl {
            sigma,
            blocks,
            negative_pivots: negative,
        })
    }

    /// Number of eigenvalues of H strictly below σ.
    pub fn count_below(&self) -> usize {
        self.negative_pivots
    }

    /// Solves (H − σI) x = b.
    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let nb = self.blocks.len();
        let mut z: Vec<DVector<f64>> = Vec::with_capacity(nb);
        // forward: y_j = b_j − B_j S_{j−1}⁻¹ y_{j−1}; keep w_j = S_j⁻¹ y_j
        for (j, blk) in self.blocks.iter().enumerate() {
            let mut y = DVector::from_column_slice(&b[blk.range.clone()]);
            if j > 0 {
                let w = &z[j - 1];
                for &(r, c, v) in &blk.coupling {
                    y[r] -= v * w[c];
                }
            }
            blk.solve_in_place(&mut y);
            z.push(y);
        }
        // backward: x_j = w_j − S_j⁻¹ B_{j+1}ᵀ x_{j+1}
        let mut x = vec![0.0; b.len()];
        for j in (0..nb).rev() {
            let blk = &self.blocks[j];
            let mut xj = z[j].clone();
            if j + 1 < nb {
                let next = &self.blocks[j + 1];
                let mut t = DVector::zeros(blk.range.len());
                for &(r, c, v) in &next.coupling {
                    t[c] += v * x[next.range.start + r];
                }
                if t.iter().any(|&v| v != 0.0) {
                    blk.solve_in_place(&mut t);
                    xj -= t;
                }
            }
            x[blk.range.clone()].copy_from_slice(xj.as_slice());
        }
        x
    }
}
