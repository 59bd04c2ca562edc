//! Sparse block elimination: Cholesky factors under an ordering, partial
//! elimination onto a boundary set, and triangular solves.

use std::collections::HashMap;

use serde::Serialize;

use crate::dissect::{pivot_flops, symbolic_prefix, EliminationOrdering, Graph};
use crate::error::{Error, Result};
use crate::sparse::{block_is_zero, block_mul_t, block_sub, block_transpose, Block, BlockMatrix, ZERO_BLOCK};
use crate::stiffness::{orthonormalize, project_out_in_place};

/// Pivots at or below this fraction of the largest diagonal entry are zeroed.
pub const PIV_EPS: f64 = 1e-10;

/// Counters of one block elimination.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct ElimStats {
    pub pivots: usize,
    pub fill_edges: usize,
    pub factor_blocks: usize,
    pub flops: u64,
}

/// Lower factor columns for the first `n_elim` positions of an order.
#[derive(Debug, Clone)]
struct Columns {
    order: Vec<usize>,
    n_elim: usize,
    /// Lower-triangular diagonal blocks L_jj.
    diag: Vec<Block>,
    /// (row position, L_ij) for rows below j.
    cols: Vec<Vec<(usize, Block)>>,
    /// Scalar positions 3j+c whose pivot was zeroed.
    zero_pivots: Vec<usize>,
    stats: ElimStats,
}

/// Right-looking block elimination of the first `n_elim` positions of
/// `order`. Returns the factor columns and the updated trailing block
/// (lower triangle, keyed by trailing positions).
fn eliminate(
    a: &BlockMatrix,
    order: &[usize],
    n_elim: usize,
    tol: f64,
    allow_zero: bool,
) -> Result<(Columns, HashMap<(usize, usize), Block>)> {
    let n = a.n();
    let m = order.len();
    let mut pos = vec![usize::MAX; n];
    for (k, &v) in order.iter().enumerate() {
        if v >= n {
            return Err(Error::InvalidVertex { index: v, n });
        }
        if pos[v] != usize::MAX {
            return Err(Error::Format(format!("vertex {v} ordered twice")));
        }
        pos[v] = k;
    }
    let graph = Graph::from_edges(n, (0..n).flat_map(|i| a.row_cols(i).iter().map(move |&j| (i, j))))?;
    let sym = symbolic_prefix(&graph, order, n_elim);

    let mut diag: Vec<Block> = order.iter().map(|&v| a.diag(v)).collect();
    let mut cols: Vec<Vec<(usize, Block)>> = sym.columns[..n_elim]
        .iter()
        .map(|c| c.iter().map(|&p| (p, ZERO_BLOCK)).collect())
        .collect();
    let mut trailing: HashMap<(usize, usize), Block> = HashMap::new();
    for (j, &v) in order.iter().enumerate() {
        for (w, blk) in a.row(v) {
            let p = pos[w];
            if p == usize::MAX || p <= j {
                continue;
            }
            if j < n_elim {
                let k = cols[j].binary_search_by_key(&p, |e| e.0).expect("symbolic pattern");
                cols[j][k].1 = block_transpose(blk);
            } else {
                trailing.insert((p, j), block_transpose(blk));
            }
        }
    }

    let mut zero_pivots = Vec::new();
    let mut flops = 0;
    for j in 0..n_elim {
        let l_jj = pivot_cholesky(&diag[j], tol, allow_zero, 3 * order[j], &mut |c| zero_pivots.push(3 * j + c))?;
        diag[j] = l_jj;
        let mut col = std::mem::take(&mut cols[j]);
        for (_, blk) in &mut col {
            *blk = right_solve_lt(blk, &l_jj);
        }
        for (ia, &(pa, ref la)) in col.iter().enumerate() {
            for &(pb, ref lb) in &col[ia..] {
                let upd = block_mul_t(lb, la);
                if pa == pb {
                    diag[pa] = block_sub(&diag[pa], &upd);
                } else if pa < n_elim {
                    let k = cols[pa].binary_search_by_key(&pb, |e| e.0).expect("fill within pattern");
                    cols[pa][k].1 = block_sub(&cols[pa][k].1, &upd);
                } else {
                    let e = trailing.entry((pb, pa)).or_insert(ZERO_BLOCK);
                    *e = block_sub(e, &upd);
                }
            }
        }
        flops += pivot_flops(col.len());
        cols[j] = col;
    }
    for p in n_elim..m {
        trailing.insert((p, p), diag[p]);
    }
    let stats = ElimStats {
        pivots: n_elim,
        fill_edges: sym.fill_edges,
        factor_blocks: n_elim + cols.iter().map(Vec::len).sum::<usize>(),
        flops,
    };
    debug_assert_eq!(stats.flops, sym.flops);
    Ok((
        Columns {
            order: order.to_vec(),
            n_elim,
            diag: diag.into_iter().take(n_elim).collect(),
            cols,
            zero_pivots,
            stats,
        },
        trailing,
    ))
}

/// Scalar Cholesky of a 3×3 pivot block. Pivots in [−tol, tol] are zeroed
/// (their column of L is set to zero) when allowed.
fn pivot_cholesky(p: &Block, tol: f64, allow_zero: bool, dof0: usize, on_zero: &mut dyn FnMut(usize)) -> Result<Block> {
    let mut l = ZERO_BLOCK;
    for c in 0..3 {
        let d = p[c][c] - (0..c).map(|k| l[c][k] * l[c][k]).sum::<f64>();
        if d > tol {
            let s = d.sqrt();
            l[c][c] = s;
            for r in c + 1..3 {
                l[r][c] = (p[r][c] - (0..c).map(|k| l[r][k] * l[c][k]).sum::<f64>()) / s;
            }
        } else if d >= -tol && allow_zero {
            on_zero(c);
        } else if d >= -tol {
            return Err(Error::SingularInterior(dof0 / 3));
        } else {
            return Err(Error::NotPsd { dof: dof0 + c, pivot: d });
        }
    }
    Ok(l)
}

/// X with X Lᵀ = S for lower-triangular L; zero pivots give zero columns.
fn right_solve_lt(s: &Block, l: &Block) -> Block {
    let mut x = ZERO_BLOCK;
    for r in 0..3 {
        for c in 0..3 {
            if l[c][c] != 0.0 {
                x[r][c] = (s[r][c] - (0..c).map(|k| x[r][k] * l[c][k]).sum::<f64>()) / l[c][c];
            }
        }
    }
    x
}

/// Solve L z = y in place; zero pivots give zero components.
fn lower_solve(l: &Block, y: &mut [f64]) {
    for c in 0..3 {
        y[c] = if l[c][c] != 0.0 {
            (y[c] - (0..c).map(|k| l[c][k] * y[k]).sum::<f64>()) / l[c][c]
        } else {
            0.0
        };
    }
}

/// Solve Lᵀ x = y in place; zero pivots give zero components.
fn upper_solve(l: &Block, y: &mut [f64]) {
    for c in (0..3).rev() {
        y[c] = if l[c][c] != 0.0 {
            (y[c] - (c + 1..3).map(|k| l[k][c] * y[k]).sum::<f64>()) / l[c][c]
        } else {
            0.0
        };
    }
}

impl Columns {
    /// Forward substitution over the eliminated columns of a position-indexed vector.
    fn forward(&self, y: &mut [f64]) {
        for j in 0..self.n_elim {
            let (head, tail) = y.split_at_mut(3 * j + 3);
            let yj = &mut head[3 * j..];
            lower_solve(&self.diag[j], yj);
            for (p, l) in &self.cols[j] {
                let yi = &mut tail[3 * (p - j - 1)..3 * (p - j - 1) + 3];
                for r in 0..3 {
                    yi[r] -= l[r][0] * yj[0] + l[r][1] * yj[1] + l[r][2] * yj[2];
                }
            }
        }
    }

    /// Back substitution over the eliminated columns; trailing entries of `y`
    /// are read as known values.
    fn backward(&self, y: &mut [f64]) {
        for j in (0..self.n_elim).rev() {
            let mut t = [y[3 * j], y[3 * j + 1], y[3 * j + 2]];
            for (p, l) in &self.cols[j] {
                let x = &y[3 * p..3 * p + 3];
                for c in 0..3 {
                    t[c] -= l[0][c] * x[0] + l[1][c] * x[1] + l[2][c] * x[2];
                }
            }
            upper_solve(&self.diag[j], &mut t);
            y[3 * j..3 * j + 3].copy_from_slice(&t);
        }
    }

    fn gather(&self, b: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; 3 * self.order.len()];
        for (j, &v) in self.order.iter().enumerate() {
            y[3 * j..3 * j + 3].copy_from_slice(&b[3 * v..3 * v + 3]);
        }
        y
    }
}

/// Cholesky factor A = P L Lᵀ Pᵀ with zeroed pivots for rank-deficient A.
#[derive(Debug, Clone)]
pub struct SparseFactor {
    n: usize,
    cols: Columns,
    null_basis: Vec<Vec<f64>>,
    pivot_tol: f64,
}

/// Factor a symmetric PSD block matrix under `ordering`, which must order
/// every vertex of `a` exactly once.
pub fn factor(a: &BlockMatrix, ordering: &EliminationOrdering, piv_eps: f64) -> Result<SparseFactor> {
    let n = a.n();
    if ordering.len() != n {
        return Err(Error::DimensionMismatch { expected: n, got: ordering.len() });
    }
    let tol = piv_eps * a.max_diag().max(f64::MIN_POSITIVE);
    let (cols, _) = eliminate(a, ordering.order(), n, tol, true)?;
    let null_basis = null_from_factor(&cols, n);
    Ok(SparseFactor { n, cols, null_basis, pivot_tol: tol })
}

/// Null vectors of L Lᵀ: one per zeroed pivot, by back substitution with
/// that pivot's component set to one.
fn null_from_factor(cols: &Columns, n: usize) -> Vec<Vec<f64>> {
    let m = cols.order.len();
    let raw: Vec<Vec<f64>> = cols
        .zero_pivots
        .iter()
        .map(|&seed| {
            let mut z = vec![0.0; 3 * m];
            for j in (0..m).rev() {
                let l = &cols.diag[j];
                let mut t = [0.0; 3];
                for (p, lij) in &cols.cols[j] {
                    let x = &z[3 * p..3 * p + 3];
                    for c in 0..3 {
                        t[c] -= lij[0][c] * x[0] + lij[1][c] * x[1] + lij[2][c] * x[2];
                    }
                }
                for c in (0..3).rev() {
                    let k = 3 * j + c;
                    z[k] = if k == seed {
                        1.0
                    } else if l[c][c] == 0.0 {
                        0.0
                    } else {
                        (t[c] - (c + 1..3).map(|r| l[r][c] * z[3 * j + r]).sum::<f64>()) / l[c][c]
                    };
                }
            }
            let mut x = vec![0.0; 3 * n];
            for (j, &v) in cols.order.iter().enumerate() {
                x[3 * v..3 * v + 3].copy_from_slice(&z[3 * j..3 * j + 3]);
            }
            x
        })
        .collect();
    orthonormalize(&raw, 1e-12)
}

impl SparseFactor {
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn order(&self) -> &[usize] {
        &self.cols.order
    }

    /// Zeroed pivots as dof indices of the original matrix.
    pub fn zero_pivots(&self) -> Vec<usize> {
        self.cols.zero_pivots.iter().map(|&k| 3 * self.cols.order[k / 3] + k % 3).collect()
    }

    /// Orthonormal basis of the factored matrix's null space.
    pub fn null_basis(&self) -> &[Vec<f64>] {
        &self.null_basis
    }

    pub fn pivot_tol(&self) -> f64 {
        self.pivot_tol
    }

    pub fn stats(&self) -> ElimStats {
        self.cols.stats
    }

    /// Solve A x = Π b with Π the projector onto range(A); x ⟂ null(A).
    pub fn solve(&self, b: &[f64]) -> Result<Vec<f64>> {
        if b.len() != 3 * self.n {
            return Err(Error::DimensionMismatch { expected: 3 * self.n, got: b.len() });
        }
        let mut pb = b.to_vec();
        project_out_in_place(&mut pb, &self.null_basis)?;
        let mut y = self.cols.gather(&pb);
        self.cols.forward(&mut y);
        self.cols.backward(&mut y);
        let mut x = vec![0.0; b.len()];
        for (j, &v) in self.cols.order.iter().enumerate() {
            x[3 * v..3 * v + 3].copy_from_slice(&y[3 * j..3 * j + 3]);
        }
        project_out_in_place(&mut x, &self.null_basis)?;
        Ok(x)
    }

    /// P L Lᵀ Pᵀ as a dense row-major matrix (for checks on small problems).
    pub fn reconstruct_dense(&self) -> Vec<f64> {
        let m = self.cols.order.len();
        let d = 3 * m;
        let mut l = vec![0.0; d * d];
        for j in 0..m {
            for r in 0..3 {
                for c in 0..3 {
                    l[(3 * j + r) * d + 3 * j + c] = self.cols.diag[j][r][c];
                }
            }
            for (p, blk) in &self.cols.cols[j] {
                for r in 0..3 {
                    for c in 0..3 {
                        l[(3 * p + r) * d + 3 * j + c] = blk[r][c];
                    }
                }
            }
        }
        let dof = |k: usize| 3 * self.cols.order[k / 3] + k % 3;
        let mut out = vec![0.0; d * d];
        for i in 0..d {
            for k in 0..=i {
                let s: f64 = (0..=k).map(|c| l[i * d + c] * l[k * d + c]).sum();
                out[dof(i) * d + dof(k)] = s;
                out[dof(k) * d + dof(i)] = s;
            }
        }
        out
    }
}

pub fn solve_factor(factor: &SparseFactor, b: &[f64]) -> Result<Vec<f64>> {
    factor.solve(b)
}

/// Interior vertices S eliminated from A, leaving the Schur complement on the
/// remaining vertices T.
#[derive(Debug, Clone)]
pub struct PartialElimination {
    n: usize,
    cols: Columns,
    /// Vertices of T, in the index order of `schur`.
    boundary: Vec<usize>,
    schur: BlockMatrix,
}

/// Eliminate the vertices of `interior_order` (a permutation of S) from `a`.
/// The interior block must be positive definite.
pub fn eliminate_subset(a: &BlockMatrix, interior_order: &[usize], piv_eps: f64) -> Result<PartialElimination> {
    let n = a.n();
    let mut in_s = vec![false; n];
    for &v in interior_order {
        if v >= n {
            return Err(Error::InvalidVertex { index: v, n });
        }
        in_s[v] = true;
    }
    let boundary: Vec<usize> = (0..n).filter(|&v| !in_s[v]).collect();
    let mut order = interior_order.to_vec();
    order.extend_from_slice(&boundary);
    let s = interior_order.len();
    let tol = piv_eps * a.max_diag().max(f64::MIN_POSITIVE);
    let (cols, trailing) = eliminate(a, &order, s, tol, false)?;
    let lower: Vec<(usize, usize, Block)> = trailing
        .into_iter()
        .filter(|((p, q), b)| p == q || !block_is_zero(b))
        .map(|((p, q), b)| (p - s, q - s, b))
        .collect();
    let schur = BlockMatrix::from_lower(boundary.len(), lower)?;
    Ok(PartialElimination { n, cols, boundary, schur })
}

impl PartialElimination {
    /// Schur complement on T, indexed like `boundary()`.
    pub fn schur(&self) -> &BlockMatrix {
        &self.schur
    }

    pub fn boundary(&self) -> &[usize] {
        &self.boundary
    }

    pub fn interior(&self) -> &[usize] {
        &self.cols.order[..self.cols.n_elim]
    }

    pub fn stats(&self) -> ElimStats {
        self.cols.stats
    }

    /// Right-hand side of the reduced system: f_T − A_TS A_SS⁻¹ f_S, indexed like `boundary()`.
    pub fn reduce_rhs(&self, f: &[f64]) -> Result<Vec<f64>> {
        if f.len() != 3 * self.n {
            return Err(Error::DimensionMismatch { expected: 3 * self.n, got: f.len() });
        }
        let mut y = self.cols.gather(f);
        self.cols.forward(&mut y);
        Ok(y.split_off(3 * self.cols.n_elim))
    }

    /// Full solution from the boundary values: x_S = A_SS⁻¹ (f_S − A_ST x_T).
    pub fn back_substitute(&self, f: &[f64], x_boundary: &[f64]) -> Result<Vec<f64>> {
        let s = self.cols.n_elim;
        if f.len() != 3 * self.n || x_boundary.len() != 3 * self.boundary.len() {
            return Err(Error::DimensionMismatch {
                expected: 3 * self.boundary.len(),
                got: x_boundary.len(),
            });
        }
        let mut y = self.cols.gather(f);
        self.cols.forward(&mut y);
        y[3 * s..].copy_from_slice(x_boundary);
        self.cols.backward(&mut y);
        let mut x = vec![0.0; f.len()];
        for (j, &v) in self.cols.order.iter().enumerate() {
            x[3 * v..3 * v + 3].copy_from_slice(&y[3 * j..3 * j + 3]);
        }
        Ok(x)
    }
}
