//! Symmetric sparse matrices stored as 3×3 blocks in compressed rows.

use rayon::prelude::*;

use crate::error::{Error, Result};

pub type Block = [[f64; 3]; 3];

pub const ZERO_BLOCK: Block = [[0.0; 3]; 3];

pub fn block_add(a: &Block, b: &Block) -> Block {
    std::array::from_fn(|i| std::array::from_fn(|j| a[i][j] + b[i][j]))
}

pub fn block_sub(a: &Block, b: &Block) -> Block {
    std::array::from_fn(|i| std::array::from_fn(|j| a[i][j] - b[i][j]))
}

pub fn block_transpose(a: &Block) -> Block {
    std::array::from_fn(|i| std::array::from_fn(|j| a[j][i]))
}

pub fn block_mul(a: &Block, b: &Block) -> Block {
    std::array::from_fn(|i| std::array::from_fn(|j| a[i][0] * b[0][j] + a[i][1] * b[1][j] + a[i][2] * b[2][j]))
}

/// a · bᵀ
pub fn block_mul_t(a: &Block, b: &Block) -> Block {
    std::array::from_fn(|i| std::array::from_fn(|j| a[i][0] * b[j][0] + a[i][1] * b[j][1] + a[i][2] * b[j][2]))
}

pub fn block_scale(a: &Block, s: f64) -> Block {
    a.map(|r| r.map(|v| v * s))
}

pub fn block_matvec(a: &Block, x: &[f64]) -> [f64; 3] {
    std::array::from_fn(|i| a[i][0] * x[0] + a[i][1] * x[1] + a[i][2] * x[2])
}

pub fn block_is_zero(a: &Block) -> bool {
    a.iter().flatten().all(|&v| v == 0.0)
}

/// Symmetric matrix of order 3n with both triangles stored; column indices sorted per row.
#[derive(Debug, Clone, PartialEq)]
pub struct BlockMatrix {
    n: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    blocks: Vec<Block>,
}

impl BlockMatrix {
    /// Build from (row, col, block) entries; duplicates are summed in input order.
    /// Only the given entries are stored, so callers supply both (i,j) and (j,i).
    pub fn from_entries(n: usize, mut entries: Vec<(usize, usize, Block)>) -> Result<Self> {
        if let Some(&(i, j, _)) = entries.iter().find(|(i, j, _)| *i >= n || *j >= n) {
            return Err(Error::DimensionMismatch { expected: n, got: i.max(j) + 1 });
        }
        entries.sort_by_key(|&(i, j, _)| (i, j));
        let mut row_ptr = vec![0usize; n + 1];
        let mut col_idx = Vec::with_capacity(entries.len());
        let mut blocks: Vec<Block> = Vec::with_capacity(entries.len());
        let mut last: Option<(usize, usize)> = None;
        for (i, j, b) in entries {
            if last == Some((i, j)) {
                let top = blocks.last_mut().expect("nonempty");
                *top = block_add(top, &b);
            } else {
                row_ptr[i + 1] += 1;
                col_idx.push(j);
                blocks.push(b);
                last = Some((i, j));
            }
        }
        for i in 0..n {
            row_ptr[i + 1] += row_ptr[i];
        }
        Ok(BlockMatrix { n, row_ptr, col_idx, blocks })
    }

    /// Build from the lower triangle (i ≥ j); the upper triangle is mirrored.
    pub fn from_lower(n: usize, lower: Vec<(usize, usize, Block)>) -> Result<Self> {
        let mut all = Vec::with_capacity(2 * lower.len());
        for (i, j, b) in lower {
            if i != j {
                all.push((j, i, block_transpose(&b)));
            }
            all.push((i, j, b));
        }
        Self::from_entries(n, all)
    }

    pub fn zeros(n: usize) -> Self {
        BlockMatrix {
            n,
            row_ptr: vec![0; n + 1],
            col_idx: Vec::new(),
            blocks: Vec::new(),
        }
    }

    /// Number of block rows (vertices).
    pub fn n(&self) -> usize {
        self.n
    }

    /// Scalar order 3n.
    pub fn order(&self) -> usize {
        3 * self.n
    }

    /// Stored blocks in both triangles.
    pub fn nnz_blocks(&self) -> usize {
        self.blocks.len()
    }

    /// Stored off-diagonal vertex pairs, counted once.
    pub fn n_offdiag_pairs(&self) -> usize {
        (0..self.n).map(|i| self.row_cols(i).iter().filter(|&&j| j < i).count()).sum()
    }

    pub fn row_cols(&self, i: usize) -> &[usize] {
        &self.col_idx[self.row_ptr[i]..self.row_ptr[i + 1]]
    }

    pub fn row_blocks(&self, i: usize) -> &[Block] {
        &self.blocks[self.row_ptr[i]..self.row_ptr[i + 1]]
    }

    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, &Block)> {
        self.row_cols(i).iter().copied().zip(self.row_blocks(i))
    }

    pub fn get(&self, i: usize, j: usize) -> Option<&Block> {
        let cols = self.row_cols(i);
        cols.binary_search(&j).ok().map(|k| &self.blocks[self.row_ptr[i] + k])
    }

    pub fn diag(&self, i: usize) -> Block {
        self.get(i, i).copied().unwrap_or(ZERO_BLOCK)
    }

    pub fn entry(&self, r: usize, c: usize) -> f64 {
        self.get(r / 3, c / 3).map_or(0.0, |b| b[r % 3][c % 3])
    }

    /// y = A x.
    pub fn apply(&self, x: &[f64]) -> Result<Vec<f64>> {
        let mut y = vec![0.0; self.order()];
        self.apply_into(x, &mut y)?;
        Ok(y)
    }

    pub fn apply_into(&self, x: &[f64], y: &mut [f64]) -> Result<()> {
        if x.len() != self.order() {
            return Err(Error::DimensionMismatch { expected: self.order(), got: x.len() });
        }
        if y.len() != self.order() {
            return Err(Error::DimensionMismatch { expected: self.order(), got: y.len() });
        }
        let row = |(i, yi): (usize, &mut [f64])| {
            let mut acc = [0.0; 3];
            for (j, b) in self.row(i) {
                let v = block_matvec(b, &x[3 * j..3 * j + 3]);
                acc[0] += v[0];
                acc[1] += v[1];
                acc[2] += v[2];
            }
            yi.copy_from_slice(&acc);
        };
        if self.blocks.len() > 20_000 {
            y.par_chunks_mut(3).enumerate().for_each(row);
        } else {
            y.chunks_mut(3).enumerate().for_each(row);
        }
        Ok(())
    }

    /// xᵀ A x.
    pub fn quad_form(&self, x: &[f64]) -> Result<f64> {
        let y = self.apply(x)?;
        Ok(y.iter().zip(x).map(|(a, b)| a * b).sum())
    }

    /// Principal submatrix on the listed vertices, in the listed order.
    pub fn restrict(&self, vertices: &[usize]) -> BlockMatrix {
        let mut pos = vec![usize::MAX; self.n];
        for (k, &v) in vertices.iter().enumerate() {
            pos[v] = k;
        }
        let mut entries = Vec::new();
        for (k, &v) in vertices.iter().enumerate() {
            for (j, b) in self.row(v) {
                if pos[j] != usize::MAX {
                    entries.push((k, pos[j], *b));
                }
            }
        }
        BlockMatrix::from_entries(vertices.len(), entries).expect("indices in range")
    }

    /// Symmetric permutation: vertex `v` moves to `perm[v]`.
    pub fn permute(&self, perm: &[usize]) -> BlockMatrix {
        let mut entries = Vec::with_capacity(self.blocks.len());
        for i in 0..self.n {
            for (j, b) in self.row(i) {
                entries.push((perm[i], perm[j], *b));
            }
        }
        BlockMatrix::from_entries(self.n, entries).expect("indices in range")
    }

    /// Dense row-major copy of order 3n.
    pub fn to_dense(&self) -> Vec<f64> {
        let m = self.order();
        let mut d = vec![0.0; m * m];
        for i in 0..self.n {
            for (j, b) in self.row(i) {
                for r in 0..3 {
                    for c in 0..3 {
                        d[(3 * i + r) * m + 3 * j + c] = b[r][c];
                    }
                }
            }
        }
        d
    }

    /// Largest absolute entry.
    pub fn max_abs(&self) -> f64 {
        self.blocks.iter().flatten().flatten().fold(0.0f64, |m, v| m.max(v.abs()))
    }

    /// Largest diagonal scalar entry.
    pub fn max_diag(&self) -> f64 {
        (0..self.n)
            .map(|i| {
                let d = self.diag(i);
                d[0][0].max(d[1][1]).max(d[2][2])
            })
            .fold(0.0f64, f64::max)
    }

    /// Max |A - Aᵀ| over stored blocks.
    pub fn asymmetry(&self) -> f64 {
        let mut worst = 0.0f64;
        for i in 0..self.n {
            for (j, b) in self.row(i) {
                let t = self.get(j, i).map(block_transpose).unwrap_or(ZERO_BLOCK);
                for r in 0..3 {
                    for c in 0..3 {
                        worst = worst.max((b[r][c] - t[r][c]).abs());
                    }
                }
            }
        }
        worst
    }

    /// Vertex adjacency (off-diagonal stored pairs), sorted.
    pub fn adjacency(&self) -> Vec<Vec<usize>> {
        (0..self.n)
            .map(|i| self.row_cols(i).iter().copied().filter(|&j| j != i).collect())
            .collect()
    }

    /// Scalar nonzeros in the lower triangle (including diagonal).
    pub fn lower_nonzeros(&self) -> Vec<(usize, usize, f64)> {
        let mut out = Vec::new();
        for i in 0..self.n {
            for (j, b) in self.row(i) {
                if j > i {
                    continue;
                }
                for r in 0..3 {
                    for c in 0..3 {
                        let (gr, gc) = (3 * i + r, 3 * j + c);
                        if gc <= gr && b[r][c] != 0.0 {
                            out.push((gr, gc, b[r][c]));
                        }
                    }
                }
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn eye() -> Block {
        [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]]
    }

    #[test]
    fn duplicates_are_summed() {
        let m = BlockMatrix::from_entries(2, vec![(0, 0, eye()), (0, 0, eye()), (1, 1, eye())]).unwrap();
        assert_eq!(m.nnz_blocks(), 2);
        assert_eq!(m.diag(0)[0][0], 2.0);
    }

    #[test]
    fn apply_matches_dense() {
        let b: Block = [[1.0, 2.0, 3.0], [4.0, 5.0, 6.0], [7.0, 8.0, 9.0]];
        let m = BlockMatrix::from_lower(2, vec![(0, 0, eye()), (1, 0, b), (1, 1, eye())]).unwrap();
        let x: Vec<f64> = (0..6).map(|v| v as f64 + 1.0).collect();
        let y = m.apply(&x).unwrap();
        let d = m.to_dense();
        for r in 0..6 {
            let expect: f64 = (0..6).map(|c| d[r * 6 + c] * x[c]).sum();
            assert_eq!(y[r], expect);
        }
        assert_eq!(m.asymmetry(), 0.0);
        assert_eq!(m.entry(0, 3), 1.0);
        assert_eq!(m.entry(3, 0), 1.0);
        assert_eq!(m.entry(4, 0), 4.0);
    }

    #[test]
    fn dimension_mismatch() {
        let m = BlockMatrix::zeros(2);
        assert!(matches!(m.apply(&[0.0; 5]), Err(Error::DimensionMismatch { expected: 6, got: 5 })));
    }

    #[test]
    fn restrict_and_permute() {
        let m = BlockMatrix::from_lower(
            3,
            vec![(0, 0, eye()), (1, 1, block_scale(&eye(), 2.0)), (2, 2, block_scale(&eye(), 3.0)), (2, 0, eye())],
        )
        .unwrap();
        let r = m.restrict(&[2, 0]);
        assert_eq!(r.diag(0)[0][0], 3.0);
        assert_eq!(r.get(0, 1), Some(&eye()));
        let p = m.permute(&[2, 0, 1]);
        assert_eq!(p.diag(0)[0][0], 2.0);
        assert_eq!(p.diag(1)[0][0], 3.0);
        assert_eq!(p.get(1, 2), Some(&eye()));
    }
}
