//! Element-block sparse matrices. Each block couples the `N · nloc` dofs of one
//! element (rows) with those of another (columns); inside a block the local
//! index is `i · nloc + a` (species-major). Vectors use the global
//! species-major layout of [`crate::dgspace::CoeffVec`].

use std::collections::BTreeSet;
use std::sync::Arc;

use nalgebra::DMatrix;
use nalgebra_sparse::CsrMatrix;

/// Block sparsity pattern with sorted column lists.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BlockPattern {
    nel: usize,
    row_ptr: Vec<usize>,
    cols: Vec<usize>,
}

impl BlockPattern {
    /// Pattern from a list of coupled element pairs. Diagonal blocks are always present.
    pub fn from_pairs(nel: usize, pairs: impl IntoIterator<Item = (usize, usize)>) -> BlockPattern {
        let mut rows: Vec<BTreeSet<usize>> = (0..nel).map(|e| BTreeSet::from([e])).collect();
        for (r, c) in pairs {
            rows[r].insert(c);
        }
        let mut row_ptr = vec![0];
        let mut cols = Vec::new();
        for r in rows {
            cols.extend(r);
            row_ptr.push(cols.len());
        }
        BlockPattern { nel, row_ptr, cols }
    }

    /// Element pairs coupled by a scalar matrix acting on element-major dofs.
    pub fn pairs_of_scalar(a: &CsrMatrix<f64>, nloc: usize) -> Vec<(usize, usize)> {
        a.triplet_iter()
            .map(|(r, c, _)| (r / nloc, c / nloc))
            .collect()
    }

    pub fn num_elements(&self) -> usize {
        self.nel
    }

    pub fn row(&self, r: usize) -> &[usize] {
        &self.cols[self.row_ptr[r]..self.row_ptr[r + 1]]
    }

    pub fn num_blocks(&self) -> usize {
        self.cols.len()
    }

    pub fn find(&self, r: usize, c: usize) -> Option<usize> {
        let lo = self.row_ptr[r];
        self.row(r).binary_search(&c).ok().map(|k| lo + k)
    }

    /// Largest `|r - c|` over stored blocks.
    pub fn block_bandwidth(&self) -> usize {
        (0..self.nel)
            .flat_map(|r| self.row(r).iter().map(move |&c| r.abs_diff(c)))
            .max()
            .unwrap_or(0)
    }
}

#[derive(Clone, Debug)]
pub struct BlockSparse {
    pattern: Arc<BlockPattern>,
    species: usize,
    nloc: usize,
    values: Vec<f64>,
}

impl BlockSparse {
    pub fn zeros(pattern: Arc<BlockPattern>, species: usize, nloc: usize) -> BlockSparse {
        let bs = species * nloc;
        let values = vec![0.0; pattern.num_blocks() * bs * bs];
        BlockSparse {
            pattern,
            species,
            nloc,
            values,
        }
    }

    pub fn pattern(&self) -> &Arc<BlockPattern> {
        &self.pattern
    }

    pub fn block_size(&self) -> usize {
        self.species * self.nloc
    }

    pub fn species(&self) -> usize {
        self.species
    }

    pub fn nloc(&self) -> usize {
        self.nloc
    }

    pub fn dim(&self) -> usize {
        self.pattern.nel * self.block_size()
    }

    pub fn clear(&mut self) {
        self.values.iter_mut().for_each(|v| *v = 0.0);
    }

    /// Row-major block storage for the block `(r, c)`.
    pub fn block(&self, r: usize, c: usize) -> Option<&[f64]> {
        let bs2 = self.block_size().pow(2);
        self.pattern
            .find(r, c)
            .map(|k| &self.values[k * bs2..(k + 1) * bs2])
    }

    pub fn block_mut(&mut self, r: usize, c: usize) -> &mut [f64] {
        let bs2 = self.block_size().pow(2);
        let k = self
            .pattern
            .find(r, c)
            .unwrap_or_else(|| panic!("block ({r}, {c}) is not in the sparsity pattern"));
        &mut self.values[k * bs2..(k + 1) * bs2]
    }

    /// Raw block storage, indexed by the pattern's block numbering.
    pub fn blocks_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    /// `self += alpha · other` for matrices sharing one pattern and block size.
    pub fn axpy(&mut self, alpha: f64, other: &BlockSparse) {
        assert!(
            Arc::ptr_eq(&self.pattern, &other.pattern) && self.values.len() == other.values.len(),
            "block matrices differ in structure"
        );
        for (v, o) in self.values.iter_mut().zip(&other.values) {
            *v += alpha * o;
        }
    }

    /// Add `alpha · A` to every species-diagonal block, where `A` is a scalar
    /// matrix on element-major dofs (`e · nloc + a`).
    pub fn add_scalar(&mut self, a: &CsrMatrix<f64>, alpha: f64) {
        let (n, bs) = (self.nloc, self.block_size());
        for (r, c, v) in a.triplet_iter() {
            let (er, ar) = (r / n, r % n);
            let (ec, ac) = (c / n, c % n);
            let species = self.species;
            let blk = self.block_mut(er, ec);
            for i in 0..species {
                blk[(i * n + ar) * bs + i * n + ac] += alpha * v;
            }
        }
    }

    /// `y = A x` for species-major vectors.
    pub fn matvec(&self, x: &[f64], y: &mut [f64]) {
        let (n, bs) = (self.nloc, self.block_size());
        let sl = self.pattern.nel * n;
        y.iter_mut().for_each(|v| *v = 0.0);
        for r in 0..self.pattern.nel {
            for k in self.pattern.row_ptr[r]..self.pattern.row_ptr[r + 1] {
                let c = self.pattern.cols[k];
                let blk = &self.values[k * bs * bs..(k + 1) * bs * bs];
                for li in 0..bs {
                    let gi = (li / n) * sl + r * n + li % n;
                    let row = &blk[li * bs..(li + 1) * bs];
                    let mut acc = 0.0;
                    for (lj, v) in row.iter().enumerate() {
                        acc += v * x[(lj / n) * sl + c * n + lj % n];
                    }
                    y[gi] += acc;
                }
            }
        }
    }

    /// Maximum absolute column sum.
    pub fn norm1(&self) -> f64 {
        let bs = self.block_size();
        let mut colsum = vec![0.0; self.dim()];
        for r in 0..self.pattern.nel {
            for k in self.pattern.row_ptr[r]..self.pattern.row_ptr[r + 1] {
                let c = self.pattern.cols[k];
                let blk = &self.values[k * bs * bs..(k + 1) * bs * bs];
                for li in 0..bs {
                    for lj in 0..bs {
                        colsum[c * bs + lj] += blk[li * bs + lj].abs();
                    }
                }
            }
        }
        colsum.into_iter().fold(0.0, f64::max)
    }

    /// Dense copy in the species-major global ordering.
    pub fn to_dense(&self) -> DMatrix<f64> {
        let (n, bs) = (self.nloc, self.block_size());
        let sl = self.pattern.nel * n;
        let mut d = DMatrix::zeros(self.dim(), self.dim());
        for r in 0..self.pattern.nel {
            for k in self.pattern.row_ptr[r]..self.pattern.row_ptr[r + 1] {
                let c = self.pattern.cols[k];
                let blk = &self.values[k * bs * bs..(k + 1) * bs * bs];
                for li in 0..bs {
                    for lj in 0..bs {
                        d[(
                            (li / n) * sl + r * n + li % n,
                            (lj / n) * sl + c * n + lj % n,
                        )] += blk[li * bs + lj];
                    }
                }
            }
        }
        d
    }

    /// Map from species-major global index to element-interleaved index `e · bs + i · nloc + a`.
    pub fn interleave_index(&self, g: usize) -> usize {
        let n = self.nloc;
        let sl = self.pattern.nel * n;
        let (i, rem) = (g / sl, g % sl);
        let (e, a) = (rem / n, rem % n);
        e * self.block_size() + i * n + a
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::sparse::from_triplets;

    #[test]
    fn matvec_matches_dense() {
        let pat = Arc::new(BlockPattern::from_pairs(3, [(0, 1), (1, 0), (2, 0)]));
        let mut a = BlockSparse::zeros(pat, 2, 2);
        let mut v = 0.3;
        for (r, c) in [(0, 0), (0, 1), (1, 0), (1, 1), (2, 0), (2, 2)] {
            for x in a.block_mut(r, c) {
                v = (v * 7.13f64).fract();
                *x = v - 0.5;
            }
        }
        let x: Vec<f64> = (0..12).map(|k| (k as f64 * 0.37).sin()).collect();
        let mut y = vec![0.0; 12];
        a.matvec(&x, &mut y);
        let yd = a.to_dense() * nalgebra::DVector::from_column_slice(&x);
        for k in 0..12 {
            assert!((y[k] - yd[k]).abs() < 1e-14);
        }
        assert_eq!(a.pattern().block_bandwidth(), 2);
    }

    #[test]
    fn scalar_kronecker() {
        // (I_N ⊗ A) applied per species equals A applied to each block.
        let s = from_triplets(4, 4, &[(0, 0, 2.0), (1, 3, -1.0), (3, 2, 0.5), (2, 1, 4.0)]);
        let pat = Arc::new(BlockPattern::from_pairs(
            2,
            BlockPattern::pairs_of_scalar(&s, 2),
        ));
        let mut a = BlockSparse::zeros(pat, 2, 2);
        a.add_scalar(&s, 1.0);
        let x: Vec<f64> = (0..8).map(|k| k as f64 - 3.0).collect();
        let mut y = vec![0.0; 8];
        a.matvec(&x, &mut y);
        for i in 0..2 {
            let mut yi = vec![0.0; 4];
            crate::linalg::sparse::spmv(&s, &x[4 * i..4 * i + 4], &mut yi);
            assert_eq!(&y[4 * i..4 * i + 4], &yi[..]);
        }
    }
}
