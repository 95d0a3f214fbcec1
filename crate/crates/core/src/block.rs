//! Square block-sparse operators over `nb x nb` grids of `bs x bs` blocks.
//!
//! Every network-level gain and transition in the estimator (consensus gains,
//! block-diagonal innovation gains, `I ⊗ A`) touches only the blocks allowed
//! by the communication graph, so products against dense `MN x MN`
//! covariances are done block row by block row.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

#[derive(Debug, Clone, PartialEq)]
pub struct BlockSparse {
    bs: usize,
    nb: usize,
    /// Per block row, `(column, block)` sorted by column.
    rows: Vec<Vec<(usize, DMatrix<f64>)>>,
}

impl BlockSparse {
    pub fn zeros(nb: usize, bs: usize) -> Self {
        Self {
            bs,
            nb,
            rows: vec![Vec::new(); nb],
        }
    }

    pub fn identity(nb: usize, bs: usize) -> Self {
        Self::kron_identity(nb, &DMatrix::identity(bs, bs))
    }

    /// `I_nb ⊗ a`.
    pub fn kron_identity(nb: usize, a: &DMatrix<f64>) -> Self {
        assert!(a.is_square());
        Self::block_diag(vec![a.clone(); nb])
    }

    pub fn block_diag(blocks: Vec<DMatrix<f64>>) -> Self {
        let bs = blocks.first().map_or(0, |b| b.nrows());
        assert!(blocks.iter().all(|b| b.shape() == (bs, bs)), "blocks must be square and equal-sized");
        let nb = blocks.len();
        Self {
            bs,
            nb,
            rows: blocks.into_iter().enumerate().map(|(i, b)| vec![(i, b)]).collect(),
        }
    }

    pub fn block_size(&self) -> usize {
        self.bs
    }

    pub fn num_blocks(&self) -> usize {
        self.nb
    }

    pub fn dim(&self) -> usize {
        self.bs * self.nb
    }

    pub fn block(&self, r: usize, c: usize) -> Option<&DMatrix<f64>> {
        self.rows[r]
            .binary_search_by_key(&c, |(col, _)| *col)
            .ok()
            .map(|k| &self.rows[r][k].1)
    }

    pub fn row(&self, r: usize) -> &[(usize, DMatrix<f64>)] {
        &self.rows[r]
    }

    /// Adds `m` into block `(r, c)`, creating it if absent.
    pub fn add_block(&mut self, r: usize, c: usize, m: &DMatrix<f64>) {
        assert_eq!(m.shape(), (self.bs, self.bs));
        let row = &mut self.rows[r];
        match row.binary_search_by_key(&c, |(col, _)| *col) {
            Ok(k) => row[k].1 += m,
            Err(k) => row.insert(k, (c, m.clone())),
        }
    }

    pub fn set_block(&mut self, r: usize, c: usize, m: DMatrix<f64>) {
        assert_eq!(m.shape(), (self.bs, self.bs));
        let row = &mut self.rows[r];
        match row.binary_search_by_key(&c, |(col, _)| *col) {
            Ok(k) => row[k].1 = m,
            Err(k) => row.insert(k, (c, m)),
        }
    }

    pub fn scale(&self, s: f64) -> Self {
        let mut out = self.clone();
        for row in &mut out.rows {
            for (_, b) in row {
                *b *= s;
            }
        }
        out
    }

    pub fn add(&self, other: &Self) -> Self {
        assert_eq!((self.nb, self.bs), (other.nb, other.bs));
        let mut out = self.clone();
        for (r, row) in other.rows.iter().enumerate() {
            for (c, b) in row {
                out.add_block(r, *c, b);
            }
        }
        out
    }

    pub fn sub(&self, other: &Self) -> Self {
        self.add(&other.scale(-1.0))
    }

    pub fn transpose(&self) -> Self {
        let mut out = Self::zeros(self.nb, self.bs);
        for (r, row) in self.rows.iter().enumerate() {
            for (c, b) in row {
                out.set_block(*c, r, b.transpose());
            }
        }
        out
    }

    /// Operator product `self * other`.
    pub fn mul(&self, other: &Self) -> Self {
        assert_eq!((self.nb, self.bs), (other.nb, other.bs));
        let mut out = Self::zeros(self.nb, self.bs);
        for (r, row) in self.rows.iter().enumerate() {
            for (k, a) in row {
                for (c, b) in &other.rows[*k] {
                    out.add_block(r, *c, &(a * b));
                }
            }
        }
        out
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let mut out = DMatrix::zeros(self.dim(), self.dim());
        for (r, row) in self.rows.iter().enumerate() {
            for (c, b) in row {
                out.view_mut((r * self.bs, c * self.bs), (self.bs, self.bs)).copy_from(b);
            }
        }
        out
    }

    pub fn mul_vec(&self, v: &DVector<f64>) -> DVector<f64> {
        assert_eq!(v.len(), self.dim());
        let bs = self.bs;
        let mut out = DVector::zeros(self.dim());
        for (r, row) in self.rows.iter().enumerate() {
            let mut acc = out.rows_mut(r * bs, bs);
            for (c, b) in row {
                acc.gemv(1.0, b, &v.rows(c * bs, bs), 1.0);
            }
        }
        out
    }

    /// Dense product `self * x`.
    pub fn mul_dense(&self, x: &DMatrix<f64>) -> DMatrix<f64> {
        assert_eq!(x.nrows(), self.dim());
        let bs = self.bs;
        let cols = x.ncols();
        let parts: Vec<DMatrix<f64>> = self
            .rows
            .par_iter()
            .map(|row| {
                let mut acc = DMatrix::zeros(bs, cols);
                for (c, b) in row {
                    acc.gemm(1.0, b, &x.rows(c * bs, bs), 1.0);
                }
                acc
            })
            .collect();
        let mut out = DMatrix::zeros(self.dim(), cols);
        for (r, p) in parts.into_iter().enumerate() {
            out.rows_mut(r * bs, bs).copy_from(&p);
        }
        out
    }

    /// Dense product `x * self^T`.
    pub fn dense_mul_t(&self, x: &DMatrix<f64>) -> DMatrix<f64> {
        assert_eq!(x.ncols(), self.dim());
        let bs = self.bs;
        let rows = x.nrows();
        let parts: Vec<DMatrix<f64>> = self
            .rows
            .par_iter()
            .map(|row| {
                let mut acc = DMatrix::zeros(rows, bs);
                for (c, b) in row {
                    acc.gemm(1.0, &x.columns(c * bs, bs), &b.transpose(), 1.0);
                }
                acc
            })
            .collect();
        let mut out = DMatrix::zeros(rows, self.dim());
        for (r, p) in parts.into_iter().enumerate() {
            out.columns_mut(r * bs, bs).copy_from(&p);
        }
        out
    }

    /// `self * x * self^T`.
    pub fn congruence(&self, x: &DMatrix<f64>) -> DMatrix<f64> {
        self.dense_mul_t(&self.mul_dense(x))
    }

    /// `self * x * other^T`.
    pub fn sandwich(&self, x: &DMatrix<f64>, other: &Self) -> DMatrix<f64> {
        other.dense_mul_t(&self.mul_dense(x))
    }

    /// Induced infinity norm (max absolute row sum).
    pub fn norm_inf(&self) -> f64 {
        let bs = self.bs;
        let mut best = 0.0_f64;
        for row in &self.rows {
            for i in 0..bs {
                let s: f64 = row.iter().map(|(_, b)| b.row(i).iter().map(|x| x.abs()).sum::<f64>()).sum();
                best = best.max(s);
            }
        }
        best
    }

    /// Induced one norm (max absolute column sum).
    pub fn norm_one(&self) -> f64 {
        self.transpose().norm_inf()
    }
}
