//! Thin helpers over `nalgebra_sparse` CSR matrices acting on plain slices.

use std::io::Write;

use nalgebra::DMatrix;
pub use nalgebra_sparse::{CooMatrix, CsrMatrix};

/// `y = A x`.
pub fn spmv(a: &CsrMatrix<f64>, x: &[f64], y: &mut [f64]) {
    y.iter_mut().for_each(|v| *v = 0.0);
    spmv_add(a, 1.0, x, y);
}

/// `y += alpha A x`.
pub fn spmv_add(a: &CsrMatrix<f64>, alpha: f64, x: &[f64], y: &mut [f64]) {
    let (off, cols, vals) = (a.row_offsets(), a.col_indices(), a.values());
    for (r, yr) in y.iter_mut().enumerate().take(a.nrows()) {
        let mut acc = 0.0;
        for k in off[r]..off[r + 1] {
            acc += vals[k] * x[cols[k]];
        }
        *yr += alpha * acc;
    }
}

/// `y += alpha Aᵀ x`.
pub fn spmv_t_add(a: &CsrMatrix<f64>, alpha: f64, x: &[f64], y: &mut [f64]) {
    let (off, cols, vals) = (a.row_offsets(), a.col_indices(), a.values());
    for r in 0..a.nrows() {
        let xr = alpha * x[r];
        if xr == 0.0 {
            continue;
        }
        for k in off[r]..off[r + 1] {
            y[cols[k]] += vals[k] * xr;
        }
    }
}

pub fn to_dense(a: &CsrMatrix<f64>) -> DMatrix<f64> {
    let mut d = DMatrix::zeros(a.nrows(), a.ncols());
    for (r, c, v) in a.triplet_iter() {
        d[(r, c)] += *v;
    }
    d
}

/// Build a CSR matrix from triplets, summing duplicates and dropping exact zeros.
pub fn from_triplets(
    nrows: usize,
    ncols: usize,
    triplets: &[(usize, usize, f64)],
) -> CsrMatrix<f64> {
    let mut coo = CooMatrix::new(nrows, ncols);
    for &(r, c, v) in triplets {
        if v != 0.0 {
            coo.push(r, c, v);
        }
    }
    CsrMatrix::from(&coo)
}

/// Write `row col value` lines, one per stored entry.
pub fn write_triplets<W: Write>(a: &CsrMatrix<f64>, mut out: W) -> std::io::Result<()> {
    writeln!(out, "# {} {} {}", a.nrows(), a.ncols(), a.nnz())?;
    for (r, c, v) in a.triplet_iter() {
        writeln!(out, "{r} {c} {v:.17e}")?;
    }
    Ok(())
}

/// Largest absolute entry of `A - Aᵀ`.
pub fn asymmetry(a: &CsrMatrix<f64>) -> f64 {
    let d = to_dense(a);
    (&d - d.transpose()).amax()
}
