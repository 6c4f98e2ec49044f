//! Sparse storage and linear solvers for the Newton systems.

pub mod banded;
pub mod block;
pub mod dense;
pub mod sparse;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

pub use banded::BandedLu;
pub use block::{BlockPattern, BlockSparse};

use crate::error::{Error, Result};

/// Which linear solver handles the Newton systems.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LinearSolverKind {
    /// Banded LU when the band is cheap enough, BiCGSTAB otherwise.
    #[default]
    Auto,
    Banded,
    #[serde(rename = "bicgstab")]
    BiCgStab,
}

/// Work estimate (flops) above which `Auto` switches to BiCGSTAB.
const BANDED_WORK_LIMIT: f64 = 3e8;

thread_local! {
    static SCRATCH: std::cell::RefCell<Vec<f64>> = const { std::cell::RefCell::new(Vec::new()) };
}

/// A factorized (or preconditioned) Jacobian ready for repeated solves.
#[derive(Debug)]
pub enum Factorization {
    Banded {
        lu: BandedLu,
        perm: Vec<usize>,
        norm1: f64,
    },
    Iterative(Box<BiCgStab>),
}

impl Factorization {
    pub fn new(a: BlockSparse, kind: LinearSolverKind) -> Result<Factorization> {
        Self::build(a, kind, true)
    }

    /// Like [`Factorization::new`]; with `estimate_condition == false` the
    /// 1-norm of `A` is skipped and [`Factorization::condition_estimate`] is NaN.
    pub fn build(
        a: BlockSparse,
        kind: LinearSolverKind,
        estimate_condition: bool,
    ) -> Result<Factorization> {
        let bs = a.block_size();
        let bw = (a.pattern().block_bandwidth() + 1) * bs - 1;
        let n = a.dim();
        let work = n as f64 * bw as f64 * (2 * bw) as f64;
        let use_banded = match kind {
            LinearSolverKind::Banded => true,
            LinearSolverKind::BiCgStab => false,
            LinearSolverKind::Auto => work <= BANDED_WORK_LIMIT,
        };
        if use_banded {
            let perm: Vec<usize> = (0..n).map(|g| a.interleave_index(g)).collect();
            let mut lu = BandedLu::new(n, bw, bw);
            let nel = a.pattern().num_elements();
            for r in 0..nel {
                for &c in a.pattern().row(r) {
                    let blk = a.block(r, c).expect("pattern block");
                    for li in 0..bs {
                        for lj in 0..bs {
                            let v = blk[li * bs + lj];
                            if v != 0.0 {
                                lu.add(r * bs + li, c * bs + lj, v);
                            }
                        }
                    }
                }
            }
            let norm1 = if estimate_condition {
                a.norm1()
            } else {
                f64::NAN
            };
            lu.factor()?;
            Ok(Factorization::Banded { lu, perm, norm1 })
        } else {
            Ok(Factorization::Iterative(Box::new(BiCgStab::new(a)?)))
        }
    }

    /// Solve `A x = b` (species-major vectors).
    pub fn solve(&self, b: &[f64], x: &mut [f64]) -> Result<()> {
        match self {
            Factorization::Banded { lu, perm, .. } => {
                let mut y = SCRATCH.with(|c| std::mem::take(&mut *c.borrow_mut()));
                y.clear();
                y.resize(b.len(), 0.0);
                for (g, p) in perm.iter().enumerate() {
                    y[*p] = b[g];
                }
                lu.solve(&mut y);
                for (g, p) in perm.iter().enumerate() {
                    x[g] = y[*p];
                }
                SCRATCH.with(|c| *c.borrow_mut() = y);
                Ok(())
            }
            Factorization::Iterative(it) => it.solve(b, x),
        }
    }

    /// 1-norm condition estimate; NaN when the iterative solver is in use.
    pub fn condition_estimate(&self) -> f64 {
        match self {
            Factorization::Banded { lu, norm1, .. } if norm1.is_finite() => {
                norm1 * lu.inverse_norm1_estimate()
            }
            Factorization::Banded { .. } => f64::NAN,
            Factorization::Iterative(_) => f64::NAN,
        }
    }
}

/// Right-preconditioned BiCGSTAB with element-block Jacobi preconditioning.
#[derive(Debug)]
pub struct BiCgStab {
    a: BlockSparse,
    diag_lu: Vec<(Vec<f64>, Vec<usize>)>,
    pub rel_tol: f64,
    pub max_iter: usize,
}

impl BiCgStab {
    pub fn new(a: BlockSparse) -> Result<BiCgStab> {
        let bs = a.block_size();
        let nel = a.pattern().num_elements();
        let mut diag_lu = Vec::with_capacity(nel);
        for e in 0..nel {
            let mut blk = a.block(e, e).expect("diagonal block").to_vec();
            let mut piv = vec![0; bs];
            if !dense::lu_factor(&mut blk, bs, &mut piv) {
                return Err(Error::LinearSolve(format!(
                    "singular diagonal block in element {e}"
                )));
            }
            diag_lu.push((blk, piv));
        }
        Ok(BiCgStab {
            a,
            diag_lu,
            rel_tol: 1e-13,
            max_iter: 5000,
        })
    }

    fn precondition(&self, r: &[f64], z: &mut [f64]) {
        let n = self.a.nloc();
        let bs = self.a.block_size();
        let sl = self.a.pattern().num_elements() * n;
        let mut buf = vec![0.0; bs];
        for (e, (lu, piv)) in self.diag_lu.iter().enumerate() {
            for (l, b) in buf.iter_mut().enumerate() {
                *b = r[(l / n) * sl + e * n + l % n];
            }
            dense::lu_solve(lu, bs, piv, &mut buf);
            for (l, b) in buf.iter().enumerate() {
                z[(l / n) * sl + e * n + l % n] = *b;
            }
        }
    }

    pub fn solve(&self, b: &[f64], x: &mut [f64]) -> Result<()> {
        let n = b.len();
        let dot = |u: &[f64], v: &[f64]| u.iter().zip(v).map(|(a, b)| a * b).sum::<f64>();
        let bnorm = dot(b, b).sqrt();
        x.iter_mut().for_each(|v| *v = 0.0);
        if bnorm == 0.0 {
            return Ok(());
        }
        let tol = self.rel_tol * bnorm;
        let mut r = b.to_vec();
        let r0 = r.clone();
        let (mut rho, mut alpha, mut omega) = (1.0, 1.0, 1.0);
        let mut v = vec![0.0; n];
        let mut p = vec![0.0; n];
        let mut phat = vec![0.0; n];
        let mut s = vec![0.0; n];
        let mut shat = vec![0.0; n];
        let mut t = vec![0.0; n];
        for _ in 0..self.max_iter {
            let rho_new = dot(&r0, &r);
            if rho_new == 0.0 || !rho_new.is_finite() {
                break;
            }
            let beta = (rho_new / rho) * (alpha / omega);
            rho = rho_new;
            for k in 0..n {
                p[k] = r[k] + beta * (p[k] - omega * v[k]);
            }
            self.precondition(&p, &mut phat);
            self.a.matvec(&phat, &mut v);
            alpha = rho / dot(&r0, &v);
            for k in 0..n {
                s[k] = r[k] - alpha * v[k];
            }
            if dot(&s, &s).sqrt() <= tol {
                for k in 0..n {
                    x[k] += alpha * phat[k];
                }
                return Ok(());
            }
            self.precondition(&s, &mut shat);
            self.a.matvec(&shat, &mut t);
            omega = dot(&t, &s) / dot(&t, &t);
            for k in 0..n {
                x[k] += alpha * phat[k] + omega * shat[k];
                r[k] = s[k] - omega * t[k];
            }
            if dot(&r, &r).sqrt() <= tol {
                return Ok(());
            }
            if omega == 0.0 || !omega.is_finite() {
                break;
            }
        }
        // Accept a stagnated solve if the true residual is still small.
        let mut ax = vec![0.0; n];
        self.a.matvec(x, &mut ax);
        let res = ax
            .iter()
            .zip(b)
            .map(|(a, b)| (a - b).powi(2))
            .sum::<f64>()
            .sqrt();
        if res <= 1e3 * tol && res.is_finite() {
            Ok(())
        } else {
            Err(Error::LinearSolve(format!(
                "BiCGSTAB stagnated at relative residual {:.3e}",
                res / bnorm
            )))
        }
    }
}

/// Dense 2-norm condition number via singular values (small systems only).
pub fn dense_condition_number(a: &DMatrix<f64>) -> f64 {
    let sv = a.clone().singular_values();
    sv.max() / sv.min()
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::sync::Arc;

    fn sample() -> BlockSparse {
        let nel = 6;
        let pairs = (0..nel - 1).flat_map(|e| [(e, e + 1), (e + 1, e)]);
        let pat = Arc::new(BlockPattern::from_pairs(nel, pairs));
        let mut a = BlockSparse::zeros(pat.clone(), 2, 3);
        let mut s = 0.21;
        for r in 0..nel {
            for &c in pat.row(r) {
                let blk = a.block_mut(r, c);
                for (k, v) in blk.iter_mut().enumerate() {
                    s = (s * 5.31f64 + 0.07).fract();
                    *v = s - 0.5 + if r == c && k % 7 == 0 { 6.0 } else { 0.0 };
                }
            }
        }
        a
    }

    #[test]
    fn banded_and_krylov_agree() {
        let a = sample();
        let b: Vec<f64> = (0..a.dim()).map(|k| (k as f64 * 0.3).sin()).collect();
        let d = a.to_dense();
        let exact = d
            .clone()
            .lu()
            .solve(&nalgebra::DVector::from_column_slice(&b))
            .unwrap();
        for kind in [LinearSolverKind::Banded, LinearSolverKind::BiCgStab] {
            let f = Factorization::new(a.clone(), kind).unwrap();
            let mut x = vec![0.0; a.dim()];
            f.solve(&b, &mut x).unwrap();
            for k in 0..a.dim() {
                assert!((x[k] - exact[k]).abs() < 1e-9, "{kind:?}");
            }
        }
        let f = Factorization::new(a, LinearSolverKind::Auto).unwrap();
        let c = f.condition_estimate();
        let c_exact = {
            let inv = d.clone().try_inverse().unwrap();
            let n1 = |m: &DMatrix<f64>| {
                (0..m.ncols())
                    .map(|j| m.column(j).iter().map(|v| v.abs()).sum::<f64>())
                    .fold(0.0, f64::max)
            };
            n1(&d) * n1(&inv)
        };
        assert!(c <= c_exact * (1.0 + 1e-9) && c >= c_exact / 3.0);
    }
}
