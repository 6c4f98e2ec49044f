//! Banded LU with partial pivoting (column-major band storage in the style of
//! LAPACK `gbtf2`/`gbtrs`), plus Hager-Higham 1-norm condition estimation.

use crate::error::{Error, Result};

#[derive(Clone, Debug)]
pub struct BandedLu {
    n: usize,
    kl: usize,
    ku: usize,
    ldab: usize,
    ab: Vec<f64>,
    ipiv: Vec<usize>,
}

impl BandedLu {
    /// Empty band matrix of order `n` with `kl` sub- and `ku` super-diagonals.
    pub fn new(n: usize, kl: usize, ku: usize) -> BandedLu {
        let ldab = 2 * kl + ku + 1;
        BandedLu {
            n,
            kl,
            ku,
            ldab,
            ab: vec![0.0; ldab * n],
            ipiv: vec![0; n],
        }
    }

    pub fn order(&self) -> usize {
        self.n
    }

    /// Add `v` to entry `(i, j)`, which must lie inside the band.
    pub fn add(&mut self, i: usize, j: usize, v: f64) {
        debug_assert!(
            i <= j + self.kl && j <= i + self.ku,
            "({i}, {j}) outside band"
        );
        let kv = self.kl + self.ku;
        self.ab[j * self.ldab + kv + i - j] += v;
    }

    fn at(&self, i: usize, j: usize) -> f64 {
        self.ab[j * self.ldab + self.kl + self.ku + i - j]
    }

    pub fn factor(&mut self) -> Result<()> {
        let (n, kl, kv, ld) = (self.n, self.kl, self.kl + self.ku, self.ldab);
        let mut ju = 0usize;
        for j in 0..n {
            let km = kl.min(n - 1 - j);
            let col = j * ld;
            let mut jp = 0;
            let mut best = self.ab[col + kv].abs();
            for k in 1..=km {
                let v = self.ab[col + kv + k].abs();
                if v > best {
                    best = v;
                    jp = k;
                }
            }
            self.ipiv[j] = j + jp;
            if best == 0.0 || !best.is_finite() {
                return Err(Error::LinearSolve(format!(
                    "zero or non-finite pivot in column {j}"
                )));
            }
            ju = ju.max((j + self.ku + jp).min(n - 1));
            if jp != 0 {
                for c in j..=ju {
                    let a = c * ld + kv + j - c;
                    let b = c * ld + kv + j + jp - c;
                    self.ab.swap(a, b);
                }
            }
            if km > 0 {
                let d = self.ab[col + kv];
                for k in 1..=km {
                    self.ab[col + kv + k] /= d;
                }
                for c in j + 1..=ju {
                    let f = self.ab[c * ld + kv + j - c];
                    if f == 0.0 {
                        continue;
                    }
                    for k in 1..=km {
                        let l = self.ab[col + kv + k];
                        self.ab[c * ld + kv + j + k - c] -= l * f;
                    }
                }
            }
        }
        Ok(())
    }

    /// Solve `A x = b` in place after [`BandedLu::factor`].
    pub fn solve(&self, b: &mut [f64]) {
        let (n, kl, kv, ld) = (self.n, self.kl, self.kl + self.ku, self.ldab);
        for j in 0..n {
            let km = kl.min(n - 1 - j);
            let l = self.ipiv[j];
            if l != j {
                b.swap(l, j);
            }
            let bj = b[j];
            if bj != 0.0 {
                for k in 1..=km {
                    b[j + k] -= self.ab[j * ld + kv + k] * bj;
                }
            }
        }
        for j in (0..n).rev() {
            b[j] /= self.ab[j * ld + kv];
            let bj = b[j];
            if bj != 0.0 {
                for i in j.saturating_sub(kv)..j {
                    b[i] -= self.ab[j * ld + kv + i - j] * bj;
                }
            }
        }
    }

    /// Solve `Aᵀ x = b` in place after [`BandedLu::factor`].
    pub fn solve_transpose(&self, b: &mut [f64]) {
        let (n, kl, kv) = (self.n, self.kl, self.kl + self.ku);
        for j in 0..n {
            let mut acc = b[j];
            for i in j.saturating_sub(kv)..j {
                acc -= self.at(i, j) * b[i];
            }
            b[j] = acc / self.at(j, j);
        }
        for j in (0..n).rev() {
            let km = kl.min(n - 1 - j);
            let mut acc = b[j];
            for k in 1..=km {
                acc -= self.ab[j * self.ldab + kv + k] * b[j + k];
            }
            b[j] = acc;
            let l = self.ipiv[j];
            if l != j {
                b.swap(l, j);
            }
        }
    }

    /// Estimate of `‖A⁻¹‖₁` (Hager's method with Higham's safeguard).
    pub fn inverse_norm1_estimate(&self) -> f64 {
        let n = self.n;
        let mut x = vec![1.0 / n as f64; n];
        let mut est = 0.0;
        for iter in 0..5 {
            let mut y = x.clone();
            self.solve(&mut y);
            let ny: f64 = y.iter().map(|v| v.abs()).sum();
            if iter > 0 && ny <= est {
                break;
            }
            est = ny;
            let mut z: Vec<f64> = y
                .iter()
                .map(|v| if *v >= 0.0 { 1.0 } else { -1.0 })
                .collect();
            self.solve_transpose(&mut z);
            let (jmax, zmax) = z.iter().enumerate().fold((0, 0.0), |acc, (k, v)| {
                if v.abs() > acc.1 {
                    (k, v.abs())
                } else {
                    acc
                }
            });
            let ztx: f64 = z.iter().zip(&x).map(|(a, b)| a * b).sum();
            if iter > 0 && zmax <= ztx {
                break;
            }
            x.iter_mut().for_each(|v| *v = 0.0);
            x[jmax] = 1.0;
        }
        let mut alt: Vec<f64> = (0..n)
            .map(|i| {
                let s = if i % 2 == 0 { 1.0 } else { -1.0 };
                s * (1.0 + i as f64 / (n.max(2) - 1) as f64)
            })
            .collect();
        self.solve(&mut alt);
        let alt_est = 2.0 * alt.iter().map(|v| v.abs()).sum::<f64>() / (3.0 * n as f64);
        est.max(alt_est)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::DMatrix;

    fn sample(n: usize, kl: usize, ku: usize) -> (BandedLu, DMatrix<f64>) {
        let mut lu = BandedLu::new(n, kl, ku);
        let mut d = DMatrix::zeros(n, n);
        let mut s = 0.4;
        for i in 0..n {
            for j in i.saturating_sub(kl)..(i + ku + 1).min(n) {
                s = (s * 9.77f64 + 0.1).fract();
                // weak diagonal so pivoting actually happens
                let v = if i == j { 0.1 * s } else { s - 0.5 };
                lu.add(i, j, v);
                d[(i, j)] = v;
            }
        }
        (lu, d)
    }

    #[test]
    fn solve_and_transpose_match_dense() {
        let (mut lu, d) = sample(23, 3, 2);
        lu.factor().unwrap();
        let b: Vec<f64> = (0..23).map(|k| (k as f64).cos()).collect();
        let mut x = b.clone();
        lu.solve(&mut x);
        let r = &d * nalgebra::DVector::from_column_slice(&x)
            - nalgebra::DVector::from_column_slice(&b);
        assert!(r.amax() < 1e-10, "{}", r.amax());
        let mut xt = b.clone();
        lu.solve_transpose(&mut xt);
        let rt = d.transpose() * nalgebra::DVector::from_column_slice(&xt)
            - nalgebra::DVector::from_column_slice(&b);
        assert!(rt.amax() < 1e-10, "{}", rt.amax());
    }

    #[test]
    fn condition_estimate_is_close() {
        let (mut lu, d) = sample(30, 2, 2);
        lu.factor().unwrap();
        let inv = d.clone().try_inverse().unwrap();
        let exact = (0..30)
            .map(|j| inv.column(j).iter().map(|v| v.abs()).sum::<f64>())
            .fold(0.0, f64::max);
        let est = lu.inverse_norm1_estimate();
        assert!(
            est <= exact * (1.0 + 1e-10) && est >= exact / 3.0,
            "est {est} exact {exact}"
        );
    }

    #[test]
    fn singular_band_is_reported() {
        let mut lu = BandedLu::new(3, 1, 1);
        lu.add(0, 0, 1.0);
        lu.add(1, 1, 1.0);
        assert!(lu.factor().is_err());
    }
}
