//! Orthonormal polynomial basis on the reference simplex.
//!
//! The basis is obtained from centered monomials by orthonormalizing with
//! respect to the normalized measure of the reference element, so the mass
//! block of an element `K` is `|K| I` and the first basis function is `1`.

use nalgebra::DMatrix;

use super::quadrature::reference_rule;
use crate::mesh::Point;

#[derive(Clone, Debug)]
pub struct ReferenceBasis {
    dim: usize,
    degree: usize,
    exponents: Vec<(i32, i32)>,
    center: Point,
    /// Row `i` holds the monomial coefficients of basis function `i`.
    coeffs: DMatrix<f64>,
}

/// Values, reference gradients and reference Hessians of all basis functions at a point.
#[derive(Clone, Debug, Default)]
pub struct BasisEval {
    pub values: Vec<f64>,
    pub grads: Vec<Point>,
    pub hessians: Vec<[[f64; 2]; 2]>,
}

/// Number of basis functions of degree `p` in dimension `dim`.
pub fn local_dim(dim: usize, p: usize) -> usize {
    if dim == 1 {
        p + 1
    } else {
        (p + 1) * (p + 2) / 2
    }
}

impl ReferenceBasis {
    pub fn new(dim: usize, degree: usize) -> ReferenceBasis {
        let exponents: Vec<(i32, i32)> = if dim == 1 {
            (0..=degree as i32).map(|k| (k, 0)).collect()
        } else {
            (0..=degree as i32)
                .flat_map(|t| (0..=t).rev().map(move |a| (a, t - a)))
                .collect()
        };
        let center = if dim == 1 {
            [0.5, 0.0]
        } else {
            [1.0 / 3.0, 1.0 / 3.0]
        };
        let n = exponents.len();
        let mut basis = ReferenceBasis {
            dim,
            degree,
            exponents,
            center,
            coeffs: DMatrix::identity(n, n),
        };
        // Two passes of Cholesky orthonormalization; the second pass removes the
        // rounding left by the ill-conditioned monomial Gram matrix.
        let (pts, wts) = reference_rule(dim, degree + 2);
        for _ in 0..2 {
            let mut gram = DMatrix::zeros(n, n);
            let mut ev = BasisEval::default();
            for (p, w) in pts.iter().zip(&wts) {
                basis.eval_into(*p, &mut ev, false);
                for i in 0..n {
                    for j in 0..n {
                        gram[(i, j)] += w * ev.values[i] * ev.values[j];
                    }
                }
            }
            let l = gram
                .cholesky()
                .expect("monomial Gram matrix is positive definite")
                .unpack();
            let linv = l.try_inverse().expect("Cholesky factor is invertible");
            basis.coeffs = &linv * &basis.coeffs;
        }
        basis
    }

    pub fn len(&self) -> usize {
        self.exponents.len()
    }

    pub fn is_empty(&self) -> bool {
        self.exponents.is_empty()
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Evaluate all basis functions at reference point `xi`. Hessians are
    /// filled only when `with_hessian` is set.
    pub fn eval_into(&self, xi: Point, out: &mut BasisEval, with_hessian: bool) {
        let n = self.len();
        let x = xi[0] - self.center[0];
        let y = if self.dim == 2 {
            xi[1] - self.center[1]
        } else {
            0.0
        };
        let pw = |v: f64, k: i32| if k < 0 { 0.0 } else { v.powi(k) };

        out.values.clear();
        out.values.resize(n, 0.0);
        out.grads.clear();
        out.grads.resize(n, [0.0; 2]);
        out.hessians.clear();
        if with_hessian {
            out.hessians.resize(n, [[0.0; 2]; 2]);
        }
        for (j, &(a, b)) in self.exponents.iter().enumerate() {
            let (af, bf) = (a as f64, b as f64);
            let m = pw(x, a) * pw(y, b);
            let mx = af * pw(x, a - 1) * pw(y, b);
            let my = bf * pw(x, a) * pw(y, b - 1);
            let hess = if with_hessian {
                let mxx = af * (af - 1.0) * pw(x, a - 2) * pw(y, b);
                let myy = bf * (bf - 1.0) * pw(x, a) * pw(y, b - 2);
                let mxy = af * bf * pw(x, a - 1) * pw(y, b - 1);
                Some([[mxx, mxy], [mxy, myy]])
            } else {
                None
            };
            for i in 0..n {
                let c = self.coeffs[(i, j)];
                if c == 0.0 {
                    continue;
                }
                out.values[i] += c * m;
                out.grads[i][0] += c * mx;
                out.grads[i][1] += c * my;
                if let Some(h) = hess {
                    for r in 0..2 {
                        for s in 0..2 {
                            out.hessians[i][r][s] += c * h[r][s];
                        }
                    }
                }
            }
        }
    }

    pub fn eval(&self, xi: Point, with_hessian: bool) -> BasisEval {
        let mut ev = BasisEval::default();
        self.eval_into(xi, &mut ev, with_hessian);
        ev
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn gram(dim: usize, p: usize) -> DMatrix<f64> {
        let b = ReferenceBasis::new(dim, p);
        let (pts, wts) = reference_rule(dim, p + 3);
        let n = b.len();
        let mut g = DMatrix::zeros(n, n);
        for (x, w) in pts.iter().zip(&wts) {
            let ev = b.eval(*x, false);
            for i in 0..n {
                for j in 0..n {
                    g[(i, j)] += w * ev.values[i] * ev.values[j];
                }
            }
        }
        g
    }

    #[test]
    fn orthonormal_up_to_degree_five() {
        for dim in 1..=2 {
            for p in 0..=5 {
                let g = gram(dim, p);
                let err = (&g - DMatrix::identity(g.nrows(), g.ncols())).amax();
                assert!(err < 1e-12, "dim={dim} p={p} err={err}");
                assert_eq!(g.nrows(), local_dim(dim, p));
            }
        }
    }

    #[test]
    fn first_function_is_one() {
        let b = ReferenceBasis::new(2, 3);
        let ev = b.eval([0.2, 0.7], true);
        assert!((ev.values[0] - 1.0).abs() < 1e-14);
        assert!(ev.grads[0][0].abs() < 1e-14);
    }

    #[test]
    fn derivatives_match_finite_differences() {
        let b = ReferenceBasis::new(2, 4);
        let x = [0.21, 0.33];
        let d = 1e-6;
        let ev = b.eval(x, true);
        let px = b.eval([x[0] + d, x[1]], true);
        let mx = b.eval([x[0] - d, x[1]], true);
        let py = b.eval([x[0], x[1] + d], true);
        let my = b.eval([x[0], x[1] - d], true);
        for i in 0..b.len() {
            let gx = (px.values[i] - mx.values[i]) / (2.0 * d);
            let gy = (py.values[i] - my.values[i]) / (2.0 * d);
            assert!((gx - ev.grads[i][0]).abs() < 1e-6);
            assert!((gy - ev.grads[i][1]).abs() < 1e-6);
            let hxy = (py.grads[i][0] - my.grads[i][0]) / (2.0 * d);
            let hxx = (px.grads[i][0] - mx.grads[i][0]) / (2.0 * d);
            assert!((hxy - ev.hessians[i][0][1]).abs() < 1e-5);
            assert!((hxx - ev.hessians[i][0][0]).abs() < 1e-5);
        }
    }
}
