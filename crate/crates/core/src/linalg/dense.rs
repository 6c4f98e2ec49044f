//! In-place LU factorization of small row-major blocks, used in the per-element
//! hot path where allocating `nalgebra` matrices per call would dominate.

/// Factor the `n × n` row-major matrix `a` in place (`PA = LU`, unit lower `L`).
/// Returns `false` when a zero pivot is met.
pub fn lu_factor(a: &mut [f64], n: usize, piv: &mut [usize]) -> bool {
    for k in 0..n {
        let mut p = k;
        let mut best = a[k * n + k].abs();
        for r in k + 1..n {
            let v = a[r * n + k].abs();
            if v > best {
                best = v;
                p = r;
            }
        }
        piv[k] = p;
        if best == 0.0 || !best.is_finite() {
            return false;
        }
        if p != k {
            for c in 0..n {
                a.swap(k * n + c, p * n + c);
            }
        }
        let d = a[k * n + k];
        for r in k + 1..n {
            let l = a[r * n + k] / d;
            a[r * n + k] = l;
            if l != 0.0 {
                for c in k + 1..n {
                    a[r * n + c] -= l * a[k * n + c];
                }
            }
        }
    }
    true
}

/// Solve `A x = b` in place using the output of [`lu_factor`].
pub fn lu_solve(lu: &[f64], n: usize, piv: &[usize], b: &mut [f64]) {
    for k in 0..n {
        b.swap(k, piv[k]);
    }
    for r in 1..n {
        let mut acc = b[r];
        for c in 0..r {
            acc -= lu[r * n + c] * b[c];
        }
        b[r] = acc;
    }
    for r in (0..n).rev() {
        let mut acc = b[r];
        for c in r + 1..n {
            acc -= lu[r * n + c] * b[c];
        }
        b[r] = acc / lu[r * n + r];
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn solves_pivoted_system() {
        let a0 = [0.0, 2.0, 1.0, 1.0, 1.0, 0.0, 3.0, 0.0, 1.0];
        let mut a = a0;
        let mut piv = [0; 3];
        assert!(lu_factor(&mut a, 3, &mut piv));
        let x = [1.0, -2.0, 0.5];
        let mut b: Vec<f64> = (0..3)
            .map(|r| (0..3).map(|c| a0[r * 3 + c] * x[c]).sum())
            .collect();
        lu_solve(&a, 3, &piv, &mut b);
        for k in 0..3 {
            assert!((b[k] - x[k]).abs() < 1e-14);
        }
    }

    #[test]
    fn detects_singular() {
        let mut a = [1.0, 2.0, 2.0, 4.0];
        let mut piv = [0; 2];
        assert!(!lu_factor(&mut a, 2, &mut piv));
    }
}
