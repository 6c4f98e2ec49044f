//! Gauss-Legendre rules on `[0, 1]` and collapsed (Duffy) rules on the
//! reference triangle. Weights are normalized to sum to one, so integrals over
//! an element are `|K| Σ_q w_q f(x_q)`.

use crate::mesh::Point;

/// `n`-point Gauss-Legendre rule on `[0, 1]`, exact for degree `2n - 1`.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1, "quadrature needs at least one point");
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let nf = n as f64;
    for i in 0..n.div_ceil(2) {
        // Chebyshev-like initial guess for the i-th root of P_n on [-1, 1].
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (nf + 0.5)).cos();
        let mut dp = 1.0;
        for _ in 0..100 {
            let (p, d) = legendre_with_derivative(n, x);
            dp = d;
            let dx = p / d;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let (_, d) = legendre_with_derivative(n, x);
        dp = if d != 0.0 { d } else { dp };
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        // map [-1, 1] to [0, 1]; total weight 2 maps to 1
        nodes[i] = 0.5 * (1.0 - x);
        nodes[n - 1 - i] = 0.5 * (1.0 + x);
        weights[i] = 0.5 * w;
        weights[n - 1 - i] = 0.5 * w;
    }
    (nodes, weights)
}

fn legendre_with_derivative(n: usize, x: f64) -> (f64, f64) {
    let (mut p0, mut p1) = (1.0, x);
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    if n == 0 {
        return (1.0, 0.0);
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

/// Collapsed product rule on the triangle `(0,0), (1,0), (0,1)` with `n × n`
/// points, exact for polynomials of degree `2n - 2`.
pub fn triangle_rule(n: usize) -> (Vec<Point>, Vec<f64>) {
    let (x, w) = gauss_legendre(n);
    let mut pts = Vec::with_capacity(n * n);
    let mut wts = Vec::with_capacity(n * n);
    for (a, wa) in x.iter().zip(&w) {
        for (b, wb) in x.iter().zip(&w) {
            pts.push([*a, b * (1.0 - a)]);
            wts.push(2.0 * wa * wb * (1.0 - a));
        }
    }
    (pts, wts)
}

/// Reference-element rule with `n` points per direction.
pub fn reference_rule(dim: usize, n: usize) -> (Vec<Point>, Vec<f64>) {
    if dim == 1 {
        let (x, w) = gauss_legendre(n);
        (x.into_iter().map(|t| [t, 0.0]).collect(), w)
    } else {
        triangle_rule(n)
    }
}
