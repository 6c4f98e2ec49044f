//! Broken gradient, jump liftings, the LDG gradient `∇_DG = ∇_h − L` and the
//! discrete Hessian `H_DG = D²_h − R + B`, all as sparse matrices acting on the
//! scalar coefficients of one species.
//!
//! Facet averages of test functions use `⟨θ⟩_{1−α} = α θ|K1 + (1 − α) θ|K2`.

use nalgebra_sparse::CsrMatrix;

use super::{CoeffVec, DgSpace};
use crate::linalg::sparse::{from_triplets, spmv};
use crate::mesh::FluxOrientation;

/// Coefficients of `∇_DG w` and of the lifting `L(w)`, species-major in the
/// vector-field layout.
#[derive(Clone, Debug, PartialEq)]
pub struct LiftedGradient {
    pub gradient: Vec<f64>,
    pub lifting: Vec<f64>,
}

fn vrow(space: &DgSpace, e: usize, c: usize, a: usize) -> usize {
    let n = space.nloc();
    e * space.dim() * n + c * n + a
}

/// Matrix of the elementwise gradient `∇_h` into `M_p`.
pub fn broken_gradient_matrix(space: &DgSpace) -> CsrMatrix<f64> {
    let (n, d) = (space.nloc(), space.dim());
    let mut t = Vec::new();
    for e in 0..space.num_elements() {
        for q in 0..space.num_volume_points() {
            let w = space.volume_weight(q);
            let ph = space.phi(q);
            for b in 0..n {
                let g = space.grad_phi(e, q, b);
                for c in 0..d {
                    for (a, pa) in ph.iter().enumerate() {
                        t.push((vrow(space, e, c, a), e * n + b, w * g[c] * pa));
                    }
                }
            }
        }
    }
    from_triplets(space.vector_len(), space.scalar_len(), &t)
}

/// Matrix of the jump lifting `L`: `∫ L(w)·θ = Σ_F ∫_F [w]_N · ⟨θ⟩_{1−α}`.
pub fn lifting_matrix(space: &DgSpace, orient: &FluxOrientation) -> CsrMatrix<f64> {
    let (n, d) = (space.nloc(), space.dim());
    let mut t = Vec::new();
    for (f, o) in space.mesh().interior_facets().iter().zip(&orient.facets) {
        for (x, wq) in space.facet_quadrature(&f.vertices, f.measure) {
            let b1 = space.eval_basis_at(o.k1, x, false);
            let b2 = space.eval_basis_at(o.k2, x, false);
            for (k, bk, weight) in [(o.k1, &b1, o.alpha), (o.k2, &b2, 1.0 - o.alpha)] {
                if weight == 0.0 {
                    continue;
                }
                let inv = 1.0 / space.geometry(k).measure;
                for c in 0..d {
                    for a in 0..n {
                        let s = inv * wq * weight * o.normal[c] * bk.values[a];
                        for b in 0..n {
                            t.push((vrow(space, k, c, a), o.k1 * n + b, s * b1.values[b]));
                            t.push((vrow(space, k, c, a), o.k2 * n + b, -s * b2.values[b]));
                        }
                    }
                }
            }
        }
    }
    from_triplets(space.vector_len(), space.scalar_len(), &t)
}

/// Matrix of `∇_DG = ∇_h − L`.
pub fn dg_gradient_matrix(space: &DgSpace, orient: &FluxOrientation) -> CsrMatrix<f64> {
    &broken_gradient_matrix(space) - &lifting_matrix(space, orient)
}

/// Matrix of the discrete Hessian into matrix-valued fields with layout
/// `e · d² · nloc + (c1 · d + c2) · nloc + a`.
pub fn hessian_matrix(space: &DgSpace, orient: &FluxOrientation) -> CsrMatrix<f64> {
    let (n, d) = (space.nloc(), space.dim());
    let row = |e: usize, c1: usize, c2: usize, a: usize| e * d * d * n + (c1 * d + c2) * n + a;
    let mut t = Vec::new();
    // broken Hessian
    for e in 0..space.num_elements() {
        let g = space.geometry(e);
        for q in 0..space.num_volume_points() {
            let x = space.volume_point(e, q);
            let ev = space.eval_basis_at(e, x, true);
            let w = space.volume_weight(q);
            for b in 0..n {
                for c1 in 0..d {
                    for c2 in 0..d {
                        for a in 0..n {
                            t.push((
                                row(e, c1, c2, a),
                                e * n + b,
                                w * ev.hessians[b][c1][c2] * ev.values[a],
                            ));
                        }
                    }
                }
            }
            let _ = g;
        }
    }
    // liftings R (gradient jumps) and B (value jumps)
    for (f, o) in space.mesh().interior_facets().iter().zip(&orient.facets) {
        for (x, wq) in space.facet_quadrature(&f.vertices, f.measure) {
            let b1 = space.eval_basis_at(o.k1, x, false);
            let b2 = space.eval_basis_at(o.k2, x, false);
            for (k, bk, weight) in [(o.k1, &b1, o.alpha), (o.k2, &b2, 1.0 - o.alpha)] {
                if weight == 0.0 {
                    continue;
                }
                let inv = 1.0 / space.geometry(k).measure;
                for c1 in 0..d {
                    for c2 in 0..d {
                        for a in 0..n {
                            let r = row(k, c1, c2, a);
                            let sr = -inv * wq * weight * bk.values[a] * o.normal[c2];
                            let sb = inv * wq * weight * bk.grads[a][c2] * o.normal[c1];
                            for b in 0..n {
                                t.push((r, o.k1 * n + b, sr * b1.grads[b][c1] + sb * b1.values[b]));
                                t.push((
                                    r,
                                    o.k2 * n + b,
                                    -sr * b2.grads[b][c1] - sb * b2.values[b],
                                ));
                            }
                        }
                    }
                }
            }
        }
    }
    from_triplets(space.scalar_len() * d * d, space.scalar_len(), &t)
}

/// `∇_DG w` and `L(w)` for every species of `w`.
pub fn dg_gradient(space: &DgSpace, w: &CoeffVec, orient: &FluxOrientation) -> LiftedGradient {
    let broken = broken_gradient_matrix(space);
    let lift = lifting_matrix(space, orient);
    let nv = space.vector_len();
    let mut gradient = vec![0.0; nv * space.species()];
    let mut lifting = vec![0.0; nv * space.species()];
    for i in 0..space.species() {
        let (g, l) = (
            &mut gradient[i * nv..(i + 1) * nv],
            &mut lifting[i * nv..(i + 1) * nv],
        );
        spmv(&broken, w.block(i), g);
        spmv(&lift, w.block(i), l);
        g.iter_mut().zip(l.iter()).for_each(|(g, l)| *g -= l);
    }
    LiftedGradient { gradient, lifting }
}

/// Coefficients of `H_DG w` for every species, species-major.
pub fn dg_hessian(space: &DgSpace, w: &CoeffVec, orient: &FluxOrientation) -> Vec<f64> {
    let h = hessian_matrix(space, orient);
    let nh = h.nrows();
    let mut out = vec![0.0; nh * space.species()];
    for i in 0..space.species() {
        spmv(&h, w.block(i), &mut out[i * nh..(i + 1) * nh]);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{orient_facets, FluxRule, Mesh};

    #[test]
    fn two_element_lifting() {
        let s = DgSpace::new(Mesh::interval(0.0, 1.0, 2).unwrap(), 0, 1).unwrap();
        let o = orient_facets(s.mesh(), FluxRule::Directional, 1.0).unwrap();
        let w = CoeffVec::new(vec![3.0, 1.25], 1).unwrap();
        let g = dg_gradient(&s, &w, &o);
        assert!((g.lifting[0] - 2.0 * (3.0 - 1.25)).abs() < 1e-14);
        assert_eq!(g.lifting[1], 0.0);
        assert!((g.gradient[0] + 3.5).abs() < 1e-14);
    }

    #[test]
    fn continuous_fields_have_no_lifting() {
        let s = DgSpace::new(
            Mesh::structured_triangles(3, 3, [0.0, 1.0, 0.0, 1.0]).unwrap(),
            2,
            1,
        )
        .unwrap();
        let o = orient_facets(s.mesh(), FluxRule::Standard, 0.5).unwrap();
        let w = s
            .l2_project(|x, v| v[0] = 1.0 + x[0] - 2.0 * x[0] * x[1] + x[1] * x[1])
            .unwrap();
        let g = dg_gradient(&s, &w, &o);
        assert!(g.lifting.iter().all(|v| v.abs() < 1e-12));
        // gradient of the polynomial at an interior point of element 4
        let e = 4;
        let xi = [0.25, 0.25];
        let x = s.geometry(e).to_physical(xi);
        let ev = s.basis().eval(xi, false);
        let n = s.nloc();
        let gx: f64 = (0..n)
            .map(|a| g.gradient[e * 2 * n + a] * ev.values[a])
            .sum();
        let gy: f64 = (0..n)
            .map(|a| g.gradient[e * 2 * n + n + a] * ev.values[a])
            .sum();
        assert!((gx - (1.0 - 2.0 * x[1])).abs() < 1e-12);
        assert!((gy - (-2.0 * x[0] + 2.0 * x[1])).abs() < 1e-12);
    }

    #[test]
    fn constants_have_zero_gradient_and_hessian() {
        let s = DgSpace::new(
            Mesh::structured_triangles(2, 2, [0.0, 1.0, 0.0, 1.0]).unwrap(),
            2,
            1,
        )
        .unwrap();
        let o = orient_facets(s.mesh(), FluxRule::Directional, 1.0).unwrap();
        let w = s.constant(&[2.5]);
        assert!(dg_gradient(&s, &w, &o)
            .gradient
            .iter()
            .all(|v| v.abs() < 1e-12));
        assert!(dg_hessian(&s, &w, &o).iter().all(|v| v.abs() < 1e-11));
    }

    #[test]
    fn single_element_quadratic_hessian() {
        let s = DgSpace::new(
            Mesh::structured_triangles(1, 1, [0.0, 1.0, 0.0, 1.0]).unwrap(),
            2,
            1,
        )
        .unwrap();
        // Restrict to one element by giving the mesh a single cell: x² is smooth
        // across the diagonal, so both liftings vanish.
        let o = orient_facets(s.mesh(), FluxRule::Directional, 1.0).unwrap();
        let w = s.l2_project(|x, v| v[0] = x[0] * x[0]).unwrap();
        let h = dg_hessian(&s, &w, &o);
        let n = s.nloc();
        for e in 0..2 {
            let base = e * 4 * n;
            assert!((h[base] - 2.0).abs() < 1e-11);
            for k in 1..4 {
                assert!(h[base + k * n].abs() < 1e-11);
            }
            for k in 0..4 {
                for a in 1..n {
                    assert!(h[base + k * n + a].abs() < 1e-11);
                }
            }
        }
    }
}
