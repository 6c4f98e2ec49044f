//! State-independent operators: mass `M`, LDG gradient `B`, stabilization `S`
//! and the regularization matrix `C`, all scalar (one species) and sparse.
//!
//! `B` maps scalar coefficients to vector-field coefficients and represents
//! `b_h(w, ψ) = −Σ_F ∫ ⟨w⟩_α [ψ]_N − ∫_{∂Ω} w ψ·n + Σ_K ∫_K w ∇·ψ`.

use std::sync::Arc;

use nalgebra_sparse::CsrMatrix;
use serde::{Deserialize, Serialize};

use crate::dgspace::{lifting, DgSpace};
use crate::error::{invalid, Error, Result};
use crate::linalg::sparse::{from_triplets, spmv};
use crate::linalg::{BlockPattern, BlockSparse};
use crate::mesh::{FluxOrientation, Point};
use crate::models::ModelSpec;

/// Regularization form: `H1` (ℓ = 1) or `H2` (ℓ = 2, two dimensions only).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RegularizationKind {
    H1,
    H2,
}

impl RegularizationKind {
    /// ℓ = 1 in 1D or when `s''A` is continuous up to the boundary, else ℓ = 2.
    pub fn auto(dim: usize, model: &ModelSpec) -> RegularizationKind {
        if dim == 1 || model.product_continuous_on_closure() {
            RegularizationKind::H1
        } else {
            RegularizationKind::H2
        }
    }
}

pub fn assemble_mass(space: &DgSpace) -> CsrMatrix<f64> {
    let n = space.nloc();
    let t: Vec<_> = (0..space.num_elements())
        .flat_map(|e| {
            let m = space.geometry(e).measure;
            (0..n).map(move |a| (e * n + a, e * n + a, m))
        })
        .collect();
    from_triplets(space.scalar_len(), space.scalar_len(), &t)
}

pub fn assemble_gradient(space: &DgSpace, orient: &FluxOrientation) -> CsrMatrix<f64> {
    let (n, d) = (space.nloc(), space.dim());
    let row = |e: usize, c: usize, a: usize| e * d * n + c * n + a;
    let mut t = Vec::new();
    for e in 0..space.num_elements() {
        let meas = space.geometry(e).measure;
        for q in 0..space.num_volume_points() {
            let w = meas * space.volume_weight(q);
            let ph = space.phi(q);
            for a in 0..n {
                let g = space.grad_phi(e, q, a);
                for c in 0..d {
                    for (b, pb) in ph.iter().enumerate() {
                        t.push((row(e, c, a), e * n + b, w * g[c] * pb));
                    }
                }
            }
        }
    }
    for (f, o) in space.mesh().interior_facets().iter().zip(&orient.facets) {
        for (x, wq) in space.facet_quadrature(&f.vertices, f.measure) {
            let b1 = space.eval_basis_at(o.k1, x, false);
            let b2 = space.eval_basis_at(o.k2, x, false);
            // ψ on K1 enters [ψ]_N with +n, on K2 with −n; w enters ⟨w⟩_α with 1−α, α
            for (kp, bp, sp) in [(o.k1, &b1, 1.0), (o.k2, &b2, -1.0)] {
                for (kq, bq, sq) in [(o.k1, &b1, 1.0 - o.alpha), (o.k2, &b2, o.alpha)] {
                    if sq == 0.0 {
                        continue;
                    }
                    for c in 0..d {
                        for a in 0..n {
                            let s = -wq * sp * sq * o.normal[c] * bp.values[a];
                            for b in 0..n {
                                t.push((row(kp, c, a), kq * n + b, s * bq.values[b]));
                            }
                        }
                    }
                }
            }
        }
    }
    for f in space.mesh().boundary_facets() {
        let e = f.element;
        for (x, wq) in space.facet_quadrature(&f.vertices, f.measure) {
            let be = space.eval_basis_at(e, x, false);
            for c in 0..d {
                for a in 0..n {
                    for b in 0..n {
                        t.push((
                            row(e, c, a),
                            e * n + b,
                            -wq * f.normal[c] * be.values[a] * be.values[b],
                        ));
                    }
                }
            }
        }
    }
    from_triplets(space.vector_len(), space.scalar_len(), &t)
}

/// `Σ_F weight_F ∫_F [w][v]` over interior facets.
fn jump_matrix(space: &DgSpace, weight: impl Fn(usize) -> f64) -> CsrMatrix<f64> {
    let n = space.nloc();
    let mut t = Vec::new();
    for (fi, f) in space.mesh().interior_facets().iter().enumerate() {
        let wf = weight(fi);
        let [k1, k2] = f.elements;
        for (x, wq) in space.facet_quadrature(&f.vertices, f.measure) {
            let b1 = space.eval_basis_at(k1, x, false);
            let b2 = space.eval_basis_at(k2, x, false);
            for (kp, bp, sp) in [(k1, &b1, 1.0), (k2, &b2, -1.0)] {
                for (kq, bq, sq) in [(k1, &b1, 1.0), (k2, &b2, -1.0)] {
                    for a in 0..n {
                        for b in 0..n {
                            t.push((
                                kp * n + a,
                                kq * n + b,
                                wf * wq * sp * sq * bp.values[a] * bq.values[b],
                            ));
                        }
                    }
                }
            }
        }
    }
    from_triplets(space.scalar_len(), space.scalar_len(), &t)
}

/// `Σ_F weight_F ∫_F [∇_h w]·[∇_h v]` over interior facets.
fn gradient_jump_matrix(space: &DgSpace, weight: impl Fn(usize) -> f64) -> CsrMatrix<f64> {
    let (n, d) = (space.nloc(), space.dim());
    let mut t = Vec::new();
    for (fi, f) in space.mesh().interior_facets().iter().enumerate() {
        let wf = weight(fi);
        let [k1, k2] = f.elements;
        for (x, wq) in space.facet_quadrature(&f.vertices, f.measure) {
            let b1 = space.eval_basis_at(k1, x, false);
            let b2 = space.eval_basis_at(k2, x, false);
            for (kp, bp, sp) in [(k1, &b1, 1.0), (k2, &b2, -1.0)] {
                for (kq, bq, sq) in [(k1, &b1, 1.0), (k2, &b2, -1.0)] {
                    for a in 0..n {
                        for b in 0..n {
                            let dot: f64 = (0..d).map(|c| bp.grads[a][c] * bq.grads[b][c]).sum();
                            t.push((kp * n + a, kq * n + b, wf * wq * sp * sq * dot));
                        }
                    }
                }
            }
        }
    }
    from_triplets(space.scalar_len(), space.scalar_len(), &t)
}

/// Stabilization `s_h(w, λ) = Σ_F η_F ∫_F [w]_N·[λ]_N` with `η_F = A_sup / 𝗁_F`.
pub fn assemble_stability(space: &DgSpace, a_sup: f64) -> Result<(CsrMatrix<f64>, Vec<f64>)> {
    if !(a_sup > 0.0 && a_sup.is_finite()) {
        return Err(invalid(format!("A_sup must be positive, got {a_sup}")));
    }
    let eta: Vec<f64> = space
        .mesh()
        .interior_facets()
        .iter()
        .map(|f| a_sup / f.size)
        .collect();
    let s = jump_matrix(space, |f| eta[f]);
    Ok((s, eta))
}

/// `AᵀD A` for a sparse `A` and diagonal `D` given by `diag_inv[row / block]`.
fn gram_scaled(a: &CsrMatrix<f64>, row_scale: impl Fn(usize) -> f64) -> CsrMatrix<f64> {
    let mut scaled = a.clone();
    let off = scaled.row_offsets().to_vec();
    let vals = scaled.values_mut();
    for r in 0..off.len() - 1 {
        let s = row_scale(r);
        for v in &mut vals[off[r]..off[r + 1]] {
            *v *= s;
        }
    }
    &a.transpose() * &scaled
}

/// Regularization matrix `C` of the H¹-type (ℓ = 1) or H²-type (ℓ = 2) form.
pub fn assemble_regularization(
    space: &DgSpace,
    orient: &FluxOrientation,
    kind: RegularizationKind,
) -> Result<CsrMatrix<f64>> {
    let (n, d) = (space.nloc(), space.dim());
    if kind == RegularizationKind::H2 && d == 1 {
        return Err(invalid(
            "the H2-type regularization is only available in two dimensions",
        ));
    }
    let facets = space.mesh().interior_facets();
    let mass = assemble_mass(space);
    let gdg = lifting::dg_gradient_matrix(space, orient);
    let meas = |r: usize, block: usize| space.geometry(r / block).measure;
    let mut c = &mass + &gram_scaled(&gdg, |r| meas(r, d * n));
    match kind {
        RegularizationKind::H1 => {
            c = &c + &jump_matrix(space, |f| 1.0 / facets[f].size);
        }
        RegularizationKind::H2 => {
            let h = lifting::hessian_matrix(space, orient);
            c = &c + &gram_scaled(&h, |r| meas(r, d * d * n));
            c = &c + &gradient_jump_matrix(space, |f| 1.0 / facets[f].size);
            c = &c + &jump_matrix(space, |f| facets[f].size.powi(-3));
        }
    }
    Ok(c)
}

/// Moments `∫_Ω g · φ` of a volume density `g(x, out)`, species-major.
pub fn load_vector<F>(space: &DgSpace, g: F) -> Result<Vec<f64>>
where
    F: Fn(Point, &mut [f64]),
{
    let mut out = vec![0.0; space.len()];
    let mut val = vec![0.0; space.species()];
    for e in 0..space.num_elements() {
        let meas = space.geometry(e).measure;
        for q in 0..space.num_volume_points() {
            g(space.volume_point(e, q), &mut val);
            if val.iter().any(|v| !v.is_finite()) {
                return Err(Error::NumericDomain {
                    element: e,
                    point: q,
                });
            }
            let wq = meas * space.volume_weight(q);
            for (i, v) in val.iter().enumerate() {
                for (a, ph) in space.phi(q).iter().enumerate() {
                    out[space.index(i, e, a)] += wq * v * ph;
                }
            }
        }
    }
    Ok(out)
}

/// Moments `∫_∂Ω g_N · φ` of boundary flux data `g(x, n, out)`.
pub fn boundary_load_vector<F>(space: &DgSpace, g: F) -> Result<Vec<f64>>
where
    F: Fn(Point, Point, &mut [f64]),
{
    let mut out = vec![0.0; space.len()];
    let mut val = vec![0.0; space.species()];
    for (k, f) in space.mesh().boundary_facets().iter().enumerate() {
        for (x, wq) in space.facet_quadrature(&f.vertices, f.measure) {
            g(x, f.normal, &mut val);
            if val.iter().any(|v| !v.is_finite()) {
                return Err(Error::NumericDomain {
                    element: f.element,
                    point: k,
                });
            }
            let ev = space.eval_basis_at(f.element, x, false);
            for (i, v) in val.iter().enumerate() {
                for (a, ph) in ev.values.iter().enumerate() {
                    out[space.index(i, f.element, a)] += wq * v * ph;
                }
            }
        }
    }
    Ok(out)
}

/// Assembled operators plus the per-element pieces of `G = M⁻¹B` used to build Jacobians.
#[derive(Clone, Debug)]
pub struct OperatorSet {
    pub mass: CsrMatrix<f64>,
    pub grad: CsrMatrix<f64>,
    /// `M⁻¹B`.
    pub grad_scaled: CsrMatrix<f64>,
    pub stab: CsrMatrix<f64>,
    pub reg: CsrMatrix<f64>,
    pub eta_f: Vec<f64>,
    pub reg_kind: RegularizationKind,
    inv_measure: Vec<f64>,
    /// Elements whose coefficients enter `G` on element `e` (sorted).
    pub stencil: Vec<Vec<usize>>,
    /// Dense `G_e`, row-major `(d · nloc) × (stencil.len() · nloc)`.
    pub local_grad: Vec<Vec<f64>>,
    /// Block pattern of the Newton Jacobian.
    pub pattern: Arc<BlockPattern>,
    /// `I_N ⊗ S` and `I_N ⊗ C` on that pattern.
    pub stab_blocks: BlockSparse,
    pub reg_blocks: BlockSparse,
    nloc: usize,
    dim: usize,
}

impl OperatorSet {
    pub fn new(
        space: &DgSpace,
        model: &ModelSpec,
        orient: &FluxOrientation,
        reg_kind: RegularizationKind,
    ) -> Result<OperatorSet> {
        let (n, d, nel) = (space.nloc(), space.dim(), space.num_elements());
        let mass = assemble_mass(space);
        let grad = assemble_gradient(space, orient);
        let (stab, eta_f) = assemble_stability(space, model.a_sup)?;
        let reg = assemble_regularization(space, orient, reg_kind)?;
        let inv_measure: Vec<f64> = (0..nel).map(|e| 1.0 / space.geometry(e).measure).collect();

        let mut grad_scaled = grad.clone();
        let off = grad_scaled.row_offsets().to_vec();
        for r in 0..off.len() - 1 {
            let s = inv_measure[r / (d * n)];
            for v in &mut grad_scaled.values_mut()[off[r]..off[r + 1]] {
                *v *= s;
            }
        }

        let mut stencil = vec![Vec::new(); nel];
        for (r, c, _) in grad_scaled.triplet_iter() {
            stencil[r / (d * n)].push(c / n);
        }
        for s in &mut stencil {
            s.sort_unstable();
            s.dedup();
        }
        let mut local_grad = Vec::with_capacity(nel);
        for e in 0..nel {
            let st = &stencil[e];
            let cols = st.len() * n;
            let mut g = vec![0.0; d * n * cols];
            for lr in 0..d * n {
                let r = e * d * n + lr;
                for k in off[r]..off[r + 1] {
                    let col = grad_scaled.col_indices()[k];
                    let pos = st.binary_search(&(col / n)).expect("stencil element");
                    g[lr * cols + pos * n + col % n] = grad_scaled.values()[k];
                }
            }
            local_grad.push(g);
        }

        let mut pairs = BlockPattern::pairs_of_scalar(&reg, n);
        pairs.extend(BlockPattern::pairs_of_scalar(&stab, n));
        for st in &stencil {
            for &a in st {
                for &b in st {
                    pairs.push((a, b));
                }
            }
        }
        let pattern = Arc::new(BlockPattern::from_pairs(nel, pairs));
        let mut stab_blocks = BlockSparse::zeros(pattern.clone(), model.species, n);
        stab_blocks.add_scalar(&stab, 1.0);
        let mut reg_blocks = BlockSparse::zeros(pattern.clone(), model.species, n);
        reg_blocks.add_scalar(&reg, 1.0);
        Ok(OperatorSet {
            mass,
            grad,
            grad_scaled,
            stab,
            reg,
            eta_f,
            reg_kind,
            inv_measure,
            stencil,
            local_grad,
            pattern,
            stab_blocks,
            reg_blocks,
            nloc: n,
            dim: d,
        })
    }

    /// Apply `M⁻¹` in place to a scalar-layout vector of one species.
    pub fn mass_inv_scalar(&self, x: &mut [f64]) {
        for (k, v) in x.iter_mut().enumerate() {
            *v *= self.inv_measure[k / self.nloc];
        }
    }

    /// Apply `M⁻¹` in place to a vector-field-layout vector of one species.
    pub fn mass_inv_vector(&self, x: &mut [f64]) {
        let b = self.nloc * self.dim;
        for (k, v) in x.iter_mut().enumerate() {
            *v *= self.inv_measure[k / b];
        }
    }

    pub fn inv_measure(&self, e: usize) -> f64 {
        self.inv_measure[e]
    }

    /// `Z = M⁻¹ B W` for one species.
    pub fn apply_grad_scaled(&self, w: &[f64], z: &mut [f64]) {
        spmv(&self.grad_scaled, w, z);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::sparse::to_dense;
    use crate::mesh::{orient_facets, FluxRule, Mesh};

    fn two_elements() -> (DgSpace, FluxOrientation) {
        let s = DgSpace::new(Mesh::interval(0.0, 1.0, 2).unwrap(), 0, 1).unwrap();
        let o = orient_facets(s.mesh(), FluxRule::Directional, 1.0).unwrap();
        (s, o)
    }

    #[test]
    fn hand_assembled_two_element_operators() {
        let (s, o) = two_elements();
        let m = to_dense(&assemble_mass(&s));
        let b = to_dense(&assemble_gradient(&s, &o));
        let (st, eta) = assemble_stability(&s, 2.0).unwrap();
        let c = to_dense(&assemble_regularization(&s, &o, RegularizationKind::H1).unwrap());
        let close = |a: &nalgebra::DMatrix<f64>, e: [f64; 4]| {
            (0..4).all(|k| (a[(k / 2, k % 2)] - e[k]).abs() < 1e-12)
        };
        assert!(close(&m, [0.5, 0.0, 0.0, 0.5]));
        assert!(close(&b, [1.0, -1.0, 0.0, 0.0]), "{b}");
        assert_eq!(eta, vec![4.0]);
        assert!(close(&to_dense(&st), [4.0, -4.0, -4.0, 4.0]));
        assert!(close(&c, [4.5, -4.0, -4.0, 4.5]), "{c}");
        assert!(
            RegularizationKind::auto(1, &ModelSpec::porous_medium(2.0).unwrap())
                == RegularizationKind::H1
        );
        assert!(assemble_regularization(&s, &o, RegularizationKind::H2).is_err());
    }

    #[test]
    fn dg_gradient_is_minus_scaled_b() {
        for (mesh, rule, alpha) in [
            (
                Mesh::interval(0.0, 1.0, 5).unwrap(),
                FluxRule::Standard,
                0.3,
            ),
            (
                Mesh::structured_triangles(3, 2, [0.0, 1.0, 0.0, 1.0]).unwrap(),
                FluxRule::Directional,
                1.0,
            ),
            (
                Mesh::structured_triangles(2, 2, [0.0, 1.0, 0.0, 1.0]).unwrap(),
                FluxRule::Standard,
                0.5,
            ),
        ] {
            let s = DgSpace::new(mesh, 2, 1).unwrap();
            let o = orient_facets(s.mesh(), rule, alpha).unwrap();
            let model = ModelSpec::porous_medium(2.0).unwrap();
            let ops = OperatorSet::new(&s, &model, &o, RegularizationKind::H1).unwrap();
            let g = to_dense(&lifting::dg_gradient_matrix(&s, &o));
            let gb = to_dense(&ops.grad_scaled);
            assert!((g + gb).amax() < 1e-11);
        }
    }

    #[test]
    fn alpha_changes_only_interior_entries() {
        let s = DgSpace::new(Mesh::interval(0.0, 1.0, 3).unwrap(), 1, 1).unwrap();
        let b1 = to_dense(&assemble_gradient(
            &s,
            &orient_facets(s.mesh(), FluxRule::Standard, 1.0).unwrap(),
        ));
        let b2 = to_dense(&assemble_gradient(
            &s,
            &orient_facets(s.mesh(), FluxRule::Standard, 0.5).unwrap(),
        ));
        let diff = &b1 - &b2;
        // element 0 rows: its left boundary contributes identically
        assert!(diff.amax() > 0.1);
        let b3 = to_dense(&assemble_gradient(
            &s,
            &orient_facets(s.mesh(), FluxRule::Standard, 0.5).unwrap(),
        ));
        assert_eq!(b2, b3);
    }
}
