//! Broken polynomial spaces `S_p(T_h)^N` and `M_p(T_h)^N` over a [`Mesh`].
//!
//! Scalar coefficients are laid out species-major:
//! `index = i · (nel · nloc) + e · nloc + a`.
//! Vector-valued fields (one value per space direction) use
//! `i · (nel · d · nloc) + e · d · nloc + c · nloc + a`.

pub mod basis;
pub mod lifting;
pub mod quadrature;

use std::ops::{Deref, DerefMut};

use crate::error::{invalid, Error, Result};
use crate::mesh::{reference_coords, Mesh, Point};
pub use basis::{local_dim, BasisEval, ReferenceBasis};
pub use lifting::{dg_gradient, dg_hessian, LiftedGradient};

/// Flat coefficient vector for `N` species.
#[derive(Clone, Debug, PartialEq)]
pub struct CoeffVec {
    data: Vec<f64>,
    species: usize,
}

impl CoeffVec {
    pub fn new(data: Vec<f64>, species: usize) -> Result<CoeffVec> {
        if species == 0 || data.len() % species != 0 {
            return Err(invalid(format!(
                "coefficient length {} is not a multiple of the species count {species}",
                data.len()
            )));
        }
        Ok(CoeffVec { data, species })
    }

    pub fn zeros(species: usize, block_len: usize) -> CoeffVec {
        CoeffVec {
            data: vec![0.0; species * block_len],
            species,
        }
    }

    pub fn species(&self) -> usize {
        self.species
    }

    pub fn block_len(&self) -> usize {
        self.data.len() / self.species
    }

    pub fn block(&self, i: usize) -> &[f64] {
        let n = self.block_len();
        &self.data[i * n..(i + 1) * n]
    }

    pub fn block_mut(&mut self, i: usize) -> &mut [f64] {
        let n = self.block_len();
        &mut self.data[i * n..(i + 1) * n]
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }
}

impl Deref for CoeffVec {
    type Target = [f64];
    fn deref(&self) -> &[f64] {
        &self.data
    }
}

impl DerefMut for CoeffVec {
    fn deref_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }
}

/// Affine geometry of one element.
#[derive(Clone, Copy, Debug)]
pub struct ElementGeometry {
    pub origin: Point,
    pub jac: [[f64; 2]; 2],
    /// `J⁻ᵀ`, maps reference gradients to physical gradients.
    pub jinv_t: [[f64; 2]; 2],
    pub measure: f64,
}

impl ElementGeometry {
    pub fn to_physical(&self, xi: Point) -> Point {
        let j = &self.jac;
        [
            self.origin[0] + j[0][0] * xi[0] + j[0][1] * xi[1],
            self.origin[1] + j[1][0] * xi[0] + j[1][1] * xi[1],
        ]
    }

    pub fn grad(&self, g: Point) -> Point {
        let m = &self.jinv_t;
        [
            m[0][0] * g[0] + m[0][1] * g[1],
            m[1][0] * g[0] + m[1][1] * g[1],
        ]
    }

    /// `J⁻ᵀ H J⁻¹`.
    pub fn hessian(&self, h: [[f64; 2]; 2]) -> [[f64; 2]; 2] {
        let m = &self.jinv_t;
        let mut t = [[0.0; 2]; 2];
        for r in 0..2 {
            for s in 0..2 {
                let mut acc = 0.0;
                for k in 0..2 {
                    for l in 0..2 {
                        acc += m[r][k] * h[k][l] * m[s][l];
                    }
                }
                t[r][s] = acc;
            }
        }
        t
    }
}

/// Broken polynomial space of degree `p` for `N` species.
#[derive(Clone, Debug)]
pub struct DgSpace {
    mesh: Mesh,
    degree: usize,
    species: usize,
    nloc: usize,
    basis: ReferenceBasis,
    vol_points: Vec<Point>,
    vol_weights: Vec<f64>,
    /// `phi[q * nloc + a]` at volume quadrature points.
    phi: Vec<f64>,
    /// Reference gradients, same indexing as `phi`.
    dphi_ref: Vec<Point>,
    facet_params: Vec<f64>,
    facet_weights: Vec<f64>,
    geometry: Vec<ElementGeometry>,
}

impl DgSpace {
    pub fn new(mesh: Mesh, degree: usize, species: usize) -> Result<DgSpace> {
        if species == 0 {
            return Err(invalid("species count must be at least one"));
        }
        if degree > 8 {
            return Err(invalid(format!(
                "polynomial degree {degree} is not supported (max 8)"
            )));
        }
        let dim = mesh.dim();
        let basis = ReferenceBasis::new(dim, degree);
        let nloc = basis.len();
        let (vol_points, vol_weights) = quadrature::reference_rule(dim, degree + 2);
        let mut phi = Vec::with_capacity(vol_points.len() * nloc);
        let mut dphi_ref = Vec::with_capacity(vol_points.len() * nloc);
        for p in &vol_points {
            let ev = basis.eval(*p, false);
            phi.extend_from_slice(&ev.values);
            dphi_ref.extend_from_slice(&ev.grads);
        }
        let (facet_params, facet_weights) = quadrature::gauss_legendre(degree + 2);
        let geometry = (0..mesh.num_elements())
            .map(|e| {
                let (origin, jac) = mesh.affine_map(e);
                let det = jac[0][0] * jac[1][1] - jac[0][1] * jac[1][0];
                let jinv_t = [
                    [jac[1][1] / det, -jac[1][0] / det],
                    [-jac[0][1] / det, jac[0][0] / det],
                ];
                ElementGeometry {
                    origin,
                    jac,
                    jinv_t,
                    measure: mesh.measure(e),
                }
            })
            .collect();
        Ok(DgSpace {
            mesh,
            degree,
            species,
            nloc,
            basis,
            vol_points,
            vol_weights,
            phi,
            dphi_ref,
            facet_params,
            facet_weights,
            geometry,
        })
    }

    pub fn mesh(&self) -> &Mesh {
        &self.mesh
    }

    pub fn dim(&self) -> usize {
        self.mesh.dim()
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn species(&self) -> usize {
        self.species
    }

    pub fn nloc(&self) -> usize {
        self.nloc
    }

    pub fn num_elements(&self) -> usize {
        self.mesh.num_elements()
    }

    /// Scalar dofs of one species.
    pub fn scalar_len(&self) -> usize {
        self.num_elements() * self.nloc
    }

    /// Total length of a coefficient vector.
    pub fn len(&self) -> usize {
        self.species * self.scalar_len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Vector-field dofs of one species.
    pub fn vector_len(&self) -> usize {
        self.scalar_len() * self.dim()
    }

    pub fn index(&self, species: usize, element: usize, local: usize) -> usize {
        species * self.scalar_len() + element * self.nloc + local
    }

    pub fn basis(&self) -> &ReferenceBasis {
        &self.basis
    }

    pub fn geometry(&self, e: usize) -> &ElementGeometry {
        &self.geometry[e]
    }

    pub fn num_volume_points(&self) -> usize {
        self.vol_weights.len()
    }

    /// Normalized volume weight (the element integral is `|K| Σ w_q f_q`).
    pub fn volume_weight(&self, q: usize) -> f64 {
        self.vol_weights[q]
    }

    pub fn volume_ref_point(&self, q: usize) -> Point {
        self.vol_points[q]
    }

    pub fn volume_point(&self, e: usize, q: usize) -> Point {
        self.geometry[e].to_physical(self.vol_points[q])
    }

    /// Basis values at volume point `q` (length `nloc`).
    pub fn phi(&self, q: usize) -> &[f64] {
        &self.phi[q * self.nloc..(q + 1) * self.nloc]
    }

    pub fn grad_phi(&self, e: usize, q: usize, a: usize) -> Point {
        self.geometry[e].grad(self.dphi_ref[q * self.nloc + a])
    }

    /// Quadrature points and weights (weights include the facet length) on a
    /// facet with the given end points. A point facet in 1D has one point of weight 1.
    pub fn facet_quadrature(&self, vertices: &[Point; 2], measure: f64) -> Vec<(Point, f64)> {
        if self.dim() == 1 {
            return vec![(vertices[0], 1.0)];
        }
        let [p, q] = vertices;
        self.facet_params
            .iter()
            .zip(&self.facet_weights)
            .map(|(s, w)| {
                (
                    [p[0] + s * (q[0] - p[0]), p[1] + s * (q[1] - p[1])],
                    w * measure,
                )
            })
            .collect()
    }

    /// Values, physical gradients and (optionally) physical Hessians of the
    /// basis of element `e` at physical point `x`.
    pub fn eval_basis_at(&self, e: usize, x: Point, with_hessian: bool) -> BasisEval {
        let g = &self.geometry[e];
        let xi = reference_coords(g.origin, g.jac, x);
        let mut ev = self.basis.eval(xi, with_hessian);
        for gr in ev.grads.iter_mut() {
            *gr = g.grad(*gr);
        }
        for h in ev.hessians.iter_mut() {
            *h = g.hessian(*h);
        }
        ev
    }

    pub fn zeros(&self) -> CoeffVec {
        CoeffVec::zeros(self.species, self.scalar_len())
    }

    /// Coefficient vector of the per-species constant `values`.
    pub fn constant(&self, values: &[f64]) -> CoeffVec {
        assert_eq!(values.len(), self.species);
        let mut w = self.zeros();
        for (i, v) in values.iter().enumerate() {
            for e in 0..self.num_elements() {
                let k = self.index(i, e, 0);
                w[k] = *v;
            }
        }
        w
    }

    /// L² projection of the vector function `f(x, out)` onto the space.
    pub fn l2_project<F>(&self, f: F) -> Result<CoeffVec>
    where
        F: Fn(Point, &mut [f64]),
    {
        let mut w = self.zeros();
        let mut val = vec![0.0; self.species];
        for e in 0..self.num_elements() {
            for q in 0..self.num_volume_points() {
                let x = self.volume_point(e, q);
                f(x, &mut val);
                if val.iter().any(|v| !v.is_finite()) {
                    return Err(Error::NumericDomain {
                        element: e,
                        point: q,
                    });
                }
                let wq = self.vol_weights[q];
                for (i, v) in val.iter().enumerate() {
                    for (a, ph) in self.phi(q).iter().enumerate() {
                        let k = self.index(i, e, a);
                        w[k] += wq * v * ph;
                    }
                }
            }
        }
        Ok(w)
    }

    /// Value of the field in element `e` at reference point `xi`.
    pub fn eval_field(&self, w: &CoeffVec, e: usize, xi: Point) -> Result<Vec<f64>> {
        if e >= self.num_elements() {
            return Err(Error::OutOfRange(format!(
                "element {e} of {}",
                self.num_elements()
            )));
        }
        if w.len() != self.len() {
            return Err(invalid(format!(
                "coefficient length {} != space length {}",
                w.len(),
                self.len()
            )));
        }
        let ev = self.basis.eval(xi, false);
        Ok((0..self.species)
            .map(|i| {
                (0..self.nloc)
                    .map(|a| w[self.index(i, e, a)] * ev.values[a])
                    .sum()
            })
            .collect())
    }

    /// Value of the field at physical point `x`, if `x` lies in the domain.
    pub fn eval_at(&self, w: &CoeffVec, x: Point) -> Option<Vec<f64>> {
        let e = self.mesh.locate(x)?;
        let g = &self.geometry[e];
        self.eval_field(w, e, reference_coords(g.origin, g.jac, x))
            .ok()
    }

    /// Values of the field of every species at volume point `q` of element `e`.
    pub fn eval_at_volume_point(&self, w: &[f64], e: usize, q: usize, out: &mut [f64]) {
        let ph = self.phi(q);
        for (i, o) in out.iter_mut().enumerate() {
            let base = self.index(i, e, 0);
            *o = w[base..base + self.nloc]
                .iter()
                .zip(ph)
                .map(|(c, p)| c * p)
                .sum();
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn projection_is_idempotent_on_polynomials() {
        let mesh = Mesh::structured_triangles(3, 2, [0.0, 1.0, 0.0, 1.0]).unwrap();
        let s = DgSpace::new(mesh, 3, 2).unwrap();
        let f = |x: Point, out: &mut [f64]| {
            out[0] = 1.0 + x[0] * x[0] * x[1] - 2.0 * x[1].powi(3);
            out[1] = x[0] - x[1];
        };
        let w = s.l2_project(f).unwrap();
        for e in [0, 3, 11] {
            let v = s.eval_field(&w, e, [0.2, 0.3]).unwrap();
            let x = s.geometry(e).to_physical([0.2, 0.3]);
            let mut ex = [0.0; 2];
            f(x, &mut ex);
            assert!((v[0] - ex[0]).abs() < 1e-12 && (v[1] - ex[1]).abs() < 1e-12);
        }
    }

    #[test]
    fn linear_function_at_midpoint() {
        let mesh = Mesh::interval(0.0, 1.0, 2).unwrap();
        let s = DgSpace::new(mesh, 1, 1).unwrap();
        let w = s.l2_project(|x, o| o[0] = x[0]).unwrap();
        let v = s.eval_field(&w, 0, [0.5, 0.0]).unwrap();
        assert!((v[0] - 0.25).abs() < 1e-14);
        assert!(s.eval_field(&w, 2, [0.5, 0.0]).is_err());
    }

    #[test]
    fn sin_squared_mass() {
        let pi = std::f64::consts::PI;
        let mesh = Mesh::interval(-pi / 4.0, 5.0 * pi / 4.0, 118).unwrap();
        let s = DgSpace::new(mesh, 2, 1).unwrap();
        let w = s
            .l2_project(|x, o| {
                o[0] = if (0.0..=pi).contains(&x[0]) {
                    x[0].sin().powi(2)
                } else {
                    0.0
                }
            })
            .unwrap();
        let mass: f64 = (0..s.num_elements())
            .map(|e| s.geometry(e).measure * w[s.index(0, e, 0)])
            .sum();
        assert!((mass - pi / 2.0).abs() < 1e-6, "{mass}");
    }

    #[test]
    fn non_finite_projection_is_rejected() {
        let mesh = Mesh::interval(0.0, 1.0, 2).unwrap();
        let s = DgSpace::new(mesh, 1, 1).unwrap();
        assert!(matches!(
            s.l2_project(|_, o| o[0] = f64::NAN),
            Err(Error::NumericDomain { .. })
        ));
    }

    #[test]
    fn projection_error_converges() {
        let errs: Vec<f64> = [4, 8, 16]
            .iter()
            .map(|&m| {
                let s = DgSpace::new(Mesh::interval(0.0, 1.0, m).unwrap(), 1, 1).unwrap();
                let f = |x: f64| (x - 2.0).powi(2) / 60.0 + (3.0 * x).sin();
                let w = s.l2_project(|x, o| o[0] = f(x[0])).unwrap();
                let (pts, wts) = quadrature::gauss_legendre(8);
                let mut e2 = 0.0;
                for e in 0..m {
                    let g = s.geometry(e);
                    for (p, wq) in pts.iter().zip(&wts) {
                        let v = s.eval_field(&w, e, [*p, 0.0]).unwrap()[0];
                        e2 += g.measure * wq * (v - f(g.to_physical([*p, 0.0])[0])).powi(2);
                    }
                }
                e2.sqrt()
            })
            .collect();
        for w in errs.windows(2) {
            let r = (w[0] / w[1]).log2();
            assert!((r - 2.0).abs() < 0.1, "rate {r}");
        }
    }

    #[test]
    fn mass_block_conditioning() {
        // The basis is orthonormal, so each element mass block is |K| I.
        for p in 0..=5 {
            let s = DgSpace::new(
                Mesh::structured_triangles(1, 1, [0.0, 1.0, 0.0, 1.0]).unwrap(),
                p,
                1,
            )
            .unwrap();
            let n = s.nloc();
            let mut m = nalgebra::DMatrix::<f64>::zeros(n, n);
            for q in 0..s.num_volume_points() {
                let ph = s.phi(q);
                for a in 0..n {
                    for b in 0..n {
                        m[(a, b)] += s.volume_weight(q) * ph[a] * ph[b];
                    }
                }
            }
            let ev = m.symmetric_eigen().eigenvalues;
            let c = ev.max() / ev.min();
            assert!(c < 1e3 && (c - 1.0).abs() < 1e-10, "p={p} cond={c}");
        }
    }
}
