//! State-dependent part of the scheme: per-element nonlinear blocks, the
//! reduced stiffness `Gᵀ Ê(W) G` with `G = M⁻¹B`, the fully discrete residual
//! and its frozen (quasi-Newton) Jacobian.
//!
//! Inside an element block the local index is `i · nloc + a`; per spatial
//! direction the blocks `N̂_K` and `Â_K` are identical, so they are stored once.

use rayon::prelude::*;

use crate::assembly::OperatorSet;
use crate::dgspace::DgSpace;
use crate::error::{invalid, Error, Result};
use crate::linalg::dense::{lu_factor, lu_solve};
use crate::linalg::sparse::spmv_add;
use crate::linalg::BlockSparse;
use crate::models::ModelSpec;

/// Work size above which element loops run in parallel.
const PAR_THRESHOLD: usize = 40_000;

/// Parameters of one backward-Euler step.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SchemeParams {
    pub eps: f64,
    pub tau: f64,
    /// The previous term is the projection of the initial datum.
    pub first_step: bool,
}

impl SchemeParams {
    pub fn validate(&self, model: &ModelSpec) -> Result<()> {
        if !(self.eps >= 0.0 && self.eps.is_finite()) {
            return Err(invalid(format!(
                "regularization weight must be >= 0, got {}",
                self.eps
            )));
        }
        if !(self.tau > 0.0 && self.tau.is_finite()) {
            return Err(invalid(format!(
                "time step must be positive, got {}",
                self.tau
            )));
        }
        if model.bound == crate::models::ReactionBound::Relative && self.tau * model.c_f >= 1.0 {
            return Err(invalid(format!(
                "time step {} violates tau < 1/C_f = {}",
                self.tau,
                1.0 / model.c_f
            )));
        }
        Ok(())
    }
}

/// Element-local data evaluated at a state `W`.
#[derive(Clone, Debug, Default)]
pub struct ElementData {
    /// `N̂_K`, row-major `bs × bs`.
    pub np: Vec<f64>,
    lu: Vec<f64>,
    piv: Vec<usize>,
    /// `Â_K`, row-major `bs × bs`.
    pub ap: Vec<f64>,
    /// `∫_K u(w) φ`.
    pub u_loc: Vec<f64>,
    /// `∫_K f(u(w)) φ`.
    pub f_loc: Vec<f64>,
    /// `∫_K u'(w) φ φ` (Jacobian only).
    pub du: Vec<f64>,
    /// `∫_K f'(u) u'(w) φ φ` (Jacobian only).
    pub df: Vec<f64>,
    /// Σ on this element, `d × bs` (direction-major).
    pub sigma: Vec<f64>,
    /// `Â Σ` on this element, `d × bs`.
    pub y: Vec<f64>,
    /// Dense `G_Kᵀ Ê_K G_K` over the stencil (Jacobian only).
    pub stiff: Vec<f64>,
    pub clamped: usize,
    has_jac: bool,
    pub umin: Vec<f64>,
    pub umax: Vec<f64>,
    // scratch
    wq: Vec<f64>,
    rho: Vec<f64>,
    rho_c: Vec<f64>,
    pmat: Vec<f64>,
    amat: Vec<f64>,
    fvec: Vec<f64>,
    upm: Vec<f64>,
    fpm: Vec<f64>,
    fj: Vec<f64>,
    z: Vec<f64>,
    tmp: Vec<f64>,
    xs: Vec<f64>,
    emat: Vec<f64>,
    eg: Vec<f64>,
}

/// Per-element blocks for the whole mesh plus summary statistics.
#[derive(Clone, Debug, Default)]
pub struct LocalBlocks {
    pub elements: Vec<ElementData>,
    pub clamped: usize,
    pub umin: Vec<f64>,
    pub umax: Vec<f64>,
}

/// The spatial discretization of one model on one space.
#[derive(Clone, Copy)]
pub struct Discretization<'a> {
    pub space: &'a DgSpace,
    pub ops: &'a OperatorSet,
    pub model: &'a ModelSpec,
}

impl<'a> Discretization<'a> {
    pub fn new(space: &'a DgSpace, ops: &'a OperatorSet, model: &'a ModelSpec) -> Result<Self> {
        if space.species() != model.species {
            return Err(invalid(format!(
                "space has {} species but model {} has {}",
                space.species(),
                model.name(),
                model.species
            )));
        }
        Ok(Discretization { space, ops, model })
    }

    fn bs(&self) -> usize {
        self.space.species() * self.space.nloc()
    }

    fn parallel(&self) -> bool {
        self.space.num_elements() * self.space.num_volume_points() * self.bs() * self.bs()
            > PAR_THRESHOLD
    }

    fn check_len(&self, w: &[f64]) -> Result<()> {
        if w.len() != self.space.len() {
            return Err(invalid(format!(
                "state length {} != space length {}",
                w.len(),
                self.space.len()
            )));
        }
        if let Some(k) = w.iter().position(|v| !v.is_finite()) {
            return Err(Error::Diverged(format!(
                "non-finite coefficient at index {k}"
            )));
        }
        Ok(())
    }

    fn prepare(&self, data: &mut ElementData, e: usize, with_jac: bool) {
        let (nsp, bs, d) = (self.space.species(), self.bs(), self.space.dim());
        fn zero(v: &mut Vec<f64>, n: usize) {
            if v.len() == n {
                v.fill(0.0);
            } else {
                v.clear();
                v.resize(n, 0.0);
            }
        }
        fn fit(v: &mut Vec<f64>, n: usize) {
            if v.len() != n {
                v.resize(n, 0.0);
            }
        }
        zero(&mut data.np, bs * bs);
        zero(&mut data.ap, bs * bs);
        zero(&mut data.u_loc, bs);
        zero(&mut data.f_loc, bs);
        fit(&mut data.sigma, d * bs);
        fit(&mut data.y, d * bs);
        fit(&mut data.z, bs);
        fit(&mut data.tmp, bs);
        for v in [&mut data.wq, &mut data.rho, &mut data.rho_c, &mut data.fvec] {
            fit(v, nsp);
        }
        for v in [
            &mut data.pmat,
            &mut data.amat,
            &mut data.upm,
            &mut data.fpm,
            &mut data.fj,
        ] {
            fit(v, nsp * nsp);
        }
        data.umin.clear();
        data.umin.resize(nsp, f64::INFINITY);
        data.umax.clear();
        data.umax.resize(nsp, f64::NEG_INFINITY);
        data.clamped = 0;
        data.has_jac = with_jac;
        if with_jac {
            zero(&mut data.du, bs * bs);
            zero(&mut data.df, bs * bs);
            let m = self.ops.stencil[e].len() * bs;
            zero(&mut data.stiff, m * m);
        }
        if data.piv.len() != bs {
            data.piv = vec![0; bs];
        }
    }

    /// Quadrature pass over element `e`: blocks, local integrals, Σ and ÂΣ.
    fn element_pass(
        &self,
        e: usize,
        w: &[f64],
        data: &mut ElementData,
        with_jac: bool,
    ) -> Result<()> {
        self.prepare(data, e, with_jac);
        let sp = self.space;
        let (nsp, n, d) = (sp.species(), sp.nloc(), sp.dim());
        let bs = nsp * n;
        let meas = sp.geometry(e).measure;
        let model = self.model;
        for q in 0..sp.num_volume_points() {
            sp.eval_at_volume_point(w, e, q, &mut data.wq);
            model.u(&data.wq, &mut data.rho);
            for i in 0..nsp {
                data.umin[i] = data.umin[i].min(data.rho[i]);
                data.umax[i] = data.umax[i].max(data.rho[i]);
            }
            data.rho_c.copy_from_slice(&data.rho);
            if model.clamp_interior(&mut data.rho_c) {
                data.clamped += 1;
            }
            model.mobility_product(&data.rho_c, &mut data.pmat);
            model.diffusion(&data.rho, &mut data.amat);
            model.reaction(&data.rho, &mut data.fvec);
            if data
                .pmat
                .iter()
                .chain(&data.amat)
                .chain(&data.fvec)
                .any(|v| !v.is_finite())
            {
                return Err(Error::SingularState {
                    element: e,
                    detail: format!("non-finite mobility at density {:?}", data.rho),
                });
            }
            if with_jac {
                model.u_prime(&data.wq, &mut data.upm);
                // f'(u) u'(w)
                model.reaction_jacobian(&data.rho, &mut data.fj);
                for i in 0..nsp {
                    for j in 0..nsp {
                        data.fpm[i * nsp + j] = (0..nsp)
                            .map(|k| data.fj[i * nsp + k] * data.upm[k * nsp + j])
                            .sum();
                    }
                }
            }
            let wt = meas * sp.volume_weight(q);
            let ph = sp.phi(q);
            for i in 0..nsp {
                for a in 0..n {
                    let wa = wt * ph[a];
                    data.u_loc[i * n + a] += wa * data.rho[i];
                    data.f_loc[i * n + a] += wa * data.fvec[i];
                    for j in 0..nsp {
                        let (pij, aij) = (data.pmat[i * nsp + j], data.amat[i * nsp + j]);
                        let row = (i * n + a) * bs + j * n;
                        for b in 0..n {
                            let m = wa * ph[b];
                            data.np[row + b] += pij * m;
                            data.ap[row + b] += aij * m;
                        }
                        if with_jac {
                            let (uij, fij) = (data.upm[i * nsp + j], data.fpm[i * nsp + j]);
                            for b in 0..n {
                                let m = wa * ph[b];
                                data.du[row + b] += uij * m;
                                data.df[row + b] += fij * m;
                            }
                        }
                    }
                }
            }
        }
        data.lu.clear();
        data.lu.extend_from_slice(&data.np);
        if !lu_factor(&mut data.lu, bs, &mut data.piv) {
            return Err(Error::SingularState {
                element: e,
                detail: "mobility block is singular".into(),
            });
        }

        // Σ and ÂΣ per direction
        let st = &self.ops.stencil[e];
        let g = &self.ops.local_grad[e];
        let cols = st.len() * n;
        let sl = sp.scalar_len();
        for c in 0..d {
            for j in 0..nsp {
                for a in 0..n {
                    let grow = &g[(c * n + a) * cols..(c * n + a + 1) * cols];
                    let mut acc = 0.0;
                    for (pos, &s) in st.iter().enumerate() {
                        let base = j * sl + s * n;
                        for b in 0..n {
                            acc += grow[pos * n + b] * w[base + b];
                        }
                    }
                    data.z[j * n + a] = acc;
                }
            }
            for r in 0..bs {
                data.tmp[r] = (0..bs).map(|k| data.ap[k * bs + r] * data.z[k]).sum();
            }
            lu_solve(&data.lu, bs, &data.piv, &mut data.tmp);
            data.sigma[c * bs..(c + 1) * bs].copy_from_slice(&data.tmp);
            for r in 0..bs {
                data.y[c * bs + r] = (0..bs).map(|k| data.ap[r * bs + k] * data.tmp[k]).sum();
            }
        }

        if with_jac {
            self.element_stiffness(e, data);
        }
        Ok(())
    }

    /// `G_Kᵀ Ê_K G_K` with `Ê_K = Â N̂⁻¹ Âᵀ`, dense over the stencil.
    fn element_stiffness(&self, e: usize, data: &mut ElementData) {
        let sp = self.space;
        let (nsp, n, d) = (sp.species(), sp.nloc(), sp.dim());
        let bs = nsp * n;
        // X = N̂⁻¹ Âᵀ, column k is the solve against row k of Â
        let st = &self.ops.stencil[e];
        let ns = st.len();
        let m = ns * bs;
        let ElementData {
            xs: x,
            emat,
            eg,
            tmp: col,
            ..
        } = data;
        x.clear();
        x.resize(bs * bs, 0.0);
        emat.clear();
        emat.resize(bs * bs, 0.0);
        eg.clear();
        eg.resize(bs * m, 0.0);
        for k in 0..bs {
            col.copy_from_slice(&data.ap[k * bs..(k + 1) * bs]);
            lu_solve(&data.lu, bs, &data.piv, col);
            for r in 0..bs {
                x[r * bs + k] = col[r];
            }
        }
        for r in 0..bs {
            for k in 0..bs {
                let a = data.ap[r * bs + k];
                if a != 0.0 {
                    for c in 0..bs {
                        emat[r * bs + c] += a * x[k * bs + c];
                    }
                }
            }
        }
        let g = &self.ops.local_grad[e];
        let cols = ns * n;
        // stiffness index over the stencil: (pos, i, b) -> pos * bs + i * n + b
        for c in 0..d {
            eg.iter_mut().for_each(|v| *v = 0.0);
            // EG[(i,a), (pos, j, b)] = Σ_a' E[(i,a),(j,a')] G_c[a'][(pos,b)]
            for r in 0..bs {
                for j in 0..nsp {
                    for ap_ in 0..n {
                        let ev = emat[r * bs + j * n + ap_];
                        if ev == 0.0 {
                            continue;
                        }
                        let grow = &g[(c * n + ap_) * cols..(c * n + ap_ + 1) * cols];
                        for pos in 0..ns {
                            for b in 0..n {
                                eg[r * m + pos * bs + j * n + b] += ev * grow[pos * n + b];
                            }
                        }
                    }
                }
            }
            // stiff[(pos1, i, b1), :] += Σ_a G_c[a][(pos1,b1)] EG[(i,a), :]
            for a in 0..n {
                let grow = &g[(c * n + a) * cols..(c * n + a + 1) * cols];
                for pos1 in 0..ns {
                    for b1 in 0..n {
                        let gv = grow[pos1 * n + b1];
                        if gv == 0.0 {
                            continue;
                        }
                        for i in 0..nsp {
                            let row = pos1 * bs + i * n + b1;
                            let src = &eg[(i * n + a) * m..(i * n + a + 1) * m];
                            let dst = &mut data.stiff[row * m..(row + 1) * m];
                            for (o, s) in dst.iter_mut().zip(src) {
                                *o += gv * s;
                            }
                        }
                    }
                }
            }
        }
    }

    /// Evaluate all element blocks at `w` into `blocks` (buffers are reused).
    pub fn eval_local_blocks_into(
        &self,
        w: &[f64],
        blocks: &mut LocalBlocks,
        with_jac: bool,
    ) -> Result<()> {
        self.check_len(w)?;
        let nel = self.space.num_elements();
        blocks.elements.resize_with(nel, ElementData::default);
        if self.parallel() {
            blocks
                .elements
                .par_iter_mut()
                .enumerate()
                .try_for_each(|(e, data)| self.element_pass(e, w, data, with_jac))?;
        } else {
            for (e, data) in blocks.elements.iter_mut().enumerate() {
                self.element_pass(e, w, data, with_jac)?;
            }
        }
        let nsp = self.space.species();
        blocks.clamped = blocks.elements.iter().map(|d| d.clamped).sum();
        blocks.umin = (0..nsp)
            .map(|i| {
                blocks
                    .elements
                    .iter()
                    .map(|d| d.umin[i])
                    .fold(f64::INFINITY, f64::min)
            })
            .collect();
        blocks.umax = (0..nsp)
            .map(|i| {
                blocks
                    .elements
                    .iter()
                    .map(|d| d.umax[i])
                    .fold(f64::NEG_INFINITY, f64::max)
            })
            .collect();
        Ok(())
    }

    pub fn eval_local_blocks(&self, w: &[f64]) -> Result<LocalBlocks> {
        let mut b = LocalBlocks::default();
        self.eval_local_blocks_into(w, &mut b, false)?;
        Ok(b)
    }

    fn scatter_local(
        &self,
        blocks: &LocalBlocks,
        pick: impl Fn(&ElementData) -> &[f64],
        alpha: f64,
        out: &mut [f64],
    ) {
        let (nsp, n) = (self.space.species(), self.space.nloc());
        let sl = self.space.scalar_len();
        for (e, data) in blocks.elements.iter().enumerate() {
            let v = pick(data);
            for i in 0..nsp {
                for a in 0..n {
                    out[i * sl + e * n + a] += alpha * v[i * n + a];
                }
            }
        }
    }

    /// `out += alpha · Σ_K G_Kᵀ (ÂΣ)_K`, the reduced diffusion term at the blocks' state.
    pub fn add_stiffness_term(&self, blocks: &LocalBlocks, alpha: f64, out: &mut [f64]) {
        let (nsp, n, d) = (self.space.species(), self.space.nloc(), self.space.dim());
        let bs = nsp * n;
        let sl = self.space.scalar_len();
        for (e, data) in blocks.elements.iter().enumerate() {
            let st = &self.ops.stencil[e];
            let g = &self.ops.local_grad[e];
            let cols = st.len() * n;
            for c in 0..d {
                for a in 0..n {
                    let grow = &g[(c * n + a) * cols..(c * n + a + 1) * cols];
                    for i in 0..nsp {
                        let yv = alpha * data.y[c * bs + i * n + a];
                        if yv == 0.0 {
                            continue;
                        }
                        for (pos, &s) in st.iter().enumerate() {
                            let base = i * sl + s * n;
                            for b in 0..n {
                                out[base + b] += grow[pos * n + b] * yv;
                            }
                        }
                    }
                }
            }
        }
    }

    /// `U_h(W)`: the vector of `∫ u(w) φ`.
    pub fn density_moments(&self, blocks: &LocalBlocks) -> Vec<f64> {
        let mut u = vec![0.0; self.space.len()];
        self.scatter_local(blocks, |d| &d.u_loc, 1.0, &mut u);
        u
    }

    /// Residual of the fully discrete scheme at `w`. `prev` is `U_h(Wⁿ)` (or the
    /// moments of the initial datum on the first step) and `forcing` an optional
    /// extra right-hand side (source and boundary flux moments).
    pub fn residual_into(
        &self,
        params: &SchemeParams,
        w: &[f64],
        prev: &[f64],
        forcing: Option<&[f64]>,
        blocks: &mut LocalBlocks,
        out: &mut [f64],
    ) -> Result<()> {
        self.eval_local_blocks_into(w, blocks, false)?;
        self.residual_from_blocks(params, w, prev, forcing, blocks, out);
        if let Some(k) = out.iter().position(|v| !v.is_finite()) {
            return Err(Error::Diverged(format!("non-finite residual at index {k}")));
        }
        Ok(())
    }

    /// Residual from blocks already evaluated at `w`.
    pub fn residual_from_blocks(
        &self,
        params: &SchemeParams,
        w: &[f64],
        prev: &[f64],
        forcing: Option<&[f64]>,
        blocks: &LocalBlocks,
        out: &mut [f64],
    ) {
        let sl = self.space.scalar_len();
        let tau = params.tau;
        for (o, p) in out.iter_mut().zip(prev) {
            *o = -p;
        }
        self.scatter_local(blocks, |d| &d.u_loc, 1.0, out);
        self.scatter_local(blocks, |d| &d.f_loc, -tau, out);
        for i in 0..self.space.species() {
            let (wi, oi) = (&w[i * sl..(i + 1) * sl], &mut out[i * sl..(i + 1) * sl]);
            if params.eps > 0.0 {
                spmv_add(&self.ops.reg, params.eps * tau, wi, oi);
            }
            spmv_add(&self.ops.stab, tau, wi, oi);
        }
        self.add_stiffness_term(blocks, tau, out);
        if let Some(f) = forcing {
            for (o, v) in out.iter_mut().zip(f) {
                *o -= tau * v;
            }
        }
    }

    pub fn residual(
        &self,
        params: &SchemeParams,
        w: &[f64],
        prev: &[f64],
        forcing: Option<&[f64]>,
    ) -> Result<Vec<f64>> {
        let mut out = vec![0.0; self.space.len()];
        let mut blocks = LocalBlocks::default();
        self.residual_into(params, w, prev, forcing, &mut blocks, &mut out)?;
        Ok(out)
    }

    /// Frozen Jacobian at `w_lin`: `ετC + U' + τ(GᵀÊG + S) − τF'`, with `Ê` not differentiated.
    pub fn frozen_jacobian(&self, params: &SchemeParams, w_lin: &[f64]) -> Result<BlockSparse> {
        self.frozen_jacobian_with(params, w_lin, true)
    }

    /// As [`Self::frozen_jacobian`], optionally leaving out the reaction derivative.
    pub fn frozen_jacobian_with(
        &self,
        params: &SchemeParams,
        w_lin: &[f64],
        reaction: bool,
    ) -> Result<BlockSparse> {
        self.frozen_jacobian_into(params, w_lin, reaction, &mut LocalBlocks::default())
    }

    /// As [`Self::frozen_jacobian_with`], reusing `blocks` as workspace.
    pub fn frozen_jacobian_into(
        &self,
        params: &SchemeParams,
        w_lin: &[f64],
        reaction: bool,
        blocks: &mut LocalBlocks,
    ) -> Result<BlockSparse> {
        self.eval_local_blocks_into(w_lin, blocks, true)?;
        Ok(self.jacobian_from_blocks(params, blocks, reaction))
    }

    /// Frozen Jacobian from blocks evaluated with their Jacobian parts.
    pub fn jacobian_from_blocks(
        &self,
        params: &SchemeParams,
        blocks: &LocalBlocks,
        reaction: bool,
    ) -> BlockSparse {
        let (nsp, n) = (self.space.species(), self.space.nloc());
        let bs = nsp * n;
        let tau = params.tau;
        let mut jac = self.ops.stab_blocks.clone();
        if tau != 1.0 {
            jac.blocks_mut().iter_mut().for_each(|v| *v *= tau);
        }
        if params.eps > 0.0 {
            jac.axpy(params.eps * tau, &self.ops.reg_blocks);
        }
        let ft = if reaction { tau } else { 0.0 };
        for (e, data) in blocks.elements.iter().enumerate() {
            assert!(data.has_jac, "blocks were evaluated without Jacobian parts");
            let blk = jac.block_mut(e, e);
            for k in 0..bs * bs {
                blk[k] += data.du[k] - ft * data.df[k];
            }
            let st = &self.ops.stencil[e];
            let m = st.len() * bs;
            for (p1, &s1) in st.iter().enumerate() {
                for (p2, &s2) in st.iter().enumerate() {
                    let blk = jac.block_mut(s1, s2);
                    for r in 0..bs {
                        let src = &data.stiff
                            [(p1 * bs + r) * m + p2 * bs..(p1 * bs + r) * m + (p2 + 1) * bs];
                        for (o, s) in blk[r * bs..(r + 1) * bs].iter_mut().zip(src) {
                            *o += tau * s;
                        }
                    }
                }
            }
        }
        jac
    }

    /// `(Σ, Q)` in the vector-field layout, species-major.
    pub fn recover_sigma_q(&self, w: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
        let blocks = self.eval_local_blocks(w)?;
        let (nsp, n, d) = (self.space.species(), self.space.nloc(), self.space.dim());
        let bs = nsp * n;
        let vl = self.space.vector_len();
        let mut sigma = vec![0.0; nsp * vl];
        let mut q = vec![0.0; nsp * vl];
        for (e, data) in blocks.elements.iter().enumerate() {
            let inv = self.ops.inv_measure(e);
            for i in 0..nsp {
                for c in 0..d {
                    for a in 0..n {
                        let k = i * vl + e * d * n + c * n + a;
                        sigma[k] = data.sigma[c * bs + i * n + a];
                        q[k] = inv * data.y[c * bs + i * n + a];
                    }
                }
            }
        }
        Ok((sigma, q))
    }

    /// `(I ⊗ BᵀM⁻¹) Ê(W) (I ⊗ M⁻¹B) V` with `Ê` taken from `blocks`.
    pub fn apply_e(&self, blocks: &LocalBlocks, v: &[f64]) -> Vec<f64> {
        let (nsp, n, d) = (self.space.species(), self.space.nloc(), self.space.dim());
        let bs = nsp * n;
        let sl = self.space.scalar_len();
        let mut out = vec![0.0; v.len()];
        let (mut z, mut tmp, mut y) = (vec![0.0; bs], vec![0.0; bs], vec![0.0; bs]);
        for (e, data) in blocks.elements.iter().enumerate() {
            let st = &self.ops.stencil[e];
            let g = &self.ops.local_grad[e];
            let cols = st.len() * n;
            for c in 0..d {
                for j in 0..nsp {
                    for a in 0..n {
                        let grow = &g[(c * n + a) * cols..(c * n + a + 1) * cols];
                        z[j * n + a] = st
                            .iter()
                            .enumerate()
                            .map(|(pos, &s)| {
                                (0..n)
                                    .map(|b| grow[pos * n + b] * v[j * sl + s * n + b])
                                    .sum::<f64>()
                            })
                            .sum();
                    }
                }
                for r in 0..bs {
                    tmp[r] = (0..bs).map(|k| data.ap[k * bs + r] * z[k]).sum();
                }
                lu_solve(&data.lu, bs, &data.piv, &mut tmp);
                for r in 0..bs {
                    y[r] = (0..bs).map(|k| data.ap[r * bs + k] * tmp[k]).sum();
                }
                for a in 0..n {
                    let grow = &g[(c * n + a) * cols..(c * n + a + 1) * cols];
                    for i in 0..nsp {
                        for (pos, &s) in st.iter().enumerate() {
                            for b in 0..n {
                                out[i * sl + s * n + b] += grow[pos * n + b] * y[i * n + a];
                            }
                        }
                    }
                }
            }
        }
        out
    }
}

/// Energy terms of one state used by the entropy audit.
#[derive(Clone, Debug, PartialEq)]
pub struct StateEnergies {
    /// `Σᵀ N̂ Σ = ∫ Aᵀs'' σ : σ`.
    pub production: f64,
    /// `‖σ‖²_{L²}`.
    pub sigma_l2: f64,
    /// `Σ_F η_F ∫ |[w]|²`.
    pub jump_energy: f64,
    /// `c_h(w, w)` summed over species.
    pub reg_energy: f64,
    /// Smallest `ΣᵀN̂Σ − γ‖Σ‖²` over elements.
    pub coercivity_margin: f64,
}

impl<'a> Discretization<'a> {
    /// Smallest element value of `ΣᵀN̂Σ − γ‖Σ‖²` at the blocks' state.
    pub fn coercivity_margin(&self, blocks: &LocalBlocks) -> f64 {
        self.energies_inner(blocks).2
    }

    fn energies_inner(&self, blocks: &LocalBlocks) -> (f64, f64, f64) {
        let bs = self.bs();
        let d = self.space.dim();
        let (mut production, mut sigma_l2, mut margin) = (0.0, 0.0, f64::INFINITY);
        for (e, data) in blocks.elements.iter().enumerate() {
            let meas = self.space.geometry(e).measure;
            let (mut pe, mut se) = (0.0, 0.0);
            for c in 0..d {
                let s = &data.sigma[c * bs..(c + 1) * bs];
                for r in 0..bs {
                    pe += s[r] * (0..bs).map(|k| data.np[r * bs + k] * s[k]).sum::<f64>();
                    se += meas * s[r] * s[r];
                }
            }
            production += pe;
            sigma_l2 += se;
            margin = margin.min(pe - self.model.gamma * se);
        }
        (production, sigma_l2, margin)
    }

    /// Total `∫ s(u(w))` by the volume rule.
    pub fn entropy(&self, w: &[f64]) -> f64 {
        crate::diagnostics::entropy_value(self.space, self.model, w)
    }

    /// `∫ u_i(w)` per species at the blocks' state.
    pub fn mass(&self, blocks: &LocalBlocks) -> Vec<f64> {
        let n = self.space.nloc();
        (0..self.space.species())
            .map(|i| blocks.elements.iter().map(|d| d.u_loc[i * n]).sum())
            .collect()
    }

    pub fn energies(&self, w: &[f64], blocks: &LocalBlocks) -> StateEnergies {
        let sl = self.space.scalar_len();
        let nsp = self.space.species();
        let (production, sigma_l2, margin) = self.energies_inner(blocks);
        let quad = |a: &nalgebra_sparse::CsrMatrix<f64>| {
            (0..nsp)
                .map(|i| {
                    let wi = &w[i * sl..(i + 1) * sl];
                    let mut t = vec![0.0; sl];
                    spmv_add(a, 1.0, wi, &mut t);
                    wi.iter().zip(&t).map(|(x, y)| x * y).sum::<f64>()
                })
                .sum::<f64>()
        };
        StateEnergies {
            production,
            sigma_l2,
            jump_energy: quad(&self.ops.stab),
            reg_energy: quad(&self.ops.reg),
            coercivity_margin: margin,
        }
    }
}
