//! Cross-diffusion models in the boundedness-by-entropy framework.
//!
//! A model supplies the diffusion matrix `A(ρ)`, the reaction term `f(ρ)`, an
//! entropy density `s` with derivatives, the inverse `u = (s')⁻¹`, and the
//! constants `γ`, `C_f` and `A_sup`. Matrices are passed as row-major slices of
//! length `N²`.

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{invalid, Result};

/// Distance from the boundary of the admissible set below which states are clamped.
pub const BOUNDARY_OFFSET: f64 = 1e-14;

/// Admissible set of densities.
#[derive(Clone, Debug, PartialEq)]
pub enum Domain {
    /// Product of open intervals; an upper bound may be `+∞`.
    Box { lower: Vec<f64>, upper: Vec<f64> },
    /// `{ρ_i > 0, Σ ρ_i < 1}`.
    Simplex,
}

/// Form of the reaction bound: `f·s' ≤ C_f` or `f·s' ≤ C_f (1 + s)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ReactionBound {
    Absolute,
    Relative,
}

#[derive(Clone, Debug, PartialEq)]
pub enum ModelKind {
    PorousMedium {
        m: f64,
    },
    /// Shigesada-Kawasaki-Teramoto system. Row `i` of `a` holds `(a_i0, a_i1, a_i2)`,
    /// likewise for `b`.
    Skt {
        a: [[f64; 3]; 2],
        b: [[f64; 3]; 2],
        box_cap: [f64; 2],
    },
    Mixture {
        p: Vec<f64>,
    },
    Tumor {
        beta: f64,
        theta: f64,
    },
}

#[derive(Clone, Debug, PartialEq)]
pub struct ModelSpec {
    pub kind: ModelKind,
    pub species: usize,
    pub domain: Domain,
    pub gamma: f64,
    pub c_f: f64,
    pub a_sup: f64,
    pub bound: ReactionBound,
}

fn xlogx(x: f64) -> f64 {
    if x <= 0.0 {
        0.0
    } else {
        x * x.ln()
    }
}

fn logistic(w: f64) -> f64 {
    if w >= 0.0 {
        1.0 / (1.0 + (-w).exp())
    } else {
        let e = w.exp();
        e / (1.0 + e)
    }
}

impl ModelSpec {
    /// Porous-medium equation `∂ₜρ = Δρ^m` with the logistic entropy.
    pub fn porous_medium(m: f64) -> Result<ModelSpec> {
        if !(m > 1.0 && m <= 2.0) {
            return Err(invalid(format!(
                "porous-medium exponent must lie in (1, 2], got {m}"
            )));
        }
        Ok(ModelSpec {
            kind: ModelKind::PorousMedium { m },
            species: 1,
            domain: Domain::Box {
                lower: vec![0.0],
                upper: vec![1.0],
            },
            gamma: m,
            c_f: 0.0,
            a_sup: m,
            bound: ReactionBound::Absolute,
        })
    }

    /// Two-species SKT population model. `box_cap` bounds the densities used to
    /// compute `A_sup`, since the admissible set `(0, ∞)²` is unbounded.
    pub fn skt(a: [[f64; 3]; 2], b: [[f64; 3]; 2], box_cap: Option<[f64; 2]>) -> Result<ModelSpec> {
        let cap = box_cap.ok_or_else(|| {
            invalid("SKT densities live in the unbounded set (0, inf)^2; a box_cap is required to fix A_sup")
        })?;
        if cap.iter().any(|c| !(*c > 0.0 && c.is_finite())) {
            return Err(invalid(format!(
                "box_cap entries must be positive and finite, got {cap:?}"
            )));
        }
        if a[0][1] <= 0.0 || a[1][2] <= 0.0 {
            return Err(invalid(
                "SKT self-diffusion coefficients a_11, a_22 must be positive",
            ));
        }
        if a[0][2] <= 0.0 || a[1][1] <= 0.0 {
            return Err(invalid(
                "SKT cross-diffusion coefficients a_12, a_21 must be positive",
            ));
        }
        if a.iter()
            .flatten()
            .chain(b.iter().flatten())
            .any(|v| *v < 0.0 || !v.is_finite())
        {
            return Err(invalid("SKT coefficients must be finite and nonnegative"));
        }
        let pi = [a[1][1], a[0][2]];
        let gamma = (pi[0] * a[0][1]).min(pi[1] * a[1][2]);
        let all_zero = b.iter().flatten().all(|v| *v == 0.0);
        let c_f = if all_zero {
            0.0
        } else {
            let e = std::f64::consts::E;
            let term =
                |i: usize| b[i][0] + (pi[0] * b[0][i + 1] + pi[1] * b[1][i + 1]) / (e * pi[i]);
            2.0 / std::f64::consts::LN_2 * term(0).max(term(1))
        };
        let mut model = ModelSpec {
            kind: ModelKind::Skt { a, b, box_cap: cap },
            species: 2,
            domain: Domain::Box {
                lower: vec![0.0, 0.0],
                upper: vec![f64::INFINITY, f64::INFINITY],
            },
            gamma,
            c_f,
            a_sup: 0.0,
            bound: if all_zero {
                ReactionBound::Absolute
            } else {
                ReactionBound::Relative
            },
        };
        // Entries are affine with nonnegative coefficients, so the sup is at the far corner.
        let mut amat = [0.0; 4];
        model.diffusion(&cap, &mut amat);
        model.a_sup = amat.iter().fold(0.0, |m, v| m.max(v.abs()));
        Ok(model)
    }

    /// Volume-filling mixture with `N = p.len()` species.
    pub fn mixture(p: &[f64]) -> Result<ModelSpec> {
        if p.is_empty() || p.iter().any(|v| !(*v > 0.0 && v.is_finite())) {
            return Err(invalid(format!(
                "mixture coefficients must be positive, got {p:?}"
            )));
        }
        let pmax = p.iter().copied().fold(0.0, f64::max);
        Ok(ModelSpec {
            kind: ModelKind::Mixture { p: p.to_vec() },
            species: p.len(),
            domain: Domain::Simplex,
            gamma: p.iter().copied().fold(f64::INFINITY, f64::min),
            c_f: 0.0,
            // sup of ρ_i(1 − ρ_i) and of ρ_iρ_j over the simplex are both 1/4
            a_sup: pmax / 4.0,
            bound: ReactionBound::Absolute,
        })
    }

    /// Two-species tumor-growth model.
    pub fn tumor(beta: f64, theta: f64) -> Result<ModelSpec> {
        if !(beta > 0.0 && beta.is_finite()) {
            return Err(invalid(format!("tumor model needs beta > 0, got {beta}")));
        }
        if !(theta > 0.0 && theta < 4.0 / beta.sqrt()) {
            return Err(invalid(format!(
                "tumor model needs 0 < theta < 4/sqrt(beta) = {}, got {theta}",
                4.0 / beta.sqrt()
            )));
        }
        let mut model = ModelSpec {
            kind: ModelKind::Tumor { beta, theta },
            species: 2,
            domain: Domain::Simplex,
            gamma: 0.0,
            c_f: 0.0,
            a_sup: 0.0,
            bound: ReactionBound::Absolute,
        };
        model.gamma = model.grid_min_eigenvalue()?;
        let mut amax = 0.0f64;
        let n = 400;
        let mut amat = [0.0; 4];
        for i in 0..=n {
            for j in 0..=(n - i) {
                model.diffusion(&[i as f64 / n as f64, j as f64 / n as f64], &mut amat);
                amax = amat.iter().fold(amax, |m, v| m.max(v.abs()));
            }
        }
        model.a_sup = amax;
        Ok(model)
    }

    /// Minimum eigenvalue of the symmetric part of `Aᵀs''` over the closed
    /// simplex, on grids refined until two successive values agree to 1%.
    fn grid_min_eigenvalue(&self) -> Result<f64> {
        let eval = |n: usize| {
            let mut best = f64::INFINITY;
            let mut prod = [0.0; 4];
            for i in 0..=n {
                for j in 0..=(n - i) {
                    self.mobility_product(&[i as f64 / n as f64, j as f64 / n as f64], &mut prod);
                    let (a, b, d) = (prod[0], 0.5 * (prod[1] + prod[2]), prod[3]);
                    let lam = 0.5 * (a + d) - (0.25 * (a - d).powi(2) + b * b).sqrt();
                    best = best.min(lam);
                }
            }
            best
        };
        let mut n = 100;
        let mut prev = eval(n);
        loop {
            n *= 2;
            let cur = eval(n);
            if (cur - prev).abs() <= 0.01 * cur.abs() || n > 3200 {
                if cur <= 0.0 {
                    return Err(invalid(format!(
                        "mobility product is not positive definite (min eigenvalue {cur})"
                    )));
                }
                return Ok(cur);
            }
            prev = cur;
        }
    }

    pub fn name(&self) -> &'static str {
        match self.kind {
            ModelKind::PorousMedium { .. } => "porous-medium",
            ModelKind::Skt { .. } => "skt",
            ModelKind::Mixture { .. } => "mixture",
            ModelKind::Tumor { .. } => "tumor",
        }
    }

    /// Whether `s''A` extends continuously to the closure of the admissible set.
    pub fn product_continuous_on_closure(&self) -> bool {
        matches!(
            self.kind,
            ModelKind::Mixture { .. } | ModelKind::Tumor { .. }
        )
    }

    /// True when every density is bounded above, so `u(w)` stays in a bounded set.
    pub fn domain_is_bounded(&self) -> bool {
        match &self.domain {
            Domain::Simplex => true,
            Domain::Box { upper, .. } => upper.iter().all(|u| u.is_finite()),
        }
    }

    pub fn has_reaction(&self) -> bool {
        matches!(&self.kind, ModelKind::Skt { b, .. } if b.iter().flatten().any(|v| *v != 0.0))
    }

    fn skt_pi(a: &[[f64; 3]; 2]) -> [f64; 2] {
        [a[1][1], a[0][2]]
    }

    pub fn diffusion(&self, rho: &[f64], out: &mut [f64]) {
        match &self.kind {
            ModelKind::PorousMedium { m } => out[0] = m * powi_fast(rho[0].max(0.0), m - 1.0),
            ModelKind::Skt { a, .. } => {
                for i in 0..2 {
                    let base = a[i][0] + a[i][1] * rho[0] + a[i][2] * rho[1];
                    for j in 0..2 {
                        out[i * 2 + j] = if i == j { base } else { 0.0 } + a[i][j + 1] * rho[i];
                    }
                }
            }
            ModelKind::Mixture { p } => {
                let n = p.len();
                for j in 0..n {
                    for i in 0..n {
                        let delta = if i == j { 1.0 } else { 0.0 };
                        out[j * n + i] = p[i] * rho[i] * (delta - rho[j]);
                    }
                }
            }
            ModelKind::Tumor { beta, theta } => {
                let (r1, r2, b, t) = (rho[0], rho[1], *beta, *theta);
                out[0] = 2.0 * r1 * (1.0 - r1) - b * t * r1 * r2 * r2;
                out[1] = -2.0 * b * r1 * r2 * (1.0 + t * r1);
                out[2] = -2.0 * r1 * r2 + b * t * (1.0 - r2) * r2 * r2;
                out[3] = 2.0 * b * r2 * (1.0 - r2) * (1.0 + t * r1);
            }
        }
    }

    pub fn reaction(&self, rho: &[f64], out: &mut [f64]) {
        match &self.kind {
            ModelKind::Skt { b, .. } => {
                for i in 0..2 {
                    out[i] = rho[i] * (b[i][0] - b[i][1] * rho[0] - b[i][2] * rho[1]);
                }
            }
            _ => out[..self.species].iter_mut().for_each(|v| *v = 0.0),
        }
    }

    /// `∂f_i/∂ρ_j`, row-major.
    pub fn reaction_jacobian(&self, rho: &[f64], out: &mut [f64]) {
        match &self.kind {
            ModelKind::Skt { b, .. } => {
                for i in 0..2 {
                    let base = b[i][0] - b[i][1] * rho[0] - b[i][2] * rho[1];
                    for j in 0..2 {
                        out[i * 2 + j] = if i == j { base } else { 0.0 } - rho[i] * b[i][j + 1];
                    }
                }
            }
            _ => out[..self.species * self.species]
                .iter_mut()
                .for_each(|v| *v = 0.0),
        }
    }

    /// Entropy density, extended continuously to the boundary.
    pub fn entropy(&self, rho: &[f64]) -> f64 {
        match &self.kind {
            ModelKind::PorousMedium { .. } => {
                xlogx(rho[0]) + xlogx(1.0 - rho[0]) + std::f64::consts::LN_2
            }
            ModelKind::Skt { a, .. } => {
                let pi = Self::skt_pi(a);
                (0..2).map(|i| pi[i] * (xlogx(rho[i]) - rho[i] + 1.0)).sum()
            }
            ModelKind::Mixture { .. } | ModelKind::Tumor { .. } => {
                let n = self.species;
                let r0 = 1.0 - rho[..n].iter().sum::<f64>();
                rho[..n].iter().map(|r| xlogx(*r) - r).sum::<f64>() + xlogx(r0) - r0
                    + n as f64
                    + 1.0
            }
        }
    }

    /// `s'(ρ)`.
    pub fn entropy_grad(&self, rho: &[f64], out: &mut [f64]) {
        match &self.kind {
            ModelKind::PorousMedium { .. } => out[0] = (rho[0] / (1.0 - rho[0])).ln(),
            ModelKind::Skt { a, .. } => {
                let pi = Self::skt_pi(a);
                for i in 0..2 {
                    out[i] = pi[i] * rho[i].ln();
                }
            }
            ModelKind::Mixture { .. } | ModelKind::Tumor { .. } => {
                let n = self.species;
                let l0 = (1.0 - rho[..n].iter().sum::<f64>()).ln();
                for i in 0..n {
                    out[i] = rho[i].ln() - l0;
                }
            }
        }
    }

    /// `s''(ρ)`, row-major.
    pub fn entropy_hessian(&self, rho: &[f64], out: &mut [f64]) {
        let n = self.species;
        match &self.kind {
            ModelKind::PorousMedium { .. } => out[0] = 1.0 / (rho[0] * (1.0 - rho[0])),
            ModelKind::Skt { a, .. } => {
                let pi = Self::skt_pi(a);
                out[..4].copy_from_slice(&[pi[0] / rho[0], 0.0, 0.0, pi[1] / rho[1]]);
            }
            ModelKind::Mixture { .. } | ModelKind::Tumor { .. } => {
                let inv0 = 1.0 / (1.0 - rho[..n].iter().sum::<f64>());
                for i in 0..n {
                    for j in 0..n {
                        out[i * n + j] = inv0 + if i == j { 1.0 / rho[i] } else { 0.0 };
                    }
                }
            }
        }
    }

    /// `u(w) = (s')⁻¹(w)`, evaluated without overflow for `|w| ≤ 700`.
    pub fn u(&self, w: &[f64], out: &mut [f64]) {
        match &self.kind {
            ModelKind::PorousMedium { .. } => out[0] = logistic(w[0]),
            ModelKind::Skt { a, .. } => {
                let pi = Self::skt_pi(a);
                for i in 0..2 {
                    out[i] = (w[i] / pi[i]).min(700.0).exp();
                }
            }
            ModelKind::Mixture { .. } | ModelKind::Tumor { .. } => {
                let n = self.species;
                let mx = w[..n].iter().copied().fold(0.0, f64::max);
                let mut denom = (-mx).exp();
                for i in 0..n {
                    out[i] = (w[i] - mx).exp();
                    denom += out[i];
                }
                out[..n].iter_mut().for_each(|v| *v /= denom);
            }
        }
    }

    /// Jacobian `u'(w)`, row-major.
    pub fn u_prime(&self, w: &[f64], out: &mut [f64]) {
        let n = self.species;
        match &self.kind {
            ModelKind::PorousMedium { .. } => {
                let e = (-w[0].abs()).exp();
                out[0] = e / ((1.0 + e) * (1.0 + e));
            }
            ModelKind::Skt { a, .. } => {
                let pi = Self::skt_pi(a);
                let mut u = [0.0; 2];
                self.u(w, &mut u);
                out[..4].copy_from_slice(&[u[0] / pi[0], 0.0, 0.0, u[1] / pi[1]]);
            }
            ModelKind::Mixture { .. } | ModelKind::Tumor { .. } => {
                let mut u = vec![0.0; n];
                self.u(w, &mut u);
                for i in 0..n {
                    for j in 0..n {
                        out[i * n + j] = if i == j { u[i] } else { 0.0 } - u[i] * u[j];
                    }
                }
            }
        }
    }

    /// `A(ρ)ᵀ s''(ρ)`, in closed form where one is available.
    pub fn mobility_product(&self, rho: &[f64], out: &mut [f64]) {
        match &self.kind {
            ModelKind::PorousMedium { m } => {
                out[0] = m * powi_fast(rho[0], m - 2.0) / (1.0 - rho[0])
            }
            ModelKind::Skt { a, .. } => {
                let pi = Self::skt_pi(a);
                for i in 0..2 {
                    let base = a[i][0] + a[i][1] * rho[0] + a[i][2] * rho[1];
                    out[i * 2 + i] = pi[i] * (base / rho[i] + a[i][i + 1]);
                }
                out[1] = a[0][2] * a[1][1];
                out[2] = out[1];
            }
            ModelKind::Mixture { p } => {
                let n = p.len();
                for i in 0..n {
                    for j in 0..n {
                        out[i * n + j] = if i == j { p[i] } else { 0.0 };
                    }
                }
            }
            ModelKind::Tumor { beta, theta } => {
                out[0] = 2.0;
                out[1] = beta * theta * rho[1];
                out[2] = 0.0;
                out[3] = 2.0 * beta * (theta * rho[0] + 1.0);
            }
        }
    }

    /// `A(ρ)ᵀ s''(ρ)` by direct multiplication of the two factors.
    pub fn mobility_product_generic(&self, rho: &[f64], out: &mut [f64]) {
        let n = self.species;
        let mut a = vec![0.0; n * n];
        let mut h = vec![0.0; n * n];
        self.diffusion(rho, &mut a);
        self.entropy_hessian(rho, &mut h);
        for i in 0..n {
            for j in 0..n {
                out[i * n + j] = (0..n).map(|k| a[k * n + i] * h[k * n + j]).sum();
            }
        }
    }

    /// Whether `ρ` lies strictly inside the admissible set.
    pub fn strictly_inside(&self, rho: &[f64]) -> bool {
        match &self.domain {
            Domain::Box { lower, upper } => (0..self.species)
                .all(|i| rho[i] > lower[i] && rho[i] < upper[i] && rho[i].is_finite()),
            Domain::Simplex => {
                rho[..self.species].iter().all(|r| *r > 0.0)
                    && rho[..self.species].iter().sum::<f64>() < 1.0
            }
        }
    }

    /// Pull `ρ` at least [`BOUNDARY_OFFSET`] away from the boundary; returns
    /// whether anything changed.
    pub fn clamp_interior(&self, rho: &mut [f64]) -> bool {
        let d = BOUNDARY_OFFSET;
        let mut changed = false;
        match &self.domain {
            Domain::Box { lower, upper } => {
                for i in 0..self.species {
                    let (lo, hi) = (lower[i] + d, upper[i] - d);
                    if rho[i] < lo {
                        rho[i] = lo;
                        changed = true;
                    } else if rho[i] > hi {
                        rho[i] = hi;
                        changed = true;
                    }
                }
            }
            Domain::Simplex => {
                for r in rho[..self.species].iter_mut() {
                    if *r < d {
                        *r = d;
                        changed = true;
                    }
                }
                let s: f64 = rho[..self.species].iter().sum();
                if s > 1.0 - d {
                    let f = (1.0 - d) / s;
                    rho[..self.species].iter_mut().for_each(|r| *r *= f);
                    changed = true;
                }
            }
        }
        changed
    }

    /// Pull a point of the closure inside by a relative margin `delta` (used for
    /// initial guesses built from averages of data that may touch the boundary).
    pub fn nudge_inside(&self, rho: &mut [f64], delta: f64) {
        match &self.domain {
            Domain::Box { lower, upper } => {
                for i in 0..self.species {
                    let hi = if upper[i].is_finite() {
                        upper[i]
                    } else {
                        lower[i] + 1.0
                    };
                    let span = hi - lower[i];
                    let lo_b = lower[i] + delta * span;
                    rho[i] = if upper[i].is_finite() {
                        rho[i].clamp(lo_b, upper[i] - delta * span)
                    } else {
                        rho[i].max(lo_b)
                    };
                }
            }
            Domain::Simplex => {
                for r in rho[..self.species].iter_mut() {
                    *r = r.max(delta);
                }
                let s: f64 = rho[..self.species].iter().sum();
                if s > 1.0 - delta {
                    let f = (1.0 - delta) / s;
                    rho[..self.species].iter_mut().for_each(|r| *r *= f);
                }
            }
        }
    }

    /// A random point strictly inside the admissible set (inside `box_cap` for SKT).
    pub fn sample_state<R: Rng>(&self, rng: &mut R) -> Vec<f64> {
        let n = self.species;
        let open = |rng: &mut R| rng.gen_range(1e-6..1.0 - 1e-6);
        match &self.kind {
            ModelKind::Skt { box_cap, .. } => (0..2).map(|i| box_cap[i] * open(rng)).collect(),
            _ => match &self.domain {
                Domain::Box { lower, upper } => (0..n)
                    .map(|i| lower[i] + (upper[i] - lower[i]) * open(rng))
                    .collect(),
                Domain::Simplex => {
                    // uniform on the simplex via normalized exponentials
                    let e: Vec<f64> = (0..=n).map(|_| -open(rng).ln()).collect();
                    let s: f64 = e.iter().sum();
                    e[..n].iter().map(|v| v / s).collect()
                }
            },
        }
    }
}

/// Outcome of sampling the model hypotheses.
#[derive(Clone, Debug, PartialEq)]
pub struct ValidationReport {
    pub samples: usize,
    /// `min λ_min(sym(Aᵀs'')) − γ` over samples.
    pub h2a_margin: f64,
    /// `min (bound − f·s')` over samples.
    pub h2b_slack: f64,
    /// `max |u(s'(ρ)) − ρ|`.
    pub roundtrip_u: f64,
    /// `max |s'(u(w)) − w| / max(1, |w|)`.
    pub roundtrip_s: f64,
    /// `max |u'(w) s''(u(w)) − I|`.
    pub chain_rule: f64,
    /// Samples with `u(w)` outside the open admissible set.
    pub boundedness_violations: usize,
}

impl ValidationReport {
    pub fn passed(&self) -> bool {
        self.h2a_margin >= -1e-8
            && self.h2b_slack >= -1e-8
            && self.roundtrip_u <= 1e-9
            && self.roundtrip_s <= 1e-9
            && self.chain_rule <= 1e-7
            && self.boundedness_violations == 0
    }
}

impl std::fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        writeln!(f, "samples                 {}", self.samples)?;
        writeln!(f, "H2a margin              {:.3e}", self.h2a_margin)?;
        writeln!(f, "H2b slack               {:.3e}", self.h2b_slack)?;
        writeln!(f, "u(s'(rho)) round trip   {:.3e}", self.roundtrip_u)?;
        writeln!(f, "s'(u(w)) round trip     {:.3e}", self.roundtrip_s)?;
        writeln!(f, "chain rule error        {:.3e}", self.chain_rule)?;
        writeln!(f, "boundedness violations  {}", self.boundedness_violations)?;
        write!(
            f,
            "result                  {}",
            if self.passed() { "PASS" } else { "FAIL" }
        )
    }
}

/// Sample the model hypotheses at `samples` random interior states.
pub fn validate_model(model: &ModelSpec, samples: usize, seed: u64) -> ValidationReport {
    let n = model.species;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut report = ValidationReport {
        samples,
        h2a_margin: f64::INFINITY,
        h2b_slack: f64::INFINITY,
        roundtrip_u: 0.0,
        roundtrip_s: 0.0,
        chain_rule: 0.0,
        boundedness_violations: 0,
    };
    let (mut prod, mut w, mut r, mut f) =
        (vec![0.0; n * n], vec![0.0; n], vec![0.0; n], vec![0.0; n]);
    let (mut up, mut h) = (vec![0.0; n * n], vec![0.0; n * n]);
    for _ in 0..samples {
        let rho = model.sample_state(&mut rng);
        model.mobility_product_generic(&rho, &mut prod);
        let p = DMatrix::from_row_slice(n, n, &prod);
        let sym = (&p + p.transpose()) * 0.5;
        let lam = sym.symmetric_eigen().eigenvalues.min();
        report.h2a_margin = report.h2a_margin.min(lam - model.gamma);

        model.entropy_grad(&rho, &mut w);
        model.reaction(&rho, &mut f);
        let fs: f64 = f.iter().zip(&w).map(|(a, b)| a * b).sum();
        let bound = match model.bound {
            ReactionBound::Absolute => model.c_f,
            ReactionBound::Relative => model.c_f * (1.0 + model.entropy(&rho)),
        };
        report.h2b_slack = report.h2b_slack.min(bound - fs);

        model.u(&w, &mut r);
        let e = (0..n).map(|i| (r[i] - rho[i]).abs()).fold(0.0, f64::max);
        report.roundtrip_u = report.roundtrip_u.max(e);

        // |w| ≤ 12 keeps 1 − u(w) well above rounding for the logistic inverse
        let wr: Vec<f64> = (0..n).map(|_| rng.gen_range(-12.0..12.0)).collect();
        let wr = match &model.kind {
            ModelKind::Skt { a, .. } => {
                let pi = ModelSpec::skt_pi(a);
                wr.iter().zip(pi).map(|(v, p)| v * p / 4.0).collect()
            }
            _ => wr,
        };
        model.u(&wr, &mut r);
        if !model.strictly_inside(&r) {
            report.boundedness_violations += 1;
            continue;
        }
        model.entropy_grad(&r, &mut w);
        let e = (0..n)
            .map(|i| (w[i] - wr[i]).abs() / wr[i].abs().max(1.0))
            .fold(0.0, f64::max);
        report.roundtrip_s = report.roundtrip_s.max(e);
        model.u_prime(&wr, &mut up);
        model.entropy_hessian(&r, &mut h);
        let mut err = 0.0f64;
        for i in 0..n {
            for j in 0..n {
                let v: f64 = (0..n).map(|k| up[i * n + k] * h[k * n + j]).sum();
                err = err.max((v - if i == j { 1.0 } else { 0.0 }).abs());
            }
        }
        report.chain_rule = report.chain_rule.max(err);
    }
    report
}

/// The SKT coefficients of the Turing-pattern experiment.
/// `x^e`, skipping `powf` for the common integer exponents 0 and 1.
fn powi_fast(x: f64, e: f64) -> f64 {
    if e == 0.0 {
        1.0
    } else if e == 1.0 {
        x
    } else {
        x.powf(e)
    }
}

pub fn turing_coefficients() -> ([[f64; 3]; 2], [[f64; 3]; 2]) {
    (
        [[0.05, 2.5e-5, 1.025], [0.05, 0.075, 2.5e-5]],
        [[59.7, 24.875, 19.9], [49.75, 19.9, 19.9]],
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn porous_medium_values() {
        let m = ModelSpec::porous_medium(2.0).unwrap();
        let mut v = [0.0];
        m.u(&[0.0], &mut v);
        assert_eq!(v[0], 0.5);
        assert!(m.entropy(&[0.5]).abs() < 1e-15);
        m.entropy_hessian(&[0.5], &mut v);
        assert_eq!(v[0], 4.0);
        m.diffusion(&[0.5], &mut v);
        assert_eq!(v[0], 1.0);
        assert_eq!(m.a_sup, 2.0);
        assert!((m.entropy(&[0.25]) - 0.130812).abs() < 1e-6);
        assert!((m.entropy(&[0.0]) - std::f64::consts::LN_2).abs() < 1e-15);
        assert!(ModelSpec::porous_medium(3.0).is_err());
        assert!(ModelSpec::porous_medium(1.0).is_err());
    }

    #[test]
    fn skt_values() {
        let a = [[0.0, 1.0, 1.0], [0.0, 1.0, 1.0]];
        let m = ModelSpec::skt(a, [[0.0; 3]; 2], Some([2.0, 2.0])).unwrap();
        let mut amat = [0.0; 4];
        m.diffusion(&[1.0, 1.0], &mut amat);
        assert_eq!(amat, [3.0, 1.0, 1.0, 3.0]);
        let mut u = [0.0; 2];
        m.u(&[0.0, 0.0], &mut u);
        assert_eq!(u, [1.0, 1.0]);
        assert_eq!(m.entropy(&[1.0, 1.0]), 0.0);
        assert!(ModelSpec::skt(a, [[0.0; 3]; 2], None)
            .unwrap_err()
            .to_string()
            .contains("unbounded"));
    }

    #[test]
    fn turing_gamma() {
        let (a, b) = turing_coefficients();
        let m = ModelSpec::skt(a, b, Some([5.0, 5.0])).unwrap();
        assert!((m.gamma - 1.875e-6).abs() < 1e-18);
        assert_eq!(m.bound, ReactionBound::Relative);
        let r = validate_model(&m, 10_000, 3);
        assert!(r.h2b_slack >= 0.0, "{r}");
        let pi = [0.075, 1.025];
        let s = pi[0] * (2.0 * (2f64.ln() - 1.0) + 1.0) + pi[1] * (0.5 * (0.5f64.ln() - 1.0) + 1.0);
        assert!((m.entropy(&[2.0, 0.5]) - s).abs() < 1e-15);
    }

    #[test]
    fn mixture_values() {
        let m = ModelSpec::mixture(&[1.0, 1.0]).unwrap();
        let mut u = [0.0; 2];
        m.u(&[0.0, 0.0], &mut u);
        assert!((u[0] - 1.0 / 3.0).abs() < 1e-15 && (u[1] - 1.0 / 3.0).abs() < 1e-15);
        // entropy minimum N − log(N + 1) at the barycenter
        for n in 1..4 {
            let m = ModelSpec::mixture(&vec![1.0; n]).unwrap();
            let bary = vec![1.0 / (n + 1) as f64; n];
            let s0 = m.entropy(&bary);
            assert!((s0 - (n as f64 - ((n + 1) as f64).ln())).abs() < 1e-14 && s0 > 0.0);
            let mut other = bary.clone();
            other[0] += 0.01;
            assert!(m.entropy(&other) > s0);
        }
        assert!(ModelSpec::mixture(&[1.0, 0.0]).is_err());
    }

    #[test]
    fn tumor_values() {
        let m = ModelSpec::tumor(1.0, 1.0).unwrap();
        let mut p = [0.0; 4];
        m.mobility_product(&[0.2, 0.3], &mut p);
        assert_eq!(p, [2.0, 0.3, 0.0, 2.4]);
        m.mobility_product(&[0.0, 0.0], &mut p);
        assert_eq!(p, [2.0, 0.0, 0.0, 2.0]);
        assert!(m.gamma > 0.0);
        assert!(ModelSpec::tumor(1.0, 4.0).is_err());
        assert!(ModelSpec::tumor(4.0, 1.9).is_ok());
    }

    #[test]
    fn all_models_validate() {
        let (a, b) = turing_coefficients();
        let models = [
            ModelSpec::porous_medium(2.0).unwrap(),
            ModelSpec::porous_medium(1.5).unwrap(),
            ModelSpec::skt(a, b, Some([5.0, 5.0])).unwrap(),
            ModelSpec::mixture(&[1.0, 2.0, 0.5]).unwrap(),
            ModelSpec::tumor(1.3, 0.7).unwrap(),
        ];
        for m in &models {
            let r = validate_model(m, 10_000, 7);
            assert!(r.passed(), "{}:\n{r}", m.name());
        }
    }

    #[test]
    fn extreme_entropy_variables_stay_inside() {
        let pm = ModelSpec::porous_medium(2.0).unwrap();
        let mix = ModelSpec::mixture(&[1.0, 1.0]).unwrap();
        let mut u = [0.0; 2];
        for w in [-700.0, -36.0, 0.0, 36.0] {
            pm.u(&[w], &mut u);
            assert!(pm.strictly_inside(&u[..1]), "w = {w}");
        }
        for w in [[-700.0, 700.0], [700.0, 700.0], [-700.0, -700.0]] {
            mix.u(&w, &mut u);
            assert!(u.iter().all(|v| v.is_finite()));
            assert!(u[0] + u[1] <= 1.0);
        }
    }
}
