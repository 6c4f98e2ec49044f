//! Quasi-Newton solves and the backward-Euler time loop, with fixed or
//! adaptive steps.

use std::cell::RefCell;

use serde::{Deserialize, Serialize};

use crate::diagnostics::{entropy_slack, AuditTerms, InitialData, StepDiagnostics};
use crate::error::{invalid, Error, Result};
use crate::linalg::{Factorization, LinearSolverKind};
use crate::models::ReactionBound;
use crate::system::{Discretization, LocalBlocks, SchemeParams};

/// When the frozen Jacobian is rebuilt.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum JacobianRefresh {
    /// Once per time step, at the previous solution.
    #[default]
    PerStep,
    /// At every Newton iterate (still without differentiating `Ê`).
    PerIteration,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct NewtonConfig {
    /// Euclidean norm of the residual coefficients.
    pub tol: f64,
    pub s_max: usize,
    pub refresh: JacobianRefresh,
    pub solver: LinearSolverKind,
    pub reaction_jacobian: bool,
    /// Estimate the 1-norm condition number of each factorized Jacobian.
    pub condition_estimate: bool,
}

impl Default for NewtonConfig {
    fn default() -> Self {
        NewtonConfig {
            tol: 1e-10,
            s_max: 50,
            refresh: JacobianRefresh::PerStep,
            solver: LinearSolverKind::Auto,
            reaction_jacobian: true,
            condition_estimate: true,
        }
    }
}

impl NewtonConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.tol > 0.0 && self.tol.is_finite()) {
            return Err(invalid(format!(
                "Newton tolerance must be positive, got {}",
                self.tol
            )));
        }
        if self.s_max == 0 {
            return Err(invalid("s_max must be at least 1"));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct NewtonReport {
    pub iterations: usize,
    pub residual_norm: f64,
    pub cond_estimate: f64,
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Quasi-Newton iteration on `w` in place. The Jacobian is built at the
/// initial iterate and, with [`JacobianRefresh::PerIteration`], rebuilt after every update.
pub fn newton_solve<R, J>(
    mut residual: R,
    mut jacobian: J,
    w: &mut [f64],
    cfg: &NewtonConfig,
) -> Result<NewtonReport>
where
    R: FnMut(&[f64], &mut [f64]) -> Result<()>,
    J: FnMut(&[f64]) -> Result<Factorization>,
{
    cfg.validate()?;
    let n = w.len();
    let mut r = vec![0.0; n];
    let mut delta = vec![0.0; n];
    residual(w, &mut r)?;
    let mut rn = norm(&r);
    if rn <= cfg.tol {
        return Ok(NewtonReport {
            iterations: 0,
            residual_norm: rn,
            cond_estimate: f64::NAN,
        });
    }
    let mut fact = jacobian(w)?;
    let mut cond = if cfg.condition_estimate {
        fact.condition_estimate()
    } else {
        f64::NAN
    };
    for it in 1..=cfg.s_max {
        fact.solve(&r, &mut delta)?;
        for (x, d) in w.iter_mut().zip(&delta) {
            *x -= d;
        }
        residual(w, &mut r)?;
        rn = norm(&r);
        if !rn.is_finite() {
            return Err(Error::Diverged(format!(
                "residual norm {rn} at iteration {it}"
            )));
        }
        if rn <= cfg.tol {
            return Ok(NewtonReport {
                iterations: it,
                residual_norm: rn,
                cond_estimate: cond,
            });
        }
        if cfg.refresh == JacobianRefresh::PerIteration && it < cfg.s_max {
            fact = jacobian(w)?;
            if cfg.condition_estimate {
                cond = fact.condition_estimate();
            }
        }
    }
    Err(Error::NotConverged {
        iterations: cfg.s_max,
        residual: rn,
    })
}

/// Extra right-hand side moments (sources, boundary fluxes) as a function of time.
pub type Forcing<'a> = dyn Fn(f64) -> Result<Vec<f64>> + Sync + 'a;

/// Everything needed to advance one run.
pub struct Problem<'a> {
    pub disc: Discretization<'a>,
    pub eps: f64,
    pub newton: NewtonConfig,
    pub forcing: Option<&'a Forcing<'a>>,
}

/// Mutable state of a run.
#[derive(Clone, Debug)]
pub struct RunState {
    pub t: f64,
    pub w: Vec<f64>,
    /// `U_h(Wⁿ)`, or the moments of the initial datum before the first step.
    pub prev: Vec<f64>,
    pub step: usize,
    pub entropy: f64,
    /// Smallest `ΣᵀN̂Σ − γ‖Σ‖²` over all Newton iterates so far.
    pub min_coercivity: f64,
    /// Total quadrature values clamped away from the boundary of the state set.
    pub clamped: usize,
    blocks: LocalBlocks,
    jac_blocks: LocalBlocks,
}

impl RunState {
    /// Initial state: the previous term is the projected datum and the first
    /// iterate is `s'` of its element means, nudged into the state set.
    pub fn initial(disc: &Discretization<'_>, init: &InitialData) -> Result<RunState> {
        let space = disc.space;
        let model = disc.model;
        let (nsp, n, sl) = (model.species, space.nloc(), space.scalar_len());
        let mut w = vec![0.0; space.len()];
        let (mut mean, mut w0) = (vec![0.0; nsp], vec![0.0; nsp]);
        for e in 0..space.num_elements() {
            let inv = 1.0 / space.geometry(e).measure;
            for i in 0..nsp {
                mean[i] = init.moments[i * sl + e * n] * inv;
            }
            model.nudge_inside(&mut mean, 1e-3);
            model.entropy_grad(&mean, &mut w0);
            if w0.iter().any(|v| !v.is_finite()) {
                return Err(Error::NumericDomain {
                    element: e,
                    point: 0,
                });
            }
            for i in 0..nsp {
                w[i * sl + e * n] = w0[i];
            }
        }
        Ok(RunState {
            t: 0.0,
            w,
            prev: init.moments.clone(),
            step: 0,
            entropy: init.entropy,
            min_coercivity: f64::INFINITY,
            clamped: 0,
            blocks: LocalBlocks::default(),
            jac_blocks: LocalBlocks::default(),
        })
    }

    /// Diagnostics row for the initial datum.
    pub fn initial_row(init: &InitialData) -> StepDiagnostics {
        StepDiagnostics {
            step: 0,
            t: 0.0,
            tau: 0.0,
            newton_iters: 0,
            entropy: init.entropy,
            mass: init.mass.clone(),
            min_u: init.umin.clone(),
            max_u: init.umax.clone(),
            sigma_l2: f64::NAN,
            jump_energy: f64::NAN,
            entropy_slack: f64::NAN,
            cond_estimate: f64::NAN,
            residual_norm: 0.0,
            coercivity_margin: f64::NAN,
            clamped: 0,
        }
    }

    /// Blocks evaluated at the current `w` (valid after a successful step).
    pub fn blocks(&self) -> &LocalBlocks {
        &self.blocks
    }
}

/// Errors after which a smaller step may succeed.
pub fn is_step_failure(e: &Error) -> bool {
    matches!(
        e,
        Error::NotConverged { .. }
            | Error::Diverged(_)
            | Error::SingularState { .. }
            | Error::LinearSolve(_)
            | Error::NumericDomain { .. }
    )
}

/// One backward-Euler step of size `tau`. On failure the state is unchanged.
pub fn advance(problem: &Problem<'_>, state: &mut RunState, tau: f64) -> Result<StepDiagnostics> {
    let disc = &problem.disc;
    let params = SchemeParams {
        eps: problem.eps,
        tau,
        first_step: state.step == 0,
    };
    params.validate(disc.model)?;
    let t_next = state.t + tau;
    let forcing = match problem.forcing {
        Some(f) => Some(f(t_next)?),
        None => None,
    };
    let mut w = state.w.clone();
    let blocks = RefCell::new(std::mem::take(&mut state.blocks));
    let jac_blocks = RefCell::new(std::mem::take(&mut state.jac_blocks));
    let mut margin = f64::INFINITY;
    let mut clamped = 0;
    let mut residual_calls = 0usize;
    let mut jacobian_calls = 0usize;
    let prev = &state.prev;
    let cfg = problem.newton;
    let result = newton_solve(
        |x, r| {
            // the first residual shares its element pass with the Jacobian
            let first = residual_calls == 0;
            residual_calls += 1;
            let mut b = if first {
                jac_blocks.borrow_mut()
            } else {
                blocks.borrow_mut()
            };
            disc.eval_local_blocks_into(x, &mut b, first)?;
            disc.residual_from_blocks(&params, x, prev, forcing.as_deref(), &b, r);
            if let Some(k) = r.iter().position(|v| !v.is_finite()) {
                return Err(Error::Diverged(format!("non-finite residual at index {k}")));
            }
            margin = margin.min(disc.coercivity_margin(&b));
            clamped += b.clamped;
            Ok(())
        },
        |x| {
            let mut jb = jac_blocks.borrow_mut();
            if jacobian_calls > 0 {
                disc.eval_local_blocks_into(x, &mut jb, true)?;
            }
            jacobian_calls += 1;
            Factorization::build(
                disc.jacobian_from_blocks(&params, &jb, cfg.reaction_jacobian),
                cfg.solver,
                cfg.condition_estimate,
            )
        },
        &mut w,
        &cfg,
    );
    let (mut blocks, mut jac_blocks) = (blocks.into_inner(), jac_blocks.into_inner());
    let report = match result {
        Ok(r) => r,
        Err(e) => {
            state.blocks = blocks;
            state.jac_blocks = jac_blocks;
            return Err(e);
        }
    };
    if report.iterations == 0 {
        std::mem::swap(&mut blocks, &mut jac_blocks);
    }

    // the last residual evaluation was at the converged iterate
    let en = disc.energies(&w, &blocks);
    let entropy = disc.entropy(&w);
    let forcing_work = forcing
        .as_ref()
        .map_or(0.0, |f| f.iter().zip(&w).map(|(a, b)| a * b).sum());
    let slack = entropy_slack(
        disc.model,
        disc.space.mesh().domain_measure(),
        &AuditTerms {
            tau,
            eps: problem.eps,
            entropy_prev: state.entropy,
            entropy_next: entropy,
            reg_energy: en.reg_energy,
            sigma_l2: en.sigma_l2,
            jump_energy: en.jump_energy,
            forcing_work,
        },
    );
    let row = StepDiagnostics {
        step: state.step + 1,
        t: t_next,
        tau,
        newton_iters: report.iterations,
        entropy,
        mass: disc.mass(&blocks),
        min_u: blocks.umin.clone(),
        max_u: blocks.umax.clone(),
        sigma_l2: en.sigma_l2,
        jump_energy: en.jump_energy,
        entropy_slack: slack,
        cond_estimate: report.cond_estimate,
        residual_norm: report.residual_norm,
        coercivity_margin: margin,
        clamped,
    };
    state.prev = disc.density_moments(&blocks);
    state.w = w;
    state.t = t_next;
    state.step += 1;
    state.entropy = entropy;
    state.min_coercivity = state.min_coercivity.min(margin);
    state.clamped += clamped;
    state.blocks = blocks;
    state.jac_blocks = jac_blocks;
    Ok(row)
}

/// Uniform steps of size `tau` up to `t_end`, which must be a whole number of steps.
pub fn run_fixed(
    problem: &Problem<'_>,
    state: &mut RunState,
    tau: f64,
    t_end: f64,
    observer: &mut dyn FnMut(&RunState, &StepDiagnostics),
) -> Result<Vec<StepDiagnostics>> {
    if !(tau > 0.0) || !(t_end >= state.t) {
        return Err(invalid(format!(
            "need tau > 0 and t_end >= t, got tau = {tau}, t_end = {t_end}"
        )));
    }
    let span = t_end - state.t;
    let steps = (span / tau).round();
    if (steps * tau - span).abs() > 1e-8 * span.max(tau) {
        return Err(invalid(format!(
            "time span {span} is not a multiple of tau = {tau}"
        )));
    }
    let t0 = state.t;
    let mut rows = Vec::with_capacity(steps as usize);
    for k in 0..steps as usize {
        let row = advance(problem, state, tau)?;
        state.t = t0 + (k + 1) as f64 * tau;
        observer(state, &row);
        rows.push(row);
    }
    Ok(rows)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AdaptiveConfig {
    pub tau1: f64,
    pub shrink: f64,
    pub growth: f64,
    /// Retry with a smaller step after a failed Newton solve.
    pub retry: bool,
    /// Upper cap on the step.
    pub tau_max: Option<f64>,
}

impl AdaptiveConfig {
    pub fn new(tau1: f64) -> AdaptiveConfig {
        AdaptiveConfig {
            tau1,
            shrink: 0.2,
            growth: 1.1,
            retry: true,
            tau_max: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.tau1 > 0.0) {
            return Err(invalid(format!(
                "initial step must be positive, got {}",
                self.tau1
            )));
        }
        if !(self.shrink > 0.0 && self.shrink < 1.0 && self.growth > 1.0) {
            return Err(invalid("need 0 < shrink < 1 < growth"));
        }
        Ok(())
    }
}

/// Accepted and rejected steps of an adaptive run.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct AdaptiveSummary {
    pub accepted: Vec<f64>,
    pub rejected: Vec<f64>,
}

/// Adaptive step control: start from `tau1`, grow by `growth` after every
/// accepted step, retry with `shrink · tau` after a recoverable failure, and clip
/// the last step to land on `t_end`. `try_step(t, tau)` must leave its state
/// untouched when it fails.
pub fn drive_adaptive<F>(
    t0: f64,
    t_end: f64,
    cfg: &AdaptiveConfig,
    mut try_step: F,
) -> Result<AdaptiveSummary>
where
    F: FnMut(f64, f64) -> Result<()>,
{
    cfg.validate()?;
    let cap = cfg.tau_max.unwrap_or(f64::INFINITY);
    let floor = 1e-12 * t_end.abs().max(f64::MIN_POSITIVE);
    let mut summary = AdaptiveSummary::default();
    let mut t = t0;
    let mut tau = cfg.tau1.min(cap);
    while t_end - t > floor {
        let remaining = t_end - t;
        let last = tau >= remaining;
        let step = if last { remaining } else { tau };
        match try_step(t, step) {
            Ok(()) => {
                t = if last { t_end } else { t + step };
                summary.accepted.push(step);
                tau = (step * cfg.growth).min(cap);
            }
            Err(e) if cfg.retry && is_step_failure(&e) => {
                summary.rejected.push(step);
                tau = step * cfg.shrink;
                if tau < floor {
                    return Err(Error::StepUnderflow { tau, t });
                }
            }
            Err(e) => return Err(e),
        }
    }
    Ok(summary)
}

/// Largest admissible step for the model's reaction bound.
pub fn step_cap(problem: &Problem<'_>) -> Option<f64> {
    let m = problem.disc.model;
    (m.bound == ReactionBound::Relative && m.c_f > 0.0).then(|| 0.999 / m.c_f)
}

/// Adaptive run to `t_end`; the step cap from the reaction bound is applied on top of `cfg`.
pub fn run_adaptive(
    problem: &Problem<'_>,
    state: &mut RunState,
    cfg: &AdaptiveConfig,
    t_end: f64,
    observer: &mut dyn FnMut(&RunState, &StepDiagnostics),
) -> Result<(Vec<StepDiagnostics>, AdaptiveSummary)> {
    let mut cfg = *cfg;
    if let Some(c) = step_cap(problem) {
        cfg.tau_max = Some(cfg.tau_max.map_or(c, |m| m.min(c)));
    }
    let mut rows = Vec::new();
    let summary = drive_adaptive(state.t, t_end, &cfg, |_, tau| {
        let row = advance(problem, state, tau)?;
        observer(state, &row);
        rows.push(row);
        Ok(())
    })?;
    state.t = t_end;
    if let Some(r) = rows.last_mut() {
        r.t = t_end;
    }
    Ok((rows, summary))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn adaptive_policy_grows_geometrically_and_clips() {
        let cfg = AdaptiveConfig::new(0.1);
        let s = drive_adaptive(0.0, 1.0, &cfg, |_, _| Ok(())).unwrap();
        let n = s.accepted.len();
        for (k, tau) in s.accepted[..n - 1].iter().enumerate() {
            assert!((tau - 0.1 * 1.1f64.powi(k as i32)).abs() < 1e-15);
        }
        let total: f64 = s.accepted.iter().sum();
        assert!((total - 1.0).abs() < 1e-14);
        assert!(s.accepted[n - 1] <= 0.1 * 1.1f64.powi(n as i32 - 1));
    }

    #[test]
    fn injected_failure_shrinks_the_step() {
        let cfg = AdaptiveConfig::new(0.1);
        let mut calls = 0;
        let s = drive_adaptive(0.0, 0.5, &cfg, |_, _| {
            calls += 1;
            if calls == 3 {
                Err(Error::NotConverged {
                    iterations: 50,
                    residual: 1.0,
                })
            } else {
                Ok(())
            }
        })
        .unwrap();
        assert_eq!(s.rejected.len(), 1);
        assert!((s.rejected[0] - 0.121).abs() < 1e-14);
        assert!((s.accepted[2] - 0.2 * 0.121).abs() < 1e-14);
        assert!((s.accepted[3] - 1.1 * 0.2 * 0.121).abs() < 1e-14);
    }

    #[test]
    fn persistent_failure_underflows() {
        let cfg = AdaptiveConfig::new(0.1);
        let r = drive_adaptive(0.0, 1.0, &cfg, |_, _| Err(Error::Diverged("x".into())));
        assert!(matches!(r, Err(Error::StepUnderflow { .. })));
        let r = drive_adaptive(0.0, 1.0, &cfg, |_, _| Err(Error::Config("x".into())));
        assert!(matches!(r, Err(Error::Config(_))));
    }

    #[test]
    fn step_cap_is_respected() {
        let cfg = AdaptiveConfig {
            tau_max: Some(0.05),
            ..AdaptiveConfig::new(0.04)
        };
        let s = drive_adaptive(0.0, 1.0, &cfg, |_, _| Ok(())).unwrap();
        assert!(s.accepted.iter().all(|t| *t <= 0.05 + 1e-15));
    }
}
