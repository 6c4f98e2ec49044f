//! Run orchestration: build a discretization from a [`RunConfig`], march it in
//! time, and the named presets with their built-in checks.

use std::f64::consts::PI;
use std::fmt;
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use rayon::prelude::*;

use crate::assembly::{boundary_load_vector, load_vector, OperatorSet};
use crate::config::{
    Datum, InitialConfig, MeshConfig, ModelConfig, NewtonSection, OutputConfig, RunConfig,
    SchemeConfig, TimeConfig, TimeMode, ValidateConfig,
};
use crate::dgspace::{CoeffVec, DgSpace};
use crate::diagnostics::{
    convergence_rates, error_norms, manufactured_source, mass_drift_bound, max_mass_drift,
    InitialData, StepDiagnostics,
};
use crate::error::{Error, Result};
use crate::linalg::Factorization;
use crate::mesh::{orient_facets, Point};
use crate::models::{turing_coefficients, ModelSpec};
use crate::output::{emit_field, write_steps, write_table, Sampling};
use crate::stepper::{
    run_adaptive, run_fixed, AdaptiveSummary, Forcing, JacobianRefresh, NewtonConfig, Problem,
    RunState,
};
use crate::system::{Discretization, SchemeParams};

/// Closed-form solutions behind the manufactured data.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Exact {
    /// `ρ = [(m−1)(x−α)² / (2m(m+1)(β−t))]^{1/(m−1)}` with Neumann data.
    Porous { m: f64, alpha: f64, beta: f64 },
    /// Product-cosine pair with a volume source.
    Skt,
}

impl Exact {
    pub fn density(&self, t: f64, x: Point, out: &mut [f64]) {
        match *self {
            Exact::Porous { m, alpha, beta } => {
                let q = (m - 1.0) * (x[0] - alpha).powi(2) / (2.0 * m * (m + 1.0) * (beta - t));
                out[0] = q.powf(1.0 / (m - 1.0));
            }
            Exact::Skt => {
                let d = (-t).exp();
                out[0] = 0.25 * (2.0 * PI * x[0]).cos() * (PI * x[1]).cos() * d + 0.5;
                out[1] = 0.25 * (PI * x[0]).cos() * (2.0 * PI * x[1]).cos() * d + 0.5;
            }
        }
    }

    /// `∇ρ_i`, stored as `out[i·d + c]`.
    pub fn gradient(&self, t: f64, x: Point, out: &mut [f64]) {
        match *self {
            Exact::Porous { m, alpha, beta } => {
                let den = 2.0 * m * (m + 1.0) * (beta - t);
                let q = (m - 1.0) * (x[0] - alpha).powi(2) / den;
                out[0] = q.powf((2.0 - m) / (m - 1.0)) * 2.0 * (x[0] - alpha) / den;
            }
            Exact::Skt => {
                let d = (-t).exp();
                let (c1, s1) = ((PI * x[0]).cos(), (PI * x[0]).sin());
                let (c2, s2) = ((2.0 * PI * x[0]).cos(), (2.0 * PI * x[0]).sin());
                let (d1, e1) = ((PI * x[1]).cos(), (PI * x[1]).sin());
                let (d2, e2) = ((2.0 * PI * x[1]).cos(), (2.0 * PI * x[1]).sin());
                out[0] = -0.5 * PI * s2 * d1 * d;
                out[1] = -0.25 * PI * c2 * e1 * d;
                out[2] = -0.25 * PI * s1 * d2 * d;
                out[3] = -0.5 * PI * c1 * e2 * d;
            }
        }
    }
}

/// Two-bump datum used by the Turing run.
pub fn turing_datum(x: Point) -> [f64; 2] {
    let g = |x: f64, y: f64| (1.0 - 64.0 * x * x - 8.0 * y * y).max(0.0);
    [
        2.0 + 0.31 * g(x[0] - 0.25, x[1] - 0.25) + 0.31 * g(x[0] - 0.75, x[1] - 0.75),
        0.5,
    ]
}

/// A discretized problem built from a config.
pub struct Setup {
    pub config: RunConfig,
    pub model: ModelSpec,
    pub space: DgSpace,
    pub ops: OperatorSet,
    pub init: InitialData,
    pub exact: Option<Exact>,
}

impl Setup {
    pub fn new(config: &RunConfig) -> Result<Setup> {
        config.validate()?;
        let model = config.model.build()?;
        let s = &config.scheme;
        let mesh = config.mesh.build(s.eta)?;
        let dim = mesh.dim();
        let space = DgSpace::new(mesh, s.degree, model.species)?;
        let orient = orient_facets(space.mesh(), s.flux, s.alpha)?;
        let ops = OperatorSet::new(&space, &model, &orient, s.regularization_kind(dim, &model))?;
        let exact = match config.initial.datum {
            Datum::PmExact => Some(Exact::Porous {
                m: model_exponent(&model),
                alpha: 2.0,
                beta: 5.0,
            }),
            Datum::SktExact => Some(Exact::Skt),
            _ => None,
        };
        let m = model_exponent(&model);
        let values = config.initial.values.clone().unwrap_or_default();
        let datum = config.initial.datum;
        let init = InitialData::new(&space, &model, |x, out| match datum {
            Datum::Constant => out.copy_from_slice(&values),
            Datum::WaitingTime => {
                out[0] = if (0.0..=PI).contains(&x[0]) {
                    x[0].sin().powf(2.0 / (m - 1.0))
                } else {
                    0.0
                }
            }
            Datum::PmExact | Datum::SktExact => exact.expect("manufactured datum").density(0.0, x, out),
            Datum::Turing => out.copy_from_slice(&turing_datum(x)),
            Datum::Bumps => {
                for (i, (o, v)) in out.iter_mut().zip(&values).enumerate() {
                    let k = (i + 1) as f64;
                    *o = v * (1.0 + 0.5 * (k * PI * x[0]).cos() * (PI * x[1]).cos());
                }
            }
        })?;
        Ok(Setup {
            config: config.clone(),
            model,
            space,
            ops,
            init,
            exact,
        })
    }

    pub fn disc(&self) -> Result<Discretization<'_>> {
        Discretization::new(&self.space, &self.ops, &self.model)
    }

    /// Source and boundary moments at time `t` for manufactured data.
    pub fn forcing(&self, t: f64) -> Result<Vec<f64>> {
        match self.exact {
            Some(ex @ Exact::Porous { m, .. }) => boundary_load_vector(&self.space, |x, n, out| {
                let (mut r, mut g) = ([0.0], [0.0]);
                ex.density(t, x, &mut r);
                ex.gradient(t, x, &mut g);
                out[0] = m * r[0].powf(m - 1.0) * g[0] * n[0];
            }),
            Some(ex @ Exact::Skt) => load_vector(&self.space, |x, out| {
                manufactured_source(&self.model, 2, |t, y, o| ex.density(t, y, o), t, x, 1e-5, out)
            }),
            None => Ok(vec![0.0; self.space.len()]),
        }
    }

    /// Densities `u(w_h)` of all species at the point `x`.
    pub fn density_at(&self, w: &[f64], x: Point) -> Option<Vec<f64>> {
        let cv = CoeffVec::new(w.to_vec(), self.model.species).ok()?;
        let wv = self.space.eval_at(&cv, x)?;
        let mut rho = vec![0.0; wv.len()];
        self.model.u(&wv, &mut rho);
        Some(rho)
    }

    /// Spatial mean and variance of `u_i(w_h)` over the domain.
    pub fn density_statistics(&self, w: &[f64], species: usize) -> (f64, f64) {
        let nsp = self.model.species;
        let (mut wv, mut rho) = (vec![0.0; nsp], vec![0.0; nsp]);
        let (mut m1, mut m2, mut vol) = (0.0, 0.0, 0.0);
        for e in 0..self.space.num_elements() {
            let meas = self.space.geometry(e).measure;
            for q in 0..self.space.num_volume_points() {
                self.space.eval_at_volume_point(w, e, q, &mut wv);
                self.model.u(&wv, &mut rho);
                let wq = meas * self.space.volume_weight(q);
                m1 += wq * rho[species];
                m2 += wq * rho[species] * rho[species];
                vol += wq;
            }
        }
        let mean = m1 / vol;
        (mean, (m2 / vol - mean * mean).max(0.0))
    }
}

fn model_exponent(model: &ModelSpec) -> f64 {
    match model.kind {
        crate::models::ModelKind::PorousMedium { m } => m,
        _ => 2.0,
    }
}

/// L² errors against the exact solution at the final time.
#[derive(Clone, Debug, PartialEq)]
pub struct ErrorReport {
    pub h: f64,
    pub density: Vec<f64>,
    pub gradient: Vec<f64>,
}

/// Everything a run produced.
#[derive(Clone, Debug)]
pub struct RunOutcome {
    /// Row 0 describes the initial datum.
    pub rows: Vec<StepDiagnostics>,
    pub state: RunState,
    pub adaptive: Option<AdaptiveSummary>,
    pub errors: Option<ErrorReport>,
    pub snapshots: Vec<(f64, Vec<f64>)>,
    pub elapsed: Duration,
}

impl RunOutcome {
    pub fn steps(&self) -> &[StepDiagnostics] {
        &self.rows[1..]
    }
}

/// March the configured problem to `t_end`, stopping at every snapshot time.
pub fn simulate(
    setup: &Setup,
    observer: &mut dyn FnMut(&RunState, &StepDiagnostics),
) -> Result<RunOutcome> {
    let start = Instant::now();
    let cfg = &setup.config;
    let forcing_fn = |t: f64| setup.forcing(t);
    let problem = Problem {
        disc: setup.disc()?,
        eps: cfg.scheme.eps,
        newton: cfg.newton.config(),
        forcing: setup.exact.map(|_| &forcing_fn as &Forcing),
    };
    let mut state = RunState::initial(&problem.disc, &setup.init)?;
    let t_end = cfg.time.t_end;
    let near = |a: f64, b: f64| (a - b).abs() <= 1e-12 * t_end.max(1.0);
    let mut marks: Vec<f64> = cfg
        .output
        .snapshots
        .iter()
        .copied()
        .filter(|&t| t > 0.0 && t < t_end && !near(t, t_end))
        .collect();
    marks.sort_by(f64::total_cmp);
    marks.dedup();
    marks.push(t_end);

    let mut rows = vec![RunState::initial_row(&setup.init)];
    let mut snapshots = Vec::new();
    let mut adaptive = None;
    let mut acfg = match cfg.time.mode {
        TimeMode::Adaptive => Some(cfg.time.adaptive_config()?),
        TimeMode::Fixed => None,
    };
    for mark in marks {
        match acfg.as_mut() {
            None => {
                let tau = cfg.time.tau.expect("validated fixed step");
                rows.extend(run_fixed(&problem, &mut state, tau, mark, observer)?);
            }
            Some(a) => {
                let (r, s) = run_adaptive(&problem, &mut state, a, mark, observer)?;
                // resume from the last unclipped step size
                if let Some(last) = s.accepted.iter().rev().take(2).copied().reduce(f64::max) {
                    a.tau1 = last * a.growth;
                }
                let total: &mut AdaptiveSummary = adaptive.get_or_insert_with(Default::default);
                total.accepted.extend(s.accepted);
                total.rejected.extend(s.rejected);
                rows.extend(r);
            }
        }
        if cfg.output.snapshots.iter().any(|&s| near(s, mark)) {
            snapshots.push((mark, state.w.clone()));
        }
    }

    let errors = match setup.exact {
        Some(ex) => {
            let (sigma, _) = problem.disc.recover_sigma_q(&state.w)?;
            let (density, gradient) = error_norms(
                &setup.space,
                &setup.model,
                &state.w,
                &sigma,
                |x, o| ex.density(t_end, x, o),
                |x, o| ex.gradient(t_end, x, o),
            )?;
            Some(ErrorReport {
                h: setup.space.mesh().h(),
                density,
                gradient,
            })
        }
        None => None,
    };
    Ok(RunOutcome {
        rows,
        state,
        adaptive,
        errors,
        snapshots,
        elapsed: start.elapsed(),
    })
}

/// Write the step CSV, field snapshots and error table of a run under `dir`.
pub fn write_outputs(setup: &Setup, outcome: &RunOutcome, dir: &Path) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(dir)?;
    let name = &setup.config.output.name;
    let mut files = Vec::new();
    let steps = dir.join(format!("{name}_steps.csv"));
    write_steps(&steps, setup.model.species, &outcome.rows)?;
    files.push(steps);
    for (t, w) in &outcome.snapshots {
        let path = dir.join(format!("{name}_field_t{t}.csv"));
        emit_field(
            &setup.space,
            &setup.model,
            w,
            &path,
            Sampling::Uniform(setup.config.output.resolution),
        )?;
        files.push(path);
    }
    if let Some(e) = &outcome.errors {
        let path = dir.join(format!("{name}_errors.csv"));
        let rows: Vec<Vec<String>> = (0..e.density.len())
            .map(|i| {
                vec![
                    (i + 1).to_string(),
                    format!("{:.16e}", e.h),
                    format!("{:.16e}", e.density[i]),
                    format!("{:.16e}", e.gradient[i]),
                ]
            })
            .collect();
        write_table(&path, &["species", "h", "err_density", "err_gradient"], &rows)?;
        files.push(path);
    }
    Ok(files)
}

/// Smallest per-step entropy slack and the sum over all steps.
pub fn entropy_audit(steps: &[StepDiagnostics]) -> (f64, f64) {
    steps
        .iter()
        .filter(|r| !r.entropy_slack.is_nan())
        .fold((f64::INFINITY, 0.0), |(m, s), r| {
            (m.min(r.entropy_slack), s + r.entropy_slack)
        })
}

/// Steps whose reported min/max of `u(w_h)` leave the open admissible set.
pub fn bound_violations(steps: &[StepDiagnostics], model: &ModelSpec) -> usize {
    steps.iter().filter(|r| !r.strictly_bounded(model)).count()
}

/// Outcome of one built-in assertion.
#[derive(Clone, Debug, PartialEq)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

impl Check {
    pub fn new(name: impl Into<String>, passed: bool, detail: impl Into<String>) -> Check {
        Check {
            name: name.into(),
            passed,
            detail: detail.into(),
        }
    }
}

impl fmt::Display for Check {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let tag = if self.passed { "PASS" } else { "FAIL" };
        write!(f, "[{tag}] {}: {}", self.name, self.detail)
    }
}

/// Per-run checks shared by all presets: entropy slack, telescoped entropy
/// inequality (both only when `C_f = 0`), strict boundedness and coercivity.
pub fn standard_checks(label: &str, setup: &Setup, outcome: &RunOutcome) -> Vec<Check> {
    let steps = outcome.steps();
    let tol = setup.config.newton.tol;
    let mut checks = Vec::new();
    if setup.model.c_f == 0.0 {
        let (min, sum) = entropy_audit(steps);
        checks.push(Check::new(
            format!("{label}: entropy slack per step"),
            min >= -10.0 * tol,
            format!("min slack {min:.3e} vs -10 tol = {:.1e}", -10.0 * tol),
        ));
        let budget = -10.0 * tol * steps.len() as f64;
        checks.push(Check::new(
            format!("{label}: telescoped entropy inequality"),
            sum >= budget,
            format!("accumulated slack {sum:.3e} vs {budget:.3e}"),
        ));
    }
    if setup.model.domain_is_bounded() {
        let v = bound_violations(steps, &setup.model);
        checks.push(Check::new(
            format!("{label}: strict boundedness"),
            v == 0,
            format!("{v} steps with min/max outside the open set"),
        ));
    } else {
        let v = steps
            .iter()
            .filter(|r| r.min_u.iter().any(|&u| !(u > 0.0)))
            .count();
        checks.push(Check::new(
            format!("{label}: positivity"),
            v == 0,
            format!("{v} steps with a nonpositive density"),
        ));
    }
    let margin = outcome.state.min_coercivity;
    checks.push(Check::new(
        format!("{label}: coercivity at every Newton iterate"),
        margin >= -COERCIVITY_SLACK,
        format!("min ΣᵀN̂Σ − γ‖Σ‖² = {margin:.3e}"),
    ));
    checks
}

/// Rounding allowance for the element coercivity margin.
pub const COERCIVITY_SLACK: f64 = 1e-10;

/// Report of a preset run.
#[derive(Clone, Debug, Default)]
pub struct ExperimentReport {
    pub preset: String,
    pub checks: Vec<Check>,
    pub files: Vec<PathBuf>,
    /// Human-readable tables printed by the CLI.
    pub summary: String,
    pub elapsed: Duration,
}

impl ExperimentReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }
}

impl fmt::Display for ExperimentReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "preset {} ({:.1?})", self.preset, self.elapsed)?;
        if !self.summary.is_empty() {
            writeln!(f, "{}", self.summary.trim_end())?;
        }
        for c in &self.checks {
            writeln!(f, "{c}")?;
        }
        for p in &self.files {
            writeln!(f, "wrote {}", p.display())?;
        }
        write!(
            f,
            "{}",
            if self.passed() {
                "all checks passed"
            } else {
                "some checks FAILED"
            }
        )
    }
}

pub const PRESETS: &[&str] = &[
    "pm-convergence",
    "pm-waiting-time",
    "pm-regularization",
    "skt-convergence",
    "skt-turing",
    "mixture-demo",
    "tumor-demo",
];

fn base_config(
    preset: &str,
    model: ModelConfig,
    mesh: MeshConfig,
    degree: usize,
    datum: Datum,
    time: TimeConfig,
) -> RunConfig {
    RunConfig {
        preset: Some(preset.into()),
        model,
        mesh,
        scheme: SchemeConfig {
            degree,
            ..SchemeConfig::default()
        },
        initial: InitialConfig {
            datum,
            values: None,
        },
        time,
        newton: NewtonSection::default(),
        output: OutputConfig {
            name: preset.into(),
            ..OutputConfig::default()
        },
        validate: ValidateConfig::default(),
    }
}

fn newton(tol: f64, s_max: usize) -> NewtonSection {
    NewtonSection::from(NewtonConfig {
        tol,
        s_max,
        condition_estimate: false,
        ..NewtonConfig::default()
    })
}

/// Porous medium with the self-similar solution on `(0, 1)`, `τ = h^{p+1}`, `T = 1`.
pub fn pm_convergence_config(degree: usize, cells: usize) -> RunConfig {
    let h = 1.0 / cells as f64;
    let mut c = base_config(
        "pm-convergence",
        ModelConfig::porous_medium(2.0),
        MeshConfig::interval(0.0, 1.0, cells),
        degree,
        Datum::PmExact,
        TimeConfig::fixed(h.powi(degree as i32 + 1), 1.0),
    );
    // The frozen Jacobian leaves a same-signed residual each step. At 1e-12 it
    // accumulates over the 2.6e5 steps of p = 2, M = 64 past the O(h³) error.
    c.newton = newton(1e-14, 50);
    c.output.name = format!("pm-convergence_p{degree}_M{cells}");
    c
}

/// Waiting-time problem on `(−π/4, 5π/4)` with `p = 5`, `h ≈ 0.04`, `τ = 10⁻³`, `T = 0.2`.
pub fn waiting_time_config(eps: f64) -> RunConfig {
    let mut c = base_config(
        "pm-waiting-time",
        ModelConfig::porous_medium(2.0),
        MeshConfig::interval(-PI / 4.0, 5.0 * PI / 4.0, 118),
        5,
        Datum::WaitingTime,
        TimeConfig::fixed(1e-3, 0.2),
    );
    c.scheme.eps = eps;
    c.newton = newton(1e-6, 100);
    c.newton.refresh = JacobianRefresh::PerIteration;
    c.output.name = format!("pm-waiting-time_eps{eps:e}");
    c.output.snapshots = vec![0.05, 0.1, 0.2];
    c.output.resolution = 5;
    c
}

/// SKT manufactured solution on `(0, 1)²`, `p = 1`, `τ = (1/nx)²`, `T = 0.5`.
pub fn skt_convergence_config(nx: usize) -> RunConfig {
    let h = 1.0 / nx as f64;
    let mut c = base_config(
        "skt-convergence",
        ModelConfig::skt([[0.0, 1.0, 1.0], [0.0, 1.0, 1.0]], [[0.0; 3]; 2], [1.0, 1.0]),
        MeshConfig::structured(nx, nx, [0.0, 1.0, 0.0, 1.0]),
        1,
        Datum::SktExact,
        TimeConfig::fixed(h * h, 0.5),
    );
    c.newton = newton(1e-6, 50);
    c.output.name = format!("skt-convergence_nx{nx}");
    c
}

/// Turing run: `p = 3` on a 10 × 10 mesh, adaptive from `τ₁ = 10⁻⁴` to `T = 10`.
pub fn turing_config() -> RunConfig {
    let (a, b) = turing_coefficients();
    let mut c = base_config(
        "skt-turing",
        ModelConfig::skt(a, b, [6.0, 3.0]),
        MeshConfig::structured(10, 10, [0.0, 1.0, 0.0, 1.0]),
        3,
        Datum::Turing,
        TimeConfig::adaptive(1e-4, 10.0),
    );
    c.newton = newton(1e-6, 50);
    c.output.snapshots = vec![0.5, 10.0];
    c
}

/// Two-species volume-filling mixture on the unit square.
pub fn mixture_demo_config() -> RunConfig {
    let mut c = base_config(
        "mixture-demo",
        ModelConfig::mixture(vec![1.0, 3.0]),
        MeshConfig::structured(6, 6, [0.0, 1.0, 0.0, 1.0]),
        2,
        Datum::Bumps,
        TimeConfig::fixed(2e-3, 0.1),
    );
    c.initial.values = Some(vec![0.3, 0.3]);
    c.newton = newton(1e-10, 50);
    c.output.snapshots = vec![0.1];
    c
}

/// Tumor-growth model on the unit square.
pub fn tumor_demo_config() -> RunConfig {
    let mut c = base_config(
        "tumor-demo",
        ModelConfig::tumor(1.0, 1.0),
        MeshConfig::structured(6, 6, [0.0, 1.0, 0.0, 1.0]),
        2,
        Datum::Bumps,
        TimeConfig::fixed(2e-3, 0.1),
    );
    c.initial.values = Some(vec![0.3, 0.2]);
    c.newton = newton(1e-10, 50);
    c.output.snapshots = vec![0.1];
    c
}

/// One row of a convergence table.
#[derive(Clone, Debug, PartialEq)]
pub struct RateRow {
    pub degree: usize,
    pub cells: usize,
    pub h: f64,
    pub err_density: f64,
    pub rate_density: f64,
    pub err_gradient: f64,
    pub rate_gradient: f64,
}

fn rate_rows(degree: usize, cells: &[usize], errs: &[ErrorReport], species: usize) -> Result<Vec<RateRow>> {
    let hs: Vec<f64> = errs.iter().map(|e| e.h).collect();
    let ed: Vec<f64> = errs.iter().map(|e| e.density[species]).collect();
    let eg: Vec<f64> = errs.iter().map(|e| e.gradient[species]).collect();
    let (rd, rg) = (convergence_rates(&ed, &hs)?, convergence_rates(&eg, &hs)?);
    Ok((0..errs.len())
        .map(|k| RateRow {
            degree,
            cells: cells[k],
            h: hs[k],
            err_density: ed[k],
            rate_density: if k == 0 { f64::NAN } else { rd[k - 1] },
            err_gradient: eg[k],
            rate_gradient: if k == 0 { f64::NAN } else { rg[k - 1] },
        })
        .collect())
}

fn rate_table(rows: &[RateRow]) -> (String, Vec<Vec<String>>) {
    let mut s = String::from("   p      M          h    err_rho   rate   err_grad   rate\n");
    let mut csv = Vec::new();
    for r in rows {
        s += &format!(
            "{:>4} {:>6} {:>10.4e} {:>10.4e} {:>6.3} {:>10.4e} {:>6.3}\n",
            r.degree, r.cells, r.h, r.err_density, r.rate_density, r.err_gradient, r.rate_gradient
        );
        csv.push(vec![
            r.degree.to_string(),
            r.cells.to_string(),
            format!("{:.16e}", r.h),
            format!("{:.16e}", r.err_density),
            format!("{:.6}", r.rate_density),
            format!("{:.16e}", r.err_gradient),
            format!("{:.6}", r.rate_gradient),
        ]);
    }
    (s, csv)
}

const RATE_HEADER: [&str; 7] = ["p", "M", "h", "err_density", "rate_density", "err_gradient", "rate_gradient"];

fn rate_checks(label: &str, rows: &[RateRow]) -> Vec<Check> {
    let last = rows.last().expect("at least two meshes");
    let p = last.degree as f64;
    vec![
        Check::new(
            format!("{label}: density rate"),
            (last.rate_density - (p + 1.0)).abs() <= 0.2,
            format!("{:.3} vs {} ± 0.2", last.rate_density, p + 1.0),
        ),
        Check::new(
            format!("{label}: gradient rate"),
            (last.rate_gradient - p).abs() <= 0.25,
            format!("{:.3} vs {} ± 0.25", last.rate_gradient, p),
        ),
    ]
}

fn run_sweep(configs: &[RunConfig], out: Option<&Path>) -> Result<Vec<(Setup, RunOutcome, Vec<PathBuf>)>> {
    configs
        .par_iter()
        .map(|c| {
            let setup = Setup::new(c)?;
            let outcome = simulate(&setup, &mut |_, _| {})?;
            let files = match out {
                Some(d) => write_outputs(&setup, &outcome, d)?,
                None => Vec::new(),
            };
            Ok((setup, outcome, files))
        })
        .collect()
}

/// Porous-medium h-convergence for `p = 1, 2` on `M ∈ {8, 16, 32, 64}`.
pub fn pm_convergence(out: Option<&Path>) -> Result<ExperimentReport> {
    let start = Instant::now();
    let cells = [8, 16, 32, 64];
    let configs: Vec<RunConfig> = [1, 2]
        .iter()
        .flat_map(|&p| cells.iter().map(move |&m| pm_convergence_config(p, m)))
        .collect();
    let runs = run_sweep(&configs, out)?;
    let mut report = ExperimentReport {
        preset: "pm-convergence".into(),
        ..Default::default()
    };
    let mut all_rows = Vec::new();
    for (k, p) in [1usize, 2].iter().enumerate() {
        let chunk = &runs[k * cells.len()..(k + 1) * cells.len()];
        let errs: Vec<ErrorReport> = chunk
            .iter()
            .map(|(_, o, _)| o.errors.clone().expect("manufactured run"))
            .collect();
        let rows = rate_rows(*p, &cells, &errs, 0)?;
        report.checks.extend(rate_checks(&format!("p={p}"), &rows));
        all_rows.extend(rows);
    }
    for (s, o, files) in &runs {
        report.checks.extend(standard_checks(&s.config.output.name, s, o));
        report.files.extend(files.iter().cloned());
    }
    let (table, csv) = rate_table(&all_rows);
    report.summary = table;
    if let Some(d) = out {
        let path = d.join("pm-convergence_rates.csv");
        write_table(&path, &RATE_HEADER, &csv)?;
        report.files.push(path);
    }
    report.elapsed = start.elapsed();
    Ok(report)
}

/// Waiting time `t* = (m−1)/(2m(m+1))` of the porous-medium equation.
pub fn waiting_time(m: f64) -> f64 {
    (m - 1.0) / (2.0 * m * (m + 1.0))
}

/// Value of the approximation at `x = 0` after every step of a waiting-time run.
pub fn waiting_time_series(setup: &Setup) -> Result<(RunOutcome, Vec<(f64, f64)>)> {
    let mut series = Vec::new();
    let outcome = simulate(setup, &mut |s, _| {
        if let Some(r) = setup.density_at(&s.w, [0.0, 0.0]) {
            series.push((s.t, r[0]));
        }
    })?;
    Ok((outcome, series))
}

/// Support checks at `x = 0`: stays `≤ 10⁻³` up to `0.9 t*`, exceeds it before `2 t*`.
pub fn waiting_time_checks(series: &[(f64, f64)], t_star: f64) -> Vec<Check> {
    let early = series
        .iter()
        .filter(|(t, _)| *t <= 0.9 * t_star + 1e-12)
        .map(|&(_, v)| v)
        .fold(0.0, f64::max);
    let first = series.iter().find(|(_, v)| *v > 1e-3).map(|&(t, _)| t);
    vec![
        Check::new(
            "waiting time: support kept up to 0.9 t*",
            early <= 1e-3,
            format!("max u(0, t) for t <= {:.4} is {early:.3e}", 0.9 * t_star),
        ),
        Check::new(
            "waiting time: front reaches x = 0 before 2 t*",
            first.is_some_and(|t| t < 2.0 * t_star),
            match first {
                Some(t) => format!("u(0, t) > 1e-3 first at t = {t:.4} (2 t* = {:.4})", 2.0 * t_star),
                None => "u(0, t) never exceeds 1e-3".into(),
            },
        ),
    ]
}

/// Mass drift of one waiting-time run and its a priori bound.
#[derive(Clone, Debug, PartialEq)]
pub struct DriftRow {
    pub eps: f64,
    pub drift: f64,
    pub bound: f64,
}

/// Max mass drift for each `ε`, plus the ratio and bound checks.
pub fn mass_drift_study(eps: &[f64], out: Option<&Path>) -> Result<(Vec<DriftRow>, Vec<Check>, Vec<PathBuf>)> {
    let configs: Vec<RunConfig> = eps
        .iter()
        .map(|&e| {
            let mut c = waiting_time_config(e);
            c.output.snapshots.clear();
            c
        })
        .collect();
    let runs = run_sweep(&configs, out)?;
    let mut rows = Vec::new();
    let mut checks = Vec::new();
    let mut files = Vec::new();
    for (s, o, f) in &runs {
        let t_end = s.config.time.t_end;
        let e0 = s.init.entropy;
        let drift = max_mass_drift(o.steps(), &s.init.mass);
        let bound = mass_drift_bound(s.config.scheme.eps, s.space.mesh().domain_measure(), t_end, e0);
        checks.push(Check::new(
            format!("mass drift bound at eps = {:e}", s.config.scheme.eps),
            drift <= bound,
            format!("drift {drift:.3e} <= {bound:.3e}"),
        ));
        checks.extend(standard_checks(&s.config.output.name, s, o));
        rows.push(DriftRow {
            eps: s.config.scheme.eps,
            drift,
            bound,
        });
        files.extend(f.iter().cloned());
    }
    for w in rows.windows(2) {
        let ratio = w[0].drift / w[1].drift;
        checks.push(Check::new(
            format!("mass drift ratio eps {:e} / {:e}", w[0].eps, w[1].eps),
            (3.0..=30.0).contains(&ratio),
            format!("{ratio:.2} in [3, 30]"),
        ));
    }
    if let Some(d) = out {
        let path = d.join("pm-waiting-time_mass_drift.csv");
        let csv: Vec<Vec<String>> = rows
            .iter()
            .map(|r| vec![format!("{:e}", r.eps), format!("{:.16e}", r.drift), format!("{:.16e}", r.bound)])
            .collect();
        write_table(&path, &["eps", "max_drift", "bound"], &csv)?;
        files.push(path);
    }
    Ok((rows, checks, files))
}

/// Waiting-time run at `ε = 10⁻⁶` and the mass-drift study at `ε ∈ {10⁻³, 10⁻⁴, 10⁻⁵}`.
pub fn pm_waiting_time(out: Option<&Path>) -> Result<ExperimentReport> {
    let start = Instant::now();
    let mut report = ExperimentReport {
        preset: "pm-waiting-time".into(),
        ..Default::default()
    };
    let setup = Setup::new(&waiting_time_config(1e-6))?;
    let (outcome, series) = waiting_time_series(&setup)?;
    let t_star = waiting_time(2.0);
    report.checks.extend(waiting_time_checks(&series, t_star));
    report.checks.extend(standard_checks("eps=1e-6", &setup, &outcome));
    if let Some(d) = out {
        report.files.extend(write_outputs(&setup, &outcome, d)?);
        let path = d.join("pm-waiting-time_value_at_0.csv");
        let csv: Vec<Vec<String>> = series
            .iter()
            .map(|(t, v)| vec![format!("{t:.6}"), format!("{v:.16e}")])
            .collect();
        write_table(&path, &["t", "u"], &csv)?;
        report.files.push(path);
    }
    let (rows, checks, files) = mass_drift_study(&[1e-3, 1e-4, 1e-5], out)?;
    report.checks.extend(checks);
    report.files.extend(files);
    let mut s = format!("t* = {t_star:.6}\n      eps   max drift       bound\n");
    for r in &rows {
        s += &format!("{:>9.1e} {:>11.4e} {:>11.4e}\n", r.eps, r.drift, r.bound);
    }
    report.summary = s;
    report.elapsed = start.elapsed();
    Ok(report)
}

/// One Newton iterate of the first time step.
#[derive(Clone, Debug, PartialEq)]
pub struct NewtonTraceRow {
    pub eps: f64,
    pub iteration: usize,
    /// Dense 2-norm condition number of the Jacobian used in this iteration.
    pub condition: f64,
    pub w_inf: f64,
    pub residual: f64,
}

/// Full Newton on the first step with dense condition numbers. Stops at `tol`,
/// after `s_max` iterations, or at the first failure (recorded as a NaN row).
pub fn first_step_trace(setup: &Setup, eps: f64, tol: f64, s_max: usize) -> Result<Vec<NewtonTraceRow>> {
    let disc = setup.disc()?;
    let tau = setup.config.time.tau.expect("fixed step");
    let params = SchemeParams {
        eps,
        tau,
        first_step: true,
    };
    let forcing = match setup.exact {
        Some(_) => Some(setup.forcing(tau)?),
        None => None,
    };
    let state = RunState::initial(&disc, &setup.init)?;
    let mut w = state.w.clone();
    let mut rows = Vec::new();
    let inf = |w: &[f64]| w.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let norm = |r: &[f64]| r.iter().map(|v| v * v).sum::<f64>().sqrt();
    let mut r = disc.residual(&params, &w, &state.prev, forcing.as_deref())?;
    for s in 0..=s_max {
        let rn = norm(&r);
        if rn <= tol || s == s_max {
            rows.push(NewtonTraceRow {
                eps,
                iteration: s,
                condition: f64::NAN,
                w_inf: inf(&w),
                residual: rn,
            });
            break;
        }
        let jac = disc.frozen_jacobian(&params, &w)?;
        let sv = jac.to_dense().singular_values();
        let cond = sv.max() / sv.min();
        rows.push(NewtonTraceRow {
            eps,
            iteration: s,
            condition: cond,
            w_inf: inf(&w),
            residual: rn,
        });
        let fact = Factorization::build(jac, crate::linalg::LinearSolverKind::Banded, false)?;
        let mut delta = vec![0.0; w.len()];
        fact.solve(&r, &mut delta)?;
        for (x, d) in w.iter_mut().zip(&delta) {
            *x -= d;
        }
        match disc.residual(&params, &w, &state.prev, forcing.as_deref()) {
            Ok(v) if v.iter().all(|x| x.is_finite()) => r = v,
            _ => {
                rows.push(NewtonTraceRow {
                    eps,
                    iteration: s + 1,
                    condition: f64::NAN,
                    w_inf: inf(&w),
                    residual: f64::NAN,
                });
                break;
            }
        }
    }
    Ok(rows)
}

/// Condition numbers, `‖W‖∞` and residuals over the first Newton step for a
/// smooth and a degenerate porous-medium problem at several `ε`. Report only.
pub fn pm_regularization(out: Option<&Path>) -> Result<ExperimentReport> {
    let start = Instant::now();
    let mut report = ExperimentReport {
        preset: "pm-regularization".into(),
        ..Default::default()
    };
    let eps = [1e-2, 1e-3, 1e-4, 1e-5, 1e-6, 0.0];
    let mut smooth = pm_convergence_config(2, 16);
    smooth.time = TimeConfig::fixed(1e-3, 1e-3);
    let mut rough = waiting_time_config(1e-6);
    rough.mesh = MeshConfig::interval(-PI / 4.0, 5.0 * PI / 4.0, 40);
    rough.scheme.degree = 2;
    rough.time = TimeConfig::fixed(1e-3, 1e-3);
    let cases = [("smooth", smooth, 1e-10), ("degenerate", rough, 1e-12)];
    let mut summary = String::from("problem        eps  iters  max cond   final |W|inf  final residual\n");
    for (name, cfg, tol) in cases {
        let setup = Setup::new(&cfg)?;
        let traces: Vec<Vec<NewtonTraceRow>> = eps
            .par_iter()
            .map(|&e| first_step_trace(&setup, e, tol, 50))
            .collect::<Result<_>>()?;
        for t in &traces {
            let last = t.last().expect("trace has a row");
            let cmax = t.iter().map(|r| r.condition).filter(|c| c.is_finite()).fold(0.0, f64::max);
            summary += &format!(
                "{name:<11} {:>7.0e} {:>6} {:>9.3e} {:>14.4e} {:>15.3e}\n",
                last.eps, last.iteration, cmax, last.w_inf, last.residual
            );
        }
        report.checks.push(Check::new(
            format!("{name}: traces recorded"),
            traces.iter().all(|t| !t.is_empty()),
            "report only".to_string(),
        ));
        if let Some(d) = out {
            std::fs::create_dir_all(d)?;
            let path = d.join(format!("pm-regularization_{name}.csv"));
            let csv: Vec<Vec<String>> = traces
                .iter()
                .flatten()
                .map(|r| {
                    vec![
                        format!("{:e}", r.eps),
                        r.iteration.to_string(),
                        format!("{:.6e}", r.condition),
                        format!("{:.6e}", r.w_inf),
                        format!("{:.6e}", r.residual),
                    ]
                })
                .collect();
            write_table(&path, &["eps", "s", "condition", "w_inf", "residual"], &csv)?;
            report.files.push(path);
        }
    }
    report.summary = summary;
    report.elapsed = start.elapsed();
    Ok(report)
}

/// SKT manufactured convergence for `p = 1` on `nx ∈ {4, 8, 16}`.
pub fn skt_convergence(out: Option<&Path>) -> Result<ExperimentReport> {
    let start = Instant::now();
    let nx = [4, 8, 16];
    let configs: Vec<RunConfig> = nx.iter().map(|&n| skt_convergence_config(n)).collect();
    let runs = run_sweep(&configs, out)?;
    let errs: Vec<ErrorReport> = runs
        .iter()
        .map(|(_, o, _)| o.errors.clone().expect("manufactured run"))
        .collect();
    let mut report = ExperimentReport {
        preset: "skt-convergence".into(),
        ..Default::default()
    };
    let rows = rate_rows(1, &nx, &errs, 0)?;
    report.checks.extend(rate_checks("species 1", &rows));
    for (s, o, f) in &runs {
        report.checks.extend(standard_checks(&s.config.output.name, s, o));
        report.files.extend(f.iter().cloned());
    }
    let (table, csv) = rate_table(&rows);
    let other = rate_rows(1, &nx, &errs, 1)?;
    let (table2, _) = rate_table(&other);
    report.summary = format!("species 1\n{table}species 2\n{table2}");
    if let Some(d) = out {
        let path = d.join("skt-convergence_rates.csv");
        write_table(&path, &RATE_HEADER, &csv)?;
        report.files.push(path);
    }
    report.elapsed = start.elapsed();
    Ok(report)
}

/// Quantities checked on the Turing run.
#[derive(Clone, Debug, PartialEq)]
pub struct TuringSummary {
    pub t_final: f64,
    pub initial_variance: f64,
    pub final_variance: f64,
    pub min_density: f64,
    pub accepted: usize,
    pub rejected: usize,
}

/// Adaptive SKT run from the perturbed equilibrium to `T = 10`.
pub fn turing_run(cfg: &RunConfig, out: Option<&Path>) -> Result<(TuringSummary, Vec<Check>, Vec<PathBuf>)> {
    let setup = Setup::new(cfg)?;
    let mut min_density = f64::INFINITY;
    let outcome = simulate(&setup, &mut |_, r| {
        min_density = min_density.min(r.min_u[0]);
    })?;
    let initial_variance = {
        let (mut m1, mut m2) = (0.0, 0.0);
        for e in 0..setup.space.num_elements() {
            let meas = setup.space.geometry(e).measure;
            for q in 0..setup.space.num_volume_points() {
                let r = turing_datum(setup.space.volume_point(e, q))[0];
                let wq = meas * setup.space.volume_weight(q);
                m1 += wq * r;
                m2 += wq * r * r;
            }
        }
        let vol = setup.space.mesh().domain_measure();
        m2 / vol - (m1 / vol).powi(2)
    };
    let (_, final_variance) = setup.density_statistics(&outcome.state.w, 0);
    let summary = outcome.adaptive.clone().unwrap_or_default();
    let ts = TuringSummary {
        t_final: outcome.state.t,
        initial_variance,
        final_variance,
        min_density,
        accepted: summary.accepted.len(),
        rejected: summary.rejected.len(),
    };
    let checks = vec![
        Check::new(
            "turing: reaches the final time",
            (ts.t_final - cfg.time.t_end).abs() <= 1e-12 * cfg.time.t_end,
            format!("t = {} after {} accepted / {} rejected steps", ts.t_final, ts.accepted, ts.rejected),
        ),
        Check::new(
            "turing: pattern forms",
            ts.final_variance > 10.0 * ts.initial_variance,
            format!(
                "variance of rho_1 {:.3e} -> {:.3e} (ratio {:.1})",
                ts.initial_variance,
                ts.final_variance,
                ts.final_variance / ts.initial_variance
            ),
        ),
        Check::new(
            "turing: rho_1 stays positive",
            ts.min_density > 0.0,
            format!("min rho_1 = {:.3e}", ts.min_density),
        ),
    ];
    let files = match out {
        Some(d) => write_outputs(&setup, &outcome, d)?,
        None => Vec::new(),
    };
    Ok((ts, checks, files))
}

pub fn skt_turing(out: Option<&Path>) -> Result<ExperimentReport> {
    let start = Instant::now();
    let (ts, checks, files) = turing_run(&turing_config(), out)?;
    Ok(ExperimentReport {
        preset: "skt-turing".into(),
        checks,
        files,
        summary: format!("{ts:?}"),
        elapsed: start.elapsed(),
    })
}

fn demo(cfg: RunConfig, out: Option<&Path>) -> Result<ExperimentReport> {
    let start = Instant::now();
    let setup = Setup::new(&cfg)?;
    let outcome = simulate(&setup, &mut |_, _| {})?;
    let mut report = ExperimentReport {
        preset: cfg.preset.clone().unwrap_or_default(),
        checks: standard_checks(&cfg.output.name, &setup, &outcome),
        ..Default::default()
    };
    let last = outcome.rows.last().expect("initial row");
    report.summary = format!(
        "steps {}  entropy {:.6e} -> {:.6e}  mass {:?}",
        outcome.steps().len(),
        setup.init.entropy,
        last.entropy,
        last.mass
    );
    if let Some(d) = out {
        report.files = write_outputs(&setup, &outcome, d)?;
    }
    report.elapsed = start.elapsed();
    Ok(report)
}

/// Run a named preset, writing artifacts under `out` when given.
pub fn run_preset(name: &str, out: Option<&Path>) -> Result<ExperimentReport> {
    match name {
        "pm-convergence" => pm_convergence(out),
        "pm-waiting-time" => pm_waiting_time(out),
        "pm-regularization" => pm_regularization(out),
        "skt-convergence" => skt_convergence(out),
        "skt-turing" => skt_turing(out),
        "mixture-demo" => demo(mixture_demo_config(), out),
        "tumor-demo" => demo(tumor_demo_config(), out),
        other => Err(Error::Config(format!(
            "unknown preset {other:?}; available: {}",
            PRESETS.join(", ")
        ))),
    }
}

/// Run a config file end to end: simulate, write outputs, apply the per-run checks.
pub fn run_config(cfg: &RunConfig) -> Result<ExperimentReport> {
    let start = Instant::now();
    let setup = Setup::new(cfg)?;
    let outcome = simulate(&setup, &mut |_, _| {})?;
    let mut checks = standard_checks(&cfg.output.name, &setup, &outcome);
    if let Some(e) = &outcome.errors {
        checks.push(Check::new(
            "errors against the exact solution",
            e.density.iter().chain(&e.gradient).all(|v| v.is_finite()),
            format!("density {:?}, gradient {:?}", e.density, e.gradient),
        ));
    }
    let files = write_outputs(&setup, &outcome, &cfg.output.dir)?;
    let last = outcome.rows.last().expect("initial row");
    Ok(ExperimentReport {
        preset: cfg.preset.clone().unwrap_or_else(|| cfg.output.name.clone()),
        checks,
        files,
        summary: format!(
            "steps {}  t = {}  entropy {:.6e}  mass {:?}",
            outcome.steps().len(),
            outcome.state.t,
            last.entropy,
            last.mass
        ),
        elapsed: start.elapsed(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn porous_exact_solution_has_consistent_gradient() {
        let ex = Exact::Porous {
            m: 1.5,
            alpha: 2.0,
            beta: 5.0,
        };
        let (mut a, mut b, mut g) = ([0.0], [0.0], [0.0]);
        let h = 1e-6;
        ex.density(0.3, [0.4 + h, 0.0], &mut a);
        ex.density(0.3, [0.4 - h, 0.0], &mut b);
        ex.gradient(0.3, [0.4, 0.0], &mut g);
        assert!(((a[0] - b[0]) / (2.0 * h) - g[0]).abs() < 1e-8);
    }

    #[test]
    fn skt_exact_gradient_matches_differences() {
        let ex = Exact::Skt;
        let x = [0.3, 0.7];
        let mut g = [0.0; 4];
        ex.gradient(0.2, x, &mut g);
        let h = 1e-6;
        for c in 0..2 {
            let (mut xp, mut xm) = (x, x);
            xp[c] += h;
            xm[c] -= h;
            let (mut a, mut b) = ([0.0; 2], [0.0; 2]);
            ex.density(0.2, xp, &mut a);
            ex.density(0.2, xm, &mut b);
            for i in 0..2 {
                assert!(((a[i] - b[i]) / (2.0 * h) - g[i * 2 + c]).abs() < 1e-7);
            }
        }
    }

    #[test]
    fn waiting_time_for_quadratic_exponent() {
        assert!((waiting_time(2.0) - 1.0 / 12.0).abs() < 1e-15);
    }

    #[test]
    fn unknown_preset_lists_the_available_ones() {
        let e = run_preset("nope", None).unwrap_err().to_string();
        assert!(e.contains("pm-convergence") && e.contains("skt-turing"));
    }

    #[test]
    fn snapshots_split_a_fixed_run() {
        let mut c = pm_convergence_config(1, 8);
        c.time = TimeConfig::fixed(0.01, 0.05);
        c.output.snapshots = vec![0.02, 0.05];
        let setup = Setup::new(&c).unwrap();
        let o = simulate(&setup, &mut |_, _| {}).unwrap();
        assert_eq!(o.steps().len(), 5);
        let times: Vec<f64> = o.snapshots.iter().map(|s| s.0).collect();
        assert_eq!(times, vec![0.02, 0.05]);
        assert!((o.state.t - 0.05).abs() < 1e-14);
    }

    #[test]
    fn adaptive_run_resumes_after_a_snapshot() {
        let mut c = mixture_demo_config();
        c.time = TimeConfig::adaptive(1e-3, 0.01);
        c.output.snapshots = vec![0.005];
        let setup = Setup::new(&c).unwrap();
        let o = simulate(&setup, &mut |_, _| {}).unwrap();
        let a = o.adaptive.unwrap();
        let total: f64 = a.accepted.iter().sum();
        assert!((total - 0.01).abs() < 1e-12);
        assert_eq!(o.snapshots.len(), 1);
    }
}
