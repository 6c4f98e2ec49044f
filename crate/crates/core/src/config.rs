//! TOML run configuration.
//!
//! A run file has the sections `[model]`, `[mesh]`, `[scheme]`, `[initial]`,
//! `[time]`, `[newton]`, `[output]` and `[validate]`. Only `[model]`, `[mesh]`,
//! `[initial]` and `[time]` are mandatory; everything else has defaults.
//!
//! ```toml
//! [model]
//! name = "porous-medium"
//! m = 2.0
//!
//! [mesh]
//! kind = "interval"
//! a = 0.0
//! b = 1.0
//! cells = 16
//!
//! [scheme]
//! degree = 1
//!
//! [initial]
//! datum = "pm-exact"
//!
//! [time]
//! mode = "fixed"
//! tau = 0.01
//! t_end = 0.1
//! ```

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::assembly::RegularizationKind;
use crate::error::{Error, Result};
use crate::linalg::LinearSolverKind;
use crate::mesh::{FluxRule, Mesh};
use crate::models::{turing_coefficients, ModelSpec};
use crate::stepper::{AdaptiveConfig, JacobianRefresh, NewtonConfig};

fn config_err(msg: impl Into<String>) -> Error {
    Error::Config(msg.into())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ModelName {
    PorousMedium,
    Skt,
    Mixture,
    Tumor,
}

/// `[model]`. Which parameters apply depends on `name`; setting one that does
/// not belong to the chosen model is an error.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub name: ModelName,
    /// Porous-medium exponent.
    pub m: Option<f64>,
    /// SKT diffusion coefficients, row `i` is `(a_i0, a_i1, a_i2)`.
    pub a: Option<[[f64; 3]; 2]>,
    /// SKT reaction coefficients.
    pub b: Option<[[f64; 3]; 2]>,
    /// Density box used for the SKT stabilization scale.
    pub box_cap: Option<[f64; 2]>,
    /// When true, `a` and `b` default to the Turing-instability coefficients.
    #[serde(default)]
    pub turing: bool,
    /// Mixture weights `p_i`; the number of species is their count.
    pub weights: Option<Vec<f64>>,
    pub beta: Option<f64>,
    pub theta: Option<f64>,
}

impl ModelConfig {
    pub fn porous_medium(m: f64) -> ModelConfig {
        ModelConfig {
            name: ModelName::PorousMedium,
            m: Some(m),
            a: None,
            b: None,
            box_cap: None,
            turing: false,
            weights: None,
            beta: None,
            theta: None,
        }
    }

    pub fn skt(a: [[f64; 3]; 2], b: [[f64; 3]; 2], box_cap: [f64; 2]) -> ModelConfig {
        ModelConfig {
            name: ModelName::Skt,
            a: Some(a),
            b: Some(b),
            box_cap: Some(box_cap),
            ..ModelConfig::porous_medium(2.0)
        }
        .without_m()
    }

    pub fn mixture(weights: Vec<f64>) -> ModelConfig {
        ModelConfig {
            name: ModelName::Mixture,
            weights: Some(weights),
            ..ModelConfig::porous_medium(2.0)
        }
        .without_m()
    }

    pub fn tumor(beta: f64, theta: f64) -> ModelConfig {
        ModelConfig {
            name: ModelName::Tumor,
            beta: Some(beta),
            theta: Some(theta),
            ..ModelConfig::porous_medium(2.0)
        }
        .without_m()
    }

    fn without_m(mut self) -> ModelConfig {
        self.m = None;
        self
    }

    fn stray_keys(&self) -> Vec<&'static str> {
        let set = [
            ("m", self.m.is_some()),
            ("a", self.a.is_some()),
            ("b", self.b.is_some()),
            ("box_cap", self.box_cap.is_some()),
            ("turing", self.turing),
            ("weights", self.weights.is_some()),
            ("beta", self.beta.is_some()),
            ("theta", self.theta.is_some()),
        ];
        let allowed: &[&str] = match self.name {
            ModelName::PorousMedium => &["m"],
            ModelName::Skt => &["a", "b", "box_cap", "turing"],
            ModelName::Mixture => &["weights"],
            ModelName::Tumor => &["beta", "theta"],
        };
        set.iter()
            .filter(|(k, on)| *on && !allowed.contains(k))
            .map(|(k, _)| *k)
            .collect()
    }

    pub fn build(&self) -> Result<ModelSpec> {
        let stray = self.stray_keys();
        if !stray.is_empty() {
            return Err(config_err(format!(
                "[model] keys {stray:?} do not apply to model {:?}",
                self.name
            )));
        }
        let need = |v: Option<f64>, k: &str| v.ok_or_else(|| config_err(format!("[model] {k} is required")));
        match self.name {
            ModelName::PorousMedium => ModelSpec::porous_medium(need(self.m, "m")?),
            ModelName::Skt => {
                let (ta, tb) = turing_coefficients();
                let pick = |v: Option<[[f64; 3]; 2]>, def, k: &str| match (v, self.turing) {
                    (Some(v), _) => Ok(v),
                    (None, true) => Ok(def),
                    (None, false) => Err(config_err(format!(
                        "[model] {k} is required unless turing = true"
                    ))),
                };
                ModelSpec::skt(pick(self.a, ta, "a")?, pick(self.b, tb, "b")?, self.box_cap)
            }
            ModelName::Mixture => {
                let w = self
                    .weights
                    .as_ref()
                    .ok_or_else(|| config_err("[model] weights is required"))?;
                ModelSpec::mixture(w)
            }
            ModelName::Tumor => ModelSpec::tumor(need(self.beta, "beta")?, need(self.theta, "theta")?),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MeshKind {
    Interval,
    Structured,
}

/// `[mesh]`: `kind = "interval"` with `a`, `b`, `cells`, or
/// `kind = "structured"` with `nx`, `ny`, `rect = [x0, x1, y0, y1]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MeshConfig {
    pub kind: MeshKind,
    pub a: Option<f64>,
    pub b: Option<f64>,
    pub cells: Option<usize>,
    pub nx: Option<usize>,
    pub ny: Option<usize>,
    pub rect: Option<[f64; 4]>,
}

impl MeshConfig {
    pub fn interval(a: f64, b: f64, cells: usize) -> MeshConfig {
        MeshConfig {
            kind: MeshKind::Interval,
            a: Some(a),
            b: Some(b),
            cells: Some(cells),
            nx: None,
            ny: None,
            rect: None,
        }
    }

    pub fn structured(nx: usize, ny: usize, rect: [f64; 4]) -> MeshConfig {
        MeshConfig {
            kind: MeshKind::Structured,
            a: None,
            b: None,
            cells: None,
            nx: Some(nx),
            ny: Some(ny),
            rect: Some(rect),
        }
    }

    pub fn dim(&self) -> usize {
        match self.kind {
            MeshKind::Interval => 1,
            MeshKind::Structured => 2,
        }
    }

    pub fn build(&self, eta: f64) -> Result<Mesh> {
        let missing = |k: &str| config_err(format!("[mesh] {k} is required for kind {:?}", self.kind));
        let mesh = match self.kind {
            MeshKind::Interval => {
                if self.nx.is_some() || self.ny.is_some() || self.rect.is_some() {
                    return Err(config_err("[mesh] nx, ny, rect do not apply to an interval mesh"));
                }
                Mesh::interval(
                    self.a.ok_or_else(|| missing("a"))?,
                    self.b.ok_or_else(|| missing("b"))?,
                    self.cells.ok_or_else(|| missing("cells"))?,
                )?
            }
            MeshKind::Structured => {
                if self.a.is_some() || self.b.is_some() || self.cells.is_some() {
                    return Err(config_err("[mesh] a, b, cells do not apply to a structured mesh"));
                }
                Mesh::structured_triangles(
                    self.nx.ok_or_else(|| missing("nx"))?,
                    self.ny.ok_or_else(|| missing("ny"))?,
                    self.rect.ok_or_else(|| missing("rect"))?,
                )?
            }
        };
        mesh.with_eta(eta)
    }
}

/// Regularization choice; `auto` picks ℓ from the dimension and the model.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RegularizationChoice {
    #[default]
    Auto,
    H1,
    H2,
}

/// `[scheme]`: discretization parameters.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SchemeConfig {
    pub degree: usize,
    pub flux: FluxRule,
    /// Average weight, used only by the standard flux rule.
    pub alpha: f64,
    pub eta: f64,
    pub eps: f64,
    pub regularization: RegularizationChoice,
}

impl Default for SchemeConfig {
    fn default() -> Self {
        SchemeConfig {
            degree: 1,
            flux: FluxRule::Directional,
            alpha: 1.0,
            eta: 1.0,
            eps: 0.0,
            regularization: RegularizationChoice::Auto,
        }
    }
}

impl SchemeConfig {
    pub fn regularization_kind(&self, dim: usize, model: &ModelSpec) -> RegularizationKind {
        match self.regularization {
            RegularizationChoice::Auto => RegularizationKind::auto(dim, model),
            RegularizationChoice::H1 => RegularizationKind::H1,
            RegularizationChoice::H2 => RegularizationKind::H2,
        }
    }
}

/// Closed-form initial data. The manufactured ones also fix the source and
/// boundary data and enable error reporting against the exact solution.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Datum {
    /// Spatially constant `values`.
    Constant,
    /// `sin²`-type bump supported on `[0, π]` for the porous-medium equation.
    WaitingTime,
    /// Self-similar porous-medium solution with Neumann data.
    PmExact,
    /// Manufactured SKT solution with a volume source.
    SktExact,
    /// Perturbed SKT equilibrium `(2, 0.5)`.
    Turing,
    /// Species-wise bumps around `values`.
    Bumps,
}

/// `[initial]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InitialConfig {
    pub datum: Datum,
    pub values: Option<Vec<f64>>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TimeMode {
    Fixed,
    Adaptive,
}

/// `[time]`: `mode = "fixed"` with `tau`, or `mode = "adaptive"` with `tau1`
/// and optional `shrink`, `growth`, `retry`, `tau_max`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TimeConfig {
    pub mode: TimeMode,
    pub t_end: f64,
    pub tau: Option<f64>,
    pub tau1: Option<f64>,
    pub shrink: Option<f64>,
    pub growth: Option<f64>,
    pub retry: Option<bool>,
    pub tau_max: Option<f64>,
}

impl TimeConfig {
    pub fn fixed(tau: f64, t_end: f64) -> TimeConfig {
        TimeConfig {
            mode: TimeMode::Fixed,
            t_end,
            tau: Some(tau),
            tau1: None,
            shrink: None,
            growth: None,
            retry: None,
            tau_max: None,
        }
    }

    pub fn adaptive(tau1: f64, t_end: f64) -> TimeConfig {
        TimeConfig {
            mode: TimeMode::Adaptive,
            tau: None,
            tau1: Some(tau1),
            ..TimeConfig::fixed(0.0, t_end)
        }
    }

    pub fn adaptive_config(&self) -> Result<AdaptiveConfig> {
        let tau1 = self
            .tau1
            .ok_or_else(|| config_err("[time] tau1 is required in adaptive mode"))?;
        let mut cfg = AdaptiveConfig::new(tau1);
        if let Some(s) = self.shrink {
            cfg.shrink = s;
        }
        if let Some(g) = self.growth {
            cfg.growth = g;
        }
        if let Some(r) = self.retry {
            cfg.retry = r;
        }
        cfg.tau_max = self.tau_max;
        cfg.validate()?;
        Ok(cfg)
    }

    fn validate(&self) -> Result<()> {
        if !(self.t_end >= 0.0 && self.t_end.is_finite()) {
            return Err(config_err(format!("[time] t_end must be >= 0, got {}", self.t_end)));
        }
        match self.mode {
            TimeMode::Fixed => {
                let adaptive_only = [
                    ("tau1", self.tau1.is_some()),
                    ("shrink", self.shrink.is_some()),
                    ("growth", self.growth.is_some()),
                    ("retry", self.retry.is_some()),
                    ("tau_max", self.tau_max.is_some()),
                ];
                let stray: Vec<_> = adaptive_only.iter().filter(|(_, s)| *s).map(|(k, _)| *k).collect();
                if !stray.is_empty() {
                    return Err(config_err(format!("[time] keys {stray:?} only apply to adaptive mode")));
                }
                match self.tau {
                    Some(t) if t > 0.0 => Ok(()),
                    Some(t) => Err(config_err(format!("[time] tau must be positive, got {t}"))),
                    None => Err(config_err("[time] tau is required in fixed mode")),
                }
            }
            TimeMode::Adaptive => {
                if self.tau.is_some() {
                    return Err(config_err("[time] tau only applies to fixed mode; use tau1"));
                }
                self.adaptive_config().map(|_| ())
            }
        }
    }
}

/// `[newton]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct NewtonSection {
    pub tol: f64,
    pub s_max: usize,
    pub refresh: JacobianRefresh,
    pub solver: LinearSolverKind,
    pub reaction_jacobian: bool,
    pub condition_estimate: bool,
}

impl Default for NewtonSection {
    fn default() -> Self {
        NewtonSection::from(NewtonConfig::default())
    }
}

impl From<NewtonConfig> for NewtonSection {
    fn from(c: NewtonConfig) -> Self {
        NewtonSection {
            tol: c.tol,
            s_max: c.s_max,
            refresh: c.refresh,
            solver: c.solver,
            reaction_jacobian: c.reaction_jacobian,
            condition_estimate: c.condition_estimate,
        }
    }
}

impl NewtonSection {
    pub fn config(&self) -> NewtonConfig {
        NewtonConfig {
            tol: self.tol,
            s_max: self.s_max,
            refresh: self.refresh,
            solver: self.solver,
            reaction_jacobian: self.reaction_jacobian,
            condition_estimate: self.condition_estimate,
        }
    }
}

/// `[output]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct OutputConfig {
    pub dir: PathBuf,
    /// File name stem for this run.
    pub name: String,
    /// Times at which the density field is written.
    pub snapshots: Vec<f64>,
    /// Lattice subdivisions per element edge for field files.
    pub resolution: usize,
}

impl Default for OutputConfig {
    fn default() -> Self {
        OutputConfig {
            dir: PathBuf::from("output"),
            name: "run".into(),
            snapshots: Vec::new(),
            resolution: 4,
        }
    }
}

/// `[validate]`: sampling for `validate-model`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ValidateConfig {
    pub samples: usize,
    pub seed: u64,
}

impl Default for ValidateConfig {
    fn default() -> Self {
        ValidateConfig {
            samples: 10_000,
            seed: 1,
        }
    }
}

/// The `[model]` and `[validate]` sections alone, for `validate-model`. The
/// other run sections may be present and are skipped; unknown keys elsewhere
/// are still errors.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelCheckConfig {
    pub model: ModelConfig,
    #[serde(default)]
    pub validate: ValidateConfig,
}

const RUN_SECTIONS: &[&str] = &["preset", "mesh", "scheme", "initial", "time", "newton", "output"];

impl ModelCheckConfig {
    pub fn parse(text: &str) -> Result<ModelCheckConfig> {
        let de = toml::de::Deserializer::parse(text).map_err(|e| config_err(e.to_string()))?;
        let mut unknown = Vec::new();
        let cfg: ModelCheckConfig =
            serde_ignored::deserialize(de, |path| unknown.push(path.to_string()))
                .map_err(|e| config_err(e.to_string()))?;
        unknown.retain(|p| !RUN_SECTIONS.contains(&p.split('.').next().unwrap_or("")));
        if !unknown.is_empty() {
            return Err(config_err(format!("unknown keys: {}", unknown.join(", "))));
        }
        if cfg.validate.samples == 0 {
            return Err(config_err("[validate] samples must be at least 1"));
        }
        cfg.model.build()?;
        Ok(cfg)
    }

    pub fn from_file(path: &Path) -> Result<ModelCheckConfig> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| config_err(format!("cannot read {}: {e}", path.display())))?;
        ModelCheckConfig::parse(&text)
    }
}

/// A complete, validated run description.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    /// Free-form label, e.g. the preset this config came from.
    pub preset: Option<String>,
    pub model: ModelConfig,
    pub mesh: MeshConfig,
    #[serde(default)]
    pub scheme: SchemeConfig,
    pub initial: InitialConfig,
    pub time: TimeConfig,
    #[serde(default)]
    pub newton: NewtonSection,
    #[serde(default)]
    pub output: OutputConfig,
    #[serde(default)]
    pub validate: ValidateConfig,
}

impl RunConfig {
    /// Parse and validate a TOML document. Every unknown key is reported.
    pub fn parse(text: &str) -> Result<RunConfig> {
        let de = toml::de::Deserializer::parse(text).map_err(|e| config_err(e.to_string()))?;
        let mut unknown = Vec::new();
        let cfg: RunConfig = serde_ignored::deserialize(de, |path| unknown.push(path.to_string()))
            .map_err(|e| config_err(e.to_string()))?;
        if !unknown.is_empty() {
            return Err(config_err(format!("unknown keys: {}", unknown.join(", "))));
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_file(path: &Path) -> Result<RunConfig> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| config_err(format!("cannot read {}: {e}", path.display())))?;
        RunConfig::parse(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("run config serializes")
    }

    pub fn validate(&self) -> Result<()> {
        let model = self.model.build()?;
        let s = &self.scheme;
        if !(s.eps >= 0.0 && s.eps.is_finite()) {
            return Err(config_err(format!("[scheme] eps must be >= 0, got {}", s.eps)));
        }
        if !(s.eta > 0.0 && s.eta.is_finite()) {
            return Err(config_err(format!("[scheme] eta must be positive, got {}", s.eta)));
        }
        if !(0.0..=1.0).contains(&s.alpha) {
            return Err(config_err(format!("[scheme] alpha must lie in [0, 1], got {}", s.alpha)));
        }
        let dim = self.mesh.dim();
        if dim == 1 && s.regularization == RegularizationChoice::H2 {
            return Err(config_err("[scheme] h2 regularization needs a two-dimensional mesh"));
        }
        self.mesh.build(s.eta)?;
        self.time.validate()?;
        self.newton.config().validate()?;
        if self.output.resolution == 0 {
            return Err(config_err("[output] resolution must be at least 1"));
        }
        if self.validate.samples == 0 {
            return Err(config_err("[validate] samples must be at least 1"));
        }
        self.check_datum(&model, dim)
    }

    fn check_datum(&self, model: &ModelSpec, dim: usize) -> Result<()> {
        let d = self.initial.datum;
        let values = self.initial.values.as_ref();
        let needs_values = matches!(d, Datum::Constant | Datum::Bumps);
        match (needs_values, values) {
            (true, None) => return Err(config_err(format!("[initial] values are required for datum {d:?}"))),
            (true, Some(v)) if v.len() != model.species => {
                return Err(config_err(format!(
                    "[initial] {} values given for {} species",
                    v.len(),
                    model.species
                )))
            }
            (false, Some(_)) => return Err(config_err(format!("[initial] values do not apply to datum {d:?}"))),
            _ => {}
        }
        let fits = match d {
            Datum::Constant | Datum::Bumps => true,
            Datum::WaitingTime | Datum::PmExact => model.name() == "porous-medium" && dim == 1,
            Datum::SktExact | Datum::Turing => model.name() == "skt" && dim == 2,
        };
        if !fits {
            return Err(config_err(format!(
                "[initial] datum {d:?} does not fit model {} in {dim}D",
                model.name()
            )));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"
        [model]
        name = "porous-medium"
        m = 2.0

        [mesh]
        kind = "interval"
        a = 0.0
        b = 1.0
        cells = 8

        [initial]
        datum = "pm-exact"

        [time]
        mode = "fixed"
        tau = 0.01
        t_end = 0.1
    "#;

    #[test]
    fn minimal_config_gets_defaults() {
        let c = RunConfig::parse(MINIMAL).unwrap();
        assert_eq!(c.scheme.eta, 1.0);
        assert_eq!(c.scheme.eps, 0.0);
        assert_eq!(c.scheme.flux, FluxRule::Directional);
        assert_eq!(c.scheme.regularization, RegularizationChoice::Auto);
        assert_eq!(c.newton.config(), NewtonConfig::default());
    }

    #[test]
    fn all_unknown_keys_are_listed() {
        let text = MINIMAL.replace("m = 2.0", "m = 2.0\ncolour = 1\nshape = 2") + "\n[extra]\nx = 1\n";
        let err = RunConfig::parse(&text).unwrap_err().to_string();
        for k in ["colour", "shape", "extra"] {
            assert!(err.contains(k), "{err}");
        }
    }

    #[test]
    fn porous_exponent_outside_range_is_rejected() {
        let text = MINIMAL.replace("m = 2.0", "m = 3.0");
        assert!(RunConfig::parse(&text).is_err());
    }

    #[test]
    fn skt_without_box_cap_mentions_unbounded_set() {
        let text = r#"
            [model]
            name = "skt"
            turing = true
            [mesh]
            kind = "structured"
            nx = 2
            ny = 2
            rect = [0.0, 1.0, 0.0, 1.0]
            [initial]
            datum = "turing"
            [time]
            mode = "adaptive"
            tau1 = 1e-4
            t_end = 1.0
        "#;
        let err = RunConfig::parse(text).unwrap_err().to_string();
        assert!(err.contains("unbounded"), "{err}");
        let ok = text.replace("turing = true", "turing = true\nbox_cap = [4.0, 2.0]");
        RunConfig::parse(&ok).unwrap();
    }

    #[test]
    fn negative_eps_and_stray_keys_are_rejected() {
        let neg = format!("{MINIMAL}\n[scheme]\neps = -1.0\n");
        assert!(RunConfig::parse(&neg).is_err());
        let stray = MINIMAL.replace("m = 2.0", "m = 2.0\nbeta = 1.0");
        assert!(RunConfig::parse(&stray).unwrap_err().to_string().contains("beta"));
        let both = MINIMAL.replace("tau = 0.01", "tau = 0.01\ntau1 = 0.01");
        assert!(RunConfig::parse(&both).is_err());
    }

    #[test]
    fn toml_round_trip() {
        let c = RunConfig::parse(MINIMAL).unwrap();
        assert_eq!(RunConfig::parse(&c.to_toml()).unwrap(), c);
    }

    #[test]
    fn model_check_reads_run_files_and_model_only_files() {
        let full = ModelCheckConfig::parse(MINIMAL).unwrap();
        assert_eq!(full.validate, ValidateConfig::default());
        let bare = ModelCheckConfig::parse(
            "[model]\nname = \"tumor\"\nbeta = 1.0\ntheta = 0.5\n[validate]\nsamples = 50\nseed = 3\n",
        )
        .unwrap();
        assert_eq!(bare.validate.samples, 50);
        let err = ModelCheckConfig::parse("[model]\nname = \"mixture\"\nweights = [1.0]\nbogus = 2\n")
            .unwrap_err()
            .to_string();
        assert!(err.contains("bogus"), "{err}");
    }
}
