//! Scenario configuration: a JSON document with complex entries written as
//! `[re, im]` (plain numbers are accepted for real entries).
//!
//! Parsing is followed by resolution, which fills every default so the
//! written `resolved_config.json` reproduces the run on its own.

use std::path::{Path, PathBuf};

use esdyn_core::asymptotics::DEFAULT_CLASS_TOL;
use esdyn_core::dynamics::{Hamiltonian, Jump, RateFn};
use esdyn_core::linalg::{CMatrix, CVector};
use esdyn_core::{
    catalog_generator, AsymptoticOptions, Bell, CatalogParams, EnsembleKind, EnsembleSpec, FateOptions, Generator,
    QState, SolverOptions,
};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

pub const SCHEMA_VERSION: u32 = 1;
pub const DEFAULT_OUT_DIR: &str = "esdyn_out";

#[derive(Debug, thiserror::Error)]
#[error("{field}: {message}")]
pub struct ConfigError {
    pub field: String,
    pub message: String,
}

impl ConfigError {
    pub fn new(field: impl Into<String>, message: impl Into<String>) -> Self {
        ConfigError { field: field.into(), message: message.into() }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Entry {
    Complex([f64; 2]),
    Real(f64),
}

impl From<Entry> for Complex64 {
    fn from(e: Entry) -> Self {
        match e {
            Entry::Complex([re, im]) => Complex64::new(re, im),
            Entry::Real(re) => Complex64::new(re, 0.0),
        }
    }
}

/// Row-major list of rows.
pub type MatrixConfig = Vec<Vec<Entry>>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum RateConfig {
    Constant(f64),
    /// `c · e^{−t/τ}`.
    Exponential { c: f64, tau: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct JumpConfig {
    pub operator: MatrixConfig,
    pub rate: RateConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum GeneratorConfig {
    Catalog {
        class_id: u8,
        #[serde(default)]
        params: CatalogParams,
    },
    Explicit {
        #[serde(default = "default_dims")]
        dims: [usize; 2],
        #[serde(default, skip_serializing_if = "Option::is_none")]
        hamiltonian: Option<MatrixConfig>,
        jumps: Vec<JumpConfig>,
    },
}

fn default_dims() -> [usize; 2] {
    [2, 2]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum InitialStateConfig {
    /// `phi_plus`, `phi_minus`, `psi_plus`, `psi_minus`, `00`…`11`,
    /// `maximally_mixed`.
    Named(String),
    Werner(f64),
    Pure(Vec<Entry>),
    Matrix(MatrixConfig),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnsembleConfig {
    pub kind: EnsembleKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub target_concurrence: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Tolerances {
    /// Margins below `−margin` count as entangled.
    pub margin: f64,
    /// Theorem-class decision tolerance on PT margins.
    pub class: f64,
    pub refine: f64,
    pub trend: f64,
    pub rtol: f64,
    pub atol: f64,
    pub spectral: f64,
    pub convergence: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        let fate = FateOptions::default();
        let asym = AsymptoticOptions::default();
        Tolerances {
            margin: fate.margin_tol,
            class: DEFAULT_CLASS_TOL,
            refine: fate.refine_tol,
            trend: fate.trend_tol,
            rtol: fate.solver.rtol,
            atol: fate.solver.atol,
            spectral: asym.spectral_tol,
            convergence: asym.convergence_tol,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub horizon: f64,
    pub grid_points: usize,
    pub n_samples: usize,
    /// Horizon `T` of the `Φ(T)` vs `Φ(T/2)` test for time-dependent generators.
    pub asymptotic_horizon: f64,
    pub n_probes: usize,
    pub max_steps: usize,
    pub tolerances: Tolerances,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

impl Default for RunConfig {
    fn default() -> Self {
        let fate = FateOptions::default();
        RunConfig {
            horizon: fate.horizon,
            grid_points: fate.grid_points,
            n_samples: 1,
            asymptotic_horizon: fate.asymptotic.horizon,
            n_probes: 32,
            max_steps: fate.solver.max_steps,
            tolerances: Tolerances::default(),
            seed: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Format {
    Csv,
    Json,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputConfig {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub directory: Option<PathBuf>,
    pub formats: Vec<Format>,
}

impl Default for OutputConfig {
    fn default() -> Self {
        OutputConfig { directory: None, formats: vec![Format::Csv, Format::Json] }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    #[serde(default = "schema_version")]
    pub schema_version: u32,
    pub generator: GeneratorConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub initial_state: Option<InitialStateConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ensemble: Option<EnsembleConfig>,
    #[serde(default)]
    pub run: RunConfig,
    #[serde(default)]
    pub output: OutputConfig,
}

fn schema_version() -> u32 {
    SCHEMA_VERSION
}

/// Command-line values that override the file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
}

impl ScenarioConfig {
    pub fn from_json(text: &str) -> Result<Self, ConfigError> {
        serde_json::from_str(text).map_err(|e| ConfigError::new("config", e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| ConfigError::new("config", format!("cannot read {}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    /// Apply overrides, fill defaults and validate. Seed precedence:
    /// `--seed`, then `run.seed`, then `ensemble.seed`, then 0.
    pub fn resolve(mut self, overrides: &Overrides) -> Result<Self, ConfigError> {
        if self.schema_version != SCHEMA_VERSION {
            return Err(ConfigError::new(
                "schema_version",
                format!("unsupported version {}, expected {SCHEMA_VERSION}", self.schema_version),
            ));
        }
        let seed = overrides.seed.or(self.run.seed).or(self.ensemble.as_ref().and_then(|e| e.seed)).unwrap_or(0);
        self.run.seed = Some(seed);
        if let Some(ens) = &mut self.ensemble {
            ens.seed = Some(seed);
            if ens.kind == EnsembleKind::FixedConcurrencePure && ens.target_concurrence.is_none() {
                return Err(ConfigError::new("ensemble.target_concurrence", "required for fixed_concurrence_pure"));
            }
        }
        if let Some(out) = &overrides.out {
            self.output.directory = Some(out.clone());
        }
        if self.output.directory.is_none() {
            self.output.directory = Some(PathBuf::from(DEFAULT_OUT_DIR));
        }
        if let GeneratorConfig::Catalog { class_id, params } = &mut self.generator {
            *params = params.resolved(*class_id).map_err(|e| ConfigError::new("generator.params", e.to_string()))?;
        }
        self.validate()?;
        Ok(self)
    }

    fn validate(&self) -> Result<(), ConfigError> {
        let r = &self.run;
        let positive = |field: &str, v: f64| -> Result<(), ConfigError> {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(ConfigError::new(field, format!("must be positive and finite, got {v}")))
            }
        };
        positive("run.horizon", r.horizon)?;
        positive("run.asymptotic_horizon", r.asymptotic_horizon)?;
        let t = &r.tolerances;
        for (field, v) in [
            ("run.tolerances.margin", t.margin),
            ("run.tolerances.class", t.class),
            ("run.tolerances.refine", t.refine),
            ("run.tolerances.trend", t.trend),
            ("run.tolerances.rtol", t.rtol),
            ("run.tolerances.atol", t.atol),
            ("run.tolerances.spectral", t.spectral),
            ("run.tolerances.convergence", t.convergence),
        ] {
            positive(field, v)?;
        }
        if r.grid_points < 3 {
            return Err(ConfigError::new("run.grid_points", format!("must be at least 3, got {}", r.grid_points)));
        }
        if r.n_samples == 0 {
            return Err(ConfigError::new("run.n_samples", "must be at least 1"));
        }
        if r.max_steps == 0 {
            return Err(ConfigError::new("run.max_steps", "must be at least 1"));
        }
        if let Some(e) = &self.ensemble {
            self.ensemble_spec_of(e).validate().map_err(|err| ConfigError::new("ensemble", err.to_string()))?;
        }
        // Build once so matrix shapes and rates are checked up front.
        self.generator()?;
        if self.initial_state.is_some() {
            self.initial_state()?;
        }
        Ok(())
    }

    pub fn out_dir(&self) -> PathBuf {
        self.output.directory.clone().unwrap_or_else(|| PathBuf::from(DEFAULT_OUT_DIR))
    }

    pub fn wants(&self, f: Format) -> bool {
        self.output.formats.contains(&f)
    }

    pub fn seed(&self) -> u64 {
        self.run.seed.unwrap_or(0)
    }

    pub fn dims(&self) -> (usize, usize) {
        match &self.generator {
            GeneratorConfig::Catalog { .. } => (2, 2),
            GeneratorConfig::Explicit { dims, .. } => (dims[0], dims[1]),
        }
    }

    pub fn solver(&self) -> SolverOptions {
        let t = &self.run.tolerances;
        SolverOptions { rtol: t.rtol, atol: t.atol, max_steps: self.run.max_steps }
    }

    pub fn asymptotic_options(&self) -> AsymptoticOptions {
        let t = &self.run.tolerances;
        AsymptoticOptions {
            spectral_tol: t.spectral,
            horizon: self.run.asymptotic_horizon,
            convergence_tol: t.convergence,
            solver: self.solver(),
        }
    }

    pub fn fate_options(&self) -> FateOptions {
        let t = &self.run.tolerances;
        FateOptions {
            horizon: self.run.horizon,
            grid_points: self.run.grid_points,
            refine_tol: t.refine,
            margin_tol: t.margin,
            trend_tol: t.trend,
            solver: self.solver(),
            asymptotic: self.asymptotic_options(),
        }
    }

    fn ensemble_spec_of(&self, e: &EnsembleConfig) -> EnsembleSpec {
        EnsembleSpec { kind: e.kind, target_concurrence: e.target_concurrence.unwrap_or(0.0), seed: self.seed() }
    }

    pub fn ensemble_spec(&self) -> Result<EnsembleSpec, ConfigError> {
        let e = self.ensemble.as_ref().ok_or_else(|| ConfigError::new("ensemble", "required by this command"))?;
        Ok(self.ensemble_spec_of(e))
    }

    pub fn generator(&self) -> Result<Generator, ConfigError> {
        match &self.generator {
            GeneratorConfig::Catalog { class_id, params } => {
                catalog_generator(*class_id, params).map_err(|e| ConfigError::new("generator", e.to_string()))
            }
            GeneratorConfig::Explicit { dims, hamiltonian, jumps } => {
                let d = dims[0] * dims[1];
                if d == 0 {
                    return Err(ConfigError::new("generator.dims", "factors must be nonzero"));
                }
                let h = match hamiltonian {
                    Some(m) => matrix(m, d, "generator.hamiltonian")?,
                    None => CMatrix::zeros(d, d),
                };
                let mut built = Vec::with_capacity(jumps.len());
                for (k, j) in jumps.iter().enumerate() {
                    let op = matrix(&j.operator, d, &format!("generator.jumps[{k}].operator"))?;
                    let rate = match j.rate {
                        RateConfig::Constant(c) => RateFn::Constant(c),
                        RateConfig::Exponential { c, tau } => {
                            if !(tau > 0.0) {
                                return Err(ConfigError::new(
                                    format!("generator.jumps[{k}].rate.exponential.tau"),
                                    format!("must be positive, got {tau}"),
                                ));
                            }
                            RateFn::Exponential { amplitude: c, tau }
                        }
                    };
                    built.push(Jump::new(op, rate));
                }
                Generator::new((dims[0], dims[1]), Hamiltonian::Constant(h), built)
                    .map_err(|e| ConfigError::new("generator", e.to_string()))
            }
        }
    }

    pub fn initial_state(&self) -> Result<QState, ConfigError> {
        let field = "initial_state";
        let (da, db) = self.dims();
        let init = self.initial_state.as_ref().ok_or_else(|| ConfigError::new(field, "required by this command"))?;
        let err = |e: esdyn_core::StateError| ConfigError::new(field, e.to_string());
        match init {
            InitialStateConfig::Named(name) => named_state(name, (da, db)).ok_or_else(|| {
                ConfigError::new(
                    "initial_state.named",
                    format!("unknown state `{name}` (phi_plus, phi_minus, psi_plus, psi_minus, 00, 01, 10, 11, maximally_mixed)"),
                )
            }),
            InitialStateConfig::Werner(w) => {
                if (da, db) != (2, 2) {
                    return Err(ConfigError::new("initial_state.werner", "needs a two-qubit generator"));
                }
                QState::werner(*w).map_err(err)
            }
            InitialStateConfig::Pure(v) => {
                if v.len() != da * db {
                    return Err(ConfigError::new("initial_state.pure", format!("expected {} amplitudes, got {}", da * db, v.len())));
                }
                let psi = CVector::from_iterator(v.len(), v.iter().map(|&e| Complex64::from(e)));
                QState::from_pure(&psi, da, db).map_err(err)
            }
            InitialStateConfig::Matrix(m) => QState::new(matrix(m, da * db, "initial_state.matrix")?, da, db).map_err(err),
        }
    }
}

fn named_state(name: &str, dims: (usize, usize)) -> Option<QState> {
    if name == "maximally_mixed" {
        return Some(QState::maximally_mixed(dims.0, dims.1));
    }
    if dims != (2, 2) {
        return None;
    }
    let bell = Bell::ALL.iter().find(|b| b.name() == name).map(|&b| QState::bell(b));
    bell.or_else(|| {
        let idx = ["00", "01", "10", "11"].iter().position(|&n| n == name)?;
        Some(QState::basis(2, 2, idx))
    })
}

fn matrix(rows: &MatrixConfig, d: usize, field: &str) -> Result<CMatrix, ConfigError> {
    if rows.len() != d || rows.iter().any(|r| r.len() != d) {
        return Err(ConfigError::new(field, format!("expected a {d}x{d} matrix")));
    }
    let m = CMatrix::from_fn(d, d, |i, j| Complex64::from(rows[i][j]));
    if m.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
        return Err(ConfigError::new(field, "entries must be finite"));
    }
    Ok(m)
}

/// Inverse of [`matrix`], for emitting configs.
pub fn matrix_config(m: &CMatrix) -> MatrixConfig {
    (0..m.nrows()).map(|i| (0..m.ncols()).map(|j| Entry::Complex([m[(i, j)].re, m[(i, j)].im])).collect()).collect()
}
