use std::fmt::Write as _;
use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use esdyn_core::asymptotics::{AsymptoticsError, Diagnostics};
use esdyn_core::dynamics::{self, uniform_grid};
use esdyn_core::fate::{margin_curve, SampleOutcome};
use esdyn_core::{
    asymptotic_set, catalog_entries, classify_theorem_class, fate_statistics, sample_indexed, Cardinality, DynamicsError,
    FateDetector, FateError, FateRecord, FateStats, TheoremClass,
};
use serde::Serialize;
use serde_json::json;

use crate::config::{matrix_config, ConfigError, Format, GeneratorConfig, MatrixConfig, Overrides, ScenarioConfig, SCHEMA_VERSION};

/// Fraction of fate samples that must succeed for exit status 0.
pub const MIN_SUCCESS_FRACTION: f64 = 0.9;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("ConfigError: {0}")]
    Config(#[from] ConfigError),
    #[error("{kind}: {message}")]
    Solver { kind: String, message: String },
    #[error("{kind}: {message}")]
    Inconclusive { kind: String, message: String },
    #[error("SampleFailures: {failed} of {total} samples failed")]
    SampleFailures { failed: usize, total: usize },
    #[error("IoError: {0}")]
    Io(String),
}

impl CliError {
    pub fn kind(&self) -> &str {
        match self {
            CliError::Config(_) => "ConfigError",
            CliError::Solver { kind, .. } | CliError::Inconclusive { kind, .. } => kind,
            CliError::SampleFailures { .. } => "SampleFailures",
            CliError::Io(_) => "IoError",
        }
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Solver { .. } => 3,
            CliError::Inconclusive { .. } => 4,
            CliError::SampleFailures { .. } => 5,
            CliError::Io(_) => 1,
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Io(e.to_string())
    }
}

fn dynamics_error(e: DynamicsError) -> CliError {
    match e {
        DynamicsError::InvalidGenerator(_) | DynamicsError::DimensionMismatch(_) | DynamicsError::InvalidTimeGrid(_) => {
            CliError::Config(ConfigError::new("generator", e.to_string()))
        }
        _ => CliError::Solver { kind: e.name().into(), message: e.to_string() },
    }
}

fn asymptotics_error(e: AsymptoticsError) -> CliError {
    match e {
        AsymptoticsError::Inconclusive { .. }
        | AsymptoticsError::OscillatoryAsymptotics { .. }
        | AsymptoticsError::NotConverged { .. }
        | AsymptoticsError::NoTraceOneElement(_) => CliError::Inconclusive { kind: e.name().into(), message: e.to_string() },
        AsymptoticsError::BadParams(_) | AsymptoticsError::UnsupportedDimension(..) => {
            CliError::Config(ConfigError::new("generator", e.to_string()))
        }
        AsymptoticsError::Dynamics(d) => dynamics_error(d),
        other => CliError::Solver { kind: other.name().into(), message: other.to_string() },
    }
}

fn fate_error(e: FateError) -> CliError {
    match e {
        FateError::HorizonTooShort { .. } => CliError::Inconclusive { kind: e.name().into(), message: e.to_string() },
        FateError::InvalidOptions(m) => CliError::Config(ConfigError::new("run", m)),
        FateError::UnsupportedDimension(..) => CliError::Config(ConfigError::new("generator", e.to_string())),
        FateError::Dynamics(d) => dynamics_error(d),
        FateError::Asymptotics(a) => asymptotics_error(a),
        other => CliError::Solver { kind: other.name().into(), message: other.to_string() },
    }
}

/// Numbers in CSV: 17 significant digits, no locale.
pub fn fmt_num(x: f64) -> String {
    format!("{x:.16e}")
}

fn fmt_opt(x: Option<f64>) -> String {
    x.map(fmt_num).unwrap_or_default()
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), CliError> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| CliError::Io(e.to_string()))?;
    text.push('\n');
    fs::write(path, text)?;
    Ok(())
}

fn prepare(config: &ScenarioConfig) -> Result<PathBuf, CliError> {
    let dir = config.out_dir();
    fs::create_dir_all(&dir)?;
    write_json(&dir.join("resolved_config.json"), config)?;
    Ok(dir)
}

fn error_json(e: &CliError) -> serde_json::Value {
    let message = match e {
        CliError::Solver { message, .. } | CliError::Inconclusive { message, .. } => message.clone(),
        other => other.to_string(),
    };
    json!({ "kind": e.kind(), "message": message, "exit_code": e.exit_code() })
}

#[derive(Serialize)]
struct Summary<'a> {
    schema_version: u32,
    horizon: f64,
    grid_points: usize,
    initial_state: MatrixConfig,
    fate: Option<&'a FateRecord>,
    error: Option<serde_json::Value>,
}

/// Propagate one initial state: `trajectory.csv` and `summary.json`.
pub fn cmd_simulate(config: &ScenarioConfig) -> Result<(), CliError> {
    let g = config.generator()?;
    let rho0 = match (&config.initial_state, &config.ensemble) {
        (Some(_), _) => config.initial_state()?,
        (None, Some(_)) if config.run.n_samples == 1 => {
            sample_indexed(&config.ensemble_spec()?, config.dims(), 0).map_err(|e| ConfigError::new("ensemble", e.to_string()))?
        }
        (None, Some(_)) => {
            return Err(ConfigError::new("run.n_samples", "simulate needs an initial_state or an ensemble with n_samples = 1").into())
        }
        (None, None) => return Err(ConfigError::new("initial_state", "simulate needs an initial_state").into()),
    };
    let dir = prepare(config)?;
    let grid = uniform_grid(config.run.horizon, config.run.grid_points);
    let traj = dynamics::propagate(&g, &rho0, &grid, &config.solver()).map_err(dynamics_error)?;
    // The trajectory's own limit; absent when the asymptotic set is not computable.
    let limit = asymptotic_set(&g, &config.asymptotic_options()).ok().and_then(|a| a.limit_of(&rho0).ok());

    if config.wants(Format::Csv) {
        let mut csv = String::from("t,margin,concurrence,trace_distance_to_A\n");
        for (p, (_, s)) in margin_curve(&traj).iter().zip(traj.iter()) {
            let dist = limit.as_ref().and_then(|l| s.trace_distance(l).ok());
            writeln!(csv, "{},{},{},{}", fmt_num(p.time), fmt_num(p.margin), fmt_opt(p.concurrence), fmt_opt(dist)).unwrap();
        }
        fs::write(dir.join("trajectory.csv"), csv)?;
    }

    let fate = if config.dims() == (2, 2) {
        FateDetector::new(&g, config.fate_options()).and_then(|d| d.detect(&rho0)).map_err(fate_error)
    } else {
        Err(CliError::Config(ConfigError::new("generator.dims", "fate detection needs a two-qubit system")))
    };
    let summary = Summary {
        schema_version: SCHEMA_VERSION,
        horizon: config.run.horizon,
        grid_points: config.run.grid_points,
        initial_state: matrix_config(rho0.matrix()),
        fate: fate.as_ref().ok(),
        error: fate.as_ref().err().map(error_json),
    };
    if config.wants(Format::Json) {
        write_json(&dir.join("summary.json"), &summary)?;
    }
    if let Ok(rec) = &fate {
        println!("fate {}", rec.fate_tag.name());
    }
    fate.map(|_| ())
}

#[derive(Serialize)]
struct Classification<'a> {
    schema_version: u32,
    class_id: Option<u8>,
    cardinality: Option<Cardinality>,
    representation: Option<&'static str>,
    evidence: Option<&'a esdyn_core::asymptotics::Evidence>,
    diagnostics: Option<&'a Diagnostics>,
    error: Option<serde_json::Value>,
    /// Margin histogram when the decision was inconclusive.
    #[serde(skip_serializing_if = "Option::is_none")]
    histogram: Option<Vec<(f64, f64, usize)>>,
}

/// Asymptotic set and theorem class; prints `class N`.
pub fn cmd_classify(config: &ScenarioConfig) -> Result<TheoremClass, CliError> {
    let g = config.generator()?;
    let dir = prepare(config)?;
    let a = asymptotic_set(&g, &config.asymptotic_options());
    let class = a
        .as_ref()
        .map_err(|e| e.clone())
        .and_then(|a| classify_theorem_class(a, config.run.tolerances.class, config.run.n_probes, config.seed()));
    let histogram = match &class {
        Err(AsymptoticsError::Inconclusive { histogram, .. }) => Some(histogram.clone()),
        _ => None,
    };
    let result = class.map_err(asymptotics_error);
    let doc = Classification {
        schema_version: SCHEMA_VERSION,
        class_id: result.as_ref().ok().map(|t| t.class_id),
        cardinality: a.as_ref().ok().map(|a| a.cardinality()),
        representation: a.as_ref().ok().map(|a| a.representation().kind()),
        evidence: result.as_ref().ok().map(|t| &t.evidence),
        diagnostics: a.as_ref().ok().map(|a| a.diagnostics()),
        error: result.as_ref().err().map(error_json),
        histogram,
    };
    if config.wants(Format::Json) {
        write_json(&dir.join("classification.json"), &doc)?;
    }
    if let Ok(t) = &result {
        println!("class {}", t.class_id);
    }
    result
}

pub fn fates_csv(outcomes: &[SampleOutcome]) -> String {
    let mut csv = String::from("seed_index,initial_concurrence,fate_tag,death_time,final_margin\n");
    for o in outcomes {
        match &o.record {
            Some(r) => writeln!(
                csv,
                "{},{},{},{},{}",
                o.seed_index,
                fmt_num(o.initial_concurrence),
                r.fate_tag.name(),
                fmt_opt(r.death_time),
                fmt_num(r.final_margin)
            ),
            None => writeln!(csv, "{},{},failed,,", o.seed_index, fmt_num(o.initial_concurrence)),
        }
        .unwrap();
    }
    csv
}

/// Ensemble fate proportions: `fates.csv` and `fates_summary.json`.
pub fn cmd_fates(config: &ScenarioConfig, workers: Option<usize>) -> Result<FateStats, CliError> {
    let g = config.generator()?;
    let spec = config.ensemble_spec()?;
    let dir = prepare(config)?;
    let n = config.run.n_samples;
    let (stats, outcomes) = fate_statistics(&g, &spec, n, &config.fate_options(), workers).map_err(fate_error)?;
    if config.wants(Format::Csv) {
        fs::write(dir.join("fates.csv"), fates_csv(&outcomes))?;
    }
    if config.wants(Format::Json) {
        write_json(&dir.join("fates_summary.json"), &json!({ "schema_version": SCHEMA_VERSION, "stats": stats }))?;
    }
    let mut out = std::io::stdout().lock();
    for (tag, f) in &stats.fractions {
        writeln!(out, "{:<26}{:>6}  {:.4}  [{:.4}, {:.4}]", tag.name(), f.count, f.fraction, f.ci_low, f.ci_high)?;
    }
    let failed = n - stats.n_succeeded;
    if (stats.n_succeeded as f64) < MIN_SUCCESS_FRACTION * n as f64 {
        return Err(CliError::SampleFailures { failed, total: n });
    }
    Ok(stats)
}

/// Print the six catalog entries and write one ready-to-run config each.
pub fn cmd_catalog(out: Option<&Path>) -> Result<Vec<PathBuf>, CliError> {
    let dir = out.map(Path::to_path_buf).unwrap_or_else(|| PathBuf::from(crate::config::DEFAULT_OUT_DIR));
    fs::create_dir_all(&dir)?;
    let mut written = Vec::new();
    let mut stdout = std::io::stdout().lock();
    for entry in catalog_entries() {
        let config = ScenarioConfig {
            schema_version: SCHEMA_VERSION,
            generator: GeneratorConfig::Catalog { class_id: entry.class_id, params: entry.params },
            initial_state: Some(crate::config::InitialStateConfig::Named("phi_plus".into())),
            ensemble: Some(crate::config::EnsembleConfig {
                kind: esdyn_core::EnsembleKind::HaarPure,
                target_concurrence: None,
                seed: None,
            }),
            run: Default::default(),
            output: crate::config::OutputConfig {
                directory: Some(PathBuf::from(format!("class{}_out", entry.class_id))),
                ..Default::default()
            },
        }
        .resolve(&Overrides::default())?;
        let path = dir.join(format!("class{}.json", entry.class_id));
        write_json(&path, &config)?;
        let params = serde_json::to_string(&entry.params).unwrap_or_default();
        writeln!(
            stdout,
            "class {}  {:<22} {:<13} params {}  {}",
            entry.class_id,
            entry.name,
            if entry.autonomous { "autonomous" } else { "time-dependent" },
            params,
            entry.description
        )?;
        if entry.class_id == 4 {
            writeln!(
                stdout,
                "         certifies only for strength c >= ln 3 + 0.5 = {:.6}: the Bell-image margin (1 - 3e^-c)/4 must be positive",
                esdyn_core::asymptotics::CLASS4_MIN_STRENGTH
            )?;
        }
        if entry.class_id == 6 {
            writeln!(
                stdout,
                "         certifies for strength c >= ln 2 + 0.5 = {:.6}: the largest margin over A is e^-c - 1/2",
                esdyn_core::asymptotics::CLASS6_MIN_STRENGTH
            )?;
        }
        written.push(path);
    }
    Ok(written)
}
