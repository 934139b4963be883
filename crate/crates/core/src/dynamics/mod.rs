//! Lindblad generators and propagation of two-party states.
//!
//! Autonomous generators are propagated with `exp(L Δt)`, cached per
//! distinct step length. Time-dependent generators go through an adaptive
//! Dormand–Prince 5(4) integrator on the vectorized master equation.

mod generator;
pub mod integrate;

use std::collections::HashMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use generator::{liouvillian_matrix, Generator, Hamiltonian, Jump, RateFn, CHECK_TIMES};

use crate::linalg::{self, CMatrix, CVector};
use crate::state::{QState, StateError};

/// States whose minimum eigenvalue falls in `[−POSITIVITY_REPAIR, 0)` are
/// clipped back to positive; anything below is an error.
pub const POSITIVITY_REPAIR: f64 = 1e-9;

/// Trace-preservation residual allowed on computed propagators.
pub const TRACE_PRESERVATION_TOL: f64 = 1e-8;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DynamicsError {
    #[error("invalid generator: {0}")]
    InvalidGenerator(String),
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("invalid time grid: {0}")]
    InvalidTimeGrid(String),
    #[error("positivity lost at t = {time}: minimum eigenvalue {min_eigenvalue:.3e}")]
    PositivityLost { time: f64, min_eigenvalue: f64 },
    #[error("adaptive step failure at t = {time} (step {step:.3e})")]
    StepFailure { time: f64, step: f64 },
    #[error("propagator not trace preserving: residual {0:.3e}")]
    TracePreservation(f64),
    #[error(transparent)]
    State(#[from] StateError),
}

impl DynamicsError {
    pub fn name(&self) -> &'static str {
        match self {
            DynamicsError::InvalidGenerator(_) => "InvalidGenerator",
            DynamicsError::DimensionMismatch(_) => "DimensionMismatch",
            DynamicsError::InvalidTimeGrid(_) => "InvalidTimeGrid",
            DynamicsError::PositivityLost { .. } => "PositivityLost",
            DynamicsError::StepFailure { .. } => "StepFailure",
            DynamicsError::TracePreservation(_) => "TracePreservation",
            DynamicsError::State(e) => e.name(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolverOptions {
    pub rtol: f64,
    pub atol: f64,
    /// Per-interval cap on adaptive steps.
    pub max_steps: usize,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions { rtol: 1e-9, atol: 1e-12, max_steps: 1_000_000 }
    }
}

/// Diagnostics for one grid interval.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct IntervalStats {
    pub steps: usize,
    pub rejected: usize,
    /// Largest normalized local error estimate; zero on the exponential path.
    pub error_estimate: f64,
}

#[derive(Debug, Clone)]
pub struct Trajectory {
    times: Vec<f64>,
    states: Vec<QState>,
    step_stats: Vec<IntervalStats>,
}

impl Trajectory {
    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn states(&self) -> &[QState] {
        &self.states
    }

    /// One entry per interval, `len() == times().len() - 1`.
    pub fn step_stats(&self) -> &[IntervalStats] {
        &self.step_stats
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn last(&self) -> Option<(f64, &QState)> {
        self.times.last().copied().zip(self.states.last())
    }

    pub fn iter(&self) -> impl Iterator<Item = (f64, &QState)> {
        self.times.iter().copied().zip(self.states.iter())
    }
}

/// Hermitize a vectorized operator and turn it into a state, clipping
/// round-off negativity no larger than [`POSITIVITY_REPAIR`].
pub fn emit_state(v: &CVector, dims: (usize, usize), time: f64) -> Result<QState, DynamicsError> {
    let d = dims.0 * dims.1;
    let m = linalg::hermitize(&linalg::unvectorize(v, d));
    let (vals, vecs) = linalg::hermitian_eigen(&m);
    let min = vals[0];
    if min < -POSITIVITY_REPAIR {
        return Err(DynamicsError::PositivityLost { time, min_eigenvalue: min });
    }
    let m = if min < 0.0 {
        let clipped: Vec<f64> = vals.iter().map(|&l| l.max(0.0)).collect();
        let total: f64 = clipped.iter().sum();
        let rebuilt = linalg::from_spectrum(&clipped, &vecs);
        rebuilt.unscale(total)
    } else {
        m
    };
    Ok(QState::new(m, dims.0, dims.1)?)
}

fn check_state_dims(g: &Generator, rho: &QState) -> Result<(), DynamicsError> {
    if rho.dims() != g.dims() {
        return Err(DynamicsError::DimensionMismatch(format!(
            "state is {:?}, generator is {:?}",
            rho.dims(),
            g.dims()
        )));
    }
    Ok(())
}

/// Evolves vectorized operators for a fixed generator, caching exponentials
/// on the autonomous path and the adaptive step size otherwise.
pub struct Evolver<'g> {
    g: &'g Generator,
    opts: SolverOptions,
    liouvillian: Option<CMatrix>,
    cache: HashMap<u64, CMatrix>,
    h_hint: f64,
}

impl<'g> Evolver<'g> {
    pub fn new(g: &'g Generator, opts: SolverOptions) -> Self {
        let liouvillian = g.is_autonomous().then(|| g.liouvillian(0.0));
        Evolver { g, opts, liouvillian, cache: HashMap::new(), h_hint: 0.0 }
    }

    pub fn generator(&self) -> &Generator {
        self.g
    }

    /// `exp(L Δt)` for an autonomous generator, memoized by the bit pattern of `dt`.
    fn exponential(&mut self, dt: f64) -> &CMatrix {
        let l = self.liouvillian.as_ref().expect("autonomous path");
        self.cache.entry(dt.to_bits()).or_insert_with(|| linalg::expm(&l.scale(dt)))
    }

    /// Evolve a stack of vectorized operators (columns) from `t0` to `t1`.
    pub fn evolve(&mut self, y: CMatrix, t0: f64, t1: f64) -> Result<(CMatrix, IntervalStats), DynamicsError> {
        if t1 < t0 {
            return Err(DynamicsError::InvalidTimeGrid(format!("cannot evolve backwards from {t0} to {t1}")));
        }
        if t1 == t0 {
            return Ok((y, IntervalStats::default()));
        }
        if self.liouvillian.is_some() {
            let e = self.exponential(t1 - t0);
            Ok((e * y, IntervalStats { steps: 1, rejected: 0, error_estimate: 0.0 }))
        } else {
            let g = self.g;
            let lfun = |t: f64| g.liouvillian(t);
            let (y, rep) = integrate::integrate_linear(&lfun, y, t0, t1, &self.opts, &mut self.h_hint)?;
            Ok((y, IntervalStats { steps: rep.accepted, rejected: rep.rejected, error_estimate: rep.max_error }))
        }
    }

    /// State at `t1` given the state at `t0`.
    pub fn state_at(&mut self, from: &QState, t0: f64, t1: f64) -> Result<QState, DynamicsError> {
        check_state_dims(self.g, from)?;
        let v = linalg::vectorize(from.matrix());
        let n = v.len();
        let (out, _) = self.evolve(CMatrix::from_column_slice(n, 1, v.as_slice()), t0, t1)?;
        emit_state(&out.column(0).into_owned(), from.dims(), t1)
    }
}

/// Propagate `rho0` over `t_grid`. The first grid time is the time at which
/// `rho0` is given; times must be strictly increasing and nonnegative.
pub fn propagate(g: &Generator, rho0: &QState, t_grid: &[f64], opts: &SolverOptions) -> Result<Trajectory, DynamicsError> {
    check_state_dims(g, rho0)?;
    let Some(&start) = t_grid.first() else {
        return Err(DynamicsError::InvalidTimeGrid("empty grid".into()));
    };
    if !(start >= 0.0) {
        return Err(DynamicsError::InvalidTimeGrid(format!("grid starts at {start}")));
    }
    if let Some(w) = t_grid.windows(2).find(|w| !(w[1] > w[0])) {
        return Err(DynamicsError::InvalidTimeGrid(format!("not strictly increasing at {} -> {}", w[0], w[1])));
    }
    let mut evolver = Evolver::new(g, *opts);
    let n = rho0.dim() * rho0.dim();
    // The raw vector is carried forward; only emitted copies are repaired.
    let mut y = CMatrix::from_column_slice(n, 1, linalg::vectorize(rho0.matrix()).as_slice());
    let mut times = vec![start];
    let mut states = vec![rho0.clone()];
    let mut step_stats = Vec::with_capacity(t_grid.len().saturating_sub(1));
    for w in t_grid.windows(2) {
        let (next, stats) = evolver.evolve(y, w[0], w[1])?;
        y = next;
        states.push(emit_state(&y.column(0).into_owned(), rho0.dims(), w[1])?);
        times.push(w[1]);
        step_stats.push(stats);
    }
    Ok(Trajectory { times, states, step_stats })
}

/// The linear map `Φ(t)` on vectorized operators, starting at time 0.
pub fn propagator_matrix(g: &Generator, t: f64, opts: &SolverOptions) -> Result<CMatrix, DynamicsError> {
    propagator_between(g, 0.0, t, opts)
}

/// The two-time propagator `Φ(t1, t0)`.
pub fn propagator_between(g: &Generator, t0: f64, t1: f64, opts: &SolverOptions) -> Result<CMatrix, DynamicsError> {
    if !(t0 >= 0.0) || !(t1 >= t0) {
        return Err(DynamicsError::InvalidTimeGrid(format!("need 0 <= t0 <= t1, got {t0}, {t1}")));
    }
    let n = g.dim() * g.dim();
    let (phi, _) = Evolver::new(g, *opts).evolve(CMatrix::identity(n, n), t0, t1)?;
    let residual = trace_preservation_residual(&phi, g.dim());
    if residual > TRACE_PRESERVATION_TOL {
        return Err(DynamicsError::TracePreservation(residual));
    }
    Ok(phi)
}

/// `max |vec(I)† Φ − vec(I)†|`.
pub fn trace_preservation_residual(phi: &CMatrix, d: usize) -> f64 {
    let id = linalg::vectorize(&linalg::identity(d));
    let row = id.adjoint() * phi;
    row.iter().zip(id.iter()).fold(0.0_f64, |acc, (a, b)| acc.max((a - b.conj()).norm()))
}

/// Apply a superoperator to a state, repairing round-off as in [`propagate`].
pub fn apply_map(phi: &CMatrix, rho: &QState) -> Result<QState, DynamicsError> {
    let v = phi * linalg::vectorize(rho.matrix());
    emit_state(&v, rho.dims(), f64::NAN)
}

/// Uniform grid with `points` entries on `[0, horizon]`.
pub fn uniform_grid(horizon: f64, points: usize) -> Vec<f64> {
    match points {
        0 => Vec::new(),
        1 => vec![0.0],
        _ => (0..points).map(|k| horizon * k as f64 / (points - 1) as f64).collect(),
    }
}
