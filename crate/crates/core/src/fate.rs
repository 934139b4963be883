//! Entanglement fates of single trajectories and their proportions over
//! ensembles of initial states.
//!
//! A trajectory is sampled on a uniform grid; every change of the
//! entangled status (`margin < −tol`) between grid points is refined by
//! bisection, re-integrating from the last point on the known side. What
//! happens after the horizon is read off the limit map: a state still
//! entangled at the horizon dies only asymptotically when its limit sits on
//! the boundary, and stays entangled when its limit is entangled.

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::asymptotics::{asymptotic_set, AsymptoticOptions, AsymptoticSet, AsymptoticsError};
use crate::dynamics::{self, DynamicsError, Evolver, Generator, SolverOptions, Trajectory};
use crate::ensemble::{sample_indexed, EnsembleSpec};
use crate::geometry::{self, GeometryError};
use crate::state::{QState, StateError};

/// Two-sided 95% normal quantile.
pub const WILSON_Z: f64 = 1.959_963_984_540_054;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FateError {
    #[error("horizon too short: margin {final_margin:.3e} with slope {slope:.3e} at the horizon, limit margin {asymptotic_margin:.3e}")]
    HorizonTooShort { final_margin: f64, slope: f64, asymptotic_margin: f64 },
    #[error("invalid fate options: {0}")]
    InvalidOptions(String),
    #[error("unsupported dimension {0}x{1}: fates need a two-qubit system")]
    UnsupportedDimension(usize, usize),
    #[error(transparent)]
    Dynamics(#[from] DynamicsError),
    #[error(transparent)]
    Asymptotics(#[from] AsymptoticsError),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    State(#[from] StateError),
}

impl FateError {
    pub fn name(&self) -> &'static str {
        match self {
            FateError::HorizonTooShort { .. } => "HorizonTooShort",
            FateError::InvalidOptions(_) => "InvalidOptions",
            FateError::UnsupportedDimension(..) => "UnsupportedDimension",
            FateError::Dynamics(e) => e.name(),
            FateError::Asymptotics(e) => e.name(),
            FateError::Geometry(e) => e.name(),
            FateError::State(e) => e.name(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FateTag {
    SuddenDeath,
    AsymptoticDeath,
    NeverEntangled,
    AsymptoticallyEntangled,
    Revival,
}

impl FateTag {
    pub const ALL: [FateTag; 5] = [
        FateTag::SuddenDeath,
        FateTag::AsymptoticDeath,
        FateTag::NeverEntangled,
        FateTag::AsymptoticallyEntangled,
        FateTag::Revival,
    ];

    pub fn name(self) -> &'static str {
        match self {
            FateTag::SuddenDeath => "sudden_death",
            FateTag::AsymptoticDeath => "asymptotic_death",
            FateTag::NeverEntangled => "never_entangled",
            FateTag::AsymptoticallyEntangled => "asymptotically_entangled",
            FateTag::Revival => "revival",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FateRecord {
    pub initial_concurrence: f64,
    pub initial_margin: f64,
    /// Last death for a trajectory that ends separable without revivals;
    /// first death otherwise.
    pub death_time: Option<f64>,
    /// First onset of entanglement for an initially separable state.
    pub birth_time: Option<f64>,
    /// Onsets of entanglement that follow a death.
    pub revival_times: Vec<f64>,
    pub final_margin: f64,
    /// Margin of the state the trajectory converges to.
    pub asymptotic_margin: f64,
    pub fate_tag: FateTag,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FateOptions {
    pub horizon: f64,
    pub grid_points: usize,
    /// Bracket width at which crossing bisection stops.
    pub refine_tol: f64,
    /// Margins below `−margin_tol` count as entangled.
    pub margin_tol: f64,
    /// Largest `|dm/dt|` at the horizon accepted as settled.
    pub trend_tol: f64,
    pub solver: SolverOptions,
    pub asymptotic: AsymptoticOptions,
}

impl Default for FateOptions {
    fn default() -> Self {
        FateOptions {
            horizon: 10.0,
            grid_points: 400,
            refine_tol: 1e-6,
            margin_tol: geometry::DEFAULT_REGION_TOL,
            trend_tol: 1e-3,
            solver: SolverOptions::default(),
            asymptotic: AsymptoticOptions::default(),
        }
    }
}

impl FateOptions {
    pub fn validate(&self) -> Result<(), FateError> {
        let bad = |msg: String| Err(FateError::InvalidOptions(msg));
        if !(self.horizon > 0.0 && self.horizon.is_finite()) {
            return bad(format!("horizon must be positive and finite, got {}", self.horizon));
        }
        if self.grid_points < 3 {
            return bad(format!("grid_points must be at least 3, got {}", self.grid_points));
        }
        for (name, v) in [("refine_tol", self.refine_tol), ("margin_tol", self.margin_tol), ("trend_tol", self.trend_tol)] {
            if !(v > 0.0) {
                return bad(format!("{name} must be positive, got {v}"));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Kind {
    Death,
    Birth,
}

/// Fate detection for one generator; the limit map is computed once.
pub struct FateDetector<'g> {
    g: &'g Generator,
    opts: FateOptions,
    limit: AsymptoticSet,
    grid: Vec<f64>,
}

impl<'g> FateDetector<'g> {
    pub fn new(g: &'g Generator, opts: FateOptions) -> Result<Self, FateError> {
        opts.validate()?;
        if g.dims() != (2, 2) {
            return Err(FateError::UnsupportedDimension(g.dims().0, g.dims().1));
        }
        let limit = asymptotic_set(g, &opts.asymptotic)?;
        let grid = dynamics::uniform_grid(opts.horizon, opts.grid_points);
        Ok(FateDetector { g, opts, limit, grid })
    }

    pub fn options(&self) -> &FateOptions {
        &self.opts
    }

    pub fn asymptotic_set(&self) -> &AsymptoticSet {
        &self.limit
    }

    fn entangled(&self, m: f64) -> bool {
        m < -self.opts.margin_tol
    }

    pub fn detect(&self, rho0: &QState) -> Result<FateRecord, FateError> {
        if rho0.dims() != (2, 2) {
            return Err(FateError::UnsupportedDimension(rho0.dim_a(), rho0.dim_b()));
        }
        let tol = self.opts.margin_tol;
        let traj = dynamics::propagate(self.g, rho0, &self.grid, &self.opts.solver)?;
        let mut evolver = Evolver::new(self.g, self.opts.solver);

        let mut points: Vec<(f64, QState, f64)> =
            traj.iter().map(|(t, s)| (t, s.clone(), geometry::min_pt_eigenvalue(s))).collect();
        self.subdivide_tangential(&mut points, &mut evolver)?;

        let mut events: Vec<(f64, Kind)> = Vec::new();
        for w in points.windows(2) {
            let (a, b) = (&w[0], &w[1]);
            if self.entangled(a.2) != self.entangled(b.2) {
                let t = self.bisect(a, b.0, &mut evolver)?;
                let kind = if self.entangled(a.2) { Kind::Death } else { Kind::Birth };
                events.push((t, kind));
            }
        }

        let last = points.last().expect("grid has points");
        let prev = &points[points.len() - 2];
        let final_margin = last.2;
        let slope = (last.2 - prev.2) / (last.0 - prev.0);
        let asymptotic_margin = geometry::min_pt_eigenvalue(&self.limit.limit_of(rho0)?);
        let too_short = || FateError::HorizonTooShort { final_margin, slope, asymptotic_margin };
        if slope.abs() > self.opts.trend_tol {
            return Err(too_short());
        }

        let initial_margin = points[0].2;
        let initially_entangled = self.entangled(initial_margin);
        let deaths: Vec<f64> = events.iter().filter(|e| e.1 == Kind::Death).map(|e| e.0).collect();
        let first_death = deaths.first().copied();
        let revival_times: Vec<f64> =
            events.iter().filter(|e| e.1 == Kind::Birth && first_death.is_some_and(|d| e.0 > d)).map(|e| e.0).collect();
        let birth_time = if initially_entangled {
            None
        } else {
            events.iter().find(|e| e.1 == Kind::Birth).map(|e| e.0)
        };

        let (fate_tag, death_time) = if self.entangled(final_margin) {
            let tag = if asymptotic_margin < -tol {
                FateTag::AsymptoticallyEntangled
            } else if asymptotic_margin <= tol {
                FateTag::AsymptoticDeath
            } else {
                return Err(too_short());
            };
            (tag, first_death)
        } else if asymptotic_margin < -tol {
            // Separable now, entangled in the limit: a birth lies beyond the horizon.
            return Err(too_short());
        } else if events.is_empty() && !initially_entangled {
            (FateTag::NeverEntangled, None)
        } else if !revival_times.is_empty() {
            (FateTag::Revival, first_death)
        } else {
            (FateTag::SuddenDeath, deaths.last().copied())
        };

        Ok(FateRecord {
            initial_concurrence: geometry::concurrence(rho0)?,
            initial_margin,
            death_time,
            birth_time,
            revival_times,
            final_margin,
            asymptotic_margin,
            fate_tag,
        })
    }

    /// Bisect the status change between `a` and `t_b`; returns the upper end
    /// of the final bracket, the first time seen on the far side.
    fn bisect(&self, a: &(f64, QState, f64), t_b: f64, evolver: &mut Evolver) -> Result<f64, FateError> {
        let side = self.entangled(a.2);
        let (mut lo_t, mut lo_state) = (a.0, a.1.clone());
        let mut hi_t = t_b;
        while hi_t - lo_t > self.opts.refine_tol {
            let mid = 0.5 * (lo_t + hi_t);
            let s = evolver.state_at(&lo_state, lo_t, mid)?;
            if self.entangled(geometry::min_pt_eigenvalue(&s)) == side {
                lo_t = mid;
                lo_state = s;
            } else {
                hi_t = mid;
            }
        }
        Ok(hi_t)
    }

    /// One pass of 4-way subdivision over grid intervals whose endpoints
    /// agree in status but where the curve may dip across the threshold
    /// unseen: both ends within `10·tol` of it, or a parabola through three
    /// neighbouring points peaking on the other side inside the interval.
    fn subdivide_tangential(&self, points: &mut Vec<(f64, QState, f64)>, evolver: &mut Evolver) -> Result<(), FateError> {
        let thr = -self.opts.margin_tol;
        let near = |m: f64| (m - thr).abs() < 10.0 * self.opts.margin_tol;
        let mut risky = Vec::new();
        for k in 0..points.len() - 1 {
            let (m0, m1) = (points[k].2, points[k + 1].2);
            if self.entangled(m0) != self.entangled(m1) {
                continue;
            }
            let mut risk = near(m0) && near(m1);
            for j in [k.saturating_sub(1), k] {
                if j + 2 < points.len() && !risk {
                    risk = parabola_crosses(&points[j..j + 3], points[k].0, points[k + 1].0, thr, self.entangled(m0));
                }
            }
            if risk {
                risky.push(k);
            }
        }
        for &k in risky.iter().rev() {
            let (t0, t1) = (points[k].0, points[k + 1].0);
            let mut inserted = Vec::with_capacity(3);
            let (mut t_prev, mut s_prev) = (t0, points[k].1.clone());
            for i in 1..4 {
                let t = t0 + (t1 - t0) * i as f64 / 4.0;
                let s = evolver.state_at(&s_prev, t_prev, t)?;
                let m = geometry::min_pt_eigenvalue(&s);
                inserted.push((t, s.clone(), m));
                (t_prev, s_prev) = (t, s);
            }
            points.splice(k + 1..k + 1, inserted);
        }
        Ok(())
    }
}

/// Whether the parabola through three `(t, _, m)` points has an extremum in
/// `(lo, hi)` lying across `thr` from the endpoints' side.
fn parabola_crosses(p: &[(f64, QState, f64)], lo: f64, hi: f64, thr: f64, entangled_side: bool) -> bool {
    let (x0, x1, x2) = (p[0].0, p[1].0, p[2].0);
    let (y0, y1, y2) = (p[0].2, p[1].2, p[2].2);
    let d01 = (y1 - y0) / (x1 - x0);
    let d12 = (y2 - y1) / (x2 - x1);
    let a = (d12 - d01) / (x2 - x0);
    if a == 0.0 {
        return false;
    }
    let b = d01 - a * (x0 + x1);
    let t_ext = -b / (2.0 * a);
    if !(t_ext > lo && t_ext < hi) {
        return false;
    }
    let m_ext = y1 + d01 * (t_ext - x1) + a * (t_ext - x0) * (t_ext - x1);
    if entangled_side {
        m_ext >= thr
    } else {
        m_ext < thr
    }
}

pub fn detect_fate(g: &Generator, rho0: &QState, opts: &FateOptions) -> Result<FateRecord, FateError> {
    FateDetector::new(g, *opts)?.detect(rho0)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MarginPoint {
    pub time: f64,
    pub margin: f64,
    /// Present for two-qubit trajectories.
    pub concurrence: Option<f64>,
}

pub fn margin_curve(traj: &Trajectory) -> Vec<MarginPoint> {
    traj.iter()
        .map(|(time, s)| MarginPoint {
            time,
            margin: geometry::min_pt_eigenvalue(s),
            concurrence: geometry::concurrence(s).ok(),
        })
        .collect()
}

/// Wilson score interval for `k` successes out of `n`.
pub fn wilson_interval(k: usize, n: usize) -> (f64, f64) {
    if n == 0 {
        return (0.0, 1.0);
    }
    let n_f = n as f64;
    let p = k as f64 / n_f;
    let z2 = WILSON_Z * WILSON_Z;
    let denom = 1.0 + z2 / n_f;
    let center = (p + z2 / (2.0 * n_f)) / denom;
    let half = WILSON_Z / denom * (p * (1.0 - p) / n_f + z2 / (4.0 * n_f * n_f)).sqrt();
    ((center - half).max(0.0).min(p), (center + half).min(1.0).max(p))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Fraction {
    pub count: usize,
    pub fraction: f64,
    pub ci_low: f64,
    pub ci_high: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleOutcome {
    pub seed_index: u64,
    pub initial_concurrence: f64,
    pub record: Option<FateRecord>,
    /// Error kind and message for failed samples.
    pub error: Option<(String, String)>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FateStats {
    pub ensemble: EnsembleSpec,
    pub horizon: f64,
    pub n_samples: usize,
    pub n_succeeded: usize,
    /// Failures by error kind.
    pub failures: BTreeMap<String, usize>,
    /// Over successful samples; every tag is present.
    pub fractions: BTreeMap<FateTag, Fraction>,
    /// First seed index attaining each observed tag.
    pub exemplars: BTreeMap<FateTag, u64>,
}

impl FateStats {
    pub fn fraction(&self, tag: FateTag) -> &Fraction {
        &self.fractions[&tag]
    }
}

/// Run `n` samples of `spec` (indices `0..n` of its seed stream) and tally
/// fates. `workers = None` uses the global thread pool; results do not
/// depend on the worker count.
pub fn fate_statistics(
    g: &Generator,
    spec: &EnsembleSpec,
    n: usize,
    opts: &FateOptions,
    workers: Option<usize>,
) -> Result<(FateStats, Vec<SampleOutcome>), FateError> {
    if n == 0 {
        return Err(FateError::InvalidOptions("n must be at least 1".into()));
    }
    spec.validate()?;
    let detector = FateDetector::new(g, *opts)?;
    let run = |k: u64| -> SampleOutcome {
        let rho = match sample_indexed(spec, (2, 2), k) {
            Ok(r) => r,
            Err(e) => {
                return SampleOutcome {
                    seed_index: k,
                    initial_concurrence: f64::NAN,
                    record: None,
                    error: Some((e.name().into(), e.to_string())),
                }
            }
        };
        let c0 = geometry::concurrence(&rho).unwrap_or(f64::NAN);
        match detector.detect(&rho) {
            Ok(rec) => SampleOutcome { seed_index: k, initial_concurrence: c0, record: Some(rec), error: None },
            Err(e) => SampleOutcome {
                seed_index: k,
                initial_concurrence: c0,
                record: None,
                error: Some((e.name().into(), e.to_string())),
            },
        }
    };
    let outcomes: Vec<SampleOutcome> = match workers {
        Some(w) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(w.max(1))
                .build()
                .map_err(|e| FateError::InvalidOptions(format!("thread pool: {e}")))?;
            pool.install(|| (0..n as u64).into_par_iter().map(run).collect())
        }
        None => (0..n as u64).into_par_iter().map(run).collect(),
    };
    Ok((tally(spec, opts.horizon, &outcomes), outcomes))
}

fn tally(spec: &EnsembleSpec, horizon: f64, outcomes: &[SampleOutcome]) -> FateStats {
    let mut counts: BTreeMap<FateTag, usize> = FateTag::ALL.iter().map(|&t| (t, 0)).collect();
    let mut failures = BTreeMap::new();
    let mut exemplars = BTreeMap::new();
    for o in outcomes {
        match (&o.record, &o.error) {
            (Some(rec), _) => {
                *counts.get_mut(&rec.fate_tag).expect("all tags present") += 1;
                exemplars.entry(rec.fate_tag).or_insert(o.seed_index);
            }
            (None, e) => *failures.entry(e.as_ref().map_or_else(String::new, |e| e.0.clone())).or_insert(0) += 1,
        }
    }
    let n_ok: usize = counts.values().sum();
    let fractions = counts
        .into_iter()
        .map(|(tag, count)| {
            let fraction = if n_ok == 0 { 0.0 } else { count as f64 / n_ok as f64 };
            let (ci_low, ci_high) = wilson_interval(count, n_ok);
            (tag, Fraction { count, fraction, ci_low, ci_high })
        })
        .collect();
    FateStats {
        ensemble: *spec,
        horizon,
        n_samples: outcomes.len(),
        n_succeeded: n_ok,
        failures,
        fractions,
        exemplars,
    }
}
