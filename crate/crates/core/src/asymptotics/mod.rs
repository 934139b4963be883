//! Asymptotic sets of Lindblad dynamics and their position relative to the
//! separable set.
//!
//! Two computable representations are used:
//!
//! * autonomous generators: the kernel of the Liouvillian. The spectral
//!   projector `P0 = V (W†V)⁻¹ W†` onto it (right kernel `V`, left kernel
//!   `W`) is `lim exp(Lt)` and maps the state space onto the set of
//!   stationary states.
//! * time-dependent generators: the total map `Φ∞ = lim Φ(t)`, accepted only
//!   once `Φ(T)` and `Φ(T/2)` agree to the requested tolerance. The
//!   asymptotic set is the image of the state space under `Φ∞`.
//!
//! Both routes keep `limit_map`, the superoperator sending an initial state
//! to the point of the asymptotic set it converges to.

mod catalog;
mod classify;

use nalgebra::Schur;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use catalog::{catalog_entries, catalog_generator, CatalogEntry, CatalogParams, CLASS4_MIN_STRENGTH, CLASS6_MIN_STRENGTH};
pub use classify::{classify_theorem_class, Evidence, ProbeMargin, TheoremClass};

use crate::dynamics::{self, DynamicsError, Evolver, Generator, SolverOptions};
use crate::ensemble::{sample_indexed, EnsembleSpec};
use crate::geometry::GeometryError;
use crate::linalg::{self, CMatrix, CVector};
use crate::state::{QState, StateError};

/// Default tolerance on PT margins when deciding theorem classes.
pub const DEFAULT_CLASS_TOL: f64 = 1e-7;
/// Default tolerance on Liouvillian eigenvalues.
pub const DEFAULT_SPECTRAL_TOL: f64 = 1e-9;
/// Number of random states used to decide whether `Φ∞` collapses D to a point.
pub const CARDINALITY_PROBES: usize = 20;
/// Pairwise trace distance below which images count as one state.
pub const SINGLETON_TOL: f64 = 1e-8;

const CARDINALITY_SEED: u64 = 0x5eed_a5e7;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AsymptoticsError {
    #[error("generator is not autonomous")]
    NotAutonomous,
    #[error("oscillatory asymptotics: {} purely imaginary eigenvalue(s), e.g. {:?}", .eigenvalues.len(), .eigenvalues.first())]
    OscillatoryAsymptotics { eigenvalues: Vec<(f64, f64)> },
    #[error("no unit-trace state in the stationary kernel: {0}")]
    NoTraceOneElement(String),
    #[error("total map not converged at horizon {horizon}: residual {residual:.3e}")]
    NotConverged { residual: f64, horizon: f64 },
    #[error("unsupported dimension {0}x{1}: theorem classes need a PPT-decisive system")]
    UnsupportedDimension(usize, usize),
    #[error("inconclusive: margins over the asymptotic set span [{min_margin:.3e}, {max_margin:.3e}]")]
    Inconclusive { min_margin: f64, max_margin: f64, histogram: Vec<(f64, f64, usize)> },
    #[error("bad catalog parameters: {0}")]
    BadParams(String),
    #[error(transparent)]
    Dynamics(#[from] DynamicsError),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    State(#[from] StateError),
}

impl AsymptoticsError {
    pub fn name(&self) -> &'static str {
        match self {
            AsymptoticsError::NotAutonomous => "NotAutonomous",
            AsymptoticsError::OscillatoryAsymptotics { .. } => "OscillatoryAsymptotics",
            AsymptoticsError::NoTraceOneElement(_) => "NoTraceOneElement",
            AsymptoticsError::NotConverged { .. } => "NotConverged",
            AsymptoticsError::UnsupportedDimension(..) => "UnsupportedDimension",
            AsymptoticsError::Inconclusive { .. } => "Inconclusive",
            AsymptoticsError::BadParams(_) => "BadParams",
            AsymptoticsError::Dynamics(e) => e.name(),
            AsymptoticsError::Geometry(e) => e.name(),
            AsymptoticsError::State(e) => e.name(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Cardinality {
    One,
    Many,
}

#[derive(Debug, Clone)]
pub enum Representation {
    Unique(QState),
    /// `reference + span_R(basis)` intersected with the state space; the
    /// basis is traceless, Hermitian and orthonormal in the Hilbert–Schmidt
    /// inner product.
    AffineFamily { reference: QState, basis: Vec<CMatrix> },
    /// Image of the state space under a converged total map.
    ImageOfD { map: CMatrix },
}

impl Representation {
    pub fn kind(&self) -> &'static str {
        match self {
            Representation::Unique(_) => "unique",
            Representation::AffineFamily { .. } => "affine_family",
            Representation::ImageOfD { .. } => "image_of_d",
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Diagnostics {
    pub kernel_dimension: Option<usize>,
    /// Eigenvalues `(re, im)` with `|re| ≤ tol`.
    pub peripheral_eigenvalues: Vec<(f64, f64)>,
    /// Smallest `|Re λ|` outside the kernel.
    pub spectral_gap: Option<f64>,
    pub convergence_residual: Option<f64>,
    pub horizon: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AsymptoticOptions {
    pub spectral_tol: f64,
    /// Horizon `T` for the time-dependent route (`Φ(T)` vs `Φ(T/2)`).
    pub horizon: f64,
    pub convergence_tol: f64,
    pub solver: SolverOptions,
}

impl Default for AsymptoticOptions {
    fn default() -> Self {
        AsymptoticOptions {
            spectral_tol: DEFAULT_SPECTRAL_TOL,
            horizon: 50.0,
            convergence_tol: 1e-9,
            solver: SolverOptions::default(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct AsymptoticSet {
    dims: (usize, usize),
    representation: Representation,
    cardinality: Cardinality,
    diagnostics: Diagnostics,
    limit_map: CMatrix,
}

impl AsymptoticSet {
    pub fn dims(&self) -> (usize, usize) {
        self.dims
    }

    pub fn representation(&self) -> &Representation {
        &self.representation
    }

    pub fn cardinality(&self) -> Cardinality {
        self.cardinality
    }

    pub fn diagnostics(&self) -> &Diagnostics {
        &self.diagnostics
    }

    /// Superoperator sending an initial state to its asymptotic state.
    pub fn limit_map(&self) -> &CMatrix {
        &self.limit_map
    }

    /// The state an initial condition converges to.
    pub fn limit_of(&self, rho: &QState) -> Result<QState, AsymptoticsError> {
        Ok(dynamics::apply_map(&self.limit_map, rho)?)
    }

    /// The single asymptotic state when the set has one element.
    pub fn singleton(&self) -> Option<QState> {
        if self.cardinality != Cardinality::One {
            return None;
        }
        match &self.representation {
            Representation::Unique(s) => Some(s.clone()),
            Representation::AffineFamily { reference, .. } => Some(reference.clone()),
            Representation::ImageOfD { .. } => {
                self.limit_of(&QState::maximally_mixed(self.dims.0, self.dims.1)).ok()
            }
        }
    }

    /// `n` members of the set: limits of Hilbert–Schmidt random states.
    pub fn sample_members(&self, n: usize, seed: u64) -> Result<Vec<QState>, AsymptoticsError> {
        let spec = EnsembleSpec::hilbert_schmidt(seed);
        (0..n as u64)
            .map(|k| self.limit_of(&sample_indexed(&spec, self.dims, k)?))
            .collect()
    }

    /// How far `sigma` is from being a member: trace distance for a
    /// singleton, distance to the affine hull for a family, and for an image
    /// the mismatch of the least-squares preimage plus its negativity.
    pub fn membership_residual(&self, sigma: &QState) -> f64 {
        let d = sigma.dim();
        match &self.representation {
            Representation::Unique(s) => s.trace_distance(sigma).unwrap_or(f64::INFINITY),
            Representation::AffineFamily { reference, basis } => {
                let proj = affine_projection(reference.matrix(), basis, sigma.matrix());
                0.5 * linalg::hermitian_trace_norm(&(proj - sigma.matrix()))
            }
            Representation::ImageOfD { map } => {
                let pinv = match map.clone().pseudo_inverse(1e-12) {
                    Ok(p) => p,
                    Err(_) => return f64::INFINITY,
                };
                let pre = linalg::hermitize(&linalg::unvectorize(&(pinv * linalg::vectorize(sigma.matrix())), d));
                let negativity = (-linalg::min_hermitian_eigenvalue(&pre)).max(0.0);
                let trace_defect = (pre.trace().re - 1.0).abs();
                let image = linalg::unvectorize(&(map * linalg::vectorize(&pre)), d);
                0.5 * linalg::hermitian_trace_norm(&(image - sigma.matrix())) + negativity + trace_defect
            }
        }
    }
}

/// `reference + Σ_j ⟨B_j, X − reference⟩ B_j`.
fn affine_projection(reference: &CMatrix, basis: &[CMatrix], x: &CMatrix) -> CMatrix {
    let delta = x - reference;
    let mut out = reference.clone();
    for b in basis {
        out += b.scale(linalg::hs_inner(b, &delta).re);
    }
    out
}

/// Indices of the `k` smallest singular values.
fn smallest_singular_vectors(m: &CMatrix, k: usize) -> (CMatrix, Vec<f64>) {
    let svd = m.clone().svd(false, true);
    let v_t = svd.v_t.expect("requested V^T");
    let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
    order.sort_by(|&a, &b| svd.singular_values[a].total_cmp(&svd.singular_values[b]));
    let n = m.ncols();
    let mut out = CMatrix::zeros(n, k);
    let mut values = Vec::with_capacity(k);
    for (col, &i) in order.iter().take(k).enumerate() {
        out.set_column(col, &v_t.row(i).adjoint());
        values.push(svd.singular_values[i]);
    }
    (out, values)
}

/// Real Gram–Schmidt on Hermitian matrices; drops directions whose residual
/// norm falls below `cutoff`.
fn orthonormalize(candidates: Vec<CMatrix>, cutoff: f64) -> Vec<CMatrix> {
    let mut basis: Vec<CMatrix> = Vec::new();
    for mut c in candidates {
        for b in &basis {
            let overlap = linalg::hs_inner(b, &c).re;
            c -= b.scale(overlap);
        }
        let norm = linalg::hs_inner(&c, &c).re.sqrt();
        if norm > cutoff {
            basis.push(c.unscale(norm));
        }
    }
    basis
}

/// Stationary states of an autonomous generator from the Liouvillian kernel.
pub fn stationary_set_autonomous(g: &Generator, tol: f64) -> Result<AsymptoticSet, AsymptoticsError> {
    if !g.is_autonomous() {
        return Err(AsymptoticsError::NotAutonomous);
    }
    let d = g.dim();
    let l = g.liouvillian(0.0);
    let eigenvalues: Vec<Complex64> = Schur::new(l.clone())
        .eigenvalues()
        .ok_or_else(|| AsymptoticsError::NoTraceOneElement("complex Schur form not triangular".into()))?
        .iter()
        .copied()
        .collect();

    let peripheral: Vec<(f64, f64)> =
        eigenvalues.iter().filter(|z| z.re.abs() <= tol).map(|z| (z.re, z.im)).collect();
    let rotating: Vec<(f64, f64)> = peripheral.iter().copied().filter(|&(_, im)| im.abs() > tol).collect();
    if !rotating.is_empty() {
        return Err(AsymptoticsError::OscillatoryAsymptotics { eigenvalues: rotating });
    }
    let k = eigenvalues.iter().filter(|z| z.norm() <= tol).count();
    if k == 0 {
        return Err(AsymptoticsError::NoTraceOneElement("Liouvillian has no kernel".into()));
    }
    let spectral_gap = eigenvalues
        .iter()
        .filter(|z| z.norm() > tol)
        .map(|z| z.re.abs())
        .fold(None, |acc: Option<f64>, x| Some(acc.map_or(x, |a| a.min(x))));

    let (right, right_sv) = smallest_singular_vectors(&l, k);
    let (left, _) = smallest_singular_vectors(&l.adjoint(), k);
    let scale = linalg::max_abs(&l).max(1.0);
    if right_sv.iter().any(|&s| s > 1e-6 * scale) {
        return Err(AsymptoticsError::NoTraceOneElement(format!(
            "kernel of dimension {k} from the spectrum is not a numerical null space (singular values {right_sv:?})"
        )));
    }
    let gram = left.adjoint() * &right;
    let gram_inv = gram
        .try_inverse()
        .ok_or_else(|| AsymptoticsError::NoTraceOneElement("zero eigenvalue is not semisimple".into()))?;
    let projector = &right * gram_inv * left.adjoint();

    let center = linalg::vectorize(&linalg::identity(d).scale(1.0 / d as f64));
    let reference_raw = linalg::hermitize(&linalg::unvectorize(&(&projector * center), d));
    let tr = reference_raw.trace().re;
    let min = linalg::min_hermitian_eigenvalue(&reference_raw);
    if (tr - 1.0).abs() > 1e-8 || min < -1e-8 {
        return Err(AsymptoticsError::NoTraceOneElement(format!("projected state has trace {tr} and minimum eigenvalue {min:e}")));
    }
    let reference = dynamics::emit_state(&linalg::vectorize(&reference_raw), g.dims(), f64::INFINITY)
        .map_err(|e| AsymptoticsError::NoTraceOneElement(e.to_string()))?;

    let diagnostics = Diagnostics {
        kernel_dimension: Some(k),
        peripheral_eigenvalues: peripheral,
        spectral_gap,
        convergence_residual: None,
        horizon: None,
    };

    let (representation, cardinality) = if k == 1 {
        (Representation::Unique(reference), Cardinality::One)
    } else {
        let mut candidates = Vec::with_capacity(2 * k);
        for col in right.column_iter() {
            let kmat = linalg::unvectorize(&col.into_owned(), d);
            let herm = linalg::hermitize(&kmat);
            let anti = (&kmat - kmat.adjoint()) * Complex64::new(0.0, -0.5);
            for h in [herm, anti] {
                let traceless = &h - reference.matrix().scale(h.trace().re);
                candidates.push(traceless);
            }
        }
        let basis = orthonormalize(candidates, 1e-8);
        if basis.len() != k - 1 {
            return Err(AsymptoticsError::NoTraceOneElement(format!(
                "kernel of dimension {k} yields {} traceless Hermitian directions",
                basis.len()
            )));
        }
        (Representation::AffineFamily { reference, basis }, Cardinality::Many)
    };

    Ok(AsymptoticSet { dims: g.dims(), representation, cardinality, diagnostics, limit_map: projector })
}

/// Asymptotic set of a (possibly) time-dependent generator via the total
/// map, requiring `max|Φ(T) − Φ(T/2)| ≤ tol` at `T = horizon`.
pub fn asymptotic_set_nonautonomous(
    g: &Generator,
    horizon: f64,
    tol: f64,
    solver: &SolverOptions,
) -> Result<AsymptoticSet, AsymptoticsError> {
    if !(horizon > 0.0) {
        return Err(DynamicsError::InvalidTimeGrid(format!("horizon must be positive, got {horizon}")).into());
    }
    let d = g.dim();
    let n = d * d;
    let mut evolver = Evolver::new(g, *solver);
    let half = 0.5 * horizon;
    let (phi_half, _) = evolver.evolve(CMatrix::identity(n, n), 0.0, half)?;
    let (phi_full, _) = evolver.evolve(phi_half.clone(), half, horizon)?;
    let residual = linalg::max_abs(&(&phi_full - &phi_half));
    if residual > tol {
        return Err(AsymptoticsError::NotConverged { residual, horizon });
    }
    let tp = dynamics::trace_preservation_residual(&phi_full, d);
    if tp > dynamics::TRACE_PRESERVATION_TOL {
        return Err(DynamicsError::TracePreservation(tp).into());
    }

    let spec = EnsembleSpec::hilbert_schmidt(CARDINALITY_SEED);
    let images: Vec<QState> = (0..CARDINALITY_PROBES as u64)
        .map(|k| -> Result<QState, AsymptoticsError> {
            Ok(dynamics::apply_map(&phi_full, &sample_indexed(&spec, g.dims(), k)?)?)
        })
        .collect::<Result<_, _>>()?;
    let mut spread = 0.0_f64;
    for i in 0..images.len() {
        for j in (i + 1)..images.len() {
            spread = spread.max(images[i].trace_distance(&images[j])?);
        }
    }
    let cardinality = if spread <= SINGLETON_TOL { Cardinality::One } else { Cardinality::Many };
    let diagnostics = Diagnostics {
        kernel_dimension: None,
        peripheral_eigenvalues: Vec::new(),
        spectral_gap: None,
        convergence_residual: Some(residual),
        horizon: Some(horizon),
    };
    Ok(AsymptoticSet {
        dims: g.dims(),
        representation: Representation::ImageOfD { map: phi_full.clone() },
        cardinality,
        diagnostics,
        limit_map: phi_full,
    })
}

/// Spectral route for autonomous generators, total-map route otherwise.
pub fn asymptotic_set(g: &Generator, opts: &AsymptoticOptions) -> Result<AsymptoticSet, AsymptoticsError> {
    if g.is_autonomous() {
        stationary_set_autonomous(g, opts.spectral_tol)
    } else {
        asymptotic_set_nonautonomous(g, opts.horizon, opts.convergence_tol, &opts.solver)
    }
}

/// Asymptotic set plus theorem class in one call.
pub fn classify_generator(
    g: &Generator,
    opts: &AsymptoticOptions,
    class_tol: f64,
    n_probes: usize,
    seed: u64,
) -> Result<(AsymptoticSet, TheoremClass), AsymptoticsError> {
    let a = asymptotic_set(g, opts)?;
    let class = classify_theorem_class(&a, class_tol, n_probes, seed)?;
    Ok((a, class))
}

/// Vectorized pure-state projector; used by probes.
pub(crate) fn pure_projector(psi: &CVector) -> CMatrix {
    let n = psi.norm();
    linalg::outer(&psi.unscale(n))
}
