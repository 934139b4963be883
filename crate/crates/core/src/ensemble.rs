//! Reproducible random-state ensembles.
//!
//! Every draw comes from a ChaCha20 stream keyed by `(seed, index)`:
//! the generator is seeded with `seed` and switched to stream `index`.
//! Sample `k` of an ensemble is therefore a pure function of the spec, the
//! dimensions and `k`, independent of how many workers draw in parallel.

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::linalg::{self, CMatrix, CVector};
use crate::state::{QState, StateError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EnsembleKind {
    /// `G G† / tr(G G†)` with `G` a square complex Ginibre matrix.
    HilbertSchmidtMixed,
    /// Projector onto a normalized complex Gaussian vector.
    HaarPure,
    /// Two-qubit pure state of prescribed concurrence, randomized by
    /// independent Haar local unitaries.
    FixedConcurrencePure,
}

impl EnsembleKind {
    pub fn name(self) -> &'static str {
        match self {
            EnsembleKind::HilbertSchmidtMixed => "hilbert_schmidt_mixed",
            EnsembleKind::HaarPure => "haar_pure",
            EnsembleKind::FixedConcurrencePure => "fixed_concurrence_pure",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnsembleSpec {
    pub kind: EnsembleKind,
    /// Only read by [`EnsembleKind::FixedConcurrencePure`].
    #[serde(default)]
    pub target_concurrence: f64,
    pub seed: u64,
}

impl EnsembleSpec {
    pub fn new(kind: EnsembleKind, target_concurrence: f64, seed: u64) -> Result<Self, StateError> {
        let spec = EnsembleSpec { kind, target_concurrence, seed };
        spec.validate()?;
        Ok(spec)
    }

    pub fn hilbert_schmidt(seed: u64) -> Self {
        EnsembleSpec { kind: EnsembleKind::HilbertSchmidtMixed, target_concurrence: 0.0, seed }
    }

    pub fn haar_pure(seed: u64) -> Self {
        EnsembleSpec { kind: EnsembleKind::HaarPure, target_concurrence: 0.0, seed }
    }

    pub fn fixed_concurrence(target: f64, seed: u64) -> Result<Self, StateError> {
        EnsembleSpec::new(EnsembleKind::FixedConcurrencePure, target, seed)
    }

    pub fn with_seed(self, seed: u64) -> Self {
        EnsembleSpec { seed, ..self }
    }

    pub fn validate(&self) -> Result<(), StateError> {
        if !(0.0..=1.0).contains(&self.target_concurrence) {
            return Err(StateError::InvalidEnsemble(format!(
                "target_concurrence {} outside [0, 1]",
                self.target_concurrence
            )));
        }
        Ok(())
    }
}

/// The generator for draw `index` under `seed`.
pub fn stream_rng(seed: u64, index: u64) -> ChaCha20Rng {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

/// Draw sample 0 of the ensemble.
pub fn sample(spec: &EnsembleSpec, dims: (usize, usize)) -> Result<QState, StateError> {
    sample_indexed(spec, dims, 0)
}

/// Draw sample `index` of the ensemble.
pub fn sample_indexed(spec: &EnsembleSpec, dims: (usize, usize), index: u64) -> Result<QState, StateError> {
    spec.validate()?;
    let (da, db) = dims;
    if da == 0 || db == 0 {
        return Err(StateError::DimensionMismatch(format!("empty factor in {da}x{db}")));
    }
    let mut rng = stream_rng(spec.seed, index);
    match spec.kind {
        EnsembleKind::HilbertSchmidtMixed => Ok(hilbert_schmidt_state(dims, &mut rng)),
        EnsembleKind::HaarPure => {
            let psi = gaussian_vector(da * db, &mut rng);
            QState::from_pure(&psi, da, db)
        }
        EnsembleKind::FixedConcurrencePure => {
            if dims != (2, 2) {
                return Err(StateError::UnsupportedEnsemble(format!(
                    "fixed_concurrence_pure needs 2x2, got {da}x{db}"
                )));
            }
            let psi = fixed_concurrence_ket(spec.target_concurrence, &mut rng);
            QState::from_pure(&psi, 2, 2)
        }
    }
}

pub(crate) fn complex_gaussian<R: rand::Rng + ?Sized>(rng: &mut R) -> Complex64 {
    let re: f64 = StandardNormal.sample(rng);
    let im: f64 = StandardNormal.sample(rng);
    Complex64::new(re, im)
}

fn gaussian_vector<R: rand::Rng + ?Sized>(n: usize, rng: &mut R) -> CVector {
    CVector::from_fn(n, |_, _| complex_gaussian(rng))
}

fn ginibre<R: rand::Rng + ?Sized>(n: usize, rng: &mut R) -> CMatrix {
    // Filled row by row so draws do not depend on storage order.
    let mut g = CMatrix::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            g[(i, j)] = complex_gaussian(rng);
        }
    }
    g
}

fn hilbert_schmidt_state<R: rand::Rng + ?Sized>(dims: (usize, usize), rng: &mut R) -> QState {
    let g = ginibre(dims.0 * dims.1, rng);
    let w = &g * g.adjoint();
    let tr = w.trace().re;
    QState::from_trusted(linalg::hermitize(&w.unscale(tr)), dims.0, dims.1)
}

/// Haar-random `n×n` unitary: QR of a Ginibre matrix with the phases of
/// `diag(R)` moved into `Q`.
pub fn haar_unitary<R: rand::Rng + ?Sized>(n: usize, rng: &mut R) -> CMatrix {
    let qr = ginibre(n, rng).qr();
    let (mut q, r) = (qr.q(), qr.r());
    for j in 0..n {
        let d = r[(j, j)];
        let phase = if d.norm() > 0.0 { d / d.norm() } else { linalg::ONE };
        for i in 0..n {
            q[(i, j)] *= phase;
        }
    }
    q
}

/// `(U_A ⊗ U_B)(cos θ|00⟩ + sin θ|11⟩)` with `θ = ½ asin(c)`.
fn fixed_concurrence_ket<R: rand::Rng + ?Sized>(c: f64, rng: &mut R) -> CVector {
    let theta = 0.5 * c.asin();
    let schmidt = linalg::ket(&[linalg::real(theta.cos()), linalg::ZERO, linalg::ZERO, linalg::real(theta.sin())]);
    let ua = haar_unitary(2, rng);
    let ub = haar_unitary(2, rng);
    linalg::kron(&ua, &ub) * schmidt
}

/// Haar-random local unitary `U_A ⊗ U_B` for the given dimensions.
pub fn random_local_unitary<R: rand::Rng + ?Sized>(dims: (usize, usize), rng: &mut R) -> CMatrix {
    let ua = haar_unitary(dims.0, rng);
    let ub = haar_unitary(dims.1, rng);
    linalg::kron(&ua, &ub)
}
