//! Bipartite density operators.
//!
//! Basis ordering is `|i_A j_B⟩ ↦ i·dim_b + j` (the B index runs fastest).

use std::fmt;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::linalg::{self, CMatrix, CVector};

/// Tolerance used when validating states.
pub const STATE_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Subsystem {
    A,
    B,
}

/// Which density-operator property a candidate matrix failed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Invariant {
    Hermitian,
    UnitTrace,
    PositiveSemidefinite,
}

impl fmt::Display for Invariant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Invariant::Hermitian => "hermiticity",
            Invariant::UnitTrace => "unit trace",
            Invariant::PositiveSemidefinite => "positive semidefiniteness",
        })
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum StateError {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("not a state: {invariant} violated by {violation:.3e}")]
    NotAState { invariant: Invariant, violation: f64 },
    #[error("unsupported ensemble: {0}")]
    UnsupportedEnsemble(String),
    #[error("invalid ensemble: {0}")]
    InvalidEnsemble(String),
}

impl StateError {
    pub fn name(&self) -> &'static str {
        match self {
            StateError::DimensionMismatch(_) => "DimensionMismatch",
            StateError::NotAState { .. } => "NotAState",
            StateError::UnsupportedEnsemble(_) => "UnsupportedEnsemble",
            StateError::InvalidEnsemble(_) => "InvalidEnsemble",
        }
    }
}

/// The four Bell states.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Bell {
    PhiPlus,
    PhiMinus,
    PsiPlus,
    PsiMinus,
}

impl Bell {
    pub const ALL: [Bell; 4] = [Bell::PhiPlus, Bell::PhiMinus, Bell::PsiPlus, Bell::PsiMinus];

    pub fn ket(self) -> CVector {
        let h = std::f64::consts::FRAC_1_SQRT_2;
        let amps = match self {
            Bell::PhiPlus => [h, 0.0, 0.0, h],
            Bell::PhiMinus => [h, 0.0, 0.0, -h],
            Bell::PsiPlus => [0.0, h, h, 0.0],
            Bell::PsiMinus => [0.0, h, -h, 0.0],
        };
        CVector::from_iterator(4, amps.iter().map(|&a| linalg::real(a)))
    }

    pub fn name(self) -> &'static str {
        match self {
            Bell::PhiPlus => "phi_plus",
            Bell::PhiMinus => "phi_minus",
            Bell::PsiPlus => "psi_plus",
            Bell::PsiMinus => "psi_minus",
        }
    }
}

/// A validated density operator on `C^dim_a ⊗ C^dim_b`.
#[derive(Debug, Clone, PartialEq)]
pub struct QState {
    dim_a: usize,
    dim_b: usize,
    matrix: CMatrix,
}

impl QState {
    /// Validate `matrix` as a density operator. The matrix is symmetrized to
    /// `(M + M†)/2` once its Hermiticity defect is known to be within
    /// [`STATE_TOL`].
    pub fn new(matrix: CMatrix, dim_a: usize, dim_b: usize) -> Result<Self, StateError> {
        let d = dim_a * dim_b;
        if dim_a == 0 || dim_b == 0 || matrix.nrows() != d || matrix.ncols() != d {
            return Err(StateError::DimensionMismatch(format!(
                "{}x{} matrix for dims {dim_a}x{dim_b}",
                matrix.nrows(),
                matrix.ncols()
            )));
        }
        let defect = linalg::hermiticity_defect(&matrix);
        if defect > STATE_TOL {
            return Err(StateError::NotAState { invariant: Invariant::Hermitian, violation: defect });
        }
        let matrix = linalg::hermitize(&matrix);
        let tr = matrix.trace().re;
        if (tr - 1.0).abs() > STATE_TOL {
            return Err(StateError::NotAState { invariant: Invariant::UnitTrace, violation: (tr - 1.0).abs() });
        }
        let min = linalg::min_hermitian_eigenvalue(&matrix);
        if min < -STATE_TOL {
            return Err(StateError::NotAState { invariant: Invariant::PositiveSemidefinite, violation: -min });
        }
        Ok(QState { dim_a, dim_b, matrix })
    }

    /// Projector onto a normalized copy of `psi`.
    pub fn from_pure(psi: &CVector, dim_a: usize, dim_b: usize) -> Result<Self, StateError> {
        let norm = psi.norm();
        if norm == 0.0 || !norm.is_finite() {
            return Err(StateError::NotAState { invariant: Invariant::UnitTrace, violation: 1.0 });
        }
        QState::new(linalg::outer(&psi.unscale(norm)), dim_a, dim_b)
    }

    pub fn maximally_mixed(dim_a: usize, dim_b: usize) -> Self {
        let d = dim_a * dim_b;
        QState { dim_a, dim_b, matrix: linalg::identity(d).scale(1.0 / d as f64) }
    }

    /// `|index⟩⟨index|` in the product computational basis.
    pub fn basis(dim_a: usize, dim_b: usize, index: usize) -> Self {
        let d = dim_a * dim_b;
        assert!(index < d, "basis index out of range");
        let mut matrix = CMatrix::zeros(d, d);
        matrix[(index, index)] = linalg::ONE;
        QState { dim_a, dim_b, matrix }
    }

    pub fn bell(which: Bell) -> Self {
        QState { dim_a: 2, dim_b: 2, matrix: linalg::outer(&which.ket()) }
    }

    /// `w |Φ+⟩⟨Φ+| + (1 − w) I/4`.
    pub fn werner(w: f64) -> Result<Self, StateError> {
        let phi = QState::bell(Bell::PhiPlus);
        QState::new(phi.matrix.scale(w) + linalg::identity(4).scale((1.0 - w) / 4.0), 2, 2)
    }

    /// Internal constructor for matrices already known to be states.
    pub(crate) fn from_trusted(matrix: CMatrix, dim_a: usize, dim_b: usize) -> Self {
        debug_assert_eq!(matrix.nrows(), dim_a * dim_b);
        QState { dim_a, dim_b, matrix }
    }

    pub fn dim_a(&self) -> usize {
        self.dim_a
    }

    pub fn dim_b(&self) -> usize {
        self.dim_b
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.dim_a, self.dim_b)
    }

    /// Total dimension `dim_a · dim_b`.
    pub fn dim(&self) -> usize {
        self.dim_a * self.dim_b
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.matrix
    }

    pub fn into_matrix(self) -> CMatrix {
        self.matrix
    }

    pub fn eigenvalues(&self) -> Vec<f64> {
        linalg::hermitian_eigenvalues(&self.matrix)
    }

    pub fn rank(&self, tol: f64) -> usize {
        self.eigenvalues().iter().filter(|&&l| l > tol).count()
    }

    pub fn purity(&self) -> f64 {
        linalg::hs_inner(&self.matrix, &self.matrix).re
    }

    /// Partial transpose on the chosen factor. The result is Hermitian with
    /// unit trace but need not be positive.
    pub fn partial_transpose(&self, subsystem: Subsystem) -> CMatrix {
        partial_transpose_matrix(&self.matrix, self.dim_a, self.dim_b, subsystem)
    }

    /// Reduced state on `keep`.
    pub fn partial_trace(&self, keep: Subsystem) -> QState {
        let (da, db) = (self.dim_a, self.dim_b);
        let m = &self.matrix;
        let out = match keep {
            Subsystem::A => CMatrix::from_fn(da, da, |i, k| (0..db).map(|j| m[(i * db + j, k * db + j)]).sum()),
            Subsystem::B => CMatrix::from_fn(db, db, |j, l| (0..da).map(|i| m[(i * db + j, i * db + l)]).sum()),
        };
        let (na, nb) = match keep {
            Subsystem::A => (da, 1),
            Subsystem::B => (1, db),
        };
        QState::from_trusted(linalg::hermitize(&out), na, nb)
    }

    /// `self ⊗ other` with `self` on A and `other` on B. Both inputs are
    /// treated as single-party states of their total dimension.
    pub fn tensor(&self, other: &QState) -> QState {
        QState::from_trusted(linalg::kron(&self.matrix, &other.matrix), self.dim(), other.dim())
    }

    /// `weight · self + (1 − weight) · other`.
    pub fn mix(&self, other: &QState, weight: f64) -> Result<QState, StateError> {
        self.check_same_dims(other)?;
        if !(0.0..=1.0).contains(&weight) {
            return Err(StateError::NotAState { invariant: Invariant::PositiveSemidefinite, violation: weight.abs() });
        }
        Ok(QState::from_trusted(
            self.matrix.scale(weight) + other.matrix.scale(1.0 - weight),
            self.dim_a,
            self.dim_b,
        ))
    }

    /// Apply a unitary (or any matrix) by conjugation, `U ρ U†`.
    pub fn conjugate_by(&self, u: &CMatrix) -> Result<QState, StateError> {
        QState::new(u * &self.matrix * u.adjoint(), self.dim_a, self.dim_b)
    }

    /// Half the trace norm of `self − other`.
    pub fn trace_distance(&self, other: &QState) -> Result<f64, StateError> {
        self.check_same_dims(other)?;
        Ok(0.5 * linalg::hermitian_trace_norm(&(&self.matrix - &other.matrix)))
    }

    fn check_same_dims(&self, other: &QState) -> Result<(), StateError> {
        if self.dims() != other.dims() {
            return Err(StateError::DimensionMismatch(format!(
                "{}x{} vs {}x{}",
                self.dim_a, self.dim_b, other.dim_a, other.dim_b
            )));
        }
        Ok(())
    }
}

/// Partial transpose of an arbitrary `d×d` matrix with `d = dim_a·dim_b`.
pub fn partial_transpose_matrix(m: &CMatrix, dim_a: usize, dim_b: usize, subsystem: Subsystem) -> CMatrix {
    let d = dim_a * dim_b;
    assert_eq!(m.nrows(), d, "matrix side must equal dim_a * dim_b");
    let mut out = CMatrix::zeros(d, d);
    for i in 0..dim_a {
        for j in 0..dim_b {
            for k in 0..dim_a {
                for l in 0..dim_b {
                    let v = m[(i * dim_b + j, k * dim_b + l)];
                    match subsystem {
                        Subsystem::B => out[(i * dim_b + l, k * dim_b + j)] = v,
                        Subsystem::A => out[(k * dim_b + j, i * dim_b + l)] = v,
                    }
                }
            }
        }
    }
    out
}

/// Convenience: product pure state from two single-party kets.
pub fn product_ket(a: &[Complex64], b: &[Complex64]) -> CVector {
    linalg::kron(&CMatrix::from_column_slice(a.len(), 1, a), &CMatrix::from_column_slice(b.len(), 1, b))
        .column(0)
        .into_owned()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ensemble::{sample_indexed, EnsembleSpec};
    use crate::linalg::{max_abs, real};
    use proptest::prelude::*;

    fn diag(vals: &[f64]) -> CMatrix {
        CMatrix::from_diagonal(&CVector::from_iterator(vals.len(), vals.iter().map(|&v| real(v))))
    }

    #[test]
    fn new_state_accepts_maximally_mixed() {
        let s = QState::new(linalg::identity(4).scale(0.25), 2, 2).unwrap();
        assert_eq!(s.rank(1e-12), 4);
        assert!((s.purity() - 0.25).abs() < 1e-15);
    }

    #[test]
    fn new_state_accepts_product_projector() {
        let s = QState::new(QState::basis(2, 2, 0).into_matrix(), 2, 2).unwrap();
        assert_eq!(s.rank(1e-12), 1);
    }

    #[test]
    fn new_state_reports_psd_violation() {
        let err = QState::new(diag(&[0.6, 0.6, -0.1, -0.1]), 2, 2).unwrap_err();
        match err {
            StateError::NotAState { invariant, violation } => {
                assert_eq!(invariant, Invariant::PositiveSemidefinite);
                assert!((violation - 0.1).abs() < 1e-12);
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn new_state_reports_trace_and_hermiticity() {
        let err = QState::new(diag(&[0.5, 0.5, 0.5, 0.5]), 2, 2).unwrap_err();
        assert!(matches!(err, StateError::NotAState { invariant: Invariant::UnitTrace, .. }));
        let mut m = linalg::identity(4).scale(0.25);
        m[(0, 1)] = real(0.1);
        let err = QState::new(m, 2, 2).unwrap_err();
        assert!(matches!(err, StateError::NotAState { invariant: Invariant::Hermitian, .. }));
    }

    #[test]
    fn new_state_rejects_wrong_side() {
        let err = QState::new(linalg::identity(3).scale(1.0 / 3.0), 2, 2).unwrap_err();
        assert_eq!(err.name(), "DimensionMismatch");
    }

    #[test]
    fn new_state_symmetrizes_small_defects() {
        let mut m = linalg::identity(4).scale(0.25);
        m[(0, 1)] = Complex64::new(1e-12, 0.0);
        let s = QState::new(m, 2, 2).unwrap();
        assert_eq!(linalg::hermiticity_defect(s.matrix()), 0.0);
    }

    #[test]
    fn partial_transpose_of_identity_is_identity() {
        let s = QState::maximally_mixed(2, 2);
        assert_eq!(s.partial_transpose(Subsystem::B), *s.matrix());
        assert_eq!(s.partial_transpose(Subsystem::A), *s.matrix());
    }

    #[test]
    fn partial_transpose_of_bell_state_has_eigenvalue_minus_half() {
        // PT_B(|Φ+⟩⟨Φ+|) = SWAP/2: eigenvalues {1/2, 1/2, 1/2, −1/2}.
        let pt = QState::bell(Bell::PhiPlus).partial_transpose(Subsystem::B);
        let swap = CMatrix::from_fn(4, 4, |r, c| {
            let (i, j) = (r / 2, r % 2);
            if c == j * 2 + i {
                real(0.5)
            } else {
                real(0.0)
            }
        });
        assert!(max_abs(&(&pt - &swap)) < 1e-15);
        let vals = linalg::hermitian_eigenvalues(&pt);
        assert!((vals[0] + 0.5).abs() < 1e-14);
    }

    #[test]
    fn partial_transposes_on_a_and_b_are_full_transposes_of_each_other() {
        let s = sample_indexed(&EnsembleSpec::hilbert_schmidt(3), (2, 3), 0).unwrap();
        let a = s.partial_transpose(Subsystem::A);
        let b = s.partial_transpose(Subsystem::B);
        assert!(max_abs(&(a.transpose() - b)) < 1e-15);
    }

    #[test]
    fn partial_trace_of_bell_state_is_maximally_mixed() {
        let r = QState::bell(Bell::PhiPlus).partial_trace(Subsystem::A);
        assert_eq!(r.dim(), 2);
        assert!(max_abs(&(r.matrix() - linalg::identity(2).scale(0.5))) < 1e-15);
    }

    #[test]
    fn partial_trace_recovers_product_factors() {
        let ra = sample_indexed(&EnsembleSpec::hilbert_schmidt(11), (2, 1), 0).unwrap();
        let rb = sample_indexed(&EnsembleSpec::hilbert_schmidt(12), (3, 1), 0).unwrap();
        let joint = ra.tensor(&rb);
        assert_eq!(joint.dims(), (2, 3));
        assert!(max_abs(&(joint.partial_trace(Subsystem::A).matrix() - ra.matrix())) < 1e-12);
        assert!(max_abs(&(joint.partial_trace(Subsystem::B).matrix() - rb.matrix())) < 1e-12);
    }

    #[test]
    fn trace_distance_basics() {
        let a = QState::basis(2, 2, 0);
        let b = QState::basis(2, 2, 3);
        assert!(a.trace_distance(&a).unwrap().abs() < 1e-15);
        assert!((a.trace_distance(&b).unwrap() - 1.0).abs() < 1e-14);
        let c = QState::maximally_mixed(2, 3);
        assert_eq!(a.trace_distance(&c).unwrap_err().name(), "DimensionMismatch");
    }

    #[test]
    fn trace_distance_triangle_inequality() {
        let spec = EnsembleSpec::hilbert_schmidt(99);
        for k in 0..100 {
            let x = sample_indexed(&spec, (2, 2), 3 * k).unwrap();
            let y = sample_indexed(&spec, (2, 2), 3 * k + 1).unwrap();
            let z = sample_indexed(&spec, (2, 2), 3 * k + 2).unwrap();
            let xy = x.trace_distance(&y).unwrap();
            let yx = y.trace_distance(&x).unwrap();
            let yz = y.trace_distance(&z).unwrap();
            let xz = x.trace_distance(&z).unwrap();
            assert!((xy - yx).abs() < 1e-14);
            assert!(xz <= xy + yz + 1e-14);
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(100))]

        #[test]
        fn partial_transpose_is_a_trace_preserving_involution(seed in any::<u64>(), which in 0..2usize) {
            let sub = if which == 0 { Subsystem::A } else { Subsystem::B };
            let s = sample_indexed(&EnsembleSpec::hilbert_schmidt(seed), (2, 2), 0).unwrap();
            let pt = s.partial_transpose(sub);
            prop_assert!(linalg::hermiticity_defect(&pt) < 1e-15);
            prop_assert!((pt.trace().re - 1.0).abs() < 1e-14);
            let back = partial_transpose_matrix(&pt, 2, 2, sub);
            prop_assert!(max_abs(&(back - s.matrix())) <= 1e-14);
        }

        #[test]
        fn partial_trace_preserves_trace(seed in any::<u64>(), db in 1..4usize, keep_a in any::<bool>()) {
            let s = sample_indexed(&EnsembleSpec::hilbert_schmidt(seed), (2, db), 0).unwrap();
            let keep = if keep_a { Subsystem::A } else { Subsystem::B };
            let r = s.partial_trace(keep);
            prop_assert!((r.matrix().trace().re - 1.0).abs() <= 1e-12);
            prop_assert!(QState::new(r.matrix().clone(), r.dim(), 1).is_ok());
        }
    }
}
