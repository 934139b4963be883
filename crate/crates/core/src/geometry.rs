//! Entanglement quantifiers and the interior / boundary / entangled
//! trichotomy of the separable set.
//!
//! For 2⊗2 and 2⊗3 a state is separable exactly when its partial transpose
//! is positive, so the minimum partial-transpose eigenvalue (the *margin*)
//! locates a state: strictly positive margin means a whole PPT
//! neighbourhood inside the state space, zero margin means arbitrarily
//! close NPT states exist, negative margin means entangled.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::linalg::{self, CMatrix};
use crate::state::{QState, Subsystem};

pub const DEFAULT_REGION_TOL: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeometryError {
    #[error("unsupported dimension {dim_a}x{dim_b} for {operation}")]
    UnsupportedDimension { dim_a: usize, dim_b: usize, operation: &'static str },
    #[error("tolerance must be positive, got {0}")]
    InvalidTolerance(f64),
}

impl GeometryError {
    pub fn name(&self) -> &'static str {
        match self {
            GeometryError::UnsupportedDimension { .. } => "UnsupportedDimension",
            GeometryError::InvalidTolerance(_) => "InvalidTolerance",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RegionTag {
    DeepSeparable,
    Boundary,
    Entangled,
}

impl RegionTag {
    /// Tag for a margin; `|margin| = tol` counts as boundary.
    pub fn from_margin(margin: f64, tol: f64) -> RegionTag {
        if margin < -tol {
            RegionTag::Entangled
        } else if margin > tol {
            RegionTag::DeepSeparable
        } else {
            RegionTag::Boundary
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            RegionTag::DeepSeparable => "deep_separable",
            RegionTag::Boundary => "boundary",
            RegionTag::Entangled => "entangled",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Region {
    pub tag: RegionTag,
    /// Minimum eigenvalue of the partial transpose.
    pub margin: f64,
    pub tol: f64,
}

/// Dimensions where PPT is necessary and sufficient for separability.
pub fn is_ppt_decisive(dim_a: usize, dim_b: usize) -> bool {
    matches!((dim_a, dim_b), (2, 2) | (2, 3) | (3, 2) | (1, _) | (_, 1))
}

/// Ascending eigenvalues of the partial transpose on B.
pub fn pt_eigenvalues(s: &QState) -> Vec<f64> {
    linalg::hermitian_eigenvalues(&s.partial_transpose(Subsystem::B))
}

pub fn min_pt_eigenvalue(s: &QState) -> f64 {
    pt_eigenvalues(s)[0]
}

/// Sum of the moduli of the negative partial-transpose eigenvalues.
pub fn negativity(s: &QState) -> f64 {
    pt_eigenvalues(s).iter().filter(|&&l| l < 0.0).map(|l| -l).sum()
}

/// Wootters concurrence of a two-qubit state.
///
/// The λᵢ are the square roots of the eigenvalues of `ρ ρ̃` with
/// `ρ̃ = (σy⊗σy) ρ* (σy⊗σy)`. They equal the singular values of
/// `√Λ (V† Y V*) √Λ` for `ρ = V Λ V†`, `Y = σy⊗σy`; that matrix is complex
/// symmetric, so eigenvalue round-off on rank-deficient states cancels to
/// second order instead of surfacing as `√ε`.
pub fn concurrence(s: &QState) -> Result<f64, GeometryError> {
    if s.dims() != (2, 2) {
        return Err(GeometryError::UnsupportedDimension { dim_a: s.dim_a(), dim_b: s.dim_b(), operation: "concurrence" });
    }
    let yy = linalg::kron(&linalg::pauli_y(), &linalg::pauli_y());
    let (vals, vecs) = linalg::hermitian_eigen(s.matrix());
    let roots: Vec<f64> = vals.iter().map(|&l| l.max(0.0).sqrt()).collect();
    let w: CMatrix = vecs.adjoint() * yy * vecs.conjugate();
    let t = CMatrix::from_fn(4, 4, |i, j| w[(i, j)] * (roots[i] * roots[j]));
    let mut lambdas: Vec<f64> = t.singular_values().iter().copied().collect();
    lambdas.sort_by(|a, b| b.total_cmp(a));
    let c = lambdas[0] - lambdas[1] - lambdas[2] - lambdas[3];
    Ok(c.clamp(0.0, 1.0))
}

/// Locate `s` relative to the separable set.
pub fn classify_region(s: &QState, tol: f64) -> Result<Region, GeometryError> {
    if !(tol > 0.0) {
        return Err(GeometryError::InvalidTolerance(tol));
    }
    if !matches!(s.dims(), (2, 2) | (2, 3) | (3, 2)) {
        return Err(GeometryError::UnsupportedDimension {
            dim_a: s.dim_a(),
            dim_b: s.dim_b(),
            operation: "classify_region",
        });
    }
    let margin = min_pt_eigenvalue(s);
    Ok(Region { tag: RegionTag::from_margin(margin, tol), margin, tol })
}
