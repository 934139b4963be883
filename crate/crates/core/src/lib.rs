//! Entanglement under open-system dynamics: where two-party states sit
//! relative to the separable set, how Lindblad evolution moves them, what
//! the asymptotic set looks like, and which of six classes a dynamics falls
//! into.
//!
//! ```
//! use esdyn_core::{catalog_generator, classify_generator, AsymptoticOptions, CatalogParams};
//!
//! let g = catalog_generator(2, &CatalogParams::default()).unwrap();
//! let (_, class) = classify_generator(&g, &AsymptoticOptions::default(), 1e-7, 8, 0).unwrap();
//! assert_eq!(class.class_id, 2);
//! ```

pub mod asymptotics;
pub mod dynamics;
pub mod ensemble;
pub mod fate;
pub mod geometry;
pub mod linalg;
pub mod state;

#[cfg(test)]
mod oracle;

pub use asymptotics::{
    asymptotic_set, asymptotic_set_nonautonomous, catalog_entries, catalog_generator, classify_generator,
    classify_theorem_class, stationary_set_autonomous, AsymptoticOptions, AsymptoticSet, AsymptoticsError, Cardinality,
    CatalogEntry, CatalogParams, Representation, TheoremClass,
};
pub use dynamics::{propagate, DynamicsError, Generator, Hamiltonian, Jump, RateFn, SolverOptions, Trajectory};
pub use ensemble::{sample_indexed, EnsembleKind, EnsembleSpec};
pub use fate::{detect_fate, fate_statistics, FateDetector, FateError, FateOptions, FateRecord, FateStats, FateTag};
pub use geometry::{classify_region, concurrence, min_pt_eigenvalue, Region, RegionTag};
pub use linalg::{CMatrix, CVector};
pub use state::{Bell, QState, StateError, Subsystem};
