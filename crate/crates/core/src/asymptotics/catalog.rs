//! One two-qubit generator per theorem class.

use std::f64::consts::LN_2;

use serde::{Deserialize, Serialize};

use super::AsymptoticsError;
use crate::dynamics::{Generator, Hamiltonian, Jump, RateFn};
use crate::linalg::{self, CMatrix};
use crate::state::Bell;

/// Class 4 needs the Bell-image margin `(1 − 3e^{−c})/4` to clear the
/// classification tolerance with room to spare.
pub const CLASS4_MIN_STRENGTH: f64 = 1.098_612_288_668_109_8 + 0.5; // ln 3 + 0.5
/// Quenched Bell pumping leaves Φ+ population at least `1 − e^{−c}`, so the
/// largest margin over the image of D is `e^{−c} − 1/2`; negative iff
/// `c > ln 2`.
pub const CLASS6_MIN_STRENGTH: f64 = LN_2 + 0.5;

const DEFAULT_GAMMA: f64 = 1.0;
const DEFAULT_CLASS4_STRENGTH: f64 = 2.0;
const DEFAULT_CLASS6_STRENGTH: f64 = 10.0;

/// `gamma` is the constant rate of classes 1, 2, 3, 5; `strength` is the
/// total weight `c` of the quenched rate `c·e^{−t}` of classes 4 and 6.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CatalogParams {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gamma: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub strength: Option<f64>,
}

impl CatalogParams {
    /// Fill in defaults for `class_id` and reject parameters it does not use.
    pub fn resolved(&self, class_id: u8) -> Result<CatalogParams, AsymptoticsError> {
        match class_id {
            1 | 2 | 3 | 5 => {
                if self.strength.is_some() {
                    return Err(AsymptoticsError::BadParams(format!("class {class_id} takes `gamma`, not `strength`")));
                }
                let gamma = self.gamma.unwrap_or(DEFAULT_GAMMA);
                if !(gamma > 0.0 && gamma.is_finite()) {
                    return Err(AsymptoticsError::BadParams(format!("gamma must be positive and finite, got {gamma}")));
                }
                Ok(CatalogParams { gamma: Some(gamma), strength: None })
            }
            4 | 6 => {
                if self.gamma.is_some() {
                    return Err(AsymptoticsError::BadParams(format!("class {class_id} takes `strength`, not `gamma`")));
                }
                let (default, min) = if class_id == 4 {
                    (DEFAULT_CLASS4_STRENGTH, CLASS4_MIN_STRENGTH)
                } else {
                    (DEFAULT_CLASS6_STRENGTH, CLASS6_MIN_STRENGTH)
                };
                let c = self.strength.unwrap_or(default);
                if !c.is_finite() || c < min {
                    return Err(AsymptoticsError::BadParams(format!(
                        "class {class_id} needs strength >= {min:.4}, got {c}"
                    )));
                }
                Ok(CatalogParams { gamma: None, strength: Some(c) })
            }
            _ => Err(AsymptoticsError::BadParams(format!("class_id must be in 1..=6, got {class_id}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CatalogEntry {
    pub class_id: u8,
    pub name: &'static str,
    pub description: &'static str,
    pub autonomous: bool,
    pub params: CatalogParams,
}

pub fn catalog_entries() -> Vec<CatalogEntry> {
    let entry = |class_id: u8, name, description, autonomous| CatalogEntry {
        class_id,
        name,
        description,
        autonomous,
        params: CatalogParams::default().resolved(class_id).expect("defaults are valid"),
    };
    vec![
        entry(1, "depolarizing", "all 15 two-qubit Pauli jumps at rate gamma/16; unique fixed point identity/4", true),
        entry(2, "amplitude_damping", "independent decay sigma_-(x)I, I(x)sigma_-; unique fixed point |00><00|", true),
        entry(3, "bell_pumping", "jumps |Phi+><beta| for the other three Bell states; unique fixed point |Phi+><Phi+|", true),
        entry(4, "quenched_depolarizing", "Pauli jumps at rate (c/16) e^{-t}; image of D shrunk toward identity/4", false),
        entry(5, "dephasing", "sigma_z(x)I and I(x)sigma_z; stationary set is all diagonal states", true),
        entry(6, "quenched_bell_pumping", "Bell pumping at rate c e^{-t}; image of D clustered around |Phi+><Phi+|", false),
    ]
}

fn paulis() -> [CMatrix; 4] {
    [linalg::identity(2), linalg::pauli_x(), linalg::pauli_y(), linalg::pauli_z()]
}

fn depolarizing_jumps(rate: impl Fn() -> RateFn) -> Vec<Jump> {
    let p = paulis();
    let mut jumps = Vec::with_capacity(15);
    for i in 0..4 {
        for j in 0..4 {
            if i + j > 0 {
                jumps.push(Jump::new(linalg::kron(&p[i], &p[j]), rate()));
            }
        }
    }
    jumps
}

fn bell_pumping_jumps(rate: impl Fn() -> RateFn) -> Vec<Jump> {
    let target = Bell::PhiPlus.ket();
    Bell::ALL
        .iter()
        .filter(|&&b| b != Bell::PhiPlus)
        .map(|b| Jump::new(&target * b.ket().adjoint(), rate()))
        .collect()
}

/// The catalog generator for `class_id`, with `params` defaulted and
/// validated.
pub fn catalog_generator(class_id: u8, params: &CatalogParams) -> Result<Generator, AsymptoticsError> {
    let p = params.resolved(class_id)?;
    let h = Hamiltonian::Constant(CMatrix::zeros(4, 4));
    let gamma = p.gamma.unwrap_or(0.0);
    let quench = |scale: f64| {
        let c = p.strength.unwrap_or(0.0);
        move || RateFn::Exponential { amplitude: c * scale, tau: 1.0 }
    };
    let constant = |scale: f64| move || RateFn::Constant(gamma * scale);
    let jumps = match class_id {
        1 => depolarizing_jumps(constant(1.0 / 16.0)),
        2 => {
            let (sm, id) = (linalg::sigma_minus(), linalg::identity(2));
            vec![Jump::constant(linalg::kron(&sm, &id), gamma), Jump::constant(linalg::kron(&id, &sm), gamma)]
        }
        3 => bell_pumping_jumps(constant(1.0)),
        4 => depolarizing_jumps(quench(1.0 / 16.0)),
        5 => {
            let (z, id) = (linalg::pauli_z(), linalg::identity(2));
            vec![Jump::constant(linalg::kron(&z, &id), gamma), Jump::constant(linalg::kron(&id, &z), gamma)]
        }
        6 => bell_pumping_jumps(quench(1.0)),
        _ => unreachable!("validated by resolved()"),
    };
    Ok(Generator::new((2, 2), h, jumps)?)
}
