use std::fmt;
use std::sync::Arc;

use num_complex::Complex64;

use super::DynamicsError;
use crate::linalg::{self, CMatrix};

/// Nonnegative jump rate as a function of time.
#[derive(Clone)]
pub enum RateFn {
    Constant(f64),
    /// `amplitude · exp(−t / tau)`.
    Exponential { amplitude: f64, tau: f64 },
    Custom(Arc<dyn Fn(f64) -> f64 + Send + Sync>),
}

impl RateFn {
    pub fn eval(&self, t: f64) -> f64 {
        match self {
            RateFn::Constant(c) => *c,
            RateFn::Exponential { amplitude, tau } => amplitude * (-t / tau).exp(),
            RateFn::Custom(f) => f(t),
        }
    }

    pub fn is_constant(&self) -> bool {
        match self {
            RateFn::Constant(_) => true,
            RateFn::Exponential { amplitude, .. } => *amplitude == 0.0,
            RateFn::Custom(_) => false,
        }
    }

    /// `∫_0^∞ rate(t) dt` when known in closed form.
    pub fn total_weight(&self) -> Option<f64> {
        match self {
            RateFn::Constant(c) if *c == 0.0 => Some(0.0),
            RateFn::Constant(_) => Some(f64::INFINITY),
            RateFn::Exponential { amplitude, tau } => Some(amplitude * tau),
            RateFn::Custom(_) => None,
        }
    }
}

impl fmt::Debug for RateFn {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RateFn::Constant(c) => write!(f, "Constant({c})"),
            RateFn::Exponential { amplitude, tau } => write!(f, "Exponential({amplitude} e^(-t/{tau}))"),
            RateFn::Custom(_) => f.write_str("Custom(..)"),
        }
    }
}

#[derive(Clone)]
pub enum Hamiltonian {
    Constant(CMatrix),
    TimeDependent(Arc<dyn Fn(f64) -> CMatrix + Send + Sync>),
}

impl Hamiltonian {
    pub fn at(&self, t: f64) -> CMatrix {
        match self {
            Hamiltonian::Constant(h) => h.clone(),
            Hamiltonian::TimeDependent(f) => f(t),
        }
    }
}

impl fmt::Debug for Hamiltonian {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Hamiltonian::Constant(h) => write!(f, "Constant({h:?})"),
            Hamiltonian::TimeDependent(_) => f.write_str("TimeDependent(..)"),
        }
    }
}

#[derive(Debug, Clone)]
pub struct Jump {
    pub operator: CMatrix,
    pub rate: RateFn,
}

impl Jump {
    pub fn new(operator: CMatrix, rate: RateFn) -> Self {
        Jump { operator, rate }
    }

    pub fn constant(operator: CMatrix, rate: f64) -> Self {
        Jump { operator, rate: RateFn::Constant(rate) }
    }
}

/// Times at which generator invariants are spot-checked.
pub const CHECK_TIMES: [f64; 3] = [0.0, 1.0, 10.0];

/// Lindblad data with time-dependent Hamiltonian and rates (ħ = 1).
#[derive(Debug, Clone)]
pub struct Generator {
    dims: (usize, usize),
    hamiltonian: Hamiltonian,
    jumps: Vec<Jump>,
    autonomous: bool,
}

impl Generator {
    /// Build and validate a generator. It is flagged autonomous when the
    /// Hamiltonian and every rate are constant by construction.
    pub fn new(dims: (usize, usize), hamiltonian: Hamiltonian, jumps: Vec<Jump>) -> Result<Self, DynamicsError> {
        let autonomous = matches!(hamiltonian, Hamiltonian::Constant(_)) && jumps.iter().all(|j| j.rate.is_constant());
        let g = Generator { dims, hamiltonian, jumps, autonomous };
        g.validate()?;
        Ok(g)
    }

    /// Time-independent generator from a Hamiltonian and `(operator, rate)` pairs.
    pub fn constant(dims: (usize, usize), hamiltonian: CMatrix, jumps: Vec<(CMatrix, f64)>) -> Result<Self, DynamicsError> {
        Generator::new(
            dims,
            Hamiltonian::Constant(hamiltonian),
            jumps.into_iter().map(|(op, r)| Jump::constant(op, r)).collect(),
        )
    }

    /// Set the autonomy flag explicitly. Claiming autonomy is checked by
    /// comparing the Hamiltonian and rates at [`CHECK_TIMES`].
    pub fn with_autonomous(mut self, autonomous: bool) -> Result<Self, DynamicsError> {
        if autonomous {
            let h0 = self.hamiltonian.at(0.0);
            for &t in &CHECK_TIMES[1..] {
                if linalg::max_abs(&(self.hamiltonian.at(t) - &h0)) > 1e-12 {
                    return Err(DynamicsError::InvalidGenerator(format!("hamiltonian varies in time (t = {t})")));
                }
                for (k, j) in self.jumps.iter().enumerate() {
                    if (j.rate.eval(t) - j.rate.eval(0.0)).abs() > 1e-12 {
                        return Err(DynamicsError::InvalidGenerator(format!("rate of jump {k} varies in time (t = {t})")));
                    }
                }
            }
        }
        self.autonomous = autonomous;
        Ok(self)
    }

    /// Same dynamics, routed through the time-dependent solver.
    pub fn force_nonautonomous(self) -> Self {
        Generator { autonomous: false, ..self }
    }

    pub fn validate(&self) -> Result<(), DynamicsError> {
        let (da, db) = self.dims;
        let d = da * db;
        if d == 0 {
            return Err(DynamicsError::InvalidGenerator("empty dimension".into()));
        }
        for &t in &CHECK_TIMES {
            let h = self.hamiltonian.at(t);
            if h.nrows() != d || h.ncols() != d {
                return Err(DynamicsError::DimensionMismatch(format!(
                    "hamiltonian is {}x{}, expected {d}x{d}",
                    h.nrows(),
                    h.ncols()
                )));
            }
            let defect = linalg::hermiticity_defect(&h);
            if defect > 1e-12 {
                return Err(DynamicsError::InvalidGenerator(format!(
                    "hamiltonian not Hermitian at t = {t} (defect {defect:.3e})"
                )));
            }
            for (k, j) in self.jumps.iter().enumerate() {
                let r = j.rate.eval(t);
                if !(r >= 0.0) || !r.is_finite() {
                    return Err(DynamicsError::InvalidGenerator(format!("rate of jump {k} is {r} at t = {t}")));
                }
            }
        }
        for (k, j) in self.jumps.iter().enumerate() {
            if j.operator.nrows() != d || j.operator.ncols() != d {
                return Err(DynamicsError::DimensionMismatch(format!(
                    "jump {k} is {}x{}, expected {d}x{d}",
                    j.operator.nrows(),
                    j.operator.ncols()
                )));
            }
        }
        Ok(())
    }

    pub fn dims(&self) -> (usize, usize) {
        self.dims
    }

    pub fn dim(&self) -> usize {
        self.dims.0 * self.dims.1
    }

    pub fn is_autonomous(&self) -> bool {
        self.autonomous
    }

    pub fn hamiltonian(&self) -> &Hamiltonian {
        &self.hamiltonian
    }

    pub fn jumps(&self) -> &[Jump] {
        &self.jumps
    }

    /// Liouvillian superoperator at time `t` under column stacking:
    ///
    /// `L(t) = −i(I⊗H − Hᵀ⊗I) + Σ_k γ_k(t)[ conj(L_k)⊗L_k − ½ I⊗(L_k†L_k) − ½ (L_k†L_k)ᵀ⊗I ]`
    pub fn liouvillian(&self, t: f64) -> CMatrix {
        let d = self.dim();
        let id = linalg::identity(d);
        let h = self.hamiltonian.at(t);
        let mut l = (linalg::kron(&id, &h) - linalg::kron(&h.transpose(), &id)) * Complex64::new(0.0, -1.0);
        for j in &self.jumps {
            let rate = j.rate.eval(t);
            if rate == 0.0 {
                continue;
            }
            let op = &j.operator;
            let ldl = op.adjoint() * op;
            let diss = linalg::kron(&op.conjugate(), op)
                - linalg::kron(&id, &ldl).scale(0.5)
                - linalg::kron(&ldl.transpose(), &id).scale(0.5);
            l += diss.scale(rate);
        }
        l
    }
}

/// Matrix form of the Lindblad generator at time `t`.
pub fn liouvillian_matrix(g: &Generator, t: f64) -> CMatrix {
    g.liouvillian(t)
}
