//! Dormand–Prince 5(4) for linear systems `Y' = L(t) Y`.
//!
//! `Y` may be a single vectorized operator (one column) or a stack of them
//! (the propagator). The step size is controlled by the RMS of the
//! embedded error scaled by `atol + rtol·max(|y|, |y_new|)`.

use super::{DynamicsError, SolverOptions};
use crate::linalg::CMatrix;

const C2: f64 = 1.0 / 5.0;
const C3: f64 = 3.0 / 10.0;
const C4: f64 = 4.0 / 5.0;
const C5: f64 = 8.0 / 9.0;

const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;

// Fifth-order weights (also the last stage row, FSAL).
const B1: f64 = 35.0 / 384.0;
const B3: f64 = 500.0 / 1113.0;
const B4: f64 = 125.0 / 192.0;
const B5: f64 = -2187.0 / 6784.0;
const B6: f64 = 11.0 / 84.0;

// Fifth minus fourth order.
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;

const SAFETY: f64 = 0.9;
const MIN_FACTOR: f64 = 0.2;
const MAX_FACTOR: f64 = 5.0;

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct StepReport {
    pub accepted: usize,
    pub rejected: usize,
    /// Largest normalized error estimate among accepted steps (≤ 1).
    pub max_error: f64,
}

impl StepReport {
    pub fn absorb(&mut self, other: StepReport) {
        self.accepted += other.accepted;
        self.rejected += other.rejected;
        self.max_error = self.max_error.max(other.max_error);
    }
}

/// Integrate `Y' = L(t) Y` from `t0` to `t1`. `h` carries the step-size
/// suggestion between calls; pass `0.0` for an automatic first guess.
pub fn integrate_linear<F>(
    lfun: &F,
    y0: CMatrix,
    t0: f64,
    t1: f64,
    opts: &SolverOptions,
    h: &mut f64,
) -> Result<(CMatrix, StepReport), DynamicsError>
where
    F: Fn(f64) -> CMatrix,
{
    let mut report = StepReport::default();
    if t1 == t0 {
        return Ok((y0, report));
    }
    let span = t1 - t0;
    let mut t = t0;
    let mut y = y0;
    let l0 = lfun(t);
    let mut k1 = &l0 * &y;
    if !(*h > 0.0) {
        *h = initial_step(&l0, span, opts);
    }
    let mut steps = 0usize;
    while t < t1 {
        if steps >= opts.max_steps {
            return Err(DynamicsError::StepFailure { time: t, step: *h });
        }
        steps += 1;
        let last = t + *h >= t1 || (t1 - t - *h) < 1e-12 * span.abs();
        let step = if last { t1 - t } else { *h };
        let h_min = 1e-14 * t.abs().max(1.0);
        if step < h_min && !last {
            return Err(DynamicsError::StepFailure { time: t, step });
        }

        let y2 = &y + (k1.scale(A21)).scale(step);
        let k2 = lfun(t + C2 * step) * &y2;
        let y3 = &y + (k1.scale(A31) + k2.scale(A32)).scale(step);
        let k3 = lfun(t + C3 * step) * &y3;
        let y4 = &y + (k1.scale(A41) + k2.scale(A42) + k3.scale(A43)).scale(step);
        let k4 = lfun(t + C4 * step) * &y4;
        let y5 = &y + (k1.scale(A51) + k2.scale(A52) + k3.scale(A53) + k4.scale(A54)).scale(step);
        let k5 = lfun(t + C5 * step) * &y5;
        let y6 = &y + (k1.scale(A61) + k2.scale(A62) + k3.scale(A63) + k4.scale(A64) + k5.scale(A65)).scale(step);
        let l_end = lfun(t + step);
        let k6 = &l_end * &y6;
        let y_new = &y + (k1.scale(B1) + k3.scale(B3) + k4.scale(B4) + k5.scale(B5) + k6.scale(B6)).scale(step);
        let k7 = &l_end * &y_new;
        let err_vec = (k1.scale(E1) + k3.scale(E3) + k4.scale(E4) + k5.scale(E5) + k6.scale(E6) + k7.scale(E7)).scale(step);

        let mut acc = 0.0;
        for ((e, a), b) in err_vec.iter().zip(y.iter()).zip(y_new.iter()) {
            let sc = opts.atol + opts.rtol * a.norm().max(b.norm());
            acc += (e.norm() / sc).powi(2);
        }
        let err = (acc / err_vec.len() as f64).sqrt();
        if !err.is_finite() {
            return Err(DynamicsError::StepFailure { time: t, step });
        }

        let factor = if err == 0.0 { MAX_FACTOR } else { (SAFETY * err.powf(-0.2)).clamp(MIN_FACTOR, MAX_FACTOR) };
        if err <= 1.0 {
            t = if last { t1 } else { t + step };
            y = y_new;
            k1 = k7;
            report.accepted += 1;
            report.max_error = report.max_error.max(err);
            // Keep the full-size suggestion when the last step was clipped.
            if !last || step >= *h {
                *h = step * factor;
            }
        } else {
            report.rejected += 1;
            *h = step * factor.min(1.0);
            if *h < h_min {
                return Err(DynamicsError::StepFailure { time: t, step: *h });
            }
        }
    }
    Ok((y, report))
}

fn initial_step(l: &CMatrix, span: f64, opts: &SolverOptions) -> f64 {
    let norm = l.iter().fold(0.0_f64, |a, z| a.max(z.norm())) * (l.nrows() as f64).sqrt();
    let guess = if norm > 0.0 { 0.5 * opts.rtol.powf(0.2) / norm } else { span };
    guess.min(span).max(1e-10 * span)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{self, real};
    use num_complex::Complex64;

    #[test]
    fn scalar_decay_matches_exponential() {
        let l = |_t: f64| CMatrix::from_element(1, 1, real(-2.0));
        let mut h = 0.0;
        let opts = SolverOptions::default();
        let (y, rep) = integrate_linear(&l, CMatrix::from_element(1, 1, linalg::ONE), 0.0, 3.0, &opts, &mut h).unwrap();
        assert!((y[(0, 0)].re - (-6.0_f64).exp()).abs() < 1e-11);
        assert!(rep.accepted > 0 && rep.max_error <= 1.0);
    }

    #[test]
    fn time_dependent_rate_matches_closed_form() {
        // y' = −c e^{−t} y  ⇒  y(t) = exp(−c(1 − e^{−t}))
        let c = 3.0;
        let l = move |t: f64| CMatrix::from_element(1, 1, real(-c * (-t).exp()));
        let mut h = 0.0;
        let opts = SolverOptions::default();
        let (y, _) = integrate_linear(&l, CMatrix::from_element(1, 1, linalg::ONE), 0.0, 5.0, &opts, &mut h).unwrap();
        let exact = (-c * (1.0 - (-5.0_f64).exp())).exp();
        assert!((y[(0, 0)].re - exact).abs() < 1e-10);
    }

    #[test]
    fn rotation_stays_on_circle() {
        let l = |_t: f64| CMatrix::from_element(1, 1, Complex64::new(0.0, -1.0));
        let mut h = 0.0;
        let opts = SolverOptions::default();
        let (y, _) = integrate_linear(&l, CMatrix::from_element(1, 1, linalg::ONE), 0.0, 10.0, &opts, &mut h).unwrap();
        assert!((y[(0, 0)] - Complex64::new(0.0, -10.0).exp()).norm() < 1e-8);
    }

    #[test]
    fn max_steps_is_enforced() {
        let l = |_t: f64| CMatrix::from_element(1, 1, real(-1.0));
        let mut h = 1e-6;
        let opts = SolverOptions { max_steps: 10, ..SolverOptions::default() };
        let err = integrate_linear(&l, CMatrix::from_element(1, 1, linalg::ONE), 0.0, 1.0, &opts, &mut h).unwrap_err();
        assert!(matches!(err, DynamicsError::StepFailure { .. }));
    }
}
