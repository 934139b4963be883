//! Independent reference computations used only by unit tests.

use num_complex::Complex64;

use crate::linalg::{self, CMatrix};

/// Eigenvalues of a Hermitian matrix by cyclic complex Jacobi rotations,
/// ascending. Deliberately shares nothing with the nalgebra solvers.
pub fn jacobi_eigenvalues(m: &CMatrix) -> Vec<f64> {
    let n = m.nrows();
    let mut a = linalg::hermitize(m);
    for _sweep in 0..100 {
        let mut off = 0.0;
        for p in 0..n {
            for q in (p + 1)..n {
                off += a[(p, q)].norm_sqr();
            }
        }
        if off < 1e-30 {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = a[(p, q)];
                if apq.norm() < 1e-300 {
                    continue;
                }
                let app = a[(p, p)].re;
                let aqq = a[(q, q)].re;
                // Remove the phase, then a real symmetric rotation.
                let phase = apq / apq.norm();
                let theta = 0.5 * (2.0 * apq.norm()).atan2(aqq - app);
                let (c, s) = (theta.cos(), theta.sin());
                let mut j = CMatrix::identity(n, n);
                j[(p, p)] = Complex64::new(c, 0.0);
                j[(q, q)] = Complex64::new(c, 0.0);
                j[(p, q)] = phase * s;
                j[(q, p)] = -phase.conj() * s;
                a = j.adjoint() * &a * &j;
            }
        }
    }
    let mut vals: Vec<f64> = (0..n).map(|i| a[(i, i)].re).collect();
    vals.sort_by(|x, y| x.total_cmp(y));
    vals
}

/// Kraus operators of single-qubit amplitude damping with survival
/// amplitude² `s = e^{−γt}`.
pub fn amplitude_damping_kraus(s: f64) -> [CMatrix; 2] {
    let z = linalg::ZERO;
    let k0 = CMatrix::from_row_slice(2, 2, &[linalg::ONE, z, z, linalg::real(s.sqrt())]);
    let k1 = CMatrix::from_row_slice(2, 2, &[z, linalg::real((1.0 - s).sqrt()), z, z]);
    [k0, k1]
}

/// Independent amplitude damping on both qubits of a two-qubit matrix.
pub fn two_qubit_amplitude_damping(rho: &CMatrix, s: f64) -> CMatrix {
    let k = amplitude_damping_kraus(s);
    let mut out = CMatrix::zeros(4, 4);
    for ka in &k {
        for kb in &k {
            let op = linalg::kron(ka, kb);
            out += &op * rho * op.adjoint();
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn jacobi_agrees_on_known_spectrum() {
        let m = CMatrix::from_row_slice(
            2,
            2,
            &[linalg::real(2.0), Complex64::new(0.0, 1.0), Complex64::new(0.0, -1.0), linalg::real(2.0)],
        );
        let v = jacobi_eigenvalues(&m);
        assert!((v[0] - 1.0).abs() < 1e-14 && (v[1] - 3.0).abs() < 1e-14);
    }
}
