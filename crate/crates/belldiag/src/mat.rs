//! Dense complex matrix helpers for small bipartite operators.
//!
//! Everything in the crate works with d²×d² matrices for d ≤ 5, so the
//! routines here favor clarity over scalability. Eigen- and singular value
//! decompositions are delegated to nalgebra.

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::BellError;
use crate::Result;

/// Dense complex matrix, the carrier type for all operators.
pub type CMat = DMatrix<Complex64>;

/// Tolerance for Hermiticity checks.
pub const HERMITICITY_TOL: f64 = 1e-12;

/// Largest entrywise modulus of `a - b`.
pub fn max_abs_diff(a: &CMat, b: &CMat) -> f64 {
    (a - b).iter().map(|z| z.norm()).fold(0.0, f64::max)
}

/// Largest entrywise deviation from Hermiticity, ‖A − A†‖_max.
pub fn hermiticity_defect(a: &CMat) -> f64 {
    max_abs_diff(a, &a.adjoint())
}

/// Errors unless ‖A − A†‖_max < 1e-12.
pub fn assert_hermitian(a: &CMat) -> Result<()> {
    let defect = hermiticity_defect(a);
    if defect >= HERMITICITY_TOL {
        return Err(BellError::NotHermitian(defect));
    }
    Ok(())
}

/// Kronecker product A ⊗ B.
pub fn kron(a: &CMat, b: &CMat) -> CMat {
    a.kronecker(b)
}

/// Partial transpose of a (d·d)×(d·d) matrix with respect to the second
/// subsystem: (|i⟩⟨j| ⊗ |k⟩⟨l|)^Γ = |i⟩⟨j| ⊗ |l⟩⟨k|.
pub fn partial_transpose(rho: &CMat, d: usize) -> CMat {
    let n = d * d;
    assert_eq!(rho.nrows(), n);
    assert_eq!(rho.ncols(), n);
    let mut out = CMat::zeros(n, n);
    for i in 0..d {
        for j in 0..d {
            for k in 0..d {
                for l in 0..d {
                    out[(i * d + k, j * d + l)] = rho[(i * d + l, j * d + k)];
                }
            }
        }
    }
    out
}

/// Realignment of a (d·d)×(d·d) matrix: (|i⟩⟨j| ⊗ |k⟩⟨l|)_R = |i⟩⟨k| ⊗ |j⟩⟨l|.
pub fn realign(rho: &CMat, d: usize) -> CMat {
    let n = d * d;
    assert_eq!(rho.nrows(), n);
    assert_eq!(rho.ncols(), n);
    let mut out = CMat::zeros(n, n);
    for i in 0..d {
        for j in 0..d {
            for k in 0..d {
                for l in 0..d {
                    out[(i * d + j, k * d + l)] = rho[(i * d + k, j * d + l)];
                }
            }
        }
    }
    out
}

/// Eigenvalues of a Hermitian matrix, ascending.
pub fn hermitian_eigenvalues(a: &CMat) -> Vec<f64> {
    let mut vals: Vec<f64> = a.clone().symmetric_eigen().eigenvalues.iter().copied().collect();
    vals.sort_by(|x, y| x.partial_cmp(y).unwrap());
    vals
}

/// Sum of singular values (trace norm for square input).
pub fn nuclear_norm(a: &CMat) -> f64 {
    a.clone().singular_values().iter().sum()
}

/// Trace.
pub fn trace(a: &CMat) -> Complex64 {
    a.diagonal().iter().sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_complex::Complex64 as C;
    use rand::Rng;

    fn random_matrix(n: usize, rng: &mut impl Rng) -> CMat {
        CMat::from_fn(n, n, |_, _| {
            C::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5)
        })
    }

    #[test]
    fn partial_transpose_is_involutive_and_trace_preserving() {
        let mut rng = crate::rng::stream(11, &[0]);
        let m = random_matrix(9, &mut rng);
        let pt = partial_transpose(&m, 3);
        assert!(max_abs_diff(&partial_transpose(&pt, 3), &m) < 1e-15);
        assert!((trace(&pt) - trace(&m)).norm() < 1e-14);
    }

    #[test]
    fn realignment_moves_entries_as_documented() {
        let d = 2;
        let mut m = CMat::zeros(4, 4);
        // |0⟩⟨1| ⊗ |1⟩⟨0| has its single entry at row (i,k)=(0,1), col (j,l)=(1,0)
        m[(1, d)] = C::new(1.0, 0.0);
        let r = realign(&m, d);
        // (|i⟩⟨j| ⊗ |k⟩⟨l|)_R = |i⟩⟨k| ⊗ |j⟩⟨l|: row (i,j)=(0,1), col (k,l)=(1,0)
        assert_eq!(r[(1, d)], C::new(1.0, 0.0));
        assert_eq!(r.iter().map(|z| z.norm()).sum::<f64>(), 1.0);
    }

    #[test]
    fn hermitian_eigenvalues_reconstruct_spectrum() {
        let mut rng = crate::rng::stream(12, &[0]);
        let m = random_matrix(9, &mut rng);
        let h = (&m + m.adjoint()) * C::new(0.5, 0.0);
        let vals = hermitian_eigenvalues(&h);
        let tr: f64 = vals.iter().sum();
        assert!((tr - trace(&h).re).abs() < 1e-12);
        assert!(vals.windows(2).all(|w| w[0] <= w[1]));
    }

    #[test]
    fn nuclear_norm_of_unitary_is_dimension() {
        let n = 4;
        let eye = CMat::identity(n, n);
        assert!((nuclear_norm(&eye) - n as f64).abs() < 1e-12);
    }

    #[test]
    fn hermiticity_check_rejects_asymmetric_input() {
        let mut m = CMat::identity(3, 3);
        m[(0, 1)] = C::new(0.5, 0.0);
        assert!(assert_hermitian(&m).is_err());
        assert!(assert_hermitian(&CMat::identity(3, 3)).is_ok());
    }
}
