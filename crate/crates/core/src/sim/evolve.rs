use std::f64::consts::TAU;

use nalgebra::SymmetricEigen;
use num_complex::Complex64;

use super::{HermitianMatrix, SimError, UnitaryMatrix};

const EIGEN_MAX_ITERATIONS: usize = 10_000;

/// `exp(-i·2π·H·dt)` for `H` in GHz and `dt` in ns, via the spectral
/// decomposition `H = V Λ V†`.
pub fn evolve_step(h: &HermitianMatrix, dt: f64) -> Result<UnitaryMatrix, SimError> {
    if !(dt > 0.0) || !dt.is_finite() {
        return Err(SimError::NonPositiveStep(dt));
    }
    let dim = h.dim();
    let eig = SymmetricEigen::try_new(h.matrix().clone(), f64::EPSILON, EIGEN_MAX_ITERATIONS)
        .ok_or(SimError::EigenNoConvergence {
            dim,
            max_iterations: EIGEN_MAX_ITERATIONS,
        })?;

    let vectors = eig.eigenvectors;
    let mut scaled = vectors.clone();
    for (k, energy) in eig.eigenvalues.iter().enumerate() {
        let phase = Complex64::from_polar(1.0, -TAU * energy * dt);
        for r in 0..dim {
            scaled[(r, k)] *= phase;
        }
    }
    UnitaryMatrix::from_matrix(scaled * vectors.adjoint())
}

/// `u_step · u_acc`: the newest factor multiplies from the left.
pub fn accumulate(
    u_step: &UnitaryMatrix,
    u_acc: &UnitaryMatrix,
) -> Result<UnitaryMatrix, SimError> {
    if u_step.dim() != u_acc.dim() {
        return Err(SimError::Dimension {
            expected: u_acc.dim(),
            got: u_step.dim(),
        });
    }
    UnitaryMatrix::from_matrix(u_step.matrix() * u_acc.matrix())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sim::{build_hamiltonian, DeviceConstants, HamiltonianParams, FULL_DIM};
    use nalgebra::DMatrix;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_hermitian(rng: &mut ChaCha8Rng, n: usize, scale: f64) -> HermitianMatrix {
        let mut m = DMatrix::from_element(n, n, Complex64::new(0.0, 0.0));
        for r in 0..n {
            m[(r, r)] = Complex64::new(rng.random_range(-scale..scale), 0.0);
            for c in (r + 1)..n {
                let z = Complex64::new(
                    rng.random_range(-scale..scale),
                    rng.random_range(-scale..scale),
                );
                m[(r, c)] = z;
                m[(c, r)] = z.conj();
            }
        }
        HermitianMatrix::from_matrix(m).unwrap()
    }

    /// Truncated Taylor series of `exp(-i·2π·H·dt)`; only valid for small norms.
    fn taylor_exp(h: &HermitianMatrix, dt: f64, terms: usize) -> DMatrix<Complex64> {
        let n = h.dim();
        let a = h.matrix().map(|z| z * Complex64::new(0.0, -TAU * dt));
        let mut sum = DMatrix::identity(n, n);
        let mut term = DMatrix::identity(n, n);
        for k in 1..terms {
            term = &term * &a / Complex64::new(k as f64, 0.0);
            sum += &term;
        }
        sum
    }

    #[test]
    fn zero_hamiltonian_gives_identity() {
        let h = build_hamiltonian(&HamiltonianParams::default()).unwrap();
        let u = evolve_step(&h, 1.0).unwrap();
        assert!((u.matrix() - DMatrix::identity(FULL_DIM, FULL_DIM)).camax() < 1e-15);
    }

    #[test]
    fn diagonal_entry_phase() {
        let p = HamiltonianParams::new([170.0, 70.0], 0.0, DeviceConstants::default());
        let u = evolve_step(&build_hamiltonian(&p).unwrap(), 1.0).unwrap();
        // 240.65 GHz over 1 ns leaves a fractional phase of 0.65 turns.
        let expected = Complex64::from_polar(1.0, -TAU * 0.65);
        assert!((u.get(6, 6) - expected).norm() < 1e-10);
        assert!((u.get(6, 6) - Complex64::new(-0.587785, 0.809017)).norm() < 1e-6);
    }

    #[test]
    fn random_hermitian_is_unitary() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..50 {
            let h = random_hermitian(&mut rng, FULL_DIM, 1000.0);
            let u = evolve_step(&h, 1.0).unwrap();
            assert!(u.unitarity_error() < 1e-10, "{}", u.unitarity_error());
        }
    }

    #[test]
    fn agrees_with_taylor_series_for_small_norm() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..50 {
            let h = random_hermitian(&mut rng, FULL_DIM, 1.0);
            // ‖2π·H·dt‖ stays below 0.1 for this dt.
            let norm = h.matrix().norm();
            let dt = 0.09 / (TAU * norm);
            let u = evolve_step(&h, dt).unwrap();
            let reference = taylor_exp(&h, dt, 20);
            assert!((u.matrix() - reference).camax() < 1e-10);
        }
    }

    #[test]
    fn rejects_non_positive_step() {
        let h = build_hamiltonian(&HamiltonianParams::default()).unwrap();
        assert_eq!(evolve_step(&h, 0.0), Err(SimError::NonPositiveStep(0.0)));
        assert!(evolve_step(&h, -1.0).is_err());
    }

    #[test]
    fn accumulate_identities_and_dims() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let u = evolve_step(&random_hermitian(&mut rng, 4, 2.0), 1.0).unwrap();
        let v = evolve_step(&random_hermitian(&mut rng, 4, 2.0), 1.0).unwrap();
        let i4 = UnitaryMatrix::identity(4);
        assert!((accumulate(&i4, &u).unwrap().matrix() - u.matrix()).camax() < 1e-15);
        assert!((accumulate(&u, &i4).unwrap().matrix() - u.matrix()).camax() < 1e-15);
        let uv = accumulate(&u, &v).unwrap();
        assert!((uv.matrix() - u.matrix() * v.matrix()).camax() < 1e-15);
        assert!(uv.unitarity_error() < 1e-10);
        assert!(accumulate(&UnitaryMatrix::identity(16), &u).is_err());
    }
}
