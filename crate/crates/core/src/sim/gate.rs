use nalgebra::DMatrix;
use num_complex::Complex64;

use super::{FidelityReport, SimError, UnitaryMatrix, FULL_DIM, QUBIT_DIM};

/// Full-space indices of ↓↓, ↓↑, ↑↓, ↑↑, in computational order.
pub const COMPUTATIONAL_INDICES: [usize; QUBIT_DIM] = [5, 6, 9, 10];

/// Smallest diagonal magnitude from which a phase can be read.
pub const PHASE_TOLERANCE: f64 = 1e-8;

/// `diag(1, 1, 1, -1)`.
pub fn cz() -> UnitaryMatrix {
    let one = Complex64::new(1.0, 0.0);
    UnitaryMatrix::from_diagonal(&[one, one, one, -one])
}

/// Extracts the 4×4 block over the (1,1) spin states. The result is
/// sub-unitary whenever amplitude leaked out of the subspace.
pub fn project_to_computational(u16: &UnitaryMatrix) -> Result<UnitaryMatrix, SimError> {
    u16.require_dim(FULL_DIM)?;
    let m = DMatrix::from_fn(QUBIT_DIM, QUBIT_DIM, |r, c| {
        u16.get(COMPUTATIONAL_INDICES[r], COMPUTATIONAL_INDICES[c])
    });
    UnitaryMatrix::from_matrix(m)
}

/// Removes the global phase and one virtual Z per qubit so that diagonal
/// entries 00, 01 and 10 become real and positive. Entry 11 then carries the
/// conditional phase.
pub fn phase_compensate(u4: &UnitaryMatrix) -> Result<UnitaryMatrix, SimError> {
    u4.require_dim(QUBIT_DIM)?;
    for index in 0..3 {
        let magnitude = u4.get(index, index).norm();
        if !(magnitude > PHASE_TOLERANCE) {
            return Err(SimError::CompensationDegenerate {
                index,
                magnitude,
                tolerance: PHASE_TOLERANCE,
            });
        }
    }
    let phi00 = u4.get(0, 0).arg();
    let phi01 = u4.get(1, 1).arg();
    let phi10 = u4.get(2, 2).arg();

    let mut m = u4.matrix().clone();
    for (row, (a, b)) in [(0.0, 0.0), (0.0, 1.0), (1.0, 0.0), (1.0, 1.0)]
        .into_iter()
        .enumerate()
    {
        let lambda = -(phi00 + a * (phi10 - phi00) + b * (phi01 - phi00));
        let rot = Complex64::from_polar(1.0, lambda);
        for c in 0..QUBIT_DIM {
            m[(row, c)] *= rot;
        }
    }
    // The rotated diagonal phases are zero up to rounding; pin them.
    for k in 0..3 {
        m[(k, k)] = Complex64::new(m[(k, k)].norm(), 0.0);
    }
    UnitaryMatrix::from_matrix(m)
}

/// `F = [Tr(U†U) + |Tr(U_target† U)|²] / (d(d+1))` with `d = 4`.
pub fn gate_fidelity(
    u_final: &UnitaryMatrix,
    u_target: &UnitaryMatrix,
) -> Result<FidelityReport, SimError> {
    u_final.require_dim(QUBIT_DIM)?;
    u_target.require_dim(QUBIT_DIM)?;
    let f = u_final.matrix();
    let t = u_target.matrix();

    // Tr(A†B) = Σ conj(A_jk) B_jk
    let unitarity_trace: f64 = f.iter().map(|z| z.norm_sqr()).sum();
    let overlap_amp: Complex64 = t.iter().zip(f.iter()).map(|(a, b)| a.conj() * b).sum();
    let overlap = overlap_amp.norm_sqr();

    let d = QUBIT_DIM as f64;
    Ok(FidelityReport {
        fidelity: (unitarity_trace + overlap) / (d * (d + 1.0)),
        unitarity_trace,
        overlap,
    })
}

/// The projected gate as scored, plus whether phase compensation applied.
#[derive(Debug, Clone, PartialEq)]
pub struct GateEvaluation {
    pub gate: UnitaryMatrix,
    pub compensated: bool,
    pub report: FidelityReport,
}

/// Project, compensate and score a full-space evolution against `target`.
///
/// When a diagonal entry is too small to read a phase from, the projected
/// gate is scored uncompensated instead of failing.
pub fn evaluate_gate(
    u16: &UnitaryMatrix,
    target: &UnitaryMatrix,
) -> Result<GateEvaluation, SimError> {
    let projected = project_to_computational(u16)?;
    let (gate, compensated) = match phase_compensate(&projected) {
        Ok(g) => (g, true),
        Err(SimError::CompensationDegenerate { .. }) => (projected, false),
        Err(e) => return Err(e),
    };
    let report = gate_fidelity(&gate, target)?;
    Ok(GateEvaluation {
        gate,
        compensated,
        report,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn phases(p: [f64; 4]) -> UnitaryMatrix {
        let d: Vec<_> = p.iter().map(|&x| Complex64::from_polar(1.0, x)).collect();
        UnitaryMatrix::from_diagonal(&d)
    }

    fn close(a: &UnitaryMatrix, b: &UnitaryMatrix, tol: f64) -> bool {
        (a.matrix() - b.matrix()).camax() < tol
    }

    #[test]
    fn projection_of_identity() {
        let p = project_to_computational(&UnitaryMatrix::identity(16)).unwrap();
        assert_eq!(p, UnitaryMatrix::identity(4));
    }

    #[test]
    fn projection_with_full_leakage() {
        let mut m = DMatrix::identity(16, 16);
        for &r in &COMPUTATIONAL_INDICES {
            for c in 0..16 {
                m[(r, c)] = Complex64::new(0.0, 0.0);
            }
        }
        let p = project_to_computational(&UnitaryMatrix::from_matrix(m).unwrap()).unwrap();
        assert!(p.matrix().iter().all(|z| z.norm() == 0.0));
    }

    #[test]
    fn projection_rejects_wrong_dim() {
        assert!(matches!(
            project_to_computational(&UnitaryMatrix::identity(4)),
            Err(SimError::Dimension {
                expected: 16,
                got: 4
            })
        ));
    }

    #[test]
    fn compensation_examples() {
        let i4 = UnitaryMatrix::identity(4);
        assert!(close(&phase_compensate(&i4).unwrap(), &i4, 1e-15));

        let out = phase_compensate(&phases([0.3, 0.5, 0.7, 1.2])).unwrap();
        assert!(close(&out, &phases([0.0, 0.0, 0.0, 0.3]), 1e-14));

        for alpha in [0.0, 0.4, -2.9, 3.1] {
            let mut p = [alpha; 4];
            p[3] += std::f64::consts::PI;
            let out = phase_compensate(&phases(p)).unwrap();
            assert!(close(&out, &cz(), 1e-14));
        }
    }

    #[test]
    fn compensation_degenerate() {
        let mut d = vec![Complex64::new(1.0, 0.0); 4];
        d[1] = Complex64::new(1e-9, 0.0);
        let err = phase_compensate(&UnitaryMatrix::from_diagonal(&d)).unwrap_err();
        assert!(matches!(
            err,
            SimError::CompensationDegenerate { index: 1, .. }
        ));
        // the 11 entry is never read
        d[1] = Complex64::new(1.0, 0.0);
        d[3] = Complex64::new(0.0, 0.0);
        assert!(phase_compensate(&UnitaryMatrix::from_diagonal(&d)).is_ok());
    }

    #[test]
    fn fidelity_examples() {
        let czm = cz();
        let r = gate_fidelity(&czm, &czm).unwrap();
        assert_eq!(r.fidelity, 1.0);
        let r = gate_fidelity(&UnitaryMatrix::identity(4), &czm).unwrap();
        assert!((r.fidelity - 0.4).abs() < 1e-12);
        let r = gate_fidelity(&czm.scale(0.5), &czm).unwrap();
        assert!((r.fidelity - 0.25).abs() < 1e-12);
        assert!((r.unitarity_trace - 1.0).abs() < 1e-12);
        assert!((r.overlap - 4.0).abs() < 1e-12);
    }

    #[test]
    fn evaluate_falls_back_when_degenerate() {
        let mut m = DMatrix::identity(16, 16);
        // Swap ↓↓ out of the subspace.
        m.swap_rows(5, 0);
        let ev = evaluate_gate(&UnitaryMatrix::from_matrix(m).unwrap(), &cz()).unwrap();
        assert!(!ev.compensated);
        assert!((ev.report.unitarity_trace - 3.0).abs() < 1e-12);
    }
}
