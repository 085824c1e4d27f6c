//! Exact simulation of the two-dot Hubbard system.
//!
//! The full Fock space of two dots with two spin orbitals each has 16 states.
//! Mode order is `(dot0↑, dot0↓, dot1↑, dot1↓)` and a basis index is the
//! big-endian occupation bitstring over those modes, so the (1,1) charge
//! states ↓↓, ↓↑, ↑↓, ↑↑ sit at indices 5, 6, 9 and 10.
//!
//! Energies are linear frequencies in GHz and times are in ns, so a constant
//! Hamiltonian `H` held for `dt` generates `exp(-i·2π·H·dt)`.

mod evolve;
mod gate;
mod hamiltonian;

use std::fmt;

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use evolve::{accumulate, evolve_step};
pub use gate::{
    cz, evaluate_gate, gate_fidelity, phase_compensate, project_to_computational, GateEvaluation,
    COMPUTATIONAL_INDICES, PHASE_TOLERANCE,
};
pub use hamiltonian::{basis_label, build_hamiltonian, occupation, total_occupation, Mode};

/// Dimension of the two-dot Fock space.
pub const FULL_DIM: usize = 16;
/// Dimension of the two-qubit computational subspace.
pub const QUBIT_DIM: usize = 4;

/// Hard physical range for on-site energies, GHz.
pub const EPS_LIMITS: (f64, f64) = (-750.0, 750.0);
/// Hard physical range for the tunnel coupling, GHz.
pub const TUN_LIMITS: (f64, f64) = (0.0, 5.0);

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SimError {
    #[error("parameter `{field}` = {value} is outside its allowed range [{min}, {max}]")]
    OutOfBounds {
        field: &'static str,
        value: f64,
        min: f64,
        max: f64,
    },
    #[error("parameter `{field}` is not finite ({value})")]
    NonFinite { field: &'static str, value: f64 },
    #[error("time step must be positive, got {0} ns")]
    NonPositiveStep(f64),
    #[error("dimension mismatch: expected {expected}x{expected}, got {got}x{got}")]
    Dimension { expected: usize, got: usize },
    #[error("eigendecomposition did not converge within {max_iterations} iterations (dim {dim})")]
    EigenNoConvergence { dim: usize, max_iterations: usize },
    #[error(
        "cannot compensate phases: |u[{index}][{index}]| = {magnitude:.3e} is below {tolerance:e}"
    )]
    CompensationDegenerate {
        index: usize,
        magnitude: f64,
        tolerance: f64,
    },
}

/// Coulomb and Zeeman constants of the device. These do not change during a
/// gate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DeviceConstants {
    /// On-site Coulomb repulsion per dot, GHz.
    pub u: [f64; 2],
    /// Zeeman splitting (qubit frequency) per dot, GHz.
    pub ez: [f64; 2],
}

impl Default for DeviceConstants {
    fn default() -> Self {
        Self {
            u: [845.2, 845.2],
            ez: [18.4, 19.7],
        }
    }
}

impl DeviceConstants {
    pub fn validate(&self) -> Result<(), SimError> {
        for (field, v) in [
            ("u[0]", self.u[0]),
            ("u[1]", self.u[1]),
            ("ez[0]", self.ez[0]),
            ("ez[1]", self.ez[1]),
        ] {
            if !v.is_finite() {
                return Err(SimError::NonFinite { field, value: v });
            }
            if v < 0.0 {
                return Err(SimError::OutOfBounds {
                    field,
                    value: v,
                    min: 0.0,
                    max: f64::INFINITY,
                });
            }
        }
        Ok(())
    }
}

/// All physical controls and constants of the two-dot system, GHz.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct HamiltonianParams {
    pub eps: [f64; 2],
    pub tun: f64,
    pub u: [f64; 2],
    pub ez: [f64; 2],
}

impl HamiltonianParams {
    pub fn new(eps: [f64; 2], tun: f64, constants: DeviceConstants) -> Self {
        Self {
            eps,
            tun,
            u: constants.u,
            ez: constants.ez,
        }
    }

    pub fn validate(&self) -> Result<(), SimError> {
        DeviceConstants {
            u: self.u,
            ez: self.ez,
        }
        .validate()?;
        let checks = [
            ("eps[0]", self.eps[0], EPS_LIMITS),
            ("eps[1]", self.eps[1], EPS_LIMITS),
            ("tun", self.tun, TUN_LIMITS),
        ];
        for (field, value, (min, max)) in checks {
            if !value.is_finite() {
                return Err(SimError::NonFinite { field, value });
            }
            if value < min || value > max {
                return Err(SimError::OutOfBounds {
                    field,
                    value,
                    min,
                    max,
                });
            }
        }
        Ok(())
    }
}

/// Dense complex Hermitian matrix, entries in GHz.
#[derive(Debug, Clone, PartialEq)]
pub struct HermitianMatrix(DMatrix<Complex64>);

impl HermitianMatrix {
    /// Builds from a matrix that is Hermitian up to `1e-12` relative to its
    /// largest entry; the stored matrix is symmetrised exactly.
    pub fn from_matrix(m: DMatrix<Complex64>) -> Result<Self, SimError> {
        if m.nrows() != m.ncols() {
            return Err(SimError::Dimension {
                expected: m.nrows(),
                got: m.ncols(),
            });
        }
        let n = m.nrows();
        let mut h = m;
        for j in 0..n {
            h[(j, j)].im = 0.0;
            for k in (j + 1)..n {
                let avg = (h[(j, k)] + h[(k, j)].conj()) * 0.5;
                h[(j, k)] = avg;
                h[(k, j)] = avg.conj();
            }
        }
        Ok(Self(h))
    }

    pub(crate) fn from_raw(m: DMatrix<Complex64>) -> Self {
        Self(m)
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<Complex64> {
        &self.0
    }

    pub fn get(&self, row: usize, col: usize) -> Complex64 {
        self.0[(row, col)]
    }
}

/// Dense complex square matrix holding (possibly projected) time evolution.
#[derive(Debug, Clone, PartialEq)]
pub struct UnitaryMatrix(DMatrix<Complex64>);

impl UnitaryMatrix {
    pub fn identity(dim: usize) -> Self {
        Self(DMatrix::identity(dim, dim))
    }

    pub fn from_matrix(m: DMatrix<Complex64>) -> Result<Self, SimError> {
        if m.nrows() != m.ncols() {
            return Err(SimError::Dimension {
                expected: m.nrows(),
                got: m.ncols(),
            });
        }
        Ok(Self(m))
    }

    pub fn from_diagonal(diag: &[Complex64]) -> Self {
        let n = diag.len();
        Self(DMatrix::from_fn(n, n, |r, c| {
            if r == c {
                diag[r]
            } else {
                Complex64::new(0.0, 0.0)
            }
        }))
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<Complex64> {
        &self.0
    }

    pub fn into_matrix(self) -> DMatrix<Complex64> {
        self.0
    }

    pub fn get(&self, row: usize, col: usize) -> Complex64 {
        self.0[(row, col)]
    }

    pub fn scale(&self, factor: f64) -> Self {
        Self(self.0.map(|z| z * factor))
    }

    /// `max |(U†U − I)_jk|`.
    pub fn unitarity_error(&self) -> f64 {
        let n = self.dim();
        let prod = self.0.adjoint() * &self.0;
        let mut worst = 0.0f64;
        for r in 0..n {
            for c in 0..n {
                let expect = if r == c { 1.0 } else { 0.0 };
                worst = worst.max((prod[(r, c)] - Complex64::new(expect, 0.0)).norm());
            }
        }
        worst
    }

    /// Row-major flattening with real and imaginary parts interleaved.
    pub fn flatten_interleaved(&self) -> Vec<f64> {
        let n = self.dim();
        let mut out = Vec::with_capacity(2 * n * n);
        for r in 0..n {
            for c in 0..n {
                let z = self.0[(r, c)];
                out.push(z.re);
                out.push(z.im);
            }
        }
        out
    }

    pub(crate) fn require_dim(&self, expected: usize) -> Result<(), SimError> {
        if self.dim() != expected {
            return Err(SimError::Dimension {
                expected,
                got: self.dim(),
            });
        }
        Ok(())
    }
}

impl fmt::Display for UnitaryMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for r in 0..self.dim() {
            for c in 0..self.dim() {
                let z = self.0[(r, c)];
                write!(f, "{:>9.5}{:+.5}i ", z.re, z.im)?;
            }
            writeln!(f)?;
        }
        Ok(())
    }
}

/// Gate fidelity with the two terms it is assembled from.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FidelityReport {
    pub fidelity: f64,
    /// `Tr(U†U)` of the evaluated gate.
    pub unitarity_trace: f64,
    /// `|Tr(U_target† U)|²`.
    pub overlap: f64,
}
