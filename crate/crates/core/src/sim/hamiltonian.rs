use nalgebra::DMatrix;
use num_complex::Complex64;

use super::{HamiltonianParams, HermitianMatrix, SimError, FULL_DIM};

const N_MODES: usize = 4;

/// Spin orbital of one dot, in Jordan-Wigner order.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Dot0Up = 0,
    Dot0Down = 1,
    Dot1Up = 2,
    Dot1Down = 3,
}

impl Mode {
    pub const ALL: [Mode; N_MODES] = [Mode::Dot0Up, Mode::Dot0Down, Mode::Dot1Up, Mode::Dot1Down];

    pub fn of(dot: usize, up: bool) -> Mode {
        match (dot, up) {
            (0, true) => Mode::Dot0Up,
            (0, false) => Mode::Dot0Down,
            (1, true) => Mode::Dot1Up,
            (1, false) => Mode::Dot1Down,
            _ => panic!("two-dot system has no dot {dot}"),
        }
    }

    fn bit(self) -> usize {
        1 << (N_MODES - 1 - self as usize)
    }
}

/// Whether `mode` is occupied in basis state `index`.
pub fn occupation(index: usize, mode: Mode) -> bool {
    index & mode.bit() != 0
}

pub fn total_occupation(index: usize) -> u32 {
    (index & (FULL_DIM - 1)).count_ones()
}

/// Human-readable label such as `↑,↓` or `0,S`.
pub fn basis_label(index: usize) -> String {
    let dot = |d: usize| match (
        occupation(index, Mode::of(d, true)),
        occupation(index, Mode::of(d, false)),
    ) {
        (false, false) => "0",
        (true, false) => "↑",
        (false, true) => "↓",
        (true, true) => "S",
    };
    format!("{},{}", dot(0), dot(1))
}

/// Jordan-Wigner parity of the modes preceding `mode`.
fn jw_sign(index: usize, mode: Mode) -> f64 {
    let preceding = Mode::ALL[..mode as usize]
        .iter()
        .filter(|m| occupation(index, **m))
        .count();
    if preceding % 2 == 0 {
        1.0
    } else {
        -1.0
    }
}

/// `c†_to c_from |index⟩`, returning the target state and its sign.
fn hop(index: usize, to: Mode, from: Mode) -> Option<(usize, f64)> {
    if !occupation(index, from) {
        return None;
    }
    let sign_from = jw_sign(index, from);
    let mid = index & !from.bit();
    if occupation(mid, to) {
        return None;
    }
    let sign_to = jw_sign(mid, to);
    Some((mid | to.bit(), sign_from * sign_to))
}

fn diagonal_energy(index: usize, p: &HamiltonianParams) -> f64 {
    let mut energy = 0.0;
    for dot in 0..2 {
        let up = occupation(index, Mode::of(dot, true)) as u8 as f64;
        let down = occupation(index, Mode::of(dot, false)) as u8 as f64;
        energy += p.eps[dot] * (up + down);
        energy += 0.5 * p.ez[dot] * (up - down);
        energy += p.u[dot] * up * down;
    }
    energy
}

/// Assembles `H = H_ε + H_Z + H_U + H_T` on the 16-state Fock space.
///
/// Tunneling is `-t Σ_σ (c†_{0σ} c_{1σ} + h.c.)` with Jordan-Wigner signs.
pub fn build_hamiltonian(params: &HamiltonianParams) -> Result<HermitianMatrix, SimError> {
    params.validate()?;

    let zero = Complex64::new(0.0, 0.0);
    let mut h = DMatrix::from_element(FULL_DIM, FULL_DIM, zero);
    for index in 0..FULL_DIM {
        h[(index, index)] = Complex64::new(diagonal_energy(index, params), 0.0);
    }

    if params.tun != 0.0 {
        for up in [true, false] {
            let (left, right) = (Mode::of(0, up), Mode::of(1, up));
            for index in 0..FULL_DIM {
                // c†_left c_right; the conjugate term fills the mirrored entry.
                if let Some((target, sign)) = hop(index, left, right) {
                    let amp = Complex64::new(-params.tun * sign, 0.0);
                    h[(target, index)] += amp;
                    h[(index, target)] += amp.conj();
                }
            }
        }
    }

    Ok(HermitianMatrix::from_raw(h))
}
