//! Builds the 16x16 two-dot Hubbard Hamiltonian at a chosen operating point
//! and prints its spectrum and the diagonal of the four qubit states.
//!
//! Usage: cargo run --example hamiltonian_spectrum -- [eps0] [eps1] [tunnel]

use qdgate::sim::{
    basis_label, build_hamiltonian, total_occupation, DeviceConstants, HamiltonianParams,
    COMPUTATIONAL_INDICES, FULL_DIM,
};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let args: Vec<f64> = std::env::args()
        .skip(1)
        .map(|a| a.parse())
        .collect::<Result<_, _>>()?;
    let eps0 = args.first().copied().unwrap_or(170.0);
    let eps1 = args.get(1).copied().unwrap_or(70.0);
    let tunnel = args.get(2).copied().unwrap_or(2.5);

    let params = HamiltonianParams::new([eps0, eps1], tunnel, DeviceConstants::default());
    let h = build_hamiltonian(&params)?;

    println!("operating point: eps = ({eps0}, {eps1}) GHz, t = {tunnel} GHz");
    println!("\nqubit-subspace diagonal:");
    for &k in &COMPUTATIONAL_INDICES {
        println!(
            "  {:>2} {:<12} {:>12.4} GHz",
            k,
            basis_label(k),
            h.get(k, k).re
        );
    }

    // Hopping conserves particle number, so each sector diagonalises alone.
    println!("\neigenvalues by particle number:");
    for n in 0..=4 {
        let sector: Vec<usize> = (0..FULL_DIM)
            .filter(|&k| total_occupation(k) == n)
            .collect();
        let block = h.matrix().select_rows(&sector).select_columns(&sector);
        let mut energies: Vec<f64> = block.symmetric_eigenvalues().iter().copied().collect();
        energies.sort_by(f64::total_cmp);
        let shown: Vec<String> = energies.iter().map(|e| format!("{e:.3}")).collect();
        println!("  N={n}: {}", shown.join(", "));
    }
    Ok(())
}
