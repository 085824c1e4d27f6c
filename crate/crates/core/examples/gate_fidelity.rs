//! Holds one control setting for a fixed time, then projects the evolution
//! onto the qubit subspace, removes single-qubit Z phases and scores it
//! against CZ.
//!
//! Usage: cargo run --example gate_fidelity -- [duration_ns]

use qdgate::sim::{
    accumulate, build_hamiltonian, cz, evaluate_gate, evolve_step, gate_fidelity,
    project_to_computational, DeviceConstants, HamiltonianParams, UnitaryMatrix, FULL_DIM,
};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let steps: usize = std::env::args()
        .nth(1)
        .map(|s| s.parse())
        .transpose()?
        .unwrap_or(50);

    let target = cz();
    println!(
        "sanity: F(CZ) = {}, F(I) = {}",
        gate_fidelity(&target, &target)?.fidelity,
        { gate_fidelity(&UnitaryMatrix::identity(4), &target)?.fidelity }
    );

    let params = HamiltonianParams::new([170.0, 70.0], 2.5, DeviceConstants::default());
    let step = evolve_step(&build_hamiltonian(&params)?, 1.0)?;
    let mut u = UnitaryMatrix::identity(FULL_DIM);
    for _ in 0..steps {
        u = accumulate(&step, &u)?;
    }
    println!("after {steps} ns: |U†U - I| = {:.2e}", u.unitarity_error());

    let raw = gate_fidelity(&project_to_computational(&u)?, &target)?;
    let eval = evaluate_gate(&u, &target)?;
    println!("fidelity before phase correction: {:.6}", raw.fidelity);
    println!(
        "fidelity after phase correction:  {:.6} (leakage-sensitive term Tr U†U = {:.6})",
        eval.report.fidelity, eval.report.unitarity_trace
    );
    println!("\ncompensated gate (magnitude, phase/pi):");
    for r in 0..4 {
        let row: Vec<String> = (0..4)
            .map(|c| {
                let z = eval.gate.get(r, c);
                format!("{:5.3}∠{:+5.2}", z.norm(), z.arg() / std::f64::consts::PI)
            })
            .collect();
        println!("  {}", row.join("  "));
    }
    Ok(())
}
