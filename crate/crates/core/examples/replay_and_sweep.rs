//! Replays a pulse CSV through the simulator and sweeps a constant pulse
//! over durations. Without an argument, replays a short built-in schedule.
//!
//! Usage: cargo run --example replay_and_sweep -- [schedule.csv]

use qdgate::env::{PulseRecord, PulseSchedule};
use qdgate::harness::{run_replay, sweep_constant};
use qdgate::sim::DeviceConstants;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let constants = DeviceConstants::default();
    let schedule = match std::env::args().nth(1) {
        Some(path) => PulseSchedule::read_csv(std::path::Path::new(&path))?,
        None => PulseSchedule {
            records: (0..20)
                .map(|step| PulseRecord {
                    step,
                    eps0: 170.0,
                    eps1: 70.0 + step as f64,
                    tunnel: 2.5,
                })
                .collect(),
        },
    };
    let replay = run_replay(&schedule, &constants, 1.0)?;
    println!(
        "replayed {} ns: F = {:.6} (phase corrected: {}, |U†U - I| = {:.1e})",
        schedule.len(),
        replay.report.fidelity,
        replay.compensated,
        replay.unitary.unitarity_error()
    );

    let first = schedule.records.first().copied().unwrap_or(PulseRecord {
        step: 0,
        eps0: 170.0,
        eps1: 70.0,
        tunnel: 2.5,
    });
    let sweep = sweep_constant(first, &constants, 1.0, 100)?;
    for (ns, f) in sweep
        .points
        .iter()
        .filter(|(ns, _)| (*ns as usize).is_multiple_of(10))
    {
        println!("{ns:4} ns  F = {f:.6}");
    }
    println!(
        "constant-pulse peak: F = {:.6} at {} ns",
        sweep.best_fidelity, sweep.best_duration_ns
    );
    Ok(())
}
