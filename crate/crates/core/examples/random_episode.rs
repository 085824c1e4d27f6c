//! Runs one episode of uniformly random discrete actions and prints the
//! control trajectory, rewards and the adaptive step size.
//!
//! Usage: cargo run --example random_episode -- [seed]

use qdgate::env::{decode_action, EnvConfig, GateEnv, N_ACTIONS};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let seed: u64 = std::env::args()
        .nth(1)
        .map(|s| s.parse())
        .transpose()?
        .unwrap_or(0);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut env = GateEnv::new(EnvConfig::default())?;
    let obs = env.reset(seed);
    println!(
        "observation length {}, initial F {:.4}",
        obs.features.len(),
        obs.fidelity()
    );

    let mut total = 0.0;
    loop {
        let action = rng.random_range(0..N_ACTIONS);
        let delta = decode_action(action, 1.0)?;
        let step = env.step_discrete(action)?;
        total += step.reward;
        let c = step.info.controls;
        println!(
            "t={:3} ns  a={:2} {:?}  eps=({:7.2},{:7.2}) t={:.2}  F={:.5}  step={}  r={:7.2}",
            step.info.gate_duration_ns,
            action,
            delta.map(|d| d as i8),
            c.eps[0],
            c.eps[1],
            c.tun,
            step.info.fidelity,
            step.info.step_size,
            step.reward
        );
        if step.done() {
            let how = if step.terminated {
                "reached target"
            } else {
                "hit the step limit"
            };
            println!("episode {how}, return {total:.2}");
            break;
        }
    }
    let path = std::env::temp_dir().join("random_episode.csv");
    env.export_schedule().write_csv(&path)?;
    println!("schedule written to {}", path.display());
    Ok(())
}
