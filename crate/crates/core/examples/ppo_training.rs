//! Trains the continuous-action PPO agent and prints one line per iteration.
//!
//! Usage: cargo run --release --example ppo_training -- [seed] [iterations]

use qdgate::agents::{train_ppo, PpoConfig};
use qdgate::env::EnvConfig;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut args = std::env::args().skip(1);
    let seed: u64 = args.next().map(|s| s.parse()).transpose()?.unwrap_or(0);
    let iterations: usize = args.next().map(|s| s.parse()).transpose()?.unwrap_or(2000);

    let cfg = PpoConfig {
        iterations_max: iterations,
        ..PpoConfig::default()
    };
    let out = train_ppo(&EnvConfig::default(), &cfg, seed)?;
    for it in &out.iterations {
        println!(
            "iter {:4}  episodes {:3}  mean F {:.5}  best F {:.6}  shortest {:>6}  std {:.3}  {:.0} ms",
            it.iteration,
            it.episodes,
            it.mean_final_fidelity.unwrap_or(f64::NAN),
            it.best_fidelity,
            it.shortest_success_ns.map_or("-".into(), |d| format!("{d} ns")),
            it.mean_std,
            it.wall_ms,
        );
    }
    match &out.best {
        Some(b) => println!(
            "best: fidelity {:.6} in {} ns (episode {}), stopped early: {}",
            b.fidelity, b.duration_ns, b.episode, out.stopped_early
        ),
        None => println!("no episode finished"),
    }
    Ok(())
}
