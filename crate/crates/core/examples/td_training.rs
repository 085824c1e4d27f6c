//! Trains deep Q-learning or deep SARSA on the discrete action set and prints
//! the trailing-10 mean fidelity every 50 episodes.
//!
//! Usage: cargo run --release --example td_training -- [qlearning|sarsa] [seed] [episodes]

use qdgate::agents::{train_td, TdAlgorithm, TdConfig};
use qdgate::env::{EnvConfig, GateEnv};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut args = std::env::args().skip(1);
    let algo = match args.next().as_deref() {
        None | Some("qlearning") => TdAlgorithm::QLearning,
        Some("sarsa") => TdAlgorithm::Sarsa,
        Some(other) => return Err(format!("unknown algorithm `{other}`").into()),
    };
    let seed: u64 = args.next().map(|s| s.parse()).transpose()?.unwrap_or(0);
    let episodes: usize = args.next().map(|s| s.parse()).transpose()?.unwrap_or(5000);

    let cfg = TdConfig {
        episodes_max: episodes,
        ..TdConfig::default()
    };
    let mut env = GateEnv::new(EnvConfig::default())?;
    let out = train_td(&mut env, algo, &cfg, seed)?;

    for (k, window) in out.episodes.windows(10).enumerate() {
        let last = k + 9;
        if last % 50 == 49 || last + 1 == out.episodes.len() {
            let mean = window.iter().map(|e| e.final_fidelity).sum::<f64>() / 10.0;
            let e = &window[9];
            println!(
                "episode {:5}  eps {:.3}  mean-10 F {:.5}  last F {:.5} in {:3} ns  return {:8.1}",
                last,
                e.epsilon.unwrap_or(0.0),
                mean,
                e.final_fidelity,
                e.gate_duration_ns,
                e.episode_return
            );
        }
    }
    println!(
        "converged: {} after {} episodes",
        out.converged,
        out.episodes.len()
    );
    if let Some(b) = &out.best {
        println!("best: fidelity {:.6} in {} ns", b.fidelity, b.duration_ns);
    }
    Ok(())
}
