//! Drives the full experiment pipeline from a TOML config: train, write the
//! run directory, verify the manifest and re-export the plot tables.
//!
//! Usage: cargo run --release --example experiment_run -- [config.toml] [output_dir]

use std::path::PathBuf;

use qdgate::harness::{export_plots, parse_config, parse_config_str, RunManifest};

const QUICK: &str = r#"
algorithm = "ppo"
seed = 1

[ppo]
n_envs = 4
iterations_max = 30
"#;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut args = std::env::args().skip(1);
    let mut cfg = match args.next() {
        Some(path) => parse_config(&PathBuf::from(path))?,
        None => parse_config_str(QUICK, "built-in")?,
    };
    cfg.output_dir = args
        .next()
        .map(PathBuf::from)
        .unwrap_or_else(|| std::env::temp_dir().join(format!("qdgate-run-{}", std::process::id())));

    println!("config digest {}", cfg.digest()?);
    let manifest = qdgate::harness::run_train(&cfg)?;
    let s = &manifest.summary;
    println!("wrote {}", cfg.output_dir.display());
    println!(
        "best fidelity {:?} in {:?} ns (replayed: {:?})",
        s.best_fidelity, s.best_duration_ns, s.replay_fidelity
    );

    RunManifest::load(&cfg.output_dir)?.verify(&cfg.output_dir)?;
    for file in export_plots(&cfg.output_dir)? {
        println!("  plot table {}", file.display());
    }
    Ok(())
}
