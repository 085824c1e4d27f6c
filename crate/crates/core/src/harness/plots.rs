use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use super::config::parse_config;
use super::{io_err, HarnessError};
use crate::env::PulseSchedule;

/// Trailing window used for the fidelity curve.
const WINDOW: usize = 10;

/// Files written by [`export_plots`], in order.
pub const PLOT_FILES: [&str; 5] = [
    "fidelity_vs_episode.tsv",
    "tunnel_vs_time.tsv",
    "detuning_vs_time.tsv",
    "bias0_vs_time.tsv",
    "bias1_vs_time.tsv",
];

/// Mean of every full window of `window` consecutive values.
pub fn trailing_mean(values: &[f64], window: usize) -> Vec<f64> {
    if window == 0 || values.len() < window {
        return Vec::new();
    }
    values
        .windows(window)
        .map(|w| w.iter().sum::<f64>() / window as f64)
        .collect()
}

fn require(dir: &Path, file: &'static str) -> Result<PathBuf, HarnessError> {
    let path = dir.join(file);
    if path.is_file() {
        Ok(path)
    } else {
        Err(HarnessError::MissingArtifact {
            dir: dir.to_path_buf(),
            file,
        })
    }
}

/// `(episode, final_fidelity)` from a per-episode JSONL file.
fn read_episode_fidelities(path: &Path) -> Result<Vec<(u64, f64)>, HarnessError> {
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    let mut out = Vec::new();
    for (k, line) in text
        .lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
    {
        let err = |message: String| HarnessError::Metrics {
            file: path.to_path_buf(),
            line: k + 1,
            message,
        };
        let v: serde_json::Value = serde_json::from_str(line).map_err(|e| err(e.to_string()))?;
        let episode = v["episode"]
            .as_u64()
            .ok_or_else(|| err("missing `episode`".into()))?;
        let fidelity = v["final_fidelity"]
            .as_f64()
            .ok_or_else(|| err("missing `final_fidelity`".into()))?;
        out.push((episode, fidelity));
    }
    Ok(out)
}

fn write_tsv(
    path: &Path,
    header: &str,
    rows: impl Iterator<Item = (f64, f64)>,
) -> Result<(), HarnessError> {
    let mut text = format!("{header}\n");
    for (x, y) in rows {
        writeln!(text, "{x}\t{y}").expect("writing to a String cannot fail");
    }
    fs::write(path, text).map_err(io_err(path))
}

/// Writes the plot-data TSVs into `run_dir` and returns their paths.
///
/// `fidelity_vs_episode.tsv` holds the trailing-10 mean of the final fidelity,
/// one row per full window, keyed by the window's last episode. The four
/// `*_vs_time.tsv` files trace the best schedule with one row per step at the
/// step's start time; detuning is `eps0 − eps1`. They are skipped when the run
/// finished no episode and so has no best schedule.
pub fn export_plots(run_dir: &Path) -> Result<Vec<PathBuf>, HarnessError> {
    let cfg = parse_config(&require(run_dir, "config.toml")?)?;
    let episodes_file = match require(run_dir, "episodes.jsonl") {
        Ok(p) => p,
        Err(_) => require(run_dir, "metrics.jsonl")?,
    };
    let episodes = read_episode_fidelities(&episodes_file)?;
    let fidelities: Vec<f64> = episodes.iter().map(|e| e.1).collect();
    let means = trailing_mean(&fidelities, WINDOW);

    let mut written = Vec::new();
    let path = run_dir.join(PLOT_FILES[0]);
    write_tsv(
        &path,
        "episode\tmean_fidelity",
        means
            .iter()
            .enumerate()
            .map(|(k, m)| (episodes[k + WINDOW - 1].0 as f64, *m)),
    )?;
    written.push(path);

    let schedule_path = run_dir.join("best_schedule.csv");
    if !schedule_path.is_file() {
        return Ok(written);
    }
    let schedule = PulseSchedule::read_csv(&schedule_path)?;
    let dt = cfg.env.dt_ns;
    type Column = (&'static str, fn(&crate::env::PulseRecord) -> f64);
    let columns: [Column; 4] = [
        ("time_ns\ttunnel_ghz", |r| r.tunnel),
        ("time_ns\tdetuning_ghz", |r| r.eps0 - r.eps1),
        ("time_ns\teps0_ghz", |r| r.eps0),
        ("time_ns\teps1_ghz", |r| r.eps1),
    ];
    for (name, (header, value)) in PLOT_FILES[1..].iter().zip(columns) {
        let path = run_dir.join(name);
        write_tsv(
            &path,
            header,
            schedule
                .records
                .iter()
                .map(|r| (r.step as f64 * dt, value(r))),
        )?;
        written.push(path);
    }
    Ok(written)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn trailing_window_rows() {
        let v: Vec<f64> = (0..25).map(|k| k as f64).collect();
        let m = trailing_mean(&v, 10);
        assert_eq!(m.len(), 16);
        assert_eq!(m[0], 4.5);
        assert_eq!(m[15], 19.5);
        assert!(trailing_mean(&v[..9], 10).is_empty());
    }
}
