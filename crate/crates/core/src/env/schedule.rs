use std::fs;
use std::io;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const CSV_HEADER: [&str; 4] = ["step", "eps0_ghz", "eps1_ghz", "tunnel_ghz"];

/// Significant digits written for every control value; enough to round-trip
/// an `f64` exactly.
const SIGNIFICANT_DIGITS: i32 = 17;

#[derive(Debug, Error)]
pub enum ScheduleError {
    #[error("i/o error on {path}: {source}")]
    Io { path: String, source: io::Error },
    #[error("malformed schedule CSV: {0}")]
    Csv(#[from] csv::Error),
    #[error("schedule header must be `{}`, got `{found}`", CSV_HEADER.join(","))]
    Header { found: String },
    #[error("row {row}: expected step index {expected}, found {found}")]
    StepOrder {
        row: usize,
        expected: usize,
        found: usize,
    },
    #[error("row {row}: `{field}` = {value} is outside [{min}, {max}]")]
    OutOfBounds {
        row: usize,
        field: &'static str,
        value: f64,
        min: f64,
        max: f64,
    },
}

/// Controls held during one time step.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PulseRecord {
    pub step: usize,
    #[serde(rename = "eps0_ghz")]
    pub eps0: f64,
    #[serde(rename = "eps1_ghz")]
    pub eps1: f64,
    #[serde(rename = "tunnel_ghz")]
    pub tunnel: f64,
}

/// Piecewise-constant control sequence, one record per time step.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct PulseSchedule {
    pub records: Vec<PulseRecord>,
}

/// Fixed-point decimal with at least 17 significant digits.
pub fn format_decimal(x: f64) -> String {
    if x == 0.0 || !x.is_finite() {
        return format!("{:.1$}", x, (SIGNIFICANT_DIGITS - 1) as usize);
    }
    let int_digits = x.abs().log10().floor() as i32 + 1;
    let decimals = (SIGNIFICANT_DIGITS - int_digits).clamp(1, 340) as usize;
    format!("{x:.decimals$}")
}

impl PulseSchedule {
    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn to_csv_string(&self) -> String {
        let mut out = CSV_HEADER.join(",");
        out.push('\n');
        for r in &self.records {
            out.push_str(&format!(
                "{},{},{},{}\n",
                r.step,
                format_decimal(r.eps0),
                format_decimal(r.eps1),
                format_decimal(r.tunnel)
            ));
        }
        out
    }

    pub fn write_csv(&self, path: &Path) -> Result<(), ScheduleError> {
        fs::write(path, self.to_csv_string()).map_err(|source| ScheduleError::Io {
            path: path.display().to_string(),
            source,
        })
    }

    pub fn from_csv_str(text: &str) -> Result<Self, ScheduleError> {
        let mut reader = csv::ReaderBuilder::new()
            .trim(csv::Trim::All)
            .from_reader(text.as_bytes());
        let header = reader.headers()?.clone();
        if header.iter().ne(CSV_HEADER.iter().copied()) {
            return Err(ScheduleError::Header {
                found: header.iter().collect::<Vec<_>>().join(","),
            });
        }
        let mut records = Vec::new();
        for (row, rec) in reader.deserialize::<PulseRecord>().enumerate() {
            let rec = rec?;
            if rec.step != row {
                return Err(ScheduleError::StepOrder {
                    row: row + 1,
                    expected: row,
                    found: rec.step,
                });
            }
            records.push(rec);
        }
        Ok(Self { records })
    }

    pub fn read_csv(path: &Path) -> Result<Self, ScheduleError> {
        let text = fs::read_to_string(path).map_err(|source| ScheduleError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::from_csv_str(&text)
    }

    /// Checks every value against the given bounds, reporting the first
    /// offending row (1-based, header excluded).
    pub fn check_bounds(
        &self,
        eps_bounds: [f64; 2],
        tun_bounds: [f64; 2],
    ) -> Result<(), ScheduleError> {
        for (row, r) in self.records.iter().enumerate() {
            for (field, value, [min, max]) in [
                ("eps0_ghz", r.eps0, eps_bounds),
                ("eps1_ghz", r.eps1, eps_bounds),
                ("tunnel_ghz", r.tunnel, tun_bounds),
            ] {
                if !(value >= min && value <= max) {
                    return Err(ScheduleError::OutOfBounds {
                        row: row + 1,
                        field,
                        value,
                        min,
                        max,
                    });
                }
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn decimal_formatting() {
        assert_eq!(format_decimal(170.0), "170.00000000000000");
        assert_eq!(format_decimal(2.5), "2.5000000000000000");
        assert_eq!(format_decimal(0.0), "0.0000000000000000");
        assert_eq!(format_decimal(-750.0), "-750.00000000000000");
    }

    #[test]
    fn header_and_rows() {
        let s = PulseSchedule {
            records: vec![PulseRecord {
                step: 0,
                eps0: 170.0,
                eps1: 70.0,
                tunnel: 2.5,
            }],
        };
        let text = s.to_csv_string();
        assert!(text.starts_with("step,eps0_ghz,eps1_ghz,tunnel_ghz\n"));
        assert_eq!(PulseSchedule::from_csv_str(&text).unwrap(), s);
    }

    #[test]
    fn rejects_bad_input() {
        assert!(matches!(
            PulseSchedule::from_csv_str("a,b,c,d\n0,1,2,3\n"),
            Err(ScheduleError::Header { .. })
        ));
        assert!(matches!(
            PulseSchedule::from_csv_str("step,eps0_ghz,eps1_ghz,tunnel_ghz\n0,1,x,3\n"),
            Err(ScheduleError::Csv(_))
        ));
        assert!(matches!(
            PulseSchedule::from_csv_str("step,eps0_ghz,eps1_ghz,tunnel_ghz\n1,1,2,3\n"),
            Err(ScheduleError::StepOrder { .. })
        ));
        let s =
            PulseSchedule::from_csv_str("step,eps0_ghz,eps1_ghz,tunnel_ghz\n0,1,2,6\n").unwrap();
        assert!(matches!(
            s.check_bounds([-750.0, 750.0], [0.0, 5.0]),
            Err(ScheduleError::OutOfBounds {
                row: 1,
                field: "tunnel_ghz",
                ..
            })
        ));
    }

    proptest! {
        #[test]
        fn csv_round_trip_is_exact(values in prop::collection::vec(
            (-750.0f64..750.0, -750.0f64..750.0, 0.0f64..5.0), 0..40)
        ) {
            let s = PulseSchedule {
                records: values
                    .iter()
                    .enumerate()
                    .map(|(step, &(eps0, eps1, tunnel))| PulseRecord { step, eps0, eps1, tunnel })
                    .collect(),
            };
            let back = PulseSchedule::from_csv_str(&s.to_csv_string()).unwrap();
            prop_assert_eq!(back, s);
        }
    }
}
