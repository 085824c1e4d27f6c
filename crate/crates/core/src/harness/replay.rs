use serde::Serialize;

use super::HarnessError;
use crate::env::{PulseRecord, PulseSchedule};
use crate::sim::{
    accumulate, build_hamiltonian, cz, evaluate_gate, evolve_step, DeviceConstants, FidelityReport,
    HamiltonianParams, UnitaryMatrix, EPS_LIMITS, FULL_DIM, TUN_LIMITS,
};

/// Result of evolving a stored schedule.
#[derive(Debug, Clone, PartialEq)]
pub struct ReplayReport {
    pub report: FidelityReport,
    /// Fidelity after each step.
    pub trace: Vec<f64>,
    pub compensated: bool,
    pub unitary: UnitaryMatrix,
}

fn propagator(
    r: &PulseRecord,
    constants: &DeviceConstants,
    dt_ns: f64,
) -> Result<UnitaryMatrix, HarnessError> {
    let params = HamiltonianParams::new([r.eps0, r.eps1], r.tunnel, *constants);
    Ok(evolve_step(&build_hamiltonian(&params)?, dt_ns)?)
}

/// Evolves `schedule` from the identity with the simulator alone and scores
/// the result against CZ.
pub fn run_replay(
    schedule: &PulseSchedule,
    constants: &DeviceConstants,
    dt_ns: f64,
) -> Result<ReplayReport, HarnessError> {
    constants.validate()?;
    schedule.check_bounds([EPS_LIMITS.0, EPS_LIMITS.1], [TUN_LIMITS.0, TUN_LIMITS.1])?;
    let target = cz();
    let mut u = UnitaryMatrix::identity(FULL_DIM);
    let mut trace = Vec::with_capacity(schedule.len());
    for r in &schedule.records {
        u = accumulate(&propagator(r, constants, dt_ns)?, &u)?;
        trace.push(evaluate_gate(&u, &target)?.report.fidelity);
    }
    let eval = evaluate_gate(&u, &target)?;
    Ok(ReplayReport {
        report: eval.report,
        trace,
        compensated: eval.compensated,
        unitary: u,
    })
}

/// Fidelity of a constant pulse held for 1, 2, … `max_steps` steps.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepReport {
    pub pulse: PulseRecord,
    /// `(duration_ns, fidelity)` for every duration.
    pub points: Vec<(f64, f64)>,
    pub best_duration_ns: f64,
    pub best_fidelity: f64,
}

pub fn sweep_constant(
    pulse: PulseRecord,
    constants: &DeviceConstants,
    dt_ns: f64,
    max_steps: usize,
) -> Result<SweepReport, HarnessError> {
    constants.validate()?;
    PulseSchedule {
        records: vec![pulse],
    }
    .check_bounds([EPS_LIMITS.0, EPS_LIMITS.1], [TUN_LIMITS.0, TUN_LIMITS.1])?;
    let step = propagator(&pulse, constants, dt_ns)?;
    let target = cz();
    let mut u = UnitaryMatrix::identity(FULL_DIM);
    let mut points = Vec::with_capacity(max_steps);
    let (mut best_duration_ns, mut best_fidelity) = (0.0, f64::NEG_INFINITY);
    for k in 1..=max_steps {
        u = accumulate(&step, &u)?;
        let f = evaluate_gate(&u, &target)?.report.fidelity;
        let duration = k as f64 * dt_ns;
        if f > best_fidelity {
            best_fidelity = f;
            best_duration_ns = duration;
        }
        points.push((duration, f));
    }
    Ok(SweepReport {
        pulse,
        points,
        best_duration_ns,
        best_fidelity,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn init_pulse() -> PulseRecord {
        PulseRecord {
            step: 0,
            eps0: 170.0,
            eps1: 70.0,
            tunnel: 2.5,
        }
    }

    #[test]
    fn empty_schedule_scores_identity() {
        let r = run_replay(&PulseSchedule::default(), &DeviceConstants::default(), 1.0).unwrap();
        assert!((r.report.fidelity - 0.4).abs() < 1e-12);
        assert!(r.trace.is_empty());
    }

    #[test]
    fn sweep_matches_replay_of_repeated_pulse() {
        let c = DeviceConstants::default();
        let sweep = sweep_constant(init_pulse(), &c, 1.0, 20).unwrap();
        let schedule = PulseSchedule {
            records: (0..20)
                .map(|step| PulseRecord {
                    step,
                    ..init_pulse()
                })
                .collect(),
        };
        let replay = run_replay(&schedule, &c, 1.0).unwrap();
        for (k, (d, f)) in sweep.points.iter().enumerate() {
            assert_eq!(*d, (k + 1) as f64);
            assert_eq!(*f, replay.trace[k]);
        }
        assert!(sweep.best_fidelity > 0.99);
    }

    #[test]
    fn rejects_out_of_bounds() {
        let bad = PulseSchedule {
            records: vec![PulseRecord {
                tunnel: 7.0,
                ..init_pulse()
            }],
        };
        assert!(matches!(
            run_replay(&bad, &DeviceConstants::default(), 1.0),
            Err(HarnessError::Schedule(_))
        ));
    }
}
