use qdgate::env::{EnvConfig, GateEnv, PulseRecord, PulseSchedule, StepResult, N_ACTIONS};
use qdgate::harness::run_replay;
use qdgate::sim::DeviceConstants;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

enum Action {
    Discrete(usize),
    Continuous([f64; 3]),
}

fn random_actions(seed: u64, n: usize, discrete: bool) -> Vec<Action> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|_| {
            if discrete {
                Action::Discrete(rng.random_range(0..N_ACTIONS))
            } else {
                // deliberately overshoots [-1, 1] to exercise clipping
                Action::Continuous([
                    rng.random_range(-1.3..1.3),
                    rng.random_range(-1.3..1.3),
                    rng.random_range(-1.3..1.3),
                ])
            }
        })
        .collect()
}

/// Runs `actions`, resetting whenever an episode ends.
fn drive(
    env: &mut GateEnv,
    actions: &[Action],
    mut check: impl FnMut(&GateEnv, &StepResult),
) -> Vec<StepResult> {
    let mut out = Vec::with_capacity(actions.len());
    let mut episode = 0;
    env.reset(episode);
    for a in actions {
        let step = match a {
            Action::Discrete(i) => env.step_discrete(*i),
            Action::Continuous(c) => env.step_continuous(c),
        }
        .unwrap();
        check(env, &step);
        let done = step.done();
        out.push(step);
        if done {
            episode += 1;
            env.reset(episode);
        }
    }
    out
}

#[test]
fn controls_stay_within_bounds_under_fuzzing() {
    let cfg = EnvConfig::default();
    for discrete in [true, false] {
        let mut env = GateEnv::new(cfg.clone()).unwrap();
        drive(&mut env, &random_actions(7, 10_000, discrete), |_, s| {
            let c = s.info.controls;
            for e in c.eps {
                assert!(e >= cfg.eps_bounds[0] && e <= cfg.eps_bounds[1], "eps {e}");
            }
            assert!(
                c.tun >= cfg.tun_bounds[0] && c.tun <= cfg.tun_bounds[1],
                "tun {}",
                c.tun
            );
        });
    }
}

#[test]
fn identical_inputs_give_identical_steps() {
    for discrete in [true, false] {
        let actions = random_actions(11, 600, discrete);
        let a = drive(
            &mut GateEnv::new(EnvConfig::default()).unwrap(),
            &actions,
            |_, _| {},
        );
        let b = drive(
            &mut GateEnv::new(EnvConfig::default()).unwrap(),
            &actions,
            |_, _| {},
        );
        assert_eq!(a, b);
    }
}

#[test]
fn duration_reward_and_step_size_bookkeeping() {
    let cfg = EnvConfig::default();
    for discrete in [true, false] {
        let mut env = GateEnv::new(cfg.clone()).unwrap();
        let mut last_delta = f64::INFINITY;
        drive(&mut env, &random_actions(3, 3000, discrete), |env, s| {
            if env.steps() == 1 {
                last_delta = f64::INFINITY;
            }
            assert_eq!(s.info.gate_duration_ns, env.steps() as f64 * cfg.dt_ns);
            let expected = cfg.reward(s.info.fidelity, s.info.boundary_hit, s.terminated);
            assert_eq!(s.reward, expected);
            assert!(cfg.step_sizes.contains(&s.info.step_size));
            assert!(s.info.step_size <= last_delta);
            last_delta = s.info.step_size;
        });
    }
}

#[test]
fn exported_schedule_replays_to_the_same_fidelity() {
    let cfg = EnvConfig::default();
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    for trial in 0..20 {
        let mut env = GateEnv::new(cfg.clone()).unwrap();
        env.reset(trial);
        let mut last = None;
        for _ in 0..200 {
            let s = if trial % 2 == 0 {
                env.step_discrete(rng.random_range(0..N_ACTIONS)).unwrap()
            } else {
                env.step_continuous(&[
                    rng.random_range(-1.0..1.0),
                    rng.random_range(-1.0..1.0),
                    rng.random_range(-1.0..1.0),
                ])
                .unwrap()
            };
            let done = s.done();
            last = Some(s);
            if done {
                break;
            }
        }
        let schedule = env.export_schedule();
        let replay = run_replay(&schedule, &DeviceConstants::default(), cfg.dt_ns).unwrap();
        let f = last.unwrap().info.fidelity;
        assert!((replay.report.fidelity - f).abs() < 1e-12, "trial {trial}");
        assert_eq!(replay.trace.len(), schedule.len());
    }
}

#[test]
fn one_step_schedule_matches_no_change_step() {
    let mut env = GateEnv::new(EnvConfig::default()).unwrap();
    env.reset(0);
    let step = env.step_discrete(0).unwrap();
    let schedule = PulseSchedule {
        records: vec![PulseRecord {
            step: 0,
            eps0: 170.0,
            eps1: 70.0,
            tunnel: 2.5,
        }],
    };
    assert_eq!(env.export_schedule(), schedule);
    let replay = run_replay(&schedule, &DeviceConstants::default(), 1.0).unwrap();
    assert!((replay.report.fidelity - step.info.fidelity).abs() < 1e-12);
}
