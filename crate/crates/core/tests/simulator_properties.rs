use nalgebra::DMatrix;
use num_complex::Complex64;
use proptest::prelude::*;
use qdgate::sim::{
    build_hamiltonian, cz, evolve_step, gate_fidelity, phase_compensate, project_to_computational,
    total_occupation, DeviceConstants, HamiltonianParams, HermitianMatrix, UnitaryMatrix, FULL_DIM,
};

fn params() -> impl Strategy<Value = HamiltonianParams> {
    (
        -750.0f64..750.0,
        -750.0f64..750.0,
        0.0f64..5.0,
        1.0f64..2000.0,
        1.0f64..2000.0,
        0.0f64..100.0,
        0.0f64..100.0,
    )
        .prop_map(|(e0, e1, t, u0, u1, z0, z1)| {
            HamiltonianParams::new(
                [e0, e1],
                t,
                DeviceConstants {
                    u: [u0, u1],
                    ez: [z0, z1],
                },
            )
        })
}

fn hermitian(scale: f64) -> impl Strategy<Value = HermitianMatrix> {
    prop::collection::vec((-1.0f64..1.0, -1.0f64..1.0), FULL_DIM * FULL_DIM).prop_map(move |v| {
        let m = DMatrix::from_fn(FULL_DIM, FULL_DIM, |r, c| {
            let (re, im) = v[r * FULL_DIM + c];
            Complex64::new(scale * re, scale * im)
        });
        HermitianMatrix::from_matrix(m).unwrap()
    })
}

/// A sub-unitary 4×4 obtained by projecting a random full-space evolution.
fn projected_gate() -> impl Strategy<Value = UnitaryMatrix> {
    (params(), 1.0f64..40.0).prop_map(|(p, dt)| {
        let u = evolve_step(&build_hamiltonian(&p).unwrap(), dt).unwrap();
        project_to_computational(&u).unwrap()
    })
}

fn virtual_z(alpha: f64, theta1: f64, theta2: f64) -> UnitaryMatrix {
    // rows 00, 01, 10, 11 pick up alpha + a·theta1 + b·theta2
    let d: Vec<_> = [(0.0, 0.0), (0.0, 1.0), (1.0, 0.0), (1.0, 1.0)]
        .iter()
        .map(|(a, b)| Complex64::from_polar(1.0, alpha + a * theta1 + b * theta2))
        .collect();
    UnitaryMatrix::from_diagonal(&d)
}

fn max_diff(a: &UnitaryMatrix, b: &UnitaryMatrix) -> f64 {
    (a.matrix() - b.matrix())
        .iter()
        .map(|z| z.norm())
        .fold(0.0, f64::max)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn hamiltonian_is_exactly_hermitian(p in params()) {
        let h = build_hamiltonian(&p).unwrap();
        let m = h.matrix();
        prop_assert_eq!(m, &m.adjoint());
    }

    #[test]
    fn hamiltonian_conserves_particle_number(p in params()) {
        let h = build_hamiltonian(&p).unwrap();
        for r in 0..FULL_DIM {
            for c in 0..FULL_DIM {
                if total_occupation(r) != total_occupation(c) {
                    prop_assert_eq!(h.get(r, c), Complex64::new(0.0, 0.0));
                }
            }
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn evolution_is_unitary(h in hermitian(1000.0)) {
        let u = evolve_step(&h, 1.0).unwrap();
        prop_assert!(u.unitarity_error() < 1e-10, "error {}", u.unitarity_error());
    }

    #[test]
    fn fidelity_stays_in_unit_interval(g in projected_gate()) {
        let f = gate_fidelity(&g, &cz()).unwrap().fidelity;
        prop_assert!((0.0..=1.0 + 1e-12).contains(&f), "F = {}", f);
    }

    #[test]
    fn fidelity_bounded_for_scaled_gates(g in projected_gate(), s in 0.0f64..1.0) {
        let f = gate_fidelity(&g.scale(s), &cz()).unwrap().fidelity;
        prop_assert!((0.0..=1.0 + 1e-12).contains(&f));
    }

    #[test]
    fn compensation_is_idempotent(g in projected_gate()) {
        if let Ok(once) = phase_compensate(&g) {
            let twice = phase_compensate(&once).unwrap();
            prop_assert!(max_diff(&once, &twice) < 1e-12);
        }
    }

    #[test]
    fn compensation_absorbs_virtual_z(
        g in projected_gate(),
        alpha in -4.0f64..4.0,
        t1 in -4.0f64..4.0,
        t2 in -4.0f64..4.0,
    ) {
        let Ok(base) = phase_compensate(&g) else { return Ok(()) };
        let rotated = UnitaryMatrix::from_matrix(virtual_z(alpha, t1, t2).matrix() * g.matrix()).unwrap();
        let out = phase_compensate(&rotated).unwrap();
        prop_assert!(max_diff(&base, &out) < 1e-12);
        let f0 = gate_fidelity(&base, &cz()).unwrap().overlap;
        let f1 = gate_fidelity(&out, &cz()).unwrap().overlap;
        prop_assert!((f0 - f1).abs() < 1e-12);
    }
}
