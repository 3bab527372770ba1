mod common;

use common::*;
use neqc_core::circuit::{ry_matrix, rz_matrix};
use neqc_core::qstate::{cost, fidelity};
use neqc_core::seed::rng_from_seed;
use neqc_core::State;
use num_complex::Complex64;
use proptest::prelude::*;

fn haar(n: usize, seed: u64) -> State {
    State::haar_random(n, &mut rng_from_seed(seed)).unwrap()
}

proptest! {
    #[test]
    fn gates_preserve_norm(seed in any::<u64>(), n in 1usize..6, q in 0usize..6, theta in -10.0f64..10.0) {
        let q = q % n;
        let s = haar(n, seed);
        let s = s.apply_ry(q, theta).unwrap().apply_rz(q, -0.7 * theta).unwrap();
        prop_assert!((s.norm() - 1.0).abs() < 1e-10);
        if n > 1 {
            let s = s.apply_cz(q, (q + 1) % n).unwrap();
            prop_assert!((s.norm() - 1.0).abs() < 1e-10);
        }
    }

    #[test]
    fn cost_ignores_global_phase(seed in any::<u64>(), phi in -7.0f64..7.0) {
        let s = haar(3, seed);
        let rot = Complex64::from_polar(1.0, phi);
        let amps: Vec<Complex64> = s.amplitudes().iter().map(|a| a * rot).collect();
        let t = State::from_amplitudes(amps).unwrap();
        prop_assert!((cost(&s) - cost(&t)).abs() < 1e-14);
        // quarter-turn phases are exact in floating point, so the cost is too
        for rot in [Complex64::new(-1.0, 0.0), Complex64::new(0.0, 1.0), Complex64::new(0.0, -1.0)] {
            let zero = Complex64::new(0.0, 0.0);
            let t = s.clone().apply_single(0, [[rot, zero], [zero, rot]]).unwrap();
            prop_assert_eq!(cost(&s), cost(&t));
        }
    }

    #[test]
    fn gates_match_dense_matrices(seed in any::<u64>(), n in 1usize..=4, q in 0usize..4, theta in -7.0f64..7.0) {
        let q = q % n;
        let s = haar(n, seed);
        let ry = s.clone().apply_ry(q, theta).unwrap();
        prop_assert!(max_diff(ry.amplitudes(), &apply(&single(n, q, ry_matrix(theta)), s.amplitudes())) < 1e-12);
        let rz = s.clone().apply_rz(q, theta).unwrap();
        prop_assert!(max_diff(rz.amplitudes(), &apply(&single(n, q, rz_matrix(theta)), s.amplitudes())) < 1e-12);
        if n > 1 {
            let b = (q + 1) % n;
            let czs = s.clone().apply_cz(q, b).unwrap();
            prop_assert!(max_diff(czs.amplitudes(), &apply(&cz(n, q, b), s.amplitudes())) < 1e-12);
        }
    }
}

#[test]
fn rz_commutes_with_cz_on_shared_qubit() {
    for i in 0..100u64 {
        let s = haar(3, 1000 + i);
        let theta = 0.37 * i as f64 - 5.0;
        for (a, b) in [(0, 1), (2, 0)] {
            for q in [a, b] {
                let rz_first = s.clone().apply_rz(q, theta).unwrap().apply_cz(a, b).unwrap();
                let cz_first = s.clone().apply_cz(a, b).unwrap().apply_rz(q, theta).unwrap();
                assert!(state_diff(&rz_first, &cz_first) < 1e-12);
            }
        }
    }
}

#[test]
fn haar_mean_fidelity_is_two_to_minus_n() {
    // Density (2^N - 1)(1 - F)^(2^N - 2) has mean 1/2^N and variance
    // (2^N - 1) / (2^2N (2^N + 1)).
    let n = 3;
    let k = 5000;
    let mut rng = rng_from_seed(2024);
    let fids: Vec<f64> = (0..k)
        .map(|_| {
            let a = State::haar_random(n, &mut rng).unwrap();
            let b = State::haar_random(n, &mut rng).unwrap();
            fidelity(&a, &b).unwrap()
        })
        .collect();
    let mean = fids.iter().sum::<f64>() / k as f64;
    let d: f64 = 8.0;
    let sd = ((d - 1.0) / (d * d * (d + 1.0))).sqrt();
    let se = sd / (k as f64).sqrt();
    assert!((mean - 0.125).abs() < 3.0 * se, "mean {mean}, se {se}");
}
