mod common;

use common::*;
use neqc_core::diff::{
    circuit_cost, circuit_cost_grad, composed_cost, composed_grad, nn_backward, nn_forward,
    parameter_shift_grad, NnArchitecture, NnKind, NnWeights,
};
use neqc_core::seed::rng_from_seed;
use neqc_core::{CircuitStructure, State};
use proptest::prelude::*;
use rand::Rng;

const H: f64 = 1e-4;

fn setup(n: usize, blocks: usize, seed: u64) -> (CircuitStructure, Vec<f64>, State) {
    let mut rng = rng_from_seed(seed);
    let c = CircuitStructure::random(n, blocks, &mut rng).unwrap();
    let p = (0..c.param_count()).map(|_| rng.gen_range(0.0..std::f64::consts::TAU)).collect();
    let s = State::haar_random(n, &mut rng).unwrap();
    (c, p, s)
}

fn weights(arch: &NnArchitecture, seed: u64) -> NnWeights {
    let mut rng = rng_from_seed(seed);
    let mut w = NnWeights::init(arch, &mut rng);
    for l in &mut w.layers {
        for b in &mut l.bias {
            *b = rng.gen_range(-0.5..0.5);
        }
    }
    w
}

#[test]
fn adjoint_matches_finite_differences() {
    for seed in 0..5 {
        let (c, p, s) = setup(3, 10, seed);
        let (loss, grad) = circuit_cost_grad(&c, &p, &s).unwrap();
        assert_eq!(loss, circuit_cost(&c, &p, &s).unwrap());
        let fd = central_fd(|x| circuit_cost(&c, x, &s).unwrap(), &p, H);
        check_close(&grad, &fd, 1e-4, 1e-7).unwrap();
    }
}

#[test]
fn adjoint_matches_parameter_shift_up_to_four_qubits() {
    for n in 2..=4 {
        let (c, p, s) = setup(n, 3 * n, 40 + n as u64);
        let (_, grad) = circuit_cost_grad(&c, &p, &s).unwrap();
        let ps = parameter_shift_grad(&c, &p, &s).unwrap();
        check_close(&grad, &ps, 0.0, 1e-8).unwrap();
    }
}

fn probe_check(kind: NnKind, n_outputs: usize, seed: u64) {
    let arch = NnArchitecture::new(kind, n_outputs);
    let w = weights(&arch, seed);
    let mut rng = rng_from_seed(seed + 100);
    let probe: Vec<f64> = (0..n_outputs).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let (_, tape) = nn_forward(&arch, &w).unwrap();
    let analytic = nn_backward(tape, &probe).unwrap().flatten();
    let scalar = |flat: &[f64]| {
        let w = NnWeights::unflatten(&arch, flat).unwrap();
        let (theta, _) = nn_forward(&arch, &w).unwrap();
        theta.iter().zip(&probe).map(|(t, s)| t * s).sum::<f64>()
    };
    let fd = central_fd(scalar, &w.flatten(), H);
    check_close(&analytic, &fd, 1e-4, 1e-7).unwrap();
}

#[test]
fn dense_backward_matches_finite_differences() {
    probe_check(NnKind::Dense, 49, 1);
    probe_check(NnKind::Dense, 7, 2);
}

#[test]
fn conv_backward_matches_finite_differences() {
    probe_check(NnKind::Conv, 49, 3);
    // 52 outputs: the last conv channel is fully used
    probe_check(NnKind::Conv, 52, 4);
    probe_check(NnKind::Conv, 5, 5);
}

#[test]
fn output_scale_is_differentiated() {
    let arch = NnArchitecture { output_scale: 2.5, ..NnArchitecture::new(NnKind::Dense, 12) };
    let w = weights(&arch, 9);
    let (theta, tape) = nn_forward(&arch, &w).unwrap();
    assert!(theta.iter().all(|t| t.abs() < 2.5));
    let probe = vec![1.0; 12];
    let analytic = nn_backward(tape, &probe).unwrap().flatten();
    let fd = central_fd(
        |flat| nn_forward(&arch, &NnWeights::unflatten(&arch, flat).unwrap()).unwrap().0.iter().sum(),
        &w.flatten(),
        H,
    );
    check_close(&analytic, &fd, 1e-4, 1e-7).unwrap();
}

#[test]
fn composed_gradient_matches_finite_differences() {
    let (c, _, s) = setup(3, 10, 77);
    for kind in [NnKind::Dense, NnKind::Conv] {
        let arch = NnArchitecture::for_circuit(kind, &c);
        let w = weights(&arch, 21);
        let bundle = composed_grad(&c, &arch, &w, &s).unwrap();
        assert_eq!(bundle.cost, composed_cost(&c, &arch, &w, &s).unwrap());
        let analytic = bundle.d_weights.unwrap().flatten();
        let fd = central_fd(
            |flat| composed_cost(&c, &arch, &NnWeights::unflatten(&arch, flat).unwrap(), &s).unwrap(),
            &w.flatten(),
            H,
        );
        check_close(&analytic, &fd, 1e-4, 1e-7).unwrap();
    }
}

#[test]
fn composed_gradient_is_deterministic() {
    let (c, _, s) = setup(3, 10, 8);
    for kind in [NnKind::Dense, NnKind::Conv] {
        let arch = NnArchitecture::for_circuit(kind, &c);
        let w = weights(&arch, 3);
        let a = composed_grad(&c, &arch, &w, &s).unwrap();
        let b = composed_grad(&c, &arch, &w, &s).unwrap();
        assert_eq!(a, b);
        assert_eq!(w, weights(&arch, 3));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn gradients_are_finite(seed in any::<u64>(), n in 2usize..6) {
        let (c, p, s) = setup(n, 2 * n, seed);
        let (loss, g) = circuit_cost_grad(&c, &p, &s).unwrap();
        prop_assert!((0.0..=1.0).contains(&loss));
        prop_assert!(g.iter().all(|x| x.is_finite()));
    }
}
