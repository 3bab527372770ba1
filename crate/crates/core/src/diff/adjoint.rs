use crate::circuit::{check_dims, evaluate_slice, CircuitStructure};
use crate::error::{Error, Result};
use crate::qstate::{cost, cost_observable, State};

/// Cost of running `params` on `input`.
pub fn circuit_cost(c: &CircuitStructure, params: &[f64], input: &State) -> Result<f64> {
    Ok(cost(&evaluate_slice(c, params, input)?))
}

/// Cost and its gradient with respect to every circuit angle.
///
/// One forward pass produces the output state `psi`; the backward pass walks
/// the gates in reverse, keeping `phi = G_k^dag ... G_last^dag psi` (the state
/// just before gate `k`) and `lambda = G_{k+1}^dag ... O psi`. Both rotation
/// gates satisfy `dR(t)/dt = R(t + pi) / 2`, so
/// `dC/dt_k = 2 Re <lambda| dG_k |phi> = Re <lambda| R(t_k + pi) |phi>`.
pub fn circuit_cost_grad(c: &CircuitStructure, params: &[f64], input: &State) -> Result<(f64, Vec<f64>)> {
    check_dims(c, params, input)?;
    let gates = c.gates();
    let mut phi = input.clone();
    for g in &gates {
        g.apply(&mut phi, params);
    }
    let loss = cost(&phi);
    if !loss.is_finite() {
        return Err(Error::NonFinite("circuit cost"));
    }

    let obs = cost_observable(c.n_qubits());
    let mut lambda = phi.clone();
    for (a, o) in lambda.amplitudes_mut().iter_mut().zip(&obs) {
        *a *= *o;
    }

    let mut grad = vec![0.0; params.len()];
    let mut shifted = State::from_raw(c.n_qubits(), vec![Default::default(); phi.dim()]);
    for g in gates.iter().rev() {
        g.apply_inverse(&mut phi, params);
        if let Some(p) = g.param() {
            shifted.amplitudes_mut().copy_from_slice(phi.amplitudes());
            match *g {
                crate::circuit::Gate::Ry { qubit, .. } => {
                    shifted.ry_in_place(qubit, params[p] + std::f64::consts::PI)
                }
                crate::circuit::Gate::Rz { qubit, .. } => {
                    shifted.rz_in_place(qubit, params[p] + std::f64::consts::PI)
                }
                crate::circuit::Gate::Cz { .. } => unreachable!(),
            }
            grad[p] = lambda
                .amplitudes()
                .iter()
                .zip(shifted.amplitudes())
                .map(|(l, s)| (l.conj() * s).re)
                .sum();
        }
        g.apply_inverse(&mut lambda, params);
    }
    if grad.iter().any(|g| !g.is_finite()) {
        return Err(Error::NonFinite("circuit gradient"));
    }
    Ok((loss, grad))
}

/// `[C(t + pi/2) - C(t - pi/2)] / 2` for every angle. Exact for `Ry` / `Rz`,
/// but costs two circuit evaluations per parameter.
pub fn parameter_shift_grad(c: &CircuitStructure, params: &[f64], input: &State) -> Result<Vec<f64>> {
    check_dims(c, params, input)?;
    let shift = std::f64::consts::FRAC_PI_2;
    let mut work = params.to_vec();
    (0..params.len())
        .map(|i| {
            work[i] = params[i] + shift;
            let plus = circuit_cost(c, &work, input)?;
            work[i] = params[i] - shift;
            let minus = circuit_cost(c, &work, input)?;
            work[i] = params[i];
            Ok((plus - minus) / 2.0)
        })
        .collect()
}
