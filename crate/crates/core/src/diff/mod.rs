//! Exact reverse-mode gradients.
//!
//! [`circuit_cost_grad`] differentiates the circuit cost with respect to the
//! circuit angles by the adjoint method; [`nn_forward`] / [`nn_backward`] run
//! and differentiate the parameter generators; [`composed_grad`] chains them.

mod adjoint;
mod nn;

pub use adjoint::{circuit_cost, circuit_cost_grad, parameter_shift_grad};
pub use nn::{
    composed_cost, composed_grad, nn_backward, nn_forward, NnArchitecture, NnKind, NnLayer, NnTape,
    NnWeights, NN_INPUT_LEN,
};

/// Gradient of the cost with respect to circuit angles and, for generator
/// models, with respect to the network weights and input.
#[derive(Debug, Clone, PartialEq)]
pub struct GradientBundle {
    pub cost: f64,
    pub d_circuit_params: Vec<f64>,
    /// Same layout as the model's [`NnWeights`]; `alpha` holds the input gradient.
    pub d_weights: Option<NnWeights>,
}

impl GradientBundle {
    pub fn is_finite(&self) -> bool {
        self.cost.is_finite()
            && self.d_circuit_params.iter().all(|g| g.is_finite())
            && self.d_weights.as_ref().map_or(true, |w| w.flatten().iter().all(|g| g.is_finite()))
    }
}
