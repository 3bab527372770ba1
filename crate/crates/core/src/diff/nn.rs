//! Parameter generators: a three-layer tanh MLP and a three-layer tanh 1-D CNN.
//!
//! Both take a trainable input vector `alpha` of length 4. The conv network
//! views it as one channel of length 4; kernel 3, stride 1 and padding 1 keep
//! the length at 4 through every layer. Its output is flattened channel-major
//! (`[channel][position]`) and truncated to the circuit parameter count.

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::adjoint::circuit_cost_grad;
use super::GradientBundle;
use crate::circuit::{evaluate_slice, CircuitStructure};
use crate::error::{Error, Result};
use crate::qstate::{cost, State};

/// Length of the generator input `alpha`.
pub const NN_INPUT_LEN: usize = 4;
const KERNEL: usize = 3;
const SEQ_LEN: usize = NN_INPUT_LEN;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NnKind {
    Dense,
    Conv,
}

/// Shape of a generator network emitting `n_outputs` circuit angles.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NnArchitecture {
    pub kind: NnKind,
    pub n_outputs: usize,
    /// Multiplies the final tanh output. 1.0 uses the network output as-is.
    pub output_scale: f64,
}

impl NnArchitecture {
    pub fn new(kind: NnKind, n_outputs: usize) -> Self {
        Self { kind, n_outputs, output_scale: 1.0 }
    }

    pub fn for_circuit(kind: NnKind, c: &CircuitStructure) -> Self {
        Self::new(kind, c.param_count())
    }

    /// `(inputs, outputs)` per layer: features for dense, channels for conv.
    pub fn layer_dims(&self) -> [(usize, usize); 3] {
        match self.kind {
            NnKind::Dense => [(NN_INPUT_LEN, 10), (10, 20), (20, self.n_outputs)],
            NnKind::Conv => [(1, 10), (10, 20), (20, self.n_outputs / 4 + 1)],
        }
    }

    fn weight_len(&self, (i, o): (usize, usize)) -> usize {
        match self.kind {
            NnKind::Dense => i * o,
            NnKind::Conv => i * o * KERNEL,
        }
    }

    fn fan_in(&self, (i, _): (usize, usize)) -> usize {
        match self.kind {
            NnKind::Dense => i,
            NnKind::Conv => i * KERNEL,
        }
    }

    /// Length of the final activation before truncation.
    pub fn raw_output_len(&self) -> usize {
        match self.kind {
            NnKind::Dense => self.n_outputs,
            NnKind::Conv => (self.n_outputs / 4 + 1) * SEQ_LEN,
        }
    }

    /// Number of trainable scalars including `alpha`.
    pub fn param_count(&self) -> usize {
        NN_INPUT_LEN
            + self
                .layer_dims()
                .iter()
                .map(|&d| self.weight_len(d) + d.1)
                .sum::<usize>()
    }
}

/// Weights and bias of one layer.
///
/// Dense weights are `[out][in]`; conv kernels are `[out][in][k]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NnLayer {
    pub weight: Vec<f64>,
    pub bias: Vec<f64>,
}

/// All trainable tensors of a generator plus its input `alpha`.
///
/// Flattened order: `alpha`, then per layer in forward order its weights
/// followed by its bias.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NnWeights {
    pub alpha: Vec<f64>,
    pub layers: Vec<NnLayer>,
}

impl NnWeights {
    pub fn zeros(arch: &NnArchitecture) -> Self {
        let layers = arch
            .layer_dims()
            .iter()
            .map(|&d| NnLayer { weight: vec![0.0; arch.weight_len(d)], bias: vec![0.0; d.1] })
            .collect();
        Self { alpha: vec![0.0; NN_INPUT_LEN], layers }
    }

    /// `alpha ~ U[0, 2pi)`, weights `~ U(-1/sqrt(fan_in), 1/sqrt(fan_in))`, zero biases.
    pub fn init<R: Rng + ?Sized>(arch: &NnArchitecture, rng: &mut R) -> Self {
        let mut w = Self::zeros(arch);
        for a in &mut w.alpha {
            *a = rng.gen_range(0.0..std::f64::consts::TAU);
        }
        for (layer, d) in w.layers.iter_mut().zip(arch.layer_dims()) {
            let bound = 1.0 / (arch.fan_in(d) as f64).sqrt();
            for x in &mut layer.weight {
                *x = rng.gen_range(-bound..bound);
            }
        }
        w
    }

    pub fn flatten(&self) -> Vec<f64> {
        let mut out = self.alpha.clone();
        for l in &self.layers {
            out.extend_from_slice(&l.weight);
            out.extend_from_slice(&l.bias);
        }
        out
    }

    pub fn unflatten(arch: &NnArchitecture, flat: &[f64]) -> Result<Self> {
        if flat.len() != arch.param_count() {
            return Err(Error::Dimension { expected: arch.param_count(), got: flat.len() });
        }
        let mut w = Self::zeros(arch);
        let mut rest = flat;
        let mut take = |dst: &mut Vec<f64>| {
            let (head, tail) = rest.split_at(dst.len());
            dst.copy_from_slice(head);
            rest = tail;
        };
        take(&mut w.alpha);
        for l in &mut w.layers {
            take(&mut l.weight);
            take(&mut l.bias);
        }
        Ok(w)
    }

    fn check(&self, arch: &NnArchitecture) -> Result<()> {
        let zeros = Self::zeros(arch);
        let shapes_match = self.alpha.len() == NN_INPUT_LEN
            && self.layers.len() == zeros.layers.len()
            && self
                .layers
                .iter()
                .zip(&zeros.layers)
                .all(|(a, b)| a.weight.len() == b.weight.len() && a.bias.len() == b.bias.len());
        if shapes_match {
            Ok(())
        } else {
            Err(Error::Dimension { expected: arch.param_count(), got: self.flatten().len() })
        }
    }
}

/// Forward record needed by [`nn_backward`]. Consumed by it.
#[derive(Debug, Clone)]
pub struct NnTape {
    arch: NnArchitecture,
    weights: NnWeights,
    // activations[0] = alpha, activations[i + 1] = tanh output of layer i
    activations: Vec<Vec<f64>>,
}

fn dense_forward(x: &[f64], layer: &NnLayer, n_in: usize, n_out: usize) -> Vec<f64> {
    (0..n_out)
        .map(|o| {
            let row = &layer.weight[o * n_in..(o + 1) * n_in];
            layer.bias[o] + row.iter().zip(x).map(|(w, v)| w * v).sum::<f64>()
        })
        .collect()
}

// x is [in][SEQ_LEN], output [out][SEQ_LEN]
fn conv_forward(x: &[f64], layer: &NnLayer, c_in: usize, c_out: usize) -> Vec<f64> {
    let mut out = vec![0.0; c_out * SEQ_LEN];
    for o in 0..c_out {
        for t in 0..SEQ_LEN {
            let mut acc = layer.bias[o];
            for i in 0..c_in {
                for k in 0..KERNEL {
                    // padding 1: input position t + k - 1
                    if let Some(s) = (t + k).checked_sub(1).filter(|&s| s < SEQ_LEN) {
                        acc += layer.weight[(o * c_in + i) * KERNEL + k] * x[i * SEQ_LEN + s];
                    }
                }
            }
            out[o * SEQ_LEN + t] = acc;
        }
    }
    out
}

/// Runs the generator and returns the circuit angles plus a tape for backprop.
pub fn nn_forward(arch: &NnArchitecture, w: &NnWeights) -> Result<(Vec<f64>, NnTape)> {
    w.check(arch)?;
    let mut activations = Vec::with_capacity(4);
    activations.push(w.alpha.clone());
    for (layer, d) in w.layers.iter().zip(arch.layer_dims()) {
        let x = activations.last().expect("input pushed");
        let mut z = match arch.kind {
            NnKind::Dense => dense_forward(x, layer, d.0, d.1),
            NnKind::Conv => conv_forward(x, layer, d.0, d.1),
        };
        z.iter_mut().for_each(|v| *v = v.tanh());
        activations.push(z);
    }
    let out = activations.last().expect("three layers");
    let theta: Vec<f64> = out[..arch.n_outputs].iter().map(|v| v * arch.output_scale).collect();
    if theta.iter().any(|t| !t.is_finite()) {
        return Err(Error::NonFinite("generator output"));
    }
    Ok((theta, NnTape { arch: *arch, weights: w.clone(), activations }))
}

/// Backpropagates `d_theta` (gradient with respect to the emitted angles)
/// through the generator. The result has the shape of [`NnWeights`], with the
/// input gradient stored in `alpha`.
pub fn nn_backward(tape: NnTape, d_theta: &[f64]) -> Result<NnWeights> {
    let arch = tape.arch;
    if d_theta.len() != arch.n_outputs {
        return Err(Error::Dimension { expected: arch.n_outputs, got: d_theta.len() });
    }
    // Conv outputs beyond n_outputs are discarded and receive zero gradient.
    let mut upstream = vec![0.0; arch.raw_output_len()];
    for (u, d) in upstream.iter_mut().zip(d_theta) {
        *u = d * arch.output_scale;
    }
    let mut grads = NnWeights::zeros(&arch);
    let dims = arch.layer_dims();
    for li in (0..3).rev() {
        let (n_in, n_out) = dims[li];
        let y = &tape.activations[li + 1];
        let x = &tape.activations[li];
        let dz: Vec<f64> = upstream.iter().zip(y).map(|(g, y)| g * (1.0 - y * y)).collect();
        let layer = &tape.weights.layers[li];
        let g = &mut grads.layers[li];
        let mut dx = vec![0.0; x.len()];
        match arch.kind {
            NnKind::Dense => {
                for o in 0..n_out {
                    g.bias[o] = dz[o];
                    for j in 0..n_in {
                        g.weight[o * n_in + j] = dz[o] * x[j];
                        dx[j] += layer.weight[o * n_in + j] * dz[o];
                    }
                }
            }
            NnKind::Conv => {
                for o in 0..n_out {
                    g.bias[o] = dz[o * SEQ_LEN..(o + 1) * SEQ_LEN].iter().sum();
                    for i in 0..n_in {
                        for k in 0..KERNEL {
                            let wi = (o * n_in + i) * KERNEL + k;
                            for t in 0..SEQ_LEN {
                                if let Some(s) = (t + k).checked_sub(1).filter(|&s| s < SEQ_LEN) {
                                    let up = dz[o * SEQ_LEN + t];
                                    g.weight[wi] += up * x[i * SEQ_LEN + s];
                                    dx[i * SEQ_LEN + s] += layer.weight[wi] * up;
                                }
                            }
                        }
                    }
                }
            }
        }
        upstream = dx;
    }
    grads.alpha = upstream;
    Ok(grads)
}

fn check_arch(c: &CircuitStructure, arch: &NnArchitecture) -> Result<()> {
    if arch.n_outputs != c.param_count() {
        return Err(Error::Dimension { expected: c.param_count(), got: arch.n_outputs });
    }
    Ok(())
}

/// Cost of the circuit parameterized by the generator output.
pub fn composed_cost(c: &CircuitStructure, arch: &NnArchitecture, w: &NnWeights, input: &State) -> Result<f64> {
    check_arch(c, arch)?;
    let (theta, _) = nn_forward(arch, w)?;
    Ok(cost(&evaluate_slice(c, &theta, input)?))
}

/// Cost and gradients with respect to the generator weights and input.
pub fn composed_grad(
    c: &CircuitStructure,
    arch: &NnArchitecture,
    w: &NnWeights,
    input: &State,
) -> Result<GradientBundle> {
    check_arch(c, arch)?;
    let (theta, tape) = nn_forward(arch, w)?;
    let (loss, d_theta) = circuit_cost_grad(c, &theta, input)?;
    let d_weights = nn_backward(tape, &d_theta)?;
    let bundle = GradientBundle { cost: loss, d_circuit_params: d_theta, d_weights: Some(d_weights) };
    if !bundle.is_finite() {
        return Err(Error::NonFinite("generator gradient"));
    }
    Ok(bundle)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn random_weights(arch: &NnArchitecture, seed: u64) -> NnWeights {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut w = NnWeights::init(arch, &mut rng);
        // nonzero biases so their gradients are exercised
        for l in &mut w.layers {
            for b in &mut l.bias {
                *b = rng.gen_range(-0.3..0.3);
            }
        }
        w
    }

    #[test]
    fn conv_shapes_for_three_qubits() {
        let arch = NnArchitecture::new(NnKind::Conv, 49);
        assert_eq!(arch.layer_dims()[2], (20, 13));
        assert_eq!(arch.raw_output_len(), 52);
        let (theta, _) = nn_forward(&arch, &random_weights(&arch, 0)).unwrap();
        assert_eq!(theta.len(), 49);
    }

    #[test]
    fn conv_output_covers_parameters() {
        for n in 1..500 {
            let arch = NnArchitecture::new(NnKind::Conv, n);
            assert!(arch.raw_output_len() >= n);
        }
    }

    #[test]
    fn zero_weights_give_zero_angles() {
        for kind in [NnKind::Dense, NnKind::Conv] {
            let arch = NnArchitecture::new(kind, 49);
            let mut w = NnWeights::zeros(&arch);
            w.alpha = vec![1.0, 2.0, 3.0, 4.0];
            let (theta, _) = nn_forward(&arch, &w).unwrap();
            assert!(theta.iter().all(|&t| t == 0.0));
        }
    }

    #[test]
    fn angles_bounded_by_tanh() {
        for kind in [NnKind::Dense, NnKind::Conv] {
            let arch = NnArchitecture::new(kind, 61);
            for seed in 0..20 {
                let (theta, _) = nn_forward(&arch, &random_weights(&arch, seed)).unwrap();
                assert!(theta.iter().all(|t| t.abs() < 1.0));
            }
        }
    }

    #[test]
    fn zero_upstream_zero_gradient() {
        for kind in [NnKind::Dense, NnKind::Conv] {
            let arch = NnArchitecture::new(kind, 30);
            let (_, tape) = nn_forward(&arch, &random_weights(&arch, 1)).unwrap();
            let g = nn_backward(tape, &[0.0; 30]).unwrap();
            assert!(g.flatten().iter().all(|&x| x == 0.0));
        }
    }

    #[test]
    fn flatten_round_trip() {
        let arch = NnArchitecture::new(NnKind::Conv, 49);
        let w = random_weights(&arch, 2);
        let flat = w.flatten();
        assert_eq!(flat.len(), arch.param_count());
        assert_eq!(&flat[..4], &w.alpha[..]);
        assert_eq!(NnWeights::unflatten(&arch, &flat).unwrap(), w);
        assert!(NnWeights::unflatten(&arch, &flat[1..]).is_err());
    }

    #[test]
    fn param_counts() {
        // dense: 4 + (40 + 10) + (200 + 20) + (20 * 49 + 49)
        assert_eq!(NnArchitecture::new(NnKind::Dense, 49).param_count(), 4 + 50 + 220 + 1029);
        // conv: 4 + (30 + 10) + (600 + 20) + (20 * 13 * 3 + 13)
        assert_eq!(NnArchitecture::new(NnKind::Conv, 49).param_count(), 4 + 40 + 620 + 793);
    }

    #[test]
    fn mismatches_rejected() {
        let arch = NnArchitecture::new(NnKind::Dense, 10);
        let other = NnWeights::zeros(&NnArchitecture::new(NnKind::Dense, 11));
        assert!(nn_forward(&arch, &other).is_err());
        let (_, tape) = nn_forward(&arch, &NnWeights::zeros(&arch)).unwrap();
        assert!(nn_backward(tape, &[0.0; 9]).is_err());
        let c = CircuitStructure::new(2, vec![(0, 1)]).unwrap();
        let wide = NnArchitecture::new(NnKind::Dense, 11);
        assert!(composed_grad(&c, &wide, &NnWeights::zeros(&wide), &State::zero(2).unwrap()).is_err());
    }

    #[test]
    fn zero_weights_on_zero_state_cost_nothing() {
        let c = CircuitStructure::random(3, 10, &mut ChaCha8Rng::seed_from_u64(4)).unwrap();
        for kind in [NnKind::Dense, NnKind::Conv] {
            let arch = NnArchitecture::for_circuit(kind, &c);
            let mut w = NnWeights::zeros(&arch);
            w.alpha = vec![0.5; 4];
            let b = composed_grad(&c, &arch, &w, &State::zero(3).unwrap()).unwrap();
            assert_eq!(b.cost, 0.0);
        }
    }
}
