//! Expressibility estimation and loss-landscape slices.

use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::circuit::{evaluate_slice, CircuitStructure};
use crate::diff::{nn_forward, NnArchitecture, NnWeights, NN_INPUT_LEN};
use crate::error::{Error, Result};
use crate::qstate::{cost, fidelity, State};
use crate::seed::{derived_rng, SeededRng};
use crate::train::{ModelKind, RunRecord};

pub const DEFAULT_BINS: usize = 75;
pub const DEFAULT_PAIRS: usize = 5000;

/// Probability that the fidelity of two Haar-random `n`-qubit states falls in
/// `[lo, hi]`: the integral of `(2^n - 1)(1 - F)^(2^n - 2)`, which is
/// `(1 - lo)^(2^n - 1) - (1 - hi)^(2^n - 1)`.
pub fn haar_bin_prob(lo: f64, hi: f64, n: usize) -> Result<f64> {
    if !(0.0 <= lo && lo < hi && hi <= 1.0) {
        return Err(Error::InvalidArgument(format!("invalid fidelity interval [{lo}, {hi}]")));
    }
    if !(1..=crate::qstate::MAX_QUBITS).contains(&n) {
        return Err(Error::QubitCount(n));
    }
    let d = ((1u32 << n) - 1) as i32;
    Ok(((1.0 - lo).powi(d) - (1.0 - hi).powi(d)).max(0.0))
}

/// Histogram of fidelities on uniform bins over `[0, 1]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FidelityHistogram {
    pub counts: Vec<u64>,
    pub total: u64,
}

impl FidelityHistogram {
    pub fn new(n_bins: usize) -> Self {
        Self { counts: vec![0; n_bins], total: 0 }
    }

    pub fn from_values(n_bins: usize, values: &[f64]) -> Self {
        let mut h = Self::new(n_bins);
        values.iter().for_each(|&f| h.push(f));
        h
    }

    pub fn n_bins(&self) -> usize {
        self.counts.len()
    }

    pub fn edges(&self, bin: usize) -> (f64, f64) {
        let n = self.n_bins() as f64;
        (bin as f64 / n, (bin + 1) as f64 / n)
    }

    pub fn push(&mut self, f: f64) {
        let n = self.n_bins();
        let bin = ((f.clamp(0.0, 1.0) * n as f64) as usize).min(n - 1);
        self.counts[bin] += 1;
        self.total += 1;
    }

    pub fn p_emp(&self, bin: usize) -> f64 {
        self.counts[bin] as f64 / self.total as f64
    }
}

/// One CSV row of an exported histogram.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HistogramRow {
    pub bin_lo: f64,
    pub bin_hi: f64,
    pub count: u64,
    pub p_emp: f64,
    pub p_haar: f64,
}

/// Result of [`estimate_expressibility`]. `value` is `+inf` when sampled
/// fidelities land where the Haar probability underflows to zero.
#[derive(Debug, Clone, PartialEq)]
pub struct Expressibility {
    pub n_qubits: usize,
    pub value: f64,
    pub histogram: FidelityHistogram,
}

impl Expressibility {
    pub fn rows(&self) -> Vec<HistogramRow> {
        let h = &self.histogram;
        (0..h.n_bins())
            .map(|b| {
                let (lo, hi) = h.edges(b);
                HistogramRow {
                    bin_lo: lo,
                    bin_hi: hi,
                    count: h.counts[b],
                    p_emp: h.p_emp(b),
                    p_haar: haar_bin_prob(lo, hi, self.n_qubits).expect("bins lie inside [0, 1]"),
                }
            })
            .collect()
    }

    /// `"Inf"` for infinite divergence, otherwise the shortest round-trip decimal.
    pub fn display_value(&self) -> String {
        if self.value.is_infinite() {
            "Inf".to_string()
        } else {
            format!("{}", self.value)
        }
    }
}

/// `sum_b p(b) ln(p(b) / p_haar(b))` with `0 ln 0 = 0`.
pub fn kl_to_haar(h: &FidelityHistogram, n_qubits: usize) -> Result<f64> {
    if h.total == 0 {
        return Err(Error::InvalidArgument("empty histogram".into()));
    }
    let mut kl = 0.0;
    for b in 0..h.n_bins() {
        if h.counts[b] == 0 {
            continue;
        }
        let (lo, hi) = h.edges(b);
        let q = haar_bin_prob(lo, hi, n_qubits)?;
        let p = h.p_emp(b);
        if q == 0.0 {
            return Ok(f64::INFINITY);
        }
        kl += p * (p / q).ln();
    }
    Ok(kl.max(0.0))
}

/// Source of independent random states.
pub trait StateSampler: Sync {
    fn n_qubits(&self) -> usize;
    fn sample(&self, rng: &mut SeededRng) -> Result<State>;
}

/// Haar-random states.
#[derive(Debug, Clone)]
pub struct HaarSampler {
    pub n_qubits: usize,
}

impl StateSampler for HaarSampler {
    fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    fn sample(&self, rng: &mut SeededRng) -> Result<State> {
        State::haar_random(self.n_qubits, rng)
    }
}

/// Circuit output on `|0...0>` with angles uniform on `[0, 2pi)`.
#[derive(Debug, Clone)]
pub struct SqcSampler {
    pub structure: CircuitStructure,
}

impl StateSampler for SqcSampler {
    fn n_qubits(&self) -> usize {
        self.structure.n_qubits()
    }

    fn sample(&self, rng: &mut SeededRng) -> Result<State> {
        let theta: Vec<f64> = (0..self.structure.param_count())
            .map(|_| rng.gen_range(0.0..std::f64::consts::TAU))
            .collect();
        evaluate_slice(&self.structure, &theta, &State::zero(self.n_qubits())?)
    }
}

/// Circuit output on `|0...0>` with angles emitted by a trained generator fed
/// a fresh input `alpha` uniform on `[0, 2pi)^4`.
#[derive(Debug, Clone)]
pub struct NeqcSampler {
    pub structure: CircuitStructure,
    pub arch: NnArchitecture,
    pub weights: NnWeights,
}

impl NeqcSampler {
    pub fn new(structure: CircuitStructure, arch: NnArchitecture, weights: NnWeights) -> Result<Self> {
        if arch.n_outputs != structure.param_count() {
            return Err(Error::Dimension { expected: structure.param_count(), got: arch.n_outputs });
        }
        nn_forward(&arch, &weights)?;
        Ok(Self { structure, arch, weights })
    }

    /// Angles for a given generator input.
    pub fn angles(&self, alpha: &[f64]) -> Result<Vec<f64>> {
        let w = NnWeights { alpha: alpha.to_vec(), ..self.weights.clone() };
        Ok(nn_forward(&self.arch, &w)?.0)
    }
}

impl StateSampler for NeqcSampler {
    fn n_qubits(&self) -> usize {
        self.structure.n_qubits()
    }

    fn sample(&self, rng: &mut SeededRng) -> Result<State> {
        let alpha: Vec<f64> = (0..NN_INPUT_LEN)
            .map(|_| rng.gen_range(0.0..std::f64::consts::TAU))
            .collect();
        let theta = self.angles(&alpha)?;
        evaluate_slice(&self.structure, &theta, &State::zero(self.n_qubits())?)
    }
}

/// Sampler matching a trained run: SQC records sample random angles, NEQC
/// records sample through their trained generator.
pub fn sampler_for_record(rec: &RunRecord) -> Result<Box<dyn StateSampler>> {
    match rec.architecture() {
        None => Ok(Box::new(SqcSampler { structure: rec.structure.clone() })),
        Some(arch) => {
            let w = NnWeights::unflatten(&arch, &rec.final_parameters)?;
            Ok(Box::new(NeqcSampler::new(rec.structure.clone(), arch, w)?))
        }
    }
}

/// KL divergence between the sampler's pairwise fidelity histogram and the
/// Haar fidelity distribution.
///
/// Pair `i` draws both of its states from a stream seeded by
/// `(seed, "pair", i)`, so results do not depend on thread scheduling.
pub fn estimate_expressibility(
    sampler: &dyn StateSampler,
    k: usize,
    n_bins: usize,
    seed: u64,
) -> Result<Expressibility> {
    if k == 0 {
        return Err(Error::InvalidArgument("need at least one state pair".into()));
    }
    if n_bins == 0 {
        return Err(Error::InvalidArgument("need at least one bin".into()));
    }
    let n = sampler.n_qubits();
    let fids = (0..k)
        .into_par_iter()
        .map(|i| {
            let mut rng = derived_rng(seed, "pair", i as u64);
            let a = sampler.sample(&mut rng)?;
            let b = sampler.sample(&mut rng)?;
            if a.n_qubits() != n || b.n_qubits() != n {
                return Err(Error::Dimension { expected: n, got: a.n_qubits().max(b.n_qubits()) });
            }
            fidelity(&a, &b)
        })
        .collect::<Result<Vec<f64>>>()?;
    let histogram = FidelityHistogram::from_values(n_bins, &fids);
    let value = kl_to_haar(&histogram, n)?;
    Ok(Expressibility { n_qubits: n, value, histogram })
}

/// Optimized parameters of a trained model with everything needed to
/// re-evaluate its loss at perturbed parameters.
#[derive(Debug, Clone)]
pub struct ModelSnapshot {
    pub model: ModelKind,
    pub structure: CircuitStructure,
    pub input: State,
    pub arch: Option<NnArchitecture>,
    /// SQC: circuit angles. NEQC: `alpha` followed by the generator weights.
    pub params: Vec<f64>,
}

impl ModelSnapshot {
    pub fn from_record(rec: &RunRecord) -> Result<Self> {
        let snap = Self {
            model: rec.model(),
            structure: rec.structure.clone(),
            input: rec.input_state.clone(),
            arch: rec.architecture(),
            params: rec.final_parameters.clone(),
        };
        let expected = snap.arch.map_or(snap.structure.param_count(), |a| a.param_count());
        if snap.params.len() != expected {
            return Err(Error::Dimension { expected, got: snap.params.len() });
        }
        Ok(snap)
    }

    /// Loss at a flattened parameter vector of the snapshot's layout.
    pub fn loss_at(&self, params: &[f64]) -> Result<f64> {
        let theta = match &self.arch {
            None => std::borrow::Cow::Borrowed(params),
            Some(arch) => {
                let w = NnWeights::unflatten(arch, params)?;
                std::borrow::Cow::Owned(nn_forward(arch, &w)?.0)
            }
        };
        Ok(cost(&evaluate_slice(&self.structure, &theta, &self.input)?))
    }
}

/// Settings of a landscape slice.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LandscapeOptions {
    pub resolution: usize,
    /// Axes cover `[-extent, extent]`.
    pub extent: f64,
    pub seed: u64,
}

impl Default for LandscapeOptions {
    fn default() -> Self {
        Self { resolution: 200, extent: 0.5, seed: 0 }
    }
}

/// Loss over `P0 + x d1 + y d2`.
///
/// `losses[i][j]` is the loss at `y = coords[i]`, `x = coords[j]`.
#[derive(Debug, Clone, PartialEq)]
pub struct LandscapeGrid {
    pub options: LandscapeOptions,
    pub coords: Vec<f64>,
    pub losses: Vec<Vec<f64>>,
    pub center_loss: f64,
}

impl LandscapeGrid {
    /// Row and column of the `(0, 0)` point.
    pub fn center_index(&self) -> usize {
        self.options.resolution / 2
    }
}

/// Grid coordinates: `(j - res/2) * 2 extent / res` for `j in 0..res`, so the
/// point `res/2` is exactly zero and the axis spans `[-extent, extent)`.
pub fn landscape_coords(resolution: usize, extent: f64) -> Vec<f64> {
    let step = 2.0 * extent / resolution as f64;
    let mid = (resolution / 2) as f64;
    (0..resolution).map(|j| (j as f64 - mid) * step).collect()
}

/// Two random directions, each standard normal, normalized to unit length and
/// then scaled to the norm of the snapshot parameters.
pub fn landscape_directions(params: &[f64], seed: u64) -> Result<(Vec<f64>, Vec<f64>)> {
    let norm = params.iter().map(|p| p * p).sum::<f64>().sqrt();
    if norm == 0.0 || !norm.is_finite() {
        return Err(Error::InvalidArgument("parameter vector has zero or non-finite norm".into()));
    }
    let draw = |tag: &str| {
        let mut rng = derived_rng(seed, tag, 0);
        let d: Vec<f64> = (0..params.len()).map(|_| rng.sample(StandardNormal)).collect();
        let dn = d.iter().map(|x| x * x).sum::<f64>().sqrt();
        d.into_iter().map(|x| x / dn * norm).collect::<Vec<f64>>()
    };
    Ok((draw("direction-1"), draw("direction-2")))
}

pub fn landscape(snapshot: &ModelSnapshot, options: LandscapeOptions) -> Result<LandscapeGrid> {
    if options.resolution == 0 {
        return Err(Error::InvalidArgument("resolution must be at least 1".into()));
    }
    if !(options.extent > 0.0 && options.extent.is_finite()) {
        return Err(Error::InvalidArgument("extent must be positive".into()));
    }
    let (d1, d2) = landscape_directions(&snapshot.params, options.seed)?;
    let coords = landscape_coords(options.resolution, options.extent);
    let losses = coords
        .par_iter()
        .map(|&y| {
            let mut p = vec![0.0; snapshot.params.len()];
            coords
                .iter()
                .map(|&x| {
                    for (((pi, p0), a), b) in p.iter_mut().zip(&snapshot.params).zip(&d1).zip(&d2) {
                        *pi = p0 + x * a + y * b;
                    }
                    snapshot.loss_at(&p)
                })
                .collect::<Result<Vec<f64>>>()
        })
        .collect::<Result<Vec<_>>>()?;
    let c = options.resolution / 2;
    let center_loss = losses[c][c];
    Ok(LandscapeGrid { options, coords, losses, center_loss })
}
