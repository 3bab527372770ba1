//! Models, optimizer, stopping rules and the paired multi-run protocol.

use std::fmt;
use std::str::FromStr;
use std::time::Instant;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::circuit::{block_count, CircuitStructure};
use crate::diff::{circuit_cost_grad, composed_grad, NnArchitecture, NnKind, NnWeights};
use crate::error::{Error, Result};
use crate::qstate::State;
use crate::seed::{derive_seed, rng_from_seed};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum ModelKind {
    #[serde(rename = "SQC")]
    Sqc,
    #[serde(rename = "NEQC-NN")]
    NeqcNn,
    #[serde(rename = "NEQC-CNN")]
    NeqcCnn,
}

impl ModelKind {
    pub const ALL: [ModelKind; 3] = [ModelKind::Sqc, ModelKind::NeqcNn, ModelKind::NeqcCnn];

    pub fn as_str(&self) -> &'static str {
        match self {
            ModelKind::Sqc => "SQC",
            ModelKind::NeqcNn => "NEQC-NN",
            ModelKind::NeqcCnn => "NEQC-CNN",
        }
    }

    /// Generator architecture kind, `None` for the direct model.
    pub fn nn_kind(&self) -> Option<NnKind> {
        match self {
            ModelKind::Sqc => None,
            ModelKind::NeqcNn => Some(NnKind::Dense),
            ModelKind::NeqcCnn => Some(NnKind::Conv),
        }
    }

    pub fn architecture(&self, c: &CircuitStructure, output_scale: f64) -> Option<NnArchitecture> {
        self.nn_kind().map(|k| NnArchitecture { output_scale, ..NnArchitecture::for_circuit(k, c) })
    }
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ModelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_uppercase().replace('_', "-").as_str() {
            "SQC" => Ok(ModelKind::Sqc),
            "NEQC-NN" | "NN" => Ok(ModelKind::NeqcNn),
            "NEQC-CNN" | "CNN" => Ok(ModelKind::NeqcCnn),
            other => Err(Error::InvalidArgument(format!("unknown model {other:?}"))),
        }
    }
}

/// Hyperparameters and stopping rules of one training run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub n_qubits: usize,
    pub n_blocks: usize,
    pub model: ModelKind,
    pub learning_rate: f64,
    pub momentum: f64,
    pub loss_target: f64,
    pub plateau_window: usize,
    pub plateau_delta: f64,
    pub max_iterations: usize,
    /// Scale applied to generator outputs before they become circuit angles.
    pub output_scale: f64,
    /// Seed of the parameter initialization.
    pub seed: u64,
}

impl TrainConfig {
    pub fn new(n_qubits: usize, model: ModelKind) -> Result<Self> {
        Ok(Self {
            n_qubits,
            n_blocks: block_count(n_qubits)?,
            model,
            learning_rate: 0.01,
            momentum: 0.9,
            loss_target: 1e-3,
            plateau_window: 100,
            plateau_delta: 1e-4,
            max_iterations: 20_000,
            output_scale: 1.0,
            seed: 0,
        })
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidArgument(m.to_string()));
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return bad("learning_rate must be positive");
        }
        if !(0.0..1.0).contains(&self.momentum) {
            return bad("momentum must lie in [0, 1)");
        }
        if !(self.loss_target > 0.0) {
            return bad("loss_target must be positive");
        }
        if self.plateau_window == 0 {
            return bad("plateau_window must be at least 1");
        }
        if !(self.plateau_delta >= 0.0) {
            return bad("plateau_delta must be non-negative");
        }
        if self.max_iterations == 0 {
            return bad("max_iterations must be at least 1");
        }
        if !(self.output_scale.is_finite() && self.output_scale != 0.0) {
            return bad("output_scale must be finite and nonzero");
        }
        if self.n_blocks == 0 {
            return bad("n_blocks must be at least 1");
        }
        Ok(())
    }
}

/// Classical momentum buffer.
#[derive(Debug, Clone, PartialEq)]
pub struct OptimizerState {
    pub velocity: Vec<f64>,
}

impl OptimizerState {
    pub fn new(len: usize) -> Self {
        Self { velocity: vec![0.0; len] }
    }
}

/// `v <- mu v + g; p <- p - lr v`.
pub fn sgd_momentum_step(
    params: &mut [f64],
    grads: &[f64],
    opt: &mut OptimizerState,
    lr: f64,
    mu: f64,
) -> Result<()> {
    if params.len() != grads.len() || params.len() != opt.velocity.len() {
        return Err(Error::Dimension { expected: params.len(), got: grads.len() });
    }
    if grads.iter().any(|g| !g.is_finite()) {
        return Err(Error::NonFinite("gradient"));
    }
    for ((p, g), v) in params.iter_mut().zip(grads).zip(&mut opt.velocity) {
        *v = mu * *v + g;
        *p -= lr * *v;
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    Target,
    Plateau,
    MaxIter,
    /// Loss or gradient became NaN/inf.
    NonFinite,
    /// Setup failed before training began; see `RunRecord::error`.
    Failed,
}

impl StopReason {
    pub fn as_str(&self) -> &'static str {
        match self {
            StopReason::Target => "target",
            StopReason::Plateau => "plateau",
            StopReason::MaxIter => "max_iter",
            StopReason::NonFinite => "non_finite",
            StopReason::Failed => "failed",
        }
    }
}

/// Everything about one training run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub config: TrainConfig,
    pub run_index: Option<usize>,
    pub structure: CircuitStructure,
    pub input_seed: Option<u64>,
    pub input_state: State,
    pub loss_history: Vec<f64>,
    pub stop_reason: StopReason,
    pub iterations_used: usize,
    /// SQC: circuit angles. NEQC: flattened generator weights, `alpha` first.
    pub final_parameters: Vec<f64>,
    /// Not serialized, so run files stay byte-reproducible.
    #[serde(skip, default)]
    pub wall_time_s: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

impl RunRecord {
    pub fn model(&self) -> ModelKind {
        self.config.model
    }

    pub fn initial_loss(&self) -> Option<f64> {
        self.loss_history.first().copied()
    }

    pub fn final_loss(&self) -> Option<f64> {
        self.loss_history.last().copied()
    }

    pub fn architecture(&self) -> Option<NnArchitecture> {
        self.config.model.architecture(&self.structure, self.config.output_scale)
    }

    /// Trained generator weights, for NEQC records.
    pub fn trained_weights(&self) -> Result<Option<NnWeights>> {
        self.architecture()
            .map(|arch| NnWeights::unflatten(&arch, &self.final_parameters))
            .transpose()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("record serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }
}

/// Draws the initial trainable vector for `cfg.model` from `cfg.seed`.
///
/// SQC angles are uniform on `[0, 2pi)`; generator models use
/// [`NnWeights::init`].
pub fn initial_parameters(cfg: &TrainConfig, structure: &CircuitStructure) -> Vec<f64> {
    let mut rng = rng_from_seed(cfg.seed);
    match cfg.model.architecture(structure, cfg.output_scale) {
        None => (0..structure.param_count())
            .map(|_| rng.gen_range(0.0..std::f64::consts::TAU))
            .collect(),
        Some(arch) => NnWeights::init(&arch, &mut rng).flatten(),
    }
}

/// Trains `cfg.model` from a seeded random initialization.
pub fn train_one(cfg: &TrainConfig, structure: &CircuitStructure, input: &State) -> Result<RunRecord> {
    let init = initial_parameters(cfg, structure);
    train_from(cfg, structure, input, init)
}

/// Trains starting from explicit initial parameters.
///
/// Each iteration evaluates the loss at the current parameters and records it,
/// then checks, in order: the loss target; at every multiple of
/// `plateau_window` iterations, whether the loss moved less than
/// `plateau_delta` since the previous checkpoint (the first checkpoint compares
/// against the initial loss); the iteration cap. Only when none fires is an
/// optimizer step taken, so `final_parameters` always produce the last
/// recorded loss.
pub fn train_from(
    cfg: &TrainConfig,
    structure: &CircuitStructure,
    input: &State,
    init: Vec<f64>,
) -> Result<RunRecord> {
    cfg.validate()?;
    if structure.n_qubits() != cfg.n_qubits || input.n_qubits() != cfg.n_qubits {
        return Err(Error::Dimension { expected: cfg.n_qubits, got: structure.n_qubits() });
    }
    if structure.n_blocks() != cfg.n_blocks {
        return Err(Error::Dimension { expected: cfg.n_blocks, got: structure.n_blocks() });
    }
    let arch = cfg.model.architecture(structure, cfg.output_scale);
    let expected = arch.map_or(structure.param_count(), |a| a.param_count());
    if init.len() != expected {
        return Err(Error::Dimension { expected, got: init.len() });
    }

    let loss_and_grad = |p: &[f64]| -> Result<(f64, Vec<f64>)> {
        match &arch {
            None => circuit_cost_grad(structure, p, input),
            Some(a) => {
                let w = NnWeights::unflatten(a, p)?;
                let b = composed_grad(structure, a, &w, input)?;
                let g = b.d_weights.expect("generator gradient present").flatten();
                Ok((b.cost, g))
            }
        }
    };

    let start = Instant::now();
    let mut params = init;
    let mut opt = OptimizerState::new(params.len());
    let mut history = Vec::new();
    let window = cfg.plateau_window;
    let stop_reason = loop {
        let (loss, grad) = match loss_and_grad(&params) {
            Ok(v) => v,
            Err(Error::NonFinite(_)) => break StopReason::NonFinite,
            Err(e) => return Err(e),
        };
        history.push(loss);
        let t = history.len();
        if loss < cfg.loss_target {
            break StopReason::Target;
        }
        if t % window == 0 {
            let previous = if t > window { history[t - 1 - window] } else { history[0] };
            if (loss - previous).abs() < cfg.plateau_delta {
                break StopReason::Plateau;
            }
        }
        if t >= cfg.max_iterations {
            break StopReason::MaxIter;
        }
        if sgd_momentum_step(&mut params, &grad, &mut opt, cfg.learning_rate, cfg.momentum).is_err() {
            break StopReason::NonFinite;
        }
    };

    Ok(RunRecord {
        config: cfg.clone(),
        run_index: None,
        structure: structure.clone(),
        input_seed: None,
        input_state: input.clone(),
        iterations_used: history.len(),
        loss_history: history,
        stop_reason,
        final_parameters: params,
        wall_time_s: start.elapsed().as_secs_f64(),
        error: None,
    })
}

/// Seeds of one paired run.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RunSeeds {
    pub structure: u64,
    pub input: u64,
}

impl RunSeeds {
    pub fn derive(base_seed: u64, n_qubits: usize, run: usize) -> Self {
        Self {
            structure: derive_seed(base_seed, &format!("structure:{n_qubits}"), run as u64),
            input: derive_seed(base_seed, &format!("input:{n_qubits}"), run as u64),
        }
    }

    pub fn init(base_seed: u64, n_qubits: usize, model: ModelKind, run: usize) -> u64 {
        derive_seed(base_seed, &format!("init:{n_qubits}:{model}"), run as u64)
    }
}

/// Circuit structure and input state of run `run`.
pub fn run_setup(template: &TrainConfig, base_seed: u64, run: usize) -> Result<(CircuitStructure, State, RunSeeds)> {
    let seeds = RunSeeds::derive(base_seed, template.n_qubits, run);
    let structure = CircuitStructure::random(
        template.n_qubits,
        template.n_blocks,
        &mut rng_from_seed(seeds.structure),
    )?;
    let input = State::haar_random(template.n_qubits, &mut rng_from_seed(seeds.input))?;
    Ok((structure, input, seeds))
}

/// Trains every model in `models` on `runs` paired setups.
///
/// Within a run index all models share the circuit structure and input state;
/// each model draws its own initialization. Runs execute in parallel and the
/// result is ordered run-major, then by position in `models`. A failing run is
/// returned as a record with `stop_reason = Failed` instead of aborting the sweep.
pub fn run_experiment(
    template: &TrainConfig,
    models: &[ModelKind],
    runs: usize,
    base_seed: u64,
) -> Result<Vec<RunRecord>> {
    if runs == 0 {
        return Err(Error::InvalidArgument("runs must be at least 1".into()));
    }
    if models.is_empty() {
        return Err(Error::InvalidArgument("no models selected".into()));
    }
    template.validate()?;
    let jobs: Vec<(usize, ModelKind)> =
        (0..runs).flat_map(|r| models.iter().map(move |&m| (r, m))).collect();
    let records = jobs
        .into_par_iter()
        .map(|(run, model)| {
            let cfg = TrainConfig {
                model,
                seed: RunSeeds::init(base_seed, template.n_qubits, model, run),
                ..template.clone()
            };
            let outcome = run_setup(template, base_seed, run).and_then(|(structure, input, seeds)| {
                let mut rec = train_one(&cfg, &structure, &input)?;
                rec.input_seed = Some(seeds.input);
                Ok(rec)
            });
            let mut rec = outcome.unwrap_or_else(|e| failed_record(&cfg, template, base_seed, run, e));
            rec.run_index = Some(run);
            rec
        })
        .collect();
    Ok(records)
}

fn failed_record(cfg: &TrainConfig, template: &TrainConfig, base_seed: u64, run: usize, e: Error) -> RunRecord {
    let seeds = RunSeeds::derive(base_seed, template.n_qubits, run);
    RunRecord {
        config: cfg.clone(),
        run_index: Some(run),
        structure: CircuitStructure::new(template.n_qubits.max(1), vec![])
            .unwrap_or_else(|_| CircuitStructure::new(1, vec![]).expect("one qubit is valid")),
        input_seed: Some(seeds.input),
        input_state: State::zero(template.n_qubits.clamp(1, crate::qstate::MAX_QUBITS))
            .expect("clamped qubit count is valid"),
        loss_history: vec![],
        stop_reason: StopReason::Failed,
        iterations_used: 0,
        final_parameters: vec![],
        wall_time_s: 0.0,
        error: Some(e.to_string()),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn plain_gradient_descent_step() {
        let mut p = vec![1.0];
        let mut opt = OptimizerState::new(1);
        sgd_momentum_step(&mut p, &[1.0], &mut opt, 0.1, 0.0).unwrap();
        assert!((p[0] - 0.9).abs() < 1e-15);
    }

    #[test]
    fn zero_gradient_is_fixed_point() {
        let mut p = vec![0.3, -2.0];
        let mut opt = OptimizerState::new(2);
        for _ in 0..10 {
            sgd_momentum_step(&mut p, &[0.0, 0.0], &mut opt, 0.1, 0.9).unwrap();
        }
        assert_eq!(p, vec![0.3, -2.0]);
    }

    #[test]
    fn momentum_two_steps() {
        let mut p = vec![1.0];
        let mut opt = OptimizerState::new(1);
        sgd_momentum_step(&mut p, &[1.0], &mut opt, 0.1, 0.9).unwrap();
        assert!((opt.velocity[0] - 1.0).abs() < 1e-15);
        assert!((p[0] - 0.9).abs() < 1e-15);
        sgd_momentum_step(&mut p, &[1.0], &mut opt, 0.1, 0.9).unwrap();
        assert!((opt.velocity[0] - 1.9).abs() < 1e-15);
        assert!((p[0] - 0.71).abs() < 1e-14);
    }

    #[test]
    fn nan_gradient_rejected() {
        let mut p = vec![1.0];
        let mut opt = OptimizerState::new(1);
        assert_eq!(
            sgd_momentum_step(&mut p, &[f64::NAN], &mut opt, 0.1, 0.9),
            Err(Error::NonFinite("gradient"))
        );
        assert_eq!(p, vec![1.0]);
        assert!(sgd_momentum_step(&mut p, &[1.0, 2.0], &mut opt, 0.1, 0.9).is_err());
    }

    #[test]
    fn optimal_start_stops_immediately() {
        let cfg = TrainConfig::new(3, ModelKind::Sqc).unwrap();
        let structure = CircuitStructure::random(3, cfg.n_blocks, &mut rng_from_seed(1)).unwrap();
        let input = State::zero(3).unwrap();
        let rec = train_from(&cfg, &structure, &input, vec![0.0; structure.param_count()]).unwrap();
        assert_eq!(rec.iterations_used, 1);
        assert_eq!(rec.loss_history, vec![0.0]);
        assert_eq!(rec.stop_reason, StopReason::Target);
    }

    #[test]
    fn plateau_stop_lands_on_window_multiple() {
        // tiny learning rate: loss barely moves, so the first checkpoint fires
        let cfg = TrainConfig { learning_rate: 1e-9, plateau_window: 7, ..TrainConfig::new(3, ModelKind::Sqc).unwrap() };
        let (structure, input, _) = run_setup(&cfg, 5, 0).unwrap();
        let rec = train_one(&cfg, &structure, &input).unwrap();
        assert_eq!(rec.stop_reason, StopReason::Plateau);
        assert_eq!(rec.iterations_used, 7);
    }

    #[test]
    fn iteration_cap() {
        let cfg = TrainConfig { max_iterations: 5, ..TrainConfig::new(3, ModelKind::NeqcNn).unwrap() };
        let (structure, input, _) = run_setup(&cfg, 5, 0).unwrap();
        let rec = train_one(&cfg, &structure, &input).unwrap();
        assert_eq!(rec.stop_reason, StopReason::MaxIter);
        assert_eq!(rec.iterations_used, 5);
        assert_eq!(rec.loss_history.len(), 5);
    }

    #[test]
    fn config_validation() {
        let ok = TrainConfig::new(3, ModelKind::Sqc).unwrap();
        assert!(ok.validate().is_ok());
        assert!(TrainConfig { learning_rate: 0.0, ..ok.clone() }.validate().is_err());
        assert!(TrainConfig { momentum: 1.0, ..ok.clone() }.validate().is_err());
        assert!(TrainConfig { plateau_window: 0, ..ok.clone() }.validate().is_err());
        assert!(TrainConfig { loss_target: 0.0, ..ok.clone() }.validate().is_err());
        assert!(TrainConfig::new(1, ModelKind::Sqc).is_err());
    }

    #[test]
    fn model_names() {
        for m in ModelKind::ALL {
            assert_eq!(m.as_str().parse::<ModelKind>().unwrap(), m);
        }
        assert_eq!("neqc-cnn".parse::<ModelKind>().unwrap(), ModelKind::NeqcCnn);
        assert!("adam".parse::<ModelKind>().is_err());
    }

    #[test]
    fn run_experiment_counts_and_pairs() {
        let cfg = TrainConfig { max_iterations: 3, ..TrainConfig::new(3, ModelKind::Sqc).unwrap() };
        let recs = run_experiment(&cfg, &ModelKind::ALL, 2, 11).unwrap();
        assert_eq!(recs.len(), 6);
        for r in 0..2 {
            let group: Vec<_> = recs.iter().filter(|x| x.run_index == Some(r)).collect();
            assert_eq!(group.len(), 3);
            for g in &group {
                assert_eq!(g.structure.to_json(), group[0].structure.to_json());
                assert_eq!(g.input_seed, group[0].input_seed);
            }
        }
        assert_ne!(recs[0].structure, recs[3].structure);
        assert!(run_experiment(&cfg, &ModelKind::ALL, 0, 11).is_err());
    }
}
