//! Random-structure ansatz.
//!
//! A circuit on `N` qubits with `L` entangling blocks applies, in time order:
//!
//! 1. on every qubit `q`: `Rz`, `Ry`, `Rz`;
//! 2. for every block `(a, b)`: `CZ(a, b)`, then `Ry`, `Rz` on `a`, then `Ry`, `Rz` on `b`.
//!
//! Parameter layout (length `3N + 4L`): entries `3q..3q+3` are the initial
//! `Rz, Ry, Rz` angles of qubit `q` in application order, followed by four
//! entries per block: `(Ry a, Rz a, Ry b, Rz b)`.
//!
//! This compact form is what remains of the "full" layered form (a general
//! `Rz Ry Rz` on every qubit after every `CZ`) once single-qubit gates that
//! commute with the following `CZ` are pushed back and merged. See
//! [`merge_block_form`].

use num_complex::Complex64;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::qstate::State;

/// `ceil(n^2 ln n)`, the number of entangling blocks for `n` qubits.
pub fn block_count(n: usize) -> Result<usize> {
    if n < 2 {
        return Err(Error::InvalidArgument(format!(
            "block count needs at least 2 qubits, got {n}"
        )));
    }
    let nf = n as f64;
    Ok((nf * nf * nf.ln()).ceil() as usize)
}

/// Qubit count plus the ordered list of entangled pairs.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "RawStructure")]
pub struct CircuitStructure {
    n_qubits: usize,
    entanglers: Vec<(usize, usize)>,
}

#[derive(Deserialize)]
struct RawStructure {
    n_qubits: usize,
    entanglers: Vec<(usize, usize)>,
}

impl TryFrom<RawStructure> for CircuitStructure {
    type Error = Error;

    fn try_from(raw: RawStructure) -> Result<Self> {
        CircuitStructure::new(raw.n_qubits, raw.entanglers)
    }
}

impl CircuitStructure {
    pub fn new(n_qubits: usize, entanglers: Vec<(usize, usize)>) -> Result<Self> {
        if !(1..=crate::qstate::MAX_QUBITS).contains(&n_qubits) {
            return Err(Error::Structure(format!("n_qubits {n_qubits} outside 1..=16")));
        }
        for (l, &(a, b)) in entanglers.iter().enumerate() {
            if a == b {
                return Err(Error::Structure(format!("block {l} pairs qubit {a} with itself")));
            }
            if a >= n_qubits || b >= n_qubits {
                return Err(Error::Structure(format!(
                    "block {l} uses qubit ({a}, {b}) >= n_qubits {n_qubits}"
                )));
            }
        }
        Ok(Self { n_qubits, entanglers })
    }

    /// `blocks` pairs drawn independently and uniformly from ordered distinct pairs.
    pub fn random<R: Rng + ?Sized>(n: usize, blocks: usize, rng: &mut R) -> Result<Self> {
        if n < 2 {
            return Err(Error::InvalidArgument(format!("need at least 2 qubits, got {n}")));
        }
        if blocks == 0 {
            return Err(Error::InvalidArgument("need at least one block".into()));
        }
        let entanglers = (0..blocks)
            .map(|_| {
                let a = rng.gen_range(0..n);
                // uniform over the n-1 qubits different from a
                let mut b = rng.gen_range(0..n - 1);
                if b >= a {
                    b += 1;
                }
                (a, b)
            })
            .collect();
        Self::new(n, entanglers)
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn n_blocks(&self) -> usize {
        self.entanglers.len()
    }

    pub fn entanglers(&self) -> &[(usize, usize)] {
        &self.entanglers
    }

    /// `3N + 4L`.
    pub fn param_count(&self) -> usize {
        3 * self.n_qubits + 4 * self.entanglers.len()
    }

    /// Gate sequence in application order, with parameter indices.
    pub fn gates(&self) -> Vec<Gate> {
        let mut gates = Vec::with_capacity(3 * self.n_qubits + 5 * self.entanglers.len());
        for q in 0..self.n_qubits {
            gates.push(Gate::Rz { qubit: q, param: 3 * q });
            gates.push(Gate::Ry { qubit: q, param: 3 * q + 1 });
            gates.push(Gate::Rz { qubit: q, param: 3 * q + 2 });
        }
        let mut p = 3 * self.n_qubits;
        for &(a, b) in &self.entanglers {
            gates.push(Gate::Cz { a, b });
            gates.push(Gate::Ry { qubit: a, param: p });
            gates.push(Gate::Rz { qubit: a, param: p + 1 });
            gates.push(Gate::Ry { qubit: b, param: p + 2 });
            gates.push(Gate::Rz { qubit: b, param: p + 3 });
            p += 4;
        }
        gates
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("structure serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }
}

/// One gate of the compact ansatz.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Gate {
    Ry { qubit: usize, param: usize },
    Rz { qubit: usize, param: usize },
    Cz { a: usize, b: usize },
}

impl Gate {
    pub fn param(&self) -> Option<usize> {
        match *self {
            Gate::Ry { param, .. } | Gate::Rz { param, .. } => Some(param),
            Gate::Cz { .. } => None,
        }
    }

    pub(crate) fn apply(&self, s: &mut State, params: &[f64]) {
        match *self {
            Gate::Ry { qubit, param } => s.ry_in_place(qubit, params[param]),
            Gate::Rz { qubit, param } => s.rz_in_place(qubit, params[param]),
            Gate::Cz { a, b } => s.cz_in_place(a, b),
        }
    }

    pub(crate) fn apply_inverse(&self, s: &mut State, params: &[f64]) {
        match *self {
            Gate::Ry { qubit, param } => s.ry_in_place(qubit, -params[param]),
            Gate::Rz { qubit, param } => s.rz_in_place(qubit, -params[param]),
            Gate::Cz { a, b } => s.cz_in_place(a, b),
        }
    }
}

/// Circuit angles in radians, laid out as described in the module docs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ParamVector(pub Vec<f64>);

impl ParamVector {
    pub fn zeros(c: &CircuitStructure) -> Self {
        Self(vec![0.0; c.param_count()])
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

impl From<Vec<f64>> for ParamVector {
    fn from(v: Vec<f64>) -> Self {
        Self(v)
    }
}

pub(crate) fn check_dims(c: &CircuitStructure, params: &[f64], input: &State) -> Result<()> {
    if params.len() != c.param_count() {
        return Err(Error::Dimension { expected: c.param_count(), got: params.len() });
    }
    if input.n_qubits() != c.n_qubits() {
        return Err(Error::Dimension { expected: c.n_qubits(), got: input.n_qubits() });
    }
    Ok(())
}

/// Runs the circuit on `input`.
pub fn evaluate(c: &CircuitStructure, p: &ParamVector, input: &State) -> Result<State> {
    evaluate_slice(c, p.as_slice(), input)
}

pub(crate) fn evaluate_slice(c: &CircuitStructure, params: &[f64], input: &State) -> Result<State> {
    check_dims(c, params, input)?;
    let mut s = input.clone();
    for g in c.gates() {
        g.apply(&mut s, params);
    }
    Ok(s)
}

// --- layered form --------------------------------------------------------

/// Angles of the layered form: `L + 1` layers of a general `Rz Ry Rz` on every
/// qubit, with `CZ` of block `l` between layer `l - 1` and layer `l`.
///
/// `layers[l][q] = [first Rz, Ry, last Rz]` in application order.
#[derive(Debug, Clone, PartialEq)]
pub struct BlockFormParams {
    pub layers: Vec<Vec<[f64; 3]>>,
}

impl BlockFormParams {
    pub fn random<R: Rng + ?Sized>(c: &CircuitStructure, rng: &mut R) -> Self {
        let layers = (0..=c.n_blocks())
            .map(|_| {
                (0..c.n_qubits())
                    .map(|_| {
                        let mut a = [0.0; 3];
                        for x in &mut a {
                            *x = rng.gen_range(0.0..std::f64::consts::TAU);
                        }
                        a
                    })
                    .collect()
            })
            .collect();
        Self { layers }
    }
}

/// Runs the layered form of `c` on `input`.
pub fn evaluate_block_form(c: &CircuitStructure, p: &BlockFormParams, input: &State) -> Result<State> {
    if p.layers.len() != c.n_blocks() + 1 || p.layers.iter().any(|l| l.len() != c.n_qubits()) {
        return Err(Error::Dimension {
            expected: (c.n_blocks() + 1) * c.n_qubits(),
            got: p.layers.iter().map(Vec::len).sum(),
        });
    }
    if input.n_qubits() != c.n_qubits() {
        return Err(Error::Dimension { expected: c.n_qubits(), got: input.n_qubits() });
    }
    let mut s = input.clone();
    let layer = |s: &mut State, angles: &[[f64; 3]]| {
        for (q, a) in angles.iter().enumerate() {
            s.rz_in_place(q, a[0]);
            s.ry_in_place(q, a[1]);
            s.rz_in_place(q, a[2]);
        }
    };
    layer(&mut s, &p.layers[0]);
    for (l, &(a, b)) in c.entanglers().iter().enumerate() {
        s.cz_in_place(a, b);
        layer(&mut s, &p.layers[l + 1]);
    }
    Ok(s)
}

type Mat2 = [[Complex64; 2]; 2];

fn mat_mul(a: &Mat2, b: &Mat2) -> Mat2 {
    let mut out = [[Complex64::new(0.0, 0.0); 2]; 2];
    for i in 0..2 {
        for j in 0..2 {
            out[i][j] = a[i][0] * b[0][j] + a[i][1] * b[1][j];
        }
    }
    out
}

pub fn ry_matrix(theta: f64) -> Mat2 {
    let (s, c) = (theta / 2.0).sin_cos();
    [
        [Complex64::new(c, 0.0), Complex64::new(-s, 0.0)],
        [Complex64::new(s, 0.0), Complex64::new(c, 0.0)],
    ]
}

pub fn rz_matrix(theta: f64) -> Mat2 {
    let (s, c) = (theta / 2.0).sin_cos();
    let zero = Complex64::new(0.0, 0.0);
    [[Complex64::new(c, -s), zero], [zero, Complex64::new(c, s)]]
}

/// Matrix of `Rz(last) Ry(mid) Rz(first)`, i.e. `first` is applied first.
fn zyz_matrix(first: f64, mid: f64, last: f64) -> Mat2 {
    mat_mul(&rz_matrix(last), &mat_mul(&ry_matrix(mid), &rz_matrix(first)))
}

/// Decomposes a 2x2 unitary as `exp(i phase) Rz(last) Ry(mid) Rz(first)`.
///
/// Returns `([first, mid, last], phase)`.
pub fn zyz_decompose(u: &Mat2) -> ([f64; 3], f64) {
    let det = u[0][0] * u[1][1] - u[0][1] * u[1][0];
    let phase = det.arg() / 2.0;
    let rot = Complex64::from_polar(1.0, -phase);
    let v00 = u[0][0] * rot;
    let v10 = u[1][0] * rot;
    // v00 = exp(-i(last+first)/2) cos(mid/2), v10 = exp(i(last-first)/2) sin(mid/2)
    let mid = 2.0 * v10.norm().atan2(v00.norm());
    let sum = if v00.norm() > 1e-14 { -2.0 * v00.arg() } else { 0.0 };
    let diff = if v10.norm() > 1e-14 { 2.0 * v10.arg() } else { 0.0 };
    let (last, first) = if v00.norm() <= 1e-14 {
        (diff, 0.0)
    } else if v10.norm() <= 1e-14 {
        (sum, 0.0)
    } else {
        ((sum + diff) / 2.0, (sum - diff) / 2.0)
    };
    // The half-angle branches can leave an overall sign; fold it into the phase.
    let rebuilt = zyz_matrix(first, mid, last);
    let (i, j) = if v00.norm() >= v10.norm() { (0, 0) } else { (1, 0) };
    let ratio = (u[i][j] / rebuilt[i][j]).arg();
    ([first, mid, last], ratio)
}

/// Converts layered-form angles into compact parameters with the same action.
///
/// Works from the last block to the first. After `CZ(a, b)`, the single-qubit
/// unitaries on qubits outside `{a, b}` commute with it entirely and are pushed
/// to the preceding layer; on `a` and `b` the unitary is rewritten as
/// `Rz Ry Rz` and only its first `Rz` (diagonal, so it commutes with `CZ`) is
/// pushed back. The initial layer absorbs everything that reaches it.
///
/// Returns the compact parameters and the global phase `phi` such that
/// `layered = exp(i phi) * compact`.
pub fn merge_block_form(c: &CircuitStructure, p: &BlockFormParams) -> Result<(ParamVector, f64)> {
    let n = c.n_qubits();
    if p.layers.len() != c.n_blocks() + 1 || p.layers.iter().any(|l| l.len() != n) {
        return Err(Error::Dimension {
            expected: (c.n_blocks() + 1) * n,
            got: p.layers.iter().map(Vec::len).sum(),
        });
    }
    let identity = [
        [Complex64::new(1.0, 0.0), Complex64::new(0.0, 0.0)],
        [Complex64::new(0.0, 0.0), Complex64::new(1.0, 0.0)],
    ];
    let mut out = vec![0.0; c.param_count()];
    let mut phase = 0.0;
    // pending[q]: unitary pushed back from later layers, to be applied after layer l on q
    let mut pending = vec![identity; n];
    for l in (1..=c.n_blocks()).rev() {
        let (a, b) = c.entanglers()[l - 1];
        let base = 3 * n + 4 * (l - 1);
        for q in 0..n {
            let angles = p.layers[l][q];
            let w = mat_mul(&pending[q], &zyz_matrix(angles[0], angles[1], angles[2]));
            if q == a || q == b {
                let ([first, mid, last], ph) = zyz_decompose(&w);
                phase += ph;
                let off = if q == a { 0 } else { 2 };
                out[base + off] = mid;
                out[base + off + 1] = last;
                pending[q] = rz_matrix(first);
            } else {
                pending[q] = w;
            }
        }
    }
    for q in 0..n {
        let angles = p.layers[0][q];
        let w = mat_mul(&pending[q], &zyz_matrix(angles[0], angles[1], angles[2]));
        let (zyz, ph) = zyz_decompose(&w);
        phase += ph;
        out[3 * q..3 * q + 3].copy_from_slice(&zyz);
    }
    Ok((ParamVector(out), phase))
}
