//! Dense pure-state simulation.
//!
//! Bit convention: qubit `q` is bit `q` of the amplitude index, so qubit 0 is
//! the least significant bit. `|q2 q1 q0>` with `q0 = 1` is index 1.
//!
//! Gate matrices use the half-angle convention:
//!
//! ```text
//! Ry(t) = [[cos t/2, -sin t/2], [sin t/2, cos t/2]]
//! Rz(t) = diag(exp(-i t/2), exp(i t/2))
//! ```

use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Largest register the simulator accepts.
pub const MAX_QUBITS: usize = 16;

/// Pure state of `n_qubits` qubits as a vector of `2^n_qubits` amplitudes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawState")]
pub struct State {
    n_qubits: usize,
    amplitudes: Vec<Complex64>,
}

#[derive(Deserialize)]
struct RawState {
    n_qubits: usize,
    amplitudes: Vec<Complex64>,
}

impl TryFrom<RawState> for State {
    type Error = Error;

    fn try_from(raw: RawState) -> Result<Self> {
        check_n(raw.n_qubits)?;
        if raw.amplitudes.len() != 1 << raw.n_qubits {
            return Err(Error::Dimension { expected: 1 << raw.n_qubits, got: raw.amplitudes.len() });
        }
        let s = Self { n_qubits: raw.n_qubits, amplitudes: raw.amplitudes };
        if (s.norm() - 1.0).abs() > 1e-10 {
            return Err(Error::InvalidArgument(format!("state norm {} is not 1", s.norm())));
        }
        Ok(s)
    }
}

fn check_n(n: usize) -> Result<()> {
    if (1..=MAX_QUBITS).contains(&n) {
        Ok(())
    } else {
        Err(Error::QubitCount(n))
    }
}

impl State {
    /// `|0...0>` on `n` qubits.
    pub fn zero(n: usize) -> Result<Self> {
        check_n(n)?;
        let mut amplitudes = vec![Complex64::new(0.0, 0.0); 1 << n];
        amplitudes[0] = Complex64::new(1.0, 0.0);
        Ok(Self { n_qubits: n, amplitudes })
    }

    /// Haar-random state: i.i.d. standard complex Gaussian amplitudes, normalized.
    pub fn haar_random<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Result<Self> {
        check_n(n)?;
        let amplitudes = (0..1usize << n)
            .map(|_| {
                let re: f64 = rng.sample(StandardNormal);
                let im: f64 = rng.sample(StandardNormal);
                Complex64::new(re, im)
            })
            .collect();
        Self::from_amplitudes(amplitudes)
    }

    /// Builds a state from raw amplitudes, normalizing them.
    ///
    /// The length must be a power of two between 2 and `2^MAX_QUBITS`.
    pub fn from_amplitudes(mut amplitudes: Vec<Complex64>) -> Result<Self> {
        let len = amplitudes.len();
        if len < 2 || !len.is_power_of_two() {
            return Err(Error::InvalidArgument(format!(
                "amplitude vector length {len} is not a power of two >= 2"
            )));
        }
        let n = len.trailing_zeros() as usize;
        check_n(n)?;
        let norm = amplitudes.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
        if !norm.is_finite() || norm == 0.0 {
            return Err(Error::InvalidArgument("amplitude vector has zero or non-finite norm".into()));
        }
        for a in &mut amplitudes {
            *a /= norm;
        }
        Ok(Self { n_qubits: n, amplitudes })
    }

    /// Wraps amplitudes without renormalizing. Used for linear combinations in tests
    /// and for adjoint vectors that are not states.
    pub(crate) fn from_raw(n_qubits: usize, amplitudes: Vec<Complex64>) -> Self {
        debug_assert_eq!(amplitudes.len(), 1 << n_qubits);
        Self { n_qubits, amplitudes }
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn dim(&self) -> usize {
        self.amplitudes.len()
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amplitudes
    }

    pub fn into_amplitudes(self) -> Vec<Complex64> {
        self.amplitudes
    }

    pub fn norm(&self) -> f64 {
        self.amplitudes.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt()
    }

    /// `<self|other>`.
    pub fn inner(&self, other: &State) -> Result<Complex64> {
        if self.n_qubits != other.n_qubits {
            return Err(Error::Dimension { expected: self.dim(), got: other.dim() });
        }
        Ok(self
            .amplitudes
            .iter()
            .zip(&other.amplitudes)
            .map(|(a, b)| a.conj() * b)
            .sum())
    }

    fn check_qubit(&self, q: usize) -> Result<()> {
        if q < self.n_qubits {
            Ok(())
        } else {
            Err(Error::QubitIndex { index: q, n_qubits: self.n_qubits })
        }
    }

    pub fn apply_ry(mut self, qubit: usize, theta: f64) -> Result<Self> {
        self.check_qubit(qubit)?;
        self.ry_in_place(qubit, theta);
        Ok(self)
    }

    pub fn apply_rz(mut self, qubit: usize, theta: f64) -> Result<Self> {
        self.check_qubit(qubit)?;
        self.rz_in_place(qubit, theta);
        Ok(self)
    }

    pub fn apply_cz(mut self, a: usize, b: usize) -> Result<Self> {
        self.check_qubit(a)?;
        self.check_qubit(b)?;
        if a == b {
            return Err(Error::SameQubit(a));
        }
        self.cz_in_place(a, b);
        Ok(self)
    }

    /// Applies an arbitrary 2x2 matrix `[[m00, m01], [m10, m11]]` to `qubit`.
    pub fn apply_single(mut self, qubit: usize, m: [[Complex64; 2]; 2]) -> Result<Self> {
        self.check_qubit(qubit)?;
        self.single_in_place(qubit, m);
        Ok(self)
    }

    // In-place kernels. Callers have validated indices.

    pub(crate) fn ry_in_place(&mut self, qubit: usize, theta: f64) {
        let (s, c) = (theta / 2.0).sin_cos();
        let bit = 1usize << qubit;
        for i in 0..self.amplitudes.len() {
            if i & bit == 0 {
                let a0 = self.amplitudes[i];
                let a1 = self.amplitudes[i | bit];
                self.amplitudes[i] = a0 * c - a1 * s;
                self.amplitudes[i | bit] = a0 * s + a1 * c;
            }
        }
    }

    pub(crate) fn rz_in_place(&mut self, qubit: usize, theta: f64) {
        let (s, c) = (theta / 2.0).sin_cos();
        let lower = Complex64::new(c, -s);
        let upper = Complex64::new(c, s);
        let bit = 1usize << qubit;
        for (i, a) in self.amplitudes.iter_mut().enumerate() {
            *a *= if i & bit == 0 { lower } else { upper };
        }
    }

    pub(crate) fn cz_in_place(&mut self, a: usize, b: usize) {
        let mask = (1usize << a) | (1usize << b);
        for (i, amp) in self.amplitudes.iter_mut().enumerate() {
            if i & mask == mask {
                *amp = -*amp;
            }
        }
    }

    pub(crate) fn single_in_place(&mut self, qubit: usize, m: [[Complex64; 2]; 2]) {
        let bit = 1usize << qubit;
        for i in 0..self.amplitudes.len() {
            if i & bit == 0 {
                let a0 = self.amplitudes[i];
                let a1 = self.amplitudes[i | bit];
                self.amplitudes[i] = m[0][0] * a0 + m[0][1] * a1;
                self.amplitudes[i | bit] = m[1][0] * a0 + m[1][1] * a1;
            }
        }
    }

    pub(crate) fn amplitudes_mut(&mut self) -> &mut [Complex64] {
        &mut self.amplitudes
    }
}

/// Probability of measuring `qubit` in `|0>`.
pub fn prob_zero(s: &State, qubit: usize) -> Result<f64> {
    s.check_qubit(qubit)?;
    let bit = 1usize << qubit;
    Ok(s.amplitudes
        .iter()
        .enumerate()
        .filter(|(i, _)| i & bit == 0)
        .map(|(_, a)| a.norm_sqr())
        .sum())
}

/// Local cost `1 - (1/N) sum_i <P0_i>`.
///
/// The observable is diagonal with eigenvalue `popcount(k) / N` on basis state
/// `k`, which is how it is evaluated here.
pub fn cost(s: &State) -> f64 {
    let n = s.n_qubits as f64;
    let c: f64 = s
        .amplitudes
        .iter()
        .enumerate()
        .map(|(k, a)| a.norm_sqr() * f64::from(k.count_ones()))
        .sum::<f64>()
        / n;
    c.clamp(0.0, 1.0)
}

/// `|<a|b>|^2`.
pub fn fidelity(a: &State, b: &State) -> Result<f64> {
    Ok(a.inner(b)?.norm_sqr().min(1.0))
}

/// Diagonal of the cost observable, `popcount(k) / N`.
pub(crate) fn cost_observable(n_qubits: usize) -> Vec<f64> {
    let n = n_qubits as f64;
    (0..1usize << n_qubits).map(|k| f64::from(k.count_ones()) / n).collect()
}
