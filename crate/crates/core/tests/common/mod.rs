//! Dense-matrix oracle: builds full 2^n x 2^n unitaries by Kronecker products
//! and applies them by plain matrix-vector multiplication.
#![allow(dead_code)]

use neqc_core::circuit::{ry_matrix, rz_matrix, CircuitStructure};
use neqc_core::State;
use num_complex::Complex64;

pub type Matrix = Vec<Vec<Complex64>>;

pub fn identity(dim: usize) -> Matrix {
    (0..dim)
        .map(|i| (0..dim).map(|j| Complex64::new(if i == j { 1.0 } else { 0.0 }, 0.0)).collect())
        .collect()
}

fn kron(a: &Matrix, b: &Matrix) -> Matrix {
    let (ra, rb) = (a.len(), b.len());
    let mut out = vec![vec![Complex64::new(0.0, 0.0); ra * rb]; ra * rb];
    for i in 0..ra {
        for j in 0..ra {
            for k in 0..rb {
                for l in 0..rb {
                    out[i * rb + k][j * rb + l] = a[i][j] * b[k][l];
                }
            }
        }
    }
    out
}

/// `I ⊗ ... ⊗ g ⊗ ... ⊗ I` with qubit 0 as the least significant (rightmost) factor.
pub fn single(n: usize, qubit: usize, g: [[Complex64; 2]; 2]) -> Matrix {
    let g: Matrix = g.iter().map(|r| r.to_vec()).collect();
    let mut m = identity(1);
    for q in (0..n).rev() {
        m = if q == qubit { kron(&m, &g) } else { kron(&m, &identity(2)) };
    }
    m
}

pub fn cz(n: usize, a: usize, b: usize) -> Matrix {
    let mut m = identity(1 << n);
    for (i, row) in m.iter_mut().enumerate() {
        if (i >> a) & 1 == 1 && (i >> b) & 1 == 1 {
            row[i] = -row[i];
        }
    }
    m
}

pub fn matmul(a: &Matrix, b: &Matrix) -> Matrix {
    let d = a.len();
    let mut out = vec![vec![Complex64::new(0.0, 0.0); d]; d];
    for i in 0..d {
        for k in 0..d {
            let aik = a[i][k];
            for j in 0..d {
                out[i][j] += aik * b[k][j];
            }
        }
    }
    out
}

pub fn apply(m: &Matrix, s: &[Complex64]) -> Vec<Complex64> {
    m.iter().map(|row| row.iter().zip(s).map(|(a, b)| a * b).sum()).collect()
}

/// Unitary of the compact ansatz, composed gate by gate.
pub fn circuit_matrix(c: &CircuitStructure, p: &[f64]) -> Matrix {
    let n = c.n_qubits();
    let mut u = identity(1 << n);
    let mut push = |g: Matrix| u = matmul(&g, &u);
    for q in 0..n {
        push(single(n, q, rz_matrix(p[3 * q])));
        push(single(n, q, ry_matrix(p[3 * q + 1])));
        push(single(n, q, rz_matrix(p[3 * q + 2])));
    }
    for (l, &(a, b)) in c.entanglers().iter().enumerate() {
        let base = 3 * n + 4 * l;
        push(cz(n, a, b));
        push(single(n, a, ry_matrix(p[base])));
        push(single(n, a, rz_matrix(p[base + 1])));
        push(single(n, b, ry_matrix(p[base + 2])));
        push(single(n, b, rz_matrix(p[base + 3])));
    }
    u
}

/// Unitary of the layered form: `Rz Ry Rz` on every qubit, then per block `CZ`
/// and another full layer.
pub fn block_form_matrix(c: &CircuitStructure, layers: &[Vec<[f64; 3]>]) -> Matrix {
    let n = c.n_qubits();
    let mut u = identity(1 << n);
    let layer = |u: &mut Matrix, angles: &[[f64; 3]]| {
        for (q, a) in angles.iter().enumerate() {
            *u = matmul(&single(n, q, rz_matrix(a[0])), u);
            *u = matmul(&single(n, q, ry_matrix(a[1])), u);
            *u = matmul(&single(n, q, rz_matrix(a[2])), u);
        }
    };
    layer(&mut u, &layers[0]);
    for (l, &(a, b)) in c.entanglers().iter().enumerate() {
        u = matmul(&cz(n, a, b), &u);
        layer(&mut u, &layers[l + 1]);
    }
    u
}

pub fn max_diff(a: &[Complex64], b: &[Complex64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max)
}

pub fn state_diff(a: &State, b: &State) -> f64 {
    max_diff(a.amplitudes(), b.amplitudes())
}

/// Central finite difference of `f` at `x` along every coordinate.
pub fn central_fd(f: impl Fn(&[f64]) -> f64, x: &[f64], h: f64) -> Vec<f64> {
    let mut w = x.to_vec();
    (0..x.len())
        .map(|i| {
            w[i] = x[i] + h;
            let plus = f(&w);
            w[i] = x[i] - h;
            let minus = f(&w);
            w[i] = x[i];
            (plus - minus) / (2.0 * h)
        })
        .collect()
}

/// `|a - b| <= rel |b| + floor` on every component; returns the worst offender.
pub fn check_close(a: &[f64], b: &[f64], rel: f64, floor: f64) -> Result<(), String> {
    assert_eq!(a.len(), b.len());
    for (i, (x, y)) in a.iter().zip(b).enumerate() {
        if (x - y).abs() > rel * y.abs() + floor {
            return Err(format!("component {i}: {x} vs {y}"));
        }
    }
    Ok(())
}
