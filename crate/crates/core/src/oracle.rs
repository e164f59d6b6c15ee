//! Brute-force reference implementations in the full `2^n` space.
//!
//! Nothing here is used by the library proper. These routines build Pauli
//! operators from Kronecker products and exponentiate them with a Taylor
//! series, so they share no code path with the subspace simulator or with
//! the eigendecomposition-based routines in [`crate::linalg`].

use nalgebra::{DMatrix, DVector};

use crate::subspace::{FeasibleBasis, SubspaceState};
use crate::C64;

fn pauli(kind: char) -> DMatrix<C64> {
    let z = C64::new(0.0, 0.0);
    let o = C64::new(1.0, 0.0);
    let i = C64::new(0.0, 1.0);
    match kind {
        'I' => DMatrix::from_row_slice(2, 2, &[o, z, z, o]),
        'X' => DMatrix::from_row_slice(2, 2, &[z, o, o, z]),
        'Y' => DMatrix::from_row_slice(2, 2, &[z, -i, i, z]),
        'Z' => DMatrix::from_row_slice(2, 2, &[o, z, z, -o]),
        _ => panic!("unknown Pauli {kind}"),
    }
}

/// Pauli string acting with `ops[q]` on qubit `q`; qubit 0 is the least
/// significant bit, so it is the rightmost Kronecker factor.
pub fn pauli_string(ops: &[char]) -> DMatrix<C64> {
    let mut acc = DMatrix::from_element(1, 1, C64::new(1.0, 0.0));
    for &op in ops.iter() {
        acc = pauli(op).kronecker(&acc);
    }
    acc
}

fn two_site(n: usize, i: usize, j: usize, p: char) -> DMatrix<C64> {
    let mut ops = vec!['I'; n];
    ops[i] = p;
    ops[j] = p;
    pauli_string(&ops)
}

/// `X_i X_j + Y_i Y_j` on `n` qubits.
pub fn xx_plus_yy(n: usize, i: usize, j: usize) -> DMatrix<C64> {
    two_site(n, i, j, 'X') + two_site(n, i, j, 'Y')
}

/// Sum of `X_i X_j + Y_i Y_j` over the given edges.
pub fn xy_hamiltonian(n: usize, edges: &[(usize, usize)]) -> DMatrix<C64> {
    let dim = 1usize << n;
    edges.iter().fold(DMatrix::zeros(dim, dim), |acc, &(i, j)| acc + xx_plus_yy(n, i, j))
}

/// `exp(-i t A)` by scaling and squaring on a truncated Taylor series.
pub fn expm_minus_i(a: &DMatrix<C64>, t: f64) -> DMatrix<C64> {
    let m = a * C64::new(0.0, -t);
    let norm = m.iter().map(|x| x.norm()).fold(0.0, f64::max) * m.nrows() as f64;
    let mut squarings = 0;
    let mut scale = 1.0;
    while norm * scale > 0.5 {
        scale *= 0.5;
        squarings += 1;
    }
    let ms = &m * C64::new(scale, 0.0);
    let dim = m.nrows();
    let mut term = DMatrix::<C64>::identity(dim, dim);
    let mut sum = term.clone();
    for k in 1..=30 {
        term = &term * &ms * C64::new(1.0 / k as f64, 0.0);
        sum += &term;
    }
    for _ in 0..squarings {
        sum = &sum * &sum;
    }
    sum
}

pub fn embed(state: &SubspaceState) -> DVector<C64> {
    let basis = state.basis();
    let mut full = DVector::zeros(1usize << basis.n());
    for (idx, &bits) in basis.states().iter().enumerate() {
        full[bits as usize] = state.amplitudes()[idx];
    }
    full
}

pub fn project_vector(full: &DVector<C64>, basis: &FeasibleBasis) -> Vec<C64> {
    basis.states().iter().map(|&bits| full[bits as usize]).collect()
}

pub fn project_matrix(full: &DMatrix<C64>, basis: &FeasibleBasis) -> DMatrix<C64> {
    let s = basis.states();
    DMatrix::from_fn(s.len(), s.len(), |r, c| full[(s[r] as usize, s[c] as usize)])
}

/// Objective by explicit double loop over the bit vector.
pub fn objective_loops(n: usize, q: f64, lambda: f64, mu: &[f64], w: &[Vec<f64>], bits: u64) -> f64 {
    let x: Vec<f64> = (0..n).map(|i| ((bits >> i) & 1) as f64).collect();
    let mut quad = 0.0;
    for i in 0..n {
        for j in 0..n {
            quad += x[i] * w[i][j] * x[j];
        }
    }
    let lin: f64 = (0..n).map(|i| mu[i] * x[i]).sum();
    lambda * (q * quad - lin)
}
