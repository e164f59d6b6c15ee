//! Feasible-subspace basis and state vectors.
//!
//! Bit `i` of a basis label is asset/qubit `i`, with asset 0 in the least
//! significant position. Basis states are kept in increasing integer order.

use std::collections::HashMap;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::C64;

/// Largest qubit count a basis may be built for.
pub const MAX_QUBITS: usize = 32;
/// Largest subspace dimension a basis may hold.
pub const MAX_DIM: usize = 2_000_000;

/// Binomial coefficient as `u128`, exact for every `n <= 64`.
pub fn binomial(n: usize, k: usize) -> u128 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = acc * (n - i) as u128 / (i + 1) as u128;
    }
    acc
}

/// All `n`-bit strings of Hamming weight `k`, in increasing order.
#[derive(Debug, Clone)]
pub struct FeasibleBasis {
    n: usize,
    k: usize,
    states: Vec<u64>,
    index_of: HashMap<u64, usize>,
}

impl PartialEq for FeasibleBasis {
    fn eq(&self, other: &Self) -> bool {
        self.n == other.n && self.k == other.k
    }
}

impl FeasibleBasis {
    pub fn new(n: usize, k: usize) -> Result<Self> {
        if n == 0 || k > n {
            return Err(Error::InvalidBasis { n, k, reason: "require 0 <= k <= n and n >= 1" });
        }
        if n > MAX_QUBITS {
            return Err(Error::InvalidBasis { n, k, reason: "n exceeds 32" });
        }
        let dim = binomial(n, k);
        if dim > MAX_DIM as u128 {
            return Err(Error::DimensionCap { dim: dim as usize, cap: MAX_DIM });
        }
        let dim = dim as usize;

        let mut states = Vec::with_capacity(dim);
        if k == 0 {
            states.push(0);
        } else {
            // Gosper's hack: next larger integer with the same popcount.
            let limit = 1u64 << n;
            let mut x: u64 = (1u64 << k) - 1;
            while x < limit {
                states.push(x);
                let c = x & x.wrapping_neg();
                let r = x + c;
                x = (((r ^ x) >> 2) / c) | r;
            }
        }
        debug_assert_eq!(states.len(), dim);
        let index_of = states.iter().enumerate().map(|(i, &s)| (s, i)).collect();
        Ok(Self { n, k, states, index_of })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn dim(&self) -> usize {
        self.states.len()
    }

    pub fn states(&self) -> &[u64] {
        &self.states
    }

    pub fn state(&self, index: usize) -> u64 {
        self.states[index]
    }

    pub fn index_of(&self, bits: u64) -> Option<usize> {
        self.index_of.get(&bits).copied()
    }

    /// Index pairs `(a, b)` where `a` has bit `i` set and bit `j` clear and
    /// `b` is `a` with those two bits swapped. These are exactly the
    /// two-dimensional blocks on which an XY term on `(i, j)` acts.
    pub fn swap_pairs(&self, i: usize, j: usize) -> Result<Vec<(usize, usize)>> {
        self.check_pair(i, j)?;
        let (mi, mj) = (1u64 << i, 1u64 << j);
        Ok(self
            .states
            .iter()
            .enumerate()
            .filter(|(_, &s)| s & mi != 0 && s & mj == 0)
            .map(|(a, &s)| (a, self.index_of[&(s ^ mi ^ mj)]))
            .collect())
    }

    pub(crate) fn check_pair(&self, i: usize, j: usize) -> Result<()> {
        if i == j || i >= self.n || j >= self.n {
            return Err(Error::InvalidPair { i, j, n: self.n });
        }
        Ok(())
    }
}

/// Shared handle; states keep one of these rather than copying the basis.
pub type BasisRef = Arc<FeasibleBasis>;

pub fn enumerate_basis(n: usize, k: usize) -> Result<BasisRef> {
    FeasibleBasis::new(n, k).map(Arc::new)
}

/// Complex amplitudes over a [`FeasibleBasis`].
#[derive(Debug, Clone)]
pub struct SubspaceState {
    basis: BasisRef,
    amplitudes: Vec<C64>,
}

impl SubspaceState {
    /// Wraps amplitudes as given. Callers that need a unit vector should use
    /// [`SubspaceState::normalized`].
    pub fn new(basis: BasisRef, amplitudes: Vec<C64>) -> Result<Self> {
        if amplitudes.len() != basis.dim() {
            return Err(Error::DimensionMismatch { expected: basis.dim(), got: amplitudes.len() });
        }
        Ok(Self { basis, amplitudes })
    }

    pub fn normalized(basis: BasisRef, amplitudes: Vec<C64>) -> Result<Self> {
        let mut state = Self::new(basis, amplitudes)?;
        let norm = state.norm();
        if norm == 0.0 || !norm.is_finite() {
            return Err(Error::ZeroState);
        }
        state.amplitudes.iter_mut().for_each(|a| *a /= norm);
        Ok(state)
    }

    /// The computational basis state labelled by `bits`.
    pub fn basis_state(basis: BasisRef, bits: u64) -> Result<Self> {
        let idx = basis.index_of(bits).ok_or_else(|| {
            Error::InvalidParams(format!("bitstring {bits:#b} is not in the feasible basis"))
        })?;
        let mut amplitudes = vec![C64::new(0.0, 0.0); basis.dim()];
        amplitudes[idx] = C64::new(1.0, 0.0);
        Ok(Self { basis, amplitudes })
    }

    pub fn basis(&self) -> &BasisRef {
        &self.basis
    }

    pub fn amplitudes(&self) -> &[C64] {
        &self.amplitudes
    }

    pub fn amplitudes_mut(&mut self) -> &mut [C64] {
        &mut self.amplitudes
    }

    pub fn into_amplitudes(self) -> Vec<C64> {
        self.amplitudes
    }

    pub fn norm(&self) -> f64 {
        self.amplitudes.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt()
    }

    pub fn probabilities(&self) -> Vec<f64> {
        self.amplitudes.iter().map(|a| a.norm_sqr()).collect()
    }

    /// `<self|other>`.
    pub fn inner(&self, other: &Self) -> Result<C64> {
        if self.basis != other.basis {
            return Err(Error::BasisMismatch);
        }
        Ok(self.amplitudes.iter().zip(&other.amplitudes).map(|(a, b)| a.conj() * b).sum())
    }
}

/// Uniform superposition over the basis.
pub fn dicke_state(basis: &BasisRef) -> SubspaceState {
    let amp = C64::new(1.0 / (basis.dim() as f64).sqrt(), 0.0);
    SubspaceState { basis: basis.clone(), amplitudes: vec![amp; basis.dim()] }
}

/// In-place `exp(-i beta (X_i X_j + Y_i Y_j))` on precomputed swap pairs.
pub fn rotate_pairs(amplitudes: &mut [C64], pairs: &[(usize, usize)], beta: f64) {
    let (s, c) = (2.0 * beta).sin_cos();
    let mis = C64::new(0.0, -s);
    for &(a, b) in pairs {
        let (x, y) = (amplitudes[a], amplitudes[b]);
        amplitudes[a] = x * c + mis * y;
        amplitudes[b] = mis * x + y * c;
    }
}

/// Applies `exp(-i beta (X_i X_j + Y_i Y_j))` restricted to the subspace.
pub fn apply_xy_rotation(
    state: &SubspaceState,
    pair: (usize, usize),
    beta: f64,
) -> Result<SubspaceState> {
    let pairs = state.basis.swap_pairs(pair.0, pair.1)?;
    let mut out = state.clone();
    rotate_pairs(&mut out.amplitudes, &pairs, beta);
    Ok(out)
}

/// In-place `exp(-i gamma diag)`.
pub fn phase_in_place(amplitudes: &mut [C64], diag: &[f64], gamma: f64) {
    for (a, &d) in amplitudes.iter_mut().zip(diag) {
        let (s, c) = (gamma * d).sin_cos();
        *a *= C64::new(c, -s);
    }
}

pub fn apply_phase(state: &SubspaceState, diag: &[f64], gamma: f64) -> Result<SubspaceState> {
    if diag.len() != state.basis.dim() {
        return Err(Error::DimensionMismatch { expected: state.basis.dim(), got: diag.len() });
    }
    let mut out = state.clone();
    phase_in_place(&mut out.amplitudes, diag, gamma);
    Ok(out)
}

/// `|<a|b>|^2`, clamped to `[0, 1]`.
pub fn fidelity(a: &SubspaceState, b: &SubspaceState) -> Result<f64> {
    Ok(a.inner(b)?.norm_sqr().clamp(0.0, 1.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oracle;
    use proptest::prelude::*;
    use std::f64::consts::PI;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    #[test]
    fn small_bases() {
        let b = enumerate_basis(2, 1).unwrap();
        assert_eq!(b.states(), &[1, 2]);
        assert_eq!(enumerate_basis(6, 3).unwrap().dim(), 20);
        assert_eq!(enumerate_basis(4, 0).unwrap().states(), &[0]);
        assert_eq!(enumerate_basis(4, 4).unwrap().states(), &[15]);
    }

    #[test]
    fn large_basis_matches_binomial() {
        let b = enumerate_basis(32, 5).unwrap();
        assert_eq!(b.dim(), 201_376);
        assert_eq!(binomial(32, 5), 201_376);
        assert!(b.states().windows(2).all(|w| w[0] < w[1]));
        assert!(b.states().iter().all(|s| s.count_ones() == 5));
    }

    #[test]
    fn basis_guards() {
        assert!(enumerate_basis(3, 4).is_err());
        assert!(enumerate_basis(33, 1).is_err());
        assert!(matches!(enumerate_basis(32, 16), Err(Error::DimensionCap { .. })));
    }

    #[test]
    fn index_map_is_inverse() {
        let b = enumerate_basis(10, 4).unwrap();
        for (i, &s) in b.states().iter().enumerate() {
            assert_eq!(b.index_of(s), Some(i));
        }
        assert_eq!(b.index_of(0b111), None);
    }

    #[test]
    fn dicke_amplitudes() {
        let b = enumerate_basis(6, 3).unwrap();
        let d = dicke_state(&b);
        let expect = 1.0 / 20f64.sqrt();
        assert!(d.amplitudes().iter().all(|a| (a.re - expect).abs() < 1e-15 && a.im == 0.0));
        let d = dicke_state(&enumerate_basis(2, 1).unwrap());
        assert!((d.amplitudes()[0].re - 0.5f64.sqrt()).abs() < 1e-15);
        let d = dicke_state(&enumerate_basis(4, 2).unwrap());
        assert_eq!(d.amplitudes().len(), 6);
        assert!((d.norm() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn xy_rotation_quarter_turn() {
        let b = enumerate_basis(2, 1).unwrap();
        let psi = SubspaceState::basis_state(b.clone(), 0b01).unwrap();
        let out = apply_xy_rotation(&psi, (0, 1), PI / 4.0).unwrap();
        // 4x4 dense oracle on the two-qubit operator
        let u = oracle::expm_minus_i(&oracle::xx_plus_yy(2, 0, 1), PI / 4.0);
        let full = oracle::embed(&psi);
        let expect = oracle::project_vector(&(u * full), &b);
        for (got, want) in out.amplitudes().iter().zip(&expect) {
            assert!((got - want).norm() < 1e-12);
        }
        assert!((out.amplitudes()[0]).norm() < 1e-15);
        assert!((out.amplitudes()[1] - c(0.0, -1.0)).norm() < 1e-15);
    }

    #[test]
    fn xy_rotation_eighth_turn() {
        let b = enumerate_basis(2, 1).unwrap();
        let psi = SubspaceState::basis_state(b, 0b01).unwrap();
        let out = apply_xy_rotation(&psi, (0, 1), PI / 8.0).unwrap();
        let h = (0.5f64).sqrt();
        assert!((out.amplitudes()[0] - c(h, 0.0)).norm() < 1e-15);
        assert!((out.amplitudes()[1] - c(0.0, -h)).norm() < 1e-15);
    }

    #[test]
    fn xy_rotation_rejects_bad_pairs() {
        let b = enumerate_basis(4, 2).unwrap();
        let d = dicke_state(&b);
        assert!(apply_xy_rotation(&d, (1, 1), 0.3).is_err());
        assert!(apply_xy_rotation(&d, (0, 4), 0.3).is_err());
    }

    #[test]
    fn phase_examples() {
        let b = enumerate_basis(2, 1).unwrap();
        let d = dicke_state(&b);
        let out = apply_phase(&d, &[0.0, PI], 1.0).unwrap();
        assert!((out.amplitudes()[1] + d.amplitudes()[1]).norm() < 1e-15);
        assert!((out.amplitudes()[0] - d.amplitudes()[0]).norm() < 1e-15);

        let b = enumerate_basis(6, 3).unwrap();
        let d = dicke_state(&b);
        let out = apply_phase(&d, &[1.7; 20], 0.9).unwrap();
        assert!((fidelity(&d, &out).unwrap() - 1.0).abs() < 1e-14);
        let same = apply_phase(&d, &[3.0; 20], 0.0).unwrap();
        assert_eq!(same.amplitudes(), d.amplitudes());
        assert!(apply_phase(&d, &[0.0; 3], 1.0).is_err());
    }

    #[test]
    fn fidelity_examples() {
        let b = enumerate_basis(2, 1).unwrap();
        let e0 = SubspaceState::basis_state(b.clone(), 0b01).unwrap();
        let e1 = SubspaceState::basis_state(b.clone(), 0b10).unwrap();
        let d = dicke_state(&b);
        assert_eq!(fidelity(&e0, &e0).unwrap(), 1.0);
        assert_eq!(fidelity(&e0, &e1).unwrap(), 0.0);
        assert!((fidelity(&e0, &d).unwrap() - 0.5).abs() < 1e-15);
        let other = dicke_state(&enumerate_basis(3, 1).unwrap());
        assert!(matches!(fidelity(&d, &other), Err(Error::BasisMismatch)));
    }

    fn random_state(basis: &BasisRef, seed: u64) -> SubspaceState {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let amps = (0..basis.dim())
            .map(|_| c(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
            .collect();
        SubspaceState::normalized(basis.clone(), amps).unwrap()
    }

    #[test]
    fn rotation_matches_dense_full_space() {
        for n in 2..=6 {
            for k in 0..=n {
                let b = enumerate_basis(n, k).unwrap();
                let psi = random_state(&b, (n * 10 + k) as u64);
                for i in 0..n {
                    for j in 0..n {
                        if i == j {
                            continue;
                        }
                        let beta = 0.37 + 0.11 * (i + j) as f64;
                        let got = apply_xy_rotation(&psi, (i, j), beta).unwrap();
                        let u = oracle::expm_minus_i(&oracle::xx_plus_yy(n, i, j), beta);
                        let want = oracle::project_vector(&(u * oracle::embed(&psi)), &b);
                        for (g, w) in got.amplitudes().iter().zip(&want) {
                            assert!((g - w).norm() < 1e-10, "n={n} k={k} pair=({i},{j})");
                        }
                    }
                }
            }
        }
    }

    proptest! {
        #[test]
        fn norm_preserved_by_gate_sequences(
            seed in 0u64..1000,
            ops in prop::collection::vec((0usize..6, 0usize..6, -3.0f64..3.0), 1..40),
        ) {
            let b = enumerate_basis(6, 3).unwrap();
            let mut psi = random_state(&b, seed);
            let diag: Vec<f64> = (0..b.dim()).map(|i| (i as f64 * 0.731).sin()).collect();
            for (i, j, angle) in ops {
                psi = if i == j {
                    apply_phase(&psi, &diag, angle).unwrap()
                } else {
                    apply_xy_rotation(&psi, (i, j), angle).unwrap()
                };
            }
            prop_assert!((psi.norm() - 1.0).abs() < 1e-12);
        }

        #[test]
        fn rotation_is_inverted_by_negative_angle(
            seed in 0u64..1000, i in 0usize..6, j in 0usize..6, beta in -4.0f64..4.0,
        ) {
            prop_assume!(i != j);
            let b = enumerate_basis(6, 2).unwrap();
            let psi = random_state(&b, seed);
            let back = apply_xy_rotation(&apply_xy_rotation(&psi, (i, j), beta).unwrap(), (i, j), -beta).unwrap();
            for (x, y) in back.amplitudes().iter().zip(psi.amplitudes()) {
                prop_assert!((x - y).norm() < 1e-12);
            }
        }
    }
}
