//! Portfolio problem, its diagonal (Ising) encoding, and XY interaction graphs.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{self, HermitianMatrix};
use crate::subspace::{binomial, BasisRef, FeasibleBasis, SubspaceState};
use crate::C64;

/// Largest subspace dimension for which dense matrices are built.
pub const MAX_DENSE_DIM: usize = 2048;
/// Largest feasible set [`brute_force_extrema`] will enumerate.
pub const MAX_ENUMERATION: u128 = 10_000_000;

pub const DEFAULT_RISK_FACTOR: f64 = 0.5;

fn default_lambda() -> f64 {
    1.0
}

/// Mean-variance portfolio selection with a fixed budget of `k` assets.
///
/// The objective is `lambda * (q x^T W x - mu^T x)` subject to `sum(x) = k`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PortfolioInstance {
    pub n: usize,
    pub k: usize,
    pub q: f64,
    #[serde(default = "default_lambda")]
    pub lambda: f64,
    pub mu: Vec<f64>,
    pub w: Vec<Vec<f64>>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub provenance: String,
}

impl PortfolioInstance {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidInstance(msg));
        if !(0 < self.k && self.k < self.n) {
            return bad(format!("need 0 < k < n, got n = {}, k = {}", self.n, self.k));
        }
        if !(self.q > 0.0) {
            return bad(format!("risk factor must be positive, got {}", self.q));
        }
        if !(self.lambda > 0.0) {
            return bad(format!("rescaling factor must be positive, got {}", self.lambda));
        }
        if self.mu.len() != self.n || self.w.len() != self.n || self.w.iter().any(|r| r.len() != self.n) {
            return bad("mu / w shapes do not match n".into());
        }
        for i in 0..self.n {
            for j in 0..i {
                if (self.w[i][j] - self.w[j][i]).abs() > 1e-12 {
                    return bad(format!("covariance not symmetric at ({i}, {j})"));
                }
            }
        }
        Ok(())
    }

    /// Same instance with `lambda` replaced.
    pub fn with_lambda(&self, lambda: f64) -> Self {
        Self { lambda, ..self.clone() }
    }
}

/// `lambda * (q x^T W x - mu^T x)` for the bitstring `x` (bit `i` = asset `i`).
pub fn objective(inst: &PortfolioInstance, x: u64) -> f64 {
    let selected: Vec<usize> = (0..inst.n).filter(|&i| x >> i & 1 == 1).collect();
    let mut quad = 0.0;
    for &i in &selected {
        for &j in &selected {
            quad += inst.w[i][j];
        }
    }
    let lin: f64 = selected.iter().map(|&i| inst.mu[i]).sum();
    inst.lambda * (inst.q * quad - lin)
}

/// Pauli-Z expansion of the objective under `x_i -> (1 - Z_i) / 2`:
/// `sum_{i<j} J_ij Z_i Z_j + sum_i h_i Z_i + c`, already multiplied by lambda.
#[derive(Debug, Clone)]
pub struct IsingCoefficients {
    pub couplings: Vec<(usize, usize, f64)>,
    pub fields: Vec<f64>,
    pub constant: f64,
}

impl IsingCoefficients {
    pub fn new(inst: &PortfolioInstance) -> Self {
        let (n, q, lam) = (inst.n, inst.q, inst.lambda);
        let mut couplings = Vec::with_capacity(n * (n - 1) / 2);
        for i in 0..n {
            for j in i + 1..n {
                couplings.push((i, j, lam * 0.5 * q * inst.w[i][j]));
            }
        }
        let fields = (0..n)
            .map(|i| -lam * 0.5 * (q * inst.w[i].iter().sum::<f64>() - inst.mu[i]))
            .collect();
        let constant = lam
            * 0.5
            * (0..n).map(|i| q * inst.w[i][i..].iter().sum::<f64>() - inst.mu[i]).sum::<f64>();
        Self { couplings, fields, constant }
    }

    /// Energy of the computational basis state `x`; `Z_i = +1` when bit `i` is 0.
    pub fn energy(&self, x: u64) -> f64 {
        let z = |i: usize| if x >> i & 1 == 1 { -1.0 } else { 1.0 };
        let pair: f64 = self.couplings.iter().map(|&(i, j, c)| c * z(i) * z(j)).sum();
        let single: f64 = self.fields.iter().enumerate().map(|(i, &h)| h * z(i)).sum();
        pair + single + self.constant
    }
}

/// Diagonal of the phase Hamiltonian over the feasible basis.
pub fn ising_diagonal(inst: &PortfolioInstance, basis: &FeasibleBasis) -> Result<Vec<f64>> {
    if basis.n() != inst.n {
        return Err(Error::DimensionMismatch { expected: inst.n, got: basis.n() });
    }
    let coeffs = IsingCoefficients::new(inst);
    Ok(basis.states().iter().map(|&x| coeffs.energy(x)).collect())
}

/// Exact objective extrema over the feasible set.
#[derive(Debug, Clone, PartialEq)]
pub struct Extrema {
    pub k: usize,
    pub f_min: f64,
    pub f_max: f64,
    pub minimizers: Vec<u64>,
}

impl Extrema {
    /// `(f(x) - f_max) / (f_min - f_max)` for feasible `x`, 0 otherwise.
    /// A degenerate instance (`f_min == f_max`) scores every feasible `x` as 1.
    pub fn ratio_of_value(&self, value: f64) -> f64 {
        if self.f_min == self.f_max {
            return 1.0;
        }
        ((value - self.f_max) / (self.f_min - self.f_max)).clamp(0.0, 1.0)
    }
}

pub fn brute_force_extrema(inst: &PortfolioInstance) -> Result<Extrema> {
    if binomial(inst.n, inst.k) > MAX_ENUMERATION {
        return Err(Error::DimensionCap {
            dim: binomial(inst.n, inst.k).min(usize::MAX as u128) as usize,
            cap: MAX_ENUMERATION as usize,
        });
    }
    let basis = FeasibleBasis::new(inst.n, inst.k)?;
    let values: Vec<f64> = basis.states().iter().map(|&x| objective(inst, x)).collect();
    let f_min = values.iter().copied().fold(f64::INFINITY, f64::min);
    let f_max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let minimizers = basis
        .states()
        .iter()
        .zip(&values)
        .filter(|(_, &v)| v == f_min)
        .map(|(&x, _)| x)
        .collect();
    Ok(Extrema { k: inst.k, f_min, f_max, minimizers })
}

pub fn approximation_ratio(inst: &PortfolioInstance, extrema: &Extrema, x: u64) -> f64 {
    if x.count_ones() as usize != inst.k {
        return 0.0;
    }
    extrema.ratio_of_value(objective(inst, x))
}

/// Edge set of an XY model; edges are stored as `(i, j)` with `i < j`, sorted.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct XYGraph {
    n: usize,
    edges: Vec<(usize, usize)>,
}

impl XYGraph {
    pub fn new(n: usize, edges: impl IntoIterator<Item = (usize, usize)>) -> Result<Self> {
        let mut out = Vec::new();
        for (a, b) in edges {
            if a == b {
                return Err(Error::InvalidGraph(format!("self-loop on vertex {a}")));
            }
            if a >= n || b >= n {
                return Err(Error::InvalidGraph(format!("edge ({a}, {b}) out of range for n = {n}")));
            }
            out.push((a.min(b), a.max(b)));
        }
        out.sort_unstable();
        let before = out.len();
        out.dedup();
        if out.len() != before {
            return Err(Error::InvalidGraph("duplicate edge".into()));
        }
        Ok(Self { n, edges: out })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    pub fn is_ring(&self) -> bool {
        self.n >= 3 && ring_graph(self.n).map(|r| &r == self).unwrap_or(false)
    }
}

/// Nearest neighbours with a periodic boundary: `(i, i+1 mod n)`.
pub fn ring_graph(n: usize) -> Result<XYGraph> {
    if n < 3 {
        return Err(Error::InvalidGraph(format!("ring needs n >= 3, got {n}")));
    }
    XYGraph::new(n, (0..n).map(|i| (i, (i + 1) % n)))
}

pub fn complete_graph(n: usize) -> Result<XYGraph> {
    if n < 3 {
        return Err(Error::InvalidGraph(format!("complete graph needs n >= 3, got {n}")));
    }
    XYGraph::new(n, (0..n).flat_map(|i| (i + 1..n).map(move |j| (i, j))))
}

/// Edge-disjoint Hamiltonian paths covering the complete graph on `n`
/// (even) vertices.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ChainDecomposition {
    n: usize,
    paths: Vec<Vec<usize>>,
}

impl ChainDecomposition {
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn len(&self) -> usize {
        self.paths.len()
    }

    pub fn is_empty(&self) -> bool {
        self.paths.is_empty()
    }

    /// Vertex sequence of chain `v`.
    pub fn path(&self, v: usize) -> &[usize] {
        &self.paths[v]
    }

    /// Edges of chain `v` in path order, as `(path[t], path[t+1])`.
    pub fn chain_edges(&self, v: usize) -> Vec<(usize, usize)> {
        self.paths[v].windows(2).map(|w| (w[0], w[1])).collect()
    }
}

/// Zigzag construction: chain `v` visits `v, v+1, v-1, v+2, v-2, ...` (mod n).
pub fn chain_decomposition(n: usize) -> Result<ChainDecomposition> {
    if n < 4 || n % 2 != 0 {
        return Err(Error::InvalidGraph(format!("chain decomposition needs even n >= 4, got {n}")));
    }
    let paths = (0..n / 2)
        .map(|v| {
            let mut path = vec![v];
            for step in 1..n {
                let magnitude = step.div_ceil(2);
                let vertex = if step % 2 == 1 { v + magnitude } else { v + n - magnitude };
                path.push(vertex % n);
            }
            path
        })
        .collect();
    Ok(ChainDecomposition { n, paths })
}

/// Union of the selected chains' edges.
pub fn graph_from_chains(dec: &ChainDecomposition, subset: &[usize]) -> Result<XYGraph> {
    let mut seen = vec![false; dec.len()];
    for &v in subset {
        if v >= dec.len() || seen[v] {
            return Err(Error::InvalidGraph(format!("invalid or repeated chain index {v}")));
        }
        seen[v] = true;
    }
    XYGraph::new(dec.n, subset.iter().flat_map(|&v| dec.chain_edges(v)))
}

/// `sum_{(i,j) in S} X_i X_j + Y_i Y_j` restricted to the feasible subspace.
pub fn mixing_hamiltonian(graph: &XYGraph, basis: &FeasibleBasis) -> Result<HermitianMatrix> {
    if graph.n() != basis.n() {
        return Err(Error::DimensionMismatch { expected: basis.n(), got: graph.n() });
    }
    let dim = basis.dim();
    if dim > MAX_DENSE_DIM {
        return Err(Error::DimensionCap { dim, cap: MAX_DENSE_DIM });
    }
    let mut m = vec![0.0; dim * dim];
    for &(i, j) in graph.edges() {
        for (a, b) in basis.swap_pairs(i, j)? {
            m[a * dim + b] += 2.0;
            m[b * dim + a] += 2.0;
        }
    }
    HermitianMatrix::from_real(dim, &m)
}

/// Which end of the mixing Hamiltonian's spectrum counts as "aligned".
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MixerConvention {
    /// Aligned state is the top eigenvector of `+sum(XX + YY)`; the QAOA
    /// mixer is generated by `-sum(XX + YY)`, whose ground state it is.
    #[default]
    Maximal,
    /// Aligned state is the bottom eigenvector of `+sum(XX + YY)`; the QAOA
    /// mixer is generated by `+sum(XX + YY)`.
    Minimal,
}

impl MixerConvention {
    /// Factor applied to a QAOA mixer angle before evolving under `+H_XY`.
    pub fn angle_sign(self) -> f64 {
        match self {
            MixerConvention::Maximal => -1.0,
            MixerConvention::Minimal => 1.0,
        }
    }
}

/// Extremal eigenstate of the graph's mixing Hamiltonian in the subspace.
///
/// A degenerate extremal eigenspace is resolved by projecting the Dicke state
/// onto it (falling back to the lowest-index basis state with a non-zero
/// projection if the Dicke state is orthogonal to it).
pub fn aligned_state(
    graph: &XYGraph,
    basis: &BasisRef,
    convention: MixerConvention,
) -> Result<SubspaceState> {
    let h = mixing_hamiltonian(graph, basis)?;
    let eig = linalg::eigh(&h)?;
    let clusters = eig.clusters(linalg::DEGENERACY_GAP);
    let range = match convention {
        MixerConvention::Maximal => clusters.last().cloned(),
        MixerConvention::Minimal => clusters.first().cloned(),
    }
    .ok_or(Error::ZeroState)?;
    let dim = basis.dim();

    let project = |probe: &dyn Fn(usize) -> C64| -> Vec<C64> {
        let mut out = vec![C64::new(0.0, 0.0); dim];
        for col in range.clone() {
            let v = eig.vectors.column(col);
            let overlap: C64 = (0..dim).map(|r| v[r].conj() * probe(r)).sum();
            for r in 0..dim {
                out[r] += v[r] * overlap;
            }
        }
        out
    };
    let significant = |v: &[C64]| v.iter().map(|a| a.norm_sqr()).sum::<f64>() > 1e-12;

    let uniform = C64::new(1.0 / (dim as f64).sqrt(), 0.0);
    let mut amps = project(&|_| uniform);
    if !significant(&amps) {
        amps = (0..dim)
            .map(|b| project(&|r| if r == b { C64::new(1.0, 0.0) } else { C64::new(0.0, 0.0) }))
            .find(|v| significant(v))
            .ok_or(Error::ZeroState)?;
    }
    // fix the global phase: largest-magnitude amplitude real and positive
    let pivot = amps
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.norm().total_cmp(&b.1.norm()).then(b.0.cmp(&a.0)))
        .map(|(_, &a)| a)
        .unwrap_or(C64::new(1.0, 0.0));
    let phase = pivot.conj() / pivot.norm();
    let amps = amps.into_iter().map(|a| a * phase).collect();
    SubspaceState::normalized(basis.clone(), amps)
}
