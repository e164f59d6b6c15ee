//! Exact and Trotterized XY mixers, Trotter error, and effective-Hamiltonian
//! analysis.
//!
//! All routines here evolve under `+sum(XX + YY)`: the mixer for angle `beta`
//! is `exp(-i beta H_XY)` or a product-formula approximation of it. The QAOA
//! layer decides the sign of `beta` (see [`crate::model::MixerConvention`]).
//!
//! Trotterized mixers are built from "chains": a chain is a path (or a ring)
//! whose edges are split by position parity into groups of pairwise commuting
//! terms. One Trotter step of a chain applies the even group first, then the
//! odd group (and, for odd rings, the closing edge last). A multi-chain mixer
//! repeats `t1` times the ordered sequence of its chains, each advanced with
//! `t2` parity steps.

use std::collections::BTreeSet;
use std::sync::Arc;

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{self, CMatrix, Eigen, HermitianMatrix, UnitaryMatrix};
use crate::model::{self, ChainDecomposition, XYGraph, MAX_DENSE_DIM};
use crate::subspace::{rotate_pairs, BasisRef, FeasibleBasis, SubspaceState};
use crate::C64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MixerKind {
    Exact,
    Trotter,
}

/// How a mixer is realized. `t1` sequences chains, `t2` counts parity steps
/// inside each chain; both are ignored by [`MixerKind::Exact`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct MixerSpec {
    pub kind: MixerKind,
    #[serde(default = "one")]
    pub t1: usize,
    #[serde(default = "one")]
    pub t2: usize,
}

fn one() -> usize {
    1
}

impl MixerSpec {
    pub fn exact() -> Self {
        Self { kind: MixerKind::Exact, t1: 1, t2: 1 }
    }

    pub fn trotter(t1: usize, t2: usize) -> Self {
        Self { kind: MixerKind::Trotter, t1, t2 }
    }

    pub fn validate(&self) -> Result<()> {
        if self.kind == MixerKind::Trotter && (self.t1 == 0 || self.t2 == 0) {
            return Err(Error::InvalidParams("Trotter numbers must be positive".into()));
        }
        Ok(())
    }

    pub fn label(&self) -> String {
        match self.kind {
            MixerKind::Exact => "exact".into(),
            MixerKind::Trotter => format!("trotter_{}_{}", self.t1, self.t2),
        }
    }
}

type Edge = (usize, usize);

/// Parity groups of one chain, in application order.
#[derive(Debug, Clone, PartialEq)]
struct ChainGroups(Vec<Vec<Edge>>);

impl ChainGroups {
    /// Splits path-ordered edges by position parity. A closing edge (ring)
    /// is passed separately: position `len` in the path order.
    fn from_path(edges: &[Edge], closing: Option<Edge>) -> Self {
        let mut even = Vec::new();
        let mut odd = Vec::new();
        for (pos, &e) in edges.iter().enumerate() {
            if pos % 2 == 0 { even.push(e) } else { odd.push(e) }
        }
        let mut groups = vec![even, odd];
        if let Some(e) = closing {
            // The closing edge sits at position edges.len() = n - 1.
            if edges.len() % 2 == 1 {
                groups[1].push(e);
            } else {
                groups.push(vec![e]);
            }
        }
        groups.retain(|g| !g.is_empty());
        Self(groups)
    }
}

/// Chain structure of a graph, as used by the Trotterized mixers.
#[derive(Debug, Clone, PartialEq)]
pub struct MixerLayout {
    chains: Vec<ChainGroups>,
}

impl MixerLayout {
    /// Resolves how `graph` is Trotterized: rings and simple paths are single
    /// chains; anything else must be a union of chains from `chains`.
    pub fn resolve(graph: &XYGraph, chains: Option<&ChainDecomposition>) -> Result<Self> {
        let n = graph.n();
        if graph.is_ring() {
            let path: Vec<Edge> = (0..n - 1).map(|i| (i, i + 1)).collect();
            return Ok(Self { chains: vec![ChainGroups::from_path(&path, Some((n - 1, 0)))] });
        }
        if let Some(path) = path_order(graph) {
            return Ok(Self { chains: vec![ChainGroups::from_path(&path, None)] });
        }
        let dec = chains.ok_or(Error::MissingChains)?;
        if dec.n() != n {
            return Err(Error::DimensionMismatch { expected: n, got: dec.n() });
        }
        let edge_set: BTreeSet<Edge> = graph.edges().iter().copied().collect();
        let norm = |(a, b): Edge| (a.min(b), a.max(b));
        let mut covered = BTreeSet::new();
        let mut selected = Vec::new();
        for v in 0..dec.len() {
            let edges = dec.chain_edges(v);
            if edges.iter().all(|&e| edge_set.contains(&norm(e))) {
                covered.extend(edges.iter().map(|&e| norm(e)));
                selected.push(ChainGroups::from_path(&edges, None));
            }
        }
        if covered != edge_set {
            return Err(Error::InvalidGraph("graph is not a union of decomposition chains".into()));
        }
        Ok(Self { chains: selected })
    }

    pub fn chain_count(&self) -> usize {
        self.chains.len()
    }

    /// The two commuting halves when the layout is a single chain split
    /// into exactly two parity groups.
    pub fn two_way_split(&self) -> Option<(&[Edge], &[Edge])> {
        match self.chains.as_slice() {
            [ChainGroups(groups)] if groups.len() == 2 => Some((&groups[0], &groups[1])),
            _ => None,
        }
    }

    /// `(edge, angle fraction)` in application order for one mixer call.
    fn sequence(&self, t1: usize, t2: usize) -> Vec<(Edge, f64)> {
        let frac = 1.0 / (t1 * t2) as f64;
        let mut out = Vec::new();
        for _ in 0..t1 {
            for ChainGroups(groups) in &self.chains {
                for _ in 0..t2 {
                    for group in groups {
                        out.extend(group.iter().map(|&e| (e, frac)));
                    }
                }
            }
        }
        out
    }
}

/// Edges of `graph` in path order if the graph is a single simple path
/// covering at least one edge.
fn path_order(graph: &XYGraph) -> Option<Vec<Edge>> {
    let edges = graph.edges();
    if edges.is_empty() {
        return None;
    }
    let n = graph.n();
    let mut adj = vec![Vec::new(); n];
    for &(a, b) in edges {
        adj[a].push(b);
        adj[b].push(a);
    }
    if adj.iter().any(|a| a.len() > 2) {
        return None;
    }
    let start = (0..n).find(|&v| adj[v].len() == 1)?;
    let mut path = Vec::with_capacity(edges.len());
    let (mut prev, mut cur) = (usize::MAX, start);
    loop {
        let next = adj[cur].iter().copied().find(|&x| x != prev);
        match next {
            Some(nx) => {
                path.push((cur, nx));
                prev = cur;
                cur = nx;
            }
            None => break,
        }
    }
    (path.len() == edges.len()).then_some(path)
}

/// A mixer compiled against one basis, reusable across angles.
#[derive(Debug, Clone)]
pub enum MixerPlan {
    Exact { eigen: Arc<Eigen> },
    Trotter { steps: Vec<(Arc<Vec<(usize, usize)>>, f64)> },
}

impl MixerPlan {
    pub fn new(
        graph: &XYGraph,
        chains: Option<&ChainDecomposition>,
        spec: MixerSpec,
        basis: &FeasibleBasis,
    ) -> Result<Self> {
        spec.validate()?;
        if graph.n() != basis.n() {
            return Err(Error::DimensionMismatch { expected: basis.n(), got: graph.n() });
        }
        match spec.kind {
            MixerKind::Exact => {
                let h = model::mixing_hamiltonian(graph, basis)?;
                Ok(Self::Exact { eigen: Arc::new(linalg::eigh(&h)?) })
            }
            MixerKind::Trotter => {
                let layout = MixerLayout::resolve(graph, chains)?;
                let mut cache: Vec<(Edge, Arc<Vec<(usize, usize)>>)> = Vec::new();
                let mut steps = Vec::new();
                for (edge, frac) in layout.sequence(spec.t1, spec.t2) {
                    let pairs = match cache.iter().find(|(e, _)| *e == edge) {
                        Some((_, p)) => p.clone(),
                        None => {
                            let p = Arc::new(basis.swap_pairs(edge.0, edge.1)?);
                            cache.push((edge, p.clone()));
                            p
                        }
                    };
                    steps.push((pairs, frac));
                }
                Ok(Self::Trotter { steps })
            }
        }
    }

    /// In-place mixer for angle `beta`; `scratch` must have the basis dimension.
    pub fn apply_in_place(&self, amplitudes: &mut [C64], beta: f64, scratch: &mut Vec<C64>) {
        match self {
            MixerPlan::Exact { eigen } => {
                let v = &eigen.vectors;
                let dim = amplitudes.len();
                scratch.clear();
                scratch.resize(dim, C64::new(0.0, 0.0));
                // scratch = diag(exp(-i beta lambda)) V^dagger psi
                for (j, s) in scratch.iter_mut().enumerate() {
                    let col = v.column(j);
                    let mut acc = C64::new(0.0, 0.0);
                    for r in 0..dim {
                        acc += col[r].conj() * amplitudes[r];
                    }
                    let (sn, cs) = (beta * eigen.values[j]).sin_cos();
                    *s = acc * C64::new(cs, -sn);
                }
                amplitudes.iter_mut().for_each(|a| *a = C64::new(0.0, 0.0));
                for (j, &s) in scratch.iter().enumerate() {
                    let col = v.column(j);
                    for r in 0..dim {
                        amplitudes[r] += col[r] * s;
                    }
                }
            }
            MixerPlan::Trotter { steps } => {
                for (pairs, frac) in steps {
                    rotate_pairs(amplitudes, pairs, beta * frac);
                }
            }
        }
    }

    pub fn apply(&self, state: &SubspaceState, beta: f64) -> SubspaceState {
        let mut out = state.clone();
        let mut scratch = Vec::new();
        self.apply_in_place(out.amplitudes_mut(), beta, &mut scratch);
        out
    }
}

pub fn apply_mixer(
    state: &SubspaceState,
    graph: &XYGraph,
    chains: Option<&ChainDecomposition>,
    beta: f64,
    spec: MixerSpec,
) -> Result<SubspaceState> {
    let plan = MixerPlan::new(graph, chains, spec, state.basis())?;
    Ok(plan.apply(state, beta))
}

/// Dense matrix of the mixer, column by column.
pub fn mixer_unitary(
    graph: &XYGraph,
    chains: Option<&ChainDecomposition>,
    beta: f64,
    spec: MixerSpec,
    basis: &BasisRef,
) -> Result<UnitaryMatrix> {
    let dim = basis.dim();
    if dim > MAX_DENSE_DIM {
        return Err(Error::DimensionCap { dim, cap: MAX_DENSE_DIM });
    }
    let plan = MixerPlan::new(graph, chains, spec, basis)?;
    let mut m = CMatrix::zeros(dim, dim);
    let mut col = vec![C64::new(0.0, 0.0); dim];
    let mut scratch = Vec::new();
    for c in 0..dim {
        col.iter_mut().for_each(|a| *a = C64::new(0.0, 0.0));
        col[c] = C64::new(1.0, 0.0);
        plan.apply_in_place(&mut col, beta, &mut scratch);
        m.set_column(c, &DVector::from_column_slice(&col));
    }
    UnitaryMatrix::new(m)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrotterError {
    /// `||U_exact - U_trotter||_2`; both are unitary, so this is also the
    /// relative error.
    pub error: f64,
    /// First-order commutator bound `beta^2 / (2T) ||[H_1, H_2]||_2`, only
    /// for layouts that split into exactly two commuting halves.
    pub bound: Option<f64>,
}

pub fn trotter_error(
    graph: &XYGraph,
    chains: Option<&ChainDecomposition>,
    beta: f64,
    spec: MixerSpec,
    basis: &BasisRef,
) -> Result<TrotterError> {
    let exact = mixer_unitary(graph, chains, beta, MixerSpec::exact(), basis)?;
    if spec.kind == MixerKind::Exact {
        return Ok(TrotterError { error: 0.0, bound: Some(0.0) });
    }
    let approx = mixer_unitary(graph, chains, beta, spec, basis)?;
    let error = linalg::spectral_norm(&(exact.matrix() - approx.matrix()));

    let layout = MixerLayout::resolve(graph, chains)?;
    let bound = match layout.two_way_split() {
        Some((a, b)) => {
            let ha = model::mixing_hamiltonian(&XYGraph::new(graph.n(), a.iter().copied())?, basis)?;
            let hb = model::mixing_hamiltonian(&XYGraph::new(graph.n(), b.iter().copied())?, basis)?;
            let comm = ha.matrix() * hb.matrix() - hb.matrix() * ha.matrix();
            let steps = (spec.t1 * spec.t2) as f64;
            Some(beta * beta / (2.0 * steps) * linalg::spectral_norm(&comm))
        }
        None => None,
    };
    Ok(TrotterError { error, bound })
}

#[derive(Debug, Clone)]
pub struct EffectiveGroundState {
    pub state: SubspaceState,
    pub gs_fidelity: f64,
    pub near_branch_cut: bool,
}

/// Eigenstate of `H_eff = i log U(beta)` with maximal overlap with `reference`.
///
/// Degenerate eigenvalue clusters of `H_eff` are scored as a whole: the
/// overlap is that of the reference's projection onto the cluster, and the
/// returned state is that normalized projection.
pub fn effective_ground_state(
    graph: &XYGraph,
    chains: Option<&ChainDecomposition>,
    beta: f64,
    spec: MixerSpec,
    basis: &BasisRef,
    reference: &SubspaceState,
) -> Result<EffectiveGroundState> {
    if reference.basis().as_ref() != basis.as_ref() {
        return Err(Error::BasisMismatch);
    }
    let u = mixer_unitary(graph, chains, beta, spec, basis)?;
    let log = linalg::logm_unitary(&u)?;
    let eig = linalg::eigh(&HermitianMatrix::new(log.hamiltonian.matrix().clone())?)?;
    let dim = basis.dim();
    let refv = reference.amplitudes();

    let overlaps: Vec<C64> = (0..dim)
        .map(|c| {
            let col = eig.vectors.column(c);
            (0..dim).map(|r| col[r].conj() * refv[r]).sum()
        })
        .collect();
    let mut best: Option<(f64, std::ops::Range<usize>)> = None;
    for range in eig.clusters(linalg::DEGENERACY_GAP) {
        let weight: f64 = overlaps[range.clone()].iter().map(|o| o.norm_sqr()).sum();
        if best.as_ref().is_none_or(|(w, _)| weight > *w) {
            best = Some((weight, range));
        }
    }
    let (weight, range) = best.ok_or(Error::ZeroState)?;
    let mut amps = vec![C64::new(0.0, 0.0); dim];
    for c in range {
        let col = eig.vectors.column(c);
        for r in 0..dim {
            amps[r] += col[r] * overlaps[c];
        }
    }
    let state = SubspaceState::normalized(basis.clone(), amps)?;
    let ref_norm = reference.norm().powi(2);
    Ok(EffectiveGroundState {
        state,
        gs_fidelity: (weight / ref_norm).min(1.0),
        near_branch_cut: log.near_branch_cut,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MixerAnalysis {
    pub beta: f64,
    pub relative_unitary_error: f64,
    pub gs_fidelity: f64,
}

pub fn analyze_mixer(
    graph: &XYGraph,
    chains: Option<&ChainDecomposition>,
    beta: f64,
    spec: MixerSpec,
    basis: &BasisRef,
    reference: &SubspaceState,
) -> Result<MixerAnalysis> {
    let err = trotter_error(graph, chains, beta, spec, basis)?;
    let gs = effective_ground_state(graph, chains, beta, spec, basis, reference)?;
    Ok(MixerAnalysis { beta, relative_unitary_error: err.error, gs_fidelity: gs.gs_fidelity })
}
