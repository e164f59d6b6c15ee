//! Depth-p QAOA circuits evaluated in the feasible subspace.

use std::collections::BTreeMap;
use std::sync::Arc;

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mixers::{MixerPlan, MixerSpec};
use crate::model::{self, ChainDecomposition, Extrema, MixerConvention, PortfolioInstance, XYGraph};
use crate::subspace::{self, phase_in_place, BasisRef, SubspaceState};
use crate::C64;

#[derive(Debug, Clone, PartialEq)]
pub enum InitialStateSpec {
    /// Extremal eigenstate of the graph's mixing Hamiltonian.
    AlignedTo(XYGraph),
    Dicke,
    /// Amplitudes over the feasible basis; renormalized on use.
    Explicit(Vec<C64>),
}

pub fn initial_state(
    spec: &InitialStateSpec,
    basis: &BasisRef,
    convention: MixerConvention,
) -> Result<SubspaceState> {
    match spec {
        InitialStateSpec::AlignedTo(graph) => model::aligned_state(graph, basis, convention),
        InitialStateSpec::Dicke => Ok(subspace::dicke_state(basis)),
        InitialStateSpec::Explicit(amps) => SubspaceState::normalized(basis.clone(), amps.clone()),
    }
}

/// Phase angles `gammas` and mixer angles `betas`, layer 1 first.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QaoaParams {
    pub gammas: Vec<f64>,
    pub betas: Vec<f64>,
}

impl QaoaParams {
    pub fn new(gammas: Vec<f64>, betas: Vec<f64>) -> Result<Self> {
        if gammas.len() != betas.len() || gammas.is_empty() {
            return Err(Error::InvalidParams(format!(
                "need equal, non-zero gamma/beta lengths, got {} and {}",
                gammas.len(),
                betas.len()
            )));
        }
        Ok(Self { gammas, betas })
    }

    pub fn depth(&self) -> usize {
        self.gammas.len()
    }

    /// Flat `[gammas..., betas...]`.
    pub fn to_vec(&self) -> Vec<f64> {
        self.gammas.iter().chain(&self.betas).copied().collect()
    }

    pub fn from_slice(flat: &[f64]) -> Result<Self> {
        if flat.len() % 2 != 0 {
            return Err(Error::InvalidParams("flat parameter vector has odd length".into()));
        }
        let p = flat.len() / 2;
        Self::new(flat[..p].to_vec(), flat[p..].to_vec())
    }
}

/// Everything about a circuit except the instance and the angles.
#[derive(Debug, Clone)]
pub struct CircuitConfig {
    pub mixer_graph: XYGraph,
    pub chains: Option<ChainDecomposition>,
    pub mixer: MixerSpec,
    pub init: InitialStateSpec,
    pub convention: MixerConvention,
}

impl CircuitConfig {
    pub fn new(mixer_graph: XYGraph, mixer: MixerSpec, init: InitialStateSpec) -> Self {
        Self { mixer_graph, chains: None, mixer, init, convention: MixerConvention::default() }
    }

    pub fn with_chains(mut self, chains: ChainDecomposition) -> Self {
        self.chains = Some(chains);
        self
    }
}

#[derive(Debug, Clone)]
pub struct CircuitResult {
    pub final_state: SubspaceState,
    pub energy: f64,
    pub expected_ar: f64,
}

/// A circuit compiled for one instance: phase diagonal, mixer plan, initial
/// state and extrema are computed once and shared by every evaluation.
#[derive(Debug, Clone)]
pub struct Circuit {
    instance: PortfolioInstance,
    basis: BasisRef,
    diag: Arc<Vec<f64>>,
    extrema: Arc<Extrema>,
    plan: Arc<MixerPlan>,
    initial: SubspaceState,
    angle_sign: f64,
}

impl Circuit {
    pub fn new(inst: &PortfolioInstance, config: &CircuitConfig) -> Result<Self> {
        inst.validate()?;
        let basis = subspace::enumerate_basis(inst.n, inst.k)?;
        let diag = model::ising_diagonal(inst, &basis)?;
        let extrema = model::brute_force_extrema(inst)?;
        let plan = MixerPlan::new(&config.mixer_graph, config.chains.as_ref(), config.mixer, &basis)?;
        let initial = initial_state(&config.init, &basis, config.convention)?;
        Ok(Self {
            instance: inst.clone(),
            basis,
            diag: Arc::new(diag),
            extrema: Arc::new(extrema),
            plan: Arc::new(plan),
            initial,
            angle_sign: config.convention.angle_sign(),
        })
    }

    pub fn instance(&self) -> &PortfolioInstance {
        &self.instance
    }

    pub fn basis(&self) -> &BasisRef {
        &self.basis
    }

    pub fn diagonal(&self) -> &[f64] {
        &self.diag
    }

    pub fn extrema(&self) -> &Extrema {
        &self.extrema
    }

    pub fn initial(&self) -> &SubspaceState {
        &self.initial
    }

    /// Final state for the given angles.
    pub fn state(&self, gammas: &[f64], betas: &[f64]) -> SubspaceState {
        let mut state = self.initial.clone();
        let mut scratch = Vec::with_capacity(self.basis.dim());
        for (&g, &b) in gammas.iter().zip(betas) {
            phase_in_place(state.amplitudes_mut(), &self.diag, g);
            self.plan.apply_in_place(state.amplitudes_mut(), self.angle_sign * b, &mut scratch);
        }
        state
    }

    pub fn energy_of(&self, state: &SubspaceState) -> f64 {
        state.amplitudes().iter().zip(self.diag.iter()).map(|(a, d)| a.norm_sqr() * d).sum()
    }

    pub fn energy(&self, gammas: &[f64], betas: &[f64]) -> f64 {
        self.energy_of(&self.state(gammas, betas))
    }

    /// Energy for a flat `[gammas..., betas...]` vector.
    pub fn energy_flat(&self, flat: &[f64]) -> f64 {
        let p = flat.len() / 2;
        self.energy(&flat[..p], &flat[p..])
    }

    /// Expected approximation ratio of a state with the given energy. The
    /// simulated support is always feasible, so this is an affine map.
    pub fn ratio(&self, energy: f64) -> f64 {
        self.extrema.ratio_of_value(energy)
    }

    pub fn evaluate(&self, params: &QaoaParams) -> CircuitResult {
        let final_state = self.state(&params.gammas, &params.betas);
        let energy = self.energy_of(&final_state);
        CircuitResult { final_state, energy, expected_ar: self.ratio(energy) }
    }

    pub fn initial_energy(&self) -> f64 {
        self.energy_of(&self.initial)
    }
}

/// Alternates `exp(-i gamma_l H_P)` and the mixer for `l = 1..p`.
pub fn run_circuit(
    inst: &PortfolioInstance,
    config: &CircuitConfig,
    params: &QaoaParams,
) -> Result<CircuitResult> {
    Ok(Circuit::new(inst, config)?.evaluate(params))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SampleSummary {
    pub shots: usize,
    /// Bitstring -> number of occurrences.
    pub counts: BTreeMap<u64, usize>,
    pub mean_ar: f64,
    pub std_ar: f64,
    pub min_ar: f64,
    pub max_ar: f64,
    pub best_bitstring: u64,
}

/// Draws `shots` computational-basis samples from `state`.
pub fn sample_measurements(
    state: &SubspaceState,
    inst: &PortfolioInstance,
    extrema: &Extrema,
    shots: usize,
    seed: u64,
) -> Result<SampleSummary> {
    if shots == 0 {
        return Err(Error::InvalidParams("shots must be positive".into()));
    }
    let dist = WeightedIndex::new(state.probabilities())
        .map_err(|e| Error::InvalidParams(format!("cannot sample state: {e}")))?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let basis = state.basis();
    let mut counts = BTreeMap::new();
    for _ in 0..shots {
        *counts.entry(basis.state(dist.sample(&mut rng))).or_insert(0usize) += 1;
    }
    let ars: Vec<(u64, usize, f64)> =
        counts.iter().map(|(&x, &c)| (x, c, model::approximation_ratio(inst, extrema, x))).collect();
    let total = shots as f64;
    let mean_ar = ars.iter().map(|&(_, c, a)| c as f64 * a).sum::<f64>() / total;
    let var = ars.iter().map(|&(_, c, a)| c as f64 * (a - mean_ar).powi(2)).sum::<f64>() / total;
    let min_ar = ars.iter().map(|t| t.2).fold(f64::INFINITY, f64::min);
    let max_ar = ars.iter().map(|t| t.2).fold(f64::NEG_INFINITY, f64::max);
    let best_bitstring = ars.iter().find(|t| t.2 == max_ar).map(|t| t.0).unwrap_or(0);
    Ok(SampleSummary { shots, counts, mean_ar, std_ar: var.sqrt(), min_ar, max_ar, best_bitstring })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{chain_decomposition, complete_graph, ring_graph};
    use crate::oracle;
    use crate::subspace::{dicke_state, enumerate_basis, fidelity};
    use nalgebra::DVector;
    use rand::{Rng, SeedableRng};

    fn instance(seed: u64) -> PortfolioInstance {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n = 6;
        let mu = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
        let mut w = vec![vec![0.0; n]; n];
        for i in 0..n {
            for j in 0..=i {
                let v = rng.random_range(-0.5..0.5);
                w[i][j] = v;
                w[j][i] = v;
            }
        }
        PortfolioInstance { n, k: 3, q: 0.5, lambda: 1.0, mu, w, seed, provenance: String::new() }
    }

    fn ring_config(spec: MixerSpec, init: InitialStateSpec) -> CircuitConfig {
        CircuitConfig::new(ring_graph(6).unwrap(), spec, init)
    }

    #[test]
    fn initial_states() {
        let basis = enumerate_basis(6, 3).unwrap();
        let aligned = initial_state(
            &InitialStateSpec::AlignedTo(complete_graph(6).unwrap()),
            &basis,
            MixerConvention::Maximal,
        )
        .unwrap();
        assert!((fidelity(&aligned, &dicke_state(&basis)).unwrap() - 1.0).abs() < 1e-9);

        let b2 = enumerate_basis(2, 1).unwrap();
        let d = initial_state(&InitialStateSpec::Dicke, &b2, MixerConvention::Maximal).unwrap();
        assert!((d.amplitudes()[0].re - 0.5f64.sqrt()).abs() < 1e-15);

        let ring = InitialStateSpec::AlignedTo(ring_graph(6).unwrap());
        let a = initial_state(&ring, &basis, MixerConvention::Maximal).unwrap();
        let b = initial_state(&ring, &basis, MixerConvention::Maximal).unwrap();
        assert_eq!(a.amplitudes(), b.amplitudes());

        let explicit = InitialStateSpec::Explicit(vec![C64::new(3.0, 0.0), C64::new(0.0, 4.0)]);
        let e = initial_state(&explicit, &b2, MixerConvention::Maximal).unwrap();
        assert!((e.amplitudes()[1].im - 0.8).abs() < 1e-15);
        let zero = InitialStateSpec::Explicit(vec![C64::new(0.0, 0.0); 2]);
        assert!(initial_state(&zero, &b2, MixerConvention::Maximal).is_err());
    }

    #[test]
    fn params_validation() {
        assert!(QaoaParams::new(vec![], vec![]).is_err());
        assert!(QaoaParams::new(vec![1.0], vec![1.0, 2.0]).is_err());
        let p = QaoaParams::new(vec![1.0, 2.0], vec![3.0, 4.0]).unwrap();
        assert_eq!(QaoaParams::from_slice(&p.to_vec()).unwrap(), p);
    }

    #[test]
    fn zero_angles_leave_initial_state() {
        let inst = instance(1);
        let config = ring_config(MixerSpec::exact(), InitialStateSpec::AlignedTo(ring_graph(6).unwrap()));
        let circuit = Circuit::new(&inst, &config).unwrap();
        let r = circuit.evaluate(&QaoaParams::new(vec![0.0; 4], vec![0.0; 4]).unwrap());
        assert!(fidelity(&r.final_state, circuit.initial()).unwrap() > 1.0 - 1e-12);
        assert!((r.energy - circuit.initial_energy()).abs() < 1e-12);
    }

    #[test]
    fn global_phase_cost_keeps_ar() {
        let mut inst = instance(2);
        // constant objective on the weight-3 basis: only mu terms, all equal
        inst.w = vec![vec![0.0; 6]; 6];
        inst.mu = vec![0.3; 6];
        let config = ring_config(MixerSpec::exact(), InitialStateSpec::Dicke);
        let circuit = Circuit::new(&inst, &config).unwrap();
        let p0 = circuit.ratio(circuit.initial_energy());
        let r = circuit.evaluate(&QaoaParams::new(vec![0.7, 1.9], vec![0.0, 0.0]).unwrap());
        assert!((r.expected_ar - p0).abs() < 1e-12);
    }

    #[test]
    fn depth_one_matches_full_space_oracle() {
        let inst = instance(3);
        let n = inst.n;
        let basis = enumerate_basis(n, inst.k).unwrap();
        for (graph, spec_init) in [
            (ring_graph(6).unwrap(), InitialStateSpec::AlignedTo(ring_graph(6).unwrap())),
            (complete_graph(6).unwrap(), InitialStateSpec::Dicke),
        ] {
            let config = CircuitConfig::new(graph.clone(), MixerSpec::exact(), spec_init);
            let circuit = Circuit::new(&inst, &config).unwrap();
            let (gamma, beta) = (0.83, 0.41);
            let got = circuit.evaluate(&QaoaParams::new(vec![gamma], vec![beta]).unwrap());

            let dim = 1usize << n;
            let f: Vec<f64> = (0..dim as u64)
                .map(|x| oracle::objective_loops(n, inst.q, inst.lambda, &inst.mu, &inst.w, x))
                .collect();
            let phase = DVector::from_iterator(dim, f.iter().map(|&v| C64::new((gamma * v).cos(), -(gamma * v).sin())));
            // default convention evolves under -H_XY
            let mixer = oracle::expm_minus_i(&oracle::xy_hamiltonian(n, graph.edges()), -beta);
            let psi0 = oracle::embed(circuit.initial());
            let psi = mixer * psi0.component_mul(&phase);
            let energy: f64 = psi.iter().zip(&f).map(|(a, v)| a.norm_sqr() * v).sum();
            assert!((got.energy - energy).abs() < 1e-9);
            let leaked: f64 = (0..dim).filter(|&x| (x as u64).count_ones() != 3).map(|x| psi[x].norm_sqr()).sum();
            assert!(leaked < 1e-12);
            let sub = oracle::project_vector(&psi, &basis);
            for (a, b) in got.final_state.amplitudes().iter().zip(&sub) {
                assert!((a - b).norm() < 1e-9);
            }
        }
    }

    #[test]
    fn expected_ar_is_affine_in_energy() {
        let inst = instance(4).with_lambda(3.0);
        let config = ring_config(MixerSpec::trotter(2, 1), InitialStateSpec::Dicke);
        let circuit = Circuit::new(&inst, &config).unwrap();
        let ex = circuit.extrema().clone();
        for seed in 0..20u64 {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let p = 1 + seed as usize % 3;
            let g: Vec<f64> = (0..p).map(|_| rng.random_range(0.0..6.0)).collect();
            let b: Vec<f64> = (0..p).map(|_| rng.random_range(0.0..3.0)).collect();
            let r = circuit.evaluate(&QaoaParams::new(g, b).unwrap());
            let affine = (r.energy - ex.f_max) / (ex.f_min - ex.f_max);
            assert!((r.expected_ar - affine).abs() < 1e-9);
            assert!((0.0..=1.0).contains(&r.expected_ar));
        }
    }

    #[test]
    fn rescaling_lambda_equals_scaling_gamma() {
        let dec = chain_decomposition(6).unwrap();
        let base = instance(5);
        let config = CircuitConfig::new(complete_graph(6).unwrap(), MixerSpec::trotter(2, 1), InitialStateSpec::Dicke)
            .with_chains(dec);
        let c1 = Circuit::new(&base, &config).unwrap();
        for c in [10.0, 50.0, 1000.0] {
            let cc = Circuit::new(&base.with_lambda(c), &config).unwrap();
            let (g, b) = (vec![0.0123, 0.0071], vec![0.4, 1.1]);
            let scaled: Vec<f64> = g.iter().map(|x| x * c).collect();
            let s1 = cc.state(&g, &b);
            let s2 = c1.state(&scaled, &b);
            assert!(fidelity(&s1, &s2).unwrap() >= 1.0 - 1e-12);
        }
    }

    #[test]
    fn sampling() {
        let inst = instance(6);
        let config = ring_config(MixerSpec::exact(), InitialStateSpec::Dicke);
        let circuit = Circuit::new(&inst, &config).unwrap();
        let basis = circuit.basis().clone();

        let point = SubspaceState::basis_state(basis.clone(), 0b000111).unwrap();
        let s = sample_measurements(&point, &inst, circuit.extrema(), 50, 1).unwrap();
        assert_eq!(s.counts.len(), 1);
        assert_eq!(s.counts[&0b000111], 50);

        // uniform-feasible baseline: exact mean of per-state AR
        let d = dicke_state(&basis);
        let baseline: f64 = basis
            .states()
            .iter()
            .map(|&x| model::approximation_ratio(&inst, circuit.extrema(), x))
            .sum::<f64>()
            / basis.dim() as f64;
        let s = sample_measurements(&d, &inst, circuit.extrema(), 200_000, 7).unwrap();
        assert!((s.mean_ar - baseline).abs() < 5e-3);
        assert!((circuit.ratio(circuit.energy_of(&d)) - baseline).abs() < 1e-12);

        let again = sample_measurements(&d, &inst, circuit.extrema(), 1000, 99).unwrap();
        let twice = sample_measurements(&d, &inst, circuit.extrema(), 1000, 99).unwrap();
        assert_eq!(again, twice);
        assert!(sample_measurements(&d, &inst, circuit.extrema(), 0, 1).is_err());
    }
}
