//! Synthetic portfolio instances, the hard-instance screen, and pool files.

use std::f64::consts::PI;
use std::fs;
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mixers::MixerSpec;
use crate::model::{chain_decomposition, complete_graph, ring_graph, PortfolioInstance};
use crate::qaoa::{Circuit, CircuitConfig, InitialStateSpec};
use crate::training::{p1_heatmap, select_rescaling_factor, RescaleGrid};

pub const PRICE_STEPS: usize = 252;
pub const START_PRICE: f64 = 100.0;
/// Per-step standard deviation relative to the current price.
pub const STEP_VOLATILITY: f64 = 0.01;

/// Seeded random-walk prices turned into mean returns and their sample
/// covariance. A pure function of its arguments.
pub fn generate_instance(n: usize, k: usize, q: f64, seed: u64) -> Result<PortfolioInstance> {
    if !(0 < k && k < n) {
        return Err(Error::InvalidInstance(format!("need 0 < k < n, got n = {n}, k = {k}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let returns: Vec<Vec<f64>> = (0..n)
        .map(|_| {
            let mut price = START_PRICE;
            (0..PRICE_STEPS)
                .map(|_| {
                    let z: f64 = StandardNormal.sample(&mut rng);
                    let next = price * (1.0 + STEP_VOLATILITY * z);
                    let r = (next - price) / price;
                    price = next;
                    r
                })
                .collect()
        })
        .collect();
    let m = PRICE_STEPS as f64;
    let mu: Vec<f64> = returns.iter().map(|r| r.iter().sum::<f64>() / m).collect();
    let mut w = vec![vec![0.0; n]; n];
    for i in 0..n {
        for j in i..n {
            let c = returns[i].iter().zip(&returns[j]).map(|(a, b)| (a - mu[i]) * (b - mu[j])).sum::<f64>() / (m - 1.0);
            w[i][j] = c;
            w[j][i] = c;
        }
    }
    let inst = PortfolioInstance {
        n,
        k,
        q,
        lambda: 1.0,
        mu,
        w,
        seed,
        provenance: format!("random-walk prices, {PRICE_STEPS} steps, seed {seed}"),
    };
    inst.validate()?;
    Ok(inst)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HardnessThresholds {
    pub ring: f64,
    pub complete: f64,
    pub ring_quota: usize,
    pub complete_quota: usize,
    /// Points per axis of the depth-1 screening grid.
    pub grid_points: usize,
    pub gamma_bounds: (f64, f64),
    pub beta_bounds: (f64, f64),
}

impl Default for HardnessThresholds {
    fn default() -> Self {
        Self {
            ring: 0.8,
            complete: 0.85,
            ring_quota: 5,
            complete_quota: 5,
            grid_points: 101,
            gamma_bounds: (0.0, 2.0 * PI),
            beta_bounds: (0.0, PI),
        }
    }
}

impl HardnessThresholds {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.ring) || !(0.0..=1.0).contains(&self.complete) {
            return Err(Error::InvalidParams("hardness thresholds must lie in [0, 1]".into()));
        }
        if self.grid_points == 0 {
            return Err(Error::InvalidParams("screening grid needs at least one point".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScreenBucket {
    Ring,
    Complete,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScreenPoint {
    pub ar: f64,
    pub gamma: f64,
    pub beta: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FilterEntry {
    pub seed: u64,
    pub ring: ScreenPoint,
    pub complete: ScreenPoint,
    pub bucket: ScreenBucket,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InstancePool {
    pub instances: Vec<PortfolioInstance>,
    /// One entry per instance, same order.
    pub filter_report: Vec<FilterEntry>,
}

impl InstancePool {
    pub fn len(&self) -> usize {
        self.instances.len()
    }

    pub fn is_empty(&self) -> bool {
        self.instances.is_empty()
    }
}

fn screen_one(inst: &PortfolioInstance, th: &HardnessThresholds) -> Result<(ScreenPoint, ScreenPoint)> {
    let ring = CircuitConfig::new(ring_graph(inst.n)?, MixerSpec::trotter(1, 1), InitialStateSpec::Dicke);
    let complete = CircuitConfig::new(complete_graph(inst.n)?, MixerSpec::trotter(1, 1), InitialStateSpec::Dicke)
        .with_chains(chain_decomposition(inst.n)?);
    let best = |config: &CircuitConfig| -> Result<ScreenPoint> {
        let circuit = Circuit::new(inst, config)?;
        let h = p1_heatmap(&circuit, th.gamma_bounds, th.beta_bounds, th.grid_points, th.grid_points)?;
        let (i, j, ar) = h.best();
        Ok(ScreenPoint { ar, gamma: h.gammas[i], beta: h.betas[j] })
    };
    Ok((best(&ring)?, best(&complete)?))
}

/// Keeps candidates, in order, until both quotas are met. A candidate fills
/// the ring quota when its ring AR is below threshold, otherwise the
/// complete quota when its complete AR is below threshold.
pub fn hardness_filter(candidates: &[PortfolioInstance], th: &HardnessThresholds) -> Result<InstancePool> {
    screen_candidates(candidates.iter().cloned().map(Ok), th)
}

fn screen_candidates(
    candidates: impl Iterator<Item = Result<PortfolioInstance>>,
    th: &HardnessThresholds,
) -> Result<InstancePool> {
    th.validate()?;
    let mut pool = InstancePool { instances: Vec::new(), filter_report: Vec::new() };
    let (mut n_ring, mut n_complete) = (0, 0);
    let full = |r: usize, c: usize| r >= th.ring_quota && c >= th.complete_quota;
    let chunk = (2 * rayon::current_num_threads()).max(4);
    let mut candidates = candidates.peekable();
    let mut screened = 0usize;
    while !full(n_ring, n_complete) && candidates.peek().is_some() {
        let batch: Vec<PortfolioInstance> = candidates.by_ref().take(chunk).collect::<Result<_>>()?;
        let results: Vec<Result<(ScreenPoint, ScreenPoint)>> = batch.par_iter().map(|c| screen_one(c, th)).collect();
        for (inst, res) in batch.into_iter().zip(results) {
            if full(n_ring, n_complete) {
                break;
            }
            screened += 1;
            let (ring, complete) = res?;
            let bucket = if ring.ar < th.ring && n_ring < th.ring_quota {
                n_ring += 1;
                ScreenBucket::Ring
            } else if complete.ar < th.complete && n_complete < th.complete_quota {
                n_complete += 1;
                ScreenBucket::Complete
            } else {
                continue;
            };
            pool.filter_report.push(FilterEntry { seed: inst.seed, ring, complete, bucket });
            pool.instances.push(inst);
        }
    }
    if !full(n_ring, n_complete) {
        log::warn!(
            "candidate pool exhausted after {screened} candidates: {n_ring}/{} ring, {n_complete}/{} complete",
            th.ring_quota,
            th.complete_quota
        );
    }
    Ok(pool)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkSpec {
    pub n: usize,
    pub k: usize,
    pub q: f64,
    pub first_seed: u64,
    pub max_candidates: usize,
    pub thresholds: HardnessThresholds,
    /// Selects lambda per candidate before screening when present.
    pub rescale: Option<RescaleGrid>,
}

impl Default for BenchmarkSpec {
    fn default() -> Self {
        Self {
            n: 6,
            k: 3,
            q: crate::model::DEFAULT_RISK_FACTOR,
            first_seed: 0,
            max_candidates: 200,
            thresholds: HardnessThresholds::default(),
            rescale: Some(RescaleGrid::default()),
        }
    }
}

/// Generates candidates from consecutive seeds, rescales each one, and screens
/// them until the quotas are met.
pub fn build_benchmark(spec: &BenchmarkSpec) -> Result<InstancePool> {
    // rescaling is the expensive part; run it a chunk at a time in parallel
    let chunk = (2 * rayon::current_num_threads()).max(4);
    let seeds: Vec<u64> = (0..spec.max_candidates as u64).collect();
    let prepared = seeds.chunks(chunk).flat_map(move |c| {
        let done: Vec<Result<PortfolioInstance>> = c
            .par_iter()
            .map(|&i| {
                let inst = generate_instance(spec.n, spec.k, spec.q, spec.first_seed + i)?;
                match &spec.rescale {
                    Some(grid) => Ok(inst.with_lambda(select_rescaling_factor(&inst, grid)?.lambda)),
                    None => Ok(inst),
                }
            })
            .collect();
        done
    });
    screen_candidates(prepared, &spec.thresholds)
}

pub fn save_instances(pool: &InstancePool, path: &Path) -> Result<()> {
    let text = serde_json::to_string_pretty(pool).map_err(|e| Error::Parse {
        line: 0,
        column: 0,
        message: e.to_string(),
    })?;
    fs::write(path, text + "\n")?;
    Ok(())
}

pub fn load_instances(path: &Path) -> Result<InstancePool> {
    parse_instances(&fs::read_to_string(path)?)
}

pub fn parse_instances(text: &str) -> Result<InstancePool> {
    let value: serde_json::Value = serde_json::from_str(text)
        .map_err(|e| Error::Parse { line: e.line(), column: e.column(), message: e.to_string() })?;
    if let Some(list) = value.get("instances").and_then(|v| v.as_array()) {
        for (i, inst) in list.iter().enumerate() {
            if inst.get("lambda").is_none() {
                log::warn!("instance {i} has no \"lambda\" field; using 1");
            }
        }
    }
    let pool: InstancePool = serde_json::from_value(value)
        .map_err(|e| Error::Parse { line: e.line(), column: e.column(), message: e.to_string() })?;
    if pool.filter_report.len() != pool.instances.len() && !pool.filter_report.is_empty() {
        return Err(Error::Parse {
            line: 0,
            column: 0,
            message: format!(
                "{} instances but {} filter report entries",
                pool.instances.len(),
                pool.filter_report.len()
            ),
        });
    }
    for inst in &pool.instances {
        inst.validate()?;
    }
    Ok(pool)
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::{DMatrix, SymmetricEigen};

    #[test]
    fn generation_is_deterministic() {
        let a = generate_instance(6, 3, 0.5, 11).unwrap();
        let b = generate_instance(6, 3, 0.5, 11).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.lambda, 1.0);
        let c = generate_instance(6, 3, 0.5, 12).unwrap();
        assert_ne!(a.mu, c.mu);
        assert!(generate_instance(4, 4, 0.5, 0).is_err());
    }

    #[test]
    fn covariance_is_symmetric_psd() {
        for seed in 0..10 {
            let inst = generate_instance(8, 4, 0.5, seed).unwrap();
            for i in 0..8 {
                for j in 0..8 {
                    assert_eq!(inst.w[i][j], inst.w[j][i]);
                }
            }
            let m = DMatrix::from_fn(8, 8, |i, j| inst.w[i][j]);
            let min = SymmetricEigen::new(m).eigenvalues.min();
            assert!(min >= -1e-12);
        }
    }

    #[test]
    fn return_statistics_match_the_walk() {
        // relative returns are 1% Gaussian steps, so variances sit near 1e-4
        let inst = generate_instance(10, 5, 0.5, 3).unwrap();
        for i in 0..10 {
            assert!((0.5e-4..2e-4).contains(&inst.w[i][i]), "{}", inst.w[i][i]);
            assert!(inst.mu[i].abs() < 5.0 * 0.01 / (PRICE_STEPS as f64).sqrt());
        }
    }

    fn candidates(count: u64) -> Vec<PortfolioInstance> {
        (0..count).map(|s| generate_instance(6, 3, 0.5, s).unwrap()).collect()
    }

    fn coarse(ring: f64, complete: f64) -> HardnessThresholds {
        HardnessThresholds { ring, complete, grid_points: 11, ..Default::default() }
    }

    #[test]
    fn vacuous_filter_keeps_first_ten() {
        let cands = candidates(14);
        let pool = hardness_filter(&cands, &coarse(1.0, 1.0)).unwrap();
        assert_eq!(pool.len(), 10);
        let seeds: Vec<u64> = pool.instances.iter().map(|i| i.seed).collect();
        assert_eq!(seeds, (0..10).collect::<Vec<_>>());
        assert_eq!(pool.filter_report.iter().filter(|e| e.bucket == ScreenBucket::Ring).count(), 5);
    }

    #[test]
    fn impossible_filter_is_empty() {
        let pool = hardness_filter(&candidates(6), &coarse(0.0, 0.0)).unwrap();
        assert!(pool.is_empty());
        assert!(hardness_filter(&candidates(1), &coarse(1.5, 0.5)).is_err());
    }

    #[test]
    fn retained_entries_are_below_threshold() {
        let cands: Vec<PortfolioInstance> = candidates(40)
            .into_iter()
            .map(|i| {
                let l = select_rescaling_factor(&i, &RescaleGrid { gamma_points: 11, beta_points: 11, ..Default::default() })
                    .unwrap()
                    .lambda;
                i.with_lambda(l)
            })
            .collect();
        let th = coarse(0.8, 0.85);
        let pool = hardness_filter(&cands, &th).unwrap();
        for e in &pool.filter_report {
            match e.bucket {
                ScreenBucket::Ring => assert!(e.ring.ar < th.ring),
                ScreenBucket::Complete => assert!(e.complete.ar < th.complete),
            }
        }
        let again = hardness_filter(&cands, &th).unwrap();
        assert_eq!(pool, again);
    }

    #[test]
    fn benchmark_pipeline_matches_manual_steps() {
        let spec = BenchmarkSpec {
            max_candidates: 12,
            thresholds: coarse(1.0, 1.0),
            rescale: Some(RescaleGrid { gamma_points: 7, beta_points: 7, ..Default::default() }),
            ..Default::default()
        };
        let pool = build_benchmark(&spec).unwrap();
        assert_eq!(pool.len(), 10);
        let first = generate_instance(6, 3, 0.5, 0).unwrap();
        let lambda = select_rescaling_factor(&first, spec.rescale.as_ref().unwrap()).unwrap().lambda;
        assert_eq!(pool.instances[0], first.with_lambda(lambda));
    }

    #[test]
    fn save_load_round_trip() {
        let pool = hardness_filter(&candidates(10), &coarse(1.0, 1.0)).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("pool.json");
        save_instances(&pool, &path).unwrap();
        let back = load_instances(&path).unwrap();
        assert_eq!(pool, back);
        for (a, b) in pool.instances.iter().zip(&back.instances) {
            for (x, y) in a.w.iter().flatten().zip(b.w.iter().flatten()) {
                assert_eq!(x.to_bits(), y.to_bits());
            }
        }
    }

    #[test]
    fn malformed_files() {
        let pool = hardness_filter(&candidates(10), &coarse(1.0, 1.0)).unwrap();
        let text = serde_json::to_string_pretty(&pool).unwrap();
        let truncated = &text[..text.len() / 2];
        match parse_instances(truncated) {
            Err(Error::Parse { line, .. }) => assert!(line > 1),
            other => panic!("expected parse error, got {other:?}"),
        }

        let mut value: serde_json::Value = serde_json::from_str(&text).unwrap();
        value["instances"][0].as_object_mut().unwrap().remove("lambda");
        let back = parse_instances(&value.to_string()).unwrap();
        assert_eq!(back.instances[0].lambda, 1.0);
    }
}
