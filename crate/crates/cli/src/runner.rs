//! Executes experiment configs and writes CSV results plus a manifest.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{bail, Context};
use rayon::prelude::*;
use serde::Serialize;
use xyqaoa::instances::{build_benchmark, load_instances, save_instances, BenchmarkSpec, InstancePool};
use xyqaoa::mixers::{analyze_mixer, trotter_error, MixerSpec};
use xyqaoa::model::{aligned_state, MixerConvention, PortfolioInstance};
use xyqaoa::qaoa::{Circuit, CircuitConfig};
use xyqaoa::subspace::{dicke_state, enumerate_basis};
use xyqaoa::training::{
    optimize_nested, optimize_ols, optimize_unrestricted, select_rescaling_factor_with, RescaleGrid,
    TrainResult,
};

use crate::config::{ExperimentConfig, HeatmapSpec, MixerAnalysisSpec, Reference, RunSpec, Schedule};

pub const RESULTS_FILE: &str = "results.csv";
pub const MANIFEST_FILE: &str = "manifest.json";
pub const MIXER_FILE: &str = "mixer_analysis.csv";
pub const HEATMAP_FILE: &str = "heatmaps.csv";
pub const RESCALE_FILE: &str = "rescale_selection.csv";
pub const INSTANCES_FILE: &str = "instances.json";

pub const RESULT_HEADER: [&str; 15] = [
    "instance",
    "instance_seed",
    "init",
    "mixer",
    "mixer_spec",
    "schedule",
    "p",
    "best_ar",
    "best_energy",
    "gammas",
    "betas",
    "delta",
    "wall_time",
    "master_seed",
    "error",
];

/// 17 significant digits.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

fn fmt_list(v: &[f64]) -> String {
    v.iter().map(|x| fmt_f64(*x)).collect::<Vec<_>>().join(";")
}

#[derive(Debug, Clone, PartialEq)]
pub struct ResultRow {
    pub instance: usize,
    pub instance_seed: u64,
    pub init: String,
    pub mixer: String,
    pub mixer_spec: String,
    pub schedule: String,
    pub p: usize,
    pub outcome: Result<Outcome, String>,
    pub wall_time: f64,
    pub master_seed: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Outcome {
    pub best_ar: f64,
    pub best_energy: f64,
    pub gammas: Vec<f64>,
    pub betas: Vec<f64>,
    pub delta: Option<f64>,
}

impl From<&TrainResult> for Outcome {
    fn from(r: &TrainResult) -> Self {
        Self {
            best_ar: r.best_ar,
            best_energy: r.best_energy,
            gammas: r.best_params.gammas.clone(),
            betas: r.best_params.betas.clone(),
            delta: r.delta,
        }
    }
}

impl ResultRow {
    pub fn record(&self) -> Vec<String> {
        let (ar, e, g, b, d, err) = match &self.outcome {
            Ok(o) => (
                fmt_f64(o.best_ar),
                fmt_f64(o.best_energy),
                fmt_list(&o.gammas),
                fmt_list(&o.betas),
                o.delta.map(fmt_f64).unwrap_or_default(),
                String::new(),
            ),
            Err(msg) => (String::new(), String::new(), String::new(), String::new(), String::new(), msg.clone()),
        };
        vec![
            self.instance.to_string(),
            self.instance_seed.to_string(),
            self.init.clone(),
            self.mixer.clone(),
            self.mixer_spec.clone(),
            self.schedule.clone(),
            self.p.to_string(),
            ar,
            e,
            g,
            b,
            d,
            fmt_f64(self.wall_time),
            self.master_seed.to_string(),
            err,
        ]
    }
}

fn circuit_for(inst: &PortfolioInstance, run: &RunSpec) -> xyqaoa::Result<Circuit> {
    let (graph, chains) = run.mixer.0.resolve(inst.n)?;
    let mut config = CircuitConfig::new(graph, run.spec, run.init.resolve(inst.n)?);
    config.chains = chains;
    Circuit::new(inst, &config)
}

/// All rows of one (instance, run) pair, in depth order.
fn run_unit(cfg: &ExperimentConfig, index: usize, inst: &PortfolioInstance, run: &RunSpec) -> Vec<ResultRow> {
    let row = |p: usize, outcome: Result<Outcome, String>, wall_time: f64| ResultRow {
        instance: index,
        instance_seed: inst.seed,
        init: run.init.to_string(),
        mixer: run.mixer.to_string(),
        mixer_spec: run.spec.label(),
        schedule: run.schedule.name().to_string(),
        p,
        outcome,
        wall_time,
        master_seed: cfg.seed,
    };
    let depths = run.schedule.depths();
    let start = Instant::now();
    let circuit = match circuit_for(inst, run) {
        Ok(c) => c,
        Err(e) => return depths.iter().map(|&p| row(p, Err(e.to_string()), 0.0)).collect(),
    };
    match &run.schedule {
        Schedule::Unrestricted { depths } if cfg.optimizer.nested => {
            let p_max = depths.iter().copied().max().unwrap_or(0);
            match optimize_nested(&circuit, p_max, |p| cfg.optimizer.for_depth(p, cfg.seed)) {
                Ok(levels) => {
                    let elapsed = start.elapsed().as_secs_f64();
                    depths.iter().map(|&p| row(p, Ok(Outcome::from(&levels[p - 1])), elapsed)).collect()
                }
                Err(e) => depths.iter().map(|&p| row(p, Err(e.to_string()), 0.0)).collect(),
            }
        }
        Schedule::Unrestricted { depths } => depths
            .iter()
            .map(|&p| {
                let t = Instant::now();
                let r = optimize_unrestricted(&circuit, p, &cfg.optimizer.for_depth(p, cfg.seed));
                row(p, r.as_ref().map(Outcome::from).map_err(|e| e.to_string()), t.elapsed().as_secs_f64())
            })
            .collect(),
        Schedule::Ols { depths } => depths
            .iter()
            .map(|&p| {
                let t = Instant::now();
                let r = optimize_ols(&circuit, p, &cfg.ols);
                row(p, r.as_ref().map(Outcome::from).map_err(|e| e.to_string()), t.elapsed().as_secs_f64())
            })
            .collect(),
    }
}

fn validate_runs(cfg: &ExperimentConfig) -> anyhow::Result<()> {
    for run in &cfg.runs {
        run.spec.validate()?;
        if run.schedule.depths().is_empty() || run.schedule.depths().contains(&0) {
            bail!("run {} / {}: depths must be a non-empty list of positive integers", run.init, run.mixer);
        }
    }
    Ok(())
}

pub fn load_pool(cfg: &ExperimentConfig) -> anyhow::Result<InstancePool> {
    let path = cfg.instances.as_ref().context("config has no instance pool path")?;
    let pool = load_instances(path).with_context(|| format!("loading instance pool {}", path.display()))?;
    if pool.is_empty() {
        bail!("instance pool {} is empty", path.display());
    }
    Ok(pool)
}

/// Computes every (instance, run, depth) row, in config order.
pub fn compute_rows(cfg: &ExperimentConfig, pool: &InstancePool) -> anyhow::Result<Vec<ResultRow>> {
    validate_runs(cfg)?;
    let units: Vec<(usize, &RunSpec)> =
        cfg.runs.iter().flat_map(|run| (0..pool.len()).map(move |i| (i, run))).collect();
    let rows: Vec<Vec<ResultRow>> =
        units.par_iter().map(|&(i, run)| run_unit(cfg, i, &pool.instances[i], run)).collect();
    Ok(rows.into_iter().flatten().collect())
}

pub fn write_rows(path: &Path, header: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> anyhow::Result<()> {
    let mut w = csv::Writer::from_path(path).with_context(|| format!("creating {}", path.display()))?;
    w.write_record(header)?;
    for r in rows {
        w.write_record(&r)?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Debug, Clone, Serialize)]
struct Manifest<'a> {
    #[serde(flatten)]
    config: &'a ExperimentConfig,
    outputs: Vec<String>,
    threads: usize,
    version: &'static str,
}

fn write_manifest(cfg: &ExperimentConfig, out: &Path, outputs: &[&str]) -> anyhow::Result<()> {
    // absolute pool path so the manifest can be re-run from any directory
    let mut config = cfg.clone();
    if let Some(path) = &cfg.instances {
        config.instances = Some(fs::canonicalize(path).unwrap_or_else(|_| path.clone()));
    }
    let manifest = Manifest {
        config: &config,
        outputs: outputs.iter().map(|s| s.to_string()).collect(),
        threads: rayon::current_num_threads(),
        version: env!("CARGO_PKG_VERSION"),
    };
    fs::write(out.join(MANIFEST_FILE), serde_json::to_string_pretty(&manifest)? + "\n")?;
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Status {
    Success,
    Partial,
    Failed,
}

impl Status {
    pub fn exit_code(self) -> i32 {
        match self {
            Status::Success => 0,
            Status::Failed => 1,
            Status::Partial => 2,
        }
    }

    fn of(failed: usize, total: usize) -> Self {
        match failed {
            0 => Status::Success,
            f if f == total => Status::Failed,
            _ => Status::Partial,
        }
    }
}

/// `run`: optimizes every configured circuit on every pool instance.
pub fn cmd_run(cfg: &ExperimentConfig, out: &Path) -> anyhow::Result<Status> {
    if cfg.runs.is_empty() {
        bail!("config {:?} has no runs", cfg.name);
    }
    let pool = load_pool(cfg)?;
    let rows = compute_rows(cfg, &pool)?;
    fs::create_dir_all(out)?;
    write_rows(&out.join(RESULTS_FILE), &RESULT_HEADER, rows.iter().map(ResultRow::record))?;
    write_manifest(cfg, out, &[RESULTS_FILE])?;
    let failed = rows.iter().filter(|r| r.outcome.is_err()).count();
    for r in rows.iter().filter(|r| r.outcome.is_err()) {
        log::error!("instance {} {} {} p={}: {}", r.instance, r.init, r.mixer, r.p, r.outcome.as_ref().unwrap_err());
    }
    log::info!("{} rows written to {}", rows.len(), out.join(RESULTS_FILE).display());
    Ok(Status::of(failed, rows.len()))
}

pub const MIXER_HEADER: [&str; 11] = [
    "graph",
    "n",
    "k",
    "beta",
    "mixer_spec",
    "trotter_steps",
    "relative_unitary_error",
    "commutator_bound",
    "gs_fidelity",
    "reference",
    "error",
];

pub fn mixer_rows(spec: &MixerAnalysisSpec) -> Vec<Vec<String>> {
    let points: Vec<_> = spec
        .graphs
        .iter()
        .flat_map(|g| spec.betas.iter().flat_map(move |&b| spec.specs.iter().map(move |&s| (g, b, s))))
        .collect();
    points
        .par_iter()
        .map(|&(g, beta, ms)| {
            let result = (|| -> xyqaoa::Result<(f64, Option<f64>, f64)> {
                let (graph, chains) = g.0.resolve(spec.n)?;
                let basis = enumerate_basis(spec.n, spec.k)?;
                let reference = match spec.reference {
                    Reference::Dicke => dicke_state(&basis),
                    Reference::Aligned => aligned_state(&graph, &basis, MixerConvention::default())?,
                };
                let a = analyze_mixer(&graph, chains.as_ref(), beta, ms, &basis, &reference)?;
                let bound = trotter_error(&graph, chains.as_ref(), beta, ms, &basis)?.bound;
                Ok((a.relative_unitary_error, bound, a.gs_fidelity))
            })();
            let steps = if ms == MixerSpec::exact() { String::new() } else { (ms.t1 * ms.t2).to_string() };
            let head = vec![g.to_string(), spec.n.to_string(), spec.k.to_string(), fmt_f64(beta), ms.label(), steps];
            let tail = match result {
                Ok((err, bound, fid)) => vec![
                    fmt_f64(err),
                    bound.map(fmt_f64).unwrap_or_default(),
                    fmt_f64(fid),
                    format!("{:?}", spec.reference).to_lowercase(),
                    String::new(),
                ],
                Err(e) => vec![String::new(), String::new(), String::new(), String::new(), e.to_string()],
            };
            head.into_iter().chain(tail).collect()
        })
        .collect()
}

pub const HEATMAP_HEADER: [&str; 5] = ["instance", "factor", "gamma", "beta", "ar"];
pub const RESCALE_HEADER: [&str; 5] = ["instance", "instance_seed", "lambda", "selected_factor", "selected_lambda"];

fn heatmap_config(inst: &PortfolioInstance, spec: &HeatmapSpec) -> xyqaoa::Result<CircuitConfig> {
    let (graph, chains) = spec.mixer.0.resolve(inst.n)?;
    let mut config = CircuitConfig::new(graph, spec.spec, spec.init.resolve(inst.n)?);
    config.chains = chains;
    Ok(config)
}

type HeatmapOutput = (Vec<Vec<String>>, Vec<String>);

fn heatmap_rows(index: usize, inst: &PortfolioInstance, spec: &HeatmapSpec) -> xyqaoa::Result<HeatmapOutput> {
    let config = heatmap_config(inst, spec)?;
    let grid = RescaleGrid {
        candidates: spec.candidates.clone(),
        gamma_points: spec.gamma_points,
        beta_points: spec.beta_points,
        beta_bounds: spec.beta_bounds,
        ..RescaleGrid::default()
    };
    let sel = select_rescaling_factor_with(inst, &config, &grid)?;
    let mut rows = Vec::new();
    for h in &sel.heatmaps {
        for (gi, g) in h.gammas.iter().enumerate() {
            for (bi, b) in h.betas.iter().enumerate() {
                rows.push(vec![index.to_string(), fmt_f64(h.factor), fmt_f64(*g), fmt_f64(*b), fmt_f64(h.ar[gi][bi])]);
            }
        }
    }
    let summary =
        vec![index.to_string(), inst.seed.to_string(), fmt_f64(inst.lambda), fmt_f64(sel.factor), fmt_f64(sel.lambda)];
    Ok((rows, summary))
}

/// `analyze`: mixer error / fidelity table and depth-1 rescaling heatmaps.
pub fn cmd_analyze(cfg: &ExperimentConfig, out: &Path) -> anyhow::Result<Status> {
    if cfg.mixer_analysis.is_none() && cfg.heatmaps.is_none() {
        bail!("config {:?} has neither mixer_analysis nor heatmaps", cfg.name);
    }
    let pool = match &cfg.heatmaps {
        Some(_) => Some(load_pool(cfg)?),
        None => None,
    };
    fs::create_dir_all(out)?;
    let mut outputs = Vec::new();
    let (mut total, mut failed) = (0, 0);
    if let Some(spec) = &cfg.mixer_analysis {
        let rows = mixer_rows(spec);
        total += rows.len();
        failed += rows.iter().filter(|r| !r[10].is_empty()).count();
        write_rows(&out.join(MIXER_FILE), &MIXER_HEADER, rows)?;
        outputs.push(MIXER_FILE);
    }
    if let (Some(spec), Some(pool)) = (&cfg.heatmaps, &pool) {
        let per_instance: Vec<_> =
            pool.instances.par_iter().enumerate().map(|(i, inst)| heatmap_rows(i, inst, spec)).collect();
        let mut cells = Vec::new();
        let mut selections = Vec::new();
        for (i, r) in per_instance.into_iter().enumerate() {
            total += 1;
            match r {
                Ok((rows, sel)) => {
                    cells.extend(rows);
                    selections.push(sel);
                }
                Err(e) => {
                    failed += 1;
                    log::error!("heatmap for instance {i}: {e}");
                }
            }
        }
        write_rows(&out.join(HEATMAP_FILE), &HEATMAP_HEADER, cells)?;
        write_rows(&out.join(RESCALE_FILE), &RESCALE_HEADER, selections)?;
        outputs.extend([HEATMAP_FILE, RESCALE_FILE]);
    }
    write_manifest(cfg, out, &outputs)?;
    Ok(Status::of(failed, total))
}

/// `gen-instances`: builds and screens the benchmark pool.
pub fn cmd_gen_instances(spec: &BenchmarkSpec, out: &Path) -> anyhow::Result<(PathBuf, Status)> {
    let pool = build_benchmark(spec)?;
    fs::create_dir_all(out)?;
    let path = out.join(INSTANCES_FILE);
    save_instances(&pool, &path)?;
    fs::write(out.join("benchmark.json"), serde_json::to_string_pretty(spec)? + "\n")?;
    let wanted = spec.thresholds.ring_quota + spec.thresholds.complete_quota;
    let status = match pool.len() {
        0 => Status::Failed,
        n if n < wanted => Status::Partial,
        _ => Status::Success,
    };
    Ok((path, status))
}
