//! Experiment configuration, circuit labels, and the named presets.

use std::f64::consts::PI;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use anyhow::{bail, Context};
use serde::{Deserialize, Serialize};
use xyqaoa::mixers::MixerSpec;
use xyqaoa::model::{chain_decomposition, complete_graph, graph_from_chains, ring_graph, ChainDecomposition, XYGraph};
use xyqaoa::qaoa::InitialStateSpec;
use xyqaoa::training::{default_starts, OlsConfig, OptimizerConfig};

/// Interaction graph named in a config: ring, complete, or a union of
/// chains from the zigzag decomposition (1-based, as in `H_12`).
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum GraphLabel {
    Ring,
    Complete,
    Chains(Vec<usize>),
}

impl GraphLabel {
    /// Graph plus the decomposition needed to Trotterize it, if any.
    pub fn resolve(&self, n: usize) -> xyqaoa::Result<(XYGraph, Option<ChainDecomposition>)> {
        let dec = || if n % 2 == 0 && n >= 4 { chain_decomposition(n).ok() } else { None };
        match self {
            GraphLabel::Ring => Ok((ring_graph(n)?, None)),
            GraphLabel::Complete => Ok((complete_graph(n)?, dec())),
            GraphLabel::Chains(subset) => {
                let d = chain_decomposition(n)?;
                let zero_based: Vec<usize> = subset.iter().map(|c| c - 1).collect();
                Ok((graph_from_chains(&d, &zero_based)?, Some(d)))
            }
        }
    }

    fn suffix(&self) -> String {
        match self {
            GraphLabel::Ring => "ring".into(),
            GraphLabel::Complete => "complete".into(),
            GraphLabel::Chains(s) => s.iter().map(|c| c.to_string()).collect(),
        }
    }

    fn parse_suffix(s: &str) -> anyhow::Result<Self> {
        match s {
            "ring" => Ok(GraphLabel::Ring),
            "complete" => Ok(GraphLabel::Complete),
            _ => {
                let inner = s.strip_prefix("chains(").and_then(|r| r.strip_suffix(')'));
                let chains: Vec<usize> = match inner {
                    Some(list) => list
                        .split(',')
                        .map(|t| t.trim().parse::<usize>())
                        .collect::<Result<_, _>>()
                        .with_context(|| format!("bad chain list {s:?}"))?,
                    None => s
                        .chars()
                        .map(|c| c.to_digit(10).map(|d| d as usize))
                        .collect::<Option<_>>()
                        .with_context(|| format!("unknown graph label {s:?}"))?,
                };
                if chains.is_empty() || chains.contains(&0) {
                    bail!("chain numbers start at 1: {s:?}");
                }
                Ok(GraphLabel::Chains(chains))
            }
        }
    }
}

/// Initial state label: `S_ring`, `S_complete`, `S_12`, `S_chains(1,2)`, or `Dicke`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum StateLabel {
    Dicke,
    Aligned(GraphLabel),
}

/// Mixer label: `H_ring`, `H_complete`, `H_12`, or `H_chains(1,2)`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct MixerLabel(pub GraphLabel);

impl fmt::Display for StateLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            StateLabel::Dicke => write!(f, "Dicke"),
            StateLabel::Aligned(g) => write!(f, "S_{}", g.suffix()),
        }
    }
}

impl fmt::Display for MixerLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "H_{}", self.0.suffix())
    }
}

impl FromStr for StateLabel {
    type Err = anyhow::Error;
    fn from_str(s: &str) -> anyhow::Result<Self> {
        if s == "Dicke" {
            return Ok(StateLabel::Dicke);
        }
        let rest = s.strip_prefix("S_").with_context(|| format!("state label must start with S_: {s:?}"))?;
        Ok(StateLabel::Aligned(GraphLabel::parse_suffix(rest)?))
    }
}

impl FromStr for MixerLabel {
    type Err = anyhow::Error;
    fn from_str(s: &str) -> anyhow::Result<Self> {
        let rest = s.strip_prefix("H_").with_context(|| format!("mixer label must start with H_: {s:?}"))?;
        Ok(MixerLabel(GraphLabel::parse_suffix(rest)?))
    }
}

macro_rules! string_conversions {
    ($t:ty) => {
        impl TryFrom<String> for $t {
            type Error = anyhow::Error;
            fn try_from(s: String) -> anyhow::Result<Self> {
                s.parse()
            }
        }
        impl From<$t> for String {
            fn from(v: $t) -> String {
                v.to_string()
            }
        }
    };
}
string_conversions!(StateLabel);
string_conversions!(MixerLabel);

impl StateLabel {
    pub fn resolve(&self, n: usize) -> xyqaoa::Result<InitialStateSpec> {
        match self {
            StateLabel::Dicke => Ok(InitialStateSpec::Dicke),
            StateLabel::Aligned(g) => Ok(InitialStateSpec::AlignedTo(g.resolve(n)?.0)),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Schedule {
    Unrestricted { depths: Vec<usize> },
    Ols { depths: Vec<usize> },
}

impl Schedule {
    pub fn name(&self) -> &'static str {
        match self {
            Schedule::Unrestricted { .. } => "unrestricted",
            Schedule::Ols { .. } => "ols",
        }
    }

    pub fn depths(&self) -> &[usize] {
        match self {
            Schedule::Unrestricted { depths } | Schedule::Ols { depths } => depths,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSpec {
    pub init: StateLabel,
    pub mixer: MixerLabel,
    pub spec: MixerSpec,
    pub schedule: Schedule,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct OptimizerSettings {
    /// Starts per depth; `None` uses 50 / 150 / 250 for p = 1 / 2 / 3+.
    pub starts: Option<usize>,
    pub gamma_bounds: (f64, f64),
    pub beta_bounds: (f64, f64),
    pub gradient_step: f64,
    pub tol: f64,
    pub max_iters: usize,
    /// Seed depth p+1 with the zero-padded depth-p optimum.
    pub nested: bool,
}

impl Default for OptimizerSettings {
    fn default() -> Self {
        let base = OptimizerConfig::default();
        Self {
            starts: None,
            gamma_bounds: base.gamma_bounds,
            beta_bounds: base.beta_bounds,
            gradient_step: base.gradient_step,
            tol: base.tol,
            max_iters: base.max_iters,
            nested: true,
        }
    }
}

impl OptimizerSettings {
    pub fn for_depth(&self, p: usize, master_seed: u64) -> OptimizerConfig {
        OptimizerConfig {
            starts: self.starts.unwrap_or_else(|| default_starts(p)),
            gamma_bounds: self.gamma_bounds,
            beta_bounds: self.beta_bounds,
            gradient_step: self.gradient_step,
            tol: self.tol,
            max_iters: self.max_iters,
            master_seed,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Reference {
    /// Extremal eigenstate of the exact mixing Hamiltonian.
    Aligned,
    Dicke,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MixerAnalysisSpec {
    pub n: usize,
    pub k: usize,
    pub graphs: Vec<MixerLabel>,
    pub betas: Vec<f64>,
    pub specs: Vec<MixerSpec>,
    pub reference: Reference,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HeatmapSpec {
    pub candidates: Vec<f64>,
    pub gamma_points: usize,
    pub beta_points: usize,
    pub beta_bounds: (f64, f64),
    pub init: StateLabel,
    pub mixer: MixerLabel,
    pub spec: MixerSpec,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub name: String,
    /// Instance pool file; required by `run` and by heatmaps.
    #[serde(default)]
    pub instances: Option<PathBuf>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub optimizer: OptimizerSettings,
    #[serde(default)]
    pub ols: OlsConfig,
    #[serde(default)]
    pub runs: Vec<RunSpec>,
    #[serde(default)]
    pub mixer_analysis: Option<MixerAnalysisSpec>,
    #[serde(default)]
    pub heatmaps: Option<HeatmapSpec>,
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> anyhow::Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))
    }
}

pub const PRESETS: &[&str] = &["alignment-exact", "alignment-matrix", "trotter-sweep", "ols-converge", "rescale-heatmap"];

fn state(s: &str) -> StateLabel {
    s.parse().expect("preset label")
}

fn mixer(s: &str) -> MixerLabel {
    s.parse().expect("preset label")
}

fn unrestricted(depths: &[usize]) -> Schedule {
    Schedule::Unrestricted { depths: depths.to_vec() }
}

fn pairs(labels: &[(&str, &str)], spec: MixerSpec, schedules: &[Schedule]) -> Vec<RunSpec> {
    let mut runs = Vec::new();
    for schedule in schedules {
        for &(s, h) in labels {
            runs.push(RunSpec { init: state(s), mixer: mixer(h), spec, schedule: schedule.clone() });
        }
    }
    runs
}

/// Named experiment; the pool is read from `instances`.
pub fn preset(name: &str, instances: &Path) -> anyhow::Result<ExperimentConfig> {
    let mut cfg = ExperimentConfig {
        name: name.to_string(),
        instances: Some(instances.to_path_buf()),
        seed: 0,
        optimizer: OptimizerSettings::default(),
        ols: OlsConfig::default(),
        runs: Vec::new(),
        mixer_analysis: None,
        heatmaps: None,
    };
    match name {
        "alignment-exact" => {
            let labels = [
                ("S_complete", "H_complete"),
                ("S_ring", "H_complete"),
                ("S_ring", "H_ring"),
                ("S_complete", "H_ring"),
            ];
            cfg.runs =
                pairs(&labels, MixerSpec::exact(), &[unrestricted(&[1, 2, 3]), Schedule::Ols { depths: vec![100] }]);
        }
        "alignment-matrix" => {
            let subsets = ["1", "2", "3", "12", "13", "23"];
            for s in subsets {
                for h in subsets {
                    cfg.runs.push(RunSpec {
                        init: state(&format!("S_{s}")),
                        mixer: mixer(&format!("H_{h}")),
                        spec: MixerSpec::exact(),
                        schedule: unrestricted(&[2]),
                    });
                }
            }
        }
        "trotter-sweep" => {
            for (s, h) in [("S_complete", "H_complete"), ("S_ring", "H_ring")] {
                for t in 1..=6 {
                    cfg.runs.push(RunSpec {
                        init: state(s),
                        mixer: mixer(h),
                        spec: MixerSpec::trotter(t, 1),
                        schedule: unrestricted(&[1, 2, 3]),
                    });
                }
            }
        }
        "ols-converge" => {
            let depths = vec![25, 50, 100, 200, 400];
            cfg.runs = pairs(
                &[("S_ring", "H_ring"), ("S_complete", "H_complete")],
                MixerSpec::exact(),
                &[Schedule::Ols { depths }],
            );
        }
        "rescale-heatmap" => {
            cfg.heatmaps = Some(HeatmapSpec {
                candidates: vec![1.0, 50.0, 1000.0],
                gamma_points: 101,
                beta_points: 101,
                beta_bounds: (0.0, PI),
                init: StateLabel::Dicke,
                mixer: mixer("H_complete"),
                spec: MixerSpec::exact(),
            });
            cfg.mixer_analysis = Some(default_mixer_analysis());
        }
        other => bail!("unknown preset {other:?}; expected one of {}", PRESETS.join(", ")),
    }
    Ok(cfg)
}

/// Unitary error and GS fidelity of ring(6) and complete(6) at beta = 0.5
/// for the exact mixer and T = 1..6.
pub fn default_mixer_analysis() -> MixerAnalysisSpec {
    let mut specs = vec![MixerSpec::exact()];
    specs.extend((1..=6).map(|t| MixerSpec::trotter(t, 1)));
    MixerAnalysisSpec {
        n: 6,
        k: 3,
        graphs: vec![mixer("H_ring"), mixer("H_complete")],
        betas: vec![0.5],
        specs,
        reference: Reference::Aligned,
    }
}
