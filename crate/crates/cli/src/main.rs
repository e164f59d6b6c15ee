use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Context;
use clap::{Args, Parser, Subcommand};
use xyqaoa::instances::BenchmarkSpec;
use xyqaoa_cli::config::{preset, ExperimentConfig};
use xyqaoa_cli::runner::INSTANCES_FILE;
use xyqaoa_cli::{cmd_analyze, cmd_gen_instances, cmd_run, report, Status};

#[derive(Parser)]
#[command(name = "xyqaoa", version, about = "QAOA with XY mixers: instance generation, experiments, analysis")]
struct Cli {
    /// Worker threads (default: all cores). Results do not depend on it.
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// JSON config file.
    #[arg(long, conflicts_with = "preset")]
    config: Option<PathBuf>,
    /// Named experiment; reads `<out>/instances.json`.
    #[arg(long)]
    preset: Option<String>,
    /// Master seed, overriding the config.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long, default_value = "out")]
    out: PathBuf,
}

#[derive(Subcommand)]
enum Command {
    /// Generate, rescale, and screen the benchmark instance pool.
    GenInstances {
        /// Benchmark spec (JSON); defaults to 5 + 5 hard n = 6, k = 3 instances.
        #[arg(long)]
        config: Option<PathBuf>,
        /// First candidate seed.
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
    /// Optimize circuits on every pool instance and write results.csv.
    Run(Common),
    /// Mixer error / fidelity tables and rescaling heatmaps.
    Analyze(Common),
    /// Summarize results.csv into per-configuration means.
    Report {
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
}

fn experiment(c: &Common, fallback: Option<&str>) -> anyhow::Result<ExperimentConfig> {
    let mut cfg = match (&c.config, c.preset.as_deref().or(fallback)) {
        (Some(path), _) => ExperimentConfig::load(path)?,
        (None, Some(name)) => preset(name, &c.out.join(INSTANCES_FILE))?,
        (None, None) => anyhow::bail!("either --config or --preset is required"),
    };
    if let Some(seed) = c.seed {
        cfg.seed = seed;
    }
    Ok(cfg)
}

fn run(cli: Cli) -> anyhow::Result<Status> {
    if let Some(n) = cli.threads {
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global().context("configuring thread pool")?;
    }
    match cli.command {
        Command::GenInstances { config, seed, out } => {
            let mut spec = match config {
                Some(path) => serde_json::from_str(&std::fs::read_to_string(&path)?)
                    .with_context(|| format!("parsing {}", path.display()))?,
                None => BenchmarkSpec::default(),
            };
            if let Some(s) = seed {
                spec.first_seed = s;
            }
            let (path, status) = cmd_gen_instances(&spec, &out)?;
            println!("wrote {}", path.display());
            Ok(status)
        }
        Command::Run(c) => cmd_run(&experiment(&c, None)?, &c.out),
        Command::Analyze(c) => {
            let mut cfg = experiment(&c, Some("rescale-heatmap"))?;
            if c.config.is_none() && c.preset.is_none() {
                // no pool needed for the mixer table alone
                cfg.heatmaps = None;
            }
            cmd_analyze(&cfg, &c.out)
        }
        Command::Report { out } => {
            print!("{}", report::cmd_report(&out)?);
            Ok(Status::Success)
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    match run(Cli::parse()) {
        Ok(status) => ExitCode::from(status.exit_code() as u8),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
