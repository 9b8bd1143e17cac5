use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use narrative_core::evalharness::{
    cluster_results_csv, coherence_by_size_csv, gap_samples_csv, gap_summary_csv, run_cluster_experiment,
    run_noise_experiment, run_overlap_experiment, ClusterExperiment, NoiseExperiment, OverlapExperiment,
};
use narrative_core::pipeline::{run_stages, PipelineConfig, RunReport, StageStatus, STAGES};
use narrative_core::synthgen::{gen_cluster_run, gen_noise_run, gen_overlap_run, EventPool, RunConfig};
use narrative_core::{write_file, Error, Result};

#[derive(Parser)]
#[command(name = "narrative", version, about = "Narrative shift discovery over timestamped text")]
struct Cli {
    /// Pipeline or experiment config (TOML).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory; overrides the config.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Master seed; overrides the config.
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Validate inputs and write normalised copies to the run directory.
    Ingest,
    /// Build the change point segment tree.
    Detect,
    /// Frame-map and cluster the narrative fragments.
    Cluster,
    /// Rank fragments per time frame.
    Rank,
    /// Build narrative networks and their backbones.
    Network,
    /// Write graph exports.
    Export,
    /// Run every stage, skipping those whose inputs are unchanged.
    Run,
    /// Generate a synthetic corpus.
    #[command(subcommand)]
    Synth(Synth),
    /// Run a robustness experiment.
    #[command(subcommand)]
    Eval(Eval),
}

#[derive(Subcommand)]
enum Synth {
    /// Reference narrative shift diluted with noise documents.
    Noise {
        #[arg(long, default_value_t = 0.0)]
        ratio: f64,
    },
    /// Two reference timelines overlapping around the change.
    Overlap {
        #[arg(long)]
        a1: f64,
        #[arg(long)]
        a2: f64,
        #[arg(long, default_value_t = 0)]
        days: usize,
    },
    /// Labelled triplets for the clustering experiment.
    Cluster {
        #[arg(long, default_value_t = 0)]
        n_noise: usize,
    },
}

#[derive(Subcommand)]
enum Eval {
    Noise(EvalArgs),
    Overlap(EvalArgs),
    Cluster(EvalArgs),
}

#[derive(Args)]
struct EvalArgs {}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let mut msg = format!("error: {e}");
            let mut src = std::error::Error::source(&e);
            while let Some(s) = src {
                msg.push_str(&format!("\n  caused by: {s}"));
                src = s.source();
            }
            eprintln!("{msg}");
            match e {
                Error::Config(_) => ExitCode::from(2),
                _ => ExitCode::from(1),
            }
        }
    }
}

fn dispatch(cli: &Cli) -> Result<()> {
    match &cli.command {
        Command::Synth(s) => synth(cli, s),
        Command::Eval(e) => eval(cli, e),
        Command::Run => pipeline(cli, &STAGES),
        Command::Ingest => pipeline(cli, &["ingest"]),
        Command::Detect => pipeline(cli, &["detect"]),
        Command::Cluster => pipeline(cli, &["cluster"]),
        Command::Rank => pipeline(cli, &["rank"]),
        Command::Network => pipeline(cli, &["network"]),
        Command::Export => pipeline(cli, &["export"]),
    }
}

fn require_config(cli: &Cli) -> Result<&Path> {
    cli.config
        .as_deref()
        .ok_or_else(|| Error::Config("--config is required for this command".into()))
}

fn require_out(cli: &Cli) -> Result<&Path> {
    cli.out
        .as_deref()
        .ok_or_else(|| Error::Config("--out is required for this command".into()))
}

fn pipeline(cli: &Cli, stages: &[&str]) -> Result<()> {
    let mut cfg = PipelineConfig::load(require_config(cli)?)?;
    if let Some(out) = &cli.out {
        cfg.paths.out = out.clone();
    }
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    let RunReport { dir, stages } = run_stages(&cfg, stages)?;
    for (name, status) in stages {
        let s = match status {
            StageStatus::Ran => "ran",
            StageStatus::Skipped => "skipped",
        };
        println!("{name:<8} {s}");
    }
    println!("run directory: {}", dir.display());
    Ok(())
}

fn synth(cli: &Cli, cmd: &Synth) -> Result<()> {
    let out = require_out(cli)?;
    let seed = cli.seed.unwrap_or(0);
    let pool = EventPool::bundled()?;
    let cfg = match &cli.config {
        Some(p) => {
            let text = std::fs::read_to_string(p).map_err(|e| Error::Config(format!("{}: {e}", p.display())))?;
            toml::from_str::<RunConfig>(&text).map_err(|e| Error::Config(e.to_string()))?
        }
        None => RunConfig::default(),
    };
    let run = match *cmd {
        Synth::Noise { ratio } => gen_noise_run(&pool, ratio, seed, &cfg)?,
        Synth::Overlap { a1, a2, days } => gen_overlap_run(&pool, a1, a2, days, seed, &cfg)?,
        Synth::Cluster { n_noise } => {
            let items = gen_cluster_run(&pool, n_noise, seed)?;
            let mut text = String::new();
            for item in &items {
                text.push_str(&serde_json::to_string(item).expect("labelled triplet serialises"));
                text.push('\n');
            }
            write_file(&out.join("labelled.jsonl"), text.as_bytes())?;
            println!("{} labelled triplets", items.len());
            return Ok(());
        }
    };
    write_file(&out.join("documents.nfv1"), run.documents_file().as_bytes())?;
    write_file(&out.join("triplets.nfv1"), run.triplets_file().as_bytes())?;
    write_file(&out.join("manifest.json"), run.manifest.to_json().as_bytes())?;
    println!("{} documents, {} triplets", run.docs.len(), run.triplets.len());
    Ok(())
}

fn load_toml<T: serde::de::DeserializeOwned + Default>(cli: &Cli) -> Result<T> {
    match &cli.config {
        Some(p) => {
            let text = std::fs::read_to_string(p).map_err(|e| Error::Config(format!("{}: {e}", p.display())))?;
            toml::from_str(&text).map_err(|e| Error::Config(e.to_string()))
        }
        None => Ok(T::default()),
    }
}

fn eval(cli: &Cli, cmd: &Eval) -> Result<()> {
    let out = require_out(cli)?;
    let pool = EventPool::bundled()?;
    match cmd {
        Eval::Noise(_) => {
            let mut exp: NoiseExperiment = load_toml(cli)?;
            if let Some(s) = cli.seed {
                exp.locate.seed = s;
            }
            let curve = run_noise_experiment(&pool, &exp)?;
            write_file(&out.join("noise_samples.csv"), gap_samples_csv(&curve)?.as_bytes())?;
            write_file(&out.join("noise_summary.csv"), gap_summary_csv(&curve)?.as_bytes())?;
        }
        Eval::Overlap(_) => {
            let mut exp: OverlapExperiment = load_toml(cli)?;
            if let Some(s) = cli.seed {
                exp.locate.seed = s;
            }
            let curve = run_overlap_experiment(&pool, &exp)?;
            write_file(&out.join("overlap_samples.csv"), gap_samples_csv(&curve)?.as_bytes())?;
            write_file(&out.join("overlap_summary.csv"), gap_summary_csv(&curve)?.as_bytes())?;
        }
        Eval::Cluster(_) => {
            let mut exp: ClusterExperiment = load_toml(cli)?;
            if let Some(s) = cli.seed {
                exp.seed = s;
            }
            let results = run_cluster_experiment(&pool, &exp)?;
            write_file(&out.join("cluster_results.csv"), cluster_results_csv(&results)?.as_bytes())?;
            write_file(&out.join("coherence_by_size.csv"), coherence_by_size_csv(&results)?.as_bytes())?;
        }
    }
    println!("reports written to {}", out.display());
    Ok(())
}
