//! Command-line front end: train, serve, forge, probe and report.

mod forge;
mod probe;
mod spec;
mod tables;

pub use forge::{forge, ForgeOutcome};
pub use probe::{probe, verdict, Identification, ProbeOutcome};
pub use spec::{distinct_mas, open_oracles, OracleSpec, OracleTarget, RunSpec, SampleSource};
pub use tables::{render, visualize};

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Context;
use clap::{Args, Parser, Subcommand, ValueEnum};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::data::{shapes, two_blobs, SHAPE_CLASSES, SHAPE_SIDE};
use crate::metrics::{read_results_json, DEFAULT_AMPLIFICATION};
use crate::model::{save_model, train_toy, Model};
use crate::numerics::AccumulationStrategy;
use crate::oracle::serve;
use crate::search::SearchConfig;

#[derive(Debug, Parser)]
#[command(name = "telltale", version, about = "Forge and probe boundary samples that identify a numerical backend")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Train the toy classifier and write a model file.
    Train(TrainArgs),
    /// Answer oracle requests for one model and strategy over TCP.
    Serve(ServeArgs),
    /// Search for boundary samples from seeded starts.
    Forge(ForgeArgs),
    /// Query every oracle on one sample and report what it identifies.
    Probe(ProbeArgs),
    /// Print tables for a results.json, optionally exporting images.
    Report(ReportArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Dataset {
    /// 16x16 grayscale shapes, 4 classes.
    Shapes,
    /// Two 2-D Gaussian blobs.
    Blobs,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[arg(long, default_value = "model.bfmd")]
    pub out: PathBuf,
    #[arg(long, value_enum, default_value_t = Dataset::Shapes)]
    pub dataset: Dataset,
    /// Training set size.
    #[arg(long, default_value_t = 400)]
    pub samples: usize,
    /// Hidden layer widths, repeatable.
    #[arg(long = "hidden", default_values_t = [16])]
    pub hidden: Vec<usize>,
    #[arg(long, default_value_t = 300)]
    pub epochs: usize,
    #[arg(long, default_value_t = 0.5)]
    pub lr: f32,
    /// Seeds both the dataset and the initial weights.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Debug, Args)]
pub struct ServeArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long, default_value = "sequential")]
    pub strategy: AccumulationStrategy,
    #[arg(long, default_value = "127.0.0.1:7000")]
    pub bind: String,
}

#[derive(Debug, Args)]
pub struct SearchArgs {
    #[arg(long)]
    pub alpha: Option<f32>,
    #[arg(long)]
    pub target_dconf: Option<f32>,
    #[arg(long)]
    pub local_max: Option<usize>,
    #[arg(long)]
    pub remote_max: Option<usize>,
    #[arg(long)]
    pub stall_scale: Option<f32>,
    /// Do not clamp samples to [0, 1].
    #[arg(long)]
    pub no_clamp: bool,
}

impl SearchArgs {
    pub fn config(&self) -> SearchConfig {
        let d = SearchConfig::default();
        SearchConfig {
            alpha: self.alpha.unwrap_or(d.alpha),
            target_dconf: self.target_dconf.unwrap_or(d.target_dconf),
            local_max: self.local_max.unwrap_or(d.local_max),
            remote_max: self.remote_max.unwrap_or(d.remote_max),
            stall_scale: self.stall_scale.unwrap_or(d.stall_scale),
            clamp_range: if self.no_clamp { None } else { d.clamp_range },
        }
    }
}

#[derive(Debug, Args)]
pub struct ForgeArgs {
    #[arg(long)]
    pub model: PathBuf,
    /// `MA:strategy` (in-process) or `MA:host:port` (remote), repeatable.
    #[arg(long = "oracles", required = true)]
    pub oracles: Vec<OracleSpec>,
    /// Oracle used for the local phase.
    #[arg(long, default_value_t = 0)]
    pub local: usize,
    #[command(flatten)]
    pub search: SearchArgs,
    /// First start seed; run i uses `seed + i`.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 100)]
    pub count: usize,
    /// Start from these sample files instead of seeded shapes, repeatable.
    #[arg(long = "sample")]
    pub samples: Vec<PathBuf>,
    #[arg(long, default_value = "forge-out")]
    pub out: PathBuf,
    /// Worker threads; 0 uses every core.
    #[arg(long, default_value_t = 0)]
    pub jobs: usize,
}

impl ForgeArgs {
    pub fn run_spec(&self) -> RunSpec {
        RunSpec {
            model: self.model.clone(),
            oracles: self.oracles.clone(),
            config: self.search.config(),
            source: if self.samples.is_empty() {
                SampleSource::Seeds {
                    seed: self.seed,
                    count: self.count,
                }
            } else {
                SampleSource::Files(self.samples.clone())
            },
            out: self.out.clone(),
            local: self.local,
            jobs: self.jobs,
        }
    }
}

#[derive(Debug, Args)]
pub struct ProbeArgs {
    /// Sample file (`.bsf`).
    pub sample: PathBuf,
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long = "oracles", required = true)]
    pub oracles: Vec<OracleSpec>,
}

#[derive(Debug, Args)]
pub struct ReportArgs {
    /// Path to results.json.
    pub results: PathBuf,
    /// Export PGM pairs for successful runs into this directory.
    #[arg(long, num_args = 0..=1, default_missing_value = "viz")]
    pub viz: Option<PathBuf>,
    #[arg(long, default_value_t = DEFAULT_AMPLIFICATION)]
    pub amplification: f32,
}

/// Exit code for a forge run with no success.
pub const EXIT_NO_SUCCESS: u8 = 2;

pub fn run(cli: Cli) -> anyhow::Result<u8> {
    match cli.command {
        Command::Train(a) => train(&a).map(|_| 0),
        Command::Serve(a) => {
            eprintln!("serving {} with {} on {}", a.model.display(), a.strategy, a.bind);
            serve(&a.model, a.strategy, &a.bind)?;
            Ok(0)
        }
        Command::Forge(a) => {
            let outcome = forge(&a.run_spec())?;
            print!("{}", render(&outcome.results));
            println!("\nwrote {}", a.out.join("results.json").display());
            Ok(if outcome.successes() > 0 { 0 } else { EXIT_NO_SUCCESS })
        }
        Command::Probe(a) => {
            let outcome = probe(&a.model, &a.sample, &a.oracles)?;
            for (spec, p) in &outcome.answers {
                println!("{:<24} label {:>3}  dconf {:e}", spec.to_string(), p.label, p.dconf);
            }
            match outcome.verdict {
                Some(v) => println!(
                    "verdict: identifies MA {} (label {}, contrast {})",
                    v.ma_id,
                    v.label,
                    v.contrast.map_or("-".to_string(), |c| c.to_string())
                ),
                None => println!("verdict: not identifying"),
            }
            Ok(0)
        }
        Command::Report(a) => {
            let results =
                read_results_json(&a.results).with_context(|| format!("reading {}", a.results.display()))?;
            print!("{}", render(&results));
            if let Some(viz) = &a.viz {
                let dir = forge::results_dir(&a.results);
                let target = if viz.is_relative() { dir.join(viz) } else { viz.clone() };
                let files = visualize(&results, dir, &target, a.amplification)?;
                println!("\nwrote {} images to {}", files.len(), target.display());
            }
            Ok(0)
        }
    }
}

fn train(a: &TrainArgs) -> anyhow::Result<()> {
    let (data, input, classes) = match a.dataset {
        Dataset::Shapes => (shapes(a.samples, a.seed), SHAPE_SIDE * SHAPE_SIDE, SHAPE_CLASSES),
        Dataset::Blobs => (two_blobs(a.samples, a.seed), 2, 2),
    };
    let mut dims = vec![input];
    dims.extend(a.hidden.iter().copied().filter(|&h| h > 0));
    dims.push(classes);
    let mut rng = ChaCha8Rng::seed_from_u64(a.seed);
    let model = Model::random(&dims, &mut rng)?;
    let (model, stats) = train_toy(&model, &data, a.epochs, a.lr)?;
    save_model(&model, &a.out).with_context(|| format!("writing {}", a.out.display()))?;
    println!(
        "trained {dims:?} for {} epochs: loss {:.4} -> {:.4}, accuracy {:.2}%",
        stats.epochs,
        stats.initial_loss,
        stats.final_loss,
        100.0 * stats.accuracy
    );
    println!("wrote {}", a.out.display());
    Ok(())
}

/// Parse arguments, run, and map errors to exit code 1.
pub fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
