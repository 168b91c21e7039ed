use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Context;
use clap::{Args, Parser, Subcommand};
use msgeo_core::pipeline::{error_name, run_pipeline, Config, PipelineOutcome};
use msgeo_core::pointset::save_cloud;
use msgeo_core::{generate, Shape, ShapeSpec};

#[derive(Parser)]
#[command(name = "msgeo", version, about = "Multiscale geometry of point clouds")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write a synthetic point cloud.
    Generate(GenerateArgs),
    /// Run the full analysis on a cloud.
    Analyze(AnalyzeArgs),
    /// Run the analysis described by a JSON config.
    Compare {
        #[arg(long)]
        config: PathBuf,
    },
}

#[derive(Args)]
struct GenerateArgs {
    #[arg(long)]
    shape: Shape,
    #[arg(long)]
    depth: Option<u32>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    points: Option<usize>,
    #[arg(long)]
    amplitude: Option<f64>,
    #[arg(long)]
    noise: Option<f64>,
    #[arg(long)]
    contraction: Option<f64>,
}

#[derive(Args)]
struct AnalyzeArgs {
    #[arg(long)]
    cloud: PathBuf,
    #[arg(long)]
    d: usize,
    #[arg(long, default_value_t = 0.5)]
    rho: f64,
    #[arg(long)]
    depth: u32,
    #[arg(long, default_value_t = 0.05)]
    tau: f64,
    #[arg(long, default_value_t = 5.0)]
    c0: f64,
    #[arg(long, default_value = "bwgl")]
    criteria: String,
    #[arg(long, default_value_t = 0.05)]
    epsilon: f64,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 0.25)]
    eta: f64,
    #[arg(long, default_value_t = 8.0)]
    m_factor: f64,
    /// Frostmann leaf level; chosen from the scales when omitted.
    #[arg(long)]
    m: Option<u32>,
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    resolution: Option<f64>,
    #[arg(long, default_value_t = 200)]
    samples: usize,
    #[arg(long)]
    max_tops: Option<usize>,
    #[arg(long, default_value_t = 4)]
    spacing_divisor: usize,
    /// Ball dilation used by BWGL and BAUP.
    #[arg(long, default_value_t = 2.0)]
    criteria_c0: f64,
    #[arg(long, default_value_t = 0.5)]
    theta: f64,
    #[arg(long, default_value_t = 2)]
    max_planes: usize,
    #[arg(long, default_value_t = 3.0)]
    a: f64,
    #[arg(long, default_value_t = 2.0)]
    p: f64,
}

impl From<AnalyzeArgs> for Config {
    fn from(a: AnalyzeArgs) -> Self {
        Config {
            cloud: a.cloud,
            d: a.d,
            rho: a.rho,
            depth: a.depth,
            tau: a.tau,
            c0: a.c0,
            criteria: a.criteria,
            epsilon: a.epsilon,
            out: a.out,
            seed: a.seed,
            eta: a.eta,
            m_factor: a.m_factor,
            m: a.m,
            n: a.n,
            resolution: a.resolution,
            samples: a.samples,
            max_tops: a.max_tops,
            spacing_divisor: a.spacing_divisor,
            criteria_c0: a.criteria_c0,
            theta: a.theta,
            max_planes: a.max_planes,
            a: a.a,
            p: a.p,
        }
    }
}

fn report(outcome: &PipelineOutcome) -> ExitCode {
    for c in &outcome.checks {
        let mark = if c.passed { "ok  " } else { "FAIL" };
        println!("{mark} {:<16} {}", c.name, c.detail);
    }
    println!("{} artifacts written", outcome.artifacts.len());
    if outcome.passed() {
        ExitCode::SUCCESS
    } else {
        eprintln!("failed checks: {}", outcome.failed().join(", "));
        ExitCode::from(1)
    }
}

fn analyze(config: Config) -> ExitCode {
    match run_pipeline(&config) {
        Ok(outcome) => report(&outcome),
        Err(e) => {
            eprintln!("error [{}]: {e}", error_name(&e));
            ExitCode::from(2)
        }
    }
}

fn main() -> anyhow::Result<ExitCode> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match cli.command {
        Command::Generate(g) => {
            let spec = ShapeSpec {
                shape: g.shape,
                depth: g.depth,
                points: g.points,
                amplitude: g.amplitude,
                noise: g.noise,
                contraction: g.contraction,
                seed: g.seed,
            };
            let cloud = generate(&spec)?;
            save_cloud(&cloud, &g.out).with_context(|| format!("writing {}", g.out.display()))?;
            println!("{} points (n={}, d={}) -> {}", cloud.len(), cloud.n(), cloud.d(), g.out.display());
            Ok(ExitCode::SUCCESS)
        }
        Command::Analyze(a) => Ok(analyze(a.into())),
        Command::Compare { config } => match Config::from_file(&config) {
            Ok(c) => Ok(analyze(c)),
            Err(e) => {
                eprintln!("error [{}]: {}: {e}", error_name(&e), config.display());
                Ok(ExitCode::from(2))
            }
        },
    }
}
