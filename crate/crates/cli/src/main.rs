use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use fim_cli::predict::PredictOptions;
use fim_cli::{CliError, CliResult, RunConfig};

#[derive(Parser)]
#[command(
    name = "fim",
    version,
    about = "Reward-driven grid reasoning for multimodal motion forecasting"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct Common {
    /// Flat key = value configuration file.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Overrides the `seed` config value.
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads (0 = all cores).
    #[arg(long, default_value_t = 0)]
    jobs: usize,
    /// Demonstration horizon as a multiple of the forecast length.
    #[arg(long, value_parser = ["1.0", "1.5", "2.0"])]
    demo_horizon: Option<String>,
}

#[derive(Subcommand)]
enum Command {
    /// Generate synthetic scenes and a checksummed manifest.
    Gen {
        #[arg(long, default_value_t = 50)]
        n_per_kind: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Train the reward map on the synthetic training set.
    Train {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        out: PathBuf,
    },
    /// Forecast scene files (or directories of them).
    Predict {
        #[command(flatten)]
        common: Common,
        #[arg(required = true)]
        inputs: Vec<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        /// Trained parameter file; trains in-process when omitted.
        #[arg(long)]
        params: Option<PathBuf>,
        /// Reasoning-free baseline: kinematic proposals, no reward learning.
        #[arg(long)]
        no_reasoning: bool,
        /// Also write reward and occupancy artifacts.
        #[arg(long)]
        artifacts: bool,
    },
    /// Score forecasts against their scenes.
    Eval {
        #[arg(long)]
        forecasts: PathBuf,
        #[arg(long)]
        scenes: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Compare the full pipeline with the baseline and across demonstration horizons.
    Ablate {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        scenes: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Render a reward CSV, occupancy file or forecast to PGM images.
    Render {
        #[command(flatten)]
        common: Common,
        artifact: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Scene for lanes and ground truth in forecast overlays.
        #[arg(long)]
        scene: Option<PathBuf>,
    },
}

fn load_config(common: &Common) -> CliResult<RunConfig> {
    let mut cfg = match &common.config {
        Some(p) => RunConfig::from_file(p)?,
        None => RunConfig::default(),
    };
    if let Some(seed) = common.seed {
        cfg.set("seed", &seed.to_string())?;
    }
    if let Some(f) = &common.demo_horizon {
        cfg.set("demo_horizon_factor", f)?;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn run(cli: Cli) -> CliResult<()> {
    use fim_cli::runtime::with_pool;
    match cli.command {
        Command::Gen {
            n_per_kind,
            seed,
            out,
        } => {
            fim_cli::gen::run(n_per_kind, seed, &out)?;
        }
        Command::Train { common, out } => {
            let cfg = load_config(&common)?;
            with_pool(common.jobs, || fim_cli::train(&cfg, &out))??;
        }
        Command::Predict {
            common,
            inputs,
            out,
            params,
            no_reasoning,
            artifacts,
        } => {
            let mut cfg = load_config(&common)?;
            cfg.write_artifacts |= artifacts;
            let opts = PredictOptions {
                inputs,
                out,
                params,
                reasoning: !no_reasoning,
            };
            with_pool(common.jobs, || fim_cli::predict::run(&cfg, &opts))??;
        }
        Command::Eval {
            forecasts,
            scenes,
            out,
        } => {
            let report = fim_cli::evaluate::run(&forecasts, &scenes, &out)?;
            if let Some(m) = report.aggregate {
                println!(
                    "{}",
                    fim_cli::evaluate::table(&[(format!("all ({})", report.scenes.len()), m)])
                );
            }
        }
        Command::Ablate {
            common,
            scenes,
            out,
        } => {
            let cfg = load_config(&common)?;
            let report = with_pool(common.jobs, || fim_cli::ablate::run(&cfg, &scenes, &out))??;
            print!("{}", fim_cli::ablate::render_table(&report));
        }
        Command::Render {
            common,
            artifact,
            out,
            scene,
        } => {
            let cfg = load_config(&common)?;
            for p in fim_cli::render::run(&cfg, &artifact, scene.as_deref(), &out)? {
                log::info!("wrote {}", p.display());
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("FIM_LOG", "error")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => report(&err),
    }
}

fn report(err: &CliError) -> ExitCode {
    eprintln!("{}", err.to_json());
    ExitCode::FAILURE
}
