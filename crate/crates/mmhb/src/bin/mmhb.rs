use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use mmhb::experiments::{load_config, run_experiment, Context, ExperimentConfig};

#[derive(Parser)]
#[command(name = "mmhb", version, about = "Heavy-ball momentum in min-max games")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Run Sim-HB / Alt-HB (or Adam) trajectories
    Simulate(Common),
    /// Distance between the algorithm and its continuous models
    CompareModels(Common),
    /// Spectral abscissa over an (h, β) grid
    Heatmap(Common),
    /// Convergence-rate race between sim and alt
    Rates(Common),
    /// Path-averaged slope over a β sweep
    Slopes(Common),
    /// Grid-search the optimal momentum
    OptimalBeta(Common),
    /// Run a pinned reproduction bundle
    Repro {
        /// Bundle name (figure1, figure2, figure3, appendix-a, appendix-h, example-i1)
        name: Option<String>,
        #[command(flatten)]
        common: ReproCommon,
    },
}

#[derive(Args)]
struct Common {
    #[arg(long)]
    config: PathBuf,
    #[command(flatten)]
    run: RunArgs,
}

#[derive(Args)]
struct ReproCommon {
    #[arg(long)]
    config: Option<PathBuf>,
    #[command(flatten)]
    run: RunArgs,
}

#[derive(Args)]
struct RunArgs {
    /// Output directory (MMHB_OUT takes precedence)
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Worker threads
    #[arg(long)]
    jobs: Option<usize>,
    /// Overrides every seed in the config
    #[arg(long)]
    seed: Option<u64>,
}

fn main() -> ExitCode {
    match real_main() {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

fn real_main() -> mmhb::Result<()> {
    let cli = Cli::parse();
    let (cfg, mut ctx, run) = match cli.cmd {
        Cmd::Repro { name, common } => {
            let (cfg, ctx) = match (name, common.config) {
                (Some(n), None) => (ExperimentConfig::Repro { name: n }, Context::default()),
                (None, Some(p)) => load_config(&p, Some("repro"))?,
                (Some(n), Some(p)) => {
                    let (_, ctx) = load_config(&p, Some("repro"))?;
                    (ExperimentConfig::Repro { name: n }, ctx)
                }
                (None, None) => {
                    return Err(mmhb::Error::config(
                        "repro",
                        "give a bundle name or --config",
                    ))
                }
            };
            (cfg, ctx, common.run)
        }
        Cmd::Simulate(c) => with(c, "simulate")?,
        Cmd::CompareModels(c) => with(c, "compare-models")?,
        Cmd::Heatmap(c) => with(c, "heatmap")?,
        Cmd::Rates(c) => with(c, "rates")?,
        Cmd::Slopes(c) => with(c, "slopes")?,
        Cmd::OptimalBeta(c) => with(c, "optimal-beta")?,
    };
    if let Some(n) = run.jobs {
        // only fails if a pool already exists
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(n.max(1))
            .build_global();
    }
    ctx.seed = run.seed;
    let out = std::env::var_os("MMHB_OUT")
        .map(PathBuf::from)
        .unwrap_or(run.out);
    let summary = run_experiment(&cfg, &ctx, &out)?;
    println!("{}", serde_json::to_string_pretty(&summary)?);
    Ok(())
}

fn with(c: Common, name: &str) -> mmhb::Result<(ExperimentConfig, Context, RunArgs)> {
    let (cfg, ctx) = load_config(&c.config, Some(name))?;
    Ok((cfg, ctx, c.run))
}
