//! Library surface of the CLI: argument definitions, config resolution, and
//! command dispatch, kept callable from integration tests.

pub mod commands;
pub mod config;

use std::path::PathBuf;

use clap::{Parser, Subcommand, ValueEnum};

use commands::Route;
use config::RunConfig;

#[derive(Debug, Parser)]
#[command(
    name = "cbdi",
    about = "Simulate and validate continuous-state branching processes \
             with dependent immigration"
)]
pub struct Cli {
    /// Structured TOML configuration file; defaults apply when omitted.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,

    /// Master seed (overrides the config).
    #[arg(long, global = true)]
    pub seed: Option<u64>,

    /// Output directory (overrides the config).
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,

    /// Worker threads for replicate-parallel runs (default: all cores).
    #[arg(long, global = true)]
    pub jobs: Option<usize>,

    /// Print the resolved effective configuration and exit.
    #[arg(long, global = true)]
    pub dry_run: bool,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum RouteArg {
    Sde,
    Pathspace,
    Both,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Simulate replicate sample paths and write CSV paths plus a summary.
    Simulate {
        #[arg(long, value_enum, default_value = "sde")]
        route: RouteArg,
        /// Model preset (overrides the config's model section).
        #[arg(long)]
        preset: Option<String>,
        /// Replicate count (overrides the config).
        #[arg(long)]
        replicates: Option<usize>,
    },
    /// Print analytic Laplace-transform values for the configured model.
    Laplace {
        #[arg(long, default_value_t = 1.0)]
        x: f64,
        #[arg(long, default_value_t = 1.0)]
        t: f64,
        #[arg(long, default_value_t = 1.0)]
        lam: f64,
        #[arg(long)]
        preset: Option<String>,
        /// Shorthand for constant-drift immigration, e.g. `beta=1`.
        #[arg(long)]
        immigration: Option<String>,
    },
    /// Run the statistical validation suite; exit 0 iff the family passes.
    Validate {
        /// Reduced replicate budgets for a fast smoke run.
        #[arg(long)]
        quick: bool,
    },
    /// Couple two rate presets on shared noise and verify pathwise ordering.
    Compare {
        #[arg(long)]
        rates_lo: String,
        #[arg(long)]
        rates_hi: String,
        #[arg(long)]
        preset: Option<String>,
        #[arg(long)]
        replicates: Option<usize>,
    },
}

/// Load the config, apply flag overrides, and dispatch; returns the process
/// exit code.
pub fn run(cli: Cli) -> anyhow::Result<i32> {
    if let Some(jobs) = cli.jobs {
        // ignore failures: the global pool may already be initialized in tests
        let _ = rayon::ThreadPoolBuilder::new().num_threads(jobs).build_global();
    }

    let mut cfg = match &cli.config {
        Some(path) => RunConfig::from_file(path)?,
        None => RunConfig::default(),
    };
    if let Some(seed) = cli.seed {
        cfg.mc.seed = seed;
    }
    if let Some(out) = &cli.out {
        cfg.output.directory = out.display().to_string();
    }

    // subcommand-level overrides (flags win over the file)
    match &cli.command {
        Command::Simulate { preset: Some(p), .. }
        | Command::Laplace { preset: Some(p), .. }
        | Command::Compare { preset: Some(p), .. } => {
            cfg.model.preset = Some(p.clone());
        }
        _ => {}
    }
    match &cli.command {
        Command::Simulate { replicates: Some(n), .. }
        | Command::Compare { replicates: Some(n), .. } => {
            cfg.mc.replicates = *n;
        }
        _ => {}
    }
    if let Command::Laplace { immigration: Some(spec), .. } = &cli.command {
        let beta = spec
            .strip_prefix("beta=")
            .and_then(|v| v.parse::<f64>().ok())
            .ok_or_else(|| anyhow::anyhow!("cannot parse --immigration '{spec}' (want beta=VALUE)"))?;
        cfg.rates = Some(config::RatesSection::Constant { beta, q_level: 1.0 });
    }
    if cfg.model.preset.is_none() && cfg.mechanism.is_none() {
        cfg.model.preset = Some("cir".into());
    }

    if cli.dry_run {
        print!("{}", cfg.render());
        return Ok(0);
    }

    match cli.command {
        Command::Simulate { route, .. } => {
            let route = match route {
                RouteArg::Sde => Route::Sde,
                RouteArg::Pathspace => Route::Pathspace,
                RouteArg::Both => Route::Both,
            };
            commands::cmd_simulate(&cfg, route, &cli.out)
        }
        Command::Laplace { x, t, lam, .. } => commands::cmd_laplace(&cfg, x, t, lam),
        Command::Validate { quick } => commands::cmd_validate(&cfg, quick, &cli.out),
        Command::Compare { rates_lo, rates_hi, .. } => {
            commands::cmd_compare(&cfg, &rates_lo, &rates_hi, &cli.out)
        }
    }
}
