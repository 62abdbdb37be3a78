//! Command-line front end: reproducible hole-burning, pumping, storage,
//! commensurate-search and sequence-compilation runs driven by JSON configs.

mod commands;
mod config;
mod svg;

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Context;
use clap::{Args, Parser, Subcommand};

use config::{resolve_config_path, RunConfig};

#[derive(Parser)]
#[command(name = "afc", version, about = "AFC optical-memory simulator and pump-sequence compiler")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// JSON run configuration (resolved against AFC_CONFIG_DIR if relative).
    #[arg(long)]
    config: PathBuf,
    /// Output directory.
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Overrides the config seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads for map evaluation (default: all cores).
    #[arg(long)]
    threads: Option<usize>,
    /// Overrides the detuning-grid lower edge (MHz).
    #[arg(long)]
    grid_min_mhz: Option<f64>,
    /// Overrides the detuning-grid upper edge (MHz).
    #[arg(long)]
    grid_max_mhz: Option<f64>,
    /// Overrides the detuning-grid step (MHz).
    #[arg(long)]
    grid_step_mhz: Option<f64>,
}

#[derive(Subcommand)]
enum Command {
    /// Renders the single-burn hole/anti-hole spectrum.
    Holeburn(Common),
    /// Simulates the pump train and writes the tailored spectrum.
    Pump(Common),
    /// Full storage pipeline: pump, wait, propagate, count statistics.
    Store(Common),
    /// Mismatch map, field search and the quoted-point audit.
    Commensurate(Common),
    /// Compiles the pump target into an RF schedule.
    Compile {
        #[command(flatten)]
        common: Common,
        /// Pump-target JSON overriding the config's target.
        #[arg(long)]
        target: Option<PathBuf>,
        /// Hardware-limits JSON overriding the config's limits.
        #[arg(long)]
        limits: Option<PathBuf>,
        /// Pulse-train JSON overriding the config's train.
        #[arg(long)]
        train: Option<PathBuf>,
    },
    /// Parameter sweeps (analytic efficiency grid or pump pipeline).
    Sweep(Common),
}

impl Command {
    fn common(&self) -> &Common {
        match self {
            Command::Holeburn(c)
            | Command::Pump(c)
            | Command::Store(c)
            | Command::Commensurate(c)
            | Command::Sweep(c) => c,
            Command::Compile { common, .. } => common,
        }
    }
}

fn load_json<T: serde::de::DeserializeOwned>(path: &PathBuf) -> anyhow::Result<T> {
    let data = std::fs::read_to_string(path)
        .with_context(|| format!("reading {}", path.display()))?;
    serde_json::from_str(&data).with_context(|| format!("parsing {}", path.display()))
}

fn run() -> anyhow::Result<()> {
    let cli = Cli::parse();
    let common = cli.command.common();

    if let Some(n) = common.threads {
        // A failure here just means a pool already exists.
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }

    let cfg_path = resolve_config_path(&common.config);
    let mut cfg = RunConfig::load(&cfg_path)?;
    if let Some(v) = common.grid_min_mhz {
        cfg.grid.min_mhz = v;
    }
    if let Some(v) = common.grid_max_mhz {
        cfg.grid.max_mhz = v;
    }
    if let Some(v) = common.grid_step_mhz {
        cfg.grid.step_mhz = v;
    }
    cfg.grid.build().context("grid overrides")?;
    let seed = common.seed.unwrap_or(cfg.seed);

    let outputs = match &cli.command {
        Command::Holeburn(_) => commands::cmd_holeburn(&cfg)?,
        Command::Pump(_) => commands::cmd_pump(&cfg)?,
        Command::Store(_) => commands::cmd_store(&cfg, seed)?,
        Command::Commensurate(_) => commands::cmd_commensurate(&cfg)?,
        Command::Compile {
            target,
            limits,
            train,
            ..
        } => {
            let target = target.as_ref().map(load_json).transpose()?;
            let limits = limits.as_ref().map(load_json).transpose()?;
            let train = train.as_ref().map(load_json).transpose()?;
            commands::cmd_compile(&cfg, target, limits, train)?
        }
        Command::Sweep(_) => commands::cmd_sweep(&cfg)?,
    };

    std::fs::create_dir_all(&common.out)
        .with_context(|| format!("creating {}", common.out.display()))?;
    for (name, data) in &outputs.files {
        let path = common.out.join(name);
        std::fs::write(&path, data).with_context(|| format!("writing {}", path.display()))?;
        println!("wrote {}", path.display());
    }
    Ok(())
}

fn main() -> ExitCode {
    match run() {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::FAILURE
        }
    }
}
