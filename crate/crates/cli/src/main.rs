use std::path::{Path, PathBuf};
use std::process::ExitCode;

use capa_cli::commands::{self, to_json};
use capa_cli::{CliError, ConfigFile, Result, ScenarioConfig};
use capa_core::KernelKind;
use clap::{Args, Parser, Subcommand};

#[derive(Parser)]
#[command(name = "capa", version, about = "Singular spectra and degrees of freedom of line-of-sight aperture links")]
struct Cli {
    /// Worker threads for assembly and sweeps (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Log unit conversions and progress.
    #[arg(short, long, global = true)]
    verbose: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct ScenarioArgs {
    /// TOML scenario file; built-in defaults apply when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    kernel: Option<KernelKind>,
    /// Quadrature nodes per aperture side.
    #[arg(long = "n")]
    n_per_dim: Option<usize>,
    #[arg(long)]
    threshold: Option<f64>,
    /// Double the grid from 8 nodes per side until the spectrum settles.
    #[arg(long)]
    refine: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Write the singular spectrum as CSV, with the report as a JSON sidecar.
    Spectrum {
        #[command(flatten)]
        scenario: ScenarioArgs,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run the `[sweep]` section of the config and write one CSV row per value.
    Sweep {
        #[command(flatten)]
        scenario: ScenarioArgs,
        #[arg(long)]
        out: PathBuf,
    },
    /// Print the degrees-of-freedom report as JSON.
    Dof {
        #[command(flatten)]
        scenario: ScenarioArgs,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Water-fill power over a spectrum CSV and print the allocation as JSON.
    Waterfill {
        #[arg(long)]
        spectrum: PathBuf,
        #[arg(long)]
        noise: f64,
        #[arg(long)]
        power: f64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn load(args: &ScenarioArgs) -> Result<ConfigFile> {
    let mut file = match &args.config {
        Some(path) => ConfigFile::load(path)?,
        None => ConfigFile {
            scenario: ScenarioConfig::default(),
            sweep: None,
        },
    };
    commands::apply_overrides(&mut file.scenario, args.kernel, args.n_per_dim, args.threshold)?;
    if let Some(sweep) = &mut file.sweep {
        sweep.fixed = file.scenario.clone();
    }
    Ok(file)
}

fn emit(out: Option<&Path>, text: &str) -> Result<()> {
    match out {
        Some(path) => std::fs::write(path, text).map_err(|e| CliError::io(path, e)),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Spectrum { scenario, out } => {
            let file = load(&scenario)?;
            commands::cmd_spectrum(&file.scenario, &out, scenario.refine)?;
        }
        Command::Sweep { scenario, out } => {
            let file = load(&scenario)?;
            let spec = file
                .sweep
                .ok_or_else(|| CliError::Config("config has no [sweep] section".into()))?;
            commands::cmd_sweep(&spec, &out, scenario.refine)?;
        }
        Command::Dof { scenario, out } => {
            let file = load(&scenario)?;
            let report = commands::cmd_dof(&file.scenario, scenario.refine)?;
            emit(out.as_deref(), &to_json(&report))?;
        }
        Command::Waterfill {
            spectrum,
            noise,
            power,
            out,
        } => {
            let result = commands::cmd_waterfill(&spectrum, noise, power)?;
            emit(out.as_deref(), &to_json(&result))?;
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = if cli.verbose { "info" } else { "warn" };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();

    if let Some(n) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: could not start thread pool: {e}");
            return ExitCode::from(2);
        }
    }

    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
