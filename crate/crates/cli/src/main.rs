use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use fdsmc_cli::config::RunConfig;
use fdsmc_cli::plot::{plot, PlotSpec};
use fdsmc_cli::presets::{preset, PRESET_NAMES};
use fdsmc_cli::runner::{run, RunManifest};
use fdsmc_cli::{output_root, CliError};

#[derive(Parser)]
#[command(name = "fdsmc", version, about = "Delayed manipulator chaos and synchronization experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a TOML scenario configuration.
    Run { config: PathBuf },
    /// Run a named preset.
    Preset {
        name: String,
        /// Output directory (default: $FDSMC_OUTPUT_ROOT/<name>).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Render columns of a CSV as SVG according to a TOML plot spec.
    Plot { csv: PathBuf, spec: PathBuf },
    /// Print the available preset names.
    ListPresets,
}

fn report(m: &RunManifest, dir: &std::path::Path) {
    println!("wrote {} artifacts to {}", m.artifacts.len(), dir.display());
    if let Some(r) = m.results.rms {
        println!("rms link1 {:.6e} link2 {:.6e}", r[0], r[1]);
    }
    if let Some(l) = &m.results.lyapunov {
        println!("lambda_max {:.6}", l.lambda);
    }
}

fn execute(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Run { config } => {
            let cfg = RunConfig::load(&config)?;
            let dir = cfg
                .output_dir
                .as_ref()
                .map(PathBuf::from)
                .unwrap_or_else(|| output_root().join(&cfg.name));
            let m = run(&cfg, &dir)?;
            report(&m, &dir);
        }
        Command::Preset { name, out } => {
            let cfg = preset(&name)?;
            let dir = out.unwrap_or_else(|| output_root().join(&name));
            let m = run(&cfg, &dir)?;
            report(&m, &dir);
        }
        Command::Plot { csv, spec } => {
            let spec = PlotSpec::load(&spec)?;
            let path = plot(&csv, &spec)?;
            println!("{}", path.display());
        }
        Command::ListPresets => {
            for n in PRESET_NAMES {
                println!("{n}");
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match execute(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
