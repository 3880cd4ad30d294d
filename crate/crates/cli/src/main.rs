//! Command-line driver for the nvpolar simulator.
//!
//! Exit codes: 0 on success, 2 when the input was rejected (bad config,
//! bad program text, bad arguments), 1 when a run failed underway.

mod config;
mod experiment;
mod output;
mod presets;
mod sweep;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use nvpolar::seqlang;
use nvpolar::toy::{
    closed_form_depleted, iterate_populations, limit_population, monte_carlo_oracle,
    ToyModelParams,
};
use nvpolar::Error;

use config::ExperimentConfig;

#[derive(Parser)]
#[command(
    name = "nvpolar",
    version,
    about = "Deterministic simulator of optically pumped nuclear spin polarization"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one experiment from a config file or preset name.
    Run {
        /// Path to a TOML config, or a preset name from `presets list`.
        config: String,
        /// Write outputs into this directory instead of the configured one.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run the sweep declared in a config file or preset.
    Sweep {
        /// Path to a TOML config, or a preset name from `presets list`.
        config: String,
        /// Write outputs into this directory instead of the configured one.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Check a pulse-program file and report its size.
    Parse {
        /// Program text (.seq).
        file: PathBuf,
    },
    /// Print the canonical form of a pulse-program file.
    Fmt {
        /// Program text (.seq).
        file: PathBuf,
    },
    /// Print the recursive pumping model series and its limit.
    Toy {
        /// Transfer probability of the pumping arm, in [0, 1].
        #[arg(long)]
        pa: f64,
        /// Reshuffling probability of the optical reset, in [0, 1].
        #[arg(long)]
        pb: f64,
        /// Number of cycles to tabulate.
        #[arg(long, default_value_t = 10)]
        n: usize,
        /// Initial depleted population.
        #[arg(long, default_value_t = 1.0)]
        p0: f64,
        /// Also run a Monte Carlo estimate with this many trials.
        #[arg(long)]
        trials: Option<u64>,
        /// Seed for the Monte Carlo estimate.
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Inspect the built-in presets.
    Presets {
        #[command(subcommand)]
        action: PresetsAction,
    },
}

#[derive(Subcommand)]
enum PresetsAction {
    /// List preset names and what they reproduce.
    List,
}

fn main() -> ExitCode {
    match dispatch(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(error) => {
            eprintln!("error: {error:#}");
            match error.downcast_ref::<Error>() {
                Some(e) if e.is_validation() => ExitCode::from(2),
                _ => ExitCode::from(1),
            }
        }
    }
}

fn dispatch(cli: Cli) -> anyhow::Result<()> {
    match cli.command {
        Command::Run { config, out } => {
            let config = load_config(&config)?;
            let outcome = experiment::run_experiment(&config, out.as_deref())?;
            let f = outcome.result.series.last().expect("series nonempty");
            println!(
                "final nuclear fractions: +1 {:?}  0 {:?}  -1 {:?}",
                f[0], f[1], f[2]
            );
            if outcome.result.selectivity_warnings > 0 {
                println!(
                    "selectivity warnings: {}",
                    outcome.result.selectivity_warnings
                );
            }
            for path in &outcome.written {
                println!("wrote {}", path.display());
            }
            Ok(())
        }
        Command::Sweep { config, out } => {
            let config = load_config(&config)?;
            let outcome = sweep::run_sweep(&config, out.as_deref())?;
            println!("computed {} sweep points", outcome.rows.len());
            for path in &outcome.written {
                println!("wrote {}", path.display());
            }
            Ok(())
        }
        Command::Parse { file } => {
            let program = load_program(&file)?;
            println!(
                "ok: {} steps, repeat count {}",
                program.steps().len(),
                program.repeat_count()
            );
            Ok(())
        }
        Command::Fmt { file } => {
            let program = load_program(&file)?;
            print!("{}", seqlang::format_program(&program));
            Ok(())
        }
        Command::Toy {
            pa,
            pb,
            n,
            p0,
            trials,
            seed,
        } => {
            let params = ToyModelParams::new(pa, pb, p0)?;
            let iterated = iterate_populations(&params, n);
            match trials {
                Some(trials) => {
                    println!("n,depleted_closed,depleted_iterated,depleted_mc");
                    for (k, &it) in iterated.iter().enumerate() {
                        let closed = closed_form_depleted(&params, k);
                        let mc = monte_carlo_oracle(&params, k, trials, seed);
                        println!("{k},{closed:?},{it:?},{mc:?}");
                    }
                }
                None => {
                    println!("n,depleted_closed,depleted_iterated");
                    for (k, &it) in iterated.iter().enumerate() {
                        let closed = closed_form_depleted(&params, k);
                        println!("{k},{closed:?},{it:?}");
                    }
                }
            }
            match limit_population(pa, pb) {
                Ok(limit) => println!("limit_target,{limit:?}"),
                Err(Error::UndefinedLimit) => println!("limit_target,undefined"),
                Err(other) => return Err(other.into()),
            }
            Ok(())
        }
        Command::Presets { action } => match action {
            PresetsAction::List => {
                for (name, summary) in presets::NAMES {
                    println!("{name:<10} {summary}");
                }
                Ok(())
            }
        },
    }
}

/// A config argument is a file path when one exists, otherwise a preset name.
fn load_config(arg: &str) -> anyhow::Result<ExperimentConfig> {
    let path = Path::new(arg);
    if path.exists() {
        return Ok(ExperimentConfig::load(path)?);
    }
    if let Some(config) = presets::get(arg) {
        return Ok(config);
    }
    Err(Error::Config(format!(
        "{arg} is neither a config file nor a preset; see `nvpolar presets list`"
    ))
    .into())
}

fn load_program(file: &Path) -> anyhow::Result<nvpolar::protocol::ProtocolProgram> {
    let text = std::fs::read_to_string(file)
        .map_err(|e| Error::Config(format!("cannot read {}: {e}", file.display())))?;
    seqlang::parse_program(&text).map_err(|error| match error {
        Error::Parse {
            line,
            column,
            message,
        } => anyhow::Error::new(Error::Parse {
            line,
            column,
            message: message.clone(),
        })
        .context(format!("{}:{line}:{column}: {message}", file.display())),
        other => other.into(),
    })
}
