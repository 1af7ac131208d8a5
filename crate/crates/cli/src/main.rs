use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};
use vqnhe::experiments::{read_summary, run_experiment, summary_fits, write_fits, ExperimentConfig, FitRow};
use vqnhe::hamiltonians::{heisenberg, one_qubit_xz, tfim};
use vqnhe::oracles::{exact_ground_energy, one_qubit_closed_forms, OneQubitChannel};
use vqnhe::pauli::PauliSum;

#[derive(Parser)]
#[command(name = "vqnhe", version, about = "Noisy VQNHE simulation experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run an experiment config and write its CSV outputs.
    Run {
        config: PathBuf,
        /// Root directory for results.
        #[arg(long, env = "VQNHE_OUTPUT_ROOT", default_value = "results")]
        output_root: PathBuf,
    },
    /// Fit a summary CSV and print the fit table.
    Fit {
        summary: PathBuf,
        #[arg(long, value_enum)]
        kind: FitKind,
    },
    /// Reference values computed without any circuit simulation.
    #[command(subcommand)]
    Oracle(Oracle),
}

#[derive(Clone, Copy, ValueEnum)]
enum FitKind {
    Shots,
    Power,
}

#[derive(Clone, Copy, ValueEnum)]
enum Model {
    Tfim,
    Heisenberg,
    OneQubitXz,
}

#[derive(Subcommand)]
enum Oracle {
    /// Exact ground energy by dense diagonalization.
    GroundEnergy {
        #[arg(long, value_enum, conflicts_with = "file")]
        model: Option<Model>,
        #[arg(long, default_value_t = 5)]
        n: usize,
        /// Hamiltonian text file with `re im OPS` lines.
        #[arg(long)]
        file: Option<PathBuf>,
    },
    /// Closed-form one-qubit energies and parameters as JSON.
    OneQubit {
        #[arg(long, value_enum)]
        channel: Channel,
        #[arg(long)]
        strength: f64,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Channel {
    Depolarizing,
    AmplitudeDamping,
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

fn run(cli: Cli) -> Result<ExitCode> {
    match cli.command {
        Command::Run { config, output_root } => {
            let cfg = ExperimentConfig::load(&config).with_context(|| format!("loading {}", config.display()))?;
            let out = run_experiment(&cfg, &output_root)?;
            println!("{}", out.dir.join("summary.csv").display());
            if !out.breaches.is_empty() {
                for b in &out.breaches {
                    eprintln!("invariant breach: {b}");
                }
                return Ok(ExitCode::from(2));
            }
        }
        Command::Fit { summary, kind } => {
            let rows = read_summary(&summary).with_context(|| format!("reading {}", summary.display()))?;
            let wanted = match kind {
                FitKind::Shots => "shots",
                FitKind::Power => "power",
            };
            let fits: Vec<FitRow> = summary_fits(&rows, &[]).into_iter().filter(|f| f.kind == wanted).collect();
            if fits.is_empty() {
                bail!("no {wanted} fit possible from {}", summary.display());
            }
            write_fits(std::io::stdout().lock(), &fits)?;
        }
        Command::Oracle(Oracle::GroundEnergy { model, n, file }) => {
            let h = match (model, file) {
                (_, Some(path)) => PauliSum::parse_text(&std::fs::read_to_string(&path)?)?,
                (Some(Model::Tfim), None) => tfim(n),
                (Some(Model::Heisenberg), None) => heisenberg(n),
                (Some(Model::OneQubitXz), None) => one_qubit_xz(),
                (None, None) => bail!("pass --model or --file"),
            };
            println!("{}", exact_ground_energy(&h)?);
        }
        Command::Oracle(Oracle::OneQubit { channel, strength }) => {
            if !(0.0..=1.0).contains(&strength) {
                bail!("strength {strength} outside [0, 1]");
            }
            let channel = match channel {
                Channel::Depolarizing => OneQubitChannel::Depolarizing,
                Channel::AmplitudeDamping => OneQubitChannel::AmplitudeDamping,
            };
            println!("{}", serde_json::to_string_pretty(&one_qubit_closed_forms(channel, strength))?);
        }
    }
    Ok(ExitCode::SUCCESS)
}
