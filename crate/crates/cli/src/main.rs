use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use meanrefl_cli::commands::{skorokhod_path, SweepAxis};
use meanrefl_cli::{audit, load_scenario, run, sweep, CliError};
use meanrefl_core::skorokhod::DEFAULT_ROOT_TOL;

#[derive(Parser)]
#[command(name = "meanrefl", version, about = "Mean-field BSDEs with two mean reflections")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve a scenario and export solution, report and plot data.
    Run {
        /// Scenario file, or the name of a catalog scenario.
        #[arg(long)]
        scenario: String,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        particles: Option<usize>,
        #[arg(long)]
        steps: Option<usize>,
        #[arg(long = "picard-tol")]
        picard_tol: Option<f64>,
    },
    /// Re-run a scenario over one parameter and tabulate errors.
    Sweep {
        #[arg(long)]
        scenario: String,
        /// One of N, n_steps, basis_degree, picard_tol.
        #[arg(long)]
        axis: SweepAxis,
        #[arg(long, value_delimiter = ',', required = true)]
        values: Vec<f64>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Recompute all residuals from an exported run.
    Audit {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        scenario: String,
    },
    /// Solve the deterministic two-sided problem for a `t,s` CSV path.
    Skorokhod {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        lower: f64,
        #[arg(long)]
        upper: f64,
        #[arg(long, default_value_t = 1.0)]
        slope: f64,
        #[arg(long = "root-tol", default_value_t = DEFAULT_ROOT_TOL)]
        root_tol: f64,
    },
}

fn execute(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Run { scenario, out, seed, particles, steps, picard_tol } => {
            let mut spec = load_scenario(&scenario)?;
            if let Some(s) = seed {
                spec.seed = s;
            }
            if let Some(n) = particles {
                spec.n_particles = n;
            }
            if let Some(n) = steps {
                spec.n_steps = n;
            }
            if let Some(t) = picard_tol {
                spec.picard_tol = t;
            }
            meanrefl_cli::config::validate(&spec)?;
            let (report, timings) = run(&spec, &out)?;
            println!(
                "{}: {} Picard iterations, final delta {:e}, K variation {}, flat-off {:e}, constraints {}, solve {:.2}s",
                spec.name,
                report.iterations,
                report.picard_history.last().copied().unwrap_or(0.0),
                report.k_variation,
                report.audit.flat_off_total(),
                if report.audit.constraints_ok { "ok" } else { "VIOLATED" },
                timings.solve_seconds
            );
            if let Some(cf) = &report.closed_form {
                println!("closed form ({}): {}", cf.reference, serde_json::to_string(cf)?);
            }
        }
        Command::Sweep { scenario, axis, values, out } => {
            let spec = load_scenario(&scenario)?;
            for row in sweep(&spec, axis, &values, &out)? {
                println!("{axis} = {}: {}", row.value, serde_json::to_string(&row)?);
            }
        }
        Command::Audit { input, scenario } => {
            let spec = load_scenario(&scenario)?;
            let outcome = audit(&input, &spec)?;
            println!("{}", serde_json::to_string_pretty(&outcome)?);
            if outcome.matches_report == Some(false) {
                return Err(CliError::Invariant(format!(
                    "audit differs from report.json in {}",
                    outcome.mismatched_fields.join(", ")
                )));
            }
        }
        Command::Skorokhod { input, out, lower, upper, slope, root_tol } => {
            skorokhod_path(&input, slope, lower, upper, root_tol, &out)?;
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match execute(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
