use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use fracreach_core::experiments::{run_invariant_suite, run_lambda_sweep, run_linear_check, Suite};
use fracreach_core::special_fn::{mittag_leffler_eval, MLParams};
use fracreach_core::Error;

#[derive(Parser)]
#[command(version, about = "Approximate-controllability experiments for fractional control systems")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve the scenario for every λ in its list and write a CSV
    Sweep {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Gramian decay check and linear steering against the eigenmode formula
    LinearCheck {
        #[arg(long)]
        config: PathBuf,
    },
    /// Run the batch of numerical invariants
    Invariants {
        /// special_fn, spectral, fracops, quadrature, grammian, dynamics, experiments or all
        #[arg(long, default_value = "all")]
        suite: String,
    },
    /// Evaluate E_{α,β}(z)
    MlEval {
        #[arg(long)]
        alpha: f64,
        #[arg(long)]
        beta: f64,
        #[arg(long, allow_hyphen_values = true)]
        z: f64,
        #[arg(long)]
        json: bool,
    },
}

const USAGE: u8 = 2;
const NOT_CONVERGED: u8 = 1;

fn failure(e: &Error) -> ExitCode {
    eprintln!("error: {e}");
    match e {
        Error::Scenario(_) | Error::InvalidParameter(_) | Error::Domain(_) | Error::Json(_) | Error::Io(_) => {
            ExitCode::from(USAGE)
        }
        _ => ExitCode::from(NOT_CONVERGED),
    }
}

fn run(cli: Cli) -> Result<ExitCode, Error> {
    match cli.command {
        Command::Sweep { config, out } => {
            let outputs = run_lambda_sweep(&config, &out)?;
            for row in &outputs.result.rows {
                let status = match &row.error {
                    None => "converged".to_string(),
                    Some(e) => e.clone(),
                };
                println!(
                    "λ = {:<8.1e} error = {:.6e}  iterations = {:>3}  {status}",
                    row.lambda, row.terminal_error, row.picard_iterations
                );
            }
            println!("wrote {}, {}, {}", outputs.csv.display(), outputs.meta.display(), outputs.plot.display());
            Ok(if outputs.result.all_converged() {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(NOT_CONVERGED)
            })
        }
        Command::LinearCheck { config } => {
            let report = run_linear_check(&config)?;
            println!("B₁ rank {}, B₂ rank {} ({} modes)", report.b1_rank, report.b2_rank, report.n_modes);
            for row in &report.steering {
                println!(
                    "λ = {:<8.1e} measured {:.10e}  predicted {:.10e}  rel. deviation {:.2e}",
                    row.lambda, row.measured, row.predicted, row.rel_error
                );
            }
            for c in &report.checks {
                println!("[{}] {}  {}", if c.passed { "pass" } else { "FAIL" }, c.name, c.detail);
            }
            Ok(if report.passed() {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(NOT_CONVERGED)
            })
        }
        Command::Invariants { suite } => {
            let suite: Suite = suite.parse()?;
            let summary = run_invariant_suite(suite);
            println!("{}", serde_json::to_string_pretty(&summary)?);
            Ok(if summary.all_passed() {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(NOT_CONVERGED)
            })
        }
        Command::MlEval { alpha, beta, z, json } => {
            let eval = mittag_leffler_eval(MLParams::new(alpha, beta)?, z)?;
            if json {
                println!("{}", serde_json::to_string(&eval)?);
            } else {
                println!("{:.16e}", eval.value);
                eprintln!(
                    "strategy {:?}, {} terms, {} reductions, error estimate {:.1e}",
                    eval.strategy, eval.terms, eval.reductions, eval.error_estimate
                );
            }
            Ok(ExitCode::SUCCESS)
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    run(cli).unwrap_or_else(|e| failure(&e))
}
