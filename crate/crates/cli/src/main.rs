use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use pint_cli::commands::{run_bench, run_solve, run_verify, write_bench, BenchCase};
use pint_cli::CliError;
use pint_core::krylov::GmresConfig;
use pint_core::problems::Example;
use pint_core::solve::Method;
use pint_core::verification::Suite;

#[derive(Parser)]
#[command(name = "pint", version, about = "Parallel-in-time preconditioned GMRES for θ-method PDE discretizations")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum ExampleArg {
    #[value(name = "ex1_case1")]
    Ex1Case1,
    #[value(name = "ex1_case2")]
    Ex1Case2,
    Ex2,
}

#[derive(Clone, Copy, ValueEnum)]
enum MethodArg {
    Gmres,
    Pgmres,
    Both,
}

#[derive(Clone, Copy, ValueEnum)]
enum SuiteArg {
    Kernels,
    Lemmas,
    Theorems,
    All,
}

#[derive(Subcommand)]
enum Command {
    /// Solve one configured problem and write a JSON report.
    Solve {
        #[arg(long)]
        config: PathBuf,
        /// Override the preconditioner parameter.
        #[arg(long)]
        omega: Option<f64>,
        /// Report path; stdout when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run a benchmark table and write CSV rows.
    Bench {
        #[arg(long, value_enum)]
        example: ExampleArg,
        /// Fractional orders for ex2, e.g. `1.1,1.2`.
        #[arg(long, value_parser = parse_alphas)]
        alphas: Option<(f64, f64)>,
        /// Time-step counts, comma separated.
        #[arg(long = "M", value_delimiter = ',', required = true)]
        m: Vec<usize>,
        /// Interior points per axis, comma separated.
        #[arg(long, value_delimiter = ',', required = true)]
        n: Vec<usize>,
        #[arg(long, value_enum, default_value = "pgmres")]
        method: MethodArg,
        #[arg(long, default_value_t = 0.5)]
        theta: f64,
        /// Run rows concurrently (timings not comparable).
        #[arg(long)]
        parallel: bool,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run a verification suite and write JSON reports.
    Verify {
        #[arg(long, value_enum)]
        suite: SuiteArg,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Report path; stdout when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn parse_alphas(s: &str) -> Result<(f64, f64), String> {
    let parts: Vec<&str> = s.split(',').collect();
    let [a, b] = parts.as_slice() else {
        return Err("expected two comma-separated orders".into());
    };
    let parse = |v: &str| v.trim().parse::<f64>().map_err(|e| format!("`{v}`: {e}"));
    Ok((parse(a)?, parse(b)?))
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Solve { config, omega, out } => {
            let output = run_solve(&config, omega, out.as_deref())?;
            eprintln!(
                "{} M={} n={}: {} iterations, error_inf = {:?}",
                output.case, output.m, output.n, output.report.iters_total, output.report.error_inf
            );
            Ok(())
        }
        Command::Bench { example, alphas, m, n, method, theta, parallel, out } => {
            let case = BenchCase {
                example: match example {
                    ExampleArg::Ex1Case1 => Example::Ex1Case1,
                    ExampleArg::Ex1Case2 => Example::Ex1Case2,
                    ExampleArg::Ex2 => Example::Ex2,
                },
                m_list: m,
                n_list: n,
                alphas,
                methods: match method {
                    MethodArg::Gmres => vec![Method::Gmres],
                    MethodArg::Pgmres => vec![Method::Pgmres],
                    MethodArg::Both => vec![Method::Gmres, Method::Pgmres],
                },
                theta,
                gmres: GmresConfig::default(),
                parallel,
            };
            let rows = run_bench(&case)?;
            write_bench(&rows, &out)?;
            let stalled = rows.iter().filter(|r| !r.converged).count();
            if stalled > 0 {
                return Err(CliError::NotConverged(format!("{stalled} of {} rows", rows.len())));
            }
            Ok(())
        }
        Command::Verify { suite, seed, out } => {
            let suite = match suite {
                SuiteArg::Kernels => Suite::Kernels,
                SuiteArg::Lemmas => Suite::Lemmas,
                SuiteArg::Theorems => Suite::Theorems,
                SuiteArg::All => Suite::All,
            };
            let reports = run_verify(suite, seed, out.as_deref())?;
            eprintln!("{} checks passed", reports.len());
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
