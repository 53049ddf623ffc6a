//! Implementations of the `solve`, `bench` and `verify` subcommands.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use serde::Serialize;

use pint_core::discretization::{OperatorKind, ProblemSpec};
use pint_core::krylov::{GmresConfig, SolveReport};
use pint_core::problems::{preset, Example};
use pint_core::solve::{solve, Method};
use pint_core::verification::{run_suite, Suite, TheoremReport};

use crate::config::Config;
use crate::error::CliError;
use crate::report::{write_csv, ReportRow};

/// JSON document written by `solve`.
#[derive(Debug, Clone, Serialize)]
pub struct SolveOutput {
    pub case: String,
    pub method: Method,
    pub theta: f64,
    pub omega: Option<f64>,
    #[serde(rename = "M")]
    pub m: usize,
    pub n: usize,
    pub alphas: Option<(f64, f64)>,
    pub report: SolveReport,
}

fn alphas_of(spec: &ProblemSpec) -> Option<(f64, f64)> {
    match &spec.kind {
        OperatorKind::RieszFractional { alpha, .. } => Some((alpha[0], alpha[1])),
        OperatorKind::VariableLaplacian { .. } => None,
    }
}

fn write_json<T: Serialize>(value: &T, out: Option<&Path>) -> Result<(), CliError> {
    match out {
        Some(path) => {
            let mut w = BufWriter::new(File::create(path)?);
            serde_json::to_writer_pretty(&mut w, value)?;
            writeln!(w)?;
            w.flush()?;
        }
        None => println!("{}", serde_json::to_string_pretty(value)?),
    }
    Ok(())
}

/// Runs one configured solve and writes its report. The report is written
/// even when GMRES does not converge.
pub fn run_solve(config_path: &Path, omega: Option<f64>, out: Option<&Path>) -> Result<SolveOutput, CliError> {
    let mut cfg = Config::from_path(config_path)?;
    if omega.is_some() {
        cfg.omega = omega;
    }
    let spec = cfg.spec()?;
    let sol = solve(&spec, cfg.method, cfg.omega, &cfg.gmres)?;
    if let Some(path) = &cfg.solution_out {
        let mut w = BufWriter::new(File::create(path)?);
        for v in &sol.u {
            writeln!(w, "{v:e}")?;
        }
        w.flush()?;
    }
    let output = SolveOutput {
        case: spec.name.clone(),
        method: cfg.method,
        theta: spec.theta,
        omega: sol.omega,
        m: spec.m,
        n: cfg.n,
        alphas: alphas_of(&spec),
        report: sol.report,
    };
    write_json(&output, out)?;
    if !output.report.converged {
        return Err(CliError::NotConverged(format!(
            "{} iterations without reaching rtol = {:e}",
            output.report.iters_total, cfg.gmres.rtol
        )));
    }
    Ok(output)
}

#[derive(Debug, Clone)]
pub struct BenchCase {
    pub example: Example,
    pub m_list: Vec<usize>,
    /// Interior points per axis.
    pub n_list: Vec<usize>,
    pub alphas: Option<(f64, f64)>,
    pub methods: Vec<Method>,
    pub theta: f64,
    pub gmres: GmresConfig,
    /// Run rows concurrently; timings are then not comparable.
    pub parallel: bool,
}

impl BenchCase {
    pub fn validate(&self) -> Result<(), CliError> {
        if self.m_list.is_empty() || self.n_list.is_empty() || self.methods.is_empty() {
            return Err(CliError::Usage("bench needs at least one M, n and method".into()));
        }
        if self.m_list.iter().chain(&self.n_list).any(|&v| v == 0) {
            return Err(CliError::Usage("sizes must be positive".into()));
        }
        if self.alphas.is_some() && self.example != Example::Ex2 {
            return Err(CliError::Usage("--alphas applies to ex2 only".into()));
        }
        preset(self.example, self.m_list[0], self.n_list[0], self.theta, self.alphas)?;
        Ok(())
    }
}

fn bench_row(case: &BenchCase, m: usize, n: usize, method: Method) -> ReportRow {
    let mut row = ReportRow {
        case: case.example.name().into(),
        method: method.name().into(),
        theta: case.theta,
        omega: None,
        m,
        n,
        alpha1: None,
        alpha2: None,
        error_inf: None,
        iters: 0,
        wall_time_s: 0.0,
        converged: false,
    };
    let result = preset(case.example, m, n, case.theta, case.alphas).and_then(|spec| {
        if let Some((a1, a2)) = alphas_of(&spec) {
            row.alpha1 = Some(a1);
            row.alpha2 = Some(a2);
        }
        solve(&spec, method, None, &case.gmres)
    });
    match result {
        Ok(sol) => {
            row.omega = sol.omega;
            row.error_inf = sol.report.error_inf;
            row.iters = sol.report.iters_total;
            row.wall_time_s = sol.report.wall_time_s;
            row.converged = sol.report.converged;
        }
        Err(e) => eprintln!("warning: {} M={m} n={n} {method}: {e}", case.example),
    }
    row
}

/// One row per `(M, n, method)`, in `n`, `M`, method order.
pub fn run_bench(case: &BenchCase) -> Result<Vec<ReportRow>, CliError> {
    case.validate()?;
    let jobs: Vec<(usize, usize, Method)> = case
        .n_list
        .iter()
        .flat_map(|&n| {
            case.m_list
                .iter()
                .flat_map(move |&m| case.methods.iter().map(move |&method| (m, n, method)))
        })
        .collect();
    if !case.parallel {
        return Ok(jobs.into_iter().map(|(m, n, method)| bench_row(case, m, n, method)).collect());
    }
    Ok(std::thread::scope(|s| {
        let handles: Vec<_> = jobs
            .into_iter()
            .map(|(m, n, method)| s.spawn(move || bench_row(case, m, n, method)))
            .collect();
        handles.into_iter().map(|h| h.join().expect("bench worker panicked")).collect()
    }))
}

pub fn write_bench(rows: &[ReportRow], out: &Path) -> Result<(), CliError> {
    write_csv(BufWriter::new(File::create(out)?), rows)
}

/// Runs a verification suite and writes every report as JSON.
pub fn run_verify(suite: Suite, seed: u64, out: Option<&Path>) -> Result<Vec<TheoremReport>, CliError> {
    let reports = run_suite(suite, seed)?;
    write_json(&reports, out)?;
    let failed: Vec<String> = reports
        .iter()
        .filter(|r| !r.pass)
        .map(|r| format!("{r} {:?}", r.quantities))
        .collect();
    if failed.is_empty() {
        Ok(reports)
    } else {
        Err(CliError::VerificationFailed(failed.join("\n")))
    }
}
