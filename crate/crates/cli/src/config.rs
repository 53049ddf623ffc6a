//! Flat `key = value` configuration with dotted section names.
//!
//! ```text
//! # comments start with '#'
//! problem.example = ex1_case1
//! problem.M = 16
//! problem.n = 31
//! [gmres]
//! rtol = 1e-8
//! ```
//!
//! A `[section]` header prefixes the keys that follow it.

use std::collections::BTreeMap;
use std::path::Path;

use pint_core::discretization::{ProblemSpec, RieszScheme};
use pint_core::krylov::GmresConfig;
use pint_core::problems::{ex1_case1, ex1_case2, ex2, Example, EX2_ALPHA_PAIRS};
use pint_core::solve::Method;

use crate::error::CliError;

const KNOWN_KEYS: &[&str] = &[
    "problem.example",
    "problem.M",
    "problem.n",
    "problem.theta",
    "problem.alpha1",
    "problem.alpha2",
    "problem.scheme",
    "solver.method",
    "solver.omega",
    "gmres.restart",
    "gmres.maxit",
    "gmres.rtol",
    "gmres.reorthogonalize",
    "output.solution",
];

#[derive(Debug, Clone, PartialEq)]
pub struct Config {
    pub example: Example,
    pub m: usize,
    /// Interior points per axis.
    pub n: usize,
    pub theta: f64,
    /// Fractional orders; `ex2` only.
    pub alphas: (f64, f64),
    pub scheme: RieszScheme,
    pub method: Method,
    pub omega: Option<f64>,
    pub gmres: GmresConfig,
    /// Optional path for a space-major solution dump.
    pub solution_out: Option<String>,
}

impl Config {
    pub fn from_path(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Usage(format!("cannot read config {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Self, CliError> {
        let entries = parse_entries(text)?;
        let get = |key: &str| entries.get(key);
        let example = match get("problem.example") {
            Some((line, v)) => v.parse::<Example>().map_err(|e| config_err(*line, "problem.example", e))?,
            None => return Err(config_err(0, "problem.example", "missing required key")),
        };
        let cfg = Config {
            example,
            m: required(&entries, "problem.M")?,
            n: required(&entries, "problem.n")?,
            theta: optional(&entries, "problem.theta")?.unwrap_or(0.5),
            alphas: (
                optional(&entries, "problem.alpha1")?.unwrap_or(EX2_ALPHA_PAIRS[0].0),
                optional(&entries, "problem.alpha2")?.unwrap_or(EX2_ALPHA_PAIRS[0].1),
            ),
            scheme: optional(&entries, "problem.scheme")?.unwrap_or(RieszScheme::Hoc4),
            method: optional(&entries, "solver.method")?.unwrap_or(Method::Pgmres),
            omega: optional(&entries, "solver.omega")?,
            gmres: GmresConfig {
                restart: optional(&entries, "gmres.restart")?.unwrap_or(50),
                maxit: optional(&entries, "gmres.maxit")?.unwrap_or(1000),
                rtol: optional(&entries, "gmres.rtol")?.unwrap_or(1e-8),
                reorthogonalize: optional(&entries, "gmres.reorthogonalize")?.unwrap_or(false),
                ..GmresConfig::default()
            },
            solution_out: optional(&entries, "output.solution")?,
        };
        cfg.gmres
            .validate()
            .map_err(|e| CliError::Config { line: 0, key: "gmres".into(), message: e.to_string() })?;
        Ok(cfg)
    }

    pub fn spec(&self) -> Result<ProblemSpec, CliError> {
        let spec = match self.example {
            Example::Ex1Case1 => ex1_case1(self.m, self.n, self.theta),
            Example::Ex1Case2 => ex1_case2(self.m, self.n, self.theta),
            Example::Ex2 => ex2(self.m, self.n, self.theta, self.alphas, self.scheme),
        };
        spec.validate()?;
        Ok(spec)
    }
}

fn config_err(line: usize, key: &str, message: impl ToString) -> CliError {
    CliError::Config {
        line,
        key: key.into(),
        message: message.to_string(),
    }
}

type Entries = BTreeMap<String, (usize, String)>;

fn parse_entries(text: &str) -> Result<Entries, CliError> {
    let mut section = String::new();
    let mut out = Entries::new();
    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        if let Some(name) = line.strip_prefix('[').and_then(|l| l.strip_suffix(']')) {
            section = name.trim().to_string();
            continue;
        }
        let Some((key, value)) = line.split_once('=') else {
            return Err(config_err(line_no, line, "expected `key = value`"));
        };
        let key = key.trim();
        let full = if section.is_empty() { key.to_string() } else { format!("{section}.{key}") };
        if !KNOWN_KEYS.contains(&full.as_str()) {
            return Err(config_err(line_no, &full, "unknown key"));
        }
        let value = value.trim().trim_matches('"').to_string();
        if let Some((first, _)) = out.insert(full.clone(), (line_no, value)) {
            return Err(config_err(line_no, &full, format!("duplicate key (first set on line {first})")));
        }
    }
    Ok(out)
}

fn optional<T: std::str::FromStr>(entries: &Entries, key: &str) -> Result<Option<T>, CliError>
where
    T::Err: std::fmt::Display,
{
    entries
        .get(key)
        .map(|(line, v)| v.parse::<T>().map_err(|e| config_err(*line, key, format!("invalid value `{v}`: {e}"))))
        .transpose()
}

fn required<T: std::str::FromStr>(entries: &Entries, key: &str) -> Result<T, CliError>
where
    T::Err: std::fmt::Display,
{
    optional(entries, key)?.ok_or_else(|| config_err(0, key, "missing required key"))
}
