//! End-to-end driver: assemble, precondition, run GMRES, measure the error.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::discretization::{assemble_rhs, error_inf, AllAtOnceOperator, ProblemSpec};
use crate::error::{Error, Result};
use crate::krylov::{gmres_solve, GmresConfig, LinearOperator, SolveReport};
use crate::preconditioner::build_preconditioner;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    /// Unpreconditioned GMRES.
    Gmres,
    /// GMRES left-preconditioned with `P_ω`.
    Pgmres,
}

impl Method {
    pub fn name(self) -> &'static str {
        match self {
            Self::Gmres => "gmres",
            Self::Pgmres => "pgmres",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "gmres" => Ok(Self::Gmres),
            "pgmres" => Ok(Self::Pgmres),
            other => Err(Error::InvalidParameter(format!(
                "unknown method `{other}` (expected gmres or pgmres)"
            ))),
        }
    }
}

#[derive(Debug, Clone)]
pub struct Solution {
    /// Space-major values at time levels `1..=M`.
    pub u: Vec<f64>,
    pub report: SolveReport,
    /// `ω` of the preconditioner, when one was used.
    pub omega: Option<f64>,
}

/// Solves the all-at-once system of `spec` from a zero initial guess.
///
/// `report.wall_time_s` covers the GMRES call only.
pub fn solve(spec: &ProblemSpec, method: Method, omega: Option<f64>, cfg: &GmresConfig) -> Result<Solution> {
    let a = AllAtOnceOperator::from_spec(spec)?;
    let f = assemble_rhs(spec, a.spatial())?;
    let p = match method {
        Method::Pgmres => Some(build_preconditioner(spec, omega)?),
        Method::Gmres => None,
    };
    let minv = p.as_ref().map(|p| p as &dyn LinearOperator);
    let (u, mut report) = gmres_solve(&a, minv, &f, None, cfg)?;
    report.error_inf = error_inf(spec, &u);
    Ok(Solution {
        u,
        report,
        omega: p.map(|p| p.omega()),
    })
}
