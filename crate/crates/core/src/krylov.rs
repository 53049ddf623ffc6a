//! Restarted GMRES with left preconditioning.
//!
//! Arnoldi uses modified Gram–Schmidt (optionally a second pass) and the
//! small least-squares problem is updated with Givens rotations. The stopping
//! test is on the preconditioned residual relative to the initial one.

use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::error::{check_len, Error, Result};

/// A square linear map `y = A x` on vectors of length [`dim`](Self::dim).
pub trait LinearOperator: Sync {
    fn dim(&self) -> usize;
    fn apply(&self, x: &[f64], y: &mut [f64]);
}

/// Wraps a closure as a [`LinearOperator`].
pub struct FnOperator<F> {
    dim: usize,
    f: F,
}

impl<F: Fn(&[f64], &mut [f64]) + Sync> FnOperator<F> {
    pub fn new(dim: usize, f: F) -> Self {
        Self { dim, f }
    }
}

impl<F: Fn(&[f64], &mut [f64]) + Sync> LinearOperator for FnOperator<F> {
    fn dim(&self) -> usize {
        self.dim
    }

    fn apply(&self, x: &[f64], y: &mut [f64]) {
        (self.f)(x, y)
    }
}

/// Row-major dense matrix as an operator.
pub struct DenseOperator<'a> {
    pub n: usize,
    pub data: &'a [f64],
}

impl LinearOperator for DenseOperator<'_> {
    fn dim(&self) -> usize {
        self.n
    }

    fn apply(&self, x: &[f64], y: &mut [f64]) {
        for (i, yi) in y.iter_mut().enumerate() {
            *yi = self.data[i * self.n..(i + 1) * self.n]
                .iter()
                .zip(x)
                .map(|(a, b)| a * b)
                .sum();
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GmresConfig {
    /// Krylov dimension per cycle.
    pub restart: usize,
    /// Maximum number of restart cycles.
    pub maxit: usize,
    pub rtol: f64,
    /// Record the unpreconditioned residual at the end of every cycle.
    pub record_true_residual: bool,
    /// Second Gram–Schmidt pass.
    pub reorthogonalize: bool,
}

impl Default for GmresConfig {
    fn default() -> Self {
        Self {
            restart: 50,
            maxit: 1000,
            rtol: 1e-8,
            record_true_residual: false,
            reorthogonalize: false,
        }
    }
}

impl GmresConfig {
    /// Non-restarted GMRES with reorthogonalization, for dimension `n`.
    pub fn full_memory(n: usize, rtol: f64) -> Self {
        Self {
            restart: n.max(1),
            maxit: 1,
            rtol,
            record_true_residual: false,
            reorthogonalize: true,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.restart == 0 || self.maxit == 0 {
            return Err(Error::InvalidParameter(
                "gmres restart and maxit must be at least 1".into(),
            ));
        }
        if !(self.rtol > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "gmres rtol = {} must be positive",
                self.rtol
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveReport {
    /// Inner iterations summed over all cycles.
    pub iters_total: usize,
    pub converged: bool,
    /// `‖M⁻¹(b - A x_j)‖₂` for `j = 0..=iters_total`, as minimized by GMRES.
    pub preconditioned_residual_history: Vec<f64>,
    /// Unpreconditioned residual per cycle when requested.
    pub true_residual_history: Vec<f64>,
    pub true_residual_final: f64,
    pub error_inf: Option<f64>,
    pub wall_time_s: f64,
}

/// Relative size of a subdiagonal Arnoldi entry treated as a happy breakdown.
const BREAKDOWN_TOL: f64 = 1e-14;

fn norm(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum::<f64>().sqrt()
}

fn dot(x: &[f64], y: &[f64]) -> f64 {
    x.iter().zip(y).map(|(a, b)| a * b).sum()
}

fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

fn residual(a: &dyn LinearOperator, b: &[f64], x: &[f64], work: &mut [f64]) -> Vec<f64> {
    a.apply(x, work);
    b.iter().zip(work.iter()).map(|(bi, ai)| bi - ai).collect()
}

/// Solves `A x = b` with left preconditioner `M⁻¹` (identity when `None`).
///
/// `x0` defaults to zero. Returns the final iterate and a report; failing to
/// converge is reported, not an error.
pub fn gmres_solve(
    a: &dyn LinearOperator,
    minv: Option<&dyn LinearOperator>,
    b: &[f64],
    x0: Option<&[f64]>,
    cfg: &GmresConfig,
) -> Result<(Vec<f64>, SolveReport)> {
    cfg.validate()?;
    let n = a.dim();
    check_len(n, b.len())?;
    if let Some(m) = minv {
        check_len(n, m.dim())?;
    }
    let start = Instant::now();
    let mut x = match x0 {
        Some(x0) => {
            check_len(n, x0.len())?;
            x0.to_vec()
        }
        None => vec![0.0; n],
    };

    let mut work = vec![0.0; n];
    let precondition = |v: Vec<f64>, out: &mut Vec<f64>| match minv {
        Some(m) => m.apply(&v, out),
        None => out.copy_from_slice(&v),
    };

    let mut r = vec![0.0; n];
    precondition(residual(a, b, &x, &mut work), &mut r);
    let beta0 = norm(&r);
    if !beta0.is_finite() {
        return Err(Error::NonFinite("gmres initial residual".into()));
    }
    let mut history = vec![beta0];
    let mut true_history = Vec::new();
    let mut iters_total = 0;
    let mut converged = beta0 == 0.0;
    let target = cfg.rtol * beta0;

    let k_max = cfg.restart.min(n.max(1));
    let mut v: Vec<Vec<f64>> = Vec::with_capacity(k_max + 1);
    let mut h = vec![vec![0.0; k_max]; k_max + 1];
    let mut cs = vec![0.0; k_max];
    let mut sn = vec![0.0; k_max];
    let mut g = vec![0.0; k_max + 1];
    let mut w = vec![0.0; n];

    let mut cycle = 0;
    while !converged && cycle < cfg.maxit {
        cycle += 1;
        let beta = norm(&r);
        v.clear();
        v.push(r.iter().map(|ri| ri / beta).collect());
        g.iter_mut().for_each(|gi| *gi = 0.0);
        g[0] = beta;
        let mut k_used = 0;
        let mut breakdown = false;

        for j in 0..k_max {
            a.apply(&v[j], &mut work);
            match minv {
                Some(m) => m.apply(&work, &mut w),
                None => w.copy_from_slice(&work),
            }
            let passes = if cfg.reorthogonalize { 2 } else { 1 };
            for row in h.iter_mut().take(j + 1) {
                row[j] = 0.0;
            }
            for _ in 0..passes {
                for i in 0..=j {
                    let c = dot(&w, &v[i]);
                    h[i][j] += c;
                    axpy(-c, &v[i], &mut w);
                }
            }
            let hnext = norm(&w);
            h[j + 1][j] = hnext;
            if !hnext.is_finite() || h[..=j].iter().any(|row| !row[j].is_finite()) {
                return Err(Error::NonFinite(format!(
                    "gmres Arnoldi step {} of cycle {cycle}",
                    j + 1
                )));
            }

            for i in 0..j {
                let t = cs[i] * h[i][j] + sn[i] * h[i + 1][j];
                h[i + 1][j] = -sn[i] * h[i][j] + cs[i] * h[i + 1][j];
                h[i][j] = t;
            }
            let denom = h[j][j].hypot(h[j + 1][j]);
            if denom == 0.0 {
                cs[j] = 1.0;
                sn[j] = 0.0;
            } else {
                cs[j] = h[j][j] / denom;
                sn[j] = h[j + 1][j] / denom;
            }
            h[j][j] = denom;
            h[j + 1][j] = 0.0;
            g[j + 1] = -sn[j] * g[j];
            g[j] *= cs[j];

            k_used = j + 1;
            iters_total += 1;
            let res = g[j + 1].abs();
            history.push(res);

            if hnext <= BREAKDOWN_TOL * beta0 {
                breakdown = true;
                break;
            }
            if res <= target {
                break;
            }
            v.push(w.iter().map(|wi| wi / hnext).collect());
        }

        // Back substitution for the cycle's least-squares coefficients.
        let mut y = vec![0.0; k_used];
        for i in (0..k_used).rev() {
            let mut s = g[i];
            for l in i + 1..k_used {
                s -= h[i][l] * y[l];
            }
            y[i] = if h[i][i] != 0.0 { s / h[i][i] } else { 0.0 };
        }
        for (i, yi) in y.iter().enumerate() {
            axpy(*yi, &v[i], &mut x);
        }

        let raw = residual(a, b, &x, &mut work);
        if cfg.record_true_residual {
            true_history.push(norm(&raw));
        }
        precondition(raw, &mut r);
        let rnorm = norm(&r);
        if !rnorm.is_finite() {
            return Err(Error::NonFinite("gmres restart residual".into()));
        }
        converged = breakdown || rnorm <= target;
    }

    let true_residual_final = norm(&residual(a, b, &x, &mut work));
    let report = SolveReport {
        iters_total,
        converged,
        preconditioned_residual_history: history,
        true_residual_history: true_history,
        true_residual_final,
        error_inf: None,
        wall_time_s: start.elapsed().as_secs_f64(),
    };
    Ok((x, report))
}
