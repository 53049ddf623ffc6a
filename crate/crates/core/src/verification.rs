//! Dense oracles and numerical certificates for the convergence theory.
//!
//! Every dense matrix here is built from its definition (Toeplitz-minus-Hankel
//! τ matrices, Kronecker products, dense eigendecompositions) rather than
//! from the fast transforms, so the checks are independent of the code they
//! certify. Dense work is refused beyond [`DENSE_LIMIT`].

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::discretization::{
    assemble_rhs, build_spatial_operator, frac_centered_weights, q_theta_first_column, AllAtOnceOperator,
    OperatorKind, ProblemSpec, RieszScheme,
};
use crate::error::{Error, Result};
use crate::krylov::{gmres_solve, FnOperator, GmresConfig, LinearOperator};
use crate::preconditioner::{build_preconditioner, condition_bound, spectral_bounds_for, TwoSided};
use crate::problems::{ex1_case1, ex1_case2, ex2};
use crate::structured::{
    sine_matrix, LowerToeplitz, SineTransformPlan, SymmetricToeplitz,
};

/// Largest dimension of any dense matrix built here.
pub const DENSE_LIMIT: usize = 4096;
/// Largest `M` for the temporal matrices `B_θ` and `K_M(ρ)`.
pub const TEMPORAL_LIMIT: usize = 256;
/// Largest `N` for spectrum-inclusion checks.
pub const SPECTRUM_LIMIT: usize = 1024;

// ============================================================================
// Dense matrices
// ============================================================================

#[derive(Debug, Clone, PartialEq)]
pub struct DenseMatrix {
    pub rows: usize,
    pub cols: usize,
    /// Row-major entries.
    pub entries: Vec<f64>,
}

impl DenseMatrix {
    pub fn from_matrix(m: &DMatrix<f64>) -> Self {
        Self {
            rows: m.nrows(),
            cols: m.ncols(),
            entries: m.transpose().as_slice().to_vec(),
        }
    }

    pub fn to_matrix(&self) -> DMatrix<f64> {
        DMatrix::from_row_slice(self.rows, self.cols, &self.entries)
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.entries[i * self.cols + j]
    }
}

fn guard(what: &str, dim: usize, limit: usize) -> Result<()> {
    if dim > limit {
        Err(Error::SizeGuard {
            what: what.into(),
            dim,
            limit,
        })
    } else {
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DenseKind {
    A,
    POmega,
    PL,
    PR,
    /// `B_θ = Q_θ + Q_θᵀ`.
    BTheta,
    /// `K_M(ρ)` with `ρ = (θ - 1)/θ`.
    Kms,
}

/// `τ(T) = T - H` for a symmetric Toeplitz first column `t_0..t_n`
/// (one extra entry is needed for the Hankel part).
pub fn dense_tau(t: &[f64], n: usize) -> DMatrix<f64> {
    DMatrix::from_fn(n, n, |i, j| {
        let mut v = t[i.abs_diff(j)];
        if i + j + 2 < n {
            v -= t[i + j + 2];
        }
        if i + j > n {
            v -= t[2 * n - i - j];
        }
        v
    })
}

fn tridiag(n: usize, diag: f64, off: f64) -> DMatrix<f64> {
    DMatrix::from_fn(n, n, |i, j| match i.abs_diff(j) {
        0 => diag,
        1 => off,
        _ => 0.0,
    })
}

/// `Σ_i I ⊗ F_i ⊗ I` for per-axis factors (axis 0 slowest).
fn kron_sum(factors: &[DMatrix<f64>]) -> DMatrix<f64> {
    let sizes: Vec<usize> = factors.iter().map(|f| f.nrows()).collect();
    let total: usize = sizes.iter().product();
    let mut out = DMatrix::zeros(total, total);
    for (axis, f) in factors.iter().enumerate() {
        let before: usize = sizes[..axis].iter().product();
        let after: usize = sizes[axis + 1..].iter().product();
        let term = DMatrix::<f64>::identity(before, before)
            .kronecker(f)
            .kronecker(&DMatrix::<f64>::identity(after, after));
        out += term;
    }
    out
}

/// Dense `P̂` from its definition.
pub fn dense_phat(spec: &ProblemSpec) -> Result<DMatrix<f64>> {
    guard("preconditioner P-hat", spec.spatial_len(), DENSE_LIMIT)?;
    let factors = (0..spec.dim())
        .map(|axis| {
            let n = spec.n[axis];
            let h = spec.h(axis);
            Ok(match &spec.kind {
                OperatorKind::VariableLaplacian { .. } => tridiag(n, 2.0, -1.0) / (h * h),
                OperatorKind::RieszFractional { alpha, k, scheme } => {
                    let a = alpha[axis];
                    let w = frac_centered_weights(a, n + 1)?;
                    let tau = dense_tau(&w, n) * (k[axis] * h.powf(-a));
                    match scheme {
                        RieszScheme::Cd2 => tau,
                        RieszScheme::Hoc4 => {
                            (DMatrix::identity(n, n) + tridiag(n, 2.0, -1.0) * (a / 24.0)) * tau
                        }
                    }
                }
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(kron_sum(&factors))
}

pub fn dense_g(spec: &ProblemSpec) -> Result<DMatrix<f64>> {
    let n = spec.spatial_len();
    guard("spatial operator", n, DENSE_LIMIT)?;
    Ok(DMatrix::from_row_slice(n, n, &build_spatial_operator(spec)?.to_dense()?))
}

/// `Q_θ = H_θ⁻¹ T` by dense triangular solve.
pub fn dense_q(theta: f64, dt: f64, m: usize) -> Result<DMatrix<f64>> {
    let h = DMatrix::from_fn(m, m, |i, j| {
        if i == j {
            theta * dt
        } else if i == j + 1 {
            (1.0 - theta) * dt
        } else {
            0.0
        }
    });
    let t = tridiag(m, 1.0, 0.0) - DMatrix::from_fn(m, m, |i, j| if i == j + 1 { 1.0 } else { 0.0 });
    h.solve_lower_triangular(&t)
        .ok_or_else(|| Error::Singular("H_theta".into()))
}

/// `f(P)` for symmetric positive definite `P`, through its eigendecomposition.
fn spd_function(p: &DMatrix<f64>, f: impl Fn(f64) -> f64) -> DMatrix<f64> {
    let eig = SymmetricEigen::new(p.clone());
    let d = DMatrix::from_diagonal(&eig.eigenvalues.map(f));
    &eig.eigenvectors * d * eig.eigenvectors.transpose()
}

/// Dense realization of one of the operators, for `M·N ≤ 4096`
/// (`M ≤ 256` for the temporal matrices). `omega` defaults to the optimum.
pub fn dense_assemble(spec: &ProblemSpec, which: DenseKind, omega: Option<f64>) -> Result<DenseMatrix> {
    spec.validate()?;
    let (m, theta, dt) = (spec.m, spec.theta, spec.dt());
    if matches!(which, DenseKind::BTheta | DenseKind::Kms) {
        guard("temporal matrix", m, TEMPORAL_LIMIT)?;
        let out = match which {
            DenseKind::BTheta => {
                let q = dense_q(theta, dt, m)?;
                &q + q.transpose()
            }
            _ => kms_matrix((theta - 1.0) / theta, m),
        };
        return Ok(DenseMatrix::from_matrix(&out));
    }
    guard("all-at-once matrix", m * spec.spatial_len(), DENSE_LIMIT)?;
    let im = DMatrix::<f64>::identity(m, m);
    let n = spec.spatial_len();
    let iden = DMatrix::<f64>::identity(n, n);
    let q = dense_q(theta, dt, m)?;
    let omega = match omega {
        Some(w) => w,
        None => crate::preconditioner::choose_omega(&spectral_bounds_for(spec)?),
    };
    let out = match which {
        DenseKind::A => dense_g(spec)?.kronecker(&im) + iden.kronecker(&q),
        DenseKind::POmega => (dense_phat(spec)? * omega).kronecker(&im) + iden.kronecker(&q),
        DenseKind::PL => {
            let p = dense_phat(spec)? * omega;
            spd_function(&p, f64::sqrt).kronecker(&im) + spd_function(&p, |v| 1.0 / v.sqrt()).kronecker(&q)
        }
        DenseKind::PR => spd_function(&(dense_phat(spec)? * omega), f64::sqrt).kronecker(&im),
        DenseKind::BTheta | DenseKind::Kms => unreachable!(),
    };
    Ok(DenseMatrix::from_matrix(&out))
}

pub fn kms_matrix(rho: f64, m: usize) -> DMatrix<f64> {
    DMatrix::from_fn(m, m, |i, j| rho.powi(i.abs_diff(j) as i32))
}

/// `σ(ρ, φ) = (1 - ρ²)/(1 - 2ρ cos φ + ρ²)`, the symbol of `K_M(ρ)`.
pub fn kms_symbol(rho: f64, phi: f64) -> Result<f64> {
    if !(rho.abs() < 1.0) {
        return Err(Error::InvalidParameter(format!("|rho| = {} must be below 1", rho.abs())));
    }
    Ok((1.0 - rho * rho) / (1.0 - 2.0 * rho * phi.cos() + rho * rho))
}

// ============================================================================
// Reports
// ============================================================================

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TheoremReport {
    pub check: String,
    pub quantities: BTreeMap<String, f64>,
    pub pass: bool,
    pub tolerance: f64,
    /// Human-readable description of the first failure, if any.
    pub detail: String,
}

impl TheoremReport {
    fn new(check: impl Into<String>, tolerance: f64) -> Self {
        Self {
            check: check.into(),
            quantities: BTreeMap::new(),
            pass: true,
            tolerance,
            detail: String::new(),
        }
    }

    fn record(&mut self, key: impl Into<String>, value: f64) {
        self.quantities.insert(key.into(), value);
    }

    /// Marks a failure unless `ok`; keeps the first failure message.
    fn require(&mut self, ok: bool, msg: impl FnOnce() -> String) {
        if !ok {
            if self.pass {
                self.detail = msg();
            }
            self.pass = false;
        }
    }
}

impl fmt::Display for TheoremReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} {} (tol {:e})",
            if self.pass { "PASS" } else { "FAIL" },
            self.check,
            self.tolerance
        )?;
        if !self.detail.is_empty() {
            write!(f, ": {}", self.detail)?;
        }
        Ok(())
    }
}

fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).fold(0.0_f64, |m, (x, y)| m.max((x - y).abs()))
}

fn max_abs(a: &[f64]) -> f64 {
    a.iter().fold(0.0_f64, |m, x| m.max(x.abs()))
}

fn random_vec(len: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
    (0..len).map(|_| rng.random_range(-1.0..1.0)).collect()
}

fn short_label(spec: &ProblemSpec) -> String {
    let kind = match &spec.kind {
        OperatorKind::VariableLaplacian { .. } => "laplacian".to_string(),
        OperatorKind::RieszFractional { alpha, scheme, .. } => format!("{scheme:?}{alpha:?}").to_lowercase(),
    };
    format!("{}:{kind}:M={}:n={:?}:theta={}", spec.name, spec.m, spec.n, spec.theta)
}

// ============================================================================
// Lemma checks
// ============================================================================

/// `Q_θ + Q_θᵀ ⪰ O` on a grid, with the closed forms at `θ = 1` and `θ = 1/2`.
pub fn check_btheta_psd(theta_grid: &[f64], m_grid: &[usize]) -> Result<TheoremReport> {
    let mut rep = TheoremReport::new("btheta_psd", 1e-10);
    for &theta in theta_grid {
        crate::discretization::validate_theta(theta)?;
        for &m in m_grid {
            guard("B_theta", m, TEMPORAL_LIMIT)?;
            // Δt = 1 gives B̃_θ.
            let q = dense_q(theta, 1.0, m)?;
            let b = &q + q.transpose();
            let mut eig: Vec<f64> = SymmetricEigen::new(b).eigenvalues.iter().copied().collect();
            eig.sort_by(f64::total_cmp);
            let min = eig[0];
            rep.record(format!("min_eig[theta={theta},M={m}]"), min);
            rep.require(min >= -1e-10, || format!("theta={theta} M={m}: min eigenvalue {min:e}"));
            if theta == 1.0 {
                let mut closed: Vec<f64> = (1..=m)
                    .map(|k| 2.0 + 2.0 * (k as f64 * std::f64::consts::PI / (m + 1) as f64).cos())
                    .collect();
                closed.sort_by(f64::total_cmp);
                let err = max_abs_diff(&eig, &closed);
                rep.record(format!("closed_form_err[M={m}]"), err);
                rep.require(err <= 1e-10, || format!("theta=1 M={m}: closed form error {err:e}"));
            }
            if theta == 0.5 {
                let top = eig[m - 1];
                let rel = (top - 4.0 * m as f64).abs() / (4.0 * m as f64);
                let rest = eig[..m - 1].iter().fold(0.0_f64, |a, v| a.max(v.abs()));
                rep.record(format!("rank_one_rel_err[M={m}]"), rel);
                rep.record(format!("rank_one_rest[M={m}]"), rest);
                rep.require(rel <= 1e-8 && rest <= 1e-10, || {
                    format!("theta=1/2 M={m}: top {top}, rest {rest:e}")
                });
            }
        }
    }
    Ok(rep)
}

/// `σ(ρ, φ) ≥ (1+ρ)/(1-ρ)` on a `φ` grid for `ρ ∈ (-1, 0)`, with the minimum at `φ = 0`.
pub fn check_kms_symbol(rhos: &[f64], grid: usize) -> Result<TheoremReport> {
    let mut rep = TheoremReport::new("kms_symbol_bound", 1e-12);
    for &rho in rhos {
        let floor = (1.0 + rho) / (1.0 - rho);
        let mut min = f64::INFINITY;
        for i in 0..=grid {
            let phi = -std::f64::consts::PI + 2.0 * std::f64::consts::PI * i as f64 / grid as f64;
            min = min.min(kms_symbol(rho, phi)?);
        }
        let at_zero = kms_symbol(rho, 0.0)?;
        rep.record(format!("min_minus_floor[rho={rho}]"), min - floor);
        rep.require(min - floor >= -1e-12 && (at_zero - floor).abs() <= 1e-12, || {
            format!("rho={rho}: min {min}, floor {floor}")
        });
    }
    Ok(rep)
}

/// `min ξ_i/ζ_i ≤ Σξ/Σζ ≤ max ξ_i/ζ_i` on random positive sequences.
pub fn check_quotient_bounds(seed: u64, trials: usize) -> TheoremReport {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut rep = TheoremReport::new("quotient_bounds", 0.0);
    for t in 0..trials {
        let len = rng.random_range(1..40);
        let xi: Vec<f64> = (0..len).map(|_| rng.random_range(1e-3..10.0)).collect();
        let zeta: Vec<f64> = (0..len).map(|_| rng.random_range(1e-3..10.0)).collect();
        let q = xi.iter().sum::<f64>() / zeta.iter().sum::<f64>();
        let ratios: Vec<f64> = xi.iter().zip(&zeta).map(|(a, b)| a / b).collect();
        let lo = ratios.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = ratios.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        // One ulp of slack for the two divisions.
        let slack = 4.0 * f64::EPSILON * q;
        rep.require(lo <= q + slack && q <= hi + slack, || {
            format!("trial {t}: {lo} <= {q} <= {hi} violated")
        });
    }
    rep.record("trials", trials as f64);
    rep
}

/// `O ≺ B₁ ⪯ B₂ ⇒ B₂⁻¹ ⪯ B₁⁻¹` with `B₂ = B₁ + CᵀC`.
pub fn check_order_inversion(seed: u64, trials: usize) -> TheoremReport {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut rep = TheoremReport::new("order_inversion", 1e-10);
    let mut worst = f64::INFINITY;
    for t in 0..trials {
        let n = rng.random_range(1..=32);
        let x = DMatrix::from_fn(n, n, |_, _| rng.random_range(-1.0..1.0));
        let c = DMatrix::from_fn(rng.random_range(1..=n), n, |_, _| rng.random_range(-1.0..1.0));
        let b1 = x.transpose() * &x + DMatrix::identity(n, n) * 0.1;
        let b2 = &b1 + c.transpose() * &c;
        let (Some(i1), Some(i2)) = (b1.clone().try_inverse(), b2.try_inverse()) else {
            rep.require(false, || format!("trial {t}: singular pair"));
            continue;
        };
        let d = &i1 - &i2;
        let d = (&d + d.transpose()) * 0.5;
        let min = SymmetricEigen::new(d).eigenvalues.min();
        worst = worst.min(min);
        rep.require(min >= -1e-10, || format!("trial {t}: min eigenvalue {min:e}"));
    }
    rep.record("worst_min_eig", worst);
    rep
}

/// Eigenvalues of `P̂^{-1/2} G P̂^{-1/2}` lie in `[ǎ, â]` (strictly inside
/// for fractional problems).
pub fn check_spectrum_inclusion(spec: &ProblemSpec) -> Result<TheoremReport> {
    guard("spectrum inclusion", spec.spatial_len(), SPECTRUM_LIMIT)?;
    let bounds = spectral_bounds_for(spec)?;
    let g = dense_g(spec)?;
    let p_inv_half = spd_function(&dense_phat(spec)?, |v| 1.0 / v.sqrt());
    let s = &p_inv_half * g * &p_inv_half;
    let s = (&s + s.transpose()) * 0.5;
    let eig = SymmetricEigen::new(s).eigenvalues;
    let (lo, hi) = (eig.min(), eig.max());
    let tol = 1e-9;
    let mut rep = TheoremReport::new(format!("spectrum_inclusion[{}]", short_label(spec)), tol);
    rep.record("eig_min", lo);
    rep.record("eig_max", hi);
    rep.record("a_min", bounds.a_min);
    rep.record("a_max", bounds.a_max);
    let strict = matches!(spec.kind, OperatorKind::RieszFractional { .. });
    let ok = if strict {
        lo > bounds.a_min && hi < bounds.a_max
    } else {
        lo >= bounds.a_min - tol && hi <= bounds.a_max + tol
    };
    rep.require(ok, || format!("spectrum [{lo}, {hi}] not inside [{}, {}]", bounds.a_min, bounds.a_max));
    Ok(rep)
}

// ============================================================================
// Theorem checks
// ============================================================================

/// Dense `P_l⁻¹ A P_r⁻¹`.
pub fn dense_two_sided(spec: &ProblemSpec, omega: f64) -> Result<DMatrix<f64>> {
    let a = dense_assemble(spec, DenseKind::A, Some(omega))?.to_matrix();
    let pl = dense_assemble(spec, DenseKind::PL, Some(omega))?.to_matrix();
    let pr = dense_assemble(spec, DenseKind::PR, Some(omega))?.to_matrix();
    let pr_inv = pr
        .try_inverse()
        .ok_or_else(|| Error::Singular("P_r".into()))?;
    pl.lu()
        .solve(&(a * pr_inv))
        .ok_or_else(|| Error::Singular("P_l".into()))
}

/// `κ₂(P_l⁻¹ A P_r⁻¹) ≤ ν(ω)` for every `ω` in the grid.
pub fn check_condition_bound(spec: &ProblemSpec, omega_grid: &[f64]) -> Result<TheoremReport> {
    let bounds = spectral_bounds_for(spec)?;
    let tol = 1e-8;
    let mut rep = TheoremReport::new(format!("condition_bound[{}]", short_label(spec)), tol);
    for &omega in omega_grid {
        let sv = dense_two_sided(spec, omega)?.singular_values();
        let kappa = sv.max() / sv.min();
        let nu = condition_bound(bounds.a_min, bounds.a_max, omega, spec.theta);
        rep.record(format!("kappa[omega={omega}]"), kappa);
        rep.record(format!("nu[omega={omega}]"), nu);
        rep.require(kappa <= nu + tol, || format!("omega={omega}: kappa {kappa} > nu {nu}"));
    }
    Ok(rep)
}

/// The two sides of the residual relation at every common GMRES iteration.
#[derive(Debug, Clone, PartialEq)]
pub struct ResidualPair {
    pub one_sided: Vec<f64>,
    pub two_sided: Vec<f64>,
    pub c: f64,
}

/// Paired full-memory GMRES runs on `P_ω⁻¹A u = P_ω⁻¹f` (from `P_r⁻¹ x̂₀`)
/// and `P_l⁻¹AP_r⁻¹ û = P_l⁻¹f` (from `x̂₀`).
pub fn residual_histories(spec: &ProblemSpec, x_hat0: Option<&[f64]>) -> Result<ResidualPair> {
    let dim = spec.total_len();
    guard("residual relation", dim, DENSE_LIMIT)?;
    let a = AllAtOnceOperator::from_spec(spec)?;
    let f = assemble_rhs(spec, a.spatial())?;
    let p = build_preconditioner(spec, None)?;
    let x_hat0 = x_hat0.map_or_else(|| vec![0.0; dim], <[f64]>::to_vec);
    let cfg = GmresConfig::full_memory(dim, 1e-13);

    let x0 = p.apply_two_sided(&x_hat0, TwoSided::RInv)?;
    let (_, one) = gmres_solve(&a, Some(&p), &f, Some(&x0), &cfg)?;

    let two_op = FnOperator::new(dim, |x: &[f64], y: &mut [f64]| {
        let r = p.apply_two_sided(x, TwoSided::RInv).expect("dimension");
        let mut ar = vec![0.0; dim];
        a.apply(&r, &mut ar);
        y.copy_from_slice(&p.apply_two_sided(&ar, TwoSided::LInv).expect("dimension"));
    });
    let rhs = p.apply_two_sided(&f, TwoSided::LInv)?;
    let (_, two) = gmres_solve(&two_op, None, &rhs, Some(&x_hat0), &cfg)?;

    let c = 1.0 / (p.omega() * p.bounds().p_min_eig_bound).sqrt();
    Ok(ResidualPair {
        one_sided: one.preconditioned_residual_history,
        two_sided: two.preconditioned_residual_history,
        c,
    })
}

/// `‖r_j‖₂ ≤ (1/√(ωč)) ‖r̂_j‖₂ + 1e-12` at every common iteration.
pub fn check_residual_relation(spec: &ProblemSpec, x_hat0: Option<&[f64]>) -> Result<TheoremReport> {
    let pair = residual_histories(spec, x_hat0)?;
    let tol = 1e-12;
    let mut rep = TheoremReport::new(format!("residual_relation[{}]", short_label(spec)), tol);
    let common = pair.one_sided.len().min(pair.two_sided.len());
    let mut worst_ratio = 0.0_f64;
    for j in 0..common {
        let (r, rh) = (pair.one_sided[j], pair.two_sided[j]);
        if pair.c * rh > 0.0 {
            worst_ratio = worst_ratio.max(r / (pair.c * rh));
        }
        rep.require(r <= pair.c * rh + tol, || {
            format!("iteration {j}: {r:e} > {:e} * {rh:e}", pair.c)
        });
    }
    rep.record("c", pair.c);
    rep.record("iterations_compared", common as f64);
    rep.record("worst_ratio", worst_ratio);
    Ok(rep)
}

// ============================================================================
// Kernel checks
// ============================================================================

/// DST involution and isometry against the dense sine matrix.
pub fn check_dst(seed: u64) -> Result<TheoremReport> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut rep = TheoremReport::new("dst_involution_isometry", 1e-12);
    for n in [1usize, 2, 7, 31, 64, 255] {
        let plan = SineTransformPlan::new(n)?;
        let x = random_vec(n, &mut rng);
        let y = plan.apply(&x)?;
        let back = plan.apply(&y)?;
        let s = sine_matrix(n);
        let dense: Vec<f64> = (0..n)
            .map(|i| (0..n).map(|j| s[i * n + j] * x[j]).sum())
            .collect();
        let inv_err = max_abs_diff(&back, &x);
        let dense_err = max_abs_diff(&y, &dense);
        let norm_err = (y.iter().map(|v| v * v).sum::<f64>().sqrt() - x.iter().map(|v| v * v).sum::<f64>().sqrt()).abs();
        rep.record(format!("involution_err[n={n}]"), inv_err);
        rep.record(format!("dense_err[n={n}]"), dense_err);
        rep.require(inv_err <= 1e-12 && dense_err <= 1e-12 && norm_err <= 1e-12, || {
            format!("n={n}: involution {inv_err:e}, dense {dense_err:e}, norm {norm_err:e}")
        });
    }
    Ok(rep)
}

/// Triangular Toeplitz inverse: `L · inv_col = e₁`.
pub fn check_iltt_inverse(seed: u64) -> Result<TheoremReport> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut rep = TheoremReport::new("iltt_inverse", 1e-10);
    for m in [1usize, 2, 63, 64, 65, 1 << 10, 1 << 16] {
        let mut col = random_vec(m, &mut rng);
        col[0] = 2.0 + col[0].abs();
        for (k, c) in col.iter_mut().enumerate().skip(1) {
            *c /= (k * k) as f64;
        }
        let l = LowerToeplitz::new(col)?;
        let inv = l.inverse_first_column()?;
        let e = l.matvec(&inv)?;
        let err = e
            .iter()
            .enumerate()
            .fold(0.0_f64, |a, (i, v)| a.max((v - if i == 0 { 1.0 } else { 0.0 }).abs()));
        rep.record(format!("residual[m={m}]"), err);
        rep.require(err <= 1e-10, || format!("m={m}: |L l_inv - e1| = {err:e}"));
    }
    Ok(rep)
}

/// FFT Toeplitz products against the dense product.
pub fn check_toeplitz_matvec(seed: u64) -> Result<TheoremReport> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut rep = TheoremReport::new("toeplitz_fft_vs_dense", 1e-12);
    for n in [1usize, 2, 17, 128, 512] {
        let t = SymmetricToeplitz::new(random_vec(n, &mut rng))?;
        let x = random_vec(n, &mut rng);
        let y = t.matvec(&x)?;
        let d = t.to_dense();
        let dense: Vec<f64> = (0..n)
            .map(|i| (0..n).map(|j| d[i * n + j] * x[j]).sum())
            .collect();
        let rel = max_abs_diff(&y, &dense) / max_abs(&dense).max(f64::MIN_POSITIVE);
        rep.record(format!("rel_err[n={n}]"), rel);
        rep.require(rel <= 1e-12, || format!("n={n}: relative error {rel:e}"));
    }
    Ok(rep)
}

/// Dense `H_θ Q_θ = T`.
pub fn check_h_times_q(theta_grid: &[f64], m_max: usize) -> Result<TheoremReport> {
    let mut rep = TheoremReport::new("h_theta_q_theta_is_t", 1e-12);
    for &theta in theta_grid {
        for m in [1usize, 2, 5, 16, m_max] {
            let dt = 1.0 / m as f64;
            let q = q_theta_first_column(theta, dt, m)?;
            let mut err = 0.0_f64;
            for i in 0..m {
                for j in 0..=i {
                    let mut v = theta * dt * q[i - j];
                    if i > j {
                        v += (1.0 - theta) * dt * q[i - 1 - j];
                    }
                    let t = match i - j {
                        0 => 1.0,
                        1 => -1.0,
                        _ => 0.0,
                    };
                    err = err.max((v - t).abs());
                }
            }
            rep.record(format!("err[theta={theta},M={m}]"), err);
            rep.require(err <= 1e-12, || format!("theta={theta} M={m}: error {err:e}"));
        }
    }
    Ok(rep)
}

/// Matrix-free `A` against the dense Kronecker assembly on random probes.
/// Errors are measured relative to `max(1, ‖Au‖∞)`.
pub fn check_all_at_once_dense(spec: &ProblemSpec, probes: usize, seed: u64) -> Result<TheoremReport> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let dense = dense_assemble(spec, DenseKind::A, None)?.to_matrix();
    let a = AllAtOnceOperator::from_spec(spec)?;
    let mut rep = TheoremReport::new(format!("all_at_once_vs_dense[{}]", short_label(spec)), 1e-11);
    let mut worst = 0.0_f64;
    for _ in 0..probes {
        let u = random_vec(a.dim(), &mut rng);
        let got = a.apply_all_at_once(&u)?;
        let expect = &dense * DVector::from_vec(u);
        let scale = max_abs(expect.as_slice()).max(1.0);
        worst = worst.max(max_abs_diff(&got, expect.as_slice()) / scale);
    }
    rep.record("max_scaled_err", worst);
    rep.require(worst <= 1e-11, || format!("max error {worst:e} relative to max(1, |Au|)"));
    Ok(rep)
}

/// Dense `P_ω` from its definition against the block diagonalization built
/// from the preconditioner's eigenvalues, and `P_ω⁻¹` against the fast apply.
pub fn check_preconditioner_dense(spec: &ProblemSpec, seed: u64) -> Result<TheoremReport> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let p = build_preconditioner(spec, None)?;
    let dense = dense_assemble(spec, DenseKind::POmega, Some(p.omega()))?.to_matrix();
    let m = spec.m;
    let s = spec
        .n
        .iter()
        .map(|&n| DMatrix::from_row_slice(n, n, &sine_matrix(n)))
        .reduce(|a, b| a.kronecker(&b))
        .expect("at least one axis");
    let q = dense_q(spec.theta, spec.dt(), m)?;
    let n = spec.spatial_len();
    let mut blk = DMatrix::zeros(n * m, n * m);
    for (i, &l) in p.lambdas().iter().enumerate() {
        let d = DMatrix::identity(m, m) * (p.omega() * l) + &q;
        blk.view_mut((i * m, i * m), (m, m)).copy_from(&d);
    }
    let sm = s.kronecker(&DMatrix::<f64>::identity(m, m));
    let rebuilt = &sm * blk * &sm;
    let scale = dense.amax();
    let recon = (&dense - rebuilt).amax() / scale;
    let mut rep = TheoremReport::new(format!("preconditioner_vs_dense[{}]", short_label(spec)), 1e-10);
    rep.record("block_reconstruction_rel_err", recon);
    rep.require(recon <= 1e-10, || format!("block reconstruction error {recon:e}"));

    let u = random_vec(n * m, &mut rng);
    let v = &dense * DVector::from_vec(u.clone());
    let back = p.apply_pinv(v.as_slice())?;
    let err = max_abs_diff(&back, &u);
    rep.record("pinv_roundtrip_err", err);
    rep.require(err <= 1e-10, || format!("P_omega^-1 P_omega u error {err:e}"));
    Ok(rep)
}

/// Dense solve of `A u = f` against marching the θ-scheme step by step.
pub fn check_time_march_equivalence(spec: &ProblemSpec) -> Result<TheoremReport> {
    let (m, n) = (spec.m, spec.spatial_len());
    guard("time march", m * n, DENSE_LIMIT)?;
    let a = dense_assemble(spec, DenseKind::A, None)?.to_matrix();
    let op = AllAtOnceOperator::from_spec(spec)?;
    let f = assemble_rhs(spec, op.spatial())?;
    let all = a
        .lu()
        .solve(&DVector::from_vec(f))
        .ok_or_else(|| Error::Singular("all-at-once matrix".into()))?;

    let g = dense_g(spec)?;
    let (theta, dt) = (spec.theta, spec.dt());
    let iden = DMatrix::<f64>::identity(n, n);
    let lhs = (&iden + &g * (theta * dt)).lu();
    let rhs_op = &iden - &g * ((1.0 - theta) * dt);
    let mut u = DVector::from_vec(crate::discretization::initial_vector(spec));
    let points: Vec<Vec<f64>> = (0..n).map(|p| spec.grid_point(p)).collect();
    let mut err = 0.0_f64;
    let mut scale = 1.0_f64;
    for step in 0..m {
        let t = (step as f64 + theta) * dt;
        let src = DVector::from_iterator(n, points.iter().map(|x| dt * (spec.source)(x, t)));
        u = lhs
            .solve(&(&rhs_op * &u + src))
            .ok_or_else(|| Error::Singular("time step matrix".into()))?;
        for p in 0..n {
            scale = scale.max(u[p].abs());
            err = err.max((u[p] - all[p * m + step]).abs());
        }
    }
    let rel = err / scale;
    let mut rep = TheoremReport::new(format!("time_march_equivalence[{}]", short_label(spec)), 1e-10);
    rep.record("rel_err", rel);
    rep.require(rel <= 1e-10, || format!("relative difference {rel:e}"));
    Ok(rep)
}

// ============================================================================
// Suites
// ============================================================================

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Suite {
    Kernels,
    Lemmas,
    Theorems,
    All,
}

impl FromStr for Suite {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "kernels" => Ok(Self::Kernels),
            "lemmas" => Ok(Self::Lemmas),
            "theorems" => Ok(Self::Theorems),
            "all" => Ok(Self::All),
            other => Err(Error::InvalidParameter(format!(
                "unknown suite `{other}` (expected kernels, lemmas, theorems or all)"
            ))),
        }
    }
}

/// Small problems used by the dense checks.
pub fn desk_specs() -> Vec<ProblemSpec> {
    vec![
        ex1_case1(4, 7, 0.5),
        ex1_case2(8, 3, 0.75),
        ex2(4, 7, 0.5, (1.1, 1.2), RieszScheme::Hoc4),
        ex2(8, 5, 1.0, (1.5, 1.9), RieszScheme::Cd2),
    ]
}

pub const THETA_GRID: [f64; 3] = [0.5, 0.75, 1.0];
pub const ALPHA_GRID: [f64; 3] = [1.1, 1.5, 1.9];

/// Specs for the condition-number grid: every kind, `θ` and `α`.
pub fn condition_grid_specs() -> Vec<ProblemSpec> {
    let mut specs = Vec::new();
    for theta in THETA_GRID {
        for alpha in ALPHA_GRID {
            specs.push(ex2(8, 15, theta, (alpha, alpha), RieszScheme::Cd2).one_dimensional());
            specs.push(ex2(8, 7, theta, (alpha, alpha), RieszScheme::Hoc4));
        }
        specs.push(ex1_case1(8, 7, theta));
        specs.push(ex1_case2(8, 7, theta));
    }
    specs
}

/// Specs for the residual-relation check.
pub fn residual_specs() -> Vec<ProblemSpec> {
    vec![
        ex2(8, 15, 0.5, (1.5, 1.5), RieszScheme::Cd2).one_dimensional(),
        ex1_case1(16, 7, 0.5),
        ex1_case2(8, 7, 0.75),
        ex2(8, 7, 1.0, (1.1, 1.2), RieszScheme::Hoc4),
    ]
}

impl ProblemSpec {
    /// Restriction of a two-dimensional problem to its first axis, with the
    /// source and initial data sampled on the midline of the second axis.
    /// The result has no exact solution; it serves the small 1-D checks.
    pub fn one_dimensional(&self) -> ProblemSpec {
        let mut out = self.clone();
        out.domain.truncate(1);
        out.n.truncate(1);
        if let OperatorKind::RieszFractional { alpha, k, .. } = &mut out.kind {
            alpha.truncate(1);
            k.truncate(1);
        }
        let mid = 0.5 * (self.domain[1].0 + self.domain[1].1);
        let (src, init) = (self.source.clone(), self.initial.clone());
        out.source = std::sync::Arc::new(move |x: &[f64], t| src(&[x[0], mid], t));
        out.initial = std::sync::Arc::new(move |x: &[f64]| init(&[x[0], mid]));
        out.exact = None;
        out
    }
}

pub fn run_kernels(seed: u64) -> Result<Vec<TheoremReport>> {
    let mut out = vec![
        check_dst(seed)?,
        check_iltt_inverse(seed)?,
        check_toeplitz_matvec(seed)?,
        check_h_times_q(&[0.5, 0.6, 0.75, 0.9, 1.0], 128)?,
    ];
    for spec in [
        ex1_case1(4, 3, 0.5),
        ex2(8, 4, 0.75, (1.3, 1.7), RieszScheme::Hoc4),
        ex1_case2(16, 7, 1.0),
    ] {
        out.push(check_all_at_once_dense(&spec, 20, seed)?);
        out.push(check_preconditioner_dense(&spec, seed)?);
    }
    for spec in desk_specs() {
        out.push(check_time_march_equivalence(&spec)?);
    }
    Ok(out)
}

pub fn run_lemmas(seed: u64) -> Result<Vec<TheoremReport>> {
    let mut out = vec![
        check_btheta_psd(&[0.5, 0.55, 0.75, 0.9, 1.0], &[8, 64, 256])?,
        check_kms_symbol(&[-0.99, -0.75, -0.5, -0.25, -0.01], 4096)?,
        check_quotient_bounds(seed, 1000),
        check_order_inversion(seed, 50),
    ];
    for alpha in ALPHA_GRID {
        for scheme in [RieszScheme::Cd2, RieszScheme::Hoc4] {
            for n in [16usize, 64, 128] {
                out.push(check_spectrum_inclusion(
                    &ex2(4, n, 0.5, (alpha, alpha), scheme).one_dimensional(),
                )?);
            }
            for alpha2 in ALPHA_GRID {
                out.push(check_spectrum_inclusion(&ex2(4, 15, 0.5, (alpha, alpha2), scheme))?);
            }
        }
    }
    out.push(check_spectrum_inclusion(&ex1_case1(4, 15, 0.5))?);
    out.push(check_spectrum_inclusion(&ex1_case2(4, 15, 0.5))?);
    Ok(out)
}

pub fn run_theorems() -> Result<Vec<TheoremReport>> {
    let mut out = Vec::new();
    for spec in condition_grid_specs() {
        let opt = crate::preconditioner::choose_omega(&spectral_bounds_for(&spec)?);
        out.push(check_condition_bound(&spec, &[opt, 0.5 * opt, 2.0 * opt])?);
    }
    for spec in residual_specs() {
        out.push(check_residual_relation(&spec, None)?);
    }
    Ok(out)
}

pub fn run_suite(suite: Suite, seed: u64) -> Result<Vec<TheoremReport>> {
    Ok(match suite {
        Suite::Kernels => run_kernels(seed)?,
        Suite::Lemmas => run_lemmas(seed)?,
        Suite::Theorems => run_theorems()?,
        Suite::All => {
            let mut all = run_kernels(seed)?;
            all.extend(run_lemmas(seed)?);
            all.extend(run_theorems()?);
            all
        }
    })
}
