//! The parallel-in-time preconditioner `P_ω = ωP̂ ⊗ I_M + I_N ⊗ Q_θ` and the
//! two-sided split `P_l P_r = P_ω`.
//!
//! `P̂ = S Λ S` with `S` the tensor DST-I, so in the spectral basis `P_ω`
//! is block diagonal with lower-triangular Toeplitz blocks
//! `D_i = ωλ_i I + Q_θ`. Applying `P_ω⁻¹` is: sine transform every time
//! slice, multiply each mode's time series by `D_i⁻¹`, transform back.

use std::collections::HashMap;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::discretization::{
    apply_q_theta_in_place, frac_centered_weights, q_theta_first_column, transpose_into, OperatorKind,
    ProblemSpec, RieszScheme,
};
use crate::error::{check_len, Error, Result};
use crate::krylov::LinearOperator;
use crate::structured::{
    tau_eigenvalues_from_col, CausalFilter, CausalKernel, LowerToeplitz, SineTransformPlan,
};

/// The lower-bound scan always covers at least this many grid sizes, so the
/// result does not depend on the current grid.
pub const LOWER_BOUND_SCAN_FLOOR: usize = 1 << 16;

/// Bounds `σ(P̂⁻¹G) ⊂ [a_min, a_max]` and `λ_min(P̂) ≥ p_min_eig_bound`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpectralBounds {
    pub a_min: f64,
    pub a_max: f64,
    pub p_min_eig_bound: f64,
}

impl SpectralBounds {
    pub fn validate(&self) -> Result<()> {
        if !(self.a_min > 0.0 && self.a_min <= self.a_max && self.p_min_eig_bound > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "inconsistent spectral bounds {self:?}"
            )));
        }
        Ok(())
    }
}

/// `√(a_min · a_max)`, the minimizer of the condition bound.
pub fn choose_omega(bounds: &SpectralBounds) -> f64 {
    (bounds.a_min * bounds.a_max).sqrt()
}

/// Condition bound `ν(ω)` for `κ₂(P_l⁻¹ A P_r⁻¹)`.
///
/// The form with the extra unit entries is used for `θ > 1/2`; it coincides
/// with the short form because `max{â/ω, ω/ǎ} ≥ 1 ≥ min{ǎ/ω, ω/â}` always.
pub fn condition_bound(a_min: f64, a_max: f64, omega: f64, theta: f64) -> f64 {
    let (upper, lower) = if theta > 0.5 {
        (
            (a_max / omega).max(1.0).max(omega / a_min),
            (a_min / omega).min(1.0).min(omega / a_max),
        )
    } else {
        ((a_max / omega).max(omega / a_min), (a_min / omega).min(omega / a_max))
    };
    ((a_max * upper) / (a_min * lower)).sqrt()
}

/// `min_{1≤n'≤n_max} (n'+1)^α (w_0 + 2Σ_{k=1}^{n'-1} w_k)` for the cd2 weights.
pub fn lower_bound_scan(alpha: f64, n_max: usize) -> Result<f64> {
    if n_max == 0 {
        return Err(Error::InvalidParameter("scan length must be at least 1".into()));
    }
    let w = frac_centered_weights(alpha, n_max)?;
    let mut partial = w[0];
    let mut best = f64::INFINITY;
    for n in 1..=n_max {
        if n >= 2 {
            partial += 2.0 * w[n - 1];
        }
        best = best.min(((n + 1) as f64).powf(alpha) * partial);
    }
    Ok(best)
}

/// Lower bound `č` on `λ_min(P̂)` for fractional problems:
/// `Σ_i K_i/(â_i - ǎ_i)^{α_i} · lower_bound_scan(α_i, max(n_i, floor))`.
pub fn assumption_lower_bound(spec: &ProblemSpec) -> Result<f64> {
    let OperatorKind::RieszFractional { alpha, k, .. } = &spec.kind else {
        return Err(Error::InvalidParameter(
            "the fractional lower bound needs a fractional problem".into(),
        ));
    };
    let mut total = 0.0;
    for axis in 0..spec.dim() {
        let (lo, hi) = spec.domain[axis];
        let scan = lower_bound_scan(alpha[axis], spec.n[axis].max(LOWER_BOUND_SCAN_FLOOR))?;
        total += k[axis] / (hi - lo).powf(alpha[axis]) * scan;
    }
    if !(total > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "lower bound {total} is not positive"
        )));
    }
    Ok(total)
}

/// `(min a, max a)` over the closed domain: the recorded analytic range, or
/// sampling on a 4× refinement of the grid including the boundary.
pub fn coefficient_range(spec: &ProblemSpec) -> Result<(f64, f64)> {
    let OperatorKind::VariableLaplacian { coeff, coeff_range } = &spec.kind else {
        return Err(Error::InvalidParameter(
            "coefficient range requested for a fractional problem".into(),
        ));
    };
    if let Some(range) = coeff_range {
        return Ok(*range);
    }
    let counts: Vec<usize> = spec.n.iter().map(|&n| 4 * (n + 1) + 1).collect();
    let total: usize = counts.iter().product();
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    let mut x = vec![0.0; spec.dim()];
    for flat in 0..total {
        let mut rest = flat;
        for axis in (0..spec.dim()).rev() {
            let i = rest % counts[axis];
            rest /= counts[axis];
            let (a, b) = spec.domain[axis];
            x[axis] = a + (b - a) * i as f64 / (counts[axis] - 1) as f64;
        }
        let v = coeff(&x);
        if !(v > 0.0 && v.is_finite()) {
            return Err(Error::InvalidCoefficient(format!("a({x:?}) = {v} is not positive")));
        }
        lo = lo.min(v);
        hi = hi.max(v);
    }
    Ok((lo, hi))
}

/// Eigenvalues of the one-dimensional factor of `P̂` on `axis`, in DST order.
pub fn axis_eigenvalues(spec: &ProblemSpec, axis: usize) -> Result<Vec<f64>> {
    let n = spec.n[axis];
    let h = spec.h(axis);
    let mode = |j: usize| 2.0 - 2.0 * ((j + 1) as f64 * std::f64::consts::PI / (n + 1) as f64).cos();
    match &spec.kind {
        OperatorKind::VariableLaplacian { .. } => Ok((0..n).map(|j| mode(j) / (h * h)).collect()),
        OperatorKind::RieszFractional { alpha, k, scheme } => {
            let a = alpha[axis];
            let w = frac_centered_weights(a, n)?;
            let scale = k[axis] * h.powf(-a);
            let tau = tau_eigenvalues_from_col(&w[..n]).lambdas;
            Ok(match scheme {
                RieszScheme::Cd2 => tau.iter().map(|l| l * scale).collect(),
                RieszScheme::Hoc4 => tau
                    .iter()
                    .enumerate()
                    .map(|(j, l)| (1.0 + a / 24.0 * mode(j)) * l * scale)
                    .collect(),
            })
        }
    }
}

/// Eigenvalues of `P̂` for every spatial mode, axis 0 slowest.
pub fn preconditioner_eigenvalues(spec: &ProblemSpec) -> Result<Vec<f64>> {
    let mut lambdas = vec![0.0];
    for axis in 0..spec.dim() {
        let ax = axis_eigenvalues(spec, axis)?;
        lambdas = lambdas
            .iter()
            .flat_map(|l| ax.iter().map(move |a| l + a))
            .collect();
    }
    Ok(lambdas)
}

pub fn spectral_bounds_for(spec: &ProblemSpec) -> Result<SpectralBounds> {
    spec.validate()?;
    let bounds = match &spec.kind {
        OperatorKind::RieszFractional { scheme, .. } => {
            let (a_min, a_max) = match scheme {
                RieszScheme::Cd2 => (0.5, 1.5),
                RieszScheme::Hoc4 => (0.375, 2.0),
            };
            SpectralBounds {
                a_min,
                a_max,
                p_min_eig_bound: assumption_lower_bound(spec)?,
            }
        }
        OperatorKind::VariableLaplacian { .. } => {
            let (a_min, a_max) = coefficient_range(spec)?;
            let p_min = (0..spec.dim())
                .map(|axis| {
                    let n = spec.n[axis] as f64;
                    let h = spec.h(axis);
                    (2.0 - 2.0 * (std::f64::consts::PI / (n + 1.0)).cos()) / (h * h)
                })
                .sum();
            SpectralBounds {
                a_min,
                a_max,
                p_min_eig_bound: p_min,
            }
        }
    };
    bounds.validate()?;
    Ok(bounds)
}

// ============================================================================
// Preconditioner
// ============================================================================

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TwoSided {
    /// `P_l⁻¹`, blocks `(√(ωλ_i) I + Q_θ/√(ωλ_i))⁻¹ = √(ωλ_i) D_i⁻¹`.
    LInv,
    /// `P_r⁻¹`, blocks `I/√(ωλ_i)`.
    RInv,
    /// `P_r`, blocks `√(ωλ_i) I`.
    RFwd,
}

#[derive(Debug, Clone)]
pub struct PintPreconditioner {
    m: usize,
    shape: Vec<usize>,
    omega: f64,
    theta: f64,
    dt: f64,
    plans: Vec<SineTransformPlan>,
    lambdas: Vec<f64>,
    q_col: Vec<f64>,
    /// Index into `inv_cols` for every spatial mode.
    mode_col: Vec<usize>,
    /// First columns of `D_i⁻¹`, one per distinct `λ_i`.
    inv_cols: Vec<CausalKernel>,
    filter: CausalFilter,
    bounds: SpectralBounds,
}

/// Builds `P_ω` for `spec`; `omega` defaults to [`choose_omega`].
pub fn build_preconditioner(spec: &ProblemSpec, omega: Option<f64>) -> Result<PintPreconditioner> {
    spec.validate()?;
    let bounds = spectral_bounds_for(spec)?;
    let omega = omega.unwrap_or_else(|| choose_omega(&bounds));
    if !(omega > 0.0 && omega.is_finite()) {
        return Err(Error::InvalidParameter(format!("omega = {omega} must be positive")));
    }
    let lambdas = preconditioner_eigenvalues(spec)?;
    if let Some(bad) = lambdas.iter().find(|&&l| !(l > 0.0)) {
        return Err(Error::Singular(format!("preconditioner eigenvalue {bad} is not positive")));
    }
    let (m, theta, dt) = (spec.m, spec.theta, spec.dt());
    let q_col = q_theta_first_column(theta, dt, m)?;

    let mut distinct: HashMap<u64, usize> = HashMap::new();
    let mut keys = Vec::new();
    let mode_col = lambdas
        .iter()
        .map(|l| {
            *distinct.entry(l.to_bits()).or_insert_with(|| {
                keys.push(*l);
                keys.len() - 1
            })
        })
        .collect();
    let filter = CausalFilter::new(m);
    let inv_cols = keys
        .par_iter()
        .map(|&l| {
            let mut col = q_col.clone();
            col[0] += omega * l;
            Ok(filter.prepare(LowerToeplitz::new(col)?.inverse_first_column()?))
        })
        .collect::<Result<Vec<_>>>()?;

    Ok(PintPreconditioner {
        m,
        shape: spec.n.clone(),
        omega,
        theta,
        dt,
        plans: spec
            .n
            .iter()
            .map(|&n| SineTransformPlan::new(n))
            .collect::<Result<_>>()?,
        lambdas,
        q_col,
        mode_col,
        inv_cols,
        filter,
        bounds,
    })
}

impl PintPreconditioner {
    pub fn omega(&self) -> f64 {
        self.omega
    }

    pub fn bounds(&self) -> &SpectralBounds {
        &self.bounds
    }

    pub fn lambdas(&self) -> &[f64] {
        &self.lambdas
    }

    pub fn q_col(&self) -> &[f64] {
        &self.q_col
    }

    pub fn time_steps(&self) -> usize {
        self.m
    }

    pub fn spatial_len(&self) -> usize {
        self.lambdas.len()
    }

    pub fn distinct_modes(&self) -> usize {
        self.inv_cols.len()
    }

    /// First column of `D_i⁻¹` for spatial mode `i`.
    pub fn inverse_column(&self, i: usize) -> &[f64] {
        self.inv_cols[self.mode_col[i]].coeffs()
    }

    fn inverse_kernel(&self, i: usize) -> &CausalKernel {
        &self.inv_cols[self.mode_col[i]]
    }

    /// `D_i⁻¹` on the time series of one or two consecutive modes starting at `i`.
    fn solve_modes(&self, i: usize, chunk: &mut [f64], scratch: &mut Vec<Complex64>) {
        let m = self.m;
        if chunk.len() == 2 * m {
            let (x1, x2) = chunk.split_at_mut(m);
            self.filter
                .apply_pair(self.inverse_kernel(i), x1, self.inverse_kernel(i + 1), x2, scratch);
        } else {
            self.filter.apply(self.inverse_kernel(i), chunk, scratch);
        }
    }

    /// In-place tensor DST of one spatial vector.
    fn tensor_dst(&self, x: &mut [f64], scratch: &mut Vec<f64>) {
        match self.shape.as_slice() {
            [_] => self.plans[0].apply_batch(x),
            [n1, n2] => {
                let (n1, n2) = (*n1, *n2);
                self.plans[1].apply_batch(x);
                scratch.resize(x.len(), 0.0);
                transpose_into(x, n1, n2, scratch);
                self.plans[0].apply_batch(scratch);
                transpose_into(scratch, n2, n1, x);
            }
            _ => unreachable!("validated dimension"),
        }
    }

    /// `(S ⊗ I_M)` on a space-major vector, in place.
    fn spatial_transform(&self, v: &mut [f64], time_major: &mut [f64]) {
        let (n, m) = (self.spatial_len(), self.m);
        transpose_into(v, n, m, time_major);
        time_major
            .par_chunks_mut(n)
            .for_each_init(Vec::new, |scratch, row| self.tensor_dst(row, scratch));
        transpose_into(time_major, m, n, v);
    }

    /// `(S ⊗ I_M) blkdiag(B_i) (S ⊗ I_M) v` where `block(i, x, scratch)`
    /// overwrites the time series of modes `i` and `i + 1` (or just `i` for
    /// the last odd one), stored consecutively in `x`.
    fn apply_spectral<F>(&self, v: &[f64], block: F) -> Result<Vec<f64>>
    where
        F: Fn(usize, &mut [f64], &mut Vec<Complex64>) + Sync,
    {
        let (n, m) = (self.spatial_len(), self.m);
        check_len(n * m, v.len())?;
        let mut out = v.to_vec();
        let mut tm = vec![0.0; n * m];
        self.spatial_transform(&mut out, &mut tm);
        out.par_chunks_mut(2 * m)
            .enumerate()
            .for_each_init(Vec::new, |scratch, (pair, x)| block(2 * pair, x, scratch));
        self.spatial_transform(&mut out, &mut tm);
        Ok(out)
    }

    /// `P_ω⁻¹ v` for a space-major `v`.
    pub fn apply_pinv(&self, v: &[f64]) -> Result<Vec<f64>> {
        self.apply_spectral(v, |i, x, scratch| self.solve_modes(i, x, scratch))
    }

    /// `P_ω v`, used to check the inverse.
    pub fn apply_forward(&self, v: &[f64]) -> Result<Vec<f64>> {
        let (theta, dt) = (self.theta, self.dt);
        self.apply_spectral(v, |first, chunk, _| {
            for (offset, x) in chunk.chunks_mut(self.m).enumerate() {
                let shift = self.omega * self.lambdas[first + offset];
                let orig = x.to_vec();
                apply_q_theta_in_place(theta, dt, x);
                for (xv, o) in x.iter_mut().zip(orig) {
                    *xv += shift * o;
                }
            }
        })
    }

    pub fn apply_two_sided(&self, v: &[f64], which: TwoSided) -> Result<Vec<f64>> {
        self.apply_spectral(v, |first, chunk, scratch| {
            if which == TwoSided::LInv {
                self.solve_modes(first, chunk, scratch);
            }
            for (offset, x) in chunk.chunks_mut(self.m).enumerate() {
                let root = (self.omega * self.lambdas[first + offset]).sqrt();
                let scale = if which == TwoSided::RInv { 1.0 / root } else { root };
                x.iter_mut().for_each(|xv| *xv *= scale);
            }
        })
    }

    pub fn two_sided(&self, which: TwoSided) -> TwoSidedOperator<'_> {
        TwoSidedOperator { p: self, which }
    }
}

/// `P_ω⁻¹` as an operator.
impl LinearOperator for PintPreconditioner {
    fn dim(&self) -> usize {
        self.m * self.spatial_len()
    }

    fn apply(&self, x: &[f64], y: &mut [f64]) {
        // Lengths are checked by the caller contract of `LinearOperator`.
        let out = self.apply_pinv(x).expect("operator dimension");
        y.copy_from_slice(&out);
    }
}

pub struct TwoSidedOperator<'a> {
    p: &'a PintPreconditioner,
    which: TwoSided,
}

impl LinearOperator for TwoSidedOperator<'_> {
    fn dim(&self) -> usize {
        self.p.dim()
    }

    fn apply(&self, x: &[f64], y: &mut [f64]) {
        let out = self.p.apply_two_sided(x, self.which).expect("operator dimension");
        y.copy_from_slice(&out);
    }
}
