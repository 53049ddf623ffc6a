//! Problem description, spatial operators, θ-method temporal factors and the
//! space-major all-at-once operator `A = G ⊗ I_M + I_N ⊗ Q_θ`.
//!
//! Vectors of length `M·N` are stored space-major: entry `i·M + m` holds the
//! unknown at spatial node `i` and time level `m + 1`. Spatial nodes are
//! numbered with axis 0 varying slowest.

use std::fmt;
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{check_len, Error, Result};
use crate::krylov::LinearOperator;
use crate::structured::{bidiagonal_forward_solve_in_place, SymmetricToeplitz};

pub type ScalarField = Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>;
pub type SpaceTimeField = Arc<dyn Fn(&[f64], f64) -> f64 + Send + Sync>;

/// Dense checks and dense oracles refuse spatial sizes beyond this.
pub const DENSE_SPATIAL_LIMIT: usize = 4096;

// ============================================================================
// Problem description
// ============================================================================

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RieszScheme {
    /// Second-order fractional centered difference.
    Cd2,
    /// Compact fourth-order correction `½(QW̃ + W̃Q)` with `Q = I + (α/24)·tridiag(-1,2,-1)`.
    Hoc4,
}

impl std::str::FromStr for RieszScheme {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "cd2" => Ok(Self::Cd2),
            "hoc4" => Ok(Self::Hoc4),
            other => Err(Error::InvalidParameter(format!(
                "unknown scheme `{other}` (expected cd2 or hoc4)"
            ))),
        }
    }
}

#[derive(Clone)]
pub enum OperatorKind {
    /// `-∇·(a∇)` with a flux-form five-point stencil.
    VariableLaplacian {
        coeff: ScalarField,
        /// Analytic `(min a, max a)` over the closed domain, when known.
        coeff_range: Option<(f64, f64)>,
    },
    /// `-Σ K_i ∂^{α_i}/∂|x_i|^{α_i}`.
    RieszFractional {
        alpha: Vec<f64>,
        k: Vec<f64>,
        scheme: RieszScheme,
    },
}

impl fmt::Debug for OperatorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::VariableLaplacian { coeff_range, .. } => f
                .debug_struct("VariableLaplacian")
                .field("coeff_range", coeff_range)
                .finish_non_exhaustive(),
            Self::RieszFractional { alpha, k, scheme } => f
                .debug_struct("RieszFractional")
                .field("alpha", alpha)
                .field("k", k)
                .field("scheme", scheme)
                .finish(),
        }
    }
}

/// One instance of `u_t = -G u + f` on a tensor grid with homogeneous
/// Dirichlet boundaries.
#[derive(Clone)]
pub struct ProblemSpec {
    pub name: String,
    pub kind: OperatorKind,
    /// Per-axis intervals `(lo, hi)`.
    pub domain: Vec<(f64, f64)>,
    pub t_final: f64,
    /// Number of time steps.
    pub m: usize,
    /// Interior points per axis.
    pub n: Vec<usize>,
    pub theta: f64,
    pub source: SpaceTimeField,
    pub initial: ScalarField,
    pub exact: Option<SpaceTimeField>,
}

impl fmt::Debug for ProblemSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ProblemSpec")
            .field("name", &self.name)
            .field("kind", &self.kind)
            .field("domain", &self.domain)
            .field("t_final", &self.t_final)
            .field("m", &self.m)
            .field("n", &self.n)
            .field("theta", &self.theta)
            .finish_non_exhaustive()
    }
}

pub fn validate_theta(theta: f64) -> Result<()> {
    if (0.5..=1.0).contains(&theta) {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!(
            "theta = {theta} violates the constraint theta ∈ [1/2, 1]"
        )))
    }
}

impl ProblemSpec {
    pub fn validate(&self) -> Result<()> {
        let d = self.dim();
        if !(1..=2).contains(&d) {
            return Err(Error::InvalidParameter(format!(
                "spatial dimension {d} is not supported (1 or 2)"
            )));
        }
        if self.n.len() != d {
            return Err(Error::InvalidParameter(format!(
                "{} grid sizes given for a {d}-dimensional domain",
                self.n.len()
            )));
        }
        validate_theta(self.theta)?;
        if self.m == 0 {
            return Err(Error::InvalidParameter("M must be at least 1".into()));
        }
        if !(self.t_final > 0.0 && self.t_final.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "final time {} must be positive",
                self.t_final
            )));
        }
        for (axis, (&(lo, hi), &n)) in self.domain.iter().zip(&self.n).enumerate() {
            if n == 0 {
                return Err(Error::InvalidParameter(format!(
                    "axis {axis}: need at least one interior point"
                )));
            }
            if !(hi > lo) {
                return Err(Error::InvalidParameter(format!(
                    "axis {axis}: empty interval ({lo}, {hi})"
                )));
            }
        }
        if let OperatorKind::RieszFractional { alpha, k, .. } = &self.kind {
            if alpha.len() != d || k.len() != d {
                return Err(Error::InvalidParameter(
                    "alpha and K need one entry per axis".into(),
                ));
            }
            for &a in alpha {
                if !(a > 1.0 && a < 2.0) {
                    return Err(Error::InvalidParameter(format!(
                        "alpha = {a} violates the constraint alpha ∈ (1, 2)"
                    )));
                }
            }
            for &kk in k {
                if !(kk > 0.0) {
                    return Err(Error::InvalidParameter(format!(
                        "K = {kk} must be positive"
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.domain.len()
    }

    pub fn dt(&self) -> f64 {
        self.t_final / self.m as f64
    }

    pub fn h(&self, axis: usize) -> f64 {
        let (lo, hi) = self.domain[axis];
        (hi - lo) / (self.n[axis] + 1) as f64
    }

    /// `N = Π n_i`.
    pub fn spatial_len(&self) -> usize {
        self.n.iter().product()
    }

    pub fn total_len(&self) -> usize {
        self.m * self.spatial_len()
    }

    /// Coordinates of spatial node `p`.
    pub fn grid_point(&self, p: usize) -> Vec<f64> {
        let mut idx = vec![0; self.dim()];
        let mut rest = p;
        for axis in (0..self.dim()).rev() {
            idx[axis] = rest % self.n[axis];
            rest /= self.n[axis];
        }
        idx.iter()
            .enumerate()
            .map(|(axis, &i)| self.domain[axis].0 + (i + 1) as f64 * self.h(axis))
            .collect()
    }

    /// Time of level `m` (`m = 0` is the initial time).
    pub fn time(&self, m: usize) -> f64 {
        m as f64 * self.dt()
    }

    pub fn with_sizes(&self, m: usize, n: Vec<usize>) -> Self {
        Self {
            m,
            n,
            ..self.clone()
        }
    }
}

// ============================================================================
// Fractional centered differences
// ============================================================================

/// Weights `g_0..g_n` of the fractional centered difference of order `alpha`.
///
/// `g_0 = Γ(α+1)/Γ(α/2+1)²` and `g_{k+1} = g_k (k - α/2)/(k + 1 + α/2)`.
/// The recurrence avoids the sign-alternating Gamma values that overflow.
pub fn frac_centered_weights(alpha: f64, n: usize) -> Result<Vec<f64>> {
    if !(alpha > 1.0 && alpha <= 2.0) {
        return Err(Error::InvalidParameter(format!(
            "alpha = {alpha} outside (1, 2]"
        )));
    }
    use statrs::function::gamma::gamma;
    let mut g = Vec::with_capacity(n + 1);
    g.push(gamma(alpha + 1.0) / gamma(alpha / 2.0 + 1.0).powi(2));
    for k in 0..n {
        let kf = k as f64;
        g.push(g[k] * (kf - alpha / 2.0) / (kf + 1.0 + alpha / 2.0));
    }
    Ok(g)
}

/// One-dimensional Riesz operator: a symmetric Toeplitz matrix plus, for
/// `hoc4`, a symmetric rank-four correction in the first and last rows and
/// columns.
#[derive(Debug, Clone)]
pub struct AxisOperator {
    toeplitz: SymmetricToeplitz,
    /// `c·r` with `r_j = w_{j+1}`; the correction is
    /// `e₀(cr)ᵀ + (cr)e₀ᵀ + e_{n-1}(J cr)ᵀ + (J cr)e_{n-1}ᵀ`, `J` the flip.
    corner: Option<Vec<f64>>,
}

impl AxisOperator {
    pub fn order(&self) -> usize {
        self.toeplitz.order()
    }

    pub fn toeplitz(&self) -> &SymmetricToeplitz {
        &self.toeplitz
    }

    pub fn scaled(&self, factor: f64) -> Result<Self> {
        Ok(Self {
            toeplitz: SymmetricToeplitz::new(
                self.toeplitz.first_col().iter().map(|v| v * factor).collect(),
            )?,
            corner: self
                .corner
                .as_ref()
                .map(|c| c.iter().map(|v| v * factor).collect()),
        })
    }

    pub fn apply(&self, x: &[f64], y: &mut [f64]) {
        self.toeplitz.matvec_into(x, y);
        if let Some(cr) = &self.corner {
            let n = x.len();
            let last = n - 1;
            let dot_front: f64 = cr.iter().zip(x).map(|(a, b)| a * b).sum();
            let dot_back: f64 = cr.iter().zip(x.iter().rev()).map(|(a, b)| a * b).sum();
            y[0] += dot_front;
            y[last] += dot_back;
            let (x0, xl) = (x[0], x[last]);
            for j in 0..n {
                y[j] += cr[j] * x0 + cr[last - j] * xl;
            }
        }
    }

    /// Row-major dense expansion.
    pub fn to_dense(&self) -> Vec<f64> {
        let n = self.order();
        let mut out = vec![0.0; n * n];
        let mut e = vec![0.0; n];
        let mut col = vec![0.0; n];
        for j in 0..n {
            e[j] = 1.0;
            self.apply(&e, &mut col);
            e[j] = 0.0;
            for i in 0..n {
                out[i * n + j] = col[i];
            }
        }
        out
    }
}

/// `h^{-α}` times the cd2 Toeplitz matrix, or its compact fourth-order
/// symmetrization for `hoc4`.
pub fn riesz_operator_1d(alpha: f64, n: usize, h: f64, scheme: RieszScheme) -> Result<AxisOperator> {
    if !(alpha > 1.0 && alpha <= 2.0) {
        return Err(Error::InvalidParameter(format!(
            "alpha = {alpha} outside (1, 2]"
        )));
    }
    if n == 0 || !(h > 0.0) {
        return Err(Error::InvalidParameter(
            "need n >= 1 and h > 0 for a Riesz operator".into(),
        ));
    }
    let scale = h.powf(-alpha);
    let w = frac_centered_weights(alpha, n + 1)?;
    match scheme {
        RieszScheme::Cd2 => Ok(AxisOperator {
            toeplitz: SymmetricToeplitz::new(w[..n].iter().map(|v| v * scale).collect())?,
            corner: None,
        }),
        RieszScheme::Hoc4 => {
            // Bi-infinite symbol product (1 + (α/24)(2 - 2cos φ)) · ŵ(φ).
            let beta = alpha / 24.0;
            let col: Vec<f64> = (0..n)
                .map(|d| {
                    let prev = w[if d == 0 { 1 } else { d - 1 }];
                    (1.0 + 2.0 * beta) * w[d] - beta * (prev + w[d + 1])
                })
                .collect();
            let corner = (0..n).map(|j| 0.5 * beta * w[j + 1] * scale).collect();
            Ok(AxisOperator {
                toeplitz: SymmetricToeplitz::new(col.iter().map(|v| v * scale).collect())?,
                corner: Some(corner),
            })
        }
    }
}

// ============================================================================
// Variable-coefficient Laplacian
// ============================================================================

/// Flux-form stencil for `-∇·(a∇)` with `a` sampled at cell midpoints.
#[derive(Debug, Clone)]
pub struct FluxStencil {
    shape: Vec<usize>,
    strides: Vec<usize>,
    diag: Vec<f64>,
    /// `lower[axis][p]`: weight coupling `p` to its neighbour at `p - stride`
    /// (zero when that neighbour is on the boundary).
    lower: Vec<Vec<f64>>,
}

impl FluxStencil {
    pub fn dim(&self) -> usize {
        self.diag.len()
    }

    fn axis_index(&self, p: usize, axis: usize) -> usize {
        (p / self.strides[axis]) % self.shape[axis]
    }

    pub fn apply(&self, x: &[f64], y: &mut [f64]) {
        self.apply_blocks(x, 1, y);
    }

    /// `(G ⊗ I_b) x` for contiguous blocks of length `b`.
    pub fn apply_blocks(&self, x: &[f64], b: usize, y: &mut [f64]) {
        y.par_chunks_mut(b).enumerate().for_each(|(p, yp)| {
            let d = self.diag[p];
            for (yv, xv) in yp.iter_mut().zip(&x[p * b..(p + 1) * b]) {
                *yv = d * xv;
            }
            for axis in 0..self.shape.len() {
                let s = self.strides[axis];
                let i = self.axis_index(p, axis);
                if i > 0 {
                    let w = self.lower[axis][p];
                    let q = p - s;
                    for (yv, xv) in yp.iter_mut().zip(&x[q * b..(q + 1) * b]) {
                        *yv -= w * xv;
                    }
                }
                if i + 1 < self.shape[axis] {
                    let q = p + s;
                    let w = self.lower[axis][q];
                    for (yv, xv) in yp.iter_mut().zip(&x[q * b..(q + 1) * b]) {
                        *yv -= w * xv;
                    }
                }
            }
        });
    }
}

/// Builds the flux-form stencil for `kind = VariableLaplacian`.
pub fn variable_laplacian(spec: &ProblemSpec) -> Result<FluxStencil> {
    let OperatorKind::VariableLaplacian { coeff, .. } = &spec.kind else {
        return Err(Error::InvalidParameter(
            "variable Laplacian requested for a fractional problem".into(),
        ));
    };
    let d = spec.dim();
    let shape = spec.n.clone();
    let mut strides = vec![1; d];
    for axis in (0..d.saturating_sub(1)).rev() {
        strides[axis] = strides[axis + 1] * shape[axis + 1];
    }
    let n_total = spec.spatial_len();
    let mut diag = vec![0.0; n_total];
    let mut lower = vec![vec![0.0; n_total]; d];
    let sample = |x: &[f64]| -> Result<f64> {
        let a = coeff(x);
        if !(a > 0.0 && a.is_finite()) {
            return Err(Error::InvalidCoefficient(format!(
                "a({x:?}) = {a} is not positive"
            )));
        }
        Ok(a)
    };
    for p in 0..n_total {
        let x = spec.grid_point(p);
        for axis in 0..d {
            let h = spec.h(axis);
            let inv_h2 = 1.0 / (h * h);
            let mut mid = x.clone();
            mid[axis] = x[axis] - 0.5 * h;
            let a_lo = sample(&mid)? * inv_h2;
            mid[axis] = x[axis] + 0.5 * h;
            let a_hi = sample(&mid)? * inv_h2;
            diag[p] += a_lo + a_hi;
            lower[axis][p] = a_lo;
        }
    }
    Ok(FluxStencil {
        shape,
        strides,
        diag,
        lower,
    })
}

// ============================================================================
// Spatial operator
// ============================================================================

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SpatialStructure {
    ToeplitzKronSum,
    SparseStencil,
}

/// The SPD spatial matrix `G` (the discretization of `-L`).
#[derive(Debug, Clone)]
pub enum SpatialOperator {
    /// `Σ_i I ⊗ G_i ⊗ I` with per-axis factors already scaled by `K_i`.
    KronSum {
        shape: Vec<usize>,
        axes: Vec<AxisOperator>,
    },
    Stencil(FluxStencil),
}

impl SpatialOperator {
    pub fn dim(&self) -> usize {
        match self {
            Self::KronSum { shape, .. } => shape.iter().product(),
            Self::Stencil(s) => s.dim(),
        }
    }

    pub fn structure(&self) -> SpatialStructure {
        match self {
            Self::KronSum { .. } => SpatialStructure::ToeplitzKronSum,
            Self::Stencil(_) => SpatialStructure::SparseStencil,
        }
    }

    pub fn apply(&self, x: &[f64], y: &mut [f64]) {
        match self {
            Self::Stencil(s) => s.apply(x, y),
            Self::KronSum { shape, axes } => kron_sum_apply(shape, axes, x, y),
        }
    }

    /// `(G ⊗ I_M) u` for a space-major vector with `m` time levels.
    pub fn apply_space_major(&self, u: &[f64], m: usize, out: &mut [f64]) {
        match self {
            Self::Stencil(s) => s.apply_blocks(u, m, out),
            Self::KronSum { .. } => {
                let n = self.dim();
                let tm = transpose(u, n, m);
                let mut res = vec![0.0; n * m];
                res.par_chunks_mut(n)
                    .zip(tm.par_chunks(n))
                    .for_each(|(y, x)| self.apply(x, y));
                transpose_into(&res, m, n, out);
            }
        }
    }

    /// Row-major dense expansion; refused beyond [`DENSE_SPATIAL_LIMIT`].
    pub fn to_dense(&self) -> Result<Vec<f64>> {
        let n = self.dim();
        if n > DENSE_SPATIAL_LIMIT {
            return Err(Error::SizeGuard {
                what: "spatial operator".into(),
                dim: n,
                limit: DENSE_SPATIAL_LIMIT,
            });
        }
        let mut out = vec![0.0; n * n];
        let mut e = vec![0.0; n];
        let mut col = vec![0.0; n];
        for j in 0..n {
            e[j] = 1.0;
            self.apply(&e, &mut col);
            e[j] = 0.0;
            for i in 0..n {
                out[i * n + j] = col[i];
            }
        }
        Ok(out)
    }
}

fn kron_sum_apply(shape: &[usize], axes: &[AxisOperator], x: &[f64], y: &mut [f64]) {
    y.iter_mut().for_each(|v| *v = 0.0);
    let total: usize = shape.iter().product();
    let mut gathered = Vec::new();
    let mut result = Vec::new();
    for (axis, op) in axes.iter().enumerate() {
        let n = shape[axis];
        let inner: usize = shape[axis + 1..].iter().product();
        let outer = total / (n * inner);
        gathered.resize(n, 0.0);
        result.resize(n, 0.0);
        for o in 0..outer {
            for r in 0..inner {
                let base = o * n * inner + r;
                for j in 0..n {
                    gathered[j] = x[base + j * inner];
                }
                op.apply(&gathered, &mut result);
                for j in 0..n {
                    y[base + j * inner] += result[j];
                }
            }
        }
    }
}

/// Builds `G` for any supported kind.
pub fn build_spatial_operator(spec: &ProblemSpec) -> Result<SpatialOperator> {
    spec.validate()?;
    match &spec.kind {
        OperatorKind::VariableLaplacian { .. } => Ok(SpatialOperator::Stencil(variable_laplacian(spec)?)),
        OperatorKind::RieszFractional { alpha, k, scheme } => {
            let axes = (0..spec.dim())
                .map(|axis| {
                    riesz_operator_1d(alpha[axis], spec.n[axis], spec.h(axis), *scheme)?.scaled(k[axis])
                })
                .collect::<Result<Vec<_>>>()?;
            Ok(SpatialOperator::KronSum {
                shape: spec.n.clone(),
                axes,
            })
        }
    }
}

// ============================================================================
// Temporal factors
// ============================================================================

/// First column of `Q_θ = H_θ⁻¹ T`, by forward substitution of `H_θ x = T e₁`.
pub fn q_theta_first_column(theta: f64, dt: f64, m: usize) -> Result<Vec<f64>> {
    validate_theta(theta)?;
    if !(dt > 0.0) || m == 0 {
        return Err(Error::InvalidParameter(
            "need dt > 0 and M >= 1 for Q_theta".into(),
        ));
    }
    let mut col = vec![0.0; m];
    col[0] = 1.0;
    if m > 1 {
        col[1] = -1.0;
    }
    bidiagonal_forward_solve_in_place(theta * dt, (1.0 - theta) * dt, &mut col)?;
    Ok(col)
}

/// `x <- Q_θ x = H_θ⁻¹ (T x)` in `O(M)`.
pub fn apply_q_theta_in_place(theta: f64, dt: f64, x: &mut [f64]) {
    for i in (1..x.len()).rev() {
        x[i] -= x[i - 1];
    }
    // Diagonal is θΔt > 0 after validation, so the solve cannot fail.
    let _ = bidiagonal_forward_solve_in_place(theta * dt, (1.0 - theta) * dt, x);
}

// ============================================================================
// Orderings
// ============================================================================

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Ordering {
    /// Time-major (`m·N + i`) to space-major (`i·M + m`).
    TimeToSpace,
    SpaceToTime,
}

pub fn time_space_permute(v: &[f64], m: usize, n: usize, direction: Ordering) -> Result<Vec<f64>> {
    check_len(m * n, v.len())?;
    Ok(match direction {
        Ordering::TimeToSpace => transpose(v, m, n),
        Ordering::SpaceToTime => transpose(v, n, m),
    })
}

/// Transpose of a row-major `rows × cols` array.
pub(crate) fn transpose(a: &[f64], rows: usize, cols: usize) -> Vec<f64> {
    let mut out = vec![0.0; rows * cols];
    transpose_into(a, rows, cols, &mut out);
    out
}

pub(crate) fn transpose_into(a: &[f64], rows: usize, cols: usize, out: &mut [f64]) {
    const BLOCK: usize = 32;
    for r0 in (0..rows).step_by(BLOCK) {
        for c0 in (0..cols).step_by(BLOCK) {
            for r in r0..(r0 + BLOCK).min(rows) {
                for c in c0..(c0 + BLOCK).min(cols) {
                    out[c * rows + r] = a[r * cols + c];
                }
            }
        }
    }
}

// ============================================================================
// All-at-once operator
// ============================================================================

/// Matrix-free `A = G ⊗ I_M + I_N ⊗ Q_θ` on space-major vectors.
#[derive(Debug, Clone)]
pub struct AllAtOnceOperator {
    g: SpatialOperator,
    q_col: Vec<f64>,
    theta: f64,
    dt: f64,
    m: usize,
}

impl AllAtOnceOperator {
    pub fn new(g: SpatialOperator, theta: f64, dt: f64, m: usize) -> Result<Self> {
        let q_col = q_theta_first_column(theta, dt, m)?;
        Ok(Self {
            g,
            q_col,
            theta,
            dt,
            m,
        })
    }

    pub fn from_spec(spec: &ProblemSpec) -> Result<Self> {
        Self::new(build_spatial_operator(spec)?, spec.theta, spec.dt(), spec.m)
    }

    pub fn spatial(&self) -> &SpatialOperator {
        &self.g
    }

    pub fn q_col(&self) -> &[f64] {
        &self.q_col
    }

    pub fn theta(&self) -> f64 {
        self.theta
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn time_steps(&self) -> usize {
        self.m
    }

    pub fn spatial_len(&self) -> usize {
        self.g.dim()
    }

    pub fn apply_all_at_once(&self, u: &[f64]) -> Result<Vec<f64>> {
        check_len(self.dim(), u.len())?;
        let mut out = vec![0.0; u.len()];
        self.apply(u, &mut out);
        Ok(out)
    }
}

impl LinearOperator for AllAtOnceOperator {
    fn dim(&self) -> usize {
        self.m * self.g.dim()
    }

    fn apply(&self, u: &[f64], out: &mut [f64]) {
        let m = self.m;
        self.g.apply_space_major(u, m, out);
        let (theta, dt) = (self.theta, self.dt);
        out.par_chunks_mut(m)
            .zip(u.par_chunks(m))
            .for_each_init(
                || vec![0.0; m],
                |buf, (y, x)| {
                    buf.copy_from_slice(x);
                    apply_q_theta_in_place(theta, dt, buf);
                    for (yv, b) in y.iter_mut().zip(buf.iter()) {
                        *yv += b;
                    }
                },
            );
    }
}

// ============================================================================
// Right-hand side and exact solution
// ============================================================================

/// Initial data `ψ` at the grid nodes.
pub fn initial_vector(spec: &ProblemSpec) -> Vec<f64> {
    (0..spec.spatial_len())
        .map(|p| (spec.initial)(&spec.grid_point(p)))
        .collect()
}

/// Space-major right-hand side `f = (I_N ⊗ H_θ)⁻¹ f̃`.
///
/// `f̃` has time-major blocks `Δt f^{m,θ}` with the source sampled at
/// `t = (m - 1 + θ)Δt`, and `(I - (1-θ)Δt G) u⁰` added to the first block.
/// This is the time-stepping recurrence multiplied through by `Δt`.
pub fn assemble_rhs(spec: &ProblemSpec, g: &SpatialOperator) -> Result<Vec<f64>> {
    spec.validate()?;
    let n = spec.spatial_len();
    check_len(n, g.dim())?;
    let m = spec.m;
    let (theta, dt) = (spec.theta, spec.dt());
    let points: Vec<Vec<f64>> = (0..n).map(|p| spec.grid_point(p)).collect();

    let mut time_major = vec![0.0; m * n];
    time_major
        .par_chunks_mut(n)
        .enumerate()
        .for_each(|(step, block)| {
            let t = (step as f64 + theta) * dt;
            for (b, x) in block.iter_mut().zip(&points) {
                *b = dt * (spec.source)(x, t);
            }
        });
    let u0 = initial_vector(spec);
    let mut gu0 = vec![0.0; n];
    g.apply(&u0, &mut gu0);
    for i in 0..n {
        time_major[i] += u0[i] - (1.0 - theta) * dt * gu0[i];
    }

    let mut f = time_space_permute(&time_major, m, n, Ordering::TimeToSpace)?;
    for node in f.chunks_mut(m) {
        bidiagonal_forward_solve_in_place(theta * dt, (1.0 - theta) * dt, node)?;
    }
    Ok(f)
}

/// Exact solution at every node and time level `1..=M`, space-major.
pub fn exact_solution_vector(spec: &ProblemSpec) -> Option<Vec<f64>> {
    let exact = spec.exact.as_ref()?;
    let (n, m) = (spec.spatial_len(), spec.m);
    let mut out = vec![0.0; n * m];
    out.par_chunks_mut(m).enumerate().for_each(|(p, row)| {
        let x = spec.grid_point(p);
        for (step, v) in row.iter_mut().enumerate() {
            *v = exact(&x, spec.time(step + 1));
        }
    });
    Some(out)
}

/// `max |u - u_exact|` over all nodes and time levels.
pub fn error_inf(spec: &ProblemSpec, u: &[f64]) -> Option<f64> {
    let exact = exact_solution_vector(spec)?;
    Some(
        exact
            .iter()
            .zip(u)
            .fold(0.0_f64, |acc, (a, b)| acc.max((a - b).abs())),
    )
}

#[cfg(test)]
#[allow(clippy::excessive_precision)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn zero_spec(kind: OperatorKind, domain: Vec<(f64, f64)>, n: Vec<usize>, m: usize, theta: f64) -> ProblemSpec {
        ProblemSpec {
            name: "test".into(),
            kind,
            domain,
            t_final: 1.0,
            m,
            n,
            theta,
            source: Arc::new(|_, _| 0.0),
            initial: Arc::new(|_| 0.0),
            exact: None,
        }
    }

    fn unit_laplacian() -> OperatorKind {
        OperatorKind::VariableLaplacian {
            coeff: Arc::new(|_| 1.0),
            coeff_range: Some((1.0, 1.0)),
        }
    }

    fn dense_matvec(a: &[f64], n: usize, x: &[f64]) -> Vec<f64> {
        (0..n)
            .map(|i| (0..n).map(|j| a[i * n + j] * x[j]).sum())
            .collect()
    }

    // Oracle values from 40-digit Gamma-function evaluation
    // g_k = (-1)^k Γ(α+1) / (Γ(α/2-k+1) Γ(α/2+k+1)).
    const G_ALPHA_15: [(usize, f64); 6] = [
        (0, 1.573_787_465_354_794_968_1),
        (1, -0.674_480_342_294_912_129_17),
        (2, -0.061_316_394_754_082_920_834),
        (5, -0.005_472_172_529_540_581_035_5),
        (10, -0.000_951_378_601_948_518_249_93),
        (20, -0.000_167_490_638_618_712_398_65),
    ];
    const G_ALPHA_11: [(usize, f64); 3] = [
        (0, 1.324_519_865_137_037_440_5),
        (1, -0.469_990_919_887_335_865_98),
        (20, -0.000_610_048_699_083_923_686_98),
    ];
    const G_ALPHA_19: [(usize, f64); 3] = [
        (0, 1.903_165_606_711_629_426),
        (2, -0.015_714_970_242_295_071_314),
        (20, -0.000_015_381_255_155_931_570_855),
    ];

    #[test]
    fn weights_match_high_precision_gamma() {
        for (alpha, table) in [(1.5, &G_ALPHA_15[..]), (1.1, &G_ALPHA_11[..]), (1.9, &G_ALPHA_19[..])] {
            let g = frac_centered_weights(alpha, 20).unwrap();
            for &(k, v) in table {
                assert!((g[k] - v).abs() <= 1e-13 * v.abs().max(1e-3), "alpha={alpha} k={k}");
            }
        }
    }

    #[test]
    fn weights_alpha_two_is_laplacian() {
        let g = frac_centered_weights(2.0, 5).unwrap();
        assert_abs_diff_eq!(g[0], 2.0, epsilon = 1e-14);
        assert_abs_diff_eq!(g[1], -1.0, epsilon = 1e-14);
        for v in &g[2..] {
            assert_abs_diff_eq!(*v, 0.0, epsilon = 1e-15);
        }
        assert!(frac_centered_weights(1.0, 3).is_err());
        assert!(frac_centered_weights(2.5, 3).is_err());
    }

    #[test]
    fn weights_signs_and_vanishing_sum() {
        for alpha in [1.1, 1.3, 1.5, 1.7, 1.9] {
            let g = frac_centered_weights(alpha, 10_000).unwrap();
            assert!(g[0] > 0.0);
            assert!(g[1..].iter().all(|&v| v < 0.0));
            let mut partial = g[0];
            let mut prev = f64::INFINITY;
            for v in &g[1..] {
                partial += 2.0 * v;
                assert!(partial > 0.0 && partial < prev);
                prev = partial;
            }
            assert!(partial < 1e-3, "alpha={alpha} sum={partial}");
        }
    }

    #[test]
    fn cd2_operator_examples() {
        let op = riesz_operator_1d(2.0, 3, 1.0, RieszScheme::Cd2).unwrap();
        let col = op.toeplitz().first_col();
        assert_abs_diff_eq!(col[0], 2.0, epsilon = 1e-14);
        assert_abs_diff_eq!(col[1], -1.0, epsilon = 1e-14);
        assert_abs_diff_eq!(col[2], 0.0, epsilon = 1e-15);

        let op = riesz_operator_1d(1.5, 4, 0.5, RieszScheme::Cd2).unwrap();
        let scale = 0.5_f64.powf(-1.5);
        for &(k, v) in G_ALPHA_15.iter().take(3) {
            if k < 4 {
                assert!((op.toeplitz().first_col()[k] - scale * v).abs() < 1e-13);
            }
        }
    }

    #[test]
    fn hoc4_alpha_two_matches_dense_product() {
        let n = 8;
        let op = riesz_operator_1d(2.0, n, 1.0, RieszScheme::Hoc4).unwrap();
        let dense = op.to_dense();
        let mut w = vec![0.0; n * n];
        let mut k = vec![0.0; n * n];
        for i in 0..n {
            w[i * n + i] = 2.0;
            k[i * n + i] = 2.0;
            if i + 1 < n {
                w[i * n + i + 1] = -1.0;
                w[(i + 1) * n + i] = -1.0;
                k[i * n + i + 1] = -1.0;
                k[(i + 1) * n + i] = -1.0;
            }
        }
        for i in 0..n {
            for j in 0..n {
                let kw: f64 = (0..n).map(|l| k[i * n + l] * w[l * n + j]).sum();
                let wk: f64 = (0..n).map(|l| w[i * n + l] * k[l * n + j]).sum();
                let expect = w[i * n + j] + (0.5 * (kw + wk)) / 12.0;
                assert_abs_diff_eq!(dense[i * n + j], expect, epsilon = 1e-13);
            }
        }
    }

    #[test]
    fn hoc4_matches_symmetrized_product_general_alpha() {
        for (alpha, n, h) in [(1.3, 1usize, 0.5), (1.3, 2, 0.5), (1.7, 11, 0.1)] {
            let op = riesz_operator_1d(alpha, n, h, RieszScheme::Hoc4).unwrap();
            let w = riesz_operator_1d(alpha, n, h, RieszScheme::Cd2).unwrap().to_dense();
            let mut q = vec![0.0; n * n];
            for i in 0..n {
                q[i * n + i] = 1.0 + alpha / 12.0;
                if i + 1 < n {
                    q[i * n + i + 1] = -alpha / 24.0;
                    q[(i + 1) * n + i] = -alpha / 24.0;
                }
            }
            let dense = op.to_dense();
            for i in 0..n {
                for j in 0..n {
                    let qw: f64 = (0..n).map(|l| q[i * n + l] * w[l * n + j]).sum();
                    let wq: f64 = (0..n).map(|l| w[i * n + l] * q[l * n + j]).sum();
                    assert!((dense[i * n + j] - 0.5 * (qw + wq)).abs() < 1e-12 * w[0]);
                }
            }
        }
    }

    #[test]
    fn constant_laplacian_is_kronecker_sum() {
        let spec = zero_spec(unit_laplacian(), vec![(0.0, 1.0); 2], vec![3, 3], 1, 1.0);
        let g = build_spatial_operator(&spec).unwrap().to_dense().unwrap();
        let n = 3;
        let nn = 9;
        let h2 = 0.25_f64 * 0.25;
        for p in 0..nn {
            for q in 0..nn {
                let (i1, i2) = (p / n, p % n);
                let (j1, j2) = (q / n, q % n);
                let k = |a: usize, b: usize| -> f64 {
                    if a == b {
                        2.0
                    } else if a.abs_diff(b) == 1 {
                        -1.0
                    } else {
                        0.0
                    }
                };
                let mut expect = 0.0;
                if i2 == j2 {
                    expect += k(i1, j1);
                }
                if i1 == j1 {
                    expect += k(i2, j2);
                }
                assert_abs_diff_eq!(g[p * nn + q], expect / h2, epsilon = 1e-10);
            }
        }
    }

    #[test]
    fn non_positive_coefficient_is_rejected() {
        let kind = OperatorKind::VariableLaplacian {
            coeff: Arc::new(|x| x[0] - 0.5),
            coeff_range: None,
        };
        let spec = zero_spec(kind, vec![(0.0, 1.0); 2], vec![3, 3], 1, 1.0);
        assert!(matches!(
            build_spatial_operator(&spec),
            Err(Error::InvalidCoefficient(_))
        ));
    }

    #[test]
    fn validation_rejects_bad_parameters() {
        let spec = zero_spec(unit_laplacian(), vec![(0.0, 1.0)], vec![3], 4, 0.3);
        let err = spec.validate().unwrap_err().to_string();
        assert!(err.contains("theta ∈ [1/2, 1]"), "{err}");
        let frac = OperatorKind::RieszFractional {
            alpha: vec![2.0],
            k: vec![1.0],
            scheme: RieszScheme::Cd2,
        };
        let spec = zero_spec(frac, vec![(0.0, 1.0)], vec![3], 4, 0.5);
        assert!(spec.validate().unwrap_err().to_string().contains("alpha"));
        let spec = zero_spec(unit_laplacian(), vec![(0.0, 1.0)], vec![3], 0, 0.5);
        assert!(spec.validate().is_err());
    }

    #[test]
    fn q_theta_examples() {
        let q = q_theta_first_column(1.0, 0.1, 4).unwrap();
        for (a, b) in q.iter().zip([10.0, -10.0, 0.0, 0.0]) {
            assert_abs_diff_eq!(*a, b, epsilon = 1e-12);
        }
        let q = q_theta_first_column(0.5, 1.0, 4).unwrap();
        assert_eq!(q, vec![2.0, -4.0, 4.0, -4.0]);
        assert!(q_theta_first_column(0.4, 1.0, 4).is_err());
    }

    #[test]
    fn q_theta_matches_closed_form() {
        for theta in [0.5, 0.6, 0.75, 0.9, 1.0] {
            let dt = 0.37;
            let q = q_theta_first_column(theta, dt, 12).unwrap();
            assert_abs_diff_eq!(q[0], 1.0 / (theta * dt), epsilon = 1e-12);
            for k in 1..12 {
                let expect = -(theta - 1.0_f64).powi(k as i32 - 1) / theta.powi(k as i32 + 1) / dt;
                assert!((q[k] - expect).abs() <= 1e-12 * q[0], "theta={theta} k={k}");
            }
        }
    }

    #[test]
    fn h_theta_times_q_theta_is_t() {
        for theta in [0.5, 0.6, 0.75, 0.9, 1.0] {
            for m in [1usize, 2, 7, 128] {
                let dt = 1.0 / m as f64;
                let q = q_theta_first_column(theta, dt, m).unwrap();
                let scale = q[0];
                // (H Q)[i][j] = θΔt q[i-j] + (1-θ)Δt q[i-1-j]
                for i in 0..m {
                    for j in 0..=i {
                        let mut v = theta * dt * q[i - j];
                        if i > j {
                            v += (1.0 - theta) * dt * q[i - 1 - j];
                        }
                        let t = if i == j {
                            1.0
                        } else if i == j + 1 {
                            -1.0
                        } else {
                            0.0
                        };
                        assert!((v - t).abs() <= 1e-12 * scale.max(1.0), "theta={theta} m={m}");
                    }
                }
            }
        }
    }

    #[test]
    fn permute_examples() {
        let v: Vec<f64> = (1..=6).map(f64::from).collect();
        let s = time_space_permute(&v, 2, 3, Ordering::TimeToSpace).unwrap();
        assert_eq!(s, vec![1.0, 4.0, 2.0, 5.0, 3.0, 6.0]);
        assert_eq!(time_space_permute(&s, 2, 3, Ordering::SpaceToTime).unwrap(), v);
        assert_eq!(time_space_permute(&[7.0], 1, 1, Ordering::TimeToSpace).unwrap(), vec![7.0]);
        assert!(time_space_permute(&v, 4, 2, Ordering::TimeToSpace).is_err());
    }

    #[test]
    fn single_step_backward_euler() {
        let frac = OperatorKind::RieszFractional {
            alpha: vec![1.5],
            k: vec![1.0],
            scheme: RieszScheme::Cd2,
        };
        let mut spec = zero_spec(frac, vec![(0.0, 1.0)], vec![6], 1, 1.0);
        spec.t_final = 0.25;
        let a = AllAtOnceOperator::from_spec(&spec).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let u: Vec<f64> = (0..6).map(|_| rng.random_range(-1.0..1.0)).collect();
        let au = a.apply_all_at_once(&u).unwrap();
        let mut gu = vec![0.0; 6];
        a.spatial().apply(&u, &mut gu);
        for i in 0..6 {
            assert_abs_diff_eq!(au[i], gu[i] + u[i] / 0.25, epsilon = 1e-12);
        }
    }

    #[test]
    fn rhs_examples() {
        let spec = zero_spec(unit_laplacian(), vec![(0.0, 1.0); 2], vec![3, 3], 5, 0.5);
        let g = build_spatial_operator(&spec).unwrap();
        assert!(assemble_rhs(&spec, &g).unwrap().iter().all(|&v| v == 0.0));

        let mut spec = zero_spec(unit_laplacian(), vec![(0.0, 1.0); 2], vec![3, 3], 1, 1.0);
        spec.t_final = 0.5;
        spec.initial = Arc::new(|x| x[0] + 2.0 * x[1]);
        let g = build_spatial_operator(&spec).unwrap();
        let f = assemble_rhs(&spec, &g).unwrap();
        let u0 = initial_vector(&spec);
        for (a, b) in f.iter().zip(&u0) {
            assert_abs_diff_eq!(*a, b / 0.5, epsilon = 1e-12);
        }
    }

    #[test]
    fn variable_stencil_symmetric() {
        let kind = OperatorKind::VariableLaplacian {
            coeff: Arc::new(|x| 40.0 + x[0].powf(3.5) + x[1].powf(3.5)),
            coeff_range: None,
        };
        let spec = zero_spec(kind, vec![(0.0, 1.0); 2], vec![7, 5], 1, 1.0);
        let g = build_spatial_operator(&spec).unwrap().to_dense().unwrap();
        let n = 35;
        for i in 0..n {
            for j in 0..n {
                assert!((g[i * n + j] - g[j * n + i]).abs() <= 1e-12 * g[i * n + i]);
            }
        }
    }

    #[test]
    fn space_major_apply_matches_per_slice() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let frac = OperatorKind::RieszFractional {
            alpha: vec![1.3, 1.8],
            k: vec![1.0, 2.0],
            scheme: RieszScheme::Hoc4,
        };
        let spec = zero_spec(frac, vec![(0.0, 2.0); 2], vec![4, 5], 3, 0.5);
        let g = build_spatial_operator(&spec).unwrap();
        let dense = g.to_dense().unwrap();
        let (n, m) = (20, 3);
        let u: Vec<f64> = (0..n * m).map(|_| rng.random_range(-1.0..1.0)).collect();
        let mut out = vec![0.0; n * m];
        g.apply_space_major(&u, m, &mut out);
        for t in 0..m {
            let x: Vec<f64> = (0..n).map(|i| u[i * m + t]).collect();
            let y = dense_matvec(&dense, n, &x);
            for i in 0..n {
                assert_abs_diff_eq!(out[i * m + t], y[i], epsilon = 1e-11 * dense[0]);
            }
        }
    }
}
