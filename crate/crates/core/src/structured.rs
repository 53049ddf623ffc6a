//! Structured kernels: symmetric and lower-triangular Toeplitz matrices,
//! the orthonormal DST-I, and τ-matrix eigenvalues.
//!
//! Everything here is backed by one complex FFT routine. Plans are stored
//! behind `Arc` and are `Send + Sync`, so the types can be shared across
//! rayon workers; each call allocates its own work buffers.

use std::fmt;
use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::error::{check_len, Error, Result};

/// Below this order triangular products and inversions use direct loops.
pub const DIRECT_CUTOFF: usize = 64;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

// ============================================================================
// FFT helpers
// ============================================================================

#[derive(Clone)]
struct FftPair {
    fwd: Arc<dyn Fft<f64>>,
    inv: Arc<dyn Fft<f64>>,
}

impl FftPair {
    fn new(len: usize) -> Self {
        let mut planner = FftPlanner::new();
        Self {
            fwd: planner.plan_fft_forward(len),
            inv: planner.plan_fft_inverse(len),
        }
    }

    fn len(&self) -> usize {
        self.fwd.len()
    }

    fn spectrum(&self, x: &[f64]) -> Vec<Complex64> {
        let mut buf = vec![ZERO; self.len()];
        for (b, &v) in buf.iter_mut().zip(x) {
            b.re = v;
        }
        self.fwd.process(&mut buf);
        buf
    }

    /// Circular convolution of a real signal with a precomputed spectrum,
    /// normalized by the transform length.
    fn convolve_with(&self, spectrum: &[Complex64], x: &[f64]) -> Vec<Complex64> {
        let mut buf = self.spectrum(x);
        let scale = 1.0 / self.len() as f64;
        for (b, s) in buf.iter_mut().zip(spectrum) {
            *b *= s * scale;
        }
        self.inv.process(&mut buf);
        buf
    }
}

// ============================================================================
// Symmetric Toeplitz
// ============================================================================

/// Symmetric Toeplitz matrix `T[i][j] = t[|i - j|]`, stored by its first column.
///
/// Products use a circulant embedding of length `next_power_of_two(2n - 1)`;
/// the embedding spectrum is computed once at construction.
#[derive(Clone)]
pub struct SymmetricToeplitz {
    first_col: Vec<f64>,
    fft: FftPair,
    spectrum: Arc<[Complex64]>,
}

impl fmt::Debug for SymmetricToeplitz {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("SymmetricToeplitz")
            .field("first_col", &self.first_col)
            .field("embed_len", &self.fft.len())
            .finish()
    }
}

impl SymmetricToeplitz {
    pub fn new(first_col: Vec<f64>) -> Result<Self> {
        let n = first_col.len();
        if n == 0 {
            return Err(Error::InvalidParameter(
                "Toeplitz order must be positive".into(),
            ));
        }
        let len = (2 * n - 1).next_power_of_two();
        let fft = FftPair::new(len);
        let mut embed = vec![0.0; len];
        embed[0] = first_col[0];
        for k in 1..n {
            embed[k] = first_col[k];
            embed[len - k] = first_col[k];
        }
        let spectrum = fft.spectrum(&embed).into();
        Ok(Self {
            first_col,
            fft,
            spectrum,
        })
    }

    pub fn order(&self) -> usize {
        self.first_col.len()
    }

    pub fn first_col(&self) -> &[f64] {
        &self.first_col
    }

    pub fn entry(&self, i: usize, j: usize) -> f64 {
        self.first_col[i.abs_diff(j)]
    }

    /// Row-major dense expansion.
    pub fn to_dense(&self) -> Vec<f64> {
        let n = self.order();
        let mut out = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..n {
                out[i * n + j] = self.entry(i, j);
            }
        }
        out
    }

    pub fn matvec(&self, x: &[f64]) -> Result<Vec<f64>> {
        check_len(self.order(), x.len())?;
        let mut y = vec![0.0; x.len()];
        self.matvec_into(x, &mut y);
        Ok(y)
    }

    /// `y = T x`; panics on length mismatch.
    pub fn matvec_into(&self, x: &[f64], y: &mut [f64]) {
        let n = self.order();
        assert!(x.len() == n && y.len() == n, "Toeplitz matvec length mismatch");
        let buf = self.fft.convolve_with(&self.spectrum, x);
        for (yi, b) in y.iter_mut().zip(&buf) {
            *yi = b.re;
        }
    }
}

// ============================================================================
// Lower triangular Toeplitz
// ============================================================================

/// Lower triangular Toeplitz matrix `L[i][j] = l[i - j]` for `i >= j`.
#[derive(Debug, Clone, PartialEq)]
pub struct LowerToeplitz {
    first_col: Vec<f64>,
}

impl LowerToeplitz {
    pub fn new(first_col: Vec<f64>) -> Result<Self> {
        if first_col.is_empty() {
            return Err(Error::InvalidParameter(
                "Toeplitz order must be positive".into(),
            ));
        }
        Ok(Self { first_col })
    }

    pub fn order(&self) -> usize {
        self.first_col.len()
    }

    pub fn first_col(&self) -> &[f64] {
        &self.first_col
    }

    pub fn is_invertible(&self) -> bool {
        self.first_col[0] != 0.0
    }

    pub fn to_dense(&self) -> Vec<f64> {
        let m = self.order();
        let mut out = vec![0.0; m * m];
        for i in 0..m {
            for j in 0..=i {
                out[i * m + j] = self.first_col[i - j];
            }
        }
        out
    }

    /// `L x`, direct for `m <= DIRECT_CUTOFF` and by FFT otherwise.
    pub fn matvec(&self, x: &[f64]) -> Result<Vec<f64>> {
        check_len(self.order(), x.len())?;
        if self.order() <= DIRECT_CUTOFF {
            Ok(causal_convolve_direct(&self.first_col, x))
        } else {
            Ok(causal_convolve_fft(&self.first_col, x))
        }
    }

    pub fn matvec_direct(&self, x: &[f64]) -> Result<Vec<f64>> {
        check_len(self.order(), x.len())?;
        Ok(causal_convolve_direct(&self.first_col, x))
    }

    pub fn matvec_fft(&self, x: &[f64]) -> Result<Vec<f64>> {
        check_len(self.order(), x.len())?;
        Ok(causal_convolve_fft(&self.first_col, x))
    }

    /// First column of `L⁻¹` (itself lower triangular Toeplitz).
    ///
    /// Forward substitution for the leading `DIRECT_CUTOFF` block, then
    /// repeated doubling: with `L_{2k} = [[L_k, 0], [L₂, L_k]]`, the bottom
    /// half of the inverse column is `-L_k⁻¹ (L₂ v_top)`. Both products are
    /// FFT convolutions of length `2k`, so the total cost is `O(m log m)`.
    pub fn inverse_first_column(&self) -> Result<Vec<f64>> {
        let l = &self.first_col;
        let m = l.len();
        if l[0] == 0.0 {
            return Err(Error::Singular(
                "lower triangular Toeplitz matrix has zero diagonal".into(),
            ));
        }
        if !l[0].is_finite() {
            return Err(Error::NonFinite("Toeplitz diagonal".into()));
        }
        let base = m.min(DIRECT_CUTOFF);
        let mut v = forward_substitution_e1(&l[..base]);
        let mut k = base;
        let mut planner = FftPlanner::<f64>::new();
        while k < m {
            let len = 2 * k;
            let fwd = planner.plan_fft_forward(len);
            let inv = planner.plan_fft_inverse(len);
            let scale = 1.0 / len as f64;

            // Spectrum of l[0..2k] (zero beyond m) and of the current inverse.
            let mut l_hat = vec![ZERO; len];
            for (b, &x) in l_hat.iter_mut().zip(l.iter().take(len)) {
                b.re = x;
            }
            fwd.process(&mut l_hat);
            let mut v_hat = vec![ZERO; len];
            for (b, &x) in v_hat.iter_mut().zip(&v) {
                b.re = x;
            }
            fwd.process(&mut v_hat);

            // Middle product: entries k..2k of l * v are free of wrap-around.
            let mut buf: Vec<Complex64> = l_hat.iter().zip(&v_hat).map(|(a, b)| a * b).collect();
            inv.process(&mut buf);
            let mut w = vec![ZERO; len];
            for (dst, src) in w.iter_mut().zip(&buf[k..]) {
                dst.re = src.re * scale;
            }
            fwd.process(&mut w);
            for (a, b) in w.iter_mut().zip(&v_hat) {
                *a *= b;
            }
            inv.process(&mut w);
            v.extend(w[..k].iter().map(|c| -c.re * scale));
            k = len;
        }
        v.truncate(m);
        Ok(v)
    }
}

fn forward_substitution_e1(l: &[f64]) -> Vec<f64> {
    let m = l.len();
    let inv_diag = 1.0 / l[0];
    let mut v = vec![0.0; m];
    v[0] = inv_diag;
    for i in 1..m {
        let mut s = 0.0;
        for j in 1..=i {
            s += l[j] * v[i - j];
        }
        v[i] = -s * inv_diag;
    }
    v
}

/// First `x.len()` entries of the linear convolution `l * x`.
pub(crate) fn causal_convolve_direct(l: &[f64], x: &[f64]) -> Vec<f64> {
    let m = x.len();
    let mut y = vec![0.0; m];
    for (i, yi) in y.iter_mut().enumerate() {
        let mut s = 0.0;
        for j in 0..=i.min(l.len().saturating_sub(1)) {
            s += l[j] * x[i - j];
        }
        *yi = s;
    }
    y
}

pub(crate) fn causal_convolve_fft(l: &[f64], x: &[f64]) -> Vec<f64> {
    let m = x.len();
    let fft = FftPair::new((2 * m - 1).next_power_of_two());
    let l_hat = fft.spectrum(&l[..l.len().min(m)]);
    fft.convolve_with(&l_hat, x)[..m]
        .iter()
        .map(|c| c.re)
        .collect()
}

/// Repeated causal products `x <- L x` with lower triangular Toeplitz factors
/// of a fixed order.
///
/// Kernels are prepared once ([`CausalFilter::prepare`]), which caches their
/// spectra. Inputs are then transformed two at a time, packed as the real and
/// imaginary parts of one complex signal.
#[derive(Clone)]
pub struct CausalFilter {
    m: usize,
    fft: Option<FftPair>,
}

/// A lower triangular Toeplitz factor prepared for a [`CausalFilter`].
#[derive(Debug, Clone)]
pub struct CausalKernel {
    coeffs: Vec<f64>,
    /// Spectrum of the zero-padded kernel, divided by the transform length.
    spectrum: Option<Vec<Complex64>>,
}

impl CausalKernel {
    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }
}

impl fmt::Debug for CausalFilter {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("CausalFilter")
            .field("m", &self.m)
            .field("fft", &self.fft.is_some())
            .finish()
    }
}

impl CausalFilter {
    pub fn new(m: usize) -> Self {
        let fft = (m > DIRECT_CUTOFF).then(|| FftPair::new((2 * m - 1).next_power_of_two()));
        Self { m, fft }
    }

    pub fn order(&self) -> usize {
        self.m
    }

    pub fn prepare(&self, kernel: Vec<f64>) -> CausalKernel {
        debug_assert_eq!(kernel.len(), self.m);
        let spectrum = self.fft.as_ref().map(|fft| {
            let scale = 1.0 / fft.len() as f64;
            let mut s = fft.spectrum(&kernel);
            s.iter_mut().for_each(|v| *v *= scale);
            s
        });
        CausalKernel {
            coeffs: kernel,
            spectrum,
        }
    }

    fn apply_direct(kernel: &[f64], x: &mut [f64]) {
        for i in (0..x.len()).rev() {
            let mut s = 0.0;
            for j in 0..=i {
                s += kernel[j] * x[i - j];
            }
            x[i] = s;
        }
    }

    /// `x <- L x`. `scratch` is resized as needed.
    pub fn apply(&self, kernel: &CausalKernel, x: &mut [f64], scratch: &mut Vec<Complex64>) {
        debug_assert_eq!(x.len(), self.m);
        match (&self.fft, &kernel.spectrum) {
            (Some(fft), Some(spec)) => {
                scratch.clear();
                scratch.resize(fft.len(), ZERO);
                for (b, &v) in scratch.iter_mut().zip(x.iter()) {
                    b.re = v;
                }
                fft.fwd.process(scratch);
                for (b, s) in scratch.iter_mut().zip(spec) {
                    *b *= s;
                }
                fft.inv.process(scratch);
                for (xi, p) in x.iter_mut().zip(scratch.iter()) {
                    *xi = p.re;
                }
            }
            _ => Self::apply_direct(&kernel.coeffs, x),
        }
    }

    /// `x1 <- L1 x1` and `x2 <- L2 x2` with one forward and one inverse FFT.
    pub fn apply_pair(
        &self,
        k1: &CausalKernel,
        x1: &mut [f64],
        k2: &CausalKernel,
        x2: &mut [f64],
        scratch: &mut Vec<Complex64>,
    ) {
        debug_assert_eq!(x1.len(), self.m);
        debug_assert_eq!(x2.len(), self.m);
        match (&self.fft, &k1.spectrum, &k2.spectrum) {
            (Some(fft), Some(s1), Some(s2)) => {
                let len = fft.len();
                scratch.clear();
                scratch.resize(2 * len, ZERO);
                let (packed, prod) = scratch.split_at_mut(len);
                for (b, (&a, &c)) in packed.iter_mut().zip(x1.iter().zip(x2.iter())) {
                    *b = Complex64::new(a, c);
                }
                fft.fwd.process(packed);
                let i = Complex64::new(0.0, 1.0);
                for k in 0..len {
                    let zk = packed[k];
                    let zc = packed[(len - k) % len].conj();
                    let a = (zk + zc) * 0.5;
                    let b = (zk - zc) * Complex64::new(0.0, -0.5);
                    prod[k] = a * s1[k] + i * (b * s2[k]);
                }
                fft.inv.process(prod);
                for ((u, v), p) in x1.iter_mut().zip(x2.iter_mut()).zip(prod.iter()) {
                    *u = p.re;
                    *v = p.im;
                }
            }
            _ => {
                Self::apply_direct(&k1.coeffs, x1);
                Self::apply_direct(&k2.coeffs, x2);
            }
        }
    }
}

// ============================================================================
// Sine transform
// ============================================================================

/// Orthonormal DST-I: `S[i][j] = sqrt(2/(n+1)) sin((i+1)(j+1)π/(n+1))`.
///
/// `S` is symmetric and involutory. Realized by odd extension to length
/// `2(n+1)` and one complex FFT; two real vectors share each transform.
#[derive(Clone)]
pub struct SineTransformPlan {
    n: usize,
    fft: Arc<dyn Fft<f64>>,
    scale: f64,
}

impl fmt::Debug for SineTransformPlan {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("SineTransformPlan").field("n", &self.n).finish()
    }
}

impl SineTransformPlan {
    pub fn new(n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidParameter(
                "sine transform size must be positive".into(),
            ));
        }
        let fft = FftPlanner::new().plan_fft_forward(2 * (n + 1));
        Ok(Self {
            n,
            fft,
            scale: (2.0 / (n + 1) as f64).sqrt(),
        })
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn apply(&self, x: &[f64]) -> Result<Vec<f64>> {
        check_len(self.n, x.len())?;
        let mut y = x.to_vec();
        self.apply_batch(&mut y);
        Ok(y)
    }

    /// Transforms every length-`n` chunk of `data` in place.
    pub fn apply_batch(&self, data: &mut [f64]) {
        let n = self.n;
        assert!(data.len().is_multiple_of(n), "batch length is not a multiple of n");
        let len = 2 * (n + 1);
        let mut buf = vec![ZERO; len];
        let mut scratch = vec![ZERO; self.fft.get_inplace_scratch_len()];
        let mut chunks = data.chunks_exact_mut(n);
        while let Some(a) = chunks.next() {
            let b = chunks.next();
            buf[0] = ZERO;
            buf[n + 1] = ZERO;
            match &b {
                Some(b) => {
                    for j in 0..n {
                        let z = Complex64::new(a[j], b[j]);
                        buf[j + 1] = z;
                        buf[len - 1 - j] = -z;
                    }
                }
                None => {
                    for j in 0..n {
                        buf[j + 1] = Complex64::new(a[j], 0.0);
                        buf[len - 1 - j] = Complex64::new(-a[j], 0.0);
                    }
                }
            }
            self.fft.process_with_scratch(&mut buf, &mut scratch);
            let s = 0.5 * self.scale;
            for k in 0..n {
                a[k] = -buf[k + 1].im * s;
            }
            if let Some(b) = b {
                for k in 0..n {
                    b[k] = buf[k + 1].re * s;
                }
            }
        }
    }
}

/// Dense orthonormal DST-I matrix, row-major.
pub fn sine_matrix(n: usize) -> Vec<f64> {
    let scale = (2.0 / (n + 1) as f64).sqrt();
    let mut s = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..n {
            s[i * n + j] = scale
                * (((i + 1) * (j + 1)) as f64 * std::f64::consts::PI / (n + 1) as f64).sin();
        }
    }
    s
}

// ============================================================================
// τ-matrix eigenvalues
// ============================================================================

/// Eigenvalues of the τ-matrix associated with a symmetric Toeplitz matrix,
/// ordered by sine-basis index: `λ_j = t_0 + 2 Σ_{k≥1} t_k cos((j+1)kπ/(n+1))`.
#[derive(Debug, Clone, PartialEq)]
pub struct TauEigenvalues {
    pub lambdas: Vec<f64>,
}

impl TauEigenvalues {
    pub fn len(&self) -> usize {
        self.lambdas.len()
    }

    pub fn is_empty(&self) -> bool {
        self.lambdas.is_empty()
    }
}

pub fn tau_eigenvalues(t: &SymmetricToeplitz) -> TauEigenvalues {
    tau_eigenvalues_from_col(t.first_col())
}

/// Same as [`tau_eigenvalues`] from a raw first column; one FFT of length `2(n+1)`.
pub fn tau_eigenvalues_from_col(t: &[f64]) -> TauEigenvalues {
    let n = t.len();
    if n == 0 {
        return TauEigenvalues {
            lambdas: Vec::new(),
        };
    }
    let len = 2 * (n + 1);
    let mut buf = vec![ZERO; len];
    buf[0].re = t[0];
    for k in 1..n {
        buf[k].re = t[k];
        buf[len - k].re = t[k];
    }
    FftPlanner::new().plan_fft_forward(len).process(&mut buf);
    TauEigenvalues {
        lambdas: (1..=n).map(|j| buf[j].re).collect(),
    }
}

// ============================================================================
// Bidiagonal Toeplitz solve
// ============================================================================

/// Solves the lower bidiagonal Toeplitz system with `diag` on the diagonal
/// and `sub` on the first subdiagonal.
pub fn bidiagonal_forward_solve(diag: f64, sub: f64, b: &[f64]) -> Result<Vec<f64>> {
    let mut x = b.to_vec();
    bidiagonal_forward_solve_in_place(diag, sub, &mut x)?;
    Ok(x)
}

pub fn bidiagonal_forward_solve_in_place(diag: f64, sub: f64, x: &mut [f64]) -> Result<()> {
    if diag == 0.0 {
        return Err(Error::Singular("bidiagonal system has zero diagonal".into()));
    }
    let inv = 1.0 / diag;
    let mut prev = 0.0;
    for xi in x.iter_mut() {
        *xi = (*xi - sub * prev) * inv;
        prev = *xi;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn dense_mul(a: &[f64], n: usize, x: &[f64]) -> Vec<f64> {
        (0..n)
            .map(|i| (0..n).map(|j| a[i * n + j] * x[j]).sum())
            .collect()
    }

    fn random_vec(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
        (0..n).map(|_| rng.random_range(-1.0..1.0)).collect()
    }

    fn max_abs(v: &[f64]) -> f64 {
        v.iter().fold(0.0_f64, |m, x| m.max(x.abs()))
    }

    // cd2 weights by the ratio recurrence, kept local to stay independent
    // of the discretization module.
    fn weights(alpha: f64, n: usize) -> Vec<f64> {
        let g0 = statrs::function::gamma::gamma(alpha + 1.0)
            / statrs::function::gamma::gamma(alpha / 2.0 + 1.0).powi(2);
        let mut w = vec![g0];
        for k in 0..n.saturating_sub(1) {
            let kf = k as f64;
            w.push(w[k] * (kf - alpha / 2.0) / (kf + 1.0 + alpha / 2.0));
        }
        w
    }

    #[test]
    fn sym_toeplitz_small_examples() {
        let t = SymmetricToeplitz::new(vec![1.0, 0.0, 0.0]).unwrap();
        let y = t.matvec(&[3.0, 4.0, 5.0]).unwrap();
        for (a, b) in y.iter().zip([3.0, 4.0, 5.0]) {
            assert_abs_diff_eq!(*a, b, epsilon = 1e-14);
        }
        let t = SymmetricToeplitz::new(vec![2.0, -1.0]).unwrap();
        let y = t.matvec(&[1.0, 1.0]).unwrap();
        assert_abs_diff_eq!(y[0], 1.0, epsilon = 1e-14);
        assert_abs_diff_eq!(y[1], 1.0, epsilon = 1e-14);
    }

    #[test]
    fn sym_toeplitz_fractional_weights_match_dense() {
        let t = SymmetricToeplitz::new(weights(1.5, 8)).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        let x = random_vec(&mut rng, 8);
        let fast = t.matvec(&x).unwrap();
        let dense = dense_mul(&t.to_dense(), 8, &x);
        for (a, b) in fast.iter().zip(&dense) {
            assert_abs_diff_eq!(*a, *b, epsilon = 1e-12 * max_abs(&dense));
        }
    }

    #[test]
    fn sym_toeplitz_dimension_mismatch() {
        let t = SymmetricToeplitz::new(vec![1.0, 2.0]).unwrap();
        assert_eq!(
            t.matvec(&[1.0]),
            Err(Error::DimensionMismatch {
                expected: 2,
                got: 1
            })
        );
        assert!(SymmetricToeplitz::new(vec![]).is_err());
    }

    #[test]
    fn lower_toeplitz_examples() {
        let l = LowerToeplitz::new(vec![1.0, 0.0, 0.0, 0.0]).unwrap();
        assert_eq!(l.matvec(&[4.0, 3.0, 2.0, 1.0]).unwrap(), vec![4.0, 3.0, 2.0, 1.0]);
        let l = LowerToeplitz::new(vec![1.0, -1.0, 0.0]).unwrap();
        assert_eq!(l.matvec(&[1.0, 2.0, 3.0]).unwrap(), vec![1.0, 1.0, 1.0]);
        assert!(l.matvec(&[1.0]).is_err());
    }

    #[test]
    fn lower_toeplitz_paths_agree() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for m in [1, 5, 64, 65, 200] {
            let l = LowerToeplitz::new(random_vec(&mut rng, m)).unwrap();
            let x = random_vec(&mut rng, m);
            let a = l.matvec_direct(&x).unwrap();
            let b = l.matvec_fft(&x).unwrap();
            let scale = max_abs(&a).max(1.0);
            for (u, v) in a.iter().zip(&b) {
                assert_abs_diff_eq!(*u, *v, epsilon = 1e-12 * scale);
            }
        }
    }

    #[test]
    fn causal_filter_matches_direct() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        for m in [3, 64, 65, 300] {
            let kernel = random_vec(&mut rng, m);
            let x = random_vec(&mut rng, m);
            let expect = causal_convolve_direct(&kernel, &x);
            let filter = CausalFilter::new(m);
            let prepared = filter.prepare(kernel.clone());
            let mut y = x.clone();
            let mut scratch = Vec::new();
            filter.apply(&prepared, &mut y, &mut scratch);
            for (u, v) in expect.iter().zip(&y) {
                assert_abs_diff_eq!(*u, *v, epsilon = 1e-12 * max_abs(&expect).max(1.0));
            }
            // A second pair member five orders of magnitude larger.
            let kernel2 = random_vec(&mut rng, m);
            let x2: Vec<f64> = random_vec(&mut rng, m).iter().map(|v| v * 1e5).collect();
            let expect2 = causal_convolve_direct(&kernel2, &x2);
            let (mut y1, mut y2) = (x.clone(), x2.clone());
            filter.apply_pair(&prepared, &mut y1, &filter.prepare(kernel2), &mut y2, &mut scratch);
            for (u, v) in expect.iter().zip(&y1) {
                assert_abs_diff_eq!(*u, *v, epsilon = 1e-12 * max_abs(&expect2));
            }
            for (u, v) in expect2.iter().zip(&y2) {
                assert_abs_diff_eq!(*u, *v, epsilon = 1e-12 * max_abs(&expect2));
            }
        }
    }

    #[test]
    fn iltt_inverse_examples() {
        let mut col = vec![0.0; 8];
        col[0] = 1.0;
        col[1] = -1.0;
        let v = LowerToeplitz::new(col).unwrap().inverse_first_column().unwrap();
        for x in v {
            assert_abs_diff_eq!(x, 1.0, epsilon = 1e-15);
        }
        let v = LowerToeplitz::new(vec![2.0, 1.0])
            .unwrap()
            .inverse_first_column()
            .unwrap();
        assert_eq!(v, vec![0.5, -0.25]);
    }

    #[test]
    fn iltt_inverse_matches_dense_triangular_solve() {
        let l = [3.0, 1.0, 4.0, 1.0, 5.0, 9.0, 2.0, 6.0];
        let m = l.len();
        // Dense row-by-row forward substitution of L v = e1.
        let dense = LowerToeplitz::new(l.to_vec()).unwrap().to_dense();
        let mut expect = vec![0.0; m];
        for i in 0..m {
            let rhs = if i == 0 { 1.0 } else { 0.0 };
            let s: f64 = (0..i).map(|j| dense[i * m + j] * expect[j]).sum();
            expect[i] = (rhs - s) / dense[i * m + i];
        }
        let v = LowerToeplitz::new(l.to_vec())
            .unwrap()
            .inverse_first_column()
            .unwrap();
        for (a, b) in v.iter().zip(&expect) {
            assert_abs_diff_eq!(*a, *b, epsilon = 1e-12 * max_abs(&expect));
        }
    }

    #[test]
    fn iltt_inverse_reproduces_e1() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for m in [1usize, 2, 63, 64, 65, 1 << 10, 1 << 16] {
            // Diagonally dominant decaying column keeps the inverse bounded.
            let mut col: Vec<f64> = (0..m)
                .map(|k| rng.random_range(-1.0..1.0) / (1.0 + k as f64).powi(2))
                .collect();
            col[0] = 4.0;
            let l = LowerToeplitz::new(col).unwrap();
            let v = l.inverse_first_column().unwrap();
            let r = l.matvec(&v).unwrap();
            let vmax = max_abs(&v);
            for (i, ri) in r.iter().enumerate() {
                let e = if i == 0 { 1.0 } else { 0.0 };
                assert!((ri - e).abs() <= 1e-12 * vmax, "m={m} i={i} r={ri}");
            }
        }
    }

    #[test]
    fn iltt_inverse_rejects_zero_diagonal() {
        let l = LowerToeplitz::new(vec![0.0, 1.0]).unwrap();
        assert!(matches!(l.inverse_first_column(), Err(Error::Singular(_))));
    }

    #[test]
    fn dst_examples() {
        let p = SineTransformPlan::new(1).unwrap();
        assert_abs_diff_eq!(p.apply(&[2.5]).unwrap()[0], 2.5, epsilon = 1e-15);
        let p = SineTransformPlan::new(3).unwrap();
        let y = p.apply(&[1.0, 0.0, 0.0]).unwrap();
        let expect = [0.5, std::f64::consts::FRAC_1_SQRT_2, 0.5];
        for (a, b) in y.iter().zip(expect) {
            assert_abs_diff_eq!(*a, b, epsilon = 1e-15);
        }
        assert!(p.apply(&[1.0]).is_err());
    }

    #[test]
    fn dst_matches_dense_and_is_involution() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for n in [1usize, 2, 7, 64, 100] {
            let p = SineTransformPlan::new(n).unwrap();
            let x = random_vec(&mut rng, n);
            let y = p.apply(&x).unwrap();
            let dense = dense_mul(&sine_matrix(n), n, &x);
            for (a, b) in y.iter().zip(&dense) {
                assert_abs_diff_eq!(*a, *b, epsilon = 1e-12);
            }
            let z = p.apply(&y).unwrap();
            for (a, b) in z.iter().zip(&x) {
                assert_abs_diff_eq!(*a, *b, epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn dst_batch_handles_odd_counts() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let n = 9;
        let p = SineTransformPlan::new(n).unwrap();
        let mut data = random_vec(&mut rng, 3 * n);
        let expect: Vec<f64> = data
            .chunks(n)
            .flat_map(|c| p.apply(c).unwrap())
            .collect();
        p.apply_batch(&mut data);
        for (a, b) in data.iter().zip(&expect) {
            assert_abs_diff_eq!(*a, *b, epsilon = 1e-14);
        }
    }

    #[test]
    fn tau_eigenvalue_examples() {
        let lam = tau_eigenvalues_from_col(&[2.0, -1.0, 0.0]).lambdas;
        let s2 = std::f64::consts::SQRT_2;
        for (a, b) in lam.iter().zip([2.0 - s2, 2.0, 2.0 + s2]) {
            assert_abs_diff_eq!(*a, b, epsilon = 1e-14);
        }
        let lam = tau_eigenvalues_from_col(&[3.5, 0.0, 0.0, 0.0, 0.0]).lambdas;
        for a in lam {
            assert_abs_diff_eq!(a, 3.5, epsilon = 1e-14);
        }
    }

    #[test]
    fn tau_eigenvalues_match_direct_cosine_sum() {
        let t = weights(1.5, 16);
        let lam = tau_eigenvalues_from_col(&t).lambdas;
        let n = t.len();
        for (j, l) in lam.iter().enumerate() {
            let mut s = t[0];
            for (k, tk) in t.iter().enumerate().skip(1) {
                s += 2.0
                    * tk
                    * (((j + 1) * k) as f64 * std::f64::consts::PI / (n + 1) as f64).cos();
            }
            assert_abs_diff_eq!(*l, s, epsilon = 1e-12);
        }
    }

    #[test]
    fn bidiagonal_examples() {
        assert_eq!(
            bidiagonal_forward_solve(1.0, 0.0, &[3.0, -2.0]).unwrap(),
            vec![3.0, -2.0]
        );
        assert_eq!(
            bidiagonal_forward_solve(0.5, 0.5, &[1.0, 0.0]).unwrap(),
            vec![2.0, -2.0]
        );
        assert_eq!(
            bidiagonal_forward_solve(1.0, -1.0, &[1.0; 4]).unwrap(),
            vec![1.0, 2.0, 3.0, 4.0]
        );
        assert!(matches!(
            bidiagonal_forward_solve(0.0, 1.0, &[1.0]),
            Err(Error::Singular(_))
        ));
    }

    #[test]
    fn random_dense_checks_vs_fft() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for n in [1usize, 2, 3, 17, 128, 512] {
            let t = SymmetricToeplitz::new(random_vec(&mut rng, n)).unwrap();
            let x = random_vec(&mut rng, n);
            let fast = t.matvec(&x).unwrap();
            let dense = dense_mul(&t.to_dense(), n, &x);
            let scale = max_abs(&dense).max(1e-300);
            for (a, b) in fast.iter().zip(&dense) {
                assert!((a - b).abs() <= 1e-12 * scale, "n={n}");
            }
        }
    }
}
