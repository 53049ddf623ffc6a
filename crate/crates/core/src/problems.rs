//! Benchmark problems with known exact solutions.
//!
//! * `ex1_case1`, `ex1_case2`: `u_t = ∇·(a∇u) + f` on `(0,1)²`, `T = 1`.
//! * `ex2`: `u_t = Σ K_i ∂^{α_i}u/∂|x_i|^{α_i} + f` on `(0,2)²`, `T = 1`, `K = 1`.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use statrs::function::gamma::gamma;

use crate::discretization::{OperatorKind, ProblemSpec, RieszScheme};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Example {
    Ex1Case1,
    Ex1Case2,
    Ex2,
}

impl Example {
    pub const ALL: [Example; 3] = [Example::Ex1Case1, Example::Ex1Case2, Example::Ex2];

    pub fn name(self) -> &'static str {
        match self {
            Self::Ex1Case1 => "ex1_case1",
            Self::Ex1Case2 => "ex1_case2",
            Self::Ex2 => "ex2",
        }
    }
}

impl fmt::Display for Example {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Example {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|e| e.name() == s)
            .ok_or_else(|| {
                Error::InvalidParameter(format!(
                    "unknown example `{s}` (expected ex1_case1, ex1_case2 or ex2)"
                ))
            })
    }
}

/// Order pairs used for the fractional benchmark.
pub const EX2_ALPHA_PAIRS: [(f64, f64); 4] = [(1.1, 1.2), (1.4, 1.5), (1.8, 1.9), (1.1, 1.9)];

/// Builds a preset with `n` interior points per axis and `m` time steps.
/// `alphas` applies to `ex2` only and defaults to `(1.1, 1.2)`.
pub fn preset(example: Example, m: usize, n: usize, theta: f64, alphas: Option<(f64, f64)>) -> Result<ProblemSpec> {
    let spec = match example {
        Example::Ex1Case1 => ex1_case1(m, n, theta),
        Example::Ex1Case2 => ex1_case2(m, n, theta),
        Example::Ex2 => ex2(m, n, theta, alphas.unwrap_or(EX2_ALPHA_PAIRS[0]), RieszScheme::Hoc4),
    };
    spec.validate()?;
    Ok(spec)
}

pub fn ex1_case1(m: usize, n: usize, theta: f64) -> ProblemSpec {
    let a = |x: &[f64]| 40.0 + x[0].powf(3.5) + x[1].powf(3.5);
    ProblemSpec {
        name: Example::Ex1Case1.name().into(),
        kind: OperatorKind::VariableLaplacian {
            coeff: Arc::new(a),
            // a is increasing in each coordinate on [0, 1]².
            coeff_range: Some((40.0, 42.0)),
        },
        domain: vec![(0.0, 1.0); 2],
        t_final: 1.0,
        m,
        n: vec![n, n],
        theta,
        source: Arc::new(move |x: &[f64], t: f64| {
            let (s1, s2) = ((PI * x[0]).sin(), (PI * x[1]).sin());
            let (c1, c2) = ((PI * x[0]).cos(), (PI * x[1]).cos());
            s1 * s2 * (2.0 * t + 2.0 * PI * PI * a(x) * t * t)
                - PI * t * t * (3.5 * x[0].powf(2.5) * c1 * s2 + 3.5 * x[1].powf(2.5) * s1 * c2)
        }),
        initial: Arc::new(|_| 0.0),
        exact: Some(Arc::new(|x: &[f64], t: f64| {
            (PI * x[0]).sin() * (PI * x[1]).sin() * t * t
        })),
    }
}

pub fn ex1_case2(m: usize, n: usize, theta: f64) -> ProblemSpec {
    let a = |x: &[f64]| (20.0 + x[0] * x[0]) * (20.0 + x[1] * x[1]);
    let bubble = |z: f64| z * (1.0 - z);
    ProblemSpec {
        name: Example::Ex1Case2.name().into(),
        kind: OperatorKind::VariableLaplacian {
            coeff: Arc::new(a),
            coeff_range: Some((400.0, 441.0)),
        },
        domain: vec![(0.0, 1.0); 2],
        t_final: 1.0,
        m,
        n: vec![n, n],
        theta,
        source: Arc::new(move |x: &[f64], t: f64| {
            let (x1, x2) = (x[0], x[1]);
            let e = t.exp();
            e * bubble(x1) * bubble(x2) + 2.0 * a(x) * e * (bubble(x1) + bubble(x2))
                - 2.0 * x1 * (1.0 - 2.0 * x1) * bubble(x2) * (20.0 + x2 * x2) * e
                - 2.0 * x2 * (1.0 - 2.0 * x2) * bubble(x1) * (20.0 + x1 * x1) * e
        }),
        initial: Arc::new(move |x: &[f64]| bubble(x[0]) * bubble(x[1])),
        exact: Some(Arc::new(move |x: &[f64], t: f64| {
            t.exp() * bubble(x[0]) * bubble(x[1])
        })),
    }
}

fn ex2_profile(z: f64) -> f64 {
    (z * (2.0 - z)).powi(4)
}

/// `-∂^γ/∂|z|^γ` of `z⁴(2-z)⁴` on `(0, 2)`, from the left and right
/// Riemann–Liouville derivatives of its monomial expansion.
pub fn ex2_riesz_term(gamma_order: f64, z: f64) -> f64 {
    let binom = [1.0, 4.0, 6.0, 4.0, 1.0];
    let mut sum = 0.0;
    for (k, b) in binom.iter().enumerate() {
        let p = (8 - k) as f64;
        let sign = if (4 - k) % 2 == 0 { 1.0 } else { -1.0 };
        let coeff = sign * 2f64.powi(k as i32) * b * gamma(p + 1.0) / gamma(p + 1.0 - gamma_order);
        sum += coeff * (z.powf(p - gamma_order) + (2.0 - z).powf(p - gamma_order));
    }
    sum / (2.0 * (PI * gamma_order / 2.0).cos())
}

pub fn ex2(m: usize, n: usize, theta: f64, alphas: (f64, f64), scheme: RieszScheme) -> ProblemSpec {
    let (a1, a2) = alphas;
    let k = [1.0, 1.0];
    ProblemSpec {
        name: Example::Ex2.name().into(),
        kind: OperatorKind::RieszFractional {
            alpha: vec![a1, a2],
            k: k.to_vec(),
            scheme,
        },
        domain: vec![(0.0, 2.0); 2],
        t_final: 1.0,
        m,
        n: vec![n, n],
        theta,
        source: Arc::new(move |x: &[f64], t: f64| {
            let decay = (-t / 3.0).exp();
            let (p1, p2) = (ex2_profile(x[0]), ex2_profile(x[1]));
            k[0] * decay * p2 * ex2_riesz_term(a1, x[0]) + k[1] * decay * p1 * ex2_riesz_term(a2, x[1])
                - decay * p1 * p2 / 3.0
        }),
        initial: Arc::new(|x: &[f64]| ex2_profile(x[0]) * ex2_profile(x[1])),
        exact: Some(Arc::new(|x: &[f64], t: f64| {
            (-t / 3.0).exp() * ex2_profile(x[0]) * ex2_profile(x[1])
        })),
    }
}
