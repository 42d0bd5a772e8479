//! Closed-form FVC parametrization of the homogeneous Hubbard chain energy.
//!
//! The per-site ground-state energy is
//!
//! ```text
//! e0(n, U) = -(2 beta / pi) sin(pi n / beta),   beta = b(U)^alpha,   alpha = n^(U^(1/3) / 8)
//! ```
//!
//! for `0 <= n <= 1`, where `b(U)` is fixed by requiring the half-filled
//! energy to equal the exact Lieb-Wu value
//!
//! ```text
//! -(2 b / pi) sin(pi / b) = -4 int_0^inf J0(x) J1(x) / (x (1 + exp(U x / 2))) dx.
//! ```
//!
//! Densities above one follow from the particle-hole identity
//! `e0(n, U) = e0(2 - n, U) + U (n - 1)`.

use std::collections::HashMap;
use std::f64::consts::PI;
use std::sync::{OnceLock, RwLock};

use crate::bessel::{j0, j1_over_x, ProductZeros};
use crate::entropy::{self, OccupationProbabilities};
use crate::error::{Error, Result};
use crate::quadrature;

/// Smallest positive interaction handled by the numerical branch.
pub const MIN_NUMERIC_U: f64 = 0.05;

/// Smallest interaction at which `dE/dU` is taken.
pub const MIN_DERIVATIVE_U: f64 = 0.2;

/// Finite-difference step in `U` for the double occupancy.
pub const DERIVATIVE_STEP: f64 = 1e-3;

/// Upper bound on the truncated tail of the Lieb-Wu integral.
pub const TAIL_TOLERANCE: f64 = 1e-10;

const PANEL_TOLERANCE: f64 = 1e-15;
const MAX_PANELS: usize = 2_000_000;
// sup_{x >= 2} x |J0(x) J1(x)|, checked in the tests
const PRODUCT_ENVELOPE: f64 = 0.5;
const ALTERNATING_PANELS: usize = 120;
const AVERAGING_DEPTH: usize = 40;

/// Result of one functional evaluation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FvcEvaluation {
    pub u: f64,
    pub b: f64,
    pub alpha: f64,
    pub beta: f64,
    pub e0: f64,
}

fn lieb_wu_integrand(u: f64, x: f64) -> f64 {
    let weight = 1.0 / (1.0 + (0.5 * u * x).exp());
    j0(x) * j1_over_x(x) * weight
}

/// Right-hand side of the `b(U)` condition: the exact half-filled energy per site.
pub fn lieb_wu_rhs(u: f64) -> Result<f64> {
    if !(u >= 0.0) || !u.is_finite() {
        return Err(Error::UnsupportedRegime(format!(
            "Lieb-Wu integral needs finite U >= 0, got {u}"
        )));
    }
    let integral = if u == 0.0 {
        alternating_integral()?
    } else {
        damped_integral(u)?
    };
    Ok(-4.0 * integral)
}

// Panels between consecutive zeros of J0 J1 until the exponential envelope
// bounds the remainder.
fn damped_integral(u: f64) -> Result<f64> {
    let f = |x: f64| lieb_wu_integrand(u, x);
    let tail_target = TAIL_TOLERANCE / 4.0;
    let mut lo = 0.0;
    let mut total = 0.0;
    // the weight falls off on the scale 1/U, which a panel may not resolve
    let scales: Vec<f64> = [2.0, 8.0, 32.0, 80.0].iter().map(|c| c / u).collect();
    for (count, hi) in ProductZeros::new().enumerate() {
        let mut a = lo;
        for &x in scales.iter().filter(|&&x| x > lo && x < hi) {
            total += quadrature::integrate(&f, a, x, PANEL_TOLERANCE)?.0;
            a = x;
        }
        total += quadrature::integrate(&f, a, hi, PANEL_TOLERANCE)?.0;
        lo = hi;
        // int_X^inf (c / x^2) e^{-u x / 2} dx <= 2 c e^{-u X / 2} / (u X^2)
        let tail = 2.0 * PRODUCT_ENVELOPE * (-0.5 * u * hi).exp() / (u * hi * hi);
        if tail < tail_target {
            return Ok(total);
        }
        if count >= MAX_PANELS {
            return Err(Error::numerical(
                format!("Lieb-Wu integral at U = {u}: tail not reached"),
                4.0 * tail,
            ));
        }
    }
    unreachable!("zero sequence is infinite")
}

// U = 0: sum alternating panels and accelerate the partial sums by repeated
// averaging.
fn alternating_integral() -> Result<f64> {
    let f = |x: f64| lieb_wu_integrand(0.0, x);
    // J0 J1 / x = -cos(2x) / (pi x^2) + 1 / (2 pi x^3) - 3 / (16 pi x^5) + ...;
    // averaging removes the oscillating part, the smooth tail (times the
    // weight 1/2) is added here
    let smooth_tail = |x: f64| 1.0 / (8.0 * PI * x * x) - 3.0 / (128.0 * PI * x.powi(4));
    let mut partial = Vec::with_capacity(ALTERNATING_PANELS);
    let mut lo = 0.0;
    let mut total = 0.0;
    for hi in ProductZeros::new().take(ALTERNATING_PANELS) {
        total += quadrature::integrate(&f, lo, hi, PANEL_TOLERANCE)?.0;
        partial.push(total + smooth_tail(hi));
        lo = hi;
    }
    let n = partial.len();
    let last = repeated_average(&partial[n - AVERAGING_DEPTH..]);
    let previous = repeated_average(&partial[n - AVERAGING_DEPTH - 1..n - 1]);
    let estimate = (last - previous).abs();
    if estimate > TAIL_TOLERANCE / 4.0 {
        return Err(Error::numerical(
            "accelerated Lieb-Wu integral at U = 0",
            4.0 * estimate,
        ));
    }
    Ok(last)
}

fn repeated_average(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    while v.len() > 1 {
        v = v.windows(2).map(|w| 0.5 * (w[0] + w[1])).collect();
    }
    v[0]
}

/// Left-hand side `-(2 b / pi) sin(pi / b)`, decreasing from 0 at `b = 1` to
/// `-4/pi` at `b = 2`.
pub fn half_filled_energy(b: f64) -> f64 {
    -2.0 * b / PI * (PI / b).sin()
}

/// Solves the `b(U)` condition by bisection on `[1, 2]`.
pub fn solve_b(u: f64) -> Result<f64> {
    let rhs = lieb_wu_rhs(u)?;
    let residual = |b: f64| half_filled_energy(b) - rhs;
    let (mut lo, mut hi) = (1.0_f64, 2.0_f64);
    let (r_lo, r_hi) = (residual(lo), residual(hi));
    if r_lo.abs() < 1e-14 {
        return Ok(lo);
    }
    if r_hi.abs() < 1e-14 {
        return Ok(hi);
    }
    if r_lo.signum() == r_hi.signum() {
        return Err(Error::numerical(
            format!("b(U) bracket at U = {u}: residuals {r_lo:e}, {r_hi:e} share a sign"),
            r_lo.abs().min(r_hi.abs()),
        ));
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        let r = residual(mid);
        if r == 0.0 {
            return Ok(mid);
        }
        if r.signum() == r_lo.signum() {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let b = if residual(lo).abs() < residual(hi).abs() {
        lo
    } else {
        hi
    };
    let r = residual(b).abs();
    if r >= 1e-12 {
        return Err(Error::numerical(format!("b(U) bisection at U = {u}"), r));
    }
    Ok(b)
}

fn b_cache() -> &'static RwLock<HashMap<u64, f64>> {
    static CACHE: OnceLock<RwLock<HashMap<u64, f64>>> = OnceLock::new();
    CACHE.get_or_init(|| RwLock::new(HashMap::new()))
}

/// `b(U)`, memoized per process. `b(0) = 2` exactly.
pub fn b_of_u(u: f64) -> Result<f64> {
    if u == 0.0 {
        return Ok(2.0);
    }
    let key = u.to_bits();
    if let Some(&b) = b_cache()
        .read()
        .unwrap_or_else(|e| e.into_inner())
        .get(&key)
    {
        return Ok(b);
    }
    let b = solve_b(u)?;
    b_cache()
        .write()
        .unwrap_or_else(|e| e.into_inner())
        .insert(key, b);
    Ok(b)
}

fn check_u(u: f64) -> Result<()> {
    if !u.is_finite() || u < 0.0 {
        return Err(Error::UnsupportedRegime(format!(
            "interaction {u} is negative or non-finite"
        )));
    }
    if u > 0.0 && u < MIN_NUMERIC_U {
        return Err(Error::UnsupportedRegime(format!(
            "interaction {u} lies in (0, {MIN_NUMERIC_U})"
        )));
    }
    Ok(())
}

fn check_density(n: f64) -> Result<()> {
    if !(0.0..=2.0).contains(&n) {
        return Err(Error::InvalidSpec(format!("density {n} outside [0, 2]")));
    }
    Ok(())
}

/// The energy functional at one fixed interaction, with `b(U)` resolved.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Functional {
    u: f64,
    b: f64,
}

impl Functional {
    pub fn new(u: f64) -> Result<Self> {
        check_u(u)?;
        Ok(Self { u, b: b_of_u(u)? })
    }

    pub fn u(&self) -> f64 {
        self.u
    }

    pub fn b(&self) -> f64 {
        self.b
    }

    /// Full evaluation at density `n`. For `n > 1` the exponent and
    /// `beta` refer to the mirrored density `2 - n`.
    pub fn evaluate(&self, n: f64) -> Result<FvcEvaluation> {
        check_density(n)?;
        let u = self.u;
        let (m, shift) = if n > 1.0 {
            (2.0 - n, u * (n - 1.0))
        } else {
            (n, 0.0)
        };
        if u == 0.0 {
            return Ok(FvcEvaluation {
                u,
                b: 2.0,
                alpha: 1.0,
                beta: 2.0,
                e0: -4.0 / PI * (0.5 * PI * m).sin() + shift,
            });
        }
        let alpha = m.powf(u.cbrt() / 8.0);
        let beta = self.b.powf(alpha);
        let e0 = -2.0 * beta / PI * (PI * m / beta).sin() + shift;
        Ok(FvcEvaluation {
            u,
            b: self.b,
            alpha,
            beta,
            e0,
        })
    }

    pub fn e0(&self, n: f64) -> Result<f64> {
        self.evaluate(n).map(|e| e.e0)
    }
}

/// Full evaluation of the functional at `(n, U)`.
pub fn evaluate(n: f64, u: f64) -> Result<FvcEvaluation> {
    check_density(n)?;
    Functional::new(u)?.evaluate(n)
}

/// Per-site ground-state energy `e0(n, U)`.
pub fn e0_fvc(n: f64, u: f64) -> Result<f64> {
    evaluate(n, u).map(|e| e.e0)
}

/// Homogeneous entropies at one interaction: the four functionals of the
/// `U`-derivative stencil are resolved once.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EntropyFunctional {
    u: f64,
    // U + h, U - h, U + h/2, U - h/2
    stencil: [Functional; 4],
}

impl EntropyFunctional {
    pub fn new(u: f64) -> Result<Self> {
        if !(u >= MIN_DERIVATIVE_U) || !u.is_finite() {
            return Err(Error::UnsupportedRegime(format!(
                "double occupancy needs U >= {MIN_DERIVATIVE_U}, got {u}"
            )));
        }
        let h = DERIVATIVE_STEP;
        Ok(Self {
            u,
            stencil: [
                Functional::new(u + h)?,
                Functional::new(u - h)?,
                Functional::new(u + 0.5 * h)?,
                Functional::new(u - 0.5 * h)?,
            ],
        })
    }

    pub fn u(&self) -> f64 {
        self.u
    }

    /// Double occupancy `w2 = de0/dU`: central differences at steps `h` and
    /// `h/2` combined by one Richardson step.
    pub fn double_occupancy(&self, n: f64) -> Result<f64> {
        check_density(n)?;
        if n > 1.0 {
            return Ok(self.double_occupancy(2.0 - n)? + (n - 1.0));
        }
        let h = DERIVATIVE_STEP;
        let [plus, minus, half_plus, half_minus] = &self.stencil;
        let coarse = (plus.e0(n)? - minus.e0(n)?) / (2.0 * h);
        let fine = (half_plus.e0(n)? - half_minus.e0(n)?) / h;
        let w2 = (4.0 * fine - coarse) / 3.0;
        let upper = 0.5 * n;
        let tol = entropy::CLAMP_TOLERANCE;
        Ok(if w2 < 0.0 && w2 > -tol {
            0.0
        } else if w2 > upper && w2 < upper + tol {
            upper
        } else {
            w2
        })
    }

    pub fn probabilities(&self, n: f64) -> Result<OccupationProbabilities> {
        entropy::probs_from_density(n, self.double_occupancy(n)?)
    }

    /// `(S, L)` at density `n`.
    pub fn entropies(&self, n: f64) -> Result<(f64, f64)> {
        let p = self.probabilities(n)?;
        Ok((entropy::von_neumann(&p), entropy::linear(&p)))
    }
}

/// Double occupancy `w2 = de0/dU` of the homogeneous chain.
pub fn double_occupancy(n: f64, u: f64) -> Result<f64> {
    check_density(n)?;
    EntropyFunctional::new(u)?.double_occupancy(n)
}

/// Occupation probabilities of the homogeneous chain at `(n, U)`.
pub fn homogeneous_probabilities(n: f64, u: f64) -> Result<OccupationProbabilities> {
    check_density(n)?;
    EntropyFunctional::new(u)?.probabilities(n)
}

/// `(S, L)` of the homogeneous chain at `(n, U)`.
pub fn homogeneous_entropies(n: f64, u: f64) -> Result<(f64, f64)> {
    check_density(n)?;
    EntropyFunctional::new(u)?.entropies(n)
}
