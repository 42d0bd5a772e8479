//! Single-site entanglement measures on occupation probabilities.
//!
//! With fixed particle numbers per spin the single-site reduced density
//! matrix is diagonal in the occupation basis `{up, down, double, empty}`,
//! so every measure here is a function of four probabilities.

use std::f64::consts::LN_2;

use crate::error::{Error, Result};
use crate::fvc;

/// Local Hilbert-space dimension of one Hubbard site.
pub const SITE_DIM: f64 = 4.0;

/// Largest expansion order searched by [`minimal_monotone_order`].
pub const MAX_TAYLOR_ORDER: usize = 200;

/// Negative components above this are rounded to zero.
pub const CLAMP_TOLERANCE: f64 = 1e-6;

/// Maximum allowed deviation of the component sum from one.
pub const SUM_TOLERANCE: f64 = 1e-9;

const LN_4: f64 = 2.0 * LN_2;

/// Diagonal of the single-site reduced density matrix.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OccupationProbabilities {
    pub up: f64,
    pub down: f64,
    pub double: f64,
    pub empty: f64,
}

impl OccupationProbabilities {
    /// Validates and normalizes a probability 4-vector.
    ///
    /// Components in `[-1e-6, 0)` are clamped to zero, anything lower is
    /// rejected. The raw sum must be within `1e-9` of one.
    pub fn new(up: f64, down: f64, double: f64, empty: f64) -> Result<Self> {
        let raw = [up, down, double, empty];
        if raw.iter().any(|w| !w.is_finite()) {
            return Err(Error::ProbabilityDomain(format!(
                "non-finite component in {raw:?}"
            )));
        }
        let sum: f64 = raw.iter().sum();
        if (sum - 1.0).abs() > SUM_TOLERANCE {
            return Err(Error::ProbabilityDomain(format!(
                "components {raw:?} sum to {sum}"
            )));
        }
        if let Some(w) = raw
            .iter()
            .find(|&&w| w < -CLAMP_TOLERANCE || w > 1.0 + CLAMP_TOLERANCE)
        {
            return Err(Error::ProbabilityDomain(format!(
                "component {w} of {raw:?} is outside [0, 1]"
            )));
        }
        let clamped = raw.map(|w| w.clamp(0.0, 1.0));
        let p = if clamped == raw {
            Self::from_array(raw)
        } else {
            let total: f64 = clamped.iter().sum();
            Self::from_array(clamped.map(|w| w / total))
        };
        Ok(p)
    }

    fn from_array(a: [f64; 4]) -> Self {
        Self {
            up: a[0],
            down: a[1],
            double: a[2],
            empty: a[3],
        }
    }

    pub fn as_array(&self) -> [f64; 4] {
        [self.up, self.down, self.double, self.empty]
    }

    /// Site density `w_up + w_down + 2 w_double`.
    pub fn density(&self) -> f64 {
        self.up + self.down + 2.0 * self.double
    }

    pub fn uniform() -> Self {
        Self::from_array([0.25; 4])
    }
}

/// Occupation probabilities of a site with density `n` and double occupancy `w2`:
/// `w_up = w_down = n/2 - w2` and `w_empty = 1 - n + w2`.
pub fn probs_from_density(n: f64, w2: f64) -> Result<OccupationProbabilities> {
    if !(-CLAMP_TOLERANCE..=2.0 + CLAMP_TOLERANCE).contains(&n) {
        return Err(Error::ProbabilityDomain(format!(
            "density {n} outside [0, 2]"
        )));
    }
    let single = n / 2.0 - w2;
    let empty = 1.0 - 2.0 * single - w2;
    OccupationProbabilities::new(single, single, w2, empty).map_err(|e| match e {
        Error::ProbabilityDomain(msg) => {
            Error::ProbabilityDomain(format!("inconsistent (n = {n}, w2 = {w2}): {msg}"))
        }
        other => other,
    })
}

/// Normalized von Neumann entropy `-(1/ln 4) sum w ln w`, with `0 ln 0 = 0`.
pub fn von_neumann(p: &OccupationProbabilities) -> f64 {
    let s: f64 = p
        .as_array()
        .iter()
        .map(|&w| if w > 0.0 { -w * w.ln() } else { 0.0 })
        .sum();
    s / LN_4
}

/// Normalized linear entropy `(4/3)(1 - sum w^2)`.
pub fn linear(p: &OccupationProbabilities) -> f64 {
    let purity: f64 = p.as_array().iter().map(|w| w * w).sum();
    SITE_DIM / (SITE_DIM - 1.0) * (1.0 - purity)
}

/// Order-`order` truncation of the von Neumann entropy with `ln w` expanded
/// about `w = 1`.
///
/// Order one is proportional to the linear entropy,
/// `S_1 = 3 / (4 ln 4) * L`.
pub fn taylor_entropy(p: &OccupationProbabilities, order: usize) -> Result<f64> {
    if order == 0 {
        return Err(Error::InvalidOrder(order));
    }
    let mut total = 0.0;
    for w in p.as_array() {
        if w == 0.0 {
            continue;
        }
        total += w * truncated_log(w, order);
    }
    Ok(-total / LN_4)
}

// sum_{m=1}^{order} (-1)^{m+1} (w-1)^m / m
fn truncated_log(w: f64, order: usize) -> f64 {
    let x = w - 1.0;
    let mut power = 1.0;
    let mut sum = 0.0;
    for m in 1..=order {
        power *= x;
        let term = power / m as f64;
        if m % 2 == 1 {
            sum += term;
        } else {
            sum -= term;
        }
    }
    sum
}

/// Counts the steps at which `values` increases.
fn increases(values: &[f64]) -> usize {
    values.windows(2).filter(|w| w[1] > w[0]).count()
}

/// Smallest expansion order whose truncated entropy is non-increasing along
/// the given sequence of probabilities.
pub fn minimal_monotone_order_of(probs: &[OccupationProbabilities]) -> Result<usize> {
    let mut best = (usize::MAX, 0usize);
    for order in 1..=MAX_TAYLOR_ORDER {
        let values = probs
            .iter()
            .map(|p| taylor_entropy(p, order))
            .collect::<Result<Vec<_>>>()?;
        let violations = increases(&values);
        if violations == 0 {
            return Ok(order);
        }
        if violations < best.0 {
            best = (violations, order);
        }
    }
    Err(Error::OrderNotFound {
        max_order: MAX_TAYLOR_ORDER,
        best_order: best.1,
        violations: best.0,
    })
}

/// Smallest order `l` such that `S_l(U)` of the homogeneous chain at density
/// `n` is non-increasing over `u_grid`.
pub fn minimal_monotone_order(n: f64, u_grid: &[f64]) -> Result<usize> {
    if !(n > 0.0 && n <= 1.0) {
        return Err(Error::InvalidSpec(format!("density {n} outside (0, 1]")));
    }
    validate_u_grid(u_grid, fvc::MIN_DERIVATIVE_U)?;
    let probs = u_grid
        .iter()
        .map(|&u| fvc::homogeneous_probabilities(n, u))
        .collect::<Result<Vec<_>>>()?;
    minimal_monotone_order_of(&probs)
}

pub(crate) fn validate_u_grid(grid: &[f64], floor: f64) -> Result<()> {
    if grid.is_empty() {
        return Err(Error::InvalidSpec("interaction grid is empty".into()));
    }
    if grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidSpec(
            "interaction grid must be strictly increasing".into(),
        ));
    }
    if let Some(u) = grid.iter().find(|&&u| u < floor) {
        return Err(Error::UnsupportedRegime(format!(
            "interaction {u} below the floor {floor}"
        )));
    }
    Ok(())
}
