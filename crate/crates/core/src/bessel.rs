//! Bessel functions of the first kind, orders zero and one.
//!
//! Three regimes: the ascending power series for `|x| <= 2`, Miller's
//! backward recurrence normalized by `J0 + 2 sum J_2k = 1` up to `|x| < 25`,
//! and the Hankel asymptotic expansion beyond. Absolute error stays below
//! about `1e-14` on the whole real line.

use std::f64::consts::{FRAC_1_SQRT_2, PI};

const SERIES_MAX: f64 = 2.0;
const ASYMPTOTIC_MIN: f64 = 25.0;

/// `J0(x)`.
pub fn j0(x: f64) -> f64 {
    let ax = x.abs();
    if ax <= SERIES_MAX {
        series(0, ax)
    } else if ax < ASYMPTOTIC_MIN {
        miller(ax).0
    } else {
        hankel(0, ax)
    }
}

/// `J1(x)`.
pub fn j1(x: f64) -> f64 {
    let ax = x.abs();
    let v = if ax <= SERIES_MAX {
        series(1, ax)
    } else if ax < ASYMPTOTIC_MIN {
        miller(ax).1
    } else {
        hankel(1, ax)
    };
    if x < 0.0 {
        -v
    } else {
        v
    }
}

/// `J1(x) / x`, finite at the origin where it equals `1/2`.
pub fn j1_over_x(x: f64) -> f64 {
    if x.abs() <= SERIES_MAX {
        // sum_k (-1)^k (x/2)^{2k} / (2 k! (k+1)!)
        let q = 0.25 * x * x;
        let mut term = 0.5;
        let mut sum = term;
        for k in 1..40 {
            term *= -q / (k as f64 * (k + 1) as f64);
            sum += term;
            if term.abs() < 1e-18 {
                break;
            }
        }
        sum
    } else {
        j1(x) / x
    }
}

fn series(order: u32, x: f64) -> f64 {
    let half = 0.5 * x;
    let q = half * half;
    let mut term = if order == 0 { 1.0 } else { half };
    let mut sum = term;
    for k in 1..60 {
        let k = k as f64;
        term *= -q / (k * (k + order as f64));
        sum += term;
        if term.abs() < 1e-18 * sum.abs().max(1e-300) {
            break;
        }
    }
    sum
}

// Returns (J0(x), J1(x)) for moderate positive x.
fn miller(x: f64) -> (f64, f64) {
    let start = {
        let m = (x + 20.0 + (40.0 * x).sqrt()) as usize;
        m + (m % 2)
    };
    let mut next = 0.0; // J_{k+1}
    let mut cur = 1e-30; // J_k
    let mut norm = 0.0;
    let mut j0 = 0.0;
    let mut j1 = 0.0;
    for k in (1..=start).rev() {
        let prev = 2.0 * k as f64 / x * cur - next;
        next = cur;
        cur = prev;
        // cur is now J_{k-1}
        if cur.abs() > 1e200 {
            cur *= 1e-200;
            next *= 1e-200;
            norm *= 1e-200;
            j1 *= 1e-200;
        }
        let order = k - 1;
        if order == 1 {
            j1 = cur;
        }
        if order == 0 {
            j0 = cur;
        } else if order % 2 == 0 {
            norm += 2.0 * cur;
        }
    }
    norm += j0;
    (j0 / norm, j1 / norm)
}

fn hankel(order: u32, x: f64) -> f64 {
    let mu = 4.0 * (order * order) as f64;
    // a_k = prod_{j=1..k} (mu - (2j-1)^2) / (k! 8^k), alternating into P and Q
    let mut p = 1.0;
    let mut q = 0.0;
    let mut a = 1.0;
    let mut last = f64::INFINITY;
    for k in 1..60 {
        let odd = (2 * k - 1) as f64;
        a *= (mu - odd * odd) / (k as f64 * 8.0 * x);
        if a.abs() > last || a.abs() < 1e-18 {
            break;
        }
        last = a.abs();
        match k % 4 {
            1 => q += a,
            2 => p -= a,
            3 => q -= a,
            _ => p += a,
        }
    }
    // chi = x - (order/2 + 1/4) pi
    let (s, c) = x.sin_cos();
    let (cos_chi, sin_chi) = if order == 0 {
        ((c + s) * FRAC_1_SQRT_2, (s - c) * FRAC_1_SQRT_2)
    } else {
        ((s - c) * FRAC_1_SQRT_2, -(c + s) * FRAC_1_SQRT_2)
    };
    (2.0 / (PI * x)).sqrt() * (p * cos_chi - q * sin_chi)
}

/// The `s`-th positive zero (`s >= 1`) of `J_order`, `order` in {0, 1}.
pub fn zero(order: u32, s: usize) -> f64 {
    assert!(
        order <= 1 && s >= 1,
        "zeros are defined for J0, J1 and s >= 1"
    );
    let mu = 4.0 * (order * order) as f64;
    let beta = (s as f64 + 0.5 * order as f64 - 0.25) * PI;
    // McMahon's expansion, then Newton on J_order.
    let b8 = 8.0 * beta;
    let mut x = beta - (mu - 1.0) / b8 - 4.0 * (mu - 1.0) * (7.0 * mu - 31.0) / (3.0 * b8.powi(3));
    for _ in 0..20 {
        let (f, df) = if order == 0 {
            (j0(x), -j1(x))
        } else {
            let j1x = j1(x);
            (j1x, j0(x) - j1x / x)
        };
        let dx = f / df;
        x -= dx;
        if dx.abs() < 1e-15 * x {
            break;
        }
    }
    x
}

/// Increasing sequence of positive zeros of `J0(x) J1(x)`.
pub struct ProductZeros {
    next0: usize,
    next1: usize,
    z0: f64,
    z1: f64,
}

impl ProductZeros {
    pub fn new() -> Self {
        Self {
            next0: 2,
            next1: 2,
            z0: zero(0, 1),
            z1: zero(1, 1),
        }
    }
}

impl Default for ProductZeros {
    fn default() -> Self {
        Self::new()
    }
}

impl Iterator for ProductZeros {
    type Item = f64;

    fn next(&mut self) -> Option<f64> {
        // zeros of J0 and J1 interlace, so the two streams never tie
        if self.z0 < self.z1 {
            let z = self.z0;
            self.z0 = zero(0, self.next0);
            self.next0 += 1;
            Some(z)
        } else {
            let z = self.z1;
            self.z1 = zero(1, self.next1);
            self.next1 += 1;
            Some(z)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    // Bessel's integral J_n(x) = (1/2pi) int_0^{2pi} cos(n t - x sin t) dt;
    // the trapezoid rule is spectrally accurate for this periodic integrand.
    fn bessel_integral(n: u32, x: f64) -> f64 {
        let m = 512;
        let h = 2.0 * PI / m as f64;
        (0..m)
            .map(|k| {
                let t = k as f64 * h;
                (n as f64 * t - x * t.sin()).cos()
            })
            .sum::<f64>()
            / m as f64
    }

    #[test]
    fn matches_integral_representation() {
        let mut x = 0.0;
        while x < 80.0 {
            assert!((j0(x) - bessel_integral(0, x)).abs() < 1e-13, "J0({x})");
            assert!((j1(x) - bessel_integral(1, x)).abs() < 1e-13, "J1({x})");
            x += 0.173;
        }
        for x in [1.999, 2.0, 2.001, 24.999, 25.0, 25.001] {
            assert!((j0(x) - bessel_integral(0, x)).abs() < 1e-13, "J0({x})");
            assert!((j1(x) - bessel_integral(1, x)).abs() < 1e-13, "J1({x})");
        }
    }

    #[test]
    fn reference_values() {
        assert!((j0(1.0) - 0.765_197_686_557_966_6).abs() < 1e-15);
        assert!((j1(1.0) - 0.440_050_585_744_933_5).abs() < 1e-15);
        assert!((j0(10.0) - -0.245_935_764_451_348_3).abs() < 1e-14);
        assert!((j1(10.0) - 0.043_472_746_168_861_44).abs() < 1e-14);
        assert_eq!(j0(0.0), 1.0);
        assert_eq!(j1(0.0), 0.0);
        assert_eq!(j1(-3.0), -j1(3.0));
    }

    #[test]
    fn j1_over_x_is_regular() {
        assert_eq!(j1_over_x(0.0), 0.5);
        for x in [1e-8, 0.3, 1.9, 2.1, 7.0] {
            assert!((j1_over_x(x) - j1(x) / x).abs() < 1e-14);
        }
    }

    #[test]
    fn zeros_match_tables() {
        assert!((zero(0, 1) - 2.404_825_557_695_773).abs() < 1e-13);
        assert!((zero(0, 2) - 5.520_078_110_286_311).abs() < 1e-13);
        assert!((zero(1, 1) - 3.831_705_970_207_512).abs() < 1e-13);
        assert!((zero(1, 2) - 7.015_586_669_815_619).abs() < 1e-13);
        for s in 1..200 {
            assert!(j0(zero(0, s)).abs() < 1e-14);
            assert!(j1(zero(1, s)).abs() < 1e-14);
        }
    }

    #[test]
    fn product_zeros_interlace() {
        let z: Vec<f64> = ProductZeros::new().take(400).collect();
        assert!(z.windows(2).all(|w| w[1] > w[0]));
        // asymptotically spaced by pi/2
        let gap = z[399] - z[398];
        assert!((gap - PI / 2.0).abs() < 1e-3);
    }
}
