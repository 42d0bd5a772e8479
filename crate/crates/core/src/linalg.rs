//! Symmetric tridiagonal eigensolvers.

use crate::error::{Error, Result};

const MAX_QL_SWEEPS: usize = 60;

/// Eigenpairs of a symmetric tridiagonal matrix, eigenvalues ascending.
#[derive(Debug, Clone)]
pub struct TridiagonalEigen {
    pub values: Vec<f64>,
    /// Row `j` (`vectors[j * n..(j + 1) * n]`) is the eigenvector of `values[j]`.
    pub vectors: Vec<f64>,
    pub n: usize,
}

impl TridiagonalEigen {
    pub fn vector(&self, j: usize) -> &[f64] {
        &self.vectors[j * self.n..(j + 1) * self.n]
    }
}

fn check_shape(diag: &[f64], off: &[f64]) -> Result<()> {
    if diag.is_empty() {
        return Err(Error::DimensionMismatch {
            expected: 1,
            got: 0,
        });
    }
    if off.len() + 1 != diag.len() {
        return Err(Error::DimensionMismatch {
            expected: diag.len() - 1,
            got: off.len(),
        });
    }
    Ok(())
}

// sqrt(a^2 + b^2) without libm's hypot, rescaling only when squaring
// could overflow or underflow
fn scaled_norm(a: f64, b: f64) -> f64 {
    let m = a.abs().max(b.abs());
    if m > 1e150 || (m < 1e-150 && m > 0.0) {
        let (a, b) = (a / m, b / m);
        m * (a * a + b * b).sqrt()
    } else {
        (a * a + b * b).sqrt()
    }
}

// Implicit QL with Wilkinson-type shifts. `rotate(i, c, s)` receives every
// plane rotation so callers can accumulate eigenvectors or skip them.
fn implicit_ql<F: FnMut(usize, f64, f64)>(d: &mut [f64], off: &[f64], mut rotate: F) -> Result<()> {
    let n = d.len();
    let mut e = vec![0.0; n];
    e[..n - 1].copy_from_slice(off);
    for l in 0..n {
        let mut sweeps = 0;
        loop {
            let mut m = l;
            while m + 1 < n {
                let dd = d[m].abs() + d[m + 1].abs();
                if e[m].abs() <= f64::EPSILON * dd {
                    break;
                }
                m += 1;
            }
            if m == l {
                break;
            }
            sweeps += 1;
            if sweeps > MAX_QL_SWEEPS {
                return Err(Error::numerical("tridiagonal QL iteration", e[l].abs()));
            }
            let mut g = (d[l + 1] - d[l]) / (2.0 * e[l]);
            let mut r = (g * g + 1.0).sqrt();
            g = d[m] - d[l] + e[l] / (g + r.copysign(g));
            let (mut s, mut c, mut p) = (1.0, 1.0, 0.0);
            let mut deflated = false;
            for i in (l..m).rev() {
                let f = s * e[i];
                let b = c * e[i];
                r = scaled_norm(f, g);
                e[i + 1] = r;
                if r == 0.0 {
                    d[i + 1] -= p;
                    e[m] = 0.0;
                    deflated = true;
                    break;
                }
                s = f / r;
                c = g / r;
                g = d[i + 1] - p;
                r = (d[i] - g) * s + 2.0 * c * b;
                p = s * r;
                d[i + 1] = g + p;
                g = c * r - b;
                rotate(i, c, s);
            }
            if deflated {
                continue;
            }
            d[l] -= p;
            e[l] = g;
            e[m] = 0.0;
        }
    }
    Ok(())
}

/// Eigenvalues only, ascending.
pub fn tridiagonal_eigenvalues(diag: &[f64], off: &[f64]) -> Result<Vec<f64>> {
    check_shape(diag, off)?;
    let mut d = diag.to_vec();
    implicit_ql(&mut d, off, |_, _, _| {})?;
    d.sort_by(f64::total_cmp);
    Ok(d)
}

/// All eigenpairs.
pub fn tridiagonal_eigen(diag: &[f64], off: &[f64]) -> Result<TridiagonalEigen> {
    check_shape(diag, off)?;
    let n = diag.len();
    let mut d = diag.to_vec();
    // rows of `z` are the components along each basis vector; row i holds
    // column i of the accumulated rotation
    let mut z = vec![0.0; n * n];
    for i in 0..n {
        z[i * n + i] = 1.0;
    }
    implicit_ql(&mut d, off, |i, c, s| {
        let (head, tail) = z.split_at_mut((i + 1) * n);
        let zi = &mut head[i * n..];
        let zi1 = &mut tail[..n];
        for (a, b) in zi.iter_mut().zip(zi1.iter_mut()) {
            let f = *b;
            *b = s * *a + c * f;
            *a = c * *a - s * f;
        }
    })?;
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| d[a].total_cmp(&d[b]));
    let values = order.iter().map(|&j| d[j]).collect();
    let mut vectors = Vec::with_capacity(n * n);
    for &j in &order {
        vectors.extend_from_slice(&z[j * n..(j + 1) * n]);
    }
    Ok(TridiagonalEigen { values, vectors, n })
}

/// Lowest `count` eigenpairs: QL eigenvalues followed by inverse iteration,
/// with Gram-Schmidt inside clusters of close eigenvalues.
pub fn lowest_eigenpairs(diag: &[f64], off: &[f64], count: usize) -> Result<TridiagonalEigen> {
    let values = tridiagonal_eigenvalues(diag, off)?;
    eigenvectors_for(diag, off, &values[..count.min(diag.len())])
}

/// Eigenvectors for already known eigenvalues `values` (ascending) by
/// inverse iteration.
pub fn eigenvectors_for(diag: &[f64], off: &[f64], values: &[f64]) -> Result<TridiagonalEigen> {
    check_shape(diag, off)?;
    let n = diag.len();
    let count = values.len();
    if count > n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: count,
        });
    }
    let scale = diag
        .iter()
        .map(|x| x.abs())
        .chain(off.iter().map(|x| 2.0 * x.abs()))
        .fold(0.0, f64::max)
        .max(f64::MIN_POSITIVE);
    let cluster_gap = 1e-3 * scale;
    let mut vectors: Vec<f64> = Vec::with_capacity(count * n);
    let mut cluster_start = 0;
    let mut shift_prev = f64::NEG_INFINITY;
    let mut solver = PivotedTridiagonal::new(n);
    for j in 0..count {
        let lambda = values[j];
        if j > 0 && lambda - values[j - 1] > cluster_gap {
            cluster_start = j;
        }
        // keep shifts distinct inside a cluster
        let mut shift = lambda;
        if j > cluster_start && shift <= shift_prev {
            shift = shift_prev + 10.0 * f64::EPSILON * scale;
        }
        shift_prev = shift;
        solver.factor(diag, off, shift, scale);
        let mut x: Vec<f64> = (0..n).map(|k| start_component(j, k)).collect();
        normalize(&mut x);
        // the shift is an eigenvalue to working precision, so two solves
        // converge outside clusters; Gram-Schmidt handles the rest
        for _ in 0..2 {
            solver.solve(&mut x);
            for prev in cluster_start..j {
                let v = &vectors[prev * n..(prev + 1) * n];
                let proj: f64 = v.iter().zip(&x).map(|(a, b)| a * b).sum();
                for (xi, vi) in x.iter_mut().zip(v) {
                    *xi -= proj * vi;
                }
            }
            normalize(&mut x);
        }
        vectors.extend_from_slice(&x);
    }
    Ok(TridiagonalEigen {
        values: values.to_vec(),
        vectors,
        n,
    })
}

fn start_component(j: usize, k: usize) -> f64 {
    // fixed pseudo-random start, no RNG state
    let h = (j as u64)
        .wrapping_mul(0x9E37_79B9_7F4A_7C15)
        .wrapping_add((k as u64).wrapping_mul(0xBF58_476D_1CE4_E5B9));
    let h = (h ^ (h >> 31)).wrapping_mul(0x94D0_49BB_1331_11EB);
    0.5 + ((h >> 11) as f64) / (1u64 << 53) as f64
}

fn normalize(x: &mut [f64]) {
    let norm = x.iter().map(|v| v * v).sum::<f64>().sqrt();
    if norm > 0.0 {
        x.iter_mut().for_each(|v| *v /= norm);
    }
}

// LU factorization with partial pivoting of (T - shift I).
struct PivotedTridiagonal {
    lower: Vec<f64>,
    diag: Vec<f64>,
    upper: Vec<f64>,
    upper2: Vec<f64>,
    swapped: Vec<bool>,
}

impl PivotedTridiagonal {
    fn new(n: usize) -> Self {
        Self {
            lower: vec![0.0; n],
            diag: vec![0.0; n],
            upper: vec![0.0; n],
            upper2: vec![0.0; n],
            swapped: vec![false; n],
        }
    }

    fn factor(&mut self, d: &[f64], off: &[f64], shift: f64, scale: f64) {
        let n = d.len();
        for i in 0..n {
            self.diag[i] = d[i] - shift;
            self.upper[i] = if i + 1 < n { off[i] } else { 0.0 };
            self.upper2[i] = 0.0;
            self.swapped[i] = false;
        }
        // sub-diagonal entries of the current row below
        let mut sub: Vec<f64> = off.to_vec();
        for i in 0..n.saturating_sub(1) {
            let a = self.diag[i];
            let b = sub[i];
            if a.abs() >= b.abs() {
                let a = if a == 0.0 { f64::EPSILON * scale } else { a };
                self.diag[i] = a;
                let m = b / a;
                self.lower[i] = m;
                self.diag[i + 1] -= m * self.upper[i];
            } else {
                // swap rows i and i+1
                let m = a / b;
                self.lower[i] = m;
                self.swapped[i] = true;
                self.diag[i] = b;
                let tmp = self.upper[i];
                self.upper[i] = self.diag[i + 1];
                self.diag[i + 1] = tmp - m * self.diag[i + 1];
                if i + 2 < n {
                    self.upper2[i] = self.upper[i + 1];
                    self.upper[i + 1] *= -m;
                }
            }
            sub[i] = 0.0;
        }
        if self.diag[n - 1] == 0.0 {
            self.diag[n - 1] = f64::EPSILON * scale;
        }
    }

    fn solve(&self, x: &mut [f64]) {
        let n = x.len();
        for i in 0..n.saturating_sub(1) {
            if self.swapped[i] {
                x.swap(i, i + 1);
                x[i + 1] -= self.lower[i] * x[i];
            } else {
                x[i + 1] -= self.lower[i] * x[i];
            }
        }
        for i in (0..n).rev() {
            let mut v = x[i];
            if i + 1 < n {
                v -= self.upper[i] * x[i + 1];
            }
            if i + 2 < n {
                v -= self.upper2[i] * x[i + 2];
            }
            x[i] = v / self.diag[i];
        }
        // rescale to avoid overflow on near-singular shifts
        let big = x.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        if big > 1e100 {
            x.iter_mut().for_each(|v| *v /= big);
        }
    }
}
