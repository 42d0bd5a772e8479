//! Kohn-Sham densities of inhomogeneous chains and their local-density
//! entanglement averages.
//!
//! The single-particle Hamiltonian has hopping `-1` between neighbours and
//! diagonal `V_i + U n_i / 2 + v_xc(n_i, U)`, with the exchange-correlation
//! energy taken from the homogeneous functional:
//! `e_xc(n, U) = e0(n, U) - e0(n, 0) - U n^2 / 4`.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::chain::{build_potential, ChainSpec, PotentialSpec};
use crate::error::{Error, Result};
use crate::fvc::{EntropyFunctional, Functional};
use crate::linalg;

/// Step of the central difference in `v_xc`.
pub const XC_STEP: f64 = 1e-4;

const PARTICLE_TOLERANCE: f64 = 1e-6;
const OCCUPATION_CUTOFF: f64 = 1e-15;
const STALL_LIMIT: usize = 30;
const MIN_WEIGHT: f64 = 1e-3;
const BLOWUP_LIMIT: usize = 5;

/// Density update between Kohn-Sham iterations.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Mixing {
    /// `n <- n + mixing (F(n) - n)`.
    Linear,
    /// Anderson acceleration over the last `depth` residuals, falling back to
    /// a linear step whenever the extrapolated density leaves `[0, 2]`.
    Anderson { depth: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ScfConfig {
    pub mixing: f64,
    pub tol: f64,
    pub max_iter: usize,
    pub scheme: Mixing,
    /// Fermi-Dirac temperature of the orbital occupations. Zero means a
    /// sharp Fermi level with equal shares across a degenerate frontier.
    pub smearing: f64,
    /// Half-width of the window around `n = 1` in which `v_xc` is
    /// interpolated between its values on either side of the Mott kink.
    pub mott_window: f64,
}

impl Default for ScfConfig {
    fn default() -> Self {
        Self {
            mixing: 0.1,
            tol: 1e-8,
            max_iter: 5000,
            scheme: Mixing::Anderson { depth: 8 },
            smearing: 0.05,
            mott_window: 0.05,
        }
    }
}

impl ScfConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.mixing > 0.0 && self.mixing <= 1.0) {
            return Err(Error::InvalidSpec(format!(
                "mixing weight {} outside (0, 1]",
                self.mixing
            )));
        }
        if !(self.tol > 0.0) || !self.tol.is_finite() {
            return Err(Error::InvalidSpec(format!(
                "tolerance {} must be positive",
                self.tol
            )));
        }
        if self.max_iter == 0 {
            return Err(Error::InvalidSpec("max_iter must be at least 1".into()));
        }
        if let Mixing::Anderson { depth } = self.scheme {
            if depth < 2 {
                return Err(Error::InvalidSpec(format!(
                    "Anderson depth {depth} below 2"
                )));
            }
        }
        if !(self.smearing >= 0.0) || !self.smearing.is_finite() {
            return Err(Error::InvalidSpec(format!(
                "smearing {} must be >= 0",
                self.smearing
            )));
        }
        if !(self.mott_window == 0.0 || self.mott_window >= 2.0 * XC_STEP)
            || !self.mott_window.is_finite()
            || self.mott_window >= 0.5
        {
            return Err(Error::InvalidSpec(format!(
                "Mott window {} must be 0 or in [{}, 0.5)",
                self.mott_window,
                2.0 * XC_STEP
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProfileSource {
    Scf,
    Exact,
}

/// Site densities `{n_i}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DensityProfile {
    densities: Vec<f64>,
    source: ProfileSource,
}

impl DensityProfile {
    /// Values within `1e-9` outside `[0, 2]` are clamped; anything further
    /// out is rejected.
    pub fn new(densities: Vec<f64>, source: ProfileSource) -> Result<Self> {
        if densities.is_empty() {
            return Err(Error::InvalidSpec("empty density profile".into()));
        }
        let mut densities = densities;
        for (i, n) in densities.iter_mut().enumerate() {
            if !n.is_finite() || *n < -1e-9 || *n > 2.0 + 1e-9 {
                return Err(Error::InvalidSpec(format!(
                    "density {n} at site {i} outside [0, 2]"
                )));
            }
            *n = n.clamp(0.0, 2.0);
        }
        Ok(Self { densities, source })
    }

    /// Checks the total against an expected particle number.
    pub fn with_particles(
        densities: Vec<f64>,
        source: ProfileSource,
        particles: usize,
    ) -> Result<Self> {
        let p = Self::new(densities, source)?;
        let total = p.total();
        if (total - particles as f64).abs() > PARTICLE_TOLERANCE {
            return Err(Error::InvalidSpec(format!(
                "profile holds {total} particles, expected {particles}"
            )));
        }
        Ok(p)
    }

    pub fn densities(&self) -> &[f64] {
        &self.densities
    }

    pub fn source(&self) -> ProfileSource {
        self.source
    }

    pub fn total(&self) -> f64 {
        self.densities.iter().sum()
    }

    pub fn variance(&self) -> f64 {
        let len = self.densities.len() as f64;
        let mean = self.total() / len;
        self.densities
            .iter()
            .map(|n| (n - mean).powi(2))
            .sum::<f64>()
            / len
    }
}

/// Exchange-correlation potential at one interaction.
#[derive(Debug, Clone, Copy)]
pub struct XcPotential {
    functional: Option<Functional>,
    free: Functional,
    window: f64,
}

impl XcPotential {
    pub fn new(u: f64, mott_window: f64) -> Result<Self> {
        if u != 0.0 && !(u >= crate::fvc::MIN_DERIVATIVE_U) {
            return Err(Error::UnsupportedRegime(format!(
                "exchange-correlation potential needs U = 0 or U >= {}, got {u}",
                crate::fvc::MIN_DERIVATIVE_U
            )));
        }
        let functional = if u == 0.0 {
            None
        } else {
            Some(Functional::new(u)?)
        };
        Ok(Self {
            functional,
            free: Functional::new(0.0)?,
            window: mott_window,
        })
    }

    pub fn energy(&self, n: f64) -> Result<f64> {
        match &self.functional {
            None => Ok(0.0),
            Some(f) => Ok(f.e0(n)? - self.free.e0(n)? - 0.25 * f.u() * n * n),
        }
    }

    // plain central difference, one-sided at the ends of [0, 2]
    fn raw(&self, n: f64) -> Result<f64> {
        let h = XC_STEP;
        if n - h < 0.0 {
            Ok((self.energy(n + h)? - self.energy(n)?) / h)
        } else if n + h > 2.0 {
            Ok((self.energy(n)? - self.energy(n - h)?) / h)
        } else {
            Ok((self.energy(n + h)? - self.energy(n - h)?) / (2.0 * h))
        }
    }

    /// `v_xc(n)`; zero at `U = 0`.
    pub fn potential(&self, n: f64) -> Result<f64> {
        if self.functional.is_none() {
            if !(0.0..=2.0).contains(&n) {
                return Err(Error::InvalidSpec(format!("density {n} outside [0, 2]")));
            }
            return Ok(0.0);
        }
        let w = self.window;
        if w > 0.0 && (n - 1.0).abs() < w {
            let left = self.raw(1.0 - w)?;
            let right = self.raw(1.0 + w)?;
            let t = (n - (1.0 - w)) / (2.0 * w);
            return Ok(left + t * (right - left));
        }
        self.raw(n)
    }
}

/// `v_xc(n, U)` with the default Mott window.
pub fn xc_potential(n: f64, u: f64) -> Result<f64> {
    XcPotential::new(u, ScfConfig::default().mott_window)?.potential(n)
}

/// Self-consistent solution with its iteration record.
#[derive(Debug, Clone)]
pub struct ScfSolution {
    pub profile: DensityProfile,
    pub iterations: usize,
    pub residuals: Vec<f64>,
    /// Largest `|sum n_i - N|` seen over all input and output densities.
    pub max_particle_error: f64,
}

// Fermi-Dirac occupations per spin, summing to `per_spin`.
fn occupations(values: &[f64], per_spin: usize, kt: f64) -> Vec<f64> {
    let target = per_spin as f64;
    let mut occ = vec![0.0; values.len()];
    if per_spin == 0 {
        return occ;
    }
    if kt == 0.0 {
        let scale = values.iter().fold(1.0_f64, |m, v| m.max(v.abs()));
        let frontier = values[per_spin - 1];
        let tol = 1e-10 * scale;
        let first = values
            .iter()
            .position(|&e| (e - frontier).abs() <= tol)
            .unwrap();
        let last = values
            .iter()
            .rposition(|&e| (e - frontier).abs() <= tol)
            .unwrap();
        let share = (per_spin - first) as f64 / (last + 1 - first) as f64;
        for (k, o) in occ.iter_mut().enumerate() {
            *o = if k < first {
                1.0
            } else if k <= last {
                share
            } else {
                0.0
            };
        }
        return occ;
    }
    let fill = |mu: f64, occ: &mut [f64]| -> f64 {
        let mut total = 0.0;
        for (o, &e) in occ.iter_mut().zip(values) {
            *o = 1.0 / (1.0 + ((e - mu) / kt).exp());
            total += *o;
        }
        total
    };
    let mut lo = values[0] - 50.0 * kt;
    let mut hi = values[values.len() - 1] + 50.0 * kt;
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if hi - lo <= 1e-14 * (1.0 + mid.abs()) {
            break;
        }
        if fill(mid, &mut occ) < target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    fill(0.5 * (lo + hi), &mut occ);
    for o in occ.iter_mut() {
        if *o < OCCUPATION_CUTOFF {
            *o = 0.0;
        }
    }
    let total: f64 = occ.iter().sum();
    occ.iter_mut().for_each(|o| *o *= target / total);
    occ
}

/// Output density of one Kohn-Sham step from the input density `density`.
pub fn ks_step(spec: &ChainSpec, density: &[f64], cfg: &ScfConfig) -> Result<Vec<f64>> {
    let xc = XcPotential::new(spec.u(), cfg.mott_window)?;
    ks_output(spec, &xc, density, cfg.smearing)
}

fn ks_output(spec: &ChainSpec, xc: &XcPotential, density: &[f64], kt: f64) -> Result<Vec<f64>> {
    let sites = spec.sites();
    if density.len() != sites {
        return Err(Error::DimensionMismatch {
            expected: sites,
            got: density.len(),
        });
    }
    let u = spec.u();
    let diag: Vec<f64> = density
        .iter()
        .zip(spec.potential())
        .map(|(&n, &v)| Ok(v + 0.5 * u * n + xc.potential(n)?))
        .collect::<Result<_>>()?;
    let off = vec![-1.0; sites - 1];
    let values = linalg::tridiagonal_eigenvalues(&diag, &off)?;
    let occ = occupations(&values, spec.n_up(), kt);
    let count = occ.iter().rposition(|&o| o > 0.0).map_or(0, |k| k + 1);
    let mut out = vec![0.0; sites];
    if count == 0 {
        return Ok(out);
    }
    let eig = linalg::eigenvectors_for(&diag, &off, &values[..count])?;
    for (k, &o) in occ[..count].iter().enumerate() {
        for (n, phi) in out.iter_mut().zip(eig.vector(k)) {
            *n += 2.0 * o * phi * phi;
        }
    }
    Ok(out)
}

struct Mixer {
    scheme: Mixing,
    weight: f64,
    inputs: Vec<Vec<f64>>,
    residuals: Vec<Vec<f64>>,
}

impl Mixer {
    fn new(cfg: &ScfConfig) -> Self {
        Self {
            scheme: cfg.scheme,
            weight: cfg.mixing,
            inputs: Vec::new(),
            residuals: Vec::new(),
        }
    }

    fn reset(&mut self) {
        self.inputs.clear();
        self.residuals.clear();
    }

    fn linear(&self, input: &[f64], residual: &[f64]) -> Vec<f64> {
        input
            .iter()
            .zip(residual)
            .map(|(n, r)| n + self.weight * r)
            .collect()
    }

    fn next(&mut self, input: &[f64], residual: &[f64]) -> Vec<f64> {
        let depth = match self.scheme {
            Mixing::Linear => return self.linear(input, residual),
            Mixing::Anderson { depth } => depth,
        };
        self.inputs.push(input.to_vec());
        self.residuals.push(residual.to_vec());
        if self.inputs.len() > depth {
            self.inputs.remove(0);
            self.residuals.remove(0);
        }
        let m = self.inputs.len() - 1;
        if m == 0 {
            return self.linear(input, residual);
        }
        let len = input.len();
        let d_res = DMatrix::from_fn(len, m, |i, j| {
            self.residuals[j + 1][i] - self.residuals[j][i]
        });
        let d_in = DMatrix::from_fn(len, m, |i, j| self.inputs[j + 1][i] - self.inputs[j][i]);
        let r = DVector::from_column_slice(residual);
        let gamma = match d_res.clone().svd(true, true).solve(&r, 1e-12) {
            Ok(g) => g,
            Err(_) => {
                self.reset();
                return self.linear(input, residual);
            }
        };
        let step_in = &d_in * &gamma;
        let step_res = &d_res * &gamma;
        let next: Vec<f64> = (0..len)
            .map(|i| input[i] - step_in[i] + self.weight * (residual[i] - step_res[i]))
            .collect();
        if next.iter().all(|n| (0.0..=2.0).contains(n)) {
            next
        } else {
            let keep_in = self.inputs.pop().unwrap();
            let keep_res = self.residuals.pop().unwrap();
            self.reset();
            self.inputs.push(keep_in);
            self.residuals.push(keep_res);
            self.linear(input, residual)
        }
    }
}

fn max_abs(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

/// Self-consistent Kohn-Sham density, starting from the uniform profile.
///
/// The returned profile is the input density of the first iteration whose
/// output differs from it by less than `cfg.tol` in the max norm.
pub fn solve_scf(spec: &ChainSpec, cfg: &ScfConfig) -> Result<ScfSolution> {
    cfg.validate()?;
    if spec.n_up() != spec.n_down() {
        return Err(Error::InvalidSpec(
            "Kohn-Sham pipeline needs a spin-balanced chain".into(),
        ));
    }
    let xc = XcPotential::new(spec.u(), cfg.mott_window)?;
    let sites = spec.sites();
    let particles = spec.particles() as f64;
    let mut input = vec![particles / sites as f64; sites];
    let mut residuals = Vec::new();
    let mut particle_error: f64 = 0.0;
    let mut mixer = Mixer::new(cfg);
    let mut best = f64::INFINITY;
    let mut stalled = 0;
    let mut blowups = 0;
    let sum_error = |v: &[f64]| (v.iter().sum::<f64>() - particles).abs();

    for iteration in 1..=cfg.max_iter {
        particle_error = particle_error.max(sum_error(&input));
        let output = ks_output(spec, &xc, &input, cfg.smearing)?;
        particle_error = particle_error.max(sum_error(&output));
        // no density feedback without interaction
        if spec.u() == 0.0 {
            residuals.push(0.0);
            return Ok(ScfSolution {
                profile: DensityProfile::new(output, ProfileSource::Scf)?,
                iterations: iteration,
                residuals,
                max_particle_error: particle_error,
            });
        }
        let residual: Vec<f64> = output.iter().zip(&input).map(|(o, i)| o - i).collect();
        let delta = max_abs(&residual);
        residuals.push(delta);
        if !delta.is_finite() {
            break;
        }
        if delta < cfg.tol {
            return Ok(ScfSolution {
                profile: DensityProfile::new(input, ProfileSource::Scf)?,
                iterations: iteration,
                residuals,
                max_particle_error: particle_error,
            });
        }
        // after a blow-up, damp harder and measure progress from the new point;
        // repeated blow-ups drop Anderson for plain linear mixing
        if delta > 10.0 * best {
            blowups += 1;
            if blowups >= BLOWUP_LIMIT && mixer.scheme != Mixing::Linear {
                mixer.scheme = Mixing::Linear;
                mixer.weight = cfg.mixing;
            } else {
                mixer.weight = (0.5 * mixer.weight).max(MIN_WEIGHT);
            }
            mixer.reset();
            best = f64::INFINITY;
            stalled = 0;
        }
        if delta < best {
            best = delta;
            stalled = 0;
        } else {
            stalled += 1;
        }
        // a stalled iteration is usually a limit cycle: damp harder
        if stalled >= STALL_LIMIT && mixer.weight > MIN_WEIGHT {
            mixer.weight = (0.5 * mixer.weight).max(MIN_WEIGHT);
            mixer.reset();
            stalled = 0;
        }
        let mut next = mixer.next(&input, &residual);
        // remove rounding drift in the total
        let drift = (particles - next.iter().sum::<f64>()) / sites as f64;
        next.iter_mut().for_each(|n| *n += drift);
        input = next;
    }
    Err(Error::Convergence {
        iterations: residuals.len(),
        residuals,
    })
}

/// Ensemble statistics over disorder samples.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnsembleStats {
    pub samples: usize,
    pub s_std: f64,
    pub l_std: f64,
    /// Sample mean of the spatial variance of `{n_i}`.
    pub mean_density_variance: f64,
}

/// Site-averaged entropies, optionally with per-site values and ensemble
/// statistics. For ensembles `s_avg` and `l_avg` are sample means.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EntropyReport {
    pub s_avg: f64,
    pub l_avg: f64,
    pub per_site: Option<Vec<(f64, f64)>>,
    pub ensemble: Option<EnsembleStats>,
}

/// Local-density averages `(1/L) sum_i S(n_i, U)` and `(1/L) sum_i L(n_i, U)`.
pub fn lda_entropies(profile: &DensityProfile, u: f64) -> Result<EntropyReport> {
    let functional = EntropyFunctional::new(u)?;
    let per_site: Vec<(f64, f64)> = profile
        .densities()
        .iter()
        .map(|&n| functional.entropies(n))
        .collect::<Result<_>>()?;
    let len = per_site.len() as f64;
    let s_avg = per_site.iter().map(|p| p.0).sum::<f64>() / len;
    let l_avg = per_site.iter().map(|p| p.1).sum::<f64>() / len;
    Ok(EntropyReport {
        s_avg,
        l_avg,
        per_site: Some(per_site),
        ensemble: None,
    })
}

/// Disorder ensemble parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnsembleSpec {
    pub sites: usize,
    pub particles: usize,
    pub u: f64,
    pub concentration: f64,
    pub strength: f64,
    pub samples: usize,
    pub master_seed: u64,
}

impl EnsembleSpec {
    /// Seed of sample `index`.
    pub fn sample_seed(&self, index: usize) -> u64 {
        self.master_seed ^ index as u64
    }

    pub fn sample_chain(&self, index: usize) -> Result<ChainSpec> {
        if self.particles % 2 != 0 {
            return Err(Error::InvalidSpec(format!(
                "particle number {} must be even",
                self.particles
            )));
        }
        let potential = PotentialSpec::Disorder {
            concentration: self.concentration,
            strength: self.strength,
            seed: self.sample_seed(index),
        };
        ChainSpec::new(
            self.sites,
            self.particles / 2,
            self.u,
            build_potential(&potential, self.sites)?,
        )
    }
}

struct SampleResult {
    s: f64,
    l: f64,
    variance: f64,
}

fn run_sample(spec: &EnsembleSpec, index: usize, cfg: &ScfConfig) -> Result<SampleResult> {
    let chain = spec.sample_chain(index)?;
    let solution = solve_scf(&chain, cfg)?;
    let report = lda_entropies(&solution.profile, spec.u)?;
    Ok(SampleResult {
        s: report.s_avg,
        l: report.l_avg,
        variance: solution.profile.variance(),
    })
}

fn mean_std(values: &[f64]) -> (f64, f64) {
    let len = values.len() as f64;
    let mean = values.iter().sum::<f64>() / len;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (len - 1.0);
    (mean, var.sqrt())
}

/// Runs every sample (in parallel) and reduces in sample order. The first
/// failing sample by index aborts the ensemble.
pub fn disorder_ensemble(spec: &EnsembleSpec, cfg: &ScfConfig) -> Result<EntropyReport> {
    if spec.samples == 0 {
        return Err(Error::InvalidSpec(
            "ensemble needs at least one sample".into(),
        ));
    }
    cfg.validate()?;
    // reject bad parameters once instead of per sample
    spec.sample_chain(0)?;
    EntropyFunctional::new(spec.u)?;
    let results: Vec<Result<SampleResult>> = (0..spec.samples)
        .into_par_iter()
        .map(|s| run_sample(spec, s, cfg))
        .collect();
    let mut s_values = Vec::with_capacity(spec.samples);
    let mut l_values = Vec::with_capacity(spec.samples);
    let mut variances = Vec::with_capacity(spec.samples);
    for (index, r) in results.into_iter().enumerate() {
        let r = r.map_err(|e| Error::SampleFailed {
            index,
            seed: spec.sample_seed(index),
            source: Box::new(e),
        })?;
        s_values.push(r.s);
        l_values.push(r.l);
        variances.push(r.variance);
    }
    let (s_avg, s_std) = mean_std(&s_values);
    let (l_avg, l_std) = mean_std(&l_values);
    Ok(EntropyReport {
        s_avg,
        l_avg,
        per_site: None,
        ensemble: Some(EnsembleStats {
            samples: spec.samples,
            s_std,
            l_std,
            mean_density_variance: variances.iter().sum::<f64>() / variances.len() as f64,
        }),
    })
}
