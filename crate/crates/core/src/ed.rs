//! Exact diagonalization of open Hubbard chains.
//!
//! States are pairs of bit masks `(up, down)` with fixed popcounts. Within a
//! spin sector masks are ordered by increasing integer value (colex order),
//! which gives a closed-form ranking. The many-body index is
//! `rank(up) * dim_down + rank(down)`.
//!
//! The Hamiltonian is applied matrix-free. The ground state comes from a
//! restarted Lanczos iteration with full reorthogonalization, or from a
//! dense solver for small bases.

use nalgebra::{DMatrix, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::chain::ChainSpec;
use crate::entropy::{self, OccupationProbabilities};
use crate::error::{Error, Result};
use crate::linalg;

/// Default cap on the many-body dimension.
pub const DEFAULT_MAX_DIM: usize = 2_000_000;

/// Largest dimension for which [`Solver::Auto`] uses the dense solver.
pub const DENSE_LIMIT: usize = 2000;

const MAX_SITES: usize = 32;

fn binomial(n: usize, k: usize) -> usize {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut c: u128 = 1;
    for i in 0..k {
        c = c * (n - i) as u128 / (i + 1) as u128;
    }
    c as usize
}

/// All masks on `sites` bits with popcount `count`, ascending.
fn sector_masks(sites: usize, count: usize) -> Vec<u32> {
    let mut masks = Vec::with_capacity(binomial(sites, count));
    if count == 0 {
        masks.push(0);
        return masks;
    }
    let limit: u64 = 1u64 << sites;
    let mut m: u64 = (1u64 << count) - 1;
    while m < limit {
        masks.push(m as u32);
        // Gosper's hack: next integer with the same popcount
        let c = m & m.wrapping_neg();
        let r = m + c;
        m = (((r ^ m) >> 2) / c) | r;
    }
    masks
}

/// Fock basis of one particle-number sector.
#[derive(Debug, Clone)]
pub struct FockBasis {
    sites: usize,
    up_masks: Vec<u32>,
    down_masks: Vec<u32>,
    // binom[p][k] = C(p, k)
    binom: Vec<Vec<usize>>,
}

impl FockBasis {
    pub fn new(sites: usize, n_up: usize, n_down: usize) -> Result<Self> {
        if sites == 0 || sites > MAX_SITES {
            return Err(Error::InvalidSpec(format!(
                "exact diagonalization supports 1..={MAX_SITES} sites, got {sites}"
            )));
        }
        if n_up > sites || n_down > sites {
            return Err(Error::InvalidSpec("more particles than sites".into()));
        }
        let binom = (0..=sites)
            .map(|p| (0..=sites).map(|k| binomial(p, k)).collect())
            .collect();
        Ok(Self {
            sites,
            up_masks: sector_masks(sites, n_up),
            down_masks: sector_masks(sites, n_down),
            binom,
        })
    }

    pub fn for_spec(spec: &ChainSpec) -> Result<Self> {
        Self::new(spec.sites(), spec.n_up(), spec.n_down())
    }

    /// Dimension without building the basis.
    pub fn dimension_of(sites: usize, n_up: usize, n_down: usize) -> usize {
        binomial(sites, n_up).saturating_mul(binomial(sites, n_down))
    }

    pub fn sites(&self) -> usize {
        self.sites
    }

    pub fn dim(&self) -> usize {
        self.up_masks.len() * self.down_masks.len()
    }

    pub fn dim_up(&self) -> usize {
        self.up_masks.len()
    }

    pub fn dim_down(&self) -> usize {
        self.down_masks.len()
    }

    pub fn up_masks(&self) -> &[u32] {
        &self.up_masks
    }

    pub fn down_masks(&self) -> &[u32] {
        &self.down_masks
    }

    /// Colex rank of a mask within its sector.
    pub fn rank(&self, mask: u32) -> usize {
        let mut rank = 0;
        let mut m = mask;
        let mut k = 1;
        while m != 0 {
            let p = m.trailing_zeros() as usize;
            rank += self.binom[p][k];
            k += 1;
            m &= m - 1;
        }
        rank
    }

    /// `(up, down)` masks of a basis index.
    pub fn state(&self, index: usize) -> (u32, u32) {
        let dd = self.down_masks.len();
        (self.up_masks[index / dd], self.down_masks[index % dd])
    }

    /// Index of the `(up, down)` pair, if it belongs to the sector.
    pub fn index(&self, up: u32, down: u32) -> Option<usize> {
        let fits = |m: u32| (m as u64) < (1u64 << self.sites);
        if !fits(up)
            || !fits(down)
            || up.count_ones() != self.up_masks[0].count_ones()
            || down.count_ones() != self.down_masks[0].count_ones()
        {
            return None;
        }
        let iu = self.rank(up);
        let id = self.rank(down);
        (self.up_masks.get(iu) == Some(&up) && self.down_masks.get(id) == Some(&down))
            .then(|| iu * self.down_masks.len() + id)
    }
}

/// Position of each fermionic mode in the Jordan-Wigner string.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ModeOrdering {
    /// All up modes, then all down modes.
    SpinBlocks,
    /// `1 up, 1 down, 2 up, 2 down, ...`
    Interleaved,
}

impl ModeOrdering {
    fn mode(self, sites: usize, site: usize, spin: usize) -> usize {
        match self {
            ModeOrdering::SpinBlocks => spin * sites + site,
            ModeOrdering::Interleaved => 2 * site + spin,
        }
    }

    // Sign of c+_{to,spin} c_{from,spin} acting on (up, down).
    fn hop_sign(
        self,
        sites: usize,
        up: u32,
        down: u32,
        spin: usize,
        from: usize,
        to: usize,
    ) -> f64 {
        let a = self.mode(sites, from, spin);
        let b = self.mode(sites, to, spin);
        let (lo, hi) = (a.min(b), a.max(b));
        let mut between = 0;
        for s in 0..sites {
            for (sp, mask) in [(0usize, up), (1usize, down)] {
                let m = self.mode(sites, s, sp);
                if m > lo && m < hi && mask >> s & 1 == 1 {
                    between += 1;
                }
            }
        }
        if between % 2 == 0 {
            1.0
        } else {
            -1.0
        }
    }
}

// Off-diagonal hops of one spin sector: for each mask, (target rank, -t * sign).
fn sector_hops(basis: &FockBasis, masks: &[u32]) -> Vec<Vec<(usize, f64)>> {
    masks
        .iter()
        .map(|&m| {
            let mut out = Vec::new();
            for i in 0..basis.sites.saturating_sub(1) {
                let pair = (m >> i) & 0b11;
                if pair == 0b01 || pair == 0b10 {
                    // nearest neighbours have no same-spin modes between them
                    let target = m ^ (0b11 << i);
                    out.push((basis.rank(target), -1.0));
                }
            }
            out
        })
        .collect()
}

/// Matrix-free Hamiltonian of one chain in one basis.
pub struct Hamiltonian<'a> {
    spec: &'a ChainSpec,
    basis: &'a FockBasis,
    up_hops: Vec<Vec<(usize, f64)>>,
    down_hops: Vec<Vec<(usize, f64)>>,
    up_potential: Vec<f64>,
    down_potential: Vec<f64>,
}

impl<'a> Hamiltonian<'a> {
    pub fn new(spec: &'a ChainSpec, basis: &'a FockBasis) -> Result<Self> {
        if spec.sites() != basis.sites
            || basis.up_masks[0].count_ones() as usize != spec.n_up()
            || basis.down_masks[0].count_ones() as usize != spec.n_down()
        {
            return Err(Error::InvalidSpec(
                "basis does not match the chain's sector".into(),
            ));
        }
        let onsite = |m: u32| -> f64 {
            (0..spec.sites())
                .filter(|&s| m >> s & 1 == 1)
                .map(|s| spec.potential()[s])
                .sum()
        };
        Ok(Self {
            spec,
            basis,
            up_hops: sector_hops(basis, &basis.up_masks),
            down_hops: sector_hops(basis, &basis.down_masks),
            up_potential: basis.up_masks.iter().map(|&m| onsite(m)).collect(),
            down_potential: basis.down_masks.iter().map(|&m| onsite(m)).collect(),
        })
    }

    pub fn dim(&self) -> usize {
        self.basis.dim()
    }

    /// `H v`; rows are computed independently, so the result does not
    /// depend on the worker count.
    pub fn apply(&self, v: &[f64]) -> Result<Vec<f64>> {
        let dim = self.dim();
        if v.len() != dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                got: v.len(),
            });
        }
        let dd = self.basis.dim_down();
        let u = self.spec.u();
        let mut out = vec![0.0; dim];
        out.par_chunks_mut(dd).enumerate().for_each(|(iu, row)| {
            let up = self.basis.up_masks[iu];
            let base = iu * dd;
            for (id, slot) in row.iter_mut().enumerate() {
                let down = self.basis.down_masks[id];
                let diag = u * (up & down).count_ones() as f64
                    + self.up_potential[iu]
                    + self.down_potential[id];
                let mut acc = diag * v[base + id];
                for &(ju, amp) in &self.up_hops[iu] {
                    acc += amp * v[ju * dd + id];
                }
                for &(jd, amp) in &self.down_hops[id] {
                    acc += amp * v[base + jd];
                }
                *slot = acc;
            }
        });
        Ok(out)
    }
}

/// `H v` for `spec` in `basis`.
pub fn apply_hamiltonian(spec: &ChainSpec, basis: &FockBasis, v: &[f64]) -> Result<Vec<f64>> {
    Hamiltonian::new(spec, basis)?.apply(v)
}

/// Dense Hamiltonian matrix, built element by element with explicit
/// Jordan-Wigner signs for the given mode ordering. Different orderings give
/// matrices related by a diagonal sign similarity.
pub fn dense_hamiltonian(
    spec: &ChainSpec,
    basis: &FockBasis,
    ordering: ModeOrdering,
) -> DMatrix<f64> {
    let dim = basis.dim();
    let sites = spec.sites();
    let mut h = DMatrix::zeros(dim, dim);
    for col in 0..dim {
        let (up, down) = basis.state(col);
        let mut diag = spec.u() * (up & down).count_ones() as f64;
        for s in 0..sites {
            let occ = (up >> s & 1) + (down >> s & 1);
            diag += spec.potential()[s] * occ as f64;
        }
        h[(col, col)] += diag;
        for spin in 0..2 {
            let mask = if spin == 0 { up } else { down };
            for from in 0..sites {
                if mask >> from & 1 == 0 {
                    continue;
                }
                for to in [from.wrapping_sub(1), from + 1] {
                    if to >= sites || mask >> to & 1 == 1 {
                        continue;
                    }
                    let sign = ordering.hop_sign(sites, up, down, spin, from, to);
                    let moved = mask ^ (1 << from) ^ (1 << to);
                    let (nu, nd) = if spin == 0 {
                        (moved, down)
                    } else {
                        (up, moved)
                    };
                    let row = basis.index(nu, nd).expect("hop stays in sector");
                    h[(row, col)] += -sign;
                }
            }
        }
    }
    h
}

/// Eigen-solver selection.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Solver {
    /// Dense for dimensions up to [`DENSE_LIMIT`], Lanczos above.
    Auto,
    Dense,
    Lanczos,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EdConfig {
    pub solver: Solver,
    pub max_dim: usize,
    /// Krylov vectors kept per restart cycle.
    pub krylov: usize,
    /// Residual norm `|H x - E x|` at which Lanczos stops.
    pub residual_tol: f64,
    pub max_restarts: usize,
}

impl Default for EdConfig {
    fn default() -> Self {
        Self {
            solver: Solver::Auto,
            max_dim: DEFAULT_MAX_DIM,
            krylov: 40,
            residual_tol: 1e-9,
            max_restarts: 500,
        }
    }
}

/// Lowest eigenpair.
#[derive(Debug, Clone)]
pub struct GroundState {
    pub energy: f64,
    pub amplitudes: Vec<f64>,
}

/// Ground state with the default configuration.
pub fn ground_state(spec: &ChainSpec) -> Result<(FockBasis, GroundState)> {
    ground_state_with(spec, &EdConfig::default())
}

pub fn ground_state_with(spec: &ChainSpec, cfg: &EdConfig) -> Result<(FockBasis, GroundState)> {
    let dim = FockBasis::dimension_of(spec.sites(), spec.n_up(), spec.n_down());
    if dim > cfg.max_dim {
        return Err(Error::Capacity {
            dim,
            cap: cfg.max_dim,
        });
    }
    let basis = FockBasis::for_spec(spec)?;
    let use_dense = match cfg.solver {
        Solver::Dense => true,
        Solver::Lanczos => false,
        Solver::Auto => dim <= DENSE_LIMIT,
    };
    let gs = if use_dense {
        dense_ground_state(spec, &basis)?
    } else {
        lanczos(&Hamiltonian::new(spec, &basis)?, cfg)?
    };
    Ok((basis, gs))
}

/// Full spectrum of the dense matrix, ascending.
pub fn dense_spectrum(spec: &ChainSpec, basis: &FockBasis) -> Vec<f64> {
    let h = dense_hamiltonian(spec, basis, ModeOrdering::SpinBlocks);
    let mut values: Vec<f64> = SymmetricEigen::new(h).eigenvalues.iter().copied().collect();
    values.sort_by(f64::total_cmp);
    values
}

fn dense_ground_state(spec: &ChainSpec, basis: &FockBasis) -> Result<GroundState> {
    let h = dense_hamiltonian(spec, basis, ModeOrdering::SpinBlocks);
    let eig = SymmetricEigen::new(h);
    let (k, &energy) = eig
        .eigenvalues
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.total_cmp(b.1))
        .ok_or_else(|| Error::numerical("dense diagonalization of an empty matrix", f64::NAN))?;
    let amplitudes = canonical_sign(eig.eigenvectors.column(k).iter().copied().collect());
    Ok(GroundState { energy, amplitudes })
}

// Fix the overall sign so the largest-magnitude amplitude is positive.
fn canonical_sign(mut v: Vec<f64>) -> Vec<f64> {
    let pivot = v.iter().copied().fold(
        0.0f64,
        |best, x| if x.abs() > best.abs() { x } else { best },
    );
    if pivot < 0.0 {
        v.iter_mut().for_each(|x| *x = -*x);
    }
    v
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    y.iter_mut().zip(x).for_each(|(yi, xi)| *yi += alpha * xi);
}

fn normalize(v: &mut [f64]) -> f64 {
    let norm = dot(v, v).sqrt();
    if norm > 0.0 {
        v.iter_mut().for_each(|x| *x /= norm);
    }
    norm
}

/// Restarted Lanczos with full reorthogonalization; each cycle restarts from
/// the current Ritz vector.
pub fn lanczos(h: &Hamiltonian<'_>, cfg: &EdConfig) -> Result<GroundState> {
    let dim = h.dim();
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
    let mut x: Vec<f64> = (0..dim).map(|_| rng.random::<f64>() - 0.5).collect();
    normalize(&mut x);
    if dim == 1 {
        let hx = h.apply(&x)?;
        return Ok(GroundState {
            energy: dot(&x, &hx),
            amplitudes: canonical_sign(x),
        });
    }
    let m = cfg.krylov.clamp(2, dim);
    let mut last_residual = f64::INFINITY;
    for _ in 0..cfg.max_restarts {
        let mut basis: Vec<Vec<f64>> = vec![x.clone()];
        let mut alphas = Vec::with_capacity(m);
        let mut betas: Vec<f64> = Vec::with_capacity(m);
        let mut ritz = (0.0, vec![1.0]);
        for j in 0..m {
            let mut w = h.apply(&basis[j])?;
            let alpha = dot(&basis[j], &w);
            alphas.push(alpha);
            axpy(-alpha, &basis[j], &mut w);
            if j > 0 {
                axpy(-betas[j - 1], &basis[j - 1], &mut w);
            }
            for _ in 0..2 {
                for v in &basis {
                    let c = dot(v, &w);
                    axpy(-c, v, &mut w);
                }
            }
            let beta = dot(&w, &w).sqrt();
            let eig = linalg::tridiagonal_eigen(&alphas, &betas)?;
            let s = eig.vector(0).to_vec();
            let residual = beta * s.last().copied().unwrap_or(0.0).abs();
            ritz = (eig.values[0], s);
            if residual < cfg.residual_tol || beta < 1e-14 || j + 1 == m || basis.len() == dim {
                break;
            }
            betas.push(beta);
            w.iter_mut().for_each(|x| *x /= beta);
            basis.push(w);
        }
        let mut next = vec![0.0; dim];
        for (coef, v) in ritz.1.iter().zip(&basis) {
            axpy(*coef, v, &mut next);
        }
        normalize(&mut next);
        x = next;
        let hx = h.apply(&x)?;
        let energy = dot(&x, &hx);
        let residual = hx
            .iter()
            .zip(&x)
            .map(|(a, b)| (a - energy * b).powi(2))
            .sum::<f64>()
            .sqrt();
        last_residual = residual;
        if residual < cfg.residual_tol {
            return Ok(GroundState {
                energy,
                amplitudes: canonical_sign(x),
            });
        }
    }
    Err(Error::numerical("Lanczos ground state", last_residual))
}

/// Occupation probabilities of `site` (0-based) in the ground state.
pub fn site_probabilities(
    gs: &GroundState,
    basis: &FockBasis,
    site: usize,
) -> Result<OccupationProbabilities> {
    if site >= basis.sites {
        return Err(Error::InvalidSpec(format!(
            "site {} outside a chain of {} sites",
            site + 1,
            basis.sites
        )));
    }
    if gs.amplitudes.len() != basis.dim() {
        return Err(Error::DimensionMismatch {
            expected: basis.dim(),
            got: gs.amplitudes.len(),
        });
    }
    let mut w = [0.0; 4];
    let dd = basis.dim_down();
    for (iu, &up) in basis.up_masks.iter().enumerate() {
        let u_occ = (up >> site & 1) as usize;
        for (id, &down) in basis.down_masks.iter().enumerate() {
            let d_occ = (down >> site & 1) as usize;
            let a = gs.amplitudes[iu * dd + id];
            let slot = match (u_occ, d_occ) {
                (1, 0) => 0,
                (0, 1) => 1,
                (1, 1) => 2,
                _ => 3,
            };
            w[slot] += a * a;
        }
    }
    let total: f64 = w.iter().sum();
    let w = w.map(|x| x / total);
    OccupationProbabilities::new(w[0], w[1], w[2], w[3])
}

/// Probabilities of every site.
pub fn all_site_probabilities(
    gs: &GroundState,
    basis: &FockBasis,
) -> Result<Vec<OccupationProbabilities>> {
    (0..basis.sites)
        .map(|i| site_probabilities(gs, basis, i))
        .collect()
}

/// Site densities `n_i = w_up + w_down + 2 w_double`.
pub fn density_profile(gs: &GroundState, basis: &FockBasis) -> Result<Vec<f64>> {
    Ok(all_site_probabilities(gs, basis)?
        .iter()
        .map(OccupationProbabilities::density)
        .collect())
}

/// Site-averaged `(S, L)` of the ground state.
pub fn averaged_entropies(gs: &GroundState, basis: &FockBasis) -> Result<(f64, f64)> {
    let probs = all_site_probabilities(gs, basis)?;
    let n = probs.len() as f64;
    let s = probs.iter().map(entropy::von_neumann).sum::<f64>() / n;
    let l = probs.iter().map(entropy::linear).sum::<f64>() / n;
    Ok((s, l))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::Rng;

    fn spec(sites: usize, per_spin: usize, u: f64, potential: Vec<f64>) -> ChainSpec {
        ChainSpec::new(sites, per_spin, u, potential).unwrap()
    }

    fn lanczos_cfg() -> EdConfig {
        EdConfig {
            solver: Solver::Lanczos,
            residual_tol: 1e-11,
            ..EdConfig::default()
        }
    }

    // Open-chain single-particle energies -2 cos(k pi / (L + 1)).
    fn free_fermion_energy(sites: usize, n_up: usize, n_down: usize) -> f64 {
        let mut levels: Vec<f64> = (1..=sites)
            .map(|k| -2.0 * (k as f64 * std::f64::consts::PI / (sites as f64 + 1.0)).cos())
            .collect();
        levels.sort_by(f64::total_cmp);
        levels[..n_up].iter().sum::<f64>() + levels[..n_down].iter().sum::<f64>()
    }

    #[test]
    fn basis_ranks_invert_enumeration() {
        let b = FockBasis::new(7, 3, 2).unwrap();
        assert_eq!(b.dim(), 35 * 21);
        for (k, &m) in b.up_masks().iter().enumerate() {
            assert_eq!(m.count_ones(), 3);
            assert_eq!(b.rank(m), k);
        }
        assert!(b.up_masks().windows(2).all(|w| w[0] < w[1]));
        for idx in 0..b.dim() {
            let (u, d) = b.state(idx);
            assert_eq!(b.index(u, d), Some(idx));
        }
        assert_eq!(b.index(0b1, 0b11), None);
        assert_eq!(b.index(0b1000_0000_0011, 0b11), None);
    }

    #[test]
    fn dimer_bonding_energy() {
        let (_, gs) = ground_state(&spec(2, 1, 0.0, vec![0.0; 2])).unwrap();
        assert!((gs.energy + 2.0).abs() < 1e-12);
    }

    #[test]
    fn dimer_probabilities_limits() {
        let s = spec(2, 1, 0.0, vec![0.0; 2]);
        let (b, gs) = ground_state(&s).unwrap();
        for site in 0..2 {
            let p = site_probabilities(&gs, &b, site).unwrap();
            for w in p.as_array() {
                assert!((w - 0.25).abs() < 1e-12);
            }
            assert!((entropy::von_neumann(&p) - 1.0).abs() < 1e-12);
        }
        let (b, gs) = ground_state(&s.with_u(100.0).unwrap()).unwrap();
        let p = site_probabilities(&gs, &b, 0).unwrap();
        assert!(p.double < 0.01);
        assert!((entropy::von_neumann(&p) - 0.5).abs() < 0.02);
    }

    #[test]
    fn dimer_at_u4_matches_closed_form() {
        // E0 = (U - sqrt(U^2 + 16)) / 2 for t = 1
        let s = spec(2, 1, 4.0, vec![0.0; 2]);
        let exact = (4.0 - (16.0f64 + 16.0).sqrt()) / 2.0;
        let basis = FockBasis::for_spec(&s).unwrap();
        let dense = dense_spectrum(&s, &basis)[0];
        assert!((dense - exact).abs() < 1e-12);
        let h = Hamiltonian::new(&s, &basis).unwrap();
        let gs = lanczos(&h, &lanczos_cfg()).unwrap();
        assert!((gs.energy - dense).abs() < 1e-10);
    }

    #[test]
    fn doubly_occupied_diagonal() {
        let v = vec![0.3, -1.1, 0.7];
        let s = spec(3, 1, 5.0, v.clone());
        let b = FockBasis::for_spec(&s).unwrap();
        let h = dense_hamiltonian(&s, &b, ModeOrdering::SpinBlocks);
        for site in 0..3 {
            let idx = b.index(1 << site, 1 << site).unwrap();
            assert!((h[(idx, idx)] - (5.0 + 2.0 * v[site])).abs() < 1e-14);
        }
    }

    #[test]
    fn free_fermion_sums() {
        let e = ground_state(&spec(4, 2, 0.0, vec![0.0; 4]))
            .unwrap()
            .1
            .energy;
        let pi = std::f64::consts::PI;
        let expected = 2.0 * (-2.0 * (pi / 5.0).cos() - 2.0 * (2.0 * pi / 5.0).cos());
        assert!((e - expected).abs() < 1e-12);
        for (sites, n) in [(6, 2), (8, 4), (10, 3), (10, 5)] {
            let s = spec(sites, n, 0.0, vec![0.0; sites]);
            let basis = FockBasis::for_spec(&s).unwrap();
            let gs = lanczos(&Hamiltonian::new(&s, &basis).unwrap(), &lanczos_cfg()).unwrap();
            let exact = free_fermion_energy(sites, n, n);
            assert!(
                (gs.energy - exact).abs() < 1e-9,
                "L={sites}: {} vs {exact}",
                gs.energy
            );
        }
    }

    #[test]
    fn matrix_free_matches_dense() {
        let s = spec(5, 2, 3.0, vec![0.5, -0.2, 0.0, 1.0, -0.7]);
        let b = FockBasis::for_spec(&s).unwrap();
        let h = dense_hamiltonian(&s, &b, ModeOrdering::SpinBlocks);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let v: Vec<f64> = (0..b.dim()).map(|_| rng.random::<f64>() - 0.5).collect();
        let hv = apply_hamiltonian(&s, &b, &v).unwrap();
        let dense = &h * nalgebra::DVector::from_column_slice(&v);
        for (a, d) in hv.iter().zip(dense.iter()) {
            assert!((a - d).abs() < 1e-12);
        }
        assert!(matches!(
            apply_hamiltonian(&s, &b, &v[1..]),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn hermitian() {
        let s = spec(6, 3, 2.5, vec![0.1, 0.0, -0.4, 0.3, 0.0, 0.2]);
        let b = FockBasis::for_spec(&s).unwrap();
        let h = Hamiltonian::new(&s, &b).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..100 {
            let x: Vec<f64> = (0..b.dim()).map(|_| rng.random::<f64>() - 0.5).collect();
            let y: Vec<f64> = (0..b.dim()).map(|_| rng.random::<f64>() - 0.5).collect();
            let lhs = dot(&x, &h.apply(&y).unwrap());
            let rhs = dot(&h.apply(&x).unwrap(), &y);
            assert!((lhs - rhs).abs() < 1e-12);
        }
    }

    #[test]
    fn orderings_share_a_spectrum() {
        let s = spec(5, 2, 4.0, vec![0.2, -0.3, 0.0, 0.6, 0.1]);
        let b = FockBasis::for_spec(&s).unwrap();
        let spectrum = |o| {
            let mut v: Vec<f64> = SymmetricEigen::new(dense_hamiltonian(&s, &b, o))
                .eigenvalues
                .iter()
                .copied()
                .collect();
            v.sort_by(f64::total_cmp);
            v
        };
        let a = spectrum(ModeOrdering::SpinBlocks);
        let c = spectrum(ModeOrdering::Interleaved);
        for (x, y) in a.iter().zip(&c) {
            assert!((x - y).abs() < 1e-10);
        }
    }

    #[test]
    fn lanczos_agrees_with_dense() {
        for (sites, n, u) in [(6, 3, 4.0), (7, 2, 1.0), (8, 3, 8.0)] {
            let v: Vec<f64> = (0..sites)
                .map(|i| 0.3 * ((i * 7 % 5) as f64 - 2.0))
                .collect();
            let s = spec(sites, n, u, v);
            let (b, dense) = ground_state_with(
                &s,
                &EdConfig {
                    solver: Solver::Dense,
                    ..EdConfig::default()
                },
            )
            .unwrap();
            let gs = lanczos(&Hamiltonian::new(&s, &b).unwrap(), &lanczos_cfg()).unwrap();
            assert!((gs.energy - dense.energy).abs() < 1e-10);
            for site in 0..sites {
                let p = site_probabilities(&gs, &b, site).unwrap().as_array();
                let q = site_probabilities(&dense, &b, site).unwrap().as_array();
                for (x, y) in p.iter().zip(&q) {
                    assert!((x - y).abs() < 1e-8);
                }
            }
        }
    }

    #[test]
    fn mirror_symmetric_probabilities() {
        let s = spec(8, 3, 3.0, vec![0.0; 8]);
        let (b, gs) = ground_state(&s).unwrap();
        for i in 0..4 {
            let p = site_probabilities(&gs, &b, i).unwrap().as_array();
            let q = site_probabilities(&gs, &b, 7 - i).unwrap().as_array();
            for (x, y) in p.iter().zip(&q) {
                assert!((x - y).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn densities_conserve_particles() {
        let s = spec(2, 1, 2.0, vec![0.0; 2]);
        let (b, gs) = ground_state(&s).unwrap();
        let n = density_profile(&gs, &b).unwrap();
        assert!((n[0] - 1.0).abs() < 1e-12 && (n[1] - 1.0).abs() < 1e-12);
        let s = spec(7, 2, 1.5, vec![0.4, 0.0, -0.3, 0.0, 0.9, 0.0, 0.1]);
        let (b, gs) = ground_state(&s).unwrap();
        let total: f64 = density_profile(&gs, &b).unwrap().iter().sum();
        assert!((total - 4.0).abs() < 1e-10);
    }

    #[test]
    fn repulsive_superlattice_sites_deplete() {
        let v = crate::chain::build_potential(
            &crate::chain::PotentialSpec::Superlattice {
                impurity_sites: 2,
                clean_sites: 7,
                strength: 2.0,
            },
            9,
        )
        .unwrap();
        let s = spec(9, 3, 2.0, v);
        let (b, gs) = ground_state(&s).unwrap();
        let n = density_profile(&gs, &b).unwrap();
        let clean = n[2..].iter().sum::<f64>() / 7.0;
        assert!(n[0] < clean && n[1] < clean, "{n:?}");
    }

    #[test]
    fn energy_grows_with_u() {
        let s = spec(6, 2, 0.0, vec![0.0; 6]);
        let mut prev = f64::NEG_INFINITY;
        for u in [0.0, 0.5, 1.0, 2.0, 4.0, 8.0] {
            let e = ground_state(&s.with_u(u).unwrap()).unwrap().1.energy;
            assert!(e >= prev - 1e-12);
            prev = e;
        }
    }

    #[test]
    fn capacity_is_enforced() {
        let s = spec(16, 8, 1.0, vec![0.0; 16]);
        let cfg = EdConfig {
            max_dim: 1000,
            ..EdConfig::default()
        };
        match ground_state_with(&s, &cfg) {
            Err(Error::Capacity { dim, cap }) => {
                assert_eq!(dim, 12870 * 12870);
                assert_eq!(cap, 1000);
            }
            other => panic!("expected capacity error, got {other:?}"),
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]

        #[test]
        fn ground_state_is_normalized_and_variational(
            sites in 2usize..6,
            u in 0.0f64..8.0,
            seed in any::<u64>(),
        ) {
            let per_spin = sites / 2;
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let v: Vec<f64> = (0..sites).map(|_| rng.random::<f64>() - 0.5).collect();
            let s = spec(sites, per_spin, u, v);
            let (b, gs) = ground_state(&s).unwrap();
            let norm: f64 = gs.amplitudes.iter().map(|a| a * a).sum();
            prop_assert!((norm - 1.0).abs() < 1e-12);
            let h = Hamiltonian::new(&s, &b).unwrap();
            for _ in 0..5 {
                let x: Vec<f64> = (0..b.dim()).map(|_| rng.random::<f64>() - 0.5).collect();
                let q = dot(&x, &h.apply(&x).unwrap()) / dot(&x, &x);
                prop_assert!(gs.energy <= q + 1e-12);
            }
            for p in all_site_probabilities(&gs, &b).unwrap() {
                prop_assert!((p.as_array().iter().sum::<f64>() - 1.0).abs() < 1e-12);
            }
        }
    }
}
