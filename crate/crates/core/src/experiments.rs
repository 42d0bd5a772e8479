//! Parameter sets and table builders for the reproducible scans.
//!
//! Every command is a pure function from its parameters to a [`Table`]. The
//! CSV rendering starts with the column header, then one `#` line holding the
//! parameters and version as JSON. Numbers are written in scientific notation
//! with 12 significant digits.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::chain::{build_potential, ChainSpec, PotentialSpec};
use crate::ed::{self, EdConfig};
use crate::entropy::{self, minimal_monotone_order_of, MAX_TAYLOR_ORDER};
use crate::error::{Error, Result};
use crate::fvc::{EntropyFunctional, MIN_DERIVATIVE_U};
use crate::kslda::{self, EnsembleSpec, ScfConfig};

pub const VERSION: &str = concat!("hubent ", env!("CARGO_PKG_VERSION"));

#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    Num(f64),
    Int(i64),
    Text(String),
    Empty,
}

impl Cell {
    fn render(&self) -> String {
        match self {
            Cell::Num(x) => format!("{x:.11e}"),
            Cell::Int(k) => k.to_string(),
            Cell::Text(s) => s.clone(),
            Cell::Empty => String::new(),
        }
    }

    pub fn as_f64(&self) -> Option<f64> {
        match self {
            Cell::Num(x) => Some(*x),
            Cell::Int(k) => Some(*k as f64),
            _ => None,
        }
    }
}

impl From<f64> for Cell {
    fn from(x: f64) -> Self {
        Cell::Num(x)
    }
}

impl From<usize> for Cell {
    fn from(k: usize) -> Self {
        Cell::Int(k as i64)
    }
}

impl From<&str> for Cell {
    fn from(s: &str) -> Self {
        Cell::Text(s.to_string())
    }
}

impl From<Option<f64>> for Cell {
    fn from(x: Option<f64>) -> Self {
        x.map_or(Cell::Empty, Cell::Num)
    }
}

#[derive(Debug, Clone)]
pub struct Table {
    pub columns: Vec<&'static str>,
    pub rows: Vec<Vec<Cell>>,
    /// Parameters, seed, version and any command-specific notes.
    pub meta: serde_json::Value,
    /// Non-fatal notes for the user (skipped points and the like).
    pub warnings: Vec<String>,
}

impl Table {
    fn new(
        command: &str,
        columns: Vec<&'static str>,
        params: &impl Serialize,
        seed: Option<u64>,
    ) -> Self {
        Self {
            columns,
            rows: Vec::new(),
            meta: json!({
                "command": command,
                "params": params,
                "seed": seed,
                "version": VERSION,
            }),
            warnings: Vec::new(),
        }
    }

    pub fn to_csv(&self) -> String {
        let mut out = self.columns.join(",");
        out.push('\n');
        out.push_str("# ");
        out.push_str(&self.meta.to_string());
        out.push('\n');
        for row in &self.rows {
            let line: Vec<String> = row.iter().map(Cell::render).collect();
            out.push_str(&line.join(","));
            out.push('\n');
        }
        out
    }

    /// Numeric column by name, `None` for empty cells.
    pub fn column(&self, name: &str) -> Option<Vec<Option<f64>>> {
        let k = self.columns.iter().position(|c| *c == name)?;
        Some(self.rows.iter().map(|r| r[k].as_f64()).collect())
    }
}

/// `start, start + step, ..., stop` with the count rounded to the nearest
/// integer so floating steps land on `stop`.
pub fn linspace_step(start: f64, stop: f64, step: f64) -> Vec<f64> {
    let count = ((stop - start) / step).round() as usize;
    (0..=count).map(|k| start + k as f64 * step).collect()
}

fn check_grid(name: &str, grid: &[f64]) -> Result<()> {
    if grid.is_empty() {
        return Err(Error::InvalidSpec(format!("{name} is empty")));
    }
    if grid.iter().any(|x| !x.is_finite()) {
        return Err(Error::InvalidSpec(format!("{name} has non-finite entries")));
    }
    if grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidSpec(format!(
            "{name} must be strictly increasing"
        )));
    }
    Ok(())
}

fn check_u_floor(name: &str, grid: &[f64]) -> Result<()> {
    check_grid(name, grid)?;
    if let Some(u) = grid.iter().find(|&&u| u < MIN_DERIVATIVE_U) {
        return Err(Error::InvalidSpec(format!(
            "{name} contains U = {u}; values must be >= {MIN_DERIVATIVE_U}"
        )));
    }
    Ok(())
}

fn check_densities(name: &str, grid: &[f64], max: f64) -> Result<()> {
    check_grid(name, grid)?;
    if let Some(n) = grid.iter().find(|&&n| !(n > 0.0 && n <= max)) {
        return Err(Error::InvalidSpec(format!(
            "{name} contains n = {n}; values must lie in (0, {max}]"
        )));
    }
    Ok(())
}

fn default_u_list() -> Vec<f64> {
    vec![0.2, 1.0, 4.0, 8.0]
}

fn default_n_grid() -> Vec<f64> {
    linspace_step(0.02, 1.0, 0.02)
}

/// `U = 0.2, 0.4, ..., 10`.
pub fn fine_u_grid() -> Vec<f64> {
    linspace_step(0.2, 10.0, 0.2)
}

/// `U` grid of the disorder scans.
pub fn coarse_u_grid() -> Vec<f64> {
    vec![
        0.2, 0.5, 1.0, 1.5, 2.0, 2.5, 3.0, 4.0, 5.0, 6.0, 7.0, 8.0, 9.0, 10.0,
    ]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Fig2Params {
    pub u_list: Vec<f64>,
    pub n_grid: Vec<f64>,
}

impl Default for Fig2Params {
    fn default() -> Self {
        Self {
            u_list: default_u_list(),
            n_grid: default_n_grid(),
        }
    }
}

/// Homogeneous `S(n)` and `L(n)` for several `U`.
pub fn fig2(p: &Fig2Params) -> Result<Table> {
    check_u_floor("u_list", &p.u_list)?;
    check_densities("n_grid", &p.n_grid, 1.0)?;
    let mut table = Table::new("fig2", vec!["n", "U", "S", "L"], p, None);
    for &u in &p.u_list {
        let f = EntropyFunctional::new(u)?;
        for &n in &p.n_grid {
            let (s, l) = f.entropies(n)?;
            table
                .rows
                .push(vec![n.into(), u.into(), s.into(), l.into()]);
        }
    }
    Ok(table)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Fig3Params {
    pub n_list: Vec<f64>,
    pub u_grid: Vec<f64>,
    pub ed_sites: usize,
    pub ed_max_dim: usize,
}

impl Default for Fig3Params {
    fn default() -> Self {
        Self {
            n_list: vec![0.25, 0.5, 1.0],
            u_grid: fine_u_grid(),
            ed_sites: 8,
            ed_max_dim: ed::DEFAULT_MAX_DIM,
        }
    }
}

/// Spin-balanced particles per spin for density `n` on `sites`, if the
/// filling is realizable.
pub fn commensurate_per_spin(n: f64, sites: usize) -> Option<usize> {
    let total = n * sites as f64;
    let rounded = total.round();
    if (total - rounded).abs() > 1e-9 || rounded as usize % 2 != 0 {
        return None;
    }
    Some(rounded as usize / 2)
}

/// `S` and `L` versus `U` from the functional, with exact small-chain
/// site averages alongside where the density fits the chain.
pub fn fig3(p: &Fig3Params) -> Result<Table> {
    check_densities("n_list", &p.n_list, 1.0)?;
    check_u_floor("u_grid", &p.u_grid)?;
    if p.ed_sites == 0 {
        return Err(Error::InvalidSpec("ed_sites must be positive".into()));
    }
    let mut table = Table::new(
        "fig3",
        vec!["n", "U", "S_fvc", "L_fvc", "S_ed", "L_ed"],
        p,
        None,
    );
    let cfg = EdConfig {
        max_dim: p.ed_max_dim,
        ..EdConfig::default()
    };
    let mut skipped = Vec::new();
    for &n in &p.n_list {
        let per_spin = commensurate_per_spin(n, p.ed_sites);
        if per_spin.is_none() {
            skipped.push(n);
            table.warnings.push(format!(
                "n = {n} is not a spin-balanced filling of {} sites; exact columns left empty",
                p.ed_sites
            ));
        }
        for &u in &p.u_grid {
            let (s, l) = EntropyFunctional::new(u)?.entropies(n)?;
            let (s_ed, l_ed) = match per_spin {
                Some(k) => {
                    let spec = ChainSpec::clean(p.ed_sites, k, u)?;
                    let (basis, gs) = ed::ground_state_with(&spec, &cfg)?;
                    let (a, b) = ed::averaged_entropies(&gs, &basis)?;
                    (Some(a), Some(b))
                }
                None => (None, None),
            };
            table.rows.push(vec![
                n.into(),
                u.into(),
                s.into(),
                l.into(),
                s_ed.into(),
                l_ed.into(),
            ]);
        }
    }
    table.meta["ed_skipped"] = json!(skipped);
    Ok(table)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Fig4Params {
    pub u_list: Vec<f64>,
    pub n_grid: Vec<f64>,
}

impl Default for Fig4Params {
    fn default() -> Self {
        Self {
            u_list: default_u_list(),
            n_grid: default_n_grid(),
        }
    }
}

/// Double occupancy `w2(n)` for several `U`.
pub fn fig4(p: &Fig4Params) -> Result<Table> {
    check_u_floor("u_list", &p.u_list)?;
    check_densities("n_grid", &p.n_grid, 1.0)?;
    let mut table = Table::new("fig4", vec!["n", "U", "w2"], p, None);
    for &u in &p.u_list {
        let f = EntropyFunctional::new(u)?;
        for &n in &p.n_grid {
            table
                .rows
                .push(vec![n.into(), u.into(), f.double_occupancy(n)?.into()]);
        }
    }
    Ok(table)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Fig5Params {
    pub n_list: Vec<f64>,
    pub u_grid: Vec<f64>,
    pub orders: Vec<usize>,
}

impl Default for Fig5Params {
    fn default() -> Self {
        Self {
            n_list: vec![0.5, 0.2],
            u_grid: fine_u_grid(),
            orders: (1..=30).collect(),
        }
    }
}

/// Taylor truncations `S_l` versus `U`. After the data rows of each
/// density comes one summary row `n,,l_min,` holding the smallest order whose
/// values are non-increasing in `U`.
pub fn fig5(p: &Fig5Params) -> Result<Table> {
    if p.n_list.is_empty() {
        return Err(Error::InvalidSpec("n_list is empty".into()));
    }
    if let Some(n) = p.n_list.iter().find(|&&n| !(n > 0.0 && n <= 2.0)) {
        return Err(Error::InvalidSpec(format!(
            "n_list contains n = {n} outside (0, 2]"
        )));
    }
    check_u_floor("u_grid", &p.u_grid)?;
    if p.orders.is_empty()
        || p.orders.windows(2).any(|w| w[1] <= w[0])
        || p.orders[0] == 0
        || *p.orders.last().unwrap() > MAX_TAYLOR_ORDER
    {
        return Err(Error::InvalidSpec(format!(
            "orders must be strictly increasing within 1..={MAX_TAYLOR_ORDER}"
        )));
    }
    let mut table = Table::new("fig5", vec!["n", "U", "l", "S_l"], p, None);
    for &n in &p.n_list {
        let probs: Vec<_> = p
            .u_grid
            .iter()
            .map(|&u| EntropyFunctional::new(u)?.probabilities(n))
            .collect::<Result<_>>()?;
        for (&u, prob) in p.u_grid.iter().zip(&probs) {
            for &l in &p.orders {
                let s = entropy::taylor_entropy(prob, l)?;
                table
                    .rows
                    .push(vec![n.into(), u.into(), l.into(), s.into()]);
            }
        }
        let best = minimal_monotone_order_of(&probs)?;
        table
            .rows
            .push(vec![n.into(), Cell::Empty, best.into(), Cell::Empty]);
    }
    Ok(table)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Fig6Params {
    pub n_list: Vec<f64>,
    pub u_grid: Vec<f64>,
    pub concentration: f64,
    pub v_list: Vec<f64>,
    pub sites: usize,
    pub samples: usize,
    pub master_seed: u64,
    pub scf: ScfConfig,
}

impl Default for Fig6Params {
    fn default() -> Self {
        Self {
            n_list: vec![0.4, 0.6, 0.8],
            u_grid: coarse_u_grid(),
            concentration: 0.4,
            v_list: vec![-1.0, -3.0],
            sites: 100,
            samples: 100,
            master_seed: 0,
            scf: ScfConfig::default(),
        }
    }
}

/// Disorder-averaged LDA entropies versus `U`.
pub fn fig6(p: &Fig6Params) -> Result<Table> {
    check_u_floor("u_grid", &p.u_grid)?;
    check_densities("n_list", &p.n_list, 2.0)?;
    if p.v_list.is_empty() || p.v_list.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidSpec(
            "v_list must be non-empty and finite".into(),
        ));
    }
    p.scf.validate()?;
    let mut table = Table::new(
        "fig6",
        vec!["n", "U", "V", "S_mean", "S_std", "L_mean", "L_std"],
        p,
        Some(p.master_seed),
    );
    for &v in &p.v_list {
        for &n in &p.n_list {
            let particles = commensurate_per_spin(n, p.sites).ok_or_else(|| {
                Error::InvalidSpec(format!(
                    "n = {n} is not a spin-balanced filling of {} sites",
                    p.sites
                ))
            })? * 2;
            for &u in &p.u_grid {
                let spec = EnsembleSpec {
                    sites: p.sites,
                    particles,
                    u,
                    concentration: p.concentration,
                    strength: v,
                    samples: p.samples,
                    master_seed: p.master_seed,
                };
                let r = kslda::disorder_ensemble(&spec, &p.scf)?;
                let stats = r.ensemble.expect("ensembles carry statistics");
                table.rows.push(vec![
                    n.into(),
                    u.into(),
                    v.into(),
                    r.s_avg.into(),
                    stats.s_std.into(),
                    r.l_avg.into(),
                    stats.l_std.into(),
                ]);
            }
        }
    }
    Ok(table)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Backend {
    Ed,
    Lda,
}

impl Backend {
    pub fn name(self) -> &'static str {
        match self {
            Backend::Ed => "ed",
            Backend::Lda => "lda",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SuperlatticeParams {
    /// `(X, Y)`: `X` impurity sites followed by `Y` clean sites per cell.
    pub structures: Vec<(usize, usize)>,
    pub v_list: Vec<f64>,
    pub sites: usize,
    pub per_spin: usize,
    pub u_grid: Vec<f64>,
    pub backend: Backend,
    pub ed_max_dim: usize,
    pub scf: ScfConfig,
}

impl Default for SuperlatticeParams {
    fn default() -> Self {
        Self {
            structures: vec![(2, 7), (3, 6), (4, 5)],
            v_list: vec![1.0, 2.0, 4.0, 6.0],
            sites: 36,
            per_spin: 10,
            u_grid: coarse_u_grid(),
            backend: Backend::Lda,
            ed_max_dim: ed::DEFAULT_MAX_DIM,
            scf: ScfConfig::default(),
        }
    }
}

fn superlattice_point(
    p: &SuperlatticeParams,
    x: usize,
    y: usize,
    v: f64,
    u: f64,
) -> Result<(f64, f64)> {
    let potential = build_potential(
        &PotentialSpec::Superlattice {
            impurity_sites: x,
            clean_sites: y,
            strength: v,
        },
        p.sites,
    )?;
    let spec = ChainSpec::new(p.sites, p.per_spin, u, potential)?;
    match p.backend {
        Backend::Ed => {
            let cfg = EdConfig {
                max_dim: p.ed_max_dim,
                ..EdConfig::default()
            };
            let (basis, gs) = ed::ground_state_with(&spec, &cfg)?;
            ed::averaged_entropies(&gs, &basis)
        }
        Backend::Lda => {
            let sol = kslda::solve_scf(&spec, &p.scf)?;
            let r = kslda::lda_entropies(&sol.profile, u)?;
            Ok((r.s_avg, r.l_avg))
        }
    }
}

/// Site-averaged entropies of periodic superlattices versus `U`.
pub fn superlattice(p: &SuperlatticeParams) -> Result<Table> {
    if p.structures.is_empty() || p.structures.iter().any(|&(x, y)| x + y == 0) {
        return Err(Error::InvalidSpec(
            "structures must be non-empty cells".into(),
        ));
    }
    if p.v_list.is_empty() || p.v_list.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidSpec(
            "v_list must be non-empty and finite".into(),
        ));
    }
    match p.backend {
        Backend::Lda => {
            check_u_floor("u_grid", &p.u_grid)?;
            p.scf.validate()?;
        }
        Backend::Ed => {
            check_grid("u_grid", &p.u_grid)?;
            if p.u_grid[0] < 0.0 {
                return Err(Error::InvalidSpec("u_grid must be non-negative".into()));
            }
            let dim = ed::FockBasis::dimension_of(p.sites, p.per_spin, p.per_spin);
            if dim > p.ed_max_dim {
                return Err(Error::Capacity {
                    dim,
                    cap: p.ed_max_dim,
                });
            }
        }
    }
    ChainSpec::clean(p.sites, p.per_spin, p.u_grid[0])?;
    let mut points = Vec::new();
    for &(x, y) in &p.structures {
        for &v in &p.v_list {
            for &u in &p.u_grid {
                points.push((x, y, v, u));
            }
        }
    }
    let values: Vec<Result<(f64, f64)>> = points
        .par_iter()
        .map(|&(x, y, v, u)| superlattice_point(p, x, y, v, u))
        .collect();
    let mut table = Table::new(
        "superlattice",
        vec!["X", "Y", "V", "U", "S", "L", "backend"],
        p,
        None,
    );
    table.meta["scale"] = json!({
        "sites": p.sites,
        "per_spin": p.per_spin,
        "backend": p.backend.name(),
    });
    for (&(x, y, v, u), value) in points.iter().zip(values) {
        let (s, l) = value?;
        table.rows.push(vec![
            x.into(),
            y.into(),
            v.into(),
            u.into(),
            s.into(),
            l.into(),
            p.backend.name().into(),
        ]);
    }
    Ok(table)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvalParams {
    pub n: f64,
    pub u: f64,
}

/// One homogeneous point: `S`, `L` and `w2`.
pub fn eval(p: &EvalParams) -> Result<Table> {
    let f = EntropyFunctional::new(p.u)?;
    let w2 = f.double_occupancy(p.n)?;
    let (s, l) = f.entropies(p.n)?;
    let mut table = Table::new("eval", vec!["n", "U", "S", "L", "w2"], p, None);
    table
        .rows
        .push(vec![p.n.into(), p.u.into(), s.into(), l.into(), w2.into()]);
    Ok(table)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EdParams {
    pub sites: usize,
    pub per_spin: usize,
    pub u: f64,
    pub potential: PotentialSpec,
    pub max_dim: usize,
}

impl Default for EdParams {
    fn default() -> Self {
        Self {
            sites: 8,
            per_spin: 4,
            u: 4.0,
            potential: PotentialSpec::Homogeneous,
            max_dim: ed::DEFAULT_MAX_DIM,
        }
    }
}

/// Exact ground state of one chain: per-site occupations and entropies,
/// with the energy in the comment line.
pub fn ed_report(p: &EdParams) -> Result<Table> {
    let spec = ChainSpec::with_potential(p.sites, p.per_spin, p.u, &p.potential)?;
    let cfg = EdConfig {
        max_dim: p.max_dim,
        ..EdConfig::default()
    };
    let (basis, gs) = ed::ground_state_with(&spec, &cfg)?;
    let mut table = Table::new(
        "ed",
        vec![
            "site", "V", "n", "w_up", "w_down", "w_double", "w_empty", "S", "L",
        ],
        p,
        None,
    );
    table.meta["energy"] = json!(gs.energy);
    table.meta["dimension"] = json!(basis.dim());
    for (i, prob) in ed::all_site_probabilities(&gs, &basis)?.iter().enumerate() {
        table.rows.push(vec![
            (i + 1).into(),
            spec.potential()[i].into(),
            prob.density().into(),
            prob.up.into(),
            prob.down.into(),
            prob.double.into(),
            prob.empty.into(),
            entropy::von_neumann(prob).into(),
            entropy::linear(prob).into(),
        ]);
    }
    Ok(table)
}
