use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use hubent::experiments::{
    self, Backend, EdParams, EvalParams, Fig2Params, Fig3Params, Fig4Params, Fig5Params,
    Fig6Params, SuperlatticeParams, Table,
};
use hubent::Error;
use serde::de::DeserializeOwned;

const WORKERS_VAR: &str = "HUBENT_WORKERS";

#[derive(Parser)]
#[command(
    name = "hubent",
    version,
    about = "Single-site entanglement of Hubbard chains, written as CSV"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Io {
    /// JSON file with the command parameters; flags override its values
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output CSV path (stdout when absent)
    #[arg(long, short, global = true)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Homogeneous S(n) and L(n) for several U
    Fig2 {
        #[command(flatten)]
        io: Io,
        #[arg(long, value_delimiter = ',')]
        u_list: Option<Vec<f64>>,
        #[arg(long, value_delimiter = ',')]
        n_grid: Option<Vec<f64>>,
    },
    /// S and L versus U at fixed densities, with exact-diagonalization points
    Fig3 {
        #[command(flatten)]
        io: Io,
        #[arg(long, value_delimiter = ',')]
        n_list: Option<Vec<f64>>,
        #[arg(long, value_delimiter = ',')]
        u_grid: Option<Vec<f64>>,
        #[arg(long)]
        ed_sites: Option<usize>,
        #[arg(long)]
        ed_max_dim: Option<usize>,
    },
    /// Double occupancy w2(n) for several U
    Fig4 {
        #[command(flatten)]
        io: Io,
        #[arg(long, value_delimiter = ',')]
        u_list: Option<Vec<f64>>,
        #[arg(long, value_delimiter = ',')]
        n_grid: Option<Vec<f64>>,
    },
    /// Taylor truncations of S versus U and the smallest monotone order
    Fig5 {
        #[command(flatten)]
        io: Io,
        #[arg(long, value_delimiter = ',')]
        n_list: Option<Vec<f64>>,
        #[arg(long, value_delimiter = ',')]
        u_grid: Option<Vec<f64>>,
        #[arg(long, value_delimiter = ',')]
        orders: Option<Vec<usize>>,
    },
    /// Disorder-averaged LDA entropies versus U
    Fig6 {
        #[command(flatten)]
        io: Io,
        #[arg(long, value_delimiter = ',')]
        n_list: Option<Vec<f64>>,
        #[arg(long, value_delimiter = ',')]
        u_grid: Option<Vec<f64>>,
        #[arg(long)]
        concentration: Option<f64>,
        #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
        v_list: Option<Vec<f64>>,
        #[arg(long)]
        sites: Option<usize>,
        #[arg(long)]
        samples: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Site-averaged entropies of X:Y superlattices versus U
    Superlattice {
        #[command(flatten)]
        io: Io,
        /// Cells as X:Y pairs, e.g. 2:7,3:6
        #[arg(long, value_delimiter = ',', value_parser = parse_structure)]
        structures: Option<Vec<(usize, usize)>>,
        #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
        v_list: Option<Vec<f64>>,
        #[arg(long)]
        sites: Option<usize>,
        #[arg(long)]
        per_spin: Option<usize>,
        #[arg(long, value_delimiter = ',')]
        u_grid: Option<Vec<f64>>,
        #[arg(long, value_parser = parse_backend)]
        backend: Option<Backend>,
        #[arg(long)]
        ed_max_dim: Option<usize>,
    },
    /// One homogeneous point: S, L and w2
    Eval {
        #[command(flatten)]
        io: Io,
        #[arg(long)]
        n: Option<f64>,
        #[arg(long)]
        u: Option<f64>,
    },
    /// Exact ground state of one chain with a per-site report
    Ed {
        #[command(flatten)]
        io: Io,
        #[arg(long)]
        sites: Option<usize>,
        #[arg(long)]
        per_spin: Option<usize>,
        #[arg(long)]
        u: Option<f64>,
        #[arg(long)]
        max_dim: Option<usize>,
    },
}

fn parse_structure(s: &str) -> Result<(usize, usize), String> {
    let (x, y) = s
        .split_once(':')
        .ok_or_else(|| format!("expected X:Y, got {s:?}"))?;
    let x = x.trim().parse().map_err(|e| format!("{x:?}: {e}"))?;
    let y = y.trim().parse().map_err(|e| format!("{y:?}: {e}"))?;
    Ok((x, y))
}

fn parse_backend(s: &str) -> Result<Backend, String> {
    match s {
        "ed" => Ok(Backend::Ed),
        "lda" => Ok(Backend::Lda),
        _ => Err(format!("unknown backend {s:?} (expected ed or lda)")),
    }
}

#[derive(Debug)]
enum Failure {
    Usage(String),
    Run(Error),
    Io(String),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Usage(_) => 2,
            Failure::Run(Error::Capacity { .. }) => 4,
            Failure::Run(e) if e.is_invalid_input() => 2,
            Failure::Run(_) => 3,
            Failure::Io(_) => 1,
        }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Run(e)
    }
}

fn load<T: DeserializeOwned + Default>(path: Option<&Path>) -> Result<T, Failure> {
    match path {
        None => Ok(T::default()),
        Some(p) => load_required(p),
    }
}

fn load_required<T: DeserializeOwned>(path: &Path) -> Result<T, Failure> {
    let text =
        fs::read_to_string(path).map_err(|e| Failure::Usage(format!("{}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| Failure::Usage(format!("{}: {e}", path.display())))
}

fn set<T>(slot: &mut T, flag: Option<T>) {
    if let Some(v) = flag {
        *slot = v;
    }
}

fn configure_workers() -> Result<(), Failure> {
    let workers = match std::env::var(WORKERS_VAR) {
        Ok(v) => v.trim().parse::<usize>().map_err(|_| {
            Failure::Usage(format!(
                "{WORKERS_VAR} must be a non-negative integer, got {v:?}"
            ))
        })?,
        Err(_) => 0,
    };
    rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build_global()
        .map_err(|e| Failure::Usage(format!("thread pool: {e}")))
}

fn run(command: Command) -> Result<(Table, Option<PathBuf>), Failure> {
    let (table, out) = match command {
        Command::Fig2 { io, u_list, n_grid } => {
            let mut p: Fig2Params = load(io.config.as_deref())?;
            set(&mut p.u_list, u_list);
            set(&mut p.n_grid, n_grid);
            (experiments::fig2(&p)?, io.out)
        }
        Command::Fig3 {
            io,
            n_list,
            u_grid,
            ed_sites,
            ed_max_dim,
        } => {
            let mut p: Fig3Params = load(io.config.as_deref())?;
            set(&mut p.n_list, n_list);
            set(&mut p.u_grid, u_grid);
            set(&mut p.ed_sites, ed_sites);
            set(&mut p.ed_max_dim, ed_max_dim);
            (experiments::fig3(&p)?, io.out)
        }
        Command::Fig4 { io, u_list, n_grid } => {
            let mut p: Fig4Params = load(io.config.as_deref())?;
            set(&mut p.u_list, u_list);
            set(&mut p.n_grid, n_grid);
            (experiments::fig4(&p)?, io.out)
        }
        Command::Fig5 {
            io,
            n_list,
            u_grid,
            orders,
        } => {
            let mut p: Fig5Params = load(io.config.as_deref())?;
            set(&mut p.n_list, n_list);
            set(&mut p.u_grid, u_grid);
            set(&mut p.orders, orders);
            (experiments::fig5(&p)?, io.out)
        }
        Command::Fig6 {
            io,
            n_list,
            u_grid,
            concentration,
            v_list,
            sites,
            samples,
            seed,
        } => {
            let mut p: Fig6Params = load(io.config.as_deref())?;
            set(&mut p.n_list, n_list);
            set(&mut p.u_grid, u_grid);
            set(&mut p.concentration, concentration);
            set(&mut p.v_list, v_list);
            set(&mut p.sites, sites);
            set(&mut p.samples, samples);
            set(&mut p.master_seed, seed);
            (experiments::fig6(&p)?, io.out)
        }
        Command::Superlattice {
            io,
            structures,
            v_list,
            sites,
            per_spin,
            u_grid,
            backend,
            ed_max_dim,
        } => {
            let mut p: SuperlatticeParams = load(io.config.as_deref())?;
            set(&mut p.structures, structures);
            set(&mut p.v_list, v_list);
            set(&mut p.sites, sites);
            set(&mut p.per_spin, per_spin);
            set(&mut p.u_grid, u_grid);
            set(&mut p.backend, backend);
            set(&mut p.ed_max_dim, ed_max_dim);
            (experiments::superlattice(&p)?, io.out)
        }
        Command::Eval { io, n, u } => {
            let p = match (io.config.as_deref(), n, u) {
                (_, Some(n), Some(u)) => EvalParams { n, u },
                (Some(path), n, u) => {
                    let mut p: EvalParams = load_required(path)?;
                    set(&mut p.n, n);
                    set(&mut p.u, u);
                    p
                }
                (None, _, _) => {
                    return Err(Failure::Usage(
                        "eval needs --n and --u (or --config)".into(),
                    ))
                }
            };
            (experiments::eval(&p)?, io.out)
        }
        Command::Ed {
            io,
            sites,
            per_spin,
            u,
            max_dim,
        } => {
            let mut p: EdParams = load(io.config.as_deref())?;
            set(&mut p.sites, sites);
            set(&mut p.per_spin, per_spin);
            set(&mut p.u, u);
            set(&mut p.max_dim, max_dim);
            (experiments::ed_report(&p)?, io.out)
        }
    };
    Ok((table, out))
}

fn emit(table: &Table, out: Option<&Path>) -> Result<(), Failure> {
    for w in &table.warnings {
        eprintln!("warning: {w}");
    }
    let csv = table.to_csv();
    match out {
        Some(path) => {
            fs::write(path, csv).map_err(|e| Failure::Io(format!("{}: {e}", path.display())))
        }
        None => {
            print!("{csv}");
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = configure_workers()
        .and_then(|()| run(cli.command))
        .and_then(|(table, out)| emit(&table, out.as_deref()));
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            match &f {
                Failure::Usage(msg) | Failure::Io(msg) => eprintln!("error: {msg}"),
                Failure::Run(e @ Error::Capacity { .. }) => {
                    eprintln!("error: {e}; use a smaller chain or `--backend lda`")
                }
                Failure::Run(e) => eprintln!("error: {e}"),
            }
            ExitCode::from(f.code())
        }
    }
}
