//! `shrinker-audit`: run the identity, geodesic, inequality-chain and
//! good-point suites on a shrinker model and write JSON/CSV reports.
//!
//! Exit codes: 0 success, 1 audit failure, 2 bad configuration,
//! 3 solver or I/O failure, 4 typed refusal (the request is outside the
//! model's range, e.g. beyond the diameter).

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

mod commands;
mod config;

use config::{Resolved, RunConfig};

#[derive(Debug)]
pub enum CliError {
    Config(String),
    Solver(String),
    Io(String),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) => 2,
            CliError::Solver(_) | CliError::Io(_) => 3,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Config(m) => write!(f, "bad configuration: {m}"),
            CliError::Solver(m) => write!(f, "solver failure: {m}"),
            CliError::Io(m) => write!(f, "i/o failure: {m}"),
        }
    }
}

#[derive(Parser)]
#[command(name = "shrinker-audit", version, about = "Audit φ-geodesic inequalities on gradient Ricci shrinkers")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Shrinker identities and Δ_f(R/f) checks at random points.
    VerifyIdentities(Flags),
    /// Solve x → y with both solvers; write paths as CSV.
    Geodesic(Flags),
    /// Run the integral inequality chain on every (c, r(y)) cell.
    AuditChain(Flags),
    /// Find the good point z on every (c, r(y)) cell and report Ĉ.
    Scan(Flags),
}

#[derive(Args)]
struct Flags {
    /// JSON run configuration; flags override its fields.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Model, e.g. `cylinder:k=2,m=2`, `sphere:n=3`, `sphereproduct:k=2,m=2`, `gaussian:n=4`.
    #[arg(long)]
    model: Option<String>,
    /// Values of c (comma separated).
    #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
    c: Option<Vec<f64>>,
    /// Target radii r(y) (comma separated).
    #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
    ry: Option<Vec<f64>>,
    /// Radius of the start point x (0 is the base point).
    #[arg(long)]
    x_ry: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    /// Random sample points for verify-identities.
    #[arg(long)]
    samples: Option<usize>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
}

impl Flags {
    fn resolve(self) -> Result<Resolved, CliError> {
        let mut cfg = match &self.config {
            Some(p) => RunConfig::from_file(p)?,
            None => RunConfig::default(),
        };
        if let Some(m) = self.model {
            cfg.model = m;
        }
        if let Some(c) = self.c {
            cfg.c = c;
        }
        if let Some(r) = self.ry {
            cfg.ry = r;
        }
        if let Some(x) = self.x_ry {
            cfg.x_ry = x;
        }
        if let Some(s) = self.seed {
            cfg.seed = s;
        }
        if let Some(n) = self.samples {
            cfg.samples = n;
        }
        if let Some(o) = self.out {
            cfg.out = o;
        }
        Resolved::new(cfg)
    }
}

fn init_threads() -> Result<(), CliError> {
    let Ok(v) = std::env::var("SHRINKER_AUDIT_THREADS") else {
        return Ok(());
    };
    let n: usize = v
        .trim()
        .parse()
        .ok()
        .filter(|&n| n >= 1)
        .ok_or_else(|| CliError::Config(format!("SHRINKER_AUDIT_THREADS: expected a positive integer (got {v:?})")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| CliError::Config(format!("SHRINKER_AUDIT_THREADS: {e}")))
}

fn run(cli: Cli) -> Result<i32, CliError> {
    init_threads()?;
    match cli.command {
        Command::VerifyIdentities(f) => commands::verify_identities(&f.resolve()?),
        Command::Geodesic(f) => commands::geodesic(&f.resolve()?),
        Command::AuditChain(f) => commands::audit_chain_cmd(&f.resolve()?),
        Command::Scan(f) => commands::scan(&f.resolve()?),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
