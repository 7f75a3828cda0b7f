//! Command-line front end: fits, baselines, gradient checks, projection
//! recovery and result tables.
//!
//! Exit codes: 0 success, 1 check or convergence failure, 2 usage or input
//! error.

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

pub mod commands;
pub mod config;
pub mod modelfile;

pub use config::RunConfig;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    /// A check ran and failed, or the optimizer did not converge.
    #[error("{0}")]
    Check(String),
    #[error(transparent)]
    Core(#[from] ddrom::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        use ddrom::Error as E;
        match self {
            CliError::Usage(_) => 2,
            CliError::Check(_) => 1,
            CliError::Core(E::Input(_) | E::Parse { .. } | E::Dimension(_) | E::Io(_) | E::Rank(_)) => 2,
            CliError::Core(_) => 1,
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "ddrom", version, about = "Fit and compare parameter-separable reduced-order models")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Fit a reduced model (any method) and write model, trace, errors and summary.
    Fit(RunArgs),
    /// Build a reduced-basis or POD model.
    Baseline(RunArgs),
    /// Compare analytic gradients with finite differences on a random model.
    GradCheck(RunArgs),
    /// Decide whether a model is a projection of a full-order model.
    Recover(RunArgs),
    /// Consolidate run summaries under a directory into one table.
    Report {
        /// Results directory; defaults to `results`.
        dir: Option<PathBuf>,
    },
}

#[derive(Debug, Args)]
struct RunArgs {
    /// `key = value` file; flags override it.
    #[arg(long)]
    config: Option<PathBuf>,
    /// poisson | nonsep | convection | thermal-block | freq-data:PATH | synthetic-lti:ORDER[:SEED]
    #[arg(long)]
    problem: Option<String>,
    /// rb | pod | l2opt-sp | l2opt-ext
    #[arg(long)]
    method: Option<String>,
    #[arg(short = 'r', long)]
    order: Option<String>,
    /// default | interval | discrete | discrete:N | h2
    #[arg(long)]
    measure: Option<String>,
    /// Training points per parameter axis (frequencies for synthetic-lti).
    #[arg(long)]
    train: Option<String>,
    /// Reporting-grid points per parameter axis.
    #[arg(long)]
    test: Option<String>,
    /// Interior grid nodes per axis of the finite-element mesh.
    #[arg(long)]
    mesh: Option<String>,
    #[arg(long)]
    maxit: Option<String>,
    #[arg(long)]
    tol: Option<String>,
    /// default | pod | rb | canonical | sp | perturb | file:PATH
    #[arg(long)]
    init: Option<String>,
    #[arg(long)]
    seed: Option<String>,
    #[arg(long)]
    out: Option<String>,
    /// Finite-difference step for grad-check.
    #[arg(long)]
    h: Option<String>,
    /// affine | lti, the random-model family of grad-check.
    #[arg(long)]
    family: Option<String>,
    /// Complex coefficients in grad-check.
    #[arg(long)]
    complex: bool,
    /// Model file for recover.
    #[arg(long)]
    model: Option<String>,
    /// Separable full-order model (model-file format) for recover.
    #[arg(long)]
    fom: Option<String>,
}

impl RunArgs {
    fn resolve(&self) -> Result<RunConfig, CliError> {
        let mut cfg = RunConfig::default();
        if let Some(path) = &self.config {
            let text = std::fs::read_to_string(path)
                .map_err(|e| CliError::Core(ddrom::Error::Io(format!("{}: {e}", path.display()))))?;
            cfg.apply_text(&text)?;
        }
        let flags = [
            ("problem", &self.problem),
            ("method", &self.method),
            ("order", &self.order),
            ("measure", &self.measure),
            ("train", &self.train),
            ("test", &self.test),
            ("mesh", &self.mesh),
            ("maxit", &self.maxit),
            ("tol", &self.tol),
            ("init", &self.init),
            ("seed", &self.seed),
            ("out", &self.out),
            ("h", &self.h),
            ("family", &self.family),
            ("model", &self.model),
            ("fom", &self.fom),
        ];
        for (key, v) in flags {
            if let Some(v) = v {
                cfg.set(key, v)?;
            }
        }
        if self.complex {
            cfg.complex = true;
        }
        Ok(cfg)
    }
}

fn dispatch(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Fit(a) => commands::cmd_run(&a.resolve()?, false),
        Command::Baseline(a) => commands::cmd_run(&a.resolve()?, true),
        Command::GradCheck(a) => commands::cmd_grad_check(&a.resolve()?),
        Command::Recover(a) => commands::cmd_recover(&a.resolve()?),
        Command::Report { dir } => commands::cmd_report(&dir.unwrap_or_else(|| PathBuf::from("results"))),
    }
}

/// Parses `args` and runs the command; returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    match dispatch(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
