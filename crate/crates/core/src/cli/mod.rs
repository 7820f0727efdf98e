//! Command-line front end: `dirichlet-p <command> --config run.json`.
//!
//! Exit codes: 0 success, 1 configuration error, 2 computation failure or a
//! non-finite number in the report, 3 a property check failed.

mod commands;
pub mod config;
mod report;

use std::io::Write;
use std::path::{Path, PathBuf};

use clap::Parser;

pub use commands::execute;
pub use config::{Command, RunConfig};
pub use report::{Failure, Report, Table};

pub const EXIT_OK: i32 = 0;
pub const EXIT_CONFIG: i32 = 1;
pub const EXIT_COMPUTE: i32 = 2;
pub const EXIT_PROPERTY: i32 = 3;

#[derive(Debug, Parser)]
#[command(name = "dirichlet-p", version, about = "Nonlinear p-forms on grids: solves, capacities, metric and quasiregular checks")]
pub struct Cli {
    pub command: Command,
    /// Run configuration (JSON).
    #[arg(long)]
    pub config: PathBuf,
    /// Report path; stdout when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Also write the report's table as CSV (next to --out, or to stdout).
    #[arg(long)]
    pub csv: bool,
    /// Worker threads (default: available cores).
    #[arg(long)]
    pub threads: Option<usize>,
    /// Overrides the config seed.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Overrides the solver's grad_tol.
    #[arg(long)]
    pub tol: Option<f64>,
}

fn config_message(e: &crate::Error) -> String {
    match e {
        crate::Error::Config(_) => e.to_string(),
        _ => format!("config error: {e}"),
    }
}

fn init_logging() {
    let env = env_logger::Env::new().filter_or("DIRICHLET_P_LOG", "error");
    let _ = env_logger::Builder::from_env(env).format_timestamp(None).try_init();
}

/// Entry point of the binary.
pub fn main() -> i32 {
    run(std::env::args_os())
}

pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    init_logging();
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_CONFIG } else { EXIT_OK };
        }
    };
    let cfg = match load(&cli) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("{}", config_message(&e));
            return EXIT_CONFIG;
        }
    };
    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(n) = cli.threads {
        if n == 0 {
            eprintln!("config error: --threads must be at least 1");
            return EXIT_CONFIG;
        }
        pool = pool.num_threads(n);
    }
    let pool = match pool.build() {
        Ok(p) => p,
        Err(e) => {
            eprintln!("error: cannot start thread pool: {e}");
            return EXIT_COMPUTE;
        }
    };
    let base = config::base_dir(&cli.config);
    let outcome = pool.install(|| execute(cli.command, &cfg, &base));
    let (report, code) = match outcome {
        Ok(r) if !r.is_finite() => {
            eprintln!("error: report contains a non-finite number");
            (Some(r), EXIT_COMPUTE)
        }
        Ok(r) => {
            let code = if r.pass { EXIT_OK } else { EXIT_PROPERTY };
            (Some(r), code)
        }
        Err(Failure::Config(e)) => {
            eprintln!("{}", config_message(&e));
            (None, EXIT_CONFIG)
        }
        Err(Failure::Compute { error, report }) => {
            eprintln!("computation failed: {error}");
            (report, EXIT_COMPUTE)
        }
    };
    if let Some(r) = report {
        let out = cli.out.clone().or_else(|| cfg.output.as_ref().map(|o| base.join(o)));
        if let Err(e) = write_report(&r, out.as_deref(), cli.csv) {
            eprintln!("error: cannot write report: {e}");
            return EXIT_COMPUTE;
        }
    }
    code
}

fn load(cli: &Cli) -> crate::Result<RunConfig> {
    let mut cfg = RunConfig::from_path(&cli.config)?;
    if let Some(c) = cfg.command {
        if c != cli.command {
            return Err(crate::Error::Config(format!(
                "config is for \"{}\" but \"{}\" was requested",
                c.name(),
                cli.command.name()
            )));
        }
    }
    cfg.command = Some(cli.command);
    if let Some(s) = cli.seed {
        cfg.seed = s;
    }
    if let Some(t) = cli.tol {
        cfg.solver.grad_tol = t;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn write_report(r: &Report, out: Option<&Path>, csv: bool) -> std::io::Result<()> {
    let json = r.to_json()?;
    match out {
        Some(path) => {
            std::fs::write(path, json)?;
            if csv {
                std::fs::write(path.with_extension("csv"), r.to_csv()?)?;
            }
        }
        None => {
            let mut stdout = std::io::stdout().lock();
            if csv {
                stdout.write_all(&r.to_csv()?)?;
            } else {
                stdout.write_all(json.as_bytes())?;
            }
        }
    }
    Ok(())
}
