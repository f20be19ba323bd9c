//! `hillspec`: spectral analysis of Hill operators from the command line.

mod commands;
mod output;
mod verify;

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use clap::{Parser, Subcommand};
use serde::Serialize;

use commands::{CmdResult, ExpandArgs, Failure, ModeArg, DEFAULT_TOL};
use output::ErrorEntry;

#[derive(Parser)]
#[command(name = "hillspec", version, about = "Spectral analysis of Hill operators -y'' + q y with complex periodic q")]
struct Cli {
    /// Worker threads (falls back to HILLSPEC_THREADS, then the number of cores)
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Hill discriminant F(λ) and F'(λ) on a real λ grid, as CSV
    Discriminant {
        #[arg(long)]
        potential: PathBuf,
        /// a:b:n
        #[arg(long = "lambda-grid", allow_hyphen_values = true)]
        lambda_grid: String,
        #[arg(long, default_value_t = DEFAULT_TOL)]
        tol: f64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Bloch bands λ_n(t) for t in [0, π]
    Bands {
        #[arg(long)]
        potential: PathBuf,
        #[arg(long = "n-min", default_value_t = -3, allow_hyphen_values = true)]
        n_min: i64,
        #[arg(long = "n-max", default_value_t = 3, allow_hyphen_values = true)]
        n_max: i64,
        #[arg(long = "t-points", default_value_t = 33)]
        t_points: usize,
        #[arg(long, default_value_t = DEFAULT_TOL)]
        tol: f64,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        csv: Option<PathBuf>,
    },
    /// Multiple eigenvalues in a window of the λ-plane and their classification
    Singularities {
        #[arg(long)]
        potential: PathBuf,
        /// corners re0 im0 re1 im1
        #[arg(long, num_args = 4, allow_hyphen_values = true, value_names = ["RE0", "IM0", "RE1", "IM1"])]
        window: Vec<f64>,
        #[arg(long, default_value_t = 0.02)]
        h: f64,
        #[arg(long, default_value_t = DEFAULT_TOL)]
        tol: f64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Reconstruct a compactly supported function from its spectral expansion
    Expand {
        #[arg(long)]
        potential: PathBuf,
        #[arg(long)]
        function: PathBuf,
        #[arg(long, default_value_t = 0.02)]
        h: f64,
        #[arg(long = "n-max", default_value_t = 30)]
        n_max: i64,
        /// reconstruct on (-m, m)
        #[arg(long, default_value_t = 2)]
        m: i64,
        #[arg(long, value_enum, default_value_t = ModeArg::Pv)]
        mode: ModeArg,
        #[arg(long, default_value_t = DEFAULT_TOL)]
        tol: f64,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        csv: Option<PathBuf>,
    },
    /// Run the cross-check battery and write a JSON scorecard
    Verify {
        /// JSON with optional seed, samples, h, tol
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
        /// run timing and thread count go here, never into the scorecard
        #[arg(long)]
        metadata: Option<PathBuf>,
    },
}

fn thread_count(flag: Option<usize>) -> Result<Option<usize>, Failure> {
    if let Some(n) = flag {
        return if n == 0 {
            Err(Failure::invalid("InvalidArgument", "--threads must be positive"))
        } else {
            Ok(Some(n))
        };
    }
    match std::env::var("HILLSPEC_THREADS") {
        Ok(v) => match v.trim().parse::<usize>() {
            Ok(n) if n > 0 => Ok(Some(n)),
            _ => Err(Failure::invalid("InvalidArgument", format!("HILLSPEC_THREADS='{v}' is not a positive integer"))),
        },
        Err(_) => Ok(None),
    }
}

#[derive(Serialize)]
struct Metadata {
    unix_time: u64,
    elapsed_seconds: f64,
    threads: usize,
}

fn run_verify(config: Option<&Path>, out: Option<&Path>, metadata: Option<&Path>) -> CmdResult {
    let started = Instant::now();
    let cfg = verify::VerifyConfig::load(config)?;
    let card = verify::run(&cfg);
    let text = output::to_json(&card);
    output::emit(out, &text).map_err(|e| Failure::io(out.unwrap_or(Path::new("<stdout>")), e))?;
    if let Some(path) = metadata {
        let meta = Metadata {
            unix_time: SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0),
            elapsed_seconds: started.elapsed().as_secs_f64(),
            threads: rayon::current_num_threads(),
        };
        output::emit(Some(path), &output::to_json(&meta)).map_err(|e| Failure::io(path, e))?;
    }
    if card.errors.is_empty() {
        Ok(())
    } else {
        Err(Failure::Numerical(Vec::new()))
    }
}

fn dispatch(cli: Cli) -> CmdResult {
    if let Some(n) = thread_count(cli.threads)? {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Failure::invalid("InvalidArgument", e.to_string()))?;
    }
    match cli.command {
        Command::Discriminant {
            potential,
            lambda_grid,
            tol,
            out,
        } => commands::discriminant(&potential, &lambda_grid, tol, out.as_deref()),
        Command::Bands {
            potential,
            n_min,
            n_max,
            t_points,
            tol,
            out,
            csv,
        } => commands::bands(&potential, n_min, n_max, t_points, tol, out.as_deref(), csv.as_deref()),
        Command::Singularities {
            potential,
            window,
            h,
            tol,
            out,
        } => {
            let w: [f64; 4] = window.try_into().map_err(|_| Failure::invalid("InvalidArgument", "--window takes 4 numbers"))?;
            commands::singularities(&potential, w, h, tol, out.as_deref())
        }
        Command::Expand {
            potential,
            function,
            h,
            n_max,
            m,
            mode,
            tol,
            out,
            csv,
        } => commands::expand(&ExpandArgs {
            potential,
            function,
            h,
            n_max,
            m,
            mode,
            tol,
            out,
            csv,
        }),
        Command::Verify { config, out, metadata } => run_verify(config.as_deref(), out.as_deref(), metadata.as_deref()),
    }
}

#[derive(Serialize)]
struct ErrorReport<'a> {
    errors: &'a [ErrorEntry],
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            if !f.entries().is_empty() {
                print!("{}", output::to_json(&ErrorReport { errors: f.entries() }));
            }
            ExitCode::from(f.code() as u8)
        }
    }
}
