use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use log::{error, info};

use helly_core::model::{generate_instance, parse_family, HalfspaceFamily, InstanceKind};
use helly_core::report::{run_selection, verify_report, RunReport};
use helly_core::select::{certified_bound, Algorithm};
use helly_core::volume::VolumeOptions;
use helly_core::Error;

const DEFAULT_D: f64 = 4.0;

/// Select a small sub-family of halfspaces or strips with a certified
/// bound on how much the intersection grows.
#[derive(Parser, Debug)]
#[command(name = "helly", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Write a test instance as JSON.
    Gen {
        /// cube, cross, simplex or random
        #[arg(long, default_value = "random")]
        shape: InstanceKind,
        #[arg(long)]
        n: usize,
        /// Number of members (random shape only).
        #[arg(long, default_value_t = 0)]
        m: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Emit symmetric strips instead of halfspaces.
        #[arg(long)]
        symmetric: bool,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run a selection pipeline and write its report.
    Select {
        #[command(flatten)]
        algo: AlgoArgs,
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
        #[command(flatten)]
        volume: VolumeArgs,
    },
    /// Re-measure a stored report against its instance.
    Verify {
        /// Instance the report was produced from.
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        report: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
        #[command(flatten)]
        volume: VolumeArgs,
    },
    /// Print the selection cap and certified bound without running anything.
    Bound {
        #[command(flatten)]
        algo: AlgoArgs,
        #[arg(long)]
        n: usize,
    },
}

#[derive(Args, Debug)]
struct AlgoArgs {
    /// symmetric, lifted or naszodi
    #[arg(long)]
    algo: Algorithm,
    /// Sparsification parameter, above 1 (default 4; not accepted by naszodi).
    #[arg(long)]
    d: Option<f64>,
}

impl AlgoArgs {
    fn resolve(&self) -> Result<Option<f64>, Error> {
        match (self.algo.uses_d(), self.d) {
            (true, d) => Ok(Some(d.unwrap_or(DEFAULT_D))),
            (false, None) => Ok(None),
            (false, Some(_)) => Err(Error::Value(format!("--d is not accepted by {}", self.algo))),
        }
    }
}

#[derive(Args, Debug)]
struct VolumeArgs {
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Monte Carlo samples per volume when exact volume is out of budget.
    #[arg(long, default_value_t = 1_000_000)]
    samples: u64,
    /// Force exact volumes (fails if the instance is over budget).
    #[arg(long)]
    exact: bool,
}

impl VolumeArgs {
    fn options(&self, stream: u64) -> Result<VolumeOptions, Error> {
        if self.samples == 0 {
            return Err(Error::Value("--samples must be positive".into()));
        }
        Ok(VolumeOptions {
            samples: self.samples,
            seed: self.seed.wrapping_add(stream),
            force_exact: self.exact,
        })
    }
}

enum Failure {
    Input(Error),
    Internal(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::Schema(_)
            | Error::Value(_)
            | Error::Io(_)
            | Error::EmptyInterior
            | Error::Unbounded
            | Error::BudgetExceeded(_)
            | Error::MismatchedInstance { .. } => Failure::Input(e),
            other => Failure::Internal(other.to_string()),
        }
    }
}

fn read(path: &Path) -> Result<String, Error> {
    fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))
}

fn emit(out: Option<&Path>, text: &str) -> Result<(), Error> {
    match out {
        Some(path) => fs::write(path, format!("{text}\n"))
            .map_err(|e| Error::Io(format!("{}: {e}", path.display()))),
        None => {
            println!("{text}");
            Ok(())
        }
    }
}

fn load_family(path: &Path) -> Result<HalfspaceFamily, Error> {
    parse_family(&read(path)?)
}

/// Exit status 0 when the run passed, 2 when a certified check failed.
type Status = bool;

fn run(cli: Cli) -> Result<Status, Failure> {
    match cli.command {
        Command::Gen {
            shape,
            n,
            m,
            seed,
            symmetric,
            out,
        } => {
            let family = generate_instance(shape, n, m, seed, symmetric)?;
            emit(out.as_deref(), &family.to_json())?;
            Ok(true)
        }
        Command::Select {
            algo,
            input,
            out,
            volume,
        } => {
            let d = algo.resolve()?;
            let opts = volume.options(0)?;
            let family = load_family(&input)?;
            let report = run_selection(&family, algo.algo, d, &opts)?;
            emit(out.as_deref(), &report.to_json())?;
            info!("selected {} of {} members", report.s, family.len());
            if !report.bound_satisfied {
                error!(
                    "measured ratio {} exceeds the certified bound {}",
                    report.measured_ratio.ci99[1],
                    report.certified_log_ratio.exp()
                );
            }
            if !report.residuals_ok() {
                error!("decomposition residuals above tolerance");
            }
            Ok(report.passed())
        }
        Command::Verify {
            input,
            report,
            out,
            volume,
        } => {
            // a fresh stream, independent of the one used by select
            let opts = volume.options(1)?;
            let family = load_family(&input)?;
            let stored: RunReport = serde_json::from_str(&read(&report)?)
                .map_err(|e| Error::Schema(format!("report: {e}")))?;
            let v = verify_report(&family, &stored, &opts)?;
            emit(out.as_deref(), &serde_json::to_string_pretty(&v).expect("verification serializes"))?;
            if !v.certified_matches || v.s > v.cap {
                return Err(Failure::Input(Error::Value(
                    "report does not match the recomputed certificate or cap".into(),
                )));
            }
            if !v.agrees_with_report {
                info!("recomputed ratio interval does not overlap the stored one");
            }
            Ok(v.pass)
        }
        Command::Bound { algo, n } => {
            let d = algo.resolve()?;
            if n == 0 {
                return Err(Error::Value("--n must be at least 1".into()).into());
            }
            let log_ratio = certified_bound(algo.algo, n, d.unwrap_or(0.0));
            let doc = serde_json::json!({
                "algorithm": algo.algo,
                "n": n,
                "d": d,
                "cap": algo.algo.cap(n, d.unwrap_or(0.0)),
                "certified_log_ratio": log_ratio,
                "certified_ratio": log_ratio.exp(),
            });
            emit(None, &serde_json::to_string_pretty(&doc).expect("json"))?;
            Ok(true)
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("HELLY_LOG", "warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match run(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(2),
        Err(Failure::Input(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
        Err(Failure::Internal(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
    }
}
