//! Batch front end for `hornatlas`: JSON scenario files, one subcommand per
//! analysis, and CSV/SVG/JSON-lines emitters.
//!
//! Every run prints a one-line JSON summary on standard output and exits
//! with 0 on success, 2 on a validation failure and 3 on a numerical
//! failure.

pub mod emit;
pub mod error;
pub mod run;
pub mod scenario;

use std::ffi::OsString;
use std::path::PathBuf;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use serde_json::{Map, Value};

pub use error::CliError;
pub use run::{execute, Summary};
pub use scenario::Command;

/// Environment variable holding the worker thread count.
pub const THREADS_ENV: &str = "HORNATLAS_THREADS";

#[derive(Debug, Parser)]
#[command(name = "hornatlas", version, about = "Bifurcation analysis of the Euler-Lorenz map family")]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

/// Flags shared by all subcommands. Each one mirrors a scenario key and
/// overrides the scenario file.
#[derive(Debug, Clone, Args)]
struct Common {
    /// Scenario file (JSON).
    #[arg(long, value_name = "FILE")]
    scenario: Option<PathBuf>,
    /// Override a scenario key, e.g. `--set control.tol=1e-9`. Values are
    /// read as JSON, or as a string when that fails. Repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
    #[arg(long, allow_negative_numbers = true)]
    a: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    tau: Option<f64>,
    /// Write the curve/point CSV here (`outputs.csv`).
    #[arg(long, value_name = "PATH")]
    csv: Option<PathBuf>,
    /// Write the SVG portrait here (`outputs.svg`).
    #[arg(long, value_name = "PATH")]
    svg: Option<PathBuf>,
    /// Write the JSON-lines run log here (`outputs.log`).
    #[arg(long, value_name = "PATH")]
    log: Option<PathBuf>,
    /// Validate the scenario and exit without computing.
    #[arg(long)]
    dry_run: bool,
}

#[derive(Debug, Subcommand)]
enum Cmd {
    /// Phase portrait with orbit, circle, periodic and critical-curve layers.
    Portrait(Common),
    /// Forward orbit, detected period and rotation number.
    Orbit(Common),
    /// Both Lyapunov exponents.
    Lyap(Common),
    /// Rotation number about a center.
    Rotnum(Common),
    /// Periodic orbit by Newton or a locked pair by simulation.
    Periodic(Common),
    /// Continue a bifurcation curve in the (a, tau) plane.
    TraceCurve(Common),
    /// Locate a bifurcation on a tau slice.
    Locate(Common),
    /// Grow one unstable branch of a saddle orbit.
    Manifold(Common),
    /// Parameter at which a branch crossing of J0 becomes a cusp.
    CuspFind(Common),
    /// Bracket a change of branch fate in tau.
    Connection(Common),
    /// Parameter at which the invariant circle first touches J0.
    IcTangency(Common),
    /// Basin-of-attraction grid.
    Basin(Common),
    /// Circle-breakdown, cusp and chaos bounds with their ordering.
    ReportBounds(Common),
    /// Run a scenario file, dispatching on its `command` key.
    Run {
        #[arg(value_name = "FILE")]
        file: PathBuf,
        #[command(flatten)]
        common: Common,
    },
}

impl Cmd {
    fn split(self) -> Result<(Option<Command>, Common), CliError> {
        use Cmd::*;
        Ok(match self {
            Portrait(c) => (Some(Command::Portrait), c),
            Orbit(c) => (Some(Command::Orbit), c),
            Lyap(c) => (Some(Command::Lyap), c),
            Rotnum(c) => (Some(Command::Rotnum), c),
            Periodic(c) => (Some(Command::Periodic), c),
            TraceCurve(c) => (Some(Command::TraceCurve), c),
            Locate(c) => (Some(Command::Locate), c),
            Manifold(c) => (Some(Command::Manifold), c),
            CuspFind(c) => (Some(Command::CuspFind), c),
            Connection(c) => (Some(Command::Connection), c),
            IcTangency(c) => (Some(Command::IcTangency), c),
            Basin(c) => (Some(Command::Basin), c),
            ReportBounds(c) => (Some(Command::ReportBounds), c),
            Run { file, mut common } => {
                if common.scenario.is_some() {
                    return Err(CliError::Validation("`run FILE` does not take --scenario".into()));
                }
                common.scenario = Some(file);
                (None, common)
            }
        })
    }
}

/// Build the scenario object from the file and the command-line overrides.
fn assemble(common: &Common) -> Result<Value, CliError> {
    let mut v = match &common.scenario {
        Some(path) => {
            let text = std::fs::read_to_string(path).map_err(|e| CliError::Validation(format!("{}: {e}", path.display())))?;
            scenario::parse_scenario(&text)?
        }
        None => Value::Object(Map::new()),
    };
    let num = |x: f64| serde_json::Number::from_f64(x).map(Value::Number).ok_or_else(|| CliError::Validation("flag values must be finite".into()));
    if let Some(a) = common.a {
        scenario::set_path(&mut v, "a", num(a)?)?;
    }
    if let Some(t) = common.tau {
        scenario::set_path(&mut v, "tau", num(t)?)?;
    }
    for (key, path) in [("outputs.csv", &common.csv), ("outputs.svg", &common.svg), ("outputs.log", &common.log)] {
        if let Some(p) = path {
            scenario::set_path(&mut v, key, Value::String(p.display().to_string()))?;
        }
    }
    for s in &common.set {
        scenario::apply_override(&mut v, s)?;
    }
    Ok(v)
}

/// Size the global worker pool from [`THREADS_ENV`].
pub fn configure_threads() -> Result<(), CliError> {
    let Ok(raw) = std::env::var(THREADS_ENV) else {
        return Ok(());
    };
    let n: usize = raw
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| CliError::Validation(format!("{THREADS_ENV} must be a positive integer, got `{raw}`")))?;
    // a pool that already exists (library use, tests) is kept
    let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    Ok(())
}

/// Run the command line `args` (including the program name), print the
/// summary and return the exit code.
pub fn main_with<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    let t0 = Instant::now();
    let prepared = cli.command.split().and_then(|(expected, common)| {
        configure_threads()?;
        let mut v = assemble(&common)?;
        let cmd = scenario::take_command(&mut v, expected)?;
        Ok((cmd, v, common.dry_run))
    });
    let summary = match prepared {
        Ok((cmd, v, dry_run)) => execute(cmd, v, dry_run),
        Err(e) => run::failure(None, Value::Null, t0.elapsed().as_secs_f64(), &e),
    };
    println!("{}", summary.json);
    if summary.exit_code != 0 {
        if let Some(msg) = summary.json.get("message").and_then(Value::as_str) {
            eprintln!("error: {msg}");
        }
    }
    summary.exit_code
}
