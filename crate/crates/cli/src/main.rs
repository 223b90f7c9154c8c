mod figures;
mod scenario;

use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use ecogame::model::{load_params, ParamFormat};
use ecogame::{Error, ErrorFamily};

use scenario::{execute, Artifact, FigureId, Format, Options, Scenario, Settings, SweepKind, Task};

const EXIT_CONFIG: u8 = 2;
const EXIT_NUMERIC: u8 = 3;
const EXIT_CHECKS: u8 = 4;

#[derive(Parser)]
#[command(name = "ecogame", version, about = "Replicator-mutator dynamics with environmental feedback")]
struct Cli {
    /// Parameter file (.json or .toml)
    #[arg(long, global = true)]
    params: Option<PathBuf>,
    /// Directory for output files; stdout when omitted
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Format of tabular outputs; reports are always JSON
    #[arg(long, global = true, value_enum, default_value = "csv")]
    format: Format,
    /// Relative integration tolerance
    #[arg(long, global = true)]
    tol: Option<f64>,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Integrate one trajectory
    Simulate {
        #[arg(long)]
        x0: f64,
        #[arg(long)]
        r0: f64,
        #[arg(long, default_value_t = 100.0)]
        t_end: f64,
    },
    /// Interior, side and corner equilibria with their stability
    Equilibria,
    /// Hopf point, Lyapunov coefficient, Dulac threshold, boundary loop
    Bifurc,
    /// Cycle envelope over a grid of mutation rates or subsidies
    Sweep {
        #[arg(long, value_enum, default_value = "mu")]
        param: SweepKind,
        /// Comma-separated grid values
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        grid: Vec<f64>,
        /// Evenly spaced grid FROM:TO:COUNT
        #[arg(long, conflicts_with = "grid")]
        range: Option<String>,
    },
    /// Subsidy thresholds and a recommended subsidy
    ControlDesign {
        /// Integrate a start grid under the recommended subsidy
        #[arg(long)]
        verify: bool,
    },
    /// Uniqueness conditions in the balanced case
    LienardCheck,
    /// Data and checks for one published figure
    ReproduceFigure {
        #[arg(value_enum)]
        figure: FigureId,
    },
    /// Run a scenario file
    Run {
        #[arg(long)]
        scenario: PathBuf,
    },
}

enum Failure {
    Core(Error),
    Io(String),
    Checks(Vec<String>),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Core(e)
    }
}

fn parse_range(s: &str) -> Result<Vec<f64>, Error> {
    let bad = || Error::Config(format!("range {s:?} is not FROM:TO:COUNT"));
    let parts: Vec<&str> = s.split(':').collect();
    let [a, b, n] = parts[..] else { return Err(bad()) };
    let (a, b): (f64, f64) = (a.parse().map_err(|_| bad())?, b.parse().map_err(|_| bad())?);
    let n: usize = n.parse().map_err(|_| bad())?;
    Ok(match n {
        0 => Vec::new(),
        1 => vec![a],
        _ => (0..n).map(|i| a + (b - a) * i as f64 / (n - 1) as f64).collect(),
    })
}

fn build(cli: &Cli) -> Result<Scenario, Error> {
    if let Cmd::Run { scenario } = &cli.cmd {
        return Scenario::load(scenario);
    }
    if let Cmd::ReproduceFigure { figure } = &cli.cmd {
        return Scenario::parse(figures::bundled(*figure), ParamFormat::Toml);
    }
    let params = cli.params.as_deref().map(load_params).transpose()?;
    let mut options = Options::default();
    let task = match &cli.cmd {
        Cmd::Simulate { x0, r0, t_end } => {
            options.x0 = Some(*x0);
            options.r0 = Some(*r0);
            options.t_end = Some(*t_end);
            Task::Simulate
        }
        Cmd::Equilibria => Task::Equilibria,
        Cmd::Bifurc => Task::Bifurc,
        Cmd::Sweep { param, grid, range } => {
            options.sweep = Some(*param);
            options.grid = Some(match range {
                Some(r) => parse_range(r)?,
                None => grid.clone(),
            });
            Task::Sweep
        }
        Cmd::ControlDesign { verify } => {
            options.verify = Some(*verify);
            Task::ControlDesign
        }
        Cmd::LienardCheck => Task::LienardCheck,
        Cmd::ReproduceFigure { .. } | Cmd::Run { .. } => unreachable!(),
    };
    Ok(Scenario { name: "cli".into(), task, figure: None, params, options })
}

fn write_all(out: Option<&PathBuf>, artifacts: &[Artifact]) -> Result<(), Failure> {
    match out {
        Some(dir) => {
            std::fs::create_dir_all(dir).map_err(|e| Failure::Io(format!("{}: {e}", dir.display())))?;
            for a in artifacts {
                let path = dir.join(&a.name);
                std::fs::write(&path, &a.body).map_err(|e| Failure::Io(format!("{}: {e}", path.display())))?;
            }
        }
        None => {
            let mut so = std::io::stdout().lock();
            let many = artifacts.len() > 1;
            for a in artifacts {
                if many {
                    writeln!(so, "==> {} <==", a.name).map_err(|e| Failure::Io(e.to_string()))?;
                }
                so.write_all(a.body.as_bytes()).map_err(|e| Failure::Io(e.to_string()))?;
                if !a.body.ends_with('\n') {
                    writeln!(so).map_err(|e| Failure::Io(e.to_string()))?;
                }
            }
        }
    }
    Ok(())
}

fn run(cli: &Cli) -> Result<(), Failure> {
    let sc = build(cli)?;
    let set = Settings { format: cli.format, tol: cli.tol };
    let outcome = execute(&sc, &set)?;
    write_all(cli.out.as_ref(), &outcome.artifacts)?;
    for c in &outcome.checks {
        eprintln!("{} {}{}", if c.passed { "PASS" } else { "FAIL" }, c.name, if c.detail.is_empty() { String::new() } else { format!(": {}", c.detail) });
    }
    let failed: Vec<String> = outcome.failed().iter().map(|c| c.name.clone()).collect();
    if failed.is_empty() {
        Ok(())
    } else {
        Err(Failure::Checks(failed))
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Core(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(match e.family() {
                ErrorFamily::Config => EXIT_CONFIG,
                ErrorFamily::Numeric => EXIT_NUMERIC,
            })
        }
        Err(Failure::Io(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(EXIT_CONFIG)
        }
        Err(Failure::Checks(names)) => {
            eprintln!("checks failed: {}", names.join("; "));
            ExitCode::from(EXIT_CHECKS)
        }
    }
}
