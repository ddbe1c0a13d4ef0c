mod scenario;
mod simulate;

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use qsme_core::validation::{run_suite, Suite, SuiteOptions, SuiteReport};
use qsme_core::Error;
use serde_json::{json, Value};

use crate::scenario::{apply_overrides, parse_scenario, ConfigError, Scenario};

const SCENARIO_HELP: &str = "\
Scenario files are JSON objects. Complex numbers are [re, im] pairs; plain
numbers are real.

  name            output file stem (default \"scenario\")
  dim             Hilbert-space dimension (required, 1..=64)
  H               Hamiltonian, must be Hermitian (default \"zero\")
  Ls              nonempty list of measurement operators (required)
  n               optional; must equal the length of Ls
  rho0            initial state (required): an operator, {\"diag\": [p..]}
                  or {\"pure\": [amplitudes] | {\"basis\": k}}; unit trace
  T, dt           horizon and step (required; T a multiple of dt)
  trajectories    Monte Carlo paths (required)
  seed            base seed, trajectory i uses sub-seed i (default 0)
  engine          pure_linear | pure_nonlinear | sme_linear | sme_nonlinear
                  | ensemble | meanfield (required)
  picture         auto | schroedinger | interaction (default auto:
                  interaction once ||H||*dt > 0.1)
  positivity      monitor | ignore | project, sme_nonlinear only
                  (default monitor)
  rank_tol        eigenvalue cut for the ensemble engine (default 1e-12)
  per_trajectory  write per-path rows as well as mean/stderr (default true)
  meanfield       engine=meanfield only: {interaction: {kind: zero} |
                  {kind: potential, table: [[..]]} | {kind: hs_kernel,
                  kernel: d^2 x d^2 operator}, picard_max_iter (50),
                  picard_tol (1e-8), mode: normalized | linear
                  (normalized), conjugate (false)}
  outputs         list of {observable, stride (1), name (ev_<observable>)};
                  default a single trace output

Operators: explicit row lists, names (pauli_x, pauli_y, pauli_z, number,
lowering, raising, identity, zero), expressions such as
\"sum(scaled(pauli_x, 0.5), pauli_z)\", or objects {\"scaled\": [op, c]},
{\"sum\": [op, ..]}, {\"diag\": [..]}, {\"adjoint\": op}.

Linear engines (pure_linear, sme_linear) run under the reference measure;
their mean rows are self-normalized, likelihood-weighted estimates.

Exit codes: 0 ok, 1 validation failure, 2 config error, 3 runtime abort,
4 I/O error.";

#[derive(Parser)]
#[command(name = "qsme", version, about = "Stochastic master equation simulator and property checker", after_help = SCENARIO_HELP)]
struct Cli {
    /// Overrides the scenario seed (simulate) or the pinned suite seed (check).
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads (default: all cores). Results do not depend on it.
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Output format (default: csv for simulate, json for check).
    #[arg(long, global = true, value_enum)]
    format: Option<Format>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Csv,
    Json,
}

#[derive(Subcommand)]
enum Command {
    /// Run a scenario; writes <name>.csv and <name>.summary.json (csv) or <name>.json (json).
    Simulate {
        file: PathBuf,
        /// Override a scenario key, e.g. --set dt=0.005 --set meanfield.picard_tol=1e-6.
        #[arg(long = "set", value_name = "KEY=VALUE")]
        overrides: Vec<String>,
        /// Output directory (created if missing).
        #[arg(long, default_value = ".")]
        out: PathBuf,
    },
    /// Validate a scenario without running it.
    ValidateConfig {
        file: PathBuf,
        #[arg(long = "set", value_name = "KEY=VALUE")]
        overrides: Vec<String>,
    },
    /// Run a pinned-seed validation suite: all, martingale, bounds, inequalities,
    /// continuity, equivalence or convergence.
    Check {
        suite: String,
        /// Test hook: inject a drift into the tracked trace process so the
        /// martingale checks must fail.
        #[arg(long)]
        sabotage_martingale: bool,
    },
}

enum Failure {
    Validation(String),
    Config(Vec<ConfigError>),
    Runtime(Value),
    Io(String),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Validation(_) => 1,
            Failure::Config(_) => 2,
            Failure::Runtime(_) => 3,
            Failure::Io(_) => 4,
        }
    }

    fn report(&self) {
        match self {
            Failure::Validation(m) | Failure::Io(m) => eprintln!("error: {m}"),
            Failure::Config(errs) => {
                for e in errs {
                    eprintln!("config error: {e}");
                }
            }
            Failure::Runtime(diag) => eprintln!("{}", serde_json::to_string_pretty(diag).unwrap_or_default()),
        }
    }
}

fn runtime(err: &Error) -> Failure {
    let mut diag = json!({ "status": "aborted", "error": err.to_string() });
    if let Error::TrajectoryAbort { step, .. } = err {
        diag["step"] = json!(step);
    }
    Failure::Runtime(diag)
}

fn load(file: &Path, overrides: &[String], seed: Option<u64>) -> Result<Scenario, Failure> {
    let text = fs::read_to_string(file).map_err(|e| Failure::Io(format!("cannot read {}: {e}", file.display())))?;
    let mut doc: Value = serde_json::from_str(&text).map_err(|e| {
        Failure::Config(vec![ConfigError { path: String::new(), message: format!("invalid JSON: {e}") }])
    })?;
    apply_overrides(&mut doc, overrides).map_err(|e| Failure::Config(vec![e]))?;
    if let Some(seed) = seed {
        doc["seed"] = json!(seed);
    }
    parse_scenario(doc).map_err(Failure::Config)
}

fn write(path: &Path, body: &str) -> Result<(), Failure> {
    fs::write(path, body).map_err(|e| Failure::Io(format!("cannot write {}: {e}", path.display())))
}

fn simulate(s: &Scenario, out: &Path, format: Format) -> Result<(), Failure> {
    let result = simulate::run(s).map_err(|e| runtime(&e))?;
    fs::create_dir_all(out).map_err(|e| Failure::Io(format!("cannot create {}: {e}", out.display())))?;
    let mut summary = result.summary;
    let written = match format {
        Format::Csv => {
            let csv = out.join(format!("{}.csv", s.name));
            write(&csv, &simulate::render_csv(&result.rows))?;
            let js = out.join(format!("{}.summary.json", s.name));
            write(&js, &serde_json::to_string_pretty(&summary).unwrap_or_default())?;
            vec![csv, js]
        }
        Format::Json => {
            summary["series"] = simulate::rows_json(&result.rows);
            let js = out.join(format!("{}.json", s.name));
            write(&js, &serde_json::to_string_pretty(&summary).unwrap_or_default())?;
            vec![js]
        }
    };
    if let Some(reason) = result.abort {
        return Err(Failure::Runtime(json!({ "status": "aborted", "error": reason, "artifacts": written })));
    }
    for p in written {
        println!("{}", p.display());
    }
    Ok(())
}

fn print_suite(report: &SuiteReport, format: Format) {
    for c in &report.checks {
        eprintln!(
            "{} {}: observed {:.4e}, bound {:.4e}, margin {:.3e}",
            if c.pass { "PASS" } else { "FAIL" },
            c.name,
            c.observed,
            c.bound,
            c.margin
        );
    }
    match format {
        Format::Json => println!("{}", serde_json::to_string_pretty(report).unwrap_or_default()),
        Format::Csv => {
            println!("name,pass,observed,bound,margin,seed,config_hash");
            for c in &report.checks {
                println!("{},{},{},{},{},{},{}", c.name, c.pass, c.observed, c.bound, c.margin, c.seed, c.config_hash);
            }
        }
    }
}

fn run(cli: Cli) -> Result<(), Failure> {
    if let Some(n) = cli.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Failure::Config(vec![ConfigError { path: String::new(), message: format!("--threads: {e}") }]))?;
    }
    match cli.command {
        Command::Simulate { file, overrides, out } => {
            let s = load(&file, &overrides, cli.seed)?;
            simulate(&s, &out, cli.format.unwrap_or(Format::Csv))
        }
        Command::ValidateConfig { file, overrides } => {
            let s = load(&file, &overrides, cli.seed)?;
            println!(
                "ok: {} (engine {}, dim {}, {} channel(s), {} steps, {} trajectories, config {})",
                s.name,
                s.engine.name(),
                s.dim,
                s.couplings.len(),
                s.steps(),
                s.trajectories,
                &s.config_hash()[..16]
            );
            Ok(())
        }
        Command::Check { suite, sabotage_martingale } => {
            let suite: Suite = suite.parse().map_err(|e: Error| {
                Failure::Config(vec![ConfigError { path: String::new(), message: e.to_string() }])
            })?;
            let mut opts = SuiteOptions { sabotage: sabotage_martingale, ..SuiteOptions::default() };
            if let Some(seed) = cli.seed {
                opts.seed = seed;
            }
            let report = run_suite(suite, opts).map_err(|e| runtime(&e))?;
            print_suite(&report, cli.format.unwrap_or(Format::Json));
            if report.pass {
                Ok(())
            } else {
                Err(Failure::Validation(format!("failing checks: {}", report.failing().join(", "))))
            }
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            f.report();
            ExitCode::from(f.code())
        }
    }
}
