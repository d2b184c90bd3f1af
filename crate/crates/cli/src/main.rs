use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::{Args, CommandFactory, Parser, Subcommand};
use serde::de::DeserializeOwned;

use slipflow_core::config::{load_document, ConfigError, SimConfig};
use slipflow_core::domain::write_snapshot;
use slipflow_core::experiments::{
    run_basis, run_decay, run_energy_suite, run_korn, run_regularity, run_simulation, run_symmetry, run_uniqueness,
    run_verify, BasisParams, DecayParams, EnergySuiteParams, ExperimentError, ExperimentReport, KornParams,
    RegularityParams, SymmetryParams, UniquenessParams, VerifyParams,
};
use slipflow_core::stokes_basis::solve_eigen;
use slipflow_core::{Grid, Law};

/// Power-law fluid flow in a truncated half-space with Navier slip.
#[derive(Debug, Parser)]
#[command(name = "slipflow", version)]
struct Cli {
    #[command(flatten)]
    global: Global,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct Global {
    /// Parameter file (TOML, or JSON when it starts with `{`).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory for the JSON summary and CSV tables.
    #[arg(long, global = true, default_value = "slipflow-out")]
    out: PathBuf,
    /// Overrides the random seed of seeded experiments.
    #[arg(long, global = true)]
    seed: Option<u64>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Certify the constitutive laws on random tensor pairs.
    Verify {
        #[arg(long = "law")]
        laws: Vec<Law>,
        #[arg(long = "p")]
        exponents: Vec<f64>,
        #[arg(long)]
        samples: Option<usize>,
    },
    /// Korn ratio on random compactly supported solenoidal fields.
    Korn {
        #[arg(long)]
        cells: Option<usize>,
        #[arg(long)]
        fields: Option<usize>,
    },
    /// Discrete Stokes eigenbasis checks.
    Basis {
        #[arg(long)]
        modes: Option<usize>,
        /// Also write every 2D mode as a velocity snapshot.
        #[arg(long)]
        snapshots: bool,
    },
    /// One run from `--config`, or the energy suite without it.
    Simulate,
    /// Twin and perturbed runs.
    Uniqueness {
        #[arg(long)]
        epsilon: Option<f64>,
        #[arg(long)]
        steps: Option<usize>,
    },
    /// Full box with reflected data against the half box.
    Symmetry,
    /// Difference-quotient lemma and regularity functionals.
    Regularity,
    /// Shell maxima of a compactly forced run.
    Decay {
        #[arg(long = "radius")]
        radii: Vec<f64>,
    },
}

fn params<T: Default + DeserializeOwned>(path: Option<&Path>) -> Result<T, ConfigError> {
    path.map_or_else(|| Ok(T::default()), load_document)
}

enum Failure {
    Usage(String),
    Run(ExperimentError),
}

impl From<ConfigError> for Failure {
    fn from(e: ConfigError) -> Self {
        Failure::Usage(e.to_string())
    }
}

impl From<ExperimentError> for Failure {
    fn from(e: ExperimentError) -> Self {
        match e {
            ExperimentError::Config(c) => Failure::Usage(c.to_string()),
            other => Failure::Run(other),
        }
    }
}

impl From<slipflow_core::DomainError> for Failure {
    fn from(e: slipflow_core::DomainError) -> Self {
        Failure::Run(e.into())
    }
}

fn run(cli: &Cli) -> Result<ExperimentReport, Failure> {
    let cfg = cli.global.config.as_deref();
    let seed = cli.global.seed;
    let out = &cli.global.out;
    let report = match &cli.command {
        Command::Verify { laws, exponents, samples } => {
            let mut p: VerifyParams = params(cfg)?;
            if !laws.is_empty() {
                p.laws = laws.clone();
            }
            if !exponents.is_empty() {
                p.exponents = exponents.clone();
            }
            p.samples = samples.unwrap_or(p.samples);
            p.seed = seed.unwrap_or(p.seed);
            run_verify(&p)?
        }
        Command::Korn { cells, fields } => {
            let mut p: KornParams = params(cfg)?;
            p.cells = cells.unwrap_or(p.cells);
            p.fields = fields.unwrap_or(p.fields);
            p.seed = seed.unwrap_or(p.seed);
            run_korn(&p)?
        }
        Command::Basis { modes, snapshots } => {
            let mut p: BasisParams = params(cfg)?;
            p.modes = modes.unwrap_or(p.modes);
            let report = run_basis(&p)?;
            if *snapshots {
                let grid = Grid::new(2, p.radius, p.cells_2d, true)?;
                let basis = solve_eigen(&grid, p.modes).map_err(ExperimentError::from)?;
                for (i, mode) in basis.modes().iter().enumerate() {
                    write_snapshot(&mode.velocity, 0.0, &out.join("basis_modes"), &format!("mode{i}"))?;
                }
            }
            report
        }
        Command::Simulate => match cfg {
            Some(path) => {
                let mut c = SimConfig::load(path)?;
                c.seed = seed.unwrap_or(c.seed);
                let (report, basis, outcome) = run_simulation(&c)?;
                let u = basis.reconstruct(outcome.final_coeffs());
                let t = outcome.times.last().copied().unwrap_or(0.0);
                write_snapshot(&u, t, out, "simulate_final")?;
                report
            }
            None => run_energy_suite(&EnergySuiteParams::default())?,
        },
        Command::Uniqueness { epsilon, steps } => {
            let mut p: UniquenessParams = params(cfg)?;
            p.epsilon = epsilon.unwrap_or(p.epsilon);
            p.steps = steps.unwrap_or(p.steps);
            p.seed = seed.unwrap_or(p.seed);
            run_uniqueness(&p)?
        }
        Command::Symmetry => {
            let mut p: SymmetryParams = params(cfg)?;
            p.seed = seed.unwrap_or(p.seed);
            run_symmetry(&p)?
        }
        Command::Regularity => {
            let mut p: RegularityParams = params(cfg)?;
            p.seed = seed.unwrap_or(p.seed);
            run_regularity(&p)?
        }
        Command::Decay { radii } => {
            let mut p: DecayParams = params(cfg)?;
            if !radii.is_empty() {
                p.radii = radii.clone();
            }
            run_decay(&p)?
        }
    };
    Ok(report)
}

fn command_name(c: &Command) -> &'static str {
    match c {
        Command::Verify { .. } => "verify",
        Command::Korn { .. } => "korn",
        Command::Basis { .. } => "basis",
        Command::Simulate => "simulate",
        Command::Uniqueness { .. } => "uniqueness",
        Command::Symmetry => "symmetry",
        Command::Regularity => "regularity",
        Command::Decay { .. } => "decay",
    }
}

fn write_error(out: &Path, id: &str, message: &str) -> std::io::Result<()> {
    std::fs::create_dir_all(out)?;
    let summary = serde_json::json!({ "id": id, "passed": false, "error": message, "checks": [] });
    std::fs::write(out.join(format!("{id}.json")), serde_json::to_string_pretty(&summary)?)?;
    std::fs::write(out.join(format!("{id}_checks.csv")), "name,value,threshold,relation,passed\n")
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let id = command_name(&cli.command);
    match run(&cli) {
        Ok(report) => {
            for c in &report.checks {
                println!(
                    "{} {} = {:.6e} ({:?} {:e})",
                    if c.passed { "PASS" } else { "FAIL" },
                    c.name,
                    c.value,
                    c.relation,
                    c.threshold
                );
            }
            match report.write(&cli.global.out) {
                Ok(paths) => paths.iter().for_each(|p| eprintln!("wrote {}", p.display())),
                Err(e) => {
                    eprintln!("error: {e}");
                    return ExitCode::from(3);
                }
            }
            println!("{id}: {}", if report.passed { "passed" } else { "FAILED" });
            if report.passed {
                ExitCode::SUCCESS
            } else {
                ExitCode::FAILURE
            }
        }
        Err(Failure::Usage(msg)) => {
            let _ = write_error(&cli.global.out, id, &msg);
            Cli::command().error(ErrorKind::ValueValidation, msg).exit()
        }
        Err(Failure::Run(e)) => {
            let msg = e.to_string();
            eprintln!("error: {msg}");
            let _ = write_error(&cli.global.out, id, &msg);
            ExitCode::from(3)
        }
    }
}
