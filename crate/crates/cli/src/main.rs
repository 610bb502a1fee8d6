use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use stochwave_cli::run::EXIT_CONFIG_ERROR;
use stochwave_cli::{load, run, validate_all, ConfigError, ExperimentConfig, Kind};

/// Pseudospectral experiments for the multiplicative stochastic wave equation.
#[derive(Parser)]
#[command(name = "stochwave", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the experiment named by the `kind` key of the file.
    Run(RunArgs),
    /// Check a configuration without running it.
    Validate {
        #[arg(long)]
        config: PathBuf,
    },
    Lift(RunArgs),
    RenormStudy(RunArgs),
    Evolve(RunArgs),
    Gronwall(RunArgs),
    Cone(RunArgs),
    BesovReport(RunArgs),
    OracleCompare(RunArgs),
    Coercivity(RunArgs),
    FormBounds(RunArgs),
    FiniteSpeed(RunArgs),
    LocalEnergy(RunArgs),
}

#[derive(Args)]
struct RunArgs {
    #[arg(long)]
    config: PathBuf,
    /// Override the noise seed of every case.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory; defaults to the `output.dir` of the file.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads; results do not depend on it.
    #[arg(long)]
    threads: Option<usize>,
    #[arg(long, short)]
    verbose: bool,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (kind, args) = match cli.command {
        Command::Validate { config } => {
            return match load(&config).and_then(|cases| validate_all(&cases)) {
                Ok(()) => {
                    println!("{}: ok", config.display());
                    ExitCode::SUCCESS
                }
                Err(e) => config_error(e),
            };
        }
        Command::Run(a) => (None, a),
        Command::Lift(a) => (Some(Kind::Lift), a),
        Command::RenormStudy(a) => (Some(Kind::RenormStudy), a),
        Command::Evolve(a) => (Some(Kind::Evolve), a),
        Command::Gronwall(a) => (Some(Kind::Gronwall), a),
        Command::Cone(a) => (Some(Kind::Cone), a),
        Command::BesovReport(a) => (Some(Kind::BesovReport), a),
        Command::OracleCompare(a) => (Some(Kind::OracleCompare), a),
        Command::Coercivity(a) => (Some(Kind::Coercivity), a),
        Command::FormBounds(a) => (Some(Kind::FormBounds), a),
        Command::FiniteSpeed(a) => (Some(Kind::FiniteSpeed), a),
        Command::LocalEnergy(a) => (Some(Kind::LocalEnergy), a),
    };
    if let Some(n) = args.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("cannot configure {n} threads: {e}");
            return ExitCode::from(EXIT_CONFIG_ERROR as u8);
        }
    }
    let cases = match load(&args.config).and_then(|cases| apply_overrides(cases, kind, &args)) {
        Ok(c) => c,
        Err(e) => return config_error(e),
    };
    let out = args.out.clone().unwrap_or_else(|| cases[0].output.dir.clone());
    let record = match run(&cases, &out, args.verbose) {
        Ok(r) => r,
        Err(e) => return config_error(e),
    };
    for (case, check) in record.checks() {
        println!(
            "{} {}/{}: {:e} (limit {:e})",
            if check.passed { "PASS" } else { "FAIL" },
            case.name,
            check.name,
            check.value,
            check.limit
        );
    }
    for case in &record.cases {
        if let Some(e) = &case.error {
            println!("FAIL {}: {e}", case.name);
        }
    }
    println!("summary: {}", out.join("summary.toml").display());
    ExitCode::from(record.exit_code() as u8)
}

fn apply_overrides(
    mut cases: Vec<ExperimentConfig>,
    kind: Option<Kind>,
    args: &RunArgs,
) -> Result<Vec<ExperimentConfig>, ConfigError> {
    for cfg in &mut cases {
        match (kind, cfg.kind) {
            (Some(k), Some(file)) if k != file => {
                return Err(ConfigError::Invalid(vec![stochwave_cli::Diagnostic {
                    field: "kind".into(),
                    message: format!("the file describes a {file} experiment, not {k}"),
                }]))
            }
            (Some(k), _) => cfg.kind = Some(k),
            _ => {}
        }
        if let Some(seed) = args.seed {
            cfg.noise.seed = seed;
        }
        if let Some(out) = &args.out {
            cfg.output.dir = out.clone();
        }
    }
    Ok(cases)
}

fn config_error(e: ConfigError) -> ExitCode {
    eprintln!("{e}");
    ExitCode::from(EXIT_CONFIG_ERROR as u8)
}
