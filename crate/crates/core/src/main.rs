use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use serde_json::json;

use truncfock::config::{RunConfig, Scenario};
use truncfock::run::run_scenario;
use truncfock::verify::{verify_suite, Level};
use truncfock::Error;

#[derive(Parser)]
#[command(name = "truncfock", version, about = "Truncated Fock space solvers and diagnostics")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Solver {
    Exact,
    Hf,
    Rank,
    Pekar,
    Hvz,
    Scan,
}

#[derive(Clone, Copy, ValueEnum)]
enum VerifyLevel {
    Quick,
    Full,
}

#[derive(clap::Args)]
struct RunArgs {
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    restarts: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Run one solver on the configured model.
    Solve {
        solver: Solver,
        #[command(flatten)]
        args: RunArgs,
    },
    /// Run the scenario named in the config file.
    Run {
        #[command(flatten)]
        args: RunArgs,
    },
    /// Run the identity battery.
    Verify {
        level: VerifyLevel,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn fail(err: &Error) -> ExitCode {
    match err {
        Error::Config { key, message } => {
            eprintln!("{}", json!({"error": "config", "key": key, "message": message}));
            ExitCode::from(2)
        }
        other => {
            eprintln!("{}", json!({"error": "computation", "message": other.to_string()}));
            ExitCode::from(1)
        }
    }
}

fn load(args: &RunArgs, scenario: Option<Scenario>) -> Result<(RunConfig, PathBuf), Error> {
    let mut cfg = RunConfig::from_file_as(&args.config, scenario)?;
    if let Some(seed) = args.seed {
        cfg.seed = seed;
    }
    if let Some(r) = args.restarts {
        cfg.solver.restarts = r;
    }
    cfg.validate()?;
    let out = args.out.clone().or_else(|| cfg.output_dir.clone()).unwrap_or_else(|| PathBuf::from("out"));
    Ok((cfg, out))
}

fn execute(cfg: &RunConfig, out: &Path) -> ExitCode {
    match run_scenario(cfg, out) {
        Ok(summary) => {
            println!("{}", serde_json::to_string(&summary).unwrap_or_default());
            if summary.converged {
                ExitCode::SUCCESS
            } else {
                eprintln!("{}", json!({"error": "computation", "message": "solver did not converge; see manifest.json"}));
                ExitCode::from(1)
            }
        }
        Err(e) => fail(&e),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match cli.command {
        Command::Solve { solver, args } => {
            let scenario = match solver {
                Solver::Exact => Scenario::Exact,
                Solver::Hf => Scenario::Hf,
                Solver::Rank => Scenario::Rank,
                Solver::Pekar => Scenario::Pekar,
                Solver::Hvz => Scenario::Hvz,
                Solver::Scan => Scenario::Scan,
            };
            match load(&args, Some(scenario)) {
                Ok((cfg, out)) => execute(&cfg, &out),
                Err(e) => fail(&e),
            }
        }
        Command::Run { args } => match load(&args, None) {
            Ok((cfg, out)) => execute(&cfg, &out),
            Err(e) => fail(&e),
        },
        Command::Verify { level, seed, out } => {
            let level = match level {
                VerifyLevel::Quick => Level::Quick,
                VerifyLevel::Full => Level::Full,
            };
            let report = match verify_suite(level, seed) {
                Ok(r) => r,
                Err(e) => return fail(&e),
            };
            let _ = report.write_table(std::io::stdout());
            if let Some(dir) = out {
                let written = std::fs::create_dir_all(&dir)
                    .map_err(Error::from)
                    .and_then(|_| Ok(std::fs::File::create(dir.join("verify.json"))?))
                    .and_then(|f| Ok(serde_json::to_writer_pretty(f, &report)?));
                if let Err(e) = written {
                    return fail(&e);
                }
            }
            if report.passed() {
                ExitCode::SUCCESS
            } else {
                let failed: Vec<_> = report.failures().iter().map(|r| json!({"identity": r.identity, "residual": r.max_residual})).collect();
                eprintln!("{}", json!({"error": "verification", "failed": failed}));
                ExitCode::from(1)
            }
        }
    }
}
