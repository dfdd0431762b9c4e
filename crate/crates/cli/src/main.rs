use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use tada_cli::runner::{self, EXIT_OK};
use tada_cli::{dispatch, error_record, exit_code, Mode, Outcome, RunConfig};
use tada_core::{Error, Result};

#[derive(Parser)]
#[command(name = "tada", version, about = "Adaptive Trotter simulations of driven spin chains")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Adaptive step-size run.
    RunAdaptive(RunArgs),
    /// Fixed-step baseline.
    RunFixed(RunArgs),
    /// Exact-oracle observables on a uniform grid.
    RunExact(RunArgs),
    /// Per-step change and truncation-error scaling with dt.
    ScalingStudy(RunArgs),
    /// Dump truncated generators and the truncation-error table.
    MagnusCheck(RunArgs),
    /// Run several configs (or one config over a range of values) in parallel.
    Sweep(SweepArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum Switch {
    On,
    Off,
}

#[derive(Args)]
struct RunArgs {
    /// TOML config, or a metadata sidecar (`.json`) from an earlier run.
    #[arg(long)]
    config: PathBuf,
    /// Override a config value, e.g. `--set control.k=3`.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
    /// Output directory (overrides `run.out_dir`).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Write the final state vector here.
    #[arg(long)]
    checkpoint: Option<PathBuf>,
    /// Co-evolve the exact oracle alongside the Trotter state.
    #[arg(long, value_enum)]
    oracle: Option<Switch>,
}

#[derive(Args)]
struct SweepArgs {
    /// Configs to run; each must set `run.mode`.
    #[arg(required = true)]
    configs: Vec<PathBuf>,
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
    /// Run every config once per value, e.g. `--vary control.k=1,3,5`.
    #[arg(long, value_name = "KEY=V1,V2,...")]
    vary: Option<String>,
    /// Parent directory; each run writes to its own subdirectory.
    #[arg(long, default_value = "out/sweep")]
    out: PathBuf,
    #[arg(long, value_enum)]
    oracle: Option<Switch>,
}

fn with_flags(mut set: Vec<String>, oracle: Option<Switch>, checkpoint: Option<&Path>) -> Vec<String> {
    if let Some(o) = oracle {
        set.push(format!("run.oracle={}", matches!(o, Switch::On)));
    }
    if let Some(p) = checkpoint {
        set.push(format!(
            "run.checkpoint={}",
            toml::Value::String(p.display().to_string())
        ));
    }
    set
}

fn run_one(mode: Mode, args: RunArgs) -> Result<Outcome> {
    let set = with_flags(args.set, args.oracle, args.checkpoint.as_deref());
    let cfg = RunConfig::load(&args.config, &set)?;
    let out = args.out.unwrap_or_else(|| PathBuf::from(&cfg.run.out_dir));
    dispatch(&cfg, mode, &out)
}

fn report(outcome: &Outcome) -> i32 {
    println!("{}", serde_json::to_string(outcome).expect("outcome serializes"));
    if let Some(e) = &outcome.halt {
        eprintln!("{}", error_record(e));
    }
    outcome.exit_code()
}

fn sweep(args: SweepArgs) -> Result<i32> {
    let set = with_flags(args.set, args.oracle, None);
    let mut jobs = Vec::new();
    for path in &args.configs {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Config {
            key: path.display().to_string(),
            reason: e.to_string(),
        })?;
        let name = path
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_else(|| "run".into());
        jobs.extend(runner::expand_sweep(&name, &text, &set, args.vary.as_deref())?);
    }
    let mut code = EXIT_OK;
    for (name, result) in runner::run_sweep(&jobs, &args.out) {
        let this = match result {
            Ok(outcome) => report(&outcome),
            Err(e) => {
                let mut rec = error_record(&e);
                rec["job"] = name.into();
                eprintln!("{rec}");
                exit_code(&e)
            }
        };
        code = code.max(this);
    }
    Ok(code)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(n) = runner::thread_cap() {
        // a second init only fails if a pool already exists
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    let result = match cli.command {
        Command::RunAdaptive(a) => run_one(Mode::RunAdaptive, a).map(|o| report(&o)),
        Command::RunFixed(a) => run_one(Mode::RunFixed, a).map(|o| report(&o)),
        Command::RunExact(a) => run_one(Mode::RunExact, a).map(|o| report(&o)),
        Command::ScalingStudy(a) => run_one(Mode::ScalingStudy, a).map(|o| report(&o)),
        Command::MagnusCheck(a) => run_one(Mode::MagnusCheck, a).map(|o| report(&o)),
        Command::Sweep(a) => sweep(a),
    };
    let code = result.unwrap_or_else(|e| {
        eprintln!("{}", error_record(&e));
        exit_code(&e)
    });
    ExitCode::from(code as u8)
}
