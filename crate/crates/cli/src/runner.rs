//! Mode dispatch and artifact output.

use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::Serialize;
use tada_core::dense::log_grid;
use tada_core::magnus::truncation_error_norm;
use tada_core::state::DENSE_ORACLE_CAP;
use tada_core::trace::write_trace;
use tada_core::{scaling_study, Error, Result, RunMetadata, Simulator, TraceLog};

use crate::config::{Mode, RunConfig};

pub const EXIT_OK: i32 = 0;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_NUMERICAL: i32 = 3;
pub const EXIT_FREEZE: i32 = 4;
const EXIT_OTHER: i32 = 1;

/// What one invocation produced.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Outcome {
    pub mode: String,
    pub out_dir: PathBuf,
    pub files: Vec<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub summary: Option<tada_core::RunSummary>,
    /// Set when the controller froze under `on_freeze = "halt"`; the trace
    /// up to that point is still written.
    #[serde(skip)]
    pub halt: Option<Error>,
}

impl Outcome {
    pub fn exit_code(&self) -> i32 {
        if self.halt.is_some() {
            EXIT_FREEZE
        } else {
            EXIT_OK
        }
    }
}

pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Config { .. }
        | Error::Parse(_)
        | Error::InvalidParameter { .. }
        | Error::UnsupportedOrder { .. }
        | Error::UnsupportedTruncation(_)
        | Error::DenseCap { .. } => EXIT_CONFIG,
        Error::FreezeHalt { .. } => EXIT_FREEZE,
        e if e.is_numerical() => EXIT_NUMERICAL,
        _ => EXIT_OTHER,
    }
}

/// Machine-readable error line for stderr.
pub fn error_record(e: &Error) -> serde_json::Value {
    let kind = match e {
        Error::Config { .. } => "config",
        Error::Parse(_) => "parse",
        Error::InvalidParameter { .. } => "invalid_parameter",
        Error::UnsupportedOrder { .. } | Error::UnsupportedTruncation(_) => "unsupported",
        Error::DenseCap { .. } => "dense_cap",
        Error::Branch { .. } => "branch",
        Error::NoConvergence { .. } => "no_convergence",
        Error::Decomposition(_) => "decomposition",
        Error::NotHermitian { .. } => "not_hermitian",
        Error::FreezeHalt { .. } => "freeze_halt",
        Error::Dimension { .. } => "dimension",
        Error::Io(_) => "io",
    };
    let mut rec = serde_json::json!({
        "error": kind,
        "exit_code": exit_code(e),
        "message": e.to_string(),
    });
    if let Error::Config { key, .. } = e {
        rec["key"] = key.clone().into();
    }
    rec
}

fn metadata(cfg: &RunConfig, mode: Mode) -> RunMetadata {
    let mut stored = cfg.clone();
    stored.run.mode = Some(mode);
    RunMetadata::new(mode.as_str(), stored.to_json_value())
}

fn write(path: PathBuf, text: &str, files: &mut Vec<PathBuf>) -> Result<()> {
    std::fs::write(&path, text)?;
    files.push(path);
    Ok(())
}

/// Runs `mode` on `cfg`, writing every artifact under `out_dir`.
pub fn dispatch(cfg: &RunConfig, mode: Mode, out_dir: &Path) -> Result<Outcome> {
    std::fs::create_dir_all(out_dir)?;
    let sim = Simulator::new(&cfg.spec())?;
    let mut outcome = Outcome {
        mode: mode.to_string(),
        out_dir: out_dir.to_path_buf(),
        files: Vec::new(),
        summary: None,
        halt: None,
    };
    let mut meta = metadata(cfg, mode);
    let trace = match mode {
        Mode::RunAdaptive => {
            let tol = cfg.tolerances()?;
            let policy = cfg.policy();
            let oracle = cfg.oracle();
            let log = sim.run_adaptive(cfg.initial.theta, &tol, &policy, cfg.stop()?, oracle.as_ref())?;
            meta.tolerances = Some(tol);
            meta.policy = Some(policy);
            meta.oracle = oracle;
            if log.summary.halted {
                outcome.halt = Some(Error::FreezeHalt {
                    t: log.summary.final_t,
                    dt_min: policy.dt_min,
                });
            }
            Some(log)
        }
        Mode::RunFixed => {
            let (dt, n) = cfg.grid()?;
            let oracle = cfg.oracle();
            meta.oracle = oracle;
            Some(sim.run_fixed(cfg.initial.theta, dt, n, cfg.control.k, oracle.as_ref())?)
        }
        Mode::RunExact => {
            let (dt, n) = cfg.grid()?;
            let settings = cfg.oracle_settings();
            meta.oracle = Some(settings);
            Some(sim.run_exact(cfg.initial.theta, dt, n, cfg.control.k, &settings)?)
        }
        Mode::ScalingStudy => {
            scaling(cfg, &sim, &mut meta, &mut outcome.files, out_dir)?;
            None
        }
        Mode::MagnusCheck => {
            magnus_check(cfg, &sim, &mut meta, &mut outcome.files, out_dir)?;
            None
        }
    };
    if let Some(log) = trace {
        finish_trace(cfg, &log, &mut meta, &mut outcome, out_dir)?;
    }
    Ok(outcome)
}

fn finish_trace(
    cfg: &RunConfig,
    log: &TraceLog,
    meta: &mut RunMetadata,
    outcome: &mut Outcome,
    out_dir: &Path,
) -> Result<()> {
    meta.summary = Some(log.summary.clone());
    write_trace(out_dir, "trace", log, meta)?;
    outcome.files.push(out_dir.join("trace.csv"));
    outcome.files.push(out_dir.join("trace.json"));
    if let (Some(path), Some(state)) = (&cfg.run.checkpoint, &log.final_state) {
        let path = PathBuf::from(path);
        state.write_checkpoint(&path)?;
        outcome.files.push(path);
    }
    outcome.summary = Some(log.summary.clone());
    Ok(())
}

fn scaling(
    cfg: &RunConfig,
    sim: &Simulator,
    meta: &mut RunMetadata,
    files: &mut Vec<PathBuf>,
    out_dir: &Path,
) -> Result<()> {
    let s = &cfg.scaling;
    let grid = log_grid(s.dt_min, s.dt_max, s.points);
    let table = scaling_study(
        sim,
        cfg.initial.theta,
        s.t,
        &grid,
        &s.k,
        &cfg.oracle_settings(),
        s.dense,
    )?;
    write(out_dir.join("scaling.csv"), &table.to_csv(), files)?;
    write(out_dir.join("slopes.csv"), &table.slopes_csv(), files)?;
    meta.oracle = Some(cfg.oracle_settings());
    meta.columns = ["k", "dt", "dE", "dVar", "Delta", "trunc_norm"]
        .map(String::from)
        .to_vec();
    meta.extra = Some(serde_json::json!({ "fits": table.fits, "trimmed": table.trimmed }));
    write(out_dir.join("scaling.json"), &meta.to_json(), files)
}

fn magnus_check(
    cfg: &RunConfig,
    sim: &Simulator,
    meta: &mut RunMetadata,
    files: &mut Vec<PathBuf>,
    out_dir: &Path,
) -> Result<()> {
    let s = &cfg.scaling;
    let dump_dt = s.dump_dt.unwrap_or(s.dt_max);
    let builder = sim.builder();
    let mut terms = Vec::new();
    for &k in &s.k {
        let h = builder.build(s.t, dump_dt, k)?;
        write(out_dir.join(format!("h_k{k}.txt")), &h.operator.to_text(), files)?;
        terms.push(serde_json::json!({ "k": k, "terms": h.operator.len() }));
    }
    let mut trimmed = Vec::new();
    let dense = s.dense && sim.spec().num_sites <= DENSE_ORACLE_CAP;
    if dense {
        let mut csv = String::from("dt,k,norm\n");
        let settings = tada_core::OracleSettings::dense();
        for dt in log_grid(s.dt_min, s.dt_max, s.points) {
            for &k in &s.k {
                match truncation_error_norm(sim.engine(), s.t, dt, k, &settings) {
                    Ok(norm) => csv.push_str(&format!("{dt:.16e},{k},{norm:.16e}\n")),
                    Err(Error::Branch { .. }) => {
                        trimmed.push(dt);
                        break;
                    }
                    Err(e) => return Err(e),
                }
            }
        }
        write(out_dir.join("truncation.csv"), &csv, files)?;
    }
    meta.columns = ["dt", "k", "norm"].map(String::from).to_vec();
    meta.extra = Some(serde_json::json!({
        "t": s.t,
        "dump_dt": dump_dt,
        "term_counts": terms,
        "truncation_table": dense,
        "trimmed": trimmed,
    }));
    write(out_dir.join("magnus.json"), &meta.to_json(), files)
}

/// One independent job of a sweep.
#[derive(Debug, Clone)]
pub struct SweepJob {
    pub name: String,
    pub config: RunConfig,
}

/// Expands `key=v1,v2,...` into one job per value.
pub fn expand_sweep(name: &str, base_text: &str, overrides: &[String], vary: Option<&str>) -> Result<Vec<SweepJob>> {
    let Some(vary) = vary else {
        return Ok(vec![SweepJob {
            name: name.to_string(),
            config: RunConfig::from_toml_str(base_text, overrides)?,
        }]);
    };
    let (key, values) = vary.split_once('=').ok_or_else(|| Error::Config {
        key: vary.to_string(),
        reason: "--vary must look like section.key=v1,v2".into(),
    })?;
    values
        .split(',')
        .map(|v| {
            let mut all = overrides.to_vec();
            all.push(format!("{key}={v}"));
            Ok(SweepJob {
                name: format!("{name}_{}-{}", key.replace('.', "_"), v.trim()),
                config: RunConfig::from_toml_str(base_text, &all)?,
            })
        })
        .collect()
}

/// Runs jobs on a pool capped by `TADA_THREADS`; each job writes to
/// `<out>/<name>`.
pub fn run_sweep(jobs: &[SweepJob], out: &Path) -> Vec<(String, Result<Outcome>)> {
    let run = || {
        jobs.par_iter()
            .map(|job| {
                let result = job
                    .config
                    .run
                    .mode
                    .ok_or_else(|| Error::Config {
                        key: "run.mode".into(),
                        reason: "sweep jobs need an explicit mode".into(),
                    })
                    .and_then(|mode| dispatch(&job.config, mode, &out.join(&job.name)));
                (job.name.clone(), result)
            })
            .collect()
    };
    match thread_cap() {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map(|pool| pool.install(run))
            .unwrap_or_else(|_| run()),
        None => run(),
    }
}

/// `TADA_THREADS` when set to a positive integer.
pub fn thread_cap() -> Option<usize> {
    std::env::var("TADA_THREADS")
        .ok()?
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
}
