//! Run configuration: one TOML file per experiment plus `--set` overrides.
//!
//! ```toml
//! [model]
//! L = 10
//! J_z = 1.0
//! h_x = 1.0
//! h_z = 0.5
//!
//! [drive.g]
//! kind = "damped_cosine"
//! omega = 4.0
//! tau = 1.0
//! offset = 1.0
//!
//! [initial]
//! theta = 2.0
//!
//! [control]
//! scheme = "local"
//! d_E = 0.01
//! d_var = 0.02
//!
//! [run]
//! mode = "run-adaptive"
//! n_steps = 200
//! ```

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use tada_core::{
    Boundary, DriveSchedule, Error, FreezeAction, HamiltonianSpec, OracleSettings, Result, StepPolicy, StopCondition,
    ToleranceSet,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Mode {
    RunAdaptive,
    RunFixed,
    RunExact,
    ScalingStudy,
    MagnusCheck,
}

impl Mode {
    pub fn as_str(self) -> &'static str {
        match self {
            Mode::RunAdaptive => "run-adaptive",
            Mode::RunFixed => "run-fixed",
            Mode::RunExact => "run-exact",
            Mode::ScalingStudy => "scaling-study",
            Mode::MagnusCheck => "magnus-check",
        }
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Mode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Mode::deserialize(serde_json::Value::from(s)).map_err(|_| Error::Config {
            key: "run.mode".into(),
            reason: format!("unknown mode `{s}`"),
        })
    }
}

/// Which constraint families the controller enforces.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scheme {
    Local,
    Global,
    Both,
    Off,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    #[serde(rename = "L")]
    pub l: usize,
    #[serde(rename = "J_z")]
    pub j_z: f64,
    pub h_x: f64,
    pub h_z: f64,
    #[serde(default)]
    pub boundary: Boundary,
    /// System size used in the original study, kept as a note only.
    #[serde(rename = "original_L", default, skip_serializing_if = "Option::is_none")]
    pub original_l: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DriveConfig {
    pub g: DriveSchedule,
    pub f: DriveSchedule,
}

impl Default for DriveConfig {
    fn default() -> Self {
        Self {
            g: DriveSchedule::Constant { amplitude: 1.0 },
            f: DriveSchedule::Constant { amplitude: 1.0 },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct InitialConfig {
    pub theta: f64,
}

impl Default for InitialConfig {
    fn default() -> Self {
        Self { theta: 2.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ControlConfig {
    /// Inferred from the tolerances present when absent.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub scheme: Option<Scheme>,
    #[serde(rename = "d_E", skip_serializing_if = "Option::is_none")]
    pub d_e: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub d_var: Option<f64>,
    #[serde(rename = "dg_E", skip_serializing_if = "Option::is_none")]
    pub dg_e: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dg_var: Option<f64>,
    pub dt_min: f64,
    pub dt_max: f64,
    pub bisect_eps: f64,
    pub max_trials: usize,
    pub k: usize,
    pub lambda: usize,
    pub on_freeze: FreezeAction,
}

impl Default for ControlConfig {
    fn default() -> Self {
        let p = StepPolicy::default();
        Self {
            scheme: None,
            d_e: None,
            d_var: None,
            dg_e: None,
            dg_var: None,
            dt_min: p.dt_min,
            dt_max: p.dt_max,
            bisect_eps: p.bisect_eps,
            max_trials: p.max_trials,
            k: p.k,
            lambda: p.lambda,
            on_freeze: p.on_freeze,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunSection {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mode: Option<Mode>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub n_steps: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub t_final: Option<f64>,
    /// Step for fixed and exact runs.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dt: Option<f64>,
    pub oracle: bool,
    pub oracle_tol: f64,
    pub out_dir: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub checkpoint: Option<String>,
}

impl Default for RunSection {
    fn default() -> Self {
        Self {
            mode: None,
            n_steps: None,
            t_final: None,
            dt: None,
            oracle: false,
            oracle_tol: OracleSettings::default().tol,
            out_dir: "out".into(),
            checkpoint: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ScalingConfig {
    /// Window start; the state there comes from exact evolution.
    pub t: f64,
    pub dt_min: f64,
    pub dt_max: f64,
    /// Log-spaced grid points.
    pub points: usize,
    pub k: Vec<usize>,
    /// Fill the `H_[∞]` columns (needs `L ≤ 8`).
    pub dense: bool,
    /// Step at which `magnus-check` dumps the term lists; defaults to `dt_max`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dump_dt: Option<f64>,
}

impl Default for ScalingConfig {
    fn default() -> Self {
        Self {
            t: 0.0,
            dt_min: 0.02,
            dt_max: 0.3,
            points: 8,
            k: vec![1, 3, 5],
            dense: true,
            dump_dt: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub model: ModelConfig,
    #[serde(default)]
    pub drive: DriveConfig,
    #[serde(default)]
    pub initial: InitialConfig,
    #[serde(default)]
    pub control: ControlConfig,
    #[serde(default)]
    pub run: RunSection,
    #[serde(default)]
    pub scaling: ScalingConfig,
}

fn config_err(key: impl Into<String>, reason: impl Into<String>) -> Error {
    Error::Config {
        key: key.into(),
        reason: reason.into(),
    }
}

fn typed<'de, T: Deserialize<'de>, D: serde::Deserializer<'de>>(d: D) -> Result<T> {
    serde_path_to_error::deserialize(d).map_err(|e| {
        let path = e.path().to_string();
        config_err(
            if path == "." { "<root>".to_string() } else { path },
            e.inner().to_string(),
        )
    })
}

/// Parses `section.key=value`; the value is read as a TOML literal and
/// falls back to a bare string.
pub fn parse_override(text: &str) -> Result<(Vec<String>, toml::Value)> {
    let (key, raw) = text
        .split_once('=')
        .ok_or_else(|| config_err(text, "override must look like section.key=value"))?;
    let path: Vec<String> = key.trim().split('.').map(str::to_string).collect();
    if path.iter().any(|p| p.is_empty()) {
        return Err(config_err(key, "empty key segment"));
    }
    let raw = raw.trim();
    let value = toml::from_str::<toml::Table>(&format!("v = {raw}"))
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| toml::Value::String(raw.to_string()));
    Ok((path, value))
}

pub fn apply_override(root: &mut toml::Table, path: &[String], value: toml::Value) -> Result<()> {
    let (last, parents) = path.split_last().expect("non-empty path");
    let mut table = root;
    for (i, seg) in parents.iter().enumerate() {
        let entry = table
            .entry(seg.clone())
            .or_insert_with(|| toml::Value::Table(toml::Table::new()));
        table = entry
            .as_table_mut()
            .ok_or_else(|| config_err(path[..=i].join("."), "not a section"))?;
    }
    table.insert(last.clone(), value);
    Ok(())
}

impl RunConfig {
    /// Reads a TOML config, or the `config` object of a metadata sidecar
    /// when the file ends in `.json`.
    pub fn load(path: &Path, overrides: &[String]) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| config_err(path.display().to_string(), e.to_string()))?;
        if path.extension().is_some_and(|e| e == "json") {
            let mut cfg = Self::from_metadata_json(&text)?;
            if !overrides.is_empty() {
                let table = toml::Table::try_from(&cfg).map_err(|e| config_err("<root>", e.to_string()))?;
                cfg = Self::from_table(table, overrides)?;
            }
            return Ok(cfg);
        }
        Self::from_toml_str(&text, overrides)
    }

    pub fn from_toml_str(text: &str, overrides: &[String]) -> Result<Self> {
        let table: toml::Table = text
            .parse()
            .map_err(|e: toml::de::Error| config_err("<toml>", e.message()))?;
        Self::from_table(table, overrides)
    }

    fn from_table(mut table: toml::Table, overrides: &[String]) -> Result<Self> {
        for o in overrides {
            let (path, value) = parse_override(o)?;
            apply_override(&mut table, &path, value)?;
        }
        let cfg: RunConfig = typed(toml::Value::Table(table))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_metadata_json(text: &str) -> Result<Self> {
        let meta: serde_json::Value = serde_json::from_str(text).map_err(|e| config_err("<json>", e.to_string()))?;
        let config = meta
            .get("config")
            .cloned()
            .ok_or_else(|| config_err("config", "metadata has no `config` object"))?;
        let cfg: RunConfig = typed(config)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_json_value(&self) -> serde_json::Value {
        serde_json::to_value(self).expect("config serializes")
    }

    pub fn spec(&self) -> HamiltonianSpec {
        HamiltonianSpec {
            num_sites: self.model.l,
            j_z: self.model.j_z,
            h_x: self.model.h_x,
            h_z: self.model.h_z,
            g: self.drive.g,
            f: self.drive.f,
            boundary: self.model.boundary,
        }
    }

    pub fn scheme(&self) -> Scheme {
        let c = &self.control;
        self.control.scheme.unwrap_or(
            match (
                c.d_e.is_some() || c.d_var.is_some(),
                c.dg_e.is_some() || c.dg_var.is_some(),
            ) {
                (true, true) => Scheme::Both,
                (true, false) => Scheme::Local,
                (false, true) => Scheme::Global,
                (false, false) => Scheme::Off,
            },
        )
    }

    /// Tolerances of the active scheme; disabled families are infinite.
    pub fn tolerances(&self) -> Result<ToleranceSet> {
        let c = &self.control;
        let need =
            |v: Option<f64>, key: &str| v.ok_or_else(|| config_err(format!("control.{key}"), "required by the scheme"));
        let mut tol = ToleranceSet::disabled();
        let scheme = self.scheme();
        if matches!(scheme, Scheme::Local | Scheme::Both) {
            tol.d_e = need(c.d_e, "d_E")?;
            tol.d_var = need(c.d_var, "d_var")?;
        }
        if matches!(scheme, Scheme::Global | Scheme::Both) {
            tol.dg_e = need(c.dg_e, "dg_E")?;
            tol.dg_var = need(c.dg_var, "dg_var")?;
        }
        Ok(tol)
    }

    pub fn policy(&self) -> StepPolicy {
        let c = &self.control;
        StepPolicy {
            dt_min: c.dt_min,
            dt_max: c.dt_max,
            bisect_eps: c.bisect_eps,
            max_trials: c.max_trials,
            k: c.k,
            lambda: c.lambda,
            on_freeze: c.on_freeze,
        }
    }

    pub fn oracle(&self) -> Option<OracleSettings> {
        self.run.oracle.then(|| self.oracle_settings())
    }

    pub fn oracle_settings(&self) -> OracleSettings {
        OracleSettings {
            tol: self.run.oracle_tol,
            ..OracleSettings::default()
        }
    }

    pub fn stop(&self) -> Result<StopCondition> {
        match (self.run.n_steps, self.run.t_final) {
            (Some(n), None) => Ok(StopCondition::Steps(n)),
            (None, Some(t)) => Ok(StopCondition::FinalTime(t)),
            (Some(_), Some(_)) => Err(config_err("run.n_steps", "give either n_steps or t_final, not both")),
            (None, None) => Err(config_err("run.n_steps", "one of n_steps or t_final is required")),
        }
    }

    /// Step count and step for the uniform-grid modes.
    pub fn grid(&self) -> Result<(f64, usize)> {
        let dt = self
            .run
            .dt
            .ok_or_else(|| config_err("run.dt", "required for fixed and exact runs"))?;
        let n = match self.stop()? {
            StopCondition::Steps(n) => n,
            StopCondition::FinalTime(t) => (t / dt - 1e-9).ceil().max(0.0) as usize,
        };
        Ok((dt, n))
    }

    pub fn validate(&self) -> Result<()> {
        let finite = |key: &str, v: f64| {
            if v.is_finite() {
                Ok(())
            } else {
                Err(config_err(key, format!("must be finite, got {v}")))
            }
        };
        let positive = |key: &str, v: f64| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(config_err(key, format!("must be positive and finite, got {v}")))
            }
        };
        finite("initial.theta", self.initial.theta)?;
        self.spec().validate().map_err(|e| match e {
            Error::InvalidParameter { name, reason } => {
                let key = match name {
                    "g" | "f" => format!("drive.{name}"),
                    _ => format!("model.{name}"),
                };
                config_err(key, reason)
            }
            other => other,
        })?;
        let c = &self.control;
        for (key, v) in [
            ("control.d_E", c.d_e),
            ("control.d_var", c.d_var),
            ("control.dg_E", c.dg_e),
            ("control.dg_var", c.dg_var),
        ] {
            if let Some(v) = v {
                positive(key, v)?;
            }
        }
        self.tolerances()?;
        self.policy().validate().map_err(|e| match e {
            Error::InvalidParameter { name, reason } => config_err(format!("control.{name}"), reason),
            Error::UnsupportedTruncation(k) => config_err("control.k", format!("{k} is not one of 1, 3, 5")),
            other => other,
        })?;
        let r = &self.run;
        if let Some(t) = r.t_final {
            positive("run.t_final", t)?;
        }
        if let Some(dt) = r.dt {
            positive("run.dt", dt)?;
        }
        positive("run.oracle_tol", r.oracle_tol)?;
        if r.out_dir.is_empty() {
            return Err(config_err("run.out_dir", "must not be empty"));
        }
        let s = &self.scaling;
        finite("scaling.t", s.t)?;
        if s.t < 0.0 {
            return Err(config_err("scaling.t", "must not be negative"));
        }
        positive("scaling.dt_min", s.dt_min)?;
        positive("scaling.dt_max", s.dt_max)?;
        if s.dt_min >= s.dt_max {
            return Err(config_err("scaling.dt_max", "must exceed scaling.dt_min"));
        }
        if s.points < 2 {
            return Err(config_err("scaling.points", "need at least 2 points for a fit"));
        }
        if s.k.is_empty() {
            return Err(config_err("scaling.k", "must list at least one order"));
        }
        if let Some(&k) = s.k.iter().find(|k| ![1, 3, 5].contains(*k)) {
            return Err(config_err("scaling.k", format!("{k} is not one of 1, 3, 5")));
        }
        if let Some(dt) = s.dump_dt {
            positive("scaling.dump_dt", dt)?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const LOCAL_RUN: &str = r#"
[model]
L = 10
J_z = 1.0
h_x = 1.0
h_z = 0.5

[drive.g]
kind = "damped_cosine"
omega = 4.0
tau = 1.0
offset = 1.0

[initial]
theta = 2.0

[control]
scheme = "local"
d_E = 0.01
d_var = 0.02
dt_min = 0.01

[run]
mode = "run-adaptive"
n_steps = 200
"#;

    #[test]
    fn parses_and_defaults() {
        let cfg = RunConfig::from_toml_str(LOCAL_RUN, &[]).unwrap();
        assert_eq!(cfg.spec(), HamiltonianSpec::driven_ising(10, 1.0, 1.0, 0.5, 4.0, 1.0));
        assert_eq!(cfg.tolerances().unwrap(), ToleranceSet::local(0.01, 0.02));
        assert_eq!(cfg.policy().dt_max, 0.7);
        assert_eq!(cfg.run.mode, Some(Mode::RunAdaptive));
        assert_eq!(cfg.stop().unwrap(), StopCondition::Steps(200));
    }

    #[test]
    fn empty_control_disables_both_schemes() {
        let text = "[model]\nL = 4\nJ_z = 1.0\nh_x = 1.0\nh_z = 0.0\n[control]\n";
        let cfg = RunConfig::from_toml_str(text, &[]).unwrap();
        assert_eq!(cfg.scheme(), Scheme::Off);
        assert_eq!(cfg.tolerances().unwrap(), ToleranceSet::disabled());
        assert_eq!(cfg.policy(), StepPolicy::default());
    }

    #[test]
    fn scheme_inferred_from_tolerances() {
        let cfg = RunConfig::from_toml_str(LOCAL_RUN, &["control.scheme=both".into()]);
        assert!(matches!(cfg, Err(Error::Config { ref key, .. }) if key == "control.dg_E"));
        let text = LOCAL_RUN.replace("scheme = \"local\"\n", "dg_E = 0.03\ndg_var = 0.1\n");
        let cfg = RunConfig::from_toml_str(&text, &[]).unwrap();
        assert_eq!(cfg.scheme(), Scheme::Both);
    }

    #[test]
    fn errors_name_the_key() {
        let key_of = |text: &str, over: &[&str]| {
            let over: Vec<String> = over.iter().map(|s| s.to_string()).collect();
            match RunConfig::from_toml_str(text, &over) {
                Err(Error::Config { key, .. }) => key,
                other => panic!("expected config error, got {other:?}"),
            }
        };
        assert_eq!(key_of(LOCAL_RUN, &["control.bogus=1"]), "control.bogus");
        assert_eq!(key_of(LOCAL_RUN, &["model.h_x=nan"]), "model.h_x");
        assert_eq!(key_of(LOCAL_RUN, &["control.d_E=-1"]), "control.d_E");
        assert_eq!(key_of(LOCAL_RUN, &["control.k=4"]), "control.k");
        assert_eq!(key_of(LOCAL_RUN, &["model.L=1"]), "model.L");
        assert_eq!(key_of(LOCAL_RUN, &["drive.g.tau=0"]), "drive.g");
        assert_eq!(key_of(LOCAL_RUN, &["run.mode=fly"]), "run.mode");
        assert_eq!(key_of(LOCAL_RUN, &["control.dt_min=0.9"]), "control.dt_min");
        assert_eq!(key_of(LOCAL_RUN, &["model.J_z=\"one\""]), "model.J_z");
        assert_eq!(key_of("[model]\nL = 4\n", &[]), "model");
    }

    #[test]
    fn overrides_parse_literals() {
        let cfg = RunConfig::from_toml_str(
            LOCAL_RUN,
            &[
                "model.L=6".into(),
                "run.mode=run-fixed".into(),
                "scaling.k=[3, 5]".into(),
                "run.oracle=true".into(),
            ],
        )
        .unwrap();
        assert_eq!(cfg.model.l, 6);
        assert_eq!(cfg.run.mode, Some(Mode::RunFixed));
        assert_eq!(cfg.scaling.k, vec![3, 5]);
        assert!(cfg.oracle().is_some());
        assert!(parse_override("no-equals").is_err());
    }

    #[test]
    fn metadata_json_round_trips() {
        let cfg = RunConfig::from_toml_str(LOCAL_RUN, &[]).unwrap();
        let meta = serde_json::json!({ "mode": "run-adaptive", "config": cfg.to_json_value() });
        assert_eq!(RunConfig::from_metadata_json(&meta.to_string()).unwrap(), cfg);
    }

    #[test]
    fn grid_from_final_time() {
        let cfg = RunConfig::from_toml_str(LOCAL_RUN, &["run.n_steps=5".into(), "run.dt=0.2".into()]).unwrap();
        assert_eq!(cfg.grid().unwrap(), (0.2, 5));
        let text = LOCAL_RUN.replace("n_steps = 200", "t_final = 1.0\ndt = 0.2");
        assert_eq!(RunConfig::from_toml_str(&text, &[]).unwrap().grid().unwrap(), (0.2, 5));
    }
}
