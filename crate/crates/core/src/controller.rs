//! The adaptive step-size loop: measure `H_[k](t, dt)` before and after a
//! candidate Trotter step, check the local and accumulated constraints, and
//! bisect on `dt` until a step is accepted.
//!
//! Energies are per site: `E = ⟨H_[k]⟩/L` and
//! `var = (⟨H_[k]²⟩ − ⟨H_[k]⟩²)/L`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hamiltonian::HamiltonianSpec;
use crate::magnus::{check_order, MagnusBuilder};
use crate::state::{magnetization, moments, prepare_initial, Axis, OracleSettings, StateVector, TrotterEngine};

/// Serialize infinite tolerances as `null`.
mod inf_as_null {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
        if v.is_finite() {
            s.serialize_some(v)
        } else {
            s.serialize_none()
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        Ok(Option::<f64>::deserialize(d)?.unwrap_or(f64::INFINITY))
    }
}

/// Per-site thresholds. `f64::INFINITY` disables a constraint.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ToleranceSet {
    #[serde(rename = "d_E", with = "inf_as_null")]
    pub d_e: f64,
    #[serde(with = "inf_as_null")]
    pub d_var: f64,
    #[serde(rename = "dg_E", with = "inf_as_null")]
    pub dg_e: f64,
    #[serde(with = "inf_as_null")]
    pub dg_var: f64,
}

impl ToleranceSet {
    pub fn disabled() -> Self {
        let inf = f64::INFINITY;
        Self {
            d_e: inf,
            d_var: inf,
            dg_e: inf,
            dg_var: inf,
        }
    }

    pub fn local(d_e: f64, d_var: f64) -> Self {
        Self {
            d_e,
            d_var,
            ..Self::disabled()
        }
    }

    pub fn global(dg_e: f64, dg_var: f64) -> Self {
        Self {
            dg_e,
            dg_var,
            ..Self::disabled()
        }
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("d_E", self.d_e),
            ("d_var", self.d_var),
            ("dg_E", self.dg_e),
            ("dg_var", self.dg_var),
        ] {
            if !(v > 0.0) {
                return Err(Error::InvalidParameter {
                    name,
                    reason: format!("tolerance must be positive, got {v}"),
                });
            }
        }
        Ok(())
    }
}

impl Default for ToleranceSet {
    fn default() -> Self {
        Self::disabled()
    }
}

/// What to do when even `dt_min` violates the constraints.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FreezeAction {
    #[default]
    Continue,
    Halt,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct StepPolicy {
    pub dt_min: f64,
    pub dt_max: f64,
    pub bisect_eps: f64,
    pub max_trials: usize,
    /// Magnus truncation order.
    pub k: usize,
    /// Order of the per-step Trotter error; fixed by the midpoint splitting.
    pub lambda: usize,
    pub on_freeze: FreezeAction,
}

impl Default for StepPolicy {
    fn default() -> Self {
        Self {
            dt_min: 0.1,
            dt_max: 0.7,
            bisect_eps: 0.01,
            max_trials: 20,
            k: 5,
            lambda: 3,
            on_freeze: FreezeAction::Continue,
        }
    }
}

impl StepPolicy {
    pub fn validate(&self) -> Result<()> {
        if !(self.dt_min > 0.0 && self.dt_min <= self.dt_max && self.dt_max.is_finite()) {
            return Err(Error::InvalidParameter {
                name: "dt_min",
                reason: format!("need 0 < dt_min <= dt_max, got {} and {}", self.dt_min, self.dt_max),
            });
        }
        if !(self.bisect_eps > 0.0) {
            return Err(Error::InvalidParameter {
                name: "bisect_eps",
                reason: format!("must be positive, got {}", self.bisect_eps),
            });
        }
        if self.max_trials == 0 {
            return Err(Error::InvalidParameter {
                name: "max_trials",
                reason: "must be at least 1".into(),
            });
        }
        if self.lambda != 3 {
            return Err(Error::InvalidParameter {
                name: "lambda",
                reason: format!(
                    "only the midpoint splitting (lambda = 3) is implemented, got {}",
                    self.lambda
                ),
            });
        }
        check_order(self.k)
    }

    /// `⌈log₂((dt_max − dt_min)/bisect_eps)⌉ + 1`, never below 2 when
    /// `dt_min < dt_max` (the fallback probe of `dt_min` always costs one).
    pub fn trial_bound(&self) -> usize {
        let span = self.dt_max - self.dt_min;
        if span <= 0.0 {
            return 1;
        }
        let halvings = (span / self.bisect_eps).log2().ceil().max(1.0) as usize;
        halvings + 1
    }
}

/// Running sums of the accepted per-step changes.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct GlobalAccumulator {
    pub sum_de: f64,
    pub sum_dvar: f64,
}

impl GlobalAccumulator {
    pub fn add(&mut self, c: &Candidate) {
        self.sum_de += c.de();
        self.sum_dvar += c.dvar();
    }
}

/// Result of one trial Trotter step.
#[derive(Debug, Clone)]
pub struct Candidate {
    pub dt: f64,
    pub e_i: f64,
    pub var_i: f64,
    pub e_f: f64,
    pub var_f: f64,
    pub state: StateVector,
}

impl Candidate {
    pub fn de(&self) -> f64 {
        self.e_f - self.e_i
    }

    pub fn dvar(&self) -> f64 {
        self.var_f - self.var_i
    }
}

/// One accepted step.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    /// Step index, starting at 1.
    pub m: usize,
    /// Time at the end of the step.
    pub t: f64,
    pub dt: f64,
    pub trials: usize,
    pub frozen: bool,
    pub e_i: f64,
    pub e_f: f64,
    pub var_i: f64,
    pub var_f: f64,
    pub cum_de: f64,
    pub cum_dvar: f64,
    pub mx: f64,
    pub mz: f64,
    pub exact_mx: Option<f64>,
    pub exact_mz: Option<f64>,
}

/// Aggregates over a finished run.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct RunSummary {
    pub steps: usize,
    pub final_t: f64,
    pub total_trials: usize,
    pub mean_trials: f64,
    pub max_trials: usize,
    pub frozen_steps: usize,
    pub max_norm_drift: f64,
    pub halted: bool,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct TraceLog {
    pub records: Vec<StepRecord>,
    pub summary: RunSummary,
    /// Trotterized state after the last accepted step (the exact state for
    /// oracle-only runs).
    pub final_state: Option<StateVector>,
}

impl TraceLog {
    fn push(&mut self, record: StepRecord, norm_drift: f64) {
        let s = &mut self.summary;
        s.steps += 1;
        s.final_t = record.t;
        s.total_trials += record.trials;
        s.mean_trials = s.total_trials as f64 / s.steps as f64;
        s.max_trials = s.max_trials.max(record.trials);
        s.frozen_steps += record.frozen as usize;
        s.max_norm_drift = s.max_norm_drift.max(norm_drift);
        self.records.push(record);
    }

    pub fn times(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.t).collect()
    }

    pub fn steps(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.dt).collect()
    }
}

/// `true` iff every enabled local and accumulated bound holds strictly.
pub fn constraints_ok(e_i: f64, var_i: f64, e_f: f64, var_f: f64, acc: &GlobalAccumulator, tol: &ToleranceSet) -> bool {
    let de = e_f - e_i;
    let dvar = var_f - var_i;
    // comparisons against +inf pass for any finite value
    de.abs() < tol.d_e
        && dvar.abs() < tol.d_var
        && (acc.sum_de + de).abs() < tol.dg_e
        && (acc.sum_dvar + dvar).abs() < tol.dg_var
}

/// When the loop stops.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopCondition {
    Steps(usize),
    /// Stop once `t ≥ t_final`; the last step is not clamped.
    FinalTime(f64),
}

impl StopCondition {
    fn done(&self, steps: usize, t: f64) -> bool {
        match *self {
            StopCondition::Steps(n) => steps >= n,
            StopCondition::FinalTime(tf) => t >= tf - 1e-12,
        }
    }
}

/// Outcome of the step search at one time.
#[derive(Debug, Clone)]
pub struct Selection {
    pub candidate: Candidate,
    pub trials: usize,
    pub frozen: bool,
}

/// Engine plus memoized generator builder for one Hamiltonian.
#[derive(Debug)]
pub struct Simulator {
    engine: TrotterEngine,
    builder: MagnusBuilder,
}

impl Simulator {
    pub fn new(spec: &HamiltonianSpec) -> Result<Self> {
        spec.validate()?;
        let engine = TrotterEngine::new(spec)?;
        let builder = MagnusBuilder::new(spec, engine.static_operators().clone());
        Ok(Self { engine, builder })
    }

    pub fn engine(&self) -> &TrotterEngine {
        &self.engine
    }

    pub fn builder(&self) -> &MagnusBuilder {
        &self.builder
    }

    pub fn spec(&self) -> &HamiltonianSpec {
        self.engine.spec()
    }

    /// `(E, var)` of `H_[k](t, dt)` on `state`.
    pub fn measure(&self, state: &StateVector, t: f64, dt: f64, k: usize) -> Result<(f64, f64)> {
        let h = self.builder.build(t, dt, k)?;
        energy_moments(&h.operator, state)
    }

    /// Measure, step, measure again with the same `H_[k](t, dt)`. The input
    /// state is not modified.
    pub fn evaluate_candidate(&self, state: &StateVector, t: f64, dt: f64, k: usize) -> Result<Candidate> {
        let h = self.builder.build(t, dt, k)?;
        let (e_i, var_i) = energy_moments(&h.operator, state)?;
        let next = self.engine.apply_trotter_step(state, t, dt)?;
        let (e_f, var_f) = energy_moments(&h.operator, &next)?;
        Ok(Candidate {
            dt,
            e_i,
            var_i,
            e_f,
            var_f,
            state: next,
        })
    }

    /// Bisection search for the largest acceptable step at time `t`.
    pub fn select_step(
        &self,
        state: &StateVector,
        t: f64,
        acc: &GlobalAccumulator,
        tol: &ToleranceSet,
        policy: &StepPolicy,
    ) -> Result<Selection> {
        let passes = |c: &Candidate| constraints_ok(c.e_i, c.var_i, c.e_f, c.var_f, acc, tol);
        let mut trials = 1;
        let first = self.evaluate_candidate(state, t, policy.dt_max, policy.k)?;
        if passes(&first) {
            return Ok(Selection {
                candidate: first,
                trials,
                frozen: false,
            });
        }
        let mut hi = policy.dt_max;
        let mut lo: Option<Candidate> = None;
        let mut min_probe: Option<Candidate> = (policy.dt_min == policy.dt_max).then_some(first);
        while trials < policy.max_trials && min_probe.is_none() {
            let probe = match &lo {
                Some(pass) if hi - pass.dt <= policy.bisect_eps => break,
                Some(pass) => 0.5 * (pass.dt + hi),
                None if hi - policy.dt_min <= 2.0 * policy.bisect_eps => policy.dt_min,
                None => 0.5 * (policy.dt_min + hi),
            };
            let c = self.evaluate_candidate(state, t, probe, policy.k)?;
            trials += 1;
            let ok = passes(&c);
            if probe == policy.dt_min {
                if ok {
                    lo = Some(c);
                } else {
                    min_probe = Some(c);
                }
                break;
            }
            if ok {
                lo = Some(c);
            } else {
                hi = probe;
            }
        }
        if let Some(candidate) = lo {
            return Ok(Selection {
                candidate,
                trials,
                frozen: false,
            });
        }
        let candidate = match min_probe {
            Some(c) => c,
            None => {
                trials += 1;
                let c = self.evaluate_candidate(state, t, policy.dt_min, policy.k)?;
                if passes(&c) {
                    return Ok(Selection {
                        candidate: c,
                        trials,
                        frozen: false,
                    });
                }
                c
            }
        };
        Ok(Selection {
            candidate,
            trials,
            frozen: true,
        })
    }

    fn record(
        &self,
        m: usize,
        t: f64,
        selection: &Selection,
        acc: &GlobalAccumulator,
        exact: Option<&StateVector>,
    ) -> StepRecord {
        let c = &selection.candidate;
        StepRecord {
            m,
            t,
            dt: c.dt,
            trials: selection.trials,
            frozen: selection.frozen,
            e_i: c.e_i,
            e_f: c.e_f,
            var_i: c.var_i,
            var_f: c.var_f,
            cum_de: acc.sum_de,
            cum_dvar: acc.sum_dvar,
            mx: magnetization(&c.state, Axis::X),
            mz: magnetization(&c.state, Axis::Z),
            exact_mx: exact.map(|s| magnetization(s, Axis::X)),
            exact_mz: exact.map(|s| magnetization(s, Axis::Z)),
        }
    }

    /// The adaptive loop from `prepare_initial(L, theta)` at `t = 0`.
    pub fn run_adaptive(
        &self,
        theta: f64,
        tol: &ToleranceSet,
        policy: &StepPolicy,
        stop: StopCondition,
        oracle: Option<&OracleSettings>,
    ) -> Result<TraceLog> {
        tol.validate()?;
        policy.validate()?;
        let mut state = prepare_initial(self.spec().num_sites, theta)?;
        self.run_from(
            &mut state,
            0.0,
            |sim, s, t, acc| sim.select_step(s, t, acc, tol, policy),
            policy,
            stop,
            oracle,
        )
    }

    /// `n` midpoint steps of fixed `dt`, measured with `H_[k]` but never
    /// rejected.
    pub fn run_fixed(
        &self,
        theta: f64,
        dt: f64,
        n: usize,
        k: usize,
        oracle: Option<&OracleSettings>,
    ) -> Result<TraceLog> {
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(Error::InvalidParameter {
                name: "dt",
                reason: format!("must be positive, got {dt}"),
            });
        }
        check_order(k)?;
        let policy = StepPolicy {
            dt_min: dt,
            dt_max: dt,
            k,
            ..StepPolicy::default()
        };
        let mut state = prepare_initial(self.spec().num_sites, theta)?;
        self.run_from(
            &mut state,
            0.0,
            |sim, s, t, _| {
                Ok(Selection {
                    candidate: sim.evaluate_candidate(s, t, dt, k)?,
                    trials: 1,
                    frozen: false,
                })
            },
            &policy,
            StopCondition::Steps(n),
            oracle,
        )
    }

    /// Oracle-only trace on a uniform grid: every observable column comes
    /// from the exact state, and `E_i`/`E_f` measure `H_[k]` across each
    /// exact window.
    pub fn run_exact(&self, theta: f64, dt: f64, n: usize, k: usize, settings: &OracleSettings) -> Result<TraceLog> {
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(Error::InvalidParameter {
                name: "dt",
                reason: format!("must be positive, got {dt}"),
            });
        }
        check_order(k)?;
        let mut state = prepare_initial(self.spec().num_sites, theta)?;
        let mut acc = GlobalAccumulator::default();
        let mut log = TraceLog::default();
        let mut t = 0.0;
        for m in 1..=n {
            let h = self.builder.build(t, dt, k)?;
            let (e_i, var_i) = energy_moments(&h.operator, &state)?;
            let next = self.engine.exact_evolve(&state, t, t + dt, settings)?;
            let (e_f, var_f) = energy_moments(&h.operator, &next)?;
            let selection = Selection {
                candidate: Candidate {
                    dt,
                    e_i,
                    var_i,
                    e_f,
                    var_f,
                    state: next,
                },
                trials: 1,
                frozen: false,
            };
            acc.add(&selection.candidate);
            t = m as f64 * dt;
            let record = self.record(m, t, &selection, &acc, Some(&selection.candidate.state));
            state = selection.candidate.state;
            log.push(record, (state.norm_sqr() - 1.0).abs());
        }
        log.final_state = Some(state);
        Ok(log)
    }

    fn run_from<F>(
        &self,
        state: &mut StateVector,
        t0: f64,
        mut select: F,
        policy: &StepPolicy,
        stop: StopCondition,
        oracle: Option<&OracleSettings>,
    ) -> Result<TraceLog>
    where
        F: FnMut(&Self, &StateVector, f64, &GlobalAccumulator) -> Result<Selection>,
    {
        let mut exact = oracle.map(|_| state.clone());
        let mut acc = GlobalAccumulator::default();
        let mut log = TraceLog::default();
        let mut t = t0;
        while !stop.done(log.records.len(), t) {
            let selection = select(self, state, t, &acc)?;
            if selection.frozen && policy.on_freeze == FreezeAction::Halt {
                log.summary.halted = true;
                break;
            }
            let dt = selection.candidate.dt;
            if let (Some(phi), Some(settings)) = (exact.as_mut(), oracle) {
                *phi = self.engine.exact_evolve(phi, t, t + dt, settings)?;
            }
            acc.add(&selection.candidate);
            t += dt;
            let record = self.record(log.records.len() + 1, t, &selection, &acc, exact.as_ref());
            *state = selection.candidate.state;
            log.push(record, (state.norm_sqr() - 1.0).abs());
        }
        log.final_state = Some(state.clone());
        Ok(log)
    }
}

/// `(⟨H⟩/L, (⟨H²⟩ − ⟨H⟩²)/L)`.
pub fn energy_moments(h: &crate::pauli::PauliOperator, state: &StateVector) -> Result<(f64, f64)> {
    let l = state.num_sites() as f64;
    let (mean, second) = moments(h, state)?;
    Ok((mean / l, (second - mean * mean) / l))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn strong_field(l: usize) -> HamiltonianSpec {
        HamiltonianSpec::driven_ising(l, 1.0, 3.0, 0.5, 0.8, 30.0)
    }

    #[test]
    fn disabled_tolerances_always_pass() {
        let acc = GlobalAccumulator {
            sum_de: 1e6,
            sum_dvar: -1e6,
        };
        assert!(constraints_ok(0.0, 0.0, 5.0, -5.0, &acc, &ToleranceSet::disabled()));
    }

    #[test]
    fn constraints_are_strict() {
        let acc = GlobalAccumulator::default();
        let tol = ToleranceSet::local(0.01, 1.0);
        assert!(!constraints_ok(0.0, 0.0, 0.01, 0.0, &acc, &tol));
        assert!(constraints_ok(0.0, 0.0, 0.0099, 0.0, &acc, &tol));
        let g = ToleranceSet::global(0.01, 0.02);
        let acc = GlobalAccumulator {
            sum_de: 0.008,
            sum_dvar: 0.0,
        };
        assert!(!constraints_ok(0.0, 0.0, 0.003, 0.0, &acc, &g));
        assert!(constraints_ok(0.0, 0.0, -0.015, 0.0, &acc, &g));
    }

    #[test]
    fn policy_validation() {
        assert!(StepPolicy::default().validate().is_ok());
        let bad = StepPolicy {
            dt_min: 0.8,
            ..StepPolicy::default()
        };
        assert!(bad.validate().is_err());
        let bad = StepPolicy {
            k: 2,
            ..StepPolicy::default()
        };
        assert_eq!(bad.validate(), Err(Error::UnsupportedTruncation(2)));
        assert!(ToleranceSet::local(0.0, 1.0).validate().is_err());
        assert_eq!(StepPolicy::default().trial_bound(), 7);
    }

    #[test]
    fn open_tolerances_take_dt_max_once() {
        let sim = Simulator::new(&strong_field(4)).unwrap();
        let log = sim
            .run_adaptive(
                2.0,
                &ToleranceSet::disabled(),
                &StepPolicy::default(),
                StopCondition::Steps(3),
                None,
            )
            .unwrap();
        assert_eq!(log.records.len(), 3);
        for r in &log.records {
            assert_eq!(r.trials, 1);
            assert_eq!(r.dt, 0.7);
            assert!(!r.frozen);
        }
        assert!((log.summary.final_t - 2.1).abs() < 1e-12);
    }

    #[test]
    fn single_step_equals_plain_trotter_step() {
        let spec = strong_field(4);
        let sim = Simulator::new(&spec).unwrap();
        let log = sim
            .run_adaptive(
                2.0,
                &ToleranceSet::disabled(),
                &StepPolicy::default(),
                StopCondition::Steps(1),
                None,
            )
            .unwrap();
        let psi = sim
            .engine()
            .apply_trotter_step(&prepare_initial(4, 2.0).unwrap(), 0.0, 0.7)
            .unwrap();
        assert_eq!(log.records[0].mx, magnetization(&psi, Axis::X));
    }

    #[test]
    fn stationary_state_without_transverse_field() {
        let spec = HamiltonianSpec::driven_ising(4, 1.0, 0.0, 0.5, 0.8, 30.0).with_constant_drives(1.0, 1.0);
        let sim = Simulator::new(&spec).unwrap();
        let psi = StateVector::basis(4, 0b0110);
        let c = sim.evaluate_candidate(&psi, 0.0, 0.3, 1).unwrap();
        assert_eq!(c.e_f, c.e_i);
        assert_eq!(c.var_i, 0.0);
        assert_eq!(c.var_f, 0.0);
    }

    #[test]
    fn rejected_candidates_leave_state_untouched() {
        let sim = Simulator::new(&strong_field(4)).unwrap();
        let psi = prepare_initial(4, 2.0).unwrap();
        let before = psi.clone();
        let tol = ToleranceSet::local(1e-9, 1e-9);
        let sel = sim
            .select_step(&psi, 0.0, &GlobalAccumulator::default(), &tol, &StepPolicy::default())
            .unwrap();
        assert!(sel.frozen);
        assert_eq!(sel.candidate.dt, 0.1);
        assert_eq!(psi, before);
    }

    #[test]
    fn trials_respect_bound() {
        let sim = Simulator::new(&strong_field(4)).unwrap();
        let psi = prepare_initial(4, 2.0).unwrap();
        let policy = StepPolicy::default();
        for d in [1e-9, 1e-4, 1e-3, 3e-3, 1e-2, 3e-2, 1e-1] {
            let tol = ToleranceSet::local(d, f64::INFINITY);
            let sel = sim
                .select_step(&psi, 0.0, &GlobalAccumulator::default(), &tol, &policy)
                .unwrap();
            assert!(sel.trials <= policy.trial_bound(), "d = {d}: {} trials", sel.trials);
        }
    }

    #[test]
    fn max_trials_forces_dt_min_probe() {
        let sim = Simulator::new(&strong_field(4)).unwrap();
        let psi = prepare_initial(4, 2.0).unwrap();
        let policy = StepPolicy {
            max_trials: 2,
            ..StepPolicy::default()
        };
        let tol = ToleranceSet::local(1e-9, 1e-9);
        let sel = sim
            .select_step(&psi, 0.0, &GlobalAccumulator::default(), &tol, &policy)
            .unwrap();
        assert_eq!(sel.trials, 3);
        assert!(sel.frozen);
        assert_eq!(sel.candidate.dt, policy.dt_min);
    }

    #[test]
    fn halt_on_freeze_stops_run() {
        let sim = Simulator::new(&strong_field(4)).unwrap();
        let policy = StepPolicy {
            on_freeze: FreezeAction::Halt,
            ..StepPolicy::default()
        };
        let log = sim
            .run_adaptive(
                2.0,
                &ToleranceSet::local(1e-9, 1e-9),
                &policy,
                StopCondition::Steps(5),
                None,
            )
            .unwrap();
        assert!(log.summary.halted);
        assert!(log.records.is_empty());
    }

    #[test]
    fn final_time_stop_does_not_clamp() {
        let sim = Simulator::new(&strong_field(4)).unwrap();
        let log = sim
            .run_adaptive(
                2.0,
                &ToleranceSet::disabled(),
                &StepPolicy::default(),
                StopCondition::FinalTime(1.0),
                None,
            )
            .unwrap();
        assert_eq!(log.records.len(), 2);
        assert!((log.summary.final_t - 1.4).abs() < 1e-12);
    }

    #[test]
    fn fixed_run_with_oracle() {
        let sim = Simulator::new(&strong_field(4)).unwrap();
        let log = sim
            .run_fixed(2.0, 0.01, 5, 3, Some(&OracleSettings::default()))
            .unwrap();
        assert_eq!(log.records.len(), 5);
        for r in &log.records {
            assert!((r.mx - r.exact_mx.unwrap()).abs() < 1e-3);
        }
        let exact = sim.run_exact(2.0, 0.01, 5, 3, &OracleSettings::default()).unwrap();
        assert_eq!(exact.records[4].mx, exact.records[4].exact_mx.unwrap());
        assert!((exact.records[4].mx - log.records[4].exact_mx.unwrap()).abs() < 1e-9);
    }

    #[test]
    fn tolerances_serialize_infinity_as_null() {
        let tol = ToleranceSet::global(0.01, 0.02);
        let json = serde_json::to_string(&tol).unwrap();
        assert_eq!(json, r#"{"d_E":null,"d_var":null,"dg_E":0.01,"dg_var":0.02}"#);
        let back: ToleranceSet = serde_json::from_str(&json).unwrap();
        assert_eq!(back, tol);
    }
}
