//! Step-size scaling of the per-step changes and of the truncation error.
//!
//! For each `dt` and truncation order `k` one Trotter step is taken from the
//! exact state `φ(t)` and the changes of `⟨H_[k]⟩/L` and of the variance
//! density are recorded. On dense-sized systems the same change is measured
//! with the exact window generator `H_[∞]`, giving
//! `Δ = (E_f,∞ − E_i,∞) − (E_f,k − E_i,k)` and `‖H_[∞] − H_[k]‖₂`.

use serde::{Deserialize, Serialize};

use crate::controller::Simulator;
use crate::dense::{self, CMatrix};
use crate::error::{Error, Result};
use crate::magnus::{check_order, dense_h_infinity};
use crate::state::{prepare_initial, OracleSettings, StateVector, DENSE_ORACLE_CAP};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalingRow {
    pub k: usize,
    pub dt: f64,
    pub de: f64,
    pub dvar: f64,
    /// `None` when no dense generator is available at this `dt`.
    pub delta: Option<f64>,
    pub trunc_norm: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalingFit {
    pub k: usize,
    pub slope_de: f64,
    pub slope_dvar: f64,
    pub slope_delta: f64,
    pub slope_trunc: f64,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct ScalingTable {
    pub t: f64,
    pub rows: Vec<ScalingRow>,
    pub fits: Vec<ScalingFit>,
    /// Grid points dropped from the dense columns by the branch-cut guard.
    pub trimmed: Vec<f64>,
}

impl ScalingTable {
    pub fn fit(&self, k: usize) -> Option<&ScalingFit> {
        self.fits.iter().find(|f| f.k == k)
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("k,dt,dE,dVar,Delta,trunc_norm\n");
        let opt = |v: Option<f64>| v.map(|x| format!("{x:.16e}")).unwrap_or_default();
        for r in &self.rows {
            out.push_str(&format!(
                "{},{:.16e},{:.16e},{:.16e},{},{}\n",
                r.k,
                r.dt,
                r.de,
                r.dvar,
                opt(r.delta),
                opt(r.trunc_norm)
            ));
        }
        out
    }

    pub fn slopes_csv(&self) -> String {
        let mut out = String::from("k,slope_dE,slope_dVar,slope_Delta,slope_trunc_norm\n");
        for f in &self.fits {
            out.push_str(&format!(
                "{},{:.16e},{:.16e},{:.16e},{:.16e}\n",
                f.k, f.slope_de, f.slope_dvar, f.slope_delta, f.slope_trunc
            ));
        }
        out
    }
}

fn expect_dense(m: &CMatrix, v: &StateVector) -> f64 {
    let d = v.to_dense();
    (d.adjoint() * m * &d)[(0, 0)].re
}

/// Runs the study from `prepare_initial(L, theta)` evolved exactly to `t`.
/// Dense columns are filled only when `with_dense` is set and `L` fits the
/// dense oracle.
pub fn scaling_study(
    sim: &Simulator,
    theta: f64,
    t: f64,
    dt_grid: &[f64],
    k_list: &[usize],
    settings: &OracleSettings,
    with_dense: bool,
) -> Result<ScalingTable> {
    for &k in k_list {
        check_order(k)?;
    }
    if dt_grid.iter().any(|&dt| !(dt > 0.0 && dt.is_finite())) {
        return Err(Error::InvalidParameter {
            name: "dt_grid",
            reason: "every step must be positive and finite".into(),
        });
    }
    let spec = sim.spec();
    let l = spec.num_sites;
    let psi0 = prepare_initial(l, theta)?;
    let psi = sim.engine().exact_evolve(&psi0, 0.0, t, settings)?;
    let dense_ok = with_dense && l <= DENSE_ORACLE_CAP;
    let mut table = ScalingTable {
        t,
        ..ScalingTable::default()
    };
    // dt -> (E_f,∞ − E_i,∞, H_[∞])
    let mut generators: Vec<Option<(f64, CMatrix)>> = Vec::with_capacity(dt_grid.len());
    for &dt in dt_grid {
        if !dense_ok {
            generators.push(None);
            continue;
        }
        match dense_h_infinity(sim.engine(), t, dt, &OracleSettings::dense()) {
            Ok(h_inf) => {
                let next = sim.engine().apply_trotter_step(&psi, t, dt)?;
                let change = (expect_dense(&h_inf, &next) - expect_dense(&h_inf, &psi)) / l as f64;
                generators.push(Some((change, h_inf)));
            }
            Err(Error::Branch { .. }) => {
                table.trimmed.push(dt);
                generators.push(None);
            }
            Err(e) => return Err(e),
        }
    }
    for &k in k_list {
        for (&dt, generator) in dt_grid.iter().zip(&generators) {
            let c = sim.evaluate_candidate(&psi, t, dt, k)?;
            let (delta, trunc_norm) = match generator {
                Some((change_inf, h_inf)) => {
                    let hk = sim.builder().build(t, dt, k)?;
                    let diff = h_inf - hk.operator.to_dense_capped(DENSE_ORACLE_CAP)?;
                    (Some((change_inf - c.de()).abs()), Some(dense::spectral_norm(&diff)))
                }
                None => (None, None),
            };
            table.rows.push(ScalingRow {
                k,
                dt,
                de: c.de().abs(),
                dvar: c.dvar().abs(),
                delta,
                trunc_norm,
            });
        }
        let rows: Vec<&ScalingRow> = table.rows.iter().filter(|r| r.k == k).collect();
        let slope = |pick: &dyn Fn(&ScalingRow) -> Option<f64>| {
            let (xs, ys): (Vec<f64>, Vec<f64>) = rows.iter().filter_map(|r| pick(r).map(|y| (r.dt, y))).unzip();
            dense::loglog_slope(&xs, &ys)
        };
        table.fits.push(ScalingFit {
            k,
            slope_de: slope(&|r| Some(r.de)),
            slope_dvar: slope(&|r| Some(r.dvar)),
            slope_delta: slope(&|r| r.delta),
            slope_trunc: slope(&|r| r.trunc_norm),
        });
    }
    Ok(table)
}

/// Per-site `(E, var)` changes across one exact window, measured with
/// `H_[∞]`; both vanish up to oracle accuracy.
pub fn exact_window_changes(
    sim: &Simulator,
    state: &StateVector,
    t: f64,
    dt: f64,
    settings: &OracleSettings,
) -> Result<(f64, f64)> {
    let l = sim.spec().num_sites as f64;
    let h_inf = dense_h_infinity(sim.engine(), t, dt, &OracleSettings::dense())?;
    let next = sim.engine().exact_evolve(state, t, t + dt, settings)?;
    let moments = |v: &StateVector| {
        let d = v.to_dense();
        let hd = &h_inf * &d;
        let mean = (d.adjoint() * &hd)[(0, 0)].re;
        let second = hd.norm_squared();
        (mean / l, (second - mean * mean) / l)
    };
    let (e_i, v_i) = moments(state);
    let (e_f, v_f) = moments(&next);
    Ok((e_f - e_i, v_f - v_i))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dense::log_grid;
    use crate::hamiltonian::HamiltonianSpec;

    #[test]
    fn constant_drives_have_no_truncation_error() {
        let spec = HamiltonianSpec::driven_ising(4, 1.0, 1.0, 0.5, 4.0, 1.0).with_constant_drives(1.3, 0.7);
        let sim = Simulator::new(&spec).unwrap();
        let grid = log_grid(0.02, 0.2, 4);
        let table = scaling_study(&sim, 2.0, 0.3, &grid, &[1, 3, 5], &OracleSettings::default(), true).unwrap();
        for r in &table.rows {
            assert!(r.delta.unwrap() < 1e-12, "{r:?}");
            assert!(r.trunc_norm.unwrap() < 1e-11, "{r:?}");
        }
    }

    #[test]
    fn branch_points_are_trimmed() {
        let spec = HamiltonianSpec::driven_ising(4, 1.0, 3.0, 0.5, 0.8, 30.0);
        let sim = Simulator::new(&spec).unwrap();
        let table = scaling_study(&sim, 2.0, 0.0, &[0.05, 0.5], &[3], &OracleSettings::default(), true).unwrap();
        assert_eq!(table.trimmed, vec![0.5]);
        assert!(table.rows[0].delta.is_some());
        assert!(table.rows[1].delta.is_none());
        assert!(table.to_csv().lines().nth(2).unwrap().ends_with(",,"));
    }

    #[test]
    fn exact_windows_conserve_generator() {
        let spec = HamiltonianSpec::driven_ising(4, 1.0, 1.0, 0.5, 4.0, 1.0);
        let sim = Simulator::new(&spec).unwrap();
        let psi = prepare_initial(4, 2.0).unwrap();
        let (de, dv) = exact_window_changes(&sim, &psi, 0.2, 0.3, &OracleSettings::default()).unwrap();
        assert!(de.abs() < 1e-9 && dv.abs() < 1e-9, "{de} {dv}");
    }
}
