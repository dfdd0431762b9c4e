//! Truncated Magnus generators `H_[k](t, dt)` of one time window.
//!
//! With hermitian moment operators `h_n = i·A_n/dt` the odd Magnus terms
//! become
//!
//! ```text
//! H_[1] = h1
//! H_[3] = H_[1] + (i·dt/6)·[h1, h2]
//! H_[5] = H_[3] − (dt²/60)·[h1,[h1,h3]] + (dt²/60)·[h2,[h1,h2]]
//!               + (i·dt³/360)·[h1,[h1,[h1,h2]]] + (i·dt/30)·[h2,h3]
//! ```
//!
//! which is `i/dt·Σ Ω_n` with every power of `dt` pulled out of the
//! commutators, so pruning never sees the tiny raw `Ω_n` coefficients.

use std::collections::HashMap;
use std::sync::{Arc, Mutex};

use num_complex::Complex64;

use crate::dense::{self, CMatrix};
use crate::error::{Error, Result};
use crate::hamiltonian::{moment_operator, HamiltonianSpec, StaticOperators};
use crate::pauli::{commutator, PauliOperator};
use crate::state::{OracleSettings, TrotterEngine, DENSE_ORACLE_CAP};

/// Distance kept between window eigenphases and the log branch cut.
pub const BRANCH_MARGIN: f64 = 0.1;

const CACHE_LIMIT: usize = 512;

/// Hermitian generator of one window at truncation order `k`.
#[derive(Debug, Clone, PartialEq)]
pub struct PiecewiseHamiltonian {
    pub t: f64,
    pub dt: f64,
    pub k: usize,
    pub operator: PauliOperator,
}

pub fn check_order(k: usize) -> Result<()> {
    match k {
        1 | 3 | 5 => Ok(()),
        _ => Err(Error::UnsupportedTruncation(k)),
    }
}

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

/// Contributions `i/dt·Ω_n` for `n = 1..=k`, even orders included as
/// explicit zeros.
pub fn magnus_contributions(
    spec: &HamiltonianSpec,
    ops: &StaticOperators,
    t: f64,
    dt: f64,
    k: usize,
) -> Result<Vec<(usize, PauliOperator)>> {
    check_order(k)?;
    if !(dt > 0.0) {
        return Err(Error::InvalidParameter {
            name: "dt",
            reason: format!("must be positive, got {dt}"),
        });
    }
    let l = spec.num_sites;
    let h1 = moment_operator(spec, ops, t, dt, 1)?;
    let mut out = vec![(1, h1.clone())];
    if k == 1 {
        return Ok(out);
    }
    let h2 = moment_operator(spec, ops, t, dt, 2)?;
    let c12 = commutator(&h1, &h2)?;
    out.push((2, PauliOperator::zero(l)));
    out.push((3, c12.scale(c(0.0, dt / 6.0))));
    if k == 3 {
        return Ok(out);
    }
    let h3 = moment_operator(spec, ops, t, dt, 3)?;
    let c13 = commutator(&h1, &h3)?;
    let c1_13 = commutator(&h1, &c13)?;
    let c2_12 = commutator(&h2, &c12)?;
    let c1_12 = commutator(&h1, &c12)?;
    let c1_1_12 = commutator(&h1, &c1_12)?;
    let c23 = commutator(&h2, &h3)?;
    let dt2 = dt * dt;
    let omega5 = c1_13
        .scale_real(-dt2 / 60.0)
        .add_scaled(&c2_12, c(dt2 / 60.0, 0.0))?
        .add_scaled(&c1_1_12, c(0.0, dt2 * dt / 360.0))?
        .add_scaled(&c23, c(0.0, dt / 30.0))?;
    out.push((4, PauliOperator::zero(l)));
    out.push((5, omega5));
    Ok(out)
}

pub fn build_piecewise_hamiltonian(
    spec: &HamiltonianSpec,
    ops: &StaticOperators,
    t: f64,
    dt: f64,
    k: usize,
) -> Result<PiecewiseHamiltonian> {
    let mut operator = PauliOperator::zero(spec.num_sites);
    for (_, part) in magnus_contributions(spec, ops, t, dt, k)? {
        operator = operator.add(&part)?;
    }
    // the anti-hermitian part is rounding noise; drop it
    let operator = operator.add(&operator.adjoint())?.scale_real(0.5);
    Ok(PiecewiseHamiltonian { t, dt, k, operator })
}

/// Per-run memoizing builder keyed on `(t, dt, k)`.
#[derive(Debug)]
pub struct MagnusBuilder {
    spec: HamiltonianSpec,
    ops: StaticOperators,
    cache: Mutex<HashMap<(u64, u64, usize), Arc<PiecewiseHamiltonian>>>,
}

impl MagnusBuilder {
    pub fn new(spec: &HamiltonianSpec, ops: StaticOperators) -> Self {
        Self {
            spec: *spec,
            ops,
            cache: Mutex::new(HashMap::new()),
        }
    }

    pub fn build(&self, t: f64, dt: f64, k: usize) -> Result<Arc<PiecewiseHamiltonian>> {
        let key = (t.to_bits(), dt.to_bits(), k);
        if let Some(h) = self.cache.lock().expect("cache lock").get(&key) {
            return Ok(Arc::clone(h));
        }
        let h = Arc::new(build_piecewise_hamiltonian(&self.spec, &self.ops, t, dt, k)?);
        let mut cache = self.cache.lock().expect("cache lock");
        if cache.len() >= CACHE_LIMIT {
            cache.clear();
        }
        cache.insert(key, Arc::clone(&h));
        Ok(h)
    }

    pub fn cached(&self) -> usize {
        self.cache.lock().expect("cache lock").len()
    }
}

/// `i·log U(t+dt, t)/dt` from the dense oracle propagator.
pub fn dense_h_infinity(engine: &TrotterEngine, t: f64, dt: f64, settings: &OracleSettings) -> Result<CMatrix> {
    let l = engine.spec().num_sites;
    if l > DENSE_ORACLE_CAP {
        return Err(Error::DenseCap {
            sites: l,
            cap: DENSE_ORACLE_CAP,
        });
    }
    // A wrapped eigenphase is invisible in U itself, so bound the spectrum
    // of the window-averaged Hamiltonian as well.
    let h1 = build_piecewise_hamiltonian(engine.spec(), engine.static_operators(), t, dt, 1)?;
    let radius = dense::spectral_norm(&h1.operator.to_dense_capped(DENSE_ORACLE_CAP)?);
    if radius * dt >= std::f64::consts::PI - BRANCH_MARGIN {
        return Err(Error::Branch { phase: radius * dt });
    }
    let u = engine.dense_propagator(t, t + dt, settings)?;
    let k = dense::unitary_generator(&u, BRANCH_MARGIN)? / c(dt, 0.0);
    let residual = dense::hermiticity_residual(&k);
    if residual > 1e-10 {
        return Err(Error::NotHermitian { residual });
    }
    Ok(dense::symmetrize(&k))
}

/// `‖H_[∞] − H_[k]‖₂` on a dense system.
pub fn truncation_error_norm(
    engine: &TrotterEngine,
    t: f64,
    dt: f64,
    k: usize,
    settings: &OracleSettings,
) -> Result<f64> {
    check_order(k)?;
    let h_inf = dense_h_infinity(engine, t, dt, settings)?;
    let hk = build_piecewise_hamiltonian(engine.spec(), engine.static_operators(), t, dt, k)?;
    let diff = h_inf - hk.operator.to_dense_capped(DENSE_ORACLE_CAP)?;
    Ok(dense::spectral_norm(&diff))
}
