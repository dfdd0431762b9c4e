//! State vectors, the midpoint Trotter step, the exact-evolution oracle and
//! measurements.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::dense::{self, CMatrix, CVector};
use crate::error::{Error, Result};
use crate::hamiltonian::{build_static_operators, HamiltonianSpec, StaticOperators};
use crate::pauli::{site_bit, PauliOperator};

/// Largest system handled by the dense oracle.
pub const DENSE_ORACLE_CAP: usize = 8;

const HERMITIAN_TOL: f64 = 1e-10;

/// Amplitudes in the σᶻ basis. Bit `L-1-j` of the index is site `j`;
/// a set bit is spin down (σᶻ = -1).
#[derive(Debug, Clone, PartialEq)]
pub struct StateVector {
    num_sites: usize,
    amplitudes: Vec<Complex64>,
}

impl StateVector {
    pub fn basis(num_sites: usize, index: usize) -> Self {
        let mut amplitudes = vec![Complex64::default(); 1 << num_sites];
        amplitudes[index] = Complex64::new(1.0, 0.0);
        Self { num_sites, amplitudes }
    }

    pub fn from_amplitudes(num_sites: usize, amplitudes: Vec<Complex64>) -> Result<Self> {
        if amplitudes.len() != 1 << num_sites {
            return Err(Error::InvalidParameter {
                name: "amplitudes",
                reason: format!("expected {} entries, got {}", 1usize << num_sites, amplitudes.len()),
            });
        }
        Ok(Self { num_sites, amplitudes })
    }

    pub fn num_sites(&self) -> usize {
        self.num_sites
    }

    pub fn dim(&self) -> usize {
        self.amplitudes.len()
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amplitudes
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amplitudes.iter().map(|a| a.norm_sqr()).sum()
    }

    pub fn normalize(&mut self) {
        let n = self.norm_sqr().sqrt();
        self.amplitudes.iter_mut().for_each(|a| *a /= n);
    }

    /// `⟨self|other⟩`.
    pub fn inner(&self, other: &StateVector) -> Complex64 {
        self.amplitudes
            .iter()
            .zip(&other.amplitudes)
            .map(|(a, b)| a.conj() * b)
            .sum()
    }

    pub fn max_abs_diff(&self, other: &StateVector) -> f64 {
        max_diff(&self.amplitudes, &other.amplitudes)
    }

    pub fn to_dense(&self) -> CVector {
        CVector::from_column_slice(&self.amplitudes)
    }

    /// Binary dump: `L` as little-endian u32, then interleaved re/im f64 LE.
    pub fn write_checkpoint(&self, path: &Path) -> Result<()> {
        let mut w = BufWriter::new(File::create(path)?);
        w.write_all(&(self.num_sites as u32).to_le_bytes())?;
        for a in &self.amplitudes {
            w.write_all(&a.re.to_le_bytes())?;
            w.write_all(&a.im.to_le_bytes())?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_checkpoint(path: &Path) -> Result<Self> {
        let mut r = BufReader::new(File::open(path)?);
        let mut header = [0u8; 4];
        r.read_exact(&mut header)?;
        let num_sites = u32::from_le_bytes(header) as usize;
        if num_sites == 0 || num_sites > 30 {
            return Err(Error::Parse(format!("bad checkpoint header: {num_sites} sites")));
        }
        let mut buf = [0u8; 8];
        let mut amplitudes = Vec::with_capacity(1 << num_sites);
        for _ in 0..1usize << num_sites {
            r.read_exact(&mut buf)?;
            let re = f64::from_le_bytes(buf);
            r.read_exact(&mut buf)?;
            amplitudes.push(Complex64::new(re, f64::from_le_bytes(buf)));
        }
        Ok(Self { num_sites, amplitudes })
    }
}

fn max_diff(a: &[Complex64], b: &[Complex64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max)
}

/// Product state `exp(-iθ Σσˣ)|↓…↓⟩`.
pub fn prepare_initial(num_sites: usize, theta: f64) -> Result<StateVector> {
    if !(2..=30).contains(&num_sites) {
        return Err(Error::InvalidParameter {
            name: "L",
            reason: format!("must lie in 2..=30, got {num_sites}"),
        });
    }
    // exp(-iθσˣ)|↓⟩ = cosθ|↓⟩ - i sinθ|↑⟩
    let down = Complex64::new(theta.cos(), 0.0);
    let up = Complex64::new(0.0, -theta.sin());
    let dim = 1usize << num_sites;
    let amplitudes = (0..dim)
        .map(|b| {
            let downs = (b as u64).count_ones() as i32;
            down.powi(downs) * up.powi(num_sites as i32 - downs)
        })
        .collect();
    Ok(StateVector { num_sites, amplitudes })
}

/// Which magnetization to measure.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Axis {
    X,
    Z,
}

/// `⟨Σ_j σ^α_j⟩ / L`.
pub fn magnetization(state: &StateVector, axis: Axis) -> f64 {
    let l = state.num_sites;
    let amps = &state.amplitudes;
    let total: f64 = match axis {
        Axis::Z => amps
            .iter()
            .enumerate()
            .map(|(b, a)| {
                let downs = (b as u64).count_ones() as f64;
                a.norm_sqr() * (l as f64 - 2.0 * downs)
            })
            .sum(),
        Axis::X => (0..l)
            .map(|j| {
                let m = site_bit(l, j) as usize;
                amps.iter()
                    .enumerate()
                    .map(|(b, a)| (amps[b ^ m].conj() * a).re)
                    .sum::<f64>()
            })
            .sum(),
    };
    total / l as f64
}

fn check_hermitian(op: &PauliOperator) -> Result<()> {
    let residual = op.hermiticity_residual();
    if residual > HERMITIAN_TOL {
        return Err(Error::NotHermitian { residual });
    }
    Ok(())
}

fn check_dims(op: &PauliOperator, state: &StateVector) -> Result<()> {
    if op.num_sites() != state.num_sites {
        return Err(Error::Dimension {
            left: op.num_sites(),
            right: state.num_sites,
        });
    }
    Ok(())
}

/// `⟨ψ|O|ψ⟩` and `⟨ψ|O²|ψ⟩ = ‖O|ψ⟩‖²` from a single application of `O`.
pub fn moments(op: &PauliOperator, state: &StateVector) -> Result<(f64, f64)> {
    check_dims(op, state)?;
    check_hermitian(op)?;
    let applied = op.apply(&state.amplitudes);
    let mean: Complex64 = state.amplitudes.iter().zip(&applied).map(|(a, b)| a.conj() * b).sum();
    assert!(
        mean.im.abs() < 1e-10 * (1.0 + mean.re.abs()),
        "hermitian expectation has imaginary part {}",
        mean.im
    );
    let second = applied.iter().map(|a| a.norm_sqr()).sum();
    Ok((mean.re, second))
}

pub fn expectation(op: &PauliOperator, state: &StateVector) -> Result<f64> {
    moments(op, state).map(|m| m.0)
}

pub fn second_moment(op: &PauliOperator, state: &StateVector) -> Result<f64> {
    moments(op, state).map(|m| m.1)
}

/// Convergence controls for the exact oracle.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OracleSettings {
    /// Stop when successive extrapolated results differ by less than this
    /// (max amplitude / matrix-entry difference).
    pub tol: f64,
    pub base_substeps: usize,
    pub max_substeps: usize,
}

impl Default for OracleSettings {
    fn default() -> Self {
        Self {
            tol: 1e-10,
            base_substeps: 4,
            max_substeps: 1 << 20,
        }
    }
}

impl OracleSettings {
    /// Tighter defaults for the dense propagator, whose matrix logarithm is
    /// divided by the window length.
    pub fn dense() -> Self {
        Self {
            tol: 1e-13,
            base_substeps: 2,
            max_substeps: 1 << 12,
        }
    }
}

trait Extrapolate: Sized {
    /// `self + (self - coarser) / denom`
    fn extrapolate(&self, coarser: &Self, denom: f64) -> Self;
    fn distance(&self, other: &Self) -> f64;
}

impl Extrapolate for Vec<Complex64> {
    fn extrapolate(&self, coarser: &Self, denom: f64) -> Self {
        self.iter().zip(coarser).map(|(f, c)| f + (f - c) / denom).collect()
    }

    fn distance(&self, other: &Self) -> f64 {
        max_diff(self, other)
    }
}

impl Extrapolate for CMatrix {
    fn extrapolate(&self, coarser: &Self, denom: f64) -> Self {
        self + (self - coarser) / Complex64::new(denom, 0.0)
    }

    fn distance(&self, other: &Self) -> f64 {
        dense::max_abs(&(self - other))
    }
}

const MAX_ROMBERG_COLUMNS: usize = 8;

/// Richardson-extrapolated doubling of a symmetric (even-order error) rule.
fn romberg<T: Extrapolate + Clone>(settings: &OracleSettings, mut rule: impl FnMut(usize) -> T) -> Result<T> {
    let mut n = settings.base_substeps.max(1);
    let mut prev: Vec<T> = vec![rule(n)];
    let mut last_change = f64::INFINITY;
    loop {
        n *= 2;
        if n > settings.max_substeps {
            return Err(Error::NoConvergence {
                max_substeps: settings.max_substeps,
                last_change,
            });
        }
        let mut row = vec![rule(n)];
        let cols = prev.len().min(MAX_ROMBERG_COLUMNS - 1);
        for i in 1..=cols {
            let denom = 4f64.powi(i as i32) - 1.0;
            let next = row[i - 1].extrapolate(&prev[i - 1], denom);
            row.push(next);
        }
        let best = row.last().expect("row is non-empty");
        last_change = best.distance(prev.last().expect("prev is non-empty"));
        if last_change < settings.tol {
            return Ok(row.pop().expect("row is non-empty"));
        }
        prev = row;
    }
}

/// Applies the Trotterized and exact propagators of one Hamiltonian.
#[derive(Debug, Clone)]
pub struct TrotterEngine {
    spec: HamiltonianSpec,
    ops: StaticOperators,
    /// Eigenvalue of `F` on each basis state.
    f_diagonal: Vec<f64>,
}

impl TrotterEngine {
    pub fn new(spec: &HamiltonianSpec) -> Result<Self> {
        let ops = build_static_operators(spec)?;
        let l = spec.num_sites;
        let bonds = spec.bonds();
        let spin = |b: usize, j: usize| if b as u64 & site_bit(l, j) == 0 { 1.0 } else { -1.0 };
        let f_diagonal = (0..1usize << l)
            .map(|b| {
                let zz: f64 = bonds.iter().map(|&(i, j)| spin(b, i) * spin(b, j)).sum();
                let z: f64 = (0..l).map(|j| spin(b, j)).sum();
                spec.j_z * zz + spec.h_z * z
            })
            .collect();
        Ok(Self {
            spec: *spec,
            ops,
            f_diagonal,
        })
    }

    pub fn spec(&self) -> &HamiltonianSpec {
        &self.spec
    }

    pub fn static_operators(&self) -> &StaticOperators {
        &self.ops
    }

    fn check_state(&self, state: &StateVector) -> Result<()> {
        if state.num_sites != self.spec.num_sites {
            return Err(Error::Dimension {
                left: self.spec.num_sites,
                right: state.num_sites,
            });
        }
        Ok(())
    }

    /// `exp(-i·angle·σˣ)` on every site.
    fn rotate_x(&self, amps: &mut [Complex64], angle: f64) {
        if angle == 0.0 {
            return;
        }
        let (c, s) = (angle.cos(), angle.sin());
        let mis = Complex64::new(0.0, -s);
        for j in 0..self.spec.num_sites {
            let m = 1usize << j;
            for block in (0..amps.len()).step_by(2 * m) {
                for b in block..block + m {
                    let a0 = amps[b];
                    let a1 = amps[b | m];
                    amps[b] = a0 * c + a1 * mis;
                    amps[b | m] = a0 * mis + a1 * c;
                }
            }
        }
    }

    /// `exp(-i·scale·F)`.
    fn phase_f(&self, amps: &mut [Complex64], scale: f64) {
        if scale == 0.0 {
            return;
        }
        for (a, &e) in amps.iter_mut().zip(&self.f_diagonal) {
            *a *= Complex64::from_polar(1.0, -scale * e);
        }
    }

    fn midpoint_step_in_place(&self, amps: &mut [Complex64], t: f64, dt: f64) {
        let mid = t + 0.5 * dt;
        let half_angle = self.spec.h_x * self.spec.g.value(mid) * dt * 0.5;
        self.rotate_x(amps, half_angle);
        self.phase_f(amps, self.spec.f.value(mid) * dt);
        self.rotate_x(amps, half_angle);
    }

    /// One step of the second-order midpoint splitting
    /// `e^{-i g G dt/2} e^{-i f F dt} e^{-i g G dt/2}`, drives at `t + dt/2`.
    pub fn trotter_step(&self, state: &mut StateVector, t: f64, dt: f64) -> Result<()> {
        self.check_state(state)?;
        self.midpoint_step_in_place(&mut state.amplitudes, t, dt);
        Ok(())
    }

    pub fn apply_trotter_step(&self, state: &StateVector, t: f64, dt: f64) -> Result<StateVector> {
        let mut out = state.clone();
        self.trotter_step(&mut out, t, dt)?;
        Ok(out)
    }

    /// `n` equal midpoint Trotter substeps across `[t0, t1]`.
    pub fn midpoint_compose(&self, state: &StateVector, t0: f64, t1: f64, n: usize) -> Result<StateVector> {
        self.check_state(state)?;
        let mut out = state.clone();
        let h = (t1 - t0) / n as f64;
        for k in 0..n {
            self.midpoint_step_in_place(&mut out.amplitudes, t0 + k as f64 * h, h);
        }
        Ok(out)
    }

    /// Oracle state `U(t1, t0)|ψ⟩`: midpoint compositions with doubling
    /// substep counts, Richardson-extrapolated until converged.
    pub fn exact_evolve(
        &self,
        state: &StateVector,
        t0: f64,
        t1: f64,
        settings: &OracleSettings,
    ) -> Result<StateVector> {
        self.check_state(state)?;
        if t1 < t0 {
            return Err(Error::InvalidParameter {
                name: "t1",
                reason: format!("must not precede t0 ({t1} < {t0})"),
            });
        }
        if t1 == t0 {
            return Ok(state.clone());
        }
        let amplitudes = romberg(settings, |n| {
            let mut amps = state.amplitudes.clone();
            let h = (t1 - t0) / n as f64;
            for k in 0..n {
                self.midpoint_step_in_place(&mut amps, t0 + k as f64 * h, h);
            }
            amps
        })?;
        let mut out = StateVector {
            num_sites: state.num_sites,
            amplitudes,
        };
        out.normalize();
        Ok(out)
    }

    fn dense_parts(&self) -> Result<(CMatrix, CMatrix)> {
        if self.spec.num_sites > DENSE_ORACLE_CAP {
            return Err(Error::DenseCap {
                sites: self.spec.num_sites,
                cap: DENSE_ORACLE_CAP,
            });
        }
        Ok((
            self.ops.g.to_dense_capped(DENSE_ORACLE_CAP)?,
            self.ops.f.to_dense_capped(DENSE_ORACLE_CAP)?,
        ))
    }

    /// Dense `H(t)`.
    pub fn dense_hamiltonian(&self, t: f64) -> Result<CMatrix> {
        let (g, f) = self.dense_parts()?;
        Ok(g * Complex64::new(self.spec.g.value(t), 0.0) + f * Complex64::new(self.spec.f.value(t), 0.0))
    }

    /// Dense propagator `U(t1, t0)` from exponential-midpoint compositions
    /// `Π exp(-i H(t_k + h/2) h)`, Richardson-extrapolated.
    pub fn dense_propagator(&self, t0: f64, t1: f64, settings: &OracleSettings) -> Result<CMatrix> {
        let (g, f) = self.dense_parts()?;
        let dim = g.nrows();
        if self.spec.g.is_constant() && self.spec.f.is_constant() {
            let h = g * Complex64::new(self.spec.g.value(t0), 0.0) + f * Complex64::new(self.spec.f.value(t0), 0.0);
            return Ok(dense::expm_hermitian(&h, t1 - t0));
        }
        romberg(settings, |n| {
            let h = (t1 - t0) / n as f64;
            let mut u = CMatrix::identity(dim, dim);
            for k in 0..n {
                let mid = t0 + (k as f64 + 0.5) * h;
                let hm =
                    &g * Complex64::new(self.spec.g.value(mid), 0.0) + &f * Complex64::new(self.spec.f.value(mid), 0.0);
                u = dense::expm_hermitian(&hm, h) * u;
            }
            u
        })
    }

    /// Dense-mode oracle state.
    pub fn exact_evolve_dense(
        &self,
        state: &StateVector,
        t0: f64,
        t1: f64,
        settings: &OracleSettings,
    ) -> Result<StateVector> {
        self.check_state(state)?;
        let u = self.dense_propagator(t0, t1, settings)?;
        let v = u * state.to_dense();
        StateVector::from_amplitudes(state.num_sites, v.iter().copied().collect())
    }
}
