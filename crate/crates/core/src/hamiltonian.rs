//! Driven Ising chain `H(t) = g(t)·G + f(t)·F` and the shifted-Legendre
//! moment operators built from it.
//!
//! `G = h_x Σ σˣ_j` and `F = J_z Σ σᶻ_j σᶻ_{j+1} + h_z Σ σᶻ_j` on a periodic
//! chain. On a two-site ring the bonds (0,1) and (1,0) coincide; only one is
//! kept.

use std::sync::OnceLock;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::pauli::{Pauli, PauliOperator};

/// Highest moment index `n` (for `A_n`) needed by fifth-order truncation.
pub const MAX_MOMENT_ORDER: usize = 3;

/// Default Gauss–Legendre node count for moment integrals.
pub const QUADRATURE_NODES: usize = 32;

/// Scalar drive multiplying one of the static operators.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum DriveSchedule {
    Constant {
        amplitude: f64,
    },
    /// `cos(ω t)·exp(-t/τ) + offset`
    DampedCosine {
        omega: f64,
        tau: f64,
        offset: f64,
    },
}

impl DriveSchedule {
    pub fn value(&self, t: f64) -> f64 {
        match *self {
            DriveSchedule::Constant { amplitude } => amplitude,
            DriveSchedule::DampedCosine { omega, tau, offset } => (omega * t).cos() * (-t / tau).exp() + offset,
        }
    }

    pub fn is_constant(&self) -> bool {
        matches!(self, DriveSchedule::Constant { .. })
    }

    pub fn validate(&self, name: &'static str) -> Result<()> {
        let finite = match *self {
            DriveSchedule::Constant { amplitude } => amplitude.is_finite(),
            DriveSchedule::DampedCosine { omega, tau, offset } => {
                if !(tau > 0.0) {
                    return Err(Error::InvalidParameter {
                        name,
                        reason: format!("tau must be positive, got {tau}"),
                    });
                }
                omega.is_finite() && tau.is_finite() && offset.is_finite()
            }
        };
        if !finite {
            return Err(Error::InvalidParameter {
                name,
                reason: "non-finite drive parameter".into(),
            });
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Boundary {
    #[default]
    Periodic,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HamiltonianSpec {
    pub num_sites: usize,
    pub j_z: f64,
    pub h_x: f64,
    pub h_z: f64,
    pub g: DriveSchedule,
    pub f: DriveSchedule,
    pub boundary: Boundary,
}

impl HamiltonianSpec {
    /// Transverse-field drive `g(t) = cos(ωt)e^{-t/τ} + 1` with static `f = 1`.
    pub fn driven_ising(num_sites: usize, j_z: f64, h_x: f64, h_z: f64, omega: f64, tau: f64) -> Self {
        Self {
            num_sites,
            j_z,
            h_x,
            h_z,
            g: DriveSchedule::DampedCosine {
                omega,
                tau,
                offset: 1.0,
            },
            f: DriveSchedule::Constant { amplitude: 1.0 },
            boundary: Boundary::Periodic,
        }
    }

    /// Same couplings with both drives frozen at the given values.
    pub fn with_constant_drives(mut self, g: f64, f: f64) -> Self {
        self.g = DriveSchedule::Constant { amplitude: g };
        self.f = DriveSchedule::Constant { amplitude: f };
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.num_sites < 2 || self.num_sites > 30 {
            return Err(Error::InvalidParameter {
                name: "L",
                reason: format!("must lie in 2..=30, got {}", self.num_sites),
            });
        }
        for (name, v) in [("J_z", self.j_z), ("h_x", self.h_x), ("h_z", self.h_z)] {
            if !v.is_finite() {
                return Err(Error::InvalidParameter {
                    name,
                    reason: "must be finite".into(),
                });
            }
        }
        self.g.validate("g")?;
        self.f.validate("f")
    }

    /// Nearest-neighbour bonds of the ring, without the duplicate at `L = 2`.
    pub fn bonds(&self) -> Vec<(usize, usize)> {
        let l = self.num_sites;
        if l == 2 {
            vec![(0, 1)]
        } else {
            (0..l).map(|j| (j, (j + 1) % l)).collect()
        }
    }
}

/// The two static pieces of the Hamiltonian.
#[derive(Debug, Clone, PartialEq)]
pub struct StaticOperators {
    pub g: PauliOperator,
    pub f: PauliOperator,
}

impl StaticOperators {
    /// `g·G + f·F`.
    pub fn combine(&self, g: f64, f: f64) -> PauliOperator {
        self.g
            .scale_real(g)
            .add(&self.f.scale_real(f))
            .expect("G and F share the site count")
    }
}

pub fn build_static_operators(spec: &HamiltonianSpec) -> Result<StaticOperators> {
    spec.validate()?;
    let l = spec.num_sites;
    let mut g = PauliOperator::zero(l);
    let mut f = PauliOperator::zero(l);
    for j in 0..l {
        g = g.add(&PauliOperator::single(l, j, Pauli::X, spec.h_x))?;
        f = f.add(&PauliOperator::single(l, j, Pauli::Z, spec.h_z))?;
    }
    for (a, b) in spec.bonds() {
        f = f.add(&PauliOperator::product(l, &[(a, Pauli::Z), (b, Pauli::Z)], spec.j_z))?;
    }
    Ok(StaticOperators { g, f })
}

/// Gauss–Legendre rule mapped to `[0, 1]`.
#[derive(Debug, Clone)]
pub struct GaussLegendre {
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

impl GaussLegendre {
    /// Nodes by Newton iteration on `P_n` from the Chebyshev initial guesses.
    pub fn new(n: usize) -> Self {
        assert!(n >= 1);
        let mut nodes = Vec::with_capacity(n);
        let mut weights = Vec::with_capacity(n);
        for i in 0..n {
            let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
            let mut dp = 0.0;
            for _ in 0..100 {
                let (p, d) = legendre_with_derivative(n, x);
                dp = d;
                let step = p / d;
                x -= step;
                if step.abs() < 1e-16 {
                    break;
                }
            }
            let (_, d) = legendre_with_derivative(n, x);
            dp = if d != 0.0 { d } else { dp };
            let w = 2.0 / ((1.0 - x * x) * dp * dp);
            // map [-1, 1] -> [0, 1]
            nodes.push(0.5 * (1.0 - x));
            weights.push(0.5 * w);
        }
        Self { nodes, weights }
    }

    /// Shared default 32-node rule.
    pub fn default_rule() -> &'static GaussLegendre {
        static RULE: OnceLock<GaussLegendre> = OnceLock::new();
        RULE.get_or_init(|| GaussLegendre::new(QUADRATURE_NODES))
    }

    pub fn integrate(&self, f: impl Fn(f64) -> f64) -> f64 {
        self.nodes.iter().zip(&self.weights).map(|(&x, &w)| w * f(x)).sum()
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }
}

/// Standard Legendre `P_n(u)` and its derivative on `[-1, 1]`.
fn legendre_with_derivative(n: usize, u: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = u;
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 1..n {
        let k = k as f64;
        let p2 = ((2.0 * k + 1.0) * u * p1 - k * p0) / (k + 1.0);
        p0 = p1;
        p1 = p2;
    }
    let n = n as f64;
    let d = n * (u * p1 - p0) / (u * u - 1.0);
    (p1, d)
}

/// Shifted Legendre polynomials `P_0 … P_{order-1}` on `[0, 1]`, stored as
/// monomial coefficients in `x` (lowest degree first).
#[derive(Debug, Clone, PartialEq)]
pub struct LegendreBasis {
    coefficients: Vec<Vec<f64>>,
}

impl LegendreBasis {
    pub fn new(order: usize) -> Self {
        let mut coefficients: Vec<Vec<f64>> = Vec::with_capacity(order);
        for n in 0..order {
            let next = match n {
                0 => vec![1.0],
                1 => vec![-1.0, 2.0],
                _ => {
                    // n P_n = (2n-1)(2x-1) P_{n-1} - (n-1) P_{n-2}
                    let m = (n - 1) as f64;
                    let prev = &coefficients[n - 1];
                    let prev2 = &coefficients[n - 2];
                    let mut c = vec![0.0; n + 1];
                    for (d, &a) in prev.iter().enumerate() {
                        c[d + 1] += (2.0 * m + 1.0) * 2.0 * a;
                        c[d] -= (2.0 * m + 1.0) * a;
                    }
                    for (d, &a) in prev2.iter().enumerate() {
                        c[d] -= m * a;
                    }
                    c.iter_mut().for_each(|v| *v /= m + 1.0);
                    c
                }
            };
            coefficients.push(next);
        }
        Self { coefficients }
    }

    pub fn order(&self) -> usize {
        self.coefficients.len()
    }

    pub fn coefficients(&self, n: usize) -> &[f64] {
        &self.coefficients[n]
    }

    pub fn eval(&self, n: usize, x: f64) -> f64 {
        self.coefficients[n].iter().rev().fold(0.0, |acc, &c| acc * x + c)
    }
}

fn moment_basis() -> &'static LegendreBasis {
    static BASIS: OnceLock<LegendreBasis> = OnceLock::new();
    BASIS.get_or_init(|| LegendreBasis::new(MAX_MOMENT_ORDER))
}

/// `∫₀¹ s(t + x·dt) P_{n-1}(x) dx` for an arbitrary scalar function.
pub fn legendre_moment_fn(s: impl Fn(f64) -> f64, t: f64, dt: f64, n: usize) -> Result<f64> {
    if n == 0 || n > MAX_MOMENT_ORDER {
        return Err(Error::UnsupportedOrder {
            order: n,
            max: MAX_MOMENT_ORDER,
        });
    }
    if !(dt > 0.0) {
        return Err(Error::InvalidParameter {
            name: "dt",
            reason: format!("must be positive, got {dt}"),
        });
    }
    let basis = moment_basis();
    Ok(GaussLegendre::default_rule().integrate(|x| s(t + x * dt) * basis.eval(n - 1, x)))
}

pub fn legendre_moment(sched: &DriveSchedule, t: f64, dt: f64, n: usize) -> Result<f64> {
    if let DriveSchedule::Constant { amplitude } = *sched {
        // exact: P_0 integrates to 1, higher orders to 0
        legendre_moment_fn(|_| 0.0, t, dt, n)?;
        return Ok(if n == 1 { amplitude } else { 0.0 });
    }
    legendre_moment_fn(|s| sched.value(s), t, dt, n)
}

/// Hermitian moment operator `(2n-1)·(m_g G + m_f F)`, so that
/// `A_n = -i·dt·moment_operator`.
pub fn moment_operator(
    spec: &HamiltonianSpec,
    ops: &StaticOperators,
    t: f64,
    dt: f64,
    n: usize,
) -> Result<PauliOperator> {
    let mg = legendre_moment(&spec.g, t, dt, n)?;
    let mf = legendre_moment(&spec.f, t, dt, n)?;
    let w = (2 * n - 1) as f64;
    Ok(ops.combine(w * mg, w * mf))
}

/// `A_n = -i(2n-1)·dt·∫₀¹ H(t + x·dt) P_{n-1}(x) dx` (anti-hermitian).
pub fn build_a(spec: &HamiltonianSpec, ops: &StaticOperators, t: f64, dt: f64, n: usize) -> Result<PauliOperator> {
    Ok(moment_operator(spec, ops, t, dt, n)?.scale(Complex64::new(0.0, -dt)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pauli::commutator;

    fn strong_field(l: usize) -> HamiltonianSpec {
        HamiltonianSpec::driven_ising(l, 1.0, 3.0, 0.5, 0.8, 30.0)
    }

    #[test]
    fn schedules_evaluate() {
        let g = DriveSchedule::DampedCosine {
            omega: 4.0,
            tau: 1.0,
            offset: 1.0,
        };
        assert!((g.value(0.0) - 2.0).abs() < 1e-15);
        let t: f64 = 0.7;
        assert!((g.value(t) - ((4.0 * t).cos() * (-t).exp() + 1.0)).abs() < 1e-15);
        assert_eq!(DriveSchedule::Constant { amplitude: 2.5 }.value(123.0), 2.5);
    }

    #[test]
    fn non_positive_tau_rejected() {
        let g = DriveSchedule::DampedCosine {
            omega: 4.0,
            tau: 0.0,
            offset: 1.0,
        };
        assert!(g.validate("g").is_err());
        let mut spec = strong_field(4);
        spec.g = g;
        assert!(build_static_operators(&spec).is_err());
        assert!(build_static_operators(&strong_field(1)).is_err());
    }

    #[test]
    fn two_site_ring_has_single_bond() {
        let spec = HamiltonianSpec::driven_ising(2, 1.0, 1.0, 0.0, 1.0, 1.0);
        let ops = build_static_operators(&spec).unwrap();
        assert_eq!(ops.f.len(), 1);
        assert_eq!(ops.f.word_coefficient("ZZ").unwrap(), Complex64::new(1.0, 0.0));
    }

    #[test]
    fn static_operator_term_counts() {
        let ops = build_static_operators(&strong_field(4)).unwrap();
        assert_eq!(ops.g.len(), 4);
        assert!(ops.g.iter().all(|(_, c)| c == Complex64::new(3.0, 0.0)));
        assert_eq!(ops.f.len(), 8);
        assert!(ops.g.is_hermitian(0.0) && ops.f.is_hermitian(0.0));
        assert!(ops.f.word_coefficient("ZIIZ").unwrap().re == 1.0);
    }

    #[test]
    fn g_and_f_do_not_commute() {
        let ops = build_static_operators(&strong_field(5)).unwrap();
        assert!(!commutator(&ops.g, &ops.f).unwrap().is_empty());
        let mut spec = strong_field(5);
        spec.h_x = 0.0;
        let ops = build_static_operators(&spec).unwrap();
        assert!(commutator(&ops.g, &ops.f).unwrap().is_empty());
    }

    #[test]
    fn shifted_legendre_polynomials() {
        let b = LegendreBasis::new(4);
        assert_eq!(b.coefficients(0), &[1.0]);
        assert_eq!(b.coefficients(1), &[-1.0, 2.0]);
        assert_eq!(b.coefficients(2), &[1.0, -6.0, 6.0]);
        assert_eq!(b.coefficients(3), &[-1.0, 12.0, -30.0, 20.0]);
    }

    #[test]
    fn legendre_orthogonality_under_quadrature() {
        let b = LegendreBasis::new(6);
        let q = GaussLegendre::default_rule();
        for m in 0..6 {
            for n in 0..6 {
                let v = (2 * n + 1) as f64 * q.integrate(|x| b.eval(m, x) * b.eval(n, x));
                let expect = if m == n { 1.0 } else { 0.0 };
                assert!((v - expect).abs() < 1e-12, "m={m} n={n} v={v}");
            }
        }
    }

    #[test]
    fn quadrature_is_exact_for_polynomials_to_degree_20() {
        let q = GaussLegendre::default_rule();
        for d in 0..=20 {
            let v = q.integrate(|x| x.powi(d));
            assert!((v - 1.0 / (d as f64 + 1.0)).abs() < 1e-12, "degree {d}");
        }
        assert!((q.nodes().iter().sum::<f64>() - 16.0).abs() < 1e-12);
    }

    #[test]
    fn constant_moments() {
        let c = DriveSchedule::Constant { amplitude: 1.7 };
        assert_eq!(legendre_moment(&c, 0.3, 0.2, 1).unwrap(), 1.7);
        assert_eq!(legendre_moment(&c, 0.3, 0.2, 2).unwrap(), 0.0);
        let v = legendre_moment_fn(|_| 1.7, 0.3, 0.2, 2).unwrap();
        assert!(v.abs() < 1e-15);
    }

    #[test]
    fn moment_order_and_dt_checked() {
        let c = DriveSchedule::Constant { amplitude: 1.0 };
        assert!(matches!(
            legendre_moment(&c, 0.0, 0.1, 4),
            Err(Error::UnsupportedOrder { .. })
        ));
        assert!(legendre_moment(&c, 0.0, 0.1, 0).is_err());
        assert!(legendre_moment(&c, 0.0, 0.0, 1).is_err());
    }

    #[test]
    fn constant_drive_a_operators() {
        let spec = strong_field(4).with_constant_drives(1.0, 1.0);
        let ops = build_static_operators(&spec).unwrap();
        assert!(build_a(&spec, &ops, 0.4, 0.3, 2).unwrap().is_empty());
        assert!(build_a(&spec, &ops, 0.4, 0.3, 3).unwrap().is_empty());
        let a1 = build_a(&spec, &ops, 0.4, 0.3, 1).unwrap();
        let expect = ops.combine(1.0, 1.0).scale(Complex64::new(0.0, -0.3));
        assert!(a1.max_coefficient_diff(&expect).unwrap() < 1e-15);
        // anti-hermitian
        assert!(a1.scale(Complex64::new(0.0, 1.0)).is_hermitian(1e-15));
    }

    #[test]
    fn late_time_moments_vanish() {
        let spec = strong_field(4);
        let ops = build_static_operators(&spec).unwrap();
        let (t, dt) = (20.0 * 30.0 + 1.0, 0.3);
        for n in [2, 3] {
            let a = build_a(&spec, &ops, t, dt, n).unwrap();
            assert!(a.norm1() < 1e-6 * dt, "n={n} norm={}", a.norm1());
        }
    }
}
