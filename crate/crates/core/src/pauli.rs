//! Sparse algebra over weighted sums of Pauli strings.
//!
//! A string on `L` sites is stored as a pair of bit masks `(x, z)` and denotes
//! the ordered product over sites of `X^x · Z^z`. A site carrying both bits is
//! therefore `X·Z = -i·Y`; the `-i` lives in the stored coefficient, so
//! multiplying two strings is a mask XOR plus a sign.
//!
//! Site `j` maps to bit `L - 1 - j` in both the masks and the computational
//! basis index, which makes site 0 the leftmost Kronecker factor. A Pauli word
//! such as `"XIZY"` reads left to right from site 0.

use std::collections::BTreeMap;
use std::fmt;

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{Error, Result};

/// Default magnitude below which coefficients are dropped.
pub const DEFAULT_PRUNE: f64 = 1e-14;

/// Default site cap for dense rendering.
pub const DENSE_CAP: usize = 10;

/// Largest supported site count for mask storage.
pub const MAX_SITES: usize = 63;

const I: Complex64 = Complex64::new(0.0, 1.0);

/// Single-site Pauli label.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Pauli {
    I,
    X,
    Y,
    Z,
}

impl Pauli {
    fn from_bits(x: bool, z: bool) -> Self {
        match (x, z) {
            (false, false) => Pauli::I,
            (true, false) => Pauli::X,
            (true, true) => Pauli::Y,
            (false, true) => Pauli::Z,
        }
    }

    fn bits(self) -> (bool, bool) {
        match self {
            Pauli::I => (false, false),
            Pauli::X => (true, false),
            Pauli::Y => (true, true),
            Pauli::Z => (false, true),
        }
    }

    fn from_char(c: char) -> Option<Self> {
        match c {
            'I' | 'i' => Some(Pauli::I),
            'X' | 'x' => Some(Pauli::X),
            'Y' | 'y' => Some(Pauli::Y),
            'Z' | 'z' => Some(Pauli::Z),
            _ => None,
        }
    }

    fn as_char(self) -> char {
        match self {
            Pauli::I => 'I',
            Pauli::X => 'X',
            Pauli::Y => 'Y',
            Pauli::Z => 'Z',
        }
    }
}

/// Mask pair identifying a Pauli string (without coefficient).
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct PauliString {
    pub x: u64,
    pub z: u64,
}

impl PauliString {
    pub const IDENTITY: PauliString = PauliString { x: 0, z: 0 };

    pub fn new(x: u64, z: u64) -> Self {
        Self { x, z }
    }

    /// Number of sites carrying a Y.
    pub fn y_count(self) -> u32 {
        (self.x & self.z).count_ones()
    }

    /// Sign `s` such that `self · other = s · (self ⊕ other)`.
    pub fn product_sign(self, other: PauliString) -> f64 {
        if (self.z & other.x).count_ones().is_multiple_of(2) {
            1.0
        } else {
            -1.0
        }
    }

    pub fn commutes_with(self, other: PauliString) -> bool {
        ((self.x & other.z) ^ (self.z & other.x)).count_ones().is_multiple_of(2)
    }

    pub fn xor(self, other: PauliString) -> PauliString {
        PauliString::new(self.x ^ other.x, self.z ^ other.z)
    }

    /// Bit mask of sites carrying a non-identity factor.
    pub fn support_mask(self) -> u64 {
        self.x | self.z
    }

    /// Length of the shortest contiguous arc of a ring of `num_sites` sites
    /// that covers the support. Zero for the identity.
    pub fn ring_support(self, num_sites: usize) -> usize {
        let mask = self.support_mask();
        if mask == 0 {
            return 0;
        }
        let occupied: Vec<usize> = (0..num_sites).filter(|&j| mask & site_bit(num_sites, j) != 0).collect();
        let n = occupied.len();
        let max_gap = (0..n)
            .map(|i| {
                let cur = occupied[i];
                let next = occupied[(i + 1) % n];
                (next + num_sites - cur - 1) % num_sites
            })
            .max()
            .unwrap_or(0);
        if n == 1 {
            1
        } else {
            num_sites - max_gap
        }
    }

    fn pauli_at(self, num_sites: usize, site: usize) -> Pauli {
        let bit = site_bit(num_sites, site);
        Pauli::from_bits(self.x & bit != 0, self.z & bit != 0)
    }

    /// Pauli word, site 0 first.
    pub fn word(self, num_sites: usize) -> String {
        (0..num_sites).map(|j| self.pauli_at(num_sites, j).as_char()).collect()
    }
}

/// Bit carrying site `site` in an `num_sites`-site mask or basis index.
#[inline]
pub fn site_bit(num_sites: usize, site: usize) -> u64 {
    1u64 << (num_sites - 1 - site)
}

fn full_mask(num_sites: usize) -> u64 {
    if num_sites >= 64 {
        u64::MAX
    } else {
        (1u64 << num_sites) - 1
    }
}

fn check_sites(num_sites: usize) -> Result<()> {
    if num_sites == 0 || num_sites > MAX_SITES {
        return Err(Error::InvalidParameter {
            name: "num_sites",
            reason: format!("must lie in 1..={MAX_SITES}, got {num_sites}"),
        });
    }
    Ok(())
}

/// `i^n` for a non-negative integer power.
fn i_pow(n: u32) -> Complex64 {
    match n % 4 {
        0 => Complex64::new(1.0, 0.0),
        1 => I,
        2 => Complex64::new(-1.0, 0.0),
        _ => -I,
    }
}

/// A single weighted Pauli string.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PauliTerm {
    pub num_sites: usize,
    pub string: PauliString,
    /// Coefficient of the `X^x · Z^z` product.
    pub coefficient: Complex64,
}

impl PauliTerm {
    pub fn new(num_sites: usize, x_mask: u64, z_mask: u64, coefficient: Complex64) -> Result<Self> {
        check_sites(num_sites)?;
        let full = full_mask(num_sites);
        if (x_mask | z_mask) & !full != 0 {
            return Err(Error::InvalidParameter {
                name: "mask",
                reason: format!("bits set beyond {num_sites} sites"),
            });
        }
        Ok(Self {
            num_sites,
            string: PauliString::new(x_mask, z_mask),
            coefficient,
        })
    }

    /// Build from a Pauli word whose coefficient multiplies the word itself
    /// (Y meaning the hermitian Pauli-Y).
    pub fn from_word(word: &str, word_coefficient: Complex64) -> Result<Self> {
        let paulis: Vec<Pauli> = word
            .chars()
            .map(|c| Pauli::from_char(c).ok_or_else(|| Error::Parse(format!("bad pauli label `{c}` in `{word}`"))))
            .collect::<Result<_>>()?;
        let num_sites = paulis.len();
        check_sites(num_sites)?;
        let mut string = PauliString::IDENTITY;
        for (j, p) in paulis.into_iter().enumerate() {
            let (x, z) = p.bits();
            if x {
                string.x |= site_bit(num_sites, j);
            }
            if z {
                string.z |= site_bit(num_sites, j);
            }
        }
        Ok(Self {
            num_sites,
            string,
            coefficient: word_coefficient * i_pow(string.y_count()),
        })
    }

    /// Coefficient relative to the Pauli word (Y = hermitian Pauli-Y).
    pub fn word_coefficient(&self) -> Complex64 {
        // X·Z = -i·Y on every Y site
        self.coefficient * i_pow(3 * self.string.y_count())
    }

    pub fn word(&self) -> String {
        self.string.word(self.num_sites)
    }
}

/// Exact product of two Pauli terms.
pub fn term_multiply(a: &PauliTerm, b: &PauliTerm) -> Result<PauliTerm> {
    if a.num_sites != b.num_sites {
        return Err(Error::Dimension {
            left: a.num_sites,
            right: b.num_sites,
        });
    }
    Ok(PauliTerm {
        num_sites: a.num_sites,
        string: a.string.xor(b.string),
        coefficient: a.coefficient * b.coefficient * a.string.product_sign(b.string),
    })
}

/// Weighted sum of Pauli strings on a fixed number of sites.
#[derive(Debug, Clone, PartialEq)]
pub struct PauliOperator {
    num_sites: usize,
    terms: BTreeMap<PauliString, Complex64>,
    prune_threshold: f64,
}

impl PauliOperator {
    pub fn zero(num_sites: usize) -> Self {
        assert!(
            (1..=MAX_SITES).contains(&num_sites),
            "site count {num_sites} out of range"
        );
        Self {
            num_sites,
            terms: BTreeMap::new(),
            prune_threshold: DEFAULT_PRUNE,
        }
    }

    pub fn identity(num_sites: usize) -> Self {
        let mut op = Self::zero(num_sites);
        op.add_term(PauliString::IDENTITY, Complex64::new(1.0, 0.0));
        op
    }

    /// `coefficient · P_site` for a single-site Pauli.
    pub fn single(num_sites: usize, site: usize, pauli: Pauli, coefficient: f64) -> Self {
        Self::product(num_sites, &[(site, pauli)], coefficient)
    }

    /// `coefficient · Π P_site` with hermitian Pauli factors.
    pub fn product(num_sites: usize, factors: &[(usize, Pauli)], coefficient: f64) -> Self {
        let mut string = PauliString::IDENTITY;
        for &(site, pauli) in factors {
            assert!(site < num_sites, "site {site} out of range");
            let bit = site_bit(num_sites, site);
            let (x, z) = pauli.bits();
            if x {
                string.x ^= bit;
            }
            if z {
                string.z ^= bit;
            }
        }
        let mut op = Self::zero(num_sites);
        op.add_term(string, Complex64::new(coefficient, 0.0) * i_pow(string.y_count()));
        op
    }

    pub fn from_terms(num_sites: usize, terms: impl IntoIterator<Item = PauliTerm>) -> Result<Self> {
        let mut op = Self::zero(num_sites);
        for t in terms {
            if t.num_sites != num_sites {
                return Err(Error::Dimension {
                    left: num_sites,
                    right: t.num_sites,
                });
            }
            op.add_term(t.string, t.coefficient);
        }
        op.prune();
        Ok(op)
    }

    pub fn with_prune_threshold(mut self, threshold: f64) -> Self {
        self.prune_threshold = threshold;
        self.prune();
        self
    }

    pub fn prune_threshold(&self) -> f64 {
        self.prune_threshold
    }

    pub fn num_sites(&self) -> usize {
        self.num_sites
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    /// Stored `(string, coefficient)` pairs in mask order.
    pub fn iter(&self) -> impl Iterator<Item = (PauliString, Complex64)> + '_ {
        self.terms.iter().map(|(s, c)| (*s, *c))
    }

    pub fn terms(&self) -> impl Iterator<Item = PauliTerm> + '_ {
        self.terms.iter().map(move |(s, c)| PauliTerm {
            num_sites: self.num_sites,
            string: *s,
            coefficient: *c,
        })
    }

    pub fn coefficient(&self, string: PauliString) -> Complex64 {
        self.terms.get(&string).copied().unwrap_or_default()
    }

    /// Coefficient of a Pauli word, or zero if absent.
    pub fn word_coefficient(&self, word: &str) -> Result<Complex64> {
        let probe = PauliTerm::from_word(word, Complex64::new(1.0, 0.0))?;
        if probe.num_sites != self.num_sites {
            return Err(Error::Dimension {
                left: self.num_sites,
                right: probe.num_sites,
            });
        }
        let stored = self.coefficient(probe.string);
        Ok(PauliTerm {
            coefficient: stored,
            ..probe
        }
        .word_coefficient())
    }

    /// Adds without pruning.
    pub fn add_term(&mut self, string: PauliString, coefficient: Complex64) {
        *self.terms.entry(string).or_default() += coefficient;
    }

    fn prune(&mut self) {
        let thr = self.prune_threshold;
        self.terms.retain(|_, c| c.norm() >= thr);
    }

    fn check_same(&self, other: &PauliOperator) -> Result<()> {
        if self.num_sites != other.num_sites {
            return Err(Error::Dimension {
                left: self.num_sites,
                right: other.num_sites,
            });
        }
        Ok(())
    }

    pub fn add(&self, other: &PauliOperator) -> Result<PauliOperator> {
        self.check_same(other)?;
        let mut out = self.clone();
        for (s, c) in other.iter() {
            out.add_term(s, c);
        }
        out.prune();
        Ok(out)
    }

    /// `self + factor · other`.
    pub fn add_scaled(&self, other: &PauliOperator, factor: Complex64) -> Result<PauliOperator> {
        self.check_same(other)?;
        let mut out = self.clone();
        for (s, c) in other.iter() {
            out.add_term(s, c * factor);
        }
        out.prune();
        Ok(out)
    }

    pub fn scale(&self, factor: Complex64) -> PauliOperator {
        let mut out = Self {
            num_sites: self.num_sites,
            terms: self.terms.iter().map(|(s, c)| (*s, c * factor)).collect(),
            prune_threshold: self.prune_threshold,
        };
        out.prune();
        out
    }

    pub fn scale_real(&self, factor: f64) -> PauliOperator {
        self.scale(Complex64::new(factor, 0.0))
    }

    /// Operator product `self · other`.
    pub fn multiply(&self, other: &PauliOperator) -> Result<PauliOperator> {
        self.check_same(other)?;
        let mut out = Self::zero(self.num_sites);
        out.prune_threshold = self.prune_threshold;
        for (sa, ca) in self.iter() {
            for (sb, cb) in other.iter() {
                out.add_term(sa.xor(sb), ca * cb * sa.product_sign(sb));
            }
        }
        out.prune();
        Ok(out)
    }

    pub fn adjoint(&self) -> PauliOperator {
        let terms = self
            .terms
            .iter()
            .map(|(s, c)| {
                // (XZ)† = ZX = -XZ on every Y site
                let sign = if s.y_count() % 2 == 0 { 1.0 } else { -1.0 };
                (*s, c.conj() * sign)
            })
            .collect();
        Self {
            num_sites: self.num_sites,
            terms,
            prune_threshold: self.prune_threshold,
        }
    }

    /// Largest coefficient of the anti-hermitian part `(O - O†)/2`.
    pub fn hermiticity_residual(&self) -> f64 {
        self.terms
            .iter()
            .map(|(s, c)| {
                let word = *c * i_pow(3 * s.y_count());
                word.im.abs()
            })
            .fold(0.0, f64::max)
    }

    pub fn is_hermitian(&self, tol: f64) -> bool {
        self.hermiticity_residual() <= tol
    }

    /// Sum of coefficient magnitudes; an upper bound on the operator norm.
    pub fn norm1(&self) -> f64 {
        self.terms.values().map(|c| c.norm()).sum()
    }

    /// Largest coefficient difference against another operator.
    pub fn max_coefficient_diff(&self, other: &PauliOperator) -> Result<f64> {
        Ok(self
            .add_scaled(other, Complex64::new(-1.0, 0.0))?
            .with_prune_threshold(0.0)
            .terms
            .values()
            .map(|c| c.norm())
            .fold(0.0, f64::max))
    }

    /// Largest ring support over all terms.
    pub fn max_ring_support(&self) -> usize {
        self.terms
            .keys()
            .map(|s| s.ring_support(self.num_sites))
            .max()
            .unwrap_or(0)
    }

    /// Applies the operator to a state vector in the computational basis.
    pub fn apply(&self, amplitudes: &[Complex64]) -> Vec<Complex64> {
        let dim = amplitudes.len();
        assert_eq!(dim, 1usize << self.num_sites, "state dimension mismatch");
        let mut groups: BTreeMap<u64, Vec<(u64, Complex64)>> = BTreeMap::new();
        for (s, c) in self.iter() {
            groups.entry(s.x).or_default().push((s.z, c));
        }
        let mut out = vec![Complex64::default(); dim];
        for (x, zs) in &groups {
            let x = *x as usize;
            for (b, amp) in amplitudes.iter().enumerate() {
                let mut d = Complex64::default();
                for &(z, c) in zs {
                    if (z & b as u64).count_ones().is_multiple_of(2) {
                        d += c;
                    } else {
                        d -= c;
                    }
                }
                out[b ^ x] += d * amp;
            }
        }
        out
    }

    pub fn to_dense(&self) -> Result<DMatrix<Complex64>> {
        self.to_dense_capped(DENSE_CAP)
    }

    pub fn to_dense_capped(&self, cap: usize) -> Result<DMatrix<Complex64>> {
        if self.num_sites > cap {
            return Err(Error::DenseCap {
                sites: self.num_sites,
                cap,
            });
        }
        let dim = 1usize << self.num_sites;
        let mut m = DMatrix::<Complex64>::zeros(dim, dim);
        for (s, c) in self.iter() {
            for b in 0..dim {
                let sign = if (s.z & b as u64).count_ones().is_multiple_of(2) {
                    1.0
                } else {
                    -1.0
                };
                m[(b ^ s.x as usize, b)] += c * sign;
            }
        }
        Ok(m)
    }

    /// Line-oriented dump: `coeff_re coeff_im word`, coefficients relative to
    /// the Pauli word.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for t in self.terms() {
            let c = t.word_coefficient();
            // + 0.0 folds negative zero
            out.push_str(&format!("{:?} {:?} {}\n", c.re + 0.0, c.im + 0.0, t.word()));
        }
        out
    }

    pub fn from_text(text: &str) -> Result<PauliOperator> {
        let mut num_sites = None;
        let mut terms = Vec::new();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let fields: Vec<&str> = line.split_whitespace().collect();
            if fields.len() != 3 {
                return Err(Error::Parse(format!("line {}: expected 3 fields", lineno + 1)));
            }
            let parse = |s: &str| {
                s.parse::<f64>()
                    .map_err(|e| Error::Parse(format!("line {}: {e}", lineno + 1)))
            };
            let term = PauliTerm::from_word(fields[2], Complex64::new(parse(fields[0])?, parse(fields[1])?))?;
            match num_sites {
                None => num_sites = Some(term.num_sites),
                Some(n) if n != term.num_sites => {
                    return Err(Error::Dimension {
                        left: n,
                        right: term.num_sites,
                    })
                }
                _ => {}
            }
            terms.push(term);
        }
        let n = num_sites.ok_or_else(|| Error::Parse("empty operator dump".into()))?;
        PauliOperator::from_terms(n, terms)
    }
}

impl fmt::Display for PauliOperator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_text())
    }
}

/// `[a, b] = ab - ba`.
pub fn commutator(a: &PauliOperator, b: &PauliOperator) -> Result<PauliOperator> {
    a.check_same(b)?;
    let mut out = PauliOperator::zero(a.num_sites);
    out.prune_threshold = a.prune_threshold;
    for (sa, ca) in a.iter() {
        for (sb, cb) in b.iter() {
            if !sa.commutes_with(sb) {
                out.add_term(sa.xor(sb), ca * cb * (2.0 * sa.product_sign(sb)));
            }
        }
    }
    out.prune();
    Ok(out)
}
