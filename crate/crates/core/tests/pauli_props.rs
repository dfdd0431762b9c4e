//! Algebraic laws of the sparse Pauli algebra, checked against dense
//! Kronecker products built independently of the library.

use nalgebra::DMatrix;
use num_complex::Complex64;
use proptest::prelude::*;
use tada_core::pauli::{commutator, PauliOperator, PauliTerm};

type M = DMatrix<Complex64>;

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

fn pauli_matrix(ch: char) -> M {
    let (o, z, i) = (c(1.0, 0.0), c(0.0, 0.0), c(0.0, 1.0));
    match ch {
        'I' => M::from_row_slice(2, 2, &[o, z, z, o]),
        'X' => M::from_row_slice(2, 2, &[z, o, o, z]),
        'Y' => M::from_row_slice(2, 2, &[z, -i, i, z]),
        'Z' => M::from_row_slice(2, 2, &[o, z, z, -o]),
        _ => unreachable!(),
    }
}

fn kron_word(word: &str) -> M {
    word.chars()
        .map(pauli_matrix)
        .reduce(|acc, m| acc.kronecker(&m))
        .unwrap()
}

/// Dense matrix from word coefficients only.
fn oracle(op: &PauliOperator) -> M {
    let dim = 1 << op.num_sites();
    let mut out = M::zeros(dim, dim);
    for term in op.terms() {
        out += kron_word(&term.word()) * term.word_coefficient();
    }
    out
}

fn max_abs(m: &M) -> f64 {
    m.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

fn word_strategy(l: usize) -> impl Strategy<Value = String> {
    proptest::collection::vec(prop_oneof![Just('I'), Just('X'), Just('Y'), Just('Z')], l)
        .prop_map(|v| v.into_iter().collect())
}

fn operator(l: usize, hermitian: bool) -> impl Strategy<Value = PauliOperator> {
    proptest::collection::vec((word_strategy(l), -2.0..2.0f64, -2.0..2.0f64), 1..6).prop_map(move |terms| {
        PauliOperator::from_terms(
            l,
            terms.into_iter().map(|(w, re, im)| {
                let coeff = if hermitian { c(re, 0.0) } else { c(re, im) };
                PauliTerm::from_word(&w, coeff).unwrap()
            }),
        )
        .unwrap()
    })
}

fn pair(hermitian: bool) -> impl Strategy<Value = (PauliOperator, PauliOperator)> {
    (1usize..=4).prop_flat_map(move |l| (operator(l, hermitian), operator(l, hermitian)))
}

fn triple() -> impl Strategy<Value = (PauliOperator, PauliOperator, PauliOperator)> {
    (1usize..=4).prop_flat_map(|l| (operator(l, false), operator(l, false), operator(l, false)))
}

proptest! {
    #[test]
    fn dense_rendering_matches_kronecker((a, _) in pair(false)) {
        prop_assert!(max_abs(&(a.to_dense().unwrap() - oracle(&a))) < 1e-12);
    }

    #[test]
    fn product_matches_dense((a, b) in pair(false)) {
        let ab = a.multiply(&b).unwrap();
        prop_assert!(max_abs(&(oracle(&ab) - oracle(&a) * oracle(&b))) < 1e-11);
    }

    #[test]
    fn sum_and_scale_match_dense((a, b) in pair(false), re in -3.0..3.0f64, im in -3.0..3.0f64) {
        let f = c(re, im);
        let s = a.add_scaled(&b, f).unwrap();
        prop_assert!(max_abs(&(oracle(&s) - (oracle(&a) + oracle(&b) * f))) < 1e-11);
    }

    #[test]
    fn commutator_matches_dense((a, b) in pair(false)) {
        let (da, db) = (oracle(&a), oracle(&b));
        let ab = commutator(&a, &b).unwrap();
        prop_assert!(max_abs(&(oracle(&ab) - (&da * &db - &db * &da))) < 1e-11);
    }

    #[test]
    fn commutator_is_bilinear_and_antisymmetric((a, b, d) in triple(), re in -2.0..2.0f64) {
        let f = c(re, 0.5);
        let lhs = commutator(&a.add_scaled(&d, f).unwrap(), &b).unwrap();
        let rhs = commutator(&a, &b).unwrap().add_scaled(&commutator(&d, &b).unwrap(), f).unwrap();
        prop_assert!(lhs.max_coefficient_diff(&rhs).unwrap() < 1e-11);
        let ba = commutator(&b, &a).unwrap();
        prop_assert!(commutator(&a, &b).unwrap().add(&ba).unwrap().norm1() < 1e-11);
    }

    #[test]
    fn jacobi_identity((a, b, d) in triple()) {
        let j = commutator(&a, &commutator(&b, &d).unwrap()).unwrap()
            .add(&commutator(&b, &commutator(&d, &a).unwrap()).unwrap()).unwrap()
            .add(&commutator(&d, &commutator(&a, &b).unwrap()).unwrap()).unwrap();
        prop_assert!(j.norm1() < 1e-10);
    }

    #[test]
    fn i_commutator_of_hermitians_is_hermitian((a, b) in pair(true)) {
        prop_assert!(a.is_hermitian(1e-14) && b.is_hermitian(1e-14));
        let k = commutator(&a, &b).unwrap().scale(c(0.0, 1.0));
        prop_assert!(k.is_hermitian(1e-12));
        let m = oracle(&k);
        prop_assert!(max_abs(&(&m - m.adjoint())) < 1e-11);
    }

    #[test]
    fn adjoint_matches_dense((a, _) in pair(false)) {
        prop_assert!(max_abs(&(oracle(&a.adjoint()) - oracle(&a).adjoint())) < 1e-12);
        prop_assert!(a.adjoint().adjoint().max_coefficient_diff(&a).unwrap() == 0.0);
    }

    #[test]
    fn text_round_trip((a, _) in pair(false)) {
        let back = PauliOperator::from_text(&a.to_text()).unwrap();
        prop_assert!(back.max_coefficient_diff(&a).unwrap() < 1e-15);
    }

    #[test]
    fn apply_matches_dense((a, _) in pair(false), seed in proptest::collection::vec(-1.0..1.0f64, 32)) {
        let dim = 1 << a.num_sites();
        let v: Vec<Complex64> = (0..dim).map(|i| c(seed[2 * i % 32], seed[(2 * i + 1) % 32])).collect();
        let got = a.apply(&v);
        let want = oracle(&a) * nalgebra::DVector::from_vec(v);
        for (g, w) in got.iter().zip(want.iter()) {
            prop_assert!((g - w).norm() < 1e-11);
        }
    }
}

#[test]
fn y_word_coefficient_convention() {
    // X·Z on one site is -i·Y
    let x = PauliOperator::from_terms(1, [PauliTerm::from_word("X", c(1.0, 0.0)).unwrap()]).unwrap();
    let z = PauliOperator::from_terms(1, [PauliTerm::from_word("Z", c(1.0, 0.0)).unwrap()]).unwrap();
    let xz = x.multiply(&z).unwrap();
    assert_eq!(xz.word_coefficient("Y").unwrap(), c(0.0, -1.0));
    assert!(max_abs(&(oracle(&xz) - pauli_matrix('X') * pauli_matrix('Z'))) < 1e-15);
}
