use hamtorus::algebra::HamiltonianElement;
use hamtorus::automorphism::{verify_homomorphism, TorusAutomorphism};
use hamtorus::derivations::{inner_derivation, solve_graded_derivations, TruncationBox};
use hamtorus::generation::{evaluate_witness_over, generation_witness, transport, GeneratorSet};
use hamtorus::lattice::LatticeVector;
use hamtorus::sampling::Sampler;
use hamtorus::scalar::Scalar;
use hamtorus::symplectic::{classify, GspClass};
use proptest::prelude::*;

fn vector(n: usize, bound: i64) -> impl Strategy<Value = LatticeVector> {
    prop::collection::vec(-bound..=bound, n).prop_map(|c| LatticeVector::new(c).unwrap())
}

fn nonzero_vector(n: usize, bound: i64) -> impl Strategy<Value = LatticeVector> {
    vector(n, bound).prop_filter("nonzero", |v| !v.is_zero())
}

fn even_dim() -> impl Strategy<Value = usize> {
    prop::sample::select(vec![2usize, 4, 6])
}

fn vectors3() -> impl Strategy<Value = (LatticeVector, LatticeVector, LatticeVector, i64)> {
    even_dim().prop_flat_map(|n| (vector(n, 1000), vector(n, 1000), vector(n, 1000), -50i64..=50))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn pairing_is_bilinear_and_alternating((r, s, t, k) in vectors3()) {
        let rs = r.checked_add(&s).unwrap();
        prop_assert_eq!(rs.pairing(&t).unwrap(), r.pairing(&t).unwrap() + s.pairing(&t).unwrap());
        prop_assert_eq!(r.checked_scale(k).unwrap().pairing(&s).unwrap(), i128::from(k) * r.pairing(&s).unwrap());
        prop_assert_eq!(r.pairing(&s).unwrap(), -s.pairing(&r).unwrap());
        prop_assert_eq!(r.pairing(&r).unwrap(), 0);
        prop_assert_eq!(r.pairing(&s).unwrap(), r.bar().unwrap().dot(&s).unwrap());
    }

    #[test]
    fn bar_squares_to_minus_identity((r, _, _, _) in vectors3()) {
        prop_assert_eq!(r.bar().unwrap().bar().unwrap(), r.checked_neg().unwrap());
    }

    #[test]
    fn gsp_matrices_scale_the_pairing(seed in any::<u64>(), anti in any::<bool>(), n in even_dim()) {
        let q = Sampler::new(seed, 0).gsp_matrix(n, anti).unwrap();
        let expected = if anti { GspClass::AntiSymplectic } else { GspClass::Symplectic };
        prop_assert_eq!(classify(q.matrix()).unwrap(), expected);
        let mut s = Sampler::new(seed, 1);
        for _ in 0..8 {
            let (r, t) = (s.vector(n, 9), s.vector(n, 9));
            let lhs = q.apply(&r).unwrap().pairing(&q.apply(&t).unwrap()).unwrap();
            prop_assert_eq!(lhs, i128::from(q.multiplier()) * r.pairing(&t).unwrap());
        }
        let inv = q.inverse().unwrap();
        prop_assert_eq!(inv.multiplier(), q.multiplier());
        prop_assert_eq!(q.multiply(&inv).unwrap(), hamtorus::symplectic::GspMatrix::identity(n).unwrap());
    }

    #[test]
    fn multiplier_is_multiplicative(seed in any::<u64>(), a in any::<bool>(), b in any::<bool>()) {
        let mut s = Sampler::new(seed, 2);
        let p = s.gsp_matrix(4, a).unwrap();
        let q = s.gsp_matrix(4, b).unwrap();
        prop_assert_eq!(p.multiply(&q).unwrap().multiplier(), p.multiplier() * q.multiplier());
    }

    #[test]
    fn transported_witness_evaluates_over_transported_generators(
        r in even_dim().prop_flat_map(|n| nonzero_vector(n, 3)),
        seed in any::<u64>(),
        anti in any::<bool>(),
    ) {
        let n = r.dim();
        let q = Sampler::new(seed, 3).gsp_matrix(n, anti).unwrap();
        let w = generation_witness(&r).unwrap();
        let moved = transport(&w, &q).unwrap();
        let set = GeneratorSet::standard(n).unwrap().transformed(&q).unwrap();
        let value = evaluate_witness_over(&moved, &set).unwrap();
        let sign = if anti && (w.leaf_count() - 1) % 2 == 1 { -1 } else { 1 };
        let expected = HamiltonianElement::monomial(&q.apply(&r).unwrap(), w.scalar() * Scalar::from(sign)).unwrap();
        prop_assert_eq!(value, expected);
    }

    #[test]
    fn automorphisms_preserve_brackets(seed in any::<u64>(), anti in any::<bool>(), n in prop::sample::select(vec![2usize, 4])) {
        let mut s = Sampler::new(seed, 4);
        let sigma = s.automorphism(n, anti).unwrap();
        for _ in 0..5 {
            let x = s.element(n, 4, 4, 7, true).unwrap();
            let y = s.element(n, 4, 4, 7, true).unwrap();
            let lhs = sigma.apply(&x.bracket(&y).unwrap()).unwrap();
            let rhs = sigma.apply(&x).unwrap().bracket(&sigma.apply(&y).unwrap()).unwrap();
            prop_assert_eq!(lhs, rhs);
        }
    }

    #[test]
    fn inverse_undoes_apply(seed in any::<u64>(), anti in any::<bool>()) {
        let mut s = Sampler::new(seed, 5);
        let sigma = s.automorphism(4, anti).unwrap();
        let inv = sigma.inverse().unwrap();
        for _ in 0..5 {
            let x = s.element(4, 5, 5, 9, true).unwrap();
            prop_assert_eq!(inv.apply(&sigma.apply(&x).unwrap()).unwrap(), x.clone());
            prop_assert_eq!(sigma.apply(&inv.apply(&x).unwrap()).unwrap(), x);
        }
    }

    #[test]
    fn inner_derivations_are_solutions(d in prop::sample::select(vec![2usize, 4]).prop_flat_map(|n| vector(n, 2))) {
        let n = d.dim();
        let bx = TruncationBox::new(n, 2).unwrap();
        let solved = solve_graded_derivations(&d, &bx).unwrap();
        let x = if d.is_zero() {
            HamiltonianElement::cartan_element(vec![Scalar::one(); n]).unwrap()
        } else {
            HamiltonianElement::basis(&d).unwrap()
        };
        let inner = inner_derivation(&x, &d, &bx).unwrap();
        prop_assert_eq!(inner.leibniz_violation(&bx).unwrap(), None);
        let floor = if d.is_zero() { n } else { 1 };
        prop_assert!(solved.len() >= floor);
    }
}

#[test]
fn composition_is_associative_and_matches_sequential_application() {
    let mut s = Sampler::new(11, 6);
    for k in 0..50 {
        let n = if k % 2 == 0 { 2 } else { 4 };
        let a = s.automorphism(n, s_coin(k, 0)).unwrap();
        let b = s.automorphism(n, s_coin(k, 1)).unwrap();
        let c = s.automorphism(n, s_coin(k, 2)).unwrap();
        let left = a.compose(&b).unwrap().compose(&c).unwrap();
        let right = a.compose(&b.compose(&c).unwrap()).unwrap();
        assert_eq!(left, right);
        for _ in 0..10 {
            let x = s.element(n, 5, 5, 9, true).unwrap();
            let sequential = a.apply(&b.apply(&c.apply(&x).unwrap()).unwrap()).unwrap();
            assert_eq!(left.apply(&x).unwrap(), sequential);
        }
    }
}

fn s_coin(k: usize, slot: usize) -> bool {
    (k >> slot) & 1 == 1
}

#[test]
fn identity_is_a_unit_for_composition() {
    let mut s = Sampler::new(12, 7);
    let sigma = s.automorphism(4, true).unwrap();
    let id = TorusAutomorphism::identity(4).unwrap();
    assert_eq!(sigma.compose(&id).unwrap(), sigma);
    assert_eq!(id.compose(&sigma).unwrap(), sigma);
    assert_eq!(sigma.compose(&sigma.inverse().unwrap()).unwrap(), id);
    assert!(verify_homomorphism(&sigma.compose(&sigma).unwrap(), 2).unwrap().pass);
}
