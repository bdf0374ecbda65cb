use coflow_core::forms::{GeometryParams, InvariantForm, Monomial, Orientation};
use coflow_core::scalar::{int, rat, Scalar};
use num_traits::Signed;
use proptest::prelude::*;

fn monomials() -> Vec<Monomial> {
    Monomial::all().collect()
}

fn sign(deg: usize) -> Scalar {
    if deg % 2 == 0 {
        int(1)
    } else {
        int(-1)
    }
}

fn positive() -> impl Strategy<Value = Scalar> {
    (1i64..=97, 1i64..=97).prop_map(|(n, d)| rat(n, d))
}

fn params() -> impl Strategy<Value = GeometryParams> {
    (positive(), positive(), positive(), any::<bool>()).prop_map(|(a, b, q, plus)| {
        let eps = if plus { Orientation::Plus } else { Orientation::Minus };
        GeometryParams::new(a, b, q, eps).unwrap()
    })
}

fn monomial() -> impl Strategy<Value = Monomial> {
    (0..40usize).prop_map(|i| monomials()[i])
}

fn form_of_degree(k: usize) -> impl Strategy<Value = InvariantForm> {
    let basis: Vec<Monomial> = monomials().into_iter().filter(|m| m.degree() == k).collect();
    let n = basis.len();
    prop::collection::vec(-5i64..=5, n).prop_map(move |cs| {
        let mut f = InvariantForm::zero();
        for (m, c) in basis.iter().zip(cs) {
            f.add_term(*m, int(c));
        }
        f
    })
}

#[test]
fn basis_has_forty_monomials() {
    assert_eq!(monomials().len(), 40);
}

#[test]
fn d_squared_vanishes_on_every_monomial() {
    for m in monomials() {
        let f = InvariantForm::monomial(m);
        assert!(f.d().d().is_zero(), "dd({}) = {}", m.key(), f.d().d());
    }
}

#[test]
fn leibniz_on_all_monomial_pairs() {
    for m1 in monomials() {
        for m2 in monomials() {
            if m1.degree() + m2.degree() > 6 {
                continue;
            }
            let (x, y) = (InvariantForm::monomial(m1), InvariantForm::monomial(m2));
            let lhs = x.wedge(&y).d();
            let rhs = &x.d().wedge(&y) + &x.wedge(&y.d()).scale(&sign(m1.degree()));
            assert_eq!(lhs, rhs, "{} ^ {}", m1.key(), m2.key());
        }
    }
}

#[test]
fn anticommutativity_on_all_monomial_pairs() {
    for m1 in monomials() {
        for m2 in monomials() {
            let (x, y) = (InvariantForm::monomial(m1), InvariantForm::monomial(m2));
            assert_eq!(
                x.wedge(&y),
                y.wedge(&x).scale(&sign(m1.degree() * m2.degree())),
                "{} ^ {}",
                m1.key(),
                m2.key()
            );
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn star_star_is_identity(p in params()) {
        for m in monomials() {
            let f = InvariantForm::monomial(m);
            prop_assert_eq!(f.star(&p).unwrap().star(&p).unwrap(), f);
        }
    }

    #[test]
    fn monomial_norms_positive(p in params(), m in monomial()) {
        let n = InvariantForm::monomial(m).norm_sq(&p).unwrap();
        prop_assert!(n.is_positive());
    }

    #[test]
    fn inner_product_matches_star(
        (p, x, y) in (params(), 0usize..=7)
            .prop_flat_map(|(p, k)| (Just(p), form_of_degree(k), form_of_degree(k)))
    ) {
        // <x, y> vol = x ^ *y
        let lhs = p.volume_form().scale(&x.inner(&y, &p).unwrap());
        prop_assert_eq!(lhs, x.wedge(&y.star(&p).unwrap()));
    }

    #[test]
    fn wedge_is_bilinear(x in form_of_degree(3), y in form_of_degree(3), z in form_of_degree(2)) {
        prop_assert_eq!((&x + &y).wedge(&z), &x.wedge(&z) + &y.wedge(&z));
    }

    #[test]
    fn json_roundtrip(x in form_of_degree(4)) {
        let s = serde_json::to_string(&x).unwrap();
        let back: InvariantForm = serde_json::from_str(&s).unwrap();
        prop_assert_eq!(back, x);
    }
}
