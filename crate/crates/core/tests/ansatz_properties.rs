use coflow_core::ansatz::G2Ansatz;
use coflow_core::forms::{GeometryParams, InvariantForm, Monomial, Orientation};
use coflow_core::scalar::{int, random_positive, rat, Scalar};
use coflow_core::stability::nearly_g2_params;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn positive() -> impl Strategy<Value = Scalar> {
    (1i64..=97, 1i64..=97).prop_map(|(n, d)| rat(n, d))
}

fn ansatz() -> impl Strategy<Value = G2Ansatz> {
    (positive(), positive(), positive(), any::<bool>()).prop_map(|(a, b, q, plus)| {
        let eps = if plus { Orientation::Plus } else { Orientation::Minus };
        G2Ansatz::build(GeometryParams::new(a, b, q, eps).unwrap()).unwrap()
    })
}

fn four_form() -> impl Strategy<Value = InvariantForm> {
    let basis: Vec<Monomial> = Monomial::all().filter(|m| m.degree() == 4).collect();
    prop::collection::vec(-9i64..=9, basis.len()).prop_map(move |cs| {
        let mut f = InvariantForm::zero();
        for (m, c) in basis.iter().zip(cs) {
            f.add_term(*m, int(c));
        }
        f
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn printed_closed_forms(ans in ansatz()) {
        prop_assert_eq!(ans.dphi(), ans.dphi_printed());
        prop_assert_eq!(ans.tau0(), ans.tau0_closed_form());
        prop_assert_eq!(ans.laplacian_psi(), ans.laplacian_printed());
    }

    #[test]
    fn g2_normalization(ans in ansatz()) {
        let p = ans.params();
        prop_assert!(ans.psi().d().is_zero());
        prop_assert_eq!(ans.phi().wedge(ans.psi()), p.volume_form().scale(&int(7)));
        prop_assert_eq!(ans.phi().norm_sq(p).unwrap(), int(7));
        prop_assert_eq!(ans.psi().norm_sq(p).unwrap(), int(7));
        prop_assert_eq!(&ans.star(ans.psi()).unwrap(), ans.phi());
    }

    #[test]
    fn torsion_decomposition(ans in ansatz()) {
        let t = ans.torsion();
        let rebuilt = &ans.psi().scale(&t.tau0) + &ans.star(&t.tau3).unwrap();
        prop_assert_eq!(rebuilt, ans.dphi());
        prop_assert!(ans.verify_dtau3_lemma().holds());
        // τ₃ is of type 27
        prop_assert!(t.tau3.wedge(ans.phi()).is_zero());
        prop_assert!(t.tau3.wedge(ans.psi()).is_zero());
    }

    #[test]
    fn type_projections_are_complete(ans in ansatz(), rho in four_form()) {
        let dec = ans.type_project_4form(&rho).unwrap();
        prop_assert!(dec.certified);
        prop_assert_eq!(&(&dec.pi1 + &dec.pi7) + &dec.pi27, rho);
    }
}

#[test]
fn nearly_g2_only_at_critical_points() {
    for eps in Orientation::BOTH {
        for k in [rat(1, 1), rat(4, 1), rat(7, 3)] {
            let ans = G2Ansatz::build(nearly_g2_params(eps, &k)).unwrap();
            assert!(ans.is_nearly_g2(&k));
            assert_eq!(ans.tau0(), k);
            assert!(ans.torsion().tau3.is_zero());
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut checked = 0;
    while checked < 100 {
        let eps = if checked % 2 == 0 { Orientation::Plus } else { Orientation::Minus };
        let p = GeometryParams::new(random_positive(&mut rng), random_positive(&mut rng), random_positive(&mut rng), eps)
            .unwrap();
        let ans = G2Ansatz::build(p).unwrap();
        let k = ans.tau0();
        // a random draw landing exactly on the nearly-G2 curve is skipped
        if ans.torsion().tau3.is_zero() {
            continue;
        }
        assert!(!ans.is_nearly_g2(&k));
        assert!(ans.dphi().ratio_to(ans.psi()).is_none());
        checked += 1;
    }
}

#[test]
fn laplacian_eigenform_at_unit_point() {
    // ε = −1 nearly-G2 point with κ = 4 is (a, b, q) = (1, 1, 1)
    let p = nearly_g2_params(Orientation::Minus, &int(4));
    assert_eq!((p.a().clone(), p.b().clone(), p.q().clone()), (int(1), int(1), int(1)));
    let ans = G2Ansatz::build(p).unwrap();
    assert_eq!(ans.laplacian_psi(), ans.psi().scale(&int(16)));
}
