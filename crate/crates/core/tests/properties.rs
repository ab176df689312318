//! Randomized invariant checks over the core types.

use std::collections::BTreeSet;

use proptest::prelude::*;

use bitrade_core::mechanism::{run_sequential, Schedule};
use bitrade_core::valuations::gadget;
use bitrade_core::{
    FixedPriceMechanism, MarginalProfile, Prior, Role, SortedIidPrior, TieBreaking, Valuation,
    ValuationClass,
};

/// Increasing submodular valuations on a quarter-integer grid, built from
/// sorted non-negative marginals so every draw is in class by construction.
fn submodular(k: usize) -> impl Strategy<Value = Valuation> {
    prop::collection::vec(0u32..=40, k).prop_map(move |raw| {
        let mut deltas: Vec<f64> = raw.iter().map(|&r| r as f64 / 4.0).collect();
        deltas.sort_by(|a, b| b.partial_cmp(a).unwrap());
        MarginalProfile::new(Role::Buyer, deltas)
            .unwrap()
            .to_valuation()
            .unwrap()
    })
}

fn quantity_set(k: usize) -> impl Strategy<Value = BTreeSet<usize>> {
    prop::collection::btree_set(1..=k, 1..=k)
}

proptest! {
    #[test]
    fn marginal_round_trip(v in submodular(4)) {
        for role in [Role::Buyer, Role::Seller] {
            let back = v.marginal_profile(role).to_valuation().unwrap();
            prop_assert_eq!(back.values(), v.values());
        }
    }

    #[test]
    fn buyer_marginals_non_increasing(v in submodular(5)) {
        let m = v.marginal_profile(Role::Buyer);
        for q in 1..5 {
            prop_assert!(m.delta(q) >= m.delta(q + 1));
        }
        prop_assert!(v.validate_weak(ValuationClass::IncreasingSubmodular));
    }

    #[test]
    fn seller_marginals_non_decreasing(v in submodular(5)) {
        let m = v.marginal_profile(Role::Seller);
        for q in 1..5 {
            prop_assert!(m.delta(q) <= m.delta(q + 1));
        }
    }

    #[test]
    fn outcome_is_budget_balanced_and_ir(
        v in submodular(4),
        w in submodular(4),
        s in quantity_set(4),
        p in 0u32..=40,
    ) {
        let p = p as f64 / 4.0;
        let m = FixedPriceMechanism::new(p, s, TieBreaking::FavorHighest, 4).unwrap();
        let o = m.run_direct(&v, &w);
        prop_assert_eq!(o.buyer_payment + o.seller_payment, 0.0);
        prop_assert_eq!(o.seller_units, 4 - o.buyer_units);
        let (ub, us) = o.utilities(&v, &w);
        prop_assert!(ub >= 0.0);
        prop_assert!(us >= 0.0);
    }

    #[test]
    fn sequential_form_agrees_on_submodular_profiles(
        v in submodular(4),
        w in submodular(4),
        s in quantity_set(4),
        p in 0u32..=40,
    ) {
        let p = p as f64 / 4.0;
        for tie in [TieBreaking::FavorHighest, TieBreaking::FavorLowest] {
            let m = FixedPriceMechanism::new(p, s.clone(), tie.clone(), 4).unwrap();
            let direct = m.run_direct(&v, &w);
            let seq = run_sequential(p, &Schedule::covering(&s), &tie, &v, &w);
            prop_assert_eq!(direct.buyer_units, seq.buyer_units);
            prop_assert_eq!(direct.buyer_payment, seq.buyer_payment);
        }
    }

    #[test]
    fn threshold_mass_monotone_in_price(
        a in 0.0f64..5.0,
        width in 0.5f64..10.0,
        p1 in 0.0f64..20.0,
        p2 in 0.0f64..20.0,
    ) {
        let g = Prior::SortedIid(
            SortedIidPrior::new(4, bitrade_core::BaseDistribution::Uniform([a, a + width]), Role::Seller)
                .unwrap(),
        );
        let (lo, hi) = if p1 <= p2 { (p1, p2) } else { (p2, p1) };
        prop_assert!(g.threshold_mass(lo) <= g.threshold_mass(hi) + 1e-12);
        prop_assert!(g.threshold_mass(hi) <= 4.0);
    }

    #[test]
    fn gadget_valuations_are_increasing(
        // dyadic prices keep all gadget arithmetic exact
        p_grid in 1u32..=32,
        q in 1usize..4,
    ) {
        let p = p_grid as f64 / 4.0;
        let w = gadget::near_price(4, p, p / 8.0, q).unwrap();
        prop_assert!(w.validate(ValuationClass::Increasing));
        let v = gadget::steep_then_slow(4, q, 10.0 * p, p / 4.0).unwrap();
        prop_assert!(v.validate(ValuationClass::IncreasingSubmodular));
    }
}
