//! Shared fixture builders for the criterion benchmarks.

use bitrade_core::{
    BaseDistribution, DiscretePrior, FixedPriceMechanism, MarginalProfile, Prior, Role,
    SortedIidPrior, TieBreaking, Valuation,
};

/// Concave buyer valuation with marginals `scale * (k - q + 1) / k`.
pub fn concave_buyer(k: usize, scale: f64) -> Valuation {
    let deltas = (1..=k)
        .map(|q| scale * (k - q + 1) as f64 / k as f64)
        .collect();
    MarginalProfile::new(Role::Buyer, deltas)
        .unwrap()
        .to_valuation()
        .unwrap()
}

/// Convex seller valuation with marginals `scale * q / k`.
pub fn convex_seller(k: usize, scale: f64) -> Valuation {
    let deltas = (1..=k).map(|q| scale * q as f64 / k as f64).collect();
    MarginalProfile::new(Role::Seller, deltas)
        .unwrap()
        .to_valuation()
        .unwrap()
}

pub fn point_buyer(k: usize, scale: f64) -> Prior {
    Prior::Discrete(DiscretePrior::point_mass(concave_buyer(k, scale)))
}

pub fn uniform_seller(k: usize, hi: f64) -> Prior {
    Prior::SortedIid(SortedIidPrior::new(k, BaseDistribution::Uniform([0.0, hi]), Role::Seller).unwrap())
}

pub fn full_range_mechanism(p: f64, k: usize) -> FixedPriceMechanism {
    FixedPriceMechanism::full_range(p, TieBreaking::FavorHighest, k).unwrap()
}
