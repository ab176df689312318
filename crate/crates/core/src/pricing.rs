//! Price rules: the deterministic half-mass price (the seller is expected
//! to accept to trade half of the supply at that price) and the randomized
//! quantile rule that draws `x` on `[1/e, 1]` with CDF `ln(ex)` and prices
//! so the seller's expected willing supply is `x k`.

use rand::Rng;

use crate::error::{Result, TradeError};
use crate::mechanism::{FixedPriceMechanism, TieBreaking};
use crate::priors::Prior;
use crate::valuations::Role;

pub const DEFAULT_MASS_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SolveMethod {
    ClosedForm,
    Bisection { iterations: u32 },
    DiscreteQuantile,
}

/// A solved unit price together with the threshold mass it achieves.
#[derive(Debug, Clone, Copy)]
pub struct PriceSolution {
    pub p: f64,
    pub achieved_mass: f64,
    pub target_mass: f64,
    pub method: SolveMethod,
}

/// Solves `threshold_mass(g, p) = target_mass` for a seller prior.
///
/// Sorted-i.i.d. priors admit the closed form `p = F^{-1}(target/k)`.
/// Discrete priors have a step threshold mass that cannot hit arbitrary
/// targets; the least marginal value whose mass reaches the target is
/// returned instead (quantile rule), flagged as `DiscreteQuantile`.
pub fn solve_threshold_price(g: &Prior, target_mass: f64, _tol: f64) -> Result<PriceSolution> {
    let k = g.units() as f64;
    if !(target_mass > 0.0 && target_mass <= k) {
        return Err(TradeError::SolverFailure(format!(
            "target mass {target_mass} outside (0, {k}]"
        )));
    }
    match g {
        Prior::SortedIid(s) => {
            if s.role != Role::Seller {
                return Err(TradeError::SolverFailure(
                    "threshold price is solved against a seller prior".into(),
                ));
            }
            let p = s.base.inv_cdf(target_mass / k);
            Ok(PriceSolution {
                p,
                achieved_mass: target_mass,
                target_mass,
                method: SolveMethod::ClosedForm,
            })
        }
        Prior::Discrete(d) => {
            let mut marginals: Vec<f64> = d
                .support()
                .iter()
                .flat_map(|(w, _)| w.marginal_profile(Role::Seller).deltas)
                .collect();
            marginals.sort_by(|a, b| a.partial_cmp(b).unwrap());
            marginals.dedup();
            for m in marginals {
                let mass = g.threshold_mass(m);
                if mass >= target_mass {
                    return Ok(PriceSolution {
                        p: m,
                        achieved_mass: mass,
                        target_mass,
                        method: SolveMethod::DiscreteQuantile,
                    });
                }
            }
            unreachable!("mass reaches k at the largest marginal")
        }
    }
}

/// Bisection fallback on the threshold-mass curve, for priors without an
/// invertible closed form. Brackets from the 1e-6 / 1-1e-6 quantiles of the
/// sorted-i.i.d. base (or the marginal range for discrete priors), growing
/// the bracket geometrically when it does not yet straddle the target.
pub fn solve_by_bisection(g: &Prior, target_mass: f64, tol: f64) -> Result<PriceSolution> {
    let k = g.units() as f64;
    if !(target_mass > 0.0 && target_mass <= k) {
        return Err(TradeError::SolverFailure(format!(
            "target mass {target_mass} outside (0, {k}]"
        )));
    }
    let (mut lo, mut hi) = match g {
        Prior::SortedIid(s) => (s.base.inv_cdf(1e-6), s.base.inv_cdf(1.0 - 1e-6)),
        Prior::Discrete(d) => {
            let ms: Vec<f64> = d
                .support()
                .iter()
                .flat_map(|(w, _)| w.marginal_profile(Role::Seller).deltas)
                .collect();
            let lo = ms.iter().cloned().fold(f64::INFINITY, f64::min);
            let hi = ms.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            (lo, hi)
        }
    };
    let mut doublings = 0;
    while g.threshold_mass(lo) > target_mass || g.threshold_mass(hi) < target_mass {
        let width = (hi - lo).max(1e-6);
        if g.threshold_mass(lo) > target_mass {
            lo -= width;
        }
        if g.threshold_mass(hi) < target_mass {
            hi += width;
        }
        doublings += 1;
        if doublings > 64 {
            return Err(TradeError::SolverFailure(format!(
                "bracket [{lo}, {hi}] does not straddle target mass {target_mass} after 64 doublings"
            )));
        }
    }
    let mut iterations = 0;
    while hi - lo > f64::EPSILON * hi.abs().max(1.0) && iterations < 200 {
        let mid = 0.5 * (lo + hi);
        let mass = g.threshold_mass(mid);
        if (mass - target_mass).abs() <= tol {
            return Ok(PriceSolution {
                p: mid,
                achieved_mass: mass,
                target_mass,
                method: SolveMethod::Bisection { iterations },
            });
        }
        if mass < target_mass {
            lo = mid;
        } else {
            hi = mid;
        }
        iterations += 1;
    }
    let p = 0.5 * (lo + hi);
    Ok(PriceSolution {
        p,
        achieved_mass: g.threshold_mass(p),
        target_mass,
        method: SolveMethod::Bisection { iterations },
    })
}

/// A draw from the quantile distribution on `[1/e, 1]` with CDF `ln(ex)`:
/// `x = exp(u - 1)` for uniform `u`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuantileDraw {
    pub x: f64,
    pub source_uniform: f64,
}

pub fn sample_quantile(rng: &mut impl Rng) -> QuantileDraw {
    let u: f64 = rng.random();
    QuantileDraw {
        x: (u - 1.0).exp(),
        source_uniform: u,
    }
}

/// The deterministic half-mass mechanism: price at threshold mass `k/2`,
/// single-unit offers over the whole supply, highest-quantity tie-breaking.
pub fn build_det2(g: &Prior, k: usize) -> Result<FixedPriceMechanism> {
    let sol = solve_threshold_price(g, k as f64 / 2.0, DEFAULT_MASS_TOL)?;
    FixedPriceMechanism::full_range(sol.p, TieBreaking::FavorHighest, k)
}

/// One realization of the randomized quantile mechanism: draw `x`, price at
/// threshold mass `x k`. The randomized mechanism is the distribution over
/// these fixed price mechanisms induced by the quantile draw.
pub fn build_grqm(g: &Prior, k: usize, rng: &mut impl Rng) -> Result<FixedPriceMechanism> {
    let draw = sample_quantile(rng);
    let sol = solve_threshold_price(g, draw.x * k as f64, DEFAULT_MASS_TOL)?;
    FixedPriceMechanism::full_range(sol.p, TieBreaking::FavorHighest, k)
}
