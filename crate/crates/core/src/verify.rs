//! Exhaustive and gadget-driven verification of individual rationality,
//! strong budget balance, and dominant-strategy incentive compatibility.
//!
//! The checkers are exact: a violation is reported whenever the relevant
//! inequality fails under exact floating comparison, with no tolerance. The
//! DSIC check quantifies misreports over the supplied finite sets only; it
//! is sound for arbitrary oracles and complete relative to the lattice.

use serde::{Deserialize, Serialize};

use crate::mechanism::{FixedPriceMechanism, Outcome};
use crate::valuations::{gadget, ValuationClass, Valuation};

/// An outcome oracle under audit. Implementations must be total and
/// deterministic over the profiles they are checked on.
pub trait MechanismUnderTest {
    fn outcome(&self, v: &Valuation, w: &Valuation) -> Outcome;
    fn units(&self) -> usize;
}

impl MechanismUnderTest for FixedPriceMechanism {
    fn outcome(&self, v: &Valuation, w: &Valuation) -> Outcome {
        self.run_direct(v, w)
    }

    fn units(&self) -> usize {
        FixedPriceMechanism::units(self)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ViolationKind {
    #[serde(rename = "IR_buyer")]
    IrBuyer,
    #[serde(rename = "IR_seller")]
    IrSeller,
    #[serde(rename = "SBB")]
    Sbb,
    #[serde(rename = "DSIC_buyer")]
    DsicBuyer,
    #[serde(rename = "DSIC_seller")]
    DsicSeller,
}

/// A witnessed breach: the profile it occurred on, the profitable misreport
/// for DSIC kinds, and the utility delta (always strictly positive).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Violation {
    pub kind: ViolationKind,
    pub v: Valuation,
    pub w: Valuation,
    pub deviation: Option<Valuation>,
    pub delta: f64,
}

/// Checks both IR inequalities and exact budget balance on every profile.
pub fn check_ir_sbb(
    mechanism: &impl MechanismUnderTest,
    profiles: &[(Valuation, Valuation)],
) -> Vec<Violation> {
    let mut out = Vec::new();
    for (v, w) in profiles {
        let o = mechanism.outcome(v, w);
        if o.buyer_payment + o.seller_payment != 0.0 {
            out.push(Violation {
                kind: ViolationKind::Sbb,
                v: v.clone(),
                w: w.clone(),
                deviation: None,
                delta: (o.buyer_payment + o.seller_payment).abs(),
            });
        }
        let (ub, us) = o.utilities(v, w);
        if ub < 0.0 {
            out.push(Violation {
                kind: ViolationKind::IrBuyer,
                v: v.clone(),
                w: w.clone(),
                deviation: None,
                delta: -ub,
            });
        }
        if us < 0.0 {
            out.push(Violation {
                kind: ViolationKind::IrSeller,
                v: v.clone(),
                w: w.clone(),
                deviation: None,
                delta: -us,
            });
        }
    }
    out
}

/// Checks truthfulness against every misreport inside the supplied sets:
/// for every profile and every buyer misreport `v'`, the buyer's true
/// utility under the misreport outcome must not exceed the truthful one,
/// and symmetrically for the seller.
pub fn check_dsic(
    mechanism: &impl MechanismUnderTest,
    buyer_set: &[Valuation],
    seller_set: &[Valuation],
) -> Vec<Violation> {
    let mut out = Vec::new();
    for v in buyer_set {
        for w in seller_set {
            let truthful = mechanism.outcome(v, w);
            let (truth_b, truth_s) = truthful.utilities(v, w);
            for misreport in buyer_set {
                if misreport == v {
                    continue;
                }
                let o = mechanism.outcome(misreport, w);
                let (ub, _) = o.utilities(v, w);
                if ub > truth_b {
                    out.push(Violation {
                        kind: ViolationKind::DsicBuyer,
                        v: v.clone(),
                        w: w.clone(),
                        deviation: Some(misreport.clone()),
                        delta: ub - truth_b,
                    });
                }
            }
            for misreport in seller_set {
                if misreport == w {
                    continue;
                }
                let o = mechanism.outcome(v, misreport);
                let (_, us) = o.utilities(v, w);
                if us > truth_s {
                    out.push(Violation {
                        kind: ViolationKind::DsicSeller,
                        v: v.clone(),
                        w: w.clone(),
                        deviation: Some(misreport.clone()),
                        delta: us - truth_s,
                    });
                }
            }
        }
    }
    out
}

/// Search size limits for [`search_counterexample`].
#[derive(Debug, Clone, Copy)]
pub struct SearchBudget {
    /// Maximum number of lattice profiles examined after the gadgets.
    pub max_lattice_profiles: usize,
}

impl Default for SearchBudget {
    fn default() -> Self {
        Self {
            max_lattice_profiles: 20_000,
        }
    }
}

/// Searches for an IR or DSIC violation of the mechanism over the given
/// valuation class: gadget profiles first (deterministic order over pairs of
/// quantities in `S`), then a small lexicographic lattice. Guaranteed to
/// succeed for the `Increasing` class whenever `p > 0` and `|S| >= 2`.
pub fn search_counterexample(
    mechanism: &FixedPriceMechanism,
    class: ValuationClass,
    budget: SearchBudget,
) -> Option<Violation> {
    let k = mechanism.units();
    let p = mechanism.unit_price();
    let quantities: Vec<usize> = mechanism.quantities().iter().copied().collect();

    if class == ValuationClass::Increasing && p > 0.0 {
        for (i, &q) in quantities.iter().enumerate() {
            for &q_hi in &quantities[i + 1..] {
                if let Some(v) = gadget_pair_violation(mechanism, k, p, q, q_hi) {
                    return Some(v);
                }
            }
        }
    }

    // Lattice fallback: integer grid valuations around the price scale.
    let step = if p > 0.0 { (p / 2.0).max(0.5) } else { 1.0 };
    let grid: Vec<f64> = (0..=6).map(|i| i as f64 * step).collect();
    let lattice: Vec<Valuation> = enumerate_budgeted(k, &grid, class, budget.max_lattice_profiles);
    let profiles: Vec<(Valuation, Valuation)> = lattice
        .iter()
        .flat_map(|v| lattice.iter().map(move |w| (v.clone(), w.clone())))
        .take(budget.max_lattice_profiles)
        .collect();
    check_ir_sbb(mechanism, &profiles)
        .into_iter()
        .next()
        .or_else(|| check_dsic(mechanism, &lattice, &lattice).into_iter().next())
}

fn enumerate_budgeted(
    k: usize,
    grid: &[f64],
    class: ValuationClass,
    limit: usize,
) -> Vec<Valuation> {
    crate::valuations::enumerate_lattice(k, grid, class)
        .take(limit.max(1).isqrt().max(2))
        .collect()
}

/// The necessity construction for a pair `q < q_hi` of tradeable
/// quantities: a buyer whose only profitable trade is `q_hi` but whose
/// value at `q` sits below the price line, against a seller who strictly
/// prefers trading exactly `q`. The mechanism then trades `q`, pushing the
/// buyer below the participation baseline.
fn gadget_pair_violation(
    mechanism: &FixedPriceMechanism,
    k: usize,
    p: f64,
    q: usize,
    q_hi: usize,
) -> Option<Violation> {
    let eps = p / 8.0;
    let filler = eps / (2.0 * k as f64);
    let mut points = vec![(q, eps)];
    if q_hi > q {
        points.push((q_hi, p * q_hi as f64 + p));
    }
    let buyer = gadget::jump_at(k, &points, filler).ok()?;
    let seller = if q < k {
        gadget::near_price(k, p, eps, q).ok()?
    } else {
        return None;
    };
    let profiles = vec![(buyer.clone(), seller.clone())];
    if let Some(v) = check_ir_sbb(mechanism, &profiles).into_iter().next() {
        return Some(v);
    }
    check_dsic(mechanism, &[buyer], &[seller]).into_iter().next()
}
