//! The multi-unit fixed price mechanism in its two forms: the
//! direct-revelation form with tie-breaking, and the sequential posted-price
//! form that offers pre-determined bundles at a fixed per-unit price. The two
//! agree outcome-for-outcome on increasing submodular profiles when the
//! schedule's cumulative sums equal the quantity set.

use std::collections::BTreeSet;
use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Result, TradeError};
use crate::valuations::{Role, Valuation};

/// Allocation plus payments. `buyer_payment = -seller_payment` always holds
/// (strong budget balance is built into the payment rule).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Outcome {
    pub buyer_units: usize,
    pub seller_units: usize,
    pub buyer_payment: f64,
    pub seller_payment: f64,
}

impl Outcome {
    fn trade(k: usize, q: usize, unit_price: f64) -> Self {
        let pay = q as f64 * unit_price;
        Outcome {
            buyer_units: q,
            seller_units: k - q,
            buyer_payment: pay,
            seller_payment: -pay,
        }
    }

    /// Buyer utility and seller utility gain over the no-trade endowment.
    pub fn utilities(&self, v: &Valuation, w: &Valuation) -> (f64, f64) {
        let k = w.units();
        let buyer = v.value(self.buyer_units) - self.buyer_payment;
        let seller = w.value(self.seller_units) - self.seller_payment - w.value(k);
        (buyer, seller)
    }
}

type SetSelector = Arc<dyn Fn(&BTreeSet<usize>) -> BTreeSet<usize> + Send + Sync>;
type ElementSelector = Arc<dyn Fn(&BTreeSet<usize>) -> usize + Send + Sync>;

/// Custom tie-breaking: subset selectors for each side's argmax set and a
/// single-element selector for a non-empty intersection. Selectors must be
/// pure and must return non-empty subsets of their input.
#[derive(Clone)]
pub struct ExplicitTie {
    pub buyer: SetSelector,
    pub seller: SetSelector,
    pub intersection: ElementSelector,
}

/// Tie-breaking policy applied when an agent is indifferent among
/// quantities. `FavorHighest` keeps only the maximum quantity on each side.
#[derive(Clone, Default)]
pub enum TieBreaking {
    #[default]
    FavorHighest,
    FavorLowest,
    Explicit(ExplicitTie),
}

impl TieBreaking {
    fn select(&self, role: Role, argmax: &BTreeSet<usize>) -> BTreeSet<usize> {
        match self {
            TieBreaking::FavorHighest => {
                BTreeSet::from([*argmax.iter().next_back().expect("argmax non-empty")])
            }
            TieBreaking::FavorLowest => {
                BTreeSet::from([*argmax.iter().next().expect("argmax non-empty")])
            }
            TieBreaking::Explicit(t) => {
                let f = match role {
                    Role::Buyer => &t.buyer,
                    Role::Seller => &t.seller,
                };
                let sel = f(argmax);
                assert!(
                    !sel.is_empty() && sel.is_subset(argmax),
                    "explicit selector must return a non-empty subset of the argmax set"
                );
                sel
            }
        }
    }

    fn pick_intersection(&self, intersection: &BTreeSet<usize>) -> usize {
        match self {
            TieBreaking::FavorHighest => *intersection.iter().next_back().unwrap(),
            TieBreaking::FavorLowest => *intersection.iter().next().unwrap(),
            TieBreaking::Explicit(t) => {
                let q = (t.intersection)(intersection);
                assert!(intersection.contains(&q), "intersection selector out of range");
                q
            }
        }
    }

    /// Whether the sequential form accepts a bundle at exact indifference.
    /// Matches the direct form: FavorHighest accepts, FavorLowest rejects.
    fn accepts_at_indifference(&self) -> bool {
        !matches!(self, TieBreaking::FavorLowest)
    }
}

impl fmt::Debug for TieBreaking {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TieBreaking::FavorHighest => write!(f, "FavorHighest"),
            TieBreaking::FavorLowest => write!(f, "FavorLowest"),
            TieBreaking::Explicit(_) => write!(f, "Explicit(..)"),
        }
    }
}

/// Full argmax set of an agent's utility over `S ∪ {0}`: the buyer maximises
/// `v(q) - q p`, the seller maximises `w(k - q) + q p`.
pub fn preferred_set(
    role: Role,
    val: &Valuation,
    unit_price: f64,
    quantities: &BTreeSet<usize>,
) -> BTreeSet<usize> {
    let k = val.units();
    let utility = |q: usize| match role {
        Role::Buyer => val.value(q) - q as f64 * unit_price,
        Role::Seller => val.value(k - q) + q as f64 * unit_price,
    };
    let mut best = utility(0);
    let mut arg = BTreeSet::from([0]);
    for &q in quantities {
        let u = utility(q);
        if u > best {
            best = u;
            arg = BTreeSet::from([q]);
        } else if u == best {
            arg.insert(q);
        }
    }
    arg
}

/// The characterized mechanism family: a unit price `p`, a non-empty set `S`
/// of tradeable quantities, and a tie-breaking policy. No-trade (quantity 0)
/// is always implicitly available.
#[derive(Debug, Clone)]
pub struct FixedPriceMechanism {
    unit_price: f64,
    quantities: BTreeSet<usize>,
    tie: TieBreaking,
    k: usize,
}

/// JSON form: `{"p":2.0,"S":[1,2,3],"tie":"favor_highest","k":3}`.
/// `Explicit` tie-breaking is programmatic only and has no JSON form.
#[derive(Debug, Serialize, Deserialize)]
struct MechanismDescriptor {
    p: f64,
    #[serde(rename = "S")]
    s: Vec<usize>,
    #[serde(default)]
    tie: TieTag,
    k: usize,
}

#[derive(Debug, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
enum TieTag {
    #[default]
    FavorHighest,
    FavorLowest,
}

impl FixedPriceMechanism {
    pub fn new(unit_price: f64, quantities: BTreeSet<usize>, tie: TieBreaking, k: usize) -> Result<Self> {
        if unit_price.is_nan() || unit_price < 0.0 || !unit_price.is_finite() {
            return Err(TradeError::InvalidMechanism(format!(
                "unit price must be finite and >= 0, got {unit_price}"
            )));
        }
        if quantities.is_empty() {
            return Err(TradeError::InvalidMechanism(
                "quantity set S must be non-empty (use a price above every valuation for a null mechanism)"
                    .into(),
            ));
        }
        if quantities.iter().any(|&q| q == 0 || q > k) {
            return Err(TradeError::InvalidMechanism(format!(
                "S must be a subset of 1..={k}"
            )));
        }
        Ok(Self {
            unit_price,
            quantities,
            tie,
            k,
        })
    }

    /// Single-unit offers over the whole supply: `S = {1, ..., k}`.
    pub fn full_range(unit_price: f64, tie: TieBreaking, k: usize) -> Result<Self> {
        Self::new(unit_price, (1..=k).collect(), tie, k)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let d: MechanismDescriptor = serde_json::from_str(text)?;
        let tie = match d.tie {
            TieTag::FavorHighest => TieBreaking::FavorHighest,
            TieTag::FavorLowest => TieBreaking::FavorLowest,
        };
        Self::new(d.p, d.s.into_iter().collect(), tie, d.k)
    }

    pub fn to_json(&self) -> Result<String> {
        let tie = match self.tie {
            TieBreaking::FavorHighest => TieTag::FavorHighest,
            TieBreaking::FavorLowest => TieTag::FavorLowest,
            TieBreaking::Explicit(_) => {
                return Err(TradeError::InvalidMechanism(
                    "explicit tie-breaking has no JSON form".into(),
                ))
            }
        };
        Ok(serde_json::to_string(&MechanismDescriptor {
            p: self.unit_price,
            s: self.quantities.iter().copied().collect(),
            tie,
            k: self.k,
        })?)
    }

    pub fn unit_price(&self) -> f64 {
        self.unit_price
    }

    pub fn quantities(&self) -> &BTreeSet<usize> {
        &self.quantities
    }

    pub fn units(&self) -> usize {
        self.k
    }

    pub fn tie(&self) -> &TieBreaking {
        &self.tie
    }

    /// Direct-revelation form: apply the tie policy to both preferred sets;
    /// trade the intersection pick if the selected sets meet, otherwise the
    /// minimum of the two selected maxima.
    pub fn run_direct(&self, v: &Valuation, w: &Valuation) -> Outcome {
        debug_assert_eq!(v.units(), self.k);
        debug_assert_eq!(w.units(), self.k);
        let tau_b = self
            .tie
            .select(Role::Buyer, &preferred_set(Role::Buyer, v, self.unit_price, &self.quantities));
        let tau_s = self
            .tie
            .select(Role::Seller, &preferred_set(Role::Seller, w, self.unit_price, &self.quantities));
        let meet: BTreeSet<usize> = tau_b.intersection(&tau_s).copied().collect();
        let q = if meet.is_empty() {
            let max_b = *tau_b.iter().next_back().unwrap();
            let max_s = *tau_s.iter().next_back().unwrap();
            max_b.min(max_s)
        } else {
            self.tie.pick_intersection(&meet)
        };
        Outcome::trade(self.k, q, self.unit_price)
    }

    /// Schedule whose cumulative sums equal this mechanism's quantity set.
    pub fn matched_schedule(&self) -> Schedule {
        Schedule::covering(&self.quantities)
    }
}

/// Pre-determined bundle sizes for the sequential form. The cumulative sums
/// are the quantities at which the mechanism can stop.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Schedule {
    pub bundles: Vec<usize>,
}

impl Schedule {
    pub fn new(bundles: Vec<usize>, k: usize) -> Result<Self> {
        if bundles.contains(&0) {
            return Err(TradeError::InvalidMechanism("zero-sized bundle".into()));
        }
        if bundles.iter().sum::<usize>() > k {
            return Err(TradeError::InvalidMechanism(format!(
                "bundles exceed the supply of {k} units"
            )));
        }
        Ok(Self { bundles })
    }

    /// Bundles whose cumulative sums are exactly the given quantity set.
    pub fn covering(quantities: &BTreeSet<usize>) -> Schedule {
        let mut bundles = Vec::with_capacity(quantities.len());
        let mut prev = 0;
        for &q in quantities {
            bundles.push(q - prev);
            prev = q;
        }
        Schedule { bundles }
    }

    pub fn total(&self) -> usize {
        self.bundles.iter().sum()
    }
}

/// Sequential posted-price form: propose each bundle in turn at per-unit
/// price `p`; both agents must accept for the trade to extend; stop at the
/// first rejection. Acceptance at exact indifference follows the tie policy.
pub fn run_sequential(
    unit_price: f64,
    schedule: &Schedule,
    tie: &TieBreaking,
    v: &Valuation,
    w: &Valuation,
) -> Outcome {
    let k = v.units();
    debug_assert_eq!(w.units(), k);
    debug_assert!(schedule.total() <= k);
    let weak = tie.accepts_at_indifference();
    let mut traded = 0usize;
    for &bundle in &schedule.bundles {
        let next = traded + bundle;
        let cost = bundle as f64 * unit_price;
        let buyer_gain = v.value(next) - v.value(traded);
        let seller_loss = w.value(k - traded) - w.value(k - next);
        let buyer_ok = if weak { buyer_gain >= cost } else { buyer_gain > cost };
        let seller_ok = if weak { seller_loss <= cost } else { seller_loss < cost };
        if !(buyer_ok && seller_ok) {
            break;
        }
        traded = next;
    }
    Outcome::trade(k, traded, unit_price)
}
