//! Valuation functions over unit counts, their marginal profiles, class
//! validation, lattice enumeration for exhaustive checks, and the gadget
//! constructions used by the counterexample search.
//!
//! All comparisons here are exact: class membership and the property
//! checkers never apply a tolerance. Grids used in tests should therefore
//! stick to exactly representable values (integers, binary fractions).

use serde::{Deserialize, Serialize};

use crate::error::{Result, TradeError};

/// Which side of the trade a valuation or marginal profile belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Role {
    Buyer,
    Seller,
}

/// A valuation over `0..=k` units. `values[0]` is always 0 and all entries
/// are finite and non-negative.
///
/// Serializes as a plain JSON array of `k + 1` numbers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct Valuation {
    values: Vec<f64>,
}

impl Valuation {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.len() < 2 {
            return Err(TradeError::InvalidValuation(
                "need at least one unit (k >= 1)".into(),
            ));
        }
        if values[0] != 0.0 {
            return Err(TradeError::InvalidValuation(format!(
                "values[0] must be exactly 0, got {}",
                values[0]
            )));
        }
        for (i, x) in values.iter().enumerate() {
            if !x.is_finite() || *x < 0.0 {
                return Err(TradeError::InvalidValuation(format!(
                    "values[{i}] = {x} is not a finite non-negative amount"
                )));
            }
        }
        Ok(Self { values })
    }

    /// Number of units `k`.
    pub fn units(&self) -> usize {
        self.values.len() - 1
    }

    /// Value of holding `q` units.
    pub fn value(&self, q: usize) -> f64 {
        self.values[q]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Marginal profile for the given role: the buyer's q-th marginal gain
    /// `v(q) - v(q-1)` or the seller's marginal loss from parting with the
    /// q-th unit sold, `w(k-q+1) - w(k-q)`.
    pub fn marginal_profile(&self, role: Role) -> MarginalProfile {
        let k = self.units();
        let deltas = (1..=k)
            .map(|q| match role {
                Role::Buyer => self.values[q] - self.values[q - 1],
                Role::Seller => self.values[k - q + 1] - self.values[k - q],
            })
            .collect();
        MarginalProfile {
            role,
            k,
            deltas,
        }
    }

    /// Exact class membership check. `Increasing` requires strict increase
    /// over the whole extended domain, including `v(1) > v(0) = 0`.
    pub fn validate(&self, class: ValuationClass) -> bool {
        self.check_class(class, true)
    }

    /// Class check with strict increase relaxed to weak. Sampled sorted-iid
    /// valuations may carry tied marginals (a measure-zero event kept as is)
    /// and are validated with this variant.
    pub fn validate_weak(&self, class: ValuationClass) -> bool {
        self.check_class(class, false)
    }

    fn check_class(&self, class: ValuationClass, strict: bool) -> bool {
        let v = &self.values;
        let increasing = v.windows(2).all(|p| if strict { p[0] < p[1] } else { p[0] <= p[1] });
        match class {
            ValuationClass::Increasing => increasing,
            ValuationClass::IncreasingSubmodular => {
                increasing
                    && v.windows(2)
                        .map(|p| p[1] - p[0])
                        .collect::<Vec<_>>()
                        .windows(2)
                        .all(|d| d[0] >= d[1])
            }
        }
    }
}

impl TryFrom<Vec<f64>> for Valuation {
    type Error = TradeError;
    fn try_from(values: Vec<f64>) -> Result<Self> {
        Valuation::new(values)
    }
}

impl From<Valuation> for Vec<f64> {
    fn from(v: Valuation) -> Vec<f64> {
        v.values
    }
}

/// The two valuation classes the characterization distinguishes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ValuationClass {
    Increasing,
    IncreasingSubmodular,
}

/// Marginal values indexed 1..=k. Buyer profiles from submodular valuations
/// are non-increasing, seller profiles non-decreasing.
#[derive(Debug, Clone, PartialEq)]
pub struct MarginalProfile {
    pub role: Role,
    pub k: usize,
    pub deltas: Vec<f64>,
}

impl MarginalProfile {
    pub fn new(role: Role, deltas: Vec<f64>) -> Result<Self> {
        if deltas.is_empty() {
            return Err(TradeError::InvalidMarginals("empty delta sequence".into()));
        }
        if let Some(d) = deltas.iter().find(|d| !d.is_finite() || **d < 0.0) {
            return Err(TradeError::InvalidMarginals(format!(
                "negative or non-finite delta {d}"
            )));
        }
        let k = deltas.len();
        Ok(Self { role, k, deltas })
    }

    /// Marginal for the q-th unit traded, `q` in 1..=k.
    pub fn delta(&self, q: usize) -> f64 {
        self.deltas[q - 1]
    }

    /// Reconstructs the valuation this profile was derived from. Buyer:
    /// prefix sums. Seller: `w(k) - ` prefix sums, anchored at
    /// `w(k) = sum of all deltas`. Round-trips `marginal_profile` exactly on
    /// exactly representable inputs.
    pub fn to_valuation(&self) -> Result<Valuation> {
        let k = self.k;
        let mut values = vec![0.0; k + 1];
        match self.role {
            Role::Buyer => {
                for q in 1..=k {
                    values[q] = values[q - 1] + self.deltas[q - 1];
                }
            }
            Role::Seller => {
                // w(k - q) = w(k) - sum of the first q deltas; summing from
                // the anchor keeps the subtraction pattern identical to the
                // forward direction so the round trip is exact.
                let total: f64 = self.deltas.iter().sum();
                values[k] = total;
                for q in 1..=k {
                    values[k - q] = values[k - q + 1] - self.deltas[q - 1];
                }
                values[0] = 0.0;
            }
        }
        Valuation::new(values)
    }
}

/// Enumerates every valuation with `values[1..=k]` drawn from `grid` that
/// passes the class check, in lexicographic order of the value sequence.
/// `values[0]` is forced to 0 regardless of the grid.
pub fn enumerate_lattice(
    k: usize,
    grid: &[f64],
    class: ValuationClass,
) -> impl Iterator<Item = Valuation> + '_ {
    LatticeIter {
        k,
        grid,
        class,
        indices: vec![0; k],
        done: grid.is_empty() || k == 0,
    }
}

struct LatticeIter<'a> {
    k: usize,
    grid: &'a [f64],
    class: ValuationClass,
    indices: Vec<usize>,
    done: bool,
}

impl<'a> Iterator for LatticeIter<'a> {
    type Item = Valuation;

    fn next(&mut self) -> Option<Valuation> {
        while !self.done {
            let mut values = Vec::with_capacity(self.k + 1);
            values.push(0.0);
            values.extend(self.indices.iter().map(|&i| self.grid[i]));
            self.advance();
            if let Ok(v) = Valuation::new(values) {
                if v.validate(self.class) {
                    return Some(v);
                }
            }
        }
        None
    }
}

impl<'a> LatticeIter<'a> {
    fn advance(&mut self) {
        // Odometer over grid indices, least significant digit last, so the
        // yielded value sequences come out lexicographically.
        for i in (0..self.k).rev() {
            self.indices[i] += 1;
            if self.indices[i] < self.grid.len() {
                return;
            }
            self.indices[i] = 0;
        }
        self.done = true;
    }
}

/// Gadget valuations mirroring the constructions in the necessity proofs.
pub mod gadget {
    use super::*;

    /// Linear at `steep_rate` up to `q_star`, then linear at `slow_rate`.
    /// With `steep_rate >= slow_rate > 0` the result is increasing
    /// submodular.
    pub fn steep_then_slow(
        k: usize,
        q_star: usize,
        steep_rate: f64,
        slow_rate: f64,
    ) -> Result<Valuation> {
        if q_star > k {
            return Err(TradeError::InvalidGadget(format!(
                "q_star {q_star} exceeds k {k}"
            )));
        }
        if steep_rate <= 0.0 || slow_rate <= 0.0 {
            return Err(TradeError::InvalidGadget(
                "rates must be positive to keep the valuation increasing".into(),
            ));
        }
        let mut values = Vec::with_capacity(k + 1);
        for q in 0..=k {
            let v = if q <= q_star {
                steep_rate * q as f64
            } else {
                steep_rate * q_star as f64 + slow_rate * (q - q_star) as f64
            };
            values.push(v);
        }
        Valuation::new(values)
    }

    /// Near-flat at `filler_rate` except for prescribed jumps: at each
    /// `(q, value)` point the valuation is set to `value`, and between
    /// points it creeps up at `filler_rate` per unit. Points must be given
    /// in ascending `q` with values that keep the function increasing.
    pub fn jump_at(k: usize, points: &[(usize, f64)], filler_rate: f64) -> Result<Valuation> {
        if filler_rate <= 0.0 {
            return Err(TradeError::InvalidGadget("filler_rate must be positive".into()));
        }
        let mut values = vec![0.0; k + 1];
        let mut next_point = points.iter().peekable();
        for q in 1..=k {
            let base = values[q - 1] + filler_rate;
            values[q] = match next_point.peek() {
                Some(&&(pq, pv)) if pq == q => {
                    next_point.next();
                    if pv <= values[q - 1] {
                        return Err(TradeError::InvalidGadget(format!(
                            "jump value {pv} at q={q} does not exceed the running value {}",
                            values[q - 1]
                        )));
                    }
                    pv
                }
                Some(&&(pq, _)) if pq < q => {
                    return Err(TradeError::InvalidGadget(
                        "jump points must be ascending in q".into(),
                    ))
                }
                _ => base,
            };
        }
        if next_point.peek().is_some() {
            return Err(TradeError::InvalidGadget("jump point beyond k".into()));
        }
        Valuation::new(values)
    }

    /// Seller-side gadget tracking the price line: `w(j) = p*j - eps` for
    /// interior `j`, except `w(k - favored_q) = p*(k - favored_q) + eps`,
    /// with `w(0) = 0` and `w(k) = p*k`. Trading exactly `favored_q` units
    /// is then the seller's unique strictly profitable trade.
    pub fn near_price(k: usize, p: f64, eps: f64, favored_q: usize) -> Result<Valuation> {
        if favored_q == 0 || favored_q >= k {
            return Err(TradeError::InvalidGadget(format!(
                "favored_q must lie strictly between 0 and k, got {favored_q}"
            )));
        }
        if eps <= 0.0 || eps >= p / 2.0 {
            return Err(TradeError::InvalidGadget(format!(
                "eps must satisfy 0 < eps < p/2 to keep the valuation increasing (p={p}, eps={eps})"
            )));
        }
        let mut values = Vec::with_capacity(k + 1);
        for j in 0..=k {
            let v = if j == 0 {
                0.0
            } else if j == k {
                p * k as f64
            } else if j == k - favored_q {
                p * j as f64 + eps
            } else {
                p * j as f64 - eps
            };
            values.push(v);
        }
        Valuation::new(values)
    }
}
