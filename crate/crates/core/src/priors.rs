//! Probability distributions over valuation functions: finite-support
//! discrete priors, and a sorted-i.i.d. family where a seller valuation is
//! built by drawing `k` i.i.d. values from a one-dimensional base
//! distribution, sorting them ascending into the marginal-decrease profile,
//! and rebuilding the valuation from marginals (buyers sort descending).

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Result, TradeError};
use crate::valuations::{MarginalProfile, Role, Valuation, ValuationClass};

/// One-dimensional continuous base distribution with an invertible CDF.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BaseDistribution {
    /// Uniform on `[a, b]`.
    Uniform([f64; 2]),
    /// Exponential with the given rate.
    Exponential(f64),
    /// Piecewise-linear CDF through the given `(x, F(x))` knots; the first
    /// knot has F = 0 and the last F = 1.
    PiecewiseLinear(Vec<[f64; 2]>),
}

impl BaseDistribution {
    pub fn validate(&self) -> Result<()> {
        match self {
            BaseDistribution::Uniform([a, b]) => {
                if !(a.is_finite() && b.is_finite() && a < b) {
                    return Err(TradeError::InvalidPrior(format!(
                        "uniform bounds must satisfy a < b, got [{a}, {b}]"
                    )));
                }
            }
            BaseDistribution::Exponential(rate) => {
                if !(rate.is_finite() && *rate > 0.0) {
                    return Err(TradeError::InvalidPrior(format!(
                        "exponential rate must be positive, got {rate}"
                    )));
                }
            }
            BaseDistribution::PiecewiseLinear(knots) => {
                if knots.len() < 2
                    || knots[0][1] != 0.0
                    || knots[knots.len() - 1][1] != 1.0
                    || knots.windows(2).any(|w| w[0][0] >= w[1][0] || w[0][1] >= w[1][1])
                {
                    return Err(TradeError::InvalidPrior(
                        "piecewise-linear CDF needs strictly increasing knots from F=0 to F=1"
                            .into(),
                    ));
                }
            }
        }
        Ok(())
    }

    pub fn cdf(&self, x: f64) -> f64 {
        match self {
            BaseDistribution::Uniform([a, b]) => ((x - a) / (b - a)).clamp(0.0, 1.0),
            BaseDistribution::Exponential(rate) => {
                if x <= 0.0 {
                    0.0
                } else {
                    1.0 - (-rate * x).exp()
                }
            }
            BaseDistribution::PiecewiseLinear(knots) => {
                if x <= knots[0][0] {
                    return 0.0;
                }
                if x >= knots[knots.len() - 1][0] {
                    return 1.0;
                }
                let i = knots.partition_point(|k| k[0] <= x);
                let (lo, hi) = (knots[i - 1], knots[i]);
                lo[1] + (hi[1] - lo[1]) * (x - lo[0]) / (hi[0] - lo[0])
            }
        }
    }

    /// Quantile function; `u` in `[0, 1]`.
    pub fn inv_cdf(&self, u: f64) -> f64 {
        debug_assert!((0.0..=1.0).contains(&u));
        match self {
            BaseDistribution::Uniform([a, b]) => a + u * (b - a),
            BaseDistribution::Exponential(rate) => -(-u).ln_1p() / rate,
            BaseDistribution::PiecewiseLinear(knots) => {
                if u <= 0.0 {
                    return knots[0][0];
                }
                if u >= 1.0 {
                    return knots[knots.len() - 1][0];
                }
                let i = knots.partition_point(|k| k[1] <= u);
                let (lo, hi) = (knots[i - 1], knots[i]);
                lo[0] + (hi[0] - lo[0]) * (u - lo[1]) / (hi[1] - lo[1])
            }
        }
    }

    pub fn sample(&self, rng: &mut impl Rng) -> f64 {
        self.inv_cdf(rng.random::<f64>())
    }

    pub fn mean(&self) -> f64 {
        match self {
            BaseDistribution::Uniform([a, b]) => 0.5 * (a + b),
            BaseDistribution::Exponential(rate) => 1.0 / rate,
            BaseDistribution::PiecewiseLinear(knots) => {
                // density is constant on each segment; mass times midpoint.
                knots
                    .windows(2)
                    .map(|w| (w[1][1] - w[0][1]) * 0.5 * (w[0][0] + w[1][0]))
                    .sum()
            }
        }
    }

    /// Lower end of the support.
    pub fn support_min(&self) -> f64 {
        match self {
            BaseDistribution::Uniform([a, _]) => *a,
            BaseDistribution::Exponential(_) => 0.0,
            BaseDistribution::PiecewiseLinear(knots) => knots[0][0],
        }
    }

    /// Upper end of the support; infinite for the exponential.
    pub fn support_max(&self) -> f64 {
        match self {
            BaseDistribution::Uniform([_, b]) => *b,
            BaseDistribution::Exponential(_) => f64::INFINITY,
            BaseDistribution::PiecewiseLinear(knots) => knots[knots.len() - 1][0],
        }
    }
}

/// Finite-support prior; probabilities are positive and sum to one (within
/// 1e-12 for floating inputs). All support members share the same `k`.
#[derive(Debug, Clone)]
pub struct DiscretePrior {
    support: Vec<(Valuation, f64)>,
}

impl DiscretePrior {
    pub fn new(support: Vec<(Valuation, f64)>) -> Result<Self> {
        if support.is_empty() {
            return Err(TradeError::InvalidPrior("empty support".into()));
        }
        let k = support[0].0.units();
        if support.iter().any(|(v, _)| v.units() != k) {
            return Err(TradeError::InvalidPrior(
                "support members must share the same unit count".into(),
            ));
        }
        if support.iter().any(|(_, p)| p.is_nan() || *p <= 0.0) {
            return Err(TradeError::InvalidPrior("probabilities must be positive".into()));
        }
        let total: f64 = support.iter().map(|(_, p)| p).sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(TradeError::InvalidPrior(format!(
                "probabilities sum to {total}, expected 1"
            )));
        }
        Ok(Self { support })
    }

    pub fn point_mass(v: Valuation) -> Self {
        Self {
            support: vec![(v, 1.0)],
        }
    }

    pub fn support(&self) -> &[(Valuation, f64)] {
        &self.support
    }

    pub fn units(&self) -> usize {
        self.support[0].0.units()
    }
}

/// Sorted-i.i.d. prior: `k` i.i.d. draws from `base`, sorted into a marginal
/// profile for `role`, then rebuilt into a valuation. The resulting
/// valuations are submodular by construction (weakly, when draws tie).
#[derive(Debug, Clone)]
pub struct SortedIidPrior {
    pub k: usize,
    pub base: BaseDistribution,
    pub role: Role,
}

impl SortedIidPrior {
    pub fn new(k: usize, base: BaseDistribution, role: Role) -> Result<Self> {
        if k == 0 {
            return Err(TradeError::InvalidPrior("k must be positive".into()));
        }
        base.validate()?;
        Ok(Self { k, base, role })
    }
}

/// A prior over one agent's valuations.
#[derive(Debug, Clone)]
pub enum Prior {
    Discrete(DiscretePrior),
    SortedIid(SortedIidPrior),
}

/// Summary record for reports.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PriorSummary {
    Discrete { k: usize, support: usize },
    SortedIid { k: usize, base: BaseDistribution, role: Role },
}

impl Prior {
    pub fn units(&self) -> usize {
        match self {
            Prior::Discrete(d) => d.units(),
            Prior::SortedIid(s) => s.k,
        }
    }

    pub fn sample(&self, rng: &mut impl Rng) -> Valuation {
        match self {
            Prior::Discrete(d) => {
                let u: f64 = rng.random();
                let mut acc = 0.0;
                for (v, p) in &d.support {
                    acc += p;
                    if u < acc {
                        return v.clone();
                    }
                }
                d.support.last().unwrap().0.clone()
            }
            Prior::SortedIid(s) => {
                let mut draws: Vec<f64> = (0..s.k).map(|_| s.base.sample(rng)).collect();
                draws.sort_by(|a, b| a.partial_cmp(b).unwrap());
                if s.role == Role::Buyer {
                    draws.reverse();
                }
                MarginalProfile::new(s.role, draws)
                    .and_then(|m| m.to_valuation())
                    .expect("sorted non-negative draws always form a valid valuation")
            }
        }
    }

    /// Expected number of units a seller with this prior is willing to sell
    /// at unit price `p`: the sum over `q` of `Pr[w_check(q) <= p]`. For the
    /// sorted-i.i.d. family this collapses to `k * F(p)`.
    pub fn threshold_mass(&self, p: f64) -> f64 {
        match self {
            Prior::Discrete(d) => d
                .support
                .iter()
                .map(|(w, prob)| {
                    let deltas = w.marginal_profile(Role::Seller).deltas;
                    prob * deltas.iter().filter(|&&m| m <= p).count() as f64
                })
                .sum(),
            Prior::SortedIid(s) => s.k as f64 * s.base.cdf(p),
        }
    }

    pub fn describe(&self) -> PriorSummary {
        match self {
            Prior::Discrete(d) => PriorSummary::Discrete {
                k: d.units(),
                support: d.support.len(),
            },
            Prior::SortedIid(s) => PriorSummary::SortedIid {
                k: s.k,
                base: s.base.clone(),
                role: s.role,
            },
        }
    }

    /// Whether every support member passes the class check; sampled
    /// sorted-i.i.d. valuations are validated weakly (ties kept).
    pub fn conforms_to(&self, class: ValuationClass) -> bool {
        match self {
            Prior::Discrete(d) => d.support.iter().all(|(v, _)| v.validate(class)),
            Prior::SortedIid(_) => true,
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let d: PriorDescriptor = serde_json::from_str(text)?;
        d.try_into()
    }
}

/// JSON forms:
/// `{"kind":"discrete","support":[{"values":[0,3,5,6],"prob":1.0}]}` and
/// `{"kind":"sorted_iid","base":{"uniform":[0,10]},"k":5,"role":"seller"}`.
#[derive(Debug, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PriorDescriptor {
    Discrete { support: Vec<SupportEntry> },
    SortedIid {
        base: BaseDistribution,
        k: usize,
        role: Role,
    },
}

#[derive(Debug, Serialize, Deserialize)]
pub struct SupportEntry {
    pub values: Vec<f64>,
    pub prob: f64,
}

impl TryFrom<PriorDescriptor> for Prior {
    type Error = TradeError;

    fn try_from(d: PriorDescriptor) -> Result<Prior> {
        match d {
            PriorDescriptor::Discrete { support } => {
                let support = support
                    .into_iter()
                    .map(|e| Ok((Valuation::new(e.values)?, e.prob)))
                    .collect::<Result<Vec<_>>>()?;
                Ok(Prior::Discrete(DiscretePrior::new(support)?))
            }
            PriorDescriptor::SortedIid { base, k, role } => {
                Ok(Prior::SortedIid(SortedIidPrior::new(k, base, role)?))
            }
        }
    }
}

impl From<&Prior> for PriorDescriptor {
    fn from(p: &Prior) -> PriorDescriptor {
        match p {
            Prior::Discrete(d) => PriorDescriptor::Discrete {
                support: d
                    .support
                    .iter()
                    .map(|(v, prob)| SupportEntry {
                        values: v.values().to_vec(),
                        prob: *prob,
                    })
                    .collect(),
            },
            Prior::SortedIid(s) => PriorDescriptor::SortedIid {
                base: s.base.clone(),
                k: s.k,
                role: s.role,
            },
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn val(v: &[f64]) -> Valuation {
        Valuation::new(v.to_vec()).unwrap()
    }

    #[test]
    fn point_mass_always_sampled() {
        let prior = Prior::Discrete(DiscretePrior::point_mass(val(&[0.0, 3.0, 5.0, 6.0])));
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..10 {
            assert_eq!(prior.sample(&mut rng).values(), &[0.0, 3.0, 5.0, 6.0]);
        }
    }

    #[test]
    fn two_point_frequencies() {
        let prior = Prior::Discrete(
            DiscretePrior::new(vec![
                (val(&[0.0, 1.0]), 0.25),
                (val(&[0.0, 2.0]), 0.75),
            ])
            .unwrap(),
        );
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let n = 100_000;
        let hits = (0..n)
            .filter(|_| prior.sample(&mut rng).value(1) == 1.0)
            .count();
        let freq = hits as f64 / n as f64;
        assert!((freq - 0.25).abs() < 0.01, "freq = {freq}");
    }

    #[test]
    fn sorted_iid_construction() {
        // draws {0.2, 0.7} sorted ascending form the seller marginals
        let m = MarginalProfile::new(Role::Seller, vec![0.2, 0.7]).unwrap();
        let w = m.to_valuation().unwrap();
        assert!((w.value(1) - 0.7).abs() < 1e-15);
        assert!((w.value(2) - 0.9).abs() < 1e-15);
    }

    #[test]
    fn sampled_sorted_iid_is_weakly_submodular() {
        for role in [Role::Buyer, Role::Seller] {
            let prior = Prior::SortedIid(
                SortedIidPrior::new(4, BaseDistribution::Uniform([0.0, 10.0]), role).unwrap(),
            );
            let mut rng = ChaCha8Rng::seed_from_u64(3);
            for _ in 0..200 {
                let v = prior.sample(&mut rng);
                assert!(v.validate_weak(ValuationClass::IncreasingSubmodular));
            }
        }
    }

    #[test]
    fn sampling_is_deterministic_under_seed() {
        let prior = Prior::SortedIid(
            SortedIidPrior::new(5, BaseDistribution::Exponential(0.5), Role::Seller).unwrap(),
        );
        let run = |seed| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            (0..20).map(|_| prior.sample(&mut rng)).collect::<Vec<_>>()
        };
        assert_eq!(run(42), run(42));
        assert_ne!(run(42), run(43));
    }

    #[test]
    fn threshold_mass_discrete() {
        let prior = Prior::Discrete(DiscretePrior::point_mass(val(&[0.0, 3.0, 5.0, 6.0])));
        // seller marginals are [1, 2, 3]
        assert_eq!(prior.threshold_mass(2.0), 2.0);
        assert_eq!(prior.threshold_mass(0.5), 0.0);
        assert_eq!(prior.threshold_mass(100.0), 3.0);
    }

    #[test]
    fn threshold_mass_sorted_iid_closed_form() {
        let prior = Prior::SortedIid(
            SortedIidPrior::new(5, BaseDistribution::Uniform([0.0, 10.0]), Role::Seller).unwrap(),
        );
        assert_eq!(prior.threshold_mass(5.0), 2.5);
        assert_eq!(prior.threshold_mass(-1.0), 0.0);
        assert_eq!(prior.threshold_mass(10.0), 5.0);
    }

    #[test]
    fn order_statistic_identity_monte_carlo() {
        let base = BaseDistribution::Exponential(1.0);
        let k = 5;
        let prior = Prior::SortedIid(SortedIidPrior::new(k, base.clone(), Role::Seller).unwrap());
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let n = 100_000usize;
        for u in [0.1, 0.5, 0.9] {
            let p = base.inv_cdf(u);
            let mut counts = Vec::with_capacity(n);
            for _ in 0..n {
                let w = prior.sample(&mut rng);
                let deltas = w.marginal_profile(Role::Seller).deltas;
                counts.push(deltas.iter().filter(|&&m| m <= p).count() as f64);
            }
            let mean: f64 = counts.iter().sum::<f64>() / n as f64;
            let var: f64 =
                counts.iter().map(|c| (c - mean).powi(2)).sum::<f64>() / (n as f64 - 1.0);
            let stderr = (var / n as f64).sqrt();
            let expect = prior.threshold_mass(p);
            assert!(
                (mean - expect).abs() <= 3.0 * stderr,
                "u={u}: mean {mean} vs closed form {expect} (3se = {})",
                3.0 * stderr
            );
        }
    }

    #[test]
    fn threshold_mass_monotone_in_p() {
        let prior = Prior::Discrete(
            DiscretePrior::new(vec![
                (val(&[0.0, 3.0, 5.0, 6.0]), 0.5),
                (val(&[0.0, 4.0, 7.0, 9.0]), 0.5),
            ])
            .unwrap(),
        );
        let mut last = -1.0;
        for p in [0.0, 1.0, 1.5, 2.0, 2.5, 3.0, 4.0, 10.0] {
            let m = prior.threshold_mass(p);
            assert!(m >= last && (0.0..=3.0).contains(&m));
            last = m;
        }
    }

    #[test]
    fn descriptor_parsing() {
        let p = Prior::from_json(
            r#"{"kind":"discrete","support":[{"values":[0,3,5,6],"prob":0.5},{"values":[0,1,2,3],"prob":0.5}]}"#,
        )
        .unwrap();
        assert_eq!(p.describe(), PriorSummary::Discrete { k: 3, support: 2 });

        let p = Prior::from_json(
            r#"{"kind":"sorted_iid","base":{"uniform":[0.0,10.0]},"k":5,"role":"seller"}"#,
        )
        .unwrap();
        assert_eq!(
            p.describe(),
            PriorSummary::SortedIid {
                k: 5,
                base: BaseDistribution::Uniform([0.0, 10.0]),
                role: Role::Seller
            }
        );

        // probabilities must sum to 1
        assert!(Prior::from_json(
            r#"{"kind":"discrete","support":[{"values":[0,1],"prob":0.9}]}"#
        )
        .is_err());
    }

    #[test]
    fn piecewise_linear_base() {
        let base = BaseDistribution::PiecewiseLinear(vec![[0.0, 0.0], [1.0, 0.5], [3.0, 1.0]]);
        base.validate().unwrap();
        assert_eq!(base.cdf(1.0), 0.5);
        assert_eq!(base.inv_cdf(0.5), 1.0);
        assert!((base.cdf(2.0) - 0.75).abs() < 1e-15);
        assert!((base.mean() - (0.5 * 0.5 + 0.5 * 2.0)).abs() < 1e-15);
    }
}
