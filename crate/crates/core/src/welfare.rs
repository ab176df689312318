//! Gain from trade, the efficient trade quantity, the OPT benchmark, and
//! expected social welfare of a price rule.
//!
//! Evaluation is exact over discrete priors. For a sorted-i.i.d. seller
//! prior against a discrete buyer prior, OPT and SW reduce to
//! one-dimensional integrals of order-statistic CDFs of the base
//! distribution and are evaluated by quadrature; the randomized quantile
//! rule adds an outer integral over the quantile draw. Monte Carlo
//! estimation covers every combination and reports a standard error.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Result, TradeError};
use crate::mechanism::{FixedPriceMechanism, TieBreaking};
use crate::pricing::{solve_threshold_price, DEFAULT_MASS_TOL};
use crate::priors::{BaseDistribution, DiscretePrior, Prior};
use crate::valuations::{Role, Valuation, ValuationClass};

/// Welfare increment of trading the q-th unit: `max{0, v_hat(q) - w_check(q)}`.
pub fn gft(v: &Valuation, w: &Valuation, q: usize) -> f64 {
    debug_assert!(q >= 1 && q <= v.units());
    let vh = v.marginal_profile(Role::Buyer);
    let wc = w.marginal_profile(Role::Seller);
    (vh.delta(q) - wc.delta(q)).max(0.0)
}

/// The welfare-maximising trade quantity `max{q : v_hat(q) >= w_check(q)}`
/// (0 when no unit trades profitably). Defined for submodular profiles
/// only, where the marginal curves cross once.
pub fn efficient_quantity(v: &Valuation, w: &Valuation) -> Result<usize> {
    if !v.validate_weak(ValuationClass::IncreasingSubmodular)
        || !w.validate_weak(ValuationClass::IncreasingSubmodular)
    {
        return Err(TradeError::InvalidValuation(
            "efficient quantity requires increasing submodular valuations".into(),
        ));
    }
    Ok(crossing_quantity(v, w))
}

fn crossing_quantity(v: &Valuation, w: &Valuation) -> usize {
    let vh = v.marginal_profile(Role::Buyer);
    let wc = w.marginal_profile(Role::Seller);
    (1..=v.units())
        .rev()
        .find(|&q| vh.delta(q) >= wc.delta(q))
        .unwrap_or(0)
}

/// Per-profile optimum `w(k) + sum of gains up to the crossing`.
fn profile_opt(v: &Valuation, w: &Valuation) -> f64 {
    let k = v.units();
    let qstar = crossing_quantity(v, w);
    w.value(k) + (1..=qstar).map(|q| gft(v, w, q)).sum::<f64>()
}

fn profile_sw(outcome_units: usize, v: &Valuation, w: &Valuation) -> f64 {
    v.value(outcome_units) + w.value(v.units() - outcome_units)
}

/// How a welfare quantity was computed.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Exact,
    Quadrature { nodes: usize },
    MonteCarlo { trials: u64 },
}

impl std::fmt::Display for Method {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Method::Exact => write!(f, "exact"),
            Method::Quadrature { .. } => write!(f, "quadrature"),
            Method::MonteCarlo { .. } => write!(f, "monte_carlo"),
        }
    }
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct Estimate {
    pub value: f64,
    pub stderr: Option<f64>,
    pub method: Method,
}

/// Evaluation mode. `Exact` covers discrete priors and the sorted-i.i.d.
/// seller quadrature; `MonteCarlo` covers everything, with seeded sampling.
#[derive(Debug, Clone, Copy)]
pub enum EvalMode {
    Exact { quad_nodes: usize },
    MonteCarlo { trials: u64 },
}

impl EvalMode {
    pub fn exact() -> Self {
        EvalMode::Exact { quad_nodes: 256 }
    }
}

/// The mechanism whose welfare is being evaluated: a concrete fixed price
/// mechanism, or the randomized quantile rule (a distribution over them).
#[derive(Debug, Clone)]
pub enum PriceRule {
    Fixed(FixedPriceMechanism),
    Grqm,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct WelfareReport {
    pub opt: Estimate,
    pub sw: Estimate,
    pub ratio: f64,
}

/// Expected optimal social welfare of the instance `(f, g, k)`.
pub fn expected_opt<R: Rng>(
    f: &Prior,
    g: &Prior,
    mode: EvalMode,
    rng: &mut R,
) -> Result<Estimate> {
    check_instance(f, g)?;
    match mode {
        EvalMode::Exact { quad_nodes } => match (f, g) {
            (Prior::Discrete(fd), Prior::Discrete(gd)) => {
                let value = pair_expectation(fd, gd, profile_opt);
                Ok(Estimate {
                    value,
                    stderr: None,
                    method: Method::Exact,
                })
            }
            (Prior::Discrete(fd), Prior::SortedIid(gs)) => {
                require_seller(g)?;
                let value = fd
                    .support()
                    .iter()
                    .map(|(v, pv)| {
                        require_submodular(v).map(|_| pv * opt_fixed_buyer(v, &gs.base, quad_nodes))
                    })
                    .sum::<Result<f64>>()?;
                Ok(Estimate {
                    value,
                    stderr: None,
                    method: Method::Quadrature { nodes: quad_nodes },
                })
            }
            _ => Err(TradeError::UnsupportedMode(
                "exact OPT needs a discrete buyer prior and a discrete or sorted-iid seller prior"
                    .into(),
            )),
        },
        EvalMode::MonteCarlo { trials } => {
            let est = monte_carlo(trials, || {
                let v = f.sample(rng);
                let w = g.sample(rng);
                profile_opt(&v, &w)
            });
            Ok(est)
        }
    }
}

/// Expected social welfare of a price rule on the instance `(f, g, k)`.
pub fn expected_sw<R: Rng>(
    rule: &PriceRule,
    f: &Prior,
    g: &Prior,
    mode: EvalMode,
    rng: &mut R,
) -> Result<Estimate> {
    check_instance(f, g)?;
    let k = f.units();
    match mode {
        EvalMode::Exact { quad_nodes } => match (rule, f, g) {
            (PriceRule::Fixed(m), Prior::Discrete(fd), Prior::Discrete(gd)) => {
                let value = pair_expectation(fd, gd, |v, w| {
                    profile_sw(m.run_direct(v, w).buyer_units, v, w)
                });
                Ok(Estimate {
                    value,
                    stderr: None,
                    method: Method::Exact,
                })
            }
            (PriceRule::Fixed(m), Prior::Discrete(fd), Prior::SortedIid(gs)) => {
                require_seller(g)?;
                require_full_range(m)?;
                let value = fd
                    .support()
                    .iter()
                    .map(|(v, pv)| {
                        require_submodular(v)
                            .map(|_| pv * sw_fixed_buyer(v, &gs.base, m.unit_price(), quad_nodes))
                    })
                    .sum::<Result<f64>>()?;
                Ok(Estimate {
                    value,
                    stderr: None,
                    method: Method::Quadrature { nodes: quad_nodes },
                })
            }
            (PriceRule::Grqm, Prior::Discrete(fd), Prior::SortedIid(gs)) => {
                require_seller(g)?;
                let value = fd
                    .support()
                    .iter()
                    .map(|(v, pv)| {
                        require_submodular(v)
                            .map(|_| pv * grqm_sw_sorted_iid(v, &gs.base, quad_nodes))
                    })
                    .sum::<Result<f64>>()?;
                Ok(Estimate {
                    value,
                    stderr: None,
                    method: Method::Quadrature { nodes: quad_nodes },
                })
            }
            (PriceRule::Grqm, Prior::Discrete(fd), Prior::Discrete(gd)) => {
                let value = grqm_sw_discrete(fd, gd, g, k)?;
                Ok(Estimate {
                    value,
                    stderr: None,
                    method: Method::Exact,
                })
            }
            _ => Err(TradeError::UnsupportedMode(
                "exact SW needs a discrete buyer prior; use Monte Carlo otherwise".into(),
            )),
        },
        EvalMode::MonteCarlo { trials } => {
            let est = match rule {
                PriceRule::Fixed(m) => monte_carlo(trials, || {
                    let v = f.sample(rng);
                    let w = g.sample(rng);
                    profile_sw(m.run_direct(&v, &w).buyer_units, &v, &w)
                }),
                PriceRule::Grqm => {
                    let mut err = None;
                    let est = monte_carlo(trials, || {
                        let v = f.sample(rng);
                        let w = g.sample(rng);
                        let draw = crate::pricing::sample_quantile(rng);
                        match solve_threshold_price(g, draw.x * k as f64, DEFAULT_MASS_TOL)
                            .and_then(|sol| {
                                FixedPriceMechanism::full_range(sol.p, TieBreaking::FavorHighest, k)
                            }) {
                            Ok(m) => profile_sw(m.run_direct(&v, &w).buyer_units, &v, &w),
                            Err(e) => {
                                err.get_or_insert(e);
                                f64::NAN
                            }
                        }
                    });
                    if let Some(e) = err {
                        return Err(e);
                    }
                    est
                }
            };
            Ok(est)
        }
    }
}

/// OPT, SW, and their ratio in one report.
pub fn welfare_report<R: Rng>(
    rule: &PriceRule,
    f: &Prior,
    g: &Prior,
    mode: EvalMode,
    rng: &mut R,
) -> Result<WelfareReport> {
    let opt = expected_opt(f, g, mode, rng)?;
    let sw = expected_sw(rule, f, g, mode, rng)?;
    Ok(WelfareReport {
        opt,
        sw,
        ratio: opt.value / sw.value,
    })
}

fn check_instance(f: &Prior, g: &Prior) -> Result<()> {
    if f.units() != g.units() {
        return Err(TradeError::InvalidPrior(format!(
            "buyer and seller priors disagree on k ({} vs {})",
            f.units(),
            g.units()
        )));
    }
    Ok(())
}

fn require_seller(g: &Prior) -> Result<()> {
    if let Prior::SortedIid(s) = g {
        if s.role != Role::Seller {
            return Err(TradeError::UnsupportedMode(
                "the continuous prior must be on the seller side".into(),
            ));
        }
    }
    Ok(())
}

fn require_submodular(v: &Valuation) -> Result<()> {
    if v.validate_weak(ValuationClass::IncreasingSubmodular) {
        Ok(())
    } else {
        Err(TradeError::UnsupportedMode(
            "quadrature evaluation requires submodular buyer valuations".into(),
        ))
    }
}

fn require_full_range(m: &FixedPriceMechanism) -> Result<()> {
    let full = m.quantities().len() == m.units()
        && matches!(m.tie(), TieBreaking::FavorHighest);
    if full {
        Ok(())
    } else {
        Err(TradeError::UnsupportedMode(
            "quadrature evaluation covers single-unit schedules (S = 1..=k, favor-highest) only"
                .into(),
        ))
    }
}

fn pair_expectation(
    f: &DiscretePrior,
    g: &DiscretePrior,
    mut term: impl FnMut(&Valuation, &Valuation) -> f64,
) -> f64 {
    let mut total = 0.0;
    for (v, pv) in f.support() {
        for (w, pw) in g.support() {
            total += pv * pw * term(v, w);
        }
    }
    total
}

fn monte_carlo(trials: u64, mut draw: impl FnMut() -> f64) -> Estimate {
    assert!(trials >= 2, "Monte Carlo needs at least two trials");
    // compensated accumulation keeps the reduction order-independent enough
    // for reproducibility at 1e5+ trials
    let mut sum = Kahan::default();
    let mut sum_sq = Kahan::default();
    for _ in 0..trials {
        let x = draw();
        sum.add(x);
        sum_sq.add(x * x);
    }
    let n = trials as f64;
    let mean = sum.total() / n;
    let var = ((sum_sq.total() - n * mean * mean) / (n - 1.0)).max(0.0);
    Estimate {
        value: mean,
        stderr: Some((var / n).sqrt()),
        method: Method::MonteCarlo { trials },
    }
}

#[derive(Default)]
struct Kahan {
    sum: f64,
    carry: f64,
}

impl Kahan {
    fn add(&mut self, x: f64) {
        let y = x - self.carry;
        let t = self.sum + y;
        self.carry = (t - self.sum) - y;
        self.sum = t;
    }

    fn total(&self) -> f64 {
        self.sum
    }
}

// ---- order-statistic quadrature -------------------------------------------

/// CDF of the q-th smallest of k i.i.d. draws, as a function of the base
/// CDF value `u`.
fn order_stat_cdf(u: f64, k: usize, q: usize) -> f64 {
    if u <= 0.0 {
        return 0.0;
    }
    if u >= 1.0 {
        return 1.0;
    }
    let mut total = 0.0;
    let mut coeff = 1.0f64;
    // C(k, j) built multiplicatively while walking j upward
    for j in 0..=k {
        if j >= q {
            total += coeff * u.powi(j as i32) * (1.0 - u).powi((k - j) as i32);
        }
        if j < k {
            coeff = coeff * (k - j) as f64 / (j + 1) as f64;
        }
    }
    total
}

fn simpson(f: impl Fn(f64) -> f64, a: f64, b: f64, intervals: usize) -> f64 {
    if b <= a {
        return 0.0;
    }
    let n = intervals.max(2) & !1usize;
    let h = (b - a) / n as f64;
    let mut total = f(a) + f(b);
    for i in 1..n {
        let weight = if i % 2 == 1 { 4.0 } else { 2.0 };
        total += weight * f(a + i as f64 * h);
    }
    total * h / 3.0
}

/// Integral of the q-th order-statistic CDF from the bottom of the support
/// up to `upper`, extending with mass 1 above a bounded support.
fn int_order_stat_cdf(base: &BaseDistribution, k: usize, q: usize, upper: f64, nodes: usize) -> f64 {
    let lo = base.support_min();
    if upper <= lo {
        return 0.0;
    }
    let hi = base.support_max();
    let cap = if hi.is_finite() { upper.min(hi) } else { upper };
    let tail = if hi.is_finite() && upper > hi {
        upper - hi
    } else {
        0.0
    };
    simpson(|t| order_stat_cdf(base.cdf(t), k, q), lo, cap, nodes.max(128)) + tail
}

/// `E[w(k)] + sum_q E[(v_hat(q) - W_(q))^+]` for a fixed submodular buyer
/// against k sorted i.i.d. seller draws.
fn opt_fixed_buyer(v: &Valuation, base: &BaseDistribution, nodes: usize) -> f64 {
    let k = v.units();
    let vh = v.marginal_profile(Role::Buyer);
    let mut total = k as f64 * base.mean();
    for q in 1..=k {
        total += int_order_stat_cdf(base, k, q, vh.delta(q), nodes);
    }
    total
}

/// Expected social welfare of the full-range fixed price mechanism at unit
/// price `p`: the q-th unit trades iff `v_hat(q) >= p` and the q-th
/// smallest seller draw is at most `p`.
fn sw_fixed_buyer(v: &Valuation, base: &BaseDistribution, p: f64, nodes: usize) -> f64 {
    let k = v.units();
    let vh = v.marginal_profile(Role::Buyer);
    let mut total = k as f64 * base.mean();
    for q in 1..=k {
        let a = vh.delta(q);
        if a < p {
            break; // marginals are non-increasing
        }
        let fq = order_stat_cdf(base.cdf(p), k, q);
        total += (a - p) * fq + int_order_stat_cdf(base, k, q, p, nodes);
    }
    total
}

/// Outer integral over the quantile draw `x` (density `1/x` on `[1/e, 1]`),
/// split at the points where the buyer's acceptance count changes.
fn grqm_sw_sorted_iid(v: &Valuation, base: &BaseDistribution, nodes: usize) -> f64 {
    let k = v.units();
    let vh = v.marginal_profile(Role::Buyer);
    let lo = (-1.0f64).exp();
    let mut cuts = vec![lo, 1.0];
    for q in 1..=k {
        let x = base.cdf(vh.delta(q));
        if x > lo && x < 1.0 {
            cuts.push(x);
        }
    }
    cuts.sort_by(|a, b| a.partial_cmp(b).unwrap());
    cuts.dedup();
    let span = 1.0 - lo;
    let mut total = 0.0;
    for seg in cuts.windows(2) {
        let (a, b) = (seg[0], seg[1]);
        let n = ((nodes as f64 * (b - a) / span).ceil() as usize).max(16);
        total += simpson(
            |x| sw_fixed_buyer(v, base, base.inv_cdf(x), nodes) / x,
            a,
            b,
            n,
        );
    }
    total
}

/// Exact quantile-rule welfare over discrete priors: the solved price is a
/// step function of `x`, so the outer integral collapses to log weights on
/// the mass intervals.
fn grqm_sw_discrete(f: &DiscretePrior, gd: &DiscretePrior, g: &Prior, k: usize) -> Result<f64> {
    let mut marginals: Vec<f64> = gd
        .support()
        .iter()
        .flat_map(|(w, _)| w.marginal_profile(Role::Seller).deltas)
        .collect();
    marginals.sort_by(|a, b| a.partial_cmp(b).unwrap());
    marginals.dedup();
    let x_lo = (-1.0f64).exp();
    let mut total = 0.0;
    let mut prev_mass = 0.0;
    for m in marginals {
        let mass = g.threshold_mass(m);
        let (a, b) = (
            (prev_mass / k as f64).max(x_lo),
            (mass / k as f64).min(1.0),
        );
        prev_mass = mass;
        if b <= a {
            continue;
        }
        let weight = (b / a).ln();
        let mech = FixedPriceMechanism::full_range(m, TieBreaking::FavorHighest, k)?;
        let sw = pair_expectation(f, gd, |v, w| {
            profile_sw(mech.run_direct(v, w).buyer_units, v, w)
        });
        total += weight * sw;
    }
    Ok(total)
}
