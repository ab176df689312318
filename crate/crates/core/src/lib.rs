//! Multi-unit bilateral trade: one buyer, one seller who starts with `k`
//! identical units, and the family of fixed price mechanisms that trade a
//! quantity from a pre-announced set at a pre-announced per-unit price.
//!
//! The crate provides the mechanism itself in two equivalent forms
//! ([`mechanism`]), exhaustive IR/SBB/DSIC checking and counterexample
//! search ([`verify`]), priors over valuations ([`priors`]), welfare
//! accounting ([`welfare`]) and the two approximation price rules
//! ([`pricing`]).

pub mod error;
pub mod mechanism;
pub mod pricing;
pub mod priors;
pub mod valuations;
pub mod verify;
pub mod welfare;

pub use error::TradeError;
pub use mechanism::{FixedPriceMechanism, Outcome, Schedule, TieBreaking};
pub use priors::{BaseDistribution, DiscretePrior, Prior, SortedIidPrior};
pub use valuations::{MarginalProfile, Role, Valuation, ValuationClass};
pub use verify::{Violation, ViolationKind};
pub use pricing::{build_det2, build_grqm, PriceSolution};
pub use welfare::{Estimate, EvalMode, Method, PriceRule, WelfareReport};
