//! Instance documents: `(f, g, k)` plus the declared valuation class.

use std::path::Path;

use anyhow::{bail, Context, Result};
use serde::Deserialize;

use bitrade_core::priors::PriorDescriptor;
use bitrade_core::{Prior, Valuation, ValuationClass};

#[derive(Deserialize)]
struct InstanceDoc {
    k: usize,
    class: ValuationClass,
    buyer: PriorDescriptor,
    seller: PriorDescriptor,
}

/// A validated trade instance.
pub struct InstanceSpec {
    pub id: String,
    pub k: usize,
    pub class: ValuationClass,
    pub buyer: Prior,
    pub seller: Prior,
}

pub fn load_instance(path: &Path) -> Result<InstanceSpec> {
    let text = std::fs::read_to_string(path)
        .with_context(|| format!("reading instance file {}", path.display()))?;
    let doc: InstanceDoc = serde_json::from_str(&text)
        .with_context(|| format!("parsing instance file {}", path.display()))?;
    let id = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "instance".into());

    let buyer = convert_side("buyer", doc.buyer, doc.k, doc.class)?;
    let seller = convert_side("seller", doc.seller, doc.k, doc.class)?;
    Ok(InstanceSpec {
        id,
        k: doc.k,
        class: doc.class,
        buyer,
        seller,
    })
}

fn convert_side(
    field: &str,
    descriptor: PriorDescriptor,
    k: usize,
    class: ValuationClass,
) -> Result<Prior> {
    if let PriorDescriptor::Discrete { support } = &descriptor {
        for (i, entry) in support.iter().enumerate() {
            let v = Valuation::new(entry.values.clone())
                .with_context(|| format!("{field}.support[{i}]"))?;
            if !v.validate(class) {
                bail!(
                    "{field}.support[{i}]: valuation {:?} violates declared class at index {}",
                    entry.values,
                    first_class_breach(&v, class)
                );
            }
        }
    }
    let prior: Prior = descriptor
        .try_into()
        .with_context(|| format!("{field} prior"))?;
    if prior.units() != k {
        bail!(
            "{field} prior has k = {} but the instance declares k = {k}",
            prior.units()
        );
    }
    Ok(prior)
}

/// Index of the first point where the valuation leaves the class, for
/// error messages.
fn first_class_breach(v: &Valuation, class: ValuationClass) -> usize {
    let vals = v.values();
    for i in 1..vals.len() {
        if vals[i] <= vals[i - 1] {
            return i;
        }
        if class == ValuationClass::IncreasingSubmodular
            && i >= 2
            && vals[i] - vals[i - 1] > vals[i - 1] - vals[i - 2]
        {
            return i;
        }
    }
    vals.len().saturating_sub(1)
}
