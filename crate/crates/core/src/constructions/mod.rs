//! Constructive lemmas: spectral discretization, flat embedding and
//! product-state domination, each returning a numerically certified result.

mod discretize;
mod domination;
mod flat;

pub use discretize::{discretize_left, level_bound, DiscretizationRecord, DiscretizationResult};
pub use domination::{
    dominate_conjugated, dominate_conjugated_flat, dominate_mixture, dominate_vec, ConjugatedDomination,
    DominationRecord, ProductDomination,
};
pub use flat::{flat_embed, flat_embed_product, ClassTerm, FlatEmbedding, FlatOptions, FlatRecord, SegmentBlock, DEFAULT_RESOLUTION};

use crate::error::{Error, Result};
use crate::linalg::{domination_margin, trace_norm, DensityOperator, SubState};

/// Certificate tolerance for every operator inequality produced here.
pub const CERT_TOL: f64 = 1e-9;

/// ρ ≼ (1+δ)σ implies ‖ρ−σ‖₁ ≤ 2δ + (1 − Tr ρ). Returns the bound after
/// checking the precondition and the conclusion.
pub fn short_distance_bound(rho: &SubState, sigma: &DensityOperator, delta: f64) -> Result<f64> {
    if rho.dim() != sigma.dim() {
        return Err(Error::Shape("state dimensions differ".into()));
    }
    if !(delta >= 0.0) {
        return Err(Error::contract("delta must be nonnegative"));
    }
    let margin = domination_margin(rho.matrix(), sigma.matrix(), 1.0 + delta)?;
    if margin < -CERT_TOL {
        return Err(Error::contract_psd("rho is not dominated by (1+delta)·sigma", margin));
    }
    let bound = 2.0 * delta + (1.0 - rho.trace());
    let actual = trace_norm(&(rho.matrix() - sigma.matrix()));
    if actual > bound + CERT_TOL {
        return Err(Error::contract(format!("distance {actual} exceeds the bound {bound}")));
    }
    Ok(bound)
}
