//! Quasi-compactness certificates.
//!
//! Each certificate evaluates a domination or drift criterion in closed form:
//! suprema over the unit ball of `L∞(V)` of differences of positive kernels are
//! attained at `f = V` on the positive part, so nothing is sampled. In finite
//! dimension every operator is compact, so the witnesses record the structure
//! of the compact part (rank-one, masked, density threshold) instead; the same
//! witnesses stay meaningful when a truncation is refined.

mod density;
mod domination;
mod lyapunov;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::kernel::{EntryViolation, Kernel};

pub use density::{density_certificate, density_tail, DensityVariant};
pub use domination::{
    check_domination, check_order_domination, expansion_bound_check, expansion_groups,
    ExpansionCheck,
};
pub use lyapunov::{
    check_h1, check_h2, localized_certificate, lower_bound_r, lyapunov_certificate,
    moment_certificate, moment_tail,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CertificateKind {
    Domination,
    OrderDomination,
    Lyapunov,
    LocalizedG,
    LocalizedMoment,
    Density,
    LowerBound,
}

/// The objects a certificate was evaluated with. Kernels are kept in memory for
/// downstream checks but are not serialized.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Witness {
    pub structure: String,
    pub rank: Option<usize>,
    pub e_k: Option<Vec<usize>>,
    pub phi: Option<Vec<f64>>,
    pub mu: Option<Vec<f64>>,
    /// `(B, T(B))` pairs of a density-tail search.
    pub tail: Option<Vec<[f64; 2]>>,
    #[serde(skip)]
    pub k: Option<Kernel>,
    #[serde(skip)]
    pub s: Option<Kernel>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Certificate {
    pub kind: CertificateKind,
    pub parameters: BTreeMap<String, f64>,
    pub witness: Witness,
    /// Every cited inequality holds (within tolerance) and the criterion's
    /// strict inequalities against `r(P)` are met.
    pub valid: bool,
    /// `valid` and the certified bound is strictly below the lower bound.
    pub strict: bool,
    /// `r_lower − r_ess_upper` when both are present.
    pub margin: Option<f64>,
    pub violation: Option<EntryViolation>,
}

impl Certificate {
    pub(crate) fn new(kind: CertificateKind) -> Self {
        Self {
            kind,
            parameters: BTreeMap::new(),
            witness: Witness::default(),
            valid: false,
            strict: false,
            margin: None,
            violation: None,
        }
    }

    pub(crate) fn set(&mut self, name: &str, value: f64) -> &mut Self {
        self.parameters.insert(name.to_string(), value);
        self
    }

    pub fn param(&self, name: &str) -> Option<f64> {
        self.parameters.get(name).copied()
    }

    pub fn r_lower(&self) -> Option<f64> {
        self.param("r_lower")
    }

    pub fn r_ess_upper(&self) -> Option<f64> {
        self.param("r_ess_upper")
    }

    /// Sets `valid`, then derives `margin` and `strict`.
    pub(crate) fn finish(mut self, valid: bool) -> Self {
        self.valid = valid;
        self.margin = match (self.r_lower(), self.r_ess_upper()) {
            (Some(lo), Some(up)) => Some(lo - up),
            _ => None,
        };
        self.strict = valid && self.margin.is_some_and(|m| m > 0.0);
        self
    }
}

/// Numerical rank used to document the structure of a dominating kernel;
/// skipped for large kernels where the SVD would dominate the cost.
pub(crate) fn documented_rank(k: &Kernel) -> Option<usize> {
    const MAX_DIM: usize = 400;
    if k.dim() > MAX_DIM {
        return None;
    }
    let scale = k.entries().amax();
    if scale == 0.0 {
        return Some(0);
    }
    Some(k.entries().rank(1e-12 * scale * k.dim() as f64))
}

/// `max_{x ∈ rows} (R₊ V)(x) / V(x)` for `R = lhs − rhs`; zero on empty rows.
pub(crate) fn positive_excess(lhs: &Kernel, rhs: &Kernel, rows: &[usize]) -> f64 {
    let w = lhs.space().weights();
    rows.iter()
        .map(|&x| {
            (0..lhs.dim())
                .map(|y| (lhs.get(x, y) - rhs.get(x, y)).max(0.0) * w[y])
                .sum::<f64>()
                / w[x]
        })
        .fold(0.0, f64::max)
}

pub(crate) fn complement(n: usize, set: &[usize]) -> Vec<usize> {
    let inside = crate::kernel::indicator(n, set);
    (0..n).filter(|&x| !inside[x]).collect()
}
