//! Absorbed Markov chains: conditioned laws, quasi-stationary distributions
//! read off a peripheral decomposition, the lazy-chain certificate, and Monte
//! Carlo validation.

mod model;
mod simulate;

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::certify::{check_domination, lower_bound_r, Certificate};
use crate::decomposition::PeripheralDecomposition;
use crate::error::{CertifyError, QsdError};
use crate::kernel::{FunctionV, Kernel, MeasureV};

pub use model::{AbsorbedModel, LazyChain, ModelVariant};
pub use simulate::{default_checkpoints, simulate_absorbed, Checkpoint, Simulation};

/// Law of `X_n` given `n < τ_∂`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConditionedLaw {
    pub n: usize,
    pub masses: Vec<f64>,
    pub survival: f64,
}

impl ConditionedLaw {
    pub fn total_variation(&self, other: &[f64]) -> f64 {
        0.5 * self
            .masses
            .iter()
            .zip(other)
            .map(|(a, b)| (a - b).abs())
            .sum::<f64>()
    }
}

fn check_probability(mu0: &MeasureV) -> Result<(), QsdError> {
    let total = mu0.total_mass();
    if (total - 1.0).abs() > 1e-12 {
        return Err(QsdError::NotProbability(total));
    }
    Ok(())
}

/// `μ0 P^n / (μ0 P^n)(1)` and the survival mass `(μ0 P^n)(1)`. The law is
/// renormalized at each step so long horizons do not underflow.
pub fn conditioned_law(mu0: &MeasureV, p: &Kernel, n: usize) -> Result<ConditionedLaw, QsdError> {
    Ok(conditioned_path(mu0, p, n)?
        .pop()
        .expect("horizon 0 included"))
}

/// Conditioned laws at every step `0..=n`.
pub fn conditioned_path(
    mu0: &MeasureV,
    p: &Kernel,
    n: usize,
) -> Result<Vec<ConditionedLaw>, QsdError> {
    check_probability(mu0)?;
    if mu0.space().dim() != p.dim() {
        return Err(crate::error::KernelError::SpaceMismatch.into());
    }
    let mut law = mu0.masses().clone();
    let mut survival = 1.0;
    let mut out = Vec::with_capacity(n + 1);
    out.push(ConditionedLaw {
        n: 0,
        masses: law.iter().copied().collect(),
        survival,
    });
    for step in 1..=n {
        let next: DVector<f64> = (law.transpose() * p.entries()).transpose();
        let mass = next.sum();
        if !(mass > 0.0) {
            return Err(QsdError::Extinction(step));
        }
        survival *= mass;
        law = next / mass;
        out.push(ConditionedLaw {
            n: step,
            masses: law.iter().copied().collect(),
            survival,
        });
    }
    Ok(out)
}

/// One quasi-stationary distribution per bottom basic class:
/// `Σ_{k<d} r^{-k} ν_i P^k`, normalized, for one cyclic class `i` of it.
pub fn qsd_from_decomposition(dec: &PeripheralDecomposition) -> Result<Vec<MeasureV>, QsdError> {
    if let Some((index, &value)) = dec.weights.iter().enumerate().find(|(_, &v)| v < 1.0) {
        return Err(QsdError::WeightBelowOne { index, value });
    }
    let space = dec.space();
    let mut seen = Vec::new();
    let mut out = Vec::new();
    for item in &dec.items {
        if seen.contains(&item.class) {
            continue;
        }
        seen.push(item.class);
        let mut masses = vec![0.0; dec.dim()];
        for (k, nu_k) in item.nu_k.iter().enumerate() {
            let scale = dec.r.powi(-(k as i32));
            for (m, v) in masses.iter_mut().zip(nu_k) {
                *m += scale * v;
            }
        }
        let total: f64 = masses.iter().sum();
        let masses = masses.into_iter().map(|m| (m / total).max(0.0)).collect();
        out.push(MeasureV::new(space.clone(), masses)?);
    }
    Ok(out)
}

/// Domination `P ≤ a 1⊗μ + diag(ρ_δ)` and the lower bound `r(P) ≥ 1 − max ρ_∂`
/// (from `φ ≡ 1`) for a lazy chain whose jump kernel has density at most `a`
/// with respect to `μ`. Valid when `max ρ_δ + max ρ_∂ < 1`.
pub fn lazy_chain_certificate(
    model: &AbsorbedModel,
    mu: &MeasureV,
    a: f64,
) -> Result<Certificate, QsdError> {
    let ModelVariant::LazyChain(chain) = &model.variant else {
        return Err(CertifyError::InvalidParameter {
            name: "model",
            reason: "lazy-chain certificate needs a lazy_chain model".into(),
        }
        .into());
    };
    let p = model.compile()?;
    let n = p.dim();
    if mu.space().dim() != n {
        return Err(crate::error::KernelError::SpaceMismatch.into());
    }
    let mut worst: Option<(usize, usize, f64, f64)> = None;
    for x in 0..n {
        for y in 0..n {
            let (lhs, rhs) = (chain.r[x][y], a * mu.as_slice()[y]);
            if !crate::kernel::approx_le(lhs, rhs) && worst.is_none_or(|w| lhs - rhs > w.2 - w.3) {
                worst = Some((x, y, lhs, rhs));
            }
        }
    }
    if let Some((row, col, lhs, rhs)) = worst {
        return Err(CertifyError::DensityBound { row, col, lhs, rhs }.into());
    }
    let ones = vec![1.0; n];
    let k = Kernel::rank_one(p.space().clone(), &ones, (mu.masses() * a).as_slice())?;
    let s = Kernel::diagonal(p.space().clone(), &chain.rho_delta)?;
    let dom = check_domination(&p, &k, &s)?;
    let lower = lower_bound_r(&p, &FunctionV::constant(p.space().clone(), 1.0))?;

    let mut cert = dom.clone();
    cert.set("a", a)
        .set("r_ess_upper", chain.max_rho_delta())
        .set(
            "r_lower",
            lower.r_lower().expect("lower bound sets r_lower"),
        );
    cert.witness.structure = "K f = a mu(f), S f = rho_delta f".into();
    cert.witness.rank = Some(1);
    cert.witness.mu = Some(mu.as_slice().to_vec());
    cert.witness.phi = Some(ones);
    let valid = dom.valid && chain.max_rho_delta() + chain.max_rho_absorb() < 1.0;
    Ok(cert.finish(valid))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", content = "rate", rename_all = "snake_case")]
pub enum Rate {
    Fitted(f64),
    /// Fewer than two distances above the resolution floor.
    BelowResolution,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceRate {
    pub rate: Rate,
    /// Second-largest eigenvalue modulus over `r(P)`.
    pub predicted: f64,
    /// `(n, TV)` with `TV` the distance at step `n·d`.
    pub points: Vec<(usize, f64)>,
    pub limit: Vec<f64>,
}

/// Distances below this are treated as converged.
pub const TV_RESOLUTION: f64 = 1e-12;

/// Limit of the conditioned law started from `μ0`: the `η`-weighted mixture of
/// the eigenmeasures over the states of maximal growth exponent.
pub fn conditioned_limit(
    dec: &PeripheralDecomposition,
    mu0: &MeasureV,
) -> Result<Vec<f64>, QsdError> {
    let n = dec.dim();
    let weight = |x: usize| dec.items.iter().map(|it| it.eta[x]).sum::<f64>();
    let charged: Vec<usize> = (0..n)
        .filter(|&x| mu0.as_slice()[x] > 0.0 && weight(x) > 0.0)
        .collect();
    let top = charged
        .iter()
        .map(|&x| dec.j[x])
        .max()
        .ok_or(QsdError::NoPeripheralMass)?;
    let mut limit = vec![0.0; n];
    for &x in charged.iter().filter(|&&x| dec.j[x] == top) {
        for item in &dec.items {
            let c = mu0.as_slice()[x] * item.eta[x];
            for (l, v) in limit.iter_mut().zip(&item.nu) {
                *l += c * v;
            }
        }
    }
    let total: f64 = limit.iter().sum();
    Ok(limit.into_iter().map(|l| l / total).collect())
}

/// Geometric rate of `TV(law(X_{nd} | nd < τ_∂), limit)` fitted by least squares
/// of `log TV` on `n ∈ window`, expressed per single step.
pub fn convergence_rate(
    p: &Kernel,
    dec: &PeripheralDecomposition,
    mu0: &MeasureV,
    window: std::ops::RangeInclusive<usize>,
) -> Result<ConvergenceRate, QsdError> {
    let limit = conditioned_limit(dec, mu0)?;
    let d = dec.d;
    let laws = conditioned_path(mu0, p, window.end() * d)?;
    let points: Vec<(usize, f64)> = window
        .clone()
        .map(|n| (n, laws[n * d].total_variation(&limit)))
        .collect();
    let usable: Vec<(f64, f64)> = points
        .iter()
        .filter(|(_, tv)| *tv > TV_RESOLUTION)
        .map(|&(n, tv)| (n as f64, tv.ln()))
        .collect();
    let rate = if usable.len() < 2 {
        Rate::BelowResolution
    } else {
        let m = usable.len() as f64;
        let mx = usable.iter().map(|u| u.0).sum::<f64>() / m;
        let my = usable.iter().map(|u| u.1).sum::<f64>() / m;
        let sxy: f64 = usable.iter().map(|(x, y)| (x - mx) * (y - my)).sum();
        let sxx: f64 = usable.iter().map(|(x, _)| (x - mx) * (x - mx)).sum();
        Rate::Fitted((sxy / sxx / d as f64).exp())
    };
    Ok(ConvergenceRate {
        rate,
        predicted: second_modulus_ratio(p),
        points,
        limit,
    })
}

/// Largest eigenvalue modulus strictly inside the peripheral circle, over `r`.
pub fn second_modulus_ratio(p: &Kernel) -> f64 {
    let moduli: Vec<f64> = p.eigenvalues().iter().map(|z| z.norm()).collect();
    let r = moduli.iter().copied().fold(0.0, f64::max);
    if r == 0.0 {
        return 0.0;
    }
    moduli
        .into_iter()
        .filter(|&m| m < r * (1.0 - 1e-9))
        .fold(0.0, f64::max)
        / r
}
