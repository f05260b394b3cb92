use super::{complement, documented_rank, positive_excess, Certificate, CertificateKind};
use crate::error::CertifyError;
use crate::kernel::{FunctionV, Kernel};

/// Smallest `θ1` with `PV ≤ θ1 V` off `E_K` (zero when `E_K` is everything).
pub fn check_h1(p: &Kernel, e_k: &[usize]) -> f64 {
    let drift = p.drift_ratios();
    complement(p.dim(), e_k)
        .into_iter()
        .map(|x| drift[x])
        .fold(0.0, f64::max)
}

/// Smallest `θ2` with `Pf ≤ Kf + θ2 V ‖f‖_V` on `E_K` for all `f ≥ 0`:
/// `max_{x ∈ E_K} ((P − K)₊ V)(x) / V(x)`.
pub fn check_h2(p: &Kernel, e_k: &[usize], k: &Kernel) -> f64 {
    positive_excess(p, k, e_k)
}

fn attach_e_k(cert: &mut Certificate, e_k: &[usize]) {
    let mut sorted = e_k.to_vec();
    sorted.sort_unstable();
    sorted.dedup();
    cert.witness.e_k = Some(sorted);
}

/// Global drift off `E_K` plus local domination on it:
/// `r_ess(P) ≤ θ1 ∨ θ2`, valid when both are below `r(P)`.
///
/// The recorded `S` is `1_{E_K^c} P + 1_{E_K} (P − K)₊` and the recorded `K`
/// is `1_{E_K} K`, so `P ≤ K + S` and `‖S‖_V ≤ θ1 ∨ θ2`.
pub fn lyapunov_certificate(
    p: &Kernel,
    e_k: &[usize],
    k: &Kernel,
) -> Result<Certificate, CertifyError> {
    let theta1 = check_h1(p, e_k);
    let theta2 = check_h2(p, e_k, k);
    let r = p.spectral_radius();
    let outside = complement(p.dim(), e_k);
    let s = p
        .mask_rows(&outside)
        .add(&p.sub(k)?.positive_part().mask_rows(e_k))?;
    let k_masked = k.mask_rows(e_k);

    let mut cert = Certificate::new(CertificateKind::Lyapunov);
    cert.set("theta1", theta1)
        .set("theta2", theta2)
        .set("r_ess_upper", theta1.max(theta2))
        .set("r_lower", r);
    attach_e_k(&mut cert, e_k);
    cert.witness.structure = "S = 1_{E_K^c} P + 1_{E_K} (P - K)_+".into();
    cert.witness.rank = documented_rank(&k_masked);
    cert.witness.k = Some(k_masked);
    cert.witness.s = Some(s);
    Ok(cert.finish(theta1 < r && theta2 < r))
}

/// `Pφ ≥ θφ` with `φ ≥ 0, φ ≠ 0` gives `r(P) ≥ θ`; `θ = min_{φ > 0} Pφ/φ`.
pub fn lower_bound_r(p: &Kernel, phi: &FunctionV) -> Result<Certificate, CertifyError> {
    if let Some((index, &value)) = phi.as_slice().iter().enumerate().find(|(_, &v)| v < 0.0) {
        return Err(crate::error::KernelError::NegativeFunction { index, value }.into());
    }
    let p_phi = p.apply(phi);
    let theta = phi
        .as_slice()
        .iter()
        .zip(p_phi.as_slice())
        .filter(|(&f, _)| f > 0.0)
        .map(|(f, pf)| pf / f)
        .reduce(f64::min)
        .ok_or(crate::error::KernelError::ZeroFunction)?;
    let mut cert = Certificate::new(CertificateKind::LowerBound);
    cert.set("theta", theta).set("r_lower", theta);
    cert.witness.structure = "P phi >= theta phi".into();
    cert.witness.phi = Some(phi.as_slice().to_vec());
    Ok(cert.finish(theta > 0.0))
}

/// Localized domination by an operator `G` with `G^k` compact:
/// `P(1_{E_K} f) ≤ Gf + θ3 V ‖f‖_V` on `E_K` and
/// `θ = (θ3 + θ1) Σ_{i<k} ‖G^i‖ ‖P^{k−i}‖ < r(P)^{k+1}` give
/// `r_ess(P) ≤ θ1 ∨ θ^{1/(k+1)}`.
pub fn localized_certificate(
    p: &Kernel,
    e_k: &[usize],
    g: &Kernel,
    k: u32,
    theta3: f64,
) -> Result<Certificate, CertifyError> {
    if k == 0 {
        return Err(CertifyError::InvalidParameter {
            name: "k",
            reason: "must be at least 1".into(),
        });
    }
    let masked = p.mask_cols(e_k);
    let required = positive_excess(&masked, g, e_k);
    if !crate::kernel::approx_le(required, theta3) {
        return Err(CertifyError::MaskedDomination {
            required,
            given: theta3,
        });
    }
    let theta1 = check_h1(p, e_k);
    let sum: f64 = (0..k)
        .map(|i| g.pow(i).weighted_norm() * p.pow(k - i).weighted_norm())
        .sum();
    let theta = (theta3 + theta1) * sum;
    let r = p.spectral_radius();
    let exponent = f64::from(k + 1);

    let mut cert = Certificate::new(CertificateKind::LocalizedG);
    cert.set("theta1", theta1)
        .set("theta3", theta3)
        .set("theta", theta)
        .set("k", f64::from(k))
        .set("r_ess_upper", theta1.max(theta.powf(1.0 / exponent)))
        .set("r_lower", r);
    attach_e_k(&mut cert, e_k);
    cert.witness.structure = "P(1_{E_K} f) <= G f + theta3 V |f|_V on E_K".into();
    cert.witness.rank = documented_rank(g);
    cert.witness.k = Some(g.clone());
    Ok(cert.finish(theta < r.powf(exponent)))
}

/// `sup_{x ∈ E_K} P(V 1_{V > A})(x) / V(x)`.
pub fn moment_tail(p: &Kernel, e_k: &[usize], a: f64) -> f64 {
    let w = p.space().weights();
    e_k.iter()
        .map(|&x| {
            (0..p.dim())
                .filter(|&y| w[y] > a)
                .map(|y| p.get(x, y) * w[y])
                .sum::<f64>()
                / w[x]
        })
        .fold(0.0, f64::max)
}

/// Moment-localized domination: `P(f 1_{V ≤ A}) ≤ K_A f + θ4 V ‖f‖_V` on `E_K`
/// yields (H2) with `θ2 = sup_{E_K} P(V 1_{V>A})/V + θ4`; combined with (H1),
/// `r_ess(P) ≤ θ1 ∨ θ2`.
pub fn moment_certificate(
    p: &Kernel,
    e_k: &[usize],
    a: f64,
    k_a: &Kernel,
    theta4: f64,
) -> Result<Certificate, CertifyError> {
    if !(a > 0.0) {
        return Err(CertifyError::InvalidParameter {
            name: "A",
            reason: format!("must be positive, got {a}"),
        });
    }
    let w = p.space().weights();
    let low: Vec<usize> = (0..p.dim()).filter(|&y| w[y] <= a).collect();
    let k_local = k_a.mask_cols(&low).mask_rows(e_k);
    let required = positive_excess(&p.mask_cols(&low), &k_local, e_k);
    if !crate::kernel::approx_le(required, theta4) {
        return Err(CertifyError::MaskedDomination {
            required,
            given: theta4,
        });
    }
    let tail = moment_tail(p, e_k, a);
    let theta2 = tail + theta4;
    let theta1 = check_h1(p, e_k);
    let r = p.spectral_radius();

    let mut cert = Certificate::new(CertificateKind::LocalizedMoment);
    cert.set("A", a)
        .set("theta1", theta1)
        .set("theta2", theta2)
        .set("theta4", theta4)
        .set("r_ess_upper", theta1.max(theta2))
        .set("r_lower", r);
    attach_e_k(&mut cert, e_k);
    cert.witness.structure = "P(f 1_{V<=A}) <= K_A f + theta4 V |f|_V on E_K".into();
    cert.witness.rank = documented_rank(&k_local);
    cert.witness.k = Some(k_local);
    Ok(cert.finish(theta1 < r && theta2 < r))
}
