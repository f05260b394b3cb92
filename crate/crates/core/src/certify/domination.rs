use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::{documented_rank, Certificate, CertificateKind};
use crate::error::CertifyError;
use crate::kernel::Kernel;

/// `0 ≤ P ≤ K + S` entrywise gives `r_ess(P) ≤ r(S)` (with `K` compact).
pub fn check_domination(p: &Kernel, k: &Kernel, s: &Kernel) -> Result<Certificate, CertifyError> {
    let dominating = k.add(s)?;
    let violation = p.domination_violation(&dominating)?;
    let mut cert = Certificate::new(CertificateKind::Domination);
    cert.set("r_ess_upper", s.spectral_radius())
        .set("r_lower", p.spectral_radius());
    cert.violation = violation;
    cert.witness.structure = "P <= K + S".into();
    cert.witness.rank = documented_rank(k);
    cert.witness.k = Some(k.clone());
    cert.witness.s = Some(s.clone());
    Ok(cert.finish(violation.is_none()))
}

/// `0 ≤ P ≤ Q` gives `r_ess(P) ≤ r_ess(Q)`; a bound already certified for `Q`
/// is transferred to `P`.
pub fn check_order_domination(
    p: &Kernel,
    q: &Kernel,
    q_bound: Option<f64>,
) -> Result<Certificate, CertifyError> {
    let violation = p.domination_violation(q)?;
    let mut cert = Certificate::new(CertificateKind::OrderDomination);
    if let Some(bound) = q_bound {
        cert.set("r_ess_upper", bound)
            .set("r_lower", p.spectral_radius());
    }
    cert.violation = violation;
    cert.witness.structure = "P <= Q".into();
    cert.witness.k = Some(q.clone());
    Ok(cert.finish(violation.is_none()))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExpansionCheck {
    pub n: u32,
    pub holds: bool,
    /// `‖P^n − R_n‖_V`.
    pub lhs: f64,
    /// `‖S‖^n + n‖D‖‖S‖^{n−1} + n(n−1)/2 ‖D‖²‖S‖^{n−2}`.
    pub bound: f64,
    pub slack: f64,
}

/// Sums of the words with exactly 0, 1 and 2 factors `D = (P − S)₊` in the
/// expansion of `P^n = (D + M)^n`, `M = S ∧ P`.
///
/// Grouping by the number of `D` factors obeys
/// `G_k(m + 1) = G_k(m) M + G_{k−1}(m) D`, which avoids enumerating `2^n` words.
pub fn expansion_groups(p: &Kernel, s: &Kernel, n: u32) -> Result<[DMatrix<f64>; 3], CertifyError> {
    let d = p.sub(s)?.positive_part();
    let m = p.meet(s)?;
    let dim = p.dim();
    let mut groups = [
        DMatrix::identity(dim, dim),
        DMatrix::zeros(dim, dim),
        DMatrix::zeros(dim, dim),
    ];
    for _ in 0..n {
        let g2 = &groups[2] * m.entries() + &groups[1] * d.entries();
        let g1 = &groups[1] * m.entries() + &groups[0] * d.entries();
        let g0 = &groups[0] * m.entries();
        groups = [g0, g1, g2];
    }
    Ok(groups)
}

/// The first three terms of the expansion of `P^n` in powers of `(P − S)₊`
/// are bounded by `‖S‖^n + n‖(P−S)₊‖‖S‖^{n−1} + n(n−1)/2 ‖(P−S)₊‖²‖S‖^{n−2}`.
///
/// `P` is split exactly as `(P − S)₊ + S ∧ P`, so `R_n` (the words with at least
/// three factors `(P − S)₊`) satisfies `P^n − R_n = G_0 + G_1 + G_2 ≥ 0`.
pub fn expansion_bound_check(
    p: &Kernel,
    s: &Kernel,
    n: u32,
) -> Result<ExpansionCheck, CertifyError> {
    if n < 3 {
        return Err(CertifyError::InvalidParameter {
            name: "n",
            reason: format!("expansion needs n >= 3, got {n}"),
        });
    }
    let groups = expansion_groups(p, s, n)?;
    let head = Kernel::from_parts_unchecked(
        p.space().clone(),
        (&groups[0] + &groups[1] + &groups[2]).map(|v| v.max(0.0)),
    );
    let lhs = head.weighted_norm();
    let d_norm = p.sub(s)?.positive_part().weighted_norm();
    let s_norm = s.weighted_norm();
    let nf = f64::from(n);
    let bound = s_norm.powi(n as i32)
        + nf * d_norm * s_norm.powi(n as i32 - 1)
        + 0.5 * nf * (nf - 1.0) * d_norm * d_norm * s_norm.powi(n as i32 - 2);
    let slack = bound - lhs;
    Ok(ExpansionCheck {
        n,
        holds: lhs <= bound * (1.0 + 1e-10),
        lhs,
        bound,
        slack,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::sync::Arc;

    fn kernel(rows: &[&[f64]]) -> Kernel {
        Kernel::from_rows(&rows.iter().map(|r| r.to_vec()).collect::<Vec<_>>()).unwrap()
    }

    #[test]
    fn trivial_split_k_equals_p() {
        let p = kernel(&[&[0.2, 0.5], &[0.3, 0.3]]);
        let zero = Kernel::zeros(p.space().clone());
        let cert = check_domination(&p, &p, &zero).unwrap();
        assert!(cert.valid && cert.strict);
        assert_eq!(cert.r_ess_upper(), Some(0.0));
    }

    #[test]
    fn no_compact_part_is_vacuous() {
        let p = kernel(&[&[0.2, 0.5], &[0.3, 0.3]]);
        let zero = Kernel::zeros(p.space().clone());
        let cert = check_domination(&p, &zero, &p).unwrap();
        assert!(cert.valid);
        assert!(!cert.strict);
        assert!((cert.r_ess_upper().unwrap() - cert.r_lower().unwrap()).abs() < 1e-12);
    }

    #[test]
    fn order_domination_reports_worst_entry() {
        let p = kernel(&[&[0.2, 0.5], &[0.3, 0.3]]);
        assert!(check_order_domination(&p, &p, None).unwrap().valid);
        let q = kernel(&[&[0.2, 0.4], &[0.3, 0.3]]);
        let cert = check_order_domination(&p, &q, None).unwrap();
        assert!(!cert.valid);
        let v = cert.violation.unwrap();
        assert_eq!((v.row, v.col), (0, 1));
    }

    #[test]
    fn expansion_with_s_equal_p_has_norm_gap_slack() {
        let p = kernel(&[&[0.2, 0.5], &[0.3, 0.3]]);
        let check = expansion_bound_check(&p, &p, 5).unwrap();
        assert!(check.holds);
        let gap = p.weighted_norm().powi(5) - p.pow(5).weighted_norm();
        assert!((check.slack - gap).abs() < 1e-15);
    }

    #[test]
    fn expansion_with_zero_s() {
        let p = kernel(&[&[0.2, 0.5], &[0.3, 0.3]]);
        let zero = Kernel::zeros(p.space().clone());
        let check = expansion_bound_check(&p, &zero, 4).unwrap();
        assert!(check.holds);
        assert_eq!(check.lhs, 0.0);
        assert_eq!(check.bound, 0.0);
    }

    #[test]
    fn expansion_rejects_short_words() {
        let p = Kernel::identity(Arc::new(crate::kernel::WeightedSpace::uniform(2)));
        assert!(expansion_bound_check(&p, &p, 2).is_err());
    }
}
