use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::lyapunov::{check_h1, localized_certificate, moment_certificate, moment_tail};
use super::{Certificate, CertificateKind};
use crate::error::CertifyError;
use crate::kernel::{Kernel, MeasureV};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "variant")]
pub enum DensityVariant {
    /// Uniform integrability of `p` on `E_K`, through the `G`-localized route
    /// with `k = 1`.
    Integrable,
    /// Uniform integrability of `p` on `{V ≤ A}`, through the moment route.
    Moment { a: f64 },
}

/// `T(B) = max_{x ∈ E_K} V(x)^{-1} Σ_{y ∈ cols} p(x,y) 1_{p(x,y) > B} V(y) ν({y})`.
pub fn density_tail(p: &DMatrix<f64>, nu: &MeasureV, e_k: &[usize], cols: &[usize], b: f64) -> f64 {
    let w = nu.space().weights();
    let masses = nu.as_slice();
    e_k.iter()
        .map(|&x| {
            cols.iter()
                .filter(|&&y| p[(x, y)] > b)
                .map(|&y| p[(x, y)] * w[y] * masses[y])
                .sum::<f64>()
                / w[x]
        })
        .fold(0.0, f64::max)
}

/// Geometric grid (ratio 2) from `max(1, median p)` to `max p`, endpoint included.
fn b_grid(p: &DMatrix<f64>, e_k: &[usize], cols: &[usize]) -> Vec<f64> {
    let mut values: Vec<f64> = e_k
        .iter()
        .flat_map(|&x| cols.iter().map(move |&y| p[(x, y)]))
        .collect();
    if values.is_empty() {
        return vec![1.0];
    }
    values.sort_by(f64::total_cmp);
    let median = values[values.len() / 2];
    let max = *values.last().expect("nonempty");
    let mut grid = vec![median.max(1.0)];
    while *grid.last().expect("nonempty") < max {
        let next = grid.last().expect("nonempty") * 2.0;
        grid.push(next.min(max));
    }
    grid
}

/// Quasi-compactness from locally uniformly integrable densities.
///
/// Checks `P(x, y) = p(x, y) ν({y})` on `E_K`, scans the `B`-grid for the first
/// tail `T(B)` strictly below the target, and certifies through the localized
/// criteria with the threshold kernel `B ν(· 1_cols) 1_{E_K}`.
///
/// The integrable variant's default target `(r − θ1‖P‖)/‖P‖` comes from the
/// sufficient condition `θ1‖P‖ < r` (recorded as `theta_prime`); validity is the
/// exact localized criterion `θ < r²`. The moment variant defaults to half of
/// the slack `r − sup_{E_K} P(V 1_{V>A})/V`.
pub fn density_certificate(
    kernel: &Kernel,
    p: &DMatrix<f64>,
    nu: &MeasureV,
    e_k: &[usize],
    variant: DensityVariant,
    target: Option<f64>,
) -> Result<Certificate, CertifyError> {
    let n = kernel.dim();
    if p.nrows() != n || p.ncols() != n || nu.space().dim() != n {
        return Err(crate::error::KernelError::SpaceMismatch.into());
    }
    for &x in e_k {
        for y in 0..n {
            let (a, b) = (kernel.get(x, y), p[(x, y)] * nu.as_slice()[y]);
            if (a - b).abs() > 1e-12 * a.abs().max(b.abs()) {
                return Err(CertifyError::Reconstruction {
                    row: x,
                    col: y,
                    kernel: a,
                    density: b,
                });
            }
        }
    }
    let r = kernel.spectral_radius();
    let norm = kernel.weighted_norm();
    let theta1 = check_h1(kernel, e_k);
    let w = kernel.space().weights();
    let cols: Vec<usize> = match variant {
        DensityVariant::Integrable => e_k.to_vec(),
        DensityVariant::Moment { a } => (0..n).filter(|&y| w[y] <= a).collect(),
    };
    let target = match (target, variant) {
        (Some(t), _) => t,
        (None, DensityVariant::Integrable) => (r - theta1 * norm) / norm,
        (None, DensityVariant::Moment { a }) => 0.5 * (r - moment_tail(kernel, e_k, a)),
    };
    let tail: Vec<[f64; 2]> = b_grid(p, e_k, &cols)
        .into_iter()
        .map(|b| [b, density_tail(p, nu, e_k, &cols, b)])
        .collect();
    let [b, t] = *tail
        .iter()
        .find(|[_, t]| *t < target)
        .ok_or(CertifyError::Unattainable {
            target,
            plateau: tail.iter().map(|[_, t]| *t).fold(f64::INFINITY, f64::min),
        })?;
    let in_rows = crate::kernel::indicator(n, e_k);
    let in_cols = crate::kernel::indicator(n, &cols);
    let threshold = DMatrix::from_fn(n, n, |x, y| {
        if in_rows[x] && in_cols[y] {
            b * nu.as_slice()[y]
        } else {
            0.0
        }
    });
    let threshold = Kernel::new(kernel.space().clone(), threshold)?;
    let mut cert = match variant {
        DensityVariant::Integrable => localized_certificate(kernel, e_k, &threshold, 1, t)?,
        DensityVariant::Moment { a } => moment_certificate(kernel, e_k, a, &threshold, t)?,
    };
    cert.kind = CertificateKind::Density;
    cert.set("B", b);
    if variant == DensityVariant::Integrable {
        cert.set("theta_prime", theta1 * norm);
    }
    cert.witness.structure = format!("density threshold kernel B nu(f 1_cols) 1_E_K ({variant:?})");
    cert.witness.mu = Some(nu.as_slice().to_vec());
    cert.witness.tail = Some(tail);
    let valid = cert.valid;
    Ok(cert.finish(valid))
}
