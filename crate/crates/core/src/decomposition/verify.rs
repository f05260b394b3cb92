use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::peel::PeripheralDecomposition;
use crate::kernel::Kernel;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AlphaPoint {
    pub n: usize,
    pub k: usize,
    pub alpha: f64,
}

/// Reconstruction error `α_{nd+k}` for `n = 1..=n_max`, `k < d`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlphaCurve {
    pub points: Vec<AlphaPoint>,
}

impl AlphaCurve {
    /// Largest error over `k` at a given `n`.
    pub fn at(&self, n: usize) -> Option<f64> {
        self.points
            .iter()
            .filter(|p| p.n == n)
            .map(|p| p.alpha)
            .reduce(f64::max)
    }

    pub fn last(&self) -> Option<f64> {
        self.points.last().and_then(|p| self.at(p.n))
    }
}

/// Computes, for `m = nd + k`,
///
/// `α_m = max_x Σ_y |r^{-m} m^{-j(x)} P^m(x,y) − Σ_i η_{i,k}(x) ν_{i,k}(y)| V(y) / V(x)`,
///
/// the exact operator norm on `L∞(V)` of the error in the expansion of `P^m`.
pub fn verify_decomposition(p: &Kernel, dec: &PeripheralDecomposition, n_max: usize) -> AlphaCurve {
    let d = dec.d;
    let size = p.dim();
    let scaled = p.entries() / dec.r;
    let limits: Vec<DMatrix<f64>> = (0..d).map(|k| dec.limit(k)).collect();
    let mut powers = Vec::with_capacity(n_max * d + d);
    let mut current = DMatrix::<f64>::identity(size, size);
    for _ in 0..(n_max + 1) * d {
        current = &current * &scaled;
        powers.push(current.clone());
    }
    let w = p.space().weights();
    let points = (d..(n_max + 1) * d)
        .into_par_iter()
        .map(|m| {
            let (n, k) = (m / d, m % d);
            let a = &powers[m - 1];
            let alpha = (0..size)
                .map(|x| {
                    let norm = (m as f64).powi(dec.j[x] as i32);
                    (0..size)
                        .map(|y| (a[(x, y)] / norm - limits[k][(x, y)]).abs() * w[y])
                        .sum::<f64>()
                        / w[x]
                })
                .fold(0.0, f64::max);
            AlphaPoint { n, k, alpha }
        })
        .collect();
    AlphaCurve { points }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::decomposition::peel_decomposition;

    fn kernel(rows: &[&[f64]]) -> Kernel {
        Kernel::from_rows(&rows.iter().map(|r| r.to_vec()).collect::<Vec<_>>()).unwrap()
    }

    #[test]
    fn identity_is_exact() {
        let p = kernel(&[&[1.0, 0.0], &[0.0, 1.0]]);
        let curve = verify_decomposition(&p, &peel_decomposition(&p).unwrap(), 10);
        assert!(curve.points.iter().all(|pt| pt.alpha == 0.0));
    }

    #[test]
    fn two_cycle_is_exact() {
        let p = kernel(&[&[0.0, 0.9], &[0.9, 0.0]]);
        let curve = verify_decomposition(&p, &peel_decomposition(&p).unwrap(), 20);
        assert_eq!(curve.points.len(), 40);
        assert!(curve.points.iter().all(|pt| pt.alpha < 1e-12));
    }

    #[test]
    fn triangular_error_is_one_over_m() {
        let p = kernel(&[&[0.5, 0.5], &[0.0, 0.5]]);
        let curve = verify_decomposition(&p, &peel_decomposition(&p).unwrap(), 30);
        for pt in &curve.points {
            assert!((pt.alpha - 1.0 / pt.n as f64).abs() < 1e-12);
        }
    }
}
