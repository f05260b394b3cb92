//! Continuous-time sub-Markov semigroups `P_t = exp(tL)`.
//!
//! Transitions are evaluated by uniformization, a series of nonnegative terms,
//! so entrywise order and zero patterns are preserved exactly. A semigroup
//! cannot rotate its peripheral spectrum, so the decomposition of `P_T` is
//! aperiodic and the eigenmeasures are carried by the flow:
//! `ν_i P_h = r(P_1)^h ν_i`.

use std::sync::Arc;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::decomposition::{class_structure, peel_decomposition, PeripheralDecomposition};
use crate::error::SemigroupError;
use crate::kernel::{eigenvalues, principal_block, Kernel, WeightedSpace};

/// Largest `λt` handled by a single uniformization series; longer times are
/// split into equal pieces whose transitions are multiplied.
const MAX_PIECE: f64 = 10.0;
/// Flow residuals above this are reported as failures.
pub const FLOW_TOL: f64 = 1e-8;
/// Points in the uniform `h`-grid on `[0, T]` used for flow residuals.
pub const FLOW_GRID: usize = 32;

/// Rate matrix with nonnegative off-diagonal entries and nonpositive row sums.
#[derive(Debug, Clone, PartialEq)]
pub struct SubMarkovGenerator {
    space: Arc<WeightedSpace>,
    rates: DMatrix<f64>,
}

impl SubMarkovGenerator {
    pub fn new(space: Arc<WeightedSpace>, rates: DMatrix<f64>) -> Result<Self, SemigroupError> {
        let n = space.dim();
        if rates.nrows() != n || rates.ncols() != n {
            return Err(crate::error::KernelError::ShapeMismatch {
                expected: n,
                actual: rates.nrows(),
            }
            .into());
        }
        for row in 0..n {
            for col in 0..n {
                let value = rates[(row, col)];
                if !value.is_finite() || (row != col && value < 0.0) {
                    return Err(SemigroupError::InvalidRate { row, col, value });
                }
            }
            let sum = rates.row(row).sum();
            if sum > 1e-12 {
                return Err(SemigroupError::RowSum { row, sum });
            }
        }
        Ok(Self { space, rates })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self, SemigroupError> {
        let rates = crate::kernel::matrix_from_rows(rows)?;
        Self::new(Arc::new(WeightedSpace::uniform(rows.len())), rates)
    }

    pub fn with_space(&self, space: Arc<WeightedSpace>) -> Result<Self, SemigroupError> {
        Self::new(space, self.rates.clone())
    }

    pub fn space(&self) -> &Arc<WeightedSpace> {
        &self.space
    }

    pub fn rates(&self) -> &DMatrix<f64> {
        &self.rates
    }

    pub fn dim(&self) -> usize {
        self.space.dim()
    }

    /// Uniformization rate `max_x |L(x, x)|`.
    pub fn uniformization_rate(&self) -> f64 {
        (0..self.dim())
            .map(|x| self.rates[(x, x)].abs())
            .fold(0.0, f64::max)
    }
}

/// `P_t = Σ_k e^{−λt} (λt)^k / k! · R^k` with `R = I + L/λ`, truncated once the
/// remaining Poisson mass is below `tol` (and never before `dim` terms, so the
/// support of `P_t` is that of the exact exponential).
pub fn transition(l: &SubMarkovGenerator, t: f64, tol: f64) -> Kernel {
    let n = l.dim();
    let lambda = l.uniformization_rate();
    if t <= 0.0 || lambda == 0.0 {
        return Kernel::identity(l.space.clone());
    }
    let pieces = (lambda * t / MAX_PIECE).ceil().max(1.0);
    let tau = t / pieces;
    let r = (DMatrix::identity(n, n) + &l.rates / lambda).map(|v| v.max(0.0));
    let mean = lambda * tau;
    let mut weight = (-mean).exp();
    let mut cumulative = weight;
    let mut term = DMatrix::<f64>::identity(n, n);
    let mut sum = &term * weight;
    let mut k = 0usize;
    while 1.0 - cumulative > tol || k < n {
        k += 1;
        term = &term * &r;
        weight *= mean / k as f64;
        cumulative += weight;
        sum += &term * weight;
        if weight == 0.0 && k >= n {
            break;
        }
    }
    let piece = Kernel::from_parts_unchecked(l.space.clone(), sum);
    piece.pow(pieces as u32)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimeLyapunov {
    pub c_t: f64,
    /// `(t, ‖P_t‖_V)` over the grid.
    pub grid: Vec<(f64, f64)>,
}

/// `C_T = max_t ‖P_t‖_V` over `grid` (default: `0` and `T/16, T/8, …, T`).
pub fn check_time_lyapunov(
    l: &SubMarkovGenerator,
    t_ref: f64,
    grid: Option<Vec<f64>>,
    tol: f64,
) -> TimeLyapunov {
    let grid = grid.unwrap_or_else(|| {
        std::iter::once(0.0)
            .chain((0..5).rev().map(|e| t_ref / f64::from(1u32 << e)))
            .collect()
    });
    let grid: Vec<(f64, f64)> = grid
        .into_iter()
        .map(|t| (t, transition(l, t, tol).weighted_norm()))
        .collect();
    let c_t = grid.iter().map(|g| g.1).fold(0.0, f64::max);
    TimeLyapunov { c_t, grid }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FlowPoint {
    pub h: f64,
    pub residual: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AlphaTPoint {
    pub t: f64,
    pub alpha: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SemigroupReport {
    pub t_ref: f64,
    pub c_t: f64,
    /// `r(P_1) = r(P_T)^{1/T}`.
    pub r1: f64,
    pub decomposition: PeripheralDecomposition,
    pub flow: Vec<FlowPoint>,
    pub max_flow_residual: f64,
    pub flow_ok: bool,
    /// No eigenvalue of `P_T` on the peripheral circle other than `r(P_T)`.
    pub rotation_free: bool,
    pub alpha_t: Vec<AlphaTPoint>,
}

/// Decomposes `P_T`, requires period 1, and checks the flow identity
/// `ν_i P_h = r(P_1)^h ν_i` on a uniform grid of `[0, T]`. The error curve uses
/// `r(P_1)^{-t} (1 + t/T)^{-j(x)} P_t` against `Σ_i η_i ⊗ ν_i` at `t = T/2, T, …`.
pub fn continuous_decomposition(
    l: &SubMarkovGenerator,
    t_ref: f64,
    tol: f64,
) -> Result<SemigroupReport, SemigroupError> {
    if !(t_ref > 0.0) {
        return Err(SemigroupError::NonPositiveTime(t_ref));
    }
    let p_t = transition(l, t_ref, tol);
    let dec = peel_decomposition(&p_t)?;
    if dec.d != 1 {
        return Err(SemigroupError::Periodic(dec.d));
    }
    let r1 = dec.r.powf(1.0 / t_ref);
    let w = l.space.weights();

    let flow: Vec<FlowPoint> = (0..FLOW_GRID)
        .map(|i| {
            let h = t_ref * i as f64 / (FLOW_GRID - 1) as f64;
            let p_h = transition(l, h, tol);
            let scale = r1.powf(h);
            let residual = dec
                .items
                .iter()
                .map(|item| {
                    (0..l.dim())
                        .map(|y| {
                            let moved: f64 = (0..l.dim()).map(|x| item.nu[x] * p_h.get(x, y)).sum();
                            (moved - scale * item.nu[y]).abs() * w[y]
                        })
                        .sum::<f64>()
                })
                .fold(0.0, f64::max);
            FlowPoint { h, residual }
        })
        .collect();
    let max_flow_residual = flow.iter().map(|f| f.residual).fold(0.0, f64::max);

    let limit = dec.limit(0);
    let half = transition(l, t_ref / 2.0, tol);
    let mut p = half.clone();
    let mut alpha_t = Vec::new();
    for step in 1..=40 {
        let t = t_ref * step as f64 / 2.0;
        let scale = r1.powf(-t);
        let alpha = (0..l.dim())
            .map(|x| {
                let poly = (1.0 + t / t_ref).powi(dec.j[x] as i32);
                (0..l.dim())
                    .map(|y| (p.get(x, y) * scale / poly - limit[(x, y)]).abs() * w[y])
                    .sum::<f64>()
                    / w[x]
            })
            .fold(0.0, f64::max);
        alpha_t.push(AlphaTPoint { t, alpha });
        p = p.compose(&half)?;
    }

    Ok(SemigroupReport {
        t_ref,
        c_t: check_time_lyapunov(l, t_ref, None, tol).c_t,
        r1,
        rotation_free: rotation_free(&p_t),
        decomposition: dec,
        flow,
        max_flow_residual,
        flow_ok: max_flow_residual <= FLOW_TOL,
        alpha_t,
    })
}

/// Every eigenvalue of a basic-class block on the peripheral circle is `r`
/// itself. Blocks are examined separately: the full matrix may carry Jordan
/// structure that blurs peripheral eigenvalues.
pub fn rotation_free(p: &Kernel) -> bool {
    let cs = class_structure(p);
    let free = cs.basic_classes().all(|c| {
        eigenvalues(&principal_block(p.entries(), &cs.classes[c]))
            .iter()
            .filter(|z| z.norm() >= cs.r * (1.0 - 1e-9))
            .all(|z| z.im.abs() <= 1e-9 * cs.r && z.re > 0.0)
    });
    free
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PropagationCheck {
    pub consistent: bool,
    pub r_t1: f64,
    pub r_t2: f64,
    pub predicted_r_t2: f64,
    pub relative_error: f64,
    pub same_partition: bool,
    pub e_sets_t1: Vec<Vec<usize>>,
    pub e_sets_t2: Vec<Vec<usize>>,
}

/// `r(P_{T2}) = r(P_{T1})^{T2/T1}` to `1e-9` relative, and the decompositions of
/// `P_{T1}` and `P_{T2}` share the same sets `E_i`.
pub fn propagation_check(
    l: &SubMarkovGenerator,
    t1: f64,
    t2: f64,
    tol: f64,
) -> Result<PropagationCheck, SemigroupError> {
    for t in [t1, t2] {
        if !(t > 0.0) {
            return Err(SemigroupError::NonPositiveTime(t));
        }
    }
    let d1 = peel_decomposition(&transition(l, t1, tol))?;
    let d2 = peel_decomposition(&transition(l, t2, tol))?;
    let predicted = d1.r.powf(t2 / t1);
    let relative_error = (d2.r - predicted).abs() / d2.r;
    let sets = |d: &PeripheralDecomposition| {
        let mut s: Vec<Vec<usize>> = d.items.iter().map(|i| i.e_set.clone()).collect();
        s.sort();
        s
    };
    let (e1, e2) = (sets(&d1), sets(&d2));
    let same_partition = e1 == e2;
    Ok(PropagationCheck {
        consistent: relative_error <= 1e-9 && same_partition,
        r_t1: d1.r,
        r_t2: d2.r,
        predicted_r_t2: predicted,
        relative_error,
        same_partition,
        e_sets_t1: e1,
        e_sets_t2: e2,
    })
}
