//! Nonnegative kernels on finite weighted supremum spaces.
//!
//! A state space is a finite ordered list of labels together with a strictly
//! positive weight `V`. Functions are normed by `‖f‖_V = max |f(x)| / V(x)` and
//! a nonnegative matrix `P` acts on them by `Pf(x) = Σ_y P(x,y) f(y)`. Every
//! measurable space here is atomic, so countable generation of the σ-field is
//! automatic and measures are plain mass vectors.

mod graph;
mod spectral;
mod truncate;

use std::collections::HashSet;
use std::fmt;
use std::sync::Arc;

use nalgebra::{Complex, DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::KernelError;

pub use graph::{reachable_sets, strongly_connected_classes, SupportGraph};
pub use spectral::{block_spectral_radius, eigenvalues, null_vector, perron_pair, DENSE_LIMIT};
pub use truncate::{truncate, truncate_weighted, CountableModel};

/// Relative tolerance for entrywise comparisons, scaled by the larger entry.
pub const REL_TOL: f64 = 1e-12;

/// `a ≤ b` up to [`REL_TOL`] relative to the larger magnitude.
pub fn approx_le(a: f64, b: f64) -> bool {
    a <= b + REL_TOL * a.abs().max(b.abs())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightedSpace {
    labels: Vec<String>,
    weights: Vec<f64>,
}

impl WeightedSpace {
    pub fn new(labels: Vec<String>, weights: Vec<f64>) -> Result<Self, KernelError> {
        if labels.len() != weights.len() {
            return Err(KernelError::ShapeMismatch {
                expected: labels.len(),
                actual: weights.len(),
            });
        }
        for (index, &value) in weights.iter().enumerate() {
            if !(value > 0.0 && value.is_finite()) {
                return Err(KernelError::NonPositiveWeight { index, value });
            }
        }
        let mut seen = HashSet::with_capacity(labels.len());
        for label in &labels {
            if !seen.insert(label.as_str()) {
                return Err(KernelError::DuplicateLabel(label.clone()));
            }
        }
        Ok(Self { labels, weights })
    }

    /// States labelled `0..n` with weights `weights`.
    pub fn with_weights(weights: Vec<f64>) -> Result<Self, KernelError> {
        let labels = (0..weights.len()).map(|i| i.to_string()).collect();
        Self::new(labels, weights)
    }

    /// `n` states with `V ≡ 1`.
    pub fn uniform(n: usize) -> Self {
        Self {
            labels: (0..n).map(|i| i.to_string()).collect(),
            weights: vec![1.0; n],
        }
    }

    pub fn dim(&self) -> usize {
        self.weights.len()
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn weight(&self, x: usize) -> f64 {
        self.weights[x]
    }

    pub fn weight_vector(&self) -> DVector<f64> {
        DVector::from_column_slice(&self.weights)
    }

    /// True when `V ≥ 1` everywhere, the setting in which eigenmeasures can be
    /// normalized to probability measures.
    pub fn weights_at_least_one(&self) -> bool {
        self.weights.iter().all(|&v| v >= 1.0)
    }

    /// Restriction to the given states, in the given order.
    pub fn subspace(&self, states: &[usize]) -> WeightedSpace {
        WeightedSpace {
            labels: states.iter().map(|&i| self.labels[i].clone()).collect(),
            weights: states.iter().map(|&i| self.weights[i]).collect(),
        }
    }
}

/// A real function on the states of a weighted space.
#[derive(Debug, Clone, PartialEq)]
pub struct FunctionV {
    space: Arc<WeightedSpace>,
    values: DVector<f64>,
}

impl FunctionV {
    pub fn new(space: Arc<WeightedSpace>, values: Vec<f64>) -> Result<Self, KernelError> {
        if values.len() != space.dim() {
            return Err(KernelError::ShapeMismatch {
                expected: space.dim(),
                actual: values.len(),
            });
        }
        Ok(Self {
            space,
            values: DVector::from_vec(values),
        })
    }

    pub fn constant(space: Arc<WeightedSpace>, c: f64) -> Self {
        let n = space.dim();
        Self {
            space,
            values: DVector::from_element(n, c),
        }
    }

    /// The weight `V` itself as an element of `L∞(V)` (norm 1).
    pub fn weight(space: Arc<WeightedSpace>) -> Self {
        let values = space.weight_vector();
        Self { space, values }
    }

    pub fn space(&self) -> &Arc<WeightedSpace> {
        &self.space
    }

    pub fn values(&self) -> &DVector<f64> {
        &self.values
    }

    pub fn as_slice(&self) -> &[f64] {
        self.values.as_slice()
    }

    pub fn v_norm(&self) -> f64 {
        self.values
            .iter()
            .zip(self.space.weights())
            .map(|(f, v)| f.abs() / v)
            .fold(0.0, f64::max)
    }
}

/// A finite nonnegative measure given by its atom masses.
#[derive(Debug, Clone, PartialEq)]
pub struct MeasureV {
    space: Arc<WeightedSpace>,
    masses: DVector<f64>,
}

impl MeasureV {
    pub fn new(space: Arc<WeightedSpace>, masses: Vec<f64>) -> Result<Self, KernelError> {
        if masses.len() != space.dim() {
            return Err(KernelError::ShapeMismatch {
                expected: space.dim(),
                actual: masses.len(),
            });
        }
        for (index, &value) in masses.iter().enumerate() {
            if !(value >= 0.0 && value.is_finite()) {
                return Err(KernelError::NegativeFunction { index, value });
            }
        }
        Ok(Self {
            space,
            masses: DVector::from_vec(masses),
        })
    }

    pub fn dirac(space: Arc<WeightedSpace>, x: usize) -> Self {
        let mut masses = DVector::zeros(space.dim());
        masses[x] = 1.0;
        Self { space, masses }
    }

    pub fn uniform(space: Arc<WeightedSpace>) -> Self {
        let n = space.dim();
        Self {
            space,
            masses: DVector::from_element(n, 1.0 / n as f64),
        }
    }

    pub fn space(&self) -> &Arc<WeightedSpace> {
        &self.space
    }

    pub fn masses(&self) -> &DVector<f64> {
        &self.masses
    }

    pub fn as_slice(&self) -> &[f64] {
        self.masses.as_slice()
    }

    pub fn total_mass(&self) -> f64 {
        self.masses.sum()
    }

    /// `ν(V)`.
    pub fn v_mass(&self) -> f64 {
        self.masses.dot(&self.space.weight_vector())
    }

    pub fn integrate(&self, f: &FunctionV) -> f64 {
        self.masses.dot(f.values())
    }

    /// Rescaled to total mass one; `None` for the zero measure.
    pub fn normalized(&self) -> Option<MeasureV> {
        let total = self.total_mass();
        (total > 0.0).then(|| MeasureV {
            space: self.space.clone(),
            masses: &self.masses / total,
        })
    }

    /// Total variation distance `½ Σ |μ − ν|`.
    pub fn total_variation(&self, other: &MeasureV) -> f64 {
        0.5 * (&self.masses - &other.masses).abs().sum()
    }
}

/// Worst entrywise violation of an order relation `P ≤ Q`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EntryViolation {
    pub row: usize,
    pub col: usize,
    pub lhs: f64,
    pub rhs: f64,
}

impl EntryViolation {
    pub fn excess(&self) -> f64 {
        self.lhs - self.rhs
    }
}

impl fmt::Display for EntryViolation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "entry ({}, {}): {} > {}",
            self.row, self.col, self.lhs, self.rhs
        )
    }
}

/// Returns the entry with the largest excess `lhs − rhs` among those violating
/// `lhs ≤ rhs` (up to [`REL_TOL`]).
pub(crate) fn worst_violation(lhs: &DMatrix<f64>, rhs: &DMatrix<f64>) -> Option<EntryViolation> {
    let mut worst: Option<EntryViolation> = None;
    for col in 0..lhs.ncols() {
        for row in 0..lhs.nrows() {
            let (a, b) = (lhs[(row, col)], rhs[(row, col)]);
            if !approx_le(a, b) && worst.is_none_or(|w| a - b > w.excess()) {
                worst = Some(EntryViolation {
                    row,
                    col,
                    lhs: a,
                    rhs: b,
                });
            }
        }
    }
    worst
}

/// Nonnegative matrix acting on `L∞(V)`; row `x` is the measure `P(x, ·)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Kernel {
    space: Arc<WeightedSpace>,
    entries: DMatrix<f64>,
}

impl Kernel {
    pub fn new(space: Arc<WeightedSpace>, entries: DMatrix<f64>) -> Result<Self, KernelError> {
        if entries.nrows() != entries.ncols() {
            return Err(KernelError::NotSquare {
                rows: entries.nrows(),
                cols: entries.ncols(),
            });
        }
        if entries.nrows() != space.dim() {
            return Err(KernelError::ShapeMismatch {
                expected: space.dim(),
                actual: entries.nrows(),
            });
        }
        for col in 0..entries.ncols() {
            for row in 0..entries.nrows() {
                let value = entries[(row, col)];
                if !(value >= 0.0 && value.is_finite()) {
                    return Err(KernelError::InvalidEntry { row, col, value });
                }
            }
        }
        Ok(Self { space, entries })
    }

    /// Kernel on `n` unit-weight states from row vectors.
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self, KernelError> {
        let n = rows.len();
        let entries = matrix_from_rows(rows)?;
        Self::new(Arc::new(WeightedSpace::uniform(n)), entries)
    }

    pub fn identity(space: Arc<WeightedSpace>) -> Self {
        let n = space.dim();
        Self {
            space,
            entries: DMatrix::identity(n, n),
        }
    }

    pub fn zeros(space: Arc<WeightedSpace>) -> Self {
        let n = space.dim();
        Self {
            space,
            entries: DMatrix::zeros(n, n),
        }
    }

    /// Diagonal kernel `f ↦ diag · f`.
    pub fn diagonal(space: Arc<WeightedSpace>, diag: &[f64]) -> Result<Self, KernelError> {
        if diag.len() != space.dim() {
            return Err(KernelError::ShapeMismatch {
                expected: space.dim(),
                actual: diag.len(),
            });
        }
        let entries = DMatrix::from_diagonal(&DVector::from_column_slice(diag));
        Self::new(space, entries)
    }

    /// Rank-one kernel `f ↦ h(x) μ(f)`.
    pub fn rank_one(space: Arc<WeightedSpace>, h: &[f64], mu: &[f64]) -> Result<Self, KernelError> {
        let n = space.dim();
        if h.len() != n || mu.len() != n {
            return Err(KernelError::ShapeMismatch {
                expected: n,
                actual: h.len().min(mu.len()),
            });
        }
        let entries = DMatrix::from_fn(n, n, |x, y| h[x] * mu[y]);
        Self::new(space, entries)
    }

    pub(crate) fn from_parts_unchecked(space: Arc<WeightedSpace>, entries: DMatrix<f64>) -> Self {
        debug_assert!(entries.iter().all(|&v| v >= 0.0));
        Self { space, entries }
    }

    pub fn dim(&self) -> usize {
        self.space.dim()
    }

    pub fn space(&self) -> &Arc<WeightedSpace> {
        &self.space
    }

    pub fn entries(&self) -> &DMatrix<f64> {
        &self.entries
    }

    pub fn get(&self, x: usize, y: usize) -> f64 {
        self.entries[(x, y)]
    }

    pub fn rows(&self) -> Vec<Vec<f64>> {
        (0..self.dim())
            .map(|x| self.entries.row(x).iter().copied().collect())
            .collect()
    }

    /// Same matrix on a space with different weights.
    pub fn with_space(&self, space: Arc<WeightedSpace>) -> Result<Self, KernelError> {
        Self::new(space, self.entries.clone())
    }

    fn check_space(&self, other: &Kernel) -> Result<(), KernelError> {
        if Arc::ptr_eq(&self.space, &other.space) || self.space == other.space {
            Ok(())
        } else {
            Err(KernelError::SpaceMismatch)
        }
    }

    /// Operator norm on `L∞(V)`: `max_x (PV)(x) / V(x)`.
    pub fn weighted_norm(&self) -> f64 {
        let pv = &self.entries * self.space.weight_vector();
        pv.iter()
            .zip(self.space.weights())
            .map(|(a, v)| a / v)
            .fold(0.0, f64::max)
    }

    /// `(PV)(x) / V(x)` for every state.
    pub fn drift_ratios(&self) -> Vec<f64> {
        let pv = &self.entries * self.space.weight_vector();
        pv.iter()
            .zip(self.space.weights())
            .map(|(a, v)| a / v)
            .collect()
    }

    pub fn row_sums(&self) -> DVector<f64> {
        let n = self.dim();
        DVector::from_fn(n, |x, _| self.entries.row(x).sum())
    }

    pub fn is_sub_markov(&self) -> bool {
        self.row_sums().iter().all(|&s| approx_le(s, 1.0))
    }

    pub fn is_markov(&self) -> bool {
        self.row_sums().iter().all(|&s| (s - 1.0).abs() <= REL_TOL)
    }

    pub fn apply(&self, f: &FunctionV) -> FunctionV {
        FunctionV {
            space: self.space.clone(),
            values: &self.entries * f.values(),
        }
    }

    /// `μP`.
    pub fn left_apply(&self, mu: &MeasureV) -> MeasureV {
        let masses = (mu.masses().transpose() * &self.entries).transpose();
        MeasureV {
            space: self.space.clone(),
            masses: masses.map(|m| m.max(0.0)),
        }
    }

    pub fn compose(&self, other: &Kernel) -> Result<Kernel, KernelError> {
        self.check_space(other)?;
        Ok(Self::from_parts_unchecked(
            self.space.clone(),
            &self.entries * &other.entries,
        ))
    }

    pub fn pow(&self, n: u32) -> Kernel {
        let mut result = DMatrix::identity(self.dim(), self.dim());
        let mut base = self.entries.clone();
        let mut e = n;
        while e > 0 {
            if e & 1 == 1 {
                result = &result * &base;
            }
            e >>= 1;
            if e > 0 {
                base = &base * &base;
            }
        }
        Self::from_parts_unchecked(self.space.clone(), result)
    }

    pub fn add(&self, other: &Kernel) -> Result<Kernel, KernelError> {
        self.check_space(other)?;
        Ok(Self::from_parts_unchecked(
            self.space.clone(),
            &self.entries + &other.entries,
        ))
    }

    pub fn scale(&self, c: f64) -> Result<Kernel, KernelError> {
        Self::new(self.space.clone(), &self.entries * c)
    }

    pub fn sub(&self, other: &Kernel) -> Result<SignedKernel, KernelError> {
        self.check_space(other)?;
        Ok(SignedKernel {
            space: self.space.clone(),
            entries: &self.entries - &other.entries,
        })
    }

    pub fn to_signed(&self) -> SignedKernel {
        SignedKernel {
            space: self.space.clone(),
            entries: self.entries.clone(),
        }
    }

    /// Entrywise minimum `P ∧ S`; `P = (P − S)₊ + P ∧ S` holds exactly.
    pub fn meet(&self, other: &Kernel) -> Result<Kernel, KernelError> {
        self.check_space(other)?;
        Ok(Self::from_parts_unchecked(
            self.space.clone(),
            self.entries.zip_map(&other.entries, f64::min),
        ))
    }

    /// `None` when `self ≤ other` entrywise, otherwise the worst offending entry.
    pub fn domination_violation(
        &self,
        other: &Kernel,
    ) -> Result<Option<EntryViolation>, KernelError> {
        self.check_space(other)?;
        Ok(worst_violation(&self.entries, &other.entries))
    }

    /// Keeps rows in `states`, zeroes the others: `f ↦ 1_A · Pf`.
    pub fn mask_rows(&self, states: &[usize]) -> Kernel {
        let keep = indicator(self.dim(), states);
        let entries = DMatrix::from_fn(self.dim(), self.dim(), |x, y| {
            if keep[x] {
                self.entries[(x, y)]
            } else {
                0.0
            }
        });
        Self::from_parts_unchecked(self.space.clone(), entries)
    }

    /// Keeps columns in `states`: `f ↦ P(1_A f)`.
    pub fn mask_cols(&self, states: &[usize]) -> Kernel {
        let keep = indicator(self.dim(), states);
        let entries = DMatrix::from_fn(self.dim(), self.dim(), |x, y| {
            if keep[y] {
                self.entries[(x, y)]
            } else {
                0.0
            }
        });
        Self::from_parts_unchecked(self.space.clone(), entries)
    }

    /// Principal sub-kernel on `states` (transitions leaving the set are dropped).
    pub fn restrict(&self, states: &[usize]) -> Kernel {
        let entries = DMatrix::from_fn(states.len(), states.len(), |i, j| {
            self.entries[(states[i], states[j])]
        });
        Self::from_parts_unchecked(Arc::new(self.space.subspace(states)), entries)
    }

    pub fn support_graph(&self) -> SupportGraph {
        SupportGraph::from_matrix(&self.entries)
    }

    /// Spectral radius, computed as the largest spectral radius among the
    /// diagonal blocks of the strongly connected classes.
    pub fn spectral_radius(&self) -> f64 {
        let graph = self.support_graph();
        strongly_connected_classes(&graph)
            .iter()
            .map(|class| block_spectral_radius(&principal_block(&self.entries, class)))
            .fold(0.0, f64::max)
    }

    /// All eigenvalues, computed on the similar matrix `P(x,y) V(y)/V(x)`, the
    /// operator in the coordinates of `L∞(V)`.
    pub fn eigenvalues(&self) -> Vec<Complex<f64>> {
        let w = self.space.weights();
        let n = self.dim();
        eigenvalues(&DMatrix::from_fn(n, n, |x, y| {
            self.entries[(x, y)] * w[y] / w[x]
        }))
    }

    /// The `η`-transform `Tf = P(ηf) / (λη)` on `{η > 0}`.
    ///
    /// Rejects `η` with negative entries, `η ≡ 0`, `λ ≤ 0`, or an eigen-relation
    /// residual `max_{η>0} |Pη − λη|` above `tol · λ · max η`.
    pub fn doob_transform(
        &self,
        eta: &FunctionV,
        lambda: f64,
    ) -> Result<DoobTransform, KernelError> {
        self.doob_transform_with_tol(eta, lambda, 1e-9)
    }

    pub fn doob_transform_with_tol(
        &self,
        eta: &FunctionV,
        lambda: f64,
        tol: f64,
    ) -> Result<DoobTransform, KernelError> {
        if eta.space().dim() != self.dim() {
            return Err(KernelError::SpaceMismatch);
        }
        if !(lambda > 0.0) {
            return Err(KernelError::NonPositiveEigenvalue(lambda));
        }
        for (index, &value) in eta.as_slice().iter().enumerate() {
            if value < 0.0 || !value.is_finite() {
                return Err(KernelError::NegativeFunction { index, value });
            }
        }
        let support: Vec<usize> = (0..self.dim())
            .filter(|&x| eta.as_slice()[x] > 0.0)
            .collect();
        if support.is_empty() {
            return Err(KernelError::ZeroFunction);
        }
        let eta_max = eta.as_slice().iter().copied().fold(0.0, f64::max);
        let p_eta = &self.entries * eta.values();
        let residual = support
            .iter()
            .map(|&x| (p_eta[x] - lambda * eta.as_slice()[x]).abs())
            .fold(0.0, f64::max);
        let tolerance = tol * lambda * eta_max;
        if residual > tolerance {
            return Err(KernelError::EigenResidual {
                residual,
                tolerance,
            });
        }
        let m = support.len();
        let mut entries = DMatrix::from_fn(m, m, |i, j| {
            let (x, y) = (support[i], support[j]);
            self.entries[(x, y)] * eta.as_slice()[y] / (lambda * eta.as_slice()[x])
        });
        // Rows sum to one up to the eigen residual; remove that residual exactly.
        for i in 0..m {
            let s = entries.row(i).sum();
            if s > 0.0 {
                entries.row_mut(i).scale_mut(1.0 / s);
            }
        }
        let kernel = Self::from_parts_unchecked(Arc::new(self.space.subspace(&support)), entries);
        Ok(DoobTransform { kernel, support })
    }

    /// `f ↦ P(Vf) / (V ‖P‖_V)`, a sub-Markov kernel on the unit-weight space with
    /// spectral radius `r(P) / ‖P‖_V`.
    pub fn v_transform(&self) -> Result<Kernel, KernelError> {
        let norm = self.weighted_norm();
        if !(norm > 0.0) {
            return Err(KernelError::ZeroKernel);
        }
        let w = self.space.weights();
        let n = self.dim();
        let entries = DMatrix::from_fn(n, n, |x, y| self.entries[(x, y)] * w[y] / (w[x] * norm));
        Ok(Self::from_parts_unchecked(
            Arc::new(WeightedSpace {
                labels: self.space.labels.clone(),
                weights: vec![1.0; n],
            }),
            entries,
        ))
    }
}

/// Result of [`Kernel::doob_transform`]: a Markov kernel on the support of `η`.
#[derive(Debug, Clone, PartialEq)]
pub struct DoobTransform {
    pub kernel: Kernel,
    /// Original indices of the retained states, in order.
    pub support: Vec<usize>,
}

/// Real (possibly negative) matrix on a weighted space.
#[derive(Debug, Clone, PartialEq)]
pub struct SignedKernel {
    space: Arc<WeightedSpace>,
    entries: DMatrix<f64>,
}

impl SignedKernel {
    pub fn new(space: Arc<WeightedSpace>, entries: DMatrix<f64>) -> Result<Self, KernelError> {
        if entries.nrows() != space.dim() || entries.ncols() != space.dim() {
            return Err(KernelError::ShapeMismatch {
                expected: space.dim(),
                actual: entries.nrows(),
            });
        }
        Ok(Self { space, entries })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self, KernelError> {
        let entries = matrix_from_rows(rows)?;
        Self::new(Arc::new(WeightedSpace::uniform(rows.len())), entries)
    }

    pub fn space(&self) -> &Arc<WeightedSpace> {
        &self.space
    }

    pub fn entries(&self) -> &DMatrix<f64> {
        &self.entries
    }

    /// Entrywise Hahn decomposition: the positive part of each row measure.
    pub fn positive_part(&self) -> Kernel {
        Kernel::from_parts_unchecked(self.space.clone(), self.entries.map(|v| v.max(0.0)))
    }

    pub fn neg(&self) -> SignedKernel {
        SignedKernel {
            space: self.space.clone(),
            entries: -&self.entries,
        }
    }

    /// Operator norm on `L∞(V)`: `max_x Σ_y |R(x,y)| V(y) / V(x)`.
    pub fn operator_norm(&self) -> f64 {
        let w = self.space.weight_vector();
        let abs_w = self.entries.abs() * &w;
        abs_w
            .iter()
            .zip(w.iter())
            .map(|(a, v)| a / v)
            .fold(0.0, f64::max)
    }
}

pub(crate) fn matrix_from_rows(rows: &[Vec<f64>]) -> Result<DMatrix<f64>, KernelError> {
    let n = rows.len();
    for row in rows {
        if row.len() != n {
            return Err(KernelError::NotSquare {
                rows: n,
                cols: row.len(),
            });
        }
    }
    Ok(DMatrix::from_fn(n, n, |i, j| rows[i][j]))
}

pub(crate) fn principal_block(m: &DMatrix<f64>, states: &[usize]) -> DMatrix<f64> {
    DMatrix::from_fn(states.len(), states.len(), |i, j| m[(states[i], states[j])])
}

pub(crate) fn indicator(n: usize, states: &[usize]) -> Vec<bool> {
    let mut keep = vec![false; n];
    for &s in states {
        keep[s] = true;
    }
    keep
}
