use std::fmt;
use std::sync::Arc;

use nalgebra::DMatrix;

use super::{Kernel, WeightedSpace};
use crate::error::KernelError;

type RowFn = dyn Fn(usize) -> Vec<(usize, f64)> + Send + Sync;

/// A kernel on the nonnegative integers, described row by row.
#[derive(Clone)]
pub enum CountableModel {
    /// Nearest-neighbour walk: up with `up`, down with `down`, stay with `stay`.
    /// A down-step from 0 leaves the space (killing).
    BirthDeath { up: f64, down: f64, stay: f64 },
    /// Arbitrary rows: `row(x)` lists `(y, P(x, y))`; entries with `y` outside the
    /// window are dropped.
    Rows { min_support: usize, row: Arc<RowFn> },
}

impl fmt::Debug for CountableModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::BirthDeath { up, down, stay } => f
                .debug_struct("BirthDeath")
                .field("up", up)
                .field("down", down)
                .field("stay", stay)
                .finish(),
            Self::Rows { min_support, .. } => f
                .debug_struct("Rows")
                .field("min_support", min_support)
                .finish_non_exhaustive(),
        }
    }
}

impl CountableModel {
    pub fn min_support(&self) -> usize {
        match self {
            Self::BirthDeath { .. } => 2,
            Self::Rows { min_support, .. } => (*min_support).max(2),
        }
    }

    fn row(&self, x: usize) -> Vec<(usize, f64)> {
        match self {
            Self::BirthDeath { up, down, stay } => {
                let mut row = vec![(x, *stay), (x + 1, *up)];
                if x > 0 {
                    row.push((x - 1, *down));
                }
                row
            }
            Self::Rows { row, .. } => row(x),
        }
    }
}

/// Restriction of the model to `{0, …, n−1}` with unit weights. Mass leaving
/// the window is killed rather than reflected, so the result is entrywise
/// dominated by the infinite kernel.
pub fn truncate(model: &CountableModel, n: usize) -> Result<Kernel, KernelError> {
    truncate_weighted(model, n, |_| 1.0)
}

/// As [`truncate`], on the weighted space `V(x) = weight(x)`.
pub fn truncate_weighted(
    model: &CountableModel,
    n: usize,
    weight: impl Fn(usize) -> f64,
) -> Result<Kernel, KernelError> {
    let minimum = model.min_support();
    if n < minimum {
        return Err(KernelError::TruncationTooSmall { size: n, minimum });
    }
    let mut entries = DMatrix::zeros(n, n);
    for x in 0..n {
        for (y, p) in model.row(x) {
            if y < n {
                entries[(x, y)] += p;
            }
        }
    }
    let space = WeightedSpace::with_weights((0..n).map(weight).collect())?;
    Kernel::new(Arc::new(space), entries)
}
