//! Peripheral spectral decomposition of nonnegative kernels on weighted
//! supremum spaces, quasi-compactness certificates, and quasi-stationary
//! analysis of absorbed Markov chains in discrete and continuous time.

// `!(x > 0.0)` also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod certify;
pub mod decomposition;
pub mod error;
pub mod kernel;
pub mod qsd;
pub mod semigroup;

pub use decomposition::{peel_decomposition, verify_decomposition, PeripheralDecomposition};
pub use error::{CertifyError, DecompositionError, KernelError, QsdError, SemigroupError};
pub use kernel::{FunctionV, Kernel, MeasureV, SignedKernel, WeightedSpace};
