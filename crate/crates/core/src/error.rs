use thiserror::Error;

/// Errors raised by kernel construction and kernel algebra.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum KernelError {
    #[error("weight of state {index} must be strictly positive and finite, got {value}")]
    NonPositiveWeight { index: usize, value: f64 },
    #[error("duplicate state label {0:?}")]
    DuplicateLabel(String),
    #[error("expected {expected} entries, got {actual}")]
    ShapeMismatch { expected: usize, actual: usize },
    #[error("matrix must be square, got {rows}x{cols}")]
    NotSquare { rows: usize, cols: usize },
    #[error("entry ({row}, {col}) = {value} is negative or not finite")]
    InvalidEntry { row: usize, col: usize, value: f64 },
    #[error("kernels live on different weighted spaces")]
    SpaceMismatch,
    #[error("function has a negative entry at state {index}: {value}")]
    NegativeFunction { index: usize, value: f64 },
    #[error("function vanishes on every state")]
    ZeroFunction,
    #[error("eigen-relation residual {residual:e} exceeds tolerance {tolerance:e}")]
    EigenResidual { residual: f64, tolerance: f64 },
    #[error("eigenvalue must be positive, got {0}")]
    NonPositiveEigenvalue(f64),
    #[error("zero kernel has no V-transform")]
    ZeroKernel,
    #[error("truncation size {size} is below the model's minimal support {minimum}")]
    TruncationTooSmall { size: usize, minimum: usize },
}

/// Errors raised while computing a peripheral decomposition.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum DecompositionError {
    #[error("spectral radius is zero: the kernel has no peripheral spectrum")]
    ZeroSpectralRadius,
    #[error("eigensolver residual {residual:e} exceeds {tolerance:e} on class {class}")]
    Residual {
        class: usize,
        residual: f64,
        tolerance: f64,
    },
    #[error("linear solve failed on class {0}: block is singular")]
    Singular(usize),
    #[error(transparent)]
    Kernel(#[from] KernelError),
}

/// Errors raised while building certificates.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum CertifyError {
    #[error("masked domination fails: needs {required} but {given} was supplied")]
    MaskedDomination { required: f64, given: f64 },
    #[error("density reconstruction fails at ({row}, {col}): kernel {kernel} vs p·ν {density}")]
    Reconstruction {
        row: usize,
        col: usize,
        kernel: f64,
        density: f64,
    },
    #[error("target {target} is not attainable: tail plateaus at {plateau}")]
    Unattainable { target: f64, plateau: f64 },
    #[error("density bound R ≤ a·μ fails at ({row}, {col}): {lhs} > {rhs}")]
    DensityBound {
        row: usize,
        col: usize,
        lhs: f64,
        rhs: f64,
    },
    #[error("invalid parameter {name}: {reason}")]
    InvalidParameter { name: &'static str, reason: String },
    #[error(transparent)]
    Kernel(#[from] KernelError),
}

/// Errors raised by absorbed-chain models and quasi-stationary analysis.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum QsdError {
    #[error("state {state}: probabilities sum to {sum}, expected 1")]
    ProbabilitySum { state: usize, sum: f64 },
    #[error("state {state}: row of R sums to {sum}, expected 1")]
    NotStochastic { state: usize, sum: f64 },
    #[error("state {state}: negative probability {value} in {field}")]
    NegativeProbability {
        state: usize,
        field: &'static str,
        value: f64,
    },
    #[error("state {state}: row mass {sum} exceeds 1")]
    NotSubMarkov { state: usize, sum: f64 },
    #[error("{field} has length {actual}, expected {expected}")]
    Shape {
        field: &'static str,
        expected: usize,
        actual: usize,
    },
    #[error("initial law sums to {0}, expected 1")]
    NotProbability(f64),
    #[error("all mass absorbed by step {0}")]
    Extinction(usize),
    #[error("weight V({index}) = {value} is below 1; eigenmeasures are not normalizable to probabilities")]
    WeightBelowOne { index: usize, value: f64 },
    #[error("initial law charges no state with a peripheral component")]
    NoPeripheralMass,
    #[error("state {state} out of range for {dim} states")]
    StateOutOfRange { state: usize, dim: usize },
    #[error(transparent)]
    Kernel(#[from] KernelError),
    #[error(transparent)]
    Decomposition(#[from] DecompositionError),
    #[error(transparent)]
    Certify(#[from] CertifyError),
}

/// Errors raised by continuous-time generators and semigroup checks.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum SemigroupError {
    #[error("off-diagonal rate ({row}, {col}) = {value} is negative or not finite")]
    InvalidRate { row: usize, col: usize, value: f64 },
    #[error("row {row} of the generator sums to {sum} > 0")]
    RowSum { row: usize, sum: f64 },
    #[error("time must be positive, got {0}")]
    NonPositiveTime(f64),
    #[error("decomposition of P_T reports period {0}; a semigroup cannot rotate, so this is a numerical breakdown")]
    Periodic(usize),
    #[error(transparent)]
    Decomposition(#[from] DecompositionError),
    #[error(transparent)]
    Kernel(#[from] KernelError),
}
