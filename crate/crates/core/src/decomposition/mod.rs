//! Peripheral decomposition: the limit of `r^{-nd-k} (nd+k)^{-j(x)} P^{nd+k}`
//! as a finite sum `Σ_i η_{i,k}(x) ν_{i,k}`.
//!
//! Basic classes (strongly connected classes whose radius equals `r(P)`) are
//! peeled top-down: each round takes the top-most remaining basic class, builds
//! a nonnegative eigenfunction supported on it and on the states above it,
//! passes to the η-transform, and reads off its cyclic classes and invariant
//! law. The limit is then assembled bottom-up through the class DAG.

mod classes;
mod peel;
mod verify;

pub use classes::{
    class_structure, growth_exponent, is_totally_irreducible, ClassStructure, BASIC_TOL,
};
pub use peel::{
    peel_decomposition, power_support, PeelRound, PeripheralDecomposition, PeripheralItem,
    EIGEN_TOL,
};
pub use verify::{verify_decomposition, AlphaCurve, AlphaPoint};
