//! Small-dimension density-operator arithmetic.
//!
//! Everything here is dense `Complex64` linear algebra on at most 4096
//! dimensions. Hermitian spectra come from a cyclic Jacobi sweep and
//! singular values from one-sided (Hestenes) Jacobi, both in [`linalg`].
//!
//! Distances follow the trace-norm convention: `trace_norm(rho0 - rho1)`
//! ranges over `[0, 2]` for normalized states.

pub mod channel;
pub mod linalg;
pub mod measures;
pub mod random;
pub mod state;
pub mod uhlmann;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

pub use channel::{apply_controlled, ControlledOperation, KrausChannel};
pub use measures::{
    check_min_entropy_witness, cond_min_entropy_cc, fidelity, partial_trace, trace_distance,
    trace_norm, JointTable,
};
pub use state::{CqState, DensityOperator};
pub use uhlmann::{purify, uhlmann_extension, uhlmann_unitary};

pub type CMatrix = DMatrix<Complex64>;
pub type CVector = DVector<Complex64>;

/// Largest total Hilbert-space dimension accepted anywhere in the crate.
pub const MAX_DIM: usize = 4096;
/// Tolerance for state validity (hermiticity, positivity, trace).
pub const STATE_TOL: f64 = 1e-9;
/// Tolerance for derived equalities (marginals, fidelity identities).
pub const DERIVED_TOL: f64 = 1e-7;

#[inline]
pub(crate) fn c(re: f64) -> Complex64 {
    Complex64::new(re, 0.0)
}

/// Kronecker product `a ⊗ b`.
pub fn kron(a: &CMatrix, b: &CMatrix) -> CMatrix {
    a.kronecker(b)
}

/// Largest entrywise modulus of `a - b`.
pub fn max_abs_diff(a: &CMatrix, b: &CMatrix) -> f64 {
    assert_eq!(a.shape(), b.shape());
    a.iter()
        .zip(b.iter())
        .map(|(x, y)| (x - y).norm())
        .fold(0.0, f64::max)
}
