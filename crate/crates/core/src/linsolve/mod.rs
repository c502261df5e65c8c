//! Linear algebra used by the solvers.
//!
//! * [`CsrMatrix`]: compressed sparse row storage for `E`, `C` and the
//!   assembled Jacobians.
//! * [`CachedSpdFactor`]: sparse `LDLᵀ` of a symmetric positive definite
//!   matrix, computed once and reused for every right-hand side.
//! * [`SquareSolver`]: pivoted LU for general square systems with a
//!   reciprocal condition estimate. Below [`DENSE_LIMIT`] unknowns a dense
//!   factorization is used; above it a sparse one whose fill-reducing
//!   ordering is computed on the first call and reused afterwards.

mod cholesky;
mod csr;
mod lu;
mod ordering;

use std::fmt::Debug;
use std::ops::{Add, AddAssign, Div, Mul, MulAssign, Neg, Sub, SubAssign};

pub use cholesky::{factorization_count, spd_factor, spd_solve, CachedSpdFactor};
pub use csr::CsrMatrix;
pub use lu::{square_solve, SquareSolution, SquareSolver, DENSE_LIMIT, NEAR_SINGULAR_CONDITION};
pub use ordering::minimum_degree;

use crate::elementary::C64;

/// Scalar field shared by the real and complex code paths.
pub trait Field:
    Copy
    + Default
    + PartialEq
    + Debug
    + Send
    + Sync
    + 'static
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Div<Output = Self>
    + Neg<Output = Self>
    + Mul<f64, Output = Self>
    + AddAssign
    + SubAssign
    + MulAssign
{
    fn from_real(x: f64) -> Self;
    fn modulus(self) -> f64;
    fn conj(self) -> Self;

    fn zero() -> Self {
        Self::default()
    }

    fn one() -> Self {
        Self::from_real(1.0)
    }

    fn is_finite(self) -> bool {
        self.modulus().is_finite()
    }
}

impl Field for f64 {
    fn from_real(x: f64) -> Self {
        x
    }
    fn modulus(self) -> f64 {
        self.abs()
    }
    fn conj(self) -> Self {
        self
    }
}

impl Field for C64 {
    fn from_real(x: f64) -> Self {
        C64::new(x, 0.0)
    }
    fn modulus(self) -> f64 {
        self.norm()
    }
    fn conj(self) -> Self {
        C64::conj(&self)
    }
}

pub fn norm_inf<T: Field>(v: &[T]) -> f64 {
    v.iter().fold(0.0, |m, z| m.max(z.modulus()))
}

pub fn norm_l1<T: Field>(v: &[T]) -> f64 {
    v.iter().map(|z| z.modulus()).sum()
}
