//! Numerics for the polynomial Fourier series `F(x) = sum_n e(P(n) x) / n^alpha`.
//!
//! The crate is organised by mathematical object:
//!
//! * [`polynomials`]: integer polynomials, ramification invariants, roots mod `p^i`.
//! * [`expsum`]: complete exponential sums, bound audits, power-sum lemmas.
//! * [`series`]: local oscillations `F(a/q + h) - F(a/q)` by direct summation and by
//!   Poisson summation, the oscillatory integral and its constant `A`.
//! * [`diophantine`]: continued fractions and approximation exponents.
//! * [`holder`]: Hölder exponent estimation, average oscillation, spectrum bounds.
//! * [`cantor`]: nested interval generations and dimension estimates.
//!
//! `e(t)` denotes `exp(2 pi i t)` throughout.
//!
//! ```
//! use polyfourier::{expsum, polynomials::IntPolynomial};
//!
//! let square: IntPolynomial = "n^2".parse().unwrap();
//! let tau = expsum::complete_sum(&square, 1, 5, 0).unwrap();
//! assert!((tau.value.re - 5f64.sqrt()).abs() < 1e-12);
//! ```

// Range checks are written `!(x > lo)` so that NaN fails them.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cantor;
pub mod diophantine;
pub mod expsum;
pub mod holder;
pub mod numeric;
pub mod output;
pub mod polynomials;
pub mod series;

pub use num_complex::Complex64;

/// Errors raised by the numerical operations.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    /// Arguments outside the mathematical domain of the operation.
    #[error("domain error: {0}")]
    Domain(String),
    /// A stated hypothesis of the operation does not hold.
    #[error("precondition violated: {0}")]
    Precondition(String),
    /// The requested accuracy needs more work than the configured cap allows.
    #[error("resource limit: {what} (best achievable {achievable:.3e})")]
    Resource { what: String, achievable: f64 },
    /// Malformed textual input.
    #[error("parse error: {0}")]
    Parse(String),
}

impl Error {
    /// Short machine-readable kind tag.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::Domain(_) => "domain",
            Error::Precondition(_) => "precondition",
            Error::Resource { .. } => "resource",
            Error::Parse(_) => "parse",
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
