//! The series `F(x) = sum_{n >= 1} e(P(n) x) / n^alpha` and its local
//! oscillations `Delta F(x, h) = F(x + h) - F(x)`.
//!
//! * [`direct`]: truncated summation with exact phases and tail estimates.
//! * [`integral`]: the oscillatory integrals `g_h`, their Fourier transforms and
//!   the integral whose leading term is `A h^{(alpha-1)/k}`.
//! * [`poisson`]: the Poisson-summation expansion over `tau_m(a, q)`.
//! * [`bump`]: the smooth partition of unity used by the expansion.

pub mod bump;
pub mod direct;
pub mod integral;
pub mod poisson;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::expsum::complete_sum;
use crate::numeric::{gamma, unit_f64};
use crate::polynomials::{nu_global, IntPolynomial};
use crate::{Error, Result};

pub use bump::BumpPair;
pub use direct::{eval_delta_direct, eval_delta_real, split_delta, DeltaValue, DirectConfig, SplitPart};
pub use integral::{eta_tilde_norm, ghat, ghat_zero_limit, osc_integral, EtaNorm, GhatValue, OscIntegral};
pub use poisson::{poisson_delta, PoissonConfig, PoissonExpansion, PoissonPlan};

/// Parameter windows in which the various statements apply.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Mode {
    /// `1 + k/2 < alpha < k`.
    Main,
    /// `k = 2`, `1 < alpha <= 2`.
    Quadratic,
    /// `k/2 < alpha <= k`, `alpha > 1`.
    Extended,
}

/// The pair `(P, alpha)` with its derived constants.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SeriesParams {
    pub poly: IntPolynomial,
    pub alpha: f64,
    pub k: usize,
    pub c0: i64,
    /// `(alpha - 1) / k`.
    pub rho: f64,
    pub nu_f: u32,
    pub nu_0: u32,
}

impl SeriesParams {
    pub fn new(poly: IntPolynomial, alpha: f64) -> Result<Self> {
        let k = poly.degree();
        if k < 2 {
            return Err(Error::Domain(format!("degree of {poly} must exceed 1")));
        }
        let c0 = poly.leading();
        if c0 <= 0 {
            return Err(Error::Domain(format!("leading coefficient of {poly} must be positive")));
        }
        if !(alpha > 1.0 && alpha.is_finite()) {
            return Err(Error::Domain(format!("alpha = {alpha} must exceed 1 for convergence")));
        }
        let (nu_f, nu_0) = nu_global(&poly)?;
        Ok(Self {
            rho: (alpha - 1.0) / k as f64,
            poly,
            alpha,
            k,
            c0,
            nu_f,
            nu_0,
        })
    }

    /// Convenience constructor from the textual polynomial form.
    pub fn parse(poly: &str, alpha: f64) -> Result<Self> {
        Self::new(poly.parse()?, alpha)
    }

    pub fn in_mode(&self, mode: Mode) -> bool {
        let (a, k) = (self.alpha, self.k as f64);
        match mode {
            Mode::Main => 1.0 + k / 2.0 < a && a < k,
            Mode::Quadratic => self.k == 2 && a > 1.0 && a <= 2.0,
            Mode::Extended => k / 2.0 < a && a <= k,
        }
    }

    pub fn require(&self, mode: Mode) -> Result<()> {
        if self.in_mode(mode) {
            Ok(())
        } else {
            Err(Error::Domain(format!(
                "alpha = {} with k = {} is outside the {mode:?} window",
                self.alpha, self.k
            )))
        }
    }

    /// Modes that contain these parameters.
    pub fn modes(&self) -> Vec<Mode> {
        [Mode::Main, Mode::Quadratic, Mode::Extended]
            .into_iter()
            .filter(|&m| self.in_mode(m))
            .collect()
    }

    /// Compact label used in CSV rows.
    pub fn label(&self) -> String {
        self.poly.id()
    }
}

/// `A = ((2 pi)^{(alpha-1)/k} / k) e((1-alpha)/(4k)) Gamma((1-alpha)/k)`.
pub fn constant_a(params: &SeriesParams) -> Result<Complex64> {
    constant_a_raw(params.alpha, params.k)
}

/// [`constant_a`] from `(alpha, k)` alone.
pub fn constant_a_raw(alpha: f64, k: usize) -> Result<Complex64> {
    let kf = k as f64;
    let arg = (1.0 - alpha) / kf;
    if arg >= 0.0 {
        return Err(Error::Domain(format!("alpha = {alpha} must exceed 1")));
    }
    let g = gamma(arg)?;
    let modulus = std::f64::consts::TAU.powf(-arg) / kf * g;
    Ok(unit_f64((1.0 - alpha) / (4.0 * kf)) * modulus)
}

/// Comparison of `Delta F(a/q, h)` with its main term `A (tau_0/q) (c_0 h)^{(alpha-1)/k}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MainTermResidual {
    pub a: u64,
    pub q: u64,
    pub h: f64,
    pub delta: Complex64,
    pub main_term: Complex64,
    pub residual: Complex64,
    /// `|residual| / (h^{alpha/k} q^{1/2})`.
    pub normalized: f64,
    /// `normalized / |log h|`, the scale that applies when `alpha = k`.
    pub normalized_log: f64,
    /// Error budget of the direct evaluation.
    pub err_budget: f64,
}

/// The main term `A (tau_0/q) (c_0 h)^{(alpha-1)/k}` alone, for `h > 0`.
pub fn main_term(params: &SeriesParams, a: u64, q: u64, h: f64) -> Result<Complex64> {
    let tau0 = complete_sum(&params.poly, a % q, q, 0)?.value;
    Ok(constant_a(params)? * tau0 / q as f64 * (params.c0 as f64 * h).powf(params.rho))
}

/// Residual of the main-term approximation at `a/q` for a step `0 < h < 1`.
pub fn main_term_residual(params: &SeriesParams, a: u64, q: u64, h: f64, tol: f64) -> Result<MainTermResidual> {
    params.require(Mode::Extended)?;
    if !(h > 0.0 && h < 1.0) {
        return Err(Error::Domain(format!("step h = {h} must lie in (0, 1)")));
    }
    let main = main_term(params, a, q, h)?;
    let delta = eval_delta_direct(params, a, q, h, tol)?;
    let residual = delta.value - main;
    let normalized = residual.norm() / (h.powf(params.alpha / params.k as f64) * (q as f64).sqrt());
    Ok(MainTermResidual {
        a,
        q,
        h,
        delta: delta.value,
        main_term: main,
        residual,
        normalized,
        normalized_log: normalized / h.ln().abs(),
        err_budget: delta.err_budget,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn params_and_modes() {
        let p = SeriesParams::parse("n^2", 2.0).unwrap();
        assert_eq!((p.k, p.c0, p.nu_f, p.nu_0), (2, 1, 1, 2));
        assert!((p.rho - 0.5).abs() < 1e-15);
        assert_eq!(p.modes(), vec![Mode::Quadratic, Mode::Extended]);
        let p = SeriesParams::parse("n^3", 2.6).unwrap();
        assert_eq!(p.modes(), vec![Mode::Main, Mode::Extended]);
        assert!(SeriesParams::parse("-n^2", 2.0).is_err());
        assert!(SeriesParams::parse("n^2", 1.0).is_err());
    }

    #[test]
    fn constant_a_quadratic_closed_form() {
        let a = constant_a_raw(2.0, 2).unwrap();
        let pi = std::f64::consts::PI;
        let expect = Complex64::from_polar(pi * 2f64.sqrt(), -pi / 4.0) * -1.0;
        assert!((a - expect).norm() < 1e-13);
        assert!((a.norm() - 4.442_882_938_158_366).abs() < 1e-13);
        assert!(constant_a_raw(3.0, 2).is_err());
    }

    #[test]
    fn vanishing_main_term() {
        let p = SeriesParams::parse("n^2", 2.0).unwrap();
        let r = main_term_residual(&p, 1, 2, 1e-5, 1e-9).unwrap();
        assert!(r.main_term.norm() < 1e-15);
        assert!((r.residual - r.delta).norm() < 1e-15);
    }
}
