//! Oscillatory integrals attached to the series.
//!
//! With `s = h^{1/k}` and `psi(x) = h P(x / s)`, the Poisson kernel is
//! `g_h(x) = Phi(x / s) (e(psi(x)) - 1) x^{-alpha}` and [`ghat`] evaluates its
//! Fourier transform. [`osc_integral`] evaluates
//! `I(h) = int_1^oo (e(h P(u)) - 1) u^{-alpha} du`, whose leading behaviour is
//! `A h^{(alpha-1)/k}`. [`eta_tilde_norm`] is the `L^1` norm of the Mellin
//! transform of `phi(x / lambda) (e(x) - 1)`.
//!
//! Finite ranges are integrated with Gauss-Legendre panels whose width is tied
//! to the local frequency; the error is estimated by halving every width.
//! Infinite tails are moved onto rays in the complex plane along which the
//! integrand decays exponentially.

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::numeric::{adaptive, panel, unit_f64, unit_minus_one, CompensatedSum, PANEL_DEGREE, TAU};
use crate::series::{constant_a, BumpPair, SeriesParams};
use crate::{Error, Result};

/// Cycles of the fastest oscillation allowed per panel.
const CYCLES_PER_PANEL: f64 = 1.5;
/// Panels covering the smooth window `[s/2, s]`.
const WINDOW_PANELS: usize = 16;
/// Relative tolerance of the ray integrals.
const RAY_REL_TOL: f64 = 1e-14;
/// Ray integrals stop where the integrand has decayed by `exp(-RAY_DECAY)`.
const RAY_DECAY: f64 = 50.0;

/// Real polynomial `sum_j c_j x^j` used for the scaled phase `psi`.
#[derive(Clone, Debug)]
pub(crate) struct Phase {
    coeffs: Vec<f64>,
}

impl Phase {
    pub(crate) fn scaled(params: &SeriesParams, h: f64) -> Self {
        Self {
            coeffs: params.poly.scaled_coeffs(h),
        }
    }

    pub(crate) fn eval(&self, x: f64) -> f64 {
        self.coeffs.iter().rev().fold(0.0, |acc, &c| acc * x + c)
    }

    /// `d^j psi / dx^j` at `x`.
    pub(crate) fn derivative(&self, j: usize, x: f64) -> f64 {
        let mut acc = 0.0;
        for (i, &c) in self.coeffs.iter().enumerate().skip(j).rev() {
            let falling: f64 = ((i - j + 1)..=i).map(|v| v as f64).product();
            acc = acc * x + c * falling;
        }
        acc
    }

    fn eval_complex(&self, z: Complex64) -> Complex64 {
        self.coeffs.iter().rev().fold(Complex64::new(0.0, 0.0), |acc, &c| acc * z + c)
    }

    fn degree(&self) -> usize {
        self.coeffs.len() - 1
    }
}

/// `e(w)` for complex `w`.
fn unit_complex(w: Complex64) -> Complex64 {
    unit_f64(w.re) * (-TAU * w.im).exp()
}

/// A computed value of `ghat_h(xi)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GhatValue {
    pub h: f64,
    pub xi: f64,
    pub value: Complex64,
    /// Mesh-doubling difference plus ray-quadrature error.
    pub error: f64,
    /// Split point between the finite panels and the ray tails.
    pub x_max: f64,
    pub panels: usize,
}

/// Finite-range integral of `w(x) (e(psi) - 1) x^{-alpha} e(-xi x)` on `[lo, hi]`,
/// where `w` is the window on `[s/2, s]` when `window` is set.
fn finite_part(phase: &Phase, alpha: f64, xi: f64, window: Option<f64>, lo: f64, hi: f64, refine: f64) -> (Complex64, usize) {
    let bump = BumpPair::shared();
    let integrand = |x: f64| {
        let w = match window {
            Some(s) if x < s => bump.phi(x / s),
            _ => 1.0,
        };
        unit_minus_one(phase.eval(x)) * unit_f64(-xi * x) * (w * x.powf(-alpha))
    };
    let mut acc = CompensatedSum::new();
    let mut panels = 0;
    let mut x = lo;
    if let Some(s) = window {
        let n = (WINDOW_PANELS as f64 * refine) as usize;
        let step = (s - lo) / n as f64;
        for i in 0..n {
            acc.add(panel(lo + i as f64 * step, lo + (i + 1) as f64 * step, PANEL_DEGREE, integrand));
        }
        panels += n;
        x = s;
    }
    let freq = |x: f64| (phase.derivative(1, x) - xi).abs().max(xi.abs());
    let cycles = CYCLES_PER_PANEL / refine;
    while x < hi {
        let first = (cycles / freq(x).max(1e-300)).min(0.25 * x / refine);
        let w = (cycles / freq(x).max(freq(x + first)).max(1e-300))
            .min(0.25 * x / refine)
            .min(hi - x);
        let end = if hi - x - w < 1e-3 * w { hi } else { x + w };
        acc.add(panel(x, end, PANEL_DEGREE, integrand));
        panels += 1;
        x = end;
    }
    (acc.value(), panels)
}

/// Adaptive integration of `f` along `t` in `[0, t_max]` on geometric segments
/// starting at `first`.
fn ray_integral<F: FnMut(f64) -> Complex64>(first: f64, t_max: f64, abs_tol: f64, mut f: F) -> (Complex64, f64) {
    let mut acc = CompensatedSum::new();
    let mut err = 0.0;
    let mut lo = 0.0;
    let mut hi = first.min(t_max);
    while lo < t_max {
        let q = adaptive(lo, hi, abs_tol, RAY_REL_TOL, 4000, &mut f);
        acc.add(q.value);
        err += q.error;
        lo = hi;
        hi = (2.0 * hi).min(t_max);
    }
    (acc.value(), err)
}

/// `int_X^oo e(psi(x) - xi x) x^{-alpha} dx` along `X + t e^{i pi/(2k)}`.
/// Requires every derivative of `psi` positive at `X` and `psi'(X) > xi`.
fn phase_tail(phase: &Phase, alpha: f64, xi: f64, x_split: f64, abs_tol: f64) -> (Complex64, f64) {
    let k = phase.degree();
    let dir = Complex64::from_polar(1.0, std::f64::consts::FRAC_PI_2 / k as f64);
    let at = |t: f64| {
        let z = x_split + dir * t;
        let w = phase.eval_complex(z) - xi * z;
        (z, w)
    };
    let mut t_max = 1.0 / (phase.derivative(1, x_split) - xi);
    while TAU * at(t_max).1.im < RAY_DECAY {
        t_max *= 2.0;
    }
    let first = (t_max / 64.0).min(x_split);
    ray_integral(first, t_max, abs_tol, |t| {
        let (z, w) = at(t);
        unit_complex(w) * (-alpha * z.ln()).exp() * dir
    })
}

/// `int_X^oo e(-xi x) x^{-alpha} dx`, rotated towards decay.
fn plain_tail(alpha: f64, xi: f64, x_split: f64, abs_tol: f64) -> (Complex64, f64) {
    if xi == 0.0 {
        return (Complex64::new(x_split.powf(1.0 - alpha) / (alpha - 1.0), 0.0), 0.0);
    }
    let dir = Complex64::new(0.0, -xi.signum());
    let t_max = RAY_DECAY / (TAU * xi.abs());
    ray_integral(x_split.min(t_max), t_max, abs_tol, |t| {
        let z = x_split + dir * t;
        unit_complex(-xi * z) * (-alpha * z.ln()).exp() * dir
    })
}

/// Smallest split point `X >= start` (doubling) where the ray tail applies.
fn split_point(phase: &Phase, xi: f64, start: f64) -> f64 {
    let mut x = start;
    loop {
        let all_positive = (1..=phase.degree()).all(|j| phase.derivative(j, x) > 0.0);
        if all_positive && phase.derivative(1, x) >= 2.0 * xi {
            return x;
        }
        x *= 2.0;
    }
}

/// Integral of `w(x) (e(psi) - 1) x^{-alpha} e(-xi x)` from `lo` to infinity.
fn full_integral(phase: &Phase, alpha: f64, xi: f64, window: Option<f64>, lo: f64) -> (Complex64, f64, f64, usize) {
    let s = window.unwrap_or(lo);
    let x_split = split_point(phase, xi, (2.0 * s).max(1.0));
    let (coarse, n1) = finite_part(phase, alpha, xi, window, lo, x_split, 1.0);
    let (fine, n2) = finite_part(phase, alpha, xi, window, lo, x_split, 2.0);
    let scale = fine.norm().max(x_split.powf(1.0 - alpha));
    let tol = 1e-16 * scale;
    let (t1, e1) = phase_tail(phase, alpha, xi, x_split, tol);
    let (t2, e2) = plain_tail(alpha, xi, x_split, tol);
    let value = fine + t1 - t2;
    let rounding = 64.0 * f64::EPSILON * (fine.norm() + t1.norm() + t2.norm());
    (value, (fine - coarse).norm() + e1 + e2 + rounding, x_split, n1 + n2)
}

/// `ghat_h(xi) = int g_h(x) e(-xi x) dx` with
/// `g_h(x) = Phi(h^{-1/k} x) (e(h P(h^{-1/k} x)) - 1) x^{-alpha}`.
pub fn ghat(params: &SeriesParams, h: f64, xi: f64) -> Result<GhatValue> {
    if !(h > 0.0 && h < 1.0) {
        return Err(Error::Domain(format!("step h = {h} must lie in (0, 1)")));
    }
    if !(params.alpha > params.k as f64 / 2.0) {
        return Err(Error::Domain(format!(
            "alpha = {} must exceed k/2 = {}",
            params.alpha,
            params.k as f64 / 2.0
        )));
    }
    if !xi.is_finite() {
        return Err(Error::Domain("frequency must be finite".into()));
    }
    let s = h.powf(1.0 / params.k as f64);
    let phase = Phase::scaled(params, h);
    let (value, error, x_max, panels) = full_integral(&phase, params.alpha, xi, Some(s), 0.5 * s);
    Ok(GhatValue {
        h,
        xi,
        value,
        error,
        x_max,
        panels,
    })
}

/// The limit of `ghat_h(0)` as `h -> 0+`:
/// `int_0^oo (e(c_0 x^k) - 1) x^{-alpha} dx = A c_0^{(alpha-1)/k}`.
pub fn ghat_zero_limit(params: &SeriesParams) -> Result<Complex64> {
    Ok(constant_a(params)? * (params.c0 as f64).powf(params.rho))
}

/// `I(h) = int_1^oo (e(h P(u)) - 1) u^{-alpha} du` with its asymptotic residual.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OscIntegral {
    pub h: f64,
    pub value: Complex64,
    pub error: f64,
    /// `I(h) h^{-(alpha-1)/k}`.
    pub normalized: Complex64,
    /// `I(h) h^{-(alpha-1)/k} - A`.
    pub residual: Complex64,
    /// `|residual| / h^{1/k}`.
    pub scaled_residual: f64,
}

/// Evaluates `I(h)` for monic `P` and `1 < alpha < k`.
pub fn osc_integral(params: &SeriesParams, h: f64) -> Result<OscIntegral> {
    if !params.poly.is_monic() {
        return Err(Error::Precondition(format!("{} is not monic", params.poly)));
    }
    if !(params.alpha < params.k as f64) {
        return Err(Error::Domain(format!("alpha = {} must be below k = {}", params.alpha, params.k)));
    }
    if !(h > 0.0 && h < 1.0) {
        return Err(Error::Domain(format!("step h = {h} must lie in (0, 1)")));
    }
    let s = h.powf(1.0 / params.k as f64);
    let phase = Phase::scaled(params, h);
    let (inner, err, _, _) = full_integral(&phase, params.alpha, 0.0, None, s);
    let h_rho = h.powf(params.rho);
    let a = constant_a(params)?;
    let residual = inner - a;
    Ok(OscIntegral {
        h,
        value: inner * h_rho,
        error: err * h_rho,
        normalized: inner,
        residual,
        scaled_residual: residual.norm() / s,
    })
}

/// `||eta~_lambda||_1` for `eta_lambda(x) = phi(x / lambda) (e(x) - 1)`, where
/// `eta~(t) = int eta(x) x^{it - 1} dx`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EtaNorm {
    pub lambda: f64,
    /// Integral of `|eta~(t)|` over `|t| <= t_max`.
    pub norm: f64,
    pub t_max: f64,
    /// Bound `2 ||G''||_1 / t_max` on the part with `|t| > t_max`, where
    /// `G(u) = eta(e^u)`.
    pub tail_bound: f64,
    /// `norm / min(lambda, lambda^{1/2})`.
    pub ratio: f64,
}

/// Mellin `L^1` norm by trapezoidal quadrature in `u = log x` (spectrally
/// accurate for the compactly supported smooth `G`) and Simpson's rule in `t`.
pub fn eta_tilde_norm(lambda: f64) -> Result<EtaNorm> {
    if !(lambda > 0.0 && lambda.is_finite()) {
        return Err(Error::Domain(format!("lambda = {lambda} must be positive")));
    }
    let bump = BumpPair::shared();
    let peak = 2.0 * TAU * lambda;
    let t_max = 1.2 * peak + 400.0;
    let du = TAU / (2.0 * (t_max + peak) + 2000.0);
    let (u_lo, u_hi) = ((0.5 * lambda).ln(), (2.0 * lambda).ln());
    let count = ((u_hi - u_lo) / du).ceil() as usize;
    let du = (u_hi - u_lo) / count as f64;
    let nodes: Vec<(f64, Complex64)> = (1..count)
        .map(|i| {
            let u = u_lo + i as f64 * du;
            let x = u.exp();
            (u, unit_minus_one(x) * bump.phi(x / lambda))
        })
        .collect();
    let g_second: f64 = nodes.windows(3).map(|w| (w[0].1 - 2.0 * w[1].1 + w[2].1).norm() / du).sum();

    let dt = 0.25;
    let steps = 2 * (t_max / dt).ceil() as usize;
    let t_max = steps as f64 * dt / 2.0;
    const BLOCK: usize = 2048;
    let blocks: Vec<usize> = (0..=steps).step_by(BLOCK).collect();
    let values: Vec<f64> = blocks
        .par_iter()
        .flat_map_iter(|&start| {
            let end = (start + BLOCK).min(steps + 1);
            let t0 = -t_max + start as f64 * dt;
            let mut acc = vec![Complex64::new(0.0, 0.0); end - start];
            for &(u, g) in &nodes {
                let mut z = g * Complex64::from_polar(1.0, t0 * u);
                let r = Complex64::from_polar(1.0, dt * u);
                for slot in acc.iter_mut() {
                    *slot += z;
                    z *= r;
                }
            }
            acc.into_iter().map(move |v| (v * du).norm())
        })
        .collect();
    let mut simpson = CompensatedSum::new();
    for (j, v) in values.iter().enumerate() {
        let w = if j == 0 || j == steps {
            1.0
        } else if j % 2 == 1 {
            4.0
        } else {
            2.0
        };
        simpson.add(Complex64::new(w * v, 0.0));
    }
    let norm = simpson.value().re * dt / 3.0;
    Ok(EtaNorm {
        lambda,
        norm,
        t_max,
        tail_bound: 2.0 * g_second / t_max,
        ratio: norm / lambda.min(lambda.sqrt()),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn phase_derivatives() {
        let p = SeriesParams::parse("n^3 + 2*n", 2.6).unwrap();
        let ph = Phase::scaled(&p, 1.0);
        assert_eq!(ph.eval(2.0), 12.0);
        assert_eq!(ph.derivative(1, 2.0), 14.0);
        assert_eq!(ph.derivative(2, 2.0), 12.0);
        assert_eq!(ph.derivative(3, 2.0), 6.0);
    }

    #[test]
    fn plain_tail_matches_closed_form_at_zero_and_numeric_elsewhere() {
        let (v, _) = plain_tail(2.0, 0.0, 2.0, 1e-16);
        assert!((v.re - 0.5).abs() < 1e-15);
        // int_2^oo e(-x/3) x^{-2} dx by brute panels up to a far cutoff plus
        // the ray value at the cutoff.
        let (ray, _) = plain_tail(2.0, 1.0 / 3.0, 2.0, 1e-16);
        let (far, _) = plain_tail(2.0, 1.0 / 3.0, 2002.0, 1e-16);
        let mut acc = Complex64::new(0.0, 0.0);
        let mut x = 2.0;
        while x < 2002.0 {
            acc += panel(x, x + 0.5, 20, |x| unit_f64(-x / 3.0) / (x * x));
            x += 0.5;
        }
        assert!((ray - (acc + far)).norm() < 1e-13, "{ray} vs {}", acc + far);
    }

    #[test]
    fn osc_integral_tends_to_constant() {
        let p = SeriesParams::parse("n^3", 2.6).unwrap();
        let r = osc_integral(&p, 1e-6).unwrap();
        // The leading correction is -2 pi i h^{1-rho} / (k + 1 - alpha).
        let expect = 2.0 * std::f64::consts::PI / 1.4 * 1e-6f64.powf(1.0 - p.rho);
        assert!((r.residual.norm() - expect).abs() < 0.05 * expect, "{} vs {expect}", r.residual);
        assert!(r.error < 1e-9);
    }

    #[test]
    fn ghat_at_zero_approaches_limit() {
        let p = SeriesParams::parse("n^2", 2.0).unwrap();
        let lim = ghat_zero_limit(&p).unwrap();
        let g = ghat(&p, 1e-10, 0.0).unwrap();
        assert!((g.value - lim).norm() < 1e-3, "{} vs {lim}", g.value);
    }
}
