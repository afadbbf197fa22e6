//! Series evaluations against independent oracles.

use std::f64::consts::{PI, TAU};

use num_complex::Complex64;
use polyfourier::series::{constant_a, eval_delta_direct, poisson_delta, SeriesParams};

/// `sum_{n <= n_max} (e((x + h) P(n)) - e(x P(n))) n^-alpha` in plain floating point.
fn naive_delta(params: &SeriesParams, a: u64, q: u64, h: f64, n_max: u64) -> Complex64 {
    (1..=n_max)
        .map(|n| {
            let p = params.poly.eval_i128(n as i128);
            let base = (a as i128 * p).rem_euclid(q as i128) as f64 / q as f64;
            let step = (h * p as f64).rem_euclid(1.0);
            let w = (n as f64).powf(-params.alpha);
            (Complex64::from_polar(1.0, TAU * (base + step)) - Complex64::from_polar(1.0, TAU * base)) * w
        })
        .sum()
}

#[test]
fn direct_sum_matches_naive_sum() {
    let params = SeriesParams::parse("n^2 + n", 3.0).unwrap();
    for (a, q, h) in [(1u64, 5u64, 2.5e-3), (3, 7, -1.1e-3), (2, 9, 4.0e-2)] {
        let fast = eval_delta_direct(&params, a, q, h, 1e-11).unwrap();
        // The naive tail beyond 4e5 terms is below 2 sum n^-3 ~ 6e-12.
        let slow = naive_delta(&params, a, q, h, 400_000);
        assert!((fast.value - slow).norm() < 1e-9, "{} vs {}", fast.value, slow);
    }
}

#[test]
fn poisson_matches_direct_off_grid() {
    let params = SeriesParams::parse("n^2", 2.0).unwrap();
    let (a, q, h) = (4u64, 13u64, 3e-5);
    let p = poisson_delta(&params, a, q, h, 1e-9).unwrap();
    let d = eval_delta_direct(&params, a, q, h, 1e-9).unwrap();
    assert!((p.total - d.value).norm() <= p.err_budget + d.err_budget + 1e-12);
}

/// `int_0^inf u^-alpha (e(u^2) - 1) du` on the ray `u = r e^{i pi/4}`, where
/// `e(u^2) = exp(-2 pi r^2)`, by Simpson's rule in `s = log r`.
fn quadratic_constant_by_rotation(alpha: f64) -> Complex64 {
    let (s_lo, s_hi, steps) = (-40.0f64, 4.0f64, 400_000usize);
    let ds = (s_hi - s_lo) / steps as f64;
    let f = |s: f64| {
        let r = s.exp();
        r.powf(1.0 - alpha) * (-TAU * r * r).exp_m1()
    };
    let inner: f64 = (1..steps)
        .map(|i| f(s_lo + i as f64 * ds) * if i % 2 == 1 { 4.0 } else { 2.0 })
        .sum::<f64>()
        + f(s_lo)
        + f(s_hi);
    let big_r = s_hi.exp();
    let real = inner * ds / 3.0 - big_r.powf(1.0 - alpha) / (alpha - 1.0);
    Complex64::from_polar(1.0, PI / 4.0 * (1.0 - alpha)) * real
}

#[test]
fn constant_matches_rotated_integral() {
    for alpha in [1.5, 1.8, 2.0] {
        let params = SeriesParams::parse("n^2", alpha).unwrap();
        let a = constant_a(&params).unwrap();
        let oracle = quadratic_constant_by_rotation(alpha);
        assert!((a - oracle).norm() < 1e-8, "alpha {alpha}: {a} vs {oracle}");
    }
}
