//! Low-level numerical kernels shared by the modules: exact fixed-point phases,
//! table-driven `e(t)`, compensated summation, Gauss-Legendre panels,
//! the Hurwitz zeta function, the real Gamma function and least squares.

use std::sync::OnceLock;

use gauss_quad::legendre::GaussLegendre;
use num_complex::Complex64;

use crate::{Error, Result};

pub const TAU: f64 = std::f64::consts::TAU;

/// A phase modulo 1 stored as a 128-bit binary fraction (`t / 2^128`).
///
/// Products `Turn * integer` are exact modulo 1, which is what makes phases
/// `x P(n)` accurate even when `P(n)` is astronomically large.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Turn(pub u128);

impl Turn {
    /// `x mod 1`, exact for every finite `f64` with exponent above `-128`
    /// and correctly rounded below.
    pub fn from_f64(x: f64) -> Self {
        if x == 0.0 || !x.is_finite() {
            return Turn(0);
        }
        let bits = x.abs().to_bits();
        let exp_bits = ((bits >> 52) & 0x7ff) as i32;
        let frac = bits & ((1u64 << 52) - 1);
        let (mant, exp) = if exp_bits == 0 {
            (frac, -1074)
        } else {
            (frac | (1u64 << 52), exp_bits - 1075)
        };
        let shift = exp + 128;
        let mag: u128 = if shift >= 128 {
            0
        } else if shift >= 0 {
            (mant as u128).wrapping_shl(shift as u32)
        } else if shift > -64 {
            let s = (-shift) as u32;
            ((mant as u128) + (1u128 << (s - 1))) >> s
        } else {
            0
        };
        if x < 0.0 {
            Turn(mag.wrapping_neg())
        } else {
            Turn(mag)
        }
    }

    /// `r / q mod 1`, truncated to 128 bits.
    pub fn from_ratio(r: u64, q: u64) -> Self {
        assert!(q > 0, "zero denominator");
        let r = r % q;
        let num = (r as u128) << 64;
        let hi = num / q as u128;
        let rem = num % q as u128;
        let lo = (rem << 64) / q as u128;
        Turn((hi << 64) | lo)
    }

    /// The phase as a real in `[0, 1)`.
    pub fn to_f64(self) -> f64 {
        self.0 as f64 * (-128f64).exp2()
    }

    /// Signed representative in `[-1/2, 1/2)`.
    pub fn to_signed_f64(self) -> f64 {
        (self.0 as i128) as f64 * (-128f64).exp2()
    }

    /// `self * m mod 1` for an integer `m` given modulo `2^128`.
    pub fn mul_int(self, m: u128) -> Turn {
        Turn(self.0.wrapping_mul(m))
    }
}

const TABLE_BITS: u32 = 12;
const TABLE_LEN: usize = 1 << TABLE_BITS;

struct UnitTables {
    coarse: Vec<Complex64>,
    fine: Vec<Complex64>,
}

fn unit_tables() -> &'static UnitTables {
    static TABLES: OnceLock<UnitTables> = OnceLock::new();
    TABLES.get_or_init(|| {
        let coarse = (0..TABLE_LEN)
            .map(|i| {
                let (s, c) = (TAU * i as f64 / TABLE_LEN as f64).sin_cos();
                Complex64::new(c, s)
            })
            .collect();
        let fine = (0..TABLE_LEN)
            .map(|i| {
                let (s, c) = (TAU * i as f64 / (TABLE_LEN * TABLE_LEN) as f64).sin_cos();
                Complex64::new(c, s)
            })
            .collect();
        UnitTables { coarse, fine }
    })
}

impl std::ops::Add for Turn {
    type Output = Turn;

    fn add(self, other: Turn) -> Turn {
        Turn(self.0.wrapping_add(other.0))
    }
}

impl std::ops::Neg for Turn {
    type Output = Turn;

    fn neg(self) -> Turn {
        Turn(self.0.wrapping_neg())
    }
}

/// `e(t) = exp(2 pi i t)` for a fixed-point phase.
///
/// Two table lookups cover the top 24 bits; the remainder (below `2^-24`) is
/// handled by a short Taylor series. Absolute error is a few units of `1e-16`.
#[inline]
pub fn unit(t: Turn) -> Complex64 {
    let tables = unit_tables();
    let i1 = (t.0 >> (128 - TABLE_BITS)) as usize;
    let i2 = ((t.0 >> (128 - 2 * TABLE_BITS)) as usize) & (TABLE_LEN - 1);
    let rest = t.0 & ((1u128 << (128 - 2 * TABLE_BITS)) - 1);
    let theta = TAU * (rest >> 40) as f64 * (-88f64).exp2();
    let t2 = theta * theta;
    let small = Complex64::new(1.0 - 0.5 * t2, theta * (1.0 - t2 / 6.0));
    tables.coarse[i1] * tables.fine[i2] * small
}

/// `e(x)` for a real phase.
pub fn unit_f64(x: f64) -> Complex64 {
    unit(Turn::from_f64(x))
}

/// `e(x) - 1` without cancellation for small `x`.
pub fn unit_minus_one(x: f64) -> Complex64 {
    let t = Turn::from_f64(x).to_signed_f64();
    let s = (std::f64::consts::PI * t).sin();
    Complex64::new(-2.0 * s * s, (TAU * t).sin())
}

/// Table of `e(v/q)` for `v` in `[0, q)`; two-level for large `q`.
#[derive(Clone, Debug)]
pub struct ResidueTable {
    q: u64,
    block: u64,
    low: Vec<Complex64>,
    high: Vec<Complex64>,
}

impl ResidueTable {
    const DIRECT_LIMIT: u64 = 1 << 20;

    pub fn new(q: u64) -> Self {
        assert!(q > 0, "zero modulus");
        if q <= Self::DIRECT_LIMIT {
            let low = (0..q).map(|v| unit(Turn::from_ratio(v, q))).collect();
            Self {
                q,
                block: q,
                low,
                high: vec![Complex64::new(1.0, 0.0)],
            }
        } else {
            let block = (q as f64).sqrt().ceil() as u64;
            let low = (0..block).map(|v| unit(Turn::from_ratio(v, q))).collect();
            let high = (0..q.div_ceil(block)).map(|j| unit(Turn::from_ratio(j * block, q))).collect();
            Self { q, block, low, high }
        }
    }

    pub fn modulus(&self) -> u64 {
        self.q
    }

    /// `e(v/q)` for `v < q`.
    #[inline]
    pub fn get(&self, v: u64) -> Complex64 {
        if self.block == self.q {
            self.low[v as usize]
        } else {
            self.high[(v / self.block) as usize] * self.low[(v % self.block) as usize]
        }
    }
}

/// Neumaier-compensated complex accumulator.
#[derive(Clone, Copy, Debug, Default)]
pub struct CompensatedSum {
    sum: Complex64,
    comp: Complex64,
}

fn two_sum(acc: &mut f64, comp: &mut f64, x: f64) {
    let t = *acc + x;
    if acc.abs() >= x.abs() {
        *comp += (*acc - t) + x;
    } else {
        *comp += (x - t) + *acc;
    }
    *acc = t;
}

impl CompensatedSum {
    pub fn new() -> Self {
        Self::default()
    }

    #[inline]
    pub fn add(&mut self, x: Complex64) {
        two_sum(&mut self.sum.re, &mut self.comp.re, x.re);
        two_sum(&mut self.sum.im, &mut self.comp.im, x.im);
    }

    pub fn value(&self) -> Complex64 {
        self.sum + self.comp
    }
}

/// Compensated sum of a slice in index order.
pub fn compensated_sum(xs: impl IntoIterator<Item = Complex64>) -> Complex64 {
    let mut acc = CompensatedSum::new();
    for x in xs {
        acc.add(x);
    }
    acc.value()
}

/// Gauss-Legendre rule on `[-1, 1]` as `(node, weight)` pairs, cached per degree.
pub fn gauss_legendre(deg: usize) -> &'static [(f64, f64)] {
    static RULES: OnceLock<Vec<Vec<(f64, f64)>>> = OnceLock::new();
    let rules = RULES.get_or_init(|| {
        (0..=64)
            .map(|d| {
                if d < 2 {
                    Vec::new()
                } else {
                    let mut pairs = GaussLegendre::new(d).expect("degree >= 2").as_node_weight_pairs().to_vec();
                    pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
                    pairs
                }
            })
            .collect()
    });
    assert!((2..=64).contains(&deg), "Gauss-Legendre degree out of range");
    &rules[deg]
}

/// Default panel degree.
pub const PANEL_DEGREE: usize = 20;

/// Integral of a complex function over one panel.
pub fn panel<F: FnMut(f64) -> Complex64>(a: f64, b: f64, deg: usize, mut f: F) -> Complex64 {
    let half = 0.5 * (b - a);
    let mid = 0.5 * (b + a);
    let mut acc = CompensatedSum::new();
    for &(x, w) in gauss_legendre(deg) {
        acc.add(f(mid + half * x) * w);
    }
    acc.value() * half
}

/// Result of an adaptive integration.
#[derive(Clone, Copy, Debug)]
pub struct Quadrature {
    pub value: Complex64,
    pub error: f64,
    pub panels: usize,
}

/// Adaptive bisection with a 20-point Gauss-Legendre panel, comparing each
/// panel against its two halves. Stops once the error drops below
/// `abs_tol + rel_tol * |value|` or the panel budget is spent.
pub fn adaptive<F: FnMut(f64) -> Complex64>(a: f64, b: f64, abs_tol: f64, rel_tol: f64, max_panels: usize, mut f: F) -> Quadrature {
    let whole = panel(a, b, PANEL_DEGREE, &mut f);
    let mut stack = vec![(a, b, whole, 0u32)];
    let mut acc = CompensatedSum::new();
    let mut err = 0.0;
    let mut panels = 1;
    while let Some((lo, hi, coarse, depth)) = stack.pop() {
        let mid = 0.5 * (lo + hi);
        let left = panel(lo, mid, PANEL_DEGREE, &mut f);
        let right = panel(mid, hi, PANEL_DEGREE, &mut f);
        panels += 2;
        let fine = left + right;
        let local = (fine - coarse).norm();
        let budget = (abs_tol + rel_tol * fine.norm()) * (hi - lo) / (b - a);
        if local <= budget.max(1e-300) || panels >= max_panels || depth >= 50 {
            acc.add(fine);
            err += local;
        } else {
            stack.push((mid, hi, right, depth + 1));
            stack.push((lo, mid, left, depth + 1));
        }
    }
    Quadrature {
        value: acc.value(),
        error: err,
        panels,
    }
}

/// Hurwitz zeta `zeta(s, a) = sum_{n >= 0} (n + a)^{-s}` for `s > 1`, `a > 0`,
/// by Euler-Maclaurin summation after ten explicit terms.
pub fn hurwitz_zeta(s: f64, a: f64) -> f64 {
    assert!(s > 1.0 && a > 0.0, "hurwitz_zeta needs s > 1 and a > 0");
    // Bernoulli numbers B_2 .. B_20.
    const B2K: [f64; 10] = [
        1.0 / 6.0,
        -1.0 / 30.0,
        1.0 / 42.0,
        -1.0 / 30.0,
        5.0 / 66.0,
        -691.0 / 2730.0,
        7.0 / 6.0,
        -3617.0 / 510.0,
        43867.0 / 798.0,
        -174611.0 / 330.0,
    ];
    let explicit = (12.0 - a).ceil().max(0.0) as usize;
    let mut sum = 0.0;
    for n in 0..explicit {
        sum += (a + n as f64).powf(-s);
    }
    let x = a + explicit as f64;
    let mut total = sum + x.powf(1.0 - s) / (s - 1.0) + 0.5 * x.powf(-s);
    // term_k = B_2k / (2k)! * s (s+1) ... (s + 2k - 2) * x^{-s-2k+1}
    let mut rising = s;
    let mut fact = 2.0;
    let mut xpow = x.powf(-s - 1.0);
    for (k, b) in B2K.iter().enumerate() {
        let term = b / fact * rising * xpow;
        total += term;
        if term.abs() < 1e-18 * total.abs() {
            break;
        }
        let j = 2.0 * (k as f64 + 1.0);
        rising *= (s + j - 1.0) * (s + j);
        fact *= (j + 1.0) * (j + 2.0);
        xpow /= x * x;
    }
    total
}

/// `sum_{n > n0, n = v mod q} n^{-s}` for `1 <= v <= q`.
pub fn progression_tail(s: f64, n0: u64, v: u64, q: u64) -> f64 {
    // first n > n0 with n = v (mod q)
    let r = (v % q + q - (n0 + 1) % q) % q;
    let first = n0 + 1 + r;
    (q as f64).powf(-s) * hurwitz_zeta(s, first as f64 / q as f64)
}

/// Real Gamma function; negative non-integers via the reflection formula.
pub fn gamma(x: f64) -> Result<f64> {
    if x <= 0.0 && x == x.floor() {
        return Err(Error::Domain(format!("Gamma has a pole at {x}")));
    }
    if x > 0.0 {
        Ok(statrs::function::gamma::gamma(x))
    } else {
        let pi = std::f64::consts::PI;
        Ok(pi / ((pi * x).sin() * statrs::function::gamma::gamma(1.0 - x)))
    }
}

/// Ordinary least squares `y = slope x + intercept`.
#[derive(Clone, Debug, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct LineFit {
    pub slope: f64,
    pub intercept: f64,
    pub slope_stderr: f64,
    pub residuals: Vec<f64>,
}

pub fn fit_line(xs: &[f64], ys: &[f64]) -> Result<LineFit> {
    let n = xs.len();
    if n != ys.len() || n < 2 {
        return Err(Error::Domain(format!("line fit needs at least two paired points, got {n}")));
    }
    let nf = n as f64;
    let mx = xs.iter().sum::<f64>() / nf;
    let my = ys.iter().sum::<f64>() / nf;
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    if sxx == 0.0 {
        return Err(Error::Domain("line fit with a single abscissa".into()));
    }
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let residuals: Vec<f64> = xs.iter().zip(ys).map(|(x, y)| y - (slope * x + intercept)).collect();
    let slope_stderr = if n > 2 {
        (residuals.iter().map(|r| r * r).sum::<f64>() / (nf - 2.0) / sxx).sqrt()
    } else {
        0.0
    };
    Ok(LineFit {
        slope,
        intercept,
        slope_stderr,
        residuals,
    })
}

pub fn gcd(mut a: u64, mut b: u64) -> u64 {
    while b != 0 {
        (a, b) = (b, a % b);
    }
    a
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn turn_from_f64_is_exact_mod_one() {
        assert_eq!(Turn::from_f64(0.5).0, 1u128 << 127);
        assert_eq!(Turn::from_f64(-0.25).0, 3u128 << 126);
        assert_eq!(Turn::from_f64(3.75).0, 3u128 << 126);
        let h = 1e-7;
        assert!((Turn::from_f64(h).to_f64() - h).abs() < 1e-22);
        // (h m) mod 1 through the integer product, with h m exact in f64.
        let h = 3.0 * (-20f64).exp2();
        let t = Turn::from_f64(h).mul_int(1_000_001);
        assert_eq!(t.to_f64(), (h * 1_000_001.0).fract());
    }

    #[test]
    fn unit_matches_sin_cos() {
        for i in 0..2000 {
            let x = (i as f64 * 0.618_033_988_749_894_9).fract();
            let (s, c) = (TAU * x).sin_cos();
            let u = unit_f64(x);
            assert!((u.re - c).abs() < 2e-15 && (u.im - s).abs() < 2e-15, "x = {x}");
        }
        let u = unit_minus_one(1e-12);
        assert!((u.im - TAU * 1e-12).abs() < 1e-26);
    }

    #[test]
    fn residue_table_levels_agree() {
        let q = (1u64 << 20) + 7;
        let t = ResidueTable::new(q);
        for v in [0, 1, 12345, q - 1] {
            let direct = unit(Turn::from_ratio(v, q));
            assert!((t.get(v) - direct).norm() < 1e-15);
        }
    }

    #[test]
    fn hurwitz_matches_known_values() {
        let pi = std::f64::consts::PI;
        assert!((hurwitz_zeta(2.0, 1.0) - pi * pi / 6.0).abs() < 1e-15);
        // zeta(2, 1/2) = 3 zeta(2)
        assert!((hurwitz_zeta(2.0, 0.5) - pi * pi / 2.0).abs() < 1e-14);
        // brute-force comparison with a long direct sum plus integral tail
        let (s, a) = (2.6, 0.37);
        let mut direct: f64 = (0..200_000).map(|n| (n as f64 + a).powf(-s)).sum();
        let x = 200_000.0 + a;
        direct += x.powf(1.0 - s) / (s - 1.0) + 0.5 * x.powf(-s);
        assert!((hurwitz_zeta(s, a) - direct).abs() < 1e-13);
    }

    #[test]
    fn gamma_reflection() {
        let pi = std::f64::consts::PI;
        assert!((gamma(-0.5).unwrap() + 2.0 * pi.sqrt()).abs() < 1e-13);
        assert!(gamma(-2.0).is_err());
    }

    #[test]
    fn adaptive_integrates_oscillation() {
        let q = adaptive(0.0, 10.0, 1e-13, 0.0, 10_000, |x| Complex64::new(0.0, TAU * 3.0 * x).exp());
        assert!(q.value.norm() < 1e-12);
        let q = adaptive(1.0, 2.0, 1e-14, 0.0, 1000, |x| Complex64::new(1.0 / x, 0.0));
        assert!((q.value.re - 2f64.ln()).abs() < 1e-14);
    }

    #[test]
    fn line_fit_recovers_slope() {
        let xs = [0.0, 1.0, 2.0, 3.0];
        let ys = [1.0, 3.0, 5.0, 7.0];
        let f = fit_line(&xs, &ys).unwrap();
        assert!((f.slope - 2.0).abs() < 1e-14 && (f.intercept - 1.0).abs() < 1e-14);
    }
}
