//! Continued fractions, approximation exponents and the sets `A(t)`.
//!
//! Irrational inputs are held as fixed-point enclosures `x in [X, X + 1] / 2^B`
//! with `B` bits. Partial quotients are trusted only while both endpoints of
//! the enclosure agree, so every reported convergent is a convergent of `x`.
//! Rational inputs are expanded exactly.

use num_bigint::{BigInt, BigUint};
use num_integer::Integer;
use num_traits::{One, ToPrimitive, Zero};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::numeric::Turn;
use crate::{Error, Result};

/// Default working precision in bits.
pub const DEFAULT_BITS: u32 = 256;

/// A real number in `[0, 1)`, exact or enclosed at fixed precision.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum HighPrecisionReal {
    /// `num / den` exactly.
    Rational { num: BigUint, den: BigUint },
    /// `mantissa / 2^bits <= x <= (mantissa + 1) / 2^bits`.
    Enclosure { mantissa: BigUint, bits: u32 },
}

impl HighPrecisionReal {
    /// `num / den mod 1`.
    pub fn rational(num: u64, den: u64) -> Result<Self> {
        if den == 0 {
            return Err(Error::Domain("zero denominator".into()));
        }
        Ok(Self::Rational {
            num: BigUint::from(num % den),
            den: BigUint::from(den),
        })
    }

    /// `(p + sqrt(d)) / q mod 1` for a non-square `d > 0`, with `bits` bits.
    pub fn quadratic(p: i64, d: u64, q: u64, bits: u32) -> Result<Self> {
        if q == 0 {
            return Err(Error::Domain("zero denominator".into()));
        }
        let root = (d as f64).sqrt().round() as u64;
        if (root.saturating_sub(1)..=root + 1).any(|r| r * r == d) {
            return Err(Error::Domain(format!("{d} is a perfect square")));
        }
        let scale = BigUint::one() << bits;
        // floor(sqrt(d) 2^bits) and the enclosure of (p + sqrt d)/q.
        let root = (BigUint::from(d) << (2 * bits)).sqrt();
        let p_scaled = BigInt::from(p) * BigInt::from(scale.clone());
        let lo = (p_scaled + BigInt::from(root)).mod_floor(&(BigInt::from(q) * BigInt::from(scale.clone())));
        let lo = lo.to_biguint().expect("non-negative after mod_floor");
        // Dividing by q keeps the width below one unit.
        let mantissa = lo / BigUint::from(q);
        Ok(Self::Enclosure { mantissa, bits })
    }

    /// The golden-ratio conjugate `(sqrt 5 - 1) / 2`.
    pub fn golden(bits: u32) -> Self {
        Self::quadratic(-1, 5, 2, bits).expect("5 is not a square")
    }

    /// `[0; a_1, a_2, ...]` evaluated exactly.
    pub fn from_quotients(quotients: &[BigUint]) -> Result<Self> {
        if quotients.iter().any(|a| a.is_zero()) {
            return Err(Error::Domain("partial quotients must be positive".into()));
        }
        let (mut num, mut den) = (BigUint::zero(), BigUint::one());
        for a in quotients.iter().rev() {
            // 1 / (a + num/den) = den / (a den + num)
            let next_den = a * &den + &num;
            num = den;
            den = next_den;
        }
        Ok(Self::Rational { num, den })
    }

    /// The enclosure endpoints as fractions `(num, den)`.
    fn endpoints(&self) -> ((BigUint, BigUint), (BigUint, BigUint)) {
        match self {
            Self::Rational { num, den } => ((num.clone(), den.clone()), (num.clone(), den.clone())),
            Self::Enclosure { mantissa, bits } => {
                let den = BigUint::one() << *bits;
                ((mantissa.clone(), den.clone()), (mantissa + 1u32, den))
            }
        }
    }

    /// Lower endpoint as a fixed-point phase (truncated to 128 bits).
    pub fn to_turn(&self) -> Turn {
        let (num, den) = self.endpoints().0;
        let scaled: BigUint = (num << 128u32) / den;
        let digits = scaled.to_u64_digits();
        let lo = digits.first().copied().unwrap_or(0) as u128;
        let hi = digits.get(1).copied().unwrap_or(0) as u128;
        Turn((hi << 64) | lo)
    }

    /// Hexadecimal digits of the lower endpoint after the point.
    pub fn to_hex(&self) -> String {
        match self {
            Self::Enclosure { mantissa, bits } => {
                let digits = (*bits as usize).div_ceil(4);
                let shifted = mantissa << (digits * 4 - *bits as usize);
                format!("0x0.{:0>width$}", shifted.to_str_radix(16), width = digits)
            }
            Self::Rational { num, den } => format!("{}/{}", num, den),
        }
    }

    pub fn to_f64(&self) -> f64 {
        let (num, den) = self.endpoints().0;
        ratio_f64(&num, &den)
    }
}

/// `num / den` as `f64` for arbitrarily large operands.
fn ratio_f64(num: &BigUint, den: &BigUint) -> f64 {
    if num.is_zero() {
        return 0.0;
    }
    (log2_big(num) - log2_big(den)).exp2()
}

/// `log2(n)` for `n > 0` using the top 64 bits.
fn log2_big(n: &BigUint) -> f64 {
    let bits = n.bits();
    if bits <= 64 {
        return (n.to_u64().expect("fits in u64") as f64).log2();
    }
    let top = (n >> (bits - 64)).to_u64().expect("64 bits") as f64;
    top.log2() + (bits - 64) as f64
}

/// Continued-fraction expansion with convergents and approximation exponents.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ContinuedFractionExpansion {
    pub x_hex: String,
    /// Partial quotients `a_1, a_2, ...` of `x = [0; a_1, a_2, ...]`.
    #[serde(with = "decimal_vec")]
    pub quotients: Vec<BigUint>,
    /// Convergents `a_n / q_n` for `n >= 1`.
    #[serde(with = "decimal_pairs")]
    pub convergents: Vec<(BigUint, BigUint)>,
    /// `r_n = -log|x - a_n/q_n| / log q_n`; `None` where undefined
    /// (`q_n = 1` or `x = a_n/q_n`).
    pub r_n: Vec<Option<f64>>,
    /// The expansion ended because `x` is rational.
    pub terminated: bool,
    /// Number of quotients certified by the enclosure.
    pub trusted: usize,
}

mod decimal_vec {
    use num_bigint::BigUint;
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &[BigUint], s: S) -> Result<S::Ok, S::Error> {
        s.collect_seq(v.iter().map(|x| x.to_string()))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<BigUint>, D::Error> {
        let raw = Vec::<String>::deserialize(d)?;
        raw.iter().map(|s| s.parse().map_err(serde::de::Error::custom)).collect()
    }
}

mod decimal_pairs {
    use num_bigint::BigUint;
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &[(BigUint, BigUint)], s: S) -> Result<S::Ok, S::Error> {
        s.collect_seq(v.iter().map(|(a, q)| [a.to_string(), q.to_string()]))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<(BigUint, BigUint)>, D::Error> {
        let raw = Vec::<[String; 2]>::deserialize(d)?;
        raw.iter()
            .map(|[a, q]| {
                Ok((
                    a.parse().map_err(serde::de::Error::custom)?,
                    q.parse().map_err(serde::de::Error::custom)?,
                ))
            })
            .collect()
    }
}

/// Partial quotients of `num/den` (after the integer part), at most `limit`.
fn euclid(mut num: BigUint, mut den: BigUint, limit: usize) -> Vec<BigUint> {
    let mut out = Vec::new();
    num %= &den;
    while !num.is_zero() && out.len() < limit {
        let (a, r) = den.div_rem(&num);
        out.push(a);
        den = num;
        num = r;
    }
    out
}

/// Convergents `(a_n, q_n)` of `[0; a_1, ...]`.
fn convergents_of(quotients: &[BigUint]) -> Vec<(BigUint, BigUint)> {
    let (mut a_prev, mut q_prev) = (BigUint::one(), BigUint::zero());
    let (mut a_cur, mut q_cur) = (BigUint::zero(), BigUint::one());
    let mut out = Vec::with_capacity(quotients.len());
    for c in quotients {
        let a_next = c * &a_cur + &a_prev;
        let q_next = c * &q_cur + &q_prev;
        a_prev = std::mem::replace(&mut a_cur, a_next);
        q_prev = std::mem::replace(&mut q_cur, q_next);
        out.push((a_cur.clone(), q_cur.clone()));
    }
    out
}

/// `|x - a/q|` as a fraction, with `x` given by `num/den`.
fn distance(num: &BigUint, den: &BigUint, a: &BigUint, q: &BigUint) -> (BigUint, BigUint) {
    let left = BigInt::from(num * q);
    let right = BigInt::from(a * den);
    ((left - right).magnitude().clone(), den * q)
}

/// Expands `x` up to `n_max` quotients.
///
/// Fails with a resource error naming the trustworthy length when the
/// enclosure cannot certify `n_max` quotients of an irrational `x`.
pub fn cf_convergents(x: &HighPrecisionReal, n_max: usize) -> Result<ContinuedFractionExpansion> {
    let (lo, hi) = x.endpoints();
    let lo_q = euclid(lo.0.clone(), lo.1.clone(), n_max + 1);
    let (quotients, terminated) = match x {
        HighPrecisionReal::Rational { .. } => {
            let done = lo_q.len() <= n_max;
            (lo_q.into_iter().take(n_max).collect::<Vec<_>>(), done)
        }
        HighPrecisionReal::Enclosure { .. } => {
            let hi_q = euclid(hi.0.clone(), hi.1.clone(), n_max + 1);
            let mut common: Vec<BigUint> = lo_q.iter().zip(&hi_q).take_while(|(a, b)| a == b).map(|(a, _)| a.clone()).collect();
            // The last shared quotient may still differ for x itself.
            common.pop();
            if common.len() < n_max {
                return Err(Error::Resource {
                    what: format!("precision certifies only {} partial quotients, {n_max} requested", common.len()),
                    achievable: common.len() as f64,
                });
            }
            common.truncate(n_max);
            (common, false)
        }
    };
    let convergents = convergents_of(&quotients);
    let r_n = convergents
        .iter()
        .map(|(a, q)| {
            let (dn, dd) = distance(&lo.0, &lo.1, a, q);
            if dn.is_zero() || q.is_one() {
                return None;
            }
            Some((log2_big(&dd) - log2_big(&dn)) / log2_big(q))
        })
        .collect();
    Ok(ContinuedFractionExpansion {
        x_hex: x.to_hex(),
        trusted: quotients.len(),
        quotients,
        convergents,
        r_n,
        terminated,
    })
}

/// Approximation exponents with a trailing-window estimate of `limsup r_n`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ApproxExponents {
    pub r_n: Vec<f64>,
    /// Maximum over the trailing window; `None` when no exponent is defined.
    pub limsup: Option<f64>,
    pub window: usize,
}

/// Defined exponents of `cf` and the maximum over the last `window` of them.
pub fn approx_exponents(cf: &ContinuedFractionExpansion, window: usize) -> ApproxExponents {
    let r_n: Vec<f64> = cf.r_n.iter().flatten().copied().collect();
    let limsup = r_n.iter().rev().take(window.max(1)).copied().reduce(f64::max);
    ApproxExponents { r_n, limsup, window }
}

/// A point built to have approximation exponent `r`.
#[derive(Clone, Debug, PartialEq)]
pub struct ConstructedPoint {
    pub x: HighPrecisionReal,
    pub expansion: ContinuedFractionExpansion,
    /// Indices `n` (1-based) with `q_n` odd that parity steering secured.
    pub odd_indices: Vec<usize>,
}

/// Builds `x = [0; a_1, a_2, ...]` with `a_{n+1}` close to `q_n^{r-2}`, so that
/// `|x - a_n/q_n|` is of order `q_n^{-r}`. Quotients are perturbed by `-1, 0, +1`
/// from a seeded generator. With `odd_subsequence`, every other `q_n` is made
/// odd by changing the preceding quotient by one when needed.
/// Quotients are added until `q_n` exceeds `2^min_bits`.
pub fn point_with_exponent(r: f64, seed: u64, odd_subsequence: bool, min_bits: u64) -> Result<ConstructedPoint> {
    if !(r > 2.0 && r.is_finite()) {
        return Err(Error::Domain(format!("exponent r = {r} must exceed 2")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut quotients: Vec<BigUint> = Vec::new();
    let (mut q_prev, mut q_cur) = (BigUint::zero(), BigUint::one());
    let mut odd_indices = Vec::new();
    while q_cur.bits() < min_bits || quotients.len() < 8 {
        let log2_target = (r - 2.0) * log2_big(&q_cur);
        let mut a = if log2_target < 52.0 {
            let base = log2_target.exp2().ceil().max(2.0) as u64;
            let jitter: i64 = rng.gen_range(-1..=1);
            BigUint::from((base as i64 + jitter).max(1) as u64)
        } else {
            // 2^floor(t) scaled by the fractional part, then jittered.
            let whole = log2_target.floor() as u64;
            let frac = ((log2_target - whole as f64).exp2() * (1u64 << 52) as f64) as u64;
            let mut big = (BigUint::from(frac) << whole) >> 52u32;
            match rng.gen_range(-1i64..=1) {
                1 => big += 1u32,
                -1 => big -= 1u32,
                _ => {}
            }
            big
        };
        let n = quotients.len() + 1;
        if odd_subsequence && n.is_multiple_of(2) {
            // q_n = a q_{n-1} + q_{n-2}; flip the parity of a if that helps.
            let q_next = &a * &q_cur + &q_prev;
            if q_next.is_even() && q_cur.is_odd() {
                a += 1u32;
            }
        }
        let q_next = &a * &q_cur + &q_prev;
        if q_next.is_odd() && n.is_multiple_of(2) {
            odd_indices.push(n);
        }
        quotients.push(a);
        q_prev = std::mem::replace(&mut q_cur, q_next);
    }
    let x = HighPrecisionReal::from_quotients(&quotients)?;
    let expansion = cf_convergents(&x, quotients.len())?;
    Ok(ConstructedPoint { x, expansion, odd_indices })
}

/// Membership in `A(t) = {1 <= a < q : <a q~ / q> < q~ / t}`, compared exactly.
pub fn in_at(a: u64, q: u64, q_tilde: u64, t: f64) -> Result<bool> {
    if q == 0 || !(t.is_finite() && t > 0.0) {
        return Err(Error::Domain("need q > 0 and t > 0".into()));
    }
    let r = ((a as u128 * q_tilde as u128) % q as u128) as u64;
    let dist = r.min(q - r);
    // dist / q < q~ / t  <=>  dist * t < q~ q, with t = m 2^e exactly.
    let bits = t.to_bits();
    let exp_bits = ((bits >> 52) & 0x7ff) as i64;
    let (m, e) = if exp_bits == 0 {
        (bits & ((1 << 52) - 1), -1074)
    } else {
        ((bits & ((1 << 52) - 1)) | (1 << 52), exp_bits - 1075)
    };
    let lhs = BigUint::from(dist) * BigUint::from(m);
    let rhs = BigUint::from(q_tilde) * BigUint::from(q);
    Ok(if e >= 0 {
        (lhs << e as u64) < rhs
    } else {
        lhs < (rhs << (-e) as u64)
    })
}

/// `|A(t)|` over `a` in `[1, q)`.
pub fn at_census(q: u64, q_tilde: u64, t: f64) -> Result<u64> {
    let mut count = 0;
    for a in 1..q {
        if in_at(a, q, q_tilde, t)? {
            count += 1;
        }
    }
    Ok(count)
}

/// Outcome of checking `q_n^{-r} <= |x - a_n/q_n| < |x - a_{n-1}/q_{n-1}| < q_n^{-r'}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum ContfracReport {
    /// The chain holds for every checked `n` from `n0`; `failures` lists
    /// indices where it does not.
    Checked {
        r: f64,
        r_conjugate: f64,
        n0: usize,
        checked: usize,
        failures: Vec<usize>,
    },
    /// Some convergent in the later half of the horizon has `r_n > r`, so `x`
    /// appears to lie in `E_r`.
    HypothesisFails { n: usize, r_n: f64 },
}

/// Conjugate exponent `r / (r - 1)`.
pub fn conjugate_exponent(r: f64) -> f64 {
    r / (r - 1.0)
}

/// Checks the conjugate-exponent chain over the computed convergents.
pub fn contfrac_check(cf: &ContinuedFractionExpansion, r: f64) -> Result<ContfracReport> {
    if !(r > 2.0) {
        return Err(Error::Domain(format!("r = {r} must exceed 2")));
    }
    let len = cf.r_n.len();
    let half = len / 2;
    for (i, rn) in cf.r_n.iter().enumerate().skip(half) {
        if let Some(v) = rn {
            if *v > r && i + 1 < len {
                return Ok(ContfracReport::HypothesisFails { n: i + 1, r_n: *v });
            }
        }
    }
    let last_violation = cf
        .r_n
        .iter()
        .enumerate()
        .filter(|(_, v)| v.is_some_and(|v| v > r))
        .map(|(i, _)| i + 1)
        .max();
    let n0 = last_violation.map_or(2, |n| n + 1).max(2);
    let rc = conjugate_exponent(r);
    let mut failures = Vec::new();
    let mut checked = 0;
    // The last convergent of a terminating expansion is x itself.
    let end = if cf.terminated { len.saturating_sub(1) } else { len };
    for n in n0..=end {
        let (Some(cur), Some(prev)) = (cf.r_n[n - 1], cf.r_n[n - 2]) else {
            continue;
        };
        let log_qn = log2_big(&cf.convergents[n - 1].1);
        let log_qp = log2_big(&cf.convergents[n - 2].1);
        // log2 |x - a_n/q_n| = -r_n log2 q_n.
        let d_cur = -cur * log_qn;
        let d_prev = -prev * log_qp;
        let holds = -r * log_qn <= d_cur && d_cur < d_prev && d_prev < -rc * log_qn;
        checked += 1;
        if !holds {
            failures.push(n);
        }
    }
    Ok(ContfracReport::Checked {
        r,
        r_conjugate: rc,
        n0,
        checked,
        failures,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small(v: &[(BigUint, BigUint)]) -> Vec<(u64, u64)> {
        v.iter().map(|(a, q)| (a.to_u64().unwrap(), q.to_u64().unwrap())).collect()
    }

    #[test]
    fn golden_ratio_convergents_are_fibonacci_ratios() {
        let cf = cf_convergents(&HighPrecisionReal::golden(256), 12).unwrap();
        assert!(cf.quotients.iter().all(|a| a.is_one()));
        assert_eq!(&small(&cf.convergents)[..5], &[(1, 1), (1, 2), (2, 3), (3, 5), (5, 8)]);
    }

    #[test]
    fn sqrt_two_minus_one() {
        let x = HighPrecisionReal::quadratic(-1, 2, 1, 256).unwrap();
        let cf = cf_convergents(&x, 6).unwrap();
        assert_eq!(&small(&cf.convergents)[..3], &[(1, 2), (2, 5), (5, 12)]);
    }

    #[test]
    fn rational_terminates() {
        let cf = cf_convergents(&HighPrecisionReal::rational(3, 7).unwrap(), 10).unwrap();
        assert!(cf.terminated);
        assert_eq!(small(&cf.convergents).last(), Some(&(3, 7)));
        assert_eq!(cf.r_n.last(), Some(&None));
    }

    #[test]
    fn precision_limit_is_reported() {
        let err = cf_convergents(&HighPrecisionReal::golden(64), 200).unwrap_err();
        assert_eq!(err.kind(), "resource");
    }

    #[test]
    fn constructed_point_round_trips() {
        let p = point_with_exponent(3.0, 7, true, 2000).unwrap();
        let est = approx_exponents(&p.expansion, 5).limsup.unwrap();
        assert!((est - 3.0).abs() < 0.05, "{est}");
        assert!(p.odd_indices.len() >= 3);
        assert!(point_with_exponent(2.0, 1, false, 100).is_err());
    }

    #[test]
    fn at_membership() {
        assert!(in_at(3, 100, 5, 25.0).unwrap());
        assert!(in_at(20, 100, 5, 1e9).unwrap());
        assert!(!in_at(3, 100, 5, 50.0).unwrap());
    }

    #[test]
    fn contfrac_examples() {
        assert!((conjugate_exponent(3.0) - 1.5).abs() < 1e-15);
        let cf = cf_convergents(&HighPrecisionReal::golden(512), 60).unwrap();
        match contfrac_check(&cf, 2.5).unwrap() {
            ContfracReport::Checked { failures, checked, .. } => assert!(failures.is_empty() && checked > 50),
            other => panic!("{other:?}"),
        }
        let p = point_with_exponent(3.0, 1, false, 2000).unwrap();
        assert!(matches!(
            contfrac_check(&p.expansion, 2.5).unwrap(),
            ContfracReport::HypothesisFails { .. }
        ));
    }
}
