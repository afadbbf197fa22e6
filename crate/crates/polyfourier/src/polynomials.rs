//! Integer polynomials and their ramification invariants.
//!
//! A polynomial is stored constant-term first. The invariants computed here
//! (`nu_F`, `nu_0`, the zero sets of `P'` modulo a prime) drive the choice of
//! moduli and of the exponent formulas in the rest of the crate.

use std::fmt;
use std::str::FromStr;

use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::{One, Signed, Zero};
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// A polynomial with integer coefficients, constant term first.
///
/// The zero polynomial is represented by an empty coefficient list.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "Vec<i64>", into = "Vec<i64>")]
pub struct IntPolynomial {
    coeffs: Vec<i64>,
}

impl IntPolynomial {
    /// Builds a polynomial from coefficients indexed by power, trimming
    /// trailing zeros.
    pub fn new(mut coeffs: Vec<i64>) -> Self {
        while coeffs.last() == Some(&0) {
            coeffs.pop();
        }
        Self { coeffs }
    }

    /// The monomial `c * n^k`.
    pub fn monomial(c: i64, k: usize) -> Self {
        let mut coeffs = vec![0; k + 1];
        coeffs[k] = c;
        Self::new(coeffs)
    }

    /// Coefficients indexed by power.
    pub fn coeffs(&self) -> &[i64] {
        &self.coeffs
    }

    /// Coefficient of `n^j` (zero past the degree).
    pub fn coeff(&self, j: usize) -> i64 {
        self.coeffs.get(j).copied().unwrap_or(0)
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.is_empty()
    }

    /// Degree; the zero polynomial reports 0.
    pub fn degree(&self) -> usize {
        self.coeffs.len().saturating_sub(1)
    }

    /// Leading coefficient `c0`; zero for the zero polynomial.
    pub fn leading(&self) -> i64 {
        self.coeffs.last().copied().unwrap_or(0)
    }

    /// True when the leading coefficient is 1.
    pub fn is_monic(&self) -> bool {
        self.leading() == 1
    }

    /// Exact formal derivative.
    pub fn derivative(&self) -> Self {
        let coeffs = self
            .coeffs
            .iter()
            .enumerate()
            .skip(1)
            .map(|(j, &c)| c.checked_mul(j as i64).expect("derivative coefficient overflow"))
            .collect();
        Self::new(coeffs)
    }

    /// The shifted polynomial `P(n + c)`.
    pub fn shift(&self, c: i64) -> Self {
        let mut out = vec![0i128; self.coeffs.len()];
        for &a in self.coeffs.iter().rev() {
            // out = out * (n + c) + a
            let mut next = vec![0i128; out.len()];
            for j in 0..out.len() {
                if j + 1 < next.len() {
                    next[j + 1] += out[j];
                }
                next[j] += out[j] * c as i128;
            }
            next[0] += a as i128;
            out = next;
        }
        Self::new(
            out.into_iter()
                .map(|v| i64::try_from(v).expect("shifted coefficient overflow"))
                .collect(),
        )
    }

    /// Exact value as `i128`; panics on overflow.
    pub fn eval_i128(&self, n: i128) -> i128 {
        self.coeffs.iter().rev().fold(0i128, |acc, &c| {
            acc.checked_mul(n)
                .and_then(|v| v.checked_add(c as i128))
                .expect("polynomial value overflow")
        })
    }

    /// Value as `f64` by Horner's rule.
    pub fn eval_f64(&self, x: f64) -> f64 {
        self.coeffs.iter().rev().fold(0.0, |acc, &c| acc * x + c as f64)
    }

    /// `P(n) mod q` in `[0, q)`, exact for any `n`.
    pub fn eval_mod(&self, n: i128, q: u64) -> u64 {
        let q = q as i128;
        let n = n.rem_euclid(q);
        self.coeffs
            .iter()
            .rev()
            .fold(0i128, |acc, &c| (acc * n + (c as i128).rem_euclid(q)) % q) as u64
    }

    /// `P(n) mod 2^128`, exact for any `n`.
    pub fn eval_wrapping(&self, n: i128) -> u128 {
        self.coeffs
            .iter()
            .rev()
            .fold(0u128, |acc, &c| acc.wrapping_mul(n as u128).wrapping_add(c as i128 as u128))
    }

    /// The scaled polynomial `x -> h P(h^{-1/k} x)` as real coefficients.
    pub fn scaled_coeffs(&self, h: f64) -> Vec<f64> {
        let k = self.degree() as f64;
        self.coeffs
            .iter()
            .enumerate()
            .map(|(j, &c)| c as f64 * h.powf(1.0 - j as f64 / k))
            .collect()
    }

    /// Canonical ASCII form, highest power first, e.g. `2*n^3 - n + 1`.
    pub fn to_ascii(&self) -> String {
        if self.is_zero() {
            return "0".into();
        }
        let mut out = String::new();
        for (j, &c) in self.coeffs.iter().enumerate().rev() {
            if c == 0 {
                continue;
            }
            let mag = c.unsigned_abs();
            if out.is_empty() {
                if c < 0 {
                    out.push('-');
                }
            } else {
                out.push_str(if c < 0 { " - " } else { " + " });
            }
            let mono = match j {
                0 => String::new(),
                1 => "n".into(),
                _ => format!("n^{j}"),
            };
            if j == 0 {
                out.push_str(&mag.to_string());
            } else if mag == 1 {
                out.push_str(&mono);
            } else {
                out.push_str(&format!("{mag}*{mono}"));
            }
        }
        out
    }

    /// Compact identifier without spaces, used in CSV rows.
    pub fn id(&self) -> String {
        self.to_ascii().replace(' ', "")
    }

    fn to_big(&self) -> Vec<BigInt> {
        self.coeffs.iter().map(|&c| BigInt::from(c)).collect()
    }
}

impl fmt::Display for IntPolynomial {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_ascii())
    }
}

impl From<IntPolynomial> for Vec<i64> {
    fn from(p: IntPolynomial) -> Self {
        p.coeffs
    }
}

impl TryFrom<Vec<i64>> for IntPolynomial {
    type Error = Error;
    fn try_from(v: Vec<i64>) -> Result<Self> {
        Ok(Self::new(v))
    }
}

impl FromStr for IntPolynomial {
    type Err = Error;

    /// Parses sums of terms `c*n^j`, `c n^j`, `n^j`, `c*n`, `n`, `c`.
    /// The variable may be written `n`, `x` or `u`.
    fn from_str(s: &str) -> Result<Self> {
        let src: String = s.chars().filter(|c| !c.is_whitespace()).collect();
        if src.is_empty() {
            return Err(Error::Parse("empty polynomial".into()));
        }
        if src.starts_with('[') {
            let v: Vec<i64> = serde_json::from_str(&src).map_err(|e| Error::Parse(e.to_string()))?;
            return Ok(Self::new(v));
        }
        let mut coeffs: Vec<i64> = Vec::new();
        let bytes = src.as_bytes();
        let mut i = 0;
        while i < bytes.len() {
            let mut sign = 1i64;
            if bytes[i] == b'+' || bytes[i] == b'-' {
                if bytes[i] == b'-' {
                    sign = -1;
                }
                i += 1;
            } else if i > 0 {
                return Err(Error::Parse(format!("expected '+' or '-' at offset {i} in {s:?}")));
            }
            let start = i;
            while i < bytes.len() && bytes[i].is_ascii_digit() {
                i += 1;
            }
            let mut coef: Option<i64> = None;
            if i > start {
                coef = Some(
                    src[start..i]
                        .parse()
                        .map_err(|_| Error::Parse(format!("bad coefficient in {s:?}")))?,
                );
            }
            if i < bytes.len() && bytes[i] == b'*' {
                i += 1;
            }
            let mut power = 0usize;
            if i < bytes.len() && matches!(bytes[i], b'n' | b'x' | b'u') {
                i += 1;
                power = 1;
                if i < bytes.len() && bytes[i] == b'^' {
                    i += 1;
                    let ps = i;
                    while i < bytes.len() && bytes[i].is_ascii_digit() {
                        i += 1;
                    }
                    power = src[ps..i].parse().map_err(|_| Error::Parse(format!("bad exponent in {s:?}")))?;
                }
            } else if coef.is_none() {
                return Err(Error::Parse(format!("unexpected input at offset {i} in {s:?}")));
            }
            if coeffs.len() <= power {
                coeffs.resize(power + 1, 0);
            }
            coeffs[power] += sign * coef.unwrap_or(1);
        }
        Ok(Self::new(coeffs))
    }
}

/// Per-prime ramification data: `nu_Fp`, and the zeros of `P'` mod `p`
/// split into those of multiplicity `nu_F` (`b_set`) and the rest (`c_set`).
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PrimeRamification {
    pub p: u64,
    pub nu_fp: u32,
    pub b_set: Vec<u64>,
    pub c_set: Vec<u64>,
}

/// Global ramification invariants with an optional per-prime table.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RamificationProfile {
    pub nu_f: u32,
    pub nu_0: u32,
    pub primes: Vec<PrimeRamification>,
}

impl RamificationProfile {
    pub fn new(poly: &IntPolynomial, primes: &[u64]) -> Result<Self> {
        let (nu_f, nu_0) = nu_global(poly)?;
        let primes = primes.iter().map(|&p| roots_mult_mod_p(poly, p)).collect::<Result<_>>()?;
        Ok(Self { nu_f, nu_0, primes })
    }
}

fn big_trim(v: &mut Vec<BigInt>) {
    while v.last().is_some_and(|c| c.is_zero()) {
        v.pop();
    }
}

fn big_content(v: &[BigInt]) -> BigInt {
    v.iter().fold(BigInt::zero(), |g, c| g.gcd(c))
}

fn big_primitive(mut v: Vec<BigInt>) -> Vec<BigInt> {
    big_trim(&mut v);
    let g = big_content(&v);
    if !g.is_zero() && !g.is_one() {
        for c in v.iter_mut() {
            *c /= &g;
        }
    }
    if v.last().is_some_and(|c| c.is_negative()) {
        for c in v.iter_mut() {
            *c = -c.clone();
        }
    }
    v
}

/// Pseudo-remainder of `a` by `b` (both nonzero).
fn big_prem(a: &[BigInt], b: &[BigInt]) -> Vec<BigInt> {
    let mut r: Vec<BigInt> = a.to_vec();
    let db = b.len() - 1;
    let lb = b[db].clone();
    while r.len() > db {
        let dr = r.len() - 1;
        let lr = r[dr].clone();
        for c in r.iter_mut() {
            *c *= &lb;
        }
        for (j, bc) in b.iter().enumerate() {
            r[dr - db + j] -= &lr * bc;
        }
        big_trim(&mut r);
    }
    r
}

/// Primitive gcd over `Z[x]` (equivalently over `Q[x]` up to scaling).
fn big_gcd(a: &[BigInt], b: &[BigInt]) -> Vec<BigInt> {
    let mut x = big_primitive(a.to_vec());
    let mut y = big_primitive(b.to_vec());
    if x.len() < y.len() {
        std::mem::swap(&mut x, &mut y);
    }
    while !y.is_empty() {
        let r = big_primitive(big_prem(&x, &y));
        x = y;
        y = r;
    }
    x
}

fn big_derivative(v: &[BigInt]) -> Vec<BigInt> {
    let mut d: Vec<BigInt> = v.iter().enumerate().skip(1).map(|(j, c)| c * BigInt::from(j)).collect();
    big_trim(&mut d);
    d
}

/// Maximal multiplicity `nu_F` of a complex zero of `P'`, and
/// `nu_0 = max(nu_F, 2)`.
///
/// Computed exactly by iterating `f -> gcd(f, f')` from `f = P'`: the number
/// of steps until `f` becomes constant is the largest root multiplicity.
pub fn nu_global(poly: &IntPolynomial) -> Result<(u32, u32)> {
    if poly.degree() < 2 {
        return Err(Error::Domain(format!("degree of {poly} is below 2")));
    }
    let mut f = big_primitive(poly.derivative().to_big());
    let mut steps = 0u32;
    while f.len() > 1 {
        let df = big_derivative(&f);
        f = big_gcd(&f, &df);
        steps += 1;
    }
    Ok((steps, steps.max(2)))
}

fn check_prime_for(poly: &IntPolynomial, p: u64) -> Result<()> {
    if !is_prime(p) {
        return Err(Error::Domain(format!("{p} is not prime")));
    }
    if (poly.degree() as u64) >= p {
        return Err(Error::Domain(format!("prime {p} does not exceed the degree {}", poly.degree())));
    }
    if poly.leading().rem_euclid(p as i64) == 0 {
        return Err(Error::Domain(format!("prime {p} divides the leading coefficient")));
    }
    Ok(())
}

/// Coefficients reduced into `[0, p)`.
fn reduce_mod(poly: &IntPolynomial, p: u64) -> Vec<u64> {
    poly.coeffs().iter().map(|&c| c.rem_euclid(p as i64) as u64).collect()
}

/// Taylor coefficients of `f` at `b` modulo `p`: `f(b + t) = sum c_j t^j`.
fn taylor_mod(f: &[u64], b: u64, p: u64) -> Vec<u64> {
    let mut c = f.to_vec();
    let n = c.len();
    // Repeated synthetic division by (t - b).
    for i in 0..n {
        for j in (i..n - 1).rev() {
            c[j] = (c[j] as u128 + (c[j + 1] as u128) * b as u128).rem_euclid(p as u128) as u64;
        }
    }
    c
}

/// Multiplicity of `b` as a root of `f` mod `p`, by repeated division.
fn root_multiplicity_by_division(f: &[u64], b: u64, p: u64) -> u32 {
    let mut g = f.to_vec();
    while g.last() == Some(&0) {
        g.pop();
    }
    let mut mult = 0;
    loop {
        if g.is_empty() {
            return mult;
        }
        // Horner: quotient and remainder of g by (x - b).
        let mut q = vec![0u64; g.len().saturating_sub(1)];
        let mut acc = 0u64;
        for j in (0..g.len()).rev() {
            acc = ((acc as u128 * b as u128 + g[j] as u128) % p as u128) as u64;
            if j > 0 {
                q[j - 1] = acc;
            }
        }
        if acc != 0 || q.is_empty() {
            return mult;
        }
        mult += 1;
        g = q;
    }
}

/// Multiplicity of every zero of `P'` modulo `p`, as `(residue, multiplicity)`.
///
/// The multiplicity of `b` is the smallest `j` with `P^{(j+1)}(b)/j!` nonzero
/// mod `p`, read off the Taylor expansion of `P'` at `b`.
pub fn derivative_zeros_mod_p(poly: &IntPolynomial, p: u64) -> Result<Vec<(u64, u32)>> {
    check_prime_for(poly, p)?;
    let dp = reduce_mod(&poly.derivative(), p);
    let mut out = Vec::new();
    for b in 0..p {
        let t = taylor_mod(&dp, b, p);
        let mult = t.iter().position(|&c| c != 0).unwrap_or(t.len()) as u32;
        if mult > 0 {
            out.push((b, mult));
        }
    }
    Ok(out)
}

/// Same table as [`derivative_zeros_mod_p`] computed by repeated division by
/// `(x - b)`; an independent route used for cross-checks.
pub fn derivative_zeros_mod_p_by_division(poly: &IntPolynomial, p: u64) -> Result<Vec<(u64, u32)>> {
    check_prime_for(poly, p)?;
    let dp = reduce_mod(&poly.derivative(), p);
    Ok((0..p)
        .filter_map(|b| {
            let m = root_multiplicity_by_division(&dp, b, p);
            (m > 0).then_some((b, m))
        })
        .collect())
}

/// `nu_Fp` and the zero sets `B` (multiplicity `nu_F`) and `C` (the rest).
pub fn roots_mult_mod_p(poly: &IntPolynomial, p: u64) -> Result<PrimeRamification> {
    let (nu_f, _) = nu_global(poly)?;
    let zeros = derivative_zeros_mod_p(poly, p)?;
    let nu_fp = zeros.iter().map(|&(_, m)| m).max().unwrap_or(0);
    let (b, c): (Vec<_>, Vec<_>) = zeros.iter().partition(|&&(_, m)| m == nu_f);
    Ok(PrimeRamification {
        p,
        nu_fp,
        b_set: b.into_iter().map(|&(r, _)| r).collect(),
        c_set: c.into_iter().map(|&(r, _)| r).collect(),
    })
}

/// Whether `P'` splits into linear factors modulo `p`: the multiplicities of
/// its roots in `F_p` add up to its degree.
pub fn splits_mod_p(poly: &IntPolynomial, p: u64) -> Result<bool> {
    let zeros = derivative_zeros_mod_p(poly, p)?;
    let total: u32 = zeros.iter().map(|&(_, m)| m).sum();
    Ok(total as usize == poly.degree() - 1)
}

/// Exact number of roots of `q_poly` modulo `p^i`, by lifting every root
/// modulo `p^j` through all `p` candidate lifts.
pub fn hensel_count(q_poly: &IntPolynomial, p: u64, i: u32) -> Result<u64> {
    if !is_prime(p) {
        return Err(Error::Domain(format!("{p} is not prime")));
    }
    if i == 0 {
        return Err(Error::Domain("level must be positive".into()));
    }
    if q_poly.coeffs().iter().all(|&c| c.rem_euclid(p as i64) == 0) {
        return Err(Error::Domain(format!("{q_poly} vanishes identically mod {p}")));
    }
    let modulus = (p as u128)
        .checked_pow(i)
        .filter(|&m| m < (1u128 << 62))
        .ok_or_else(|| Error::Domain(format!("{p}^{i} is too large")))? as u64;
    let mut roots: Vec<u64> = (0..p).filter(|&b| q_poly.eval_mod(b as i128, p) == 0).collect();
    let mut pj = p;
    for _ in 1..i {
        let next = pj * p;
        let mut lifted = Vec::new();
        for &r in &roots {
            for t in 0..p {
                let cand = r + t * pj;
                if q_poly.eval_mod(cand as i128, next) == 0 {
                    lifted.push(cand);
                }
            }
        }
        roots = lifted;
        pj = next;
    }
    debug_assert_eq!(pj, modulus);
    Ok(roots.len() as u64)
}

/// Deterministic primality test for `u64` (Miller-Rabin with a fixed base set).
pub fn is_prime(n: u64) -> bool {
    if n < 2 {
        return false;
    }
    for p in [2u64, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37] {
        if n.is_multiple_of(p) {
            return n == p;
        }
    }
    let mut d = n - 1;
    let mut s = 0;
    while d.is_multiple_of(2) {
        d /= 2;
        s += 1;
    }
    let mulmod = |a: u64, b: u64| ((a as u128 * b as u128) % n as u128) as u64;
    let powmod = |mut a: u64, mut e: u64| {
        let mut r = 1u64;
        while e > 0 {
            if e & 1 == 1 {
                r = mulmod(r, a);
            }
            a = mulmod(a, a);
            e >>= 1;
        }
        r
    };
    'witness: for a in [2u64, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37] {
        let mut x = powmod(a, d);
        if x == 1 || x == n - 1 {
            continue;
        }
        for _ in 1..s {
            x = mulmod(x, x);
            if x == n - 1 {
                continue 'witness;
            }
        }
        return false;
    }
    true
}

/// Primes in `[lo, hi)`.
pub fn primes_in(lo: u64, hi: u64) -> Vec<u64> {
    (lo..hi).filter(|&n| is_prime(n)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p(s: &str) -> IntPolynomial {
        s.parse().unwrap()
    }

    #[test]
    fn parse_and_print_round_trip() {
        for s in ["n^2", "n^3 + n", "n^3 + n^2 + 1", "2*n^3 - n + 7", "-n^4 + 3"] {
            assert_eq!(p(s).to_ascii(), s);
        }
        assert_eq!(p("[1,0,1]"), p("n^2+1"));
        assert_eq!(p("3n^2+2n"), IntPolynomial::new(vec![0, 2, 3]));
        assert!("".parse::<IntPolynomial>().is_err());
        assert!("n^2 ++".parse::<IntPolynomial>().is_err());
    }

    #[test]
    fn derivative_power_rule() {
        assert_eq!(p("n^2").derivative(), p("2*n"));
        assert_eq!(p("n^3+n").derivative(), p("3*n^2+1"));
        assert!(p("5").derivative().is_zero());
    }

    #[test]
    fn nu_global_examples() {
        assert_eq!(nu_global(&p("n^2")).unwrap(), (1, 2));
        assert_eq!(nu_global(&p("n^3")).unwrap(), (2, 2));
        assert_eq!(nu_global(&p("n^4")).unwrap(), (3, 3));
        assert_eq!(nu_global(&p("n^3+n")).unwrap(), (1, 2));
        // P' = 4(n-1)^3 after integrating: P = (n-1)^4.
        assert_eq!(nu_global(&p("n^4 - 4*n^3 + 6*n^2 - 4*n + 1")).unwrap(), (3, 3));
        assert!(nu_global(&p("3*n+1")).is_err());
    }

    #[test]
    fn roots_mod_p_examples() {
        let r = roots_mult_mod_p(&p("n^3"), 5).unwrap();
        assert_eq!((r.nu_fp, r.b_set.clone(), r.c_set.clone()), (2, vec![0], vec![]));
        let r = roots_mult_mod_p(&p("n^2"), 7).unwrap();
        assert_eq!((r.nu_fp, r.b_set.clone()), (1, vec![0]));
        // 3n^2 + 1 = 0 mod 5 <=> n^2 = 3, a non-residue mod 5.
        let r = roots_mult_mod_p(&p("n^3+n"), 5).unwrap();
        assert!(r.b_set.is_empty() && r.c_set.is_empty());
        assert!(roots_mult_mod_p(&p("5*n^3"), 5).is_err());
        assert!(roots_mult_mod_p(&p("n^5"), 5).is_err());
    }

    #[test]
    fn splitting_examples() {
        assert!(splits_mod_p(&p("n^3"), 7).unwrap());
        assert!(!splits_mod_p(&p("n^3+n"), 5).unwrap());
        // 3n^2 + 1 = 0 mod 7 <=> n^2 = 2 = 3^2 mod 7.
        assert!(splits_mod_p(&p("n^3+n"), 7).unwrap());
        for q in [3, 5, 7, 11, 101] {
            assert!(splits_mod_p(&p("n^2"), q).unwrap());
        }
    }

    #[test]
    fn hensel_examples() {
        assert_eq!(hensel_count(&p("n^2-1"), 3, 2).unwrap(), 2);
        assert_eq!(hensel_count(&p("n^2"), 5, 2).unwrap(), 5);
        assert!(hensel_count(&p("5*n^2+10"), 5, 2).is_err());
    }

    #[test]
    fn eval_helpers_agree() {
        let poly = p("2*n^3 - 5*n + 11");
        for n in -50i128..50 {
            let v = poly.eval_i128(n);
            assert_eq!(poly.eval_mod(n, 97) as i128, v.rem_euclid(97));
            assert_eq!(poly.eval_wrapping(n), v as u128);
        }
        assert_eq!(p("n^2").shift(3), p("n^2 + 6*n + 9"));
    }

    #[test]
    fn primality() {
        let small: Vec<u64> = (0..60).filter(|&n| is_prime(n)).collect();
        assert_eq!(small, vec![2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37, 41, 43, 47, 53, 59]);
        assert!(is_prime(1_000_000_007));
        assert!(!is_prime(1_000_000_007 * 3));
    }
}
