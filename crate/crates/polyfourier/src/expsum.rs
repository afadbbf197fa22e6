//! Complete exponential sums `tau_m(a, q) = sum_{n=1}^q e((a P(n) + m n)/q)`,
//! their bound audits, the census of large `tau_0`, the power-sum lemmas and
//! the extraction of well-spaced subsets.
//!
//! Every phase is an exact residue modulo `q`; floating point only enters
//! through the table of `e(v/q)` and the (blocked, compensated) summation,
//! which runs in a fixed index order so results do not depend on threading.

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::numeric::{gcd, unit, CompensatedSum, ResidueTable, Turn};
use crate::output::{fmt17, CsvTable};
use crate::polynomials::{is_prime, nu_global, primes_in, roots_mult_mod_p, IntPolynomial};
use crate::{Error, Result};

/// A complete exponential sum together with its arguments.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExpSumValue {
    pub value: Complex64,
    pub a: u64,
    pub q: u64,
    pub m: i64,
    pub poly: String,
}

impl ExpSumValue {
    pub fn abs(&self) -> f64 {
        self.value.norm()
    }
}

const BLOCK: usize = 64;

/// Sum of `table[idx(n)]` for `n` in `0..len`, plain within blocks of 64 and
/// compensated across blocks.
#[inline]
fn blocked_sum(len: usize, mut term: impl FnMut(usize) -> Complex64) -> Complex64 {
    let mut acc = CompensatedSum::new();
    let mut n = 0;
    while n < len {
        let end = (n + BLOCK).min(len);
        let mut s = Complex64::new(0.0, 0.0);
        for i in n..end {
            s += term(i);
        }
        acc.add(s);
        n = end;
    }
    acc.value()
}

/// `P(n) mod q` for `n` in `0..q`.
pub fn residues(poly: &IntPolynomial, q: u64) -> Vec<u64> {
    (0..q).map(|n| poly.eval_mod(n as i128, q)).collect()
}

/// `tau_m(a, q)` by direct summation over exact residues.
pub fn complete_sum(poly: &IntPolynomial, a: u64, q: u64, m: i64) -> Result<ExpSumValue> {
    if q == 0 {
        return Err(Error::Domain("modulus q must be positive".into()));
    }
    let table = ResidueTable::new(q);
    let a_red = a % q;
    let m_red = m.rem_euclid(q as i64) as u64;
    let value = blocked_sum(q as usize, |i| {
        let n = i as u64 + 1;
        let r = (a_red as u128 * poly.eval_mod(n as i128, q) as u128 + m_red as u128 * n as u128) % q as u128;
        table.get(r as u64)
    });
    Ok(ExpSumValue {
        value,
        a,
        q,
        m,
        poly: poly.id(),
    })
}

/// `tau_m(a, q)` for every shift `m` in `0..q`, reusing residues.
pub fn all_shifts(poly: &IntPolynomial, a: u64, q: u64, table: &ResidueTable) -> Vec<Complex64> {
    let res = residues(poly, q);
    let a_red = a % q;
    let ar: Vec<u64> = res.iter().map(|&r| ((a_red as u128 * r as u128) % q as u128) as u64).collect();
    (0..q)
        .map(|m| {
            // n runs over 0..q (n = q contributes like n = 0).
            let mut t = 0u64;
            blocked_sum(q as usize, |i| {
                let mut s = ar[i] + t;
                if s >= q {
                    s -= q;
                }
                t += m;
                if t >= q {
                    t -= q;
                }
                table.get(s)
            })
        })
        .collect()
}

/// `tau_0(a, q)` for every `a` in `0..q`, through the value distribution
/// `N(v) = #{n mod q : P(n) = v}`: `tau_0(a) = sum_v N(v) e(a v / q)`.
pub fn tau0_all_a(poly: &IntPolynomial, q: u64, table: &ResidueTable) -> Vec<Complex64> {
    let mut counts = vec![0u64; q as usize];
    for r in residues(poly, q) {
        counts[r as usize] += 1;
    }
    let support: Vec<(u64, f64)> = counts
        .iter()
        .enumerate()
        .filter(|(_, &c)| c > 0)
        .map(|(v, &c)| (v as u64, c as f64))
        .collect();
    (0..q)
        .map(|a| {
            blocked_sum(support.len(), |i| {
                let (v, c) = support[i];
                table.get(((a as u128 * v as u128) % q as u128) as u64) * c
            })
        })
        .collect()
}

fn pow_mod(mut base: u64, mut exp: u64, p: u64) -> u64 {
    let mut acc = 1u128;
    let mut b = (base % p) as u128;
    while exp > 0 {
        if exp & 1 == 1 {
            acc = acc * b % p as u128;
        }
        b = b * b % p as u128;
        exp >>= 1;
    }
    base = acc as u64;
    base
}

/// `tau_0(a, p)` for a quadratic `P` and an odd prime `p` in closed form:
/// completing the square reduces it to the Gauss sum
/// `G(A) = (A/p) eps_p sqrt(p)` with `eps_p = 1` or `i` as `p = 1` or `3 (mod 4)`.
pub fn quadratic_tau0(poly: &IntPolynomial, a: u64, p: u64) -> Result<Complex64> {
    if poly.degree() != 2 {
        return Err(Error::Domain(format!("{poly} is not quadratic")));
    }
    if p == 2 || !is_prime(p) {
        return Err(Error::Domain(format!("{p} is not an odd prime")));
    }
    let red = |c: i64| c.rem_euclid(p as i64) as u64;
    let mul = |x: u64, y: u64| ((x as u128 * y as u128) % p as u128) as u64;
    let (c0, c1, c2) = (red(poly.coeff(0)), red(poly.coeff(1)), red(poly.coeff(2)));
    let a = a % p;
    let phase = |v: u64| unit(Turn::from_ratio(v, p));
    let lead = mul(a, c2);
    if lead == 0 {
        return Ok(if mul(a, c1) == 0 {
            phase(mul(a, c0)) * p as f64
        } else {
            Complex64::new(0.0, 0.0)
        });
    }
    // c2 n^2 + c1 n = c2 (n + c1 / (2 c2))^2 - c1^2 / (4 c2).
    let inv_4c2 = pow_mod(mul(4, c2), p - 2, p);
    let shift = mul(mul(c1, c1), inv_4c2);
    let constant = mul(a, (c0 + p - shift) % p);
    let legendre = if pow_mod(lead, (p - 1) / 2, p) == 1 { 1.0 } else { -1.0 };
    let eps = if p % 4 == 1 {
        Complex64::new(1.0, 0.0)
    } else {
        Complex64::new(0.0, 1.0)
    };
    Ok(phase(constant) * eps * (legendre * (p as f64).sqrt()))
}

/// The short sum `tau_* = sum_{b in B} e(a P(b) / q)` with `q = p^{nu_F + 1}`,
/// where `B` is the set of zeros of `P'` mod `p` of multiplicity `nu_F`.
pub fn tau_star(poly: &IntPolynomial, p: u64, a: u64) -> Result<Complex64> {
    let (nu_f, _) = nu_global(poly)?;
    if nu_f <= 1 {
        return Err(Error::Domain(format!("tau_* is undefined for {poly}: nu_F = 1")));
    }
    let ram = roots_mult_mod_p(poly, p)?;
    if ram.nu_fp != nu_f && !ram.b_set.is_empty() {
        return Err(Error::Precondition(format!("nu_F,{p} = {} differs from nu_F = {nu_f}", ram.nu_fp)));
    }
    let q = p.checked_pow(nu_f + 1).ok_or_else(|| Error::Domain("modulus overflow".into()))?;
    let table = ResidueTable::new(q);
    let terms = ram.b_set.iter().map(|&b| {
        let r = (a as u128 * poly.eval_mod(b as i128, q) as u128) % q as u128;
        table.get(r as u64)
    });
    Ok(crate::numeric::compensated_sum(terms))
}

/// Number of ordered factorisations of `n` into `r` positive factors.
pub fn divisor_function(r: u32, n: u64) -> u64 {
    if r == 0 {
        return u64::from(n == 1);
    }
    if r == 1 {
        return 1;
    }
    (1..=n)
        .filter(|&d| n.is_multiple_of(d))
        .map(|d| divisor_function(r - 1, n / d))
        .sum()
}

/// One row of a bound audit. `None` marks an audit outside its validity class.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundRow {
    pub q: u64,
    pub a: u64,
    pub m: u64,
    pub value: Complex64,
    /// `|tau_m| <= (k-1) sqrt(q)` for prime `q`, `q > k`, `q` not dividing `c0`,
    /// and `a P(n) + m n` non-constant mod `q`.
    pub weil: Option<bool>,
    /// `| |tau_m| - sqrt(q) | <= 1e-9 sqrt(q)` for `k = 2`, odd prime `q`, `q` not dividing `a c0`.
    pub gauss: Option<bool>,
    /// `|tau_m| / (d_{k-1}(q) sqrt(q) gcd(m, q)^{1/2})` for monomials `P = c0 n^k`, `gcd(a, q) = 1`.
    pub hua_ratio: Option<f64>,
}

/// Audit table with the fitted Hua constant (largest ratio observed).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundReport {
    pub poly: String,
    pub rows: Vec<BoundRow>,
    pub hua_constant: Option<f64>,
}

/// Slack added to the Weil comparison for rounding.
pub const WEIL_SLACK: f64 = 1e-6;
/// Relative tolerance of the Gauss law `|tau| = sqrt(q)`.
pub const GAUSS_REL_TOL: f64 = 1e-9;

impl BoundReport {
    pub fn weil_failures(&self) -> usize {
        self.rows.iter().filter(|r| r.weil == Some(false)).count()
    }

    pub fn gauss_failures(&self) -> usize {
        self.rows.iter().filter(|r| r.gauss == Some(false)).count()
    }

    pub fn to_csv(&self) -> CsvTable {
        let mut t = CsvTable::new(&["poly", "q", "a", "m", "re", "im", "abs", "weil", "gauss", "hua_ratio"]);
        let flag = |f: Option<bool>| match f {
            Some(true) => "pass".to_string(),
            Some(false) => "fail".to_string(),
            None => "na".to_string(),
        };
        for r in &self.rows {
            t.push(vec![
                self.poly.clone(),
                r.q.to_string(),
                r.a.to_string(),
                r.m.to_string(),
                fmt17(r.value.re),
                fmt17(r.value.im),
                fmt17(r.value.norm()),
                flag(r.weil),
                flag(r.gauss),
                r.hua_ratio.map(fmt17).unwrap_or_else(|| "na".into()),
            ]);
        }
        t
    }
}

/// Audits Weil, Gauss and Hua-shape bounds over every `(q, a, m)` in the
/// given ranges (`a` and `m` are reduced mod `q`, values `>= q` skipped).
pub fn bound_report(poly: &IntPolynomial, qs: &[u64], a_range: std::ops::Range<u64>, m_range: std::ops::Range<u64>) -> Result<BoundReport> {
    let k = poly.degree() as u64;
    if k < 1 {
        return Err(Error::Domain("constant polynomial".into()));
    }
    let c0 = poly.leading();
    let monomial = poly.coeffs().iter().take(k as usize).all(|&c| c == 0);
    let rows: Vec<Vec<BoundRow>> = qs
        .par_iter()
        .map(|&q| {
            let table = ResidueTable::new(q);
            let prime = is_prime(q);
            let c0_unit = c0.rem_euclid(q as i64) != 0;
            let dk = divisor_function((k - 1) as u32, q) as f64;
            let sq = (q as f64).sqrt();
            let a_hi = a_range.end.min(q);
            let m_hi = m_range.end.min(q);
            (a_range.start..a_hi)
                .into_par_iter()
                .flat_map_iter(|a| {
                    let taus = all_shifts(poly, a, q, &table);
                    let a_unit = a % q != 0;
                    (m_range.start..m_hi)
                        .map(|m| {
                            let value = taus[m as usize];
                            let abs = value.norm();
                            let weil = if !(prime && q > k && c0_unit) {
                                None
                            } else if a_unit {
                                Some(abs <= (k - 1) as f64 * sq + WEIL_SLACK)
                            } else if m % q != 0 {
                                // a = 0 leaves a nontrivial linear character.
                                Some(abs <= WEIL_SLACK)
                            } else {
                                None
                            };
                            let gauss =
                                (k == 2 && prime && q % 2 == 1 && c0_unit && a_unit).then(|| (abs - sq).abs() <= GAUSS_REL_TOL * sq);
                            let hua_ratio = (monomial && gcd(a, q) == 1).then(|| abs / (dk * sq * (gcd(m, q) as f64).sqrt()));
                            BoundRow {
                                q,
                                a,
                                m,
                                value,
                                weil,
                                gauss,
                                hua_ratio,
                            }
                        })
                        .collect::<Vec<_>>()
                })
                .collect()
        })
        .collect();
    let rows: Vec<BoundRow> = rows.into_iter().flatten().collect();
    let hua_constant = rows.iter().filter_map(|r| r.hua_ratio).reduce(f64::max);
    Ok(BoundReport {
        poly: poly.id(),
        rows,
        hua_constant,
    })
}

/// A fraction `a/q` with its complete sum `tau_0(a, q)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CensusFraction {
    pub a: u64,
    pub q: u64,
    pub tau0: Complex64,
}

/// Result of [`tau_census`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TauCensus {
    pub count: usize,
    pub fractions: Vec<CensusFraction>,
    /// Whether `Q |I|^{2+eps} > C` holds for the configured `(eps, C)`.
    pub above_threshold: bool,
    /// `count * log(Q) / (Q^2 |I|)`, the constant implied by the census.
    pub normalized: f64,
}

/// Census of `a/q` in `[lo, hi]` with `q` prime in `[Q, 2Q)`, `gcd(a, q) = 1`
/// and `|tau_0(a, q)| >= sqrt(q)/2`.
pub fn tau_census(poly: &IntPolynomial, lo: f64, hi: f64, big_q: u64, eps: f64, c_threshold: f64) -> Result<TauCensus> {
    let primes = primes_in(big_q, 2 * big_q);
    if primes.is_empty() {
        return Err(Error::Domain(format!("no primes in [{big_q}, {})", 2 * big_q)));
    }
    let width = (hi - lo).max(0.0);
    let per_q: Vec<Vec<CensusFraction>> = primes
        .par_iter()
        .map(|&q| {
            if width == 0.0 {
                return Vec::new();
            }
            let table = ResidueTable::new(q);
            let taus = tau0_all_a(poly, q, &table);
            let a_lo = (lo * q as f64).ceil().max(0.0) as u64;
            let a_hi = (hi * q as f64).floor().max(0.0) as u64;
            let half = 0.5 * (q as f64).sqrt();
            (a_lo..=a_hi)
                .filter(|&a| gcd(a, q) == 1 && taus[(a % q) as usize].norm() >= half)
                .map(|a| CensusFraction {
                    a,
                    q,
                    tau0: taus[(a % q) as usize],
                })
                .collect()
        })
        .collect();
    let fractions: Vec<CensusFraction> = per_q.into_iter().flatten().collect();
    let count = fractions.len();
    let qf = big_q as f64;
    let normalized = if width > 0.0 {
        count as f64 * qf.ln().max(1.0) / (qf * qf * width)
    } else {
        0.0
    };
    Ok(TauCensus {
        count,
        fractions,
        above_threshold: qf * width.powf(2.0 + eps) > c_threshold,
        normalized,
    })
}

/// Data for the Turán-type lemmas.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TuranInstance {
    pub lambdas: Vec<i64>,
    pub q: u64,
    pub interval: (f64, f64),
}

/// Outcome of [`turan_fraction`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TuranOutcome {
    pub scanned: u64,
    pub large: u64,
    /// `large / (q |I|)`.
    pub fraction: f64,
    pub threshold: f64,
    pub pass: bool,
}

/// Scans `a` with `a/q` in the closed interval `I` and counts those
/// with `|sum_n e(lambda_n a / q)| >= (|I|/100)^N`; passes when the count is
/// at least `q |I| / (100 N)^2`.
pub fn turan_fraction(inst: &TuranInstance) -> Result<TuranOutcome> {
    let n = inst.lambdas.len();
    let q = inst.q;
    let (lo, hi) = inst.interval;
    let width = hi - lo;
    if n == 0 || q == 0 {
        return Err(Error::Domain("empty lambda list or zero modulus".into()));
    }
    if !(0.0..=1.0).contains(&lo) || !(lo..=1.0).contains(&hi) {
        return Err(Error::Domain("interval must lie in [0, 1]".into()));
    }
    if width < (n * n) as f64 / q as f64 {
        return Err(Error::Precondition(format!(
            "|I| = {width} is below N^2/q = {}",
            (n * n) as f64 / q as f64
        )));
    }
    let table = ResidueTable::new(q);
    let lam: Vec<u64> = inst.lambdas.iter().map(|&l| l.rem_euclid(q as i64) as u64).collect();
    let threshold = (width / 100.0).powi(n as i32);
    let a_lo = (lo * q as f64).ceil() as u64;
    let a_end = ((hi * q as f64).floor() as u64 + 1).max(a_lo);
    let large = (a_lo..a_end)
        .filter(|&a| {
            let s: Complex64 = lam.iter().map(|&l| table.get(((l as u128 * a as u128) % q as u128) as u64)).sum();
            s.norm() >= threshold
        })
        .count() as u64;
    let fraction = large as f64 / (q as f64 * width);
    let bound = 1.0 / (100.0 * n as f64).powi(2);
    Ok(TuranOutcome {
        scanned: a_end - a_lo,
        large,
        fraction,
        threshold,
        pass: fraction >= bound,
    })
}

/// Outcome of [`power_sum_bounds`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PowerSumOutcome {
    /// `nu` in `[M+1, M+N]` maximising `|s_nu|`.
    pub witness: u64,
    pub witness_abs: f64,
    pub first_rhs: f64,
    pub first_pass: bool,
    pub energy: f64,
    pub second_rhs: f64,
    pub second_pass: bool,
}

/// Power sums `s_nu = sum_n b_n z_n^nu`: checks
/// `max_{M < nu <= M+N} |s_nu| >= |s_0| (N / (2e(M+N)))^{N-1}` and
/// `sum_{nu=1}^H |s_nu|^2 >= |s_0|^2 / (e^{8N^2/H} - 1)`.
pub fn power_sum_bounds(b: &[Complex64], z: &[Complex64], m: u64, h: u64) -> Result<PowerSumOutcome> {
    let n = z.len();
    if n == 0 || b.len() != n {
        return Err(Error::Domain("empty or mismatched power-sum data".into()));
    }
    if z.iter().any(|w| w.norm() < 1.0 - 1e-15) {
        return Err(Error::Precondition("every |z_n| must be at least 1".into()));
    }
    if (h as usize) < n {
        return Err(Error::Precondition(format!("H = {h} is below N = {n}")));
    }
    let top = (m + n as u64).max(h);
    let mut powers: Vec<Complex64> = b.to_vec();
    let mut s = vec![crate::numeric::compensated_sum(powers.iter().copied())];
    for _ in 1..=top {
        for (p, w) in powers.iter_mut().zip(z) {
            *p *= w;
        }
        s.push(crate::numeric::compensated_sum(powers.iter().copied()));
    }
    let s0 = s[0].norm();
    let nf = n as f64;
    let first_rhs = s0 * (nf / (2.0 * std::f64::consts::E * (m as f64 + nf))).powi(n as i32 - 1);
    let (witness, witness_abs) = ((m + 1)..=(m + n as u64))
        .map(|nu| (nu, s[nu as usize].norm()))
        .fold((m + 1, -1.0), |best, cur| if cur.1 > best.1 { cur } else { best });
    let energy: f64 = s[1..=h as usize].iter().map(|v| v.norm_sqr()).sum();
    let second_rhs = s0 * s0 / ((8.0 * nf * nf / h as f64).exp() - 1.0);
    let slack = 1e-12;
    Ok(PowerSumOutcome {
        witness,
        witness_abs,
        first_rhs,
        first_pass: witness_abs >= first_rhs * (1.0 - slack),
        energy,
        second_rhs,
        second_pass: energy >= second_rhs * (1.0 - slack),
    })
}

/// A reduced or unreduced fraction `num/den`.
pub type Fraction = (u64, u64);

/// Outcome of [`spaced_subset`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpacedSubsetReport {
    pub x0_len: usize,
    pub x1_len: usize,
    pub x2: Vec<Fraction>,
    pub interval: (f64, f64),
    pub alpha_in: f64,
    /// `|X2| / |X0|`.
    pub beta_out: f64,
    /// The guaranteed proportion `alpha^2 / 64000`.
    pub beta_guaranteed: f64,
    pub min_gap: f64,
    pub required_gap: f64,
    pub meets_guarantee: bool,
}

fn frac_value(f: Fraction) -> f64 {
    f.0 as f64 / f.1 as f64
}

/// Greedy left-to-right selection from `X1` with spacing at least `|I|/|X0|`.
pub fn spaced_subset(x0: &[Fraction], x1: &[Fraction], interval: (f64, f64), alpha: f64) -> Result<SpacedSubsetReport> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::Domain(format!("alpha = {alpha} must lie in (0, 1)")));
    }
    if x0.is_empty() {
        return Err(Error::Domain("empty X0".into()));
    }
    let reduced = |f: Fraction| {
        let g = gcd(f.0, f.1).max(1);
        (f.0 / g, f.1 / g)
    };
    let mut set0: Vec<Fraction> = x0.iter().map(|&f| reduced(f)).collect();
    set0.sort_unstable();
    if x1.iter().any(|&f| set0.binary_search(&reduced(f)).is_err()) {
        return Err(Error::Precondition("X1 is not a subset of X0".into()));
    }
    if (x1.len() as f64) <= alpha * x0.len() as f64 {
        return Err(Error::Precondition(format!(
            "|X1| = {} is not above alpha |X0| = {}",
            x1.len(),
            alpha * x0.len() as f64
        )));
    }
    let required_gap = (interval.1 - interval.0) / x0.len() as f64;
    let mut sorted: Vec<Fraction> = x1.to_vec();
    sorted.sort_by(|a, b| frac_value(*a).total_cmp(&frac_value(*b)));
    // Gaps compared by cross-multiplication: (b/d - a/c) |X0| >= |I|.
    let width = interval.1 - interval.0;
    let spaced = |lo: Fraction, hi: Fraction| {
        let num = hi.0 as i128 * lo.1 as i128 - lo.0 as i128 * hi.1 as i128;
        (num * x0.len() as i128) as f64 >= width * (lo.1 as f64 * hi.1 as f64)
    };
    let mut x2: Vec<Fraction> = Vec::new();
    for f in sorted {
        if x2.last().is_none_or(|&last| spaced(last, f)) {
            x2.push(f);
        }
    }
    let all_spaced = x2.windows(2).all(|w| spaced(w[0], w[1]));
    let min_gap = x2
        .windows(2)
        .map(|w| frac_value(w[1]) - frac_value(w[0]))
        .fold(f64::INFINITY, f64::min);
    let beta_out = x2.len() as f64 / x0.len() as f64;
    let beta_guaranteed = alpha * alpha / 64000.0;
    Ok(SpacedSubsetReport {
        x0_len: x0.len(),
        x1_len: x1.len(),
        meets_guarantee: beta_out > beta_guaranteed && all_spaced,
        x2,
        interval,
        alpha_in: alpha,
        beta_out,
        beta_guaranteed,
        min_gap,
        required_gap,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p(s: &str) -> IntPolynomial {
        s.parse().unwrap()
    }

    #[test]
    fn small_gauss_sums() {
        let t = complete_sum(&p("n^2"), 1, 5, 0).unwrap();
        assert!((t.value - Complex64::new(5f64.sqrt(), 0.0)).norm() < 1e-14);
        let t = complete_sum(&p("n^2"), 1, 3, 0).unwrap();
        assert!((t.value - Complex64::new(0.0, 3f64.sqrt())).norm() < 1e-14);
        let t = complete_sum(&p("n^2"), 1, 2, 0).unwrap();
        assert!(t.abs() < 1e-15);
        assert!((complete_sum(&p("n^3+n"), 4, 1, 3).unwrap().value - Complex64::new(1.0, 0.0)).norm() < 1e-15);
        assert!((complete_sum(&p("n^3"), 0, 9, 0).unwrap().value.re - 9.0).abs() < 1e-13);
        assert!(complete_sum(&p("n^2"), 1, 0, 0).is_err());
    }

    #[test]
    fn bulk_routines_match_single_sums() {
        let poly = p("n^3+n^2+1");
        let q = 23;
        let table = ResidueTable::new(q);
        let shifts = all_shifts(&poly, 5, q, &table);
        let zeros = tau0_all_a(&poly, q, &table);
        for m in 0..q {
            let single = complete_sum(&poly, 5, q, m as i64).unwrap().value;
            assert!((shifts[m as usize] - single).norm() < 1e-12);
        }
        for a in 0..q {
            let single = complete_sum(&poly, a, q, 0).unwrap().value;
            assert!((zeros[a as usize] - single).norm() < 1e-12);
        }
    }

    #[test]
    fn tau_star_examples() {
        for pr in [5, 7] {
            for a in 1..10 {
                assert!((tau_star(&p("n^3"), pr, a).unwrap() - Complex64::new(1.0, 0.0)).norm() < 1e-15);
            }
        }
        assert!(tau_star(&p("n^2"), 5, 1).is_err());
    }

    #[test]
    fn weil_example_q11() {
        let r = bound_report(&p("n^3+n"), &[11], 1..11, 0..11).unwrap();
        assert_eq!(r.weil_failures(), 0);
        let max = r.rows.iter().map(|row| row.value.norm()).fold(0.0, f64::max);
        assert!(max <= 2.0 * 11f64.sqrt() + 1e-9);
        let g = bound_report(&p("n^2"), &[13], 1..2, 0..1).unwrap();
        assert_eq!(g.rows[0].gauss, Some(true));
    }

    #[test]
    fn divisor_function_values() {
        assert_eq!(divisor_function(1, 12), 1);
        assert_eq!(divisor_function(2, 12), 6);
        assert_eq!(divisor_function(3, 4), 6);
    }

    #[test]
    fn census_examples() {
        // Primes in [10, 20) are 11, 13, 17, 19 and every reduced a counts.
        let c = tau_census(&p("n^2"), 0.0, 1.0, 10, 0.1, 1.0).unwrap();
        assert_eq!(c.count, 10 + 12 + 16 + 18);
        assert_eq!(tau_census(&p("n^3+n"), 0.3, 0.3, 100, 0.1, 1.0).unwrap().count, 0);
        assert!(tau_census(&p("n^2"), 0.0, 1.0, 1, 0.1, 1.0).is_err(), "no primes in [1, 2)");
    }

    #[test]
    fn turan_examples() {
        let one = turan_fraction(&TuranInstance {
            lambdas: vec![7],
            q: 101,
            interval: (0.0, 1.0),
        })
        .unwrap();
        // The closed interval [0, 1] holds both endpoints a = 0 and a = q.
        assert!(one.pass && one.large == 102 && (one.fraction - 102.0 / 101.0).abs() < 1e-15);
        let zero = turan_fraction(&TuranInstance {
            lambdas: vec![0, 0],
            q: 50,
            interval: (0.0, 1.0),
        })
        .unwrap();
        assert!(zero.pass && zero.large == 51);
        let three = turan_fraction(&TuranInstance {
            lambdas: vec![1, 5, 9],
            q: 997,
            interval: (0.0, 1.0),
        })
        .unwrap();
        assert!(three.pass);
        assert!(turan_fraction(&TuranInstance {
            lambdas: vec![1, 2, 3],
            q: 20,
            interval: (0.0, 0.2)
        })
        .is_err());
    }

    #[test]
    fn power_sum_examples() {
        let one = Complex64::new(1.0, 0.0);
        let r = power_sum_bounds(&[one], &[one], 0, 1).unwrap();
        assert!(r.first_pass && r.second_pass && (r.witness_abs - 1.0).abs() < 1e-15);
        let z = [crate::numeric::unit_f64(1.0 / 7.0), crate::numeric::unit_f64(2.0 / 7.0)];
        let r = power_sum_bounds(&[one, one], &z, 0, 4).unwrap();
        assert!(r.first_pass && r.second_pass);
        let r = power_sum_bounds(&[one, -one], &[one, one], 0, 4).unwrap();
        assert!(r.first_pass && r.second_pass && r.first_rhs == 0.0);
        assert!(power_sum_bounds(&[], &[], 0, 1).is_err());
    }

    #[test]
    fn spaced_subset_examples() {
        let x0: Vec<Fraction> = [11u64, 13]
            .iter()
            .flat_map(|&p| (0..p * p * p).map(move |a| (a, p * p * p)))
            .collect();
        let r = spaced_subset(&x0, &x0, (0.0, 1.0), 0.5).unwrap();
        assert!(r.meets_guarantee && r.beta_out > r.beta_guaranteed);
        let sep: Vec<Fraction> = (0..10).map(|a| (a, 10)).collect();
        let r = spaced_subset(&sep, &sep, (0.0, 1.0), 0.5).unwrap();
        assert_eq!(r.x2.len(), 10);
        assert!(spaced_subset(&sep, &sep[..4], (0.0, 1.0), 0.5).is_err());
    }

    #[test]
    fn quadratic_closed_form_matches_direct() {
        for poly in ["n^2", "3n^2+n+5", "2n^2-7n"] {
            let poly: IntPolynomial = poly.parse().unwrap();
            for p in [3u64, 5, 7, 11, 13, 101, 103] {
                for a in 0..p.min(20) {
                    let direct = complete_sum(&poly, a, p, 0).unwrap().value;
                    let closed = quadratic_tau0(&poly, a, p).unwrap();
                    assert!((direct - closed).norm() < 1e-9, "{poly} a={a} p={p}: {direct} vs {closed}");
                }
            }
        }
    }
}
