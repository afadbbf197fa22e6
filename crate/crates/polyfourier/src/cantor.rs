//! Nested-interval generations around rationals, their pruning bookkeeping,
//! Hausdorff-dimension bounds from brother counts, gaps and lengths, and a
//! box-counting estimator.
//!
//! Generation `i` consists of intervals
//! `I_{a/q} = [a/q + 1/(4 q^r), a/q + 1/(2 q^r)]` with `Q_i <= q < 2 Q_i`,
//! each nested in an interval of generation `i - 1`; generation 0 is `[0, 1]`.
//! Endpoints are exact fractions.

use std::cmp::Ordering;
use std::collections::BTreeSet;
use std::fmt;

use num_bigint::{BigInt, BigUint};
use num_rational::BigRational;
use num_traits::{One, ToPrimitive, Zero};
use rayon::prelude::*;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::expsum::{complete_sum, quadratic_tau0, spaced_subset, tau_star, Fraction};
use crate::numeric::fit_line;
use crate::output::{fmt17, CsvTable};
use crate::polynomials::{is_prime, roots_mult_mod_p, splits_mod_p};
use crate::series::SeriesParams;
use crate::{Error, Result};

/// A non-negative fraction `num / den` with `den > 0`, not necessarily reduced.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Frac {
    pub num: u128,
    pub den: u128,
}

impl Frac {
    pub fn new(num: u128, den: u128) -> Self {
        assert!(den > 0, "zero denominator");
        Self { num, den }
    }

    pub fn to_big(self) -> BigRational {
        BigRational::new_raw(BigInt::from(self.num), BigInt::from(self.den))
    }

    pub fn to_f64(self) -> f64 {
        self.to_big().to_f64().unwrap_or(f64::NAN)
    }
}

impl Ord for Frac {
    fn cmp(&self, other: &Self) -> Ordering {
        match (self.num.checked_mul(other.den), other.num.checked_mul(self.den)) {
            (Some(x), Some(y)) => x.cmp(&y),
            _ => (BigUint::from(self.num) * other.den).cmp(&(BigUint::from(other.num) * self.den)),
        }
    }
}

impl PartialOrd for Frac {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl fmt::Display for Frac {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}", self.num, self.den)
    }
}

impl Serialize for Frac {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_string())
    }
}

impl<'de> Deserialize<'de> for Frac {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let raw = String::deserialize(d)?;
        let (n, q) = raw.split_once('/').ok_or_else(|| serde::de::Error::custom("expected num/den"))?;
        let num = n.parse().map_err(serde::de::Error::custom)?;
        let den: u128 = q.parse().map_err(serde::de::Error::custom)?;
        if den == 0 {
            return Err(serde::de::Error::custom("zero denominator"));
        }
        Ok(Frac { num, den })
    }
}

/// `b - a` as a float, computed exactly first.
fn difference(a: Frac, b: Frac) -> f64 {
    (b.to_big() - a.to_big()).to_f64().unwrap_or(f64::NAN)
}

fn overflow(what: &str) -> Error {
    Error::Resource {
        what: format!("{what} exceeds 128-bit endpoint arithmetic"),
        achievable: f64::NAN,
    }
}

/// `I_{a/q}` for integer exponent `r`.
pub fn interval_of(a: u64, q: u64, r: u32) -> Result<(Frac, Frac)> {
    let qr1 = (q as u128).checked_pow(r - 1).ok_or_else(|| overflow("q^r"))?;
    let qr = qr1.checked_mul(q as u128).ok_or_else(|| overflow("q^r"))?;
    let den4 = qr.checked_mul(4).ok_or_else(|| overflow("4 q^r"))?;
    let lo = (a as u128).checked_mul(4 * qr1).ok_or_else(|| overflow("endpoint"))? + 1;
    let hi = (a as u128).checked_mul(2 * qr1).ok_or_else(|| overflow("endpoint"))? + 1;
    Ok((Frac::new(lo, den4), Frac::new(hi, 2 * qr)))
}

/// Consecutive terms `l <= x < r` of the Farey sequence of order `d`, by a
/// batched Stern-Brocot descent.
fn farey_bracket(x: Frac, d: u64) -> Result<((u64, u64), (u64, u64))> {
    if x >= Frac::new(1, 1) {
        return Ok(((1, 1), (2, 1)));
    }
    let (n, m) = (BigInt::from(x.num), BigInt::from(x.den));
    let (mut l, mut r) = ((0u64, 1u64), (1u64, 1u64));
    loop {
        let med = (l.0 + r.0, l.1 + r.1);
        if med.1 > d {
            return Ok((l, r));
        }
        // x < med  <=>  n med.1 < med.0 m
        if &n * BigInt::from(med.1) < BigInt::from(med.0) * &m {
            // r <- r + t l, largest t with the value still above x.
            let num = BigInt::from(r.0) * &m - &n * BigInt::from(r.1);
            let den = &n * BigInt::from(l.1) - BigInt::from(l.0) * &m;
            let by_den = (d - r.1) / l.1;
            let t = if den.is_zero() {
                by_den
            } else {
                ((num - BigInt::one()) / den).to_u64().unwrap_or(u64::MAX).min(by_den)
            };
            r = (r.0 + t * l.0, r.1 + t * l.1);
        } else {
            // l <- l + t r, largest t with the value at most x.
            let num = &n * BigInt::from(l.1) - BigInt::from(l.0) * &m;
            let den = BigInt::from(r.0) * &m - &n * BigInt::from(r.1);
            let by_den = (d - l.1) / r.1;
            let t = (num / den).to_u64().unwrap_or(u64::MAX).min(by_den);
            l = (l.0 + t * r.0, l.1 + t * r.1);
        }
    }
}

/// The Farey term following `cur` given its predecessor `prev`, or preceding
/// `cur` given its successor.
fn farey_step(prev: (u64, u64), cur: (u64, u64), d: u64) -> (u64, u64) {
    let k = (d + prev.1) / cur.1;
    (k * cur.0 - prev.0, k * cur.1 - prev.1)
}

fn frac_of(f: (u64, u64)) -> Frac {
    Frac::new(f.0 as u128, f.1 as u128)
}

/// How generations are formed.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum TreeMode {
    /// Prime moduli, large `|tau_0|`.
    Unramified,
    /// Moduli `p^{nu_F + 1}` with `P'` split mod `p`, large `|tau_*|`, spaced
    /// at least `|I| / |X0|` apart within each parent `I`.
    Ramified,
    /// A fixture built from explicit intervals.
    Fixture,
}

/// Which candidates of a parent are retained.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Keep {
    All,
    /// The leftmost and rightmost admissible children only, which maximises
    /// the product of brother count and gap for two brothers.
    Extremes,
}

/// The desk-scale schedule `Q_{i+1} = ceil(Q_i^g)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Schedule {
    pub qs: Vec<u64>,
    pub truncated: bool,
    pub warning: Option<String>,
    /// The factorial-tower schedule it replaces.
    pub reference: String,
}

pub fn schedule(q1: u64, growth: f64, depth: usize, cap: u64, r: u32) -> Result<Schedule> {
    if q1 < 3 || !(growth > 1.0) || depth < 1 {
        return Err(Error::Domain(format!(
            "need Q1 >= 3, g > 1, depth >= 1; got {q1}, {growth}, {depth}"
        )));
    }
    let mut qs = vec![q1];
    let mut warning = None;
    while qs.len() < depth {
        let next = (*qs.last().expect("nonempty") as f64).powf(growth).ceil();
        if next > cap as f64 {
            warning = Some(format!(
                "Q_{} = {next:.3e} exceeds the cap {cap}; schedule truncated at {} terms",
                qs.len() + 1,
                qs.len()
            ));
            break;
        }
        qs.push(next as u64);
    }
    Ok(Schedule {
        truncated: warning.is_some(),
        warning,
        qs,
        reference: format!("Q_i = K^((R i)!), R = ceil(5 r) = {}", 5 * r),
    })
}

/// One interval of a generation.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IntervalRecord {
    pub a: u64,
    pub q: u64,
    pub lo: Frac,
    pub hi: Frac,
    /// `|tau_0|` (unramified) or `|tau_*|` (ramified); zero for fixtures.
    pub tau_abs: f64,
    pub parent: Option<usize>,
    pub pruned: bool,
}

/// Brother counts, gaps and lengths of a generation.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct GenerationStats {
    pub count: usize,
    pub live: usize,
    /// Minimum number of live brothers over live parents.
    pub m: u64,
    pub big_m: u64,
    /// Minimum brother count before any pruning.
    pub m_raw: u64,
    /// Minimum gap between live brothers.
    pub delta: f64,
    /// Maximum live length.
    pub length: f64,
    /// Intervals pruned directly from this generation (`d_i`).
    pub pruned: usize,
    /// Intervals dropped by [`restrict_sparse`].
    pub restricted: usize,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct FilterCounts {
    pub farey_terms: u64,
    pub modulus: u64,
    pub nested: u64,
    pub sum_size: u64,
    pub spaced: u64,
    pub kept: u64,
}

impl FilterCounts {
    fn add(&mut self, o: &FilterCounts) {
        self.farey_terms += o.farey_terms;
        self.modulus += o.modulus;
        self.nested += o.nested;
        self.sum_size += o.sum_size;
        self.spaced += o.spaced;
        self.kept += o.kept;
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Generation {
    /// `Q_i`; zero for the root.
    pub big_q: u64,
    pub intervals: Vec<IntervalRecord>,
    pub stats: GenerationStats,
    pub filters: FilterCounts,
}

/// The sequence of generations, with generation 0 the unit interval.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GenerationTree {
    pub mode: TreeMode,
    pub r: u32,
    pub schedule: Vec<u64>,
    pub generations: Vec<Generation>,
}

impl GenerationTree {
    pub fn new(mode: TreeMode, r: u32, schedule: Vec<u64>) -> Result<Self> {
        if mode != TreeMode::Fixture && r < 2 {
            return Err(Error::Domain(format!("exponent r = {r} must be at least 2")));
        }
        let root = IntervalRecord {
            a: 0,
            q: 1,
            lo: Frac::new(0, 1),
            hi: Frac::new(1, 1),
            tau_abs: 0.0,
            parent: None,
            pruned: false,
        };
        let root_gen = Generation {
            big_q: 0,
            intervals: vec![root],
            stats: GenerationStats {
                count: 1,
                live: 1,
                m: 1,
                big_m: 1,
                m_raw: 1,
                delta: f64::INFINITY,
                length: 1.0,
                pruned: 0,
                restricted: 0,
            },
            filters: FilterCounts::default(),
        };
        Ok(Self {
            mode,
            r,
            schedule,
            generations: vec![root_gen],
        })
    }

    /// Generations below the root.
    pub fn depth(&self) -> usize {
        self.generations.len() - 1
    }

    /// Live intervals of the deepest generation.
    pub fn deepest_live(&self) -> Vec<(Frac, Frac)> {
        self.generations.last().map_or_else(Vec::new, |g| {
            g.intervals.iter().filter(|i| !i.pruned).map(|i| (i.lo, i.hi)).collect()
        })
    }

    /// Per-generation statistics as CSV.
    pub fn stats_csv(&self) -> CsvTable {
        let mut t = CsvTable::new(&[
            "generation",
            "Q",
            "count",
            "live",
            "m",
            "M",
            "m_raw",
            "delta",
            "L",
            "pruned",
            "restricted",
        ]);
        for (i, g) in self.generations.iter().enumerate().skip(1) {
            let s = &g.stats;
            t.push(vec![
                i.to_string(),
                g.big_q.to_string(),
                s.count.to_string(),
                s.live.to_string(),
                s.m.to_string(),
                s.big_m.to_string(),
                s.m_raw.to_string(),
                fmt17(s.delta),
                fmt17(s.length),
                s.pruned.to_string(),
                s.restricted.to_string(),
            ]);
        }
        t
    }

    /// Recomputes the statistics of generation `i >= 1`.
    pub fn refresh_stats(&mut self, i: usize) {
        let (parents, rest) = self.generations.split_at_mut(i);
        let parent_gen = &parents[i - 1];
        let gen = &mut rest[0];
        let mut live_counts = vec![0u64; parent_gen.intervals.len()];
        let mut raw_counts = vec![0u64; parent_gen.intervals.len()];
        let mut last_hi: Vec<Option<Frac>> = vec![None; parent_gen.intervals.len()];
        let mut delta = f64::INFINITY;
        let mut length = 0.0f64;
        for iv in &gen.intervals {
            let p = iv.parent.expect("non-root interval has a parent");
            raw_counts[p] += 1;
            if iv.pruned || parent_gen.intervals[p].pruned {
                continue;
            }
            live_counts[p] += 1;
            if let Some(prev) = last_hi[p] {
                delta = delta.min(difference(prev, iv.lo));
            }
            last_hi[p] = Some(iv.hi);
            length = length.max(difference(iv.lo, iv.hi));
        }
        let live_parents: Vec<usize> = (0..parent_gen.intervals.len())
            .filter(|&p| !parent_gen.intervals[p].pruned)
            .collect();
        let stats = &mut gen.stats;
        stats.count = gen.intervals.len();
        stats.live = live_counts.iter().sum::<u64>() as usize;
        stats.m = live_parents.iter().map(|&p| live_counts[p]).min().unwrap_or(0);
        stats.big_m = live_parents.iter().map(|&p| live_counts[p]).max().unwrap_or(0);
        stats.m_raw = (0..raw_counts.len()).map(|p| raw_counts[p]).min().unwrap_or(0);
        stats.delta = delta;
        stats.length = length;
    }
}

/// Controls for [`build_generation`].
#[derive(Clone, Debug, PartialEq)]
pub struct BuildConfig {
    pub keep: Keep,
    /// Unramified filter `|tau_0| >= tau_ratio sqrt(q)`.
    pub tau_ratio: f64,
    /// Ramified mode: the surviving proportion required before spacing.
    pub spacing_alpha: f64,
}

impl Default for BuildConfig {
    fn default() -> Self {
        Self {
            keep: Keep::All,
            tau_ratio: 0.5,
            spacing_alpha: 0.5,
        }
    }
}

/// Generation-level context shared by the parent workers.
struct Stage<'a> {
    params: &'a SeriesParams,
    mode: TreeMode,
    r: u32,
    index: usize,
    big_q: u64,
    prev_q: u64,
    cfg: &'a BuildConfig,
}

impl Stage<'_> {
    fn d(&self) -> u64 {
        2 * self.big_q - 1
    }

    /// Prime of the admissible modulus `q`, if any.
    fn modulus_prime(&self, q: u64) -> Option<u64> {
        if q < self.big_q || q >= 2 * self.big_q {
            return None;
        }
        match self.mode {
            TreeMode::Unramified => is_prime(q).then_some(q),
            TreeMode::Ramified => {
                let e = self.params.nu_f + 1;
                let guess = (q as f64).powf(1.0 / e as f64).round() as u64;
                (guess.saturating_sub(1)..=guess + 1).find(|&p| p > 1 && p.checked_pow(e) == Some(q) && is_prime(p))
            }
            TreeMode::Fixture => None,
        }
    }

    /// The size test on the complete or short sum; returns `|tau|` on success.
    fn sum_size(&self, a: u64, q: u64, p: u64) -> Result<Option<f64>> {
        match self.mode {
            TreeMode::Unramified => {
                let tau = if self.params.k == 2 && q > 2 {
                    quadratic_tau0(&self.params.poly, a, q)?
                } else {
                    complete_sum(&self.params.poly, a, q, 0)?.value
                };
                let size = tau.norm();
                Ok((size >= self.cfg.tau_ratio * (q as f64).sqrt()).then_some(size))
            }
            TreeMode::Ramified => {
                if !splits_mod_p(&self.params.poly, p)? {
                    return Ok(None);
                }
                let size = tau_star(&self.params.poly, p, a)?.norm();
                let floor = if self.index > 2 {
                    let b = roots_mult_mod_p(&self.params.poly, p)?.b_set.len() as i32;
                    (400.0 * (self.prev_q as f64).powi(self.r as i32)).powi(-b)
                } else {
                    0.0
                };
                Ok((size > floor).then_some(size))
            }
            TreeMode::Fixture => Ok(None),
        }
    }

    /// Full admissibility of the Farey term `f` as a child of `[u, v]`.
    fn admit(
        &self,
        f: (u64, u64),
        u: Frac,
        v: Frac,
        counts: &mut FilterCounts,
        nested: &mut Vec<Fraction>,
    ) -> Result<Option<IntervalRecord>> {
        counts.farey_terms += 1;
        let (a, q) = f;
        let Some(p) = self.modulus_prime(q) else {
            return Ok(None);
        };
        if a == 0 {
            return Ok(None);
        }
        counts.modulus += 1;
        let (lo, hi) = interval_of(a, q, self.r)?;
        if lo < u || hi > v {
            return Ok(None);
        }
        counts.nested += 1;
        nested.push(f);
        let Some(size) = self.sum_size(a, q, p)? else {
            return Ok(None);
        };
        counts.sum_size += 1;
        Ok(Some(IntervalRecord {
            a,
            q,
            lo,
            hi,
            tau_abs: size,
            parent: None,
            pruned: false,
        }))
    }

    /// Whether Farey terms from `f` leftwards may still nest above `u`:
    /// `f + 1/(4 Q^r) >= u`.
    fn may_reach(&self, f: (u64, u64), u: Frac) -> bool {
        let slack = BigRational::new(BigInt::one(), BigInt::from(4u32) * BigInt::from(self.big_q).pow(self.r));
        frac_of(f).to_big() + slack >= u.to_big()
    }

    fn children(&self, u: Frac, v: Frac) -> Result<(Vec<IntervalRecord>, FilterCounts)> {
        let d = self.d();
        let mut counts = FilterCounts::default();
        // Step back over terms just below u whose interval may still nest.
        let mut start = farey_bracket(u, d)?;
        loop {
            let (s, succ) = start;
            if s.0 == 0 || !self.may_reach(s, u) {
                break;
            }
            let before = farey_step(succ, s, d);
            start = (before, s);
        }
        // `start.1` is the first term that can nest.
        let (mut prev, mut cur) = start;
        let mut out = Vec::new();
        let mut nested = Vec::new();
        match self.cfg.keep {
            Keep::All => {
                while frac_of(cur) < v {
                    if let Some(rec) = self.admit(cur, u, v, &mut counts, &mut nested)? {
                        out.push(rec);
                    }
                    let next = farey_step(prev, cur, d);
                    prev = cur;
                    cur = next;
                }
            }
            Keep::Extremes => {
                let mut left = None;
                while frac_of(cur) < v {
                    if let Some(rec) = self.admit(cur, u, v, &mut counts, &mut nested)? {
                        left = Some((cur, rec));
                        break;
                    }
                    let next = farey_step(prev, cur, d);
                    prev = cur;
                    cur = next;
                }
                if let Some((left_f, left_rec)) = left {
                    let (mut c, mut succ) = farey_bracket(v, d)?;
                    let mut right = None;
                    while frac_of(c) > frac_of(left_f) {
                        if frac_of(c) < v {
                            if let Some(rec) = self.admit(c, u, v, &mut counts, &mut nested)? {
                                right = Some(rec);
                                break;
                            }
                        }
                        let before = farey_step(succ, c, d);
                        succ = c;
                        c = before;
                    }
                    out.push(left_rec);
                    out.extend(right);
                }
            }
        }
        if self.mode == TreeMode::Ramified && self.cfg.keep == Keep::All && !out.is_empty() {
            let survivors: Vec<Fraction> = out.iter().map(|c| (c.a, c.q)).collect();
            let parent = (u.to_f64(), v.to_f64());
            out = match spaced_subset(&nested, &survivors, parent, self.cfg.spacing_alpha) {
                Ok(report) => {
                    let kept: BTreeSet<Fraction> = report.x2.into_iter().collect();
                    out.into_iter().filter(|c| kept.contains(&(c.a, c.q))).collect()
                }
                // Too few survivors to space: the parent gets no children.
                Err(Error::Precondition(_)) => Vec::new(),
                Err(e) => return Err(e),
            };
        }
        counts.spaced = out.len() as u64;
        counts.kept = out.len() as u64;
        Ok((out, counts))
    }
}

/// Builds the next generation below every live interval of the deepest one.
/// Fails, naming the filter, when no candidate survives.
pub fn build_generation(tree: &mut GenerationTree, params: &SeriesParams, cfg: &BuildConfig) -> Result<()> {
    if tree.mode == TreeMode::Fixture {
        return Err(Error::Domain("fixture trees are not built from candidates".into()));
    }
    let index = tree.generations.len();
    let big_q = *tree
        .schedule
        .get(index - 1)
        .ok_or_else(|| Error::Domain(format!("schedule has no Q_{index}")))?;
    let parent_gen = tree.generations.last().expect("root exists");
    let parents: Vec<usize> = (0..parent_gen.intervals.len())
        .filter(|&p| !parent_gen.intervals[p].pruned)
        .collect();
    if parents.is_empty() {
        return Err(Error::Domain(format!("generation {} has no live interval", index - 1)));
    }
    let stage = Stage {
        params,
        mode: tree.mode,
        r: tree.r,
        index,
        big_q,
        prev_q: if index >= 2 { tree.schedule[index - 2] } else { 1 },
        cfg,
    };
    let results = parents
        .par_iter()
        .map(|&p| {
            let iv = &parent_gen.intervals[p];
            stage.children(iv.lo, iv.hi).map(|(kids, counts)| (p, kids, counts))
        })
        .collect::<Result<Vec<_>>>()?;
    let mut intervals = Vec::new();
    let mut filters = FilterCounts::default();
    for (p, kids, counts) in results {
        filters.add(&counts);
        intervals.extend(kids.into_iter().map(|mut k| {
            k.parent = Some(p);
            k
        }));
    }
    if intervals.is_empty() {
        let stages = [
            ("modulus range and form", filters.modulus),
            ("nesting in the parent", filters.nested),
            ("exponential-sum size", filters.sum_size),
            ("spacing", filters.spaced),
        ];
        let failing = if filters.farey_terms == 0 {
            "nesting in the parent"
        } else {
            stages.iter().find(|(_, n)| *n == 0).map_or("unknown", |(name, _)| name)
        };
        return Err(Error::Precondition(format!(
            "generation {index} (Q = {big_q}) is empty: the {failing} filter removed all {} Farey terms",
            filters.farey_terms
        )));
    }
    tree.generations.push(Generation {
        big_q,
        intervals,
        stats: GenerationStats::default(),
        filters,
    });
    tree.refresh_stats(index);
    Ok(())
}

/// Outcome of a pruning step.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PruneReport {
    pub generation: usize,
    pub removed: usize,
    /// Live intervals left in the generation.
    pub live: usize,
    pub viability: Viability,
}

/// The survival inequality `|G_1| > 2 d_1 + 2 sum_{i >= 2} d_i prod_{j=2}^i m_j^{-1}`
/// where every interval of generation `j` has at least `2 m_j` brothers.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Viability {
    pub g1: usize,
    pub rhs: f64,
    pub pass: bool,
}

pub fn viability(tree: &GenerationTree) -> Viability {
    let g1 = tree.generations.get(1).map_or(0, |g| g.intervals.len());
    let mut rhs = 0.0;
    let mut product = 1.0;
    for (i, g) in tree.generations.iter().enumerate().skip(1) {
        if i >= 2 {
            product /= (g.stats.m_raw / 2).max(1) as f64;
            if g.stats.m_raw < 2 {
                product = f64::INFINITY;
            }
        }
        let d = g.stats.pruned as f64;
        if d > 0.0 {
            rhs += 2.0 * d * product;
        }
    }
    Viability {
        g1,
        rhs,
        pass: (g1 as f64) > rhs,
    }
}

/// Removes the listed fractions `(a, q)` from generation `i` (and the subtrees
/// below them), records `d_i` and re-evaluates viability.
pub fn prune_generation(tree: &mut GenerationTree, i: usize, remove: &BTreeSet<(u64, u64)>) -> Result<PruneReport> {
    if i == 0 || i >= tree.generations.len() {
        return Err(Error::Domain(format!("generation {i} is not built")));
    }
    let mut removed = 0;
    for iv in tree.generations[i].intervals.iter_mut() {
        if !iv.pruned && remove.contains(&(iv.a, iv.q)) {
            iv.pruned = true;
            removed += 1;
        }
    }
    tree.generations[i].stats.pruned += removed;
    finish_removal(tree, i, removed)
}

/// Restricts to a subfamily: drops the intervals of generation `i` with fewer
/// than `min_children` live children in generation `i + 1`, or whose children
/// come closer than `min_gap`. A subfamily spans a subset, so its dimension
/// bounds stay valid for the full set; the removals are counted apart from
/// `d_i`.
pub fn restrict_sparse(tree: &mut GenerationTree, i: usize, min_children: u64, min_gap: f64) -> Result<PruneReport> {
    if i == 0 || i + 1 >= tree.generations.len() {
        return Err(Error::Domain(format!("generation {i} has no built children")));
    }
    let n = tree.generations[i].intervals.len();
    let mut counts = vec![0u64; n];
    let mut gaps = vec![f64::INFINITY; n];
    let mut last_hi: Vec<Option<Frac>> = vec![None; n];
    for c in tree.generations[i + 1].intervals.iter().filter(|c| !c.pruned) {
        let p = c.parent.expect("child has a parent");
        counts[p] += 1;
        if let Some(prev) = last_hi[p] {
            gaps[p] = gaps[p].min(difference(prev, c.lo));
        }
        last_hi[p] = Some(c.hi);
    }
    let mut removed = 0;
    for (p, iv) in tree.generations[i].intervals.iter_mut().enumerate() {
        if !iv.pruned && (counts[p] < min_children || gaps[p] < min_gap) {
            iv.pruned = true;
            removed += 1;
        }
    }
    tree.generations[i].stats.restricted += removed;
    finish_removal(tree, i, removed)
}

fn finish_removal(tree: &mut GenerationTree, i: usize, removed: usize) -> Result<PruneReport> {
    // Orphans below pruned parents leave the tree as well.
    for j in i + 1..tree.generations.len() {
        let (upper, lower) = tree.generations.split_at_mut(j);
        let parents = &upper[j - 1].intervals;
        for iv in lower[0].intervals.iter_mut() {
            if parents[iv.parent.expect("child has a parent")].pruned {
                iv.pruned = true;
            }
        }
    }
    for j in i..tree.generations.len() {
        tree.refresh_stats(j);
    }
    Ok(PruneReport {
        generation: i,
        removed,
        live: tree.generations[i].stats.live,
        viability: viability(tree),
    })
}

/// Both dimension formulas at every depth and their summaries.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DimBounds {
    /// `(n, lower_n)` for `n >= 2` while every `m_i > 1`.
    pub lower_by_depth: Vec<(usize, f64)>,
    /// `(n, upper_n)` for `n >= 1`.
    pub upper_by_depth: Vec<(usize, f64)>,
    /// The lower formula at the deepest depth.
    pub lower: Option<f64>,
    /// Largest upper value over the built depths.
    pub upper: f64,
    /// Limit of the lower sequence from a fit in powers of `1/n`.
    pub lower_extrapolated: Option<f64>,
    pub upper_extrapolated: Option<f64>,
    pub flags: Vec<String>,
}

/// Least-squares fit of `y = c_0 + c_1/n + ... + c_deg/n^deg`; returns `c_0`.
fn inverse_power_limit(points: &[(usize, f64)], deg: usize) -> Option<f64> {
    let width = deg + 1;
    if points.len() < width + 1 {
        return None;
    }
    let mut ata = vec![vec![0.0; width]; width];
    let mut aty = vec![0.0; width];
    for &(n, y) in points {
        let row: Vec<f64> = (0..width).map(|j| (n as f64).powi(-(j as i32))).collect();
        for a in 0..width {
            aty[a] += row[a] * y;
            for b in 0..width {
                ata[a][b] += row[a] * row[b];
            }
        }
    }
    // Gaussian elimination with partial pivoting.
    for col in 0..width {
        let pivot = (col..width).max_by(|&i, &j| ata[i][col].abs().total_cmp(&ata[j][col].abs()))?;
        ata.swap(col, pivot);
        aty.swap(col, pivot);
        if ata[col][col].abs() < 1e-300 {
            return None;
        }
        for row in col + 1..width {
            let f = ata[row][col] / ata[col][col];
            let pivot_row = ata[col].clone();
            for (cell, p) in ata[row].iter_mut().zip(&pivot_row).skip(col) {
                *cell -= f * p;
            }
            aty[row] -= f * aty[col];
        }
    }
    let mut x = vec![0.0; width];
    for row in (0..width).rev() {
        let s: f64 = (row + 1..width).map(|c| ata[row][c] * x[c]).sum();
        x[row] = (aty[row] - s) / ata[row][row];
    }
    Some(x[0])
}

fn extrapolate(points: &[(usize, f64)]) -> Option<f64> {
    // Skip the shallowest depths, which the expansion in 1/n fits worst.
    let tail: Vec<(usize, f64)> = points.iter().copied().filter(|&(n, _)| n >= 4).collect();
    inverse_power_limit(&tail, 3).or_else(|| inverse_power_limit(&tail, 2))
}

/// `lower_n = sum_{i<n} log m_i / (-log(m_n delta_n))` and
/// `upper_n = sum_{i<=n} log M_i / (-log L_n)` over the built depths.
pub fn dim_bounds(tree: &GenerationTree) -> Result<DimBounds> {
    if tree.depth() < 2 {
        return Err(Error::Domain(format!(
            "dimension bounds need at least 2 generations, have {}",
            tree.depth()
        )));
    }
    let stats: Vec<&GenerationStats> = tree.generations.iter().skip(1).map(|g| &g.stats).collect();
    let mut flags = Vec::new();
    let mut lower_by_depth = Vec::new();
    let mut upper_by_depth = Vec::new();
    let mut log_m = 0.0;
    let mut log_big_m = 0.0;
    let mut lower_defined = true;
    for (idx, s) in stats.iter().enumerate() {
        let n = idx + 1;
        log_big_m += (s.big_m.max(1) as f64).ln();
        upper_by_depth.push((n, log_big_m / -s.length.ln()));
        if s.m <= 1 {
            if lower_defined {
                flags.push(format!("m_{n} = {} <= 1: lower formula undefined from depth {n}", s.m));
            }
            lower_defined = false;
        }
        if n >= 2 && lower_defined {
            lower_by_depth.push((n, log_m / -((s.m as f64) * s.delta).ln()));
        }
        log_m += (s.m.max(1) as f64).ln();
    }
    let lower = lower_by_depth.last().map(|&(_, v)| v);
    let upper = upper_by_depth.iter().map(|&(_, v)| v).fold(f64::NEG_INFINITY, f64::max);
    if lower.is_some_and(|l| l > upper) {
        flags.push("finite-depth lower value exceeds the upper value".into());
    }
    Ok(DimBounds {
        lower_extrapolated: extrapolate(&lower_by_depth),
        upper_extrapolated: extrapolate(&upper_by_depth),
        lower_by_depth,
        upper_by_depth,
        lower,
        upper,
        flags,
    })
}

/// The middle-thirds construction to `depth` generations.
pub fn middle_thirds(depth: usize) -> Result<GenerationTree> {
    if depth == 0 || depth > 60 {
        return Err(Error::Domain(format!("depth {depth} outside [1, 60]")));
    }
    let mut tree = GenerationTree::new(TreeMode::Fixture, 0, Vec::new())?;
    let mut lefts: Vec<u128> = vec![0];
    for n in 1..=depth {
        let den = 3u128.pow(n as u32);
        let mut intervals = Vec::with_capacity(lefts.len() * 2);
        let mut next = Vec::with_capacity(lefts.len() * 2);
        for (p, &l) in lefts.iter().enumerate() {
            for offset in [0u128, 2] {
                let left = 3 * l + offset;
                next.push(left);
                intervals.push(IntervalRecord {
                    a: left as u64,
                    q: den as u64,
                    lo: Frac::new(left, den),
                    hi: Frac::new(left + 1, den),
                    tau_abs: 0.0,
                    parent: Some(p),
                    pruned: false,
                });
            }
        }
        lefts = next;
        tree.schedule.push(den as u64);
        tree.generations.push(Generation {
            big_q: den as u64,
            intervals,
            stats: GenerationStats::default(),
            filters: FilterCounts::default(),
        });
        tree.refresh_stats(n);
    }
    Ok(tree)
}

/// Box-counting estimate from minimal covers.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoxDim {
    pub slope: f64,
    pub stderr: f64,
    /// `(eps, N(eps))`.
    pub counts: Vec<(f64, u64)>,
    /// A single box covers the set at every scale.
    pub degenerate: bool,
}

/// The geometric grid `eps = 1 / round(2^{m / per_octave})` for `m` in
/// `[m_lo, m_hi]`, duplicates removed.
pub fn dyadic_eps_grid(m_lo: u32, m_hi: u32, per_octave: u32) -> Vec<u64> {
    let mut ds: Vec<u64> = (m_lo..=m_hi)
        .map(|m| (m as f64 / per_octave as f64).exp2().round() as u64)
        .collect();
    ds.dedup();
    ds
}

/// Least number of closed intervals of length `1/d` covering the union of
/// the sorted, disjoint `intervals` (greedy from the left, which is optimal
/// on the line).
fn min_cover(intervals: &[(Frac, Frac)], d: u64) -> u64 {
    let eps = BigRational::new(BigInt::one(), BigInt::from(d));
    let mut count = 0u64;
    let mut end: Option<BigRational> = None;
    for &(lo, hi) in intervals {
        let (lo, hi) = (lo.to_big(), hi.to_big());
        if end.as_ref().is_some_and(|e| &hi <= e) {
            continue;
        }
        let start = match &end {
            Some(e) if &lo <= e => e.clone(),
            _ => lo,
        };
        let boxes = ((&hi - &start) / &eps).ceil().to_integer().to_u64().unwrap_or(u64::MAX).max(1);
        count += boxes;
        end = Some(start + eps.clone() * BigInt::from(boxes));
    }
    count
}

/// Slope of `log N(eps)` against `log(1/eps)` with `eps = 1/d` for `d` in
/// `denominators`. Points are zero-length intervals.
pub fn box_dim(intervals: &[(Frac, Frac)], denominators: &[u64]) -> Result<BoxDim> {
    if denominators.len() < 4 {
        return Err(Error::Domain(format!("need at least 4 scales, got {}", denominators.len())));
    }
    if intervals.is_empty() {
        return Err(Error::Domain("empty set".into()));
    }
    let mut sorted = intervals.to_vec();
    sorted.sort();
    let counts: Vec<(f64, u64)> = denominators.par_iter().map(|&d| (1.0 / d as f64, min_cover(&sorted, d))).collect();
    let xs: Vec<f64> = counts.iter().map(|&(e, _)| -e.ln()).collect();
    let ys: Vec<f64> = counts.iter().map(|&(_, n)| (n as f64).ln()).collect();
    let fit = fit_line(&xs, &ys)?;
    Ok(BoxDim {
        slope: fit.slope,
        stderr: fit.slope_stderr,
        degenerate: counts.iter().all(|&(_, n)| n == 1),
        counts,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn schedule_examples() {
        let s = schedule(50, 1.5, 3, u64::MAX, 3).unwrap();
        assert_eq!(s.qs, vec![50, 354, 6661]);
        assert_eq!(schedule(50, 1.5, 1, u64::MAX, 3).unwrap().qs, vec![50]);
        let t = schedule(50, 3.0, 3, 1000, 3).unwrap();
        assert!(t.truncated && t.qs == vec![50]);
        assert!(schedule(2, 1.5, 3, 100, 3).is_err());
    }

    #[test]
    fn farey_bracket_and_steps() {
        let (l, r) = farey_bracket(Frac::new(1, 3), 5).unwrap();
        assert_eq!((l, r), ((1, 3), (2, 5)));
        let (l, r) = farey_bracket(Frac::new(3, 10), 5).unwrap();
        assert_eq!((l, r), ((1, 4), (1, 3)));
        assert_eq!(farey_step((1, 4), (1, 3), 5), (2, 5));
        assert_eq!(farey_step((2, 5), (1, 3), 5), (1, 4));
    }

    #[test]
    fn interval_endpoints_are_exact() {
        let (lo, hi) = interval_of(1, 7, 3).unwrap();
        assert_eq!(lo, Frac::new(4 * 49 + 1, 4 * 343));
        assert_eq!(hi, Frac::new(2 * 49 + 1, 2 * 343));
    }

    fn first_generation(q1: u64, keep: Keep) -> GenerationTree {
        let params = SeriesParams::parse("n^2", 2.0).unwrap();
        let mut tree = GenerationTree::new(TreeMode::Unramified, 3, vec![q1, 40 * q1 * q1]).unwrap();
        build_generation(
            &mut tree,
            &params,
            &BuildConfig {
                keep,
                ..BuildConfig::default()
            },
        )
        .unwrap();
        tree
    }

    #[test]
    fn gauss_law_keeps_every_candidate() {
        let tree = first_generation(50, Keep::All);
        let expected: u64 = (50..100).filter(|&q| is_prime(q)).map(|q| q - 1).sum();
        let g = &tree.generations[1];
        assert_eq!(g.intervals.len() as u64, expected);
        assert_eq!(g.filters.nested, g.filters.sum_size);
    }

    #[test]
    fn extremes_match_full_enumeration() {
        let params = SeriesParams::parse("n^2", 2.0).unwrap();
        let mut all = first_generation(5, Keep::All);
        let mut ext = first_generation(5, Keep::All);
        build_generation(&mut all, &params, &BuildConfig::default()).unwrap();
        build_generation(
            &mut ext,
            &params,
            &BuildConfig {
                keep: Keep::Extremes,
                ..BuildConfig::default()
            },
        )
        .unwrap();
        for (p, _) in all.generations[1].intervals.iter().enumerate() {
            let kids: Vec<&IntervalRecord> = all.generations[2].intervals.iter().filter(|c| c.parent == Some(p)).collect();
            let ends: Vec<&IntervalRecord> = ext.generations[2].intervals.iter().filter(|c| c.parent == Some(p)).collect();
            match kids.len() {
                0 => assert!(ends.is_empty()),
                1 => assert_eq!(ends.len(), 1),
                _ => {
                    assert_eq!(ends.len(), 2);
                    assert_eq!((ends[0].a, ends[0].q), (kids[0].a, kids[0].q));
                    assert_eq!((ends[1].a, ends[1].q), (kids.last().unwrap().a, kids.last().unwrap().q));
                }
            }
        }
    }

    #[test]
    fn nesting_and_disjointness() {
        let params = SeriesParams::parse("n^2", 2.0).unwrap();
        let mut tree = first_generation(5, Keep::All);
        build_generation(&mut tree, &params, &BuildConfig::default()).unwrap();
        for g in 1..tree.generations.len() {
            let ivs = &tree.generations[g].intervals;
            for w in ivs.windows(2) {
                if w[0].parent == w[1].parent {
                    assert!(w[0].hi < w[1].lo);
                }
            }
            for iv in ivs {
                let parent = &tree.generations[g - 1].intervals[iv.parent.unwrap()];
                assert!(parent.lo <= iv.lo && iv.hi <= parent.hi);
            }
        }
    }

    #[test]
    fn ramified_generation_is_spaced() {
        let params = SeriesParams::parse("n^3", 2.6).unwrap();
        let mut tree = GenerationTree::new(TreeMode::Ramified, 2, vec![100]).unwrap();
        build_generation(&mut tree, &params, &BuildConfig::default()).unwrap();
        let g = &tree.generations[1];
        assert!(g.intervals.iter().all(|iv| iv.q == 125));
        let gap = 1.0 / g.filters.nested as f64;
        for w in g.intervals.windows(2) {
            assert!(w[1].a as f64 / 125.0 - w[0].a as f64 / 125.0 >= gap - 1e-15);
        }
        assert!(g.filters.kept <= g.filters.sum_size);
    }

    #[test]
    fn empty_generation_names_the_filter() {
        let params = SeriesParams::parse("n^2", 2.0).unwrap();
        let mut tree = GenerationTree::new(TreeMode::Unramified, 3, vec![50, 354]).unwrap();
        build_generation(&mut tree, &params, &BuildConfig::default()).unwrap();
        let err = build_generation(&mut tree, &params, &BuildConfig::default()).unwrap_err();
        assert!(err.to_string().contains("nesting"), "{err}");
    }

    #[test]
    fn pruning_and_viability() {
        let mut tree = middle_thirds(4).unwrap();
        let none = prune_generation(&mut tree, 2, &BTreeSet::new()).unwrap();
        assert_eq!(none.removed, 0);
        assert!(none.viability.pass);
        let first = (tree.generations[3].intervals[0].a, tree.generations[3].intervals[0].q);
        let report = prune_generation(&mut tree, 3, &BTreeSet::from([first])).unwrap();
        assert_eq!(report.removed, 1);
        assert_eq!(tree.generations[3].stats.m, 1);
        let all: BTreeSet<(u64, u64)> = tree.generations[1].intervals.iter().map(|i| (i.a, i.q)).collect();
        let report = prune_generation(&mut tree, 1, &all).unwrap();
        assert!(!report.viability.pass);
        assert_eq!(report.live, 0);
    }

    #[test]
    fn restriction_is_not_pruning() {
        let mut tree = middle_thirds(3).unwrap();
        assert_eq!(restrict_sparse(&mut tree, 1, 2, 0.0).unwrap().removed, 0);
        // Brothers in generation 2 are 1/9 apart.
        let report = restrict_sparse(&mut tree, 1, 2, 0.2).unwrap();
        assert_eq!(report.removed, 2);
        assert_eq!(tree.generations[1].stats.pruned, 0);
        assert_eq!(tree.generations[1].stats.restricted, 2);
        assert_eq!(tree.generations[3].stats.live, 0);
        assert!(report.viability.pass);
    }

    #[test]
    fn middle_thirds_bounds() {
        let tree = middle_thirds(12).unwrap();
        let b = dim_bounds(&tree).unwrap();
        let target = 2f64.ln() / 3f64.ln();
        assert!((b.upper - target).abs() < 1e-12);
        assert!((b.lower.unwrap() - 11.0 * 2f64.ln() / (12.0 * 3f64.ln() - 2f64.ln())).abs() < 1e-12);
        assert!((b.lower_extrapolated.unwrap() - target).abs() < 1e-3);
        assert!(dim_bounds(&middle_thirds(1).unwrap()).is_err());
    }

    #[test]
    fn box_dim_examples() {
        let grid = dyadic_eps_grid(8, 48, 4);
        let cantor = box_dim(&middle_thirds(8).unwrap().deepest_live(), &grid).unwrap();
        assert!((cantor.slope - 2f64.ln() / 3f64.ln()).abs() < 0.02, "{}", cantor.slope);
        let unit = box_dim(&[(Frac::new(0, 1), Frac::new(1, 1))], &grid).unwrap();
        assert!((unit.slope - 1.0).abs() < 0.01);
        let points = [(Frac::new(1, 5), Frac::new(1, 5)), (Frac::new(3, 5), Frac::new(3, 5))];
        let two = box_dim(&points, &dyadic_eps_grid(8, 24, 4)).unwrap();
        assert!(two.slope.abs() < 0.05);
        let one = box_dim(&[(Frac::new(1, 2), Frac::new(1, 2))], &grid).unwrap();
        assert!(one.degenerate);
    }
}
