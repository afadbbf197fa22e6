//! Poisson-summation evaluation of `Delta F(a/q, h)`.
//!
//! The sum over `n` is split by two smooth windows into a short head
//! `n < n1`, a Poisson range carrying the weight
//! `Phi(n / n1) (1 - Phi(n / (2 N0)))`, and a far range carrying
//! `Phi(n / (2 N0))`, with `N0 = x0 h^{-1/k}`. On the Poisson range,
//! `sum_n e(a P(n)/q) f(n) = q^{-1} sum_m tau_m(a, q) fhat(m / q)`, and
//! `fhat(m/q) = h^{(alpha-1)/k} ghat_h(h^{-1/k} m / q)` where `ghat_h` is the
//! transform of the correspondingly windowed `g_h`. The head is summed
//! directly; the far range uses the direct kernel.
//!
//! A [`PoissonPlan`] holds `fhat(m/q)` for every `m` up to the cut-off. It
//! depends on `(P, alpha, q, h)` only and is shared by all `a`.

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::expsum::all_shifts;
use crate::numeric::{gauss_legendre, gcd, unit, unit_f64, unit_minus_one, CompensatedSum, ResidueTable, Turn, PANEL_DEGREE};
use crate::series::direct::windowed_tail;
use crate::series::{BumpPair, DirectConfig, SeriesParams};
use crate::{Error, Result};

/// Controls of the Poisson evaluation.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PoissonConfig {
    /// `N0 = x0 h^{-1/k}`.
    pub x0: f64,
    /// Head length `n1`; the lower window ramps up on `[n1/2, n1]`.
    pub head: f64,
    /// Frequency margin beyond the largest stationary frequency, in units of `1/n1`.
    pub margin: f64,
    /// Stop after this many consecutive negligible terms on each side.
    pub quiet_terms: usize,
    /// Truncation controls of the far range.
    pub direct: DirectConfig,
}

impl Default for PoissonConfig {
    fn default() -> Self {
        Self {
            x0: 4.0,
            head: 32.0,
            margin: 96.0,
            quiet_terms: 5,
            direct: DirectConfig::default(),
        }
    }
}

/// Precomputed `fhat(m/q)` for `m` in `[-m_neg, m_pos]`.
#[derive(Clone, Debug)]
pub struct PoissonPlan {
    params: SeriesParams,
    q: u64,
    h: f64,
    n0: f64,
    head: f64,
    m_neg: i64,
    m_pos: i64,
    fhat: Vec<Complex64>,
    /// Mesh-doubling difference per `m`.
    fhat_err: Vec<f64>,
    nodes: usize,
    cfg: PoissonConfig,
}

/// Quadrature nodes and weighted integrand values on the Poisson range.
fn nodes(params: &SeriesParams, h: f64, head: f64, n0: f64, xi_max: f64, refine: f64) -> Vec<(f64, Complex64)> {
    let bump = BumpPair::shared();
    let poly = &params.poly;
    let deriv = poly.derivative();
    let alpha = params.alpha;
    let f = |n: f64| {
        let low = if n < head { bump.phi(n / head) } else { 1.0 };
        let high = if n > n0 { 1.0 - bump.phi(n / (2.0 * n0)) } else { 1.0 };
        unit_minus_one(h * poly.eval_f64(n)) * (low * high * n.powf(-alpha))
    };
    let freq = |n: f64| h * deriv.eval_f64(n).abs() + xi_max;
    let cycles = 1.5 / refine;
    let (lo, hi) = (0.5 * head, 2.0 * n0);
    let mut out = Vec::new();
    let mut x = lo;
    let rule = gauss_legendre(PANEL_DEGREE);
    while x < hi {
        let first = (cycles / freq(x)).min(0.25 * x / refine);
        let w = (cycles / freq(x).max(freq(x + first))).min(0.25 * x / refine).min(hi - x);
        let end = if hi - x - w < 1e-3 * w { hi } else { x + w };
        let (half, mid) = (0.5 * (end - x), 0.5 * (end + x));
        for &(t, wt) in rule {
            let n = mid + half * t;
            out.push((n, f(n) * (wt * half)));
        }
        x = end;
    }
    out
}

/// `sum_i v_i e(-m n_i / q)` for `m` in `[-m_neg, m_pos]`, ordered by `m`.
fn transform(nodes: &[(f64, Complex64)], q: u64, m_neg: i64, m_pos: i64) -> Vec<Complex64> {
    const CHUNK: usize = 4096;
    const RESTART: i64 = 64;
    let len = (m_pos + m_neg + 1) as usize;
    let inv_q = 1.0 / q as f64;
    let partial: Vec<Vec<Complex64>> = nodes
        .par_chunks(CHUNK)
        .map(|chunk| {
            let mut acc = vec![Complex64::new(0.0, 0.0); len];
            for &(n, v) in chunk {
                let step = unit_f64(-n * inv_q);
                let mut z = Complex64::new(0.0, 0.0);
                for (i, slot) in acc.iter_mut().enumerate() {
                    let m = i as i64 - m_neg;
                    if i as i64 % RESTART == 0 {
                        z = v * unit(Turn::from_f64(-(m as f64) * n * inv_q));
                    }
                    *slot += z;
                    z *= step;
                }
            }
            acc
        })
        .collect();
    let mut total = vec![CompensatedSum::new(); len];
    for part in &partial {
        for (t, v) in total.iter_mut().zip(part) {
            t.add(*v);
        }
    }
    total.iter().map(|t| t.value()).collect()
}

impl PoissonPlan {
    pub fn new(params: &SeriesParams, q: u64, h: f64, cfg: &PoissonConfig) -> Result<Self> {
        if !(h > 0.0 && h < 1.0) {
            return Err(Error::Domain(format!("step h = {h} must lie in (0, 1)")));
        }
        if q == 0 {
            return Err(Error::Domain("modulus q must be positive".into()));
        }
        params.require(crate::series::Mode::Extended)?;
        let k = params.k as f64;
        let n0 = (cfg.x0 * h.powf(-1.0 / k)).max(2.0 * cfg.head);
        let deriv = params.poly.derivative();
        let stationary = h * deriv.eval_f64(2.0 * n0).abs();
        let margin = cfg.margin / cfg.head;
        let m_pos = (q as f64 * (stationary + margin)).ceil() as i64;
        let m_neg = (q as f64 * margin).ceil() as i64;
        let xi_max = stationary + margin;
        let coarse_nodes = nodes(params, h, cfg.head, n0, xi_max, 1.0);
        let fine_nodes = nodes(params, h, cfg.head, n0, xi_max, 2.0);
        let coarse = transform(&coarse_nodes, q, m_neg, m_pos);
        let fhat = transform(&fine_nodes, q, m_neg, m_pos);
        let fhat_err = fhat.iter().zip(&coarse).map(|(f, c)| (f - c).norm() + 1e-15 * f.norm()).collect();
        Ok(Self {
            params: params.clone(),
            q,
            h,
            n0,
            head: cfg.head,
            m_neg,
            m_pos,
            fhat,
            fhat_err,
            nodes: fine_nodes.len(),
            cfg: cfg.clone(),
        })
    }

    pub fn modulus(&self) -> u64 {
        self.q
    }

    pub fn step(&self) -> f64 {
        self.h
    }

    /// The far-range threshold `N0`.
    pub fn n0(&self) -> f64 {
        self.n0
    }

    pub fn node_count(&self) -> usize {
        self.nodes
    }

    /// `fhat(m / q)` if `m` lies in the precomputed range.
    pub fn fhat(&self, m: i64) -> Option<Complex64> {
        (-self.m_neg..=self.m_pos)
            .contains(&m)
            .then(|| self.fhat[(m + self.m_neg) as usize])
    }

    /// `ghat_h(h^{-1/k} m / q) = h^{-(alpha-1)/k} fhat(m/q)` of the windowed kernel.
    pub fn ghat(&self, m: i64) -> Option<Complex64> {
        self.fhat(m).map(|v| v * self.h.powf(-self.params.rho))
    }

    /// Assembles the expansion at `a/q` with tolerance `tol` for dropped terms
    /// and for the far range.
    pub fn expand(&self, a: u64, tol: f64) -> Result<PoissonExpansion> {
        let q = self.q;
        let a = a % q;
        if gcd(a, q) != 1 {
            return Err(Error::Precondition(format!("{a}/{q} is not irreducible")));
        }
        let table = ResidueTable::new(q);
        let taus = all_shifts(&self.params.poly, a, q, &table);
        let tau = |m: i64| taus[m.rem_euclid(q as i64) as usize];
        let inv_q = 1.0 / q as f64;
        let h_rho = self.h.powf(self.params.rho);
        let mut terms = Vec::new();
        let mut sum = CompensatedSum::new();
        let mut mesh_err = 0.0;
        let mut tail_estimate = 0.0;
        let mut record = |m: i64, terms: &mut Vec<PoissonTerm>, sum: &mut CompensatedSum| {
            let i = (m + self.m_neg) as usize;
            let t = tau(m);
            let contribution = t * self.fhat[i] * inv_q;
            sum.add(contribution);
            mesh_err += t.norm() * self.fhat_err[i] * inv_q;
            terms.push(PoissonTerm {
                m,
                tau: t,
                ghat: self.fhat[i] / h_rho,
                term: t * self.fhat[i] / h_rho,
            });
            contribution.norm()
        };
        record(0, &mut terms, &mut sum);
        let (mut m_min, mut m_max) = (0, 0);
        for side in [1i64, -1] {
            let limit = if side > 0 { self.m_pos } else { self.m_neg };
            let mut quiet = 0;
            let mut recent: Vec<f64> = Vec::new();
            let mut m = 0;
            let mut stopped = false;
            while m < limit {
                m += 1;
                let size = record(side * m, &mut terms, &mut sum);
                recent.push(size);
                if size < 1e-2 * tol {
                    quiet += 1;
                } else {
                    quiet = 0;
                }
                if quiet >= self.cfg.quiet_terms {
                    stopped = true;
                    break;
                }
            }
            let last: f64 = recent.iter().rev().take(self.cfg.quiet_terms).sum();
            tail_estimate += last;
            if !stopped && last > tol {
                return Err(Error::Resource {
                    what: format!("Poisson terms still above tolerance at |m| = {m}"),
                    achievable: last,
                });
            }
            if side > 0 {
                m_max = m;
            } else {
                m_min = -m;
            }
        }
        terms.sort_by_key(|t| t.m);

        let head = self.head_sum(a, &table);
        let far = windowed_tail(&self.params, a, q, self.h, self.n0, tol, &self.cfg.direct)?;
        let poisson_part = sum.value();
        let remainder = head + far.value;
        let total = poisson_part + remainder;
        let rounding = 1e-14 * (poisson_part.norm() + remainder.norm());
        Ok(PoissonExpansion {
            a,
            q,
            h: self.h,
            n0: self.n0,
            terms,
            m_min,
            m_max,
            poisson_part,
            remainder,
            tail_estimate,
            mesh_error: mesh_err,
            total,
            err_budget: tail_estimate + mesh_err + far.err_budget + rounding,
        })
    }

    /// `sum_{n < n1} (1 - Phi(n/n1)) e(a P(n)/q) (e(h P(n)) - 1) n^{-alpha}`.
    fn head_sum(&self, a: u64, table: &ResidueTable) -> Complex64 {
        let bump = BumpPair::shared();
        let poly = &self.params.poly;
        let ht = Turn::from_f64(self.h);
        let mut acc = CompensatedSum::new();
        let mut n = 1u64;
        while (n as f64) < self.head {
            let weight = 1.0 - bump.phi(n as f64 / self.head);
            let r = ((a as u128 * poly.eval_mod(n as i128, self.q) as u128) % self.q as u128) as u64;
            let c = table.get(r);
            let eh = unit(ht.mul_int(poly.eval_wrapping(n as i128)));
            acc.add(c * (eh - 1.0) * (weight * (n as f64).powf(-self.params.alpha)));
            n += 1;
        }
        acc.value()
    }
}

/// One term `tau_m ghat_h(h^{-1/k} m / q)` of the expansion.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PoissonTerm {
    pub m: i64,
    pub tau: Complex64,
    pub ghat: Complex64,
    pub term: Complex64,
}

/// The assembled expansion. `total = q^{-1} h^{(alpha-1)/k} sum(terms) + remainder`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PoissonExpansion {
    pub a: u64,
    pub q: u64,
    pub h: f64,
    pub n0: f64,
    /// Terms in increasing `m`.
    pub terms: Vec<PoissonTerm>,
    pub m_min: i64,
    pub m_max: i64,
    /// `q^{-1} sum_m tau_m fhat(m/q)`.
    pub poisson_part: Complex64,
    /// Head and far-range sums.
    pub remainder: Complex64,
    /// Sum of the last computed `|terms|` on each side, a proxy for the dropped ones.
    pub tail_estimate: f64,
    pub mesh_error: f64,
    pub total: Complex64,
    pub err_budget: f64,
}

impl PoissonExpansion {
    fn conjugated(mut self, a: u64) -> Self {
        self.a = a;
        self.h = -self.h;
        self.poisson_part = self.poisson_part.conj();
        self.remainder = self.remainder.conj();
        self.total = self.total.conj();
        for t in &mut self.terms {
            t.m = -t.m;
            t.tau = t.tau.conj();
            t.ghat = t.ghat.conj();
            t.term = t.term.conj();
        }
        self.terms.reverse();
        (self.m_min, self.m_max) = (-self.m_max, -self.m_min);
        self
    }
}

/// `F(a/q + h) - F(a/q)` by Poisson summation. Negative `h` is reduced to
/// positive steps by conjugation: `Delta F(a/q, -h) = conj Delta F((q-a)/q, h)`.
pub fn poisson_delta(params: &SeriesParams, a: u64, q: u64, h: f64, tol: f64) -> Result<PoissonExpansion> {
    poisson_delta_with(params, a, q, h, tol, &PoissonConfig::default())
}

/// [`poisson_delta`] with explicit controls.
pub fn poisson_delta_with(params: &SeriesParams, a: u64, q: u64, h: f64, tol: f64, cfg: &PoissonConfig) -> Result<PoissonExpansion> {
    if q == 0 {
        return Err(Error::Domain("modulus q must be positive".into()));
    }
    if h < 0.0 {
        let mirrored = (q - a % q) % q;
        let plan = PoissonPlan::new(params, q, -h, cfg)?;
        return Ok(plan.expand(mirrored, tol)?.conjugated(a % q));
    }
    PoissonPlan::new(params, q, h, cfg)?.expand(a, tol)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::series::eval_delta_direct;

    #[test]
    fn agrees_with_direct_summation() {
        let p = SeriesParams::parse("n^2", 2.0).unwrap();
        let h = 1e-4;
        let e = poisson_delta(&p, 3, 7, h, 1e-9).unwrap();
        let d = eval_delta_direct(&p, 3, 7, h, 1e-9).unwrap();
        assert!(
            (e.total - d.value).norm() <= e.err_budget + d.err_budget + 1e-12,
            "{} vs {}",
            e.total,
            d.value
        );
        assert!((e.total - d.value).norm() < 1e-6 * d.value.norm());
    }

    #[test]
    fn zero_term_definition() {
        let p = SeriesParams::parse("n^3", 2.6).unwrap();
        let e = poisson_delta(&p, 4, 11, 1e-5, 1e-9).unwrap();
        let zero = e.terms.iter().find(|t| t.m == 0).unwrap();
        assert!((zero.term - zero.tau * zero.ghat).norm() < 1e-15 * zero.term.norm().max(1.0));
    }

    #[test]
    fn negative_step_by_conjugation() {
        let p = SeriesParams::parse("n^2", 2.0).unwrap();
        let neg = poisson_delta(&p, 2, 7, -1e-4, 1e-9).unwrap();
        let d = eval_delta_direct(&p, 2, 7, -1e-4, 1e-9).unwrap();
        assert!((neg.total - d.value).norm() < 1e-6 * d.value.norm());
    }
}
