//! Hölder-exponent estimation, average oscillations, exceptional-set
//! censuses, the model sum `S` and the spectrum-bound formulas.
//!
//! Oscillation suprema are taken over a geometric grid of steps in each window
//! and are therefore under-estimates of the true supremum.

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::diophantine::in_at;
use crate::numeric::{fit_line, gcd, Turn};
use crate::output::{fmt17, CsvTable};
use crate::series::direct::{eval_delta_direct_with, split_delta_with};
use crate::series::{eval_delta_real, DirectConfig, SeriesParams, SplitPart};
use crate::{Error, Result};

/// Point at which oscillations are measured.
#[derive(Clone, Debug, PartialEq)]
pub enum BasePoint {
    Rational { a: u64, q: u64 },
    Real { x: Turn, label: String },
}

impl BasePoint {
    pub fn label(&self) -> String {
        match self {
            Self::Rational { a, q } => format!("{a}/{q}"),
            Self::Real { label, .. } => label.clone(),
        }
    }
}

/// The increment whose size is measured.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Increment {
    /// `F(x + h) - F(x)`.
    First,
    /// `F(x + 2h) - 2F(x + h) + F(x)`, which removes a linear term and so
    /// resolves exponents in `(1, 2)`.
    Second,
}

/// Which part of the series enters the increment.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Component {
    Full,
    /// Terms with `p` not dividing `P'(n)` at a base `a / p^{nu_F + 1}`.
    LowerStar,
}

/// Sampling controls for one window.
#[derive(Clone, Debug, PartialEq)]
pub struct SupConfig {
    /// Geometric grid points per sign of `h`.
    pub samples: usize,
    pub increment: Increment,
    pub component: Component,
    /// Absolute tolerance of every series evaluation.
    pub tol: f64,
    pub direct: DirectConfig,
}

impl Default for SupConfig {
    fn default() -> Self {
        Self {
            samples: 64,
            increment: Increment::First,
            component: Component::Full,
            tol: 1e-9,
            direct: DirectConfig::default(),
        }
    }
}

/// Supremum of an increment over `H <= |h| < 2H`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OscillationRecord {
    pub base: String,
    /// Dyadic scale index when the window is `[2^{-j-1}, 2^{-j})`.
    pub j: Option<i32>,
    pub h_lo: f64,
    pub h_hi: f64,
    pub sup: f64,
    pub argmax_h: f64,
    /// Grid points per sign.
    pub samples: usize,
    pub method: String,
    /// Largest error budget among the evaluations.
    pub err_budget: f64,
}

/// Smallest window edge the fixed-point phase can resolve.
const MIN_STEP: f64 = 1e-30;

fn delta_at(params: &SeriesParams, base: &BasePoint, h: f64, cfg: &SupConfig) -> Result<(Complex64, f64)> {
    let d = match (base, cfg.component) {
        (BasePoint::Rational { a, q }, Component::Full) => eval_delta_direct_with(params, *a, *q, h, cfg.tol, &cfg.direct)?,
        (BasePoint::Rational { a, q }, Component::LowerStar) => {
            split_delta_with(params, *a, *q, h, SplitPart::LowerStar, cfg.tol, &cfg.direct)?
        }
        (BasePoint::Real { x, .. }, Component::Full) => eval_delta_real(params, *x, h, cfg.tol, &cfg.direct)?,
        (BasePoint::Real { .. }, Component::LowerStar) => {
            return Err(Error::Domain("the split series needs a rational base".into()));
        }
    };
    Ok((d.value, d.err_budget))
}

fn increment_at(params: &SeriesParams, base: &BasePoint, h: f64, cfg: &SupConfig) -> Result<(f64, f64)> {
    match cfg.increment {
        Increment::First => {
            let (v, e) = delta_at(params, base, h, cfg)?;
            Ok((v.norm(), e))
        }
        Increment::Second => {
            let (v2, e2) = delta_at(params, base, 2.0 * h, cfg)?;
            let (v1, e1) = delta_at(params, base, h, cfg)?;
            Ok(((v2 - v1 * 2.0).norm(), e2 + 2.0 * e1))
        }
    }
}

/// The geometric grid `H 2^{s/samples}`, `s < samples`. Doubling `samples`
/// refines the grid and keeps every old point.
fn window_grid(h_lo: f64, samples: usize) -> Vec<f64> {
    (0..samples).map(|s| h_lo * (s as f64 / samples as f64).exp2()).collect()
}

/// Supremum of the increment over the window `[h_lo, 2 h_lo)`, both signs.
pub fn sup_window(params: &SeriesParams, base: &BasePoint, h_lo: f64, cfg: &SupConfig) -> Result<OscillationRecord> {
    if cfg.samples < 2 {
        return Err(Error::Domain(format!("need at least 2 samples per window, got {}", cfg.samples)));
    }
    if !(h_lo > 0.0 && 2.0 * h_lo < 1.0) {
        return Err(Error::Domain(format!("window [{h_lo}, {}) must lie in (0, 1)", 2.0 * h_lo)));
    }
    if h_lo < MIN_STEP {
        return Err(Error::Resource {
            what: format!("window {h_lo:e} below the phase resolution"),
            achievable: MIN_STEP,
        });
    }
    let steps: Vec<f64> = window_grid(h_lo, cfg.samples).into_iter().flat_map(|h| [h, -h]).collect();
    let values = steps
        .par_iter()
        .map(|&h| increment_at(params, base, h, cfg))
        .collect::<Result<Vec<_>>>()?;
    let (mut sup, mut argmax_h, mut err_budget) = (0.0f64, steps[0], 0.0f64);
    for (&h, &(v, e)) in steps.iter().zip(&values) {
        if v > sup {
            sup = v;
            argmax_h = h;
        }
        err_budget = err_budget.max(e);
    }
    let method = match cfg.increment {
        Increment::First => "direct",
        Increment::Second => "direct-second-difference",
    };
    Ok(OscillationRecord {
        base: base.label(),
        j: None,
        h_lo,
        h_hi: 2.0 * h_lo,
        sup,
        argmax_h,
        samples: cfg.samples,
        method: method.into(),
        err_budget,
    })
}

/// Supremum over `2^{-j-1} <= |h| < 2^{-j}`.
pub fn sup_osc(params: &SeriesParams, base: &BasePoint, j: i32, cfg: &SupConfig) -> Result<OscillationRecord> {
    let mut rec = sup_window(params, base, (-(j as f64) - 1.0).exp2(), cfg)?;
    rec.j = Some(j);
    Ok(rec)
}

/// Controls for [`beta_estimate`].
#[derive(Clone, Debug, PartialEq)]
pub struct HolderConfig {
    pub samples: usize,
    pub increment: Increment,
    /// Series tolerance relative to the expected size of the supremum.
    pub rel_tol: f64,
    pub direct: DirectConfig,
}

impl Default for HolderConfig {
    fn default() -> Self {
        Self {
            samples: 64,
            increment: Increment::First,
            rel_tol: 1e-3,
            direct: DirectConfig::default(),
        }
    }
}

/// Regression estimate of a pointwise Hölder exponent.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HolderEstimate {
    pub base: String,
    pub beta_hat: f64,
    pub stderr: f64,
    pub j_min: i32,
    pub j_max: i32,
    pub records: Vec<OscillationRecord>,
    /// Residuals of `log2 sup` about the fitted line, per used scale.
    pub residuals: Vec<f64>,
    pub increment: Increment,
}

impl HolderEstimate {
    /// Rows `(j, h_lo, sup, log2 sup, residual)`.
    pub fn to_csv(&self) -> CsvTable {
        let mut t = CsvTable::new(&["base", "j", "h_lo", "sup", "log2_sup", "residual", "beta_hat"]);
        for (rec, res) in self.records.iter().zip(&self.residuals) {
            t.push(vec![
                self.base.clone(),
                rec.j.unwrap_or_default().to_string(),
                fmt17(rec.h_lo),
                fmt17(rec.sup),
                fmt17(rec.sup.log2()),
                fmt17(*res),
                fmt17(self.beta_hat),
            ]);
        }
        t
    }
}

/// Least-squares slope of `log2 sup` against `-j` over `j_min..=j_max`.
///
/// Tolerances follow the data: the first scale uses a loose pilot, and each
/// later scale uses `rel_tol` times a quarter of the previous supremum, which
/// stays relative as long as the exponent does not exceed 2.
pub fn beta_estimate(params: &SeriesParams, base: &BasePoint, j_min: i32, j_max: i32, cfg: &HolderConfig) -> Result<HolderEstimate> {
    if j_max - j_min + 1 < 3 {
        return Err(Error::Domain(format!("need at least 3 scales, got j in [{j_min}, {j_max}]")));
    }
    let mut sup_cfg = SupConfig {
        samples: 4.min(cfg.samples).max(2),
        increment: cfg.increment,
        component: Component::Full,
        tol: 1e-4 * (-(j_min as f64)).exp2(),
        direct: cfg.direct.clone(),
    };
    let pilot = sup_osc(params, base, j_min, &sup_cfg)?;
    let mut reference = if pilot.sup > 0.0 {
        4.0 * pilot.sup
    } else {
        (-(j_min as f64)).exp2()
    };
    sup_cfg.samples = cfg.samples;
    let mut records = Vec::new();
    for j in j_min..=j_max {
        sup_cfg.tol = cfg.rel_tol * reference / 4.0;
        let rec = sup_osc(params, base, j, &sup_cfg)?;
        if rec.sup > 0.0 {
            reference = rec.sup;
        }
        records.push(rec);
    }
    let used: Vec<&OscillationRecord> = records.iter().filter(|r| r.sup > 0.0).collect();
    if used.len() < 3 {
        return Err(Error::Domain("fewer than 3 scales with a nonzero supremum".into()));
    }
    let xs: Vec<f64> = used.iter().map(|r| -(r.j.unwrap_or_default() as f64)).collect();
    let ys: Vec<f64> = used.iter().map(|r| r.sup.log2()).collect();
    let fit = fit_line(&xs, &ys)?;
    let records = used.into_iter().cloned().collect();
    Ok(HolderEstimate {
        base: base.label(),
        beta_hat: fit.slope,
        stderr: fit.slope_stderr,
        j_min,
        j_max,
        records,
        residuals: fit.residuals,
        increment: cfg.increment,
    })
}

/// Controls for the average-oscillation censuses.
#[derive(Clone, Debug, PartialEq)]
pub struct AvgConfig {
    pub samples: usize,
    /// Series tolerance relative to `H^{(2 alpha - 1) / 2k}`, the root of the
    /// expected mean square.
    pub rel_tol: f64,
    pub direct: DirectConfig,
}

impl Default for AvgConfig {
    fn default() -> Self {
        Self {
            samples: 16,
            rel_tol: 1e-3,
            direct: DirectConfig::default(),
        }
    }
}

impl AvgConfig {
    fn sup_config(&self, params: &SeriesParams, big_h: f64, component: Component) -> SupConfig {
        let typical = big_h.powf((2.0 * params.alpha - 1.0) / (2.0 * params.k as f64));
        SupConfig {
            samples: self.samples,
            increment: Increment::First,
            component,
            tol: self.rel_tol * typical,
            direct: self.direct.clone(),
        }
    }
}

/// Mean of `sup |Delta F_*(a/q, h)|^2` over `a = 1..=q`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AvgOscRecord {
    pub q: u64,
    pub big_h: f64,
    pub average: f64,
    /// Per-`a` suprema, `a = 1..=q`.
    pub sups: Vec<f64>,
    pub component: Component,
}

fn check_window(big_h: f64) -> Result<()> {
    if !(big_h > 0.0 && big_h < 0.5) {
        return Err(Error::Domain(format!("window start H = {big_h} must lie in (0, 1/2)")));
    }
    Ok(())
}

/// Average over all residues of the squared window supremum. For `nu_F > 1`
/// the modulus must be `p^{nu_F + 1}` and only terms with `p` not dividing
/// `P'(n)` enter.
pub fn avg_osc_single_q(params: &SeriesParams, q: u64, big_h: f64, cfg: &AvgConfig) -> Result<AvgOscRecord> {
    check_window(big_h)?;
    if q == 0 {
        return Err(Error::Domain("modulus q must be positive".into()));
    }
    let component = if params.nu_f > 1 && q > 1 {
        Component::LowerStar
    } else {
        Component::Full
    };
    let sup_cfg = cfg.sup_config(params, big_h, component);
    let sups = (1..=q)
        .into_par_iter()
        .map(|a| sup_window(params, &BasePoint::Rational { a, q }, big_h, &sup_cfg).map(|r| r.sup))
        .collect::<Result<Vec<_>>>()?;
    let average = sups.iter().map(|s| s * s).sum::<f64>() / q as f64;
    Ok(AvgOscRecord {
        q,
        big_h,
        average,
        sups,
        component,
    })
}

/// Average over moduli `n` in `[Q, 2Q)` and all `a = 1..=n`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QRangeRecord {
    pub big_q: u64,
    pub big_h: f64,
    pub eps: f64,
    /// `sum_n sum_a sup^2`.
    pub raw_sum: f64,
    /// `raw_sum / Q^{2 + eps}`.
    pub normalized: f64,
    pub pairs: u64,
    /// Distinct reduced fractions evaluated.
    pub distinct: usize,
}

/// The doubly averaged oscillation. Each reduced fraction is evaluated once.
pub fn avg_osc_qrange(params: &SeriesParams, big_q: u64, big_h: f64, eps: f64, cfg: &AvgConfig) -> Result<QRangeRecord> {
    check_window(big_h)?;
    if big_q == 0 || !(eps >= 0.0) {
        return Err(Error::Domain("need Q >= 1 and eps >= 0".into()));
    }
    // Q = 1 is the degenerate single-modulus census and is always allowed.
    if big_q > 1 && !((big_q as f64).powf(-(params.k as f64)) < big_h) {
        return Err(Error::Domain(format!("H = {big_h} must exceed Q^-k")));
    }
    let mut multiplicity = std::collections::BTreeMap::<(u64, u64), u64>::new();
    for n in big_q..2 * big_q {
        for a in 1..=n {
            let g = gcd(a, n);
            *multiplicity.entry((a / g % (n / g), n / g)).or_default() += 1;
        }
    }
    let sup_cfg = cfg.sup_config(params, big_h, Component::Full);
    let keys: Vec<(u64, u64)> = multiplicity.keys().copied().collect();
    let sups = keys
        .par_iter()
        .map(|&(a, q)| sup_window(params, &BasePoint::Rational { a, q }, big_h, &sup_cfg).map(|r| r.sup))
        .collect::<Result<Vec<_>>>()?;
    let raw_sum: f64 = keys.iter().zip(&sups).map(|(key, s)| multiplicity[key] as f64 * s * s).sum();
    let pairs = multiplicity.values().sum();
    Ok(QRangeRecord {
        big_q,
        big_h,
        eps,
        raw_sum,
        normalized: raw_sum / (big_q as f64).powf(2.0 + eps),
        pairs,
        distinct: keys.len(),
    })
}

/// Members of `A(t)` for the pair `(q, q_tilde)`.
pub fn a_set(q: u64, q_tilde: u64, t: f64) -> Result<Vec<u64>> {
    (1..q)
        .filter_map(|a| in_at(a, q, q_tilde, t).map(|m| m.then_some(a)).transpose())
        .collect()
}

/// Average over the thin set `A(q_tilde^r)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RestrictedRecord {
    pub q: u64,
    pub q_tilde: u64,
    pub r: f64,
    pub big_h: f64,
    pub members: Vec<u64>,
    pub average: f64,
    /// `2 (alpha - 1)/k + 2 / ((nu_F + 1) r)`.
    pub predicted_exponent: f64,
    /// Hypotheses of the averaging statement that the run violates.
    pub flags: Vec<String>,
}

pub fn avg_osc_restricted(params: &SeriesParams, q: u64, q_tilde: u64, r: f64, big_h: f64, cfg: &AvgConfig) -> Result<RestrictedRecord> {
    check_window(big_h)?;
    if !(q_tilde >= 1 && q_tilde < q) {
        return Err(Error::Domain(format!("need 1 <= q~ < q, got q~ = {q_tilde}, q = {q}")));
    }
    let t = (q_tilde as f64).powf(r);
    let members = a_set(q, q_tilde, t)?;
    if members.is_empty() {
        return Err(Error::Domain(format!("A(q~^r) is empty for q = {q}, q~ = {q_tilde}, r = {r}")));
    }
    let k = params.k as f64;
    let nu = params.nu_f as f64;
    let mut flags = Vec::new();
    if t <= q_tilde as f64 {
        flags.push("t <= q~".to_string());
    }
    if r <= 2.0 * k / (nu + 1.0) {
        flags.push("r <= 2k/(nu_F+1)".to_string());
    }
    if !((q as f64).powf(-0.25) < big_h && big_h < 1.0 / t) {
        flags.push("H outside (q^-1/4, q~^-r)".to_string());
    }
    let sup_cfg = cfg.sup_config(params, big_h, Component::Full);
    let sups = members
        .par_iter()
        .map(|&a| sup_window(params, &BasePoint::Rational { a, q }, big_h, &sup_cfg).map(|r| r.sup))
        .collect::<Result<Vec<_>>>()?;
    let average = sups.iter().map(|s| s * s).sum::<f64>() / members.len() as f64;
    Ok(RestrictedRecord {
        q,
        q_tilde,
        r,
        big_h,
        members,
        average,
        predicted_exponent: 2.0 * params.rho + 2.0 / ((nu + 1.0) * r),
        flags,
    })
}

/// The exceptional sets of the Cantor construction.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Exceptional {
    /// `a` in `A(q~^r)` whose increment over `q^{-r}/4 <= |h| < 2 q~^{-r}`
    /// exceeds `|h|^{rho + 1/((nu_F+1) r) - eps}`.
    Cheby,
    /// `a <= q` whose split increment over `q^{-r}/4 < h < q^{-r}/2` exceeds
    /// `h^rho (h^{1/2k} + h^{1/2r}) h^{-eps}`.
    Bq,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CensusRecord {
    pub which: Exceptional,
    pub q: u64,
    pub q_tilde: u64,
    pub r: f64,
    pub eps: f64,
    pub candidates: u64,
    pub members: Vec<u64>,
    pub count: u64,
    pub bound: f64,
    pub ratio: f64,
    /// The modulus lies below the range where the counting bound is proved.
    pub below_threshold: bool,
}

/// Exhaustive census of an exceptional set, with suprema over `samples`
/// geometric steps per octave.
pub fn exceptional_census(
    params: &SeriesParams,
    q: u64,
    q_tilde: u64,
    r: f64,
    eps: f64,
    which: Exceptional,
    cfg: &AvgConfig,
) -> Result<CensusRecord> {
    if !(r > 0.0 && eps >= 0.0) || q < 2 {
        return Err(Error::Domain("need q >= 2, r > 0 and eps >= 0".into()));
    }
    let k = params.k as f64;
    let nu = params.nu_f as f64;
    let qf = q as f64;
    let (candidates, lo, hi, signs, component): (Vec<u64>, f64, f64, &[f64], Component) = match which {
        Exceptional::Cheby => {
            if !(q_tilde >= 1 && q_tilde < q) {
                return Err(Error::Domain(format!("need 1 <= q~ < q, got q~ = {q_tilde}")));
            }
            let t = (q_tilde as f64).powf(r);
            (
                a_set(q, q_tilde, t)?,
                0.25 * qf.powf(-r),
                (2.0 / t).min(0.5),
                &[1.0, -1.0],
                Component::Full,
            )
        }
        Exceptional::Bq => {
            let component = if params.nu_f > 1 { Component::LowerStar } else { Component::Full };
            ((1..=q).collect(), 0.25 * qf.powf(-r), 0.5 * qf.powf(-r), &[1.0], component)
        }
    };
    if !(lo < hi) {
        return Err(Error::Domain(format!("empty step range [{lo:e}, {hi:e})")));
    }
    let octaves = (hi / lo).log2();
    let count_steps = ((octaves * cfg.samples as f64).ceil() as usize).max(2);
    let steps: Vec<f64> = (0..count_steps)
        .map(|s| lo * (octaves * s as f64 / count_steps as f64).exp2())
        .collect();
    let exponent = params.rho + 1.0 / ((nu + 1.0) * r) - eps;
    let threshold = |h: f64| match which {
        Exceptional::Cheby => h.powf(exponent),
        Exceptional::Bq => h.powf(params.rho) * (h.powf(0.5 / k) + h.powf(0.5 / r)) * h.powf(-eps),
    };
    let tol = cfg.rel_tol * threshold(lo);
    let sup_cfg = SupConfig {
        samples: 2,
        increment: Increment::First,
        component,
        tol,
        direct: cfg.direct.clone(),
    };
    let flags = candidates
        .par_iter()
        .map(|&a| {
            let base = BasePoint::Rational { a, q };
            for &h in &steps {
                for &s in signs {
                    let (v, _) = delta_at(params, &base, s * h, &sup_cfg)?;
                    if v.norm() > threshold(h) {
                        return Ok(true);
                    }
                }
            }
            Ok(false)
        })
        .collect::<Result<Vec<bool>>>()?;
    let members: Vec<u64> = candidates.iter().zip(&flags).filter(|(_, f)| **f).map(|(a, _)| *a).collect();
    let count = members.len() as u64;
    let (bound, below_threshold) = match which {
        Exceptional::Cheby => {
            let t = (q_tilde as f64).powf(r);
            let bound = t.powf(-2.0 * eps) * candidates.len() as f64 * qf.ln();
            let needed = if eps > 0.0 {
                (q_tilde as f64).powf(2.0 * r * (2.0 + 1.0 / eps))
            } else {
                f64::INFINITY
            };
            (bound, qf < needed)
        }
        Exceptional::Bq => (qf.powf(1.0 - 2.0 * eps * r), false),
    };
    Ok(CensusRecord {
        which,
        q,
        q_tilde,
        r,
        eps,
        candidates: candidates.len() as u64,
        members,
        count,
        bound,
        ratio: count as f64 / bound,
        below_threshold,
    })
}

/// `S = h^{1/k} sum_{h^{-1/k} <= n < 2 h^{-1/k}} e(a P(n) / q)`, optionally
/// restricted to `n = 0 (mod p)`. Zero for `h >= 1`.
pub fn model_sum_s(params: &SeriesParams, a: u64, q: u64, h: f64, progression: Option<u64>) -> Result<Complex64> {
    if q == 0 || !(h > 0.0) {
        return Err(Error::Domain("need q > 0 and h > 0".into()));
    }
    if h >= 1.0 {
        return Ok(Complex64::new(0.0, 0.0));
    }
    let k = params.k as f64;
    let x = h.powf(-1.0 / k);
    let (lo, hi) = (x.ceil() as u64, (2.0 * x).ceil() as u64);
    let step = progression.unwrap_or(1).max(1);
    let table = crate::numeric::ResidueTable::new(q);
    let first = lo.div_ceil(step) * step;
    let terms = (first..hi).step_by(step as usize).map(|n| {
        let v = params.poly.eval_mod(n as i128, q);
        table.get(((a as u128 * v as u128) % q as u128) as u64)
    });
    Ok(crate::numeric::compensated_sum(terms) * h.powf(1.0 / k))
}

/// One row of the spectrum bounds.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpectrumRow {
    pub beta: f64,
    pub lower: f64,
    pub upper: f64,
    /// `4 beta` for `k = 2`.
    pub exact: Option<f64>,
}

/// Lower and upper bounds for `d_F(rho + beta)` on `[0, 1/(2k))`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpectrumBounds {
    pub k: u32,
    pub nu_0: u32,
    pub rows: Vec<SpectrumRow>,
}

impl SpectrumBounds {
    pub fn to_csv(&self) -> CsvTable {
        let mut t = CsvTable::new(&["k", "nu_0", "beta", "lower", "upper", "exact"]);
        for r in &self.rows {
            t.push(vec![
                self.k.to_string(),
                self.nu_0.to_string(),
                fmt17(r.beta),
                fmt17(r.lower),
                fmt17(r.upper),
                r.exact.map(fmt17).unwrap_or_default(),
            ]);
        }
        t
    }
}

/// The upper bound `omega(beta)`: `2 beta / (2^{-k} + beta)` below the
/// junction `1/(k 2^k)`, `3/2 - sqrt((k+4)/(4k) - 2 beta)` above it.
pub fn omega(k: u32, beta: f64) -> Result<f64> {
    let kf = k as f64;
    if k < 2 || !(0.0..0.5 / kf).contains(&beta) {
        return Err(Error::Domain(format!("beta = {beta} outside [0, 1/(2k)) for k = {k}")));
    }
    let junction = 1.0 / (kf * (k as f64).exp2());
    Ok(if beta < junction {
        2.0 * beta / ((-kf).exp2() + beta)
    } else {
        1.5 - ((kf + 4.0) / (4.0 * kf) - 2.0 * beta).sqrt()
    })
}

/// Tabulates the bounds on `grid` points: uniform on `[0, 1/(2k)]` with the
/// right endpoint replaced by the largest float below it.
pub fn spectrum_bounds(k: u32, nu_0: u32, grid: usize) -> Result<SpectrumBounds> {
    if k < 2 {
        return Err(Error::Domain(format!("degree k = {k} must be at least 2")));
    }
    if !(2..=(k - 1).max(2)).contains(&nu_0) {
        return Err(Error::Domain(format!("nu_0 = {nu_0} outside [2, max(2, k - 1)]")));
    }
    if grid < 2 {
        return Err(Error::Domain("grid needs at least 2 points".into()));
    }
    let edge = 0.5 / k as f64;
    let rows = (0..grid)
        .map(|i| {
            let beta = if i + 1 == grid {
                edge.next_down()
            } else {
                edge * i as f64 / (grid - 1) as f64
            };
            Ok(SpectrumRow {
                beta,
                lower: (nu_0 as f64 + 2.0) * beta,
                upper: omega(k, beta)?,
                exact: (k == 2).then_some(4.0 * beta),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(SpectrumBounds { k, nu_0, rows })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::diophantine::HighPrecisionReal;

    fn quadratic() -> SeriesParams {
        SeriesParams::parse("n^2", 2.0).unwrap()
    }

    #[test]
    fn omega_examples() {
        assert!((omega(2, 1.0 / 16.0).unwrap() - 0.4).abs() < 1e-15);
        assert!((omega(2, 0.125).unwrap() - (1.5 - 0.5f64.sqrt())).abs() < 1e-15);
        assert!(omega(2, 0.25).is_err());
        let s = spectrum_bounds(2, 2, 256).unwrap();
        assert_eq!(s.rows[0].upper, 0.0);
        assert!((s.rows.last().unwrap().upper - 1.0).abs() < 1e-6);
    }

    #[test]
    fn sup_window_is_monotone_under_refinement() {
        let p = quadratic();
        let base = BasePoint::Rational { a: 1, q: 3 };
        let mut cfg = SupConfig {
            samples: 4,
            tol: 1e-6,
            ..SupConfig::default()
        };
        let coarse = sup_osc(&p, &base, 6, &cfg).unwrap();
        cfg.samples = 8;
        let fine = sup_osc(&p, &base, 6, &cfg).unwrap();
        assert!(fine.sup >= coarse.sup);
    }

    #[test]
    fn unreachable_scale_is_a_resource_error() {
        let p = quadratic();
        let cfg = SupConfig {
            samples: 2,
            tol: 1e-30,
            ..SupConfig::default()
        };
        let err = sup_osc(&p, &BasePoint::Rational { a: 1, q: 3 }, 30, &cfg).unwrap_err();
        assert_eq!(err.kind(), "resource");
    }

    #[test]
    fn rational_exponent_is_rho() {
        let p = quadratic();
        let cfg = HolderConfig {
            samples: 8,
            ..HolderConfig::default()
        };
        let est = beta_estimate(&p, &BasePoint::Rational { a: 1, q: 3 }, 8, 16, &cfg).unwrap();
        assert!((est.beta_hat - 0.5).abs() < 0.05, "{}", est.beta_hat);
        assert!(beta_estimate(&p, &BasePoint::Rational { a: 1, q: 3 }, 8, 9, &cfg).is_err());
    }

    #[test]
    fn golden_exponent_short_range() {
        let p = quadratic();
        let x = HighPrecisionReal::golden(256).to_turn();
        let cfg = HolderConfig {
            samples: 8,
            ..HolderConfig::default()
        };
        let est = beta_estimate(&p, &BasePoint::Real { x, label: "golden".into() }, 8, 18, &cfg).unwrap();
        assert!((est.beta_hat - 0.75).abs() < 0.1, "{}", est.beta_hat);
    }

    #[test]
    fn single_modulus_one() {
        let p = quadratic();
        let cfg = AvgConfig {
            samples: 4,
            ..AvgConfig::default()
        };
        let rec = avg_osc_single_q(&p, 1, 0.01, &cfg).unwrap();
        let sup = sup_window(
            &p,
            &BasePoint::Rational { a: 0, q: 1 },
            0.01,
            &cfg.sup_config(&p, 0.01, Component::Full),
        )
        .unwrap();
        assert_eq!(rec.sups.len(), 1);
        assert!((rec.average - sup.sup * sup.sup).abs() < 1e-15);
    }

    #[test]
    fn conjugation_symmetry_of_average() {
        let p = quadratic();
        let cfg = AvgConfig {
            samples: 4,
            ..AvgConfig::default()
        };
        let rec = avg_osc_single_q(&p, 7, 0.02, &cfg).unwrap();
        for a in 1..7usize {
            let (x, y) = (rec.sups[a - 1], rec.sups[7 - a - 1]);
            assert!((x - y).abs() <= 1e-6 * x.max(y), "{a}: {x} vs {y}");
        }
    }

    #[test]
    fn qrange_degenerate_and_eps_monotone() {
        let p = quadratic();
        let cfg = AvgConfig {
            samples: 4,
            ..AvgConfig::default()
        };
        let one = avg_osc_qrange(&p, 1, 0.1, 0.0, &cfg).unwrap();
        assert_eq!(one.pairs, 1);
        let a = avg_osc_qrange(&p, 3, 0.2, 0.0, &cfg).unwrap();
        let b = avg_osc_qrange(&p, 3, 0.2, 0.5, &cfg).unwrap();
        assert!(b.normalized <= a.normalized);
        assert!(avg_osc_qrange(&p, 3, 0.01, 0.0, &cfg).is_err());
    }

    #[test]
    fn model_sum_examples() {
        let p = quadratic();
        assert_eq!(model_sum_s(&p, 1, 7, 2.0, None).unwrap(), Complex64::new(0.0, 0.0));
        // Long ranges average the complete sum.
        let q = 101u64;
        let h = (q as f64).powi(-3);
        let s = model_sum_s(&p, 3, q, h, None).unwrap().norm();
        let target = (q as f64).powf(-0.5);
        assert!(s > target / 4.0 && s < 4.0 * target, "{s} vs {target}");
        // No cancellation on multiples of p for n^3 at q = p^3.
        let cube = SeriesParams::parse("n^3", 2.6).unwrap();
        let pr = 5u64;
        let sub = model_sum_s(&cube, 2, pr.pow(3), 1e-9, Some(pr)).unwrap().norm();
        assert!((sub * pr as f64 - 1.0).abs() < 0.01, "{sub}");
    }

    #[test]
    fn restricted_average_flags() {
        let p = quadratic();
        let cfg = AvgConfig {
            samples: 4,
            ..AvgConfig::default()
        };
        let rec = avg_osc_restricted(&p, 50, 5, 1.0, 0.05, &cfg).unwrap();
        assert!(rec.flags.iter().any(|f| f.contains("t <= q~")));
        assert!(rec.members.iter().all(|&a| in_at(a, 50, 5, 5.0).unwrap()));
    }
}
