//! Acceptance suites shared by `verify` and the acceptance test target.
//!
//! Each suite returns a one-line summary and a CSV whose bytes must not
//! depend on the worker thread count.

use anyhow::{anyhow, Result};
use polyfourier::cantor::{self, build_generation, dim_bounds, restrict_sparse, BuildConfig, GenerationTree, Keep, TreeMode};
use polyfourier::diophantine::HighPrecisionReal;
use polyfourier::expsum::{bound_report, power_sum_bounds, tau0_all_a, turan_fraction, TuranInstance};
use polyfourier::holder::{avg_osc_single_q, beta_estimate, spectrum_bounds, AvgConfig, BasePoint, HolderConfig, Increment};
use polyfourier::numeric::{fit_line, gcd, ResidueTable, TAU};
use polyfourier::output::{fmt17, CsvTable};
use polyfourier::polynomials::{primes_in, IntPolynomial};
use polyfourier::series::{constant_a, eval_delta_direct, main_term_residual, osc_integral, poisson_delta, SeriesParams};
use polyfourier::Complex64;
use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

/// Seed for every randomized suite.
pub const SEED: u64 = 20_240_917;

/// Outcome of one suite.
#[derive(Clone, Debug, Serialize)]
pub struct SuiteReport {
    pub name: &'static str,
    pub pass: bool,
    pub summary: String,
    #[serde(skip)]
    pub csv: String,
}

type SuiteFn = fn() -> Result<SuiteReport>;

/// Suite names in reporting order.
pub const SUITES: &[(&str, SuiteFn)] = &[
    ("gauss", gauss),
    ("weil", weil),
    ("poisson-agreement", poisson_agreement),
    ("constant-a", constant_a_closed_form),
    ("integral", integral),
    ("main-term", main_term),
    ("holder", holder_points),
    ("avg-osc", avg_osc),
    ("turan", turan),
    ("cantor", cantor_dims),
    ("spectrum", spectrum),
];

/// Looks up a suite by name.
pub fn find(name: &str) -> Option<SuiteFn> {
    SUITES.iter().find(|(n, _)| *n == name).map(|(_, f)| *f)
}

pub fn names() -> Vec<&'static str> {
    SUITES.iter().map(|(n, _)| *n).collect()
}

/// Runs `f` on a dedicated pool of `threads` workers.
pub fn with_threads<T: Send>(threads: usize, f: impl FnOnce() -> T + Send) -> Result<T> {
    let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build()?;
    Ok(pool.install(f))
}

fn report(name: &'static str, pass: bool, summary: String, csv: CsvTable) -> Result<SuiteReport> {
    Ok(SuiteReport {
        name,
        pass,
        summary,
        csv: csv.to_csv(),
    })
}

fn poly(s: &str) -> Result<IntPolynomial> {
    s.parse().map_err(|e| anyhow!("{e}"))
}

/// `|tau_0(a, q)| = sqrt(q)` for `P = n^2` at odd primes `q <= 997`, and
/// `tau_0(1, 2) = 0`.
pub fn gauss() -> Result<SuiteReport> {
    const REL_TOL: f64 = 1e-9;
    const ZERO_TOL: f64 = 1e-12;
    let square = poly("n^2")?;
    let mut csv = CsvTable::new(&["q", "max_rel_dev", "pass"]);
    let mut worst: f64 = 0.0;
    let mut pass = true;
    for q in primes_in(3, 998) {
        let table = ResidueTable::new(q);
        let taus = tau0_all_a(&square, q, &table);
        let root = (q as f64).sqrt();
        let dev = taus[1..].iter().map(|t| (t.norm() - root).abs() / root).fold(0.0, f64::max);
        let ok = dev <= REL_TOL;
        pass &= ok;
        worst = worst.max(dev);
        csv.push(vec![q.to_string(), fmt17(dev), ok.to_string()]);
    }
    let two = tau0_all_a(&square, 2, &ResidueTable::new(2))[1].norm();
    let two_ok = two <= ZERO_TOL;
    pass &= two_ok;
    csv.push(vec!["2".into(), fmt17(two), two_ok.to_string()]);
    report(
        "gauss",
        pass,
        format!("odd primes <= 997: max relative deviation {worst:.2e} (tol {REL_TOL:e}); |tau_0(1,2)| = {two:.2e}"),
        csv,
    )
}

/// `|tau_m| <= (k-1) sqrt(q) + 1e-6` for two cubics at primes `5..=499`.
pub fn weil() -> Result<SuiteReport> {
    let qs = primes_in(5, 500);
    let mut csv = CsvTable::new(&["poly", "q", "rows", "max_ratio", "failures"]);
    let mut failures = 0;
    let mut excluded = 0;
    let mut worst: f64 = 0.0;
    for name in ["n^3 + n", "n^3 + n^2 + 1"] {
        let p = poly(name)?;
        let rep = bound_report(&p, &qs, 0..500, 0..500)?;
        for &q in &qs {
            let rows: Vec<_> = rep.rows.iter().filter(|r| r.q == q).collect();
            let bound = 2.0 * (q as f64).sqrt();
            let ratio = rows
                .iter()
                .filter(|r| r.weil.is_some())
                .map(|r| r.value.norm() / bound)
                .fold(0.0, f64::max);
            let fails = rows.iter().filter(|r| r.weil == Some(false)).count();
            excluded += rows.iter().filter(|r| r.weil.is_none()).count();
            worst = worst.max(ratio);
            failures += fails;
            csv.push(vec![
                p.to_ascii(),
                q.to_string(),
                rows.len().to_string(),
                fmt17(ratio),
                fails.to_string(),
            ]);
        }
    }
    report(
        "weil",
        failures == 0,
        format!("{failures} violations; max |tau_m| / (2 sqrt q) = {worst:.4}; {excluded} constant-phase rows (a = m = 0) excluded"),
        csv,
    )
}

/// Poisson expansion against direct summation on the fixed grid.
pub fn poisson_agreement() -> Result<SuiteReport> {
    const TOL: f64 = 1e-9;
    const REL_LIMIT: f64 = 1e-6;
    const REL_FLOOR: f64 = 1e-8;
    let mut csv = CsvTable::new(&[
        "poly",
        "alpha",
        "q",
        "a",
        "h",
        "direct_re",
        "direct_im",
        "diff",
        "budget",
        "rel",
        "pass",
    ]);
    let (mut pass, mut count, mut worst_rel, mut worst_budget): (bool, usize, f64, f64) = (true, 0, 0.0, 0.0);
    for (name, alpha) in [("n^2", 2.0), ("n^3", 2.6)] {
        let params = SeriesParams::parse(name, alpha)?;
        for q in [7u64, 11, 31] {
            for h in [1e-4, 1e-5, 1e-6] {
                let rows: Vec<_> = (1..q)
                    .filter(|&a| gcd(a, q) == 1)
                    .map(|a| -> Result<_> {
                        let d = eval_delta_direct(&params, a, q, h, TOL)?;
                        let p = poisson_delta(&params, a, q, h, TOL)?;
                        Ok((a, d, p))
                    })
                    .collect::<Result<_>>()?;
                for (a, d, p) in rows {
                    let diff = (p.total - d.value).norm();
                    let budget = p.err_budget + d.err_budget;
                    let rel = if d.value.norm() > REL_FLOOR { diff / d.value.norm() } else { 0.0 };
                    let ok = diff <= budget && rel <= REL_LIMIT;
                    pass &= ok;
                    count += 1;
                    worst_rel = worst_rel.max(rel);
                    worst_budget = worst_budget.max(diff / budget);
                    csv.push(vec![
                        params.label(),
                        fmt17(alpha),
                        q.to_string(),
                        a.to_string(),
                        fmt17(h),
                        fmt17(d.value.re),
                        fmt17(d.value.im),
                        fmt17(diff),
                        fmt17(budget),
                        fmt17(rel),
                        ok.to_string(),
                    ]);
                }
            }
        }
    }
    report(
        "poisson-agreement",
        pass,
        format!("{count} points: max diff/budget {worst_budget:.2e}, max relative {worst_rel:.2e} (limit {REL_LIMIT:e})"),
        csv,
    )
}

/// `A = -pi sqrt 2 e^{-i pi/4}` for `k = 2`, `alpha = 2`.
pub fn constant_a_closed_form() -> Result<SuiteReport> {
    const TOL: f64 = 1e-12;
    let a = constant_a(&SeriesParams::parse("n^2", 2.0)?)?;
    let pi = std::f64::consts::PI;
    let expected = -Complex64::from_polar(pi * 2f64.sqrt(), -pi / 4.0);
    let err = (a - expected).norm();
    let mut csv = CsvTable::new(&["re", "im", "expected_re", "expected_im", "error"]);
    csv.push(vec![fmt17(a.re), fmt17(a.im), fmt17(expected.re), fmt17(expected.im), fmt17(err)]);
    report(
        "constant-a",
        err <= TOL,
        format!("|A - closed form| = {err:.2e} (tol {TOL:e})"),
        csv,
    )
}

/// `|I(h) h^{-(alpha-1)/k} - A| / h^{1/3}` stays within a factor 2 for `u^3`.
pub fn integral() -> Result<SuiteReport> {
    const SPREAD: f64 = 2.0;
    let params = SeriesParams::parse("n^3", 2.6)?;
    let mut csv = CsvTable::new(&["h", "re", "im", "residual_re", "residual_im", "scaled_residual"]);
    let mut scaled = Vec::new();
    for h in [1e-4, 1e-5, 1e-6] {
        let r = osc_integral(&params, h)?;
        scaled.push(r.scaled_residual);
        csv.push(vec![
            fmt17(h),
            fmt17(r.value.re),
            fmt17(r.value.im),
            fmt17(r.residual.re),
            fmt17(r.residual.im),
            fmt17(r.scaled_residual),
        ]);
    }
    let c = scaled.iter().cloned().fold(0.0, f64::max);
    let lo = scaled.iter().cloned().fold(f64::INFINITY, f64::min);
    report(
        "integral",
        lo > 0.0 && c / lo <= SPREAD,
        format!(
            "fitted C = {c:.4e}; scaled residuals {scaled:.4?} stay within x{:.3} (limit x{SPREAD})",
            c / lo
        ),
        csv,
    )
}

/// `|Delta F - main| / (h |log h| sqrt q c) <= 1` with `c` fitted at the
/// coarsest step.
pub fn main_term() -> Result<SuiteReport> {
    const SAMPLES: usize = 20;
    const REL_TOL: f64 = 1e-3;
    let steps: [f64; 3] = [1e-5, 1e-6, 1e-7];
    let params = SeriesParams::parse("n^2", 2.0)?;
    let mut rng = ChaCha8Rng::seed_from_u64(SEED);
    let mut rows = Vec::new();
    for q in [101u64, 211] {
        let mut picks: Vec<u64> = sample(&mut rng, q as usize - 1, SAMPLES)
            .into_iter()
            .map(|i| i as u64 + 1)
            .collect();
        picks.sort_unstable();
        for &h in &steps {
            let scale = h * h.ln().abs() * (q as f64).sqrt();
            for &a in &picks {
                rows.push(main_term_residual(&params, a, q, h, REL_TOL * scale)?);
            }
        }
    }
    let c = rows
        .iter()
        .filter(|r| r.h == steps[0])
        .map(|r| r.normalized_log)
        .fold(0.0, f64::max);
    let mut csv = CsvTable::new(&[
        "q",
        "a",
        "h",
        "delta_re",
        "delta_im",
        "main_re",
        "main_im",
        "normalized_log",
        "ratio",
    ]);
    let mut worst: f64 = 0.0;
    for r in &rows {
        let ratio = r.normalized_log / c;
        worst = worst.max(ratio);
        csv.push(vec![
            r.q.to_string(),
            r.a.to_string(),
            fmt17(r.h),
            fmt17(r.delta.re),
            fmt17(r.delta.im),
            fmt17(r.main_term.re),
            fmt17(r.main_term.im),
            fmt17(r.normalized_log),
            fmt17(ratio),
        ]);
    }
    let finer = |h: f64| rows.iter().filter(|r| r.h == h).map(|r| r.normalized_log / c).fold(0.0, f64::max);
    report(
        "main-term",
        c > 0.0 && worst <= 1.0,
        format!(
            "c = {c:.4} fitted at h = 1e-5; max ratio at 1e-6: {:.3}, at 1e-7: {:.3}",
            finer(steps[1]),
            finer(steps[2])
        ),
        csv,
    )
}

/// Point exponents of `sum e(n^2 x) / n^2` at three kinds of points.
pub fn holder_points() -> Result<SuiteReport> {
    let params = SeriesParams::parse("n^2", 2.0)?;
    let golden = BasePoint::Real {
        x: HighPrecisionReal::golden(256).to_turn(),
        label: "golden".into(),
    };
    let checks = [
        (golden, 8, 26, Increment::First, 0.75, 0.07),
        (BasePoint::Rational { a: 1, q: 3 }, 8, 26, Increment::First, 0.5, 0.07),
        (BasePoint::Rational { a: 1, q: 2 }, 6, 14, Increment::Second, 1.5, 0.1),
    ];
    let mut csv = CsvTable::new(&["base", "j", "h_lo", "sup", "log2_sup", "residual", "beta_hat"]);
    let mut pass = true;
    let mut parts = Vec::new();
    for (base, j_min, j_max, increment, target, tol) in checks {
        let cfg = HolderConfig {
            samples: 16,
            increment,
            ..HolderConfig::default()
        };
        let est = beta_estimate(&params, &base, j_min, j_max, &cfg)?;
        let ok = (est.beta_hat - target).abs() <= tol;
        pass &= ok;
        parts.push(format!("{}: {:.3} (target {target} +- {tol})", est.base, est.beta_hat));
        csv.rows.extend(est.to_csv().rows);
    }
    report("holder", pass, parts.join("; "), csv)
}

/// The `H`-exponent of the mean squared window supremum at `q = 127`.
pub fn avg_osc() -> Result<SuiteReport> {
    const TARGET: f64 = 1.5;
    const TOL: f64 = 0.1;
    let params = SeriesParams::parse("n^2", 2.0)?;
    let cfg = AvgConfig::default();
    let mut csv = CsvTable::new(&["q", "H", "average"]);
    let (mut xs, mut ys) = (Vec::new(), Vec::new());
    for j in 6..=10 {
        let big_h = (-(j as f64)).exp2();
        let rec = avg_osc_single_q(&params, 127, big_h, &cfg)?;
        xs.push(big_h.ln());
        ys.push(rec.average.ln());
        csv.push(vec!["127".into(), fmt17(big_h), fmt17(rec.average)]);
    }
    let slope = fit_line(&xs, &ys)?.slope;
    report(
        "avg-osc",
        (slope - TARGET).abs() <= TOL,
        format!("fitted exponent {slope:.4} over H = 2^-6..2^-10 (target {TARGET} +- {TOL})"),
        csv,
    )
}

/// Random admissible instances of both Turán-type lemmas.
pub fn turan() -> Result<SuiteReport> {
    const INSTANCES: usize = 1000;
    let mut rng = ChaCha8Rng::seed_from_u64(SEED);
    let mut csv = CsvTable::new(&["kind", "index", "n", "q", "lo", "hi", "m", "h", "pass"]);
    let mut fraction_fails = 0;
    for i in 0..INSTANCES {
        let n = rng.gen_range(1..=6usize);
        let q = rng.gen_range(40..=2000u64);
        let mut lambdas: Vec<i64> = Vec::with_capacity(n);
        while lambdas.len() < n {
            let l = rng.gen_range(-(q as i64)..q as i64);
            if lambdas.iter().all(|&m| (m - l).rem_euclid(q as i64) != 0) {
                lambdas.push(l);
            }
        }
        let min_width = (n * n) as f64 / q as f64;
        let width = rng.gen_range(min_width..=1.0f64.max(min_width)).min(1.0);
        let lo = rng.gen_range(0.0..=1.0 - width);
        let out = turan_fraction(&TuranInstance {
            lambdas,
            q,
            interval: (lo, lo + width),
        })?;
        fraction_fails += usize::from(!out.pass);
        csv.push(vec![
            "fraction".into(),
            i.to_string(),
            n.to_string(),
            q.to_string(),
            fmt17(lo),
            fmt17(lo + width),
            String::new(),
            String::new(),
            out.pass.to_string(),
        ]);
    }
    let mut power_fails = 0;
    for i in 0..INSTANCES {
        let n = rng.gen_range(1..=8usize);
        let h = rng.gen_range(n as u64..=64);
        let m = rng.gen_range(0..=32u64);
        let z: Vec<Complex64> = (0..n)
            .map(|_| Complex64::from_polar(1.0 + rng.gen_range(0.0..0.5), TAU * rng.gen::<f64>()))
            .collect();
        let b: Vec<Complex64> = (0..n)
            .map(|_| Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
            .collect();
        let out = power_sum_bounds(&b, &z, m, h)?;
        let ok = out.first_pass && out.second_pass;
        power_fails += usize::from(!ok);
        csv.push(vec![
            "power".into(),
            i.to_string(),
            n.to_string(),
            String::new(),
            String::new(),
            String::new(),
            m.to_string(),
            h.to_string(),
            ok.to_string(),
        ]);
    }
    report(
        "turan",
        fraction_fails == 0 && power_fails == 0,
        format!("turan_fraction: {fraction_fails}/{INSTANCES} failures; power_sum_bounds: {power_fails}/{INSTANCES} failures"),
        csv,
    )
}

/// The tree used for the unramified dimension check: `P = n^2`, `r = 3`,
/// `Q_1 = 1000`, `Q_2 = ceil(Q_1^2.35)`, two extreme children per parent.
pub fn acceptance_tree() -> Result<GenerationTree> {
    let params = SeriesParams::parse("n^2", 2.0)?;
    let sched = cantor::schedule(1000, 2.35, 2, u64::MAX, 3)?;
    let mut tree = GenerationTree::new(TreeMode::Unramified, 3, sched.qs)?;
    build_generation(
        &mut tree,
        &params,
        &BuildConfig {
            keep: Keep::All,
            ..BuildConfig::default()
        },
    )?;
    build_generation(
        &mut tree,
        &params,
        &BuildConfig {
            keep: Keep::Extremes,
            ..BuildConfig::default()
        },
    )?;
    restrict_sparse(&mut tree, 1, 2, 0.0)?;
    Ok(tree)
}

/// Dimension formulas on the middle-thirds fixture and the unramified tree.
pub fn cantor_dims() -> Result<SuiteReport> {
    const LIMIT_TOL: f64 = 1e-3;
    const BOX_TOL: f64 = 0.02;
    let log3_2 = 2f64.ln() / 3f64.ln();
    let mut csv = CsvTable::new(&["check", "value", "target", "pass"]);
    let mut row = |check: &str, value: f64, target: String, ok: bool| csv.push(vec![check.into(), fmt17(value), target, ok.to_string()]);

    let thirds = cantor::middle_thirds(12)?;
    let bounds = dim_bounds(&thirds)?;
    let lower = bounds.lower_extrapolated.ok_or_else(|| anyhow!("no extrapolated lower bound"))?;
    let upper = bounds.upper_extrapolated.ok_or_else(|| anyhow!("no extrapolated upper bound"))?;
    let lower_ok = (lower - log3_2).abs() <= LIMIT_TOL;
    let upper_ok = (upper - log3_2).abs() <= LIMIT_TOL;
    row("thirds_lower_limit", lower, fmt17(log3_2), lower_ok);
    row("thirds_upper_limit", upper, fmt17(log3_2), upper_ok);
    let raw_lower = bounds.lower.unwrap_or(f64::NAN);
    row("thirds_lower_depth12", raw_lower, String::new(), true);
    row("thirds_upper_depth12", bounds.upper, String::new(), true);

    let gen8 = cantor::middle_thirds(8)?;
    let boxes = cantor::box_dim(&gen8.deepest_live(), &cantor::dyadic_eps_grid(8, 48, 4))?;
    let box_ok = (boxes.slope - log3_2).abs() <= BOX_TOL;
    row("thirds_box_gen8", boxes.slope, fmt17(log3_2), box_ok);

    let tree = acceptance_tree()?;
    let dims = dim_bounds(&tree)?;
    let tree_lower = dims.lower.ok_or_else(|| anyhow!("lower bound undefined: {:?}", dims.flags))?;
    let tree_ok = (0.5..=0.8).contains(&tree_lower);
    row("unramified_lower", tree_lower, "[0.5, 0.8]".into(), tree_ok);
    row("unramified_upper", dims.upper, String::new(), true);
    row("unramified_bias", tree_lower - 2.0 / 3.0, String::new(), true);

    report(
        "cantor",
        lower_ok && upper_ok && box_ok && tree_ok,
        format!(
            "middle thirds depth 12: limits {lower:.5} / {upper:.5} (raw lower {raw_lower:.4}); box gen 8 {:.4}; unramified lower {tree_lower:.4}, upper {:.4}, bias vs 2/3 {:+.4}",
            boxes.slope,
            dims.upper,
            tree_lower - 2.0 / 3.0
        ),
        csv,
    )
}

/// `lower <= upper`, `upper(0) = 0` and `upper -> 1` at the grid edge.
pub fn spectrum() -> Result<SuiteReport> {
    const EDGE_TOL: f64 = 1e-6;
    let mut csv = CsvTable::new(&["k", "nu_f", "nu_0", "rows", "ordered", "upper_at_0", "upper_at_edge"]);
    let mut pass = true;
    let mut worst_edge: f64 = 0.0;
    for k in 2u32..=8 {
        for nu_f in 1..k {
            let nu_0 = nu_f.max(2);
            let s = spectrum_bounds(k, nu_0, 256)?;
            let ordered = s.rows.iter().all(|r| r.lower <= r.upper);
            let first = s.rows.first().map_or(f64::NAN, |r| r.upper);
            let edge = s.rows.last().map_or(f64::NAN, |r| r.upper);
            worst_edge = worst_edge.max((edge - 1.0).abs());
            pass &= ordered && first == 0.0 && (edge - 1.0).abs() <= EDGE_TOL;
            csv.push(vec![
                k.to_string(),
                nu_f.to_string(),
                nu_0.to_string(),
                s.rows.len().to_string(),
                ordered.to_string(),
                fmt17(first),
                fmt17(edge),
            ]);
        }
    }
    report(
        "spectrum",
        pass,
        format!("k = 2..8, all nu_F: ordering holds: {pass}; max |upper(edge) - 1| = {worst_edge:.2e}"),
        csv,
    )
}
