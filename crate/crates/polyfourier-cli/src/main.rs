//! `polyfourier`: batch driver for the numerics, writing CSV/JSON artifacts and
//! a manifest per run.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use polyfourier::cantor::{self, build_generation, dim_bounds, restrict_sparse, BuildConfig, GenerationTree, Keep, TreeMode};
use polyfourier::diophantine::{approx_exponents, cf_convergents, point_with_exponent, HighPrecisionReal, DEFAULT_BITS};
use polyfourier::expsum::{bound_report, tau_census, turan_fraction, TuranInstance};
use polyfourier::holder::{
    avg_osc_qrange, avg_osc_single_q, beta_estimate, exceptional_census, spectrum_bounds, AvgConfig, BasePoint, Exceptional, HolderConfig,
    Increment,
};
use polyfourier::numeric::{fit_line, gcd, Turn};
use polyfourier::output::{fmt17, CsvTable};
use polyfourier::polynomials::IntPolynomial;
use polyfourier::series::{
    eval_delta_direct, eval_delta_real, main_term_residual, osc_integral, poisson_delta, DirectConfig, SeriesParams,
};
use polyfourier_cli::config::{config_to_args, UsageError};
use polyfourier_cli::manifest::{unix_now, OutputDir, RunManifest, MANIFEST_FILE};
use polyfourier_cli::suites;
use serde_json::json;

/// Environment variable that overrides the worker thread count.
const THREADS_ENV: &str = "POLYFOURIER_THREADS";

#[derive(Parser, Debug)]
#[command(name = "polyfourier", version, about = "Numerical experiments on polynomial Fourier series")]
struct Cli {
    /// Output directory for artifacts and the manifest.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
    /// Worker threads (overridden by POLYFOURIER_THREADS).
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Seed for randomized commands.
    #[arg(long, global = true, default_value_t = suites::SEED)]
    seed: u64,
    /// Read the command and its options from a TOML file.
    #[arg(long)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Option<Command>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Complete exponential sums with Weil, Gauss and Hua audits.
    Expsum(ExpsumArgs),
    /// Fractions a/q in an interval with large tau_0.
    TauCensus(TauCensusArgs),
    /// Fraction of large exponential sums over a/q in an interval.
    Turan(TuranArgs),
    /// Oscillations Delta F by direct summation.
    Series(SeriesArgs),
    /// Oscillations Delta F by the Poisson expansion.
    Poisson(PoissonArgs),
    /// The oscillatory integral I(h) and its asymptotic residual.
    Integral(IntegralArgs),
    /// Residual of the main-term asymptotics at rationals.
    Asymp(AsympArgs),
    /// Continued fraction and approximation exponents of a real.
    Cf(CfArgs),
    /// A point with prescribed approximation exponent.
    Point(PointArgs),
    /// Pointwise Hölder exponent by dyadic regression.
    Holder(HolderArgs),
    /// Averaged oscillations over residues.
    AvgOsc(AvgOscArgs),
    /// Census of an exceptional set.
    Census(CensusArgs),
    /// Build a Cantor-type tree and evaluate the dimension formulas.
    Cantor(CantorArgs),
    /// Lower and upper bounds for the spectrum of singularities.
    Spectrum(SpectrumArgs),
    /// Run acceptance suites (all when none are named).
    Verify(VerifyArgs),
    /// Repeat the run described by a manifest and compare output digests.
    Replay(ReplayArgs),
}

#[derive(Args, Debug)]
struct SeriesOpts {
    /// Integer polynomial, e.g. "n^2" or "n^3 + n".
    #[arg(long, default_value = "n^2")]
    poly: String,
    #[arg(long, default_value_t = 2.0)]
    alpha: f64,
}

impl SeriesOpts {
    fn params(&self) -> Result<SeriesParams> {
        Ok(SeriesParams::parse(&self.poly, self.alpha)?)
    }
}

#[derive(Args, Debug)]
struct ExpsumArgs {
    #[arg(long)]
    poly: String,
    /// Moduli, comma separated.
    #[arg(long, value_delimiter = ',', required = true)]
    q: Vec<u64>,
    #[arg(long, default_value_t = 1)]
    a: u64,
    #[arg(long, default_value_t = 0)]
    m: u64,
    /// Every a in [0, q).
    #[arg(long)]
    all_a: bool,
    /// Every m in [0, q).
    #[arg(long)]
    all_m: bool,
}

#[derive(Args, Debug)]
struct TauCensusArgs {
    #[arg(long)]
    poly: String,
    #[arg(long, default_value_t = 0.0)]
    lo: f64,
    #[arg(long, default_value_t = 1.0)]
    hi: f64,
    /// Primes are taken from [Q, 2Q).
    #[arg(long = "big-q")]
    big_q: u64,
    #[arg(long, default_value_t = 0.1)]
    eps: f64,
    /// Threshold C of the condition Q |I|^(2+eps) > C.
    #[arg(long = "c", default_value_t = 1.0)]
    c_threshold: f64,
}

#[derive(Args, Debug)]
struct TuranArgs {
    /// Frequencies, comma separated.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true, required = true)]
    lambdas: Vec<i64>,
    #[arg(long)]
    q: u64,
    #[arg(long, default_value_t = 0.0)]
    lo: f64,
    #[arg(long, default_value_t = 1.0)]
    hi: f64,
}

#[derive(Args, Debug)]
struct SeriesArgs {
    #[command(flatten)]
    series: SeriesOpts,
    /// Base point: "a/q", "golden", "quad:p,d,q" or a decimal in [0, 1).
    #[arg(long, default_value = "1/3")]
    base: String,
    /// Steps, comma separated.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true, required = true)]
    h: Vec<f64>,
    #[arg(long, default_value_t = 1e-9)]
    tol: f64,
}

#[derive(Args, Debug)]
struct PoissonArgs {
    #[command(flatten)]
    series: SeriesOpts,
    #[arg(long)]
    a: u64,
    #[arg(long)]
    q: u64,
    #[arg(long, allow_hyphen_values = true)]
    h: f64,
    #[arg(long, default_value_t = 1e-9)]
    tol: f64,
    /// Also evaluate by direct summation and report the difference.
    #[arg(long)]
    compare: bool,
}

#[derive(Args, Debug)]
struct IntegralArgs {
    #[command(flatten)]
    series: SeriesOpts,
    #[arg(long, value_delimiter = ',', required = true)]
    h: Vec<f64>,
}

#[derive(Args, Debug)]
struct AsympArgs {
    #[command(flatten)]
    series: SeriesOpts,
    #[arg(long)]
    q: u64,
    /// Residues, comma separated; every a coprime to q when omitted.
    #[arg(long, value_delimiter = ',')]
    a: Vec<u64>,
    #[arg(long, value_delimiter = ',', required = true)]
    h: Vec<f64>,
    /// Tolerance relative to h |log h| sqrt(q).
    #[arg(long, default_value_t = 1e-3)]
    rel_tol: f64,
}

#[derive(Args, Debug)]
struct CfArgs {
    /// "a/q", "golden", "quad:p,d,q" for (p + sqrt d)/q.
    #[arg(long)]
    x: String,
    #[arg(long, default_value_t = 40)]
    terms: usize,
    #[arg(long, default_value_t = DEFAULT_BITS)]
    bits: u32,
    /// Trailing window for the limsup estimate.
    #[arg(long, default_value_t = 10)]
    window: usize,
}

#[derive(Args, Debug)]
struct PointArgs {
    #[arg(long)]
    r: f64,
    /// Make every other convergent denominator odd.
    #[arg(long)]
    odd: bool,
    #[arg(long, default_value_t = 256)]
    min_bits: u64,
    #[arg(long, default_value_t = 10)]
    window: usize,
}

#[derive(Args, Debug)]
struct HolderArgs {
    #[command(flatten)]
    series: SeriesOpts,
    /// Base point: "a/q", "golden", "quad:p,d,q" or a decimal in [0, 1).
    #[arg(long)]
    base: String,
    #[arg(long, default_value_t = 8)]
    j_min: i32,
    #[arg(long, default_value_t = 20)]
    j_max: i32,
    #[arg(long, default_value_t = 16)]
    samples: usize,
    /// Use second-order increments (exponents in (1, 2)).
    #[arg(long)]
    second: bool,
    #[arg(long, default_value_t = 1e-3)]
    rel_tol: f64,
}

#[derive(Args, Debug)]
struct AvgOscArgs {
    #[command(flatten)]
    series: SeriesOpts,
    /// Single modulus.
    #[arg(long, conflicts_with = "big_q")]
    q: Option<u64>,
    /// Average over moduli in [Q, 2Q) instead.
    #[arg(long = "big-q")]
    big_q: Option<u64>,
    /// Window starts H, comma separated.
    #[arg(long = "big-h", value_delimiter = ',', required = true)]
    big_h: Vec<f64>,
    #[arg(long, default_value_t = 16)]
    samples: usize,
    #[arg(long, default_value_t = 1e-3)]
    rel_tol: f64,
    /// Exponent eps of the range-averaged statement.
    #[arg(long, default_value_t = 0.0)]
    eps: f64,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum WhichSet {
    Cheby,
    Bq,
}

#[derive(Args, Debug)]
struct CensusArgs {
    #[command(flatten)]
    series: SeriesOpts,
    #[arg(long)]
    q: u64,
    #[arg(long, default_value_t = 1)]
    q_tilde: u64,
    #[arg(long, default_value_t = 3.0)]
    r: f64,
    #[arg(long, default_value_t = 0.0)]
    eps: f64,
    #[arg(long, value_enum, default_value = "bq")]
    which: WhichSet,
    #[arg(long, default_value_t = 16)]
    samples: usize,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum CantorKind {
    Unramified,
    Ramified,
    MiddleThirds,
}

#[derive(Args, Debug)]
struct CantorArgs {
    #[command(flatten)]
    series: SeriesOpts,
    #[arg(long, value_enum, default_value = "unramified")]
    kind: CantorKind,
    #[arg(long, default_value_t = 3)]
    r: u32,
    #[arg(long, default_value_t = 1000)]
    q1: u64,
    /// Schedule growth g in Q_(i+1) = ceil(Q_i^g).
    #[arg(long, default_value_t = 2.35)]
    growth: f64,
    /// Generations below the root.
    #[arg(long, default_value_t = 2)]
    depth: usize,
    /// Largest admissible Q_i.
    #[arg(long, default_value_t = 1 << 40)]
    cap: u64,
    /// First generation that keeps only the two extreme children per parent.
    #[arg(long, default_value_t = 2)]
    extremes_from: usize,
    /// Drop parents with fewer live children than this (0 disables).
    #[arg(long, default_value_t = 2)]
    min_children: u64,
    /// Also estimate the box-counting dimension of the deepest generation.
    #[arg(long)]
    box_count: bool,
}

#[derive(Args, Debug)]
struct SpectrumArgs {
    #[arg(long)]
    k: u32,
    #[arg(long, default_value_t = 2)]
    nu0: u32,
    #[arg(long, default_value_t = 256)]
    grid: usize,
}

#[derive(Args, Debug)]
struct VerifyArgs {
    suites: Vec<String>,
}

#[derive(Args, Debug)]
struct ReplayArgs {
    /// Manifest written by an earlier run.
    manifest: PathBuf,
}

fn main() -> ExitCode {
    let argv: Vec<String> = std::env::args().collect();
    match run(argv) {
        Ok(code) => code,
        Err(err) => {
            let (kind, code) = classify(&err);
            eprintln!("{}", json!({ "error": kind, "message": format!("{err:#}") }));
            ExitCode::from(code)
        }
    }
}

fn classify(err: &anyhow::Error) -> (&'static str, u8) {
    if err.downcast_ref::<UsageError>().is_some() {
        return ("usage", 2);
    }
    match err.chain().find_map(|e| e.downcast_ref::<polyfourier::Error>()) {
        Some(e) => (e.kind(), 1),
        None => ("runtime", 1),
    }
}

/// Parses `argv`, expanding `--config`, into the effective arguments.
fn parse(argv: &[String]) -> Result<(Cli, Vec<String>)> {
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e)
            if matches!(
                e.kind(),
                clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion
            ) =>
        {
            e.exit();
        }
        Err(e) => return Err(UsageError(e.render().to_string()).into()),
    };
    let Some(path) = &cli.config else {
        if cli.command.is_none() {
            return Err(UsageError("no command given; see --help".into()).into());
        }
        return Ok((cli, argv[1..].to_vec()));
    };
    if cli.command.is_some() {
        return Err(UsageError("--config cannot be combined with a command".into()).into());
    }
    let text = std::fs::read_to_string(path).map_err(|e| UsageError(format!("cannot read config {}: {e}", path.display())))?;
    let mut expanded = config_to_args(&text)?;
    // Command-line globals take precedence over the config's.
    let mut args = Vec::new();
    for (i, a) in argv.iter().enumerate().skip(1) {
        if a == "--config" || argv.get(i.wrapping_sub(1)).is_some_and(|p| p == "--config") || a.starts_with("--config=") {
            continue;
        }
        args.push(a.clone());
    }
    args.append(&mut expanded);
    let mut full = vec![argv[0].clone()];
    full.extend(args.iter().cloned());
    let cli = Cli::try_parse_from(&full).map_err(|e| UsageError(format!("config: {}", e.render())))?;
    Ok((cli, args))
}

fn thread_count(cli: &Cli) -> Result<usize> {
    if let Ok(v) = std::env::var(THREADS_ENV) {
        return v
            .trim()
            .parse::<usize>()
            .ok()
            .filter(|&n| n > 0)
            .ok_or_else(|| UsageError(format!("{THREADS_ENV} = {v:?} is not a positive integer")).into());
    }
    match cli.threads {
        Some(0) => Err(UsageError("--threads must be positive".into()).into()),
        Some(n) => Ok(n),
        None => Ok(std::thread::available_parallelism().map_or(1, |n| n.get())),
    }
}

fn run(argv: Vec<String>) -> Result<ExitCode> {
    let (cli, args) = parse(&argv)?;
    let threads = thread_count(&cli)?;
    let command = cli.command.as_ref().expect("parse guarantees a command");
    if let Command::Replay(r) = command {
        return replay(&r.manifest, &cli.out, threads);
    }
    execute(&cli, command, args, threads)
}

/// Runs a command in a pool of `threads` workers and writes its manifest.
fn execute(cli: &Cli, command: &Command, args: Vec<String>, threads: usize) -> Result<ExitCode> {
    let started = unix_now();
    let mut out = OutputDir::create(&cli.out)?;
    let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build()?;
    let result = pool.install(|| dispatch(command, cli.seed, &mut out));
    let manifest = RunManifest {
        tool: env!("CARGO_PKG_NAME").to_string(),
        version: env!("CARGO_PKG_VERSION").to_string(),
        args,
        seed: cli.seed,
        threads,
        started_unix: started,
        finished_unix: unix_now(),
        outputs: out.digests().to_vec(),
        partial: result.is_err(),
        error: result.as_ref().err().map(|e| format!("{e:#}")),
    };
    let text = serde_json::to_string_pretty(&manifest)? + "\n";
    std::fs::write(out.path().join(MANIFEST_FILE), text)?;
    let passed = result?;
    println!(
        "{}",
        json!({ "status": if passed { "ok" } else { "fail" }, "out": cli.out, "outputs": manifest.outputs })
    );
    Ok(if passed { ExitCode::SUCCESS } else { ExitCode::from(1) })
}

/// Runs one command. Returns `false` when a verification failed.
fn dispatch(command: &Command, seed: u64, out: &mut OutputDir) -> Result<bool> {
    match command {
        Command::Expsum(a) => expsum(a, out),
        Command::TauCensus(a) => tau_census_cmd(a, out),
        Command::Turan(a) => turan(a, out),
        Command::Series(a) => series(a, out),
        Command::Poisson(a) => poisson(a, out),
        Command::Integral(a) => integral(a, out),
        Command::Asymp(a) => asymp(a, out),
        Command::Cf(a) => cf(a, out),
        Command::Point(a) => point(a, seed, out),
        Command::Holder(a) => holder(a, out),
        Command::AvgOsc(a) => avg_osc(a, out),
        Command::Census(a) => census(a, out),
        Command::Cantor(a) => cantor_cmd(a, out),
        Command::Spectrum(a) => spectrum(a, out),
        Command::Verify(a) => verify(a, out),
        Command::Replay(_) => unreachable!("handled before dispatch"),
    }
    .map(|pass| pass.unwrap_or(true))
}

type Outcome = Result<Option<bool>>;

fn poly(s: &str) -> Result<IntPolynomial> {
    Ok(s.parse::<IntPolynomial>()?)
}

fn parse_real(s: &str, bits: u32) -> Result<HighPrecisionReal> {
    let s = s.trim();
    if s == "golden" {
        return Ok(HighPrecisionReal::golden(bits));
    }
    if let Some(rest) = s.strip_prefix("quad:") {
        let parts: Vec<&str> = rest.split(',').map(str::trim).collect();
        let [p, d, q] = parts[..] else {
            return Err(UsageError(format!("expected quad:p,d,q, got {s:?}")).into());
        };
        let bad = |_| UsageError(format!("bad quadratic irrational {s:?}"));
        return Ok(HighPrecisionReal::quadratic(
            p.parse().map_err(bad)?,
            d.parse().map_err(bad)?,
            q.parse().map_err(bad)?,
            bits,
        )?);
    }
    if let Some((a, q)) = s.split_once('/') {
        let bad = |_| UsageError(format!("bad fraction {s:?}"));
        return Ok(HighPrecisionReal::rational(
            a.trim().parse().map_err(bad)?,
            q.trim().parse().map_err(bad)?,
        )?);
    }
    Err(UsageError(format!("expected a/q, golden or quad:p,d,q, got {s:?}")).into())
}

fn parse_base(s: &str) -> Result<BasePoint> {
    if let Some((a, q)) = s.split_once('/') {
        let bad = |_| UsageError(format!("bad fraction {s:?}"));
        let (a, q): (u64, u64) = (a.trim().parse().map_err(bad)?, q.trim().parse().map_err(bad)?);
        if q == 0 {
            return Err(UsageError("zero denominator".into()).into());
        }
        return Ok(BasePoint::Rational { a: a % q, q });
    }
    if let Ok(x) = s.parse::<f64>() {
        if !(0.0..1.0).contains(&x) {
            return Err(UsageError(format!("base {x} outside [0, 1)")).into());
        }
        return Ok(BasePoint::Real {
            x: Turn::from_f64(x),
            label: s.to_string(),
        });
    }
    Ok(BasePoint::Real {
        x: parse_real(s, DEFAULT_BITS)?.to_turn(),
        label: s.to_string(),
    })
}

fn expsum(args: &ExpsumArgs, out: &mut OutputDir) -> Outcome {
    let p = poly(&args.poly)?;
    let q_max = args.q.iter().copied().max().unwrap_or(1);
    let a_range = if args.all_a { 0..q_max } else { args.a..args.a + 1 };
    let m_range = if args.all_m { 0..q_max } else { args.m..args.m + 1 };
    let rep = bound_report(&p, &args.q, a_range, m_range)?;
    out.write_csv("expsum.csv", &rep.to_csv())?;
    out.write_json(
        "expsum.json",
        &json!({
            "poly": rep.poly,
            "rows": rep.rows.len(),
            "weil_failures": rep.weil_failures(),
            "gauss_failures": rep.gauss_failures(),
            "hua_constant": rep.hua_constant,
        }),
    )?;
    Ok(None)
}

fn tau_census_cmd(args: &TauCensusArgs, out: &mut OutputDir) -> Outcome {
    let p = poly(&args.poly)?;
    let c = tau_census(&p, args.lo, args.hi, args.big_q, args.eps, args.c_threshold)?;
    let mut t = CsvTable::new(&["a", "q", "tau0_re", "tau0_im", "tau0_abs"]);
    for f in &c.fractions {
        t.push(vec![
            f.a.to_string(),
            f.q.to_string(),
            fmt17(f.tau0.re),
            fmt17(f.tau0.im),
            fmt17(f.tau0.norm()),
        ]);
    }
    out.write_csv("tau_census.csv", &t)?;
    out.write_json(
        "tau_census.json",
        &json!({ "count": c.count, "above_threshold": c.above_threshold, "normalized": c.normalized }),
    )?;
    Ok(None)
}

fn turan(args: &TuranArgs, out: &mut OutputDir) -> Outcome {
    let inst = TuranInstance {
        lambdas: args.lambdas.clone(),
        q: args.q,
        interval: (args.lo, args.hi),
    };
    let outcome = turan_fraction(&inst)?;
    out.write_json("turan.json", &json!({ "instance": inst, "outcome": outcome }))?;
    Ok(None)
}

fn series(args: &SeriesArgs, out: &mut OutputDir) -> Outcome {
    let params = args.series.params()?;
    let base = parse_base(&args.base)?;
    let mut t = CsvTable::new(&["base", "h", "re", "im", "abs", "terms", "err_budget"]);
    for &h in &args.h {
        let d = match &base {
            BasePoint::Rational { a, q } => eval_delta_direct(&params, *a, *q, h, args.tol)?,
            BasePoint::Real { x, .. } => eval_delta_real(&params, *x, h, args.tol, &DirectConfig::default())?,
        };
        t.push(vec![
            base.label(),
            fmt17(h),
            fmt17(d.value.re),
            fmt17(d.value.im),
            fmt17(d.value.norm()),
            d.terms.to_string(),
            fmt17(d.err_budget),
        ]);
        out.write_csv("series.csv", &t)?;
    }
    Ok(None)
}

fn poisson(args: &PoissonArgs, out: &mut OutputDir) -> Outcome {
    let params = args.series.params()?;
    let p = poisson_delta(&params, args.a, args.q, args.h, args.tol)?;
    let mut t = CsvTable::new(&["m", "tau_re", "tau_im", "ghat_re", "ghat_im", "term_re", "term_im"]);
    for term in &p.terms {
        t.push(vec![
            term.m.to_string(),
            fmt17(term.tau.re),
            fmt17(term.tau.im),
            fmt17(term.ghat.re),
            fmt17(term.ghat.im),
            fmt17(term.term.re),
            fmt17(term.term.im),
        ]);
    }
    out.write_csv("poisson_terms.csv", &t)?;
    let mut summary = json!({
        "a": p.a, "q": p.q, "h": p.h, "n0": p.n0, "m_min": p.m_min, "m_max": p.m_max,
        "total": [p.total.re, p.total.im], "err_budget": p.err_budget,
        "poisson_part": [p.poisson_part.re, p.poisson_part.im], "remainder": [p.remainder.re, p.remainder.im],
        "tail_estimate": p.tail_estimate, "mesh_error": p.mesh_error,
    });
    let mut pass = None;
    if args.compare {
        let d = eval_delta_direct(&params, args.a, args.q, args.h, args.tol)?;
        let diff = (p.total - d.value).norm();
        let budget = p.err_budget + d.err_budget;
        summary["direct"] = json!([d.value.re, d.value.im]);
        summary["difference"] = json!(diff);
        summary["combined_budget"] = json!(budget);
        pass = Some(diff <= budget);
    }
    out.write_json("poisson.json", &summary)?;
    Ok(pass)
}

fn integral(args: &IntegralArgs, out: &mut OutputDir) -> Outcome {
    let params = args.series.params()?;
    let mut t = CsvTable::new(&["h", "re", "im", "error", "residual_re", "residual_im", "scaled_residual"]);
    for &h in &args.h {
        let r = osc_integral(&params, h)?;
        t.push(vec![
            fmt17(h),
            fmt17(r.value.re),
            fmt17(r.value.im),
            fmt17(r.error),
            fmt17(r.residual.re),
            fmt17(r.residual.im),
            fmt17(r.scaled_residual),
        ]);
        out.write_csv("integral.csv", &t)?;
    }
    Ok(None)
}

fn asymp(args: &AsympArgs, out: &mut OutputDir) -> Outcome {
    let params = args.series.params()?;
    let residues: Vec<u64> = if args.a.is_empty() {
        (1..args.q).filter(|&a| gcd(a, args.q) == 1).collect()
    } else {
        args.a.clone()
    };
    let mut t = CsvTable::new(&[
        "q",
        "a",
        "h",
        "delta_re",
        "delta_im",
        "main_re",
        "main_im",
        "normalized",
        "normalized_log",
        "err_budget",
    ]);
    for &h in &args.h {
        let tol = args.rel_tol * h * h.ln().abs() * (args.q as f64).sqrt();
        for &a in &residues {
            let r = main_term_residual(&params, a, args.q, h, tol)?;
            t.push(vec![
                r.q.to_string(),
                r.a.to_string(),
                fmt17(r.h),
                fmt17(r.delta.re),
                fmt17(r.delta.im),
                fmt17(r.main_term.re),
                fmt17(r.main_term.im),
                fmt17(r.normalized),
                fmt17(r.normalized_log),
                fmt17(r.err_budget),
            ]);
        }
        out.write_csv("asymp.csv", &t)?;
    }
    Ok(None)
}

fn write_expansion(cf: &polyfourier::diophantine::ContinuedFractionExpansion, window: usize, out: &mut OutputDir) -> Result<()> {
    let mut t = CsvTable::new(&["n", "quotient", "num", "den", "r_n"]);
    for (i, (quot, (num, den))) in cf.quotients.iter().zip(&cf.convergents).enumerate() {
        let r = cf.r_n.get(i).copied().flatten().map(fmt17).unwrap_or_else(|| "na".into());
        t.push(vec![(i + 1).to_string(), quot.to_string(), num.to_string(), den.to_string(), r]);
    }
    out.write_csv("cf.csv", &t)?;
    let ex = approx_exponents(cf, window);
    out.write_json("cf.json", &json!({ "expansion": cf, "limsup": ex.limsup, "window": ex.window }))
}

fn cf(args: &CfArgs, out: &mut OutputDir) -> Outcome {
    let x = parse_real(&args.x, args.bits)?;
    let cf = cf_convergents(&x, args.terms)?;
    write_expansion(&cf, args.window, out)?;
    Ok(None)
}

fn point(args: &PointArgs, seed: u64, out: &mut OutputDir) -> Outcome {
    let p = point_with_exponent(args.r, seed, args.odd, args.min_bits)?;
    write_expansion(&p.expansion, args.window, out)?;
    out.write_json(
        "point.json",
        &json!({ "r": args.r, "seed": seed, "x_hex": p.x.to_hex(), "odd_indices": p.odd_indices }),
    )?;
    Ok(None)
}

fn holder(args: &HolderArgs, out: &mut OutputDir) -> Outcome {
    let params = args.series.params()?;
    let base = parse_base(&args.base)?;
    let increment = if args.second { Increment::Second } else { Increment::First };
    let cfg = HolderConfig {
        samples: args.samples,
        increment,
        rel_tol: args.rel_tol,
        ..HolderConfig::default()
    };
    let est = beta_estimate(&params, &base, args.j_min, args.j_max, &cfg)?;
    out.write_csv("holder.csv", &est.to_csv())?;
    out.write_json("holder.json", &json!({ "base": est.base, "beta_hat": est.beta_hat, "stderr": est.stderr, "j_min": est.j_min, "j_max": est.j_max, "increment": est.increment }))?;
    Ok(None)
}

fn avg_osc(args: &AvgOscArgs, out: &mut OutputDir) -> Outcome {
    let params = args.series.params()?;
    let cfg = AvgConfig {
        samples: args.samples,
        rel_tol: args.rel_tol,
        ..AvgConfig::default()
    };
    let mut t = CsvTable::new(&["q", "H", "average"]);
    let (mut xs, mut ys) = (Vec::new(), Vec::new());
    for &big_h in &args.big_h {
        let (label, average) = match (args.q, args.big_q) {
            (Some(q), None) => (q.to_string(), avg_osc_single_q(&params, q, big_h, &cfg)?.average),
            (None, Some(big_q)) => (format!("[{big_q},{})", 2 * big_q), {
                let r = avg_osc_qrange(&params, big_q, big_h, args.eps, &cfg)?;
                r.raw_sum / r.pairs.max(1) as f64
            }),
            _ => bail!(UsageError("give exactly one of --q and --big-q".into())),
        };
        xs.push(big_h.ln());
        ys.push(average.ln());
        t.push(vec![label, fmt17(big_h), fmt17(average)]);
        out.write_csv("avg_osc.csv", &t)?;
    }
    if xs.len() >= 2 {
        let fit = fit_line(&xs, &ys)?;
        out.write_json(
            "avg_osc.json",
            &json!({ "exponent": fit.slope, "stderr": fit.slope_stderr, "expected": (2.0 * params.alpha - 1.0) / params.k as f64 }),
        )?;
    }
    Ok(None)
}

fn census(args: &CensusArgs, out: &mut OutputDir) -> Outcome {
    let params = args.series.params()?;
    let which = match args.which {
        WhichSet::Cheby => Exceptional::Cheby,
        WhichSet::Bq => Exceptional::Bq,
    };
    let cfg = AvgConfig {
        samples: args.samples,
        ..AvgConfig::default()
    };
    let rec = exceptional_census(&params, args.q, args.q_tilde, args.r, args.eps, which, &cfg)?;
    let mut t = CsvTable::new(&["a"]);
    for a in &rec.members {
        t.push(vec![a.to_string()]);
    }
    out.write_csv("census_members.csv", &t)?;
    out.write_json("census.json", &rec)?;
    Ok(None)
}

fn cantor_cmd(args: &CantorArgs, out: &mut OutputDir) -> Outcome {
    let tree = match args.kind {
        CantorKind::MiddleThirds => cantor::middle_thirds(args.depth)?,
        CantorKind::Unramified | CantorKind::Ramified => {
            let params = args.series.params()?;
            let sched = cantor::schedule(args.q1, args.growth, args.depth, args.cap, args.r)?;
            if let Some(w) = &sched.warning {
                eprintln!("{}", json!({ "warning": w }));
            }
            out.write_json("schedule.json", &sched)?;
            let mode = if matches!(args.kind, CantorKind::Ramified) {
                TreeMode::Ramified
            } else {
                TreeMode::Unramified
            };
            let mut tree = GenerationTree::new(mode, args.r, sched.qs.clone())?;
            for i in 1..=sched.qs.len() {
                let keep = if i >= args.extremes_from { Keep::Extremes } else { Keep::All };
                let built = build_generation(
                    &mut tree,
                    &params,
                    &BuildConfig {
                        keep,
                        ..BuildConfig::default()
                    },
                );
                if let Err(e) = built {
                    write_tree(&tree, out)?;
                    return Err(e.into());
                }
            }
            // Restriction counts children, so it runs once every generation exists.
            if args.min_children > 0 {
                for i in 1..tree.depth() {
                    restrict_sparse(&mut tree, i, args.min_children, 0.0)?;
                }
            }
            tree
        }
    };
    write_tree(&tree, out)?;
    if tree.depth() >= 2 {
        out.write_json("dims.json", &dim_bounds(&tree)?)?;
    }
    if args.box_count {
        let boxes = cantor::box_dim(&tree.deepest_live(), &cantor::dyadic_eps_grid(8, 48, 4))?;
        let mut t = CsvTable::new(&["eps", "count"]);
        for (eps, n) in &boxes.counts {
            t.push(vec![fmt17(*eps), n.to_string()]);
        }
        out.write_csv("box_counts.csv", &t)?;
        out.write_json(
            "box_dim.json",
            &json!({ "slope": boxes.slope, "stderr": boxes.stderr, "degenerate": boxes.degenerate }),
        )?;
    }
    Ok(None)
}

fn write_tree(tree: &GenerationTree, out: &mut OutputDir) -> Result<()> {
    out.write_csv("generations.csv", &tree.stats_csv())?;
    out.write_json("tree.json", tree)
}

fn spectrum(args: &SpectrumArgs, out: &mut OutputDir) -> Outcome {
    let s = spectrum_bounds(args.k, args.nu0, args.grid)?;
    out.write_csv("spectrum.csv", &s.to_csv())?;
    Ok(None)
}

fn verify(args: &VerifyArgs, out: &mut OutputDir) -> Outcome {
    let mut chosen = Vec::new();
    for name in &args.suites {
        let f = suites::find(name).ok_or_else(|| UsageError(format!("unknown suite {name:?}; known: {}", suites::names().join(", "))))?;
        chosen.push((name.as_str(), f));
    }
    if chosen.is_empty() {
        chosen = suites::SUITES.to_vec();
    }
    let mut reports = Vec::new();
    for (name, f) in chosen {
        let r = f().with_context(|| format!("suite {name}"))?;
        out.write(&format!("verify_{name}.csv"), r.csv.as_bytes())?;
        reports.push(r);
        out.write_json("verify.json", &reports)?;
    }
    Ok(Some(reports.iter().all(|r| r.pass)))
}

fn replay(manifest_path: &Path, out: &Path, threads: usize) -> Result<ExitCode> {
    let manifest = RunManifest::load(manifest_path)?;
    let mut argv = vec!["polyfourier".to_string()];
    argv.extend(manifest.args.iter().cloned());
    let cli = Cli::try_parse_from(&argv).map_err(|e| UsageError(format!("manifest arguments: {}", e.render())))?;
    let command = cli.command.as_ref().ok_or_else(|| anyhow!("manifest names no command"))?;
    if matches!(command, Command::Replay(_)) {
        return Err(UsageError("a manifest cannot describe a replay".into()).into());
    }
    let mut fresh = OutputDir::create(out)?;
    let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build()?;
    pool.install(|| dispatch(command, cli.seed, &mut fresh))?;
    let mismatched: Vec<&str> = manifest
        .outputs
        .iter()
        .filter(|d| {
            fresh
                .digests()
                .iter()
                .find(|f| f.file == d.file)
                .is_none_or(|f| f.sha256 != d.sha256)
        })
        .map(|d| d.file.as_str())
        .collect();
    let identical = mismatched.is_empty() && fresh.digests().len() == manifest.outputs.len();
    fresh.write_json(
        "replay.json",
        &json!({ "manifest": manifest_path, "identical": identical, "mismatched": mismatched }),
    )?;
    println!(
        "{}",
        json!({ "status": if identical { "identical" } else { "differs" }, "mismatched": mismatched })
    );
    Ok(if identical { ExitCode::SUCCESS } else { ExitCode::from(1) })
}
