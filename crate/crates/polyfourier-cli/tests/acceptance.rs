//! Acceptance report: one line per criterion, then a determinism check that
//! repeats every suite at 4 and 8 worker threads and compares CSV bytes with
//! the single-threaded run.

use std::process::ExitCode;
use std::time::Instant;

use polyfourier_cli::suites::{with_threads, SUITES};

const THREAD_COUNTS: [usize; 2] = [4, 8];

fn main() -> ExitCode {
    let mut all_pass = true;
    let mut baseline = Vec::new();
    for &(name, suite) in SUITES {
        let start = Instant::now();
        match with_threads(1, suite).and_then(|r| r) {
            Ok(r) => {
                all_pass &= r.pass;
                println!("{} {name}: {} [{:.1} s]", verdict(r.pass), r.summary, start.elapsed().as_secs_f64());
                baseline.push((name, suite, Some(r.csv)));
            }
            Err(e) => {
                all_pass = false;
                println!("FAIL {name}: error: {e:#}");
                baseline.push((name, suite, None));
            }
        }
    }
    let mut differing = Vec::new();
    for (name, suite, csv) in &baseline {
        for threads in THREAD_COUNTS {
            let again = with_threads(threads, suite).and_then(|r| r).map(|r| r.csv).ok();
            if again.is_none() || again != *csv {
                differing.push(format!("{name}@{threads}"));
            }
        }
    }
    let deterministic = differing.is_empty();
    all_pass &= deterministic;
    if deterministic {
        println!(
            "PASS determinism: CSV bytes identical at 1, 4 and 8 threads for all {} suites",
            baseline.len()
        );
    } else {
        println!("FAIL determinism: differing suites: {}", differing.join(", "));
    }
    if all_pass {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}

fn verdict(pass: bool) -> &'static str {
    if pass {
        "PASS"
    } else {
        "FAIL"
    }
}
