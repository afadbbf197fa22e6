//! Property tests for the invariants of each module, checked against small
//! independent oracles.

use std::collections::BTreeSet;
use std::f64::consts::TAU;

use num_bigint::BigUint;
use num_complex::Complex64;
use num_traits::One;
use polyfourier::cantor::{
    build_generation, dim_bounds, interval_of, middle_thirds, prune_generation, BuildConfig, Frac, GenerationTree, Keep, TreeMode,
};
use polyfourier::diophantine::{approx_exponents, cf_convergents, point_with_exponent, HighPrecisionReal};
use polyfourier::expsum::{complete_sum, power_sum_bounds, quadratic_tau0, turan_fraction, TuranInstance};
use polyfourier::holder::{omega, spectrum_bounds};
use polyfourier::numeric::{fit_line, Turn};
use polyfourier::polynomials::{is_prime, IntPolynomial};
use polyfourier::series::SeriesParams;
use proptest::prelude::*;

/// `sum_{n mod q} e(a P(n) / q + m n / q)` with floating phases.
fn naive_sum(coeffs: &[i64], a: u64, q: u64, m: i64) -> Complex64 {
    (0..q as i128)
        .map(|n| {
            let p: i128 = coeffs
                .iter()
                .rev()
                .fold(0i128, |acc, &c| (acc * n + c as i128).rem_euclid(q as i128));
            let phase = ((a as i128 * p + m as i128 * n).rem_euclid(q as i128)) as f64 / q as f64;
            Complex64::from_polar(1.0, TAU * phase)
        })
        .sum()
}

fn odd_prime() -> impl Strategy<Value = u64> {
    (3u64..400).prop_filter("prime", |&q| is_prime(q))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn complete_sum_matches_naive(c0 in 1i64..5, c1 in -5i64..5, c2 in -5i64..5, q in 2u64..120, a in 0u64..120, m in -20i64..20) {
        let coeffs = [c2, c1, c0];
        let poly = IntPolynomial::new(coeffs.to_vec());
        let value = complete_sum(&poly, a % q, q, m).unwrap().value;
        let oracle = naive_sum(&coeffs, a % q, q, m);
        prop_assert!((value - oracle).norm() < 1e-9 * q as f64);
    }

    #[test]
    fn gauss_law(q in odd_prime(), a in 1u64..400) {
        prop_assume!(a % q != 0);
        let poly: IntPolynomial = "n^2".parse().unwrap();
        let tau = complete_sum(&poly, a % q, q, 0).unwrap().value;
        prop_assert!((tau.norm() - (q as f64).sqrt()).abs() < 1e-9 * (q as f64).sqrt());
        let closed = quadratic_tau0(&poly, a % q, q).unwrap();
        prop_assert!((closed - tau).norm() < 1e-9 * q as f64);
    }

    #[test]
    fn conjugation_symmetry(q in 2u64..200, a in 1u64..200, m in -30i64..30) {
        let poly: IntPolynomial = "n^3 + 2*n".parse().unwrap();
        let a = a % q;
        let left = complete_sum(&poly, (q - a) % q, q, m).unwrap().value;
        let right = complete_sum(&poly, a, q, -m).unwrap().value.conj();
        prop_assert!((left - right).norm() < 1e-9 * q as f64);
    }

    #[test]
    fn multiplicativity(q1 in odd_prime(), q2 in odd_prime(), a in 1u64..1000) {
        prop_assume!(q1 != q2 && q1 * q2 < 20_000);
        let poly: IntPolynomial = "n^2 + n".parse().unwrap();
        let q = q1 * q2;
        let a = a % q;
        prop_assume!(a % q1 != 0 && a % q2 != 0);
        // a/(q1 q2) = a1/q1 + a2/q2 with a1 = a q2^{-1} mod q1 and a2 = a q1^{-1} mod q2.
        let inv = |x: u64, p: u64| (1..p).find(|&y| x * y % p == 1).unwrap();
        let a1 = a * inv(q2 % q1, q1) % q1;
        let a2 = a * inv(q1 % q2, q2) % q2;
        let whole = complete_sum(&poly, a, q, 0).unwrap().abs();
        let parts = complete_sum(&poly, a1, q1, 0).unwrap().abs() * complete_sum(&poly, a2, q2, 0).unwrap().abs();
        prop_assert!((whole - parts).abs() < 1e-9 * q as f64);
    }

    #[test]
    fn turan_lemma_holds(lambdas in prop::collection::vec(-1000i64..1000, 1..=6), q in 40u64..2000, lo in 0.0f64..0.5, w in 0.05f64..0.5) {
        let n = lambdas.len() as f64;
        let hi = (lo + w.max(n * n / q as f64)).min(1.0);
        prop_assume!(hi - lo >= n * n / q as f64);
        let out = turan_fraction(&TuranInstance { lambdas, q, interval: (lo, hi) }).unwrap();
        prop_assert!(out.pass, "{out:?}");
    }

    #[test]
    fn power_sum_inequalities(phases in prop::collection::vec((0.0f64..1.0, 0.0f64..0.5, -1.0f64..1.0, -1.0f64..1.0), 1..=8), m in 0u64..20, h_extra in 0u64..56) {
        let z: Vec<Complex64> = phases.iter().map(|&(t, g, _, _)| Complex64::from_polar(1.0 + g, TAU * t)).collect();
        let b: Vec<Complex64> = phases.iter().map(|&(_, _, re, im)| Complex64::new(re, im)).collect();
        let h = z.len() as u64 + h_extra;
        let out = power_sum_bounds(&b, &z, m, h).unwrap();
        prop_assert!(out.first_pass && out.second_pass, "{out:?}");
    }

    #[test]
    fn convergent_determinant(mut quotients in prop::collection::vec(1u64..1000, 1..40), last in 2u64..1000) {
        // A final quotient of 1 is not canonical.
        quotients.push(last);
        let big: Vec<BigUint> = quotients.iter().map(|&a| BigUint::from(a)).collect();
        let x = HighPrecisionReal::from_quotients(&big).unwrap();
        let cf = cf_convergents(&x, quotients.len()).unwrap();
        prop_assert_eq!(&cf.quotients, &big);
        // The convergent before a_1/q_1 is 0/1.
        let mut prev = (BigUint::from(0u32), BigUint::from(1u32));
        for (a, q) in &cf.convergents {
            // |a_n q_{n-1} - a_{n-1} q_n| = 1
            let (l, r) = (a * &prev.1, &prev.0 * q);
            let diff = if l > r { l - r } else { r - l };
            prop_assert!(diff.is_one());
            prev = (a.clone(), q.clone());
        }
    }

    #[test]
    fn spectrum_bounds_are_ordered(k in 2u32..=8, nu in 1u32..8) {
        prop_assume!(nu < k);
        let nu_0 = nu.max(2).min((k - 1).max(2));
        let s = spectrum_bounds(k, nu_0, 256).unwrap();
        prop_assert_eq!(s.rows[0].upper, 0.0);
        for row in &s.rows {
            prop_assert!(row.lower <= row.upper + 1e-12, "k={} beta={} {} > {}", k, row.beta, row.lower, row.upper);
        }
        prop_assert!((s.rows.last().unwrap().upper - 1.0).abs() < 1e-6);
    }

    #[test]
    fn omega_is_increasing_from_zero(k in 2u32..=8, t in 0.01f64..0.99) {
        prop_assert!(omega(k, 1e-12).unwrap() < 1e-9);
        // The branches meet with an upward jump at the junction.
        let junction = 1.0 / (k as f64 * (1u64 << k) as f64);
        prop_assert!(omega(k, junction.next_down()).unwrap() < omega(k, junction).unwrap());
        let beta = t * 0.5 / k as f64;
        prop_assert!(omega(k, beta * 0.999).unwrap() < omega(k, beta).unwrap());
    }

    #[test]
    fn fit_recovers_lines(slope in -3.0f64..3.0, intercept in -5.0f64..5.0, n in 3usize..20) {
        let xs: Vec<f64> = (0..n).map(|i| i as f64 * 0.7).collect();
        let ys: Vec<f64> = xs.iter().map(|x| slope * x + intercept).collect();
        let fit = fit_line(&xs, &ys).unwrap();
        prop_assert!((fit.slope - slope).abs() < 1e-9);
        prop_assert!((fit.intercept - intercept).abs() < 1e-9);
    }

    #[test]
    fn turn_addition_is_exact(a in 0u64..1000, b in 0u64..1000, q in 1u64..1000) {
        let sum = Turn::from_ratio(a % q, q) + Turn::from_ratio(b % q, q);
        let direct = Turn::from_ratio((a % q + b % q) % q, q);
        let gap = (sum.to_signed_f64() - direct.to_signed_f64()).abs();
        prop_assert!(gap < 1e-30 || (1.0 - gap).abs() < 1e-30);
    }

    #[test]
    fn intervals_nest_exactly(a in 1u64..1000, q in 2u64..1000, r in 2u32..5) {
        prop_assume!(a < q);
        let (lo, hi) = interval_of(a, q, r).unwrap();
        let point = Frac::new(a as u128, q as u128);
        prop_assert!(point < lo && lo < hi);
        // hi - lo = 1/(4 q^r)
        let width = hi.to_big() - lo.to_big();
        prop_assert_eq!(width, num_rational::BigRational::new(1.into(), num_bigint::BigInt::from(4u32) * num_bigint::BigInt::from(q).pow(r)));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(8))]

    #[test]
    fn constructed_points_have_their_exponent(r in prop::sample::select(vec![2.5f64, 3.0, 4.0, 6.0]), seed in 0u64..1000) {
        let point = point_with_exponent(r, seed, false, 600).unwrap();
        let exps = approx_exponents(&point.expansion, 4);
        let limsup = exps.limsup.unwrap();
        prop_assert!((limsup - r).abs() < 0.05, "r = {r}, limsup = {limsup}");
    }

    #[test]
    fn pruned_middle_thirds_stay_nested(depth in 3usize..7, picks in prop::collection::vec(0usize..64, 0..4)) {
        let mut tree = middle_thirds(depth).unwrap();
        let g = depth / 2 + 1;
        let chosen: BTreeSet<(u64, u64)> = picks
            .iter()
            .map(|&i| &tree.generations[g].intervals[i % tree.generations[g].intervals.len()])
            .map(|iv| (iv.a, iv.q))
            .collect();
        let report = prune_generation(&mut tree, g, &chosen).unwrap();
        prop_assert_eq!(report.removed, chosen.len());
        for j in g..=depth {
            for iv in &tree.generations[j].intervals {
                let parent = &tree.generations[j - 1].intervals[iv.parent.unwrap()];
                prop_assert!(!parent.pruned || iv.pruned);
            }
        }
    }
}

#[test]
fn built_trees_are_nested_disjoint_and_ordered() {
    let params = SeriesParams::parse("n^2", 2.0).unwrap();
    for (q1, g, keep) in [(20u64, 2.6, Keep::All), (40, 2.5, Keep::Extremes), (60, 2.4, Keep::All)] {
        let qs = vec![q1, (q1 as f64).powf(g).ceil() as u64];
        let mut tree = GenerationTree::new(TreeMode::Unramified, 3, qs).unwrap();
        build_generation(&mut tree, &params, &BuildConfig::default()).unwrap();
        build_generation(
            &mut tree,
            &params,
            &BuildConfig {
                keep,
                ..BuildConfig::default()
            },
        )
        .unwrap();
        for i in 1..tree.generations.len() {
            let ivs = &tree.generations[i].intervals;
            let mut sorted: Vec<(Frac, Frac)> = ivs.iter().map(|iv| (iv.lo, iv.hi)).collect();
            sorted.sort();
            for w in sorted.windows(2) {
                assert!(w[0].1 < w[1].0, "overlap in generation {i}");
            }
            for iv in ivs {
                let parent = &tree.generations[i - 1].intervals[iv.parent.unwrap()];
                assert!(parent.lo <= iv.lo && iv.hi <= parent.hi);
                assert!(is_prime(iv.q) && iv.q >= tree.schedule[i - 1] && iv.q < 2 * tree.schedule[i - 1]);
                assert!(iv.tau_abs >= 0.5 * (iv.q as f64).sqrt());
            }
        }
        let b = dim_bounds(&tree).unwrap();
        assert!(b.lower.is_none_or(|l| l <= b.upper), "{b:?}");
    }
}
