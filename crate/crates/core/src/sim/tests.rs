// oracles index by letter on purpose
#![allow(clippy::needless_range_loop)]

use super::*;
use crate::prob::{Channel, Pmf};
use std::f64::consts::LN_2;

fn bsc(p: f64) -> GpProblem {
    GpProblem::stateless(vec![vec![1.0 - p, p], vec![p, 1.0 - p]]).unwrap()
}

fn binary(s: usize) -> Alphabets {
    Alphabets { s, x: 2, y: 2 }
}

fn repetition3() -> Code {
    // majority decoding of 000 / 111
    let phi = (0..8).map(|y: usize| usize::from(y.count_ones() >= 2)).collect();
    Code::new(binary(1), 3, vec![vec![0], vec![7]], phi).unwrap()
}

fn two_state() -> GpProblem {
    GpProblem::new(
        Channel::new(vec![
            vec![vec![0.9, 0.1], vec![0.2, 0.8]],
            vec![vec![0.6, 0.4], vec![0.3, 0.7]],
        ])
        .unwrap(),
        Pmf::new(vec![0.35, 0.65]).unwrap(),
    )
    .unwrap()
}

#[test]
fn exact_error_examples() {
    let identity = Code::new(binary(1), 1, vec![vec![0], vec![1]], vec![0, 1]).unwrap();
    assert_eq!(exact_error(&identity, &bsc(0.0)).unwrap().max_error, 0.0);

    let blind = GpProblem::stateless(vec![vec![0.3, 0.7], vec![0.3, 0.7]]).unwrap();
    for phi in [[0, 0], [0, 1], [1, 0], [1, 1]] {
        let c = Code::new(binary(1), 1, vec![vec![0], vec![1]], phi.to_vec()).unwrap();
        assert!(exact_error(&c, &blind).unwrap().max_error >= 0.5);
    }

    // binomial tail: two or three flips out of three
    let p: f64 = 0.1;
    let oracle = 3.0 * p * p * (1.0 - p) + p.powi(3);
    let rep = exact_error(&repetition3(), &bsc(p)).unwrap();
    for e in &rep.per_message {
        assert!((e - oracle).abs() < 1e-12);
    }
    assert!((rep.max_error - 0.028).abs() < 1e-12);
    assert_eq!(rep.method, Method::Exact);
}

#[test]
fn exact_error_with_states_matches_enumeration() {
    let pb = two_state();
    // n = 2, M = 2, encoder depends on the state sequence
    let f = vec![vec![0, 1, 2, 3], vec![3, 2, 1, 0]];
    let phi = vec![0, 1, 0, 1];
    let code = Code::new(binary(2), 2, f.clone(), phi.clone()).unwrap();
    let got = exact_error(&code, &pb).unwrap();
    for m in 0..2 {
        let mut err = 0.0;
        for s0 in 0..2 {
            for s1 in 0..2 {
                let si = s0 * 2 + s1;
                let (x0, x1) = (f[m][si] / 2, f[m][si] % 2);
                for y0 in 0..2 {
                    for y1 in 0..2 {
                        if phi[y0 * 2 + y1] != m {
                            err += pb.state_pmf().get(s0)
                                * pb.state_pmf().get(s1)
                                * pb.channel().get(s0, x0, y0)
                                * pb.channel().get(s1, x1, y1);
                        }
                    }
                }
            }
        }
        assert!((got.per_message[m] - err).abs() < 1e-15);
    }
}

#[test]
fn relabeling_messages_leaves_errors_unchanged() {
    let pb = two_state();
    let f = vec![vec![0, 1, 2, 3], vec![3, 2, 1, 0], vec![1, 1, 2, 2]];
    let phi = vec![0, 1, 2, 1];
    let base = exact_error(&Code::new(binary(2), 2, f.clone(), phi.clone()).unwrap(), &pb).unwrap();
    let perm = [2, 0, 1];
    let mut f2 = vec![vec![]; 3];
    for m in 0..3 {
        f2[perm[m]] = f[m].clone();
    }
    let phi2: Vec<usize> = phi.iter().map(|&d| perm[d]).collect();
    let moved = exact_error(&Code::new(binary(2), 2, f2, phi2).unwrap(), &pb).unwrap();
    for m in 0..3 {
        assert!((base.per_message[m] - moved.per_message[perm[m]]).abs() < 1e-15);
    }
    assert!((base.max_error - moved.max_error).abs() < 1e-15);
    assert!(base.max_error >= base.average_error);
}

#[test]
fn subcode_and_ml_decoder_properties() {
    let pb = two_state();
    let f = vec![vec![0, 1, 2, 3], vec![3, 2, 1, 0], vec![1, 1, 2, 2]];
    let phi = vec![0, 1, 2, 1];
    let full = exact_error(&Code::new(binary(2), 2, f.clone(), phi.clone()).unwrap(), &pb).unwrap();
    // dropping message 2 with the decoder fixed (its region goes to message 0)
    let phi_sub: Vec<usize> = phi.iter().map(|&d| if d == 2 { 0 } else { d }).collect();
    let sub = exact_error(&Code::new(binary(2), 2, f[..2].to_vec(), phi_sub).unwrap(), &pb).unwrap();
    assert!((sub.per_message[1] - full.per_message[1]).abs() < 1e-15);
    assert!(sub.per_message[0] <= full.per_message[0] + 1e-15);

    let lk = Likelihoods::new(&pb, 2).unwrap();
    let ml = lk.ml_decoder(&f);
    let with_ml = exact_error(&Code::new(binary(2), 2, f, ml).unwrap(), &pb).unwrap();
    assert!(with_ml.average_error <= full.average_error + 1e-15);
}

#[test]
fn monte_carlo_examples() {
    let identity = Code::new(binary(1), 1, vec![vec![0], vec![1]], vec![0, 1]).unwrap();
    let r = mc_error(&identity, &bsc(0.0), 1000, 3, Workers(2)).unwrap();
    assert_eq!(r.max_error, 0.0);
    assert_eq!(r.method, Method::MonteCarlo { samples: 1000, seed: 3 });

    let code = repetition3();
    let pb = bsc(0.1);
    let exact = exact_error(&code, &pb).unwrap();
    let mut inside = 0;
    for seed in 0..100 {
        let r = mc_error(&code, &pb, 20_000, seed, Workers::default()).unwrap();
        let hw = r.half_widths.as_ref().unwrap();
        if (0..2).all(|m| (r.per_message[m] - exact.per_message[m]).abs() <= hw[m]) {
            inside += 1;
        }
    }
    assert!(inside >= 95, "{inside} of 100");
}

#[test]
fn monte_carlo_is_reproducible_across_workers() {
    let pb = two_state();
    let code = Code::new(binary(2), 2, vec![vec![0, 1, 2, 3], vec![3, 2, 1, 0]], vec![0, 1, 0, 1]).unwrap();
    let a = mc_error(&code, &pb, 30_000, 42, Workers(1)).unwrap();
    let b = mc_error(&code, &pb, 30_000, 42, Workers(8)).unwrap();
    let c = mc_error(&code, &pb, 30_000, 42, Workers(3)).unwrap();
    assert_eq!(a, b);
    assert_eq!(a, c);
    let d = mc_error(&code, &pb, 30_000, 43, Workers(1)).unwrap();
    assert_ne!(a, d);
}

/// Every encoder table, each with its averaged-likelihood decoder, scored independently.
fn brute_force_best(pb: &GpProblem, m: usize, n: usize) -> f64 {
    let ns = pb.n_states().pow(n as u32);
    let nx = pb.n_inputs().pow(n as u32);
    let ny = pb.n_outputs().pow(n as u32);
    let digits = m * ns;
    let mut best = f64::INFINITY;
    let mut f = vec![0usize; digits];
    loop {
        // likelihood of y under message j, averaged over state sequences
        let like = |j: usize, y: usize| -> f64 {
            let mut tot = 0.0;
            for si in 0..ns {
                let s = seq::letters(si, pb.n_states(), n);
                let x = seq::letters(f[j * ns + si], pb.n_inputs(), n);
                let ys = seq::letters(y, pb.n_outputs(), n);
                let mut p = 1.0;
                for t in 0..n {
                    p *= pb.state_pmf().get(s[t]) * pb.channel().get(s[t], x[t], ys[t]);
                }
                tot += p;
            }
            tot
        };
        let decode: Vec<usize> = (0..ny)
            .map(|y| {
                let mut arg = 0;
                for j in 1..m {
                    if like(j, y) > like(arg, y) {
                        arg = j;
                    }
                }
                arg
            })
            .collect();
        let worst = (0..m)
            .map(|j| (0..ny).filter(|&y| decode[y] != j).map(|y| like(j, y)).sum::<f64>())
            .fold(0.0, f64::max);
        best = best.min(worst);
        let mut d = digits;
        loop {
            if d == 0 {
                return best;
            }
            d -= 1;
            f[d] += 1;
            if f[d] < nx {
                break;
            }
            f[d] = 0;
        }
    }
}

#[test]
fn search_examples() {
    let opts = SearchOptions::default();
    let r = best_code_search(&bsc(0.0), 2, 1, SearchMode::Exhaustive, &opts).unwrap();
    assert_eq!(r.report.max_error, 0.0);
    assert_eq!(r.encoders_visited, 4);

    let same = GpProblem::stateless(vec![vec![0.8, 0.2], vec![0.8, 0.2]]).unwrap();
    let r = best_code_search(&same, 2, 1, SearchMode::Exhaustive, &opts).unwrap();
    assert!(r.report.max_error >= 0.5);
    let r = best_code_search(
        &same,
        2,
        1,
        SearchMode::Exhaustive,
        &SearchOptions {
            exhaustive_decoder: true,
            ..opts.clone()
        },
    )
    .unwrap();
    assert!(r.report.max_error >= 0.5);

    let pb = bsc(0.2);
    let r = best_code_search(&pb, 4, 2, SearchMode::Exhaustive, &opts).unwrap();
    let oracle = brute_force_best(&pb, 4, 2);
    assert!(r.report.max_error > 0.0);
    assert!((r.report.max_error - oracle).abs() < 1e-12, "{} vs {oracle}", r.report.max_error);
    assert_eq!(exact_error(&r.code, &pb).unwrap(), r.report);
}

#[test]
fn search_with_states_is_a_true_minimum() {
    let pb = two_state();
    let r = best_code_search(&pb, 2, 2, SearchMode::Exhaustive, &SearchOptions::default()).unwrap();
    let oracle = brute_force_best(&pb, 2, 2);
    assert!((r.report.max_error - oracle).abs() < 1e-12);
    // the exhaustive decoder can only help
    let d = best_code_search(
        &pb,
        2,
        1,
        SearchMode::Exhaustive,
        &SearchOptions {
            exhaustive_decoder: true,
            ..SearchOptions::default()
        },
    )
    .unwrap();
    let ml = best_code_search(&pb, 2, 1, SearchMode::Exhaustive, &SearchOptions::default()).unwrap();
    assert!(d.report.max_error <= ml.report.max_error + 1e-15);
}

#[test]
fn search_is_deterministic_and_budgeted() {
    let pb = two_state();
    let mk = |w| SearchOptions {
        workers: Workers(w),
        ..SearchOptions::default()
    };
    let a = best_code_search(&pb, 2, 2, SearchMode::Exhaustive, &mk(1)).unwrap();
    let b = best_code_search(&pb, 2, 2, SearchMode::Exhaustive, &mk(8)).unwrap();
    assert_eq!(a.code, b.code);
    let mode = SearchMode::Random { k: 5000, seed: 9 };
    let c = best_code_search(&pb, 3, 2, mode, &mk(1)).unwrap();
    let d = best_code_search(&pb, 3, 2, mode, &mk(4)).unwrap();
    assert_eq!(c.code, d.code);
    assert_eq!(c.encoders_visited, 5000);

    let tight = SearchOptions {
        max_codes: 100,
        ..SearchOptions::default()
    };
    assert!(matches!(
        best_code_search(&pb, 2, 2, SearchMode::Exhaustive, &tight),
        Err(Error::BudgetExceeded(_))
    ));
}

#[test]
fn probe_examples() {
    let opts = ProbeOptions::default();
    let zero = GpProblem::stateless(vec![vec![0.5, 0.5], vec![0.5, 0.5]]).unwrap();
    for r in [0.1, 0.7, 1.5] {
        let rows = strong_converse_probe(&zero, r, &[1], &opts).unwrap();
        let m = rows[0].messages as f64;
        assert!(rows[0].exhaustive);
        assert!(rows[0].max_error >= 1.0 - 1.0 / m - 1e-15);
    }

    let rows = strong_converse_probe(&bsc(0.0), 0.5 * LN_2, &[2], &opts).unwrap();
    assert_eq!(rows[0].messages, 2);
    assert_eq!(rows[0].max_error, 0.0);

    let rows = strong_converse_probe(&bsc(0.2), 0.9 * LN_2, &[1, 2], &opts).unwrap();
    assert_eq!((rows[0].messages, rows[1].messages), (2, 4));
    assert!(rows[0].max_error > 0.0);
    assert!(rows[1].max_error >= rows[0].max_error);
    assert!((rows[0].max_error - brute_force_best(&bsc(0.2), 2, 1)).abs() < 1e-12);
}

#[test]
fn message_count_ignores_float_noise() {
    assert_eq!(messages_for_rate(1, LN_2), 2);
    assert_eq!(messages_for_rate(2, 0.5 * LN_2), 2);
    assert_eq!(messages_for_rate(1, 0.9 * LN_2), 2);
    assert_eq!(messages_for_rate(2, 0.9 * LN_2), 4);
}

#[test]
fn code_json_roundtrip_and_validation() {
    let code = repetition3();
    let text = code.to_json();
    assert!(text.contains("\"M\": 2"));
    assert_eq!(Code::from_json(&text).unwrap(), code);
    let bad = text.replace("\"n\": 3", "\"n\": 2");
    assert!(Code::from_json(&bad).is_err());
    assert!(Code::new(binary(1), 1, vec![vec![0], vec![1]], vec![0, 2]).is_err());
    assert!(Code::new(binary(1), 1, vec![vec![0, 1], vec![1]], vec![0, 1]).is_err());
}
