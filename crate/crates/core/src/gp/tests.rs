// oracles index by letter on purpose
#![allow(clippy::needless_range_loop)]

use super::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use crate::prob::entropy;
use rand::Rng;
use std::f64::consts::LN_2;

fn h2(p: f64) -> f64 {
    entropy(&Pmf::new(vec![p, 1.0 - p]).unwrap())
}

fn bsc(p: f64) -> GpProblem {
    GpProblem::stateless(vec![vec![1.0 - p, p], vec![p, 1.0 - p]]).unwrap()
}

fn stuck_at(p: f64) -> GpProblem {
    let stuck0 = vec![vec![1.0, 0.0], vec![1.0, 0.0]];
    let stuck1 = vec![vec![0.0, 1.0], vec![0.0, 1.0]];
    let free = vec![vec![1.0, 0.0], vec![0.0, 1.0]];
    GpProblem::new(
        Channel::new(vec![stuck0, stuck1, free]).unwrap(),
        Pmf::new(vec![p / 2.0, p / 2.0, 1.0 - p]).unwrap(),
    )
    .unwrap()
}

fn random_row<R: Rng>(rng: &mut R, k: usize) -> Vec<f64> {
    let raw: Vec<f64> = (0..k).map(|_| rng.gen::<f64>() + 0.02).collect();
    let s: f64 = raw.iter().sum();
    raw.into_iter().map(|v| v / s).collect()
}

fn random_problem<R: Rng>(rng: &mut R, ns: usize, nx: usize, ny: usize) -> GpProblem {
    let w = (0..ns)
        .map(|_| (0..nx).map(|_| random_row(rng, ny)).collect())
        .collect();
    GpProblem::new(Channel::new(w).unwrap(), Pmf::new(random_row(rng, ns)).unwrap()).unwrap()
}

fn random_policy<R: Rng>(rng: &mut R, nu: usize, ns: usize, nx: usize) -> AuxPolicy {
    let h = (0..nu).map(|_| (0..ns).map(|_| rng.gen_range(0..nx)).collect()).collect();
    let p = CondPmf::new((0..ns).map(|_| random_row(rng, nu)).collect()).unwrap();
    AuxPolicy::new(h, p).unwrap()
}

fn quick() -> GpOptions {
    GpOptions {
        restarts: 4,
        ..GpOptions::default()
    }
}

#[test]
fn induced_joint_constant_auxiliary() {
    let pb = stuck_at(0.3);
    let policy = AuxPolicy::new(vec![vec![1, 0, 1]], CondPmf::uniform(3, 1)).unwrap();
    let j = induced_joint(pb.state_pmf(), pb.channel(), &policy).unwrap();
    for s in 0..3 {
        let x = policy.h(0, s);
        for y in 0..2 {
            let want = pb.state_pmf().get(s) * pb.channel().get(s, x, y);
            assert!((j.get(&[0, s, x, y]) - want).abs() < 1e-15);
        }
    }
    assert!(gp_rate(&pb, &policy).unwrap().abs() < 1e-12);
}

#[test]
fn induced_joint_copy_coupling() {
    let pb = stuck_at(0.4);
    // u = s, h constant
    let p = CondPmf::new(vec![vec![1.0, 0.0, 0.0], vec![0.0, 1.0, 0.0], vec![0.0, 0.0, 1.0]]).unwrap();
    let policy = AuxPolicy::new(vec![vec![0; 3]; 3], p).unwrap();
    let j = induced_joint(pb.state_pmf(), pb.channel(), &policy).unwrap();
    let i_us = mutual_information(&j, &[0], &[1]).unwrap();
    assert!((i_us - entropy(pb.state_pmf())).abs() < 1e-12);
}

#[test]
fn induced_joint_matches_nested_loops() {
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    for _ in 0..20 {
        let pb = random_problem(&mut rng, 2, 2, 2);
        let pol = random_policy(&mut rng, 3, 2, 2);
        let j = induced_joint(pb.state_pmf(), pb.channel(), &pol).unwrap();
        for u in 0..3 {
            for s in 0..2 {
                for x in 0..2 {
                    for y in 0..2 {
                        let ind = if pol.h(u, s) == x { 1.0 } else { 0.0 };
                        let want = pb.state_pmf().get(s)
                            * pol.p_u_given_s().get(s, u)
                            * ind
                            * pb.channel().get(s, x, y);
                        assert!((j.get(&[u, s, x, y]) - want).abs() < 1e-15);
                    }
                }
            }
        }
        // marginal over (S, X, Y) reproduces the state pmf and the channel law
        let ps = j.marginal_table(&[1]).unwrap();
        for s in 0..2 {
            assert!((ps[s] - pb.state_pmf().get(s)).abs() < 1e-12);
        }
    }
}

#[test]
fn rate_examples() {
    let noiseless = GpProblem::stateless(vec![vec![1.0, 0.0], vec![0.0, 1.0]]).unwrap();
    let id = AuxPolicy::new(vec![vec![0], vec![1]], CondPmf::uniform(1, 2)).unwrap();
    assert!((gp_rate(&noiseless, &id).unwrap() - LN_2).abs() < 1e-12);

    // stuck-at structure: U equals the stuck value in stuck states, uniform otherwise, X = U
    let p = 0.3;
    let pb = stuck_at(p);
    let pol = AuxPolicy::new(
        vec![vec![0, 0, 0], vec![1, 1, 1]],
        CondPmf::new(vec![vec![1.0, 0.0], vec![0.0, 1.0], vec![0.5, 0.5]]).unwrap(),
    )
    .unwrap();
    let j = induced_joint(pb.state_pmf(), pb.channel(), &pol).unwrap();
    let cross = mutual_information(&j, &[0], &[3]).unwrap() - mutual_information(&j, &[0], &[1]).unwrap();
    let r = gp_rate(&pb, &pol).unwrap();
    assert!((r - cross).abs() < 1e-15);
    assert!((r - (1.0 - p) * LN_2).abs() < 1e-12);
}

#[test]
fn capacity_noiseless_and_bsc() {
    let noiseless = GpProblem::stateless(vec![vec![1.0, 0.0], vec![0.0, 1.0]]).unwrap();
    assert!((gp_capacity(&noiseless, &quick()).unwrap().rate - LN_2).abs() < 1e-6);
    for p in [0.05, 0.11, 0.25] {
        let c = gp_capacity(&bsc(p), &quick()).unwrap().rate;
        assert!((c - (LN_2 - h2(p))).abs() < 1e-3, "p = {p}: {c}");
    }
}

#[test]
fn capacity_stuck_at_is_sandwiched() {
    for p in [0.2, 0.3] {
        let pb = stuck_at(p);
        let target = (1.0 - p) * LN_2;
        let res = gp_capacity(&pb, &GpOptions::default()).unwrap();
        // independent upper bound: the receiver-side-state capacity is (1 − p) ln 2
        assert!((receiver_csi_capacity(&pb) - target).abs() < 1e-9);
        assert!(res.rate <= receiver_csi_capacity(&pb) + 1e-9);
        assert!((res.rate - target).abs() < 5e-3, "p = {p}: {}", res.rate);
        assert!((gp_rate(&pb, &res.policy).unwrap() - res.rate).abs() < 1e-12);
    }
}

#[test]
fn rate_max_single_state_is_input_output_information() {
    let v = Channel::stateless(vec![vec![0.8, 0.2], vec![0.3, 0.7]]).unwrap();
    let p = JointPmf::new(&["S", "X"], &[1, 2], vec![0.35, 0.65]).unwrap();
    let got = gp_rate_max(&v, &p, &quick()).unwrap().rate;
    let mut xy = Vec::new();
    for x in 0..2 {
        for y in 0..2 {
            xy.push(p.get(&[0, x]) * v.get(0, x, y));
        }
    }
    let direct = mutual_information(&JointPmf::new(&["X", "Y"], &[2, 2], xy).unwrap(), &[0], &[1]).unwrap();
    assert!((got - direct).abs() < 1e-8);
}

#[test]
fn rate_max_input_blind_channel_is_zero() {
    let v = Channel::new(vec![
        vec![vec![0.7, 0.3], vec![0.7, 0.3]],
        vec![vec![0.2, 0.8], vec![0.2, 0.8]],
    ])
    .unwrap();
    let p = JointPmf::new(&["S", "X"], &[2, 2], vec![0.1, 0.3, 0.4, 0.2]).unwrap();
    let r = gp_rate_max(&v, &p, &quick()).unwrap();
    assert!(r.rate.abs() < 1e-6);
    // coarse brute force over policies confirms nothing positive exists
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let pb = GpProblem::new(v.clone(), Pmf::new(vec![0.4, 0.6]).unwrap()).unwrap();
    for _ in 0..200 {
        let pol = random_policy(&mut rng, 4, 2, 2);
        assert!(gp_rate(&pb, &pol).unwrap() <= 1e-12);
    }
}

/// Direct loop evaluation of the rate for the four-strategy policy with cell weights.
fn grid_rate(v: &Channel, ps: [f64; 2], px: [[f64; 2]; 2], split: [[f64; 2]; 2]) -> f64 {
    // strategy u = (t(0), t(1)) in mixed radix: u = 2 t(0) + t(1)
    let mut pus = [[0.0; 4]; 2];
    for u in 0..4 {
        let t = [u / 2, u % 2];
        for s in 0..2 {
            let x = t[s];
            // inside the cell (s, x) the two strategies differ in t(1 − s)
            let other = t[1 - s];
            let frac = if other == 0 { split[s][x] } else { 1.0 - split[s][x] };
            pus[s][u] = px[s][x] * frac;
        }
    }
    let mut puy = [[0.0; 2]; 4];
    let mut pu = [0.0; 4];
    let mut py = [0.0; 2];
    let mut h_us = 0.0;
    for u in 0..4 {
        let t = [u / 2, u % 2];
        for s in 0..2 {
            let w = ps[s] * pus[s][u];
            pu[u] += w;
            if w > 0.0 {
                h_us -= w * w.ln();
            }
            for y in 0..2 {
                puy[u][y] += w * v.get(s, t[s], y);
            }
        }
    }
    for u in 0..4 {
        for y in 0..2 {
            py[y] += puy[u][y];
        }
    }
    let ent = |xs: &[f64]| xs.iter().filter(|&&p| p > 0.0).map(|&p| -p * p.ln()).sum::<f64>();
    let h_uy: f64 = puy.iter().map(|r| ent(r)).sum();
    let (h_u, h_y, h_s) = (ent(&pu), ent(&py), ent(&ps));
    (h_u + h_y - h_uy) - (h_u + h_s - h_us)
}

#[test]
fn rate_max_matches_exhaustive_grid() {
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    for _ in 0..3 {
        let pb = random_problem(&mut rng, 2, 2, 2);
        let p_s = [0.35, 0.65];
        let a: f64 = rng.gen_range(0.1..0.9);
        let b: f64 = rng.gen_range(0.1..0.9);
        let px = [[a, 1.0 - a], [b, 1.0 - b]];
        let p_sx = JointPmf::new(
            &["S", "X"],
            &[2, 2],
            vec![p_s[0] * a, p_s[0] * (1.0 - a), p_s[1] * b, p_s[1] * (1.0 - b)],
        )
        .unwrap();
        let got = gp_rate_max(pb.channel(), &p_sx, &quick()).unwrap();
        let steps = 50;
        let mut oracle = f64::NEG_INFINITY;
        for i0 in 0..=steps {
            for i1 in 0..=steps {
                for i2 in 0..=steps {
                    for i3 in 0..=steps {
                        let f = |i: usize| i as f64 / steps as f64;
                        let split = [[f(i0), f(i1)], [f(i2), f(i3)]];
                        oracle = oracle.max(grid_rate(pb.channel(), p_s, px, split));
                    }
                }
            }
        }
        assert!(got.rate >= oracle - 1e-9, "{} < grid {}", got.rate, oracle);
        assert!((got.rate - oracle).abs() < 1e-3, "{} vs grid {}", got.rate, oracle);
        // witness marginal holds exactly
        let j = &got.induced_joint;
        let sx = j.marginal_table(&[1, 2]).unwrap();
        for (g, w) in sx.iter().zip(p_sx.data()) {
            assert!((g - w).abs() < 1e-9);
        }
        // policies with five auxiliary letters and arbitrary maps do no better
        for _ in 0..300 {
            let h: Vec<Vec<usize>> = (0..5).map(|_| (0..2).map(|_| rng.gen_range(0..2)).collect()).collect();
            let mut rows = Vec::new();
            let mut ok = true;
            for s in 0..2 {
                let mut row = vec![0.0; 5];
                for x in 0..2 {
                    let members: Vec<usize> = (0..5).filter(|&u| h[u][s] == x).collect();
                    if members.is_empty() {
                        ok = false;
                        break;
                    }
                    let w = random_row(&mut rng, members.len());
                    for (m, wi) in members.iter().zip(w) {
                        row[*m] = px[s][x] * wi;
                    }
                }
                rows.push(row);
            }
            if !ok {
                continue;
            }
            let pol = AuxPolicy::new(h, CondPmf::new(rows).unwrap()).unwrap();
            let sub = GpProblem::new(pb.channel().clone(), Pmf::new(p_s.to_vec()).unwrap()).unwrap();
            assert!(gp_rate(&sub, &pol).unwrap() <= got.rate + 1e-8);
        }
    }
}

#[test]
fn receiver_csi_examples() {
    let noiseless = GpProblem::new(
        Channel::new(vec![
            vec![vec![1.0, 0.0], vec![0.0, 1.0]],
            vec![vec![0.0, 1.0], vec![1.0, 0.0]],
        ])
        .unwrap(),
        Pmf::new(vec![0.3, 0.7]).unwrap(),
    )
    .unwrap();
    assert!((receiver_csi_capacity(&noiseless) - LN_2).abs() < 1e-9);

    let single = GpProblem::stateless(vec![vec![0.7, 0.2, 0.1], vec![0.1, 0.3, 0.6]]).unwrap();
    let gp = gp_capacity(&single, &quick()).unwrap().rate;
    assert!((receiver_csi_capacity(&single) - gp).abs() < 2e-3);

    let mix = GpProblem::new(
        Channel::new(vec![
            vec![vec![0.9, 0.1], vec![0.1, 0.9]],
            vec![vec![0.7, 0.3], vec![0.3, 0.7]],
        ])
        .unwrap(),
        Pmf::uniform(2),
    )
    .unwrap();
    let want = 0.5 * (LN_2 - h2(0.1)) + 0.5 * (LN_2 - h2(0.3));
    assert!((receiver_csi_capacity(&mix) - want).abs() < 1e-8);
}

#[test]
fn augmentation() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    for _ in 0..5 {
        let pb = random_problem(&mut rng, 2, 2, 2);
        let aug = augment_receiver_csi(&pb);
        assert_eq!(aug.n_outputs(), 4);
        for s in 0..2 {
            for x in 0..2 {
                for y in 0..2 {
                    for s2 in 0..2 {
                        let want = if s == s2 { pb.channel().get(s, x, y) } else { 0.0 };
                        assert_eq!(aug.channel().get(s, x, y * 2 + s2), want);
                    }
                }
            }
        }
        let c = gp_capacity(&pb, &quick()).unwrap().rate;
        let ca = gp_capacity(&aug, &quick()).unwrap().rate;
        assert!(ca >= c - 1e-6);
        assert!((ca - receiver_csi_capacity(&pb)).abs() < 5e-3);
    }
}

#[test]
fn random_policies_never_beat_capacity() {
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    let pb = random_problem(&mut rng, 2, 2, 2);
    let cap = gp_capacity(&pb, &GpOptions::default()).unwrap();
    for _ in 0..200 {
        let nu = rng.gen_range(1..=5);
        let pol = random_policy(&mut rng, nu, 2, 2);
        assert!(gp_rate(&pb, &pol).unwrap() <= cap.rate + 1e-9);
    }
}

#[test]
fn capacity_invariant_under_relabeling() {
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    let pb = random_problem(&mut rng, 2, 2, 3);
    let base = gp_capacity(&pb, &quick()).unwrap().rate;
    let ch = pb.channel();
    // swap states, swap inputs, rotate outputs
    let w: Vec<Vec<Vec<f64>>> = (0..2)
        .map(|s| {
            (0..2)
                .map(|x| (0..3).map(|y| ch.get(1 - s, 1 - x, (y + 1) % 3)).collect())
                .collect()
        })
        .collect();
    let ps = pb.state_pmf();
    let relabeled = GpProblem::new(Channel::new(w).unwrap(), Pmf::new(vec![ps.get(1), ps.get(0)]).unwrap()).unwrap();
    let other = gp_capacity(&relabeled, &quick()).unwrap().rate;
    assert!((base - other).abs() < 1e-6);
}

#[test]
fn capacity_monotone_in_cap_and_restarts() {
    let pb = stuck_at(0.3);
    let mut prev = f64::NEG_INFINITY;
    for cap in 1..=8 {
        let opts = GpOptions {
            u_size_cap: Some(cap),
            restarts: 2,
            ..GpOptions::default()
        };
        let r = gp_capacity(&pb, &opts).unwrap().rate;
        assert!(r >= prev - 1e-9, "cap {cap}: {r} < {prev}");
        prev = r;
    }
    let few = gp_capacity(&pb, &GpOptions { restarts: 1, ..GpOptions::default() }).unwrap().rate;
    let many = gp_capacity(&pb, &GpOptions { restarts: 8, ..GpOptions::default() }).unwrap().rate;
    assert!(many >= few - 1e-12);
}

#[test]
fn witness_joint_obeys_the_channel() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let pb = random_problem(&mut rng, 2, 2, 2);
    let r = gp_capacity(&pb, &quick()).unwrap();
    let j = &r.induced_joint;
    let sxy = j.marginal_table(&[1, 2, 3]).unwrap();
    for s in 0..2 {
        for x in 0..2 {
            let m = sxy[(s * 2 + x) * 2] + sxy[(s * 2 + x) * 2 + 1];
            if m > 0.0 {
                for y in 0..2 {
                    assert!((sxy[(s * 2 + x) * 2 + y] / m - pb.channel().get(s, x, y)).abs() < 1e-12);
                }
            }
        }
    }
    // X is a function of (U, S)
    for u in 0..r.policy.u_size() {
        for s in 0..2 {
            let used: Vec<usize> = (0..2)
                .filter(|&x| (0..2).any(|y| j.get(&[u, s, x, y]) > 0.0))
                .collect();
            assert!(used.len() <= 1);
        }
    }
}

#[test]
fn gp_below_receiver_csi_and_rate_max_below_capacity() {
    let mut rng = ChaCha8Rng::seed_from_u64(31);
    for _ in 0..5 {
        let pb = random_problem(&mut rng, 2, 2, 2);
        let c = gp_capacity(&pb, &quick()).unwrap().rate;
        assert!(c <= receiver_csi_capacity(&pb) + 1e-6);
        for a in [0.0, 0.25, 0.5, 0.75, 1.0] {
            for b in [0.0, 0.5, 1.0] {
                let ps = pb.state_pmf();
                let p_sx = JointPmf::new(
                    &["S", "X"],
                    &[2, 2],
                    vec![ps.get(0) * a, ps.get(0) * (1.0 - a), ps.get(1) * b, ps.get(1) * (1.0 - b)],
                )
                .unwrap();
                let r = gp_rate_max(pb.channel(), &p_sx, &quick()).unwrap().rate;
                assert!(r <= c + 1e-6);
            }
        }
    }
}

#[test]
fn workers_do_not_change_the_result() {
    let pb = stuck_at(0.25);
    let a = gp_capacity(&pb, &GpOptions { workers: Workers(1), ..GpOptions::default() }).unwrap();
    let b = gp_capacity(&pb, &GpOptions { workers: Workers(4), ..GpOptions::default() }).unwrap();
    assert_eq!(a.rate.to_bits(), b.rate.to_bits());
    assert_eq!(a.policy, b.policy);
}
