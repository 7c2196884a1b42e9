use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::sample_gnm;
use super::solver::{single_run_for_tests, switch_increment};
use super::*;
use crate::ingest::CellKey;
use crate::synth::{planted_cp_network, recovery_accuracy, PlantedBlock};

fn cell() -> CellKey {
    CellKey::new("t", 0)
}

/// Exhaustive maximum of the objective over all labelings (set partitions via
/// restricted-growth strings, times all coreness vectors). Independent of the
/// solver path; usable up to N around 7.
fn brute_force_max(net: &ConceptNetwork) -> (f64, Vec<u32>, Vec<bool>) {
    let n = net.n_nodes();
    let mut best = (f64::NEG_INFINITY, vec![], vec![]);
    let mut c = vec![0u32; n];
    fn recurse(
        i: usize,
        max_label: u32,
        c: &mut Vec<u32>,
        net: &ConceptNetwork,
        best: &mut (f64, Vec<u32>, Vec<bool>),
    ) {
        let n = net.n_nodes();
        if i == n {
            for mask in 0u32..(1 << n) {
                let x: Vec<bool> = (0..n).map(|k| mask >> k & 1 == 1).collect();
                let value = qcp(net, c, &x);
                if value > best.0 + 1e-12 {
                    *best = (value, c.clone(), x);
                }
            }
            return;
        }
        for label in 0..=max_label + 1 {
            c[i] = label;
            recurse(i + 1, max_label.max(label), c, net, best);
        }
    }
    c[0] = 0;
    recurse(1, 0, &mut c, net, &mut best);
    best
}

/// The idealized one-core network on four nodes: nodes 0,1 core, 2,3 periphery.
fn ideal_four() -> ConceptNetwork {
    ConceptNetwork::from_raw_edges(cell(), 4, &[(0, 1), (0, 2), (0, 3), (1, 2), (1, 3)])
}

#[test]
fn ideal_block_cases() {
    let c = vec![0, 0, 0, 1];
    let x = vec![true, false, false, true];
    assert_eq!(ideal_block(&c, &x, 0, 0), 0, "diagonal is zero");
    assert_eq!(ideal_block(&c, &x, 0, 1), 1, "core-periphery same structure");
    assert_eq!(ideal_block(&c, &x, 1, 2), 0, "periphery-periphery same structure");
    assert_eq!(ideal_block(&c, &x, 0, 3), 0, "different structures");
    let both_core = vec![true, true, false, true];
    assert_eq!(ideal_block(&c, &both_core, 0, 1), 1, "core-core same structure");
}

#[test]
fn qcp_of_planted_four_node_core_is_five_sixths() {
    let net = ideal_four();
    let planted_c = vec![0, 0, 0, 0];
    let planted_x = vec![true, true, false, false];
    let value = qcp(&net, &planted_c, &planted_x);
    assert!((value - 5.0 / 6.0).abs() < 1e-12, "got {value}");
    // exhaustive check that the planted labeling is the global maximum
    let (max, _, _) = brute_force_max(&net);
    assert!((max - 5.0 / 6.0).abs() < 1e-12, "brute force max {max}");
}

#[test]
fn qcp_zero_cases() {
    let net = ideal_four();
    let c = vec![0, 0, 0, 0];
    assert_eq!(qcp(&net, &c, &[false; 4]), 0.0, "all-periphery labeling scores zero");
    let complete = ConceptNetwork::from_raw_edges(cell(), 4, &[(0, 1), (0, 2), (0, 3), (1, 2), (1, 3), (2, 3)]);
    assert_eq!(qcp(&complete, &c, &[true; 4]), 0.0, "complete graph all-core scores zero");
}

#[test]
fn detect_matches_brute_force_on_star() {
    // star K_{1,5}: hub 0, leaves 1..=5
    let net = ConceptNetwork::from_raw_edges(cell(), 6, &[(0, 1), (0, 2), (0, 3), (0, 4), (0, 5)]);
    let cfg = SolverConfig { n_restarts: 16, rng_seed: 11, ..Default::default() };
    let asg = detect(&net, &cfg);
    let (max, _, _) = brute_force_max(&net);
    assert!((asg.qcp - max).abs() < 1e-9, "detect {} vs max {max}", asg.qcp);
    assert_eq!(asg.n_structures(), 1);
    assert!(asg.is_core[0], "hub must be core");
    assert!(!asg.is_core[1..].iter().any(|&x| x), "leaves must be periphery");
}

#[test]
fn detect_qcp_is_recomputed_and_nonnegative() {
    for seed in 0..5u64 {
        let net = sample_gnm(12, 30, seed);
        let cfg = SolverConfig { n_restarts: 4, rng_seed: seed, ..Default::default() };
        let asg = detect(&net, &cfg);
        let recomputed = qcp(&net, &asg.structure, &asg.is_core);
        assert!((asg.qcp - recomputed).abs() < 1e-12);
        // the all-singleton start scores zero, so the best restart cannot be below it
        assert!(asg.qcp >= -1e-12);
    }
}

#[test]
fn increment_formula_matches_scratch_recomputation() {
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    for round in 0..40 {
        let n = rng.random_range(4..=12usize);
        let total = n * (n - 1) / 2;
        let m = rng.random_range(n..=total.max(n));
        let net = sample_gnm(n, m, 1000 + round);
        // random labeling with dense structure indices
        let n_structures = rng.random_range(1..=n as u32);
        let c: Vec<u32> = (0..n).map(|_| rng.random_range(0..n_structures)).collect();
        let x: Vec<bool> = (0..n).map(|_| rng.random_bool(0.5)).collect();
        for i in 0..n {
            for target_s in 0..=n_structures {
                for target_x in [false, true] {
                    let closed = switch_increment(&net, &c, &x, i, target_s, target_x);
                    let mut c2 = c.clone();
                    let mut x2 = x.clone();
                    c2[i] = target_s;
                    x2[i] = target_x;
                    let scratch = qcp(&net, &c2, &x2) - qcp(&net, &c, &x);
                    assert!(
                        (closed - scratch).abs() < 1e-9,
                        "node {i} -> ({target_s},{target_x}): closed {closed} scratch {scratch}"
                    );
                }
            }
        }
    }
}

#[test]
fn accepted_moves_strictly_increase_the_objective() {
    for seed in 0..10u64 {
        let net = sample_gnm(20, 60, seed);
        let (c, x) = single_run_for_tests(&net, seed);
        // converged state: no single move strictly improves
        let n_structures = c.iter().map(|&s| s + 1).max().unwrap_or(0);
        for i in 0..net.n_nodes() {
            for s in 0..n_structures {
                for core in [true, false] {
                    let inc = switch_increment(&net, &c, &x, i, s, core);
                    if net.neighbors(i as u32).iter().any(|&j| c[j as usize] == s) {
                        assert!(inc <= 1e-9, "move ({i} -> {s},{core}) still improves by {inc}");
                    }
                }
            }
        }
    }
}

#[test]
fn detect_is_deterministic_for_fixed_seed() {
    let net = sample_gnm(25, 90, 5);
    let cfg = SolverConfig { n_restarts: 6, rng_seed: 42, ..Default::default() };
    let a = detect(&net, &cfg);
    let b = detect(&net, &cfg);
    assert_eq!(a, b);
}

#[test]
fn detect_beats_random_labelings_on_noise_graph() {
    let net = sample_gnm(30, 218, 77); // density ~0.5
    let cfg = SolverConfig { n_restarts: 10, rng_seed: 3, ..Default::default() };
    let asg = detect(&net, &cfg);
    let mut rng = ChaCha8Rng::seed_from_u64(123);
    let n = net.n_nodes();
    let mut best_random = f64::NEG_INFINITY;
    for _ in 0..10_000 {
        let c: Vec<u32> = (0..n).map(|_| rng.random_range(0..n as u32)).collect();
        let x: Vec<bool> = (0..n).map(|_| rng.random_bool(0.5)).collect();
        best_random = best_random.max(qcp(&net, &c, &x));
    }
    assert!(
        asg.qcp >= best_random,
        "detect {} below random-labeling maximum {best_random}",
        asg.qcp
    );
}

#[test]
fn planted_two_block_recovery() {
    let blocks =
        [PlantedBlock { n_core: 5, n_periphery: 15 }, PlantedBlock { n_core: 5, n_periphery: 15 }];
    let (net, truth) = planted_cp_network(&blocks, 0.0, 21);
    let cfg = SolverConfig { n_restarts: 10, rng_seed: 9, ..Default::default() };
    let asg = detect(&net, &cfg);
    assert_eq!(asg.n_structures(), 2);
    assert!(recovery_accuracy(&truth, &asg) >= 0.999);
}

#[test]
fn significance_counts_planted_structures() {
    let blocks =
        [PlantedBlock { n_core: 5, n_periphery: 15 }, PlantedBlock { n_core: 5, n_periphery: 15 }];
    let (net, _) = planted_cp_network(&blocks, 0.02, 4);
    let cfg = SolverConfig { n_restarts: 10, rng_seed: 17, ..Default::default() };
    let mut asg = detect(&net, &cfg);
    let count = count_significant(&net, &mut asg, &cfg).unwrap();
    assert_eq!(count, 2, "sizes {:?} flags {:?}", asg.structure_sizes(), asg.structure_sig);
    assert_eq!(asg.n_significant, 2);

    let (single_net, _) = planted_cp_network(&[PlantedBlock { n_core: 4, n_periphery: 10 }], 0.0, 5);
    let mut single_asg = detect(&single_net, &cfg);
    let single_count = count_significant(&single_net, &mut single_asg, &cfg).unwrap();
    assert_eq!(single_count, 1);
}

#[test]
fn significance_rejects_small_sample_config() {
    let (net, _) = planted_cp_network(&[PlantedBlock { n_core: 3, n_periphery: 5 }], 0.0, 6);
    let cfg = SolverConfig { sig_samples: 50, ..Default::default() };
    let mut asg = detect(&net, &cfg);
    assert!(matches!(count_significant(&net, &mut asg, &cfg), Err(CpError::Config(_))));
}

#[test]
fn single_core_recovers_planted_coreness() {
    let (net, truth) = planted_cp_network(&[PlantedBlock { n_core: 4, n_periphery: 12 }], 0.0, 8);
    let cfg = SolverConfig { n_restarts: 10, rng_seed: 2, single_core_mode: true, ..Default::default() };
    let asg = detect_single_core(&net, &cfg);
    assert_eq!(asg.n_structures(), 1);
    assert_eq!(asg.is_core, truth.is_core);
}

#[test]
fn single_core_on_complete_graph_returns_all_core() {
    let mut edges = Vec::new();
    for i in 0..6u32 {
        for j in i + 1..6 {
            edges.push((i, j));
        }
    }
    let net = ConceptNetwork::from_raw_edges(cell(), 6, &edges);
    let cfg = SolverConfig { n_restarts: 5, rng_seed: 1, single_core_mode: true, ..Default::default() };
    let asg = detect_single_core(&net, &cfg);
    assert!(asg.is_core.iter().all(|&x| x));
    assert_eq!(asg.qcp, 0.0);
}

#[test]
fn single_core_merges_blocks_below_multi_core_objective() {
    let blocks =
        [PlantedBlock { n_core: 5, n_periphery: 15 }, PlantedBlock { n_core: 5, n_periphery: 15 }];
    let (net, _) = planted_cp_network(&blocks, 0.0, 13);
    let cfg = SolverConfig { n_restarts: 10, rng_seed: 5, ..Default::default() };
    let multi = detect(&net, &cfg);
    let single = detect_single_core(&net, &SolverConfig { single_core_mode: true, ..cfg });
    assert_eq!(single.n_structures(), 1);
    assert!(
        single.qcp < multi.qcp,
        "single-core {} should trail multi-core {}",
        single.qcp,
        multi.qcp
    );
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn qcp_is_bounded_by_edge_count(seed in 0u64..5000, n in 3usize..12, frac in 0.1f64..0.9) {
        let total = n * (n - 1) / 2;
        let m = ((total as f64 * frac) as usize).max(1);
        let net = sample_gnm(n, m, seed);
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xabcd);
        let c: Vec<u32> = (0..n).map(|_| rng.random_range(0..n as u32)).collect();
        let x: Vec<bool> = (0..n).map(|_| rng.random_bool(0.5)).collect();
        let value = qcp(&net, &c, &x);
        prop_assert!(value.abs() <= net.n_edges() as f64 + 1e-9);
    }

    #[test]
    fn detect_equals_brute_force_on_tiny_graphs(seed in 0u64..40) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n = rng.random_range(3..=6usize);
        let total = n * (n - 1) / 2;
        let m = rng.random_range(2..=total);
        let net = sample_gnm(n, m, seed.wrapping_add(500));
        let cfg = SolverConfig { n_restarts: 24, rng_seed: seed, ..Default::default() };
        let asg = detect(&net, &cfg);
        let (max, _, _) = brute_force_max(&net);
        prop_assert!((asg.qcp - max).abs() < 1e-9, "detect {} vs brute force {}", asg.qcp, max);
    }
}
