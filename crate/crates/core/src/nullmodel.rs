//! Degree-preserving null model: Monte Carlo double-edge-swap rewiring,
//! replicate ensembles, and z-scoring of observed metrics.

use std::collections::{BTreeSet, HashSet};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::coreperiphery::{detect, CpAssignment, SolverConfig};
use crate::metrics;
use crate::network::ConceptNetwork;
use crate::seeds::task_seed;

/// Default ratio of swap attempts to edge count.
pub const DEFAULT_SWAP_FACTOR: u32 = 100;

#[derive(Debug, Error)]
pub enum NullModelError {
    #[error("need at least two replicates for a standard deviation, got {0}")]
    TooFewReplicates(u32),
    #[error("churn requires a prior-year network")]
    MissingPriorNetwork,
}

/// Metrics supported by the null-model comparison.
///
/// `NCores` counts detected structures (no per-replicate significance screen;
/// running the full screen on every replicate multiplies the cost by the
/// sample count and is available through the solver API when needed).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NullMetric {
    Churn,
    RelCoreSize,
    NCores,
}

impl NullMetric {
    pub fn name(self) -> &'static str {
        match self {
            NullMetric::Churn => "churn",
            NullMetric::RelCoreSize => "rel_core_size",
            NullMetric::NCores => "n_cores",
        }
    }
}

/// Observed value against the replicate ensemble for one metric.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct NullEnsembleResult {
    pub subfield: String,
    pub year: i32,
    pub metric: String,
    pub observed: f64,
    pub null_mean: f64,
    pub null_sd: f64,
    /// Empty when the null standard deviation is zero.
    pub z: Option<f64>,
    pub n_replicates: u32,
}

/// How the swap budget is counted.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SwapBudget {
    /// `swap_factor * M` attempted swaps, rejected ones included.
    #[default]
    Attempts,
    /// `swap_factor * M` accepted swaps (attempts capped at 100x the target).
    Accepted,
}

/// Outcome counts of one rewiring run.
#[derive(Debug, Clone, Copy, Default)]
pub struct RewireStats {
    pub attempted: u64,
    pub accepted: u64,
}

/// Degree-preserving randomization by double edge swaps.
///
/// Each attempt picks two distinct edges (a,b), (c,d) and proposes
/// (a,d), (c,b); proposals creating a self-loop or a parallel edge are
/// rejected. The degree sequence is preserved exactly. Graphs with no
/// feasible swap come back isomorphic to the input, with a warning.
pub fn rewire(
    net: &ConceptNetwork,
    swap_factor: u32,
    budget: SwapBudget,
    seed: u64,
) -> (ConceptNetwork, RewireStats) {
    let m = net.n_edges();
    let mut stats = RewireStats::default();
    if m < 2 {
        log::warn!("cell {}: fewer than two edges, rewiring is a no-op", net.cell);
        return (net.clone(), stats);
    }
    let mut edges: Vec<(u32, u32)> = net.edges().collect();
    let mut present: HashSet<(u32, u32)> = edges.iter().copied().collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    let target = u64::from(swap_factor) * m as u64;
    let attempt_cap = match budget {
        SwapBudget::Attempts => target,
        SwapBudget::Accepted => target.saturating_mul(100),
    };
    while stats.attempted < attempt_cap {
        if budget == SwapBudget::Accepted && stats.accepted >= target {
            break;
        }
        stats.attempted += 1;
        let i = rng.random_range(0..m);
        let j = rng.random_range(0..m);
        if i == j {
            continue;
        }
        let (a, b) = edges[i];
        // both pairings of the endpoints are reachable; stored edges are
        // normalized, so the swap direction must be drawn, not fixed
        let (c, d) = if rng.random_bool(0.5) {
            edges[j]
        } else {
            let (c, d) = edges[j];
            (d, c)
        };
        if a == d || c == b {
            continue;
        }
        let new1 = (a.min(d), a.max(d));
        let new2 = (c.min(b), c.max(b));
        if new1 == new2 || present.contains(&new1) || present.contains(&new2) {
            continue;
        }
        present.remove(&edges[i]);
        present.remove(&edges[j]);
        present.insert(new1);
        present.insert(new2);
        edges[i] = new1;
        edges[j] = new2;
        stats.accepted += 1;
    }
    if stats.accepted == 0 {
        log::warn!("cell {}: no feasible swap found; returning an isomorphic copy", net.cell);
    }
    (net.with_edges(&edges), stats)
}

/// Null-comparison configuration.
#[derive(Debug, Clone, Copy)]
pub struct NullCompareConfig {
    pub n_replicates: u32,
    pub swap_factor: u32,
    pub budget: SwapBudget,
    pub seed: u64,
}

impl Default for NullCompareConfig {
    fn default() -> Self {
        NullCompareConfig {
            n_replicates: 100,
            swap_factor: DEFAULT_SWAP_FACTOR,
            budget: SwapBudget::Attempts,
            seed: 0,
        }
    }
}

/// Rewires, re-detects, and z-scores the requested metrics.
///
/// Replicate r of this cell rewires with a seed derived from the cell key and
/// r alone, so replicate r of year t pairs with replicate r of year t-1 when
/// churn is requested (`prev` supplies the prior-year observed network).
pub fn null_compare(
    net: &ConceptNetwork,
    prev: Option<&ConceptNetwork>,
    observed_asg: &CpAssignment,
    observed_prev_asg: Option<&CpAssignment>,
    metrics_wanted: &[NullMetric],
    cfg: &NullCompareConfig,
    solver: &SolverConfig,
) -> Result<Vec<NullEnsembleResult>, NullModelError> {
    if cfg.n_replicates < 2 {
        return Err(NullModelError::TooFewReplicates(cfg.n_replicates));
    }
    if metrics_wanted.contains(&NullMetric::Churn) && prev.is_none() {
        return Err(NullModelError::MissingPriorNetwork);
    }

    let observed_core = observed_asg.core_labels(net);
    let observed_values: Vec<(NullMetric, f64)> = metrics_wanted
        .iter()
        .filter_map(|&metric| {
            let value = match metric {
                NullMetric::RelCoreSize => Some(metrics::relative_core_size(observed_asg)),
                NullMetric::NCores => Some(observed_asg.n_structures() as f64),
                NullMetric::Churn => {
                    let prev_asg = observed_prev_asg?;
                    let prev_net = prev?;
                    let core_t: BTreeSet<String> =
                        observed_core.iter().map(|s| s.to_string()).collect();
                    let core_prev: BTreeSet<String> =
                        prev_asg.core_labels(prev_net).iter().map(|s| s.to_string()).collect();
                    metrics::churn(&core_t, &core_prev)
                }
            };
            value.map(|v| (metric, v))
        })
        .collect();

    let need_churn = observed_values.iter().any(|(m, _)| *m == NullMetric::Churn);
    let replicate_values: Vec<Vec<f64>> = (0..cfg.n_replicates)
        .into_par_iter()
        .map(|r| {
            let (rep_net, _) = rewire(net, cfg.swap_factor, cfg.budget, replicate_seed(cfg.seed, net, r));
            let rep_solver = SolverConfig {
                rng_seed: task_seed(cfg.seed, &format!("null-detect:{}", net.cell), u64::from(r)),
                ..*solver
            };
            let rep_asg = detect(&rep_net, &rep_solver);
            let prev_pair = if need_churn {
                prev.map(|p| {
                    let (prev_rep, _) =
                        rewire(p, cfg.swap_factor, cfg.budget, replicate_seed(cfg.seed, p, r));
                    let prev_solver = SolverConfig {
                        rng_seed: task_seed(cfg.seed, &format!("null-detect:{}", p.cell), u64::from(r)),
                        ..*solver
                    };
                    let prev_asg = detect(&prev_rep, &prev_solver);
                    (prev_rep, prev_asg)
                })
            } else {
                None
            };
            observed_values
                .iter()
                .map(|(metric, _)| match metric {
                    NullMetric::RelCoreSize => metrics::relative_core_size(&rep_asg),
                    NullMetric::NCores => rep_asg.n_structures() as f64,
                    NullMetric::Churn => {
                        let (prev_rep, prev_asg) =
                            prev_pair.as_ref().expect("churn requires prev");
                        let core_t: BTreeSet<String> = rep_asg
                            .core_labels(&rep_net)
                            .iter()
                            .map(|s| s.to_string())
                            .collect();
                        let core_prev: BTreeSet<String> = prev_asg
                            .core_labels(prev_rep)
                            .iter()
                            .map(|s| s.to_string())
                            .collect();
                        metrics::churn(&core_t, &core_prev).unwrap_or(f64::NAN)
                    }
                })
                .collect()
        })
        .collect();

    let n = cfg.n_replicates as f64;
    let results = observed_values
        .iter()
        .enumerate()
        .map(|(k, (metric, observed))| {
            let values: Vec<f64> = replicate_values
                .iter()
                .map(|rep| rep[k])
                .filter(|v| v.is_finite())
                .collect();
            let mean = values.iter().sum::<f64>() / values.len().max(1) as f64;
            let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>()
                / (values.len() as f64 - 1.0).max(1.0);
            let sd = var.sqrt();
            NullEnsembleResult {
                subfield: net.cell.subfield.clone(),
                year: net.cell.year,
                metric: metric.name().to_string(),
                observed: *observed,
                null_mean: mean,
                null_sd: sd,
                z: if sd > 0.0 { Some((observed - mean) / sd) } else { None },
                n_replicates: n as u32,
            }
        })
        .collect();
    Ok(results)
}

/// Replicate seeds depend only on the base seed, the cell key, and the
/// replicate index, which is what pairs year-t and year-(t-1) replicates.
fn replicate_seed(base: u64, net: &ConceptNetwork, replicate: u32) -> u64 {
    task_seed(base, &format!("rewire:{}", net.cell), u64::from(replicate))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ingest::CellKey;
    use crate::coreperiphery::sample_gnm;
    use crate::synth::{planted_cp_network, PlantedBlock};

    #[test]
    fn rewire_preserves_degree_sequence() {
        let cycle = ConceptNetwork::from_raw_edges(
            CellKey::new("t", 0),
            4,
            &[(0, 1), (1, 2), (2, 3), (0, 3)],
        );
        let (rewired, _) = rewire(&cycle, 100, SwapBudget::Attempts, 1);
        assert_eq!(rewired.degree_sequence(), vec![2, 2, 2, 2]);

        for seed in 0..5 {
            let net = sample_gnm(100, 400, seed);
            let (rewired, stats) = rewire(&net, 100, SwapBudget::Attempts, seed);
            assert_eq!(rewired.degree_sequence(), net.degree_sequence());
            assert!(stats.accepted > 0);
            assert_eq!(rewired.n_edges(), net.n_edges());
        }
    }

    #[test]
    fn rewire_actually_shuffles_edges() {
        let net = sample_gnm(100, 400, 11);
        let mut identical = 0;
        for seed in 0..10 {
            let (rewired, _) = rewire(&net, 100, SwapBudget::Attempts, seed);
            let original: HashSet<(u32, u32)> = net.edges().collect();
            let overlap = rewired.edges().filter(|e| original.contains(e)).count();
            if overlap == net.n_edges() {
                identical += 1;
            }
        }
        assert_eq!(identical, 0, "all ten rewirings left the edge set unchanged");
    }

    #[test]
    fn triangle_has_no_feasible_swap() {
        let triangle =
            ConceptNetwork::from_raw_edges(CellKey::new("t", 0), 3, &[(0, 1), (1, 2), (0, 2)]);
        let (rewired, stats) = rewire(&triangle, 100, SwapBudget::Attempts, 3);
        assert_eq!(stats.accepted, 0);
        assert_eq!(rewired.edges().collect::<Vec<_>>(), triangle.edges().collect::<Vec<_>>());
    }

    #[test]
    fn rewire_never_creates_loops_or_multiedges() {
        for seed in 0..10 {
            let net = sample_gnm(30, 120, seed + 50);
            let (rewired, _) = rewire(&net, 100, SwapBudget::Attempts, seed);
            let edges: Vec<(u32, u32)> = rewired.edges().collect();
            let set: HashSet<(u32, u32)> = edges.iter().copied().collect();
            assert_eq!(set.len(), edges.len(), "parallel edge after rewiring");
            assert!(edges.iter().all(|(a, b)| a != b), "self-loop after rewiring");
        }
    }

    #[test]
    fn accepted_budget_counts_only_acceptances() {
        let net = sample_gnm(30, 120, 99);
        let (_, stats) = rewire(&net, 2, SwapBudget::Accepted, 7);
        assert_eq!(stats.accepted, 2 * 120);
        assert!(stats.attempted >= stats.accepted);
    }

    #[test]
    fn fixed_seed_reproduces_replicates_and_z() {
        let (net, _) = planted_cp_network(&[PlantedBlock { n_core: 4, n_periphery: 12 }], 0.02, 5);
        let solver = SolverConfig { n_restarts: 5, rng_seed: 1, ..Default::default() };
        let asg = detect(&net, &solver);
        let cfg = NullCompareConfig { n_replicates: 10, ..Default::default() };
        let a = null_compare(&net, None, &asg, None, &[NullMetric::RelCoreSize], &cfg, &solver)
            .unwrap();
        let b = null_compare(&net, None, &asg, None, &[NullMetric::RelCoreSize], &cfg, &solver)
            .unwrap();
        assert_eq!(a[0].z, b[0].z);
        assert_eq!(a[0].null_mean, b[0].null_mean);
    }

    #[test]
    fn degenerate_sd_yields_undefined_z() {
        // a triangle cannot be rewired, so every replicate is identical
        let triangle =
            ConceptNetwork::from_raw_edges(CellKey::new("t", 0), 3, &[(0, 1), (1, 2), (0, 2)]);
        let solver = SolverConfig { n_restarts: 3, rng_seed: 2, ..Default::default() };
        let asg = detect(&triangle, &solver);
        let cfg = NullCompareConfig { n_replicates: 5, ..Default::default() };
        let out =
            null_compare(&triangle, None, &asg, None, &[NullMetric::NCores], &cfg, &solver)
                .unwrap();
        assert_eq!(out[0].null_sd, 0.0);
        assert_eq!(out[0].z, None);
    }

    #[test]
    fn too_few_replicates_is_an_error() {
        let net = sample_gnm(10, 20, 1);
        let solver = SolverConfig::default();
        let asg = detect(&net, &solver);
        let cfg = NullCompareConfig { n_replicates: 1, ..Default::default() };
        assert!(matches!(
            null_compare(&net, None, &asg, None, &[NullMetric::NCores], &cfg, &solver),
            Err(NullModelError::TooFewReplicates(1))
        ));
    }
}
