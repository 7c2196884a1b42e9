//! Multi-core core/periphery detection.
//!
//! A labeling assigns every node a structure index `c_i` and a coreness flag
//! `x_i`. The quality of a labeling counts edges shared between the observed
//! graph and the idealized block model, minus the random-graph expectation at
//! the observed density:
//!
//! ```text
//! Q = sum_{i>j} (A_ij - p) (x_i + x_j - x_i x_j) delta(c_i, c_j)
//! ```
//!
//! `detect` maximizes Q with a label-switching heuristic over restarts;
//! `count_significant` screens the detected structures against
//! matched-density random graphs.

mod significance;
mod solver;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::network::{edge_density, ConceptNetwork};

pub use significance::{count_significant, sample_gnm};
pub use solver::{detect, detect_single_core, switch_increment};

/// Solver and significance-test configuration.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct SolverConfig {
    /// Independent label-switching restarts; the best result wins.
    pub n_restarts: u32,
    /// Base seed; restart, sample, and replicate seeds derive from it.
    pub rng_seed: u64,
    /// One-sided significance level for structure screening.
    pub sig_alpha: f64,
    /// Random graphs drawn for the null quality distribution (at least 100).
    pub sig_samples: u32,
    /// Restrict detection to a single structure (only coreness varies).
    pub single_core_mode: bool,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            n_restarts: 10,
            rng_seed: 0,
            sig_alpha: 0.05,
            sig_samples: 100,
            single_core_mode: false,
        }
    }
}

#[derive(Debug, Error)]
pub enum CpError {
    #[error("invalid solver configuration: {0}")]
    Config(String),
}

/// A detected labeling: per-node structure index and coreness, the recomputed
/// objective, and per-structure significance flags (all false until
/// [`count_significant`] runs).
///
/// Structure indices are dense `0..C-1`, renumbered by descending structure
/// size; exports print them 1-based.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CpAssignment {
    pub structure: Vec<u32>,
    pub is_core: Vec<bool>,
    pub qcp: f64,
    pub structure_sig: Vec<bool>,
    pub n_significant: usize,
}

impl CpAssignment {
    pub fn n_nodes(&self) -> usize {
        self.structure.len()
    }

    pub fn n_structures(&self) -> usize {
        self.structure_sig.len()
    }

    /// (total members, core members) per structure index.
    pub fn structure_sizes(&self) -> Vec<(usize, usize)> {
        let mut sizes = vec![(0, 0); self.n_structures()];
        for (&c, &x) in self.structure.iter().zip(&self.is_core) {
            sizes[c as usize].0 += 1;
            sizes[c as usize].1 += usize::from(x);
        }
        sizes
    }

    pub fn n_core_nodes(&self) -> usize {
        self.is_core.iter().filter(|&&x| x).count()
    }

    /// Concept labels of the core nodes.
    pub fn core_labels<'a>(&self, net: &'a ConceptNetwork) -> std::collections::BTreeSet<&'a str> {
        self.is_core
            .iter()
            .enumerate()
            .filter(|(_, &x)| x)
            .map(|(i, _)| net.label(i as u32))
            .collect()
    }
}

/// The idealized block-model entry B_ij(c, x): 1 when i and j share a
/// structure and at least one of them is core (and i != j), else 0.
pub fn ideal_block(c: &[u32], x: &[bool], i: usize, j: usize) -> u8 {
    if i != j && c[i] == c[j] && (x[i] || x[j]) {
        1
    } else {
        0
    }
}

/// Evaluates the objective from scratch for an arbitrary labeling.
pub fn qcp(net: &ConceptNetwork, c: &[u32], x: &[bool]) -> f64 {
    let p = edge_density(net).unwrap_or(0.0);
    let mut shared_edges = 0u64;
    for (a, b) in net.edges() {
        if ideal_block(c, x, a as usize, b as usize) == 1 {
            shared_edges += 1;
        }
    }
    shared_edges as f64 - p * template_pairs(c, x) as f64
}

/// Per-structure additive contributions to the objective; indices follow the
/// structure labels in `c` (assumed dense `0..C-1`).
pub fn structure_contributions(net: &ConceptNetwork, c: &[u32], x: &[bool]) -> Vec<f64> {
    let n_structures = c.iter().map(|&s| s as usize + 1).max().unwrap_or(0);
    let p = edge_density(net).unwrap_or(0.0);
    let mut shared = vec![0u64; n_structures];
    for (a, b) in net.edges() {
        if ideal_block(c, x, a as usize, b as usize) == 1 {
            shared[c[a as usize] as usize] += 1;
        }
    }
    let mut totals = vec![0u64; n_structures];
    let mut peri = vec![0u64; n_structures];
    for (&s, &core) in c.iter().zip(x) {
        totals[s as usize] += 1;
        peri[s as usize] += u64::from(!core);
    }
    (0..n_structures)
        .map(|s| shared[s] as f64 - p * (pairs(totals[s]) - pairs(peri[s])) as f64)
        .collect()
}

/// Number of (i, j) pairs with B_ij = 1 under the labeling.
fn template_pairs(c: &[u32], x: &[bool]) -> u64 {
    let n_structures = c.iter().map(|&s| s as usize + 1).max().unwrap_or(0);
    let mut totals = vec![0u64; n_structures];
    let mut peri = vec![0u64; n_structures];
    for (&s, &core) in c.iter().zip(x) {
        totals[s as usize] += 1;
        peri[s as usize] += u64::from(!core);
    }
    (0..n_structures).map(|s| pairs(totals[s]) - pairs(peri[s])).sum()
}

fn pairs(n: u64) -> u64 {
    n * (n.saturating_sub(1)) / 2
}

#[cfg(test)]
mod tests;
