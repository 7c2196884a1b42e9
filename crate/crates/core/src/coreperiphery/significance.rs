//! Structure significance screening against matched random graphs.
//!
//! Each detected structure's size-normalized objective contribution is
//! compared with the pooled distribution of the same statistic from random
//! graphs with the observed node count and density, each run through the same
//! detector. Structures above the Sidak-corrected one-sided quantile count as
//! significant; the count defines the S metric.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::ingest::CellKey;
use crate::network::ConceptNetwork;
use crate::seeds::task_seed;

use super::{detect, structure_contributions, CpAssignment, CpError, SolverConfig};

/// Fills the assignment's significance flags and returns the significant
/// structure count.
pub fn count_significant(
    net: &ConceptNetwork,
    asg: &mut CpAssignment,
    cfg: &SolverConfig,
) -> Result<usize, CpError> {
    if cfg.sig_samples < 100 {
        return Err(CpError::Config(format!(
            "sig_samples must be at least 100, got {}",
            cfg.sig_samples
        )));
    }
    let n_structures = asg.n_structures();
    if n_structures == 0 {
        asg.n_significant = 0;
        return Ok(0);
    }
    let observed = normalized_qualities(net, asg);

    let mut pool: Vec<f64> = (0..cfg.sig_samples)
        .into_par_iter()
        .map(|sample| {
            let seed = task_seed(cfg.rng_seed, "sig-sample", u64::from(sample));
            let random = sample_gnm(net.n_nodes(), net.n_edges(), seed);
            let sub_cfg = SolverConfig { rng_seed: task_seed(seed, "detect", 0), ..*cfg };
            let null_asg = detect(&random, &sub_cfg);
            normalized_qualities(&random, &null_asg)
        })
        .collect::<Vec<_>>()
        .into_iter()
        .flatten()
        .collect();
    pool.sort_unstable_by(|a, b| a.partial_cmp(b).expect("finite qualities"));

    let alpha_corr = 1.0 - (1.0 - cfg.sig_alpha).powf(1.0 / n_structures as f64);
    let threshold = upper_quantile(&pool, 1.0 - alpha_corr);
    asg.structure_sig = observed.iter().map(|&q| q > threshold).collect();
    asg.n_significant = asg.structure_sig.iter().filter(|&&s| s).count();
    Ok(asg.n_significant)
}

/// Per-structure objective contribution divided by structure size.
fn normalized_qualities(net: &ConceptNetwork, asg: &CpAssignment) -> Vec<f64> {
    let contributions = structure_contributions(net, &asg.structure, &asg.is_core);
    let sizes = asg.structure_sizes();
    contributions
        .iter()
        .zip(&sizes)
        .map(|(q, (total, _))| q / (*total).max(1) as f64)
        .collect()
}

/// The empirical quantile at level `q` using the "higher" order statistic.
fn upper_quantile(sorted: &[f64], q: f64) -> f64 {
    if sorted.is_empty() {
        return f64::INFINITY;
    }
    let rank = (q * sorted.len() as f64).ceil() as usize;
    sorted[rank.clamp(1, sorted.len()) - 1]
}

/// Uniform random graph with exactly `m` edges over `n` nodes (the
/// fixed-density Erdos-Renyi variant, so the null density matches the
/// observed one exactly).
pub fn sample_gnm(n: usize, m: usize, seed: u64) -> ConceptNetwork {
    let cell = CellKey::new("random", 0);
    let total = n * n.saturating_sub(1) / 2;
    let m = m.min(total);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    if m == total {
        let mut edges = Vec::with_capacity(total);
        for i in 0..n as u32 {
            for j in i + 1..n as u32 {
                edges.push((i, j));
            }
        }
        return ConceptNetwork::from_raw_edges(cell, n, &edges);
    }
    // sample the smaller of the edge set and its complement
    let sample_complement = m > total / 2;
    let k = if sample_complement { total - m } else { m };
    let mut picked = std::collections::HashSet::with_capacity(k);
    while picked.len() < k {
        let a = rng.random_range(0..n as u32);
        let b = rng.random_range(0..n as u32);
        if a == b {
            continue;
        }
        picked.insert((a.min(b), a.max(b)));
    }
    let edges: Vec<(u32, u32)> = if sample_complement {
        let mut edges = Vec::with_capacity(m);
        for i in 0..n as u32 {
            for j in i + 1..n as u32 {
                if !picked.contains(&(i, j)) {
                    edges.push((i, j));
                }
            }
        }
        edges
    } else {
        picked.into_iter().collect()
    };
    ConceptNetwork::from_raw_edges(cell, n, &edges)
}
