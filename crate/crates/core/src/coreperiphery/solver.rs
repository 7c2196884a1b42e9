//! Label-switching maximization of the core/periphery objective.
//!
//! Every node starts as its own singleton core. Nodes are scanned in a fresh
//! random order each round; a node may relabel to (c_j, core) or
//! (c_j, periphery) for any neighbor j, taking the move with the largest
//! strictly positive closed-form increment. The process stops when a full
//! scan changes nothing. The single-core variant fixes one structure and only
//! toggles coreness.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::network::{edge_density, ConceptNetwork};
use crate::seeds::task_seed;

use super::{qcp, CpAssignment, SolverConfig};

/// Increments at or below this threshold count as "no improvement". True
/// nonzero increments are integer multiples of 1/(N(N-1)/2), far above the
/// float noise of the closed form at realistic sizes.
const MIN_INCREMENT: f64 = 1e-9;

/// Maximizes the objective over multi-structure labelings.
///
/// Runs `cfg.n_restarts` independent restarts with derived seeds and returns
/// the best labeling with its structure indices compacted and renumbered by
/// descending size. The returned `qcp` is recomputed from scratch.
pub fn detect(net: &ConceptNetwork, cfg: &SolverConfig) -> CpAssignment {
    if cfg.single_core_mode {
        return detect_single_core(net, cfg);
    }
    run_restarts(net, cfg, Mode::Multi)
}

/// Maximizes the objective restricted to one structure (all c_i equal; only
/// coreness varies). The first restart starts all-core, so graphs where no
/// move improves (for example complete graphs) come back all-core.
pub fn detect_single_core(net: &ConceptNetwork, cfg: &SolverConfig) -> CpAssignment {
    run_restarts(net, cfg, Mode::SingleCore)
}

#[derive(Clone, Copy, PartialEq)]
enum Mode {
    Multi,
    SingleCore,
}

fn run_restarts(net: &ConceptNetwork, cfg: &SolverConfig, mode: Mode) -> CpAssignment {
    let n = net.n_nodes();
    if n == 0 {
        return CpAssignment {
            structure: vec![],
            is_core: vec![],
            qcp: 0.0,
            structure_sig: vec![],
            n_significant: 0,
        };
    }
    let mut best: Option<(Vec<u32>, Vec<bool>, f64)> = None;
    for restart in 0..cfg.n_restarts.max(1) {
        let seed = task_seed(cfg.rng_seed, "cp-restart", u64::from(restart));
        let (c, x) = run_label_switching(net, seed, mode, restart);
        let value = qcp(net, &c, &x);
        if best.as_ref().is_none_or(|(_, _, q)| value > *q) {
            best = Some((c, x, value));
        }
    }
    let (c, x, value) = best.expect("at least one restart");
    let (structure, is_core) = canonicalize(&c, &x);
    let n_structures = structure.iter().map(|&s| s as usize + 1).max().unwrap_or(0);
    CpAssignment {
        structure,
        is_core,
        qcp: value,
        structure_sig: vec![false; n_structures],
        n_significant: 0,
    }
}

/// One label-switching run. Returns the converged labeling.
fn run_label_switching(
    net: &ConceptNetwork,
    seed: u64,
    mode: Mode,
    restart: u32,
) -> (Vec<u32>, Vec<bool>) {
    let n = net.n_nodes();
    let p = edge_density(net).unwrap_or(0.0);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    let mut c: Vec<u32>;
    let mut x: Vec<bool>;
    match mode {
        Mode::Multi => {
            c = (0..n as u32).collect();
            x = vec![true; n];
        }
        Mode::SingleCore => {
            c = vec![0; n];
            // restart 0 is the all-core start; later restarts randomize
            // coreness to escape the flat all-core plateau
            x = if restart == 0 {
                vec![true; n]
            } else {
                (0..n).map(|_| rng.random_bool(0.5)).collect()
            };
        }
    }

    // per-structure label counts
    let mut n_core = vec![0u32; n];
    let mut n_peri = vec![0u32; n];
    for (&s, &core) in c.iter().zip(&x) {
        if core {
            n_core[s as usize] += 1;
        } else {
            n_peri[s as usize] += 1;
        }
    }

    // neighbor-label degree scratch
    let mut d_core = vec![0u32; n];
    let mut d_peri = vec![0u32; n];
    let mut touched: Vec<u32> = Vec::new();

    let mut order: Vec<u32> = (0..n as u32).collect();
    let mut tracked = qcp(net, &c, &x);

    loop {
        order.shuffle(&mut rng);
        let mut changed = false;
        for &i in &order {
            let iu = i as usize;
            for &j in net.neighbors(i) {
                let s = c[j as usize] as usize;
                if d_core[s] == 0 && d_peri[s] == 0 {
                    touched.push(s as u32);
                }
                if x[j as usize] {
                    d_core[s] += 1;
                } else {
                    d_peri[s] += 1;
                }
            }
            let (cur_s, cur_x) = (c[iu], x[iu]);
            let old = contribution(p, &d_core, &d_peri, &n_core, &n_peri, cur_s, cur_x, cur_s, cur_x);

            let mut best_inc = MIN_INCREMENT;
            let mut best_move: Option<(u32, bool)> = None;
            let candidates = match mode {
                Mode::Multi => touched.as_slice(),
                Mode::SingleCore => &[0],
            };
            // periphery before core: at an exact tie (which happens whenever
            // a node first joins a pure-core structure), demotion keeps the
            // search off the all-core plateau
            for &s in candidates {
                for new_x in [false, true] {
                    if (s, new_x) == (cur_s, cur_x) {
                        continue;
                    }
                    let fresh =
                        contribution(p, &d_core, &d_peri, &n_core, &n_peri, s, new_x, cur_s, cur_x);
                    let inc = fresh - old;
                    if inc > best_inc {
                        best_inc = inc;
                        best_move = Some((s, new_x));
                    }
                }
            }

            if let Some((new_s, new_x)) = best_move {
                if cur_x {
                    n_core[cur_s as usize] -= 1;
                } else {
                    n_peri[cur_s as usize] -= 1;
                }
                if new_x {
                    n_core[new_s as usize] += 1;
                } else {
                    n_peri[new_s as usize] += 1;
                }
                c[iu] = new_s;
                x[iu] = new_x;
                tracked += best_inc;
                changed = true;
            }

            for &s in &touched {
                d_core[s as usize] = 0;
                d_peri[s as usize] = 0;
            }
            touched.clear();
        }
        if !changed {
            break;
        }
    }

    debug_assert!(
        (tracked - qcp(net, &c, &x)).abs() < 1e-6,
        "accepted increments drifted from the recomputed objective"
    );
    (c, x)
}

/// Contribution of node i under label (s, core), with the label counts taken
/// from the current state where i holds (cur_s, cur_x).
///
/// d_core/d_peri are i's neighbor counts per label; n_core/n_peri are global
/// label counts. The correction term excludes i itself from its candidate
/// structure's counts.
#[allow(clippy::too_many_arguments)]
fn contribution(
    p: f64,
    d_core: &[u32],
    d_peri: &[u32],
    n_core: &[u32],
    n_peri: &[u32],
    s: u32,
    core: bool,
    cur_s: u32,
    cur_x: bool,
) -> f64 {
    let su = s as usize;
    let x = f64::from(core);
    let self_correction = if s == cur_s {
        f64::from(cur_x || core)
    } else {
        0.0
    };
    f64::from(d_core[su]) + x * f64::from(d_peri[su])
        - p * (f64::from(n_core[su]) + x * f64::from(n_peri[su]) - self_correction)
}

/// Compacts structure labels to dense indices ordered by descending size
/// (ties by smallest member node).
fn canonicalize(c: &[u32], x: &[bool]) -> (Vec<u32>, Vec<bool>) {
    let mut size: std::collections::BTreeMap<u32, (usize, usize)> = std::collections::BTreeMap::new();
    for (i, &s) in c.iter().enumerate() {
        let entry = size.entry(s).or_insert((0, i));
        entry.0 += 1;
    }
    let mut ordered: Vec<(u32, usize, usize)> =
        size.into_iter().map(|(s, (n, first))| (s, n, first)).collect();
    ordered.sort_by(|a, b| b.1.cmp(&a.1).then(a.2.cmp(&b.2)));
    let mut remap = std::collections::BTreeMap::new();
    for (rank, (s, _, _)) in ordered.into_iter().enumerate() {
        remap.insert(s, rank as u32);
    }
    (c.iter().map(|s| remap[s]).collect(), x.to_vec())
}

/// Test-only access to a single converged run, for the increment and
/// monotonicity checks.
#[cfg(test)]
pub(crate) fn single_run_for_tests(
    net: &ConceptNetwork,
    seed: u64,
) -> (Vec<u32>, Vec<bool>) {
    run_label_switching(net, seed, Mode::Multi, 0)
}

/// The closed-form increment for relabeling node `i` from its current label
/// to (new_s, new_x), exposed for direct verification against from-scratch
/// objective differences.
pub fn switch_increment(
    net: &ConceptNetwork,
    c: &[u32],
    x: &[bool],
    i: usize,
    new_s: u32,
    new_x: bool,
) -> f64 {
    let p = edge_density(net).unwrap_or(0.0);
    let n_structures = c
        .iter()
        .map(|&s| s as usize + 1)
        .max()
        .unwrap_or(0)
        .max(new_s as usize + 1);
    let mut n_core = vec![0u32; n_structures];
    let mut n_peri = vec![0u32; n_structures];
    for (&s, &core) in c.iter().zip(x) {
        if core {
            n_core[s as usize] += 1;
        } else {
            n_peri[s as usize] += 1;
        }
    }
    let mut d_core = vec![0u32; n_structures];
    let mut d_peri = vec![0u32; n_structures];
    for &j in net.neighbors(i as u32) {
        if x[j as usize] {
            d_core[c[j as usize] as usize] += 1;
        } else {
            d_peri[c[j as usize] as usize] += 1;
        }
    }
    let old = contribution(p, &d_core, &d_peri, &n_core, &n_peri, c[i], x[i], c[i], x[i]);
    let new = contribution(p, &d_core, &d_peri, &n_core, &n_peri, new_s, new_x, c[i], x[i]);
    new - old
}
