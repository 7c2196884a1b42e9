//! Synthetic fixtures: planted core/periphery graphs with known ground truth
//! and a generated demo corpus with engineered core evolution.
//!
//! The demo corpus writes abstracts whose noun phrases survive the extraction
//! pipeline verbatim, so the planted concept trajectories are recoverable end
//! to end: three subfields over ten years, core turnover shrinking year over
//! year, a growing periphery, reference lists for the disruption index, and
//! citation-marker sentences for the consensus analysis.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::coreperiphery::CpAssignment;
use crate::ingest::{CellKey, PaperRecord};
use crate::network::ConceptNetwork;
use crate::seeds::task_seed;

/// Block shape for planted core/periphery networks.
#[derive(Debug, Clone, Copy)]
pub struct PlantedBlock {
    pub n_core: usize,
    pub n_periphery: usize,
}

/// Ground-truth labeling of a planted network.
#[derive(Debug, Clone)]
pub struct PlantedTruth {
    pub structure: Vec<u32>,
    pub is_core: Vec<bool>,
}

/// Builds a planted multi-block core/periphery network.
///
/// Within each block, core-core and core-periphery pairs are edges and
/// periphery-periphery pairs are not; blocks are disconnected. Each pair then
/// flips with probability `noise`. Re-samples (deterministically) if noise
/// isolates a node.
pub fn planted_cp_network(
    blocks: &[PlantedBlock],
    noise: f64,
    seed: u64,
) -> (ConceptNetwork, PlantedTruth) {
    let n: usize = blocks.iter().map(|b| b.n_core + b.n_periphery).sum();
    let mut structure = Vec::with_capacity(n);
    let mut is_core = Vec::with_capacity(n);
    for (b, block) in blocks.iter().enumerate() {
        for i in 0..block.n_core + block.n_periphery {
            structure.push(b as u32);
            is_core.push(i < block.n_core);
        }
    }
    for attempt in 0.. {
        let mut rng = ChaCha8Rng::seed_from_u64(task_seed(seed, "planted", attempt));
        let mut edges = Vec::new();
        for i in 0..n {
            for j in i + 1..n {
                let template = structure[i] == structure[j] && (is_core[i] || is_core[j]);
                let flip = noise > 0.0 && rng.random_bool(noise);
                if template != flip {
                    edges.push((i as u32, j as u32));
                }
            }
        }
        let mut degree = vec![0usize; n];
        for &(a, b) in &edges {
            degree[a as usize] += 1;
            degree[b as usize] += 1;
        }
        if degree.iter().all(|&d| d > 0) {
            let net = ConceptNetwork::from_raw_edges(CellKey::new("planted", 0), n, &edges);
            return (net, PlantedTruth { structure, is_core });
        }
    }
    unreachable!("resampling loop always returns")
}

/// Node-level recovery accuracy of an assignment against planted truth.
///
/// Each detected structure maps to the planted block it overlaps most; a node
/// counts as correct when its mapped block and coreness both match the truth.
pub fn recovery_accuracy(truth: &PlantedTruth, asg: &CpAssignment) -> f64 {
    let n = truth.structure.len();
    if n == 0 || asg.structure.len() != n {
        return 0.0;
    }
    let n_detected = asg.n_structures();
    let n_planted = truth.structure.iter().map(|&s| s as usize + 1).max().unwrap_or(0);
    let mut overlap = vec![vec![0usize; n_planted]; n_detected];
    for i in 0..n {
        overlap[asg.structure[i] as usize][truth.structure[i] as usize] += 1;
    }
    let mapping: Vec<usize> = overlap
        .iter()
        .map(|row| row.iter().enumerate().max_by_key(|(_, &v)| v).map_or(0, |(b, _)| b))
        .collect();
    let correct = (0..n)
        .filter(|&i| {
            mapping[asg.structure[i] as usize] == truth.structure[i] as usize
                && asg.is_core[i] == truth.is_core[i]
        })
        .count();
    correct as f64 / n as f64
}

const ADJ_WORDS: &[&str] = &[
    "coherent", "adaptive", "latent", "modular", "recursive", "spectral", "kinetic",
    "stochastic", "topological", "covalent", "resonant", "chiral", "viscous", "turbulent",
    "laminar", "polar", "axial", "radial", "hybrid", "planar",
];

const NOUN_WORDS: &[&str] = &[
    "lattice", "vortex", "membrane", "cascade", "manifold", "soliton", "dipole", "plasma",
    "polymer", "quasar", "neutrino", "fermion", "boson", "magnon", "exciton", "phonon",
    "tensor", "spinor", "waveguide", "resonator", "torque", "flux", "plume", "dimer", "halo",
    "cavity", "antenna", "filament", "droplet", "vesicle",
];

const NAME_HEADS: &[&str] = &[
    "Bel", "Cor", "Dal", "Fen", "Gar", "Hol", "Jas", "Kel", "Lor", "Mar", "Nor", "Or", "Pel",
    "Quin", "Ros", "Sal", "Tor", "Ul", "Ven", "Wil",
];
const NAME_TAILS: &[&str] = &[
    "ano", "berg", "dell", "etti", "ford", "gren", "hart", "ison", "kov", "lund", "mann",
    "nari", "osa", "pera", "quez", "ress", "sted", "tama", "umel", "wick",
];

const STUDY_VERBS: &[&str] =
    &["study", "examine", "measure", "observe", "investigate", "analyze", "explore", "consider"];

/// Demo corpus parameters.
#[derive(Debug, Clone, Copy)]
pub struct DemoConfig {
    pub seed: u64,
    pub start_year: i32,
    pub n_years: u32,
    pub papers_per_cell: usize,
}

impl Default for DemoConfig {
    fn default() -> Self {
        DemoConfig { seed: 7, start_year: 2001, n_years: 10, papers_per_cell: 36 }
    }
}

/// A generated demo corpus plus its field scheme.
#[derive(Debug, Clone)]
pub struct DemoCorpus {
    pub records: Vec<PaperRecord>,
    pub scheme_tsv: String,
}

struct BlockState {
    core: Vec<String>,
    periphery: Vec<(String, i32)>, // concept, birth year index
    pool_base: usize,
}

/// Staggered initial ages so periphery cohorts retire a few at a time
/// instead of all at once.
fn seed_periphery(phrases: Vec<String>) -> Vec<(String, i32)> {
    phrases.into_iter().enumerate().map(|(i, p)| (p, -((i % 3) as i32))).collect()
}

/// Deals concepts in a shuffled cycle so per-concept mention counts stay
/// balanced (a concept active for one year must still clear the vocabulary
/// threshold).
struct Dealer {
    order: Vec<String>,
    cursor: usize,
}

impl Dealer {
    fn new(mut items: Vec<String>, rng: &mut ChaCha8Rng) -> Dealer {
        items.shuffle(rng);
        Dealer { order: items, cursor: 0 }
    }

    fn deal(&mut self, k: usize) -> Vec<String> {
        let n = self.order.len();
        let k = k.min(n);
        let out = (0..k).map(|i| self.order[(self.cursor + i) % n].clone()).collect();
        self.cursor = (self.cursor + k) % n.max(1);
        out
    }
}

/// Core turnover fraction for year transition `t` (1-based): high early,
/// shrinking late.
fn turnover(t: u32) -> f64 {
    (0.78 - 0.08 * (t as f64 - 1.0)).max(0.10)
}

/// Generates the bundled synthetic corpus: subfields `alpha.dynamics` and
/// `alpha.fields` with one planted block each (the first gains a second block
/// halfway through), and `beta.networks` with two blocks throughout.
pub fn demo_corpus(cfg: &DemoConfig) -> DemoCorpus {
    let mut rng = ChaCha8Rng::seed_from_u64(task_seed(cfg.seed, "demo", 0));

    // unique phrase supply
    let mut phrases: Vec<String> = Vec::new();
    for adj in ADJ_WORDS {
        for noun in NOUN_WORDS {
            phrases.push(format!("{adj} {noun}"));
        }
    }
    phrases.shuffle(&mut rng);
    let mut supply = phrases.into_iter();
    let take = |n: usize, supply: &mut dyn Iterator<Item = String>| -> Vec<String> {
        (0..n).map(|_| supply.next().expect("phrase supply exhausted")).collect()
    };

    // surname supply for citation markers, reused round-robin (each stays
    // far below the vocabulary threshold)
    let mut names: Vec<String> = NAME_HEADS
        .iter()
        .flat_map(|h| NAME_TAILS.iter().map(move |t| format!("{h}{t}")))
        .collect();
    names.shuffle(&mut rng);

    struct Subfield {
        id: &'static str,
        blocks: Vec<BlockState>,
        second_block_year: Option<u32>,
    }
    let mut subfields = vec![
        Subfield {
            id: "alpha.dynamics",
            blocks: vec![BlockState {
                core: take(14, &mut supply),
                periphery: seed_periphery(take(12, &mut supply)),
                pool_base: 12,
            }],
            second_block_year: Some(5),
        },
        Subfield {
            id: "alpha.fields",
            blocks: vec![BlockState {
                core: take(14, &mut supply),
                periphery: seed_periphery(take(12, &mut supply)),
                pool_base: 12,
            }],
            second_block_year: None,
        },
        Subfield {
            id: "beta.networks",
            blocks: vec![
                BlockState {
                    core: take(7, &mut supply),
                    periphery: seed_periphery(take(8, &mut supply)),
                    pool_base: 8,
                },
                BlockState {
                    core: take(7, &mut supply),
                    periphery: seed_periphery(take(8, &mut supply)),
                    pool_base: 8,
                },
            ],
            second_block_year: None,
        },
    ];

    let mut records: Vec<PaperRecord> = Vec::new();
    let mut ids_by_cell: std::collections::BTreeMap<(usize, u32), Vec<String>> = Default::default();
    let mut name_cursor = 0usize;

    for t in 0..cfg.n_years {
        let year = cfg.start_year + t as i32;
        for (sf_idx, sf) in subfields.iter_mut().enumerate() {
            if t > 0 {
                // core turnover and periphery rotation
                let rho = turnover(t);
                for block in &mut sf.blocks {
                    let k = (rho * block.core.len() as f64).round() as usize;
                    block.core.shuffle(&mut rng);
                    for slot in block.core.iter_mut().take(k) {
                        *slot = supply.next().expect("phrase supply exhausted");
                    }
                    block.core.sort();
                    // retire periphery concepts after four active years; the
                    // pool target grows so the periphery expands over time
                    block.periphery.retain(|(_, born)| (t as i32) - born < 4);
                    let target = block.pool_base + t as usize / 2;
                    let refill = target.saturating_sub(block.periphery.len()).max(2);
                    for p in take(refill, &mut supply) {
                        block.periphery.push((p, t as i32));
                    }
                }
            }
            if sf.second_block_year == Some(t) {
                sf.blocks.push(BlockState {
                    core: take(5, &mut supply),
                    periphery: take(6, &mut supply)
                        .into_iter()
                        .map(|p| (p, t as i32))
                        .collect(),
                    pool_base: 6,
                });
            }

            let n_blocks = sf.blocks.len();
            let mut dealers: Vec<(Dealer, Dealer)> = sf
                .blocks
                .iter()
                .map(|b| {
                    let pool: Vec<String> =
                        b.periphery.iter().map(|(p, _)| p.clone()).collect();
                    (Dealer::new(b.core.clone(), &mut rng), Dealer::new(pool, &mut rng))
                })
                .collect();
            for k in 0..cfg.papers_per_cell {
                let (core_dealer, peri_dealer) = &mut dealers[k % n_blocks];
                let paper_id = format!("{}-{year}-{k:03}", sf.id);
                let base = if n_blocks > 1 { 0.5 } else { 0.3 };
                let two_peri_prob = (base + 0.05 * f64::from(t)).min(0.85);
                let cores = core_dealer.deal(4);
                let peri = peri_dealer.deal(if rng.random_bool(two_peri_prob) { 2 } else { 1 });
                let abstract_text =
                    compose_abstract(&cores, &peri, &mut rng, &names, &mut name_cursor, year);
                let refs = sample_refs(&ids_by_cell, sf_idx, t, &mut rng);
                records.push(PaperRecord {
                    paper_id: paper_id.clone(),
                    year,
                    field_ids: vec![sf.id.to_string()],
                    abstract_text,
                    author_count: rng.random_range(1..=8),
                    reference_ids: refs,
                });
                ids_by_cell.entry((sf_idx, t)).or_default().push(paper_id);
            }
        }
    }

    let scheme_tsv = "alpha.dynamics\talpha sciences\n\
                      alpha.fields\talpha sciences\n\
                      beta.networks\tbeta sciences\n"
        .to_string();
    DemoCorpus { records, scheme_tsv }
}

fn compose_abstract(
    cores: &[String],
    peri: &[String],
    rng: &mut ChaCha8Rng,
    names: &[String],
    name_cursor: &mut usize,
    year: i32,
) -> String {
    let verb = STUDY_VERBS[rng.random_range(0..STUDY_VERBS.len())];
    let opener = match rng.random_range(0..4) {
        0 => "Moreover, the",
        1 => "Here the",
        _ => "The",
    };
    let mut text = format!(
        "We {verb} the {} and the {}. {opener} {} interacts with the {}. \
         We find that the {} depends on the {}.",
        cores[0], cores[1], cores[2], cores[3], peri[0], cores[0],
    );
    if let Some(p2) = peri.get(1) {
        text.push_str(&format!(" The {p2} follows from the {}.", cores[1]));
    }
    match rng.random_range(0..10) {
        0..=2 => {
            let name = &names[*name_cursor % names.len()];
            *name_cursor += 1;
            text.push_str(&format!(" We agree with {name} ({}).", year - rng.random_range(1..=6)));
        }
        3..=4 => {
            let name = &names[*name_cursor % names.len()];
            *name_cursor += 1;
            text.push_str(&format!(" We build on {name} ({}).", year - rng.random_range(1..=6)));
        }
        5 => {
            text.push_str(&format!(" We confirm and extend [{}].", rng.random_range(1..40)));
        }
        _ => {}
    }
    text
}

fn sample_refs(
    ids_by_cell: &std::collections::BTreeMap<(usize, u32), Vec<String>>,
    sf_idx: usize,
    t: u32,
    rng: &mut ChaCha8Rng,
) -> Vec<String> {
    let mut refs = Vec::new();
    if t == 0 {
        return refs;
    }
    let n_refs = rng.random_range(2..=6);
    for _ in 0..n_refs {
        let back = rng.random_range(1..=t.min(2));
        let src = if rng.random_bool(0.9) { sf_idx } else { (sf_idx + 1) % 3 };
        if let Some(pool) = ids_by_cell.get(&(src, t - back)) {
            let pick = &pool[rng.random_range(0..pool.len())];
            if !refs.contains(pick) {
                refs.push(pick.clone());
            }
        }
    }
    refs
}
