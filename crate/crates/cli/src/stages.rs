//! Pipeline stages: each reads its upstream artifacts, writes its outputs,
//! and records a manifest entry with input/output hashes.

use std::collections::{BTreeMap, BTreeSet};
use std::fs::{self, File};
use std::io::BufReader;

use anyhow::{Context, Result};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use coreperi_core::concepts::{ConceptExtractor, ConceptVocabulary};
use coreperi_core::coreperiphery::{count_significant, detect, CpAssignment, SolverConfig};
use coreperi_core::ingest::{self, CellKey, FieldScheme};
use coreperi_core::metrics::{self, CellClasses, MetricRow, MobilityRow};
use coreperi_core::network::ConceptNetwork;
use coreperi_core::nullmodel::{self, NullCompareConfig, NullMetric};
use coreperi_core::scientometrics::{
    cd_index, consensus_count, has_prior_work_comment, CitationGraph, CitationMarkers,
    ConsensusDictionary, CountMode,
};
use coreperi_core::seeds::derive_seed;

use crate::artifacts::{
    self, read_assignment, read_cell_index, read_paper_concepts, write_assignment,
    write_cell_index, write_paper_concepts, CellAssignment, CellIndexRow, PaperConcepts, Paths,
};
use crate::config::RunConfig;
use crate::manifest::{hash_bytes, require_artifact};
use crate::RunContext;

/// Builds the extractor with any configured extra stop words.
pub fn extractor_for(cfg: &RunConfig) -> Result<ConceptExtractor> {
    let mut extractor = ConceptExtractor::bundled();
    if let Some(path) = &cfg.extra_stopwords {
        let text = fs::read_to_string(path)
            .with_context(|| format!("cannot read stop words {}", path.display()))?;
        extractor.add_stopwords(coreperi_core::concepts::parse_word_list(&text));
    }
    Ok(extractor)
}

fn meta<I: IntoIterator<Item = (&'static str, String)>>(items: I) -> BTreeMap<String, String> {
    items.into_iter().map(|(k, v)| (k.to_string(), v)).collect()
}

pub fn stage_extract(ctx: &mut RunContext) -> Result<()> {
    let cfg = &ctx.cfg;
    let paths = Paths::new(&cfg.out_dir);
    artifacts::create_dir(&cfg.out_dir)?;

    let (records, stats) = ingest::load_corpus(&cfg.corpus, (cfg.year_min, cfg.year_max))?;
    log::info!("ingest: accepted {} records, rejected {}", stats.accepted, stats.rejected);

    let extractor = extractor_for(cfg)?;
    let sets: Vec<BTreeSet<String>> = records
        .par_iter()
        .map(|r| extractor.extract_concepts(&r.abstract_text))
        .collect();
    let vocab = ConceptVocabulary::from_concept_sets(&sets, cfg.threshold_enum()?)?;
    log::info!("vocabulary: {} concepts from {} abstracts", vocab.len(), vocab.total_abstracts);

    let mut vocab_file = File::create(paths.vocabulary())?;
    vocab.write_tsv(&mut vocab_file)?;

    let items: Vec<PaperConcepts> = records
        .iter()
        .zip(&sets)
        .map(|(r, set)| PaperConcepts {
            id: r.paper_id.clone(),
            year: r.year,
            fields: r.field_ids.clone(),
            concepts: set.iter().cloned().collect(),
        })
        .collect();
    write_paper_concepts(&paths.paper_concepts(), &items)?;

    ctx.manifest.record_stage(
        &cfg.out_dir,
        "extract",
        hash_bytes(cfg.canonical_json().as_bytes()),
        &[cfg.corpus.clone()],
        &[paths.vocabulary(), paths.paper_concepts()],
        meta([
            ("accepted", stats.accepted.to_string()),
            ("rejected", stats.rejected.to_string()),
            ("vocabulary_size", vocab.len().to_string()),
        ]),
    )
}

/// Groups per-paper concept sets into (subfield, window-end-year) cells,
/// mirroring the windowing of `ingest::group_by_cell`.
fn group_concepts<'a>(
    items: &'a [PaperConcepts],
    scheme: &FieldScheme,
    window: u32,
    max_end: i32,
) -> BTreeMap<CellKey, Vec<&'a PaperConcepts>> {
    let mut cells: BTreeMap<CellKey, Vec<&PaperConcepts>> = BTreeMap::new();
    for item in items {
        for subfield in scheme.assigned_fields(&item.fields) {
            let last = (item.year + window as i32 - 1).min(max_end);
            for end_year in item.year..=last {
                cells.entry(CellKey::new(subfield, end_year)).or_default().push(item);
            }
        }
    }
    cells
}

pub fn stage_build_net(ctx: &mut RunContext) -> Result<()> {
    let cfg = &ctx.cfg;
    let paths = Paths::new(&cfg.out_dir);
    require_artifact(&paths.vocabulary(), "extract")?;
    require_artifact(&paths.paper_concepts(), "extract")?;
    ctx.manifest.check_freshness(&cfg.out_dir, "extract", &paths.vocabulary())?;
    ctx.manifest.check_freshness(&cfg.out_dir, "extract", &paths.paper_concepts())?;
    artifacts::create_dir(&paths.networks_dir())?;

    let vocab_text = fs::read_to_string(paths.vocabulary())?;
    let vocab = ConceptVocabulary::read_tsv(&vocab_text, cfg.threshold_enum()?);
    let items = read_paper_concepts(&paths.paper_concepts())?;
    let scheme = FieldScheme::load(&cfg.scheme, cfg.assignment_mode_enum()?)?;
    let cells = group_concepts(&items, &scheme, cfg.window, cfg.year_max);

    let mut stems = BTreeMap::new();
    let named: Vec<(CellKey, String, Vec<&PaperConcepts>)> = cells
        .into_iter()
        .map(|(cell, members)| {
            let stem = artifacts::cell_stem(&cell, &mut stems);
            (cell, stem, members)
        })
        .collect();

    let built: Vec<(CellKey, String, Option<ConceptNetwork>)> = named
        .par_iter()
        .map(|(cell, stem, members)| {
            let sets: Vec<BTreeSet<String>> =
                members.iter().map(|m| m.concepts.iter().cloned().collect()).collect();
            let net = ConceptNetwork::build(cell.clone(), &sets, &vocab);
            (cell.clone(), stem.clone(), net)
        })
        .collect();

    let mut index = Vec::new();
    let mut skipped = 0usize;
    let mut outputs = vec![paths.networks_index()];
    for (cell, stem, net) in built {
        match net {
            Some(net) => {
                let file = format!("{stem}.edges");
                let path = paths.networks_dir().join(&file);
                let mut w = File::create(&path)?;
                net.write_edge_list(&mut w)?;
                index.push(CellIndexRow {
                    subfield: cell.subfield,
                    year: cell.year,
                    file,
                    n_nodes: net.n_nodes(),
                    n_edges: net.n_edges(),
                });
                outputs.push(path);
            }
            None => {
                log::info!("cell {cell}: no co-occurring vocabulary concepts, skipped");
                skipped += 1;
            }
        }
    }
    write_cell_index(&paths.networks_index(), &index)?;
    log::info!("built {} cell networks ({skipped} skipped)", index.len());

    ctx.manifest.record_stage(
        &cfg.out_dir,
        "build-net",
        hash_bytes(cfg.canonical_json().as_bytes()),
        &[paths.vocabulary(), paths.paper_concepts(), cfg.scheme.clone()],
        &outputs,
        meta([
            ("cells", index.len().to_string()),
            ("skipped", skipped.to_string()),
        ]),
    )
}

fn load_networks(paths: &Paths) -> Result<Vec<(CellIndexRow, ConceptNetwork)>> {
    let index = read_cell_index(&paths.networks_index())?;
    index
        .into_iter()
        .map(|row| {
            let path = paths.networks_dir().join(&row.file);
            let reader = BufReader::new(
                File::open(&path).with_context(|| format!("cannot open {}", path.display()))?,
            );
            let net = ConceptNetwork::read_edge_list(reader)?;
            Ok((row, net))
        })
        .collect()
}

pub fn stage_detect(ctx: &mut RunContext) -> Result<()> {
    let cfg = &ctx.cfg;
    let paths = Paths::new(&cfg.out_dir);
    require_artifact(&paths.networks_index(), "build-net")?;
    ctx.manifest.check_freshness(&cfg.out_dir, "build-net", &paths.networks_index())?;
    artifacts::create_dir(&paths.assignments_dir())?;

    let networks = load_networks(&paths)?;
    let solver = cfg.solver_config();
    let detected: Vec<(CellIndexRow, ConceptNetwork, CpAssignment)> = networks
        .into_par_iter()
        .map(|(row, net)| -> Result<_> {
            let cell_solver = SolverConfig {
                rng_seed: derive_seed(solver.rng_seed, &[b"cell", net.cell.to_string().as_bytes()]),
                ..solver
            };
            let mut asg = if solver.single_core_mode {
                coreperi_core::coreperiphery::detect_single_core(&net, &cell_solver)
            } else {
                detect(&net, &cell_solver)
            };
            count_significant(&net, &mut asg, &cell_solver)?;
            Ok((row, net, asg))
        })
        .collect::<Result<Vec<_>>>()?;

    let mut index = Vec::new();
    let mut outputs = vec![paths.assignments_index()];
    for (row, net, asg) in &detected {
        let file = format!("{}.tsv", row.file.trim_end_matches(".edges"));
        let path = paths.assignments_dir().join(&file);
        write_assignment(&path, &net.cell, net.labels(), asg)?;
        index.push(CellIndexRow {
            subfield: row.subfield.clone(),
            year: row.year,
            file,
            n_nodes: net.n_nodes(),
            n_edges: net.n_edges(),
        });
        outputs.push(path);
    }
    write_cell_index(&paths.assignments_index(), &index)?;
    let total_significant: usize = detected.iter().map(|(_, _, a)| a.n_significant).sum();
    log::info!(
        "detected structures in {} cells ({} significant overall)",
        index.len(),
        total_significant
    );

    ctx.manifest.record_stage(
        &cfg.out_dir,
        "detect",
        hash_bytes(cfg.canonical_json().as_bytes()),
        &[paths.networks_index()],
        &outputs,
        meta([("cells", index.len().to_string())]),
    )
}

fn load_assignments(paths: &Paths) -> Result<Vec<CellAssignment>> {
    let index = read_cell_index(&paths.assignments_index())?;
    index
        .iter()
        .map(|row| read_assignment(&paths.assignments_dir().join(&row.file)))
        .collect()
}

/// Per-structure churn rows for the structure-level rigidity comparison.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StructureChurnRow {
    pub subfield: String,
    pub year: i32,
    pub structure: u32,
    pub churn: f64,
    pub is_largest: bool,
}

/// Concept profile rows.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ProfileRow {
    pub concept: String,
    pub n_words: u32,
    pub n_chars: u32,
    pub n_digits: u32,
    pub n_subfields: u32,
    pub n_papers: u32,
    pub core_share: f64,
}

pub fn stage_metrics(ctx: &mut RunContext) -> Result<()> {
    let cfg = &ctx.cfg;
    let paths = Paths::new(&cfg.out_dir);
    require_artifact(&paths.assignments_index(), "detect")?;
    require_artifact(&paths.vocabulary(), "extract")?;
    ctx.manifest.check_freshness(&cfg.out_dir, "detect", &paths.assignments_index())?;

    let cells = load_assignments(&paths)?;
    let scheme = FieldScheme::load(&cfg.scheme, cfg.assignment_mode_enum()?)?;

    // organize by subfield, ascending years
    let mut by_subfield: BTreeMap<&str, Vec<&CellAssignment>> = BTreeMap::new();
    for cell in &cells {
        by_subfield.entry(&cell.cell.subfield).or_default().push(cell);
    }

    let mut metric_rows: Vec<MetricRow> = Vec::new();
    let mut mobility_rows: Vec<MobilityRow> = Vec::new();
    let mut structure_rows: Vec<StructureChurnRow> = Vec::new();
    let mut subfield_totals: BTreeMap<String, usize> = BTreeMap::new();

    for (subfield, seq) in &by_subfield {
        let mut prev: Option<&CellAssignment> = None;
        let mut distinct: BTreeSet<&str> = BTreeSet::new();
        for cell in seq {
            distinct.extend(cell.labels.iter().map(String::as_str));
            let asg = &cell.assignment;
            let classes = CellClasses::from_assignment(&cell.labels, asg);
            let consecutive = prev
                .filter(|p| p.cell.year + 1 == cell.cell.year);
            let churn = consecutive.and_then(|p| {
                let prev_classes = CellClasses::from_assignment(&p.labels, &p.assignment);
                metrics::churn(&classes.core, &prev_classes.core)
            });
            metric_rows.push(MetricRow {
                subfield: subfield.to_string(),
                year: cell.cell.year,
                churn,
                rel_core_size: metrics::relative_core_size(asg),
                n_cores: asg.n_significant,
                herfindahl: metrics::herfindahl(asg, metrics::HerfindahlBasis::TotalMembership),
                n_nodes: asg.n_nodes(),
                n_core_nodes: asg.n_core_nodes(),
            });
            if let Some(p) = consecutive {
                let prev_classes = CellClasses::from_assignment(&p.labels, &p.assignment);
                mobility_rows.push(metrics::mobility(
                    subfield,
                    cell.cell.year,
                    &prev_classes,
                    &classes,
                ));
                let churns =
                    metrics::per_structure_churn(&cell.labels, asg, &prev_classes.core);
                for (structure, value) in &churns {
                    structure_rows.push(StructureChurnRow {
                        subfield: subfield.to_string(),
                        year: cell.cell.year,
                        structure: structure + 1,
                        churn: *value,
                        is_largest: *structure == 0,
                    });
                }
            }
            prev = Some(cell);
        }
        subfield_totals.insert(subfield.to_string(), distinct.len());
    }

    let meso_rows = metrics::meso_average(&metric_rows, &scheme, &subfield_totals, cfg.min_meso_concepts);

    // concept profiles over all cells
    let vocab_text = fs::read_to_string(paths.vocabulary())?;
    let vocab = ConceptVocabulary::read_tsv(&vocab_text, cfg.threshold_enum()?);
    let views: Vec<(String, Vec<(String, bool)>)> = cells
        .iter()
        .map(|cell| {
            let members = cell
                .labels
                .iter()
                .zip(&cell.assignment.is_core)
                .map(|(l, &x)| (l.clone(), x))
                .collect();
            (cell.cell.subfield.clone(), members)
        })
        .collect();
    let profiles = coreperi_core::concepts::profile_concepts(&vocab, &views);
    let profile_rows: Vec<ProfileRow> = profiles
        .iter()
        .map(|p| ProfileRow {
            concept: p.concept.clone(),
            n_words: p.n_words,
            n_chars: p.n_chars,
            n_digits: p.n_digits,
            n_subfields: p.n_subfields,
            n_papers: p.n_papers,
            core_share: p.core_share,
        })
        .collect();

    metrics::write_csv(&metric_rows, File::create(paths.metrics_csv())?)?;
    metrics::write_csv(&mobility_rows, File::create(paths.mobility_csv())?)?;
    metrics::write_csv(&meso_rows, File::create(paths.meso_csv())?)?;
    metrics::write_csv(&structure_rows, File::create(paths.structure_churn_csv())?)?;
    metrics::write_csv(&profile_rows, File::create(paths.profiles_csv())?)?;
    fs::write(paths.schema_txt(), metrics::SCHEMA_TEXT)?;

    ctx.manifest.record_stage(
        &cfg.out_dir,
        "metrics",
        hash_bytes(cfg.canonical_json().as_bytes()),
        &[paths.assignments_index(), paths.vocabulary(), cfg.scheme.clone()],
        &[
            paths.metrics_csv(),
            paths.mobility_csv(),
            paths.meso_csv(),
            paths.structure_churn_csv(),
            paths.profiles_csv(),
            paths.schema_txt(),
        ],
        meta([("rows", metric_rows.len().to_string())]),
    )
}

pub fn stage_null_compare(ctx: &mut RunContext) -> Result<()> {
    let cfg = &ctx.cfg;
    let paths = Paths::new(&cfg.out_dir);
    require_artifact(&paths.networks_index(), "build-net")?;
    require_artifact(&paths.assignments_index(), "detect")?;
    ctx.manifest.check_freshness(&cfg.out_dir, "detect", &paths.assignments_index())?;

    let networks = load_networks(&paths)?;
    let assignments = load_assignments(&paths)?;
    let by_cell: BTreeMap<CellKey, (&ConceptNetwork, &CpAssignment)> = networks
        .iter()
        .map(|(_, net)| net)
        .zip(assignments.iter())
        .map(|(net, ca)| (net.cell.clone(), (net, &ca.assignment)))
        .collect();

    let null_cfg = NullCompareConfig {
        n_replicates: cfg.replicates,
        swap_factor: cfg.swap_factor,
        budget: cfg.swap_budget(),
        seed: cfg.seed,
    };
    let solver = cfg.solver_config();

    let cells: Vec<&CellKey> = by_cell.keys().collect();
    let results: Vec<Vec<nullmodel::NullEnsembleResult>> = cells
        .par_iter()
        .map(|cell| -> Result<_> {
            let (net, asg) = by_cell[*cell];
            let prev_key = CellKey::new(cell.subfield.clone(), cell.year - 1);
            let prev = by_cell.get(&prev_key);
            let mut wanted = vec![NullMetric::RelCoreSize, NullMetric::NCores];
            if prev.is_some() {
                wanted.push(NullMetric::Churn);
            }
            let rows = nullmodel::null_compare(
                net,
                prev.map(|(n, _)| *n),
                asg,
                prev.map(|(_, a)| *a),
                &wanted,
                &null_cfg,
                &solver,
            )?;
            Ok(rows)
        })
        .collect::<Result<Vec<_>>>()?;

    let rows: Vec<nullmodel::NullEnsembleResult> = results.into_iter().flatten().collect();
    metrics::write_csv(&rows, File::create(paths.nullmodel_csv())?)?;
    log::info!("null-model comparison finished for {} cells", cells.len());

    ctx.manifest.record_stage(
        &cfg.out_dir,
        "null-compare",
        hash_bytes(cfg.canonical_json().as_bytes()),
        &[paths.networks_index(), paths.assignments_index()],
        &[paths.nullmodel_csv()],
        meta([("cells", cells.len().to_string())]),
    )
}

/// One row of cd_index.csv; empty cd/n mark papers with no qualifying citers.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CdRow {
    pub paper_id: String,
    pub cd: Option<f64>,
    pub n: Option<usize>,
}

pub fn stage_cd_index(ctx: &mut RunContext) -> Result<()> {
    let cfg = &ctx.cfg;
    let paths = Paths::new(&cfg.out_dir);
    artifacts::create_dir(&cfg.out_dir)?;
    let (records, _) = ingest::load_corpus(&cfg.corpus, (cfg.year_min, cfg.year_max))?;
    let graph = CitationGraph::build(&records);
    let horizon = cfg.cd_horizon.unwrap_or(cfg.year_max);
    let include_b_only = !cfg.cd_citers_only;

    let mut ids: Vec<&str> = graph.corpus_ids().collect();
    ids.sort_unstable();
    let rows: Vec<CdRow> = ids
        .par_iter()
        .map(|id| {
            let score = cd_index(&graph, id, horizon, include_b_only);
            CdRow {
                paper_id: id.to_string(),
                cd: score.map(|s| s.cd),
                n: score.map(|s| s.n),
            }
        })
        .collect();
    metrics::write_csv(&rows, File::create(paths.cd_csv())?)?;
    let defined = rows.iter().filter(|r| r.cd.is_some()).count();
    log::info!("cd-index: {} of {} papers have a defined score", defined, rows.len());

    ctx.manifest.record_stage(
        &cfg.out_dir,
        "cd-index",
        hash_bytes(cfg.canonical_json().as_bytes()),
        &[cfg.corpus.clone()],
        &[paths.cd_csv()],
        meta([("papers", rows.len().to_string()), ("defined", defined.to_string())]),
    )
}

/// One row of consensus.csv.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ConsensusRow {
    pub paper_id: String,
    pub consensus_count: u32,
    pub n_nouns: u32,
    pub n_adj: u32,
    pub n_verbs: u32,
    pub n_adv: u32,
    pub has_prior_work_comment: bool,
}

pub fn stage_consensus(ctx: &mut RunContext) -> Result<()> {
    let cfg = &ctx.cfg;
    let paths = Paths::new(&cfg.out_dir);
    artifacts::create_dir(&cfg.out_dir)?;
    let (mut records, _) = ingest::load_corpus(&cfg.corpus, (cfg.year_min, cfg.year_max))?;
    records.sort_by(|a, b| a.paper_id.cmp(&b.paper_id));
    let extractor = extractor_for(cfg)?;
    let dict = ConsensusDictionary::bundled();
    let markers = CitationMarkers::bundled();
    let count_mode =
        if cfg.consensus_presence { CountMode::Presence } else { CountMode::Multiplicity };

    let rows: Vec<ConsensusRow> = records
        .par_iter()
        .map(|r| {
            let score = consensus_count(&extractor, &r.abstract_text, &dict, count_mode);
            ConsensusRow {
                paper_id: r.paper_id.clone(),
                consensus_count: score.count,
                n_nouns: score.pos.nouns,
                n_adj: score.pos.adjectives,
                n_verbs: score.pos.verbs,
                n_adv: score.pos.adverbs,
                has_prior_work_comment: has_prior_work_comment(&r.abstract_text, markers),
            }
        })
        .collect();
    metrics::write_csv(&rows, File::create(paths.consensus_csv())?)?;

    ctx.manifest.record_stage(
        &cfg.out_dir,
        "consensus",
        hash_bytes(cfg.canonical_json().as_bytes()),
        &[cfg.corpus.clone()],
        &[paths.consensus_csv()],
        meta([("papers", rows.len().to_string())]),
    )
}

/// Runs every pipeline stage in dependency order.
pub fn run_pipeline(ctx: &mut RunContext) -> Result<()> {
    stage_extract(ctx)?;
    stage_build_net(ctx)?;
    stage_detect(ctx)?;
    stage_metrics(ctx)?;
    stage_null_compare(ctx)?;
    stage_cd_index(ctx)?;
    stage_consensus(ctx)?;
    crate::regress::stage_regress(ctx)?;
    crate::regress::stage_report(ctx)?;
    Ok(())
}
