//! Outcome measures: the CD disruption index over a citation graph, consensus
//! dictionary scoring of abstracts, and citation-marker detection.

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::sync::LazyLock;

use regex::Regex;
use serde::Serialize;

use crate::concepts::{ConceptExtractor, PosCounts};
use crate::ingest::PaperRecord;

/// Directed citation relation built from `PaperRecord.reference_ids`.
///
/// Self-citations are dropped. References to papers outside the corpus are
/// kept as leaf nodes without a year; they can be cited but never count as
/// citers (their citation lists are unknown).
#[derive(Debug, Clone)]
pub struct CitationGraph {
    index: BTreeMap<String, u32>,
    ids: Vec<String>,
    years: Vec<Option<i32>>,
    cites: Vec<Vec<u32>>,
    cited_by: Vec<Vec<u32>>,
}

impl CitationGraph {
    pub fn build(records: &[PaperRecord]) -> CitationGraph {
        fn intern(
            id: &str,
            index: &mut BTreeMap<String, u32>,
            ids: &mut Vec<String>,
            years: &mut Vec<Option<i32>>,
        ) -> u32 {
            *index.entry(id.to_string()).or_insert_with(|| {
                ids.push(id.to_string());
                years.push(None);
                (ids.len() - 1) as u32
            })
        }
        let mut index: BTreeMap<String, u32> = BTreeMap::new();
        let mut ids: Vec<String> = Vec::new();
        let mut years: Vec<Option<i32>> = Vec::new();
        for record in records {
            let node = intern(&record.paper_id, &mut index, &mut ids, &mut years);
            years[node as usize] = Some(record.year);
        }
        let mut cites = vec![Vec::new(); ids.len()];
        let mut cited_by = vec![Vec::new(); ids.len()];
        for record in records {
            let citing = index[&record.paper_id];
            let mut seen = HashSet::new();
            for reference in &record.reference_ids {
                if reference == &record.paper_id || !seen.insert(reference.as_str()) {
                    continue;
                }
                let cited = intern(reference, &mut index, &mut ids, &mut years);
                if cited_by.len() < ids.len() {
                    cites.resize(ids.len(), Vec::new());
                    cited_by.resize(ids.len(), Vec::new());
                }
                cites[citing as usize].push(cited);
                cited_by[cited as usize].push(citing);
            }
        }
        for list in cites.iter_mut().chain(cited_by.iter_mut()) {
            list.sort_unstable();
        }
        CitationGraph { index, ids, years, cites, cited_by }
    }

    pub fn n_papers(&self) -> usize {
        self.ids.len()
    }

    pub fn contains(&self, paper_id: &str) -> bool {
        self.index.contains_key(paper_id)
    }

    pub fn year_of(&self, paper_id: &str) -> Option<i32> {
        self.index.get(paper_id).and_then(|&i| self.years[i as usize])
    }

    /// Paper ids with a known year (corpus members), in id order.
    pub fn corpus_ids(&self) -> impl Iterator<Item = &str> {
        self.index
            .iter()
            .filter(|(_, &i)| self.years[i as usize].is_some())
            .map(|(id, _)| id.as_str())
    }
}

/// One CD index evaluation.
#[derive(Debug, Clone, Copy, Serialize, PartialEq)]
pub struct CdScore {
    pub cd: f64,
    /// Size of the citing set the index averages over.
    pub n: usize,
}

/// CD index of a focal paper as of `horizon_year`.
///
/// Over papers published by the horizon that cite the focal paper or at least
/// one of its references (with `f` marking focal citers and `b` marking
/// reference citers): `CD = mean(-2 f b + f)`. `include_b_only` keeps papers
/// citing only references in the set (the standard definition); disabling it
/// restricts the set to focal citers. Returns `None` when the set is empty
/// or the focal paper is unknown.
pub fn cd_index(
    graph: &CitationGraph,
    focal: &str,
    horizon_year: i32,
    include_b_only: bool,
) -> Option<CdScore> {
    let &focal_idx = graph.index.get(focal)?;
    let references: BTreeSet<u32> = graph.cites[focal_idx as usize].iter().copied().collect();

    let mut citers: BTreeSet<u32> = BTreeSet::new();
    for &citer in &graph.cited_by[focal_idx as usize] {
        citers.insert(citer);
    }
    for &reference in &references {
        for &citer in &graph.cited_by[reference as usize] {
            citers.insert(citer);
        }
    }

    let mut n = 0usize;
    let mut sum = 0.0;
    for citer in citers {
        if citer == focal_idx {
            continue;
        }
        let Some(year) = graph.years[citer as usize] else {
            continue;
        };
        if year > horizon_year {
            continue;
        }
        let f = graph.cites[citer as usize].binary_search(&focal_idx).is_ok();
        let b = graph.cites[citer as usize].iter().any(|c| references.contains(c));
        if !f && !include_b_only {
            continue;
        }
        n += 1;
        let f = f64::from(f);
        let b = f64::from(b);
        sum += -2.0 * f * b + f;
    }
    if n == 0 {
        return None;
    }
    Some(CdScore { cd: sum / n as f64, n })
}

/// The consensus-word dictionary.
#[derive(Debug, Clone)]
pub struct ConsensusDictionary {
    terms: BTreeSet<String>,
    pub match_mode: MatchMode,
}

/// How abstract tokens are matched against dictionary terms.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum MatchMode {
    /// Match the token's part-of-speech-aware lemma (so "agrees" hits
    /// "agree").
    #[default]
    Lemma,
    /// Match the cleaned surface token exactly.
    Exact,
}

/// Whether matches count with multiplicity or once per abstract.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum CountMode {
    #[default]
    Multiplicity,
    Presence,
}

impl ConsensusDictionary {
    /// The bundled dictionary.
    pub fn bundled() -> ConsensusDictionary {
        ConsensusDictionary {
            terms: crate::concepts::parse_word_list(include_str!(
                "../data/consensus_dictionary.txt"
            ))
            .into_iter()
            .collect(),
            match_mode: MatchMode::Lemma,
        }
    }

    /// Parses a one-term-per-line dictionary.
    pub fn parse(text: &str, match_mode: MatchMode) -> ConsensusDictionary {
        ConsensusDictionary {
            terms: crate::concepts::parse_word_list(text).into_iter().collect(),
            match_mode,
        }
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn terms(&self) -> impl Iterator<Item = &str> {
        self.terms.iter().map(String::as_str)
    }
}

/// Consensus-word count plus the part-of-speech control counts.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ConsensusScore {
    pub count: u32,
    pub pos: PosCounts,
}

/// Counts dictionary terms in an abstract and tallies open-class tokens.
pub fn consensus_count(
    extractor: &ConceptExtractor,
    abstract_text: &str,
    dict: &ConsensusDictionary,
    count_mode: CountMode,
) -> ConsensusScore {
    let mut count = 0u32;
    let mut seen: BTreeSet<String> = BTreeSet::new();
    let mut pos = PosCounts::default();
    for token in extractor.analyzed_tokens(abstract_text) {
        match token.tag {
            crate::concepts::PosTag::Noun => pos.nouns += 1,
            crate::concepts::PosTag::Adj => pos.adjectives += 1,
            crate::concepts::PosTag::Verb => pos.verbs += 1,
            crate::concepts::PosTag::Adv => pos.adverbs += 1,
            _ => {}
        }
        let key = match dict.match_mode {
            MatchMode::Lemma => &token.lemma,
            MatchMode::Exact => &token.text,
        };
        if dict.terms.contains(key) {
            match count_mode {
                CountMode::Multiplicity => count += 1,
                CountMode::Presence => {
                    if seen.insert(key.clone()) {
                        count += 1;
                    }
                }
            }
        }
    }
    ConsensusScore { count, pos }
}

/// Citation-marker pattern set for prior-work detection.
#[derive(Debug, Clone)]
pub struct CitationMarkers {
    patterns: Vec<Regex>,
}

static BUNDLED_MARKERS: LazyLock<CitationMarkers> = LazyLock::new(|| {
    CitationMarkers::parse(include_str!("../data/citation_markers.txt"))
        .expect("bundled citation markers compile")
});

impl CitationMarkers {
    /// The bundled author-year, bracketed-numeral, and markup patterns.
    pub fn bundled() -> &'static CitationMarkers {
        &BUNDLED_MARKERS
    }

    /// Parses one regex per line; `#` starts a comment line.
    pub fn parse(text: &str) -> Result<CitationMarkers, regex::Error> {
        let patterns = text
            .lines()
            .map(str::trim)
            .filter(|l| !l.is_empty() && !l.starts_with('#'))
            .map(Regex::new)
            .collect::<Result<Vec<_>, _>>()?;
        Ok(CitationMarkers { patterns })
    }

    pub fn len(&self) -> usize {
        self.patterns.len()
    }

    pub fn is_empty(&self) -> bool {
        self.patterns.is_empty()
    }
}

/// True when the abstract matches any citation-marker pattern, in other words
/// when it comments on prior work.
pub fn has_prior_work_comment(abstract_text: &str, markers: &CitationMarkers) -> bool {
    markers.patterns.iter().any(|p| p.is_match(abstract_text))
}
