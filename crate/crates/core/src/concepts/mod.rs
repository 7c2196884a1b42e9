//! Concept extraction from abstracts and corpus-level vocabulary building.
//!
//! The pipeline is fully deterministic: markup stripping, whitespace
//! tokenization, punctuation stripping, lexicon/suffix part-of-speech tagging,
//! noun-phrase chunking over (adjective|noun)* noun runs, stop-word removal,
//! rule-based lemmatization, and per-abstract deduplication. Corpus-level
//! frequency thresholds then prune ubiquitous and rare concepts.

pub mod lemma;
pub mod tagger;

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::io::{self, Write};
use std::sync::LazyLock;

use regex::Regex;
use thiserror::Error;

use crate::ingest::PaperRecord;
pub use lemma::LemmaTable;
pub use tagger::{Lexicon, PosTag};

/// Punctuation characters stripped from tokens and forbidden in concepts.
pub const STRIP_CHARS: &[char] = &[
    '\'', '!', '#', '$', '%', '&', ',', '.', ':', ';', '?', '@', ']', '[', '`', '_', '{', '}',
    '~', '(', ')', '-', '"', '/', '\u{2019}', '\u{2018}', '\u{201c}', '\u{201d}', '\u{2013}',
    '\u{2014}',
];

/// Minimum concept length in characters; shorter phrases are dropped.
pub const MIN_CONCEPT_CHARS: usize = 3;

/// Proportional-mode bounds: keep concepts with lower < doc share < upper.
pub const PROPORTIONAL_LOWER: f64 = 0.001;
/// Upper document-share bound for proportional mode (exclusive).
pub const PROPORTIONAL_UPPER: f64 = 0.01;
/// Minimum document frequency in min-count mode (inclusive).
pub const MIN_COUNT: u32 = 10;

static BUNDLED_LEXICON: LazyLock<Lexicon> =
    LazyLock::new(|| Lexicon::parse(include_str!("../../data/lexicon.txt")));
static BUNDLED_LEMMAS: LazyLock<LemmaTable> =
    LazyLock::new(|| LemmaTable::parse(include_str!("../../data/lemma_exceptions.txt")));
static BUNDLED_STOPWORDS: LazyLock<HashSet<String>> =
    LazyLock::new(|| parse_word_list(include_str!("../../data/stopwords.txt")));
static MARKUP: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"<[^<>]*>").unwrap());

/// The bundled part-of-speech lexicon.
pub fn bundled_lexicon() -> &'static Lexicon {
    &BUNDLED_LEXICON
}

/// The bundled lemma exception table.
pub fn bundled_lemmas() -> &'static LemmaTable {
    &BUNDLED_LEMMAS
}

/// The bundled stop-word list.
pub fn bundled_stopwords() -> &'static HashSet<String> {
    &BUNDLED_STOPWORDS
}

/// Parses a one-word-per-line list; `#` starts a comment line.
pub fn parse_word_list(text: &str) -> HashSet<String> {
    text.lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'))
        .map(|l| l.to_lowercase())
        .collect()
}

#[derive(Debug, Error)]
pub enum ConceptsError {
    #[error("cannot build a vocabulary from zero records")]
    NoRecords,
}

/// A tokenized word of an abstract: cleaned text, tag, and lemma.
#[derive(Debug, Clone)]
pub struct AnalyzedToken {
    pub text: String,
    pub lemma: String,
    pub tag: PosTag,
}

#[derive(Debug, Clone)]
struct RawToken {
    text: String,
    breaks_after: bool,
}

/// Per-abstract part-of-speech token counts, used as regression controls.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct PosCounts {
    pub nouns: u32,
    pub adjectives: u32,
    pub verbs: u32,
    pub adverbs: u32,
}

/// Deterministic concept extractor; holds the tagging and lemma tables plus
/// the stop-word set. Cheap to clone; immutable once configured.
#[derive(Debug, Clone)]
pub struct ConceptExtractor {
    lexicon: Lexicon,
    lemmas: LemmaTable,
    stopwords: HashSet<String>,
}

impl Default for ConceptExtractor {
    fn default() -> Self {
        ConceptExtractor::bundled()
    }
}

impl ConceptExtractor {
    /// Extractor backed by the bundled lexicon, lemma, and stop-word tables.
    pub fn bundled() -> ConceptExtractor {
        ConceptExtractor {
            lexicon: BUNDLED_LEXICON.clone(),
            lemmas: BUNDLED_LEMMAS.clone(),
            stopwords: BUNDLED_STOPWORDS.clone(),
        }
    }

    /// Adds stop words on top of the bundled list.
    pub fn add_stopwords<I: IntoIterator<Item = String>>(&mut self, words: I) {
        self.stopwords.extend(words.into_iter().map(|w| w.to_lowercase()));
    }

    /// Adds or overrides lexicon entries (same format as `lexicon.txt`).
    pub fn extend_lexicon(&mut self, text: &str) {
        self.lexicon.extend_from(text);
    }

    /// Adds or overrides lemma exceptions (same format as `lemma_exceptions.txt`).
    pub fn extend_lemmas(&mut self, text: &str) {
        self.lemmas.extend_from(text);
    }

    fn raw_tokens(&self, text: &str) -> Vec<RawToken> {
        // trailing clause punctuation ends a noun-phrase chunk; trailing
        // quotes and dashes do not
        const BREAKERS: &[char] = &['.', ',', ';', ':', '!', '?', ')', ']', '/'];
        let stripped = MARKUP.replace_all(text, " ");
        stripped
            .split_whitespace()
            .map(|raw| {
                let breaks_after = raw.chars().last().is_some_and(|c| BREAKERS.contains(&c));
                let clean: String = raw
                    .chars()
                    .filter(|c| !STRIP_CHARS.contains(c))
                    .flat_map(char::to_lowercase)
                    .collect();
                RawToken { text: clean, breaks_after }
            })
            .collect()
    }

    /// Tokenizes, tags, and lemmatizes an abstract. Punctuation-only tokens
    /// are dropped.
    pub fn analyzed_tokens(&self, text: &str) -> Vec<AnalyzedToken> {
        self.raw_tokens(text)
            .into_iter()
            .filter(|t| !t.text.is_empty())
            .map(|t| {
                let tag = tagger::tag_word(&t.text, &self.lexicon, &self.lemmas);
                let lemma = lemma::lemma_for(tag, &t.text, &self.lemmas);
                AnalyzedToken { text: t.text, lemma, tag }
            })
            .collect()
    }

    /// Counts noun/adjective/verb/adverb tokens in an abstract.
    pub fn pos_counts(&self, text: &str) -> PosCounts {
        let mut counts = PosCounts::default();
        for tok in self.analyzed_tokens(text) {
            match tok.tag {
                PosTag::Noun => counts.nouns += 1,
                PosTag::Adj => counts.adjectives += 1,
                PosTag::Verb => counts.verbs += 1,
                PosTag::Adv => counts.adverbs += 1,
                _ => {}
            }
        }
        counts
    }

    /// Extracts the deduplicated, normalized noun phrases of one abstract.
    pub fn extract_concepts(&self, text: &str) -> BTreeSet<String> {
        let mut concepts = BTreeSet::new();
        let mut run: Vec<(String, PosTag)> = Vec::new();
        let tokens = self.raw_tokens(text);
        for tok in &tokens {
            let chunkable = !tok.text.is_empty()
                && tok.text.chars().any(char::is_alphabetic)
                && !self.stopwords.contains(&tok.text)
                && tagger::tag_word(&tok.text, &self.lexicon, &self.lemmas).chunkable();
            if chunkable {
                let tag = tagger::tag_word(&tok.text, &self.lexicon, &self.lemmas);
                run.push((tok.text.clone(), tag));
            }
            if !chunkable || tok.breaks_after {
                self.flush_chunk(&mut run, &mut concepts);
            }
        }
        self.flush_chunk(&mut run, &mut concepts);
        concepts
    }

    fn flush_chunk(&self, run: &mut Vec<(String, PosTag)>, out: &mut BTreeSet<String>) {
        while run.last().is_some_and(|(_, tag)| *tag != PosTag::Noun) {
            run.pop();
        }
        if run.is_empty() {
            return;
        }
        let phrase = run
            .drain(..)
            .map(|(word, tag)| lemma::lemma_for(tag, &word, &self.lemmas))
            .collect::<Vec<_>>()
            .join(" ");
        if phrase.chars().count() >= MIN_CONCEPT_CHARS && phrase.chars().any(char::is_alphabetic) {
            out.insert(phrase);
        }
    }
}

/// Vocabulary thresholding mode.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ThresholdMode {
    /// Keep concepts whose document share lies strictly inside
    /// (`PROPORTIONAL_LOWER`, `PROPORTIONAL_UPPER`).
    Proportional,
    /// Keep concepts appearing in at least `MIN_COUNT` abstracts.
    MinCount,
}

impl ThresholdMode {
    fn keeps(self, doc_freq: u32, total: u32) -> bool {
        match self {
            ThresholdMode::Proportional => {
                let share = f64::from(doc_freq) / f64::from(total);
                share > PROPORTIONAL_LOWER && share < PROPORTIONAL_UPPER
            }
            ThresholdMode::MinCount => doc_freq >= MIN_COUNT,
        }
    }
}

/// Surviving concepts with their document frequencies.
#[derive(Debug, Clone)]
pub struct ConceptVocabulary {
    doc_freq: BTreeMap<String, u32>,
    pub total_abstracts: u32,
    pub mode: ThresholdMode,
}

impl ConceptVocabulary {
    /// Counts distinct-abstract frequencies over the records and applies the
    /// threshold. Warns and returns an empty vocabulary if everything is
    /// pruned.
    pub fn build(
        records: &[PaperRecord],
        extractor: &ConceptExtractor,
        mode: ThresholdMode,
    ) -> Result<ConceptVocabulary, ConceptsError> {
        let sets: Vec<BTreeSet<String>> = records
            .iter()
            .map(|r| extractor.extract_concepts(&r.abstract_text))
            .collect();
        Self::from_concept_sets(&sets, mode)
    }

    /// Same as [`ConceptVocabulary::build`] but over pre-extracted concept sets.
    pub fn from_concept_sets(
        sets: &[BTreeSet<String>],
        mode: ThresholdMode,
    ) -> Result<ConceptVocabulary, ConceptsError> {
        if sets.is_empty() {
            return Err(ConceptsError::NoRecords);
        }
        let total = sets.len() as u32;
        let mut counts: BTreeMap<String, u32> = BTreeMap::new();
        for set in sets {
            for concept in set {
                *counts.entry(concept.clone()).or_insert(0) += 1;
            }
        }
        counts.retain(|_, freq| mode.keeps(*freq, total));
        if counts.is_empty() {
            log::warn!("all concepts pruned by the frequency threshold; vocabulary is empty");
        }
        Ok(ConceptVocabulary { doc_freq: counts, total_abstracts: total, mode })
    }

    pub fn contains(&self, concept: &str) -> bool {
        self.doc_freq.contains_key(concept)
    }

    pub fn doc_freq(&self, concept: &str) -> Option<u32> {
        self.doc_freq.get(concept).copied()
    }

    pub fn len(&self) -> usize {
        self.doc_freq.len()
    }

    pub fn is_empty(&self) -> bool {
        self.doc_freq.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, u32)> {
        self.doc_freq.iter().map(|(c, f)| (c.as_str(), *f))
    }

    /// Writes `concept<TAB>doc_freq` lines, sorted by concept.
    pub fn write_tsv<W: Write>(&self, mut w: W) -> io::Result<()> {
        writeln!(w, "# total_abstracts\t{}", self.total_abstracts)?;
        for (concept, freq) in &self.doc_freq {
            writeln!(w, "{concept}\t{freq}")?;
        }
        Ok(())
    }

    /// Reads the format produced by [`ConceptVocabulary::write_tsv`].
    pub fn read_tsv(text: &str, mode: ThresholdMode) -> ConceptVocabulary {
        let mut total = 0;
        let mut doc_freq = BTreeMap::new();
        for line in text.lines() {
            if let Some(rest) = line.strip_prefix("# total_abstracts\t") {
                total = rest.trim().parse().unwrap_or(0);
            } else if let Some((concept, freq)) = line.split_once('\t') {
                if let Ok(freq) = freq.trim().parse() {
                    doc_freq.insert(concept.to_string(), freq);
                }
            }
        }
        ConceptVocabulary { doc_freq, total_abstracts: total, mode }
    }
}

/// Descriptive properties of one concept across all analyzed cells.
#[derive(Debug, Clone, PartialEq)]
pub struct ConceptProfile {
    pub concept: String,
    pub n_words: u32,
    pub n_chars: u32,
    pub n_digits: u32,
    pub n_subfields: u32,
    pub n_papers: u32,
    /// Fraction of (subfield, year) appearances in which the concept was core.
    pub core_share: f64,
}

impl ConceptProfile {
    /// Concepts observed more often in the core than the periphery.
    pub fn is_core_concept(&self) -> bool {
        self.core_share > 0.5
    }
}

/// Profiles every vocabulary concept that appears in at least one cell view.
///
/// `cell_views` holds, per analyzed cell, the subfield id and the
/// (concept, is_core) membership of the detected assignment. Concepts absent
/// from every view are excluded with a warning.
pub fn profile_concepts(
    vocab: &ConceptVocabulary,
    cell_views: &[(String, Vec<(String, bool)>)],
) -> Vec<ConceptProfile> {
    let mut appearances: BTreeMap<&str, (BTreeSet<&str>, u32, u32)> = BTreeMap::new();
    for (subfield, members) in cell_views {
        for (concept, is_core) in members {
            let entry = appearances.entry(concept).or_default();
            entry.0.insert(subfield);
            entry.1 += 1;
            entry.2 += u32::from(*is_core);
        }
    }
    let mut profiles = Vec::new();
    for (concept, freq) in vocab.iter() {
        let Some((subfields, cells, core_cells)) = appearances.get(concept) else {
            log::warn!("concept {concept:?} absent from every assignment; excluded from profiles");
            continue;
        };
        profiles.push(ConceptProfile {
            concept: concept.to_string(),
            n_words: concept.split(' ').count() as u32,
            n_chars: concept.chars().filter(|c| *c != ' ').count() as u32,
            n_digits: concept.chars().filter(char::is_ascii_digit).count() as u32,
            n_subfields: subfields.len() as u32,
            n_papers: freq,
            core_share: f64::from(*core_cells) / f64::from(*cells),
        });
    }
    profiles
}

#[cfg(test)]
mod tests;
