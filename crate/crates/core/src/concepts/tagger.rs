//! Deterministic part-of-speech tagging: a bundled word lexicon with
//! suffix-rule fallback. One tag per surface form, no context.

use std::collections::HashMap;

use super::lemma::LemmaTable;

/// Part-of-speech tag. Only `Noun` and `Adj` participate in noun-phrase
/// chunks; the rest break them.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum PosTag {
    Noun,
    Verb,
    Adj,
    Adv,
    Prep,
    Conj,
    Det,
    Pron,
    Num,
}

impl PosTag {
    /// Whether a token with this tag can sit inside a noun-phrase chunk.
    pub fn chunkable(self) -> bool {
        matches!(self, PosTag::Noun | PosTag::Adj)
    }

    fn parse(s: &str) -> Option<PosTag> {
        Some(match s {
            "noun" => PosTag::Noun,
            "verb" => PosTag::Verb,
            "adj" => PosTag::Adj,
            "adv" => PosTag::Adv,
            "prep" => PosTag::Prep,
            "conj" => PosTag::Conj,
            "det" => PosTag::Det,
            "pron" => PosTag::Pron,
            "num" => PosTag::Num,
            _ => return None,
        })
    }
}

/// Word -> tag table loaded from the bundled `lexicon.txt` (or a user file of
/// the same format).
#[derive(Debug, Clone, Default)]
pub struct Lexicon {
    map: HashMap<String, PosTag>,
}

impl Lexicon {
    /// Parses `word<TAB>tag` lines; `#` starts a comment line.
    pub fn parse(text: &str) -> Lexicon {
        let mut map = HashMap::new();
        for line in text.lines() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            if let Some((word, tag)) = line.split_once('\t') {
                if let Some(tag) = PosTag::parse(tag.trim()) {
                    map.insert(word.trim().to_string(), tag);
                }
            }
        }
        Lexicon { map }
    }

    /// Adds entries from another table, overriding existing words.
    pub fn extend_from(&mut self, text: &str) {
        let other = Lexicon::parse(text);
        self.map.extend(other.map);
    }

    pub fn lookup(&self, word: &str) -> Option<PosTag> {
        self.map.get(word).copied()
    }

    pub fn len(&self) -> usize {
        self.map.len()
    }

    pub fn is_empty(&self) -> bool {
        self.map.is_empty()
    }
}

/// Suffix fallback rules, tried on the noun-lemmatized form, longest first.
/// Stems must keep at least three characters beyond the suffix.
const SUFFIX_RULES: &[(&str, PosTag)] = &[
    ("graphy", PosTag::Noun),
    ("ical", PosTag::Adj),
    ("able", PosTag::Adj),
    ("ible", PosTag::Adj),
    ("less", PosTag::Adj),
    ("ance", PosTag::Noun),
    ("ence", PosTag::Noun),
    ("ancy", PosTag::Noun),
    ("ency", PosTag::Noun),
    ("ness", PosTag::Noun),
    ("ment", PosTag::Noun),
    ("tion", PosTag::Noun),
    ("sion", PosTag::Noun),
    ("ship", PosTag::Noun),
    ("hood", PosTag::Noun),
    ("logy", PosTag::Noun),
    ("ous", PosTag::Adj),
    ("ive", PosTag::Adj),
    ("ful", PosTag::Adj),
    ("ish", PosTag::Adj),
    ("ity", PosTag::Noun),
    ("ism", PosTag::Noun),
    ("ure", PosTag::Noun),
    ("sis", PosTag::Noun),
    ("ics", PosTag::Noun),
    ("ing", PosTag::Verb),
    ("ize", PosTag::Verb),
    ("al", PosTag::Adj),
    ("ic", PosTag::Adj),
    ("ly", PosTag::Adv),
    ("ed", PosTag::Verb),
    ("fy", PosTag::Verb),
];

/// Tags a cleaned, lowercased word.
///
/// Lookup order: exact lexicon hit, lexicon hit of the noun-lemmatized form,
/// verb-form detection (an -s/-ed/-ing form whose verb lemma is a known verb),
/// suffix rules, and finally a noun default. Tokens without letters tag `Num`.
pub fn tag_word(word: &str, lexicon: &Lexicon, lemmas: &LemmaTable) -> PosTag {
    if !word.chars().any(|c| c.is_alphabetic()) {
        return PosTag::Num;
    }
    if let Some(tag) = lexicon.lookup(word) {
        return tag;
    }
    let noun_form = super::lemma::noun_lemma(word, lemmas);
    if noun_form != word {
        if let Some(tag) = lexicon.lookup(&noun_form) {
            return tag;
        }
    }
    let verb_form = super::lemma::verb_lemma(word, lemmas);
    if verb_form != word && lexicon.lookup(&verb_form) == Some(PosTag::Verb) {
        return PosTag::Verb;
    }
    for (suffix, tag) in SUFFIX_RULES {
        if noun_form.len() >= suffix.len() + 3 && noun_form.ends_with(suffix) {
            return *tag;
        }
    }
    PosTag::Noun
}
