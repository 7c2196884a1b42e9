//! Rule-based lemmatization: an exception table for irregular forms plus
//! closed suffix-stripping rules. Deterministic by construction; the point is
//! that equal surface forms always map to equal lemmas, not dictionary-perfect
//! morphology.

use std::collections::HashMap;

use super::tagger::PosTag;

/// Irregular surface -> lemma table, applied before any suffix rule.
#[derive(Debug, Clone, Default)]
pub struct LemmaTable {
    map: HashMap<String, String>,
}

impl LemmaTable {
    /// Parses `surface<TAB>lemma` lines; `#` starts a comment line.
    pub fn parse(text: &str) -> LemmaTable {
        let mut map = HashMap::new();
        for line in text.lines() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            if let Some((surface, lemma)) = line.split_once('\t') {
                map.insert(surface.trim().to_string(), lemma.trim().to_string());
            }
        }
        LemmaTable { map }
    }

    /// Adds entries from another table, overriding existing surfaces.
    pub fn extend_from(&mut self, text: &str) {
        let other = LemmaTable::parse(text);
        self.map.extend(other.map);
    }

    fn lookup(&self, word: &str) -> Option<&str> {
        self.map.get(word).map(String::as_str)
    }
}

/// Lemmatizes by tag: nouns get plural stripping, verbs get -s/-ed/-ing
/// stripping, everything else passes through (after the exception table).
pub fn lemma_for(tag: PosTag, word: &str, table: &LemmaTable) -> String {
    match tag {
        PosTag::Noun => noun_lemma(word, table),
        PosTag::Verb => verb_lemma(word, table),
        _ => table.lookup(word).unwrap_or(word).to_string(),
    }
}

/// Singularizes a noun.
pub fn noun_lemma(word: &str, table: &LemmaTable) -> String {
    if let Some(lemma) = table.lookup(word) {
        return lemma.to_string();
    }
    let n = word.len();
    if word.ends_with("ics") {
        return word.to_string();
    }
    if n >= 5 && word.ends_with("ies") {
        return format!("{}y", &word[..n - 3]);
    }
    if n >= 5
        && (word.ends_with("xes")
            || word.ends_with("ches")
            || word.ends_with("shes")
            || word.ends_with("sses")
            || word.ends_with("zzes")
            || word.ends_with("oes"))
    {
        return word[..n - 2].to_string();
    }
    if word.ends_with("ss") || word.ends_with("us") || word.ends_with("is") {
        return word.to_string();
    }
    if n >= 4 && word.ends_with('s') {
        return word[..n - 1].to_string();
    }
    word.to_string()
}

/// Reduces a verb form to its base.
pub fn verb_lemma(word: &str, table: &LemmaTable) -> String {
    if let Some(lemma) = table.lookup(word) {
        return lemma.to_string();
    }
    let n = word.len();
    if n >= 5 && word.ends_with("ies") {
        return format!("{}y", &word[..n - 3]);
    }
    if n >= 5
        && (word.ends_with("xes")
            || word.ends_with("ches")
            || word.ends_with("shes")
            || word.ends_with("sses")
            || word.ends_with("zzes")
            || word.ends_with("oes"))
    {
        return word[..n - 2].to_string();
    }
    if n >= 4 && word.ends_with('s') && !word.ends_with("ss") && !word.ends_with("us") && !word.ends_with("is") {
        return word[..n - 1].to_string();
    }
    if word.ends_with("eed") {
        return word.to_string();
    }
    if n >= 6 && word.ends_with("ing") {
        return fixup_stem(&word[..n - 3]);
    }
    if n >= 4 && word.ends_with("ed") {
        return fixup_stem(&word[..n - 2]);
    }
    word.to_string()
}

/// Repairs a stem left by stripping -ing/-ed: undoubles final consonants and
/// restores a dropped final "e" after v/u/z or a consonant-vowel-consonant
/// ending.
fn fixup_stem(stem: &str) -> String {
    let chars: Vec<char> = stem.chars().collect();
    let n = chars.len();
    if n >= 2 && chars[n - 1] == chars[n - 2] && is_consonant(chars[n - 1]) && chars[n - 1] != 's' {
        return chars[..n - 1].iter().collect();
    }
    if n >= 1 && matches!(chars[n - 1], 'v' | 'u' | 'z') {
        return format!("{stem}e");
    }
    let cvc_short = n == 2 && is_vowel(chars[0]) && is_consonant(chars[1]);
    let cvc = n >= 3
        && is_consonant(chars[n - 1])
        && !matches!(chars[n - 1], 'w' | 'x' | 'y')
        && is_vowel(chars[n - 2])
        && is_consonant(chars[n - 3]);
    if cvc_short || cvc {
        return format!("{stem}e");
    }
    stem.to_string()
}

fn is_vowel(c: char) -> bool {
    matches!(c, 'a' | 'e' | 'i' | 'o' | 'u')
}

fn is_consonant(c: char) -> bool {
    c.is_ascii_alphabetic() && !is_vowel(c)
}
