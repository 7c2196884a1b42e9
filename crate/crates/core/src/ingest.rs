//! Corpus ingestion: line-delimited records validated into `PaperRecord`s,
//! subfield assignment via a `FieldScheme`, and grouping into
//! (subfield, window-end-year) cells.

use std::collections::{BTreeMap, HashSet};
use std::fmt;
use std::fs::File;
use std::io::{BufRead, BufReader, Read};
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// One publication record.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq, Eq)]
pub struct PaperRecord {
    #[serde(rename = "id")]
    pub paper_id: String,
    pub year: i32,
    #[serde(rename = "fields")]
    pub field_ids: Vec<String>,
    #[serde(rename = "abstract")]
    pub abstract_text: String,
    #[serde(rename = "n_authors")]
    pub author_count: u32,
    #[serde(rename = "refs", default)]
    pub reference_ids: Vec<String>,
}

/// How a record's listed subfields map to cell assignments.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AssignmentMode {
    /// Use only `field_ids[0]` (primary classification code style).
    PrimaryOnly,
    /// Assign the paper to every listed subfield (journal subject-area style).
    AllListed,
}

/// Subfield -> meso-field table plus the assignment mode.
#[derive(Debug, Clone)]
pub struct FieldScheme {
    meso_map: BTreeMap<String, String>,
    pub assignment_mode: AssignmentMode,
}

impl FieldScheme {
    /// Parses `subfield<TAB>meso` lines; `#` starts a comment line.
    pub fn parse_tsv(text: &str, mode: AssignmentMode) -> Result<FieldScheme, IngestError> {
        let mut meso_map = BTreeMap::new();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim_end();
            if line.trim().is_empty() || line.trim_start().starts_with('#') {
                continue;
            }
            let (subfield, meso) = line
                .split_once('\t')
                .ok_or_else(|| IngestError::BadScheme(lineno + 1, line.to_string()))?;
            meso_map.insert(subfield.trim().to_string(), meso.trim().to_string());
        }
        if meso_map.is_empty() {
            return Err(IngestError::EmptyScheme);
        }
        Ok(FieldScheme { meso_map, assignment_mode: mode })
    }

    /// Reads a scheme file from disk.
    pub fn load(path: &Path, mode: AssignmentMode) -> Result<FieldScheme, IngestError> {
        let mut text = String::new();
        File::open(path)
            .and_then(|mut f| f.read_to_string(&mut text))
            .map_err(|e| IngestError::Io(path.display().to_string(), e))?;
        FieldScheme::parse_tsv(&text, mode)
    }

    /// The bundled physics-style scheme (primary-code assignment).
    pub fn bundled_physics() -> FieldScheme {
        FieldScheme::parse_tsv(
            include_str!("../data/scheme_physics.tsv"),
            AssignmentMode::PrimaryOnly,
        )
        .expect("bundled physics scheme parses")
    }

    /// The bundled social-science scheme (all-listed assignment).
    pub fn bundled_social() -> FieldScheme {
        FieldScheme::parse_tsv(
            include_str!("../data/scheme_social.tsv"),
            AssignmentMode::AllListed,
        )
        .expect("bundled social scheme parses")
    }

    pub fn subfields(&self) -> impl Iterator<Item = &str> {
        self.meso_map.keys().map(String::as_str)
    }

    pub fn meso_of(&self, subfield: &str) -> Option<&str> {
        self.meso_map.get(subfield).map(String::as_str)
    }

    /// The subfields a record is assigned to under the active mode.
    /// Duplicate listings collapse to one assignment.
    pub fn assigned_subfields<'a>(&self, record: &'a PaperRecord) -> Vec<&'a str> {
        self.assigned_fields(&record.field_ids)
    }

    /// Same as [`FieldScheme::assigned_subfields`] over a bare field-id list.
    pub fn assigned_fields<'a>(&self, field_ids: &'a [String]) -> Vec<&'a str> {
        match self.assignment_mode {
            AssignmentMode::PrimaryOnly => {
                field_ids.first().map(String::as_str).into_iter().collect()
            }
            AssignmentMode::AllListed => {
                let mut seen = HashSet::new();
                field_ids.iter().map(String::as_str).filter(|f| seen.insert(*f)).collect()
            }
        }
    }
}

/// A (subfield, window-end-year) analysis cell.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct CellKey {
    pub subfield: String,
    pub year: i32,
}

impl CellKey {
    pub fn new(subfield: impl Into<String>, year: i32) -> CellKey {
        CellKey { subfield: subfield.into(), year }
    }
}

impl fmt::Display for CellKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.subfield, self.year)
    }
}

/// Accepted/rejected record counts from one ingest pass.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct IngestStats {
    pub accepted: u64,
    pub rejected: u64,
}

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("{0}: {1}")]
    Io(String, #[source] std::io::Error),
    #[error("scheme line {0} is not subfield<TAB>meso: {1:?}")]
    BadScheme(usize, String),
    #[error("field scheme has no entries")]
    EmptyScheme,
    #[error("no record passed validation")]
    NoAcceptedRecords,
    #[error("invalid year range {0}..={1}")]
    BadYearRange(i32, i32),
}

/// Reads and validates a line-delimited corpus.
///
/// Each line is one JSON record with fields
/// `{id, year, fields, abstract, n_authors, refs}`. Malformed lines and
/// records violating the invariants (empty id, duplicate id, out-of-range
/// year, empty abstract, no subfields) are logged with their line number and
/// skipped; zero accepted records is fatal.
pub fn load_corpus(
    path: &Path,
    year_range: (i32, i32),
) -> Result<(Vec<PaperRecord>, IngestStats), IngestError> {
    let file = File::open(path).map_err(|e| IngestError::Io(path.display().to_string(), e))?;
    load_corpus_reader(BufReader::new(file), year_range)
}

/// [`load_corpus`] over any reader.
pub fn load_corpus_reader<R: BufRead>(
    reader: R,
    year_range: (i32, i32),
) -> Result<(Vec<PaperRecord>, IngestStats), IngestError> {
    let (min_year, max_year) = year_range;
    if min_year > max_year {
        return Err(IngestError::BadYearRange(min_year, max_year));
    }
    let mut records = Vec::new();
    let mut stats = IngestStats::default();
    let mut seen_ids = HashSet::new();
    for (idx, line) in reader.lines().enumerate() {
        let lineno = idx + 1;
        let line = match line {
            Ok(l) => l,
            Err(e) => {
                log::warn!("line {lineno}: read error: {e}");
                stats.rejected += 1;
                continue;
            }
        };
        if line.trim().is_empty() {
            continue;
        }
        let record: PaperRecord = match serde_json::from_str(&line) {
            Ok(r) => r,
            Err(e) => {
                log::warn!("line {lineno}: malformed record: {e}");
                stats.rejected += 1;
                continue;
            }
        };
        if let Err(reason) = validate(&record, year_range, &seen_ids) {
            log::warn!("line {lineno}: rejected record {:?}: {reason}", record.paper_id);
            stats.rejected += 1;
            continue;
        }
        seen_ids.insert(record.paper_id.clone());
        records.push(record);
        stats.accepted += 1;
    }
    if records.is_empty() {
        return Err(IngestError::NoAcceptedRecords);
    }
    Ok((records, stats))
}

fn validate(
    record: &PaperRecord,
    (min_year, max_year): (i32, i32),
    seen: &HashSet<String>,
) -> Result<(), &'static str> {
    if record.paper_id.is_empty() {
        return Err("empty paper id");
    }
    if seen.contains(&record.paper_id) {
        return Err("duplicate paper id");
    }
    if record.year < min_year || record.year > max_year {
        return Err("year outside configured range");
    }
    if record.abstract_text.trim().is_empty() {
        return Err("missing abstract");
    }
    if record.field_ids.is_empty() {
        return Err("no subfield assignment");
    }
    Ok(())
}

/// Groups records into (subfield, window-end-year) cells.
///
/// With window `w`, a paper from year `y` lands in every cell whose end year
/// lies in `y..y+w-1`, clamped to `max_end_year` (defaults to the maximum
/// record year). Partial windows at the start of the range are kept.
pub fn group_by_cell<'a>(
    records: &'a [PaperRecord],
    scheme: &FieldScheme,
    window: u32,
    max_end_year: Option<i32>,
) -> BTreeMap<CellKey, Vec<&'a PaperRecord>> {
    assert!(window >= 1, "window must be at least one year");
    let max_end = max_end_year
        .or_else(|| records.iter().map(|r| r.year).max())
        .unwrap_or(i32::MIN);
    let mut cells: BTreeMap<CellKey, Vec<&PaperRecord>> = BTreeMap::new();
    for record in records {
        for subfield in scheme.assigned_subfields(record) {
            let last = (record.year + window as i32 - 1).min(max_end);
            for end_year in record.year..=last {
                cells
                    .entry(CellKey::new(subfield, end_year))
                    .or_default()
                    .push(record);
            }
        }
    }
    cells
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Cursor;

    fn record(id: &str, year: i32, fields: &[&str], abstract_text: &str) -> String {
        serde_json::json!({
            "id": id,
            "year": year,
            "fields": fields,
            "abstract": abstract_text,
            "n_authors": 2,
            "refs": [],
        })
        .to_string()
    }

    #[test]
    fn rejects_missing_abstract_and_keeps_rest() {
        let input = [
            record("p1", 2000, &["A"], "an abstract"),
            record("p2", 2001, &["A"], ""),
            record("p3", 2002, &["B"], "another abstract"),
        ]
        .join("\n");
        let (records, stats) = load_corpus_reader(Cursor::new(input), (1990, 2010)).unwrap();
        assert_eq!(records.len(), 2);
        assert_eq!(stats.accepted, 2);
        assert_eq!(stats.rejected, 1);
    }

    #[test]
    fn rejects_out_of_range_year() {
        let input = [record("p1", 1800, &["A"], "text"), record("p2", 2000, &["A"], "text")]
            .join("\n");
        let (records, stats) = load_corpus_reader(Cursor::new(input), (1965, 2016)).unwrap();
        assert_eq!(records.len(), 1);
        assert_eq!(records[0].paper_id, "p2");
        assert_eq!(stats.rejected, 1);
    }

    #[test]
    fn rejects_duplicates_and_malformed_lines() {
        let input = [
            record("p1", 2000, &["A"], "text"),
            "{not json}".to_string(),
            record("p1", 2001, &["A"], "text"),
        ]
        .join("\n");
        let (records, stats) = load_corpus_reader(Cursor::new(input), (1990, 2010)).unwrap();
        assert_eq!(records.len(), 1);
        assert_eq!(stats.rejected, 2);
    }

    #[test]
    fn zero_accepted_is_fatal() {
        let err = load_corpus_reader(Cursor::new(record("p", 1800, &["A"], "x")), (1990, 2000));
        assert!(matches!(err, Err(IngestError::NoAcceptedRecords)));
    }

    fn scheme(mode: AssignmentMode) -> FieldScheme {
        FieldScheme::parse_tsv("A\tM1\nB\tM1\nC\tM2\n", mode).unwrap()
    }

    fn paper(id: &str, year: i32, fields: &[&str]) -> PaperRecord {
        PaperRecord {
            paper_id: id.into(),
            year,
            field_ids: fields.iter().map(|s| s.to_string()).collect(),
            abstract_text: "text".into(),
            author_count: 1,
            reference_ids: vec![],
        }
    }

    #[test]
    fn window_one_single_cell() {
        let records = vec![paper("p", 2000, &["A"])];
        let cells = group_by_cell(&records, &scheme(AssignmentMode::PrimaryOnly), 1, Some(2005));
        assert_eq!(cells.len(), 1);
        assert_eq!(cells[&CellKey::new("A", 2000)].len(), 1);
    }

    #[test]
    fn window_three_spans_forward() {
        let records = vec![paper("p", 2000, &["A"])];
        let cells = group_by_cell(&records, &scheme(AssignmentMode::PrimaryOnly), 3, Some(2005));
        let years: Vec<i32> = cells.keys().map(|k| k.year).collect();
        assert_eq!(years, vec![2000, 2001, 2002]);
    }

    #[test]
    fn all_listed_contributes_to_both() {
        let records = vec![paper("p", 2000, &["A", "B"])];
        let cells = group_by_cell(&records, &scheme(AssignmentMode::AllListed), 1, None);
        assert!(cells.contains_key(&CellKey::new("A", 2000)));
        assert!(cells.contains_key(&CellKey::new("B", 2000)));
        let primary = group_by_cell(&records, &scheme(AssignmentMode::PrimaryOnly), 1, None);
        assert!(!primary.contains_key(&CellKey::new("B", 2000)));
    }

    #[test]
    fn cell_counts_sum_to_papers_times_window() {
        let records: Vec<PaperRecord> =
            (0..20).map(|i| paper(&format!("p{i}"), 2000 + (i % 4), &["A", "C"])).collect();
        let sch = scheme(AssignmentMode::AllListed);
        let cells = group_by_cell(&records, &sch, 2, Some(2010));
        let total: usize = cells.values().map(Vec::len).sum();
        // every paper is at least one year below the clamp, so no truncation
        assert_eq!(total, 20 * 2 * 2);
    }

    #[test]
    fn bundled_schemes_parse() {
        let physics = FieldScheme::bundled_physics();
        assert_eq!(physics.meso_of("6"), Some("Condensed Matter physics"));
        let social = FieldScheme::bundled_social();
        assert_eq!(social.meso_of("Sociology"), Some("Sociology and related fields"));
        assert_eq!(social.subfields().count(), 23);
    }
}
