//! Artifact layout and readers/writers shared by the pipeline stages.

use std::collections::BTreeMap;
use std::fs::{self, File};
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use coreperi_core::coreperiphery::CpAssignment;
use coreperi_core::ingest::CellKey;
use serde::{Deserialize, Serialize};

/// Resolved artifact paths under the output directory.
#[derive(Debug, Clone)]
pub struct Paths {
    pub out: PathBuf,
}

impl Paths {
    pub fn new(out: &Path) -> Paths {
        Paths { out: out.to_path_buf() }
    }

    pub fn vocabulary(&self) -> PathBuf {
        self.out.join("vocabulary.tsv")
    }
    pub fn paper_concepts(&self) -> PathBuf {
        self.out.join("paper_concepts.jsonl")
    }
    pub fn networks_dir(&self) -> PathBuf {
        self.out.join("networks")
    }
    pub fn networks_index(&self) -> PathBuf {
        self.networks_dir().join("index.tsv")
    }
    pub fn assignments_dir(&self) -> PathBuf {
        self.out.join("assignments")
    }
    pub fn assignments_index(&self) -> PathBuf {
        self.assignments_dir().join("index.tsv")
    }
    pub fn metrics_csv(&self) -> PathBuf {
        self.out.join("metrics.csv")
    }
    pub fn mobility_csv(&self) -> PathBuf {
        self.out.join("mobility.csv")
    }
    pub fn meso_csv(&self) -> PathBuf {
        self.out.join("meso_metrics.csv")
    }
    pub fn profiles_csv(&self) -> PathBuf {
        self.out.join("concept_profiles.csv")
    }
    pub fn structure_churn_csv(&self) -> PathBuf {
        self.out.join("structure_churn.csv")
    }
    pub fn schema_txt(&self) -> PathBuf {
        self.out.join("schema.txt")
    }
    pub fn nullmodel_csv(&self) -> PathBuf {
        self.out.join("nullmodel.csv")
    }
    pub fn cd_csv(&self) -> PathBuf {
        self.out.join("cd_index.csv")
    }
    pub fn consensus_csv(&self) -> PathBuf {
        self.out.join("consensus.csv")
    }
    pub fn regression_csv(&self) -> PathBuf {
        self.out.join("regression_report.csv")
    }
    pub fn regression_txt(&self) -> PathBuf {
        self.out.join("regression_report.txt")
    }
    pub fn report_txt(&self) -> PathBuf {
        self.out.join("report.txt")
    }
    pub fn percent_change_csv(&self) -> PathBuf {
        self.out.join("percent_change.csv")
    }
}

/// One record of the extract stage's per-paper concept file.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PaperConcepts {
    pub id: String,
    pub year: i32,
    pub fields: Vec<String>,
    pub concepts: Vec<String>,
}

pub fn write_paper_concepts(path: &Path, items: &[PaperConcepts]) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    for item in items {
        serde_json::to_writer(&mut w, item)?;
        w.write_all(b"\n")?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_paper_concepts(path: &Path) -> Result<Vec<PaperConcepts>> {
    let reader = BufReader::new(
        File::open(path).with_context(|| format!("cannot open {}", path.display()))?,
    );
    let mut out = Vec::new();
    for (lineno, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let item: PaperConcepts = serde_json::from_str(&line)
            .with_context(|| format!("{}:{}: malformed line", path.display(), lineno + 1))?;
        out.push(item);
    }
    Ok(out)
}

/// One row of a cell index (networks or assignments).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CellIndexRow {
    pub subfield: String,
    pub year: i32,
    pub file: String,
    pub n_nodes: usize,
    pub n_edges: usize,
}

pub fn write_cell_index(path: &Path, rows: &[CellIndexRow]) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    writeln!(w, "# subfield\tyear\tfile\tn_nodes\tn_edges")?;
    for row in rows {
        writeln!(w, "{}\t{}\t{}\t{}\t{}", row.subfield, row.year, row.file, row.n_nodes, row.n_edges)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_cell_index(path: &Path) -> Result<Vec<CellIndexRow>> {
    let reader = BufReader::new(
        File::open(path).with_context(|| format!("cannot open {}", path.display()))?,
    );
    let mut rows = Vec::new();
    for line in reader.lines() {
        let line = line?;
        if line.starts_with('#') || line.trim().is_empty() {
            continue;
        }
        let parts: Vec<&str> = line.split('\t').collect();
        if parts.len() != 5 {
            bail!("{}: malformed index line {line:?}", path.display());
        }
        rows.push(CellIndexRow {
            subfield: parts[0].to_string(),
            year: parts[1].parse()?,
            file: parts[2].to_string(),
            n_nodes: parts[3].parse()?,
            n_edges: parts[4].parse()?,
        });
    }
    Ok(rows)
}

/// Filesystem-safe stem for a cell, unique within a run via the index file.
pub fn cell_stem(cell: &CellKey, used: &mut BTreeMap<String, u32>) -> String {
    let sanitized: String = cell
        .subfield
        .chars()
        .map(|c| if c.is_ascii_alphanumeric() { c } else { '_' })
        .collect();
    let base = format!("{sanitized}__{}", cell.year);
    let n = used.entry(base.clone()).or_insert(0);
    *n += 1;
    if *n == 1 {
        base
    } else {
        format!("{base}__{n}")
    }
}

/// A detected cell read back from the assignment artifact.
#[derive(Debug, Clone)]
pub struct CellAssignment {
    pub cell: CellKey,
    pub labels: Vec<String>,
    pub assignment: CpAssignment,
}

/// Writes the per-cell assignment export: header lines with the cell and the
/// objective, then one `concept structure is_core structure_significant` row
/// per node (structure indices 1-based).
pub fn write_assignment(path: &Path, cell: &CellKey, labels: &[String], asg: &CpAssignment) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    writeln!(w, "# cell\t{}\t{}", cell.subfield, cell.year)?;
    writeln!(w, "# qcp\t{}", asg.qcp)?;
    writeln!(w, "# n_significant\t{}", asg.n_significant)?;
    writeln!(w, "# concept\tstructure\tis_core\tstructure_significant")?;
    for (i, label) in labels.iter().enumerate() {
        let s = asg.structure[i] as usize;
        writeln!(
            w,
            "{label}\t{}\t{}\t{}",
            s + 1,
            u8::from(asg.is_core[i]),
            u8::from(asg.structure_sig[s]),
        )?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_assignment(path: &Path) -> Result<CellAssignment> {
    let reader = BufReader::new(
        File::open(path).with_context(|| format!("cannot open {}", path.display()))?,
    );
    let mut cell: Option<CellKey> = None;
    let mut qcp = 0.0;
    let mut labels = Vec::new();
    let mut structure = Vec::new();
    let mut is_core = Vec::new();
    let mut sig_by_structure: BTreeMap<u32, bool> = BTreeMap::new();
    for line in reader.lines() {
        let line = line?;
        if let Some(rest) = line.strip_prefix("# cell\t") {
            let (subfield, year) = rest
                .rsplit_once('\t')
                .with_context(|| format!("{}: malformed cell header", path.display()))?;
            cell = Some(CellKey::new(subfield, year.trim().parse()?));
        } else if let Some(rest) = line.strip_prefix("# qcp\t") {
            qcp = rest.trim().parse()?;
        } else if line.starts_with('#') || line.trim().is_empty() {
            continue;
        } else {
            let parts: Vec<&str> = line.split('\t').collect();
            if parts.len() != 4 {
                bail!("{}: malformed assignment row {line:?}", path.display());
            }
            let s: u32 = parts[1].parse::<u32>()? - 1;
            labels.push(parts[0].to_string());
            structure.push(s);
            is_core.push(parts[2] == "1");
            sig_by_structure.insert(s, parts[3] == "1");
        }
    }
    let cell = cell.with_context(|| format!("{}: missing cell header", path.display()))?;
    let n_structures = structure.iter().map(|&s| s as usize + 1).max().unwrap_or(0);
    let structure_sig: Vec<bool> = (0..n_structures as u32)
        .map(|s| sig_by_structure.get(&s).copied().unwrap_or(false))
        .collect();
    let n_significant = structure_sig.iter().filter(|&&s| s).count();
    Ok(CellAssignment {
        cell,
        labels,
        assignment: CpAssignment { structure, is_core, qcp, structure_sig, n_significant },
    })
}

/// Reads CSV rows written with `coreperi_core::metrics::write_csv`.
pub fn read_csv<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<Vec<T>> {
    let mut reader = csv::Reader::from_path(path)
        .with_context(|| format!("cannot open {}", path.display()))?;
    let mut rows = Vec::new();
    for row in reader.deserialize() {
        rows.push(row.with_context(|| format!("malformed row in {}", path.display()))?);
    }
    Ok(rows)
}

pub fn create_dir(path: &Path) -> Result<()> {
    fs::create_dir_all(path).with_context(|| format!("cannot create {}", path.display()))
}
