//! Structural time-series over detected assignments: core churn, relative
//! core size, significant-structure counts, Herfindahl concentration,
//! core/periphery mobility, per-structure churn, percent changes, and
//! meso-field averages.
//!
//! Everything here is a pure function of assignments and concept sets;
//! undefined values (first-year churn, empty prior classes) surface as `None`
//! and serialize as empty CSV fields.

use std::collections::{BTreeMap, BTreeSet};
use std::io::{self, Write};

use serde::{Deserialize, Serialize};

use crate::coreperiphery::CpAssignment;
use crate::ingest::FieldScheme;

/// One (subfield, year) row of the primary metric table.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct MetricRow {
    pub subfield: String,
    pub year: i32,
    pub churn: Option<f64>,
    pub rel_core_size: f64,
    /// Significant structure count (the S metric).
    pub n_cores: usize,
    pub herfindahl: Option<f64>,
    pub n_nodes: usize,
    pub n_core_nodes: usize,
}

/// Year-over-year transition fractions for prior core and periphery nodes.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct MobilityRow {
    pub subfield: String,
    pub year: i32,
    pub core_to_core: Option<f64>,
    pub core_to_periphery: Option<f64>,
    pub core_exit: Option<f64>,
    pub periphery_to_periphery: Option<f64>,
    pub periphery_to_core: Option<f64>,
    pub periphery_exit: Option<f64>,
}

/// Meso-field averages of the per-subfield metrics.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct MesoMetricRow {
    pub meso: String,
    pub year: i32,
    pub churn: Option<f64>,
    pub rel_core_size: Option<f64>,
    pub n_cores: Option<f64>,
    pub herfindahl: Option<f64>,
    pub n_subfields: usize,
}

/// Fraction of year-t core concepts that were not core at t-1:
/// `1 - |core_t ∩ core_prev| / |core_t|`. `None` when `core_t` is empty.
pub fn churn(core_t: &BTreeSet<String>, core_prev: &BTreeSet<String>) -> Option<f64> {
    if core_t.is_empty() {
        return None;
    }
    let persistent = core_t.intersection(core_prev).count();
    Some(1.0 - persistent as f64 / core_t.len() as f64)
}

/// Core node share of the assignment.
pub fn relative_core_size(asg: &CpAssignment) -> f64 {
    asg.n_core_nodes() as f64 / asg.n_nodes() as f64
}

/// Share basis for the Herfindahl concentration index.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum HerfindahlBasis {
    /// Shares over total structure membership (core plus periphery).
    #[default]
    TotalMembership,
    /// Shares over core nodes only.
    CoreOnly,
}

/// Sum of squared structure shares over the significant structures, with
/// shares normalized to sum to one. `None` when no structure is significant
/// (or the share basis is empty).
pub fn herfindahl(asg: &CpAssignment, basis: HerfindahlBasis) -> Option<f64> {
    let sizes = asg.structure_sizes();
    let weights: Vec<f64> = sizes
        .iter()
        .zip(&asg.structure_sig)
        .filter(|(_, &sig)| sig)
        .map(|((total, core), _)| match basis {
            HerfindahlBasis::TotalMembership => *total as f64,
            HerfindahlBasis::CoreOnly => *core as f64,
        })
        .collect();
    let total: f64 = weights.iter().sum();
    if total <= 0.0 {
        return None;
    }
    Some(weights.iter().map(|w| (w / total).powi(2)).sum())
}

/// Node class membership of one cell, keyed by concept label.
#[derive(Debug, Clone, Default)]
pub struct CellClasses {
    pub core: BTreeSet<String>,
    pub periphery: BTreeSet<String>,
}

impl CellClasses {
    pub fn from_assignment(labels: &[String], asg: &CpAssignment) -> CellClasses {
        let mut classes = CellClasses::default();
        for (label, &is_core) in labels.iter().zip(&asg.is_core) {
            if is_core {
                classes.core.insert(label.clone());
            } else {
                classes.periphery.insert(label.clone());
            }
        }
        classes
    }
}

/// Transition fractions from the year t-1 classes into year t classes.
/// Each prior-class triple sums to one when the class is nonempty.
pub fn mobility(subfield: &str, year: i32, prev: &CellClasses, cur: &CellClasses) -> MobilityRow {
    let split = |class: &BTreeSet<String>| -> (Option<f64>, Option<f64>, Option<f64>) {
        if class.is_empty() {
            return (None, None, None);
        }
        let n = class.len() as f64;
        let to_core = class.intersection(&cur.core).count() as f64 / n;
        let to_peri = class.intersection(&cur.periphery).count() as f64 / n;
        (Some(to_core), Some(to_peri), Some(1.0 - to_core - to_peri))
    };
    let (core_to_core, core_to_periphery, core_exit) = split(&prev.core);
    let (periphery_to_core, periphery_to_periphery, periphery_exit) = split(&prev.periphery);
    MobilityRow {
        subfield: subfield.to_string(),
        year,
        core_to_core,
        core_to_periphery,
        core_exit,
        periphery_to_periphery,
        periphery_to_core,
        periphery_exit,
    }
}

/// Churn of each significant structure's core against the union of all prior
/// cores. Structures with empty cores are skipped.
pub fn per_structure_churn(
    labels: &[String],
    asg: &CpAssignment,
    core_prev_union: &BTreeSet<String>,
) -> Vec<(u32, f64)> {
    let mut cores: BTreeMap<u32, BTreeSet<&str>> = BTreeMap::new();
    for (i, (&s, &x)) in asg.structure.iter().zip(&asg.is_core).enumerate() {
        if x {
            cores.entry(s).or_default().insert(labels[i].as_str());
        }
    }
    let mut out = Vec::new();
    for (s, sig) in asg.structure_sig.iter().enumerate() {
        if !sig {
            continue;
        }
        match cores.get(&(s as u32)) {
            Some(core) if !core.is_empty() => {
                let persistent =
                    core.iter().filter(|c| core_prev_union.contains(**c)).count();
                out.push((s as u32, 1.0 - persistent as f64 / core.len() as f64));
            }
            _ => log::warn!("structure {s} has an empty core; skipped in per-structure churn"),
        }
    }
    out
}

/// Orientation of the percent-change formula.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ChangeOrientation {
    /// ((v(y0) - v(y1)) / v(y0)) * 100 — decline relative to the start.
    Decline,
    /// ((v(y1) - v(y0)) / v(y0)) * 100 — increase relative to the start.
    Increase,
}

/// Percent change between two years of a series. `None` when either year is
/// missing or the base value is zero.
pub fn percent_change(
    series: &BTreeMap<i32, f64>,
    y0: i32,
    y1: i32,
    orientation: ChangeOrientation,
) -> Option<f64> {
    let v0 = *series.get(&y0)?;
    let v1 = *series.get(&y1)?;
    if v0 == 0.0 {
        return None;
    }
    Some(match orientation {
        ChangeOrientation::Decline => (v0 - v1) / v0 * 100.0,
        ChangeOrientation::Increase => (v1 - v0) / v0 * 100.0,
    })
}

/// Unweighted per-(meso, year) means of the subfield rows.
///
/// Subfields whose total distinct concept count over the whole period falls
/// below `min_concepts` are excluded; subfields missing from the scheme are
/// skipped with a warning.
pub fn meso_average(
    rows: &[MetricRow],
    scheme: &FieldScheme,
    subfield_concept_totals: &BTreeMap<String, usize>,
    min_concepts: usize,
) -> Vec<MesoMetricRow> {
    let mut groups: BTreeMap<(String, i32), Vec<&MetricRow>> = BTreeMap::new();
    for row in rows {
        let total = subfield_concept_totals.get(&row.subfield).copied().unwrap_or(0);
        if total < min_concepts {
            continue;
        }
        match scheme.meso_of(&row.subfield) {
            Some(meso) => {
                groups.entry((meso.to_string(), row.year)).or_default().push(row);
            }
            None => log::warn!("subfield {:?} missing from the field scheme", row.subfield),
        }
    }
    groups
        .into_iter()
        .map(|((meso, year), members)| {
            let mean_opt = |values: Vec<Option<f64>>| {
                let defined: Vec<f64> = values.into_iter().flatten().collect();
                if defined.is_empty() {
                    None
                } else {
                    Some(defined.iter().sum::<f64>() / defined.len() as f64)
                }
            };
            MesoMetricRow {
                meso,
                year,
                churn: mean_opt(members.iter().map(|r| r.churn).collect()),
                rel_core_size: mean_opt(
                    members.iter().map(|r| Some(r.rel_core_size)).collect(),
                ),
                n_cores: mean_opt(members.iter().map(|r| Some(r.n_cores as f64)).collect()),
                herfindahl: mean_opt(members.iter().map(|r| r.herfindahl).collect()),
                n_subfields: members.len(),
            }
        })
        .collect()
}

/// Column documentation emitted alongside the CSV outputs.
pub const SCHEMA_TEXT: &str = "\
metrics.csv
  subfield        subfield identifier
  year            window end year of the cell
  churn           1 - |core_t intersect core_(t-1)| / |core_t|; empty for the first year
  rel_core_size   core nodes / total nodes
  n_cores         number of structures passing the significance screen (S)
  herfindahl      sum of squared significant-structure membership shares; empty when none pass
  n_nodes         nodes in the cell network
  n_core_nodes    core nodes in the cell network

mobility.csv
  subfield, year  cell of year t (transitions measured from t-1 into t)
  core_to_core, core_to_periphery, core_exit
                  fractions of the t-1 core; sum to 1; empty when the t-1 core is empty
  periphery_to_periphery, periphery_to_core, periphery_exit
                  fractions of the t-1 periphery; sum to 1; empty when it is empty

meso_metrics.csv
  meso, year      meso field and year
  churn, rel_core_size, n_cores, herfindahl
                  unweighted means over the meso field's qualifying subfields
  n_subfields     subfields averaged into the row
";

/// Writes rows as CSV with a header; `None` fields serialize empty.
pub fn write_csv<T: Serialize, W: Write>(rows: &[T], w: W) -> io::Result<()> {
    let mut writer = csv::Writer::from_writer(w);
    for row in rows {
        writer.serialize(row).map_err(into_io)?;
    }
    writer.flush()
}

fn into_io(e: csv::Error) -> io::Error {
    io::Error::other(e)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ingest::AssignmentMode;

    fn set(items: &[&str]) -> BTreeSet<String> {
        items.iter().map(|s| s.to_string()).collect()
    }

    fn asg(structure: &[u32], is_core: &[bool], sig: &[bool]) -> CpAssignment {
        CpAssignment {
            structure: structure.to_vec(),
            is_core: is_core.to_vec(),
            qcp: 0.0,
            structure_sig: sig.to_vec(),
            n_significant: sig.iter().filter(|&&s| s).count(),
        }
    }

    #[test]
    fn churn_set_arithmetic() {
        assert_eq!(churn(&set(&["a", "b"]), &set(&["a", "b"])), Some(0.0));
        assert_eq!(churn(&set(&["b", "c", "d", "e"]), &set(&["a", "b", "c"])), Some(0.5));
        assert_eq!(churn(&set(&["x", "y"]), &set(&["a", "b"])), Some(1.0));
        assert_eq!(churn(&set(&[]), &set(&["a"])), None);
    }

    #[test]
    fn relative_core_size_ratio() {
        let a = asg(&[0; 10], &[true, true, true, false, false, false, false, false, false, false], &[true]);
        assert!((relative_core_size(&a) - 0.3).abs() < 1e-12);
        let all = asg(&[0; 3], &[true; 3], &[true]);
        assert_eq!(relative_core_size(&all), 1.0);
    }

    #[test]
    fn herfindahl_shares() {
        let single = asg(&[0, 0, 0], &[true, false, false], &[true]);
        assert_eq!(herfindahl(&single, HerfindahlBasis::TotalMembership), Some(1.0));

        let two_equal = asg(&[0, 0, 1, 1], &[true, false, true, false], &[true, true]);
        let h = herfindahl(&two_equal, HerfindahlBasis::TotalMembership).unwrap();
        assert!((h - 0.5).abs() < 1e-12);

        // shares 0.7 / 0.2 / 0.1 over ten nodes
        let mut structure = vec![0u32; 7];
        structure.extend([1, 1]);
        structure.push(2);
        let is_core = vec![true; 10];
        let shares = asg(&structure, &is_core, &[true, true, true]);
        let h = herfindahl(&shares, HerfindahlBasis::TotalMembership).unwrap();
        assert!((h - 0.54).abs() < 1e-12);

        let none_sig = asg(&[0, 0], &[true, false], &[false]);
        assert_eq!(herfindahl(&none_sig, HerfindahlBasis::TotalMembership), None);
    }

    #[test]
    fn herfindahl_bounds_property() {
        // equals 1/K for equal shares, within (1/K, 1] otherwise
        for k in 1..=5usize {
            let structure: Vec<u32> = (0..k as u32 * 4).map(|i| i % k as u32).collect();
            let is_core = vec![true; structure.len()];
            let a = asg(&structure, &is_core, &vec![true; k]);
            let h = herfindahl(&a, HerfindahlBasis::TotalMembership).unwrap();
            assert!((h - 1.0 / k as f64).abs() < 1e-12);
        }
    }

    #[test]
    fn mobility_enumeration() {
        let prev = CellClasses { core: set(&["a", "b"]), periphery: set(&["p", "q"]) };
        let cur = CellClasses { core: set(&["a", "p"]), periphery: set(&["b"]) };
        let row = mobility("f", 2001, &prev, &cur);
        assert_eq!(row.core_to_core, Some(0.5));
        assert_eq!(row.core_to_periphery, Some(0.5));
        assert_eq!(row.core_exit, Some(0.0));
        assert_eq!(row.periphery_to_core, Some(0.5));
        assert_eq!(row.periphery_to_periphery, Some(0.0));
        assert_eq!(row.periphery_exit, Some(0.5));
    }

    #[test]
    fn mobility_identity_and_empty_class() {
        let classes = CellClasses { core: set(&["a"]), periphery: set(&["p"]) };
        let row = mobility("f", 2001, &classes, &classes);
        assert_eq!(row.core_to_core, Some(1.0));
        assert_eq!(row.periphery_to_periphery, Some(1.0));

        let empty_prev = CellClasses::default();
        let row = mobility("f", 2001, &empty_prev, &classes);
        assert_eq!(row.core_to_core, None);
        assert_eq!(row.periphery_exit, None);
    }

    #[test]
    fn mobility_triples_sum_to_one() {
        let prev = CellClasses { core: set(&["a", "b", "c"]), periphery: set(&["p", "q", "r"]) };
        let cur = CellClasses { core: set(&["a", "q"]), periphery: set(&["b", "p"]) };
        let row = mobility("f", 2001, &prev, &cur);
        let core_sum =
            row.core_to_core.unwrap() + row.core_to_periphery.unwrap() + row.core_exit.unwrap();
        let peri_sum = row.periphery_to_periphery.unwrap()
            + row.periphery_to_core.unwrap()
            + row.periphery_exit.unwrap();
        assert!((core_sum - 1.0).abs() < 1e-9);
        assert!((peri_sum - 1.0).abs() < 1e-9);
    }

    #[test]
    fn per_structure_churn_against_union() {
        let labels: Vec<String> =
            ["a", "b", "c", "d", "p", "q"].iter().map(|s| s.to_string()).collect();
        let a = asg(
            &[0, 0, 0, 0, 1, 1],
            &[true, true, true, true, true, false],
            &[true, true],
        );
        let prior = set(&["a", "b"]);
        let churns = per_structure_churn(&labels, &a, &prior);
        assert_eq!(churns.len(), 2);
        assert!((churns[0].1 - 0.5).abs() < 1e-12, "largest core churn {churns:?}");
        assert!((churns[1].1 - 1.0).abs() < 1e-12);

        // fully persistent largest core
        let all_prior = set(&["a", "b", "c", "d"]);
        let churns = per_structure_churn(&labels, &a, &all_prior);
        assert_eq!(churns[0].1, 0.0);
    }

    #[test]
    fn percent_change_formulas() {
        let series: BTreeMap<i32, f64> =
            [(1993, 0.4), (2016, 0.3), (2000, 0.0)].into_iter().collect();
        assert_eq!(percent_change(&series, 1993, 1993, ChangeOrientation::Decline), Some(0.0));
        let pct = percent_change(&series, 1993, 2016, ChangeOrientation::Decline).unwrap();
        assert!((pct - 25.0).abs() < 1e-12);
        assert_eq!(percent_change(&series, 2000, 2016, ChangeOrientation::Decline), None);
        let counts: BTreeMap<i32, f64> = [(1992, 100.0), (2016, 180.0)].into_iter().collect();
        let pct = percent_change(&counts, 1992, 2016, ChangeOrientation::Increase).unwrap();
        assert!((pct - 80.0).abs() < 1e-12);
    }

    fn metric_row(subfield: &str, year: i32, churn: Option<f64>) -> MetricRow {
        MetricRow {
            subfield: subfield.into(),
            year,
            churn,
            rel_core_size: 0.5,
            n_cores: 2,
            herfindahl: Some(0.6),
            n_nodes: 10,
            n_core_nodes: 5,
        }
    }

    #[test]
    fn meso_average_means_and_exclusions() {
        let scheme =
            FieldScheme::parse_tsv("A\tM1\nB\tM1\nC\tM2\n", AssignmentMode::PrimaryOnly).unwrap();
        let rows = vec![
            metric_row("A", 2000, Some(0.2)),
            metric_row("B", 2000, Some(0.4)),
            metric_row("C", 2000, Some(0.9)),
        ];
        let totals: BTreeMap<String, usize> =
            [("A".into(), 150), ("B".into(), 200), ("C".into(), 80)].into_iter().collect();
        let meso = meso_average(&rows, &scheme, &totals, 100);
        assert_eq!(meso.len(), 1, "subfield C excluded for fewer than 100 concepts");
        assert_eq!(meso[0].meso, "M1");
        assert!((meso[0].churn.unwrap() - 0.3).abs() < 1e-12);
        assert_eq!(meso[0].n_subfields, 2);

        // single-subfield meso equals the subfield value
        let totals_all: BTreeMap<String, usize> =
            [("A".into(), 150), ("B".into(), 200), ("C".into(), 120)].into_iter().collect();
        let meso = meso_average(&rows, &scheme, &totals_all, 100);
        let m2 = meso.iter().find(|m| m.meso == "M2").unwrap();
        assert_eq!(m2.churn, Some(0.9));
    }

    #[test]
    fn csv_serialization_uses_empty_for_undefined() {
        let rows = vec![metric_row("A", 2000, None)];
        let mut buf = Vec::new();
        write_csv(&rows, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("subfield,year,churn,"));
        assert!(text.contains("A,2000,,0.5,"));
    }
}
