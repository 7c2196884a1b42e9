//! Concept co-occurrence networks and multi-core core/periphery analysis for
//! scientific corpora.
//!
//! The crate turns a line-delimited corpus of publication records into
//! per-(subfield, year) concept networks, detects core/periphery structures by
//! maximizing a block-model quality function with a label-switching heuristic,
//! and derives the downstream measures: core churn, relative core size,
//! significant structure counts, Herfindahl concentration, core/periphery
//! mobility, degree-preserving null-model z-scores, the CD disruption index,
//! and consensus-word scores. A small inference kernel (Welch's t, OLS with
//! fixed effects, Poisson regression) runs the standard analysis forms over
//! the emitted metric tables.
//!
//! All randomized steps take explicit 64-bit seeds; identical inputs, config,
//! and seed reproduce identical outputs byte for byte.

pub mod concepts;
pub mod coreperiphery;
pub mod ingest;
pub mod metrics;
pub mod network;
pub mod nullmodel;
pub mod scientometrics;
pub mod seeds;
pub mod stats;
pub mod synth;

pub use concepts::{ConceptExtractor, ConceptProfile, ConceptVocabulary, ThresholdMode};
pub use coreperiphery::{CpAssignment, SolverConfig};
pub use ingest::{AssignmentMode, CellKey, FieldScheme, PaperRecord};
pub use metrics::{MetricRow, MobilityRow};
pub use network::ConceptNetwork;
pub use nullmodel::NullEnsembleResult;
pub use scientometrics::{CitationGraph, ConsensusDictionary};
pub use stats::RegressionResult;
