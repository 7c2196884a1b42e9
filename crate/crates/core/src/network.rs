//! Per-cell concept co-occurrence networks: undirected simple graphs with
//! lexicographically canonicalized node indices.

use std::collections::{BTreeMap, BTreeSet};
use std::io::{self, BufRead, Write};

use thiserror::Error;

use crate::ingest::{CellKey, PaperRecord};
use crate::concepts::{ConceptExtractor, ConceptVocabulary};

#[derive(Debug, Error)]
pub enum NetworkError {
    #[error("edge density is undefined for networks with fewer than two nodes")]
    Degenerate,
    #[error("network file is malformed: {0}")]
    BadFormat(String),
    #[error(transparent)]
    Io(#[from] io::Error),
}

/// Undirected simple graph over concept nodes for one (subfield, year) cell.
///
/// Node ids are dense `0..N-1`, ordered by concept label; edges are binary
/// with co-occurrence counts kept as side metadata. Every node has degree
/// at least one when built from abstracts; synthetic graphs made with
/// [`ConceptNetwork::from_raw_edges`] may contain isolated nodes.
#[derive(Debug, Clone, PartialEq)]
pub struct ConceptNetwork {
    pub cell: CellKey,
    labels: Vec<String>,
    adjacency: Vec<Vec<u32>>,
    edge_list: Vec<(u32, u32)>,
    edge_counts: Vec<u32>,
}

impl ConceptNetwork {
    /// Builds a network from co-occurring concept sets, one set per abstract.
    ///
    /// Nodes are in-vocabulary concepts appearing in at least one set; edges
    /// link concepts sharing a set, with multiplicity collapsed to binary.
    /// Isolated concepts are dropped. Returns `None` when no edge survives
    /// (the empty-network marker; callers skip the cell).
    pub fn build(
        cell: CellKey,
        concept_sets: &[BTreeSet<String>],
        vocab: &ConceptVocabulary,
    ) -> Option<ConceptNetwork> {
        let mut edge_counts: BTreeMap<(String, String), u32> = BTreeMap::new();
        for set in concept_sets {
            let members: Vec<&String> = set.iter().filter(|c| vocab.contains(c)).collect();
            for (i, a) in members.iter().enumerate() {
                for b in &members[i + 1..] {
                    let key = ((*a).clone(), (*b).clone());
                    *edge_counts.entry(key).or_insert(0) += 1;
                }
            }
        }
        if edge_counts.is_empty() {
            return None;
        }
        let labels: Vec<String> = edge_counts
            .keys()
            .flat_map(|(a, b)| [a.clone(), b.clone()])
            .collect::<BTreeSet<_>>()
            .into_iter()
            .collect();
        let index: BTreeMap<&str, u32> =
            labels.iter().enumerate().map(|(i, l)| (l.as_str(), i as u32)).collect();
        let mut edges = Vec::with_capacity(edge_counts.len());
        let mut counts = Vec::with_capacity(edge_counts.len());
        for ((a, b), n) in &edge_counts {
            let (i, j) = (index[a.as_str()], index[b.as_str()]);
            edges.push((i.min(j), i.max(j)));
            counts.push(*n);
        }
        Some(Self::assemble(cell, labels, edges, counts))
    }

    /// Convenience wrapper extracting concepts from the records directly.
    pub fn build_from_records(
        cell: CellKey,
        records: &[&PaperRecord],
        vocab: &ConceptVocabulary,
        extractor: &ConceptExtractor,
    ) -> Option<ConceptNetwork> {
        let sets: Vec<BTreeSet<String>> =
            records.iter().map(|r| extractor.extract_concepts(&r.abstract_text)).collect();
        Self::build(cell, &sets, vocab)
    }

    /// Builds a graph from explicit edges over `n_nodes` synthetic nodes.
    /// Self-loops are rejected by panic; parallel edges collapse to one.
    pub fn from_raw_edges(cell: CellKey, n_nodes: usize, edges: &[(u32, u32)]) -> ConceptNetwork {
        let labels: Vec<String> = (0..n_nodes).map(|i| format!("n{i:05}")).collect();
        let mut dedup: BTreeSet<(u32, u32)> = BTreeSet::new();
        for &(a, b) in edges {
            assert!(a != b, "self-loop on node {a}");
            assert!((a as usize) < n_nodes && (b as usize) < n_nodes, "edge endpoint out of range");
            dedup.insert((a.min(b), a.max(b)));
        }
        let edges: Vec<(u32, u32)> = dedup.into_iter().collect();
        let counts = vec![1; edges.len()];
        Self::assemble(cell, labels, edges, counts)
    }

    fn assemble(
        cell: CellKey,
        labels: Vec<String>,
        edge_list: Vec<(u32, u32)>,
        edge_counts: Vec<u32>,
    ) -> ConceptNetwork {
        let mut adjacency = vec![Vec::new(); labels.len()];
        for &(a, b) in &edge_list {
            adjacency[a as usize].push(b);
            adjacency[b as usize].push(a);
        }
        for neighbors in &mut adjacency {
            neighbors.sort_unstable();
        }
        ConceptNetwork { cell, labels, adjacency, edge_list, edge_counts }
    }

    /// Replaces the edge set, keeping the cell and node labels. Edges are
    /// normalized and deduplicated; multiplicities reset to one.
    pub fn with_edges(&self, edges: &[(u32, u32)]) -> ConceptNetwork {
        let dedup: BTreeSet<(u32, u32)> =
            edges.iter().map(|&(a, b)| (a.min(b), a.max(b))).collect();
        let edges: Vec<(u32, u32)> = dedup.into_iter().collect();
        let counts = vec![1; edges.len()];
        Self::assemble(self.cell.clone(), self.labels.clone(), edges, counts)
    }

    pub fn n_nodes(&self) -> usize {
        self.labels.len()
    }

    pub fn n_edges(&self) -> usize {
        self.edge_list.len()
    }

    pub fn label(&self, node: u32) -> &str {
        &self.labels[node as usize]
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn neighbors(&self, node: u32) -> &[u32] {
        &self.adjacency[node as usize]
    }

    pub fn degree(&self, node: u32) -> usize {
        self.adjacency[node as usize].len()
    }

    pub fn has_edge(&self, a: u32, b: u32) -> bool {
        self.adjacency[a as usize].binary_search(&b).is_ok()
    }

    /// Edges as (i, j) with i < j, in canonical order.
    pub fn edges(&self) -> impl Iterator<Item = (u32, u32)> + '_ {
        self.edge_list.iter().copied()
    }

    /// Co-occurrence multiplicities aligned with [`ConceptNetwork::edges`].
    pub fn edge_multiplicities(&self) -> &[u32] {
        &self.edge_counts
    }

    pub fn degree_sequence(&self) -> Vec<usize> {
        self.adjacency.iter().map(Vec::len).collect()
    }

    /// Writes the edge-list export: a header with the cell, N, and M, then one
    /// `concept_a<TAB>concept_b` line per edge.
    pub fn write_edge_list<W: Write>(&self, mut w: W) -> io::Result<()> {
        writeln!(w, "# cell\t{}\t{}", self.cell.subfield, self.cell.year)?;
        writeln!(w, "# nodes\t{}\tedges\t{}", self.n_nodes(), self.n_edges())?;
        for (a, b) in self.edges() {
            writeln!(w, "{}\t{}", self.label(a), self.label(b))?;
        }
        Ok(())
    }

    /// Reads the format produced by [`ConceptNetwork::write_edge_list`].
    pub fn read_edge_list<R: BufRead>(r: R) -> Result<ConceptNetwork, NetworkError> {
        let mut cell: Option<CellKey> = None;
        let mut pairs: Vec<(String, String)> = Vec::new();
        for line in r.lines() {
            let line = line?;
            if let Some(rest) = line.strip_prefix("# cell\t") {
                let (subfield, year) = rest
                    .rsplit_once('\t')
                    .ok_or_else(|| NetworkError::BadFormat(line.clone()))?;
                let year =
                    year.trim().parse().map_err(|_| NetworkError::BadFormat(line.clone()))?;
                cell = Some(CellKey::new(subfield, year));
            } else if line.starts_with('#') || line.trim().is_empty() {
                continue;
            } else {
                let (a, b) = line
                    .split_once('\t')
                    .ok_or_else(|| NetworkError::BadFormat(line.clone()))?;
                pairs.push((a.to_string(), b.to_string()));
            }
        }
        let cell = cell.ok_or_else(|| NetworkError::BadFormat("missing cell header".into()))?;
        let labels: Vec<String> = pairs
            .iter()
            .flat_map(|(a, b)| [a.clone(), b.clone()])
            .collect::<BTreeSet<_>>()
            .into_iter()
            .collect();
        let index: BTreeMap<&str, u32> =
            labels.iter().enumerate().map(|(i, l)| (l.as_str(), i as u32)).collect();
        let edges: BTreeSet<(u32, u32)> = pairs
            .iter()
            .map(|(a, b)| {
                let (i, j) = (index[a.as_str()], index[b.as_str()]);
                (i.min(j), i.max(j))
            })
            .collect();
        let edges: Vec<(u32, u32)> = edges.into_iter().collect();
        let counts = vec![1; edges.len()];
        Ok(Self::assemble(cell, labels, edges, counts))
    }
}

/// Edge density p = M / (N(N-1)/2).
pub fn edge_density(net: &ConceptNetwork) -> Result<f64, NetworkError> {
    let n = net.n_nodes();
    if n < 2 {
        return Err(NetworkError::Degenerate);
    }
    let pairs = n as f64 * (n as f64 - 1.0) / 2.0;
    Ok(net.n_edges() as f64 / pairs)
}
