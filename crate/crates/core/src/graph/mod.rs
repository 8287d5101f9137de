//! Weighted word co-occurrence graph and modularity-based community detection.

mod leiden;
mod level;
mod louvain;
mod oracle;

use std::io::Write;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::corpus::BigramCounts;
use crate::error::{Error, Result};

pub use leiden::leiden;
pub use louvain::louvain;
pub use oracle::{brute_force_best_partition, BRUTE_FORCE_MAX_NODES};

/// Undirected weighted graph over words. Self loops are not allowed.
#[derive(Debug, Clone, PartialEq)]
pub struct WordGraph {
    words: Vec<String>,
    /// Neighbor lists sorted by neighbor index.
    adjacency: Vec<Vec<(usize, f64)>>,
    strength: Vec<f64>,
    total_weight: f64,
}

impl WordGraph {
    /// One node per word appearing in a retained pair, nodes sorted by word.
    pub fn from_bigrams(counts: &BigramCounts) -> Result<Self> {
        if counts.is_empty() {
            return Err(Error::EmptyGraph);
        }
        let mut words: Vec<String> = counts
            .iter()
            .flat_map(|(a, b, _)| [a.to_string(), b.to_string()])
            .collect();
        words.sort();
        words.dedup();
        let index = |w: &str| words.binary_search_by(|x| x.as_str().cmp(w)).unwrap();
        let edges: Vec<(usize, usize, f64)> = counts
            .iter()
            .map(|(a, b, c)| (index(a), index(b), c as f64))
            .collect();
        Self::from_edges(words.clone(), &edges)
    }

    /// Builds a graph from explicit edges. Parallel edges are summed.
    pub fn from_edges<S: Into<String>>(words: Vec<S>, edges: &[(usize, usize, f64)]) -> Result<Self> {
        let words: Vec<String> = words.into_iter().map(Into::into).collect();
        let n = words.len();
        let mut adjacency: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n];
        for &(a, b, w) in edges {
            if a >= n || b >= n {
                return Err(Error::Dimension(format!("edge ({a},{b}) outside {n} nodes")));
            }
            if a == b {
                return Err(Error::Config(format!("self loop on node {a}")));
            }
            if !(w.is_finite() && w >= 0.0) {
                return Err(Error::Config(format!("edge weight {w} must be finite and ≥ 0")));
            }
            if w == 0.0 {
                continue;
            }
            adjacency[a].push((b, w));
            adjacency[b].push((a, w));
        }
        for list in &mut adjacency {
            list.sort_by_key(|&(j, _)| j);
            let mut merged: Vec<(usize, f64)> = Vec::with_capacity(list.len());
            for &(j, w) in list.iter() {
                match merged.last_mut() {
                    Some((k, acc)) if *k == j => *acc += w,
                    _ => merged.push((j, w)),
                }
            }
            *list = merged;
        }
        let strength: Vec<f64> = adjacency
            .iter()
            .map(|l| l.iter().map(|&(_, w)| w).sum())
            .collect();
        let total_weight = strength.iter().sum::<f64>() / 2.0;
        Ok(WordGraph {
            words,
            adjacency,
            strength,
            total_weight,
        })
    }

    pub fn node_count(&self) -> usize {
        self.words.len()
    }

    pub fn edge_count(&self) -> usize {
        self.adjacency.iter().map(Vec::len).sum::<usize>() / 2
    }

    pub fn words(&self) -> &[String] {
        &self.words
    }

    pub fn word(&self, node: usize) -> &str {
        &self.words[node]
    }

    pub fn neighbors(&self, node: usize) -> &[(usize, f64)] {
        &self.adjacency[node]
    }

    /// k_i, the weighted degree.
    pub fn strength(&self, node: usize) -> f64 {
        self.strength[node]
    }

    /// m, half the sum of all adjacency entries.
    pub fn total_weight(&self) -> f64 {
        self.total_weight
    }

    pub fn weight(&self, a: usize, b: usize) -> f64 {
        self.adjacency[a]
            .binary_search_by_key(&b, |&(j, _)| j)
            .map(|k| self.adjacency[a][k].1)
            .unwrap_or(0.0)
    }

    /// Edges with `a < b`, in node order.
    pub fn edges(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        self.adjacency.iter().enumerate().flat_map(|(a, l)| {
            l.iter()
                .filter(move |&&(b, _)| a < b)
                .map(move |&(b, w)| (a, b, w))
        })
    }

    /// Debug export: `word_a,word_b,weight`.
    pub fn write_edge_list<W: Write>(&self, out: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(out);
        wtr.write_record(["word_a", "word_b", "weight"])?;
        for (a, b, w) in self.edges() {
            wtr.write_record([self.word(a), self.word(b), &format_weight(w)])?;
        }
        wtr.flush().map_err(|e| Error::io("<edge list>", e))?;
        Ok(())
    }
}

fn format_weight(w: f64) -> String {
    if w.fract() == 0.0 && w.abs() < 1e15 {
        format!("{}", w as i64)
    } else {
        format!("{w}")
    }
}

/// Hard assignment of every node to one community. Community ids are
/// contiguous and numbered by first appearance in node order.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Partition {
    assignment: Vec<usize>,
    num_communities: usize,
}

impl Partition {
    /// Relabels arbitrary community labels into canonical form.
    pub fn from_assignment(labels: &[usize]) -> Self {
        let mut map = std::collections::HashMap::new();
        let assignment: Vec<usize> = labels
            .iter()
            .map(|&l| {
                let next = map.len();
                *map.entry(l).or_insert(next)
            })
            .collect();
        Partition {
            num_communities: map.len(),
            assignment,
        }
    }

    pub fn singletons(n: usize) -> Self {
        Partition {
            assignment: (0..n).collect(),
            num_communities: n,
        }
    }

    pub fn whole(n: usize) -> Self {
        Partition {
            assignment: vec![0; n],
            num_communities: usize::from(n > 0),
        }
    }

    pub fn assignment(&self) -> &[usize] {
        &self.assignment
    }

    pub fn community_of(&self, node: usize) -> usize {
        self.assignment[node]
    }

    pub fn num_communities(&self) -> usize {
        self.num_communities
    }

    pub fn len(&self) -> usize {
        self.assignment.len()
    }

    pub fn is_empty(&self) -> bool {
        self.assignment.is_empty()
    }

    /// Node indices per community, ascending.
    pub fn member_nodes(&self) -> Vec<Vec<usize>> {
        let mut out = vec![Vec::new(); self.num_communities];
        for (node, &c) in self.assignment.iter().enumerate() {
            out[c].push(node);
        }
        out
    }

    /// Sorted word lists per community.
    pub fn members(&self, graph: &WordGraph) -> Vec<Vec<String>> {
        self.member_nodes()
            .into_iter()
            .map(|nodes| {
                let mut words: Vec<String> = nodes.iter().map(|&n| graph.word(n).to_string()).collect();
                words.sort();
                words
            })
            .collect()
    }

    pub fn sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0; self.num_communities];
        for &c in &self.assignment {
            sizes[c] += 1;
        }
        sizes
    }

    /// Feature communities: those with at least `min_size` members, numbered
    /// from 1 in partition order. Words of smaller communities are reported
    /// as dropped.
    pub fn communities(&self, graph: &WordGraph, min_size: usize) -> CommunitySet {
        let mut communities = Vec::new();
        let mut dropped = Vec::new();
        for words in self.members(graph) {
            if words.len() >= min_size.max(1) {
                communities.push(Community {
                    id: communities.len() + 1,
                    words,
                });
            } else {
                dropped.extend(words);
            }
        }
        dropped.sort();
        CommunitySet {
            communities,
            dropped_words: dropped,
        }
    }
}

/// Q = (1/2m) Σ_ij [A_ij − k_i k_j / 2m] δ(c_i, c_j), evaluated per community.
pub fn modularity(graph: &WordGraph, partition: &Partition) -> Result<f64> {
    if partition.len() != graph.node_count() {
        return Err(Error::PartitionMismatch {
            partition: partition.len(),
            graph: graph.node_count(),
        });
    }
    let two_m = 2.0 * graph.total_weight();
    if two_m <= 0.0 {
        return Err(Error::ZeroWeight);
    }
    let k = partition.num_communities();
    let mut internal = vec![0.0; k];
    let mut total = vec![0.0; k];
    for node in 0..graph.node_count() {
        let c = partition.community_of(node);
        total[c] += graph.strength(node);
        for &(nb, w) in graph.neighbors(node) {
            if partition.community_of(nb) == c {
                internal[c] += w;
            }
        }
    }
    Ok(internal
        .iter()
        .zip(&total)
        .map(|(&inside, &tot)| inside / two_m - (tot / two_m).powi(2))
        .sum())
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Community {
    /// 1-based feature number (`com_<id>`).
    pub id: usize,
    pub words: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct CommunitySet {
    pub communities: Vec<Community>,
    /// Graph words whose community was below the minimum size.
    pub dropped_words: Vec<String>,
}

impl CommunitySet {
    pub fn len(&self) -> usize {
        self.communities.len()
    }

    pub fn is_empty(&self) -> bool {
        self.communities.is_empty()
    }

    /// Word → 0-based index into `communities`.
    pub fn word_index(&self) -> std::collections::HashMap<&str, usize> {
        self.communities
            .iter()
            .enumerate()
            .flat_map(|(k, c)| c.words.iter().map(move |w| (w.as_str(), k)))
            .collect()
    }

    /// `community_id,word`, sorted by community then word.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(out);
        wtr.write_record(["community_id", "word"])?;
        for c in &self.communities {
            for w in &c.words {
                wtr.write_record([c.id.to_string().as_str(), w.as_str()])?;
            }
        }
        wtr.flush().map_err(|e| Error::io("<communities>", e))?;
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ClusteringMethod {
    #[default]
    Louvain,
    Leiden,
}

impl FromStr for ClusteringMethod {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "louvain" => Ok(ClusteringMethod::Louvain),
            "leiden" => Ok(ClusteringMethod::Leiden),
            other => Err(Error::Config(format!(
                "unknown clustering backend `{other}` (expected louvain or leiden)"
            ))),
        }
    }
}

impl std::fmt::Display for ClusteringMethod {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            ClusteringMethod::Louvain => "louvain",
            ClusteringMethod::Leiden => "leiden",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct ClusterConfig {
    pub seed: u64,
    /// Cross-check every incremental ΔQ against a full recomputation.
    pub debug_check: bool,
}

impl ClusterConfig {
    pub fn seeded(seed: u64) -> Self {
        ClusterConfig {
            seed,
            debug_check: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Clustering {
    pub partition: Partition,
    /// Modularity recomputed from scratch on the final partition.
    pub modularity: f64,
    /// Modularity tracked incrementally through the levels.
    pub tracked_modularity: f64,
    /// ΔQ of every accepted local move, in order.
    pub move_gains: Vec<f64>,
    pub levels: usize,
}

/// Runs the chosen backend.
pub fn cluster(graph: &WordGraph, method: ClusteringMethod, config: ClusterConfig) -> Result<Clustering> {
    match method {
        ClusteringMethod::Louvain => louvain(graph, config),
        ClusteringMethod::Leiden => leiden(graph, config),
    }
}
