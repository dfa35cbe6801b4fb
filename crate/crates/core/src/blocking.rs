//! Weighted blocking graph over Stage-2 pairs.
//!
//! Nodes are candidate profiles, edges are surviving pairs. In count mode an
//! edge weighs the number of rules the pair satisfied. In ARCS mode the weight
//! is the sum, over blocks shared by both endpoints, of satisfied rules divided
//! by block size. Blocks for ARCS come from a [`BlockAssigner`]; the default
//! uses the connected components of the count-weighted graph, so every pair
//! shares exactly one block.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::io::Write;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dsu::DisjointSet;
use crate::graph::{NodeIx, PropertyGraph};
use crate::pattern::Pair;
use crate::rules::FilteredPair;

/// Slack for threshold comparisons on real-valued (ARCS) weights.
pub const ARCS_EPSILON: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Weighting {
    #[default]
    Count,
    Arcs,
}

impl std::str::FromStr for Weighting {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "count" => Ok(Weighting::Count),
            "arcs" => Ok(Weighting::Arcs),
            other => Err(format!("unknown weighting {other:?} (expected count|arcs)")),
        }
    }
}

/// `weight >= threshold`; exact for count weights, within [`ARCS_EPSILON`] for ARCS.
pub fn meets_threshold(weight: f64, threshold: f64, weighting: Weighting) -> bool {
    match weighting {
        Weighting::Count => weight >= threshold,
        Weighting::Arcs => weight >= threshold - ARCS_EPSILON,
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum BlockingError {
    #[error("profile {0:?} is not in the blocking graph")]
    UnknownProfile(String),
}

#[derive(Debug, Clone, PartialEq)]
pub struct BlockEdge {
    pub weight: f64,
    pub rules: BTreeSet<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Block {
    pub id: usize,
    pub members: Vec<NodeIx>,
}

impl Block {
    pub fn size(&self) -> usize {
        self.members.len()
    }
}

/// Assigns each profile to one or more blocks for ARCS weighting.
pub trait BlockAssigner {
    /// Returns blocks as member lists; a profile may appear in several.
    fn assign(&self, nodes: &[NodeIx], edges: &BTreeMap<Pair, BlockEdge>) -> Vec<Vec<NodeIx>>;
}

/// Connected components of the blocking graph.
#[derive(Debug, Default, Clone, Copy)]
pub struct ComponentBlocks;

impl BlockAssigner for ComponentBlocks {
    fn assign(&self, nodes: &[NodeIx], edges: &BTreeMap<Pair, BlockEdge>) -> Vec<Vec<NodeIx>> {
        components(nodes, edges.keys())
    }
}

fn components<'a>(nodes: &[NodeIx], pairs: impl Iterator<Item = &'a Pair>) -> Vec<Vec<NodeIx>> {
    let pos: HashMap<NodeIx, usize> = nodes.iter().enumerate().map(|(i, &n)| (n, i)).collect();
    let mut dsu = DisjointSet::new(nodes.len());
    for p in pairs {
        dsu.union(pos[&p.0], pos[&p.1]);
    }
    dsu.groups()
        .into_iter()
        .map(|g| g.into_iter().map(|i| nodes[i]).collect())
        .collect()
}

/// `sum over common blocks b of rules / |b|`.
pub fn arcs_weight(rules: usize, common_block_sizes: impl IntoIterator<Item = usize>) -> f64 {
    common_block_sizes
        .into_iter()
        .filter(|&s| s > 0)
        .map(|s| rules as f64 / s as f64)
        .sum()
}

#[derive(Debug, Clone)]
pub struct BlockingGraph {
    pub weighting: Weighting,
    /// ascending
    pub nodes: Vec<NodeIx>,
    pub edges: BTreeMap<Pair, BlockEdge>,
    /// connected-component partition of `nodes`, ordered by smallest member
    pub blocks: Vec<Block>,
    block_of: HashMap<NodeIx, usize>,
    adjacency: HashMap<NodeIx, Vec<(NodeIx, f64)>>,
}

impl BlockingGraph {
    fn assemble(weighting: Weighting, edges: BTreeMap<Pair, BlockEdge>) -> Self {
        let mut nodes: Vec<NodeIx> = edges.keys().flat_map(|p| [p.0, p.1]).collect();
        nodes.sort_unstable();
        nodes.dedup();
        let blocks: Vec<Block> = components(&nodes, edges.keys())
            .into_iter()
            .enumerate()
            .map(|(id, members)| Block { id, members })
            .collect();
        let mut block_of = HashMap::with_capacity(nodes.len());
        for b in &blocks {
            for &m in &b.members {
                block_of.insert(m, b.id);
            }
        }
        let mut adjacency: HashMap<NodeIx, Vec<(NodeIx, f64)>> = HashMap::with_capacity(nodes.len());
        for (p, e) in &edges {
            adjacency.entry(p.0).or_default().push((p.1, e.weight));
            adjacency.entry(p.1).or_default().push((p.0, e.weight));
        }
        for list in adjacency.values_mut() {
            list.sort_unstable_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
        }
        BlockingGraph {
            weighting,
            nodes,
            edges,
            blocks,
            block_of,
            adjacency,
        }
    }

    /// Every pair gets weight 1 regardless of rules.
    pub fn uniform(pairs: &[Pair]) -> Self {
        let edges = pairs
            .iter()
            .filter(|p| p.0 != p.1)
            .map(|&p| {
                (
                    p,
                    BlockEdge {
                        weight: 1.0,
                        rules: BTreeSet::new(),
                    },
                )
            })
            .collect();
        Self::assemble(Weighting::Count, edges)
    }

    pub fn block_of(&self, v: NodeIx) -> Option<usize> {
        self.block_of.get(&v).copied()
    }

    pub fn weight(&self, p: Pair) -> Option<f64> {
        self.edges.get(&p).map(|e| e.weight)
    }

    pub fn contains(&self, v: NodeIx) -> bool {
        self.adjacency.contains_key(&v)
    }

    /// Neighbors of `v`, weight-descending, ties by id.
    pub fn candidates_of(&self, v: NodeIx) -> Option<&[(NodeIx, f64)]> {
        self.adjacency.get(&v).map(Vec::as_slice)
    }

    /// Writes `pid_a,pid_b,weight,rules` rows; rules are `;`-joined.
    pub fn write_csv<W: Write>(&self, g: &PropertyGraph, w: W) -> Result<(), csv::Error> {
        let mut wr = csv::WriterBuilder::new()
            .terminator(csv::Terminator::Any(b'\n'))
            .from_writer(w);
        wr.write_record(["pid_a", "pid_b", "weight", "rules"])?;
        for (p, e) in &self.edges {
            let (a, b) = p.ids(g);
            let rules: Vec<&str> = e.rules.iter().map(String::as_str).collect();
            wr.write_record([a, b, &e.weight.to_string(), &rules.join(";")])?;
        }
        wr.flush()?;
        Ok(())
    }
}

pub fn build_blocking_graph(filtered: &[FilteredPair], weighting: Weighting) -> BlockingGraph {
    build_blocking_graph_with(filtered, weighting, &ComponentBlocks)
}

/// Builds the blocking graph; zero-weight pairs never enter.
pub fn build_blocking_graph_with(
    filtered: &[FilteredPair],
    weighting: Weighting,
    assigner: &dyn BlockAssigner,
) -> BlockingGraph {
    let counted: BTreeMap<Pair, BlockEdge> = filtered
        .iter()
        .filter(|f| !f.rules.is_empty() && f.pair.0 != f.pair.1)
        .map(|f| {
            (
                f.pair,
                BlockEdge {
                    weight: f.rules.len() as f64,
                    rules: f.rules.clone(),
                },
            )
        })
        .collect();
    match weighting {
        Weighting::Count => BlockingGraph::assemble(Weighting::Count, counted),
        Weighting::Arcs => {
            let first = BlockingGraph::assemble(Weighting::Count, counted);
            let blocks = assigner.assign(&first.nodes, &first.edges);
            let mut membership: HashMap<NodeIx, Vec<usize>> = HashMap::new();
            for (bi, b) in blocks.iter().enumerate() {
                for &m in b {
                    membership.entry(m).or_default().push(bi);
                }
            }
            let reweighted: BTreeMap<Pair, BlockEdge> = first
                .edges
                .into_iter()
                .filter_map(|(p, e)| {
                    let (ba, bb) = (membership.get(&p.0)?, membership.get(&p.1)?);
                    let common = ba.iter().filter(|b| bb.contains(b)).map(|&b| blocks[b].len());
                    let w = arcs_weight(e.rules.len(), common);
                    (w > 0.0).then_some((
                        p,
                        BlockEdge {
                            weight: w,
                            rules: e.rules,
                        },
                    ))
                })
                .collect();
            BlockingGraph::assemble(Weighting::Arcs, reweighted)
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ProfileEntry {
    pub pid: NodeIx,
    pub block: usize,
    pub avg_weight: f64,
}

/// Profiles by mean incident edge weight, descending; ties by id.
#[derive(Debug, Clone, PartialEq)]
pub struct SortedProfileList {
    pub entries: Vec<ProfileEntry>,
}

pub fn sorted_profiles(bg: &BlockingGraph) -> SortedProfileList {
    let mut entries: Vec<ProfileEntry> = bg
        .nodes
        .iter()
        .map(|&v| {
            let adj = bg.candidates_of(v).unwrap_or(&[]);
            let total: f64 = adj.iter().map(|(_, w)| w).sum();
            ProfileEntry {
                pid: v,
                block: bg.block_of(v).expect("every node has a block"),
                avg_weight: if adj.is_empty() { 0.0 } else { total / adj.len() as f64 },
            }
        })
        .collect();
    entries.sort_by(|a, b| b.avg_weight.total_cmp(&a.avg_weight).then(a.pid.cmp(&b.pid)));
    SortedProfileList { entries }
}

/// Blocking-graph neighbors of `v` by node id, weight-descending, ties by id.
pub fn candidates_of(bg: &BlockingGraph, g: &PropertyGraph, v: &str) -> Result<Vec<(String, f64)>, BlockingError> {
    let ix = g
        .try_ix(v)
        .filter(|&ix| bg.contains(ix))
        .ok_or_else(|| BlockingError::UnknownProfile(v.to_string()))?;
    Ok(bg
        .candidates_of(ix)
        .unwrap_or(&[])
        .iter()
        .map(|&(n, w)| (g.id(n).to_string(), w))
        .collect())
}
