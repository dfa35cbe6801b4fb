//! Graph patterns and homomorphic match enumeration.
//!
//! A match binds every pattern variable to a graph node such that labels are
//! compatible (`*` matches anything) and every pattern edge maps onto a graph
//! edge. Distinct variables may share a node, except the designated duplicate
//! pair `(x, x')`, which must bind two different nodes. Matches differing only
//! by an `x`/`x'` swap are reported once, with the lower node bound to `x`.

use std::collections::{BTreeMap, HashSet};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::graph::{LabelIx, NodeIx, PropertyGraph};
use crate::rules::DemandPredicate;

/// A node or edge label in a pattern; `*` is the wildcard.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum LabelSpec {
    Any,
    Exact(String),
}

impl LabelSpec {
    pub fn parse(s: &str) -> LabelSpec {
        if s == "*" {
            LabelSpec::Any
        } else {
            LabelSpec::Exact(s.to_string())
        }
    }

    pub fn accepts(&self, label: &str) -> bool {
        match self {
            LabelSpec::Any => true,
            LabelSpec::Exact(l) => l == label,
        }
    }
}

impl fmt::Display for LabelSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            LabelSpec::Any => f.write_str("*"),
            LabelSpec::Exact(l) => f.write_str(l),
        }
    }
}

impl Serialize for LabelSpec {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for LabelSpec {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        if s.is_empty() {
            return Err(serde::de::Error::custom("label must be non-empty (use \"*\" for any)"));
        }
        Ok(LabelSpec::parse(&s))
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PatternNode {
    pub var: String,
    pub label: LabelSpec,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PatternEdge {
    pub src: String,
    pub label: LabelSpec,
    pub dst: String,
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum PatternError {
    #[error("pattern has no nodes")]
    Empty,
    #[error("variable {0:?} declared twice")]
    DuplicateVariable(String),
    #[error("undeclared variable {0:?}")]
    UndeclaredVariable(String),
    #[error("pattern is not weakly connected")]
    Disconnected,
    #[error("duplicate variables must be two distinct declared variables, got {0:?} and {1:?}")]
    BadDuplicates(String, String),
    #[error("demand references unbound variable {0:?}")]
    UnboundVariableInDemand(String),
}

/// `Q[z] = (V_Q, E_Q, L_Q)`, optionally with a designated duplicate pair.
///
/// Queries always carry the duplicate pair; bare patterns without one are
/// only useful for enumeration.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GraphPattern {
    pub nodes: Vec<PatternNode>,
    pub edges: Vec<PatternEdge>,
    pub duplicates: Option<(String, String)>,
}

impl GraphPattern {
    /// Builds and validates a pattern from `(var, label)` and `(src, label, dst)` lists.
    pub fn new(
        nodes: &[(&str, &str)],
        edges: &[(&str, &str, &str)],
        duplicates: Option<(&str, &str)>,
    ) -> Result<Self, PatternError> {
        let p = GraphPattern {
            nodes: nodes
                .iter()
                .map(|(v, l)| PatternNode {
                    var: v.to_string(),
                    label: LabelSpec::parse(l),
                })
                .collect(),
            edges: edges
                .iter()
                .map(|(s, l, d)| PatternEdge {
                    src: s.to_string(),
                    label: LabelSpec::parse(l),
                    dst: d.to_string(),
                })
                .collect(),
            duplicates: duplicates.map(|(a, b)| (a.to_string(), b.to_string())),
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<(), PatternError> {
        if self.nodes.is_empty() {
            return Err(PatternError::Empty);
        }
        let mut seen = HashSet::new();
        for n in &self.nodes {
            if !seen.insert(n.var.as_str()) {
                return Err(PatternError::DuplicateVariable(n.var.clone()));
            }
        }
        for e in &self.edges {
            for v in [&e.src, &e.dst] {
                if !seen.contains(v.as_str()) {
                    return Err(PatternError::UndeclaredVariable(v.clone()));
                }
            }
        }
        if let Some((x, xp)) = &self.duplicates {
            if x == xp || !seen.contains(x.as_str()) || !seen.contains(xp.as_str()) {
                return Err(PatternError::BadDuplicates(x.clone(), xp.clone()));
            }
        }
        // weak connectivity via flood fill over the undirected pattern
        let n = self.nodes.len();
        let mut reached = vec![false; n];
        let mut stack = vec![0usize];
        reached[0] = true;
        while let Some(i) = stack.pop() {
            for e in &self.edges {
                let (s, d) = (self.slot(&e.src).unwrap(), self.slot(&e.dst).unwrap());
                for (a, b) in [(s, d), (d, s)] {
                    if a == i && !reached[b] {
                        reached[b] = true;
                        stack.push(b);
                    }
                }
            }
        }
        if reached.iter().any(|r| !r) {
            return Err(PatternError::Disconnected);
        }
        Ok(())
    }

    /// Position of `var` in [`GraphPattern::nodes`].
    pub fn slot(&self, var: &str) -> Option<usize> {
        self.nodes.iter().position(|n| n.var == var)
    }

    pub fn duplicate_slots(&self) -> Option<(usize, usize)> {
        let (x, xp) = self.duplicates.as_ref()?;
        Some((self.slot(x)?, self.slot(xp)?))
    }
}

/// One homomorphism, stored as node handles in pattern-variable order.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Match {
    pub binding: Vec<NodeIx>,
}

impl Match {
    pub fn get(&self, slot: usize) -> NodeIx {
        self.binding[slot]
    }

    /// The `var -> node id` map view.
    pub fn binding_map<'g>(&self, q: &GraphPattern, g: &'g PropertyGraph) -> BTreeMap<String, &'g str> {
        q.nodes
            .iter()
            .zip(&self.binding)
            .map(|(n, &ix)| (n.var.clone(), g.id(ix)))
            .collect()
    }

    pub fn ids<'g>(&self, g: &'g PropertyGraph) -> Vec<&'g str> {
        self.binding.iter().map(|&ix| g.id(ix)).collect()
    }

    /// Canonical duplicate pair bound by this match; `None` if `q` has no duplicate pair.
    pub fn pair(&self, q: &GraphPattern) -> Option<Pair> {
        let (x, xp) = q.duplicate_slots()?;
        Some(Pair::new(self.binding[x], self.binding[xp]))
    }
}

/// Unordered node pair, stored with the smaller handle first.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Pair(pub NodeIx, pub NodeIx);

impl Pair {
    pub fn new(a: NodeIx, b: NodeIx) -> Pair {
        if a <= b {
            Pair(a, b)
        } else {
            Pair(b, a)
        }
    }

    pub fn ids<'g>(&self, g: &'g PropertyGraph) -> (&'g str, &'g str) {
        (g.id(self.0), g.id(self.1))
    }

    /// Looks a pair up by node ids.
    pub fn from_ids(g: &PropertyGraph, a: &str, b: &str) -> Option<Pair> {
        Some(Pair::new(g.try_ix(a)?, g.try_ix(b)?))
    }
}

struct Step {
    slot: usize,
    /// (earlier slot, edge label, bound node is the edge source)
    anchor: Option<(usize, Option<LabelIx>, bool)>,
    /// edges to verify once this slot is bound: (src slot, label, dst slot)
    checks: Vec<(usize, Option<LabelIx>, usize)>,
    demand: Vec<usize>,
    /// slot that must bind a different node (the other duplicate var), if earlier
    distinct_from: Option<usize>,
}

/// Enumerates matches of `q` in `g` whose bindings satisfy every demand predicate.
///
/// Output is sorted lexicographically on bound node ids, and canonical with
/// respect to the duplicate pair.
pub fn enumerate_matches(
    g: &PropertyGraph,
    q: &GraphPattern,
    demand: &[DemandPredicate],
) -> Result<Vec<Match>, PatternError> {
    q.validate()?;
    let k = q.nodes.len();
    let mut demand_by_slot: Vec<Vec<usize>> = vec![Vec::new(); k];
    for (i, d) in demand.iter().enumerate() {
        let slot = q
            .slot(&d.var)
            .ok_or_else(|| PatternError::UnboundVariableInDemand(d.var.clone()))?;
        demand_by_slot[slot].push(i);
    }

    // resolve edge labels; an exact label the graph never uses cannot match
    let mut edges = Vec::with_capacity(q.edges.len());
    for e in &q.edges {
        let label = match &e.label {
            LabelSpec::Any => None,
            LabelSpec::Exact(l) => match g.edge_label_ix(l) {
                Some(li) => Some(li),
                None => return Ok(Vec::new()),
            },
        };
        edges.push((q.slot(&e.src).unwrap(), label, q.slot(&e.dst).unwrap()));
    }

    let all: Vec<NodeIx> = g.node_indices().collect();
    let candidates: Vec<&[NodeIx]> = q
        .nodes
        .iter()
        .map(|n| match &n.label {
            LabelSpec::Any => all.as_slice(),
            LabelSpec::Exact(l) => g.nodes_with_label(l),
        })
        .collect();

    // search order: smallest candidate set first, then grow along pattern edges
    let mut order: Vec<usize> = Vec::with_capacity(k);
    let mut placed = vec![false; k];
    let first = (0..k).min_by_key(|&s| (candidates[s].len(), s)).unwrap();
    order.push(first);
    placed[first] = true;
    while order.len() < k {
        let next = (0..k)
            .filter(|&s| !placed[s])
            .filter(|&s| {
                edges
                    .iter()
                    .any(|&(a, _, b)| (a == s && placed[b]) || (b == s && placed[a]))
            })
            .min_by_key(|&s| (candidates[s].len(), s))
            .expect("pattern is connected");
        order.push(next);
        placed[next] = true;
    }

    let dup = q.duplicate_slots();
    let mut position = vec![0usize; k];
    for (p, &s) in order.iter().enumerate() {
        position[s] = p;
    }
    let steps: Vec<Step> = order
        .iter()
        .enumerate()
        .map(|(p, &slot)| {
            let earlier = |s: usize| position[s] < p;
            let anchor = edges.iter().find_map(|&(a, l, b)| {
                if a == slot && b != slot && earlier(b) {
                    Some((b, l, false))
                } else if b == slot && a != slot && earlier(a) {
                    Some((a, l, true))
                } else {
                    None
                }
            });
            let checks = edges
                .iter()
                .copied()
                .filter(|&(a, _, b)| (a == slot || b == slot) && position[a] <= p && position[b] <= p)
                .collect();
            let distinct_from = dup.and_then(|(dx, dxp)| {
                if slot == dx && earlier(dxp) {
                    Some(dxp)
                } else if slot == dxp && earlier(dx) {
                    Some(dx)
                } else {
                    None
                }
            });
            Step {
                slot,
                anchor,
                checks,
                demand: demand_by_slot[slot].clone(),
                distinct_from,
            }
        })
        .collect();

    let mut found = Vec::new();
    let mut binding = vec![NodeIx(u32::MAX); k];
    extend(g, q, demand, &candidates, &steps, 0, &mut binding, &mut found);

    if let Some((dx, dxp)) = dup {
        for m in &mut found {
            if m.binding[dx] > m.binding[dxp] {
                m.binding.swap(dx, dxp);
            }
        }
    }
    found.sort_unstable();
    found.dedup();
    Ok(found)
}

#[allow(clippy::too_many_arguments)]
fn extend(
    g: &PropertyGraph,
    q: &GraphPattern,
    demand: &[DemandPredicate],
    candidates: &[&[NodeIx]],
    steps: &[Step],
    depth: usize,
    binding: &mut Vec<NodeIx>,
    out: &mut Vec<Match>,
) {
    if depth == steps.len() {
        out.push(Match {
            binding: binding.clone(),
        });
        return;
    }
    let step = &steps[depth];
    let label = &q.nodes[step.slot].label;
    let accept = |v: NodeIx, binding: &[NodeIx]| -> bool {
        if !label.accepts(g.label(v)) {
            return false;
        }
        if let Some(other) = step.distinct_from {
            if binding[other] == v {
                return false;
            }
        }
        if !step.demand.iter().all(|&d| demand[d].test(g.attr(v, &demand[d].attr))) {
            return false;
        }
        step.checks.iter().all(|&(a, l, b)| {
            let s = if a == step.slot { v } else { binding[a] };
            let d = if b == step.slot { v } else { binding[b] };
            g.has_edge(s, l, d)
        })
    };

    match step.anchor {
        Some((other, l, bound_is_src)) => {
            let bound = binding[other];
            let adj = if bound_is_src {
                g.out_edges(bound)
            } else {
                g.in_edges(bound)
            };
            // adjacency is sorted by (label, node), so a fixed label yields sorted nodes
            let mut pool: Vec<NodeIx> = match l {
                Some(li) => {
                    let start = adj.partition_point(|&(al, _)| al < li);
                    adj[start..]
                        .iter()
                        .take_while(|&&(al, _)| al == li)
                        .map(|&(_, n)| n)
                        .collect()
                }
                None => {
                    let mut v: Vec<NodeIx> = adj.iter().map(|&(_, n)| n).collect();
                    v.sort_unstable();
                    v
                }
            };
            pool.dedup();
            for v in pool {
                if accept(v, binding) {
                    binding[step.slot] = v;
                    extend(g, q, demand, candidates, steps, depth + 1, binding, out);
                }
            }
        }
        None => {
            for &v in candidates[step.slot] {
                if accept(v, binding) {
                    binding[step.slot] = v;
                    extend(g, q, demand, candidates, steps, depth + 1, binding, out);
                }
            }
        }
    }
}

/// Distinct duplicate-variable pairs across `matches`, sorted.
pub fn candidate_pairs(matches: &[Match], q: &GraphPattern) -> Vec<Pair> {
    let mut pairs: Vec<Pair> = matches.iter().filter_map(|m| m.pair(q)).collect();
    pairs.sort_unstable();
    pairs.dedup();
    pairs
}
