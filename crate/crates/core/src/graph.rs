//! In-memory property graph.
//!
//! Node identifiers are opaque strings in files and outputs. Internally every
//! node gets a dense [`NodeIx`] handle; handles are assigned in natural id
//! order (see [`crate::ids`]) so comparing handles is the same as comparing
//! ids. The graph is immutable once built and safe to share across threads.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;
use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ids::natural_cmp;

/// Dense node handle. Ordering agrees with natural id order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct NodeIx(pub u32);

impl NodeIx {
    #[inline]
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

/// Interned edge label.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct LabelIx(pub u32);

/// A single attribute value.
#[derive(Debug, Clone, PartialEq)]
pub enum AttrValue {
    Text(String),
    Number(f64),
    Absent,
}

impl AttrValue {
    /// Types a raw string: numeric if it is a finite plain decimal, text otherwise.
    pub fn parse(raw: &str) -> AttrValue {
        if is_plain_decimal(raw) {
            if let Ok(v) = raw.parse::<f64>() {
                if v.is_finite() {
                    return AttrValue::Number(v);
                }
            }
        }
        AttrValue::Text(raw.to_string())
    }

    pub fn as_text(&self) -> Option<&str> {
        match self {
            AttrValue::Text(s) => Some(s),
            _ => None,
        }
    }

    pub fn as_number(&self) -> Option<f64> {
        match self {
            AttrValue::Number(v) => Some(*v),
            _ => None,
        }
    }

    pub fn is_absent(&self) -> bool {
        matches!(self, AttrValue::Absent)
    }

    /// Converts a JSON scalar. Arrays and objects are rejected.
    pub fn from_json(v: &serde_json::Value) -> Result<AttrValue, String> {
        match v {
            serde_json::Value::Null => Ok(AttrValue::Absent),
            serde_json::Value::Bool(b) => Ok(AttrValue::Text(b.to_string())),
            serde_json::Value::Number(n) => match n.as_f64() {
                Some(f) if f.is_finite() => Ok(AttrValue::Number(f)),
                _ => Err(format!("non-finite number {n}")),
            },
            serde_json::Value::String(s) => Ok(AttrValue::parse(s)),
            other => Err(format!("attribute values must be scalars, got {other}")),
        }
    }

    pub fn to_json(&self) -> serde_json::Value {
        match self {
            AttrValue::Text(s) => serde_json::Value::String(s.clone()),
            AttrValue::Number(v) => serde_json::Number::from_f64(*v)
                .map(serde_json::Value::Number)
                .unwrap_or(serde_json::Value::Null),
            AttrValue::Absent => serde_json::Value::Null,
        }
    }
}

impl fmt::Display for AttrValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            AttrValue::Text(s) => f.write_str(s),
            AttrValue::Number(v) => write!(f, "{v}"),
            AttrValue::Absent => f.write_str("<absent>"),
        }
    }
}

impl From<&str> for AttrValue {
    fn from(s: &str) -> Self {
        AttrValue::Text(s.to_string())
    }
}

impl From<f64> for AttrValue {
    fn from(v: f64) -> Self {
        AttrValue::Number(v)
    }
}

fn is_plain_decimal(s: &str) -> bool {
    let body = s.strip_prefix(['-', '+']).unwrap_or(s);
    let mut parts = body.splitn(2, '.');
    let int = parts.next().unwrap_or("");
    let frac = parts.next();
    let digits = |p: &str| p.bytes().all(|b| b.is_ascii_digit());
    match frac {
        None => !int.is_empty() && digits(int),
        Some(f) => (!int.is_empty() || !f.is_empty()) && digits(int) && digits(f),
    }
}

pub type Attrs = BTreeMap<String, AttrValue>;

#[derive(Debug, Clone, PartialEq)]
pub struct Node {
    pub id: String,
    pub label: String,
    pub attrs: Attrs,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Edge {
    pub src: String,
    pub label: String,
    pub dst: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    Out,
    In,
    Both,
}

#[derive(Debug, Error)]
pub enum GraphError {
    #[error("duplicate node id {id:?} (line {line})")]
    DuplicateNodeId { id: String, line: u64 },
    #[error("edge references missing node {id:?} (line {line})")]
    DanglingEdge { id: String, line: u64 },
    #[error("duplicate edge {src:?} -[{label}]-> {dst:?} (line {line})")]
    DuplicateEdge {
        src: String,
        label: String,
        dst: String,
        line: u64,
    },
    #[error("malformed row at {file}:{line}: {message}")]
    MalformedRow { file: String, line: u64, message: String },
    #[error("unknown node {0:?}")]
    UnknownNode(String),
    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

/// Resolved edge in handle space.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct EdgeIx {
    pub src: NodeIx,
    pub label: LabelIx,
    pub dst: NodeIx,
}

/// Directed labeled multigraph with per-node attributes and lookup indices.
#[derive(Debug, Clone)]
pub struct PropertyGraph {
    ids: Vec<String>,
    labels: Vec<String>,
    attrs: Vec<Attrs>,
    id_index: HashMap<String, NodeIx>,
    edge_labels: Vec<String>,
    edge_label_index: HashMap<String, LabelIx>,
    edges: Vec<EdgeIx>,
    /// (label, dst) sorted per source.
    out_adj: Vec<Vec<(LabelIx, NodeIx)>>,
    /// (label, src) sorted per destination.
    in_adj: Vec<Vec<(LabelIx, NodeIx)>>,
    label_index: BTreeMap<String, Vec<NodeIx>>,
    entity_ids: Vec<Option<String>>,
}

impl PartialEq for PropertyGraph {
    fn eq(&self, other: &Self) -> bool {
        // indices are derived; comparing the canonical content is enough
        self.nodes() == other.nodes() && self.edges() == other.edges()
    }
}

impl PropertyGraph {
    /// Builds a graph from nodes and edges, validating ids and endpoints.
    /// Line numbers in errors are 1-based row positions (header excluded).
    pub fn from_parts(nodes: Vec<Node>, edges: Vec<Edge>) -> Result<Self, GraphError> {
        let numbered_nodes = nodes.into_iter().enumerate().map(|(i, n)| (i as u64 + 2, n));
        let numbered_edges = edges.into_iter().enumerate().map(|(i, e)| (i as u64 + 2, e));
        Self::build(numbered_nodes.collect(), numbered_edges.collect())
    }

    fn build(mut nodes: Vec<(u64, Node)>, edges: Vec<(u64, Edge)>) -> Result<Self, GraphError> {
        // duplicate check in file order so the reported line is the second occurrence
        let mut seen: HashMap<&str, ()> = HashMap::with_capacity(nodes.len());
        for (line, n) in &nodes {
            if n.label.is_empty() {
                return Err(GraphError::MalformedRow {
                    file: "nodes".into(),
                    line: *line,
                    message: format!("node {:?} has an empty label", n.id),
                });
            }
            if seen.insert(n.id.as_str(), ()).is_some() {
                return Err(GraphError::DuplicateNodeId {
                    id: n.id.clone(),
                    line: *line,
                });
            }
        }
        drop(seen);
        nodes.sort_by(|a, b| natural_cmp(&a.1.id, &b.1.id));

        let n = nodes.len();
        let mut ids = Vec::with_capacity(n);
        let mut labels = Vec::with_capacity(n);
        let mut attrs = Vec::with_capacity(n);
        let mut id_index = HashMap::with_capacity(n);
        let mut label_index: BTreeMap<String, Vec<NodeIx>> = BTreeMap::new();
        for (i, (_, node)) in nodes.into_iter().enumerate() {
            let ix = NodeIx(i as u32);
            id_index.insert(node.id.clone(), ix);
            label_index.entry(node.label.clone()).or_default().push(ix);
            ids.push(node.id);
            labels.push(node.label);
            attrs.push(node.attrs);
        }

        // labels interned in sorted order, so handles do not depend on row order
        let edge_labels: Vec<String> = edges
            .iter()
            .map(|(_, e)| e.label.clone())
            .filter(|l| !l.is_empty())
            .collect::<BTreeSet<_>>()
            .into_iter()
            .collect();
        let edge_label_index: HashMap<String, LabelIx> = edge_labels
            .iter()
            .enumerate()
            .map(|(i, l)| (l.clone(), LabelIx(i as u32)))
            .collect();
        let mut resolved = Vec::with_capacity(edges.len());
        let mut edge_lines = HashMap::with_capacity(edges.len());
        for (line, e) in edges {
            let src = *id_index.get(&e.src).ok_or_else(|| GraphError::DanglingEdge {
                id: e.src.clone(),
                line,
            })?;
            let dst = *id_index.get(&e.dst).ok_or_else(|| GraphError::DanglingEdge {
                id: e.dst.clone(),
                line,
            })?;
            if e.label.is_empty() {
                return Err(GraphError::MalformedRow {
                    file: "edges".into(),
                    line,
                    message: "empty edge label".into(),
                });
            }
            let label = edge_label_index[&e.label];
            let ex = EdgeIx { src, label, dst };
            if edge_lines.insert(ex, line).is_some() {
                return Err(GraphError::DuplicateEdge {
                    src: e.src,
                    label: e.label,
                    dst: e.dst,
                    line,
                });
            }
            resolved.push(ex);
        }

        let mut g = PropertyGraph {
            ids,
            labels,
            attrs,
            id_index,
            edge_labels,
            edge_label_index,
            edges: resolved,
            out_adj: Vec::new(),
            in_adj: Vec::new(),
            label_index,
            entity_ids: vec![None; n],
        };
        g.rebuild_adjacency();
        Ok(g)
    }

    fn rebuild_adjacency(&mut self) {
        let n = self.ids.len();
        let mut out_adj = vec![Vec::new(); n];
        let mut in_adj = vec![Vec::new(); n];
        for e in &self.edges {
            out_adj[e.src.index()].push((e.label, e.dst));
            in_adj[e.dst.index()].push((e.label, e.src));
        }
        for list in out_adj.iter_mut().chain(in_adj.iter_mut()) {
            list.sort_unstable();
        }
        self.out_adj = out_adj;
        self.in_adj = in_adj;
        self.edges.sort_unstable_by_key(|e| (e.src, e.dst, e.label));
    }

    /// Attaches known entity ids (typically from a ground-truth file).
    /// Unknown pids are reported as [`GraphError::UnknownNode`].
    pub fn with_entity_ids<I, P, E>(mut self, eids: I) -> Result<Self, GraphError>
    where
        I: IntoIterator<Item = (P, E)>,
        P: AsRef<str>,
        E: Into<String>,
    {
        for (pid, eid) in eids {
            let ix = self.ix(pid.as_ref())?;
            self.entity_ids[ix.index()] = Some(eid.into());
        }
        Ok(self)
    }

    pub fn node_count(&self) -> usize {
        self.ids.len()
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn ix(&self, id: &str) -> Result<NodeIx, GraphError> {
        self.id_index
            .get(id)
            .copied()
            .ok_or_else(|| GraphError::UnknownNode(id.to_string()))
    }

    pub fn try_ix(&self, id: &str) -> Option<NodeIx> {
        self.id_index.get(id).copied()
    }

    pub fn id(&self, ix: NodeIx) -> &str {
        &self.ids[ix.index()]
    }

    pub fn label(&self, ix: NodeIx) -> &str {
        &self.labels[ix.index()]
    }

    pub fn attrs(&self, ix: NodeIx) -> &Attrs {
        &self.attrs[ix.index()]
    }

    pub fn attr(&self, ix: NodeIx, name: &str) -> &AttrValue {
        self.attrs[ix.index()].get(name).unwrap_or(&AttrValue::Absent)
    }

    pub fn entity_id(&self, ix: NodeIx) -> Option<&str> {
        self.entity_ids[ix.index()].as_deref()
    }

    pub fn edge_label(&self, l: LabelIx) -> &str {
        &self.edge_labels[l.0 as usize]
    }

    pub fn edge_label_ix(&self, label: &str) -> Option<LabelIx> {
        self.edge_label_index.get(label).copied()
    }

    pub fn node_indices(&self) -> impl ExactSizeIterator<Item = NodeIx> + '_ {
        (0..self.ids.len() as u32).map(NodeIx)
    }

    /// Nodes carrying `label`, ascending.
    pub fn nodes_with_label(&self, label: &str) -> &[NodeIx] {
        self.label_index.get(label).map(Vec::as_slice).unwrap_or(&[])
    }

    pub fn out_edges(&self, ix: NodeIx) -> &[(LabelIx, NodeIx)] {
        &self.out_adj[ix.index()]
    }

    pub fn in_edges(&self, ix: NodeIx) -> &[(LabelIx, NodeIx)] {
        &self.in_adj[ix.index()]
    }

    pub fn edge_indices(&self) -> &[EdgeIx] {
        &self.edges
    }

    /// `label: None` accepts any edge label.
    pub fn has_edge(&self, src: NodeIx, label: Option<LabelIx>, dst: NodeIx) -> bool {
        let adj = &self.out_adj[src.index()];
        match label {
            Some(l) => adj.binary_search(&(l, dst)).is_ok(),
            None => adj.iter().any(|&(_, d)| d == dst),
        }
    }

    /// Owned node records, in id order.
    pub fn nodes(&self) -> Vec<Node> {
        self.node_indices()
            .map(|ix| Node {
                id: self.id(ix).to_string(),
                label: self.label(ix).to_string(),
                attrs: self.attrs(ix).clone(),
            })
            .collect()
    }

    /// Owned edge records, sorted by (src, dst, label).
    pub fn edges(&self) -> Vec<Edge> {
        self.edges
            .iter()
            .map(|e| Edge {
                src: self.id(e.src).to_string(),
                label: self.edge_label(e.label).to_string(),
                dst: self.id(e.dst).to_string(),
            })
            .collect()
    }

    /// Handle-level neighbor query: deduplicated, ascending.
    pub fn neighbor_ixs(&self, ix: NodeIx, label: Option<&str>, dir: Direction) -> Vec<NodeIx> {
        let label_ix = match label {
            Some(l) => match self.edge_label_ix(l) {
                Some(li) => Some(li),
                None => return Vec::new(),
            },
            None => None,
        };
        let pick = |adj: &[(LabelIx, NodeIx)], out: &mut Vec<NodeIx>| {
            out.extend(
                adj.iter()
                    .filter(|(l, _)| label_ix.is_none_or(|li| *l == li))
                    .map(|&(_, n)| n),
            );
        };
        let mut out = Vec::new();
        if matches!(dir, Direction::Out | Direction::Both) {
            pick(&self.out_adj[ix.index()], &mut out);
        }
        if matches!(dir, Direction::In | Direction::Both) {
            pick(&self.in_adj[ix.index()], &mut out);
        }
        out.sort_unstable();
        out.dedup();
        out
    }

    /// Neighbor ids of `id`, ascending, optionally filtered by edge label.
    pub fn neighbors(&self, id: &str, edge_label: Option<&str>, dir: Direction) -> Result<Vec<&str>, GraphError> {
        let ix = self.ix(id)?;
        Ok(self
            .neighbor_ixs(ix, edge_label, dir)
            .into_iter()
            .map(|n| self.id(n))
            .collect())
    }

    pub fn profile_of(&self, id: &str) -> Result<EntityProfile, GraphError> {
        Ok(self.profile_of_ix(self.ix(id)?))
    }

    /// Entity profile view of a node. Relations list every incident edge once
    /// per endpoint role, sorted by (relation label, neighbor id).
    pub fn profile_of_ix(&self, ix: NodeIx) -> EntityProfile {
        let mut rels: Vec<(LabelIx, NodeIx)> = self.out_adj[ix.index()]
            .iter()
            .chain(self.in_adj[ix.index()].iter())
            .copied()
            .collect();
        rels.sort_unstable_by(|a, b| self.edge_label(a.0).cmp(self.edge_label(b.0)).then(a.1.cmp(&b.1)));
        EntityProfile {
            pid: self.id(ix).to_string(),
            eid: self.entity_id(ix).map(str::to_string),
            kind: self.label(ix).to_string(),
            attrs: self.attrs(ix).clone(),
            relations: rels
                .into_iter()
                .map(|(l, n)| (self.edge_label(l).to_string(), self.id(n).to_string()))
                .collect(),
        }
    }

    /// Reads the nodes and edges CSV files.
    pub fn load(nodes_file: impl AsRef<Path>, edges_file: impl AsRef<Path>) -> Result<Self, GraphError> {
        let nodes = read_nodes(open(nodes_file.as_ref())?, &nodes_file.as_ref().display().to_string())?;
        let edges = read_edges(open(edges_file.as_ref())?, &edges_file.as_ref().display().to_string())?;
        Self::build(nodes, edges)
    }

    /// Loads from in-memory CSV text; handy for fixtures embedded in tests.
    pub fn from_csv_str(nodes_csv: &str, edges_csv: &str) -> Result<Self, GraphError> {
        let nodes = read_nodes(nodes_csv.as_bytes(), "nodes")?;
        let edges = read_edges(edges_csv.as_bytes(), "edges")?;
        Self::build(nodes, edges)
    }

    pub fn write_nodes<W: Write>(&self, w: W) -> Result<(), csv::Error> {
        let mut wr = csv::WriterBuilder::new()
            .terminator(csv::Terminator::Any(b'\n'))
            .from_writer(w);
        wr.write_record(["id", "label", "attrs"])?;
        for ix in self.node_indices() {
            let obj: serde_json::Map<String, serde_json::Value> =
                self.attrs(ix).iter().map(|(k, v)| (k.clone(), v.to_json())).collect();
            let json = serde_json::Value::Object(obj).to_string();
            wr.write_record([self.id(ix), self.label(ix), json.as_str()])?;
        }
        wr.flush()?;
        Ok(())
    }

    pub fn write_edges<W: Write>(&self, w: W) -> Result<(), csv::Error> {
        let mut wr = csv::WriterBuilder::new()
            .terminator(csv::Terminator::Any(b'\n'))
            .from_writer(w);
        wr.write_record(["src", "label", "dst"])?;
        for e in &self.edges {
            wr.write_record([self.id(e.src), self.edge_label(e.label), self.id(e.dst)])?;
        }
        wr.flush()?;
        Ok(())
    }

    pub fn save(&self, nodes_file: impl AsRef<Path>, edges_file: impl AsRef<Path>) -> Result<(), GraphError> {
        let wrap = |p: &Path, e: csv::Error| GraphError::Io {
            path: p.display().to_string(),
            source: std::io::Error::other(e),
        };
        let np = nodes_file.as_ref();
        let ep = edges_file.as_ref();
        self.write_nodes(create(np)?).map_err(|e| wrap(np, e))?;
        self.write_edges(create(ep)?).map_err(|e| wrap(ep, e))?;
        Ok(())
    }
}

fn open(p: &Path) -> Result<File, GraphError> {
    File::open(p).map_err(|source| GraphError::Io {
        path: p.display().to_string(),
        source,
    })
}

fn create(p: &Path) -> Result<File, GraphError> {
    File::create(p).map_err(|source| GraphError::Io {
        path: p.display().to_string(),
        source,
    })
}

fn reader<R: Read>(r: R) -> csv::Reader<R> {
    csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(false)
        .from_reader(r)
}

fn malformed(file: &str, line: u64, message: impl Into<String>) -> GraphError {
    GraphError::MalformedRow {
        file: file.to_string(),
        line,
        message: message.into(),
    }
}

fn check_header<R: Read>(rd: &mut csv::Reader<R>, file: &str, expected: &[&str]) -> Result<(), GraphError> {
    let header = rd.headers().map_err(|e| malformed(file, 1, e.to_string()))?;
    if header.iter().ne(expected.iter().copied()) {
        return Err(malformed(
            file,
            1,
            format!(
                "expected header {:?}, found {:?}",
                expected.join(","),
                header.iter().collect::<Vec<_>>().join(",")
            ),
        ));
    }
    Ok(())
}

fn csv_line(e: &csv::Error) -> u64 {
    e.position().map(|p| p.line()).unwrap_or(0)
}

fn read_nodes<R: Read>(r: R, file: &str) -> Result<Vec<(u64, Node)>, GraphError> {
    let mut rd = reader(r);
    check_header(&mut rd, file, &["id", "label", "attrs"])?;
    let mut out = Vec::new();
    for rec in rd.records() {
        let rec = rec.map_err(|e| malformed(file, csv_line(&e), e.to_string()))?;
        let line = rec.position().map(|p| p.line()).unwrap_or(0);
        let id = rec[0].to_string();
        if id.is_empty() {
            return Err(malformed(file, line, "empty node id"));
        }
        let attrs = parse_attrs(&rec[2]).map_err(|m| malformed(file, line, m))?;
        out.push((
            line,
            Node {
                id,
                label: rec[1].to_string(),
                attrs,
            },
        ));
    }
    Ok(out)
}

fn parse_attrs(raw: &str) -> Result<Attrs, String> {
    if raw.trim().is_empty() {
        return Ok(Attrs::new());
    }
    // serde_json keeps the last value for repeated keys; reject them explicitly
    let map: serde_json::Map<String, serde_json::Value> = {
        let mut de = serde_json::Deserializer::from_str(raw);
        let checked: UniqueKeyMap = Deserialize::deserialize(&mut de).map_err(|e| format!("attrs: {e}"))?;
        de.end().map_err(|e| format!("attrs: {e}"))?;
        checked.0
    };
    map.iter()
        .map(|(k, v)| {
            AttrValue::from_json(v)
                .map(|av| (k.clone(), av))
                .map_err(|m| format!("attribute {k:?}: {m}"))
        })
        .collect()
}

struct UniqueKeyMap(serde_json::Map<String, serde_json::Value>);

impl<'de> Deserialize<'de> for UniqueKeyMap {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        struct V;
        impl<'de> serde::de::Visitor<'de> for V {
            type Value = UniqueKeyMap;
            fn expecting(&self, f: &mut fmt::Formatter) -> fmt::Result {
                f.write_str("a JSON object of attributes")
            }
            fn visit_map<A: serde::de::MapAccess<'de>>(self, mut a: A) -> Result<UniqueKeyMap, A::Error> {
                let mut m = serde_json::Map::new();
                while let Some((k, v)) = a.next_entry::<String, serde_json::Value>()? {
                    if m.contains_key(&k) {
                        return Err(serde::de::Error::custom(format!("duplicate attribute key {k:?}")));
                    }
                    m.insert(k, v);
                }
                Ok(UniqueKeyMap(m))
            }
        }
        d.deserialize_map(V)
    }
}

fn read_edges<R: Read>(r: R, file: &str) -> Result<Vec<(u64, Edge)>, GraphError> {
    let mut rd = reader(r);
    check_header(&mut rd, file, &["src", "label", "dst"])?;
    let mut out = Vec::new();
    for rec in rd.records() {
        let rec = rec.map_err(|e| malformed(file, csv_line(&e), e.to_string()))?;
        let line = rec.position().map(|p| p.line()).unwrap_or(0);
        out.push((
            line,
            Edge {
                src: rec[0].to_string(),
                label: rec[1].to_string(),
                dst: rec[2].to_string(),
            },
        ));
    }
    Ok(out)
}

/// `p = <pid, eid, type, P, R>` view over a node.
#[derive(Debug, Clone, PartialEq)]
pub struct EntityProfile {
    pub pid: String,
    pub eid: Option<String>,
    pub kind: String,
    pub attrs: Attrs,
    pub relations: Vec<(String, String)>,
}

impl EntityProfile {
    pub fn attr(&self, name: &str) -> &AttrValue {
        self.attrs.get(name).unwrap_or(&AttrValue::Absent)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const NODES: &str = "id,label,attrs\n\
        a,user,\"{\"\"Age\"\": 19}\"\n\
        b,user,\"{\"\"Name\"\": \"\"Bo\"\"}\"\n\
        c,platform,{}\n";

    #[test]
    fn three_nodes_no_edges() {
        let g = PropertyGraph::from_csv_str(NODES, "src,label,dst\n").unwrap();
        assert_eq!(g.node_count(), 3);
        assert_eq!(g.edge_count(), 0);
        let p = g.profile_of("a").unwrap();
        assert!(p.relations.is_empty());
        assert_eq!(p.attr("Age"), &AttrValue::Number(19.0));
        assert!(g.neighbors("a", None, Direction::Both).unwrap().is_empty());
    }

    #[test]
    fn dangling_edge_names_missing_node() {
        let err = PropertyGraph::from_csv_str(NODES, "src,label,dst\na,watched,v99\n").unwrap_err();
        match err {
            GraphError::DanglingEdge { id, line } => {
                assert_eq!(id, "v99");
                assert_eq!(line, 2);
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn duplicate_node_id_is_rejected() {
        let nodes = format!("{NODES}a,user,{{}}\n");
        let err = PropertyGraph::from_csv_str(&nodes, "src,label,dst\n").unwrap_err();
        assert!(
            matches!(err, GraphError::DuplicateNodeId { ref id, line: 5 } if id == "a"),
            "{err:?}"
        );
    }

    #[test]
    fn malformed_rows_report_line() {
        let nodes = "id,label,attrs\na,user,{}\nb,user,\"{not json}\"\n";
        let err = PropertyGraph::from_csv_str(nodes, "src,label,dst\n").unwrap_err();
        assert!(matches!(err, GraphError::MalformedRow { line: 3, .. }), "{err:?}");

        let nodes = "id,label,attrs\na,user,{}\nb,user\n";
        let err = PropertyGraph::from_csv_str(nodes, "src,label,dst\n").unwrap_err();
        assert!(matches!(err, GraphError::MalformedRow { line: 3, .. }), "{err:?}");

        let err = PropertyGraph::from_csv_str("id,kind,attrs\n", "src,label,dst\n").unwrap_err();
        assert!(matches!(err, GraphError::MalformedRow { line: 1, .. }), "{err:?}");
    }

    #[test]
    fn duplicate_attribute_keys_rejected() {
        let nodes = "id,label,attrs\na,user,\"{\"\"A\"\":1,\"\"A\"\":2}\"\n";
        let err = PropertyGraph::from_csv_str(nodes, "src,label,dst\n").unwrap_err();
        assert!(matches!(err, GraphError::MalformedRow { line: 2, .. }), "{err:?}");
    }

    #[test]
    fn parallel_edges_need_distinct_labels() {
        let ok = PropertyGraph::from_csv_str(NODES, "src,label,dst\na,x,b\na,y,b\n").unwrap();
        assert_eq!(ok.edge_count(), 2);
        let err = PropertyGraph::from_csv_str(NODES, "src,label,dst\na,x,b\na,x,b\n").unwrap_err();
        assert!(matches!(err, GraphError::DuplicateEdge { line: 3, .. }));
    }

    #[test]
    fn attribute_typing() {
        assert_eq!(AttrValue::parse("19"), AttrValue::Number(19.0));
        assert_eq!(AttrValue::parse("-2.5"), AttrValue::Number(-2.5));
        assert_eq!(AttrValue::parse("555-0101"), AttrValue::Text("555-0101".into()));
        assert_eq!(AttrValue::parse("NaN"), AttrValue::Text("NaN".into()));
        assert_eq!(AttrValue::parse("inf"), AttrValue::Text("inf".into()));
        assert_eq!(AttrValue::parse("1e5"), AttrValue::Text("1e5".into()));
        assert_eq!(AttrValue::parse("."), AttrValue::Text(".".into()));
        assert_eq!(
            AttrValue::from_json(&serde_json::json!(null)).unwrap(),
            AttrValue::Absent
        );
        assert!(AttrValue::from_json(&serde_json::json!([1])).is_err());
    }

    #[test]
    fn profile_relations_cover_in_and_out_edges() {
        let g = PropertyGraph::from_csv_str(NODES, "src,label,dst\na,watched,c\na,knows,b\nb,knows,a\n").unwrap();
        let p = g.profile_of("a").unwrap();
        assert_eq!(
            p.relations,
            vec![
                ("knows".to_string(), "b".to_string()),
                ("knows".to_string(), "b".to_string()),
                ("watched".to_string(), "c".to_string()),
            ]
        );
        assert_eq!(g.neighbors("a", None, Direction::Both).unwrap(), vec!["b", "c"]);
        assert_eq!(g.neighbors("a", Some("knows"), Direction::In).unwrap(), vec!["b"]);
        assert_eq!(
            g.neighbors("a", Some("nope"), Direction::Out).unwrap(),
            Vec::<&str>::new()
        );
        assert!(matches!(g.profile_of("zz"), Err(GraphError::UnknownNode(_))));
        assert!(matches!(
            g.neighbors("zz", None, Direction::In),
            Err(GraphError::UnknownNode(_))
        ));
    }

    #[test]
    fn handles_follow_natural_id_order() {
        let nodes = "id,label,attrs\nv10,user,{}\nv2,user,{}\nv1,user,{}\n";
        let g = PropertyGraph::from_csv_str(nodes, "src,label,dst\n").unwrap();
        let order: Vec<&str> = g.node_indices().map(|ix| g.id(ix)).collect();
        assert_eq!(order, vec!["v1", "v2", "v10"]);
    }

    #[test]
    fn entity_ids_attach_to_profiles() {
        let g = PropertyGraph::from_csv_str(NODES, "src,label,dst\n")
            .unwrap()
            .with_entity_ids([("a", "e1")])
            .unwrap();
        assert_eq!(g.profile_of("a").unwrap().eid.as_deref(), Some("e1"));
        assert_eq!(g.profile_of("b").unwrap().eid, None);
    }

    #[test]
    fn edge_row_order_does_not_change_the_graph() {
        let nodes = "id,label,attrs\na,u,{}\nb,u,{}\n";
        let g1 = PropertyGraph::from_csv_str(nodes, "src,label,dst\na,watched,b\na,likes,b\n").unwrap();
        let g2 = PropertyGraph::from_csv_str(nodes, "src,label,dst\na,likes,b\na,watched,b\n").unwrap();
        assert_eq!(g1, g2);
        assert_eq!(g1.edge_label_ix("likes"), g2.edge_label_ix("likes"));
        assert_eq!(g1.out_edges(g1.ix("a").unwrap()), g2.out_edges(g2.ix("a").unwrap()));
    }
}
