#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet};
use std::path::PathBuf;

use er_core::graph::{AttrValue, PropertyGraph};
use er_core::matchers::GroundTruth;
use er_core::rules::{parse_query, parse_query_str, Query};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value};

pub fn fixture_dir(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("fixtures").join(name)
}

pub fn load_fixture(name: &str) -> (PropertyGraph, Query, GroundTruth) {
    let d = fixture_dir(name);
    let g = PropertyGraph::load(d.join("nodes.csv"), d.join("edges.csv")).unwrap();
    let q = parse_query(d.join("query.json")).unwrap();
    let gt = GroundTruth::load(d.join("gt.csv")).unwrap();
    (g, q, gt)
}

pub fn pair_ids(pairs: impl IntoIterator<Item = (String, String)>) -> BTreeSet<(String, String)> {
    pairs.into_iter().collect()
}

pub fn sorted_pair(a: &str, b: &str) -> (String, String) {
    if er_core::ids::natural_cmp(a, b).is_le() {
        (a.to_string(), b.to_string())
    } else {
        (b.to_string(), a.to_string())
    }
}

/// Plain recursive edit distance with memoization; deliberately independent
/// of the library's row-based implementation.
pub fn edit_oracle(a: &str, b: &str) -> usize {
    fn go(a: &[char], b: &[char], memo: &mut BTreeMap<(usize, usize), usize>) -> usize {
        if a.is_empty() {
            return b.len();
        }
        if b.is_empty() {
            return a.len();
        }
        if let Some(&v) = memo.get(&(a.len(), b.len())) {
            return v;
        }
        let sub = go(&a[1..], &b[1..], memo) + usize::from(a[0] != b[0]);
        let del = go(&a[1..], b, memo) + 1;
        let ins = go(a, &b[1..], memo) + 1;
        let v = sub.min(del).min(ins);
        memo.insert((a.len(), b.len()), v);
        v
    }
    let (a, b): (Vec<char>, Vec<char>) = (a.chars().collect(), b.chars().collect());
    go(&a, &b, &mut BTreeMap::new())
}

/// Small random instance: graph, query over users sharing a platform, and a
/// ground truth covering every node.
pub struct RandomCase {
    pub g: PropertyGraph,
    pub query: Value,
    pub gt: Vec<(String, String)>,
}

impl RandomCase {
    pub fn q(&self) -> Query {
        parse_query_str(&self.query.to_string()).unwrap()
    }

    pub fn ground_truth(&self) -> GroundTruth {
        GroundTruth::from_pairs(self.gt.iter().cloned())
    }
}

const NAMES: &[&str] = &["ann", "anne", "anna", "bob", "bobby", "rob", "kim"];

pub fn random_case(seed: u64) -> RandomCase {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = rng.gen_range(4..=30usize);
    let mut nodes = String::from("id,label,attrs\n");
    let mut labels = Vec::with_capacity(n);
    for i in 0..n {
        let label = if rng.gen_bool(0.65) { "user" } else { "platform" };
        labels.push(label);
        let mut attrs = serde_json::Map::new();
        if rng.gen_bool(0.8) {
            attrs.insert("A".into(), json!(NAMES.choose(&mut rng).unwrap()));
        }
        if rng.gen_bool(0.8) {
            attrs.insert("B".into(), json!(rng.gen_range(0..5)));
        }
        if rng.gen_bool(0.8) {
            // occasionally numeric so exact comparisons meet mixed types
            let c = if rng.gen_bool(0.2) {
                json!(1)
            } else {
                json!(format!("c{}", rng.gen_range(0..3)))
            };
            attrs.insert("C".into(), c);
        }
        let text = Value::Object(attrs).to_string().replace('"', "\"\"");
        nodes.push_str(&format!("n{i},{label},\"{text}\"\n"));
    }
    let mut edges = BTreeSet::new();
    for _ in 0..(n * 2) {
        let (mut a, mut b) = (rng.gen_range(0..n), rng.gen_range(0..n));
        // mostly user -> platform, so the pattern has something to bind
        if rng.gen_bool(0.8) {
            let users: Vec<usize> = (0..n).filter(|&i| labels[i] == "user").collect();
            let platforms: Vec<usize> = (0..n).filter(|&i| labels[i] == "platform").collect();
            if let (Some(&u), Some(&p)) = (users.choose(&mut rng), platforms.choose(&mut rng)) {
                (a, b) = (u, p);
            }
        }
        let label = if rng.gen_bool(0.7) { "watched" } else { "likes" };
        if a != b {
            edges.insert((format!("n{a}"), label, format!("n{b}")));
        }
    }
    let mut edges_csv = String::from("src,label,dst\n");
    for (a, l, b) in &edges {
        edges_csv.push_str(&format!("{a},{l},{b}\n"));
    }
    let g = PropertyGraph::from_csv_str(&nodes, &edges_csv).unwrap();

    let y_label = if rng.gen_bool(0.3) { "*" } else { "platform" };
    let e_label = if rng.gen_bool(0.3) { "*" } else { "watched" };
    let mut demand = Vec::new();
    if rng.gen_bool(0.5) {
        demand.push(json!({"var": "x", "attr": "B", "op": ">", "value": rng.gen_range(0..3)}));
    }
    let constraint = |rng: &mut ChaCha8Rng| match rng.gen_range(0..3) {
        0 => {
            json!({"kind": "attr_attr", "vars": ["x", "x'"], "attrs": ["A", "A"], "metric": "edit", "threshold": rng.gen_range(0..3)})
        }
        1 => {
            json!({"kind": "attr_attr", "vars": ["x", "x'"], "attrs": ["B", "B"], "metric": "absdiff", "threshold": rng.gen_range(0..2)})
        }
        _ => json!({"kind": "attr_attr", "vars": ["x", "x'"], "attrs": ["C", "C"], "metric": "exact", "threshold": 0}),
    };
    let rules: Vec<Value> = (0..rng.gen_range(1..=3))
        .map(|r| {
            let lhs: Vec<Value> = (0..rng.gen_range(1..=2)).map(|_| constraint(&mut rng)).collect();
            json!({"id": format!("r{r}"), "lhs": lhs, "rhs": [{"kind": "eid_eid", "vars": ["x", "x'"]}]})
        })
        .collect();
    let query = json!({
        "pattern": {
            "nodes": [{"var": "x", "label": "user"}, {"var": "y", "label": y_label}, {"var": "x'", "label": "user"}],
            "edges": [{"src": "x", "label": e_label, "dst": "y"}, {"src": "x'", "label": e_label, "dst": "y"}],
            "duplicates": ["x", "x'"]
        },
        "demand": demand,
        "rules": rules,
        "threshold": 2
    });
    let entities = (n / 6).max(1);
    let gt = (0..n)
        .map(|i| (format!("n{i}"), format!("e{}", rng.gen_range(0..entities))))
        .collect();
    RandomCase { g, query, gt }
}

fn oracle_constraint(c: &Value, a: &BTreeMap<String, AttrValue>, b: &BTreeMap<String, AttrValue>) -> bool {
    let attr = c["attrs"][0].as_str().unwrap();
    let t = c["threshold"].as_f64().unwrap();
    let (va, vb) = (a.get(attr), b.get(attr));
    match (c["metric"].as_str().unwrap(), va, vb) {
        ("edit", Some(AttrValue::Text(x)), Some(AttrValue::Text(y))) => edit_oracle(x, y) as f64 <= t,
        ("absdiff", Some(AttrValue::Number(x)), Some(AttrValue::Number(y))) => (x - y).abs() <= t,
        ("exact", Some(AttrValue::Text(x)), Some(AttrValue::Text(y))) => x == y,
        ("exact", Some(AttrValue::Number(x)), Some(AttrValue::Number(y))) => x == y,
        _ => false,
    }
}

fn demand_oracle(d: &Value, attrs: &BTreeMap<String, AttrValue>) -> bool {
    let attr = d["attr"].as_str().unwrap();
    let k = d["value"].as_f64().unwrap();
    matches!(attrs.get(attr), Some(AttrValue::Number(v)) if *v > k)
}

pub type PairSet = BTreeSet<(String, String)>;

/// Exhaustive Stage-1 and Stage-2 pair sets, over every assignment of the
/// three pattern variables.
pub fn brute_force(case: &RandomCase) -> (PairSet, PairSet) {
    let g = &case.g;
    let q = &case.query;
    let y_label = q["pattern"]["nodes"][1]["label"].as_str().unwrap();
    let e_label = q["pattern"]["edges"][0]["label"].as_str().unwrap();
    let nodes = g.nodes();
    let edges: BTreeSet<(String, String, String)> = g.edges().into_iter().map(|e| (e.src, e.label, e.dst)).collect();
    let has = |s: &str, d: &str| {
        edges
            .iter()
            .any(|(a, l, b)| a == s && b == d && (e_label == "*" || l == e_label))
    };
    let demand = q["demand"].as_array().unwrap();
    let mut stage1 = BTreeSet::new();
    for x in &nodes {
        for y in &nodes {
            for xp in &nodes {
                if x.id == xp.id || x.label != "user" || xp.label != "user" {
                    continue;
                }
                if y_label != "*" && y.label != y_label {
                    continue;
                }
                if !has(&x.id, &y.id) || !has(&xp.id, &y.id) {
                    continue;
                }
                if !demand.iter().all(|d| demand_oracle(d, &x.attrs)) {
                    continue;
                }
                stage1.insert(sorted_pair(&x.id, &xp.id));
            }
        }
    }
    let by_id: BTreeMap<&str, &BTreeMap<String, AttrValue>> = nodes.iter().map(|n| (n.id.as_str(), &n.attrs)).collect();
    let stage2 = stage1
        .iter()
        .filter(|(a, b)| {
            q["rules"].as_array().unwrap().iter().any(|r| {
                r["lhs"]
                    .as_array()
                    .unwrap()
                    .iter()
                    .all(|c| oracle_constraint(c, by_id[a.as_str()], by_id[b.as_str()]))
            })
        })
        .cloned()
        .collect();
    (stage1, stage2)
}
