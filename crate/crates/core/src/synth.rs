//! Seeded generator for user/platform graphs with noisy duplicate users.
//!
//! Every entity is one user record; with probability `dup_rate` it gets one
//! or two extra records whose attributes carry single-character typos with
//! probability `attr_noise` each. All records of an entity watch the same
//! home platform, some also watch a second one, and some use a device.
//! Record ids are shuffled so duplicates are not adjacent.

use std::fs;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value};
use thiserror::Error;

use crate::graph::{AttrValue, Attrs, Edge, Node, PropertyGraph};
use crate::matchers::GroundTruth;
use crate::rules::{parse_query_str, Query};

const FIRST: &[&str] = &[
    "Aaron",
    "Abigail",
    "Adrian",
    "Alice",
    "Amelia",
    "Andrew",
    "Anna",
    "Benjamin",
    "Bella",
    "Caleb",
    "Carla",
    "Charlotte",
    "Daniel",
    "Diana",
    "Dylan",
    "Elena",
    "Elijah",
    "Emily",
    "Ethan",
    "Fiona",
    "Gabriel",
    "Grace",
    "Hannah",
    "Henry",
    "Isaac",
    "Isla",
    "Jack",
    "Jacob",
    "Julia",
    "Kevin",
    "Laura",
    "Leo",
    "Lucas",
    "Maria",
    "Mason",
    "Mia",
    "Nathan",
    "Nora",
    "Oliver",
    "Olivia",
    "Peter",
    "Quinn",
    "Rachel",
    "Samuel",
    "Sofia",
    "Thomas",
    "Victor",
    "Zoe",
];

const LAST: &[&str] = &[
    "Anderson", "Baker", "Bennett", "Brooks", "Campbell", "Carter", "Clark", "Collins", "Cooper", "Davis", "Edwards",
    "Evans", "Fischer", "Foster", "Garcia", "Gray", "Hughes", "Jensen", "Johnson", "Kelly", "Larsen", "Lewis",
    "Martin", "Meyer", "Miller", "Morgan", "Murphy", "Nelson", "Novak", "Parker", "Patel", "Perez", "Price", "Reed",
    "Rivera", "Rogers", "Ross", "Sanders", "Schmidt", "Silva", "Stewart", "Sullivan", "Taylor", "Turner", "Walker",
    "Ward", "Watson", "Young",
];

#[derive(Debug, Error)]
pub enum SynthError {
    #[error("bad generator parameter: {0}")]
    BadParameter(String),
    #[error("cannot write {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

#[derive(Debug, Clone)]
pub struct SyntheticData {
    pub graph: PropertyGraph,
    /// `(pid, eid)` for every user record, in id order
    pub ground_truth: Vec<(String, String)>,
    /// query document matching the generated schema
    pub query: Value,
    pub duplicate_entities: usize,
}

#[derive(Clone)]
struct Person {
    first: String,
    last: String,
    phone: String,
    age: f64,
}

fn typo(rng: &mut ChaCha8Rng, s: &str, digits: bool) -> String {
    let mut chars: Vec<char> = s.chars().collect();
    let slots: Vec<usize> = (0..chars.len())
        .filter(|&i| !digits || chars[i].is_ascii_digit())
        .collect();
    let Some(&i) = slots.choose(rng) else {
        return s.to_string();
    };
    match rng.gen_range(0..3) {
        0 if !digits && chars.len() > 2 => {
            chars.remove(i);
        }
        1 if i + 1 < chars.len() && (!digits || chars[i + 1].is_ascii_digit()) => chars.swap(i, i + 1),
        _ => {
            chars[i] = if digits {
                char::from(b'0' + rng.gen_range(0..10u8))
            } else {
                char::from(b'a' + rng.gen_range(0..26u8))
            };
        }
    }
    chars.into_iter().collect()
}

fn noisy(rng: &mut ChaCha8Rng, p: &Person, noise: f64) -> Person {
    let text = |rng: &mut ChaCha8Rng, s: &str, digits: bool| {
        if rng.gen_bool(noise) {
            typo(rng, s, digits)
        } else {
            s.to_string()
        }
    };
    let first = text(rng, &p.first, false);
    let last = text(rng, &p.last, false);
    let phone = text(rng, &p.phone, true);
    let age = if rng.gen_bool(noise / 2.0) {
        p.age + if rng.gen_bool(0.5) { 1.0 } else { -1.0 }
    } else {
        p.age
    };
    Person {
        first,
        last,
        phone,
        age,
    }
}

/// The standard query over generated graphs: users sharing a platform,
/// adults only, four one-constraint rules, threshold 2.
pub fn synthetic_query() -> Value {
    let rule = |id: &str, attr: &str, metric: &str, t: u32| {
        json!({
            "id": id,
            "lhs": [{"kind": "attr_attr", "vars": ["x", "x'"], "attrs": [attr, attr], "metric": metric, "threshold": t}],
            "rhs": [{"kind": "eid_eid", "vars": ["x", "x'"]}]
        })
    };
    json!({
        "pattern": {
            "nodes": [{"var": "x", "label": "user"}, {"var": "y", "label": "platform"}, {"var": "x'", "label": "user"}],
            "edges": [{"src": "x", "label": "watched", "dst": "y"}, {"src": "x'", "label": "watched", "dst": "y"}],
            "duplicates": ["x", "x'"]
        },
        "demand": [
            {"var": "x", "attr": "Age", "op": ">", "value": 18},
            {"var": "x'", "attr": "Age", "op": ">", "value": 18}
        ],
        "rules": [
            rule("LN", "LN", "edit", 2),
            rule("FN", "FN", "edit", 2),
            rule("PH", "Phone", "edit", 2),
            rule("Age", "Age", "exact", 0)
        ],
        "weighting": "count",
        "threshold": 2,
        "aggregation": {"Age": "max"}
    })
}

pub fn gen_synthetic(
    n_entities: usize,
    dup_rate: f64,
    attr_noise: f64,
    seed: u64,
) -> Result<SyntheticData, SynthError> {
    if n_entities == 0 {
        return Err(SynthError::BadParameter("n_entities must be positive".into()));
    }
    for (name, v) in [("dup_rate", dup_rate), ("attr_noise", attr_noise)] {
        if !(0.0..=1.0).contains(&v) {
            return Err(SynthError::BadParameter(format!("{name} = {v} is outside [0, 1]")));
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n_platforms = (n_entities / 8).max(1);
    let n_devices = (n_entities / 20).max(1);

    // (entity, person, platforms, device)
    let mut records: Vec<(usize, Person, Vec<usize>, Option<usize>)> = Vec::new();
    let mut duplicate_entities = 0;
    for e in 0..n_entities {
        let base = Person {
            first: FIRST.choose(&mut rng).expect("non-empty").to_string(),
            last: LAST.choose(&mut rng).expect("non-empty").to_string(),
            phone: format!("{:03}-{:04}", rng.gen_range(200..1000), rng.gen_range(0..10000)),
            age: f64::from(rng.gen_range(14..=80u32)),
        };
        let home = rng.gen_range(0..n_platforms);
        let extra = if rng.gen_bool(dup_rate) {
            rng.gen_range(1..=2)
        } else {
            0
        };
        duplicate_entities += usize::from(extra > 0);
        for copy in 0..=extra {
            let person = if copy == 0 {
                base.clone()
            } else {
                noisy(&mut rng, &base, attr_noise)
            };
            let mut platforms = vec![home];
            if n_platforms > 1 && rng.gen_bool(0.25) {
                let other = rng.gen_range(0..n_platforms);
                if other != home {
                    platforms.push(other);
                }
            }
            let device = rng.gen_bool(0.3).then(|| rng.gen_range(0..n_devices));
            records.push((e, person, platforms, device));
        }
    }
    records.shuffle(&mut rng);

    let mut nodes = Vec::with_capacity(records.len() + n_platforms + n_devices);
    let mut edges = Vec::new();
    let mut ground_truth = Vec::with_capacity(records.len());
    for (i, (e, p, platforms, device)) in records.into_iter().enumerate() {
        let id = format!("u{i}");
        let attrs: Attrs = [
            ("FN", AttrValue::Text(p.first)),
            ("LN", AttrValue::Text(p.last)),
            ("Phone", AttrValue::Text(p.phone)),
            ("Age", AttrValue::Number(p.age)),
        ]
        .into_iter()
        .map(|(k, v)| (k.to_string(), v))
        .collect();
        nodes.push(Node {
            id: id.clone(),
            label: "user".into(),
            attrs,
        });
        for pl in platforms {
            edges.push(Edge {
                src: id.clone(),
                label: "watched".into(),
                dst: format!("p{pl}"),
            });
        }
        if let Some(d) = device {
            edges.push(Edge {
                src: id.clone(),
                label: "uses".into(),
                dst: format!("d{d}"),
            });
        }
        ground_truth.push((id, format!("e{e}")));
    }
    for pl in 0..n_platforms {
        nodes.push(Node {
            id: format!("p{pl}"),
            label: "platform".into(),
            attrs: Attrs::from([("Name".to_string(), AttrValue::Text(format!("Platform {pl}")))]),
        });
    }
    for d in 0..n_devices {
        nodes.push(Node {
            id: format!("d{d}"),
            label: "device".into(),
            attrs: Attrs::from([("Model".to_string(), AttrValue::Text(format!("Model-{}", d % 7)))]),
        });
    }
    let graph = PropertyGraph::from_parts(nodes, edges).expect("generator output is well formed");
    Ok(SyntheticData {
        graph,
        ground_truth,
        query: synthetic_query(),
        duplicate_entities,
    })
}

impl SyntheticData {
    pub fn gt(&self) -> GroundTruth {
        GroundTruth::from_pairs(self.ground_truth.iter().cloned())
    }

    pub fn parsed_query(&self) -> Query {
        parse_query_str(&self.query.to_string()).expect("generator query is valid")
    }

    /// Writes `nodes.csv`, `edges.csv`, `gt.csv` and `query.json` into `dir`.
    pub fn write_to(&self, dir: impl AsRef<Path>) -> Result<(), SynthError> {
        let dir = dir.as_ref();
        let io = |path: &Path| {
            let path = path.display().to_string();
            move |source| SynthError::Io { path, source }
        };
        fs::create_dir_all(dir).map_err(io(dir))?;
        self.graph
            .save(dir.join("nodes.csv"), dir.join("edges.csv"))
            .map_err(|e| SynthError::Io {
                path: dir.display().to_string(),
                source: std::io::Error::other(e.to_string()),
            })?;
        let gt_path = dir.join("gt.csv");
        let mut wr = csv::WriterBuilder::new()
            .terminator(csv::Terminator::Any(b'\n'))
            .from_path(&gt_path)
            .map_err(|e| SynthError::Io {
                path: gt_path.display().to_string(),
                source: e.into(),
            })?;
        let csv_err = |e: csv::Error| SynthError::Io {
            path: gt_path.display().to_string(),
            source: e.into(),
        };
        wr.write_record(["pid", "eid"]).map_err(csv_err)?;
        for (p, e) in &self.ground_truth {
            wr.write_record([p, e]).map_err(csv_err)?;
        }
        wr.flush().map_err(io(&gt_path))?;
        let q_path = dir.join("query.json");
        let text = serde_json::to_string_pretty(&self.query).expect("json value serializes") + "\n";
        fs::write(&q_path, text).map_err(io(&q_path))?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn no_duplicates_without_dup_rate() {
        let d = gen_synthetic(50, 0.0, 0.5, 1).unwrap();
        assert_eq!(d.duplicate_entities, 0);
        assert!(d.gt().duplicate_pairs(&d.graph).is_empty());
        assert_eq!(d.graph.nodes_with_label("user").len(), 50);
    }

    #[test]
    fn same_seed_same_graph() {
        let a = gen_synthetic(80, 0.3, 0.3, 7).unwrap();
        let b = gen_synthetic(80, 0.3, 0.3, 7).unwrap();
        assert_eq!(a.graph, b.graph);
        assert_eq!(a.ground_truth, b.ground_truth);
        let c = gen_synthetic(80, 0.3, 0.3, 8).unwrap();
        assert_ne!(a.graph, c.graph);
    }

    #[test]
    fn duplicate_count_is_recorded() {
        let d = gen_synthetic(100, 0.2, 0.2, 42).unwrap();
        let users = d.graph.nodes_with_label("user").len();
        assert!(users > 100);
        let mut eids: Vec<&str> = d.ground_truth.iter().map(|(_, e)| e.as_str()).collect();
        eids.sort_unstable();
        let mut dup_clusters = 0;
        for grp in eids.chunk_by(|a, b| a == b) {
            dup_clusters += usize::from(grp.len() > 1);
        }
        assert_eq!(dup_clusters, d.duplicate_entities);
        assert!((10..=30).contains(&d.duplicate_entities), "{}", d.duplicate_entities);
    }

    #[test]
    fn rejects_bad_parameters() {
        assert!(gen_synthetic(0, 0.1, 0.1, 0).is_err());
        assert!(gen_synthetic(10, 1.5, 0.1, 0).is_err());
        assert!(gen_synthetic(10, 0.1, -0.1, 0).is_err());
    }

    #[test]
    fn typos_change_one_position() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..200 {
            let t = typo(&mut rng, "Johnson", false);
            assert!(crate::rules::levenshtein("Johnson", &t) <= 2);
            let p = typo(&mut rng, "555-0123", true);
            assert_eq!(p.len(), 8);
            assert_eq!(&p[3..4], "-");
        }
    }
}
