//! Pairwise matchers. The scheduler only sees the [`Matcher`] trait.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::io::Read;
use std::path::Path;

use serde::Serialize;
use thiserror::Error;

use crate::graph::{AttrValue, EntityProfile, PropertyGraph};
use crate::pattern::Pair;
use crate::rules::levenshtein;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MatchDecision {
    pub is_match: bool,
    pub score: Option<f64>,
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MatcherError {
    #[error("no ground truth for profile {0:?}")]
    MissingGroundTruth(String),
    #[error("matcher failed: {0}")]
    Failed(String),
}

pub trait Matcher: Send + Sync {
    fn compare(&self, a: &EntityProfile, b: &EntityProfile) -> Result<MatchDecision, MatcherError>;
}

impl<F> Matcher for F
where
    F: Fn(&EntityProfile, &EntityProfile) -> Result<MatchDecision, MatcherError> + Send + Sync,
{
    fn compare(&self, a: &EntityProfile, b: &EntityProfile) -> Result<MatchDecision, MatcherError> {
        self(a, b)
    }
}

#[derive(Debug, Error)]
pub enum GroundTruthError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("malformed ground-truth row at line {line}: {message}")]
    MalformedRow { line: u64, message: String },
}

/// `pid -> eid` map from a `pid,eid` CSV file.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct GroundTruth {
    eids: HashMap<String, String>,
}

impl GroundTruth {
    pub fn load(path: impl AsRef<Path>) -> Result<Self, GroundTruthError> {
        let p = path.as_ref();
        let f = std::fs::File::open(p).map_err(|source| GroundTruthError::Io {
            path: p.display().to_string(),
            source,
        })?;
        Self::read(f)
    }

    pub fn from_csv_str(s: &str) -> Result<Self, GroundTruthError> {
        Self::read(s.as_bytes())
    }

    fn read<R: Read>(r: R) -> Result<Self, GroundTruthError> {
        let mut rd = csv::ReaderBuilder::new().has_headers(true).from_reader(r);
        let header = rd.headers().map_err(|e| GroundTruthError::MalformedRow {
            line: 1,
            message: e.to_string(),
        })?;
        if header.iter().ne(["pid", "eid"]) {
            return Err(GroundTruthError::MalformedRow {
                line: 1,
                message: "expected header pid,eid".into(),
            });
        }
        let mut eids = HashMap::new();
        for rec in rd.records() {
            let rec = rec.map_err(|e| GroundTruthError::MalformedRow {
                line: e.position().map(|p| p.line()).unwrap_or(0),
                message: e.to_string(),
            })?;
            let line = rec.position().map(|p| p.line()).unwrap_or(0);
            if rec[0].is_empty() || rec[1].is_empty() {
                return Err(GroundTruthError::MalformedRow {
                    line,
                    message: "empty pid or eid".into(),
                });
            }
            if eids.insert(rec[0].to_string(), rec[1].to_string()).is_some() {
                return Err(GroundTruthError::MalformedRow {
                    line,
                    message: format!("pid {:?} listed twice", &rec[0]),
                });
            }
        }
        Ok(Self { eids })
    }

    pub fn from_pairs<I, P, E>(it: I) -> Self
    where
        I: IntoIterator<Item = (P, E)>,
        P: Into<String>,
        E: Into<String>,
    {
        Self {
            eids: it.into_iter().map(|(p, e)| (p.into(), e.into())).collect(),
        }
    }

    pub fn eid(&self, pid: &str) -> Option<&str> {
        self.eids.get(pid).map(String::as_str)
    }

    pub fn len(&self) -> usize {
        self.eids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.eids.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &str)> {
        self.eids.iter().map(|(p, e)| (p.as_str(), e.as_str()))
    }

    /// All same-entity pairs among nodes of `g`.
    pub fn duplicate_pairs(&self, g: &PropertyGraph) -> BTreeSet<Pair> {
        let mut groups: BTreeMap<&str, Vec<_>> = BTreeMap::new();
        for (pid, eid) in &self.eids {
            if let Some(ix) = g.try_ix(pid) {
                groups.entry(eid.as_str()).or_default().push(ix);
            }
        }
        let mut out = BTreeSet::new();
        for members in groups.values() {
            for (i, &a) in members.iter().enumerate() {
                for &b in &members[i + 1..] {
                    out.insert(Pair::new(a, b));
                }
            }
        }
        out
    }
}

/// Same eid in ground truth ⇔ match.
pub fn oracle_match(a: &EntityProfile, b: &EntityProfile, gt: &GroundTruth) -> Result<MatchDecision, MatcherError> {
    let ea = gt
        .eid(&a.pid)
        .ok_or_else(|| MatcherError::MissingGroundTruth(a.pid.clone()))?;
    let eb = gt
        .eid(&b.pid)
        .ok_or_else(|| MatcherError::MissingGroundTruth(b.pid.clone()))?;
    Ok(MatchDecision {
        is_match: ea == eb,
        score: None,
    })
}

#[derive(Debug, Clone)]
pub struct OracleMatcher {
    pub gt: GroundTruth,
}

impl OracleMatcher {
    pub fn new(gt: GroundTruth) -> Self {
        Self { gt }
    }
}

impl Matcher for OracleMatcher {
    fn compare(&self, a: &EntityProfile, b: &EntityProfile) -> Result<MatchDecision, MatcherError> {
        oracle_match(a, b, &self.gt)
    }
}

fn attr_score(a: &AttrValue, b: &AttrValue) -> f64 {
    match (a, b) {
        (AttrValue::Text(x), AttrValue::Text(y)) => {
            let longest = x.chars().count().max(y.chars().count());
            if longest == 0 {
                1.0
            } else {
                1.0 - levenshtein(x, y) as f64 / longest as f64
            }
        }
        (AttrValue::Number(x), AttrValue::Number(y)) => f64::from(u8::from(x == y)),
        _ => 0.0,
    }
}

/// Mean per-attribute similarity: normalized edit similarity for text, equality
/// for numbers, 0 when either side is absent or the types differ.
pub fn similarity_match(a: &EntityProfile, b: &EntityProfile, attrs: &[String], tau: f64) -> MatchDecision {
    let score = if attrs.is_empty() {
        0.0
    } else {
        attrs.iter().map(|k| attr_score(a.attr(k), b.attr(k))).sum::<f64>() / attrs.len() as f64
    };
    MatchDecision {
        is_match: score >= tau,
        score: Some(score),
    }
}

#[derive(Debug, Clone)]
pub struct SimilarityMatcher {
    pub attrs: Vec<String>,
    pub tau: f64,
}

impl SimilarityMatcher {
    pub fn new(attrs: Vec<String>, tau: f64) -> Result<Self, MatcherError> {
        if !(0.0..=1.0).contains(&tau) {
            return Err(MatcherError::Failed(format!("tau {tau} outside [0, 1]")));
        }
        Ok(Self { attrs, tau })
    }
}

impl Matcher for SimilarityMatcher {
    fn compare(&self, a: &EntityProfile, b: &EntityProfile) -> Result<MatchDecision, MatcherError> {
        Ok(similarity_match(a, b, &self.attrs, self.tau))
    }
}
