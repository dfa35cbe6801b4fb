//! GDD rules: distance constraints over pattern variables, their evaluation,
//! and constraint-based filtering of candidate pairs.
//!
//! Within a rule the lhs constraints are conjunctive. Across rules satisfaction
//! is disjunctive: a pair survives filtering if at least one rule holds on some
//! match binding that pair, and it remembers which rules held. Rhs constraints
//! are never evaluated; they only declare that satisfying pairs are duplicate
//! candidates.

mod demand;
mod edit;
mod query;

use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::graph::{AttrValue, LabelIx, NodeIx, PropertyGraph};
use crate::pattern::{candidate_pairs, GraphPattern, Match, Pair};

pub use demand::{DemandOp, DemandPredicate};
pub use edit::{levenshtein, within_edit_distance};
pub use query::{parse_query, parse_query_str, Query, QueryError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ConstraintKind {
    AttrConst,
    AttrAttr,
    EidConst,
    EidEid,
    RelaConst,
    RelaRela,
}

impl ConstraintKind {
    fn arity(self) -> usize {
        match self {
            ConstraintKind::AttrConst | ConstraintKind::EidConst | ConstraintKind::RelaConst => 1,
            _ => 2,
        }
    }

    fn is_identity(self) -> bool {
        !matches!(self, ConstraintKind::AttrConst | ConstraintKind::AttrAttr)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Metric {
    Edit,
    #[serde(rename = "absdiff")]
    AbsDiff,
    #[default]
    Exact,
}

/// `δ(x.A, c) <= t`, `δ(x.A1, x'.A2) <= t`, or one of the eid/relation forms.
#[derive(Debug, Clone, PartialEq)]
pub struct DistanceConstraint {
    pub kind: ConstraintKind,
    pub vars: Vec<String>,
    pub attrs: Vec<String>,
    pub constant: Option<AttrValue>,
    pub metric: Metric,
    pub threshold: f64,
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RuleError {
    #[error("undeclared variable {0:?}")]
    UndeclaredVariable(String),
    #[error("bad threshold: {0}")]
    BadThreshold(String),
    #[error("malformed constraint: {0}")]
    Malformed(String),
}

impl DistanceConstraint {
    /// `x.attr ~ constant`.
    pub fn attr_const(var: &str, attr: &str, constant: impl Into<AttrValue>, metric: Metric, threshold: f64) -> Self {
        Self {
            kind: ConstraintKind::AttrConst,
            vars: vec![var.into()],
            attrs: vec![attr.into()],
            constant: Some(constant.into()),
            metric,
            threshold,
        }
    }

    /// `x.a1 ~ x'.a2`.
    pub fn attr_attr(x: &str, a1: &str, xp: &str, a2: &str, metric: Metric, threshold: f64) -> Self {
        Self {
            kind: ConstraintKind::AttrAttr,
            vars: vec![x.into(), xp.into()],
            attrs: vec![a1.into(), a2.into()],
            constant: None,
            metric,
            threshold,
        }
    }

    /// `x.eid = x'.eid`.
    pub fn eid_eid(x: &str, xp: &str) -> Self {
        Self {
            kind: ConstraintKind::EidEid,
            vars: vec![x.into(), xp.into()],
            attrs: vec![],
            constant: None,
            metric: Metric::Exact,
            threshold: 0.0,
        }
    }

    pub fn eid_const(x: &str, eid: &str) -> Self {
        Self {
            kind: ConstraintKind::EidConst,
            vars: vec![x.into()],
            attrs: vec![],
            constant: Some(AttrValue::Text(eid.into())),
            metric: Metric::Exact,
            threshold: 0.0,
        }
    }

    /// `x` has a relation labeled `rela`.
    pub fn rela_const(x: &str, rela: &str) -> Self {
        Self {
            kind: ConstraintKind::RelaConst,
            vars: vec![x.into()],
            attrs: vec![],
            constant: Some(AttrValue::Text(rela.into())),
            metric: Metric::Exact,
            threshold: 0.0,
        }
    }

    /// `x` and `x'` share a relation (same label, same neighbor), optionally
    /// restricted to one relation label.
    pub fn rela_rela(x: &str, xp: &str, label: Option<&str>) -> Self {
        Self {
            kind: ConstraintKind::RelaRela,
            vars: vec![x.into(), xp.into()],
            attrs: label.map(|l| vec![l.to_string()]).unwrap_or_default(),
            constant: None,
            metric: Metric::Exact,
            threshold: 0.0,
        }
    }

    pub fn validate(&self, pattern: &GraphPattern) -> Result<(), RuleError> {
        let k = self.kind;
        if self.vars.len() != k.arity() {
            return Err(RuleError::Malformed(format!(
                "{k:?} takes {} variable(s), got {}",
                k.arity(),
                self.vars.len()
            )));
        }
        for v in &self.vars {
            if pattern.slot(v).is_none() {
                return Err(RuleError::UndeclaredVariable(v.clone()));
            }
        }
        let attrs_ok = match k {
            ConstraintKind::AttrConst => self.attrs.len() == 1,
            ConstraintKind::AttrAttr => matches!(self.attrs.len(), 1 | 2),
            ConstraintKind::EidConst | ConstraintKind::EidEid | ConstraintKind::RelaConst => self.attrs.is_empty(),
            ConstraintKind::RelaRela => self.attrs.len() <= 1,
        };
        if !attrs_ok {
            return Err(RuleError::Malformed(format!(
                "{k:?} does not accept {} attribute(s)",
                self.attrs.len()
            )));
        }
        let wants_constant = matches!(
            k,
            ConstraintKind::AttrConst | ConstraintKind::EidConst | ConstraintKind::RelaConst
        );
        match (&self.constant, wants_constant) {
            (None, true) => return Err(RuleError::Malformed(format!("{k:?} requires a constant"))),
            (Some(_), false) => return Err(RuleError::Malformed(format!("{k:?} does not take a constant"))),
            (Some(AttrValue::Absent), true) => {
                return Err(RuleError::Malformed(format!("{k:?} constant must not be null")))
            }
            (Some(c), true) if k == ConstraintKind::RelaConst && c.as_text().is_none() => {
                return Err(RuleError::Malformed("relation constant must be a label string".into()))
            }
            _ => {}
        }
        if !self.threshold.is_finite() || self.threshold < 0.0 {
            return Err(RuleError::BadThreshold(format!(
                "threshold {} must be a non-negative number",
                self.threshold
            )));
        }
        if k.is_identity() && (self.threshold != 0.0 || self.metric != Metric::Exact) {
            return Err(RuleError::BadThreshold(format!(
                "{k:?} requires metric exact with threshold 0"
            )));
        }
        Ok(())
    }
}

impl fmt::Display for DistanceConstraint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let m = match self.metric {
            Metric::Edit => "edit",
            Metric::AbsDiff => "absdiff",
            Metric::Exact => "exact",
        };
        match self.kind {
            ConstraintKind::AttrConst => write!(
                f,
                "{m}({}.{}, {}) <= {}",
                self.vars[0],
                self.attrs[0],
                self.constant.as_ref().unwrap_or(&AttrValue::Absent),
                self.threshold
            ),
            ConstraintKind::AttrAttr => write!(
                f,
                "{m}({}.{}, {}.{}) <= {}",
                self.vars[0],
                self.attrs[0],
                self.vars[1],
                self.attrs.get(1).unwrap_or(&self.attrs[0]),
                self.threshold
            ),
            _ => write!(f, "{:?}({})", self.kind, self.vars.join(", ")),
        }
    }
}

/// Result of evaluating one constraint on one match.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Outcome {
    Satisfied,
    Violated,
    /// An attribute (or entity id) was absent on at least one side.
    Missing,
    /// The metric does not apply to the value types (e.g. edit distance on numbers).
    TypeMismatch,
}

impl Outcome {
    pub fn holds(self) -> bool {
        self == Outcome::Satisfied
    }
}

fn attr_distance(metric: Metric, a: &AttrValue, b: &AttrValue, bound: f64) -> Outcome {
    let verdict = |ok: bool| if ok { Outcome::Satisfied } else { Outcome::Violated };
    match (a, b) {
        (AttrValue::Absent, _) | (_, AttrValue::Absent) => Outcome::Missing,
        (AttrValue::Text(x), AttrValue::Text(y)) => match metric {
            // thresholds are whole edit counts; a fractional bound rounds down
            Metric::Edit => verdict(within_edit_distance(x, y, bound.floor() as usize)),
            Metric::Exact => verdict(x == y),
            Metric::AbsDiff => Outcome::TypeMismatch,
        },
        (AttrValue::Number(x), AttrValue::Number(y)) => match metric {
            Metric::AbsDiff => verdict((x - y).abs() <= bound),
            Metric::Exact => verdict(x == y),
            Metric::Edit => Outcome::TypeMismatch,
        },
        _ => Outcome::TypeMismatch,
    }
}

fn incident(g: &PropertyGraph, v: NodeIx) -> Vec<(LabelIx, NodeIx)> {
    let mut r: Vec<(LabelIx, NodeIx)> = g.out_edges(v).iter().chain(g.in_edges(v)).copied().collect();
    r.sort_unstable();
    r.dedup();
    r
}

/// Evaluates `c` on match `m` of pattern `q`, reporting why it failed.
pub fn evaluate(c: &DistanceConstraint, m: &Match, q: &GraphPattern, g: &PropertyGraph) -> Outcome {
    let node = |i: usize| -> NodeIx { m.get(q.slot(&c.vars[i]).expect("constraint validated against pattern")) };
    match c.kind {
        ConstraintKind::AttrConst => {
            let v = node(0);
            attr_distance(
                c.metric,
                g.attr(v, &c.attrs[0]),
                c.constant.as_ref().unwrap(),
                c.threshold,
            )
        }
        ConstraintKind::AttrAttr => {
            let (a, b) = (node(0), node(1));
            let a2 = c.attrs.get(1).unwrap_or(&c.attrs[0]);
            attr_distance(c.metric, g.attr(a, &c.attrs[0]), g.attr(b, a2), c.threshold)
        }
        ConstraintKind::EidConst => match (g.entity_id(node(0)), c.constant.as_ref()) {
            (Some(e), Some(AttrValue::Text(k))) => verdict(e == k),
            (Some(e), Some(AttrValue::Number(k))) => verdict(AttrValue::parse(e) == AttrValue::Number(*k)),
            _ => Outcome::Missing,
        },
        ConstraintKind::EidEid => match (g.entity_id(node(0)), g.entity_id(node(1))) {
            (Some(a), Some(b)) => verdict(a == b),
            _ => Outcome::Missing,
        },
        ConstraintKind::RelaConst => {
            let label = c.constant.as_ref().and_then(AttrValue::as_text).unwrap_or_default();
            let Some(li) = g.edge_label_ix(label) else {
                return Outcome::Violated;
            };
            let v = node(0);
            verdict(g.out_edges(v).iter().chain(g.in_edges(v)).any(|&(l, _)| l == li))
        }
        ConstraintKind::RelaRela => {
            let filter = match c.attrs.first() {
                Some(l) => match g.edge_label_ix(l) {
                    Some(li) => Some(li),
                    None => return Outcome::Violated,
                },
                None => None,
            };
            let ra = incident(g, node(0));
            let rb = incident(g, node(1));
            verdict(
                ra.iter()
                    .filter(|(l, _)| filter.is_none_or(|f| *l == f))
                    .any(|r| rb.binary_search(r).is_ok()),
            )
        }
    }
}

fn verdict(ok: bool) -> Outcome {
    if ok {
        Outcome::Satisfied
    } else {
        Outcome::Violated
    }
}

/// True iff the constraint's distance is within its threshold on `m`.
/// Absent attributes and type mismatches evaluate to false.
pub fn eval_constraint(c: &DistanceConstraint, m: &Match, q: &GraphPattern, g: &PropertyGraph) -> bool {
    evaluate(c, m, q, g).holds()
}

/// `φ = (Q[u], Φ_X → Φ_Y)`.
#[derive(Debug, Clone, PartialEq)]
pub struct GddRule {
    pub id: String,
    pub pattern: GraphPattern,
    pub lhs: Vec<DistanceConstraint>,
    pub rhs: Vec<DistanceConstraint>,
}

impl GddRule {
    /// Builds a rule whose rhs is `x.eid = x'.eid` on the pattern's duplicate pair.
    pub fn new(id: &str, pattern: &GraphPattern, lhs: Vec<DistanceConstraint>) -> Result<Self, RuleError> {
        let (x, xp) = pattern
            .duplicates
            .clone()
            .ok_or_else(|| RuleError::Malformed("pattern has no duplicate pair".into()))?;
        let rule = GddRule {
            id: id.to_string(),
            pattern: pattern.clone(),
            lhs,
            rhs: vec![DistanceConstraint::eid_eid(&x, &xp)],
        };
        rule.validate()?;
        Ok(rule)
    }

    pub fn validate(&self) -> Result<(), RuleError> {
        for c in self.lhs.iter().chain(&self.rhs) {
            c.validate(&self.pattern)?;
        }
        let (x, xp) = self
            .pattern
            .duplicates
            .as_ref()
            .ok_or_else(|| RuleError::Malformed("pattern has no duplicate pair".into()))?;
        if self.rhs.is_empty() {
            return Err(RuleError::Malformed(format!("rule {:?} has an empty rhs", self.id)));
        }
        for c in &self.rhs {
            let on_dups =
                c.vars.len() == 2 && ((&c.vars[0] == x && &c.vars[1] == xp) || (&c.vars[0] == xp && &c.vars[1] == x));
            if c.kind != ConstraintKind::EidEid || !on_dups {
                return Err(RuleError::Malformed(format!(
                    "rule {:?}: rhs constraints must be eid_eid on the duplicate variables",
                    self.id
                )));
            }
        }
        Ok(())
    }

    /// All lhs constraints hold on `m`.
    pub fn holds_on(&self, m: &Match, g: &PropertyGraph) -> bool {
        self.lhs.iter().all(|c| eval_constraint(c, m, &self.pattern, g))
    }
}

/// A Stage-2 survivor: a candidate pair and the rules it satisfied.
#[derive(Debug, Clone, PartialEq)]
pub struct FilteredPair {
    pub pair: Pair,
    pub rules: BTreeSet<String>,
}

#[derive(Debug, Default)]
struct FilterStats {
    /// pairs on which each rule hit a type mismatch at least once
    type_mismatch_pairs: Vec<usize>,
}

fn filter_inner(matches: &[Match], rules: &[GddRule], g: &PropertyGraph, stats: &mut FilterStats) -> Vec<FilteredPair> {
    stats.type_mismatch_pairs = vec![0; rules.len()];
    let Some(first) = rules.first() else {
        return Vec::new();
    };
    let mut keyed: Vec<(Pair, usize)> = matches
        .iter()
        .enumerate()
        .filter_map(|(i, m)| m.pair(&first.pattern).map(|p| (p, i)))
        .collect();
    keyed.sort_unstable();

    let mut out = Vec::new();
    let mut start = 0;
    while start < keyed.len() {
        let pair = keyed[start].0;
        let mut end = start;
        while end < keyed.len() && keyed[end].0 == pair {
            end += 1;
        }
        let group = &keyed[start..end];
        let mut satisfied = BTreeSet::new();
        for (ri, rule) in rules.iter().enumerate() {
            let mut mismatch = false;
            let hit = group.iter().any(|&(_, mi)| {
                rule.lhs.iter().all(|c| {
                    let o = evaluate(c, &matches[mi], &rule.pattern, g);
                    mismatch |= o == Outcome::TypeMismatch;
                    o.holds()
                })
            });
            if mismatch {
                stats.type_mismatch_pairs[ri] += 1;
            }
            if hit {
                satisfied.insert(rule.id.clone());
            }
        }
        if !satisfied.is_empty() {
            out.push(FilteredPair { pair, rules: satisfied });
        }
        start = end;
    }
    out
}

/// Constraint-based filtering (H2). A rule counts at most once per pair, no
/// matter how many matches bind that pair. Output is sorted by pair.
pub fn filter_matches(matches: &[Match], rules: &[GddRule], g: &PropertyGraph) -> Vec<FilteredPair> {
    filter_inner(matches, rules, g, &mut FilterStats::default())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SelectivityRow {
    pub rule: String,
    pub retained: usize,
    pub candidates: usize,
    /// retained / candidates; 0 when there are no candidates
    pub retention: f64,
    /// candidate pairs where some constraint of the rule compared incompatible types
    pub type_mismatches: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SelectivityReport {
    pub rows: Vec<SelectivityRow>,
    pub candidates: usize,
    /// pairs satisfying at least one rule
    pub retained: usize,
    pub retention: f64,
}

fn ratio(a: usize, b: usize) -> f64 {
    if b == 0 {
        0.0
    } else {
        a as f64 / b as f64
    }
}

/// Per-rule retention over the query's Stage-1 candidate pairs.
pub fn rule_selectivity_report(q: &Query, g: &PropertyGraph) -> Result<SelectivityReport, QueryError> {
    let matches = crate::pattern::enumerate_matches(g, &q.pattern, &q.demand)?;
    let candidates = candidate_pairs(&matches, &q.pattern).len();
    let mut stats = FilterStats::default();
    let filtered = filter_inner(&matches, &q.rules, g, &mut stats);
    let rows = q
        .rules
        .iter()
        .enumerate()
        .map(|(i, r)| {
            let retained = filtered.iter().filter(|f| f.rules.contains(&r.id)).count();
            SelectivityRow {
                rule: r.id.clone(),
                retained,
                candidates,
                retention: ratio(retained, candidates),
                type_mismatches: stats.type_mismatch_pairs[i],
            }
        })
        .collect();
    Ok(SelectivityReport {
        rows,
        candidates,
        retained: filtered.len(),
        retention: ratio(filtered.len(), candidates),
    })
}
