//! Entity-level attribute view of a cluster, used to re-check demand before
//! a cluster is emitted.
//!
//! Numeric attributes aggregate with `min`/`max`/`avg`, text with `vote`
//! (most frequent, ties to the lexically smallest) or `any` (the attribute
//! passes a predicate if any member value does). Attributes without an
//! explicit aggregation use `vote`. Absent values are ignored.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::graph::{AttrValue, NodeIx, PropertyGraph};
use crate::pattern::GraphPattern;
use crate::rules::DemandPredicate;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Aggregation {
    Min,
    Max,
    Avg,
    Vote,
    Any,
}

#[derive(Debug, Clone, PartialEq)]
pub enum ViewValue {
    Value(AttrValue),
    /// distinct member values, sorted
    AnyOf(Vec<AttrValue>),
}

impl ViewValue {
    pub fn satisfies(&self, pred: &DemandPredicate) -> bool {
        match self {
            ViewValue::Value(v) => pred.test(v),
            ViewValue::AnyOf(vs) => vs.iter().any(|v| pred.test(v)),
        }
    }
}

pub type AggregatedView = BTreeMap<String, ViewValue>;

fn sort_key(v: &AttrValue) -> (u8, String) {
    match v {
        AttrValue::Number(_) => (0, String::new()),
        AttrValue::Text(s) => (1, s.clone()),
        AttrValue::Absent => (2, String::new()),
    }
}

fn cmp_values(a: &AttrValue, b: &AttrValue) -> std::cmp::Ordering {
    match (a, b) {
        (AttrValue::Number(x), AttrValue::Number(y)) => x.total_cmp(y),
        _ => sort_key(a).cmp(&sort_key(b)),
    }
}

fn reduce(values: &[&AttrValue], how: Aggregation) -> Option<ViewValue> {
    let nums = || values.iter().filter_map(|v| v.as_number());
    match how {
        Aggregation::Min => nums()
            .min_by(f64::total_cmp)
            .map(|v| ViewValue::Value(AttrValue::Number(v))),
        Aggregation::Max => nums()
            .max_by(f64::total_cmp)
            .map(|v| ViewValue::Value(AttrValue::Number(v))),
        Aggregation::Avg => {
            let (sum, n) = nums().fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
            (n > 0).then(|| ViewValue::Value(AttrValue::Number(sum / n as f64)))
        }
        Aggregation::Vote => {
            let mut sorted: Vec<&AttrValue> = values.to_vec();
            sorted.sort_by(|a, b| cmp_values(a, b));
            let mut best: Option<(&AttrValue, usize)> = None;
            let mut i = 0;
            while i < sorted.len() {
                let mut j = i;
                while j < sorted.len() && sorted[j] == sorted[i] {
                    j += 1;
                }
                // strictly greater keeps the earliest (smallest) value on ties
                if best.is_none_or(|(_, c)| j - i > c) {
                    best = Some((sorted[i], j - i));
                }
                i = j;
            }
            best.map(|(v, _)| ViewValue::Value(v.clone()))
        }
        Aggregation::Any => {
            let mut distinct: Vec<AttrValue> = values.iter().map(|v| (*v).clone()).collect();
            distinct.sort_by(cmp_values);
            distinct.dedup();
            (!distinct.is_empty()).then_some(ViewValue::AnyOf(distinct))
        }
    }
}

/// Aggregated attribute view over `members`.
pub fn aggregate_view(
    members: &[NodeIx],
    aggregation: &BTreeMap<String, Aggregation>,
    g: &PropertyGraph,
) -> AggregatedView {
    let mut by_attr: BTreeMap<&str, Vec<&AttrValue>> = BTreeMap::new();
    for &m in members {
        for (k, v) in g.attrs(m) {
            if !v.is_absent() {
                by_attr.entry(k.as_str()).or_default().push(v);
            }
        }
    }
    by_attr
        .into_iter()
        .filter_map(|(k, vals)| {
            let how = aggregation.get(k).copied().unwrap_or(Aggregation::Vote);
            reduce(&vals, how).map(|v| (k.to_string(), v))
        })
        .collect()
}

/// Demand predicates that constrain the duplicate variables, i.e. the
/// entity itself rather than its context.
pub fn entity_demand<'a>(pattern: &GraphPattern, demand: &'a [DemandPredicate]) -> Vec<&'a DemandPredicate> {
    match &pattern.duplicates {
        Some((x, xp)) => demand.iter().filter(|d| &d.var == x || &d.var == xp).collect(),
        None => Vec::new(),
    }
}

/// Every predicate holds on the view; attributes missing from the view fail.
pub fn view_satisfies(view: &AggregatedView, preds: &[&DemandPredicate]) -> bool {
    preds.iter().all(|p| view.get(&p.attr).is_some_and(|v| v.satisfies(p)))
}
