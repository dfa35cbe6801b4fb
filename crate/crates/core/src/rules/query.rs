//! Query documents: pattern, demand, rules and run parameters in one JSON file.

use std::collections::{BTreeMap, HashSet};
use std::path::Path;

use serde::Deserialize;
use thiserror::Error;

use super::{ConstraintKind, DemandOp, DemandPredicate, DistanceConstraint, GddRule, Metric, RuleError};
use crate::aggregate::Aggregation;
use crate::blocking::Weighting;
use crate::graph::AttrValue;
use crate::pattern::{GraphPattern, LabelSpec, PatternEdge, PatternError, PatternNode};

pub const DEFAULT_THRESHOLD: f64 = 2.0;

#[derive(Debug, Clone, PartialEq)]
pub struct Query {
    pub pattern: GraphPattern,
    pub demand: Vec<DemandPredicate>,
    pub rules: Vec<GddRule>,
    pub weighting: Weighting,
    pub threshold: f64,
    pub aggregation: BTreeMap<String, Aggregation>,
}

#[derive(Debug, Error)]
pub enum QueryError {
    #[error("schema error at {path}: {message}")]
    SchemaError { path: String, message: String },
    #[error("undeclared variable {0:?}")]
    UndeclaredVariable(String),
    #[error("bad threshold: {0}")]
    BadThreshold(String),
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

fn schema(path: impl Into<String>, message: impl Into<String>) -> QueryError {
    QueryError::SchemaError {
        path: path.into(),
        message: message.into(),
    }
}

impl From<PatternError> for QueryError {
    fn from(e: PatternError) -> Self {
        match e {
            PatternError::UndeclaredVariable(v) | PatternError::UnboundVariableInDemand(v) => {
                QueryError::UndeclaredVariable(v)
            }
            other => schema("pattern", other.to_string()),
        }
    }
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawQuery {
    pattern: RawPattern,
    #[serde(default)]
    demand: Vec<RawDemand>,
    rules: Vec<RawRule>,
    #[serde(default)]
    weighting: Weighting,
    #[serde(default = "default_threshold")]
    threshold: f64,
    #[serde(default)]
    aggregation: BTreeMap<String, Aggregation>,
}

fn default_threshold() -> f64 {
    DEFAULT_THRESHOLD
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawPattern {
    nodes: Vec<RawNode>,
    #[serde(default)]
    edges: Vec<RawEdge>,
    duplicates: [String; 2],
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawNode {
    var: String,
    label: LabelSpec,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawEdge {
    src: String,
    label: LabelSpec,
    dst: String,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawDemand {
    var: String,
    attr: String,
    op: DemandOp,
    value: serde_json::Value,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawRule {
    id: String,
    lhs: Vec<RawConstraint>,
    rhs: Vec<RawConstraint>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConstraint {
    kind: ConstraintKind,
    vars: Vec<String>,
    #[serde(default)]
    attrs: Vec<String>,
    #[serde(default)]
    metric: Metric,
    #[serde(default)]
    threshold: f64,
    #[serde(default)]
    constant: Option<serde_json::Value>,
}

pub fn parse_query(file: impl AsRef<Path>) -> Result<Query, QueryError> {
    let p = file.as_ref();
    let text = std::fs::read_to_string(p).map_err(|source| QueryError::Io {
        path: p.display().to_string(),
        source,
    })?;
    parse_query_str(&text)
}

pub fn parse_query_str(text: &str) -> Result<Query, QueryError> {
    let de = &mut serde_json::Deserializer::from_str(text);
    let raw: RawQuery = serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        schema(
            if path.is_empty() { "$".to_string() } else { path },
            e.into_inner().to_string(),
        )
    })?;
    build(raw)
}

fn rule_error(path: String, e: RuleError) -> QueryError {
    match e {
        RuleError::UndeclaredVariable(v) => QueryError::UndeclaredVariable(v),
        RuleError::BadThreshold(m) => QueryError::BadThreshold(format!("{path}: {m}")),
        RuleError::Malformed(m) => schema(path, m),
    }
}

fn build(raw: RawQuery) -> Result<Query, QueryError> {
    let pattern = GraphPattern {
        nodes: raw
            .pattern
            .nodes
            .into_iter()
            .map(|n| PatternNode {
                var: n.var,
                label: n.label,
            })
            .collect(),
        edges: raw
            .pattern
            .edges
            .into_iter()
            .map(|e| PatternEdge {
                src: e.src,
                label: e.label,
                dst: e.dst,
            })
            .collect(),
        duplicates: {
            let [a, b] = raw.pattern.duplicates;
            Some((a, b))
        },
    };
    // undeclared duplicate vars read better as an undeclared-variable error
    if let Some((a, b)) = &pattern.duplicates {
        for v in [a, b] {
            if pattern.slot(v).is_none() {
                return Err(QueryError::UndeclaredVariable(v.clone()));
            }
        }
    }
    pattern.validate()?;

    let mut demand = Vec::with_capacity(raw.demand.len());
    for (i, d) in raw.demand.into_iter().enumerate() {
        if pattern.slot(&d.var).is_none() {
            return Err(QueryError::UndeclaredVariable(d.var));
        }
        let value = AttrValue::from_json(&d.value).map_err(|m| schema(format!("demand[{i}].value"), m))?;
        if value.is_absent() {
            return Err(schema(format!("demand[{i}].value"), "value must not be null"));
        }
        if d.op == DemandOp::Contains && value.as_text().is_none() {
            return Err(schema(format!("demand[{i}].value"), "contains requires a text value"));
        }
        demand.push(DemandPredicate {
            var: d.var,
            attr: d.attr,
            op: d.op,
            value,
        });
    }

    if raw.rules.is_empty() {
        return Err(schema("rules", "at least one rule is required"));
    }
    let mut ids = HashSet::new();
    let mut rules = Vec::with_capacity(raw.rules.len());
    for (ri, r) in raw.rules.into_iter().enumerate() {
        if !ids.insert(r.id.clone()) {
            return Err(schema(
                format!("rules[{ri}].id"),
                format!("duplicate rule id {:?}", r.id),
            ));
        }
        let convert = |side: &str, list: Vec<RawConstraint>| -> Result<Vec<DistanceConstraint>, QueryError> {
            list.into_iter()
                .enumerate()
                .map(|(ci, c)| {
                    let path = format!("rules[{ri}].{side}[{ci}]");
                    let constant = match c.constant {
                        None => None,
                        Some(v) => Some(AttrValue::from_json(&v).map_err(|m| schema(format!("{path}.constant"), m))?),
                    };
                    let dc = DistanceConstraint {
                        kind: c.kind,
                        vars: c.vars,
                        attrs: c.attrs,
                        constant,
                        metric: c.metric,
                        threshold: c.threshold,
                    };
                    dc.validate(&pattern).map_err(|e| rule_error(path, e))?;
                    Ok(dc)
                })
                .collect()
        };
        let lhs = convert("lhs", r.lhs)?;
        let rhs = convert("rhs", r.rhs)?;
        let rule = GddRule {
            id: r.id,
            pattern: pattern.clone(),
            lhs,
            rhs,
        };
        rule.validate().map_err(|e| rule_error(format!("rules[{ri}].rhs"), e))?;
        rules.push(rule);
    }

    if !raw.threshold.is_finite() || raw.threshold < 0.0 {
        return Err(QueryError::BadThreshold(format!(
            "edge weight threshold {} must be a non-negative number",
            raw.threshold
        )));
    }

    Ok(Query {
        pattern,
        demand,
        rules,
        weighting: raw.weighting,
        threshold: raw.threshold,
        aggregation: raw.aggregation,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"{
        "pattern": {"nodes": [{"var": "x", "label": "user"}, {"var": "x'", "label": "user"}],
                    "edges": [{"src": "x", "label": "knows", "dst": "x'"}],
                    "duplicates": ["x", "x'"]},
        "rules": [{"id": "r1",
                   "lhs": [{"kind": "attr_attr", "vars": ["x", "x'"], "attrs": ["Name"], "metric": "edit", "threshold": 1}],
                   "rhs": [{"kind": "eid_eid", "vars": ["x", "x'"]}]}]
    }"#;

    #[test]
    fn minimal_query_defaults() {
        let q = parse_query_str(MINIMAL).unwrap();
        assert_eq!(q.threshold, 2.0);
        assert_eq!(q.weighting, Weighting::Count);
        assert!(q.demand.is_empty());
        assert!(q.aggregation.is_empty());
        assert_eq!(q.rules.len(), 1);
        assert_eq!(q.rules[0].lhs.len(), 1);
    }

    #[test]
    fn example_three_rule() {
        let text = r#"{
            "pattern": {"nodes": [{"var": "x", "label": "user"}, {"var": "x'", "label": "user"}, {"var": "y", "label": "platform"}],
                        "edges": [{"src": "x", "label": "watched", "dst": "y"}, {"src": "x'", "label": "watched", "dst": "y"}],
                        "duplicates": ["x", "x'"]},
            "rules": [{"id": "age-phone",
                       "lhs": [{"kind": "attr_attr", "vars": ["x", "x'"], "attrs": ["Age", "Age"], "metric": "absdiff", "threshold": 3},
                               {"kind": "attr_attr", "vars": ["x", "x'"], "attrs": ["Phone", "Phone"], "metric": "exact", "threshold": 0}],
                       "rhs": [{"kind": "eid_eid", "vars": ["x", "x'"], "metric": "exact", "threshold": 0}]}],
            "weighting": "arcs", "threshold": 0.5, "aggregation": {"Age": "max"}
        }"#;
        let q = parse_query_str(text).unwrap();
        assert_eq!(q.rules.len(), 1);
        assert_eq!(q.rules[0].lhs.len(), 2);
        assert_eq!(q.weighting, Weighting::Arcs);
        assert_eq!(q.aggregation["Age"], Aggregation::Max);
    }

    #[test]
    fn undeclared_lhs_variable() {
        let text = MINIMAL.replace(
            r#""vars": ["x", "x'"], "attrs": ["Name"]"#,
            r#""vars": ["x", "z"], "attrs": ["Name"]"#,
        );
        match parse_query_str(&text) {
            Err(QueryError::UndeclaredVariable(v)) => assert_eq!(v, "z"),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn unknown_fields_are_rejected_with_path() {
        let text = MINIMAL.replace(r#""id": "r1","#, r#""id": "r1", "weight": 3,"#);
        match parse_query_str(&text) {
            Err(QueryError::SchemaError { path, .. }) => assert_eq!(path, "rules[0].weight"),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn bad_thresholds() {
        let text = MINIMAL.replace(r#""rules""#, r#""threshold": -1, "rules""#);
        assert!(matches!(parse_query_str(&text), Err(QueryError::BadThreshold(_))));
        let text = MINIMAL.replace(r#""threshold": 1"#, r#""threshold": -2"#);
        assert!(matches!(parse_query_str(&text), Err(QueryError::BadThreshold(_))));
        let text = MINIMAL.replace(
            r#"{"kind": "eid_eid", "vars": ["x", "x'"]}"#,
            r#"{"kind": "eid_eid", "vars": ["x", "x'"], "threshold": 1}"#,
        );
        assert!(matches!(parse_query_str(&text), Err(QueryError::BadThreshold(_))));
    }

    #[test]
    fn demand_validation() {
        let with = |d: &str| MINIMAL.replace(r#""rules""#, &format!(r#""demand": [{d}], "rules""#));
        let q = parse_query_str(&with(r#"{"var": "x", "attr": "Age", "op": ">", "value": 18}"#)).unwrap();
        assert_eq!(q.demand[0].value, AttrValue::Number(18.0));
        assert!(matches!(
            parse_query_str(&with(r#"{"var": "x", "attr": "Age", "op": "contains", "value": 18}"#)),
            Err(QueryError::SchemaError { .. })
        ));
        assert!(matches!(
            parse_query_str(&with(r#"{"var": "w", "attr": "Age", "op": ">", "value": 18}"#)),
            Err(QueryError::UndeclaredVariable(v)) if v == "w"
        ));
        assert!(matches!(
            parse_query_str(&with(r#"{"var": "x", "attr": "Age", "op": "!=", "value": 18}"#)),
            Err(QueryError::SchemaError { .. })
        ));
    }

    #[test]
    fn empty_rules_and_bad_rhs() {
        let text = r#"{"pattern": {"nodes": [{"var": "x", "label": "u"}, {"var": "x'", "label": "u"}],
                       "edges": [{"src": "x", "label": "e", "dst": "x'"}], "duplicates": ["x", "x'"]},
                       "rules": []}"#;
        assert!(matches!(parse_query_str(text), Err(QueryError::SchemaError { path, .. }) if path == "rules"));
        let text = MINIMAL.replace(
            r#"{"kind": "eid_eid", "vars": ["x", "x'"]}"#,
            r#"{"kind": "attr_attr", "vars": ["x", "x'"], "attrs": ["A"]}"#,
        );
        assert!(matches!(parse_query_str(&text), Err(QueryError::SchemaError { .. })));
    }

    #[test]
    fn disconnected_pattern_is_a_schema_error() {
        let text = MINIMAL.replace(r#""edges": [{"src": "x", "label": "knows", "dst": "x'"}],"#, "");
        assert!(matches!(parse_query_str(&text), Err(QueryError::SchemaError { .. })));
    }
}
