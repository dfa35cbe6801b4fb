//! Selection predicates carried by a query ("the user's demand").

use std::cmp::Ordering;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::graph::AttrValue;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum DemandOp {
    #[serde(rename = "<")]
    Lt,
    #[serde(rename = "<=")]
    Le,
    #[serde(rename = "=")]
    Eq,
    #[serde(rename = ">=")]
    Ge,
    #[serde(rename = ">")]
    Gt,
    #[serde(rename = "contains")]
    Contains,
}

impl fmt::Display for DemandOp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            DemandOp::Lt => "<",
            DemandOp::Le => "<=",
            DemandOp::Eq => "=",
            DemandOp::Ge => ">=",
            DemandOp::Gt => ">",
            DemandOp::Contains => "contains",
        })
    }
}

/// `var.attr op value`, e.g. `x.Age > 18`.
#[derive(Debug, Clone, PartialEq)]
pub struct DemandPredicate {
    pub var: String,
    pub attr: String,
    pub op: DemandOp,
    pub value: AttrValue,
}

impl DemandPredicate {
    pub fn new(var: &str, attr: &str, op: DemandOp, value: impl Into<AttrValue>) -> Self {
        Self {
            var: var.to_string(),
            attr: attr.to_string(),
            op,
            value: value.into(),
        }
    }

    /// Tests a single attribute value. Absent values and type mismatches fail.
    pub fn test(&self, actual: &AttrValue) -> bool {
        let ord = match (actual, &self.value) {
            (AttrValue::Number(a), AttrValue::Number(b)) => a.partial_cmp(b),
            (AttrValue::Text(a), AttrValue::Text(b)) => {
                if self.op == DemandOp::Contains {
                    return a.contains(b.as_str());
                }
                Some(a.as_str().cmp(b.as_str()))
            }
            _ => None,
        };
        let Some(ord) = ord else { return false };
        match self.op {
            DemandOp::Lt => ord == Ordering::Less,
            DemandOp::Le => ord != Ordering::Greater,
            DemandOp::Eq => ord == Ordering::Equal,
            DemandOp::Ge => ord != Ordering::Less,
            DemandOp::Gt => ord == Ordering::Greater,
            DemandOp::Contains => false,
        }
    }
}

impl fmt::Display for DemandPredicate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}.{} {} {}", self.var, self.attr, self.op, self.value)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn numeric_and_text_comparisons() {
        let p = DemandPredicate::new("x", "Age", DemandOp::Gt, 18.0);
        assert!(p.test(&AttrValue::Number(19.0)));
        assert!(!p.test(&AttrValue::Number(18.0)));
        assert!(!p.test(&AttrValue::Absent));
        assert!(!p.test(&AttrValue::Text("19x".into())));

        let c = DemandPredicate::new("x", "City", DemandOp::Contains, "ham");
        assert!(c.test(&AttrValue::Text("Wuhampton".into())));
        assert!(!c.test(&AttrValue::Number(1.0)));

        let e = DemandPredicate::new("x", "City", DemandOp::Eq, "Oslo");
        assert!(e.test(&AttrValue::Text("Oslo".into())));
        assert!(!e.test(&AttrValue::Text("oslo".into())));
        assert!(DemandPredicate::new("x", "A", DemandOp::Le, 3.0).test(&AttrValue::Number(3.0)));
        assert!(DemandPredicate::new("x", "A", DemandOp::Ge, 3.0).test(&AttrValue::Number(3.0)));
        assert!(DemandPredicate::new("x", "A", DemandOp::Lt, 3.0).test(&AttrValue::Number(2.0)));
    }
}
