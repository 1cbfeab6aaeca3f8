use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

/// Scalar or text metadata attached to a report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum MetaValue {
    Number(f64),
    Text(String),
}

impl From<f64> for MetaValue {
    fn from(v: f64) -> Self {
        MetaValue::Number(v)
    }
}

impl From<usize> for MetaValue {
    fn from(v: usize) -> Self {
        MetaValue::Number(v as f64)
    }
}

impl From<String> for MetaValue {
    fn from(v: String) -> Self {
        MetaValue::Text(v)
    }
}

impl From<&str> for MetaValue {
    fn from(v: &str) -> Self {
        MetaValue::Text(v.to_owned())
    }
}

/// Machine-readable pass/fail record of one check.
///
/// `pass` is true exactly when `measured` satisfies the check's inequality
/// against `bound` within `tolerance`; the direction of the inequality is
/// part of the check's definition and spelled out in `relation`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerificationReport {
    pub check: String,
    pub pass: bool,
    pub measured: f64,
    pub bound: f64,
    pub tolerance: f64,
    pub relation: String,
    pub worst_t: Option<f64>,
    pub worst_x: Option<f64>,
    pub metadata: BTreeMap<String, MetaValue>,
}

impl VerificationReport {
    /// `measured ≥ bound − tolerance`.
    pub fn at_least(check: &str, measured: f64, bound: f64, tolerance: f64) -> Self {
        Self::build(
            check,
            measured >= bound - tolerance,
            measured,
            bound,
            tolerance,
            "measured >= bound - tolerance",
        )
    }

    /// `measured ≤ bound + tolerance`.
    pub fn at_most(check: &str, measured: f64, bound: f64, tolerance: f64) -> Self {
        Self::build(
            check,
            measured <= bound + tolerance,
            measured,
            bound,
            tolerance,
            "measured <= bound + tolerance",
        )
    }

    /// `measured ≥ bound·(1 − tolerance)`.
    pub fn at_least_relative(check: &str, measured: f64, bound: f64, tolerance: f64) -> Self {
        Self::build(
            check,
            measured >= bound * (1.0 - tolerance),
            measured,
            bound,
            tolerance,
            "measured >= bound * (1 - tolerance)",
        )
    }

    fn build(check: &str, pass: bool, measured: f64, bound: f64, tolerance: f64, relation: &str) -> Self {
        Self {
            check: check.to_owned(),
            pass: pass && measured.is_finite(),
            measured,
            bound,
            tolerance,
            relation: relation.to_owned(),
            worst_t: None,
            worst_x: None,
            metadata: BTreeMap::new(),
        }
    }

    pub fn at(mut self, t: f64, x: f64) -> Self {
        self.worst_t = Some(t);
        self.worst_x = Some(x);
        self
    }

    pub fn with(mut self, key: &str, value: impl Into<MetaValue>) -> Self {
        self.metadata.insert(key.to_owned(), value.into());
        self
    }

    /// One-line summary, `PASS`/`FAIL` first.
    pub fn summary(&self) -> String {
        format!(
            "{} {}: measured={:.6e} bound={:.6e} tol={:.1e}",
            if self.pass { "PASS" } else { "FAIL" },
            self.check,
            self.measured,
            self.bound,
            self.tolerance
        )
    }
}
