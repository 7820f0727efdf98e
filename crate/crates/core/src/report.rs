use std::collections::BTreeMap;

use serde::Serialize;

/// Outcome of one inequality check: passes iff `slack = rhs − lhs ≥ −tolerance`.
#[derive(Clone, Debug, Serialize, PartialEq)]
pub struct CheckReport {
    pub check: String,
    pub p: f64,
    pub grid: Vec<usize>,
    pub passed: bool,
    pub lhs: f64,
    pub rhs: f64,
    pub slack: f64,
    pub tolerance: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub witness: Option<String>,
    #[serde(skip_serializing_if = "BTreeMap::is_empty")]
    pub details: BTreeMap<String, f64>,
}

impl CheckReport {
    pub fn new(check: &str, p: f64, grid: &[usize], lhs: f64, rhs: f64, tolerance: f64) -> Self {
        let slack = rhs - lhs;
        Self {
            check: check.to_string(),
            p,
            grid: grid.to_vec(),
            passed: slack >= -tolerance && slack.is_finite(),
            lhs,
            rhs,
            slack,
            tolerance,
            witness: None,
            details: BTreeMap::new(),
        }
    }

    pub fn with_detail(mut self, key: &str, value: f64) -> Self {
        self.details.insert(key.to_string(), value);
        self
    }

    pub fn with_witness(mut self, witness: impl Into<String>) -> Self {
        self.witness = Some(witness.into());
        self
    }

    /// Forces failure (for conditions beyond the scalar inequality).
    pub fn fail(mut self, witness: impl Into<String>) -> Self {
        self.passed = false;
        self.witness = Some(witness.into());
        self
    }

    /// Every numeric field finite.
    pub fn is_finite(&self) -> bool {
        [self.p, self.lhs, self.rhs, self.slack, self.tolerance]
            .iter()
            .chain(self.details.values())
            .all(|x| x.is_finite())
    }
}
