use serde::Serialize;
use serde_value::Value;

use crate::error::Error;
use crate::report::CheckReport;

/// Machine-readable outcome of one command.
#[derive(Clone, Debug, Serialize)]
pub struct Report {
    pub command: String,
    pub inputs: serde_json::Value,
    pub values: serde_json::Value,
    pub checks: Vec<CheckReport>,
    /// Smallest slack over the checks, with that check's tolerance.
    pub slack: Option<f64>,
    pub tolerance: Option<f64>,
    pub pass: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    #[serde(skip)]
    pub table: Option<Table>,
    #[serde(skip)]
    finite: bool,
}

/// Plot-ready rows for `--csv`.
#[derive(Clone, Debug, Default)]
pub struct Table {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(columns: &[&str]) -> Self {
        Self {
            columns: columns.iter().map(|c| c.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<String>) {
        self.rows.push(row);
    }

    pub fn checks(checks: &[CheckReport]) -> Self {
        let mut t = Self::new(&["check", "p", "passed", "lhs", "rhs", "slack", "tolerance"]);
        for c in checks {
            t.push(vec![
                c.check.clone(),
                c.p.to_string(),
                c.passed.to_string(),
                c.lhs.to_string(),
                c.rhs.to_string(),
                c.slack.to_string(),
                c.tolerance.to_string(),
            ]);
        }
        t
    }
}

/// Why a command produced no regular report.
#[derive(Debug)]
pub enum Failure {
    Config(Error),
    Compute { error: Error, report: Option<Report> },
}

impl From<Error> for Failure {
    fn from(error: Error) -> Self {
        Failure::Compute { error, report: None }
    }
}

pub(crate) fn config_err(e: Error) -> Failure {
    Failure::Config(e)
}

impl Report {
    pub fn new<T: Serialize>(command: &str, inputs: &T) -> Self {
        let mut r = Self {
            command: command.to_string(),
            inputs: serde_json::Value::Null,
            values: serde_json::Value::Null,
            checks: Vec::new(),
            slack: None,
            tolerance: None,
            pass: true,
            error: None,
            table: None,
            finite: true,
        };
        r.inputs = r.convert(inputs);
        r
    }

    /// Converts through an intermediate tree that keeps non-finite floats
    /// visible (JSON would silently turn them into `null`).
    fn convert<T: Serialize>(&mut self, x: &T) -> serde_json::Value {
        match serde_value::to_value(x) {
            Ok(v) => {
                if !finite(&v) {
                    self.finite = false;
                }
                serde_json::to_value(x).unwrap_or(serde_json::Value::Null)
            }
            Err(_) => {
                self.finite = false;
                serde_json::Value::Null
            }
        }
    }

    pub fn with_values<T: Serialize>(mut self, values: &T) -> Self {
        self.values = self.convert(values);
        self
    }

    pub fn with_checks(mut self, checks: Vec<CheckReport>) -> Self {
        self.checks.extend(checks);
        self.summarize();
        self
    }

    pub fn with_table(mut self, table: Table) -> Self {
        self.table = Some(table);
        self
    }

    pub fn with_error(mut self, error: &Error) -> Self {
        self.error = Some(error.to_string());
        self.pass = false;
        self
    }

    fn summarize(&mut self) {
        self.pass = self.error.is_none() && self.checks.iter().all(|c| c.passed);
        let worst = self
            .checks
            .iter()
            .min_by(|a, b| (a.slack + a.tolerance).total_cmp(&(b.slack + b.tolerance)));
        self.slack = worst.map(|c| c.slack);
        self.tolerance = worst.map(|c| c.tolerance);
        if self.checks.iter().any(|c| !c.is_finite()) {
            self.finite = false;
        }
    }

    /// Every number in inputs, values and checks is finite.
    pub fn is_finite(&self) -> bool {
        self.finite
    }

    pub fn to_json(&self) -> std::io::Result<String> {
        let mut s = serde_json::to_string_pretty(self)?;
        s.push('\n');
        Ok(s)
    }

    pub fn to_csv(&self) -> std::io::Result<Vec<u8>> {
        let fallback;
        let table = match &self.table {
            Some(t) => t,
            None => {
                fallback = Table::checks(&self.checks);
                &fallback
            }
        };
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(&table.columns)?;
        for row in &table.rows {
            w.write_record(row)?;
        }
        w.into_inner().map_err(|e| std::io::Error::other(e.to_string()))
    }
}

fn finite(v: &Value) -> bool {
    match v {
        Value::F64(x) => x.is_finite(),
        Value::F32(x) => x.is_finite(),
        Value::Option(Some(b)) | Value::Newtype(b) => finite(b),
        Value::Seq(s) => s.iter().all(finite),
        Value::Map(m) => m.iter().all(|(k, v)| finite(k) && finite(v)),
        _ => true,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[derive(Serialize)]
    struct V {
        a: f64,
        b: Vec<f64>,
    }

    #[test]
    fn non_finite_values_are_detected() {
        let r = Report::new("x", &1.0).with_values(&V { a: 1.0, b: vec![2.0] });
        assert!(r.is_finite());
        let r = Report::new("x", &1.0).with_values(&V { a: 1.0, b: vec![f64::NAN] });
        assert!(!r.is_finite());
    }

    #[test]
    fn summary_picks_worst_check() {
        let r = Report::new("x", &()).with_checks(vec![
            CheckReport::new("a", 2.0, &[3], 0.0, 1.0, 0.0),
            CheckReport::new("b", 2.0, &[3], 1.0, 0.5, 0.1),
        ]);
        assert!(!r.pass);
        assert_eq!(r.slack, Some(-0.5));
        assert_eq!(r.tolerance, Some(0.1));
        let csv = String::from_utf8(r.to_csv().unwrap()).unwrap();
        assert!(csv.starts_with("check,p,passed"));
        assert_eq!(csv.lines().count(), 3);
    }
}
