use std::path::Path;

use serde::Serialize;
use serde_json::Value;
use sha2::{Digest, Sha256};

use crate::error::CliError;

pub const SCHEMA_VERSION: u32 = 1;
/// Significant digits kept for every floating-point number written out.
pub const SIGNIFICANT_DIGITS: usize = 15;

/// One checked inequality.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Assertion {
    pub name: String,
    pub value: f64,
    pub limit: f64,
    /// `"<="` or `">="`.
    pub relation: &'static str,
    pub passed: bool,
}

impl Assertion {
    pub fn le(name: impl Into<String>, value: f64, limit: f64) -> Self {
        Assertion {
            name: name.into(),
            value,
            limit,
            relation: "<=",
            passed: value <= limit,
        }
    }

    pub fn ge(name: impl Into<String>, value: f64, limit: f64) -> Self {
        Assertion {
            name: name.into(),
            value,
            limit,
            relation: ">=",
            passed: value >= limit,
        }
    }

    /// Boolean check recorded as `value = 1` against `limit = 1`.
    pub fn holds(name: impl Into<String>, ok: bool) -> Self {
        Assertion {
            name: name.into(),
            value: if ok { 1.0 } else { 0.0 },
            limit: 1.0,
            relation: ">=",
            passed: ok,
        }
    }
}

/// A numeric CSV table.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub name: String,
    pub header: Vec<&'static str>,
    pub rows: Vec<Vec<f64>>,
}

impl Table {
    pub fn new(name: impl Into<String>, header: Vec<&'static str>) -> Self {
        Table {
            name: name.into(),
            header,
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<f64>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    pub fn write(&self, dir: &Path) -> Result<(), CliError> {
        let mut w = csv::Writer::from_path(dir.join(format!("{}.csv", self.name)))?;
        w.write_record(&self.header)?;
        for row in &self.rows {
            w.write_record(row.iter().map(|&x| format_number(x)))?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Results, checks and tables of one command.
#[derive(Debug, Clone, Default)]
pub struct TaskOutcome {
    pub results: Value,
    pub assertions: Vec<Assertion>,
    pub tables: Vec<Table>,
}

impl TaskOutcome {
    pub fn passed(&self) -> bool {
        self.assertions.iter().all(|a| a.passed)
    }

    pub fn failed(&self) -> Vec<String> {
        self.assertions
            .iter()
            .filter(|a| !a.passed)
            .map(|a| a.name.clone())
            .collect()
    }
}

pub fn round_sig(x: f64) -> f64 {
    if !x.is_finite() || x == 0.0 {
        return x;
    }
    format!("{:.*e}", SIGNIFICANT_DIGITS - 1, x).parse().unwrap_or(x)
}

fn format_number(x: f64) -> String {
    if x.is_finite() {
        format!("{}", round_sig(x))
    } else {
        x.to_string()
    }
}

/// Rounds every float in a JSON document to [`SIGNIFICANT_DIGITS`].
pub fn round_json(v: Value) -> Value {
    match v {
        Value::Number(n) if n.is_f64() => {
            let x = n.as_f64().unwrap_or(f64::NAN);
            serde_json::Number::from_f64(round_sig(x))
                .map(Value::Number)
                .unwrap_or(Value::Null)
        }
        Value::Array(items) => Value::Array(items.into_iter().map(round_json).collect()),
        Value::Object(map) => Value::Object(map.into_iter().map(|(k, v)| (k, round_json(v))).collect()),
        other => other,
    }
}

pub fn to_json(value: &impl Serialize) -> Result<Value, CliError> {
    Ok(round_json(serde_json::to_value(value)?))
}

/// Per-task seed: the first eight bytes of `SHA-256(master ‖ label)`.
pub fn derive_seed(master: u64, label: &str) -> u64 {
    let mut h = Sha256::new();
    h.update(master.to_le_bytes());
    h.update(label.as_bytes());
    let digest = h.finalize();
    u64::from_le_bytes(digest[..8].try_into().expect("digest has 32 bytes"))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rounding_keeps_fifteen_digits() {
        assert_eq!(round_sig(0.1 + 0.2), 0.3);
        assert_eq!(round_sig(1.0 / 3.0), 0.333333333333333);
        assert_eq!(round_sig(0.0), 0.0);
        assert!(round_sig(f64::NAN).is_nan());
        let v = round_json(serde_json::json!({"a": [0.30000000000000004, 2], "b": {"c": 9.869604401089358}}));
        assert_eq!(v.to_string(), r#"{"a":[0.3,2],"b":{"c":9.86960440108936}}"#);
    }

    #[test]
    fn seeds_are_stable_and_label_dependent() {
        assert_eq!(derive_seed(1, "bounds"), derive_seed(1, "bounds"));
        assert_ne!(derive_seed(1, "bounds"), derive_seed(2, "bounds"));
        assert_ne!(derive_seed(1, "bounds"), derive_seed(1, "flow"));
    }

    #[test]
    fn assertions() {
        assert!(Assertion::le("x", 1.0, 1.0).passed);
        assert!(!Assertion::le("x", f64::NAN, 1.0).passed);
        assert!(!Assertion::ge("x", 0.5, 1.0).passed);
        assert!(Assertion::holds("x", true).passed);
    }

    #[test]
    fn csv_tables() {
        let dir = tempfile::tempdir().unwrap();
        let mut t = Table::new("demo", vec!["t", "alpha"]);
        t.push(vec![0.5, 1.0 / 3.0]);
        t.write(dir.path()).unwrap();
        let text = std::fs::read_to_string(dir.path().join("demo.csv")).unwrap();
        assert_eq!(text, "t,alpha\n0.5,0.333333333333333\n");
    }
}
