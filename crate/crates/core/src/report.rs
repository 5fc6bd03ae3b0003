use std::fmt;

use serde::Serialize;

use crate::ratfunc::RatFunc;

/// Outcome of one named identity or property check.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Check {
    pub label: String,
    pub passed: bool,
    /// Nonzero residual or other diagnostic when the check failed.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub detail: Option<String>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct Report {
    pub title: String,
    pub checks: Vec<Check>,
}

impl Report {
    pub fn new(title: impl Into<String>) -> Self {
        Report {
            title: title.into(),
            checks: Vec::new(),
        }
    }

    pub fn push(&mut self, label: impl Into<String>, passed: bool, detail: Option<String>) {
        self.checks.push(Check {
            label: label.into(),
            passed,
            detail,
        });
    }

    /// Records a semantic-zero check, keeping the residual on failure.
    pub fn push_zero(&mut self, label: impl Into<String>, residual: &RatFunc) {
        let passed = residual.is_zero();
        let detail = (!passed).then(|| residual.to_string());
        self.push(label, passed, detail);
    }

    pub fn extend(&mut self, other: Report) {
        self.checks.extend(other.checks);
    }

    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn failures(&self) -> impl Iterator<Item = &Check> {
        self.checks.iter().filter(|c| !c.passed)
    }

    pub fn len(&self) -> usize {
        self.checks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.checks.is_empty()
    }
}

impl fmt::Display for Report {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "{}", self.title)?;
        for c in &self.checks {
            let mark = if c.passed { "ok  " } else { "FAIL" };
            match &c.detail {
                Some(d) => writeln!(f, "  {mark} {}: {d}", c.label)?,
                None => writeln!(f, "  {mark} {}", c.label)?,
            }
        }
        Ok(())
    }
}
