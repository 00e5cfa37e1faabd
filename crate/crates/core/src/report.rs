//! PASS/FAIL records produced by the verification routines.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub measured: f64,
    /// The bound the measured value is compared against.
    pub limit: f64,
    pub passed: bool,
}

impl Check {
    /// Passes when `measured ≤ limit`.
    pub fn at_most(name: impl Into<String>, measured: f64, limit: f64) -> Self {
        Self { name: name.into(), measured, limit, passed: measured <= limit }
    }

    /// Passes when `measured ≥ limit`.
    pub fn at_least(name: impl Into<String>, measured: f64, limit: f64) -> Self {
        Self { name: name.into(), measured, limit, passed: measured >= limit }
    }

    pub fn flag(name: impl Into<String>, passed: bool) -> Self {
        let v = if passed { 1.0 } else { 0.0 };
        Self { name: name.into(), measured: v, limit: 1.0, passed }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub checks: Vec<Check>,
}

impl Report {
    pub fn push(&mut self, c: Check) {
        self.checks.push(c);
    }

    pub fn extend(&mut self, other: Report) {
        self.checks.extend(other.checks);
    }

    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn failures(&self) -> Vec<&Check> {
        self.checks.iter().filter(|c| !c.passed).collect()
    }
}
