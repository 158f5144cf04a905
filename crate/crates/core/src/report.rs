//! Named pass/fail checks and their JSON report.

use serde::{Deserialize, Serialize};

/// Direction of a threshold comparison.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Bound {
    /// Passes when `value < threshold`.
    Below,
    /// Passes when `value > threshold`.
    Above,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub value: f64,
    pub threshold: f64,
    pub bound: Bound,
    pub pass: bool,
    /// The check is a negative control and is expected to fail.
    #[serde(default)]
    pub expect_fail: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub detail: Option<String>,
}

impl Check {
    pub fn new(name: impl Into<String>, value: f64, threshold: f64, bound: Bound) -> Self {
        let pass = match bound {
            Bound::Below => value < threshold,
            Bound::Above => value > threshold,
        };
        Check { name: name.into(), value, threshold, bound, pass, expect_fail: false, detail: None }
    }

    pub fn below(name: impl Into<String>, value: f64, threshold: f64) -> Self {
        Self::new(name, value, threshold, Bound::Below)
    }

    pub fn above(name: impl Into<String>, value: f64, threshold: f64) -> Self {
        Self::new(name, value, threshold, Bound::Above)
    }

    /// A check that could not be evaluated.
    pub fn failed(name: impl Into<String>, reason: impl Into<String>) -> Self {
        Check {
            name: name.into(),
            value: f64::NAN,
            threshold: f64::NAN,
            bound: Bound::Below,
            pass: false,
            expect_fail: false,
            detail: Some(reason.into()),
        }
    }

    pub fn with_detail(mut self, detail: impl Into<String>) -> Self {
        self.detail = Some(detail.into());
        self
    }

    pub fn expecting_failure(mut self, expect_fail: bool) -> Self {
        self.expect_fail = expect_fail;
        self
    }

    /// Outcome matches expectation.
    pub fn ok(&self) -> bool {
        self.pass != self.expect_fail
    }

    pub fn line(&self) -> String {
        let op = match self.bound {
            Bound::Below => "<",
            Bound::Above => ">",
        };
        let verdict = match (self.pass, self.expect_fail) {
            (true, false) => "PASS",
            (false, false) => "FAIL",
            (false, true) => "FAIL (expected)",
            (true, true) => "PASS (unexpected)",
        };
        let mut s = format!("{verdict:<17} {}: {:.3e} {op} {:e}", self.name, self.value, self.threshold);
        if let Some(d) = &self.detail {
            s.push_str(&format!(" [{d}]"));
        }
        s
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub scenario: String,
    pub checks: Vec<Check>,
    pub all_ok: bool,
}

impl Report {
    pub fn new(scenario: impl Into<String>, checks: Vec<Check>) -> Self {
        let all_ok = checks.iter().all(Check::ok);
        Report { scenario: scenario.into(), checks, all_ok }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("reports serialize")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn expect_fail_inverts_outcome() {
        let c = Check::below("x", 2.0, 1.0);
        assert!(!c.pass && !c.ok());
        let c = c.expecting_failure(true);
        assert!(c.ok());
        assert!(Check::above("y", 2.0, 1.0).ok());
        assert!(!Check::failed("z", "no data").ok());
        assert!(!Check::below("nan", f64::NAN, 1.0).pass);
    }

    #[test]
    fn report_round_trips() {
        let r = Report::new("demo", vec![Check::below("a", 1e-12, 1e-9).with_detail("ok")]);
        let back: Report = serde_json::from_str(&r.to_json()).unwrap();
        assert_eq!(back, r);
        assert!(r.all_ok);
    }
}
