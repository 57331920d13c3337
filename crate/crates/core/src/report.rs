//! Verification reports: named comparisons with a tolerance and a verdict.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use serde_json::Value;

/// One comparison `lhs` vs `rhs`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub lhs: f64,
    pub rhs: f64,
    pub gap: f64,
    pub tol: f64,
    pub pass: bool,
    /// Informational rows are reported but never fail a suite.
    #[serde(default = "yes")]
    pub asserted: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

fn yes() -> bool {
    true
}

/// `|lhs - rhs| / max(|rhs|, floor)`.
pub fn relative_gap(lhs: f64, rhs: f64) -> f64 {
    let scale = rhs.abs().max(1e-300);
    if lhs == rhs {
        0.0
    } else {
        (lhs - rhs).abs() / scale
    }
}

impl Check {
    /// Relative comparison; a zero right-hand side falls back to the absolute gap.
    pub fn relative(name: impl Into<String>, lhs: f64, rhs: f64, tol: f64) -> Check {
        let gap = if rhs == 0.0 {
            (lhs - rhs).abs()
        } else {
            relative_gap(lhs, rhs)
        };
        Check {
            name: name.into(),
            lhs,
            rhs,
            gap,
            tol,
            pass: gap <= tol,
            asserted: true,
            note: None,
        }
    }

    pub fn absolute(name: impl Into<String>, lhs: f64, rhs: f64, tol: f64) -> Check {
        let gap = (lhs - rhs).abs();
        Check {
            name: name.into(),
            lhs,
            rhs,
            gap,
            tol,
            pass: gap <= tol,
            asserted: true,
            note: None,
        }
    }

    /// Exact integer equality.
    pub fn integer(name: impl Into<String>, lhs: i64, rhs: i64) -> Check {
        Check {
            name: name.into(),
            lhs: lhs as f64,
            rhs: rhs as f64,
            gap: (lhs - rhs).abs() as f64,
            tol: 0.0,
            pass: lhs == rhs,
            asserted: true,
            note: None,
        }
    }

    /// `lhs <= rhs + tol`; the gap is the excess (zero when satisfied).
    pub fn at_most(name: impl Into<String>, lhs: f64, rhs: f64, tol: f64) -> Check {
        let gap = (lhs - rhs).max(0.0);
        Check {
            name: name.into(),
            lhs,
            rhs,
            gap,
            tol,
            pass: gap <= tol,
            asserted: true,
            note: None,
        }
    }

    /// A failed row recording a computation error.
    pub fn failed(name: impl Into<String>, message: impl Into<String>) -> Check {
        Check {
            name: name.into(),
            lhs: 0.0,
            rhs: 0.0,
            gap: 0.0,
            tol: 0.0,
            pass: false,
            asserted: true,
            note: Some(message.into()),
        }
    }

    /// Marks the row as reported only.
    pub fn informational(mut self) -> Check {
        self.asserted = false;
        self.pass = true;
        self
    }

    pub fn with_note(mut self, note: impl Into<String>) -> Check {
        self.note = Some(note.into());
        self
    }

    pub fn is_error(&self) -> bool {
        !self.pass && self.tol == 0.0 && self.lhs == 0.0 && self.rhs == 0.0 && self.note.is_some()
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct VerificationReport {
    pub suite: String,
    pub checks: Vec<Check>,
    /// Free-form metadata, ordered by key so serialization is stable.
    #[serde(default)]
    pub metadata: BTreeMap<String, Value>,
}

impl VerificationReport {
    pub fn new(suite: impl Into<String>) -> Self {
        VerificationReport {
            suite: suite.into(),
            ..Default::default()
        }
    }

    pub fn push(&mut self, check: Check) -> &mut Self {
        self.checks.push(check);
        self
    }

    pub fn meta(&mut self, key: impl Into<String>, value: impl Serialize) -> &mut Self {
        self.metadata.insert(
            key.into(),
            serde_json::to_value(value).unwrap_or(Value::Null),
        );
        self
    }

    pub fn extend(&mut self, other: VerificationReport) {
        self.checks.extend(other.checks);
        self.metadata.extend(other.metadata);
    }

    /// True when every asserted row passes.
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.pass || !c.asserted)
    }

    /// Largest gap among asserted rows.
    pub fn max_gap(&self) -> f64 {
        self.checks
            .iter()
            .filter(|c| c.asserted)
            .map(|c| c.gap)
            .fold(0.0, f64::max)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn verdicts() {
        let mut r = VerificationReport::new("demo");
        r.push(Check::relative("a", 1.01, 1.0, 0.02));
        r.push(Check::integer("b", 2, 2));
        assert!(r.passed());
        r.push(Check::relative("c", 5.0, 3.0, 0.1).informational());
        assert!(r.passed());
        r.push(Check::at_most("d", 1.5, 1.0, 0.1));
        assert!(!r.passed());
        assert!((r.max_gap() - 0.5).abs() < 1e-15);
    }

    #[test]
    fn zero_reference_uses_absolute_gap() {
        let c = Check::relative("z", 1e-13, 0.0, 1e-12);
        assert!(c.pass);
        assert_eq!(c.gap, 1e-13);
    }

    #[test]
    fn serializes_in_key_order() {
        let mut r = VerificationReport::new("s");
        r.meta("zeta", 1).meta("alpha", "x");
        let text = serde_json::to_string(&r).unwrap();
        assert!(text.find("alpha").unwrap() < text.find("zeta").unwrap());
        let back: VerificationReport = serde_json::from_str(&text).unwrap();
        assert_eq!(back, r);
    }
}
