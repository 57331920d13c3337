//! Report files: the JSON report, the per-check CSV and report merging.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::Write;
use std::path::Path;

use anyhow::{bail, Context, Result};
use bvdeg_core::Check;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::config::SuiteConfig;
use crate::suites::SuiteOutcome;

/// The JSON written by `verify`. Runtimes stay out of it so reruns with any
/// worker count differ only in `timestamp`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub suite: String,
    pub passed: bool,
    pub timestamp: String,
    pub config: SuiteConfig,
    pub checks: Vec<Check>,
    #[serde(flatten)]
    pub metadata: BTreeMap<String, Value>,
}

impl Report {
    pub fn new(config: &SuiteConfig, outcome: &SuiteOutcome) -> Report {
        let r = &outcome.report;
        Report {
            suite: r.suite.clone(),
            passed: r.passed(),
            timestamp: chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Millis, true),
            config: config.clone(),
            checks: r.checks.clone(),
            metadata: r.metadata.clone(),
        }
    }

    pub fn has_errors(&self) -> bool {
        self.checks.iter().any(Check::is_error)
    }

    pub fn load(path: &Path) -> Result<Report> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        serde_json::from_str(&text).with_context(|| format!("parsing report {}", path.display()))
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut f = File::create(path).with_context(|| format!("creating {}", path.display()))?;
        serde_json::to_writer_pretty(&mut f, self)?;
        writeln!(f)?;
        Ok(())
    }
}

#[derive(Serialize)]
struct Row<'a> {
    suite: &'a str,
    case_id: &'a str,
    lhs: f64,
    rhs: f64,
    gap: f64,
    tol: f64,
    pass: bool,
    runtime_ms: f64,
}

/// One CSV row per check. `runtimes_ms` may be empty (merged reports).
pub fn write_csv(path: &Path, rows: &[(&str, &Check, f64)]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).with_context(|| format!("creating {}", path.display()))?;
    for (suite, c, ms) in rows {
        w.serialize(Row {
            suite,
            case_id: &c.name,
            lhs: c.lhs,
            rhs: c.rhs,
            gap: c.gap,
            tol: c.tol,
            pass: c.pass,
            runtime_ms: *ms,
        })?;
    }
    w.flush()?;
    Ok(())
}

pub fn outcome_rows<'a>(suite: &'a str, outcome: &'a SuiteOutcome) -> Vec<(&'a str, &'a Check, f64)> {
    outcome
        .report
        .checks
        .iter()
        .zip(&outcome.runtimes_ms)
        .map(|(c, ms)| (suite, c, *ms))
        .collect()
}

/// Several reports in one document.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MergedReport {
    pub passed: bool,
    pub timestamp: String,
    pub reports: Vec<Report>,
}

pub fn merge(reports: Vec<Report>) -> Result<MergedReport> {
    if reports.is_empty() {
        bail!("nothing to merge");
    }
    let mut seen = std::collections::BTreeSet::new();
    for r in &reports {
        if !seen.insert((r.suite.clone(), serde_json::to_string(&r.config)?)) {
            bail!("duplicate report for suite '{}' with the same config", r.suite);
        }
    }
    Ok(MergedReport {
        passed: reports.iter().all(|r| r.passed),
        timestamp: chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Millis, true),
        reports,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use bvdeg_core::VerificationReport;

    fn outcome() -> SuiteOutcome {
        let mut report = VerificationReport::new("coarea");
        report.push(Check::relative("field0/coarea", 1.0, 1.0, 1e-10));
        report.meta("n", 1);
        SuiteOutcome {
            report,
            runtimes_ms: vec![0.5],
        }
    }

    #[test]
    fn report_round_trip_flattens_metadata() {
        let cfg = SuiteConfig {
            suite: "coarea".into(),
            ..Default::default()
        };
        let r = Report::new(&cfg, &outcome());
        let v = serde_json::to_value(&r).unwrap();
        assert_eq!(v["n"], 1);
        assert!(v.get("runtime_ms").is_none());
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("r.json");
        r.save(&p).unwrap();
        assert_eq!(Report::load(&p).unwrap(), r);
        // A report doubles as a config file.
        assert_eq!(SuiteConfig::load(&p).unwrap(), cfg);
    }

    #[test]
    fn csv_has_one_row_per_check() {
        let o = outcome();
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("r.csv");
        write_csv(&p, &outcome_rows("coarea", &o)).unwrap();
        let text = std::fs::read_to_string(&p).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next().unwrap(), "suite,case_id,lhs,rhs,gap,tol,pass,runtime_ms");
        assert!(lines.next().unwrap().starts_with("coarea,field0/coarea,1.0,1.0,0.0"));
        assert!(lines.next().is_none());
    }

    #[test]
    fn merge_rejects_duplicates() {
        let cfg = SuiteConfig::default();
        let r = Report::new(&cfg, &outcome());
        assert!(merge(vec![r.clone()]).unwrap().passed);
        assert!(merge(vec![r.clone(), r]).is_err());
        assert!(merge(vec![]).is_err());
    }
}
