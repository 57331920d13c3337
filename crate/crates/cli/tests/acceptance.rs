//! Acceptance gate: one PASS/FAIL line per criterion, non-zero exit if any fails.

use std::process::{Command, ExitCode};
use std::time::{Duration, Instant};

use bvdeg_cli::config::SuiteConfig;
use bvdeg_cli::suites::{run_suite, SuiteOutcome};
use bvdeg_core::Check;

struct Gate {
    failures: usize,
}

impl Gate {
    fn line(&mut self, id: &str, title: &str, ok: bool, detail: String) {
        if !ok {
            self.failures += 1;
        }
        println!("{} {id} {title}: {detail}", if ok { "PASS" } else { "FAIL" });
    }
}

fn run(suite: &str, edit: impl FnOnce(&mut SuiteConfig)) -> (SuiteOutcome, Duration) {
    let mut cfg = SuiteConfig {
        suite: suite.into(),
        ..Default::default()
    };
    edit(&mut cfg);
    let start = Instant::now();
    let out = run_suite(&cfg).expect("valid config");
    (out, start.elapsed())
}

fn find<'a>(o: &'a SuiteOutcome, name: &str) -> Option<&'a Check> {
    o.report.checks.iter().find(|c| c.name == name)
}

fn failing(o: &SuiteOutcome) -> Vec<String> {
    o.report
        .checks
        .iter()
        .filter(|c| !c.pass)
        .map(|c| format!("{} gap {:.3e}", c.name, c.gap))
        .collect()
}

/// Largest per-case runtime; rows of one case share the case time.
fn max_case_ms(o: &SuiteOutcome) -> f64 {
    o.runtimes_ms.iter().cloned().fold(0.0, f64::max)
}

fn summary(o: &SuiteOutcome, t: Duration) -> String {
    let bad = failing(o);
    if bad.is_empty() {
        format!("{} checks, {:.1} s", o.report.checks.len(), t.as_secs_f64())
    } else {
        format!("{:.1} s, failing: {}", t.as_secs_f64(), bad.join("; "))
    }
}

fn report_without_timestamp(suite: &str, threads: &str, extra: &[&str], dir: &std::path::Path) -> String {
    let out = dir.join(format!("{suite}-{threads}.json"));
    let status = Command::new(env!("CARGO_BIN_EXE_bvdeg"))
        .args(["verify", suite, "--out"])
        .arg(&out)
        .args(extra)
        .env("BVDEG_THREADS", threads)
        .output()
        .expect("run bvdeg");
    assert!(status.status.code().is_some(), "bvdeg was killed");
    let text = std::fs::read_to_string(&out).expect("report written");
    text.lines().filter(|l| !l.trim_start().starts_with("\"timestamp\"")).collect::<Vec<_>>().join("\n")
}

fn main() -> ExitCode {
    let mut gate = Gate { failures: 0 };

    let (o, t) = run("degree-identity", |_| {});
    let gaps: Vec<String> = (0..3)
        .filter_map(|i| find(&o, &format!("map{i}/degree_vs_jacobian")))
        .map(|c| format!("{:.2e}", c.gap))
        .collect();
    let ok = o.report.passed() && gaps.len() == 3 && max_case_ms(&o) <= 60e3;
    gate.line("A1", "degree identity, zpow k=1,2,3", ok, format!("gaps [{}]; {}", gaps.join(", "), summary(&o, t)));

    let (o, t) = run("lemma61", |_| {});
    let violations: f64 = o
        .report
        .checks
        .iter()
        .filter(|c| c.name.ends_with("/violations"))
        .map(|c| c.lhs)
        .sum();
    let ok = o.report.passed() && violations == 0.0 && t.as_secs_f64() <= 120.0;
    gate.line("A2", "|deg| <= preimage count", ok, format!("{violations} violations; {}", summary(&o, t)));

    let (o, t) = run("coarea", |_| {});
    let ok = o.report.passed() && o.report.checks.len() >= 100 && t.as_secs_f64() <= 10.0;
    gate.line("A3", "discrete coarea", ok, format!("max gap {:.2e}; {}", o.report.max_gap(), summary(&o, t)));

    let (o, t) = run("bvl", |_| {});
    let ok = o.report.passed() && t.as_secs_f64() <= 5.0;
    gate.line("A4", "slice variation identity", ok, format!("max gap {:.2e}; {}", o.report.max_gap(), summary(&o, t)));

    let (o, t) = run("adjugate", |_| {});
    let total = find(&o, "map0/total").map(|c| c.lhs).unwrap_or(f64::NAN);
    let ok = o.report.passed() && t.as_secs_f64() <= 600.0;
    gate.line("A5", "Cantor shear adjugate table", ok, format!("total {total:.4}; {}", summary(&o, t)));

    let (o, t) = run("regularity", |_| {});
    let pairs: Vec<String> = (0..3)
        .filter_map(|i| find(&o, &format!("map{i}/inverse_tv_vs_mu")))
        .map(|c| format!("{:.3}/{:.3}", c.lhs, c.rhs))
        .collect();
    let a6 = (0..3).all(|i| {
        ["inverse_tv_vs_mu", "inverse_tv", "mu"]
            .iter()
            .all(|n| find(&o, &format!("map{i}/{n}")).is_some_and(|c| c.pass))
    });
    gate.line(
        "A6",
        "inverse variation vs slice-image areas",
        a6 && t.as_secs_f64() <= 900.0,
        format!("inverse TV / mu [{}]; {:.1} s", pairs.join(", "), t.as_secs_f64()),
    );
    let a7_rows = [
        "map1/inverse_tv_vs_pointwise_adj",
        "map1/adj_vs_pointwise_adj",
        "map2/pointwise_adj",
        "map2/singular_gap",
    ];
    let a7 = a7_rows.iter().all(|n| find(&o, n).is_some_and(|c| c.pass));
    let gap = find(&o, "map2/singular_gap").map(|c| c.lhs).unwrap_or(f64::NAN);
    gate.line(
        "A7",
        "Sobolev identity and singular gap",
        a7 && o.report.passed() && t.as_secs_f64() <= 600.0,
        format!("Cantor distributional minus pointwise {gap:.4}; {}", summary(&o, t)),
    );

    let (o, t) = run("stability", |_| {});
    let totals = o.report.metadata.get("totals").cloned().unwrap_or_default();
    let in_band = totals
        .as_array()
        .is_some_and(|a| !a.is_empty() && a.iter().all(|v| v.as_f64().is_some_and(|x| (4.8..=5.2).contains(&x))));
    let ok = o.report.passed() && in_band && t.as_secs_f64() <= 1200.0;
    gate.line("A8", "stability over Cantor levels 2-8", ok, format!("totals {totals}; {}", summary(&o, t)));

    let (o, t) = run("boundary-convergence", |_| {});
    let ok = o.report.passed() && o.report.checks.len() == 20 && t.as_secs_f64() <= 60.0;
    gate.line("A9", "mollified boundary convergence", ok, summary(&o, t));

    let (o, t) = run("axioms", |_| {});
    let ok = o.report.passed() && t.as_secs_f64() <= 60.0;
    gate.line("A10", "degree additivity and excision", ok, summary(&o, t));

    let dir = tempfile::tempdir().expect("temp dir");
    let mut same = Vec::new();
    for (suite, extra) in [
        ("coarea", vec![]),
        ("lemma61", vec!["--cases", "20"]),
        ("adjugate", vec![]),
        ("regularity", vec!["--map", "gallery:linear"]),
    ] {
        let a = report_without_timestamp(suite, "1", &extra, dir.path());
        let b = report_without_timestamp(suite, "4", &extra, dir.path());
        same.push((suite, a == b));
    }
    let detail = same.iter().map(|(s, ok)| format!("{s} {}", if *ok { "identical" } else { "differs" })).collect::<Vec<_>>();
    gate.line("A11", "reports identical for 1 and 4 threads", same.iter().all(|s| s.1), detail.join(", "));

    if gate.failures == 0 {
        ExitCode::SUCCESS
    } else {
        println!("{} acceptance criteria failed", gate.failures);
        ExitCode::FAILURE
    }
}
