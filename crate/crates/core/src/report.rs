//! Machine-readable analysis reports.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::Serialize;
use thiserror::Error;

use crate::absdomain::AbstractEnv;
use crate::bench::{BenchRun, BenchSpec, WorkerTiming};
use crate::frontend::ValidProgram;
use crate::interpreter::AnalysisResult;
use crate::parallel::{DeltaStats, ExecStats};

pub const REPORT_VERSION: u32 = 1;

pub fn hex(bytes: &[u8]) -> String {
    bytes.iter().fold(String::with_capacity(bytes.len() * 2), |mut s, b| {
        let _ = write!(s, "{b:02x}");
        s
    })
}

fn round3(x: f64) -> f64 {
    (x * 1000.0).round() / 1000.0
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct WarningEntry {
    pub line: u32,
    pub col: u32,
    pub kind: String,
    pub witness: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct InvariantEntry {
    pub stmt: u32,
    pub line: u32,
    pub col: u32,
    /// `None` when the loop head is unreachable.
    pub cells: Option<BTreeMap<String, String>>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Fit {
    pub a_ms: f64,
    pub b_ms: f64,
}

#[derive(Debug, Clone, Default, Serialize)]
pub struct Report {
    pub version: u32,
    pub program: String,
    /// SHA-256 of the semantic output; timings do not enter it.
    pub digest: String,
    pub warnings: Vec<WarningEntry>,
    pub invariants: Vec<InvariantEntry>,
    pub workers: Vec<String>,
    pub timings: Vec<WorkerTiming>,
    pub fit: Option<Fit>,
    pub delta: Option<DeltaStats>,
    pub bench: Option<BenchSpec>,
}

fn cells(env: &AbstractEnv) -> Option<BTreeMap<String, String>> {
    (!env.is_bottom()).then(|| env.cells().into_iter().map(|(k, v)| (k.to_string(), v.to_string())).collect())
}

#[derive(Debug, Error)]
#[error("{path}: {source}")]
pub struct ReportError {
    pub path: PathBuf,
    pub source: std::io::Error,
}

impl Report {
    pub fn new(program: &str) -> Report {
        Report { version: REPORT_VERSION, program: program.to_string(), ..Default::default() }
    }

    /// Fill warnings, digest and (optionally) loop invariants from `r`.
    pub fn with_result(mut self, p: &ValidProgram, r: &AnalysisResult, invariants: bool) -> Report {
        self.digest = hex(&r.digest());
        self.warnings = r
            .warnings
            .to_vec()
            .into_iter()
            .map(|w| WarningEntry {
                line: w.loc.line,
                col: w.loc.col,
                kind: w.kind.to_string(),
                witness: w.witness.iter().map(ToString::to_string).collect(),
            })
            .collect();
        if invariants {
            self.invariants = r
                .invariants
                .iter()
                .map(|(id, env)| {
                    let loc = p.stmt(*id).map(|(_, s)| s.loc).unwrap_or_default();
                    InvariantEntry { stmt: *id, line: loc.line, col: loc.col, cells: cells(env) }
                })
                .collect();
        }
        self
    }

    pub fn with_exec(mut self, stats: &ExecStats) -> Report {
        self.workers = stats.failures.iter().map(ToString::to_string).collect();
        let full = stats.full_bytes;
        self.delta = Some(DeltaStats {
            per_response: Vec::new(),
            aggregate: round3(stats.delta_ratio()),
            patch_bytes: stats.patch_bytes,
            full_bytes: full,
        });
        self
    }

    pub fn with_bench(mut self, spec: Option<BenchSpec>, run: &BenchRun) -> Report {
        self.bench = spec;
        self.timings = run
            .timings
            .iter()
            .cloned()
            .map(|mut t| {
                t.runs_ms = t.runs_ms.iter().map(|&x| round3(x)).collect();
                t.median_ms = round3(t.median_ms);
                t.speedup = round3(t.speedup);
                t.delta_ratio = round3(t.delta_ratio);
                t
            })
            .collect();
        self.fit = run.fit.map(|(a, b)| Fit { a_ms: round3(a), b_ms: round3(b) });
        self.workers = run.timings.iter().flat_map(|t| t.failures.iter().cloned()).collect();
        if let Some(t) = run.timings.last() {
            self.delta = Some(DeltaStats {
                per_response: Vec::new(),
                aggregate: round3(t.delta_ratio),
                patch_bytes: t.patch_bytes,
                full_bytes: t.full_bytes,
            });
        }
        self
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }

    /// Plain-text summary.
    pub fn to_table(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "program  {}", self.program);
        let _ = writeln!(out, "digest   {}", self.digest);
        let _ = writeln!(out, "warnings {}", self.warnings.len());
        for w in &self.warnings {
            let _ = writeln!(out, "  {}:{} {} {}", w.line, w.col, w.kind, w.witness.join(", "));
        }
        if !self.timings.is_empty() {
            let _ = writeln!(out, "{:>7} {:>12} {:>8} {:>8}", "workers", "median ms", "speedup", "delta");
            for t in &self.timings {
                let _ = writeln!(out, "{:>7} {:>12.3} {:>8.3} {:>8.3}", t.workers, t.median_ms, t.speedup, t.delta_ratio);
            }
        }
        if let Some(f) = &self.fit {
            let _ = writeln!(out, "fit      {:.3}/p + {:.3} ms", f.a_ms, f.b_ms);
        }
        for w in &self.workers {
            let _ = writeln!(out, "note     {w}");
        }
        out
    }
}

pub fn emit_report(r: &Report, path: &Path) -> Result<(), ReportError> {
    std::fs::write(path, r.to_json()).map_err(|source| ReportError { path: path.to_path_buf(), source })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::frontend::compile;
    use crate::interpreter::{analyze_program, AnalysisConfig};

    #[test]
    fn empty_report_is_valid_json() {
        let r = Report::new("none");
        let v: serde_json::Value = serde_json::from_str(&r.to_json()).unwrap();
        assert_eq!(v["warnings"], serde_json::json!([]));
        assert_eq!(v["invariants"], serde_json::json!([]));
    }

    #[test]
    fn warnings_sorted_and_digest_stable() {
        let src = "int x; int y; void main() { input(x, 0, 3); y = 10 / x; y = 5 / (x - 1); }";
        let p = compile(src).unwrap();
        let a = analyze_program(&p, AnalysisConfig::default()).unwrap();
        let b = analyze_program(&p, AnalysisConfig::default()).unwrap();
        let ra = Report::new("t").with_result(&p, &a, true);
        let rb = Report::new("t").with_result(&p, &b, true);
        assert_eq!(ra.to_json(), rb.to_json());
        assert_eq!(ra.warnings.len(), 2);
        assert!((ra.warnings[0].line, ra.warnings[0].col) < (ra.warnings[1].line, ra.warnings[1].col));
        assert_eq!(ra.digest, hex(&a.digest()));
    }

    #[test]
    fn report_writes_to_disk() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("r.json");
        emit_report(&Report::new("x"), &path).unwrap();
        assert!(std::fs::read_to_string(&path).unwrap().contains("\"version\": 1"));
        let err = emit_report(&Report::new("x"), &dir.path().join("missing/r.json")).unwrap_err();
        assert!(err.to_string().contains("missing"));
    }
}
