//! Synthetic sequencer programs and timing experiments.
//!
//! A generated program is an endless loop that waits for a clock tick
//! (modeled as an `input`), runs handler `i` of a `switch`, and advances
//! `i` modulo the handler count.

mod run;

use std::fmt::Write as _;

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use thiserror::Error;

pub use run::{run_bench, BenchError, BenchOptions, BenchRun, WorkerTiming};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BenchSpec {
    /// Number of handlers.
    pub handlers: usize,
    /// Statements per handler (raised to the touched-cell count if lower).
    pub stmts: usize,
    /// State variables.
    pub vars: usize,
    /// Fraction of the state variables each handler writes, in (0, 1].
    pub fraction: f64,
    /// Nesting depth of the counted loops around each handler body.
    pub depth: usize,
    /// Trip count of each counted loop.
    pub trips: u32,
    pub seed: u64,
}

impl Default for BenchSpec {
    fn default() -> Self {
        BenchSpec { handlers: 8, stmts: 10, vars: 100, fraction: 0.1, depth: 0, trips: 4, seed: 0 }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SpecError {
    #[error("handler count must be at least 1")]
    NoHandlers,
    #[error("need at least one state variable")]
    NoVars,
    #[error("touched fraction must lie in (0, 1]")]
    Fraction,
}

impl BenchSpec {
    pub fn check(&self) -> Result<(), SpecError> {
        if self.handlers == 0 {
            return Err(SpecError::NoHandlers);
        }
        if self.vars == 0 {
            return Err(SpecError::NoVars);
        }
        if !(self.fraction > 0.0 && self.fraction <= 1.0) {
            return Err(SpecError::Fraction);
        }
        Ok(())
    }

    /// Number of state variables written by each handler.
    pub fn touched(&self) -> usize {
        ((self.vars as f64 * self.fraction).round() as usize).clamp(1, self.vars)
    }
}

fn indent(out: &mut String, level: usize) {
    for _ in 0..level {
        out.push_str("    ");
    }
}

/// Emit the benchmark program for `spec`. The text depends only on `spec`.
pub fn genbench(spec: &BenchSpec) -> Result<String, SpecError> {
    spec.check()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut out = String::new();
    let _ = writeln!(
        out,
        "// sequencer benchmark: handlers={} stmts={} vars={} fraction={} depth={} trips={} seed={}",
        spec.handlers, spec.stmts, spec.vars, spec.fraction, spec.depth, spec.trips, spec.seed
    );
    out.push_str("int i;\nint tick;\n");
    for v in 0..spec.vars {
        let _ = writeln!(out, "int v{v};");
    }
    out.push_str("\nvoid main() {\n    while (1) {\n        input(tick, 0, 1);\n        switch (i) {\n");
    let touched = spec.touched();
    for h in 0..spec.handlers {
        let _ = writeln!(out, "        case {h}:");
        let cells: Vec<usize> = {
            let mut c = sample(&mut rng, spec.vars, touched).into_vec();
            c.sort_unstable();
            c
        };
        let mut level = 3;
        for d in 0..spec.depth {
            indent(&mut out, level);
            let _ = writeln!(out, "{{");
            indent(&mut out, level + 1);
            let _ = writeln!(out, "int j{h}_{d};");
            indent(&mut out, level + 1);
            let _ = writeln!(out, "j{h}_{d} = 0;");
            indent(&mut out, level + 1);
            let _ = writeln!(out, "while (j{h}_{d} < {}) {{", spec.trips);
            level += 2;
        }
        for t in 0..spec.stmts.max(touched) {
            let dst = cells[t % touched];
            let src = rng.gen_range(0..spec.vars);
            let k: i64 = rng.gen_range(1..100);
            indent(&mut out, level);
            let _ = match rng.gen_range(0..3) {
                0 => writeln!(out, "v{dst} = {k};"),
                1 => writeln!(out, "v{dst} = (v{src} + {k}) % 1000;"),
                _ => writeln!(out, "if (v{src} > {k}) {{ v{dst} = v{src} - {k}; }} else {{ v{dst} = {k}; }}"),
            };
        }
        for d in (0..spec.depth).rev() {
            indent(&mut out, level);
            let _ = writeln!(out, "j{h}_{d} = j{h}_{d} + 1;");
            level -= 2;
            indent(&mut out, level + 1);
            out.push_str("}\n");
            indent(&mut out, level);
            out.push_str("}\n");
        }
    }
    let _ = writeln!(out, "        }}\n        i = (i + 1) % {};\n    }}\n}}", spec.handlers);
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::frontend::compile;
    use crate::interpreter::{analyze_program, AnalysisConfig};

    #[test]
    fn small_spec_snapshot() {
        let spec = BenchSpec { handlers: 2, stmts: 3, vars: 4, fraction: 0.5, depth: 0, trips: 4, seed: 0 };
        let text = genbench(&spec).unwrap();
        assert_eq!(text, include_str!("../../tests/golden/bench_n2_s3_v4.mc"));
    }

    #[test]
    fn generated_programs_validate_and_analyze() {
        for (handlers, depth) in [(1, 0), (3, 1), (4, 2)] {
            let spec = BenchSpec { handlers, stmts: 5, vars: 20, fraction: 0.25, depth, trips: 3, seed: 9 };
            let text = genbench(&spec).unwrap();
            assert_eq!(text, genbench(&spec).unwrap());
            let p = compile(&text).unwrap();
            let r = analyze_program(&p, AnalysisConfig::default()).unwrap();
            assert!(r.warnings.is_empty(), "{text}");
        }
    }

    #[test]
    fn spec_checks() {
        assert_eq!(genbench(&BenchSpec { handlers: 0, ..Default::default() }), Err(SpecError::NoHandlers));
        assert_eq!(genbench(&BenchSpec { fraction: 0.0, ..Default::default() }), Err(SpecError::Fraction));
        assert_eq!(BenchSpec { vars: 10_000, fraction: 0.1, ..Default::default() }.touched(), 1000);
    }
}
