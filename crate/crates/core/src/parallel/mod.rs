//! Parallel analysis of dispatch points: the branches of a switch, if-chain
//! or indirect call are analyzed by workers from a shared base state, and
//! the results come back as deltas against that base.

pub mod executor;
pub mod partition;
pub mod protocol;
pub mod transport;
pub mod worker;

use serde::Serialize;

use crate::absdomain::AbstractEnv;
use crate::frontend::{ExprKind, Location, Stmt, StmtId, StmtKind, ValidProgram};
use crate::interpreter::{branch_count, dispatch_kind, AnalysisConfig, AnalysisResult, Analyzer, DispatchKind, Mode};

pub use executor::{wire_patch, ExecStats, FaultPlan, ParallelError, ParallelExecutor, ParallelOptions, Transport, WorkerFailure};
pub use partition::{partition, PartitionPlan, Strategy, TimingRecord};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DispatchPoint {
    pub stmt: StmtId,
    pub loc: Location,
    pub kind: DispatchKind,
    /// Branches are numbered `0..branches` in source order.
    pub branches: usize,
}

fn is_forever(cond: &crate::frontend::Expr) -> bool {
    matches!(cond.kind, ExprKind::Int(v) if v != 0)
}

/// Annotated statements, plus (with `auto`) every switch or indirect call
/// sitting directly in the body of a `while` loop with a nonzero constant
/// condition and having at least `min_branches` branches. Sorted by id.
pub fn find_dispatch_points(p: &ValidProgram, min_branches: usize, auto: bool) -> Vec<DispatchPoint> {
    let mut ids = std::collections::BTreeSet::new();
    p.for_each_stmt(|_, s| {
        if s.dispatch && dispatch_kind(s).is_some() {
            ids.insert(s.id);
        }
        if !auto {
            return;
        }
        if let StmtKind::While { cond, body } = &s.kind {
            if is_forever(cond) {
                for inner in &body.stmts {
                    let candidate = matches!(
                        dispatch_kind(inner),
                        Some(DispatchKind::Switch) | Some(DispatchKind::IndirectCall)
                    );
                    if candidate && branch_count(p, inner) >= min_branches {
                        ids.insert(inner.id);
                    }
                }
            }
        }
    });
    ids.into_iter()
        .map(|id| {
            let (_, s): (_, &Stmt) = p.stmt(id).expect("statement exists");
            DispatchPoint { stmt: id, loc: s.loc, kind: dispatch_kind(s).unwrap(), branches: branch_count(p, s) }
        })
        .collect()
}

/// Patch size relative to full encoding, for one result or in total.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DeltaStats {
    pub per_response: Vec<f64>,
    pub aggregate: f64,
    pub patch_bytes: u64,
    pub full_bytes: u64,
}

pub fn measure_delta_ratio(base: &AbstractEnv, results: &[AbstractEnv]) -> DeltaStats {
    let digest = base.digest();
    let (mut patch_bytes, mut full_bytes) = (0u64, 0u64);
    let mut per_response = Vec::with_capacity(results.len());
    for r in results {
        let patch = wire_patch(base, digest, r).len() as u64;
        let full = r.canonical_bytes().len() as u64;
        per_response.push(if full == 0 { 0.0 } else { patch as f64 / full as f64 });
        patch_bytes += patch;
        full_bytes += full;
    }
    let aggregate = if full_bytes == 0 { 0.0 } else { patch_bytes as f64 / full_bytes as f64 };
    DeltaStats { per_response, aggregate, patch_bytes, full_bytes }
}

/// Analyze `p`, sending the branches of the `dispatch` statements to workers.
pub fn analyze_parallel(
    p: &ValidProgram,
    config: AnalysisConfig,
    opts: &ParallelOptions,
    dispatch: &[StmtId],
) -> Result<(AnalysisResult, ExecStats), ParallelError> {
    let mut ex = ParallelExecutor::new(p, &config, opts)?;
    let result = Analyzer::new(p, config).with_executor(&mut ex, dispatch.iter().copied()).run(Mode::Report)?;
    Ok((result, ex.into_stats()))
}

#[cfg(test)]
mod tests;
