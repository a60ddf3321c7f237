use std::collections::BTreeMap;
use std::time::Instant;

use serde::Serialize;
use thiserror::Error;

use crate::frontend::ValidProgram;
use crate::interpreter::{AnalysisConfig, AnalysisResult, Analyzer, Mode};
use crate::parallel::{find_dispatch_points, FaultPlan, ParallelError, ParallelExecutor, ParallelOptions, Strategy, Transport};
use crate::report::hex;

#[derive(Debug, Clone)]
pub struct BenchOptions {
    pub worker_counts: Vec<usize>,
    pub reps: usize,
    pub transport: Transport,
    pub strategy: Strategy,
    pub config: AnalysisConfig,
    pub min_branches: usize,
    pub fault: Option<FaultPlan>,
}

impl Default for BenchOptions {
    fn default() -> Self {
        BenchOptions {
            worker_counts: vec![1, 2],
            reps: 3,
            transport: Transport::Inproc,
            strategy: Strategy::Block,
            config: AnalysisConfig::default(),
            min_branches: 2,
            fault: None,
        }
    }
}

#[derive(Debug, Error)]
pub enum BenchError {
    #[error("program has no dispatch point")]
    NoDispatch,
    #[error("digest with {workers} workers is {got}, expected {expected}")]
    DigestMismatch { workers: usize, expected: String, got: String },
    #[error(transparent)]
    Parallel(#[from] ParallelError),
}

#[derive(Debug, Clone, Serialize)]
pub struct WorkerTiming {
    pub workers: usize,
    pub runs_ms: Vec<f64>,
    pub median_ms: f64,
    /// Median time at the first worker count divided by this one.
    pub speedup: f64,
    /// Per-branch times of the last run, by dispatch statement.
    pub tau_us: BTreeMap<u32, Vec<u64>>,
    pub patch_bytes: u64,
    pub full_bytes: u64,
    pub delta_ratio: f64,
    pub digest: String,
    pub failures: Vec<String>,
}

#[derive(Debug, Clone)]
pub struct BenchRun {
    pub timings: Vec<WorkerTiming>,
    /// Least-squares fit of median time to `a / p + b`, in milliseconds.
    pub fit: Option<(f64, f64)>,
    pub result: AnalysisResult,
}

fn median(xs: &[f64]) -> f64 {
    let mut v = xs.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n == 0 {
        0.0
    } else if n % 2 == 1 {
        v[n / 2]
    } else {
        (v[n / 2 - 1] + v[n / 2]) / 2.0
    }
}

fn fit(points: &[(f64, f64)]) -> Option<(f64, f64)> {
    let n = points.len() as f64;
    let (sx, sy) = points.iter().fold((0.0, 0.0), |(a, b), (x, y)| (a + x, b + y));
    let (mx, my) = (sx / n, sy / n);
    let sxx: f64 = points.iter().map(|(x, _)| (x - mx) * (x - mx)).sum();
    if sxx == 0.0 {
        return None;
    }
    let sxy: f64 = points.iter().map(|(x, y)| (x - mx) * (y - my)).sum();
    let a = sxy / sxx;
    Some((a, my - a * mx))
}

/// Time the analysis of `p` at each worker count. Worker start-up is not
/// timed. Every run must produce the same digest.
pub fn run_bench(p: &ValidProgram, opts: &BenchOptions) -> Result<BenchRun, BenchError> {
    let points: Vec<_> = find_dispatch_points(p, opts.min_branches, true).iter().map(|d| d.stmt).collect();
    if points.is_empty() {
        return Err(BenchError::NoDispatch);
    }
    let mut timings = Vec::new();
    let mut reference: Option<(String, AnalysisResult)> = None;
    for &workers in &opts.worker_counts {
        let popts = ParallelOptions { workers, transport: opts.transport.clone(), strategy: opts.strategy, fault: opts.fault };
        let mut runs_ms = Vec::new();
        let mut last = None;
        for _ in 0..opts.reps.max(1) {
            let mut ex = ParallelExecutor::new(p, &opts.config, &popts)?;
            let start = Instant::now();
            let r = Analyzer::new(p, opts.config.clone())
                .with_executor(&mut ex, points.iter().copied())
                .run(Mode::Report)
                .map_err(ParallelError::from)?;
            runs_ms.push(start.elapsed().as_secs_f64() * 1e3);
            let digest = hex(&r.digest());
            match &reference {
                None => reference = Some((digest.clone(), r)),
                Some((d, _)) if *d != digest => {
                    return Err(BenchError::DigestMismatch { workers, expected: d.clone(), got: digest });
                }
                Some(_) => {}
            }
            last = Some((digest, ex.into_stats()));
        }
        let (digest, stats) = last.expect("at least one run");
        timings.push(WorkerTiming {
            workers,
            median_ms: median(&runs_ms),
            runs_ms,
            speedup: 0.0,
            tau_us: stats.timings.iter().map(|(id, t)| (*id, t.tau.clone())).collect(),
            patch_bytes: stats.patch_bytes,
            full_bytes: stats.full_bytes,
            delta_ratio: stats.delta_ratio(),
            digest,
            failures: stats.failures.iter().map(|f| f.to_string()).collect(),
        });
    }
    if let Some(base) = timings.first().map(|t| t.median_ms) {
        for t in &mut timings {
            t.speedup = if t.median_ms > 0.0 { base / t.median_ms } else { 0.0 };
        }
    }
    let fit = fit(&timings.iter().map(|t| (1.0 / t.workers as f64, t.median_ms)).collect::<Vec<_>>());
    let result = reference.map(|(_, r)| r).ok_or(BenchError::NoDispatch)?;
    Ok(BenchRun { timings, fit, result })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn median_and_fit() {
        assert_eq!(median(&[3.0, 1.0, 2.0]), 2.0);
        assert_eq!(median(&[4.0, 1.0, 2.0, 3.0]), 2.5);
        let pts: Vec<(f64, f64)> = [1.0, 2.0, 4.0].iter().map(|p| (1.0 / p, 0.75 / p + 0.25)).collect();
        let (a, b) = fit(&pts).unwrap();
        assert!((a - 0.75).abs() < 1e-12 && (b - 0.25).abs() < 1e-12);
        assert_eq!(fit(&[(1.0, 3.0)]), None);
    }
}
