//! Master side: farm dispatch branches out to workers and fold the answers.

use std::collections::BTreeMap;
use std::path::PathBuf;

use thiserror::Error;

use crate::absdomain::{rounding, AbstractEnv, DeltaPatch, WarningLog};
use crate::frontend::{StmtId, ValidProgram};
use crate::interpreter::{branch_count, AnalysisConfig, AnalysisError, Analyzer, BranchExecutor, BranchOutcome, Mode};

use super::partition::{partition, PartitionPlan, Strategy, TimingRecord};
use super::protocol::{Handshake, Message, ProtocolError, Request, WireConfig, VERSION};
use super::transport::{InprocLink, Link, StreamLink};
use super::worker::self_test_bits;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Transport {
    /// Worker threads in this process.
    Inproc,
    /// Child processes of the given executable.
    Proc(PathBuf),
    /// Already running workers at these addresses.
    Tcp(Vec<String>),
}

/// Kill worker `worker` just before it is sent request number
/// `after_requests` (counting from zero).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FaultPlan {
    pub worker: usize,
    pub after_requests: u64,
}

#[derive(Debug, Clone)]
pub struct ParallelOptions {
    /// Ignored for [`Transport::Tcp`], where the endpoint count decides.
    pub workers: usize,
    pub transport: Transport,
    pub strategy: Strategy,
    pub fault: Option<FaultPlan>,
}

impl Default for ParallelOptions {
    fn default() -> Self {
        ParallelOptions { workers: 1, transport: Transport::Inproc, strategy: Strategy::Block, fault: None }
    }
}

#[derive(Debug, Error)]
pub enum ParallelError {
    #[error("floating-point self-test failed; refusing to run distributed")]
    SelfTest,
    #[error("worker {worker}: {message}")]
    Handshake { worker: usize, message: String },
    #[error("worker {worker}: {source}")]
    Transport { worker: usize, source: ProtocolError },
    #[error("cannot start worker {worker}: {source}")]
    Spawn { worker: usize, source: std::io::Error },
    #[error(transparent)]
    Analysis(#[from] AnalysisError),
}

/// A worker that stopped answering; its branches were analyzed locally.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct WorkerFailure {
    pub worker: usize,
    pub diagnostic: String,
}

impl std::fmt::Display for WorkerFailure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "worker {} failed: {}", self.worker, self.diagnostic)
    }
}

#[derive(Debug, Clone, Default)]
pub struct ExecStats {
    /// Dispatch executions.
    pub dispatches: u64,
    /// Latest per-branch times of each dispatch statement.
    pub timings: BTreeMap<StmtId, TimingRecord>,
    /// Plan used the last time each dispatch statement ran.
    pub plans: BTreeMap<StmtId, PartitionPlan>,
    pub failures: Vec<WorkerFailure>,
    /// Bytes of patches received.
    pub patch_bytes: u64,
    /// Bytes the corresponding results would take in full.
    pub full_bytes: u64,
    /// Base environments sent in full.
    pub bases_sent: u64,
}

impl ExecStats {
    pub fn delta_ratio(&self) -> f64 {
        if self.full_bytes == 0 {
            0.0
        } else {
            self.patch_bytes as f64 / self.full_bytes as f64
        }
    }
}

/// Patch bytes as sent on the wire: nothing at all when the branch left the
/// base unchanged.
pub fn wire_patch(base: &AbstractEnv, base_digest: [u8; 32], derived: &AbstractEnv) -> Vec<u8> {
    let patch = base.diff_with_digest(derived, base_digest);
    if patch.is_empty() {
        Vec::new()
    } else {
        patch.to_bytes()
    }
}

struct Slot {
    link: Option<Box<dyn Link>>,
    cached: Option<[u8; 32]>,
    requests: u64,
}

pub struct ParallelExecutor {
    program: ValidProgram,
    config: AnalysisConfig,
    strategy: Strategy,
    fault: Option<FaultPlan>,
    slots: Vec<Slot>,
    next_task: u64,
    stats: ExecStats,
}

impl ParallelExecutor {
    /// Start the workers and complete the handshake with each.
    pub fn new(program: &ValidProgram, config: &AnalysisConfig, opts: &ParallelOptions) -> Result<ParallelExecutor, ParallelError> {
        if !rounding::self_test() {
            return Err(ParallelError::SelfTest);
        }
        let links: Vec<Box<dyn Link>> = match &opts.transport {
            Transport::Inproc => (0..opts.workers.max(1)).map(|_| Box::new(InprocLink::spawn()) as Box<dyn Link>).collect(),
            Transport::Proc(exe) => (0..opts.workers.max(1))
                .map(|k| StreamLink::spawn(exe).map(|l| Box::new(l) as Box<dyn Link>).map_err(|source| ParallelError::Spawn { worker: k, source }))
                .collect::<Result<_, _>>()?,
            Transport::Tcp(addrs) => addrs
                .iter()
                .enumerate()
                .map(|(k, a)| StreamLink::connect(a).map(|l| Box::new(l) as Box<dyn Link>).map_err(|source| ParallelError::Spawn { worker: k, source }))
                .collect::<Result<_, _>>()?,
        };
        let hello = Handshake {
            program_digest: program.digest(),
            self_test: self_test_bits(),
            version: VERSION,
            config: WireConfig::from_config(config),
            source: program.source.to_string(),
        };
        let mut slots = Vec::with_capacity(links.len());
        for (worker, mut link) in links.into_iter().enumerate() {
            let tr = |source| ParallelError::Transport { worker, source };
            link.send(&Message::Handshake(hello.clone())).map_err(tr)?;
            match link.recv().map_err(tr)? {
                Message::Handshake(h) if h.program_digest == hello.program_digest && h.self_test == hello.self_test && h.version == VERSION => {}
                Message::Handshake(_) => return Err(ParallelError::Handshake { worker, message: "handshake reply does not match".into() }),
                Message::Error { message, .. } => return Err(ParallelError::Handshake { worker, message }),
                other => return Err(ParallelError::Handshake { worker, message: format!("unexpected message type {:#04x}", other.type_byte()) }),
            }
            slots.push(Slot { link: Some(link), cached: None, requests: 0 });
        }
        Ok(ParallelExecutor {
            program: program.clone(),
            config: config.clone(),
            strategy: opts.strategy,
            fault: opts.fault,
            slots,
            next_task: 1,
            stats: ExecStats::default(),
        })
    }

    pub fn workers(&self) -> usize {
        self.slots.len()
    }

    pub fn stats(&self) -> &ExecStats {
        &self.stats
    }

    pub fn into_stats(self) -> ExecStats {
        self.stats
    }

    fn fail(&mut self, worker: usize, diagnostic: String) {
        if let Some(mut l) = self.slots[worker].link.take() {
            l.kill();
        }
        self.slots[worker].cached = None;
        self.stats.failures.push(WorkerFailure { worker, diagnostic });
    }

    fn decode(&mut self, base: &AbstractEnv, digest: [u8; 32], rec: &super::protocol::BranchRecord) -> Result<BranchOutcome, String> {
        let env = if rec.patch.is_empty() {
            base.clone()
        } else {
            let patch = DeltaPatch::from_bytes(&rec.patch).map_err(|e| e.to_string())?;
            if patch.base_digest != digest {
                return Err("patch is for a different base".into());
            }
            base.apply_patch_unchecked(&patch)
        };
        let warnings = WarningLog::from_canonical(&rec.warnings).map_err(|e| e.to_string())?;
        let mut invariants = BTreeMap::new();
        for (id, bytes) in &rec.invariants {
            invariants.insert(*id, AbstractEnv::from_canonical(bytes).map_err(|e| e.to_string())?);
        }
        self.stats.patch_bytes += rec.patch.len() as u64;
        self.stats.full_bytes += env.canonical_bytes().len() as u64;
        Ok(BranchOutcome { env, warnings, invariants, micros: rec.micros })
    }
}

impl BranchExecutor for ParallelExecutor {
    fn execute(&mut self, stmt: StmtId, base: &AbstractEnv, mode: Mode) -> Result<Vec<BranchOutcome>, AnalysisError> {
        let (_, s) = self.program.stmt(stmt).ok_or_else(|| AnalysisError::Executor(format!("no statement {stmt}")))?;
        let n = branch_count(&self.program, s);
        let plan = partition(n, self.slots.len(), self.strategy, self.stats.timings.get(&stmt));
        let digest = base.digest();
        let mut full: Option<Vec<u8>> = None;
        let mut outcomes: Vec<Option<BranchOutcome>> = vec![None; n];
        let mut local: Vec<usize> = Vec::new();
        let mut sent: Vec<(usize, u64, Vec<usize>)> = Vec::new();

        for k in 0..self.slots.len() {
            let branches = plan.branches_of(k);
            if branches.is_empty() {
                continue;
            }
            if let Some(f) = self.fault {
                if f.worker == k && f.after_requests == self.slots[k].requests {
                    if let Some(l) = self.slots[k].link.as_mut() {
                        l.kill();
                    }
                }
            }
            self.slots[k].requests += 1;
            if self.slots[k].link.is_none() {
                local.extend(branches);
                continue;
            }
            let env = if self.slots[k].cached == Some(digest) {
                None
            } else {
                self.stats.bases_sent += 1;
                Some(full.get_or_insert_with(|| base.canonical_bytes()).clone())
            };
            let task = self.next_task;
            self.next_task += 1;
            let req = Request { task, mode, stmt, branches: branches.iter().map(|&j| j as u16).collect(), base_digest: digest, env };
            match self.slots[k].link.as_mut().unwrap().send(&Message::Request(req)) {
                Ok(()) => sent.push((k, task, branches)),
                Err(e) => {
                    self.fail(k, e.to_string());
                    local.extend(branches);
                }
            }
        }

        for (k, task, branches) in sent {
            let reply = match self.slots[k].link.as_mut() {
                Some(l) => l.recv(),
                None => Err(ProtocolError::Malformed("worker gone".into())),
            };
            let decoded = match reply {
                Ok(Message::Response(r)) if r.task == task && r.records.len() == branches.len() => {
                    self.slots[k].cached = Some(digest);
                    let mut got = Vec::with_capacity(branches.len());
                    let mut err = None;
                    for (rec, &j) in r.records.iter().zip(&branches) {
                        if rec.index as usize != j {
                            err = Some(format!("answered branch {} instead of {j}", rec.index));
                            break;
                        }
                        match self.decode(base, digest, rec) {
                            Ok(o) => got.push((j, o)),
                            Err(e) => {
                                err = Some(format!("bad record for branch {j}: {e}"));
                                break;
                            }
                        }
                    }
                    match err {
                        None => Ok(got),
                        Some(e) => Err(e),
                    }
                }
                Ok(Message::Response(r)) => Err(format!("mismatched response to task {task} (got task {})", r.task)),
                Ok(Message::Error { message, .. }) => Err(message),
                Ok(other) => Err(format!("unexpected message type {:#04x}", other.type_byte())),
                Err(e) => Err(e.to_string()),
            };
            match decoded {
                Ok(got) => {
                    for (j, o) in got {
                        outcomes[j] = Some(o);
                    }
                }
                Err(d) => {
                    self.fail(k, d);
                    local.extend(branches);
                }
            }
        }

        local.sort_unstable();
        for j in local {
            let out = Analyzer::new(&self.program, self.config.clone()).analyze_branch(stmt, j, base, mode)?;
            outcomes[j] = Some(out);
        }

        self.stats.dispatches += 1;
        let outcomes: Vec<BranchOutcome> = outcomes.into_iter().map(|o| o.expect("every branch analyzed")).collect();
        self.stats.timings.insert(stmt, TimingRecord { tau: outcomes.iter().map(|o| o.micros).collect() });
        self.stats.plans.insert(stmt, plan);
        Ok(outcomes)
    }
}
