use super::protocol::{Handshake, Message, Request, VERSION};
use super::worker::{self_test_bits, Reply, WorkerSession};
use super::*;
use crate::absdomain::Interval;
use crate::frontend::compile;
use crate::interpreter::analyze_program;

const MIXED: &str = "int i; int a; int b; int y; fnptr fp = {f, g};
    void f() { a = a + 1; } void g() { b = 2; while (b < 50) { b = b * 2; } }
    void main() { while (1) {
        /*@dispatch*/ switch (i) { case 0: a = 1 / i; case 1: (*fp)(); fp = g; case 2: y = a + b; default: a = 0; }
        /*@dispatch*/ if (a > 5) { b = 0; } else if (a > 2) { b = 1; } else { y = 7; }
        /*@dispatch*/ (*fp)();
        i = (i + 1) % 4; } }";

fn sequencer(n: usize) -> String {
    let mut s = String::from("int i; int a; int b; void main() { while (1) { switch (i) {");
    for k in 0..n {
        s.push_str(&format!(" case {k}: a = {k}; b = a + {k};"));
    }
    s.push_str(&format!(" }} i = (i + 1) % {n}; }} }}"));
    s
}

fn ids(p: &ValidProgram) -> Vec<StmtId> {
    find_dispatch_points(p, 2, true).iter().map(|d| d.stmt).collect()
}

#[test]
fn dispatch_points_found() {
    let p = compile(&sequencer(8)).unwrap();
    let d = find_dispatch_points(&p, 2, true);
    assert_eq!(d.len(), 1);
    assert_eq!((d[0].kind, d[0].branches), (DispatchKind::Switch, 8));
    assert!(find_dispatch_points(&p, 2, false).is_empty());
    assert!(find_dispatch_points(&p, 9, true).is_empty());

    let p = compile("int x; void main() { x = 1; x = x + 2; }").unwrap();
    assert!(find_dispatch_points(&p, 1, true).is_empty());

    let p = compile("int x; void main() { /*@dispatch*/ if (x < 0) { x = 1; } else if (x > 0) { x = 2; } else { x = 3; } }").unwrap();
    let d = find_dispatch_points(&p, 1, false);
    assert_eq!((d.len(), d[0].kind, d[0].branches), (1, DispatchKind::IfChain, 3));
}

#[test]
fn inproc_matches_sequential_across_plans() {
    for src in [MIXED.to_string(), sequencer(8)] {
        let p = compile(&src).unwrap();
        let seq = analyze_program(&p, AnalysisConfig::default()).unwrap();
        let points: Vec<StmtId> = find_dispatch_points(&p, 1, true).iter().map(|d| d.stmt).collect();
        assert!(!points.is_empty());
        for workers in 1..=4 {
            for strategy in [Strategy::Block, Strategy::Shuffle(1), Strategy::Greedy] {
                let opts = ParallelOptions { workers, strategy, ..Default::default() };
                let (r, stats) = analyze_parallel(&p, AnalysisConfig::default(), &opts, &points).unwrap();
                assert_eq!(r.digest(), seq.digest(), "p={workers} {strategy}");
                assert!(stats.dispatches > 0);
                assert!(stats.failures.is_empty());
            }
        }
    }
}

#[test]
fn base_is_sent_once_per_state() {
    let p = compile(&sequencer(4)).unwrap();
    let opts = ParallelOptions { workers: 2, ..Default::default() };
    let (_, stats) = analyze_parallel(&p, AnalysisConfig::default(), &opts, &ids(&p)).unwrap();
    assert!(stats.bases_sent <= 2 * stats.dispatches);
}

#[test]
fn killed_worker_falls_back_locally() {
    let p = compile(&sequencer(8)).unwrap();
    let seq = analyze_program(&p, AnalysisConfig::default()).unwrap();
    for after in [0, 1, 3] {
        let opts = ParallelOptions { workers: 3, fault: Some(FaultPlan { worker: 0, after_requests: after }), ..Default::default() };
        let (r, stats) = analyze_parallel(&p, AnalysisConfig::default(), &opts, &ids(&p)).unwrap();
        assert_eq!(r.digest(), seq.digest());
        assert_eq!(stats.failures.len(), 1);
        assert_eq!(stats.failures[0].worker, 0);
    }
}

fn session_for(src: &str) -> (ValidProgram, WorkerSession) {
    let p = compile(src).unwrap();
    let mut s = WorkerSession::new();
    let h = Handshake {
        program_digest: p.digest(),
        self_test: self_test_bits(),
        version: VERSION,
        config: protocol::WireConfig::from_config(&AnalysisConfig::default()),
        source: src.to_string(),
    };
    assert!(matches!(s.handle(Message::Handshake(h)), Reply::Send(Message::Handshake(_))));
    (p, s)
}

fn request(stmt: StmtId, branches: Vec<u16>, base: &AbstractEnv, send_env: bool) -> Message {
    Message::Request(Request {
        task: 7,
        mode: Mode::Iterate,
        stmt,
        branches,
        base_digest: base.digest(),
        env: send_env.then(|| base.canonical_bytes()),
    })
}

#[test]
fn worker_cache_rules() {
    let src = sequencer(3);
    let (p, mut s) = session_for(&src);
    let stmt = ids(&p)[0];
    let base = AbstractEnv::from_cells([("i", Interval::int(0, 2)), ("a", Interval::int(0, 0)), ("b", Interval::int(0, 0))]);

    match s.handle(request(stmt, vec![1], &base, false)) {
        Reply::Send(Message::Error { message, .. }) => assert_eq!(message, "base not cached"),
        _ => panic!("expected a cache miss"),
    }
    let first = match s.handle(request(stmt, vec![0, 2], &base, true)) {
        Reply::Send(Message::Response(r)) => r,
        _ => panic!("expected a response"),
    };
    let again = match s.handle(request(stmt, vec![0, 2], &base, false)) {
        Reply::Send(Message::Response(r)) => r,
        _ => panic!("expected a response from cache"),
    };
    assert_eq!(first.records.len(), 2);
    for (x, y) in first.records.iter().zip(&again.records) {
        assert_eq!((x.index, &x.patch), (y.index, &y.patch));
    }
    match s.handle(request(stmt, vec![], &base, false)) {
        Reply::Send(Message::Response(r)) => assert!(r.records.is_empty()),
        _ => panic!("expected an empty response"),
    }
}

#[test]
fn worker_rejects_foreign_program() {
    let p = compile(&sequencer(2)).unwrap();
    let mut s = WorkerSession::new();
    let h = Handshake {
        program_digest: [0; 32],
        self_test: self_test_bits(),
        version: VERSION,
        config: protocol::WireConfig::from_config(&AnalysisConfig::default()),
        source: p.source.to_string(),
    };
    assert!(matches!(s.handle(Message::Handshake(h)), Reply::Close(Message::Error { .. })));
}

#[test]
fn delta_ratio_extremes() {
    let base = AbstractEnv::from_cells((0..1000).map(|k| (format!("v{k:04}"), Interval::int(0, 0))));
    let same = measure_delta_ratio(&base, &[base.clone(), base.clone()]);
    assert_eq!(same.aggregate, 0.0);
    assert_eq!(same.patch_bytes, 0);
    let all = AbstractEnv::from_cells((0..1000).map(|k| (format!("v{k:04}"), Interval::int(1, 1))));
    let r = measure_delta_ratio(&base, &[all]);
    assert!(r.aggregate > 0.9 && r.aggregate < 1.1, "{}", r.aggregate);
}
