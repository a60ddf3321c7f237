use super::*;
use crate::absdomain::Interval;
use crate::frontend::compile;

fn run(src: &str) -> AnalysisResult {
    let p = compile(src).unwrap();
    analyze_program(&p, AnalysisConfig::default()).unwrap()
}

/// Location of the first occurrence of `needle` in a one-line source.
fn at(src: &str, needle: &str) -> crate::frontend::Location {
    crate::frontend::Location::new(1, src.find(needle).unwrap() as u32 + 1)
}

fn loop_ids(p: &ValidProgram) -> Vec<StmtId> {
    let mut ids = Vec::new();
    p.for_each_stmt(|_, s| {
        if matches!(s.kind, StmtKind::While { .. }) {
            ids.push(s.id);
        }
    });
    ids
}

#[test]
fn if_joins_guarded_branches() {
    let r = run("int x; void main() { input(x, 0, 10); if (x < 5) { x = x + 1; } else { x = 0; } }");
    assert_eq!(r.final_env.get("x"), Some(Interval::int(0, 5)));
    assert!(r.warnings.is_empty());
}

#[test]
fn goto_moves_direct_into_pending() {
    let p = compile("int x; void main() { goto L; x = 2; L: ; }").unwrap();
    let mut a = Analyzer::new(&p, AnalysisConfig::default());
    let d = AbstractEnv::from_cells([("x", Interval::int(1, 1))]);
    let mut fs = FlowState::new(d.clone());
    let main = p.function(p.entry);
    a.analyze_stmt(&main.body.stmts[0], p.entry, &mut fs, Mode::Report).unwrap();
    assert!(fs.direct.is_bottom());
    let pending = &fs.pending[&Target::Label(p.entry, "L".into())];
    assert!(pending.same(&d));
    a.analyze_stmt(&main.body.stmts[1], p.entry, &mut fs, Mode::Report).unwrap();
    assert!(fs.direct.is_bottom());
    a.analyze_stmt(&main.body.stmts[2], p.entry, &mut fs, Mode::Report).unwrap();
    assert_eq!(fs.direct.get("x"), Some(Interval::int(1, 1)));
    assert!(fs.pending.is_empty());
}

#[test]
fn bottom_propagates_without_warnings() {
    let p = compile("int x; int y; void main() { x = 1 / y; }").unwrap();
    let mut a = Analyzer::new(&p, AnalysisConfig::default());
    let mut fs = FlowState::new(AbstractEnv::bottom());
    let s = &p.function(p.entry).body.stmts[0];
    a.analyze_stmt(s, p.entry, &mut fs, Mode::Report).unwrap();
    assert!(fs.direct.is_bottom());
    assert!(fs.warnings.is_empty());
    assert!(fs.pending.is_empty());
}

#[test]
fn counting_loop_narrows_to_exact_bounds() {
    let src = "int x; void main() { x = 0; while (x < 100) { x = x + 1; } }";
    let p = compile(src).unwrap();
    let r = analyze_program(&p, AnalysisConfig::default()).unwrap();
    let w = loop_ids(&p)[0];
    assert_eq!(r.invariants[&w].get("x"), Some(Interval::int(0, 100)));
    assert_eq!(r.final_env.get("x"), Some(Interval::int(100, 100)));
    assert!(r.warnings.is_empty());
}

#[test]
fn dead_loop_leaves_state_unchanged() {
    let r = run("int x = 5; void main() { while (0) { x = 1; } }");
    assert_eq!(r.final_env.get("x"), Some(Interval::int(5, 5)));
}

#[test]
fn sequencer_counter_spans_all_arms() {
    let src = "int i; int a; void main() { while (1) { switch (i) {
        case 0: a = 1; case 1: a = 2; case 2: a = 3; case 3: a = 4;
        case 4: a = 5; case 5: a = 6; case 6: a = 7; case 7: a = 8; }
        i = (i + 1) % 8; } }";
    let p = compile(src).unwrap();
    let r = analyze_program(&p, AnalysisConfig::default()).unwrap();
    let w = loop_ids(&p)[0];
    assert_eq!(r.invariants[&w].get("i"), Some(Interval::int(0, 7)));
    assert!(r.final_env.is_bottom());
}

#[test]
fn unbounded_growth_reaches_infinity() {
    let src = "int x; void main() { while (1) { x = x + 1; } }";
    let p = compile(src).unwrap();
    let r = analyze_program(&p, AnalysisConfig::default()).unwrap();
    let w = loop_ids(&p)[0];
    let (lo, hi) = r.invariants[&w].get("x").unwrap().int_range().unwrap();
    assert_eq!((lo, hi), (0, i64::MAX));
    assert_eq!(r.warnings.len(), 1);
    assert_eq!(r.warnings.to_vec()[0].kind, WarningKind::Overflow);
}

#[test]
fn stable_loop_needs_no_widening() {
    let src = "int x; void main() { while (x < 10) { } }";
    let p = compile(src).unwrap();
    let r = analyze_program(&p, AnalysisConfig::default()).unwrap();
    assert_eq!(r.invariants[&loop_ids(&p)[0]].get("x"), Some(Interval::int(0, 0)));
}

#[test]
fn calls_are_inlined() {
    let r = run("int x; void f() { x = x + 1; } void main() { f(); f(); }");
    assert_eq!(r.final_env.get("x"), Some(Interval::int(2, 2)));
    let r = run("int x; void h() { x = x + 1; } void g() { x = x + 1; h(); }
        void f() { x = x + 1; g(); } void main() { f(); }");
    assert_eq!(r.final_env.get("x"), Some(Interval::int(3, 3)));
}

#[test]
fn indirect_call_joins_targets() {
    let src = "int x; int k; fnptr fp = {g, h}; void g() { x = 1; } void h() { x = 2; }
        void main() { input(k, 0, 1); if (k == 1) { fp = h; } (*fp)(); }";
    let r = run(src);
    assert_eq!(r.final_env.get("x"), Some(Interval::int(1, 2)));
    let r = run("int x; fnptr fp = {g, h}; void g() { x = 1; } void h() { x = 2; } void main() { (*fp)(); }");
    assert_eq!(r.final_env.get("x"), Some(Interval::int(1, 1)));
}

#[test]
fn return_values_flow_to_destination() {
    let r = run("int x; int sq() { if (x > 3) { return 9; } return x * x; } void main() { input(x, 1, 5); x = 0; x = sq(); }");
    assert_eq!(r.final_env.get("x"), Some(Interval::int(0, 0)));
    let r = run("int x; int y; int f() { if (x > 3) { return 9; } return x * x; } void main() { input(x, 1, 5); y = f(); }");
    assert_eq!(r.final_env.get("y"), Some(Interval::int(1, 9)));
}

#[test]
fn division_warnings_follow_divisor_range() {
    let src = "int x; int y; void main() { input(x, 0, 10); y = 100 / x; }";
    let ws = run(src).warnings.to_vec();
    assert_eq!(ws.len(), 1);
    assert_eq!(ws[0].kind, WarningKind::DivByZero);
    assert_eq!(ws[0].loc, at(src, "/ x"));
    let r = run("int x; int y; void main() { input(x, 1, 10); y = 100 / x; }");
    assert!(r.warnings.is_empty());
}

#[test]
fn straight_line_program_has_no_invariants() {
    let r = run("int x; void main() { x = 3; x = x * 2; }");
    assert!(r.invariants.is_empty());
    assert!(r.warnings.is_empty());
    assert_eq!(r.final_env.get("x"), Some(Interval::int(6, 6)));
}

#[test]
fn assert_may_fail_is_reported() {
    let r = run("int x; void main() { input(x, 0, 3); assert(x < 3); x = x + 1; }");
    assert_eq!(r.warnings.to_vec()[0].kind, WarningKind::AssertMayFail);
    assert_eq!(r.final_env.get("x"), Some(Interval::int(1, 3)));
    assert!(run("int x; void main() { input(x, 0, 3); assert(x < 4); }").warnings.is_empty());
}

#[test]
fn break_and_block_locals() {
    let src = "int x; int s; void main() { while (1) { int t; t = x; if (t > 4) { break; } x = t + 1; s = t; } }";
    let p = compile(src).unwrap();
    let r = analyze_program(&p, AnalysisConfig::default()).unwrap();
    // the exit guard constrains t, not x
    assert_eq!(r.final_env.get("x"), Some(Interval::int(0, 5)));
    assert_eq!(r.final_env.get("s"), Some(Interval::int(0, 4)));
    assert!(!r.final_env.contains("main:t"));
    let inv = &r.invariants[&loop_ids(&p)[0]];
    assert!(!inv.contains("main:t"));
}

#[test]
fn tampered_invariant_fails_the_check() {
    let p = compile("int x; void main() { x = 0; while (x < 100) { x = x + 1; } }").unwrap();
    let mut a = Analyzer::new(&p, AnalysisConfig::default());
    a.set_tamper(|_, inv| {
        let cell: std::sync::Arc<str> = "x".into();
        Some(inv.set(&cell, Interval::int(0, 99)))
    });
    assert!(matches!(a.run(Mode::Report), Err(AnalysisError::CheckFailed { .. })));
}

#[test]
fn iteration_bound_is_enforced() {
    let p = compile("int x; void main() { while (x < 100) { x = x + 1; } }").unwrap();
    let cfg = AnalysisConfig { iteration_bound: 2, ..AnalysisConfig::default() };
    assert!(matches!(analyze_program(&p, cfg), Err(AnalysisError::NonTermination { .. })));
}

#[test]
fn iteration_mode_reports_nothing() {
    let src = "int x; int y; void main() { input(x, 0, 10); while (x < 10) { y = 100 / x; x = x + 1; } }";
    let p = compile(src).unwrap();
    let r = Analyzer::new(&p, AnalysisConfig::default()).run(Mode::Iterate).unwrap();
    assert!(r.warnings.is_empty());
    assert!(r.invariants.is_empty());
    let r = analyze_program(&p, AnalysisConfig::default()).unwrap();
    assert!(r.warnings.contains(at(src, "/ x"), WarningKind::DivByZero));
}

#[test]
fn repeated_analysis_is_identical() {
    let src = "int x; int t[4]; void main() { input(x, 0, 9); while (x > 0) { t[x] = x; x = x - 2; } }";
    let p = compile(src).unwrap();
    let a = analyze_program(&p, AnalysisConfig::default()).unwrap();
    let b = analyze_program(&p, AnalysisConfig::default()).unwrap();
    assert_eq!(a.digest(), b.digest());
    assert!(a.warnings.contains(at(src, "x] = x"), WarningKind::ArrayOutOfBounds));
}

/// Runs every branch locally through `analyze_branch`.
struct Local<'p>(&'p ValidProgram, usize);

impl BranchExecutor for Local<'_> {
    fn execute(&mut self, stmt: StmtId, base: &AbstractEnv, mode: Mode) -> Result<Vec<BranchOutcome>, AnalysisError> {
        self.1 += 1;
        let (_, s) = self.0.stmt(stmt).unwrap();
        (0..branch_count(self.0, s))
            .map(|k| Analyzer::new(self.0, AnalysisConfig::default()).analyze_branch(stmt, k, base, mode))
            .collect()
    }
}

#[test]
fn branch_decomposition_matches_sequential() {
    let src = "int i; int a; int b; int y; fnptr fp = {f, g};
        void f() { a = a + 1; } void g() { b = 2; while (b < 50) { b = b * 2; } }
        void main() { while (1) {
            /*@dispatch*/ switch (i) { case 0: a = 1 / i; case 1: (*fp)(); fp = g; case 2: y = a + b; default: a = 0; }
            /*@dispatch*/ if (a > 5) { b = 0; } else if (a > 2) { b = 1; } else { y = 7; }
            /*@dispatch*/ (*fp)();
            i = (i + 1) % 4; } }";
    let p = compile(src).unwrap();
    let seq = analyze_program(&p, AnalysisConfig::default()).unwrap();
    let mut dispatch = Vec::new();
    p.for_each_stmt(|_, s| {
        if s.dispatch {
            dispatch.push(s.id);
        }
    });
    assert_eq!(dispatch.len(), 3);
    let mut ex = Local(&p, 0);
    let par = Analyzer::new(&p, AnalysisConfig::default()).with_executor(&mut ex, dispatch).run(Mode::Report).unwrap();
    assert_eq!(seq.digest(), par.digest());
    assert!(ex.1 > 3);
    assert!(!seq.warnings.is_empty());
}

#[test]
fn escaping_branches_are_not_dispatched() {
    let p = compile("int x; void main() { /*@dispatch*/ switch (x) { case 0: goto out; default: x = 1; } out: ; }").unwrap();
    let (_, s) = p.stmt(p.function(p.entry).body.stmts[0].id).unwrap();
    assert!(!parallel_safe(s));
    let p = compile("int x; void main() { while (1) { /*@dispatch*/ if (x) { break; } } }").unwrap();
    let mut ok = true;
    p.for_each_stmt(|_, s| {
        if s.dispatch {
            ok = parallel_safe(s);
        }
    });
    assert!(!ok);
}

#[test]
fn retained_environments_track_nesting_not_size() {
    let small = "int x; void f() { x = x + 1; } void main() { while (x < 10) { f(); } }".to_string();
    let mut big = String::from("int x;");
    for i in 0..30 {
        big.push_str(&format!(" void f{i}() {{ {{ int t; t = x; x = t + 1; }} x = x - 1; }}"));
    }
    big.push_str(" void main() { while (x < 10) { ");
    for i in 0..30 {
        big.push_str(&format!("f{i}(); "));
    }
    big.push_str("x = x + 1; } }");
    let a = run(&small).peak_retained;
    let b = run(&big).peak_retained;
    assert!(b <= a + 1, "{a} vs {b}");
}
