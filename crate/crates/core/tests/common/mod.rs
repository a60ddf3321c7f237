//! Random small programs and the soundness check against exhaustive
//! enumeration.

#![allow(dead_code)]

use std::fmt::Write as _;

use astral::absdomain::WarningKind;
use astral::concrete::{enumerate_reachable, ConcreteError, ErrorKind};
use astral::frontend::{compile, ValidProgram};
use astral::interpreter::{AnalysisConfig, Analyzer, Mode};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Generator of tiny terminating programs: at most six variables, input
/// ranges at most eight wide, counted loops of at most eight iterations.
pub struct Gen {
    rng: ChaCha8Rng,
    vars: Vec<String>,
    has_array: bool,
    has_float: bool,
    inputs: usize,
    labels: usize,
    counters: usize,
    funcs: usize,
    loop_depth: usize,
}

impl Gen {
    pub fn new(seed: u64) -> Gen {
        Gen {
            rng: ChaCha8Rng::seed_from_u64(seed),
            vars: Vec::new(),
            has_array: false,
            has_float: false,
            inputs: 0,
            labels: 0,
            counters: 0,
            funcs: 0,
            loop_depth: 0,
        }
    }

    fn var(&mut self) -> String {
        let i = self.rng.gen_range(0..self.vars.len());
        self.vars[i].clone()
    }

    fn atom(&mut self) -> String {
        match self.rng.gen_range(0..10) {
            0..=4 => self.var(),
            5 if self.has_array => format!("a[{}]", self.small_index()),
            6 if self.has_float => "(int) f".to_string(),
            _ => format!("{}", self.rng.gen_range(-5..=5)),
        }
    }

    fn small_index(&mut self) -> String {
        if self.rng.gen_bool(0.5) {
            format!("{}", self.rng.gen_range(0..4))
        } else {
            format!("{} % 5", self.var())
        }
    }

    pub fn expr(&mut self, depth: u32) -> String {
        if depth == 0 || self.rng.gen_bool(0.3) {
            return self.atom();
        }
        let op = ["+", "-", "*", "/", "%", "<", "<=", "==", "!=", ">", "&&", "||"][self.rng.gen_range(0..12)];
        let l = self.expr(depth - 1);
        let r = self.expr(depth - 1);
        match self.rng.gen_range(0..12) {
            0 => format!("!({l})"),
            1 => format!("-({l})"),
            2 => format!("({l}) * 1000000000000"),
            _ => format!("({l} {op} {r})"),
        }
    }

    fn cond(&mut self) -> String {
        let v = self.var();
        let k = self.rng.gen_range(-3..=3);
        match self.rng.gen_range(0..4) {
            0 => self.expr(2),
            1 => format!("{v} < {k}"),
            2 => format!("{v} == {k}"),
            _ => format!("{v} >= {k}"),
        }
    }

    fn ind(out: &mut String, level: usize) {
        for _ in 0..level {
            out.push_str("  ");
        }
    }

    fn stmt(&mut self, out: &mut String, level: usize, depth: u32) {
        Self::ind(out, level);
        let choice = self.rng.gen_range(0..20);
        match choice {
            0..=5 => {
                let v = self.var();
                let e = self.expr(2);
                let _ = writeln!(out, "{v} = {e};");
            }
            6 | 7 if self.inputs < 3 => {
                self.inputs += 1;
                let v = self.var();
                let lo = self.rng.gen_range(-4..=4);
                let w = self.rng.gen_range(0..=7);
                let _ = writeln!(out, "input({v}, {lo}, {});", lo + w);
            }
            8 | 9 if depth > 0 => {
                let c = self.cond();
                let _ = writeln!(out, "if ({c}) {{");
                self.block_body(out, level + 1, depth - 1);
                Self::ind(out, level);
                if self.rng.gen_bool(0.5) {
                    out.push_str("} else {\n");
                    self.block_body(out, level + 1, depth - 1);
                    Self::ind(out, level);
                }
                out.push_str("}\n");
            }
            10 | 11 if depth > 0 && self.loop_depth < 2 => {
                let c = format!("c{}", self.counters);
                self.counters += 1;
                let trips = self.rng.gen_range(0..=8);
                let _ = writeln!(out, "{{ int {c}; {c} = 0; while ({c} < {trips}) {{");
                self.loop_depth += 1;
                self.block_body(out, level + 1, depth - 1);
                self.loop_depth -= 1;
                if self.rng.gen_bool(0.3) {
                    Self::ind(out, level + 1);
                    let k = self.cond();
                    let _ = writeln!(out, "if ({k}) {{ break; }}");
                }
                Self::ind(out, level + 1);
                let _ = writeln!(out, "{c} = {c} + 1;");
                Self::ind(out, level);
                out.push_str("} }\n");
            }
            12 if depth > 0 => {
                let l = format!("L{}", self.labels);
                self.labels += 1;
                let c = self.cond();
                let _ = writeln!(out, "if ({c}) {{ goto {l}; }}");
                for _ in 0..self.rng.gen_range(1..3) {
                    self.stmt(out, level, depth - 1);
                }
                Self::ind(out, level);
                let _ = writeln!(out, "{l}: ;");
            }
            13 if self.funcs > 0 => {
                let f = self.rng.gen_range(0..self.funcs);
                let _ = writeln!(out, "f{f}();");
            }
            14 if depth > 0 => {
                let v = self.var();
                let _ = writeln!(out, "switch ({v}) {{");
                for k in 0..self.rng.gen_range(1..4) {
                    Self::ind(out, level);
                    let _ = writeln!(out, "case {}:", k - 1);
                    self.block_body(out, level + 1, depth - 1);
                }
                if self.rng.gen_bool(0.5) {
                    Self::ind(out, level);
                    out.push_str("default:\n");
                    self.block_body(out, level + 1, depth - 1);
                }
                Self::ind(out, level);
                out.push_str("}\n");
            }
            15 => {
                let c = self.cond();
                let _ = writeln!(out, "assert({c});");
            }
            16 if self.has_array => {
                let i = self.small_index();
                let e = self.expr(1);
                let _ = writeln!(out, "a[{i}] = {e};");
            }
            17 if self.has_float => {
                let e = self.expr(1);
                let _ = writeln!(out, "f = f * 0.5 + (float) ({e}) / 3.0;");
            }
            _ => {
                let v = self.var();
                let _ = writeln!(out, "{v} = {v} + {};", self.rng.gen_range(-2..=2));
            }
        }
    }

    fn block_body(&mut self, out: &mut String, level: usize, depth: u32) {
        for _ in 0..self.rng.gen_range(1..=3) {
            self.stmt(out, level, depth);
        }
    }

    /// A complete program.
    pub fn program(&mut self) -> String {
        let nints = self.rng.gen_range(1..=4);
        self.vars = (0..nints).map(|i| format!("x{i}")).collect();
        self.has_array = self.rng.gen_bool(0.3);
        self.has_float = self.rng.gen_bool(0.3);
        let mut out = String::new();
        for v in &self.vars {
            out.push_str(&format!("int {v};\n"));
        }
        if self.has_array {
            out.push_str("int a[4];\n");
        }
        if self.has_float {
            out.push_str("float f;\n");
        }
        let nfuncs = self.rng.gen_range(0..=2);
        for k in 0..nfuncs {
            let _ = writeln!(out, "void f{k}() {{");
            self.block_body(&mut out, 1, 1);
            out.push_str("}\n");
            self.funcs += 1;
        }
        out.push_str("void main() {\n");
        for _ in 0..self.rng.gen_range(2..=6) {
            self.stmt(&mut out, 1, 2);
        }
        out.push_str("}\n");
        out
    }
}

fn matches_kind(e: ErrorKind, w: WarningKind) -> bool {
    matches!(
        (e, w),
        (ErrorKind::Overflow, WarningKind::Overflow)
            | (ErrorKind::DivByZero, WarningKind::DivByZero)
            | (ErrorKind::ArrayOutOfBounds, WarningKind::ArrayOutOfBounds)
            | (ErrorKind::AssertFailure, WarningKind::AssertMayFail)
    )
}

pub enum Verdict {
    Sound,
    /// The concrete state space was too large to enumerate.
    Skipped,
    Unsound(String),
}

/// Compare the analysis of `p` against its exhaustive enumeration.
pub fn check_sound(p: &ValidProgram, bound: usize) -> Verdict {
    let reach = match enumerate_reachable(p, bound) {
        Ok(r) => r,
        Err(ConcreteError::StateSpaceTooLarge { .. }) | Err(ConcreteError::FloatInput) => return Verdict::Skipped,
    };
    let config = AnalysisConfig { observe: true, ..Default::default() };
    let r = match Analyzer::new(p, config).run(Mode::Report) {
        Ok(r) => r,
        Err(e) => return Verdict::Unsound(format!("analysis failed: {e}")),
    };
    for (id, states) in &reach.at {
        let Some(env) = r.observations.get(id) else {
            return Verdict::Unsound(format!("statement {id} reached concretely but not abstractly"));
        };
        for st in states {
            if let Some(why) = st.first_escape(env) {
                return Verdict::Unsound(format!("statement {id}: {why}"));
            }
        }
    }
    if !reach.finals.is_empty() {
        for st in &reach.finals {
            if let Some(why) = st.first_escape(&r.final_env) {
                return Verdict::Unsound(format!("exit: {why}"));
            }
        }
    }
    let warnings = r.warnings.to_vec();
    for e in &reach.errors {
        if !warnings.iter().any(|w| w.loc == e.loc && matches_kind(e.kind, w.kind)) {
            return Verdict::Unsound(format!("missed error {e}"));
        }
    }
    Verdict::Sound
}

/// Run the soundness check on random programs until `want` of them were
/// enumerable. Returns the number checked and the first failure, if any.
pub fn soundness_campaign(first_seed: u64, want: usize, bound: usize) -> (usize, usize, Option<String>) {
    let (mut checked, mut skipped) = (0, 0);
    let mut seed = first_seed;
    while checked < want {
        let src = Gen::new(seed).program();
        seed += 1;
        let p = match compile(&src) {
            Ok(p) => p,
            Err(e) => return (checked, skipped, Some(format!("generator produced an invalid program ({e}):\n{src}"))),
        };
        match check_sound(&p, bound) {
            Verdict::Sound => checked += 1,
            Verdict::Skipped => skipped += 1,
            Verdict::Unsound(why) => return (checked, skipped, Some(format!("{why}\n{src}"))),
        }
    }
    (checked, skipped, None)
}
