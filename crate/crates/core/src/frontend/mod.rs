//! Lexing, parsing and validation of `.mc` source programs.
//!
//! The accepted language is a small block-structured C subset: `int` and
//! `float` scalars and fixed-size arrays, `if`/`else`, `while`, `switch`
//! without fall-through, forward `goto`, `break`, `return`, direct and
//! indirect (function-pointer) calls, `assert` and the nondeterministic
//! `input(x, lo, hi)`.

pub mod ast;
pub mod lexer;
pub mod parser;
pub mod pretty;
pub mod validate;

use thiserror::Error;

pub use ast::*;
pub use lexer::{tokenize, Token, TokenKind};
pub use parser::parse_program;
pub use pretty::pretty_print;
pub use validate::{validate, ValidProgram};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum FrontendError {
    #[error("{loc}: lexical error: {message}")]
    Lex { loc: Location, message: String },
    #[error("{loc}: syntax error: {message}")]
    Syntax { loc: Location, message: String },
    #[error("{loc}: type error: {message}")]
    Type { loc: Location, message: String },
    #[error("{loc}: undeclared variable '{name}'")]
    Undeclared { loc: Location, name: String },
    #[error("no 'main' function")]
    MissingEntry,
    #[error("{loc}: goto {label} jumps backwards")]
    BackwardGoto { loc: Location, label: String },
    #[error("{loc}: goto {label} jumps into a nested block")]
    GotoIntoBlock { loc: Location, label: String },
    #[error("{loc}: duplicate label {label}")]
    DuplicateLabel { loc: Location, label: String },
    #[error("recursive call cycle: {}", cycle.join(" -> "))]
    RecursiveCall { cycle: Vec<String> },
    #[error("{loc}: unresolved target '{name}'")]
    UnresolvedTarget { loc: Location, name: String },
    #[error("{loc}: break outside of while or switch")]
    BreakOutsideLoop { loc: Location },
}

/// Tokenize, parse and validate in one step.
pub fn compile(source: &str) -> Result<ValidProgram, FrontendError> {
    let tokens = tokenize(source)?;
    let program = parse_program(source, &tokens)?;
    validate(program)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(src: &str) -> Result<Program, FrontendError> {
        parse_program(src, &tokenize(src)?)
    }

    #[test]
    fn minimal_program() {
        let p = compile("int x; void main() { x = 3; }").unwrap();
        assert_eq!(p.globals.len(), 1);
        let body = &p.function(p.entry).body.stmts;
        assert_eq!(body.len(), 1);
        assert!(matches!(body[0].kind, StmtKind::Assign { .. }));
    }

    #[test]
    fn sequencer_skeleton() {
        let src = "int i; int tick;
            void main() {
                while (1) {
                    input(tick, 0, 1);
                    switch (i) {
                        case 0: tick = 0;
                        case 1: tick = 1;
                        case 2: tick = 2;
                    }
                    i = (i + 1) % 3;
                }
            }";
        let p = compile(src).unwrap();
        let body = &p.function(p.entry).body.stmts;
        let StmtKind::While { body, .. } = &body[0].kind else { panic!("expected loop") };
        let StmtKind::Switch { arms, .. } = &body.stmts[1].kind else { panic!("expected switch") };
        let values: Vec<_> = arms.iter().map(|a| a.value).collect();
        assert_eq!(values, vec![Some(0), Some(1), Some(2)]);
    }

    #[test]
    fn missing_expression_is_syntax_error_at_semicolon() {
        match compile("int x; void main() { x = ; }") {
            Err(FrontendError::Syntax { loc, .. }) => assert_eq!(loc, Location::new(1, 26)),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn array_used_as_scalar() {
        assert!(matches!(compile("int t[3]; void main() { t = 1; }"), Err(FrontendError::Type { .. })));
        assert!(matches!(compile("int x; void main() { x[0] = 1; }"), Err(FrontendError::Type { .. })));
    }

    #[test]
    fn mixed_types_rejected() {
        assert!(matches!(compile("int x; float f; void main() { x = x + f; }"), Err(FrontendError::Type { .. })));
        assert!(compile("int x; float f; void main() { x = x + (int)f; }").is_ok());
    }

    #[test]
    fn backward_goto() {
        let r = compile("void main() { L: ; goto L; }");
        assert!(matches!(r, Err(FrontendError::BackwardGoto { .. })), "{r:?}");
    }

    #[test]
    fn forward_goto_out_of_loop_is_fine() {
        compile("int x; void main() { while (x < 3) { if (x == 2) { goto out; } x = x + 1; } out: ; }").unwrap();
    }

    #[test]
    fn goto_into_block() {
        let r = compile("int x; void main() { goto L; if (x) { L: x = 1; } }");
        assert!(matches!(r, Err(FrontendError::GotoIntoBlock { .. })), "{r:?}");
    }

    #[test]
    fn duplicate_label() {
        let r = compile("void main() { L: ; L: ; }");
        assert!(matches!(r, Err(FrontendError::DuplicateLabel { .. })));
    }

    #[test]
    fn two_cycle_recursion() {
        let r = compile("void f() { g(); } void g() { f(); } void main() { f(); }");
        assert_eq!(r.unwrap_err(), FrontendError::RecursiveCall { cycle: vec!["f".into(), "g".into()] });
    }

    #[test]
    fn recursion_through_function_pointer() {
        let r = compile("fnptr fp = {g}; void g() { (*fp)(); } void main() { g(); }");
        assert!(matches!(r, Err(FrontendError::RecursiveCall { .. })));
    }

    #[test]
    fn unresolved_targets() {
        assert!(matches!(compile("void main() { nope(); }"), Err(FrontendError::UnresolvedTarget { .. })));
        assert!(matches!(
            compile("fnptr fp = {g, h}; void g() { } void main() { (*fp)(); }"),
            Err(FrontendError::UnresolvedTarget { .. })
        ));
        assert!(matches!(compile("void main() { goto nowhere; }"), Err(FrontendError::UnresolvedTarget { .. })));
    }

    #[test]
    fn break_outside_loop() {
        assert!(matches!(compile("void main() { break; }"), Err(FrontendError::BreakOutsideLoop { .. })));
    }

    #[test]
    fn indirect_targets_resolved_in_order() {
        let p = compile("fnptr fp = {h, g}; void g() { } void h() { } void main() { (*fp)(); }").unwrap();
        let fp = p.vars.iter().position(|v| v.name == "fp").unwrap();
        let names: Vec<_> = p.targets_of(fp).iter().map(|f| p.function(*f).name.clone()).collect();
        assert_eq!(names, vec!["h", "g"]);
    }

    #[test]
    fn int64_min_literal() {
        let p = parse("int x = -9223372036854775808; void main() { }").unwrap();
        assert_eq!(p.globals[0].init.as_ref().unwrap().kind, ExprKind::Int(i64::MIN));
    }

    #[test]
    fn shadowed_locals_get_distinct_cells() {
        let p = compile("void main() { int x; { int x; x = 1; } x = 2; }").unwrap();
        let cells: Vec<_> = p.vars.iter().map(|v| v.cell.to_string()).collect();
        assert_eq!(cells, vec!["main:x", "main:x#2"]);
    }

    #[test]
    fn pretty_round_trip() {
        let src = "int g = -3; float f; int t[4]; fnptr fp = {a, b};
            int a() { return g * 2; }
            int b() { g = -(g); return 1; }
            void main() {
                int x;
                input(x, -2, 5);
                /*@dispatch*/ if (x < 0) { x = -x; } else if (x == 0 || !x) { x = 1; } else { t[x % 4] = x; }
                fp = b;
                x = (*fp)();
                while (x < 10 && g != 0) { x = x + 1; if (x == 7) { break; } }
                f = (float)x * 2.5 - -1.0e-3;
                switch (x) { case -1: x = 0; default: { x = 2; } }
                goto end;
                assert(x >= 0);
                end: ;
            }";
        let p = compile(src).unwrap();
        let printed = pretty_print(&p);
        let q = compile(&printed).unwrap();
        assert_eq!(pretty_print(&q), printed);
        assert_eq!(p.stmt_count, q.stmt_count);
        assert_eq!(p.vars.len(), q.vars.len());
        let mut ids_p = Vec::new();
        p.for_each_stmt(|_, s| ids_p.push((s.id, std::mem::discriminant(&s.kind))));
        let mut ids_q = Vec::new();
        q.for_each_stmt(|_, s| ids_q.push((s.id, std::mem::discriminant(&s.kind))));
        assert_eq!(ids_p, ids_q);
    }
}
