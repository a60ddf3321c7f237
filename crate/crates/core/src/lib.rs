pub mod frontend;
pub mod absdomain;
pub mod concrete;
pub mod interpreter;
pub mod parallel;
pub mod bench;
pub mod report;

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/language.md")]
    mod language {}
    #[doc = include_str!("../../../book/src/domain.md")]
    mod domain {}
    #[doc = include_str!("../../../book/src/interpreter.md")]
    mod interpreter {}
    #[doc = include_str!("../../../book/src/oracle.md")]
    mod oracle {}
    #[doc = include_str!("../../../book/src/parallel.md")]
    mod parallel {}
    #[doc = include_str!("../../../book/src/cli.md")]
    mod cli {}
}
