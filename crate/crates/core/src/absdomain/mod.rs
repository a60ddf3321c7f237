//! Interval abstract domain over persistent, sharing-preserving environments.

pub mod env;
pub mod interval;
pub mod rounding;
pub mod transfer;
pub mod tree;

pub use env::{AbstractEnv, DeltaPatch, EnvError};
pub use interval::{Flags, IntBound, Interval, Ladder};
pub use transfer::{assign, eval, guard, store, Evaluator, Warning, WarningKind, WarningLog};
