use std::collections::BTreeMap;

use crate::absdomain::{AbstractEnv, EnvError, WarningLog};
use crate::frontend::Target;

/// Whether possible runtime errors are recorded while analyzing.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Mode {
    /// Fixpoint computation: warnings are suppressed.
    Iterate,
    /// Replay from stabilized invariants: warnings are recorded.
    Report,
}

impl Mode {
    pub fn code(self) -> u8 {
        match self {
            Mode::Iterate => 0,
            Mode::Report => 1,
        }
    }

    pub fn from_code(c: u8) -> Option<Mode> {
        match c {
            0 => Some(Mode::Iterate),
            1 => Some(Mode::Report),
            _ => None,
        }
    }
}

/// Abstract state of the lifted semantics: the state flowing to the next
/// statement, the states waiting at forward jump targets, and the warnings
/// reported so far.
#[derive(Debug, Clone)]
pub struct FlowState {
    pub direct: AbstractEnv,
    pub pending: BTreeMap<Target, AbstractEnv>,
    pub warnings: WarningLog,
}

impl FlowState {
    pub fn new(direct: AbstractEnv) -> FlowState {
        FlowState { direct, pending: BTreeMap::new(), warnings: WarningLog::new() }
    }

    /// Send the direct state to `target`; the direct flow becomes dead.
    pub fn jump(&mut self, target: Target) -> Result<(), EnvError> {
        let d = std::mem::replace(&mut self.direct, AbstractEnv::bottom());
        if d.is_bottom() {
            return Ok(());
        }
        let joined = match self.pending.remove(&target) {
            Some(old) => old.join(&d)?,
            None => d,
        };
        self.pending.insert(target, joined);
        Ok(())
    }

    /// Join the states pending at `target` into the direct state.
    pub fn absorb(&mut self, target: &Target) -> Result<(), EnvError> {
        if let Some(p) = self.pending.remove(target) {
            self.direct = self.direct.join(&p)?;
        }
        Ok(())
    }

    /// Join another state's pending entries into this one.
    pub fn merge_pending(&mut self, other: BTreeMap<Target, AbstractEnv>) -> Result<(), EnvError> {
        for (t, e) in other {
            let joined = match self.pending.remove(&t) {
                Some(old) => old.join(&e)?,
                None => e,
            };
            self.pending.insert(t, joined);
        }
        Ok(())
    }
}
