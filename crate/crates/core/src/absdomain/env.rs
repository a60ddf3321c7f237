use std::fmt;
use std::sync::Arc;

use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::frontend::ScalarType;

use super::interval::{Interval, Ladder};
use super::tree::{self, Compare, Link};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum EnvError {
    #[error("cell '{0}' is an int on one side and a float on the other")]
    KindMismatch(Arc<str>),
    #[error("cell '{0}' is bound in only one of the compared environments")]
    KeySetMismatch(Arc<str>),
    #[error("cell '{0}' is not bound")]
    Unbound(Arc<str>),
    #[error("cell '{0}' is already bound")]
    Rebind(Arc<str>),
    #[error("patch base digest does not match the environment")]
    DigestMismatch,
    #[error("malformed encoding: {0}")]
    Decode(String),
}

/// Abstract memory state: either ⊥ (no reachable concrete state) or a
/// persistent map from cell name to a non-empty interval.
///
/// Cloning is O(1). Environments derived from a common ancestor share every
/// subtree they did not modify; [`AbstractEnv::same`] tests physical
/// identity in constant time.
#[derive(Clone, Default)]
pub struct AbstractEnv {
    root: Option<Link>,
}

impl fmt::Debug for AbstractEnv {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self}")
    }
}

impl fmt::Display for AbstractEnv {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let Some(t) = &self.root else { return f.write_str("⊥") };
        f.write_str("{")?;
        let mut first = true;
        let mut res = Ok(());
        tree::for_each(t, &mut |k, v| {
            if res.is_ok() {
                res = write!(f, "{}{k}: {v}", if first { "" } else { ", " });
            }
            first = false;
        });
        res?;
        f.write_str("}")
    }
}

/// Canonical serialization format version.
pub const FORMAT_VERSION: u8 = 0x01;

const KIND_INT: u8 = 0;
const KIND_FLOAT: u8 = 1;
const BOUND_FINITE: u8 = 0;
const BOUND_NEG_INF: u8 = 1;
const BOUND_POS_INF: u8 = 2;

impl AbstractEnv {
    pub fn bottom() -> AbstractEnv {
        AbstractEnv { root: None }
    }

    /// The environment with no cells (a single, unconstrained state).
    pub fn empty() -> AbstractEnv {
        AbstractEnv { root: Some(None) }
    }

    /// Build from (name, interval) pairs; any empty interval gives ⊥.
    pub fn from_cells<K: Into<Arc<str>>>(cells: impl IntoIterator<Item = (K, Interval)>) -> AbstractEnv {
        let mut env = AbstractEnv::empty();
        for (k, v) in cells {
            env = env.set(&k.into(), v);
        }
        env
    }

    pub fn is_bottom(&self) -> bool {
        self.root.is_none()
    }

    /// Physical identity.
    pub fn same(&self, other: &AbstractEnv) -> bool {
        match (&self.root, &other.root) {
            (None, None) => true,
            (Some(a), Some(b)) => tree::same(a, b),
            _ => false,
        }
    }

    pub fn len(&self) -> usize {
        self.root.as_ref().map_or(0, tree::size)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn height(&self) -> usize {
        self.root.as_ref().map_or(0, tree::height)
    }

    pub fn get(&self, cell: &str) -> Option<Interval> {
        tree::get(self.root.as_ref()?, cell).copied()
    }

    pub fn contains(&self, cell: &str) -> bool {
        self.get(cell).is_some()
    }

    /// Strong update of an existing or new cell. Setting an empty interval
    /// makes the whole environment ⊥; updating ⊥ leaves it ⊥.
    pub fn set(&self, cell: &Arc<str>, v: Interval) -> AbstractEnv {
        let Some(t) = &self.root else { return self.clone() };
        if v.is_empty() {
            return AbstractEnv::bottom();
        }
        AbstractEnv { root: Some(tree::insert(t, cell, v)) }
    }

    /// Bind a new cell to every value of its type.
    pub fn new_var(&self, cell: &Arc<str>, kind: ScalarType) -> Result<AbstractEnv, EnvError> {
        self.new_var_with(cell, Interval::top(kind))
    }

    /// Bind a new cell to a given initial value.
    pub fn new_var_with(&self, cell: &Arc<str>, v: Interval) -> Result<AbstractEnv, EnvError> {
        if self.contains(cell) {
            return Err(EnvError::Rebind(cell.clone()));
        }
        Ok(self.set(cell, v))
    }

    /// Remove a cell. On ⊥ this is a no-op.
    pub fn del_var(&self, cell: &str) -> Result<AbstractEnv, EnvError> {
        let Some(t) = &self.root else { return Ok(self.clone()) };
        if tree::get(t, cell).is_none() {
            return Err(EnvError::Unbound(cell.into()));
        }
        Ok(AbstractEnv { root: Some(tree::remove(t, cell)) })
    }

    /// Remove a cell if bound.
    pub fn forget(&self, cell: &str) -> AbstractEnv {
        match &self.root {
            Some(t) if tree::get(t, cell).is_some() => AbstractEnv { root: Some(tree::remove(t, cell)) },
            _ => self.clone(),
        }
    }

    /// Reuse nodes of `reference` wherever this environment holds equal
    /// subtrees, e.g. after binding and then removing block locals.
    pub fn reshare(&self, reference: &AbstractEnv) -> AbstractEnv {
        match (&self.root, &reference.root) {
            (Some(a), Some(b)) => AbstractEnv { root: Some(tree::reshare(a, b)) },
            _ => self.clone(),
        }
    }

    fn merge_with(
        &self,
        other: &AbstractEnv,
        f: impl Fn(&Interval, &Interval) -> Interval,
    ) -> Result<(AbstractEnv, usize), EnvError> {
        let (a, b) = match (&self.root, &other.root) {
            (None, _) => return Ok((other.clone(), 0)),
            (_, None) => return Ok((self.clone(), 0)),
            (Some(a), Some(b)) => (a, b),
        };
        let mut visits = 0;
        let t = tree::merge(
            a,
            b,
            &mut |k, x, y| {
                if x.kind() != y.kind() {
                    return Err(EnvError::KindMismatch(k.clone()));
                }
                Ok(f(x, y))
            },
            &mut visits,
        )?;
        Ok((AbstractEnv { root: Some(t) }, visits))
    }

    /// Least upper bound; also returns the number of node pairs visited.
    /// Cells bound on one side only are kept with their value.
    pub fn join_counted(&self, other: &AbstractEnv) -> Result<(AbstractEnv, usize), EnvError> {
        self.merge_with(other, Interval::join)
    }

    pub fn join(&self, other: &AbstractEnv) -> Result<AbstractEnv, EnvError> {
        Ok(self.join_counted(other)?.0)
    }

    /// Cell-wise threshold widening of `self` (previous iterate) by `next`.
    pub fn widen(&self, next: &AbstractEnv, ladder: &Ladder) -> Result<AbstractEnv, EnvError> {
        Ok(self.merge_with(next, |a, b| a.widen(b, ladder))?.0)
    }

    /// Cell-wise intersection; ⊥ when any cell becomes empty.
    pub fn meet(&self, other: &AbstractEnv) -> Result<AbstractEnv, EnvError> {
        if self.is_bottom() || other.is_bottom() {
            return Ok(AbstractEnv::bottom());
        }
        let (env, _) = self.merge_with(other, Interval::meet)?;
        let mut empty = false;
        env.for_each(|_, v| empty |= v.is_empty());
        Ok(if empty { AbstractEnv::bottom() } else { env })
    }

    /// Inclusion. Both sides must bind the same cells unless one is ⊥.
    pub fn leq(&self, other: &AbstractEnv) -> Result<bool, EnvError> {
        let (a, b) = match (&self.root, &other.root) {
            (None, _) => return Ok(true),
            (_, None) => return Ok(false),
            (Some(a), Some(b)) => (a, b),
        };
        let mut kind_err = None;
        let r = tree::compare(a, b, &mut |k, x, y| {
            if x.kind() != y.kind() {
                kind_err.get_or_insert_with(|| k.clone());
                return false;
            }
            x.leq(y)
        });
        if let Some(k) = kind_err {
            return Err(EnvError::KindMismatch(k));
        }
        match r {
            Compare::Holds => Ok(true),
            Compare::Fails => Ok(false),
            Compare::KeysDiffer(k) => Err(EnvError::KeySetMismatch(k)),
        }
    }

    /// Visit cells in name order.
    pub fn for_each(&self, mut f: impl FnMut(&Arc<str>, &Interval)) {
        if let Some(t) = &self.root {
            tree::for_each(t, &mut |k, v| f(k, v));
        }
    }

    pub fn cells(&self) -> Vec<(Arc<str>, Interval)> {
        let mut out = Vec::with_capacity(self.len());
        self.for_each(|k, v| out.push((k.clone(), *v)));
        out
    }

    /// Byte encoding determined by the value alone.
    pub fn canonical_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(16 + self.len() * 32);
        self.write_canonical(&mut out);
        out
    }

    pub fn write_canonical(&self, out: &mut Vec<u8>) {
        out.push(FORMAT_VERSION);
        match &self.root {
            None => out.push(0),
            Some(t) => {
                out.push(1);
                out.extend_from_slice(&(tree::size(t) as u32).to_be_bytes());
                tree::for_each(t, &mut |k, v| {
                    write_name(out, k);
                    write_interval(out, v);
                });
            }
        }
    }

    /// Decode a canonical encoding from the front of `bytes`; returns the
    /// environment and the number of bytes consumed.
    pub fn read_canonical(bytes: &[u8]) -> Result<(AbstractEnv, usize), EnvError> {
        let mut r = Reader { bytes, pos: 0 };
        if r.u8()? != FORMAT_VERSION {
            return Err(EnvError::Decode("unknown format version".into()));
        }
        let env = match r.u8()? {
            0 => AbstractEnv::bottom(),
            1 => {
                let n = r.u32()?;
                let mut env = AbstractEnv::empty();
                let mut prev: Option<Arc<str>> = None;
                for _ in 0..n {
                    let k = r.name()?;
                    if prev.as_ref().is_some_and(|p| *p >= k) {
                        return Err(EnvError::Decode("cells out of order".into()));
                    }
                    let v = r.interval()?;
                    if v.is_empty() {
                        return Err(EnvError::Decode("empty cell".into()));
                    }
                    env = env.set(&k, v);
                    prev = Some(k);
                }
                env
            }
            _ => return Err(EnvError::Decode("bad environment tag".into())),
        };
        Ok((env, r.pos))
    }

    pub fn from_canonical(bytes: &[u8]) -> Result<AbstractEnv, EnvError> {
        let (env, n) = AbstractEnv::read_canonical(bytes)?;
        if n != bytes.len() {
            return Err(EnvError::Decode("trailing bytes".into()));
        }
        Ok(env)
    }

    /// SHA-256 of the canonical encoding.
    pub fn digest(&self) -> [u8; 32] {
        Sha256::digest(self.canonical_bytes()).into()
    }

    /// Changes turning `self` into `derived`.
    pub fn diff(&self, derived: &AbstractEnv) -> DeltaPatch {
        self.diff_with_digest(derived, self.digest())
    }

    /// As [`AbstractEnv::diff`] with the base digest already known.
    pub fn diff_with_digest(&self, derived: &AbstractEnv, base_digest: [u8; 32]) -> DeltaPatch {
        let mut entries = Vec::new();
        let derived_bottom = derived.is_bottom();
        if !derived_bottom {
            let empty: Link = None;
            let base = self.root.as_ref().unwrap_or(&empty);
            tree::diff(base, derived.root.as_ref().unwrap(), &mut entries);
        }
        DeltaPatch { base_digest, derived_bottom, entries }
    }

    pub fn apply_patch(&self, patch: &DeltaPatch) -> Result<AbstractEnv, EnvError> {
        if self.digest() != patch.base_digest {
            return Err(EnvError::DigestMismatch);
        }
        Ok(self.apply_patch_unchecked(patch))
    }

    /// Apply without verifying the base digest.
    pub fn apply_patch_unchecked(&self, patch: &DeltaPatch) -> AbstractEnv {
        if patch.derived_bottom {
            return AbstractEnv::bottom();
        }
        let mut t = self.root.clone().unwrap_or(None);
        for (k, change) in &patch.entries {
            t = match change {
                Some(v) => tree::insert(&t, k, *v),
                None => tree::remove(&t, k),
            };
        }
        AbstractEnv { root: Some(t) }
    }

    /// Number of tree nodes of `self` that also occur, by identity, in `other`.
    pub fn shared_nodes(&self, other: &AbstractEnv) -> usize {
        let (Some(a), Some(b)) = (&self.root, &other.root) else { return 0 };
        let mut xs = Vec::new();
        tree::node_addresses(a, &mut xs);
        let mut ys = Vec::new();
        tree::node_addresses(b, &mut ys);
        let ys: std::collections::HashSet<usize> = ys.into_iter().collect();
        xs.iter().filter(|x| ys.contains(x)).count()
    }

    /// Treap ordering, heap and size invariants (for tests).
    pub fn check_invariants(&self) -> bool {
        self.root.as_ref().is_none_or(tree::check_invariants)
    }
}

/// Difference between two environments, sorted by cell name.
#[derive(Debug, Clone, PartialEq)]
pub struct DeltaPatch {
    /// Digest of the canonical encoding of the base environment.
    pub base_digest: [u8; 32],
    /// The derived environment is ⊥; `entries` is then empty.
    pub derived_bottom: bool,
    /// `Some(v)` sets a cell, `None` removes it.
    pub entries: Vec<(Arc<str>, Option<Interval>)>,
}

const PATCH_SET: u8 = 0;
const PATCH_REMOVE: u8 = 1;

impl DeltaPatch {
    pub fn is_empty(&self) -> bool {
        !self.derived_bottom && self.entries.is_empty()
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(40 + self.entries.len() * 32);
        out.push(FORMAT_VERSION);
        out.push(self.derived_bottom as u8);
        out.extend_from_slice(&self.base_digest);
        out.extend_from_slice(&(self.entries.len() as u32).to_be_bytes());
        for (k, change) in &self.entries {
            write_name(&mut out, k);
            match change {
                Some(v) => {
                    out.push(PATCH_SET);
                    write_interval(&mut out, v);
                }
                None => out.push(PATCH_REMOVE),
            }
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<DeltaPatch, EnvError> {
        let mut r = Reader { bytes, pos: 0 };
        if r.u8()? != FORMAT_VERSION {
            return Err(EnvError::Decode("unknown patch version".into()));
        }
        let flags = r.u8()?;
        if flags > 1 {
            return Err(EnvError::Decode("unknown patch flags".into()));
        }
        let base_digest: [u8; 32] = r.take(32)?.try_into().unwrap();
        let n = r.u32()?;
        let mut entries = Vec::with_capacity(n.min(1 << 16) as usize);
        for _ in 0..n {
            let k = r.name()?;
            let change = match r.u8()? {
                PATCH_SET => Some(r.interval()?),
                PATCH_REMOVE => None,
                _ => return Err(EnvError::Decode("bad patch action".into())),
            };
            entries.push((k, change));
        }
        if r.pos != bytes.len() {
            return Err(EnvError::Decode("trailing bytes".into()));
        }
        Ok(DeltaPatch { base_digest, derived_bottom: flags & 1 == 1, entries })
    }
}

fn write_name(out: &mut Vec<u8>, k: &str) {
    out.extend_from_slice(&(k.len() as u16).to_be_bytes());
    out.extend_from_slice(k.as_bytes());
}

fn write_interval(out: &mut Vec<u8>, v: &Interval) {
    use super::interval::IntBound;
    match *v {
        Interval::Int(lo, hi) => {
            out.push(KIND_INT);
            for b in [lo, hi] {
                match b {
                    IntBound::Finite(x) => {
                        out.push(BOUND_FINITE);
                        out.extend_from_slice(&x.to_be_bytes());
                    }
                    IntBound::NegInf => {
                        out.push(BOUND_NEG_INF);
                        out.extend_from_slice(&[0; 8]);
                    }
                    IntBound::PosInf => {
                        out.push(BOUND_POS_INF);
                        out.extend_from_slice(&[0; 8]);
                    }
                }
            }
        }
        Interval::Float(lo, hi) => {
            out.push(KIND_FLOAT);
            for b in [lo, hi] {
                if b == f64::NEG_INFINITY {
                    out.push(BOUND_NEG_INF);
                    out.extend_from_slice(&[0; 8]);
                } else if b == f64::INFINITY {
                    out.push(BOUND_POS_INF);
                    out.extend_from_slice(&[0; 8]);
                } else {
                    out.push(BOUND_FINITE);
                    out.extend_from_slice(&b.to_bits().to_be_bytes());
                }
            }
        }
        Interval::Empty(_) => unreachable!("empty intervals are never stored"),
    }
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], EnvError> {
        if self.bytes.len() - self.pos < n {
            return Err(EnvError::Decode("truncated input".into()));
        }
        let s = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u8(&mut self) -> Result<u8, EnvError> {
        Ok(self.take(1)?[0])
    }

    fn u32(&mut self) -> Result<u32, EnvError> {
        Ok(u32::from_be_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn name(&mut self) -> Result<Arc<str>, EnvError> {
        let n = u16::from_be_bytes(self.take(2)?.try_into().unwrap()) as usize;
        let s = std::str::from_utf8(self.take(n)?).map_err(|_| EnvError::Decode("cell name not UTF-8".into()))?;
        Ok(s.into())
    }

    fn interval(&mut self) -> Result<Interval, EnvError> {
        use super::interval::IntBound;
        let kind = self.u8()?;
        let mut bounds = [(0u8, [0u8; 8]); 2];
        for b in &mut bounds {
            b.0 = self.u8()?;
            b.1 = self.take(8)?.try_into().unwrap();
            if b.0 > BOUND_POS_INF {
                return Err(EnvError::Decode("bad bound tag".into()));
            }
        }
        match kind {
            KIND_INT => {
                let [lo, hi] = bounds.map(|(tag, p)| match tag {
                    BOUND_FINITE => IntBound::Finite(i64::from_be_bytes(p)),
                    BOUND_NEG_INF => IntBound::NegInf,
                    _ => IntBound::PosInf,
                });
                Ok(Interval::int_bounds(lo, hi))
            }
            KIND_FLOAT => {
                let [lo, hi] = bounds.map(|(tag, p)| match tag {
                    BOUND_FINITE => f64::from_bits(u64::from_be_bytes(p)),
                    BOUND_NEG_INF => f64::NEG_INFINITY,
                    _ => f64::INFINITY,
                });
                if lo.is_nan() || hi.is_nan() {
                    return Err(EnvError::Decode("NaN bound".into()));
                }
                Ok(Interval::float(lo, hi))
            }
            _ => Err(EnvError::Decode("bad kind".into())),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn env(cells: &[(&str, i64, i64)]) -> AbstractEnv {
        AbstractEnv::from_cells(cells.iter().map(|(k, a, b)| (*k, Interval::int(*a, *b))))
    }

    #[test]
    fn join_examples() {
        assert_eq!(env(&[("x", 1, 3)]).join(&env(&[("x", 2, 5)])).unwrap().cells(), env(&[("x", 1, 5)]).cells());
        let a = env(&[("x", 0, 1), ("y", 4, 4)]);
        let (j, visits) = a.join_counted(&a).unwrap();
        assert!(j.same(&a));
        assert_eq!(visits, 0);
        let b = env(&[("x", 0, 1)]);
        assert!(AbstractEnv::bottom().join(&b).unwrap().same(&b));
    }

    #[test]
    fn leq_examples() {
        assert!(env(&[("x", 1, 2)]).leq(&env(&[("x", 0, 5)])).unwrap());
        assert!(!env(&[("x", 1, 2)]).leq(&env(&[("x", 2, 5)])).unwrap());
        assert!(matches!(env(&[("x", 1, 2)]).leq(&env(&[("y", 1, 2)])), Err(EnvError::KeySetMismatch(_))));
        let f = AbstractEnv::from_cells([("x", Interval::float(0.0, 1.0))]);
        assert!(matches!(env(&[("x", 1, 2)]).leq(&f), Err(EnvError::KindMismatch(_))));
    }

    #[test]
    fn new_and_del_var() {
        let x: Arc<str> = "x".into();
        let e = AbstractEnv::empty().new_var(&x, ScalarType::Int).unwrap();
        assert_eq!(e.get("x"), Some(Interval::int(i64::MIN, i64::MAX)));
        assert_eq!(env(&[("x", 0, 1), ("y", 2, 3)]).del_var("x").unwrap().cells(), env(&[("y", 2, 3)]).cells());
        let d = env(&[("a", 0, 1), ("b", 2, 3), ("c", 4, 5), ("y", 6, 6)]);
        let back = d.new_var(&x, ScalarType::Int).unwrap().del_var("x").unwrap().reshare(&d);
        assert!(back.same(&d));
        assert!(matches!(d.new_var(&"a".into(), ScalarType::Int), Err(EnvError::Rebind(_))));
        assert!(matches!(d.del_var("zz"), Err(EnvError::Unbound(_))));
    }

    #[test]
    fn serialization_is_history_independent() {
        let a = env(&[("a", 0, 1), ("b", 2, 3), ("c", 4, 5)]);
        let b = env(&[("c", 4, 5), ("a", 0, 1), ("b", 2, 3)]);
        assert_eq!(a.canonical_bytes(), b.canonical_bytes());
        assert_eq!(AbstractEnv::bottom().canonical_bytes(), vec![FORMAT_VERSION, 0]);
        assert_eq!(AbstractEnv::from_canonical(&a.canonical_bytes()).unwrap().cells(), a.cells());
    }

    #[test]
    fn diff_and_patch() {
        let base = env(&[("x", 0, 1), ("y", 2, 3)]);
        let derived = base.set(&"x".into(), Interval::int(0, 5));
        let p = base.diff(&derived);
        assert_eq!(p.entries, vec![("x".into(), Some(Interval::int(0, 5)))]);
        assert_eq!(base.apply_patch(&p).unwrap().cells(), derived.cells());
        assert!(base.diff(&base).is_empty());
        assert!(base.apply_patch(&base.diff(&base)).unwrap().same(&base));
        let full = AbstractEnv::bottom().diff(&base);
        assert_eq!(full.entries.len(), 2);
        assert!(matches!(derived.apply_patch(&p), Err(EnvError::DigestMismatch)));
        assert_eq!(DeltaPatch::from_bytes(&p.to_bytes()).unwrap(), p);
    }
}
