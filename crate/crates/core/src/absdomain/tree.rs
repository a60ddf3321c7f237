//! Persistent treap keyed by cell name.
//!
//! Node priorities are a hash of the key, so the shape of a tree depends
//! only on its key set: two maps with the same keys have the same shape no
//! matter how they were built. Binary operations exploit this by walking
//! both trees in lockstep and skipping physically shared subtrees, and fall
//! back to split-based merging where key sets diverge.

use std::cmp::Ordering;
use std::collections::hash_map::DefaultHasher;
use std::hash::{Hash, Hasher};
use std::sync::Arc;

use super::interval::Interval;

pub type Link = Option<Arc<Node>>;

#[derive(Debug)]
pub struct Node {
    pub key: Arc<str>,
    pub val: Interval,
    prio: u64,
    size: usize,
    pub left: Link,
    pub right: Link,
}

pub fn priority(key: &str) -> u64 {
    let mut h = DefaultHasher::new();
    key.hash(&mut h);
    h.finish()
}

/// Heap order: larger (priority, key) sits higher.
fn above(a: &Node, b: &Node) -> bool {
    (a.prio, &*a.key) > (b.prio, &*b.key)
}

pub fn size(t: &Link) -> usize {
    t.as_ref().map_or(0, |n| n.size)
}

pub fn same(a: &Link, b: &Link) -> bool {
    match (a, b) {
        (None, None) => true,
        (Some(x), Some(y)) => Arc::ptr_eq(x, y),
        _ => false,
    }
}

fn node(key: Arc<str>, val: Interval, prio: u64, left: Link, right: Link) -> Link {
    let size = 1 + size(&left) + size(&right);
    Some(Arc::new(Node { key, val, prio, size, left, right }))
}

/// Copy of `n` with new children and value, or `n` itself when nothing changed.
fn rebuild(n: &Arc<Node>, val: Interval, left: Link, right: Link) -> Link {
    if val == n.val && same(&left, &n.left) && same(&right, &n.right) {
        Some(n.clone())
    } else {
        node(n.key.clone(), val, n.prio, left, right)
    }
}

pub fn get<'a>(mut t: &'a Link, key: &str) -> Option<&'a Interval> {
    while let Some(n) = t {
        match key.cmp(&n.key) {
            Ordering::Less => t = &n.left,
            Ordering::Greater => t = &n.right,
            Ordering::Equal => return Some(&n.val),
        }
    }
    None
}

/// Split into keys below `key`, the node for `key` if present, and keys above.
pub fn split(t: &Link, key: &str) -> (Link, Option<Arc<Node>>, Link) {
    match t {
        None => (None, None, None),
        Some(n) => match key.cmp(&n.key) {
            Ordering::Equal => (n.left.clone(), Some(n.clone()), n.right.clone()),
            Ordering::Less => {
                let (l, m, r) = split(&n.left, key);
                (l, m, rebuild(n, n.val, r, n.right.clone()))
            }
            Ordering::Greater => {
                let (l, m, r) = split(&n.right, key);
                (rebuild(n, n.val, n.left.clone(), l), m, r)
            }
        },
    }
}

/// Concatenate two treaps whose keys are all ordered `a < b`.
pub fn concat(a: &Link, b: &Link) -> Link {
    match (a, b) {
        (None, _) => b.clone(),
        (_, None) => a.clone(),
        (Some(x), Some(y)) => {
            if above(x, y) {
                let r = concat(&x.right, b);
                rebuild(x, x.val, x.left.clone(), r)
            } else {
                let l = concat(a, &y.left);
                rebuild(y, y.val, l, y.right.clone())
            }
        }
    }
}

/// Insert or overwrite; untouched subtrees are shared with `t`.
pub fn insert(t: &Link, key: &Arc<str>, val: Interval) -> Link {
    insert_with_prio(t, key, val, priority(key))
}

fn insert_with_prio(t: &Link, key: &Arc<str>, val: Interval, prio: u64) -> Link {
    match t {
        None => node(key.clone(), val, prio, None, None),
        Some(n) => {
            if *key == n.key {
                return rebuild(n, val, n.left.clone(), n.right.clone());
            }
            if (prio, &**key) > (n.prio, &*n.key) {
                let (l, _, r) = split(t, key);
                return node(key.clone(), val, prio, l, r);
            }
            if **key < *n.key {
                let l = insert_with_prio(&n.left, key, val, prio);
                rebuild(n, n.val, l, n.right.clone())
            } else {
                let r = insert_with_prio(&n.right, key, val, prio);
                rebuild(n, n.val, n.left.clone(), r)
            }
        }
    }
}

/// Remove `key` if present.
pub fn remove(t: &Link, key: &str) -> Link {
    match t {
        None => None,
        Some(n) => match key.cmp(&n.key) {
            Ordering::Equal => concat(&n.left, &n.right),
            Ordering::Less => rebuild(n, n.val, remove(&n.left, key), n.right.clone()),
            Ordering::Greater => rebuild(n, n.val, n.left.clone(), remove(&n.right, key)),
        },
    }
}

/// In-order traversal.
pub fn for_each<'a>(t: &'a Link, f: &mut impl FnMut(&'a Arc<str>, &'a Interval)) {
    if let Some(n) = t {
        for_each(&n.left, f);
        f(&n.key, &n.val);
        for_each(&n.right, f);
    }
}

pub fn height(t: &Link) -> usize {
    t.as_ref().map_or(0, |n| 1 + height(&n.left).max(height(&n.right)))
}

/// Combine two maps key by key. `both` merges values present on both sides
/// and may fail; keys present on one side only are kept as they are.
/// Subtrees shared by identity are returned without traversal. When the
/// result equals one argument's subtree, that subtree is reused, preferring
/// `a`. `visits` counts the node pairs examined.
pub fn merge<E>(
    a: &Link,
    b: &Link,
    both: &mut impl FnMut(&Arc<str>, &Interval, &Interval) -> Result<Interval, E>,
    visits: &mut usize,
) -> Result<Link, E> {
    if same(a, b) {
        return Ok(a.clone());
    }
    let (x, y) = match (a, b) {
        (None, _) => return Ok(b.clone()),
        (_, None) => return Ok(a.clone()),
        (Some(x), Some(y)) => (x, y),
    };
    *visits += 1;
    if x.key == y.key {
        let l = merge(&x.left, &y.left, both, visits)?;
        let r = merge(&x.right, &y.right, both, visits)?;
        let v = both(&x.key, &x.val, &y.val)?;
        if v == x.val && same(&l, &x.left) && same(&r, &x.right) {
            return Ok(a.clone());
        }
        if v == y.val && same(&l, &y.left) && same(&r, &y.right) {
            return Ok(b.clone());
        }
        return Ok(node(x.key.clone(), v, x.prio, l, r));
    }
    // key sets differ here: the higher root keeps its place
    if above(x, y) {
        let (bl, bm, br) = split(b, &x.key);
        let l = merge(&x.left, &bl, both, visits)?;
        let r = merge(&x.right, &br, both, visits)?;
        let v = match &bm {
            Some(m) => both(&x.key, &x.val, &m.val)?,
            None => x.val,
        };
        Ok(rebuild(x, v, l, r))
    } else {
        let (al, am, ar) = split(a, &y.key);
        let l = merge(&al, &y.left, both, visits)?;
        let r = merge(&ar, &y.right, both, visits)?;
        let v = match &am {
            Some(m) => both(&y.key, &m.val, &y.val)?,
            None => y.val,
        };
        Ok(rebuild(y, v, l, r))
    }
}

/// Result of a lockstep comparison.
pub enum Compare {
    /// Every pair of values satisfied the predicate.
    Holds,
    /// Some pair failed it.
    Fails,
    /// The key sets differ; carries a key present on one side only.
    KeysDiffer(Arc<str>),
}

/// Check `pred` on every pair of values for two maps with the same key set.
pub fn compare(a: &Link, b: &Link, pred: &mut impl FnMut(&Arc<str>, &Interval, &Interval) -> bool) -> Compare {
    if same(a, b) {
        return Compare::Holds;
    }
    match (a, b) {
        (Some(x), Some(y)) if x.key == y.key => {
            if !pred(&x.key, &x.val, &y.val) {
                return Compare::Fails;
            }
            match compare(&x.left, &y.left, pred) {
                Compare::Holds => compare(&x.right, &y.right, pred),
                other => other,
            }
        }
        (Some(x), Some(y)) => {
            // same key sets would give the same root
            let k = if get(b, &x.key).is_none() { x.key.clone() } else { y.key.clone() };
            Compare::KeysDiffer(k)
        }
        (Some(x), None) | (None, Some(x)) => Compare::KeysDiffer(x.key.clone()),
        (None, None) => Compare::Holds,
    }
}

/// Difference entry: `Some(v)` sets the key to `v`, `None` removes it.
pub type Change = (Arc<str>, Option<Interval>);

/// Sorted list of changes turning `base` into `derived`, skipping shared
/// subtrees.
pub fn diff(base: &Link, derived: &Link, out: &mut Vec<Change>) {
    if same(base, derived) {
        return;
    }
    match (base, derived) {
        (Some(x), Some(y)) if x.key == y.key => {
            diff(&x.left, &y.left, out);
            if x.val != y.val {
                out.push((y.key.clone(), Some(y.val)));
            }
            diff(&x.right, &y.right, out);
        }
        _ => {
            // shapes diverge: merge the two sorted entry lists
            let mut xs = Vec::with_capacity(size(base));
            for_each(base, &mut |k, v| xs.push((k, v)));
            let mut ys = Vec::with_capacity(size(derived));
            for_each(derived, &mut |k, v| ys.push((k, v)));
            let (mut i, mut j) = (0, 0);
            while i < xs.len() || j < ys.len() {
                let ord = match (xs.get(i), ys.get(j)) {
                    (Some(a), Some(b)) => a.0.cmp(b.0),
                    (Some(_), None) => Ordering::Less,
                    _ => Ordering::Greater,
                };
                match ord {
                    Ordering::Less => {
                        out.push((xs[i].0.clone(), None));
                        i += 1;
                    }
                    Ordering::Greater => {
                        out.push((ys[j].0.clone(), Some(*ys[j].1)));
                        j += 1;
                    }
                    Ordering::Equal => {
                        if xs[i].1 != ys[j].1 {
                            out.push((ys[j].0.clone(), Some(*ys[j].1)));
                        }
                        i += 1;
                        j += 1;
                    }
                }
            }
        }
    }
}

/// Replace subtrees of `t` by their equal counterparts in `reference`, so
/// that values rebuilt from the same data regain physical sharing.
pub fn reshare(t: &Link, reference: &Link) -> Link {
    if same(t, reference) {
        return t.clone();
    }
    match (t, reference) {
        (Some(x), Some(y)) if x.key == y.key => {
            let l = reshare(&x.left, &y.left);
            let r = reshare(&x.right, &y.right);
            if x.val == y.val && same(&l, &y.left) && same(&r, &y.right) {
                reference.clone()
            } else {
                rebuild(x, x.val, l, r)
            }
        }
        _ => t.clone(),
    }
}

/// Collect the addresses of all nodes.
pub fn node_addresses(t: &Link, out: &mut Vec<usize>) {
    if let Some(n) = t {
        out.push(Arc::as_ptr(n) as usize);
        node_addresses(&n.left, out);
        node_addresses(&n.right, out);
    }
}

/// Check the search-tree and heap invariants and the cached sizes.
pub fn check_invariants(t: &Link) -> bool {
    fn go(t: &Link, lo: Option<&str>, hi: Option<&str>) -> Option<usize> {
        let Some(n) = t else { return Some(0) };
        if lo.is_some_and(|l| *n.key <= *l) || hi.is_some_and(|h| *n.key >= *h) {
            return None;
        }
        if n.prio != priority(&n.key) {
            return None;
        }
        for c in [&n.left, &n.right].into_iter().flatten() {
            if above(c, n) {
                return None;
            }
        }
        let l = go(&n.left, lo, Some(&n.key))?;
        let r = go(&n.right, Some(&n.key), hi)?;
        (n.size == l + r + 1).then_some(n.size)
    }
    go(t, None, None).is_some()
}
