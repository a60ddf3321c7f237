use std::collections::{BTreeMap, HashMap};
use std::ops::Deref;
use std::sync::Arc;

use sha2::{Digest, Sha256};

use super::ast::*;
use super::FrontendError;

/// A program that passed [`validate`]: acyclic call graph, forward-only
/// visible gotos, unique labels, resolved call targets. Cheap to clone and
/// safe to share between threads.
#[derive(Debug, Clone)]
pub struct ValidProgram {
    inner: Arc<Validated>,
}

#[derive(Debug)]
struct Validated {
    program: Program,
    fn_targets: BTreeMap<VarId, Vec<FuncId>>,
    digest: [u8; 32],
}

impl Deref for ValidProgram {
    type Target = Program;

    fn deref(&self) -> &Program {
        &self.inner.program
    }
}

impl ValidProgram {
    /// Resolved target set of a function-pointer variable, in declared order.
    pub fn targets_of(&self, pointer: VarId) -> &[FuncId] {
        self.inner.fn_targets.get(&pointer).map(Vec::as_slice).unwrap_or(&[])
    }

    /// SHA-256 of the source text; identifies the program across processes.
    pub fn digest(&self) -> [u8; 32] {
        self.inner.digest
    }

    pub fn program(&self) -> &Program {
        &self.inner.program
    }
}

pub fn validate(mut program: Program) -> Result<ValidProgram, FrontendError> {
    let names: HashMap<String, FuncId> =
        program.functions.iter().enumerate().map(|(i, f)| (f.name.clone(), i)).collect();

    let mut fn_targets = BTreeMap::new();
    for (id, v) in program.vars.iter().enumerate() {
        if let Some(targets) = &v.fn_targets {
            let mut resolved = Vec::new();
            for t in targets {
                let fid = *names
                    .get(t)
                    .ok_or_else(|| FrontendError::UnresolvedTarget { loc: v.loc, name: t.clone() })?;
                resolved.push(fid);
            }
            fn_targets.insert(id, resolved);
        }
    }

    // resolve direct calls, then type-check call destinations and returns
    for func in &mut program.functions {
        resolve_calls(&mut func.body, &names)?;
    }
    for func in &program.functions {
        check_calls(&program, &fn_targets, func)?;
        check_labels(func)?;
        check_breaks(&func.body, 0)?;
    }
    check_acyclic(&program, &fn_targets)?;

    let digest = Sha256::digest(program.source.as_bytes()).into();
    Ok(ValidProgram { inner: Arc::new(Validated { program, fn_targets, digest }) })
}

fn resolve_calls(block: &mut Block, names: &HashMap<String, FuncId>) -> Result<(), FrontendError> {
    for s in &mut block.stmts {
        let loc = s.loc;
        match &mut s.kind {
            StmtKind::Call { callee: Callee::Direct { name, func }, .. } => {
                *func = Some(
                    *names
                        .get(name.as_str())
                        .ok_or_else(|| FrontendError::UnresolvedTarget { loc, name: name.clone() })?,
                );
            }
            StmtKind::If { then_block, else_block, .. } => {
                resolve_calls(then_block, names)?;
                if let Some(e) = else_block {
                    resolve_calls(e, names)?;
                }
            }
            StmtKind::While { body, .. } | StmtKind::Block(body) => resolve_calls(body, names)?,
            StmtKind::Switch { arms, .. } => {
                for a in arms {
                    resolve_calls(&mut a.body, names)?;
                }
            }
            _ => {}
        }
    }
    Ok(())
}

fn check_calls(
    program: &Program,
    fn_targets: &BTreeMap<VarId, Vec<FuncId>>,
    func: &Function,
) -> Result<(), FrontendError> {
    let mut result = Ok(());
    func.body.walk(&mut |s| {
        if result.is_err() {
            return;
        }
        match &s.kind {
            StmtKind::Call { callee, dest: Some(dest) } => {
                let want = program.var(dest.var()).ty;
                let callees: Vec<FuncId> = match callee {
                    Callee::Direct { func, .. } => func.iter().copied().collect(),
                    Callee::Indirect { pointer } => fn_targets[pointer].clone(),
                };
                for c in callees {
                    let f = program.function(c);
                    if f.ret != Some(want) {
                        result = Err(FrontendError::Type {
                            loc: s.loc,
                            message: format!("'{}' does not return {want}", f.name),
                        });
                        return;
                    }
                }
            }
            StmtKind::Return(Some(e)) => match func.ret {
                None => {
                    result = Err(FrontendError::Type {
                        loc: s.loc,
                        message: format!("void function '{}' returns a value", func.name),
                    })
                }
                Some(t) if t != e.ty => {
                    result = Err(FrontendError::Type {
                        loc: e.loc,
                        message: format!("returning {} from {t} function '{}'", e.ty, func.name),
                    })
                }
                _ => {}
            },
            _ => {}
        }
    });
    result
}

/// Address of a statement: alternating statement index and child-block
/// index, ending with the statement's index in its own block.
type Address = Vec<usize>;

fn collect_jumps(
    block: &Block,
    prefix: &mut Address,
    labels: &mut Vec<(String, Address, Location)>,
    gotos: &mut Vec<(String, Address, Location)>,
) {
    for (i, s) in block.stmts.iter().enumerate() {
        prefix.push(i);
        match &s.kind {
            StmtKind::Label(l) => labels.push((l.clone(), prefix.clone(), s.loc)),
            StmtKind::Goto(l) => gotos.push((l.clone(), prefix.clone(), s.loc)),
            _ => {}
        }
        for (b, child) in s.child_blocks().into_iter().enumerate() {
            prefix.push(b);
            collect_jumps(child, prefix, labels, gotos);
            prefix.pop();
        }
        prefix.pop();
    }
}

fn check_labels(func: &Function) -> Result<(), FrontendError> {
    let mut labels = Vec::new();
    let mut gotos = Vec::new();
    collect_jumps(&func.body, &mut Vec::new(), &mut labels, &mut gotos);
    let mut seen: HashMap<&str, &Address> = HashMap::new();
    for (name, addr, loc) in &labels {
        if seen.insert(name.as_str(), addr).is_some() {
            return Err(FrontendError::DuplicateLabel { loc: *loc, label: name.clone() });
        }
    }
    for (name, gaddr, loc) in &gotos {
        let Some(laddr) = seen.get(name.as_str()) else {
            return Err(FrontendError::UnresolvedTarget { loc: *loc, name: name.clone() });
        };
        if laddr.as_slice() < gaddr.as_slice() {
            return Err(FrontendError::BackwardGoto { loc: *loc, label: name.clone() });
        }
        // the label's block must enclose the goto
        let depth = laddr.len() - 1;
        let visible = gaddr.len() > depth && laddr[..depth] == gaddr[..depth];
        if !visible {
            return Err(FrontendError::GotoIntoBlock { loc: *loc, label: name.clone() });
        }
    }
    Ok(())
}

fn check_breaks(block: &Block, breakable: usize) -> Result<(), FrontendError> {
    for s in &block.stmts {
        match &s.kind {
            StmtKind::Break if breakable == 0 => return Err(FrontendError::BreakOutsideLoop { loc: s.loc }),
            StmtKind::While { body, .. } => check_breaks(body, breakable + 1)?,
            StmtKind::Switch { arms, .. } => {
                for a in arms {
                    check_breaks(&a.body, breakable + 1)?;
                }
            }
            _ => {
                for b in s.child_blocks() {
                    check_breaks(b, breakable)?;
                }
            }
        }
    }
    Ok(())
}

/// Direct and indirect callees of each function, in first-occurrence order.
pub fn call_graph(program: &Program, fn_targets: &BTreeMap<VarId, Vec<FuncId>>) -> Vec<Vec<FuncId>> {
    program
        .functions
        .iter()
        .map(|f| {
            let mut out: Vec<FuncId> = Vec::new();
            f.body.walk(&mut |s| {
                if let StmtKind::Call { callee, .. } = &s.kind {
                    let cs: Vec<FuncId> = match callee {
                        Callee::Direct { func, .. } => func.iter().copied().collect(),
                        Callee::Indirect { pointer } => fn_targets.get(pointer).cloned().unwrap_or_default(),
                    };
                    for c in cs {
                        if !out.contains(&c) {
                            out.push(c);
                        }
                    }
                }
            });
            out
        })
        .collect()
}

fn check_acyclic(program: &Program, fn_targets: &BTreeMap<VarId, Vec<FuncId>>) -> Result<(), FrontendError> {
    #[derive(Clone, Copy, PartialEq)]
    enum Mark {
        White,
        Grey,
        Black,
    }
    let graph = call_graph(program, fn_targets);
    let mut mark = vec![Mark::White; graph.len()];
    let mut stack: Vec<FuncId> = Vec::new();

    fn dfs(
        f: FuncId,
        graph: &[Vec<FuncId>],
        mark: &mut [Mark],
        stack: &mut Vec<FuncId>,
    ) -> Option<Vec<FuncId>> {
        mark[f] = Mark::Grey;
        stack.push(f);
        for &g in &graph[f] {
            match mark[g] {
                Mark::Grey => {
                    let start = stack.iter().position(|&x| x == g).unwrap();
                    return Some(stack[start..].to_vec());
                }
                Mark::White => {
                    if let Some(c) = dfs(g, graph, mark, stack) {
                        return Some(c);
                    }
                }
                Mark::Black => {}
            }
        }
        stack.pop();
        mark[f] = Mark::Black;
        None
    }

    for f in 0..graph.len() {
        if mark[f] == Mark::White {
            if let Some(cycle) = dfs(f, &graph, &mut mark, &mut stack) {
                return Err(FrontendError::RecursiveCall {
                    cycle: cycle.into_iter().map(|i| program.functions[i].name.clone()).collect(),
                });
            }
        }
    }
    Ok(())
}
