//! Resolved syntax tree of the analyzed language.
//!
//! Identifiers are resolved during parsing: every variable reference carries
//! the [`VarId`] of its declaration, and every expression carries its scalar
//! type. Statement nodes are numbered in pre-order, so re-parsing the same
//! text yields the same [`StmtId`]s.

use std::fmt;
use std::sync::Arc;

/// A 1-based source position.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct Location {
    pub line: u32,
    pub col: u32,
}

impl Location {
    pub fn new(line: u32, col: u32) -> Self {
        Location { line, col }
    }
}

impl fmt::Display for Location {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.line, self.col)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum ScalarType {
    Int,
    Float,
}

impl fmt::Display for ScalarType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ScalarType::Int => f.write_str("int"),
            ScalarType::Float => f.write_str("float"),
        }
    }
}

pub type VarId = usize;
pub type FuncId = usize;
pub type StmtId = u32;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VarScope {
    Global,
    Local(FuncId),
}

/// One declared variable (scalar, array or function pointer).
#[derive(Debug, Clone, PartialEq)]
pub struct VarInfo {
    /// Name as written in the source.
    pub name: String,
    /// Unique abstract-cell name. Globals keep their source name, locals are
    /// qualified by function (`f:x`), shadowed locals get a `#n` suffix.
    pub cell: Arc<str>,
    pub ty: ScalarType,
    pub array_len: Option<u64>,
    /// For function-pointer variables: the declared target set, in order.
    pub fn_targets: Option<Vec<String>>,
    pub scope: VarScope,
    pub loc: Location,
}

impl VarInfo {
    pub fn is_array(&self) -> bool {
        self.array_len.is_some()
    }

    pub fn is_fn_pointer(&self) -> bool {
        self.fn_targets.is_some()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
    Div,
    Rem,
    Lt,
    Le,
    Gt,
    Ge,
    Eq,
    Ne,
    And,
    Or,
}

impl BinOp {
    pub fn symbol(self) -> &'static str {
        match self {
            BinOp::Add => "+",
            BinOp::Sub => "-",
            BinOp::Mul => "*",
            BinOp::Div => "/",
            BinOp::Rem => "%",
            BinOp::Lt => "<",
            BinOp::Le => "<=",
            BinOp::Gt => ">",
            BinOp::Ge => ">=",
            BinOp::Eq => "==",
            BinOp::Ne => "!=",
            BinOp::And => "&&",
            BinOp::Or => "||",
        }
    }

    pub fn is_comparison(self) -> bool {
        matches!(
            self,
            BinOp::Lt | BinOp::Le | BinOp::Gt | BinOp::Ge | BinOp::Eq | BinOp::Ne
        )
    }

    pub fn is_logical(self) -> bool {
        matches!(self, BinOp::And | BinOp::Or)
    }

    /// Binding strength, higher binds tighter.
    pub fn precedence(self) -> u8 {
        match self {
            BinOp::Or => 1,
            BinOp::And => 2,
            BinOp::Eq | BinOp::Ne => 3,
            BinOp::Lt | BinOp::Le | BinOp::Gt | BinOp::Ge => 4,
            BinOp::Add | BinOp::Sub => 5,
            BinOp::Mul | BinOp::Div | BinOp::Rem => 6,
        }
    }

    /// The comparison obtained by swapping operands (`a < b` iff `b > a`).
    pub fn mirrored(self) -> BinOp {
        match self {
            BinOp::Lt => BinOp::Gt,
            BinOp::Le => BinOp::Ge,
            BinOp::Gt => BinOp::Lt,
            BinOp::Ge => BinOp::Le,
            other => other,
        }
    }

    /// The comparison that holds exactly when `self` does not.
    pub fn negated(self) -> Option<BinOp> {
        Some(match self {
            BinOp::Lt => BinOp::Ge,
            BinOp::Le => BinOp::Gt,
            BinOp::Gt => BinOp::Le,
            BinOp::Ge => BinOp::Lt,
            BinOp::Eq => BinOp::Ne,
            BinOp::Ne => BinOp::Eq,
            _ => return None,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum UnOp {
    Neg,
    Not,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Expr {
    pub loc: Location,
    pub ty: ScalarType,
    pub kind: ExprKind,
}

#[derive(Debug, Clone, PartialEq)]
pub enum ExprKind {
    Read(LValue),
    Int(i64),
    Float(f64),
    Binary(BinOp, Box<Expr>, Box<Expr>),
    Unary(UnOp, Box<Expr>),
    Cast(ScalarType, Box<Expr>),
}

impl Expr {
    /// The variable read by this expression, when it is a plain scalar read.
    pub fn as_scalar_var(&self) -> Option<VarId> {
        match &self.kind {
            ExprKind::Read(LValue::Var(v)) => Some(*v),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum LValue {
    Var(VarId),
    Index(VarId, Box<Expr>),
}

impl LValue {
    pub fn var(&self) -> VarId {
        match self {
            LValue::Var(v) | LValue::Index(v, _) => *v,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Block {
    pub stmts: Vec<Stmt>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Stmt {
    pub id: StmtId,
    pub loc: Location,
    /// Set when the statement is preceded by a `/*@dispatch*/` annotation.
    pub dispatch: bool,
    pub kind: StmtKind,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Callee {
    Direct { name: String, func: Option<FuncId> },
    Indirect { pointer: VarId },
}

#[derive(Debug, Clone, PartialEq)]
pub struct SwitchArm {
    pub loc: Location,
    /// `None` for the `default` arm.
    pub value: Option<i64>,
    pub body: Block,
}

#[derive(Debug, Clone, PartialEq)]
pub enum StmtKind {
    /// Declaration with optional initializer; scope runs to the end of the
    /// enclosing block.
    Decl { var: VarId, init: Option<Expr> },
    Assign { target: LValue, value: Expr },
    /// Function-pointer assignment `fp = g;`, stored as the index of `g` in
    /// the pointer's declared target set.
    SetFnPtr { pointer: VarId, target: String, index: usize },
    If { cond: Expr, then_block: Block, else_block: Option<Block> },
    While { cond: Expr, body: Block },
    Block(Block),
    Label(String),
    Goto(String),
    Break,
    Return(Option<Expr>),
    Call { callee: Callee, dest: Option<LValue> },
    Switch { scrutinee: Expr, arms: Vec<SwitchArm> },
    Assert(Expr),
    Input { target: LValue, lo: Expr, hi: Expr },
    Skip,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Function {
    pub name: String,
    pub loc: Location,
    /// `None` for `void` functions.
    pub ret: Option<ScalarType>,
    /// Cell holding the value of `return e;` for non-void functions.
    pub ret_var: Option<VarId>,
    pub body: Block,
}

/// A top-level global declaration, kept in source order.
#[derive(Debug, Clone, PartialEq)]
pub struct GlobalDecl {
    pub var: VarId,
    pub init: Option<Expr>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Program {
    pub source: Arc<str>,
    pub vars: Vec<VarInfo>,
    pub globals: Vec<GlobalDecl>,
    pub functions: Vec<Function>,
    pub entry: FuncId,
    /// One past the largest statement id.
    pub stmt_count: u32,
}

impl Program {
    pub fn var(&self, id: VarId) -> &VarInfo {
        &self.vars[id]
    }

    pub fn function(&self, id: FuncId) -> &Function {
        &self.functions[id]
    }

    pub fn function_by_name(&self, name: &str) -> Option<FuncId> {
        self.functions.iter().position(|f| f.name == name)
    }

    /// Visit every statement in every function, pre-order.
    pub fn for_each_stmt(&self, mut f: impl FnMut(FuncId, &Stmt)) {
        for (fid, func) in self.functions.iter().enumerate() {
            func.body.walk(&mut |s| f(fid, s));
        }
    }

    /// Look up a statement by id.
    pub fn stmt(&self, id: StmtId) -> Option<(FuncId, &Stmt)> {
        for (fid, func) in self.functions.iter().enumerate() {
            if let Some(s) = func.body.find(id) {
                return Some((fid, s));
            }
        }
        None
    }
}

impl Block {
    /// Variables declared directly in this block. Their scope is the whole
    /// block: they are bound on entry and a declaration without initializer
    /// has no further effect.
    pub fn locals(&self) -> impl Iterator<Item = VarId> + '_ {
        self.stmts.iter().filter_map(|s| match &s.kind {
            StmtKind::Decl { var, .. } => Some(*var),
            _ => None,
        })
    }

    pub fn walk<'a>(&'a self, f: &mut impl FnMut(&'a Stmt)) {
        for s in &self.stmts {
            s.walk(f);
        }
    }

    fn find(&self, id: StmtId) -> Option<&Stmt> {
        self.stmts.iter().find_map(|s| s.find(id))
    }
}

impl Stmt {
    /// Pre-order traversal of this statement and all nested statements.
    pub fn walk<'a>(&'a self, f: &mut impl FnMut(&'a Stmt)) {
        f(self);
        for b in self.child_blocks() {
            b.walk(f);
        }
    }

    pub fn child_blocks(&self) -> Vec<&Block> {
        match &self.kind {
            StmtKind::If { then_block, else_block, .. } => {
                let mut v = vec![then_block];
                if let Some(e) = else_block {
                    v.push(e);
                }
                v
            }
            StmtKind::While { body, .. } => vec![body],
            StmtKind::Block(b) => vec![b],
            StmtKind::Switch { arms, .. } => arms.iter().map(|a| &a.body).collect(),
            _ => Vec::new(),
        }
    }

    fn find(&self, id: StmtId) -> Option<&Stmt> {
        if self.id == id {
            return Some(self);
        }
        // ids are pre-order, so a subtree only holds ids above its root
        if id < self.id {
            return None;
        }
        self.child_blocks().into_iter().find_map(|b| b.find(id))
    }
}

/// Destination of a forward jump. `break` and `return` are jumps to the
/// exit of the enclosing construct.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Target {
    Label(FuncId, String),
    LoopExit(StmtId),
    SwitchExit(StmtId),
    FnEnd(FuncId),
}
