//! Abstract syntax of HABS programs.

use std::fmt;

use serde::Serialize;

use crate::counting::{CountExpr, TimeBounds};
use crate::rational::Rational;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub struct NodeId(pub u32);

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "#{}", self.0)
    }
}

/// Identifier of an `await`, unique across the program.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub struct PointId(pub u32);

/// 1-based line/column range in the source text.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize)]
pub struct Span {
    pub line: u32,
    pub col: u32,
    pub end_line: u32,
    pub end_col: u32,
}

impl Span {
    pub fn point(line: u32, col: u32) -> Span {
        Span { line, col, end_line: line, end_col: col }
    }

    pub fn to(self, end: Span) -> Span {
        Span { end_line: end.end_line, end_col: end.end_col, ..self }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct Meta {
    pub id: NodeId,
    pub span: Span,
}

/// Mints program-wide unique node and suspension-point ids.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct IdGen {
    pub next_node: u32,
    pub next_point: u32,
}

impl IdGen {
    pub fn node(&mut self) -> NodeId {
        self.next_node += 1;
        NodeId(self.next_node)
    }

    pub fn point(&mut self) -> PointId {
        self.next_point += 1;
        PointId(self.next_point)
    }

    pub fn meta(&mut self, span: Span) -> Meta {
        Meta { id: self.node(), span }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum Type {
    Unit,
    Bool,
    Int,
    Real,
    Rat,
    Fut(Box<Type>),
    Dc,
    Class(String),
}

impl Type {
    pub fn is_numeric(&self) -> bool {
        matches!(self, Type::Int | Type::Real | Type::Rat)
    }

    pub fn class_name(&self) -> Option<&str> {
        match self {
            Type::Class(name) => Some(name),
            _ => None,
        }
    }
}

impl fmt::Display for Type {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Type::Unit => f.write_str("Unit"),
            Type::Bool => f.write_str("Bool"),
            Type::Int => f.write_str("Int"),
            Type::Real => f.write_str("Real"),
            Type::Rat => f.write_str("Rat"),
            Type::Fut(t) => write!(f, "Fut<{t}>"),
            Type::Dc => f.write_str("DC"),
            Type::Class(c) => f.write_str(c),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum UnOp {
    Not,
    Neg,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
    Div,
    Le,
    Ge,
    Lt,
    Gt,
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
            BinOp::Le => "<=",
            BinOp::Ge => ">=",
            BinOp::Lt => "<",
            BinOp::Gt => ">",
            BinOp::Eq => "==",
            BinOp::Ne => "!=",
            BinOp::And => "&",
            BinOp::Or => "|",
        }
    }

    /// Binding strength; larger binds tighter.
    pub fn precedence(self) -> u8 {
        match self {
            BinOp::Or => 1,
            BinOp::And => 2,
            BinOp::Le | BinOp::Ge | BinOp::Lt | BinOp::Gt | BinOp::Eq | BinOp::Ne => 3,
            BinOp::Add | BinOp::Sub => 4,
            BinOp::Mul | BinOp::Div => 5,
        }
    }

    pub fn is_comparison(self) -> bool {
        self.precedence() == 3
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Expr {
    pub meta: Meta,
    pub kind: ExprKind,
}

#[derive(Clone, Debug, PartialEq)]
pub enum ExprKind {
    Num(Rational),
    Bool(bool),
    Null,
    This,
    Var(String),
    Now,
    Unary(UnOp, Box<Expr>),
    Binary(BinOp, Box<Expr>, Box<Expr>),
}

impl Expr {
    pub fn new(meta: Meta, kind: ExprKind) -> Expr {
        Expr { meta, kind }
    }

    pub fn var_name(&self) -> Option<&str> {
        match &self.kind {
            ExprKind::Var(v) => Some(v),
            _ => None,
        }
    }

    /// Visits this expression and all subexpressions, parents first.
    pub fn walk<'a>(&'a self, f: &mut dyn FnMut(&'a Expr)) {
        f(self);
        match &self.kind {
            ExprKind::Unary(_, e) => e.walk(f),
            ExprKind::Binary(_, a, b) => {
                a.walk(f);
                b.walk(f);
            }
            _ => {}
        }
    }

    pub fn walk_mut(&mut self, f: &mut dyn FnMut(&mut Expr)) {
        f(self);
        match &mut self.kind {
            ExprKind::Unary(_, e) => e.walk_mut(f),
            ExprKind::Binary(_, a, b) => {
                a.walk_mut(f);
                b.walk_mut(f);
            }
            _ => {}
        }
    }

    pub fn mentions_var(&self, name: &str) -> bool {
        let mut found = false;
        self.walk(&mut |e| {
            if e.var_name() == Some(name) {
                found = true;
            }
        });
        found
    }

    pub fn vars(&self) -> Vec<String> {
        let mut out = Vec::new();
        self.walk(&mut |e| {
            if let Some(v) = e.var_name() {
                if !out.iter().any(|o: &String| o == v) {
                    out.push(v.to_string());
                }
            }
        });
        out
    }

    /// Evaluates closed arithmetic/boolean expressions.
    pub fn const_value(&self) -> Option<ConstValue> {
        use num_traits::Zero;
        match &self.kind {
            ExprKind::Num(q) => Some(ConstValue::Num(q.clone())),
            ExprKind::Bool(b) => Some(ConstValue::Bool(*b)),
            ExprKind::Unary(UnOp::Neg, e) => match e.const_value()? {
                ConstValue::Num(q) => Some(ConstValue::Num(-q)),
                _ => None,
            },
            ExprKind::Unary(UnOp::Not, e) => match e.const_value()? {
                ConstValue::Bool(b) => Some(ConstValue::Bool(!b)),
                _ => None,
            },
            ExprKind::Binary(op, a, b) => {
                let (a, b) = (a.const_value()?, b.const_value()?);
                match (a, b) {
                    (ConstValue::Num(x), ConstValue::Num(y)) => Some(match op {
                        BinOp::Add => ConstValue::Num(x + y),
                        BinOp::Sub => ConstValue::Num(x - y),
                        BinOp::Mul => ConstValue::Num(x * y),
                        BinOp::Div if !y.is_zero() => ConstValue::Num(x / y),
                        BinOp::Div => return None,
                        BinOp::Le => ConstValue::Bool(x <= y),
                        BinOp::Ge => ConstValue::Bool(x >= y),
                        BinOp::Lt => ConstValue::Bool(x < y),
                        BinOp::Gt => ConstValue::Bool(x > y),
                        BinOp::Eq => ConstValue::Bool(x == y),
                        BinOp::Ne => ConstValue::Bool(x != y),
                        BinOp::And | BinOp::Or => return None,
                    }),
                    (ConstValue::Bool(x), ConstValue::Bool(y)) => match op {
                        BinOp::And => Some(ConstValue::Bool(x && y)),
                        BinOp::Or => Some(ConstValue::Bool(x || y)),
                        BinOp::Eq => Some(ConstValue::Bool(x == y)),
                        BinOp::Ne => Some(ConstValue::Bool(x != y)),
                        _ => None,
                    },
                    _ => None,
                }
            }
            _ => None,
        }
    }

    pub fn const_num(&self) -> Option<Rational> {
        match self.const_value()? {
            ConstValue::Num(q) => Some(q),
            ConstValue::Bool(_) => None,
        }
    }

    pub fn is_const_true(&self) -> bool {
        self.const_value() == Some(ConstValue::Bool(true))
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum ConstValue {
    Num(Rational),
    Bool(bool),
}

#[derive(Clone, Debug, PartialEq)]
pub enum Guard {
    /// `e?`
    Poll(Expr),
    /// `duration(e)` or `duration(e, e2)`
    Duration(Expr, Option<Expr>),
    /// `diff e`
    Diff(Expr),
}

#[derive(Clone, Debug, PartialEq)]
pub enum Rhs {
    Expr(Expr),
    New { class: String, args: Vec<Expr> },
    Get(Expr),
    Call { callee: Expr, method: String, args: Vec<Expr> },
}

impl Rhs {
    pub fn exprs(&self) -> Vec<&Expr> {
        match self {
            Rhs::Expr(e) | Rhs::Get(e) => vec![e],
            Rhs::New { args, .. } => args.iter().collect(),
            Rhs::Call { callee, args, .. } => std::iter::once(callee).chain(args.iter()).collect(),
        }
    }

    pub fn exprs_mut(&mut self) -> Vec<&mut Expr> {
        match self {
            Rhs::Expr(e) | Rhs::Get(e) => vec![e],
            Rhs::New { args, .. } => args.iter_mut().collect(),
            Rhs::Call { callee, args, .. } => {
                std::iter::once(callee).chain(args.iter_mut()).collect()
            }
        }
    }
}

/// A `time_control` entry: `location.method = [first, last]`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TimeControl {
    pub location: String,
    pub method: String,
    pub first: CountExpr,
    pub last: CountExpr,
}

/// Annotations that prefix a statement.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct StmtAnnot {
    pub cost: Option<Rational>,
    pub dc: Option<Expr>,
    pub ctx_bounds: Option<TimeBounds>,
    /// Control offsets for the method extracted from a `while`.
    pub loop_control: Vec<TimeControl>,
}

impl StmtAnnot {
    pub fn is_empty(&self) -> bool {
        self.cost.is_none()
            && self.dc.is_none()
            && self.ctx_bounds.is_none()
            && self.loop_control.is_empty()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Stmt {
    pub meta: Meta,
    pub annot: StmtAnnot,
    pub kind: StmtKind,
}

#[derive(Clone, Debug, PartialEq)]
pub enum StmtKind {
    Skip,
    /// `[T] x = rhs;` or, without target, `rhs;`.
    Assign { ty: Option<Type>, target: Option<String>, rhs: Rhs },
    If { cond: Expr, then: Vec<Stmt>, els: Option<Vec<Stmt>> },
    While { cond: Expr, body: Vec<Stmt> },
    Await { point: PointId, guard: Guard },
    Duration { value: Expr, upper: Option<Expr> },
}

impl Stmt {
    pub fn new(meta: Meta, kind: StmtKind) -> Stmt {
        Stmt { meta, annot: StmtAnnot::default(), kind }
    }

    pub fn id(&self) -> NodeId {
        self.meta.id
    }

    /// Direct child blocks.
    pub fn blocks(&self) -> Vec<&Vec<Stmt>> {
        match &self.kind {
            StmtKind::If { then, els, .. } => {
                let mut v = vec![then];
                if let Some(e) = els {
                    v.push(e);
                }
                v
            }
            StmtKind::While { body, .. } => vec![body],
            _ => vec![],
        }
    }

    /// Expressions directly owned by this statement (not by nested statements).
    pub fn own_exprs(&self) -> Vec<&Expr> {
        let mut out: Vec<&Expr> = Vec::new();
        if let Some(dc) = &self.annot.dc {
            out.push(dc);
        }
        match &self.kind {
            StmtKind::Skip => {}
            StmtKind::Assign { rhs, .. } => out.extend(rhs.exprs()),
            StmtKind::If { cond, .. } | StmtKind::While { cond, .. } => out.push(cond),
            StmtKind::Await { guard, .. } => match guard {
                Guard::Poll(e) | Guard::Diff(e) => out.push(e),
                Guard::Duration(a, b) => {
                    out.push(a);
                    out.extend(b.iter());
                }
            },
            StmtKind::Duration { value, upper } => {
                out.push(value);
                out.extend(upper.iter());
            }
        }
        out
    }

    pub fn own_exprs_mut(&mut self) -> Vec<&mut Expr> {
        let mut out: Vec<&mut Expr> = Vec::new();
        if let Some(dc) = &mut self.annot.dc {
            out.push(dc);
        }
        match &mut self.kind {
            StmtKind::Skip => {}
            StmtKind::Assign { rhs, .. } => out.extend(rhs.exprs_mut()),
            StmtKind::If { cond, .. } | StmtKind::While { cond, .. } => out.push(cond),
            StmtKind::Await { guard, .. } => match guard {
                Guard::Poll(e) | Guard::Diff(e) => out.push(e),
                Guard::Duration(a, b) => {
                    out.push(a);
                    out.extend(b.iter_mut());
                }
            },
            StmtKind::Duration { value, upper } => {
                out.push(value);
                out.extend(upper.iter_mut());
            }
        }
        out
    }
}

/// Pre-order traversal over a block and all nested blocks.
pub fn walk_stmts<'a>(stmts: &'a [Stmt], f: &mut dyn FnMut(&'a Stmt)) {
    for s in stmts {
        f(s);
        for b in s.blocks() {
            walk_stmts(b, f);
        }
    }
}

pub fn walk_stmts_mut(stmts: &mut [Stmt], f: &mut dyn FnMut(&mut Stmt)) {
    for s in stmts {
        f(s);
        match &mut s.kind {
            StmtKind::If { then, els, .. } => {
                walk_stmts_mut(then, f);
                if let Some(e) = els {
                    walk_stmts_mut(e, f);
                }
            }
            StmtKind::While { body, .. } => walk_stmts_mut(body, f),
            _ => {}
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Param {
    pub meta: Meta,
    pub ty: Type,
    pub name: String,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct MethodContract {
    pub timed_requires: Option<Rational>,
    pub time_control: Vec<TimeControl>,
    pub requires: Option<Expr>,
    pub ensures: Option<Expr>,
    pub time_bounds: Option<TimeBounds>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct MethodDecl {
    pub meta: Meta,
    pub ret_ty: Type,
    pub name: String,
    pub params: Vec<Param>,
    pub body: Vec<Stmt>,
    pub ret: Option<Expr>,
    pub contract: MethodContract,
}

impl MethodDecl {
    /// Methods introduced by normalization carry a `$` in their name.
    pub fn is_synthetic(&self) -> bool {
        self.name.contains('$')
    }

    pub fn param(&self, name: &str) -> Option<&Param> {
        self.params.iter().find(|p| p.name == name)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct FieldDecl {
    pub meta: Meta,
    pub physical: bool,
    pub ty: Type,
    pub name: String,
    pub init: Option<Expr>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct OdeDecl {
    pub meta: Meta,
    pub field: String,
    pub rhs: Expr,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ClassDecl {
    pub meta: Meta,
    pub name: String,
    pub params: Vec<Param>,
    pub fields: Vec<FieldDecl>,
    pub physical: Option<Vec<OdeDecl>>,
    pub init: Option<Vec<Stmt>>,
    pub methods: Vec<MethodDecl>,
    pub invariant: Option<Expr>,
    pub creation: Option<Expr>,
}

impl ClassDecl {
    pub fn method(&self, name: &str) -> Option<&MethodDecl> {
        self.methods.iter().find(|m| m.name == name)
    }

    pub fn field(&self, name: &str) -> Option<&FieldDecl> {
        self.fields.iter().find(|f| f.name == name)
    }

    /// Type of a field or constructor parameter.
    pub fn member_type(&self, name: &str) -> Option<&Type> {
        self.params
            .iter()
            .find(|p| p.name == name)
            .map(|p| &p.ty)
            .or_else(|| self.field(name).map(|f| &f.ty))
    }

    pub fn is_member(&self, name: &str) -> bool {
        self.member_type(name).is_some()
    }

    pub fn physical_fields(&self) -> impl Iterator<Item = &FieldDecl> {
        self.fields.iter().filter(|f| f.physical)
    }

    pub fn ode_of(&self, field: &str) -> Option<&OdeDecl> {
        self.physical.as_ref()?.iter().find(|o| o.field == field)
    }

    pub fn is_controlled(&self) -> bool {
        self.methods.iter().any(|m| m.contract.timed_requires.is_some())
    }

    pub fn treq(&self, method: &str) -> Option<&Rational> {
        self.method(method)?.contract.timed_requires.as_ref()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Program {
    pub classes: Vec<ClassDecl>,
    pub main: Vec<Stmt>,
    pub ids: IdGen,
}

/// Reference to a method, the init block of a class, or the main block.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub struct MethodRef {
    pub class: Option<String>,
    pub method: String,
}

pub const INIT: &str = "init";
pub const MAIN: &str = "main";

impl MethodRef {
    pub fn new(class: &str, method: &str) -> MethodRef {
        MethodRef { class: Some(class.to_string()), method: method.to_string() }
    }

    pub fn main() -> MethodRef {
        MethodRef { class: None, method: MAIN.to_string() }
    }

    pub fn init(class: &str) -> MethodRef {
        MethodRef::new(class, INIT)
    }

    pub fn is_main(&self) -> bool {
        self.class.is_none()
    }
}

impl fmt::Display for MethodRef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.class {
            Some(c) => write!(f, "{c}.{}", self.method),
            None => f.write_str(&self.method),
        }
    }
}

/// A statement block with its owner, as seen by whole-program passes.
pub struct Body<'a> {
    pub owner: MethodRef,
    pub class: Option<&'a ClassDecl>,
    pub method: Option<&'a MethodDecl>,
    pub stmts: &'a [Stmt],
}

impl Program {
    pub fn class(&self, name: &str) -> Option<&ClassDecl> {
        self.classes.iter().find(|c| c.name == name)
    }

    pub fn method(&self, r: &MethodRef) -> Option<&MethodDecl> {
        self.class(r.class.as_deref()?)?.method(&r.method)
    }

    /// Every executable block: init blocks, methods, then main.
    pub fn bodies(&self) -> Vec<Body<'_>> {
        let mut out = Vec::new();
        for c in &self.classes {
            if let Some(init) = &c.init {
                out.push(Body {
                    owner: MethodRef::init(&c.name),
                    class: Some(c),
                    method: None,
                    stmts: init,
                });
            }
            for m in &c.methods {
                out.push(Body {
                    owner: MethodRef::new(&c.name, &m.name),
                    class: Some(c),
                    method: Some(m),
                    stmts: &m.body,
                });
            }
        }
        out.push(Body { owner: MethodRef::main(), class: None, method: None, stmts: &self.main });
        out
    }

    pub fn body(&self, r: &MethodRef) -> Option<&[Stmt]> {
        match &r.class {
            None => Some(&self.main),
            Some(c) => {
                let class = self.class(c)?;
                if r.method == INIT && class.method(INIT).is_none() {
                    class.init.as_deref()
                } else {
                    class.method(&r.method).map(|m| m.body.as_slice())
                }
            }
        }
    }

    /// Finds a statement anywhere in the program.
    pub fn find_stmt(&self, id: NodeId) -> Option<(MethodRef, &Stmt)> {
        for b in self.bodies() {
            let mut found = None;
            walk_stmts(b.stmts, &mut |s| {
                if s.id() == id && found.is_none() {
                    found = Some(s);
                }
            });
            if let Some(s) = found {
                return Some((b.owner, s));
            }
        }
        None
    }

    /// Applies `f` to every node's metadata, in a fixed traversal order.
    pub fn for_each_meta_mut(&mut self, f: &mut dyn FnMut(&mut Meta)) {
        fn expr(e: &mut Expr, f: &mut dyn FnMut(&mut Meta)) {
            e.walk_mut(&mut |x| f(&mut x.meta));
        }
        fn stmts(ss: &mut [Stmt], f: &mut dyn FnMut(&mut Meta)) {
            walk_stmts_mut(ss, &mut |s| {
                f(&mut s.meta);
                for e in s.own_exprs_mut() {
                    expr(e, f);
                }
            });
        }
        for c in &mut self.classes {
            f(&mut c.meta);
            for p in &mut c.params {
                f(&mut p.meta);
            }
            for fd in &mut c.fields {
                f(&mut fd.meta);
                if let Some(e) = &mut fd.init {
                    expr(e, f);
                }
            }
            for o in c.physical.iter_mut().flatten() {
                f(&mut o.meta);
                expr(&mut o.rhs, f);
            }
            if let Some(i) = &mut c.invariant {
                expr(i, f);
            }
            if let Some(i) = &mut c.creation {
                expr(i, f);
            }
            if let Some(init) = &mut c.init {
                stmts(init, f);
            }
            for m in &mut c.methods {
                f(&mut m.meta);
                for p in &mut m.params {
                    f(&mut p.meta);
                }
                for e in [&mut m.contract.requires, &mut m.contract.ensures, &mut m.ret]
                    .into_iter()
                    .flatten()
                {
                    expr(e, f);
                }
                stmts(&mut m.body, f);
            }
        }
        stmts(&mut self.main, f);
    }

    pub fn all_node_ids(&self) -> Vec<NodeId> {
        let mut copy = self.clone();
        let mut out = Vec::new();
        copy.for_each_meta_mut(&mut |m| out.push(m.id));
        out
    }

    pub fn all_points(&self) -> Vec<PointId> {
        let mut out = Vec::new();
        for b in self.bodies() {
            walk_stmts(b.stmts, &mut |s| {
                if let StmtKind::Await { point, .. } = &s.kind {
                    out.push(*point);
                }
            });
        }
        out
    }

    /// A copy with ids, spans and suspension points zeroed, for structural comparison.
    pub fn without_meta(&self) -> Program {
        let mut p = self.clone();
        p.for_each_meta_mut(&mut |m| *m = Meta::default());
        for c in &mut p.classes {
            for body in c.init.iter_mut().chain(c.methods.iter_mut().map(|m| &mut m.body)) {
                walk_stmts_mut(body, &mut |s| {
                    if let StmtKind::Await { point, .. } = &mut s.kind {
                        *point = PointId::default();
                    }
                });
            }
        }
        walk_stmts_mut(&mut p.main, &mut |s| {
            if let StmtKind::Await { point, .. } = &mut s.kind {
                *point = PointId::default();
            }
        });
        p.ids = IdGen::default();
        p
    }

    pub fn structurally_eq(&self, other: &Program) -> bool {
        self.without_meta() == other.without_meta()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rational::int;

    fn num(ids: &mut IdGen, n: i64) -> Expr {
        Expr::new(ids.meta(Span::default()), ExprKind::Num(int(n)))
    }

    #[test]
    fn const_folding() {
        let mut ids = IdGen::default();
        let e = Expr::new(
            ids.meta(Span::default()),
            ExprKind::Binary(BinOp::Le, Box::new(num(&mut ids, 1)), Box::new(num(&mut ids, 2))),
        );
        assert!(e.is_const_true());
        let d = Expr::new(
            ids.meta(Span::default()),
            ExprKind::Binary(BinOp::Div, Box::new(num(&mut ids, 1)), Box::new(num(&mut ids, 0))),
        );
        assert_eq!(d.const_value(), None);
    }

    #[test]
    fn ids_are_fresh() {
        let mut ids = IdGen::default();
        let a = ids.node();
        let b = ids.node();
        assert_ne!(a, b);
        assert_ne!(ids.point(), ids.point());
    }

    #[test]
    fn method_ref_display() {
        assert_eq!(MethodRef::new("Tank", "ctrl").to_string(), "Tank.ctrl");
        assert_eq!(MethodRef::main().to_string(), "main");
    }
}
