//! Recursive-descent parser for `.habs` sources.
//!
//! Annotations are `/*@ ... @*/` comments attached to the next class, method
//! or statement.

pub mod lexer;

use std::fmt;

use thiserror::Error;

use crate::ast::*;
use crate::counting::{CountExpr, TimeBounds};
use crate::rational::Rational;
use lexer::{lex_at, Tok, Token};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ParseErrorKind {
    Syntax,
    UnknownAnnotationKind,
}

#[derive(Clone, Debug, PartialEq, Eq, Error)]
pub struct ParseError {
    pub kind: ParseErrorKind,
    pub file: Option<String>,
    pub span: Span,
    pub message: String,
    pub expected: Vec<String>,
}

impl ParseError {
    pub fn new(span: Span, message: impl Into<String>, expected: Vec<String>) -> ParseError {
        ParseError {
            kind: ParseErrorKind::Syntax,
            file: None,
            span,
            message: message.into(),
            expected,
        }
    }
}

impl fmt::Display for ParseError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let file = self.file.as_deref().unwrap_or("<input>");
        write!(f, "{file}:{}:{}: {}", self.span.line, self.span.col, self.message)?;
        if !self.expected.is_empty() {
            write!(f, " (expected {})", self.expected.join(", "))?;
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum AnnotationContext {
    Class,
    Method,
    Statement,
}

#[derive(Clone, Debug, PartialEq)]
pub enum Annotation {
    Requires(Expr),
    Ensures(Expr),
    Invariant(Expr),
    TimedRequires(Rational),
    TimeControl(Vec<TimeControl>),
    TimeBounds(TimeBounds),
    CtxBounds(TimeBounds),
}

impl Annotation {
    fn keyword(&self) -> &'static str {
        match self {
            Annotation::Requires(_) => "requires",
            Annotation::Ensures(_) => "ensures",
            Annotation::Invariant(_) => "invariant",
            Annotation::TimedRequires(_) => "timed_requires",
            Annotation::TimeControl(_) => "time_control",
            Annotation::TimeBounds(_) => "time_bounds",
            Annotation::CtxBounds(_) => "ctx_bounds",
        }
    }

    fn allowed_in(&self, ctx: AnnotationContext) -> bool {
        use AnnotationContext::*;
        match self {
            Annotation::Requires(_) => matches!(ctx, Class | Method),
            Annotation::Invariant(_) => ctx == Class,
            Annotation::Ensures(_) | Annotation::TimedRequires(_) | Annotation::TimeBounds(_) => {
                ctx == Method
            }
            Annotation::TimeControl(_) => matches!(ctx, Method | Statement),
            Annotation::CtxBounds(_) => ctx == Statement,
        }
    }
}

pub fn parse_program(text: &str) -> Result<Program, ParseError> {
    let toks = lex_at(text, 1, 1)?;
    let mut p = Parser { toks, pos: 0, ids: IdGen::default() };
    p.program()
}

/// Like [`parse_program`], with `file` recorded in errors.
pub fn parse_program_named(file: &str, text: &str) -> Result<Program, ParseError> {
    parse_program(text).map_err(|mut e| {
        e.file = Some(file.to_string());
        e
    })
}

/// Parses the text between `/*@` and `@*/`. A `requires` that also carries a
/// `time_control:` clause yields two annotations.
pub fn parse_annotation(
    text: &str,
    ctx: AnnotationContext,
) -> Result<Vec<Annotation>, ParseError> {
    let mut ids = IdGen::default();
    parse_annotation_at(text, 1, 1, ctx, &mut ids)
}

fn parse_annotation_at(
    text: &str,
    line: u32,
    col: u32,
    ctx: AnnotationContext,
    ids: &mut IdGen,
) -> Result<Vec<Annotation>, ParseError> {
    let toks = lex_at(text, line, col)?;
    let start = toks[0].span;
    let mut out = Vec::new();
    let is_requires = matches!(&toks[0].tok, Tok::Ident(k) if k == "requires");
    let split = if is_requires {
        toks.windows(2).position(|w| {
            matches!(&w[0].tok, Tok::Ident(k) if k == "time_control") && w[1].tok == Tok::Sym(":")
        })
    } else {
        None
    };
    let mut segments = Vec::new();
    match split {
        Some(k) => {
            let mut left: Vec<Token> = toks[..k].to_vec();
            if matches!(left.last().map(|t| &t.tok), Some(Tok::Sym("&&")) | Some(Tok::Sym("&"))) {
                left.pop();
            }
            let eof = Token { tok: Tok::Eof, span: toks[k].span };
            left.push(eof);
            segments.push(left);
            segments.push(toks[k..].to_vec());
        }
        None => segments.push(toks),
    }
    for seg in segments {
        let mut p = Parser { toks: seg, pos: 0, ids: std::mem::take(ids) };
        let res = p.annotation_body();
        *ids = std::mem::take(&mut p.ids);
        let a = res?;
        if !a.allowed_in(ctx) {
            return Err(ParseError::new(
                start,
                format!("`{}` annotation is not allowed on a {:?}", a.keyword(), ctx)
                    .to_lowercase(),
                vec![],
            ));
        }
        out.push(a);
    }
    Ok(out)
}

const KEYWORDS: [&str; 17] = [
    "class", "physical", "while", "if", "else", "await", "duration", "diff", "return", "skip",
    "new", "get", "true", "false", "null", "this", "now",
];

struct Parser {
    toks: Vec<Token>,
    pos: usize,
    ids: IdGen,
}

type PResult<T> = Result<T, ParseError>;

impl Parser {
    fn peek(&self) -> &Tok {
        &self.toks[self.pos].tok
    }

    fn peek_at(&self, k: usize) -> &Tok {
        let i = (self.pos + k).min(self.toks.len() - 1);
        &self.toks[i].tok
    }

    fn span(&self) -> Span {
        self.toks[self.pos].span
    }

    fn prev_span(&self) -> Span {
        self.toks[self.pos.saturating_sub(1)].span
    }

    fn bump(&mut self) -> Token {
        let t = self.toks[self.pos].clone();
        if self.pos < self.toks.len() - 1 {
            self.pos += 1;
        }
        t
    }

    fn is_sym(&self, s: &str) -> bool {
        matches!(self.peek(), Tok::Sym(x) if *x == s)
    }

    fn is_kw(&self, k: &str) -> bool {
        matches!(self.peek(), Tok::Ident(x) if x == k)
    }

    fn eat_sym(&mut self, s: &str) -> bool {
        if self.is_sym(s) {
            self.bump();
            true
        } else {
            false
        }
    }

    fn eat_kw(&mut self, k: &str) -> bool {
        if self.is_kw(k) {
            self.bump();
            true
        } else {
            false
        }
    }

    fn error(&self, message: impl Into<String>, expected: &[&str]) -> ParseError {
        ParseError::new(self.span(), message, expected.iter().map(|s| s.to_string()).collect())
    }

    fn unexpected(&self, expected: &[&str]) -> ParseError {
        let found = match self.peek() {
            Tok::Ident(s) => format!("`{s}`"),
            Tok::Num(q) => format!("number `{q}`"),
            Tok::Sym(s) => format!("`{s}`"),
            Tok::Annot(..) => "annotation".to_string(),
            Tok::Eof => "end of input".to_string(),
        };
        self.error(format!("unexpected {found}"), expected)
    }

    fn expect_sym(&mut self, s: &str) -> PResult<Span> {
        if self.is_sym(s) {
            Ok(self.bump().span)
        } else {
            Err(self.unexpected(&[s]))
        }
    }

    fn expect_kw(&mut self, k: &str) -> PResult<()> {
        if self.eat_kw(k) {
            Ok(())
        } else {
            Err(self.unexpected(&[k]))
        }
    }

    fn ident(&mut self) -> PResult<String> {
        match self.peek().clone() {
            Tok::Ident(s) if !KEYWORDS.contains(&s.as_str()) => {
                self.bump();
                Ok(s)
            }
            _ => Err(self.unexpected(&["identifier"])),
        }
    }

    fn meta_from(&mut self, start: Span) -> Meta {
        let span = start.to(self.prev_span());
        self.ids.meta(span)
    }

    fn take_annots(&mut self, ctx: AnnotationContext) -> PResult<Vec<(Annotation, Span)>> {
        let mut out = Vec::new();
        while let Tok::Annot(body, line, col) = self.peek().clone() {
            let span = self.span();
            for a in parse_annotation_at(&body, line, col, ctx, &mut self.ids)? {
                out.push((a, span));
            }
            self.bump();
        }
        Ok(out)
    }

    // ---- program structure ----

    fn program(&mut self) -> PResult<Program> {
        let mut classes = Vec::new();
        loop {
            if matches!(self.peek(), Tok::Annot(..)) && self.annots_precede_class() {
                let annots = self.take_annots(AnnotationContext::Class)?;
                classes.push(self.class(annots)?);
            } else if self.is_kw("class") {
                classes.push(self.class(Vec::new())?);
            } else {
                break;
            }
        }
        let main = if self.is_sym("{") { self.block()? } else { Vec::new() };
        if *self.peek() != Tok::Eof {
            return Err(self.unexpected(&["class", "{", "end of input"]));
        }
        Ok(Program { classes, main, ids: self.ids.clone() })
    }

    fn annots_precede_class(&self) -> bool {
        let mut k = 0;
        while matches!(self.peek_at(k), Tok::Annot(..)) {
            k += 1;
        }
        matches!(self.peek_at(k), Tok::Ident(s) if s == "class")
    }

    fn class(&mut self, annots: Vec<(Annotation, Span)>) -> PResult<ClassDecl> {
        let start = self.span();
        self.expect_kw("class")?;
        let name = self.ident()?;
        let params = if self.is_sym("(") { self.params()? } else { Vec::new() };
        self.expect_sym("{")?;
        let mut class = ClassDecl {
            meta: Meta::default(),
            name,
            params,
            fields: Vec::new(),
            physical: None,
            init: None,
            methods: Vec::new(),
            invariant: None,
            creation: None,
        };
        for (a, span) in annots {
            match a {
                Annotation::Requires(e) => conjoin(&mut class.creation, e, &mut self.ids),
                Annotation::Invariant(e) => conjoin(&mut class.invariant, e, &mut self.ids),
                other => {
                    return Err(ParseError::new(
                        span,
                        format!("`{}` annotation is not allowed on a class", other.keyword()),
                        vec![],
                    ))
                }
            }
        }
        while !self.is_sym("}") {
            let member_start = self.span();
            let annots = self.take_annots(AnnotationContext::Method)?;
            if self.is_kw("physical") && matches!(self.peek_at(1), Tok::Sym("{")) {
                no_annots(&annots, "physical block")?;
                if class.physical.is_some() {
                    return Err(self.error("duplicate physical block", &[]));
                }
                self.bump();
                class.physical = Some(self.odes()?);
            } else if self.is_sym("{") {
                no_annots(&annots, "init block")?;
                if class.init.is_some() {
                    return Err(self.error("duplicate init block", &[]));
                }
                class.init = Some(self.block()?);
            } else {
                let physical = self.eat_kw("physical");
                let ty = self.ty()?;
                let name = self.ident()?;
                if self.is_sym("(") && !physical {
                    class.methods.push(self.method(member_start, ty, name, annots)?);
                } else {
                    no_annots(&annots, "field")?;
                    let init = if self.eat_sym("=") { Some(self.expr()?) } else { None };
                    self.expect_sym(";")?;
                    let meta = self.meta_from(member_start);
                    class.fields.push(FieldDecl { meta, physical, ty, name, init });
                }
            }
        }
        self.expect_sym("}")?;
        class.meta = self.meta_from(start);
        Ok(class)
    }

    fn params(&mut self) -> PResult<Vec<Param>> {
        self.expect_sym("(")?;
        let mut out = Vec::new();
        if !self.is_sym(")") {
            loop {
                let start = self.span();
                let ty = self.ty()?;
                let name = self.ident()?;
                let meta = self.meta_from(start);
                out.push(Param { meta, ty, name });
                if !self.eat_sym(",") {
                    break;
                }
            }
        }
        self.expect_sym(")")?;
        Ok(out)
    }

    fn odes(&mut self) -> PResult<Vec<OdeDecl>> {
        self.expect_sym("{")?;
        let mut out = Vec::new();
        while !self.is_sym("}") {
            let start = self.span();
            let field = self.ident()?;
            self.expect_sym("'")?;
            self.expect_sym("=")?;
            let rhs = self.expr()?;
            self.expect_sym(";")?;
            let meta = self.meta_from(start);
            out.push(OdeDecl { meta, field, rhs });
        }
        self.expect_sym("}")?;
        Ok(out)
    }

    fn ty(&mut self) -> PResult<Type> {
        let name = match self.peek().clone() {
            Tok::Ident(s) if !KEYWORDS.contains(&s.as_str()) => {
                self.bump();
                s
            }
            _ => return Err(self.unexpected(&["type"])),
        };
        Ok(match name.as_str() {
            "Unit" => Type::Unit,
            "Bool" => Type::Bool,
            "Int" => Type::Int,
            "Real" => Type::Real,
            "Rat" => Type::Rat,
            "DC" | "DeploymentComponent" => Type::Dc,
            "Fut" => {
                self.expect_sym("<")?;
                let inner = self.ty()?;
                self.expect_sym(">")?;
                Type::Fut(Box::new(inner))
            }
            _ => Type::Class(name),
        })
    }

    fn method(
        &mut self,
        start: Span,
        ret_ty: Type,
        name: String,
        annots: Vec<(Annotation, Span)>,
    ) -> PResult<MethodDecl> {
        let params = self.params()?;
        let mut contract = MethodContract::default();
        for (a, span) in annots {
            match a {
                Annotation::Requires(e) => conjoin(&mut contract.requires, e, &mut self.ids),
                Annotation::Ensures(e) => conjoin(&mut contract.ensures, e, &mut self.ids),
                Annotation::TimedRequires(q) => contract.timed_requires = Some(q),
                Annotation::TimeControl(tc) => contract.time_control.extend(tc),
                Annotation::TimeBounds(b) => contract.time_bounds = Some(b),
                other => {
                    return Err(ParseError::new(
                        span,
                        format!("`{}` annotation is not allowed on a method", other.keyword()),
                        vec![],
                    ))
                }
            }
        }
        self.expect_sym("{")?;
        let mut body = Vec::new();
        let mut ret = None;
        while !self.is_sym("}") {
            if self.eat_kw("return") {
                ret = Some(self.expr()?);
                self.expect_sym(";")?;
                if !self.is_sym("}") {
                    return Err(self.error(
                        "`return` must be the last statement of a method body",
                        &["}"],
                    ));
                }
                break;
            }
            body.push(self.stmt()?);
        }
        self.expect_sym("}")?;
        let meta = self.meta_from(start);
        Ok(MethodDecl { meta, ret_ty, name, params, body, ret, contract })
    }

    // ---- statements ----

    fn block(&mut self) -> PResult<Vec<Stmt>> {
        self.expect_sym("{")?;
        let mut out = Vec::new();
        while !self.is_sym("}") {
            if self.is_kw("return") {
                return Err(self.error(
                    "`return` is only allowed as the last statement of a method body",
                    &[],
                ));
            }
            out.push(self.stmt()?);
        }
        self.expect_sym("}")?;
        Ok(out)
    }

    fn branch(&mut self) -> PResult<Vec<Stmt>> {
        if self.is_sym("{") {
            self.block()
        } else {
            Ok(vec![self.stmt()?])
        }
    }

    fn stmt(&mut self) -> PResult<Stmt> {
        let start = self.span();
        let annots = self.take_annots(AnnotationContext::Statement)?;
        let mut annot = StmtAnnot::default();
        for (a, _) in annots {
            match a {
                Annotation::CtxBounds(b) => annot.ctx_bounds = Some(b),
                Annotation::TimeControl(tc) => annot.loop_control.extend(tc),
                _ => unreachable!("statement annotations are filtered by context"),
            }
        }
        if self.is_sym("}") || *self.peek() == Tok::Eof {
            return Err(self.error("annotation is not followed by a statement", &["statement"]));
        }
        while self.is_sym("[") {
            self.bump();
            let key = self.ident()?;
            self.expect_sym(":")?;
            match key.as_str() {
                "Cost" => {
                    let q = self.rational()?;
                    if q < crate::rational::zero() {
                        return Err(self.error("cost must be nonnegative", &[]));
                    }
                    annot.cost = Some(q);
                }
                "DC" => annot.dc = Some(self.expr()?),
                _ => return Err(self.error(format!("unknown resource annotation `{key}`"), &["Cost", "DC"])),
            }
            self.expect_sym("]")?;
        }
        let kind = self.stmt_kind()?;
        if !annot.loop_control.is_empty() && !matches!(kind, StmtKind::While { .. }) {
            return Err(ParseError::new(
                start,
                "`time_control` on a statement is only allowed before `while`",
                vec![],
            ));
        }
        let meta = self.meta_from(start);
        Ok(Stmt { meta, annot, kind })
    }

    fn stmt_kind(&mut self) -> PResult<StmtKind> {
        if self.eat_kw("skip") {
            self.expect_sym(";")?;
            return Ok(StmtKind::Skip);
        }
        if self.eat_kw("if") {
            self.expect_sym("(")?;
            let cond = self.expr()?;
            self.expect_sym(")")?;
            let then = self.branch()?;
            let els = if self.eat_kw("else") { Some(self.branch()?) } else { None };
            return Ok(StmtKind::If { cond, then, els });
        }
        if self.eat_kw("while") {
            self.expect_sym("(")?;
            let cond = self.expr()?;
            self.expect_sym(")")?;
            let body = self.branch()?;
            return Ok(StmtKind::While { cond, body });
        }
        if self.eat_kw("await") {
            let guard = self.guard()?;
            self.expect_sym(";")?;
            let point = self.ids.point();
            return Ok(StmtKind::Await { point, guard });
        }
        if self.eat_kw("duration") {
            let (value, upper) = self.duration_args()?;
            self.expect_sym(";")?;
            return Ok(StmtKind::Duration { value, upper });
        }
        let is_decl = match (self.peek(), self.peek_at(1)) {
            (Tok::Ident(t), Tok::Sym("<")) => t == "Fut",
            (Tok::Ident(t), Tok::Ident(_)) => !KEYWORDS.contains(&t.as_str()),
            _ => false,
        };
        if is_decl {
            let ty = self.ty()?;
            let target = self.ident()?;
            self.expect_sym("=")?;
            let rhs = self.rhs()?;
            self.expect_sym(";")?;
            return Ok(StmtKind::Assign { ty: Some(ty), target: Some(target), rhs });
        }
        if matches!(self.peek(), Tok::Ident(_)) && matches!(self.peek_at(1), Tok::Sym("=")) {
            let target = self.ident()?;
            self.expect_sym("=")?;
            let rhs = self.rhs()?;
            self.expect_sym(";")?;
            return Ok(StmtKind::Assign { ty: None, target: Some(target), rhs });
        }
        let rhs = self.rhs()?;
        self.expect_sym(";")?;
        Ok(StmtKind::Assign { ty: None, target: None, rhs })
    }

    fn duration_args(&mut self) -> PResult<(Expr, Option<Expr>)> {
        self.expect_sym("(")?;
        let value = self.expr()?;
        let upper = if self.eat_sym(",") { Some(self.expr()?) } else { None };
        self.expect_sym(")")?;
        Ok((value, upper))
    }

    fn guard(&mut self) -> PResult<Guard> {
        if self.eat_kw("duration") {
            let (a, b) = self.duration_args()?;
            return Ok(Guard::Duration(a, b));
        }
        if self.eat_kw("diff") {
            return Ok(Guard::Diff(self.expr()?));
        }
        let e = self.expr()?;
        self.expect_sym("?")?;
        Ok(Guard::Poll(e))
    }

    fn rhs(&mut self) -> PResult<Rhs> {
        if self.eat_kw("new") {
            let class = match self.ty()? {
                Type::Class(c) => c,
                Type::Dc => "DC".to_string(),
                other => return Err(self.error(format!("cannot instantiate `{other}`"), &["class name"])),
            };
            let args = self.args()?;
            return Ok(Rhs::New { class, args });
        }
        let e = self.expr()?;
        if self.is_sym(".") {
            self.bump();
            if self.is_kw("get") && !matches!(self.peek_at(1), Tok::Sym("(")) {
                self.bump();
                return Ok(Rhs::Get(e));
            }
            let method = self.ident()?;
            let args = self.args()?;
            return Ok(Rhs::Call { callee: e, method, args });
        }
        if self.is_sym("!")
            && matches!(self.peek_at(1), Tok::Ident(_))
            && matches!(self.peek_at(2), Tok::Sym("("))
        {
            self.bump();
            let method = self.ident()?;
            let args = self.args()?;
            return Ok(Rhs::Call { callee: e, method, args });
        }
        Ok(Rhs::Expr(e))
    }

    fn args(&mut self) -> PResult<Vec<Expr>> {
        self.expect_sym("(")?;
        let mut out = Vec::new();
        if !self.is_sym(")") {
            loop {
                out.push(self.expr()?);
                if !self.eat_sym(",") {
                    break;
                }
            }
        }
        self.expect_sym(")")?;
        Ok(out)
    }

    // ---- expressions ----

    fn expr(&mut self) -> PResult<Expr> {
        self.or()
    }

    fn binary(&mut self, start: Span, op: BinOp, a: Expr, b: Expr) -> Expr {
        let meta = self.meta_from(start);
        Expr::new(meta, ExprKind::Binary(op, Box::new(a), Box::new(b)))
    }

    fn or(&mut self) -> PResult<Expr> {
        let start = self.span();
        let mut e = self.and()?;
        while self.eat_sym("|") || self.eat_sym("||") {
            let r = self.and()?;
            e = self.binary(start, BinOp::Or, e, r);
        }
        Ok(e)
    }

    fn and(&mut self) -> PResult<Expr> {
        let start = self.span();
        let mut e = self.cmp()?;
        while self.eat_sym("&") || self.eat_sym("&&") {
            let r = self.cmp()?;
            e = self.binary(start, BinOp::And, e, r);
        }
        Ok(e)
    }

    fn cmp_op(&self) -> Option<BinOp> {
        Some(match self.peek() {
            Tok::Sym("<=") => BinOp::Le,
            Tok::Sym(">=") => BinOp::Ge,
            Tok::Sym("<") => BinOp::Lt,
            Tok::Sym(">") => BinOp::Gt,
            Tok::Sym("==") => BinOp::Eq,
            Tok::Sym("!=") => BinOp::Ne,
            _ => return None,
        })
    }

    /// Comparisons; `a <= x <= b` becomes `a <= x & x <= b`.
    fn cmp(&mut self) -> PResult<Expr> {
        let start = self.span();
        let first = self.add()?;
        let mut operands = vec![(first, start)];
        let mut ops = Vec::new();
        while let Some(op) = self.cmp_op() {
            self.bump();
            let s = self.span();
            ops.push(op);
            operands.push((self.add()?, s));
        }
        if ops.is_empty() {
            return Ok(operands.pop().unwrap().0);
        }
        let mut result: Option<Expr> = None;
        for (i, op) in ops.iter().enumerate() {
            let mut lhs = operands[i].0.clone();
            if i > 0 {
                self.refresh_ids(&mut lhs);
            }
            let rhs = operands[i + 1].0.clone();
            let span = operands[i].1.to(rhs.meta.span);
            let meta = self.ids.meta(span);
            let atom = Expr::new(meta, ExprKind::Binary(*op, Box::new(lhs), Box::new(rhs)));
            result = Some(match result {
                None => atom,
                Some(prev) => {
                    let meta = self.ids.meta(start.to(span));
                    Expr::new(meta, ExprKind::Binary(BinOp::And, Box::new(prev), Box::new(atom)))
                }
            });
        }
        Ok(result.unwrap())
    }

    fn refresh_ids(&mut self, e: &mut Expr) {
        let ids = &mut self.ids;
        e.walk_mut(&mut |x| x.meta.id = ids.node());
    }

    fn add(&mut self) -> PResult<Expr> {
        let start = self.span();
        let mut e = self.mul()?;
        loop {
            let op = if self.eat_sym("+") {
                BinOp::Add
            } else if self.eat_sym("-") {
                BinOp::Sub
            } else {
                break;
            };
            let r = self.mul()?;
            e = self.binary(start, op, e, r);
        }
        Ok(e)
    }

    fn mul(&mut self) -> PResult<Expr> {
        let start = self.span();
        let mut e = self.unary()?;
        loop {
            let op = if self.eat_sym("*") {
                BinOp::Mul
            } else if self.eat_sym("/") {
                BinOp::Div
            } else {
                break;
            };
            let r = self.unary()?;
            e = self.binary(start, op, e, r);
        }
        Ok(e)
    }

    fn unary(&mut self) -> PResult<Expr> {
        let start = self.span();
        if self.eat_sym("!") {
            let e = self.unary()?;
            let meta = self.meta_from(start);
            return Ok(Expr::new(meta, ExprKind::Unary(UnOp::Not, Box::new(e))));
        }
        if self.eat_sym("-") {
            if let Tok::Num(q) = self.peek().clone() {
                self.bump();
                let meta = self.meta_from(start);
                return Ok(Expr::new(meta, ExprKind::Num(-q)));
            }
            let e = self.unary()?;
            let meta = self.meta_from(start);
            return Ok(Expr::new(meta, ExprKind::Unary(UnOp::Neg, Box::new(e))));
        }
        self.primary()
    }

    fn primary(&mut self) -> PResult<Expr> {
        let start = self.span();
        let kind = match self.peek().clone() {
            Tok::Num(q) => {
                self.bump();
                ExprKind::Num(q)
            }
            Tok::Sym("(") => {
                self.bump();
                let e = self.expr()?;
                self.expect_sym(")")?;
                return Ok(e);
            }
            Tok::Ident(s) => match s.as_str() {
                "true" | "false" => {
                    self.bump();
                    ExprKind::Bool(s == "true")
                }
                "null" => {
                    self.bump();
                    ExprKind::Null
                }
                "this" => {
                    self.bump();
                    ExprKind::This
                }
                "now" => {
                    self.bump();
                    self.expect_sym("(")?;
                    self.expect_sym(")")?;
                    ExprKind::Now
                }
                _ if KEYWORDS.contains(&s.as_str()) => return Err(self.unexpected(&["expression"])),
                _ => {
                    self.bump();
                    ExprKind::Var(s)
                }
            },
            _ => return Err(self.unexpected(&["expression"])),
        };
        let meta = self.meta_from(start);
        Ok(Expr::new(meta, kind))
    }

    fn rational(&mut self) -> PResult<Rational> {
        let neg = self.eat_sym("-");
        match self.peek().clone() {
            Tok::Num(q) => {
                self.bump();
                Ok(if neg { -q } else { q })
            }
            _ => Err(self.unexpected(&["number"])),
        }
    }

    fn count(&mut self) -> PResult<CountExpr> {
        if self.eat_kw("inf") {
            return Ok(CountExpr::PosInf);
        }
        if self.is_sym("-") && matches!(self.peek_at(1), Tok::Ident(s) if s == "inf") {
            self.bump();
            self.bump();
            return Ok(CountExpr::NegInf);
        }
        Ok(CountExpr::Finite(self.rational()?))
    }

    fn bounds(&mut self) -> PResult<TimeBounds> {
        let start = self.span();
        self.expect_sym("[")?;
        let min = self.count()?;
        self.expect_sym(",")?;
        let max = self.count()?;
        self.expect_sym("]")?;
        let b = TimeBounds::new(min, max);
        if !b.is_well_formed() {
            return Err(ParseError::new(
                start,
                format!("bounds {b} must satisfy 0 <= min <= max"),
                vec![],
            ));
        }
        Ok(b)
    }

    // ---- annotations ----

    fn annotation_body(&mut self) -> PResult<Annotation> {
        let Tok::Ident(kind) = self.peek().clone() else {
            return Err(self.unexpected(&["annotation keyword"]));
        };
        let kind_span = self.span();
        self.bump();
        let a = match kind.as_str() {
            "requires" => Annotation::Requires(self.expr()?),
            "ensures" => Annotation::Ensures(self.expr()?),
            "invariant" => Annotation::Invariant(self.expr()?),
            "timed_requires" => {
                let q = self.rational()?;
                if q <= crate::rational::zero() {
                    return Err(ParseError::new(kind_span, "timed_requires must be positive", vec![]));
                }
                Annotation::TimedRequires(q)
            }
            "time_control" => {
                self.expect_sym(":")?;
                let mut entries = Vec::new();
                loop {
                    let location = self.ident()?;
                    self.expect_sym(".")?;
                    let method = self.ident()?;
                    self.expect_sym("=")?;
                    let b = self.bounds_pair()?;
                    entries.push(TimeControl { location, method, first: b.0, last: b.1 });
                    if !self.eat_sym(",") {
                        break;
                    }
                }
                Annotation::TimeControl(entries)
            }
            "time_bounds" => {
                self.expect_sym(":")?;
                Annotation::TimeBounds(self.bounds()?)
            }
            "ctx_bounds" => {
                self.expect_sym(":")?;
                Annotation::CtxBounds(self.bounds()?)
            }
            other => {
                return Err(ParseError {
                    kind: ParseErrorKind::UnknownAnnotationKind,
                    file: None,
                    span: kind_span,
                    message: format!("unknown annotation kind `{other}`"),
                    expected: [
                        "requires",
                        "ensures",
                        "invariant",
                        "timed_requires",
                        "time_control",
                        "time_bounds",
                        "ctx_bounds",
                    ]
                    .iter()
                    .map(|s| s.to_string())
                    .collect(),
                })
            }
        };
        if *self.peek() != Tok::Eof {
            return Err(self.unexpected(&["end of annotation"]));
        }
        Ok(a)
    }

    /// A `[first, last]` pair; unlike execution bounds, `first > last` is allowed.
    fn bounds_pair(&mut self) -> PResult<(CountExpr, CountExpr)> {
        self.expect_sym("[")?;
        let a = self.count()?;
        self.expect_sym(",")?;
        let b = self.count()?;
        self.expect_sym("]")?;
        if !a.is_positive() || !b.is_positive() {
            return Err(self.error("time_control offsets must be nonnegative", &[]));
        }
        Ok((a, b))
    }
}

fn conjoin(slot: &mut Option<Expr>, e: Expr, ids: &mut IdGen) {
    *slot = Some(match slot.take() {
        None => e,
        Some(prev) => {
            let span = prev.meta.span.to(e.meta.span);
            Expr::new(ids.meta(span), ExprKind::Binary(BinOp::And, Box::new(prev), Box::new(e)))
        }
    });
}

fn no_annots(annots: &[(Annotation, Span)], what: &str) -> PResult<()> {
    match annots.first() {
        None => Ok(()),
        Some((a, span)) => Err(ParseError::new(
            *span,
            format!("`{}` annotation is not allowed on a {what}", a.keyword()),
            vec![],
        )),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rational::int;

    #[test]
    fn empty_main() {
        let p = parse_program("{ }").unwrap();
        assert!(p.classes.is_empty());
        assert!(p.main.is_empty());
    }

    #[test]
    fn annotation_kinds() {
        let a = parse_annotation("timed_requires 1", AnnotationContext::Method).unwrap();
        assert_eq!(a, vec![Annotation::TimedRequires(int(1))]);
        let a = parse_annotation("requires true", AnnotationContext::Method).unwrap();
        assert!(matches!(&a[..], [Annotation::Requires(e)] if e.kind == ExprKind::Bool(true)));
        let e = parse_annotation("decreases 3", AnnotationContext::Method).unwrap_err();
        assert_eq!(e.kind, ParseErrorKind::UnknownAnnotationKind);
    }

    #[test]
    fn chained_comparison_desugars() {
        let a = parse_annotation(
            "invariant 3 <= level <= 10 && -1 <= drain <= 1",
            AnnotationContext::Class,
        )
        .unwrap();
        let [Annotation::Invariant(e)] = &a[..] else { panic!("{a:?}") };
        let ExprKind::Binary(BinOp::And, l, r) = &e.kind else { panic!() };
        for (side, var, lo, hi) in [(l, "level", 3, 10), (r, "drain", -1, 1)] {
            let ExprKind::Binary(BinOp::And, a, b) = &side.kind else { panic!() };
            let ExprKind::Binary(BinOp::Le, a0, a1) = &a.kind else { panic!() };
            let ExprKind::Binary(BinOp::Le, b0, b1) = &b.kind else { panic!() };
            assert_eq!(a0.kind, ExprKind::Num(int(lo)));
            assert_eq!(a1.var_name(), Some(var));
            assert_eq!(b0.var_name(), Some(var));
            assert_eq!(b1.kind, ExprKind::Num(int(hi)));
            assert_ne!(a1.meta.id, b0.meta.id);
        }
    }

    #[test]
    fn requires_with_time_control_splits() {
        let a = parse_annotation(
            "requires t!= null && time_control: t.localCtrl = [1, 0]",
            AnnotationContext::Method,
        )
        .unwrap();
        assert_eq!(a.len(), 2);
        assert!(matches!(&a[1], Annotation::TimeControl(tc)
            if tc[0].location == "t" && tc[0].first == CountExpr::int(1) && tc[0].last == CountExpr::int(0)));
    }

    #[test]
    fn annotation_context_is_checked() {
        assert!(parse_annotation("invariant true", AnnotationContext::Method).is_err());
        assert!(parse_annotation("ctx_bounds: [inf, inf]", AnnotationContext::Statement).is_ok());
    }

    #[test]
    fn resource_prefix_and_dot_call() {
        let p = parse_program(
            "class A { Unit m(A n) { [Cost: 1]Fut<Unit> f = n!m(n); Fut<Unit> g = n.m(n); } } { }",
        )
        .unwrap();
        let body = &p.classes[0].methods[0].body;
        assert_eq!(body[0].annot.cost, Some(int(1)));
        assert!(matches!(&body[1].kind, StmtKind::Assign { rhs: Rhs::Call { method, .. }, .. } if method == "m"));
    }

    #[test]
    fn errors_point_into_the_input() {
        let src = "class A {\n  Unit m() { x = ; }\n}";
        let e = parse_program(src).unwrap_err();
        assert_eq!(e.span.line, 2);
        assert!(e.to_string().starts_with("<input>:2:"));
    }

    #[test]
    fn return_must_be_last() {
        assert!(parse_program("class A { Int m() { return 1; skip; } } { }").is_err());
        assert!(parse_program("{ return 1; }").is_err());
    }

    #[test]
    fn negative_literals_fold() {
        let p = parse_program("{ Real x = -1/2; Real y = -x; }").unwrap();
        let StmtKind::Assign { rhs: Rhs::Expr(e), .. } = &p.main[0].kind else { panic!() };
        assert_eq!(e.kind, ExprKind::Num(crate::rational::frac(-1, 2)));
        let StmtKind::Assign { rhs: Rhs::Expr(e), .. } = &p.main[1].kind else { panic!() };
        assert!(matches!(e.kind, ExprKind::Unary(UnOp::Neg, _)));
    }
}
