//! Concrete syntax output that re-parses to a structurally identical AST.

use std::fmt::Write;

use crate::ast::*;
use crate::counting::TimeBounds;

pub fn pretty_print(program: &Program) -> String {
    let mut p = Printer { out: String::new(), indent: 0 };
    for c in &program.classes {
        p.class(c);
        p.out.push('\n');
    }
    if program.main.is_empty() {
        p.out.push_str("{ }\n");
    } else {
        p.out.push_str("{\n");
        p.indent += 1;
        p.stmts(&program.main);
        p.indent -= 1;
        p.out.push_str("}\n");
    }
    p.out
}

pub fn expr_to_string(e: &Expr) -> String {
    let mut s = String::new();
    write_expr(&mut s, e);
    s
}

struct Printer {
    out: String,
    indent: usize,
}

impl Printer {
    fn line(&mut self, text: &str) {
        for _ in 0..self.indent {
            self.out.push_str("  ");
        }
        self.out.push_str(text);
        self.out.push('\n');
    }

    fn annotation(&mut self, body: String) {
        self.line(&format!("/*@ {body} @*/"));
    }

    fn class(&mut self, c: &ClassDecl) {
        if let Some(e) = &c.creation {
            self.annotation(format!("requires {}", expr_to_string(e)));
        }
        if let Some(e) = &c.invariant {
            self.annotation(format!("invariant {}", expr_to_string(e)));
        }
        let params = if c.params.is_empty() { String::new() } else { format!("({})", params(&c.params)) };
        self.line(&format!("class {}{params} {{", c.name));
        self.indent += 1;
        for f in &c.fields {
            let mut s = String::new();
            if f.physical {
                s.push_str("physical ");
            }
            write!(s, "{} {}", f.ty, f.name).unwrap();
            if let Some(e) = &f.init {
                write!(s, " = {}", expr_to_string(e)).unwrap();
            }
            s.push(';');
            self.line(&s);
        }
        if let Some(odes) = &c.physical {
            self.line("physical {");
            self.indent += 1;
            for o in odes {
                self.line(&format!("{}' = {};", o.field, expr_to_string(&o.rhs)));
            }
            self.indent -= 1;
            self.line("}");
        }
        if let Some(init) = &c.init {
            self.line("{");
            self.indent += 1;
            self.stmts(init);
            self.indent -= 1;
            self.line("}");
        }
        for m in &c.methods {
            self.method(m);
        }
        self.indent -= 1;
        self.line("}");
    }

    fn method(&mut self, m: &MethodDecl) {
        let k = &m.contract;
        if let Some(e) = &k.requires {
            self.annotation(format!("requires {}", expr_to_string(e)));
        }
        if let Some(e) = &k.ensures {
            self.annotation(format!("ensures {}", expr_to_string(e)));
        }
        if let Some(q) = &k.timed_requires {
            self.annotation(format!("timed_requires {q}"));
        }
        if !k.time_control.is_empty() {
            self.annotation(format!("time_control: {}", time_control(&k.time_control)));
        }
        if let Some(b) = &k.time_bounds {
            self.annotation(format!("time_bounds: {}", bounds(b)));
        }
        self.line(&format!("{} {}({}) {{", m.ret_ty, m.name, params(&m.params)));
        self.indent += 1;
        self.stmts(&m.body);
        if let Some(r) = &m.ret {
            self.line(&format!("return {};", expr_to_string(r)));
        }
        self.indent -= 1;
        self.line("}");
    }

    fn stmts(&mut self, ss: &[Stmt]) {
        for s in ss {
            self.stmt(s);
        }
    }

    fn block_tail(&mut self, head: String, body: &[Stmt]) {
        self.line(&format!("{head} {{"));
        self.indent += 1;
        self.stmts(body);
        self.indent -= 1;
    }

    fn stmt(&mut self, s: &Stmt) {
        if let Some(b) = &s.annot.ctx_bounds {
            self.annotation(format!("ctx_bounds: {}", bounds(b)));
        }
        if !s.annot.loop_control.is_empty() {
            self.annotation(format!("time_control: {}", time_control(&s.annot.loop_control)));
        }
        let mut prefix = String::new();
        if let Some(c) = &s.annot.cost {
            write!(prefix, "[Cost: {c}] ").unwrap();
        }
        if let Some(dc) = &s.annot.dc {
            write!(prefix, "[DC: {}] ", expr_to_string(dc)).unwrap();
        }
        match &s.kind {
            StmtKind::Skip => self.line(&format!("{prefix}skip;")),
            StmtKind::Assign { ty, target, rhs } => {
                let mut t = prefix;
                if let Some(ty) = ty {
                    write!(t, "{ty} ").unwrap();
                }
                if let Some(x) = target {
                    write!(t, "{x} = ").unwrap();
                }
                t.push_str(&rhs_to_string(rhs));
                t.push(';');
                self.line(&t);
            }
            StmtKind::If { cond, then, els } => {
                self.block_tail(format!("{prefix}if ({})", expr_to_string(cond)), then);
                match els {
                    Some(e) => {
                        self.line("} else {");
                        self.indent += 1;
                        self.stmts(e);
                        self.indent -= 1;
                        self.line("}");
                    }
                    None => self.line("}"),
                }
            }
            StmtKind::While { cond, body } => {
                self.block_tail(format!("{prefix}while ({})", expr_to_string(cond)), body);
                self.line("}");
            }
            StmtKind::Await { guard, .. } => {
                self.line(&format!("{prefix}await {};", guard_to_string(guard)))
            }
            StmtKind::Duration { value, upper } => {
                self.line(&format!("{prefix}{};", duration_to_string(value, upper.as_ref())))
            }
        }
    }
}

fn params(ps: &[Param]) -> String {
    ps.iter().map(|p| format!("{} {}", p.ty, p.name)).collect::<Vec<_>>().join(", ")
}

fn bounds(b: &TimeBounds) -> String {
    format!("[{}, {}]", b.min, b.max)
}

pub fn time_control(tc: &[TimeControl]) -> String {
    tc.iter()
        .map(|t| format!("{}.{} = [{}, {}]", t.location, t.method, t.first, t.last))
        .collect::<Vec<_>>()
        .join(", ")
}

fn duration_to_string(value: &Expr, upper: Option<&Expr>) -> String {
    match upper {
        Some(u) => format!("duration({}, {})", expr_to_string(value), expr_to_string(u)),
        None => format!("duration({})", expr_to_string(value)),
    }
}

pub fn guard_to_string(g: &Guard) -> String {
    match g {
        Guard::Poll(e) => format!("{}?", atom(e)),
        Guard::Duration(a, b) => duration_to_string(a, b.as_ref()),
        Guard::Diff(e) => format!("diff {}", expr_to_string(e)),
    }
}

pub fn rhs_to_string(r: &Rhs) -> String {
    let args = |a: &[Expr]| a.iter().map(expr_to_string).collect::<Vec<_>>().join(", ");
    match r {
        Rhs::Expr(e) => expr_to_string(e),
        Rhs::New { class, args: a } => format!("new {class}({})", args(a)),
        Rhs::Get(e) => format!("{}.get", atom(e)),
        Rhs::Call { callee, method, args: a } => format!("{}!{method}({})", atom(callee), args(a)),
    }
}

/// Parenthesizes anything that is not a primary expression.
fn atom(e: &Expr) -> String {
    match &e.kind {
        ExprKind::Var(_) | ExprKind::This | ExprKind::Null | ExprKind::Bool(_) | ExprKind::Now => {
            expr_to_string(e)
        }
        _ => format!("({})", expr_to_string(e)),
    }
}

fn prec(e: &Expr) -> u8 {
    match &e.kind {
        ExprKind::Binary(op, ..) => op.precedence(),
        ExprKind::Unary(..) => 6,
        ExprKind::Num(q) if *q < crate::rational::zero() => 6,
        _ => 7,
    }
}

fn write_expr(s: &mut String, e: &Expr) {
    match &e.kind {
        ExprKind::Num(q) => write!(s, "{q}").unwrap(),
        ExprKind::Bool(b) => write!(s, "{b}").unwrap(),
        ExprKind::Null => s.push_str("null"),
        ExprKind::This => s.push_str("this"),
        ExprKind::Now => s.push_str("now()"),
        ExprKind::Var(v) => s.push_str(v),
        ExprKind::Unary(op, inner) => {
            s.push_str(match op {
                UnOp::Not => "!",
                UnOp::Neg => "-",
            });
            // `-(1)` keeps a negated literal distinct from a negative literal.
            let wrap = prec(inner) < 7 || matches!(inner.kind, ExprKind::Num(_));
            child(s, inner, wrap);
        }
        ExprKind::Binary(op, a, b) => {
            let p = op.precedence();
            let left_wrap = if op.is_comparison() { prec(a) <= p } else { prec(a) < p };
            child(s, a, left_wrap);
            write!(s, " {} ", op.symbol()).unwrap();
            child(s, b, prec(b) <= p);
        }
    }
}

fn child(s: &mut String, e: &Expr, wrap: bool) {
    if wrap {
        s.push('(');
        write_expr(s, e);
        s.push(')');
    } else {
        write_expr(s, e);
    }
}
