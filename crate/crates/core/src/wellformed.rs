//! Structural restrictions on HABS programs.

use std::collections::HashSet;

use crate::ast::*;
use crate::diag::Diagnostic;
use crate::pretty::expr_to_string;
use crate::scope::Scope;

pub fn validate_wellformed(program: &Program) -> Vec<Diagnostic> {
    let mut v = Validator { program, out: Vec::new() };
    v.run();
    v.out
}

struct Validator<'a> {
    program: &'a Program,
    out: Vec<Diagnostic>,
}

impl<'a> Validator<'a> {
    fn report(&mut self, kind: &str, meta: Meta, msg: impl Into<String>) {
        self.out.push(Diagnostic::error(kind, msg).at(meta.id, meta.span));
    }

    fn run(&mut self) {
        let mut seen = HashSet::new();
        for c in &self.program.classes {
            if !seen.insert(c.name.as_str()) {
                self.report("DuplicateClass", c.meta, format!("class `{}` declared twice", c.name));
            }
            if c.name == "DC" || c.name == "DeploymentComponent" {
                self.report("ReservedName", c.meta, format!("`{}` is a builtin class", c.name));
            }
            self.class(c);
        }
        let scope = Scope::new(None, None);
        self.block(&self.program.main, scope);
    }

    fn known_type(&mut self, ty: &Type, meta: Meta) {
        match ty {
            Type::Class(c) if self.program.class(c).is_none() => {
                self.report("UnknownClass", meta, format!("unknown class `{c}`"));
            }
            Type::Fut(inner) => self.known_type(inner, meta),
            _ => {}
        }
    }

    fn is_controlled(&self, ty: &Type) -> bool {
        ty.class_name()
            .and_then(|c| self.program.class(c))
            .is_some_and(|c| c.is_controlled())
    }

    fn class(&mut self, c: &'a ClassDecl) {
        let mut members = HashSet::new();
        for p in &c.params {
            self.known_type(&p.ty, p.meta);
            if !members.insert(p.name.as_str()) {
                self.report("DuplicateField", p.meta, format!("`{}` declared twice", p.name));
            }
            if self.is_controlled(&p.ty) {
                self.report(
                    "ControlledField",
                    p.meta,
                    format!("`{}` stores a controlled `{}` in a field", p.name, p.ty),
                );
            }
        }
        for f in &c.fields {
            self.known_type(&f.ty, f.meta);
            if !members.insert(f.name.as_str()) {
                self.report("DuplicateField", f.meta, format!("`{}` declared twice", f.name));
            }
            if self.is_controlled(&f.ty) {
                self.report(
                    "ControlledField",
                    f.meta,
                    format!("`{}` stores a controlled `{}` in a field", f.name, f.ty),
                );
            }
            if f.physical {
                if f.init.is_none() {
                    self.report(
                        "PhysicalFieldUninitialized",
                        f.meta,
                        format!("physical field uninitialized: `{}`", f.name),
                    );
                }
                if f.ty != Type::Real {
                    self.report(
                        "PhysicalFieldNotReal",
                        f.meta,
                        format!("physical field `{}` must be Real", f.name),
                    );
                }
                match c.physical.as_ref().map(|o| o.iter().filter(|o| o.field == f.name).count()) {
                    Some(1) => {}
                    Some(0) | None => self.report(
                        "MissingOde",
                        f.meta,
                        format!("physical field `{}` has no ODE", f.name),
                    ),
                    Some(_) => self.report(
                        "DuplicateOde",
                        f.meta,
                        format!("physical field `{}` has several ODEs", f.name),
                    ),
                }
            }
            if let Some(e) = &f.init {
                self.expr(e, &Scope::new(Some(c), None));
            }
        }
        for o in c.physical.iter().flatten() {
            match c.field(&o.field) {
                None => self.report("UnknownVariable", o.meta, format!("ODE for unknown field `{}`", o.field)),
                Some(f) if !f.physical && o.rhs.const_num() != Some(crate::rational::zero()) => self
                    .report(
                        "NonPhysicalOde",
                        o.meta,
                        format!("`{}` is not physical; only `{}' = 0` is allowed", o.field, o.field),
                    ),
                _ => {}
            }
            self.expr(&o.rhs, &Scope::new(Some(c), None));
        }
        let member_scope = Scope::new(Some(c), None);
        for e in c.invariant.iter().chain(c.creation.iter()) {
            self.expr(e, &member_scope);
        }
        if let Some(init) = &c.init {
            self.block(init, Scope::new(Some(c), None));
        }
        let mut names = HashSet::new();
        for m in &c.methods {
            if !names.insert(m.name.as_str()) {
                self.report("DuplicateMethod", m.meta, format!("method `{}.{}` declared twice", c.name, m.name));
            }
            self.method(c, m);
        }
    }

    fn method(&mut self, c: &'a ClassDecl, m: &'a MethodDecl) {
        for p in &m.params {
            self.known_type(&p.ty, p.meta);
        }
        self.known_type(&m.ret_ty, m.meta);
        let scope = Scope::new(Some(c), Some(m));
        for e in m.contract.requires.iter().chain(m.contract.ensures.iter()) {
            self.expr(e, &scope);
        }
        self.time_control(&m.contract.time_control, &scope, m.meta);
        let scope = self.block(&m.body, scope);
        if let Some(r) = &m.ret {
            self.expr(r, &scope);
        }
        if m.ret.is_none() && m.ret_ty != Type::Unit {
            self.report("MissingReturn", m.meta, format!("method `{}` returns {} but has no return", m.name, m.ret_ty));
        }
    }

    fn time_control(&mut self, tc: &[TimeControl], scope: &Scope<'_>, meta: Meta) {
        for t in tc {
            let Some(ty) = scope.local(&t.location) else {
                self.report(
                    "UnknownControlledCeid",
                    meta,
                    format!("time_control names `{}`, which is not a parameter", t.location),
                );
                continue;
            };
            let Some(class) = ty.class_name().and_then(|c| self.program.class(c)) else {
                self.report(
                    "UnknownControlledCeid",
                    meta,
                    format!("time_control location `{}` is not class-typed", t.location),
                );
                continue;
            };
            if class.method(&t.method).is_none() {
                self.report(
                    "UnknownControlledCeid",
                    meta,
                    format!("class `{}` has no method `{}`", class.name, t.method),
                );
            }
        }
    }

    fn block(&mut self, stmts: &'a [Stmt], mut scope: Scope<'a>) -> Scope<'a> {
        for s in stmts {
            for e in s.own_exprs() {
                self.expr(e, &scope);
            }
            match &s.kind {
                StmtKind::Assign { ty, target, rhs } => {
                    self.rhs(rhs, &scope, s.meta);
                    if let Some(ty) = ty {
                        self.known_type(ty, s.meta);
                    }
                    match (ty, target) {
                        (Some(ty), Some(x)) => scope.declare(x, ty.clone()),
                        (None, Some(x)) if scope.lookup(x).is_none() => {
                            self.report("UnknownVariable", s.meta, format!("assignment to undeclared `{x}`"))
                        }
                        (None, Some(x)) if !scope.is_local(x) && self.is_controlled(&scope.lookup(x).unwrap()) => {
                            self.report("ControlledField", s.meta, format!("field `{x}` holds a controlled object"))
                        }
                        _ => {}
                    }
                }
                StmtKind::If { then, els, .. } => {
                    self.block(then, scope.clone());
                    if let Some(e) = els {
                        self.block(e, scope.clone());
                    }
                }
                StmtKind::While { body, .. } => {
                    self.time_control(&s.annot.loop_control, &scope, s.meta);
                    self.block(body, scope.clone());
                }
                StmtKind::Await { guard: Guard::Diff(e), .. } => self.diff_guard(e, &scope),
                StmtKind::Await { guard: Guard::Duration(a, Some(b)), .. }
                | StmtKind::Duration { value: a, upper: Some(b) } => self.duration_pair(a, b, s.meta),
                _ => {}
            }
        }
        scope
    }

    fn duration_pair(&mut self, a: &Expr, b: &Expr, meta: Meta) {
        let same = match (a.const_num(), b.const_num()) {
            (Some(x), Some(y)) => x == y,
            _ => expr_to_string(a) == expr_to_string(b),
        };
        if !same {
            self.report(
                "DurationInterval",
                meta,
                format!(
                    "duration({}, {}) with distinct bounds is not supported",
                    expr_to_string(a),
                    expr_to_string(b)
                ),
            );
        }
    }

    fn diff_guard(&mut self, e: &Expr, scope: &Scope<'_>) {
        e.walk(&mut |x| {
            if let ExprKind::Var(v) = &x.kind {
                match scope.lookup(v) {
                    Some(Type::Real) | Some(Type::Rat) | None => {}
                    Some(t) => self.out.push(
                        Diagnostic::error(
                            "DiffGuardNotReal",
                            format!("differential guard mentions `{v}` of type {t}"),
                        )
                        .at(x.meta.id, x.meta.span),
                    ),
                }
            }
        });
    }

    fn rhs(&mut self, rhs: &Rhs, scope: &Scope<'_>, meta: Meta) {
        match rhs {
            Rhs::New { class, .. } => {
                if class != "DC" && self.program.class(class).is_none() {
                    self.report("UnknownClass", meta, format!("unknown class `{class}`"));
                }
            }
            Rhs::Call { callee, method, .. } => {
                if let Some(cn) = scope.class_of(callee) {
                    if let Some(c) = self.program.class(&cn) {
                        if c.method(method).is_none() {
                            self.report("UnknownMethod", meta, format!("class `{cn}` has no method `{method}`"));
                        }
                    }
                }
            }
            _ => {}
        }
    }

    fn expr(&mut self, e: &Expr, scope: &Scope<'_>) {
        e.walk(&mut |x| match &x.kind {
            ExprKind::Binary(op @ (BinOp::Lt | BinOp::Gt), ..) => self.out.push(
                Diagnostic::error(
                    "StrictInequality",
                    format!("strict inequality `{}` is not allowed", op.symbol()),
                )
                .at(x.meta.id, x.meta.span),
            ),
            ExprKind::Var(v) if scope.lookup(v).is_none() => self.out.push(
                Diagnostic::error("UnknownVariable", format!("unknown variable `{v}`"))
                    .at(x.meta.id, x.meta.span),
            ),
            ExprKind::This if scope.class.is_none() => self.out.push(
                Diagnostic::error("UnknownVariable", "`this` outside of a class")
                    .at(x.meta.id, x.meta.span),
            ),
            _ => {}
        });
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::parser::parse_program;

    fn kinds(src: &str) -> Vec<String> {
        validate_wellformed(&parse_program(src).unwrap()).into_iter().map(|d| d.kind).collect()
    }

    #[test]
    fn minimal_program_is_clean() {
        assert!(kinds("{ Bool b = true; }").is_empty());
    }

    #[test]
    fn uninitialized_physical_field() {
        let p = parse_program("class Tank { physical Real level; physical { level' = 0; } } { }").unwrap();
        let d = validate_wellformed(&p);
        assert_eq!(d.len(), 1);
        assert!(d[0].message.contains("physical field uninitialized"));
    }

    #[test]
    fn diff_guard_over_int() {
        let k = kinds("class A { Int n = 0; Unit m() { await diff n >= 1; } } { }");
        assert_eq!(k, vec!["DiffGuardNotReal"]);
    }

    #[test]
    fn duplicates_and_strictness() {
        let k = kinds("class A { Unit m() { skip; } Unit m() { Bool b = 1 < 2; } } class A { } { }");
        assert!(k.contains(&"DuplicateClass".to_string()));
        assert!(k.contains(&"DuplicateMethod".to_string()));
        assert!(k.contains(&"StrictInequality".to_string()));
    }

    #[test]
    fn controlled_values_in_fields() {
        let k = kinds(
            "class T { /*@ timed_requires 1 @*/ Unit c() { skip; } }
             class H(T t) { } { }",
        );
        assert_eq!(k, vec!["ControlledField"]);
    }

    #[test]
    fn distinct_duration_bounds() {
        assert_eq!(kinds("{ duration(1, 2); }"), vec!["DurationInterval"]);
        assert!(kinds("{ duration(1, 1); }").is_empty());
    }
}
