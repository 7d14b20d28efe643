//! Translation of statements into hybrid programs and the obligation scheme.

use std::collections::BTreeMap;

use serde::Serialize;

use super::*;
use crate::ast::*;
use crate::diag::Diagnostic;
use crate::scope::Scope;

pub(crate) fn is_real_sorted(ty: &Type) -> bool {
    matches!(ty, Type::Int | Type::Real | Type::Rat | Type::Bool)
}

/// Translation of a numeric expression that needs no type information.
pub(crate) fn plain_term(e: &Expr) -> Option<Term> {
    Env::default().term(e)
}

/// Declared types of every name visible in one body.
#[derive(Clone, Default)]
struct Env {
    types: BTreeMap<String, Type>,
    order: Vec<String>,
}

impl Env {
    fn add(&mut self, name: &str, ty: &Type) {
        if self.types.insert(name.to_string(), ty.clone()).is_none() {
            self.order.push(name.to_string());
        }
    }

    fn for_body(class: Option<&ClassDecl>, method: Option<&MethodDecl>, stmts: &[Stmt]) -> Env {
        let mut env = Env::default();
        if let Some(c) = class {
            for p in &c.params {
                env.add(&p.name, &p.ty);
            }
            for f in &c.fields {
                env.add(&f.name, &f.ty);
            }
        }
        if let Some(m) = method {
            for p in &m.params {
                env.add(&p.name, &p.ty);
            }
        }
        walk_stmts(stmts, &mut |s| {
            if let StmtKind::Assign { ty: Some(ty), target: Some(x), .. } = &s.kind {
                env.add(x, ty);
            }
        });
        env
    }

    fn is_bool(&self, e: &Expr) -> bool {
        match &e.kind {
            ExprKind::Bool(_) => true,
            ExprKind::Var(x) => self.types.get(x) == Some(&Type::Bool),
            ExprKind::Unary(UnOp::Not, _) => true,
            ExprKind::Binary(op, ..) => op.is_comparison() || matches!(op, BinOp::And | BinOp::Or),
            _ => false,
        }
    }

    fn is_real_var(&self, x: &str) -> bool {
        self.types.get(x).is_none_or(|t| is_real_sorted(t) && *t != Type::Bool)
    }

    fn term(&self, e: &Expr) -> Option<Term> {
        Some(match &e.kind {
            ExprKind::Num(q) => Term::Num(q.clone()),
            ExprKind::Var(x) if self.is_real_var(x) => Term::var(x),
            ExprKind::Now => Term::var(NOW),
            ExprKind::Unary(UnOp::Neg, a) => Term::Neg(Box::new(self.term(a)?)),
            ExprKind::Binary(op, a, b) => {
                let op = match op {
                    BinOp::Add => ArithOp::Add,
                    BinOp::Sub => ArithOp::Sub,
                    BinOp::Mul => ArithOp::Mul,
                    BinOp::Div => ArithOp::Div,
                    _ => return None,
                };
                Term::bin(op, self.term(a)?, self.term(b)?)
            }
            _ => return None,
        })
    }

    /// Boolean expression as a formula. Atoms over object identity become `true`.
    fn formula(&self, e: &Expr) -> Formula {
        match &e.kind {
            ExprKind::Bool(true) => Formula::True,
            ExprKind::Bool(false) => Formula::False,
            ExprKind::Var(x) if self.types.get(x) == Some(&Type::Bool) => {
                Formula::cmp(CmpOp::Eq, Term::var(x), Term::int(1))
            }
            ExprKind::Unary(UnOp::Not, a) => Formula::not(self.formula(a)),
            ExprKind::Binary(BinOp::And, a, b) => Formula::and(self.formula(a), self.formula(b)),
            ExprKind::Binary(BinOp::Or, a, b) => match (self.formula(a), self.formula(b)) {
                (Formula::True, _) | (_, Formula::True) => Formula::True,
                (a, b) => Formula::or(a, b),
            },
            ExprKind::Binary(op, a, b) if op.is_comparison() => {
                if matches!(op, BinOp::Eq | BinOp::Ne) && self.is_bool(a) && self.is_bool(b) {
                    let (fa, fb) = (self.formula(a), self.formula(b));
                    let same = Formula::or(
                        Formula::and(fa.clone(), fb.clone()),
                        Formula::and(Formula::not(fa), Formula::not(fb)),
                    );
                    return if *op == BinOp::Eq { same } else { Formula::not(same) };
                }
                let (Some(ta), Some(tb)) = (self.term(a), self.term(b)) else {
                    return Formula::True;
                };
                let op = match op {
                    BinOp::Le => CmpOp::Le,
                    BinOp::Ge => CmpOp::Ge,
                    BinOp::Lt => CmpOp::Lt,
                    BinOp::Gt => CmpOp::Gt,
                    BinOp::Eq => CmpOp::Eq,
                    _ => CmpOp::Ne,
                };
                Formula::cmp(op, ta, tb)
            }
            _ => Formula::True,
        }
    }
}

/// Per-class translation context.
struct Ctx<'a> {
    program: &'a Program,
    class: Option<&'a ClassDecl>,
    psi: Formula,
    inv: Formula,
    ode: Vec<(String, Term)>,
    env: Env,
    scope: Scope<'a>,
}

impl Ctx<'_> {
    fn pr(&self, phi: Formula) -> Formula {
        pr(&phi, &self.inv, &self.ode)
    }

    fn havoc_target(&self, target: Option<&str>) -> Vec<DlProgram> {
        match target {
            Some(x) if self.env.is_real_var(x) || self.env.types.get(x) == Some(&Type::Bool) => {
                vec![DlProgram::Havoc(x.to_string())]
            }
            _ => vec![],
        }
    }

    /// `{?φ} ∪ {?¬φ; fail}`
    fn check(&self, phi: Formula) -> DlProgram {
        DlProgram::choice(
            DlProgram::test(phi.clone()),
            DlProgram::seq(vec![DlProgram::test(Formula::not(phi)), DlProgram::fail()]),
        )
    }

    fn block(&self, stmts: &[Stmt]) -> DlProgram {
        if stmts.is_empty() {
            return DlProgram::test(Formula::True);
        }
        DlProgram::seq(stmts.iter().map(|s| self.stmt(s)).collect())
    }

    fn guard(&self, g: &Guard) -> Formula {
        match g {
            Guard::Diff(e) => self.env.formula(e),
            _ => Formula::True,
        }
    }

    fn stmt(&self, s: &Stmt) -> DlProgram {
        match &s.kind {
            StmtKind::Skip => DlProgram::test(Formula::True),
            StmtKind::Assign { target, rhs, .. } => self.assign(target.as_deref(), rhs),
            StmtKind::If { cond, then, els } => {
                let c = self.env.formula(cond);
                let other = match els {
                    Some(e) => self.block(e),
                    None => DlProgram::test(Formula::True),
                };
                DlProgram::choice(
                    DlProgram::seq(vec![DlProgram::test(c.clone()), self.block(then)]),
                    DlProgram::seq(vec![DlProgram::test(Formula::not(c)), other]),
                )
            }
            StmtKind::While { cond, body } => {
                let c = self.env.formula(cond);
                DlProgram::seq(vec![
                    DlProgram::Star(Box::new(DlProgram::seq(vec![DlProgram::test(c.clone()), self.block(body)]))),
                    DlProgram::test(Formula::not(c)),
                ])
            }
            StmtKind::Await { guard, .. } => {
                let g = self.guard(guard);
                let boundary = Formula::and(self.psi.clone(), weak_neg(&g).unwrap_or(Formula::True));
                let region = self.pr(boundary);
                let hv = havoc(self.class);
                DlProgram::choice(
                    DlProgram::seq(vec![
                        DlProgram::test(region.clone()),
                        hv.clone(),
                        DlProgram::test(Formula::and(g.clone(), self.inv.clone())),
                    ]),
                    DlProgram::seq(vec![DlProgram::test(Formula::not(region)), DlProgram::fail(), hv, DlProgram::test(g)]),
                )
            }
            StmtKind::Duration { value, .. } => {
                let e = self.env.term(value).unwrap_or(Term::int(0));
                let bound = Formula::cmp(CmpOp::Le, Term::var(T), e.clone());
                let mut eqs = self.ode.clone();
                eqs.push((T.to_string(), Term::int(1)));
                DlProgram::seq(vec![
                    DlProgram::Assign(T.to_string(), Term::int(0)),
                    self.check(self.pr(bound.clone())),
                    DlProgram::Assign(T.to_string(), Term::int(0)),
                    DlProgram::Ode(eqs, bound),
                    DlProgram::test(Formula::cmp(CmpOp::Ge, Term::var(T), e)),
                ])
            }
        }
    }

    fn assign(&self, target: Option<&str>, rhs: &Rhs) -> DlProgram {
        match rhs {
            Rhs::Expr(e) => match target {
                Some(x) if self.env.types.get(x) == Some(&Type::Bool) => {
                    let f = self.env.formula(e);
                    DlProgram::choice(
                        DlProgram::seq(vec![DlProgram::test(f.clone()), DlProgram::Assign(x.to_string(), Term::int(1))]),
                        DlProgram::seq(vec![DlProgram::test(Formula::not(f)), DlProgram::Assign(x.to_string(), Term::int(0))]),
                    )
                }
                Some(x) if self.env.is_real_var(x) => match self.env.term(e) {
                    Some(t) => DlProgram::Assign(x.to_string(), t),
                    None => DlProgram::Havoc(x.to_string()),
                },
                _ => DlProgram::test(Formula::True),
            },
            Rhs::Get(_) => {
                let ok = self.pr(Formula::True);
                let mut good = vec![DlProgram::test(ok.clone()), havoc_ph(self.class), DlProgram::test(self.inv.clone())];
                good.extend(self.havoc_target(target));
                let mut bad = vec![DlProgram::test(Formula::not(ok)), DlProgram::fail(), havoc_ph(self.class)];
                bad.extend(self.havoc_target(target));
                DlProgram::choice(DlProgram::seq(good), DlProgram::seq(bad))
            }
            Rhs::New { class, args } => {
                let cond = match self.program.class(class) {
                    Some(c) => {
                        let names: Vec<&str> = c.params.iter().map(|p| p.name.as_str()).collect();
                        let env = Env::for_body(Some(c), None, &[]);
                        self.instantiate(c.creation.as_ref(), &env, &names, args)
                    }
                    None => Formula::True,
                };
                let mut parts = vec![self.check(cond)];
                parts.extend(self.havoc_target(target));
                DlProgram::seq(parts)
            }
            Rhs::Call { callee, method, args } => {
                let pre = self
                    .scope
                    .callee_ref(callee, method)
                    .and_then(|m| {
                        let decl = self.program.method(&m)?;
                        let env = Env::for_body(None, Some(decl), &[]);
                        let names: Vec<&str> = decl.params.iter().map(|p| p.name.as_str()).collect();
                        Some(self.instantiate(decl.contract.requires.as_ref(), &env, &names, args))
                    })
                    .unwrap_or(Formula::True);
                let mut parts = vec![self.check(pre)];
                parts.extend(self.havoc_target(target));
                DlProgram::seq(parts)
            }
        }
    }

    /// A contract over `names` with the argument terms substituted in.
    fn instantiate(&self, contract: Option<&Expr>, env: &Env, names: &[&str], args: &[Expr]) -> Formula {
        let Some(c) = contract else { return Formula::True };
        let map = names
            .iter()
            .zip(args)
            .filter_map(|(n, a)| Some((n.to_string(), self.env.term(a)?)))
            .collect();
        env.formula(c).subst(&map)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Obligation {
    /// `Class.method`, `Class.init` or `main`.
    pub name: String,
    #[serde(serialize_with = "display")]
    pub formula: Formula,
    /// Real-sorted names in declaration order.
    pub declared: Vec<String>,
    /// Names whose sort cannot be expressed.
    pub non_real: Vec<String>,
}

fn display<S: serde::Serializer>(f: &Formula, s: S) -> Result<S::Ok, S::Error> {
    s.collect_str(f)
}

impl Obligation {
    pub fn to_kyx(&self) -> Result<String, UnsupportedSort> {
        emit_kyx(&self.name, &self.formula, &self.declared, &self.non_real)
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct Obligations {
    pub items: Vec<Obligation>,
    pub diagnostics: Vec<Diagnostic>,
}

fn ctx<'a>(program: &'a Program, class: Option<&'a ClassDecl>, method: Option<&'a MethodDecl>, stmts: &[Stmt]) -> Ctx<'a> {
    Ctx {
        program,
        class,
        psi: class.map(post_region_for).unwrap_or(Formula::True),
        inv: match class.and_then(|c| c.invariant.as_ref()) {
            Some(i) => Env::for_body(class, None, &[]).formula(i),
            None => Formula::True,
        },
        ode: class_ode(class),
        env: Env::for_body(class, method, stmts),
        scope: Scope::of_body(class, method, stmts),
    }
}

fn obligation(name: String, cx: &Ctx<'_>, formula: Formula) -> Obligation {
    let declared = cx
        .env
        .order
        .iter()
        .filter(|x| is_real_sorted(&cx.env.types[*x]))
        .cloned()
        .collect();
    let non_real = cx.env.order.iter().filter(|x| !is_real_sorted(&cx.env.types[*x])).cloned().collect();
    Obligation { name, formula, declared, non_real }
}

fn cll_zero() -> Formula {
    Formula::cmp(CmpOp::Eq, Term::var(CLL), Term::int(0))
}

/// `pre ∧ cll = 0 → [α](cll = 0 ∧ post)`, without the `cll` conjuncts when
/// `α` never records a violation.
fn scheme(pre: Formula, prog: DlProgram, post: Formula) -> Formula {
    if prog.assigns(CLL) {
        Formula::implies(Formula::and(pre, cll_zero()), Formula::boxed(prog, Formula::and(cll_zero(), post)))
    } else {
        Formula::implies(pre, Formula::boxed(prog, post))
    }
}

/// Translates one statement of `class` (or of main when `None`).
pub fn trans_stmt(program: &Program, class: Option<&ClassDecl>, method: Option<&MethodDecl>, s: &Stmt) -> DlProgram {
    ctx(program, class, method, std::slice::from_ref(s)).stmt(s)
}

/// `init_C ∧ cll = 0 → [field initializers; init block](cll = 0 ∧ pr(ψ, I, ode))`
pub fn obligation_init(program: &Program, class: &ClassDecl) -> Obligation {
    let stmts: &[Stmt] = class.init.as_deref().unwrap_or(&[]);
    let cx = ctx(program, Some(class), None, stmts);
    let mut parts = Vec::new();
    for f in &class.fields {
        if let (Some(e), true) = (&f.init, is_real_sorted(&f.ty)) {
            parts.push(cx.assign(Some(&f.name), &Rhs::Expr(e.clone())));
        }
    }
    parts.extend(stmts.iter().map(|s| cx.stmt(s)));
    let prog = if parts.is_empty() { DlProgram::test(Formula::True) } else { DlProgram::seq(parts) };
    let pre = match &class.creation {
        Some(c) => cx.env.formula(c),
        None => Formula::True,
    };
    let f = scheme(pre, prog, cx.pr(cx.psi.clone()));
    obligation(format!("{}.init", class.name), &cx, f)
}

/// `I ∧ pre ∧ cll = 0 → [body; result := e](cll = 0 ∧ post ∧ pr(ψ, I, ode))`
pub fn obligation_method(program: &Program, class: &ClassDecl, method: &MethodDecl) -> Obligation {
    let cx = ctx(program, Some(class), Some(method), &method.body);
    let mut parts: Vec<DlProgram> = method.body.iter().map(|s| cx.stmt(s)).collect();
    if let Some(t) = method.ret.as_ref().and_then(|r| cx.env.term(r)) {
        parts.push(DlProgram::Assign(RESULT.to_string(), t));
    }
    let prog = if parts.is_empty() { DlProgram::test(Formula::True) } else { DlProgram::seq(parts) };
    let formula_of = |e: &Option<Expr>| e.as_ref().map(|e| cx.env.formula(e)).unwrap_or(Formula::True);
    let pre = Formula::and(cx.inv.clone(), formula_of(&method.contract.requires));
    let post = Formula::and(formula_of(&method.contract.ensures), cx.pr(cx.psi.clone()));
    let f = scheme(pre, prog, post);
    obligation(format!("{}.{}", class.name, method.name), &cx, f)
}

/// `cll = 0 → [main] cll = 0`
pub fn obligation_main(program: &Program) -> Obligation {
    let cx = ctx(program, None, None, &program.main);
    let prog = cx.block(&program.main);
    let f = Formula::implies(cll_zero(), Formula::boxed(prog, cll_zero()));
    obligation("main".to_string(), &cx, f)
}

/// All obligations of a program: per class the initializer and every method,
/// then main when it is non-empty. Classes with dynamics but no invariant
/// are reported and skipped.
pub fn obligations(program: &Program) -> Obligations {
    let mut out = Obligations::default();
    for c in &program.classes {
        if c.physical.is_some() && c.invariant.is_none() {
            out.diagnostics.push(
                Diagnostic::error("MissingInvariant", format!("class `{}` has dynamics but no invariant", c.name))
                    .at(c.meta.id, c.meta.span),
            );
            continue;
        }
        out.items.push(obligation_init(program, c));
        for m in &c.methods {
            out.items.push(obligation_method(program, c, m));
        }
    }
    if !program.main.is_empty() {
        out.items.push(obligation_main(program));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::parser::parse_program;

    fn count_checks(stmts: &[Stmt]) -> usize {
        let mut n = 0;
        walk_stmts(stmts, &mut |s| match &s.kind {
            StmtKind::Await { .. } | StmtKind::Duration { .. } => n += 1,
            StmtKind::Assign { rhs: Rhs::Get(_) | Rhs::New { .. } | Rhs::Call { .. }, .. } => n += 1,
            _ => {}
        });
        n
    }

    #[test]
    fn one_fail_branch_per_check_point() {
        for src in [
            "class A(Real x) { Real y = 0; physical { } Unit m(A a) { await diff y >= 1; Fut<Unit> f = a!m(a); await f?; A b = new A(1); duration(2); Real z = f.get; } } { }",
            "class A { Unit m() { if (true) { duration(1); } else { await duration(2); } } } { }",
        ] {
            let p = parse_program(src).unwrap();
            let c = &p.classes[0];
            let m = &c.methods[0];
            let o = obligation_method(&p, c, m);
            let Formula::Implies(_, b) = &o.formula else { panic!("{}", o.formula) };
            let Formula::Box(prog, _) = &**b else { panic!() };
            assert_eq!(prog.fail_count(), count_checks(&m.body), "{}", o.formula);
        }
    }

    #[test]
    fn assignment_is_plain() {
        let p = parse_program("class A { Real v = 0; Unit m() { v = v + 1; } } { }").unwrap();
        let c = &p.classes[0];
        let s = &c.methods[0].body[0];
        assert_eq!(
            trans_stmt(&p, Some(c), None, s),
            DlProgram::Assign("v".into(), Term::bin(ArithOp::Add, Term::var("v"), Term::int(1)))
        );
    }

    #[test]
    fn diff_guard_is_translated_and_has_fail_branch() {
        let p = parse_program(
            "/*@ invariant level >= 0 @*/ class T { physical Real level = 5; Real drain = -1; physical { level' = drain; }
             Unit m() { await diff level >= 10 & drain >= 0; } } { }",
        )
        .unwrap();
        let c = &p.classes[0];
        let DlProgram::Choice(ok, bad) = trans_stmt(&p, Some(c), None, &c.methods[0].body[0]) else { panic!() };
        let g = Formula::and(
            Formula::cmp(CmpOp::Ge, Term::var("level"), Term::int(10)),
            Formula::cmp(CmpOp::Ge, Term::var("drain"), Term::int(0)),
        );
        let DlProgram::Seq(ok) = *ok else { panic!() };
        assert_eq!(ok[2], DlProgram::test(Formula::and(g.clone(), Formula::cmp(CmpOp::Ge, Term::var("level"), Term::int(0)))));
        let DlProgram::Seq(bad) = *bad else { panic!() };
        assert_eq!(bad[1], DlProgram::fail());
        assert_eq!(bad[3], DlProgram::test(g));
    }

    #[test]
    fn duration_has_two_phases() {
        let p = parse_program("class A { Unit m() { duration(2); } } { }").unwrap();
        let c = &p.classes[0];
        let DlProgram::Seq(parts) = trans_stmt(&p, Some(c), None, &c.methods[0].body[0]) else { panic!() };
        assert_eq!(parts.len(), 5);
        let bound = Formula::cmp(CmpOp::Le, Term::var("t"), Term::int(2));
        assert_eq!(parts[3], DlProgram::Ode(vec![("t".into(), Term::int(1))], bound));
        assert_eq!(parts[4], DlProgram::test(Formula::cmp(CmpOp::Ge, Term::var("t"), Term::int(2))));
    }

    #[test]
    fn empty_main() {
        let p = parse_program("{ }").unwrap();
        let o = obligation_main(&p);
        assert_eq!(o.formula, Formula::implies(cll_zero(), Formula::boxed(DlProgram::test(Formula::True), cll_zero())));
        assert!(obligations(&p).items.is_empty());
    }

    #[test]
    fn missing_invariant() {
        let p = parse_program("class A { physical Real x = 0; physical { x' = 1; } } { }").unwrap();
        let o = obligations(&p);
        assert_eq!(o.diagnostics[0].kind, "MissingInvariant");
        assert!(o.items.is_empty());
    }

    #[test]
    fn call_preconditions_are_instantiated() {
        let p = parse_program(
            "class B { /*@ requires k >= 1 && b != null @*/ Unit n(B b, Int k) { skip; } }
             class A { Unit m(B b) { Int j = 2; b!n(b, j + 1); } } { }",
        )
        .unwrap();
        let c = p.class("A").unwrap();
        let m = &c.methods[0];
        let DlProgram::Seq(parts) = trans_stmt(&p, Some(c), Some(m), &m.body[1]) else { panic!() };
        let DlProgram::Choice(ok, _) = &parts[0] else { panic!() };
        let want = Formula::cmp(CmpOp::Ge, Term::bin(ArithOp::Add, Term::var("j"), Term::int(1)), Term::int(1));
        assert_eq!(**ok, DlProgram::test(want));
    }
}
