//! Rewrites a program into the restricted form the type checker works on:
//! loops become recursive methods, every local is assigned once, and every
//! method starts with a suspension.

use std::collections::{BTreeMap, BTreeSet};

use crate::ast::*;
use crate::counting::CountExpr;
use crate::diag::Diagnostic;
use crate::rational::{zero, Rational};

#[derive(Clone, Debug)]
pub struct Normalized {
    pub program: Program,
    pub diagnostics: Vec<Diagnostic>,
}

/// Runs loop elimination, SSA renaming and suspension insertion in order.
pub fn normalize(program: &Program) -> Normalized {
    let (p, diagnostics) = eliminate_loops(program);
    let p = ssa_rename(&p);
    let p = insert_leading_suspension(&p);
    Normalized { program: p, diagnostics }
}

pub fn is_loop_free(program: &Program) -> bool {
    program.bodies().iter().all(|b| {
        let mut ok = true;
        walk_stmts(b.stmts, &mut |s| ok &= !matches!(s.kind, StmtKind::While { .. }));
        ok
    })
}

/// Names read by any expression in `stmts`, nested blocks included.
pub fn reads(stmts: &[Stmt]) -> BTreeSet<String> {
    let mut out = BTreeSet::new();
    walk_stmts(stmts, &mut |s| {
        for e in s.own_exprs() {
            out.extend(e.vars());
        }
    });
    out
}

fn assigned(stmts: &[Stmt]) -> BTreeSet<String> {
    let mut out = BTreeSet::new();
    walk_stmts(stmts, &mut |s| {
        if let StmtKind::Assign { ty: None, target: Some(x), .. } = &s.kind {
            out.insert(x.clone());
        }
    });
    out
}

fn var(ids: &mut IdGen, span: Span, name: &str) -> Expr {
    Expr::new(ids.meta(span), ExprKind::Var(name.to_string()))
}

// ---- loop elimination ----

/// Replaces every `while` in a class body by a call to a fresh recursive
/// method `<m>$loop<K>` and a wait on its future.
pub fn eliminate_loops(program: &Program) -> (Program, Vec<Diagnostic>) {
    let mut out = program.clone();
    let mut ids = program.ids.clone();
    let mut diags = Vec::new();
    for (ci, class) in program.classes.iter().enumerate() {
        let mut methods = Vec::new();
        for m in &class.methods {
            let mut ex = Extractor::new(program, class, &m.name, &mut ids, &mut diags);
            let mut scope: Vec<(String, Type)> =
                m.params.iter().map(|p| (p.name.clone(), p.ty.clone())).collect();
            let live: BTreeSet<String> = m.ret.iter().flat_map(|e| e.vars()).collect();
            let body = ex.block(&m.body, &mut scope, &live);
            let made = ex.finish();
            methods.push(MethodDecl { body, ..m.clone() });
            methods.extend(made);
        }
        let init = class.init.as_ref().map(|init| {
            let mut ex = Extractor::new(program, class, INIT, &mut ids, &mut diags);
            let body = ex.block(init, &mut Vec::new(), &BTreeSet::new());
            methods.extend(ex.finish());
            body
        });
        out.classes[ci].methods = methods;
        out.classes[ci].init = init;
    }
    walk_stmts(&program.main, &mut |s| {
        if matches!(s.kind, StmtKind::While { .. }) {
            diags.push(
                Diagnostic::error("LoopInMain", "loops in the main block cannot be extracted into a method")
                    .at(s.meta.id, s.meta.span)
                    .in_method(MAIN),
            );
        }
    });
    out.ids = ids;
    (out, diags)
}

struct Extractor<'a> {
    program: &'a Program,
    class: &'a ClassDecl,
    base: String,
    next: u32,
    ids: &'a mut IdGen,
    diags: &'a mut Vec<Diagnostic>,
    made: Vec<(u32, MethodDecl)>,
}

impl<'a> Extractor<'a> {
    fn new(
        program: &'a Program,
        class: &'a ClassDecl,
        base: &str,
        ids: &'a mut IdGen,
        diags: &'a mut Vec<Diagnostic>,
    ) -> Self {
        Extractor { program, class, base: base.to_string(), next: 0, ids, diags, made: Vec::new() }
    }

    fn finish(mut self) -> Vec<MethodDecl> {
        self.made.sort_by_key(|(k, _)| *k);
        self.made.into_iter().map(|(_, m)| m).collect()
    }

    fn owner(&self) -> String {
        format!("{}.{}", self.class.name, self.base)
    }

    fn block(
        &mut self,
        stmts: &[Stmt],
        scope: &mut Vec<(String, Type)>,
        live_out: &BTreeSet<String>,
    ) -> Vec<Stmt> {
        let mut out = Vec::new();
        for (i, s) in stmts.iter().enumerate() {
            let mut live = reads(&stmts[i + 1..]);
            live.extend(live_out.iter().cloned());
            match &s.kind {
                StmtKind::While { cond, body } => {
                    out.extend(self.extract(s, cond, body, scope, &live));
                }
                StmtKind::If { cond, then, els } => {
                    let then = self.block(then, &mut scope.clone(), &live);
                    let els = els.as_ref().map(|e| self.block(e, &mut scope.clone(), &live));
                    out.push(Stmt {
                        kind: StmtKind::If { cond: cond.clone(), then, els },
                        ..s.clone()
                    });
                }
                StmtKind::Assign { ty: Some(t), target: Some(x), .. } => {
                    scope.push((x.clone(), t.clone()));
                    out.push(s.clone());
                }
                _ => out.push(s.clone()),
            }
        }
        out
    }

    fn extract(
        &mut self,
        s: &Stmt,
        cond: &Expr,
        body: &[Stmt],
        scope: &[(String, Type)],
        live: &BTreeSet<String>,
    ) -> Vec<Stmt> {
        let k = self.next;
        self.next += 1;
        let name = format!("{}$loop{k}", self.base);
        let fut = format!("f$loop{k}");
        let span = s.meta.span;

        let mut used = reads(body);
        used.extend(cond.vars());
        used.extend(assigned(body));
        let mut captured: Vec<(String, Type)> = Vec::new();
        for (x, t) in scope {
            if !used.contains(x) {
                continue;
            }
            match captured.iter_mut().find(|(y, _)| y == x) {
                Some(slot) => slot.1 = t.clone(),
                None => captured.push((x.clone(), t.clone())),
            }
        }

        for x in assigned(body) {
            if captured.iter().any(|(y, _)| *y == x) && live.contains(&x) {
                self.diags.push(
                    Diagnostic::error(
                        "LoopStateEscapes",
                        format!("`{x}` is modified in the loop and read after it; the extracted method cannot return it"),
                    )
                    .at(s.meta.id, span)
                    .in_method(self.owner()),
                );
            }
        }

        let control = if s.annot.loop_control.is_empty() {
            self.derive_control(s, body, &captured)
        } else {
            s.annot.loop_control.clone()
        };

        let mut inner_scope = captured.clone();
        let mut inner_live = cond.vars().into_iter().collect::<BTreeSet<_>>();
        inner_live.extend(captured.iter().map(|(x, _)| x.clone()));
        let mut then = self.block(body, &mut inner_scope, &inner_live);
        then.extend(self.call_and_wait(&name, &fut, &captured, span, None));
        let if_meta = self.ids.meta(span);
        let params = captured
            .iter()
            .map(|(x, t)| Param { meta: self.ids.meta(span), ty: t.clone(), name: x.clone() })
            .collect();
        let method = MethodDecl {
            meta: self.ids.meta(span),
            ret_ty: Type::Unit,
            name: name.clone(),
            params,
            body: vec![Stmt::new(if_meta, StmtKind::If { cond: cond.clone(), then, els: None })],
            ret: None,
            contract: MethodContract { time_control: control, ..MethodContract::default() },
        };
        self.made.push((k, method));
        self.call_and_wait(&name, &fut, &captured, span, s.annot.ctx_bounds.clone())
    }

    fn call_and_wait(
        &mut self,
        method: &str,
        fut: &str,
        args: &[(String, Type)],
        span: Span,
        ctx_bounds: Option<crate::counting::TimeBounds>,
    ) -> Vec<Stmt> {
        let callee = Expr::new(self.ids.meta(span), ExprKind::This);
        let args = args.iter().map(|(x, _)| var(self.ids, span, x)).collect();
        let mut call = Stmt::new(
            self.ids.meta(span),
            StmtKind::Assign {
                ty: Some(Type::Fut(Box::new(Type::Unit))),
                target: Some(fut.to_string()),
                rhs: Rhs::Call { callee, method: method.to_string(), args },
            },
        );
        call.annot.ctx_bounds = ctx_bounds;
        let guard = Guard::Poll(var(self.ids, span, fut));
        let wait = Stmt::new(self.ids.meta(span), StmtKind::Await { point: self.ids.point(), guard });
        vec![call, wait]
    }

    /// Control offsets for controlled captures called in the loop body:
    /// `[offset of the first call, treq - time after the last call]`.
    fn derive_control(
        &mut self,
        s: &Stmt,
        body: &[Stmt],
        captured: &[(String, Type)],
    ) -> Vec<TimeControl> {
        let mut out = Vec::new();
        for (x, ty) in captured {
            let Some(target) = ty.class_name().and_then(|c| self.program.class(c)) else {
                continue;
            };
            let passed = passes_as_argument(body, x);
            for m in &target.methods {
                let Some(treq) = &m.contract.timed_requires else { continue };
                let called = calls_method(body, x, &m.name);
                if !called && !passed {
                    continue;
                }
                match (passed, straight_line_offsets(body, x, &m.name)) {
                    (false, Some((first, after))) => out.push(TimeControl {
                        location: x.clone(),
                        method: m.name.clone(),
                        first: CountExpr::Finite(first),
                        last: CountExpr::Finite(treq - after),
                    }),
                    _ => self.diags.push(
                        Diagnostic::error(
                            "LoopControlUnderivable",
                            format!(
                                "cannot derive control offsets for `{x}.{}` in this loop; annotate it with `/*@ time_control: {x}.{} = [a, b] @*/`",
                                m.name, m.name
                            ),
                        )
                        .at(s.meta.id, s.meta.span)
                        .in_method(self.owner()),
                    ),
                }
            }
        }
        out
    }
}

fn calls_method(body: &[Stmt], x: &str, method: &str) -> bool {
    let mut found = false;
    walk_stmts(body, &mut |s| {
        if let StmtKind::Assign { rhs: Rhs::Call { callee, method: m, .. }, .. } = &s.kind {
            found |= callee.var_name() == Some(x) && m == method;
        }
    });
    found
}

fn passes_as_argument(body: &[Stmt], x: &str) -> bool {
    let mut found = false;
    walk_stmts(body, &mut |s| {
        if let StmtKind::Assign { rhs: Rhs::Call { args, .. } | Rhs::New { args, .. }, .. } = &s.kind {
            found |= args.iter().any(|a| a.mentions_var(x));
        }
    });
    found
}

/// Fixed execution time of a statement without nested blocks, if any.
pub fn constant_time(s: &Stmt) -> Option<Rational> {
    let nonneg = |q: Rational| if q < zero() { zero() } else { q };
    match &s.kind {
        StmtKind::Skip => Some(zero()),
        StmtKind::Assign { rhs: Rhs::Get(_), .. } => None,
        StmtKind::Assign { .. } => Some(zero()),
        StmtKind::Duration { value, .. } => value.const_num().map(nonneg),
        StmtKind::Await { guard: Guard::Duration(a, _), .. } => a.const_num().map(nonneg),
        StmtKind::Await { guard: Guard::Diff(e), .. } if e.is_const_true() => Some(zero()),
        _ => None,
    }
}

/// For a straight-line body of constant-time statements: the elapsed time
/// before the first call of `x.method` and the time from the last call to the end.
fn straight_line_offsets(body: &[Stmt], x: &str, method: &str) -> Option<(Rational, Rational)> {
    let mut elapsed = zero();
    let mut first = None;
    let mut last = None;
    for s in body {
        if let StmtKind::Assign { rhs: Rhs::Call { callee, method: m, .. }, .. } = &s.kind {
            if callee.var_name() == Some(x) && m == method {
                first.get_or_insert_with(|| elapsed.clone());
                last = Some(elapsed.clone());
            }
        }
        elapsed += constant_time(s)?;
    }
    Some((first?, elapsed - last?))
}

// ---- SSA ----

/// Gives every assignment to a local its own name and rewrites reads to the
/// reaching definition.
pub fn ssa_rename(program: &Program) -> Program {
    let mut out = program.clone();
    let mut ids = out.ids.clone();
    for c in &mut out.classes {
        if let Some(init) = &mut c.init {
            let mut ssa = Ssa::new(&[], init, &mut ids);
            *init = ssa.block(init, &BTreeSet::new());
        }
        for m in &mut c.methods {
            let mut ssa = Ssa::new(&m.params, &m.body, &mut ids);
            let live: BTreeSet<String> = m.ret.iter().flat_map(|e| e.vars()).collect();
            m.body = ssa.block(&m.body, &live);
            if let Some(r) = &mut m.ret {
                ssa.rename(r);
            }
        }
    }
    let main = out.main.clone();
    let mut ssa = Ssa::new(&[], &main, &mut ids);
    out.main = ssa.block(&main, &BTreeSet::new());
    out.ids = ids;
    out
}

struct Ssa<'a> {
    env: BTreeMap<String, String>,
    types: BTreeMap<String, Type>,
    taken: BTreeSet<String>,
    ids: &'a mut IdGen,
}

impl<'a> Ssa<'a> {
    fn new(params: &[Param], body: &[Stmt], ids: &'a mut IdGen) -> Self {
        let mut taken: BTreeSet<String> = params.iter().map(|p| p.name.clone()).collect();
        walk_stmts(body, &mut |s| {
            if let StmtKind::Assign { target: Some(x), .. } = &s.kind {
                taken.insert(x.clone());
            }
            for e in s.own_exprs() {
                taken.extend(e.vars());
            }
        });
        Ssa {
            env: params.iter().map(|p| (p.name.clone(), p.name.clone())).collect(),
            types: params.iter().map(|p| (p.name.clone(), p.ty.clone())).collect(),
            taken,
            ids,
        }
    }

    fn fresh(&mut self, x: &str) -> String {
        (1..)
            .map(|n| format!("{x}${n}"))
            .find(|c| !self.taken.contains(c))
            .inspect(|c| {
                self.taken.insert(c.clone());
            })
            .unwrap()
    }

    fn rename(&self, e: &mut Expr) {
        e.walk_mut(&mut |x| {
            if let ExprKind::Var(v) = &mut x.kind {
                if let Some(n) = self.env.get(v.as_str()) {
                    *v = n.clone();
                }
            }
        });
    }

    fn block(&mut self, stmts: &[Stmt], live_out: &BTreeSet<String>) -> Vec<Stmt> {
        let mut out = Vec::new();
        for (i, s) in stmts.iter().enumerate() {
            let mut live = reads(&stmts[i + 1..]);
            live.extend(live_out.iter().cloned());
            let mut s = s.clone();
            match &mut s.kind {
                StmtKind::If { cond, then, els } => {
                    self.rename(cond);
                    let (pre_env, pre_types) = (self.env.clone(), self.types.clone());
                    let mut then2 = self.block(then, &live);
                    let then_env = std::mem::replace(&mut self.env, pre_env.clone());
                    self.types = pre_types.clone();
                    let mut els2 = els.as_ref().map(|e| self.block(e, &live));
                    let else_env = std::mem::replace(&mut self.env, pre_env.clone());
                    self.types = pre_types;
                    for (x, before) in &pre_env {
                        let a = then_env.get(x).unwrap_or(before).clone();
                        let b = else_env.get(x).unwrap_or(before).clone();
                        if a == b {
                            self.env.insert(x.clone(), a);
                        } else if live.contains(x) {
                            let merged = self.fresh(x);
                            let ty = self.types[x].clone();
                            let span = s.meta.span;
                            then2.push(self.merge_stmt(&ty, &merged, &a, span));
                            let m = self.merge_stmt(&ty, &merged, &b, span);
                            els2.get_or_insert_with(Vec::new).push(m);
                            self.env.insert(x.clone(), merged);
                        }
                    }
                    *then = then2;
                    *els = els2;
                }
                StmtKind::While { cond, body } => {
                    self.rename(cond);
                    let saved = (self.env.clone(), self.types.clone());
                    *body = self.block(body, &live);
                    (self.env, self.types) = saved;
                }
                StmtKind::Assign { ty, target, rhs } => {
                    for e in rhs.exprs_mut() {
                        self.rename(e);
                    }
                    match (ty.as_ref(), target.as_ref()) {
                        (Some(t), Some(x)) => {
                            let name = if self.env.contains_key(x) { self.fresh(x) } else { x.clone() };
                            self.types.insert(x.clone(), t.clone());
                            self.env.insert(x.clone(), name.clone());
                            *target = Some(name);
                        }
                        (None, Some(x)) if self.env.contains_key(x) => {
                            let name = self.fresh(x);
                            *ty = Some(self.types[x].clone());
                            self.env.insert(x.clone(), name.clone());
                            *target = Some(name);
                        }
                        _ => {}
                    }
                }
                _ => {
                    for e in s.own_exprs_mut() {
                        self.rename(e);
                    }
                }
            }
            if let Some(dc) = &mut s.annot.dc {
                self.rename(dc);
            }
            out.push(s);
        }
        out
    }

    fn merge_stmt(&mut self, ty: &Type, target: &str, source: &str, span: Span) -> Stmt {
        let rhs = Rhs::Expr(var(self.ids, span, source));
        Stmt::new(
            self.ids.meta(span),
            StmtKind::Assign { ty: Some(ty.clone()), target: Some(target.to_string()), rhs },
        )
    }
}

// ---- leading suspension ----

/// Prepends `await diff true` to every method that does not start with an await.
pub fn insert_leading_suspension(program: &Program) -> Program {
    let mut out = program.clone();
    let mut ids = out.ids.clone();
    for c in &mut out.classes {
        for m in &mut c.methods {
            if matches!(m.body.first(), Some(Stmt { kind: StmtKind::Await { .. }, .. })) {
                continue;
            }
            let span = m.meta.span;
            let guard = Guard::Diff(Expr::new(ids.meta(span), ExprKind::Bool(true)));
            let s = Stmt::new(ids.meta(span), StmtKind::Await { point: ids.point(), guard });
            m.body.insert(0, s);
        }
    }
    out.ids = ids;
    out
}
