//! Time analysis: execution contexts and execution-time bounds for methods
//! and statements, with a built-in conservative analysis and user overrides.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::Serialize;
use thiserror::Error;

use crate::ast::*;
use crate::counting::{CountExpr, TimeBounds};
use crate::diag::Diagnostic;
use crate::rational::{zero, Rational};
use crate::scope::Scope;

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub struct ExecContext {
    pub id: u32,
    pub method: MethodRef,
    /// Call site that created this context; `None` for the method's default context.
    pub call_site: Option<NodeId>,
}

impl fmt::Display for ExecContext {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.call_site {
            Some(n) => write!(f, "{}@{n}", self.method),
            None => write!(f, "{}", self.method),
        }
    }
}

/// The interface the type checker is parametric in.
pub trait TimeOracle {
    fn contexts_of(&self, method: &MethodRef) -> Vec<ExecContext>;
    /// Context of the callee of the call at `call_site`, executed from `ctx`.
    fn call_context(&self, ctx: &ExecContext, call_site: NodeId) -> Option<ExecContext>;
    fn bounds_method(&self, ctx: &ExecContext, method: &MethodRef) -> TimeBounds;
    fn bounds_stmt(&self, ctx: &ExecContext, stmt: NodeId) -> TimeBounds;
}

/// User-supplied bounds that replace computed ones.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Overrides {
    pub methods: BTreeMap<MethodRef, TimeBounds>,
    pub stmts: BTreeMap<NodeId, TimeBounds>,
}

#[derive(Clone, Debug, PartialEq, Eq, Error)]
#[error("oracle file line {line}: {message}")]
pub struct SidecarError {
    pub line: usize,
    pub message: String,
}

impl Overrides {
    /// Parses the sidecar format: one `key = [a, b]` per line, where key is
    /// `Class.method`, `main`, or a statement node id; `#` starts a comment.
    pub fn parse(text: &str) -> Result<Overrides, SidecarError> {
        let mut out = Overrides::default();
        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            let err = |message: String| SidecarError { line, message };
            let content = raw.split('#').next().unwrap().trim();
            if content.is_empty() {
                continue;
            }
            let (key, value) =
                content.split_once('=').ok_or_else(|| err("expected `key = [a, b]`".into()))?;
            let (key, value) = (key.trim(), value.trim());
            let inner = value
                .strip_prefix('[')
                .and_then(|v| v.strip_suffix(']'))
                .ok_or_else(|| err(format!("expected `[a, b]`, found `{value}`")))?;
            let (a, b) = inner.split_once(',').ok_or_else(|| err("expected two bounds".into()))?;
            let parse = |s: &str| s.trim().parse::<CountExpr>().map_err(|e| err(e.to_string()));
            let bounds = TimeBounds::new(parse(a)?, parse(b)?);
            if !bounds.is_well_formed() {
                return Err(err(format!("bounds {bounds} must satisfy 0 <= min <= max")));
            }
            if let Ok(n) = key.parse::<u32>() {
                out.stmts.insert(NodeId(n), bounds);
            } else if key == MAIN {
                out.methods.insert(MethodRef::main(), bounds);
            } else if let Some((c, m)) = key.split_once('.') {
                if c.is_empty() || m.is_empty() || m.contains('.') {
                    return Err(err(format!("bad method key `{key}`")));
                }
                out.methods.insert(MethodRef::new(c, m), bounds);
            } else {
                return Err(err(format!("bad key `{key}`")));
            }
        }
        Ok(out)
    }
}

/// The built-in analysis, with all results precomputed.
#[derive(Clone, Debug)]
pub struct BuiltinOracle {
    contexts: Vec<ExecContext>,
    default_ctx: BTreeMap<MethodRef, u32>,
    site_ctx: BTreeMap<NodeId, u32>,
    site_bounds: BTreeMap<NodeId, TimeBounds>,
    callees: BTreeMap<NodeId, MethodRef>,
    methods: BTreeMap<MethodRef, TimeBounds>,
    computed: BTreeMap<MethodRef, TimeBounds>,
    stmts: BTreeMap<NodeId, TimeBounds>,
    /// Number of fixpoint rounds used.
    pub iterations: usize,
    /// Override conflicts (errors) and resource notes.
    pub diagnostics: Vec<Diagnostic>,
}

impl TimeOracle for BuiltinOracle {
    fn contexts_of(&self, method: &MethodRef) -> Vec<ExecContext> {
        self.contexts.iter().filter(|c| &c.method == method).cloned().collect()
    }

    fn call_context(&self, _ctx: &ExecContext, call_site: NodeId) -> Option<ExecContext> {
        if let Some(&id) = self.site_ctx.get(&call_site) {
            return Some(self.contexts[id as usize].clone());
        }
        let callee = self.callees.get(&call_site)?;
        self.default_ctx.get(callee).map(|&id| self.contexts[id as usize].clone())
    }

    fn bounds_method(&self, ctx: &ExecContext, method: &MethodRef) -> TimeBounds {
        if let Some(site) = ctx.call_site {
            if &ctx.method == method {
                if let Some(b) = self.site_bounds.get(&site) {
                    return b.clone();
                }
            }
        }
        self.methods.get(method).cloned().unwrap_or_else(TimeBounds::unknown)
    }

    fn bounds_stmt(&self, _ctx: &ExecContext, stmt: NodeId) -> TimeBounds {
        self.stmts.get(&stmt).cloned().unwrap_or_else(TimeBounds::unknown)
    }
}

impl BuiltinOracle {
    /// Bounds computed from the method body, ignoring any override of the method itself.
    pub fn computed_method(&self, method: &MethodRef) -> Option<&TimeBounds> {
        self.computed.get(method)
    }

    pub fn default_context(&self, method: &MethodRef) -> Option<ExecContext> {
        self.default_ctx.get(method).map(|&id| self.contexts[id as usize].clone())
    }

    pub fn callee_of(&self, call_site: NodeId) -> Option<&MethodRef> {
        self.callees.get(&call_site)
    }

    pub fn all_contexts(&self) -> &[ExecContext] {
        &self.contexts
    }
}

#[derive(Clone, Debug)]
struct Pending {
    bounds: TimeBounds,
    elapsed: TimeBounds,
    awaited: bool,
}

/// Builds the built-in oracle for a loop-free program.
pub fn builtin_oracle(program: &Program, overrides: &Overrides) -> BuiltinOracle {
    let bodies = program.bodies();
    let mut oracle = BuiltinOracle {
        contexts: Vec::new(),
        default_ctx: BTreeMap::new(),
        site_ctx: BTreeMap::new(),
        site_bounds: BTreeMap::new(),
        callees: BTreeMap::new(),
        methods: BTreeMap::new(),
        computed: BTreeMap::new(),
        stmts: BTreeMap::new(),
        iterations: 0,
        diagnostics: Vec::new(),
    };
    for b in &bodies {
        let id = oracle.contexts.len() as u32;
        oracle.contexts.push(ExecContext { id, method: b.owner.clone(), call_site: None });
        oracle.default_ctx.insert(b.owner.clone(), id);
    }
    for b in &bodies {
        let scope = Scope::of_body(b.class, b.method, b.stmts);
        walk_stmts(b.stmts, &mut |s| {
            let StmtKind::Assign { rhs: Rhs::Call { callee, method, .. }, .. } = &s.kind else {
                return;
            };
            let Some(target) = scope.callee_ref(callee, method) else { return };
            if let Some(cb) = &s.annot.ctx_bounds {
                let id = oracle.contexts.len() as u32;
                oracle.contexts.push(ExecContext { id, method: target.clone(), call_site: Some(s.id()) });
                oracle.site_ctx.insert(s.id(), id);
                oracle.site_bounds.insert(s.id(), cb.clone());
            }
            oracle.callees.insert(s.id(), target);
        });
    }

    let downgraded = resource_check(program, &mut oracle.diagnostics);

    let mut table: BTreeMap<MethodRef, TimeBounds> = bodies
        .iter()
        .map(|b| {
            let o = overrides.methods.get(&b.owner).or(source_override(b));
            (b.owner.clone(), o.cloned().unwrap_or_else(TimeBounds::never))
        })
        .collect();
    let cap = bodies.len() * 2 + 1;
    let mut pinned: BTreeSet<MethodRef> = BTreeSet::new();
    loop {
        oracle.iterations += 1;
        let mut pass = Pass {
            table: &table,
            overrides,
            downgraded: &downgraded,
            stmts: BTreeMap::new(),
            conflicts: Vec::new(),
        };
        let mut computed = BTreeMap::new();
        for b in &bodies {
            let scope = Scope::of_body(b.class, b.method, b.stmts);
            let mut pending = BTreeMap::new();
            let total = pass.seq(b, &scope, b.stmts, &mut pending);
            computed.insert(b.owner.clone(), total);
        }
        let (stmts, conflicts) = (pass.stmts, pass.conflicts);
        let mut changed = Vec::new();
        for b in &bodies {
            let effective = match overrides.methods.get(&b.owner).or(source_override(b)) {
                Some(o) => o.clone(),
                None if pinned.contains(&b.owner) => TimeBounds::unknown(),
                None => computed[&b.owner].clone(),
            };
            if table[&b.owner] != effective {
                changed.push((b.owner.clone(), effective));
            }
        }
        let stable = changed.is_empty();
        let widen = oracle.iterations >= cap;
        for (m, v) in changed {
            if widen {
                pinned.insert(m.clone());
                table.insert(m, TimeBounds::unknown());
            } else {
                table.insert(m, v);
            }
        }
        if stable {
            oracle.stmts = stmts;
            oracle.computed = computed;
            oracle.diagnostics.extend(conflicts);
            break;
        }
    }
    for b in &bodies {
        let o = overrides.methods.get(&b.owner).or(source_override(b));
        if let (Some(o), Some(c)) = (o, oracle.computed.get(&b.owner)) {
            if c.min.as_finite().is_some() && o.max.leq(&c.min) && o.max != c.min {
                let mut d = Diagnostic::error(
                    "OverrideConflict",
                    format!("override {o} for `{}` contradicts the computed lower bound {}", b.owner, c.min),
                )
                .in_method(b.owner.to_string());
                if let Some(m) = b.method {
                    d = d.at(m.meta.id, m.meta.span);
                }
                oracle.diagnostics.push(d);
            }
        }
    }
    oracle.methods = table;
    oracle
}

fn source_override<'a>(b: &Body<'a>) -> Option<&'a TimeBounds> {
    b.method.and_then(|m| m.contract.time_bounds.as_ref())
}

struct Pass<'a> {
    table: &'a BTreeMap<MethodRef, TimeBounds>,
    overrides: &'a Overrides,
    downgraded: &'a BTreeSet<String>,
    stmts: BTreeMap<NodeId, TimeBounds>,
    conflicts: Vec<Diagnostic>,
}

/// `max(0, a - b)` where an infinite `a` stays infinite and an infinite `b` yields 0.
fn remaining(a: &CountExpr, b: &CountExpr) -> CountExpr {
    if b.is_infty() {
        return CountExpr::zero();
    }
    a.sub(b).unwrap_or(CountExpr::PosInf).clamp_nonneg()
}

impl Pass<'_> {
    fn seq(
        &mut self,
        body: &Body<'_>,
        scope: &Scope<'_>,
        stmts: &[Stmt],
        pending: &mut BTreeMap<String, Pending>,
    ) -> TimeBounds {
        let mut total = TimeBounds::zero();
        for s in stmts {
            let b = self.stmt(body, scope, s, pending);
            total = total.then(&b);
        }
        total
    }

    fn stmt(
        &mut self,
        body: &Body<'_>,
        scope: &Scope<'_>,
        s: &Stmt,
        pending: &mut BTreeMap<String, Pending>,
    ) -> TimeBounds {
        if let StmtKind::If { then, els, .. } = &s.kind {
            let mut p2 = pending.clone();
            let a = self.seq(body, scope, then, pending);
            let b = match els {
                Some(e) => self.seq(body, scope, e, &mut p2),
                None => TimeBounds::zero(),
            };
            for (name, q) in pending.iter_mut() {
                if let Some(r) = p2.get(name) {
                    q.elapsed = q.elapsed.hull(&r.elapsed);
                    q.awaited &= r.awaited;
                }
            }
            pending.retain(|name, _| p2.contains_key(name));
            let bounds = a.hull(&b);
            return self.record(body, s, bounds);
        }

        let mut created = None;
        let computed = match &s.kind {
            StmtKind::Skip => TimeBounds::zero(),
            StmtKind::Assign { rhs: Rhs::Get(f), .. }
            | StmtKind::Await { guard: Guard::Poll(f), .. } => self.wait(f, pending),
            StmtKind::Assign { target, rhs, .. } => {
                match (target, rhs) {
                    (Some(x), Rhs::Call { callee, method, .. }) => {
                        let bounds = match s.annot.ctx_bounds.clone() {
                            Some(b) => b,
                            None => scope
                                .callee_ref(callee, method)
                                .and_then(|m| self.table.get(&m).cloned())
                                .unwrap_or_else(TimeBounds::unknown),
                        };
                        created = Some((x.clone(), Pending { bounds, elapsed: TimeBounds::zero(), awaited: false }));
                    }
                    (Some(x), Rhs::Expr(e)) => {
                        if let Some(p) = e.var_name().and_then(|v| pending.get(v)) {
                            created = Some((x.clone(), p.clone()));
                        }
                    }
                    _ => {}
                }
                TimeBounds::zero()
            }
            StmtKind::Duration { value, .. } | StmtKind::Await { guard: Guard::Duration(value, _), .. } => {
                match value.const_num() {
                    Some(k) => TimeBounds::exact(CountExpr::Finite(if k < zero() { zero() } else { k })),
                    None => TimeBounds::unknown(),
                }
            }
            StmtKind::Await { guard: Guard::Diff(e), .. } => {
                if e.is_const_true() {
                    TimeBounds::zero()
                } else {
                    TimeBounds::unknown()
                }
            }
            StmtKind::While { .. } => TimeBounds::unknown(),
            StmtKind::If { .. } => unreachable!(),
        };
        let class = body.class.map(|c| c.name.as_str());
        let computed = if s.annot.cost.is_some() && class.is_some_and(|c| self.downgraded.contains(c)) {
            TimeBounds::new(computed.min, CountExpr::PosInf)
        } else {
            computed
        };
        let bounds = self.record(body, s, computed);
        for p in pending.values_mut() {
            p.elapsed = p.elapsed.then(&bounds);
        }
        if let Some((x, p)) = created {
            pending.insert(x, p);
        }
        bounds
    }

    fn wait(&mut self, f: &Expr, pending: &mut BTreeMap<String, Pending>) -> TimeBounds {
        let Some(p) = f.var_name().and_then(|v| pending.get_mut(v)) else {
            return TimeBounds::unknown();
        };
        if p.awaited {
            return TimeBounds::zero();
        }
        p.awaited = true;
        TimeBounds::new(
            remaining(&p.bounds.min, &p.elapsed.max),
            remaining(&p.bounds.max, &p.elapsed.min),
        )
    }

    fn record(&mut self, body: &Body<'_>, s: &Stmt, computed: TimeBounds) -> TimeBounds {
        let bounds = match self.overrides.stmts.get(&s.id()) {
            Some(o) => {
                if computed.min.as_finite().is_some() && o.max < computed.min {
                    self.conflicts.push(
                        Diagnostic::error(
                            "OverrideConflict",
                            format!("override {o} contradicts the computed lower bound {}", computed.min),
                        )
                        .at(s.id(), s.meta.span)
                        .in_method(body.owner.to_string()),
                    );
                }
                o.clone()
            }
            None => computed,
        };
        self.stmts.insert(s.id(), bounds.clone());
        bounds
    }
}

// ---- deployment components ----

/// Checks each `[DC: e] x = new C(..)` placement: the capacity of `e` must be
/// known and cover the summed cost annotations of C. Returns the classes whose
/// cost statements are downgraded to unknown duration.
fn resource_check(program: &Program, diags: &mut Vec<Diagnostic>) -> BTreeSet<String> {
    let mut out = BTreeSet::new();
    for b in program.bodies() {
        walk_stmts(b.stmts, &mut |s| {
            let (Some(dc), StmtKind::Assign { rhs: Rhs::New { class, .. }, .. }) = (&s.annot.dc, &s.kind) else {
                return;
            };
            let cost = class_cost(program, class);
            let note = match dc_capacity(program, b.class, b.stmts, dc) {
                None => Some(format!(
                    "cannot determine the capacity of the deployment component hosting `{class}`; its cost statements may take time"
                )),
                Some(cap) if cost > cap => Some(format!(
                    "`{class}` costs {cost} per time unit but its deployment component provides {cap}; its cost statements may take time"
                )),
                Some(_) => None,
            };
            if let Some(msg) = note {
                diags.push(Diagnostic::note("DcCapacity", msg).at(s.id(), s.meta.span).in_method(b.owner.to_string()));
                out.insert(class.clone());
            }
        });
    }
    out
}

fn class_cost(program: &Program, class: &str) -> Rational {
    let mut total = zero();
    if let Some(c) = program.class(class) {
        for stmts in c.init.iter().chain(c.methods.iter().map(|m| &m.body)) {
            walk_stmts(stmts, &mut |s| {
                if let Some(q) = &s.annot.cost {
                    total += q;
                }
            });
        }
    }
    total
}

fn dc_capacity(program: &Program, class: Option<&ClassDecl>, body: &[Stmt], e: &Expr) -> Option<Rational> {
    let x = e.var_name()?;
    let mut local = None;
    walk_stmts(body, &mut |s| {
        if let StmtKind::Assign { target: Some(t), rhs, .. } = &s.kind {
            if t == x {
                local = Some(rhs);
            }
        }
    });
    match local {
        Some(Rhs::New { class: c, args }) if c == "DC" => args.first()?.const_num(),
        Some(Rhs::Expr(v)) => field_capacity(program, class?, v.var_name()?),
        Some(_) => None,
        None => field_capacity(program, class?, x),
    }
}

/// Smallest capacity among all `f = new DC(k)` assignments to field `f`.
fn field_capacity(_program: &Program, class: &ClassDecl, field: &str) -> Option<Rational> {
    class.field(field)?;
    let mut caps: Vec<Option<Rational>> = Vec::new();
    for stmts in class.init.iter().chain(class.methods.iter().map(|m| &m.body)) {
        walk_stmts(stmts, &mut |s| {
            if let StmtKind::Assign { ty: None, target: Some(t), rhs } = &s.kind {
                if t == field {
                    caps.push(match rhs {
                        Rhs::New { class: c, args } if c == "DC" => args.first().and_then(|a| a.const_num()),
                        _ => None,
                    });
                }
            }
        });
    }
    if caps.is_empty() {
        return None;
    }
    caps.into_iter().try_fold(None::<Rational>, |acc, c| {
        let c = c?;
        Some(Some(match acc {
            Some(a) if a < c => a,
            _ => c,
        }))
    })?
}

/// Which part of oracle validity a run contradicts.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ValidityClause {
    /// A statement took a time outside its bounds.
    Statement,
    /// A future was resolved outside the bounds of its method.
    Method,
    /// A future was still unresolved at the end of the run, later than the
    /// finite upper bound of its method.
    Unresolved,
}

/// Measurements of one clause at one statement or method that fall outside
/// the oracle's bounds.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct OracleViolation {
    pub clause: ValidityClause,
    pub context: String,
    pub method: MethodRef,
    pub node: Option<NodeId>,
    pub bounds: TimeBounds,
    /// The first offending measurement.
    #[serde(serialize_with = "crate::rational::serialize")]
    pub measured: Rational,
    #[serde(serialize_with = "crate::rational::serialize")]
    pub at: Rational,
    pub count: usize,
}

fn context_for(oracle: &dyn TimeOracle, method: &MethodRef, site: Option<NodeId>) -> Option<ExecContext> {
    let contexts = oracle.contexts_of(method);
    let default = contexts.iter().find(|c| c.call_site.is_none()).or(contexts.first())?.clone();
    match site.and_then(|s| oracle.call_context(&default, s)) {
        Some(c) if &c.method == method => Some(c),
        _ => Some(default),
    }
}

/// Compares every statement timing and future lifetime of `run` with the
/// bounds of `oracle`. The run must come from the program the oracle was
/// built for, so that node ids agree.
pub fn validate_oracle(oracle: &dyn TimeOracle, run: &crate::runtime::Run) -> Vec<OracleViolation> {
    let mut found: BTreeMap<(ValidityClause, String, Option<NodeId>), OracleViolation> = BTreeMap::new();
    let mut record = |clause, ctx: &ExecContext, node, bounds: TimeBounds, measured: Rational, at: &Rational| {
        found
            .entry((clause, ctx.to_string(), node))
            .and_modify(|v| v.count += 1)
            .or_insert_with(|| OracleViolation {
                clause,
                context: ctx.to_string(),
                method: ctx.method.clone(),
                node,
                bounds,
                measured,
                at: at.clone(),
                count: 1,
            });
    };
    for t in &run.timings {
        let Some(ctx) = context_for(oracle, &t.method, t.site) else { continue };
        let bounds = oracle.bounds_stmt(&ctx, t.node);
        let took = &t.end - &t.start;
        if !bounds.contains(&CountExpr::finite(took.clone())) {
            record(ValidityClause::Statement, &ctx, Some(t.node), bounds, took, &t.start);
        }
    }
    for f in &run.futures {
        let Some(ctx) = context_for(oracle, &f.method, f.site) else { continue };
        let bounds = oracle.bounds_method(&ctx, &f.method);
        match &f.resolved {
            Some(r) => {
                let took = r - &f.called;
                if !bounds.contains(&CountExpr::finite(took.clone())) {
                    record(ValidityClause::Method, &ctx, None, bounds, took, &f.called);
                }
            }
            None => {
                let open = &run.clock - &f.called;
                if bounds.max.as_finite().is_some_and(|m| open > *m) {
                    record(ValidityClause::Unresolved, &ctx, None, bounds, open, &f.called);
                }
            }
        }
    }
    found.into_values().collect()
}
