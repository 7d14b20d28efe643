//! Delegated timed-control type-and-effect checking.
//!
//! A method is checked against local control (`Γ_l`, the budget left before
//! the next required call of each controlled ceid) and delegated control
//! (`Γ_d`, ceids handed to a running callee together with its bounds).

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Serialize, Serializer};

use crate::ast::*;
use crate::counting::{CountExpr, TimeBounds};
use crate::diag::Diagnostic;
use crate::scope::Scope;
use crate::timeanalysis::{ExecContext, TimeOracle};

/// A controlled callable: a location holding an object and one of its methods.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Ceid {
    pub location: String,
    pub method: String,
}

impl Ceid {
    pub fn new(location: &str, method: &str) -> Ceid {
        Ceid { location: location.to_string(), method: method.to_string() }
    }
}

impl fmt::Display for Ceid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}.{}", self.location, self.method)
    }
}

impl Serialize for Ceid {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub struct FutId(pub u32);

impl fmt::Display for FutId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "f{}", self.0)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Delegation {
    pub fid: FutId,
    pub t_min: CountExpr,
    pub t_max: CountExpr,
    /// Budget the callee promises to leave when it returns.
    pub t: CountExpr,
}

impl Delegation {
    pub fn new(fid: FutId, t_min: CountExpr, t_max: CountExpr, t: CountExpr) -> Delegation {
        Delegation { fid, t_min, t_max, t }
    }
}

pub type LocalCtx = BTreeMap<Ceid, CountExpr>;
pub type DelegCtx = BTreeMap<Ceid, Delegation>;

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize)]
pub struct Contexts {
    pub local: LocalCtx,
    pub deleg: DelegCtx,
}

/// Lets `bounds` elapse. Delegations whose callee has certainly returned, or
/// whose future is in `awaited`, move back into local control. Returns the
/// new contexts and the ceids whose budget became negative.
pub fn apply_time_passing(
    c: &Contexts,
    bounds: &TimeBounds,
    awaited: &BTreeSet<FutId>,
) -> (Contexts, Vec<Ceid>) {
    let (lo, hi) = (&bounds.min, &bounds.max);
    let mut out = Contexts::default();
    for (k, v) in &c.local {
        out.local.insert(k.clone(), minus(v, hi));
    }
    for (k, d) in &c.deleg {
        if awaited.contains(&d.fid) {
            // The await ends when the callee returns; only time that passed
            // after a completion before the await started counts against t.
            let late = CountExpr::zero().join(&CountExpr::zero().sub(&d.t_min).unwrap_or(CountExpr::NegInf));
            out.local.insert(k.clone(), minus(&d.t, &late));
        } else if d.t_max.leq(lo) {
            let since = minus(hi, &d.t_min);
            out.local.insert(k.clone(), minus(&d.t, &since));
        } else {
            out.deleg.insert(
                k.clone(),
                Delegation::new(d.fid, minus(&d.t_min, hi), minus(&d.t_max, lo), d.t.clone()),
            );
        }
    }
    let bad = out.local.iter().filter(|(_, v)| !v.is_positive()).map(|(k, _)| k.clone()).collect();
    (out, bad)
}

/// `a - b` where `∞ - ∞` stays `∞`: an unbounded budget or callee is not
/// shortened by an unbounded wait.
fn minus(a: &CountExpr, b: &CountExpr) -> CountExpr {
    a.sub(b).unwrap_or_else(|_| a.clone())
}

/// Removes infinite local budgets and delegations whose callee never returns.
pub fn drop_infinite_delegations(c: &Contexts) -> Contexts {
    Contexts {
        local: c.local.iter().filter(|(_, v)| !v.is_infty()).map(|(k, v)| (k.clone(), v.clone())).collect(),
        deleg: c.deleg.iter().filter(|(_, d)| !d.t_min.is_infty()).map(|(k, d)| (k.clone(), d.clone())).collect(),
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum JoinError {
    BranchDomainMismatch,
    BranchDelegationMismatch,
}

/// Join of the two branches of a conditional: pointwise minimum of budgets.
pub fn join_branches(a: &Contexts, b: &Contexts) -> Result<Contexts, JoinError> {
    if !a.local.keys().eq(b.local.keys()) {
        return Err(JoinError::BranchDomainMismatch);
    }
    if a.deleg != b.deleg {
        return Err(JoinError::BranchDelegationMismatch);
    }
    let local = a.local.iter().map(|(k, v)| (k.clone(), v.meet(&b.local[k]))).collect();
    Ok(Contexts { local, deleg: a.deleg.clone() })
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct ContextResult {
    pub context: String,
    pub seed: LocalCtx,
    #[serde(rename = "final")]
    pub end: Contexts,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct MethodVerdict {
    pub method: String,
    pub accepted: bool,
    pub contexts: Vec<ContextResult>,
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize)]
pub struct TypingReport {
    pub methods: Vec<MethodVerdict>,
    pub diagnostics: Vec<Diagnostic>,
}

impl TypingReport {
    pub fn accepted(&self) -> bool {
        self.diagnostics.iter().all(|d| !d.is_error())
    }

    pub fn errors(&self) -> impl Iterator<Item = &Diagnostic> {
        self.diagnostics.iter().filter(|d| d.is_error())
    }
}

/// Checks every method, init block and the main block of a normalized program.
pub fn check_program(program: &Program, oracle: &dyn TimeOracle) -> TypingReport {
    let mut report = TypingReport::default();
    for body in program.bodies() {
        let (verdict, diags) = check_method(program, &body, oracle);
        report.methods.push(verdict);
        report.diagnostics.extend(diags);
    }
    report
}

/// Checks one body in each of its execution contexts. Main and init blocks
/// start from empty contexts and must end with nothing controlled.
pub fn check_method(program: &Program, body: &Body<'_>, oracle: &dyn TimeOracle) -> (MethodVerdict, Vec<Diagnostic>) {
    let owner = body.owner.to_string();
    let mut diags: Vec<Diagnostic> = Vec::new();
    let push = |d: Diagnostic, diags: &mut Vec<Diagnostic>| {
        let d = d.in_method(owner.clone());
        if !diags.contains(&d) {
            diags.push(d);
        }
    };
    let scope = Scope::of_body(body.class, body.method, body.stmts);
    let tctrl: &[TimeControl] = body.method.map(|m| m.contract.time_control.as_slice()).unwrap_or(&[]);
    let mut seed = LocalCtx::new();
    for tc in tctrl {
        let meta = body.method.map(|m| m.meta).unwrap();
        let treq = scope
            .local(&tc.location)
            .and_then(|t| t.class_name())
            .and_then(|c| program.class(c))
            .and_then(|c| c.treq(&tc.method));
        match treq {
            None => push(
                Diagnostic::error(
                    "AnnotationMismatch",
                    format!("`{}.{}` is not a method with a required call frequency", tc.location, tc.method),
                )
                .at(meta.id, meta.span),
                &mut diags,
            ),
            Some(q) if CountExpr::Finite(q.clone()) < tc.first => push(
                Diagnostic::error(
                    "AnnotationMismatch",
                    format!(
                        "first call of `{}.{}` may come after {}, but it must be called every {q}",
                        tc.location, tc.method, tc.first
                    ),
                )
                .at(meta.id, meta.span),
                &mut diags,
            ),
            _ => {}
        }
        seed.insert(Ceid::new(&tc.location, &tc.method), tc.first.clone());
    }

    let mut contexts = oracle.contexts_of(&body.owner);
    if contexts.is_empty() {
        contexts.push(ExecContext { id: u32::MAX, method: body.owner.clone(), call_site: None });
    }
    let mut results = Vec::new();
    for ctx in contexts {
        let mut ck = Checker { program, oracle, ctx: &ctx, scope: &scope, next_fid: 0, diags: Vec::new() };
        let start = Contexts { local: seed.clone(), deleg: DelegCtx::new() };
        let mut futs = BTreeMap::new();
        let end = ck.block(body.stmts, start, &mut futs);
        let end = drop_infinite_delegations(&end);
        let anchor = body.method.map(|m| m.meta).unwrap_or(Meta { id: NodeId(0), span: Span::default() });
        for (ceid, budget) in &end.local {
            match tctrl.iter().find(|t| t.location == ceid.location && t.method == ceid.method) {
                None => ck.diags.push(
                    Diagnostic::error("ResidualControl", format!("`{ceid}` is still controlled here when the body ends"))
                        .at(anchor.id, anchor.span),
                ),
                Some(tc) if budget < &tc.last => ck.diags.push(
                    Diagnostic::error(
                        "ResidualBudgetTooSmall",
                        format!("`{ceid}` has budget {budget} at the end, below the declared {}", tc.last),
                    )
                    .at(anchor.id, anchor.span),
                ),
                Some(_) => {}
            }
        }
        for (ceid, d) in &end.deleg {
            ck.diags.push(
                Diagnostic::error(
                    "ResidualDelegation",
                    format!("control of `{ceid}` is still delegated to {} when the body ends", d.fid),
                )
                .at(anchor.id, anchor.span),
            );
        }
        for d in std::mem::take(&mut ck.diags) {
            push(d, &mut diags);
        }
        results.push(ContextResult { context: ctx.to_string(), seed: seed.clone(), end });
    }
    let accepted = diags.iter().all(|d| !d.is_error());
    (MethodVerdict { method: owner, accepted, contexts: results }, diags)
}

/// Futures bound to each variable, for recognizing awaits on own calls.
type FutVars = BTreeMap<String, BTreeSet<FutId>>;

struct Checker<'a> {
    program: &'a Program,
    oracle: &'a dyn TimeOracle,
    ctx: &'a ExecContext,
    scope: &'a Scope<'a>,
    next_fid: u32,
    diags: Vec<Diagnostic>,
}

impl Checker<'_> {
    fn block(&mut self, stmts: &[Stmt], mut c: Contexts, futs: &mut FutVars) -> Contexts {
        for s in stmts {
            c = self.stmt(s, c, futs);
        }
        c
    }

    fn error(&mut self, kind: &str, s: &Stmt, msg: String) {
        self.diags.push(Diagnostic::error(kind, msg).at(s.id(), s.meta.span));
    }

    fn stmt(&mut self, s: &Stmt, c: Contexts, futs: &mut FutVars) -> Contexts {
        let c = drop_infinite_delegations(&c);
        match &s.kind {
            StmtKind::If { then, els, .. } => {
                let mut f2 = futs.clone();
                let a = self.block(then, c.clone(), futs);
                let b = match els {
                    Some(e) => self.block(e, c, &mut f2),
                    None => c,
                };
                for (k, v) in f2 {
                    futs.entry(k).or_default().extend(v);
                }
                let (a, b) = (drop_infinite_delegations(&a), drop_infinite_delegations(&b));
                match join_branches(&a, &b) {
                    Ok(j) => j,
                    Err(e) => {
                        let (kind, msg) = match e {
                            JoinError::BranchDomainMismatch => (
                                "BranchDomainMismatch",
                                format!("branches control different ceids: {} vs {}", keys(&a.local), keys(&b.local)),
                            ),
                            JoinError::BranchDelegationMismatch => (
                                "BranchDelegationMismatch",
                                format!("branches delegate differently: {} vs {}", keys(&a.deleg), keys(&b.deleg)),
                            ),
                        };
                        self.error(kind, s, msg);
                        let mut local = a.local.clone();
                        for (k, v) in &b.local {
                            let m = local.get(k).map(|x| x.meet(v)).unwrap_or_else(|| v.clone());
                            local.insert(k.clone(), m);
                        }
                        let mut deleg = a.deleg.clone();
                        deleg.extend(b.deleg.clone());
                        Contexts { local, deleg }
                    }
                }
            }
            StmtKind::While { .. } => {
                self.error("UnexpectedLoop", s, "loops must be eliminated before type checking".into());
                c
            }
            StmtKind::Assign { target, rhs, .. } => {
                let c = self.rhs(s, target.as_deref(), rhs, c, futs);
                let awaited = match rhs {
                    Rhs::Get(f) => awaited_by(f, futs),
                    _ => BTreeSet::new(),
                };
                self.pass(s, &c, &awaited)
            }
            StmtKind::Await { guard: Guard::Poll(f), .. } => {
                let awaited = awaited_by(f, futs);
                self.pass(s, &c, &awaited)
            }
            StmtKind::Await { .. } | StmtKind::Duration { .. } | StmtKind::Skip => {
                self.pass(s, &c, &BTreeSet::new())
            }
        }
    }

    fn pass(&mut self, s: &Stmt, c: &Contexts, awaited: &BTreeSet<FutId>) -> Contexts {
        let bounds = self.oracle.bounds_stmt(self.ctx, s.id());
        let (out, bad) = apply_time_passing(c, &bounds, awaited);
        for ceid in bad {
            let msg = format!(
                "`{ceid}` may not be called in time: the statement takes up to {}, leaving budget {}",
                bounds.max, out.local[&ceid]
            );
            self.error("FrequencyViolation", s, msg);
        }
        drop_infinite_delegations(&out)
    }

    fn rhs(&mut self, s: &Stmt, target: Option<&str>, rhs: &Rhs, mut c: Contexts, futs: &mut FutVars) -> Contexts {
        match rhs {
            Rhs::Expr(e) => {
                if let (Some(x), Some(v)) = (target, e.var_name()) {
                    if let Some(fs) = futs.get(v).cloned() {
                        futs.insert(x.to_string(), fs);
                    }
                }
                c
            }
            Rhs::Get(_) => c,
            Rhs::New { class, .. } => {
                let location = match target {
                    Some(x) => x.to_string(),
                    None => format!("_{}", s.id().0),
                };
                if let Some(cd) = self.program.class(class) {
                    for m in &cd.methods {
                        if let Some(q) = &m.contract.timed_requires {
                            c.local.insert(Ceid::new(&location, &m.name), CountExpr::Finite(q.clone()));
                        }
                    }
                }
                c
            }
            Rhs::Call { callee, method, args } => {
                let Some(mref) = self.scope.callee_ref(callee, method) else { return c };
                let Some(decl) = self.program.method(&mref) else { return c };
                let class = self.program.class(mref.class.as_deref().unwrap_or_default());
                if let (Some(loc), Some(q)) = (callee.var_name(), class.and_then(|cd| cd.treq(method))) {
                    let own = Ceid::new(loc, method);
                    if c.local.contains_key(&own) {
                        c.local.insert(own, CountExpr::Finite(q.clone()));
                    }
                }
                let mut handed = Vec::new();
                for tc in &decl.contract.time_control {
                    let Some(pos) = decl.params.iter().position(|p| p.name == tc.location) else {
                        self.error(
                            "UnknownControlledCeid",
                            s,
                            format!("`{mref}` controls `{}`, which is not one of its parameters", tc.location),
                        );
                        continue;
                    };
                    let Some(arg) = args.get(pos).and_then(|a| a.var_name()) else {
                        self.error(
                            "UnknownControlledCeid",
                            s,
                            format!("argument for `{}` of `{mref}` must be a variable holding a controlled object", tc.location),
                        );
                        continue;
                    };
                    let ceid = Ceid::new(arg, &tc.method);
                    match c.local.remove(&ceid) {
                        Some(budget) if budget >= tc.first => {}
                        Some(budget) => self.error(
                            "DelegationTooSlow",
                            s,
                            format!(
                                "`{mref}` may first call `{ceid}` after {}, but only {budget} remains",
                                tc.first
                            ),
                        ),
                        None => self.error(
                            "DelegationTooSlow",
                            s,
                            format!("`{ceid}` is delegated to `{mref}` but is not locally controlled here"),
                        ),
                    }
                    handed.push((ceid, tc.last.clone()));
                }
                let fid = FutId(self.next_fid);
                self.next_fid += 1;
                let bounds = match self.oracle.call_context(self.ctx, s.id()) {
                    Some(cc) => self.oracle.bounds_method(&cc, &mref),
                    None => TimeBounds::unknown(),
                };
                for (ceid, t) in handed {
                    c.deleg.insert(ceid, Delegation::new(fid, bounds.min.clone(), bounds.max.clone(), t));
                }
                if let Some(x) = target {
                    futs.insert(x.to_string(), BTreeSet::from([fid]));
                }
                c
            }
        }
    }
}

fn awaited_by(f: &Expr, futs: &FutVars) -> BTreeSet<FutId> {
    f.var_name().and_then(|v| futs.get(v)).cloned().unwrap_or_default()
}

fn keys<V>(m: &BTreeMap<Ceid, V>) -> String {
    let names: Vec<String> = m.keys().map(|k| k.to_string()).collect();
    format!("{{{}}}", names.join(", "))
}
