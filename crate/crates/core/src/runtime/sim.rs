//! The deterministic simulator: discrete steps to quiescence, then time
//! advance by the maximal time elapse.

use std::collections::{BTreeMap, VecDeque};

use num_traits::Zero;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::eval::*;
use super::*;
use crate::ast::*;
use crate::counting::CountExpr;
use crate::rational::{next_integer_after, zero, Rational};

/// Discrete steps allowed without time advancing.
pub const STEP_LIMIT: usize = 1_000_000;
/// Consecutive zero-length advances tolerated before the run is declared time-convergent.
const ZERO_ADVANCE_LIMIT: usize = 1_000;

#[derive(Clone, Debug)]
struct Frame<'p> {
    stmts: &'p [Stmt],
    pos: usize,
    /// The `if`/`while` statement that opened this block and when it started.
    owner: Option<(NodeId, Rational)>,
    looping: Option<&'p Expr>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Pending {
    Duration,
    Resource,
    Get,
}

#[derive(Clone, Debug)]
struct Process<'p> {
    fid: Option<Fid>,
    method: MethodRef,
    decl: Option<&'p MethodDecl>,
    site: Option<NodeId>,
    locals: BTreeMap<String, Value>,
    frames: Vec<Frame<'p>>,
    started: Option<Rational>,
    pending: Option<Pending>,
    blocked_until: Option<Rational>,
    paid: bool,
}

impl<'p> Process<'p> {
    fn current(&self) -> Option<&'p Stmt> {
        let f = self.frames.last()?;
        f.stmts.get(f.pos)
    }

    fn label(&self, obj: ObjId) -> String {
        match self.fid {
            Some(f) => format!("{obj}.{} {f}", self.method.method),
            None => format!("{obj}.{}", self.method.method),
        }
    }
}

#[derive(Clone, Debug)]
enum QGuard<'p> {
    True,
    Until(Rational),
    Fut(Fid),
    Diff(&'p Expr),
}

#[derive(Clone, Debug)]
struct Queued<'p> {
    proc: Process<'p>,
    guard: QGuard<'p>,
    /// The process sits on an `await` statement that completes when scheduled.
    at_await: bool,
}

#[derive(Clone, Debug)]
struct Message {
    fid: Fid,
    method: String,
    args: Vec<Value>,
    site: Option<NodeId>,
}

#[derive(Clone, Debug)]
struct Object<'p> {
    id: ObjId,
    class: Option<&'p ClassDecl>,
    fields: BTreeMap<String, Value>,
    slopes: BTreeMap<String, Rational>,
    active: Option<Process<'p>>,
    queue: Vec<Queued<'p>>,
    inbox: VecDeque<Message>,
    dc: Option<DcId>,
}

impl Object<'_> {
    fn name(&self) -> &str {
        self.class.map_or("main", |c| c.name.as_str())
    }

    fn is_alive(&self) -> bool {
        self.active.is_some() || !self.queue.is_empty() || !self.inbox.is_empty()
    }
}

struct View<'a, 'p> {
    obj: &'a Object<'p>,
    locals: Option<&'a BTreeMap<String, Value>>,
    clock: &'a Rational,
}

impl Valuation for View<'_, '_> {
    fn lookup(&self, x: &str) -> Option<Value> {
        self.locals.and_then(|l| l.get(x)).or_else(|| self.obj.fields.get(x)).cloned()
    }

    fn slope(&self, x: &str) -> Rational {
        if self.locals.is_some_and(|l| l.contains_key(x)) {
            return zero();
        }
        self.obj.slopes.get(x).cloned().unwrap_or_else(zero)
    }

    fn this(&self) -> Value {
        match self.obj.class {
            Some(_) => Value::Obj(self.obj.id),
            None => Value::Null,
        }
    }

    fn clock(&self) -> Rational {
        self.clock.clone()
    }
}

/// A timed configuration together with everything logged so far.
pub struct Simulator<'p> {
    program: &'p Program,
    clock: Rational,
    objects: Vec<Object<'p>>,
    dcs: Vec<DeploymentComponent>,
    futures: BTreeMap<Fid, Option<Value>>,
    cursor: usize,
    rng: Option<ChaCha8Rng>,
    log: Run,
}

fn default_value(ty: &Type) -> Value {
    match ty {
        Type::Int | Type::Real | Type::Rat => Value::Num(zero()),
        Type::Bool => Value::Bool(false),
        Type::Unit => Value::Unit,
        _ => Value::Null,
    }
}

impl<'p> Simulator<'p> {
    /// Initial configuration: the main block as the active process of a
    /// class-less object `o0`.
    pub fn new(program: &'p Program, seed: Option<u64>) -> Simulator<'p> {
        let main = Object {
            id: ObjId(0),
            class: None,
            fields: BTreeMap::new(),
            slopes: BTreeMap::new(),
            active: None,
            queue: Vec::new(),
            inbox: VecDeque::new(),
            dc: None,
        };
        let mut sim = Simulator {
            program,
            clock: zero(),
            objects: vec![main],
            dcs: Vec::new(),
            futures: BTreeMap::new(),
            cursor: 0,
            rng: seed.map(ChaCha8Rng::seed_from_u64),
            log: Run::default(),
        };
        sim.log.objects.push(ObjectInfo { id: ObjId(0), class: "main".into(), created: zero() });
        if !program.main.is_empty() {
            sim.objects[0].active = Some(Process {
                fid: None,
                method: MethodRef::main(),
                decl: None,
                site: None,
                locals: BTreeMap::new(),
                frames: vec![Frame { stmts: &program.main, pos: 0, owner: None, looping: None }],
                started: None,
                pending: None,
                blocked_until: None,
                paid: false,
            });
        }
        sim
    }

    pub fn clock(&self) -> &Rational {
        &self.clock
    }

    /// Current value of a field of an object.
    pub fn field(&self, obj: ObjId, name: &str) -> Option<&Value> {
        self.objects.get(obj.0 as usize)?.fields.get(name)
    }

    pub fn objects_of(&self, class: &str) -> Vec<ObjId> {
        self.objects.iter().filter(|o| o.class.is_some_and(|c| c.name == class)).map(|o| o.id).collect()
    }

    pub fn events(&self) -> &[Event] {
        &self.log.events
    }

    fn event(&mut self, text: String) {
        self.log.events.push(Event { clock: self.clock.clone(), text });
    }

    fn view<'a>(&'a self, i: usize, locals: Option<&'a BTreeMap<String, Value>>) -> View<'a, 'p> {
        View { obj: &self.objects[i], locals, clock: &self.clock }
    }

    fn resolved(&self, f: Fid) -> bool {
        matches!(self.futures.get(&f), Some(Some(_)))
    }

    /// Applies one enabled discrete rule; `false` when none is enabled.
    pub fn step(&mut self) -> Result<bool, SimError> {
        let n = self.objects.len();
        let order: Vec<usize> = match &mut self.rng {
            Some(rng) => {
                let mut v: Vec<usize> = (0..n).collect();
                v.shuffle(rng);
                v
            }
            None => (0..n).map(|k| (self.cursor + k) % n).collect(),
        };
        for i in order {
            if self.try_step(i)? {
                self.cursor = (i + 1) % self.objects.len();
                self.log.steps += 1;
                return Ok(true);
            }
        }
        Ok(false)
    }

    fn try_step(&mut self, i: usize) -> Result<bool, SimError> {
        if let Some(msg) = self.objects[i].inbox.pop_front() {
            self.pickup(i, msg)?;
            return Ok(true);
        }
        if let Some(p) = self.objects[i].active.take() {
            let (progress, keep) = self.exec(i, p)?;
            if keep.is_some() {
                self.objects[i].active = keep;
            }
            return Ok(progress);
        }
        self.schedule(i)
    }

    /// Moves a message into the object's queue as a new process.
    fn pickup(&mut self, i: usize, msg: Message) -> Result<(), SimError> {
        let obj = &self.objects[i];
        let class = obj.class.ok_or_else(|| SimError::Runtime("message to the main block".into()))?;
        let decl = class
            .method(&msg.method)
            .ok_or_else(|| SimError::Runtime(format!("class `{}` has no method `{}`", class.name, msg.method)))?;
        let locals = decl.params.iter().map(|p| p.name.clone()).zip(msg.args).collect();
        let mut proc = Process {
            fid: Some(msg.fid),
            method: MethodRef::new(&class.name, &decl.name),
            decl: Some(decl),
            site: msg.site,
            locals,
            frames: vec![Frame { stmts: &decl.body, pos: 0, owner: None, looping: None }],
            started: None,
            pending: None,
            blocked_until: None,
            paid: false,
        };
        let (guard, at_await) = match proc.current().map(|s| &s.kind) {
            Some(StmtKind::Await { guard, .. }) => {
                proc.started = Some(self.clock.clone());
                (self.queue_guard(i, &proc.locals, guard)?, true)
            }
            _ => (QGuard::True, false),
        };
        self.objects[i].queue.push(Queued { proc, guard, at_await });
        Ok(())
    }

    fn queue_guard(&self, i: usize, locals: &BTreeMap<String, Value>, g: &'p Guard) -> Result<QGuard<'p>, SimError> {
        let v = self.view(i, Some(locals));
        Ok(match g {
            Guard::Duration(e, _) => {
                let d = eval_num(e, &v)?;
                QGuard::Until(if d > zero() { &self.clock + d } else { self.clock.clone() })
            }
            Guard::Poll(e) => match eval(e, &v)? {
                Value::Fut(f) => QGuard::Fut(f),
                other => return Err(SimError::Runtime(format!("`{other}` is not a future"))),
            },
            Guard::Diff(e) if e.is_const_true() => QGuard::True,
            Guard::Diff(e) => QGuard::Diff(e),
        })
    }

    fn enabled(&self, i: usize, q: &Queued<'p>) -> Result<bool, SimError> {
        Ok(match &q.guard {
            QGuard::True => true,
            QGuard::Until(u) => *u <= self.clock,
            QGuard::Fut(f) => self.resolved(*f),
            QGuard::Diff(e) => eval_bool(e, &self.view(i, Some(&q.proc.locals)))?,
        })
    }

    /// Rule (3): an idle object picks an enabled queued process.
    fn schedule(&mut self, i: usize) -> Result<bool, SimError> {
        let mut candidates = Vec::new();
        for (k, q) in self.objects[i].queue.iter().enumerate() {
            if self.enabled(i, q)? {
                candidates.push(k);
            }
        }
        let Some(&first) = candidates.first() else { return Ok(false) };
        let k = match &mut self.rng {
            Some(rng) => candidates[rng.gen_range(0..candidates.len())],
            None => first,
        };
        let q = self.objects[i].queue.remove(k);
        let mut p = q.proc;
        let id = self.objects[i].id;
        self.event(format!("schedule {}", p.label(id)));
        self.proc_event(id, ProcEventKind::Schedule, &p.method);
        if q.at_await {
            self.complete(id, &mut p);
        }
        self.objects[i].active = self.unwind(i, p)?;
        Ok(true)
    }

    fn proc_event(&mut self, object: ObjId, kind: ProcEventKind, method: &MethodRef) {
        self.log.proc_events.push(ProcEvent { object, clock: self.clock.clone(), kind, method: method.clone() });
    }

    /// Records the timing of the current statement and moves past it.
    fn complete(&mut self, obj: ObjId, p: &mut Process<'p>) {
        if let (Some(s), Some(start)) = (p.current(), p.started.take()) {
            self.log.timings.push(StmtTiming {
                object: obj,
                fid: p.fid,
                method: p.method.clone(),
                site: p.site,
                node: s.id(),
                start,
                end: self.clock.clone(),
            });
        }
        p.paid = false;
        if let Some(f) = p.frames.last_mut() {
            f.pos += 1;
        }
    }

    /// Pops finished blocks, re-entering loops; finishes the process when
    /// nothing is left.
    fn unwind(&mut self, i: usize, mut p: Process<'p>) -> Result<Option<Process<'p>>, SimError> {
        let id = self.objects[i].id;
        loop {
            let Some(top) = p.frames.last_mut() else {
                self.finish(i, p)?;
                return Ok(None);
            };
            if top.pos < top.stmts.len() {
                return Ok(Some(p));
            }
            if let Some(cond) = top.looping {
                let again = eval_bool(cond, &View { obj: &self.objects[i], locals: Some(&p.locals), clock: &self.clock })?;
                if again {
                    p.frames.last_mut().unwrap().pos = 0;
                    return Ok(Some(p));
                }
            }
            let done = p.frames.pop().unwrap();
            if let (Some((node, start)), Some(_)) = (done.owner, p.frames.last()) {
                self.log.timings.push(StmtTiming {
                    object: id,
                    fid: p.fid,
                    method: p.method.clone(),
                    site: p.site,
                    node,
                    start,
                    end: self.clock.clone(),
                });
                p.frames.last_mut().unwrap().pos += 1;
            }
        }
    }

    fn finish(&mut self, i: usize, p: Process<'p>) -> Result<(), SimError> {
        let value = match p.decl.and_then(|d| d.ret.as_ref()) {
            Some(e) => eval(e, &self.view(i, Some(&p.locals)))?,
            None => Value::Unit,
        };
        let id = self.objects[i].id;
        self.event(format!("return {} = {value}", p.label(id)));
        self.proc_event(id, ProcEventKind::Terminate, &p.method);
        if let Some(f) = p.fid {
            self.futures.insert(f, Some(value));
            if let Some(r) = self.log.futures.iter_mut().find(|r| r.fid == f) {
                r.resolved = Some(self.clock.clone());
            }
        }
        Ok(())
    }

    fn assign(&mut self, i: usize, p: &mut Process<'p>, declared: bool, target: &str, v: Value) {
        if declared || p.locals.contains_key(target) || !self.objects[i].fields.contains_key(target) {
            p.locals.insert(target.to_string(), v);
        } else {
            self.objects[i].fields.insert(target.to_string(), v);
        }
    }

    /// Executes the current statement of the active process of object `i`.
    fn exec(&mut self, i: usize, mut p: Process<'p>) -> Result<(bool, Option<Process<'p>>), SimError> {
        if let Some(u) = &p.blocked_until {
            if *u > self.clock {
                return Ok((false, Some(p)));
            }
            p.blocked_until = None;
        }
        let id = self.objects[i].id;
        let Some(stmt) = p.current() else {
            return Ok((true, self.unwind(i, p)?));
        };
        let was_pending = p.pending.take();
        match was_pending {
            Some(Pending::Duration) => {
                self.complete(id, &mut p);
                return Ok((true, self.unwind(i, p)?));
            }
            Some(_) => {}
            None => p.started = Some(self.clock.clone()),
        }
        if let (Some(cost), false) = (&stmt.annot.cost, p.paid) {
            if let Some(dc) = self.objects[i].dc {
                let dc = &mut self.dcs[dc.0 as usize];
                match resource_step(dc, cost, &self.clock)? {
                    ResourceOutcome::Consumed => p.paid = true,
                    ResourceOutcome::BlockedUntil(t) => {
                        p.pending = Some(Pending::Resource);
                        p.blocked_until = Some(t);
                        return Ok((true, Some(p)));
                    }
                }
            }
        }
        match &stmt.kind {
            StmtKind::Skip => {}
            StmtKind::Assign { ty, target, rhs } => {
                let v = match rhs {
                    Rhs::Expr(e) => eval(e, &self.view(i, Some(&p.locals)))?,
                    Rhs::Get(e) => match eval(e, &self.view(i, Some(&p.locals)))? {
                        Value::Fut(f) => match self.futures.get(&f) {
                            Some(Some(v)) => v.clone(),
                            _ => {
                                p.pending = Some(Pending::Get);
                                return Ok((was_pending != Some(Pending::Get), Some(p)));
                            }
                        },
                        other => return Err(SimError::Runtime(format!("`{other}` is not a future"))),
                    },
                    Rhs::New { class, args } => self.create(i, &p, stmt, class, args)?,
                    Rhs::Call { callee, method, args } => {
                        let view = self.view(i, Some(&p.locals));
                        let target = match eval(callee, &view)? {
                            Value::Obj(o) => o,
                            other => return Err(SimError::Runtime(format!("call of `{method}` on `{other}`"))),
                        };
                        let args = args.iter().map(|a| eval(a, &view)).collect::<Result<Vec<_>, _>>()?;
                        self.send(id, target, method, args, stmt.id())
                    }
                };
                if let Some(x) = target {
                    self.assign(i, &mut p, ty.is_some(), x, v);
                }
            }
            StmtKind::If { cond, then, els } => {
                let c = eval_bool(cond, &self.view(i, Some(&p.locals)))?;
                let branch: &'p [Stmt] = if c { then } else { els.as_deref().unwrap_or(&[]) };
                if !branch.is_empty() {
                    let start = p.started.take().unwrap_or_else(|| self.clock.clone());
                    p.frames.push(Frame { stmts: branch, pos: 0, owner: Some((stmt.id(), start)), looping: None });
                    return Ok((true, Some(p)));
                }
            }
            StmtKind::While { cond, body } => {
                if eval_bool(cond, &self.view(i, Some(&p.locals)))? {
                    let start = p.started.take().unwrap_or_else(|| self.clock.clone());
                    p.frames.push(Frame { stmts: body, pos: 0, owner: Some((stmt.id(), start)), looping: Some(cond) });
                    return Ok((true, Some(p)));
                }
            }
            StmtKind::Await { guard, .. } => {
                let guard = self.queue_guard(i, &p.locals, guard)?;
                self.event(format!("suspend {}", p.label(id)));
                self.proc_event(id, ProcEventKind::Suspend, &p.method.clone());
                self.objects[i].queue.push(Queued { proc: p, guard, at_await: true });
                return Ok((true, None));
            }
            StmtKind::Duration { value, .. } => {
                let d = eval_num(value, &self.view(i, Some(&p.locals)))?;
                if d > zero() {
                    p.pending = Some(Pending::Duration);
                    p.blocked_until = Some(&self.clock + d);
                    return Ok((true, Some(p)));
                }
            }
        }
        self.complete(id, &mut p);
        Ok((true, self.unwind(i, p)?))
    }

    fn send(&mut self, caller: ObjId, target: ObjId, method: &str, args: Vec<Value>, site: NodeId) -> Value {
        let fid = Fid(self.futures.len() as u32 + 1);
        self.futures.insert(fid, None);
        let obj = &mut self.objects[target.0 as usize];
        let class = obj.name().to_string();
        let shown: Vec<String> = args.iter().map(|a| a.to_string()).collect();
        obj.inbox.push_back(Message { fid, method: method.to_string(), args, site: Some(site) });
        self.log.messages.push(MsgRecord {
            clock: self.clock.clone(),
            caller,
            target,
            class: class.clone(),
            method: method.to_string(),
            fid,
            site: Some(site),
        });
        self.log.futures.push(FutRecord {
            fid,
            method: MethodRef::new(&class, method),
            target,
            site: Some(site),
            called: self.clock.clone(),
            resolved: None,
        });
        self.event(format!("msg {caller} -> {target}.{method}({}) {fid}", shown.join(", ")));
        Value::Fut(fid)
    }

    fn create(&mut self, i: usize, p: &Process<'p>, stmt: &Stmt, class: &str, args: &[Expr]) -> Result<Value, SimError> {
        let view = self.view(i, Some(&p.locals));
        let args = args.iter().map(|a| eval(a, &view)).collect::<Result<Vec<_>, _>>()?;
        if class == "DC" {
            let capacity = args.first().and_then(Value::as_num).cloned().unwrap_or_else(zero);
            let id = DcId(self.dcs.len() as u32);
            self.dcs.push(DeploymentComponent::new(id, capacity.clone(), &self.clock));
            self.event(format!("dc {id} capacity {capacity}"));
            return Ok(Value::Dc(id));
        }
        let decl = self
            .program
            .class(class)
            .ok_or_else(|| SimError::Runtime(format!("unknown class `{class}`")))?;
        let dc = match &stmt.annot.dc {
            Some(e) => match eval(e, &view)? {
                Value::Dc(d) => Some(d),
                other => return Err(SimError::Runtime(format!("`{other}` is not a deployment component"))),
            },
            None => self.objects[i].dc,
        };
        let id = ObjId(self.objects.len() as u32);
        let mut obj = Object {
            id,
            class: Some(decl),
            fields: decl.params.iter().map(|p| p.name.clone()).zip(args).collect(),
            slopes: BTreeMap::new(),
            active: None,
            queue: Vec::new(),
            inbox: VecDeque::new(),
            dc,
        };
        for f in &decl.fields {
            let v = match &f.init {
                Some(e) => eval(e, &View { obj: &obj, locals: None, clock: &self.clock })?,
                None => default_value(&f.ty),
            };
            obj.fields.insert(f.name.clone(), v);
        }
        obj.slopes = sol(decl, &View { obj: &obj, locals: None, clock: &self.clock })?;
        if let Some(init) = &decl.init {
            obj.active = Some(Process {
                fid: None,
                method: MethodRef::init(&decl.name),
                decl: None,
                site: None,
                locals: BTreeMap::new(),
                frames: vec![Frame { stmts: init, pos: 0, owner: None, looping: None }],
                started: None,
                pending: None,
                blocked_until: None,
                paid: false,
            });
        }
        self.objects.push(obj);
        self.log.objects.push(ObjectInfo { id, class: class.to_string(), created: self.clock.clone() });
        let on = dc.map(|d| format!(" on {d}")).unwrap_or_default();
        self.event(format!("new {id}:{class}{on}"));
        Ok(Value::Obj(id))
    }

    /// Re-derives every object's dynamics from its current store.
    fn refresh_dynamics(&mut self) -> Result<(), SimError> {
        for i in 0..self.objects.len() {
            if let Some(c) = self.objects[i].class {
                let s = sol(c, &self.view(i, None))?;
                self.objects[i].slopes = s;
            }
        }
        Ok(())
    }

    /// Maximal time elapse of the configuration. An object whose active
    /// process is blocked contributes only its own blocking time.
    pub fn mte(&self) -> Result<CountExpr, SimError> {
        let mut m = CountExpr::PosInf;
        for (i, o) in self.objects.iter().enumerate() {
            if !o.inbox.is_empty() {
                return Ok(CountExpr::zero());
            }
            if let Some(p) = &o.active {
                let here = match (&p.blocked_until, p.pending) {
                    (Some(u), _) => CountExpr::Finite(u - &self.clock).clamp_nonneg(),
                    (None, Some(Pending::Get)) => CountExpr::PosInf,
                    _ => CountExpr::zero(),
                };
                m = m.meet(&here);
                continue;
            }
            for q in &o.queue {
                let here = match &q.guard {
                    QGuard::True => CountExpr::zero(),
                    QGuard::Until(u) => CountExpr::Finite(u - &self.clock).clamp_nonneg(),
                    QGuard::Fut(f) if self.resolved(*f) => CountExpr::zero(),
                    QGuard::Fut(_) => CountExpr::PosInf,
                    QGuard::Diff(e) => mte_diff(e, &self.view(i, Some(&q.proc.locals)))?,
                };
                m = m.meet(&here);
            }
        }
        Ok(m)
    }

    /// Rule (ii): lets `dt` time units pass.
    pub fn advance(&mut self, dt: &Rational) {
        let end = &self.clock + dt;
        for o in &mut self.objects {
            if o.class.is_none() {
                continue;
            }
            let values: BTreeMap<String, Rational> =
                o.fields.iter().filter_map(|(k, v)| Some((k.clone(), v.as_num()?.clone()))).collect();
            self.log.segments.push(Segment {
                object: o.id,
                start: self.clock.clone(),
                end: end.clone(),
                values,
                slopes: o.slopes.clone(),
            });
            for (x, s) in &o.slopes {
                if let Some(Value::Num(v)) = o.fields.get_mut(x) {
                    *v += s * dt;
                }
            }
        }
        self.clock = end;
    }

    fn get_blocked(&self) -> bool {
        self.objects.iter().any(|o| o.active.as_ref().is_some_and(|p| p.pending == Some(Pending::Get)))
    }

    /// Runs discrete steps to quiescence and advances time, until the
    /// horizon, termination, or a failure.
    pub fn run(mut self, horizon: &Rational) -> Run {
        let outcome = self.drive(horizon);
        match &outcome {
            Outcome::Horizon => self.event("horizon".into()),
            Outcome::Terminated => self.event("terminated".into()),
            Outcome::Failed(e) => self.event(format!("failed: {e}")),
        }
        self.advance(&zero());
        self.log.horizon = horizon.clone();
        self.log.clock = self.clock.clone();
        self.log.outcome = outcome;
        self.log
    }

    fn drive(&mut self, horizon: &Rational) -> Outcome {
        let mut since_advance = 0usize;
        let mut zero_advances = 0usize;
        loop {
            loop {
                match self.step() {
                    Ok(true) => {
                        since_advance += 1;
                        if since_advance > STEP_LIMIT {
                            return Outcome::Failed(SimError::TimeConvergentRun { clock: self.clock.clone() });
                        }
                    }
                    Ok(false) => break,
                    Err(e) => return Outcome::Failed(e),
                }
            }
            if let Err(e) = self.refresh_dynamics() {
                return Outcome::Failed(e);
            }
            if !self.objects.iter().any(Object::is_alive) {
                return Outcome::Terminated;
            }
            let m = match self.mte() {
                Ok(m) => m,
                Err(e) => return Outcome::Failed(e),
            };
            let dt = match m {
                CountExpr::Finite(d) if &self.clock + &d <= *horizon => d,
                CountExpr::PosInf if self.get_blocked() => {
                    return Outcome::Failed(SimError::DeadlockDetected { clock: self.clock.clone() })
                }
                _ => {
                    let rest = horizon - &self.clock;
                    if rest > zero() {
                        self.advance(&rest);
                    }
                    return Outcome::Horizon;
                }
            };
            if dt.is_zero() {
                zero_advances += 1;
                if zero_advances > ZERO_ADVANCE_LIMIT {
                    return Outcome::Failed(SimError::TimeConvergentRun { clock: self.clock.clone() });
                }
            } else {
                zero_advances = 0;
                since_advance = 0;
                self.advance(&dt);
            }
        }
    }
}

/// Simulates `program` up to `horizon`; `seed` randomizes the scheduling order.
pub fn run(program: &Program, horizon: &Rational, seed: Option<u64>) -> Run {
    Simulator::new(program, seed).run(horizon)
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DeploymentComponent {
    pub id: DcId,
    pub capacity: Rational,
    pub remaining: Rational,
    /// Integer time unit of the last refill.
    pub period: Rational,
}

impl DeploymentComponent {
    pub fn new(id: DcId, capacity: Rational, clock: &Rational) -> DeploymentComponent {
        DeploymentComponent { id, remaining: capacity.clone(), capacity, period: clock.floor() }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum ResourceOutcome {
    Consumed,
    BlockedUntil(Rational),
}

/// Consumes `cost` units, refilling first when a new time unit has begun.
pub fn resource_step(dc: &mut DeploymentComponent, cost: &Rational, clock: &Rational) -> Result<ResourceOutcome, SimError> {
    if *cost > dc.capacity {
        return Err(SimError::CostExceedsCapacity { dc: dc.id, cost: cost.clone(), capacity: dc.capacity.clone() });
    }
    if clock.floor() > dc.period {
        dc.period = clock.floor();
        dc.remaining = dc.capacity.clone();
    }
    if dc.remaining >= *cost {
        dc.remaining -= cost;
        Ok(ResourceOutcome::Consumed)
    } else {
        Ok(ResourceOutcome::BlockedUntil(next_integer_after(clock)))
    }
}
