//! Runtime values, expression evaluation, affine trajectories and the
//! maximal time elapse of guards.

use std::collections::BTreeMap;
use std::fmt;

use num_traits::{Signed, Zero};
use serde::Serialize;

use super::SimError;
use crate::ast::*;
use crate::counting::CountExpr;
use crate::rational::{one, zero, Rational};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub struct ObjId(pub u32);

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub struct Fid(pub u32);

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub struct DcId(pub u32);

impl fmt::Display for ObjId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "o{}", self.0)
    }
}

impl fmt::Display for Fid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "fut{}", self.0)
    }
}

impl fmt::Display for DcId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "dc{}", self.0)
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Value {
    Unit,
    Num(Rational),
    Bool(bool),
    Null,
    Obj(ObjId),
    Fut(Fid),
    Dc(DcId),
}

impl Value {
    pub fn as_num(&self) -> Option<&Rational> {
        match self {
            Value::Num(q) => Some(q),
            _ => None,
        }
    }
}

impl fmt::Display for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Value::Unit => f.write_str("unit"),
            Value::Num(q) => write!(f, "{q}"),
            Value::Bool(b) => write!(f, "{b}"),
            Value::Null => f.write_str("null"),
            Value::Obj(o) => write!(f, "{o}"),
            Value::Fut(x) => write!(f, "{x}"),
            Value::Dc(d) => write!(f, "{d}"),
        }
    }
}

/// The combined store σ of a process together with the current dynamics.
pub trait Valuation {
    fn lookup(&self, x: &str) -> Option<Value>;
    /// Slope of a physical field under the current dynamics; zero otherwise.
    fn slope(&self, x: &str) -> Rational;
    fn this(&self) -> Value;
    fn clock(&self) -> Rational;
}

/// A plain map-backed valuation.
#[derive(Clone, Debug, Default)]
pub struct MapValuation {
    pub values: BTreeMap<String, Value>,
    pub slopes: BTreeMap<String, Rational>,
    pub clock: Rational,
}

impl Valuation for MapValuation {
    fn lookup(&self, x: &str) -> Option<Value> {
        self.values.get(x).cloned()
    }

    fn slope(&self, x: &str) -> Rational {
        self.slopes.get(x).cloned().unwrap_or_else(zero)
    }

    fn this(&self) -> Value {
        Value::Null
    }

    fn clock(&self) -> Rational {
        self.clock.clone()
    }
}

fn runtime(msg: String) -> SimError {
    SimError::Runtime(msg)
}

pub fn eval(e: &Expr, st: &dyn Valuation) -> Result<Value, SimError> {
    Ok(match &e.kind {
        ExprKind::Num(q) => Value::Num(q.clone()),
        ExprKind::Bool(b) => Value::Bool(*b),
        ExprKind::Null => Value::Null,
        ExprKind::This => st.this(),
        ExprKind::Now => Value::Num(st.clock()),
        ExprKind::Var(x) => st.lookup(x).ok_or_else(|| runtime(format!("unbound variable `{x}`")))?,
        ExprKind::Unary(op, a) => match (op, eval(a, st)?) {
            (UnOp::Not, Value::Bool(b)) => Value::Bool(!b),
            (UnOp::Neg, Value::Num(q)) => Value::Num(-q),
            (_, v) => return Err(runtime(format!("bad operand `{v}` for unary operator"))),
        },
        ExprKind::Binary(BinOp::And, a, b) => match eval(a, st)? {
            Value::Bool(false) => Value::Bool(false),
            Value::Bool(true) => eval(b, st)?,
            v => return Err(runtime(format!("`{v}` is not a boolean"))),
        },
        ExprKind::Binary(BinOp::Or, a, b) => match eval(a, st)? {
            Value::Bool(true) => Value::Bool(true),
            Value::Bool(false) => eval(b, st)?,
            v => return Err(runtime(format!("`{v}` is not a boolean"))),
        },
        ExprKind::Binary(op, a, b) => {
            let (x, y) = (eval(a, st)?, eval(b, st)?);
            match op {
                BinOp::Eq => Value::Bool(x == y),
                BinOp::Ne => Value::Bool(x != y),
                _ => {
                    let (Value::Num(x), Value::Num(y)) = (&x, &y) else {
                        return Err(runtime(format!("`{x} {} {y}` needs numbers", op.symbol())));
                    };
                    match op {
                        BinOp::Add => Value::Num(x + y),
                        BinOp::Sub => Value::Num(x - y),
                        BinOp::Mul => Value::Num(x * y),
                        BinOp::Div if y.is_zero() => return Err(runtime("division by zero".into())),
                        BinOp::Div => Value::Num(x / y),
                        BinOp::Le => Value::Bool(x <= y),
                        BinOp::Ge => Value::Bool(x >= y),
                        BinOp::Lt => Value::Bool(x < y),
                        BinOp::Gt => Value::Bool(x > y),
                        _ => unreachable!(),
                    }
                }
            }
        }
    })
}

pub fn eval_bool(e: &Expr, st: &dyn Valuation) -> Result<bool, SimError> {
    match eval(e, st)? {
        Value::Bool(b) => Ok(b),
        v => Err(runtime(format!("`{v}` is not a boolean"))),
    }
}

pub fn eval_num(e: &Expr, st: &dyn Valuation) -> Result<Rational, SimError> {
    match eval(e, st)? {
        Value::Num(q) => Ok(q),
        v => Err(runtime(format!("`{v}` is not a number"))),
    }
}

/// `c0 + c1·t` for `t` time units from now.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Affine {
    pub c0: Rational,
    pub c1: Rational,
}

impl Affine {
    pub fn constant(c0: Rational) -> Affine {
        Affine { c0, c1: zero() }
    }

    pub fn at(&self, t: &Rational) -> Rational {
        &self.c0 + &self.c1 * t
    }

    fn sub(&self, o: &Affine) -> Affine {
        Affine { c0: &self.c0 - &o.c0, c1: &self.c1 - &o.c1 }
    }
}

pub fn affine(e: &Expr, st: &dyn Valuation) -> Result<Affine, SimError> {
    let non_affine = || SimError::NonAffineDynamics(crate::pretty::expr_to_string(e));
    Ok(match &e.kind {
        ExprKind::Num(q) => Affine::constant(q.clone()),
        ExprKind::Now => Affine { c0: st.clock(), c1: one() },
        ExprKind::Var(x) => match st.lookup(x) {
            Some(Value::Num(q)) => Affine { c0: q, c1: st.slope(x) },
            Some(v) => return Err(runtime(format!("`{x}` = `{v}` is not a number"))),
            None => return Err(runtime(format!("unbound variable `{x}`"))),
        },
        ExprKind::Unary(UnOp::Neg, a) => {
            let a = affine(a, st)?;
            Affine { c0: -a.c0, c1: -a.c1 }
        }
        ExprKind::Binary(op, a, b) => {
            let (a, b) = (affine(a, st)?, affine(b, st)?);
            match op {
                BinOp::Add => Affine { c0: a.c0 + b.c0, c1: a.c1 + b.c1 },
                BinOp::Sub => a.sub(&b),
                BinOp::Mul if a.c1.is_zero() => Affine { c0: &a.c0 * &b.c0, c1: &a.c0 * &b.c1 },
                BinOp::Mul if b.c1.is_zero() => Affine { c0: &a.c0 * &b.c0, c1: &a.c1 * &b.c0 },
                BinOp::Div if b.c1.is_zero() && !b.c0.is_zero() => Affine { c0: &a.c0 / &b.c0, c1: &a.c1 / &b.c0 },
                BinOp::Div if b.c1.is_zero() => return Err(runtime("division by zero".into())),
                _ => return Err(non_affine()),
            }
        }
        _ => return Err(non_affine()),
    })
}

/// An interval of non-negative times; `hi = None` is unbounded.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Interval {
    pub lo: Rational,
    pub lo_closed: bool,
    pub hi: Option<Rational>,
    pub hi_closed: bool,
}

impl Interval {
    fn is_empty(&self) -> bool {
        match &self.hi {
            None => false,
            Some(h) => self.lo > *h || (self.lo == *h && !(self.lo_closed && self.hi_closed)),
        }
    }

    fn intersect(&self, o: &Interval) -> Interval {
        let (lo, lo_closed) = match self.lo.cmp(&o.lo) {
            std::cmp::Ordering::Greater => (self.lo.clone(), self.lo_closed),
            std::cmp::Ordering::Less => (o.lo.clone(), o.lo_closed),
            std::cmp::Ordering::Equal => (self.lo.clone(), self.lo_closed && o.lo_closed),
        };
        let (hi, hi_closed) = match (&self.hi, &o.hi) {
            (None, None) => (None, false),
            (Some(h), None) => (Some(h.clone()), self.hi_closed),
            (None, Some(h)) => (Some(h.clone()), o.hi_closed),
            (Some(a), Some(b)) => match a.cmp(b) {
                std::cmp::Ordering::Less => (Some(a.clone()), self.hi_closed),
                std::cmp::Ordering::Greater => (Some(b.clone()), o.hi_closed),
                std::cmp::Ordering::Equal => (Some(a.clone()), self.hi_closed && o.hi_closed),
            },
        };
        Interval { lo, lo_closed, hi, hi_closed }
    }
}

/// A subset of `[0, ∞)` as sorted, disjoint intervals.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TimeSet(pub Vec<Interval>);

impl TimeSet {
    pub fn empty() -> TimeSet {
        TimeSet(vec![])
    }

    pub fn all() -> TimeSet {
        TimeSet::from_interval(zero(), true, None, false)
    }

    pub fn from_interval(lo: Rational, lo_closed: bool, hi: Option<Rational>, hi_closed: bool) -> TimeSet {
        let (lo, lo_closed) = if lo < zero() { (zero(), true) } else { (lo, lo_closed) };
        let i = Interval { lo, lo_closed, hi, hi_closed };
        if i.is_empty() {
            TimeSet::empty()
        } else {
            TimeSet(vec![i])
        }
    }

    /// `[0, d]`
    pub fn upto(d: Rational) -> TimeSet {
        TimeSet::from_interval(zero(), true, Some(d), true)
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn intersect(&self, o: &TimeSet) -> TimeSet {
        let mut out = Vec::new();
        for a in &self.0 {
            for b in &o.0 {
                let i = a.intersect(b);
                if !i.is_empty() {
                    out.push(i);
                }
            }
        }
        TimeSet(out).normalized()
    }

    pub fn union(&self, o: &TimeSet) -> TimeSet {
        TimeSet(self.0.iter().chain(&o.0).cloned().collect()).normalized()
    }

    pub fn complement(&self) -> TimeSet {
        let mut out = Vec::new();
        let (mut p, mut p_closed) = (zero(), true);
        for i in &self.0 {
            let gap = Interval { lo: p.clone(), lo_closed: p_closed, hi: Some(i.lo.clone()), hi_closed: !i.lo_closed };
            if !gap.is_empty() {
                out.push(gap);
            }
            match &i.hi {
                None => return TimeSet(out),
                Some(h) => {
                    p = h.clone();
                    p_closed = !i.hi_closed;
                }
            }
        }
        out.push(Interval { lo: p, lo_closed: p_closed, hi: None, hi_closed: false });
        TimeSet(out)
    }

    /// Infimum, and whether it belongs to the set.
    pub fn inf(&self) -> Option<(Rational, bool)> {
        self.0.first().map(|i| (i.lo.clone(), i.lo_closed))
    }

    pub fn contains(&self, t: &Rational) -> bool {
        self.0.iter().any(|i| {
            let above = i.lo < *t || (i.lo == *t && i.lo_closed);
            let below = match &i.hi {
                None => true,
                Some(h) => t < h || (t == h && i.hi_closed),
            };
            above && below
        })
    }

    fn normalized(mut self) -> TimeSet {
        self.0.sort_by(|a, b| a.lo.cmp(&b.lo).then(b.lo_closed.cmp(&a.lo_closed)));
        let mut out: Vec<Interval> = Vec::new();
        for i in self.0 {
            if let Some(cur) = out.last_mut() {
                let touches = match &cur.hi {
                    None => true,
                    Some(h) => i.lo < *h || (i.lo == *h && (cur.hi_closed || i.lo_closed)),
                };
                if touches {
                    match (&cur.hi, &i.hi) {
                        (None, _) => {}
                        (_, None) => {
                            cur.hi = None;
                            cur.hi_closed = false;
                        }
                        (Some(a), Some(b)) => {
                            if b > a {
                                cur.hi = Some(b.clone());
                                cur.hi_closed = i.hi_closed;
                            } else if a == b {
                                cur.hi_closed |= i.hi_closed;
                            }
                        }
                    }
                    continue;
                }
            }
            out.push(i);
        }
        TimeSet(out)
    }
}

/// Times `t ≥ 0` at which `a(t) op b(t)` holds.
pub fn sat_cmp(op: BinOp, a: &Affine, b: &Affine) -> TimeSet {
    match op {
        BinOp::Ge => return sat_cmp(BinOp::Le, b, a),
        BinOp::Gt => return sat_cmp(BinOp::Lt, b, a),
        BinOp::Ne => return sat_cmp(BinOp::Eq, a, b).complement(),
        _ => {}
    }
    let d = a.sub(b);
    let strict = op == BinOp::Lt;
    if d.c1.is_zero() {
        let holds = match op {
            BinOp::Le => d.c0 <= zero(),
            BinOp::Lt => d.c0 < zero(),
            _ => d.c0.is_zero(),
        };
        return if holds { TimeSet::all() } else { TimeSet::empty() };
    }
    let r = -&d.c0 / &d.c1;
    match op {
        BinOp::Eq if r < zero() => TimeSet::empty(),
        BinOp::Eq => TimeSet::from_interval(r.clone(), true, Some(r), true),
        _ if d.c1.is_positive() => {
            if r < zero() {
                TimeSet::empty()
            } else {
                TimeSet::from_interval(zero(), true, Some(r), !strict)
            }
        }
        _ => TimeSet::from_interval(r, !strict, None, false),
    }
}

/// Times `t ≥ 0` at which the boolean expression holds under affine evolution.
pub fn sat(e: &Expr, st: &dyn Valuation) -> Result<TimeSet, SimError> {
    let constant = |b: bool| if b { TimeSet::all() } else { TimeSet::empty() };
    Ok(match &e.kind {
        ExprKind::Unary(UnOp::Not, a) => sat(a, st)?.complement(),
        ExprKind::Binary(BinOp::And, a, b) => sat(a, st)?.intersect(&sat(b, st)?),
        ExprKind::Binary(BinOp::Or, a, b) => sat(a, st)?.union(&sat(b, st)?),
        ExprKind::Binary(op, a, b) if op.is_comparison() => {
            let numeric = |x: &Expr| !matches!(eval(x, st), Ok(ref v) if v.as_num().is_none());
            if numeric(a) && numeric(b) {
                sat_cmp(*op, &affine(a, st)?, &affine(b, st)?)
            } else {
                constant(eval_bool(e, st)?)
            }
        }
        _ => constant(eval_bool(e, st)?),
    })
}

/// Earliest time from now at which a differential guard holds.
pub fn mte_diff(e: &Expr, st: &dyn Valuation) -> Result<CountExpr, SimError> {
    Ok(match sat(e, st)?.inf() {
        Some((t, _)) => CountExpr::Finite(t),
        None => CountExpr::PosInf,
    })
}

/// Maximal time elapse of a guard: `duration(e)` gives ⟦e⟧ (clamped at 0),
/// `e?` gives 0 when resolved and ∞ otherwise, `diff e` the earliest root.
pub fn mte_guard(g: &Guard, st: &dyn Valuation, resolved: &dyn Fn(Fid) -> bool) -> Result<CountExpr, SimError> {
    match g {
        Guard::Duration(e, _) => Ok(CountExpr::Finite(eval_num(e, st)?).clamp_nonneg()),
        Guard::Poll(e) => match eval(e, st)? {
            Value::Fut(f) if resolved(f) => Ok(CountExpr::zero()),
            Value::Fut(_) => Ok(CountExpr::PosInf),
            v => Err(runtime(format!("`{v}` is not a future"))),
        },
        Guard::Diff(e) => mte_diff(e, st),
    }
}

/// Slopes of the physical fields under the class dynamics: `sol(ODE, ρ)`.
pub fn sol(class: &ClassDecl, st: &dyn Valuation) -> Result<BTreeMap<String, Rational>, SimError> {
    let mut out = BTreeMap::new();
    for o in class.physical.iter().flatten() {
        let moving = o.rhs.vars().iter().any(|x| class.field(x).is_some_and(|f| f.physical));
        let mut timed = false;
        o.rhs.walk(&mut |x| timed |= matches!(x.kind, ExprKind::Now));
        if moving || timed {
            return Err(SimError::NonAffineDynamics(format!("{}' = {}", o.field, crate::pretty::expr_to_string(&o.rhs))));
        }
        out.insert(o.field.clone(), eval_num(&o.rhs, st)?);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::parser::parse_program;
    use crate::rational::{frac, int};

    fn guard_expr(src: &str) -> Expr {
        let p = parse_program(&format!("{{ await diff {src}; }}")).unwrap();
        match &p.main[0].kind {
            StmtKind::Await { guard: Guard::Diff(e), .. } => e.clone(),
            _ => unreachable!(),
        }
    }

    fn tank(level: i64, drain: i64) -> MapValuation {
        MapValuation {
            values: [("level".to_string(), Value::Num(int(level))), ("drain".to_string(), Value::Num(int(drain)))].into(),
            slopes: [("level".to_string(), int(drain))].into(),
            clock: zero(),
        }
    }

    #[test]
    fn affine_root_of_a_tank_guard() {
        let st = tank(5, -1);
        assert_eq!(mte_diff(&guard_expr("level <= 3 & drain <= 0"), &st).unwrap(), CountExpr::int(2));
        assert_eq!(mte_diff(&guard_expr("level >= 10 & drain >= 0"), &st).unwrap(), CountExpr::PosInf);
        assert_eq!(mte_diff(&guard_expr("level >= 4 | drain >= 0"), &st).unwrap(), CountExpr::zero());
        assert_eq!(mte_diff(&guard_expr("!(level >= 7/2)"), &st).unwrap(), CountExpr::finite(frac(3, 2)));
        assert_eq!(mte_diff(&guard_expr("2 * level == 5"), &st).unwrap(), CountExpr::finite(frac(5, 2)));
    }

    #[test]
    fn guard_kinds() {
        let st = tank(5, -1);
        let p = parse_program("{ await duration(3); await f?; }").unwrap();
        let g = |i: usize| match &p.main[i].kind {
            StmtKind::Await { guard, .. } => guard.clone(),
            _ => unreachable!(),
        };
        assert_eq!(mte_guard(&g(0), &st, &|_| false).unwrap(), CountExpr::int(3));
        let mut st = st;
        st.values.insert("f".into(), Value::Fut(Fid(1)));
        assert_eq!(mte_guard(&g(1), &st, &|_| true).unwrap(), CountExpr::zero());
        assert_eq!(mte_guard(&g(1), &st, &|_| false).unwrap(), CountExpr::PosInf);
    }

    #[test]
    fn non_affine_guards_are_rejected() {
        let st = tank(5, -1);
        assert!(matches!(mte_diff(&guard_expr("level * level >= 1"), &st), Err(SimError::NonAffineDynamics(_))));
    }

    #[test]
    fn set_algebra() {
        let a = TimeSet::from_interval(int(1), true, Some(int(3)), false);
        let b = TimeSet::from_interval(int(3), true, Some(int(4)), true);
        let u = a.union(&b);
        assert_eq!(u, TimeSet::from_interval(int(1), true, Some(int(4)), true));
        let c = u.complement();
        assert!(c.contains(&zero()) && !c.contains(&int(1)) && !c.contains(&int(4)) && c.contains(&frac(9, 2)));
        assert_eq!(c.complement(), u);
        assert!(a.intersect(&b).is_empty());
    }

    #[test]
    fn sol_is_affine() {
        let p = parse_program(
            "class D { physical Real l1 = 1; physical Real l2 = 2; Real d1 = 1/2; Real d2 = -1;
             physical { l1' = d1; l2' = d2 * 2; } }
             class B { physical Real x = 1; physical { x' = x; } } { }",
        )
        .unwrap();
        let st = MapValuation {
            values: [("d1".to_string(), Value::Num(frac(1, 2))), ("d2".to_string(), Value::Num(int(-1)))].into(),
            ..Default::default()
        };
        let s = sol(p.class("D").unwrap(), &st).unwrap();
        assert_eq!(s["l1"], frac(1, 2));
        assert_eq!(s["l2"], int(-2));
        assert!(matches!(sol(p.class("B").unwrap(), &st), Err(SimError::NonAffineDynamics(_))));
    }
}
