//! Differential dynamic logic: terms, formulas, hybrid programs, post-region
//! formulas and the per-method proof obligations.

mod kyx;
mod trans;

use std::collections::BTreeMap;
use std::fmt;

use thiserror::Error;

use crate::ast::ClassDecl;
use crate::rational::Rational;

pub use kyx::{emit_kyx, read_formula, read_kyx, KyxParseError, UnsupportedSort};
pub use trans::{obligation_init, obligation_main, obligation_method, obligations, trans_stmt, Obligation, Obligations};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum ArithOp {
    Add,
    Sub,
    Mul,
    Div,
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum Term {
    Var(String),
    Num(Rational),
    Neg(Box<Term>),
    Bin(ArithOp, Box<Term>, Box<Term>),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum CmpOp {
    Le,
    Ge,
    Lt,
    Gt,
    Eq,
    Ne,
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum Formula {
    True,
    False,
    Cmp(CmpOp, Term, Term),
    Not(Box<Formula>),
    And(Box<Formula>, Box<Formula>),
    Or(Box<Formula>, Box<Formula>),
    Implies(Box<Formula>, Box<Formula>),
    Exists(String, Box<Formula>),
    Forall(String, Box<Formula>),
    Box(Box<DlProgram>, Box<Formula>),
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum DlProgram {
    Assign(String, Term),
    Havoc(String),
    Test(Formula),
    Choice(Box<DlProgram>, Box<DlProgram>),
    Star(Box<DlProgram>),
    Seq(Vec<DlProgram>),
    /// `{x1' = e1, ..., t' = 1 & domain}`
    Ode(Vec<(String, Term)>, Formula),
}

impl Term {
    pub fn var(x: &str) -> Term {
        Term::Var(x.to_string())
    }

    pub fn num(q: Rational) -> Term {
        Term::Num(q)
    }

    pub fn int(k: i64) -> Term {
        Term::Num(crate::rational::int(k))
    }

    pub fn bin(op: ArithOp, a: Term, b: Term) -> Term {
        Term::Bin(op, Box::new(a), Box::new(b))
    }

    pub fn subst(&self, map: &BTreeMap<String, Term>) -> Term {
        match self {
            Term::Var(x) => map.get(x).cloned().unwrap_or_else(|| self.clone()),
            Term::Num(_) => self.clone(),
            Term::Neg(a) => Term::Neg(Box::new(a.subst(map))),
            Term::Bin(op, a, b) => Term::bin(*op, a.subst(map), b.subst(map)),
        }
    }

    fn vars(&self, out: &mut Vec<String>) {
        match self {
            Term::Var(x) => push_unique(out, x),
            Term::Num(_) => {}
            Term::Neg(a) => a.vars(out),
            Term::Bin(_, a, b) => {
                a.vars(out);
                b.vars(out);
            }
        }
    }
}

fn push_unique(out: &mut Vec<String>, x: &str) {
    if !out.iter().any(|y| y == x) {
        out.push(x.to_string());
    }
}

impl Formula {
    pub fn cmp(op: CmpOp, a: Term, b: Term) -> Formula {
        Formula::Cmp(op, a, b)
    }

    /// Conjunction dropping `true` operands.
    pub fn and(a: Formula, b: Formula) -> Formula {
        match (a, b) {
            (Formula::True, x) | (x, Formula::True) => x,
            (a, b) => Formula::And(Box::new(a), Box::new(b)),
        }
    }

    pub fn and_all(parts: impl IntoIterator<Item = Formula>) -> Formula {
        parts.into_iter().fold(Formula::True, Formula::and)
    }

    pub fn or(a: Formula, b: Formula) -> Formula {
        Formula::Or(Box::new(a), Box::new(b))
    }

    /// Implication dropping a `true` antecedent.
    pub fn implies(a: Formula, b: Formula) -> Formula {
        match a {
            Formula::True => b,
            a => Formula::Implies(Box::new(a), Box::new(b)),
        }
    }

    #[allow(clippy::should_implement_trait)]
    pub fn not(a: Formula) -> Formula {
        match a {
            Formula::True => Formula::False,
            Formula::False => Formula::True,
            a => Formula::Not(Box::new(a)),
        }
    }

    pub fn boxed(p: DlProgram, f: Formula) -> Formula {
        Formula::Box(Box::new(p), Box::new(f))
    }

    pub fn subst(&self, map: &BTreeMap<String, Term>) -> Formula {
        let f = |x: &Formula| Box::new(x.subst(map));
        match self {
            Formula::True | Formula::False => self.clone(),
            Formula::Cmp(op, a, b) => Formula::Cmp(*op, a.subst(map), b.subst(map)),
            Formula::Not(a) => Formula::Not(f(a)),
            Formula::And(a, b) => Formula::And(f(a), f(b)),
            Formula::Or(a, b) => Formula::Or(f(a), f(b)),
            Formula::Implies(a, b) => Formula::Implies(f(a), f(b)),
            Formula::Exists(x, a) | Formula::Forall(x, a) => {
                let mut inner = map.clone();
                inner.remove(x);
                let a = Box::new(a.subst(&inner));
                match self {
                    Formula::Exists(..) => Formula::Exists(x.clone(), a),
                    _ => Formula::Forall(x.clone(), a),
                }
            }
            // Only used on program-free formulas (contracts); modalities are left intact.
            Formula::Box(..) => self.clone(),
        }
    }

    /// Every variable mentioned, in order of first occurrence.
    pub fn vars(&self) -> Vec<String> {
        let mut out = Vec::new();
        self.collect_vars(&mut out);
        out
    }

    fn collect_vars(&self, out: &mut Vec<String>) {
        match self {
            Formula::True | Formula::False => {}
            Formula::Cmp(_, a, b) => {
                a.vars(out);
                b.vars(out);
            }
            Formula::Not(a) => a.collect_vars(out),
            Formula::And(a, b) | Formula::Or(a, b) | Formula::Implies(a, b) => {
                a.collect_vars(out);
                b.collect_vars(out);
            }
            Formula::Exists(x, a) | Formula::Forall(x, a) => {
                push_unique(out, x);
                a.collect_vars(out);
            }
            Formula::Box(p, f) => {
                p.collect_vars(out);
                f.collect_vars(out);
            }
        }
    }

    /// Canonical form for structural comparison: nested conjunctions,
    /// disjunctions and sequences are flattened right-associatively.
    pub fn canonical(&self) -> Formula {
        match self {
            Formula::And(..) => rebuild(flatten(self, true), true),
            Formula::Or(..) => rebuild(flatten(self, false), false),
            Formula::True | Formula::False => self.clone(),
            Formula::Cmp(op, a, b) => Formula::Cmp(*op, a.canonical(), b.canonical()),
            Formula::Not(a) => Formula::Not(Box::new(a.canonical())),
            Formula::Implies(a, b) => Formula::Implies(Box::new(a.canonical()), Box::new(b.canonical())),
            Formula::Exists(x, a) => Formula::Exists(x.clone(), Box::new(a.canonical())),
            Formula::Forall(x, a) => Formula::Forall(x.clone(), Box::new(a.canonical())),
            Formula::Box(p, f) => Formula::Box(Box::new(p.canonical()), Box::new(f.canonical())),
        }
    }
}

fn flatten(f: &Formula, conj: bool) -> Vec<Formula> {
    match (f, conj) {
        (Formula::And(a, b), true) | (Formula::Or(a, b), false) => {
            let mut v = flatten(a, conj);
            v.extend(flatten(b, conj));
            v
        }
        _ => vec![f.canonical()],
    }
}

fn rebuild(mut parts: Vec<Formula>, conj: bool) -> Formula {
    let mut acc = parts.pop().unwrap();
    while let Some(p) = parts.pop() {
        acc = if conj { Formula::And(Box::new(p), Box::new(acc)) } else { Formula::Or(Box::new(p), Box::new(acc)) };
    }
    acc
}

impl Term {
    /// Folds `p / q` of two literals and `-literal` into a single literal.
    pub fn canonical(&self) -> Term {
        match self {
            Term::Var(_) | Term::Num(_) => self.clone(),
            Term::Neg(a) => match a.canonical() {
                Term::Num(q) => Term::Num(-q),
                a => Term::Neg(Box::new(a)),
            },
            Term::Bin(op, a, b) => match (op, a.canonical(), b.canonical()) {
                (ArithOp::Div, Term::Num(p), Term::Num(q)) if p.is_integer() && q.is_integer() && q != crate::rational::zero() => {
                    Term::Num(p / q)
                }
                (op, a, b) => Term::bin(*op, a, b),
            },
        }
    }
}

impl DlProgram {
    pub fn seq(parts: Vec<DlProgram>) -> DlProgram {
        DlProgram::Seq(parts)
    }

    pub fn choice(a: DlProgram, b: DlProgram) -> DlProgram {
        DlProgram::Choice(Box::new(a), Box::new(b))
    }

    pub fn test(f: Formula) -> DlProgram {
        DlProgram::Test(f)
    }

    /// `cll := 1`: records a contract violation.
    pub fn fail() -> DlProgram {
        DlProgram::Assign(CLL.to_string(), Term::int(1))
    }

    fn collect_vars(&self, out: &mut Vec<String>) {
        match self {
            DlProgram::Assign(x, t) => {
                push_unique(out, x);
                t.vars(out);
            }
            DlProgram::Havoc(x) => push_unique(out, x),
            DlProgram::Test(f) => f.collect_vars(out),
            DlProgram::Choice(a, b) => {
                a.collect_vars(out);
                b.collect_vars(out);
            }
            DlProgram::Star(a) => a.collect_vars(out),
            DlProgram::Seq(v) => v.iter().for_each(|p| p.collect_vars(out)),
            DlProgram::Ode(eqs, dom) => {
                for (x, t) in eqs {
                    push_unique(out, x);
                    t.vars(out);
                }
                dom.collect_vars(out);
            }
        }
    }

    /// Whether the program may assign `x`.
    pub fn assigns(&self, x: &str) -> bool {
        match self {
            DlProgram::Assign(y, _) | DlProgram::Havoc(y) => x == y,
            DlProgram::Test(_) => false,
            DlProgram::Choice(a, b) => a.assigns(x) || b.assigns(x),
            DlProgram::Star(a) => a.assigns(x),
            DlProgram::Seq(v) => v.iter().any(|p| p.assigns(x)),
            DlProgram::Ode(eqs, _) => eqs.iter().any(|(y, _)| y == x),
        }
    }

    /// Number of `cll := 1` occurrences.
    pub fn fail_count(&self) -> usize {
        match self {
            DlProgram::Assign(x, Term::Num(q)) if x == CLL && *q == crate::rational::one() => 1,
            DlProgram::Assign(..) | DlProgram::Havoc(_) | DlProgram::Test(_) | DlProgram::Ode(..) => 0,
            DlProgram::Choice(a, b) => a.fail_count() + b.fail_count(),
            DlProgram::Star(a) => a.fail_count(),
            DlProgram::Seq(v) => v.iter().map(|p| p.fail_count()).sum(),
        }
    }

    pub fn canonical(&self) -> DlProgram {
        match self {
            DlProgram::Seq(v) => {
                let mut out = Vec::new();
                for p in v {
                    match p.canonical() {
                        DlProgram::Seq(inner) => out.extend(inner),
                        q => out.push(q),
                    }
                }
                if out.len() == 1 {
                    out.pop().unwrap()
                } else {
                    DlProgram::Seq(out)
                }
            }
            DlProgram::Assign(x, t) => DlProgram::Assign(x.clone(), t.canonical()),
            DlProgram::Havoc(_) => self.clone(),
            DlProgram::Test(f) => DlProgram::Test(f.canonical()),
            DlProgram::Choice(a, b) => DlProgram::choice(a.canonical(), b.canonical()),
            DlProgram::Star(a) => DlProgram::Star(Box::new(a.canonical())),
            DlProgram::Ode(eqs, dom) => {
                DlProgram::Ode(eqs.iter().map(|(x, t)| (x.clone(), t.canonical())).collect(), dom.canonical())
            }
        }
    }
}

pub const T: &str = "t";
pub const CLL: &str = "cll";
pub const RESULT: &str = "result";
pub const NOW: &str = "now";

#[derive(Clone, Debug, PartialEq, Eq, Error)]
#[error("weak negation is undefined for {0}")]
pub struct UnsupportedConnective(pub &'static str);

/// Negation that flips weak inequalities weakly: `~(a >= b)` is `a <= b`.
pub fn weak_neg(f: &Formula) -> Result<Formula, UnsupportedConnective> {
    Ok(match f {
        Formula::True => Formula::False,
        Formula::False => Formula::True,
        Formula::Cmp(op, a, b) => {
            let op = match op {
                CmpOp::Ge => CmpOp::Le,
                CmpOp::Le => CmpOp::Ge,
                CmpOp::Gt => CmpOp::Le,
                CmpOp::Lt => CmpOp::Ge,
                CmpOp::Eq => CmpOp::Ne,
                CmpOp::Ne => CmpOp::Eq,
            };
            Formula::Cmp(op, a.clone(), b.clone())
        }
        Formula::Not(a) => (**a).clone(),
        Formula::And(a, b) => Formula::or(weak_neg(a)?, weak_neg(b)?),
        Formula::Or(a, b) => Formula::And(Box::new(weak_neg(a)?), Box::new(weak_neg(b)?)),
        Formula::Implies(a, b) => Formula::And(a.clone(), Box::new(weak_neg(b)?)),
        Formula::Exists(..) | Formula::Forall(..) => return Err(UnsupportedConnective("quantifiers")),
        Formula::Box(..) => return Err(UnsupportedConnective("modalities")),
    })
}

/// The dynamics of a class as ODE equations, without the clock.
pub fn class_ode(class: Option<&ClassDecl>) -> Vec<(String, Term)> {
    let mut out = Vec::new();
    for o in class.and_then(|c| c.physical.as_ref()).into_iter().flatten() {
        if let Some(t) = trans::plain_term(&o.rhs) {
            out.push((o.field.clone(), t));
        }
    }
    out
}

/// `I ∧ [t := 0; {ode, t' = 1 & φ}] I`, which is just `true` when `I` is.
pub fn pr(phi: &Formula, inv: &Formula, ode: &[(String, Term)]) -> Formula {
    if *inv == Formula::True {
        return Formula::True;
    }
    let mut eqs = ode.to_vec();
    eqs.push((T.to_string(), Term::int(1)));
    let evolve = DlProgram::seq(vec![DlProgram::Assign(T.to_string(), Term::int(0)), DlProgram::Ode(eqs, phi.clone())]);
    Formula::and(inv.clone(), Formula::boxed(evolve, inv.clone()))
}

/// Assigns arbitrary values to every real-sorted field.
pub fn havoc(class: Option<&ClassDecl>) -> DlProgram {
    havoc_where(class, |_| true)
}

/// Assigns arbitrary values to every physical field.
pub fn havoc_ph(class: Option<&ClassDecl>) -> DlProgram {
    havoc_where(class, |f| f.physical)
}

fn havoc_where(class: Option<&ClassDecl>, keep: impl Fn(&crate::ast::FieldDecl) -> bool) -> DlProgram {
    let parts: Vec<DlProgram> = class
        .into_iter()
        .flat_map(|c| c.fields.iter())
        .filter(|f| keep(f) && trans::is_real_sorted(&f.ty))
        .map(|f| DlProgram::Havoc(f.name.clone()))
        .collect();
    if parts.is_empty() {
        DlProgram::test(Formula::True)
    } else {
        DlProgram::seq(parts)
    }
}

/// Post-region of a class: `t <= l` for the smallest required call frequency
/// `l` among its methods, or `true` when no method has one.
pub fn post_region_for(class: &ClassDecl) -> Formula {
    class
        .methods
        .iter()
        .filter_map(|m| m.contract.timed_requires.as_ref())
        .min()
        .map(|l| Formula::cmp(CmpOp::Le, Term::var(T), Term::num(l.clone())))
        .unwrap_or(Formula::True)
}

impl fmt::Display for Formula {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&kyx::formula_to_string(self))
    }
}

impl fmt::Display for DlProgram {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&kyx::program_to_string(self))
    }
}
