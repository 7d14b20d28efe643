//! KeYmaera X archive syntax: emission and a reader for the emitted subset.

use std::fmt::Write;

use thiserror::Error;

use super::*;
use crate::rational::{int, zero};

#[derive(Clone, Debug, PartialEq, Eq, Error)]
#[error("`{name}` in `{entry}` is not real-sorted")]
pub struct UnsupportedSort {
    pub entry: String,
    pub name: String,
}

/// Renders an archive entry. Variables are declared in `declared` order,
/// followed by any other free variable, then `t`, `cll`, `result` and, when
/// mentioned, `now`.
pub fn emit_kyx(name: &str, formula: &Formula, declared: &[String], non_real: &[String]) -> Result<String, UnsupportedSort> {
    let used = formula.vars();
    if let Some(bad) = used.iter().find(|x| non_real.contains(x)) {
        return Err(UnsupportedSort { entry: name.to_string(), name: bad.clone() });
    }
    let special = [T, CLL, RESULT, NOW];
    let mut vars: Vec<&str> = declared.iter().map(String::as_str).filter(|x| !special.contains(x)).collect();
    for x in &used {
        if !special.contains(&x.as_str()) && !vars.contains(&x.as_str()) {
            vars.push(x);
        }
    }
    vars.extend([T, CLL, RESULT]);
    if used.iter().any(|x| x == NOW) {
        vars.push(NOW);
    }
    let mut out = String::new();
    writeln!(out, "ArchiveEntry \"{name}\"\n").unwrap();
    out.push_str("ProgramVariables\n");
    for x in vars {
        writeln!(out, "  Real {x};").unwrap();
    }
    out.push_str("End.\n\nProblem\n");
    writeln!(out, "  {}", formula_to_string(formula)).unwrap();
    out.push_str("End.\n\nEnd.\n");
    Ok(out)
}

fn fprec(f: &Formula) -> u8 {
    match f {
        Formula::Implies(..) => 1,
        Formula::Or(..) => 2,
        Formula::And(..) => 3,
        Formula::Not(_) | Formula::Box(..) | Formula::Exists(..) | Formula::Forall(..) => 4,
        _ => 5,
    }
}

fn tprec(t: &Term) -> u8 {
    match t {
        Term::Bin(ArithOp::Add | ArithOp::Sub, ..) => 1,
        Term::Bin(..) => 2,
        Term::Neg(_) => 3,
        _ => 4,
    }
}

pub(crate) fn term_to_string(t: &Term) -> String {
    let mut s = String::new();
    write_term(&mut s, t);
    s
}

fn write_term(s: &mut String, t: &Term) {
    match t {
        Term::Var(x) => s.push_str(x),
        Term::Num(q) if *q < zero() || !q.is_integer() => write!(s, "({q})").unwrap(),
        Term::Num(q) => write!(s, "{q}").unwrap(),
        Term::Neg(a) => {
            s.push('-');
            wrap_term(s, a, tprec(a) < 4);
        }
        Term::Bin(op, a, b) => {
            let p = tprec(t);
            wrap_term(s, a, tprec(a) < p);
            s.push_str(match op {
                ArithOp::Add => " + ",
                ArithOp::Sub => " - ",
                ArithOp::Mul => "*",
                ArithOp::Div => "/",
            });
            wrap_term(s, b, tprec(b) <= p);
        }
    }
}

fn wrap_term(s: &mut String, t: &Term, wrap: bool) {
    if wrap {
        s.push('(');
        write_term(s, t);
        s.push(')');
    } else {
        write_term(s, t);
    }
}

pub(crate) fn formula_to_string(f: &Formula) -> String {
    let mut s = String::new();
    write_formula(&mut s, f);
    s
}

fn write_formula(s: &mut String, f: &Formula) {
    match f {
        Formula::True => s.push_str("true"),
        Formula::False => s.push_str("false"),
        Formula::Cmp(op, a, b) => {
            write_term(s, a);
            s.push_str(match op {
                CmpOp::Le => " <= ",
                CmpOp::Ge => " >= ",
                CmpOp::Lt => " < ",
                CmpOp::Gt => " > ",
                CmpOp::Eq => " = ",
                CmpOp::Ne => " != ",
            });
            write_term(s, b);
        }
        Formula::Not(a) => {
            s.push('!');
            wrap_formula(s, a, !matches!(**a, Formula::True | Formula::False));
        }
        Formula::And(a, b) | Formula::Or(a, b) => {
            let p = fprec(f);
            wrap_formula(s, a, fprec(a) < p);
            s.push_str(if p == 3 { " & " } else { " | " });
            wrap_formula(s, b, fprec(b) <= p);
        }
        Formula::Implies(a, b) => {
            wrap_formula(s, a, fprec(a) <= 1);
            s.push_str(" -> ");
            wrap_formula(s, b, fprec(b) < 1);
        }
        Formula::Exists(x, a) | Formula::Forall(x, a) => {
            let q = if matches!(f, Formula::Exists(..)) { "\\exists" } else { "\\forall" };
            write!(s, "{q} {x} ").unwrap();
            wrap_formula(s, a, true);
        }
        Formula::Box(p, a) => {
            s.push('[');
            write_program(s, p);
            s.push(']');
            wrap_formula(s, a, fprec(a) < 4);
        }
    }
}

fn wrap_formula(s: &mut String, f: &Formula, wrap: bool) {
    if wrap {
        s.push('(');
        write_formula(s, f);
        s.push(')');
    } else {
        write_formula(s, f);
    }
}

pub(crate) fn program_to_string(p: &DlProgram) -> String {
    let mut s = String::new();
    write_program(&mut s, p);
    s
}

fn write_program(s: &mut String, p: &DlProgram) {
    match p {
        DlProgram::Assign(x, t) => write!(s, "{x} := {};", term_to_string(t)).unwrap(),
        DlProgram::Havoc(x) => write!(s, "{x} := *;").unwrap(),
        DlProgram::Test(f) => {
            s.push('?');
            wrap_formula(s, f, fprec(f) < 5);
            s.push(';');
        }
        DlProgram::Choice(a, b) => {
            s.push('{');
            write_program(s, a);
            s.push_str(" ++ ");
            write_program(s, b);
            s.push('}');
        }
        DlProgram::Star(a) => {
            s.push('{');
            write_program(s, a);
            s.push_str("}*");
        }
        DlProgram::Seq(v) if v.is_empty() => s.push_str("?true;"),
        DlProgram::Seq(v) => {
            for (i, q) in v.iter().enumerate() {
                if i > 0 {
                    s.push(' ');
                }
                write_program(s, q);
            }
        }
        DlProgram::Ode(eqs, dom) => {
            s.push('{');
            let eqs: Vec<String> = eqs.iter().map(|(x, t)| format!("{x}' = {}", term_to_string(t))).collect();
            s.push_str(&eqs.join(", "));
            if *dom != Formula::True {
                s.push_str(" & ");
                write_formula(s, dom);
            }
            s.push('}');
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Error)]
#[error("kyx syntax error at token {pos}: {message}")]
pub struct KyxParseError {
    pub pos: usize,
    pub message: String,
}

/// Reads the `Problem` formula of an archive produced by [`emit_kyx`].
pub fn read_kyx(text: &str) -> Result<Formula, KyxParseError> {
    let start = text.find("Problem").ok_or_else(|| err(0, "no Problem block"))? + "Problem".len();
    let end = text[start..].find("End.").ok_or_else(|| err(0, "unterminated Problem block"))? + start;
    read_formula(&text[start..end])
}

/// Reads a formula in the emitted syntax.
pub fn read_formula(text: &str) -> Result<Formula, KyxParseError> {
    let mut r = Reader { toks: tokenize(text)?, pos: 0 };
    let f = r.imp()?;
    if r.pos != r.toks.len() {
        return Err(err(r.pos, "trailing input"));
    }
    Ok(f)
}

fn err(pos: usize, m: &str) -> KyxParseError {
    KyxParseError { pos, message: m.to_string() }
}

#[derive(Clone, Debug, PartialEq)]
enum Tok {
    Ident(String),
    Num(Rational),
    Sym(&'static str),
}

const SYMS: [&str; 27] = [
    "\\forall", "\\exists", ":=", "<=", ">=", "!=", "->", "++", "'", "[", "]", "{", "}", "(", ")", ";", ",", "&", "|",
    "!", "?", "*", "+", "-", "/", "=", "<",
];

fn tokenize(text: &str) -> Result<Vec<Tok>, KyxParseError> {
    let mut out = Vec::new();
    let mut rest = text;
    'outer: while let Some(c) = rest.chars().next() {
        if c.is_whitespace() {
            rest = &rest[c.len_utf8()..];
            continue;
        }
        if c.is_ascii_digit() {
            let n = rest.find(|c: char| !c.is_ascii_digit()).unwrap_or(rest.len());
            let k: i64 = rest[..n].parse().map_err(|_| err(out.len(), "number too large"))?;
            out.push(Tok::Num(int(k)));
            rest = &rest[n..];
            continue;
        }
        if c.is_ascii_alphabetic() || c == '_' {
            let n = rest.find(|c: char| !(c.is_ascii_alphanumeric() || c == '_' || c == '$')).unwrap_or(rest.len());
            out.push(Tok::Ident(rest[..n].to_string()));
            rest = &rest[n..];
            continue;
        }
        for s in SYMS.iter().chain([">"].iter()) {
            if rest.starts_with(s) {
                out.push(Tok::Sym(s));
                rest = &rest[s.len()..];
                continue 'outer;
            }
        }
        return Err(err(out.len(), &format!("unexpected character `{c}`")));
    }
    Ok(out)
}

struct Reader {
    toks: Vec<Tok>,
    pos: usize,
}

impl Reader {
    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.pos)
    }

    fn peek_at(&self, k: usize) -> Option<&Tok> {
        self.toks.get(self.pos + k)
    }

    fn is(&self, s: &str) -> bool {
        matches!(self.peek(), Some(Tok::Sym(t)) if *t == s)
    }

    fn eat(&mut self, s: &str) -> bool {
        if self.is(s) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn expect(&mut self, s: &str) -> Result<(), KyxParseError> {
        if self.eat(s) {
            Ok(())
        } else {
            Err(err(self.pos, &format!("expected `{s}`")))
        }
    }

    fn ident(&mut self) -> Result<String, KyxParseError> {
        match self.peek() {
            Some(Tok::Ident(x)) => {
                let x = x.clone();
                self.pos += 1;
                Ok(x)
            }
            _ => Err(err(self.pos, "expected identifier")),
        }
    }

    fn imp(&mut self) -> Result<Formula, KyxParseError> {
        let a = self.or()?;
        if self.eat("->") {
            return Ok(Formula::Implies(Box::new(a), Box::new(self.imp()?)));
        }
        Ok(a)
    }

    fn or(&mut self) -> Result<Formula, KyxParseError> {
        let mut a = self.and()?;
        while self.eat("|") {
            a = Formula::Or(Box::new(a), Box::new(self.and()?));
        }
        Ok(a)
    }

    fn and(&mut self) -> Result<Formula, KyxParseError> {
        let mut a = self.unary()?;
        while self.eat("&") {
            a = Formula::And(Box::new(a), Box::new(self.unary()?));
        }
        Ok(a)
    }

    fn unary(&mut self) -> Result<Formula, KyxParseError> {
        if self.eat("!") {
            return Ok(Formula::Not(Box::new(self.unary()?)));
        }
        if self.eat("[") {
            let p = self.seq()?;
            self.expect("]")?;
            return Ok(Formula::Box(Box::new(p), Box::new(self.unary()?)));
        }
        for (q, exists) in [("\\exists", true), ("\\forall", false)] {
            if self.eat(q) {
                let x = self.ident()?;
                let body = Box::new(self.unary()?);
                return Ok(if exists { Formula::Exists(x, body) } else { Formula::Forall(x, body) });
            }
        }
        match self.peek() {
            Some(Tok::Ident(x)) if x == "true" => {
                self.pos += 1;
                return Ok(Formula::True);
            }
            Some(Tok::Ident(x)) if x == "false" => {
                self.pos += 1;
                return Ok(Formula::False);
            }
            _ => {}
        }
        let save = self.pos;
        if let Ok(f) = self.comparison() {
            return Ok(f);
        }
        self.pos = save;
        self.expect("(")?;
        let f = self.imp()?;
        self.expect(")")?;
        Ok(f)
    }

    fn comparison(&mut self) -> Result<Formula, KyxParseError> {
        let a = self.term()?;
        let op = [
            ("<=", CmpOp::Le),
            (">=", CmpOp::Ge),
            ("!=", CmpOp::Ne),
            ("=", CmpOp::Eq),
            ("<", CmpOp::Lt),
            (">", CmpOp::Gt),
        ]
        .into_iter()
        .find(|(s, _)| self.eat(s))
        .map(|(_, op)| op)
        .ok_or_else(|| err(self.pos, "expected comparison"))?;
        Ok(Formula::Cmp(op, a, self.term()?))
    }

    fn term(&mut self) -> Result<Term, KyxParseError> {
        let mut a = self.factor()?;
        loop {
            let op = if self.eat("+") {
                ArithOp::Add
            } else if self.eat("-") {
                ArithOp::Sub
            } else {
                return Ok(a);
            };
            a = Term::bin(op, a, self.factor()?);
        }
    }

    fn factor(&mut self) -> Result<Term, KyxParseError> {
        let mut a = self.neg()?;
        loop {
            let op = if self.eat("*") {
                ArithOp::Mul
            } else if self.eat("/") {
                ArithOp::Div
            } else {
                return Ok(a);
            };
            a = Term::bin(op, a, self.neg()?);
        }
    }

    fn neg(&mut self) -> Result<Term, KyxParseError> {
        if self.eat("-") {
            return Ok(Term::Neg(Box::new(self.neg()?)));
        }
        match self.peek().cloned() {
            Some(Tok::Num(q)) => {
                self.pos += 1;
                Ok(Term::Num(q))
            }
            Some(Tok::Ident(x)) => {
                self.pos += 1;
                Ok(Term::Var(x))
            }
            _ => {
                self.expect("(")?;
                let t = self.term()?;
                self.expect(")")?;
                Ok(t)
            }
        }
    }

    /// Statements up to a closing `]`, `}` or `++`.
    fn seq(&mut self) -> Result<DlProgram, KyxParseError> {
        let mut parts = Vec::new();
        while !(self.is("]") || self.is("}") || self.is("++") || self.peek().is_none()) {
            parts.push(self.atomic()?);
        }
        Ok(match parts.len() {
            1 => parts.pop().unwrap(),
            _ => DlProgram::Seq(parts),
        })
    }

    fn atomic(&mut self) -> Result<DlProgram, KyxParseError> {
        if self.eat("?") {
            let f = self.imp()?;
            self.expect(";")?;
            return Ok(DlProgram::Test(f));
        }
        if self.eat("{") {
            if matches!(self.peek(), Some(Tok::Ident(_))) && matches!(self.peek_at(1), Some(Tok::Sym("'"))) {
                return self.ode();
            }
            let mut alts = vec![self.seq()?];
            while self.eat("++") {
                alts.push(self.seq()?);
            }
            self.expect("}")?;
            let mut p = alts.pop().unwrap();
            while let Some(a) = alts.pop() {
                p = DlProgram::choice(a, p);
            }
            if self.eat("*") {
                p = DlProgram::Star(Box::new(p));
            }
            return Ok(p);
        }
        let x = self.ident()?;
        self.expect(":=")?;
        let p = if self.eat("*") { DlProgram::Havoc(x) } else { DlProgram::Assign(x, self.term()?) };
        self.expect(";")?;
        Ok(p)
    }

    fn ode(&mut self) -> Result<DlProgram, KyxParseError> {
        let mut eqs = Vec::new();
        loop {
            let x = self.ident()?;
            self.expect("'")?;
            self.expect("=")?;
            eqs.push((x, self.term()?));
            if !self.eat(",") {
                break;
            }
        }
        let dom = if self.eat("&") { self.imp()? } else { Formula::True };
        self.expect("}")?;
        Ok(DlProgram::Ode(eqs, dom))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rational::frac;

    fn round(f: &Formula) {
        let text = formula_to_string(f);
        let back = read_formula(&text).unwrap_or_else(|e| panic!("{e}: {text}"));
        assert_eq!(back.canonical(), f.canonical(), "{text}");
    }

    #[test]
    fn term_layout() {
        let t = Term::bin(ArithOp::Sub, Term::var("a"), Term::bin(ArithOp::Sub, Term::var("b"), Term::int(-1)));
        assert_eq!(term_to_string(&t), "a - (b - (-1))");
        assert_eq!(term_to_string(&Term::num(frac(3, 4))), "(3/4)");
    }

    #[test]
    fn formulas_round_trip() {
        let x = || Formula::cmp(CmpOp::Le, Term::var("x"), Term::num(frac(-1, 2)));
        let y = || Formula::cmp(CmpOp::Ne, Term::Neg(Box::new(Term::var("y"))), Term::int(0));
        round(&Formula::implies(Formula::or(x(), y()), Formula::and(x(), Formula::not(Formula::or(y(), x())))));
        round(&Formula::Forall("z".into(), Box::new(Formula::implies(x(), y()))));
        let prog = DlProgram::seq(vec![
            DlProgram::Assign("t".into(), Term::int(0)),
            DlProgram::choice(DlProgram::test(Formula::or(x(), y())), DlProgram::seq(vec![DlProgram::fail(), DlProgram::Havoc("x".into())])),
            DlProgram::Star(Box::new(DlProgram::test(x()))),
            DlProgram::Ode(vec![("x".into(), Term::var("d")), ("t".into(), Term::int(1))], Formula::and(x(), y())),
            DlProgram::Ode(vec![("t".into(), Term::int(1))], Formula::True),
        ]);
        round(&Formula::implies(x(), Formula::boxed(prog, Formula::and(x(), Formula::boxed(DlProgram::test(y()), y())))));
    }

    #[test]
    fn archive_declarations() {
        let f = Formula::cmp(CmpOp::Le, Term::var("now"), Term::var("b"));
        let text = emit_kyx("A.m", &f, &["a".into(), "b".into()], &[]).unwrap();
        let decls: Vec<&str> = text.lines().filter(|l| l.trim_start().starts_with("Real")).collect();
        assert_eq!(decls, ["  Real a;", "  Real b;", "  Real t;", "  Real cll;", "  Real result;", "  Real now;"]);
        assert!(text.starts_with("ArchiveEntry \"A.m\""));
        assert!(text.trim_end().ends_with("End."));
        assert_eq!(read_kyx(&text).unwrap(), f);
        let e = emit_kyx("A.m", &Formula::cmp(CmpOp::Eq, Term::var("o"), Term::int(0)), &[], &["o".into()]);
        assert_eq!(e.unwrap_err().name, "o");
    }
}
