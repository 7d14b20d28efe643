#![allow(dead_code)]

use std::path::PathBuf;

use habskit_core::ast::Program;
use habskit_core::dlogic::{CmpOp, DlProgram, Formula, Term};
use habskit_core::rational::int;
use habskit_core::parser::parse_program_named;

pub const CORPUS: [&str; 9] = [
    "bball",
    "cloud",
    "counter",
    "ctank",
    "ctank_treq",
    "doubletank",
    "room_faulty",
    "room_fixed",
    "tank",
];

pub fn corpus_path(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("../../corpus")
        .join(format!("{name}.habs"))
}

pub fn source(name: &str) -> String {
    std::fs::read_to_string(corpus_path(name)).unwrap()
}

pub fn load(name: &str) -> Program {
    let file = format!("{name}.habs");
    parse_program_named(&file, &source(name)).unwrap_or_else(|e| panic!("{e}"))
}

pub fn golden(name: &str) -> String {
    let path = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/golden").join(name);
    std::fs::read_to_string(path).unwrap()
}

pub fn v(x: &str) -> Term {
    Term::var(x)
}

pub fn le(a: Term, b: Term) -> Formula {
    Formula::cmp(CmpOp::Le, a, b)
}

pub fn ge(a: Term, b: Term) -> Formula {
    Formula::cmp(CmpOp::Ge, a, b)
}

pub fn tank_invariant() -> Formula {
    Formula::and_all([
        le(Term::int(3), v("level")),
        le(v("level"), Term::int(10)),
        le(Term::num(-int(1)), v("drain")),
        le(v("drain"), Term::int(1)),
    ])
}

/// `I ∧ [t := 0; {level' = drain, t' = 1 & t <= 1}] I`
pub fn tank_post() -> Formula {
    let i = tank_invariant();
    let evolve = DlProgram::seq(vec![
        DlProgram::Assign("t".into(), Term::int(0)),
        DlProgram::Ode(vec![("level".into(), v("drain")), ("t".into(), Term::int(1))], le(v("t"), Term::int(1))),
    ]);
    Formula::and(i.clone(), Formula::boxed(evolve, i))
}

pub fn if_then(c: Formula, body: DlProgram) -> DlProgram {
    DlProgram::choice(
        DlProgram::seq(vec![DlProgram::test(c.clone()), body]),
        DlProgram::seq(vec![DlProgram::test(Formula::not(c)), DlProgram::test(Formula::True)]),
    )
}

/// The init obligation of the event-free tank, built by hand.
pub fn tank_init_expected() -> Formula {
    Formula::implies(
        Formula::and(le(Term::int(4), v("inVal")), le(v("inVal"), Term::int(9))),
        Formula::boxed(
            DlProgram::seq(vec![
                DlProgram::Assign("level".into(), v("inVal")),
                DlProgram::Assign("drain".into(), Term::Neg(Box::new(Term::int(1)))),
            ]),
            tank_post(),
        ),
    )
}

/// The `localCtrl` obligation of the event-free tank, built by hand.
pub fn tank_local_ctrl_expected() -> Formula {
    Formula::implies(
        tank_invariant(),
        Formula::boxed(
            DlProgram::seq(vec![
                if_then(le(v("level"), Term::int(4)), DlProgram::Assign("drain".into(), Term::int(1))),
                if_then(ge(v("level"), Term::int(9)), DlProgram::Assign("drain".into(), Term::Neg(Box::new(Term::int(1))))),
            ]),
            tank_post(),
        ),
    )
}
