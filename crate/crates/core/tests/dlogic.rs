mod common;

use std::path::PathBuf;

use habskit_core::ast::Program;
use habskit_core::dlogic::*;
use habskit_core::parser::parse_program;

fn corpus(name: &str) -> Program {
    let path = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../corpus").join(name);
    parse_program(&std::fs::read_to_string(path).unwrap()).unwrap()
}

fn same(a: &Formula, b: &Formula) {
    assert_eq!(a.canonical(), b.canonical(), "\n got: {a}\nwant: {b}");
}

#[test]
fn tank_init_obligation() {
    let p = corpus("tank.habs");
    let tank = p.class("Tank").unwrap();
    let o = obligation_init(&p, tank);
    let want = common::tank_init_expected();
    same(&o.formula, &want);
    assert_eq!(o.name, "Tank.init");
}

#[test]
fn tank_local_ctrl_obligation() {
    let p = corpus("tank.habs");
    let tank = p.class("Tank").unwrap();
    let o = obligation_method(&p, tank, tank.method("localCtrl").unwrap());
    let want = common::tank_local_ctrl_expected();
    same(&o.formula, &want);
}

#[test]
fn tank_archives_match_golden_files() {
    let p = corpus("tank.habs");
    let all = obligations(&p);
    assert!(all.diagnostics.is_empty());
    let names: Vec<&str> = all.items.iter().map(|o| o.name.as_str()).collect();
    assert_eq!(names, ["Tank.init", "Tank.localCtrl"]);
    for o in &all.items {
        let text = o.to_kyx().unwrap();
        assert_eq!(text, common::golden(&format!("{}.kyx", o.name)), "{}", o.name);
        same(&read_kyx(&text).unwrap(), &o.formula);
    }
}

#[test]
fn true_is_a_minimal_problem() {
    let text = emit_kyx("trivial", &Formula::True, &[], &[]).unwrap();
    assert!(text.contains("Problem\n  true\nEnd."), "{text}");
}

#[test]
fn division_by_literal_survives_emission() {
    let p = parse_program(
        "/*@ invariant x >= 0 @*/ class A { physical Real x = 1; physical { x' = -x / 2; }
         Unit m(Real a) { x = (a - 1) / (3 * a) / 4; x = a / 2 * 3; } } { }",
    )
    .unwrap();
    for o in obligations(&p).items {
        let text = o.to_kyx().unwrap();
        same(&read_kyx(&text).unwrap(), &o.formula);
    }
}

#[test]
fn corpus_obligations_are_closed_and_round_trip() {
    for name in ["bball.habs", "tank.habs", "doubletank.habs", "counter.habs", "ctank.habs", "ctank_treq.habs", "room_faulty.habs", "room_fixed.habs", "cloud.habs"] {
        let p = corpus(name);
        let all = obligations(&p);
        assert!(all.diagnostics.is_empty(), "{name}: {:?}", all.diagnostics);
        for o in &all.items {
            for x in o.formula.vars() {
                assert!(
                    o.declared.contains(&x) || ["t", "cll", "result", "now"].contains(&x.as_str()),
                    "{name} {}: free `{x}`",
                    o.name
                );
            }
            let text = o.to_kyx().unwrap_or_else(|e| panic!("{name}: {e}"));
            same(&read_kyx(&text).unwrap(), &o.formula);
        }
    }
}

fn has_ode(f: &Formula) -> bool {
    match f {
        Formula::Box(p, f) => prog_has_ode(p) || has_ode(f),
        Formula::Not(a) | Formula::Exists(_, a) | Formula::Forall(_, a) => has_ode(a),
        Formula::And(a, b) | Formula::Or(a, b) | Formula::Implies(a, b) => has_ode(a) || has_ode(b),
        _ => false,
    }
}

fn prog_has_ode(p: &DlProgram) -> bool {
    match p {
        DlProgram::Ode(..) => true,
        DlProgram::Test(f) => has_ode(f),
        DlProgram::Choice(a, b) => prog_has_ode(a) || prog_has_ode(b),
        DlProgram::Star(a) => prog_has_ode(a),
        DlProgram::Seq(v) => v.iter().any(prog_has_ode),
        _ => false,
    }
}

#[test]
fn main_obligations_only_check_contracts() {
    for name in ["bball.habs", "ctank.habs", "room_fixed.habs", "cloud.habs"] {
        let p = corpus(name);
        let o = obligation_main(&p);
        assert!(!has_ode(&o.formula), "{name}: {}", o.formula);
        assert!(o.formula.vars().contains(&"cll".to_string()));
    }
}
