mod common;

use habskit_core::ast::*;
use habskit_core::effecttype::{check_program, TypingReport};
use habskit_core::normalize::normalize;
use habskit_core::timeanalysis::{builtin_oracle, Overrides};

fn check_with(name: &str, overrides: &str) -> (Program, TypingReport) {
    let p = normalize(&common::load(name)).program;
    let o = builtin_oracle(&p, &Overrides::parse(overrides).unwrap());
    assert!(o.diagnostics.iter().all(|d| !d.is_error()), "{:?}", o.diagnostics);
    let r = check_program(&p, &o);
    (p, r)
}

fn check(name: &str) -> (Program, TypingReport) {
    check_with(name, "")
}

fn error_kinds(r: &TypingReport) -> Vec<&str> {
    r.errors().map(|d| d.kind.as_str()).collect()
}

#[test]
fn faulty_room_rejected_at_second_timer_call() {
    let (p, r) = check("room_faulty");
    assert_eq!(error_kinds(&r), ["DelegationTooSlow"], "{:#?}", r.diagnostics);
    let d = r.errors().next().unwrap();
    assert_eq!(d.method.as_deref(), Some("Mobile.run"));
    let (_, s) = p.find_stmt(d.node.unwrap()).unwrap();
    let StmtKind::Assign { rhs: Rhs::Call { method, args, .. }, .. } = &s.kind else { panic!("{s:?}") };
    assert_eq!(method, "timer");
    assert_eq!(args[1].const_num(), Some(habskit_core::rational::int(-1)));
}

#[test]
fn fixed_room_accepted() {
    let (_, r) = check("room_fixed");
    assert!(r.accepted(), "{:#?}", r.diagnostics);
}

#[test]
fn faulty_timer_alone_is_consistent() {
    let (_, r) = check("room_faulty");
    let timer = r.methods.iter().find(|m| m.method == "Controller.timer").unwrap();
    assert!(timer.accepted);
    for c in &timer.contexts {
        assert_eq!(c.end.local.values().map(|v| v.to_string()).collect::<Vec<_>>(), ["0"]);
    }
    let (_, r) = check("room_fixed");
    let timer = r.methods.iter().find(|m| m.method == "Controller.timer").unwrap();
    assert_eq!(timer.contexts[0].end.local.values().map(|v| v.to_string()).collect::<Vec<_>>(), ["1"]);
}

#[test]
fn cloud_accepted_with_asserted_bounds() {
    let (_, r) = check_with("cloud", "CtrlTask.ctrl = [3, 3]\nManager.manage = [inf, inf]\n");
    assert!(r.accepted(), "{:#?}", r.diagnostics);
    assert!(r.methods.iter().any(|m| m.method == "main" && m.accepted));
}

#[test]
fn local_controller_accepted() {
    let (_, r) = check("tank");
    let m = r.methods.iter().find(|m| m.method == "Tank.localCtrl").unwrap();
    assert!(m.accepted);
    assert!(m.contexts.iter().all(|c| c.end.local.is_empty() && c.end.deleg.is_empty()));
}

#[test]
fn remaining_corpus_accepted() {
    for name in ["tank", "bball", "ctank", "ctank_treq", "cloud", "doubletank", "counter"] {
        let (_, r) = check(name);
        assert!(r.accepted(), "{name}: {:#?}", r.diagnostics);
    }
}

#[test]
fn checking_is_deterministic() {
    for name in common::CORPUS {
        let a = serde_json::to_string(&check(name).1).unwrap();
        let b = serde_json::to_string(&check(name).1).unwrap();
        assert_eq!(a, b);
    }
}
