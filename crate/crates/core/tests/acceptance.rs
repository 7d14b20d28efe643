//! End-to-end acceptance criteria. Each criterion prints one PASS/FAIL line;
//! the test fails if any criterion fails.

mod common;

use std::collections::BTreeSet;

use proptest::prelude::*;
use proptest::test_runner::{Config, TestRunner};

use habskit_core::ast::*;
use habskit_core::counting::{CountExpr, TimeBounds};
use habskit_core::dlogic::{obligations, read_kyx, weak_neg, CmpOp, Formula, Term};
use habskit_core::effecttype::{apply_time_passing, check_program, join_branches, Ceid, Contexts, Delegation, FutId, TypingReport};
use habskit_core::normalize::normalize;
use habskit_core::parser::parse_program;
use habskit_core::rational::{frac, int, zero, Rational};
use habskit_core::runtime::*;
use habskit_core::timeanalysis::{builtin_oracle, validate_oracle, Overrides, ValidityClause};

type Outcome = Result<(), String>;
type Criterion = (&'static str, fn() -> Outcome);

macro_rules! ensure {
    ($cond:expr, $($msg:tt)+) => {
        if !$cond {
            return Err(format!($($msg)+));
        }
    };
}

fn typecheck(p: &Program, overrides: &str) -> Result<(Program, TypingReport), String> {
    let n = normalize(p).program;
    let o = builtin_oracle(&n, &Overrides::parse(overrides).map_err(|e| e.to_string())?);
    let r = check_program(&n, &o);
    Ok((n, r))
}

fn type_gate() -> Outcome {
    let (n, r) = typecheck(&common::load("room_faulty"), "")?;
    let errors: Vec<_> = r.errors().collect();
    ensure!(errors.len() == 1 && errors[0].kind == "DelegationTooSlow", "faulty room: {errors:?}");
    let (_, s) = n.find_stmt(errors[0].node.ok_or("no node")?).ok_or("node not found")?;
    let StmtKind::Assign { rhs: Rhs::Call { method, args, .. }, .. } = &s.kind else {
        return Err(format!("diagnostic not at a call: {s:?}"));
    };
    ensure!(method == "timer" && args[1].const_num() == Some(int(-1)), "wrong call site");
    let (_, r) = typecheck(&common::load("room_fixed"), "")?;
    ensure!(r.accepted(), "fixed room rejected: {:?}", r.diagnostics);
    Ok(())
}

fn context_algebra() -> Outcome {
    let ceid = Ceid::new("t", "localCtrl");
    let local = |v: i64| Contexts { local: [(ceid.clone(), CountExpr::int(v))].into(), ..Default::default() };
    let deleg = |lo: i64, hi: i64| Contexts {
        deleg: [(ceid.clone(), Delegation::new(FutId(0), CountExpr::int(lo), CountExpr::int(hi), CountExpr::zero()))].into(),
        ..Default::default()
    };
    let exact = |v: i64| TimeBounds::exact(CountExpr::int(v));
    let none = BTreeSet::new();
    let (c, bad) = apply_time_passing(&local(1), &exact(1), &none);
    ensure!(c == local(0) && bad.is_empty(), "await duration(1): {c:?}");
    let (c, bad) = apply_time_passing(&deleg(41, 41), &exact(40), &none);
    ensure!(c == deleg(1, 1) && bad.is_empty(), "await duration(40): {c:?}");
    let (c, bad) = apply_time_passing(&deleg(1, 1), &exact(1), &none);
    ensure!(c == local(0) && bad.is_empty(), "await f?: {c:?}");
    Ok(())
}

fn case_study() -> Outcome {
    let (_, r) = typecheck(&common::load("cloud"), "CtrlTask.ctrl = [3, 3]\nManager.manage = [inf, inf]\n")?;
    ensure!(r.accepted(), "{:?}", r.diagnostics);
    ensure!(r.methods.iter().any(|m| m.method == "main" && m.accepted), "main not checked");
    Ok(())
}

fn obligation_fidelity() -> Outcome {
    let all = obligations(&common::load("tank"));
    ensure!(all.diagnostics.is_empty(), "{:?}", all.diagnostics);
    let expected = [("Tank.init", common::tank_init_expected()), ("Tank.localCtrl", common::tank_local_ctrl_expected())];
    ensure!(all.items.len() == 2, "expected two obligations");
    for (o, (name, want)) in all.items.iter().zip(expected) {
        ensure!(o.name == name, "{} != {name}", o.name);
        ensure!(o.formula.canonical() == want.canonical(), "{name}: got {}", o.formula);
        let text = o.to_kyx().map_err(|e| e.to_string())?;
        ensure!(text == common::golden(&format!("{name}.kyx")), "{name} differs from golden file");
        ensure!(read_kyx(&text).map_err(|e| e.to_string())?.canonical() == want.canonical(), "{name} does not re-read");
    }
    Ok(())
}

fn semantics() -> Outcome {
    let p = common::load("bball");
    let r = run(&p, &int(3), None);
    let tank = r.objects_of("Tank")[0];
    let tr = extract_trace(&r, tank).map_err(|e| e.to_string())?;
    ensure!(tr.value("level", &int(1)) == Some(int(4)), "level at 1");
    ensure!(tr.value("level", &int(2)) == Some(int(3)), "level at 2");
    ensure!(!r.events.iter().any(|e| e.clock < int(2) && e.text.starts_with("schedule")), "scheduled before 2");
    let k = r.events.iter().position(|e| e.clock == int(2) && e.text.starts_with(&format!("schedule {tank}.down")));
    let k = k.ok_or("down not scheduled at 2")?;
    let log = r.objects_of("Log")[0];
    ensure!(
        r.events[k + 1].clock == int(2) && r.events[k + 1].text.starts_with(&format!("msg {tank} -> {log}.triggered")),
        "no message to log after scheduling"
    );
    Ok(())
}

fn invariant_safety() -> Outcome {
    let p = common::load("ctank");
    let r = run(&p, &int(100), None);
    ensure!(r.clock == int(100), "run stopped at {}", r.clock);
    let inv = p.class("TankTick").unwrap().invariant.clone().unwrap();
    let v = monitor_invariant(&extract_trace(&r, r.objects_of("TankTick")[0]).unwrap(), &inv).map_err(|e| e.to_string())?;
    ensure!(v.holds, "violated at {:?}", v.first_violation);
    Ok(())
}

fn frequency_safety() -> Outcome {
    for (name, overrides) in [("room_fixed", ""), ("cloud", ""), ("ctank_treq", "")] {
        let p = common::load(name);
        let (_, r) = typecheck(&p, overrides)?;
        ensure!(r.accepted(), "{name} rejected");
        let v = monitor_frequency(&run(&p, &int(50), None), &p);
        ensure!(v.is_empty(), "{name}: {v:?}");
    }
    let p = common::load("room_faulty");
    let v = monitor_frequency(&run(&p, &int(50), None), &p);
    ensure!(v.len() == 1 && v[0].deadline == int(41), "faulty room: {v:?}");
    Ok(())
}

fn oracle_validity() -> Outcome {
    for name in common::CORPUS {
        let n = normalize(&common::load(name)).program;
        let o = builtin_oracle(&n, &Overrides::default());
        let v = validate_oracle(&o, &run(&n, &int(30), None));
        let bad: Vec<_> = v.iter().filter(|v| v.clause == ValidityClause::Statement).collect();
        ensure!(bad.is_empty(), "{name}: {bad:?}");
    }
    Ok(())
}

fn check_prop<S: Strategy>(cases: u32, s: S, f: impl Fn(S::Value) -> Result<(), TestCaseError>) -> Outcome {
    TestRunner::new(Config { cases, failure_persistence: None, ..Config::default() })
        .run(&s, f)
        .map_err(|e| e.to_string())
}

fn rational() -> impl Strategy<Value = Rational> {
    (-1000i64..1000, 1i64..60).prop_map(|(n, d)| frac(n, d))
}

fn count() -> impl Strategy<Value = CountExpr> {
    prop_oneof![
        Just(CountExpr::NegInf),
        Just(CountExpr::PosInf),
        rational().prop_map(CountExpr::Finite),
        rational().prop_map(CountExpr::Finite),
    ]
}

fn property_suites() -> Outcome {
    check_prop(1000, (rational(), rational(), rational()), |(a, b, c)| {
        let (a, b, c) = (CountExpr::Finite(a), CountExpr::Finite(b), CountExpr::Finite(c));
        prop_assert_eq!(a.sub(&b).unwrap().sub(&c).unwrap(), a.sub(&b.add(&c).unwrap()).unwrap());
        prop_assert_eq!(a.sub(&b).unwrap().is_positive(), b.leq(&a));
        Ok(())
    })?;
    check_prop(1000, (count(), count(), count()), |(a, b, c)| {
        prop_assert!(a.leq(&b) || b.leq(&a));
        prop_assert!(!(a.leq(&b) && b.leq(&c)) || a.leq(&c));
        prop_assert!(!(a.leq(&b) && b.leq(&a)) || a == b);
        prop_assert!(a.meet(&b).leq(&a) && a.meet(&b).leq(&b) && a.leq(&a.join(&b)) && b.leq(&a.join(&b)));
        Ok(())
    })?;
    let ctx = |n| proptest::collection::vec(count().prop_filter("nonneg", |c| c.is_positive()), n);
    check_prop(300, (0usize..5).prop_flat_map(move |n| (ctx(n), ctx(n))), |(a, b)| {
        let mk = |vs: &[CountExpr]| Contexts {
            local: vs.iter().enumerate().map(|(i, v)| (Ceid::new(&format!("x{i}"), "m"), v.clone())).collect(),
            ..Default::default()
        };
        let j = join_branches(&mk(&a), &mk(&b)).unwrap();
        let want: Vec<CountExpr> = a.iter().zip(&b).map(|(x, y)| x.meet(y)).collect();
        prop_assert_eq!(j.local.values().cloned().collect::<Vec<_>>(), want);
        Ok(())
    })?;
    check_prop(1000, (any::<bool>(), -50i64..50, -50i64..50), |(up, x, c)| {
        let orig = if up { CmpOp::Ge } else { CmpOp::Le };
        let l = Formula::cmp(orig, Term::var("x"), Term::int(c));
        let Formula::Cmp(op, ..) = weak_neg(&l).unwrap() else { unreachable!() };
        let holds = |op: CmpOp| if op == CmpOp::Ge { x >= c } else { x <= c };
        prop_assert!(holds(orig) || holds(op));
        prop_assert!(!(holds(orig) && holds(op)) || x == c);
        prop_assert_eq!(weak_neg(&weak_neg(&l).unwrap()).unwrap(), l);
        Ok(())
    })?;
    for name in common::CORPUS {
        let p = common::load(name);
        let n = normalize(&p).program;
        let (a, b) = (run(&p, &int(20), None), run(&n, &int(20), None));
        for info in a.objects.iter().filter(|o| o.class != "main") {
            let (ta, tb) = (extract_trace(&a, info.id).unwrap(), extract_trace(&b, info.id).map_err(|e| e.to_string())?);
            for t in (0..=20).map(int) {
                ensure!(ta.at(&t) == tb.at(&t), "{name}: {} differs at {t}", info.id);
            }
        }
        ensure!(run(&p, &int(20), Some(3)).event_log() == run(&p, &int(20), Some(3)).event_log(), "{name} nondeterministic");
        ensure!(run(&p, &int(20), None).event_log() == a.event_log(), "{name} nondeterministic");
    }
    Ok(())
}

fn mte_suite() -> Outcome {
    let p = parse_program("{ await duration(3); await f?; await diff level <= 3 & drain <= 0; }").map_err(|e| e.to_string())?;
    let guard = |i: usize| match &p.main[i].kind {
        StmtKind::Await { guard, .. } => guard.clone(),
        _ => unreachable!(),
    };
    let st = MapValuation {
        values: [
            ("level".to_string(), Value::Num(int(5))),
            ("drain".to_string(), Value::Num(int(-1))),
            ("f".to_string(), Value::Fut(Fid(1))),
        ]
        .into(),
        slopes: [("level".to_string(), int(-1))].into(),
        clock: zero(),
    };
    let mte = |i, resolved: bool| mte_guard(&guard(i), &st, &|_| resolved).map_err(|e| e.to_string());
    ensure!(mte(0, false)? == CountExpr::int(3), "duration(3)");
    ensure!(mte(1, true)? == CountExpr::zero(), "resolved future");
    ensure!(mte(1, false)? == CountExpr::PosInf, "unresolved future");
    ensure!(mte(2, false)? == CountExpr::int(2), "affine root");
    Ok(())
}

#[test]
fn acceptance_criteria() {
    let criteria: [Criterion; 10] = [
        ("type gate on the room controller", type_gate),
        ("worked context transitions", context_algebra),
        ("case-study typing", case_study),
        ("obligation fidelity", obligation_fidelity),
        ("bouncing tank semantics", semantics),
        ("invariant safety by simulation", invariant_safety),
        ("frequency safety of accepted programs", frequency_safety),
        ("oracle validity", oracle_validity),
        ("property suites", property_suites),
        ("mte unit suite", mte_suite),
    ];
    let mut failed = Vec::new();
    for (i, (name, f)) in criteria.iter().enumerate() {
        match f() {
            Ok(()) => println!("criterion {}: PASS  {name}", i + 1),
            Err(e) => {
                println!("criterion {}: FAIL  {name}: {e}", i + 1);
                failed.push(i + 1);
            }
        }
    }
    assert!(failed.is_empty(), "failed criteria: {failed:?}");
}
