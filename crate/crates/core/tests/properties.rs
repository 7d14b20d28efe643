mod common;

use std::collections::{BTreeMap, BTreeSet};

use proptest::prelude::*;

use habskit_core::ast::{walk_stmts, Program, StmtKind};
use habskit_core::counting::{CountExpr, TimeBounds};
use habskit_core::dlogic::{weak_neg, CmpOp, Formula, Term};
use habskit_core::effecttype::{apply_time_passing, join_branches, Ceid, Contexts, Delegation, FutId};
use habskit_core::normalize::{normalize, ssa_rename};
use habskit_core::parser::parse_program;
use habskit_core::pretty::pretty_print;
use habskit_core::rational::{frac, int, Rational};
use habskit_core::runtime::{extract_trace, run, Value};

fn rational() -> impl Strategy<Value = Rational> {
    (-1000i64..1000, 1i64..60).prop_map(|(n, d)| frac(n, d))
}

fn count() -> impl Strategy<Value = CountExpr> {
    prop_oneof![
        1 => Just(CountExpr::NegInf),
        1 => Just(CountExpr::PosInf),
        8 => rational().prop_map(CountExpr::Finite),
    ]
}

fn fin(q: &Rational) -> CountExpr {
    CountExpr::Finite(q.clone())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn subtraction_associates(a in rational(), b in rational(), c in rational()) {
        let lhs = fin(&a).sub(&fin(&b)).unwrap().sub(&fin(&c)).unwrap();
        let rhs = fin(&a).sub(&fin(&b).add(&fin(&c)).unwrap()).unwrap();
        prop_assert_eq!(lhs, rhs);
    }

    #[test]
    fn positivity_is_order(a in rational(), b in rational()) {
        prop_assert_eq!(fin(&a).sub(&fin(&b)).unwrap().is_positive(), fin(&b).leq(&fin(&a)));
    }

    #[test]
    fn leq_is_a_total_order(a in count(), b in count(), c in count()) {
        prop_assert!(a.leq(&a));
        prop_assert!(a.leq(&b) || b.leq(&a));
        if a.leq(&b) && b.leq(&a) {
            prop_assert_eq!(&a, &b);
        }
        if a.leq(&b) && b.leq(&c) {
            prop_assert!(a.leq(&c));
        }
        prop_assert!(CountExpr::NegInf.leq(&a) && a.leq(&CountExpr::PosInf));
    }

    #[test]
    fn meet_and_join_form_a_lattice(a in count(), b in count(), c in count()) {
        let m = a.meet(&b);
        prop_assert!(m.leq(&a) && m.leq(&b));
        if c.leq(&a) && c.leq(&b) {
            prop_assert!(c.leq(&m));
        }
        let j = a.join(&b);
        prop_assert!(a.leq(&j) && b.leq(&j));
        if a.leq(&c) && b.leq(&c) {
            prop_assert!(j.leq(&c));
        }
        prop_assert_eq!(a.meet(&b), b.meet(&a));
        prop_assert_eq!(a.join(&b), b.join(&a));
        prop_assert_eq!(a.meet(&b.meet(&c)), a.meet(&b).meet(&c));
        prop_assert_eq!(a.meet(&a.join(&b)), a.clone());
        prop_assert_eq!(a.join(&a.meet(&b)), a);
    }

    #[test]
    fn text_form_round_trips(a in count()) {
        prop_assert_eq!(a.to_string().parse::<CountExpr>().unwrap(), a);
    }
}

fn nonneg_count() -> impl Strategy<Value = CountExpr> {
    prop_oneof![
        1 => Just(CountExpr::PosInf),
        6 => (0i64..100, 1i64..8).prop_map(|(n, d)| CountExpr::Finite(frac(n, d))),
    ]
}

fn local_ctx(keys: usize) -> impl Strategy<Value = BTreeMap<Ceid, CountExpr>> {
    proptest::collection::vec(nonneg_count(), keys)
        .prop_map(|vs| vs.into_iter().enumerate().map(|(i, v)| (Ceid::new(&format!("x{i}"), "m"), v)).collect())
}

fn deleg_ctx() -> impl Strategy<Value = BTreeMap<Ceid, Delegation>> {
    proptest::collection::vec((nonneg_count(), nonneg_count(), nonneg_count()), 0..4).prop_map(|ds| {
        ds.into_iter()
            .enumerate()
            .map(|(i, (a, b, t))| {
                let (lo, hi) = if a.leq(&b) { (a, b) } else { (b, a) };
                (Ceid::new(&format!("d{i}"), "m"), Delegation::new(FutId(i as u32), lo, hi, t))
            })
            .collect()
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(300))]

    #[test]
    fn if_join_is_pointwise_min((n, a, b, d) in (0usize..6).prop_flat_map(|n| (Just(n), local_ctx(n), local_ctx(n), deleg_ctx()))) {
        let ca = Contexts { local: a.clone(), deleg: d.clone() };
        let cb = Contexts { local: b.clone(), deleg: d.clone() };
        let j = join_branches(&ca, &cb).unwrap();
        for (k, v) in &j.local {
            prop_assert_eq!(v, &a[k].meet(&b[k]));
        }
        prop_assert_eq!(j.local.len(), n);
        prop_assert_eq!(j.deleg, d);
    }

    #[test]
    fn zero_time_is_identity(local in local_ctx(4), deleg in deleg_ctx()) {
        let c = Contexts { local, deleg };
        let (after, bad) = apply_time_passing(&c, &TimeBounds::zero(), &BTreeSet::new());
        prop_assert!(bad.is_empty());
        prop_assert_eq!(after, c);
    }
}

fn term() -> impl Strategy<Value = Term> {
    let leaf = prop_oneof![
        prop::sample::select(vec!["x", "y", "z"]).prop_map(Term::var),
        (-20i64..20).prop_map(Term::int),
    ];
    leaf.prop_recursive(2, 6, 2, |inner| {
        (inner.clone(), inner).prop_map(|(a, b)| Term::bin(habskit_core::dlogic::ArithOp::Add, a, b))
    })
}

fn eval_term(t: &Term, env: &BTreeMap<&str, Rational>) -> Rational {
    match t {
        Term::Var(x) => env[x.as_str()].clone(),
        Term::Num(q) => q.clone(),
        Term::Neg(a) => -eval_term(a, env),
        Term::Bin(op, a, b) => {
            let (a, b) = (eval_term(a, env), eval_term(b, env));
            match op {
                habskit_core::dlogic::ArithOp::Add => a + b,
                habskit_core::dlogic::ArithOp::Sub => a - b,
                habskit_core::dlogic::ArithOp::Mul => a * b,
                habskit_core::dlogic::ArithOp::Div => a / b,
            }
        }
    }
}

fn holds(f: &Formula, env: &BTreeMap<&str, Rational>) -> bool {
    match f {
        Formula::True => true,
        Formula::False => false,
        Formula::Cmp(op, a, b) => {
            let (a, b) = (eval_term(a, env), eval_term(b, env));
            match op {
                CmpOp::Le => a <= b,
                CmpOp::Ge => a >= b,
                CmpOp::Lt => a < b,
                CmpOp::Gt => a > b,
                CmpOp::Eq => a == b,
                CmpOp::Ne => a != b,
            }
        }
        Formula::Not(a) => !holds(a, env),
        Formula::And(a, b) => holds(a, env) && holds(b, env),
        Formula::Or(a, b) => holds(a, env) || holds(b, env),
        Formula::Implies(a, b) => !holds(a, env) || holds(b, env),
        _ => unreachable!(),
    }
}

fn weak_literal() -> impl Strategy<Value = Formula> {
    (prop::sample::select(vec![CmpOp::Le, CmpOp::Ge]), term(), term()).prop_map(|(op, a, b)| Formula::cmp(op, a, b))
}

fn env() -> impl Strategy<Value = BTreeMap<&'static str, Rational>> {
    (-30i64..30, -30i64..30, -30i64..30).prop_map(|(x, y, z)| [("x", int(x)), ("y", int(y)), ("z", int(z))].into())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn weak_negation_of_literals(l in weak_literal(), env in env()) {
        let n = weak_neg(&l).unwrap();
        prop_assert_eq!(weak_neg(&n).unwrap(), l.clone());
        prop_assert!(holds(&l, &env) || holds(&n, &env));
        if holds(&l, &env) && holds(&n, &env) {
            let Formula::Cmp(_, a, b) = &l else { unreachable!() };
            prop_assert_eq!(eval_term(a, &env), eval_term(b, &env));
        }
    }

    #[test]
    fn weak_negation_of_strict_literals_is_the_complement(a in term(), b in term(), strict in any::<bool>(), env in env()) {
        let l = Formula::cmp(if strict { CmpOp::Lt } else { CmpOp::Gt }, a, b);
        prop_assert_ne!(holds(&l, &env), holds(&weak_neg(&l).unwrap(), &env));
    }

    #[test]
    fn weak_negation_follows_de_morgan(p in weak_literal(), q in weak_literal(), env in env()) {
        let and = weak_neg(&Formula::and(p.clone(), q.clone())).unwrap();
        prop_assert_eq!(holds(&and, &env), holds(&weak_neg(&p).unwrap(), &env) || holds(&weak_neg(&q).unwrap(), &env));
        let or = weak_neg(&Formula::or(p.clone(), q.clone())).unwrap();
        prop_assert_eq!(holds(&or, &env), holds(&weak_neg(&p).unwrap(), &env) && holds(&weak_neg(&q).unwrap(), &env));
    }
}

fn expr_src() -> impl Strategy<Value = String> {
    let leaf = prop_oneof![
        (0i64..50).prop_map(|n| n.to_string()),
        (1i64..9, 2i64..9).prop_map(|(a, b)| format!("{a}/{b}")),
        prop::sample::select(vec!["a", "b", "c", "true", "false", "now()"]).prop_map(String::from),
    ];
    leaf.prop_recursive(4, 24, 2, |inner| {
        prop_oneof![
            (inner.clone(), prop::sample::select(vec!["+", "-", "*", "<=", ">=", "==", "!=", "&", "|"]), inner.clone())
                .prop_map(|(a, op, b)| format!("({a} {op} {b})")),
            inner.clone().prop_map(|a| format!("!({a})")),
            inner.prop_map(|a| format!("-({a})")),
        ]
    })
}

fn stmt_src() -> impl Strategy<Value = String> {
    let simple = prop_oneof![
        expr_src().prop_map(|e| format!("a = {e};")),
        (1i64..5).prop_map(|n| format!("await duration({n});")),
        expr_src().prop_map(|e| format!("await diff {e};")),
        Just("skip;".to_string()),
        (1i64..5).prop_map(|n| format!("duration({n}, {n});")),
    ];
    simple.prop_recursive(2, 8, 3, |inner| {
        prop_oneof![
            (expr_src(), proptest::collection::vec(inner.clone(), 1..3), proptest::collection::vec(inner.clone(), 0..3))
                .prop_map(|(c, t, e)| format!("if ({c}) {{ {} }} else {{ {} }}", t.join(" "), e.join(" "))),
            (expr_src(), proptest::collection::vec(inner, 1..3))
                .prop_map(|(c, b)| format!("while ({c}) {{ {} }}", b.join(" "))),
        ]
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(300))]

    #[test]
    fn printing_round_trips(stmts in proptest::collection::vec(stmt_src(), 0..5)) {
        let src = format!("class A(Int b) {{ Real a = 0; Bool c = true; Unit m() {{ {} }} }} {{ }}", stmts.join(" "));
        let p = parse_program(&src).unwrap();
        let text = pretty_print(&p);
        let q = parse_program(&text).unwrap();
        prop_assert!(p.structurally_eq(&q), "{}", text);
    }
}

/// Straight-line code with branches over three locals, ending in `out = x0 + x1 + x2`.
fn ssa_program() -> impl Strategy<Value = String> {
    let var = || prop::sample::select(vec!["x0", "x1", "x2"]);
    let e = move || {
        (var(), prop::sample::select(vec!["+", "-", "*"]), prop_oneof![var().prop_map(String::from), (-3i64..4).prop_map(|n| n.to_string())])
            .prop_map(|(a, op, b)| format!("{a} {op} ({b})"))
    };
    let assign = move || (var(), e()).prop_map(|(x, e)| format!("{x} = {e};"));
    let stmt = prop_oneof![
        3 => assign(),
        1 => (var(), -3i64..4, proptest::collection::vec(assign(), 1..3), proptest::collection::vec(assign(), 0..3))
            .prop_map(|(x, k, t, f)| format!("if ({x} <= {k}) {{ {} }} else {{ {} }}", t.join(" "), f.join(" "))),
    ];
    (proptest::collection::vec(stmt, 1..8), -3i64..4, -3i64..4).prop_map(|(body, a, b)| {
        format!(
            "class A {{ Int out = 0; {{ Int x0 = {a}; Int x1 = {b}; Int x2 = 1; {} out = x0 + x1 + x2; }} }} {{ A o = new A(); }}",
            body.join(" ")
        )
    })
}

/// Names introduced on each path through `stmts`.
fn paths_declare_once(stmts: &[habskit_core::ast::Stmt], seen: &BTreeSet<String>) -> Result<(), String> {
    let mut seen = seen.clone();
    for (i, s) in stmts.iter().enumerate() {
        match &s.kind {
            StmtKind::Assign { ty: Some(_), target: Some(x), .. } => {
                if !seen.insert(x.clone()) {
                    return Err(format!("`{x}` declared twice"));
                }
            }
            StmtKind::If { then, els, .. } => {
                let rest = &stmts[i + 1..];
                for branch in [then.as_slice(), els.as_deref().unwrap_or(&[])] {
                    let mut path = branch.to_vec();
                    path.extend_from_slice(rest);
                    paths_declare_once(&path, &seen)?;
                }
                return Ok(());
            }
            _ => {}
        }
    }
    Ok(())
}

fn final_out(p: &Program) -> Value {
    let r = run(p, &int(1), None);
    let o = r.objects_of("A")[0];
    Value::Num(extract_trace(&r, o).unwrap().value("out", &r.clock).unwrap())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn ssa_declares_each_local_once_per_path(src in ssa_program()) {
        let p = parse_program(&src).unwrap();
        let q = ssa_rename(&p);
        for body in q.bodies() {
            let mut untyped_local = None;
            walk_stmts(body.stmts, &mut |s| {
                if let StmtKind::Assign { ty: None, target: Some(x), .. } = &s.kind {
                    if x != "out" {
                        untyped_local = Some(x.clone());
                    }
                }
            });
            prop_assert_eq!(untyped_local, None);
            prop_assert_eq!(paths_declare_once(body.stmts, &BTreeSet::new()), Ok(()));
        }
        prop_assert_eq!(final_out(&p), final_out(&q));
        prop_assert_eq!(final_out(&p), final_out(&normalize(&p).program));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn seeded_simulation_is_reproducible(k in 0usize..common::CORPUS.len(), seed in any::<u64>(), h in 1i64..25) {
        let p = common::load(common::CORPUS[k]);
        let a = run(&p, &int(h), Some(seed));
        let b = run(&p, &int(h), Some(seed));
        prop_assert_eq!(a.event_log(), b.event_log());
        prop_assert_eq!(a.segments, b.segments);
    }
}

/// Values of every field of every class object at every discrete-step time
/// of either run.
fn observations(p: &Program, horizon: i64) -> Vec<(String, Rational, BTreeMap<String, Rational>)> {
    let r = run(p, &int(horizon), None);
    let mut out = Vec::new();
    for info in r.objects.iter().filter(|o| o.class != "main") {
        let tr = extract_trace(&r, info.id).unwrap();
        for t in tr.breakpoints().into_iter().chain((0..=horizon).map(int)) {
            if let Some(v) = tr.at(&t) {
                out.push((format!("{}:{}", info.id, info.class), t, v));
            }
        }
    }
    out.sort();
    out.dedup();
    out
}

#[test]
fn normalization_preserves_trajectories() {
    for name in common::CORPUS {
        let p = common::load(name);
        let n = normalize(&p).program;
        let a = observations(&p, 20);
        let b = observations(&n, 20);
        let at_integers = |o: &Vec<(String, Rational, BTreeMap<String, Rational>)>| {
            o.iter().filter(|(_, t, _)| t.is_integer()).cloned().collect::<Vec<_>>()
        };
        assert_eq!(at_integers(&a), at_integers(&b), "{name}");
        let times = |o: &Vec<(String, Rational, BTreeMap<String, Rational>)>| {
            o.iter().map(|(k, t, _)| (k.clone(), t.clone())).collect::<BTreeSet<_>>()
        };
        for (k, t, v) in &b {
            if times(&a).contains(&(k.clone(), t.clone())) {
                let orig = a.iter().find(|(k2, t2, _)| k2 == k && t2 == t).unwrap();
                assert_eq!(&orig.2, v, "{name}: {k} at {t}");
            }
        }
    }
}
