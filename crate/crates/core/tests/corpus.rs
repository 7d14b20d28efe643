mod common;

use common::{load, CORPUS};
use habskit_core::ast::MethodRef;
use habskit_core::parser::parse_program;
use habskit_core::pretty::pretty_print;
use habskit_core::wellformed::validate_wellformed;

#[test]
fn corpus_is_wellformed() {
    for name in CORPUS {
        let d = validate_wellformed(&load(name));
        assert!(d.is_empty(), "{name}: {d:?}");
    }
}

#[test]
fn corpus_round_trips() {
    for name in CORPUS {
        let p = load(name);
        let text = pretty_print(&p);
        let q = parse_program(&text).unwrap_or_else(|e| panic!("{name}: {e}\n{text}"));
        assert!(p.structurally_eq(&q), "{name}\n{text}");
    }
}

#[test]
fn node_ids_and_points_are_unique() {
    for name in CORPUS {
        let p = load(name);
        let ids = p.all_node_ids();
        let set: std::collections::HashSet<_> = ids.iter().collect();
        assert_eq!(set.len(), ids.len(), "{name}");
        let pts = p.all_points();
        let set: std::collections::HashSet<_> = pts.iter().collect();
        assert_eq!(set.len(), pts.len(), "{name}");
    }
}

#[test]
fn room_annotations_are_attached() {
    let p = load("room_faulty");
    let tank = p.class("Tank").unwrap();
    assert_eq!(tank.treq("localCtrl"), Some(&habskit_core::rational::int(1)));
    let timer = p.method(&MethodRef::new("Controller", "timer")).unwrap();
    let tc = &timer.contract.time_control;
    assert_eq!(tc.len(), 1);
    assert_eq!((tc[0].location.as_str(), tc[0].method.as_str()), ("t", "localCtrl"));
    assert_eq!(tc[0].first.to_string(), "1");
    assert_eq!(tc[0].last.to_string(), "0");
}
