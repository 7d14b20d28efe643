use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn corpus(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../corpus").join(format!("{name}.habs"))
}

fn habskit(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_habskit")).args(args).env("HABSKIT_COLOR", "0").output().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8(o.stderr.clone()).unwrap()
}

fn path(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn check_rejects_the_faulty_room() {
    let o = habskit(&["check", path(&corpus("room_faulty"))]);
    assert_eq!(o.status.code(), Some(1));
    let err = stderr(&o);
    assert_eq!(err.matches("DelegationTooSlow").count(), 1, "{err}");
    assert!(stdout(&o).contains("ill-typed"));
}

#[test]
fn check_accepts_the_fixed_room() {
    let o = habskit(&["check", path(&corpus("room_fixed"))]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert!(stdout(&o).contains("well-typed"));
}

#[test]
fn check_with_an_oracle_file() {
    let dir = tempfile::tempdir().unwrap();
    let oracle = dir.path().join("oracle.txt");
    std::fs::write(&oracle, "# cloud bounds\nCtrlTask.ctrl = [3, 3]\nManager.manage = [inf, inf]\n").unwrap();
    let o = habskit(&["check", path(&corpus("cloud")), "--oracle", oracle.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));

    std::fs::write(&oracle, "CtrlTask.ctrl = 3\n").unwrap();
    let o = habskit(&["check", path(&corpus("cloud")), "--oracle", oracle.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("line 1"));
}

#[test]
fn obligations_for_the_tank() {
    let dir = tempfile::tempdir().unwrap();
    let po = dir.path().join("po");
    let o = habskit(&["obligations", path(&corpus("tank")), "--out", po.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let mut names: Vec<String> =
        std::fs::read_dir(&po).unwrap().map(|e| e.unwrap().file_name().into_string().unwrap()).collect();
    names.sort();
    assert_eq!(names, ["Tank.init.kyx", "Tank.localCtrl.kyx"]);
    let text = std::fs::read_to_string(po.join("Tank.init.kyx")).unwrap();
    assert!(text.starts_with("ArchiveEntry \"Tank.init\""));
}

#[test]
fn simulate_the_tick_tank() {
    let o = habskit(&["simulate", path(&corpus("ctank")), "--horizon", "100"]);
    assert_eq!(o.status.code(), Some(0));
    assert!(stdout(&o).contains("invariant holds"));
}

#[test]
fn simulate_reports_the_missed_call() {
    let o = habskit(&["simulate", path(&corpus("room_faulty")), "--horizon", "45"]);
    assert_eq!(o.status.code(), Some(1));
    let out = stdout(&o);
    assert_eq!(out.matches("frequency violation").count(), 1);
    assert!(out.contains("clock=41"), "{out}");
}

#[test]
fn event_log_and_csv() {
    let dir = tempfile::tempdir().unwrap();
    let o = habskit(&[
        "simulate",
        path(&corpus("bball")),
        "--horizon",
        "5/2",
        "--events",
        "--trace-csv",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(0));
    let out = stdout(&o);
    assert!(out.lines().any(|l| l == "clock=2 schedule o2.down fut2"), "{out}");
    assert!(out.lines().any(|l| l == "clock=5/2 horizon"), "{out}");
    let csv = std::fs::read_to_string(dir.path().join("trace.csv")).unwrap();
    assert!(csv.starts_with("object,field,t_start,value_start,slope,t_end\n"));
    assert!(csv.contains("o2,level,0,5,-1,2\n"), "{csv}");
}

#[test]
fn json_reports_are_versioned() {
    for args in [vec!["check"], vec!["simulate", "--horizon", "3"], vec!["parse"]] {
        let mut a = vec!["--json"];
        a.extend(args);
        let file = corpus("ctank");
        a.push(path(&file));
        let o = habskit(&a);
        let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
        assert_eq!(v["schema"], 1);
        assert_eq!(v["exit"], o.status.code().unwrap());
    }
}

#[test]
fn seeded_runs_are_reproducible() {
    let run = || stdout(&habskit(&["simulate", path(&corpus("cloud")), "--horizon", "20", "--seed", "11", "--events"]));
    assert_eq!(run(), run());
}

#[test]
fn verify_the_corpus() {
    for (name, code) in [("ctank", 0), ("room_fixed", 0), ("cloud", 0), ("room_faulty", 1)] {
        let o = habskit(&["verify", path(&corpus(name))]);
        assert_eq!(o.status.code(), Some(code), "{name}: {}{}", stdout(&o), stderr(&o));
    }
}

#[test]
fn usage_and_parse_errors() {
    assert_eq!(habskit(&["frobnicate"]).status.code(), Some(2));
    assert_eq!(habskit(&["simulate", path(&corpus("ctank")), "--horizon", "-1"]).status.code(), Some(2));
    assert_eq!(habskit(&["parse", "/nonexistent.habs"]).status.code(), Some(2));
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.habs");
    std::fs::write(&bad, "class { }").unwrap();
    let o = habskit(&["parse", bad.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("bad.habs:1:"));
}

#[test]
fn ill_formed_programs_are_diagnostics() {
    let dir = tempfile::tempdir().unwrap();
    let f = dir.path().join("wf.habs");
    std::fs::write(&f, "{ Int x = 1 < 2; }").unwrap();
    let o = habskit(&["parse", f.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("StrictInequality"));
}

#[test]
fn color_is_opt_in() {
    let o = Command::new(env!("CARGO_BIN_EXE_habskit"))
        .args(["check", path(&corpus("room_fixed"))])
        .env("HABSKIT_COLOR", "1")
        .output()
        .unwrap();
    assert!(stdout(&o).contains("\x1b[32m"));
    assert!(!stdout(&habskit(&["check", path(&corpus("room_fixed"))])).contains('\x1b'));
}
