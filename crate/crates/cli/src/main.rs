//! `habskit`: parse, check, emit proof obligations for, and simulate HABS
//! programs.

use std::io::{IsTerminal, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::Context;
use clap::{Args, Parser, Subcommand};
use serde_json::{json, Value as Json};

use habskit_core::ast::Program;
use habskit_core::diag::Diagnostic;
use habskit_core::dlogic::obligations;
use habskit_core::effecttype::check_program;
use habskit_core::normalize::normalize;
use habskit_core::parser::parse_program_named;
use habskit_core::pretty::pretty_print;
use habskit_core::rational::{parse_rational, Rational};
use habskit_core::runtime::{self, extract_trace, monitor_frequency, monitor_invariant, trace_csv, Outcome, Run};
use habskit_core::timeanalysis::{builtin_oracle, validate_oracle, Overrides};
use habskit_core::wellformed::validate_wellformed;

const SCHEMA: u32 = 1;

#[derive(Parser)]
#[command(name = "habskit", version, about = "Toolchain for Hybrid Active Object programs")]
struct Cli {
    /// Print the JSON report instead of the human rendering.
    #[arg(long, global = true)]
    json: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Parse a program and print it back, or its syntax errors.
    Parse { file: PathBuf },
    /// Run the delegated-control type checker.
    Check {
        file: PathBuf,
        /// Bounds file with `key = [a, b]` lines overriding the time analysis.
        #[arg(long)]
        oracle: Option<PathBuf>,
    },
    /// Write one `.kyx` file per proof obligation.
    Obligations {
        file: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Simulate the program and run the invariant and frequency monitors.
    Simulate {
        file: PathBuf,
        #[command(flatten)]
        sim: SimArgs,
    },
    /// Check, emit obligations and simulate; fails on any finding.
    Verify {
        file: PathBuf,
        #[arg(long)]
        oracle: Option<PathBuf>,
        /// Directory for the obligations; they are only generated if omitted.
        #[arg(long)]
        out: Option<PathBuf>,
        #[command(flatten)]
        sim: SimArgs,
    },
}

#[derive(Args)]
struct SimArgs {
    /// Simulation horizon, an integer or `p/q`.
    #[arg(long, value_parser = parse_horizon, default_value = "50")]
    horizon: Rational,
    /// Shuffle scheduling choices with this seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Directory to write `trace.csv` into.
    #[arg(long)]
    trace_csv: Option<PathBuf>,
    /// Print the event log.
    #[arg(long)]
    events: bool,
}

fn parse_horizon(s: &str) -> Result<Rational, String> {
    match parse_rational(s) {
        Some(q) if q > Rational::from_integer(0.into()) => Ok(q),
        Some(_) => Err("horizon must be positive".into()),
        None => Err(format!("`{s}` is not a rational number")),
    }
}

/// Exit status of a command that ran to completion.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
enum Status {
    Ok = 0,
    Findings = 1,
    Usage = 2,
}

struct Style {
    color: bool,
}

impl Style {
    fn from_env() -> Style {
        let color = match std::env::var("HABSKIT_COLOR").as_deref() {
            Ok("1") => true,
            Ok("0") => false,
            _ => std::io::stdout().is_terminal(),
        };
        Style { color }
    }

    fn paint(&self, code: &str, text: &str) -> String {
        if self.color {
            format!("\x1b[{code}m{text}\x1b[0m")
        } else {
            text.to_string()
        }
    }

    fn good(&self, text: &str) -> String {
        self.paint("32", text)
    }

    fn bad(&self, text: &str) -> String {
        self.paint("31", text)
    }
}

struct Out {
    json: bool,
    style: Style,
    file: String,
    report: serde_json::Map<String, Json>,
    lines: Vec<String>,
}

impl Out {
    fn line(&mut self, s: impl Into<String>) {
        self.lines.push(s.into());
    }

    fn set(&mut self, key: &str, v: Json) {
        self.report.insert(key.into(), v);
    }

    fn diagnostics(&mut self, diags: &[Diagnostic]) {
        for d in diags {
            eprintln!("{}", d.render(&self.file));
        }
        let all = self.report.entry("diagnostics").or_insert_with(|| json!([]));
        all.as_array_mut().unwrap().extend(diags.iter().map(|d| serde_json::to_value(d).unwrap()));
    }

    fn finish(mut self, status: Status) -> ExitCode {
        let mut stdout = std::io::stdout().lock();
        let _ = if self.json {
            self.report.insert("exit".into(), json!(status as u8));
            writeln!(stdout, "{}", serde_json::to_string_pretty(&Json::Object(self.report)).unwrap())
        } else {
            self.lines.iter().try_for_each(|l| writeln!(stdout, "{l}"))
        };
        ExitCode::from(status as u8)
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { Status::Usage as u8 } else { 0 });
        }
    };
    let (name, file) = match &cli.command {
        Command::Parse { file } => ("parse", file),
        Command::Check { file, .. } => ("check", file),
        Command::Obligations { file, .. } => ("obligations", file),
        Command::Simulate { file, .. } => ("simulate", file),
        Command::Verify { file, .. } => ("verify", file),
    };
    let mut out = Out {
        json: cli.json,
        style: Style::from_env(),
        file: file.display().to_string(),
        report: serde_json::Map::new(),
        lines: Vec::new(),
    };
    out.set("schema", json!(SCHEMA));
    out.set("command", json!(name));
    out.set("file", json!(out.file));
    let status = match dispatch(&cli.command, &mut out) {
        Ok(s) => s,
        Err(e) => {
            eprintln!("habskit: {e:#}");
            out.set("error", json!(format!("{e:#}")));
            Status::Usage
        }
    };
    out.finish(status)
}

fn dispatch(cmd: &Command, out: &mut Out) -> anyhow::Result<Status> {
    match cmd {
        Command::Parse { file } => {
            let Some(p) = load(file, out)? else { return Ok(Status::Usage) };
            let text = pretty_print(&p);
            out.set("program", json!(text));
            out.line(text.trim_end());
            Ok(wellformed(&p, out))
        }
        Command::Check { file, oracle } => {
            let Some(p) = load(file, out)? else { return Ok(Status::Usage) };
            let overrides = read_overrides(oracle.as_deref())?;
            if wellformed(&p, out) != Status::Ok {
                return Ok(Status::Findings);
            }
            Ok(check(&p, &overrides, out))
        }
        Command::Obligations { file, out: dir } => {
            let Some(p) = load(file, out)? else { return Ok(Status::Usage) };
            if wellformed(&p, out) != Status::Ok {
                return Ok(Status::Findings);
            }
            emit(&p, Some(dir), out)
        }
        Command::Simulate { file, sim } => {
            let Some(p) = load(file, out)? else { return Ok(Status::Usage) };
            if wellformed(&p, out) != Status::Ok {
                return Ok(Status::Findings);
            }
            simulate(&p, sim, out)
        }
        Command::Verify { file, oracle, out: dir, sim } => {
            let Some(p) = load(file, out)? else { return Ok(Status::Usage) };
            let overrides = read_overrides(oracle.as_deref())?;
            if wellformed(&p, out) != Status::Ok {
                return Ok(Status::Findings);
            }
            let typing = check(&p, &overrides, out);
            let emitted = emit(&p, dir.as_deref(), out)?;
            let simulated = simulate(&p, sim, out)?;
            let oracle_ok = oracle_validity(&p, &overrides, sim, out);
            let status = typing.max(emitted).max(simulated).max(oracle_ok);
            let verdict = if status == Status::Ok { out.style.good("verified") } else { out.style.bad("not verified") };
            out.line(verdict);
            out.set("verified", json!(status == Status::Ok));
            Ok(status)
        }
    }
}

fn load(file: &Path, out: &mut Out) -> anyhow::Result<Option<Program>> {
    let text = std::fs::read_to_string(file).with_context(|| format!("cannot read {}", file.display()))?;
    match parse_program_named(&out.file, &text) {
        Ok(p) => Ok(Some(p)),
        Err(e) => {
            eprintln!("{e}");
            out.set("parse_error", json!({ "line": e.span.line, "col": e.span.col, "message": e.to_string() }));
            Ok(None)
        }
    }
}

fn read_overrides(file: Option<&Path>) -> anyhow::Result<Overrides> {
    let Some(file) = file else { return Ok(Overrides::default()) };
    let text = std::fs::read_to_string(file).with_context(|| format!("cannot read {}", file.display()))?;
    Overrides::parse(&text).with_context(|| file.display().to_string())
}

fn findings(diags: &[Diagnostic]) -> Status {
    if diags.iter().any(Diagnostic::is_error) {
        Status::Findings
    } else {
        Status::Ok
    }
}

fn wellformed(p: &Program, out: &mut Out) -> Status {
    let diags = validate_wellformed(p);
    out.diagnostics(&diags);
    findings(&diags)
}

fn check(p: &Program, overrides: &Overrides, out: &mut Out) -> Status {
    let n = normalize(p);
    out.diagnostics(&n.diagnostics);
    let oracle = builtin_oracle(&n.program, overrides);
    out.diagnostics(&oracle.diagnostics);
    let report = check_program(&n.program, &oracle);
    out.diagnostics(&report.diagnostics);
    for m in &report.methods {
        let mark = if m.accepted { out.style.good("ok") } else { out.style.bad("rejected") };
        out.line(format!("{mark:>8}  {}", m.method));
    }
    let status = findings(&n.diagnostics).max(findings(&oracle.diagnostics)).max(findings(&report.diagnostics));
    let accepted = status == Status::Ok;
    out.line(if accepted { out.style.good("well-typed") } else { out.style.bad("ill-typed") });
    out.set("typing", json!({ "accepted": accepted, "methods": report.methods }));
    status
}

fn emit(p: &Program, dir: Option<&Path>, out: &mut Out) -> anyhow::Result<Status> {
    let obl = obligations(p);
    out.diagnostics(&obl.diagnostics);
    let mut status = findings(&obl.diagnostics);
    if let Some(dir) = dir {
        std::fs::create_dir_all(dir).with_context(|| format!("cannot create {}", dir.display()))?;
    }
    let mut written = Vec::new();
    for o in &obl.items {
        match o.to_kyx() {
            Ok(text) => {
                if let Some(dir) = dir {
                    let path = dir.join(format!("{}.kyx", o.name));
                    std::fs::write(&path, text).with_context(|| format!("cannot write {}", path.display()))?;
                    out.line(format!("wrote {}", path.display()));
                } else {
                    out.line(format!("obligation {}", o.name));
                }
                written.push(json!(o.name));
            }
            Err(e) => {
                let d = Diagnostic::error("UnsupportedSort", e.to_string());
                out.diagnostics(std::slice::from_ref(&d));
                status = Status::Findings;
            }
        }
    }
    out.set("obligations", json!(written));
    Ok(status)
}

fn outcome_text(run: &Run) -> String {
    match &run.outcome {
        Outcome::Horizon => format!("horizon reached at clock={}", run.clock),
        Outcome::Terminated => format!("terminated at clock={}", run.clock),
        Outcome::Failed(e) => format!("failed at clock={}: {e}", run.clock),
    }
}

fn simulate(p: &Program, args: &SimArgs, out: &mut Out) -> anyhow::Result<Status> {
    let run = runtime::run(p, &args.horizon, args.seed);
    let mut status = Status::Ok;
    if args.events {
        for e in &run.events {
            out.line(e.to_string());
        }
    }
    if let Some(dir) = &args.trace_csv {
        std::fs::create_dir_all(dir).with_context(|| format!("cannot create {}", dir.display()))?;
        let path = dir.join("trace.csv");
        std::fs::write(&path, trace_csv(&run)).with_context(|| format!("cannot write {}", path.display()))?;
        out.line(format!("wrote {}", path.display()));
    }
    let summary = outcome_text(&run);
    if run.error().is_some() {
        status = Status::Findings;
        out.line(out.style.bad(&summary));
    } else {
        out.line(format!("{summary} ({} steps)", run.steps));
    }

    let mut invariants = Vec::new();
    for c in &p.classes {
        let Some(inv) = &c.invariant else { continue };
        for id in run.objects_of(&c.name) {
            let trace = extract_trace(&run, id).expect("object listed by the run");
            match monitor_invariant(&trace, inv) {
                Ok(v) if v.holds => {
                    out.line(format!("{}: {}:{id}", out.style.good("invariant holds"), c.name));
                    invariants.push(json!({ "object": id.to_string(), "class": c.name, "holds": true }));
                }
                Ok(v) => {
                    let at = v.first_violation.map(|q| q.to_string()).unwrap_or_default();
                    out.line(format!("{}: {}:{id} at clock={at}", out.style.bad("invariant violated"), c.name));
                    invariants.push(json!({ "object": id.to_string(), "class": c.name, "holds": false, "first_violation": at }));
                    status = Status::Findings;
                }
                Err(e) => {
                    out.line(format!("{}: {}:{id}: {e}", out.style.bad("invariant not monitorable"), c.name));
                    invariants.push(json!({ "object": id.to_string(), "class": c.name, "error": e.to_string() }));
                    status = Status::Findings;
                }
            }
        }
    }

    let freq = monitor_frequency(&run, p);
    for v in &freq {
        let next = v.next.as_ref().map(|q| format!(", next call at clock={q}")).unwrap_or_default();
        out.line(format!(
            "{}: {}.{} on {} not called between clock={} and clock={}{next}",
            out.style.bad("frequency violation"),
            v.class,
            v.method,
            v.object,
            v.last,
            v.deadline
        ));
        status = Status::Findings;
    }
    if freq.is_empty() {
        out.line(format!("{}: no violations", out.style.good("frequency")));
    }

    out.set(
        "simulation",
        json!({
            "horizon": args.horizon.to_string(),
            "seed": args.seed,
            "clock": run.clock.to_string(),
            "outcome": match &run.outcome {
                Outcome::Horizon => json!("horizon"),
                Outcome::Terminated => json!("terminated"),
                Outcome::Failed(e) => json!({ "failed": e }),
            },
            "steps": run.steps,
            "events": run.events,
            "invariants": invariants,
            "frequency_violations": freq,
        }),
    );
    Ok(status)
}

/// Replays the normalized program and compares the measured times with the
/// bounds the type checker relied on.
fn oracle_validity(p: &Program, overrides: &Overrides, args: &SimArgs, out: &mut Out) -> Status {
    let n = normalize(p).program;
    let oracle = builtin_oracle(&n, overrides);
    let run = runtime::run(&n, &args.horizon, args.seed);
    let found = validate_oracle(&oracle, &run);
    for v in &found {
        let at = v.node.map(|n| format!(" statement {}", n.0)).unwrap_or_default();
        out.line(format!(
            "{}: {}{at} took {} (bounds {}), {} time(s)",
            out.style.bad("time bound violated"),
            v.context,
            v.measured,
            v.bounds,
            v.count
        ));
    }
    if found.is_empty() {
        out.line(format!("{}: all measured times within bounds", out.style.good("time analysis")));
    }
    out.set("oracle_violations", json!(found));
    if found.is_empty() {
        Status::Ok
    } else {
        Status::Findings
    }
}
