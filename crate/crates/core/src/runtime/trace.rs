//! Per-object traces and suspension-subtraces.

use std::collections::BTreeMap;
use std::fmt::Write;

use serde::Serialize;

use super::*;
use crate::ast::MethodRef;
use crate::rational::{self, Rational};

/// Piecewise-affine trajectory of one object, from its creation to the end
/// of the run, in absolute clock time.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Trace {
    pub object: ObjId,
    pub class: String,
    #[serde(serialize_with = "rational::serialize")]
    pub created: Rational,
    pub segments: Vec<Segment>,
    #[serde(skip)]
    proc_events: Vec<ProcEvent>,
}

impl Trace {
    /// Field valuation at time `t`: the final configuration when several
    /// discrete steps happen at `t`; `None` before creation or after the run.
    pub fn at(&self, t: &Rational) -> Option<BTreeMap<String, Rational>> {
        let seg = self.segments.iter().rev().find(|s| s.start <= *t && *t <= s.end)?;
        Some(seg.values.keys().map(|k| (k.clone(), seg.value_at(k, t).unwrap())).collect())
    }

    pub fn value(&self, field: &str, t: &Rational) -> Option<Rational> {
        self.at(t)?.remove(field)
    }

    /// Times at which a discrete step may have changed the state.
    pub fn breakpoints(&self) -> Vec<Rational> {
        let mut out: Vec<Rational> = self.segments.iter().map(|s| s.start.clone()).collect();
        out.dedup();
        out
    }

    /// The trace restricted to `[from, to]`.
    pub fn slice(&self, from: &Rational, to: &Rational) -> Vec<Segment> {
        self.segments
            .iter()
            .filter(|s| s.end >= *from && s.start <= *to)
            .filter(|s| s.start < *to || from == to || s.start == s.end && s.start == *to && from == to)
            .map(|s| {
                let start = s.start.clone().max(from.clone());
                let values = s.values.keys().map(|k| (k.clone(), s.value_at(k, &start).unwrap())).collect();
                Segment { object: s.object, start, end: s.end.clone().min(to.clone()), values, slopes: s.slopes.clone() }
            })
            .collect()
    }
}

pub fn extract_trace(run: &Run, object: ObjId) -> Result<Trace, SimError> {
    let info = run.object(object).ok_or(SimError::UnknownObject(object))?;
    Ok(Trace {
        object,
        class: info.class.clone(),
        created: info.created.clone(),
        segments: run.segments.iter().filter(|s| s.object == object).cloned().collect(),
        proc_events: run.proc_events.iter().filter(|e| e.object == object).cloned().collect(),
    })
}

/// The part of a trace between a process of `method` suspending or
/// terminating and the next scheduling on the same object.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Subtrace {
    pub object: ObjId,
    pub method: MethodRef,
    #[serde(serialize_with = "rational::serialize")]
    pub start: Rational,
    #[serde(serialize_with = "rational::serialize")]
    pub end: Rational,
    pub segments: Vec<Segment>,
}

impl Subtrace {
    pub fn duration(&self) -> Rational {
        &self.end - &self.start
    }

    /// Valuation at local clock `t`, which is 0 at the suspension.
    pub fn at_local(&self, t: &Rational) -> Option<BTreeMap<String, Rational>> {
        let abs = &self.start + t;
        let seg = self.segments.iter().rev().find(|s| s.start <= abs && abs <= s.end)?;
        Some(seg.values.keys().map(|k| (k.clone(), seg.value_at(k, &abs).unwrap())).collect())
    }
}

/// Non-trivial suspension-subtraces of `method` (`init` for the init
/// block). Subtraces still open when the run ends are omitted.
pub fn suspension_subtraces(trace: &Trace, method: &str) -> Vec<Subtrace> {
    let ev = &trace.proc_events;
    let mut out = Vec::new();
    for (k, e) in ev.iter().enumerate() {
        if e.kind == ProcEventKind::Schedule || e.method.method != method {
            continue;
        }
        let Some(next) = ev[k + 1..].iter().find(|n| n.kind == ProcEventKind::Schedule) else { continue };
        if next.clock > e.clock {
            out.push(Subtrace {
                object: trace.object,
                method: e.method.clone(),
                start: e.clock.clone(),
                end: next.clock.clone(),
                segments: trace.slice(&e.clock, &next.clock),
            });
        }
    }
    out
}

/// CSV export: one row per object, numeric field and segment.
pub fn trace_csv(run: &Run) -> String {
    let mut out = String::from("object,field,t_start,value_start,slope,t_end\n");
    for s in &run.segments {
        for (k, v) in &s.values {
            let slope = s.slopes.get(k).cloned().unwrap_or_else(crate::rational::zero);
            writeln!(out, "{},{k},{},{v},{slope},{}", s.object, s.start, s.end).unwrap();
        }
    }
    out
}
