//! Deterministic simulation of the timed semantics, with trace extraction
//! and the runtime monitors.

mod eval;
mod monitor;
mod sim;
mod trace;

use std::fmt;

use serde::Serialize;
use thiserror::Error;

use crate::ast::{MethodRef, NodeId};
use crate::rational::{self, zero, Rational};

pub use eval::{
    affine, eval, mte_diff, mte_guard, sat, sat_cmp, sol, Affine, DcId, Fid, Interval, MapValuation, ObjId, TimeSet,
    Valuation, Value,
};
pub use monitor::{monitor_frequency, monitor_invariant, FrequencyViolation, Verdict};
pub use sim::{resource_step, run, DeploymentComponent, ResourceOutcome, Simulator, STEP_LIMIT};
pub use trace::{extract_trace, suspension_subtraces, trace_csv, Subtrace, Trace};

#[derive(Clone, Debug, PartialEq, Eq, Error, Serialize)]
pub enum SimError {
    #[error("deadlock at clock {clock}: a get blocks and nothing else can happen")]
    DeadlockDetected {
        #[serde(serialize_with = "rational::serialize")]
        clock: Rational,
    },
    #[error("more than {STEP_LIMIT} discrete steps without time advancing at clock {clock}")]
    TimeConvergentRun {
        #[serde(serialize_with = "rational::serialize")]
        clock: Rational,
    },
    #[error("dynamics are not piecewise affine: {0}")]
    NonAffineDynamics(String),
    #[error("invariant is not affine in the fields: {0}")]
    NonAffineInvariant(String),
    #[error("cost {cost} exceeds the capacity {capacity} of {dc}")]
    CostExceedsCapacity {
        dc: DcId,
        #[serde(serialize_with = "rational::serialize")]
        cost: Rational,
        #[serde(serialize_with = "rational::serialize")]
        capacity: Rational,
    },
    #[error("unknown object {0}")]
    UnknownObject(ObjId),
    #[error("runtime error: {0}")]
    Runtime(String),
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Outcome {
    #[default]
    Horizon,
    Terminated,
    Failed(SimError),
}

/// One line of the event log.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Event {
    #[serde(serialize_with = "rational::serialize")]
    pub clock: Rational,
    #[serde(rename = "event")]
    pub text: String,
}

impl fmt::Display for Event {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "clock={} {}", self.clock, self.text)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct ObjectInfo {
    pub id: ObjId,
    pub class: String,
    #[serde(serialize_with = "rational::serialize")]
    pub created: Rational,
}

/// `msg(o, m, ē, fid)` as emitted by a call.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct MsgRecord {
    #[serde(serialize_with = "rational::serialize")]
    pub clock: Rational,
    pub caller: ObjId,
    pub target: ObjId,
    pub class: String,
    pub method: String,
    pub fid: Fid,
    pub site: Option<NodeId>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct FutRecord {
    pub fid: Fid,
    pub method: MethodRef,
    pub target: ObjId,
    pub site: Option<NodeId>,
    #[serde(serialize_with = "rational::serialize")]
    pub called: Rational,
    #[serde(serialize_with = "rational::serialize_opt")]
    pub resolved: Option<Rational>,
}

/// Start and end time of one execution of a statement.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct StmtTiming {
    pub object: ObjId,
    pub fid: Option<Fid>,
    pub method: MethodRef,
    /// Call site of the process, for context lookup.
    pub site: Option<NodeId>,
    pub node: NodeId,
    #[serde(serialize_with = "rational::serialize")]
    pub start: Rational,
    #[serde(serialize_with = "rational::serialize")]
    pub end: Rational,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ProcEventKind {
    Schedule,
    Suspend,
    Terminate,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct ProcEvent {
    pub object: ObjId,
    #[serde(serialize_with = "rational::serialize")]
    pub clock: Rational,
    pub kind: ProcEventKind,
    pub method: MethodRef,
}

/// An object's numeric fields evolving affinely over `[start, end]`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Segment {
    pub object: ObjId,
    #[serde(serialize_with = "rational::serialize")]
    pub start: Rational,
    #[serde(serialize_with = "rational::serialize")]
    pub end: Rational,
    #[serde(serialize_with = "ser_map")]
    pub values: std::collections::BTreeMap<String, Rational>,
    #[serde(serialize_with = "ser_map")]
    pub slopes: std::collections::BTreeMap<String, Rational>,
}

fn ser_map<S: serde::Serializer>(m: &std::collections::BTreeMap<String, Rational>, s: S) -> Result<S::Ok, S::Error> {
    s.collect_map(m.iter().map(|(k, v)| (k, v.to_string())))
}

impl Segment {
    /// Value of a field at absolute time `t` within the segment.
    pub fn value_at(&self, field: &str, t: &Rational) -> Option<Rational> {
        let v = self.values.get(field)?;
        let s = self.slopes.get(field).cloned().unwrap_or_else(zero);
        Some(v + s * (t - &self.start))
    }
}

/// A finished simulation.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize)]
pub struct Run {
    #[serde(serialize_with = "rational::serialize")]
    pub horizon: Rational,
    /// Clock of the final configuration.
    #[serde(serialize_with = "rational::serialize")]
    pub clock: Rational,
    pub outcome: Outcome,
    pub steps: usize,
    pub events: Vec<Event>,
    pub objects: Vec<ObjectInfo>,
    pub messages: Vec<MsgRecord>,
    pub futures: Vec<FutRecord>,
    pub timings: Vec<StmtTiming>,
    pub proc_events: Vec<ProcEvent>,
    pub segments: Vec<Segment>,
}

impl Run {
    pub fn error(&self) -> Option<&SimError> {
        match &self.outcome {
            Outcome::Failed(e) => Some(e),
            _ => None,
        }
    }

    /// The event log, one `clock=<p/q> <event>` line per event.
    pub fn event_log(&self) -> String {
        self.events.iter().map(|e| format!("{e}\n")).collect()
    }

    pub fn object(&self, id: ObjId) -> Option<&ObjectInfo> {
        self.objects.iter().find(|o| o.id == id)
    }

    pub fn objects_of(&self, class: &str) -> Vec<ObjId> {
        self.objects.iter().filter(|o| o.class == class).map(|o| o.id).collect()
    }
}
