//! Runtime monitors: class invariants over traces and call frequencies.

use serde::Serialize;

use super::*;
use crate::ast::{Expr, Program};
use crate::rational::{self, Rational};

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Verdict {
    pub object: ObjId,
    pub holds: bool,
    /// Earliest time at which the invariant is false (an infimum when the
    /// violation set is open).
    #[serde(serialize_with = "rational::serialize_opt")]
    pub first_violation: Option<Rational>,
}

/// Checks `inv` exactly on every affine segment of the trace.
pub fn monitor_invariant(trace: &Trace, inv: &Expr) -> Result<Verdict, SimError> {
    for s in &trace.segments {
        let st = MapValuation {
            values: s.values.iter().map(|(k, v)| (k.clone(), Value::Num(v.clone()))).collect(),
            slopes: s.slopes.clone(),
            clock: s.start.clone(),
        };
        let holds = sat(inv, &st).map_err(|e| match e {
            SimError::NonAffineDynamics(m) => SimError::NonAffineInvariant(m),
            e => e,
        })?;
        let bad = holds.complement().intersect(&TimeSet::upto(&s.end - &s.start));
        if let Some((t, _)) = bad.inf() {
            return Ok(Verdict { object: trace.object, holds: false, first_violation: Some(&s.start + t) });
        }
    }
    Ok(Verdict { object: trace.object, holds: true, first_violation: None })
}

/// A window of length `treq` without a call of the controlled method.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct FrequencyViolation {
    pub object: ObjId,
    pub class: String,
    pub method: String,
    #[serde(serialize_with = "rational::serialize")]
    pub treq: Rational,
    /// The previous call, or the creation of the object.
    #[serde(serialize_with = "rational::serialize")]
    pub last: Rational,
    /// `last + treq`, the latest time the next call was due.
    #[serde(serialize_with = "rational::serialize")]
    pub deadline: Rational,
    #[serde(serialize_with = "rational::serialize_opt")]
    pub next: Option<Rational>,
}

/// Every object with a `timed_requires l` method must receive a call of it
/// at most `l` after its creation and after every previous call. The last
/// window before the end of the run is not checked.
pub fn monitor_frequency(run: &Run, program: &Program) -> Vec<FrequencyViolation> {
    let end = match run.outcome {
        Outcome::Terminated => run.horizon.clone().max(run.clock.clone()),
        _ => run.clock.clone(),
    };
    let mut out = Vec::new();
    for o in &run.objects {
        let Some(class) = program.class(&o.class) else { continue };
        for m in &class.methods {
            let Some(treq) = &m.contract.timed_requires else { continue };
            let mut last = o.created.clone();
            let calls = run.messages.iter().filter(|x| x.target == o.id && x.method == m.name).map(|x| &x.clock);
            let violation = |last: &Rational, next: Option<&Rational>| FrequencyViolation {
                object: o.id,
                class: class.name.clone(),
                method: m.name.clone(),
                treq: treq.clone(),
                last: last.clone(),
                deadline: last + treq,
                next: next.cloned(),
            };
            for t in calls {
                if t - &last > *treq {
                    out.push(violation(&last, Some(t)));
                }
                last = t.clone();
            }
            if &end - &last > *treq {
                out.push(violation(&last, None));
            }
        }
    }
    out
}
