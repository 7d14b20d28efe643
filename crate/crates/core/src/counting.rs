//! The counting framework: exact rationals extended with both infinities.

use std::cmp::Ordering;
use std::fmt;
use std::str::FromStr;

use serde::{Serialize, Serializer};
use thiserror::Error;

use crate::rational::{parse_rational, zero, Rational};

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum CountExpr {
    NegInf,
    Finite(Rational),
    PosInf,
}

#[derive(Clone, Debug, PartialEq, Eq, Error)]
#[error("indeterminate form {left} - {right}")]
pub struct IndeterminateForm {
    pub left: CountExpr,
    pub right: CountExpr,
}

impl CountExpr {
    pub fn finite(q: Rational) -> Self {
        CountExpr::Finite(q)
    }

    pub fn int(n: i64) -> Self {
        CountExpr::Finite(crate::rational::int(n))
    }

    pub fn zero() -> Self {
        CountExpr::Finite(zero())
    }

    pub fn as_finite(&self) -> Option<&Rational> {
        match self {
            CountExpr::Finite(q) => Some(q),
            _ => None,
        }
    }

    pub fn sub(&self, other: &CountExpr) -> Result<CountExpr, IndeterminateForm> {
        use CountExpr::*;
        match (self, other) {
            (Finite(a), Finite(b)) => Ok(Finite(a - b)),
            (PosInf, PosInf) | (NegInf, NegInf) => Err(IndeterminateForm {
                left: self.clone(),
                right: other.clone(),
            }),
            (PosInf, _) => Ok(PosInf),
            (NegInf, _) => Ok(NegInf),
            (Finite(_), PosInf) => Ok(NegInf),
            (Finite(_), NegInf) => Ok(PosInf),
        }
    }

    pub fn add(&self, other: &CountExpr) -> Result<CountExpr, IndeterminateForm> {
        use CountExpr::*;
        match (self, other) {
            (Finite(a), Finite(b)) => Ok(Finite(a + b)),
            (PosInf, NegInf) | (NegInf, PosInf) => Err(IndeterminateForm {
                left: self.clone(),
                right: other.clone(),
            }),
            (PosInf, _) | (_, PosInf) => Ok(PosInf),
            (NegInf, _) | (_, NegInf) => Ok(NegInf),
        }
    }

    pub fn is_infty(&self) -> bool {
        matches!(self, CountExpr::PosInf)
    }

    /// True for finite values `>= 0` and for `+inf` ("positive or null").
    pub fn is_positive(&self) -> bool {
        match self {
            CountExpr::Finite(q) => *q >= zero(),
            CountExpr::PosInf => true,
            CountExpr::NegInf => false,
        }
    }

    /// Lesser of the two.
    pub fn meet(&self, other: &CountExpr) -> CountExpr {
        if self.leq(other) {
            self.clone()
        } else {
            other.clone()
        }
    }

    /// Greater of the two.
    pub fn join(&self, other: &CountExpr) -> CountExpr {
        if self.leq(other) {
            other.clone()
        } else {
            self.clone()
        }
    }

    pub fn leq(&self, other: &CountExpr) -> bool {
        self <= other
    }

    /// Clamps negative values to zero.
    pub fn clamp_nonneg(&self) -> CountExpr {
        self.join(&CountExpr::zero())
    }

    fn rank(&self) -> u8 {
        match self {
            CountExpr::NegInf => 0,
            CountExpr::Finite(_) => 1,
            CountExpr::PosInf => 2,
        }
    }
}

impl Ord for CountExpr {
    fn cmp(&self, other: &Self) -> Ordering {
        match (self, other) {
            (CountExpr::Finite(a), CountExpr::Finite(b)) => a.cmp(b),
            _ => self.rank().cmp(&other.rank()),
        }
    }
}

impl PartialOrd for CountExpr {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl From<Rational> for CountExpr {
    fn from(q: Rational) -> Self {
        CountExpr::Finite(q)
    }
}

impl fmt::Display for CountExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CountExpr::NegInf => f.write_str("-inf"),
            CountExpr::Finite(q) => write!(f, "{q}"),
            CountExpr::PosInf => f.write_str("inf"),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Error)]
#[error("invalid counting expression `{0}`")]
pub struct BadCountExpr(pub String);

impl FromStr for CountExpr {
    type Err = BadCountExpr;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim() {
            "inf" | "+inf" => Ok(CountExpr::PosInf),
            "-inf" => Ok(CountExpr::NegInf),
            other => parse_rational(other)
                .map(CountExpr::Finite)
                .ok_or_else(|| BadCountExpr(s.to_string())),
        }
    }
}

impl Serialize for CountExpr {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_string())
    }
}

/// An execution-time interval `[min, max]`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize)]
pub struct TimeBounds {
    pub min: CountExpr,
    pub max: CountExpr,
}

impl TimeBounds {
    pub fn new(min: CountExpr, max: CountExpr) -> Self {
        TimeBounds { min, max }
    }

    pub fn exact(v: CountExpr) -> Self {
        TimeBounds { min: v.clone(), max: v }
    }

    pub fn zero() -> Self {
        TimeBounds::exact(CountExpr::zero())
    }

    pub fn unknown() -> Self {
        TimeBounds::new(CountExpr::zero(), CountExpr::PosInf)
    }

    pub fn never() -> Self {
        TimeBounds::exact(CountExpr::PosInf)
    }

    /// Sequential composition. Both operands are nonnegative so no
    /// indeterminate form can arise.
    pub fn then(&self, other: &TimeBounds) -> TimeBounds {
        TimeBounds {
            min: self.min.add(&other.min).unwrap_or(CountExpr::PosInf),
            max: self.max.add(&other.max).unwrap_or(CountExpr::PosInf),
        }
    }

    pub fn hull(&self, other: &TimeBounds) -> TimeBounds {
        TimeBounds {
            min: self.min.meet(&other.min),
            max: self.max.join(&other.max),
        }
    }

    pub fn contains(&self, v: &CountExpr) -> bool {
        self.min.leq(v) && v.leq(&self.max)
    }

    pub fn is_well_formed(&self) -> bool {
        self.min.leq(&self.max) && self.min.is_positive()
    }
}

impl fmt::Display for TimeBounds {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{}, {}]", self.min, self.max)
    }
}
