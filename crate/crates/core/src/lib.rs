//! Toolchain for hybrid active objects: parsing, normalization, timed-control
//! typing, dL obligations and simulation.

#![allow(clippy::result_large_err)]

pub mod ast;
pub mod counting;
pub mod diag;
pub mod parser;
pub mod pretty;
pub mod rational;
pub mod scope;
pub mod wellformed;
pub mod normalize;
pub mod timeanalysis;
pub mod effecttype;
pub mod dlogic;
pub mod runtime;
