//! Speculative-worker transient management for switched IIR filters.
//!
//! A switching function `g` selects one of two filters. Before `g` crosses
//! zero, a linear predictor starts the incoming filter on a second worker so
//! its startup transient has decayed by the time it takes over. The crate
//! contains the filters ([`filter`]), the predictor and supervisor state
//! machine ([`switching`]), lockstep and threaded executors ([`runtime`]) and
//! the filter-bank experiment harness ([`experiment`]).

pub mod experiment;
pub mod filter;
pub mod runtime;
pub mod switching;
