//! Benchmark campaigns for mobile-manipulator local planners: built-in worlds, seeded
//! trials, results-table summaries and log ingestion for externally recorded runs.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod campaign;
pub mod config;
pub mod io;
pub mod scenario;
pub mod trial;
