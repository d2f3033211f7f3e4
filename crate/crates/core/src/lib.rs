//! Simulation, local planners and trajectory-quality metrics for benchmarking
//! mobile-manipulator navigation.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod geometry;
pub mod global_planner;
pub mod metrics;
pub mod planner;
pub mod world;
