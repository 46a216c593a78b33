//! Simulation, learning and control toolkit for hysteresis compensation of a
//! tendon-driven dual-segment continuum manipulator.

// `!(x > 0.0)` style checks reject NaN along with out-of-range values.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cable;
pub mod compensate;
pub mod config;
pub mod dataset;
pub mod eval;
pub mod kinematics;
pub mod learn;
pub mod perception;
pub mod plant;
pub mod rng;
pub mod run;
pub mod stats;
