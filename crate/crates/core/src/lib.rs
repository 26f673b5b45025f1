//! Exponential time integrators for stiff ODE systems, with hybrid
//! trace/field stepping, a φ-function action kernel, and a convergence
//! benchmark harness.

pub mod cli;
pub mod dense;
pub mod harness;
pub mod integrators;
pub mod model;
pub mod operator;
pub mod phi;
pub mod problems;
