//! Arbitrary-order ADER-DG time integration for first-order ODE systems.

pub mod arith;
pub mod basis;
pub mod linalg;
pub mod tableau;
pub mod solver;
pub mod problems;
pub mod analysis;
