//! Backward-Euler time stepping with Newton's method.

pub mod linear;
pub mod newton;
mod time_loop;

pub use linear::{linear_solve, LinearMethod, LinearOptions, LinearSolveInfo};
pub use newton::{newton_solve, NewtonOptions, StepFailure, TimeStepRecord};
pub use time_loop::{time_loop, StepCallback, StepControl, TimeLoopOptions, Trajectory};
