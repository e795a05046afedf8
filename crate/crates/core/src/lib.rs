#![allow(clippy::needless_range_loop, clippy::neg_cmp_op_on_partial_ord)]

pub mod amr;
pub mod error;
pub mod estimator;
pub mod fem;
pub mod harness;
pub mod io;
pub mod mesh;
pub mod model;
pub mod solver;
pub mod vec3;

pub use error::{Error, Result};
