#![allow(dead_code)]

pub mod oracle;

pub use invadapt::harness::verify::random_state;
