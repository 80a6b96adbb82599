//! Experiment harness for the sketch library: seeded drivers that turn
//! the error-distribution studies into self-describing CSV artifacts,
//! shared by the `pcs` binary and the test suites.

pub mod experiments;
