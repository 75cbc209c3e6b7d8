//! Reference solvers and the acceptance suite for the commitment solver.
//!
//! The library half holds an exact rational simplex and the property checks
//! shared with the core crate's tests; the acceptance suite lives in `tests/`.

pub mod checks;
pub mod exact_lp;
