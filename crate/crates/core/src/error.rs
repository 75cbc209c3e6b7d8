use thiserror::Error;

use crate::model::{StateActionKey, Violation};

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("parse error at line {line}, column {column}: {message}")]
    Parse {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("invalid model: {}", join_violations(.0))]
    Invalid(Vec<Violation>),
    #[error("index out of bounds: {0}")]
    OutOfBounds(String),
}

fn join_violations(v: &[Violation]) -> String {
    v.iter().map(ToString::to_string).collect::<Vec<_>>().join("; ")
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LpError {
    #[error("malformed program: {0}")]
    InvalidProgram(String),
    #[error("numerical failure after {iterations} iterations: {reason}")]
    NumericalFailure { iterations: usize, reason: String },
}

/// Errors raised by the solver, policy, oracle and learning layers.
#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("lp failure at step {h}, key {key}: {source}")]
    Lp {
        h: usize,
        key: StateActionKey,
        #[source]
        source: LpError,
    },
    #[error(transparent)]
    LpRaw(#[from] LpError),
    #[error("no value polytope for step {h}, key {key}")]
    MissingPolytope { h: usize, key: StateActionKey },
    #[error("empty inducible set at step {h}, key {key}")]
    EmptyInducibleSet { h: usize, key: StateActionKey },
    #[error("target ({}) is not inducible: max constraint violation {violation:e}", fmt_vec(.target))]
    InfeasibleTarget { target: Vec<f64>, violation: f64 },
    #[error("enumeration needs about {estimated} nodes, budget is {budget}; shrink the instance or raise the budget")]
    BudgetExceeded { estimated: u64, budget: u64 },
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

fn fmt_vec(v: &[f64]) -> String {
    v.iter().map(|x| format!("{x}")).collect::<Vec<_>>().join(", ")
}

impl Error {
    /// True for errors caused by bad inputs rather than numerics.
    pub fn is_input_error(&self) -> bool {
        matches!(
            self,
            Error::Model(_) | Error::InvalidArgument(_) | Error::BudgetExceeded { .. } | Error::InfeasibleTarget { .. }
        )
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
