use std::fmt;
use std::process::ExitCode;

use fxqubo::bench::BenchError;
use fxqubo::model::ModelError;
use fxqubo::oracle::OracleError;
use fxqubo::qubo::QuboError;
use fxqubo::rates::RateError;
use fxqubo::solvers::SolverError;

/// A failed command, carrying the exit status it maps to.
#[derive(Debug)]
pub enum Failure {
    /// Bad flags or parameter values (exit 1).
    Usage(String),
    /// Reading or writing a file failed (exit 2).
    Io(String),
    /// The best sample violates a constraint (exit 3).
    Infeasible,
}

impl Failure {
    pub fn usage(msg: impl fmt::Display) -> Self {
        Failure::Usage(msg.to_string())
    }

    pub fn io(context: impl fmt::Display, err: impl fmt::Display) -> Self {
        Failure::Io(format!("{context}: {err}"))
    }

    pub fn exit_code(&self) -> ExitCode {
        ExitCode::from(match self {
            Failure::Usage(_) => 1,
            Failure::Io(_) => 2,
            Failure::Infeasible => 3,
        })
    }
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Failure::Usage(m) | Failure::Io(m) => f.write_str(m),
            Failure::Infeasible => f.write_str("best sample is infeasible"),
        }
    }
}

impl From<QuboError> for Failure {
    fn from(e: QuboError) -> Self {
        match e {
            QuboError::Io(io) => Failure::Io(io.to_string()),
            other => Failure::usage(other),
        }
    }
}

impl From<RateError> for Failure {
    fn from(e: RateError) -> Self {
        match e {
            RateError::Io(io) => Failure::Io(io.to_string()),
            other => Failure::usage(other),
        }
    }
}

impl From<ModelError> for Failure {
    fn from(e: ModelError) -> Self {
        match e {
            ModelError::Qubo(q) => q.into(),
            other => Failure::usage(other),
        }
    }
}

impl From<SolverError> for Failure {
    fn from(e: SolverError) -> Self {
        match e {
            SolverError::Qubo(q) => q.into(),
            other => Failure::usage(other),
        }
    }
}

impl From<BenchError> for Failure {
    fn from(e: BenchError) -> Self {
        match e {
            BenchError::Io(io) => Failure::Io(io.to_string()),
            BenchError::Solver(s) => s.into(),
            other => Failure::usage(other),
        }
    }
}

impl From<OracleError> for Failure {
    fn from(e: OracleError) -> Self {
        Failure::usage(e)
    }
}
