//! Reads-to-optimum analysis and batch benchmarking of samplers.
//!
//! Samples are kept in the order a solver produced them; the first read whose
//! energy reaches the known optimum is what the comparison measures.

use std::time::Instant;

use thiserror::Error;

use crate::qubo::{QuboMatrix, SampleOrdering, SampleSet};
use crate::scalar::Scalar;
use crate::solvers::{ground_state, Sampler, SamplerParams, SolverError};

mod report;
pub mod timing;

pub use report::{emit_report, load_report, BenchAggregate, BenchReport, BenchRow, ReportFormat};
pub use timing::{qpu_access_time, QpuTimingModel};

#[derive(Debug, Error)]
pub enum BenchError {
    #[error("sample set from {0} is energy-sorted, not in production order")]
    WrongOrdering(String),
    #[error("invalid timing: {0}")]
    InvalidTiming(String),
    #[error("parse error: {0}")]
    Parse(String),
    #[error(transparent)]
    Solver(#[from] SolverError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl From<csv::Error> for BenchError {
    fn from(e: csv::Error) -> Self {
        match e.into_kind() {
            csv::ErrorKind::Io(io) => BenchError::Io(io),
            other => BenchError::Parse(format!("{other:?}")),
        }
    }
}

/// Smallest read index whose energy is within `tol` of `optimal_energy`.
pub fn first_optimum_read<T: Scalar>(
    samples: &SampleSet<T>,
    optimal_energy: T,
    tol: f64,
) -> Result<Option<usize>, BenchError> {
    if samples.ordering() != SampleOrdering::Production {
        return Err(BenchError::WrongOrdering(samples.solver().to_owned()));
    }
    Ok(samples
        .samples()
        .iter()
        .find(|s| (s.energy - optimal_energy).to_f64_lossy() <= tol)
        .map(|s| s.read_index))
}

/// Seed for 1-based batch `batch`; reads inside use `seed ^ read_index`, so
/// shifting the batch into the high word keeps every read's stream distinct.
pub fn batch_seed(seed: u64, batch: usize) -> u64 {
    seed ^ ((batch as u64) << 32)
}

/// Runs `batches` sampler calls against the exhaustively computed optimum.
pub fn run_batches<T: Scalar, S: Sampler<T>>(
    solver: &S,
    q: &QuboMatrix<T>,
    params: &SamplerParams,
    batches: usize,
) -> Result<BenchReport, BenchError> {
    let (_, optimum) = ground_state(q)?;
    run_batches_with_optimum(solver, q, params, batches, optimum)
}

/// As [`run_batches`], with the optimum supplied by the caller.
///
/// Row time is the sampler's own `total_us` timing entry when it reports one,
/// otherwise the wall time around the call.
pub fn run_batches_with_optimum<T: Scalar, S: Sampler<T>>(
    solver: &S,
    q: &QuboMatrix<T>,
    params: &SamplerParams,
    batches: usize,
    optimal_energy: T,
) -> Result<BenchReport, BenchError> {
    params.validate()?;
    let mut rows = Vec::with_capacity(batches);
    for batch in 1..=batches {
        let batch_params = SamplerParams { seed: batch_seed(params.seed, batch), ..params.clone() };
        let start = Instant::now();
        let set = solver.sample(q, &batch_params)?;
        let wall = start.elapsed().as_secs_f64() * 1e6;
        let best = set
            .best()
            .ok_or_else(|| BenchError::Parse(format!("{} returned no samples", solver.name())))?;
        rows.push(BenchRow {
            solver: solver.name().to_owned(),
            num_reads: params.num_reads,
            batch,
            total_time_us: set.timing.get("total_us").copied().unwrap_or(wall),
            first_optimum_read: first_optimum_read(&set, optimal_energy, crate::qubo::ENERGY_TOLERANCE)?,
            best_energy: best.energy.to_f64_lossy(),
            optimal_energy: optimal_energy.to_f64_lossy(),
        });
    }
    Ok(BenchReport::from_rows(rows))
}

/// Shortest decimal that parses back to the same `f64`; integers print
/// without a fractional part.
pub(crate) fn format_number(v: f64) -> String {
    format!("{v}")
}
