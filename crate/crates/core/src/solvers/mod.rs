//! Classical samplers producing [`SampleSet`]s from a [`QuboMatrix`].

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::qubo::{QuboError, QuboMatrix, SampleSet};
use crate::scalar::{Real, Scalar};

mod exact;
mod sa;
mod tabu;

pub use exact::{ground_state, solve_exact, MAX_EXACT_VARS};
pub use sa::{beta_schedule, sample_sa};
pub use tabu::{sample_tabu, tabu_read_traced, TabuStep};

#[derive(Debug, Error)]
pub enum SolverError {
    #[error("{n_vars} variables exceed the exhaustive limit of {max}")]
    TooLarge { n_vars: usize, max: usize },
    #[error("invalid sampler parameters: {0}")]
    ParamError(String),
    #[error(transparent)]
    Qubo(#[from] QuboError),
}

/// Knobs shared by the stochastic samplers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SamplerParams {
    pub num_reads: usize,
    pub seed: u64,
    /// Simulated annealing sweeps per read.
    pub sweeps_per_read: usize,
    /// Initial inverse temperature in units of `1 / max|q|`.
    pub beta_start: f64,
    /// Final inverse temperature in units of `1 / max|q|`.
    pub beta_end: f64,
    /// Tabu tenure; `None` means `ceil(n_vars / 4)`.
    pub tabu_tenure: Option<usize>,
    /// Tabu stops a read after this many iterations without improving the
    /// read's best energy; `None` means `50 * n_vars`.
    pub max_iterations_per_read: Option<usize>,
}

impl Default for SamplerParams {
    fn default() -> Self {
        SamplerParams {
            num_reads: 1,
            seed: 0,
            sweeps_per_read: 1000,
            beta_start: 0.1,
            beta_end: 10.0,
            tabu_tenure: None,
            max_iterations_per_read: None,
        }
    }
}

impl SamplerParams {
    pub fn with_reads(num_reads: usize, seed: u64) -> Self {
        SamplerParams { num_reads, seed, ..Default::default() }
    }

    pub fn validate(&self) -> Result<(), SolverError> {
        let fail = |msg: String| Err(SolverError::ParamError(msg));
        if self.num_reads == 0 {
            return fail("num_reads must be >= 1".into());
        }
        if self.sweeps_per_read == 0 {
            return fail("sweeps_per_read must be >= 1".into());
        }
        if !(self.beta_start.is_finite() && self.beta_end.is_finite() && self.beta_start > 0.0) {
            return fail(format!(
                "beta range must be finite and positive, got {}..{}",
                self.beta_start, self.beta_end
            ));
        }
        if self.beta_start >= self.beta_end {
            return fail(format!(
                "beta_start {} must be below beta_end {}",
                self.beta_start, self.beta_end
            ));
        }
        if self.tabu_tenure == Some(0) {
            return fail("tabu_tenure must be >= 1".into());
        }
        if self.max_iterations_per_read == Some(0) {
            return fail("max_iterations_per_read must be >= 1".into());
        }
        Ok(())
    }

    pub(crate) fn tenure_for(&self, n_vars: usize) -> usize {
        self.tabu_tenure.unwrap_or(n_vars.div_ceil(4))
    }

    pub(crate) fn max_iterations_for(&self, n_vars: usize) -> usize {
        self.max_iterations_per_read.unwrap_or(50 * n_vars).max(1)
    }
}

/// Seed of the generator driving read `read_index` (1-based).
pub fn read_seed(seed: u64, read_index: usize) -> u64 {
    seed ^ read_index as u64
}

/// Something that turns a QUBO into samples.
///
/// Remote or hardware samplers would implement this too; none ships here.
pub trait Sampler<T: Scalar> {
    fn name(&self) -> &str;

    fn sample(&self, q: &QuboMatrix<T>, params: &SamplerParams) -> Result<SampleSet<T>, SolverError>;
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolverKind {
    Exact,
    SimulatedAnnealing,
    Tabu,
}

impl SolverKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            SolverKind::Exact => "exact",
            SolverKind::SimulatedAnnealing => "simulated_annealing",
            SolverKind::Tabu => "tabu",
        }
    }
}

impl fmt::Display for SolverKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for SolverKind {
    type Err = SolverError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "exact" => Ok(SolverKind::Exact),
            "sa" | "simulated_annealing" | "simulated-annealing" => Ok(SolverKind::SimulatedAnnealing),
            "tabu" => Ok(SolverKind::Tabu),
            other => Err(SolverError::ParamError(format!("unknown solver {other:?}"))),
        }
    }
}

impl<T: Real> Sampler<T> for SolverKind {
    fn name(&self) -> &str {
        self.as_str()
    }

    fn sample(&self, q: &QuboMatrix<T>, params: &SamplerParams) -> Result<SampleSet<T>, SolverError> {
        match self {
            SolverKind::Exact => solve_exact(q),
            SolverKind::SimulatedAnnealing => sample_sa(q, params),
            SolverKind::Tabu => sample_tabu(q, params),
        }
    }
}

/// Random starting vector for a read.
pub(crate) fn random_bits(n: usize, rng: &mut impl rand::Rng) -> Vec<bool> {
    (0..n).map(|_| rng.gen()).collect()
}

/// Local fields `q[i][i] + sum_{j set, j != i} q[i][j]` for every variable.
pub(crate) fn local_fields<T: Scalar>(q: &QuboMatrix<T>, x: &[bool]) -> Vec<T> {
    (0..q.n_vars()).map(|i| q.local_field(x, i)).collect()
}

/// Flips `i` and updates energy and fields in `O(n)`.
pub(crate) fn apply_flip<T: Scalar>(q: &QuboMatrix<T>, x: &mut [bool], fields: &mut [T], energy: &mut T, i: usize) {
    let delta = if x[i] { -fields[i] } else { fields[i] };
    x[i] = !x[i];
    *energy += delta;
    for (j, field) in fields.iter_mut().enumerate() {
        if j != i {
            let c = q.coeff(i, j);
            if x[i] {
                *field += c;
            } else {
                *field -= c;
            }
        }
    }
}

#[inline]
pub(crate) fn flip_delta<T: Scalar>(x: &[bool], fields: &[T], i: usize) -> T {
    if x[i] {
        -fields[i]
    } else {
        fields[i]
    }
}
