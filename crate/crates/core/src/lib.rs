//! Currency arbitrage as a QUBO.
//!
//! Exchange-rate tables ([`rates`]) are turned into log-weights and encoded
//! as a quadratic binary objective over one-hot (currency, position)
//! variables ([`model`], [`qubo`]). Classical samplers ([`solvers`]) minimize
//! it, an independent cycle search ([`oracle`]) supplies ground truth, and
//! [`bench`] measures how many reads each sampler needs to hit the optimum
//! and models quantum-annealer access time.
//!
//! The numeric core is generic over [`Scalar`] / [`Real`]; the aliases below
//! fix the common choices.

pub mod bench;
pub mod model;
pub mod oracle;
pub mod qubo;
pub mod rates;
pub mod scalar;
pub mod solvers;

pub use model::{ArbitrageModel, DecodedLoop, HamiltonianWeights, ProblemShape, Violation};
pub use oracle::OracleResult;
pub use qubo::{QuboMatrix, Sample, SampleOrdering, SampleSet, ENERGY_TOLERANCE};
pub use rates::{LogWeightMatrix, RateFormat, RateMatrix};
pub use scalar::{Real, Scalar};
pub use solvers::{Sampler, SamplerParams, SolverKind};

/// Exact rational coefficients, for QUBOs built by hand.
pub type Rational = num_rational::Rational64;

pub type Qubo = QuboMatrix<f64>;
pub type Qubo32 = QuboMatrix<f32>;
pub type ExactQubo = QuboMatrix<Rational>;
pub type Rates = RateMatrix<f64>;
pub type LogWeights = LogWeightMatrix<f64>;
pub type Samples = SampleSet<f64>;
pub type Weights = HamiltonianWeights<f64>;
pub type Model = ArbitrageModel<f64>;
pub type Loop = DecodedLoop<f64>;
