//! Dense upper-triangular QUBO matrices and sample containers.
//!
//! The objective is
//! `f(x) = sum_i q[i][i] x_i + sum_{i<j} q[i][j] x_i x_j + offset`
//! over binary vectors `x`.

use std::collections::BTreeMap;
use std::io::{Read, Write};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::scalar::{max_abs, Scalar};
use crate::solvers::SamplerParams;

/// Two energies closer than this are treated as equal.
pub const ENERGY_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Error)]
pub enum QuboError {
    #[error("index ({i}, {j}) out of range for {n_vars} variables")]
    IndexError { i: usize, j: usize, n_vars: usize },
    #[error("expected {expected} bits, got {got}")]
    DimensionError { expected: usize, got: usize },
    #[error("invalid sample set: {0}")]
    InvalidSampleSet(String),
    #[error("parse error: {0}")]
    Parse(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, PartialEq)]
pub struct QuboMatrix<T> {
    n_vars: usize,
    // row-major n x n; entries below the diagonal are never written
    coeffs: Vec<T>,
    offset: T,
}

impl<T: Scalar> QuboMatrix<T> {
    pub fn new(n_vars: usize) -> Self {
        QuboMatrix {
            n_vars,
            coeffs: vec![T::zero(); n_vars * n_vars],
            offset: T::zero(),
        }
    }

    pub fn n_vars(&self) -> usize {
        self.n_vars
    }

    pub fn offset(&self) -> T {
        self.offset
    }

    pub fn add_offset(&mut self, value: T) {
        self.offset += value;
    }

    /// Accumulates `value` at `(min(i, j), max(i, j))`.
    pub fn add_coefficient(&mut self, i: usize, j: usize, value: T) -> Result<(), QuboError> {
        self.check_pair(i, j)?;
        let (a, b) = if i <= j { (i, j) } else { (j, i) };
        self.coeffs[a * self.n_vars + b] += value;
        Ok(())
    }

    /// Coefficient of the pair in either orientation.
    pub fn coefficient(&self, i: usize, j: usize) -> Result<T, QuboError> {
        self.check_pair(i, j)?;
        Ok(self.coeff(i, j))
    }

    #[inline]
    pub(crate) fn coeff(&self, i: usize, j: usize) -> T {
        let (a, b) = if i <= j { (i, j) } else { (j, i) };
        self.coeffs[a * self.n_vars + b]
    }

    fn check_pair(&self, i: usize, j: usize) -> Result<(), QuboError> {
        if i >= self.n_vars || j >= self.n_vars {
            return Err(QuboError::IndexError { i, j, n_vars: self.n_vars });
        }
        Ok(())
    }

    fn check_len(&self, x: &[bool]) -> Result<(), QuboError> {
        if x.len() != self.n_vars {
            return Err(QuboError::DimensionError { expected: self.n_vars, got: x.len() });
        }
        Ok(())
    }

    /// Nonzero upper-triangular entries `(i, j, value)` with `i <= j`, row-major.
    pub fn terms(&self) -> impl Iterator<Item = (usize, usize, T)> + '_ {
        let n = self.n_vars;
        (0..n).flat_map(move |i| (i..n).map(move |j| (i, j, self.coeffs[i * n + j])))
            .filter(|(_, _, v)| !v.is_zero())
    }

    pub fn max_abs_coefficient(&self) -> T {
        max_abs(self.coeffs.iter().copied())
    }

    pub fn energy(&self, x: &[bool]) -> Result<T, QuboError> {
        self.check_len(x)?;
        Ok(self.energy_unchecked(x))
    }

    pub(crate) fn energy_unchecked(&self, x: &[bool]) -> T {
        let n = self.n_vars;
        let mut total = self.offset;
        for i in (0..n).filter(|&i| x[i]) {
            let row = &self.coeffs[i * n..(i + 1) * n];
            total += row[i];
            for j in (i + 1..n).filter(|&j| x[j]) {
                total += row[j];
            }
        }
        total
    }

    /// `energy(x with bit flipped) - energy(x)`, reading only row and column
    /// `flip`.
    pub fn energy_delta(&self, x: &[bool], flip: usize) -> Result<T, QuboError> {
        self.check_len(x)?;
        self.check_pair(flip, flip)?;
        let field = self.local_field(x, flip);
        Ok(if x[flip] { -field } else { field })
    }

    /// `q[i][i] + sum_{j != i, x_j = 1} q[i][j]`: the energy gained by setting
    /// bit `i` when it is clear.
    pub(crate) fn local_field(&self, x: &[bool], i: usize) -> T {
        let mut field = self.coeff(i, i);
        for (j, &set) in x.iter().enumerate() {
            if set && j != i {
                field += self.coeff(i, j);
            }
        }
        field
    }

    /// Serializes to `{"n_vars", "offset", "terms": [[i, j, value], ...]}`.
    pub fn write_json<W: Write>(&self, sink: W) -> Result<(), QuboError> {
        let doc = QuboDocument {
            n_vars: self.n_vars,
            offset: self.offset.to_f64_lossy(),
            terms: self.terms().map(|(i, j, v)| (i, j, v.to_f64_lossy())).collect(),
        };
        serde_json::to_writer_pretty(sink, &doc).map_err(|e| QuboError::Parse(e.to_string()))
    }

    pub fn read_json<R: Read>(source: R) -> Result<Self, QuboError> {
        let doc: QuboDocument =
            serde_json::from_reader(source).map_err(|e| QuboError::Parse(e.to_string()))?;
        let mut q = QuboMatrix::new(doc.n_vars);
        q.offset = T::from_f64(doc.offset)
            .ok_or_else(|| QuboError::Parse(format!("offset {} not representable", doc.offset)))?;
        for (i, j, v) in doc.terms {
            if i > j {
                return Err(QuboError::Parse(format!("term ({i}, {j}) is below the diagonal")));
            }
            let value = T::from_f64(v)
                .ok_or_else(|| QuboError::Parse(format!("coefficient {v} not representable")))?;
            q.add_coefficient(i, j, value)?;
        }
        Ok(q)
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct QuboDocument {
    n_vars: usize,
    offset: f64,
    terms: Vec<(usize, usize, f64)>,
}

/// One read: a bit vector, its energy and its 1-based position in the order
/// the solver produced it.
#[derive(Debug, Clone, PartialEq)]
pub struct Sample<T> {
    pub bits: Vec<bool>,
    pub energy: T,
    pub read_index: usize,
}

/// How the samples in a set are ordered.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SampleOrdering {
    /// Order in which reads finished; `read_index` counts 1, 2, 3, ...
    Production,
    /// Ascending energy (exhaustive enumeration).
    EnergySorted,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SampleSet<T> {
    solver: String,
    ordering: SampleOrdering,
    samples: Vec<Sample<T>>,
    /// Named durations in microseconds.
    pub timing: BTreeMap<String, f64>,
    pub params: Option<SamplerParams>,
}

impl<T: Scalar> SampleSet<T> {
    /// Builds a production-ordered set, assigning read indices 1..=len.
    pub fn from_reads(solver: impl Into<String>, reads: Vec<(Vec<bool>, T)>) -> Self {
        let samples = reads
            .into_iter()
            .enumerate()
            .map(|(k, (bits, energy))| Sample { bits, energy, read_index: k + 1 })
            .collect();
        SampleSet {
            solver: solver.into(),
            ordering: SampleOrdering::Production,
            samples,
            timing: BTreeMap::new(),
            params: None,
        }
    }

    pub fn from_samples(
        solver: impl Into<String>,
        ordering: SampleOrdering,
        samples: Vec<Sample<T>>,
    ) -> Result<Self, QuboError> {
        if ordering == SampleOrdering::Production {
            if let Some((k, s)) = samples.iter().enumerate().find(|(k, s)| s.read_index != k + 1) {
                return Err(QuboError::InvalidSampleSet(format!(
                    "sample {k} has read_index {}, want {}",
                    s.read_index,
                    k + 1
                )));
            }
        }
        Ok(SampleSet {
            solver: solver.into(),
            ordering,
            samples,
            timing: BTreeMap::new(),
            params: None,
        })
    }

    pub fn solver(&self) -> &str {
        &self.solver
    }

    pub fn ordering(&self) -> SampleOrdering {
        self.ordering
    }

    pub fn samples(&self) -> &[Sample<T>] {
        &self.samples
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// Lowest-energy sample; the earliest one on ties.
    pub fn best(&self) -> Option<&Sample<T>> {
        self.samples.iter().fold(None, |best: Option<&Sample<T>>, s| match best {
            Some(b) if b.energy <= s.energy => Some(b),
            _ => Some(s),
        })
    }

    /// Largest `|stored - recomputed|` energy discrepancy against `q`.
    pub fn max_energy_error(&self, q: &QuboMatrix<T>) -> Result<f64, QuboError> {
        let mut worst = 0.0f64;
        for s in &self.samples {
            let fresh = q.energy(&s.bits)?;
            worst = worst.max((fresh - s.energy).to_f64_lossy().abs());
        }
        Ok(worst)
    }

    pub fn write_json<W: Write>(&self, sink: W) -> Result<(), QuboError> {
        let doc = SampleSetDocument {
            solver: self.solver.clone(),
            ordering: self.ordering,
            params: self.params.clone(),
            samples: self
                .samples
                .iter()
                .map(|s| SampleRecord {
                    bits: bits_to_string(&s.bits),
                    energy: s.energy.to_f64_lossy(),
                    read_index: s.read_index,
                })
                .collect(),
            timing: self.timing.clone(),
        };
        serde_json::to_writer_pretty(sink, &doc).map_err(|e| QuboError::Parse(e.to_string()))
    }

    pub fn read_json<R: Read>(source: R) -> Result<Self, QuboError> {
        let doc: SampleSetDocument =
            serde_json::from_reader(source).map_err(|e| QuboError::Parse(e.to_string()))?;
        let samples = doc
            .samples
            .into_iter()
            .map(|r| {
                Ok(Sample {
                    bits: bits_from_string(&r.bits)?,
                    energy: T::from_f64(r.energy).ok_or_else(|| {
                        QuboError::Parse(format!("energy {} not representable", r.energy))
                    })?,
                    read_index: r.read_index,
                })
            })
            .collect::<Result<Vec<_>, QuboError>>()?;
        let mut set = SampleSet::from_samples(doc.solver, doc.ordering, samples)?;
        set.timing = doc.timing;
        set.params = doc.params;
        Ok(set)
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct SampleRecord {
    bits: String,
    energy: f64,
    read_index: usize,
}

#[derive(Debug, Serialize, Deserialize)]
struct SampleSetDocument {
    solver: String,
    ordering: SampleOrdering,
    #[serde(default)]
    params: Option<SamplerParams>,
    samples: Vec<SampleRecord>,
    #[serde(default)]
    timing: BTreeMap<String, f64>,
}

/// `"0101"` rendering, bit 0 first.
pub fn bits_to_string(bits: &[bool]) -> String {
    bits.iter().map(|&b| if b { '1' } else { '0' }).collect()
}

pub fn bits_from_string(s: &str) -> Result<Vec<bool>, QuboError> {
    s.chars()
        .map(|c| match c {
            '0' => Ok(false),
            '1' => Ok(true),
            other => Err(QuboError::Parse(format!("invalid bit character {other:?}"))),
        })
        .collect()
}
