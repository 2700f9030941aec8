//! Currency-arbitrage loops encoded as a QUBO.
//!
//! Variable `x(c, p)` is set when currency `c` sits at loop position `p`
//! (1-based). A loop of `K` positions closes on itself, so position `K`
//! repeats the currency at position 1 and the loop performs `K - 1`
//! conversions. The objective is the sum of five weighted terms:
//!
//! | term          | weight        | structure                                   |
//! |---------------|---------------|---------------------------------------------|
//! | rate          | `rate` (A)    | `A w(i,j)` on `x(i,k) x(j,k+1)`, `i != j`    |
//! | one-hot       | `one_hot` (B) | `B` on `x(i,k) x(j,k)`, `i < j`              |
//! | endpoints     | `endpoints` (C) | `C sum_i (1 - (x(i,1) - x(i,K))^2)`        |
//! | consecutive   | `consecutive` (D) | `D` on `x(i,k) x(i,k+1)`                 |
//! | fill          | `fill` (E)    | `E` on every `x(i,k)`                        |
//!
//! The endpoint term is kept in its squared-difference form, so a *negative*
//! `C` rewards matching endpoints. Its constant part `C N` lands in the QUBO
//! offset, which keeps reported energies equal to the analytic value.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::qubo::{QuboError, QuboMatrix};
use crate::rates::{LogWeightMatrix, RateMatrix};
use crate::scalar::Real;

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("invalid shape: {0}")]
    InvalidShape(String),
    #[error("invalid weights: {0}")]
    InvalidWeights(String),
    #[error("currency {curr} / position {pos} out of range for shape {n} x {k}")]
    IndexError { curr: usize, pos: usize, n: usize, k: usize },
    #[error("expected {expected} entries, got {got}")]
    DimensionError { expected: usize, got: usize },
    #[error("loop is not feasible: {0:?}")]
    NotFeasible(Vec<Violation>),
    #[error(transparent)]
    Qubo(#[from] QuboError),
}

/// `N` currencies and loops of `K` positions (closing currency included).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProblemShape {
    pub n_currencies: usize,
    pub loop_length: usize,
}

impl ProblemShape {
    /// Requires `N >= 2` and `2 < K < N + 2`.
    pub fn new(n_currencies: usize, loop_length: usize) -> Result<Self, ModelError> {
        if n_currencies < 2 {
            return Err(ModelError::InvalidShape(format!(
                "need at least 2 currencies, got {n_currencies}"
            )));
        }
        if loop_length <= 2 || loop_length >= n_currencies + 2 {
            return Err(ModelError::InvalidShape(format!(
                "loop length {loop_length} must satisfy 2 < K < {}",
                n_currencies + 2
            )));
        }
        Ok(ProblemShape { n_currencies, loop_length })
    }

    /// The degenerate `K = 2` shape, whose only feasible loops are `[c, c]`.
    /// Useful in tests; [`ProblemShape::is_trivial`] flags it.
    pub fn trivial(n_currencies: usize) -> Result<Self, ModelError> {
        if n_currencies < 2 {
            return Err(ModelError::InvalidShape(format!(
                "need at least 2 currencies, got {n_currencies}"
            )));
        }
        Ok(ProblemShape { n_currencies, loop_length: 2 })
    }

    pub fn is_trivial(&self) -> bool {
        self.loop_length == 2
    }

    pub fn n_vars(&self) -> usize {
        self.n_currencies * self.loop_length
    }

    /// Flat variable index `curr * K + (pos - 1)`, with 1-based `pos`.
    pub fn var_index(&self, curr: usize, pos: usize) -> Result<usize, ModelError> {
        if curr >= self.n_currencies || pos == 0 || pos > self.loop_length {
            return Err(ModelError::IndexError {
                curr,
                pos,
                n: self.n_currencies,
                k: self.loop_length,
            });
        }
        Ok(self.flat(curr, pos))
    }

    #[inline]
    fn flat(&self, curr: usize, pos: usize) -> usize {
        curr * self.loop_length + (pos - 1)
    }

    /// Inverse of [`ProblemShape::var_index`]: `(curr, pos)`.
    pub fn var_position(&self, flat: usize) -> Option<(usize, usize)> {
        (flat < self.n_vars()).then(|| (flat / self.loop_length, flat % self.loop_length + 1))
    }
}

/// Signed weights of the five terms.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HamiltonianWeights<T> {
    /// A: scale of the log-rate objective. Must be positive.
    pub rate: T,
    /// B: penalty per pair of currencies sharing a position.
    pub one_hot: T,
    /// C: endpoint term in `C (1 - (x1 - xK)^2)` form; negative rewards a
    /// closed loop.
    pub endpoints: T,
    /// D: per repeated currency in consecutive positions; negative rewards
    /// shorter loops.
    pub consecutive: T,
    /// E: per set variable; negative rewards filled positions.
    pub fill: T,
}

impl<T: Real> HamiltonianWeights<T> {
    pub fn new(rate: T, one_hot: T, endpoints: T, consecutive: T, fill: T) -> Result<Self, ModelError> {
        let w = HamiltonianWeights { rate, one_hot, endpoints, consecutive, fill };
        w.validate()?;
        Ok(w)
    }

    /// Every weight zero. Rejected by [`HamiltonianWeights::validate`], but
    /// still accepted by [`build_qubo`].
    pub fn zero() -> Self {
        HamiltonianWeights {
            rate: T::zero(),
            one_hot: T::zero(),
            endpoints: T::zero(),
            consecutive: T::zero(),
            fill: T::zero(),
        }
    }

    /// Only the rate term, with weight `rate`.
    pub fn rate_only(rate: T) -> Self {
        HamiltonianWeights { rate, ..Self::zero() }
    }

    fn all(&self) -> [T; 5] {
        [self.rate, self.one_hot, self.endpoints, self.consecutive, self.fill]
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        if self.all().iter().any(|w| !w.is_finite()) {
            return Err(ModelError::InvalidWeights(format!("non-finite weight in {self:?}")));
        }
        if !(self.rate > T::zero()) {
            return Err(ModelError::InvalidWeights(format!(
                "rate weight must be > 0, got {}",
                self.rate
            )));
        }
        Ok(())
    }

    /// Weights under which every infeasible bit vector has strictly higher
    /// energy than every feasible one.
    ///
    /// With `s = rate * max|w|` (falling back to `rate` for a flat market)
    /// the defaults are `E = C = -s K`, `B = s (2K + 4)` and `D = 0`. Each
    /// pair of set bits in adjacent positions moves the energy by at most
    /// `s`, so per position with `n` set bits the energy relative to a closed
    /// trivial loop is bounded below by `|E|` for `n = 0`, `-s` for `n = 1`
    /// and `s (K (n-1)^2 + n (n-2))` for `n >= 2`; an open loop additionally
    /// pays `2|C| = 2 s K`. Every infeasible vector therefore sits at least
    /// `s` above the trivial loop, which is itself no better than the best
    /// feasible loop. A nonzero `D` keeps the bound if `s` grows by `|D|`.
    ///
    /// `D` stays zero: a repeated currency already costs `ln 1 = 0`, which is
    /// what lets shorter loops fit in `K` positions. Any negative `D` either
    /// outweighs real profit differences or splits equally profitable loops
    /// into optima a hair apart, which heuristic samplers cannot resolve.
    pub fn calibrated(weights: &LogWeightMatrix<T>, shape: ProblemShape, rate: T) -> Result<Self, ModelError> {
        if !(rate > T::zero() && rate.is_finite()) {
            return Err(ModelError::InvalidWeights(format!("rate weight must be > 0, got {rate}")));
        }
        let profit_scale = rate * weights.max_abs_weight();
        let step = if profit_scale > T::zero() { profit_scale } else { rate };
        let k = T::from_count(shape.loop_length);
        let two = T::from_count(2);
        let four = T::from_count(4);
        HamiltonianWeights::new(rate, step * (two * k + four), -step * k, T::zero(), -step * k)
    }
}

/// Assembles the QUBO over `N * K` variables. Terms with zero weight add
/// nothing, so all-zero weights give an all-zero matrix and offset.
pub fn build_qubo<T: Real>(
    weights: &LogWeightMatrix<T>,
    shape: ProblemShape,
    h: &HamiltonianWeights<T>,
) -> Result<QuboMatrix<T>, ModelError> {
    let n = shape.n_currencies;
    let k_len = shape.loop_length;
    if weights.n() != n {
        return Err(ModelError::InvalidShape(format!(
            "rate table has {} currencies, shape expects {n}",
            weights.n()
        )));
    }
    if h.all().iter().any(|w| !w.is_finite()) {
        return Err(ModelError::InvalidWeights(format!("non-finite weight in {h:?}")));
    }
    let v = |c, p| shape.flat(c, p);
    let mut q = QuboMatrix::new(shape.n_vars());
    let zero = T::zero();

    if h.rate != zero {
        for i in 0..n {
            for j in (0..n).filter(|&j| j != i) {
                let coeff = h.rate * weights.weight(i, j);
                for k in 1..k_len {
                    q.add_coefficient(v(i, k), v(j, k + 1), coeff)?;
                }
            }
        }
    }
    if h.one_hot != zero {
        for k in 1..=k_len {
            for i in 0..n {
                for j in i + 1..n {
                    q.add_coefficient(v(i, k), v(j, k), h.one_hot)?;
                }
            }
        }
    }
    if h.endpoints != zero {
        // C (1 - (a - b)^2) = C - C a - C b + 2 C a b for binary a, b
        let c = h.endpoints;
        q.add_offset(c * T::from_count(n));
        for i in 0..n {
            q.add_coefficient(v(i, 1), v(i, 1), -c)?;
            q.add_coefficient(v(i, k_len), v(i, k_len), -c)?;
            q.add_coefficient(v(i, 1), v(i, k_len), c + c)?;
        }
    }
    if h.consecutive != zero {
        for i in 0..n {
            for k in 1..k_len {
                q.add_coefficient(v(i, k), v(i, k + 1), h.consecutive)?;
            }
        }
    }
    if h.fill != zero {
        for flat in 0..shape.n_vars() {
            q.add_coefficient(flat, flat, h.fill)?;
        }
    }
    Ok(q)
}

/// One-hot encoding of a sequence of `K` currencies.
pub fn encode_loop(currencies: &[usize], shape: ProblemShape) -> Result<Vec<bool>, ModelError> {
    if currencies.len() != shape.loop_length {
        return Err(ModelError::DimensionError {
            expected: shape.loop_length,
            got: currencies.len(),
        });
    }
    let mut bits = vec![false; shape.n_vars()];
    for (k, &c) in currencies.iter().enumerate() {
        bits[shape.var_index(c, k + 1)?] = true;
    }
    Ok(bits)
}

/// Contents of one loop position in a decoded bit vector.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Slot {
    Currency(usize),
    Empty,
    Multiple(Vec<usize>),
}

/// Constraint violation found while decoding. Positions are 1-based.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Violation {
    MultipleInPosition(usize),
    EmptyPosition(usize),
    OpenLoop,
}

impl std::fmt::Display for Violation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Violation::MultipleInPosition(p) => write!(f, "several currencies at position {p}"),
            Violation::EmptyPosition(p) => write!(f, "position {p} is empty"),
            Violation::OpenLoop => f.write_str("loop does not end where it starts"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DecodedLoop<T> {
    pub positions: Vec<Slot>,
    pub violations: Vec<Violation>,
    /// Filled in by [`DecodedLoop::scored`] for feasible loops only.
    pub profitability: Option<T>,
}

impl<T: Real> DecodedLoop<T> {
    pub fn is_feasible(&self) -> bool {
        self.violations.is_empty()
    }

    /// The currency sequence, when every position holds exactly one.
    pub fn currencies(&self) -> Option<Vec<usize>> {
        self.positions
            .iter()
            .map(|s| match s {
                Slot::Currency(c) => Some(*c),
                _ => None,
            })
            .collect()
    }

    /// Feasible loop as a closed walk, rotated to its lexicographically
    /// smallest form so every rotation of one cycle compares equal.
    pub fn canonical_cycle(&self) -> Option<Vec<usize>> {
        if !self.is_feasible() {
            return None;
        }
        let walk = self.currencies()?;
        let open = &walk[..walk.len() - 1];
        let mut cycle = (0..open.len())
            .map(|r| open[r..].iter().chain(&open[..r]).copied().collect::<Vec<_>>())
            .min()?;
        cycle.push(cycle[0]);
        Some(cycle)
    }

    /// Attaches the profitability factor when the loop is feasible.
    pub fn scored(mut self, rates: &RateMatrix<T>) -> Self {
        self.profitability = profitability(&self, rates).ok();
        self
    }

    /// Currency codes joined with arrows, `?` for unusable positions.
    pub fn describe(&self, labels: &[String]) -> String {
        self.positions
            .iter()
            .map(|s| match s {
                Slot::Currency(c) => labels.get(*c).cloned().unwrap_or_else(|| c.to_string()),
                Slot::Empty => "_".to_owned(),
                Slot::Multiple(cs) => format!(
                    "{{{}}}",
                    cs.iter()
                        .map(|c| labels.get(*c).cloned().unwrap_or_else(|| c.to_string()))
                        .collect::<Vec<_>>()
                        .join("|")
                ),
            })
            .collect::<Vec<_>>()
            .join("->")
    }
}

pub fn decode<T: Real>(bits: &[bool], shape: ProblemShape) -> Result<DecodedLoop<T>, ModelError> {
    if bits.len() != shape.n_vars() {
        return Err(ModelError::DimensionError { expected: shape.n_vars(), got: bits.len() });
    }
    let mut positions = Vec::with_capacity(shape.loop_length);
    let mut violations = Vec::new();
    for pos in 1..=shape.loop_length {
        let present: Vec<usize> = (0..shape.n_currencies)
            .filter(|&c| bits[shape.flat(c, pos)])
            .collect();
        positions.push(match present.len() {
            0 => {
                violations.push(Violation::EmptyPosition(pos));
                Slot::Empty
            }
            1 => Slot::Currency(present[0]),
            _ => {
                violations.push(Violation::MultipleInPosition(pos));
                Slot::Multiple(present)
            }
        });
    }
    if let (Some(Slot::Currency(first)), Some(Slot::Currency(last))) = (positions.first(), positions.last()) {
        if first != last {
            violations.push(Violation::OpenLoop);
        }
    }
    Ok(DecodedLoop { positions, violations, profitability: None })
}

/// Product of the `K - 1` conversion rates along a feasible loop.
pub fn profitability<T: Real>(decoded: &DecodedLoop<T>, rates: &RateMatrix<T>) -> Result<T, ModelError> {
    if !decoded.is_feasible() {
        return Err(ModelError::NotFeasible(decoded.violations.clone()));
    }
    let currencies = decoded.currencies().ok_or_else(|| ModelError::NotFeasible(vec![]))?;
    if let Some(&c) = currencies.iter().find(|&&c| c >= rates.n()) {
        return Err(ModelError::IndexError { curr: c, pos: 0, n: rates.n(), k: currencies.len() });
    }
    Ok(rates.walk_product(&currencies))
}

/// Everything needed to decode samples of a built model later.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelDescription {
    pub shape: ProblemShape,
    pub weights: HamiltonianWeights<f64>,
    pub labels: Vec<String>,
}

impl ModelDescription {
    pub fn write_json<W: std::io::Write>(&self, sink: W) -> Result<(), ModelError> {
        serde_json::to_writer_pretty(sink, self).map_err(|e| QuboError::Parse(e.to_string()).into())
    }

    pub fn read_json<R: std::io::Read>(source: R) -> Result<Self, ModelError> {
        serde_json::from_reader(source).map_err(|e| QuboError::Parse(e.to_string()).into())
    }
}

/// A rate table together with its QUBO encoding.
#[derive(Debug, Clone)]
pub struct ArbitrageModel<T> {
    pub rates: RateMatrix<T>,
    pub shape: ProblemShape,
    pub weights: HamiltonianWeights<T>,
    pub qubo: QuboMatrix<T>,
}

impl<T: Real> ArbitrageModel<T> {
    pub fn build(rates: RateMatrix<T>, shape: ProblemShape, weights: HamiltonianWeights<T>) -> Result<Self, ModelError> {
        let qubo = build_qubo(&crate::rates::to_log_weights(&rates), shape, &weights)?;
        Ok(ArbitrageModel { rates, shape, weights, qubo })
    }

    /// Builds with [`HamiltonianWeights::calibrated`] and rate weight 1.
    pub fn with_default_weights(rates: RateMatrix<T>, shape: ProblemShape) -> Result<Self, ModelError> {
        let weights = HamiltonianWeights::calibrated(&crate::rates::to_log_weights(&rates), shape, T::one())?;
        Self::build(rates, shape, weights)
    }

    pub fn decode(&self, bits: &[bool]) -> Result<DecodedLoop<T>, ModelError> {
        Ok(decode(bits, self.shape)?.scored(&self.rates))
    }

    pub fn description(&self) -> ModelDescription {
        let f = |v: T| v.to_f64_lossy();
        ModelDescription {
            shape: self.shape,
            weights: HamiltonianWeights {
                rate: f(self.weights.rate),
                one_hot: f(self.weights.one_hot),
                endpoints: f(self.weights.endpoints),
                consecutive: f(self.weights.consecutive),
                fill: f(self.weights.fill),
            },
            labels: self.rates.labels().to_vec(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rates::{generate_consistent, generate_noisy, load_rates, to_log_weights, RateFormat};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn usd_eur_gbp() -> RateMatrix<f64> {
        let csv = "from,to,rate\nUSD,EUR,0.85\nEUR,GBP,1.17\nGBP,USD,1.40\n\
                   EUR,USD,1.1764705882352942\nGBP,EUR,0.8547008547008547\nUSD,GBP,0.7142857142857143\n";
        load_rates(csv.as_bytes(), RateFormat::Csv).unwrap()
    }

    fn all_bitvectors(n: usize) -> impl Iterator<Item = Vec<bool>> {
        (0u64..1 << n).map(move |m| (0..n).map(|b| m >> b & 1 == 1).collect())
    }

    #[test]
    fn var_index_convention() {
        let shape = ProblemShape::new(3, 4).unwrap();
        assert_eq!(shape.var_index(0, 1).unwrap(), 0);
        assert_eq!(shape.var_index(2, 3).unwrap(), 10);
        assert!(shape.var_index(3, 1).is_err());
        assert!(shape.var_index(0, 0).is_err());
        assert!(shape.var_index(0, 5).is_err());
        let shape = ProblemShape::new(5, 4).unwrap();
        for c in 0..5 {
            for p in 1..=4 {
                assert_eq!(shape.var_position(shape.var_index(c, p).unwrap()), Some((c, p)));
            }
        }
    }

    #[test]
    fn shape_bounds() {
        assert!(ProblemShape::new(3, 2).is_err());
        assert!(ProblemShape::new(3, 5).is_err());
        assert!(ProblemShape::new(1, 3).is_err());
        assert!(ProblemShape::new(3, 4).is_ok());
        assert!(ProblemShape::trivial(3).unwrap().is_trivial());
    }

    #[test]
    fn rotations_share_a_canonical_cycle() {
        let shape = ProblemShape::new(3, 4).unwrap();
        let want = Some(vec![0, 1, 2, 0]);
        for walk in [[0, 1, 2, 0], [1, 2, 0, 1], [2, 0, 1, 2]] {
            let decoded: DecodedLoop<f64> = decode(&encode_loop(&walk, shape).unwrap(), shape).unwrap();
            assert_eq!(decoded.canonical_cycle(), want);
        }
        let stay: DecodedLoop<f64> = decode(&encode_loop(&[1, 0, 0, 1], shape).unwrap(), shape).unwrap();
        assert_eq!(stay.canonical_cycle(), Some(vec![0, 0, 1, 0]));
        let empty: DecodedLoop<f64> = decode(&vec![false; 12], shape).unwrap();
        assert_eq!(empty.canonical_cycle(), None);
    }

    #[test]
    fn three_currency_loop_energy_is_log_sum() {
        let rates = usd_eur_gbp();
        let w = to_log_weights(&rates);
        let shape = ProblemShape::new(3, 4).unwrap();
        let q = build_qubo(&w, shape, &HamiltonianWeights::rate_only(1.0)).unwrap();
        let bits = encode_loop(&[0, 1, 2, 0], shape).unwrap();
        let e = q.energy(&bits).unwrap();
        assert!((e - (-0.3310)).abs() < 1e-4);
        assert!((e - w.walk_sum(&[0, 1, 2, 0])).abs() < 1e-12);
    }

    #[test]
    fn zero_weights_give_zero_matrix() {
        let w = to_log_weights(&usd_eur_gbp());
        let q = build_qubo(&w, ProblemShape::new(3, 4).unwrap(), &HamiltonianWeights::zero()).unwrap();
        assert_eq!(q.terms().count(), 0);
        assert_eq!(q.offset(), 0.0);
    }

    #[test]
    fn nonzero_count_matches_term_families() {
        let w = to_log_weights(&usd_eur_gbp());
        let shape = ProblemShape::new(3, 3).unwrap();
        let mut h = HamiltonianWeights::calibrated(&w, shape, 1.0).unwrap();
        assert_eq!(h.consecutive, 0.0);
        // switch the consecutive family on so all five show up
        h.consecutive = -0.01;
        let q = build_qubo(&w, shape, &h).unwrap();
        let (n, k) = (3, 3);
        // enumerate the distinct variable pairs each family touches
        let mut pairs = std::collections::BTreeSet::new();
        let v = |c: usize, p: usize| c * k + p - 1;
        let ord = |a: usize, b: usize| (a.min(b), a.max(b));
        for i in 0..n {
            for j in 0..n {
                for p in 1..k {
                    if i != j {
                        pairs.insert(ord(v(i, p), v(j, p + 1)));
                    } else {
                        pairs.insert(ord(v(i, p), v(i, p + 1)));
                    }
                }
            }
        }
        for p in 1..=k {
            for i in 0..n {
                for j in i + 1..n {
                    pairs.insert(ord(v(i, p), v(j, p)));
                }
            }
        }
        for i in 0..n {
            pairs.insert(ord(v(i, 1), v(i, k)));
        }
        // rate 12 + one-hot 9 + endpoints 3 + consecutive 6
        assert_eq!(pairs.len(), 30);
        let off_diagonal = q.terms().filter(|(i, j, _)| i != j).count();
        assert_eq!(off_diagonal, pairs.len());
        assert!((q.offset() - h.endpoints * 3.0).abs() < 1e-12);
    }

    #[test]
    fn encode_decode() {
        let shape = ProblemShape::new(3, 4).unwrap();
        let bits = encode_loop(&[0, 1, 2, 0], shape).unwrap();
        let set: Vec<usize> = bits.iter().enumerate().filter(|(_, &b)| b).map(|(i, _)| i).collect();
        assert_eq!(set, vec![0, 3, 5, 10]);
        let d = decode::<f64>(&bits, shape).unwrap();
        assert!(d.is_feasible());
        assert_eq!(d.currencies(), Some(vec![0, 1, 2, 0]));
        assert!(matches!(encode_loop(&[0, 1], shape), Err(ModelError::DimensionError { .. })));

        let empty = decode::<f64>(&vec![false; 12], shape).unwrap();
        assert_eq!(empty.violations.len(), 4);
        assert!(empty.violations.iter().all(|v| matches!(v, Violation::EmptyPosition(_))));

        let mut multi = bits.clone();
        multi[shape.var_index(0, 2).unwrap()] = true;
        let d = decode::<f64>(&multi, shape).unwrap();
        assert_eq!(d.violations, vec![Violation::MultipleInPosition(2)]);

        let open = encode_loop(&[0, 1, 2, 1], shape).unwrap();
        assert_eq!(decode::<f64>(&open, shape).unwrap().violations, vec![Violation::OpenLoop]);
    }

    #[test]
    fn round_trip_random_loops() {
        let shape = ProblemShape::new(6, 5).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..1000 {
            let l: Vec<usize> = (0..5).map(|_| rng.gen_range(0..6)).collect();
            let bits = encode_loop(&l, shape).unwrap();
            assert_eq!(bits.iter().filter(|&&b| b).count(), 5);
            assert_eq!(decode::<f64>(&bits, shape).unwrap().currencies(), Some(l));
        }
    }

    #[test]
    fn profitability_values() {
        let rates = usd_eur_gbp();
        let shape = ProblemShape::new(3, 4).unwrap();
        let d = decode::<f64>(&encode_loop(&[0, 1, 2, 0], shape).unwrap(), shape).unwrap().scored(&rates);
        assert!((d.profitability.unwrap() - 0.85 * 1.17 * 1.40).abs() < 1e-12);
        assert!((d.profitability.unwrap() - 1.39230).abs() < 1e-5);

        let trivial = ProblemShape::trivial(3).unwrap();
        let d = decode::<f64>(&encode_loop(&[2, 2], trivial).unwrap(), trivial).unwrap();
        assert_eq!(profitability(&d, &rates).unwrap(), 1.0);

        let open = decode::<f64>(&encode_loop(&[0, 1, 2, 1], shape).unwrap(), shape).unwrap();
        assert!(matches!(profitability(&open, &rates), Err(ModelError::NotFeasible(_))));
        assert_eq!(open.scored(&rates).profitability, None);
    }

    #[test]
    fn log_profit_matches_weight_sum() {
        let rates = generate_noisy::<f64>(4, 21, 0.3).unwrap();
        let w = to_log_weights(&rates);
        let shape = ProblemShape::new(4, 4).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..200 {
            let mut l: Vec<usize> = (0..3).map(|_| rng.gen_range(0..4)).collect();
            l.push(l[0]);
            let d = decode::<f64>(&encode_loop(&l, shape).unwrap(), shape).unwrap();
            let p = profitability(&d, &rates).unwrap();
            assert!((p.ln() + w.walk_sum(&l)).abs() < 1e-9);
        }
    }

    #[test]
    fn energy_difference_tracks_log_profit() {
        // the calibrated consecutive weight is zero, so every feasible loop
        // gets the same constraint contribution
        let rates = generate_noisy::<f64>(4, 3, 0.4).unwrap();
        let w = to_log_weights(&rates);
        let shape = ProblemShape::new(4, 3).unwrap();
        let h = HamiltonianWeights::calibrated(&w, shape, 2.5).unwrap();
        let q = build_qubo(&w, shape, &h).unwrap();
        let feasible: Vec<(f64, f64)> = (0..4)
            .flat_map(|a| (0..4).map(move |b| vec![a, b, a]))
            .map(|l| {
                let bits = encode_loop(&l, shape).unwrap();
                (q.energy(&bits).unwrap(), rates.walk_product(&l))
            })
            .collect();
        for &(e1, p1) in &feasible {
            for &(e2, p2) in &feasible {
                assert!(((e2 - e1) - (-2.5 * (p2.ln() - p1.ln()))).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn calibrated_weights_dominate_constraints() {
        let shapes = [(3, 3), (3, 4), (4, 3), (4, 4), (5, 3)];
        for (seed, &(n, k)) in shapes.iter().enumerate() {
            for rates in [
                generate_noisy::<f64>(n, seed as u64, 0.5).unwrap(),
                generate_consistent::<f64>(n, seed as u64).unwrap(),
            ] {
                let w = to_log_weights(&rates);
                let shape = ProblemShape::new(n, k).unwrap();
                let h = HamiltonianWeights::calibrated(&w, shape, 1.0).unwrap();
                let q = build_qubo(&w, shape, &h).unwrap();
                let mut best_feasible = f64::INFINITY;
                let mut best_infeasible = f64::INFINITY;
                for bits in all_bitvectors(shape.n_vars()) {
                    let e = q.energy(&bits).unwrap();
                    if decode::<f64>(&bits, shape).unwrap().is_feasible() {
                        best_feasible = best_feasible.min(e);
                    } else {
                        best_infeasible = best_infeasible.min(e);
                    }
                }
                assert!(best_infeasible > best_feasible, "N={n} K={k}");
            }
        }
    }

    #[test]
    fn weights_validation() {
        assert!(HamiltonianWeights::new(0.0, 1.0, -1.0, 0.0, -1.0).is_err());
        assert!(HamiltonianWeights::new(1.0, f64::NAN, -1.0, 0.0, -1.0).is_err());
        assert!(HamiltonianWeights::<f64>::zero().validate().is_err());
        let w = to_log_weights(&usd_eur_gbp());
        assert!(HamiltonianWeights::calibrated(&w, ProblemShape::new(3, 4).unwrap(), -1.0).is_err());
    }

    #[test]
    fn model_description_round_trip() {
        let model = ArbitrageModel::with_default_weights(usd_eur_gbp(), ProblemShape::new(3, 4).unwrap()).unwrap();
        let desc = model.description();
        let mut buf = Vec::new();
        desc.write_json(&mut buf).unwrap();
        assert_eq!(ModelDescription::read_json(buf.as_slice()).unwrap(), desc);
        assert_eq!(desc.labels, ["USD", "EUR", "GBP"]);
    }

    #[test]
    fn build_rejects_mismatched_shape() {
        let w = to_log_weights(&usd_eur_gbp());
        let shape = ProblemShape::new(4, 3).unwrap();
        assert!(matches!(
            build_qubo(&w, shape, &HamiltonianWeights::rate_only(1.0)),
            Err(ModelError::InvalidShape(_))
        ));
    }
}
