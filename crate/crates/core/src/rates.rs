//! Exchange-rate tables and their log-weight transform.
//!
//! `rate(i, j)` is the number of units of currency `j` received for one unit
//! of currency `i`. A directed loop is profitable when the product of its
//! rates exceeds one, which is the same as the sum of its log-weights
//! `-ln rate` being negative.

use std::collections::HashMap;
use std::io::{Read, Write};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::scalar::{max_abs, Real};

#[derive(Debug, Error)]
pub enum RateError {
    #[error("rate table needs at least 2 currencies, got {0}")]
    InvalidSize(usize),
    #[error("missing rate for pair {from} -> {to}")]
    IncompleteMatrix { from: String, to: String },
    #[error("invalid rate {value} for pair {from} -> {to}")]
    InvalidRate { from: String, to: String, value: f64 },
    #[error("duplicate entry: {0}")]
    DuplicateEntry(String),
    #[error("invalid cycle: {0}")]
    InvalidCycle(String),
    #[error("cycle strength must be finite and > 1, got {0}")]
    InvalidStrength(f64),
    #[error("parse error: {0}")]
    Parse(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl From<csv::Error> for RateError {
    fn from(e: csv::Error) -> Self {
        match e.into_kind() {
            csv::ErrorKind::Io(io) => RateError::Io(io),
            other => RateError::Parse(format!("{other:?}")),
        }
    }
}

/// Serialization format of a rate table.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RateFormat {
    /// `from,to,rate` rows with a header, one directed pair per row.
    Csv,
    /// `{"labels": [...], "rates": [[...]]}`, row-major.
    Json,
}

impl RateFormat {
    /// Picks the format from a file extension, defaulting to CSV.
    pub fn from_path(path: &std::path::Path) -> Self {
        match path.extension().and_then(|e| e.to_str()) {
            Some(ext) if ext.eq_ignore_ascii_case("json") => RateFormat::Json,
            _ => RateFormat::Csv,
        }
    }
}

/// Dense N x N table of positive exchange rates with unit diagonal.
#[derive(Debug, Clone, PartialEq)]
pub struct RateMatrix<T> {
    labels: Vec<String>,
    rates: Vec<T>,
}

impl<T: Real> RateMatrix<T> {
    /// Validates and builds a rate table from row-major rows.
    pub fn new(labels: Vec<String>, rows: Vec<Vec<T>>) -> Result<Self, RateError> {
        let n = labels.len();
        if n < 2 {
            return Err(RateError::InvalidSize(n));
        }
        let mut seen = HashMap::with_capacity(n);
        for (i, label) in labels.iter().enumerate() {
            if seen.insert(label.as_str(), i).is_some() {
                return Err(RateError::DuplicateEntry(format!("label {label}")));
            }
        }
        let mut rates = Vec::with_capacity(n * n);
        for i in 0..n {
            let row = rows.get(i);
            for j in 0..n {
                let value = row.and_then(|r| r.get(j)).copied().ok_or_else(|| {
                    RateError::IncompleteMatrix {
                        from: labels[i].clone(),
                        to: labels[j].clone(),
                    }
                })?;
                rates.push(value);
            }
            if row.is_some_and(|r| r.len() > n) {
                return Err(RateError::Parse(format!("row {i} has more than {n} entries")));
            }
        }
        if rows.len() > n {
            return Err(RateError::Parse(format!("more than {n} rows")));
        }
        let table = RateMatrix { labels, rates };
        table.validate()?;
        Ok(table)
    }

    fn validate(&self) -> Result<(), RateError> {
        let n = self.n();
        for i in 0..n {
            for j in 0..n {
                let r = self.rate(i, j);
                let bad = if i == j {
                    r != T::one()
                } else {
                    !(r.is_finite() && r > T::zero())
                };
                if bad {
                    return Err(RateError::InvalidRate {
                        from: self.labels[i].clone(),
                        to: self.labels[j].clone(),
                        value: r.to_f64_lossy(),
                    });
                }
            }
        }
        Ok(())
    }

    pub fn n(&self) -> usize {
        self.labels.len()
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn index_of(&self, label: &str) -> Option<usize> {
        self.labels.iter().position(|l| l == label)
    }

    #[inline]
    pub fn rate(&self, from: usize, to: usize) -> T {
        self.rates[from * self.n() + to]
    }

    /// Product of rates along consecutive entries of `walk`.
    ///
    /// The walk is used as given: pass a closed sequence (first = last) to get
    /// the profitability of a loop.
    pub fn walk_product(&self, walk: &[usize]) -> T {
        walk.windows(2)
            .fold(T::one(), |acc, pair| acc * self.rate(pair[0], pair[1]))
    }

    /// Returns the table with currencies reordered so that new index
    /// `perm[old]` holds old currency `old`.
    pub fn relabel(&self, perm: &[usize]) -> Result<Self, RateError> {
        let n = self.n();
        let mut check = perm.to_vec();
        check.sort_unstable();
        if perm.len() != n || check.iter().enumerate().any(|(i, &p)| i != p) {
            return Err(RateError::InvalidCycle(format!(
                "{perm:?} is not a permutation of 0..{n}"
            )));
        }
        let mut labels = vec![String::new(); n];
        let mut rows = vec![vec![T::one(); n]; n];
        for old_i in 0..n {
            labels[perm[old_i]] = self.labels[old_i].clone();
            for old_j in 0..n {
                rows[perm[old_i]][perm[old_j]] = self.rate(old_i, old_j);
            }
        }
        RateMatrix::new(labels, rows)
    }

    pub fn rows(&self) -> Vec<Vec<T>> {
        self.rates.chunks(self.n()).map(|r| r.to_vec()).collect()
    }
}

/// Matrix of `-ln rate`, zero on the diagonal.
#[derive(Debug, Clone, PartialEq)]
pub struct LogWeightMatrix<T> {
    n: usize,
    weights: Vec<T>,
}

impl<T: Real> LogWeightMatrix<T> {
    /// Builds log-weights directly. Mostly useful for tests and potential
    /// transforms; every entry must be finite and the diagonal zero.
    pub fn from_rows(rows: Vec<Vec<T>>) -> Result<Self, RateError> {
        let n = rows.len();
        if n < 2 {
            return Err(RateError::InvalidSize(n));
        }
        let mut weights = Vec::with_capacity(n * n);
        for (i, row) in rows.iter().enumerate() {
            if row.len() != n {
                return Err(RateError::Parse(format!("row {i} has {} entries, want {n}", row.len())));
            }
            for (j, &w) in row.iter().enumerate() {
                if !w.is_finite() || (i == j && w != T::zero()) {
                    return Err(RateError::InvalidRate {
                        from: i.to_string(),
                        to: j.to_string(),
                        value: w.to_f64_lossy(),
                    });
                }
                weights.push(w);
            }
        }
        Ok(LogWeightMatrix { n, weights })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn weight(&self, from: usize, to: usize) -> T {
        self.weights[from * self.n + to]
    }

    /// Sum of weights along consecutive entries of `walk`.
    pub fn walk_sum(&self, walk: &[usize]) -> T {
        walk.windows(2)
            .fold(T::zero(), |acc, pair| acc + self.weight(pair[0], pair[1]))
    }

    /// Largest `|w(i, j)|` over off-diagonal pairs.
    pub fn max_abs_weight(&self) -> T {
        max_abs(self.weights.iter().copied())
    }
}

/// `w(i, j) = -ln rate(i, j)` (natural logarithm).
pub fn to_log_weights<T: Real>(rates: &RateMatrix<T>) -> LogWeightMatrix<T> {
    LogWeightMatrix {
        n: rates.n(),
        weights: rates.rates.iter().map(|r| -r.ln()).collect(),
    }
}

/// Arbitrage-free market: `rate(i, j) = p_i / p_j` for random positive
/// potentials `p`, so every cycle has product one.
pub fn generate_consistent<T: Real>(n: usize, seed: u64) -> Result<RateMatrix<T>, RateError> {
    if n < 2 {
        return Err(RateError::InvalidSize(n));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let potentials: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0f64..1.0).exp()).collect();
    let rows = (0..n)
        .map(|i| {
            (0..n)
                .map(|j| {
                    if i == j {
                        T::one()
                    } else {
                        T::from_f64_exact(potentials[i] / potentials[j])
                    }
                })
                .collect()
        })
        .collect();
    RateMatrix::new(default_labels(n), rows)
}

/// Consistent market with independent multiplicative noise
/// `exp(U(-noise, noise))` on every off-diagonal quote. Such markets usually
/// contain arbitrage and have no ties between distinct loops.
pub fn generate_noisy<T: Real>(n: usize, seed: u64, noise: f64) -> Result<RateMatrix<T>, RateError> {
    let base: RateMatrix<T> = generate_consistent(n, seed)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x6e6f_6973_6521);
    let mut rows = base.rows();
    for (i, row) in rows.iter_mut().enumerate() {
        for (j, r) in row.iter_mut().enumerate() {
            if i != j && noise > 0.0 {
                *r = *r * T::from_f64_exact(rng.gen_range(-noise..noise).exp());
            }
        }
    }
    RateMatrix::new(base.labels, rows)
}

/// Multiplies the first edge of the directed `cycle` by `strength`, raising
/// the product around the cycle by that factor. Exactly one entry changes.
pub fn plant_cycle<T: Real>(
    base: &RateMatrix<T>,
    cycle: &[usize],
    strength: T,
) -> Result<RateMatrix<T>, RateError> {
    let n = base.n();
    if cycle.len() < 2 {
        return Err(RateError::InvalidCycle(format!(
            "need at least 2 currencies, got {}",
            cycle.len()
        )));
    }
    if let Some(&bad) = cycle.iter().find(|&&c| c >= n) {
        return Err(RateError::InvalidCycle(format!("index {bad} out of range for {n} currencies")));
    }
    for (k, c) in cycle.iter().enumerate() {
        if cycle[..k].contains(c) {
            return Err(RateError::InvalidCycle(format!("currency {c} repeated")));
        }
    }
    if !(strength.is_finite() && strength > T::one()) {
        return Err(RateError::InvalidStrength(strength.to_f64_lossy()));
    }
    let mut planted = base.clone();
    planted.rates[cycle[0] * n + cycle[1]] = base.rate(cycle[0], cycle[1]) * strength;
    planted.validate()?;
    Ok(planted)
}

fn default_labels(n: usize) -> Vec<String> {
    (0..n).map(|i| format!("C{i}")).collect()
}

#[derive(Debug, Serialize, Deserialize)]
struct RateRecord {
    from: String,
    to: String,
    rate: f64,
}

#[derive(Debug, Serialize, Deserialize)]
struct RateDocument {
    labels: Vec<String>,
    rates: Vec<Vec<f64>>,
}

/// Parses a rate table. Labels keep their order of first appearance (CSV) or
/// their listed order (JSON).
pub fn load_rates<R: Read>(source: R, format: RateFormat) -> Result<RateMatrix<f64>, RateError> {
    match format {
        RateFormat::Csv => load_csv(source),
        RateFormat::Json => {
            let doc: RateDocument =
                serde_json::from_reader(source).map_err(|e| RateError::Parse(e.to_string()))?;
            RateMatrix::new(doc.labels, doc.rates)
        }
    }
}

fn load_csv<R: Read>(source: R) -> Result<RateMatrix<f64>, RateError> {
    let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(source);
    let headers = reader.headers()?.clone();
    if headers.iter().collect::<Vec<_>>() != ["from", "to", "rate"] {
        return Err(RateError::Parse(format!(
            "expected header from,to,rate, got {}",
            headers.iter().collect::<Vec<_>>().join(",")
        )));
    }
    let mut labels: Vec<String> = Vec::new();
    let mut index: HashMap<String, usize> = HashMap::new();
    let mut entries: HashMap<(usize, usize), f64> = HashMap::new();
    for record in reader.deserialize() {
        let record: RateRecord = record?;
        let mut intern = |label: &str| -> usize {
            *index.entry(label.to_owned()).or_insert_with(|| {
                labels.push(label.to_owned());
                labels.len() - 1
            })
        };
        let from = intern(&record.from);
        let to = intern(&record.to);
        if !(record.rate.is_finite() && record.rate > 0.0) || (from == to && record.rate != 1.0) {
            return Err(RateError::InvalidRate {
                from: record.from,
                to: record.to,
                value: record.rate,
            });
        }
        if entries.insert((from, to), record.rate).is_some() {
            return Err(RateError::DuplicateEntry(format!("{} -> {}", record.from, record.to)));
        }
    }
    let n = labels.len();
    if n < 2 {
        return Err(RateError::InvalidSize(n));
    }
    let mut rows = vec![vec![1.0; n]; n];
    for (i, row) in rows.iter_mut().enumerate() {
        for (j, slot) in row.iter_mut().enumerate() {
            if i == j {
                continue;
            }
            *slot = *entries.get(&(i, j)).ok_or_else(|| RateError::IncompleteMatrix {
                from: labels[i].clone(),
                to: labels[j].clone(),
            })?;
        }
    }
    RateMatrix::new(labels, rows)
}

/// Writes every off-diagonal pair in row-major order. Output is a pure
/// function of the table, so equal tables give byte-identical files.
pub fn write_rates<W: Write>(
    rates: &RateMatrix<f64>,
    sink: W,
    format: RateFormat,
) -> Result<(), RateError> {
    match format {
        RateFormat::Csv => {
            let mut writer = csv::Writer::from_writer(sink);
            for i in 0..rates.n() {
                for j in 0..rates.n() {
                    if i != j {
                        writer.serialize(RateRecord {
                            from: rates.labels[i].clone(),
                            to: rates.labels[j].clone(),
                            rate: rates.rate(i, j),
                        })?;
                    }
                }
            }
            writer.flush()?;
        }
        RateFormat::Json => {
            let doc = RateDocument {
                labels: rates.labels.clone(),
                rates: rates.rows(),
            };
            serde_json::to_writer_pretty(sink, &doc).map_err(|e| RateError::Parse(e.to_string()))?;
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;
    use rand::Rng;

    const USD_EUR_GBP_CSV: &str = "from,to,rate\n\
        USD,EUR,0.85\nEUR,GBP,1.17\nGBP,USD,1.40\n\
        EUR,USD,1.1764705882352942\nGBP,EUR,0.8547008547008547\nUSD,GBP,0.7142857142857143\n";

    #[test]
    fn loads_three_currency_csv() {
        let rates = load_rates(USD_EUR_GBP_CSV.as_bytes(), RateFormat::Csv).unwrap();
        assert_eq!(rates.labels(), ["USD", "EUR", "GBP"]);
        assert_eq!(rates.rate(0, 1), 0.85);
        assert_eq!(rates.rate(1, 2), 1.17);
        assert_eq!(rates.rate(2, 0), 1.40);
        assert_eq!(rates.rate(1, 1), 1.0);
    }

    #[test]
    fn self_pairs_only_is_incomplete() {
        let csv = "from,to,rate\nUSD,USD,1\nEUR,EUR,1\n";
        assert!(matches!(
            load_rates(csv.as_bytes(), RateFormat::Csv),
            Err(RateError::IncompleteMatrix { .. })
        ));
    }

    #[test]
    fn missing_reverse_edge_is_incomplete() {
        let csv = "from,to,rate\nUSD,EUR,0.85\n";
        assert!(matches!(
            load_rates(csv.as_bytes(), RateFormat::Csv),
            Err(RateError::IncompleteMatrix { .. })
        ));
    }

    #[test]
    fn duplicate_pair_rejected() {
        let csv = "from,to,rate\nUSD,EUR,0.85\nEUR,USD,1.2\nUSD,EUR,0.86\n";
        assert!(matches!(
            load_rates(csv.as_bytes(), RateFormat::Csv),
            Err(RateError::DuplicateEntry(_))
        ));
    }

    #[test]
    fn negative_json_rate_rejected() {
        let json = r#"{"labels": ["USD", "EUR"], "rates": [[1, -1], [1, 1]]}"#;
        assert!(matches!(
            load_rates(json.as_bytes(), RateFormat::Json),
            Err(RateError::InvalidRate { .. })
        ));
    }

    #[test]
    fn non_unit_diagonal_rejected() {
        let json = r#"{"labels": ["USD", "EUR"], "rates": [[1.01, 0.9], [1.1, 1]]}"#;
        assert!(matches!(
            load_rates(json.as_bytes(), RateFormat::Json),
            Err(RateError::InvalidRate { .. })
        ));
    }

    #[test]
    fn single_currency_rejected() {
        assert!(matches!(generate_consistent::<f64>(1, 0), Err(RateError::InvalidSize(1))));
        let json = r#"{"labels": ["USD"], "rates": [[1]]}"#;
        assert!(matches!(
            load_rates(json.as_bytes(), RateFormat::Json),
            Err(RateError::InvalidSize(1))
        ));
    }

    #[test]
    fn csv_and_json_round_trip() {
        let rates = generate_noisy::<f64>(4, 11, 0.1).unwrap();
        for format in [RateFormat::Csv, RateFormat::Json] {
            let mut buf = Vec::new();
            write_rates(&rates, &mut buf, format).unwrap();
            assert_eq!(load_rates(buf.as_slice(), format).unwrap(), rates);
        }
    }

    #[test]
    fn consistent_is_deterministic_and_cycle_free() {
        let a = generate_consistent::<f64>(5, 7).unwrap();
        let b = generate_consistent::<f64>(5, 7).unwrap();
        assert_eq!(a, b);
        let small = generate_consistent::<f64>(3, 99).unwrap();
        for cycle in [[0, 1, 2, 0], [0, 2, 1, 0], [1, 2, 0, 1]] {
            assert_relative_eq!(small.walk_product(&cycle), 1.0, max_relative = 1e-12);
        }
    }

    #[test]
    fn log_weight_values() {
        let rates = load_rates(USD_EUR_GBP_CSV.as_bytes(), RateFormat::Csv).unwrap();
        let w = to_log_weights(&rates);
        assert_eq!(w.weight(1, 1), 0.0);
        // -ln 0.85
        assert!((w.weight(0, 1) - 0.162_518_929_5).abs() < 1e-9);
        let loop_sum = w.walk_sum(&[0, 1, 2, 0]);
        assert!((loop_sum - (-0.3310)).abs() < 1e-4);
        assert!(loop_sum < 0.0);
    }

    #[test]
    fn plant_cycle_boosts_first_edge_only() {
        let base = generate_consistent::<f64>(4, 3).unwrap();
        let planted = plant_cycle(&base, &[0, 1, 2], 1.05).unwrap();
        assert_relative_eq!(planted.walk_product(&[0, 1, 2, 0]), 1.05, max_relative = 1e-12);
        let changed: Vec<_> = (0..4)
            .flat_map(|i| (0..4).map(move |j| (i, j)))
            .filter(|&(i, j)| planted.rate(i, j) != base.rate(i, j))
            .collect();
        assert_eq!(changed, vec![(0, 1)]);
    }

    #[test]
    fn plant_cycle_errors() {
        let base = generate_consistent::<f64>(4, 3).unwrap();
        assert!(matches!(plant_cycle(&base, &[0, 1, 2], 1.0), Err(RateError::InvalidStrength(_))));
        assert!(matches!(plant_cycle(&base, &[0, 1, 0], 1.1), Err(RateError::InvalidCycle(_))));
        assert!(matches!(plant_cycle(&base, &[0], 1.1), Err(RateError::InvalidCycle(_))));
        assert!(matches!(plant_cycle(&base, &[0, 9], 1.1), Err(RateError::InvalidCycle(_))));
    }

    #[test]
    fn relabel_permutes_entries() {
        let rates = generate_noisy::<f64>(3, 5, 0.2).unwrap();
        let perm = [2, 0, 1];
        let moved = rates.relabel(&perm).unwrap();
        for i in 0..3 {
            assert_eq!(moved.labels()[perm[i]], rates.labels()[i]);
            for j in 0..3 {
                assert_eq!(moved.rate(perm[i], perm[j]), rates.rate(i, j));
            }
        }
        assert!(rates.relabel(&[0, 0, 1]).is_err());
    }

    #[test]
    fn works_in_single_precision() {
        let rates = generate_consistent::<f32>(3, 1).unwrap();
        let w = to_log_weights(&rates);
        assert!(w.walk_sum(&[0, 1, 2, 0]).abs() < 1e-5);
    }

    proptest! {
        #[test]
        fn log_weights_round_trip(n in 2usize..7, seed in any::<u64>(), noise in 0.0f64..0.5) {
            let rates = generate_noisy::<f64>(n, seed, noise).unwrap();
            let w = to_log_weights(&rates);
            for i in 0..n {
                for j in 0..n {
                    let back = (-w.weight(i, j)).exp();
                    prop_assert!((back - rates.rate(i, j)).abs() <= 1e-12 * rates.rate(i, j));
                }
            }
        }

        #[test]
        fn consistent_cycles_sum_to_zero(n in 2usize..6, seed in any::<u64>(), order_seed in any::<u64>()) {
            let mut order_rng = ChaCha8Rng::seed_from_u64(order_seed);
            let mut order: Vec<usize> = (0..6).collect();
            for i in (1..order.len()).rev() {
                order.swap(i, order_rng.gen_range(0..=i));
            }
            let rates = generate_consistent::<f64>(n, seed).unwrap();
            let w = to_log_weights(&rates);
            let mut cycle: Vec<usize> = order.into_iter().filter(|&c| c < n).collect();
            cycle.push(cycle[0]);
            prop_assert!(w.walk_sum(&cycle).abs() < 1e-9);
        }
    }
}
