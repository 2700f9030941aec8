//! Ground truth for arbitrage instances, computed directly on the rate table
//! without going through the QUBO.

use thiserror::Error;

use crate::rates::{LogWeightMatrix, RateMatrix};
use crate::scalar::Real;

/// Products within this relative margin of each other count as ties.
pub const PROFIT_TIE_TOLERANCE: f64 = 1e-12;

/// Largest currency count the exhaustive search accepts.
pub const MAX_ORACLE_CURRENCIES: usize = 10;

#[derive(Debug, Error)]
pub enum OracleError {
    #[error("{n} currencies exceed the exhaustive limit of {max}")]
    TooLarge { n: usize, max: usize },
    #[error("loop length {k} must lie in 2..={max}")]
    InvalidLength { k: usize, max: usize },
}

#[derive(Debug, Clone, PartialEq)]
pub struct OracleResult<T> {
    /// Closed loop, first entry repeated at the end.
    pub best_cycle: Vec<usize>,
    pub best_profit: T,
    pub has_arbitrage: bool,
}

/// Most profitable closed loop of at most `max_len` positions (so at most
/// `max_len - 1` conversions) visiting distinct currencies.
///
/// Loops are scanned by length, then lexicographically; a later loop only
/// replaces the incumbent when its product is larger by more than
/// [`PROFIT_TIE_TOLERANCE`] (relative), so ties resolve to the shortest and
/// then lexicographically smallest loop. The trivial loop `[0, 0]` with
/// product one is always a candidate.
pub fn best_cycle_bruteforce<T: Real>(rates: &RateMatrix<T>, max_len: usize) -> Result<OracleResult<T>, OracleError> {
    let n = rates.n();
    if n > MAX_ORACLE_CURRENCIES {
        return Err(OracleError::TooLarge { n, max: MAX_ORACLE_CURRENCIES });
    }
    if max_len < 2 || max_len > n + 1 {
        return Err(OracleError::InvalidLength { k: max_len, max: n + 1 });
    }
    let margin = T::one() + T::from_f64_exact(PROFIT_TIE_TOLERANCE);
    let mut best_cycle = vec![0, 0];
    let mut best_profit = T::one();
    let mut path = Vec::with_capacity(max_len);
    let mut used = vec![false; n];
    for distinct in 2..max_len {
        for start in 0..n {
            path.clear();
            path.push(start);
            used[start] = true;
            extend(rates, distinct, &mut path, &mut used, &mut |p, product| {
                if product > best_profit * margin {
                    best_profit = product;
                    best_cycle = p.to_vec();
                    best_cycle.push(p[0]);
                }
            });
            used[start] = false;
        }
    }
    let has_arbitrage = best_profit > margin;
    Ok(OracleResult { best_cycle, best_profit, has_arbitrage })
}

/// Depth-first enumeration of simple paths of `target` currencies starting at
/// `path[0]`, in lexicographic order, reporting each closed product.
fn extend<T: Real>(
    rates: &RateMatrix<T>,
    target: usize,
    path: &mut Vec<usize>,
    used: &mut [bool],
    report: &mut impl FnMut(&[usize], T),
) {
    if path.len() == target {
        let closing = rates.rate(path[target - 1], path[0]);
        report(path, rates.walk_product(path) * closing);
        return;
    }
    for next in 0..rates.n() {
        if !used[next] {
            used[next] = true;
            path.push(next);
            extend(rates, target, path, used, report);
            path.pop();
            used[next] = false;
        }
    }
}

/// Negative-cycle test on the log-weight graph: a virtual source at distance
/// zero to every currency, `|V|` relaxation rounds, then one detection round.
/// Relaxations smaller than `1e-12` are ignored so rounding noise on an
/// arbitrage-free table does not register as a cycle.
pub fn has_arbitrage_bellman_ford<T: Real>(weights: &LogWeightMatrix<T>) -> bool {
    let n = weights.n();
    let eps = T::from_f64_exact(PROFIT_TIE_TOLERANCE);
    let mut dist = vec![T::zero(); n];
    let relax = |dist: &mut Vec<T>| {
        let mut changed = false;
        for u in 0..n {
            for v in (0..n).filter(|&v| v != u) {
                let candidate = dist[u] + weights.weight(u, v);
                if candidate < dist[v] - eps {
                    dist[v] = candidate;
                    changed = true;
                }
            }
        }
        changed
    };
    // n + 1 vertices counting the virtual source
    for _ in 0..=n {
        if !relax(&mut dist) {
            return false;
        }
    }
    relax(&mut dist)
}
