use std::cmp::Ordering;
use std::time::Instant;

use super::SolverError;
use crate::qubo::{QuboMatrix, Sample, SampleOrdering, SampleSet};
use crate::scalar::Scalar;

/// Largest variable count accepted by exhaustive enumeration.
pub const MAX_EXACT_VARS: usize = 26;

fn check_size(n: usize) -> Result<(), SolverError> {
    if n > MAX_EXACT_VARS {
        return Err(SolverError::TooLarge { n_vars: n, max: MAX_EXACT_VARS });
    }
    Ok(())
}

fn mask_bits(mask: u64, n: usize) -> Vec<bool> {
    (0..n).map(|b| mask >> b & 1 == 1).collect()
}

/// Key whose numeric order is the lexicographic order of the bit vector,
/// bit 0 most significant.
fn lex_key(mask: u64, n: usize) -> u64 {
    if n == 0 {
        0
    } else {
        mask.reverse_bits() >> (64 - n)
    }
}

/// Visits all `2^n` states in Gray-code order, passing `(mask, energy)`.
/// Energies are updated one flip at a time from fresh local fields.
fn enumerate<T: Scalar>(q: &QuboMatrix<T>, mut visit: impl FnMut(u64, T)) {
    let n = q.n_vars();
    let mut x = vec![false; n];
    let mut energy = q.offset();
    let mut mask = 0u64;
    visit(mask, energy);
    for step in 1u64..(1u64 << n) {
        let bit = step.trailing_zeros() as usize;
        let field = q.local_field(&x, bit);
        energy += if x[bit] { -field } else { field };
        x[bit] = !x[bit];
        mask ^= 1 << bit;
        visit(mask, energy);
    }
}

/// All `2^n` states in ascending energy, ties in lexicographic bit order.
pub fn solve_exact<T: Scalar>(q: &QuboMatrix<T>) -> Result<SampleSet<T>, SolverError> {
    let n = q.n_vars();
    check_size(n)?;
    let start = Instant::now();
    let mut energies = vec![q.offset(); 1usize << n];
    enumerate(q, |mask, e| energies[mask as usize] = e);
    let mut order: Vec<u64> = (0..1u64 << n).collect();
    order.sort_unstable_by(|&a, &b| {
        energies[a as usize]
            .partial_cmp(&energies[b as usize])
            .unwrap_or(Ordering::Equal)
            .then_with(|| lex_key(a, n).cmp(&lex_key(b, n)))
    });
    let samples = order
        .into_iter()
        .enumerate()
        .map(|(k, mask)| Sample {
            bits: mask_bits(mask, n),
            energy: energies[mask as usize],
            read_index: k + 1,
        })
        .collect();
    let mut set = SampleSet::from_samples("exact", SampleOrdering::EnergySorted, samples)?;
    set.timing.insert("total_us".into(), start.elapsed().as_secs_f64() * 1e6);
    Ok(set)
}

/// Minimum-energy state without materializing the whole spectrum. Among
/// exact ties the lexicographically smallest vector wins; the returned energy
/// is re-evaluated from scratch.
pub fn ground_state<T: Scalar>(q: &QuboMatrix<T>) -> Result<(Vec<bool>, T), SolverError> {
    let n = q.n_vars();
    check_size(n)?;
    let mut best: Option<(u64, T)> = None;
    enumerate(q, |mask, e| {
        let better = match best {
            None => true,
            Some((m, b)) => e < b || (e == b && lex_key(mask, n) < lex_key(m, n)),
        };
        if better {
            best = Some((mask, e));
        }
    });
    let (mask, _) = best.expect("at least one state");
    let bits = mask_bits(mask, n);
    let energy = q.energy(&bits)?;
    Ok((bits, energy))
}
