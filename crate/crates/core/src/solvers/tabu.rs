use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::{apply_flip, flip_delta, local_fields, random_bits, read_seed, SamplerParams, SolverError};
use crate::qubo::{QuboMatrix, SampleSet};
use crate::scalar::Scalar;

/// One accepted move of a traced tabu read.
#[derive(Debug, Clone, PartialEq)]
pub struct TabuStep {
    /// 1-based iteration number.
    pub iteration: usize,
    pub flipped: usize,
    /// Best energy of the read before this move.
    pub best_before: f64,
    pub energy_after: f64,
}

/// Steepest-descent single-flip tabu search, one independent restart per read.
///
/// A variable flipped at iteration `t` may not be flipped again during
/// iterations `t + 1 ..= t + tenure` unless the move would beat the read's
/// best energy (aspiration). Ties between equally good moves are broken
/// uniformly at random. A read stops after `max_iterations_per_read`
/// consecutive iterations without improving its best, and reports the best
/// state it visited.
pub fn sample_tabu<T: Scalar>(q: &QuboMatrix<T>, params: &SamplerParams) -> Result<SampleSet<T>, SolverError> {
    params.validate()?;
    let start = Instant::now();
    let reads: Vec<(Vec<bool>, T)> = (1..=params.num_reads)
        .into_par_iter()
        .map(|read_index| search_read(q, params, read_index, None))
        .collect();
    let mut set = SampleSet::from_reads("tabu", reads);
    set.params = Some(params.clone());
    set.timing.insert("total_us".into(), start.elapsed().as_secs_f64() * 1e6);
    Ok(set)
}

/// Runs read `read_index` alone and records every move it makes.
pub fn tabu_read_traced<T: Scalar>(
    q: &QuboMatrix<T>,
    params: &SamplerParams,
    read_index: usize,
) -> Result<(Vec<bool>, T, Vec<TabuStep>), SolverError> {
    params.validate()?;
    let mut trace = Vec::new();
    let (bits, energy) = search_read(q, params, read_index, Some(&mut trace));
    Ok((bits, energy, trace))
}

/// Strict improvement beyond rounding noise of the incremental updates;
/// without the margin a flip and its reversal can drift below the best by an
/// ulp and restart the patience counter forever.
fn improves<T: Scalar>(candidate: T, best: T) -> bool {
    let margin = 1e-12 * (1.0 + best.abs().to_f64_lossy());
    (best - candidate).to_f64_lossy() > margin
}

fn search_read<T: Scalar>(
    q: &QuboMatrix<T>,
    params: &SamplerParams,
    read_index: usize,
    mut trace: Option<&mut Vec<TabuStep>>,
) -> (Vec<bool>, T) {
    let n = q.n_vars();
    let mut rng = ChaCha8Rng::seed_from_u64(read_seed(params.seed, read_index));
    let mut x = random_bits(n, &mut rng);
    if n == 0 {
        return (x, q.offset());
    }
    // at least one move must stay available
    let tenure = params.tenure_for(n).min(n - 1);
    let patience = params.max_iterations_for(n);

    let mut fields = local_fields(q, &x);
    let mut energy = q.energy_unchecked(&x);
    let mut best = x.clone();
    let mut best_energy = energy;
    let mut last_flip: Vec<Option<usize>> = vec![None; n];
    let mut iteration = 0usize;
    let mut stale = 0usize;

    while stale < patience {
        iteration += 1;
        let mut chosen: Option<(usize, T)> = None;
        let mut ties = 0u32;
        for i in 0..n {
            let delta = flip_delta(&x, &fields, i);
            let tabu = last_flip[i].is_some_and(|t| iteration <= t + tenure);
            if tabu && !improves(energy + delta, best_energy) {
                continue;
            }
            match chosen {
                Some((_, d)) if delta > d => {}
                Some((_, d)) if delta == d => {
                    ties += 1;
                    if rng.gen_range(0..ties) == 0 {
                        chosen = Some((i, delta));
                    }
                }
                _ => {
                    chosen = Some((i, delta));
                    ties = 1;
                }
            }
        }
        let Some((i, _)) = chosen else { break };
        let best_before = best_energy;
        apply_flip(q, &mut x, &mut fields, &mut energy, i);
        last_flip[i] = Some(iteration);
        if let Some(trace) = trace.as_deref_mut() {
            trace.push(TabuStep {
                iteration,
                flipped: i,
                best_before: best_before.to_f64_lossy(),
                energy_after: energy.to_f64_lossy(),
            });
        }
        if improves(energy, best_energy) {
            best_energy = energy;
            best.clone_from(&x);
            stale = 0;
        } else {
            stale += 1;
        }
    }
    let best_energy = q.energy_unchecked(&best);
    (best, best_energy)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::solvers::ground_state;
    use rand::Rng;

    fn random_qubo(n: usize, seed: u64) -> QuboMatrix<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut q = QuboMatrix::new(n);
        for i in 0..n {
            for j in i..n {
                q.add_coefficient(i, j, rng.gen_range(-2.0..2.0)).unwrap();
            }
        }
        q
    }

    #[test]
    fn negative_diagonal_reaches_all_ones() {
        let mut q = QuboMatrix::<f64>::new(10);
        for i in 0..10 {
            q.add_coefficient(i, i, -1.0 - i as f64).unwrap();
        }
        let set = sample_tabu(&q, &SamplerParams::with_reads(1, 3)).unwrap();
        assert_eq!(set.samples()[0].bits, vec![true; 10]);
        assert_eq!(set.samples()[0].read_index, 1);
    }

    #[test]
    fn deterministic_for_fixed_seed() {
        let q = random_qubo(12, 1);
        let p = SamplerParams::with_reads(8, 77);
        let a = sample_tabu(&q, &p).unwrap();
        let b = sample_tabu(&q, &p).unwrap();
        assert_eq!(a.samples(), b.samples());
        assert!(a.max_energy_error(&q).unwrap() < 1e-9);
    }

    #[test]
    fn finds_ground_state_of_small_random_instances() {
        for seed in 0..10 {
            let q = random_qubo(14, seed);
            let (_, optimum) = ground_state(&q).unwrap();
            let set = sample_tabu(&q, &SamplerParams::with_reads(1, seed)).unwrap();
            assert!((set.samples()[0].energy - optimum).abs() < 1e-9, "seed {seed}");
        }
    }

    #[test]
    fn tabu_moves_only_under_aspiration() {
        for seed in 0..5 {
            let q = random_qubo(9, 100 + seed);
            let params = SamplerParams { tabu_tenure: Some(3), ..SamplerParams::with_reads(1, seed) };
            let (_, _, trace) = tabu_read_traced(&q, &params, 1).unwrap();
            assert!(!trace.is_empty());
            let mut last: Vec<Option<usize>> = vec![None; 9];
            for step in &trace {
                if let Some(t) = last[step.flipped] {
                    if step.iteration <= t + 3 {
                        assert!(
                            step.energy_after < step.best_before,
                            "tabu move at iteration {} without aspiration",
                            step.iteration
                        );
                    }
                }
                last[step.flipped] = Some(step.iteration);
            }
        }
    }

    #[test]
    fn trace_matches_untraced_result() {
        let q = random_qubo(10, 4);
        let params = SamplerParams::with_reads(3, 9);
        let set = sample_tabu(&q, &params).unwrap();
        for read in 1..=3 {
            let (bits, energy, _) = tabu_read_traced(&q, &params, read).unwrap();
            assert_eq!(bits, set.samples()[read - 1].bits);
            assert_eq!(energy, set.samples()[read - 1].energy);
        }
    }

    #[test]
    fn oversized_tenure_is_clamped() {
        let q = random_qubo(3, 2);
        let params = SamplerParams { tabu_tenure: Some(50), ..SamplerParams::with_reads(2, 1) };
        assert_eq!(sample_tabu(&q, &params).unwrap().len(), 2);
    }
}
