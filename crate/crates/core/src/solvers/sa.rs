use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::{apply_flip, flip_delta, local_fields, random_bits, read_seed, SamplerParams, SolverError};
use crate::qubo::{QuboMatrix, SampleSet};
use crate::scalar::Real;

/// Geometric interpolation from `beta_start` to `beta_end` over `sweeps`
/// points. A single sweep runs at `beta_end`.
pub fn beta_schedule(beta_start: f64, beta_end: f64, sweeps: usize) -> Vec<f64> {
    if sweeps <= 1 {
        return vec![beta_end; sweeps];
    }
    let ratio = (beta_end / beta_start).ln() / (sweeps - 1) as f64;
    (0..sweeps)
        .map(|s| beta_start * (ratio * s as f64).exp())
        .collect()
}

/// Single-flip Metropolis annealing, one independent restart per read.
///
/// The schedule runs from `beta_start / max|q|` to `beta_end / max|q|`. Each
/// read starts from a random vector drawn from its own generator seeded with
/// `seed ^ read_index`, so the result does not depend on how reads are
/// scheduled across threads. The final state of every read is reported.
pub fn sample_sa<T: Real>(q: &QuboMatrix<T>, params: &SamplerParams) -> Result<SampleSet<T>, SolverError> {
    params.validate()?;
    let start = Instant::now();
    let scale = q.max_abs_coefficient().to_f64_lossy();
    let scale = if scale > 0.0 { scale } else { 1.0 };
    let schedule: Vec<T> = beta_schedule(params.beta_start / scale, params.beta_end / scale, params.sweeps_per_read)
        .into_iter()
        .map(T::from_f64_exact)
        .collect();

    let reads: Vec<(Vec<bool>, T)> = (1..=params.num_reads)
        .into_par_iter()
        .map(|read_index| anneal_read(q, &schedule, read_seed(params.seed, read_index)))
        .collect();

    let mut set = SampleSet::from_reads("simulated_annealing", reads);
    set.params = Some(params.clone());
    set.timing.insert("total_us".into(), start.elapsed().as_secs_f64() * 1e6);
    Ok(set)
}

fn anneal_read<T: Real>(q: &QuboMatrix<T>, schedule: &[T], seed: u64) -> (Vec<bool>, T) {
    let n = q.n_vars();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut x = random_bits(n, &mut rng);
    let mut fields = local_fields(q, &x);
    let mut energy = q.energy_unchecked(&x);
    for &beta in schedule {
        for i in 0..n {
            let delta = flip_delta(&x, &fields, i);
            let accept = delta <= T::zero() || {
                let u: f64 = rng.gen();
                T::from_f64_exact(u) < (-beta * delta).exp()
            };
            if accept {
                apply_flip(q, &mut x, &mut fields, &mut energy, i);
            }
        }
    }
    // drop accumulated rounding from the incremental updates
    let energy = q.energy_unchecked(&x);
    (x, energy)
}
