use fxqubo::bench::run_batches;
use fxqubo::oracle::best_cycle_bruteforce;
use fxqubo::rates::{generate_consistent, generate_noisy, plant_cycle};
use fxqubo::solvers::{ground_state, sample_sa, sample_tabu};
use fxqubo::{ArbitrageModel, ProblemShape, QuboMatrix, SamplerParams, SolverKind, ENERGY_TOLERANCE};
use proptest::prelude::*;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn planted_model(n: usize, k: usize, seed: u64) -> ArbitrageModel<f64> {
    let base = generate_consistent(n, seed).unwrap();
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed + 17));
    let rates = plant_cycle(&base, &order[..k - 1], 1.05).unwrap();
    ArbitrageModel::with_default_weights(rates, ProblemShape::new(n, k).unwrap()).unwrap()
}

/// Conversions of a closed walk with stays dropped, in smallest rotation;
/// where a stay sits inside the loop does not change its profit.
fn conversions(walk: &[usize]) -> Vec<usize> {
    let mut open: Vec<usize> = walk.windows(2).filter(|w| w[0] != w[1]).map(|w| w[0]).collect();
    if open.is_empty() {
        open.push(walk[0]);
    }
    (0..open.len()).map(|r| open[r..].iter().chain(&open[..r]).copied().collect()).min().unwrap()
}

#[test]
fn sa_finds_small_planted_optimum() {
    for seed in 0..5 {
        let model = planted_model(3, 4, seed);
        let (_, optimum) = ground_state(&model.qubo).unwrap();
        let set = sample_sa(&model.qubo, &SamplerParams::with_reads(500, seed)).unwrap();
        assert!((set.best().unwrap().energy - optimum).abs() < ENERGY_TOLERANCE, "seed {seed}");
    }
}

#[test]
fn sa_batches_reach_optimum_on_five_currencies() {
    let model = planted_model(5, 4, 3);
    let report = run_batches(&SolverKind::SimulatedAnnealing, &model.qubo, &SamplerParams::with_reads(500, 8), 10).unwrap();
    let hits = report.rows().iter().filter(|r| r.first_optimum_read.is_some()).count();
    assert!(hits * 100 >= 95 * report.rows().len(), "{hits}/10 batches reached the optimum");
}

#[test]
fn sa_energy_trends_down_with_final_beta() {
    let model = planted_model(4, 4, 5);
    let median_energy = |beta_end: f64| {
        let mut finals: Vec<f64> = (0..20u64)
            .map(|seed| {
                let p = SamplerParams { sweeps_per_read: 200, beta_end, ..SamplerParams::with_reads(4, seed) };
                let set = sample_sa(&model.qubo, &p).unwrap();
                set.samples().iter().map(|s| s.energy).sum::<f64>() / set.len() as f64
            })
            .collect();
        finals.sort_by(f64::total_cmp);
        (finals[9] + finals[10]) / 2.0
    };
    let medians: Vec<f64> = [0.5, 2.0, 10.0, 50.0].into_iter().map(median_energy).collect();
    // once annealing saturates the medians only differ by sampling noise
    for pair in medians.windows(2) {
        assert!(pair[1] <= pair[0] + 1e-3 * pair[0].abs(), "medians {medians:?}");
    }
}

#[test]
fn ground_state_is_equivariant_under_relabeling() {
    let mut rng = ChaCha8Rng::seed_from_u64(42);
    for seed in 0..12u64 {
        let n = 3 + (seed as usize % 2);
        let shape = ProblemShape::new(n, 4).unwrap();
        let rates = generate_noisy::<f64>(n, seed, 0.2).unwrap();
        let mut perm: Vec<usize> = (0..n).collect();
        perm.shuffle(&mut rng);
        let relabeled = rates.relabel(&perm).unwrap();

        let a = ArbitrageModel::with_default_weights(rates, shape).unwrap();
        let b = ArbitrageModel::with_default_weights(relabeled, shape).unwrap();
        let la = a.decode(&ground_state(&a.qubo).unwrap().0).unwrap();
        let lb = b.decode(&ground_state(&b.qubo).unwrap().0).unwrap();
        let (pa, pb) = (la.profitability.unwrap(), lb.profitability.unwrap());
        assert!((pa - pb).abs() < 1e-12, "seed {seed}: {pa} vs {pb}");
        let oracle = best_cycle_bruteforce(&b.rates, 4).unwrap();
        assert!((oracle.best_profit - pb).abs() < 1e-9);

        if pa <= 1.0 + 1e-9 {
            // arbitrage-free: every loop of stays ties at P = 1
            continue;
        }
        let ca = la.canonical_cycle().unwrap();
        let cb = lb.canonical_cycle().unwrap();
        let mapped: Vec<usize> = ca.iter().map(|&c| perm[c]).collect();
        assert_eq!(conversions(&mapped), conversions(&cb), "seed {seed}");
    }
}

fn random_qubo(n: usize, seed: u64) -> QuboMatrix<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut q = QuboMatrix::new(n);
    for i in 0..n {
        for j in i..n {
            q.add_coefficient(i, j, rng.gen_range(-3.0..3.0)).unwrap();
        }
    }
    q
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn sampled_energies_re_evaluate(n in 1usize..16, seed in any::<u64>(), reads in 1usize..6) {
        let q = random_qubo(n, seed);
        let p = SamplerParams { sweeps_per_read: 50, ..SamplerParams::with_reads(reads, seed) };
        for set in [sample_sa(&q, &p).unwrap(), sample_tabu(&q, &p).unwrap()] {
            prop_assert!(set.max_energy_error(&q).unwrap() <= 1e-9);
            let indices: Vec<usize> = set.samples().iter().map(|s| s.read_index).collect();
            prop_assert_eq!(indices, (1..=reads).collect::<Vec<_>>());
        }
    }

    #[test]
    fn tabu_never_beats_the_ground_state(n in 1usize..12, seed in any::<u64>()) {
        let q = random_qubo(n, seed);
        let (_, optimum) = ground_state(&q).unwrap();
        let set = sample_tabu(&q, &SamplerParams::with_reads(3, seed)).unwrap();
        prop_assert!(set.samples().iter().all(|s| s.energy >= optimum - 1e-9));
    }
}
