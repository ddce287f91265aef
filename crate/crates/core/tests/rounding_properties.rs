mod common;

use c2mab::reward::relaxed_reward;
use c2mab::rounding::{dependent_round, swap_round};
use c2mab::{FractionalSelection, RewardModelKind};
use common::binomial_sigma;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const TRIALS: usize = 100_000;

fn random_point(rng: &mut ChaCha8Rng, k: usize, n: usize, exact_sum: bool) -> Vec<f64> {
    loop {
        let mut z: Vec<f64> = (0..k).map(|_| rng.random::<f64>()).collect();
        let s: f64 = z.iter().sum();
        if exact_sum || s > n as f64 {
            z.iter_mut().for_each(|v| *v *= n as f64 / s);
        }
        if z.iter().all(|v| *v <= 1.0) {
            return z;
        }
    }
}

fn frequencies<F: FnMut(&mut ChaCha8Rng) -> Vec<usize>>(k: usize, seed: u64, mut round: F) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut hits = vec![0usize; k];
    for _ in 0..TRIALS {
        for i in round(&mut rng) {
            hits[i] += 1;
        }
    }
    hits.iter().map(|&h| h as f64 / TRIALS as f64).collect()
}

fn assert_marginals(freq: &[f64], z: &[f64]) {
    for (f, p) in freq.iter().zip(z) {
        let sigma = binomial_sigma(*p, TRIALS).max(1e-12);
        assert!((f - p).abs() <= 3.0 * sigma + 1e-12, "freq {freq:?} vs z {z:?}");
    }
}

#[test]
fn swap_rounding_preserves_marginals() {
    let mut rng = ChaCha8Rng::seed_from_u64(100);
    for case in 0..4u64 {
        let k = rng.random_range(2..=8);
        let n = rng.random_range(1..=k);
        let z = random_point(&mut rng, k, n, false);
        let zs = FractionalSelection::new(z.clone()).unwrap();
        let freq = frequencies(k, case, |r| {
            let s = swap_round(&zs, n, r).unwrap();
            assert!(s.len() <= n);
            s.indices().collect()
        });
        assert_marginals(&freq, &z);
    }
}

#[test]
fn dependent_rounding_preserves_marginals() {
    let mut rng = ChaCha8Rng::seed_from_u64(200);
    for case in 0..4u64 {
        let k = rng.random_range(2..=8);
        let n = rng.random_range(1..k);
        let z = random_point(&mut rng, k, n, true);
        let zs = FractionalSelection::new(z.clone()).unwrap();
        let freq = frequencies(k, case, |r| {
            let s = dependent_round(&zs, r);
            assert_eq!(s.len(), n);
            s.indices().collect()
        });
        assert_marginals(&freq, &z);
    }
}

#[test]
fn rounding_does_not_lose_relaxed_value() {
    let mut rng = ChaCha8Rng::seed_from_u64(300);
    for case in 0..3u64 {
        let k = 6;
        let n = 3;
        let mu: Vec<f64> = (0..k).map(|_| rng.random::<f64>()).collect();
        let z = random_point(&mut rng, k, n, false);
        let zs = FractionalSelection::new(z.clone()).unwrap();
        let target = relaxed_reward(RewardModelKind::Awc, &zs, &mu).unwrap();
        let mut trial_rng = ChaCha8Rng::seed_from_u64(case);
        let values: Vec<f64> = (0..TRIALS)
            .map(|_| {
                let s = swap_round(&zs, n, &mut trial_rng).unwrap();
                let ind = FractionalSelection::from_action(&s, k);
                relaxed_reward(RewardModelKind::Awc, &ind, &mu).unwrap()
            })
            .collect();
        let mean = values.iter().sum::<f64>() / TRIALS as f64;
        let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (TRIALS - 1) as f64;
        let se = (var / TRIALS as f64).sqrt();
        assert!(mean >= target - 3.0 * se, "mean {mean} < relaxed {target} - 3 * {se}");
    }
}
