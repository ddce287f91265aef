//! Independent reference implementations used only by tests.
#![allow(dead_code)]

use c2mab::RewardModelKind;

const FEAS_TOL: f64 = 1e-12;

/// Optimal value of `max w.z` over the two-row polytope, by enumerating every
/// basic solution: all coordinates but at most two sit at a bound, and the
/// fractional ones are pinned by the active rows. `None` when infeasible.
pub fn lp_vertex_oracle(w: &[f64], c: &[f64], n: usize, rho: f64, equality: bool) -> Option<f64> {
    let k = w.len();
    let nf = n as f64;
    let mut best: Option<f64> = None;
    let mut consider = |z: &[f64]| {
        let sum: f64 = z.iter().sum();
        let cost: f64 = z.iter().zip(c).map(|(a, b)| a * b).sum();
        let card_ok = if equality {
            (sum - nf).abs() <= 1e-9
        } else {
            sum <= nf + 1e-9
        };
        if card_ok && cost <= rho + 1e-9 && z.iter().all(|&v| (-FEAS_TOL..=1.0 + FEAS_TOL).contains(&v)) {
            let obj: f64 = z.iter().zip(w).map(|(a, b)| a * b).sum();
            best = Some(best.map_or(obj, |b: f64| b.max(obj)));
        }
    };
    let mut z = vec![0.0; k];
    for mask in 0u32..(1 << k) {
        // Bits of `mask` give the integral coordinates; fractional ones are overwritten below.
        for (i, zi) in z.iter_mut().enumerate() {
            *zi = f64::from((mask >> i) & 1);
        }
        consider(&z);
        for f in 0..k {
            let fixed_sum: f64 = (0..k).filter(|&i| i != f).map(|i| z[i]).sum();
            let fixed_cost: f64 = (0..k).filter(|&i| i != f).map(|i| z[i] * c[i]).sum();
            let saved = z[f];
            let mut cands = vec![nf - fixed_sum];
            if c[f] > 0.0 {
                cands.push((rho - fixed_cost) / c[f]);
            }
            for v in cands {
                if v > 0.0 && v < 1.0 {
                    z[f] = v;
                    consider(&z);
                }
            }
            z[f] = saved;
            for g in (f + 1)..k {
                if c[f] == c[g] {
                    continue;
                }
                let rest_sum: f64 = (0..k).filter(|&i| i != f && i != g).map(|i| z[i]).sum();
                let rest_cost: f64 = (0..k).filter(|&i| i != f && i != g).map(|i| z[i] * c[i]).sum();
                let s = nf - rest_sum;
                let b = rho - rest_cost;
                // z_f + z_g = s, c_f z_f + c_g z_g = b
                let zf = (b - c[g] * s) / (c[f] - c[g]);
                let zg = s - zf;
                let (sf, sg) = (z[f], z[g]);
                z[f] = zf;
                z[g] = zg;
                consider(&z);
                z[f] = sf;
                z[g] = sg;
            }
        }
    }
    best
}

pub fn reward_of(model: RewardModelKind, members: &[usize], mu: &[f64]) -> f64 {
    match model {
        RewardModelKind::Awc => 1.0 - members.iter().fold(1.0, |a, &k| a * (1.0 - mu[k])),
        RewardModelKind::Suc => members.iter().fold(0.0, |a, &k| a + mu[k]),
        RewardModelKind::Aic => members.iter().fold(1.0, |a, &k| a * mu[k]),
    }
}

/// Best feasible subset by bitmask enumeration; `None` when no subset fits the budget.
pub fn brute_force_budgeted(
    model: RewardModelKind,
    mu: &[f64],
    c: &[f64],
    n: usize,
    rho: f64,
) -> Option<(Vec<usize>, f64)> {
    let k = mu.len();
    let mut best: Option<(Vec<usize>, f64)> = None;
    for mask in 0u64..(1 << k) {
        let members: Vec<usize> = (0..k).filter(|i| mask >> i & 1 == 1).collect();
        let size_ok = match model {
            RewardModelKind::Awc => members.len() <= n,
            _ => members.len() == n,
        };
        let cost: f64 = members.iter().map(|&i| c[i]).sum();
        if !size_ok || cost > rho {
            continue;
        }
        let value = reward_of(model, &members, mu);
        let better = match &best {
            None => true,
            Some((set, v)) => value > *v || (value == *v && members < *set),
        };
        if better {
            best = Some((members, value));
        }
    }
    best
}

/// Standard deviation of a Bernoulli frequency estimate.
pub fn binomial_sigma(p: f64, trials: usize) -> f64 {
    (p * (1.0 - p) / trials as f64).sqrt()
}
