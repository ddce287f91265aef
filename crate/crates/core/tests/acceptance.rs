//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any fails.

mod common;

use std::fs;
use std::process::ExitCode;
use std::time::Instant;

use c2mab::config::{ExperimentConfig, InstanceSpec};
use c2mab::env::RoundOutcome;
use c2mab::learner::EstimatorState;
use c2mab::metrics::{theorem_bounds, RunSummary};
use c2mab::oracle::best_budgeted_action;
use c2mab::policy::PolicyKind;
use c2mab::relax::{solve_awc, solve_two_row_lp, RelaxedProblem};
use c2mab::reward::relaxed_reward;
use c2mab::rounding::{dependent_round, swap_round};
use c2mab::runner::{message_log_path, replay_to_csv, run_csv_path, run_experiment, run_policy, Replication};
use c2mab::{ActionSet, ArmId, FractionalSelection, RewardModelKind};
use common::lp_vertex_oracle;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const HORIZON: u64 = 10_000;
const SEEDS: u64 = 10;

struct Verdict {
    pass: bool,
    detail: String,
}

impl Verdict {
    fn new(pass: bool, detail: impl Into<String>) -> Self {
        Self {
            pass,
            detail: detail.into(),
        }
    }
}

fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

fn median(xs: &[f64]) -> f64 {
    let mut v = xs.to_vec();
    v.sort_by(f64::total_cmp);
    let m = v.len() / 2;
    if v.len() % 2 == 1 {
        v[m]
    } else {
        0.5 * (v[m - 1] + v[m])
    }
}

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

fn preset_config(preset: &str, horizon: u64) -> ExperimentConfig {
    let mut cfg = ExperimentConfig::with_instance(InstanceSpec::preset(preset).unwrap());
    cfg.horizon = horizon;
    cfg
}

/// Runs `kind` on replications `0..seeds` of `cfg`.
fn runs(cfg: &ExperimentConfig, kind: &PolicyKind, seeds: u64) -> Vec<RunSummary> {
    (0..seeds)
        .map(|i| {
            let rep = Replication::prepare(cfg, i).unwrap();
            run_policy(cfg, &rep, kind, None).unwrap()
        })
        .collect()
}

fn rounding_marginals() -> Verdict {
    const TRIALS: usize = 200_000;
    let (k, n) = (6, 3);
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut worst = [0.0f64; 2];
    for case in 0..20 {
        let swap_z = random_point(&mut rng, k, n, false);
        let dep_z = random_point(&mut rng, k, n, true);
        for (which, z) in [swap_z, dep_z].into_iter().enumerate() {
            let zs = FractionalSelection::new(z.clone()).unwrap();
            let mut trial_rng = ChaCha8Rng::seed_from_u64(1000 + case);
            let mut hits = [0usize; 6];
            for _ in 0..TRIALS {
                let s = if which == 0 {
                    swap_round(&zs, n, &mut trial_rng).unwrap()
                } else {
                    dependent_round(&zs, &mut trial_rng)
                };
                s.indices().for_each(|i| hits[i] += 1);
            }
            for i in 0..k {
                worst[which] = worst[which].max((hits[i] as f64 / TRIALS as f64 - z[i]).abs());
            }
        }
    }
    Verdict::new(
        worst.iter().all(|&w| w <= 0.01),
        format!(
            "max |freq - z|: swap {:.5}, dependent {:.5} (tol 0.01)",
            worst[0], worst[1]
        ),
    )
}

fn convexity() -> Verdict {
    const TRIALS: usize = 100_000;
    let (k, n) = (6, 3);
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut worst_awc = f64::INFINITY;
    let mut worst_suc = 0.0f64;
    let mut pass = true;
    for case in 0..20 {
        let mu: Vec<f64> = (0..k).map(|_| rng.random::<f64>()).collect();
        for model in [RewardModelKind::Awc, RewardModelKind::Suc] {
            let z = random_point(&mut rng, k, n, model == RewardModelKind::Suc);
            let zs = FractionalSelection::new(z).unwrap();
            let target = relaxed_reward(model, &zs, &mu).unwrap();
            let mut trial_rng = ChaCha8Rng::seed_from_u64(2000 + case);
            let values: Vec<f64> = (0..TRIALS)
                .map(|_| {
                    let s = match model {
                        RewardModelKind::Awc => swap_round(&zs, n, &mut trial_rng).unwrap(),
                        _ => dependent_round(&zs, &mut trial_rng),
                    };
                    relaxed_reward(model, &FractionalSelection::from_action(&s, k), &mu).unwrap()
                })
                .collect();
            let m = mean(&values);
            let var = values.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (TRIALS - 1) as f64;
            let se = (var / TRIALS as f64).sqrt();
            // Gap in units of the Monte-Carlo standard error.
            let z_score = (m - target) / se.max(1e-12);
            if model == RewardModelKind::Awc {
                worst_awc = worst_awc.min(z_score);
                pass &= m >= target - 3.0 * se;
            } else {
                worst_suc = worst_suc.max(z_score.abs());
                pass &= (m - target).abs() <= 3.0 * se + 1e-12;
            }
        }
    }
    Verdict::new(
        pass,
        format!("AWC min (mean - relaxed)/sigma {worst_awc:.2} (>= -3); SUC max |gap|/sigma {worst_suc:.2} (<= 3)"),
    )
}

fn lp_kernel() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let start = Instant::now();
    let mut worst_gap = 0.0f64;
    let mut max_frac = 0;
    let mut mismatches = 0;
    for _ in 0..1000 {
        let k = rng.random_range(1..=8);
        let n = rng.random_range(1..=k);
        let w: Vec<f64> = (0..k).map(|_| rng.random::<f64>()).collect();
        let c: Vec<f64> = (0..k).map(|_| rng.random::<f64>()).collect();
        let rho = rng.random_range(0.0..n as f64);
        let equality = rng.random_bool(0.5);
        let oracle = lp_vertex_oracle(&w, &c, n, rho, equality);
        let report = solve_two_row_lp(&w, &c, n, rho, equality).unwrap();
        let frac = report
            .z
            .values()
            .iter()
            .filter(|v| **v > 1e-9 && **v < 1.0 - 1e-9)
            .count();
        max_frac = max_frac.max(frac);
        match oracle {
            Some(best) => worst_gap = worst_gap.max((report.objective - best).abs()),
            // Infeasible equality instances fall back to the cheapest arms.
            None if equality => {}
            None => mismatches += 1,
        }
    }
    let secs = start.elapsed().as_secs_f64();
    Verdict::new(
        worst_gap <= 1e-8 && max_frac <= 2 && mismatches == 0 && secs < 30.0,
        format!("max objective gap {worst_gap:.2e}, max fractional coords {max_frac}, {secs:.2}s"),
    )
}

fn continuous_greedy() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let floor = 1.0 - (-1.0f64).exp();
    let mut worst = f64::INFINITY;
    for _ in 0..200 {
        let mu: Vec<f64> = (0..6).map(|_| rng.random::<f64>()).collect();
        let c: Vec<f64> = (0..6).map(|_| rng.random::<f64>()).collect();
        let rho = rng.random_range(0.2..2.0);
        let (_, best) = best_budgeted_action(RewardModelKind::Awc, &mu, &c, 3, rho).unwrap();
        let p = RelaxedProblem {
            mu_bar: mu,
            c_lower: c,
            n: 3,
            rho,
            model: RewardModelKind::Awc,
        };
        let report = solve_awc(&p, 100).unwrap();
        worst = worst.min(report.objective - floor * best);
    }
    Verdict::new(worst >= -1e-6, format!("min relaxed - (1-1/e) * optimum = {worst:.3e}"))
}

fn coverage() -> Verdict {
    let mu = [0.2, 0.5, 0.9];
    let k = mu.len();
    let mut covered = 0;
    for run in 0..500u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(50_000 + run);
        let mut st = EstimatorState::new(k, 1.0, 1.0, 0.1).unwrap();
        let mut ok = true;
        for _ in 0..200 {
            let rewards: Vec<f64> = mu.iter().map(|&m| f64::from(u8::from(rng.random_bool(m)))).collect();
            st.update(&RoundOutcome {
                action: ActionSet::from_indices(0..k),
                used: (0..k).map(ArmId).collect(),
                rewards,
                costs: vec![0.0; k],
                total_used_cost: 0.0,
                total_worstcase_cost: 0.0,
            });
            ok &= (0..k).all(|i| (st.mu_hat[i] - mu[i]).abs() < st.reward_radius(i));
        }
        covered += usize::from(ok);
    }
    let freq = covered as f64 / 500.0;
    Verdict::new(freq >= 0.95, format!("simultaneous coverage {freq:.3} (>= 0.95)"))
}

fn regret_sublinear(awc: &[RunSummary], extra: &[RunSummary]) -> Verdict {
    let per_round = |t: usize| {
        mean(
            &awc[..SEEDS as usize]
                .iter()
                .map(|s| s.records[t - 1].cum_regret_budgeted / t as f64)
                .collect::<Vec<_>>(),
        )
    };
    let (early, late) = (per_round(1_000), per_round(HORIZON as usize));
    let regret_ok = late <= 0.55 * early;

    let first = &awc[0];
    let inst = InstanceSpec::preset("synthetic-awc-d3").unwrap();
    let (_, bound) = theorem_bounds(inst.k, inst.n, HORIZON, 1.0, 1.0, first.o_star);
    let all: Vec<&RunSummary> = awc.iter().chain(extra).collect();
    let within = all.iter().filter(|s| s.violation_worst <= bound).count();
    let violation_ok = within * 20 >= 19 * all.len();
    Verdict::new(
        regret_ok && violation_ok,
        format!(
            "regret/T {late:.4} at T=10000 vs {early:.4} at T=1000 (ratio {:.3}, <= 0.55); V(T) <= bound {bound:.4} in {within}/{} seeds",
            late / early,
            all.len()
        ),
    )
}

fn violation_decay(awc: &[RunSummary]) -> Verdict {
    let at = |t: usize| mean(&awc.iter().map(|s| s.records[t - 1].violation).collect::<Vec<_>>());
    let (v0, v4) = (at(2_000), at(8_000));
    let pass = v0 <= 1e-3 || v4 <= 0.7 * v0;
    Verdict::new(
        pass,
        format!("mean V(2000) {v0:.5}, mean V(8000) {v4:.5} (<= 0.7x when V(2000) > 1e-3)"),
    )
}

fn policy_ordering(awc: &[RunSummary]) -> Verdict {
    let mut pass = true;
    let mut parts = Vec::new();
    for preset in ["synthetic-awc-d3", "synthetic-suc-d3", "synthetic-aic-d3"] {
        let cfg = preset_config(preset, HORIZON);
        let ours = if preset == "synthetic-awc-d3" {
            awc.to_vec()
        } else {
            runs(&cfg, &PolicyKind::C2mabv, SEEDS)
        };
        let cucb = runs(&cfg, &PolicyKind::Cucb, SEEDS);
        let eps = runs(&cfg, &PolicyKind::EpsGreedy, SEEDS);
        let ratio = |rs: &[RunSummary]| median(&rs.iter().map(|s| s.ratio).collect::<Vec<_>>());
        let viol = |rs: &[RunSummary]| mean(&rs.iter().map(|s| s.violation_worst).collect::<Vec<_>>());
        let (r_ours, r_cucb, r_eps) = (ratio(&ours), ratio(&cucb), ratio(&eps));
        let (v_ours, v_cucb) = (viol(&ours), viol(&cucb));
        pass &= r_ours > r_cucb && r_ours > r_eps && v_ours < v_cucb;
        parts.push(format!(
            "{preset}: ratio {r_ours:.3} vs cucb {r_cucb:.3} / eps {r_eps:.3}, V {v_ours:.4} vs cucb {v_cucb:.4}"
        ));
    }
    Verdict::new(pass, parts.join("; "))
}

fn runtime_comparison() -> Verdict {
    let cfg = preset_config("synthetic-aic-d3", 500);
    let secs = |kind: &PolicyKind| runs(&cfg, kind, 3).iter().map(|s| s.wall_clock_secs).sum::<f64>();
    let relaxed = secs(&PolicyKind::C2mabv);
    let direct = secs(&PolicyKind::C2mabvDirect);
    Verdict::new(
        direct >= 2.0 * relaxed,
        format!(
            "direct {direct:.3}s vs relaxed {relaxed:.3}s (ratio {:.1}, >= 2)",
            direct / relaxed
        ),
    )
}

/// V here is the plain running violation of actual spend; criteria 6 and 8
/// ask for the worst-case flavor explicitly. Worst-case V is printed alongside.
fn batch_robustness(awc: &[RunSummary]) -> Verdict {
    let reward = |rs: &[RunSummary]| mean(&rs.iter().map(|s| s.mean_reward).collect::<Vec<_>>());
    let spent = |rs: &[RunSummary]| mean(&rs.iter().map(|s| s.violation_used).collect::<Vec<_>>());
    let worst = |rs: &[RunSummary]| mean(&rs.iter().map(|s| s.violation_worst).collect::<Vec<_>>());
    let (r1, v1) = (reward(awc), spent(awc));
    let mut pass = true;
    let mut parts = vec![format!("B=1 reward {r1:.4} V {v1:.4} (worst-case V {:.4})", worst(awc))];
    for b in [10, 50, 200] {
        let mut cfg = preset_config("synthetic-awc-d3", HORIZON);
        cfg.batch_size = b;
        let rs = runs(&cfg, &PolicyKind::C2mabv, SEEDS);
        let (r, v) = (reward(&rs), spent(&rs));
        pass &= (r - r1).abs() <= 0.1 * r1 && (v - v1).abs() <= 0.02;
        parts.push(format!("B={b} reward {r:.4} V {v:.4} (worst-case V {:.4})", worst(&rs)));
    }
    Verdict::new(pass, parts.join(", "))
}

fn determinism_and_replay() -> Verdict {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let mut cfg = preset_config("synthetic-awc-d3", 500);
    cfg.base_seed = 7;
    cfg.log_messages = true;
    cfg.output_dir = a.path().to_path_buf();
    run_experiment(&cfg).unwrap();
    cfg.output_dir = b.path().to_path_buf();
    run_experiment(&cfg).unwrap();
    let kind = PolicyKind::C2mabv;
    let first = fs::read_to_string(run_csv_path(a.path(), &kind, 0)).unwrap();
    let second = fs::read_to_string(run_csv_path(b.path(), &kind, 0)).unwrap();
    let replayed = replay_to_csv(&cfg, &kind, 0, &message_log_path(a.path(), &kind, 0)).unwrap();
    Verdict::new(
        first == second && first == replayed,
        format!(
            "rerun identical: {}, replay identical: {}",
            first == second,
            first == replayed
        ),
    )
}

fn main() -> ExitCode {
    let mut failed = 0;
    let mut report = |id: u32, name: &str, v: Verdict| {
        let tag = if v.pass { "PASS" } else { "FAIL" };
        println!("{tag} criterion {id:>2} {name}: {}", v.detail);
        failed += usize::from(!v.pass);
    };

    report(1, "rounding marginals", rounding_marginals());
    report(2, "convexity preservation", convexity());
    report(3, "LP kernel exactness", lp_kernel());
    report(4, "continuous greedy guarantee", continuous_greedy());
    report(5, "confidence coverage", coverage());

    // The B=1 c2mabv runs on the AWC preset are shared by criteria 6, 7, 8 and 10.
    let awc_cfg = preset_config("synthetic-awc-d3", HORIZON);
    let awc = runs(&awc_cfg, &PolicyKind::C2mabv, SEEDS);
    let extra: Vec<RunSummary> = (SEEDS..2 * SEEDS)
        .map(|i| {
            let rep = Replication::prepare(&awc_cfg, i).unwrap();
            run_policy(&awc_cfg, &rep, &PolicyKind::C2mabv, None).unwrap()
        })
        .collect();
    report(6, "regret sublinearity", regret_sublinear(&awc, &extra));
    report(7, "violation decay", violation_decay(&awc));
    report(8, "policy ordering", policy_ordering(&awc));
    report(9, "runtime comparison", runtime_comparison());
    report(10, "batch robustness", batch_robustness(&awc));
    report(11, "determinism and replay", determinism_and_replay());

    if failed == 0 {
        println!("all criteria passed");
        ExitCode::SUCCESS
    } else {
        println!("{failed} criteria failed");
        ExitCode::FAILURE
    }
}
