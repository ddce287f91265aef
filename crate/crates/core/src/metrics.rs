//! Regret, budget violation, reward/violation ratio and per-round records.

use std::f64::consts::PI;
use std::fmt::Write as _;

use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::types::ActionSet;

/// `max(mean per-round cost - rho, 0)`.
pub fn violation(costs: &[f64], rho: f64) -> f64 {
    if costs.is_empty() {
        return 0.0;
    }
    (costs.iter().sum::<f64>() / costs.len() as f64 - rho).max(0.0)
}

/// `sum_t (alpha * optimum - r_t)` over expected (not realized) rewards.
pub fn regret(expected_rewards: &[f64], optimum: f64, alpha: f64) -> f64 {
    expected_rewards.iter().map(|r| alpha * optimum - r).sum()
}

/// Mean expected reward over mean running violation; `+inf` when no violation occurred.
pub fn ratio(expected_rewards: &[f64], violations: &[f64]) -> f64 {
    let v: f64 = violations.iter().sum();
    if v == 0.0 {
        return f64::INFINITY;
    }
    expected_rewards.iter().sum::<f64>() / v
}

/// Regret and worst-case violation bounds:
/// `(2L/o*) sqrt(2NKT ln(2 pi^2 K T / 3)) + (K + 1) r*` and
/// `sqrt(NK/T) (2 sqrt(2 ln(2 pi^2 K T / 3)) + sqrt(NK/T))`.
pub fn theorem_bounds(k: usize, n: usize, t: u64, lipschitz: f64, r_star: f64, o_star: f64) -> (f64, f64) {
    let (k, n, t) = (k as f64, n as f64, t as f64);
    let log_term = (2.0 * PI * PI * k * t / 3.0).ln();
    let regret = 2.0 * lipschitz / o_star * (2.0 * n * k * t * log_term).sqrt() + (k + 1.0) * r_star;
    let s = (n * k / t).sqrt();
    let violation = s * (2.0 * (2.0 * log_term).sqrt() + s);
    (regret, violation)
}

/// Floor applied to the empirical full-feedback frequency.
pub const O_STAR_FLOOR: f64 = 0.05;

/// Fraction of rounds in which every member of the action was used, floored.
pub fn estimate_o_star(fully_observed_rounds: usize, rounds: usize) -> f64 {
    if rounds == 0 {
        return O_STAR_FLOOR;
    }
    (fully_observed_rounds as f64 / rounds as f64).max(O_STAR_FLOOR)
}

/// One CSV row.
#[derive(Clone, Debug, PartialEq)]
pub struct RoundRecord {
    pub t: u64,
    pub policy: String,
    pub action: ActionSet,
    pub used: ActionSet,
    pub exp_reward: f64,
    pub realized_reward: f64,
    pub used_cost: f64,
    pub worst_cost: f64,
    pub cum_regret_structural: f64,
    pub cum_regret_budgeted: f64,
    /// Running violation of the worst-case cost series.
    pub violation: f64,
    pub ratio: f64,
}

pub const CSV_HEADER: &str = "t,policy,action,used,exp_reward,realized_reward,used_cost,worst_cost,\
cum_regret_structural,cum_regret_budgeted,violation,ratio";

impl RoundRecord {
    pub fn csv_row(&self) -> String {
        format!(
            "{},{},{},{},{},{},{},{},{},{},{},{}",
            self.t,
            self.policy,
            self.action.joined(),
            self.used.joined(),
            fmt_g(self.exp_reward),
            fmt_g(self.realized_reward),
            fmt_g(self.used_cost),
            fmt_g(self.worst_cost),
            fmt_g(self.cum_regret_structural),
            fmt_g(self.cum_regret_budgeted),
            fmt_g(self.violation),
            fmt_g(self.ratio),
        )
    }
}

/// `%.9g`-style formatting: 9 significant digits, trailing zeros trimmed,
/// exponent form outside `[1e-4, 1e9)`, and literal `inf` / `-inf` / `nan`.
pub fn fmt_g(x: f64) -> String {
    if x.is_nan() {
        return "nan".into();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    if x == 0.0 {
        return "0".into();
    }
    let sci = format!("{x:.8e}");
    let (mantissa, exp) = sci.split_once('e').expect("exponent form");
    let exp: i32 = exp.parse().expect("integer exponent");
    if !(-4..9).contains(&exp) {
        let m = trim_zeros(mantissa);
        let sign = if exp < 0 { '-' } else { '+' };
        return format!("{m}e{sign}{:02}", exp.abs());
    }
    let decimals = (8 - exp).max(0) as usize;
    trim_zeros(&format!("{x:.decimals$}")).to_string()
}

fn trim_zeros(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

/// Per-round observation fed to [`MetricsTracker`].
#[derive(Clone, Debug)]
pub struct RoundObservation<'a> {
    pub action: &'a ActionSet,
    pub used: ActionSet,
    pub exp_reward: f64,
    pub realized_reward: f64,
    pub used_cost: f64,
    pub worst_cost: f64,
    pub fully_observed: bool,
}

/// Running metric state for one (policy, replication) trajectory.
#[derive(Clone, Debug)]
pub struct MetricsTracker {
    policy: String,
    alpha: f64,
    rho: f64,
    opt_structural: f64,
    opt_budgeted: f64,
    t: u64,
    sum_reward: f64,
    sum_used_cost: f64,
    sum_worst_cost: f64,
    sum_violation: f64,
    regret_structural: f64,
    regret_budgeted: f64,
    fully_observed: usize,
}

impl MetricsTracker {
    pub fn new(policy: impl Into<String>, alpha: f64, rho: f64, opt_structural: f64, opt_budgeted: f64) -> Self {
        Self {
            policy: policy.into(),
            alpha,
            rho,
            opt_structural,
            opt_budgeted,
            t: 0,
            sum_reward: 0.0,
            sum_used_cost: 0.0,
            sum_worst_cost: 0.0,
            sum_violation: 0.0,
            regret_structural: 0.0,
            regret_budgeted: 0.0,
            fully_observed: 0,
        }
    }

    pub fn record(&mut self, obs: RoundObservation<'_>) -> RoundRecord {
        self.t += 1;
        let t = self.t as f64;
        self.sum_reward += obs.exp_reward;
        self.sum_used_cost += obs.used_cost;
        self.sum_worst_cost += obs.worst_cost;
        self.regret_structural += self.alpha * self.opt_structural - obs.exp_reward;
        self.regret_budgeted += self.alpha * self.opt_budgeted - obs.exp_reward;
        if obs.fully_observed {
            self.fully_observed += 1;
        }
        let v = (self.sum_worst_cost / t - self.rho).max(0.0);
        self.sum_violation += v;
        let ratio = if self.sum_violation == 0.0 {
            f64::INFINITY
        } else {
            self.sum_reward / self.sum_violation
        };
        RoundRecord {
            t: self.t,
            policy: self.policy.clone(),
            action: obs.action.clone(),
            used: obs.used,
            exp_reward: obs.exp_reward,
            realized_reward: obs.realized_reward,
            used_cost: obs.used_cost,
            worst_cost: obs.worst_cost,
            cum_regret_structural: self.regret_structural,
            cum_regret_budgeted: self.regret_budgeted,
            violation: v,
            ratio,
        }
    }

    pub fn rounds(&self) -> u64 {
        self.t
    }

    pub fn used_violation(&self) -> f64 {
        if self.t == 0 {
            return 0.0;
        }
        (self.sum_used_cost / self.t as f64 - self.rho).max(0.0)
    }

    pub fn worst_violation(&self) -> f64 {
        if self.t == 0 {
            return 0.0;
        }
        (self.sum_worst_cost / self.t as f64 - self.rho).max(0.0)
    }

    pub fn o_star(&self) -> f64 {
        estimate_o_star(self.fully_observed, self.t as usize)
    }
}

/// Outcome of one (policy, replication) trajectory.
#[derive(Clone, Debug)]
pub struct RunSummary {
    pub instance: String,
    pub policy: String,
    pub seed: u64,
    pub records: Vec<RoundRecord>,
    pub regret_structural: f64,
    pub regret_budgeted: f64,
    pub violation_worst: f64,
    pub violation_used: f64,
    pub ratio: f64,
    pub mean_reward: f64,
    pub o_star: f64,
    pub wall_clock_secs: f64,
    pub infeasible_fallbacks: usize,
}

impl RunSummary {
    pub fn to_csv(&self) -> String {
        let mut out = String::with_capacity(64 * (self.records.len() + 1));
        out.push_str(CSV_HEADER);
        out.push('\n');
        for r in &self.records {
            out.push_str(&r.csv_row());
            out.push('\n');
        }
        out
    }
}

/// Sample mean and 95% Student-t half-width; the half-width is 0 for a single sample.
pub fn mean_ci95(xs: &[f64]) -> (f64, f64) {
    let n = xs.len();
    if n == 0 {
        return (f64::NAN, f64::NAN);
    }
    let mean = xs.iter().sum::<f64>() / n as f64;
    if n == 1 {
        return (mean, 0.0);
    }
    if !mean.is_finite() {
        return (mean, f64::NAN);
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    let q = StudentsT::new(0.0, 1.0, (n - 1) as f64)
        .expect("positive degrees of freedom")
        .inverse_cdf(0.975);
    (mean, q * (var / n as f64).sqrt())
}

pub const AGGREGATE_HEADER: &str = "t,policy,replications,exp_reward_mean,exp_reward_ci95,\
cum_regret_structural_mean,cum_regret_structural_ci95,cum_regret_budgeted_mean,cum_regret_budgeted_ci95,\
violation_mean,violation_ci95,ratio_mean,ratio_ci95";

/// Per-round mean and 95% confidence half-width across replications of one policy.
pub fn aggregate_csv(runs: &[&RunSummary]) -> String {
    let mut out = String::new();
    out.push_str(AGGREGATE_HEADER);
    out.push('\n');
    let Some(first) = runs.first() else {
        return out;
    };
    let rounds = runs.iter().map(|r| r.records.len()).min().unwrap_or(0);
    let mut col = vec![0.0; runs.len()];
    for i in 0..rounds {
        let _ = write!(out, "{},{},{}", first.records[i].t, first.policy, runs.len());
        let fields: [fn(&RoundRecord) -> f64; 5] = [
            |r| r.exp_reward,
            |r| r.cum_regret_structural,
            |r| r.cum_regret_budgeted,
            |r| r.violation,
            |r| r.ratio,
        ];
        for f in fields {
            for (slot, run) in col.iter_mut().zip(runs) {
                *slot = f(&run.records[i]);
            }
            let (m, h) = mean_ci95(&col);
            let _ = write!(out, ",{},{}", fmt_g(m), fmt_g(h));
        }
        out.push('\n');
    }
    out
}
