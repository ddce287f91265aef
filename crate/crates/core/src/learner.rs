//! Local-server estimator: empirical means, confidence radii, optimistic reward
//! and pessimistic cost estimates, and the batched feedback buffer.

use std::f64::consts::PI;
use std::fmt::Write as _;

use crate::env::{RoundOutcome, UnusedCharges};
use crate::error::{Error, Result};
use crate::types::ArmId;

/// Hoeffding-style radius `sqrt(ln(2 pi^2 K t^3 / (3 delta)) / (2 count))`.
///
/// Returns `+inf` for an arm that has never been observed.
pub fn confidence_radius(t: u64, k: usize, delta: f64, count: u64) -> f64 {
    if count == 0 {
        return f64::INFINITY;
    }
    let t = t.max(1) as f64;
    let log_term = (2.0 * PI * PI * k as f64 * t * t * t / (3.0 * delta)).ln();
    (log_term / (2.0 * count as f64)).sqrt()
}

#[derive(Clone, Debug, PartialEq)]
pub struct EstimatorState {
    pub mu_hat: Vec<f64>,
    pub c_hat: Vec<f64>,
    pub n_mu: Vec<u64>,
    pub n_c: Vec<u64>,
    pub alpha_mu: f64,
    pub alpha_c: f64,
    pub delta: f64,
    /// Current round, starting at 1.
    pub t: u64,
}

impl EstimatorState {
    pub fn new(k: usize, alpha_mu: f64, alpha_c: f64, delta: f64) -> Result<Self> {
        if !(alpha_mu > 0.0) || !(alpha_c > 0.0) {
            return Err(Error::invalid("confidence scales must be positive"));
        }
        if !(delta > 0.0 && delta <= 1.0) {
            return Err(Error::invalid(format!("delta must lie in (0, 1], got {delta}")));
        }
        Ok(Self {
            mu_hat: vec![0.0; k],
            c_hat: vec![0.0; k],
            n_mu: vec![0; k],
            n_c: vec![0; k],
            alpha_mu,
            alpha_c,
            delta,
            t: 1,
        })
    }

    pub fn k(&self) -> usize {
        self.mu_hat.len()
    }

    pub fn reward_radius(&self, k: usize) -> f64 {
        confidence_radius(self.t, self.k(), self.delta, self.n_mu[k])
    }

    pub fn cost_radius(&self, k: usize) -> f64 {
        confidence_radius(self.t, self.k(), self.delta, self.n_c[k])
    }

    /// Optimistic reward estimate `min(mu_hat + alpha_mu * radius, 1)`.
    pub fn reward_ucb(&self, k: usize) -> f64 {
        if self.n_mu[k] == 0 {
            return 1.0;
        }
        (self.mu_hat[k] + self.alpha_mu * self.reward_radius(k)).min(1.0)
    }

    /// Pessimistic cost estimate `max(c_hat - alpha_c * radius, 0)`.
    pub fn cost_lcb(&self, k: usize) -> f64 {
        if self.n_c[k] == 0 {
            return 0.0;
        }
        (self.c_hat[k] - self.alpha_c * self.cost_radius(k)).max(0.0)
    }

    pub fn reward_ucbs(&self) -> Vec<f64> {
        (0..self.k()).map(|k| self.reward_ucb(k)).collect()
    }

    pub fn cost_lcbs(&self) -> Vec<f64> {
        (0..self.k()).map(|k| self.cost_lcb(k)).collect()
    }

    pub fn any_unobserved(&self) -> bool {
        self.n_mu.contains(&0)
    }

    /// Running-mean update over the used arms, then advance the round counter.
    pub fn update(&mut self, outcome: &RoundOutcome) {
        for ((arm, &x), &y) in outcome.used.iter().zip(&outcome.rewards).zip(&outcome.costs) {
            self.observe_reward(*arm, x);
            self.observe_cost(*arm, y);
        }
        self.t += 1;
    }

    fn observe_reward(&mut self, arm: ArmId, x: f64) {
        let k = arm.0;
        let n = self.n_mu[k] as f64;
        self.mu_hat[k] = (n * self.mu_hat[k] + x) / (n + 1.0);
        self.n_mu[k] += 1;
    }

    /// Cost-only observation, used when unused members' costs are revealed.
    pub fn observe_cost(&mut self, arm: ArmId, y: f64) {
        let k = arm.0;
        let n = self.n_c[k] as f64;
        self.c_hat[k] = (n * self.c_hat[k] + y) / (n + 1.0);
        self.n_c[k] += 1;
    }

    /// Feeds the worst-case cost draws of unused members into the cost means.
    pub fn observe_costs(&mut self, charges: &UnusedCharges) {
        for &(arm, y) in &charges.costs {
            self.observe_cost(arm, y);
        }
    }

    /// Text record: a header of `key=value` lines followed by a CSV table with
    /// columns `arm,mu_hat,c_hat,n_mu,n_c`.
    pub fn dump(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "# c2mab estimator state v1");
        let _ = writeln!(out, "t={}", self.t);
        let _ = writeln!(out, "alpha_mu={}", self.alpha_mu);
        let _ = writeln!(out, "alpha_c={}", self.alpha_c);
        let _ = writeln!(out, "delta={}", self.delta);
        let _ = writeln!(out, "arm,mu_hat,c_hat,n_mu,n_c");
        for k in 0..self.k() {
            let _ = writeln!(
                out,
                "{k},{},{},{},{}",
                self.mu_hat[k], self.c_hat[k], self.n_mu[k], self.n_c[k]
            );
        }
        out
    }

    pub fn restore(text: &str) -> Result<Self> {
        let bad = |msg: String| Error::config(format!("estimator record: {msg}"));
        let mut t = None;
        let mut alpha_mu = None;
        let mut alpha_c = None;
        let mut delta = None;
        let mut rows: Vec<(usize, f64, f64, u64, u64)> = Vec::new();
        let mut in_table = false;
        for line in text
            .lines()
            .map(str::trim)
            .filter(|l| !l.is_empty() && !l.starts_with('#'))
        {
            if line == "arm,mu_hat,c_hat,n_mu,n_c" {
                in_table = true;
                continue;
            }
            if in_table {
                let f: Vec<&str> = line.split(',').collect();
                if f.len() != 5 {
                    return Err(bad(format!("malformed row `{line}`")));
                }
                let num = |s: &str| s.parse::<f64>().map_err(|e| bad(format!("`{s}`: {e}")));
                let int = |s: &str| s.parse::<u64>().map_err(|e| bad(format!("`{s}`: {e}")));
                let arm = f[0].parse::<usize>().map_err(|e| bad(format!("`{}`: {e}", f[0])))?;
                rows.push((arm, num(f[1])?, num(f[2])?, int(f[3])?, int(f[4])?));
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| bad(format!("expected key=value, got `{line}`")))?;
            let parse = |v: &str| v.trim().parse::<f64>().map_err(|e| bad(format!("{key}: {e}")));
            match key.trim() {
                "t" => t = Some(value.trim().parse::<u64>().map_err(|e| bad(format!("t: {e}")))?),
                "alpha_mu" => alpha_mu = Some(parse(value)?),
                "alpha_c" => alpha_c = Some(parse(value)?),
                "delta" => delta = Some(parse(value)?),
                other => return Err(bad(format!("unknown key `{other}`"))),
            }
        }
        let missing = |name: &str| bad(format!("missing `{name}`"));
        let mut state = EstimatorState::new(
            rows.len(),
            alpha_mu.ok_or_else(|| missing("alpha_mu"))?,
            alpha_c.ok_or_else(|| missing("alpha_c"))?,
            delta.ok_or_else(|| missing("delta"))?,
        )?;
        state.t = t.ok_or_else(|| missing("t"))?;
        for (i, (arm, mu, c, nm, nc)) in rows.into_iter().enumerate() {
            if arm != i {
                return Err(bad(format!("rows out of order at arm {arm}")));
            }
            state.mu_hat[i] = mu;
            state.c_hat[i] = c;
            state.n_mu[i] = nm;
            state.n_c[i] = nc;
        }
        Ok(state)
    }
}

/// Buffer of outcomes released in groups of `capacity`.
#[derive(Clone, Debug)]
pub struct FeedbackBatch {
    buffered: Vec<RoundOutcome>,
    capacity: usize,
}

impl FeedbackBatch {
    pub fn new(capacity: usize) -> Result<Self> {
        if capacity == 0 {
            return Err(Error::invalid("batch size must be at least 1"));
        }
        Ok(Self {
            buffered: Vec::with_capacity(capacity),
            capacity,
        })
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn len(&self) -> usize {
        self.buffered.len()
    }

    pub fn is_empty(&self) -> bool {
        self.buffered.is_empty()
    }

    /// Buffers `outcome`; returns the whole buffer once it holds `capacity` items.
    pub fn buffer_and_maybe_flush(&mut self, outcome: RoundOutcome) -> Option<Vec<RoundOutcome>> {
        self.buffered.push(outcome);
        (self.buffered.len() >= self.capacity).then(|| std::mem::take(&mut self.buffered))
    }
}
