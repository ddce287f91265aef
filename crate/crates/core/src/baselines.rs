//! Comparison policies: budget-blind CUCB, adaptive epsilon-greedy, Thompson
//! sampling and fixed sets.

use rand::seq::index::sample;
use rand::Rng;
use rand_distr::{Beta, Distribution};

use crate::env::RoundOutcome;
use crate::error::{Error, Result};
use crate::learner::EstimatorState;
use crate::pipeline::{cloud_round, local_relax};
use crate::relax::SolveReport;
use crate::reward::is_feasible;
use crate::types::{ActionSet, ProblemInstance};

/// What a policy hands to the rounding side: a fractional point or a finished set.
#[derive(Clone, Debug)]
pub enum Plan {
    Fractional(SolveReport),
    Integral(ActionSet),
}

impl Plan {
    pub fn realize<R: Rng + ?Sized>(self, inst: &ProblemInstance, rng: &mut R) -> Result<ActionSet> {
        match self {
            Plan::Fractional(report) => cloud_round(inst, &report.z, rng),
            Plan::Integral(set) => Ok(set),
        }
    }
}

/// Indices of the `n` largest entries; ties go to the lower index.
pub fn top_n(values: &[f64], n: usize) -> ActionSet {
    let mut idx: Vec<usize> = (0..values.len()).collect();
    idx.sort_by(|&a, &b| values[b].total_cmp(&values[a]).then(a.cmp(&b)));
    ActionSet::from_indices(idx.into_iter().take(n))
}

/// Top-`n` arms by reward UCB with no regard for cost.
pub fn cucb_select(state: &EstimatorState, inst: &ProblemInstance) -> ActionSet {
    top_n(&state.reward_ucbs(), inst.n)
}

/// `min(1, 2 sqrt(K) / sqrt(t))`.
pub fn epsilon(t: u64, k: usize) -> f64 {
    (2.0 * (k as f64).sqrt() / (t.max(1) as f64).sqrt()).min(1.0)
}

/// Uniformly random set of exactly `n` arms.
pub fn uniform_set<R: Rng + ?Sized>(k: usize, n: usize, rng: &mut R) -> ActionSet {
    ActionSet::from_indices(sample(rng, k, n))
}

/// Explores with probability `epsilon(t, K)`, otherwise relaxes at the
/// empirical means with no confidence widths.
pub fn epsilon_greedy_plan<R: Rng + ?Sized>(
    state: &EstimatorState,
    inst: &ProblemInstance,
    t: u64,
    cg_steps: usize,
    rng: &mut R,
) -> Result<(Plan, bool)> {
    if rng.random::<f64>() < epsilon(t, inst.k) {
        return Ok((Plan::Integral(uniform_set(inst.k, inst.n, rng)), true));
    }
    let report = local_relax(inst, &state.mu_hat, &state.c_hat, cg_steps)?;
    Ok((Plan::Fractional(report), false))
}

pub fn epsilon_greedy_select<R: Rng + ?Sized>(
    state: &EstimatorState,
    inst: &ProblemInstance,
    t: u64,
    cg_steps: usize,
    rng: &mut R,
) -> Result<ActionSet> {
    let (plan, _) = epsilon_greedy_plan(state, inst, t, cg_steps, rng)?;
    plan.realize(inst, rng)
}

/// Fractional Beta tallies: a reward `x` adds `x` successes and `1 - x` failures.
#[derive(Clone, Debug, PartialEq)]
pub struct ThompsonTallies {
    pub successes: Vec<f64>,
    pub failures: Vec<f64>,
}

impl ThompsonTallies {
    pub fn new(k: usize) -> Self {
        Self {
            successes: vec![0.0; k],
            failures: vec![0.0; k],
        }
    }

    pub fn update(&mut self, outcome: &RoundOutcome) {
        for (arm, &x) in outcome.used.iter().zip(&outcome.rewards) {
            self.successes[arm.0] += x;
            self.failures[arm.0] += 1.0 - x;
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        self.successes
            .iter()
            .zip(&self.failures)
            .map(|(&s, &f)| {
                Beta::new(1.0 + s, 1.0 + f)
                    .expect("shape parameters are at least 1")
                    .sample(rng)
            })
            .collect()
    }
}

/// Relaxes at a posterior draw of the means and the empirical costs.
pub fn thompson_plan<R: Rng + ?Sized>(
    tallies: &ThompsonTallies,
    state: &EstimatorState,
    inst: &ProblemInstance,
    cg_steps: usize,
    rng: &mut R,
) -> Result<Plan> {
    let theta = tallies.sample(rng);
    Ok(Plan::Fractional(local_relax(inst, &theta, &state.c_hat, cg_steps)?))
}

pub fn thompson_select<R: Rng + ?Sized>(
    tallies: &ThompsonTallies,
    state: &EstimatorState,
    inst: &ProblemInstance,
    cg_steps: usize,
    rng: &mut R,
) -> Result<ActionSet> {
    thompson_plan(tallies, state, inst, cg_steps, rng)?.realize(inst, rng)
}

/// Always plays `set`; only the cardinality rule is checked.
pub fn fixed_select(set: &ActionSet, inst: &ProblemInstance) -> Result<ActionSet> {
    if !is_feasible(set, inst) {
        return Err(Error::config(format!(
            "fixed set {set} is infeasible for {} with k = {}, n = {}",
            inst.model, inst.k, inst.n
        )));
    }
    Ok(set.clone())
}
