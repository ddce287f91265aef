//! Synthetic multi-LLM environment.
//!
//! Each arm has a Bernoulli or discrete-level reward and a token-based cost:
//! a query with `l_in` input tokens (uniform on `[a, b]`) produces `l_out`
//! output tokens (Poisson), and costs `(l_in + l_out) * price * scale`,
//! clipped to 1.

use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::{Distribution, Poisson};
use serde::{Deserialize, Serialize};
use statrs::distribution::{DiscreteCDF, Poisson as PoissonLaw};

use crate::error::{Error, Result};
use crate::reward::{action_reward, is_feasible};
use crate::types::{ActionSet, ArmId, ProblemInstance, RewardModelKind};

/// Reward support of [`RewardDistKind::DiscreteLevels`]: wrong, empty, format-only, correct.
pub const LEVELS: [f64; 4] = [0.0, 0.1, 0.3, 0.5];
/// Fixed probability of the two middle levels (0.1 and 0.3).
pub const MIDDLE_LEVEL_PROB: f64 = 0.05;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ArmSpec {
    pub name: String,
    pub true_mu: f64,
    /// Price per token.
    pub cost_per_token: f64,
    /// Inclusive range of input lengths in tokens.
    pub input_len_range: (u32, u32),
    pub output_len_mean: f64,
    /// Maps raw currency to the unit cost scale.
    pub cost_scale: f64,
}

impl ArmSpec {
    fn unit_price(&self) -> f64 {
        self.cost_per_token * self.cost_scale
    }

    /// Mean cost before clipping at 1.
    pub fn nominal_cost(&self) -> f64 {
        let (a, b) = self.input_len_range;
        (0.5 * f64::from(a + b) + self.output_len_mean) * self.unit_price()
    }

    /// Exact mean of the clipped cost distribution.
    pub fn expected_cost(&self) -> f64 {
        clipped_mean(self.input_len_range, self.output_len_mean, self.unit_price())
    }

    pub fn sample_cost<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        sample_cost(self, rng)
    }

    pub fn validate(&self) -> Result<()> {
        let (a, b) = self.input_len_range;
        if a > b {
            return Err(Error::config(format!(
                "arm `{}`: input range [{a}, {b}] is empty",
                self.name
            )));
        }
        if !(0.0..=1.0).contains(&self.true_mu) {
            return Err(Error::config(format!(
                "arm `{}`: mean {} outside [0, 1]",
                self.name, self.true_mu
            )));
        }
        if !(self.cost_per_token > 0.0) || !(self.cost_scale > 0.0) || !(self.output_len_mean >= 0.0) {
            return Err(Error::config(format!(
                "arm `{}`: price, scale and output mean must be positive",
                self.name
            )));
        }
        Ok(())
    }
}

/// `E[min(1, (L_in + L_out) u)]` with `L_in` uniform on `[a, b]`, `L_out ~ Poisson(m)`.
fn clipped_mean((a, b): (u32, u32), m: f64, u: f64) -> f64 {
    let law = (m > 0.0).then(|| PoissonLaw::new(m).expect("positive mean"));
    // P(L_out <= x); a degenerate law sits at zero.
    let cdf = |x: i64| -> f64 {
        if x < 0 {
            0.0
        } else {
            law.as_ref().map_or(1.0, |p| p.cdf(x as u64))
        }
    };
    let mut total = 0.0;
    for l_in in a..=b {
        let l_in = f64::from(l_in);
        // Smallest output length whose cost reaches the clip.
        let first_clipped = ((1.0 / u) - l_in).ceil() as i64;
        // E[(l_in + L) 1{L < t}] = l_in F(t - 1) + m F(t - 2).
        let below = cdf(first_clipped - 1);
        total += u * (l_in * below + m * cdf(first_clipped - 2)) + (1.0 - below);
    }
    total / f64::from(b - a + 1)
}

/// One draw of the statistical cost model.
pub fn sample_cost<R: Rng + ?Sized>(arm: &ArmSpec, rng: &mut R) -> f64 {
    let (a, b) = arm.input_len_range;
    let l_in = f64::from(rng.random_range(a..=b));
    let l_out = if arm.output_len_mean > 0.0 {
        Poisson::new(arm.output_len_mean).expect("positive mean").sample(rng)
    } else {
        0.0
    };
    ((l_in + l_out) * arm.unit_price()).min(1.0)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum RewardDistKind {
    Bernoulli,
    /// Rewards in {0, 0.1, 0.3, 0.5}.
    DiscreteLevels,
}

impl std::str::FromStr for RewardDistKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "bernoulli" => Ok(RewardDistKind::Bernoulli),
            "discrete" | "discrete_levels" | "discrete-levels" | "levels" => Ok(RewardDistKind::DiscreteLevels),
            other => Err(Error::config(format!("unknown reward distribution `{other}`"))),
        }
    }
}

impl RewardDistKind {
    /// Whether a single reward counts as a success for the any-win cascade.
    pub fn is_success(self, reward: f64) -> bool {
        match self {
            RewardDistKind::Bernoulli => reward >= 1.0,
            RewardDistKind::DiscreteLevels => reward >= 0.5,
        }
    }
}

/// Probabilities of [`LEVELS`] whose mean is `mu`. The middle levels are pinned
/// at [`MIDDLE_LEVEL_PROB`] each, which leaves means in `[0.02, 0.47]` reachable.
pub fn level_probabilities(mu: f64) -> Result<[f64; 4]> {
    let fixed = MIDDLE_LEVEL_PROB * (LEVELS[1] + LEVELS[2]);
    let top = (mu - fixed) / LEVELS[3];
    let bottom = 1.0 - 2.0 * MIDDLE_LEVEL_PROB - top;
    const EPS: f64 = 1e-12;
    if top < -EPS || bottom < -EPS {
        return Err(Error::config(format!(
            "discrete-level rewards cannot reach mean {mu}; reachable range is [{}, {}]",
            fixed,
            fixed + LEVELS[3] * (1.0 - 2.0 * MIDDLE_LEVEL_PROB)
        )));
    }
    Ok([bottom.max(0.0), MIDDLE_LEVEL_PROB, MIDDLE_LEVEL_PROB, top.max(0.0)])
}

pub fn sample_reward<R: Rng + ?Sized>(true_mu: f64, kind: RewardDistKind, rng: &mut R) -> Result<f64> {
    match kind {
        RewardDistKind::Bernoulli => {
            if !(0.0..=1.0).contains(&true_mu) {
                return Err(Error::invalid(format!("mean {true_mu} outside [0, 1]")));
            }
            Ok(if rng.random::<f64>() < true_mu { 1.0 } else { 0.0 })
        }
        RewardDistKind::DiscreteLevels => {
            let probs = level_probabilities(true_mu)?;
            let u = rng.random::<f64>();
            let mut acc = 0.0;
            for (p, level) in probs.iter().zip(LEVELS) {
                acc += p;
                if u < acc {
                    return Ok(level);
                }
            }
            Ok(LEVELS[3])
        }
    }
}

/// Learner-visible result of one round: only arms that were actually used appear.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RoundOutcome {
    pub action: ActionSet,
    /// Used arms in the order they were queried.
    pub used: Vec<ArmId>,
    pub rewards: Vec<f64>,
    pub costs: Vec<f64>,
    pub total_used_cost: f64,
    /// Cost as if every member of the action had been used.
    pub total_worstcase_cost: f64,
}

impl RoundOutcome {
    /// Realized reward: the model's reward function applied to observed rewards.
    pub fn realized_reward(&self, model: RewardModelKind) -> f64 {
        let mut pairs: Vec<(usize, f64)> = self
            .used
            .iter()
            .map(|a| a.0)
            .zip(self.rewards.iter().copied())
            .collect();
        pairs.sort_unstable_by_key(|p| p.0);
        let values: Vec<f64> = pairs.iter().map(|p| p.1).collect();
        let set = ActionSet::from_indices(0..values.len());
        action_reward(model, &set, &values).expect("indices are in range")
    }

    /// Whether every member of the action reported feedback.
    pub fn fully_observed(&self) -> bool {
        self.used.len() == self.action.len()
    }
}

/// Costs drawn for members of the action that were not used; kept apart from
/// [`RoundOutcome`] so the learner never sees them unless explicitly allowed.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct UnusedCharges {
    pub costs: Vec<(ArmId, f64)>,
}

/// Order in which an any-win action queries its members.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub enum CascadeOrder {
    /// Ascending current cost lower bound, cheapest first.
    #[default]
    CostLcb,
    Index,
    Random,
}

impl std::str::FromStr for CascadeOrder {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "cost-lcb" | "cost_lcb" | "cheapest" => Ok(CascadeOrder::CostLcb),
            "index" | "fixed" => Ok(CascadeOrder::Index),
            "random" => Ok(CascadeOrder::Random),
            other => Err(Error::config(format!("unknown cascade order `{other}`"))),
        }
    }
}

impl CascadeOrder {
    /// Arranges the members of `action` for querying.
    pub fn arrange<R: Rng + ?Sized>(self, action: &ActionSet, cost_lcb: &[f64], rng: &mut R) -> Vec<ArmId> {
        let mut order: Vec<ArmId> = action.members().to_vec();
        match self {
            CascadeOrder::Index => {}
            CascadeOrder::CostLcb => {
                order.sort_by(|a, b| cost_lcb[a.0].total_cmp(&cost_lcb[b.0]).then(a.cmp(b)));
            }
            CascadeOrder::Random => order.shuffle(rng),
        }
        order
    }
}

/// Immutable environment: the instance plus per-arm specifications.
#[derive(Clone, Debug, PartialEq)]
pub struct Environment {
    pub instance: ProblemInstance,
    pub arms: Vec<ArmSpec>,
    pub reward_dist: RewardDistKind,
}

impl Environment {
    pub fn new(instance: ProblemInstance, arms: Vec<ArmSpec>, reward_dist: RewardDistKind) -> Result<Self> {
        if arms.len() != instance.k {
            return Err(Error::config(format!(
                "instance has k = {} but {} arms were specified",
                instance.k,
                arms.len()
            )));
        }
        for arm in &arms {
            arm.validate()?;
            if reward_dist == RewardDistKind::DiscreteLevels {
                level_probabilities(arm.true_mu)?;
            }
        }
        Ok(Self {
            instance,
            arms,
            reward_dist,
        })
    }

    pub fn true_means(&self) -> Vec<f64> {
        self.arms.iter().map(|a| a.true_mu).collect()
    }

    pub fn expected_costs(&self) -> Vec<f64> {
        self.arms.iter().map(ArmSpec::expected_cost).collect()
    }

    /// Plays `action`, querying members in `order` (a permutation of the action).
    pub fn execute_action<R: Rng + ?Sized>(
        &self,
        action: &ActionSet,
        order: &[ArmId],
        rng: &mut R,
    ) -> Result<(RoundOutcome, UnusedCharges)> {
        execute_action(&self.instance, &self.arms, self.reward_dist, action, order, rng)
    }
}

/// Plays one action. Any-win actions stop at the first success; the other
/// models use every member. Members that were not used still get a cost draw
/// for worst-case accounting, returned separately.
pub fn execute_action<R: Rng + ?Sized>(
    inst: &ProblemInstance,
    specs: &[ArmSpec],
    reward_dist: RewardDistKind,
    action: &ActionSet,
    order: &[ArmId],
    rng: &mut R,
) -> Result<(RoundOutcome, UnusedCharges)> {
    if !is_feasible(action, inst) {
        return Err(Error::invalid(format!(
            "action {action} is infeasible for {} with n = {}",
            inst.model, inst.n
        )));
    }
    let mut sorted_order = order.to_vec();
    sorted_order.sort_unstable();
    if sorted_order != action.members() {
        return Err(Error::invalid(format!(
            "query order {order:?} is not a permutation of {action}"
        )));
    }

    let stop_on_success = inst.model == RewardModelKind::Awc;
    let mut used = Vec::with_capacity(order.len());
    let mut rewards = Vec::with_capacity(order.len());
    let mut costs = Vec::with_capacity(order.len());
    for &arm in order {
        let spec = &specs[arm.0];
        let reward = sample_reward(spec.true_mu, reward_dist, rng)?;
        let cost = sample_cost(spec, rng);
        used.push(arm);
        rewards.push(reward);
        costs.push(cost);
        if stop_on_success && reward_dist.is_success(reward) {
            break;
        }
    }
    let unused: Vec<(ArmId, f64)> = order[used.len()..]
        .iter()
        .map(|&arm| (arm, sample_cost(&specs[arm.0], rng)))
        .collect();
    let total_used_cost: f64 = costs.iter().sum();
    let total_worstcase_cost = total_used_cost + unused.iter().map(|(_, c)| c).sum::<f64>();
    Ok((
        RoundOutcome {
            action: action.clone(),
            used,
            rewards,
            costs,
            total_used_cost,
            total_worstcase_cost,
        },
        UnusedCharges { costs: unused },
    ))
}

/// Token profile used for synthetic arms: 80..=120 input tokens, 100 expected output tokens.
pub const SYNTHETIC_INPUT_RANGE: (u32, u32) = (80, 120);
pub const SYNTHETIC_OUTPUT_MEAN: f64 = 100.0;

/// Price per token at which the clipped mean cost of the synthetic profile equals `target`.
fn solve_price(target: f64) -> f64 {
    let (a, _) = SYNTHETIC_INPUT_RANGE;
    let (mut lo, mut hi) = (0.0, 1.0 / f64::from(a));
    for _ in 0..100 {
        let mid = 0.5 * (lo + hi);
        if clipped_mean(SYNTHETIC_INPUT_RANGE, SYNTHETIC_OUTPUT_MEAN, mid) < target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Synthetic arm whose clipped expected cost equals `expected_cost`.
pub fn synthetic_arm(name: impl Into<String>, true_mu: f64, expected_cost: f64) -> ArmSpec {
    ArmSpec {
        name: name.into(),
        true_mu,
        cost_per_token: solve_price(expected_cost).max(f64::MIN_POSITIVE),
        input_len_range: SYNTHETIC_INPUT_RANGE,
        output_len_mean: SYNTHETIC_OUTPUT_MEAN,
        cost_scale: 1.0,
    }
}

/// Draws means and expected costs i.i.d. uniform on `[0, 1]` and back-solves
/// token prices so each arm's expected cost matches its draw.
pub fn make_synthetic_instance<R: Rng + ?Sized>(
    k: usize,
    n: usize,
    rho: f64,
    model: RewardModelKind,
    rng: &mut R,
) -> Result<(ProblemInstance, Vec<ArmSpec>)> {
    let inst = ProblemInstance::new(k, n, rho, model)?;
    let arms = (0..k)
        .map(|i| {
            let mu = rng.random::<f64>();
            let cost = rng.random::<f64>();
            synthetic_arm(format!("arm{i}"), mu, cost)
        })
        .collect();
    Ok((inst, arms))
}
