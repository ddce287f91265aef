//! Exhaustive integer optimizers.
//!
//! Used as regret baselines, as the per-round solver of the direct policy, and
//! as test references. Deliberately naive: subsets are enumerated in
//! lexicographic order and ties keep the first (smallest) set.

use crate::error::{Error, Result};
use crate::learner::EstimatorState;
use crate::relax::cheapest_indicator;
use crate::reward::action_reward_unchecked;
use crate::types::{ActionSet, ProblemInstance, RewardModelKind};

/// Maximum number of subsets an enumeration may visit.
pub const SUBSET_LIMIT: u128 = 5_000_000;

fn binomial(n: usize, k: usize) -> u128 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = acc * (n - i) as u128 / (i + 1) as u128;
    }
    acc
}

/// Number of subsets visited when enumerating the feasible family.
pub fn feasible_family_size(model: RewardModelKind, k: usize, n: usize) -> u128 {
    if model.requires_exact_cardinality() {
        binomial(k, n)
    } else {
        (1..=n).map(|s| binomial(k, s)).sum()
    }
}

fn guard(model: RewardModelKind, k: usize, n: usize) -> Result<()> {
    let subsets = feasible_family_size(model, k, n);
    if subsets > SUBSET_LIMIT {
        return Err(Error::SizeGuard {
            subsets,
            limit: SUBSET_LIMIT,
        });
    }
    Ok(())
}

struct Search<'a> {
    model: RewardModelKind,
    mu: &'a [f64],
    cost: Option<&'a [f64]>,
    n: usize,
    rho: f64,
    exact: bool,
    current: Vec<usize>,
    best: Option<(Vec<usize>, f64)>,
}

impl Search<'_> {
    // Visits subsets in lexicographic order of their sorted member lists.
    fn visit(&mut self, start: usize, spent: f64) {
        let k = self.mu.len();
        for i in start..k {
            let spent = spent + self.cost.map_or(0.0, |c| c[i]);
            self.current.push(i);
            let size = self.current.len();
            if !self.exact || size == self.n {
                self.consider(spent);
            }
            if size < self.n {
                self.visit(i + 1, spent);
            }
            self.current.pop();
        }
    }

    fn consider(&mut self, spent: f64) {
        if self.cost.is_some() && spent > self.rho {
            return;
        }
        let value = action_reward_unchecked(self.model, self.current.iter().copied(), self.mu);
        match &self.best {
            Some((_, v)) if value <= *v => {}
            _ => self.best = Some((self.current.clone(), value)),
        }
    }
}

fn validate(mu: &[f64], n: usize) -> Result<()> {
    if n == 0 || n > mu.len() {
        return Err(Error::invalid(format!(
            "need 1 <= n <= K, got n = {n}, K = {}",
            mu.len()
        )));
    }
    Ok(())
}

fn search(
    model: RewardModelKind,
    mu: &[f64],
    cost: Option<&[f64]>,
    n: usize,
    rho: f64,
) -> Result<Option<(ActionSet, f64)>> {
    validate(mu, n)?;
    guard(model, mu.len(), n)?;
    let mut s = Search {
        model,
        mu,
        cost,
        n,
        rho,
        exact: model.requires_exact_cardinality(),
        current: Vec::with_capacity(n),
        best: None,
    };
    s.visit(0, 0.0);
    Ok(s.best.map(|(set, v)| (ActionSet::from_indices(set), v)))
}

/// Exact argmax of the action reward over the cardinality-feasible family.
pub fn best_action(model: RewardModelKind, mu: &[f64], n: usize) -> Result<(ActionSet, f64)> {
    Ok(search(model, mu, None, n, f64::INFINITY)?.expect("family is non-empty when 1 <= n <= K"))
}

/// Exact argmax subject additionally to `sum c <= rho`. Returns the empty set
/// with value 0 when no feasible set exists.
pub fn best_budgeted_action(
    model: RewardModelKind,
    mu: &[f64],
    c: &[f64],
    n: usize,
    rho: f64,
) -> Result<(ActionSet, f64)> {
    if c.len() != mu.len() {
        return Err(Error::invalid("mu and c must have the same length"));
    }
    Ok(search(model, mu, Some(c), n, rho)?.unwrap_or((ActionSet::empty(), 0.0)))
}

/// One round of the direct policy: enumerate at `(mu_bar, c_lower)`. When the
/// budget admits no set, falls back to the `n` arms with the smallest cost bound.
pub fn direct_policy_select(state: &EstimatorState, inst: &ProblemInstance) -> Result<ActionSet> {
    let mu_bar = state.reward_ucbs();
    let c_lower = state.cost_lcbs();
    let (set, _) = best_budgeted_action(inst.model, &mu_bar, &c_lower, inst.n, inst.rho)?;
    if set.is_empty() {
        return Ok(ActionSet::from_indicator(&cheapest_indicator(&c_lower, inst.n)));
    }
    Ok(set)
}
