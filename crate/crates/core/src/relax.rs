//! Relaxed selection problems solved on the local server.
//!
//! Every relaxation reduces to the same kernel: a linear program with a box
//! `0 <= z <= 1`, a cardinality row (`sum z = N` or `sum z <= N`) and a knapsack
//! row `sum c z <= rho`. The kernel is solved exactly by a parametric scan over
//! the knapsack multiplier `lambda`. For a fixed `lambda` the Lagrangian problem
//! is solved by taking the best `N` arms by reduced weight `w - lambda c`; the
//! selected set only changes at pairwise breakpoints, and its cost is
//! non-increasing in `lambda`. Once the breakpoint where the cost crosses `rho`
//! is located, the two adjacent Lagrangian solutions are joined by a path of
//! single swaps and the crossing edge is interpolated, which leaves at most two
//! fractional coordinates.
//!
//! The any-win relaxation is a monotone submodular multilinear objective and is
//! maximized by continuous greedy, calling the kernel once per step.

use std::cmp::Ordering;

use crate::error::{Error, Result};
use crate::reward::LOG_CLAMP;
use crate::types::{FractionalSelection, RewardModelKind};

/// Default number of continuous-greedy steps.
pub const DEFAULT_CG_STEPS: usize = 100;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SolveStatus {
    Optimal,
    Approx,
    InfeasibleFallback,
}

impl SolveStatus {
    pub fn as_str(self) -> &'static str {
        match self {
            SolveStatus::Optimal => "optimal",
            SolveStatus::Approx => "approx",
            SolveStatus::InfeasibleFallback => "infeasible_fallback",
        }
    }
}

#[derive(Clone, Debug)]
pub struct SolveReport {
    pub z: FractionalSelection,
    pub objective: f64,
    pub status: SolveStatus,
    pub iterations: usize,
}

/// Inputs of one relaxed selection problem.
#[derive(Clone, Debug)]
pub struct RelaxedProblem {
    pub mu_bar: Vec<f64>,
    pub c_lower: Vec<f64>,
    pub n: usize,
    pub rho: f64,
    pub model: RewardModelKind,
}

impl RelaxedProblem {
    fn validate(&self) -> Result<()> {
        if self.mu_bar.len() != self.c_lower.len() {
            return Err(Error::invalid(format!(
                "reward and cost vectors differ in length ({} vs {})",
                self.mu_bar.len(),
                self.c_lower.len()
            )));
        }
        if self.n > self.mu_bar.len() {
            return Err(Error::invalid(format!(
                "cardinality cap {} exceeds arm count {}",
                self.n,
                self.mu_bar.len()
            )));
        }
        Ok(())
    }

    /// Dispatches to the solver for `self.model`.
    pub fn solve(&self, cg_steps: usize) -> Result<SolveReport> {
        match self.model {
            RewardModelKind::Awc => solve_awc(self, cg_steps),
            RewardModelKind::Suc => solve_suc(self),
            RewardModelKind::Aic => solve_aic(self),
        }
    }
}

/// Exact maximizer of `w . z` subject to the cardinality row, the knapsack row
/// `c . z <= rho` and the unit box.
///
/// When `equality` is set and even the `n` cheapest arms exceed `rho`, the
/// indicator of those arms is returned with [`SolveStatus::InfeasibleFallback`].
pub fn solve_two_row_lp(w: &[f64], c: &[f64], n: usize, rho: f64, equality: bool) -> Result<SolveReport> {
    if w.len() != c.len() {
        return Err(Error::invalid(format!(
            "weight and cost vectors differ in length ({} vs {})",
            w.len(),
            c.len()
        )));
    }
    if n > w.len() {
        return Err(Error::invalid(format!(
            "cardinality cap {n} exceeds arm count {}",
            w.len()
        )));
    }
    if let Some(k) = c.iter().position(|&ck| !(ck >= 0.0) || !ck.is_finite()) {
        return Err(Error::invalid(format!("cost of arm {k} is {}", c[k])));
    }
    if let Some(k) = w.iter().position(|wk| !wk.is_finite()) {
        return Err(Error::invalid(format!("weight of arm {k} is {}", w[k])));
    }
    Ok(Kernel::new(w, c, n, equality).solve(rho))
}

struct Kernel<'a> {
    w: &'a [f64],
    c: &'a [f64],
    n: usize,
    equality: bool,
    order: Vec<usize>,
    evaluations: usize,
}

impl<'a> Kernel<'a> {
    fn new(w: &'a [f64], c: &'a [f64], n: usize, equality: bool) -> Self {
        Self {
            w,
            c,
            n,
            equality,
            order: Vec::with_capacity(w.len()),
            evaluations: 0,
        }
    }

    fn breakpoints(&self) -> Vec<f64> {
        let k = self.w.len();
        let mut out = Vec::with_capacity(k * (k + 1) / 2 + 1);
        out.push(0.0);
        for i in 0..k {
            for j in (i + 1)..k {
                let dc = self.c[i] - self.c[j];
                if dc != 0.0 {
                    let l = (self.w[i] - self.w[j]) / dc;
                    if l > 0.0 && l.is_finite() {
                        out.push(l);
                    }
                }
            }
            if !self.equality && self.c[i] > 0.0 && self.w[i] > 0.0 {
                let l = self.w[i] / self.c[i];
                if l.is_finite() {
                    out.push(l);
                }
            }
        }
        out.sort_unstable_by(f64::total_cmp);
        out.dedup();
        out
    }

    /// Lagrangian solution at a multiplier that is not a breakpoint.
    fn select_at(&mut self, lambda: f64) -> Vec<bool> {
        self.evaluations += 1;
        let (w, c) = (self.w, self.c);
        let reduced = |k: usize| w[k] - lambda * c[k];
        self.order.clear();
        if self.equality {
            self.order.extend(0..w.len());
        } else {
            self.order.extend((0..w.len()).filter(|&k| reduced(k) > 0.0));
        }
        let by_weight = |a: &usize, b: &usize| -> Ordering { reduced(*b).total_cmp(&reduced(*a)).then(a.cmp(b)) };
        let take = self.n.min(self.order.len());
        if take > 0 && take < self.order.len() {
            self.order.select_nth_unstable_by(take - 1, by_weight);
        }
        let mut chosen = vec![false; w.len()];
        for &k in &self.order[..take] {
            chosen[k] = true;
        }
        chosen
    }

    fn cost(&self, set: &[bool]) -> f64 {
        set.iter().zip(self.c).filter(|(s, _)| **s).map(|(_, c)| c).sum()
    }

    fn report(&self, z: Vec<f64>, status: SolveStatus) -> SolveReport {
        let objective = z.iter().zip(self.w).map(|(z, w)| z * w).sum();
        SolveReport {
            z: FractionalSelection::new(z).expect("kernel output lies in the box"),
            objective,
            status,
            iterations: self.evaluations,
        }
    }

    fn solve(mut self, rho: f64) -> SolveReport {
        let k = self.w.len();
        if self.n == 0 || k == 0 {
            return self.report(vec![0.0; k], SolveStatus::Optimal);
        }
        let bps = self.breakpoints();
        let m = bps.len() - 1;
        let sample = |j: usize| {
            if j < m {
                0.5 * (bps[j] + bps[j + 1])
            } else {
                2.0 * bps[m] + 1.0
            }
        };

        let first = self.select_at(sample(0));
        if self.cost(&first) <= rho {
            let z = first.iter().map(|&s| if s { 1.0 } else { 0.0 }).collect();
            return self.report(z, SolveStatus::Optimal);
        }
        let last = self.select_at(sample(m));
        if self.cost(&last) > rho {
            return self.fallback();
        }

        // Invariant: cost(X_lo) > rho >= cost(X_hi).
        let (mut lo, mut hi) = (0usize, m);
        let mut hi_set = last;
        let mut lo_set = first;
        while hi - lo > 1 {
            let mid = lo + (hi - lo) / 2;
            let set = self.select_at(sample(mid));
            if self.cost(&set) <= rho {
                hi = mid;
                hi_set = set;
            } else {
                lo = mid;
                lo_set = set;
            }
        }
        self.interpolate(lo_set, &hi_set, rho)
    }

    /// Walks from the over-budget set to the within-budget set one swap at a
    /// time and splits the edge on which the budget is crossed.
    fn interpolate(&self, from: Vec<bool>, to: &[bool], rho: f64) -> SolveReport {
        let removed: Vec<usize> = (0..from.len()).filter(|&i| from[i] && !to[i]).collect();
        let added: Vec<usize> = (0..from.len()).filter(|&i| !from[i] && to[i]).collect();
        let paired = removed.len().min(added.len());
        let mut steps: Vec<(Option<usize>, Option<usize>)> =
            (0..paired).map(|i| (Some(removed[i]), Some(added[i]))).collect();
        steps.extend(removed[paired..].iter().map(|&r| (Some(r), None)));
        steps.extend(added[paired..].iter().map(|&a| (None, Some(a))));

        let mut current = from;
        let mut cost = self.cost(&current);
        for (out, inn) in steps {
            let mut next_cost = cost;
            if let Some(o) = out {
                next_cost -= self.c[o];
            }
            if let Some(i) = inn {
                next_cost += self.c[i];
            }
            if next_cost <= rho {
                // theta is the weight left on the previous set.
                let theta = ((rho - next_cost) / (cost - next_cost)).clamp(0.0, 1.0);
                let mut z: Vec<f64> = current.iter().map(|&s| if s { 1.0 } else { 0.0 }).collect();
                if let Some(o) = out {
                    z[o] = theta;
                }
                if let Some(i) = inn {
                    z[i] = 1.0 - theta;
                }
                return self.report(z, SolveStatus::Optimal);
            }
            if let Some(o) = out {
                current[o] = false;
            }
            if let Some(i) = inn {
                current[i] = true;
            }
            cost = next_cost;
        }
        // Only reachable through rounding in the cost sums.
        let z = to.iter().map(|&s| if s { 1.0 } else { 0.0 }).collect();
        self.report(z, SolveStatus::Optimal)
    }

    fn fallback(&self) -> SolveReport {
        let z = cheapest_indicator(self.c, self.n);
        self.report(z, SolveStatus::InfeasibleFallback)
    }
}

/// Indicator of the `n` cheapest arms, ties broken by lower index.
pub fn cheapest_indicator(c: &[f64], n: usize) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..c.len()).collect();
    idx.sort_by(|a, b| c[*a].total_cmp(&c[*b]).then(a.cmp(b)));
    let mut z = vec![0.0; c.len()];
    for &k in idx.iter().take(n) {
        z[k] = 1.0;
    }
    z
}

/// Sum-up relaxation: a linear program with an equality cardinality row.
pub fn solve_suc(p: &RelaxedProblem) -> Result<SolveReport> {
    p.validate()?;
    solve_two_row_lp(&p.mu_bar, &p.c_lower, p.n, p.rho, true)
}

/// All-in relaxation solved in log space; the reported objective is the
/// geometric product `prod mu_k^z_k` at the clamped means.
pub fn solve_aic(p: &RelaxedProblem) -> Result<SolveReport> {
    p.validate()?;
    let logs: Vec<f64> = p.mu_bar.iter().map(|&m| m.max(LOG_CLAMP).ln()).collect();
    let mut report = solve_two_row_lp(&logs, &p.c_lower, p.n, p.rho, true)?;
    report.objective = report.objective.exp();
    Ok(report)
}

/// Any-win relaxation maximized by continuous greedy over the closed-form
/// multilinear extension `1 - prod(1 - mu_k z_k)`.
pub fn solve_awc(p: &RelaxedProblem, steps: usize) -> Result<SolveReport> {
    continuous_greedy(p, steps, |_| {})
}

/// Continuous greedy; `observe` receives the relaxed objective after each step.
pub(crate) fn continuous_greedy<F: FnMut(f64)>(
    p: &RelaxedProblem,
    steps: usize,
    mut observe: F,
) -> Result<SolveReport> {
    p.validate()?;
    if steps == 0 {
        return Err(Error::invalid("continuous greedy needs at least one step"));
    }
    let k = p.mu_bar.len();
    let step = 1.0 / steps as f64;
    let mut z = vec![0.0; k];
    let mut grad = vec![0.0; k];
    let mut suffix = vec![1.0; k + 1];
    let mut evaluations = 0;
    for _ in 0..steps {
        // g_k = mu_k * prod_{j != k} (1 - mu_j z_j), without dividing by zero factors.
        for j in (0..k).rev() {
            suffix[j] = suffix[j + 1] * (1.0 - p.mu_bar[j] * z[j]);
        }
        let mut prefix = 1.0;
        for j in 0..k {
            grad[j] = p.mu_bar[j] * prefix * suffix[j + 1];
            prefix *= 1.0 - p.mu_bar[j] * z[j];
        }
        let dir = solve_two_row_lp(&grad, &p.c_lower, p.n, p.rho, false)?;
        evaluations += dir.iterations;
        for (zk, vk) in z.iter_mut().zip(dir.z.values()) {
            *zk = (*zk + vk * step).min(1.0);
        }
        observe(any_win_value(&z, &p.mu_bar));
    }
    let objective = any_win_value(&z, &p.mu_bar);
    Ok(SolveReport {
        z: FractionalSelection::new(z)?,
        objective,
        status: SolveStatus::Approx,
        iterations: evaluations,
    })
}

fn any_win_value(z: &[f64], mu: &[f64]) -> f64 {
    1.0 - z.iter().zip(mu).fold(1.0, |acc, (zk, mk)| acc * (1.0 - mk * zk))
}
