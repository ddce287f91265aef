//! Policy names and per-round dispatch.

use std::fmt;
use std::str::FromStr;

use rand::Rng;

use crate::baselines::{cucb_select, epsilon_greedy_plan, fixed_select, thompson_plan, Plan, ThompsonTallies};
use crate::env::RoundOutcome;
use crate::error::{Error, Result};
use crate::learner::EstimatorState;
use crate::oracle::best_budgeted_action;
use crate::pipeline::{local_relax_relabelled, Relabel};
use crate::relax::{cheapest_indicator, SolveStatus};
use crate::types::{ActionSet, ProblemInstance};

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum PolicyKind {
    C2mabv,
    C2mabvDirect,
    Cucb,
    EpsGreedy,
    Thompson,
    Fixed(ActionSet),
}

impl PolicyKind {
    pub fn name(&self) -> String {
        self.to_string()
    }

    /// Name usable as a file stem.
    pub fn file_stem(&self) -> String {
        self.to_string().replace(':', "-")
    }
}

impl fmt::Display for PolicyKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PolicyKind::C2mabv => f.write_str("c2mabv"),
            PolicyKind::C2mabvDirect => f.write_str("c2mabv-direct"),
            PolicyKind::Cucb => f.write_str("cucb"),
            PolicyKind::EpsGreedy => f.write_str("eps-greedy"),
            PolicyKind::Thompson => f.write_str("thompson"),
            PolicyKind::Fixed(s) => write!(f, "fixed:{}", s.joined()),
        }
    }
}

impl FromStr for PolicyKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        if let Some(ids) = s.strip_prefix("fixed:") {
            let parsed: std::result::Result<Vec<usize>, _> = ids
                .split(['+', ',', ' '])
                .filter(|p| !p.is_empty())
                .map(str::parse::<usize>)
                .collect();
            let ids = parsed.map_err(|e| Error::config(format!("bad arm id in `{s}`: {e}")))?;
            if ids.is_empty() {
                return Err(Error::config("fixed policy needs at least one arm id"));
            }
            return Ok(PolicyKind::Fixed(ActionSet::from_indices(ids)));
        }
        match s.to_ascii_lowercase().as_str() {
            "c2mabv" => Ok(PolicyKind::C2mabv),
            "c2mabv-direct" => Ok(PolicyKind::C2mabvDirect),
            "cucb" => Ok(PolicyKind::Cucb),
            "eps-greedy" | "epsilon-greedy" => Ok(PolicyKind::EpsGreedy),
            "thompson" => Ok(PolicyKind::Thompson),
            other => Err(Error::config(format!(
                "unknown policy `{other}` (expected c2mabv, c2mabv-direct, cucb, eps-greedy, thompson or fixed:<ids>)"
            ))),
        }
    }
}

/// One decision: the plan handed to rounding plus bookkeeping.
#[derive(Clone, Debug)]
pub struct Decision {
    pub plan: Plan,
    pub status: Option<SolveStatus>,
    pub explored: bool,
}

/// Per-replication policy state.
#[derive(Clone, Debug)]
pub struct Policy {
    pub kind: PolicyKind,
    tallies: Option<ThompsonTallies>,
}

impl Policy {
    pub fn new(kind: PolicyKind, inst: &ProblemInstance) -> Result<Self> {
        if let PolicyKind::Fixed(set) = &kind {
            fixed_select(set, inst)?;
        }
        let tallies = matches!(kind, PolicyKind::Thompson).then(|| ThompsonTallies::new(inst.k));
        Ok(Self { kind, tallies })
    }

    /// Chooses the next plan. `t` is the current round.
    pub fn decide<R: Rng + ?Sized>(
        &self,
        state: &EstimatorState,
        inst: &ProblemInstance,
        t: u64,
        cg_steps: usize,
        rng: &mut R,
    ) -> Result<Decision> {
        let relaxed = |report: crate::relax::SolveReport, explored| Decision {
            status: Some(report.status),
            plan: Plan::Fractional(report),
            explored,
        };
        let integral = |set| Decision {
            plan: Plan::Integral(set),
            status: None,
            explored: false,
        };
        Ok(match &self.kind {
            PolicyKind::C2mabv => {
                let relabel = tie_relabel(state, rng);
                let report =
                    local_relax_relabelled(inst, &state.reward_ucbs(), &state.cost_lcbs(), cg_steps, &relabel)?;
                relaxed(report, false)
            }
            PolicyKind::C2mabvDirect => integral(direct_select(state, inst, rng)?),
            PolicyKind::Cucb => integral(cucb_select(state, inst)),
            PolicyKind::EpsGreedy => {
                let (plan, explored) = epsilon_greedy_plan(state, inst, t, cg_steps, rng)?;
                match plan {
                    Plan::Fractional(report) => relaxed(report, explored),
                    Plan::Integral(set) => Decision {
                        plan: Plan::Integral(set),
                        status: None,
                        explored,
                    },
                }
            }
            PolicyKind::Thompson => {
                let tallies = self.tallies.as_ref().expect("thompson tallies");
                match thompson_plan(tallies, state, inst, cg_steps, rng)? {
                    Plan::Fractional(report) => relaxed(report, false),
                    Plan::Integral(set) => integral(set),
                }
            }
            PolicyKind::Fixed(set) => integral(set.clone()),
        })
    }

    /// Policy-private learning beyond the shared estimator.
    pub fn observe(&mut self, outcome: &RoundOutcome) {
        if let Some(t) = self.tallies.as_mut() {
            t.update(outcome);
        }
    }
}

fn tie_relabel<R: Rng + ?Sized>(state: &EstimatorState, rng: &mut R) -> Relabel {
    if state.any_unobserved() {
        Relabel::random(state.k(), rng)
    } else {
        Relabel::identity(state.k())
    }
}

/// Enumeration at `(mu_bar, c_lower)` with the same random tie-breaking as the
/// relaxed policy; falls back to the cheapest `n` arms when nothing fits.
fn direct_select<R: Rng + ?Sized>(state: &EstimatorState, inst: &ProblemInstance, rng: &mut R) -> Result<ActionSet> {
    let relabel = tie_relabel(state, rng);
    let mu = relabel.forward(&state.reward_ucbs());
    let c = relabel.forward(&state.cost_lcbs());
    let (set, _) = best_budgeted_action(inst.model, &mu, &c, inst.n, inst.rho)?;
    let indicator = if set.is_empty() {
        cheapest_indicator(&c, inst.n)
    } else {
        set.indicator(inst.k)
    };
    Ok(ActionSet::from_indicator(&relabel.backward(&indicator)))
}

/// Opening sweep: round `i` (0-based) plays arms `i*n .. (i+1)*n`, the last
/// round padded with the lowest-index arms outside the chunk.
pub fn warmup_rounds(inst: &ProblemInstance) -> u64 {
    inst.k.div_ceil(inst.n) as u64
}

pub fn warmup_action(inst: &ProblemInstance, round: u64) -> ActionSet {
    let start = round as usize * inst.n;
    let end = (start + inst.n).min(inst.k);
    let mut ids: Vec<usize> = (start..end).collect();
    let mut filler = 0;
    while ids.len() < inst.n {
        if !(start..end).contains(&filler) {
            ids.push(filler);
        }
        filler += 1;
    }
    ActionSet::from_indices(ids)
}
