//! The round loop, replications, output files, message log and replay.

use std::fs;
use std::io::{BufRead, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::ExperimentConfig;
use crate::env::{Environment, RoundOutcome, UnusedCharges};
use crate::error::{Error, Result};
use crate::learner::{EstimatorState, FeedbackBatch};
use crate::metrics::{aggregate_csv, fmt_g, MetricsTracker, RoundObservation, RoundRecord, RunSummary};
use crate::oracle::{best_action, best_budgeted_action};
use crate::policy::{warmup_action, warmup_rounds, Policy, PolicyKind};
use crate::relax::SolveStatus;
use crate::reward::action_reward;
use crate::types::{ActionSet, ArmId};

pub const ENV_STREAM: u64 = 1;
pub const ROUNDING_STREAM: u64 = 2;
pub const POLICY_STREAM: u64 = 3;

pub const DIR_LOCAL_TO_CLOUD: &str = "local→cloud";
pub const DIR_CLOUD_TO_LOCAL: &str = "cloud→local";
pub const DIR_USER_TO_LOCAL: &str = "user→local";

/// Independent generator for one named purpose within a replication.
pub fn stream(seed: u64, id: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(id);
    rng
}

pub fn replication_seed(cfg: &ExperimentConfig, replication: u64) -> u64 {
    cfg.base_seed.wrapping_add(replication)
}

/// One line of the message log.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Message {
    pub t: u64,
    pub dir: String,
    pub kind: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub values: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub members: Option<Vec<usize>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub used: Option<Vec<usize>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rewards: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub costs: Option<Vec<f64>>,
    /// Cost of the whole action including unused members; needed for replay.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub worst_cost: Option<f64>,
    /// Selected-but-unused members and their costs, present when those costs reach the learner.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub unused: Option<Vec<usize>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub unused_costs: Option<Vec<f64>>,
}

impl Message {
    fn bare(t: u64, dir: &str, kind: &str) -> Self {
        Self {
            t,
            dir: dir.into(),
            kind: kind.into(),
            values: None,
            members: None,
            used: None,
            rewards: None,
            costs: None,
            worst_cost: None,
            unused: None,
            unused_costs: None,
        }
    }

    pub fn z_tilde(t: u64, values: Vec<f64>) -> Self {
        Self {
            values: Some(values),
            ..Self::bare(t, DIR_LOCAL_TO_CLOUD, "z_tilde")
        }
    }

    pub fn action(t: u64, action: &ActionSet) -> Self {
        Self {
            members: Some(action.indices().collect()),
            ..Self::bare(t, DIR_CLOUD_TO_LOCAL, "action")
        }
    }

    pub fn feedback(t: u64, outcome: &RoundOutcome, charges: Option<&UnusedCharges>) -> Self {
        Self {
            used: Some(outcome.used.iter().map(|a| a.0).collect()),
            rewards: Some(outcome.rewards.clone()),
            costs: Some(outcome.costs.clone()),
            worst_cost: Some(outcome.total_worstcase_cost),
            unused: charges.map(|c| c.costs.iter().map(|p| p.0 .0).collect()),
            unused_costs: charges.map(|c| c.costs.iter().map(|p| p.1).collect()),
            ..Self::bare(t, DIR_USER_TO_LOCAL, "feedback")
        }
    }
}

/// Environment plus the two reference optima for one replication.
#[derive(Clone, Debug)]
pub struct Replication {
    pub index: u64,
    pub seed: u64,
    pub env: Environment,
    pub opt_structural: f64,
    pub opt_budgeted: f64,
}

impl Replication {
    pub fn prepare(cfg: &ExperimentConfig, index: u64) -> Result<Self> {
        let seed = replication_seed(cfg, index);
        let env = cfg.instance.build(seed)?;
        let mu = env.true_means();
        let inst = &env.instance;
        let (_, opt_structural) = best_action(inst.model, &mu, inst.n)?;
        let (_, opt_budgeted) = best_budgeted_action(inst.model, &mu, &env.expected_costs(), inst.n, inst.rho)?;
        Ok(Self {
            index,
            seed,
            env,
            opt_structural,
            opt_budgeted,
        })
    }

    fn tracker(&self, policy: &PolicyKind) -> MetricsTracker {
        let inst = &self.env.instance;
        MetricsTracker::new(
            policy.name(),
            inst.alpha,
            inst.rho,
            self.opt_structural,
            self.opt_budgeted,
        )
    }

    fn record(&self, tracker: &mut MetricsTracker, outcome: &RoundOutcome) -> Result<RoundRecord> {
        let model = self.env.instance.model;
        let exp_reward = action_reward(model, &outcome.action, &self.env.true_means())?;
        Ok(tracker.record(RoundObservation {
            action: &outcome.action,
            used: ActionSet::from_indices(outcome.used.iter().map(|a| a.0)),
            exp_reward,
            realized_reward: outcome.realized_reward(model),
            used_cost: outcome.total_used_cost,
            worst_cost: outcome.total_worstcase_cost,
            fully_observed: outcome.fully_observed(),
        }))
    }

    fn summarize(
        &self,
        cfg: &ExperimentConfig,
        policy: &PolicyKind,
        tracker: &MetricsTracker,
        records: Vec<RoundRecord>,
        wall_clock_secs: f64,
        infeasible_fallbacks: usize,
    ) -> RunSummary {
        let last = records.last();
        let mean_reward = if records.is_empty() {
            0.0
        } else {
            records.iter().map(|r| r.exp_reward).sum::<f64>() / records.len() as f64
        };
        RunSummary {
            instance: cfg.instance.descriptor(),
            policy: policy.name(),
            seed: self.seed,
            regret_structural: last.map_or(0.0, |r| r.cum_regret_structural),
            regret_budgeted: last.map_or(0.0, |r| r.cum_regret_budgeted),
            violation_worst: tracker.worst_violation(),
            violation_used: tracker.used_violation(),
            ratio: last.map_or(f64::INFINITY, |r| r.ratio),
            mean_reward,
            o_star: tracker.o_star(),
            wall_clock_secs,
            infeasible_fallbacks,
            records,
        }
    }
}

fn emit(log: &mut Option<&mut dyn Write>, msg: &Message) -> Result<()> {
    if let Some(w) = log.as_mut() {
        serde_json::to_writer(&mut **w, msg).map_err(|e| Error::Io(e.into()))?;
        w.write_all(b"\n")?;
    }
    Ok(())
}

/// Runs one policy for the configured horizon on one replication.
///
/// Each round: decide (only when no batch is pending), round on the cloud
/// side, play, record, and feed the outcome through the batch buffer.
pub fn run_policy(
    cfg: &ExperimentConfig,
    rep: &Replication,
    kind: &PolicyKind,
    mut log: Option<&mut dyn Write>,
) -> Result<RunSummary> {
    let inst = &rep.env.instance;
    let mut env_rng = stream(rep.seed, ENV_STREAM);
    let mut rounding_rng = stream(rep.seed, ROUNDING_STREAM);
    let mut policy_rng = stream(rep.seed, POLICY_STREAM);

    let mut state = EstimatorState::new(inst.k, cfg.alpha_mu, cfg.alpha_c, cfg.delta_value())?;
    let mut policy = Policy::new(kind.clone(), inst)?;
    let mut batch = FeedbackBatch::new(cfg.batch_size)?;
    let mut pending_charges: Vec<UnusedCharges> = Vec::new();
    let mut tracker = rep.tracker(kind);
    let mut records = Vec::with_capacity(cfg.horizon as usize);
    let warm = if cfg.warmup { warmup_rounds(inst) } else { 0 };
    let mut current: Option<ActionSet> = None;
    let mut fallbacks = 0;

    let start = Instant::now();
    for t in 1..=cfg.horizon {
        let action = match &current {
            Some(a) => a.clone(),
            None => {
                let (z, action) = if t <= warm {
                    let a = warmup_action(inst, t - 1);
                    (a.indicator(inst.k), a)
                } else {
                    let decision = policy.decide(&state, inst, t, cfg.cg_steps, &mut policy_rng)?;
                    if decision.status == Some(SolveStatus::InfeasibleFallback) {
                        fallbacks += 1;
                    }
                    let z = match &decision.plan {
                        crate::baselines::Plan::Fractional(r) => r.z.values().to_vec(),
                        crate::baselines::Plan::Integral(s) => s.indicator(inst.k),
                    };
                    (z, decision.plan.realize(inst, &mut rounding_rng)?)
                };
                emit(&mut log, &Message::z_tilde(t, z))?;
                emit(&mut log, &Message::action(t, &action))?;
                action
            }
        };
        let order = cfg.cascade_order.arrange(&action, &state.cost_lcbs(), &mut policy_rng);
        let (outcome, charges) = rep.env.execute_action(&action, &order, &mut env_rng)?;
        emit(
            &mut log,
            &Message::feedback(t, &outcome, cfg.observe_all_costs.then_some(&charges)),
        )?;
        records.push(rep.record(&mut tracker, &outcome)?);

        if cfg.observe_all_costs {
            pending_charges.push(charges);
        }
        current = Some(action);
        if let Some(flushed) = batch.buffer_and_maybe_flush(outcome) {
            let mut charges = pending_charges.drain(..);
            for o in &flushed {
                state.update(o);
                policy.observe(o);
                if let Some(ch) = charges.next() {
                    state.observe_costs(&ch);
                }
            }
            current = None;
        }
    }
    let secs = start.elapsed().as_secs_f64();
    Ok(rep.summarize(cfg, kind, &tracker, records, secs, fallbacks))
}

/// Rebuilds the metrics of one run from its message log.
pub fn replay<R: BufRead>(cfg: &ExperimentConfig, rep: &Replication, kind: &PolicyKind, log: R) -> Result<RunSummary> {
    let mut tracker = rep.tracker(kind);
    let mut records = Vec::new();
    let mut current: Option<ActionSet> = None;
    for (i, line) in log.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let bad = |msg: String| Error::config(format!("message log line {}: {msg}", i + 1));
        let msg: Message = serde_json::from_str(&line).map_err(|e| bad(e.to_string()))?;
        match msg.kind.as_str() {
            "z_tilde" => {}
            "action" => {
                let members = msg.members.ok_or_else(|| bad("action without members".into()))?;
                current = Some(ActionSet::from_indices(members));
            }
            "feedback" => {
                let action = current
                    .clone()
                    .ok_or_else(|| bad("feedback before any action".into()))?;
                let missing = |f: &str| bad(format!("feedback without `{f}`"));
                let used: Vec<ArmId> = msg
                    .used
                    .ok_or_else(|| missing("used"))?
                    .into_iter()
                    .map(ArmId)
                    .collect();
                let rewards = msg.rewards.ok_or_else(|| missing("rewards"))?;
                let costs = msg.costs.ok_or_else(|| missing("costs"))?;
                let worst = msg.worst_cost.ok_or_else(|| missing("worst_cost"))?;
                if used.len() != rewards.len() || used.len() != costs.len() {
                    return Err(bad("used, rewards and costs differ in length".into()));
                }
                let outcome = RoundOutcome {
                    action,
                    used,
                    total_used_cost: costs.iter().sum(),
                    rewards,
                    costs,
                    total_worstcase_cost: worst,
                };
                records.push(rep.record(&mut tracker, &outcome)?);
            }
            other => return Err(bad(format!("unknown message kind `{other}`"))),
        }
    }
    Ok(rep.summarize(cfg, kind, &tracker, records, 0.0, 0))
}

/// Paths written by [`run_experiment`].
#[derive(Clone, Debug, Default)]
pub struct ExperimentReport {
    pub summaries: Vec<RunSummary>,
    pub files: Vec<PathBuf>,
}

pub fn run_csv_path(dir: &Path, kind: &PolicyKind, replication: u64) -> PathBuf {
    dir.join(format!("{}_rep{replication}.csv", kind.file_stem()))
}

pub fn message_log_path(dir: &Path, kind: &PolicyKind, replication: u64) -> PathBuf {
    dir.join(format!("{}_rep{replication}.messages.jsonl", kind.file_stem()))
}

fn write_file(path: &Path, contents: &[u8]) -> Result<()> {
    fs::write(path, contents).map_err(|e| Error::Io(std::io::Error::new(e.kind(), format!("{}: {e}", path.display()))))
}

/// A run's summary plus its message log, when logging is on.
type RunOutput = (RunSummary, Option<Vec<u8>>);

/// Runs every (replication, policy) pair and writes per-run CSVs, message logs
/// when enabled, per-policy aggregates, `summary.csv` and `timing.csv`.
///
/// Replications run in parallel; all outputs except `timing.csv` are
/// independent of scheduling.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentReport> {
    cfg.validate()?;
    let dir = &cfg.output_dir;
    fs::create_dir_all(dir).map_err(|e| Error::Io(std::io::Error::new(e.kind(), format!("{}: {e}", dir.display()))))?;

    let per_rep: Vec<Result<Vec<RunOutput>>> = (0..cfg.replications)
        .into_par_iter()
        .map(|i| {
            let rep = Replication::prepare(cfg, i)?;
            cfg.policies
                .iter()
                .map(|kind| {
                    let mut buf = cfg.log_messages.then(Vec::new);
                    let summary = run_policy(cfg, &rep, kind, buf.as_mut().map(|b| b as &mut dyn Write))?;
                    Ok((summary, buf))
                })
                .collect()
        })
        .collect();

    let mut report = ExperimentReport::default();
    let mut timing = String::from("policy,replication,seed,wall_clock_secs\n");
    let mut summary_csv = String::from(
        "policy,replication,seed,rounds,mean_reward,regret_structural,regret_budgeted,violation_worst,violation_used,ratio,o_star,infeasible_fallbacks\n",
    );
    for (i, runs) in per_rep.into_iter().enumerate() {
        for (p, (summary, log)) in runs?.into_iter().enumerate() {
            let kind = &cfg.policies[p];
            let path = run_csv_path(dir, kind, i as u64);
            write_file(&path, summary.to_csv().as_bytes())?;
            report.files.push(path);
            if let Some(bytes) = log {
                let path = message_log_path(dir, kind, i as u64);
                write_file(&path, &bytes)?;
                report.files.push(path);
            }
            timing.push_str(&format!(
                "{},{i},{},{:.6}\n",
                summary.policy, summary.seed, summary.wall_clock_secs
            ));
            summary_csv.push_str(&format!(
                "{},{i},{},{},{},{},{},{},{},{},{},{}\n",
                summary.policy,
                summary.seed,
                summary.records.len(),
                fmt_g(summary.mean_reward),
                fmt_g(summary.regret_structural),
                fmt_g(summary.regret_budgeted),
                fmt_g(summary.violation_worst),
                fmt_g(summary.violation_used),
                fmt_g(summary.ratio),
                fmt_g(summary.o_star),
                summary.infeasible_fallbacks,
            ));
            report.summaries.push(summary);
        }
    }
    for kind in &cfg.policies {
        let name = kind.name();
        let runs: Vec<&RunSummary> = report.summaries.iter().filter(|s| s.policy == name).collect();
        let path = dir.join(format!("{}_aggregate.csv", kind.file_stem()));
        write_file(&path, aggregate_csv(&runs).as_bytes())?;
        report.files.push(path);
    }
    for (name, body) in [("summary.csv", summary_csv), ("timing.csv", timing)] {
        let path = dir.join(name);
        write_file(&path, body.as_bytes())?;
        report.files.push(path);
    }
    Ok(report)
}

/// Replays a message log for replication `index` of `kind` and returns the CSV.
pub fn replay_to_csv(cfg: &ExperimentConfig, kind: &PolicyKind, index: u64, log: &Path) -> Result<String> {
    let rep = Replication::prepare(cfg, index)?;
    let file =
        fs::File::open(log).map_err(|e| Error::Io(std::io::Error::new(e.kind(), format!("{}: {e}", log.display()))))?;
    Ok(replay(cfg, &rep, kind, std::io::BufReader::new(file))?.to_csv())
}
