//! Experiment and instance configuration.
//!
//! Files are line-oriented `key = value` pairs; `#` starts a comment and blank
//! lines are ignored. A later assignment of the same key wins, except `policy`,
//! which accumulates. See the README for the full key list.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::env::{make_synthetic_instance, synthetic_arm, ArmSpec, CascadeOrder, Environment, RewardDistKind};
use crate::error::{Error, Result};
use crate::policy::PolicyKind;
use crate::relax::DEFAULT_CG_STEPS;
use crate::types::{ProblemInstance, RewardModelKind};

/// ChaCha stream used for drawing synthetic instances.
pub const INSTANCE_STREAM: u64 = 0;

pub const PRESETS: &[(&str, &str)] = &[
    (
        "synthetic-awc-d3",
        "any-win, K=16, N=8, rho=2.5, means and costs drawn from U[0,1]",
    ),
    (
        "synthetic-suc-d3",
        "sum-up, K=25, N=8, rho=1.4, means and costs drawn from U[0,1]",
    ),
    (
        "synthetic-aic-d3",
        "all-in, K=25, N=8, rho=1.6, means and costs drawn from U[0,1]",
    ),
    (
        "table3-llms",
        "nine priced LLMs, N=4, any-win with rho=0.45 (suc: 0.5, aic: 0.3), graded rewards",
    ),
];

/// Nine LLMs with list prices in USD per 1k tokens. The means are
/// illustrative: graded-reward means in the reachable range.
const LLM_TABLE: &[(&str, f64, f64)] = &[
    ("ChatGLM2-6B-32K", 0.005, 0.08),
    ("ChatGPT-3.5", 0.02, 0.38),
    ("Claude-2", 0.08, 0.41),
    ("ERNIE-3.5-8K", 0.015, 0.33),
    ("Llama-2-7B", 0.005, 0.17),
    ("Llama-2-13B", 0.008, 0.22),
    ("Llama-2-70B", 0.05, 0.31),
    ("Mixtral-8x7B-Instruct", 0.05, 0.34),
    ("ChatGPT-4", 0.12, 0.45),
];
const LLM_INPUT_RANGE: (u32, u32) = (150, 250);
const LLM_OUTPUT_MEAN: f64 = 150.0;
/// Dollars to unit cost.
const LLM_COST_SCALE: f64 = 10.0;

pub fn table3_arms() -> Vec<ArmSpec> {
    LLM_TABLE
        .iter()
        .map(|&(name, per_1k, mu)| ArmSpec {
            name: name.to_string(),
            true_mu: mu,
            cost_per_token: per_1k / 1000.0,
            input_len_range: LLM_INPUT_RANGE,
            output_len_mean: LLM_OUTPUT_MEAN,
            cost_scale: LLM_COST_SCALE,
        })
        .collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ArmSource {
    /// Means and expected costs drawn i.i.d. from U[0,1].
    Synthetic,
    Table3,
}

/// Per-arm field overrides (`arm.<i>.<field> = value`).
#[derive(Clone, Debug, Default, PartialEq)]
pub struct ArmOverride {
    pub name: Option<String>,
    pub mu: Option<f64>,
    /// Target expected cost; re-solves the price under the synthetic token profile.
    pub cost: Option<f64>,
    pub price: Option<f64>,
    pub input_min: Option<u32>,
    pub input_max: Option<u32>,
    pub output_mean: Option<f64>,
    pub scale: Option<f64>,
}

impl ArmOverride {
    fn apply(&self, arm: &mut ArmSpec) {
        if let Some(c) = self.cost {
            let mu = arm.true_mu;
            *arm = synthetic_arm(arm.name.clone(), mu, c);
        }
        if let Some(n) = &self.name {
            arm.name = n.clone();
        }
        if let Some(m) = self.mu {
            arm.true_mu = m;
        }
        if let Some(p) = self.price {
            arm.cost_per_token = p;
        }
        if let Some(a) = self.input_min {
            arm.input_len_range.0 = a;
        }
        if let Some(b) = self.input_max {
            arm.input_len_range.1 = b;
        }
        if let Some(o) = self.output_mean {
            arm.output_len_mean = o;
        }
        if let Some(s) = self.scale {
            arm.cost_scale = s;
        }
    }
}

/// Everything needed to build an [`Environment`].
#[derive(Clone, Debug, PartialEq)]
pub struct InstanceSpec {
    pub name: String,
    pub k: usize,
    pub n: usize,
    pub rho: f64,
    pub model: RewardModelKind,
    pub reward_dist: RewardDistKind,
    /// Fixed seed for synthetic draws; `None` draws per replication.
    pub seed: Option<u64>,
    pub source: ArmSource,
    pub overrides: BTreeMap<usize, ArmOverride>,
}

impl InstanceSpec {
    pub fn preset(name: &str) -> Result<Self> {
        let synthetic = |k, n, rho, model| InstanceSpec {
            name: name.to_string(),
            k,
            n,
            rho,
            model,
            reward_dist: RewardDistKind::Bernoulli,
            seed: None,
            source: ArmSource::Synthetic,
            overrides: BTreeMap::new(),
        };
        Ok(match name {
            "synthetic-awc-d3" => synthetic(16, 8, 2.5, RewardModelKind::Awc),
            "synthetic-suc-d3" => synthetic(25, 8, 1.4, RewardModelKind::Suc),
            "synthetic-aic-d3" => synthetic(25, 8, 1.6, RewardModelKind::Aic),
            "table3-llms" => InstanceSpec {
                name: name.to_string(),
                k: LLM_TABLE.len(),
                n: 4,
                rho: 0.45,
                model: RewardModelKind::Awc,
                reward_dist: RewardDistKind::DiscreteLevels,
                seed: None,
                source: ArmSource::Table3,
                overrides: BTreeMap::new(),
            },
            other => {
                let known: Vec<&str> = PRESETS.iter().map(|p| p.0).collect();
                return Err(Error::config(format!(
                    "unknown preset `{other}` (known: {})",
                    known.join(", ")
                )));
            }
        })
    }

    /// Builds the environment. Synthetic arms are drawn from `seed` when set,
    /// otherwise from `replication_seed`.
    pub fn build(&self, replication_seed: u64) -> Result<Environment> {
        let inst = ProblemInstance::new(self.k, self.n, self.rho, self.model)?;
        let mut arms = match self.source {
            ArmSource::Synthetic => {
                let mut rng = ChaCha8Rng::seed_from_u64(self.seed.unwrap_or(replication_seed));
                rng.set_stream(INSTANCE_STREAM);
                make_synthetic_instance(self.k, self.n, self.rho, self.model, &mut rng)?.1
            }
            ArmSource::Table3 => {
                let arms = table3_arms();
                if arms.len() != self.k {
                    return Err(Error::config(format!(
                        "the LLM table has {} arms; k = {} is not allowed",
                        arms.len(),
                        self.k
                    )));
                }
                arms
            }
        };
        for (&i, o) in &self.overrides {
            let arm = arms
                .get_mut(i)
                .ok_or_else(|| Error::config(format!("arm override {i} is out of range for k = {}", self.k)))?;
            o.apply(arm);
        }
        Environment::new(inst, arms, self.reward_dist)
    }

    pub fn descriptor(&self) -> String {
        format!(
            "{} (model={}, k={}, n={}, rho={})",
            self.name, self.model, self.k, self.n, self.rho
        )
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum DeltaSpec {
    /// `1 / T` for the configured horizon.
    InverseHorizon,
    Fixed(f64),
}

#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentConfig {
    pub instance: InstanceSpec,
    pub policies: Vec<PolicyKind>,
    pub horizon: u64,
    pub replications: u64,
    pub base_seed: u64,
    pub alpha_mu: f64,
    pub alpha_c: f64,
    pub delta: DeltaSpec,
    pub batch_size: usize,
    pub cascade_order: CascadeOrder,
    pub cg_steps: usize,
    pub observe_all_costs: bool,
    pub warmup: bool,
    pub output_dir: PathBuf,
    pub log_messages: bool,
}

impl ExperimentConfig {
    pub fn with_instance(instance: InstanceSpec) -> Self {
        Self {
            instance,
            policies: vec![PolicyKind::C2mabv],
            horizon: 10_000,
            replications: 1,
            base_seed: 0,
            alpha_mu: 0.3,
            alpha_c: 0.01,
            delta: DeltaSpec::InverseHorizon,
            batch_size: 1,
            cascade_order: CascadeOrder::CostLcb,
            cg_steps: DEFAULT_CG_STEPS,
            observe_all_costs: true,
            warmup: false,
            output_dir: PathBuf::from("out"),
            log_messages: false,
        }
    }

    pub fn delta_value(&self) -> f64 {
        match self.delta {
            DeltaSpec::InverseHorizon => 1.0 / self.horizon as f64,
            DeltaSpec::Fixed(d) => d,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.horizon == 0 {
            return Err(Error::config("horizon must be at least 1"));
        }
        if self.replications == 0 {
            return Err(Error::config("replications must be at least 1"));
        }
        if self.batch_size == 0 {
            return Err(Error::config("batch_size must be at least 1"));
        }
        if !(self.alpha_mu > 0.0 && self.alpha_c > 0.0) {
            return Err(Error::config("alpha_mu and alpha_c must be positive"));
        }
        let d = self.delta_value();
        if !(d > 0.0 && d <= 1.0) {
            return Err(Error::config(format!("delta must lie in (0, 1], got {d}")));
        }
        if self.cg_steps == 0 {
            return Err(Error::config("cg_steps must be at least 1"));
        }
        if self.policies.is_empty() {
            return Err(Error::config("at least one policy is required"));
        }
        ProblemInstance::new(self.instance.k, self.instance.n, self.instance.rho, self.instance.model)
            .map_err(|e| Error::config(e.to_string()))?;
        Ok(())
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::config(format!("cannot read config {}: {e}", path.display())))?;
        Self::parse(&text, path.parent().unwrap_or(Path::new(".")))
    }

    /// Parses a config; relative `instance_file` paths resolve against `base_dir`.
    pub fn parse(text: &str, base_dir: &Path) -> Result<Self> {
        let mut entries = parse_pairs(text)?;
        // Instance keys from an included file come first so the config can override them.
        if let Some(pos) = entries.iter().position(|(k, _, _)| k == "instance_file") {
            let (_, file, _) = entries.remove(pos);
            let path = base_dir.join(&file);
            let included = std::fs::read_to_string(&path)
                .map_err(|e| Error::config(format!("cannot read instance file {}: {e}", path.display())))?;
            let mut inc = parse_pairs(&included)?;
            inc.retain(|(k, _, _)| is_instance_key(k));
            inc.extend(entries);
            entries = inc;
        }

        let preset = entries
            .iter()
            .rev()
            .find(|(k, _, _)| k == "preset")
            .map(|(_, v, _)| v.clone());
        let mut instance = match preset {
            Some(p) => InstanceSpec::preset(&p)?,
            None => InstanceSpec {
                name: "custom".into(),
                k: 0,
                n: 0,
                rho: 0.0,
                model: RewardModelKind::Awc,
                reward_dist: RewardDistKind::Bernoulli,
                seed: None,
                source: ArmSource::Synthetic,
                overrides: BTreeMap::new(),
            },
        };
        let mut cfg = ExperimentConfig::with_instance(instance.clone());
        let mut policies = Vec::new();
        let mut model_rho_default = false;
        for (key, value, line) in &entries {
            let bad = |msg: String| Error::config(format!("line {line}: {key}: {msg}"));
            let num = || value.parse::<f64>().map_err(|e| bad(e.to_string()));
            let int = || value.parse::<u64>().map_err(|e| bad(e.to_string()));
            match key.as_str() {
                "preset" => {}
                "k" => instance.k = int()? as usize,
                "n" => instance.n = int()? as usize,
                "rho" => instance.rho = num()?,
                "model" => {
                    instance.model = value.parse()?;
                    model_rho_default = true;
                }
                "seed" => instance.seed = Some(int()?),
                "reward_dist" => instance.reward_dist = value.parse()?,
                "policy" => {
                    for p in value.split(',').map(str::trim).filter(|p| !p.is_empty()) {
                        policies.push(p.parse()?);
                    }
                }
                "horizon" | "T" => cfg.horizon = int()?,
                "replications" => cfg.replications = int()?,
                "base_seed" => cfg.base_seed = int()?,
                "alpha_mu" => cfg.alpha_mu = num()?,
                "alpha_c" => cfg.alpha_c = num()?,
                "delta" => {
                    cfg.delta = if value.eq_ignore_ascii_case("1/T") {
                        DeltaSpec::InverseHorizon
                    } else {
                        DeltaSpec::Fixed(num()?)
                    }
                }
                "batch_size" => cfg.batch_size = int()? as usize,
                "cascade_order" => cfg.cascade_order = value.parse()?,
                "cg_steps" => cfg.cg_steps = int()? as usize,
                "observe_all_costs" => cfg.observe_all_costs = parse_bool(value).map_err(bad)?,
                "warmup" => cfg.warmup = parse_bool(value).map_err(bad)?,
                "output_dir" => cfg.output_dir = PathBuf::from(value),
                "log_messages" => cfg.log_messages = parse_bool(value).map_err(bad)?,
                k if k.starts_with("arm.") => apply_arm_key(&mut instance, k, value).map_err(|e| bad(e.to_string()))?,
                other => return Err(Error::config(format!("line {line}: unknown key `{other}`"))),
            }
        }
        // The LLM table's budget follows the chosen model unless set explicitly.
        if instance.source == ArmSource::Table3 && model_rho_default && !entries.iter().any(|(k, _, _)| k == "rho") {
            instance.rho = match instance.model {
                RewardModelKind::Awc => 0.45,
                RewardModelKind::Suc => 0.5,
                RewardModelKind::Aic => 0.3,
            };
        }
        if !policies.is_empty() {
            cfg.policies = policies;
        }
        cfg.instance = instance;
        cfg.validate()?;
        Ok(cfg)
    }
}

fn is_instance_key(k: &str) -> bool {
    matches!(k, "preset" | "k" | "n" | "rho" | "model" | "seed" | "reward_dist") || k.starts_with("arm.")
}

fn parse_pairs(text: &str) -> Result<Vec<(String, String, usize)>> {
    let mut out = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| Error::config(format!("line {}: expected key = value, got `{line}`", i + 1)))?;
        out.push((k.trim().to_string(), v.trim().to_string(), i + 1));
    }
    Ok(out)
}

fn parse_bool(v: &str) -> std::result::Result<bool, String> {
    match v.to_ascii_lowercase().as_str() {
        "true" | "yes" | "on" | "1" => Ok(true),
        "false" | "no" | "off" | "0" => Ok(false),
        other => Err(format!("expected a boolean, got `{other}`")),
    }
}

fn apply_arm_key(instance: &mut InstanceSpec, key: &str, value: &str) -> Result<()> {
    let mut parts = key.splitn(3, '.');
    parts.next();
    let idx: usize = parts
        .next()
        .and_then(|s| s.parse().ok())
        .ok_or_else(|| Error::config(format!("expected arm.<index>.<field>, got `{key}`")))?;
    let field = parts
        .next()
        .ok_or_else(|| Error::config(format!("expected arm.<index>.<field>, got `{key}`")))?;
    let o = instance.overrides.entry(idx).or_default();
    let num = || value.parse::<f64>().map_err(|e| Error::config(e.to_string()));
    let int = || value.parse::<u32>().map_err(|e| Error::config(e.to_string()));
    match field {
        "name" => o.name = Some(value.to_string()),
        "mu" => o.mu = Some(num()?),
        "cost" => o.cost = Some(num()?),
        "price" => o.price = Some(num()?),
        "input_min" => o.input_min = Some(int()?),
        "input_max" => o.input_max = Some(int()?),
        "output_mean" => o.output_mean = Some(num()?),
        "scale" => o.scale = Some(num()?),
        other => return Err(Error::config(format!("unknown arm field `{other}`"))),
    }
    Ok(())
}
