//! Domain types shared by every stage of the pipeline.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Tolerance on box constraints of a fractional selection.
pub const BOX_TOL: f64 = 1e-12;
/// Tolerance on the cardinality row of a fractional selection.
pub const SUM_TOL: f64 = 1e-9;

/// Zero-based index of a base arm (one LLM).
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ArmId(pub usize);

impl ArmId {
    #[inline]
    pub fn index(self) -> usize {
        self.0
    }
}

impl fmt::Display for ArmId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// How the arms of an action collaborate to produce a reward.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum RewardModelKind {
    /// Any win combination: the action succeeds if any member succeeds.
    Awc,
    /// Sum up combination: members work in parallel, rewards add.
    Suc,
    /// All in combination: the action succeeds only if every member does.
    Aic,
}

impl RewardModelKind {
    /// Approximation ratio of the offline oracle paired with this model.
    pub fn approximation_ratio(self) -> f64 {
        match self {
            RewardModelKind::Awc => 1.0 - (-1.0f64).exp(),
            RewardModelKind::Suc | RewardModelKind::Aic => 1.0,
        }
    }

    /// Whether feasible actions must have exactly `N` members.
    pub fn requires_exact_cardinality(self) -> bool {
        !matches!(self, RewardModelKind::Awc)
    }

    pub fn as_str(self) -> &'static str {
        match self {
            RewardModelKind::Awc => "awc",
            RewardModelKind::Suc => "suc",
            RewardModelKind::Aic => "aic",
        }
    }
}

impl fmt::Display for RewardModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for RewardModelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "awc" => Ok(RewardModelKind::Awc),
            "suc" => Ok(RewardModelKind::Suc),
            "aic" => Ok(RewardModelKind::Aic),
            other => Err(Error::config(format!("unknown reward model `{other}`"))),
        }
    }
}

/// A set of arms played together in one round. Members are kept sorted and unique.
#[derive(Clone, Debug, Default, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ActionSet {
    members: Vec<ArmId>,
}

impl ActionSet {
    pub fn empty() -> Self {
        Self::default()
    }

    /// Builds a set from arbitrary indices; duplicates collapse.
    pub fn from_indices<I: IntoIterator<Item = usize>>(indices: I) -> Self {
        let mut members: Vec<ArmId> = indices.into_iter().map(ArmId).collect();
        members.sort_unstable();
        members.dedup();
        Self { members }
    }

    /// Support of a 0/1 indicator vector.
    pub fn from_indicator(values: &[f64]) -> Self {
        Self::from_indices(values.iter().enumerate().filter(|(_, &v)| v >= 0.5).map(|(k, _)| k))
    }

    pub fn members(&self) -> &[ArmId] {
        &self.members
    }

    pub fn indices(&self) -> impl Iterator<Item = usize> + '_ {
        self.members.iter().map(|a| a.0)
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn contains(&self, arm: usize) -> bool {
        self.members.binary_search(&ArmId(arm)).is_ok()
    }

    /// Largest member index plus one, or zero when empty.
    pub fn bound(&self) -> usize {
        self.members.last().map_or(0, |a| a.0 + 1)
    }

    pub fn indicator(&self, k: usize) -> Vec<f64> {
        let mut z = vec![0.0; k];
        for i in self.indices() {
            z[i] = 1.0;
        }
        z
    }

    /// `+`-joined ids, the CSV representation.
    pub fn joined(&self) -> String {
        join_ids(self.indices())
    }
}

pub(crate) fn join_ids<I: Iterator<Item = usize>>(ids: I) -> String {
    let parts: Vec<String> = ids.map(|i| i.to_string()).collect();
    parts.join("+")
}

impl fmt::Display for ActionSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{{{}}}", self.joined())
    }
}

/// Relaxed selection vector with every entry in `[0, 1]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct FractionalSelection {
    values: Vec<f64>,
}

impl FractionalSelection {
    /// Validates the box constraint and clamps entries that sit within tolerance of it.
    pub fn new(values: Vec<f64>) -> Result<Self> {
        let mut values = values;
        for (k, v) in values.iter_mut().enumerate() {
            if !v.is_finite() || *v < -BOX_TOL || *v > 1.0 + BOX_TOL {
                return Err(Error::invalid(format!(
                    "fractional selection entry {k} = {v} outside [0, 1]"
                )));
            }
            *v = v.clamp(0.0, 1.0);
        }
        Ok(Self { values })
    }

    pub fn from_action(action: &ActionSet, k: usize) -> Self {
        Self {
            values: action.indicator(k),
        }
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn sum(&self) -> f64 {
        self.values.iter().sum()
    }

    /// Checks the cardinality row for the given model.
    pub fn satisfies_cardinality(&self, model: RewardModelKind, n: usize) -> bool {
        let s = self.sum();
        if model.requires_exact_cardinality() {
            (s - n as f64).abs() <= SUM_TOL
        } else {
            s <= n as f64 + SUM_TOL
        }
    }
}

/// Static task definition.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProblemInstance {
    pub k: usize,
    pub n: usize,
    pub rho: f64,
    pub model: RewardModelKind,
    pub alpha: f64,
}

impl ProblemInstance {
    pub fn new(k: usize, n: usize, rho: f64, model: RewardModelKind) -> Result<Self> {
        if n == 0 || n > k {
            return Err(Error::invalid(format!(
                "cardinality cap must satisfy 1 <= n <= k (n = {n}, k = {k})"
            )));
        }
        if !(rho > 0.0) || !rho.is_finite() {
            return Err(Error::invalid(format!("budget must be positive, got {rho}")));
        }
        Ok(Self {
            k,
            n,
            rho,
            model,
            alpha: model.approximation_ratio(),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn action_set_sorts_and_dedups() {
        let s = ActionSet::from_indices([3, 1, 3, 0]);
        assert_eq!(s.joined(), "0+1+3");
        assert!(s.contains(1));
        assert!(!s.contains(2));
        assert_eq!(s.bound(), 4);
    }

    #[test]
    fn alpha_per_model() {
        let awc = ProblemInstance::new(4, 2, 1.0, RewardModelKind::Awc).unwrap();
        assert!((awc.alpha - 0.632_120_558_828_557_7).abs() < 1e-15);
        let suc = ProblemInstance::new(4, 2, 1.0, RewardModelKind::Suc).unwrap();
        assert_eq!(suc.alpha, 1.0);
    }

    #[test]
    fn instance_rejects_bad_caps() {
        assert!(ProblemInstance::new(3, 0, 1.0, RewardModelKind::Suc).is_err());
        assert!(ProblemInstance::new(3, 4, 1.0, RewardModelKind::Suc).is_err());
        assert!(ProblemInstance::new(3, 2, 0.0, RewardModelKind::Suc).is_err());
    }

    #[test]
    fn fractional_selection_box() {
        assert!(FractionalSelection::new(vec![0.5, 1.0 + 1e-13]).is_ok());
        assert!(FractionalSelection::new(vec![1.1]).is_err());
        assert!(FractionalSelection::new(vec![f64::NAN]).is_err());
        let z = FractionalSelection::new(vec![0.5, 0.5, 1.0]).unwrap();
        assert!(z.satisfies_cardinality(RewardModelKind::Suc, 2));
        assert!(z.satisfies_cardinality(RewardModelKind::Awc, 3));
        assert!(!z.satisfies_cardinality(RewardModelKind::Awc, 1));
    }
}
