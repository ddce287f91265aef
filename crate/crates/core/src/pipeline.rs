//! The two halves of a relax-and-round decision.
//!
//! [`local_relax`] runs next to the estimator and only produces a fractional
//! point. [`cloud_round`] sees nothing but that point and the instance shape.

use rand::seq::SliceRandom;
use rand::Rng;

use crate::error::Result;
use crate::relax::{RelaxedProblem, SolveReport};
use crate::rounding::{dependent_round, swap_round};
use crate::types::{ActionSet, FractionalSelection, ProblemInstance, RewardModelKind};

/// Solves the relaxation at `(mu, c)`.
pub fn local_relax(inst: &ProblemInstance, mu: &[f64], c: &[f64], cg_steps: usize) -> Result<SolveReport> {
    RelaxedProblem {
        mu_bar: mu.to_vec(),
        c_lower: c.to_vec(),
        n: inst.n,
        rho: inst.rho,
        model: inst.model,
    }
    .solve(cg_steps)
}

/// Rounds a fractional point: swap rounding over the `<= n` family for any-win,
/// dependent rounding (which keeps the sum) for the exact-cardinality models.
pub fn cloud_round<R: Rng + ?Sized>(inst: &ProblemInstance, z: &FractionalSelection, rng: &mut R) -> Result<ActionSet> {
    match inst.model {
        RewardModelKind::Awc => swap_round(z, inst.n, rng),
        RewardModelKind::Suc | RewardModelKind::Aic => Ok(dependent_round(z, rng)),
    }
}

/// Random relabelling of the arms, used to break ties among arms whose
/// estimates are identical (in particular, arms never observed).
#[derive(Clone, Debug)]
pub struct Relabel {
    // position -> original arm
    order: Vec<usize>,
}

impl Relabel {
    pub fn identity(k: usize) -> Self {
        Self {
            order: (0..k).collect(),
        }
    }

    pub fn random<R: Rng + ?Sized>(k: usize, rng: &mut R) -> Self {
        let mut order: Vec<usize> = (0..k).collect();
        order.shuffle(rng);
        Self { order }
    }

    pub fn forward(&self, v: &[f64]) -> Vec<f64> {
        self.order.iter().map(|&k| v[k]).collect()
    }

    pub fn backward(&self, v: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; v.len()];
        for (pos, &k) in self.order.iter().enumerate() {
            out[k] = v[pos];
        }
        out
    }
}

/// Relaxation solved in a relabelled frame, mapped back to arm order.
pub fn local_relax_relabelled(
    inst: &ProblemInstance,
    mu: &[f64],
    c: &[f64],
    cg_steps: usize,
    relabel: &Relabel,
) -> Result<SolveReport> {
    let mut report = local_relax(inst, &relabel.forward(mu), &relabel.forward(c), cg_steps)?;
    report.z = FractionalSelection::new(relabel.backward(report.z.values()))?;
    Ok(report)
}
