//! Randomized rounding of relaxed selections, run on the scheduling cloud.
//!
//! Both rounders preserve marginals: `E[1{k in S}] = z_k`. Swap rounding works
//! over the uniform matroid polytope `{0 <= z <= 1, sum z <= N}` and is used for
//! the any-win model; pairwise dependent rounding additionally preserves the
//! coordinate sum and is used when actions must have exactly `N` members.
//!
//! Nothing in this module sees rewards or costs.

use rand::Rng;

use crate::error::{Error, Result};
use crate::types::{ActionSet, FractionalSelection};

/// Entries this close to 0 or 1 are snapped to the bound before rounding.
pub const SNAP_TOL: f64 = 1e-9;

/// Convex decomposition `z = sum_l weights[l] * 1{sets[l]}`.
#[derive(Clone, Debug, PartialEq)]
pub struct Decomposition {
    pub weights: Vec<f64>,
    pub sets: Vec<ActionSet>,
}

impl Decomposition {
    /// Recomputes `sum_l weights[l] * 1{sets[l]}` over `k` arms.
    pub fn reconstruct(&self, k: usize) -> Vec<f64> {
        let mut z = vec![0.0; k];
        for (w, set) in self.weights.iter().zip(&self.sets) {
            for i in set.indices() {
                z[i] += w;
            }
        }
        z
    }
}

fn snap(values: &[f64]) -> Vec<f64> {
    values
        .iter()
        .map(|&v| {
            if v <= SNAP_TOL {
                0.0
            } else if v >= 1.0 - SNAP_TOL {
                1.0
            } else {
                v
            }
        })
        .collect()
}

/// Splits `z` into at most `K + 1` independent sets of the uniform matroid.
///
/// The entries are laid end to end on `[0, sum z)`; for an offset `u` in
/// `[0, 1)` the set is every arm whose segment contains one of `u, u + 1, ...`.
/// Each segment has length at most one, so an arm is hit with probability
/// exactly `z_k`, and a set never holds more than `ceil(sum z)` arms. The set
/// only changes where `u` crosses the fractional part of a cumulative sum.
pub fn decompose(z: &FractionalSelection, n: usize) -> Result<Decomposition> {
    let z = snap(z.values());
    let total: f64 = z.iter().sum();
    if total > n as f64 + SNAP_TOL {
        return Err(Error::invalid(format!(
            "selection sums to {total}, above the cardinality cap {n}"
        )));
    }
    let mut cumulative = Vec::with_capacity(z.len() + 1);
    cumulative.push(0.0);
    let mut acc = 0.0;
    for &v in &z {
        acc += v;
        cumulative.push(acc);
    }

    let mut cuts: Vec<f64> = cumulative.iter().map(|c| c - c.floor()).collect();
    cuts.push(0.0);
    cuts.sort_unstable_by(f64::total_cmp);
    cuts.dedup();
    cuts.push(1.0);

    let mut out = Decomposition {
        weights: Vec::with_capacity(cuts.len()),
        sets: Vec::with_capacity(cuts.len()),
    };
    for pair in cuts.windows(2) {
        let weight = pair[1] - pair[0];
        if weight <= 0.0 {
            continue;
        }
        let offset = 0.5 * (pair[0] + pair[1]);
        let mut members = Vec::new();
        let mut point = offset;
        while point < acc && members.len() < n {
            // Segment of arm k is [cumulative[k], cumulative[k + 1]).
            let k = cumulative.partition_point(|&c| c <= point) - 1;
            members.push(k.min(z.len() - 1));
            point += 1.0;
        }
        out.weights.push(weight);
        out.sets.push(ActionSet::from_indices(members));
    }
    Ok(out)
}

/// Swap rounding over the uniform matroid with cap `n`.
///
/// Sets of the decomposition are merged left to right. Before each merge the
/// smaller set is padded with the lowest-index elements of the difference; the
/// merge then repeatedly resolves the lowest-index disagreement `(i, j)` in
/// favour of one side with probability proportional to its accumulated weight,
/// and finally drops the padding with the probability of the padded side.
pub fn swap_round<R: Rng + ?Sized>(z: &FractionalSelection, n: usize, rng: &mut R) -> Result<ActionSet> {
    let k = z.len();
    let dec = decompose(z, n)?;
    let mut parts = dec.weights.iter().copied().zip(dec.sets.iter());
    let Some((first_weight, first_set)) = parts.next() else {
        return Ok(ActionSet::empty());
    };
    let mut acc_weight = first_weight;
    let mut acc = membership(first_set, k);

    for (weight, set) in parts {
        let next = membership(set, k);
        let (mut b1, mut b2, p1, p2) = if count(&acc) < count(&next) {
            (next, acc, weight, acc_weight)
        } else {
            (acc, next, acc_weight, weight)
        };
        let keep_second = p2 / (p1 + p2);

        let deficit = count(&b1) - count(&b2);
        let padding: Vec<usize> = (0..k).filter(|&i| b1[i] && !b2[i]).take(deficit).collect();
        for &g in &padding {
            b2[g] = true;
        }

        loop {
            let i = (0..k).find(|&i| b1[i] && !b2[i]);
            let j = (0..k).find(|&j| b2[j] && !b1[j]);
            let (Some(i), Some(j)) = (i, j) else { break };
            if rng.random::<f64>() < keep_second {
                b1[i] = false;
                b1[j] = true;
            } else {
                b2[j] = false;
                b2[i] = true;
            }
        }
        if !padding.is_empty() && rng.random::<f64>() < keep_second {
            for &g in &padding {
                b1[g] = false;
            }
        }
        acc = b1;
        acc_weight += weight;
    }
    Ok(ActionSet::from_indices((0..k).filter(|&i| acc[i])))
}

fn membership(set: &ActionSet, k: usize) -> Vec<bool> {
    let mut m = vec![false; k];
    for i in set.indices() {
        m[i] = true;
    }
    m
}

fn count(m: &[bool]) -> usize {
    m.iter().filter(|b| **b).count()
}

/// Pairwise dependent rounding. Preserves every marginal and the coordinate
/// sum; when the sum is an integer the result has exactly that many members.
pub fn dependent_round<R: Rng + ?Sized>(z: &FractionalSelection, rng: &mut R) -> ActionSet {
    dependent_round_counted(z, rng).0
}

/// [`dependent_round`] that also reports the number of pair updates performed.
pub fn dependent_round_counted<R: Rng + ?Sized>(z: &FractionalSelection, rng: &mut R) -> (ActionSet, usize) {
    let mut z = snap(z.values());
    let is_frac = |v: f64| v > 0.0 && v < 1.0;
    let mut pending: Vec<usize> = (0..z.len()).filter(|&i| is_frac(z[i])).collect();
    let mut updates = 0;
    while pending.len() >= 2 {
        let (a, b) = (pending[0], pending[1]);
        let up = (1.0 - z[a]).min(z[b]);
        let down = z[a].min(1.0 - z[b]);
        if rng.random::<f64>() < down / (up + down) {
            // z_a rises by `up`, z_b falls by `up`; whichever limit was binding lands exactly.
            if up == 1.0 - z[a] {
                z[b] -= up;
                z[a] = 1.0;
            } else {
                z[a] += up;
                z[b] = 0.0;
            }
        } else if down == z[a] {
            z[b] += down;
            z[a] = 0.0;
        } else {
            z[a] -= down;
            z[b] = 1.0;
        }
        for idx in [a, b] {
            if z[idx] <= SNAP_TOL {
                z[idx] = 0.0;
            } else if z[idx] >= 1.0 - SNAP_TOL {
                z[idx] = 1.0;
            }
        }
        pending.retain(|&i| is_frac(z[i]));
        updates += 1;
    }
    // A lone fractional entry only remains when the sum is not an integer.
    if let Some(&last) = pending.first() {
        z[last] = if rng.random::<f64>() < z[last] { 1.0 } else { 0.0 };
    }
    let set = ActionSet::from_indices((0..z.len()).filter(|&i| z[i] == 1.0));
    (set, updates)
}
