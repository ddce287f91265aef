//! Reward functions of the three collaboration models, their relaxed forms,
//! and the cardinality feasibility rule.

use crate::error::{Error, Result};
use crate::types::{ActionSet, FractionalSelection, ProblemInstance, RewardModelKind};

/// Floor applied to reward estimates before taking logarithms.
pub const LOG_CLAMP: f64 = 1e-9;

/// Expected reward `r(S; mu)` of playing `action` when arm means are `mu`.
pub fn action_reward(model: RewardModelKind, action: &ActionSet, mu: &[f64]) -> Result<f64> {
    if action.bound() > mu.len() {
        return Err(Error::invalid(format!(
            "action {action} indexes past {} arms",
            mu.len()
        )));
    }
    Ok(action_reward_unchecked(model, action.indices(), mu))
}

/// Same as [`action_reward`] without the bounds check. Members must be visited in
/// ascending order so that every evaluation path folds in the same order.
#[inline]
pub(crate) fn action_reward_unchecked<I>(model: RewardModelKind, members: I, mu: &[f64]) -> f64
where
    I: Iterator<Item = usize>,
{
    match model {
        RewardModelKind::Awc => 1.0 - members.fold(1.0, |acc, k| acc * (1.0 - mu[k])),
        RewardModelKind::Suc => members.fold(0.0, |acc, k| acc + mu[k]),
        RewardModelKind::Aic => members.fold(1.0, |acc, k| acc * mu[k]),
    }
}

/// Relaxed reward at a fractional point.
///
/// AWC uses the closed form of the multilinear extension, SUC the linear form and
/// AIC the geometric form `prod mu_k^z_k`.
pub fn relaxed_reward(model: RewardModelKind, z: &FractionalSelection, mu: &[f64]) -> Result<f64> {
    let z = z.values();
    if z.len() != mu.len() {
        return Err(Error::invalid(format!(
            "selection has {} entries but {} means were given",
            z.len(),
            mu.len()
        )));
    }
    let pairs = z.iter().zip(mu);
    Ok(match model {
        RewardModelKind::Awc => 1.0 - pairs.fold(1.0, |acc, (&zk, &mk)| acc * (1.0 - mk * zk)),
        RewardModelKind::Suc => pairs.fold(0.0, |acc, (&zk, &mk)| acc + mk * zk),
        RewardModelKind::Aic => {
            let mut acc = 1.0;
            for (k, (&zk, &mk)) in pairs.enumerate() {
                if zk == 0.0 {
                    continue;
                }
                if mk <= 0.0 {
                    return Err(Error::Domain(format!(
                        "all-in relaxation undefined: arm {k} has mean {mk} with weight {zk}"
                    )));
                }
                acc *= if zk == 1.0 { mk } else { mk.powf(zk) };
            }
            acc
        }
    })
}

/// Whether `action` satisfies the cardinality rule of `inst`.
pub fn is_feasible(action: &ActionSet, inst: &ProblemInstance) -> bool {
    if action.bound() > inst.k {
        return false;
    }
    if inst.model.requires_exact_cardinality() {
        action.len() == inst.n
    } else {
        action.len() <= inst.n
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use RewardModelKind::*;

    fn set(ids: &[usize]) -> ActionSet {
        ActionSet::from_indices(ids.iter().copied())
    }

    #[test]
    fn worked_values() {
        assert!((action_reward(Awc, &set(&[0, 1]), &[0.5, 0.5]).unwrap() - 0.75).abs() < 1e-15);
        assert!((action_reward(Suc, &set(&[0, 1, 2]), &[0.1, 0.2, 0.3]).unwrap() - 0.6).abs() < 1e-15);
        assert!((action_reward(Aic, &set(&[0, 1]), &[1.0, 0.7]).unwrap() - 0.7).abs() < 1e-15);
        assert_eq!(action_reward(Awc, &ActionSet::empty(), &[0.3, 0.9]).unwrap(), 0.0);
    }

    #[test]
    fn out_of_range_member_is_rejected() {
        let err = action_reward(Suc, &set(&[0, 3]), &[0.1, 0.2]).unwrap_err();
        assert!(matches!(err, Error::InvalidArgument(_)));
    }

    #[test]
    fn relaxed_worked_values() {
        let z = FractionalSelection::new(vec![0.5, 0.5]).unwrap();
        assert!((relaxed_reward(Suc, &z, &[0.4, 0.8]).unwrap() - 0.6).abs() < 1e-15);

        // 0.81 * sqrt(0.25); the second factor is also checked through exp/ln.
        let z = FractionalSelection::new(vec![1.0, 0.5]).unwrap();
        let got = relaxed_reward(Aic, &z, &[0.81, 0.25]).unwrap();
        let via_logs = (0.81f64.ln() + 0.5 * 0.25f64.ln()).exp();
        assert!((got - 0.405).abs() < 1e-15);
        assert!((via_logs - 0.405).abs() < 1e-14);
    }

    #[test]
    fn aic_zero_mean_with_weight_is_domain_error() {
        let z = FractionalSelection::new(vec![0.5, 0.5]).unwrap();
        assert!(matches!(relaxed_reward(Aic, &z, &[0.0, 0.4]), Err(Error::Domain(_))));
        let z = FractionalSelection::new(vec![0.0, 1.0]).unwrap();
        assert!((relaxed_reward(Aic, &z, &[0.0, 0.4]).unwrap() - 0.4).abs() < 1e-15);
    }

    #[test]
    fn feasibility_rules() {
        let awc = ProblemInstance::new(6, 4, 1.0, Awc).unwrap();
        let suc = ProblemInstance::new(6, 4, 1.0, Suc).unwrap();
        let aic = ProblemInstance::new(6, 4, 1.0, Aic).unwrap();
        assert!(is_feasible(&set(&[0, 1, 2]), &awc));
        assert!(!is_feasible(&set(&[0, 1, 2]), &suc));
        assert!(is_feasible(&set(&[0, 1, 2, 3]), &aic));
        assert!(!is_feasible(&set(&[0, 1, 2, 3, 4]), &awc));
        assert!(!is_feasible(&set(&[0, 1, 2, 9]), &aic));
    }

    fn model() -> impl Strategy<Value = RewardModelKind> {
        prop_oneof![Just(Awc), Just(Suc), Just(Aic)]
    }

    proptest! {
        #[test]
        fn integral_points_agree(
            model in model(),
            mu in prop::collection::vec(0.001f64..=1.0, 1..=10),
            mask in any::<u16>(),
        ) {
            let k = mu.len();
            let action = ActionSet::from_indices((0..k).filter(|i| mask >> i & 1 == 1));
            let z = FractionalSelection::from_action(&action, k);
            let exact = action_reward(model, &action, &mu).unwrap();
            let relaxed = relaxed_reward(model, &z, &mu).unwrap();
            prop_assert!((exact - relaxed).abs() <= 1e-12);
        }

        #[test]
        fn monotone_in_member_means(
            model in model(),
            mu in prop::collection::vec(0.0f64..=1.0, 2..=8),
            mask in any::<u8>(),
            pick in any::<prop::sample::Index>(),
            bump in 0.0f64..=1.0,
        ) {
            let k = mu.len();
            let action = ActionSet::from_indices((0..k).filter(|i| mask >> i & 1 == 1));
            prop_assume!(!action.is_empty());
            let target = action.members()[pick.index(action.len())].index();
            let mut raised = mu.clone();
            raised[target] = mu[target] + bump * (1.0 - mu[target]);
            let before = action_reward(model, &action, &mu).unwrap();
            let after = action_reward(model, &action, &raised).unwrap();
            prop_assert!(after >= before - 1e-15);
        }

        #[test]
        fn any_win_has_diminishing_returns(
            mu in prop::collection::vec(0.0f64..=1.0, 3..=8),
            small in any::<u8>(),
            extra in any::<u8>(),
            pick in any::<prop::sample::Index>(),
        ) {
            let k = mu.len();
            let inner: Vec<usize> = (0..k).filter(|i| small >> i & 1 == 1).collect();
            let outer: Vec<usize> = (0..k).filter(|i| (small | extra) >> i & 1 == 1).collect();
            let outside: Vec<usize> = (0..k).filter(|i| !outer.contains(i)).collect();
            prop_assume!(!outside.is_empty());
            let add = outside[pick.index(outside.len())];
            let gain = |base: &[usize]| {
                let with: Vec<usize> = base.iter().copied().chain([add]).collect();
                action_reward(Awc, &ActionSet::from_indices(with), &mu).unwrap()
                    - action_reward(Awc, &ActionSet::from_indices(base.iter().copied()), &mu).unwrap()
            };
            prop_assert!(gain(&inner) >= gain(&outer) - 1e-12);
        }
    }
}
