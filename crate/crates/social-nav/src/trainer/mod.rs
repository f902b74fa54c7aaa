//! PPO training for the observation-dependent-variance policy: rollout
//! collection, generalized advantage estimation, the clipped-surrogate
//! update with an annealed variance regularizer, Adam, deterministic
//! in-training evaluation with optional early stopping, and sequential
//! deep-ensemble training.

pub mod adam;
pub mod gae;
pub mod ppo;

pub use adam::{clip_grad_norm, Adam};
pub use gae::compute_gae;
pub use ppo::{
    eval_seed_base, evaluate_policy, minibatch_backward, train, variance_mse, CurvePoint,
    EvalPoint, EvalSummary, MinibatchSample, MinibatchStats, TrainConfig, TrainError, TrainReport,
};

use crate::sim::{PerturbationSpec, ScenarioSpec};

/// Result of training one ensemble: every member's full report, in the
/// order the seeds were given.
#[derive(Debug, Clone)]
pub struct EnsembleReport {
    pub members: Vec<TrainReport>,
}

impl EnsembleReport {
    pub fn seeds(&self) -> Vec<u64> {
        self.members.iter().map(|m| m.seed).collect()
    }
}

/// Train one policy per seed, sequentially and independently — different
/// weight initializations and different environment streams, identical
/// hyperparameters. Seeds must be distinct (identical seeds would produce
/// identical members and a degenerate ensemble). A failing member aborts
/// the run and names the offending seed.
pub fn train_ensemble(
    scenario: &ScenarioSpec,
    perturbation: &PerturbationSpec,
    config: &TrainConfig,
    seeds: &[u64],
    mut on_member: impl FnMut(u64, &TrainReport),
) -> Result<EnsembleReport, TrainError> {
    if seeds.len() < 2 {
        return Err(TrainError::EnsembleTooSmall);
    }
    for (i, &s) in seeds.iter().enumerate() {
        if seeds[..i].contains(&s) {
            return Err(TrainError::DuplicateSeed(s));
        }
    }
    let mut members = Vec::with_capacity(seeds.len());
    for &seed in seeds {
        let report = train(scenario, perturbation, config, seed, |_| {}).map_err(|e| {
            TrainError::MemberFailed {
                seed,
                source: Box::new(e),
            }
        })?;
        on_member(seed, &report);
        members.push(report);
    }
    Ok(EnsembleReport { members })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ensemble_rejects_degenerate_seed_lists() {
        let scenario = ScenarioSpec::position_swap();
        let pert = PerturbationSpec::default();
        let config = TrainConfig {
            total_timesteps: 64,
            n_steps: 64,
            batch_size: 64,
            epochs: 1,
            eval_interval: 0,
            ..TrainConfig::default()
        };
        match train_ensemble(&scenario, &pert, &config, &[1], |_, _| {}) {
            Err(TrainError::EnsembleTooSmall) => {}
            other => panic!("expected size error, got {other:?}"),
        }
        match train_ensemble(&scenario, &pert, &config, &[1, 2, 1], |_, _| {}) {
            Err(TrainError::DuplicateSeed(1)) => {}
            other => panic!("expected duplicate error, got {other:?}"),
        }
    }

    #[test]
    fn ensemble_members_differ_and_arrive_in_seed_order() {
        let scenario = ScenarioSpec::position_swap();
        let pert = PerturbationSpec::default();
        let config = TrainConfig {
            total_timesteps: 128,
            n_steps: 64,
            batch_size: 64,
            epochs: 1,
            eval_interval: 0,
            ..TrainConfig::default()
        };
        let mut seen = Vec::new();
        let report = train_ensemble(&scenario, &pert, &config, &[7, 9], |s, _| seen.push(s))
            .unwrap();
        assert_eq!(seen, vec![7, 9]);
        assert_eq!(report.seeds(), vec![7, 9]);
        let a = report.members[0].checkpoint.policy.param_vector();
        let b = report.members[1].checkpoint.policy.param_vector();
        assert_ne!(a, b);
    }
}
