//! Batch evaluation: many seeded episodes of one policy bundle, aggregated
//! into the summary table format (outcome percentages, return mean and
//! spread, social metrics).

use super::episode::{run_episode, EpisodeOptions, EpisodeResult, PolicyBundle, UncertaintyTotals};
use super::HarnessError;
use crate::sim::{EpisodeStatus, PerturbationSpec, ScenarioSpec};
use serde::{Deserialize, Serialize};

/// Aggregated outcome of an evaluation batch.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EvalReport {
    pub episodes: usize,
    pub goals: usize,
    pub collisions: usize,
    pub timeouts: usize,
    pub mean_return: f64,
    pub std_return: f64,
    pub mean_steps: f64,
    /// Personal-space-violation steps per episode.
    pub mean_proxemic_violations: f64,
    pub mean_min_distance: f64,
    /// Fallback-driven steps per episode (0 without a gate).
    pub mean_fallback_steps: f64,
    /// Pooled uncertainty sums over every step of every episode, when
    /// estimation ran.
    pub uncertainty: Option<UncertaintyTotals>,
    /// The individual episodes, in seed order.
    pub per_episode: Vec<EpisodeResult>,
}

impl EvalReport {
    pub fn goal_pct(&self) -> f64 {
        100.0 * self.goals as f64 / self.episodes as f64
    }

    pub fn collision_pct(&self) -> f64 {
        100.0 * self.collisions as f64 / self.episodes as f64
    }

    pub fn timeout_pct(&self) -> f64 {
        100.0 * self.timeouts as f64 / self.episodes as f64
    }
}

/// Run `episodes` deterministic episodes; episode `i` uses environment seed
/// `seed_base + i`. Identical inputs produce identical reports.
pub fn run_evaluation(
    bundle: &PolicyBundle,
    scenario: &ScenarioSpec,
    perturbation: &PerturbationSpec,
    episodes: usize,
    seed_base: u64,
    opts: &EpisodeOptions,
) -> Result<EvalReport, HarnessError> {
    if episodes == 0 {
        return Err(HarnessError::Config(
            "evaluation needs at least one episode".into(),
        ));
    }
    let mut per_episode = Vec::with_capacity(episodes);
    for i in 0..episodes {
        per_episode.push(run_episode(
            bundle,
            scenario,
            perturbation,
            seed_base.wrapping_add(i as u64),
            opts,
        )?);
    }
    Ok(aggregate(per_episode))
}

fn aggregate(per_episode: Vec<EpisodeResult>) -> EvalReport {
    let n = per_episode.len();
    let nf = n as f64;
    let goals = count(&per_episode, EpisodeStatus::ReachedGoal);
    let collisions = count(&per_episode, EpisodeStatus::Collision);
    let timeouts = count(&per_episode, EpisodeStatus::Timeout);
    let mean_return = per_episode.iter().map(|e| e.discounted_return).sum::<f64>() / nf;
    let var_return = if n >= 2 {
        per_episode
            .iter()
            .map(|e| (e.discounted_return - mean_return).powi(2))
            .sum::<f64>()
            / (nf - 1.0)
    } else {
        0.0
    };
    let mut uncertainty: Option<UncertaintyTotals> = None;
    for e in &per_episode {
        if let Some(t) = &e.uncertainty {
            uncertainty.get_or_insert_with(UncertaintyTotals::default).merge(t);
        }
    }
    EvalReport {
        episodes: n,
        goals,
        collisions,
        timeouts,
        mean_return,
        std_return: var_return.sqrt(),
        mean_steps: per_episode.iter().map(|e| e.steps as f64).sum::<f64>() / nf,
        mean_proxemic_violations: per_episode
            .iter()
            .map(|e| e.proxemic_violations as f64)
            .sum::<f64>()
            / nf,
        mean_min_distance: per_episode
            .iter()
            .map(|e| e.min_human_distance)
            .sum::<f64>()
            / nf,
        mean_fallback_steps: per_episode
            .iter()
            .map(|e| e.fallback_steps as f64)
            .sum::<f64>()
            / nf,
        uncertainty,
        per_episode,
    }
}

fn count(episodes: &[EpisodeResult], status: EpisodeStatus) -> usize {
    episodes.iter().filter(|e| e.status == status).count()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::policy::OdvPolicy;
    use crate::uncertainty::FeatureBounds;

    fn bundle(seed: u64) -> PolicyBundle {
        let spec = ScenarioSpec::position_swap();
        let policy = OdvPolicy::for_navigation(spec.max_observed_humans, seed);
        let bounds = FeatureBounds::new(policy.arch.feature_dim());
        PolicyBundle::Single { policy, bounds }
    }

    #[test]
    fn outcome_counts_partition_the_episodes() {
        let report = run_evaluation(
            &bundle(0),
            &ScenarioSpec::position_swap(),
            &PerturbationSpec::default(),
            6,
            100,
            &EpisodeOptions::default(),
        )
        .unwrap();
        assert_eq!(report.episodes, 6);
        assert_eq!(report.goals + report.collisions + report.timeouts, 6);
        assert_eq!(report.per_episode.len(), 6);
        let pct = report.goal_pct() + report.collision_pct() + report.timeout_pct();
        assert!((pct - 100.0).abs() < 1e-9);
    }

    #[test]
    fn single_episode_percentages_are_all_or_nothing() {
        let report = run_evaluation(
            &bundle(1),
            &ScenarioSpec::position_swap(),
            &PerturbationSpec::default(),
            1,
            7,
            &EpisodeOptions::default(),
        )
        .unwrap();
        for pct in [report.goal_pct(), report.collision_pct(), report.timeout_pct()] {
            assert!(pct == 0.0 || pct == 100.0);
        }
        assert_eq!(report.std_return, 0.0);
    }

    #[test]
    fn identical_inputs_reproduce_identical_aggregates() {
        let spec = ScenarioSpec::position_swap();
        let pert = PerturbationSpec {
            observation_noise_std: 0.3,
            ..PerturbationSpec::default()
        };
        let b = bundle(2);
        let opts = EpisodeOptions::default();
        let a = run_evaluation(&b, &spec, &pert, 4, 55, &opts).unwrap();
        let c = run_evaluation(&b, &spec, &pert, 4, 55, &opts).unwrap();
        assert_eq!(a.mean_return, c.mean_return);
        assert_eq!(a.std_return, c.std_return);
        assert_eq!(a.goals, c.goals);
        assert_eq!(a.mean_min_distance, c.mean_min_distance);
    }

    #[test]
    fn zero_episodes_is_a_config_error() {
        let err = run_evaluation(
            &bundle(3),
            &ScenarioSpec::position_swap(),
            &PerturbationSpec::default(),
            0,
            0,
            &EpisodeOptions::default(),
        )
        .unwrap_err();
        assert!(matches!(err, HarnessError::Config(_)));
    }
}
