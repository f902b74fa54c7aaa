//! Gated-versus-ungated comparison: matched-seed episode pairs with and
//! without the safety selector, and the prevented-collision accounting.
//!
//! Discipline: within a pair both arms consume the identical environment
//! seed, so the two runs differ only in whether the gate may swap actions.
//! Negative prevention (the gate causing collisions) is reported as the
//! negative percentage it is, never clipped.

use super::episode::{EpisodeOptions, GateConfig, PolicyBundle};
use super::eval::{run_evaluation, EvalReport};
use super::HarnessError;
use crate::sim::{PerturbationSpec, ScenarioSpec};
use serde::{Deserialize, Serialize};

/// One arm (gated or ungated) of one seed group.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct ArmSummary {
    pub episodes: usize,
    pub goals: usize,
    pub collisions: usize,
    pub timeouts: usize,
    pub mean_return: f64,
    pub mean_proxemic_violations: f64,
    pub mean_fallback_steps: f64,
}

impl From<&EvalReport> for ArmSummary {
    fn from(r: &EvalReport) -> Self {
        ArmSummary {
            episodes: r.episodes,
            goals: r.goals,
            collisions: r.collisions,
            timeouts: r.timeouts,
            mean_return: r.mean_return,
            mean_proxemic_violations: r.mean_proxemic_violations,
            mean_fallback_steps: r.mean_fallback_steps,
        }
    }
}

/// Both arms of one policy's matched comparison.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct GroupComparison {
    /// Index of the policy bundle this group evaluated.
    pub group: usize,
    /// First environment seed of the group's episode stream.
    pub seed_base: u64,
    pub ungated: ArmSummary,
    pub gated: ArmSummary,
    /// `100 * (off - on) / off`; None when the ungated arm had no
    /// collisions (nothing to prevent).
    pub prevented_pct: Option<f64>,
}

/// The full comparison across seed groups.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SafeEvalReport {
    pub groups: Vec<GroupComparison>,
    pub total_ungated_collisions: usize,
    pub total_gated_collisions: usize,
    /// Prevention computed on the pooled totals; None when no ungated
    /// collisions occurred anywhere.
    pub overall_prevented_pct: Option<f64>,
    /// Mean over groups with a defined prevention percentage.
    pub mean_prevented_pct: Option<f64>,
    /// Sample standard deviation over those groups (needs at least two).
    pub std_prevented_pct: Option<f64>,
}

fn prevented_pct(off: usize, on: usize) -> Option<f64> {
    if off == 0 {
        return None;
    }
    Some(100.0 * (off as f64 - on as f64) / off as f64)
}

/// Run matched-seed comparisons for every bundle. Group `g` runs episodes
/// with seeds `seed_base + g*episodes + i`; each seed runs once per arm.
pub fn safe_action_comparison(
    bundles: &[PolicyBundle],
    scenario: &ScenarioSpec,
    perturbation: &PerturbationSpec,
    episodes: usize,
    gate: GateConfig,
    seed_base: u64,
    opts: &EpisodeOptions,
) -> Result<SafeEvalReport, HarnessError> {
    if bundles.is_empty() {
        return Err(HarnessError::Config(
            "safe-action comparison needs at least one policy".into(),
        ));
    }
    let ungated_opts = EpisodeOptions {
        gate: None,
        estimate: false,
        ..*opts
    };
    let gated_opts = EpisodeOptions {
        gate: Some(gate),
        ..*opts
    };
    let mut groups = Vec::with_capacity(bundles.len());
    for (group, bundle) in bundles.iter().enumerate() {
        let group_seed = seed_base.wrapping_add((group * episodes) as u64);
        let off = run_evaluation(bundle, scenario, perturbation, episodes, group_seed, &ungated_opts)?;
        let on = run_evaluation(bundle, scenario, perturbation, episodes, group_seed, &gated_opts)?;
        groups.push(GroupComparison {
            group,
            seed_base: group_seed,
            ungated: ArmSummary::from(&off),
            gated: ArmSummary::from(&on),
            prevented_pct: prevented_pct(off.collisions, on.collisions),
        });
    }

    let total_off: usize = groups.iter().map(|g| g.ungated.collisions).sum();
    let total_on: usize = groups.iter().map(|g| g.gated.collisions).sum();
    let defined: Vec<f64> = groups.iter().filter_map(|g| g.prevented_pct).collect();
    let mean_prevented_pct = if defined.is_empty() {
        None
    } else {
        Some(defined.iter().sum::<f64>() / defined.len() as f64)
    };
    let std_prevented_pct = match (mean_prevented_pct, defined.len()) {
        (Some(mean), n) if n >= 2 => Some(
            (defined.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n as f64 - 1.0)).sqrt(),
        ),
        _ => None,
    };
    Ok(SafeEvalReport {
        groups,
        total_ungated_collisions: total_off,
        total_gated_collisions: total_on,
        overall_prevented_pct: prevented_pct(total_off, total_on),
        mean_prevented_pct,
        std_prevented_pct,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::policy::OdvPolicy;
    use crate::safety::{ApproachReading, PocThresholds};
    use crate::uncertainty::FeatureBounds;

    fn bundle(seed: u64) -> PolicyBundle {
        let spec = ScenarioSpec::position_swap();
        let policy = OdvPolicy::for_navigation(spec.max_observed_humans, seed);
        let mut bounds = FeatureBounds::new(policy.arch.feature_dim());
        bounds.update(&vec![-1.0; policy.arch.feature_dim()]);
        bounds.update(&vec![1.0; policy.arch.feature_dim()]);
        PolicyBundle::Single { policy, bounds }
    }

    fn closed_gate() -> GateConfig {
        // Thresholds nothing can clear: the gate never fires, making the
        // arms identical.
        GateConfig {
            thresholds: PocThresholds {
                epistemic: f64::INFINITY,
                feature: f64::INFINITY,
                proximity: 0.0,
                velocity_weight: 0.5,
                window: 4,
            },
            approach: ApproachReading::ClosingIn,
        }
    }

    #[test]
    fn disabled_gate_means_zero_prevention() {
        let bundles = [bundle(0)];
        let report = safe_action_comparison(
            &bundles,
            &ScenarioSpec::position_swap(),
            &PerturbationSpec {
                observation_noise_std: 1.0,
                ..PerturbationSpec::default()
            },
            4,
            closed_gate(),
            900,
            &EpisodeOptions {
                probes: 3,
                ..EpisodeOptions::default()
            },
        )
        .unwrap();
        let g = &report.groups[0];
        assert_eq!(g.ungated.collisions, g.gated.collisions);
        assert_eq!(g.ungated.goals, g.gated.goals);
        assert_eq!(g.gated.mean_fallback_steps, 0.0);
        match g.prevented_pct {
            // An untrained noisy policy usually collides; a never-firing
            // gate then prevents exactly nothing.
            Some(p) => assert_eq!(p, 0.0),
            // With no ungated collisions the ratio is undefined.
            None => assert_eq!(g.ungated.collisions, 0),
        }
    }

    #[test]
    fn groups_use_disjoint_seed_blocks_and_aggregate() {
        let bundles = [bundle(1), bundle(2)];
        let report = safe_action_comparison(
            &bundles,
            &ScenarioSpec::position_swap(),
            &PerturbationSpec::default(),
            3,
            closed_gate(),
            50,
            &EpisodeOptions {
                probes: 2,
                ..EpisodeOptions::default()
            },
        )
        .unwrap();
        assert_eq!(report.groups.len(), 2);
        assert_eq!(report.groups[0].seed_base, 50);
        assert_eq!(report.groups[1].seed_base, 53);
        assert_eq!(
            report.total_ungated_collisions,
            report.groups.iter().map(|g| g.ungated.collisions).sum::<usize>()
        );
    }

    #[test]
    fn prevention_percentages_follow_the_ratio_rule() {
        assert_eq!(prevented_pct(0, 0), None);
        assert_eq!(prevented_pct(10, 5), Some(50.0));
        assert_eq!(prevented_pct(10, 0), Some(100.0));
        // The gate made things worse: negative, not clipped.
        assert_eq!(prevented_pct(4, 6), Some(-50.0));
    }

    #[test]
    fn empty_bundle_list_is_rejected() {
        let err = safe_action_comparison(
            &[],
            &ScenarioSpec::position_swap(),
            &PerturbationSpec::default(),
            1,
            closed_gate(),
            0,
            &EpisodeOptions::default(),
        )
        .unwrap_err();
        assert!(matches!(err, HarnessError::Config(_)));
    }
}
