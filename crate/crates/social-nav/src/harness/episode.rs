//! One evaluation episode end to end: deterministic control, optional
//! per-step uncertainty estimation, optional safety gating, and a full
//! step-by-step record.
//!
//! The control stream always uses mean actions with dropout off. Dropout
//! probes are side observations at the pre-step state; ensemble members run
//! one mask-free pass each per step (member 0's pass doubles as control).
//! The safety gate reads windowed uncertainty together with the simulator's
//! true geometry, and swaps in the cautious avoidance action when it fires.

use super::probe::{mc_dropout_samples, EnsemblePolicies};
use super::HarnessError;
use crate::policy::{DropoutMode, LstmState, OdvPolicy};
use crate::safety::{
    fallback_action, nearest_approach, poc, ApproachReading, GateInputs, PocThresholds,
};
use crate::sim::{
    ActionCommand, CrowdSim, EpisodeStatus, PerturbationSpec, SafetyRecord, ScenarioSpec,
    StepRecord, UncertaintyRecord,
};
use crate::uncertainty::{
    estimate, feature_uncertainty_dropout, feature_uncertainty_ensemble, windowed_mean,
    FeatureBounds, UncertaintyEstimate,
};
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use serde::{Deserialize, Serialize};

/// Decorrelates probe mask streams from everything seeded off the episode.
pub const PROBE_RNG_SALT: u64 = 0x0B5E_55ED_0000_0005;

/// The policy (or policies) an evaluation run drives.
#[derive(Debug, Clone)]
pub enum PolicyBundle {
    /// One policy; uncertainty (when requested) comes from MC-dropout
    /// probes, normalized with the training-time feature bounds.
    Single {
        policy: OdvPolicy,
        bounds: FeatureBounds,
    },
    /// Independently trained members; member 0 drives the robot.
    Ensemble(EnsemblePolicies),
}

impl PolicyBundle {
    /// The policy whose mean action controls the robot.
    pub fn control_policy(&self) -> &OdvPolicy {
        match self {
            PolicyBundle::Single { policy, .. } => policy,
            PolicyBundle::Ensemble(e) => e.primary(),
        }
    }

    /// Short label for file names and report rows.
    pub fn source_label(&self) -> &'static str {
        match self {
            PolicyBundle::Single { .. } => "dropout",
            PolicyBundle::Ensemble(_) => "ensemble",
        }
    }
}

/// Safety-gate configuration for gated runs.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct GateConfig {
    pub thresholds: PocThresholds,
    pub approach: ApproachReading,
}

/// What to do besides plain control during an episode.
#[derive(Debug, Clone, Copy)]
pub struct EpisodeOptions {
    /// Discount for the reported return.
    pub gamma: f64,
    /// Dropout probes per step (ignored for ensembles, which use one pass
    /// per member).
    pub probes: usize,
    /// Estimate uncertainty each step. Forced on when `gate` is set.
    pub estimate: bool,
    /// Smoothing window for the windowed trace values (a configured gate's
    /// own window takes precedence).
    pub window: usize,
    pub gate: Option<GateConfig>,
    /// Keep per-step records (costs memory; aggregates are always kept).
    pub record: bool,
}

impl Default for EpisodeOptions {
    fn default() -> Self {
        EpisodeOptions {
            gamma: 0.99,
            probes: 20,
            estimate: false,
            window: 4,
            gate: None,
            record: false,
        }
    }
}

/// Sums of the per-step uncertainty estimates over an episode, kept as sums
/// so that callers can pool steps across episodes before dividing.
#[derive(Debug, Clone, Copy, Default, Serialize, Deserialize)]
pub struct UncertaintyTotals {
    /// Steps that contributed estimates.
    pub steps: usize,
    /// Summed epistemic term, `[speed, heading]`.
    pub epistemic: [f64; 2],
    /// Summed aleatoric term, `[speed, heading]`.
    pub aleatoric: [f64; 2],
    /// Summed scalar feature uncertainty.
    pub feature: f64,
}

impl UncertaintyTotals {
    pub fn absorb(&mut self, est: &UncertaintyEstimate, feature: f64) {
        self.steps += 1;
        for d in 0..2 {
            self.epistemic[d] += est.epistemic[d];
            self.aleatoric[d] += est.aleatoric[d];
        }
        self.feature += feature;
    }

    pub fn merge(&mut self, other: &UncertaintyTotals) {
        self.steps += other.steps;
        for d in 0..2 {
            self.epistemic[d] += other.epistemic[d];
            self.aleatoric[d] += other.aleatoric[d];
        }
        self.feature += other.feature;
    }
}

/// Everything one episode produced.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EpisodeResult {
    pub seed: u64,
    pub status: EpisodeStatus,
    pub steps: usize,
    pub discounted_return: f64,
    pub undiscounted_return: f64,
    /// Steps spent inside some human's personal space.
    pub proxemic_violations: usize,
    /// Smallest robot-human surface distance seen (decision points and
    /// post-step states both count).
    pub min_human_distance: f64,
    /// Steps the fallback controller drove (0 without a gate).
    pub fallback_steps: usize,
    pub uncertainty: Option<UncertaintyTotals>,
    /// Per-step records; empty unless requested.
    pub records: Vec<StepRecord>,
}

/// Run one seeded episode of `bundle` under `opts`.
pub fn run_episode(
    bundle: &PolicyBundle,
    scenario: &ScenarioSpec,
    perturbation: &PerturbationSpec,
    seed: u64,
    opts: &EpisodeOptions,
) -> Result<EpisodeResult, HarnessError> {
    let mut env = CrowdSim::new(scenario.clone(), perturbation.clone(), seed)?;
    let control = bundle.control_policy();
    if control.arch.obs_dim != env.observation_dim() {
        return Err(HarnessError::ObservationDimMismatch {
            policy: control.arch.obs_dim,
            environment: env.observation_dim(),
        });
    }

    let estimating = opts.estimate || opts.gate.is_some();
    let window = opts.gate.map_or(opts.window, |g| g.thresholds.window);
    let mut obs = env.initial_observation().values.clone();
    let mut control_state = LstmState::zeros(&control.arch);
    let mut member_states = match bundle {
        PolicyBundle::Ensemble(e) if estimating => e.fresh_states(),
        _ => Vec::new(),
    };
    let mut probe_rng = ChaCha12Rng::seed_from_u64(seed ^ PROBE_RNG_SALT);
    let mut dummy_rng = ChaCha12Rng::seed_from_u64(0);

    let mut heading_epistemic_history: Vec<f64> = Vec::new();
    let mut feature_history: Vec<f64> = Vec::new();
    let mut prev_distance: Option<f64> = None;

    let mut result = EpisodeResult {
        seed,
        status: EpisodeStatus::Running,
        steps: 0,
        discounted_return: 0.0,
        undiscounted_return: 0.0,
        proxemic_violations: 0,
        min_human_distance: f64::INFINITY,
        fallback_steps: 0,
        uncertainty: estimating.then(UncertaintyTotals::default),
        records: Vec::new(),
    };
    let mut discount = 1.0;

    loop {
        // Uncertainty estimation at the pre-step state. For an ensemble the
        // member passes double as control: member 0's mean is kept so the
        // robot is driven without forwarding it twice.
        let mut ensemble_control: Option<[f64; 2]> = None;
        let estimate_now = if estimating {
            let (est, feature_u) = match bundle {
                PolicyBundle::Single { policy, bounds } => {
                    let samples =
                        mc_dropout_samples(policy, &obs, &control_state, opts.probes, &mut probe_rng)?;
                    let est = estimate(&samples)?;
                    let u = feature_uncertainty_dropout(&est.feature_variance, bounds)?;
                    (est, u)
                }
                PolicyBundle::Ensemble(e) => {
                    let samples = e.sample(&obs, &mut member_states, &mut dummy_rng);
                    ensemble_control = Some(samples[0].action_mean);
                    let est = estimate(&samples)?;
                    let u = feature_uncertainty_ensemble(&est.feature_variance)?;
                    (est, u)
                }
            };
            if let Some(totals) = result.uncertainty.as_mut() {
                totals.absorb(&est, feature_u);
            }
            heading_epistemic_history.push(est.epistemic[1]);
            feature_history.push(feature_u);
            Some((est, feature_u))
        } else {
            None
        };

        let mut action = match ensemble_control {
            Some(mean) => ActionCommand {
                speed: mean[0],
                delta_heading: mean[1],
            },
            None => {
                let out = control.forward(&obs, &control_state, DropoutMode::Off, &mut dummy_rng);
                control_state = out.next_state;
                ActionCommand {
                    speed: out.action_mean[0],
                    delta_heading: out.action_mean[1],
                }
            }
        };

        // Safety gate over windowed uncertainty and true geometry.
        let (distance_now, relative_speed) = nearest_approach(env.world());
        result.min_human_distance = result.min_human_distance.min(distance_now);
        let safety_block = if let Some(gate) = &opts.gate {
            let inputs = GateInputs {
                windowed_epistemic: windowed_mean(&heading_epistemic_history, window)?,
                windowed_feature: windowed_mean(&feature_history, window)?,
                distance: distance_now,
                prev_distance,
                relative_speed,
            };
            let decision = poc(&inputs, &gate.thresholds, gate.approach);
            if decision.fallback_engaged {
                action = fallback_action(env.world(), env.params());
                result.fallback_steps += 1;
            }
            Some(SafetyRecord {
                fallback_engaged: decision.fallback_engaged,
                c_epistemic: decision.c_epistemic,
                c_feature: decision.c_feature,
                c_proximity: decision.c_proximity,
                c_approach: decision.c_approach,
            })
        } else {
            None
        };
        prev_distance = Some(distance_now);

        let step = env.step(action)?;
        result.steps += 1;
        result.discounted_return += discount * step.reward;
        result.undiscounted_return += step.reward;
        discount *= opts.gamma;
        if step.info.proxemic_violation {
            result.proxemic_violations += 1;
        }
        if step.info.min_human_distance < result.min_human_distance {
            result.min_human_distance = step.info.min_human_distance;
        }

        if opts.record {
            let mut record = StepRecord::new(
                result.steps - 1,
                env.world(),
                action,
                step.reward,
                &step.info,
            );
            record.uncertainty = estimate_now.map(|(est, feature_u)| UncertaintyRecord {
                epistemic: est.epistemic,
                aleatoric: est.aleatoric,
                feature: feature_u,
                windowed_heading_epistemic: windowed_mean(&heading_epistemic_history, window)
                    .expect("history is non-empty while estimating"),
                windowed_feature: windowed_mean(&feature_history, window)
                    .expect("history is non-empty while estimating"),
            });
            record.safety = safety_block;
            result.records.push(record);
        }

        obs = step.observation.values.clone();
        if step.done {
            result.status = step.info.status;
            break;
        }
    }
    Ok(result)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::policy::Architecture;

    fn nav_bundle(seed: u64) -> PolicyBundle {
        let obs_dim = crate::sim::observation_dim(ScenarioSpec::position_swap().max_observed_humans);
        let policy = OdvPolicy::for_navigation(
            ScenarioSpec::position_swap().max_observed_humans,
            seed,
        );
        let mut bounds = FeatureBounds::new(policy.arch.feature_dim());
        // Seed the tracker with a handful of feature vectors so the dropout
        // normalizer has nondegenerate ranges.
        let mut state = LstmState::zeros(&policy.arch);
        let mut rng = rand_chacha::ChaCha12Rng::seed_from_u64(99);
        let mut obs = vec![0.0; obs_dim];
        for i in 0..32 {
            obs.iter_mut().enumerate().for_each(|(j, v)| {
                *v = ((i * 7 + j * 3) % 11) as f64 * 0.1 - 0.5;
            });
            let out = policy.forward(&obs, &state, DropoutMode::Train, &mut rng);
            bounds.update(&out.features);
            state = out.next_state;
        }
        PolicyBundle::Single { policy, bounds }
    }

    #[test]
    fn plain_episode_terminates_and_is_deterministic() {
        let bundle = nav_bundle(0);
        let spec = ScenarioSpec::position_swap();
        let pert = PerturbationSpec::default();
        let opts = EpisodeOptions::default();
        let a = run_episode(&bundle, &spec, &pert, 7, &opts).unwrap();
        let b = run_episode(&bundle, &spec, &pert, 7, &opts).unwrap();
        assert_ne!(a.status, EpisodeStatus::Running);
        assert!(a.steps > 0);
        assert_eq!(a.status, b.status);
        assert_eq!(a.discounted_return, b.discounted_return);
        assert_eq!(a.min_human_distance, b.min_human_distance);
        assert!(a.uncertainty.is_none());
        assert!(a.records.is_empty());
    }

    #[test]
    fn estimation_does_not_change_the_trajectory() {
        let bundle = nav_bundle(1);
        let spec = ScenarioSpec::position_swap();
        let pert = PerturbationSpec::default();
        let plain = run_episode(&bundle, &spec, &pert, 3, &EpisodeOptions::default()).unwrap();
        let probed = run_episode(
            &bundle,
            &spec,
            &pert,
            3,
            &EpisodeOptions {
                estimate: true,
                probes: 4,
                record: true,
                ..EpisodeOptions::default()
            },
        )
        .unwrap();
        // Probes are side observations; the control stream must be identical.
        assert_eq!(plain.status, probed.status);
        assert_eq!(plain.steps, probed.steps);
        assert_eq!(plain.discounted_return, probed.discounted_return);
        let totals = probed.uncertainty.unwrap();
        assert_eq!(totals.steps, probed.steps);
        assert_eq!(probed.records.len(), probed.steps);
        assert!(probed.records.iter().all(|r| r.uncertainty.is_some()));
        // Test-rate dropout probes on a nontrivial network spread out.
        assert!(totals.epistemic[0] > 0.0 || totals.epistemic[1] > 0.0);
    }

    #[test]
    fn mismatched_observation_dims_are_rejected() {
        let policy = OdvPolicy::new(
            Architecture {
                obs_dim: 3,
                lstm_hidden: 4,
                actor_hidden: 4,
                action_dim: 2,
            },
            0,
        );
        let bounds = FeatureBounds::new(4);
        let bundle = PolicyBundle::Single { policy, bounds };
        let err = run_episode(
            &bundle,
            &ScenarioSpec::position_swap(),
            &PerturbationSpec::default(),
            0,
            &EpisodeOptions::default(),
        )
        .unwrap_err();
        assert!(matches!(err, HarnessError::ObservationDimMismatch { .. }));
    }

    #[test]
    fn gated_episode_records_fallback_bookkeeping() {
        let bundle = nav_bundle(2);
        let spec = ScenarioSpec::position_swap();
        let pert = PerturbationSpec {
            observation_noise_std: 1.0,
            ..PerturbationSpec::default()
        };
        // Thresholds rigged so the gate fires whenever geometry allows: any
        // positive epistemic reading clears the zero bar, and the huge
        // proximity radius makes geometry almost always permissive.
        let gate = GateConfig {
            thresholds: PocThresholds {
                epistemic: 0.0,
                feature: 1e18,
                proximity: 50.0,
                velocity_weight: 0.5,
                window: 4,
            },
            approach: ApproachReading::ClosingIn,
        };
        let out = run_episode(
            &bundle,
            &spec,
            &pert,
            11,
            &EpisodeOptions {
                gate: Some(gate),
                probes: 4,
                record: true,
                ..EpisodeOptions::default()
            },
        )
        .unwrap();
        assert!(out.fallback_steps > 0, "rigged gate never engaged");
        let engaged: usize = out
            .records
            .iter()
            .filter(|r| r.safety.as_ref().is_some_and(|s| s.fallback_engaged))
            .count();
        assert_eq!(engaged, out.fallback_steps);
        // The first step can never satisfy the approach condition.
        let first = out.records[0].safety.as_ref().unwrap();
        assert!(!first.c_approach);
        assert!(!first.fallback_engaged);
    }

    #[test]
    fn ensemble_bundle_runs_and_disagreement_is_nonzero() {
        let spec = ScenarioSpec::position_swap();
        let members = vec![
            OdvPolicy::for_navigation(spec.max_observed_humans, 10),
            OdvPolicy::for_navigation(spec.max_observed_humans, 11),
        ];
        let bundle = PolicyBundle::Ensemble(EnsemblePolicies::new(members).unwrap());
        let out = run_episode(
            &bundle,
            &spec,
            &PerturbationSpec::default(),
            5,
            &EpisodeOptions {
                estimate: true,
                ..EpisodeOptions::default()
            },
        )
        .unwrap();
        let totals = out.uncertainty.unwrap();
        assert_eq!(totals.steps, out.steps);
        assert!(totals.epistemic[0] > 0.0 && totals.epistemic[1] > 0.0);
        // A non-estimating run drives the robot with member 0 alone and must
        // follow the same trajectory: member probes never steer.
        let plain = run_episode(
            &bundle,
            &spec,
            &PerturbationSpec::default(),
            5,
            &EpisodeOptions::default(),
        )
        .unwrap();
        assert_eq!(plain.status, out.status);
        assert_eq!(plain.steps, out.steps);
        assert_eq!(plain.discounted_return, out.discounted_return);
    }
}
