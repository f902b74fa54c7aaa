//! Step reward: dense progress shaping plus sparse terminal payoffs and two
//! social penalty terms.

use super::EpisodeStatus;
use serde::{Deserialize, Serialize};

/// Reward coefficients. The defaults are the values used for every result in
/// this repository; they are exposed as a struct so experiments can ablate
/// individual terms.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RewardParams {
    /// Paid once when the robot reaches its goal.
    pub goal_reward: f64,
    /// Paid once when the robot hits a human (negative).
    pub collision_penalty: f64,
    /// Flat per-step time cost (negative).
    pub step_penalty: f64,
    /// Weight on goal-distance reduction per step.
    pub progress_coef: f64,
    /// Scale of the personal-space intrusion penalty (positive number; the
    /// penalty applied is `-scale * intrusion_depth`).
    pub proxemic_penalty_scale: f64,
    /// Weight on speed in excess of the mean human preferred speed.
    pub speed_excess_penalty: f64,
}

impl Default for RewardParams {
    fn default() -> Self {
        RewardParams {
            goal_reward: 5.0,
            collision_penalty: -5.0,
            step_penalty: -0.01,
            progress_coef: 1.0,
            proxemic_penalty_scale: 0.25,
            speed_excess_penalty: 0.05,
        }
    }
}

/// Per-step quantities the reward depends on, computed by the environment
/// after integration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RewardInputs {
    pub status: EpisodeStatus,
    /// Goal-distance reduction this step (m); negative when moving away.
    pub progress: f64,
    /// Deepest personal-space intrusion across humans, as
    /// `1 - d / r_prox` with `d` the surface distance clamped at zero.
    /// `None` when the robot is outside everyone's personal space.
    pub proxemic_intrusion: Option<f64>,
    /// Magnitude of the robot's executed velocity (m/s).
    pub executed_speed: f64,
    /// Mean preferred speed of the humans present; `None` with no humans.
    pub mean_human_preferred_speed: Option<f64>,
}

/// Deterministic reward for one executed step.
pub fn compute_reward(params: &RewardParams, inputs: &RewardInputs) -> f64 {
    let mut reward = params.step_penalty + params.progress_coef * inputs.progress;

    match inputs.status {
        EpisodeStatus::ReachedGoal => reward += params.goal_reward,
        EpisodeStatus::Collision => reward += params.collision_penalty,
        EpisodeStatus::Running | EpisodeStatus::Timeout => {}
    }

    if let Some(depth) = inputs.proxemic_intrusion {
        reward -= params.proxemic_penalty_scale * depth;
    }

    if let Some(mean_speed) = inputs.mean_human_preferred_speed {
        reward -= params.speed_excess_penalty * (inputs.executed_speed - mean_speed).max(0.0);
    }

    reward
}

#[cfg(test)]
mod tests {
    use super::*;

    fn idle_inputs() -> RewardInputs {
        RewardInputs {
            status: EpisodeStatus::Running,
            progress: 0.0,
            proxemic_intrusion: None,
            executed_speed: 0.0,
            mean_human_preferred_speed: Some(0.75),
        }
    }

    #[test]
    fn idle_step_costs_exactly_the_time_penalty() {
        let r = compute_reward(&RewardParams::default(), &idle_inputs());
        assert_eq!(r, -0.01);
    }

    #[test]
    fn goal_and_collision_terminals() {
        let params = RewardParams::default();
        let goal = RewardInputs {
            status: EpisodeStatus::ReachedGoal,
            progress: 0.2,
            ..idle_inputs()
        };
        assert!((compute_reward(&params, &goal) - (5.0 - 0.01 + 0.2)).abs() < 1e-12);

        let hit = RewardInputs {
            status: EpisodeStatus::Collision,
            ..idle_inputs()
        };
        assert!((compute_reward(&params, &hit) - (-5.0 - 0.01)).abs() < 1e-12);
    }

    #[test]
    fn intrusion_strictly_reduces_reward() {
        let params = RewardParams::default();
        let outside = idle_inputs();
        let inside = RewardInputs {
            proxemic_intrusion: Some(0.5),
            ..outside
        };
        let r_out = compute_reward(&params, &outside);
        let r_in = compute_reward(&params, &inside);
        assert!(r_in < r_out);
        assert!((r_out - r_in - 0.125).abs() < 1e-12);
    }

    #[test]
    fn only_excess_speed_is_penalized() {
        let params = RewardParams::default();
        let slow = RewardInputs {
            executed_speed: 0.5,
            ..idle_inputs()
        };
        let fast = RewardInputs {
            executed_speed: 1.25,
            ..idle_inputs()
        };
        assert_eq!(compute_reward(&params, &slow), -0.01);
        assert!((compute_reward(&params, &fast) - (-0.01 - 0.05 * 0.5)).abs() < 1e-12);
    }

    #[test]
    fn progress_is_signed() {
        let params = RewardParams::default();
        let backward = RewardInputs {
            progress: -0.3,
            ..idle_inputs()
        };
        assert!((compute_reward(&params, &backward) - (-0.01 - 0.3)).abs() < 1e-12);
    }
}
