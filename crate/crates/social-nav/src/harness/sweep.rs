//! Perturbation sweeps: run evaluation batches along one disturbance axis
//! and aggregate the per-step uncertainty estimates and collision counts at
//! each strength, plus the normalized rate-of-change summary that compares
//! how sharply each estimator reacts to a disturbance.

use super::episode::{EpisodeOptions, PolicyBundle};
use super::eval::{run_evaluation, EvalReport};
use super::HarnessError;
use crate::sim::{PerturbationSpec, ScenarioSpec};
use serde::{Deserialize, Serialize};

/// The disturbance dimension a sweep walks along.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepAxis {
    /// Gaussian noise on every observation entry; strength is the std-dev.
    ObsNoise,
    /// Noise on the executed action: heading gets additive Gaussian noise of
    /// the given std-dev, and the speed scale factor's width grows with the
    /// same strength (capped at 1, the widest valid scaling band).
    ActionNoise,
    /// Multiplier on every human's preferred speed.
    VelocityScale,
    /// Total agent count (robot included); extra humans join the scenario.
    HumanCount,
}

impl SweepAxis {
    pub fn label(self) -> &'static str {
        match self {
            SweepAxis::ObsNoise => "obs_noise",
            SweepAxis::ActionNoise => "action_noise",
            SweepAxis::VelocityScale => "velocity_scale",
            SweepAxis::HumanCount => "human_count",
        }
    }

    pub fn parse(text: &str) -> Result<Self, HarnessError> {
        match text {
            "obs_noise" => Ok(SweepAxis::ObsNoise),
            "action_noise" => Ok(SweepAxis::ActionNoise),
            "velocity_scale" => Ok(SweepAxis::VelocityScale),
            "human_count" => Ok(SweepAxis::HumanCount),
            other => Err(HarnessError::Config(format!(
                "unknown sweep axis '{other}' (expected obs_noise, action_noise, velocity_scale, or human_count)"
            ))),
        }
    }

    /// The default strength grid for this axis.
    pub fn default_grid(self) -> Vec<f64> {
        match self {
            // 0, 0.2, ..., 2.0 (computed as exact tenths).
            SweepAxis::ObsNoise | SweepAxis::ActionNoise => {
                (0..=10).map(|i| (2 * i) as f64 / 10.0).collect()
            }
            SweepAxis::VelocityScale => (1..=8).map(|i| i as f64).collect(),
            SweepAxis::HumanCount => (2..=7).map(|i| i as f64).collect(),
        }
    }

    /// The perturbation for one grid strength, layered on `base`.
    pub fn apply(
        self,
        base: &PerturbationSpec,
        scenario: &ScenarioSpec,
        strength: f64,
    ) -> Result<PerturbationSpec, HarnessError> {
        let mut p = base.clone();
        match self {
            SweepAxis::ObsNoise => {
                if strength < 0.0 {
                    return Err(HarnessError::Config("noise strength must be >= 0".into()));
                }
                p.observation_noise_std = strength;
            }
            SweepAxis::ActionNoise => {
                if strength < 0.0 {
                    return Err(HarnessError::Config("noise strength must be >= 0".into()));
                }
                p.heading_noise_std = strength;
                // The speed factor u ~ U(1 - width, 1) only admits widths up
                // to 1 (wider would allow negative speeds), so the band
                // saturates while heading noise keeps growing.
                p.velocity_scale_noise = strength.min(1.0);
            }
            SweepAxis::VelocityScale => {
                if strength < 1.0 {
                    return Err(HarnessError::Config(
                        "velocity scale must be >= 1".into(),
                    ));
                }
                p.human_speed_multiplier = strength;
            }
            SweepAxis::HumanCount => {
                let total = strength.round();
                if (strength - total).abs() > 1e-9 || total < 2.0 {
                    return Err(HarnessError::Config(
                        "human_count strengths must be whole agent counts >= 2".into(),
                    ));
                }
                let wanted_humans = total as usize - 1;
                if wanted_humans < scenario.human_count {
                    return Err(HarnessError::Config(format!(
                        "human_count strength {total} is below the scenario's base of {} humans",
                        scenario.human_count
                    )));
                }
                p.extra_humans = wanted_humans - scenario.human_count;
            }
        }
        Ok(p)
    }
}

/// Per-step means of the five tracked uncertainty kinds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KindMeans {
    pub epistemic_speed: f64,
    pub epistemic_heading: f64,
    pub aleatoric_speed: f64,
    pub aleatoric_heading: f64,
    pub feature: f64,
}

impl KindMeans {
    pub const LABELS: [&'static str; 5] = [
        "epistemic_speed",
        "epistemic_heading",
        "aleatoric_speed",
        "aleatoric_heading",
        "feature",
    ];

    pub fn as_array(&self) -> [f64; 5] {
        [
            self.epistemic_speed,
            self.epistemic_heading,
            self.aleatoric_speed,
            self.aleatoric_heading,
            self.feature,
        ]
    }
}

/// Aggregates at one grid strength.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SweepPoint {
    pub strength: f64,
    pub episodes: usize,
    /// Steps pooled over all episodes at this strength.
    pub steps: usize,
    /// Mean per-step uncertainty over every step of every episode.
    pub mean: KindMeans,
    pub collisions: usize,
    pub goals: usize,
    pub timeouts: usize,
    pub mean_return: f64,
}

/// One full sweep along an axis.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SweepResult {
    pub axis: SweepAxis,
    /// "dropout" or "ensemble".
    pub source: String,
    pub points: Vec<SweepPoint>,
}

/// Run an uncertainty sweep. The grid must be strictly increasing; each
/// strength runs `episodes` episodes with per-step estimation, all strengths
/// sharing the same episode seed stream so points stay comparable.
pub fn perturbation_sweep(
    bundle: &PolicyBundle,
    scenario: &ScenarioSpec,
    base: &PerturbationSpec,
    axis: SweepAxis,
    grid: &[f64],
    episodes: usize,
    seed_base: u64,
    opts: &EpisodeOptions,
) -> Result<SweepResult, HarnessError> {
    if grid.is_empty() {
        return Err(HarnessError::Config("sweep grid must not be empty".into()));
    }
    if grid.windows(2).any(|w| w[0] >= w[1]) {
        return Err(HarnessError::Config(
            "sweep grid must be strictly increasing".into(),
        ));
    }
    let opts = EpisodeOptions {
        estimate: true,
        ..*opts
    };
    let mut points = Vec::with_capacity(grid.len());
    for &strength in grid {
        let pert = axis.apply(base, scenario, strength)?;
        let report = run_evaluation(bundle, scenario, &pert, episodes, seed_base, &opts)?;
        points.push(to_point(strength, &report));
    }
    Ok(SweepResult {
        axis,
        source: bundle.source_label().to_string(),
        points,
    })
}

fn to_point(strength: f64, report: &EvalReport) -> SweepPoint {
    let totals = report
        .uncertainty
        .as_ref()
        .expect("sweep evaluations always estimate");
    let steps = totals.steps.max(1) as f64;
    SweepPoint {
        strength,
        episodes: report.episodes,
        steps: totals.steps,
        mean: KindMeans {
            epistemic_speed: totals.epistemic[0] / steps,
            epistemic_heading: totals.epistemic[1] / steps,
            aleatoric_speed: totals.aleatoric[0] / steps,
            aleatoric_heading: totals.aleatoric[1] / steps,
            feature: totals.feature / steps,
        },
        collisions: report.collisions,
        goals: report.goals,
        timeouts: report.timeouts,
        mean_return: report.mean_return,
    }
}

/// The normalized rate of change `(1/u(0)) * (u(max) - u(0)) / (s_max - s_0)`.
///
/// Undefined (None) when the zero-strength uncertainty is not positive or
/// the strength interval is degenerate.
pub fn normalized_rate_of_change(
    u_at_zero: f64,
    u_at_max: f64,
    strength_zero: f64,
    strength_max: f64,
) -> Option<f64> {
    if !(strength_max > strength_zero) || !(u_at_zero > 0.0) {
        return None;
    }
    Some((u_at_max - u_at_zero) / (strength_max - strength_zero) / u_at_zero)
}

/// Normalized rates between the first and last grid points of a sweep, one
/// per uncertainty kind (None where undefined).
pub fn sweep_rates_of_change(result: &SweepResult) -> [Option<f64>; 5] {
    let first = result.points.first();
    let last = result.points.last();
    match (first, last) {
        (Some(a), Some(b)) => {
            let ua = a.mean.as_array();
            let ub = b.mean.as_array();
            std::array::from_fn(|i| {
                normalized_rate_of_change(ua[i], ub[i], a.strength, b.strength)
            })
        }
        _ => [None; 5],
    }
}
