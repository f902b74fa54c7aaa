//! The stepped crowd environment: ORCA-driven humans, a unicycle-style
//! robot, perturbation injection, and reward/termination bookkeeping.

use super::agent::{ActionCommand, Observation};
use super::noise::{apply_action_noise, apply_observation_noise};
use super::reward::{compute_reward, RewardInputs, RewardParams};
use super::scenario::{sample_world, PerturbationSpec, ScenarioSpec};
use super::{EpisodeStatus, SimError};
use crate::orca::{compute_orca_velocity, OrcaAgentView, OrcaParams};
use crate::vec2::{wrap_angle, Vec2};
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;

/// Fixed physical parameters of the simulation (not part of a scenario).
#[derive(Debug, Clone, Copy)]
pub struct SimParams {
    /// Integration step (s).
    pub dt: f64,
    /// Hard cap on the robot's commanded speed (m/s).
    pub robot_max_speed: f64,
    /// Hard cap on the robot's commanded heading change per step (rad).
    pub max_turn: f64,
    /// Humans only react to agents within this range (m).
    pub neighbor_range: f64,
    pub orca: OrcaParams,
    pub reward: RewardParams,
}

impl Default for SimParams {
    fn default() -> Self {
        SimParams {
            dt: 0.25,
            robot_max_speed: 1.5,
            max_turn: std::f64::consts::FRAC_PI_4,
            neighbor_range: 10.0,
            orca: OrcaParams::default(),
            reward: RewardParams::default(),
        }
    }
}

/// Result of one environment step.
#[derive(Debug, Clone)]
pub struct StepOutput {
    /// Next observation, with observation noise already applied.
    pub observation: Observation,
    pub reward: f64,
    pub done: bool,
    pub info: StepInfo,
}

/// Ground-truth diagnostics for one step (safe to log; also feeds the safety
/// gate's geometric context).
#[derive(Debug, Clone, Copy)]
pub struct StepInfo {
    pub status: EpisodeStatus,
    /// Surface distance to the closest human (m); `+inf` with no humans.
    pub min_human_distance: f64,
    pub proxemic_violation: bool,
    /// Goal-distance reduction this step (m).
    pub progress: f64,
    /// Executed (post-noise) speed magnitude (m/s).
    pub executed_speed: f64,
    /// Executed (post-noise) heading change (rad).
    pub executed_delta_heading: f64,
}

/// A seeded episode of the crowd simulation.
///
/// Constructing one performs the reset: the world is sampled from the
/// scenario and perturbation, and the initial (noisy) observation is ready.
/// Identical `(spec, perturbation, seed)` triples reproduce the episode
/// bit for bit given the same action sequence.
pub struct CrowdSim {
    spec: ScenarioSpec,
    perturbation: PerturbationSpec,
    params: SimParams,
    world: super::agent::WorldState,
    rng: ChaCha12Rng,
    steps: usize,
    done: bool,
    prev_goal_dist: f64,
    initial_observation: Observation,
}

impl CrowdSim {
    pub fn new(
        spec: ScenarioSpec,
        perturbation: PerturbationSpec,
        seed: u64,
    ) -> Result<Self, SimError> {
        Self::with_params(spec, perturbation, SimParams::default(), seed)
    }

    pub fn with_params(
        spec: ScenarioSpec,
        perturbation: PerturbationSpec,
        params: SimParams,
        seed: u64,
    ) -> Result<Self, SimError> {
        let mut rng = ChaCha12Rng::seed_from_u64(seed);
        let world = sample_world(&spec, &perturbation, &mut rng)?;
        let prev_goal_dist = world.robot.goal_distance();
        let mut initial_observation = Observation::from_world(&world, spec.max_observed_humans);
        apply_observation_noise(
            &mut initial_observation,
            perturbation.observation_noise_std,
            &mut rng,
        );
        Ok(CrowdSim {
            spec,
            perturbation,
            params,
            world,
            rng,
            steps: 0,
            done: false,
            prev_goal_dist,
            initial_observation,
        })
    }

    pub fn initial_observation(&self) -> &Observation {
        &self.initial_observation
    }

    pub fn world(&self) -> &super::agent::WorldState {
        &self.world
    }

    pub fn spec(&self) -> &ScenarioSpec {
        &self.spec
    }

    pub fn perturbation(&self) -> &PerturbationSpec {
        &self.perturbation
    }

    pub fn params(&self) -> &SimParams {
        &self.params
    }

    pub fn steps_taken(&self) -> usize {
        self.steps
    }

    pub fn is_done(&self) -> bool {
        self.done
    }

    pub fn observation_dim(&self) -> usize {
        super::agent::observation_dim(self.spec.max_observed_humans)
    }

    /// ORCA velocity each human would choose in the current world.
    fn human_orca_velocities(&self) -> Vec<Vec2> {
        let world = &self.world;
        let orca = OrcaParams {
            time_step: self.params.dt,
            ..self.params.orca
        };
        world
            .humans
            .iter()
            .enumerate()
            .map(|(i, h)| {
                let to_goal = h.goal - h.position;
                // Slow down on final approach instead of orbiting the goal;
                // once arrived, stand still (but keep avoiding).
                let arrived = to_goal.norm() < h.radius;
                let pref = if arrived {
                    Vec2::ZERO
                } else {
                    to_goal.normalized() * h.preferred_speed.min(to_goal.norm() / self.params.dt)
                };
                let me = OrcaAgentView {
                    position: h.position,
                    velocity: h.velocity,
                    radius: h.radius,
                    preferred_velocity: pref,
                    max_speed: h.preferred_speed,
                };
                let neighbours: Vec<OrcaAgentView> = world
                    .humans
                    .iter()
                    .enumerate()
                    .filter(|&(j, _)| j != i)
                    .map(|(_, o)| o)
                    .chain(std::iter::once(&world.robot))
                    .filter(|o| o.position.distance(h.position) <= self.params.neighbor_range)
                    .map(|o| OrcaAgentView {
                        position: o.position,
                        velocity: o.velocity,
                        radius: o.radius,
                        preferred_velocity: Vec2::ZERO,
                        max_speed: 0.0,
                    })
                    .collect();
                compute_orca_velocity(&me, &neighbours, &orca)
            })
            .collect()
    }

    /// Advance one time step. Errors on non-finite commands or if the episode
    /// already ended.
    pub fn step(&mut self, action: ActionCommand) -> Result<StepOutput, SimError> {
        if self.done {
            return Err(SimError::EpisodeFinished);
        }
        if !action.is_finite() {
            return Err(SimError::NonFiniteAction);
        }

        // Project the command into the actuator envelope, then corrupt it.
        let speed_cmd = action.speed.clamp(0.0, self.params.robot_max_speed);
        let dh_cmd = action
            .delta_heading
            .clamp(-self.params.max_turn, self.params.max_turn);
        let (exec_speed, exec_dh) = apply_action_noise(
            speed_cmd,
            dh_cmd,
            self.perturbation.heading_noise_std,
            self.perturbation.velocity_scale_noise,
            &mut self.rng,
        );

        // Humans decide on the pre-step world; everyone then moves at once.
        let human_velocities = self.human_orca_velocities();

        let dt = self.params.dt;
        let robot = &mut self.world.robot;
        robot.heading = wrap_angle(robot.heading + exec_dh);
        robot.velocity = Vec2::from_angle(robot.heading) * exec_speed;
        robot.position += robot.velocity * dt;

        for (h, v) in self.world.humans.iter_mut().zip(human_velocities) {
            h.velocity = v;
            h.position += v * dt;
            if v.norm() > 1e-9 {
                h.heading = v.angle();
            }
        }

        self.steps += 1;
        self.world.time = self.steps as f64 * dt;

        // Termination: collision takes precedence over goal, goal over timeout.
        let min_dist = self.world.min_human_distance();
        let goal_dist = self.world.robot.goal_distance();
        let status = if min_dist < 0.0 {
            EpisodeStatus::Collision
        } else if goal_dist < self.world.robot.radius {
            EpisodeStatus::ReachedGoal
        } else if self.world.time >= self.spec.time_limit - 1e-9 {
            EpisodeStatus::Timeout
        } else {
            EpisodeStatus::Running
        };
        self.done = status != EpisodeStatus::Running;

        let progress = self.prev_goal_dist - goal_dist;
        self.prev_goal_dist = goal_dist;

        let proxemic_intrusion = self
            .world
            .humans
            .iter()
            .filter_map(|h| {
                let d = self.world.robot.surface_distance(h);
                if d < h.proxemic_radius && h.proxemic_radius > 0.0 {
                    Some(1.0 - d.max(0.0) / h.proxemic_radius)
                } else {
                    None
                }
            })
            .fold(None, |acc: Option<f64>, depth| {
                Some(acc.map_or(depth, |a| a.max(depth)))
            });

        let executed_speed = self.world.robot.velocity.norm();
        let mean_human_speed = if self.world.humans.is_empty() {
            None
        } else {
            Some(
                self.world
                    .humans
                    .iter()
                    .map(|h| h.preferred_speed)
                    .sum::<f64>()
                    / self.world.humans.len() as f64,
            )
        };

        let reward = compute_reward(
            &self.params.reward,
            &RewardInputs {
                status,
                progress,
                proxemic_intrusion,
                executed_speed,
                mean_human_preferred_speed: mean_human_speed,
            },
        );

        let mut observation = Observation::from_world(&self.world, self.spec.max_observed_humans);
        apply_observation_noise(
            &mut observation,
            self.perturbation.observation_noise_std,
            &mut self.rng,
        );
        debug_assert!(observation.is_finite());

        Ok(StepOutput {
            observation,
            reward,
            done: self.done,
            info: StepInfo {
                status,
                min_human_distance: min_dist,
                proxemic_violation: proxemic_intrusion.is_some(),
                progress,
                executed_speed,
                executed_delta_heading: exec_dh,
            },
        })
    }
}
