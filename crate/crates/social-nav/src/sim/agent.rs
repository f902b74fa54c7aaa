//! Agent and world state, the observation encoding, and the robot's action
//! command.

use crate::vec2::{wrap_angle, Vec2};
use serde::{Deserialize, Serialize};

/// Full state of one disc agent. `position`, `velocity`, and `radius` are
/// observable by everyone; the remaining fields are hidden (goal, preferences,
/// personal-space radius) and may be read only by the agent itself and by the
/// simulator.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AgentState {
    pub position: Vec2,
    pub velocity: Vec2,
    pub radius: f64,
    pub goal: Vec2,
    pub preferred_speed: f64,
    /// Orientation in radians, `(-pi, pi]`.
    pub heading: f64,
    /// Personal-space radius (m); entering it is a proxemic violation.
    pub proxemic_radius: f64,
}

impl AgentState {
    /// Distance between disc surfaces; negative when the discs overlap.
    pub fn surface_distance(&self, other: &AgentState) -> f64 {
        self.position.distance(other.position) - self.radius - other.radius
    }

    pub fn goal_distance(&self) -> f64 {
        self.position.distance(self.goal)
    }

    pub fn is_valid(&self) -> bool {
        self.position.is_finite()
            && self.velocity.is_finite()
            && self.goal.is_finite()
            && self.radius > 0.0
            && self.preferred_speed > 0.0
            && self.heading.is_finite()
            && self.proxemic_radius >= 0.0
    }
}

/// Everything in the simulation at one instant.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct WorldState {
    /// Elapsed episode time in seconds.
    pub time: f64,
    pub robot: AgentState,
    pub humans: Vec<AgentState>,
}

impl WorldState {
    /// Surface distance from the robot to the closest human; `+inf` with no
    /// humans present.
    pub fn min_human_distance(&self) -> f64 {
        self.humans
            .iter()
            .map(|h| self.robot.surface_distance(h))
            .fold(f64::INFINITY, f64::min)
    }
}

/// Number of scalars in the robot block of an observation.
pub const ROBOT_BLOCK_DIM: usize = 5;
/// Number of scalars per human block.
pub const HUMAN_BLOCK_DIM: usize = 5;

/// Observation dimension for a fixed maximum number of observed humans.
pub fn observation_dim(max_observed_humans: usize) -> usize {
    ROBOT_BLOCK_DIM + HUMAN_BLOCK_DIM * max_observed_humans
}

/// Flat observation vector handed to the policy.
///
/// Layout (all physical units, robot-egocentric):
/// * robot block: goal distance (m), goal bearing in the robot frame (rad),
///   speed (m/s), world heading (rad), radius (m);
/// * one block per human, sorted by distance to the robot, ascending:
///   relative position (m, robot frame), relative velocity (m/s, robot
///   frame), radius (m).
///
/// Humans beyond `max_observed_humans` are dropped (farthest first); missing
/// humans are zero blocks. The dimension is constant for a fixed maximum.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Observation {
    pub values: Vec<f64>,
}

impl Observation {
    /// Encode `world` for the robot. Zero-padded and distance-sorted; see the
    /// type-level docs for the layout.
    pub fn from_world(world: &WorldState, max_observed_humans: usize) -> Observation {
        let robot = &world.robot;
        let mut values = Vec::with_capacity(observation_dim(max_observed_humans));

        let to_goal = robot.goal - robot.position;
        values.push(to_goal.norm());
        values.push(wrap_angle(to_goal.angle() - robot.heading));
        values.push(robot.velocity.norm());
        values.push(robot.heading);
        values.push(robot.radius);

        let mut order: Vec<usize> = (0..world.humans.len()).collect();
        order.sort_by(|&a, &b| {
            let da = robot.position.distance(world.humans[a].position);
            let db = robot.position.distance(world.humans[b].position);
            da.partial_cmp(&db).expect("agent positions must be finite")
        });

        for &idx in order.iter().take(max_observed_humans) {
            let h = &world.humans[idx];
            let rel_p = (h.position - robot.position).rotated(-robot.heading);
            let rel_v = (h.velocity - robot.velocity).rotated(-robot.heading);
            values.extend_from_slice(&[rel_p.x, rel_p.y, rel_v.x, rel_v.y, h.radius]);
        }
        values.resize(observation_dim(max_observed_humans), 0.0);

        Observation { values }
    }

    pub fn dim(&self) -> usize {
        self.values.len()
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }
}

/// Robot action for one step: a forward speed and a heading change.
///
/// Commands may be any finite numbers; the environment projects the speed to
/// `[0, max_speed]` and the heading change to the configured turn limit before
/// executing (perturbation noise is injected after projection).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ActionCommand {
    pub speed: f64,
    pub delta_heading: f64,
}

impl ActionCommand {
    pub fn is_finite(&self) -> bool {
        self.speed.is_finite() && self.delta_heading.is_finite()
    }
}
