//! The uncertainty-gated safety layer.
//!
//! Each control step, a *prediction-of-collision* (POC) gate combines four
//! boolean conditions computed from windowed uncertainty signals and the
//! true robot/pedestrian geometry:
//!
//! * `c_epistemic` — the windowed heading-dimension epistemic uncertainty
//!   exceeds its threshold;
//! * `c_feature` — the windowed scalar feature uncertainty exceeds its
//!   threshold;
//! * `c_proximity` — the nearest pedestrian is close, with the separation
//!   padded by a multiple of the relative speed before comparing;
//! * `c_approach` — the separation is still shrinking step over step.
//!
//! The gate fires when `(c_epistemic || c_feature) && c_proximity &&
//! c_approach`; all comparisons are strict, so exact ties never engage the
//! fallback. When it fires, the selector discards the policy's action and
//! executes a conservative reciprocal-avoidance step computed from the true
//! world state with pedestrian radii inflated — slower and wider than the
//! learned policy, but independent of it.
//!
//! The geometric conditions deliberately read the simulator's ground-truth
//! state, not the noisy observation: the safety layer models a robot whose
//! proximity sensing is trustworthy even when its policy inputs are not.

use crate::orca::{cautious_orca_velocity, OrcaAgentView, OrcaParams};
use crate::sim::{ActionCommand, AgentState, SimParams, WorldState};
use crate::vec2::{wrap_angle, Vec2};
use serde::{Deserialize, Serialize};

/// Factor applied to pedestrian radii inside the fallback planner.
pub const CAUTIOUS_RADIUS_INFLATION: f64 = 1.5;

/// Thresholds and shared constants of the POC gate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PocThresholds {
    /// Windowed heading-dimension epistemic uncertainty threshold.
    pub epistemic: f64,
    /// Windowed scalar feature uncertainty threshold.
    pub feature: f64,
    /// Padded-separation threshold (meters).
    pub proximity: f64,
    /// Weight of the relative speed inside the proximity padding.
    pub velocity_weight: f64,
    /// Trailing window length for the uncertainty means.
    pub window: usize,
}

impl PocThresholds {
    /// Tuning for Monte-Carlo dropout probes.
    pub fn dropout() -> Self {
        PocThresholds {
            epistemic: 0.03,
            feature: 0.3,
            proximity: 0.9,
            velocity_weight: 0.5,
            window: 4,
        }
    }

    /// Tuning for deep-ensemble probes. The feature threshold differs by
    /// orders of magnitude from the dropout one because ensemble feature
    /// uncertainty is an unnormalized mean variance, not a [0, 1] score.
    pub fn ensemble() -> Self {
        PocThresholds {
            epistemic: 0.08,
            feature: 0.0033,
            proximity: 0.9,
            velocity_weight: 0.5,
            window: 4,
        }
    }
}

/// Which way the approach condition reads the two most recent separations.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum ApproachReading {
    /// Fire while the robot and the nearest pedestrian are closing in:
    /// `d_t < d_{t-1}`.
    #[default]
    ClosingIn,
    /// The mirrored reading, `d_{t-1} < d_t` (kept selectable for
    /// comparison runs; it gates on *receding* pedestrians instead).
    Receding,
}

/// Per-step inputs to the gate.
#[derive(Debug, Clone, Copy)]
pub struct GateInputs {
    /// Trailing-window mean of the heading-dimension epistemic uncertainty.
    pub windowed_epistemic: f64,
    /// Trailing-window mean of the scalar feature uncertainty.
    pub windowed_feature: f64,
    /// Current robot-to-nearest-pedestrian surface separation `d_t`.
    pub distance: f64,
    /// Previous step's separation `d_{t-1}`; `None` on the first step.
    pub prev_distance: Option<f64>,
    /// Relative speed between the robot and that pedestrian.
    pub relative_speed: f64,
}

/// The gate's verdict with the individual conditions broken out.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PocDecision {
    pub fallback_engaged: bool,
    pub c_epistemic: bool,
    pub c_feature: bool,
    pub c_proximity: bool,
    pub c_approach: bool,
}

/// Evaluate the POC gate for one step.
pub fn poc(
    inputs: &GateInputs,
    thresholds: &PocThresholds,
    approach: ApproachReading,
) -> PocDecision {
    let c_epistemic = inputs.windowed_epistemic > thresholds.epistemic;
    let c_feature = inputs.windowed_feature > thresholds.feature;
    let padded = inputs.distance + thresholds.velocity_weight * inputs.relative_speed;
    let c_proximity = padded < thresholds.proximity;
    let c_approach = match inputs.prev_distance {
        None => false,
        Some(prev) => match approach {
            ApproachReading::ClosingIn => inputs.distance < prev,
            ApproachReading::Receding => prev < inputs.distance,
        },
    };
    PocDecision {
        fallback_engaged: (c_epistemic || c_feature) && c_proximity && c_approach,
        c_epistemic,
        c_feature,
        c_proximity,
        c_approach,
    }
}

/// Geometric context of the robot's nearest human: `(surface distance,
/// relative speed of that pair)`. `(+inf, 0)` with no humans present.
///
/// The gate deliberately reads the true simulator state rather than the
/// robot's (possibly noise-corrupted) observation: the monitor exists to
/// catch exactly the situations where the observation stream is unreliable.
pub fn nearest_approach(world: &WorldState) -> (f64, f64) {
    let mut best = (f64::INFINITY, 0.0);
    for h in &world.humans {
        let d = world.robot.surface_distance(h);
        if d < best.0 {
            best = (d, (world.robot.velocity - h.velocity).norm());
        }
    }
    best
}

fn orca_view(agent: &AgentState, dt: f64) -> OrcaAgentView {
    let to_goal = agent.goal - agent.position;
    let dist = to_goal.norm();
    let speed = agent.preferred_speed.min(dist / dt);
    OrcaAgentView {
        position: agent.position,
        velocity: agent.velocity,
        radius: agent.radius,
        preferred_velocity: to_goal.normalized() * speed,
        max_speed: agent.preferred_speed,
    }
}

/// Convert a planar velocity into the robot's (speed, heading-change)
/// command, clamping the turn to what the base can execute this step.
pub fn velocity_to_command(robot: &AgentState, velocity: Vec2, max_turn: f64) -> ActionCommand {
    if velocity.norm() < 1e-12 {
        return ActionCommand {
            speed: 0.0,
            delta_heading: 0.0,
        };
    }
    let desired = velocity.angle();
    let delta = wrap_angle(desired - robot.heading).clamp(-max_turn, max_turn);
    ActionCommand {
        speed: velocity.norm().min(robot.preferred_speed),
        delta_heading: delta,
    }
}

/// The conservative fallback step: reciprocal avoidance over the true world
/// state with pedestrian radii inflated by [`CAUTIOUS_RADIUS_INFLATION`].
pub fn fallback_action(world: &WorldState, params: &SimParams) -> ActionCommand {
    let me = orca_view(&world.robot, params.dt);
    let neighbours: Vec<OrcaAgentView> = world
        .humans
        .iter()
        .filter(|h| world.robot.position.distance(h.position) <= params.neighbor_range)
        .map(|h| orca_view(h, params.dt))
        .collect();
    let orca_params = OrcaParams {
        time_step: params.dt,
        ..params.orca
    };
    let velocity = cautious_orca_velocity(&me, &neighbours, &orca_params, CAUTIOUS_RADIUS_INFLATION);
    velocity_to_command(&world.robot, velocity, params.max_turn)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sim::{CrowdSim, PerturbationSpec, ScenarioSpec};

    fn quiet_inputs() -> GateInputs {
        GateInputs {
            windowed_epistemic: 0.0,
            windowed_feature: 0.0,
            distance: 5.0,
            prev_distance: Some(6.0),
            relative_speed: 1.0,
        }
    }

    fn thresholds() -> PocThresholds {
        PocThresholds::dropout()
    }

    #[test]
    fn gate_stays_closed_when_uncertainty_is_low() {
        let mut inputs = quiet_inputs();
        inputs.distance = 0.2; // close and approaching, but no uncertainty
        inputs.relative_speed = 0.0;
        let d = poc(&inputs, &thresholds(), ApproachReading::ClosingIn);
        assert!(d.c_proximity && d.c_approach);
        assert!(!d.c_epistemic && !d.c_feature);
        assert!(!d.fallback_engaged);
    }

    #[test]
    fn gate_needs_proximity_and_approach_besides_uncertainty() {
        // High epistemic but far away: closed.
        let mut inputs = quiet_inputs();
        inputs.windowed_epistemic = 0.1;
        let d = poc(&inputs, &thresholds(), ApproachReading::ClosingIn);
        assert!(d.c_epistemic && !d.c_proximity);
        assert!(!d.fallback_engaged);

        // High epistemic, close, but receding: closed under the default
        // reading, open under the mirrored one.
        inputs.distance = 0.3;
        inputs.relative_speed = 0.2;
        inputs.prev_distance = Some(0.25);
        let d = poc(&inputs, &thresholds(), ApproachReading::ClosingIn);
        assert!(d.c_proximity && !d.c_approach && !d.fallback_engaged);
        let d = poc(&inputs, &thresholds(), ApproachReading::Receding);
        assert!(d.c_approach && d.fallback_engaged);

        // All four conditions aligned: open.
        inputs.prev_distance = Some(0.4);
        let d = poc(&inputs, &thresholds(), ApproachReading::ClosingIn);
        assert!(d.fallback_engaged);
    }

    #[test]
    fn either_uncertainty_channel_suffices() {
        let mut inputs = quiet_inputs();
        inputs.distance = 0.3;
        inputs.relative_speed = 0.0;
        inputs.prev_distance = Some(0.5);
        inputs.windowed_feature = 0.5;
        let d = poc(&inputs, &thresholds(), ApproachReading::ClosingIn);
        assert!(d.c_feature && !d.c_epistemic && d.fallback_engaged);
    }

    #[test]
    fn exact_ties_never_fire() {
        let t = thresholds();
        let inputs = GateInputs {
            windowed_epistemic: t.epistemic, // == threshold
            windowed_feature: t.feature,     // == threshold
            distance: t.proximity,           // padded == threshold (rel speed 0)
            prev_distance: Some(t.proximity), // d_t == d_{t-1}
            relative_speed: 0.0,
        };
        let d = poc(&inputs, &t, ApproachReading::ClosingIn);
        assert!(!d.c_epistemic && !d.c_feature && !d.c_proximity && !d.c_approach);
        assert!(!d.fallback_engaged);
    }

    #[test]
    fn first_step_has_no_approach_signal() {
        let mut inputs = quiet_inputs();
        inputs.windowed_epistemic = 1.0;
        inputs.distance = 0.1;
        inputs.relative_speed = 0.0;
        inputs.prev_distance = None;
        let d = poc(&inputs, &thresholds(), ApproachReading::ClosingIn);
        assert!(!d.c_approach && !d.fallback_engaged);
    }

    #[test]
    fn relative_speed_pads_the_separation() {
        let mut inputs = quiet_inputs();
        inputs.windowed_epistemic = 1.0;
        inputs.prev_distance = Some(1.0);
        inputs.distance = 0.7;
        inputs.relative_speed = 0.0;
        let d = poc(&inputs, &thresholds(), ApproachReading::ClosingIn);
        assert!(d.c_proximity && d.fallback_engaged);
        // Same separation but a fast mutual approach pushes the padded
        // value over the threshold: 0.7 + 0.5 * 0.6 = 1.0 > 0.9.
        inputs.relative_speed = 0.6;
        let d = poc(&inputs, &thresholds(), ApproachReading::ClosingIn);
        assert!(!d.c_proximity && !d.fallback_engaged);
    }

    #[test]
    fn velocity_conversion_clamps_the_turn_and_speed() {
        let robot = AgentState {
            position: Vec2::ZERO,
            velocity: Vec2::ZERO,
            radius: 0.3,
            goal: Vec2::new(5.0, 0.0),
            preferred_speed: 1.0,
            heading: 0.0,
            proxemic_radius: 0.4,
        };
        // Velocity pointing straight behind: the turn clamps to max_turn.
        let cmd = velocity_to_command(&robot, Vec2::new(-2.0, 0.0), std::f64::consts::FRAC_PI_4);
        assert!((cmd.delta_heading.abs() - std::f64::consts::FRAC_PI_4).abs() < 1e-12);
        assert!((cmd.speed - 1.0).abs() < 1e-12, "speed capped at preferred");
        // Zero velocity means stop in place.
        let cmd = velocity_to_command(&robot, Vec2::ZERO, 1.0);
        assert_eq!(cmd.speed, 0.0);
        assert_eq!(cmd.delta_heading, 0.0);
        // A gentle left turn passes through unclamped.
        let v = Vec2::from_angle(0.3) * 0.5;
        let cmd = velocity_to_command(&robot, v, 1.0);
        assert!((cmd.delta_heading - 0.3).abs() < 1e-12);
        assert!((cmd.speed - 0.5).abs() < 1e-12);
    }

    #[test]
    fn fallback_dodges_an_imminent_head_on_pedestrian() {
        let spec = ScenarioSpec::position_swap();
        let sim = CrowdSim::new(spec, PerturbationSpec::default(), 3).unwrap();
        let mut world = sim.world().clone();
        // Place the pedestrian dead ahead, walking straight at the robot.
        let ahead = Vec2::from_angle(world.robot.heading);
        world.humans[0].position = world.robot.position + ahead * 1.2;
        world.humans[0].velocity = ahead * -1.0;
        world.humans[0].goal = world.robot.position - ahead;
        world.robot.velocity = ahead * world.robot.preferred_speed;
        let cmd = fallback_action(&world, sim.params());
        // The fallback must not barrel straight ahead at full speed.
        assert!(
            cmd.delta_heading.abs() > 1e-3 || cmd.speed < world.robot.preferred_speed - 1e-3,
            "fallback kept course: {cmd:?}"
        );
    }

    #[test]
    fn fallback_with_no_neighbours_heads_for_the_goal() {
        let spec = ScenarioSpec::position_swap();
        let sim = CrowdSim::new(spec, PerturbationSpec::default(), 4).unwrap();
        let mut world = sim.world().clone();
        world.humans.clear();
        let cmd = fallback_action(&world, sim.params());
        assert!((cmd.speed - world.robot.preferred_speed).abs() < 1e-9);
        // Heading already points at the goal at spawn; the planner's tiny
        // symmetry-breaking rotation (1e-6 rad) is the only deviation.
        assert!(cmd.delta_heading.abs() < 1e-5);
    }

    #[test]
    fn nearest_approach_picks_the_closest_human() {
        let env = CrowdSim::new(
            ScenarioSpec {
                human_count: 2,
                ..ScenarioSpec::position_swap()
            },
            PerturbationSpec::default(),
            5,
        )
        .unwrap();
        let world = env.world();
        let (d, dv) = nearest_approach(world);
        let best_by_hand = world
            .humans
            .iter()
            .map(|h| world.robot.surface_distance(h))
            .fold(f64::INFINITY, f64::min);
        assert_eq!(d, best_by_hand);
        // Everyone spawns at rest, so the relative speed is zero.
        assert_eq!(dv, 0.0);

        let empty = WorldState {
            time: 0.0,
            robot: world.robot.clone(),
            humans: Vec::new(),
        };
        let (d, dv) = nearest_approach(&empty);
        assert!(d.is_infinite());
        assert_eq!(dv, 0.0);
    }
}
