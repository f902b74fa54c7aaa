//! Scenario and perturbation descriptions plus seeded world sampling.

use super::agent::{AgentState, WorldState};
use super::SimError;
use crate::vec2::Vec2;
use rand::Rng;
use serde::{Deserialize, Serialize};

/// Minimum surface clearance between spawned agents (m).
pub const SPAWN_CLEARANCE: f64 = 0.2;
/// Resampling budget per agent before the scenario is declared infeasible.
pub const MAX_SPAWN_ATTEMPTS: usize = 100;

/// Geometric layout of an episode.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScenarioKind {
    /// Robot and first human start antipodally on a circle and swap
    /// positions; additional humans cross the same circle.
    PositionSwap,
    /// Robot crosses between a fixed vertical start/goal pair while humans
    /// stream across horizontally.
    CircleInteraction,
    /// Everyone starts on the circle at a random angle and crosses to the
    /// antipode.
    CircleCrossing,
    /// Uniformly random starts and goals inside a square arena.
    Random,
}

/// Static description of an episode family. Sampling a concrete start state
/// additionally needs a seed and a [`PerturbationSpec`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ScenarioSpec {
    pub kind: ScenarioKind,
    /// Humans present before any perturbation adds more.
    pub human_count: usize,
    /// Circle radius (m), or half the arena side for [`ScenarioKind::Random`].
    pub circle_radius: f64,
    /// Uniform range for every agent's preferred speed (m/s).
    pub speed_range: (f64, f64),
    /// Uniform range for each human's personal-space radius (m).
    pub proxemic_range: (f64, f64),
    /// Disc radius of every agent (m).
    pub agent_radius: f64,
    /// Episode time limit (s).
    pub time_limit: f64,
    /// Human blocks in the observation vector (zero-padded).
    pub max_observed_humans: usize,
}

impl Default for ScenarioSpec {
    fn default() -> Self {
        ScenarioSpec::position_swap()
    }
}

impl ScenarioSpec {
    /// The training scenario: one human, antipodal swap on a 7 m circle,
    /// tight personal-space radii, 30 s limit.
    pub fn position_swap() -> Self {
        ScenarioSpec {
            kind: ScenarioKind::PositionSwap,
            human_count: 1,
            circle_radius: 7.0,
            speed_range: (0.5, 1.0),
            proxemic_range: (0.3, 0.4),
            agent_radius: 0.3,
            time_limit: 30.0,
            max_observed_humans: 6,
        }
    }

    pub fn circle_interaction(human_count: usize) -> Self {
        ScenarioSpec {
            kind: ScenarioKind::CircleInteraction,
            human_count,
            circle_radius: 4.0,
            proxemic_range: (0.3, 0.7),
            time_limit: 50.0,
            ..ScenarioSpec::position_swap()
        }
    }

    pub fn circle_crossing(human_count: usize) -> Self {
        ScenarioSpec {
            kind: ScenarioKind::CircleCrossing,
            human_count,
            circle_radius: 4.0,
            proxemic_range: (0.3, 0.7),
            time_limit: 50.0,
            ..ScenarioSpec::position_swap()
        }
    }

    pub fn random_arena(human_count: usize) -> Self {
        ScenarioSpec {
            kind: ScenarioKind::Random,
            human_count,
            circle_radius: 4.0,
            proxemic_range: (0.3, 0.7),
            time_limit: 50.0,
            ..ScenarioSpec::position_swap()
        }
    }

    pub fn validate(&self) -> Result<(), SimError> {
        let ranges_ok = self.speed_range.0 > 0.0
            && self.speed_range.1 >= self.speed_range.0
            && self.proxemic_range.0 >= 0.0
            && self.proxemic_range.1 >= self.proxemic_range.0;
        if !ranges_ok {
            return Err(SimError::InvalidSpec(format!(
                "bad sampling ranges: speed {:?}, proxemic {:?}",
                self.speed_range, self.proxemic_range
            )));
        }
        if self.kind == ScenarioKind::PositionSwap && self.human_count == 0 {
            return Err(SimError::InvalidSpec(
                "position swap needs at least one human".into(),
            ));
        }
        if self.circle_radius <= 2.0 * self.agent_radius {
            return Err(SimError::InvalidSpec(format!(
                "circle radius {} too small for agent radius {}",
                self.circle_radius, self.agent_radius
            )));
        }
        if self.agent_radius <= 0.0 || self.time_limit <= 0.0 || self.max_observed_humans == 0 {
            return Err(SimError::InvalidSpec(
                "agent radius, time limit, and observed-human count must be positive".into(),
            ));
        }
        Ok(())
    }
}

/// Controlled disturbances applied on top of a scenario.
///
/// `observation_noise_std` corrupts every observation entry; heading and
/// velocity noise corrupt the executed action; `human_speed_multiplier`
/// uniformly scales human preferred speeds; `extra_humans` join the scenario
/// at reset.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PerturbationSpec {
    /// Std-dev of i.i.d. Gaussian noise added to each observation entry.
    pub observation_noise_std: f64,
    /// Std-dev (rad) of Gaussian noise added to the executed heading change.
    pub heading_noise_std: f64,
    /// Executed speed is scaled by `u ~ U(1 - velocity_scale_noise, 1)`.
    pub velocity_scale_noise: f64,
    /// Multiplier (>= 1) on every human's preferred speed.
    pub human_speed_multiplier: f64,
    /// Additional humans spawned at reset.
    pub extra_humans: usize,
}

impl Default for PerturbationSpec {
    fn default() -> Self {
        PerturbationSpec {
            observation_noise_std: 0.0,
            heading_noise_std: 0.0,
            velocity_scale_noise: 0.0,
            human_speed_multiplier: 1.0,
            extra_humans: 0,
        }
    }
}

impl PerturbationSpec {
    pub fn validate(&self) -> Result<(), SimError> {
        let ok = self.observation_noise_std >= 0.0
            && self.heading_noise_std >= 0.0
            && self.velocity_scale_noise >= 0.0
            && self.human_speed_multiplier >= 1.0;
        if ok {
            Ok(())
        } else {
            Err(SimError::InvalidSpec(format!(
                "perturbation fields out of range: {self:?}"
            )))
        }
    }

    pub fn is_clean(&self) -> bool {
        *self == PerturbationSpec::default()
    }
}

fn base_agent(spec: &ScenarioSpec, position: Vec2, goal: Vec2, rng: &mut impl Rng) -> AgentState {
    let preferred_speed = rng.gen_range(spec.speed_range.0..=spec.speed_range.1);
    let proxemic_radius = rng.gen_range(spec.proxemic_range.0..=spec.proxemic_range.1);
    AgentState {
        position,
        velocity: Vec2::ZERO,
        radius: spec.agent_radius,
        goal,
        preferred_speed,
        heading: (goal - position).angle(),
        proxemic_radius,
    }
}

fn clear_of(others: &[&AgentState], candidate: Vec2, radius: f64) -> bool {
    others.iter().all(|o| {
        candidate.distance(o.position) - radius - o.radius >= SPAWN_CLEARANCE
    })
}

/// Rejection-sample a start position; errors with
/// [`SimError::ScenarioInfeasible`] once the attempt budget is exhausted.
fn sample_clear_position(
    placed: &[&AgentState],
    radius: f64,
    rng: &mut impl Rng,
    mut propose: impl FnMut(&mut dyn rand::RngCore) -> (Vec2, Vec2),
) -> Result<(Vec2, Vec2), SimError> {
    for _ in 0..MAX_SPAWN_ATTEMPTS {
        let (start, goal) = propose(rng);
        if clear_of(placed, start, radius) {
            return Ok((start, goal));
        }
    }
    Err(SimError::ScenarioInfeasible {
        attempts: MAX_SPAWN_ATTEMPTS,
    })
}

/// Sample a concrete start state for `spec` under `perturbation`.
///
/// Deterministic in the rng stream: identical (spec, perturbation, seed)
/// triples produce bit-identical worlds.
pub fn sample_world(
    spec: &ScenarioSpec,
    perturbation: &PerturbationSpec,
    rng: &mut impl Rng,
) -> Result<WorldState, SimError> {
    spec.validate()?;
    perturbation.validate()?;

    let total_humans = spec.human_count + perturbation.extra_humans;
    let r = spec.circle_radius;

    let mut humans: Vec<AgentState> = Vec::with_capacity(total_humans);
    let robot;

    match spec.kind {
        ScenarioKind::PositionSwap => {
            // The first human's position fixes the axis; the robot takes the
            // antipode and they swap.
            let angle = rng.gen_range(0.0..std::f64::consts::TAU);
            let h_start = Vec2::from_angle(angle) * r;
            humans.push(base_agent(spec, h_start, -h_start, rng));
            robot = base_agent(spec, -h_start, h_start, rng);
            for _ in 1..total_humans {
                let placed: Vec<&AgentState> =
                    humans.iter().chain(std::iter::once(&robot)).collect();
                let (start, goal) = sample_clear_position(&placed, spec.agent_radius, rng, |rng| {
                    let a = rng.gen_range(0.0..std::f64::consts::TAU);
                    let s = Vec2::from_angle(a) * r;
                    (s, -s)
                })?;
                humans.push(base_agent(spec, start, goal, rng));
            }
        }
        ScenarioKind::CircleCrossing => {
            let angle = rng.gen_range(0.0..std::f64::consts::TAU);
            let start = Vec2::from_angle(angle) * r;
            robot = base_agent(spec, start, -start, rng);
            for _ in 0..total_humans {
                let placed: Vec<&AgentState> =
                    humans.iter().chain(std::iter::once(&robot)).collect();
                let (start, goal) = sample_clear_position(&placed, spec.agent_radius, rng, |rng| {
                    let a = rng.gen_range(0.0..std::f64::consts::TAU);
                    let s = Vec2::from_angle(a) * r;
                    (s, -s)
                })?;
                humans.push(base_agent(spec, start, goal, rng));
            }
        }
        ScenarioKind::CircleInteraction => {
            // Robot travels vertically between a fixed pair; humans stream
            // across horizontal arcs, crossing its path.
            let bottom_up: bool = rng.gen();
            let (start, goal) = if bottom_up {
                (Vec2::new(0.0, -r), Vec2::new(0.0, r))
            } else {
                (Vec2::new(0.0, r), Vec2::new(0.0, -r))
            };
            robot = base_agent(spec, start, goal, rng);
            for _ in 0..total_humans {
                let placed: Vec<&AgentState> =
                    humans.iter().chain(std::iter::once(&robot)).collect();
                let (start, goal) = sample_clear_position(&placed, spec.agent_radius, rng, |rng| {
                    let left: bool = rng.gen();
                    let base = if left { std::f64::consts::PI } else { 0.0 };
                    let a = base + rng.gen_range(-std::f64::consts::FRAC_PI_4..std::f64::consts::FRAC_PI_4);
                    let s = Vec2::from_angle(a) * r;
                    (s, -s)
                })?;
                humans.push(base_agent(spec, start, goal, rng));
            }
        }
        ScenarioKind::Random => {
            let sample_pair = |rng: &mut dyn rand::RngCore| {
                let start = Vec2::new(rng.gen_range(-r..r), rng.gen_range(-r..r));
                // Re-draw goals too close to the start so every episode
                // involves actual travel.
                let mut goal = start;
                for _ in 0..MAX_SPAWN_ATTEMPTS {
                    goal = Vec2::new(rng.gen_range(-r..r), rng.gen_range(-r..r));
                    if goal.distance(start) >= r {
                        break;
                    }
                }
                (start, goal)
            };
            let (start, goal) = sample_clear_position(&[], spec.agent_radius, rng, sample_pair)?;
            robot = base_agent(spec, start, goal, rng);
            for _ in 0..total_humans {
                let placed: Vec<&AgentState> =
                    humans.iter().chain(std::iter::once(&robot)).collect();
                let (start, goal) =
                    sample_clear_position(&placed, spec.agent_radius, rng, sample_pair)?;
                humans.push(base_agent(spec, start, goal, rng));
            }
        }
    }

    for h in &mut humans {
        h.preferred_speed *= perturbation.human_speed_multiplier;
    }

    let world = WorldState {
        time: 0.0,
        robot,
        humans,
    };
    debug_assert!(world.robot.is_valid() && world.humans.iter().all(AgentState::is_valid));
    Ok(world)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha12Rng;

    fn sample(spec: &ScenarioSpec, pert: &PerturbationSpec, seed: u64) -> WorldState {
        let mut rng = ChaCha12Rng::seed_from_u64(seed);
        sample_world(spec, pert, &mut rng).expect("sampling must succeed")
    }

    #[test]
    fn position_swap_is_antipodal_with_swapped_goals() {
        let spec = ScenarioSpec::position_swap();
        let world = sample(&spec, &PerturbationSpec::default(), 7);
        assert_eq!(world.humans.len(), 1);
        let h = &world.humans[0];
        assert!((world.robot.position + h.position).norm() < 1e-9);
        assert!((world.robot.goal - h.position).norm() < 1e-9);
        assert!((h.goal - world.robot.position).norm() < 1e-9);
        assert!((h.position.norm() - 7.0).abs() < 1e-9);
    }

    #[test]
    fn sampling_is_deterministic_per_seed() {
        let spec = ScenarioSpec::circle_crossing(4);
        let a = sample(&spec, &PerturbationSpec::default(), 123);
        let b = sample(&spec, &PerturbationSpec::default(), 123);
        assert_eq!(format!("{a:?}"), format!("{b:?}"));
        let c = sample(&spec, &PerturbationSpec::default(), 124);
        assert_ne!(format!("{a:?}"), format!("{c:?}"));
    }

    #[test]
    fn extra_humans_join_the_scenario() {
        let spec = ScenarioSpec::position_swap();
        let pert = PerturbationSpec {
            extra_humans: 3,
            ..PerturbationSpec::default()
        };
        let world = sample(&spec, &pert, 9);
        assert_eq!(world.humans.len(), 4);
        for h in &world.humans {
            assert!((h.position.norm() - 7.0).abs() < 1e-9);
            assert!((h.goal + h.position).norm() < 1e-9);
        }
    }

    #[test]
    fn spawn_clearance_is_respected() {
        let spec = ScenarioSpec::circle_crossing(5);
        for seed in 0..50 {
            let world = sample(&spec, &PerturbationSpec::default(), seed);
            let mut all: Vec<&AgentState> = world.humans.iter().collect();
            all.push(&world.robot);
            for i in 0..all.len() {
                for j in (i + 1)..all.len() {
                    assert!(
                        all[i].surface_distance(all[j]) >= SPAWN_CLEARANCE - 1e-9,
                        "seed {seed}: agents {i} and {j} too close"
                    );
                }
            }
        }
    }

    #[test]
    fn speed_multiplier_scales_human_preferred_speeds() {
        let spec = ScenarioSpec::position_swap();
        let clean = sample(&spec, &PerturbationSpec::default(), 42);
        let scaled = sample(
            &spec,
            &PerturbationSpec {
                human_speed_multiplier: 3.0,
                ..PerturbationSpec::default()
            },
            42,
        );
        assert!(
            (scaled.humans[0].preferred_speed - 3.0 * clean.humans[0].preferred_speed).abs()
                < 1e-12
        );
        // The robot's own preference is untouched.
        assert!((scaled.robot.preferred_speed - clean.robot.preferred_speed).abs() < 1e-12);
    }

    #[test]
    fn speeds_and_proxemics_come_from_the_configured_ranges() {
        let spec = ScenarioSpec::circle_crossing(6);
        for seed in 0..20 {
            let world = sample(&spec, &PerturbationSpec::default(), seed);
            for h in &world.humans {
                assert!(h.preferred_speed >= 0.5 && h.preferred_speed <= 1.0);
                assert!(h.proxemic_radius >= 0.3 && h.proxemic_radius <= 0.7);
            }
        }
    }

    #[test]
    fn overcrowded_scenario_reports_infeasible() {
        let spec = ScenarioSpec {
            human_count: 200,
            ..ScenarioSpec::circle_crossing(200)
        };
        let mut rng = ChaCha12Rng::seed_from_u64(0);
        match sample_world(&spec, &PerturbationSpec::default(), &mut rng) {
            Err(SimError::ScenarioInfeasible { attempts }) => {
                assert_eq!(attempts, MAX_SPAWN_ATTEMPTS)
            }
            other => panic!("expected infeasible, got {other:?}"),
        }
    }

    #[test]
    fn invalid_specs_are_rejected() {
        let mut spec = ScenarioSpec::position_swap();
        spec.speed_range = (0.0, 1.0);
        assert!(matches!(spec.validate(), Err(SimError::InvalidSpec(_))));

        let pert = PerturbationSpec {
            human_speed_multiplier: 0.5,
            ..PerturbationSpec::default()
        };
        assert!(matches!(pert.validate(), Err(SimError::InvalidSpec(_))));
    }
}
