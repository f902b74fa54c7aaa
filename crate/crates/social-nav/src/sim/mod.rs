//! Crowd simulation: agents, scenarios, perturbations, stepping, reward, and
//! episode traces.

mod agent;
mod env;
mod noise;
mod reward;
mod scenario;
mod trace;

pub use agent::{
    observation_dim, ActionCommand, AgentState, Observation, WorldState, HUMAN_BLOCK_DIM,
    ROBOT_BLOCK_DIM,
};
pub use env::{CrowdSim, SimParams, StepInfo, StepOutput};
pub use noise::{apply_action_noise, apply_observation_noise};
pub use reward::{compute_reward, RewardInputs, RewardParams};
pub use scenario::{
    sample_world, PerturbationSpec, ScenarioKind, ScenarioSpec, MAX_SPAWN_ATTEMPTS,
    SPAWN_CLEARANCE,
};
pub use trace::{
    read_trace, AgentSnapshot, SafetyRecord, StepRecord, TraceWriter, UncertaintyRecord,
};

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// How (or whether) an episode ended.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EpisodeStatus {
    Running,
    ReachedGoal,
    Collision,
    Timeout,
}

impl EpisodeStatus {
    pub fn is_terminal(self) -> bool {
        self != EpisodeStatus::Running
    }
}

#[derive(Debug, Error)]
pub enum SimError {
    #[error("invalid scenario or perturbation: {0}")]
    InvalidSpec(String),
    #[error("could not place agents with the required clearance after {attempts} attempts")]
    ScenarioInfeasible { attempts: usize },
    #[error("episode already finished; construct a new environment to continue")]
    EpisodeFinished,
    #[error("action contained a non-finite component")]
    NonFiniteAction,
}
