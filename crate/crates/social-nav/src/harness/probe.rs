//! Stochastic policy probing: the sample sets behind the uncertainty
//! estimators.
//!
//! Two sources exist. Monte-Carlo dropout probes one policy several times
//! with test-rate dropout masks on a frozen `(observation, recurrent state)`
//! pair; the probes are side-effect-free, and the episode's control stream
//! advances only through a separate mask-free pass. An ensemble probes each
//! independently trained member once, mask-free, with every member keeping
//! its own recurrent stream across the episode; member 0 doubles as the
//! control policy.

use crate::policy::{DropoutMode, LstmState, OdvPolicy};
use crate::uncertainty::UncertaintySample;
use rand::Rng;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ProbeError {
    #[error("need at least two probes or members for a spread estimate, got {0}")]
    TooFew(usize),
    #[error("ensemble member {index} does not match member 0's architecture")]
    ArchitectureMismatch { index: usize },
}

/// Draw `k` test-rate dropout probes of `policy` at a fixed observation and
/// recurrent state. The probes never advance the recurrent state; callers
/// run their own mask-free pass for control.
pub fn mc_dropout_samples(
    policy: &OdvPolicy,
    obs: &[f64],
    state: &LstmState,
    k: usize,
    rng: &mut impl Rng,
) -> Result<Vec<UncertaintySample>, ProbeError> {
    if k < 2 {
        return Err(ProbeError::TooFew(k));
    }
    Ok((0..k)
        .map(|_| {
            let out = policy.forward(obs, state, DropoutMode::Test, rng);
            UncertaintySample {
                action_mean: out.action_mean,
                action_variance: out.action_variance,
                features: out.features,
            }
        })
        .collect())
}

/// An ensemble of architecture-identical policies probed once each per step.
#[derive(Debug, Clone)]
pub struct EnsemblePolicies {
    members: Vec<OdvPolicy>,
}

impl EnsemblePolicies {
    /// Validates size (at least two members) and architecture agreement.
    pub fn new(members: Vec<OdvPolicy>) -> Result<Self, ProbeError> {
        if members.len() < 2 {
            return Err(ProbeError::TooFew(members.len()));
        }
        let arch = members[0].arch;
        for (index, m) in members.iter().enumerate().skip(1) {
            if m.arch != arch {
                return Err(ProbeError::ArchitectureMismatch { index });
            }
        }
        Ok(EnsemblePolicies { members })
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn members(&self) -> &[OdvPolicy] {
        &self.members
    }

    /// Member 0, the one whose mean action drives the robot.
    pub fn primary(&self) -> &OdvPolicy {
        &self.members[0]
    }

    /// One zeroed recurrent state per member, for an episode start.
    pub fn fresh_states(&self) -> Vec<LstmState> {
        self.members
            .iter()
            .map(|m| LstmState::zeros(&m.arch))
            .collect()
    }

    /// Forward every member once, mask-free, advancing each member's
    /// recurrent state in place. Sample `i` belongs to member `i`.
    pub fn sample(
        &self,
        obs: &[f64],
        states: &mut [LstmState],
        rng: &mut impl Rng,
    ) -> Vec<UncertaintySample> {
        assert_eq!(states.len(), self.members.len(), "one state per member");
        self.members
            .iter()
            .zip(states.iter_mut())
            .map(|(member, state)| {
                let out = member.forward(obs, state, DropoutMode::Off, rng);
                *state = out.next_state;
                UncertaintySample {
                    action_mean: out.action_mean,
                    action_variance: out.action_variance,
                    features: out.features,
                }
            })
            .collect()
    }
}
