//! Versioned policy checkpoints.
//!
//! A checkpoint bundles the full policy (architecture, input scaling, and
//! every weight), the training-time feature bounds needed by the dropout
//! feature-uncertainty score, and a progress stamp. Serialized as JSON so
//! checkpoints stay diffable and platform independent.

use super::network::OdvPolicy;
use crate::uncertainty::FeatureBounds;
use serde::{Deserialize, Serialize};
use std::path::Path;

pub const CHECKPOINT_FORMAT_VERSION: u32 = 1;

#[derive(Debug, thiserror::Error)]
pub enum CheckpointError {
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("malformed checkpoint: {0}")]
    Json(#[from] serde_json::Error),
    #[error("unsupported checkpoint format version {found} (expected {CHECKPOINT_FORMAT_VERSION})")]
    UnsupportedVersion { found: u32 },
    #[error("checkpoint expects {expected}-dimensional observations but the environment produces {actual}")]
    ObservationDimMismatch { expected: usize, actual: usize },
}

/// Where training stood when the checkpoint was written.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
pub struct TrainingProgress {
    pub steps_done: u64,
    pub total_steps: u64,
    pub episodes: u64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Checkpoint {
    pub format_version: u32,
    pub seed: u64,
    pub policy: OdvPolicy,
    pub feature_bounds: FeatureBounds,
    pub progress: TrainingProgress,
}

impl Checkpoint {
    pub fn new(
        seed: u64,
        policy: OdvPolicy,
        feature_bounds: FeatureBounds,
        progress: TrainingProgress,
    ) -> Self {
        Checkpoint {
            format_version: CHECKPOINT_FORMAT_VERSION,
            seed,
            policy,
            feature_bounds,
            progress,
        }
    }

    pub fn save(&self, path: &Path) -> Result<(), CheckpointError> {
        if let Some(parent) = path.parent() {
            if !parent.as_os_str().is_empty() {
                std::fs::create_dir_all(parent)?;
            }
        }
        let json = serde_json::to_string(self)?;
        std::fs::write(path, json)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self, CheckpointError> {
        let bytes = std::fs::read(path)?;
        let ckpt: Checkpoint = serde_json::from_slice(&bytes)?;
        if ckpt.format_version != CHECKPOINT_FORMAT_VERSION {
            return Err(CheckpointError::UnsupportedVersion {
                found: ckpt.format_version,
            });
        }
        Ok(ckpt)
    }

    /// Reject a checkpoint whose network cannot consume the given
    /// observation vector length.
    pub fn ensure_observation_dim(&self, actual: usize) -> Result<(), CheckpointError> {
        let expected = self.policy.arch.obs_dim;
        if expected != actual {
            return Err(CheckpointError::ObservationDimMismatch { expected, actual });
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::policy::network::{Architecture, DropoutMode, LstmState};
    use rand::SeedableRng;
    use rand_chacha::ChaCha12Rng;

    fn toy_checkpoint() -> Checkpoint {
        let arch = Architecture {
            obs_dim: 5,
            lstm_hidden: 4,
            actor_hidden: 4,
            action_dim: 2,
        };
        let policy = OdvPolicy::new(arch, 17);
        let mut bounds = FeatureBounds::new(arch.feature_dim());
        bounds.update(&vec![0.5; arch.feature_dim()]);
        bounds.update(&vec![-0.5; arch.feature_dim()]);
        Checkpoint::new(
            17,
            policy,
            bounds,
            TrainingProgress {
                steps_done: 1000,
                total_steps: 2000,
                episodes: 12,
            },
        )
    }

    #[test]
    fn save_load_roundtrip_preserves_behavior() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("ckpt.json");
        let ckpt = toy_checkpoint();
        ckpt.save(&path).unwrap();
        let loaded = Checkpoint::load(&path).unwrap();
        assert_eq!(loaded.format_version, CHECKPOINT_FORMAT_VERSION);
        assert_eq!(loaded.seed, 17);
        assert_eq!(loaded.progress, ckpt.progress);
        assert_eq!(loaded.policy, ckpt.policy);

        // Behavioral equality, not just structural.
        let state = LstmState::zeros(&ckpt.policy.arch);
        let obs = vec![0.3, -0.2, 0.9, 0.0, 0.5];
        let mut rng = ChaCha12Rng::seed_from_u64(0);
        let a = ckpt.policy.forward(&obs, &state, DropoutMode::Off, &mut rng);
        let b = loaded.policy.forward(&obs, &state, DropoutMode::Off, &mut rng);
        assert_eq!(a.action_mean, b.action_mean);
        assert_eq!(a.state_value, b.state_value);
    }

    #[test]
    fn version_mismatch_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("ckpt.json");
        let mut ckpt = toy_checkpoint();
        ckpt.format_version = 99;
        let json = serde_json::to_string(&ckpt).unwrap();
        std::fs::write(&path, json).unwrap();
        match Checkpoint::load(&path) {
            Err(CheckpointError::UnsupportedVersion { found: 99 }) => {}
            other => panic!("expected version error, got {other:?}"),
        }
    }

    #[test]
    fn malformed_json_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("ckpt.json");
        std::fs::write(&path, b"{not json").unwrap();
        assert!(matches!(
            Checkpoint::load(&path),
            Err(CheckpointError::Json(_))
        ));
    }

    #[test]
    fn observation_dim_guard() {
        let ckpt = toy_checkpoint();
        assert!(ckpt.ensure_observation_dim(5).is_ok());
        match ckpt.ensure_observation_dim(35) {
            Err(CheckpointError::ObservationDimMismatch {
                expected: 5,
                actual: 35,
            }) => {}
            other => panic!("expected dim mismatch, got {other:?}"),
        }
    }
}
