//! The harness configuration file: one TOML document with sections for
//! training, the scenario, the perturbation, the gate thresholds, and
//! evaluation bookkeeping. Every field has a default, so an empty file is a
//! valid config, and any partial file overrides only what it names.
//!
//! A configuration hashes to a stable 64-bit fingerprint that output file
//! names embed, so artifacts produced under different settings can never
//! silently collide.

use super::episode::GateConfig;
use super::HarnessError;
use crate::safety::{ApproachReading, PocThresholds};
use crate::sim::{PerturbationSpec, ScenarioSpec};
use crate::trainer::TrainConfig;
use serde::{Deserialize, Serialize};
use std::path::Path;

/// Evaluation-side knobs (not used during training).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EvalSettings {
    /// Episodes per plain evaluation.
    pub episodes: usize,
    /// Episodes per sweep grid point.
    pub sweep_episodes: usize,
    /// Dropout probes per step.
    pub probes: usize,
    /// Training seeds; evaluations and ensembles reuse this list.
    pub seeds: Vec<u64>,
    /// Base seed for evaluation episode streams.
    pub eval_seed: u64,
    /// Smoothing window for windowed uncertainty traces.
    pub window: usize,
    /// Which reading of the approach condition the gate uses.
    pub approach_reading: ApproachReading,
}

impl Default for EvalSettings {
    fn default() -> Self {
        EvalSettings {
            episodes: 50,
            sweep_episodes: 20,
            probes: 20,
            seeds: vec![0, 1, 2, 3, 4],
            eval_seed: 10_000,
            window: 4,
            approach_reading: ApproachReading::ClosingIn,
        }
    }
}

/// The complete harness configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(default)]
pub struct HarnessConfig {
    pub train: TrainConfig,
    pub scenario: ScenarioSpec,
    pub perturbation: PerturbationSpec,
    /// Gate thresholds; absent means "use the per-estimator defaults".
    pub thresholds: Option<PocThresholds>,
    pub eval: EvalSettings,
}

impl HarnessConfig {
    pub fn load(path: &Path) -> Result<Self, HarnessError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| HarnessError::Config(format!("reading {}: {e}", path.display())))?;
        let cfg: HarnessConfig = toml::from_str(&text)
            .map_err(|e| HarnessError::Config(format!("parsing {}: {e}", path.display())))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), HarnessError> {
        self.train
            .validate()
            .map_err(|e| HarnessError::Config(e.to_string()))?;
        self.scenario
            .validate()
            .map_err(|e| HarnessError::Config(e.to_string()))?;
        self.perturbation
            .validate()
            .map_err(|e| HarnessError::Config(e.to_string()))?;
        if self.eval.episodes == 0 || self.eval.sweep_episodes == 0 {
            return Err(HarnessError::Config(
                "evaluation episode counts must be positive".into(),
            ));
        }
        if self.eval.probes < 2 {
            return Err(HarnessError::Config(
                "need at least two probes per step".into(),
            ));
        }
        if self.eval.window == 0 {
            return Err(HarnessError::Config("window must be at least 1".into()));
        }
        if self.eval.seeds.is_empty() {
            return Err(HarnessError::Config("seed list must not be empty".into()));
        }
        Ok(())
    }

    /// Canonical serialized form (the hash input).
    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("config serializes")
    }

    /// Stable fingerprint of the full configuration.
    pub fn hash(&self) -> u64 {
        fnv1a64(self.to_toml().as_bytes())
    }

    /// Restore full-scale counts: 15 seeds and 200 evaluation episodes.
    pub fn apply_paper_scale(&mut self) {
        self.eval.seeds = (0..15).collect();
        self.eval.episodes = 200;
        self.eval.sweep_episodes = 200;
    }

    /// Gate thresholds for a run: the configured override if present,
    /// otherwise the defaults for the chosen estimator family.
    pub fn gate_thresholds(&self, ensemble: bool) -> PocThresholds {
        self.thresholds.unwrap_or(if ensemble {
            PocThresholds::ensemble()
        } else {
            PocThresholds::dropout()
        })
    }

    /// Gate configuration for a run (see [`Self::gate_thresholds`]).
    pub fn gate_config(&self, ensemble: bool) -> GateConfig {
        GateConfig {
            thresholds: self.gate_thresholds(ensemble),
            approach: self.eval.approach_reading,
        }
    }
}

/// 64-bit FNV-1a.
pub fn fnv1a64(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for &b in bytes {
        h ^= u64::from(b);
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}
