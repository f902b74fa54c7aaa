//! Line-delimited episode traces: one JSON record per executed step.
//!
//! Records carry the observable agent states, the commanded action, the
//! reward, and termination/diagnostic flags. When the harness runs
//! uncertainty estimation or the safety gate, their per-step outputs are
//! appended to the same record.

use super::agent::{ActionCommand, AgentState, WorldState};
use super::env::StepInfo;
use super::EpisodeStatus;
use crate::vec2::Vec2;
use serde::{Deserialize, Serialize};
use std::io::{self, BufRead, Write};

/// Observable subset (position, velocity, radius) of one agent.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AgentSnapshot {
    pub position: Vec2,
    pub velocity: Vec2,
    pub radius: f64,
}

impl From<&AgentState> for AgentSnapshot {
    fn from(a: &AgentState) -> Self {
        AgentSnapshot {
            position: a.position,
            velocity: a.velocity,
            radius: a.radius,
        }
    }
}

/// Per-step uncertainty estimates, appended when estimation ran.
/// Two-element arrays are indexed `[speed, heading]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UncertaintyRecord {
    pub epistemic: [f64; 2],
    pub aleatoric: [f64; 2],
    pub feature: f64,
    /// Windowed mean of the heading epistemic term (what the gate reads).
    pub windowed_heading_epistemic: f64,
    /// Windowed mean of the feature term (what the gate reads).
    pub windowed_feature: f64,
}

/// Per-step safety-gate outputs, appended when the gate ran.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SafetyRecord {
    /// Final gate decision: true means the fallback controller acted.
    pub fallback_engaged: bool,
    pub c_epistemic: bool,
    pub c_feature: bool,
    pub c_proximity: bool,
    pub c_approach: bool,
}

/// One executed step.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    pub step: usize,
    /// Episode time after this step (s).
    pub time: f64,
    pub robot: AgentSnapshot,
    pub humans: Vec<AgentSnapshot>,
    pub action: ActionCommand,
    pub reward: f64,
    pub status: EpisodeStatus,
    /// Surface distance to the closest human (m); absent with no humans.
    pub min_human_distance: Option<f64>,
    pub proxemic_violation: bool,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub uncertainty: Option<UncertaintyRecord>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub safety: Option<SafetyRecord>,
}

impl StepRecord {
    /// Assemble a record from the post-step world and the step outputs.
    pub fn new(
        step: usize,
        world: &WorldState,
        action: ActionCommand,
        reward: f64,
        info: &StepInfo,
    ) -> Self {
        StepRecord {
            step,
            time: world.time,
            robot: AgentSnapshot::from(&world.robot),
            humans: world.humans.iter().map(AgentSnapshot::from).collect(),
            action,
            reward,
            status: info.status,
            min_human_distance: info.min_human_distance.is_finite().then_some(info.min_human_distance),
            proxemic_violation: info.proxemic_violation,
            uncertainty: None,
            safety: None,
        }
    }
}

/// Serialize one record per line to any writer.
pub struct TraceWriter<W: Write> {
    inner: W,
}

impl<W: Write> TraceWriter<W> {
    pub fn new(inner: W) -> Self {
        TraceWriter { inner }
    }

    pub fn write(&mut self, record: &StepRecord) -> io::Result<()> {
        let line = serde_json::to_string(record)?;
        self.inner.write_all(line.as_bytes())?;
        self.inner.write_all(b"\n")
    }

    pub fn into_inner(self) -> W {
        self.inner
    }
}

/// Read a whole trace back; tolerates a trailing newline.
pub fn read_trace<R: BufRead>(reader: R) -> io::Result<Vec<StepRecord>> {
    let mut records = Vec::new();
    for line in reader.lines() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        records.push(serde_json::from_str(&line)?);
    }
    Ok(records)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample_record(step: usize) -> StepRecord {
        StepRecord {
            step,
            time: step as f64 * 0.25,
            robot: AgentSnapshot {
                position: Vec2::new(1.0, 2.0),
                velocity: Vec2::new(0.5, 0.0),
                radius: 0.3,
            },
            humans: vec![AgentSnapshot {
                position: Vec2::new(-1.0, 0.0),
                velocity: Vec2::new(0.0, 0.9),
                radius: 0.3,
            }],
            action: ActionCommand {
                speed: 0.7,
                delta_heading: -0.1,
            },
            reward: -0.01,
            status: EpisodeStatus::Running,
            min_human_distance: Some(1.63),
            proxemic_violation: false,
            uncertainty: Some(UncertaintyRecord {
                epistemic: [0.01, 0.02],
                aleatoric: [0.3, 0.4],
                feature: 0.25,
                windowed_heading_epistemic: 0.015,
                windowed_feature: 0.2,
            }),
            safety: Some(SafetyRecord {
                fallback_engaged: false,
                c_epistemic: true,
                c_feature: false,
                c_proximity: false,
                c_approach: true,
            }),
        }
    }

    #[test]
    fn trace_roundtrips_line_by_line() {
        let mut writer = TraceWriter::new(Vec::new());
        let records: Vec<StepRecord> = (0..3).map(sample_record).collect();
        for r in &records {
            writer.write(r).unwrap();
        }
        let bytes = writer.into_inner();
        assert_eq!(bytes.iter().filter(|&&b| b == b'\n').count(), 3);
        let back = read_trace(bytes.as_slice()).unwrap();
        assert_eq!(back, records);
    }

    #[test]
    fn optional_blocks_are_omitted_when_absent() {
        let mut rec = sample_record(0);
        rec.uncertainty = None;
        rec.safety = None;
        let line = serde_json::to_string(&rec).unwrap();
        assert!(!line.contains("uncertainty"));
        assert!(!line.contains("safety"));
        let back: StepRecord = serde_json::from_str(&line).unwrap();
        assert_eq!(back, rec);
    }
}
