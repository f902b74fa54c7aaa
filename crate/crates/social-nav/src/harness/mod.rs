//! Evaluation harness: seeded episode rollouts with per-step uncertainty
//! probes, batch evaluation, perturbation sweeps, gated-versus-ungated
//! safety comparisons, and deterministic CSV / SVG artifact emission.
//!
//! The harness is the glue between the simulator, the policy, the
//! uncertainty estimators, and the safety gate:
//!
//! * [`probe`] draws uncertainty samples from a policy without disturbing
//!   the control stream (dropout probes) or from a set of independently
//!   trained members (ensembles);
//! * [`episode`] runs one fully seeded episode, optionally estimating
//!   uncertainty every step and optionally letting the safety gate override
//!   the policy;
//! * [`eval`] aggregates many episodes into a report;
//! * [`sweep`] re-evaluates under a grid of disturbance strengths and
//!   summarizes how each uncertainty kind responds;
//! * [`safe_eval`] compares matched gated / ungated runs;
//! * [`config`] loads and fingerprints the TOML run configuration;
//! * [`outputs`] and [`plot`] render tables and figures byte-reproducibly.

pub mod config;
pub mod episode;
pub mod eval;
pub mod outputs;
pub mod plot;
pub mod probe;
pub mod safe_eval;
pub mod sweep;

pub use config::{fnv1a64, EvalSettings, HarnessConfig};
pub use episode::{
    run_episode, EpisodeOptions, EpisodeResult, GateConfig, PolicyBundle, UncertaintyTotals,
    PROBE_RNG_SALT,
};
pub use eval::{run_evaluation, EvalReport};
pub use outputs::{
    artifact_name, curve_csv, ensure_writable, episodes_csv, eval_summary_csv, persist, rates_csv,
    safe_eval_csv, seed_tag, status_label, sweep_csv,
};
pub use plot::{line_chart, Series};
pub use probe::{mc_dropout_samples, EnsemblePolicies, ProbeError};
pub use safe_eval::{safe_action_comparison, ArmSummary, GroupComparison, SafeEvalReport};
pub use sweep::{
    normalized_rate_of_change, perturbation_sweep, sweep_rates_of_change, KindMeans, SweepAxis,
    SweepPoint, SweepResult,
};

use crate::policy::CheckpointError;
use crate::sim::SimError;
use crate::trainer::TrainError;
use crate::uncertainty::UncertaintyError;

/// Any failure surfaced by the harness or the command-line front end.
#[derive(Debug, thiserror::Error)]
pub enum HarnessError {
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error(transparent)]
    Probe(#[from] ProbeError),
    #[error(transparent)]
    Uncertainty(#[from] UncertaintyError),
    #[error(transparent)]
    Checkpoint(#[from] CheckpointError),
    #[error(transparent)]
    Train(#[from] TrainError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    /// A configuration value or combination the harness cannot run.
    #[error("configuration error: {0}")]
    Config(String),
    /// The checkpoint was trained for a different observation layout.
    #[error(
        "policy expects {policy} observation values but the environment produces {environment}"
    )]
    ObservationDimMismatch { policy: usize, environment: usize },
    /// An output file could not be written; the content was parked elsewhere.
    #[error("could not write {path} ({source}); content saved to {recovery}")]
    EmitFailed {
        path: String,
        recovery: String,
        source: std::io::Error,
    },
}
