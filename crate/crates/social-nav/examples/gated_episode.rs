//! The uncertainty-gated safety layer, step by step: run one noisy episode
//! with the gate armed and print exactly when and why control switches
//! from the policy to the cautious collision-avoidance fallback.
//!
//! Usage:
//!   cargo run --release --example gated_episode -- [checkpoint.json]
//!
//! The gate trips when (high windowed epistemic OR feature uncertainty)
//! AND a human is near on a closing course — all four conditions are
//! shown per firing step. Without a checkpoint a small policy is trained
//! first (20k steps).

use std::path::PathBuf;

use social_nav::harness::{run_episode, EpisodeOptions, GateConfig, PolicyBundle};
use social_nav::policy::Checkpoint;
use social_nav::safety::{ApproachReading, PocThresholds};
use social_nav::sim::{PerturbationSpec, ScenarioSpec};
use social_nav::trainer::{train, TrainConfig};

fn main() -> anyhow::Result<()> {
    let scenario = ScenarioSpec::position_swap();
    let clean = PerturbationSpec::default();
    let checkpoint = match std::env::args().nth(1) {
        Some(path) => Checkpoint::load(&PathBuf::from(path))?,
        None => {
            println!("no checkpoint given; quick-training a small policy (20k steps)...");
            let config = TrainConfig {
                total_timesteps: 20_000,
                eval_interval: 0,
                ..TrainConfig::default()
            };
            train(&scenario, &clean, &config, 0, |_| {})?.checkpoint
        }
    };

    let bundle = PolicyBundle::Single {
        policy: checkpoint.policy,
        bounds: checkpoint.feature_bounds,
    };
    let noisy = PerturbationSpec {
        observation_noise_std: 1.0,
        ..PerturbationSpec::default()
    };
    let gate = GateConfig {
        thresholds: PocThresholds::dropout(),
        approach: ApproachReading::default(),
    };
    let opts = EpisodeOptions {
        gate: Some(gate),
        record: true,
        ..EpisodeOptions::default()
    };

    println!("\none episode under observation noise 1.0, gate armed:");
    let t = gate.thresholds;
    println!(
        "thresholds: epistemic > {}, feature > {}, proximity (d + {}*dv) < {}, window {}\n",
        t.epistemic, t.feature, t.velocity_weight, t.proximity, t.window
    );

    let result = run_episode(&bundle, &scenario, &noisy, 41, &opts)?;
    let mut firings = 0;
    for rec in &result.records {
        if let Some(safety) = &rec.safety {
            if safety.fallback_engaged {
                firings += 1;
                let u = rec.uncertainty.as_ref().expect("gate implies estimation");
                if firings <= 12 {
                    println!(
                        "  step {:>3}  fallback ON   epistemic {:.4} feature {:.3}  d {:.2} m  \
                         [ep {} feat {} prox {} approach {}]",
                        rec.step,
                        u.windowed_heading_epistemic,
                        u.windowed_feature,
                        rec.min_human_distance.unwrap_or(f64::INFINITY),
                        safety.c_epistemic as u8,
                        safety.c_feature as u8,
                        safety.c_proximity as u8,
                        safety.c_approach as u8,
                    );
                }
            }
        }
    }
    if firings > 12 {
        println!("  ... and {} more firing steps", firings - 12);
    }
    println!(
        "\noutcome: {:?} in {} steps; fallback drove {} of them; closest approach {:.2} m",
        result.status, result.steps, result.fallback_steps, result.min_human_distance
    );

    // Same seed, gate off, for contrast.
    let plain = run_episode(
        &bundle,
        &scenario,
        &noisy,
        41,
        &EpisodeOptions::default(),
    )?;
    println!(
        "same seed ungated: {:?} in {} steps; closest approach {:.2} m",
        plain.status, plain.steps, plain.min_human_distance
    );
    Ok(())
}
