//! Monte-Carlo dropout uncertainty on a single policy: probe the network
//! with stochastic forward passes at each step and decompose the spread
//! into epistemic (model disagreement), aleatoric (predicted action
//! variance), and feature-space components.
//!
//! Usage:
//!   cargo run --release --example dropout_uncertainty -- [checkpoint.json]
//!
//! Give it a trained checkpoint (from `train_policy` or the `train`
//! subcommand) for realistic numbers, or let it quick-train a small policy
//! first. Evaluates matched clean and noise-perturbed episodes, where the
//! noisy ones should show more heading uncertainty.

use std::path::PathBuf;

use social_nav::harness::{run_evaluation, EpisodeOptions, PolicyBundle};
use social_nav::policy::Checkpoint;
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
    println!(
        "policy seed {} after {} training steps\n",
        checkpoint.seed, checkpoint.progress.steps_done
    );

    let bundle = PolicyBundle::Single {
        policy: checkpoint.policy,
        bounds: checkpoint.feature_bounds,
    };
    let opts = EpisodeOptions {
        estimate: true,
        ..EpisodeOptions::default()
    };

    println!("eight matched episodes per condition, twenty probes per step:");
    println!(
        "{:<26} {:>10} {:>10} {:>10} {:>10} {:>10}",
        "condition", "ep_speed", "ep_head", "al_speed", "al_head", "feature"
    );
    for (label, sigma) in [("clean", 0.0), ("obs noise 1.0", 1.0), ("obs noise 2.0", 2.0)] {
        let pert = PerturbationSpec {
            observation_noise_std: sigma,
            ..PerturbationSpec::default()
        };
        let report = run_evaluation(&bundle, &scenario, &pert, 8, 10_000, &opts)?;
        let u = report.uncertainty.as_ref().expect("estimation was on");
        let n = u.steps as f64;
        println!(
            "{:<26} {:>10.2e} {:>10.2e} {:>10.4} {:>10.4} {:>10.2e}   (goal {:.0}%)",
            label,
            u.epistemic[0] / n,
            u.epistemic[1] / n,
            u.aleatoric[0] / n,
            u.aleatoric[1] / n,
            u.feature / n,
            report.goal_pct()
        );
    }
    println!("\nheading epistemic and aleatoric uncertainty should both grow with the noise.");
    Ok(())
}
