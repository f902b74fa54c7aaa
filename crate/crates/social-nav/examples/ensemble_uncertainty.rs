//! Deep-ensemble uncertainty: several independently trained policies vote
//! on each action, and their disagreement is the epistemic signal. Member 0
//! drives the robot; every member keeps its own recurrent state across the
//! episode.
//!
//! Usage:
//!   cargo run --release --example ensemble_uncertainty -- [ckpt1.json ckpt2.json ...]
//!
//! Pass two or more checkpoints trained with different seeds (e.g. from the
//! `train-ensemble` subcommand), or let the example quick-train three small
//! members itself.

use std::path::PathBuf;

use social_nav::harness::{run_evaluation, EnsemblePolicies, EpisodeOptions, PolicyBundle};
use social_nav::policy::Checkpoint;
use social_nav::sim::{PerturbationSpec, ScenarioSpec};
use social_nav::trainer::{train_ensemble, TrainConfig};

fn main() -> anyhow::Result<()> {
    let scenario = ScenarioSpec::position_swap();
    let clean = PerturbationSpec::default();

    let paths: Vec<PathBuf> = std::env::args().skip(1).map(PathBuf::from).collect();
    let members = if paths.is_empty() {
        println!("no checkpoints given; quick-training three small members (12k steps each)...");
        let config = TrainConfig {
            total_timesteps: 12_000,
            eval_interval: 0,
            ..TrainConfig::default()
        };
        let report = train_ensemble(&scenario, &clean, &config, &[0, 1, 2], |seed, r| {
            println!("  member {seed}: {} steps", r.steps_done);
        })?;
        report.members.into_iter().map(|m| m.checkpoint.policy).collect()
    } else {
        anyhow::ensure!(paths.len() >= 2, "an ensemble needs at least two checkpoints");
        let mut members = Vec::new();
        for p in &paths {
            members.push(Checkpoint::load(p)?.policy);
        }
        members
    };

    let ensemble = EnsemblePolicies::new(members)?;
    println!("{} members assembled\n", ensemble.len());
    let bundle = PolicyBundle::Ensemble(ensemble);
    let opts = EpisodeOptions {
        estimate: true,
        ..EpisodeOptions::default()
    };

    println!(
        "{:<26} {:>10} {:>10} {:>10} {:>10}",
        "condition", "ep_speed", "ep_head", "al_head", "feature"
    );
    for (label, pert) in [
        ("clean", PerturbationSpec::default()),
        (
            "obs noise 2.0",
            PerturbationSpec {
                observation_noise_std: 2.0,
                ..PerturbationSpec::default()
            },
        ),
        (
            "3 extra pedestrians",
            PerturbationSpec {
                extra_humans: 3,
                ..PerturbationSpec::default()
            },
        ),
    ] {
        let report = run_evaluation(&bundle, &scenario, &pert, 8, 10_000, &opts)?;
        let u = report.uncertainty.as_ref().expect("estimation was on");
        let n = u.steps as f64;
        println!(
            "{:<26} {:>10.2e} {:>10.2e} {:>10.4} {:>10.2e}   (goal {:.0}%)",
            label,
            u.epistemic[0] / n,
            u.epistemic[1] / n,
            u.aleatoric[1] / n,
            u.feature / n,
            report.goal_pct()
        );
    }
    println!("\nmember disagreement is nonzero even on clean inputs — unlike dropout,");
    println!("an ensemble's epistemic floor reflects genuinely different learned models.");
    Ok(())
}
