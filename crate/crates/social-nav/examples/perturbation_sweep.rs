//! A small disturbance sweep end to end: evaluate one policy across a grid
//! of observation-noise strengths, print how each uncertainty kind
//! responds, and emit the CSV table plus an SVG chart.
//!
//! Usage:
//!   cargo run --release --example perturbation_sweep -- [checkpoint.json] [out_dir]
//!
//! This is the library-level version of the `sweep` subcommand, pared down
//! to a three-point grid and a handful of episodes so it finishes quickly.

use std::path::PathBuf;

use social_nav::harness::{
    ensure_writable, line_chart, persist, perturbation_sweep, sweep_csv, sweep_rates_of_change,
    EpisodeOptions, KindMeans, PolicyBundle, Series, SweepAxis,
};
use social_nav::policy::Checkpoint;
use social_nav::sim::{PerturbationSpec, ScenarioSpec};
use social_nav::trainer::{train, TrainConfig};

fn main() -> anyhow::Result<()> {
    let scenario = ScenarioSpec::position_swap();
    let clean = PerturbationSpec::default();
    let args: Vec<String> = std::env::args().collect();
    let out_dir = PathBuf::from(args.get(2).map_or("out/sweep-example", String::as_str));
    ensure_writable(&out_dir)?;

    let checkpoint = match args.get(1) {
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

    let grid = [0.0, 1.0, 2.0];
    println!("\nsweeping observation noise over {grid:?}, 6 episodes per point:");
    let result = perturbation_sweep(
        &bundle,
        &scenario,
        &clean,
        SweepAxis::ObsNoise,
        &grid,
        6,
        10_000,
        &EpisodeOptions::default(),
    )?;
    for p in &result.points {
        println!(
            "  noise {:>4}: goal {}/{}  epistemic_heading {:.3e}  aleatoric_heading {:.4}",
            p.strength, p.goals, p.episodes, p.mean.epistemic_heading, p.mean.aleatoric_heading
        );
    }
    println!("\nnormalized rates of change, first grid point to last:");
    let rates = sweep_rates_of_change(&result);
    for (label, rate) in KindMeans::LABELS.iter().zip(rates.iter()) {
        match rate {
            Some(r) => println!("  {label:<18} {r:+.3}"),
            None => println!("  {label:<18} undefined (zero baseline)"),
        }
    }

    let csv_path = out_dir.join("sweep_obs_noise.csv");
    persist(&csv_path, &sweep_csv(&result))?;
    let series: Vec<Series> = KindMeans::LABELS
        .iter()
        .enumerate()
        .map(|(k, label)| {
            Series::new(
                *label,
                result
                    .points
                    .iter()
                    .map(|p| (p.strength, p.mean.as_array()[k]))
                    .collect(),
            )
        })
        .collect();
    let svg_path = out_dir.join("sweep_obs_noise.svg");
    persist(
        &svg_path,
        &line_chart("uncertainty vs observation noise", "noise std", "mean uncertainty", &series),
    )?;
    println!("\nwrote {}", csv_path.display());
    println!("wrote {}", svg_path.display());
    Ok(())
}
