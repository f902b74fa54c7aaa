//! Train one navigation policy on the position-swap scenario and save a
//! checkpoint plus the training curve.
//!
//! Usage:
//!   cargo run --release --example train_policy -- [seed] [total_timesteps] [out_dir]
//!
//! Defaults: seed 0, 300000 timesteps, out/train-example. Training stops
//! early once a periodic deterministic evaluation reaches the goal-rate
//! threshold, so most runs finish well before the step budget.

use social_nav::sim::{PerturbationSpec, ScenarioSpec};
use social_nav::harness::{curve_csv, persist};
use social_nav::trainer::{train, TrainConfig};
use std::path::PathBuf;

fn main() -> anyhow::Result<()> {
    let args: Vec<String> = std::env::args().collect();
    let seed: u64 = args.get(1).map_or(Ok(0), |s| s.parse())?;
    let total: u64 = args.get(2).map_or(Ok(300_000), |s| s.parse())?;
    let out_dir = PathBuf::from(args.get(3).map_or("out/train-example", String::as_str));

    let scenario = ScenarioSpec::position_swap();
    let perturbation = PerturbationSpec::default(); // clean training environment
    let config = TrainConfig {
        total_timesteps: total,
        ..TrainConfig::default()
    };

    println!("training seed {seed} for up to {total} steps");
    let start = std::time::Instant::now();
    let report = train(&scenario, &perturbation, &config, seed, |point| {
        if point.timesteps % 2048 == 0 {
            println!(
                "  t={:>7}  episodes={:>5}  return={:>8}  goal={:>5}  collide={:>5}  \
                 pi={:+.4}  v={:.4}  var={:.5}  H={:+.3}",
                point.timesteps,
                point.episodes,
                point
                    .mean_discounted_return
                    .map_or("-".into(), |v| format!("{v:+.3}")),
                point.goal_rate.map_or("-".into(), |v| format!("{v:.2}")),
                point.collision_rate.map_or("-".into(), |v| format!("{v:.2}")),
                point.policy_loss,
                point.value_loss,
                point.variance_loss,
                point.entropy,
            );
        }
    })?;
    let elapsed = start.elapsed();

    println!(
        "done: {} steps, {} episodes, early_stopped={} ({:.1} s, {:.0} steps/s)",
        report.steps_done,
        report.episodes,
        report.early_stopped,
        elapsed.as_secs_f64(),
        report.steps_done as f64 / elapsed.as_secs_f64()
    );
    for eval in &report.evals {
        println!(
            "  eval @ {:>7}: goal {:.2}  collide {:.2}  timeout {:.2}  return {:+.3}",
            eval.timesteps,
            eval.summary.goal_rate,
            eval.summary.collision_rate,
            eval.summary.timeout_rate,
            eval.summary.mean_discounted_return
        );
    }

    std::fs::create_dir_all(&out_dir)?;
    let ckpt_path = out_dir.join(format!("policy_seed{seed}.json"));
    report.checkpoint.save(&ckpt_path)?;
    println!("checkpoint -> {}", ckpt_path.display());

    let curve_path = out_dir.join(format!("curve_seed{seed}.csv"));
    persist(&curve_path, &curve_csv(&report.curve))?;
    println!("curve -> {}", curve_path.display());
    Ok(())
}
