use social_nav::harness::{safe_action_comparison, EpisodeOptions, GateConfig, PolicyBundle};
use social_nav::policy::Checkpoint;
use social_nav::safety::{ApproachReading, PocThresholds};
use social_nav::sim::{PerturbationSpec, ScenarioSpec};

fn main() -> anyhow::Result<()> {
    let scenario = ScenarioSpec::position_swap();
    let pert = PerturbationSpec { observation_noise_std: 1.0, ..Default::default() };
    let gate = GateConfig { thresholds: PocThresholds::dropout(), approach: ApproachReading::default() };
    let bundles: Vec<PolicyBundle> = (0..5u64)
        .map(|s| {
            let ck = Checkpoint::load(std::path::Path::new(&format!(
                "/tmp/smoke/full/checkpoint_cfg14418f27da1217e7_seeds{s}.json"))).unwrap();
            PolicyBundle::Single { policy: ck.policy, bounds: ck.feature_bounds }
        })
        .collect();
    let t0 = std::time::Instant::now();
    let report = safe_action_comparison(&bundles, &scenario, &pert, 200, gate, 10_000, &EpisodeOptions::default())?;
    let (mut off, mut on) = (0, 0);
    for g in &report.groups {
        println!(
            "group {}: ungated col {} goal {} timeout {} | gated col {} goal {} timeout {}  fallback steps/ep {:.1}",
            g.group, g.ungated.collisions, g.ungated.goals, g.ungated.timeouts,
            g.gated.collisions, g.gated.goals, g.gated.timeouts, g.gated.mean_fallback_steps);
        off += g.ungated.collisions;
        on += g.gated.collisions;
    }
    println!("pooled: ungated {off} gated {on}  ({:.0?})", t0.elapsed());
    Ok(())
}
