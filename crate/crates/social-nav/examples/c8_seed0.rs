use social_nav::harness::{safe_action_comparison, EpisodeOptions, GateConfig, PolicyBundle};
use social_nav::policy::Checkpoint;
use social_nav::safety::{ApproachReading, PocThresholds};
use social_nav::sim::{PerturbationSpec, ScenarioSpec};

fn main() -> anyhow::Result<()> {
    let scenario = ScenarioSpec::position_swap();
    let pert = PerturbationSpec { observation_noise_std: 1.0, ..Default::default() };
    let gate = GateConfig { thresholds: PocThresholds::dropout(), approach: ApproachReading::default() };
    let which: u64 = std::env::args().nth(1).map(|s| s.parse().unwrap()).unwrap_or(0);
    let ck = Checkpoint::load(std::path::Path::new(&format!(
        "/tmp/smoke/full/checkpoint_cfg14418f27da1217e7_seeds{which}.json")))?;
    let bundle = PolicyBundle::Single { policy: ck.policy, bounds: ck.feature_bounds };
    for base in [20_000u64, 30_000] {
        let report = safe_action_comparison(
            std::slice::from_ref(&bundle), &scenario, &pert, 200, gate, base, &EpisodeOptions::default())?;
        let g = &report.groups[0];
        println!("seed {which} base {base}: ungated col {} | gated col {}  (need gated*2 <= ungated: {})",
            g.ungated.collisions, g.gated.collisions,
            if g.gated.collisions * 2 <= g.ungated.collisions { "PASS" } else { "FAIL" });
    }
    Ok(())
}
