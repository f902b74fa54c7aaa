use social_nav::harness::{run_evaluation, EpisodeOptions, PolicyBundle};
use social_nav::policy::Checkpoint;
use social_nav::sim::{PerturbationSpec, ScenarioSpec};

fn main() -> anyhow::Result<()> {
    let scenario = ScenarioSpec::position_swap();
    let pert = PerturbationSpec { observation_noise_std: 1.0, ..Default::default() };
    let opts = EpisodeOptions::default();
    for s in 0..5u64 {
        let ck = Checkpoint::load(std::path::Path::new(&format!(
            "/tmp/smoke/full/checkpoint_cfg14418f27da1217e7_seeds{s}.json")))?;
        let bundle = PolicyBundle::Single { policy: ck.policy, bounds: ck.feature_bounds };
        let r = run_evaluation(&bundle, &scenario, &pert, 200, 10_000, &opts)?;
        println!("seed {s}: goals {} collisions {} timeouts {}  mean return {:.2}  mean min-dist {:.3}",
            r.goals, r.collisions, r.timeouts, r.mean_return, r.mean_min_distance);
    }
    Ok(())
}
