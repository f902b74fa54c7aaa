use social_nav::harness::{run_episode, EpisodeOptions, PolicyBundle};
use social_nav::policy::Checkpoint;
use social_nav::sim::{PerturbationSpec, ScenarioSpec};

fn main() -> anyhow::Result<()> {
    let ck = Checkpoint::load(std::path::Path::new(
        "/tmp/smoke/full/checkpoint_cfg14418f27da1217e7_seeds2.json"))?;
    let bundle = PolicyBundle::Single { policy: ck.policy, bounds: ck.feature_bounds };
    let scenario = ScenarioSpec::position_swap();
    let opts = EpisodeOptions { estimate: true, record: true, ..EpisodeOptions::default() };
    for (label, pert) in [
        ("N=2", PerturbationSpec::default()),
        ("N=7", PerturbationSpec { extra_humans: 5, ..Default::default() }),
    ] {
        let r = run_episode(&bundle, &scenario, &pert, 10_003, &opts)?;
        println!("== {label}: status {:?} steps {}", r.status, r.steps);
        for rec in r.records.iter() {
            if rec.step % 8 != 0 { continue; }
            let u = rec.uncertainty.as_ref().unwrap();
            println!("  step {:>3}  ep_head {:.4}  al_head {:.3}  speed_cmd {:+.2} turn {:+.2}  d {:.2}",
                rec.step, u.epistemic[1], u.aleatoric[1],
                rec.action.speed, rec.action.delta_heading,
                rec.min_human_distance.unwrap_or(f64::INFINITY));
        }
    }
    Ok(())
}
