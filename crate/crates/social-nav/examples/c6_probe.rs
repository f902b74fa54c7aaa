use social_nav::harness::{run_episode, EpisodeOptions, PolicyBundle};
use social_nav::policy::Checkpoint;
use social_nav::sim::{PerturbationSpec, ScenarioSpec};

fn probe(bundle: &PolicyBundle, pert: &PerturbationSpec, episodes: u64, base: u64) -> (f64, f64, f64, f64, usize) {
    let scenario = ScenarioSpec::position_swap();
    let opts = EpisodeOptions { estimate: true, ..EpisodeOptions::default() };
    let (mut pe, mut pa, mut steps) = (0.0, 0.0, 0usize);
    let (mut ee, mut ea) = (0.0, 0.0);
    let mut goals = 0usize;
    for i in 0..episodes {
        let r = run_episode(bundle, &scenario, pert, base + i, &opts).unwrap();
        let t = r.uncertainty.as_ref().unwrap();
        pe += t.epistemic[1];
        pa += t.aleatoric[1];
        steps += t.steps;
        let n = t.steps as f64;
        ee += t.epistemic[1] / n;
        ea += t.aleatoric[1] / n;
        if r.status == social_nav::sim::EpisodeStatus::ReachedGoal { goals += 1; }
    }
    let n = episodes as f64;
    (pe / steps as f64, pa / steps as f64, ee / n, ea / n, goals)
}

fn main() -> anyhow::Result<()> {
    let args: Vec<String> = std::env::args().collect();
    let ck = Checkpoint::load(std::path::Path::new(&args[1]))?;
    let episodes: u64 = args.get(2).map(|s| s.parse().unwrap()).unwrap_or(30);
    let base: u64 = args.get(3).map(|s| s.parse().unwrap()).unwrap_or(10_000);
    let bundle = PolicyBundle::Single { policy: ck.policy, bounds: ck.feature_bounds };
    let conditions = [
        ("sigma=0.0", PerturbationSpec::default()),
        ("sigma=2.0", PerturbationSpec { observation_noise_std: 2.0, ..Default::default() }),
        ("N=7 total", PerturbationSpec { extra_humans: 5, ..Default::default() }),
    ];
    for (label, pert) in conditions {
        let (pe, pa, ee, ea, goals) = probe(&bundle, &pert, episodes, base);
        println!("{label}: goals {goals}/{episodes}  pooled ep {pe:.5} al {pa:.5} | episodic ep {ee:.5} al {ea:.5}");
    }
    Ok(())
}
