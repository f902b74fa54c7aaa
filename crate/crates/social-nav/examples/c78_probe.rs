use social_nav::harness::{
    perturbation_sweep, safe_action_comparison, sweep_rates_of_change, EnsemblePolicies,
    EpisodeOptions, GateConfig, KindMeans, PolicyBundle, SweepAxis,
};
use social_nav::policy::Checkpoint;
use social_nav::safety::{ApproachReading, PocThresholds};
use social_nav::sim::{PerturbationSpec, ScenarioSpec};

fn load(seed: u64) -> Checkpoint {
    Checkpoint::load(std::path::Path::new(&format!(
        "/tmp/smoke/full/checkpoint_cfg14418f27da1217e7_seeds{seed}.json"
    )))
    .unwrap()
}

fn main() -> anyhow::Result<()> {
    let scenario = ScenarioSpec::position_swap();
    let opts = EpisodeOptions::default();
    let ck = load(4);
    let dropout = PolicyBundle::Single { policy: ck.policy, bounds: ck.feature_bounds };

    // --- C8: matched-seed gate comparison at sigma_obs = 1.0, 200 episodes.
    let pert = PerturbationSpec { observation_noise_std: 1.0, ..Default::default() };
    let gate = GateConfig { thresholds: PocThresholds::dropout(), approach: ApproachReading::default() };
    let t0 = std::time::Instant::now();
    let report = safe_action_comparison(
        std::slice::from_ref(&dropout), &scenario, &pert, 200, gate, 10_000, &opts)?;
    let g = &report.groups[0];
    println!(
        "C8 seed4: ungated collisions {} goals {}  | gated collisions {} goals {}  ({:.0?})",
        g.ungated.collisions, g.ungated.goals, g.gated.collisions, g.gated.goals, t0.elapsed());

    // --- C7: obs-noise rates, dropout vs 5-member ensemble.
    let members: Vec<Checkpoint> = [0u64, 1, 2, 3, 4].iter().map(|&s| load(s)).collect();
    let ensemble = PolicyBundle::Ensemble(EnsemblePolicies::new(
        members.iter().map(|c| c.policy.clone()).collect())?);
    let grid = [0.0, 2.0];
    let base = PerturbationSpec::default();
    for (label, bundle) in [("dropout ", &dropout), ("ensemble", &ensemble)] {
        let t = std::time::Instant::now();
        let sweep = perturbation_sweep(
            bundle, &scenario, &base, SweepAxis::ObsNoise, &grid, 20, 10_000, &opts)?;
        let rates = sweep_rates_of_change(&sweep);
        let zero = sweep.points[0].mean.as_array();
        print!("C7 {label}: zero-pert means ");
        for (l, v) in KindMeans::LABELS.iter().zip(zero) { print!("{l}={v:.4} "); }
        println!();
        print!("C7 {label}: rates ");
        for (l, r) in KindMeans::LABELS.iter().zip(rates) {
            match r { Some(r) => print!("{l}={r:+.3} "), None => print!("{l}=None ") }
        }
        println!(" ({:.0?})", t.elapsed());
    }
    Ok(())
}
