//! Command-line front end: train policies, evaluate checkpoints, sweep
//! disturbance strengths, compare gated against ungated runs, and render
//! CSV tables to SVG charts.
//!
//! Every run is fully determined by the configuration file and the explicit
//! seed flags — rerunning a command reproduces its artifacts byte for byte.
//! Artifact names embed the configuration fingerprint and the seed list so
//! outputs from different runs never collide silently.

use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};

use social_nav::harness::{
    artifact_name, curve_csv, ensure_writable, episodes_csv, eval_summary_csv, line_chart, persist,
    rates_csv, run_evaluation, safe_action_comparison, safe_eval_csv, sweep_csv,
    sweep_rates_of_change, EnsemblePolicies, EpisodeOptions, HarnessConfig, HarnessError,
    PolicyBundle, Series, SweepAxis,
};
use social_nav::policy::Checkpoint;
use social_nav::sim::observation_dim;
use social_nav::trainer::{train, CurvePoint, EvalPoint};

#[derive(Parser)]
#[command(
    name = "social-nav",
    version,
    about = "Uncertainty-aware social robot navigation: training, evaluation, sweeps, and safety gating"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

/// Flags shared by every computing subcommand.
#[derive(Args, Clone)]
struct Common {
    /// TOML run configuration; built-in defaults are used when absent.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Directory artifacts are written to (created if missing).
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Evaluate at publication scale: 15 seeds and 200 episodes per point
    /// instead of the desk-scale 5 and 50.
    #[arg(long)]
    paper_scale: bool,
}

/// Which uncertainty source interprets the checkpoint list.
#[derive(Debug, Copy, Clone, PartialEq, Eq, ValueEnum)]
enum Estimator {
    /// One checkpoint; uncertainty from stochastic forward passes.
    Dropout,
    /// Two or more checkpoints acting as one ensemble; member 0 drives.
    Ensemble,
}

#[derive(Subcommand)]
enum Command {
    /// Train one policy and save its checkpoint and training curve.
    Train {
        #[command(flatten)]
        common: Common,
        /// Training seed (weights, environment stream, mask draws).
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Train one policy per seed, sequentially, as ensemble members.
    TrainEnsemble {
        #[command(flatten)]
        common: Common,
        /// Member seeds, comma separated; defaults to the configured
        /// evaluation seed list.
        #[arg(long, value_delimiter = ',')]
        seeds: Option<Vec<u64>>,
    },
    /// Evaluate a checkpoint (or ensemble) with per-step uncertainty.
    Eval {
        #[command(flatten)]
        common: Common,
        /// Checkpoint file; repeat the flag for ensemble members.
        #[arg(long, required = true)]
        checkpoint: Vec<PathBuf>,
        #[arg(long, value_enum, default_value_t = Estimator::Dropout)]
        uncertainty: Estimator,
        /// Base seed for the evaluation episode stream (episode i uses
        /// base + i); defaults to the configured value.
        #[arg(long)]
        seed: Option<u64>,
        /// Run with the safety gate engaged.
        #[arg(long)]
        gate: bool,
        /// Skip the per-step uncertainty probes (plain metric evaluation).
        #[arg(long)]
        skip_uncertainty: bool,
    },
    /// Re-evaluate along a disturbance axis and report how each
    /// uncertainty kind responds.
    Sweep {
        #[command(flatten)]
        common: Common,
        #[arg(long, required = true)]
        checkpoint: Vec<PathBuf>,
        #[arg(long, value_enum, default_value_t = Estimator::Dropout)]
        uncertainty: Estimator,
        /// Axis: obs_noise, action_noise, velocity_scale, or human_count.
        #[arg(long)]
        axis: String,
        /// Strength grid, comma separated and strictly increasing;
        /// defaults to the axis's standard grid.
        #[arg(long, value_delimiter = ',')]
        grid: Option<Vec<f64>>,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Matched gated / ungated comparison: same seeds, same disturbances,
    /// the only difference is the safety gate.
    SafeEval {
        #[command(flatten)]
        common: Common,
        /// With dropout: each checkpoint is one comparison group. With
        /// ensemble: all checkpoints form a single ensemble group.
        #[arg(long, required = true)]
        checkpoint: Vec<PathBuf>,
        #[arg(long, value_enum, default_value_t = Estimator::Dropout)]
        uncertainty: Estimator,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Render columns of one or more CSV files as an SVG line chart
    /// (one series per input file).
    Plot {
        /// CSV file; repeat for several series.
        #[arg(long, required = true)]
        input: Vec<PathBuf>,
        /// Column name for the horizontal axis.
        #[arg(long)]
        x: String,
        /// Column name for the vertical axis.
        #[arg(long)]
        y: String,
        #[arg(long)]
        title: Option<String>,
        /// Output SVG path.
        #[arg(long)]
        out: PathBuf,
    },
}

fn main() {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Train { common, seed } => cmd_train(&common, seed),
        Command::TrainEnsemble { common, seeds } => cmd_train_ensemble(&common, seeds),
        Command::Eval {
            common,
            checkpoint,
            uncertainty,
            seed,
            gate,
            skip_uncertainty,
        } => cmd_eval(&common, &checkpoint, uncertainty, seed, gate, skip_uncertainty),
        Command::Sweep {
            common,
            checkpoint,
            uncertainty,
            axis,
            grid,
            seed,
        } => cmd_sweep(&common, &checkpoint, uncertainty, &axis, grid, seed),
        Command::SafeEval {
            common,
            checkpoint,
            uncertainty,
            seed,
        } => cmd_safe_eval(&common, &checkpoint, uncertainty, seed),
        Command::Plot {
            input,
            x,
            y,
            title,
            out,
        } => cmd_plot(&input, &x, &y, title.as_deref(), &out),
    };
    if let Err(e) = result {
        eprintln!("error: {e}");
        std::process::exit(1);
    }
}

fn load_config(common: &Common) -> Result<HarnessConfig, HarnessError> {
    let mut cfg = match &common.config {
        Some(path) => HarnessConfig::load(path)?,
        None => HarnessConfig::default(),
    };
    if common.paper_scale {
        cfg.apply_paper_scale();
    }
    cfg.validate()?;
    Ok(cfg)
}

/// Load checkpoints and assemble the policy bundle the estimator choice
/// implies, rejecting mismatched counts and observation layouts up front.
fn build_bundle(
    paths: &[PathBuf],
    estimator: Estimator,
    obs_dim: usize,
) -> Result<(PolicyBundle, Vec<u64>), HarnessError> {
    let mut checkpoints = Vec::with_capacity(paths.len());
    for path in paths {
        let ck = Checkpoint::load(path)?;
        ck.ensure_observation_dim(obs_dim)?;
        checkpoints.push(ck);
    }
    let seeds: Vec<u64> = checkpoints.iter().map(|c| c.seed).collect();
    let bundle = match estimator {
        Estimator::Dropout => {
            if checkpoints.len() != 1 {
                return Err(HarnessError::Config(format!(
                    "dropout estimation takes exactly one checkpoint, got {}",
                    checkpoints.len()
                )));
            }
            let ck = checkpoints.pop().expect("length checked");
            PolicyBundle::Single {
                policy: ck.policy,
                bounds: ck.feature_bounds,
            }
        }
        Estimator::Ensemble => {
            let members = checkpoints.into_iter().map(|c| c.policy).collect();
            PolicyBundle::Ensemble(EnsemblePolicies::new(members)?)
        }
    };
    Ok((bundle, seeds))
}

fn episode_options(cfg: &HarnessConfig) -> EpisodeOptions {
    EpisodeOptions {
        gamma: cfg.train.gamma,
        probes: cfg.eval.probes,
        estimate: false,
        window: cfg.eval.window,
        gate: None,
        record: false,
    }
}

fn print_curve_progress(p: &CurvePoint) {
    let ret = p
        .mean_discounted_return
        .map_or_else(|| "   -  ".into(), |v| format!("{v:6.2}"));
    let goal = p.goal_rate.map_or_else(|| "  - ".into(), |v| format!("{:4.0}%", v * 100.0));
    println!(
        "  step {:>7}  return {ret}  goal {goal}  policy_loss {:>8.4}  value_loss {:>8.3}  kl {:.4}",
        p.timesteps, p.policy_loss, p.value_loss, p.approx_kl
    );
}

fn print_eval_points(evals: &[EvalPoint]) {
    for e in evals {
        println!(
            "  eval @ {:>7}: goal {:.0}%  collision {:.0}%  timeout {:.0}%  return {:.2}",
            e.timesteps,
            e.summary.goal_rate * 100.0,
            e.summary.collision_rate * 100.0,
            e.summary.timeout_rate * 100.0,
            e.summary.mean_discounted_return
        );
    }
}

fn cmd_train(common: &Common, seed: u64) -> Result<(), HarnessError> {
    let cfg = load_config(common)?;
    ensure_writable(&common.out)?;
    let hash = cfg.hash();
    println!("training seed {seed} (config {hash:016x})");
    let started = Instant::now();
    let mut updates: u64 = 0;
    let report = train(&cfg.scenario, &cfg.perturbation, &cfg.train, seed, |p| {
        updates += 1;
        if updates % 50 == 1 {
            print_curve_progress(p);
        }
    })?;
    println!(
        "done: {} steps, {} episodes, early_stopped={} ({:.0?})",
        report.steps_done,
        report.episodes,
        report.early_stopped,
        started.elapsed()
    );
    print_eval_points(&report.evals);

    let ck_path = common.out.join(artifact_name("checkpoint", hash, &[seed], "json"));
    report.checkpoint.save(&ck_path)?;
    let curve_path = common.out.join(artifact_name("curve", hash, &[seed], "csv"));
    persist(&curve_path, &curve_csv(&report.curve))?;
    println!("wrote {}", ck_path.display());
    println!("wrote {}", curve_path.display());
    Ok(())
}

fn cmd_train_ensemble(common: &Common, seeds: Option<Vec<u64>>) -> Result<(), HarnessError> {
    let cfg = load_config(common)?;
    ensure_writable(&common.out)?;
    let seeds = seeds.unwrap_or_else(|| cfg.eval.seeds.clone());
    let hash = cfg.hash();
    println!("training {} ensemble members (config {hash:016x})", seeds.len());
    // Members train one by one so each one's artifacts land as soon as it
    // finishes; train_ensemble's batch API is equivalent but all-or-nothing.
    if seeds.len() < 2 {
        return Err(HarnessError::Config(
            "an ensemble needs at least two seeds".into(),
        ));
    }
    for (i, &s) in seeds.iter().enumerate() {
        if seeds[..i].contains(&s) {
            return Err(HarnessError::Config(format!("duplicate ensemble seed {s}")));
        }
    }
    for &seed in &seeds {
        let started = Instant::now();
        let report = train(&cfg.scenario, &cfg.perturbation, &cfg.train, seed, |_| {})?;
        let ck_path = common.out.join(artifact_name("checkpoint", hash, &[seed], "json"));
        report.checkpoint.save(&ck_path)?;
        let curve_path = common.out.join(artifact_name("curve", hash, &[seed], "csv"));
        persist(&curve_path, &curve_csv(&report.curve))?;
        println!(
            "  member {seed}: {} steps, early_stopped={} ({:.0?}) -> {}",
            report.steps_done,
            report.early_stopped,
            started.elapsed(),
            ck_path.display()
        );
    }
    println!("ensemble complete; pass the checkpoints to eval/sweep/safe-eval via repeated --checkpoint");
    Ok(())
}

fn cmd_eval(
    common: &Common,
    checkpoints: &[PathBuf],
    estimator: Estimator,
    seed: Option<u64>,
    gate: bool,
    skip_uncertainty: bool,
) -> Result<(), HarnessError> {
    let cfg = load_config(common)?;
    ensure_writable(&common.out)?;
    let obs_dim = observation_dim(cfg.scenario.max_observed_humans);
    let (bundle, seeds) = build_bundle(checkpoints, estimator, obs_dim)?;
    let mut opts = episode_options(&cfg);
    opts.estimate = !skip_uncertainty;
    if gate {
        opts.gate = Some(cfg.gate_config(estimator == Estimator::Ensemble));
    }
    let seed_base = seed.unwrap_or(cfg.eval.eval_seed);

    println!(
        "evaluating {} ({} episodes from seed {seed_base}, gate {})",
        bundle.source_label(),
        cfg.eval.episodes,
        if gate { "on" } else { "off" }
    );
    let report = run_evaluation(
        &bundle,
        &cfg.scenario,
        &cfg.perturbation,
        cfg.eval.episodes,
        seed_base,
        &opts,
    )?;
    println!(
        "goal {:.1}%  collision {:.1}%  timeout {:.1}%  return {:.2}  min_dist {:.2}",
        report.goal_pct(),
        report.collision_pct(),
        report.timeout_pct(),
        report.mean_return,
        report.mean_min_distance
    );
    if let Some(u) = &report.uncertainty {
        let n = u.steps.max(1) as f64;
        println!(
            "mean uncertainty over {} steps: epistemic (speed {:.2e}, heading {:.2e})  aleatoric (speed {:.3}, heading {:.3})  feature {:.3e}",
            u.steps,
            u.epistemic[0] / n,
            u.epistemic[1] / n,
            u.aleatoric[0] / n,
            u.aleatoric[1] / n,
            u.feature / n
        );
    }

    let hash = cfg.hash();
    let label = bundle.source_label().to_string();
    let summary_path = common.out.join(artifact_name("eval", hash, &seeds, "csv"));
    persist(&summary_path, &eval_summary_csv(&[(label.clone(), report.clone())]))?;
    let episodes_path = common.out.join(artifact_name("episodes", hash, &seeds, "csv"));
    persist(&episodes_path, &episodes_csv(&label, &report.per_episode))?;
    println!("wrote {}", summary_path.display());
    println!("wrote {}", episodes_path.display());
    Ok(())
}

fn cmd_sweep(
    common: &Common,
    checkpoints: &[PathBuf],
    estimator: Estimator,
    axis_text: &str,
    grid: Option<Vec<f64>>,
    seed: Option<u64>,
) -> Result<(), HarnessError> {
    let cfg = load_config(common)?;
    ensure_writable(&common.out)?;
    let axis = SweepAxis::parse(axis_text)?;
    let grid = grid.unwrap_or_else(|| axis.default_grid());
    let obs_dim = observation_dim(cfg.scenario.max_observed_humans);
    let (bundle, seeds) = build_bundle(checkpoints, estimator, obs_dim)?;
    let opts = episode_options(&cfg);
    let seed_base = seed.unwrap_or(cfg.eval.eval_seed);

    println!(
        "sweeping {} over {} points x {} episodes ({})",
        axis.label(),
        grid.len(),
        cfg.eval.sweep_episodes,
        bundle.source_label()
    );
    let started = Instant::now();
    let result = perturbation_sweep_logged(
        &bundle,
        &cfg,
        axis,
        &grid,
        seed_base,
        &opts,
    )?;
    println!("sweep finished in {:.0?}", started.elapsed());

    let rates = sweep_rates_of_change(&result);
    for (label, rate) in social_nav::harness::KindMeans::LABELS.iter().zip(rates.iter()) {
        match rate {
            Some(r) => println!("  {label}: normalized rate of change {r:+.3}"),
            None => println!("  {label}: baseline is zero; rate undefined"),
        }
    }

    let hash = cfg.hash();
    let prefix = format!("sweep_{}_{}", axis.label(), result.source);
    let csv_path = common.out.join(artifact_name(&prefix, hash, &seeds, "csv"));
    persist(&csv_path, &sweep_csv(&result))?;
    let rates_path = common
        .out
        .join(artifact_name(&format!("rates_{}_{}", axis.label(), result.source), hash, &seeds, "csv"));
    persist(
        &rates_path,
        &rates_csv(&[(result.source.clone(), axis.label().to_string(), rates)]),
    )?;

    // One chart per uncertainty kind family: epistemic pair, aleatoric
    // pair, and the feature curve, all against disturbance strength.
    let series: Vec<Series> = social_nav::harness::KindMeans::LABELS
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
    let svg = line_chart(
        &format!("uncertainty vs {} ({})", axis.label(), result.source),
        axis.label(),
        "mean uncertainty",
        &series,
    );
    let svg_path = common.out.join(artifact_name(&prefix, hash, &seeds, "svg"));
    persist(&svg_path, &svg)?;
    println!("wrote {}", csv_path.display());
    println!("wrote {}", rates_path.display());
    println!("wrote {}", svg_path.display());
    Ok(())
}

/// Run the sweep, echoing one line per grid point.
fn perturbation_sweep_logged(
    bundle: &PolicyBundle,
    cfg: &HarnessConfig,
    axis: SweepAxis,
    grid: &[f64],
    seed_base: u64,
    opts: &EpisodeOptions,
) -> Result<social_nav::harness::SweepResult, HarnessError> {
    let result = social_nav::harness::perturbation_sweep(
        bundle,
        &cfg.scenario,
        &cfg.perturbation,
        axis,
        grid,
        cfg.eval.sweep_episodes,
        seed_base,
        opts,
    )?;
    for p in &result.points {
        println!(
            "  {} = {:<5}: goal {}/{}  epistemic_heading {:.3e}  aleatoric_heading {:.3}  feature {:.3e}",
            axis.label(),
            p.strength,
            p.goals,
            p.episodes,
            p.mean.epistemic_heading,
            p.mean.aleatoric_heading,
            p.mean.feature
        );
    }
    Ok(result)
}

fn cmd_safe_eval(
    common: &Common,
    checkpoints: &[PathBuf],
    estimator: Estimator,
    seed: Option<u64>,
) -> Result<(), HarnessError> {
    let cfg = load_config(common)?;
    ensure_writable(&common.out)?;
    let obs_dim = observation_dim(cfg.scenario.max_observed_humans);

    // Dropout: one comparison group per checkpoint. Ensemble: one group
    // made of all the checkpoints.
    let mut bundles = Vec::new();
    let mut seeds = Vec::new();
    match estimator {
        Estimator::Dropout => {
            for path in checkpoints {
                let (bundle, s) = build_bundle(std::slice::from_ref(path), estimator, obs_dim)?;
                bundles.push(bundle);
                seeds.extend(s);
            }
        }
        Estimator::Ensemble => {
            let (bundle, s) = build_bundle(checkpoints, estimator, obs_dim)?;
            bundles.push(bundle);
            seeds = s;
        }
    }
    let gate = cfg.gate_config(estimator == Estimator::Ensemble);
    let opts = episode_options(&cfg);
    let seed_base = seed.unwrap_or(cfg.eval.eval_seed);

    println!(
        "comparing gated vs ungated: {} group(s) x {} matched episodes from seed {seed_base}",
        bundles.len(),
        cfg.eval.episodes
    );
    let started = Instant::now();
    let report = safe_action_comparison(
        &bundles,
        &cfg.scenario,
        &cfg.perturbation,
        cfg.eval.episodes,
        gate,
        seed_base,
        &opts,
    )?;
    println!("comparison finished in {:.0?}", started.elapsed());
    for g in &report.groups {
        let prevented = g
            .prevented_pct
            .map_or_else(|| "undefined (no ungated collisions)".into(), |p| format!("{p:.1}%"));
        println!(
            "  group {}: collisions {} -> {}  prevented {}  fallback steps/episode {:.1}",
            g.group,
            g.ungated.collisions,
            g.gated.collisions,
            prevented,
            g.gated.mean_fallback_steps
        );
    }
    println!(
        "pooled: {} -> {} collisions ({})",
        report.total_ungated_collisions,
        report.total_gated_collisions,
        report
            .overall_prevented_pct
            .map_or_else(|| "prevention undefined".into(), |p| format!("{p:.1}% prevented"))
    );

    let hash = cfg.hash();
    let path = common.out.join(artifact_name("safe_eval", hash, &seeds, "csv"));
    persist(&path, &safe_eval_csv(&report))?;
    println!("wrote {}", path.display());
    Ok(())
}

fn cmd_plot(
    inputs: &[PathBuf],
    x_col: &str,
    y_col: &str,
    title: Option<&str>,
    out: &Path,
) -> Result<(), HarnessError> {
    let mut series = Vec::new();
    for path in inputs {
        series.push(Series::new(series_label(path), read_xy(path, x_col, y_col)?));
    }
    let title = title.map_or_else(|| format!("{y_col} vs {x_col}"), str::to_string);
    let svg = line_chart(&title, x_col, y_col, &series);
    if let Some(parent) = out.parent() {
        if !parent.as_os_str().is_empty() {
            ensure_writable(parent)?;
        }
    }
    persist(out, &svg)?;
    println!("wrote {}", out.display());
    Ok(())
}

/// Legend label for a CSV input: its file stem.
fn series_label(path: &Path) -> String {
    path.file_stem()
        .map_or_else(|| path.display().to_string(), |s| s.to_string_lossy().into_owned())
}

/// Pull two named columns out of a CSV file as (x, y) pairs. Rows where
/// either cell is empty or non-numeric are skipped (sweep rate tables use
/// empty cells for undefined values).
fn read_xy(path: &Path, x_col: &str, y_col: &str) -> Result<Vec<(f64, f64)>, HarnessError> {
    let mut reader = csv::Reader::from_path(path)
        .map_err(|e| HarnessError::Config(format!("reading {}: {e}", path.display())))?;
    let headers = reader
        .headers()
        .map_err(|e| HarnessError::Config(format!("reading {}: {e}", path.display())))?;
    let find = |name: &str| {
        headers.iter().position(|h| h == name).ok_or_else(|| {
            HarnessError::Config(format!(
                "{} has no column '{name}' (columns: {})",
                path.display(),
                headers.iter().collect::<Vec<_>>().join(", ")
            ))
        })
    };
    let xi = find(x_col)?;
    let yi = find(y_col)?;
    let mut points = Vec::new();
    for record in reader.records() {
        let record =
            record.map_err(|e| HarnessError::Config(format!("reading {}: {e}", path.display())))?;
        let parse = |i: usize| record.get(i).and_then(|c| c.parse::<f64>().ok());
        if let (Some(x), Some(y)) = (parse(xi), parse(yi)) {
            points.push((x, y));
        }
    }
    if points.is_empty() {
        return Err(HarnessError::Config(format!(
            "{} yielded no plottable ({x_col}, {y_col}) rows",
            path.display()
        )));
    }
    Ok(points)
}
