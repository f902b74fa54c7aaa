//! CSV emission: deterministic, full-precision tables whose file names
//! embed the configuration fingerprint and seed list.
//!
//! Numbers are written in shortest round-trip form, so identical inputs
//! yield byte-identical files. Writers render into memory first; if the
//! final write fails, the content is parked in a recovery file under the
//! system temp directory instead of being discarded.

use super::episode::EpisodeResult;
use super::eval::EvalReport;
use super::safe_eval::SafeEvalReport;
use super::sweep::{KindMeans, SweepResult};
use super::HarnessError;
use crate::sim::EpisodeStatus;
use crate::trainer::CurvePoint;
use std::path::{Path, PathBuf};

pub fn status_label(status: EpisodeStatus) -> &'static str {
    match status {
        EpisodeStatus::Running => "running",
        EpisodeStatus::ReachedGoal => "goal",
        EpisodeStatus::Collision => "collision",
        EpisodeStatus::Timeout => "timeout",
    }
}

/// Render an f64 in shortest round-trip form (empty for the missing value).
pub fn fmt_f64(v: f64) -> String {
    format!("{v:?}")
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map_or(String::new(), fmt_f64)
}

/// `0-1-2-3-4` style seed list tag.
pub fn seed_tag(seeds: &[u64]) -> String {
    seeds
        .iter()
        .map(u64::to_string)
        .collect::<Vec<_>>()
        .join("-")
}

/// Canonical artifact file name: prefix, config fingerprint, seed list.
pub fn artifact_name(prefix: &str, config_hash: u64, seeds: &[u64], ext: &str) -> String {
    format!("{prefix}_cfg{config_hash:016x}_seeds{}.{ext}", seed_tag(seeds))
}

/// Check that `dir` exists (creating it if needed) and accepts writes.
/// Called before long computations so a bad output location fails fast.
pub fn ensure_writable(dir: &Path) -> Result<(), HarnessError> {
    std::fs::create_dir_all(dir)?;
    let probe = dir.join(".write_probe");
    std::fs::write(&probe, b"ok")?;
    std::fs::remove_file(&probe)?;
    Ok(())
}

/// Write `content` to `path`; on failure park it in a temp recovery file
/// and report both locations.
pub fn persist(path: &Path, content: &str) -> Result<(), HarnessError> {
    match std::fs::write(path, content) {
        Ok(()) => Ok(()),
        Err(io) => {
            let stem = path
                .file_name()
                .map_or_else(|| "output".into(), |n| n.to_string_lossy().into_owned());
            let recovery: PathBuf = std::env::temp_dir().join(format!("recovery_{stem}"));
            let recovered = std::fs::write(&recovery, content).is_ok();
            Err(HarnessError::EmitFailed {
                path: path.display().to_string(),
                recovery: if recovered {
                    recovery.display().to_string()
                } else {
                    format!("(recovery write to {} also failed)", recovery.display())
                },
                source: io,
            })
        }
    }
}

fn csv_from_rows(header: &[&str], rows: Vec<Vec<String>>) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header).expect("in-memory csv");
    for row in rows {
        w.write_record(&row).expect("in-memory csv");
    }
    String::from_utf8(w.into_inner().expect("in-memory csv")).expect("csv is utf-8")
}

/// Training curve table.
pub fn curve_csv(points: &[CurvePoint]) -> String {
    let rows = points
        .iter()
        .map(|p| {
            vec![
                p.timesteps.to_string(),
                p.episodes.to_string(),
                fmt_opt(p.mean_discounted_return),
                fmt_opt(p.goal_rate),
                fmt_opt(p.collision_rate),
                fmt_opt(p.timeout_rate),
                fmt_f64(p.policy_loss),
                fmt_f64(p.value_loss),
                fmt_f64(p.variance_loss),
                fmt_f64(p.entropy),
                fmt_f64(p.grad_norm),
                fmt_f64(p.clip_fraction),
                fmt_f64(p.approx_kl),
                fmt_f64(p.variance_anneal),
            ]
        })
        .collect();
    csv_from_rows(
        &[
            "timesteps",
            "episodes",
            "mean_discounted_return",
            "goal_rate",
            "collision_rate",
            "timeout_rate",
            "policy_loss",
            "value_loss",
            "variance_loss",
            "entropy",
            "grad_norm",
            "clip_fraction",
            "approx_kl",
            "variance_anneal",
        ],
        rows,
    )
}

/// Per-episode rows of an evaluation batch (the raw table the summary is
/// recomputable from).
pub fn episodes_csv(label: &str, episodes: &[EpisodeResult]) -> String {
    let rows = episodes
        .iter()
        .enumerate()
        .map(|(i, e)| {
            vec![
                label.to_string(),
                i.to_string(),
                e.seed.to_string(),
                status_label(e.status).to_string(),
                e.steps.to_string(),
                fmt_f64(e.discounted_return),
                fmt_f64(e.undiscounted_return),
                e.proxemic_violations.to_string(),
                fmt_f64(e.min_human_distance),
                e.fallback_steps.to_string(),
            ]
        })
        .collect();
    csv_from_rows(
        &[
            "label",
            "episode",
            "seed",
            "outcome",
            "steps",
            "discounted_return",
            "undiscounted_return",
            "proxemic_violations",
            "min_human_distance",
            "fallback_steps",
        ],
        rows,
    )
}

fn summary_row(label: &str, r: &EvalReport) -> Vec<String> {
    vec![
        label.to_string(),
        r.episodes.to_string(),
        fmt_f64(r.goal_pct()),
        fmt_f64(r.collision_pct()),
        fmt_f64(r.timeout_pct()),
        fmt_f64(r.mean_return),
        fmt_f64(r.std_return),
        fmt_f64(r.mean_steps),
        fmt_f64(r.mean_proxemic_violations),
        fmt_f64(r.mean_min_distance),
        fmt_f64(r.mean_fallback_steps),
    ]
}

/// Summary table over labeled evaluation batches (one row each).
pub fn eval_summary_csv(reports: &[(String, EvalReport)]) -> String {
    let rows = reports
        .iter()
        .map(|(label, r)| summary_row(label, r))
        .collect();
    csv_from_rows(
        &[
            "label",
            "episodes",
            "goal_pct",
            "collision_pct",
            "timeout_pct",
            "return_mean",
            "return_std",
            "mean_steps",
            "mean_proxemic_violations",
            "mean_min_distance",
            "mean_fallback_steps",
        ],
        rows,
    )
}

/// One sweep as a table: a row per strength.
pub fn sweep_csv(result: &SweepResult) -> String {
    let rows = result
        .points
        .iter()
        .map(|p| {
            let mut row = vec![
                result.axis.label().to_string(),
                result.source.clone(),
                fmt_f64(p.strength),
                p.episodes.to_string(),
                p.steps.to_string(),
            ];
            row.extend(p.mean.as_array().iter().map(|&v| fmt_f64(v)));
            row.extend([
                p.collisions.to_string(),
                p.goals.to_string(),
                p.timeouts.to_string(),
                fmt_f64(p.mean_return),
            ]);
            row
        })
        .collect();
    csv_from_rows(
        &[
            "axis",
            "source",
            "strength",
            "episodes",
            "steps",
            "epistemic_speed",
            "epistemic_heading",
            "aleatoric_speed",
            "aleatoric_heading",
            "feature",
            "collisions",
            "goals",
            "timeouts",
            "mean_return",
        ],
        rows,
    )
}

/// Normalized rate-of-change table: one row per (source, axis), one column
/// per uncertainty kind; missing values stay empty.
pub fn rates_csv(rows_in: &[(String, String, [Option<f64>; 5])]) -> String {
    let rows = rows_in
        .iter()
        .map(|(source, axis, rates)| {
            let mut row = vec![source.clone(), axis.clone()];
            row.extend(rates.iter().map(|r| fmt_opt(*r)));
            row
        })
        .collect();
    let mut header = vec!["source", "axis"];
    header.extend(KindMeans::LABELS);
    csv_from_rows(&header, rows)
}

/// Gated-versus-ungated table: one row per seed group plus a pooled row.
pub fn safe_eval_csv(report: &SafeEvalReport) -> String {
    let mut rows: Vec<Vec<String>> = report
        .groups
        .iter()
        .map(|g| {
            vec![
                g.group.to_string(),
                g.seed_base.to_string(),
                g.ungated.episodes.to_string(),
                g.ungated.collisions.to_string(),
                g.gated.collisions.to_string(),
                g.ungated.goals.to_string(),
                g.gated.goals.to_string(),
                fmt_f64(g.ungated.mean_return),
                fmt_f64(g.gated.mean_return),
                fmt_f64(g.gated.mean_fallback_steps),
                fmt_opt(g.prevented_pct),
            ]
        })
        .collect();
    rows.push(vec![
        "pooled".into(),
        String::new(),
        report
            .groups
            .iter()
            .map(|g| g.ungated.episodes)
            .sum::<usize>()
            .to_string(),
        report.total_ungated_collisions.to_string(),
        report.total_gated_collisions.to_string(),
        String::new(),
        String::new(),
        String::new(),
        String::new(),
        String::new(),
        fmt_opt(report.overall_prevented_pct),
    ]);
    csv_from_rows(
        &[
            "group",
            "seed_base",
            "episodes",
            "ungated_collisions",
            "gated_collisions",
            "ungated_goals",
            "gated_goals",
            "ungated_return",
            "gated_return",
            "gated_fallback_steps",
            "prevented_pct",
        ],
        rows,
    )
}
