//! Result rendering: deterministic CSV, the JSON summary, and file output.
//!
//! The CSV is the byte-stable artifact: for a given config and root seed it
//! is identical across reruns and worker counts. The JSON summary is also
//! deterministic except for its `timing` section, which reports wall-clock
//! aggregates. Floats are rendered with Rust's shortest round-trip
//! formatting, so values reproduce bit-for-bit when parsed back.
//!
//! CSV schemas (one row per replicate, excluded rows keep their position
//! with empty payload cells):
//!   converge:      k,replicate,seed,status,c0,c1,c2
//!   lkc-converge:  k,replicate,seed,status,l0..lm,dev0..devm
//!   unbiased:      k,replicate,seed,status,l0..lm,dev0..devm
//!   zero-count:    replicate,seed_u,seed_v,status,count,flagged_cells

use std::fmt::Write as _;
use std::fs;
use std::path::PathBuf;

use serde_json::{json, Value};

use crate::error::{Error, Result};
use crate::harness::config::ExperimentKind;
use crate::harness::runner::{Payload, ReplicateRow, RowStatus, RunResult};
use crate::harness::stats::{loglog_slope, mean_stats, quartiles, MeanStats, Quartiles};
use crate::harness::svg;

/// Render the per-replicate CSV table for a finished run.
pub fn render_csv(result: &RunResult) -> String {
    let kind = result.config.kind;
    let m = result.config.manifold.dim();
    let mut out = String::new();
    match kind {
        ExperimentKind::Converge => out.push_str("k,replicate,seed,status,c0,c1,c2\n"),
        ExperimentKind::LkcConverge | ExperimentKind::Unbiased => {
            out.push_str("k,replicate,seed,status");
            for j in 0..=m {
                let _ = write!(out, ",l{j}");
            }
            for j in 0..=m {
                let _ = write!(out, ",dev{j}");
            }
            out.push('\n');
        }
        ExperimentKind::ZeroCount => {
            out.push_str("replicate,seed_u,seed_v,status,count,flagged_cells\n")
        }
    }
    for row in &result.rows {
        let status = match &row.status {
            RowStatus::Ok => "ok",
            RowStatus::Excluded(_) => "excluded",
        };
        match kind {
            ExperimentKind::Converge => {
                let _ = write!(out, "{},{},{},{status}", row.k, row.replicate, row.seed);
                match &row.payload {
                    Payload::Deviations(d) => {
                        let _ = write!(out, ",{},{},{}", d[0], d[1], d[2]);
                    }
                    _ => out.push_str(",,,"),
                }
            }
            ExperimentKind::LkcConverge | ExperimentKind::Unbiased => {
                let _ = write!(out, "{},{},{},{status}", row.k, row.replicate, row.seed);
                match &row.payload {
                    Payload::Lkc { values, deviations } => {
                        for v in values {
                            let _ = write!(out, ",{v}");
                        }
                        for d in deviations {
                            let _ = write!(out, ",{d}");
                        }
                    }
                    _ => out.push_str(&",".repeat(2 * (m + 1))),
                }
            }
            ExperimentKind::ZeroCount => match &row.payload {
                Payload::Zeros {
                    seed_u,
                    seed_v,
                    count,
                    flagged_cells,
                } => {
                    let _ = write!(
                        out,
                        "{},{seed_u},{seed_v},{status},{count},{flagged_cells}",
                        row.replicate
                    );
                }
                _ => {
                    let _ = write!(out, "{},,,{status},,", row.replicate);
                }
            },
        }
        out.push('\n');
    }
    out
}

fn quartiles_json(q: Option<Quartiles>) -> Value {
    match q {
        Some(q) => json!({ "q1": q.q1, "median": q.median, "q3": q.q3 }),
        None => Value::Null,
    }
}

fn mean_json(s: Option<MeanStats>) -> Value {
    match s {
        Some(s) => json!({ "n": s.n, "mean": s.mean, "sd": s.sd, "se": s.se }),
        None => Value::Null,
    }
}

fn z_score(diff: f64, se: f64) -> Value {
    if se > 0.0 {
        json!(diff / se)
    } else {
        Value::Null
    }
}

/// Rows grouped per k in config order (single anonymous group for
/// experiments that do not use k), with only non-excluded rows included.
fn ok_groups(result: &RunResult) -> Vec<(Option<usize>, Vec<&ReplicateRow>)> {
    let keys: Vec<Option<usize>> = if result.config.kind.uses_k() {
        result.config.k_list.iter().map(|&k| Some(k)).collect()
    } else {
        vec![None]
    };
    keys.into_iter()
        .map(|key| {
            let rows = result
                .rows
                .iter()
                .filter(|r| r.is_ok() && key.map_or(true, |k| r.k == k))
                .collect();
            (key, rows)
        })
        .collect()
}

fn deviation_column(rows: &[&ReplicateRow], order: usize) -> Vec<f64> {
    rows.iter()
        .filter_map(|r| match &r.payload {
            Payload::Deviations(d) => Some(d[order]),
            _ => None,
        })
        .collect()
}

fn lkc_column(rows: &[&ReplicateRow], j: usize, deviations: bool) -> Vec<f64> {
    rows.iter()
        .filter_map(|r| match &r.payload {
            Payload::Lkc {
                values,
                deviations: devs,
            } => Some(if deviations { devs[j] } else { values[j] }),
            _ => None,
        })
        .collect()
}

fn stats_converge(result: &RunResult) -> Value {
    let groups = ok_groups(result);
    let per_k: Vec<Value> = groups
        .iter()
        .map(|(k, rows)| {
            json!({
                "k": k,
                "n": rows.len(),
                "c0": quartiles_json(quartiles(&deviation_column(rows, 0))),
                "c1": quartiles_json(quartiles(&deviation_column(rows, 1))),
                "c2": quartiles_json(quartiles(&deviation_column(rows, 2))),
            })
        })
        .collect();
    let slope = |order: usize| -> Value {
        let mut xs = Vec::new();
        let mut ys = Vec::new();
        for (k, rows) in &groups {
            if let (Some(k), Some(med)) = (
                k,
                crate::harness::stats::median(&deviation_column(rows, order)),
            ) {
                xs.push(*k as f64);
                ys.push(med);
            }
        }
        loglog_slope(&xs, &ys).map_or(Value::Null, |s| json!(s))
    };
    json!({
        "per_k": per_k,
        "median_loglog_slopes": { "c0": slope(0), "c1": slope(1), "c2": slope(2) },
    })
}

fn stats_lkc_converge(result: &RunResult) -> Value {
    let m = result.config.manifold.dim();
    let per_k: Vec<Value> = ok_groups(result)
        .iter()
        .map(|(k, rows)| {
            let values: Vec<Value> = (0..=m)
                .map(|j| quartiles_json(quartiles(&lkc_column(rows, j, false))))
                .collect();
            let deviations: Vec<Value> = (0..=m)
                .map(|j| quartiles_json(quartiles(&lkc_column(rows, j, true))))
                .collect();
            json!({ "k": k, "n": rows.len(), "lkc": values, "abs_deviation": deviations })
        })
        .collect();
    json!({ "per_k": per_k, "reference_lkc": result.reference_lkc })
}

fn stats_unbiased(result: &RunResult) -> Value {
    let m = result.config.manifold.dim();
    let groups = ok_groups(result);
    // Per-k, per-order moments with z-scores against the reference values.
    let mut moments: Vec<Vec<Option<MeanStats>>> = Vec::new();
    let per_k: Vec<Value> = groups
        .iter()
        .map(|(k, rows)| {
            let mut here = Vec::new();
            let per_j: Vec<Value> = (0..=m)
                .map(|j| {
                    let stats = mean_stats(&lkc_column(rows, j, false));
                    here.push(stats);
                    match stats {
                        Some(s) => {
                            let reference = result.reference_lkc[j];
                            json!({
                                "j": j,
                                "n": s.n,
                                "mean": s.mean,
                                "sd": s.sd,
                                "se": s.se,
                                "reference": reference,
                                "z_vs_reference": z_score(s.mean - reference, s.se),
                            })
                        }
                        None => Value::Null,
                    }
                })
                .collect();
            moments.push(here);
            json!({ "k": k, "n": rows.len(), "per_j": per_j })
        })
        .collect();
    // Cross-k consistency: the mean at each k should agree within joint SE.
    let mut cross = Vec::new();
    for a in 0..groups.len() {
        for b in (a + 1)..groups.len() {
            for j in 0..=m {
                if let (Some(sa), Some(sb)) = (moments[a][j], moments[b][j]) {
                    let diff = sa.mean - sb.mean;
                    let joint_se = (sa.se * sa.se + sb.se * sb.se).sqrt();
                    cross.push(json!({
                        "j": j,
                        "k_a": groups[a].0,
                        "k_b": groups[b].0,
                        "diff": diff,
                        "joint_se": joint_se,
                        "z": z_score(diff, joint_se),
                    }));
                }
            }
        }
    }
    json!({ "per_k": per_k, "cross_k": cross, "reference_lkc": result.reference_lkc })
}

fn stats_zero_count(result: &RunResult) -> Value {
    let rows: Vec<&ReplicateRow> = result.rows.iter().filter(|r| r.is_ok()).collect();
    let count_of = |r: &&ReplicateRow| match &r.payload {
        Payload::Zeros { count, .. } => Some(*count as f64),
        _ => None,
    };
    let flagged_of = |r: &&ReplicateRow| match &r.payload {
        Payload::Zeros { flagged_cells, .. } => *flagged_cells,
        _ => 0,
    };
    let clean: Vec<&ReplicateRow> = rows
        .iter()
        .filter(|r| flagged_of(r) == 0)
        .copied()
        .collect();
    let flagged: Vec<&ReplicateRow> = rows.iter().filter(|r| flagged_of(r) > 0).copied().collect();
    let prediction = result.prediction.unwrap_or(f64::NAN);
    let all_counts: Vec<f64> = rows.iter().filter_map(count_of).collect();
    let all_stats = mean_stats(&all_counts);
    let all_z = all_stats.map_or(Value::Null, |s| z_score(s.mean - prediction, s.se));
    let clean_counts: Vec<f64> = clean.iter().filter_map(count_of).collect();
    let clean_stats = mean_stats(&clean_counts);
    let z = clean_stats.map_or(Value::Null, |s| z_score(s.mean - prediction, s.se));
    json!({
        "prediction": prediction,
        "all": { "moments": mean_json(all_stats), "z_vs_prediction": all_z },
        "clean": { "moments": mean_json(clean_stats), "z_vs_prediction": z },
        "flagged": {
            "replicates": flagged.iter().map(|r| r.replicate).collect::<Vec<_>>(),
            "total_flagged_cells": rows.iter().map(|r| flagged_of(r)).sum::<usize>(),
            "moments": mean_json(mean_stats(
                &flagged.iter().filter_map(count_of).collect::<Vec<f64>>()
            )),
        },
    })
}

/// Build the JSON summary for a finished run. Everything except `timing` is
/// a pure function of (config, root seed).
pub fn summarize(result: &RunResult) -> Value {
    let cfg = &result.config;
    let uses_k = cfg.kind.uses_k();
    let k_json = |row: &ReplicateRow| -> Value {
        if uses_k {
            json!(row.k)
        } else {
            Value::Null
        }
    };

    let replicate_seeds: Vec<Value> = result
        .rows
        .iter()
        .map(|row| {
            let mut entry = json!({
                "k": k_json(row),
                "replicate": row.replicate,
                "seed": row.seed,
            });
            if let Payload::Zeros { seed_u, seed_v, .. } = &row.payload {
                entry["seed_u"] = json!(seed_u);
                entry["seed_v"] = json!(seed_v);
            }
            entry
        })
        .collect();

    let excluded: Vec<Value> = result
        .rows
        .iter()
        .filter_map(|row| match &row.status {
            RowStatus::Excluded(reason) => Some(json!({
                "k": k_json(row),
                "replicate": row.replicate,
                "reason": reason,
            })),
            RowStatus::Ok => None,
        })
        .collect();

    // Reported + excluded must always equal the configured replicate count.
    let keys: Vec<Option<usize>> = if uses_k {
        cfg.k_list.iter().map(|&k| Some(k)).collect()
    } else {
        vec![None]
    };
    let accounting: Vec<Value> = keys
        .iter()
        .map(|key| {
            let in_group = |row: &&ReplicateRow| key.map_or(true, |k| row.k == k);
            let reported = result
                .rows
                .iter()
                .filter(in_group)
                .filter(|r| r.is_ok())
                .count();
            let excluded_n = result
                .rows
                .iter()
                .filter(in_group)
                .filter(|r| !r.is_ok())
                .count();
            json!({
                "k": key,
                "configured": cfg.replicates,
                "reported": reported,
                "excluded": excluded_n,
            })
        })
        .collect();

    let stats = match cfg.kind {
        ExperimentKind::Converge => stats_converge(result),
        ExperimentKind::LkcConverge => stats_lkc_converge(result),
        ExperimentKind::Unbiased => stats_unbiased(result),
        ExperimentKind::ZeroCount => stats_zero_count(result),
    };

    let wall: Vec<f64> = result.rows.iter().map(|r| r.wall_secs).collect();
    let mean_wall = wall.iter().sum::<f64>() / wall.len().max(1) as f64;
    let max_wall = wall.iter().cloned().fold(0.0f64, f64::max);

    json!({
        "kind": cfg.kind.name(),
        "version": env!("CARGO_PKG_VERSION"),
        "root_seed": cfg.seed,
        "config": {
            "kind": cfg.kind.name(),
            "manifold": cfg.manifold.to_string(),
            "waves": cfg.waves,
            "spectrum": cfg.spectrum.to_string(),
            "seed": cfg.seed,
            "k_list": cfg.k_list,
            "replicates": cfg.replicates,
            "grid": cfg.grid,
            "nodes": cfg.nodes,
            "threads": cfg.threads,
            "out_dir": cfg.out_dir.display().to_string(),
            "plot": cfg.plot,
        },
        "reference_lkc": result.reference_lkc,
        "prediction": result.prediction,
        "accounting": accounting,
        "excluded": excluded,
        "replicate_seeds": replicate_seeds,
        "stats": stats,
        // Wall-clock aggregates; the only non-deterministic section.
        "timing": {
            "total_secs": result.elapsed_secs,
            "mean_replicate_secs": mean_wall,
            "max_replicate_secs": max_wall,
        },
    })
}

/// Write CSV + JSON summary (+ optional SVG plot) into the configured
/// output directory. Returns the paths written. Rendering happens before
/// any filesystem touch, and `result` is only borrowed, so results survive
/// an unwritable path (the caller can retry with a new directory).
pub fn emit_outputs(result: &RunResult) -> Result<Vec<PathBuf>> {
    if result.rows.is_empty() {
        return Err(Error::invalid("refusing to emit outputs for an empty run"));
    }
    let csv = render_csv(result);
    let summary = serde_json::to_string_pretty(&summarize(result))
        .map_err(|e| Error::Parse(format!("summary serialization: {e}")))?;
    let plot = if result.config.plot {
        svg::render_run_plot(result)
    } else {
        None
    };

    let dir = &result.config.out_dir;
    fs::create_dir_all(dir)?;
    let base = result.config.kind.name();
    let mut written = Vec::new();
    let csv_path = dir.join(format!("{base}.csv"));
    fs::write(&csv_path, csv)?;
    written.push(csv_path);
    let json_path = dir.join(format!("{base}_summary.json"));
    fs::write(&json_path, summary)?;
    written.push(json_path);
    if let Some(svg_text) = plot {
        let svg_path = dir.join(format!("{base}.svg"));
        fs::write(&svg_path, svg_text)?;
        written.push(svg_path);
    }
    Ok(written)
}
