//! Replicate orchestration: job layout, seed derivation, parallel execution
//! and per-replicate payload computation.
//!
//! Every run is a pure function of its [`ExperimentConfig`]. Jobs are laid
//! out in (k, replicate) order, executed on a work pool of configurable
//! width, and collected back in the same order, so results never depend on
//! scheduling. Replicates that hit a numerical degeneracy are excluded with
//! a recorded reason (never silently dropped); any other error aborts the
//! run.
//!
//! Seed chain: `base = derive(root, [kind, k, replicate])`; the embedding
//! fields use `derive(base, [field])` and the zero-count field pair uses
//! `derive(base, [0])` / `derive(base, [1])`. The chain is injective in
//! practice (64-bit mixing), keeps replicate streams disjoint across
//! experiment kinds, and makes any single replicate reproducible from the
//! row's recorded seed alone.

use std::time::Instant;

use rayon::prelude::*;

use crate::atlas::ManifoldAtlas;
use crate::curvature::lkc;
use crate::embedding::{ci_deviation_norms, EmbeddingRealization, PullbackMetric};
use crate::error::{Error, Result};
use crate::gp::{build_model, GPModel};
use crate::harness::config::{ExperimentConfig, ExperimentKind};
use crate::harness::zero_count::{zero_count_prediction, zero_count_replicate};
use crate::rng::derive_seed;

/// Detection cells per chart axis for zero counting. Expected counts are
/// O(10), so this makes the missed-root probability negligible; the
/// testable kernel in [`crate::harness::zero_count`] takes the grid as a
/// parameter.
const ZERO_COUNT_SIGN_GRID: usize = 128;

/// Per-replicate outcome of one experiment job.
#[derive(Clone, Debug, PartialEq)]
pub struct ReplicateRow {
    pub k: usize,
    pub replicate: usize,
    /// Base seed of the replicate; field seeds derive from it.
    pub seed: u64,
    pub status: RowStatus,
    pub payload: Payload,
    /// Wall time of the job. Reported only in aggregate timing, never in
    /// deterministic outputs.
    pub wall_secs: f64,
}

impl ReplicateRow {
    pub fn is_ok(&self) -> bool {
        matches!(self.status, RowStatus::Ok)
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum RowStatus {
    Ok,
    /// Degenerate replicate, excluded from statistics; carries the reason.
    Excluded(String),
}

/// Experiment-specific replicate payload.
#[derive(Clone, Debug, PartialEq)]
pub enum Payload {
    /// C^0, C^1, C^2 deviation norms of the pullback metric.
    Deviations([f64; 3]),
    /// Curvature functionals of the pullback metric and absolute deviations
    /// from the reference values.
    Lkc {
        values: Vec<f64>,
        deviations: Vec<f64>,
    },
    /// Simultaneous-zero count of an independent field pair.
    Zeros {
        seed_u: u64,
        seed_v: u64,
        count: usize,
        flagged_cells: usize,
    },
    /// Excluded rows carry no payload.
    None,
}

/// A finished run: ordered rows plus the context needed for summaries.
#[derive(Clone, Debug)]
pub struct RunResult {
    pub config: ExperimentConfig,
    pub rows: Vec<ReplicateRow>,
    /// Closed-form reference curvature functionals of the manifold.
    pub reference_lkc: Vec<f64>,
    /// Kinematic zero-count prediction (zero-count runs only).
    pub prediction: Option<f64>,
    pub elapsed_secs: f64,
}

/// Execute the experiment described by the config. See the module docs for
/// the determinism and exclusion contracts.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<RunResult> {
    cfg.validate()?;
    let start = Instant::now();
    let atlas = cfg.build_atlas()?;
    let model = build_model(&atlas, cfg.waves, cfg.spectrum, cfg.seed)?;

    let k_list: Vec<usize> = if cfg.kind.uses_k() {
        cfg.k_list.clone()
    } else {
        vec![0] // single pseudo-k for uniform row addressing
    };
    let jobs: Vec<(usize, usize)> = k_list
        .iter()
        .flat_map(|&k| (0..cfg.replicates).map(move |rep| (k, rep)))
        .collect();

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.threads)
        .build()
        .map_err(|e| Error::invalid(format!("worker pool: {e}")))?;
    let rows: Result<Vec<ReplicateRow>> = pool.install(|| {
        jobs.par_iter()
            .map(|&(k, rep)| one_replicate(cfg, &atlas, &model, k, rep))
            .collect()
    });

    Ok(RunResult {
        config: cfg.clone(),
        rows: rows?,
        reference_lkc: atlas.reference_lkc(),
        prediction: match cfg.kind {
            ExperimentKind::ZeroCount => Some(zero_count_prediction(&atlas)?),
            _ => None,
        },
        elapsed_secs: start.elapsed().as_secs_f64(),
    })
}

/// Run one job; degeneracies become excluded rows, other errors propagate.
fn one_replicate(
    cfg: &ExperimentConfig,
    atlas: &ManifoldAtlas,
    model: &GPModel,
    k: usize,
    rep: usize,
) -> Result<ReplicateRow> {
    let t = Instant::now();
    let base = derive_seed(cfg.seed, &[cfg.kind.seed_tag(), k as u64, rep as u64]);
    let payload = match cfg.kind {
        ExperimentKind::Converge => converge_payload(cfg, atlas, model, k, base),
        ExperimentKind::LkcConverge | ExperimentKind::Unbiased => {
            lkc_payload(atlas, model, k, base)
        }
        ExperimentKind::ZeroCount => zero_payload(atlas, model, base),
    };
    let (status, payload) = match payload {
        Ok(p) => (RowStatus::Ok, p),
        Err(e @ (Error::Degeneracy { .. } | Error::DegenerateMetric(_))) => {
            (RowStatus::Excluded(e.to_string()), Payload::None)
        }
        Err(e) => return Err(e),
    };
    Ok(ReplicateRow {
        k,
        replicate: rep,
        seed: base,
        status,
        payload,
        wall_secs: t.elapsed().as_secs_f64(),
    })
}

fn converge_payload(
    cfg: &ExperimentConfig,
    atlas: &ManifoldAtlas,
    model: &GPModel,
    k: usize,
    base: u64,
) -> Result<Payload> {
    let emb = EmbeddingRealization::realize(model, k, base)?;
    let norms = ci_deviation_norms(&emb, atlas, &atlas.reference(), 2, cfg.grid)?;
    Ok(Payload::Deviations([norms[0], norms[1], norms[2]]))
}

fn lkc_payload(atlas: &ManifoldAtlas, model: &GPModel, k: usize, base: u64) -> Result<Payload> {
    let emb = EmbeddingRealization::realize(model, k, base)?;
    let pullback = PullbackMetric { emb: &emb, atlas };
    let values = lkc(atlas, &pullback)?.values;
    let reference = atlas.reference_lkc();
    let deviations = values
        .iter()
        .zip(&reference)
        .map(|(v, r)| (v - r).abs())
        .collect();
    Ok(Payload::Lkc { values, deviations })
}

fn zero_payload(atlas: &ManifoldAtlas, model: &GPModel, base: u64) -> Result<Payload> {
    let seed_u = derive_seed(base, &[0]);
    let seed_v = derive_seed(base, &[1]);
    let out = zero_count_replicate(model, atlas, seed_u, seed_v, ZERO_COUNT_SIGN_GRID)?;
    Ok(Payload::Zeros {
        seed_u,
        seed_v,
        count: out.count,
        flagged_cells: out.flagged_cells,
    })
}

fn run_checked(cfg: &ExperimentConfig, kind: ExperimentKind) -> Result<RunResult> {
    if cfg.kind != kind {
        return Err(Error::ConfigValidation(format!(
            "config is for '{}', expected '{}'",
            cfg.kind, kind
        )));
    }
    run_experiment(cfg)
}

/// Metric-deviation experiment (C^i norms of the pullback vs reference).
pub fn run_converge(cfg: &ExperimentConfig) -> Result<RunResult> {
    run_checked(cfg, ExperimentKind::Converge)
}

/// Curvature-functional convergence experiment.
pub fn run_lkc_converge(cfg: &ExperimentConfig) -> Result<RunResult> {
    run_checked(cfg, ExperimentKind::LkcConverge)
}

/// Fixed-k mean curvature-functional experiment.
pub fn run_unbiased(cfg: &ExperimentConfig) -> Result<RunResult> {
    run_checked(cfg, ExperimentKind::Unbiased)
}

/// Simultaneous-zero counting experiment.
pub fn run_zero_count(cfg: &ExperimentConfig) -> Result<RunResult> {
    run_checked(cfg, ExperimentKind::ZeroCount)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::config::PartialConfig;

    fn small_partial() -> PartialConfig {
        PartialConfig {
            manifold: Some("torus:2pi,2pi".into()),
            waves: Some(16),
            seed: Some(42),
            k_list: Some(vec![4, 8]),
            replicates: Some(4),
            grid: Some(8),
            nodes: Some(8),
            ..PartialConfig::default()
        }
    }

    fn small_cfg(kind: ExperimentKind, threads: usize) -> ExperimentConfig {
        let partial = PartialConfig {
            threads: Some(threads),
            ..small_partial()
        };
        ExperimentConfig::resolve(kind, partial).unwrap()
    }

    #[test]
    fn rows_are_ordered_and_thread_count_invariant() {
        let r1 = run_experiment(&small_cfg(ExperimentKind::Converge, 1)).unwrap();
        let r4 = run_experiment(&small_cfg(ExperimentKind::Converge, 4)).unwrap();
        assert_eq!(r1.rows.len(), 8);
        let keys: Vec<(usize, usize)> = r1.rows.iter().map(|r| (r.k, r.replicate)).collect();
        assert_eq!(
            keys,
            vec![
                (4, 0),
                (4, 1),
                (4, 2),
                (4, 3),
                (8, 0),
                (8, 1),
                (8, 2),
                (8, 3),
            ]
        );
        // Payloads, seeds and statuses identical at any worker count; wall
        // times are the only field allowed to differ.
        for (a, b) in r1.rows.iter().zip(&r4.rows) {
            assert_eq!((a.k, a.replicate, a.seed), (b.k, b.replicate, b.seed));
            assert_eq!(a.status, b.status);
            assert_eq!(a.payload, b.payload);
        }
    }

    #[test]
    fn replicate_seeds_are_distinct_across_jobs_and_kinds() {
        let mut seeds = std::collections::HashSet::new();
        for kind in [ExperimentKind::Converge, ExperimentKind::LkcConverge] {
            let r = run_experiment(&small_cfg(kind, 1)).unwrap();
            for row in &r.rows {
                assert!(seeds.insert(row.seed), "duplicate seed {}", row.seed);
            }
        }
    }

    #[test]
    fn degenerate_replicates_are_excluded_with_reasons() {
        // k = 1 produces a rank-1 pullback metric, so every curvature
        // evaluation degenerates; k = 8 replicates stay healthy.
        let partial = PartialConfig {
            k_list: Some(vec![1, 8]),
            replicates: Some(3),
            ..small_partial()
        };
        let cfg = ExperimentConfig::resolve(ExperimentKind::LkcConverge, partial).unwrap();
        let r = run_experiment(&cfg).unwrap();
        assert_eq!(r.rows.len(), 6);
        let (excluded, ok): (Vec<_>, Vec<_>) = r.rows.iter().partition(|row| !row.is_ok());
        assert_eq!(excluded.len(), 3);
        assert!(excluded.iter().all(|row| row.k == 1));
        assert!(excluded.iter().all(|row| matches!(
            &row.status,
            RowStatus::Excluded(reason) if reason.contains("degeneracy")
        )));
        assert!(excluded.iter().all(|row| row.payload == Payload::None));
        assert_eq!(ok.len(), 3);
        assert!(ok.iter().all(|row| matches!(
            &row.payload,
            Payload::Lkc { values, deviations }
                if values.len() == 3 && deviations.len() == 3
        )));
    }

    #[test]
    fn lkc_rows_report_reference_deviations() {
        let partial = PartialConfig {
            k_list: Some(vec![64]),
            replicates: Some(2),
            ..small_partial()
        };
        let cfg = ExperimentConfig::resolve(ExperimentKind::LkcConverge, partial).unwrap();
        let r = run_experiment(&cfg).unwrap();
        let reference = &r.reference_lkc;
        for row in &r.rows {
            if let Payload::Lkc { values, deviations } = &row.payload {
                for j in 0..values.len() {
                    assert_eq!(deviations[j], (values[j] - reference[j]).abs());
                }
                // odd-codimension functional is exactly zero
                assert_eq!(values[1], 0.0);
            } else {
                panic!("wrong payload kind");
            }
        }
    }

    #[test]
    fn zero_count_runner_produces_counts_and_prediction() {
        let partial = PartialConfig {
            replicates: Some(3),
            k_list: None,
            ..small_partial()
        };
        let cfg = ExperimentConfig::resolve(ExperimentKind::ZeroCount, partial).unwrap();
        let r = run_zero_count(&cfg).unwrap();
        assert_eq!(r.rows.len(), 3);
        let predicted = r.prediction.unwrap();
        assert!((predicted - 2.0 * std::f64::consts::PI).abs() < 1e-12);
        for row in &r.rows {
            match &row.payload {
                Payload::Zeros {
                    seed_u,
                    seed_v,
                    count,
                    flagged_cells,
                } => {
                    assert_ne!(seed_u, seed_v);
                    assert_eq!(*flagged_cells, 0);
                    assert!(*count > 0, "a 16-wave field pair should cross somewhere");
                }
                other => panic!("wrong payload {other:?}"),
            }
        }
    }

    #[test]
    fn wrappers_enforce_their_kind() {
        let cfg = small_cfg(ExperimentKind::Converge, 1);
        assert!(run_converge(&cfg).is_ok());
        let err = run_unbiased(&cfg).unwrap_err().to_string();
        assert!(err.contains("expected 'unbiased'"), "{err}");
    }

    #[test]
    fn invalid_config_fails_before_any_work() {
        let partial = PartialConfig {
            k_list: Some(vec![]),
            ..small_partial()
        };
        assert!(ExperimentConfig::resolve(ExperimentKind::Converge, partial).is_err());
    }
}
