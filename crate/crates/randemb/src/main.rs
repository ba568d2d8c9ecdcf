//! Command-line harness for the random-wave embedding experiments.
//!
//! Experiment subcommands (`converge`, `lkc`, `unbiased`, `zero-count`)
//! resolve their configuration from defaults, an optional structured config
//! file (`--config`, overridden field-by-field by flags), run the parallel
//! replicate schedule, and write `<kind>.csv` + `<kind>_summary.json`
//! (+ `<kind>.svg` with `--plot`) into `--out-dir`. `gmf` and `gkf-table`
//! print structured text tables. `lkc` doubles as a one-shot calculator
//! with `--metric reference|pullback`.

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

use randemb::atlas::ManifoldAtlas;
use randemb::curvature::lkc;
use randemb::embedding::{EmbeddingRealization, PullbackMetric};
use randemb::error::{Error, Result};
use randemb::gp::build_model;
use randemb::harness::{
    emit_outputs, run_experiment, summarize, ExperimentConfig, ExperimentKind, PartialConfig,
    RunResult,
};
use randemb::intgeo::{gkf_rhs, gmf_point};

#[derive(Parser)]
#[command(
    name = "randemb",
    version,
    about = "Random-wave manifold embeddings: convergence, curvature and \
             kinematic-formula experiments"
)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Metric deviation norms of the pullback vs the reference, across k
    Converge(CommonOpts),
    /// Curvature functionals: one-shot calculator or convergence experiment
    Lkc(LkcOpts),
    /// Fixed-k sample means of curvature functionals vs closed forms
    Unbiased(CommonOpts),
    /// Simultaneous zeros of two independent fields vs the kinematic
    /// prediction
    ZeroCount(CommonOpts),
    /// Gaussian Minkowski functional table for a point set
    Gmf(GmfOpts),
    /// Kinematic zero-set predictions for a manifold and codimension
    GkfTable(GkfOpts),
}

/// Flags shared by the experiment subcommands. Every flag is optional: a
/// value comes from the flag, else the `--config` file, else the default.
#[derive(Args, Clone, Debug, Default)]
struct CommonOpts {
    /// Manifold, e.g. torus:2pi,2pi or sphere:1 (pi suffixes allowed)
    #[arg(long)]
    manifold: Option<String>,
    /// Number of random waves in the field model
    #[arg(long)]
    waves: Option<usize>,
    /// Spectral shape: uniform-shell | gaussian
    #[arg(long)]
    spectrum: Option<String>,
    /// Root seed; every replicate seed derives from it
    #[arg(long)]
    seed: Option<u64>,
    /// Comma-separated embedding sizes, e.g. 64,256,1024,4096
    #[arg(long = "k-list", value_delimiter = ',')]
    k_list: Option<Vec<usize>>,
    /// Monte Carlo replicates per k
    #[arg(long)]
    replicates: Option<usize>,
    /// Deviation-norm evaluation grid per axis
    #[arg(long)]
    grid: Option<usize>,
    /// Quadrature nodes per axis
    #[arg(long)]
    nodes: Option<usize>,
    /// Worker threads (0 = library default)
    #[arg(long)]
    threads: Option<usize>,
    /// Output directory for CSV/JSON/SVG artifacts
    #[arg(long = "out-dir")]
    out_dir: Option<PathBuf>,
    /// Also write an SVG median plot (k-indexed experiments)
    #[arg(long)]
    plot: bool,
    /// Structured text config file; flags override its fields
    #[arg(long)]
    config: Option<PathBuf>,
    /// Write the constructed field model to this text file
    #[arg(long = "save-model")]
    save_model: Option<PathBuf>,
}

impl CommonOpts {
    fn flag_partial(&self) -> PartialConfig {
        PartialConfig {
            manifold: self.manifold.clone(),
            waves: self.waves,
            spectrum: self.spectrum.clone(),
            seed: self.seed,
            k_list: self.k_list.clone(),
            replicates: self.replicates,
            grid: self.grid,
            nodes: self.nodes,
            threads: self.threads,
            out_dir: self.out_dir.clone(),
            plot: if self.plot { Some(true) } else { None },
        }
    }

    fn resolve(&self, kind: ExperimentKind) -> Result<ExperimentConfig> {
        let from_file = match &self.config {
            Some(path) => PartialConfig::from_toml_str(&std::fs::read_to_string(path)?)?,
            None => PartialConfig::default(),
        };
        ExperimentConfig::resolve(kind, self.flag_partial().or(from_file))
    }
}

#[derive(Args)]
struct LkcOpts {
    #[command(flatten)]
    common: CommonOpts,
    /// One-shot mode: compute a single functional vector for this metric
    #[arg(long, value_enum)]
    metric: Option<MetricChoice>,
    /// Embedding size for --metric pullback
    #[arg(long)]
    k: Option<usize>,
}

#[derive(ValueEnum, Clone, Copy, Debug)]
enum MetricChoice {
    /// Closed-form reference geometry of the manifold
    Reference,
    /// One embedding realization's pullback metric
    Pullback,
}

#[derive(Args)]
struct GmfOpts {
    /// Codimension of the point set
    #[arg(long)]
    n: usize,
    /// Largest functional order in the table
    #[arg(long, default_value_t = 16)]
    jmax: usize,
}

#[derive(Args)]
struct GkfOpts {
    /// Manifold, e.g. torus:2pi,2pi or sphere:1
    #[arg(long, default_value = "torus:2pi,2pi")]
    manifold: String,
    /// Codimension of the zero set (number of independent fields)
    #[arg(long)]
    codim: usize,
    /// Quadrature nodes per axis for the atlas
    #[arg(long)]
    nodes: Option<usize>,
}

fn main() {
    let cli = Cli::parse();
    let outcome = match cli.cmd {
        Cmd::Converge(opts) => run_kind(ExperimentKind::Converge, &opts),
        Cmd::Lkc(opts) => run_lkc(&opts),
        Cmd::Unbiased(opts) => run_kind(ExperimentKind::Unbiased, &opts),
        Cmd::ZeroCount(opts) => run_kind(ExperimentKind::ZeroCount, &opts),
        Cmd::Gmf(opts) => run_gmf(&opts),
        Cmd::GkfTable(opts) => run_gkf_table(&opts),
    };
    if let Err(e) = outcome {
        eprintln!("error: {e}");
        std::process::exit(1);
    }
}

fn save_model_if_requested(opts: &CommonOpts, cfg: &ExperimentConfig) -> Result<()> {
    if let Some(path) = &opts.save_model {
        let atlas = cfg.build_atlas()?;
        let model = build_model(&atlas, cfg.waves, cfg.spectrum, cfg.seed)?;
        model.save(path)?;
        println!("model written to {}", path.display());
    }
    Ok(())
}

fn run_kind(kind: ExperimentKind, opts: &CommonOpts) -> Result<()> {
    let cfg = opts.resolve(kind)?;
    save_model_if_requested(opts, &cfg)?;
    let result = run_experiment(&cfg)?;
    let written = emit_outputs(&result)?;
    print_headline(&result);
    for path in written {
        println!("wrote {}", path.display());
    }
    Ok(())
}

fn run_lkc(opts: &LkcOpts) -> Result<()> {
    match opts.metric {
        None => run_kind(ExperimentKind::LkcConverge, &opts.common),
        Some(choice) => {
            // One-shot mode reuses the experiment config plumbing for the
            // manifold/model fields; replicate plumbing is unused.
            let cfg = opts.common.resolve(ExperimentKind::LkcConverge)?;
            save_model_if_requested(&opts.common, &cfg)?;
            let atlas = cfg.build_atlas()?;
            let values = match choice {
                MetricChoice::Reference => lkc(&atlas, &atlas.reference())?.values,
                MetricChoice::Pullback => {
                    let k = opts.k.ok_or_else(|| {
                        Error::invalid("--metric pullback needs --k (embedding size)")
                    })?;
                    let model = build_model(&atlas, cfg.waves, cfg.spectrum, cfg.seed)?;
                    let emb = EmbeddingRealization::realize(&model, k, cfg.seed)?;
                    let pullback = PullbackMetric {
                        emb: &emb,
                        atlas: &atlas,
                    };
                    lkc(&atlas, &pullback)?.values
                }
            };
            println!(
                "# curvature functionals: {} ({:?} metric)",
                cfg.manifold, choice
            );
            for (j, v) in values.iter().enumerate() {
                println!("L_{j} {v}");
            }
            Ok(())
        }
    }
}

fn run_gmf(opts: &GmfOpts) -> Result<()> {
    let table = gmf_point(opts.n, opts.jmax)?;
    println!(
        "# Gaussian Minkowski functionals of a codimension-{} point set",
        opts.n
    );
    println!("# j M_j");
    for (j, v) in table.values.iter().enumerate() {
        println!("{j} {v}");
    }
    Ok(())
}

fn run_gkf_table(opts: &GkfOpts) -> Result<()> {
    let spec: randemb::harness::ManifoldSpec = opts.manifold.parse()?;
    let atlas: ManifoldAtlas = spec.build(opts.nodes.unwrap_or_else(|| spec.default_nodes()))?;
    let m = atlas.m;
    if opts.codim == 0 || opts.codim > m {
        return Err(Error::invalid(format!(
            "codimension must be in 1..={m} for this manifold"
        )));
    }
    let reference = randemb::curvature::LKCVector {
        values: atlas.reference_lkc(),
    };
    let gmf = gmf_point(opts.codim, m)?;
    println!(
        "# expected functionals of the zero set of {} independent field(s) on {}",
        opts.codim, spec
    );
    println!("# reference manifold functionals: {:?}", reference.values);
    println!("# i E[L_i(zero set)]");
    for i in 0..=m {
        let predicted = gkf_rhs(i, &reference, &gmf, m)?;
        println!("{i} {predicted}");
    }
    Ok(())
}

/// Short stdout digest of a finished run; full detail lives in the JSON.
fn print_headline(result: &RunResult) {
    let summary = summarize(result);
    let cfg = &result.config;
    println!(
        "{}: manifold {}, waves {}, seed {}, {} replicate(s)",
        cfg.kind, cfg.manifold, cfg.waves, cfg.seed, cfg.replicates
    );
    for entry in summary["accounting"].as_array().into_iter().flatten() {
        if entry["excluded"].as_u64() != Some(0) {
            println!(
                "  k={}: {} replicate(s) excluded (see summary JSON)",
                entry["k"], entry["excluded"]
            );
        }
    }
    match cfg.kind {
        ExperimentKind::Converge => {
            for row in summary["stats"]["per_k"].as_array().into_iter().flatten() {
                println!(
                    "  k={}: median C0 {} C1 {} C2 {}",
                    row["k"], row["c0"]["median"], row["c1"]["median"], row["c2"]["median"]
                );
            }
            println!(
                "  median log-log slopes: {}",
                summary["stats"]["median_loglog_slopes"]
            );
        }
        ExperimentKind::LkcConverge => {
            for row in summary["stats"]["per_k"].as_array().into_iter().flatten() {
                let devs: Vec<String> = row["abs_deviation"]
                    .as_array()
                    .into_iter()
                    .flatten()
                    .enumerate()
                    .map(|(j, q)| format!("|L{j}-ref| {}", q["median"]))
                    .collect();
                println!("  k={}: median {}", row["k"], devs.join(", "));
            }
        }
        ExperimentKind::Unbiased => {
            for row in summary["stats"]["per_k"].as_array().into_iter().flatten() {
                for cell in row["per_j"].as_array().into_iter().flatten() {
                    if cell["z_vs_reference"].is_null() {
                        continue;
                    }
                    println!(
                        "  k={} L{}: mean {} se {} z {}",
                        row["k"], cell["j"], cell["mean"], cell["se"], cell["z_vs_reference"]
                    );
                }
            }
            for pair in summary["stats"]["cross_k"].as_array().into_iter().flatten() {
                if pair["z"].is_null() {
                    continue;
                }
                println!(
                    "  cross-k L{}: k={} vs k={} joint z {}",
                    pair["j"], pair["k_a"], pair["k_b"], pair["z"]
                );
            }
        }
        ExperimentKind::ZeroCount => {
            let stats = &summary["stats"];
            println!(
                "  predicted mean {}; observed mean {} (se {}, z {})",
                stats["prediction"],
                stats["all"]["moments"]["mean"],
                stats["all"]["moments"]["se"],
                stats["all"]["z_vs_prediction"]
            );
            let flagged = stats["flagged"]["replicates"]
                .as_array()
                .map_or(0, |a| a.len());
            if flagged > 0 {
                println!("  {flagged} replicate(s) carry flagged cells (see summary JSON)");
            }
        }
    }
}
