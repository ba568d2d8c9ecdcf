//! Experiment configuration: manifold/spectrum selectors, optional config
//! files, flag merging and validation.
//!
//! Configuration is assembled in three layers. A [`PartialConfig`] holds
//! whatever a source provided (every field optional); partials from the
//! command line and from a structured text file merge with
//! [`PartialConfig::or`] (first operand wins), and
//! [`ExperimentConfig::resolve`] fills the remaining holes with defaults and
//! validates the result. Nothing is computed and no file is written unless
//! validation passes.

use std::f64::consts::PI;
use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use serde::Deserialize;

use crate::atlas::{make_flat_torus, make_round_sphere, ManifoldAtlas};
use crate::error::{Error, Result};
use crate::gp::SpectralShape;
use crate::tensor::sym2_len;

/// Which experiment a run executes.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ExperimentKind {
    /// Metric deviation norms of the embedding pullback vs the reference.
    Converge,
    /// Curvature functionals of the pullback metric vs closed forms.
    LkcConverge,
    /// Fixed-k sample means of curvature functionals vs closed forms.
    Unbiased,
    /// Simultaneous zeros of two independent fields vs the kinematic
    /// prediction.
    ZeroCount,
}

impl ExperimentKind {
    pub fn name(self) -> &'static str {
        match self {
            ExperimentKind::Converge => "converge",
            ExperimentKind::LkcConverge => "lkc-converge",
            ExperimentKind::Unbiased => "unbiased",
            ExperimentKind::ZeroCount => "zero-count",
        }
    }

    /// Label mixed into every seed derivation so distinct experiment kinds
    /// never share replicate streams.
    pub(crate) fn seed_tag(self) -> u64 {
        match self {
            ExperimentKind::Converge => 0x636f_6e76,
            ExperimentKind::LkcConverge => 0x6c6b_6363,
            ExperimentKind::Unbiased => 0x756e_6269,
            ExperimentKind::ZeroCount => 0x7a65_726f,
        }
    }

    fn default_k_list(self) -> Vec<usize> {
        match self {
            ExperimentKind::Converge | ExperimentKind::LkcConverge => vec![64, 256, 1024, 4096],
            ExperimentKind::Unbiased => vec![10, 50],
            // The zero-count statistic involves no embedding, so k is unused;
            // a singleton keeps the row indexing uniform.
            ExperimentKind::ZeroCount => vec![1],
        }
    }

    fn default_replicates(self) -> usize {
        match self {
            ExperimentKind::Converge | ExperimentKind::LkcConverge => 50,
            ExperimentKind::Unbiased | ExperimentKind::ZeroCount => 400,
        }
    }

    /// Whether the experiment actually consumes the embedding size list.
    pub fn uses_k(self) -> bool {
        !matches!(self, ExperimentKind::ZeroCount)
    }
}

impl FromStr for ExperimentKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "converge" => Ok(ExperimentKind::Converge),
            "lkc-converge" => Ok(ExperimentKind::LkcConverge),
            "unbiased" => Ok(ExperimentKind::Unbiased),
            "zero-count" => Ok(ExperimentKind::ZeroCount),
            other => Err(Error::Parse(format!(
                "unknown experiment kind '{other}' \
                 (expected converge, lkc-converge, unbiased or zero-count)"
            ))),
        }
    }
}

impl fmt::Display for ExperimentKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Built-in manifold selector, parsed from strings like `torus:2pi,2pi` or
/// `sphere:1`. Numeric tokens accept an optional `pi` suffix with a scalar
/// prefix (`pi`, `2pi`, `0.5pi`).
#[derive(Clone, Debug, PartialEq)]
pub enum ManifoldSpec {
    Torus { periods: Vec<f64> },
    Sphere { radius: f64 },
}

impl ManifoldSpec {
    pub fn dim(&self) -> usize {
        match self {
            ManifoldSpec::Torus { periods } => periods.len(),
            ManifoldSpec::Sphere { .. } => 2,
        }
    }

    pub fn ambient_dim(&self) -> usize {
        match self {
            ManifoldSpec::Torus { periods } => 2 * periods.len(),
            ManifoldSpec::Sphere { .. } => 3,
        }
    }

    /// Quadrature nodes per axis when the user does not override them. The
    /// torus trapezoid rule converges spectrally on periodic integrands; the
    /// sphere cap charts use Gauss-Legendre panels.
    pub fn default_nodes(&self) -> usize {
        match self {
            ManifoldSpec::Torus { .. } => 24,
            ManifoldSpec::Sphere { .. } => 16,
        }
    }

    pub fn build(&self, nodes: usize) -> Result<ManifoldAtlas> {
        match self {
            ManifoldSpec::Torus { periods } => make_flat_torus(periods, nodes),
            ManifoldSpec::Sphere { radius } => make_round_sphere(*radius, nodes),
        }
    }
}

impl FromStr for ManifoldSpec {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        let (kind, rest) = s
            .split_once(':')
            .ok_or_else(|| Error::Parse(format!("manifold '{s}' lacks ':<parameters>'")))?;
        match kind {
            "torus" => {
                let periods = rest
                    .split(',')
                    .map(parse_scaled_pi)
                    .collect::<Result<Vec<f64>>>()?;
                if periods.is_empty() || periods.iter().any(|&p| !(p > 0.0) || !p.is_finite()) {
                    return Err(Error::Parse(format!(
                        "torus periods must be positive and finite, got '{rest}'"
                    )));
                }
                Ok(ManifoldSpec::Torus { periods })
            }
            "sphere" => {
                let radius = parse_scaled_pi(rest)?;
                if !(radius > 0.0) || !radius.is_finite() {
                    return Err(Error::Parse(format!(
                        "sphere radius must be positive and finite, got '{rest}'"
                    )));
                }
                Ok(ManifoldSpec::Sphere { radius })
            }
            other => Err(Error::Parse(format!(
                "unknown manifold family '{other}' (expected torus or sphere)"
            ))),
        }
    }
}

impl fmt::Display for ManifoldSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ManifoldSpec::Torus { periods } => {
                write!(f, "torus:")?;
                for (i, p) in periods.iter().enumerate() {
                    if i > 0 {
                        write!(f, ",")?;
                    }
                    write!(f, "{p}")?;
                }
                Ok(())
            }
            ManifoldSpec::Sphere { radius } => write!(f, "sphere:{radius}"),
        }
    }
}

/// Parse a float that may carry a `pi` suffix: `2pi`, `pi`, `0.5pi`, `6.28`.
fn parse_scaled_pi(s: &str) -> Result<f64> {
    let t = s.trim();
    let parse = |v: &str| -> Result<f64> {
        v.parse::<f64>()
            .map_err(|_| Error::Parse(format!("cannot parse number '{t}'")))
    };
    if let Some(prefix) = t.strip_suffix("pi") {
        let scale = if prefix.is_empty() {
            1.0
        } else {
            parse(prefix)?
        };
        Ok(scale * PI)
    } else {
        parse(t)
    }
}

/// One source's worth of configuration; every field optional. Deserializes
/// from the structured text config file and is also built from command-line
/// flags.
#[derive(Clone, Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PartialConfig {
    pub manifold: Option<String>,
    pub waves: Option<usize>,
    pub spectrum: Option<String>,
    pub seed: Option<u64>,
    pub k_list: Option<Vec<usize>>,
    pub replicates: Option<usize>,
    pub grid: Option<usize>,
    pub nodes: Option<usize>,
    pub threads: Option<usize>,
    pub out_dir: Option<PathBuf>,
    pub plot: Option<bool>,
}

impl PartialConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Parse(format!("config file: {e}")))
    }

    /// Field-wise merge; `self` (the higher-priority source) wins wherever it
    /// has a value.
    pub fn or(self, fallback: PartialConfig) -> PartialConfig {
        PartialConfig {
            manifold: self.manifold.or(fallback.manifold),
            waves: self.waves.or(fallback.waves),
            spectrum: self.spectrum.or(fallback.spectrum),
            seed: self.seed.or(fallback.seed),
            k_list: self.k_list.or(fallback.k_list),
            replicates: self.replicates.or(fallback.replicates),
            grid: self.grid.or(fallback.grid),
            nodes: self.nodes.or(fallback.nodes),
            threads: self.threads.or(fallback.threads),
            out_dir: self.out_dir.or(fallback.out_dir),
            plot: self.plot.or(fallback.plot),
        }
    }
}

/// Fully resolved, validated experiment configuration. Every run output is a
/// pure function of this value; worker count (`threads`) affects scheduling
/// only, never results.
#[derive(Clone, Debug)]
pub struct ExperimentConfig {
    pub kind: ExperimentKind,
    pub manifold: ManifoldSpec,
    pub waves: usize,
    pub spectrum: SpectralShape,
    /// Root seed; all per-replicate and per-field seeds derive from it.
    pub seed: u64,
    pub k_list: Vec<usize>,
    pub replicates: usize,
    /// Evaluation grid density per axis for deviation norms.
    pub grid: usize,
    /// Quadrature nodes per axis for curvature integrals.
    pub nodes: usize,
    /// Worker threads; 0 means the library default.
    pub threads: usize,
    pub out_dir: PathBuf,
    pub plot: bool,
}

impl ExperimentConfig {
    /// Apply per-kind defaults to the merged partial and validate.
    pub fn resolve(kind: ExperimentKind, partial: PartialConfig) -> Result<Self> {
        let manifold: ManifoldSpec = partial
            .manifold
            .as_deref()
            .unwrap_or("torus:2pi,2pi")
            .parse()?;
        let spectrum: SpectralShape = partial
            .spectrum
            .as_deref()
            .unwrap_or("uniform-shell")
            .parse()?;
        let nodes = partial.nodes.unwrap_or_else(|| manifold.default_nodes());
        let cfg = ExperimentConfig {
            kind,
            waves: partial.waves.unwrap_or(64),
            seed: partial.seed.unwrap_or(1),
            k_list: partial.k_list.unwrap_or_else(|| kind.default_k_list()),
            replicates: partial
                .replicates
                .unwrap_or_else(|| kind.default_replicates()),
            grid: partial.grid.unwrap_or(64),
            nodes,
            threads: partial.threads.unwrap_or(0),
            out_dir: partial.out_dir.unwrap_or_else(|| PathBuf::from("out")),
            plot: partial.plot.unwrap_or(false),
            manifold,
            spectrum,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |msg: String| Err(Error::ConfigValidation(msg));
        if self.replicates < 1 {
            return fail("replicates must be >= 1".into());
        }
        if self.kind.uses_k() {
            if self.k_list.is_empty() {
                return fail("k_list must be nonempty".into());
            }
            if self.k_list.contains(&0) {
                return fail("k_list entries must be >= 1".into());
            }
        }
        let m = self.manifold.dim();
        if self.kind == ExperimentKind::Unbiased {
            if let Some(&bad) = self.k_list.iter().find(|&&k| k <= 2 * m) {
                return fail(format!(
                    "unbiased needs every k above the embedding threshold 2m = {}; got k = {bad}",
                    2 * m
                ));
            }
        }
        if self.kind == ExperimentKind::ZeroCount && m != 2 {
            return fail(format!(
                "zero-count handles the surface point-counting case (m = 2), got m = {m}"
            ));
        }
        let d = self.manifold.ambient_dim();
        let floor = sym2_len(d) + 1;
        if self.waves < floor {
            return fail(format!(
                "waves = {} cannot carry an isotropic second moment in R^{d}; need >= {floor}",
                self.waves
            ));
        }
        if self.grid == 0 {
            return fail("grid must be >= 1".into());
        }
        if self.nodes < 2 {
            return fail("nodes must be >= 2".into());
        }
        Ok(())
    }

    pub fn build_atlas(&self) -> Result<ManifoldAtlas> {
        self.manifold.build(self.nodes)
    }
}
