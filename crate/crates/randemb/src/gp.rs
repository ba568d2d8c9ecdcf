//! Random-wave Gaussian field models.
//!
//! A model is a finite superposition over the ambient space R^D,
//!
//!   f(x) = sum_q a_q cos<kappa_q, iota(x)> + b_q sin<kappa_q, iota(x)>,
//!
//! with iota the chart's ambient embedding and a_q, b_q ~ N(0, sigma_q^2)
//! independent. Construction enforces two exact moment constraints:
//!
//!   sum_q sigma_q^2 = 1                (unit pointwise variance)
//!   sum_q sigma_q^2 kappa kappa^T = I  (ambient isotropy)
//!
//! so the covariance of chart gradients reproduces the reference metric of
//! the atlas. Frequencies are drawn per the requested spectral shape and the
//! isotropy constraint is enforced post hoc: the frequency second moment is
//! whitened by its symmetric inverse square root and the amplitude vector is
//! rescaled by one scalar. Draws below the `D(D+1)/2 + 1` wave floor are
//! rejected since they cannot carry an isotropic second moment.
//!
//! Field evaluation routes through a per-point basis matrix whose columns
//! are the derivative jets of each cos/sin wave; a sample's jet is one
//! matrix-vector product, and second-moment quantities over many fields
//! reduce to bilinear forms in the coefficient Gram matrix.

use std::fmt::Write as _;

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;

use crate::atlas::{Chart, ChartPoint, ManifoldAtlas};
use crate::error::{Error, Result};
use crate::rng;
use crate::tensor::{sym2_pairs, sym3_triples, JetLayout};

const MODEL_STREAM_TAG: u64 = 0x6d6f_64656c;
const MOMENT_CONDITION_LIMIT: f64 = 1e6;

#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub enum SpectralShape {
    /// Frequencies uniform on the sphere of radius sqrt(D).
    UniformShell,
    /// Frequencies i.i.d. standard normal in R^D.
    GaussianIsotropic,
}

impl std::str::FromStr for SpectralShape {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "uniform-shell" => Ok(SpectralShape::UniformShell),
            "gaussian" => Ok(SpectralShape::GaussianIsotropic),
            other => Err(Error::Parse(format!(
                "unknown spectrum '{other}' (expected uniform-shell or gaussian)"
            ))),
        }
    }
}

impl std::fmt::Display for SpectralShape {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            SpectralShape::UniformShell => write!(f, "uniform-shell"),
            SpectralShape::GaussianIsotropic => write!(f, "gaussian"),
        }
    }
}

/// A frozen random-wave model: frequencies and amplitudes.
#[derive(Clone, Debug)]
pub struct GPModel {
    pub ambient_dim: usize,
    /// Q x D frequency matrix, one row per wave.
    freqs: DMatrix<f64>,
    /// Per-wave amplitudes sigma_q (standard deviations, not variances).
    amps: Vec<f64>,
}

impl GPModel {
    /// Assemble a model directly from parts. No moment constraints are
    /// enforced; this is the deserialization and testing entry point.
    pub fn from_parts(ambient_dim: usize, freqs: Vec<Vec<f64>>, amps: Vec<f64>) -> Result<Self> {
        if freqs.len() != amps.len() || freqs.is_empty() {
            return Err(Error::invalid("need equal, nonzero wave/amplitude counts"));
        }
        if freqs.iter().any(|k| k.len() != ambient_dim) {
            return Err(Error::invalid("frequency length must match ambient dim"));
        }
        if amps.iter().any(|&s| !(s >= 0.0) || !s.is_finite()) {
            return Err(Error::invalid("amplitudes must be finite and nonnegative"));
        }
        let q = freqs.len();
        let freqs = DMatrix::from_fn(q, ambient_dim, |r, c| freqs[r][c]);
        Ok(GPModel {
            ambient_dim,
            freqs,
            amps,
        })
    }

    pub fn num_waves(&self) -> usize {
        self.amps.len()
    }

    pub fn frequency(&self, q: usize) -> Vec<f64> {
        self.freqs.row(q).iter().cloned().collect()
    }

    pub fn amplitude(&self, q: usize) -> f64 {
        self.amps[q]
    }

    pub fn total_variance(&self) -> f64 {
        self.amps.iter().map(|s| s * s).sum()
    }

    /// sum_q sigma_q^2 kappa_q kappa_q^T
    pub fn second_moment(&self) -> DMatrix<f64> {
        let d = self.ambient_dim;
        let mut m = DMatrix::zeros(d, d);
        for q in 0..self.num_waves() {
            let s2 = self.amps[q] * self.amps[q];
            for a in 0..d {
                for b in 0..d {
                    m[(a, b)] += s2 * self.freqs[(q, a)] * self.freqs[(q, b)];
                }
            }
        }
        m
    }

    /// Covariance E f(p) f(q) between two manifold points.
    pub fn covariance(&self, atlas: &ManifoldAtlas, p: &ChartPoint, q: &ChartPoint) -> f64 {
        let xp = atlas.chart(p.chart).ambient_point(&p.x);
        let xq = atlas.chart(q.chart).ambient_point(&q.x);
        let mut total = 0.0;
        for w in 0..self.num_waves() {
            let mut dot = 0.0;
            for a in 0..self.ambient_dim {
                dot += self.freqs[(w, a)] * (xp[a] - xq[a]);
            }
            total += self.amps[w] * self.amps[w] * dot.cos();
        }
        total
    }

    /// Serialize to structured text with full decimal precision.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        writeln!(out, "randemb-gp-model v1").unwrap();
        writeln!(out, "ambient_dim {}", self.ambient_dim).unwrap();
        writeln!(out, "num_waves {}", self.num_waves()).unwrap();
        for q in 0..self.num_waves() {
            write!(out, "{:.17e}", self.amps[q]).unwrap();
            for a in 0..self.ambient_dim {
                write!(out, " {:.17e}", self.freqs[(q, a)]).unwrap();
            }
            writeln!(out).unwrap();
        }
        out
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut lines = text.lines();
        let header = lines.next().unwrap_or("");
        if header.trim() != "randemb-gp-model v1" {
            return Err(Error::Parse("unrecognized model header".into()));
        }
        let parse_kv = |line: Option<&str>, key: &str| -> Result<usize> {
            let line = line.ok_or_else(|| Error::Parse(format!("missing {key}")))?;
            let mut it = line.split_whitespace();
            if it.next() != Some(key) {
                return Err(Error::Parse(format!("expected {key} line")));
            }
            it.next()
                .and_then(|v| v.parse().ok())
                .ok_or_else(|| Error::Parse(format!("bad {key} value")))
        };
        let d = parse_kv(lines.next(), "ambient_dim")?;
        let q = parse_kv(lines.next(), "num_waves")?;
        let mut freqs = Vec::with_capacity(q);
        let mut amps = Vec::with_capacity(q);
        for _ in 0..q {
            let line = lines
                .next()
                .ok_or_else(|| Error::Parse("truncated wave table".into()))?;
            let vals: Vec<f64> = line
                .split_whitespace()
                .map(|t| {
                    t.parse::<f64>()
                        .map_err(|e| Error::Parse(format!("bad float '{t}': {e}")))
                })
                .collect::<Result<_>>()?;
            if vals.len() != d + 1 {
                return Err(Error::Parse("wave row has wrong arity".into()));
            }
            amps.push(vals[0]);
            freqs.push(vals[1..].to_vec());
        }
        GPModel::from_parts(d, freqs, amps)
    }

    pub fn save(&self, path: &std::path::Path) -> Result<()> {
        std::fs::write(path, self.to_text())?;
        Ok(())
    }

    pub fn load(path: &std::path::Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        GPModel::from_text(&text)
    }
}

/// Build a model over the atlas' ambient space with both moment constraints
/// enforced. Deterministic given the seed.
pub fn build_model(
    atlas: &ManifoldAtlas,
    num_waves: usize,
    shape: SpectralShape,
    seed: u64,
) -> Result<GPModel> {
    build_model_ambient(atlas.ambient_dim, num_waves, shape, seed)
}

pub fn build_model_ambient(
    ambient_dim: usize,
    num_waves: usize,
    shape: SpectralShape,
    seed: u64,
) -> Result<GPModel> {
    let d = ambient_dim;
    let floor = d * (d + 1) / 2 + 1;
    if num_waves < floor {
        return Err(Error::invalid(format!(
            "num_waves {num_waves} below floor {floor} for ambient dimension {d}"
        )));
    }
    let mut rng = rng::stream(seed, &[MODEL_STREAM_TAG]);
    let mut freqs = DMatrix::zeros(num_waves, d);
    for q in 0..num_waves {
        let mut k: Vec<f64> = (0..d)
            .map(|_| rng.sample::<f64, _>(StandardNormal))
            .collect();
        if shape == SpectralShape::UniformShell {
            let norm = k.iter().map(|v| v * v).sum::<f64>().sqrt();
            if norm < 1e-12 {
                return Err(Error::ModelConstruction("degenerate direction draw".into()));
            }
            let scale = (d as f64).sqrt() / norm;
            for v in &mut k {
                *v *= scale;
            }
        }
        for (a, v) in k.iter().enumerate() {
            freqs[(q, a)] = *v;
        }
    }
    let amp = (1.0 / num_waves as f64).sqrt();
    let mut model = GPModel {
        ambient_dim: d,
        freqs,
        amps: vec![amp; num_waves],
    };
    // Whiten the frequency second moment; one polish pass brings the
    // residual to rounding level.
    for _ in 0..2 {
        let m = model.second_moment();
        let eig = m.clone().symmetric_eigen();
        let lo = eig.eigenvalues.min();
        let hi = eig.eigenvalues.max();
        if !(lo > 0.0) || hi / lo > MOMENT_CONDITION_LIMIT {
            return Err(Error::ModelConstruction(format!(
                "frequency moment matrix is singular or ill-conditioned \
                 (min eigenvalue {lo:.3e}, condition {:.3e})",
                hi / lo.max(f64::MIN_POSITIVE)
            )));
        }
        let resid = (&m - DMatrix::identity(d, d)).amax();
        if resid < 1e-13 {
            break;
        }
        let mut w = DMatrix::zeros(d, d);
        for i in 0..d {
            let vi = eig.eigenvectors.column(i);
            let s = 1.0 / eig.eigenvalues[i].sqrt();
            for a in 0..d {
                for b in 0..d {
                    w[(a, b)] += s * vi[a] * vi[b];
                }
            }
        }
        model.freqs = &model.freqs * &w; // rows kappa^T -> kappa^T W (W symmetric)
    }
    // Single scalar amplitude rescale to pin unit total variance exactly.
    let total = model.total_variance();
    let scale = (1.0 / total).sqrt();
    for s in &mut model.amps {
        *s *= scale;
    }
    Ok(model)
}

/// One realization of the model's Gaussian coefficients.
/// Layout: coefs[2q] = a_q, coefs[2q+1] = b_q.
#[derive(Clone, Debug)]
pub struct GPSample {
    pub seed: u64,
    pub coefs: DVector<f64>,
}

/// Draw the coefficient pair for every wave. Deterministic given the seed;
/// distinct seeds use distinct counter-based streams.
pub fn sample(model: &GPModel, seed: u64) -> GPSample {
    let mut rng = rng::stream(seed, &[]);
    let q = model.num_waves();
    let mut coefs = DVector::zeros(2 * q);
    for w in 0..q {
        let s = model.amps[w];
        coefs[2 * w] = s * rng.sample::<f64, _>(StandardNormal);
        coefs[2 * w + 1] = s * rng.sample::<f64, _>(StandardNormal);
    }
    GPSample { seed, coefs }
}

/// Scalar-field jet at a point: value, gradient, symmetric second and third
/// chart partials.
#[derive(Clone, Debug)]
pub struct JetValue {
    pub m: usize,
    pub value: f64,
    pub grad: Vec<f64>,
    hess: Vec<f64>,
    third: Vec<f64>,
}

impl JetValue {
    /// Assemble a jet from explicit components. `hess` and `third` are in
    /// canonical symmetric-slot order (see `tensor::sym2_pairs` /
    /// `sym3_triples`), which makes the symmetries exact by construction.
    pub fn from_parts(
        m: usize,
        value: f64,
        grad: Vec<f64>,
        hess: Vec<f64>,
        third: Vec<f64>,
    ) -> Result<Self> {
        if grad.len() != m
            || hess.len() != crate::tensor::sym2_len(m)
            || third.len() != crate::tensor::sym3_len(m)
        {
            return Err(Error::invalid("jet component arity mismatch"));
        }
        Ok(JetValue {
            m,
            value,
            grad,
            hess,
            third,
        })
    }

    pub fn hess(&self, i: usize, j: usize) -> f64 {
        self.hess[crate::tensor::sym2_idx(self.m, i, j)]
    }

    pub fn third(&self, i: usize, j: usize, l: usize) -> f64 {
        self.third[crate::tensor::sym3_idx(self.m, i, j, l)]
    }
}

/// Per-point wave jet basis: column 2q is the jet of cos<kappa_q, iota(.)>,
/// column 2q+1 the jet of sin<kappa_q, iota(.)>, rows in `JetLayout` order.
pub struct WaveJetBasis {
    pub layout: JetLayout,
    pub b: DMatrix<f64>,
}

pub fn wave_jet_basis(model: &GPModel, chart: &Chart, x: &[f64]) -> WaveJetBasis {
    let m = chart.m;
    let layout = JetLayout::new(m);
    let rows = layout.len();
    let jet = chart.ambient_jet(x);
    let d = jet.dim_ambient;
    let nq = model.num_waves();
    let pairs = sym2_pairs(m);
    let triples = sym3_triples(m);
    let mut b = DMatrix::zeros(rows, 2 * nq);
    let mut u = vec![0.0; m];
    let mut v = vec![0.0; pairs.len()];
    let mut w3 = vec![0.0; triples.len()];
    for q in 0..nq {
        let kq = model.freqs.row(q);
        let mut t = 0.0;
        for a in 0..d {
            t += kq[a] * jet.value[a];
        }
        for (i, ui) in u.iter_mut().enumerate() {
            *ui = (0..d).map(|a| kq[a] * jet.jac_at(a, i)).sum();
        }
        for (slot, &(i, j)) in pairs.iter().enumerate() {
            v[slot] = (0..d).map(|a| kq[a] * jet.hess_at(a, i, j)).sum();
        }
        for (slot, &(i, j, l)) in triples.iter().enumerate() {
            w3[slot] = (0..d).map(|a| kq[a] * jet.third_at(a, i, j, l)).sum();
        }
        let (s, c) = t.sin_cos();
        let (ca, cb) = (2 * q, 2 * q + 1);
        // wave value g(t) with phase t: cos column ca, sin column cb;
        // chain rule uses g', g'' = -g, g''' = -g'.
        b[(layout.value(), ca)] = c;
        b[(layout.value(), cb)] = s;
        for i in 0..m {
            b[(layout.grad(i), ca)] = -s * u[i];
            b[(layout.grad(i), cb)] = c * u[i];
        }
        for (slot, &(i, j)) in pairs.iter().enumerate() {
            let row = layout.hess(i, j);
            let uu = u[i] * u[j];
            b[(row, ca)] = -c * uu - s * v[slot];
            b[(row, cb)] = -s * uu + c * v[slot];
        }
        for (slot, &(i, j, l)) in triples.iter().enumerate() {
            let row = layout.third(i, j, l);
            let uuu = u[i] * u[j] * u[l];
            let uv = u[i] * v[pairs.iter().position(|&p| p == sorted2(j, l)).unwrap()]
                + u[j] * v[pairs.iter().position(|&p| p == sorted2(i, l)).unwrap()]
                + u[l] * v[pairs.iter().position(|&p| p == sorted2(i, j)).unwrap()];
            b[(row, ca)] = s * uuu - c * uv - s * w3[slot];
            b[(row, cb)] = -c * uuu - s * uv + c * w3[slot];
        }
    }
    WaveJetBasis { layout, b }
}

fn sorted2(i: usize, j: usize) -> (usize, usize) {
    if i <= j {
        (i, j)
    } else {
        (j, i)
    }
}

/// Full derivative jet of one sampled field at a chart point.
pub fn eval_jet(model: &GPModel, s: &GPSample, atlas: &ManifoldAtlas, p: &ChartPoint) -> JetValue {
    let chart = atlas.chart(p.chart);
    let basis = wave_jet_basis(model, chart, &p.x);
    let jet = &basis.b * &s.coefs;
    let m = chart.m;
    let lay = &basis.layout;
    JetValue {
        m,
        value: jet[lay.value()],
        grad: (0..m).map(|i| jet[lay.grad(i)]).collect(),
        hess: sym2_pairs(m)
            .iter()
            .map(|&(i, j)| jet[lay.hess(i, j)])
            .collect(),
        third: sym3_triples(m)
            .iter()
            .map(|&(i, j, l)| jet[lay.third(i, j, l)])
            .collect(),
    }
}

/// Field value only (cheap path for dense sign grids).
pub fn eval_value(model: &GPModel, s: &GPSample, chart: &Chart, x: &[f64]) -> f64 {
    let point = chart.ambient_point(x);
    let d = point.len();
    let mut total = 0.0;
    for q in 0..model.num_waves() {
        let mut t = 0.0;
        for a in 0..d {
            t += model.freqs[(q, a)] * point[a];
        }
        let (s_t, c_t) = t.sin_cos();
        total += s.coefs[2 * q] * c_t + s.coefs[2 * q + 1] * s_t;
    }
    total
}

///// Covariance-induced metric of the model at a chart point:
/// g^C = J^T (sum sigma^2 kappa kappa^T) J.
///
/// Errors with a degeneracy report when the chart Jacobian is rank deficient
/// at the point, because the induced bilinear form is then not a metric.
pub fn induced_metric(
    model: &GPModel,
    atlas: &ManifoldAtlas,
    p: &ChartPoint,
) -> Result<DMatrix<f64>> {
    let chart = atlas.chart(p.chart);
    let jet = chart.ambient_jet(&p.x);
    let m = chart.m;
    let d = jet.dim_ambient;
    let jac = DMatrix::from_fn(d, m, |a, i| jet.jac_at(a, i));
    let gram = jac.transpose() * &jac;
    let eig = gram.symmetric_eigen();
    let max_eig = eig.eigenvalues.iter().cloned().fold(f64::MIN, f64::max);
    let min_eig = eig.eigenvalues.iter().cloned().fold(f64::MAX, f64::min);
    if min_eig <= max_eig * 1e-12 {
        return Err(Error::DegenerateMetric(format!(
            "rank-deficient chart Jacobian (singular values^2 in [{min_eig:.3e}, {max_eig:.3e}])"
        )));
    }
    let moment = model.second_moment();
    Ok(jac.transpose() * moment * jac)
}
