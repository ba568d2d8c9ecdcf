//! Random embeddings assembled from k independent field samples, the
//! pullback metric with exact chart partials to order two, and Banach-norm
//! deviation measurement against a target metric.
//!
//! The embedding is h(x) = (1/sqrt(k)) (f_1(x), ..., f_k(x)). Its pullback
//! of the ambient Euclidean metric has components
//!
//!   g_ij(x) = (1/k) sum_l d_i f_l(x) d_j f_l(x),
//!
//! and first/second chart partials obtained by the exact product rule on
//! each field's derivative jet. All per-point quantities are bilinear in
//! the coefficient vectors, so a realization precomputes the coefficient
//! Gram matrix C = sum_l c_l c_l^T once; every point then needs a single
//! basis matrix B and the symmetric product (1/k) B C B^T, making the cost
//! per point independent of k.

use nalgebra::DMatrix;

use crate::atlas::{ChartPoint, ManifoldAtlas};
use crate::error::{Error, Result};
use crate::gp::{sample, wave_jet_basis, GPModel, GPSample};
use crate::metric::{MetricEval, MetricJet, MetricJetEval};
use crate::rng;
use crate::tensor::{sym2_pairs, JetLayout};

/// k sampled fields from one model, with the coefficient Gram matrix
/// cached for k-independent per-point work.
#[derive(Clone, Debug)]
pub struct EmbeddingRealization {
    model: GPModel,
    k: usize,
    samples: Vec<GPSample>,
    /// sum_l coefs_l coefs_l^T, size 2Q x 2Q.
    gram: DMatrix<f64>,
}

impl EmbeddingRealization {
    /// Draw k independent fields. Field l uses the seed derived from
    /// `seed` and the label l, so realizations are reproducible and
    /// distinct fields never share a stream.
    pub fn realize(model: &GPModel, k: usize, seed: u64) -> Result<Self> {
        if k == 0 {
            return Err(Error::invalid("embedding needs k >= 1 fields"));
        }
        let samples: Vec<GPSample> = (0..k)
            .map(|l| sample(model, rng::derive_seed(seed, &[l as u64])))
            .collect();
        Self::from_samples(model, samples)
    }

    /// Assemble from explicit samples (all from the given model).
    pub fn from_samples(model: &GPModel, samples: Vec<GPSample>) -> Result<Self> {
        if samples.is_empty() {
            return Err(Error::invalid("embedding needs k >= 1 fields"));
        }
        let n = 2 * model.num_waves();
        if samples.iter().any(|s| s.coefs.len() != n) {
            return Err(Error::invalid("sample coefficient arity mismatch"));
        }
        let mut gram = DMatrix::zeros(n, n);
        for s in &samples {
            gram.ger(1.0, &s.coefs, &s.coefs, 1.0);
        }
        Ok(EmbeddingRealization {
            model: model.clone(),
            k: samples.len(),
            samples,
            gram,
        })
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn model(&self) -> &GPModel {
        &self.model
    }

    pub fn samples(&self) -> &[GPSample] {
        &self.samples
    }

    /// h(x) = (1/sqrt(k)) (f_1(x), ..., f_k(x)).
    pub fn embed_point(&self, atlas: &ManifoldAtlas, p: &ChartPoint) -> Vec<f64> {
        let chart = atlas.chart(p.chart);
        let basis = wave_jet_basis(&self.model, chart, &p.x);
        let vrow = basis.b.row(basis.layout.value());
        let norm = 1.0 / (self.k as f64).sqrt();
        self.samples
            .iter()
            .map(|s| norm * vrow.transpose().dot(&s.coefs))
            .collect()
    }

    /// Jet second-moment matrix (1/k) B C B^T at a point: entry (r, s) is
    /// (1/k) sum_l (jet_l)_r (jet_l)_s over the realization's fields.
    fn jet_moment(&self, atlas: &ManifoldAtlas, p: &ChartPoint) -> (JetLayout, DMatrix<f64>) {
        let chart = atlas.chart(p.chart);
        let basis = wave_jet_basis(&self.model, chart, &p.x);
        let bc = &basis.b * &self.gram;
        let mut m = bc * basis.b.transpose();
        m.scale_mut(1.0 / self.k as f64);
        (basis.layout, m)
    }

    /// Pullback metric and its exact first and second chart partials.
    pub fn pullback_jet(&self, atlas: &ManifoldAtlas, p: &ChartPoint) -> MetricJet {
        let (lay, mm) = self.jet_moment(atlas, p);
        let m = atlas.m;
        let mut jet = MetricJet::zeros(m);
        for &(i, j) in &sym2_pairs(m) {
            jet.set_g(i, j, mm[(lay.grad(i), lay.grad(j))]);
            for p_ in 0..m {
                let v = mm[(lay.hess(p_, i), lay.grad(j))] + mm[(lay.grad(i), lay.hess(p_, j))];
                jet.set_dg(p_, i, j, v);
            }
            for &(q, p_) in &sym2_pairs(m) {
                let v = mm[(lay.third(q, p_, i), lay.grad(j))]
                    + mm[(lay.hess(p_, i), lay.hess(q, j))]
                    + mm[(lay.hess(q, i), lay.hess(p_, j))]
                    + mm[(lay.grad(i), lay.third(q, p_, j))];
                jet.set_ddg(q, p_, i, j, v);
            }
        }
        jet
    }

    /// Pullback metric matrix only (no partials). Exactly symmetric: both
    /// triangles read the same canonically ordered moment entry, matching
    /// the jet's storage convention.
    pub fn pullback_metric(&self, atlas: &ManifoldAtlas, p: &ChartPoint) -> DMatrix<f64> {
        let (lay, mm) = self.jet_moment(atlas, p);
        let m = atlas.m;
        DMatrix::from_fn(m, m, |i, j| mm[(lay.grad(i.min(j)), lay.grad(i.max(j)))])
    }
}

/// Adapter exposing a realization's pullback metric through the generic
/// per-point evaluator traits.
pub struct PullbackMetric<'a> {
    pub emb: &'a EmbeddingRealization,
    pub atlas: &'a ManifoldAtlas,
}

impl MetricEval for PullbackMetric<'_> {
    fn metric(&self, chart: usize, x: &[f64]) -> DMatrix<f64> {
        self.emb
            .pullback_metric(self.atlas, &ChartPoint::new(chart, x.to_vec()))
    }
}

impl MetricJetEval for PullbackMetric<'_> {
    fn metric_jet(&self, chart: usize, x: &[f64]) -> MetricJet {
        self.emb
            .pullback_jet(self.atlas, &ChartPoint::new(chart, x.to_vec()))
    }
}

/// Banach-norm deviation of the pullback metric from a target metric:
/// for each chart and component pair, the grid max of |u| plus the grid
/// maxes of all chart partials of u up to `order` (one term per distinct
/// multi-index), where u = (pullback - target)_ij; the result is the
/// maximum over charts and component pairs. Orders 0, 1, 2 are supported.
pub fn ci_deviation_norm(
    emb: &EmbeddingRealization,
    atlas: &ManifoldAtlas,
    target: &dyn MetricJetEval,
    order: usize,
    grid: usize,
) -> Result<f64> {
    Ok(ci_deviation_norms(emb, atlas, target, order, grid)?[order])
}

/// All deviation norms of order 0..=order in one sweep (the order-i norm
/// nests inside the order-(i+1) norm, so one pass serves every order).
pub fn ci_deviation_norms(
    emb: &EmbeddingRealization,
    atlas: &ManifoldAtlas,
    target: &dyn MetricJetEval,
    order: usize,
    grid: usize,
) -> Result<Vec<f64>> {
    if order > 2 {
        return Err(Error::UnsupportedOrder(order));
    }
    if grid == 0 {
        return Err(Error::invalid("evaluation grid must be nonempty"));
    }
    let m = atlas.m;
    let pairs = sym2_pairs(m);
    let mut norms = vec![f64::NEG_INFINITY; order + 1];
    for chart in 0..atlas.charts.len() {
        // per-component grid sups: value, each first partial, each
        // distinct second multi-index
        let mut sup0 = vec![0.0f64; pairs.len()];
        let mut sup1 = vec![vec![0.0f64; pairs.len()]; m];
        let mut sup2 = vec![vec![0.0f64; pairs.len()]; pairs.len()];
        for x in atlas.chart_grid(chart, grid) {
            let jp = emb.pullback_jet(atlas, &ChartPoint::new(chart, x.clone()));
            let jt = target.metric_jet(chart, &x);
            for (slot, &(i, j)) in pairs.iter().enumerate() {
                let d = (jp.g(i, j) - jt.g(i, j)).abs();
                sup0[slot] = sup0[slot].max(d);
                if order >= 1 {
                    for p in 0..m {
                        let d = (jp.dg(p, i, j) - jt.dg(p, i, j)).abs();
                        sup1[p][slot] = sup1[p][slot].max(d);
                    }
                }
                if order >= 2 {
                    for (pq, &(q, p)) in pairs.iter().enumerate() {
                        let d = (jp.ddg(p, q, i, j) - jt.ddg(p, q, i, j)).abs();
                        sup2[pq][slot] = sup2[pq][slot].max(d);
                    }
                }
            }
        }
        for slot in 0..pairs.len() {
            let mut total = sup0[slot];
            norms[0] = norms[0].max(total);
            if order >= 1 {
                for p in 0..m {
                    total += sup1[p][slot];
                }
                norms[1] = norms[1].max(total);
            }
            if order >= 2 {
                for pq in 0..pairs.len() {
                    total += sup2[pq][slot];
                }
                norms[2] = norms[2].max(total);
            }
        }
    }
    Ok(norms)
}
