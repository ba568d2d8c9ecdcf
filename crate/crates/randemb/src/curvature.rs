//! Intrinsic curvature from a metric jet, and curvature functionals by
//! quadrature: Christoffel symbols, the Riemann tensor, covariant Hessians,
//! double-form powers and traces, Lipschitz-Killing curvatures, and the
//! Euclidean tube-volume polynomial.
//!
//! Conventions (pinned by the exact checks below and by the unit-sphere
//! acceptance values):
//!
//!   Gamma^n_{jk} = 1/2 g^{nl} (d_k g_{lj} + d_j g_{lk} - d_l g_{jk})
//!   R_{ijkl} = 1/2 (d_j d_k g_{il} + d_i d_l g_{jk}
//!                 - d_j d_l g_{ik} - d_i d_k g_{jl})
//!            + g_{np} (Gamma^n_{jk} Gamma^p_{il} - Gamma^n_{jl} Gamma^p_{ik})
//!
//! Under these signs the round unit sphere has R_{1212} = sin^2(theta) and
//! sectional curvature +1. Double forms are stored on increasing index
//! tuples; products sum over ordered splits with shuffle signs and the
//! trace sums the diagonal in an orthonormal frame. With that normalization
//! the trace of R on a 2-manifold is the Gauss curvature, and
//!
//!   L_j = (2 pi)^{-q} / q!  *  integral of Tr(R^q) dVol,   q = (m - j)/2
//!
//! for m - j even (zero for odd m - j) reproduces L_0 = Euler
//! characteristic and L_m = Riemannian volume.

use nalgebra::DMatrix;

use crate::atlas::ManifoldAtlas;
use crate::error::{Error, Result};
use crate::gp::JetValue;
use crate::intgeo::ball_volume;
use crate::metric::{MetricJet, MetricJetEval};
use crate::tensor::{sym2_idx, sym2_len};

/// Failure threshold for metric inversion.
const METRIC_CONDITION_LIMIT: f64 = 1e12;

/// Christoffel symbols of the second kind at one point.
/// Symmetric in the lower pair exactly by canonical-slot storage.
#[derive(Clone, Debug)]
pub struct ChristoffelField {
    m: usize,
    /// gamma[n * sym2_len + slot(j, k)]
    gamma: Vec<f64>,
}

impl ChristoffelField {
    pub fn dim(&self) -> usize {
        self.m
    }

    /// Gamma^n_{jk}
    pub fn gamma(&self, n: usize, j: usize, k: usize) -> f64 {
        self.gamma[n * sym2_len(self.m) + sym2_idx(self.m, j, k)]
    }
}

/// Covariant Riemann tensor R_{ijkl} at one point (full dense storage).
#[derive(Clone, Debug)]
pub struct CurvatureTensor {
    m: usize,
    r: Vec<f64>,
}

impl CurvatureTensor {
    pub fn dim(&self) -> usize {
        self.m
    }

    pub fn r(&self, i: usize, j: usize, k: usize, l: usize) -> f64 {
        let m = self.m;
        self.r[((i * m + j) * m + k) * m + l]
    }

    fn set(&mut self, i: usize, j: usize, k: usize, l: usize, v: f64) {
        let m = self.m;
        self.r[((i * m + j) * m + k) * m + l] = v;
    }
}

/// Lipschitz-Killing curvatures L_0..L_m of an m-manifold.
#[derive(Clone, Debug, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct LKCVector {
    pub values: Vec<f64>,
}

impl LKCVector {
    pub fn dim(&self) -> usize {
        self.values.len() - 1
    }
}

/// Factor the metric of a jet, enforcing the conditioning threshold.
/// Returns (inverse, sqrt-determinant).
fn checked_inverse(g: &DMatrix<f64>) -> Result<(DMatrix<f64>, f64)> {
    let eig = g.clone().symmetric_eigen();
    let lo = eig.eigenvalues.min();
    let hi = eig.eigenvalues.max();
    if !(lo > 0.0) || hi / lo > METRIC_CONDITION_LIMIT {
        return Err(Error::DegenerateMetric(format!(
            "metric not safely invertible (min eigenvalue {lo:.6e}, \
             condition number {:.6e}, limit {METRIC_CONDITION_LIMIT:.0e})",
            hi / lo.abs().max(f64::MIN_POSITIVE)
        )));
    }
    let chol = g
        .clone()
        .cholesky()
        .ok_or_else(|| Error::DegenerateMetric("factorization failed".into()))?;
    let sqrt_det = chol.l().diagonal().iter().product();
    Ok((chol.inverse(), sqrt_det))
}

/// Christoffel symbols of the second kind from a metric jet.
pub fn christoffel(jet: &MetricJet) -> Result<ChristoffelField> {
    let m = jet.dim();
    let (ginv, _) = checked_inverse(&jet.metric_matrix())?;
    let s2 = sym2_len(m);
    let mut gamma = vec![0.0; m * s2];
    for n in 0..m {
        for j in 0..m {
            for k in j..m {
                let mut v = 0.0;
                for l in 0..m {
                    v += ginv[(n, l)] * (jet.dg(k, l, j) + jet.dg(j, l, k) - jet.dg(l, j, k));
                }
                gamma[n * s2 + sym2_idx(m, j, k)] = 0.5 * v;
            }
        }
    }
    Ok(ChristoffelField { m, gamma })
}

/// Covariant Riemann tensor from the metric jet and its Christoffel field.
pub fn riemann(jet: &MetricJet, gamma: &ChristoffelField) -> CurvatureTensor {
    let m = jet.dim();
    debug_assert_eq!(gamma.m, m);
    let mut out = CurvatureTensor {
        m,
        r: vec![0.0; m * m * m * m],
    };
    for i in 0..m {
        for j in 0..m {
            for k in 0..m {
                for l in 0..m {
                    let second = 0.5
                        * (jet.ddg(j, k, i, l) + jet.ddg(i, l, j, k)
                            - jet.ddg(j, l, i, k)
                            - jet.ddg(i, k, j, l));
                    let mut quad = 0.0;
                    for n in 0..m {
                        for p in 0..m {
                            quad += jet.g(n, p)
                                * (gamma.gamma(n, j, k) * gamma.gamma(p, i, l)
                                    - gamma.gamma(n, j, l) * gamma.gamma(p, i, k));
                        }
                    }
                    out.set(i, j, k, l, second + quad);
                }
            }
        }
    }
    out
}

/// Covariant Hessian of a scalar: (grad^2 f)_{ij} = d_i d_j f - Gamma^l_{ij} d_l f.
pub fn covariant_hessian(jet: &JetValue, gamma: &ChristoffelField) -> DMatrix<f64> {
    let m = jet.m;
    DMatrix::from_fn(m, m, |i, j| {
        let mut v = jet.hess(i, j);
        for l in 0..m {
            v -= gamma.gamma(l, i, j) * jet.grad[l];
        }
        v
    })
}

/// A (p, p) double form on R^m: components on pairs of increasing p-tuples,
/// antisymmetric within each index group by storage convention.
#[derive(Clone, Debug)]
pub struct DoubleForm {
    pub m: usize,
    pub p: usize,
    /// tuple-rank by tuple-rank component matrix
    pub comps: DMatrix<f64>,
    tuples: Vec<Vec<usize>>,
}

/// Increasing p-tuples from {0..m-1} in lexicographic order.
fn increasing_tuples(m: usize, p: usize) -> Vec<Vec<usize>> {
    if p == 0 {
        return vec![vec![]];
    }
    if p > m {
        return vec![];
    }
    let mut out = Vec::new();
    let mut idx: Vec<usize> = (0..p).collect();
    loop {
        out.push(idx.clone());
        // advance the combination
        let mut i = p;
        loop {
            if i == 0 {
                return out;
            }
            i -= 1;
            if idx[i] != i + m - p {
                break;
            }
        }
        idx[i] += 1;
        for j in i + 1..p {
            idx[j] = idx[j - 1] + 1;
        }
    }
}

/// Sign of the permutation sorting `seq` (None if it has a repeat).
fn sort_sign(seq: &[usize]) -> Option<f64> {
    let mut inversions = 0usize;
    for a in 0..seq.len() {
        for b in a + 1..seq.len() {
            if seq[a] == seq[b] {
                return None;
            }
            if seq[a] > seq[b] {
                inversions += 1;
            }
        }
    }
    Some(if inversions % 2 == 0 { 1.0 } else { -1.0 })
}

impl DoubleForm {
    pub fn zeros(m: usize, p: usize) -> Self {
        let tuples = increasing_tuples(m, p);
        let n = tuples.len();
        DoubleForm {
            m,
            p,
            comps: DMatrix::zeros(n, n),
            tuples,
        }
    }

    /// The (1,1) identity form (the metric in an orthonormal frame).
    pub fn identity(m: usize) -> Self {
        let mut f = DoubleForm::zeros(m, 1);
        for i in 0..m {
            f.comps[(i, i)] = 1.0;
        }
        f
    }

    /// A curvature tensor, frame-transformed with `frame` (columns are the
    /// orthonormal frame vectors in chart coordinates), as a (2,2) form.
    pub fn from_curvature(r: &CurvatureTensor, frame: &DMatrix<f64>) -> Self {
        let m = r.m;
        let mut f = DoubleForm::zeros(m, 2);
        let tuples = f.tuples.clone();
        for (ri, ti) in tuples.iter().enumerate() {
            let (i, j) = (ti[0], ti[1]);
            for (ci, tj) in tuples.iter().enumerate() {
                let (k, l) = (tj[0], tj[1]);
                let mut v = 0.0;
                for a in 0..m {
                    for b in 0..m {
                        for c in 0..m {
                            for d in 0..m {
                                v += r.r(a, b, c, d)
                                    * frame[(a, i)]
                                    * frame[(b, j)]
                                    * frame[(c, k)]
                                    * frame[(d, l)];
                            }
                        }
                    }
                }
                f.comps[(ri, ci)] = v;
            }
        }
        f
    }

    /// Double-form product: components summed over ordered splits of each
    /// index group with shuffle signs.
    pub fn product(&self, other: &DoubleForm) -> Result<DoubleForm> {
        if self.m != other.m {
            return Err(Error::invalid("double-form dimension mismatch"));
        }
        let m = self.m;
        let (pa, pb) = (self.p, other.p);
        if pa + pb > m {
            return Err(Error::invalid("double-form degree exceeds dimension"));
        }
        let mut out = DoubleForm::zeros(m, pa + pb);
        let subsets = increasing_tuples(pa + pb, pa);
        let split = |tuple: &[usize], pick: &[usize]| -> (Vec<usize>, Vec<usize>, f64) {
            let mut first = Vec::with_capacity(pa);
            let mut rest = Vec::with_capacity(pb);
            let mut order = Vec::with_capacity(pa + pb);
            for &pos in pick {
                first.push(tuple[pos]);
                order.push(pos);
            }
            for pos in 0..tuple.len() {
                if !pick.contains(&pos) {
                    rest.push(tuple[pos]);
                    order.push(pos);
                }
            }
            let sign = sort_sign(&order).expect("positions are distinct");
            (first, rest, sign)
        };
        let rank_a = |t: &[usize]| self.tuples.iter().position(|u| u == t).unwrap();
        let rank_b = |t: &[usize]| other.tuples.iter().position(|u| u == t).unwrap();
        for (ri, ti) in out.tuples.iter().enumerate() {
            for (ci, tj) in out.tuples.iter().enumerate() {
                let mut v = 0.0;
                for pick_rows in &subsets {
                    let (ra, rrest, sr) = split(ti, pick_rows);
                    for pick_cols in &subsets {
                        let (ca, crest, sc) = split(tj, pick_cols);
                        v += sr
                            * sc
                            * self.comps[(rank_a(&ra), rank_a(&ca))]
                            * other.comps[(rank_b(&rrest), rank_b(&crest))];
                    }
                }
                out.comps[(ri, ci)] = v;
            }
        }
        Ok(out)
    }

    /// Full trace: the diagonal sum over increasing tuples (orthonormal
    /// frame assumed).
    pub fn trace(&self) -> f64 {
        self.comps.diagonal().iter().sum()
    }
}

/// Tr(R^p) at one point: the curvature tensor's p-th double-form power,
/// traced in the orthonormal frame obtained from the metric's Cholesky
/// factor. p = 0 returns 1 (empty product).
pub fn double_form_power_trace(r: &CurvatureTensor, g: &DMatrix<f64>, p: usize) -> Result<f64> {
    let m = r.m;
    if 2 * p > m {
        return Err(Error::invalid(format!(
            "double-form power {p} needs 2p <= dimension {m}"
        )));
    }
    if p == 0 {
        return Ok(1.0);
    }
    let chol = g
        .clone()
        .cholesky()
        .ok_or_else(|| Error::DegenerateMetric("metric not positive definite".into()))?;
    // columns of L^{-T} form an orthonormal frame for g
    let frame = chol
        .l()
        .transpose()
        .try_inverse()
        .ok_or_else(|| Error::DegenerateMetric("Cholesky factor not invertible".into()))?;
    let base = DoubleForm::from_curvature(r, &frame);
    let mut acc = base.clone();
    for _ in 1..p {
        acc = acc.product(&base)?;
    }
    Ok(acc.trace())
}

/// Lipschitz-Killing curvatures of the manifold carrying `metric`:
/// L_j = (2 pi)^{-q}/q! * integral of Tr(R^q) dVol with q = (m-j)/2 for
/// m - j even, and L_j = 0 exactly for m - j odd. Fixed node order makes
/// the result deterministic.
pub fn lkc(atlas: &ManifoldAtlas, metric: &dyn MetricJetEval) -> Result<LKCVector> {
    let m = atlas.m;
    let mut values = vec![0.0; m + 1];
    // exponents q >= 1 needed (q = 0 is the plain volume)
    let powers: Vec<usize> = (0..m)
        .filter(|j| (m - j) % 2 == 0)
        .map(|j| (m - j) / 2)
        .collect();
    for chart in 0..atlas.charts.len() {
        for (node, (x, w_quad)) in atlas.quadrature[chart].iter().enumerate() {
            let jet = metric.metric_jet(chart, x);
            let g = jet.metric_matrix();
            let (_, sqrt_det) = checked_inverse(&g).map_err(|e| e.locate(chart, node))?;
            let weight = w_quad * atlas.partition(chart, x) * sqrt_det;
            values[m] += weight;
            if powers.is_empty() {
                continue;
            }
            let gamma = christoffel(&jet).map_err(|e| e.locate(chart, node))?;
            let r = riemann(&jet, &gamma);
            for &q in &powers {
                let tr = double_form_power_trace(&r, &g, q).map_err(|e| e.locate(chart, node))?;
                values[m - 2 * q] += weight * tr;
            }
        }
    }
    for j in 0..m {
        if (m - j) % 2 == 0 {
            let q = (m - j) / 2;
            let factorial: f64 = (1..=q).map(|v| v as f64).product();
            values[j] *= (2.0 * std::f64::consts::PI).powi(-(q as i32)) / factorial;
        }
    }
    Ok(LKCVector { values })
}

/// Euclidean tube-volume polynomial of a convex body in R^n with the given
/// intrinsic-volume vector: sum_j rho^{n-j} omega_{n-j} L_j.
pub fn tube_volume(lkc: &LKCVector, rho: f64, n: usize) -> Result<f64> {
    if lkc.values.len() != n + 1 {
        return Err(Error::invalid(format!(
            "need {} intrinsic volumes for a body in R^{n}, got {}",
            n + 1,
            lkc.values.len()
        )));
    }
    if rho < 0.0 {
        return Err(Error::invalid("tube radius must be nonnegative"));
    }
    Ok((0..=n)
        .map(|j| rho.powi((n - j) as i32) * ball_volume(n - j) * lkc.values[j])
        .sum())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::atlas::{make_flat_torus, make_flat_torus_shifted, make_round_sphere, ChartPoint};
    use crate::embedding::{EmbeddingRealization, PullbackMetric};
    use crate::gp::{build_model, SpectralShape};
    use approx::assert_relative_eq;
    use std::f64::consts::PI;

    fn flat_jet(m: usize) -> MetricJet {
        let mut jet = MetricJet::zeros(m);
        for i in 0..m {
            jet.set_g(i, i, 1.0);
        }
        jet
    }

    #[test]
    fn flat_metric_has_zero_christoffel_and_curvature() {
        let jet = flat_jet(2);
        let gamma = christoffel(&jet).unwrap();
        for n in 0..2 {
            for j in 0..2 {
                for k in 0..2 {
                    assert_eq!(gamma.gamma(n, j, k), 0.0);
                }
            }
        }
        let r = riemann(&jet, &gamma);
        for i in 0..2 {
            for j in 0..2 {
                for k in 0..2 {
                    for l in 0..2 {
                        assert_eq!(r.r(i, j, k, l), 0.0);
                    }
                }
            }
        }
    }

    #[test]
    fn torus_reference_curvature_vanishes() {
        let atlas = make_flat_torus(&[2.0 * PI, 3.0], 8).unwrap();
        for x in atlas.chart_grid(0, 4) {
            let jet = atlas.reference_metric_jet(0, &x);
            let gamma = christoffel(&jet).unwrap();
            let r = riemann(&jet, &gamma);
            for i in 0..2 {
                for j in 0..2 {
                    for k in 0..2 {
                        for l in 0..2 {
                            assert!(r.r(i, j, k, l).abs() < 1e-12);
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn sphere_christoffel_matches_closed_form() {
        // polar chart: Gamma^theta_{phi phi} = -sin cos, Gamma^phi_{theta phi} = cot
        for radius in [1.0, 2.0] {
            let atlas = make_round_sphere(radius, 8).unwrap();
            for theta in [0.4, 1.0, 1.9] {
                let jet = atlas.reference_metric_jet(0, &[theta, 0.7]);
                let gamma = christoffel(&jet).unwrap();
                assert_relative_eq!(
                    gamma.gamma(0, 1, 1),
                    -theta.sin() * theta.cos(),
                    epsilon = 1e-10
                );
                assert_relative_eq!(
                    gamma.gamma(1, 0, 1),
                    theta.cos() / theta.sin(),
                    epsilon = 1e-10
                );
                assert_relative_eq!(gamma.gamma(0, 0, 0), 0.0, epsilon = 1e-12);
                assert_relative_eq!(gamma.gamma(1, 1, 1), 0.0, epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn christoffel_is_scale_invariant() {
        let atlas = make_round_sphere(1.0, 8).unwrap();
        let model = build_model(&atlas, 16, SpectralShape::UniformShell, 3).unwrap();
        let emb = EmbeddingRealization::realize(&model, 9, 5).unwrap();
        let jet = emb.pullback_jet(&atlas, &ChartPoint::new(0, vec![1.1, 2.0]));
        let c2 = 2.89;
        let mut scaled = MetricJet::zeros(2);
        for i in 0..2 {
            for j in i..2 {
                scaled.set_g(i, j, c2 * jet.g(i, j));
                for p in 0..2 {
                    scaled.set_dg(p, i, j, c2 * jet.dg(p, i, j));
                    for q in p..2 {
                        scaled.set_ddg(q, p, i, j, c2 * jet.ddg(q, p, i, j));
                    }
                }
            }
        }
        let g1 = christoffel(&jet).unwrap();
        let g2 = christoffel(&scaled).unwrap();
        for n in 0..2 {
            for j in 0..2 {
                for k in j..2 {
                    assert_relative_eq!(g1.gamma(n, j, k), g2.gamma(n, j, k), epsilon = 1e-12);
                }
            }
        }
    }

    #[test]
    fn sphere_sectional_curvature_is_inverse_radius_squared() {
        for radius in [1.0f64, 2.0, 0.5] {
            let atlas = make_round_sphere(radius, 8).unwrap();
            for (theta, phi) in [(0.5, 0.0), (1.2, 2.2), (2.0, 5.0)] {
                let jet = atlas.reference_metric_jet(0, &[theta, phi]);
                let gamma = christoffel(&jet).unwrap();
                let r = riemann(&jet, &gamma);
                let denom = jet.g(0, 0) * jet.g(1, 1) - jet.g(0, 1) * jet.g(0, 1);
                let sectional = r.r(0, 1, 0, 1) / denom;
                assert_relative_eq!(sectional, 1.0 / (radius * radius), epsilon = 1e-8);
            }
        }
    }

    #[test]
    fn covariant_hessian_reduces_to_ordinary_on_flat_metric() {
        let jet = flat_jet(2);
        let gamma = christoffel(&jet).unwrap();
        let f = crate::gp::JetValue::from_parts(
            2,
            3.0,
            vec![1.0, -2.0],
            vec![0.5, 1.5, -0.25],
            vec![0.0; 4],
        )
        .unwrap();
        let h = covariant_hessian(&f, &gamma);
        assert_eq!(h[(0, 0)], 0.5);
        assert_eq!(h[(0, 1)], 1.5);
        assert_eq!(h[(1, 0)], 1.5);
        assert_eq!(h[(1, 1)], -0.25);

        // linear scalar on a flat metric: covariant Hessian vanishes
        let lin =
            crate::gp::JetValue::from_parts(2, 1.0, vec![2.0, 3.0], vec![0.0; 3], vec![0.0; 4])
                .unwrap();
        let h = covariant_hessian(&lin, &gamma);
        assert_eq!(h.amax(), 0.0);
    }

    #[test]
    fn covariant_hessian_is_symmetric_for_random_fields() {
        let atlas = make_round_sphere(1.0, 8).unwrap();
        let model = build_model(&atlas, 16, SpectralShape::GaussianIsotropic, 13).unwrap();
        for seed in 0..5 {
            let s = crate::gp::sample(&model, seed);
            for x in [[0.9, 0.3], [1.5, 4.0]] {
                let f = crate::gp::eval_jet(&model, &s, &atlas, &ChartPoint::new(0, x.to_vec()));
                let jet = atlas.reference_metric_jet(0, &x);
                let gamma = christoffel(&jet).unwrap();
                let h = covariant_hessian(&f, &gamma);
                assert!((&h - h.transpose()).amax() < 1e-12);
            }
        }
    }

    #[test]
    fn singular_metric_is_rejected_with_condition_report() {
        let mut jet = MetricJet::zeros(2);
        jet.set_g(0, 0, 1.0);
        jet.set_g(1, 1, 1e-15);
        match christoffel(&jet) {
            Err(Error::DegenerateMetric(msg)) => {
                assert!(msg.contains("condition number"), "message: {msg}");
            }
            other => panic!("expected degeneracy, got {other:?}"),
        }
    }

    #[test]
    fn identity_form_power_traces_count_frames() {
        // Tr(I^p) = m!/(m-p)!
        for m in 1..=3usize {
            let id = DoubleForm::identity(m);
            let mut acc = id.clone();
            for p in 1..=m {
                let want: f64 = ((m - p + 1)..=m).map(|v| v as f64).product();
                assert_relative_eq!(acc.trace(), want, epsilon = 1e-12);
                if p < m {
                    acc = acc.product(&id).unwrap();
                }
            }
        }
    }

    #[test]
    fn power_trace_handles_edge_cases() {
        let atlas = make_flat_torus(&[1.0, 1.0], 4).unwrap();
        let jet = atlas.reference_metric_jet(0, &[0.2, 0.3]);
        let gamma = christoffel(&jet).unwrap();
        let r = riemann(&jet, &gamma);
        let g = jet.metric_matrix();
        // p = 0: empty product convention
        assert_eq!(double_form_power_trace(&r, &g, 0).unwrap(), 1.0);
        // flat: any allowed p >= 1 gives zero
        assert_eq!(double_form_power_trace(&r, &g, 1).unwrap(), 0.0);
        // 2p > m rejected
        assert!(matches!(
            double_form_power_trace(&r, &g, 2),
            Err(Error::InvalidArgument(_))
        ));
    }

    #[test]
    fn sphere_curvature_trace_is_gauss_curvature() {
        for radius in [1.0f64, 2.0] {
            let atlas = make_round_sphere(radius, 8).unwrap();
            for (theta, phi) in [(0.6, 1.0), (1.4, 3.0)] {
                let jet = atlas.reference_metric_jet(0, &[theta, phi]);
                let gamma = christoffel(&jet).unwrap();
                let r = riemann(&jet, &gamma);
                let tr = double_form_power_trace(&r, &jet.metric_matrix(), 1).unwrap();
                assert_relative_eq!(tr, 1.0 / (radius * radius), epsilon = 1e-10);
            }
        }
    }

    #[test]
    fn curvature_symmetries_hold_for_random_pullbacks() {
        let atlas = make_flat_torus(&[2.0 * PI, 2.0 * PI], 8).unwrap();
        let model = build_model(&atlas, 32, SpectralShape::UniformShell, 41).unwrap();
        for trial in 0..20 {
            let emb = EmbeddingRealization::realize(&model, 5, 3000 + trial).unwrap();
            let jet = emb.pullback_jet(
                &atlas,
                &ChartPoint::new(0, vec![1.0 + trial as f64 * 0.1, 2.0]),
            );
            let gamma = christoffel(&jet).unwrap();
            let r = riemann(&jet, &gamma);
            let scale: f64 = (0..16)
                .map(|idx| {
                    let (i, j, k, l) = (idx / 8, (idx / 4) % 2, (idx / 2) % 2, idx % 2);
                    r.r(i, j, k, l).abs()
                })
                .fold(0.0, f64::max)
                .max(1e-30);
            for i in 0..2 {
                for j in 0..2 {
                    for k in 0..2 {
                        for l in 0..2 {
                            let v = r.r(i, j, k, l);
                            assert!((v + r.r(j, i, k, l)).abs() < 1e-8 * scale);
                            assert!((v + r.r(i, j, l, k)).abs() < 1e-8 * scale);
                            assert!((v - r.r(k, l, i, j)).abs() < 1e-8 * scale);
                            let bianchi = v + r.r(i, k, l, j) + r.r(i, l, j, k);
                            assert!(bianchi.abs() < 1e-8 * scale);
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn lkc_of_flat_torus_is_volume_only() {
        let atlas = make_flat_torus(&[2.0 * PI, 2.0 * PI], 16).unwrap();
        let l = lkc(&atlas, &atlas.reference()).unwrap();
        assert!(l.values[0].abs() < 1e-10);
        assert_eq!(l.values[1], 0.0);
        assert!((l.values[2] - 4.0 * PI * PI).abs() < 1e-8);
    }

    #[test]
    fn lkc_of_circle_is_its_length() {
        let atlas = make_flat_torus(&[5.0], 16).unwrap();
        let l = lkc(&atlas, &atlas.reference()).unwrap();
        assert_eq!(l.values[0], 0.0); // m - j odd
        assert_relative_eq!(l.values[1], 5.0, epsilon = 1e-12);
    }

    #[test]
    fn lkc_of_spheres_matches_euler_characteristic_and_area() {
        for radius in [1.0f64, 2.0] {
            let atlas = make_round_sphere(radius, 16).unwrap();
            let l = lkc(&atlas, &atlas.reference()).unwrap();
            assert!(
                (l.values[0] - 2.0).abs() < 1e-6,
                "radius {radius}: L_0 = {}",
                l.values[0]
            );
            assert_eq!(l.values[1], 0.0);
            assert!(
                (l.values[2] - 4.0 * PI * radius * radius).abs() < 1e-6,
                "radius {radius}: L_2 = {}",
                l.values[2]
            );
        }
    }

    #[test]
    fn lkc_of_pullback_is_finite_with_positive_volume() {
        let atlas = make_flat_torus(&[2.0 * PI, 2.0 * PI], 12).unwrap();
        let model = build_model(&atlas, 32, SpectralShape::UniformShell, 2).unwrap();
        let emb = EmbeddingRealization::realize(&model, 8, 77).unwrap();
        let pm = PullbackMetric {
            emb: &emb,
            atlas: &atlas,
        };
        let l = lkc(&atlas, &pm).unwrap();
        assert!(l.values.iter().all(|v| v.is_finite()));
        assert!(l.values[2] > 0.0);
        assert_eq!(l.values[1], 0.0);
    }

    #[test]
    fn lkc_is_invariant_under_chart_shift() {
        let periods = [2.0 * PI, 2.0 * PI];
        let atlas = make_flat_torus(&periods, 16).unwrap();
        let shifted = make_flat_torus_shifted(&periods, 16, &[PI, PI]).unwrap();
        let model = build_model(&atlas, 32, SpectralShape::UniformShell, 9).unwrap();
        let emb = EmbeddingRealization::realize(&model, 12, 5).unwrap();
        let l_a = lkc(
            &atlas,
            &PullbackMetric {
                emb: &emb,
                atlas: &atlas,
            },
        )
        .unwrap();
        let l_b = lkc(
            &shifted,
            &PullbackMetric {
                emb: &emb,
                atlas: &shifted,
            },
        )
        .unwrap();
        for j in 0..3 {
            assert!(
                (l_a.values[j] - l_b.values[j]).abs() < 1e-10,
                "j = {j}: {} vs {}",
                l_a.values[j],
                l_b.values[j]
            );
        }
    }

    #[test]
    fn degenerate_node_reports_its_location() {
        let atlas = make_flat_torus(&[2.0 * PI, 2.0 * PI], 8).unwrap();
        let model = build_model(&atlas, 32, SpectralShape::UniformShell, 2).unwrap();
        // k = 1 pullback is rank one: degenerate at every node
        let emb = EmbeddingRealization::realize(&model, 1, 0).unwrap();
        let pm = PullbackMetric {
            emb: &emb,
            atlas: &atlas,
        };
        match lkc(&atlas, &pm) {
            Err(Error::Degeneracy { chart, node, .. }) => {
                assert_eq!(chart, 0);
                assert_eq!(node, 0);
            }
            other => panic!("expected located degeneracy, got {other:?}"),
        }
    }

    #[test]
    fn tube_volume_matches_dilation_oracles() {
        // unit disc in R^2
        let disc = LKCVector {
            values: vec![1.0, PI, PI],
        };
        for rho in [0.0, 0.1, 0.5, 1.0] {
            assert_relative_eq!(
                tube_volume(&disc, rho, 2).unwrap(),
                PI * (1.0 + rho) * (1.0 + rho),
                epsilon = 1e-12
            );
        }
        // segment of length s in R^1
        let seg = LKCVector {
            values: vec![1.0, 3.25],
        };
        assert_relative_eq!(
            tube_volume(&seg, 0.4, 1).unwrap(),
            3.25 + 0.8,
            epsilon = 1e-12
        );
        // rho = 0 recovers the body's own volume
        assert_relative_eq!(tube_volume(&disc, 0.0, 2).unwrap(), PI, epsilon = 1e-13);
        // arity and sign guards
        assert!(tube_volume(&seg, 0.1, 2).is_err());
        assert!(tube_volume(&disc, -0.1, 2).is_err());
    }
}
