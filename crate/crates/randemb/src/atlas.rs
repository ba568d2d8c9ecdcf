//! Chart atlases for the supported compact manifolds.
//!
//! Two families are built in:
//!
//! * flat tori T^m, one periodic chart over [0, P_i) per axis, embedded in
//!   R^{2m} as a product of circles of radius P_i / 2pi (so the induced
//!   metric is the identity);
//! * round spheres S^2 of arbitrary radius, two polar-cap charts in
//!   spherical coordinates, overlapping on the colatitude band
//!   (pi/3, 2pi/3) with a quintic-smoothstep partition of unity.
//!
//! Each chart evaluates its ambient embedding map together with all chart
//! partials up to third order; everything downstream (field jets, pullback
//! metrics, reference metrics) chains off these exact derivatives.
//!
//! Quadrature is a fixed node list per chart: tensor-product periodic
//! trapezoid for the torus (spectrally accurate for smooth periodic
//! integrands), and Gauss-Legendre panels times a periodic trapezoid rule
//! for the sphere. The Gauss-Legendre panels are split exactly at the
//! partition-of-unity seams, where integrands are only C^2.

use std::f64::consts::PI;

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::metric::{MetricEval, MetricJet, MetricJetEval};
use crate::tensor::{sym2_idx, sym2_len, sym2_pairs, sym3_idx, sym3_len, sym3_triples};

/// Colatitude where the spherical overlap band begins.
pub const SPHERE_BAND_LO: f64 = PI / 3.0;
/// Colatitude where the spherical overlap band ends.
pub const SPHERE_BAND_HI: f64 = 2.0 * PI / 3.0;

/// A point expressed in a specific chart.
#[derive(Clone, Debug, PartialEq)]
pub struct ChartPoint {
    pub chart: usize,
    pub x: Vec<f64>,
}

impl ChartPoint {
    pub fn new(chart: usize, x: Vec<f64>) -> Self {
        ChartPoint { chart, x }
    }
}

/// Ambient embedding value and chart partials up to order 3 at one point.
///
/// Layout per ambient component A: value[A], jac[A*m + i],
/// hess[A*s2 + slot(i,j)], third[A*s3 + slot(i,j,l)].
#[derive(Clone, Debug)]
pub struct AmbientJet {
    pub dim_ambient: usize,
    pub m: usize,
    pub value: Vec<f64>,
    pub jac: Vec<f64>,
    pub hess: Vec<f64>,
    pub third: Vec<f64>,
}

impl AmbientJet {
    fn zeros(dim_ambient: usize, m: usize) -> Self {
        AmbientJet {
            dim_ambient,
            m,
            value: vec![0.0; dim_ambient],
            jac: vec![0.0; dim_ambient * m],
            hess: vec![0.0; dim_ambient * sym2_len(m)],
            third: vec![0.0; dim_ambient * sym3_len(m)],
        }
    }

    pub fn jac_at(&self, a: usize, i: usize) -> f64 {
        self.jac[a * self.m + i]
    }

    pub fn hess_at(&self, a: usize, i: usize, j: usize) -> f64 {
        self.hess[a * sym2_len(self.m) + sym2_idx(self.m, i, j)]
    }

    pub fn third_at(&self, a: usize, i: usize, j: usize, l: usize) -> f64 {
        self.third[a * sym3_len(self.m) + sym3_idx(self.m, i, j, l)]
    }
}

/// The ambient embedding map of one chart.
#[derive(Clone, Debug)]
enum ChartMap {
    /// Product of circles; component pair 2i, 2i+1 is axis i.
    Torus { periods: Vec<f64>, origin: Vec<f64> },
    /// Polar cap of a round sphere; local colatitude measured from the
    /// chart's own pole (the south cap flips the ambient z component).
    SphereCap { radius: f64, south: bool },
}

/// 4-cycle of derivatives of sin (phase 0) and cos (phase 1).
fn trig_deriv(phase: usize, order: usize, t: f64) -> f64 {
    match (phase + order) % 4 {
        0 => t.sin(),
        1 => t.cos(),
        2 => -t.sin(),
        _ => -t.cos(),
    }
}

impl ChartMap {
    fn dim_ambient(&self) -> usize {
        match self {
            ChartMap::Torus { periods, .. } => 2 * periods.len(),
            ChartMap::SphereCap { .. } => 3,
        }
    }

    fn jet(&self, x: &[f64]) -> AmbientJet {
        match self {
            ChartMap::Torus { periods, origin } => {
                let m = periods.len();
                let mut out = AmbientJet::zeros(2 * m, m);
                for i in 0..m {
                    let w = 2.0 * PI / periods[i];
                    let a = periods[i] / (2.0 * PI);
                    let t = w * (x[i] + origin[i]);
                    let (s, c) = t.sin_cos();
                    let (ca, sa) = (2 * i, 2 * i + 1);
                    out.value[ca] = a * c;
                    out.value[sa] = a * s;
                    out.jac[ca * m + i] = -s;
                    out.jac[sa * m + i] = c;
                    let h = sym2_idx(m, i, i);
                    out.hess[ca * sym2_len(m) + h] = -w * c;
                    out.hess[sa * sym2_len(m) + h] = -w * s;
                    let th = sym3_idx(m, i, i, i);
                    out.third[ca * sym3_len(m) + th] = w * w * s;
                    out.third[sa * sym3_len(m) + th] = -w * w * c;
                }
                out
            }
            ChartMap::SphereCap { radius, south } => {
                let m = 2;
                let mut out = AmbientJet::zeros(3, m);
                let (theta, phi) = (x[0], x[1]);
                let zsign = if *south { -1.0 } else { 1.0 };
                // Components are separable products r * gt(theta) * hp(phi):
                //   X: sin(theta) cos(phi), Y: sin(theta) sin(phi), Z: +-cos(theta)
                // phase codes: sin -> 0, cos -> 1; None -> constant 1 factor.
                let comp = |a: usize, dt: usize, dp: usize| -> f64 {
                    match a {
                        0 => radius * trig_deriv(0, dt, theta) * trig_deriv(1, dp, phi),
                        1 => radius * trig_deriv(0, dt, theta) * trig_deriv(0, dp, phi),
                        _ => {
                            if dp == 0 {
                                zsign * radius * trig_deriv(1, dt, theta)
                            } else {
                                0.0
                            }
                        }
                    }
                };
                let orders2 = sym2_pairs(m);
                let orders3 = sym3_triples(m);
                for a in 0..3 {
                    out.value[a] = comp(a, 0, 0);
                    for i in 0..m {
                        out.jac[a * m + i] = comp(a, (i == 0) as usize, (i == 1) as usize);
                    }
                    for (slot, &(i, j)) in orders2.iter().enumerate() {
                        let dt = (i == 0) as usize + (j == 0) as usize;
                        out.hess[a * sym2_len(m) + slot] = comp(a, dt, 2 - dt);
                    }
                    for (slot, &(i, j, l)) in orders3.iter().enumerate() {
                        let dt = (i == 0) as usize + (j == 0) as usize + (l == 0) as usize;
                        out.third[a * sym3_len(m) + slot] = comp(a, dt, 3 - dt);
                    }
                }
                out
            }
        }
    }
}

/// One coordinate chart: an open axis-aligned box plus the embedding map.
#[derive(Clone, Debug)]
pub struct Chart {
    pub id: usize,
    pub m: usize,
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
    /// Per-axis period for axes that wrap (the full box spans one period).
    pub period: Vec<Option<f64>>,
    map: ChartMap,
}

impl Chart {
    pub fn dim_ambient(&self) -> usize {
        self.map.dim_ambient()
    }

    /// Ambient embedding with all chart partials up to order 3.
    pub fn ambient_jet(&self, x: &[f64]) -> AmbientJet {
        self.map.jet(x)
    }

    pub fn ambient_point(&self, x: &[f64]) -> Vec<f64> {
        self.map.jet(x).value
    }

    /// Wrap periodic axes into [lo, lo + period).
    pub fn wrap(&self, x: &[f64]) -> Vec<f64> {
        x.iter()
            .enumerate()
            .map(|(i, &v)| match self.period[i] {
                Some(p) => {
                    let w = (v - self.lo[i]).rem_euclid(p) + self.lo[i];
                    if w >= self.lo[i] + p {
                        self.lo[i]
                    } else {
                        w
                    }
                }
                None => v,
            })
            .collect()
    }

    pub fn in_domain(&self, x: &[f64]) -> bool {
        x.iter().enumerate().all(|(i, &v)| match self.period[i] {
            Some(_) => v.is_finite(),
            None => v > self.lo[i] && v < self.hi[i],
        })
    }
}

/// Which manifold an atlas describes.
#[derive(Clone, Debug, PartialEq)]
pub enum ManifoldKind {
    Torus { periods: Vec<f64>, origin: Vec<f64> },
    Sphere { radius: f64 },
}

/// Chart atlas with quadrature, partition of unity and transition maps.
pub struct ManifoldAtlas {
    pub m: usize,
    pub ambient_dim: usize,
    pub kind: ManifoldKind,
    pub charts: Vec<Chart>,
    /// Per chart: (node coordinates, coordinate-space quadrature weight).
    pub quadrature: Vec<Vec<(Vec<f64>, f64)>>,
    /// Declared accuracy of the quadrature rules for smooth integrands.
    pub quad_tol: f64,
    /// Exact total volume of the reference metric, used as a self-check.
    pub reference_volume: f64,
}

/// Quintic smoothstep: C^2 ramp from 0 at t=0 to 1 at t=1.
fn smoothstep5(t: f64) -> f64 {
    if t <= 0.0 {
        0.0
    } else if t >= 1.0 {
        1.0
    } else {
        t * t * t * (10.0 + t * (-15.0 + 6.0 * t))
    }
}

/// Gauss-Legendre nodes and weights on [-1, 1].
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1);
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    for i in 0..n {
        // Newton iteration from the Chebyshev-like initial guess.
        let mut x = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        for _ in 0..100 {
            let (p, dp) = legendre_and_deriv(n, x);
            let dx = p / dp;
            x -= dx;
            if dx.abs() < 1e-15 {
                break;
            }
        }
        let (_, dp) = legendre_and_deriv(n, x);
        nodes[n - 1 - i] = x;
        weights[n - 1 - i] = 2.0 / ((1.0 - x * x) * dp * dp);
    }
    (nodes, weights)
}

fn legendre_and_deriv(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, dp)
}

fn gl_panel(n: usize, a: f64, b: f64) -> Vec<(f64, f64)> {
    let (xs, ws) = gauss_legendre(n);
    let half = 0.5 * (b - a);
    let mid = 0.5 * (a + b);
    xs.iter()
        .zip(ws.iter())
        .map(|(&x, &w)| (mid + half * x, half * w))
        .collect()
}

/// Flat torus T^m with the given periods; `nodes_per_axis` trapezoid nodes
/// per axis. The chart origin can be shifted to test chart invariance.
pub fn make_flat_torus_shifted(
    periods: &[f64],
    nodes_per_axis: usize,
    origin: &[f64],
) -> Result<ManifoldAtlas> {
    let m = periods.len();
    if m == 0 {
        return Err(Error::invalid("torus dimension must be at least 1"));
    }
    if periods.iter().any(|&p| !(p > 0.0) || !p.is_finite()) {
        return Err(Error::invalid(format!(
            "torus periods must be positive and finite, got {periods:?}"
        )));
    }
    if origin.len() != m {
        return Err(Error::invalid("origin length must match dimension"));
    }
    if nodes_per_axis < 4 {
        return Err(Error::invalid("need at least 4 quadrature nodes per axis"));
    }
    let chart = Chart {
        id: 0,
        m,
        lo: vec![0.0; m],
        hi: periods.to_vec(),
        period: periods.iter().map(|&p| Some(p)).collect(),
        map: ChartMap::Torus {
            periods: periods.to_vec(),
            origin: origin.to_vec(),
        },
    };
    // Tensor-product periodic trapezoid rule.
    let mut nodes = vec![(vec![], 1.0)];
    for &p in periods {
        let step = p / nodes_per_axis as f64;
        let mut next = Vec::with_capacity(nodes.len() * nodes_per_axis);
        for (x, w) in &nodes {
            for j in 0..nodes_per_axis {
                let mut xn = x.clone();
                xn.push(j as f64 * step);
                next.push((xn, w * step));
            }
        }
        nodes = next;
    }
    let volume: f64 = periods.iter().product();
    Ok(ManifoldAtlas {
        m,
        ambient_dim: 2 * m,
        kind: ManifoldKind::Torus {
            periods: periods.to_vec(),
            origin: origin.to_vec(),
        },
        charts: vec![chart],
        quadrature: vec![nodes],
        quad_tol: 1e-8,
        reference_volume: volume,
    })
}

pub fn make_flat_torus(periods: &[f64], nodes_per_axis: usize) -> Result<ManifoldAtlas> {
    let origin = vec![0.0; periods.len()];
    make_flat_torus_shifted(periods, nodes_per_axis, &origin)
}

/// Round sphere S^2 of the given radius. `nodes` sets the Gauss-Legendre
/// count per colatitude panel; the azimuthal rule uses 2*nodes points.
pub fn make_round_sphere(radius: f64, nodes: usize) -> Result<ManifoldAtlas> {
    if !(radius > 0.0) || !radius.is_finite() {
        return Err(Error::invalid(format!(
            "sphere radius must be positive and finite, got {radius}"
        )));
    }
    if nodes < 4 {
        return Err(Error::invalid("need at least 4 quadrature nodes per panel"));
    }
    let mk_chart = |id: usize, south: bool| Chart {
        id,
        m: 2,
        lo: vec![0.0, 0.0],
        hi: vec![SPHERE_BAND_HI, 2.0 * PI],
        period: vec![None, Some(2.0 * PI)],
        map: ChartMap::SphereCap { radius, south },
    };
    // Panels split at the partition seam so each panel integrand is smooth.
    let mut theta_rule = gl_panel(nodes, 0.0, SPHERE_BAND_LO);
    theta_rule.extend(gl_panel(nodes, SPHERE_BAND_LO, SPHERE_BAND_HI));
    let nphi = 2 * nodes;
    let phi_step = 2.0 * PI / nphi as f64;
    let mut quad_chart = Vec::with_capacity(theta_rule.len() * nphi);
    for &(t, wt) in &theta_rule {
        for j in 0..nphi {
            quad_chart.push((vec![t, j as f64 * phi_step], wt * phi_step));
        }
    }
    Ok(ManifoldAtlas {
        m: 2,
        ambient_dim: 3,
        kind: ManifoldKind::Sphere { radius },
        charts: vec![mk_chart(0, false), mk_chart(1, true)],
        quadrature: vec![quad_chart.clone(), quad_chart],
        quad_tol: 1e-8,
        reference_volume: 4.0 * PI * radius * radius,
    })
}

impl ManifoldAtlas {
    pub fn chart(&self, id: usize) -> &Chart {
        &self.charts[id]
    }

    /// Partition-of-unity weight of a chart at a point of that chart.
    pub fn partition(&self, chart: usize, x: &[f64]) -> f64 {
        debug_assert!(chart < self.charts.len());
        match &self.kind {
            ManifoldKind::Torus { .. } => 1.0,
            ManifoldKind::Sphere { .. } => {
                // Local colatitude from this cap's own pole; both caps use
                // the same ramp, and local colatitudes sum to pi, so the
                // two weights sum to one identically on the overlap.
                let theta = x[0];
                let t = (theta - SPHERE_BAND_LO) / (SPHERE_BAND_HI - SPHERE_BAND_LO);
                1.0 - smoothstep5(t)
            }
        }
    }

    /// Chart pairs with a transition map (including periodic self-wraps).
    pub fn transition_pairs(&self) -> Vec<(usize, usize)> {
        match &self.kind {
            ManifoldKind::Torus { .. } => vec![(0, 0)],
            ManifoldKind::Sphere { .. } => vec![(0, 1), (1, 0)],
        }
    }

    /// Express a point of chart `from` in chart `to`. Returns None outside
    /// the overlap of the two charts.
    pub fn transition(&self, from: usize, to: usize, x: &[f64]) -> Option<Vec<f64>> {
        match &self.kind {
            ManifoldKind::Torus { .. } => {
                if from == 0 && to == 0 {
                    Some(self.charts[0].wrap(x))
                } else {
                    None
                }
            }
            ManifoldKind::Sphere { .. } => {
                if from == to {
                    return Some(x.to_vec());
                }
                let theta = x[0];
                if theta > SPHERE_BAND_LO && theta < SPHERE_BAND_HI {
                    Some(vec![PI - theta, x[1]])
                } else {
                    None
                }
            }
        }
    }

    /// Jacobian of the transition map `from -> to` at x.
    pub fn transition_jacobian(&self, from: usize, to: usize, x: &[f64]) -> Option<DMatrix<f64>> {
        self.transition(from, to, x)?;
        match &self.kind {
            ManifoldKind::Torus { .. } => Some(DMatrix::identity(self.m, self.m)),
            ManifoldKind::Sphere { .. } => {
                if from == to {
                    Some(DMatrix::identity(2, 2))
                } else {
                    Some(DMatrix::from_row_slice(2, 2, &[-1.0, 0.0, 0.0, 1.0]))
                }
            }
        }
    }

    /// Uniform evaluation grid inside a chart (n points per axis).
    pub fn chart_grid(&self, chart: usize, n: usize) -> Vec<Vec<f64>> {
        let ch = &self.charts[chart];
        let mut pts = vec![vec![]];
        for ax in 0..ch.m {
            let (lo, hi) = (ch.lo[ax], ch.hi[ax]);
            let step = (hi - lo) / n as f64;
            // Periodic axes include the seam point; bounded open axes use
            // cell midpoints to stay inside the domain.
            let offset = if ch.period[ax].is_some() { 0.0 } else { 0.5 };
            let mut next = Vec::with_capacity(pts.len() * n);
            for p in &pts {
                for j in 0..n {
                    let mut q = p.clone();
                    q.push(lo + (j as f64 + offset) * step);
                    next.push(q);
                }
            }
            pts = next;
        }
        pts
    }

    /// Evaluator handle for the reference metric.
    pub fn reference(&self) -> ReferenceMetric<'_> {
        ReferenceMetric { atlas: self }
    }

    /// Closed-form intrinsic volumes (L_0 .. L_m) of the reference geometry.
    ///
    /// A flat torus is intrinsically flat, so every curvature functional
    /// vanishes except the top one, which equals the total volume. A round
    /// sphere of radius r has Euler characteristic 2, zero odd entries, and
    /// surface area 4 pi r^2.
    pub fn reference_lkc(&self) -> Vec<f64> {
        match &self.kind {
            ManifoldKind::Torus { periods, .. } => {
                let mut values = vec![0.0; self.m + 1];
                values[self.m] = periods.iter().product();
                values
            }
            ManifoldKind::Sphere { radius } => {
                vec![2.0, 0.0, 4.0 * PI * radius * radius]
            }
        }
    }

    /// Reference metric (pulled back from the ambient embedding) at a point.
    pub fn reference_metric(&self, chart: usize, x: &[f64]) -> DMatrix<f64> {
        let jet = self.charts[chart].ambient_jet(x);
        let m = self.m;
        DMatrix::from_fn(m, m, |i, j| {
            (0..jet.dim_ambient)
                .map(|a| jet.jac_at(a, i) * jet.jac_at(a, j))
                .sum()
        })
    }

    /// Reference metric with exact first and second chart partials.
    pub fn reference_metric_jet(&self, chart: usize, x: &[f64]) -> MetricJet {
        let jet = self.charts[chart].ambient_jet(x);
        let m = self.m;
        let d = jet.dim_ambient;
        let mut out = MetricJet::zeros(m);
        for i in 0..m {
            for j in i..m {
                let mut v = 0.0;
                for a in 0..d {
                    v += jet.jac_at(a, i) * jet.jac_at(a, j);
                }
                out.set_g(i, j, v);
                for p in 0..m {
                    let mut dv = 0.0;
                    for a in 0..d {
                        dv += jet.hess_at(a, p, i) * jet.jac_at(a, j)
                            + jet.jac_at(a, i) * jet.hess_at(a, p, j);
                    }
                    out.set_dg(p, i, j, dv);
                }
                for p in 0..m {
                    for q in p..m {
                        let mut ddv = 0.0;
                        for a in 0..d {
                            ddv += jet.third_at(a, p, q, i) * jet.jac_at(a, j)
                                + jet.hess_at(a, p, i) * jet.hess_at(a, q, j)
                                + jet.hess_at(a, q, i) * jet.hess_at(a, p, j)
                                + jet.jac_at(a, i) * jet.third_at(a, p, q, j);
                        }
                        out.set_ddg(p, q, i, j, ddv);
                    }
                }
            }
        }
        out
    }
}

/// Reference-metric evaluator over an atlas.
pub struct ReferenceMetric<'a> {
    pub atlas: &'a ManifoldAtlas,
}

impl MetricEval for ReferenceMetric<'_> {
    fn metric(&self, chart: usize, x: &[f64]) -> DMatrix<f64> {
        self.atlas.reference_metric(chart, x)
    }
}

impl MetricJetEval for ReferenceMetric<'_> {
    fn metric_jet(&self, chart: usize, x: &[f64]) -> MetricJet {
        self.atlas.reference_metric_jet(chart, x)
    }
}

/// Integrate a scalar field over the manifold against the volume form of
/// `metric`: sum over charts of sum over nodes of
/// w * rho_chart * field * sqrt(det g). Summation order is fixed, so the
/// result is bit-stable for a given atlas.
pub fn integrate_scalar<F>(atlas: &ManifoldAtlas, field: F, metric: &dyn MetricEval) -> Result<f64>
where
    F: Fn(usize, &[f64]) -> f64,
{
    let mut total = 0.0;
    for (ci, chart_nodes) in atlas.quadrature.iter().enumerate() {
        for (ni, (x, w)) in chart_nodes.iter().enumerate() {
            let g = metric.metric(ci, x);
            let chol = nalgebra::Cholesky::new(g).ok_or_else(|| Error::Degeneracy {
                chart: ci,
                node: ni,
                detail: "metric not positive definite".to_string(),
            })?;
            let sqrt_det: f64 = chol.l().diagonal().iter().product();
            total += w * atlas.partition(ci, x) * field(ci, x) * sqrt_det;
        }
    }
    Ok(total)
}
