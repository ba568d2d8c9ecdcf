//! Simultaneous-zero counting for two independent scalar fields on a
//! surface, plus the kinematic prediction it is compared against.
//!
//! A replicate draws two independent samples u, v of the model and counts
//! the points where both vanish. Detection is grid-based: each chart domain
//! is tiled with a uniform cell grid; a cell whose corners show a sign
//! change in u *and* in v is refined with a damped Newton iteration on
//! F = (u, v). Every converged root goes into a per-chart registry with
//! wrap-aware duplicate suppression, so a root is counted once no matter
//! how many cells converge to it — in particular a root whose own cell was
//! not marked (a zero curve can graze a grid line between corners) is still
//! credited when a neighboring cell finds it.
//!
//! A corner sign change in both fields does *not* imply a joint zero in the
//! cell — the two zero curves can cross the same cell without meeting — so
//! Newton failure alone is weak evidence. A marked cell is therefore
//! resolved in three stages: Newton from the cell center; one subdivision
//! with Newton from every sub-cell showing the joint sign pattern; and
//! finally a curve test that brackets the points where the u = 0 curve
//! crosses the cell edges and inspects the sign of v there. Opposite v
//! signs along the u-curve force an interior joint zero (intermediate value
//! theorem along the curve); only a cell that fails Newton *and* shows that
//! certificate is flagged, so flags mean "a root is indicated here but
//! could not be pinned down" (reported, never silently dropped).
//!
//! On the two-cap sphere atlas the caps overlap in a collar, so a root can
//! be located by both charts. Ownership is split at the equator: the first
//! cap keeps local colatitude <= pi/2, the antipodal cap keeps strictly
//! less than pi/2 in its own coordinate, so every root is owned exactly
//! once.

use std::f64::consts::FRAC_PI_2;

use crate::atlas::{ChartPoint, ManifoldAtlas, ManifoldKind};
use crate::curvature::LKCVector;
use crate::error::{Error, Result};
use crate::gp::{eval_jet, eval_value, sample, GPModel, GPSample};
use crate::intgeo::{gkf_rhs, gmf_point};

/// Residual threshold for accepting a Newton iterate as a root.
const ROOT_TOL: f64 = 1e-10;
/// Newton iteration cap.
const MAX_NEWTON_ITERS: usize = 30;
/// Step-halving cap inside the damping line search.
const MAX_HALVINGS: usize = 8;
/// Two roots closer than this (same cell, subdivision pass) are one root.
const DUPLICATE_TOL: f64 = 1e-7;

/// Outcome of one zero-counting replicate.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ZeroCountOutcome {
    /// Number of simultaneous zeros credited to cells.
    pub count: usize,
    /// Sign-change cells where refinement failed even after subdivision.
    pub flagged_cells: usize,
}

/// Expected simultaneous-zero count of two independent unit-variance fields
/// on the reference geometry: the codimension-2 kinematic evaluation, which
/// reduces to Area / (2 pi) for a surface.
pub fn zero_count_prediction(atlas: &ManifoldAtlas) -> Result<f64> {
    let reference = LKCVector {
        values: atlas.reference_lkc(),
    };
    let gmf = gmf_point(2, atlas.m)?;
    gkf_rhs(0, &reference, &gmf, atlas.m)
}

/// Count the simultaneous zeros of two fields drawn with the given seeds.
///
/// `sign_grid` is the number of detection cells per chart axis. Equal seeds
/// are rejected: they would produce identical fields whose joint zero set is
/// a curve, not points.
pub fn zero_count_replicate(
    model: &GPModel,
    atlas: &ManifoldAtlas,
    seed_u: u64,
    seed_v: u64,
    sign_grid: usize,
) -> Result<ZeroCountOutcome> {
    if atlas.m != 2 {
        return Err(Error::invalid(format!(
            "zero counting handles surfaces (m = 2), got m = {}",
            atlas.m
        )));
    }
    if sign_grid < 2 {
        return Err(Error::invalid("sign grid needs at least 2 cells per axis"));
    }
    if seed_u == seed_v {
        return Err(Error::invalid(format!(
            "seed collision: both fields would use seed {seed_u}; \
             the zero-counting statistic needs independent fields"
        )));
    }
    let u = sample(model, seed_u);
    let v = sample(model, seed_v);

    let mut count = 0usize;
    let mut flagged = 0usize;
    for chart_idx in 0..atlas.charts.len() {
        let per_chart = count_chart_zeros(model, atlas, chart_idx, &u, &v, sign_grid)?;
        count += per_chart.0;
        flagged += per_chart.1;
    }
    Ok(ZeroCountOutcome {
        count,
        flagged_cells: flagged,
    })
}

/// Whether a root found in a chart is credited to that chart (see module
/// docs for the sphere's equator split).
fn owns_root(atlas: &ManifoldAtlas, chart_idx: usize, x: &[f64]) -> bool {
    match &atlas.kind {
        ManifoldKind::Torus { .. } => true,
        ManifoldKind::Sphere { .. } => {
            if chart_idx == 0 {
                x[0] <= FRAC_PI_2
            } else {
                x[0] < FRAC_PI_2
            }
        }
    }
}

fn count_chart_zeros(
    model: &GPModel,
    atlas: &ManifoldAtlas,
    chart_idx: usize,
    u: &GPSample,
    v: &GPSample,
    n: usize,
) -> Result<(usize, usize)> {
    let chart = atlas.chart(chart_idx);
    let lo = chart.lo.clone();
    let hi = chart.hi.clone();
    let step: Vec<f64> = (0..2).map(|ax| (hi[ax] - lo[ax]) / n as f64).collect();

    // Corner values on an (n+1) x (n+1) lattice. Periodic axes evaluate the
    // seam corner directly; the map is periodic so it matches the start.
    let corner = |i: usize, j: usize| -> Vec<f64> {
        vec![lo[0] + i as f64 * step[0], lo[1] + j as f64 * step[1]]
    };
    let mut uvals = vec![0.0f64; (n + 1) * (n + 1)];
    let mut vvals = vec![0.0f64; (n + 1) * (n + 1)];
    for i in 0..=n {
        for j in 0..=n {
            let x = corner(i, j);
            uvals[i * (n + 1) + j] = eval_value(model, u, chart, &x);
            vvals[i * (n + 1) + j] = eval_value(model, v, chart, &x);
        }
    }
    let sign_change = |vals: &[f64], i: usize, j: usize| -> bool {
        let c = [
            vals[i * (n + 1) + j],
            vals[(i + 1) * (n + 1) + j],
            vals[i * (n + 1) + j + 1],
            vals[(i + 1) * (n + 1) + j + 1],
        ];
        let pos = c.iter().any(|&w| w > 0.0);
        let neg = c.iter().any(|&w| w <= 0.0);
        pos && neg
    };

    let mut registry: Vec<Vec<f64>> = Vec::new();
    let mut flagged = 0usize;
    for i in 0..n {
        for j in 0..n {
            if !(sign_change(&uvals, i, j) && sign_change(&vvals, i, j)) {
                continue;
            }
            let cell_lo = corner(i, j);
            let cell_hi = corner(i + 1, j + 1);
            if resolve_cell(
                model,
                atlas,
                chart_idx,
                u,
                v,
                &cell_lo,
                &cell_hi,
                &mut registry,
            ) {
                flagged += 1;
            }
        }
    }
    let count = registry
        .iter()
        .filter(|root| owns_root(atlas, chart_idx, root))
        .count();
    Ok((count, flagged))
}

/// Wrap-aware max-norm distance between two chart points.
fn chart_distance(chart: &crate::atlas::Chart, a: &[f64], b: &[f64]) -> f64 {
    (0..a.len())
        .map(|ax| {
            let d = (a[ax] - b[ax]).abs();
            match chart.period[ax] {
                Some(period) => d.min(period - d),
                None => d,
            }
        })
        .fold(0.0f64, f64::max)
}

/// Add a converged root to the chart registry unless an equal root (within
/// `DUPLICATE_TOL`, periodic axes wrapped) is already present. Roots that
/// left the chart box on a bounded axis are rejected: they re-parametrize a
/// point that some in-box cell locates in proper coordinates.
fn register_root(chart: &crate::atlas::Chart, registry: &mut Vec<Vec<f64>>, root: Vec<f64>) {
    for ax in 0..root.len() {
        if chart.period[ax].is_none() && (root[ax] < chart.lo[ax] || root[ax] > chart.hi[ax]) {
            return;
        }
    }
    if !registry
        .iter()
        .any(|r| chart_distance(chart, r, &root) < DUPLICATE_TOL)
    {
        registry.push(root);
    }
}

/// Work one marked cell (see module docs for the three stages): run Newton
/// from the cell's start points, registering every root that converges
/// anywhere, then decide whether this cell still hides an unresolved root.
/// Returns true when the cell must be flagged.
#[allow(clippy::too_many_arguments)]
fn resolve_cell(
    model: &GPModel,
    atlas: &ManifoldAtlas,
    chart_idx: usize,
    u: &GPSample,
    v: &GPSample,
    cell_lo: &[f64],
    cell_hi: &[f64],
    registry: &mut Vec<Vec<f64>>,
) -> bool {
    let chart = atlas.chart(chart_idx);
    let try_start = |registry: &mut Vec<Vec<f64>>, start: &[f64]| {
        if let Some(root) = newton_refine(model, u, v, atlas, chart_idx, start) {
            register_root(chart, registry, root);
        }
    };

    // Stage 1: Newton from the cell center.
    let center = [
        0.5 * (cell_lo[0] + cell_hi[0]),
        0.5 * (cell_lo[1] + cell_hi[1]),
    ];
    try_start(registry, &center);

    // Stage 2: one subdivision. Evaluate the 3x3 sub-lattice and run Newton
    // from the center of every sub-cell that repeats the joint sign
    // pattern. This also catches a second root in the same cell.
    let mut ugrid = [[0.0f64; 3]; 3];
    let mut vgrid = [[0.0f64; 3]; 3];
    for a in 0..3 {
        for b in 0..3 {
            let x = [
                cell_lo[0] + 0.5 * a as f64 * (cell_hi[0] - cell_lo[0]),
                cell_lo[1] + 0.5 * b as f64 * (cell_hi[1] - cell_lo[1]),
            ];
            ugrid[a][b] = eval_value(model, u, chart, &x);
            vgrid[a][b] = eval_value(model, v, chart, &x);
        }
    }
    let sub_changes = |g: &[[f64; 3]; 3], a: usize, b: usize| -> bool {
        let c = [g[a][b], g[a + 1][b], g[a][b + 1], g[a + 1][b + 1]];
        c.iter().any(|&w| w > 0.0) && c.iter().any(|&w| w <= 0.0)
    };
    for a in 0..2 {
        for b in 0..2 {
            if sub_changes(&ugrid, a, b) && sub_changes(&vgrid, a, b) {
                let start = [
                    cell_lo[0] + (0.25 + 0.5 * a as f64) * (cell_hi[0] - cell_lo[0]),
                    cell_lo[1] + (0.25 + 0.5 * b as f64) * (cell_hi[1] - cell_lo[1]),
                ];
                try_start(registry, &start);
            }
        }
    }
    let in_this_cell =
        |registry: &[Vec<f64>]| registry.iter().any(|r| in_cell(chart, r, cell_lo, cell_hi));
    if in_this_cell(registry) {
        return false;
    }

    // Stage 3: the curve certificate. Bracket the points where u = 0
    // crosses the cell boundary (bisection on the refined edge segments)
    // and read off v there. All v of one sign: the u-curve enters and
    // leaves without meeting v = 0 in here, so the cell is resolved with no
    // root. Mixed signs force an interior root; give Newton one more chance
    // from between the opposite-sign crossings, then flag.
    let crossings = u_edge_crossings(model, chart, u, v, cell_lo, cell_hi, &ugrid);
    let has_pos = crossings.iter().any(|c| c.v_value > 0.0);
    let has_neg = crossings.iter().any(|c| c.v_value <= 0.0);
    if !(has_pos && has_neg) {
        return false;
    }
    for a in 0..crossings.len() {
        for b in (a + 1)..crossings.len() {
            if (crossings[a].v_value > 0.0) != (crossings[b].v_value > 0.0) {
                let start = [
                    0.5 * (crossings[a].point[0] + crossings[b].point[0]),
                    0.5 * (crossings[a].point[1] + crossings[b].point[1]),
                ];
                try_start(registry, &start);
            }
        }
    }
    !in_this_cell(registry)
}

/// A point on the cell boundary where u crosses zero, with v's value there.
struct EdgeCrossing {
    point: [f64; 2],
    v_value: f64,
}

/// Bracket u's zero crossings on the eight half-edge segments of the cell
/// boundary (the 3x3 lattice corners refine each edge into two segments)
/// and evaluate v at each crossing.
fn u_edge_crossings(
    model: &GPModel,
    chart: &crate::atlas::Chart,
    u: &GPSample,
    v: &GPSample,
    cell_lo: &[f64],
    cell_hi: &[f64],
    ugrid: &[[f64; 3]; 3],
) -> Vec<EdgeCrossing> {
    let coord = |a: usize, b: usize| -> [f64; 2] {
        [
            cell_lo[0] + 0.5 * a as f64 * (cell_hi[0] - cell_lo[0]),
            cell_lo[1] + 0.5 * b as f64 * (cell_hi[1] - cell_lo[1]),
        ]
    };
    // boundary half-edges of the 3x3 lattice, as (from, to) lattice indices
    let segments = [
        ((0, 0), (1, 0)),
        ((1, 0), (2, 0)),
        ((2, 0), (2, 1)),
        ((2, 1), (2, 2)),
        ((2, 2), (1, 2)),
        ((1, 2), (0, 2)),
        ((0, 2), (0, 1)),
        ((0, 1), (0, 0)),
    ];
    let mut out = Vec::new();
    for ((a0, b0), (a1, b1)) in segments {
        let (ua, ub) = (ugrid[a0][b0], ugrid[a1][b1]);
        if (ua > 0.0) == (ub > 0.0) {
            continue;
        }
        let mut lo = coord(a0, b0);
        let mut hi = coord(a1, b1);
        let mut flo = ua;
        for _ in 0..50 {
            let mid = [0.5 * (lo[0] + hi[0]), 0.5 * (lo[1] + hi[1])];
            let fm = eval_value(model, u, chart, &mid);
            if (fm > 0.0) == (flo > 0.0) {
                lo = mid;
                flo = fm;
            } else {
                hi = mid;
            }
        }
        let point = [0.5 * (lo[0] + hi[0]), 0.5 * (lo[1] + hi[1])];
        let v_value = eval_value(model, v, chart, &point);
        out.push(EdgeCrossing { point, v_value });
    }
    out
}

/// Wrap periodic coordinates into [lo, lo + period); leave bounded axes as
/// they are.
fn wrap_into_chart(chart: &crate::atlas::Chart, x: &mut [f64]) {
    for ax in 0..x.len() {
        if let Some(period) = chart.period[ax] {
            let rel = (x[ax] - chart.lo[ax]).rem_euclid(period);
            x[ax] = chart.lo[ax] + rel;
        }
    }
}

/// Half-open cell membership test after wrapping.
fn in_cell(chart: &crate::atlas::Chart, x: &[f64], cell_lo: &[f64], cell_hi: &[f64]) -> bool {
    let mut w = x.to_vec();
    wrap_into_chart(chart, &mut w);
    (0..x.len()).all(|ax| w[ax] >= cell_lo[ax] && w[ax] < cell_hi[ax])
}

/// Damped Newton iteration on F = (u, v) from `start`. Returns the wrapped
/// iterate when the residual drops below `ROOT_TOL`; `None` on a singular
/// Jacobian, failed line search, or iteration cap.
fn newton_refine(
    model: &GPModel,
    u: &GPSample,
    v: &GPSample,
    atlas: &ManifoldAtlas,
    chart_idx: usize,
    start: &[f64],
) -> Option<Vec<f64>> {
    let chart = atlas.chart(chart_idx);
    let mut x = start.to_vec();
    let residual = |x: &[f64]| -> f64 {
        let fu = eval_value(model, u, chart, x);
        let fv = eval_value(model, v, chart, x);
        fu.abs().max(fv.abs())
    };
    for _ in 0..MAX_NEWTON_ITERS {
        let p = ChartPoint::new(chart_idx, x.clone());
        let ju = eval_jet(model, u, atlas, &p);
        let jv = eval_jet(model, v, atlas, &p);
        let f = [ju.value, jv.value];
        let fnorm = f[0].abs().max(f[1].abs());
        if fnorm < ROOT_TOL {
            wrap_into_chart(chart, &mut x);
            return Some(x);
        }
        let jac = [[ju.grad[0], ju.grad[1]], [jv.grad[0], jv.grad[1]]];
        let det = jac[0][0] * jac[1][1] - jac[0][1] * jac[1][0];
        let scale = jac.iter().flatten().fold(0.0f64, |a, &b| a.max(b.abs()));
        if det.abs() <= 1e-14 * scale.max(1.0) * scale.max(1.0) {
            return None;
        }
        let step = [
            (f[0] * jac[1][1] - f[1] * jac[0][1]) / det,
            (f[1] * jac[0][0] - f[0] * jac[1][0]) / det,
        ];
        let mut t = 1.0;
        let mut advanced = false;
        for _ in 0..=MAX_HALVINGS {
            let trial = [x[0] - t * step[0], x[1] - t * step[1]];
            if residual(&trial) < fnorm {
                x = trial.to_vec();
                advanced = true;
                break;
            }
            t *= 0.5;
        }
        if !advanced {
            return None;
        }
    }
    None
}
