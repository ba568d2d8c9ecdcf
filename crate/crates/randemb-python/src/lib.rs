//! Python bindings for the random-embedding toolkit: manifold atlases,
//! random-wave field models, embeddings with pullback geometry, curvature
//! functionals, and the kinematic-formula calculus.

use std::sync::Arc;

use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;

use randemb::atlas::{ChartPoint, ManifoldAtlas};
use randemb::curvature::{lkc, LKCVector};
use randemb::embedding::{ci_deviation_norms, EmbeddingRealization, PullbackMetric};
use randemb::gp::{self, GPModel, GPSample, SpectralShape};
use randemb::harness::{zero_count_prediction, zero_count_replicate, ManifoldSpec};
use randemb::intgeo;
use randemb::metric::MetricEval;

fn err(e: randemb::error::Error) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn matrix_rows(m: &nalgebra::DMatrix<f64>) -> Vec<Vec<f64>> {
    (0..m.nrows())
        .map(|i| (0..m.ncols()).map(|j| m[(i, j)]).collect())
        .collect()
}

/// A compact manifold presented as overlapping charts with a reference
/// geometry and quadrature rule.
#[pyclass]
struct Atlas {
    inner: Arc<ManifoldAtlas>,
    spec: ManifoldSpec,
}

#[pymethods]
impl Atlas {
    /// Flat torus with the given side lengths (single periodic chart).
    #[staticmethod]
    #[pyo3(signature = (periods, nodes=24))]
    fn torus(periods: Vec<f64>, nodes: usize) -> PyResult<Self> {
        let spec = ManifoldSpec::Torus { periods };
        let inner = spec.build(nodes).map_err(err)?;
        Ok(Atlas {
            inner: Arc::new(inner),
            spec,
        })
    }

    /// Round two-sphere of the given radius (two polar-cap charts).
    #[staticmethod]
    #[pyo3(signature = (radius, nodes=16))]
    fn sphere(radius: f64, nodes: usize) -> PyResult<Self> {
        let spec = ManifoldSpec::Sphere { radius };
        let inner = spec.build(nodes).map_err(err)?;
        Ok(Atlas {
            inner: Arc::new(inner),
            spec,
        })
    }

    /// Intrinsic dimension m.
    #[getter]
    fn dim(&self) -> usize {
        self.inner.m
    }

    /// Dimension of the ambient space the charts map into.
    #[getter]
    fn ambient_dim(&self) -> usize {
        self.inner.ambient_dim
    }

    #[getter]
    fn num_charts(&self) -> usize {
        self.inner.charts.len()
    }

    /// Closed-form curvature functionals (L_0 .. L_m) of the reference
    /// geometry.
    fn reference_lkc(&self) -> Vec<f64> {
        self.inner.reference_lkc()
    }

    /// Curvature functionals of the reference metric by numerical
    /// quadrature (should agree with reference_lkc to quadrature accuracy).
    fn lkc(&self) -> PyResult<Vec<f64>> {
        Ok(lkc(&self.inner, &self.inner.reference())
            .map_err(err)?
            .values)
    }

    /// Reference metric matrix at a chart point.
    fn reference_metric(&self, chart: usize, x: Vec<f64>) -> PyResult<Vec<Vec<f64>>> {
        self.check_point(chart, &x)?;
        Ok(matrix_rows(&self.inner.reference().metric(chart, &x)))
    }

    /// Coordinate box of one chart: (lower corners, upper corners).
    fn chart_bounds(&self, chart: usize) -> PyResult<(Vec<f64>, Vec<f64>)> {
        if chart >= self.inner.charts.len() {
            return Err(PyValueError::new_err(format!("no chart {chart}")));
        }
        let c = self.inner.chart(chart);
        Ok((c.lo.clone(), c.hi.clone()))
    }

    /// Expected number of simultaneous zeros of dim-many independent unit
    /// fields on this manifold.
    fn zero_count_prediction(&self) -> PyResult<f64> {
        zero_count_prediction(&self.inner).map_err(err)
    }

    fn __repr__(&self) -> String {
        format!("Atlas('{}')", self.spec)
    }
}

impl Atlas {
    fn check_point(&self, chart: usize, x: &[f64]) -> PyResult<()> {
        if chart >= self.inner.charts.len() {
            return Err(PyValueError::new_err(format!("no chart {chart}")));
        }
        if x.len() != self.inner.m {
            return Err(PyValueError::new_err(format!(
                "point must have {} coordinates, got {}",
                self.inner.m,
                x.len()
            )));
        }
        Ok(())
    }
}

/// A frozen random-wave field model: unit-variance, isotropy-corrected
/// frequencies and amplitudes over the atlas's ambient space.
#[pyclass]
struct Model {
    inner: GPModel,
    atlas: Arc<ManifoldAtlas>,
}

#[pymethods]
impl Model {
    #[getter]
    fn num_waves(&self) -> usize {
        self.inner.num_waves()
    }

    #[getter]
    fn ambient_dim(&self) -> usize {
        self.inner.ambient_dim
    }

    /// Frequency vector of wave q.
    fn frequency(&self, q: usize) -> PyResult<Vec<f64>> {
        if q >= self.inner.num_waves() {
            return Err(PyValueError::new_err(format!("no wave {q}")));
        }
        Ok(self.inner.frequency(q))
    }

    /// Amplitude (standard deviation) of wave q.
    fn amplitude(&self, q: usize) -> PyResult<f64> {
        if q >= self.inner.num_waves() {
            return Err(PyValueError::new_err(format!("no wave {q}")));
        }
        Ok(self.inner.amplitude(q))
    }

    /// Draw one field; deterministic in the seed.
    fn field(&self, seed: u64) -> Field {
        Field {
            model: self.inner.clone(),
            atlas: Arc::clone(&self.atlas),
            sample: gp::sample(&self.inner, seed),
        }
    }

    /// Serialize to the versioned text format.
    fn to_text(&self) -> String {
        self.inner.to_text()
    }

    fn save(&self, path: &str) -> PyResult<()> {
        self.inner.save(std::path::Path::new(path)).map_err(err)
    }

    /// Load a model saved with save(); the atlas supplies chart maps for
    /// evaluation and must match the model's ambient dimension.
    #[staticmethod]
    fn load(atlas: &Atlas, path: &str) -> PyResult<Self> {
        let inner = GPModel::load(std::path::Path::new(path)).map_err(err)?;
        if inner.ambient_dim != atlas.inner.ambient_dim {
            return Err(PyValueError::new_err(format!(
                "model ambient dimension {} does not match atlas ({})",
                inner.ambient_dim, atlas.inner.ambient_dim
            )));
        }
        Ok(Model {
            inner,
            atlas: Arc::clone(&atlas.inner),
        })
    }

    fn __repr__(&self) -> String {
        format!(
            "Model(waves={}, ambient_dim={})",
            self.inner.num_waves(),
            self.inner.ambient_dim
        )
    }
}

/// One sampled field from a model.
#[pyclass]
struct Field {
    model: GPModel,
    atlas: Arc<ManifoldAtlas>,
    sample: GPSample,
}

#[pymethods]
impl Field {
    #[getter]
    fn seed(&self) -> u64 {
        self.sample.seed
    }

    /// Field value at a chart point.
    fn value(&self, chart: usize, x: Vec<f64>) -> PyResult<f64> {
        if chart >= self.atlas.charts.len() {
            return Err(PyValueError::new_err(format!("no chart {chart}")));
        }
        Ok(gp::eval_value(
            &self.model,
            &self.sample,
            self.atlas.chart(chart),
            &x,
        ))
    }

    /// Chart gradient at a chart point.
    fn gradient(&self, chart: usize, x: Vec<f64>) -> PyResult<Vec<f64>> {
        if chart >= self.atlas.charts.len() {
            return Err(PyValueError::new_err(format!("no chart {chart}")));
        }
        let jet = gp::eval_jet(
            &self.model,
            &self.sample,
            &self.atlas,
            &ChartPoint::new(chart, x),
        );
        Ok(jet.grad)
    }
}

/// A k-field random embedding h(x) = (1/sqrt(k)) (f_1(x), ..., f_k(x)) with
/// its pullback geometry.
#[pyclass]
struct Embedding {
    emb: EmbeddingRealization,
    atlas: Arc<ManifoldAtlas>,
}

#[pymethods]
impl Embedding {
    #[new]
    fn new(model: &Model, k: usize, seed: u64) -> PyResult<Self> {
        Ok(Embedding {
            emb: EmbeddingRealization::realize(&model.inner, k, seed).map_err(err)?,
            atlas: Arc::clone(&model.atlas),
        })
    }

    #[getter]
    fn k(&self) -> usize {
        self.emb.k()
    }

    /// Image of a chart point in R^k.
    fn point(&self, chart: usize, x: Vec<f64>) -> PyResult<Vec<f64>> {
        if chart >= self.atlas.charts.len() {
            return Err(PyValueError::new_err(format!("no chart {chart}")));
        }
        Ok(self
            .emb
            .embed_point(&self.atlas, &ChartPoint::new(chart, x)))
    }

    /// Pullback metric matrix at a chart point.
    fn pullback_metric(&self, chart: usize, x: Vec<f64>) -> PyResult<Vec<Vec<f64>>> {
        if chart >= self.atlas.charts.len() {
            return Err(PyValueError::new_err(format!("no chart {chart}")));
        }
        Ok(matrix_rows(
            &self
                .emb
                .pullback_metric(&self.atlas, &ChartPoint::new(chart, x)),
        ))
    }

    /// Deviation norms of the pullback metric from the reference metric:
    /// one norm per order 0..=order (each adds the sups of the next
    /// derivative order), maximized over charts and components on a grid.
    #[pyo3(signature = (order=2, grid=32))]
    fn deviation_norms(&self, order: usize, grid: usize) -> PyResult<Vec<f64>> {
        ci_deviation_norms(&self.emb, &self.atlas, &self.atlas.reference(), order, grid)
            .map_err(err)
    }

    /// Curvature functionals (L_0 .. L_m) of the pullback metric.
    fn lkc(&self) -> PyResult<Vec<f64>> {
        let pullback = PullbackMetric {
            emb: &self.emb,
            atlas: &self.atlas,
        };
        Ok(lkc(&self.atlas, &pullback).map_err(err)?.values)
    }

    fn __repr__(&self) -> String {
        format!("Embedding(k={})", self.emb.k())
    }
}

/// Build the isotropy-corrected random-wave model for an atlas.
#[pyfunction]
#[pyo3(signature = (atlas, waves=64, spectrum="uniform-shell", seed=1))]
fn build_model(atlas: &Atlas, waves: usize, spectrum: &str, seed: u64) -> PyResult<Model> {
    let shape: SpectralShape = spectrum.parse().map_err(err)?;
    let inner = gp::build_model(&atlas.inner, waves, shape, seed).map_err(err)?;
    Ok(Model {
        inner,
        atlas: Arc::clone(&atlas.inner),
    })
}

/// Volume of the unit ball in R^n.
#[pyfunction]
fn ball_volume(n: usize) -> f64 {
    intgeo::ball_volume(n)
}

/// Flag coefficient [a; b] built from binomials and ball volumes.
#[pyfunction]
fn flag_coefficient(a: usize, b: usize) -> PyResult<f64> {
    intgeo::flag_coefficient(a, b).map_err(err)
}

/// Gaussian tube functionals M_0..M_j_max of a codimension-n point set.
#[pyfunction]
fn gmf_point(n: usize, j_max: usize) -> PyResult<Vec<f64>> {
    Ok(intgeo::gmf_point(n, j_max).map_err(err)?.values)
}

/// Expected curvature functionals (orders 0..=m) of the zero set of
/// `codim` independent unit fields on a manifold with the given
/// functionals, via the kinematic formula.
#[pyfunction]
fn gkf_zero_set(lkc_values: Vec<f64>, codim: usize) -> PyResult<Vec<f64>> {
    if lkc_values.is_empty() {
        return Err(PyValueError::new_err("need at least L_0"));
    }
    let m = lkc_values.len() - 1;
    let lkc_m = LKCVector { values: lkc_values };
    let gmf = intgeo::gmf_point(codim, m).map_err(err)?;
    (0..=m)
        .map(|i| intgeo::gkf_rhs(i, &lkc_m, &gmf, m).map_err(err))
        .collect()
}

/// The (a+1) x (a+1) upper-triangular map from intrinsic volumes to
/// expected slice Euler characteristics.
#[pyfunction]
fn z_matrix(a: usize) -> PyResult<Vec<Vec<f64>>> {
    Ok(matrix_rows(&intgeo::z_matrix(a).map_err(err)?.z))
}

/// Invert the triangular slice map: recover intrinsic volumes from the
/// vector of expected slice Euler characteristics.
#[pyfunction]
fn recover_lkc(mu: Vec<f64>) -> PyResult<Vec<f64>> {
    if mu.is_empty() {
        return Err(PyValueError::new_err("need at least one slice value"));
    }
    let a = mu.len() - 1;
    let z = intgeo::z_matrix(a).map_err(err)?;
    Ok(intgeo::recover_lkc(&z, &mu).map_err(err)?.values)
}

/// Smooth power-series continuation of P{chi_n <= rho}.
#[pyfunction]
fn chi_cdf(n: usize, rho: f64) -> f64 {
    intgeo::chi_cdf_series(n, rho)
}

/// Count simultaneous zeros of two independent fields drawn from the
/// model; returns (count, unresolved_cells).
#[pyfunction]
#[pyo3(signature = (model, seed_u, seed_v, sign_grid=128))]
fn zero_count(
    model: &Model,
    seed_u: u64,
    seed_v: u64,
    sign_grid: usize,
) -> PyResult<(usize, usize)> {
    let outcome =
        zero_count_replicate(&model.inner, &model.atlas, seed_u, seed_v, sign_grid).map_err(err)?;
    Ok((outcome.count, outcome.flagged_cells))
}

#[pymodule]
fn randemb_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<Atlas>()?;
    m.add_class::<Model>()?;
    m.add_class::<Field>()?;
    m.add_class::<Embedding>()?;
    m.add_function(wrap_pyfunction!(build_model, m)?)?;
    m.add_function(wrap_pyfunction!(ball_volume, m)?)?;
    m.add_function(wrap_pyfunction!(flag_coefficient, m)?)?;
    m.add_function(wrap_pyfunction!(gmf_point, m)?)?;
    m.add_function(wrap_pyfunction!(gkf_zero_set, m)?)?;
    m.add_function(wrap_pyfunction!(z_matrix, m)?)?;
    m.add_function(wrap_pyfunction!(recover_lkc, m)?)?;
    m.add_function(wrap_pyfunction!(chi_cdf, m)?)?;
    m.add_function(wrap_pyfunction!(zero_count, m)?)?;
    Ok(())
}
