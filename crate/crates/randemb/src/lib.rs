//! Random-wave embeddings of compact surfaces and the integral geometry to
//! audit them.
//!
//! The crate builds isotropic random-wave Gaussian field models on built-in
//! manifolds (flat tori, round spheres), embeds a manifold through k
//! independent field samples, and measures how the embedding's pullback
//! metric approaches the reference geometry: deviation norms up to second
//! derivatives, curvature tensors, Lipschitz-Killing curvature functionals,
//! tube volumes, Gaussian Minkowski functionals and the kinematic formulas
//! connecting them. A harness layer runs the headline Monte Carlo
//! experiments reproducibly (seed-derived replicates, deterministic CSV and
//! JSON output, optional SVG plots) behind both a CLI and a library API.
//!
//! Module map:
//! - [`atlas`]: charts, quadrature, partitions of unity, reference metrics.
//! - [`gp`]: random-wave models, sampling, derivative jets.
//! - [`embedding`]: k-field embeddings, pullback metric jets, deviation
//!   norms.
//! - [`curvature`]: Christoffel symbols, curvature tensors, curvature
//!   functionals, tube volumes.
//! - [`intgeo`]: gamma/ball-volume helpers, Minkowski functionals, flag
//!   coefficients, kinematic sums, slice matrices.
//! - [`harness`]: experiment configuration, parallel replicates, output.
//! - [`metric`], [`tensor`], [`rng`], [`error`]: shared plumbing.

pub mod atlas;
pub mod curvature;
pub mod embedding;
pub mod error;
pub mod gp;
pub mod harness;
pub mod intgeo;
pub mod metric;
pub mod rng;
pub mod tensor;
