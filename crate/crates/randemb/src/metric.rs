//! Metric fields and their derivative jets.
//!
//! A `MetricJet` holds a metric tensor together with its first and second
//! chart partials at one point. Partials are stored once per canonical sorted
//! index slot, so the symmetries g_ij = g_ji, dg symmetric in (i,j) and ddg
//! symmetric in both (p,q) and (i,j) hold exactly for stored jets.

use nalgebra::DMatrix;

use crate::tensor::{sym2_idx, sym2_len};

#[derive(Clone, Debug)]
pub struct MetricJet {
    m: usize,
    g: Vec<f64>,   // sym2 slots
    dg: Vec<f64>,  // m * sym2: [p][ij]
    ddg: Vec<f64>, // sym2 * sym2: [pq][ij]
}

impl MetricJet {
    pub fn zeros(m: usize) -> Self {
        let s2 = sym2_len(m);
        MetricJet {
            m,
            g: vec![0.0; s2],
            dg: vec![0.0; m * s2],
            ddg: vec![0.0; s2 * s2],
        }
    }

    pub fn dim(&self) -> usize {
        self.m
    }

    pub fn g(&self, i: usize, j: usize) -> f64 {
        self.g[sym2_idx(self.m, i, j)]
    }

    /// d g_ij / d x_p
    pub fn dg(&self, p: usize, i: usize, j: usize) -> f64 {
        self.dg[p * sym2_len(self.m) + sym2_idx(self.m, i, j)]
    }

    /// d^2 g_ij / (d x_p d x_q)
    pub fn ddg(&self, p: usize, q: usize, i: usize, j: usize) -> f64 {
        let s2 = sym2_len(self.m);
        self.ddg[sym2_idx(self.m, p, q) * s2 + sym2_idx(self.m, i, j)]
    }

    pub fn set_g(&mut self, i: usize, j: usize, v: f64) {
        self.g[sym2_idx(self.m, i, j)] = v;
    }

    pub fn set_dg(&mut self, p: usize, i: usize, j: usize, v: f64) {
        let s2 = sym2_len(self.m);
        self.dg[p * s2 + sym2_idx(self.m, i, j)] = v;
    }

    pub fn set_ddg(&mut self, p: usize, q: usize, i: usize, j: usize, v: f64) {
        let s2 = sym2_len(self.m);
        self.ddg[sym2_idx(self.m, p, q) * s2 + sym2_idx(self.m, i, j)] = v;
    }

    pub fn metric_matrix(&self) -> DMatrix<f64> {
        let m = self.m;
        DMatrix::from_fn(m, m, |i, j| self.g(i, j))
    }
}

/// Per-point metric evaluator.
pub trait MetricEval: Sync {
    fn metric(&self, chart: usize, x: &[f64]) -> DMatrix<f64>;
}

/// Per-point metric evaluator with exact first and second partials.
pub trait MetricJetEval: MetricEval {
    fn metric_jet(&self, chart: usize, x: &[f64]) -> MetricJet;
}

impl<F> MetricEval for F
where
    F: Fn(usize, &[f64]) -> DMatrix<f64> + Sync,
{
    fn metric(&self, chart: usize, x: &[f64]) -> DMatrix<f64> {
        self(chart, x)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn stored_jets_are_exactly_symmetric() {
        let mut jet = MetricJet::zeros(3);
        jet.set_g(0, 1, 2.5);
        jet.set_dg(2, 1, 0, -1.25);
        jet.set_ddg(1, 0, 2, 0, 0.75);
        assert_eq!(jet.g(1, 0), 2.5);
        assert_eq!(jet.dg(2, 0, 1), -1.25);
        assert_eq!(jet.ddg(0, 1, 0, 2), 0.75);
        assert_eq!(jet.ddg(1, 0, 0, 2), 0.75);
    }
}
