//! Characteristic kernels for RKHS mean embeddings.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Gaussian kernel family `k(u,v) = exp(-||u-v||^2 / (2 gamma^2))`,
/// optionally with a distinct bandwidth per network layer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KernelSpec {
    pub bandwidth: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub per_layer: Option<Vec<f64>>,
}

impl KernelSpec {
    pub fn gaussian(bandwidth: f64) -> Result<Self> {
        if !(bandwidth.is_finite() && bandwidth > 0.0) {
            return Err(Error::Spec(
                "kernel bandwidth must be finite and positive".into(),
            ));
        }
        Ok(KernelSpec {
            bandwidth,
            per_layer: None,
        })
    }

    /// Bandwidth used at network layer `l` (1-based); falls back to the
    /// shared bandwidth when no per-layer sequence is set.
    pub fn bandwidth_for_layer(&self, l: usize) -> f64 {
        self.per_layer
            .as_ref()
            .and_then(|v| v.get(l - 1).copied())
            .unwrap_or(self.bandwidth)
    }

    /// The Gaussian kernel is `1/(gamma * sqrt(e))`-Lipschitz in each argument:
    /// the gradient magnitude `(r/gamma^2) exp(-r^2/(2 gamma^2))` is maximal
    /// at `r = gamma`.
    pub fn lipschitz(&self) -> f64 {
        1.0 / (self.bandwidth * std::f64::consts::E.sqrt())
    }
}

/// Evaluates the Gaussian kernel on two points of equal dimension.
pub fn kernel_eval(spec: &KernelSpec, u: &[f64], v: &[f64]) -> Result<f64> {
    if u.len() != v.len() {
        return Err(Error::Dimension {
            expected: u.len(),
            got: v.len(),
            context: "kernel_eval",
        });
    }
    Ok(gaussian(spec.bandwidth, u, v))
}

#[inline]
pub(crate) fn gaussian(gamma: f64, u: &[f64], v: &[f64]) -> f64 {
    let mut d2 = 0.0;
    for (a, b) in u.iter().zip(v) {
        let d = a - b;
        d2 += d * d;
    }
    (-d2 / (2.0 * gamma * gamma)).exp()
}

/// Median pairwise distance over the pooled rows of two column-sample
/// matrices. The median heuristic bandwidth is frozen after the first batch.
pub fn median_heuristic(s: &DMatrix<f64>, t: &DMatrix<f64>) -> f64 {
    let cols: Vec<_> = s.column_iter().chain(t.column_iter()).collect();
    let mut dists = Vec::with_capacity(cols.len() * (cols.len() - 1) / 2);
    for i in 0..cols.len() {
        for j in (i + 1)..cols.len() {
            dists.push((cols[i] - cols[j]).norm());
        }
    }
    if dists.is_empty() {
        return 1.0;
    }
    dists.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let m = dists[dists.len() / 2];
    if m > 0.0 {
        m
    } else {
        1.0
    }
}
