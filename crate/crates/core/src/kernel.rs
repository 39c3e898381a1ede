//! RBF kernel machinery shared by the Stein estimators: median-heuristic
//! bandwidth, Gram matrix, and the kernel-derivative aggregates
//! `⟨∇,K⟩` and `⟨∇²_diag,K⟩`.
//!
//! All derivatives use the analytic closed forms of
//! `κ_s(x, y) = exp(−‖x−y‖² / (2s²))`; nothing here is autodiffed, so results
//! are bit-reproducible for a fixed input.

use nalgebra::DMatrix;
use rayon::prelude::*;

use crate::data::DataMatrix;
use crate::error::{Error, Result};

/// Bandwidth, Gram matrix and the data they were built from. Building the
/// context once lets the two Stein ridge regressions share `K`.
#[derive(Debug, Clone)]
pub struct KernelContext {
    bandwidth: f64,
    k: DMatrix<f64>,
    x: DataMatrix,
}

impl KernelContext {
    pub fn new(x: &DataMatrix, bandwidth: f64) -> Result<Self> {
        if bandwidth <= 0.0 || !bandwidth.is_finite() {
            return Err(Error::InvalidConfig(format!(
                "kernel bandwidth must be positive and finite (got {bandwidth})"
            )));
        }
        let sq = squared_distances(x.values());
        let k = map_entries(&sq, |v| (-v / (2.0 * bandwidth * bandwidth)).exp());
        Ok(Self {
            bandwidth,
            k,
            x: x.clone(),
        })
    }

    pub fn bandwidth(&self) -> f64 {
        self.bandwidth
    }

    pub fn gram(&self) -> &DMatrix<f64> {
        &self.k
    }

    pub fn data(&self) -> &DataMatrix {
        &self.x
    }

    /// `⟨∇,K⟩[i][j] = Σ_k ∂κ(x^i, x^k)/∂x^k_j = Σ_k K[i][k]·(x^i_j − x^k_j)/s²`.
    pub fn grad_k_sum(&self) -> DMatrix<f64> {
        let x = self.x.values();
        let s2 = self.bandwidth * self.bandwidth;
        let kx = &self.k * x;
        let rowsum = row_sums(&self.k);
        DMatrix::from_fn(x.nrows(), x.ncols(), |i, j| {
            (rowsum[i] * x[(i, j)] - kx[(i, j)]) / s2
        })
    }

    /// `⟨∇²_diag,K⟩[i][j] = Σ_k ∂²κ(x^i, x^k)/∂(x^k_j)²
    ///                    = Σ_k K[i][k]·((x^i_j − x^k_j)²/s⁴ − 1/s²)`.
    pub fn diag_hess_k_sum(&self) -> DMatrix<f64> {
        let x = self.x.values();
        let s2 = self.bandwidth * self.bandwidth;
        let s4 = s2 * s2;
        let x2 = x.map(|v| v * v);
        let kx = &self.k * x;
        let kx2 = &self.k * &x2;
        DMatrix::from_fn(x.nrows(), x.ncols(), |i, j| {
            let xij = x[(i, j)];
            (xij * xij * rowsum_entry(&self.k, i) - 2.0 * xij * kx[(i, j)] + kx2[(i, j)]) / s4
                - rowsum_entry(&self.k, i) / s2
        })
    }
}

/// Median of the `n(n−1)/2` pairwise Euclidean distances (self-distances
/// excluded); even counts average the two middle values.
pub fn median_bandwidth(x: &DataMatrix) -> Result<f64> {
    let n = x.n();
    if n < 2 {
        return Err(Error::InvalidConfig(
            "median bandwidth needs at least two samples".into(),
        ));
    }
    let sq = squared_distances(x.values());
    let mut dists = Vec::with_capacity(n * (n - 1) / 2);
    for i in 0..n {
        for k in (i + 1)..n {
            dists.push(sq[(i, k)].sqrt());
        }
    }
    dists.sort_unstable_by(|a, b| a.partial_cmp(b).expect("finite distances"));
    let m = dists.len();
    let median = if m % 2 == 1 {
        dists[m / 2]
    } else {
        0.5 * (dists[m / 2 - 1] + dists[m / 2])
    };
    if median <= 0.0 {
        return Err(Error::DegenerateData(
            "median pairwise distance is zero (duplicate-dominated data)".into(),
        ));
    }
    Ok(median)
}

/// Gram matrix `K[i][k] = exp(−‖x^i − x^k‖² / (2s²))`.
pub fn gram(x: &DataMatrix, bandwidth: f64) -> Result<DMatrix<f64>> {
    Ok(KernelContext::new(x, bandwidth)?.k)
}

/// See [`KernelContext::grad_k_sum`].
pub fn grad_k_sum(x: &DataMatrix, bandwidth: f64) -> Result<DMatrix<f64>> {
    Ok(KernelContext::new(x, bandwidth)?.grad_k_sum())
}

/// See [`KernelContext::diag_hess_k_sum`].
pub fn diag_hess_k_sum(x: &DataMatrix, bandwidth: f64) -> Result<DMatrix<f64>> {
    Ok(KernelContext::new(x, bandwidth)?.diag_hess_k_sum())
}

/// Squared pairwise distances via `‖a‖² + ‖b‖² − 2a·b`, clamped at zero to
/// kill negative round-off. The inner-product block goes through one gemm.
fn squared_distances(x: &DMatrix<f64>) -> DMatrix<f64> {
    let n = x.nrows();
    let inner = x * x.transpose();
    let norms: Vec<f64> = (0..n).map(|i| inner[(i, i)]).collect();
    let mut buf = vec![0.0f64; n * n];
    buf.par_chunks_mut(n).enumerate().for_each(|(i, row)| {
        for (k, slot) in row.iter_mut().enumerate() {
            *slot = (norms[i] + norms[k] - 2.0 * inner[(i, k)]).max(0.0);
        }
    });
    DMatrix::from_row_slice(n, n, &buf)
}

fn map_entries(m: &DMatrix<f64>, f: impl Fn(f64) -> f64 + Sync) -> DMatrix<f64> {
    let mut out = m.clone();
    out.as_mut_slice().par_iter_mut().for_each(|v| *v = f(*v));
    out
}

fn row_sums(m: &DMatrix<f64>) -> Vec<f64> {
    (0..m.nrows()).map(|i| m.row(i).sum()).collect()
}

fn rowsum_entry(m: &DMatrix<f64>, i: usize) -> f64 {
    m.row(i).sum()
}
