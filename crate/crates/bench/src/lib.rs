//! Shared fixtures for the criterion benchmarks.

use score_dag_core::{
    gp_model, sample_dataset, sample_er_dag, DataMatrix, NoiseFamily,
};

/// Dataset from a Gaussian GP-linked ER1 model, sized for micro-benchmarks.
pub fn gp_dataset(d: usize, n: usize, seed: u64) -> DataMatrix {
    let graph = sample_er_dag(d, d, seed).expect("valid benchmark graph");
    let model = gp_model(graph, NoiseFamily::Gaussian, seed + 1);
    sample_dataset(&model, n, seed + 2).expect("benchmark dataset")
}
