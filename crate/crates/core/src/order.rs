//! Causal order search: peel off the node whose estimated score-Jacobian
//! diagonal has the smallest variance (for an additive Gaussian noise model
//! the true leaf's is exactly constant), prepend it to the order, drop its
//! column, and repeat. Also houses the VarSort baseline.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::data::DataMatrix;
use crate::error::Result;
use crate::graph::TopoOrder;
use crate::kernel::median_bandwidth;
use crate::scm::{analytic_jacobian_diag, ScmModel};
use crate::stein::jacobian_diag_with_bandwidth;

/// One leaf-removal step: the surviving node ids, the per-column variance of
/// the Jacobian-diagonal estimate, the chosen leaf, and the bandwidth used
/// (absent for estimators without one).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct OrderStep {
    pub remaining: Vec<usize>,
    pub variances: Vec<f64>,
    pub leaf: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bandwidth: Option<f64>,
}

/// Full record of an order search; `order` reads sources-first.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct OrderTrace {
    pub order: TopoOrder,
    pub steps: Vec<OrderStep>,
}

impl OrderTrace {
    pub fn read_json_path<P: AsRef<std::path::Path>>(path: P) -> Result<OrderTrace> {
        let text = std::fs::read_to_string(path)?;
        serde_json::from_str(&text).map_err(|e| crate::error::Error::Parse {
            line: e.line(),
            message: e.to_string(),
        })
    }

    pub fn write_json_path<P: AsRef<std::path::Path>>(&self, path: P) -> Result<()> {
        let text = serde_json::to_string_pretty(self).expect("trace serialization");
        std::fs::write(path, text + "\n")?;
        Ok(())
    }
}

/// Source of Jacobian-diagonal estimates for the order search. `x` holds the
/// surviving columns and `nodes` their original ids (ascending).
pub trait JacobianDiagSource {
    fn jacobian_diag(
        &mut self,
        x: &DataMatrix,
        nodes: &[usize],
    ) -> Result<(DMatrix<f64>, Option<f64>)>;
}

/// The Stein estimator with the median-heuristic bandwidth, recomputed on the
/// reduced matrix at every step.
pub struct SteinSource {
    pub eta: f64,
}

impl JacobianDiagSource for SteinSource {
    fn jacobian_diag(
        &mut self,
        x: &DataMatrix,
        _nodes: &[usize],
    ) -> Result<(DMatrix<f64>, Option<f64>)> {
        let s = median_bandwidth(x)?;
        let j = jacobian_diag_with_bandwidth(x, s, self.eta)?;
        Ok((j.values, Some(s)))
    }
}

/// Ground-truth source backed by the analytic Jacobian of a parametric model;
/// each step evaluates the model restricted to the surviving nodes.
pub struct AnalyticSource {
    pub model: ScmModel,
}

impl JacobianDiagSource for AnalyticSource {
    fn jacobian_diag(
        &mut self,
        x: &DataMatrix,
        nodes: &[usize],
    ) -> Result<(DMatrix<f64>, Option<f64>)> {
        let sub = self.model.restrict(nodes)?;
        Ok((analytic_jacobian_diag(&sub, x)?, None))
    }
}

/// Order search with the Stein Jacobian estimator.
pub fn score_order(x: &DataMatrix, eta: f64) -> Result<OrderTrace> {
    score_order_with(x, &mut SteinSource { eta })
}

/// Order search with a caller-supplied Jacobian source.
pub fn score_order_with(
    x: &DataMatrix,
    source: &mut dyn JacobianDiagSource,
) -> Result<OrderTrace> {
    let d = x.d();
    let n = x.n();
    let mut current = x.clone();
    let mut nodes: Vec<usize> = (0..d).collect();
    let mut steps = Vec::with_capacity(d);
    let mut reversed_order = Vec::with_capacity(d);
    for step in 0..d {
        let (jac, bandwidth) = source
            .jacobian_diag(&current, &nodes)
            .map_err(|e| e.with_step(step))?;
        let variances: Vec<f64> = (0..nodes.len())
            .map(|c| crate::data::column_variance(jac.column(c).iter().copied(), n))
            .collect();
        // argmin; ties go to the smallest node id (nodes is ascending)
        let mut best = 0;
        for c in 1..variances.len() {
            if variances[c] < variances[best] {
                best = c;
            }
        }
        let leaf = nodes[best];
        steps.push(OrderStep {
            remaining: nodes.clone(),
            variances,
            leaf,
            bandwidth,
        });
        reversed_order.push(leaf);
        nodes.remove(best);
        if step + 1 < d {
            current = current.drop_column(best);
        }
    }
    reversed_order.reverse();
    Ok(OrderTrace {
        order: TopoOrder::new(reversed_order)?,
        steps,
    })
}

/// Baseline: nodes sorted by increasing marginal sample variance, ties by id.
pub fn var_sort_order(x: &DataMatrix) -> TopoOrder {
    let mut idx: Vec<usize> = (0..x.d()).collect();
    let variances: Vec<f64> = (0..x.d()).map(|j| x.column_variance(j)).collect();
    idx.sort_by(|&a, &b| {
        variances[a]
            .partial_cmp(&variances[b])
            .expect("finite variances")
            .then(a.cmp(&b))
    });
    TopoOrder::new(idx).expect("index sort is a permutation")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::Dag;
    use crate::metrics::d_top;
    use crate::scm::{random_parametric_model, sample_dataset, NoiseFamily};
    use crate::stein::DEFAULT_ETA;
    use nalgebra::DMatrix;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_data(n: usize, d: usize, seed: u64) -> DataMatrix {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        DataMatrix::new(DMatrix::from_fn(n, d, |_, _| rng.gen::<f64>() * 2.0 - 1.0)).unwrap()
    }

    #[test]
    fn single_variable_order() {
        let x = random_data(50, 1, 1);
        let trace = score_order(&x, DEFAULT_ETA).unwrap();
        assert_eq!(trace.order.as_slice(), &[0]);
        assert_eq!(trace.steps.len(), 1);
    }

    #[test]
    fn two_node_chain_is_ordered_correctly() {
        let graph = Dag::from_edges(2, &[(0, 1)]).unwrap();
        let mut hits = 0;
        for seed in 0..10u64 {
            let model = random_parametric_model(graph.clone(), NoiseFamily::Gaussian, seed);
            let x = sample_dataset(&model, 1000, seed + 100).unwrap();
            let trace = score_order(&x, DEFAULT_ETA).unwrap();
            if trace.order.as_slice() == [0, 1] {
                hits += 1;
            }
        }
        assert!(hits >= 9, "correct order in only {hits}/10 seeds");
    }

    #[test]
    fn oracle_source_recovers_a_valid_order() {
        let graph = Dag::from_edges(5, &[(0, 2), (1, 2), (2, 3), (1, 4), (3, 4)]).unwrap();
        let model = random_parametric_model(graph.clone(), NoiseFamily::Gaussian, 3);
        let x = sample_dataset(&model, 400, 4).unwrap();
        let trace = score_order_with(
            &x,
            &mut AnalyticSource {
                model: model.clone(),
            },
        )
        .unwrap();
        assert_eq!(d_top(&trace.order, &graph).unwrap(), 0);
        for step in &trace.steps {
            let local = step.remaining.iter().position(|&v| v == step.leaf).unwrap();
            assert!(step.variances[local] < 1e-20);
        }
    }

    #[test]
    fn trace_invariants_hold() {
        let x = random_data(120, 4, 9);
        let trace = score_order(&x, DEFAULT_ETA).unwrap();
        assert_eq!(trace.steps.len(), 4);
        for (t, step) in trace.steps.iter().enumerate() {
            assert_eq!(step.remaining.len(), 4 - t);
            let local = step.remaining.iter().position(|&v| v == step.leaf).unwrap();
            for (c, &v) in step.variances.iter().enumerate() {
                if c != local {
                    assert!(step.variances[local] <= v);
                }
            }
            if t > 0 {
                // bandwidth is recomputed on the reduced matrix
                assert_ne!(step.bandwidth, trace.steps[0].bandwidth);
            }
        }
    }

    #[test]
    fn search_is_deterministic() {
        let x = random_data(150, 3, 5);
        let a = score_order(&x, DEFAULT_ETA).unwrap();
        let b = score_order(&x, DEFAULT_ETA).unwrap();
        assert_eq!(a.order, b.order);
        for (s, t) in a.steps.iter().zip(&b.steps) {
            assert_eq!(s.variances, t.variances);
            assert_eq!(s.bandwidth, t.bandwidth);
        }
    }

    #[test]
    fn degenerate_data_reports_step() {
        let x = DataMatrix::from_rows(&vec![vec![1.0, 1.0]; 20]).unwrap();
        let err = score_order(&x, DEFAULT_ETA).unwrap_err();
        assert!(err.to_string().contains("order step 0"), "{err}");
    }

    #[test]
    fn var_sort_examples() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let x = DataMatrix::new(DMatrix::from_fn(500, 3, |_, j| {
            let scale = [3.0f64, 1.0, 2.0][j].sqrt();
            (rng.gen::<f64>() - 0.5) * scale * 12f64.sqrt()
        }))
        .unwrap();
        assert_eq!(var_sort_order(&x).as_slice(), &[1, 2, 0]);

        let single = random_data(10, 1, 2);
        assert_eq!(var_sort_order(&single).as_slice(), &[0]);
    }

    #[test]
    fn trace_json_round_trip() {
        let x = random_data(80, 3, 12);
        let trace = score_order(&x, DEFAULT_ETA).unwrap();
        let text = serde_json::to_string(&trace).unwrap();
        let back: OrderTrace = serde_json::from_str(&text).unwrap();
        assert_eq!(back.order, trace.order);
        assert_eq!(back.steps.len(), trace.steps.len());
    }
}
