//! Edge pruning of the order-implied full DAG.
//!
//! Each node is regressed on its order-predecessors with an additive cubic
//! B-spline expansion; a covariate's edge survives when the group F-test on
//! its coefficient block beats the significance cutoff. Edges can therefore
//! only ever point forward in the order.

use nalgebra::{Cholesky, DMatrix, DVector};
use rayon::prelude::*;
use statrs::distribution::{ContinuousCDF, FisherSnedecor};

use crate::data::DataMatrix;
use crate::error::{Error, Result};
use crate::graph::{Dag, TopoOrder};
use crate::order::{score_order, OrderTrace};

#[derive(Debug, Clone, Copy)]
pub struct PruneConfig {
    /// Significance level an edge must beat to survive.
    pub cutoff: f64,
    /// Spline basis functions per covariate.
    pub basis_size: usize,
    /// Stabiliser added to the normal equations, scaled by their mean
    /// diagonal; the F-test keeps unpenalised degrees of freedom.
    pub ridge: f64,
}

impl Default for PruneConfig {
    fn default() -> Self {
        Self {
            cutoff: 0.001,
            basis_size: 10,
            ridge: 1e-8,
        }
    }
}

impl PruneConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.cutoff > 0.0 && self.cutoff < 1.0) {
            return Err(Error::InvalidConfig(format!(
                "cutoff must lie in (0, 1), got {}",
                self.cutoff
            )));
        }
        if self.basis_size < 3 {
            return Err(Error::InvalidConfig(format!(
                "basis_size must be at least 3, got {}",
                self.basis_size
            )));
        }
        if self.ridge < 0.0 || !self.ridge.is_finite() {
            return Err(Error::InvalidConfig(format!(
                "ridge must be non-negative, got {}",
                self.ridge
            )));
        }
        Ok(())
    }
}

/// Prunes the full DAG implied by `order`: keeps `i → j` iff `i` precedes `j`
/// and the spline block of `i` is significant in the regression of `x_j` on
/// all of `j`'s order-predecessors jointly.
pub fn prune(x: &DataMatrix, order: &TopoOrder, cfg: &PruneConfig) -> Result<Dag> {
    cfg.validate()?;
    let d = x.d();
    if order.len() != d {
        return Err(Error::DimensionMismatch {
            context: "prune order length",
            expected: d,
            actual: order.len(),
        });
    }
    let n = x.n();
    // Most recent predecessors that keep the design under n rows; older
    // candidates are dropped when the sample is too small to fit them all.
    let max_preds = (n - 1) / cfg.basis_size;

    let kept_per_node: Vec<Result<Vec<usize>>> = (1..d)
        .collect::<Vec<_>>()
        .par_iter()
        .map(|&t| {
            let node = order.as_slice()[t];
            let mut preds: Vec<usize> = order.as_slice()[..t].to_vec();
            if preds.len() > max_preds {
                preds = preds.split_off(preds.len() - max_preds);
            }
            significant_covariates(x, node, &preds, cfg)
        })
        .collect();

    let mut edges = Vec::new();
    for (t, kept) in kept_per_node.iter().enumerate() {
        let node = order.as_slice()[t + 1];
        match kept {
            Ok(parents) => edges.extend(parents.iter().map(|&p| (p, node))),
            Err(e) => {
                return Err(Error::Numerical(format!(
                    "pruning regression for node {node} failed: {e}"
                )))
            }
        }
    }
    Dag::from_edges(d, &edges)
}

/// One-call pipeline: order search followed by pruning.
pub fn discover(x: &DataMatrix, eta: f64, cfg: &PruneConfig) -> Result<(Dag, OrderTrace)> {
    let trace = score_order(x, eta)?;
    let dag = prune(x, &trace.order, cfg)?;
    Ok((dag, trace))
}

/// Returns the predecessors whose coefficient block passes the group F-test.
fn significant_covariates(
    x: &DataMatrix,
    node: usize,
    preds: &[usize],
    cfg: &PruneConfig,
) -> Result<Vec<usize>> {
    if preds.is_empty() {
        return Ok(Vec::new());
    }
    let n = x.n();
    let m = cfg.basis_size;
    let degree = 3.min(m - 1);
    let y = x.column(node);

    // Per-covariate basis blocks. The m functions of a clamped basis sum to
    // one, so the first column of each block is dropped in favour of a single
    // shared intercept; the group then has m − 1 degrees of freedom.
    let block_width = m - 1;
    let mut blocks: Vec<DMatrix<f64>> = Vec::with_capacity(preds.len());
    for &p in preds {
        let col: Vec<f64> = x.column(p).iter().copied().collect();
        let knots = clamped_quantile_knots(&col, m, degree);
        let mut block = DMatrix::zeros(n, block_width);
        for (k, &v) in col.iter().enumerate() {
            let basis = bspline_row(v, &knots, degree, m);
            for b in 1..m {
                block[(k, b - 1)] = basis[b];
            }
        }
        blocks.push(block);
    }

    let assemble = |skip: Option<usize>| -> DMatrix<f64> {
        let cols = 1 + block_width * (preds.len() - usize::from(skip.is_some()));
        let mut design = DMatrix::zeros(n, cols);
        for k in 0..n {
            design[(k, 0)] = 1.0;
        }
        let mut offset = 1;
        for (idx, block) in blocks.iter().enumerate() {
            if skip == Some(idx) {
                continue;
            }
            design.view_mut((0, offset), (n, block_width)).copy_from(block);
            offset += block_width;
        }
        design
    };

    let full = assemble(None);
    let p_full = full.ncols();
    if n <= p_full {
        return Err(Error::InvalidConfig(format!(
            "need more than {p_full} samples to fit {} covariates",
            preds.len()
        )));
    }
    let df_resid = (n - p_full) as f64;
    let rss_full = fit_rss(&full, &y, cfg.ridge)?;

    let f_dist = FisherSnedecor::new(block_width as f64, df_resid)
        .map_err(|e| Error::Numerical(format!("F distribution: {e}")))?;

    let mut kept = Vec::new();
    for (idx, &p) in preds.iter().enumerate() {
        let rss_red = fit_rss(&assemble(Some(idx)), &y, cfg.ridge)?;
        let numerator = (rss_red - rss_full).max(0.0) / block_width as f64;
        let denominator = rss_full / df_resid;
        let p_value = if denominator <= 0.0 {
            // perfect fit: any variance explained is infinitely significant
            if numerator > 0.0 {
                0.0
            } else {
                1.0
            }
        } else {
            1.0 - f_dist.cdf(numerator / denominator)
        };
        if p_value < cfg.cutoff {
            kept.push(p);
        }
    }
    Ok(kept)
}

/// Residual sum of squares of the (stabilised) least-squares fit.
fn fit_rss(design: &DMatrix<f64>, y: &DVector<f64>, ridge: f64) -> Result<f64> {
    let xtx = design.transpose() * design;
    let xty = design.transpose() * y;
    let p = xtx.nrows();
    let scale = xtx.diagonal().mean().max(f64::MIN_POSITIVE);
    let mut lambda = ridge * scale;
    for _ in 0..8 {
        let mut a = xtx.clone();
        for i in 0..p {
            a[(i, i)] += lambda;
        }
        if let Some(chol) = Cholesky::new(a) {
            let beta = chol.solve(&xty);
            let resid = y - design * beta;
            return Ok(resid.norm_squared());
        }
        log::warn!("normal equations not SPD at ridge {lambda:e}; escalating");
        lambda = (lambda * 10.0).max(1e-12 * scale);
    }
    Err(Error::Numerical(
        "normal equations stayed rank-deficient after ridge escalation".into(),
    ))
}

/// Clamped knot vector: boundary knots at the data min/max with multiplicity
/// `degree + 1`, interior knots at empirical quantiles.
fn clamped_quantile_knots(values: &[f64], m: usize, degree: usize) -> Vec<f64> {
    let mut sorted = values.to_vec();
    sorted.sort_unstable_by(|a, b| a.partial_cmp(b).expect("finite data"));
    let lo = sorted[0];
    let hi = sorted[sorted.len() - 1];
    let interior = m - degree - 1;
    let mut knots = vec![lo; degree + 1];
    for k in 1..=interior {
        knots.push(quantile(&sorted, k as f64 / (interior + 1) as f64));
    }
    knots.extend(std::iter::repeat_n(hi, degree + 1));
    knots
}

fn quantile(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    let frac = pos - lo as f64;
    sorted[lo] * (1.0 - frac) + sorted[hi] * frac
}

/// Cox–de Boor evaluation of all `m` basis functions at `x`, with the 0/0
/// convention for coincident knots and a closed right boundary.
fn bspline_row(x: f64, knots: &[f64], degree: usize, m: usize) -> Vec<f64> {
    let lo = knots[degree];
    let hi = knots[m];
    let x = x.clamp(lo, hi);
    let nk = knots.len();
    let mut b = vec![0.0f64; nk - 1];
    let mut placed = false;
    for i in 0..nk - 1 {
        let closes_range = i == m - 1;
        if (x >= knots[i] && x < knots[i + 1])
            || (closes_range && x >= knots[i] && x <= knots[i + 1])
        {
            b[i] = 1.0;
            placed = true;
            break;
        }
    }
    if !placed {
        // degenerate constant covariate: every interval is empty
        b[degree] = 1.0;
    }
    for k in 1..=degree {
        for i in 0..nk - 1 - k {
            let d1 = knots[i + k] - knots[i];
            let d2 = knots[i + k + 1] - knots[i + 1];
            let left = if d1 > 0.0 {
                (x - knots[i]) / d1 * b[i]
            } else {
                0.0
            };
            let right = if d2 > 0.0 {
                (knots[i + k + 1] - x) / d2 * b[i + 1]
            } else {
                0.0
            };
            b[i] = left + right;
        }
    }
    b.truncate(m);
    b
}
