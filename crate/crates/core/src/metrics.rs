//! Structure-recovery metrics: SHD, SID, and the topological order
//! divergence D_top.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{Dag, TopoOrder};

/// Metric bundle for one (true graph, estimate) comparison. `d_top` is only
/// meaningful for order-based methods and is omitted when no order is given.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MetricReport {
    pub shd: usize,
    pub sid: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub d_top: Option<usize>,
}

/// Structural Hamming distance over unordered pairs: one unit per missing or
/// extra edge, one unit per reversed edge.
pub fn shd(true_g: &Dag, est_g: &Dag) -> Result<usize> {
    check_same_d(true_g, est_g)?;
    let d = true_g.d();
    let mut count = 0;
    for i in 0..d {
        for j in (i + 1)..d {
            let t = (true_g.has_edge(i, j), true_g.has_edge(j, i));
            let e = (est_g.has_edge(i, j), est_g.has_edge(j, i));
            let t_any = t.0 || t.1;
            let e_any = e.0 || e.1;
            if t_any != e_any || (t_any && e_any && t != e) {
                count += 1;
            }
        }
    }
    Ok(count)
}

/// Number of true edges pointing backwards under `order`; the part of the
/// graph no pruning step can recover, hence a lower bound on the achievable
/// SHD for that order.
pub fn d_top(order: &TopoOrder, true_g: &Dag) -> Result<usize> {
    if order.len() != true_g.d() {
        return Err(Error::DimensionMismatch {
            context: "d_top order length",
            expected: true_g.d(),
            actual: order.len(),
        });
    }
    let pos = order.positions();
    Ok(true_g
        .edges()
        .into_iter()
        .filter(|&(i, j)| pos[i] > pos[j])
        .count())
}

/// Structural intervention distance: the number of ordered pairs (i, j) whose
/// interventional distribution p(x_j | do(x_i)) would be miscalculated by
/// parent adjustment in the estimated graph.
///
/// For each pair the adjustment set is `pa_est(i)`. The set is valid in the
/// true graph iff either `j` is in the set and `j` is not a descendant of `i`
/// (adjusting on `j` yields the marginal, which is correct exactly when `i`
/// has no effect on `j`), or `j` is outside the set, the set avoids the
/// forbidden nodes (descendants of nodes on causal `i → … → j` paths), and it
/// d-separates `i` from `j` once the first edge of every such causal path is
/// cut.
pub fn sid(true_g: &Dag, est_g: &Dag) -> Result<usize> {
    check_same_d(true_g, est_g)?;
    let d = true_g.d();
    // desc[w][v]: v is reachable from w by a directed path (v = w included).
    let desc: Vec<Vec<bool>> = (0..d).map(|w| descendants(true_g, w)).collect();

    let mut mistakes = 0;
    for i in 0..d {
        let mut z = vec![false; d];
        for p in est_g.parents(i) {
            z[p] = true;
        }
        for j in 0..d {
            if j == i {
                continue;
            }
            if z[j] {
                if desc[i][j] {
                    mistakes += 1;
                }
                continue;
            }
            // Nodes (other than i) on directed i → … → j paths.
            let mut causal = vec![false; d];
            for w in 0..d {
                if w != i && desc[i][w] && desc[w][j] {
                    causal[w] = true;
                }
            }
            let mut forbidden = vec![false; d];
            for w in 0..d {
                if causal[w] {
                    for v in 0..d {
                        forbidden[v] |= desc[w][v];
                    }
                }
            }
            if (0..d).any(|v| z[v] && forbidden[v]) {
                mistakes += 1;
                continue;
            }
            if d_connected_without_causal_front(true_g, i, j, &z, &causal) {
                mistakes += 1;
            }
        }
    }
    Ok(mistakes)
}

fn check_same_d(a: &Dag, b: &Dag) -> Result<()> {
    if a.d() != b.d() {
        return Err(Error::DimensionMismatch {
            context: "graph comparison",
            expected: a.d(),
            actual: b.d(),
        });
    }
    Ok(())
}

pub(crate) fn descendants(g: &Dag, w: usize) -> Vec<bool> {
    let mut seen = vec![false; g.d()];
    let mut stack = vec![w];
    while let Some(v) = stack.pop() {
        if std::mem::replace(&mut seen[v], true) {
            continue;
        }
        stack.extend(g.children(v));
    }
    seen
}

/// d-connection test between `x` and `y` given `z` in the true graph with the
/// edges `x → c` removed for every causal-front child `c` (`causal[c]`).
///
/// Walk states carry how the current node was entered: via an edge pointing
/// into it, or via an edge pointing out of it (traversed backwards). Collider
/// segments open only when the collider is an ancestor of (or in) `z`.
fn d_connected_without_causal_front(
    g: &Dag,
    x: usize,
    y: usize,
    z: &[bool],
    causal: &[bool],
) -> bool {
    let d = g.d();
    let keep = |i: usize, j: usize| !(i == x && causal[j]);
    let mut parents: Vec<Vec<usize>> = vec![Vec::new(); d];
    let mut children: Vec<Vec<usize>> = vec![Vec::new(); d];
    for (i, j) in g.edges() {
        if keep(i, j) {
            children[i].push(j);
            parents[j].push(i);
        }
    }

    // Ancestors of z (z included) in the cut graph, for collider opening.
    let mut anc_z = z.to_vec();
    let mut stack: Vec<usize> = (0..d).filter(|&v| z[v]).collect();
    while let Some(v) = stack.pop() {
        for &p in &parents[v] {
            if !std::mem::replace(&mut anc_z[p], true) {
                stack.push(p);
            }
        }
    }

    const INTO: usize = 0;
    const OUT: usize = 1;
    let mut visited = vec![[false; 2]; d];
    let mut queue: Vec<(usize, usize)> = Vec::new();
    for &c in &children[x] {
        queue.push((c, INTO));
    }
    for &p in &parents[x] {
        queue.push((p, OUT));
    }
    while let Some((w, how)) = queue.pop() {
        if visited[w][how] {
            continue;
        }
        visited[w][how] = true;
        if w == y {
            return true;
        }
        // Continue to children (edge w → c, arriving "into" c): w acts as a
        // non-collider, so w must be outside z.
        if !z[w] {
            for &c in &children[w] {
                queue.push((c, INTO));
            }
        }
        // Continue to parents (edge p → w traversed backwards): if we arrived
        // into w this makes w a collider, open only when w is in/above z.
        let open_up = match how {
            INTO => anc_z[w],
            _ => !z[w],
        };
        if open_up {
            for &p in &parents[w] {
                queue.push((p, OUT));
            }
        }
    }
    false
}
