//! Test-only oracles, independent of the library's implementation paths.

// not every test binary uses every oracle
#![allow(dead_code)]

use score_dag_core::Dag;

/// Brute-force SID: for every ordered pair, validate `pa_est(i)` as an
/// adjustment set in the true graph by enumerating all simple paths and
/// applying the d-separation blocking rules directly.
pub fn sid_brute_force(true_g: &Dag, est_g: &Dag) -> usize {
    let d = true_g.d();
    let mut mistakes = 0;
    for i in 0..d {
        let z = est_g.parents(i);
        for j in 0..d {
            if j != i && !adjustment_valid(true_g, i, j, &z) {
                mistakes += 1;
            }
        }
    }
    mistakes
}

fn adjustment_valid(g: &Dag, i: usize, j: usize, z: &[usize]) -> bool {
    if z.contains(&j) {
        // adjusting on j itself reproduces the marginal of j, which is the
        // interventional distribution exactly when i has no effect on j
        return !descendants(g, i).contains(&j);
    }
    // forbidden set: descendants of any node (other than i) lying on a
    // directed i -> ... -> j path
    let mut forbidden = Vec::new();
    for path in all_simple_paths(g, i, j) {
        if path_is_causal(g, &path) {
            for &w in &path[1..] {
                forbidden.extend(descendants(g, w));
            }
        }
    }
    if z.iter().any(|v| forbidden.contains(v)) {
        return false;
    }
    // every non-causal path must be blocked by z
    for path in all_simple_paths(g, i, j) {
        if !path_is_causal(g, &path) && !path_blocked(g, &path, z) {
            return false;
        }
    }
    true
}

fn descendants(g: &Dag, w: usize) -> Vec<usize> {
    let mut out = vec![w];
    let mut cursor = 0;
    while cursor < out.len() {
        let v = out[cursor];
        cursor += 1;
        for c in g.children(v) {
            if !out.contains(&c) {
                out.push(c);
            }
        }
    }
    out
}

/// All simple paths between `from` and `to` in the skeleton.
fn all_simple_paths(g: &Dag, from: usize, to: usize) -> Vec<Vec<usize>> {
    let mut paths = Vec::new();
    let mut current = vec![from];
    extend_paths(g, to, &mut current, &mut paths);
    paths
}

fn extend_paths(g: &Dag, to: usize, current: &mut Vec<usize>, paths: &mut Vec<Vec<usize>>) {
    let last = *current.last().unwrap();
    if last == to {
        paths.push(current.clone());
        return;
    }
    for next in 0..g.d() {
        let adjacent = g.has_edge(last, next) || g.has_edge(next, last);
        if adjacent && !current.contains(&next) {
            current.push(next);
            extend_paths(g, to, current, paths);
            current.pop();
        }
    }
}

fn path_is_causal(g: &Dag, path: &[usize]) -> bool {
    path.windows(2).all(|w| g.has_edge(w[0], w[1]))
}

fn path_blocked(g: &Dag, path: &[usize], z: &[usize]) -> bool {
    for t in 1..path.len() - 1 {
        let (prev, v, next) = (path[t - 1], path[t], path[t + 1]);
        let collider = g.has_edge(prev, v) && g.has_edge(next, v);
        if collider {
            let opened = descendants(g, v).iter().any(|w| z.contains(w));
            if !opened {
                return true;
            }
        } else if z.contains(&v) {
            return true;
        }
    }
    false
}

/// `exp(−‖a−b‖²/(2s²))`, the reference kernel for the finite-difference
/// oracle below.
pub fn rbf(a: &[f64], b: &[f64], s: f64) -> f64 {
    let sq: f64 = a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum();
    (-sq / (2.0 * s * s)).exp()
}

/// Central finite differences of `y ↦ Σ_k κ(x^i, y)` evaluated at the sample
/// points: the independent check for the kernel-derivative aggregates.
/// Returns (gradient sums, second-derivative sums).
pub fn kernel_fd_sums(
    x: &score_dag_core::DataMatrix,
    s: f64,
) -> (nalgebra::DMatrix<f64>, nalgebra::DMatrix<f64>) {
    let (n, d) = (x.n(), x.d());
    let rows: Vec<Vec<f64>> = (0..n)
        .map(|i| x.values().row(i).iter().copied().collect())
        .collect();
    let hg = 1e-5;
    let hh = 1e-4;
    let mut fd_g = nalgebra::DMatrix::zeros(n, d);
    let mut fd_h = nalgebra::DMatrix::zeros(n, d);
    for i in 0..n {
        for j in 0..d {
            let mut sum_g = 0.0;
            let mut sum_h = 0.0;
            for k in 0..n {
                let mut plus = rows[k].clone();
                let mut minus = rows[k].clone();
                plus[j] += hg;
                minus[j] -= hg;
                sum_g += (rbf(&rows[i], &plus, s) - rbf(&rows[i], &minus, s)) / (2.0 * hg);
                let mut plus = rows[k].clone();
                let mut minus = rows[k].clone();
                plus[j] += hh;
                minus[j] -= hh;
                sum_h += (rbf(&rows[i], &plus, s) - 2.0 * rbf(&rows[i], &rows[k], s)
                    + rbf(&rows[i], &minus, s))
                    / (hh * hh);
            }
            fd_g[(i, j)] = sum_g;
            fd_h[(i, j)] = sum_h;
        }
    }
    (fd_g, fd_h)
}

/// All labelled DAGs on `d` nodes, enumerated by assigning each unordered
/// pair one of {none, forward, backward} and keeping the acyclic ones.
pub fn enumerate_dags(d: usize) -> Vec<Dag> {
    let pairs: Vec<(usize, usize)> = (0..d)
        .flat_map(|i| ((i + 1)..d).map(move |j| (i, j)))
        .collect();
    let mut out = Vec::new();
    let total = 3usize.pow(pairs.len() as u32);
    for code in 0..total {
        let mut c = code;
        let mut edges = Vec::new();
        for &(i, j) in &pairs {
            match c % 3 {
                1 => edges.push((i, j)),
                2 => edges.push((j, i)),
                _ => {}
            }
            c /= 3;
        }
        if let Ok(g) = Dag::from_edges(d, &edges) {
            out.push(g);
        }
    }
    out
}
