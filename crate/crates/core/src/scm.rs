//! Synthetic structural-causal-model generation and the analytic score
//! oracle used to validate the Stein estimators.
//!
//! Data follows the additive-noise form `X_i = f_i(pa_i(X)) + ε_i`. Link
//! functions are either joint Gaussian-process draws over the observed parent
//! rows (the benchmark default) or closed-form nonlinearities with analytic
//! derivatives (the testable oracle family). Root nodes are pure noise.

use nalgebra::{Cholesky, DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Gumbel, Normal, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::data::DataMatrix;
use crate::error::{Error, Result};
use crate::graph::{topological_sort, Dag, GraphKind};
use crate::kernel;

const EULER_MASCHERONI: f64 = 0.577_215_664_901_532_9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NoiseFamily {
    Gaussian,
    Laplace,
    Gumbel,
}

impl std::str::FromStr for NoiseFamily {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "gaussian" => Ok(NoiseFamily::Gaussian),
            "laplace" => Ok(NoiseFamily::Laplace),
            "gumbel" => Ok(NoiseFamily::Gumbel),
            other => Err(Error::InvalidConfig(format!(
                "unknown noise family {other:?} (expected gaussian|laplace|gumbel)"
            ))),
        }
    }
}

impl std::fmt::Display for NoiseFamily {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            NoiseFamily::Gaussian => "gaussian",
            NoiseFamily::Laplace => "laplace",
            NoiseFamily::Gumbel => "gumbel",
        };
        f.write_str(s)
    }
}

/// Per-node noise: a family plus the variance the draw must realise. The
/// Laplace scale is `σ/√2` and the Gumbel scale `σ·√6/π` (centred to mean
/// zero), so changing the family changes only the shape.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseSpec {
    pub family: NoiseFamily,
    pub variance: f64,
}

impl NoiseSpec {
    fn sample(&self, n: usize, rng: &mut ChaCha8Rng) -> DVector<f64> {
        let sigma = self.variance.sqrt();
        match self.family {
            NoiseFamily::Gaussian => {
                let dist = Normal::new(0.0, sigma).expect("positive sigma");
                DVector::from_fn(n, |_, _| dist.sample(rng))
            }
            NoiseFamily::Laplace => {
                let b = sigma / std::f64::consts::SQRT_2;
                DVector::from_fn(n, |_, _| {
                    let u: f64 = rng.gen::<f64>() - 0.5;
                    let t = (1.0 - 2.0 * u.abs()).max(f64::MIN_POSITIVE);
                    -b * u.signum() * t.ln()
                })
            }
            NoiseFamily::Gumbel => {
                let beta = sigma * 6.0f64.sqrt() / std::f64::consts::PI;
                let mu = -beta * EULER_MASCHERONI;
                let dist = Gumbel::new(mu, beta).expect("positive beta");
                DVector::from_fn(n, |_, _| dist.sample(rng))
            }
        }
    }

    /// `(log p^ε)'(r)`. The Laplace score is undefined at an exactly zero
    /// residual; such residuals are nudged by one machine epsilon.
    fn score(&self, r: f64) -> f64 {
        let sigma = self.variance.sqrt();
        match self.family {
            NoiseFamily::Gaussian => -r / self.variance,
            NoiseFamily::Laplace => {
                let b = sigma / std::f64::consts::SQRT_2;
                let r = if r == 0.0 { f64::EPSILON } else { r };
                -r.signum() / b
            }
            NoiseFamily::Gumbel => {
                let beta = sigma * 6.0f64.sqrt() / std::f64::consts::PI;
                let mu = -beta * EULER_MASCHERONI;
                let z = (r - mu) / beta;
                ((-z).exp() - 1.0) / beta
            }
        }
    }

    /// `(log p^ε)''(r)`; only defined for families with a smooth density.
    fn score_deriv(&self, r: f64) -> f64 {
        match self.family {
            NoiseFamily::Gaussian => -1.0 / self.variance,
            NoiseFamily::Laplace => 0.0,
            NoiseFamily::Gumbel => {
                let sigma = self.variance.sqrt();
                let beta = sigma * 6.0f64.sqrt() / std::f64::consts::PI;
                let mu = -beta * EULER_MASCHERONI;
                let z = (r - mu) / beta;
                -(-z).exp() / (beta * beta)
            }
        }
    }
}

/// One parent's contribution to a parametric link:
/// `sin_amp·sin(sin_freq·x) + tanh_amp·tanh(tanh_scale·x)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinkTerm {
    pub parent: usize,
    pub sin_amp: f64,
    pub sin_freq: f64,
    pub tanh_amp: f64,
    pub tanh_scale: f64,
}

impl LinkTerm {
    /// Pure sine term, handy for hand-built test models.
    pub fn sine(parent: usize, amp: f64, freq: f64) -> Self {
        Self {
            parent,
            sin_amp: amp,
            sin_freq: freq,
            tanh_amp: 0.0,
            tanh_scale: 1.0,
        }
    }

    pub fn eval(&self, x: f64) -> f64 {
        self.sin_amp * (self.sin_freq * x).sin() + self.tanh_amp * (self.tanh_scale * x).tanh()
    }

    pub fn deriv(&self, x: f64) -> f64 {
        let t = (self.tanh_scale * x).tanh();
        self.sin_amp * self.sin_freq * (self.sin_freq * x).cos()
            + self.tanh_amp * self.tanh_scale * (1.0 - t * t)
    }

    pub fn second_deriv(&self, x: f64) -> f64 {
        let t = (self.tanh_scale * x).tanh();
        -self.sin_amp * self.sin_freq * self.sin_freq * (self.sin_freq * x).sin()
            - 2.0 * self.tanh_amp * self.tanh_scale * self.tanh_scale * t * (1.0 - t * t)
    }

    fn is_nonlinear(&self) -> bool {
        (self.sin_amp != 0.0 && self.sin_freq != 0.0)
            || (self.tanh_amp != 0.0 && self.tanh_scale != 0.0)
    }
}

/// How link values are produced. GP link values are never serialised; the
/// model seed reproduces them through [`sample_dataset`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum LinkSpec {
    Gp { bandwidth: f64, base_jitter: f64 },
    Parametric { terms: Vec<Vec<LinkTerm>> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScmModel {
    pub graph: Dag,
    pub links: LinkSpec,
    pub noise: Vec<NoiseSpec>,
    /// Seed the model was drawn with; echoed in the model file so a dataset
    /// can be regenerated from the file alone.
    pub seed: u64,
}

impl ScmModel {
    pub fn validate(&self) -> Result<()> {
        let d = self.graph.d();
        if self.noise.len() != d {
            return Err(Error::DimensionMismatch {
                context: "noise specs",
                expected: d,
                actual: self.noise.len(),
            });
        }
        for (i, spec) in self.noise.iter().enumerate() {
            if spec.variance <= 0.0 || !spec.variance.is_finite() {
                return Err(Error::InvalidConfig(format!(
                    "noise variance of node {i} must be positive (got {})",
                    spec.variance
                )));
            }
        }
        match &self.links {
            LinkSpec::Gp {
                bandwidth,
                base_jitter,
            } => {
                if *bandwidth <= 0.0 || !bandwidth.is_finite() || *base_jitter <= 0.0 || !base_jitter.is_finite() {
                    return Err(Error::InvalidConfig(
                        "GP bandwidth and jitter must be positive".into(),
                    ));
                }
            }
            LinkSpec::Parametric { terms } => {
                if terms.len() != d {
                    return Err(Error::DimensionMismatch {
                        context: "parametric link terms",
                        expected: d,
                        actual: terms.len(),
                    });
                }
                for (i, node_terms) in terms.iter().enumerate() {
                    let mut parents: Vec<usize> =
                        node_terms.iter().map(|t| t.parent).collect();
                    parents.sort_unstable();
                    if parents != self.graph.parents(i) {
                        return Err(Error::InvalidConfig(format!(
                            "link terms of node {i} do not match its parent set"
                        )));
                    }
                    for t in node_terms {
                        if !t.is_nonlinear() {
                            return Err(Error::InvalidConfig(format!(
                                "link term for parent {} of node {i} is not non-linear",
                                t.parent
                            )));
                        }
                    }
                }
            }
        }
        Ok(())
    }

    /// Restriction to an ancestrally closed node subset (every parent of a
    /// kept node is kept), reindexed to the order of `nodes`. Valid because
    /// stripping descendants leaves the joint of the survivors untouched.
    pub fn restrict(&self, nodes: &[usize]) -> Result<ScmModel> {
        let mut new_index = vec![usize::MAX; self.graph.d()];
        for (new, &old) in nodes.iter().enumerate() {
            new_index[old] = new;
        }
        for &old in nodes {
            for p in self.graph.parents(old) {
                if new_index[p] == usize::MAX {
                    return Err(Error::InvalidConfig(format!(
                        "restriction is not ancestrally closed: kept node {old} has dropped parent {p}"
                    )));
                }
            }
        }
        let graph = self.graph.induced_subgraph(nodes)?;
        let links = match &self.links {
            LinkSpec::Gp { .. } => self.links.clone(),
            LinkSpec::Parametric { terms } => LinkSpec::Parametric {
                terms: nodes
                    .iter()
                    .map(|&old| {
                        terms[old]
                            .iter()
                            .map(|t| LinkTerm {
                                parent: new_index[t.parent],
                                ..*t
                            })
                            .collect()
                    })
                    .collect(),
            },
        };
        Ok(ScmModel {
            graph,
            links,
            noise: nodes.iter().map(|&old| self.noise[old]).collect(),
            seed: self.seed,
        })
    }

    pub fn read_json_path<P: AsRef<std::path::Path>>(path: P) -> Result<ScmModel> {
        let text = std::fs::read_to_string(path)?;
        let model: ScmModel = serde_json::from_str(&text).map_err(|e| Error::Parse {
            line: e.line(),
            message: e.to_string(),
        })?;
        model.validate()?;
        Ok(model)
    }

    pub fn write_json_path<P: AsRef<std::path::Path>>(&self, path: P) -> Result<()> {
        let text = serde_json::to_string_pretty(self).expect("model serialization");
        std::fs::write(path, text + "\n")?;
        Ok(())
    }
}

/// Benchmark model: GP links with unit bandwidth, noise variances drawn
/// uniformly from [0.4, 0.8].
pub fn gp_model(graph: Dag, family: NoiseFamily, seed: u64) -> ScmModel {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let noise = draw_noise_specs(graph.d(), family, &mut rng);
    ScmModel {
        graph,
        links: LinkSpec::Gp {
            bandwidth: 1.0,
            base_jitter: 1e-6,
        },
        noise,
        seed,
    }
}

/// Oracle model: per-parent `a·sin(b·x) + c·tanh(e·x)` links with magnitudes
/// drawn from [0.5, 2] and random signs on the amplitudes; noise variances
/// from [0.4, 0.8].
pub fn random_parametric_model(graph: Dag, family: NoiseFamily, seed: u64) -> ScmModel {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let noise = draw_noise_specs(graph.d(), family, &mut rng);
    let mut terms = Vec::with_capacity(graph.d());
    for i in 0..graph.d() {
        let mut node_terms = Vec::new();
        for p in graph.parents(i) {
            let sin_sign = if rng.gen::<bool>() { 1.0 } else { -1.0 };
            let sin_amp = sin_sign * (rng.gen::<f64>() * 1.5 + 0.5);
            let sin_freq = rng.gen::<f64>() * 1.5 + 0.5;
            let tanh_sign = if rng.gen::<bool>() { 1.0 } else { -1.0 };
            let tanh_amp = tanh_sign * (rng.gen::<f64>() * 1.5 + 0.5);
            let tanh_scale = rng.gen::<f64>() * 1.5 + 0.5;
            node_terms.push(LinkTerm {
                parent: p,
                sin_amp,
                sin_freq,
                tanh_amp,
                tanh_scale,
            });
        }
        terms.push(node_terms);
    }
    ScmModel {
        graph,
        links: LinkSpec::Parametric { terms },
        noise,
        seed,
    }
}

fn draw_noise_specs(d: usize, family: NoiseFamily, rng: &mut ChaCha8Rng) -> Vec<NoiseSpec> {
    (0..d)
        .map(|_| NoiseSpec {
            family,
            variance: rng.gen::<f64>() * 0.4 + 0.4,
        })
        .collect()
}

/// Draws `n` samples from the model. Nodes are processed in topological
/// order; GP link values for a node are one joint multivariate-normal draw
/// with covariance `K_rbf(parent rows) + jitter·I`.
pub fn sample_dataset(model: &ScmModel, n: usize, seed: u64) -> Result<DataMatrix> {
    model.validate()?;
    if n == 0 {
        return Err(Error::InvalidConfig("sample count must be positive".into()));
    }
    let order = topological_sort(&model.graph)?;
    let d = model.graph.d();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut values = DMatrix::<f64>::zeros(n, d);
    for &node in order.as_slice() {
        let parents = model.graph.parents(node);
        let link = if parents.is_empty() {
            DVector::zeros(n)
        } else {
            match &model.links {
                LinkSpec::Parametric { terms } => DVector::from_fn(n, |k, _| {
                    terms[node]
                        .iter()
                        .map(|t| t.eval(values[(k, t.parent)]))
                        .sum()
                }),
                LinkSpec::Gp {
                    bandwidth,
                    base_jitter,
                } => {
                    let sub = DMatrix::from_fn(n, parents.len(), |k, a| values[(k, parents[a])]);
                    gp_draw(&sub, *bandwidth, *base_jitter, &mut rng, node)?
                }
            }
        };
        let noise = model.noise[node].sample(n, &mut rng);
        for k in 0..n {
            values[(k, node)] = link[k] + noise[k];
        }
    }
    DataMatrix::new(values)
}

fn gp_draw(
    parent_cols: &DMatrix<f64>,
    bandwidth: f64,
    base_jitter: f64,
    rng: &mut ChaCha8Rng,
    node: usize,
) -> Result<DVector<f64>> {
    let n = parent_cols.nrows();
    let sub = DataMatrix::new(parent_cols.clone())?;
    let k = kernel::gram(&sub, bandwidth)?;
    // The draw is consumed before any factorisation retry, so jitter
    // escalation does not disturb the stream.
    let z = DVector::from_fn(n, |_, _| StandardNormal.sample(rng));
    let diag_mean = k.diagonal().mean();
    let max_jitter = 1e-2 * diag_mean;
    let mut jitter = base_jitter * diag_mean;
    loop {
        let mut a = k.clone();
        for i in 0..n {
            a[(i, i)] += jitter;
        }
        if let Some(chol) = Cholesky::new(a) {
            return Ok(chol.l() * &z);
        }
        jitter *= 10.0;
        if jitter > max_jitter * (1.0 + 1e-9) {
            return Err(Error::Numerical(format!(
                "GP covariance factorisation failed for node {node} even at jitter {max_jitter:e}"
            )));
        }
    }
}

/// Residuals `r_i = x_i − f_i(pa_i(x))` for a parametric model.
fn residual_matrix(model: &ScmModel, x: &DataMatrix) -> Result<DMatrix<f64>> {
    let terms = match &model.links {
        LinkSpec::Parametric { terms } => terms,
        LinkSpec::Gp { .. } => {
            return Err(Error::InvalidConfig(
                "analytic score requires parametric links (GP links have no reusable functional form)"
                    .into(),
            ))
        }
    };
    let d = model.graph.d();
    if x.d() != d {
        return Err(Error::DimensionMismatch {
            context: "analytic score data",
            expected: d,
            actual: x.d(),
        });
    }
    let v = x.values();
    Ok(DMatrix::from_fn(x.n(), d, |k, i| {
        v[(k, i)]
            - terms[i]
                .iter()
                .map(|t| t.eval(v[(k, t.parent)]))
                .sum::<f64>()
    }))
}

/// Closed-form score of the model at each sample:
/// `s_j(x) = ℓ_j'(r_j) − Σ_{c ∈ children(j)} ∂f_c/∂x_j · ℓ_c'(r_c)`
/// with `ℓ_i` the log-density of node `i`'s noise.
pub fn analytic_score(model: &ScmModel, x: &DataMatrix) -> Result<DMatrix<f64>> {
    model.validate()?;
    let r = residual_matrix(model, x)?;
    let terms = parametric_terms(model);
    let v = x.values();
    let d = model.graph.d();
    let mut out = DMatrix::zeros(x.n(), d);
    for j in 0..d {
        let children = model.graph.children(j);
        for k in 0..x.n() {
            let mut s = model.noise[j].score(r[(k, j)]);
            for &c in &children {
                let t = term_for(terms, c, j);
                s -= t.deriv(v[(k, j)]) * model.noise[c].score(r[(k, c)]);
            }
            out[(k, j)] = s;
        }
    }
    Ok(out)
}

/// Analytic `∂s_j/∂x_i` at every sample; requires Gaussian noise (the only
/// family whose noise score has a smooth derivative everywhere).
pub fn analytic_score_partial(
    model: &ScmModel,
    x: &DataMatrix,
    j: usize,
    i: usize,
) -> Result<DVector<f64>> {
    model.validate()?;
    require_gaussian(model)?;
    let r = residual_matrix(model, x)?;
    let terms = parametric_terms(model);
    let v = x.values();
    let parents_j = model.graph.parents(j);
    let children_j = model.graph.children(j);
    let mut out = DVector::zeros(x.n());
    for k in 0..x.n() {
        // ∂r_j/∂x_i
        let dr_j = indicator(i == j)
            - if parents_j.contains(&i) {
                term_for(terms, j, i).deriv(v[(k, i)])
            } else {
                0.0
            };
        let mut val = model.noise[j].score_deriv(r[(k, j)]) * dr_j;
        for &c in &children_j {
            let t_cj = term_for(terms, c, j);
            if i == j {
                val -= t_cj.second_deriv(v[(k, j)]) * model.noise[c].score(r[(k, c)]);
            }
            let dr_c = indicator(c == i)
                - if model.graph.parents(c).contains(&i) {
                    term_for(terms, c, i).deriv(v[(k, i)])
                } else {
                    0.0
                };
            val -= t_cj.deriv(v[(k, j)]) * model.noise[c].score_deriv(r[(k, c)]) * dr_c;
        }
        out[k] = val;
    }
    Ok(out)
}

/// Analytic diagonal of the score Jacobian, `(k, j) ↦ ∂s_j/∂x_j` at `x^k`.
/// For a leaf `j` the column is the constant `−1/σ_j²`.
pub fn analytic_jacobian_diag(model: &ScmModel, x: &DataMatrix) -> Result<DMatrix<f64>> {
    model.validate()?;
    require_gaussian(model)?;
    let d = model.graph.d();
    let mut out = DMatrix::zeros(x.n(), d);
    for j in 0..d {
        let col = analytic_score_partial(model, x, j, j)?;
        out.set_column(j, &col);
    }
    Ok(out)
}

fn parametric_terms(model: &ScmModel) -> &[Vec<LinkTerm>] {
    match &model.links {
        LinkSpec::Parametric { terms } => terms,
        LinkSpec::Gp { .. } => unreachable!("checked by residual_matrix/require_gaussian callers"),
    }
}

fn term_for(terms: &[Vec<LinkTerm>], node: usize, parent: usize) -> &LinkTerm {
    terms[node]
        .iter()
        .find(|t| t.parent == parent)
        .expect("validated term set")
}

fn require_gaussian(model: &ScmModel) -> Result<()> {
    if let LinkSpec::Gp { .. } = model.links {
        return Err(Error::InvalidConfig(
            "analytic Jacobian requires parametric links".into(),
        ));
    }
    if model
        .noise
        .iter()
        .any(|s| s.family != NoiseFamily::Gaussian)
    {
        return Err(Error::InvalidConfig(
            "analytic Jacobian requires Gaussian noise".into(),
        ));
    }
    Ok(())
}

fn indicator(b: bool) -> f64 {
    if b {
        1.0
    } else {
        0.0
    }
}

/// Configuration of one benchmark batch: `runs` independent
/// (model, dataset, truth) triples with per-run derived seeds.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct BenchmarkConfig {
    pub d: usize,
    pub graph: GraphKind,
    pub noise: NoiseFamily,
    pub n: usize,
    pub runs: usize,
    pub seed: u64,
}

#[derive(Debug, Clone)]
pub struct BenchmarkInstance {
    pub model: ScmModel,
    pub data: DataMatrix,
    pub truth: Dag,
}

/// Samples a graph, draws a GP-linked model on it, and generates a dataset,
/// all from sub-seeds of `seed`.
pub fn generate_instance(
    d: usize,
    graph: GraphKind,
    noise: NoiseFamily,
    n: usize,
    seed: u64,
) -> Result<BenchmarkInstance> {
    let truth = graph.sample(d, derive_seed(seed, 1))?;
    let model = gp_model(truth.clone(), noise, derive_seed(seed, 2));
    let data = sample_dataset(&model, n, derive_seed(seed, 3))?;
    Ok(BenchmarkInstance { model, data, truth })
}

/// Generates one instance for run index `run` of the config.
pub fn benchmark_instance(cfg: &BenchmarkConfig, run: usize) -> Result<BenchmarkInstance> {
    generate_instance(
        cfg.d,
        cfg.graph,
        cfg.noise,
        cfg.n,
        derive_seed(cfg.seed, run as u64),
    )
}

/// All `runs` instances of the config, in run order.
pub fn benchmark_suite(cfg: &BenchmarkConfig) -> Result<Vec<BenchmarkInstance>> {
    (0..cfg.runs).map(|r| benchmark_instance(cfg, r)).collect()
}

/// Stable seed derivation (splitmix64 over a mixed key), used for per-run
/// seeds so parallel benchmark runs stay reproducible.
pub fn derive_seed(seed: u64, k: u64) -> u64 {
    let mut z = seed ^ k.wrapping_mul(0x9E37_79B9_7F4A_7C15).wrapping_add(0xD1B5_4A32_D192_ED03);
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn gaussian_spec(variance: f64) -> NoiseSpec {
        NoiseSpec {
            family: NoiseFamily::Gaussian,
            variance,
        }
    }

    fn chain_sine_model(variances: &[f64]) -> ScmModel {
        // x_{i+1} = sin(2 x_i) + eps
        let d = variances.len();
        let edges: Vec<(usize, usize)> = (0..d - 1).map(|i| (i, i + 1)).collect();
        let graph = Dag::from_edges(d, &edges).unwrap();
        let terms = (0..d)
            .map(|i| {
                if i == 0 {
                    vec![]
                } else {
                    vec![LinkTerm::sine(i - 1, 1.0, 2.0)]
                }
            })
            .collect();
        ScmModel {
            graph,
            links: LinkSpec::Parametric { terms },
            noise: variances.iter().map(|&v| gaussian_spec(v)).collect(),
            seed: 0,
        }
    }

    #[test]
    fn no_edge_model_has_marginal_noise_variance() {
        let model = ScmModel {
            graph: Dag::empty(3).unwrap(),
            links: LinkSpec::Parametric {
                terms: vec![vec![]; 3],
            },
            noise: vec![gaussian_spec(0.5); 3],
            seed: 0,
        };
        let x = sample_dataset(&model, 5000, 11).unwrap();
        let se = 0.5 * (2.0 / 4999.0f64).sqrt();
        for j in 0..3 {
            let v = x.column_variance(j);
            assert!((v - 0.5).abs() < 3.0 * se, "column {j} variance {v}");
        }
    }

    #[test]
    fn non_gaussian_noise_realises_requested_variance() {
        for family in [NoiseFamily::Laplace, NoiseFamily::Gumbel] {
            let model = ScmModel {
                graph: Dag::empty(1).unwrap(),
                links: LinkSpec::Parametric { terms: vec![vec![]] },
                noise: vec![NoiseSpec {
                    family,
                    variance: 0.6,
                }],
                seed: 0,
            };
            let x = sample_dataset(&model, 20000, 5).unwrap();
            let v = x.column_variance(0);
            let mean = x.column(0).mean();
            assert!((v - 0.6).abs() < 0.05, "{family} variance {v}");
            assert!(mean.abs() < 0.03, "{family} mean {mean}");
        }
    }

    #[test]
    fn chain_residual_variance() {
        let model = chain_sine_model(&[0.6, 0.4]);
        let x = sample_dataset(&model, 5000, 3).unwrap();
        let v = x.values();
        let resid: Vec<f64> = (0..x.n())
            .map(|k| v[(k, 1)] - (2.0 * v[(k, 0)]).sin())
            .collect();
        let var = crate::data::column_variance(resid.into_iter(), x.n());
        let se = 0.4 * (2.0 / 4999.0f64).sqrt();
        assert!((var - 0.4).abs() < 3.0 * se, "residual variance {var}");
    }

    #[test]
    fn single_sample_is_finite() {
        let model = chain_sine_model(&[0.5, 0.5, 0.5]);
        let x = sample_dataset(&model, 1, 1).unwrap();
        assert_eq!((x.n(), x.d()), (1, 3));
    }

    #[test]
    fn sampling_is_deterministic() {
        let g = crate::graph::sample_er_dag(6, 6, 2).unwrap();
        let model = gp_model(g, NoiseFamily::Gaussian, 9);
        let a = sample_dataset(&model, 200, 42).unwrap();
        let b = sample_dataset(&model, 200, 42).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn score_of_single_standard_normal_node() {
        let model = ScmModel {
            graph: Dag::empty(1).unwrap(),
            links: LinkSpec::Parametric { terms: vec![vec![]] },
            noise: vec![gaussian_spec(1.0)],
            seed: 0,
        };
        let x = DataMatrix::from_rows(&[vec![2.0]]).unwrap();
        let s = analytic_score(&model, &x).unwrap();
        assert_eq!(s[(0, 0)], -2.0);
    }

    #[test]
    fn score_of_sine_chain_closed_form() {
        let model = chain_sine_model(&[1.0, 1.0]);
        let x = DataMatrix::from_rows(&[vec![0.7, -0.3], vec![-1.2, 2.0]]).unwrap();
        let s = analytic_score(&model, &x).unwrap();
        for k in 0..2 {
            let (x0, x1) = (x.values()[(k, 0)], x.values()[(k, 1)]);
            let r1 = x1 - (2.0 * x0).sin();
            let s0 = -x0 + 2.0 * (2.0 * x0).cos() * r1;
            let s1 = -r1;
            assert_relative_eq!(s[(k, 0)], s0, max_relative = 1e-14);
            assert_relative_eq!(s[(k, 1)], s1, max_relative = 1e-14);
        }
    }

    #[test]
    fn gp_links_are_rejected_by_analytic_score() {
        let g = Dag::from_edges(2, &[(0, 1)]).unwrap();
        let model = gp_model(g, NoiseFamily::Gaussian, 0);
        let x = sample_dataset(&model, 20, 0).unwrap();
        assert!(analytic_score(&model, &x).is_err());
        assert!(analytic_jacobian_diag(&model, &x).is_err());
    }

    /// Independent log-density implementations for the finite-difference
    /// oracle; kept apart from the NoiseSpec score code on purpose.
    fn log_density(spec: &NoiseSpec, r: f64) -> f64 {
        let sigma = spec.variance.sqrt();
        match spec.family {
            NoiseFamily::Gaussian => {
                -0.5 * r * r / spec.variance
                    - 0.5 * (2.0 * std::f64::consts::PI * spec.variance).ln()
            }
            NoiseFamily::Laplace => {
                let b = sigma / std::f64::consts::SQRT_2;
                -r.abs() / b - (2.0 * b).ln()
            }
            NoiseFamily::Gumbel => {
                let beta = sigma * 6.0f64.sqrt() / std::f64::consts::PI;
                let mu = -beta * EULER_MASCHERONI;
                let z = (r - mu) / beta;
                -beta.ln() - z - (-z).exp()
            }
        }
    }

    fn log_joint(model: &ScmModel, row: &[f64]) -> f64 {
        let terms = match &model.links {
            LinkSpec::Parametric { terms } => terms,
            _ => unreachable!(),
        };
        (0..model.graph.d())
            .map(|i| {
                let f: f64 = terms[i].iter().map(|t| t.eval(row[t.parent])).sum();
                log_density(&model.noise[i], row[i] - f)
            })
            .sum()
    }

    #[test]
    fn analytic_score_matches_finite_differences() {
        for family in [NoiseFamily::Gaussian, NoiseFamily::Laplace, NoiseFamily::Gumbel] {
            let g = crate::graph::sample_er_dag(4, 5, 17).unwrap();
            let model = random_parametric_model(g, family, 23);
            let x = sample_dataset(&model, 40, 31).unwrap();
            let s = analytic_score(&model, &x).unwrap();
            let h = 1e-6;
            for k in 0..x.n() {
                let row: Vec<f64> = x.values().row(k).iter().copied().collect();
                for j in 0..x.d() {
                    let mut plus = row.clone();
                    let mut minus = row.clone();
                    plus[j] += h;
                    minus[j] -= h;
                    let fd = (log_joint(&model, &plus) - log_joint(&model, &minus)) / (2.0 * h);
                    let denom = s[(k, j)].abs().max(1.0);
                    assert!(
                        (s[(k, j)] - fd).abs() / denom < 1e-6,
                        "{family}: s[{k},{j}] = {} vs fd {fd}",
                        s[(k, j)]
                    );
                }
            }
        }
    }

    #[test]
    fn jacobian_diag_leaf_column_is_constant() {
        let model = chain_sine_model(&[0.7, 0.5]);
        let x = sample_dataset(&model, 100, 2).unwrap();
        let j = analytic_jacobian_diag(&model, &x).unwrap();
        for k in 0..100 {
            assert_relative_eq!(j[(k, 1)], -2.0, max_relative = 1e-12);
        }
        let leaf_var = crate::data::column_variance(j.column(1).iter().copied(), 100);
        assert!(leaf_var < 1e-20, "leaf variance {leaf_var}");
        let root_var = crate::data::column_variance(j.column(0).iter().copied(), 100);
        assert!(root_var > 1e-6, "root variance {root_var}");
    }

    #[test]
    fn jacobian_diag_isolated_node() {
        let model = ScmModel {
            graph: Dag::empty(1).unwrap(),
            links: LinkSpec::Parametric { terms: vec![vec![]] },
            noise: vec![gaussian_spec(1.0)],
            seed: 0,
        };
        let x = sample_dataset(&model, 10, 4).unwrap();
        let j = analytic_jacobian_diag(&model, &x).unwrap();
        assert!(j.iter().all(|&v| v == -1.0));
    }

    #[test]
    fn leaf_parent_detection_via_cross_partials() {
        // for a leaf j, Var[∂s_j/∂x_i] > 0 exactly when i is a parent of j
        let graph = Dag::from_edges(4, &[(0, 2), (1, 2), (2, 3)]).unwrap();
        let model = random_parametric_model(graph, NoiseFamily::Gaussian, 77);
        let x = sample_dataset(&model, 1000, 78).unwrap();
        let leaf = 3;
        for i in 0..3 {
            let col = analytic_score_partial(&model, &x, leaf, i).unwrap();
            let var = crate::data::column_variance(col.iter().copied(), x.n());
            let is_parent = model.graph.has_edge(i, leaf);
            if is_parent {
                assert!(var > 1e-6, "parent {i} variance {var}");
            } else {
                assert!(var < 1e-20, "non-parent {i} variance {var}");
            }
        }
    }

    #[test]
    fn restrict_requires_ancestral_closure() {
        let model = chain_sine_model(&[0.5, 0.5, 0.5]);
        assert!(model.restrict(&[1, 2]).is_err());
        let sub = model.restrict(&[0, 1]).unwrap();
        assert_eq!(sub.graph.edges(), vec![(0, 1)]);
        assert_eq!(sub.noise.len(), 2);
    }

    #[test]
    fn benchmark_suite_shapes_and_determinism() {
        let cfg = BenchmarkConfig {
            d: 10,
            graph: GraphKind::Er1,
            noise: NoiseFamily::Gaussian,
            n: 50,
            runs: 10,
            seed: 5,
        };
        let suite = benchmark_suite(&cfg).unwrap();
        assert_eq!(suite.len(), 10);
        let mean_edges: f64 = suite
            .iter()
            .map(|inst| inst.truth.edge_count() as f64)
            .sum::<f64>()
            / 10.0;
        assert!((5.0..=15.0).contains(&mean_edges), "mean edges {mean_edges}");
        for inst in &suite {
            topological_sort(&inst.truth).unwrap();
            assert_eq!(inst.data.d(), 10);
        }

        let empty = benchmark_suite(&BenchmarkConfig { runs: 0, ..cfg }).unwrap();
        assert!(empty.is_empty());

        let again = benchmark_suite(&cfg).unwrap();
        for (a, b) in suite.iter().zip(&again) {
            assert_eq!(a.data, b.data);
            assert_eq!(a.truth, b.truth);
        }
    }

    #[test]
    fn model_json_round_trip() {
        let g = crate::graph::sample_er_dag(5, 5, 1).unwrap();
        let model = random_parametric_model(g, NoiseFamily::Laplace, 2);
        let text = serde_json::to_string(&model).unwrap();
        let back: ScmModel = serde_json::from_str(&text).unwrap();
        assert_eq!(model, back);
    }
}
