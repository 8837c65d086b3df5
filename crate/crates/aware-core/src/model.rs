//! The attentive walk-aggregating network: vertex embedding, iterated
//! attention-weighted walk aggregation, weighted summarization, predictor
//! head and losses.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{AttributeSchema, Graph, TaskKind};
use crate::scalar::{sc, Scalar};
use crate::tape::{Gradients, Tape, Var};
use crate::tensor::Matrix;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ScoreMode {
    /// Column softmax of the bilinear self-attention scores over each
    /// vertex's neighbors, recomputed per iteration. The practical default.
    Softmax,
    /// Logistic of the bilinear form on the fixed initial latent vectors,
    /// constant across iterations and unnormalized. Walk weights factor
    /// into per-edge scores exactly, which is what the oracle checks need.
    Pairwise,
}

/// Model hyperparameters and ablation switches.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AwareConfig {
    /// Max walk length T.
    pub t: usize,
    /// Vertex embedding dimension r.
    pub r: usize,
    /// Weighted latent dimension r'.
    pub r_prime: usize,
    /// Number of predictor layers L.
    pub layers: usize,
    /// Leaky-ReLU slope in [0, 1].
    pub alpha: f64,
    pub score_mode: ScoreMode,
    pub task_kind: TaskKind,
    #[serde(default = "default_true")]
    pub use_wv: bool,
    #[serde(default = "default_true")]
    pub use_ww: bool,
    #[serde(default = "default_true")]
    pub use_wg: bool,
    #[serde(default)]
    pub linear_sigma: bool,
    #[serde(default)]
    pub freeze_w: bool,
    #[serde(default)]
    pub linear_predictor: bool,
}

fn default_true() -> bool {
    true
}

impl AwareConfig {
    pub fn new(t: usize, r: usize, r_prime: usize, task_kind: TaskKind) -> Self {
        AwareConfig {
            t,
            r,
            r_prime,
            layers: 2,
            alpha: 0.1,
            score_mode: ScoreMode::Softmax,
            task_kind,
            use_wv: true,
            use_ww: true,
            use_wg: true,
            linear_sigma: false,
            freeze_w: false,
            linear_predictor: false,
        }
    }

    /// The simplified regime the representation theorems hold in exactly:
    /// no vertex/graph weighting, linear activation, pairwise scores.
    pub fn simplified(t: usize, r: usize, task_kind: TaskKind) -> Self {
        let mut c = AwareConfig::new(t, r, r, task_kind);
        c.use_wv = false;
        c.use_wg = false;
        c.linear_sigma = true;
        c.alpha = 1.0;
        c.score_mode = ScoreMode::Pairwise;
        c.normalize();
        c
    }

    /// Apply the flag forcings (`linear_sigma` pins alpha, dropping the
    /// vertex weighting pins `r' = r`, a linear predictor pins `L = 1`).
    pub fn normalize(&mut self) {
        if self.linear_sigma {
            self.alpha = 1.0;
        }
        if !self.use_wv {
            self.r_prime = self.r;
        }
        if self.linear_predictor {
            self.layers = 1;
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.t < 1 || self.r < 1 || self.r_prime < 1 || self.layers < 1 {
            return Err(Error::Config(
                "t, r, r_prime and layers must all be >= 1".into(),
            ));
        }
        if !(0.0..=1.0).contains(&self.alpha) {
            return Err(Error::Config(format!("alpha {} outside [0, 1]", self.alpha)));
        }
        if self.linear_sigma && self.alpha != 1.0 {
            return Err(Error::Config("linear_sigma requires alpha = 1".into()));
        }
        if !self.use_wv && self.r_prime != self.r {
            return Err(Error::Config(
                "without the vertex weighting, r_prime must equal r".into(),
            ));
        }
        if self.linear_predictor && self.layers != 1 {
            return Err(Error::Config("a linear predictor has exactly 1 layer".into()));
        }
        Ok(())
    }

    pub fn effective_alpha(&self) -> f64 {
        if self.linear_sigma {
            1.0
        } else {
            self.alpha
        }
    }

    pub fn latent_dim(&self) -> usize {
        if self.use_wv {
            self.r_prime
        } else {
            self.r
        }
    }

    /// Width of the concatenated graph embedding `T * r'`.
    pub fn embedding_width(&self) -> usize {
        self.t * self.latent_dim()
    }

    pub fn output_dim(&self, class_count: usize) -> usize {
        match self.task_kind {
            TaskKind::MulticlassClassification => class_count.max(2),
            _ => 1,
        }
    }
}

/// One fully-connected predictor layer.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseLayer<T: Scalar> {
    pub weight: Matrix<T>,
    pub bias: Matrix<T>,
}

/// Trainable state: the four weighting matrices (those the config keeps)
/// plus the predictor stack.
#[derive(Debug, Clone, PartialEq)]
pub struct AwareParams<T: Scalar> {
    pub w: Matrix<T>,
    pub w_v: Option<Matrix<T>>,
    pub w_w: Option<Matrix<T>>,
    pub w_g: Option<Matrix<T>>,
    pub predictor: Vec<DenseLayer<T>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ParamRole {
    W,
    Wv,
    Ww,
    Wg,
    PredictorWeight(usize),
    PredictorBias(usize),
}

fn uniform_matrix<T: Scalar>(rows: usize, cols: usize, fan_in: usize, rng: &mut ChaCha8Rng) -> Matrix<T> {
    let bound = 1.0 / (fan_in.max(1) as f64).sqrt();
    let mut m = Matrix::zeros(rows, cols);
    for e in 0..m.len() {
        m.data_mut()[e] = sc(rng.gen_range(-bound..bound));
    }
    m
}

fn rademacher_matrix<T: Scalar>(rows: usize, cols: usize, rng: &mut ChaCha8Rng) -> Matrix<T> {
    let scale = 1.0 / (rows as f64).sqrt();
    let mut m = Matrix::zeros(rows, cols);
    for e in 0..m.len() {
        m.data_mut()[e] = sc(if rng.gen_bool(0.5) { scale } else { -scale });
    }
    m
}

impl<T: Scalar> AwareParams<T> {
    /// Seeded initialization: entries uniform on `[-1/sqrt(fan_in), +1/sqrt(fan_in)]`;
    /// a frozen `W` is drawn with Rademacher `+-1/sqrt(r)` entries instead.
    pub fn init(
        config: &AwareConfig,
        schema: &AttributeSchema,
        class_count: usize,
        seed: u64,
    ) -> Result<Self> {
        config.validate()?;
        let k = schema.total_width();
        if k == 0 {
            return Err(Error::Schema(
                "schema has zero one-hot width; featurize the dataset first".into(),
            ));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let r = config.r;
        let rp = config.latent_dim();
        let w = if config.freeze_w {
            rademacher_matrix(r, k, &mut rng)
        } else {
            uniform_matrix(r, k, k, &mut rng)
        };
        let w_v = config.use_wv.then(|| uniform_matrix(rp, r, r, &mut rng));
        let w_w = config.use_ww.then(|| uniform_matrix(rp, rp, rp, &mut rng));
        let w_g = config.use_wg.then(|| uniform_matrix(rp, rp, rp, &mut rng));
        let width = config.embedding_width();
        let out = config.output_dim(class_count);
        let mut predictor = Vec::with_capacity(config.layers);
        let mut in_w = width;
        for l in 0..config.layers {
            let out_w = if l + 1 == config.layers { out } else { width };
            predictor.push(DenseLayer {
                weight: uniform_matrix(out_w, in_w, in_w, &mut rng),
                bias: Matrix::zeros(out_w, 1),
            });
            in_w = out_w;
        }
        Ok(AwareParams {
            w,
            w_v,
            w_w,
            w_g,
            predictor,
        })
    }

    pub fn output_dim(&self) -> usize {
        self.predictor.last().map_or(0, |l| l.weight.rows())
    }

    /// All parameter matrices in declaration order.
    pub fn roles(&self) -> Vec<ParamRole> {
        let mut roles = vec![ParamRole::W];
        if self.w_v.is_some() {
            roles.push(ParamRole::Wv);
        }
        if self.w_w.is_some() {
            roles.push(ParamRole::Ww);
        }
        if self.w_g.is_some() {
            roles.push(ParamRole::Wg);
        }
        for l in 0..self.predictor.len() {
            roles.push(ParamRole::PredictorWeight(l));
            roles.push(ParamRole::PredictorBias(l));
        }
        roles
    }

    /// Roles the optimizer updates (a frozen `W` stays out).
    pub fn trainable_roles(&self, config: &AwareConfig) -> Vec<ParamRole> {
        self.roles()
            .into_iter()
            .filter(|r| !(config.freeze_w && *r == ParamRole::W))
            .collect()
    }

    pub fn get(&self, role: ParamRole) -> &Matrix<T> {
        match role {
            ParamRole::W => &self.w,
            ParamRole::Wv => self.w_v.as_ref().expect("w_v present"),
            ParamRole::Ww => self.w_w.as_ref().expect("w_w present"),
            ParamRole::Wg => self.w_g.as_ref().expect("w_g present"),
            ParamRole::PredictorWeight(l) => &self.predictor[l].weight,
            ParamRole::PredictorBias(l) => &self.predictor[l].bias,
        }
    }

    pub fn get_mut(&mut self, role: ParamRole) -> &mut Matrix<T> {
        match role {
            ParamRole::W => &mut self.w,
            ParamRole::Wv => self.w_v.as_mut().expect("w_v present"),
            ParamRole::Ww => self.w_w.as_mut().expect("w_w present"),
            ParamRole::Wg => self.w_g.as_mut().expect("w_g present"),
            ParamRole::PredictorWeight(l) => &mut self.predictor[l].weight,
            ParamRole::PredictorBias(l) => &mut self.predictor[l].bias,
        }
    }
}

/// Tape handles for the registered parameters.
#[derive(Debug, Clone)]
pub struct ModelVars {
    pub w: Var,
    pub w_v: Option<Var>,
    pub w_w: Option<Var>,
    pub w_g: Option<Var>,
    pub predictor: Vec<(Var, Var)>,
}

impl ModelVars {
    pub fn of(&self, role: ParamRole) -> Var {
        match role {
            ParamRole::W => self.w,
            ParamRole::Wv => self.w_v.expect("w_v registered"),
            ParamRole::Ww => self.w_w.expect("w_w registered"),
            ParamRole::Wg => self.w_g.expect("w_g registered"),
            ParamRole::PredictorWeight(l) => self.predictor[l].0,
            ParamRole::PredictorBias(l) => self.predictor[l].1,
        }
    }
}

pub fn register_params<T: Scalar>(tape: &mut Tape<T>, params: &AwareParams<T>) -> Result<ModelVars> {
    Ok(ModelVars {
        w: tape.leaf(params.w.clone())?,
        w_v: params.w_v.as_ref().map(|m| tape.leaf(m.clone())).transpose()?,
        w_w: params.w_w.as_ref().map(|m| tape.leaf(m.clone())).transpose()?,
        w_g: params.w_g.as_ref().map(|m| tape.leaf(m.clone())).transpose()?,
        predictor: params
            .predictor
            .iter()
            .map(|l| Ok((tape.leaf(l.weight.clone())?, tape.leaf(l.bias.clone())?)))
            .collect::<Result<_>>()?,
    })
}

/// Tape handles produced by one forward pass.
pub struct ForwardVars {
    /// `F_(1) .. F_(T)`, each `r' x m`.
    pub latents: Vec<Var>,
    /// Attention matrices for n = 2..T (empty when T = 1).
    pub attentions: Vec<Var>,
    /// Per-level embeddings `f_(1) .. f_(T)`.
    pub level_embeddings: Vec<Var>,
    /// Concatenated graph embedding, `(T * r') x 1`.
    pub graph_embedding: Var,
}

/// Concrete values snapshotted from a forward pass.
#[derive(Debug, Clone)]
pub struct ForwardTrace<T: Scalar> {
    pub latents: Vec<Matrix<T>>,
    pub attentions: Vec<Matrix<T>>,
    pub level_embeddings: Vec<Matrix<T>>,
    pub graph_embedding: Matrix<T>,
    pub score_mode: ScoreMode,
    pub used_attention: bool,
}

impl ForwardVars {
    pub fn trace<T: Scalar>(&self, tape: &Tape<T>, config: &AwareConfig) -> ForwardTrace<T> {
        ForwardTrace {
            latents: self.latents.iter().map(|v| tape.value(*v).clone()).collect(),
            attentions: self
                .attentions
                .iter()
                .map(|v| tape.value(*v).clone())
                .collect(),
            level_embeddings: self
                .level_embeddings
                .iter()
                .map(|v| tape.value(*v).clone())
                .collect(),
            graph_embedding: tape.value(self.graph_embedding).clone(),
            score_mode: config.score_mode,
            used_attention: config.use_ww,
        }
    }
}

/// Vertex embedding `F = W H` (`r x m`): column i selects and sums the
/// one-hot-indexed columns of `W`.
pub fn embed_vertices<T: Scalar>(
    tape: &mut Tape<T>,
    w: Var,
    graph: &Graph,
    schema: &AttributeSchema,
) -> Result<Var> {
    if tape.value(w).cols() != schema.total_width() {
        return Err(Error::shape(
            "embed_vertices",
            format!("W with {} columns", schema.total_width()),
            tape.value(w).shape_str(),
        ));
    }
    let cols = (0..graph.vertex_count())
        .map(|i| schema.selected_columns(graph.attributes(i)))
        .collect::<Result<Vec<_>>>()?;
    tape.embed(w, cols)
}

/// Initial latent representation `F_(1) = sigma(W_v F)`.
pub fn initial_latent<T: Scalar>(
    tape: &mut Tape<T>,
    f: Var,
    vars: &ModelVars,
    config: &AwareConfig,
) -> Result<Var> {
    let x = match vars.w_v {
        Some(w_v) => tape.matmul(w_v, f)?,
        None => f,
    };
    tape.leaky_relu(x, sc(config.effective_alpha()))
}

/// Attention matrix for one iteration. Column i holds the incoming weights
/// for vertex i, supported on its neighbors.
pub fn attention_scores<T: Scalar>(
    tape: &mut Tape<T>,
    f_prev: Var,
    vars: &ModelVars,
    config: &AwareConfig,
    adjacency: &Matrix<T>,
    adjacency_var: Var,
) -> Result<Var> {
    if !config.use_ww {
        // Unweighted scheme: S_ji = 1 on edges.
        return Ok(adjacency_var);
    }
    let w_w = vars.w_w.expect("w_w registered");
    let wf = tape.matmul(w_w, f_prev)?;
    let ft = tape.transpose(f_prev)?;
    let z = tape.matmul(ft, wf)?;
    match config.score_mode {
        ScoreMode::Softmax => tape.masked_col_softmax(z, adjacency),
        ScoreMode::Pairwise => {
            let s = tape.logistic(z)?;
            tape.hadamard(s, adjacency_var)
        }
    }
}

/// One aggregation step `F_(n) = (F_(n-1) (A . S_n)) . F_(1)`; the score
/// matrix passed in is already supported on the adjacency.
pub fn step<T: Scalar>(tape: &mut Tape<T>, f_prev: Var, s_n: Var, f_1: Var) -> Result<Var> {
    let mixed = tape.matmul(f_prev, s_n)?;
    tape.hadamard(mixed, f_1)
}

/// Per-level summarization `f_(n) = sigma(W_g F_(n)) 1`.
pub fn summarize<T: Scalar>(
    tape: &mut Tape<T>,
    f_n: Var,
    vars: &ModelVars,
    config: &AwareConfig,
) -> Result<Var> {
    let x = match vars.w_g {
        Some(w_g) => tape.matmul(w_g, f_n)?,
        None => f_n,
    };
    let a = tape.leaky_relu(x, sc(config.effective_alpha()))?;
    tape.row_sum(a)
}

/// Full forward pass over one graph.
pub fn forward<T: Scalar>(
    tape: &mut Tape<T>,
    graph: &Graph,
    schema: &AttributeSchema,
    vars: &ModelVars,
    config: &AwareConfig,
) -> Result<ForwardVars> {
    if graph.vertex_count() == 0 {
        return Err(Error::Contract("forward over an empty graph".into()));
    }
    let adjacency: Matrix<T> = graph.adjacency();
    let adjacency_var = tape.constant(adjacency.clone())?;

    let f = embed_vertices(tape, vars.w, graph, schema)?;
    let f_1 = initial_latent(tape, f, vars, config)?;

    let mut latents = vec![f_1];
    let mut attentions = Vec::new();

    // In pairwise mode the scores depend only on the fixed initial latents,
    // so the matrix is computed once and reused each iteration.
    let fixed_scores = if config.t > 1 && config.use_ww && config.score_mode == ScoreMode::Pairwise
    {
        Some(attention_scores(
            tape,
            f_1,
            vars,
            config,
            &adjacency,
            adjacency_var,
        )?)
    } else {
        None
    };

    for _n in 2..=config.t {
        let f_prev = *latents.last().expect("at least one latent");
        let s_n = match fixed_scores {
            Some(s) => s,
            None => attention_scores(tape, f_prev, vars, config, &adjacency, adjacency_var)?,
        };
        attentions.push(s_n);
        let f_n = step(tape, f_prev, s_n, f_1)?;
        latents.push(f_n);
    }

    let level_embeddings = latents
        .iter()
        .map(|&f_n| summarize(tape, f_n, vars, config))
        .collect::<Result<Vec<_>>>()?;
    let graph_embedding = tape.concat_rows(&level_embeddings)?;
    Ok(ForwardVars {
        latents,
        attentions,
        level_embeddings,
        graph_embedding,
    })
}

/// Predictor head: `L` affine layers with leaky-ReLU between them and none
/// after the last.
pub fn predict<T: Scalar>(
    tape: &mut Tape<T>,
    embedding: Var,
    vars: &ModelVars,
    config: &AwareConfig,
) -> Result<Var> {
    let mut x = embedding;
    let layers = vars.predictor.len();
    for (l, &(w, b)) in vars.predictor.iter().enumerate() {
        let wx = tape.matmul(w, x)?;
        x = tape.add(wx, b)?;
        if l + 1 < layers {
            x = tape.leaky_relu(x, sc(config.effective_alpha()))?;
        }
    }
    Ok(x)
}

/// Supervised loss for one graph output.
pub fn loss<T: Scalar>(
    tape: &mut Tape<T>,
    output: Var,
    label: f64,
    task_kind: TaskKind,
) -> Result<Var> {
    match task_kind {
        TaskKind::BinaryClassification => {
            if !(label == 0.0 || label == 1.0) {
                return Err(Error::Contract(format!(
                    "binary label must be 0 or 1, got {label}"
                )));
            }
            let y = if label > 0.5 { 1.0 } else { -1.0 };
            tape.logistic_loss(output, sc(y))
        }
        TaskKind::MulticlassClassification => {
            if label.fract() != 0.0 || label < 0.0 {
                return Err(Error::Contract(format!(
                    "class label must be a nonnegative integer, got {label}"
                )));
            }
            tape.cross_entropy(output, label as usize)
        }
        TaskKind::Regression => tape.squared_error(output, sc(label)),
    }
}

/// Inference helper: run a forward pass on a throwaway tape and return the
/// embedding plus the full trace.
pub fn forward_trace<T: Scalar>(
    graph: &Graph,
    schema: &AttributeSchema,
    params: &AwareParams<T>,
    config: &AwareConfig,
) -> Result<ForwardTrace<T>> {
    let mut tape = Tape::new();
    let vars = register_params(&mut tape, params)?;
    let fwd = forward(&mut tape, graph, schema, &vars, config)?;
    Ok(fwd.trace(&tape, config))
}

/// Inference helper: predictor output for one graph.
pub fn predict_graph<T: Scalar>(
    graph: &Graph,
    schema: &AttributeSchema,
    params: &AwareParams<T>,
    config: &AwareConfig,
) -> Result<Matrix<T>> {
    let mut tape = Tape::new();
    let vars = register_params(&mut tape, params)?;
    let fwd = forward(&mut tape, graph, schema, &vars, config)?;
    let out = predict(&mut tape, fwd.graph_embedding, &vars, config)?;
    Ok(tape.value(out).clone())
}

/// Graphs per tape when a batch is split across worker tasks. Fixed so the
/// gradient reduction order (chunk index order) never depends on the
/// number of threads.
const GRADIENT_CHUNK: usize = 4;

/// Loss and gradients (in `trainable_roles` order) for a batch of graphs;
/// the batch loss is the mean of per-graph losses. Chunks of the batch run
/// on independent tapes in parallel; the reduction is sequential in chunk
/// order, so results are deterministic for any thread count.
pub fn batch_gradients<T: Scalar>(
    graphs: &[&Graph],
    schema: &AttributeSchema,
    params: &AwareParams<T>,
    config: &AwareConfig,
) -> Result<(T, Vec<Matrix<T>>)> {
    use rayon::prelude::*;

    let roles = params.trainable_roles(config);
    let chunk_results: Vec<Result<(T, Vec<Matrix<T>>)>> = graphs
        .par_chunks(GRADIENT_CHUNK)
        .map(|chunk| chunk_gradients(chunk, schema, params, config, &roles))
        .collect();

    let mut total_loss = T::zero();
    let mut summed: Option<Vec<Matrix<T>>> = None;
    for result in chunk_results {
        let (chunk_loss, chunk_grads) = result?;
        total_loss = total_loss + chunk_loss;
        summed = Some(match summed {
            None => chunk_grads,
            Some(acc) => acc
                .into_iter()
                .zip(chunk_grads)
                .map(|(a, b)| a.add(&b))
                .collect::<Result<_>>()?,
        });
    }
    let scale = T::one() / sc::<T>(graphs.len() as f64);
    let grads = summed
        .unwrap_or_default()
        .into_iter()
        .map(|g| g.scale(scale))
        .collect();
    Ok((total_loss * scale, grads))
}

/// Summed (not averaged) loss and gradients over one chunk on its own tape.
fn chunk_gradients<T: Scalar>(
    graphs: &[&Graph],
    schema: &AttributeSchema,
    params: &AwareParams<T>,
    config: &AwareConfig,
    roles: &[ParamRole],
) -> Result<(T, Vec<Matrix<T>>)> {
    let mut tape = Tape::new();
    let vars = register_params(&mut tape, params)?;
    let mut losses = Vec::with_capacity(graphs.len());
    for graph in graphs {
        let label = graph
            .label
            .ok_or_else(|| Error::Contract("graph without label in training batch".into()))?;
        let fwd = forward(&mut tape, graph, schema, &vars, config)?;
        let out = predict(&mut tape, fwd.graph_embedding, &vars, config)?;
        losses.push(loss(&mut tape, out, label, config.task_kind)?);
    }
    let total = sum_scalars(&mut tape, &losses)?;
    let grads: Gradients<T> = tape.backward(total)?;
    let out = roles
        .iter()
        .map(|&role| grads.of(vars.of(role), &tape))
        .collect();
    Ok((tape.value(total).get(0, 0), out))
}

fn sum_scalars<T: Scalar>(tape: &mut Tape<T>, parts: &[Var]) -> Result<Var> {
    let mut acc = parts[0];
    for part in &parts[1..] {
        acc = tape.add(acc, *part)?;
    }
    Ok(acc)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn schema1(k: usize) -> AttributeSchema {
        AttributeSchema::new(vec![k])
    }

    fn manual_params(w: Matrix<f64>, config: &AwareConfig) -> AwareParams<f64> {
        let width = config.embedding_width();
        AwareParams {
            w,
            w_v: None,
            w_w: None,
            w_g: None,
            predictor: vec![DenseLayer {
                weight: Matrix::zeros(1, width),
                bias: Matrix::zeros(1, 1),
            }],
        }
    }

    fn simplified_config(t: usize, r: usize) -> AwareConfig {
        let mut c = AwareConfig::simplified(t, r, TaskKind::BinaryClassification);
        c.use_ww = false;
        c
    }

    #[test]
    fn embed_selects_columns() {
        let config = simplified_config(1, 2);
        let w = Matrix::from_rows(&[vec![1.0, 2.0], vec![3.0, 4.0]]);
        let params = manual_params(w, &config);
        let g = Graph::new(2, &[(0, 1)], vec![vec![0], vec![1]], Some(0.0)).unwrap();
        let mut tape = Tape::new();
        let vars = register_params(&mut tape, &params).unwrap();
        let f = embed_vertices(&mut tape, vars.w, &g, &schema1(2)).unwrap();
        assert_eq!(tape.value(f).col(0), vec![1.0, 3.0]);
        assert_eq!(tape.value(f).col(1), vec![2.0, 4.0]);
    }

    #[test]
    fn embed_sums_attribute_blocks() {
        // C = 2, value (0, 1): column = block-0 column 0 + block-1 column 1.
        let schema = AttributeSchema::new(vec![2, 2]);
        let w = Matrix::from_rows(&[vec![1.0, 2.0, 10.0, 20.0]]);
        let mut config = AwareConfig::new(1, 1, 1, TaskKind::BinaryClassification);
        config.use_wv = false;
        config.use_ww = false;
        config.use_wg = false;
        config.linear_sigma = true;
        config.normalize();
        let params = manual_params(w, &config);
        let g = Graph::new(1, &[], vec![vec![0, 1]], Some(0.0)).unwrap();
        let mut tape = Tape::new();
        let vars = register_params(&mut tape, &params).unwrap();
        let f = embed_vertices(&mut tape, vars.w, &g, &schema).unwrap();
        assert_eq!(tape.value(f).get(0, 0), 21.0);
    }

    #[test]
    fn zero_w_gives_zero_embedding() {
        let config = simplified_config(1, 2);
        let params = manual_params(Matrix::zeros(2, 2), &config);
        let g = Graph::new(2, &[(0, 1)], vec![vec![0], vec![1]], Some(0.0)).unwrap();
        let mut tape = Tape::new();
        let vars = register_params(&mut tape, &params).unwrap();
        let f = embed_vertices(&mut tape, vars.w, &g, &schema1(2)).unwrap();
        assert!(tape.value(f).data().iter().all(|&x| x == 0.0));
    }

    #[test]
    fn initial_latent_identity_under_simplified_config() {
        let config = simplified_config(1, 2);
        let w = Matrix::from_rows(&[vec![1.0, -2.0], vec![3.0, 4.0]]);
        let params = manual_params(w, &config);
        let g = Graph::new(2, &[(0, 1)], vec![vec![0], vec![1]], Some(0.0)).unwrap();
        let mut tape = Tape::new();
        let vars = register_params(&mut tape, &params).unwrap();
        let f = embed_vertices(&mut tape, vars.w, &g, &schema1(2)).unwrap();
        let f1 = initial_latent(&mut tape, f, &vars, &config).unwrap();
        assert_eq!(tape.value(f1), tape.value(f));
    }

    #[test]
    fn initial_latent_relu_kills_negatives() {
        let mut config = simplified_config(1, 1);
        config.linear_sigma = false;
        config.alpha = 0.0;
        let params = manual_params(Matrix::from_rows(&[vec![-3.0]]), &config);
        let g = Graph::new(1, &[], vec![vec![0]], Some(0.0)).unwrap();
        let mut tape = Tape::new();
        let vars = register_params(&mut tape, &params).unwrap();
        let f = embed_vertices(&mut tape, vars.w, &g, &schema1(1)).unwrap();
        let f1 = initial_latent(&mut tape, f, &vars, &config).unwrap();
        assert_eq!(tape.value(f1).get(0, 0), 0.0);
    }

    #[test]
    fn initial_latent_single_vertex_scaling() {
        let mut config = AwareConfig::new(1, 1, 1, TaskKind::BinaryClassification);
        config.linear_sigma = true;
        config.use_ww = false;
        config.use_wg = false;
        config.normalize();
        let params = AwareParams {
            w: Matrix::from_rows(&[vec![3.0]]),
            w_v: Some(Matrix::from_rows(&[vec![2.0]])),
            w_w: None,
            w_g: None,
            predictor: vec![DenseLayer {
                weight: Matrix::zeros(1, 1),
                bias: Matrix::zeros(1, 1),
            }],
        };
        let g = Graph::new(1, &[], vec![vec![0]], Some(0.0)).unwrap();
        let mut tape = Tape::new();
        let vars = register_params(&mut tape, &params).unwrap();
        let f = embed_vertices(&mut tape, vars.w, &g, &schema1(1)).unwrap();
        let f1 = initial_latent(&mut tape, f, &vars, &config).unwrap();
        assert_eq!(tape.value(f1).get(0, 0), 6.0);
    }

    fn with_ww(config: &mut AwareConfig, rp: usize, w_w: Matrix<f64>) -> AwareParams<f64> {
        config.use_ww = true;
        let width = config.t * rp;
        AwareParams {
            w: Matrix::identity(rp),
            w_v: None,
            w_w: Some(w_w),
            w_g: None,
            predictor: vec![DenseLayer {
                weight: Matrix::zeros(1, width),
                bias: Matrix::zeros(1, 1),
            }],
        }
    }

    #[test]
    fn softmax_attention_single_neighbor_is_one() {
        let mut config = AwareConfig::simplified(2, 2, TaskKind::BinaryClassification);
        config.score_mode = ScoreMode::Softmax;
        let params = with_ww(&mut config, 2, Matrix::from_rows(&[vec![0.7, -0.3], vec![1.1, 0.2]]));
        let g = Graph::new(2, &[(0, 1)], vec![vec![0], vec![1]], Some(0.0)).unwrap();
        let trace = forward_trace(&g, &schema1(2), &params, &config).unwrap();
        let s = &trace.attentions[0];
        assert_eq!(s.get(1, 0), 1.0);
        assert_eq!(s.get(0, 1), 1.0);
        assert_eq!(s.get(0, 0), 0.0);
    }

    #[test]
    fn softmax_attention_zero_scores_are_uniform() {
        let mut config = AwareConfig::simplified(2, 1, TaskKind::BinaryClassification);
        config.score_mode = ScoreMode::Softmax;
        let params = with_ww(&mut config, 1, Matrix::zeros(1, 1));
        // Path 0 - 1 - 2: vertex 1 has two neighbors.
        let g = Graph::new(3, &[(0, 1), (1, 2)], vec![vec![0]; 3], Some(0.0)).unwrap();
        let trace = forward_trace(&g, &schema1(1), &params, &config).unwrap();
        let s = &trace.attentions[0];
        assert!((s.get(0, 1) - 0.5).abs() < 1e-15);
        assert!((s.get(2, 1) - 0.5).abs() < 1e-15);
    }

    #[test]
    fn pairwise_attention_zero_scores_are_half() {
        let mut config = AwareConfig::simplified(2, 1, TaskKind::BinaryClassification);
        config.score_mode = ScoreMode::Pairwise;
        let params = with_ww(&mut config, 1, Matrix::zeros(1, 1));
        let g = Graph::new(2, &[(0, 1)], vec![vec![0]; 2], Some(0.0)).unwrap();
        let trace = forward_trace(&g, &schema1(1), &params, &config).unwrap();
        let s = &trace.attentions[0];
        assert_eq!(s.get(1, 0), 0.5);
        assert_eq!(s.get(0, 1), 0.5);
        assert_eq!(s.get(0, 0), 0.0);
    }

    #[test]
    fn step_matches_hand_expansion() {
        // 2-vertex path with F_(1) columns (1,3) and (2,4), S = 1 on edges:
        // both F_(2) columns are (2,12).
        let config = simplified_config(2, 2);
        let w = Matrix::from_rows(&[vec![1.0, 2.0], vec![3.0, 4.0]]);
        let params = manual_params(w, &config);
        let g = Graph::new(2, &[(0, 1)], vec![vec![0], vec![1]], Some(0.0)).unwrap();
        let trace = forward_trace(&g, &schema1(2), &params, &config).unwrap();
        let f2 = &trace.latents[1];
        assert_eq!(f2.col(0), vec![2.0, 12.0]);
        assert_eq!(f2.col(1), vec![2.0, 12.0]);
    }

    #[test]
    fn isolated_vertex_latent_is_zero_from_level_two() {
        let config = simplified_config(3, 2);
        let w = Matrix::from_rows(&[vec![1.0, 2.0], vec![3.0, 4.0]]);
        let params = manual_params(w, &config);
        let g = Graph::new(3, &[(0, 1)], vec![vec![0], vec![1], vec![0]], Some(0.0)).unwrap();
        let trace = forward_trace(&g, &schema1(2), &params, &config).unwrap();
        for n in 1..3 {
            assert_eq!(trace.latents[n].col(2), vec![0.0, 0.0]);
        }
    }

    #[test]
    fn summarize_row_sums_under_identity_wg() {
        let config = simplified_config(2, 2);
        let w = Matrix::from_rows(&[vec![1.0, 2.0], vec![3.0, 4.0]]);
        let params = manual_params(w, &config);
        let g = Graph::new(2, &[(0, 1)], vec![vec![0], vec![1]], Some(0.0)).unwrap();
        let trace = forward_trace(&g, &schema1(2), &params, &config).unwrap();
        assert_eq!(trace.level_embeddings[0].col(0), vec![3.0, 7.0]);
        assert_eq!(trace.level_embeddings[1].col(0), vec![4.0, 24.0]);
        assert_eq!(trace.graph_embedding.col(0), vec![3.0, 7.0, 4.0, 24.0]);
    }

    #[test]
    fn edgeless_graph_has_zero_higher_levels() {
        let config = simplified_config(3, 2);
        let w = Matrix::from_rows(&[vec![0.5, 2.0], vec![3.0, 4.0]]);
        let params = manual_params(w, &config);
        let g = Graph::new(2, &[], vec![vec![0], vec![1]], Some(0.0)).unwrap();
        let trace = forward_trace(&g, &schema1(2), &params, &config).unwrap();
        assert!(trace.level_embeddings[0].data().iter().any(|&x| x != 0.0));
        for n in 1..3 {
            assert!(trace.level_embeddings[n].data().iter().all(|&x| x == 0.0));
        }
    }

    #[test]
    fn forward_is_permutation_invariant() {
        let mut config = AwareConfig::new(3, 4, 3, TaskKind::BinaryClassification);
        config.alpha = 0.1;
        let schema = schema1(3);
        let params = AwareParams::<f64>::init(&config, &schema, 2, 7).unwrap();
        let g = Graph::new(
            5,
            &[(0, 1), (1, 2), (2, 3), (3, 0), (2, 4)],
            vec![vec![0], vec![1], vec![2], vec![0], vec![1]],
            Some(1.0),
        )
        .unwrap();
        let perm = vec![3, 0, 4, 1, 2];
        let gp = g.permuted(&perm).unwrap();
        let a = forward_trace(&g, &schema, &params, &config).unwrap();
        let b = forward_trace(&gp, &schema, &params, &config).unwrap();
        let diff = a
            .graph_embedding
            .sub(&b.graph_embedding)
            .unwrap()
            .max_abs();
        assert!(diff <= 1e-10, "difference {diff}");
    }

    #[test]
    fn embedding_width_and_locality() {
        // f_[T] has width T * r', and zeroing the adjacency leaves f_(1)
        // untouched: level n only sees walks of at most n vertices.
        let mut config = AwareConfig::new(3, 4, 3, TaskKind::BinaryClassification);
        config.alpha = 0.2;
        let schema = schema1(3);
        let params = AwareParams::<f64>::init(&config, &schema, 2, 11).unwrap();
        let g = Graph::new(
            4,
            &[(0, 1), (1, 2), (2, 3)],
            vec![vec![0], vec![1], vec![2], vec![1]],
            Some(1.0),
        )
        .unwrap();
        let edgeless = Graph::new(
            4,
            &[],
            vec![vec![0], vec![1], vec![2], vec![1]],
            Some(1.0),
        )
        .unwrap();
        let a = forward_trace(&g, &schema, &params, &config).unwrap();
        let b = forward_trace(&edgeless, &schema, &params, &config).unwrap();
        assert_eq!(a.graph_embedding.rows(), config.embedding_width());
        let d = a.level_embeddings[0]
            .sub(&b.level_embeddings[0])
            .unwrap()
            .max_abs();
        assert_eq!(d, 0.0);
    }

    #[test]
    fn predict_single_affine_layer() {
        let config = simplified_config(1, 2);
        let mut params = manual_params(Matrix::identity(2), &config);
        params.predictor[0].weight = Matrix::from_rows(&[vec![1.0, -1.0]]);
        params.predictor[0].bias = Matrix::from_rows(&[vec![0.25]]);
        let g = Graph::new(2, &[(0, 1)], vec![vec![0], vec![1]], Some(0.0)).unwrap();
        let out = predict_graph(&g, &schema1(2), &params, &config).unwrap();
        // Embedding is f_(1) = (1, 1); output = 1 - 1 + 0.25.
        assert!((out.get(0, 0) - 0.25).abs() < 1e-15);
    }

    #[test]
    fn zero_predictor_outputs_zero() {
        let config = simplified_config(2, 2);
        let params = manual_params(Matrix::from_rows(&[vec![1.0, 2.0], vec![3.0, 4.0]]), &config);
        let g = Graph::new(2, &[(0, 1)], vec![vec![0], vec![1]], Some(0.0)).unwrap();
        let out = predict_graph(&g, &schema1(2), &params, &config).unwrap();
        assert_eq!(out.get(0, 0), 0.0);
    }

    #[test]
    fn two_layer_predictor_matches_hand_computation() {
        let mut config = simplified_config(1, 2);
        config.layers = 2;
        config.linear_sigma = false;
        config.alpha = 0.5;
        let mut params = manual_params(Matrix::identity(2), &config);
        params.predictor = vec![
            DenseLayer {
                weight: Matrix::from_rows(&[vec![1.0, 0.0], vec![0.0, -1.0]]),
                bias: Matrix::from_rows(&[vec![0.0], vec![0.0]]),
            },
            DenseLayer {
                weight: Matrix::from_rows(&[vec![2.0, 3.0]]),
                bias: Matrix::from_rows(&[vec![1.0]]),
            },
        ];
        let g = Graph::new(2, &[(0, 1)], vec![vec![0], vec![1]], Some(0.0)).unwrap();
        // Embedding (1, 1); layer 1 gives (1, -1); leaky(0.5) gives (1, -0.5);
        // layer 2 gives 2*1 + 3*(-0.5) + 1 = 1.5.
        let out = predict_graph(&g, &schema1(2), &params, &config).unwrap();
        assert!((out.get(0, 0) - 1.5).abs() < 1e-15);
    }

    #[test]
    fn loss_values() {
        let mut tape = Tape::<f64>::new();
        let zero = tape.constant(Matrix::scalar(0.0)).unwrap();
        let l = loss(&mut tape, zero, 1.0, TaskKind::BinaryClassification).unwrap();
        assert!((tape.value(l).get(0, 0) - 2.0f64.ln()).abs() < 1e-15);

        let ten = tape.constant(Matrix::scalar(10.0)).unwrap();
        let l = loss(&mut tape, ten, 1.0, TaskKind::BinaryClassification).unwrap();
        assert!((tape.value(l).get(0, 0) - 4.5398e-5).abs() < 1e-8);

        let pred = tape.constant(Matrix::scalar(0.7)).unwrap();
        let l = loss(&mut tape, pred, 0.7, TaskKind::Regression).unwrap();
        assert_eq!(tape.value(l).get(0, 0), 0.0);

        let bad = tape.constant(Matrix::scalar(0.0)).unwrap();
        assert!(loss(&mut tape, bad, 2.0, TaskKind::BinaryClassification).is_err());
    }

    #[test]
    fn config_normalization_and_validation() {
        let mut c = AwareConfig::new(3, 8, 4, TaskKind::Regression);
        c.linear_sigma = true;
        c.use_wv = false;
        c.linear_predictor = true;
        c.layers = 3;
        c.normalize();
        assert_eq!(c.alpha, 1.0);
        assert_eq!(c.r_prime, 8);
        assert_eq!(c.layers, 1);
        c.validate().unwrap();
        let mut bad = AwareConfig::new(0, 1, 1, TaskKind::Regression);
        assert!(bad.validate().is_err());
        bad.t = 1;
        bad.alpha = 1.5;
        assert!(bad.validate().is_err());
    }

    #[test]
    fn frozen_w_is_rademacher_and_untrained() {
        let mut config = AwareConfig::new(2, 4, 3, TaskKind::BinaryClassification);
        config.freeze_w = true;
        let schema = schema1(5);
        let params = AwareParams::<f64>::init(&config, &schema, 2, 3).unwrap();
        let scale = 1.0 / 2.0; // 1/sqrt(r), r = 4
        for &x in params.w.data() {
            assert!((x.abs() - scale).abs() < 1e-15);
        }
        let roles = params.trainable_roles(&config);
        assert!(!roles.contains(&ParamRole::W));
        assert!(roles.contains(&ParamRole::Ww));
    }
}
