//! Brute-force walk enumeration and the independent identities the model
//! is checked against: the graph-level linear-map identity, the per-vertex
//! latent expansion, the gated general-setting variant, and the unweighted
//! recursion equivalence. Enumeration is desk-scale only and guarded by
//! a budget.

use std::collections::BTreeMap;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::graph::{AttributeSchema, Graph};
use crate::model::{forward_trace, AwareConfig, AwareParams, ScoreMode};
use crate::scalar::{sc, Scalar};
use crate::tensor::{relative_residual, Matrix};

/// Default cap on enumerated walks / materialized product columns.
pub const DEFAULT_BUDGET: u64 = 1_000_000;

/// Sequence of attribute tuples along a walk.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub struct WalkType(pub Vec<Vec<usize>>);

impl WalkType {
    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

/// Histogram of walk types of one length, optionally grouped by start
/// vertex.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct WalkStatistics {
    pub n: usize,
    pub counts: BTreeMap<WalkType, u64>,
    pub per_vertex: Option<Vec<BTreeMap<WalkType, u64>>>,
}

impl WalkStatistics {
    pub fn total(&self) -> u64 {
        self.counts.values().sum()
    }
}

fn estimated_walks(graph: &Graph, n: usize) -> u64 {
    let max_deg = (0..graph.vertex_count())
        .map(|i| graph.degree(i))
        .max()
        .unwrap_or(0)
        .max(1) as u64;
    let mut est = graph.vertex_count() as u64;
    for _ in 1..n {
        est = est.saturating_mul(max_deg);
    }
    est
}

/// All directed traversals of `n` vertices (revisits allowed), ordered
/// lexicographically by vertex index.
pub fn enumerate_walks(graph: &Graph, n: usize, budget: u64) -> Result<Vec<Vec<usize>>> {
    if n == 0 {
        return Err(Error::Contract("walk length must be >= 1".into()));
    }
    if estimated_walks(graph, n) > budget {
        return Err(Error::Budget {
            message: format!(
                "enumerating walks of length {} on {} vertices",
                n,
                graph.vertex_count()
            ),
            budget,
        });
    }
    let mut walks = Vec::new();
    let mut stack = Vec::with_capacity(n);
    for start in 0..graph.vertex_count() {
        stack.push(start);
        extend_walk(graph, n, &mut stack, &mut walks);
        stack.pop();
    }
    Ok(walks)
}

fn extend_walk(graph: &Graph, n: usize, stack: &mut Vec<usize>, walks: &mut Vec<Vec<usize>>) {
    if stack.len() == n {
        walks.push(stack.clone());
        return;
    }
    let last = *stack.last().expect("non-empty stack");
    for &next in graph.neighbors(last) {
        stack.push(next);
        extend_walk(graph, n, stack, walks);
        stack.pop();
    }
}

fn walk_type_of(graph: &Graph, walk: &[usize]) -> WalkType {
    WalkType(walk.iter().map(|&v| graph.attributes(v).to_vec()).collect())
}

/// Histogram of attribute sequences along all walks of `n` vertices;
/// `per_vertex` additionally groups by start vertex.
pub fn walk_statistics(
    graph: &Graph,
    n: usize,
    per_vertex: bool,
    budget: u64,
) -> Result<WalkStatistics> {
    let walks = enumerate_walks(graph, n, budget)?;
    let mut counts: BTreeMap<WalkType, u64> = BTreeMap::new();
    let mut grouped = per_vertex.then(|| vec![BTreeMap::new(); graph.vertex_count()]);
    for walk in &walks {
        let ty = walk_type_of(graph, walk);
        if let Some(groups) = grouped.as_mut() {
            *groups[walk[0]].entry(ty.clone()).or_insert(0) += 1;
        }
        *counts.entry(ty).or_insert(0) += 1;
    }
    Ok(WalkStatistics {
        n,
        counts,
        per_vertex: grouped,
    })
}

/// Embedding of one attribute tuple: the sum of the selected one-hot
/// columns of `W` (that is, `W h(u)`).
pub fn value_embedding<T: Scalar>(
    w: &Matrix<T>,
    schema: &AttributeSchema,
    tuple: &[usize],
) -> Result<Matrix<T>> {
    let mut out = Matrix::zeros(w.rows(), 1);
    for col in schema.selected_columns(tuple)? {
        for r in 0..w.rows() {
            out.set(r, 0, out.get(r, 0) + w.get(r, col));
        }
    }
    Ok(out)
}

/// Latent embedding of one attribute tuple as the model's first layer sees
/// it: `sigma(W_v W h(u))` with the config's activation.
pub fn latent_value_embedding<T: Scalar>(
    params: &AwareParams<T>,
    config: &AwareConfig,
    schema: &AttributeSchema,
    tuple: &[usize],
) -> Result<Matrix<T>> {
    let base = value_embedding(&params.w, schema, tuple)?;
    let x = match &params.w_v {
        Some(w_v) => w_v.matmul(&base)?,
        None => base,
    };
    let alpha = sc::<T>(config.effective_alpha());
    Ok(x.map(|z| if z >= T::zero() { z } else { alpha * z }))
}

/// All length-`n` walk types in lexicographic order.
pub fn all_walk_types(schema: &AttributeSchema, n: usize, budget: u64) -> Result<Vec<WalkType>> {
    let tuples = schema.all_value_tuples();
    let mut total: u64 = 1;
    for _ in 0..n {
        total = total.saturating_mul(tuples.len() as u64);
        if total > budget {
            return Err(Error::Budget {
                message: format!("materializing {}^{} walk types", tuples.len(), n),
                budget,
            });
        }
    }
    let mut out: Vec<Vec<Vec<usize>>> = vec![Vec::new()];
    for _ in 0..n {
        let mut next = Vec::with_capacity(out.len() * tuples.len());
        for prefix in &out {
            for t in &tuples {
                let mut seq = prefix.clone();
                seq.push(t.clone());
                next.push(seq);
            }
        }
        out = next;
    }
    Ok(out.into_iter().map(WalkType).collect())
}

/// Element-wise product of per-tuple embeddings along a walk type.
fn product_column<T: Scalar>(embeddings: &BTreeMap<Vec<usize>, Matrix<T>>, ty: &WalkType) -> Matrix<T> {
    let mut acc: Option<Matrix<T>> = None;
    for tuple in &ty.0 {
        let e = &embeddings[tuple];
        acc = Some(match acc {
            None => e.clone(),
            Some(a) => a.hadamard(e).expect("embedding shapes"),
        });
    }
    acc.expect("non-empty walk type")
}

fn plain_embeddings<T: Scalar>(
    w: &Matrix<T>,
    schema: &AttributeSchema,
) -> Result<BTreeMap<Vec<usize>, Matrix<T>>> {
    schema
        .all_value_tuples()
        .into_iter()
        .map(|t| Ok((t.clone(), value_embedding(w, schema, &t)?)))
        .collect()
}

fn gated_embeddings<T: Scalar>(
    params: &AwareParams<T>,
    config: &AwareConfig,
    schema: &AttributeSchema,
) -> Result<BTreeMap<Vec<usize>, Matrix<T>>> {
    schema
        .all_value_tuples()
        .into_iter()
        .map(|t| Ok((t.clone(), latent_value_embedding(params, config, schema, &t)?)))
        .collect()
}

/// The n-way column product of `W`: an `r x K_C^n` matrix whose column for
/// walk type `(v_1 .. v_n)` is `W(v_1) . W(v_2) . ... . W(v_n)`, columns in
/// lexicographic type order. With `gating` the per-factor embeddings are
/// passed through `sigma(W_v .)` first (the general-setting variant).
pub fn column_product<T: Scalar>(
    w: &Matrix<T>,
    schema: &AttributeSchema,
    n: usize,
    gating: Option<(&AwareParams<T>, &AwareConfig)>,
    budget: u64,
) -> Result<Matrix<T>> {
    let types = all_walk_types(schema, n, budget)?;
    let embeddings = match gating {
        Some((params, config)) => gated_embeddings(params, config, schema)?,
        None => plain_embeddings(w, schema)?,
    };
    let rows = embeddings
        .values()
        .next()
        .map(|m| m.rows())
        .unwrap_or(w.rows());
    let mut out = Matrix::zeros(rows, types.len());
    for (c, ty) in types.iter().enumerate() {
        let col = product_column(&embeddings, ty);
        for r in 0..rows {
            out.set(r, c, col.get(r, 0));
        }
    }
    Ok(out)
}

fn pair_score<T: Scalar>(w_w: Option<&Matrix<T>>, successor: &Matrix<T>, current: &Matrix<T>) -> T {
    match w_w {
        None => T::one(),
        Some(w_w) => {
            let z = successor
                .transpose()
                .matmul(&w_w.matmul(current).expect("score shapes"))
                .expect("score shapes")
                .get(0, 0);
            if z >= T::zero() {
                T::one() / (T::one() + (-z).exp())
            } else {
                let e = z.exp();
                e / (T::one() + e)
            }
        }
    }
}

/// Weight of a walk type: the product of the pairwise scores along it,
/// each factor `score(successor embedding, current embedding)` to match
/// the per-vertex recursion. Length-1 types have weight 1. Pairwise score
/// mode only.
pub fn walk_weight<T: Scalar>(
    ty: &WalkType,
    params: &AwareParams<T>,
    config: &AwareConfig,
    schema: &AttributeSchema,
) -> Result<T> {
    if config.use_ww && config.score_mode != ScoreMode::Pairwise {
        return Err(Error::Contract(
            "walk weights are defined for the pairwise score mode".into(),
        ));
    }
    let embeddings = gated_embeddings(params, config, schema)?;
    Ok(walk_weight_from(&embeddings, params.w_w.as_ref(), ty))
}

fn walk_weight_from<T: Scalar>(
    embeddings: &BTreeMap<Vec<usize>, Matrix<T>>,
    w_w: Option<&Matrix<T>>,
    ty: &WalkType,
) -> T {
    let mut acc = T::one();
    for k in 0..ty.0.len().saturating_sub(1) {
        let current = &embeddings[&ty.0[k]];
        let successor = &embeddings[&ty.0[k + 1]];
        acc = acc * pair_score(w_w, successor, current);
    }
    acc
}

/// Walk-type weights keyed by type.
pub type WalkWeightTable<T> = BTreeMap<WalkType, T>;

/// Weights for every length-`n` walk type.
pub fn walk_weight_table<T: Scalar>(
    schema: &AttributeSchema,
    n: usize,
    params: &AwareParams<T>,
    config: &AwareConfig,
    budget: u64,
) -> Result<WalkWeightTable<T>> {
    let embeddings = gated_embeddings(params, config, schema)?;
    let w_w = if config.use_ww { params.w_w.as_ref() } else { None };
    all_walk_types(schema, n, budget)?
        .into_iter()
        .map(|ty| {
            let w = walk_weight_from(&embeddings, w_w, &ty);
            Ok((ty, w))
        })
        .collect()
}

/// Unweighted n-gram embedding by direct enumeration: the sum over all
/// n-vertex walks of the element-wise product of plain vertex embeddings.
pub fn ngram_reference<T: Scalar>(
    graph: &Graph,
    w: &Matrix<T>,
    schema: &AttributeSchema,
    n: usize,
    budget: u64,
) -> Result<Matrix<T>> {
    let walks = enumerate_walks(graph, n, budget)?;
    let mut acc = Matrix::zeros(w.rows(), 1);
    for walk in &walks {
        let mut prod: Option<Matrix<T>> = None;
        for &v in walk {
            let e = value_embedding(w, schema, graph.attributes(v))?;
            prod = Some(match prod {
                None => e,
                Some(p) => p.hadamard(&e)?,
            });
        }
        acc = acc.add(&prod.expect("non-empty walk"))?;
    }
    Ok(acc)
}

/// The unweighted message-passing recursion, computed with the same loop
/// order the model uses so the two agree bit for bit: `F_(1) = W H`,
/// `F_(n) = (F_(n-1) A) . F_(1)`, `f_(n) = F_(n) 1`.
pub fn ngram_recursion<T: Scalar>(
    graph: &Graph,
    w: &Matrix<T>,
    schema: &AttributeSchema,
    t: usize,
) -> Result<Vec<Matrix<T>>> {
    let h = graph.onehot::<T>(schema)?;
    let f_1 = w.matmul(&h)?;
    let adjacency: Matrix<T> = graph.adjacency();
    let mut levels = vec![f_1.row_sum()];
    let mut f_prev = f_1.clone();
    for _ in 2..=t {
        f_prev = f_prev.matmul(&adjacency)?.hadamard(&f_1)?;
        levels.push(f_prev.row_sum());
    }
    Ok(levels)
}

fn require_pairwise(config: &AwareConfig) -> Result<()> {
    if config.use_ww && config.score_mode != ScoreMode::Pairwise {
        return Err(Error::Contract(
            "oracle identities require the pairwise score mode".into(),
        ));
    }
    Ok(())
}

fn require_level(config: &AwareConfig, n: usize) -> Result<()> {
    if n == 0 || n > config.t {
        return Err(Error::Contract(format!(
            "walk length {} outside the model's 1..={} levels",
            n, config.t
        )));
    }
    Ok(())
}

fn require_simplified(config: &AwareConfig, schema: &AttributeSchema) -> Result<()> {
    require_pairwise(config)?;
    if config.use_wv || config.use_wg {
        return Err(Error::Contract(
            "simplified setting requires identity vertex and graph weightings".into(),
        ));
    }
    if config.effective_alpha() != 1.0 {
        return Err(Error::Contract(
            "simplified setting requires a linear activation".into(),
        ));
    }
    if schema.attribute_count() != 1 {
        return Err(Error::Contract(
            "simplified setting requires a single attribute".into(),
        ));
    }
    Ok(())
}

/// Residual of the graph-level identity: the model's level-n embedding
/// against the weighted walk statistics pushed through the n-way column
/// product. Requires the simplified setting.
pub fn verify_embedding_identity<T: Scalar>(
    graph: &Graph,
    schema: &AttributeSchema,
    params: &AwareParams<T>,
    config: &AwareConfig,
    n: usize,
    budget: u64,
) -> Result<T> {
    require_simplified(config, schema)?;
    require_level(config, n)?;
    let trace = forward_trace(graph, schema, params, config)?;
    let model_f = &trace.level_embeddings[n - 1];

    let stats = walk_statistics(graph, n, false, budget)?;
    let embeddings = plain_embeddings(&params.w, schema)?;
    let w_w = if config.use_ww { params.w_w.as_ref() } else { None };
    let mut rhs = Matrix::zeros(params.w.rows(), 1);
    for (ty, &count) in &stats.counts {
        let lambda = walk_weight_from(&embeddings, w_w, ty);
        let col = product_column(&embeddings, ty);
        rhs = rhs.add(&col.scale(lambda * sc(count as f64)))?;
    }
    Ok(relative_residual(model_f, &rhs, sc(1e-12)))
}

/// Max per-vertex residual of the latent expansion: `[F_(n)]_i` against the
/// weight-and-product sum over walks starting at i. Pairwise mode; general
/// weightings and activation allowed.
pub fn verify_latent_identity<T: Scalar>(
    graph: &Graph,
    schema: &AttributeSchema,
    params: &AwareParams<T>,
    config: &AwareConfig,
    n: usize,
    budget: u64,
) -> Result<T> {
    require_pairwise(config)?;
    require_level(config, n)?;
    let trace = forward_trace(graph, schema, params, config)?;
    let latent = &trace.latents[n - 1];

    let embeddings = gated_embeddings(params, config, schema)?;
    let w_w = if config.use_ww { params.w_w.as_ref() } else { None };
    let walks = enumerate_walks(graph, n, budget)?;
    let rp = latent.rows();
    let mut rhs = Matrix::zeros(rp, graph.vertex_count());
    for walk in &walks {
        let ty = walk_type_of(graph, walk);
        let lambda = walk_weight_from(&embeddings, w_w, &ty);
        let col = product_column(&embeddings, &ty).scale(lambda);
        let start = walk[0];
        for r in 0..rp {
            rhs.set(r, start, rhs.get(r, start) + col.get(r, 0));
        }
    }

    let mut worst = T::zero();
    for i in 0..graph.vertex_count() {
        let lhs = Matrix::from_vec(rp, 1, latent.col(i))?;
        let rhs_i = Matrix::from_vec(rp, 1, rhs.col(i))?;
        worst = worst.max(relative_residual(&lhs, &rhs_i, sc(1e-12)));
    }
    Ok(worst)
}

/// Max residual of the general-setting identity: `[W_g F_(n)]_i` against
/// the gated column product applied to the per-vertex walk statistics, and
/// the level embedding against the activated column sums. Pairwise mode.
pub fn verify_gated_identity<T: Scalar>(
    graph: &Graph,
    schema: &AttributeSchema,
    params: &AwareParams<T>,
    config: &AwareConfig,
    n: usize,
    budget: u64,
) -> Result<T> {
    require_pairwise(config)?;
    require_level(config, n)?;
    let trace = forward_trace(graph, schema, params, config)?;
    let latent = &trace.latents[n - 1];
    let rp = latent.rows();
    let w_g = match &params.w_g {
        Some(w_g) => w_g.clone(),
        None => Matrix::identity(rp),
    };
    let lhs = w_g.matmul(latent)?;

    let stats = walk_statistics(graph, n, true, budget)?;
    let per_vertex = stats.per_vertex.as_ref().expect("per-vertex stats");
    let embeddings = gated_embeddings(params, config, schema)?;
    let w_w = if config.use_ww { params.w_w.as_ref() } else { None };

    let mut worst = T::zero();
    for (i, vertex_counts) in per_vertex.iter().enumerate() {
        let mut rhs = Matrix::zeros(rp, 1);
        for (ty, &count) in vertex_counts {
            let lambda = walk_weight_from(&embeddings, w_w, ty);
            let col = w_g.matmul(&product_column(&embeddings, ty))?;
            rhs = rhs.add(&col.scale(lambda * sc(count as f64)))?;
        }
        let lhs_i = Matrix::from_vec(rp, 1, lhs.col(i))?;
        worst = worst.max(relative_residual(&lhs_i, &rhs, sc(1e-12)));
    }

    // The level embedding is the sum over vertices of the activated
    // pre-activation columns.
    let alpha = sc::<T>(config.effective_alpha());
    let f_n = lhs
        .map(|z| if z >= T::zero() { z } else { alpha * z })
        .row_sum();
    worst = worst.max(relative_residual(
        &trace.level_embeddings[n - 1],
        &f_n,
        sc(1e-12),
    ));
    Ok(worst)
}

/// The indistinguishable pair: two non-isomorphic 8-vertex trees, one
/// attribute with values {B = 0, A = 1}, that share the walk statistics up
/// to length 3 and hence every unweighted embedding up to level 3.
pub fn indistinguishable_pair() -> (Graph, Graph, AttributeSchema) {
    let schema = AttributeSchema::new(vec![2]);
    let mut attrs = vec![vec![0]; 8];
    attrs[1] = vec![1];
    let a = Graph::new(
        8,
        &[(0, 1), (0, 2), (2, 3), (3, 4), (0, 5), (5, 6), (6, 7)],
        attrs.clone(),
        None,
    )
    .expect("figure graph a");
    let b = Graph::new(
        8,
        &[(5, 1), (0, 2), (2, 3), (3, 4), (0, 5), (5, 6), (6, 7)],
        attrs,
        None,
    )
    .expect("figure graph b");
    (a, b, schema)
}

/// A constructed pair with identical walk statistics up to length 3 but
/// *different degree multisets*: matching vertex counts, edge counts and
/// degree square sums are all it takes when every vertex carries the same
/// attribute.
pub fn walkstat_twin_pair() -> (Graph, Graph, AttributeSchema) {
    let schema = AttributeSchema::new(vec![1]);
    // Five-cycle with a chord plus an isolated vertex: degrees {3,3,2,2,2,0}.
    let a = Graph::new(
        6,
        &[(0, 1), (1, 2), (2, 3), (3, 4), (4, 0), (0, 2)],
        vec![vec![0]; 6],
        None,
    )
    .expect("twin graph a");
    // Hub of degree 4 with a triangle edge and a pendant path: degrees
    // {4,2,2,2,1,1}. Same vertex count, 6 edges, degree squares sum to 30.
    let b = Graph::new(
        6,
        &[(0, 1), (0, 2), (0, 3), (0, 4), (1, 2), (3, 5)],
        vec![vec![0]; 6],
        None,
    )
    .expect("twin graph b");
    (a, b, schema)
}

/// Exact isomorphism test (backtracking with degree and attribute
/// pruning); only intended for the desk-scale verification graphs.
pub fn graphs_isomorphic(a: &Graph, b: &Graph) -> bool {
    if a.vertex_count() != b.vertex_count() || a.edge_count() != b.edge_count() {
        return false;
    }
    let m = a.vertex_count();
    let mut mapping = vec![usize::MAX; m];
    let mut used = vec![false; m];
    fn compatible(a: &Graph, b: &Graph, u: usize, v: usize) -> bool {
        a.degree(u) == b.degree(v) && a.attributes(u) == b.attributes(v)
    }
    fn assign(
        a: &Graph,
        b: &Graph,
        u: usize,
        mapping: &mut Vec<usize>,
        used: &mut Vec<bool>,
    ) -> bool {
        let m = a.vertex_count();
        if u == m {
            return true;
        }
        for v in 0..m {
            if used[v] || !compatible(a, b, u, v) {
                continue;
            }
            let consistent = (0..u).all(|prev| {
                a.has_edge(prev, u) == b.has_edge(mapping[prev], v)
            });
            if !consistent {
                continue;
            }
            mapping[u] = v;
            used[v] = true;
            if assign(a, b, u + 1, mapping, used) {
                return true;
            }
            mapping[u] = usize::MAX;
            used[v] = false;
        }
        false
    }
    assign(a, b, 0, &mut mapping, &mut used)
}
