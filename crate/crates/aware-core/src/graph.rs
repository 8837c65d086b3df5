//! Graph data model: discrete vertex attributes, one-hot encodings,
//! degree featurization and deterministic dataset splits.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::tensor::Matrix;

/// Discrete attribute layout: `C` attributes with `k_j` values each,
/// one-hot width `K = sum k_j`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AttributeSchema {
    pub value_counts: Vec<usize>,
}

impl AttributeSchema {
    pub fn new(value_counts: Vec<usize>) -> Self {
        AttributeSchema { value_counts }
    }

    pub fn attribute_count(&self) -> usize {
        self.value_counts.len()
    }

    pub fn total_width(&self) -> usize {
        self.value_counts.iter().sum()
    }

    /// Offset of attribute `j`'s one-hot block.
    pub fn block_offset(&self, j: usize) -> usize {
        self.value_counts[..j].iter().sum()
    }

    /// One-hot column indices (into the `K`-wide layout) selected by an
    /// attribute tuple.
    pub fn selected_columns(&self, values: &[usize]) -> Result<Vec<usize>> {
        if values.len() != self.attribute_count() {
            return Err(Error::Schema(format!(
                "expected {} attribute values, got {}",
                self.attribute_count(),
                values.len()
            )));
        }
        let mut cols = Vec::with_capacity(values.len());
        let mut offset = 0;
        for (j, (&v, &k)) in values.iter().zip(self.value_counts.iter()).enumerate() {
            if v >= k {
                return Err(Error::Schema(format!(
                    "attribute {} value {} out of range (k = {})",
                    j, v, k
                )));
            }
            cols.push(offset + v);
            offset += k;
        }
        Ok(cols)
    }

    /// All attribute tuples in lexicographic order.
    pub fn all_value_tuples(&self) -> Vec<Vec<usize>> {
        let mut out = vec![Vec::new()];
        for &k in &self.value_counts {
            let mut next = Vec::with_capacity(out.len() * k);
            for prefix in &out {
                for v in 0..k {
                    let mut t = prefix.clone();
                    t.push(v);
                    next.push(t);
                }
            }
            out = next;
        }
        out
    }

    /// Number of distinct attribute tuples (`K_C = prod k_j`).
    pub fn tuple_count(&self) -> usize {
        self.value_counts.iter().product()
    }
}

/// Undirected graph with per-vertex discrete attributes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Graph {
    vertex_count: usize,
    /// Sorted, deduplicated neighbor lists; symmetric, no self-loops.
    neighbors: Vec<Vec<usize>>,
    /// Per-vertex attribute tuples (each of length `C`).
    attributes: Vec<Vec<usize>>,
    pub label: Option<f64>,
}

impl Graph {
    pub fn new(
        vertex_count: usize,
        edges: &[(usize, usize)],
        attributes: Vec<Vec<usize>>,
        label: Option<f64>,
    ) -> Result<Self> {
        if attributes.len() != vertex_count {
            return Err(Error::Schema(format!(
                "expected {} attribute tuples, got {}",
                vertex_count,
                attributes.len()
            )));
        }
        let mut neighbors = vec![Vec::new(); vertex_count];
        for &(a, b) in edges {
            if a >= vertex_count || b >= vertex_count {
                return Err(Error::Schema(format!(
                    "edge ({}, {}) out of range for {} vertices",
                    a, b, vertex_count
                )));
            }
            if a == b {
                continue; // self-loops dropped
            }
            neighbors[a].push(b);
            neighbors[b].push(a);
        }
        for list in &mut neighbors {
            list.sort_unstable();
            list.dedup();
        }
        Ok(Graph {
            vertex_count,
            neighbors,
            attributes,
            label,
        })
    }

    pub fn vertex_count(&self) -> usize {
        self.vertex_count
    }

    pub fn neighbors(&self, i: usize) -> &[usize] {
        &self.neighbors[i]
    }

    pub fn degree(&self, i: usize) -> usize {
        self.neighbors[i].len()
    }

    pub fn degrees(&self) -> Vec<usize> {
        (0..self.vertex_count).map(|i| self.degree(i)).collect()
    }

    pub fn has_edge(&self, a: usize, b: usize) -> bool {
        self.neighbors[a].binary_search(&b).is_ok()
    }

    /// Undirected edge list with `u < v`.
    pub fn edges(&self) -> Vec<(usize, usize)> {
        let mut out = Vec::new();
        for u in 0..self.vertex_count {
            for &v in &self.neighbors[u] {
                if u < v {
                    out.push((u, v));
                }
            }
        }
        out
    }

    pub fn edge_count(&self) -> usize {
        self.neighbors.iter().map(|n| n.len()).sum::<usize>() / 2
    }

    pub fn attributes(&self, i: usize) -> &[usize] {
        &self.attributes[i]
    }

    pub fn attribute_rows(&self) -> &[Vec<usize>] {
        &self.attributes
    }

    /// Dense 0/1 adjacency matrix.
    pub fn adjacency<T: Scalar>(&self) -> Matrix<T> {
        let m = self.vertex_count;
        let mut a = Matrix::zeros(m, m);
        for u in 0..m {
            for &v in &self.neighbors[u] {
                a.set(u, v, T::one());
            }
        }
        a
    }

    /// Per-vertex one-hot matrix `H` (`K x m`), column i = `h_i`.
    pub fn onehot<T: Scalar>(&self, schema: &AttributeSchema) -> Result<Matrix<T>> {
        one_hot(&self.attributes, schema)
    }

    pub fn conforms_to(&self, schema: &AttributeSchema) -> bool {
        self.attributes.iter().all(|tuple| {
            tuple.len() == schema.attribute_count()
                && tuple
                    .iter()
                    .zip(schema.value_counts.iter())
                    .all(|(&v, &k)| v < k)
        })
    }

    /// Relabel vertices: `perm[i]` is the new index of old vertex `i`.
    pub fn permuted(&self, perm: &[usize]) -> Result<Graph> {
        if perm.len() != self.vertex_count {
            return Err(Error::Contract("permutation length mismatch".into()));
        }
        let mut attributes = vec![Vec::new(); self.vertex_count];
        for (old, &new) in perm.iter().enumerate() {
            attributes[new] = self.attributes[old].clone();
        }
        let edges: Vec<(usize, usize)> = self
            .edges()
            .iter()
            .map(|&(u, v)| (perm[u], perm[v]))
            .collect();
        Graph::new(self.vertex_count, &edges, attributes, self.label)
    }
}

/// One-hot encode attribute tuples into a `K x m` binary matrix; column i
/// is the concatenation of the per-attribute one-hot blocks.
pub fn one_hot<T: Scalar>(values: &[Vec<usize>], schema: &AttributeSchema) -> Result<Matrix<T>> {
    let k = schema.total_width();
    let m = values.len();
    let mut h = Matrix::zeros(k, m);
    for (i, tuple) in values.iter().enumerate() {
        for col in schema.selected_columns(tuple)? {
            h.set(col, i, T::one());
        }
    }
    Ok(h)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TaskKind {
    BinaryClassification,
    MulticlassClassification,
    Regression,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    pub schema: AttributeSchema,
    pub graphs: Vec<Graph>,
    pub task_kind: TaskKind,
}

impl Dataset {
    pub fn len(&self) -> usize {
        self.graphs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.graphs.is_empty()
    }

    pub fn class_count(&self) -> usize {
        self.graphs
            .iter()
            .filter_map(|g| g.label)
            .fold(0usize, |acc, l| acc.max(l as usize + 1))
    }

    pub fn validate(&self) -> Result<()> {
        for (i, g) in self.graphs.iter().enumerate() {
            if !g.conforms_to(&self.schema) {
                return Err(Error::Schema(format!("graph {} violates the schema", i)));
            }
            if g.label.is_none() {
                return Err(Error::Schema(format!("graph {} is missing a label", i)));
            }
        }
        Ok(())
    }
}

/// Replace the attributes of a graph with its clamped vertex degrees:
/// a single attribute with `cap + 1` values, vertex i getting
/// `min(degree(i), cap)`.
pub fn degree_featurize(graph: &Graph, cap: usize) -> Graph {
    let attributes = (0..graph.vertex_count())
        .map(|i| vec![graph.degree(i).min(cap)])
        .collect();
    Graph {
        vertex_count: graph.vertex_count,
        neighbors: graph.neighbors.clone(),
        attributes,
        label: graph.label,
    }
}

/// Default clamp for degree featurization of social-network graphs.
pub const DEFAULT_DEGREE_CAP: usize = 64;

/// Degree-featurize a whole dataset; the schema becomes `C = 1`,
/// `k_1 = cap + 1`.
pub fn degree_featurize_dataset(dataset: &Dataset, cap: usize) -> Dataset {
    Dataset {
        schema: AttributeSchema::new(vec![cap + 1]),
        graphs: dataset
            .graphs
            .iter()
            .map(|g| degree_featurize(g, cap))
            .collect(),
        task_kind: dataset.task_kind,
    }
}

/// Disjoint train/validation/test indices plus the seed that produced them.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitSpec {
    pub train_idx: Vec<usize>,
    pub val_idx: Vec<usize>,
    pub test_idx: Vec<usize>,
    pub seed: u64,
}

/// Seeded uniform shuffle followed by contiguous slicing. Sizes are
/// `floor(r0 * N)`, `floor(r1 * N)`, remainder.
pub fn split_dataset(dataset: &Dataset, ratios: (f64, f64, f64), seed: u64) -> Result<SplitSpec> {
    let n = dataset.len();
    if n < 3 {
        return Err(Error::Split(format!(
            "need at least 3 graphs to split, got {}",
            n
        )));
    }
    let total = ratios.0 + ratios.1 + ratios.2;
    if (total - 1.0).abs() > 1e-9 {
        return Err(Error::Split(format!("ratios sum to {}, expected 1", total)));
    }
    let mut order: Vec<usize> = (0..n).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    order.shuffle(&mut rng);
    let n_train = (ratios.0 * n as f64).floor() as usize;
    let n_val = (ratios.1 * n as f64).floor() as usize;
    Ok(SplitSpec {
        train_idx: order[..n_train].to_vec(),
        val_idx: order[n_train..n_train + n_val].to_vec(),
        test_idx: order[n_train + n_val..].to_vec(),
        seed,
    })
}
