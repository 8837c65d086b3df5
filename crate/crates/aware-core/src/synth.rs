//! Synthetic datasets: random attributed graphs, a planted-motif
//! classification task for interpretability checks, and a task whose
//! labels are a linear function of the walk statistics.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::Result;
use crate::graph::{AttributeSchema, Dataset, Graph, TaskKind};
use crate::oracle::{all_walk_types, walk_statistics, DEFAULT_BUDGET};

/// Erdos-Renyi-style attributed graph with uniform attribute values.
pub fn random_graph(
    rng: &mut ChaCha8Rng,
    vertices: usize,
    edge_prob: f64,
    schema: &AttributeSchema,
) -> Graph {
    let mut edges = Vec::new();
    for u in 0..vertices {
        for v in (u + 1)..vertices {
            if rng.gen_bool(edge_prob) {
                edges.push((u, v));
            }
        }
    }
    let attrs = (0..vertices)
        .map(|_| {
            schema
                .value_counts
                .iter()
                .map(|&k| rng.gen_range(0..k))
                .collect()
        })
        .collect();
    Graph::new(vertices, &edges, attrs, None).expect("random graph")
}

/// Planted-motif task: every graph contains three marker vertices
/// (attribute value 2); positives close them into a triangle, negatives
/// keep them mutually unconnected. Background vertices take values {0, 1}
/// and background edges avoid marker-marker pairs, so the attribute
/// histogram alone cannot separate the classes but the marker-marker walk
/// counts can.
pub struct MotifDataset {
    pub dataset: Dataset,
    /// Per graph, the planted motif edges (empty for negatives).
    pub motif_edges: Vec<Vec<(usize, usize)>>,
}

pub const MOTIF_MARKER: usize = 2;

pub fn planted_motif_dataset(graphs: usize, seed: u64) -> MotifDataset {
    let schema = AttributeSchema::new(vec![3]);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(graphs);
    let mut motif_edges = Vec::with_capacity(graphs);
    for index in 0..graphs {
        let positive = index % 2 == 0;
        let m = rng.gen_range(8..=12);
        let markers = [0usize, 1, 2];
        let mut edges = Vec::new();
        for u in 0..m {
            for v in (u + 1)..m {
                let both_markers = markers.contains(&u) && markers.contains(&v);
                if both_markers {
                    continue;
                }
                if rng.gen_bool(0.25) {
                    edges.push((u, v));
                }
            }
        }
        let triangle = vec![(0, 1), (0, 2), (1, 2)];
        if positive {
            edges.extend_from_slice(&triangle);
        }
        let attrs = (0..m)
            .map(|v| {
                if markers.contains(&v) {
                    vec![MOTIF_MARKER]
                } else {
                    vec![rng.gen_range(0..2)]
                }
            })
            .collect();
        let label = if positive { 1.0 } else { 0.0 };
        out.push(Graph::new(m, &edges, attrs, Some(label)).expect("motif graph"));
        motif_edges.push(if positive { triangle } else { Vec::new() });
    }
    MotifDataset {
        dataset: Dataset {
            schema,
            graphs: out,
            task_kind: TaskKind::BinaryClassification,
        },
        motif_edges,
    }
}

/// Flatten the walk statistics of lengths 1..=t into a dense vector in
/// lexicographic type order.
pub fn walk_statistics_vector(
    graph: &Graph,
    schema: &AttributeSchema,
    t: usize,
) -> Result<Vec<f64>> {
    let mut out = Vec::new();
    for n in 1..=t {
        let stats = walk_statistics(graph, n, false, DEFAULT_BUDGET)?;
        for ty in all_walk_types(schema, n, DEFAULT_BUDGET)? {
            out.push(*stats.counts.get(&ty).unwrap_or(&0) as f64);
        }
    }
    Ok(out)
}

/// Binary labels from a sparse linear functional of the walk statistics:
/// `beta` has `sparsity` nonzero entries over the length <= t walk types,
/// graphs are ranked by `<beta, c_[t]>` and the middle fifth is discarded
/// so the two halves are separated by a margin.
pub fn linear_walk_label_dataset(graphs: usize, seed: u64, t: usize, sparsity: usize) -> Result<Dataset> {
    let schema = AttributeSchema::new(vec![3]);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let pool = graphs + graphs.div_ceil(4);
    let raw: Vec<Graph> = (0..pool)
        .map(|_| {
            let m = rng.gen_range(6..=10);
            random_graph(&mut rng, m, 0.35, &schema)
        })
        .collect();
    let width: usize = (1..=t).map(|n| schema.tuple_count().pow(n as u32)).sum();
    let mut beta = vec![0.0f64; width];
    for _ in 0..sparsity.max(1) {
        let j = rng.gen_range(0..width);
        let magnitude = rng.gen_range(0.5..1.5);
        beta[j] = if rng.gen_bool(0.5) { magnitude } else { -magnitude };
    }
    let mut scored: Vec<(f64, Graph)> = raw
        .into_iter()
        .map(|g| {
            let c = walk_statistics_vector(&g, &schema, t)?;
            let score: f64 = c.iter().zip(beta.iter()).map(|(a, b)| a * b).sum();
            Ok((score, g))
        })
        .collect::<Result<_>>()?;
    scored.sort_by(|a, b| a.0.partial_cmp(&b.0).expect("finite scores"));
    let half = graphs / 2;
    let mut selected = Vec::with_capacity(graphs);
    for (i, (_, mut g)) in scored.drain(..half).enumerate() {
        let _ = i;
        g.label = Some(0.0);
        selected.push(g);
    }
    let upper = scored.split_off(scored.len() - (graphs - half));
    for (_, mut g) in upper {
        g.label = Some(1.0);
        selected.push(g);
    }
    Ok(Dataset {
        schema,
        graphs: selected,
        task_kind: TaskKind::BinaryClassification,
    })
}

/// Degree-driven social-style task: label 1 when the graph's edge density
/// is above the cohort median. Used as a pipeline smoke check where real
/// social-network data is unavailable.
pub fn synthetic_social_dataset(graphs: usize, seed: u64) -> Dataset {
    let schema = AttributeSchema::new(vec![1]);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut raw: Vec<Graph> = Vec::with_capacity(graphs);
    let mut densities = Vec::with_capacity(graphs);
    for _ in 0..graphs {
        let m = rng.gen_range(10..=18);
        let p = rng.gen_range(0.12..0.5);
        let g = random_graph(&mut rng, m, p, &schema);
        let pairs = (m * (m - 1) / 2) as f64;
        densities.push(g.edge_count() as f64 / pairs);
        raw.push(g);
    }
    let mut sorted = densities.clone();
    sorted.sort_by(|a, b| a.partial_cmp(b).expect("finite densities"));
    let median = sorted[sorted.len() / 2];
    for (g, &d) in raw.iter_mut().zip(densities.iter()) {
        g.label = Some(if d > median { 1.0 } else { 0.0 });
    }
    Dataset {
        schema,
        graphs: raw,
        task_kind: TaskKind::BinaryClassification,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oracle::WalkType;

    #[test]
    fn motif_dataset_is_balanced_and_marked() {
        let MotifDataset {
            dataset,
            motif_edges,
        } = planted_motif_dataset(20, 7);
        assert_eq!(dataset.len(), 20);
        let positives = dataset
            .graphs
            .iter()
            .filter(|g| g.label == Some(1.0))
            .count();
        assert_eq!(positives, 10);
        for (g, motif) in dataset.graphs.iter().zip(motif_edges.iter()) {
            let positive = g.label == Some(1.0);
            assert_eq!(positive, !motif.is_empty());
            for &(u, v) in motif {
                assert!(g.has_edge(u, v));
            }
            if !positive {
                // No marker-marker edges in negatives.
                for &(u, v) in &[(0, 1), (0, 2), (1, 2)] {
                    assert!(!g.has_edge(u, v));
                }
            }
        }
    }

    #[test]
    fn motif_marker_walk_pairs_separate_classes() {
        let MotifDataset { dataset, .. } = planted_motif_dataset(30, 3);
        let marker_pair = WalkType(vec![vec![MOTIF_MARKER], vec![MOTIF_MARKER]]);
        for g in &dataset.graphs {
            let stats = walk_statistics(g, 2, false, DEFAULT_BUDGET).unwrap();
            let count = *stats.counts.get(&marker_pair).unwrap_or(&0);
            if g.label == Some(1.0) {
                assert_eq!(count, 6);
            } else {
                assert_eq!(count, 0);
            }
        }
    }

    #[test]
    fn linear_task_is_balanced_and_deterministic() {
        let a = linear_walk_label_dataset(24, 5, 3, 2).unwrap();
        let b = linear_walk_label_dataset(24, 5, 3, 2).unwrap();
        assert_eq!(a, b);
        let ones = a.graphs.iter().filter(|g| g.label == Some(1.0)).count();
        assert!((8..=16).contains(&ones), "unbalanced: {ones} positives");
    }
}
