//! Interpretation of a trained model: per-edge importance from the final
//! attention matrix, substructure extraction by thresholding, and the
//! alignment between the graph-level weighting and a linear predictor.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::graph::Graph;
use crate::model::{AwareConfig, AwareParams, ForwardTrace, ScoreMode};
use crate::tensor::Matrix;

/// Symmetric per-edge scores from the last attention matrix:
/// `S_(T)[i][j] + S_(T)[j][i]` for each edge i-j. In softmax mode each
/// score lies in [0, 2].
#[derive(Debug, Clone, Serialize)]
pub struct EdgeImportance {
    /// `(u, v, score)` with `u < v`, one entry per edge.
    pub edges: Vec<(usize, usize, f64)>,
    pub threshold: f64,
}

pub const DEFAULT_IMPORTANCE_THRESHOLD: f64 = 1.0;

pub fn edge_importance(trace: &ForwardTrace<f64>, graph: &Graph) -> Result<EdgeImportance> {
    if trace.attentions.is_empty() {
        return Err(Error::Contract(
            "edge importance needs a forward pass with walk length >= 2".into(),
        ));
    }
    if trace.score_mode != ScoreMode::Softmax || !trace.used_attention {
        return Err(Error::Contract(
            "edge importance is defined for the softmax attention mode".into(),
        ));
    }
    let s_t = trace.attentions.last().expect("non-empty attentions");
    if s_t.rows() != graph.vertex_count() {
        return Err(Error::Contract(
            "trace and graph vertex counts disagree".into(),
        ));
    }
    let edges = graph
        .edges()
        .into_iter()
        .map(|(u, v)| (u, v, s_t.get(u, v) + s_t.get(v, u)))
        .collect();
    Ok(EdgeImportance {
        edges,
        threshold: DEFAULT_IMPORTANCE_THRESHOLD,
    })
}

impl EdgeImportance {
    pub fn to_json(&self) -> Result<String> {
        #[derive(Serialize)]
        struct Edge {
            u: usize,
            v: usize,
            score: f64,
        }
        #[derive(Serialize)]
        struct Export {
            edges: Vec<Edge>,
            threshold: f64,
        }
        let export = Export {
            edges: self
                .edges
                .iter()
                .map(|&(u, v, score)| Edge { u, v, score })
                .collect(),
            threshold: self.threshold,
        };
        Ok(serde_json::to_string_pretty(&export)?)
    }

    /// DOT output with pen widths proportional to the scores.
    pub fn to_dot(&self, graph_name: &str) -> String {
        let mut out = format!("graph {graph_name} {{\n");
        for &(u, v, score) in &self.edges {
            out.push_str(&format!(
                "  {u} -- {v} [penwidth={:.4}, label=\"{:.3}\"];\n",
                (0.5 + 2.5 * score).max(0.1),
                score
            ));
        }
        out.push_str("}\n");
        out
    }
}

/// Subgraph kept by an importance threshold.
#[derive(Debug, Clone, Serialize)]
pub struct Substructure {
    pub edges: Vec<(usize, usize)>,
    pub vertices: Vec<usize>,
    /// Connected components of the kept subgraph.
    pub components: Vec<Vec<usize>>,
}

pub fn extract_substructure(
    graph: &Graph,
    importance: &EdgeImportance,
    threshold: f64,
) -> Substructure {
    let edges: Vec<(usize, usize)> = importance
        .edges
        .iter()
        .filter(|&&(_, _, score)| score >= threshold)
        .map(|&(u, v, _)| (u, v))
        .collect();
    let mut vertices: Vec<usize> = edges.iter().flat_map(|&(u, v)| [u, v]).collect();
    vertices.sort_unstable();
    vertices.dedup();

    // Union-find over the kept vertices.
    let mut parent: Vec<usize> = (0..graph.vertex_count()).collect();
    fn find(parent: &mut [usize], x: usize) -> usize {
        let mut root = x;
        while parent[root] != root {
            root = parent[root];
        }
        let mut cur = x;
        while parent[cur] != root {
            let next = parent[cur];
            parent[cur] = root;
            cur = next;
        }
        root
    }
    for &(u, v) in &edges {
        let (ru, rv) = (find(&mut parent, u), find(&mut parent, v));
        if ru != rv {
            parent[ru] = rv;
        }
    }
    let mut components: Vec<Vec<usize>> = Vec::new();
    let mut root_of: Vec<(usize, usize)> = vertices
        .iter()
        .map(|&v| (find(&mut parent, v), v))
        .collect();
    root_of.sort_unstable();
    let mut current_root = usize::MAX;
    for (root, v) in root_of {
        if root != current_root {
            components.push(Vec::new());
            current_root = root;
        }
        components.last_mut().expect("component started").push(v);
    }
    Substructure {
        edges,
        vertices,
        components,
    }
}

/// Top singular triples of a square matrix by power iteration on `A A^T`
/// with deflation. Returns `(sigma, left vector)` pairs, largest first.
pub fn top_left_singular(
    a: &Matrix<f64>,
    count: usize,
    tol: f64,
    max_iter: usize,
) -> Vec<(f64, Vec<f64>)> {
    let n = a.rows();
    let mut work = a.to_f64();
    let mut out = Vec::with_capacity(count);
    for round in 0..count.min(n) {
        // Deterministic start vector, varied per round.
        let mut u: Vec<f64> = (0..n)
            .map(|i| 1.0 + ((i * 31 + round * 17 + 7) % 97) as f64 / 97.0)
            .collect();
        normalize(&mut u);
        for _ in 0..max_iter {
            let v = matvec_t(&work, &u);
            let au = matvec(&work, &v);
            let norm = l2(&au);
            if norm < 1e-300 {
                break;
            }
            let next: Vec<f64> = au.iter().map(|x| x / norm).collect();
            let diff: f64 = next
                .iter()
                .zip(u.iter())
                .map(|(a, b)| (a - b) * (a - b))
                .sum::<f64>()
                .sqrt();
            u = next;
            if diff <= tol {
                break;
            }
        }
        let v = matvec_t(&work, &u);
        let sigma = l2(&v);
        out.push((sigma, u.clone()));
        if sigma > 1e-300 {
            // Deflate: work -= sigma * u * v_hat^T.
            let v_hat: Vec<f64> = v.iter().map(|x| x / sigma).collect();
            for (r, &ur) in u.iter().enumerate() {
                for (c, &vc) in v_hat.iter().enumerate() {
                    work.set(r, c, work.get(r, c) - sigma * ur * vc);
                }
            }
        }
    }
    out
}

fn matvec(a: &Matrix<f64>, x: &[f64]) -> Vec<f64> {
    (0..a.rows())
        .map(|r| a.row(r).iter().zip(x.iter()).map(|(m, v)| m * v).sum())
        .collect()
}

fn matvec_t(a: &Matrix<f64>, x: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; a.cols()];
    for (r, &xr) in x.iter().enumerate() {
        for (c, o) in out.iter_mut().enumerate() {
            *o += a.get(r, c) * xr;
        }
    }
    out
}

fn l2(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum::<f64>().sqrt()
}

fn normalize(x: &mut [f64]) {
    let norm = l2(x).max(1e-300);
    for v in x.iter_mut() {
        *v /= norm;
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b.iter()).map(|(x, y)| x * y).sum()
}

/// Eigenvalues of a symmetric matrix by cyclic Jacobi sweeps. Dense
/// reference for validating the power iteration.
pub fn jacobi_eigenvalues(sym: &Matrix<f64>) -> Vec<f64> {
    let n = sym.rows();
    assert_eq!(n, sym.cols(), "jacobi needs a square matrix");
    let mut a = sym.clone();
    for _sweep in 0..100 {
        let mut off = 0.0;
        for p in 0..n {
            for q in (p + 1)..n {
                off += a.get(p, q) * a.get(p, q);
            }
        }
        if off.sqrt() < 1e-14 {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = a.get(p, q);
                if apq.abs() < 1e-300 {
                    continue;
                }
                // Symmetric Schur rotation zeroing a[p][q].
                let tau = (a.get(q, q) - a.get(p, p)) / (2.0 * apq);
                let t = if tau >= 0.0 {
                    1.0 / (tau + (1.0 + tau * tau).sqrt())
                } else {
                    1.0 / (tau - (1.0 + tau * tau).sqrt())
                };
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = t * c;
                for k in 0..n {
                    let akp = a.get(k, p);
                    let akq = a.get(k, q);
                    a.set(k, p, c * akp - s * akq);
                    a.set(k, q, s * akp + c * akq);
                }
                for k in 0..n {
                    let apk = a.get(p, k);
                    let aqk = a.get(q, k);
                    a.set(p, k, c * apk - s * aqk);
                    a.set(q, k, s * apk + c * aqk);
                }
            }
        }
    }
    let mut eig: Vec<f64> = (0..n).map(|i| a.get(i, i)).collect();
    eig.sort_by(|x, y| y.partial_cmp(x).expect("finite eigenvalues"));
    eig
}

/// A labeled 2-D point in the alignment projection.
#[derive(Debug, Clone, Serialize)]
pub struct ProjectedPoint {
    pub label: String,
    pub x: f64,
    pub y: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct AlignmentReport {
    pub singular_values: Vec<f64>,
    /// `|cos(v_i, theta)|` for the tiled singular vectors, in order.
    pub cosines: Vec<f64>,
    /// Set when the top of the spectrum is (numerically) tied, in which
    /// case any orthonormal set spanning the tied space is valid.
    pub degenerate: bool,
    pub points: Vec<ProjectedPoint>,
}

pub const POWER_ITERATION_TOL: f64 = 1e-10;
pub const POWER_ITERATION_MAX: usize = 10_000;

/// Alignment between the graph-level weighting and a linear predictor:
/// top-3 left singular vectors of `W_g`, tiled across the walk levels,
/// compared against the predictor weights; plus a 2-D principal-component
/// projection of the tiled vectors, the predictor and sampled embeddings.
pub fn wg_alignment(
    params: &AwareParams<f64>,
    config: &AwareConfig,
    sampled_embeddings: &[Vec<f64>],
) -> Result<AlignmentReport> {
    if params.predictor.len() != 1 || params.output_dim() != 1 {
        return Err(Error::Contract(
            "alignment is defined for a linear single-output predictor".into(),
        ));
    }
    let rp = config.latent_dim();
    let t = config.t;
    let w_g = match &params.w_g {
        Some(w_g) => w_g.clone(),
        None => Matrix::identity(rp),
    };
    let theta: Vec<f64> = params.predictor[0].weight.row(0).to_vec();
    if theta.len() != t * rp {
        return Err(Error::Contract(format!(
            "predictor width {} does not match T * r' = {}",
            theta.len(),
            t * rp
        )));
    }

    let triples = top_left_singular(&w_g, 3.min(rp), POWER_ITERATION_TOL, POWER_ITERATION_MAX);
    let singular_values: Vec<f64> = triples.iter().map(|(s, _)| *s).collect();
    let degenerate = singular_values
        .windows(2)
        .any(|w| (w[0] - w[1]).abs() <= 1e-8 * singular_values[0].max(1e-12));

    let theta_norm = l2(&theta).max(1e-300);
    let mut tiled_vectors = Vec::with_capacity(triples.len());
    let mut cosines = Vec::with_capacity(triples.len());
    for (_, u) in &triples {
        let mut tiled = Vec::with_capacity(t * rp);
        for _ in 0..t {
            tiled.extend_from_slice(u);
        }
        normalize(&mut tiled);
        cosines.push((dot(&tiled, &theta) / theta_norm).abs());
        tiled_vectors.push(tiled);
    }

    // Pool the tiled vectors, the predictor direction and the sampled
    // embeddings, and project onto the top two principal components.
    let mut labels: Vec<String> = (0..tiled_vectors.len())
        .map(|i| format!("v{}", i + 1))
        .collect();
    let mut pooled = tiled_vectors;
    labels.push("theta".to_string());
    pooled.push(theta.iter().map(|x| x / theta_norm).collect());
    for e in sampled_embeddings {
        if e.len() != t * rp {
            return Err(Error::Contract(
                "sampled embedding width does not match T * r'".into(),
            ));
        }
        labels.push("embedding".to_string());
        pooled.push(e.clone());
    }
    let points = pca_project_2d(&pooled)
        .into_iter()
        .zip(labels)
        .map(|((x, y), label)| ProjectedPoint { label, x, y })
        .collect();

    Ok(AlignmentReport {
        singular_values,
        cosines,
        degenerate,
        points,
    })
}

/// Project points onto their top-2 principal components (centered).
fn pca_project_2d(points: &[Vec<f64>]) -> Vec<(f64, f64)> {
    let n = points.len();
    let d = points.first().map_or(0, Vec::len);
    if n == 0 || d == 0 {
        return Vec::new();
    }
    let mut mean = vec![0.0; d];
    for p in points {
        for (m, &x) in mean.iter_mut().zip(p.iter()) {
            *m += x;
        }
    }
    for m in mean.iter_mut() {
        *m /= n as f64;
    }
    let mut cov = Matrix::zeros(d, d);
    for p in points {
        let centered: Vec<f64> = p.iter().zip(mean.iter()).map(|(x, m)| x - m).collect();
        for r in 0..d {
            if centered[r] == 0.0 {
                continue;
            }
            for c in 0..d {
                cov.set(r, c, cov.get(r, c) + centered[r] * centered[c]);
            }
        }
    }
    let denom = (n.max(2) - 1) as f64;
    let cov = cov.scale(1.0 / denom);
    let pcs = top_left_singular(&cov, 2, POWER_ITERATION_TOL, POWER_ITERATION_MAX);
    points
        .iter()
        .map(|p| {
            let centered: Vec<f64> = p.iter().zip(mean.iter()).map(|(x, m)| x - m).collect();
            let x = pcs.first().map_or(0.0, |(_, pc)| dot(&centered, pc));
            let y = pcs.get(1).map_or(0.0, |(_, pc)| dot(&centered, pc));
            (x, y)
        })
        .collect()
}

/// CSV export of the projected alignment points.
pub fn alignment_to_csv(report: &AlignmentReport) -> String {
    let mut out = String::from("label,x,y\n");
    for p in &report.points {
        out.push_str(&format!("{},{},{}\n", p.label, p.x, p.y));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{AttributeSchema, TaskKind};
    use crate::model::{forward_trace, DenseLayer};
    use rand::Rng;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn softmax_model(t: usize, rp: usize, seed: u64) -> (AwareConfig, AwareParams<f64>, AttributeSchema) {
        let schema = AttributeSchema::new(vec![2]);
        let mut config = AwareConfig::new(t, rp, rp, TaskKind::BinaryClassification);
        config.use_wv = false;
        config.normalize();
        let params = AwareParams::init(&config, &schema, 2, seed).unwrap();
        (config, params, schema)
    }

    #[test]
    fn path_edge_scores_two() {
        let (config, params, schema) = softmax_model(2, 3, 1);
        let g = Graph::new(2, &[(0, 1)], vec![vec![0], vec![1]], Some(0.0)).unwrap();
        let trace = forward_trace(&g, &schema, &params, &config).unwrap();
        let imp = edge_importance(&trace, &g).unwrap();
        assert_eq!(imp.edges.len(), 1);
        let (u, v, score) = imp.edges[0];
        assert_eq!((u, v), (0, 1));
        assert!((score - 2.0).abs() < 1e-12);
        // Thresholding at 1.0 keeps the edge.
        let sub = extract_substructure(&g, &imp, 1.0);
        assert_eq!(sub.edges, vec![(0, 1)]);
    }

    #[test]
    fn zero_ww_scores_are_inverse_degrees() {
        let (config, mut params, schema) = softmax_model(2, 3, 2);
        params.w_w = Some(Matrix::zeros(3, 3));
        // Vertex 1 has 2 neighbors, vertex 2 has 3:
        // edge (1, 2) score = 1/2 + 1/3.
        let g = Graph::new(
            5,
            &[(0, 1), (1, 2), (2, 3), (2, 4)],
            vec![vec![0]; 5],
            Some(0.0),
        )
        .unwrap();
        let trace = forward_trace(&g, &schema, &params, &config).unwrap();
        let imp = edge_importance(&trace, &g).unwrap();
        let score = imp
            .edges
            .iter()
            .find(|&&(u, v, _)| (u, v) == (1, 2))
            .map(|&(_, _, s)| s)
            .unwrap();
        assert!((score - (0.5 + 1.0 / 3.0)).abs() < 1e-12);
    }

    #[test]
    fn importance_requires_attention_levels() {
        let (config, params, schema) = softmax_model(1, 3, 3);
        let g = Graph::new(2, &[(0, 1)], vec![vec![0], vec![1]], Some(0.0)).unwrap();
        let trace = forward_trace(&g, &schema, &params, &config).unwrap();
        assert!(edge_importance(&trace, &g).is_err());
    }

    #[test]
    fn incoming_scores_sum_to_one_per_vertex() {
        let (config, params, schema) = softmax_model(3, 4, 4);
        let g = Graph::new(
            6,
            &[(0, 1), (1, 2), (2, 3), (3, 4), (4, 0), (1, 3), (2, 5)],
            vec![vec![0], vec![1], vec![0], vec![1], vec![0], vec![1]],
            Some(0.0),
        )
        .unwrap();
        let trace = forward_trace(&g, &schema, &params, &config).unwrap();
        let s_t = trace.attentions.last().unwrap();
        for i in 0..6 {
            let incoming: f64 = (0..6).map(|j| s_t.get(j, i)).sum();
            assert!((incoming - 1.0).abs() < 1e-12, "vertex {i}: {incoming}");
        }
    }

    #[test]
    fn edge_scores_move_with_relabeling() {
        let (config, params, schema) = softmax_model(3, 4, 5);
        let g = Graph::new(
            5,
            &[(0, 1), (1, 2), (2, 3), (3, 4), (4, 0)],
            vec![vec![0], vec![1], vec![0], vec![1], vec![0]],
            Some(0.0),
        )
        .unwrap();
        let perm = vec![2, 4, 0, 1, 3];
        let gp = g.permuted(&perm).unwrap();
        let imp_a = edge_importance(&forward_trace(&g, &schema, &params, &config).unwrap(), &g).unwrap();
        let imp_b = edge_importance(&forward_trace(&gp, &schema, &params, &config).unwrap(), &gp).unwrap();
        for &(u, v, score) in &imp_a.edges {
            let (pu, pv) = (perm[u].min(perm[v]), perm[u].max(perm[v]));
            let other = imp_b
                .edges
                .iter()
                .find(|&&(a, b, _)| (a, b) == (pu, pv))
                .map(|&(_, _, s)| s)
                .unwrap();
            assert!((score - other).abs() < 1e-10);
        }
    }

    #[test]
    fn thresholds_bound_the_substructure() {
        let (config, params, schema) = softmax_model(2, 3, 6);
        let g = Graph::new(
            4,
            &[(0, 1), (1, 2), (2, 3)],
            vec![vec![0], vec![1], vec![0], vec![1]],
            Some(0.0),
        )
        .unwrap();
        let trace = forward_trace(&g, &schema, &params, &config).unwrap();
        let imp = edge_importance(&trace, &g).unwrap();
        let all = extract_substructure(&g, &imp, 0.0);
        assert_eq!(all.edges.len(), 3);
        let none = extract_substructure(&g, &imp, 2.0 + 1e-9);
        assert!(none.edges.is_empty());
        assert!(none.components.is_empty());
    }

    #[test]
    fn power_iteration_on_diagonal() {
        let w = Matrix::from_rows(&[
            vec![3.0, 0.0, 0.0],
            vec![0.0, 2.0, 0.0],
            vec![0.0, 0.0, 1.0],
        ]);
        let triples = top_left_singular(&w, 3, 1e-12, 10_000);
        assert!((triples[0].0 - 3.0).abs() < 1e-9);
        assert!((triples[1].0 - 2.0).abs() < 1e-9);
        assert!((triples[2].0 - 1.0).abs() < 1e-9);
        let u1 = &triples[0].1;
        assert!(u1[0].abs() > 1.0 - 1e-8);
    }

    #[test]
    fn power_iteration_matches_jacobi_reference() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        for _ in 0..5 {
            let mut w = Matrix::<f64>::zeros(10, 10);
            for e in 0..w.len() {
                w.data_mut()[e] = rng.gen_range(-1.0..1.0);
            }
            let triples = top_left_singular(&w, 3, 1e-12, 50_000);
            let gram = w.transpose().matmul(&w).unwrap();
            let eig = jacobi_eigenvalues(&gram);
            for (i, (sigma, _)) in triples.iter().enumerate() {
                let reference = eig[i].max(0.0).sqrt();
                assert!(
                    (sigma - reference).abs() <= 1e-8,
                    "sigma_{i}: {sigma} vs {reference}"
                );
            }
            // Orthonormal within tolerance.
            for i in 0..3 {
                assert!((l2(&triples[i].1) - 1.0).abs() < 1e-8);
                for j in (i + 1)..3 {
                    assert!(dot(&triples[i].1, &triples[j].1).abs() < 1e-6);
                }
            }
        }
    }

    fn linear_model(t: usize, rp: usize, w_g: Matrix<f64>, theta: Vec<f64>) -> (AwareConfig, AwareParams<f64>) {
        let mut config = AwareConfig::new(t, rp, rp, TaskKind::BinaryClassification);
        config.use_wv = false;
        config.linear_predictor = true;
        config.normalize();
        let params = AwareParams {
            w: Matrix::identity(rp),
            w_v: None,
            w_w: Some(Matrix::zeros(rp, rp)),
            w_g: Some(w_g),
            predictor: vec![DenseLayer {
                weight: Matrix::from_vec(1, theta.len(), theta).unwrap(),
                bias: Matrix::zeros(1, 1),
            }],
        };
        (config, params)
    }

    #[test]
    fn alignment_finds_dominant_direction() {
        let w_g = Matrix::from_rows(&[
            vec![5.0, 0.0, 0.0],
            vec![0.0, 1.0, 0.0],
            vec![0.0, 0.0, 0.5],
        ]);
        // theta tiled along e_1 across two levels.
        let theta = vec![1.0, 0.0, 0.0, 1.0, 0.0, 0.0];
        let (config, params) = linear_model(2, 3, w_g, theta);
        let report = wg_alignment(&params, &config, &[]).unwrap();
        assert!(!report.degenerate);
        assert!(report.cosines[0] > 1.0 - 1e-8, "cos {}", report.cosines[0]);
    }

    #[test]
    fn alignment_flags_degenerate_spectrum() {
        let (config, params) = linear_model(2, 3, Matrix::identity(3), vec![0.5; 6]);
        let report = wg_alignment(&params, &config, &[]).unwrap();
        assert!(report.degenerate);
    }

    #[test]
    fn alignment_requires_linear_predictor() {
        let schema = AttributeSchema::new(vec![2]);
        let config = AwareConfig::new(2, 3, 3, TaskKind::BinaryClassification);
        let params = AwareParams::init(&config, &schema, 2, 0).unwrap();
        assert!(wg_alignment(&params, &config, &[]).is_err());
    }

    #[test]
    fn pca_projection_covers_all_points() {
        let (config, params) = linear_model(2, 3, Matrix::identity(3), vec![0.5; 6]);
        let embeddings: Vec<Vec<f64>> = (0..4).map(|i| vec![i as f64; 6]).collect();
        let report = wg_alignment(&params, &config, &embeddings).unwrap();
        assert_eq!(report.points.len(), 3 + 1 + 4);
        let csv = alignment_to_csv(&report);
        assert!(csv.starts_with("label,x,y\n"));
        assert_eq!(csv.lines().count(), 1 + 8);
    }
}
