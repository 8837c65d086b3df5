//! Dataset ingestion: TUDataset plain-text directories and a JSON graph
//! format for data featurized elsewhere.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{AttributeSchema, Dataset, Graph, TaskKind};

fn read_lines(path: &Path) -> Result<Vec<String>> {
    let content = fs::read_to_string(path).map_err(|_| Error::MissingFile {
        file: path.display().to_string(),
    })?;
    Ok(content
        .lines()
        .map(|l| l.trim().to_string())
        .filter(|l| !l.is_empty())
        .collect())
}

/// Load a TUDataset-format directory: `<name>_A.txt` (comma-separated
/// 1-based edge pairs), `<name>_graph_indicator.txt`,
/// `<name>_graph_labels.txt`, and optionally `<name>_node_labels.txt`.
///
/// Edges are symmetrized and deduplicated, self-loops dropped, integral
/// labels remapped to 0-based contiguous class indices. When node labels
/// are absent the graphs carry no attributes and the caller must
/// featurize (e.g. [`crate::graph::degree_featurize_dataset`]).
pub fn load_tudataset(directory: &Path, name: &str) -> Result<Dataset> {
    let file = |suffix: &str| directory.join(format!("{name}_{suffix}.txt"));

    let indicator_path = file("graph_indicator");
    let indicator = read_lines(&indicator_path)?;
    let mut vertex_graph = Vec::with_capacity(indicator.len());
    for (lineno, line) in indicator.iter().enumerate() {
        let gid: usize = line.parse().map_err(|_| Error::Format {
            file: indicator_path.display().to_string(),
            line: lineno + 1,
            message: format!("bad graph id {:?}", line),
        })?;
        if gid == 0 {
            return Err(Error::Format {
                file: indicator_path.display().to_string(),
                line: lineno + 1,
                message: "graph ids are 1-based".into(),
            });
        }
        vertex_graph.push(gid - 1);
    }
    let graph_count = vertex_graph.iter().copied().max().map_or(0, |g| g + 1);

    // Global 1-based vertex id -> (graph, local index).
    let mut local_index = Vec::with_capacity(vertex_graph.len());
    let mut sizes = vec![0usize; graph_count];
    for &g in &vertex_graph {
        local_index.push(sizes[g]);
        sizes[g] += 1;
    }

    let labels_path = file("graph_labels");
    let label_lines = read_lines(&labels_path)?;
    if label_lines.len() != graph_count {
        return Err(Error::Format {
            file: labels_path.display().to_string(),
            line: label_lines.len(),
            message: format!(
                "expected {} labels, found {}",
                graph_count,
                label_lines.len()
            ),
        });
    }
    let mut raw_labels = Vec::with_capacity(graph_count);
    for (lineno, line) in label_lines.iter().enumerate() {
        let v: f64 = line.parse().map_err(|_| Error::Format {
            file: labels_path.display().to_string(),
            line: lineno + 1,
            message: format!("bad label {:?}", line),
        })?;
        raw_labels.push(v);
    }

    let edges_path = file("A");
    let edge_lines = read_lines(&edges_path)?;
    let mut edges: Vec<Vec<(usize, usize)>> = vec![Vec::new(); graph_count];
    for (lineno, line) in edge_lines.iter().enumerate() {
        let mut parts = line.split(',').map(str::trim);
        let parse = |s: Option<&str>| -> Result<usize> {
            s.and_then(|t| t.parse::<usize>().ok())
                .ok_or_else(|| Error::Format {
                    file: edges_path.display().to_string(),
                    line: lineno + 1,
                    message: format!("bad edge line {:?}", line),
                })
        };
        let a = parse(parts.next())?;
        let b = parse(parts.next())?;
        if a == 0 || b == 0 || a > vertex_graph.len() || b > vertex_graph.len() {
            return Err(Error::Format {
                file: edges_path.display().to_string(),
                line: lineno + 1,
                message: format!("vertex id out of range in {:?}", line),
            });
        }
        let (ga, gb) = (vertex_graph[a - 1], vertex_graph[b - 1]);
        if ga != gb {
            return Err(Error::Format {
                file: edges_path.display().to_string(),
                line: lineno + 1,
                message: format!(
                    "edge ({}, {}) crosses graphs {} and {}",
                    a,
                    b,
                    ga + 1,
                    gb + 1
                ),
            });
        }
        edges[ga].push((local_index[a - 1], local_index[b - 1]));
    }

    // Optional node labels become a single attribute, k_1 = max + 1
    // across the whole dataset.
    let node_labels_path = file("node_labels");
    let (attributes, schema) = if node_labels_path.exists() {
        let lines = read_lines(&node_labels_path)?;
        if lines.len() != vertex_graph.len() {
            return Err(Error::Format {
                file: node_labels_path.display().to_string(),
                line: lines.len(),
                message: format!(
                    "expected {} node labels, found {}",
                    vertex_graph.len(),
                    lines.len()
                ),
            });
        }
        let mut values = Vec::with_capacity(lines.len());
        for (lineno, line) in lines.iter().enumerate() {
            let v: usize = line.parse().map_err(|_| Error::Format {
                file: node_labels_path.display().to_string(),
                line: lineno + 1,
                message: format!("bad node label {:?}", line),
            })?;
            values.push(v);
        }
        let width = values.iter().copied().max().map_or(1, |v| v + 1);
        let mut per_graph: Vec<Vec<Vec<usize>>> =
            sizes.iter().map(|&s| Vec::with_capacity(s)).collect();
        for (v, &g) in vertex_graph.iter().enumerate() {
            per_graph[g].push(vec![values[v]]);
        }
        (per_graph, AttributeSchema::new(vec![width]))
    } else {
        (
            sizes.iter().map(|&s| vec![Vec::new(); s]).collect(),
            AttributeSchema::new(Vec::new()),
        )
    };

    // Integral labels are remapped to contiguous 0-based classes.
    let integral = raw_labels.iter().all(|l| l.fract() == 0.0);
    let (labels, task_kind) = if integral {
        let mut distinct: Vec<i64> = raw_labels.iter().map(|&l| l as i64).collect();
        distinct.sort_unstable();
        distinct.dedup();
        let index: BTreeMap<i64, usize> = distinct
            .iter()
            .enumerate()
            .map(|(i, &l)| (l, i))
            .collect();
        let labels: Vec<f64> = raw_labels
            .iter()
            .map(|&l| index[&(l as i64)] as f64)
            .collect();
        let kind = if distinct.len() <= 2 {
            TaskKind::BinaryClassification
        } else {
            TaskKind::MulticlassClassification
        };
        (labels, kind)
    } else {
        (raw_labels, TaskKind::Regression)
    };

    let mut graphs = Vec::with_capacity(graph_count);
    for g in 0..graph_count {
        graphs.push(Graph::new(
            sizes[g],
            &edges[g],
            attributes[g].clone(),
            Some(labels[g]),
        )?);
    }
    Ok(Dataset {
        schema,
        graphs,
        task_kind,
    })
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct JsonSchema {
    value_counts: Vec<usize>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct JsonGraph {
    n: usize,
    edges: Vec<[usize; 2]>,
    attrs: Vec<Vec<usize>>,
    label: f64,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct JsonDataset {
    schema: JsonSchema,
    graphs: Vec<JsonGraph>,
    #[serde(skip_serializing_if = "Option::is_none")]
    task: Option<TaskKind>,
}

fn infer_task_kind(labels: &[f64]) -> TaskKind {
    if labels.iter().any(|l| l.fract() != 0.0) {
        return TaskKind::Regression;
    }
    let mut distinct: Vec<i64> = labels.iter().map(|&l| l as i64).collect();
    distinct.sort_unstable();
    distinct.dedup();
    if distinct.len() <= 2 {
        TaskKind::BinaryClassification
    } else {
        TaskKind::MulticlassClassification
    }
}

/// Parse the JSON graph format:
/// `{"schema": {"value_counts": [...]}, "graphs": [{"n", "edges", "attrs", "label"}], "task"?}`.
/// Edges are 0-based and symmetrized on load.
pub fn dataset_from_json(json: &str) -> Result<Dataset> {
    let parsed: JsonDataset = serde_json::from_str(json)?;
    let schema = AttributeSchema::new(parsed.schema.value_counts);
    let mut graphs = Vec::with_capacity(parsed.graphs.len());
    let mut labels = Vec::with_capacity(parsed.graphs.len());
    for jg in &parsed.graphs {
        let edges: Vec<(usize, usize)> = jg.edges.iter().map(|e| (e[0], e[1])).collect();
        let g = Graph::new(jg.n, &edges, jg.attrs.clone(), Some(jg.label))?;
        if !g.conforms_to(&schema) {
            return Err(Error::Schema(
                "graph attributes violate the declared schema".into(),
            ));
        }
        labels.push(jg.label);
        graphs.push(g);
    }
    let task_kind = parsed.task.unwrap_or_else(|| infer_task_kind(&labels));
    Ok(Dataset {
        schema,
        graphs,
        task_kind,
    })
}

pub fn dataset_to_json(dataset: &Dataset) -> Result<String> {
    let graphs = dataset
        .graphs
        .iter()
        .map(|g| JsonGraph {
            n: g.vertex_count(),
            edges: g.edges().iter().map(|&(u, v)| [u, v]).collect(),
            attrs: g.attribute_rows().to_vec(),
            label: g.label.unwrap_or(f64::NAN),
        })
        .collect();
    let out = JsonDataset {
        schema: JsonSchema {
            value_counts: dataset.schema.value_counts.clone(),
        },
        graphs,
        task: Some(dataset.task_kind),
    };
    Ok(serde_json::to_string_pretty(&out)?)
}

pub fn load_json_dataset(path: &Path) -> Result<Dataset> {
    let content = fs::read_to_string(path).map_err(|_| Error::MissingFile {
        file: path.display().to_string(),
    })?;
    dataset_from_json(&content)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    fn write_file(dir: &Path, name: &str, content: &str) {
        let mut f = fs::File::create(dir.join(name)).unwrap();
        f.write_all(content.as_bytes()).unwrap();
    }

    fn toy_dir() -> tempfile::TempDir {
        let dir = tempfile::tempdir().unwrap();
        write_file(dir.path(), "toy_A.txt", "1, 2\n2, 1\n3, 4\n4, 3\n3, 5\n5, 3\n");
        write_file(dir.path(), "toy_graph_indicator.txt", "1\n1\n2\n2\n2\n");
        write_file(dir.path(), "toy_graph_labels.txt", "1\n-1\n");
        dir
    }

    #[test]
    fn loads_two_graph_toy_directory() {
        let dir = toy_dir();
        let ds = load_tudataset(dir.path(), "toy").unwrap();
        assert_eq!(ds.len(), 2);
        assert_eq!(ds.graphs[0].vertex_count(), 2);
        assert_eq!(ds.graphs[1].vertex_count(), 3);
        assert_eq!(ds.graphs[0].edge_count(), 1);
        assert_eq!(ds.graphs[1].edge_count(), 2);
        // Labels {-1, 1} remapped to {0, 1}.
        assert_eq!(ds.graphs[0].label, Some(1.0));
        assert_eq!(ds.graphs[1].label, Some(0.0));
        assert_eq!(ds.task_kind, TaskKind::BinaryClassification);
    }

    #[test]
    fn missing_file_is_named() {
        let dir = tempfile::tempdir().unwrap();
        let err = load_tudataset(dir.path(), "toy").unwrap_err();
        match err {
            Error::MissingFile { file } => assert!(file.contains("toy_graph_indicator.txt")),
            other => panic!("unexpected error {other:?}"),
        }
    }

    #[test]
    fn cross_graph_edge_reports_line() {
        let dir = toy_dir();
        write_file(dir.path(), "toy_A.txt", "1, 2\n2, 1\n1, 4\n");
        let err = load_tudataset(dir.path(), "toy").unwrap_err();
        match err {
            Error::Format { line, .. } => assert_eq!(line, 3),
            other => panic!("unexpected error {other:?}"),
        }
    }

    #[test]
    fn node_labels_become_single_attribute() {
        let dir = toy_dir();
        write_file(dir.path(), "toy_node_labels.txt", "0\n2\n1\n1\n0\n");
        let ds = load_tudataset(dir.path(), "toy").unwrap();
        assert_eq!(ds.schema.value_counts, vec![3]);
        assert_eq!(ds.graphs[0].attributes(1), &[2]);
        assert_eq!(ds.graphs[1].attributes(0), &[1]);
    }

    #[test]
    fn json_round_trip_is_identity() {
        let dir = toy_dir();
        write_file(dir.path(), "toy_node_labels.txt", "0\n1\n1\n0\n1\n");
        let ds = load_tudataset(dir.path(), "toy").unwrap();
        let json = dataset_to_json(&ds).unwrap();
        let ds2 = dataset_from_json(&json).unwrap();
        assert_eq!(ds, ds2);
        let json2 = dataset_to_json(&ds2).unwrap();
        let ds3 = dataset_from_json(&json2).unwrap();
        assert_eq!(ds2, ds3);
    }

    #[test]
    fn json_rejects_unknown_keys() {
        let json = r#"{"schema": {"value_counts": [2]}, "graphs": [], "bogus": 1}"#;
        assert!(dataset_from_json(json).is_err());
    }
}
