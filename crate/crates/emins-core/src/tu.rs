//! TU flat-file ingestion and serialization, plus the edit-log CSV format.
//!
//! The on-disk layout is the standard graph-classification benchmark format:
//!
//! * `NAME_A.txt` — one directed edge per line as `i, j` (1-based global node
//!   ids); each undirected edge appears in both directions,
//! * `NAME_graph_indicator.txt` — line i holds the 1-based graph id of node i,
//! * `NAME_graph_labels.txt` — line g holds graph g's integer label,
//! * `NAME_node_labels.txt` — optional; line i holds node i's integer label.
//!
//! Graph and node labels are remapped to contiguous 0-based indices on load
//! (sorted by original value). Datasets without node labels get one-hot
//! degree features, capped at [`LoadOptions::max_degree`]. Multi-edges and
//! self-loops are rejected: the benchmark corpus has neither.

use std::collections::BTreeSet;
use std::fs;
use std::io::{BufWriter, Write};
use std::path::Path;

use ndarray::Array2;

use crate::error::{Error, Result};
use crate::graph::{EditLog, FeatureKind, Flip, FlipOp, Graph, GraphDataset};

/// Loader knobs; today only the degree-feature cap.
#[derive(Debug, Clone, Copy)]
pub struct LoadOptions {
    /// Degrees above this value share the last one-hot bucket, so the feature
    /// dimension is `max_degree + 1` regardless of the data.
    pub max_degree: usize,
}

impl Default for LoadOptions {
    fn default() -> Self {
        Self { max_degree: 64 }
    }
}

/// Loads `dir/NAME_*.txt` with default options.
pub fn load_tu_dataset(dir: &Path, name: &str) -> Result<GraphDataset> {
    load_tu_dataset_with(dir, name, &LoadOptions::default())
}

/// Loads `dir/NAME_*.txt`.
pub fn load_tu_dataset_with(dir: &Path, name: &str, opts: &LoadOptions) -> Result<GraphDataset> {
    let file = |suffix: &str| dir.join(format!("{name}_{suffix}.txt"));

    let indicator_path = file("graph_indicator");
    let labels_path = file("graph_labels");
    let edges_path = file("A");
    let node_labels_path = file("node_labels");
    for required in [&edges_path, &indicator_path, &labels_path] {
        if !required.exists() {
            return Err(Error::MissingFile(required.clone()));
        }
    }

    let raw_graph_labels = read_int_lines(&labels_path)?;
    let num_graphs = raw_graph_labels.len();

    // node -> 0-based graph index, in file order
    let indicator = read_int_lines(&indicator_path)?;
    let indicator_name = file_name(&indicator_path);
    let mut node_graph = Vec::with_capacity(indicator.len());
    for (line, &gid) in indicator.iter().enumerate() {
        if gid < 1 || gid as usize > num_graphs {
            return Err(Error::format(
                &indicator_name,
                line + 1,
                format!("node assigned to nonexistent graph {gid} (dataset has {num_graphs})"),
            ));
        }
        node_graph.push(gid as usize - 1);
    }
    let num_nodes = node_graph.len();

    // Per-node local index within its graph.
    let mut node_counts = vec![0usize; num_graphs];
    let mut local_index = Vec::with_capacity(num_nodes);
    for &g in &node_graph {
        local_index.push(node_counts[g]);
        node_counts[g] += 1;
    }

    let mut adjacencies: Vec<Array2<bool>> = node_counts
        .iter()
        .map(|&n| Array2::from_elem((n, n), false))
        .collect();

    let edges_name = file_name(&edges_path);
    let mut seen_directed: BTreeSet<(usize, usize)> = BTreeSet::new();
    for (line, text) in read_trimmed_lines(&edges_path)? {
        let (a, b) = parse_edge_line(&edges_name, line, &text)?;
        for id in [a, b] {
            if id < 1 || id > num_nodes {
                return Err(Error::format(
                    &edges_name,
                    line,
                    format!("node {id} does not exist (dataset has {num_nodes} nodes)"),
                ));
            }
        }
        if a == b {
            return Err(Error::format(&edges_name, line, format!("self-loop at node {a}")));
        }
        if !seen_directed.insert((a, b)) {
            return Err(Error::format(
                &edges_name,
                line,
                format!("duplicate edge ({a}, {b})"),
            ));
        }
        let (ga, gb) = (node_graph[a - 1], node_graph[b - 1]);
        if ga != gb {
            return Err(Error::format(
                &edges_name,
                line,
                format!("edge ({a}, {b}) spans graphs {} and {}", ga + 1, gb + 1),
            ));
        }
        let (u, v) = (local_index[a - 1], local_index[b - 1]);
        adjacencies[ga][[u, v]] = true;
        adjacencies[ga][[v, u]] = true;
    }

    // Contiguous 0-based class labels, ordered by original value.
    let label_map = remap(&raw_graph_labels);
    let graph_labels: Vec<usize> = raw_graph_labels
        .iter()
        .map(|l| label_map.binary_search(l).unwrap())
        .collect();
    let num_classes = label_map.len().max(1);

    // Features: one-hot node labels when present, capped one-hot degree otherwise.
    let (feature_kind, feature_dim, node_features) = if node_labels_path.exists() {
        let raw = read_int_lines(&node_labels_path)?;
        if raw.len() != num_nodes {
            return Err(Error::format(
                &file_name(&node_labels_path),
                raw.len() + 1,
                format!("{} node labels for {num_nodes} nodes", raw.len()),
            ));
        }
        let map = remap(&raw);
        let dim = map.len().max(1);
        let values: Vec<usize> = raw.iter().map(|l| map.binary_search(l).unwrap()).collect();
        (FeatureKind::NodeLabels, dim, Some(values))
    } else {
        (
            FeatureKind::Degree {
                max_degree: opts.max_degree,
            },
            opts.max_degree + 1,
            None,
        )
    };

    let mut graphs = Vec::with_capacity(num_graphs);
    let mut node_offset_per_graph = vec![0usize; num_graphs];
    {
        // global node ids grouped by graph, to index node-label values
        let mut next = 0usize;
        for (g, &n) in node_counts.iter().enumerate() {
            node_offset_per_graph[g] = next;
            next += n;
        }
    }
    // Map (graph, local) -> global node position for feature lookup.
    let mut global_of = vec![Vec::new(); num_graphs];
    for (global, (&g, &local)) in node_graph.iter().zip(local_index.iter()).enumerate() {
        let slot = &mut global_of[g];
        if slot.len() <= local {
            slot.resize(local + 1, 0);
        }
        slot[local] = global;
    }

    for (g, adjacency) in adjacencies.into_iter().enumerate() {
        let n = node_counts[g];
        let mut features = Array2::zeros((n, feature_dim));
        for local in 0..n {
            let column = match &node_features {
                Some(values) => values[global_of[g][local]],
                None => {
                    let degree = (0..n).filter(|&v| adjacency[[local, v]]).count();
                    degree.min(opts.max_degree)
                }
            };
            features[[local, column]] = 1.0;
        }
        graphs.push(Graph::new(adjacency, features, graph_labels[g])?);
    }

    GraphDataset::new(graphs, num_classes, feature_dim, name, feature_kind)
}

/// Writes the dataset back out in the same flat-file format. Labels are the
/// in-memory (already remapped) values, so load-save-load is a fixed point.
pub fn save_tu_dataset(dataset: &GraphDataset, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let name = &dataset.name;
    let path = |suffix: &str| dir.join(format!("{name}_{suffix}.txt"));

    let mut offsets = Vec::with_capacity(dataset.len());
    let mut total_nodes = 0usize;
    for g in &dataset.graphs {
        offsets.push(total_nodes);
        total_nodes += g.node_count();
    }

    write_lines(&path("A"), |out| {
        for (g, graph) in dataset.graphs.iter().enumerate() {
            let base = offsets[g] + 1;
            let n = graph.node_count();
            for u in 0..n {
                for v in 0..n {
                    if graph.has_edge(u, v) {
                        writeln!(out, "{}, {}", base + u, base + v)?;
                    }
                }
            }
        }
        Ok(())
    })?;

    write_lines(&path("graph_indicator"), |out| {
        for (g, graph) in dataset.graphs.iter().enumerate() {
            for _ in 0..graph.node_count() {
                writeln!(out, "{}", g + 1)?;
            }
        }
        Ok(())
    })?;

    write_lines(&path("graph_labels"), |out| {
        for graph in &dataset.graphs {
            writeln!(out, "{}", graph.label())?;
        }
        Ok(())
    })?;

    if dataset.feature_kind == FeatureKind::NodeLabels {
        write_lines(&path("node_labels"), |out| {
            for graph in &dataset.graphs {
                for row in graph.features().rows() {
                    let label = row
                        .iter()
                        .enumerate()
                        .max_by(|a, b| a.1.partial_cmp(b.1).unwrap())
                        .map(|(i, _)| i)
                        .unwrap_or(0);
                    writeln!(out, "{label}")?;
                }
            }
            Ok(())
        })?;
    }

    Ok(())
}

/// Writes an edit log as CSV: `graph_index,u,v,op,grad` with 0-based indices
/// and the gradient in scientific notation.
pub fn save_edit_log(log: &EditLog, path: &Path) -> Result<()> {
    write_lines(path, |out| {
        writeln!(out, "graph_index,u,v,op,grad")?;
        for (graph_index, flip) in log.entries() {
            writeln!(
                out,
                "{},{},{},{},{:e}",
                graph_index, flip.u, flip.v, flip.op, flip.grad
            )?;
        }
        Ok(())
    })
}

/// Reads an edit log written by [`save_edit_log`].
pub fn load_edit_log(path: &Path) -> Result<EditLog> {
    let name = file_name(path);
    let mut log = EditLog::new();
    for (line, text) in read_trimmed_lines(path)? {
        if line == 1 {
            if text != "graph_index,u,v,op,grad" {
                return Err(Error::format(&name, 1, "missing edit-log header"));
            }
            continue;
        }
        let fields: Vec<&str> = text.split(',').collect();
        if fields.len() != 5 {
            return Err(Error::format(&name, line, format!("expected 5 fields, got {}", fields.len())));
        }
        let parse_usize = |token: &str| -> Result<usize> {
            token.trim().parse().map_err(|_| Error::Parse {
                file: name.clone(),
                line,
                token: token.to_string(),
            })
        };
        let graph_index = parse_usize(fields[0])?;
        let u = parse_usize(fields[1])?;
        let v = parse_usize(fields[2])?;
        let op: FlipOp = fields[3]
            .trim()
            .parse()
            .map_err(|msg| Error::format(&name, line, msg))?;
        let grad: f64 = fields[4].trim().parse().map_err(|_| Error::Parse {
            file: name.clone(),
            line,
            token: fields[4].to_string(),
        })?;
        log.push(graph_index, Flip::new(u, v, op, grad).map_err(|e| Error::format(&name, line, e.to_string()))?)
            .map_err(|e| Error::format(&name, line, e.to_string()))?;
    }
    Ok(log)
}

fn file_name(path: &Path) -> String {
    path.file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_else(|| path.display().to_string())
}

fn write_lines(path: &Path, body: impl FnOnce(&mut BufWriter<fs::File>) -> std::io::Result<()>) -> Result<()> {
    let f = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut out = BufWriter::new(f);
    body(&mut out).map_err(|e| Error::io(path, e))?;
    out.flush().map_err(|e| Error::io(path, e))
}

/// Non-empty trimmed lines with their 1-based line numbers.
fn read_trimmed_lines(path: &Path) -> Result<Vec<(usize, String)>> {
    if !path.exists() {
        return Err(Error::MissingFile(path.to_path_buf()));
    }
    let content = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    Ok(content
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim().to_string()))
        .filter(|(_, l)| !l.is_empty())
        .collect())
}

fn read_int_lines(path: &Path) -> Result<Vec<i64>> {
    let name = file_name(path);
    read_trimmed_lines(path)?
        .into_iter()
        .map(|(line, text)| {
            text.parse().map_err(|_| Error::Parse {
                file: name.clone(),
                line,
                token: text,
            })
        })
        .collect()
}

fn parse_edge_line(file: &str, line: usize, text: &str) -> Result<(usize, usize)> {
    let mut parts = text.split(',');
    let (a, b) = match (parts.next(), parts.next(), parts.next()) {
        (Some(a), Some(b), None) => (a, b),
        _ => {
            return Err(Error::format(
                file,
                line,
                format!("expected `i, j`, got {text:?}"),
            ))
        }
    };
    let parse = |token: &str| -> Result<usize> {
        token.trim().parse().map_err(|_| Error::Parse {
            file: file.to_string(),
            line,
            token: token.trim().to_string(),
        })
    };
    Ok((parse(a)?, parse(b)?))
}

/// Sorted distinct values; position = remapped 0-based label.
fn remap(values: &[i64]) -> Vec<i64> {
    let mut sorted: Vec<i64> = values.to_vec();
    sorted.sort_unstable();
    sorted.dedup();
    sorted
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::fs;

    fn write_fixture(dir: &Path, name: &str, files: &[(&str, &str)]) {
        for (suffix, content) in files {
            fs::write(dir.join(format!("{name}_{suffix}.txt")), content).unwrap();
        }
    }

    #[test]
    fn loads_two_graph_fixture() {
        // Graph 1: nodes 1-3 with edges (1,2) and (2,3); graph 2: nodes 4-5, no edges.
        let dir = tempfile::tempdir().unwrap();
        write_fixture(
            dir.path(),
            "TWO",
            &[
                ("A", "1, 2\n2, 1\n2, 3\n3, 2\n"),
                ("graph_indicator", "1\n1\n1\n2\n2\n"),
                ("graph_labels", "3\n7\n"),
            ],
        );
        let ds = load_tu_dataset(dir.path(), "TWO").unwrap();
        assert_eq!(ds.len(), 2);
        assert_eq!(ds.num_classes, 2);
        let edges: Vec<_> = ds.graphs[0].edges().collect();
        assert_eq!(edges, vec![(0, 1), (1, 2)]);
        assert_eq!(ds.graphs[1].edge_count(), 0);
        // labels {3, 7} remap to {0, 1}
        assert_eq!(ds.graphs[0].label(), 0);
        assert_eq!(ds.graphs[1].label(), 1);
        // no node labels -> degree features, capped dimension
        assert_eq!(ds.feature_dim, 65);
        assert_eq!(ds.graphs[0].features()[[1, 2]], 1.0); // node 1 has degree 2
    }

    #[test]
    fn empty_edge_file_gives_edgeless_graphs() {
        let dir = tempfile::tempdir().unwrap();
        write_fixture(
            dir.path(),
            "E",
            &[("A", ""), ("graph_indicator", "1\n2\n"), ("graph_labels", "0\n0\n")],
        );
        let ds = load_tu_dataset(dir.path(), "E").unwrap();
        assert_eq!(ds.len(), 2);
        assert!(ds.graphs.iter().all(|g| g.edge_count() == 0));
        assert_eq!(ds.num_classes, 1);
    }

    #[test]
    fn label_remap_is_contiguous() {
        let dir = tempfile::tempdir().unwrap();
        write_fixture(
            dir.path(),
            "L",
            &[
                ("A", ""),
                ("graph_indicator", "1\n2\n3\n"),
                ("graph_labels", "3\n7\n3\n"),
            ],
        );
        let ds = load_tu_dataset(dir.path(), "L").unwrap();
        let labels: Vec<_> = ds.graphs.iter().map(|g| g.label()).collect();
        assert_eq!(labels, vec![0, 1, 0]);
        assert_eq!(ds.num_classes, 2);
    }

    #[test]
    fn missing_file_is_reported_by_name() {
        let dir = tempfile::tempdir().unwrap();
        write_fixture(dir.path(), "M", &[("A", ""), ("graph_labels", "0\n")]);
        let err = load_tu_dataset(dir.path(), "M").unwrap_err();
        match err {
            Error::MissingFile(p) => assert!(p.ends_with("M_graph_indicator.txt")),
            other => panic!("unexpected error {other:?}"),
        }
    }

    #[test]
    fn bad_token_reports_line() {
        let dir = tempfile::tempdir().unwrap();
        write_fixture(
            dir.path(),
            "P",
            &[("A", "1, x\n"), ("graph_indicator", "1\n1\n"), ("graph_labels", "0\n")],
        );
        let err = load_tu_dataset(dir.path(), "P").unwrap_err();
        match err {
            Error::Parse { line, token, .. } => {
                assert_eq!(line, 1);
                assert_eq!(token, "x");
            }
            other => panic!("unexpected error {other:?}"),
        }
    }

    #[test]
    fn node_in_nonexistent_graph_reports_line() {
        let dir = tempfile::tempdir().unwrap();
        write_fixture(
            dir.path(),
            "G",
            &[("A", ""), ("graph_indicator", "1\n5\n"), ("graph_labels", "0\n")],
        );
        let err = load_tu_dataset(dir.path(), "G").unwrap_err();
        match err {
            Error::Format { line, .. } => assert_eq!(line, 2),
            other => panic!("unexpected error {other:?}"),
        }
    }

    #[test]
    fn self_loop_rejected() {
        let dir = tempfile::tempdir().unwrap();
        write_fixture(
            dir.path(),
            "S",
            &[("A", "1, 1\n"), ("graph_indicator", "1\n"), ("graph_labels", "0\n")],
        );
        assert!(matches!(
            load_tu_dataset(dir.path(), "S").unwrap_err(),
            Error::Format { line: 1, .. }
        ));
    }

    #[test]
    fn duplicate_directed_edge_rejected() {
        let dir = tempfile::tempdir().unwrap();
        write_fixture(
            dir.path(),
            "D",
            &[
                ("A", "1, 2\n2, 1\n1, 2\n"),
                ("graph_indicator", "1\n1\n"),
                ("graph_labels", "0\n"),
            ],
        );
        assert!(matches!(
            load_tu_dataset(dir.path(), "D").unwrap_err(),
            Error::Format { line: 3, .. }
        ));
    }

    #[test]
    fn node_labels_become_one_hot_features() {
        let dir = tempfile::tempdir().unwrap();
        write_fixture(
            dir.path(),
            "NL",
            &[
                ("A", "1, 2\n2, 1\n"),
                ("graph_indicator", "1\n1\n"),
                ("graph_labels", "0\n"),
                ("node_labels", "5\n2\n"),
            ],
        );
        let ds = load_tu_dataset(dir.path(), "NL").unwrap();
        assert_eq!(ds.feature_kind, FeatureKind::NodeLabels);
        assert_eq!(ds.feature_dim, 2);
        // label 2 -> column 0, label 5 -> column 1
        assert_eq!(ds.graphs[0].features()[[0, 1]], 1.0);
        assert_eq!(ds.graphs[0].features()[[1, 0]], 1.0);
    }

    #[test]
    fn round_trip_fixture() {
        let dir = tempfile::tempdir().unwrap();
        write_fixture(
            dir.path(),
            "RT",
            &[
                ("A", "1, 2\n2, 1\n2, 3\n3, 2\n"),
                ("graph_indicator", "1\n1\n1\n2\n2\n"),
                ("graph_labels", "3\n7\n"),
                ("node_labels", "1\n1\n2\n1\n3\n"),
            ],
        );
        let ds = load_tu_dataset(dir.path(), "RT").unwrap();
        let out = tempfile::tempdir().unwrap();
        save_tu_dataset(&ds, out.path()).unwrap();
        let reloaded = load_tu_dataset(out.path(), "RT").unwrap();
        assert_eq!(ds, reloaded);
    }

    #[test]
    fn empty_dataset_round_trips() {
        let ds = GraphDataset::new(vec![], 1, 1, "EMPTY", FeatureKind::NodeLabels).unwrap();
        let out = tempfile::tempdir().unwrap();
        save_tu_dataset(&ds, out.path()).unwrap();
        let reloaded = load_tu_dataset(out.path(), "EMPTY").unwrap();
        assert_eq!(reloaded.len(), 0);
    }

    #[test]
    fn edit_log_round_trips() {
        let mut log = EditLog::new();
        log.push(0, Flip::new(0, 1, FlipOp::Delete, 0.5).unwrap()).unwrap();
        log.push(3, Flip::new(2, 7, FlipOp::Add, -1.25e-3).unwrap()).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("edits.csv");
        save_edit_log(&log, &path).unwrap();
        let reloaded = load_edit_log(&path).unwrap();
        assert_eq!(log, reloaded);
    }
}
