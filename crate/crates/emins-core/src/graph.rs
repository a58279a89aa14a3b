//! Graph and dataset data model, perturbation budgets, and edge flips.
//!
//! Graphs are undirected, self-loop free, and stored densely: the benchmark
//! graphs are small and the poisoning pass needs gradients for every node
//! pair anyway. All values are immutable after construction; operations
//! return new graphs.

use ndarray::Array2;

use crate::error::{Error, Result};

/// One graph-classification instance: symmetric boolean adjacency with a zero
/// diagonal, a dense node-feature matrix, and a 0-based class label.
#[derive(Debug, Clone, PartialEq)]
pub struct Graph {
    adjacency: Array2<bool>,
    features: Array2<f64>,
    label: usize,
}

impl Graph {
    /// Builds a graph, validating symmetry, the zero diagonal, and feature
    /// finiteness.
    pub fn new(adjacency: Array2<bool>, features: Array2<f64>, label: usize) -> Result<Self> {
        let n = adjacency.nrows();
        if adjacency.ncols() != n {
            return Err(Error::Contract(format!(
                "adjacency must be square, got {}x{}",
                n,
                adjacency.ncols()
            )));
        }
        if features.nrows() != n {
            return Err(Error::Contract(format!(
                "feature matrix has {} rows for {} nodes",
                features.nrows(),
                n
            )));
        }
        for u in 0..n {
            if adjacency[[u, u]] {
                return Err(Error::Contract(format!("self-loop at node {u}")));
            }
            for v in (u + 1)..n {
                if adjacency[[u, v]] != adjacency[[v, u]] {
                    return Err(Error::Contract(format!(
                        "adjacency not symmetric at ({u}, {v})"
                    )));
                }
            }
        }
        if features.iter().any(|x| !x.is_finite()) {
            return Err(Error::Contract("non-finite feature entry".into()));
        }
        Ok(Self {
            adjacency,
            features,
            label,
        })
    }

    pub fn node_count(&self) -> usize {
        self.adjacency.nrows()
    }

    pub fn adjacency(&self) -> &Array2<bool> {
        &self.adjacency
    }

    pub fn features(&self) -> &Array2<f64> {
        &self.features
    }

    pub fn feature_dim(&self) -> usize {
        self.features.ncols()
    }

    pub fn label(&self) -> usize {
        self.label
    }

    pub fn has_edge(&self, u: usize, v: usize) -> bool {
        self.adjacency[[u, v]]
    }

    pub fn degree(&self, u: usize) -> usize {
        (0..self.node_count()).filter(|&v| self.adjacency[[u, v]]).count()
    }

    /// Number of existing undirected edges.
    pub fn edge_count(&self) -> usize {
        self.edges().count()
    }

    /// Number of unordered node pairs, i.e. the potential edge space.
    pub fn pair_count(&self) -> usize {
        let n = self.node_count();
        n * (n - 1) / 2
    }

    /// Iterates existing undirected edges as pairs with `u < v`.
    pub fn edges(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        let n = self.node_count();
        (0..n).flat_map(move |u| ((u + 1)..n).filter(move |&v| self.adjacency[[u, v]]).map(move |v| (u, v)))
    }

    /// Adjacency as a dense 0/1 real matrix.
    pub fn adjacency_f64(&self) -> Array2<f64> {
        self.adjacency.mapv(|b| if b { 1.0 } else { 0.0 })
    }
}

/// Perturbation ratios: `r_v` is relative to the potential (unordered) edge
/// space, `r_e` to the existing edge set. A graph's flip budget is the
/// minimum of the two implied counts, so larger graphs get more budget while
/// sparse graphs stay near-intact.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct PerturbationBudget {
    pub r_v: f64,
    pub r_e: f64,
}

impl PerturbationBudget {
    pub fn new(r_v: f64, r_e: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&r_v) {
            return Err(Error::Contract(format!("r_v must be in [0, 1], got {r_v}")));
        }
        if !r_e.is_finite() || r_e < 0.0 {
            return Err(Error::Contract(format!("r_e must be >= 0, got {r_e}")));
        }
        Ok(Self { r_v, r_e })
    }
}

impl Default for PerturbationBudget {
    fn default() -> Self {
        Self { r_v: 0.05, r_e: 0.2 }
    }
}

/// Resolves the budget pair into an integer flip count for one graph:
/// `min(floor(r_v * n(n-1)/2), floor(r_e * |E|))`.
pub fn resolve_budget(graph: &Graph, budget: &PerturbationBudget) -> usize {
    let by_pairs = (budget.r_v * graph.pair_count() as f64).floor() as usize;
    let by_edges = (budget.r_e * graph.edge_count() as f64).floor() as usize;
    by_pairs.min(by_edges)
}

/// Direction of an edge modification.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, serde::Serialize, serde::Deserialize)]
pub enum FlipOp {
    Add,
    Delete,
}

impl std::fmt::Display for FlipOp {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            FlipOp::Add => write!(f, "add"),
            FlipOp::Delete => write!(f, "delete"),
        }
    }
}

impl std::str::FromStr for FlipOp {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "add" => Ok(FlipOp::Add),
            "delete" => Ok(FlipOp::Delete),
            other => Err(format!("unknown flip op {other:?}")),
        }
    }
}

/// One edge modification on an unordered pair `u < v`, together with the
/// adjacency-gradient value that justified it at selection time.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Flip {
    pub u: usize,
    pub v: usize,
    pub op: FlipOp,
    pub grad: f64,
}

impl Flip {
    /// Normalizes endpoint order; rejects self-pairs.
    pub fn new(u: usize, v: usize, op: FlipOp, grad: f64) -> Result<Self> {
        if u == v {
            return Err(Error::Contract(format!("flip endpoints must differ, got ({u}, {v})")));
        }
        let (u, v) = if u < v { (u, v) } else { (v, u) };
        Ok(Self { u, v, op, grad })
    }
}

/// Ordered record of applied flips across a dataset. Per graph, an unordered
/// pair appears at most once.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct EditLog {
    entries: Vec<(usize, Flip)>,
}

impl EditLog {
    pub fn new() -> Self {
        Self::default()
    }

    /// Appends an entry, rejecting a second flip of the same pair in the same
    /// graph.
    pub fn push(&mut self, graph_index: usize, flip: Flip) -> Result<()> {
        if self
            .entries
            .iter()
            .any(|&(g, f)| g == graph_index && f.u == flip.u && f.v == flip.v)
        {
            return Err(Error::Contract(format!(
                "pair ({}, {}) flipped twice in graph {graph_index}",
                flip.u, flip.v
            )));
        }
        self.entries.push((graph_index, flip));
        Ok(())
    }

    pub fn entries(&self) -> &[(usize, Flip)] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Flip count per graph index, for budget audits.
    pub fn flips_for(&self, graph_index: usize) -> usize {
        self.entries.iter().filter(|&&(g, _)| g == graph_index).count()
    }
}

impl FromIterator<(usize, Flip)> for EditLog {
    fn from_iter<T: IntoIterator<Item = (usize, Flip)>>(iter: T) -> Self {
        Self {
            entries: iter.into_iter().collect(),
        }
    }
}

/// Applies flips sequentially, checking each against the current adjacency:
/// deletes must hit an existing edge, adds a non-existing pair. Features and
/// label are untouched.
pub fn apply_flips(graph: &Graph, flips: &[Flip]) -> Result<Graph> {
    let n = graph.node_count();
    let mut adjacency = graph.adjacency.clone();
    for flip in flips {
        if flip.v >= n {
            return Err(Error::Contract(format!(
                "flip ({}, {}) out of range for {n} nodes",
                flip.u, flip.v
            )));
        }
        let present = adjacency[[flip.u, flip.v]];
        match flip.op {
            FlipOp::Delete if !present => {
                return Err(Error::FlipConflict {
                    op: flip.op,
                    u: flip.u,
                    v: flip.v,
                    reason: "edge does not exist",
                })
            }
            FlipOp::Add if present => {
                return Err(Error::FlipConflict {
                    op: flip.op,
                    u: flip.u,
                    v: flip.v,
                    reason: "edge already exists",
                })
            }
            _ => {}
        }
        adjacency[[flip.u, flip.v]] = !present;
        adjacency[[flip.v, flip.u]] = !present;
    }
    Ok(Graph {
        adjacency,
        features: graph.features.clone(),
        label: graph.label,
    })
}

/// How node features were derived, which also determines what
/// [`crate::tu::save_tu_dataset`] persists.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub enum FeatureKind {
    /// One-hot over the dataset's node labels; saved back as a node-label file.
    NodeLabels,
    /// One-hot over node degree, capped at `max_degree` (higher degrees share
    /// the last bucket). Used for datasets without node labels; nothing extra
    /// is persisted since degrees are recomputed from edges on load.
    Degree { max_degree: usize },
}

/// An ordered collection of graphs with a shared label space and feature
/// dimension.
#[derive(Debug, Clone, PartialEq)]
pub struct GraphDataset {
    pub graphs: Vec<Graph>,
    pub num_classes: usize,
    pub feature_dim: usize,
    pub name: String,
    pub feature_kind: FeatureKind,
}

impl GraphDataset {
    /// Builds a dataset, validating the label range and feature dimensions.
    pub fn new(
        graphs: Vec<Graph>,
        num_classes: usize,
        feature_dim: usize,
        name: impl Into<String>,
        feature_kind: FeatureKind,
    ) -> Result<Self> {
        if num_classes == 0 {
            return Err(Error::Contract("num_classes must be positive".into()));
        }
        if feature_dim == 0 {
            return Err(Error::Contract("feature_dim must be positive".into()));
        }
        for (i, g) in graphs.iter().enumerate() {
            if g.label() >= num_classes {
                return Err(Error::Contract(format!(
                    "graph {i} has label {} but num_classes is {num_classes}",
                    g.label()
                )));
            }
            if g.feature_dim() != feature_dim {
                return Err(Error::Contract(format!(
                    "graph {i} has feature_dim {} but dataset expects {feature_dim}",
                    g.feature_dim()
                )));
            }
        }
        Ok(Self {
            graphs,
            num_classes,
            feature_dim,
            name: name.into(),
            feature_kind,
        })
    }

    pub fn len(&self) -> usize {
        self.graphs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.graphs.is_empty()
    }

    /// Replaces the graph list, keeping metadata. Labels and feature shapes
    /// are re-validated.
    pub fn with_graphs(&self, graphs: Vec<Graph>) -> Result<Self> {
        Self::new(
            graphs,
            self.num_classes,
            self.feature_dim,
            self.name.clone(),
            self.feature_kind,
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    pub(crate) fn graph_from_edges(n: usize, edges: &[(usize, usize)], label: usize) -> Graph {
        let mut adj = Array2::from_elem((n, n), false);
        for &(u, v) in edges {
            adj[[u, v]] = true;
            adj[[v, u]] = true;
        }
        let features = Array2::from_elem((n, 1), 1.0);
        Graph::new(adj, features, label).unwrap()
    }

    #[test]
    fn rejects_asymmetric_adjacency() {
        let mut adj = Array2::from_elem((3, 3), false);
        adj[[0, 1]] = true;
        let err = Graph::new(adj, Array2::zeros((3, 1)), 0).unwrap_err();
        assert!(matches!(err, Error::Contract(_)));
    }

    #[test]
    fn rejects_self_loop() {
        let mut adj = Array2::from_elem((2, 2), false);
        adj[[1, 1]] = true;
        assert!(Graph::new(adj, Array2::zeros((2, 1)), 0).is_err());
    }

    #[test]
    fn rejects_non_finite_features() {
        let adj = Array2::from_elem((1, 1), false);
        let features = array![[f64::NAN]];
        assert!(Graph::new(adj, features, 0).is_err());
    }

    #[test]
    fn budget_example_direct_arithmetic() {
        // n = 10, |E| = 20, r_v = 0.05, r_e = 0.2 -> min(floor(2.25), floor(4)) = 2
        let edges: Vec<(usize, usize)> = (0..10)
            .flat_map(|u| ((u + 1)..10).map(move |v| (u, v)))
            .take(20)
            .collect();
        let g = graph_from_edges(10, &edges, 0);
        assert_eq!(g.edge_count(), 20);
        let b = PerturbationBudget::new(0.05, 0.2).unwrap();
        assert_eq!(resolve_budget(&g, &b), 2);
    }

    #[test]
    fn budget_zero_ratio_means_zero() {
        let g = graph_from_edges(10, &[(0, 1), (2, 3)], 0);
        let b = PerturbationBudget::new(0.0, 5.0).unwrap();
        assert_eq!(resolve_budget(&g, &b), 0);
    }

    #[test]
    fn budget_empty_graph_is_zero() {
        let g = graph_from_edges(5, &[], 0);
        let b = PerturbationBudget::new(1.0, 1.0).unwrap();
        assert_eq!(resolve_budget(&g, &b), 0);
    }

    #[test]
    fn apply_flips_empty_is_identity() {
        let g = graph_from_edges(4, &[(0, 1), (1, 2)], 1);
        let out = apply_flips(&g, &[]).unwrap();
        assert_eq!(out, g);
    }

    #[test]
    fn apply_flips_delete_then_add() {
        let g = graph_from_edges(4, &[(0, 1), (0, 2), (1, 2)], 0);
        let flips = vec![
            Flip::new(0, 1, FlipOp::Delete, 0.5).unwrap(),
            Flip::new(0, 3, FlipOp::Add, -0.25).unwrap(),
        ];
        let out = apply_flips(&g, &flips).unwrap();
        let edges: Vec<_> = out.edges().collect();
        assert_eq!(edges, vec![(0, 2), (0, 3), (1, 2)]);
    }

    #[test]
    fn apply_flips_rejects_bad_delete() {
        let g = graph_from_edges(3, &[(0, 1)], 0);
        let flips = vec![Flip::new(1, 2, FlipOp::Delete, 0.0).unwrap()];
        let err = apply_flips(&g, &flips).unwrap_err();
        assert!(matches!(err, Error::FlipConflict { u: 1, v: 2, .. }));
    }

    #[test]
    fn apply_flips_checks_sequentially() {
        // Adding (0, 2) twice must fail on the second flip even though the
        // pair was absent initially.
        let g = graph_from_edges(3, &[], 0);
        let flips = vec![
            Flip::new(0, 2, FlipOp::Add, 0.0).unwrap(),
            Flip::new(0, 2, FlipOp::Add, 0.0).unwrap(),
        ];
        assert!(apply_flips(&g, &flips).is_err());
    }

    #[test]
    fn edit_log_rejects_duplicate_pair() {
        let mut log = EditLog::new();
        log.push(0, Flip::new(0, 1, FlipOp::Add, -0.1).unwrap()).unwrap();
        log.push(1, Flip::new(0, 1, FlipOp::Add, -0.1).unwrap()).unwrap();
        let err = log
            .push(0, Flip::new(1, 0, FlipOp::Delete, 0.2).unwrap())
            .unwrap_err();
        assert!(matches!(err, Error::Contract(_)));
    }

    #[test]
    fn dataset_rejects_out_of_range_label() {
        let g = graph_from_edges(2, &[(0, 1)], 3);
        let err = GraphDataset::new(vec![g], 2, 1, "t", FeatureKind::NodeLabels).unwrap_err();
        assert!(matches!(err, Error::Contract(_)));
    }
}
