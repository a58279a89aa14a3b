//! Victim training and clean-test evaluation.
//!
//! The experiment matrix trains one victim per (variant, architecture, seed)
//! cell and always evaluates on clean test graphs: the split is drawn from
//! the clean dataset with the cell's seed, the variant substitutes its
//! perturbed copies on the train side only. All variants of a seed share the
//! same split, so accuracy differences are attributable to the poisoning.

use ndarray::Array1;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::graph::{Graph, GraphDataset};
use crate::nn::{
    backward, cross_entropy, forward, update_params, AdamState, Arch, ModelConfig, ModelParams,
};

/// Victim training schedule.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct TrainConfig {
    pub model: ModelConfig,
    pub epochs: usize,
    pub lr: f64,
    pub seed: u64,
    pub train_fraction: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            model: ModelConfig::new(Arch::Gcn),
            epochs: 200,
            lr: 0.01,
            seed: 0,
            train_fraction: 0.8,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 {
            return Err(Error::Contract("epochs must be at least 1".into()));
        }
        if !(self.lr > 0.0) {
            return Err(Error::Contract(format!("lr must be positive, got {}", self.lr)));
        }
        if !(self.train_fraction > 0.0 && self.train_fraction < 1.0) {
            return Err(Error::Contract(format!(
                "train_fraction must be in (0, 1), got {}",
                self.train_fraction
            )));
        }
        Ok(())
    }
}

/// Stratified-by-label shuffle split into (train, test) index sets, each
/// sorted ascending. Every class keeps at least one graph on each side.
pub fn split_indices(
    dataset: &GraphDataset,
    train_fraction: f64,
    seed: u64,
) -> Result<(Vec<usize>, Vec<usize>)> {
    if !(train_fraction > 0.0 && train_fraction < 1.0) {
        return Err(Error::Contract(format!(
            "train_fraction must be in (0, 1), got {train_fraction}"
        )));
    }
    let mut by_class: Vec<Vec<usize>> = vec![Vec::new(); dataset.num_classes];
    for (i, g) in dataset.graphs.iter().enumerate() {
        by_class[g.label()].push(i);
    }
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let mut train = Vec::new();
    let mut test = Vec::new();
    for (label, mut indices) in by_class.into_iter().enumerate() {
        if indices.is_empty() {
            continue;
        }
        if indices.len() < 2 {
            return Err(Error::Stratification {
                label,
                count: indices.len(),
            });
        }
        indices.shuffle(&mut rng);
        let n = indices.len();
        let keep = ((train_fraction * n as f64).floor() as usize).clamp(1, n - 1);
        train.extend_from_slice(&indices[..keep]);
        test.extend_from_slice(&indices[keep..]);
    }
    train.sort_unstable();
    test.sort_unstable();
    Ok((train, test))
}

/// Materialized stratified split; the union of the two sides is the input
/// multiset and the partition is deterministic in the seed.
pub fn split_dataset(
    dataset: &GraphDataset,
    train_fraction: f64,
    seed: u64,
) -> Result<(GraphDataset, GraphDataset)> {
    let (train_idx, test_idx) = split_indices(dataset, train_fraction, seed)?;
    let pick = |idx: &[usize]| -> Result<GraphDataset> {
        dataset.with_graphs(idx.iter().map(|&i| dataset.graphs[i].clone()).collect())
    };
    Ok((pick(&train_idx)?, pick(&test_idx)?))
}

/// Trains a fresh victim: seeded Glorot init, `epochs` full passes with the
/// graph order reshuffled per epoch, one Adam step per graph.
pub fn train_victim(train_set: &GraphDataset, config: &TrainConfig) -> Result<ModelParams> {
    config.validate()?;
    if train_set.is_empty() {
        return Err(Error::Contract("cannot train on an empty dataset".into()));
    }
    let mut rng = ChaCha20Rng::seed_from_u64(config.seed);
    let mut params = ModelParams::init(
        &config.model,
        train_set.feature_dim,
        train_set.num_classes,
        &mut rng,
    )?;
    let mut optimizer = AdamState::new(params.num_params());
    for epoch in 0..config.epochs {
        let mut order: Vec<usize> = (0..train_set.len()).collect();
        order.shuffle(&mut rng);
        for i in order {
            let g = &train_set.graphs[i];
            let (logits, cache) = forward(g, &params)?;
            let loss = cross_entropy(&logits, g.label())?;
            if !loss.is_finite() {
                return Err(Error::Divergence(format!("epoch {epoch}")));
            }
            let grads = backward(g, &params, &cache, g.label())?;
            update_params(&mut params, &grads, &mut optimizer, config.lr).map_err(|e| match e {
                Error::Divergence(_) => Error::Divergence(format!("epoch {epoch}")),
                other => other,
            })?;
        }
    }
    Ok(params)
}

/// Predicted class: argmax logit, ties resolved to the lowest class index.
pub fn predict(params: &ModelParams, graph: &Graph) -> Result<usize> {
    let (logits, _) = forward(graph, params)?;
    Ok(argmax(&logits))
}

fn argmax(logits: &Array1<f64>) -> usize {
    let mut best = 0;
    for (i, &x) in logits.iter().enumerate() {
        if x > logits[best] {
            best = i;
        }
    }
    best
}

/// Fraction of graphs whose predicted class equals the label.
pub fn evaluate(params: &ModelParams, test_set: &GraphDataset) -> Result<f64> {
    if test_set.is_empty() {
        return Err(Error::Contract("cannot evaluate on an empty dataset".into()));
    }
    if test_set.feature_dim != params.input_dim() {
        return Err(Error::Contract(format!(
            "model expects feature_dim {}, dataset has {}",
            params.input_dim(),
            test_set.feature_dim
        )));
    }
    let mut correct = 0usize;
    for g in &test_set.graphs {
        if predict(params, g)? == g.label() {
            correct += 1;
        }
    }
    Ok(correct as f64 / test_set.len() as f64)
}

/// One experiment cell result.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct EvalRow {
    pub variant: String,
    pub arch: Arch,
    pub seed: u64,
    pub test_accuracy: f64,
}

/// Mean and population standard deviation over a (variant, arch) group.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct Aggregate {
    pub variant: String,
    pub arch: Arch,
    pub mean: f64,
    pub std: f64,
}

/// How far a variant's graphs drift from clean, measured by edge-set diff.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct VariantEditStats {
    pub variant: String,
    pub mean_flips_per_graph: f64,
    pub mean_fraction_modified: f64,
}

/// Configuration echoed into the report for reproducibility.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct ExperimentConfig {
    pub archs: Vec<Arch>,
    pub seeds: Vec<u64>,
    pub epochs: usize,
    pub lr: f64,
    pub train_fraction: f64,
    pub hidden: usize,
    pub layers: usize,
}

/// Full experiment output: per-cell rows in canonical (variant, arch, seed)
/// order plus aggregates and edit statistics.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct EvalReport {
    pub config: ExperimentConfig,
    pub rows: Vec<EvalRow>,
    pub aggregates: Vec<Aggregate>,
    pub edit_stats: Vec<VariantEditStats>,
}

impl EvalReport {
    /// Recomputes aggregates from the rows; construction and audits share it.
    pub fn aggregates_of(rows: &[EvalRow]) -> Vec<Aggregate> {
        let mut keys: Vec<(String, Arch)> = rows
            .iter()
            .map(|r| (r.variant.clone(), r.arch))
            .collect();
        keys.sort();
        keys.dedup();
        keys.into_iter()
            .map(|(variant, arch)| {
                let values: Vec<f64> = rows
                    .iter()
                    .filter(|r| r.variant == variant && r.arch == arch)
                    .map(|r| r.test_accuracy)
                    .collect();
                let mean = values.iter().sum::<f64>() / values.len() as f64;
                let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / values.len() as f64;
                Aggregate {
                    variant,
                    arch,
                    mean,
                    std: var.sqrt(),
                }
            })
            .collect()
    }

    /// Mean accuracy for one (variant, arch) group, if present.
    pub fn mean_accuracy(&self, variant: &str, arch: Arch) -> Option<f64> {
        self.aggregates
            .iter()
            .find(|a| a.variant == variant && a.arch == arch)
            .map(|a| a.mean)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Contract(format!("invalid report: {e}")))
    }

    /// CSV rows (`variant,arch,seed,test_accuracy`), accuracy at 4 decimals.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("variant,arch,seed,test_accuracy\n");
        for r in &self.rows {
            out.push_str(&format!(
                "{},{},{},{:.4}\n",
                r.variant, r.arch, r.seed, r.test_accuracy
            ));
        }
        out
    }

    /// Human-readable aggregate table.
    pub fn render_table(&self) -> String {
        let mut out = String::new();
        out.push_str(&format!(
            "{:<10} {:<5} {:>10} {:>10} {:>12} {:>14}\n",
            "variant", "arch", "mean acc", "std", "flips/graph", "edge fraction"
        ));
        for a in &self.aggregates {
            let stats = self
                .edit_stats
                .iter()
                .find(|s| s.variant == a.variant);
            let (flips, frac) = stats
                .map(|s| (s.mean_flips_per_graph, s.mean_fraction_modified))
                .unwrap_or((0.0, 0.0));
            out.push_str(&format!(
                "{:<10} {:<5} {:>10.4} {:>10.4} {:>12.2} {:>14.4}\n",
                a.variant, a.arch, a.mean, a.std, flips, frac
            ));
        }
        out
    }
}

/// Counts unordered pairs on which two graphs' adjacencies differ.
fn flip_distance(a: &Graph, b: &Graph) -> usize {
    let n = a.node_count();
    let mut count = 0;
    for u in 0..n {
        for v in (u + 1)..n {
            if a.has_edge(u, v) != b.has_edge(u, v) {
                count += 1;
            }
        }
    }
    count
}

/// Runs the full (variant, arch, seed) matrix. For every cell the clean
/// dataset is split with the cell's seed, the variant's perturbed copies
/// replace the train indices, and the victim is scored on the untouched
/// clean test side.
pub fn run_experiment(
    clean: &GraphDataset,
    variants: &[(String, GraphDataset)],
    archs: &[Arch],
    seeds: &[u64],
    base: &TrainConfig,
) -> Result<EvalReport> {
    base.validate()?;
    if clean.is_empty() {
        return Err(Error::Contract("clean dataset is empty".into()));
    }
    if variants.is_empty() || archs.is_empty() || seeds.is_empty() {
        return Err(Error::Contract("experiment needs variants, archs, and seeds".into()));
    }
    for (name, ds) in variants {
        if ds.len() != clean.len() {
            return Err(Error::Mismatch(format!(
                "variant {name:?} has {} graphs, clean has {}",
                ds.len(),
                clean.len()
            )));
        }
        if ds.feature_dim != clean.feature_dim || ds.num_classes != clean.num_classes {
            return Err(Error::Mismatch(format!(
                "variant {name:?} feature/class space differs from clean"
            )));
        }
        for (i, (a, b)) in ds.graphs.iter().zip(clean.graphs.iter()).enumerate() {
            if a.label() != b.label() {
                return Err(Error::Mismatch(format!(
                    "variant {name:?} graph {i} label {} differs from clean {}",
                    a.label(),
                    b.label()
                )));
            }
            if a.node_count() != b.node_count() {
                return Err(Error::Mismatch(format!(
                    "variant {name:?} graph {i} has {} nodes, clean has {}",
                    a.node_count(),
                    b.node_count()
                )));
            }
        }
    }

    // canonical cell order: variant name, arch, seed
    let mut cells: Vec<(usize, Arch, u64)> = Vec::new();
    let mut variant_order: Vec<usize> = (0..variants.len()).collect();
    variant_order.sort_by(|&a, &b| variants[a].0.cmp(&variants[b].0));
    for &vi in &variant_order {
        for &arch in archs {
            for &seed in seeds {
                cells.push((vi, arch, seed));
            }
        }
    }

    let rows: Vec<EvalRow> = cells
        .par_iter()
        .map(|&(vi, arch, seed)| -> Result<EvalRow> {
            let (name, variant_ds) = &variants[vi];
            let (train_idx, test_idx) = split_indices(clean, base.train_fraction, seed)?;
            let train_set = clean.with_graphs(
                train_idx
                    .iter()
                    .map(|&i| variant_ds.graphs[i].clone())
                    .collect(),
            )?;
            let test_set = clean.with_graphs(
                test_idx.iter().map(|&i| clean.graphs[i].clone()).collect(),
            )?;
            let config = TrainConfig {
                model: ModelConfig {
                    arch,
                    ..base.model
                },
                seed,
                ..base.clone()
            };
            let params = train_victim(&train_set, &config)?;
            let accuracy = evaluate(&params, &test_set)?;
            Ok(EvalRow {
                variant: name.clone(),
                arch,
                seed,
                test_accuracy: accuracy,
            })
        })
        .collect::<Result<Vec<_>>>()?;

    let aggregates = EvalReport::aggregates_of(&rows);
    let edit_stats = variant_order
        .iter()
        .map(|&vi| {
            let (name, ds) = &variants[vi];
            let mut flips = 0usize;
            let mut fraction = 0.0;
            for (a, b) in ds.graphs.iter().zip(clean.graphs.iter()) {
                let d = flip_distance(a, b);
                flips += d;
                if b.pair_count() > 0 {
                    fraction += d as f64 / b.pair_count() as f64;
                }
            }
            VariantEditStats {
                variant: name.clone(),
                mean_flips_per_graph: flips as f64 / clean.len() as f64,
                mean_fraction_modified: fraction / clean.len() as f64,
            }
        })
        .collect();

    Ok(EvalReport {
        config: ExperimentConfig {
            archs: archs.to_vec(),
            seeds: seeds.to_vec(),
            epochs: base.epochs,
            lr: base.lr,
            train_fraction: base.train_fraction,
            hidden: base.model.hidden,
            layers: base.model.layers,
        },
        rows,
        aggregates,
        edit_stats,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::FeatureKind;
    use crate::test_support::random_graph;
    use ndarray::Array2;

    fn labeled_dataset(counts: &[usize]) -> GraphDataset {
        use rand::SeedableRng;
        let mut rng = ChaCha20Rng::seed_from_u64(5);
        let mut graphs = Vec::new();
        for (label, &count) in counts.iter().enumerate() {
            for _ in 0..count {
                let g = random_graph(&mut rng, 5, 3, 1);
                let g = Graph::new(g.adjacency().clone(), g.features().clone(), label).unwrap();
                graphs.push(g);
            }
        }
        GraphDataset::new(graphs, counts.len(), 3, "t", FeatureKind::NodeLabels).unwrap()
    }

    #[test]
    fn split_is_stratified_eight_two() {
        let ds = labeled_dataset(&[5, 5]);
        let (train, test) = split_indices(&ds, 0.8, 1).unwrap();
        assert_eq!(train.len(), 8);
        assert_eq!(test.len(), 2);
        for side in [&train, &test] {
            let labels: std::collections::BTreeSet<usize> =
                side.iter().map(|&i| ds.graphs[i].label()).collect();
            assert_eq!(labels.len(), 2, "both classes on both sides");
        }
    }

    #[test]
    fn split_same_seed_same_partition() {
        let ds = labeled_dataset(&[7, 4]);
        let a = split_indices(&ds, 0.7, 42).unwrap();
        let b = split_indices(&ds, 0.7, 42).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn split_union_is_input_multiset() {
        let ds = labeled_dataset(&[6, 3, 4]);
        let (train, test) = split_indices(&ds, 0.8, 3).unwrap();
        let mut all: Vec<usize> = train.iter().chain(test.iter()).copied().collect();
        all.sort_unstable();
        assert_eq!(all, (0..ds.len()).collect::<Vec<_>>());
    }

    #[test]
    fn split_rejects_singleton_class() {
        let ds = labeled_dataset(&[4, 1]);
        assert!(matches!(
            split_indices(&ds, 0.8, 0),
            Err(Error::Stratification { label: 1, count: 1 })
        ));
    }

    #[test]
    fn constant_predictor_scores_class_balance() {
        // zero weights, bias favoring class 0 -> predicts 0 everywhere
        let ds = labeled_dataset(&[3, 3]);
        use rand::SeedableRng;
        let mut rng = ChaCha20Rng::seed_from_u64(1);
        let mut params =
            ModelParams::init(&ModelConfig::new(Arch::Gcn), 3, 2, &mut rng).unwrap();
        let zeros = vec![0.0; params.num_params()];
        params.set_from_flat(&zeros).unwrap();
        params.classifier_bias = ndarray::array![1.0, 0.0];
        let acc = evaluate(&params, &ds).unwrap();
        assert_eq!(acc, 0.5);
    }

    #[test]
    fn argmax_tie_breaks_low() {
        let logits = ndarray::array![0.25, 0.25, 0.1];
        assert_eq!(argmax(&logits), 0);
    }

    #[test]
    fn evaluate_rejects_empty_set() {
        use rand::SeedableRng;
        let mut rng = ChaCha20Rng::seed_from_u64(2);
        let params = ModelParams::init(&ModelConfig::new(Arch::Gcn), 3, 2, &mut rng).unwrap();
        let empty = GraphDataset::new(vec![], 2, 3, "e", FeatureKind::NodeLabels).unwrap();
        assert!(evaluate(&params, &empty).is_err());
    }

    #[test]
    fn train_memorizes_single_graph() {
        use rand::SeedableRng;
        let mut rng = ChaCha20Rng::seed_from_u64(8);
        let g = random_graph(&mut rng, 6, 3, 1);
        let g = Graph::new(g.adjacency().clone(), g.features().clone(), 1).unwrap();
        let ds = GraphDataset::new(vec![g], 2, 3, "one", FeatureKind::NodeLabels).unwrap();
        let config = TrainConfig {
            epochs: 200,
            ..Default::default()
        };
        let params = train_victim(&ds, &config).unwrap();
        let (logits, _) = forward(&ds.graphs[0], &params).unwrap();
        let loss = cross_entropy(&logits, 1).unwrap();
        assert!(loss < 0.01, "training loss {loss}");
        assert_eq!(evaluate(&params, &ds).unwrap(), 1.0);
    }

    #[test]
    fn train_rejects_zero_epochs() {
        let ds = labeled_dataset(&[2, 2]);
        let config = TrainConfig {
            epochs: 0,
            ..Default::default()
        };
        assert!(train_victim(&ds, &config).is_err());
    }

    #[test]
    fn train_is_deterministic() {
        let ds = labeled_dataset(&[3, 3]);
        let config = TrainConfig {
            epochs: 5,
            ..Default::default()
        };
        let a = train_victim(&ds, &config).unwrap();
        let b = train_victim(&ds, &config).unwrap();
        assert_eq!(a.to_flat(), b.to_flat());
    }

    #[test]
    fn experiment_rejects_mismatched_variant() {
        let ds = labeled_dataset(&[3, 3]);
        let smaller = ds.with_graphs(ds.graphs[..4].to_vec()).unwrap();
        let err = run_experiment(
            &ds,
            &[("bad".to_string(), smaller)],
            &[Arch::Gcn],
            &[0],
            &TrainConfig { epochs: 1, ..Default::default() },
        )
        .unwrap_err();
        assert!(matches!(err, Error::Mismatch(_)));
    }

    #[test]
    fn aggregates_match_recomputation() {
        let rows = vec![
            EvalRow { variant: "a".into(), arch: Arch::Gcn, seed: 0, test_accuracy: 0.5 },
            EvalRow { variant: "a".into(), arch: Arch::Gcn, seed: 1, test_accuracy: 1.0 },
        ];
        let aggs = EvalReport::aggregates_of(&rows);
        assert_eq!(aggs.len(), 1);
        assert!((aggs[0].mean - 0.75).abs() < 1e-15);
        assert!((aggs[0].std - 0.25).abs() < 1e-15);
    }

    #[test]
    fn flip_distance_counts_pairs() {
        let mut adj = Array2::from_elem((3, 3), false);
        adj[[0, 1]] = true;
        adj[[1, 0]] = true;
        let a = Graph::new(adj, Array2::from_elem((3, 1), 1.0), 0).unwrap();
        let b = crate::graph::apply_flips(
            &a,
            &[crate::graph::Flip::new(1, 2, crate::graph::FlipOp::Add, 0.0).unwrap()],
        )
        .unwrap();
        assert_eq!(flip_distance(&a, &b), 1);
        assert_eq!(flip_distance(&a, &a), 0);
    }
}
