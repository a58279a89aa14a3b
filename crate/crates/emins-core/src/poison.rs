//! Error-minimizing structural noise and its baselines.
//!
//! The crafting loop alternates two minimizations of the same objective:
//! the surrogate trains on the current perturbed data, then each graph's
//! flips are re-derived from scratch against the frozen surrogate. Flips are
//! picked greedily by adjacency-gradient magnitude among sign-admissible
//! pairs: deleting an existing edge with a positive gradient, or adding an
//! absent pair with a negative gradient, is a discrete step that lowers the
//! loss to first order. Selection stops early once no admissible pair
//! remains.
//!
//! Baselines: uniform random flips, and the reversed (error-maximizing)
//! direction where the surrogate trains on clean data and flips climb the
//! loss instead.

use std::collections::BTreeSet;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::graph::{
    apply_flips, resolve_budget, EditLog, Flip, FlipOp, Graph, GraphDataset, PerturbationBudget,
};
use crate::nn::{
    backward, cross_entropy, forward, update_params, AdamState, ModelConfig, ModelParams,
};
use ndarray::Array2;

/// Schedule and budget for one poisoning run.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct PoisonConfig {
    /// Outer alternations between surrogate training and noise refresh.
    pub outer_iters: usize,
    /// Surrogate training epochs per outer iteration.
    pub inner_steps: usize,
    /// Surrogate Adam learning rate.
    pub lr: f64,
    /// Early-stop threshold on the surrogate's mean training loss.
    pub stop_loss: f64,
    pub budget: PerturbationBudget,
    pub seed: u64,
    /// Flips applied per gradient recomputation while crafting one graph.
    /// 1 re-evaluates the gradient after every flip; values >= the budget
    /// select the whole batch from a single gradient.
    pub grad_refresh_every: usize,
    /// Surrogate shape.
    pub model: ModelConfig,
    /// Reinitialize the surrogate at each outer iteration instead of
    /// continuing training.
    pub reinit_surrogate: bool,
}

impl Default for PoisonConfig {
    fn default() -> Self {
        Self {
            outer_iters: 10,
            inner_steps: 5,
            lr: 0.01,
            stop_loss: 0.1,
            budget: PerturbationBudget::default(),
            seed: 0,
            grad_refresh_every: 1,
            model: ModelConfig::new(crate::nn::Arch::Gcn),
            reinit_surrogate: false,
        }
    }
}

impl PoisonConfig {
    pub fn validate(&self) -> Result<()> {
        if self.outer_iters == 0 || self.inner_steps == 0 {
            return Err(Error::Contract(
                "outer_iters and inner_steps must be at least 1".into(),
            ));
        }
        if !(self.lr > 0.0) {
            return Err(Error::Contract(format!("lr must be positive, got {}", self.lr)));
        }
        if !(self.stop_loss >= 0.0) {
            return Err(Error::Contract(format!(
                "stop_loss must be non-negative, got {}",
                self.stop_loss
            )));
        }
        if self.grad_refresh_every == 0 {
            return Err(Error::Contract("grad_refresh_every must be at least 1".into()));
        }
        PerturbationBudget::new(self.budget.r_v, self.budget.r_e)?;
        Ok(())
    }
}

/// Which way a flip should move the loss.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Direction {
    Minimize,
    Maximize,
}

impl Direction {
    fn admissible(self, exists: bool, grad: f64) -> Option<FlipOp> {
        let op = match self {
            // deleting lowers the entry, so a positive gradient lowers the loss
            Direction::Minimize if exists && grad > 0.0 => FlipOp::Delete,
            Direction::Minimize if !exists && grad < 0.0 => FlipOp::Add,
            Direction::Maximize if exists && grad < 0.0 => FlipOp::Delete,
            Direction::Maximize if !exists && grad > 0.0 => FlipOp::Add,
            _ => return None,
        };
        Some(op)
    }
}

/// Greedy selection of up to `c` admissible flips, ranked by gradient
/// magnitude (ties broken by lexicographic pair order). Returns fewer than
/// `c` — possibly none — when admissible pairs run out.
pub fn select_flips(
    grad_adj: &Array2<f64>,
    adjacency: &Array2<bool>,
    c: usize,
) -> Result<Vec<Flip>> {
    select_directed(grad_adj, adjacency, c, Direction::Minimize, &BTreeSet::new())
}

fn select_directed(
    grad_adj: &Array2<f64>,
    adjacency: &Array2<bool>,
    c: usize,
    direction: Direction,
    excluded: &BTreeSet<(usize, usize)>,
) -> Result<Vec<Flip>> {
    let n = adjacency.nrows();
    if adjacency.ncols() != n || grad_adj.nrows() != n || grad_adj.ncols() != n {
        return Err(Error::Contract(format!(
            "selection inputs must be square and same size, got {}x{} and {}x{}",
            grad_adj.nrows(),
            grad_adj.ncols(),
            n,
            adjacency.ncols()
        )));
    }
    for u in 0..n {
        for v in (u + 1)..n {
            if adjacency[[u, v]] != adjacency[[v, u]] || grad_adj[[u, v]] != grad_adj[[v, u]] {
                return Err(Error::Contract(format!(
                    "selection inputs must be symmetric, differ at ({u}, {v})"
                )));
            }
        }
    }
    if c == 0 {
        return Ok(Vec::new());
    }

    let mut candidates = Vec::new();
    for u in 0..n {
        for v in (u + 1)..n {
            if excluded.contains(&(u, v)) {
                continue;
            }
            let grad = grad_adj[[u, v]];
            if let Some(op) = direction.admissible(adjacency[[u, v]], grad) {
                candidates.push(Flip { u, v, op, grad });
            }
        }
    }
    candidates.sort_by(|a, b| {
        b.grad
            .abs()
            .total_cmp(&a.grad.abs())
            .then_with(|| (a.u, a.v).cmp(&(b.u, b.v)))
    });
    candidates.truncate(c);
    Ok(candidates)
}

/// Crafts up to `c` flips for one clean graph under a frozen surrogate,
/// recomputing the adjacency gradient every `grad_refresh_every` flips. A
/// pair is never flipped twice, so applying the returned list to the clean
/// graph is always consistent.
pub fn craft_noise_for_graph(
    graph: &Graph,
    params: &ModelParams,
    c: usize,
    grad_refresh_every: usize,
) -> Result<Vec<Flip>> {
    craft_directed(graph, params, c, grad_refresh_every, Direction::Minimize)
}

fn craft_directed(
    graph: &Graph,
    params: &ModelParams,
    c: usize,
    grad_refresh_every: usize,
    direction: Direction,
) -> Result<Vec<Flip>> {
    if grad_refresh_every == 0 {
        return Err(Error::Contract("grad_refresh_every must be at least 1".into()));
    }
    let mut current = graph.clone();
    let mut chosen: Vec<Flip> = Vec::new();
    let mut flipped: BTreeSet<(usize, usize)> = BTreeSet::new();
    while chosen.len() < c {
        let (_, cache) = forward(&current, params)?;
        let grads = backward(&current, params, &cache, current.label())?;
        let take = grad_refresh_every.min(c - chosen.len());
        let batch = select_directed(&grads.adjacency, current.adjacency(), take, direction, &flipped)?;
        if batch.is_empty() {
            break;
        }
        current = apply_flips(&current, &batch)?;
        for flip in batch {
            flipped.insert((flip.u, flip.v));
            chosen.push(flip);
        }
    }
    Ok(chosen)
}

/// Error-minimizing structural poisoning of a whole dataset.
///
/// Alternates up to `outer_iters` times between (a) `inner_steps` epochs of
/// per-graph Adam steps on the current perturbed data and (b) re-deriving
/// every graph's flips from the clean original under the frozen surrogate.
/// Stops early once the surrogate's mean loss on the perturbed data falls
/// below `stop_loss`. Labels and features pass through untouched; per-graph
/// flip counts never exceed the resolved budget.
pub fn poison_dataset(dataset: &GraphDataset, config: &PoisonConfig) -> Result<(GraphDataset, EditLog)> {
    run_crafting(dataset, config, Direction::Minimize, false)
}

/// Error-maximizing baseline: same pipeline as [`poison_dataset`] with the
/// flip directions reversed (greedy loss ascent) and the surrogate trained
/// on the clean dataset.
pub fn error_max_noise(
    dataset: &GraphDataset,
    budget: &PerturbationBudget,
    config: &PoisonConfig,
) -> Result<(GraphDataset, EditLog)> {
    let config = PoisonConfig {
        budget: *budget,
        ..config.clone()
    };
    run_crafting(dataset, &config, Direction::Maximize, true)
}

fn run_crafting(
    dataset: &GraphDataset,
    config: &PoisonConfig,
    direction: Direction,
    train_on_clean: bool,
) -> Result<(GraphDataset, EditLog)> {
    config.validate()?;
    if dataset.is_empty() {
        return Err(Error::Contract("cannot poison an empty dataset".into()));
    }
    let budgets: Vec<usize> = dataset
        .graphs
        .iter()
        .map(|g| resolve_budget(g, &config.budget))
        .collect();
    if budgets.iter().all(|&c| c == 0) {
        return Ok((dataset.clone(), EditLog::new()));
    }

    let mut rng = ChaCha20Rng::seed_from_u64(config.seed);
    let mut params = ModelParams::init(&config.model, dataset.feature_dim, dataset.num_classes, &mut rng)?;
    let mut optimizer = AdamState::new(params.num_params());
    let mut flips: Vec<Vec<Flip>> = vec![Vec::new(); dataset.len()];
    let mut poisoned: Vec<Graph> = dataset.graphs.clone();

    for outer in 0..config.outer_iters {
        if config.reinit_surrogate && outer > 0 {
            params = ModelParams::init(&config.model, dataset.feature_dim, dataset.num_classes, &mut rng)?;
            optimizer = AdamState::new(params.num_params());
        }

        // (a) inner minimization over the surrogate parameters
        {
            let train_set: &[Graph] = if train_on_clean { &dataset.graphs } else { &poisoned };
            for _ in 0..config.inner_steps {
                let mut order: Vec<usize> = (0..train_set.len()).collect();
                order.shuffle(&mut rng);
                for i in order {
                    let g = &train_set[i];
                    let (logits, cache) = forward(g, &params)?;
                    let loss = cross_entropy(&logits, g.label())?;
                    if !loss.is_finite() {
                        return Err(Error::Divergence(format!("outer iteration {outer}")));
                    }
                    let grads = backward(g, &params, &cache, g.label())?;
                    update_params(&mut params, &grads, &mut optimizer, config.lr).map_err(|e| {
                        match e {
                            Error::Divergence(_) => Error::Divergence(format!("outer iteration {outer}")),
                            other => other,
                        }
                    })?;
                }
            }
        }

        // (b) noise refresh: re-derive every graph's flips from clean
        flips = dataset
            .graphs
            .par_iter()
            .zip(budgets.par_iter())
            .map(|(g, &c)| craft_directed(g, &params, c, config.grad_refresh_every, direction))
            .collect::<Result<Vec<_>>>()?;
        poisoned = dataset
            .graphs
            .iter()
            .zip(&flips)
            .map(|(g, f)| apply_flips(g, f))
            .collect::<Result<Vec<_>>>()?;

        // early stop on the surrogate's mean training loss
        let loss_set: &[Graph] = if train_on_clean { &dataset.graphs } else { &poisoned };
        let mut total = 0.0;
        for g in loss_set {
            let (logits, _) = forward(g, &params)?;
            total += cross_entropy(&logits, g.label())?;
        }
        if total / (loss_set.len() as f64) < config.stop_loss {
            break;
        }
    }

    let mut log = EditLog::new();
    for (i, graph_flips) in flips.iter().enumerate() {
        for flip in graph_flips {
            log.push(i, *flip)?;
        }
    }
    Ok((dataset.with_graphs(poisoned)?, log))
}

/// Uniform baseline: flips exactly `min(budget, pair count)` distinct pairs
/// per graph, chosen without replacement (existing pairs become deletes,
/// absent ones adds).
pub fn random_noise(
    dataset: &GraphDataset,
    budget: &PerturbationBudget,
    seed: u64,
) -> Result<(GraphDataset, EditLog)> {
    if dataset.is_empty() {
        return Err(Error::Contract("cannot poison an empty dataset".into()));
    }
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let mut log = EditLog::new();
    let mut poisoned = Vec::with_capacity(dataset.len());
    for (i, graph) in dataset.graphs.iter().enumerate() {
        let c = resolve_budget(graph, budget);
        let pairs = graph.pair_count();
        let k = c.min(pairs);
        let mut flips = Vec::with_capacity(k);
        for t in rand::seq::index::sample(&mut rng, pairs, k) {
            let (u, v) = unrank_pair(t, graph.node_count());
            let op = if graph.has_edge(u, v) { FlipOp::Delete } else { FlipOp::Add };
            let flip = Flip { u, v, op, grad: 0.0 };
            log.push(i, flip)?;
            flips.push(flip);
        }
        poisoned.push(apply_flips(graph, &flips)?);
    }
    Ok((dataset.with_graphs(poisoned)?, log))
}

/// Maps a flat index in `0..n(n-1)/2` to the unordered pair `(u, v)`, u < v.
fn unrank_pair(mut t: usize, n: usize) -> (usize, usize) {
    for u in 0..n {
        let row = n - 1 - u;
        if t < row {
            return (u, u + 1 + t);
        }
        t -= row;
    }
    unreachable!("pair index out of range");
}

/// Summary written into the poison-run manifest.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct PoisonRunStats {
    /// Resolved flip budget per graph, in dataset order.
    pub per_graph_budgets: Vec<usize>,
    pub total_flips: usize,
    /// Mean over graphs of flips divided by the potential edge count; this is
    /// the "fraction of potential edges modified" a budget of `r_v` caps.
    pub mean_fraction_modified: f64,
}

impl PoisonRunStats {
    pub fn compute(clean: &GraphDataset, budget: &PerturbationBudget, log: &EditLog) -> Self {
        let per_graph_budgets: Vec<usize> = clean
            .graphs
            .iter()
            .map(|g| resolve_budget(g, budget))
            .collect();
        let mut fractions = 0.0;
        for (i, g) in clean.graphs.iter().enumerate() {
            let pairs = g.pair_count();
            if pairs > 0 {
                fractions += log.flips_for(i) as f64 / pairs as f64;
            }
        }
        Self {
            per_graph_budgets,
            total_flips: log.len(),
            mean_fraction_modified: if clean.is_empty() {
                0.0
            } else {
                fractions / clean.len() as f64
            },
        }
    }
}
