//! Forward pass, cross-entropy, and exact reverse-mode gradients.
//!
//! The adjacency gradient is taken with respect to the *raw* matrix entries:
//! for GCN it is chained analytically through the degree normalization
//! `Ahat = D^{-1/2} (A + I) D^{-1/2}`, not by treating `Ahat` as a constant.
//! Each matrix entry is treated as an independent variable; the per-pair
//! gradient reported to callers is the symmetrized sum `g[u][v] + g[v][u]`,
//! because one undirected flip moves both mirror entries.

use ndarray::{Array1, Array2, Axis};

use crate::error::{Error, Result};
use crate::graph::Graph;
use crate::nn::{Layers, ModelParams};

/// Intermediate tensors kept by [`forward`] for the backward pass.
#[derive(Debug, Clone)]
pub struct ForwardCache {
    adj: Array2<f64>,
    norm: Option<NormCache>,
    layers: Vec<LayerCache>,
    readout: Array1<f64>,
    logits: Array1<f64>,
}

impl ForwardCache {
    pub fn logits(&self) -> &Array1<f64> {
        &self.logits
    }

    pub fn readout(&self) -> &Array1<f64> {
        &self.readout
    }

    /// The propagation operator actually used: `Ahat` for GCN, absent for GIN.
    pub fn normalized_adjacency(&self) -> Option<&Array2<f64>> {
        self.norm.as_ref().map(|n| &n.a_hat)
    }
}

#[derive(Debug, Clone)]
struct NormCache {
    a_hat: Array2<f64>,
    a_tilde: Array2<f64>,
    degrees: Array1<f64>,
    inv_sqrt: Array1<f64>,
}

#[derive(Debug, Clone)]
enum LayerCache {
    Gcn {
        h_in: Array2<f64>,
        hw: Array2<f64>,
        z: Array2<f64>,
    },
    Gin {
        h_in: Array2<f64>,
        p: Array2<f64>,
        z1: Array2<f64>,
        a1: Array2<f64>,
    },
}

/// Gradients of `cross_entropy(forward(graph))` with respect to every model
/// parameter and every raw adjacency entry. `adjacency` is symmetric with a
/// zero diagonal; entry (u, v) is the derivative along flipping the
/// undirected pair.
#[derive(Debug, Clone)]
pub struct Gradients {
    pub params: ModelParams,
    pub adjacency: Array2<f64>,
}

/// `Ahat = D^{-1/2} (A + I) D^{-1/2}` where `D` holds the row sums of
/// `A + I`. Accepts relaxed real entries so finite differences can probe it.
pub fn normalize_adjacency(a: &Array2<f64>) -> Array2<f64> {
    normalize_cached(a).a_hat
}

fn normalize_cached(a: &Array2<f64>) -> NormCache {
    let n = a.nrows();
    let mut a_tilde = a.clone();
    for i in 0..n {
        a_tilde[[i, i]] += 1.0;
    }
    let degrees = a_tilde.sum_axis(Axis(1));
    let inv_sqrt = degrees.mapv(|d| 1.0 / d.sqrt());
    let mut a_hat = a_tilde.clone();
    for ((i, j), x) in a_hat.indexed_iter_mut() {
        *x *= inv_sqrt[i] * inv_sqrt[j];
    }
    NormCache {
        a_hat,
        a_tilde,
        degrees,
        inv_sqrt,
    }
}

fn relu(m: &Array2<f64>) -> Array2<f64> {
    m.mapv(|x| x.max(0.0))
}

fn relu_mask(pre: &Array2<f64>, grad: &Array2<f64>) -> Array2<f64> {
    let mut out = grad.clone();
    out.zip_mut_with(pre, |g, &z| {
        if z <= 0.0 {
            *g = 0.0;
        }
    });
    out
}

/// Runs the model on a graph; returns the class logits and the cache needed
/// by [`backward`].
pub fn forward(graph: &Graph, params: &ModelParams) -> Result<(Array1<f64>, ForwardCache)> {
    forward_relaxed(&graph.adjacency_f64(), graph.features(), params)
}

/// Forward pass on a relaxed real adjacency (entries need not be 0/1). This
/// is the path the finite-difference oracle probes.
pub fn forward_relaxed(
    adj: &Array2<f64>,
    features: &Array2<f64>,
    params: &ModelParams,
) -> Result<(Array1<f64>, ForwardCache)> {
    let n = adj.nrows();
    if adj.ncols() != n {
        return Err(Error::Contract(format!(
            "adjacency must be square, got {n}x{}",
            adj.ncols()
        )));
    }
    if n == 0 {
        return Err(Error::Contract("graph has no nodes".into()));
    }
    if features.nrows() != n {
        return Err(Error::Contract(format!(
            "features have {} rows for {n} nodes",
            features.nrows()
        )));
    }
    if features.ncols() != params.input_dim() {
        return Err(Error::Contract(format!(
            "model expects feature_dim {}, graph has {}",
            params.input_dim(),
            features.ncols()
        )));
    }

    let mut layer_caches = Vec::with_capacity(params.layer_count());
    let mut h = features.to_owned();
    let norm = match &params.layers {
        Layers::Gcn(layers) => {
            let norm = normalize_cached(adj);
            for layer in layers {
                let hw = h.dot(&layer.weight);
                let z = norm.a_hat.dot(&hw);
                let h_out = relu(&z);
                layer_caches.push(LayerCache::Gcn { h_in: h, hw, z });
                h = h_out;
            }
            Some(norm)
        }
        Layers::Gin(layers) => {
            for layer in layers {
                let p = &h * (1.0 + layer.eps) + adj.dot(&h);
                let z1 = p.dot(&layer.w1);
                let a1 = relu(&z1);
                let h_out = a1.dot(&layer.w2);
                layer_caches.push(LayerCache::Gin { h_in: h, p, z1, a1 });
                h = h_out;
            }
            None
        }
    };

    let readout = h.mean_axis(Axis(0)).expect("non-empty graph");
    let logits = readout.dot(&params.classifier_weight) + &params.classifier_bias;
    let cache = ForwardCache {
        adj: adj.to_owned(),
        norm,
        layers: layer_caches,
        readout,
        logits: logits.clone(),
    };
    Ok((logits, cache))
}

/// `-log softmax(logits)[label]`, computed with max subtraction.
pub fn cross_entropy(logits: &Array1<f64>, label: usize) -> Result<f64> {
    if label >= logits.len() {
        return Err(Error::Contract(format!(
            "label {label} out of range for {} logits",
            logits.len()
        )));
    }
    if logits.iter().any(|x| !x.is_finite()) {
        return Err(Error::Contract("non-finite logits".into()));
    }
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let lse = max + logits.iter().map(|&x| (x - max).exp()).sum::<f64>().ln();
    Ok(lse - logits[label])
}

fn softmax(logits: &Array1<f64>) -> Array1<f64> {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps = logits.mapv(|x| (x - max).exp());
    let total = exps.sum();
    exps / total
}

/// Exact gradients of `cross_entropy(forward(graph, params), label)` from a
/// cache produced by [`forward`] on the same inputs.
pub fn backward(
    graph: &Graph,
    params: &ModelParams,
    cache: &ForwardCache,
    label: usize,
) -> Result<Gradients> {
    let n = graph.node_count();
    check_cache(cache, params, n)?;
    if label >= params.num_classes() {
        return Err(Error::Contract(format!(
            "label {label} out of range for {} classes",
            params.num_classes()
        )));
    }

    let mut grads = params.zeros_like();

    // classifier and readout
    let mut g_logits = softmax(&cache.logits);
    g_logits[label] -= 1.0;
    for (i, &r) in cache.readout.iter().enumerate() {
        for (j, &gl) in g_logits.iter().enumerate() {
            grads.classifier_weight[[i, j]] = r * gl;
        }
    }
    grads.classifier_bias.assign(&g_logits);
    let g_readout = params.classifier_weight.dot(&g_logits);

    // mean pooling spreads the readout gradient evenly over node rows
    let scale = 1.0 / n as f64;
    let mut g_h = Array2::zeros((n, g_readout.len()));
    for mut row in g_h.rows_mut() {
        row.assign(&(&g_readout * scale));
    }

    // raw-entry adjacency gradient, before symmetrization
    let mut g_adj_raw: Array2<f64>;

    match (&params.layers, &mut grads.layers) {
        (Layers::Gcn(layers), Layers::Gcn(layer_grads)) => {
            let norm = cache.norm.as_ref().expect("gcn cache has norm");
            let mut g_ahat = Array2::zeros((n, n));
            for ((layer, grad), lc) in layers
                .iter()
                .zip(layer_grads.iter_mut())
                .zip(cache.layers.iter())
                .rev()
            {
                let LayerCache::Gcn { h_in, hw, z } = lc else {
                    return Err(Error::Contract("cache architecture mismatch".into()));
                };
                let g_z = relu_mask(z, &g_h);
                let t = norm.a_hat.dot(&g_z);
                grad.weight = h_in.t().dot(&t);
                g_ahat += &g_z.dot(&hw.t());
                g_h = t.dot(&layer.weight.t());
            }
            g_adj_raw = normalize_backward(norm, &g_ahat);
        }
        (Layers::Gin(layers), Layers::Gin(layer_grads)) => {
            g_adj_raw = Array2::zeros((n, n));
            for ((layer, grad), lc) in layers
                .iter()
                .zip(layer_grads.iter_mut())
                .zip(cache.layers.iter())
                .rev()
            {
                let LayerCache::Gin { h_in, p, z1, a1 } = lc else {
                    return Err(Error::Contract("cache architecture mismatch".into()));
                };
                grad.w2 = a1.t().dot(&g_h);
                let g_a1 = g_h.dot(&layer.w2.t());
                let g_z1 = relu_mask(z1, &g_a1);
                grad.w1 = p.t().dot(&g_z1);
                let g_p = g_z1.dot(&layer.w1.t());
                grad.eps = (&g_p * h_in).sum();
                g_adj_raw += &g_p.dot(&h_in.t());
                g_h = &g_p * (1.0 + layer.eps) + cache.adj.t().dot(&g_p);
            }
        }
        _ => return Err(Error::Contract("cache architecture mismatch".into())),
    }

    // one undirected edge controls two mirror entries
    let mut adjacency = &g_adj_raw + &g_adj_raw.t();
    for i in 0..n {
        adjacency[[i, i]] = 0.0;
    }

    Ok(Gradients {
        params: grads,
        adjacency,
    })
}

/// Chains a gradient w.r.t. `Ahat` back to the raw entries of `A`.
///
/// With `s = d^{-1/2}` and `d_p` the row sum of `A + I`, entry (p, q) enters
/// `Ahat` directly (weight `s_p s_q`) and through `s_p` (every entry of row
/// p shifts `d_p` by one).
fn normalize_backward(norm: &NormCache, g_ahat: &Array2<f64>) -> Array2<f64> {
    let n = g_ahat.nrows();
    let weighted = g_ahat * &norm.a_tilde; // elementwise
    let row_sums = weighted.dot(&norm.inv_sqrt); // sum_j G_pj At_pj s_j
    let col_sums = weighted.t().dot(&norm.inv_sqrt); // sum_i G_ip At_ip s_i
    let mut out = Array2::zeros((n, n));
    for p in 0..n {
        let d_term = -0.5 * norm.degrees[p].powf(-1.5) * (row_sums[p] + col_sums[p]);
        for q in 0..n {
            out[[p, q]] = norm.inv_sqrt[p] * norm.inv_sqrt[q] * g_ahat[[p, q]] + d_term;
        }
    }
    out
}

fn check_cache(cache: &ForwardCache, params: &ModelParams, n: usize) -> Result<()> {
    let stale = |what: &str| Error::Contract(format!("stale forward cache: {what}"));
    if cache.adj.nrows() != n || cache.adj.ncols() != n {
        return Err(stale("adjacency shape drifted"));
    }
    if cache.layers.len() != params.layer_count() {
        return Err(stale("layer count drifted"));
    }
    if cache.logits.len() != params.num_classes() {
        return Err(stale("class count drifted"));
    }
    if cache.readout.len() != params.classifier_weight.nrows() {
        return Err(stale("readout width drifted"));
    }
    let gcn_cache = matches!(cache.layers.first(), Some(LayerCache::Gcn { .. }));
    let gcn_params = matches!(params.layers, Layers::Gcn(_));
    if gcn_cache != gcn_params {
        return Err(stale("architecture drifted"));
    }
    for (i, lc) in cache.layers.iter().enumerate() {
        let (rows, cols) = match (lc, &params.layers) {
            (LayerCache::Gcn { h_in, .. }, Layers::Gcn(l)) => {
                (h_in.ncols(), l[i].weight.nrows())
            }
            (LayerCache::Gin { h_in, .. }, Layers::Gin(l)) => (h_in.ncols(), l[i].w1.nrows()),
            _ => return Err(stale("architecture drifted")),
        };
        if rows != cols {
            return Err(stale("layer width drifted"));
        }
    }
    Ok(())
}

/// Central finite differences of the loss over the relaxed adjacency: both
/// mirror entries of each unordered pair move by the same `h`, matching the
/// symmetrized analytic gradient.
///
/// Panics if `(graph, params)` violate the [`forward`] contract; use it only
/// on inputs that already forward cleanly.
pub fn fd_grad_adjacency(graph: &Graph, params: &ModelParams, label: usize, h: f64) -> Array2<f64> {
    assert!(h > 0.0, "step size must be positive");
    let base = graph.adjacency_f64();
    let features = graph.features();
    let n = graph.node_count();
    let mut out = Array2::zeros((n, n));
    let loss_at = |adj: &Array2<f64>| -> f64 {
        let (logits, _) = forward_relaxed(adj, features, params).expect("forward contract");
        cross_entropy(&logits, label).expect("finite logits")
    };
    for u in 0..n {
        for v in (u + 1)..n {
            let mut plus = base.clone();
            plus[[u, v]] += h;
            plus[[v, u]] += h;
            let mut minus = base.clone();
            minus[[u, v]] -= h;
            minus[[v, u]] -= h;
            let g = (loss_at(&plus) - loss_at(&minus)) / (2.0 * h);
            out[[u, v]] = g;
            out[[v, u]] = g;
        }
    }
    out
}

/// Central finite differences of the loss over the flat parameter vector
/// (layout of [`ModelParams::to_flat`]). Verification oracle for
/// [`backward`]'s parameter gradients.
pub fn fd_grad_params(graph: &Graph, params: &ModelParams, label: usize, h: f64) -> Vec<f64> {
    assert!(h > 0.0, "step size must be positive");
    let mut probe = params.clone();
    let base = params.to_flat();
    let mut flat = base.clone();
    let mut out = Vec::with_capacity(base.len());
    for i in 0..base.len() {
        flat[i] = base[i] + h;
        probe.set_from_flat(&flat).expect("same layout");
        let (logits, _) = forward(graph, &probe).expect("forward contract");
        let plus = cross_entropy(&logits, label).expect("finite logits");
        flat[i] = base[i] - h;
        probe.set_from_flat(&flat).expect("same layout");
        let (logits, _) = forward(graph, &probe).expect("forward contract");
        let minus = cross_entropy(&logits, label).expect("finite logits");
        flat[i] = base[i];
        out.push((plus - minus) / (2.0 * h));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::{Arch, ModelConfig};
    use approx::assert_abs_diff_eq;
    use ndarray::array;
    use rand::SeedableRng;
    use rand_chacha::ChaCha20Rng;

    fn line_graph(n: usize, feature_dim: usize, label: usize) -> Graph {
        let mut adj = Array2::from_elem((n, n), false);
        for i in 0..n.saturating_sub(1) {
            adj[[i, i + 1]] = true;
            adj[[i + 1, i]] = true;
        }
        let mut features = Array2::zeros((n, feature_dim));
        for i in 0..n {
            features[[i, i % feature_dim]] = 1.0;
        }
        Graph::new(adj, features, label).unwrap()
    }

    #[test]
    fn normalize_zero_matrix_is_identity() {
        let a = Array2::zeros((4, 4));
        let ahat = normalize_adjacency(&a);
        for ((i, j), &x) in ahat.indexed_iter() {
            let expected = if i == j { 1.0 } else { 0.0 };
            assert_abs_diff_eq!(x, expected, epsilon = 1e-15);
        }
    }

    #[test]
    fn normalize_single_edge() {
        let a = array![[0.0, 1.0], [1.0, 0.0]];
        let ahat = normalize_adjacency(&a);
        for &x in ahat.iter() {
            assert_abs_diff_eq!(x, 0.5, epsilon = 1e-12);
        }
    }

    #[test]
    fn normalize_is_symmetric() {
        let mut rng = ChaCha20Rng::seed_from_u64(4);
        let g = crate::test_support::random_graph(&mut rng, 7, 3, 2);
        let ahat = normalize_adjacency(&g.adjacency_f64());
        for i in 0..7 {
            for j in 0..7 {
                assert_eq!(ahat[[i, j]], ahat[[j, i]]);
            }
        }
        assert!(ahat.iter().all(|&x| x >= 0.0));
    }

    #[test]
    fn normalize_spectral_radius_at_most_one() {
        // power iteration on a fixed 6-node graph
        let mut rng = ChaCha20Rng::seed_from_u64(11);
        let g = crate::test_support::random_graph(&mut rng, 6, 2, 2);
        let ahat = normalize_adjacency(&g.adjacency_f64());
        let mut v = Array1::from_elem(6, 1.0 / (6f64).sqrt());
        let mut radius = 0.0;
        for _ in 0..500 {
            let w = ahat.dot(&v);
            radius = w.dot(&w).sqrt();
            if radius == 0.0 {
                break;
            }
            v = w / radius;
        }
        assert!(radius <= 1.0 + 1e-9, "spectral radius {radius}");
    }

    #[test]
    fn zero_weights_give_bias_logits() {
        for arch in [Arch::Gcn, Arch::Gin] {
            let mut rng = ChaCha20Rng::seed_from_u64(5);
            let mut params =
                ModelParams::init(&ModelConfig::new(arch), 3, 2, &mut rng).unwrap();
            let zeros = vec![0.0; params.num_params()];
            params.set_from_flat(&zeros).unwrap();
            params.classifier_bias = array![0.25, -0.75];
            let g = line_graph(5, 3, 0);
            let (logits, _) = forward(&g, &params).unwrap();
            assert_abs_diff_eq!(logits[0], 0.25, epsilon = 1e-15);
            assert_abs_diff_eq!(logits[1], -0.75, epsilon = 1e-15);
        }
    }

    #[test]
    fn single_node_gcn_readout_is_relu_xw() {
        // one node, one layer: Ahat = [1], readout = relu(x W)
        let mut rng = ChaCha20Rng::seed_from_u64(6);
        let params = ModelParams::init(
            &ModelConfig {
                arch: Arch::Gcn,
                layers: 1,
                hidden: 4,
            },
            3,
            2,
            &mut rng,
        )
        .unwrap();
        let g = line_graph(1, 3, 0);
        let (_, cache) = forward(&g, &params).unwrap();
        let Layers::Gcn(layers) = &params.layers else { unreachable!() };
        let expected = g.features().dot(&layers[0].weight).mapv(|x| x.max(0.0));
        for (a, b) in cache.readout().iter().zip(expected.row(0).iter()) {
            assert_abs_diff_eq!(a, b, epsilon = 1e-15);
        }
    }

    #[test]
    fn forward_is_pure() {
        let mut rng = ChaCha20Rng::seed_from_u64(7);
        let g = crate::test_support::random_graph(&mut rng, 6, 4, 3);
        let params = ModelParams::init(&ModelConfig::new(Arch::Gin), 4, 3, &mut rng).unwrap();
        let (a, _) = forward(&g, &params).unwrap();
        let (b, _) = forward(&g, &params).unwrap();
        assert_eq!(a, b); // bit-identical
    }

    #[test]
    fn forward_rejects_feature_mismatch() {
        let mut rng = ChaCha20Rng::seed_from_u64(8);
        let params = ModelParams::init(&ModelConfig::new(Arch::Gcn), 5, 2, &mut rng).unwrap();
        let g = line_graph(4, 3, 0);
        assert!(matches!(forward(&g, &params), Err(Error::Contract(_))));
    }

    #[test]
    fn cross_entropy_uniform_logits() {
        for k in [2usize, 3, 7] {
            let logits = Array1::from_elem(k, 0.37);
            let loss = cross_entropy(&logits, k - 1).unwrap();
            assert_abs_diff_eq!(loss, (k as f64).ln(), epsilon = 1e-12);
        }
    }

    #[test]
    fn cross_entropy_dominant_logit_no_overflow() {
        let logits = array![1000.0, 0.0];
        let loss = cross_entropy(&logits, 0).unwrap();
        assert!(loss >= 0.0 && loss < 1e-12, "loss {loss}");
    }

    #[test]
    fn cross_entropy_frozen_value() {
        // -log(e^3 / (e^1 + e^2 + e^3)), from an independent evaluation
        let loss = cross_entropy(&array![1.0, 2.0, 3.0], 2).unwrap();
        assert_abs_diff_eq!(loss, 0.40760596444438046, epsilon = 1e-15);
    }

    #[test]
    fn cross_entropy_rejects_bad_label() {
        assert!(cross_entropy(&array![0.0, 1.0], 2).is_err());
        assert!(cross_entropy(&array![f64::NAN, 1.0], 0).is_err());
    }

    #[test]
    fn cross_entropy_decreases_in_true_logit() {
        let mut prev = f64::INFINITY;
        for step in 0..20 {
            let logits = array![0.3, -0.4 + 0.5 * step as f64];
            let loss = cross_entropy(&logits, 1).unwrap();
            assert!(loss >= 0.0);
            assert!(loss < prev);
            prev = loss;
        }
    }

    #[test]
    fn zero_first_layer_weights_zero_adjacency_gradient() {
        let mut rng = ChaCha20Rng::seed_from_u64(9);
        let mut params = ModelParams::init(&ModelConfig::new(Arch::Gcn), 3, 2, &mut rng).unwrap();
        if let Layers::Gcn(layers) = &mut params.layers {
            layers[0].weight.fill(0.0);
        }
        let g = line_graph(5, 3, 1);
        let (_, cache) = forward(&g, &params).unwrap();
        let grads = backward(&g, &params, &cache, 1).unwrap();
        assert!(grads.adjacency.iter().all(|&x| x == 0.0));
    }

    #[test]
    fn adjacency_gradient_symmetric_zero_diagonal() {
        for arch in [Arch::Gcn, Arch::Gin] {
            let mut rng = ChaCha20Rng::seed_from_u64(10);
            let g = crate::test_support::random_graph(&mut rng, 6, 3, 2);
            let params = ModelParams::init(&ModelConfig::new(arch), 3, 2, &mut rng).unwrap();
            let (_, cache) = forward(&g, &params).unwrap();
            let grads = backward(&g, &params, &cache, g.label()).unwrap();
            for i in 0..6 {
                assert_eq!(grads.adjacency[[i, i]], 0.0);
                for j in 0..6 {
                    assert_eq!(grads.adjacency[[i, j]], grads.adjacency[[j, i]]);
                }
            }
        }
    }

    #[test]
    fn backward_rejects_stale_cache() {
        let mut rng = ChaCha20Rng::seed_from_u64(12);
        let g5 = line_graph(5, 3, 0);
        let g6 = line_graph(6, 3, 0);
        let params = ModelParams::init(&ModelConfig::new(Arch::Gcn), 3, 2, &mut rng).unwrap();
        let (_, cache) = forward(&g5, &params).unwrap();
        assert!(matches!(
            backward(&g6, &params, &cache, 0),
            Err(Error::Contract(_))
        ));
        // architecture drift
        let gin = ModelParams::init(&ModelConfig::new(Arch::Gin), 3, 2, &mut rng).unwrap();
        assert!(matches!(
            backward(&g5, &gin, &cache, 0),
            Err(Error::Contract(_))
        ));
    }

    #[test]
    fn fd_zero_weight_model_gives_zero_matrix() {
        let mut rng = ChaCha20Rng::seed_from_u64(13);
        let mut params = ModelParams::init(&ModelConfig::new(Arch::Gcn), 3, 2, &mut rng).unwrap();
        let zeros = vec![0.0; params.num_params()];
        params.set_from_flat(&zeros).unwrap();
        let g = line_graph(4, 3, 0);
        let fd = fd_grad_adjacency(&g, &params, 0, 1e-4);
        assert!(fd.iter().all(|&x| x == 0.0));
    }

    #[test]
    fn fd_matches_hand_derived_two_node_linear_model() {
        // Single GCN layer, hidden 1, on 2 nodes with no edge, probed at the
        // empty adjacency along the pair value a (both mirror entries move):
        //   A+I = [[1, a], [a, 1]], degrees 1+a each,
        //   Ahat = [[1/(1+a), a/(1+a)], [a/(1+a), 1/(1+a)]].
        let adj = Array2::from_elem((2, 2), false);
        let features = array![[1.0, 0.0], [0.0, 1.0]];
        let g = Graph::new(adj, features, 0).unwrap();
        let params = ModelParams {
            layers: Layers::Gcn(vec![GcnLayer {
                weight: array![[1.0], [2.0]],
            }]),
            classifier_weight: array![[1.0, -1.0]],
            classifier_bias: array![0.0, 0.0],
        };
        // At a = 0: Ahat = I, H = relu([[1],[2]]) = [[1],[2]], r = 1.5,
        // logits = (1.5, -1.5), p0 = sigma(3) side. d logits / d a:
        //   d Ahat/da at 0: diagonal entries d(1/(1+a))/da = -1, off-diag
        //   entries d(a/(1+a))/da = 1 (evaluated at a = 0).
        //   dH = dAhat . X W = [[-1*1 + 1*2], [1*1 - 1*2]] = [[1], [-1]]
        //   dr = mean = 0, so d logits = 0 and dL/da = 0.
        let (_, cache) = forward(&g, &params).unwrap();
        let analytic = backward(&g, &params, &cache, 0).unwrap();
        let fd = fd_grad_adjacency(&g, &params, 0, 1e-5);
        assert_abs_diff_eq!(analytic.adjacency[[0, 1]], 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(fd[[0, 1]], 0.0, epsilon = 1e-7);
    }

    use crate::nn::GcnLayer;

    #[test]
    fn analytic_gradients_match_finite_differences() {
        let h = 1e-4;
        for arch in [Arch::Gcn, Arch::Gin] {
            for seed in 0..10u64 {
                let mut rng = ChaCha20Rng::seed_from_u64(1000 + seed);
                let n = 3 + (seed as usize % 6); // 3..=8 nodes
                let g = crate::test_support::random_graph(&mut rng, n, 4, 3);
                let params = ModelParams::init(
                    &ModelConfig {
                        arch,
                        layers: 2,
                        hidden: 5,
                    },
                    4,
                    3,
                    &mut rng,
                )
                .unwrap();
                let (_, cache) = forward(&g, &params).unwrap();
                let grads = backward(&g, &params, &cache, g.label()).unwrap();

                let fd_adj = fd_grad_adjacency(&g, &params, g.label(), h);
                let mut worst = 0f64;
                for u in 0..n {
                    for v in (u + 1)..n {
                        worst = worst.max(crate::test_support::rel_err(
                            grads.adjacency[[u, v]],
                            fd_adj[[u, v]],
                        ));
                    }
                }
                assert!(
                    worst <= 1e-4,
                    "{arch} seed {seed}: adjacency gradient rel err {worst}"
                );

                let fd_p = fd_grad_params(&g, &params, g.label(), h);
                let analytic = grads.params.to_flat();
                let worst_p = analytic
                    .iter()
                    .zip(fd_p.iter())
                    .map(|(&a, &b)| crate::test_support::rel_err(a, b))
                    .fold(0f64, f64::max);
                assert!(
                    worst_p <= 1e-4,
                    "{arch} seed {seed}: parameter gradient rel err {worst_p}"
                );
            }
        }
    }
}
