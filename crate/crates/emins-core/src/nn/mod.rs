//! Minimal dense GNN engine: GCN/GIN forward pass, cross-entropy, analytic
//! reverse-mode gradients with respect to both parameters and the adjacency
//! matrix, an Adam optimizer, and finite-difference oracles.
//!
//! Everything is 64-bit and deterministic; there is no batching across
//! graphs, no dropout, and no GPU path.

mod adam;
mod autograd;
mod checkpoint;

pub use adam::{update_params, AdamState};
pub use autograd::{
    backward, cross_entropy, fd_grad_adjacency, fd_grad_params, forward, forward_relaxed,
    normalize_adjacency, ForwardCache, Gradients,
};
pub use checkpoint::{load_model, save_model};

use ndarray::{Array1, Array2};
use rand::Rng;

use crate::error::{Error, Result};

/// Supported message-passing architectures.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Arch {
    Gcn,
    Gin,
}

impl std::fmt::Display for Arch {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Arch::Gcn => write!(f, "gcn"),
            Arch::Gin => write!(f, "gin"),
        }
    }
}

impl std::str::FromStr for Arch {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "gcn" => Ok(Arch::Gcn),
            "gin" => Ok(Arch::Gin),
            other => Err(format!("unknown architecture {other:?} (expected gcn or gin)")),
        }
    }
}

/// Network shape: message-passing depth and hidden width. The defaults are
/// the smallest standard configuration for the benchmark datasets.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct ModelConfig {
    pub arch: Arch,
    pub layers: usize,
    pub hidden: usize,
}

impl ModelConfig {
    pub fn new(arch: Arch) -> Self {
        Self {
            arch,
            layers: 2,
            hidden: 32,
        }
    }
}

/// One GCN layer: `H' = relu(Ahat H W)`.
#[derive(Debug, Clone, PartialEq)]
pub struct GcnLayer {
    pub weight: Array2<f64>,
}

/// One GIN layer: `H' = relu((1 + eps) H + A H) . W1 -> relu -> . W2`
/// with sum-based neighbor aggregation over the raw adjacency.
#[derive(Debug, Clone, PartialEq)]
pub struct GinLayer {
    pub w1: Array2<f64>,
    pub w2: Array2<f64>,
    pub eps: f64,
}

/// Per-architecture layer stacks.
#[derive(Debug, Clone, PartialEq)]
pub enum Layers {
    Gcn(Vec<GcnLayer>),
    Gin(Vec<GinLayer>),
}

/// All weights of a surrogate/victim model. The same shape family doubles
/// as the parameter-gradient container.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams {
    pub layers: Layers,
    pub classifier_weight: Array2<f64>,
    pub classifier_bias: Array1<f64>,
}

impl ModelParams {
    /// Glorot-uniform weights, zero biases, GIN epsilons at zero, drawn from
    /// the caller's seeded generator.
    pub fn init<R: Rng>(
        config: &ModelConfig,
        feature_dim: usize,
        num_classes: usize,
        rng: &mut R,
    ) -> Result<Self> {
        if config.layers == 0 || config.hidden == 0 {
            return Err(Error::Contract("model needs at least one layer and a positive hidden width".into()));
        }
        if feature_dim == 0 || num_classes == 0 {
            return Err(Error::Contract("feature_dim and num_classes must be positive".into()));
        }
        let glorot = |rows: usize, cols: usize, rng: &mut R| -> Array2<f64> {
            let limit = (6.0 / (rows + cols) as f64).sqrt();
            let mut m = Array2::zeros((rows, cols));
            for x in m.iter_mut() {
                *x = rng.random_range(-limit..limit);
            }
            m
        };
        let mut in_dim = feature_dim;
        let layers = match config.arch {
            Arch::Gcn => {
                let mut layers = Vec::with_capacity(config.layers);
                for _ in 0..config.layers {
                    layers.push(GcnLayer {
                        weight: glorot(in_dim, config.hidden, rng),
                    });
                    in_dim = config.hidden;
                }
                Layers::Gcn(layers)
            }
            Arch::Gin => {
                let mut layers = Vec::with_capacity(config.layers);
                for _ in 0..config.layers {
                    layers.push(GinLayer {
                        w1: glorot(in_dim, config.hidden, rng),
                        w2: glorot(config.hidden, config.hidden, rng),
                        eps: 0.0,
                    });
                    in_dim = config.hidden;
                }
                Layers::Gin(layers)
            }
        };
        Ok(Self {
            layers,
            classifier_weight: glorot(in_dim, num_classes, rng),
            classifier_bias: Array1::zeros(num_classes),
        })
    }

    pub fn arch(&self) -> Arch {
        match self.layers {
            Layers::Gcn(_) => Arch::Gcn,
            Layers::Gin(_) => Arch::Gin,
        }
    }

    /// Expected node-feature dimension.
    pub fn input_dim(&self) -> usize {
        match &self.layers {
            Layers::Gcn(l) => l[0].weight.nrows(),
            Layers::Gin(l) => l[0].w1.nrows(),
        }
    }

    pub fn num_classes(&self) -> usize {
        self.classifier_weight.ncols()
    }

    pub fn layer_count(&self) -> usize {
        match &self.layers {
            Layers::Gcn(l) => l.len(),
            Layers::Gin(l) => l.len(),
        }
    }

    /// Total scalar parameter count.
    pub fn num_params(&self) -> usize {
        let layer_params: usize = match &self.layers {
            Layers::Gcn(l) => l.iter().map(|x| x.weight.len()).sum(),
            Layers::Gin(l) => l.iter().map(|x| x.w1.len() + x.w2.len() + 1).sum(),
        };
        layer_params + self.classifier_weight.len() + self.classifier_bias.len()
    }

    /// Same shapes, all values zero. Used to accumulate gradients.
    pub fn zeros_like(&self) -> Self {
        let layers = match &self.layers {
            Layers::Gcn(l) => Layers::Gcn(
                l.iter()
                    .map(|x| GcnLayer {
                        weight: Array2::zeros(x.weight.raw_dim()),
                    })
                    .collect(),
            ),
            Layers::Gin(l) => Layers::Gin(
                l.iter()
                    .map(|x| GinLayer {
                        w1: Array2::zeros(x.w1.raw_dim()),
                        w2: Array2::zeros(x.w2.raw_dim()),
                        eps: 0.0,
                    })
                    .collect(),
            ),
        };
        Self {
            layers,
            classifier_weight: Array2::zeros(self.classifier_weight.raw_dim()),
            classifier_bias: Array1::zeros(self.classifier_bias.raw_dim()),
        }
    }

    /// Flattens every tensor row-major into one vector. Layer tensors come
    /// first in layer order (GIN: w1, w2, eps), then the classifier weight
    /// and bias. The checkpoint format and Adam state share this order.
    pub fn to_flat(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.num_params());
        match &self.layers {
            Layers::Gcn(l) => {
                for x in l {
                    out.extend(x.weight.iter());
                }
            }
            Layers::Gin(l) => {
                for x in l {
                    out.extend(x.w1.iter());
                    out.extend(x.w2.iter());
                    out.push(x.eps);
                }
            }
        }
        out.extend(self.classifier_weight.iter());
        out.extend(self.classifier_bias.iter());
        out
    }

    /// Writes values back from the flat layout produced by [`Self::to_flat`].
    pub fn set_from_flat(&mut self, flat: &[f64]) -> Result<()> {
        if flat.len() != self.num_params() {
            return Err(Error::Contract(format!(
                "flat vector has {} values, model has {} parameters",
                flat.len(),
                self.num_params()
            )));
        }
        let mut it = flat.iter().copied();
        match &mut self.layers {
            Layers::Gcn(l) => {
                for x in l {
                    for w in x.weight.iter_mut() {
                        *w = it.next().unwrap();
                    }
                }
            }
            Layers::Gin(l) => {
                for x in l {
                    for w in x.w1.iter_mut() {
                        *w = it.next().unwrap();
                    }
                    for w in x.w2.iter_mut() {
                        *w = it.next().unwrap();
                    }
                    x.eps = it.next().unwrap();
                }
            }
        }
        for w in self.classifier_weight.iter_mut() {
            *w = it.next().unwrap();
        }
        for w in self.classifier_bias.iter_mut() {
            *w = it.next().unwrap();
        }
        Ok(())
    }

    /// Checks the shape chain (feature_dim -> hidden ... -> num_classes) and
    /// entry finiteness.
    pub fn validate(&self) -> Result<()> {
        let mut dim = self.input_dim();
        match &self.layers {
            Layers::Gcn(l) => {
                if l.is_empty() {
                    return Err(Error::Contract("model has no layers".into()));
                }
                for (i, x) in l.iter().enumerate() {
                    if x.weight.nrows() != dim {
                        return Err(Error::Contract(format!(
                            "layer {i} expects input {dim}, weight has {} rows",
                            x.weight.nrows()
                        )));
                    }
                    dim = x.weight.ncols();
                }
            }
            Layers::Gin(l) => {
                if l.is_empty() {
                    return Err(Error::Contract("model has no layers".into()));
                }
                for (i, x) in l.iter().enumerate() {
                    if x.w1.nrows() != dim {
                        return Err(Error::Contract(format!(
                            "layer {i} expects input {dim}, w1 has {} rows",
                            x.w1.nrows()
                        )));
                    }
                    if x.w2.nrows() != x.w1.ncols() {
                        return Err(Error::Contract(format!(
                            "layer {i} mlp shapes do not chain: {}x{} then {}x{}",
                            x.w1.nrows(),
                            x.w1.ncols(),
                            x.w2.nrows(),
                            x.w2.ncols()
                        )));
                    }
                    dim = x.w2.ncols();
                }
            }
        }
        if self.classifier_weight.nrows() != dim {
            return Err(Error::Contract(format!(
                "classifier expects input {dim}, weight has {} rows",
                self.classifier_weight.nrows()
            )));
        }
        if self.classifier_bias.len() != self.classifier_weight.ncols() {
            return Err(Error::Contract("classifier bias length mismatch".into()));
        }
        if self.to_flat().iter().any(|x| !x.is_finite()) {
            return Err(Error::Contract("non-finite parameter entry".into()));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha20Rng;

    #[test]
    fn init_shapes_chain() {
        let mut rng = ChaCha20Rng::seed_from_u64(1);
        for arch in [Arch::Gcn, Arch::Gin] {
            let p = ModelParams::init(&ModelConfig::new(arch), 7, 3, &mut rng).unwrap();
            p.validate().unwrap();
            assert_eq!(p.input_dim(), 7);
            assert_eq!(p.num_classes(), 3);
            assert_eq!(p.layer_count(), 2);
        }
    }

    #[test]
    fn init_is_seed_deterministic() {
        let cfg = ModelConfig::new(Arch::Gin);
        let a = ModelParams::init(&cfg, 5, 2, &mut ChaCha20Rng::seed_from_u64(9)).unwrap();
        let b = ModelParams::init(&cfg, 5, 2, &mut ChaCha20Rng::seed_from_u64(9)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn flat_round_trip() {
        let mut rng = ChaCha20Rng::seed_from_u64(3);
        let p = ModelParams::init(&ModelConfig::new(Arch::Gin), 4, 2, &mut rng).unwrap();
        let flat = p.to_flat();
        assert_eq!(flat.len(), p.num_params());
        let mut q = p.zeros_like();
        q.set_from_flat(&flat).unwrap();
        assert_eq!(p, q);
    }
}
