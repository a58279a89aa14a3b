//! Self-describing JSON model checkpoints.
//!
//! The container stores the architecture tag, per-tensor shapes, and flattened
//! row-major weight data. JSON floats are written in shortest round-trip form,
//! so save-then-load reproduces every 64-bit value exactly.

use std::fs;
use std::path::Path;

use ndarray::{Array1, Array2};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nn::{Arch, GcnLayer, GinLayer, Layers, ModelParams};

const FORMAT_TAG: &str = "emins-model/1";

#[derive(Debug, Serialize, Deserialize)]
struct MatrixData {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl MatrixData {
    fn from_array(a: &Array2<f64>) -> Self {
        Self {
            rows: a.nrows(),
            cols: a.ncols(),
            data: a.iter().copied().collect(),
        }
    }

    fn into_array(self) -> Result<Array2<f64>> {
        if self.data.len() != self.rows * self.cols {
            return Err(Error::Contract(format!(
                "matrix data length {} does not match {}x{}",
                self.data.len(),
                self.rows,
                self.cols
            )));
        }
        Array2::from_shape_vec((self.rows, self.cols), self.data)
            .map_err(|e| Error::Contract(e.to_string()))
    }
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
enum LayerData {
    Gcn { weight: MatrixData },
    Gin { w1: MatrixData, w2: MatrixData, eps: f64 },
}

#[derive(Debug, Serialize, Deserialize)]
struct Checkpoint {
    format: String,
    arch: Arch,
    layers: Vec<LayerData>,
    classifier_weight: MatrixData,
    classifier_bias: Vec<f64>,
}

/// Serializes a model to pretty JSON at `path`.
pub fn save_model(params: &ModelParams, path: &Path) -> Result<()> {
    let layers = match &params.layers {
        Layers::Gcn(l) => l
            .iter()
            .map(|x| LayerData::Gcn {
                weight: MatrixData::from_array(&x.weight),
            })
            .collect(),
        Layers::Gin(l) => l
            .iter()
            .map(|x| LayerData::Gin {
                w1: MatrixData::from_array(&x.w1),
                w2: MatrixData::from_array(&x.w2),
                eps: x.eps,
            })
            .collect(),
    };
    let checkpoint = Checkpoint {
        format: FORMAT_TAG.to_string(),
        arch: params.arch(),
        layers,
        classifier_weight: MatrixData::from_array(&params.classifier_weight),
        classifier_bias: params.classifier_bias.to_vec(),
    };
    let json = serde_json::to_string_pretty(&checkpoint)
        .map_err(|e| Error::Contract(format!("checkpoint serialization failed: {e}")))?;
    fs::write(path, json).map_err(|e| Error::io(path, e))
}

/// Loads a model written by [`save_model`], validating the shape chain.
pub fn load_model(path: &Path) -> Result<ModelParams> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let checkpoint: Checkpoint = serde_json::from_str(&text)
        .map_err(|e| Error::Contract(format!("{}: invalid checkpoint: {e}", path.display())))?;
    if checkpoint.format != FORMAT_TAG {
        return Err(Error::Contract(format!(
            "{}: unsupported checkpoint format {:?}",
            path.display(),
            checkpoint.format
        )));
    }
    let layers = match checkpoint.arch {
        Arch::Gcn => Layers::Gcn(
            checkpoint
                .layers
                .into_iter()
                .map(|l| match l {
                    LayerData::Gcn { weight } => Ok(GcnLayer {
                        weight: weight.into_array()?,
                    }),
                    LayerData::Gin { .. } => {
                        Err(Error::Contract("gin layer in gcn checkpoint".into()))
                    }
                })
                .collect::<Result<Vec<_>>>()?,
        ),
        Arch::Gin => Layers::Gin(
            checkpoint
                .layers
                .into_iter()
                .map(|l| match l {
                    LayerData::Gin { w1, w2, eps } => Ok(GinLayer {
                        w1: w1.into_array()?,
                        w2: w2.into_array()?,
                        eps,
                    }),
                    LayerData::Gcn { .. } => {
                        Err(Error::Contract("gcn layer in gin checkpoint".into()))
                    }
                })
                .collect::<Result<Vec<_>>>()?,
        ),
    };
    let params = ModelParams {
        layers,
        classifier_weight: checkpoint.classifier_weight.into_array()?,
        classifier_bias: Array1::from_vec(checkpoint.classifier_bias),
    };
    params.validate()?;
    Ok(params)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::ModelConfig;
    use rand::SeedableRng;
    use rand_chacha::ChaCha20Rng;

    #[test]
    fn save_load_is_bit_exact() {
        for arch in [Arch::Gcn, Arch::Gin] {
            let mut rng = ChaCha20Rng::seed_from_u64(17);
            let params = ModelParams::init(&ModelConfig::new(arch), 6, 3, &mut rng).unwrap();
            let dir = tempfile::tempdir().unwrap();
            let path = dir.path().join("model.json");
            save_model(&params, &path).unwrap();
            let loaded = load_model(&path).unwrap();
            // bit-exact on all 64-bit values
            assert_eq!(params.to_flat(), loaded.to_flat());
            assert_eq!(params.arch(), loaded.arch());
        }
    }

    #[test]
    fn rejects_malformed_shape() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.json");
        std::fs::write(
            &path,
            r#"{"format":"emins-model/1","arch":"gcn",
               "layers":[{"gcn":{"weight":{"rows":2,"cols":2,"data":[1.0]}}}],
               "classifier_weight":{"rows":2,"cols":2,"data":[0,0,0,0]},
               "classifier_bias":[0,0]}"#,
        )
        .unwrap();
        assert!(load_model(&path).is_err());
    }
}
