//! Adam optimizer over the flat parameter layout.

use crate::error::{Error, Result};
use crate::nn::autograd::Gradients;
use crate::nn::ModelParams;

const BETA1: f64 = 0.9;
const BETA2: f64 = 0.999;
const EPSILON: f64 = 1e-8;

/// First/second moment estimates plus the step counter. One state per
/// trained model; shapes follow [`ModelParams::to_flat`].
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    step: u64,
    m: Vec<f64>,
    v: Vec<f64>,
}

impl AdamState {
    pub fn new(num_params: usize) -> Self {
        Self {
            step: 0,
            m: vec![0.0; num_params],
            v: vec![0.0; num_params],
        }
    }

    pub fn step_count(&self) -> u64 {
        self.step
    }
}

/// One Adam step over every parameter tensor, in place.
pub fn update_params(
    params: &mut ModelParams,
    grads: &Gradients,
    state: &mut AdamState,
    lr: f64,
) -> Result<()> {
    let g = grads.params.to_flat();
    if g.len() != state.m.len() {
        return Err(Error::Contract(format!(
            "optimizer state sized for {} parameters, gradients have {}",
            state.m.len(),
            g.len()
        )));
    }
    if g.iter().any(|x| !x.is_finite()) {
        return Err(Error::Divergence("adam update (non-finite gradient)".into()));
    }

    let mut flat = params.to_flat();
    if flat.len() != g.len() {
        return Err(Error::Contract("gradient/parameter shape mismatch".into()));
    }

    state.step += 1;
    let t = state.step as i32;
    let bias1 = 1.0 - BETA1.powi(t);
    let bias2 = 1.0 - BETA2.powi(t);
    for i in 0..flat.len() {
        state.m[i] = BETA1 * state.m[i] + (1.0 - BETA1) * g[i];
        state.v[i] = BETA2 * state.v[i] + (1.0 - BETA2) * g[i] * g[i];
        let m_hat = state.m[i] / bias1;
        let v_hat = state.v[i] / bias2;
        flat[i] -= lr * m_hat / (v_hat.sqrt() + EPSILON);
    }
    params.set_from_flat(&flat)
}
