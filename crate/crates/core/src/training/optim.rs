//! AdamW with decoupled weight decay and a cosine learning-rate schedule.

use std::f64::consts::PI;

use crate::autodiff::{ParamStore, Tensor};
use crate::error::{Error, Result};

/// `base_lr · ½(1 + cos(π·step/total_steps))`.
pub fn cosine_lr(step: usize, total_steps: usize, base_lr: f64) -> Result<f64> {
    if total_steps == 0 || step > total_steps {
        return Err(Error::Contract(format!(
            "step {step} outside schedule of {total_steps} steps"
        )));
    }
    Ok(base_lr * 0.5 * (1.0 + (PI * step as f64 / total_steps as f64).cos()))
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AdamHyper {
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub weight_decay: f64,
}

impl Default for AdamHyper {
    fn default() -> Self {
        Self {
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            weight_decay: 0.01,
        }
    }
}

/// First and second moments per parameter, in store order.
#[derive(Clone, Debug, PartialEq)]
pub struct AdamState {
    pub step: u64,
    pub m: Vec<Tensor>,
    pub v: Vec<Tensor>,
}

impl AdamState {
    pub fn new(store: &ParamStore) -> Self {
        let zeros: Vec<Tensor> = store
            .entries()
            .iter()
            .map(|e| Tensor::zeros(e.value.shape()))
            .collect();
        Self {
            step: 0,
            m: zeros.clone(),
            v: zeros,
        }
    }
}

/// One AdamW update. Decay applies only to parameters flagged for it:
/// `p ← p·(1 − lr·wd) − lr·m̂/(√v̂ + ε)`.
pub fn adamw_step(
    store: &mut ParamStore,
    grads: &[Tensor],
    state: &mut AdamState,
    lr: f64,
    hyper: &AdamHyper,
) -> Result<()> {
    if grads.len() != store.len() || state.m.len() != store.len() {
        return Err(Error::shape("adamw_step", &[store.len()], &[grads.len(), state.m.len()]));
    }
    for (i, id) in store.ids().collect::<Vec<_>>().into_iter().enumerate() {
        let shape = store.get(id).shape().to_vec();
        if grads[i].shape() != shape.as_slice() || state.m[i].shape() != shape.as_slice() {
            return Err(Error::shape("adamw_step", &shape, grads[i].shape()));
        }
    }
    state.step += 1;
    let t = state.step as i32;
    let c1 = 1.0 - hyper.beta1.powi(t);
    let c2 = 1.0 - hyper.beta2.powi(t);
    for (i, id) in store.ids().collect::<Vec<_>>().into_iter().enumerate() {
        let decay = if store.entry(id).decay { lr * hyper.weight_decay } else { 0.0 };
        let p = store.get_mut(id).data_mut();
        let m = state.m[i].data_mut();
        let v = state.v[i].data_mut();
        for (j, g) in grads[i].data().iter().enumerate() {
            m[j] = hyper.beta1 * m[j] + (1.0 - hyper.beta1) * g;
            v[j] = hyper.beta2 * v[j] + (1.0 - hyper.beta2) * g * g;
            let mh = m[j] / c1;
            let vh = v[j] / c2;
            p[j] = p[j] * (1.0 - decay) - lr * mh / (vh.sqrt() + hyper.eps);
        }
    }
    Ok(())
}
