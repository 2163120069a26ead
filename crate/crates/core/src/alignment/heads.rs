//! Trainable alignment heads: contrastive temperature and the parent
//! classifier.

use rand::Rng;

use crate::autodiff::{ParamId, ParamStore, Tape, Tensor, Var};
use crate::error::{Error, Result};
use crate::rng::normal_vec;

/// Temperature `τ = exp(log_tau)` and a `D→H→P` ReLU classifier over
/// parent categories.
#[derive(Clone, Debug, PartialEq)]
pub struct AlignmentHeads {
    pub log_tau: ParamId,
    pub learn_temperature: bool,
    pub cls_w1: ParamId,
    pub cls_b1: ParamId,
    pub cls_w2: ParamId,
    pub cls_b2: ParamId,
    pub parents: usize,
}

impl AlignmentHeads {
    pub fn register(
        store: &mut ParamStore,
        dim: usize,
        hidden: usize,
        parents: usize,
        tau_init: f64,
        learn_temperature: bool,
        rng: &mut impl Rng,
    ) -> Result<Self> {
        if !(tau_init > 0.0 && tau_init.is_finite()) {
            return Err(Error::Config(format!("temperature must be positive, got {tau_init}")));
        }
        if dim == 0 || hidden == 0 || parents == 0 {
            return Err(Error::Config("classifier needs positive dim, hidden width and parent count".into()));
        }
        let w = |rng: &mut _, i: usize, o: usize| {
            Tensor::new(vec![i, o], normal_vec(rng, i * o, (2.0 / i as f64).sqrt())).expect("positive dims")
        };
        Ok(Self {
            log_tau: store.register("align.log_tau", Tensor::scalar(tau_init.ln()), false),
            learn_temperature,
            cls_w1: store.register("align.cls_w1", w(rng, dim, hidden), true),
            cls_b1: store.register("align.cls_b1", Tensor::zeros(&[hidden]), false),
            cls_w2: store.register("align.cls_w2", w(rng, hidden, parents), true),
            cls_b2: store.register("align.cls_b2", Tensor::zeros(&[parents]), false),
            parents,
        })
    }

    pub fn from_store(store: &ParamStore, learn_temperature: bool) -> Result<Self> {
        let get = |n: &str| {
            store
                .find(n)
                .ok_or_else(|| Error::Checkpoint(format!("missing parameter {n}")))
        };
        let cls_w2 = get("align.cls_w2")?;
        Ok(Self {
            log_tau: get("align.log_tau")?,
            learn_temperature,
            cls_w1: get("align.cls_w1")?,
            cls_b1: get("align.cls_b1")?,
            cls_w2,
            cls_b2: get("align.cls_b2")?,
            parents: store.get(cls_w2).cols(),
        })
    }

    pub fn tau(&self, store: &ParamStore) -> f64 {
        store.get(self.log_tau).item().exp()
    }

    /// `1/τ` as a scalar node; a constant when the temperature is frozen.
    pub fn inv_tau(&self, tape: &mut Tape, store: &ParamStore) -> Var {
        if self.learn_temperature {
            let lt = tape.param(store, self.log_tau);
            let n = tape.neg(lt);
            tape.exp(n)
        } else {
            tape.constant(Tensor::scalar(1.0 / self.tau(store)))
        }
    }

    /// Parent logits `N×P` for features `N×D`.
    pub fn classify(&self, tape: &mut Tape, store: &ParamStore, h: Var) -> Result<Var> {
        let w1 = tape.param(store, self.cls_w1);
        let b1 = tape.param(store, self.cls_b1);
        let w2 = tape.param(store, self.cls_w2);
        let b2 = tape.param(store, self.cls_b2);
        let z = tape.matmul(h, w1)?;
        let z = tape.add_row(z, b1)?;
        let z = tape.relu(z);
        let z = tape.matmul(z, w2)?;
        tape.add_row(z, b2)
    }
}
