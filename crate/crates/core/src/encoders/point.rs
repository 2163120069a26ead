//! Trainable permutation-invariant point-cloud encoder.

use rand::Rng;

use crate::autodiff::{ParamId, ParamStore, Tape, Tensor, Var};
use crate::dataset::PointCloud;
use crate::error::{Error, Result};
use crate::rng::normal_vec;

/// A point-cloud network mapping a batch of clouds to `N×D` unit rows.
pub trait PointBackbone {
    fn out_dim(&self) -> usize;

    fn forward(&self, tape: &mut Tape, store: &ParamStore, clouds: &[&PointCloud]) -> Result<Var>;
}

/// Shared per-point MLP `3→h→h` (ReLU), coordinate-wise max pooling, then a
/// linear head `h→D` and L2 normalization.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PointEncoderParams {
    pub hidden: usize,
    pub dim: usize,
    pub w1: ParamId,
    pub b1: ParamId,
    pub w2: ParamId,
    pub b2: ParamId,
    pub w3: ParamId,
    pub b3: ParamId,
}

fn he(rng: &mut impl Rng, fan_in: usize, fan_out: usize) -> Tensor {
    let data = normal_vec(rng, fan_in * fan_out, (2.0 / fan_in as f64).sqrt());
    Tensor::new(vec![fan_in, fan_out], data).expect("positive dims")
}

impl PointEncoderParams {
    pub fn register(store: &mut ParamStore, hidden: usize, dim: usize, rng: &mut impl Rng) -> Result<Self> {
        if hidden == 0 || dim == 0 {
            return Err(Error::Config("point encoder needs positive widths".into()));
        }
        Ok(Self {
            hidden,
            dim,
            w1: store.register("point.w1", he(rng, 3, hidden), true),
            b1: store.register("point.b1", Tensor::zeros(&[hidden]), false),
            w2: store.register("point.w2", he(rng, hidden, hidden), true),
            b2: store.register("point.b2", Tensor::zeros(&[hidden]), false),
            w3: store.register("point.w3", he(rng, hidden, dim), true),
            b3: store.register("point.b3", Tensor::zeros(&[dim]), false),
        })
    }

    /// Looks the parameters up by name in a restored store.
    pub fn from_store(store: &ParamStore) -> Result<Self> {
        let get = |n: &str| {
            store
                .find(n)
                .ok_or_else(|| Error::Checkpoint(format!("missing parameter {n}")))
        };
        let w1 = get("point.w1")?;
        let w3 = get("point.w3")?;
        Ok(Self {
            hidden: store.get(w1).cols(),
            dim: store.get(w3).cols(),
            w1,
            b1: get("point.b1")?,
            w2: get("point.w2")?,
            b2: get("point.b2")?,
            w3,
            b3: get("point.b3")?,
        })
    }
}

impl PointBackbone for PointEncoderParams {
    fn out_dim(&self) -> usize {
        self.dim
    }

    fn forward(&self, tape: &mut Tape, store: &ParamStore, clouds: &[&PointCloud]) -> Result<Var> {
        if clouds.is_empty() {
            return Err(Error::Input("no point clouds to encode".into()));
        }
        let mut flat = Vec::new();
        let mut sizes = Vec::with_capacity(clouds.len());
        for c in clouds {
            if c.is_empty() {
                return Err(Error::Input("empty point cloud".into()));
            }
            flat.extend(c.flat());
            sizes.push(c.len());
        }
        let rows = flat.len() / 3;
        let x = tape.constant(Tensor::new(vec![rows, 3], flat)?);
        let w1 = tape.param(store, self.w1);
        let b1 = tape.param(store, self.b1);
        let w2 = tape.param(store, self.w2);
        let b2 = tape.param(store, self.b2);
        let w3 = tape.param(store, self.w3);
        let b3 = tape.param(store, self.b3);

        let z = tape.matmul(x, w1)?;
        let z = tape.add_row(z, b1)?;
        let z = tape.relu(z);
        let z = tape.matmul(z, w2)?;
        let z = tape.add_row(z, b2)?;
        let z = tape.relu(z);
        let pooled = tape.segment_max(z, &sizes)?;
        let h = tape.matmul(pooled, w3)?;
        let h = tape.add_row(h, b3)?;
        Ok(tape.l2_normalize(h))
    }
}

/// Encodes one cloud outside of training.
pub fn encode_point_cloud(cloud: &PointCloud, params: &impl PointBackbone, store: &ParamStore) -> Result<Vec<f64>> {
    let mut tape = Tape::new();
    let out = params.forward(&mut tape, store, &[cloud])?;
    Ok(tape.value(out).data().to_vec())
}

/// Encodes many clouds in chunks; returns one row per cloud.
pub fn encode_point_clouds(
    clouds: &[&PointCloud],
    params: &impl PointBackbone,
    store: &ParamStore,
    chunk: usize,
) -> Result<Vec<Vec<f64>>> {
    let mut out = Vec::with_capacity(clouds.len());
    for part in clouds.chunks(chunk.max(1)) {
        let mut tape = Tape::new();
        let v = params.forward(&mut tape, store, part)?;
        let t = tape.value(v);
        out.extend((0..t.rows()).map(|i| t.row_slice(i).to_vec()));
    }
    Ok(out)
}
